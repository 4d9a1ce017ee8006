use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Every user linked to the manager only.
    #[default]
    Star,
    /// Star edges plus a link between every pair of users.
    Complete,
}

/// Random node and link failures. Node `N` (one past the last user) is the
/// manager, which is always online.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub alpha: Vec<f64>,
    pub p_e: f64,
    pub seed: u64,
    #[serde(default)]
    pub topology: Topology,
}

/// Users online and edges usable in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSets {
    pub users: Vec<bool>,
    pub edges: Vec<(usize, usize)>,
}

impl ActiveSets {
    pub fn active_count(&self) -> usize {
        self.users.iter().filter(|&&a| a).count()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let e = (i.min(j), i.max(j));
        self.edges.binary_search(&e).is_ok()
    }
}

impl NetworkModel {
    pub fn reliable(users: usize) -> Self {
        NetworkModel {
            alpha: vec![1.0; users],
            p_e: 0.0,
            seed: 0,
            topology: Topology::Star,
        }
    }

    pub fn uniform(users: usize, alpha: f64, p_e: f64, seed: u64) -> Self {
        NetworkModel {
            alpha: vec![alpha; users],
            p_e,
            seed,
            topology: Topology::Star,
        }
    }

    pub fn users(&self) -> usize {
        self.alpha.len()
    }

    pub fn manager(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidParameter(format!("online probability {a} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.p_e) {
            return Err(Error::InvalidParameter(format!(
                "link interruption probability {} outside [0, 1]",
                self.p_e
            )));
        }
        Ok(())
    }

    fn online(&self, node: usize) -> f64 {
        self.alpha.get(node).copied().unwrap_or(1.0)
    }

    /// `β_ij = α_i α_j (1 − p_e)`
    pub fn pair_activity(&self, i: usize, j: usize) -> f64 {
        self.online(i) * self.online(j) * (1.0 - self.p_e)
    }
}

/// Draws `(Ω^k, Ψ^k)`. Round `k` uses its own ChaCha stream so draws do not
/// depend on how many rounds were sampled before.
pub fn sample_active_sets(net: &NetworkModel, k: u64) -> ActiveSets {
    let mut rng = ChaCha8Rng::seed_from_u64(net.seed);
    rng.set_stream(k);
    let n = net.users();
    let users: Vec<bool> = net.alpha.iter().map(|&a| rng.random::<f64>() < a).collect();
    let mut edges = Vec::new();
    let mut link = |rng: &mut ChaCha8Rng, i: usize, j: usize, both: bool| {
        let up = rng.random::<f64>() >= net.p_e;
        if both && up {
            edges.push((i, j));
        }
    };
    if net.topology == Topology::Complete {
        for i in 0..n {
            for j in (i + 1)..n {
                link(&mut rng, i, j, users[i] && users[j]);
            }
        }
    }
    for (i, &on) in users.iter().enumerate() {
        link(&mut rng, i, n, on);
    }
    edges.sort_unstable();
    ActiveSets { users, edges }
}
