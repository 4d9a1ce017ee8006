use rand::Rng;

use super::field::Fp;

/// Global MAC key `α`, opened only when the session ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacKey<const P: u64> {
    pub alpha: Fp<P>,
}

impl<const P: u64> MacKey<P> {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        MacKey { alpha: Fp::random(rng) }
    }
}

/// `⟨a⟩ = (δ, a₁…a_m, γ(a)₁…γ(a)_m)` with `Σaᵢ = a` and `α(a + δ) = Σγ(a)ᵢ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedValue<const P: u64> {
    pub delta: Fp<P>,
    pub shares: Vec<Fp<P>>,
    pub macs: Vec<Fp<P>>,
}

impl<const P: u64> SharedValue<P> {
    pub fn parties(&self) -> usize {
        self.shares.len()
    }

    /// `⟨a⟩ + c` for a public constant: party 0 adds `c` and the offset absorbs
    /// it, so the MAC shares stay as they are.
    pub fn add_public(&self, c: Fp<P>) -> Self {
        let mut out = self.clone();
        out.shares[0] += c;
        out.delta -= c;
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        SharedValue {
            delta: self.delta + other.delta,
            shares: self.shares.iter().zip(&other.shares).map(|(a, b)| *a + *b).collect(),
            macs: self.macs.iter().zip(&other.macs).map(|(a, b)| *a + *b).collect(),
        }
    }
}

fn split<const P: u64, R: Rng + ?Sized>(total: Fp<P>, m: usize, rng: &mut R) -> Vec<Fp<P>> {
    let mut parts: Vec<Fp<P>> = (0..m - 1).map(|_| Fp::random(rng)).collect();
    let rest: Fp<P> = parts.iter().sum();
    parts.push(total - rest);
    parts
}

/// Fresh sharing among `m ≥ 1` parties with offset `δ = 0`.
pub fn share<const P: u64, R: Rng + ?Sized>(a: Fp<P>, m: usize, key: &MacKey<P>, rng: &mut R) -> SharedValue<P> {
    assert!(m >= 1, "sharing needs at least one party");
    SharedValue {
        delta: Fp::ZERO,
        shares: split(a, m, rng),
        macs: split(key.alpha * a, m, rng),
    }
}

pub fn reconstruct<const P: u64>(sv: &SharedValue<P>) -> Fp<P> {
    sv.shares.iter().sum()
}

/// `α(a + δ) = Σγ(a)ᵢ`
pub fn mac_check<const P: u64>(sv: &SharedValue<P>, alpha: Fp<P>, opened: Fp<P>) -> bool {
    alpha * (opened + sv.delta) == sv.macs.iter().sum()
}
