use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::types::{check_shapes, DemandReport, IssuanceBounds, IssuanceCost, Valuation, ValuationModel};
use crate::error::{Error, Result};

/// Coupling residual allowed between allocations and issuance.
pub const COUPLING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareSolution {
    /// `allocation[i][t]`
    pub allocation: Vec<Vec<f64>>,
    pub issuance: Vec<f64>,
    /// Clearing price per slot (the coupling multiplier).
    pub prices: Vec<f64>,
    pub welfare: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub allocation: Vec<Vec<f64>>,
    pub issuance: Vec<f64>,
    pub prices: Vec<f64>,
    /// `payments[i][t]`
    pub payments: Vec<Vec<f64>>,
    pub welfare: f64,
    /// `exclusions[i]` is the allocation `x^{−i}`; row `i` of it is zero.
    pub exclusions: Vec<Vec<Vec<f64>>>,
    pub manager_utility: f64,
    /// Users whose allocation was voided by the overstatement penalty.
    pub voided: Vec<bool>,
}

impl AuctionOutcome {
    pub fn total_payments(&self) -> f64 {
        self.payments.iter().flatten().sum()
    }

    pub fn total_cost(&self, valuations: &ValuationModel) -> f64 {
        self.issuance
            .iter()
            .zip(&valuations.cost)
            .map(|(&y, c)| c.value(y))
            .sum()
    }
}

struct Slot<'a> {
    vals: Vec<Valuation>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: &'a IssuanceCost,
    y_max: f64,
}

impl Slot<'_> {
    fn user_range(&self, i: usize, price: f64) -> (f64, f64) {
        let v = &self.vals[i];
        if v.c > 0.0 {
            let x = ((v.b - price) / (2.0 * v.c)).clamp(self.lo[i], self.hi[i]);
            (x, x)
        } else if v.b > price {
            (self.hi[i], self.hi[i])
        } else if v.b < price {
            (self.lo[i], self.lo[i])
        } else {
            (self.lo[i], self.hi[i])
        }
    }

    fn issuance_range(&self, price: f64) -> (f64, f64) {
        if self.cost.k2 > 0.0 {
            let y = (price / (2.0 * self.cost.k2)).clamp(0.0, self.y_max);
            (y, y)
        } else if price > 0.0 {
            (self.y_max, self.y_max)
        } else if price < 0.0 {
            (0.0, 0.0)
        } else {
            (0.0, self.y_max)
        }
    }

    /// Range of excess demand `Σx − y` at a price.
    fn excess(&self, price: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (0.0, 0.0);
        for i in 0..self.vals.len() {
            let (a, b) = self.user_range(i, price);
            lo += a;
            hi += b;
        }
        let (ylo, yhi) = self.issuance_range(price);
        (lo - yhi, hi - ylo)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0, 2.0 * self.cost.k2 * self.y_max];
        for (i, v) in self.vals.iter().enumerate() {
            if v.c > 0.0 {
                pts.push(v.marginal(self.hi[i]));
                pts.push(v.marginal(self.lo[i]));
            } else {
                pts.push(v.b);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Exact clearing: excess demand is piecewise linear and non-increasing in
    /// the price, so the root lies at a breakpoint or on one linear piece.
    fn clear(&self) -> (Vec<f64>, f64, f64) {
        let pts = self.breakpoints();
        let mut price = None;
        for (k, &p) in pts.iter().enumerate() {
            let (lo, hi) = self.excess(p);
            if lo <= 0.0 && 0.0 <= hi {
                price = Some(p);
                break;
            }
            if let Some(&q) = pts.get(k + 1) {
                let right = lo;
                let (_, left) = self.excess(q);
                if right > 0.0 && left < 0.0 {
                    price = Some(p + (q - p) * right / (right - left));
                    break;
                }
            }
        }
        let price = price.unwrap_or_else(|| {
            // excess is positive everywhere only when every cap is slack
            *pts.last().expect("breakpoints include zero")
        });
        self.assemble(price)
    }

    fn assemble(&self, price: f64) -> (Vec<f64>, f64, f64) {
        let n = self.vals.len();
        let ranges: Vec<(f64, f64)> = (0..n).map(|i| self.user_range(i, price)).collect();
        let mut x: Vec<f64> = ranges.iter().map(|r| r.0).collect();
        let sum_lo: f64 = x.iter().sum();
        let (ylo, yhi) = self.issuance_range(price);
        let y = sum_lo.clamp(ylo, yhi);
        let mut short = y - sum_lo;
        for i in 0..n {
            if short <= 0.0 {
                break;
            }
            let room = ranges[i].1 - ranges[i].0;
            let add = room.min(short);
            x[i] += add;
            short -= add;
        }
        let total: f64 = x.iter().sum();
        (x, total.clamp(0.0, self.y_max), price)
    }
}

fn slot_view<'a>(
    reports: &[DemandReport],
    valuations: &'a ValuationModel,
    bounds: &IssuanceBounds,
    t: usize,
) -> Slot<'a> {
    Slot {
        vals: valuations.users.iter().map(|v| v[t]).collect(),
        lo: reports.iter().map(|r| r.slots[t].x_min).collect(),
        hi: reports.iter().map(|r| r.slots[t].x_max).collect(),
        cost: &valuations.cost[t],
        y_max: bounds.y_max[t],
    }
}

/// Social-welfare allocation under the given valuations.
///
/// The problem separates by slot; each slot is cleared exactly by a scan over
/// the breakpoints of the aggregate demand curve. Equal-price ties fill users
/// in id order.
pub fn solve_welfare(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    bounds: &IssuanceBounds,
) -> Result<WelfareSolution> {
    check_shapes(reports, valuations, bounds)?;
    let n = reports.len();
    let slots = valuations.slots();
    let mut allocation = vec![vec![0.0; slots]; n];
    let mut issuance = vec![0.0; slots];
    let mut prices = vec![0.0; slots];
    for t in 0..slots {
        let view = slot_view(reports, valuations, bounds, t);
        let floor: f64 = view.lo.iter().sum();
        if floor > view.y_max || view.y_max < 0.0 {
            return Err(Error::InfeasibleProblem(format!(
                "slot {t}: minimum demand {floor} exceeds issuance cap {}",
                view.y_max
            )));
        }
        let (x, y, p) = view.clear();
        for i in 0..n {
            allocation[i][t] = x[i];
        }
        issuance[t] = y;
        prices[t] = p;
    }
    let welfare = welfare_value(valuations, &allocation, &issuance);
    Ok(WelfareSolution {
        allocation,
        issuance,
        prices,
        welfare,
    })
}

pub fn welfare_value(valuations: &ValuationModel, allocation: &[Vec<f64>], issuance: &[f64]) -> f64 {
    let value: f64 = valuations
        .users
        .iter()
        .zip(allocation)
        .map(|(vs, xs)| vs.iter().zip(xs).map(|(v, &x)| v.value(x)).sum::<f64>())
        .sum();
    let cost: f64 = valuations.cost.iter().zip(issuance).map(|(c, &y)| c.value(y)).sum();
    value - cost
}

/// Largest KKT violation of a welfare solution at its clearing prices.
pub fn welfare_kkt_residual(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    bounds: &IssuanceBounds,
    sol: &WelfareSolution,
) -> f64 {
    let scale = |g: f64, x: f64, lo: f64, hi: f64| -> f64 {
        let tol = 1e-12 * (1.0 + hi.abs());
        if x <= lo + tol {
            g.max(0.0)
        } else if x >= hi - tol {
            (-g).max(0.0)
        } else {
            g.abs()
        }
    };
    let mut worst = 0.0_f64;
    for t in 0..valuations.slots() {
        let p = sol.prices[t];
        let mut total = 0.0;
        for (i, r) in reports.iter().enumerate() {
            let x = sol.allocation[i][t];
            total += x;
            let g = valuations.users[i][t].marginal(x) - p;
            worst = worst.max(scale(g, x, r.slots[t].x_min, r.slots[t].x_max));
            worst = worst.max((r.slots[t].x_min - x).max(x - r.slots[t].x_max).max(0.0));
        }
        let y = sol.issuance[t];
        let g = p - 2.0 * valuations.cost[t].k2 * y;
        worst = worst.max(scale(g, y, 0.0, bounds.y_max[t]));
        worst = worst.max((total - y).abs());
    }
    worst
}

/// The exclusion problem for user `i`: every other user at its own optimum
/// over `X_j`, with no coupling.
pub fn solve_excluding(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    i: usize,
) -> Result<Vec<Vec<f64>>> {
    if reports.len() < 2 {
        return Err(Error::InvalidParameter("exclusion needs at least two users".into()));
    }
    if i >= reports.len() {
        return Err(Error::InvalidParameter(format!("no user {i}")));
    }
    let mut out = Vec::with_capacity(reports.len());
    for (j, (r, vs)) in reports.iter().zip(&valuations.users).enumerate() {
        if j == i {
            out.push(vec![0.0; r.slots.len()]);
            continue;
        }
        let mut row = Vec::with_capacity(r.slots.len());
        for (s, v) in r.slots.iter().zip(vs) {
            if s.x_min > s.x_max {
                return Err(Error::InfeasibleProblem(format!("user {j} has an empty demand box")));
            }
            row.push(v.argmax_in(s.x_min, s.x_max));
        }
        out.push(row);
    }
    Ok(out)
}

fn others_value(valuations: &ValuationModel, allocation: &[Vec<f64>], i: usize, t: usize) -> f64 {
    valuations
        .users
        .iter()
        .zip(allocation)
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, (vs, xs))| vs[t].value(xs[t]))
        .sum()
}

/// `p_{i,t} = Σ_{j≠i} v_{j,t}(x^{−i}) − Σ_{j≠i} v_{j,t}(x*) + c_t(y*)`
pub fn vcg_payment(outcome: &AuctionOutcome, valuations: &ValuationModel, i: usize, t: usize) -> f64 {
    let cost = valuations.cost[t].value(outcome.issuance[t]);
    match outcome.exclusions.get(i) {
        Some(excl) if valuations.users.len() > 1 => {
            others_value(valuations, excl, i, t) - others_value(valuations, &outcome.allocation, i, t) + cost
        }
        _ => cost,
    }
}

/// `Σ_t v_{i,t}(x_{i,t}) − Σ_t p_{i,t}`
pub fn user_utility(valuations: &ValuationModel, allocation: &[Vec<f64>], payments: &[Vec<f64>], i: usize) -> f64 {
    let value: f64 = valuations.users[i]
        .iter()
        .zip(&allocation[i])
        .map(|(v, &x)| v.value(x))
        .sum();
    value - payments[i].iter().sum::<f64>()
}

/// Allocation, exclusions and payments under the reported valuations.
pub fn run_auction(
    reports: &[DemandReport],
    valuations: &ValuationModel,
    bounds: &IssuanceBounds,
) -> Result<AuctionOutcome> {
    let reported = valuations.reported(reports);
    let sol = solve_welfare(reports, &reported, bounds)?;
    let n = reports.len();
    let exclusions: Vec<Vec<Vec<f64>>> = if n > 1 {
        (0..n)
            .into_par_iter()
            .map(|i| solve_excluding(reports, &reported, i))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    assemble_outcome(sol, exclusions, &reported)
}

pub(crate) fn assemble_outcome(
    sol: WelfareSolution,
    exclusions: Vec<Vec<Vec<f64>>>,
    reported: &ValuationModel,
) -> Result<AuctionOutcome> {
    let n = sol.allocation.len();
    let mut outcome = AuctionOutcome {
        allocation: sol.allocation,
        issuance: sol.issuance,
        prices: sol.prices,
        payments: Vec::new(),
        welfare: sol.welfare,
        exclusions,
        manager_utility: 0.0,
        voided: vec![false; n],
    };
    let slots = reported.slots();
    outcome.payments = (0..n)
        .map(|i| (0..slots).map(|t| vcg_payment(&outcome, reported, i, t)).collect())
        .collect();
    if outcome.payments.iter().flatten().any(|p| !p.is_finite()) {
        return Err(Error::SubproblemFailure("non-finite VCG payment".into()));
    }
    outcome.manager_utility = outcome.total_payments() - outcome.total_cost(reported);
    Ok(outcome)
}

/// Voids the allocation of any user whose reported cap exceeds its true cap and
/// whose allocation went beyond the true cap; such users pay twice their VCG
/// payment.
pub fn apply_penalty(outcome: &mut AuctionOutcome, reported: &[DemandReport], truthful: &[DemandReport]) {
    for (i, (r, tr)) in reported.iter().zip(truthful).enumerate() {
        let caught = r.slots.iter().zip(&tr.slots).zip(&outcome.allocation[i]).any(|((rs, ts), &x)| {
            rs.x_max > ts.x_max && x > ts.x_max + COUPLING_TOLERANCE
        });
        if caught {
            outcome.voided[i] = true;
            for x in outcome.allocation[i].iter_mut() {
                *x = 0.0;
            }
            for p in outcome.payments[i].iter_mut() {
                *p *= 2.0;
            }
        }
    }
}
