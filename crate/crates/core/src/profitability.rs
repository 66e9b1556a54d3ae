//! When does market making pay: regime classification, the smallest
//! profitable horizon and a constructive bound for it.

use serde::Serialize;

use crate::dpsolver::{ActionGrid, ActionPair, Policy, Solver, State, StateSpace, Truncation};
use crate::error::{Error, Result};
use crate::fillmodel::FillModel;
use crate::ordervalue::DEFAULT_SEARCH_LIMIT;
use crate::params::{ModelParams, Side};
use crate::relprice::{Leg, RelPrice};
use crate::scalar::Scalar;

pub const DEFAULT_TOL_POS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    NeverProfitable,
    ProfitableForLargeN,
    Indeterminate,
}

/// A positive-value quote on one side, its value over a full period with
/// latency and its probability of executing in that lifetime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quote<T> {
    pub delta: i32,
    pub value: T,
    pub fill_prob: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuotePair<T> {
    pub ask: Quote<T>,
    pub bid: Quote<T>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfitabilityReport {
    pub regime: Regime,
    pub n_min: Option<usize>,
    pub n_min_upper: Option<u64>,
    pub quote_pair: Option<QuotePair<f64>>,
}

pub fn classify(params: &ModelParams) -> Regime {
    let half = 0.5 * params.lambda;
    match (params.lambda_plus > half, params.lambda_minus > half) {
        (false, false) => Regime::NeverProfitable,
        (true, true) => Regime::ProfitableForLargeN,
        _ => Regime::Indeterminate,
    }
}

/// Probability that a quote sent at a decision time executes before the
/// cancel sent one period later takes effect.
pub fn quote_lifetime_fill<T: Scalar>(model: &FillModel<T>, side: Side, delta: i32) -> Result<T> {
    let p = model.params();
    model.quote_fill_probability(side, delta, p.delta_tau, p.delta_t)
}

/// Best positive quote on each side over one period with latency.
pub fn default_quote_pair<T: Scalar>(model: &FillModel<T>) -> Result<Option<QuotePair<T>>> {
    let p = model.params();
    let side = |s: Side| -> Result<Option<Quote<T>>> {
        Ok(match model.best_positive_quote(s, p.delta_tau, p.delta_t, DEFAULT_SEARCH_LIMIT)? {
            Some((delta, value)) => {
                Some(Quote { delta, value, fill_prob: quote_lifetime_fill(model, s, delta)? })
            }
            None => None,
        })
    };
    Ok(match (side(Side::Ask)?, side(Side::Bid)?) {
        (Some(ask), Some(bid)) => Some(QuotePair { ask, bid }),
        _ => None,
    })
}

fn inner_ceiling<T: Scalar>(q: &Quote<T>) -> Result<u64> {
    let (h, p) = (q.value.to_f64_lossy(), q.fill_prob.to_f64_lossy());
    if !(h > 0.0) {
        return Err(Error::InvalidParams(format!("quote value must be positive, got {h}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParams(format!("fill probability must lie in (0, 1), got {p}")));
    }
    let x = ((h / (h + 0.5 * p)).ln() / (1.0 - p).ln()).ceil();
    Ok((x as u64).max(1))
}

/// Constructive upper bound on the smallest profitable number of periods.
pub fn n_min_upper_bound<T: Scalar>(pair: &QuotePair<T>) -> Result<u64> {
    Ok(2 * inner_ceiling(&pair.ask)?.max(inner_ceiling(&pair.bid)?) + 2)
}

/// Value at period 2 and inventory +-1 of the two-period quoting policy
/// over `n` periods, in closed form.
pub fn theorem3_closed_form(h: f64, p: f64, n: usize) -> f64 {
    let k = (n / 2) as i32;
    (-0.5 - h / p) * (1.0 - p).powi(k - 1) + h / p
}

/// Smallest `N` with `curve[N] > tol_pos`, by bisection. `curve` must be
/// nondecreasing.
pub fn first_positive_bisect<T: Scalar>(curve: &[T], tol_pos: f64) -> Option<usize> {
    let tol = T::of(tol_pos);
    let last = curve.len().checked_sub(1)?;
    if curve[last] <= tol {
        return None;
    }
    let (mut lo, mut hi) = (0usize, last);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if curve[mid] > tol {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

pub fn first_positive_linear<T: Scalar>(curve: &[T], tol_pos: f64) -> Option<usize> {
    curve.iter().position(|&v| v > T::of(tol_pos))
}

/// Smallest profitable `N <= n_max`, or `None`.
pub fn find_n_min<T: Scalar>(
    params: &ModelParams,
    n_max: usize,
    truncation: Truncation,
    grid: ActionGrid,
    tol_pos: f64,
) -> Result<Option<usize>> {
    if n_max < 1 {
        return Err(Error::InvalidParams("n_max must be >= 1".into()));
    }
    let curve = Solver::<T>::from_params(params, truncation, grid)?.profit_curve(n_max)?;
    let n = first_positive_bisect(&curve, tol_pos);
    debug_assert_eq!(n, first_positive_linear(&curve, tol_pos));
    Ok(n)
}

/// The two-period quoting policy: quote both sides at period 0, cancel on
/// odd periods and on even periods quote only the side that flattens a
/// unit inventory.
pub fn make_theorem3_policy<T: Scalar>(
    params: &ModelParams,
    space: StateSpace,
    pair: &QuotePair<T>,
) -> Result<Policy> {
    let n = params.n_periods;
    if n < 4 || n % 2 == 1 {
        return Err(Error::Policy(format!("the policy needs an even N >= 4, got {n}")));
    }
    let mut pol = Policy::constant(space, n, ActionPair::NULL);
    let ask = Leg::Quote(RelPrice::Int(pair.ask.delta));
    let bid = Leg::Quote(RelPrice::Int(pair.bid.delta));
    pol.set(0, State::flat(0), ActionPair::new(ask, bid))?;
    for i in (2..n).step_by(2) {
        for s in space.states() {
            if s.q == 1 {
                pol.set(i, s, ActionPair::new(ask, Leg::CANCEL))?;
            } else if s.q == -1 {
                pol.set(i, s, ActionPair::new(Leg::CANCEL, bid))?;
            }
        }
    }
    pol.validate(params)?;
    Ok(pol)
}

pub fn report(
    params: &ModelParams,
    n_max: usize,
    truncation: Truncation,
    grid: ActionGrid,
    tol_pos: f64,
) -> Result<ProfitabilityReport> {
    let regime = classify(params);
    let model = FillModel::<f64>::new(params.clone())?;
    let pair = default_quote_pair(&model)?;
    let n_min_upper = match &pair {
        Some(qp) => n_min_upper_bound(qp).ok(),
        None => None,
    };
    let n_min = if regime == Regime::NeverProfitable {
        None
    } else {
        find_n_min::<f64>(params, n_max, truncation, grid, tol_pos)?
    };
    Ok(ProfitabilityReport { regime, n_min, n_min_upper, quote_pair: pair })
}
