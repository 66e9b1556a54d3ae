//! Fill probabilities and joint fill/displacement kernels.
//!
//! The chain tracks the mid-price displacement `d` from the start of the
//! window together with the status of at most one ask and one bid. An ask
//! at relative price `r` is at the touch while `d == r`; there it is lifted
//! by an uninformed buyer at rate `lambda_plus`, and an up-jump from `d == r`
//! executes it adversely. The bid is the mirror image.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::ctmc::{uniformize, POISSON_TAIL};
use crate::dpsolver::{self, ActionPair, State};
use crate::error::{Error, Result};
use crate::increments::{edge_per_fill, price_increment_dist, PriceIncrementDist};
use crate::params::{ModelParams, Side};
use crate::relprice::{Leg, RelPrice};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FillType {
    None,
    Uninformed,
    Adverse,
    /// Marketable on arrival at the latency boundary.
    Immediate,
}

impl FillType {
    pub fn filled(self) -> bool {
        self != FillType::None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelCell<T> {
    pub ask: FillType,
    pub bid: FillType,
    pub displacement: i32,
    pub prob: T,
}

/// Joint law of (ask fill, bid fill, displacement) over one window.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseKernel<T> {
    pub duration: f64,
    pub orders_in: (RelPrice, RelPrice),
    pub half_width: usize,
    pub cells: Vec<KernelCell<T>>,
    pub truncation_error: T,
}

impl<T: Scalar> PhaseKernel<T> {
    pub fn total(&self) -> T {
        self.cells.iter().map(|c| c.prob).sum()
    }

    pub fn fill_probability(&self, side: Side) -> T {
        self.cells
            .iter()
            .filter(|c| side_of(c, side).filled())
            .map(|c| c.prob)
            .sum()
    }

    pub fn fill_split(&self, side: Side) -> (T, T) {
        let mut u = T::zero();
        let mut a = T::zero();
        for c in &self.cells {
            match side_of(c, side) {
                FillType::Uninformed => u = u + c.prob,
                FillType::Adverse => a = a + c.prob,
                _ => {}
            }
        }
        (u, a)
    }

    /// Displacement marginal as `(d, P(d))`, sorted by `d`.
    pub fn displacement_marginal(&self) -> Vec<(i32, T)> {
        let mut m: BTreeMap<i32, T> = BTreeMap::new();
        for c in &self.cells {
            let e = m.entry(c.displacement).or_insert(T::zero());
            *e = *e + c.prob;
        }
        m.into_iter().collect()
    }

    fn point_mass(ask_in: RelPrice, bid_in: RelPrice, duration: f64) -> Self {
        PhaseKernel {
            duration,
            orders_in: (ask_in, bid_in),
            half_width: 0,
            cells: vec![KernelCell {
                ask: FillType::None,
                bid: FillType::None,
                displacement: 0,
                prob: T::one(),
            }],
            truncation_error: T::zero(),
        }
    }
}

fn side_of<T>(c: &KernelCell<T>, side: Side) -> FillType {
    match side {
        Side::Ask => c.ask,
        Side::Bid => c.bid,
    }
}

fn check_resting(r: RelPrice) -> Result<()> {
    match r {
        RelPrice::PosInf => Ok(()),
        RelPrice::Int(k) if k >= 0 => Ok(()),
        other => Err(Error::InvalidRelPrice(format!(
            "resting orders need a relative price >= 0 or inf, got {other}"
        ))),
    }
}

/// Builds the kernel on a lattice of half-width `half_width`, or on the
/// automatically chosen one when `None`.
pub fn phase_kernel_with_width<T: Scalar>(
    ask_in: RelPrice,
    bid_in: RelPrice,
    duration: f64,
    params: &ModelParams,
    half_width: Option<usize>,
) -> Result<PhaseKernel<T>> {
    check_resting(ask_in)?;
    check_resting(bid_in)?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParams(format!("window length must be >= 0, got {duration}")));
    }
    let has_ask = ask_in.is_finite();
    let has_bid = bid_in.is_finite();
    let rate = params.lambda
        + if has_ask { params.lambda_plus } else { 0.0 }
        + if has_bid { params.lambda_minus } else { 0.0 };
    if duration == 0.0 || rate == 0.0 {
        return Ok(PhaseKernel::point_mass(ask_in, bid_in, duration));
    }
    let k = match half_width {
        Some(k) => k,
        None => {
            let inc = price_increment_dist::<f64>(params.lambda, duration, params.epsilon_tail / 4.0)?;
            inc.half_width() + 2
        }
    };
    let width = 2 * k + 1;
    let na = if has_ask { 3 } else { 1 };
    let nb = if has_bid { 3 } else { 1 };
    let n_states = na * nb * width;
    let sink = n_states;
    let idx = |sa: usize, sb: usize, d: i64| (sa * nb + sb) * width + (d + k as i64) as usize;

    let up = T::of(0.5 * params.lambda / rate);
    let uninf_a = T::of(if has_ask { params.lambda_plus / rate } else { 0.0 });
    let uninf_b = T::of(if has_bid { params.lambda_minus / rate } else { 0.0 });
    let ra = ask_in.as_int().map(i64::from);
    let rb = bid_in.as_int().map(|r| -i64::from(r));
    let kk = k as i64;

    let mut init = vec![T::zero(); n_states + 1];
    init[idx(0, 0, 0)] = T::one();

    let step = |v: &[T], out: &mut [T]| {
        out[sink] = out[sink] + v[sink];
        for sa in 0..na {
            for sb in 0..nb {
                for d in -kk..=kk {
                    let m = v[idx(sa, sb, d)];
                    if m == T::zero() {
                        continue;
                    }
                    let ask_touch = sa == 0 && has_ask && Some(d) == ra;
                    let bid_touch = sb == 0 && has_bid && Some(d) == rb;
                    let stay = idx(sa, sb, d);
                    // up-jump
                    let mu = m * up;
                    if d + 1 > kk {
                        out[sink] = out[sink] + mu;
                    } else {
                        let sa2 = if ask_touch { 2 } else { sa };
                        let j = idx(sa2, sb, d + 1);
                        out[j] = out[j] + mu;
                    }
                    // down-jump
                    if d - 1 < -kk {
                        out[sink] = out[sink] + mu;
                    } else {
                        let sb2 = if bid_touch { 2 } else { sb };
                        let j = idx(sa, sb2, d - 1);
                        out[j] = out[j] + mu;
                    }
                    if has_ask {
                        let x = m * uninf_a;
                        let j = if ask_touch { idx(1, sb, d) } else { stay };
                        out[j] = out[j] + x;
                    }
                    if has_bid {
                        let x = m * uninf_b;
                        let j = if bid_touch { idx(sa, 1, d) } else { stay };
                        out[j] = out[j] + x;
                    }
                }
            }
        }
    };
    let (dist, poisson_tail) = uniformize(init, rate * duration, POISSON_TAIL, step);

    let status = |present: bool, s: usize| match (present, s) {
        (false, _) | (true, 0) => FillType::None,
        (true, 1) => FillType::Uninformed,
        _ => FillType::Adverse,
    };
    let mut cells = Vec::new();
    for sa in 0..na {
        for sb in 0..nb {
            for d in -kk..=kk {
                let p = dist[idx(sa, sb, d)];
                if p > T::zero() {
                    cells.push(KernelCell {
                        ask: status(has_ask, sa),
                        bid: status(has_bid, sb),
                        displacement: d as i32,
                        prob: p,
                    });
                }
            }
        }
    }
    Ok(PhaseKernel {
        duration,
        orders_in: (ask_in, bid_in),
        half_width: k,
        cells,
        truncation_error: poisson_tail + dist[sink],
    })
}

pub fn phase_kernel<T: Scalar>(
    ask_in: RelPrice,
    bid_in: RelPrice,
    duration: f64,
    params: &ModelParams,
) -> Result<PhaseKernel<T>> {
    phase_kernel_with_width(ask_in, bid_in, duration, params, None)
}

fn single_side(side: Side, rel: RelPrice) -> (RelPrice, RelPrice) {
    match side {
        Side::Ask => (rel, RelPrice::PosInf),
        Side::Bid => (RelPrice::PosInf, rel),
    }
}

/// Probability that a resting order at `rel` executes within `t` seconds.
pub fn fill_probability<T: Scalar>(side: Side, rel: RelPrice, t: f64, params: &ModelParams) -> Result<T> {
    let (a, b) = single_side(side, rel);
    Ok(phase_kernel::<T>(a, b, t, params)?.fill_probability(side))
}

/// `(P(uninformed fill), P(adverse fill))` within `t` seconds.
pub fn fill_split<T: Scalar>(side: Side, rel: RelPrice, t: f64, params: &ModelParams) -> Result<(T, T)> {
    let (a, b) = single_side(side, rel);
    Ok(phase_kernel::<T>(a, b, t, params)?.fill_split(side))
}

/// What one leg does at the moment the instruction reaches the exchange.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LegEffect {
    /// The new order is marketable and executes on arrival.
    pub immediate: bool,
    /// Relative price of the resting order afterwards (`PosInf` if none).
    pub resting: RelPrice,
}

/// Applies `leg` at the latency boundary. `surviving` is the old order's
/// relative price at the start of the period if it is still resting, else
/// `PosInf`; `d0` is the mid displacement over the latency window. Resting
/// prices above `r_max` are dropped.
pub fn apply_leg(side: Side, leg: Leg, surviving: RelPrice, d0: i32, r_max: u32) -> LegEffect {
    let s = side.drift_sign();
    let clamp = |r: RelPrice| match r {
        RelPrice::Int(x) if x > r_max as i32 => RelPrice::PosInf,
        other => other,
    };
    match leg {
        Leg::DoNothing => LegEffect { immediate: false, resting: clamp(surviving.shift(s * d0)) },
        Leg::Quote(RelPrice::PosInf) => LegEffect { immediate: false, resting: RelPrice::PosInf },
        Leg::Quote(RelPrice::NegInf) => LegEffect { immediate: true, resting: RelPrice::PosInf },
        Leg::Quote(RelPrice::Int(delta)) => {
            let x = delta + s * d0;
            if x <= -1 {
                LegEffect { immediate: true, resting: RelPrice::PosInf }
            } else {
                LegEffect { immediate: false, resting: clamp(RelPrice::Int(x)) }
            }
        }
    }
}

/// Relative price at the end of a window for an order that did not fill.
pub fn drift_resting(side: Side, r: RelPrice, d: i32, r_max: u32) -> RelPrice {
    match r.shift(side.drift_sign() * d) {
        RelPrice::Int(x) if x > r_max as i32 => RelPrice::PosInf,
        other => other,
    }
}

/// Law of the next reduced state after one decision period.
#[derive(Clone, Debug, Serialize)]
pub struct PeriodOutcome<T> {
    /// Next state with its probability, sorted.
    pub next: Vec<(State, T)>,
    /// Next state jointly with the total displacement over the period.
    pub joint: Vec<(State, i32, T)>,
    pub truncation_error: T,
}

type KernelKey = (RelPrice, RelPrice, u64);

/// Shared, cached access to the kernels and order values of one parameter
/// set. Cache reads are concurrent; inserts take a short write lock.
pub struct FillModel<T: Scalar> {
    params: ModelParams,
    kernels: RwLock<HashMap<KernelKey, Arc<PhaseKernel<T>>>>,
    increments: RwLock<HashMap<u64, Arc<PriceIncrementDist<T>>>>,
    pub(crate) zero_delay: RwLock<HashMap<(Side, i32, u64), T>>,
}

impl<T: Scalar> FillModel<T> {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(FillModel {
            params,
            kernels: RwLock::new(HashMap::new()),
            increments: RwLock::new(HashMap::new()),
            zero_delay: RwLock::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn kernel(&self, ask_in: RelPrice, bid_in: RelPrice, duration: f64) -> Result<Arc<PhaseKernel<T>>> {
        let key = (ask_in, bid_in, duration.to_bits());
        if let Some(k) = self.kernels.read().expect("kernel cache poisoned").get(&key) {
            return Ok(Arc::clone(k));
        }
        let k = Arc::new(phase_kernel(ask_in, bid_in, duration, &self.params)?);
        let mut w = self.kernels.write().expect("kernel cache poisoned");
        Ok(Arc::clone(w.entry(key).or_insert(k)))
    }

    pub fn increments(&self, t: f64) -> Result<Arc<PriceIncrementDist<T>>> {
        let key = t.to_bits();
        if let Some(d) = self.increments.read().expect("increment cache poisoned").get(&key) {
            return Ok(Arc::clone(d));
        }
        let d = Arc::new(price_increment_dist(self.params.lambda, t, self.params.epsilon_tail)?);
        let mut w = self.increments.write().expect("increment cache poisoned");
        Ok(Arc::clone(w.entry(key).or_insert(d)))
    }

    pub fn fill_probability(&self, side: Side, rel: RelPrice, t: f64) -> Result<T> {
        let (a, b) = single_side(side, rel);
        Ok(self.kernel(a, b, t)?.fill_probability(side))
    }

    pub fn fill_split(&self, side: Side, rel: RelPrice, t: f64) -> Result<(T, T)> {
        let (a, b) = single_side(side, rel);
        Ok(self.kernel(a, b, t)?.fill_split(side))
    }

    pub fn edge(&self, side: Side) -> Result<T> {
        edge_per_fill(self.params.lambda, self.params.side_rate(side)).map(T::of)
    }

    /// Next-state law from `state` under `action`, by chaining the latency
    /// window kernel, the action at the boundary and the active window
    /// kernel.
    pub fn compose_period(&self, state: State, action: ActionPair, r_max: u32) -> Result<PeriodOutcome<T>> {
        let p = &self.params;
        let space = dpsolver::StateSpace::new(p.q_lo, p.q_hi, r_max)?;
        space.check(state)?;
        if !dpsolver::is_admissible(state, action, p) {
            return Err(Error::Inadmissible { state: state.to_string(), action: action.to_string() });
        }
        let t2 = p.delta_t - p.delta_tau;
        let k1 = self.kernel(state.ask, state.bid, p.delta_tau)?;
        let mut trunc = k1.truncation_error;
        let mut joint: BTreeMap<(State, i32), T> = BTreeMap::new();
        for c1 in &k1.cells {
            let q1 = state.q - i32::from(c1.ask.filled()) + i32::from(c1.bid.filled());
            let sa = if c1.ask.filled() { RelPrice::PosInf } else { state.ask };
            let sb = if c1.bid.filled() { RelPrice::PosInf } else { state.bid };
            let ea = apply_leg(Side::Ask, action.ask, sa, c1.displacement, r_max);
            let eb = apply_leg(Side::Bid, action.bid, sb, c1.displacement, r_max);
            let qm = q1 - i32::from(ea.immediate) + i32::from(eb.immediate);
            let k2 = self.kernel(ea.resting, eb.resting, t2)?;
            trunc = trunc + c1.prob * k2.truncation_error;
            for c2 in &k2.cells {
                let q2 = qm - i32::from(c2.ask.filled()) + i32::from(c2.bid.filled());
                let na = if c2.ask.filled() {
                    RelPrice::PosInf
                } else {
                    drift_resting(Side::Ask, ea.resting, c2.displacement, r_max)
                };
                let nb = if c2.bid.filled() {
                    RelPrice::PosInf
                } else {
                    drift_resting(Side::Bid, eb.resting, c2.displacement, r_max)
                };
                let next = State { q: q2, ask: na, bid: nb };
                let pr = c1.prob * c2.prob;
                if pr > T::zero() && space.check(next).is_err() {
                    return Err(Error::Unreachable(format!(
                        "{state} under {action} reaches {next} with probability {pr}"
                    )));
                }
                let e = joint.entry((next, c1.displacement + c2.displacement)).or_insert(T::zero());
                *e = *e + pr;
            }
        }
        let mut next: BTreeMap<State, T> = BTreeMap::new();
        for (&(s, _), &pr) in &joint {
            let e = next.entry(s).or_insert(T::zero());
            *e = *e + pr;
        }
        Ok(PeriodOutcome {
            next: next.into_iter().collect(),
            joint: joint.into_iter().map(|((s, d), pr)| (s, d, pr)).collect(),
            truncation_error: trunc,
        })
    }
}

/// Free-function form of [`FillModel::compose_period`].
pub fn compose_period<T: Scalar>(
    state: State,
    action: ActionPair,
    params: &ModelParams,
    r_max: u32,
) -> Result<PeriodOutcome<T>> {
    FillModel::<T>::new(params.clone())?.compose_period(state, action, r_max)
}
