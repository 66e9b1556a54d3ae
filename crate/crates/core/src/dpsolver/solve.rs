use std::sync::Arc;

use rayon::prelude::*;

use super::{
    boundary, is_admissible, ActionGrid, ActionPair, Boundary, Policy, State, StateSpace, Truncation,
    ValueSurface,
};
use crate::error::{Error, Result};
use crate::fillmodel::{apply_leg, drift_resting, FillModel};
use crate::params::{ModelParams, Side};
use crate::relprice::{Leg, RelPrice};
use crate::scalar::Scalar;

/// Latency-window outcomes below this probability are dropped from the
/// stage sums. The dropped mass is far below the kernel truncation error.
const PRUNE: f64 = 1e-18;

/// Margin an action must gain over the incumbent to replace it.
const TIE_EPS: f64 = 1e-13;

#[derive(Clone, Copy, Debug)]
struct Latency<T> {
    prob: T,
    ask_filled: bool,
    bid_filled: bool,
    d: i32,
}

#[derive(Clone, Copy, Debug)]
struct Active<T> {
    prob: T,
    dq: i32,
    slot_a: usize,
    slot_b: usize,
}

/// Precomputed transition pieces for one parameter set, reusable across
/// horizons.
pub struct Solver<T: Scalar> {
    model: Arc<FillModel<T>>,
    space: StateSpace,
    legs: Vec<Leg>,
    latency: Vec<Vec<Latency<T>>>,
    active: Vec<Vec<Active<T>>>,
    h_ask: Vec<T>,
    h_bid: Vec<T>,
    actions: [Vec<(usize, usize)>; 3],
    terminal: Vec<T>,
    pub pruned_mass: T,
}

fn class(b: Boundary) -> usize {
    match b {
        Boundary::Lower => 0,
        Boundary::Upper => 1,
        Boundary::Interior => 2,
    }
}

impl<T: Scalar> Solver<T> {
    pub fn new(model: Arc<FillModel<T>>, truncation: Truncation, grid: ActionGrid) -> Result<Self> {
        let p = model.params().clone();
        let space = StateSpace::for_params(&p, truncation)?;
        if grid.max > truncation.r_max as i32 {
            return Err(Error::Truncation(format!(
                "r_max = {} is below the largest grid quote {}",
                truncation.r_max, grid.max
            )));
        }
        if grid.min > grid.max {
            return Err(Error::InvalidParams("empty quote grid".into()));
        }
        let n = space.n_rel();
        let r_max = truncation.r_max;
        let legs = grid.legs();
        let t2 = p.delta_t - p.delta_tau;

        let mut latency = Vec::with_capacity(n * n);
        let mut active = Vec::with_capacity(n * n);
        let mut pruned = T::zero();
        for ia in 0..n {
            for ib in 0..n {
                let (ra, rb) = (space.rel_at(ia), space.rel_at(ib));
                let k1 = model.kernel(ra, rb, p.delta_tau)?;
                let mut v = Vec::new();
                for c in &k1.cells {
                    if c.prob.to_f64_lossy() < PRUNE {
                        pruned = pruned + c.prob;
                        continue;
                    }
                    v.push(Latency {
                        prob: c.prob,
                        ask_filled: c.ask.filled(),
                        bid_filled: c.bid.filled(),
                        d: c.displacement,
                    });
                }
                latency.push(v);

                let k2 = model.kernel(ra, rb, t2)?;
                let mut agg: std::collections::BTreeMap<(i32, usize, usize), T> = Default::default();
                for c in &k2.cells {
                    let na = if c.ask.filled() {
                        RelPrice::PosInf
                    } else {
                        drift_resting(Side::Ask, ra, c.displacement, r_max)
                    };
                    let nb = if c.bid.filled() {
                        RelPrice::PosInf
                    } else {
                        drift_resting(Side::Bid, rb, c.displacement, r_max)
                    };
                    let dq = i32::from(c.bid.filled()) - i32::from(c.ask.filled());
                    let key = (dq, space.rel_index(na).unwrap(), space.rel_index(nb).unwrap());
                    let e = agg.entry(key).or_insert(T::zero());
                    *e = *e + c.prob;
                }
                active.push(
                    agg.into_iter()
                        .map(|((dq, slot_a, slot_b), prob)| Active { prob, dq, slot_a, slot_b })
                        .collect(),
                );
            }
        }

        let nl = legs.len();
        let mut h_ask = vec![T::zero(); n * nl];
        let mut h_bid = vec![T::zero(); n * nl];
        for i in 0..n {
            for (l, &leg) in legs.iter().enumerate() {
                h_ask[i * nl + l] = model.h_act(Side::Ask, space.rel_at(i), leg)?;
                h_bid[i * nl + l] = model.h_act(Side::Bid, space.rel_at(i), leg)?;
            }
        }

        let probe = |b: Boundary| -> Vec<(usize, usize)> {
            let s = match b {
                Boundary::Lower => State::flat(p.q_lo),
                Boundary::Upper => State::flat(p.q_hi),
                Boundary::Interior => State::flat(0),
            };
            let mut v = Vec::new();
            for la in 0..nl {
                for lb in 0..nl {
                    if is_admissible(s, ActionPair::new(legs[la], legs[lb]), &p) {
                        v.push((la, lb));
                    }
                }
            }
            v
        };
        let actions = [probe(Boundary::Lower), probe(Boundary::Upper), probe(Boundary::Interior)];

        let mut terminal = vec![T::nan(); space.table_len()];
        for s in space.states() {
            terminal[space.index(s)?] = terminal_g_with(&model, s)?;
        }

        Ok(Solver { model, space, legs, latency, active, h_ask, h_bid, actions, terminal, pruned_mass: pruned })
    }

    pub fn from_params(params: &ModelParams, truncation: Truncation, grid: ActionGrid) -> Result<Self> {
        Self::new(Arc::new(FillModel::new(params.clone())?), truncation, grid)
    }

    pub fn model(&self) -> &Arc<FillModel<T>> {
        &self.model
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn terminal(&self) -> &[T] {
        &self.terminal
    }

    fn inf_slot(&self) -> usize {
        self.space.r_max as usize + 1
    }

    /// Expected next-period value from each post-latency slot
    /// `(q, x_ask, x_bid)`; NaN where the slot is not a valid state.
    fn continuation(&self, next: &[T]) -> Vec<T> {
        let sp = &self.space;
        let n = sp.n_rel();
        let mut w = vec![T::nan(); sp.table_len()];
        w.par_chunks_mut(n * n).enumerate().for_each(|(qi, chunk)| {
            let q = sp.q_lo + qi as i32;
            for xa in 0..n {
                for xb in 0..n {
                    if !sp.slot_valid(q, xa, xb) {
                        continue;
                    }
                    let mut acc = T::zero();
                    for e in &self.active[xa * n + xb] {
                        acc = acc + e.prob * next[sp.slot(q + e.dq, e.slot_a, e.slot_b)];
                    }
                    chunk[xa * n + xb] = acc;
                }
            }
        });
        w
    }

    fn reach_error(&self, s: State, a: ActionPair) -> Error {
        Error::Unreachable(format!("{s} under {a} leaves the state space"))
    }

    /// Best admissible grid action for `s` and its value.
    fn optimize_state(&self, s: State, w: &[T]) -> Result<(ActionPair, T)> {
        let sp = &self.space;
        let n = sp.n_rel();
        let nl = self.legs.len();
        let ia = sp.rel_index(s.ask).unwrap();
        let ib = sp.rel_index(s.bid).unwrap();
        let acts = &self.actions[class(boundary(s, self.model.params()))];
        let mut acc = vec![T::zero(); acts.len()];
        let mut ea = vec![(0i32, 0usize); nl];
        let mut eb = vec![(0i32, 0usize); nl];
        for o in &self.latency[ia * n + ib] {
            let sa = if o.ask_filled { RelPrice::PosInf } else { s.ask };
            let sb = if o.bid_filled { RelPrice::PosInf } else { s.bid };
            let q1 = s.q - i32::from(o.ask_filled) + i32::from(o.bid_filled);
            for l in 0..nl {
                let e = apply_leg(Side::Ask, self.legs[l], sa, o.d, sp.r_max);
                ea[l] = (-i32::from(e.immediate), sp.rel_index(e.resting).unwrap());
                let e = apply_leg(Side::Bid, self.legs[l], sb, o.d, sp.r_max);
                eb[l] = (i32::from(e.immediate), sp.rel_index(e.resting).unwrap());
            }
            for (k, &(la, lb)) in acts.iter().enumerate() {
                let (da, xa) = ea[la];
                let (db, xb) = eb[lb];
                let qm = q1 + da + db;
                if qm < sp.q_lo || qm > sp.q_hi {
                    return Err(self.reach_error(s, ActionPair::new(self.legs[la], self.legs[lb])));
                }
                acc[k] = acc[k] + o.prob * w[sp.slot(qm, xa, xb)];
            }
        }
        let mut best: Option<(usize, T)> = None;
        let eps = T::of(TIE_EPS);
        for (k, &(la, lb)) in acts.iter().enumerate() {
            let g = self.h_ask[ia * nl + la] + self.h_bid[ib * nl + lb] + acc[k];
            if g.is_nan() {
                return Err(self.reach_error(s, ActionPair::new(self.legs[la], self.legs[lb])));
            }
            if best.is_none_or(|(_, b)| g > b + eps) {
                best = Some((k, g));
            }
        }
        let (k, g) = best.expect("null action is always admissible");
        let (la, lb) = acts[k];
        Ok((ActionPair::new(self.legs[la], self.legs[lb]), g))
    }

    /// Value of a given action in `s` against the continuation table.
    fn action_value(&self, s: State, a: ActionPair, w: &[T]) -> Result<T> {
        let sp = &self.space;
        let n = sp.n_rel();
        let p = self.model.params();
        if !is_admissible(s, a, p) {
            return Err(Error::Inadmissible { state: s.to_string(), action: a.to_string() });
        }
        let ia = sp.rel_index(s.ask).unwrap();
        let ib = sp.rel_index(s.bid).unwrap();
        let mut acc = T::zero();
        for o in &self.latency[ia * n + ib] {
            let sa = if o.ask_filled { RelPrice::PosInf } else { s.ask };
            let sb = if o.bid_filled { RelPrice::PosInf } else { s.bid };
            let q1 = s.q - i32::from(o.ask_filled) + i32::from(o.bid_filled);
            let e1 = apply_leg(Side::Ask, a.ask, sa, o.d, sp.r_max);
            let e2 = apply_leg(Side::Bid, a.bid, sb, o.d, sp.r_max);
            let qm = q1 - i32::from(e1.immediate) + i32::from(e2.immediate);
            if qm < sp.q_lo || qm > sp.q_hi {
                return Err(self.reach_error(s, a));
            }
            let slot = sp.slot(qm, sp.rel_index(e1.resting).unwrap(), sp.rel_index(e2.resting).unwrap());
            acc = acc + o.prob * w[slot];
        }
        let g = self.model.h_act(Side::Ask, s.ask, a.ask)? + self.model.h_act(Side::Bid, s.bid, a.bid)? + acc;
        if g.is_nan() {
            return Err(self.reach_error(s, a));
        }
        Ok(g)
    }

    fn valid_slots(&self) -> Vec<usize> {
        let sp = &self.space;
        (0..sp.table_len()).filter(|&i| sp.check(sp.unslot(i)).is_ok()).collect()
    }

    /// One Bellman stage: `g_i` and the argmax actions from `g_{i+1}`.
    fn stage(&self, next: &[T], slots: &[usize]) -> Result<(Vec<T>, Vec<Option<ActionPair>>)> {
        let w = self.continuation(next);
        let res: Vec<(usize, ActionPair, T)> = slots
            .par_iter()
            .map(|&i| self.optimize_state(self.space.unslot(i), &w).map(|(a, g)| (i, a, g)))
            .collect::<Result<_>>()?;
        let mut g = vec![T::nan(); self.space.table_len()];
        let mut f = vec![None; self.space.table_len()];
        for (i, a, v) in res {
            g[i] = v;
            f[i] = Some(a);
        }
        Ok((g, f))
    }

    /// Full backward induction over `n_periods` decision periods.
    pub fn solve(&self, n_periods: usize) -> Result<(ValueSurface<T>, Policy)> {
        let slots = self.valid_slots();
        let mut tables = vec![self.terminal.clone()];
        let mut actions = Vec::with_capacity(n_periods);
        for _ in 0..n_periods {
            let (g, f) = self.stage(tables.last().unwrap(), &slots)?;
            tables.push(g);
            actions.push(f);
        }
        tables.reverse();
        actions.reverse();
        Ok((ValueSurface { space: self.space, tables }, Policy { space: self.space, actions }))
    }

    /// `P(N)` for `N = 0..=n_max` from a single backward pass, using that
    /// the recursion does not depend on calendar time.
    pub fn profit_curve(&self, n_max: usize) -> Result<Vec<T>> {
        let slots = self.valid_slots();
        let origin = self.space.slot(0, self.inf_slot(), self.inf_slot());
        let mut g = self.terminal.clone();
        let mut out = vec![g[origin]];
        for _ in 0..n_max {
            g = self.stage(&g, &slots)?.0;
            out.push(g[origin]);
        }
        Ok(out)
    }

    /// Values of a fixed policy.
    pub fn evaluate(&self, policy: &Policy) -> Result<ValueSurface<T>> {
        if policy.space != self.space {
            return Err(Error::Policy("policy was built on a different state space".into()));
        }
        let slots = self.valid_slots();
        let mut tables = vec![self.terminal.clone()];
        for i in (0..policy.n_periods()).rev() {
            let w = self.continuation(tables.last().unwrap());
            let vals: Vec<(usize, T)> = slots
                .par_iter()
                .map(|&k| {
                    let s = self.space.unslot(k);
                    let a = policy.actions[i][k]
                        .ok_or_else(|| Error::Policy(format!("no action for {s} in period {i}")))?;
                    self.action_value(s, a, &w).map(|g| (k, g))
                })
                .collect::<Result<_>>()?;
            let mut g = vec![T::nan(); self.space.table_len()];
            for (k, v) in vals {
                g[k] = v;
            }
            tables.push(g);
        }
        tables.reverse();
        Ok(ValueSurface { space: self.space, tables })
    }
}

fn terminal_g_with<T: Scalar>(model: &FillModel<T>, s: State) -> Result<T> {
    let p = model.params();
    let k = model.kernel(s.ask, s.bid, p.delta_tau)?;
    let mut pen = T::zero();
    for c in &k.cells {
        let q = s.q - i32::from(c.ask.filled()) + i32::from(c.bid.filled());
        pen = pen + c.prob * T::of(f64::from(q.abs()));
    }
    let ha = model.order_value_zero_delay(Side::Ask, s.ask, p.delta_tau)?;
    let hb = model.order_value_zero_delay(Side::Bid, s.bid, p.delta_tau)?;
    Ok(ha + hb - T::half() * pen)
}

/// Terminal reduced value: outstanding orders run through the latency
/// window, then the inventory is unwound at half a tick from the mid.
pub fn terminal_g<T: Scalar>(s: State, params: &ModelParams) -> Result<T> {
    terminal_g_with(&FillModel::<T>::new(params.clone())?, s)
}

pub fn backward_solve<T: Scalar>(
    params: &ModelParams,
    truncation: Truncation,
    grid: ActionGrid,
) -> Result<(ValueSurface<T>, Policy)> {
    Solver::<T>::from_params(params, truncation, grid)?.solve(params.n_periods)
}

pub fn expected_profit<T: Scalar>(params: &ModelParams, truncation: Truncation, grid: ActionGrid) -> Result<T> {
    let solver = Solver::<T>::from_params(params, truncation, grid)?;
    Ok(*solver.profit_curve(params.n_periods)?.last().unwrap())
}

pub fn evaluate_policy<T: Scalar>(policy: &Policy, params: &ModelParams, truncation: Truncation) -> Result<ValueSurface<T>> {
    let solver = Solver::<T>::from_params(params, truncation, ActionGrid::new(0, 0))?;
    solver.evaluate(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use RelPrice::*;

    fn small(dtau: f64, lp: f64) -> ModelParams {
        ModelParams::new(0.5, lp, lp, dtau, 1.0, 6.3, -2, 2).unwrap().with_n_periods(6)
    }

    #[test]
    fn terminal_values() {
        let p = small(0.3, 0.4);
        assert_eq!(terminal_g::<f64>(State::flat(0), &p).unwrap(), 0.0);
        assert!((terminal_g::<f64>(State::flat(3), &p).unwrap() + 1.5).abs() < 1e-12);
        let m = FillModel::<f64>::new(p.clone()).unwrap();
        let s = State { q: 0, ask: Int(0), bid: PosInf };
        let want = m.order_value_zero_delay(Side::Ask, Int(0), 0.3).unwrap()
            - 0.5 * m.fill_probability(Side::Ask, Int(0), 0.3).unwrap();
        assert!((terminal_g::<f64>(s, &p).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn thin_flow_never_pays() {
        let p = small(0.3, 0.2);
        let v: f64 = expected_profit(&p, Truncation { r_max: 8 }, ActionGrid::new(-1, 4)).unwrap();
        assert!(v.abs() < 1e-10, "{v}");
    }

    #[test]
    fn optimal_policy_evaluates_to_its_value() {
        let p = small(0.3, 0.4);
        let tr = Truncation { r_max: 6 };
        let solver = Solver::<f64>::from_params(&p, tr, ActionGrid::new(-1, 3)).unwrap();
        let (vs, pol) = solver.solve(p.n_periods).unwrap();
        pol.validate(&p).unwrap();
        let ev = solver.evaluate(&pol).unwrap();
        for i in 0..=p.n_periods {
            for s in vs.space.states() {
                assert!((vs.get(i, s).unwrap() - ev.get(i, s).unwrap()).abs() < 1e-12);
            }
        }
        assert!(vs.profit() > 0.0);
        let curve = solver.profit_curve(p.n_periods).unwrap();
        assert_eq!(*curve.last().unwrap(), vs.profit());
    }

    #[test]
    fn null_policy_is_zero() {
        let p = small(0.3, 0.4);
        let tr = Truncation { r_max: 6 };
        let sp = StateSpace::for_params(&p, tr).unwrap();
        let pol = Policy::constant(sp, p.n_periods, ActionPair::NULL);
        let ev = evaluate_policy::<f64>(&pol, &p, tr).unwrap();
        assert_eq!(ev.profit(), 0.0);
    }

    #[test]
    fn grid_beyond_truncation_rejected() {
        let p = small(0.3, 0.4);
        assert!(Solver::<f64>::from_params(&p, Truncation { r_max: 3 }, ActionGrid::new(0, 5)).is_err());
    }

    #[test]
    fn no_latency_ignores_outstanding_orders() {
        let p = small(0.0, 0.4);
        let tr = Truncation { r_max: 6 };
        let (vs, _) = backward_solve::<f64>(&p, tr, ActionGrid::new(-1, 3)).unwrap();
        for i in 0..p.n_periods {
            for s in vs.space.states() {
                if matches!(s.ask, Int(k) if k > 3) || matches!(s.bid, Int(k) if k > 3) {
                    continue;
                }
                let flat = vs.get(i, State::flat(s.q)).unwrap();
                assert!((vs.get(i, s).unwrap() - flat).abs() < 1e-10, "{i} {s}");
            }
        }
    }

    #[test]
    fn single_precision_solve() {
        let p = small(0.3, 0.4);
        let tr = Truncation { r_max: 6 };
        let a: f32 = expected_profit(&p, tr, ActionGrid::new(-1, 3)).unwrap();
        let b: f64 = expected_profit(&p, tr, ActionGrid::new(-1, 3)).unwrap();
        assert!((a as f64 - b).abs() < 1e-4);
    }
}
