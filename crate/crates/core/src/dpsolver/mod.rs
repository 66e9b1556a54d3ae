//! Backward induction on the reduced state `(q, r_ask, r_bid)`.
//!
//! Cash and the marked inventory separate out of the value function, so
//! only `g_i(q, r_ask, r_bid)` is tabulated. Values are in ticks.

mod solve;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::relprice::{Leg, RelPrice};

pub use solve::{backward_solve, evaluate_policy, expected_profit, terminal_g, Solver};

pub const DEFAULT_R_MAX: u32 = 16;
pub const DEFAULT_GRID_MIN: i32 = -2;
pub const DEFAULT_GRID_MAX: i32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub q: i32,
    pub ask: RelPrice,
    pub bid: RelPrice,
}

impl State {
    pub fn flat(q: i32) -> State {
        State { q, ask: RelPrice::PosInf, bid: RelPrice::PosInf }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(q={}, ask={}, bid={})", self.q, self.ask, self.bid)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionPair {
    pub ask: Leg,
    pub bid: Leg,
}

impl ActionPair {
    pub const NULL: ActionPair = ActionPair { ask: Leg::CANCEL, bid: Leg::CANCEL };

    pub fn new(ask: Leg, bid: Leg) -> Self {
        ActionPair { ask, bid }
    }
}

impl fmt::Display for ActionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.ask, self.bid)
    }
}

/// Largest finite relative price kept for outstanding orders; farther
/// orders are treated as absent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub r_max: u32,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { r_max: DEFAULT_R_MAX }
    }
}

/// Candidate quotes `min..=max` plus market order, cancel and do-nothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub min: i32,
    pub max: i32,
}

impl Default for ActionGrid {
    fn default() -> Self {
        ActionGrid { min: DEFAULT_GRID_MIN, max: DEFAULT_GRID_MAX }
    }
}

impl ActionGrid {
    pub fn new(min: i32, max: i32) -> Self {
        ActionGrid { min, max }
    }

    /// Legs sorted by tie-break rank.
    pub fn legs(&self) -> Vec<Leg> {
        let mut v: Vec<Leg> = (self.min..=self.max).map(Leg::int).collect();
        v.extend([Leg::DoNothing, Leg::CANCEL, Leg::MARKET]);
        v.sort_by_key(|l| l.rank());
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    pub q_lo: i32,
    pub q_hi: i32,
    pub r_max: u32,
}

impl StateSpace {
    pub fn new(q_lo: i32, q_hi: i32, r_max: u32) -> Result<Self> {
        if q_lo >= q_hi || r_max < 1 {
            return Err(Error::InvalidParams(format!(
                "state space needs q_lo < q_hi and r_max >= 1, got [{q_lo}, {q_hi}], r_max = {r_max}"
            )));
        }
        Ok(StateSpace { q_lo, q_hi, r_max })
    }

    pub fn for_params(p: &ModelParams, t: Truncation) -> Result<Self> {
        Self::new(p.q_lo, p.q_hi, t.r_max)
    }

    /// Number of relative-price slots: `0..=r_max` and `inf`.
    pub fn n_rel(&self) -> usize {
        self.r_max as usize + 2
    }

    pub fn rel_index(&self, r: RelPrice) -> Option<usize> {
        match r {
            RelPrice::Int(k) if k >= 0 && k <= self.r_max as i32 => Some(k as usize),
            RelPrice::PosInf => Some(self.r_max as usize + 1),
            _ => None,
        }
    }

    pub fn rel_at(&self, i: usize) -> RelPrice {
        if i > self.r_max as usize {
            RelPrice::PosInf
        } else {
            RelPrice::Int(i as i32)
        }
    }

    pub fn n_q(&self) -> usize {
        (self.q_hi - self.q_lo + 1) as usize
    }

    /// Size of the dense table, including slots that violate the
    /// boundary constraints.
    pub fn table_len(&self) -> usize {
        self.n_q() * self.n_rel() * self.n_rel()
    }

    pub fn slot(&self, q: i32, ia: usize, ib: usize) -> usize {
        let n = self.n_rel();
        ((q - self.q_lo) as usize * n + ia) * n + ib
    }

    pub fn unslot(&self, i: usize) -> State {
        let n = self.n_rel();
        State {
            q: self.q_lo + (i / (n * n)) as i32,
            ask: self.rel_at((i / n) % n),
            bid: self.rel_at(i % n),
        }
    }

    pub fn index(&self, s: State) -> Result<usize> {
        self.check(s)?;
        Ok(self.slot(s.q, self.rel_index(s.ask).unwrap(), self.rel_index(s.bid).unwrap()))
    }

    /// Whether slot `(q, ia, ib)` obeys the inventory-boundary constraints.
    pub fn slot_valid(&self, q: i32, ia: usize, ib: usize) -> bool {
        let inf = self.r_max as usize + 1;
        q >= self.q_lo && q <= self.q_hi && (q != self.q_lo || ia == inf) && (q != self.q_hi || ib == inf)
    }

    pub fn check(&self, s: State) -> Result<()> {
        match (self.rel_index(s.ask), self.rel_index(s.bid)) {
            (Some(ia), Some(ib)) if self.slot_valid(s.q, ia, ib) => Ok(()),
            _ => Err(Error::StateOutOfSpace(format!(
                "{s} with q in [{}, {}] and r_max = {}",
                self.q_lo, self.q_hi, self.r_max
            ))),
        }
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.table_len()).map(|i| self.unslot(i)).filter(|s| self.check(*s).is_ok())
    }

    pub fn len(&self) -> usize {
        self.states().count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Which inventory boundary, if any, restricts the actions of `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Lower,
    Upper,
    Interior,
}

pub fn boundary(s: State, p: &ModelParams) -> Boundary {
    let lag = p.delta_tau > 0.0;
    if s.q == p.q_lo || (lag && s.q == p.q_lo + 1 && s.ask.is_finite()) {
        Boundary::Lower
    } else if s.q == p.q_hi || (lag && s.q == p.q_hi - 1 && s.bid.is_finite()) {
        Boundary::Upper
    } else {
        Boundary::Interior
    }
}

/// Admissibility of a single action, for any legs (on or off a grid).
pub fn is_admissible(s: State, a: ActionPair, p: &ModelParams) -> bool {
    let sell_free = matches!(a.ask, Leg::DoNothing | Leg::Quote(RelPrice::PosInf));
    let buy_free = matches!(a.bid, Leg::DoNothing | Leg::Quote(RelPrice::PosInf));
    match boundary(s, p) {
        Boundary::Lower => sell_free || a.bid == Leg::MARKET,
        Boundary::Upper => buy_free || a.ask == Leg::MARKET,
        Boundary::Interior => true,
    }
}

/// All grid actions admissible in `s`, in tie-break order.
pub fn admissible_actions(s: State, p: &ModelParams, grid: &ActionGrid) -> Vec<ActionPair> {
    let legs = grid.legs();
    let mut out = Vec::new();
    for &a in &legs {
        for &b in &legs {
            let act = ActionPair::new(a, b);
            if is_admissible(s, act, p) {
                out.push(act);
            }
        }
    }
    out
}

/// Per-period tables `g_i`, `i = 0..=N`; slots outside the state space
/// hold NaN.
#[derive(Clone, Debug, Serialize)]
pub struct ValueSurface<T> {
    pub space: StateSpace,
    pub tables: Vec<Vec<T>>,
}

impl<T: Copy> ValueSurface<T> {
    pub fn n_periods(&self) -> usize {
        self.tables.len() - 1
    }

    pub fn get(&self, i: usize, s: State) -> Result<T> {
        Ok(self.tables[i][self.space.index(s)?])
    }

    /// `g_0(0, inf, inf)`.
    pub fn profit(&self) -> T {
        self.tables[0][self.space.slot(0, self.space.r_max as usize + 1, self.space.r_max as usize + 1)]
    }
}

/// Markov policy `f_0, ..., f_{N-1}` on the truncated state space.
#[derive(Clone, Debug, Serialize)]
pub struct Policy {
    pub space: StateSpace,
    pub actions: Vec<Vec<Option<ActionPair>>>,
}

impl Policy {
    pub fn empty(space: StateSpace, n_periods: usize) -> Self {
        Policy { space, actions: vec![vec![None; space.table_len()]; n_periods] }
    }

    /// Same action everywhere.
    pub fn constant(space: StateSpace, n_periods: usize, a: ActionPair) -> Self {
        Policy { space, actions: vec![vec![Some(a); space.table_len()]; n_periods] }
    }

    pub fn n_periods(&self) -> usize {
        self.actions.len()
    }

    pub fn get(&self, i: usize, s: State) -> Option<ActionPair> {
        let idx = self.space.index(s).ok()?;
        self.actions.get(i)?.get(idx).copied().flatten()
    }

    pub fn set(&mut self, i: usize, s: State, a: ActionPair) -> Result<()> {
        let idx = self.space.index(s)?;
        self.actions[i][idx] = Some(a);
        Ok(())
    }

    /// Confirms every stored action is admissible for its state.
    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        for table in &self.actions {
            for s in self.space.states() {
                if let Some(a) = table[self.space.slot_of(s)] {
                    if !is_admissible(s, a, p) {
                        return Err(Error::Inadmissible { state: s.to_string(), action: a.to_string() });
                    }
                }
            }
        }
        Ok(())
    }
}

impl StateSpace {
    fn slot_of(&self, s: State) -> usize {
        self.slot(s.q, self.rel_index(s.ask).unwrap(), self.rel_index(s.bid).unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use RelPrice::*;

    fn params(dtau: f64) -> ModelParams {
        ModelParams::per_minute(1.56, 0.875, 0.875, dtau, 1.0, 10.0, -4, 4).unwrap()
    }

    #[test]
    fn state_space_constraints() {
        let sp = StateSpace::new(-4, 4, 16).unwrap();
        for s in sp.states() {
            if s.q == -4 {
                assert_eq!(s.ask, PosInf);
            }
            if s.q == 4 {
                assert_eq!(s.bid, PosInf);
            }
            assert_eq!(sp.unslot(sp.index(s).unwrap()), s);
        }
        assert_eq!(sp.len(), 7 * 18 * 18 + 2 * 18);
        assert!(sp.check(State { q: -4, ask: Int(0), bid: PosInf }).is_err());
        assert!(sp.check(State { q: 0, ask: Int(17), bid: PosInf }).is_err());
        assert!(sp.check(State { q: 0, ask: Int(-1), bid: PosInf }).is_err());
    }

    #[test]
    fn interior_gets_full_product() {
        let p = params(0.02);
        let g = ActionGrid::default();
        let n = g.legs().len();
        assert_eq!(admissible_actions(State::flat(0), &p, &g).len(), n * n);
    }

    #[test]
    fn upper_boundary_without_latency() {
        let p = params(0.0);
        let acts = admissible_actions(State::flat(4), &p, &ActionGrid::default());
        assert!(acts.contains(&ActionPair::new(Leg::int(0), Leg::CANCEL)));
        assert!(acts.contains(&ActionPair::new(Leg::MARKET, Leg::int(0))));
        assert!(!acts.contains(&ActionPair::new(Leg::CANCEL, Leg::int(0))));
        let s = State { q: 3, ask: PosInf, bid: Int(0) };
        assert_eq!(boundary(s, &p), Boundary::Interior);
    }

    #[test]
    fn lower_boundary_with_latency() {
        let p = params(0.02);
        let s = State { q: -3, ask: Int(0), bid: PosInf };
        let acts = admissible_actions(s, &p, &ActionGrid::default());
        assert!(!acts.contains(&ActionPair::new(Leg::int(2), Leg::int(1))));
        assert!(acts.contains(&ActionPair::new(Leg::DoNothing, Leg::int(1))));
        assert!(acts.contains(&ActionPair::new(Leg::int(2), Leg::MARKET)));
        let s = State { q: -3, ask: PosInf, bid: PosInf };
        assert_eq!(boundary(s, &p), Boundary::Interior);
    }

    #[test]
    fn null_action_always_admissible() {
        for dtau in [0.0, 0.3] {
            let p = params(dtau);
            let sp = StateSpace::for_params(&p, Truncation { r_max: 4 }).unwrap();
            for s in sp.states() {
                assert!(is_admissible(s, ActionPair::NULL, &p), "{s}");
            }
        }
    }

    #[test]
    fn grid_leg_order() {
        let legs = ActionGrid::new(-1, 1).legs();
        assert_eq!(
            legs,
            vec![Leg::DoNothing, Leg::int(0), Leg::int(1), Leg::int(-1), Leg::CANCEL, Leg::MARKET]
        );
    }
}
