//! Event-driven simulation of a quoting policy.
//!
//! Cash is kept in half-ticks so every execution price `p +- 0.5 + r` is
//! an exact integer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::dpsolver::{is_admissible, ActionPair, Policy, State};
use crate::error::{Error, Result};
use crate::fillmodel::FillType;
use crate::params::{ModelParams, Side};
use crate::relprice::{Leg, RelPrice};

/// Variant order is the tie-break order for equal timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum EventKind {
    PriceUp,
    PriceDown,
    UninformedBuy,
    UninformedSell,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarketEvent {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Clone, Debug, Serialize)]
pub struct MarketEventStream {
    pub seed: u64,
    pub horizon: f64,
    pub events: Vec<MarketEvent>,
}

/// Draws the four independent Poisson streams on `[0, horizon)`.
pub fn market_events<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R, horizon: f64) -> Vec<MarketEvent> {
    let rates = [
        (EventKind::PriceUp, 0.5 * params.lambda),
        (EventKind::PriceDown, 0.5 * params.lambda),
        (EventKind::UninformedBuy, params.lambda_plus),
        (EventKind::UninformedSell, params.lambda_minus),
    ];
    let mut ev = Vec::new();
    for (kind, rate) in rates {
        if rate <= 0.0 {
            continue;
        }
        let exp = Exp::new(rate).expect("positive rate");
        let mut t = exp.sample(rng);
        while t < horizon {
            ev.push(MarketEvent { time: t, kind });
            t += exp.sample(rng);
        }
    }
    ev.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.kind.cmp(&b.kind)));
    ev
}

pub fn simulate_market(params: &ModelParams, seed: u64, horizon: f64) -> MarketEventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MarketEventStream { seed, horizon, events: market_events(params, &mut rng, horizon) }
}

/// Initial wealth (half-ticks), mid-price (ticks) and inventory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Start {
    pub wealth: i64,
    pub mid: i64,
    pub q: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TradeRecord {
    pub time: f64,
    pub period: usize,
    pub side: Side,
    /// Execution price in half-ticks.
    pub price: i64,
    pub fill: FillType,
    /// Signed cash flow in half-ticks.
    pub cash: i64,
    /// Order's relative price when it executed (`NegInf` for market orders).
    pub rel_price: RelPrice,
    pub mid_before: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimResult {
    pub initial_wealth: i64,
    pub terminal_wealth: i64,
    pub trades: Vec<TradeRecord>,
    /// `(time, q)` after every change, starting with the initial value.
    pub inventory_path: Vec<(f64, i32)>,
    /// State seen and action taken at each decision time.
    pub decisions: Vec<(State, ActionPair)>,
    /// Inventory and mid just before the final unwind.
    pub final_q: i32,
    pub final_mid: i64,
    pub unwind_cash: i64,
}

impl SimResult {
    pub fn ledger_balances(&self) -> bool {
        let flows: i64 = self.trades.iter().map(|t| t.cash).sum();
        self.terminal_wealth == self.initial_wealth + flows + self.unwind_cash
    }
}

struct Book {
    mid: i64,
    q: i32,
    cash: i64,
    ask: Option<i64>,
    bid: Option<i64>,
}

impl Book {
    fn best_ask(&self) -> i64 {
        2 * self.mid + 1
    }
    fn best_bid(&self) -> i64 {
        2 * self.mid - 1
    }
    fn rel(&self, side: Side) -> RelPrice {
        match side {
            Side::Ask => self.ask.map_or(RelPrice::PosInf, |a| RelPrice::Int(((a - self.best_ask()) / 2) as i32)),
            Side::Bid => self.bid.map_or(RelPrice::PosInf, |b| RelPrice::Int(((self.best_bid() - b) / 2) as i32)),
        }
    }
    fn state(&self) -> State {
        State { q: self.q, ask: self.rel(Side::Ask), bid: self.rel(Side::Bid) }
    }
    /// Cancels orders whose relative price exceeds `r_max`.
    fn drop_far(&mut self, r_max: u32) {
        if matches!(self.rel(Side::Ask), RelPrice::Int(k) if k > r_max as i32) {
            self.ask = None;
        }
        if matches!(self.rel(Side::Bid), RelPrice::Int(k) if k > r_max as i32) {
            self.bid = None;
        }
    }
}

struct Run<'a> {
    book: Book,
    trades: Vec<TradeRecord>,
    inv: Vec<(f64, i32)>,
    events: &'a [MarketEvent],
    next_event: usize,
}

impl Run<'_> {
    fn fill(&mut self, time: f64, period: usize, side: Side, price: i64, fill: FillType, rel: RelPrice) {
        let cash = match side {
            Side::Ask => price,
            Side::Bid => -price,
        };
        self.trades.push(TradeRecord { time, period, side, price, fill, cash, rel_price: rel, mid_before: self.book.mid });
        self.book.cash += cash;
        self.book.q += side.inventory_step();
        self.inv.push((time, self.book.q));
    }

    /// Processes every event with time `< until`.
    fn advance(&mut self, until: f64, period: usize) {
        while let Some(&e) = self.events.get(self.next_event) {
            if e.time >= until {
                break;
            }
            self.next_event += 1;
            let b = &self.book;
            let ask_touch = b.ask == Some(b.best_ask());
            let bid_touch = b.bid == Some(b.best_bid());
            match e.kind {
                EventKind::PriceUp => {
                    if ask_touch {
                        let px = self.book.ask.take().unwrap();
                        self.fill(e.time, period, Side::Ask, px, FillType::Adverse, RelPrice::Int(0));
                    }
                    self.book.mid += 1;
                }
                EventKind::PriceDown => {
                    if bid_touch {
                        let px = self.book.bid.take().unwrap();
                        self.fill(e.time, period, Side::Bid, px, FillType::Adverse, RelPrice::Int(0));
                    }
                    self.book.mid -= 1;
                }
                EventKind::UninformedBuy => {
                    if ask_touch {
                        let px = self.book.ask.take().unwrap();
                        self.fill(e.time, period, Side::Ask, px, FillType::Uninformed, RelPrice::Int(0));
                    }
                }
                EventKind::UninformedSell => {
                    if bid_touch {
                        let px = self.book.bid.take().unwrap();
                        self.fill(e.time, period, Side::Bid, px, FillType::Uninformed, RelPrice::Int(0));
                    }
                }
            }
        }
    }

    /// Applies one leg when the instruction reaches the exchange.
    /// `decision_mid` is the mid at the decision time the quote refers to.
    fn arrive(&mut self, time: f64, period: usize, side: Side, leg: Leg, decision_mid: i64) {
        let delta = match leg {
            Leg::DoNothing => return,
            Leg::Quote(r) => r,
        };
        match side {
            Side::Ask => self.book.ask = None,
            Side::Bid => self.book.bid = None,
        }
        match delta {
            RelPrice::PosInf => {}
            RelPrice::NegInf => {
                let px = match side {
                    Side::Ask => self.book.best_bid(),
                    Side::Bid => self.book.best_ask(),
                };
                self.fill(time, period, side, px, FillType::Immediate, RelPrice::NegInf);
            }
            RelPrice::Int(d) => {
                let (own, rel) = match side {
                    Side::Ask => (2 * decision_mid + 1 + 2 * i64::from(d), d - (self.book.mid - decision_mid) as i32),
                    Side::Bid => (2 * decision_mid - 1 - 2 * i64::from(d), d + (self.book.mid - decision_mid) as i32),
                };
                if rel <= -1 {
                    let px = match side {
                        Side::Ask => self.book.best_bid(),
                        Side::Bid => self.book.best_ask(),
                    };
                    self.fill(time, period, side, px, FillType::Immediate, RelPrice::Int(rel));
                } else {
                    match side {
                        Side::Ask => self.book.ask = Some(own),
                        Side::Bid => self.book.bid = Some(own),
                    }
                }
            }
        }
    }
}

/// Replays `events` against `policy` from `start`.
pub fn run_policy(policy: &Policy, events: &[MarketEvent], params: &ModelParams, start: Start) -> Result<SimResult> {
    let n = params.n_periods;
    if policy.n_periods() != n {
        return Err(Error::Policy(format!(
            "policy covers {} periods but the horizon has {n}",
            policy.n_periods()
        )));
    }
    let r_max = policy.space.r_max;
    let mut run = Run {
        book: Book { mid: start.mid, q: start.q, cash: 0, ask: None, bid: None },
        trades: Vec::new(),
        inv: vec![(0.0, start.q)],
        events,
        next_event: 0,
    };
    if start.q < params.q_lo || start.q > params.q_hi {
        return Err(Error::StateOutOfSpace(format!("initial inventory {}", start.q)));
    }
    let mut decisions = Vec::with_capacity(n);
    for i in 0..n {
        let t_i = i as f64 * params.delta_t;
        let s = run.book.state();
        let a = policy
            .get(i, s)
            .ok_or_else(|| Error::Policy(format!("no action for {s} in period {i}")))?;
        if !is_admissible(s, a, params) {
            return Err(Error::Inadmissible { state: s.to_string(), action: a.to_string() });
        }
        decisions.push((s, a));
        let decision_mid = run.book.mid;
        let arrival = t_i + params.delta_tau;
        run.advance(arrival, i);
        // Market legs first, so a hedging market order at an inventory bound
        // never lets the other leg step outside it.
        let bid_first = a.bid == Leg::MARKET && (a.ask != Leg::MARKET || run.book.q < 0);
        let legs = if bid_first { [(Side::Bid, a.bid), (Side::Ask, a.ask)] } else { [(Side::Ask, a.ask), (Side::Bid, a.bid)] };
        for (side, leg) in legs {
            run.arrive(arrival, i, side, leg, decision_mid);
        }
        run.book.drop_far(r_max);
        run.advance((i + 1) as f64 * params.delta_t, i);
        run.book.drop_far(r_max);
        if run.book.q < params.q_lo || run.book.q > params.q_hi {
            return Err(Error::Unreachable(format!("inventory {} after period {i}", run.book.q)));
        }
    }
    run.advance(n as f64 * params.delta_t + params.delta_tau, n);
    let (q, mid) = (run.book.q, run.book.mid);
    let unwind = 2 * mid * i64::from(q) - i64::from(q.abs());
    let terminal = start.wealth + run.book.cash + unwind;
    Ok(SimResult {
        initial_wealth: start.wealth,
        terminal_wealth: terminal,
        trades: run.trades,
        inventory_path: run.inv,
        decisions,
        final_q: q,
        final_mid: mid,
        unwind_cash: unwind,
    })
}

/// Horizon covered by a run: all periods plus the final latency window.
pub fn run_horizon(params: &ModelParams) -> f64 {
    params.n_periods as f64 * params.delta_t + params.delta_tau
}

/// Per-path generator: stream `path` of the seeded ChaCha8 family.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Sample mean and standard error of terminal wealth in ticks.
pub fn mc_policy_value(
    policy: &Policy,
    params: &ModelParams,
    start: Start,
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_paths < 2 {
        return Err(Error::InvalidParams("n_paths must be >= 2".into()));
    }
    let horizon = run_horizon(params);
    let w: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(seed, k as u64);
            let ev = market_events(params, &mut rng, horizon);
            run_policy(policy, &ev, params, start).map(|r| r.terminal_wealth as f64 / 2.0)
        })
        .collect::<Result<_>>()?;
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpsolver::{StateSpace, Truncation};

    fn params() -> ModelParams {
        ModelParams::new(0.8, 0.6, 0.5, 0.3, 1.0, 20.3, -3, 3).unwrap()
    }

    fn space(p: &ModelParams) -> StateSpace {
        StateSpace::for_params(p, Truncation { r_max: 6 }).unwrap()
    }

    #[test]
    fn zero_rates_give_empty_stream() {
        let p = ModelParams::new(0.0, 0.0, 0.0, 0.0, 1.0, 10.0, -2, 2).unwrap();
        assert!(simulate_market(&p, 1, 100.0).events.is_empty());
    }

    #[test]
    fn stream_is_reproducible_and_sorted() {
        let p = params();
        let a = simulate_market(&p, 7, 50.0);
        let b = simulate_market(&p, 7, 50.0);
        assert_eq!(a.events, b.events);
        assert!(a.events.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(a.events.iter().all(|e| e.time < 50.0));
    }

    #[test]
    fn price_event_count_and_drift() {
        let p = params();
        let (n, horizon) = (10_000u64, 5.0);
        let mut counts = Vec::new();
        let mut moves = Vec::new();
        for s in 0..n {
            let ev = market_events(&p, &mut path_rng(3, s), horizon);
            let up = ev.iter().filter(|e| e.kind == EventKind::PriceUp).count() as f64;
            let dn = ev.iter().filter(|e| e.kind == EventKind::PriceDown).count() as f64;
            counts.push(up + dn);
            moves.push(up - dn);
        }
        let stat = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
            (m, (var / v.len() as f64).sqrt())
        };
        let (m, se) = stat(&counts);
        assert!((m - p.lambda * horizon).abs() < 3.0 * se);
        let (m, se) = stat(&moves);
        assert!(m.abs() < 3.0 * se);
    }

    #[test]
    fn null_policy_keeps_wealth() {
        let p = params();
        let pol = Policy::constant(space(&p), p.n_periods, ActionPair::NULL);
        let ev = simulate_market(&p, 11, run_horizon(&p)).events;
        let start = Start { wealth: 1234, mid: 5000, q: 0 };
        let r = run_policy(&pol, &ev, &p, start).unwrap();
        assert_eq!(r.terminal_wealth, 1234);
        assert!(r.trades.is_empty());
    }

    #[test]
    fn market_orders_on_empty_stream() {
        let p = params();
        let a = ActionPair::new(Leg::MARKET, Leg::MARKET);
        let pol = Policy::constant(space(&p), p.n_periods, a);
        let r = run_policy(&pol, &[], &p, Start::default()).unwrap();
        assert_eq!(r.trades.len(), 2 * p.n_periods);
        assert!(r.trades.iter().all(|t| t.fill == FillType::Immediate));
        // Each round trip pays the spread: one tick, two half-ticks.
        assert_eq!(r.terminal_wealth, -2 * p.n_periods as i64);
        assert!(r.ledger_balances());
    }

    #[test]
    fn resting_quote_fills_on_uninformed_flow() {
        let p = params();
        let pol = Policy::constant(space(&p), p.n_periods, ActionPair::new(Leg::int(0), Leg::CANCEL));
        let ev = vec![MarketEvent { time: 0.5, kind: EventKind::UninformedBuy }];
        let r = run_policy(&pol, &ev, &p, Start { wealth: 0, mid: 100, q: 0 }).unwrap();
        assert_eq!(r.trades.len(), 1);
        assert_eq!(r.trades[0].price, 201);
        assert_eq!(r.trades[0].fill, FillType::Uninformed);
        assert_eq!(r.final_q, -1);
        // Sold at 100.5, bought back at 100.5.
        assert_eq!(r.terminal_wealth, 0);
    }

    #[test]
    fn latency_makes_quote_marketable() {
        let p = params();
        let pol = Policy::constant(space(&p), p.n_periods, ActionPair::new(Leg::int(0), Leg::CANCEL));
        let ev = vec![MarketEvent { time: 0.1, kind: EventKind::PriceUp }];
        let r = run_policy(&pol, &ev, &p, Start { wealth: 0, mid: 100, q: 0 }).unwrap();
        let t = r.trades[0];
        assert_eq!(t.fill, FillType::Immediate);
        assert_eq!(t.rel_price, RelPrice::Int(-1));
        assert_eq!(t.price, 2 * 101 - 1);
        assert!((t.time - 0.3).abs() < 1e-15);
    }
}
