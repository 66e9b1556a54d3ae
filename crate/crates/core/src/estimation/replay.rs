//! Artificial-order replay: classify fills of infinitesimal best-quote
//! orders into fills with an unmoved mid (Type I) and fills at a price move
//! (Type II).

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::estimators::execution_groups;
use super::lobster::{BookSnapshot, Direction, EventType, OrderEvent};
use crate::error::{Error, Result};
use crate::params::Side;

/// Below this many surviving injections the ratio is flagged as noisy.
pub const MIN_SURVIVORS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    /// Spread was not one tick at the decision time.
    NotOneTick,
    /// The mid or our price level moved during the latency window.
    MovedInLatency,
    TypeI,
    TypeII,
    Censored,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Injection {
    pub decision_time: f64,
    pub arrival_time: f64,
    pub price: Option<i64>,
    pub outcome: Outcome,
    pub resolved_at: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplayResult {
    pub latency: f64,
    pub side: Side,
    pub n_requested: usize,
    /// Injections that reached the book at the decision price.
    pub n_injected: usize,
    pub n_type1: usize,
    pub n_type2: usize,
    pub n_censored: usize,
    /// `n_type1 / n_type2`, an estimate of `lambda_side / (lambda / 2)`.
    pub ratio_estimate: Option<f64>,
    pub insufficient: bool,
    pub outcomes: Vec<Injection>,
}

struct Book<'a> {
    events: &'a [OrderEvent],
    snaps: &'a [BookSnapshot],
    // Start/end snapshot index of the execution group each message is in.
    group_of: Vec<Option<(usize, usize)>>,
}

impl Book<'_> {
    /// Index of the last row with timestamp `<= t`.
    fn row_at(&self, t: f64) -> Option<usize> {
        self.snaps.partition_point(|s| s.timestamp <= t).checked_sub(1)
    }

    fn best(&self, i: usize, side: Side) -> (i64, u64) {
        let s = &self.snaps[i];
        match side {
            Side::Ask => (s.best_ask, s.ask_size),
            Side::Bid => (s.best_bid, s.bid_size),
        }
    }

    /// `> 0` when our price is no longer the best because the market moved
    /// away (censor), `< 0` when the market moved through it.
    fn displacement(&self, i: usize, side: Side, price: i64) -> i64 {
        let (b, _) = self.best(i, side);
        match side {
            Side::Bid => b - price,
            Side::Ask => price - b,
        }
    }

    fn run(&self, decision: f64, latency: f64, side: Side, tick: i64) -> Injection {
        let arrival = decision + latency;
        let mut inj = Injection { decision_time: decision, arrival_time: arrival, price: None, outcome: Outcome::NotOneTick, resolved_at: None };
        let Some(d) = self.row_at(decision) else { return inj };
        let s0 = self.snaps[d];
        if s0.best_ask - s0.best_bid != tick {
            return inj;
        }
        let a = self.row_at(arrival).expect("arrival after decision");
        let moved = self.snaps[d..=a].iter().any(|s| s.mid2() != s0.mid2());
        let (price, ahead) = self.best(a, side);
        if moved || price != self.best(d, side).0 {
            inj.outcome = Outcome::MovedInLatency;
            return inj;
        }
        inj.price = Some(price);
        let dir = match side {
            Side::Ask => Direction::Sell,
            Side::Bid => Direction::Buy,
        };
        let mut behind: HashSet<u64> = HashSet::new();
        let mut ahead = ahead as i64;
        for i in a + 1..self.events.len() {
            let e = &self.events[i];
            let ours = e.direction == dir && e.price == price;
            if ours {
                match e.event_type {
                    EventType::Submission => {
                        behind.insert(e.order_id);
                    }
                    EventType::Cancellation | EventType::Deletion => {
                        if !behind.contains(&e.order_id) {
                            ahead -= e.size as i64;
                        }
                    }
                    EventType::ExecutionVisible | EventType::ExecutionHidden => {
                        let hit = behind.contains(&e.order_id) || ahead <= 0 || {
                            ahead -= e.size as i64;
                            ahead < 0
                        };
                        if hit {
                            let (g0, g1) = self.group_of[i].expect("execution is grouped");
                            let before = if g0 == 0 { s0.mid2() } else { self.snaps[g0 - 1].mid2() };
                            inj.outcome =
                                if self.snaps[g1].mid2() == before { Outcome::TypeI } else { Outcome::TypeII };
                            inj.resolved_at = Some(e.timestamp);
                            return inj;
                        }
                    }
                    EventType::Cross | EventType::Halt => {}
                }
            }
            let disp = self.displacement(i, side, price);
            if disp != 0 {
                inj.outcome = if disp > 0 { Outcome::Censored } else { Outcome::TypeII };
                inj.resolved_at = Some(e.timestamp);
                return inj;
            }
        }
        inj.outcome = Outcome::Censored;
        inj
    }
}

/// Inserts `n_orders` infinitesimal orders at the best `side` quote at
/// uniformly random decision times, each arriving `latency` seconds later,
/// and tracks them under price-time priority.
pub fn replay_artificial_orders(
    events: &[OrderEvent],
    snaps: &[BookSnapshot],
    tick: i64,
    latency: f64,
    n_orders: usize,
    seed: u64,
    side: Side,
) -> Result<ReplayResult> {
    if !(latency >= 0.0) || !latency.is_finite() {
        return Err(Error::InvalidParams(format!("latency must be >= 0, got {latency}")));
    }
    if n_orders < 1 {
        return Err(Error::InvalidParams("n_orders must be >= 1".into()));
    }
    if events.len() != snaps.len() {
        return Err(Error::Estimation("messages and snapshots differ in length".into()));
    }
    let empty = ReplayResult {
        latency,
        side,
        n_requested: n_orders,
        n_injected: 0,
        n_type1: 0,
        n_type2: 0,
        n_censored: 0,
        ratio_estimate: None,
        insufficient: true,
        outcomes: Vec::new(),
    };
    let (t0, t1) = match (snaps.first(), snaps.last()) {
        (Some(a), Some(b)) if b.timestamp - latency > a.timestamp => (a.timestamp, b.timestamp - latency),
        _ => {
            log::warn!("replay: no usable time window");
            return Ok(empty);
        }
    };
    let mut group_of = vec![None; events.len()];
    for g in execution_groups(events) {
        for slot in &mut group_of[g.first..=g.last] {
            *slot = Some((g.first, g.last));
        }
    }
    let book = Book { events, snaps, group_of };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times: Vec<f64> = (0..n_orders).map(|_| rng.random_range(t0..t1)).collect();
    let outcomes: Vec<Injection> = times.par_iter().map(|&t| book.run(t, latency, side, tick)).collect();

    let count = |o: Outcome| outcomes.iter().filter(|x| x.outcome == o).count();
    let (n1, n2, nc) = (count(Outcome::TypeI), count(Outcome::TypeII), count(Outcome::Censored));
    let injected = n1 + n2 + nc;
    let insufficient = injected < MIN_SURVIVORS;
    if insufficient {
        log::warn!("replay: only {injected} injections survived the latency filter (< {MIN_SURVIVORS}); the ratio is statistically unreliable");
    }
    Ok(ReplayResult {
        n_injected: injected,
        n_type1: n1,
        n_type2: n2,
        n_censored: nc,
        ratio_estimate: (n2 > 0).then(|| n1 as f64 / n2 as f64),
        insufficient,
        outcomes,
        ..empty
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::synthetic::{generate, SyntheticConfig};

    #[test]
    fn empty_input() {
        let r = replay_artificial_orders(&[], &[], 100, 0.0, 10, 1, Side::Bid).unwrap();
        assert_eq!((r.n_type1, r.n_type2, r.ratio_estimate), (0, 0, None));
    }

    #[test]
    fn rejects_bad_args() {
        assert!(replay_artificial_orders(&[], &[], 100, -1.0, 10, 1, Side::Bid).is_err());
        assert!(replay_artificial_orders(&[], &[], 100, 0.0, 0, 1, Side::Bid).is_err());
    }

    #[test]
    fn counts_are_consistent() {
        let cfg = SyntheticConfig { duration: 3600.0, lambda: 6.0, lambda_plus: 3.0, lambda_minus: 3.0, ..Default::default() };
        let d = generate(&cfg, 5).unwrap();
        for side in [Side::Bid, Side::Ask] {
            let r = replay_artificial_orders(&d.events, &d.snapshots, 100, 0.5, 400, 9, side).unwrap();
            assert!(r.n_type1 + r.n_type2 <= r.n_injected);
            assert_eq!(r.outcomes.len(), 400);
            assert!(r.n_type1 > 0 && r.n_type2 > 0 && r.n_censored > 0);
            for o in &r.outcomes {
                if let Some(t) = o.resolved_at {
                    assert!(t >= o.arrival_time);
                }
            }
        }
    }

    #[test]
    fn hand_built_queue() {
        let ev = |t: f64, ty: EventType, id: u64, size: u64, price: i64, d: Direction| OrderEvent {
            timestamp: t,
            event_type: ty,
            order_id: id,
            size,
            price,
            direction: d,
        };
        let sn = |t: f64, bid_size: u64, bid: i64| BookSnapshot { timestamp: t, best_ask: bid + 100, ask_size: 10, best_bid: bid, bid_size };
        use Direction::*;
        use EventType::*;
        // Ten shares ahead; four cancelled, six executed by one market
        // order, then one more share executed from a later order.
        let events = vec![
            ev(0.0, Submission, 1, 10, 1000, Buy),
            ev(2.0, Submission, 2, 5, 1000, Buy),
            ev(3.0, Deletion, 1, 4, 1000, Buy),
            ev(4.0, ExecutionVisible, 1, 6, 1000, Buy),
            ev(4.0, ExecutionVisible, 2, 1, 1000, Buy),
            ev(9.0, Submission, 3, 5, 1000, Buy),
        ];
        let snaps = vec![sn(0.0, 10, 1000), sn(2.0, 15, 1000), sn(3.0, 11, 1000), sn(4.0, 5, 1000), sn(4.0, 4, 1000), sn(9.0, 9, 1000)];
        let book = Book { events: &events, snaps: &snaps, group_of: vec![None, None, None, Some((3, 4)), Some((3, 4)), None] };
        let r = book.run(1.0, 0.0, Side::Bid, 100);
        assert_eq!(r.outcome, Outcome::TypeI);
        assert_eq!(r.resolved_at, Some(4.0));
    }
}
