//! Synthetic LOBSTER data driven by the model's event streams.
//!
//! The book always has a one-tick spread and `levels` price levels per
//! side. Price moves consume the whole best queue and open a new level on
//! the other side at the old price. Uninformed market orders sweep the
//! best queue after a refill order has joined behind it, so the mid stays
//! put.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::lobster::{BookSnapshot, Direction, EventType, OrderEvent};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::simulator::{market_events, EventKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    /// Rates per minute.
    pub lambda: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Seconds.
    pub duration: f64,
    pub start_time: f64,
    /// Price units (1e-4 currency).
    pub tick: i64,
    pub start_bid: i64,
    pub levels: usize,
    pub orders_per_level: usize,
    pub max_size: u64,
    /// Background limit-order joins and cancellations at the best levels,
    /// per second.
    pub join_rate: f64,
    pub cancel_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            lambda: 1.56,
            lambda_plus: 1.25,
            lambda_minus: 1.25,
            duration: 6.0 * 3600.0,
            start_time: 34_200.0,
            tick: 100,
            start_bid: 250_000,
            levels: 5,
            orders_per_level: 3,
            max_size: 100,
            join_rate: 0.05,
            cancel_rate: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SyntheticCounts {
    pub price_up: u64,
    pub price_down: u64,
    pub uninformed_buy: u64,
    pub uninformed_sell: u64,
    pub joins: u64,
    pub cancels: u64,
    pub messages: u64,
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub events: Vec<OrderEvent>,
    pub snapshots: Vec<BookSnapshot>,
    pub counts: SyntheticCounts,
}

struct Level {
    price: i64,
    orders: VecDeque<(u64, u64)>,
}

struct Gen {
    rng: ChaCha8Rng,
    cfg: SyntheticConfig,
    // 0: asks, 1: bids; best level first.
    sides: [VecDeque<Level>; 2],
    next_id: u64,
    out: SyntheticData,
}

const DIR: [Direction; 2] = [Direction::Sell, Direction::Buy];

impl Gen {
    fn step(s: usize, tick: i64) -> i64 {
        if s == 0 {
            tick
        } else {
            -tick
        }
    }

    fn size(&mut self) -> u64 {
        self.rng.random_range(1..=self.cfg.max_size)
    }

    fn id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn emit(&mut self, t: f64, ty: EventType, id: u64, size: u64, price: i64, s: usize) {
        let depth = |l: &Level| l.orders.iter().map(|o| o.1).sum::<u64>();
        let (a, b) = (&self.sides[0][0], &self.sides[1][0]);
        self.out.events.push(OrderEvent { timestamp: t, event_type: ty, order_id: id, size, price, direction: DIR[s] });
        self.out.snapshots.push(BookSnapshot {
            timestamp: t,
            best_ask: a.price,
            ask_size: depth(a),
            best_bid: b.price,
            bid_size: depth(b),
        });
        self.out.counts.messages += 1;
    }

    fn submit(&mut self, t: f64, s: usize, size: u64) -> u64 {
        let id = self.id();
        let price = self.sides[s][0].price;
        self.sides[s][0].orders.push_back((id, size));
        self.emit(t, EventType::Submission, id, size, price, s);
        id
    }

    /// Market order against side `s` that leaves the best price in place.
    fn sweep_keep(&mut self, t: f64, s: usize) {
        let size = self.rng.random_range(2..=self.cfg.max_size.max(2));
        self.submit(t, s, size);
        let price = self.sides[s][0].price;
        while self.sides[s][0].orders.len() > 1 {
            let (id, sz) = self.sides[s][0].orders.pop_front().expect("nonempty");
            self.emit(t, EventType::ExecutionVisible, id, sz, price, s);
        }
        let refill = &mut self.sides[s][0].orders[0];
        refill.1 -= 1;
        let id = refill.0;
        self.emit(t, EventType::ExecutionVisible, id, 1, price, s);
    }

    /// Price move that consumes the best level of side `s`.
    fn sweep_move(&mut self, t: f64, s: usize) {
        let o = 1 - s;
        let tick = self.cfg.tick;
        let old = self.sides[s][0].price;
        while let Some(&(id, sz)) = self.sides[s][0].orders.front() {
            if self.sides[s][0].orders.len() == 1 {
                self.sides[s].pop_front();
                self.emit(t, EventType::ExecutionVisible, id, sz, old, s);
                break;
            }
            self.sides[s][0].orders.pop_front();
            self.emit(t, EventType::ExecutionVisible, id, sz, old, s);
        }
        let size = self.size();
        let id = self.id();
        self.sides[o].push_front(Level { price: old, orders: VecDeque::from([(id, size)]) });
        self.emit(t, EventType::Submission, id, size, old, o);
        let far = self.sides[s].back().expect("levels >= 2").price + Self::step(s, tick);
        let size = self.size();
        let id = self.id();
        self.sides[s].push_back(Level { price: far, orders: VecDeque::from([(id, size)]) });
        self.emit(t, EventType::Submission, id, size, far, s);
        while self.sides[o].len() > self.cfg.levels {
            let lvl = self.sides[o].pop_back().expect("nonempty");
            for (id, sz) in lvl.orders {
                self.emit(t, EventType::Deletion, id, sz, lvl.price, o);
            }
        }
    }

    fn cancel(&mut self, t: f64) {
        let s = self.rng.random_range(0..2usize);
        let n = self.sides[s][0].orders.len();
        if n < 2 {
            return;
        }
        let k = self.rng.random_range(0..n);
        let price = self.sides[s][0].price;
        let (id, sz) = self.sides[s][0].orders[k];
        if sz > 1 && self.rng.random_bool(0.5) {
            let part = self.rng.random_range(1..sz);
            self.sides[s][0].orders[k].1 -= part;
            self.emit(t, EventType::Cancellation, id, part, price, s);
        } else {
            self.sides[s][0].orders.remove(k);
            self.emit(t, EventType::Deletion, id, sz, price, s);
        }
        self.out.counts.cancels += 1;
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Background {
    Join,
    Cancel,
}

fn background<R: Rng>(rng: &mut R, rate: f64, horizon: f64, kind: Background, out: &mut Vec<(f64, Background)>) {
    if rate <= 0.0 {
        return;
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut t = exp.sample(rng);
    while t < horizon {
        out.push((t, kind));
        t += exp.sample(rng);
    }
}

/// Generates a message/orderbook pair. The market events are the same
/// streams the simulator draws for these rates and seed.
pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticData> {
    if cfg.levels < 2 || cfg.orders_per_level < 1 || cfg.max_size < 1 || cfg.tick < 1 {
        return Err(Error::InvalidParams("need levels >= 2, orders_per_level >= 1, max_size >= 1, tick >= 1".into()));
    }
    if !(cfg.duration > 0.0) || cfg.join_rate < 0.0 || cfg.cancel_rate < 0.0 {
        return Err(Error::InvalidParams("duration must be positive and background rates nonnegative".into()));
    }
    if cfg.start_bid - (cfg.levels as i64 + 1) * cfg.tick <= 0 || cfg.start_bid % cfg.tick != 0 {
        return Err(Error::InvalidParams("start_bid must be a positive multiple of tick above the book depth".into()));
    }
    let params = ModelParams::per_minute(cfg.lambda, cfg.lambda_plus, cfg.lambda_minus, 0.0, 1.0, cfg.duration, -2, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let market = market_events(&params, &mut rng, cfg.duration);
    let mut bg = Vec::new();
    background(&mut rng, cfg.join_rate, cfg.duration, Background::Join, &mut bg);
    background(&mut rng, cfg.cancel_rate, cfg.duration, Background::Cancel, &mut bg);
    bg.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut g = Gen {
        rng,
        cfg: cfg.clone(),
        sides: [VecDeque::new(), VecDeque::new()],
        next_id: 0,
        out: SyntheticData { events: Vec::new(), snapshots: Vec::new(), counts: SyntheticCounts::default() },
    };
    for s in 0..2 {
        let best = if s == 0 { cfg.start_bid + cfg.tick } else { cfg.start_bid };
        for l in 0..cfg.levels {
            let mut orders = VecDeque::new();
            for _ in 0..cfg.orders_per_level {
                let (id, size) = (g.id(), g.size());
                orders.push_back((id, size));
            }
            g.sides[s].push_back(Level { price: best + l as i64 * Gen::step(s, cfg.tick), orders });
        }
    }
    let t0 = cfg.start_time;
    let size = g.size();
    g.submit(t0, 1, size);

    let (mut i, mut j) = (0, 0);
    while i < market.len() || j < bg.len() {
        let take_market = j >= bg.len() || (i < market.len() && market[i].time <= bg[j].0);
        if take_market {
            let e = market[i];
            i += 1;
            let t = t0 + e.time;
            match e.kind {
                EventKind::PriceUp => {
                    g.sweep_move(t, 0);
                    g.out.counts.price_up += 1;
                }
                EventKind::PriceDown => {
                    g.sweep_move(t, 1);
                    g.out.counts.price_down += 1;
                }
                EventKind::UninformedBuy => {
                    g.sweep_keep(t, 0);
                    g.out.counts.uninformed_buy += 1;
                }
                EventKind::UninformedSell => {
                    g.sweep_keep(t, 1);
                    g.out.counts.uninformed_sell += 1;
                }
            }
        } else {
            let (t, kind) = bg[j];
            j += 1;
            match kind {
                Background::Join => {
                    let s = g.rng.random_range(0..2usize);
                    let size = g.size();
                    g.submit(t0 + t, s, size);
                    g.out.counts.joins += 1;
                }
                Background::Cancel => g.cancel(t0 + t),
            }
        }
    }
    // A closing row so the last interval has a length.
    let size = g.size();
    g.submit(t0 + cfg.duration, 1, size);
    Ok(g.out)
}
