//! Direct Monte Carlo of the quote/price event model, written against the
//! model description only. Relative prices count ticks away from the
//! touch; cash values are measured against the mid right after a fill.

#![allow(dead_code)]

use latmm::{ActionPair, FillType, Leg, ModelParams, RelPrice, State};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

#[derive(Clone, Copy, Debug)]
pub struct Rates {
    pub lambda: f64,
    pub plus: f64,
    pub minus: f64,
}

impl Rates {
    pub fn of(p: &ModelParams) -> Self {
        Rates { lambda: p.lambda, plus: p.lambda_plus, minus: p.lambda_minus }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ev {
    Up,
    Down,
    Buy,
    Sell,
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Events of the merged stream on a window of length `t`.
pub fn window_events<R: Rng>(r: &mut R, m: Rates, t: f64) -> Vec<Ev> {
    let total = m.lambda + m.plus + m.minus;
    let mut out = Vec::new();
    if total <= 0.0 {
        return out;
    }
    let mut s = 0.0;
    loop {
        let u: f64 = r.random();
        s += -(1.0 - u).ln() / total;
        if s >= t {
            return out;
        }
        let x = r.random::<f64>() * total;
        out.push(if x < 0.5 * m.lambda {
            Ev::Up
        } else if x < m.lambda {
            Ev::Down
        } else if x < m.lambda + m.plus {
            Ev::Buy
        } else {
            Ev::Sell
        });
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Window {
    pub ask_fill: Option<FillType>,
    pub bid_fill: Option<FillType>,
    pub d: i64,
    pub value: f64,
}

/// Runs one window with optional resting orders (`None` = no order).
/// Filled orders are removed.
pub fn run_window<R: Rng>(r: &mut R, m: Rates, t: f64, ask: &mut Option<i64>, bid: &mut Option<i64>) -> Window {
    let mut w = Window::default();
    for e in window_events(r, m, t) {
        match e {
            Ev::Up => {
                if *ask == Some(0) {
                    *ask = None;
                    w.ask_fill = Some(FillType::Adverse);
                    w.value -= 0.5;
                }
                *ask = ask.map(|x| x - 1);
                *bid = bid.map(|x| x + 1);
                w.d += 1;
            }
            Ev::Down => {
                if *bid == Some(0) {
                    *bid = None;
                    w.bid_fill = Some(FillType::Adverse);
                    w.value -= 0.5;
                }
                *ask = ask.map(|x| x + 1);
                *bid = bid.map(|x| x - 1);
                w.d -= 1;
            }
            Ev::Buy => {
                if *ask == Some(0) {
                    *ask = None;
                    w.ask_fill = Some(FillType::Uninformed);
                    w.value += 0.5;
                }
            }
            Ev::Sell => {
                if *bid == Some(0) {
                    *bid = None;
                    w.bid_fill = Some(FillType::Uninformed);
                    w.value += 0.5;
                }
            }
        }
    }
    w
}

/// Single order sent at relative price `delta`, reaching the book after
/// `t1` and resting for `t2`. Returns (filled, value).
pub fn order_path<R: Rng>(r: &mut R, m: Rates, ask_side: bool, delta: i64, t1: f64, t2: f64) -> (bool, f64) {
    let (mut a, mut b) = (None, None);
    let w1 = run_window(r, m, t1, &mut a, &mut b);
    let rel = if ask_side { delta - w1.d } else { delta + w1.d };
    if rel <= -1 {
        return (true, -0.5);
    }
    if ask_side {
        a = Some(rel);
    } else {
        b = Some(rel);
    }
    let w2 = run_window(r, m, t2, &mut a, &mut b);
    (w2.ask_fill.is_some() || w2.bid_fill.is_some(), w2.value)
}

fn to_opt(r: RelPrice) -> Option<i64> {
    match r {
        RelPrice::Int(k) => Some(i64::from(k)),
        RelPrice::PosInf => None,
        RelPrice::NegInf => panic!("resting order at -inf"),
    }
}

fn to_rel(x: Option<i64>, r_max: i64) -> RelPrice {
    match x {
        Some(k) if k <= r_max => RelPrice::Int(k as i32),
        _ => RelPrice::PosInf,
    }
}

/// One leg at the latency boundary; returns the immediate-fill value.
fn arrive(leg: Leg, order: &mut Option<i64>, ask_side: bool, d0: i64, q: &mut i32) -> f64 {
    let step = if ask_side { -1 } else { 1 };
    match leg {
        Leg::DoNothing => 0.0,
        Leg::Quote(RelPrice::PosInf) => {
            *order = None;
            0.0
        }
        Leg::Quote(RelPrice::NegInf) => {
            *order = None;
            *q += step;
            -0.5
        }
        Leg::Quote(RelPrice::Int(delta)) => {
            let rel = if ask_side { i64::from(delta) - d0 } else { i64::from(delta) + d0 };
            if rel <= -1 {
                *order = None;
                *q += step;
                -0.5
            } else {
                *order = Some(rel);
                0.0
            }
        }
    }
}

/// One decision period from `s` under `a`: next reduced state, fill value
/// and total displacement.
pub fn period<R: Rng>(r: &mut R, p: &ModelParams, s: State, a: ActionPair, r_max: i64) -> (State, f64, i64) {
    let m = Rates::of(p);
    let (mut ask, mut bid, mut q) = (to_opt(s.ask), to_opt(s.bid), s.q);
    let w1 = run_window(r, m, p.delta_tau, &mut ask, &mut bid);
    q += i32::from(w1.bid_fill.is_some()) - i32::from(w1.ask_fill.is_some());
    let mut value = w1.value;
    value += arrive(a.ask, &mut ask, true, w1.d, &mut q);
    value += arrive(a.bid, &mut bid, false, w1.d, &mut q);
    ask = to_opt(to_rel(ask, r_max));
    bid = to_opt(to_rel(bid, r_max));
    let w2 = run_window(r, m, p.delta_t - p.delta_tau, &mut ask, &mut bid);
    q += i32::from(w2.bid_fill.is_some()) - i32::from(w2.ask_fill.is_some());
    value += w2.value;
    (State { q, ask: to_rel(ask, r_max), bid: to_rel(bid, r_max) }, value, w1.d + w2.d)
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Standard error of a Bernoulli frequency, with one pseudo-event when
/// nothing was observed.
pub fn freq_se(k: usize, n: usize) -> f64 {
    let p = (k.max(1) as f64) / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}
