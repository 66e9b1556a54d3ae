use std::path::Path;

use latmm::dpsolver::{ValueSurface, DEFAULT_R_MAX};
use latmm::estimation::{
    estimate_lambda, estimate_uninformed_rates, generate, one_tick_filter, parse_lobster, replay_artificial_orders,
    write_lobster, BookSnapshot, OrderEvent, SyntheticConfig, SyntheticCounts,
};
use latmm::simulator::{market_events, mc_policy_value, path_rng, run_horizon, run_policy, Start};
use latmm::{profitability, FillModel, Leg, ModelParams, Policy, RelPrice, Side, Solver};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{
    load_setup, write_csv, write_json, Cli, CliError, CliResult, DataArgs, EstimateArgs, OrderValueArgs,
    ProfitabilityArgs, ReplayArgs, Setup, SimulateArgs,
};

#[derive(Serialize)]
struct OrderValueRow {
    side: Side,
    t1: f64,
    t2: f64,
    rel_price: i32,
    value: f64,
    fill_prob: f64,
}

pub fn order_value(cli: &Cli, a: &OrderValueArgs) -> CliResult<Value> {
    let setup = load_setup(cli.config.as_deref())?;
    let p = &setup.params;
    let t1 = a.t1.unwrap_or(p.delta_tau);
    let t2 = a.t2.unwrap_or(p.delta_t - p.delta_tau);
    if a.rel_min > a.rel_max {
        return Err(CliError::Usage(format!("rel_min {} exceeds rel_max {}", a.rel_min, a.rel_max)));
    }
    let model = FillModel::<f64>::new(p.clone())?;
    let side: Side = a.side.into();
    let rows = (a.rel_min..=a.rel_max)
        .map(|d| {
            Ok(OrderValueRow {
                side,
                t1,
                t2,
                rel_price: d,
                value: model.order_value(side, t1, t2, RelPrice::Int(d))?,
                fill_prob: model.quote_fill_probability(side, d, t1, t2)?,
            })
        })
        .collect::<latmm::Result<Vec<_>>>()?;
    let path = cli.out.join("order_values.csv");
    write_csv(&path, &rows)?;
    Ok(json!({ "rows": rows.len(), "file": path }))
}

#[derive(Serialize)]
struct SurfaceRow {
    i: usize,
    q: i32,
    r_ask: String,
    r_bid: String,
    value: f64,
}

#[derive(Serialize)]
struct PolicyRow {
    i: usize,
    q: i32,
    r_ask: String,
    r_bid: String,
    ask: String,
    bid: String,
}

fn surface_rows(s: &ValueSurface<f64>) -> Vec<SurfaceRow> {
    let mut out = Vec::new();
    for i in 0..=s.n_periods() {
        for st in s.space.states() {
            let value = s.get(i, st).expect("state from the same space");
            out.push(SurfaceRow { i, q: st.q, r_ask: st.ask.to_string(), r_bid: st.bid.to_string(), value });
        }
    }
    out
}

fn policy_rows(pol: &Policy) -> Vec<PolicyRow> {
    let mut out = Vec::new();
    for i in 0..pol.n_periods() {
        for st in pol.space.states() {
            if let Some(a) = pol.get(i, st) {
                out.push(PolicyRow {
                    i,
                    q: st.q,
                    r_ask: st.ask.to_string(),
                    r_bid: st.bid.to_string(),
                    ask: a.ask.to_string(),
                    bid: a.bid.to_string(),
                });
            }
        }
    }
    out
}

/// Counts of optimal legs sitting on the edge of the quote grid or of the
/// truncated price range; large counts suggest widening them.
#[derive(Debug, Default, Serialize)]
pub struct TruncationDiagnostics {
    pub r_max: u32,
    pub grid_min: i32,
    pub grid_max: i32,
    pub legs_at_grid_max: usize,
    pub legs_at_grid_min: usize,
    pub pruned_mass: f64,
    pub epsilon_tail: f64,
}

pub(crate) fn diagnostics(setup: &Setup, pol: &Policy, pruned_mass: f64) -> TruncationDiagnostics {
    let mut d = TruncationDiagnostics {
        r_max: setup.truncation.r_max,
        grid_min: setup.grid.min,
        grid_max: setup.grid.max,
        pruned_mass,
        epsilon_tail: setup.params.epsilon_tail,
        ..Default::default()
    };
    for table in &pol.actions {
        for a in table.iter().flatten() {
            for leg in [a.ask, a.bid] {
                if leg == Leg::int(setup.grid.max) {
                    d.legs_at_grid_max += 1;
                }
                if leg == Leg::int(setup.grid.min) {
                    d.legs_at_grid_min += 1;
                }
            }
        }
    }
    d
}

pub(crate) fn solver(setup: &Setup) -> CliResult<Solver<f64>> {
    Ok(Solver::<f64>::from_params(&setup.params, setup.truncation, setup.grid)?)
}

pub fn solve(cli: &Cli) -> CliResult<Value> {
    let setup = load_setup(cli.config.as_deref())?;
    let solver = solver(&setup)?;
    let n = setup.params.n_periods;
    let (surface, policy) = solver.solve(n)?;
    write_csv(&cli.out.join("value_surface.csv"), &surface_rows(&surface))?;
    write_csv(&cli.out.join("policy.csv"), &policy_rows(&policy))?;
    let summary = json!({
        "expected_profit": surface.profit(),
        "n_periods": n,
        "n_states": surface.space.len(),
        "params": setup.params,
        "truncation": diagnostics(&setup, &policy, solver.pruned_mass),
    });
    write_json(&cli.out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Quote code used in the trace plots: `o` on the ask is 15, on the bid
/// -14; other ask quotes are `delta + 1`, bid quotes `-delta`. Cancels and
/// market orders have no code.
pub fn quote_code(side: Side, leg: Leg) -> Option<i32> {
    match (side, leg) {
        (Side::Ask, Leg::DoNothing) => Some(15),
        (Side::Bid, Leg::DoNothing) => Some(-14),
        (Side::Ask, Leg::Quote(RelPrice::Int(d))) => Some(d + 1),
        (Side::Bid, Leg::Quote(RelPrice::Int(d))) => Some(-d),
        _ => None,
    }
}

#[derive(Serialize)]
struct QuoteRow {
    period: usize,
    time: f64,
    q: i32,
    r_ask: String,
    r_bid: String,
    ask: String,
    bid: String,
    ask_code: Option<i32>,
    bid_code: Option<i32>,
}

#[derive(Serialize)]
struct TradeRow {
    time: f64,
    period: usize,
    side: Side,
    fill: latmm::FillType,
    rel_price: String,
    price_half_ticks: i64,
    cash_half_ticks: i64,
    mid_before: i64,
}

#[derive(Serialize)]
struct InventoryRow {
    time: f64,
    q: i32,
}

pub fn simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<Value> {
    let setup = load_setup(cli.config.as_deref())?;
    let p = &setup.params;
    let solver = solver(&setup)?;
    let (surface, policy) = solver.solve(p.n_periods)?;
    let ev = market_events(p, &mut path_rng(cli.seed, 0), run_horizon(p));
    let r = run_policy(&policy, &ev, p, Start::default())?;
    let quotes: Vec<QuoteRow> = r
        .decisions
        .iter()
        .enumerate()
        .map(|(i, (s, act))| QuoteRow {
            period: i,
            time: i as f64 * p.delta_t,
            q: s.q,
            r_ask: s.ask.to_string(),
            r_bid: s.bid.to_string(),
            ask: act.ask.to_string(),
            bid: act.bid.to_string(),
            ask_code: quote_code(Side::Ask, act.ask),
            bid_code: quote_code(Side::Bid, act.bid),
        })
        .collect();
    let trades: Vec<TradeRow> = r
        .trades
        .iter()
        .map(|t| TradeRow {
            time: t.time,
            period: t.period,
            side: t.side,
            fill: t.fill,
            rel_price: t.rel_price.to_string(),
            price_half_ticks: t.price,
            cash_half_ticks: t.cash,
            mid_before: t.mid_before,
        })
        .collect();
    let inventory: Vec<InventoryRow> = r.inventory_path.iter().map(|&(time, q)| InventoryRow { time, q }).collect();
    write_csv(&cli.out.join("quotes.csv"), &quotes)?;
    write_csv(&cli.out.join("trades.csv"), &trades)?;
    write_csv(&cli.out.join("inventory.csv"), &inventory)?;
    let mut summary = json!({
        "expected_profit": surface.profit(),
        "path_terminal_wealth": r.terminal_wealth as f64 / 2.0,
        "path_trades": r.trades.len(),
        "path_final_q": r.final_q,
    });
    if a.paths > 0 {
        let (mean, se) = mc_policy_value(&policy, p, Start::default(), a.paths, cli.seed)?;
        summary["mc"] = json!({ "paths": a.paths, "mean": mean, "se": se });
    }
    write_json(&cli.out.join("simulate.json"), &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
pub struct SweepRow {
    pub lambda_side_per_minute: f64,
    pub delta_tau: f64,
    pub n_periods: usize,
    pub expected_profit: f64,
}

/// Expected profit at a fixed number of periods over a latency grid for
/// several flow rates.
pub fn profit_sweep(setup: &Setup, rates_per_minute: &[f64], dtaus: &[f64], n: usize) -> CliResult<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &l in rates_per_minute {
        for &dt in dtaus {
            let p = setup
                .params
                .clone()
                .with_side_rates(l / 60.0, l / 60.0)?
                .with_delta_tau(dt)?
                .with_n_periods(n);
            let s = Solver::<f64>::from_params(&p, setup.truncation, setup.grid)?;
            let v = *s.profit_curve(n)?.last().expect("nonempty curve");
            rows.push(SweepRow { lambda_side_per_minute: l, delta_tau: dt, n_periods: n, expected_profit: v });
        }
    }
    Ok(rows)
}

pub fn profitability(cli: &Cli, a: &ProfitabilityArgs) -> CliResult<Value> {
    let setup = load_setup(cli.config.as_deref())?;
    let rep = profitability::report(&setup.params, a.n_max, setup.truncation, setup.grid, a.tol_pos)?;
    let mut out = serde_json::to_value(&rep)?;
    if a.sweep {
        let side = setup.params.lambda_plus * 60.0;
        let half = setup.params.lambda * 30.0;
        let dtaus = [0.0, 0.05, 0.1, 0.15, 0.2];
        let rows = profit_sweep(&setup, &[side, half], &dtaus, setup.params.n_periods)?;
        let path = cli.out.join("profit_sweep.csv");
        write_csv(&path, &rows)?;
        out["sweep_file"] = json!(path);
    }
    write_json(&cli.out.join("profitability.json"), &out)?;
    Ok(out)
}

pub(crate) struct Data {
    pub events: Vec<OrderEvent>,
    pub snaps: Vec<BookSnapshot>,
    pub synthetic: Option<SyntheticCounts>,
    pub tick: i64,
}

fn load_synthetic_config(path: Option<&Path>) -> CliResult<SyntheticConfig> {
    Ok(match path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => SyntheticConfig::default(),
    })
}

pub(crate) fn load_data(cli: &Cli, d: &DataArgs) -> CliResult<Data> {
    match (&d.messages, &d.orderbook) {
        (Some(m), Some(o)) => {
            if d.synthetic.is_some() {
                return Err(CliError::Usage("give either LOBSTER files or --synthetic, not both".into()));
            }
            let (events, snaps) = parse_lobster(m, o)?;
            Ok(Data { events, snaps, synthetic: None, tick: d.tick })
        }
        _ => {
            let cfg = load_synthetic_config(d.synthetic.as_deref())?;
            let data = generate(&cfg, cli.seed)?;
            if d.write_synthetic {
                write_lobster(
                    &data.events,
                    &data.snapshots,
                    &cli.out.join("synthetic_message.csv"),
                    &cli.out.join("synthetic_orderbook.csv"),
                )?;
            }
            Ok(Data { events: data.events, snaps: data.snapshots, synthetic: Some(data.counts), tick: cfg.tick })
        }
    }
}

pub fn estimate(cli: &Cli, a: &EstimateArgs) -> CliResult<Value> {
    let data = load_data(cli, &a.data)?;
    let filter = one_tick_filter(&data.snaps, data.tick);
    let lambda = estimate_lambda(&data.snaps, data.tick)?;
    let (lp, lm) = estimate_uninformed_rates(&data.events, &data.snaps, data.tick, a.side_resolved)?;
    let out = json!({
        "lambda_per_minute": lambda,
        "lambda_plus_per_minute": lp,
        "lambda_minus_per_minute": lm,
        "side_resolved": a.side_resolved,
        "one_tick_fraction": filter.kept_fraction(),
        "one_tick_seconds": filter.seconds,
        "messages": data.events.len(),
        "synthetic_counts": data.synthetic,
    });
    write_json(&cli.out.join("estimate.json"), &out)?;
    Ok(out)
}

#[derive(Serialize)]
struct InjectionRow {
    latency: f64,
    decision_time: f64,
    arrival_time: f64,
    price: Option<i64>,
    outcome: latmm::estimation::Outcome,
    resolved_at: Option<f64>,
}

pub fn replay(cli: &Cli, a: &ReplayArgs) -> CliResult<Value> {
    let data = load_data(cli, &a.data)?;
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for &lat in &a.latency {
        let r = replay_artificial_orders(&data.events, &data.snaps, data.tick, lat, a.n_orders, cli.seed, a.side.into())?;
        rows.extend(r.outcomes.iter().map(|o| InjectionRow {
            latency: lat,
            decision_time: o.decision_time,
            arrival_time: o.arrival_time,
            price: o.price,
            outcome: o.outcome,
            resolved_at: o.resolved_at,
        }));
        summaries.push(json!({
            "latency": r.latency,
            "side": r.side,
            "n_requested": r.n_requested,
            "n_injected": r.n_injected,
            "n_type1": r.n_type1,
            "n_type2": r.n_type2,
            "n_censored": r.n_censored,
            "ratio_estimate": r.ratio_estimate,
            "insufficient": r.insufficient,
        }));
    }
    write_csv(&cli.out.join("injections.csv"), &rows)?;
    let out = json!({ "replays": summaries });
    write_json(&cli.out.join("replay.json"), &out)?;
    Ok(out)
}

/// Parameters with the given rates per minute; used by the fixed setups.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fixed_setup(
    lambda: f64,
    lambda_side: f64,
    delta_tau: f64,
    delta_t: f64,
    horizon_t: f64,
    q: i32,
) -> CliResult<Setup> {
    let params = ModelParams::per_minute(lambda, lambda_side, lambda_side, delta_tau, delta_t, horizon_t, -q, q)?;
    Ok(Setup {
        params,
        truncation: latmm::Truncation { r_max: DEFAULT_R_MAX },
        grid: latmm::ActionGrid::default(),
    })
}
