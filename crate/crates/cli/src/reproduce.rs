//! Fixed experiment setups with their published numbers where available.

use latmm::{FillModel, RelPrice, Side};
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::{fixed_setup, profit_sweep, SweepRow};
use crate::{write_csv, Cli, CliResult, Experiment, ReproduceArgs};

/// Per-minute rates of the reference stock.
pub const LAMBDA_REF: f64 = 1.56;
pub const LAMBDA_SIDE_REF: f64 = 1.25;

pub const TABLE2_DELTA_T: f64 = 4.0;
pub const TABLE2_DTAU: [f64; 2] = [0.2, 0.8];
/// Published ask-order values, rows by latency, columns `delta = 0..=4`.
pub const TABLE2_PAPER: [[f64; 5]; 2] = [
    [1.48e-3, 7.36e-5, 1.31e-6, 1.91e-8, 1.27e-9],
    [-2.79e-3, 4.58e-5, 1.20e-6, 1.76e-8, 6.49e-10],
];

pub const FIG4_N: usize = 179;
pub const FIG4_DTAU: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];

#[derive(Clone, Debug, Serialize)]
pub struct Table2Row {
    pub delta_tau: f64,
    pub delta: i32,
    pub value: f64,
    pub paper_value: f64,
}

pub fn table2() -> CliResult<Vec<Table2Row>> {
    let side = 0.7 * LAMBDA_SIDE_REF;
    let mut rows = Vec::new();
    for (j, &dtau) in TABLE2_DTAU.iter().enumerate() {
        let setup = fixed_setup(LAMBDA_REF, side, dtau, TABLE2_DELTA_T, 600.0, 4)?;
        let m = FillModel::<f64>::new(setup.params)?;
        for delta in 0..5 {
            rows.push(Table2Row {
                delta_tau: dtau,
                delta,
                value: m.order_value(Side::Ask, dtau, TABLE2_DELTA_T - dtau, RelPrice::Int(delta))?,
                paper_value: TABLE2_PAPER[j][delta as usize],
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct Fig3Row {
    pub delta_tau: f64,
    pub r: i32,
    pub value: f64,
}

/// Value of a resting ask held through a latency window, for the two
/// closest prices, with flow below half the jump rate.
pub fn fig3() -> CliResult<Vec<Fig3Row>> {
    let setup = fixed_setup(LAMBDA_REF, 0.4 * LAMBDA_SIDE_REF, 0.0, 4.0, 600.0, 4)?;
    let m = FillModel::<f64>::new(setup.params)?;
    let mut rows = Vec::new();
    for r in 0..2 {
        for k in 0..=20 {
            let dtau = f64::from(k) * 0.1;
            rows.push(Fig3Row { delta_tau: dtau, r, value: m.order_value_zero_delay(Side::Ask, RelPrice::Int(r), dtau)? });
        }
    }
    Ok(rows)
}

/// Expected profit over the latency grid for the two flow levels, at a
/// fixed number of periods.
pub fn fig4() -> CliResult<Vec<SweepRow>> {
    let setup = fixed_setup(LAMBDA_REF, 0.7 * LAMBDA_SIDE_REF, 0.0, 0.5, 90.0, 2)?;
    profit_sweep(&setup, &[0.7 * LAMBDA_SIDE_REF, 0.5 * LAMBDA_REF], &FIG4_DTAU, FIG4_N)
}

pub fn run(cli: &Cli, a: &ReproduceArgs) -> CliResult<Value> {
    match a.experiment {
        Experiment::Table2 => {
            let rows = table2()?;
            let path = cli.out.join("table2.csv");
            write_csv(&path, &rows)?;
            Ok(json!({ "experiment": "table2", "rows": rows, "file": path }))
        }
        Experiment::Fig3 => {
            let rows = fig3()?;
            let path = cli.out.join("fig3.csv");
            write_csv(&path, &rows)?;
            Ok(json!({ "experiment": "fig3", "rows": rows.len(), "file": path }))
        }
        Experiment::Fig4 => {
            let rows = fig4()?;
            let path = cli.out.join("fig4.csv");
            write_csv(&path, &rows)?;
            Ok(json!({ "experiment": "fig4", "rows": rows, "file": path }))
        }
    }
}
