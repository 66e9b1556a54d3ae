//! Rate estimates from level-1 snapshots and executions.

use serde::Serialize;

use super::lobster::{BookSnapshot, Direction, OrderEvent};
use crate::error::{Error, Result};

/// Rows with a one-tick spread, the mid-price jumps between consecutive
/// such rows and the time they cover.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpreadFilter {
    pub kept_rows: usize,
    pub total_rows: usize,
    pub jumps: u64,
    pub seconds: f64,
}

impl SpreadFilter {
    pub fn kept_fraction(&self) -> f64 {
        self.kept_rows as f64 / self.total_rows.max(1) as f64
    }
}

/// Scans snapshots keeping only one-tick-spread rows. An interval between
/// consecutive rows counts towards the elapsed time when it starts at a
/// kept row.
pub fn one_tick_filter(snaps: &[BookSnapshot], tick: i64) -> SpreadFilter {
    let mut kept = 0;
    let mut jumps = 0u64;
    let mut seconds = 0.0;
    let mut last_mid: Option<i64> = None;
    for (i, s) in snaps.iter().enumerate() {
        if s.best_ask - s.best_bid != tick {
            continue;
        }
        kept += 1;
        if let Some(m) = last_mid {
            jumps += ((s.mid2() - m).abs() / (2 * tick)) as u64;
        }
        last_mid = Some(s.mid2());
        if let Some(n) = snaps.get(i + 1) {
            seconds += n.timestamp - s.timestamp;
        }
    }
    SpreadFilter { kept_rows: kept, total_rows: snaps.len(), jumps, seconds }
}

/// Mid-price jump rate per minute over one-tick-spread periods.
pub fn estimate_lambda(snaps: &[BookSnapshot], tick: i64) -> Result<f64> {
    if snaps.is_empty() {
        return Err(Error::Estimation("no snapshots".into()));
    }
    let f = one_tick_filter(snaps, tick);
    if f.kept_rows == 0 || f.seconds <= 0.0 {
        return Err(Error::Estimation("no time with a one-tick spread".into()));
    }
    Ok(f.jumps as f64 / (f.seconds / 60.0))
}

/// One marketable order: consecutive executions with equal timestamp and
/// resting-order direction, as message index range `[first, last]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecutionGroup {
    pub first: usize,
    pub last: usize,
    pub direction: Direction,
}

pub fn execution_groups(events: &[OrderEvent]) -> Vec<ExecutionGroup> {
    let mut out: Vec<ExecutionGroup> = Vec::new();
    for (i, e) in events.iter().enumerate() {
        if !e.event_type.is_execution() {
            continue;
        }
        if let Some(g) = out.last_mut() {
            let prev = &events[g.last];
            if g.last + 1 == i && prev.timestamp == e.timestamp && g.direction == e.direction {
                g.last = i;
                continue;
            }
        }
        out.push(ExecutionGroup { first: i, last: i, direction: e.direction });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UninformedCounts {
    /// Buyer-initiated (resting sells executed).
    pub buys: u64,
    /// Seller-initiated (resting buys executed).
    pub sells: u64,
    pub seconds: f64,
}

/// Counts market orders that left the mid unchanged, starting from a
/// one-tick spread.
pub fn count_uninformed(events: &[OrderEvent], snaps: &[BookSnapshot], tick: i64) -> Result<UninformedCounts> {
    if events.len() != snaps.len() {
        return Err(Error::Estimation("messages and snapshots differ in length".into()));
    }
    let mut c = UninformedCounts { buys: 0, sells: 0, seconds: one_tick_filter(snaps, tick).seconds };
    for g in execution_groups(events) {
        if g.first == 0 {
            continue;
        }
        let before = &snaps[g.first - 1];
        let after = &snaps[g.last];
        if before.best_ask - before.best_bid == tick && before.mid2() == after.mid2() {
            match g.direction {
                Direction::Sell => c.buys += 1,
                Direction::Buy => c.sells += 1,
            }
        }
    }
    Ok(c)
}

/// `(lambda_plus, lambda_minus)` per minute. Without side resolution each
/// side gets half of the total rate.
pub fn estimate_uninformed_rates(
    events: &[OrderEvent],
    snaps: &[BookSnapshot],
    tick: i64,
    side_resolved: bool,
) -> Result<(f64, f64)> {
    if events.is_empty() {
        return Ok((0.0, 0.0));
    }
    let c = count_uninformed(events, snaps, tick)?;
    if c.seconds <= 0.0 {
        return Err(Error::Estimation("no time with a one-tick spread".into()));
    }
    let minutes = c.seconds / 60.0;
    if side_resolved {
        Ok((c.buys as f64 / minutes, c.sells as f64 / minutes))
    } else {
        let half = (c.buys + c.sells) as f64 / minutes / 2.0;
        Ok((half, half))
    }
}
