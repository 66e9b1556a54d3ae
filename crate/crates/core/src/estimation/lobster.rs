//! LOBSTER message/orderbook files.
//!
//! Message rows: `time, type, order_id, size, price, direction` with prices
//! in units of 1e-4 currency. Orderbook rows hold `ask, ask_size, bid,
//! bid_size` per level; only level 1 is read. Row `k` of the orderbook is
//! the book after message `k`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Price units per currency unit.
pub const PRICE_SCALE: i64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventType {
    Submission,
    Cancellation,
    Deletion,
    ExecutionVisible,
    ExecutionHidden,
    Cross,
    Halt,
}

impl EventType {
    pub fn code(self) -> u8 {
        match self {
            EventType::Submission => 1,
            EventType::Cancellation => 2,
            EventType::Deletion => 3,
            EventType::ExecutionVisible => 4,
            EventType::ExecutionHidden => 5,
            EventType::Cross => 6,
            EventType::Halt => 7,
        }
    }

    pub fn from_code(c: i64) -> Option<Self> {
        Some(match c {
            1 => EventType::Submission,
            2 => EventType::Cancellation,
            3 => EventType::Deletion,
            4 => EventType::ExecutionVisible,
            5 => EventType::ExecutionHidden,
            6 => EventType::Cross,
            7 => EventType::Halt,
            _ => return None,
        })
    }

    pub fn is_execution(self) -> bool {
        matches!(self, EventType::ExecutionVisible | EventType::ExecutionHidden)
    }
}

/// Side of the resting (limit) order the message refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Buy,
    Sell,
}

impl Direction {
    pub fn code(self) -> i8 {
        match self {
            Direction::Buy => 1,
            Direction::Sell => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderEvent {
    pub timestamp: f64,
    pub event_type: EventType,
    pub order_id: u64,
    pub size: u64,
    pub price: i64,
    pub direction: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub timestamp: f64,
    pub best_ask: i64,
    pub ask_size: u64,
    pub best_bid: i64,
    pub bid_size: u64,
}

impl BookSnapshot {
    /// Spread in ticks of `tick` price units (rounded down).
    pub fn spread_ticks(&self, tick: i64) -> i64 {
        (self.best_ask - self.best_bid) / tick
    }

    /// Mid-price in half price units (`ask + bid`), exact.
    pub fn mid2(&self) -> i64 {
        self.best_ask + self.best_bid
    }
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_string(), line, msg: msg.into() }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(r)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &str, line: usize) -> Result<T> {
    let s = rec.get(i).ok_or_else(|| parse_err(path, line, format!("missing column {}", i + 1)))?;
    s.parse().map_err(|_| parse_err(path, line, format!("column {}: cannot parse {s:?}", i + 1)))
}

pub fn read_messages<R: Read>(r: R, path: &str) -> Result<Vec<OrderEvent>> {
    let mut out = Vec::new();
    for (i, rec) in reader(r).records().enumerate() {
        let line = i + 1;
        let rec = rec?;
        if rec.len() != 6 {
            return Err(parse_err(path, line, format!("expected 6 columns, found {}", rec.len())));
        }
        let code: i64 = field(&rec, 1, path, line)?;
        let event_type =
            EventType::from_code(code).ok_or_else(|| parse_err(path, line, format!("unknown event type {code}")))?;
        let dir: i64 = field(&rec, 5, path, line)?;
        let direction = match dir {
            1 => Direction::Buy,
            -1 => Direction::Sell,
            d => return Err(parse_err(path, line, format!("direction must be 1 or -1, got {d}"))),
        };
        let price: i64 = field(&rec, 4, path, line)?;
        if price <= 0 && event_type != EventType::Halt {
            return Err(parse_err(path, line, format!("price must be positive, got {price}")));
        }
        let timestamp: f64 = field(&rec, 0, path, line)?;
        if !timestamp.is_finite() {
            return Err(parse_err(path, line, "timestamp is not finite"));
        }
        out.push(OrderEvent {
            timestamp,
            event_type,
            order_id: field(&rec, 2, path, line)?,
            size: field(&rec, 3, path, line)?,
            price,
            direction,
        });
    }
    Ok(out)
}

/// Reads level-1 quotes; timestamps are taken from `times`, one per row.
pub fn read_orderbook<R: Read>(r: R, path: &str, times: &[f64]) -> Result<Vec<BookSnapshot>> {
    let mut out = Vec::new();
    for (i, rec) in reader(r).records().enumerate() {
        let line = i + 1;
        let rec = rec?;
        if rec.len() < 4 || rec.len() % 4 != 0 {
            return Err(parse_err(path, line, format!("expected 4k columns, found {}", rec.len())));
        }
        let timestamp = *times
            .get(i)
            .ok_or_else(|| parse_err(path, line, "more orderbook rows than messages"))?;
        let s = BookSnapshot {
            timestamp,
            best_ask: field(&rec, 0, path, line)?,
            ask_size: field(&rec, 1, path, line)?,
            best_bid: field(&rec, 2, path, line)?,
            bid_size: field(&rec, 3, path, line)?,
        };
        if s.best_ask <= s.best_bid {
            return Err(parse_err(path, line, "best ask must exceed best bid"));
        }
        out.push(s);
    }
    if out.len() != times.len() {
        return Err(parse_err(path, out.len() + 1, "fewer orderbook rows than messages"));
    }
    Ok(out)
}

/// Parses a message/orderbook pair. Out-of-order timestamps are logged
/// and both files are stably re-sorted by time.
pub fn parse_lobster(message_file: &Path, orderbook_file: &Path) -> Result<(Vec<OrderEvent>, Vec<BookSnapshot>)> {
    let mp = message_file.display().to_string();
    let op = orderbook_file.display().to_string();
    let events = read_messages(std::fs::File::open(message_file)?, &mp)?;
    let times: Vec<f64> = events.iter().map(|e| e.timestamp).collect();
    let snaps = read_orderbook(std::fs::File::open(orderbook_file)?, &op, &times)?;
    Ok(sort_if_needed(events, snaps, &mp))
}

pub(crate) fn sort_if_needed(
    events: Vec<OrderEvent>,
    snaps: Vec<BookSnapshot>,
    path: &str,
) -> (Vec<OrderEvent>, Vec<BookSnapshot>) {
    if events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp) {
        return (events, snaps);
    }
    log::warn!("{path}: timestamps are not monotone; re-sorting");
    let mut idx: Vec<usize> = (0..events.len()).collect();
    idx.sort_by(|&a, &b| events[a].timestamp.total_cmp(&events[b].timestamp));
    (idx.iter().map(|&i| events[i]).collect(), idx.iter().map(|&i| snaps[i]).collect())
}

pub fn write_messages<W: Write>(w: W, events: &[OrderEvent]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for e in events {
        wr.write_record([
            format!("{:.9}", e.timestamp),
            e.event_type.code().to_string(),
            e.order_id.to_string(),
            e.size.to_string(),
            e.price.to_string(),
            e.direction.code().to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_orderbook<W: Write>(w: W, snaps: &[BookSnapshot]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for s in snaps {
        wr.write_record([
            s.best_ask.to_string(),
            s.ask_size.to_string(),
            s.best_bid.to_string(),
            s.bid_size.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_lobster(events: &[OrderEvent], snaps: &[BookSnapshot], message_file: &Path, orderbook_file: &Path) -> Result<()> {
    write_messages(std::fs::File::create(message_file)?, events)?;
    write_orderbook(std::fs::File::create(orderbook_file)?, snaps)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MSG: &str = "34200.004241176,1,16113575,18,5853300,1\n\
                       34200.025552192,1,16120456,18,5859100,-1\n\
                       34200.201743037,4,16120456,18,5859100,-1\n";
    const OB: &str = "5859400,200,5853300,18\n5859100,18,5853300,18\n5859400,200,5853300,18\n";

    #[test]
    fn three_row_round_trip() {
        let ev = read_messages(MSG.as_bytes(), "m").unwrap();
        assert_eq!(ev.len(), 3);
        assert_eq!(ev[1].order_id, 16120456);
        assert_eq!(ev[2].event_type, EventType::ExecutionVisible);
        assert_eq!(ev[2].direction, Direction::Sell);
        assert_eq!(ev[0].price, 5853300);
        let times: Vec<f64> = ev.iter().map(|e| e.timestamp).collect();
        let ob = read_orderbook(OB.as_bytes(), "o", &times).unwrap();
        assert_eq!(ob[1].best_ask, 5859100);
        assert_eq!(ob[1].spread_ticks(100), 58);
        let mut buf = Vec::new();
        write_messages(&mut buf, &ev).unwrap();
        assert_eq!(read_messages(buf.as_slice(), "m").unwrap(), ev);
        let mut buf = Vec::new();
        write_orderbook(&mut buf, &ob).unwrap();
        assert_eq!(read_orderbook(buf.as_slice(), "o", &times).unwrap(), ob);
    }

    #[test]
    fn empty_files() {
        assert!(read_messages("".as_bytes(), "m").unwrap().is_empty());
        assert!(read_orderbook("".as_bytes(), "o", &[]).unwrap().is_empty());
    }

    #[test]
    fn malformed_rows_report_line() {
        let bad = "34200.1,1,1,1,100,1\n34200.2,9,1,1,100,1\n";
        match read_messages(bad.as_bytes(), "m") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let bad = "34200.1,1,1,1,100,1\n34200.2,1,1,1\n";
        assert!(matches!(read_messages(bad.as_bytes(), "m"), Err(Error::Parse { line: 2, .. })));
        assert!(read_orderbook("100,1,200,1\n".as_bytes(), "o", &[0.0]).is_err());
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let ev = read_messages("2.0,1,1,1,100,1\n1.0,1,2,1,100,1\n".as_bytes(), "m").unwrap();
        let ob = read_orderbook("200,1,100,1\n300,1,100,1\n".as_bytes(), "o", &[2.0, 1.0]).unwrap();
        let (ev, ob) = sort_if_needed(ev, ob, "m");
        assert_eq!(ev[0].order_id, 2);
        assert_eq!(ob[0].best_ask, 300);
    }
}
