use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Extended-integer relative price in ticks.
///
/// `PosInf` means "no order", `NegInf` a market order. The derived ordering
/// puts `NegInf` below every integer and `PosInf` above.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelPrice {
    NegInf,
    Int(i32),
    PosInf,
}

impl RelPrice {
    pub fn is_finite(self) -> bool {
        matches!(self, RelPrice::Int(_))
    }

    pub fn as_int(self) -> Option<i32> {
        match self {
            RelPrice::Int(k) => Some(k),
            _ => None,
        }
    }

    /// `self + k` for an integer `k`; infinities absorb.
    pub fn shift(self, k: i32) -> RelPrice {
        match self {
            RelPrice::Int(x) => RelPrice::Int(x + k),
            inf => inf,
        }
    }

    /// Sum of two extended integers. `+inf + -inf` is undefined.
    pub fn checked_add(self, other: RelPrice) -> Option<RelPrice> {
        use RelPrice::*;
        match (self, other) {
            (Int(a), Int(b)) => Some(Int(a + b)),
            (PosInf, NegInf) | (NegInf, PosInf) => None,
            (PosInf, _) | (_, PosInf) => Some(PosInf),
            (NegInf, _) | (_, NegInf) => Some(NegInf),
        }
    }

    /// Product with an integer. Zero times anything is zero, so indicator
    /// weights like `0 * inf` vanish.
    pub fn mul_int(self, x: i32) -> RelPrice {
        use RelPrice::*;
        match (self, x.signum()) {
            (_, 0) => Int(0),
            (Int(a), _) => Int(a * x),
            (PosInf, 1) | (NegInf, -1) => PosInf,
            _ => NegInf,
        }
    }

    pub fn neg(self) -> RelPrice {
        self.mul_int(-1)
    }
}

impl fmt::Display for RelPrice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelPrice::NegInf => write!(f, "-inf"),
            RelPrice::Int(k) => write!(f, "{k}"),
            RelPrice::PosInf => write!(f, "inf"),
        }
    }
}

impl FromStr for RelPrice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" => Ok(RelPrice::PosInf),
            "-inf" | "-infinity" => Ok(RelPrice::NegInf),
            t => t
                .parse::<i32>()
                .map(RelPrice::Int)
                .map_err(|_| Error::InvalidRelPrice(s.to_string())),
        }
    }
}

/// One side of an action: a new quote (cancel and replace) or `o`, which
/// leaves the outstanding order untouched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Leg {
    DoNothing,
    Quote(RelPrice),
}

impl Leg {
    pub const CANCEL: Leg = Leg::Quote(RelPrice::PosInf);
    pub const MARKET: Leg = Leg::Quote(RelPrice::NegInf);

    pub fn int(k: i32) -> Leg {
        Leg::Quote(RelPrice::Int(k))
    }

    /// Ordering key used to break ties between equally good actions:
    /// `o` first, then quotes by distance from the touch, then cancel,
    /// then market orders.
    pub fn rank(self) -> u32 {
        match self {
            Leg::DoNothing => 0,
            Leg::Quote(RelPrice::Int(k)) => 1 + 2 * k.unsigned_abs() + u32::from(k < 0),
            Leg::Quote(RelPrice::PosInf) => u32::MAX - 1,
            Leg::Quote(RelPrice::NegInf) => u32::MAX,
        }
    }
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Leg::DoNothing => write!(f, "o"),
            Leg::Quote(r) => write!(f, "{r}"),
        }
    }
}

impl FromStr for Leg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("o") {
            Ok(Leg::DoNothing)
        } else {
            s.parse().map(Leg::Quote)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use RelPrice::*;

    fn any_rel() -> impl Strategy<Value = RelPrice> {
        prop_oneof![Just(NegInf), Just(PosInf), (-50i32..50).prop_map(Int)]
    }

    #[test]
    fn parse_round_trip() {
        for s in ["-inf", "inf", "0", "-3", "17"] {
            let r: RelPrice = s.parse().unwrap();
            assert_eq!(r.to_string(), s);
        }
        assert_eq!("o".parse::<Leg>().unwrap(), Leg::DoNothing);
        assert_eq!("2".parse::<Leg>().unwrap(), Leg::int(2));
        assert!("x".parse::<RelPrice>().is_err());
    }

    #[test]
    fn tie_rank_order() {
        let legs = [Leg::DoNothing, Leg::int(0), Leg::int(1), Leg::int(-1), Leg::int(2), Leg::CANCEL, Leg::MARKET];
        for w in legs.windows(2) {
            assert!(w[0].rank() < w[1].rank(), "{} vs {}", w[0], w[1]);
        }
    }

    #[test]
    fn indicator_products() {
        assert_eq!(PosInf.mul_int(0), Int(0));
        assert_eq!(PosInf.mul_int(1), PosInf);
        assert_eq!(Int(3).mul_int(1).checked_add(PosInf.mul_int(0)), Some(Int(3)));
    }

    proptest! {
        #[test]
        fn ordering_puts_infinities_outside(k in -1000i32..1000) {
            prop_assert!(NegInf < Int(k));
            prop_assert!(Int(k) < PosInf);
        }

        #[test]
        fn addition_conventions(a in any_rel(), b in any_rel()) {
            let s = a.checked_add(b);
            match (a, b) {
                (PosInf, NegInf) | (NegInf, PosInf) => prop_assert_eq!(s, None),
                (PosInf, _) | (_, PosInf) => prop_assert_eq!(s, Some(PosInf)),
                (NegInf, _) | (_, NegInf) => prop_assert_eq!(s, Some(NegInf)),
                (Int(x), Int(y)) => prop_assert_eq!(s, Some(Int(x + y))),
            }
            prop_assert_eq!(s, b.checked_add(a));
        }

        #[test]
        fn shift_preserves_order(a in any_rel(), b in any_rel(), k in -20i32..20) {
            if a <= b {
                prop_assert!(a.shift(k) <= b.shift(k));
            }
        }
    }
}
