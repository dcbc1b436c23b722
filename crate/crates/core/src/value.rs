//! Divergence values in bits.

use std::fmt;

/// A divergence value in bits, possibly `+∞`.
///
/// `exact` is `true` for closed-form evaluations and `false` when the value
/// comes from an optimizer or an extrapolation, in which case it is a bound
/// or an estimate rather than the quantity itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceValue {
    pub value: f64,
    pub exact: bool,
}

impl DivergenceValue {
    pub fn exact(value: f64) -> Self {
        Self { value, exact: true }
    }

    pub fn estimate(value: f64) -> Self {
        Self { value, exact: false }
    }

    pub fn infinite() -> Self {
        Self::exact(f64::INFINITY)
    }

    pub fn is_infinite(&self) -> bool {
        self.value == f64::INFINITY
    }

    /// `log2(q) / (alpha - 1)` for a Rényi-type sum `q`; `+∞` when `q` vanishes
    /// with `alpha < 1` or blows up with `alpha > 1`.
    pub(crate) fn from_renyi_sum(q: f64, alpha: f64, exact: bool) -> Self {
        let value = if q <= 0.0 {
            f64::INFINITY
        } else {
            q.log2() / (alpha - 1.0)
        };
        Self { value, exact }
    }
}

impl fmt::Display for DivergenceValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.value)
        }
    }
}

impl From<DivergenceValue> for f64 {
    fn from(v: DivergenceValue) -> f64 {
        v.value
    }
}
