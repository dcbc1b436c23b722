//! Divergences between probability vectors.
//!
//! Atoms with `p_x = q_x = 0` never contribute and are ignored throughout.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::channels::ProbVector;
use crate::error::{Error, Result};
use crate::value::DivergenceValue;

fn check_dims(p: &ProbVector, q: &ProbVector) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "probability vectors of length {} and {}",
            p.dim(),
            q.dim()
        )));
    }
    Ok(())
}

pub(crate) fn check_epsilon(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::BadEpsilon(eps));
    }
    Ok(())
}

fn pairs<'a>(p: &'a ProbVector, q: &'a ProbVector) -> impl Iterator<Item = (f64, f64)> + 'a {
    p.weights().iter().copied().zip(q.weights().iter().copied())
}

fn support_violated(p: &ProbVector, q: &ProbVector) -> bool {
    pairs(p, q).any(|(a, b)| a > 0.0 && b == 0.0)
}

/// Kullback-Leibler divergence `Σ p log2(p/q)`.
pub fn kl(p: &ProbVector, q: &ProbVector) -> Result<DivergenceValue> {
    check_dims(p, q)?;
    if support_violated(p, q) {
        return Ok(DivergenceValue::infinite());
    }
    let s: f64 = pairs(p, q)
        .filter(|&(a, _)| a > 0.0)
        .map(|(a, b)| a * (a / b).log2())
        .sum();
    Ok(DivergenceValue::exact(s))
}

/// Rényi divergence of order `alpha ∈ [0, ∞]`.
///
/// `alpha = 0, 1, ∞` return [`dmin_c`], [`kl`] and [`dmax_c`]. For
/// `alpha > 1` a support violation gives `+∞`; for `alpha < 1` the sum runs
/// over the common support and is `+∞` only when the supports are disjoint.
pub fn renyi(p: &ProbVector, q: &ProbVector, alpha: f64) -> Result<DivergenceValue> {
    check_dims(p, q)?;
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::BadAlpha(format!("Rényi order must be >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return dmin_c(p, q);
    }
    if alpha == 1.0 {
        return kl(p, q);
    }
    if alpha == f64::INFINITY {
        return dmax_c(p, q);
    }
    if alpha > 1.0 && support_violated(p, q) {
        return Ok(DivergenceValue::infinite());
    }
    let s: f64 = pairs(p, q)
        .filter(|&(a, b)| a > 0.0 && b > 0.0)
        .map(|(a, b)| a.powf(alpha) * b.powf(1.0 - alpha))
        .sum();
    Ok(DivergenceValue::from_renyi_sum(s, alpha, true))
}

/// `log2 max_x p_x / q_x`.
pub fn dmax_c(p: &ProbVector, q: &ProbVector) -> Result<DivergenceValue> {
    check_dims(p, q)?;
    if support_violated(p, q) {
        return Ok(DivergenceValue::infinite());
    }
    let m = pairs(p, q)
        .filter(|&(a, _)| a > 0.0)
        .map(|(a, b)| a / b)
        .fold(0.0, f64::max);
    Ok(DivergenceValue::exact(m.log2()))
}

/// `-log2 Σ_{x: p_x > 0} q_x`.
pub fn dmin_c(p: &ProbVector, q: &ProbVector) -> Result<DivergenceValue> {
    check_dims(p, q)?;
    let s: f64 = pairs(p, q).filter(|&(a, _)| a > 0.0).map(|(_, b)| b).sum();
    if s <= 0.0 {
        return Ok(DivergenceValue::infinite());
    }
    Ok(DivergenceValue::exact(-s.log2()))
}

/// Indices sorted by `p_x / q_x` descending, `q_x = 0` atoms first, ties by
/// index, with `0/0` atoms removed.
pub(crate) fn ratio_order(p: &[f64], q: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0 || q[i] > 0.0).collect();
    idx.sort_by(|&i, &j| {
        // p_i/q_i > p_j/q_j  <=>  p_i q_j > p_j q_i  (with q = 0 meaning +∞)
        let lhs = p[i] * q[j];
        let rhs = p[j] * q[i];
        rhs.partial_cmp(&lhs).unwrap_or(Ordering::Equal).then(i.cmp(&j))
    });
    idx
}

/// Minimal `q`-mass of a test that accepts `p` with probability at least
/// `1 - eps`, i.e. the Neyman-Pearson optimum.
pub(crate) fn np_optimum(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let target = 1.0 - eps;
    let mut pm = 0.0;
    let mut qm = 0.0;
    for i in ratio_order(p, q) {
        if pm >= target {
            break;
        }
        let need = target - pm;
        if p[i] <= need {
            pm += p[i];
            qm += q[i];
        } else {
            qm += q[i] * need / p[i];
            pm = target;
        }
    }
    qm
}

/// Hypothesis-testing divergence `-log2 min{ q·e : p·e >= 1 - eps, 0 <= e <= 1 }`.
pub fn hyptest_c(p: &ProbVector, q: &ProbVector, eps: f64) -> Result<DivergenceValue> {
    check_dims(p, q)?;
    check_epsilon(eps)?;
    if eps == 0.0 {
        return dmin_c(p, q);
    }
    let qm = np_optimum(p.weights(), q.weights(), eps);
    if qm <= 0.0 {
        return Ok(DivergenceValue::infinite());
    }
    Ok(DivergenceValue::exact(-qm.log2()))
}

/// The classical divergences by name, for callers that pick one at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassicalDivergence {
    Kl,
    Renyi(f64),
    Dmax,
    Dmin,
    Hyptest(f64),
}

impl ClassicalDivergence {
    pub fn eval(self, p: &ProbVector, q: &ProbVector) -> Result<DivergenceValue> {
        match self {
            Self::Kl => kl(p, q),
            Self::Renyi(a) => renyi(p, q, a),
            Self::Dmax => dmax_c(p, q),
            Self::Dmin => dmin_c(p, q),
            Self::Hyptest(e) => hyptest_c(p, q, e),
        }
    }

    /// Whether the divergence is additive under tensor products.
    pub fn is_additive(self) -> bool {
        !matches!(self, Self::Hyptest(e) if e > 0.0)
    }

    /// Rejects orders and error levels outside the accepted ranges.
    pub fn validate(self) -> Result<()> {
        match self {
            Self::Renyi(a) if a.is_nan() || a < 0.0 => {
                Err(Error::BadAlpha(format!("Rényi order must be >= 0, got {a}")))
            }
            Self::Hyptest(e) => check_epsilon(e),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ClassicalDivergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kl => write!(f, "kl"),
            Self::Renyi(a) => write!(f, "renyi:{a}"),
            Self::Dmax => write!(f, "dmax"),
            Self::Dmin => write!(f, "dmin"),
            Self::Hyptest(e) => write!(f, "hyptest:{e}"),
        }
    }
}

/// Parses `kl`, `renyi:<alpha>`, `dmax`, `dmin` and `hyptest:<eps>`.
impl FromStr for ClassicalDivergence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let num = |what: &str| -> Result<f64> {
            let a = arg.ok_or_else(|| Error::Invalid(format!("{head} needs a parameter, e.g. {head}:{what}")))?;
            a.parse().map_err(|_| Error::Invalid(format!("cannot parse parameter {a:?} of {head}")))
        };
        let d = match (head, arg) {
            ("kl", None) => Self::Kl,
            ("dmax", None) => Self::Dmax,
            ("dmin", None) => Self::Dmin,
            ("renyi", _) => Self::Renyi(num("2")?),
            ("hyptest", _) => Self::Hyptest(num("0.1")?),
            _ => return Err(Error::Invalid(format!("unknown classical divergence {s:?}"))),
        };
        d.validate()?;
        Ok(d)
    }
}
