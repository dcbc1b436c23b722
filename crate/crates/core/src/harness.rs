//! Randomized checks of the divergence axioms and their consequences.
//!
//! Every check computes a signed slack, in bits, that is positive exactly
//! when the property is violated. Checks run over instances drawn from
//! per-instance seeds `derive_seed(config.seed, stream(check), i)`, so one
//! recorded seed replays one instance. Instances run in parallel and the
//! results are reduced in index order, which makes reports reproducible
//! bit for bit.
//!
//! Tolerances: `1e-8` for equalities and `1e-7` for inequalities between
//! exact values, `1e-4` whenever an optimizer or extrapolated value enters.
//! Checks where an optimizer value would sit on the wrong side of its bound
//! are marked soft; they are reported but never fail a run.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel_div::{
    amortized_lb, channel_dmax, channel_hyptest, channel_umegaki, geometric_renyi_channel, OptimizerConfig,
};
use crate::channels::{
    completely_randomizing, make_isometry_channel, make_replacement, ClassicalChannel, ProbVector,
    QuantumChannel, QuantumState, Superchannel,
};
use crate::classical::{ClassicalDivergence, ClassicalDivergence as CD};
use crate::error::{Error, Result};
use crate::geometric::check_alpha;
use crate::linalg::{hermitian_op_norm, lambda_min, tolerances, ComplexMatrix};
use crate::majorization::{classical_channel_max_ext, classical_channel_min_ext, Dichotomy};
use crate::random::{
    derive_seed, haar_isometry, random_channel, random_classical_superchannel, random_mixed_state,
    random_prob_vector, random_stochastic, random_superchannel, rng_from_seed, SeededRng,
};
use crate::state::{dmax_q, dmin_q, geometric_renyi_state, hyptest_q, umegaki};
use crate::value::DivergenceValue;

pub const EQUALITY_TOL: f64 = 1e-8;
pub const INEQUALITY_TOL: f64 = 1e-7;
pub const OPTIMIZER_TOL: f64 = 1e-4;
/// Threshold below which a divergence counts as zero in the faithfulness check.
pub const FAITHFUL_ZERO: f64 = 1e-9;
/// Largest Choi distance allowed when the divergence counts as zero.
pub const FAITHFUL_DISTANCE: f64 = 1e-5;

/// How a divergence behaves on tensor products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Additivity {
    Additive,
    SubAdditive,
    SuperAdditive,
    Unknown,
}

/// A divergence between channels of equal shape, as seen by the harness.
pub trait ChannelDivergence: Sync {
    fn name(&self) -> String;

    fn eval(&self, m: &QuantumChannel, n: &QuantumChannel) -> Result<DivergenceValue>;

    /// The state divergence it reduces to on replacement channels.
    fn on_states(&self, rho: &QuantumState, sigma: &QuantumState) -> Result<DivergenceValue>;

    /// Whether values come from an optimizer and are lower bounds.
    fn lower_bound(&self) -> bool {
        false
    }

    /// Whether it is only defined on classical channels.
    fn classical(&self) -> bool {
        false
    }

    /// Whether it is normalized and sits between `D_min` and `D_max`.
    fn relative_entropy(&self) -> bool;

    /// Whether it vanishes only on equal arguments.
    fn faithful(&self) -> bool {
        true
    }

    fn additivity(&self) -> Additivity;
}

/// The divergences the harness and the command line know by name.
///
/// Text forms: `channel-dmax`, `geometric:<alpha>`, `min-ext:<classical>`,
/// `max-ext:<classical>`, `channel-umegaki`, `channel-hyptest:<eps>`,
/// `amortized-lb`, and `broken-stub`, where `<classical>` is one of `kl`,
/// `renyi:<alpha>`, `dmax`, `dmin`, `hyptest:<eps>`.
///
/// `broken-stub` is minus the max-divergence. It violates the data processing
/// inequality on almost every instance and exists to exercise failure paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DivergenceTag {
    ChannelDmax,
    Geometric(f64),
    MinExt(ClassicalDivergence),
    MaxExt(ClassicalDivergence),
    ChannelUmegaki,
    ChannelHyptest(f64),
    AmortizedLb,
    BrokenStub,
}

impl fmt::Display for DivergenceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ChannelDmax => write!(f, "channel-dmax"),
            Self::Geometric(a) => write!(f, "geometric:{a}"),
            Self::MinExt(d) => write!(f, "min-ext:{d}"),
            Self::MaxExt(d) => write!(f, "max-ext:{d}"),
            Self::ChannelUmegaki => write!(f, "channel-umegaki"),
            Self::ChannelHyptest(e) => write!(f, "channel-hyptest:{e}"),
            Self::AmortizedLb => write!(f, "amortized-lb"),
            Self::BrokenStub => write!(f, "broken-stub"),
        }
    }
}

impl FromStr for DivergenceTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let num = || -> Result<f64> {
            let a = arg.ok_or_else(|| Error::Invalid(format!("{head} needs a parameter")))?;
            a.parse().map_err(|_| Error::Invalid(format!("cannot parse parameter {a:?} of {head}")))
        };
        let tag = match (head, arg) {
            ("channel-dmax", None) => Self::ChannelDmax,
            ("channel-umegaki", None) => Self::ChannelUmegaki,
            ("amortized-lb", None) => Self::AmortizedLb,
            ("broken-stub", None) => Self::BrokenStub,
            ("geometric", _) => Self::Geometric(num()?),
            ("channel-hyptest", _) => Self::ChannelHyptest(num()?),
            ("min-ext", Some(a)) => Self::MinExt(a.parse()?),
            ("max-ext", Some(a)) => Self::MaxExt(a.parse()?),
            _ => return Err(Error::Invalid(format!("unknown divergence {s:?}"))),
        };
        tag.validate()?;
        Ok(tag)
    }
}

impl TryFrom<String> for DivergenceTag {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DivergenceTag> for String {
    fn from(t: DivergenceTag) -> String {
        t.to_string()
    }
}

impl DivergenceTag {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Geometric(a) => check_alpha(a),
            Self::ChannelHyptest(e) => crate::classical::check_epsilon(e),
            Self::MinExt(d) | Self::MaxExt(d) => d.validate(),
            _ => Ok(()),
        }
    }

    /// This tag with explicit optimizer settings.
    pub fn with_optimizer(self, optimizer: OptimizerConfig) -> Configured {
        Configured { tag: self, optimizer }
    }
}

/// A [`DivergenceTag`] together with the optimizer settings it runs with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Configured {
    pub tag: DivergenceTag,
    pub optimizer: OptimizerConfig,
}

fn classical_pair(m: &QuantumChannel, n: &QuantumChannel) -> Result<(ClassicalChannel, ClassicalChannel)> {
    match (m.as_classical(), n.as_classical()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Invalid("classical divergence applied to a non-classical channel".into())),
    }
}

fn classical_states(rho: &QuantumState, sigma: &QuantumState) -> Result<(ProbVector, ProbVector)> {
    match (rho.as_classical(), sigma.as_classical()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Invalid("classical divergence applied to non-diagonal states".into())),
    }
}

impl ChannelDivergence for Configured {
    fn name(&self) -> String {
        self.tag.to_string()
    }

    fn eval(&self, m: &QuantumChannel, n: &QuantumChannel) -> Result<DivergenceValue> {
        let cfg = &self.optimizer;
        match self.tag {
            DivergenceTag::ChannelDmax => channel_dmax(m, n),
            DivergenceTag::Geometric(a) => geometric_renyi_channel(m, n, a),
            DivergenceTag::MinExt(d) => {
                let (a, b) = classical_pair(m, n)?;
                classical_channel_min_ext(d, &a, &b)
            }
            DivergenceTag::MaxExt(d) => {
                let (a, b) = classical_pair(m, n)?;
                classical_channel_max_ext(d, &a, &b)
            }
            DivergenceTag::ChannelUmegaki => Ok(channel_umegaki(m, n, cfg)?.value),
            DivergenceTag::ChannelHyptest(e) => Ok(channel_hyptest(m, n, e, cfg)?.value),
            DivergenceTag::AmortizedLb => Ok(amortized_lb(m, n, cfg)?.value),
            DivergenceTag::BrokenStub => {
                let v = channel_dmax(m, n)?;
                Ok(DivergenceValue::exact(-v.value))
            }
        }
    }

    fn on_states(&self, rho: &QuantumState, sigma: &QuantumState) -> Result<DivergenceValue> {
        match self.tag {
            DivergenceTag::ChannelDmax => dmax_q(rho, sigma),
            DivergenceTag::Geometric(a) => geometric_renyi_state(rho, sigma, a),
            DivergenceTag::MinExt(d) | DivergenceTag::MaxExt(d) => {
                let (p, q) = classical_states(rho, sigma)?;
                d.eval(&p, &q)
            }
            DivergenceTag::ChannelUmegaki | DivergenceTag::AmortizedLb => umegaki(rho, sigma),
            DivergenceTag::ChannelHyptest(e) => hyptest_q(rho, sigma, e),
            DivergenceTag::BrokenStub => Ok(DivergenceValue::exact(-dmax_q(rho, sigma)?.value)),
        }
    }

    fn lower_bound(&self) -> bool {
        matches!(
            self.tag,
            DivergenceTag::ChannelUmegaki | DivergenceTag::ChannelHyptest(_) | DivergenceTag::AmortizedLb
        )
    }

    fn classical(&self) -> bool {
        matches!(self.tag, DivergenceTag::MinExt(_) | DivergenceTag::MaxExt(_))
    }

    fn relative_entropy(&self) -> bool {
        match self.tag {
            DivergenceTag::ChannelDmax | DivergenceTag::Geometric(_) => true,
            DivergenceTag::ChannelUmegaki | DivergenceTag::AmortizedLb => true,
            DivergenceTag::MinExt(d) | DivergenceTag::MaxExt(d) => !matches!(d, CD::Hyptest(_)),
            DivergenceTag::ChannelHyptest(_) | DivergenceTag::BrokenStub => false,
        }
    }

    fn faithful(&self) -> bool {
        match self.tag {
            DivergenceTag::MinExt(d) | DivergenceTag::MaxExt(d) => !matches!(d, CD::Dmin) && d != CD::Renyi(0.0),
            _ => true,
        }
    }

    fn additivity(&self) -> Additivity {
        match self.tag {
            DivergenceTag::ChannelDmax | DivergenceTag::Geometric(_) => Additivity::Additive,
            DivergenceTag::MinExt(d) if d.is_additive() => Additivity::Additive,
            DivergenceTag::MaxExt(d) if d.is_additive() => Additivity::SubAdditive,
            _ => Additivity::Unknown,
        }
    }
}

impl ChannelDivergence for DivergenceTag {
    fn name(&self) -> String {
        self.to_string()
    }

    fn eval(&self, m: &QuantumChannel, n: &QuantumChannel) -> Result<DivergenceValue> {
        self.with_optimizer(OptimizerConfig::default()).eval(m, n)
    }

    fn on_states(&self, rho: &QuantumState, sigma: &QuantumState) -> Result<DivergenceValue> {
        self.with_optimizer(OptimizerConfig::default()).on_states(rho, sigma)
    }

    fn lower_bound(&self) -> bool {
        self.with_optimizer(OptimizerConfig::default()).lower_bound()
    }

    fn classical(&self) -> bool {
        self.with_optimizer(OptimizerConfig::default()).classical()
    }

    fn relative_entropy(&self) -> bool {
        self.with_optimizer(OptimizerConfig::default()).relative_entropy()
    }

    fn faithful(&self) -> bool {
        self.with_optimizer(OptimizerConfig::default()).faithful()
    }

    fn additivity(&self) -> Additivity {
        self.with_optimizer(OptimizerConfig::default()).additivity()
    }
}

/// A slack together with whether every value entering it was exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slack {
    pub value: f64,
    pub exact: bool,
}

impl Slack {
    fn new(value: f64, parts: &[DivergenceValue]) -> Self {
        Self {
            value,
            exact: parts.iter().all(|v| v.exact),
        }
    }
}

/// `lhs - rhs` for a claim `lhs ≤ rhs`: `-∞` when `rhs` is infinite, since the
/// claim then holds trivially.
fn excess(lhs: f64, rhs: f64) -> f64 {
    if rhs == f64::INFINITY {
        f64::NEG_INFINITY
    } else if lhs == f64::INFINITY {
        f64::INFINITY
    } else {
        lhs - rhs
    }
}

/// `D(Θ[M] ‖ Θ[N]) - D(M ‖ N)`.
pub fn check_dpi(div: &dyn ChannelDivergence, m: &QuantumChannel, n: &QuantumChannel, theta: &Superchannel) -> Result<Slack> {
    let before = div.eval(m, n)?;
    let after = div.eval(&theta.apply(m)?, &theta.apply(n)?)?;
    Ok(Slack::new(excess(after.value, before.value), &[before, after]))
}

/// `D(E p ‖ E q) - D(p ‖ q)` for a classical divergence and stochastic `E`.
pub fn check_dpi_dichotomy(div: ClassicalDivergence, d: &Dichotomy, e: &ClassicalChannel) -> Result<Slack> {
    let before = div.eval(&d.p, &d.q)?;
    let image = d.process(e)?;
    let after = div.eval(&image.p, &image.q)?;
    Ok(Slack::new(excess(after.value, before.value), &[before, after]))
}

/// A lower estimate of `D_min(M ‖ N)`: the exact value for classical
/// channels, the value on normalized Choi states otherwise.
fn dmin_lower(m: &QuantumChannel, n: &QuantumChannel) -> Result<DivergenceValue> {
    if let (Some(a), Some(b)) = (m.as_classical(), n.as_classical()) {
        return classical_channel_min_ext(CD::Dmin, &a, &b);
    }
    let k = 1.0 / m.dim_in() as f64;
    let rho = QuantumState::new(m.choi().scale_re(k))?;
    let sigma = QuantumState::new(n.choi().scale_re(k))?;
    dmin_q(&rho, &sigma)
}

/// `(D_min - D, D - D_max)`.
pub fn check_minmax_bounds(div: &dyn ChannelDivergence, m: &QuantumChannel, n: &QuantumChannel) -> Result<(Slack, Slack)> {
    let d = div.eval(m, n)?;
    let lo = dmin_lower(m, n)?;
    let hi = channel_dmax(m, n)?;
    Ok((
        Slack::new(excess(lo.value, d.value), &[lo, d]),
        Slack::new(excess(d.value, hi.value), &[d, hi]),
    ))
}

/// `D(M1⊗M2 ‖ N1⊗N2) - D(M1 ‖ N1) - D(M2 ‖ N2)`, signed.
pub fn additivity_gap(
    div: &dyn ChannelDivergence,
    m1: &QuantumChannel,
    n1: &QuantumChannel,
    m2: &QuantumChannel,
    n2: &QuantumChannel,
) -> Result<Slack> {
    let d1 = div.eval(m1, n1)?;
    let d2 = div.eval(m2, n2)?;
    let joint = div.eval(&m1.tensor(m2), &n1.tensor(n2))?;
    let sum = d1.value + d2.value;
    let v = if joint.value == sum { 0.0 } else { joint.value - sum };
    Ok(Slack::new(v, &[d1, d2, joint]))
}

/// Additivity slack in the direction the divergence guarantees: `|gap|` for
/// additive ones, `gap` for sub-additive, `-gap` for super-additive, and the
/// signed gap otherwise.
pub fn check_additivity(
    div: &dyn ChannelDivergence,
    m1: &QuantumChannel,
    n1: &QuantumChannel,
    m2: &QuantumChannel,
    n2: &QuantumChannel,
) -> Result<Slack> {
    let mut s = additivity_gap(div, m1, n1, m2, n2)?;
    s.value = match div.additivity() {
        Additivity::Additive => s.value.abs(),
        Additivity::SuperAdditive => -s.value,
        Additivity::SubAdditive | Additivity::Unknown => s.value,
    };
    Ok(s)
}

/// `D(N ‖ M) - D(N ‖ E) - D_max(E ‖ M)`.
pub fn check_triangle(div: &dyn ChannelDivergence, n: &QuantumChannel, m: &QuantumChannel, e: &QuantumChannel) -> Result<Slack> {
    let lhs = div.eval(n, m)?;
    let a = div.eval(n, e)?;
    let b = channel_dmax(e, m)?;
    Ok(Slack::new(excess(lhs.value, a.value + b.value), &[lhs, a, b]))
}

fn full_rank_min(c: &QuantumChannel, which: &'static str) -> Result<f64> {
    let l = lambda_min(c.choi())?;
    if l <= tolerances().psd {
        return Err(Error::NotFullSupport(which));
    }
    Ok(l)
}

/// `log2(1 + ‖J_N - J_E‖_∞ / (λ_min(J_E) λ_min(J_M)))`.
pub fn continuity_bound(n: &QuantumChannel, e: &QuantumChannel, m: &QuantumChannel) -> Result<f64> {
    if !n.same_shape(e) || !n.same_shape(m) {
        return Err(Error::ShapeMismatch("continuity bound needs three channels of one shape".into()));
    }
    full_rank_min(n, "N")?;
    let le = full_rank_min(e, "E")?;
    let lm = full_rank_min(m, "M")?;
    let dist = hermitian_op_norm(&(n.choi() - e.choi()))?;
    Ok((1.0 + dist / (le * lm)).log2())
}

/// `D(N ‖ M) - D(E ‖ M) - bound`, all Choi matrices full rank.
pub fn check_continuity_bound(div: &dyn ChannelDivergence, n: &QuantumChannel, e: &QuantumChannel, m: &QuantumChannel) -> Result<Slack> {
    let bound = continuity_bound(n, e, m)?;
    let a = div.eval(n, m)?;
    let b = div.eval(e, m)?;
    Ok(Slack::new(excess(a.value, b.value) - bound, &[a, b]))
}

/// `D(E_x ‖ Σ p_y E_y) + log2 p_x` for each `x`, after checking that the
/// channels have pairwise orthogonal Choi matrices.
pub fn orthogonal_mixture_deviations(
    div: &dyn ChannelDivergence,
    channels: &[QuantumChannel],
    p: &ProbVector,
) -> Result<Vec<Slack>> {
    if channels.is_empty() {
        return Err(Error::EmptyList);
    }
    if channels.len() != p.dim() {
        return Err(Error::DimensionMismatch(format!("{} channels, {} weights", channels.len(), p.dim())));
    }
    let first = &channels[0];
    if channels.iter().any(|c| !c.same_shape(first)) {
        return Err(Error::ShapeMismatch("orthogonal family has mixed shapes".into()));
    }
    let tol = tolerances();
    for j in 0..channels.len() {
        for k in j + 1..channels.len() {
            let overlap = channels[j].choi().trace_product(channels[k].choi()).re;
            if overlap.abs() > tol.eq {
                return Err(Error::NotOrthogonal(overlap));
            }
        }
    }
    let mut choi = ComplexMatrix::zeros(first.choi().rows(), first.choi().cols());
    for (c, &w) in channels.iter().zip(p.weights()) {
        choi = &choi + &c.choi().scale_re(w);
    }
    let mix = QuantumChannel::from_choi(first.dim_in(), first.dim_out(), choi)?;
    channels
        .iter()
        .zip(p.weights())
        .map(|(c, &w)| {
            let d = div.eval(c, &mix)?;
            let target = -w.log2();
            let v = if d.value == target { 0.0 } else { d.value - target };
            Ok(Slack::new(v, &[d]))
        })
        .collect()
}

/// Worst `|D(E_x ‖ Σ p_y E_y) + log2 p_x|` over `x`.
pub fn check_orthogonal_mixture(div: &dyn ChannelDivergence, channels: &[QuantumChannel], p: &ProbVector) -> Result<Slack> {
    let devs = orthogonal_mixture_deviations(div, channels, p)?;
    Ok(Slack {
        value: devs.iter().map(|s| s.value.abs()).fold(0.0, f64::max),
        exact: devs.iter().all(|s| s.exact),
    })
}

/// `D(R_ρ ‖ R_σ) - D(ρ ‖ σ)` for replacement channels with input dimension `dim_in`.
pub fn check_replacement(div: &dyn ChannelDivergence, rho: &QuantumState, sigma: &QuantumState, dim_in: usize) -> Result<Slack> {
    let c = div.eval(&make_replacement(rho, dim_in), &make_replacement(sigma, dim_in))?;
    let s = div.on_states(rho, sigma)?;
    let v = if c.value == s.value { 0.0 } else { c.value - s.value };
    Ok(Slack::new(v, &[c, s]))
}

/// `D(V ‖ R) - log2(|A||B|)` for an isometry channel `V` and the completely
/// randomizing channel `R`.
pub fn check_isometry_randomizing(div: &dyn ChannelDivergence, v: &QuantumChannel) -> Result<Slack> {
    let r = completely_randomizing(v.dim_in(), v.dim_out());
    let d = div.eval(v, &r)?;
    Ok(Slack::new(d.value - ((v.dim_in() * v.dim_out()) as f64).log2(), &[d]))
}

/// `max|J_M - J_N| - FAITHFUL_DISTANCE` when `D(M ‖ N) ≤ FAITHFUL_ZERO`,
/// else `-∞`.
pub fn check_faithfulness(div: &dyn ChannelDivergence, m: &QuantumChannel, n: &QuantumChannel) -> Result<Slack> {
    let d = div.eval(m, n)?;
    let v = if d.value <= FAITHFUL_ZERO {
        m.choi().max_abs_diff(n.choi()) - FAITHFUL_DISTANCE
    } else {
        f64::NEG_INFINITY
    };
    Ok(Slack::new(v, &[d]))
}

/// The properties the suite knows how to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckKind {
    Dpi,
    DpiDichotomy,
    MinBound,
    MaxBound,
    Additivity,
    Triangle,
    Continuity,
    OrthogonalMixture,
    Replacement,
    IsometryRandomizing,
    Faithfulness,
}

impl CheckKind {
    pub const ALL: [CheckKind; 11] = [
        Self::Dpi,
        Self::DpiDichotomy,
        Self::MinBound,
        Self::MaxBound,
        Self::Additivity,
        Self::Triangle,
        Self::Continuity,
        Self::OrthogonalMixture,
        Self::Replacement,
        Self::IsometryRandomizing,
        Self::Faithfulness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dpi => "dpi",
            Self::DpiDichotomy => "dpi-dichotomy",
            Self::MinBound => "min-bound",
            Self::MaxBound => "max-bound",
            Self::Additivity => "additivity",
            Self::Triangle => "triangle",
            Self::Continuity => "continuity",
            Self::OrthogonalMixture => "orthogonal-mixture",
            Self::Replacement => "replacement",
            Self::IsometryRandomizing => "isometry-randomizing",
            Self::Faithfulness => "faithfulness",
        }
    }

    /// Seed stream of this check; the FNV-1a hash of its name.
    pub fn stream(self) -> u64 {
        self.name()
            .bytes()
            .fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
    }

    /// The tolerance for exact values.
    fn exact_tol(self) -> f64 {
        match self {
            Self::Additivity | Self::OrthogonalMixture | Self::Replacement | Self::IsometryRandomizing => EQUALITY_TOL,
            _ => INEQUALITY_TOL,
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether `kind` applies to `div`, and if so whether it is soft.
///
/// For optimizer-backed divergences only the directions their lower-bound
/// nature guarantees are hard; those checks use signed slacks.
pub fn plan(div: &dyn ChannelDivergence, kind: CheckKind) -> Option<bool> {
    let re = div.relative_entropy();
    let additive = div.additivity() == Additivity::Additive;
    if div.lower_bound() {
        return match kind {
            CheckKind::Dpi => Some(true),
            CheckKind::MinBound if re => Some(true),
            CheckKind::MaxBound | CheckKind::OrthogonalMixture | CheckKind::IsometryRandomizing if re => Some(false),
            CheckKind::Replacement => Some(false),
            _ => None,
        };
    }
    let applies = match kind {
        CheckKind::Dpi | CheckKind::Replacement => true,
        CheckKind::Faithfulness => div.faithful(),
        CheckKind::DpiDichotomy => div.classical(),
        CheckKind::MinBound | CheckKind::MaxBound | CheckKind::OrthogonalMixture => re,
        CheckKind::Additivity => div.additivity() != Additivity::Unknown,
        CheckKind::Triangle | CheckKind::Continuity => re && additive,
        CheckKind::IsometryRandomizing => re && !div.classical(),
    };
    applies.then_some(false)
}

/// One aggregated check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckReport {
    /// `<check>/<divergence>`.
    pub check_name: String,
    pub instances: usize,
    pub failures: usize,
    /// Largest slack seen; `-inf` when every instance held trivially.
    #[serde(with = "crate::io::real")]
    pub worst_slack: f64,
    /// Tolerance applied to exact instances; inexact ones use `1e-4`.
    #[serde(with = "crate::io::real")]
    pub tolerance: f64,
    /// Seeds of failing instances, in instance order.
    pub seeds: Vec<u64>,
    pub soft: bool,
}

impl CheckReport {
    /// Counts as a failure of the run.
    pub fn hard_failure(&self) -> bool {
        !self.soft && self.failures > 0
    }
}

/// Which divergences to check and on how many instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub divergences: Vec<DivergenceTag>,
    /// Instances per check for exact divergences.
    pub instances: usize,
    /// Instances per check for optimizer-backed divergences.
    pub optimizer_instances: usize,
    /// `(|A|, |B|)` shapes for quantum instances, used round robin.
    pub quantum_dims: Vec<(usize, usize)>,
    /// `(|X|, |Y|)` shapes for classical instances, used round robin.
    pub classical_dims: Vec<(usize, usize)>,
    /// Haar restarts of the optimizers.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        use DivergenceTag::*;
        Self {
            divergences: vec![
                ChannelDmax,
                Geometric(0.5),
                Geometric(1.0),
                Geometric(1.5),
                Geometric(2.0),
                MinExt(CD::Kl),
                MinExt(CD::Renyi(0.5)),
                MinExt(CD::Renyi(2.0)),
                MinExt(CD::Dmin),
                MinExt(CD::Hyptest(0.1)),
                MaxExt(CD::Kl),
                ChannelUmegaki,
                ChannelHyptest(0.1),
                AmortizedLb,
            ],
            instances: 200,
            optimizer_instances: 8,
            quantum_dims: vec![(2, 2), (2, 3)],
            classical_dims: vec![(2, 3), (3, 3), (3, 2)],
            restarts: 2,
            seed: 0,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadConfig(msg));
        for t in &self.divergences {
            t.validate().map_err(|e| Error::BadConfig(format!("{t}: {e}")))?;
        }
        for (what, dims) in [("quantum_dims", &self.quantum_dims), ("classical_dims", &self.classical_dims)] {
            if dims.is_empty() {
                return bad(format!("{what} is empty"));
            }
            if dims.iter().any(|&(a, b)| a == 0 || b == 0 || a > 8 || b > 8) {
                return bad(format!("{what} entries must lie in 1..=8, got {dims:?}"));
            }
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        Ok(())
    }
}

fn channel<R: Rng + ?Sized>(rng: &mut R, classical: bool, a: usize, b: usize) -> QuantumChannel {
    if classical {
        QuantumChannel::from_classical(&random_stochastic(rng, a, b))
    } else {
        random_channel(rng, a, b)
    }
}

fn superchannel<R: Rng + ?Sized>(rng: &mut R, classical: bool, shape: (usize, usize), small: bool) -> Superchannel {
    let top = if small { 2 } else { 3 };
    let out = (rng.random_range(1..=top), rng.random_range(1..=top));
    let r = rng.random_range(1..=2);
    if classical {
        random_classical_superchannel(rng, shape, out, r)
    } else {
        random_superchannel(rng, shape, out, r)
    }
}

fn state<R: Rng + ?Sized>(rng: &mut R, classical: bool, d: usize) -> QuantumState {
    if classical {
        QuantumState::diagonal(&random_prob_vector(rng, d))
    } else {
        random_mixed_state(rng, d)
    }
}

/// `|A| → k·|B|` channels with output supports in disjoint blocks.
fn orthogonal_family<R: Rng + ?Sized>(rng: &mut R, classical: bool, a: usize, b: usize, k: usize) -> Result<Vec<QuantumChannel>> {
    (0..k)
        .map(|x| {
            if classical {
                let base = random_stochastic(rng, a, b);
                let rows = (0..k * b)
                    .map(|y| (0..a).map(|i| if y / b == x { base.entry(y % b, i) } else { 0.0 }).collect())
                    .collect();
                Ok(QuantumChannel::from_classical(&ClassicalChannel::new(rows)?))
            } else {
                let embed = ComplexMatrix::from_fn(k * b, b, |r, c| {
                    if r == x * b + c {
                        crate::linalg::C64::new(1.0, 0.0)
                    } else {
                        crate::linalg::C64::new(0.0, 0.0)
                    }
                });
                random_channel(rng, a, b).then(&make_isometry_channel(&embed)?)
            }
        })
        .collect()
}

fn pick<T: Copy>(xs: &[T], i: u64) -> T {
    xs[(i % xs.len() as u64) as usize]
}

/// Draws the instance for `(kind, seed)` and returns its slack. `index`
/// picks the shape round robin.
pub fn run_instance(
    div: &dyn ChannelDivergence,
    kind: CheckKind,
    config: &SuiteConfig,
    index: u64,
    seed: u64,
) -> Result<Slack> {
    let mut rng: SeededRng = rng_from_seed(seed);
    let rng = &mut rng;
    let classical = div.classical();
    let (a, b) = if classical {
        pick(&config.classical_dims, index)
    } else {
        pick(&config.quantum_dims, index)
    };
    let small = div.lower_bound();
    match kind {
        CheckKind::Dpi => {
            let (m, n) = (channel(rng, classical, a, b), channel(rng, classical, a, b));
            let theta = superchannel(rng, classical, (a, b), small);
            check_dpi(div, &m, &n, &theta)
        }
        CheckKind::DpiDichotomy => {
            let d = Dichotomy::new(random_prob_vector(rng, b), random_prob_vector(rng, b))?;
            let e = random_stochastic(rng, b, a.max(2));
            let base = match div.name().split_once(':') {
                Some((_, c)) => c.parse()?,
                None => return Err(Error::Invalid("dichotomy check needs a classical divergence".into())),
            };
            check_dpi_dichotomy(base, &d, &e)
        }
        CheckKind::MinBound | CheckKind::MaxBound => {
            let (m, n) = (channel(rng, classical, a, b), channel(rng, classical, a, b));
            let (lo, hi) = check_minmax_bounds(div, &m, &n)?;
            Ok(if kind == CheckKind::MinBound { lo } else { hi })
        }
        CheckKind::Additivity => {
            let (a2, b2) = (2, 2);
            let (m1, n1) = (channel(rng, classical, a, b), channel(rng, classical, a, b));
            let (m2, n2) = (channel(rng, classical, a2, b2), channel(rng, classical, a2, b2));
            check_additivity(div, &m1, &n1, &m2, &n2)
        }
        CheckKind::Triangle => {
            let (n, m) = (channel(rng, classical, a, b), channel(rng, classical, a, b));
            let other = if rng.random_bool(0.5) { n.clone() } else { channel(rng, classical, a, b) };
            let e = m.mix(&other, rng.random_range(0.0..1.0))?;
            check_triangle(div, &n, &m, &e)
        }
        CheckKind::Continuity => {
            let (n, m) = (channel(rng, classical, a, b), channel(rng, classical, a, b));
            let t = 10f64.powf(rng.random_range(-4.0..0.0));
            let e = n.mix(&channel(rng, classical, a, b), t)?;
            check_continuity_bound(div, &n, &e, &m)
        }
        CheckKind::OrthogonalMixture => {
            let k = rng.random_range(2..=3);
            let family = orthogonal_family(rng, classical, a, if classical { b } else { 2 }, k)?;
            let p = if rng.random_bool(0.1) {
                ProbVector::delta(k, 0)
            } else {
                random_prob_vector(rng, k)
            };
            if small {
                let devs = orthogonal_mixture_deviations(div, &family, &p)?;
                let worst = devs.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
                Ok(Slack { value: worst, exact: false })
            } else {
                check_orthogonal_mixture(div, &family, &p)
            }
        }
        CheckKind::Replacement => {
            let (rho, sigma) = (state(rng, classical, b), state(rng, classical, b));
            let s = check_replacement(div, &rho, &sigma, a)?;
            Ok(if small { s } else { Slack { value: s.value.abs(), ..s } })
        }
        CheckKind::IsometryRandomizing => {
            let v = make_isometry_channel(&haar_isometry(rng, a, a.max(b)))?;
            let s = check_isometry_randomizing(div, &v)?;
            Ok(if small { s } else { Slack { value: s.value.abs(), ..s } })
        }
        CheckKind::Faithfulness => {
            let (m, n) = (channel(rng, classical, a, b), channel(rng, classical, a, b));
            let t = [0.0, 1e-12, 1e-7, 1e-3][(index % 4) as usize];
            check_faithfulness(div, &m, &m.mix(&n, t)?)
        }
    }
}

/// Runs one check over `instances` seeds and aggregates the outcome.
pub fn run_check(div: &dyn ChannelDivergence, kind: CheckKind, soft: bool, config: &SuiteConfig, instances: usize) -> CheckReport {
    let stream = kind.stream();
    let outcomes: Vec<(u64, f64, bool)> = (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.seed, stream, i);
            match run_instance(div, kind, config, i, seed) {
                Ok(s) => (seed, s.value, s.exact),
                Err(_) => (seed, f64::INFINITY, true),
            }
        })
        .collect();
    let tolerance = kind.exact_tol();
    let mut report = CheckReport {
        check_name: format!("{kind}/{}", div.name()),
        instances,
        failures: 0,
        worst_slack: f64::NEG_INFINITY,
        tolerance,
        seeds: Vec::new(),
        soft,
    };
    for (seed, slack, exact) in outcomes {
        let tol = if exact { tolerance } else { OPTIMIZER_TOL };
        if slack.is_nan() || slack > tol {
            report.failures += 1;
            report.seeds.push(seed);
        }
        if slack > report.worst_slack || slack.is_nan() {
            report.worst_slack = slack;
        }
    }
    report
}

/// Runs every applicable check for the given divergences.
pub fn run_suite_with(config: &SuiteConfig, divs: &[&dyn ChannelDivergence]) -> Result<Vec<CheckReport>> {
    config.validate()?;
    let mut reports = Vec::new();
    for &div in divs {
        let count = if div.lower_bound() {
            config.optimizer_instances
        } else {
            config.instances
        };
        if count == 0 {
            continue;
        }
        for kind in CheckKind::ALL {
            if let Some(soft) = plan(div, kind) {
                reports.push(run_check(div, kind, soft, config, count));
            }
        }
    }
    Ok(reports)
}

/// Runs the suite for the divergences named in `config`. Optimizers get
/// `config.restarts` restarts and a seed derived from `config.seed`.
pub fn run_suite(config: &SuiteConfig) -> Result<Vec<CheckReport>> {
    config.validate()?;
    let optimizer = OptimizerConfig {
        restarts: config.restarts,
        seed: derive_seed(config.seed, 0x6f7074, 0),
        ..OptimizerConfig::default()
    };
    let divs: Vec<Configured> = config.divergences.iter().map(|t| t.with_optimizer(optimizer)).collect();
    let refs: Vec<&dyn ChannelDivergence> = divs.iter().map(|d| d as &dyn ChannelDivergence).collect();
    run_suite_with(config, &refs)
}

/// Whether any hard check failed.
pub fn has_hard_failure(reports: &[CheckReport]) -> bool {
    reports.iter().any(CheckReport::hard_failure)
}
