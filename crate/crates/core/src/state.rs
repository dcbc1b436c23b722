//! Divergences between density operators.

use crate::channels::{ProbVector, QuantumState};
use crate::classical::{check_epsilon, kl};
use crate::error::{Error, Result};
use crate::geometric::{geometric_renyi, max_divergence};
use crate::linalg::{
    eigh_unchecked, fn_on_support, hermitian_eig, support_contained, support_projector,
    tolerances, ComplexMatrix, ScalarFn, C64,
};
use crate::random::{derive_seed, haar_unitary, rng_from_seed};
use crate::value::DivergenceValue;

fn check_dims(rho: &QuantumState, sigma: &QuantumState) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "states of dimension {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    Ok(())
}

/// `Tr[ρ log2 ρ] - Tr[ρ log2 σ]`, `+∞` unless `supp ρ ⊆ supp σ`.
pub fn umegaki(rho: &QuantumState, sigma: &QuantumState) -> Result<DivergenceValue> {
    check_dims(rho, sigma)?;
    let tol = tolerances();
    if !support_contained(rho.matrix(), sigma.matrix(), tol)? {
        return Ok(DivergenceValue::infinite());
    }
    let neg_entropy: f64 = hermitian_eig(rho.matrix(), tol)?
        .values
        .iter()
        .filter(|&&l| l > tol.psd)
        .map(|&l| l * l.log2())
        .sum();
    let log_sigma = fn_on_support(sigma.matrix(), ScalarFn::Log2, tol)?;
    let cross = rho.matrix().trace_product(&log_sigma).re;
    Ok(DivergenceValue::exact(neg_entropy - cross))
}

/// `log2 min{t : tσ ≥ ρ}`.
pub fn dmax_q(rho: &QuantumState, sigma: &QuantumState) -> Result<DivergenceValue> {
    check_dims(rho, sigma)?;
    max_divergence(rho.matrix(), sigma.matrix())
}

/// `-log2 Tr[σ Π_ρ]`, `+∞` when the trace vanishes.
pub fn dmin_q(rho: &QuantumState, sigma: &QuantumState) -> Result<DivergenceValue> {
    check_dims(rho, sigma)?;
    let tol = tolerances();
    let proj = support_projector(rho.matrix(), tol)?;
    let s = sigma.matrix().trace_product(&proj).re;
    if s <= tol.psd {
        return Ok(DivergenceValue::infinite());
    }
    Ok(DivergenceValue::exact(-s.log2()))
}

/// Projector onto eigenvalues of `a` above `floor`.
fn positive_projector(a: &ComplexMatrix, floor: f64) -> Result<ComplexMatrix> {
    Ok(eigh_unchecked(a)?.map(|l| if l > floor { 1.0 } else { 0.0 }))
}

/// Neyman-Pearson test `{ρ - tσ > 0}` with its acceptance probabilities.
fn np_test(rho: &ComplexMatrix, sigma: &ComplexMatrix, t: f64, floor: f64) -> Result<(f64, f64)> {
    let p = positive_projector(&(rho - &sigma.scale_re(t)), floor)?;
    Ok((rho.trace_product(&p).re, sigma.trace_product(&p).re))
}

/// Hypothesis-testing divergence
/// `-log2 min{Tr[σE] : 0 ≤ E ≤ I, Tr[ρE] ≥ 1 - ε}`.
///
/// The optimal test is `{ρ - tσ > 0}` plus part of the kernel of `ρ - tσ`.
/// The threshold `t` is found by bisection and the two bracketing tests are
/// mixed so that `Tr[ρE] = 1 - ε` exactly.
pub fn hyptest_q(rho: &QuantumState, sigma: &QuantumState, eps: f64) -> Result<DivergenceValue> {
    check_dims(rho, sigma)?;
    check_epsilon(eps)?;
    if eps == 0.0 {
        return dmin_q(rho, sigma);
    }
    let tol = tolerances();
    let target = 1.0 - eps;
    let (r, s) = (rho.matrix(), sigma.matrix());
    let kernel = fn_on_support(s, ScalarFn::Pow(0.0), tol)?;
    let kernel = &ComplexMatrix::identity(r.rows()) - &kernel;
    if r.trace_product(&kernel).re >= target {
        return Ok(DivergenceValue::infinite());
    }
    let floor = tol.psd;
    let mut hi = 1.0;
    let mut at_hi = np_test(r, s, hi, floor)?;
    while at_hi.0 >= target {
        hi *= 2.0;
        at_hi = np_test(r, s, hi, floor)?;
        if hi > 1e300 {
            return Err(Error::NoConvergence);
        }
    }
    let mut lo = 0.0;
    let mut at_lo = np_test(r, s, lo, floor)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let at_mid = np_test(r, s, mid, floor)?;
        if at_mid.0 >= target {
            lo = mid;
            at_lo = at_mid;
        } else {
            hi = mid;
            at_hi = at_mid;
        }
    }
    // mix: λ·E_lo + (1-λ)·E_hi has ρ-mass exactly `target`
    let span = at_lo.0 - at_hi.0;
    let lambda = if span > 0.0 {
        ((target - at_hi.0) / span).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let beta = lambda * at_lo.1 + (1.0 - lambda) * at_hi.1;
    if beta <= tol.psd {
        return Ok(DivergenceValue::infinite());
    }
    Ok(DivergenceValue::exact(-beta.log2()))
}

/// Sandwiched Rényi divergence of order `α ≥ 1/2`; `α = 1` is [`umegaki`].
pub fn sandwiched_renyi(rho: &QuantumState, sigma: &QuantumState, alpha: f64) -> Result<DivergenceValue> {
    check_dims(rho, sigma)?;
    if alpha.is_nan() || alpha < 0.5 || alpha == f64::INFINITY {
        return Err(Error::BadAlpha(format!("sandwiched order must lie in [1/2, ∞), got {alpha}")));
    }
    if alpha == 1.0 {
        return umegaki(rho, sigma);
    }
    let tol = tolerances();
    if alpha > 1.0 && !support_contained(rho.matrix(), sigma.matrix(), tol)? {
        return Ok(DivergenceValue::infinite());
    }
    let s = fn_on_support(sigma.matrix(), ScalarFn::Pow((1.0 - alpha) / (2.0 * alpha)), tol)?;
    let inner = rho.matrix().conjugate_by(&s).hermitian_part();
    let q: f64 = eigh_unchecked(&inner)?
        .values
        .iter()
        .filter(|&&l| l > tol.psd)
        .map(|l| l.powf(alpha))
        .sum();
    Ok(DivergenceValue::from_renyi_sum(q, alpha, true))
}

/// Geometric Rényi divergence of order `α ∈ (0, 2]`; `α = 1` is the
/// Belavkin-Staszewski relative entropy `Tr[Ĝ(ρ, σ)]`.
pub fn geometric_renyi_state(rho: &QuantumState, sigma: &QuantumState, alpha: f64) -> Result<DivergenceValue> {
    check_dims(rho, sigma)?;
    geometric_renyi(rho.matrix(), sigma.matrix(), (1, rho.dim()), alpha)
}

fn measured_kl(rho: &ComplexMatrix, sigma: &ComplexMatrix, u: &ComplexMatrix) -> f64 {
    let n = u.rows();
    let probe = |m: &ComplexMatrix| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let v = u.col(k);
                let mv = m.apply(&v);
                v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum::<C64>().re.max(0.0)
            })
            .collect()
    };
    let normalize = |w: Vec<f64>| {
        let s: f64 = w.iter().sum();
        ProbVector::new_unchecked(w.into_iter().map(|x| x / s).collect())
    };
    kl(&normalize(probe(rho)), &normalize(probe(sigma)))
        .map(|v| v.value)
        .unwrap_or(f64::NEG_INFINITY)
}

/// Rotate columns `i, j` of `u` by angle `theta` with relative phase `phase`.
fn givens(u: &ComplexMatrix, i: usize, j: usize, theta: f64, phase: f64) -> ComplexMatrix {
    let (c, s) = (theta.cos(), theta.sin());
    let e = C64::from_polar(1.0, phase);
    let mut out = u.clone();
    for r in 0..u.rows() {
        let (a, b) = (u[(r, i)], u[(r, j)]);
        out[(r, i)] = a * c + b * e * s;
        out[(r, j)] = -a * e.conj() * s + b * c;
    }
    out
}

/// Coordinate ascent over Givens rotations, halving the step down to `1e-6`.
fn refine_basis(rho: &ComplexMatrix, sigma: &ComplexMatrix, mut u: ComplexMatrix) -> (f64, ComplexMatrix) {
    let n = u.rows();
    let mut best = measured_kl(rho, sigma, &u);
    if best == f64::INFINITY {
        return (best, u);
    }
    let mut h = 0.25;
    while h >= 1e-6 {
        let mut improved = false;
        for i in 0..n {
            for j in i + 1..n {
                for phase in [0.0, std::f64::consts::FRAC_PI_2] {
                    for step in [h, -h] {
                        let cand = givens(&u, i, j, step, phase);
                        let v = measured_kl(rho, sigma, &cand);
                        if v > best + 1e-15 {
                            best = v;
                            u = cand;
                            improved = true;
                        }
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
        if best == f64::INFINITY {
            break;
        }
    }
    (best, u)
}

/// Lower bound on the measured relative entropy: the best KL divergence of
/// projective measurement statistics over refined candidate bases.
///
/// Candidates are the eigenbases of `ρ`, `σ` and a generic combination of
/// the two, followed by `restarts` Haar-random bases derived from `seed`.
/// Adding restarts never lowers the result.
pub fn measured_lb(rho: &QuantumState, sigma: &QuantumState, restarts: usize, seed: u64) -> Result<DivergenceValue> {
    check_dims(rho, sigma)?;
    let (r, s) = (rho.matrix(), sigma.matrix());
    let mix = &r.scale_re(1.0) + &s.scale_re(std::f64::consts::PI);
    let mut bases = vec![
        eigh_unchecked(r)?.vectors,
        eigh_unchecked(s)?.vectors,
        eigh_unchecked(&mix)?.vectors,
    ];
    for k in 0..restarts {
        let mut rng = rng_from_seed(derive_seed(seed, 0x6d65_6173, k as u64));
        bases.push(haar_unitary(&mut rng, rho.dim()));
    }
    let best = bases
        .into_iter()
        .map(|u| refine_basis(r, s, u).0)
        .fold(0.0, f64::max);
    Ok(DivergenceValue::estimate(best))
}
