//! Weighted matrix geometric means and the geometric Rényi quantity shared
//! by the state and channel divergences.
//!
//! For PSD `X, Y` on `A ⊗ B` the quantity is
//! `Q_α = λ_max(Tr_B G_α(X, Y))` for `α ∈ (1, 2]` and
//! `Q_α = λ_min(Tr_B G_α(X, Y))` for `α ∈ (0, 1)`, with
//! `G_α(X, Y) = Y^{1/2} (Y^{-1/2} X Y^{-1/2})^α Y^{1/2}`. States are the case
//! `|A| = 1`, where both reduce to a trace.

use crate::error::{Error, Result};
use crate::linalg::{
    eigh_unchecked, fn_on_support, lambda_max, lambda_min, partial_trace, psd_map, support_contained,
    support_projector, tolerances, ComplexMatrix, Keep, ScalarFn,
};
use crate::value::DivergenceValue;

/// Eigenvalues below this fraction of the largest one count as zero inside
/// the geometric mean.
const NOISE_REL: f64 = 1e-13;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::BadAlpha(format!("geometric order must lie in (0, 2], got {alpha}")));
    }
    Ok(())
}

/// `G_α(X, Y)` for `supp X ⊆ supp Y`, with inverses on the support of `Y`.
pub fn geometric_mean(x: &ComplexMatrix, y: &ComplexMatrix, alpha: f64) -> Result<ComplexMatrix> {
    // G_α(X, Y) = G_{1-α}(Y, X) for invertible X and Y; below order one,
    // sandwich with the better conditioned one.
    if alpha >= 1.0 {
        return sandwich(x, y, alpha);
    }
    let (ex, ey) = (eigh_unchecked(x)?, eigh_unchecked(y)?);
    if ex.min() > tolerances().psd && ey.min() > 0.0 && ex.min() / ex.max() > ey.min() / ey.max() {
        return sandwich(y, x, 1.0 - alpha);
    }
    sandwich(x, y, alpha)
}

fn sandwich(x: &ComplexMatrix, y: &ComplexMatrix, alpha: f64) -> Result<ComplexMatrix> {
    let tol = tolerances();
    let y_half = fn_on_support(y, ScalarFn::Sqrt, tol)?;
    let y_mhalf = fn_on_support(y, ScalarFn::Pow(-0.5), tol)?;
    let inner = eigh_unchecked(&x.conjugate_by(&y_mhalf).hermitian_part())?;
    // Rounding leaves eigenvalues near ε·λ_max where the exact operator has a
    // kernel; fractional powers would blow them up.
    let floor = tol.psd.max(NOISE_REL * inner.max());
    let p = inner.map(|l| if l > floor { l.powf(alpha) } else { 0.0 });
    Ok(p.conjugate_by(&y_half).hermitian_part())
}

/// `Ĝ(X, Y) = X^{1/2} log2(X^{1/2} Y^{-1} X^{1/2}) X^{1/2}`, logarithm on the support.
pub fn log_geometric_mean(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<ComplexMatrix> {
    let tol = tolerances();
    let x_half = fn_on_support(x, ScalarFn::Sqrt, tol)?;
    let y_inv = fn_on_support(y, ScalarFn::Inverse, tol)?;
    let inner = y_inv.conjugate_by(&x_half).hermitian_part();
    let l = psd_map(&inner, tol.psd, f64::log2)?;
    Ok(l.conjugate_by(&x_half).hermitian_part())
}

/// Shorted operator of `X` onto `supp Y`: `ΠXΠ - ΠXQ (QXQ)^+ QXΠ` with `Π`
/// the support projector of `Y` and `Q = I - Π`.
///
/// For `α ∈ (0, 1)`, `lim_{ε→0} G_α(X + εI, Y) = G_α([X]_Y, Y)`, and the
/// right-hand side has nested supports.
pub fn shorted_operator(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<ComplexMatrix> {
    let tol = tolerances();
    let pi = support_projector(y, tol)?;
    let q = &ComplexMatrix::identity(y.rows()) - &pi;
    let xqq = x.conjugate_by(&q).hermitian_part();
    let pinv = psd_map(&xqq, tol.psd, |l| 1.0 / l)?;
    let cross = pi.matmul(x).matmul(&q);
    let correction = pinv.conjugate_by(&cross);
    Ok((&x.conjugate_by(&pi) - &correction).hermitian_part())
}

fn reduce(g: &ComplexMatrix, dims: (usize, usize), largest: bool) -> Result<f64> {
    let t = partial_trace(g, dims, Keep::A)?.hermitian_part();
    if largest {
        lambda_max(&t)
    } else {
        lambda_min(&t)
    }
}

/// Geometric Rényi divergence of order `α ∈ (0, 2]` between PSD operators
/// on `A ⊗ B` with `dims = (|A|, |B|)`.
///
/// `α = 1` gives `λ_max(Tr_B Ĝ(X, Y))`, and `α > 1` is `+∞` unless
/// `supp X ⊆ supp Y`. For `α < 1` the value is the `ε → 0` limit of the
/// divergence of `X + εI`, evaluated exactly through [`shorted_operator`].
pub fn geometric_renyi(x: &ComplexMatrix, y: &ComplexMatrix, dims: (usize, usize), alpha: f64) -> Result<DivergenceValue> {
    check_alpha(alpha)?;
    let tol = tolerances();
    if alpha < 1.0 {
        let xs = shorted_operator(x, y)?;
        let q = reduce(&geometric_mean(&xs, y, alpha)?, dims, false)?;
        let q = if q <= tol.psd { 0.0 } else { q };
        return Ok(DivergenceValue::from_renyi_sum(q, alpha, true));
    }
    if !support_contained(x, y, tol)? {
        return Ok(DivergenceValue::infinite());
    }
    if alpha == 1.0 {
        let g = log_geometric_mean(x, y)?;
        return Ok(DivergenceValue::exact(reduce(&g, dims, true)?));
    }
    let q = reduce(&geometric_mean(x, y, alpha)?, dims, true)?;
    Ok(DivergenceValue::from_renyi_sum(q, alpha, true))
}

/// `log2 λ_max(Y^{-1/2} X Y^{-1/2})` if `supp X ⊆ supp Y`, else `+∞`.
pub(crate) fn max_divergence(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<DivergenceValue> {
    let tol = tolerances();
    if !support_contained(x, y, tol)? {
        return Ok(DivergenceValue::infinite());
    }
    let y_mhalf = fn_on_support(y, ScalarFn::Pow(-0.5), tol)?;
    let l = eigh_unchecked(&x.conjugate_by(&y_mhalf).hermitian_part())?.max();
    Ok(DivergenceValue::exact(l.log2()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn commuting_reduces_to_classical() {
        let p = [0.5, 0.3, 0.2];
        let q = [0.2, 0.2, 0.6];
        let (x, y) = (ComplexMatrix::diag(&p), ComplexMatrix::diag(&q));
        for alpha in [0.3, 0.5, 1.5, 2.0] {
            let g = geometric_renyi(&x, &y, (1, 3), alpha).unwrap().value;
            let s: f64 = p.iter().zip(&q).map(|(a, b)| a.powf(alpha) * b.powf(1.0 - alpha)).sum();
            assert!((g - s.log2() / (alpha - 1.0)).abs() < 1e-12);
        }
        let g1 = geometric_renyi(&x, &y, (1, 3), 1.0).unwrap().value;
        let kl: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).log2()).sum();
        assert!((g1 - kl).abs() < 1e-12);
    }

    #[test]
    fn support_violation_keeps_the_common_support() {
        let p = [0.5, 0.3, 0.2];
        let q = [0.0, 0.4, 0.6];
        let (x, y) = (ComplexMatrix::diag(&p), ComplexMatrix::diag(&q));
        for alpha in [0.25, 0.5, 0.75] {
            let g = geometric_renyi(&x, &y, (1, 3), alpha).unwrap();
            assert!(g.exact);
            let s: f64 = p[1..].iter().zip(&q[1..]).map(|(a, b)| a.powf(alpha) * b.powf(1.0 - alpha)).sum();
            assert!((g.value - s.log2() / (alpha - 1.0)).abs() < 1e-12);
        }
        let disjoint = geometric_renyi(&ComplexMatrix::diag(&[1.0, 0.0]), &ComplexMatrix::diag(&[0.0, 1.0]), (1, 2), 0.5).unwrap();
        assert!(disjoint.is_infinite());
    }

    #[test]
    fn shorted_operator_two_by_two() {
        // [A]_{e1} = a - b^2/d, and A #_t diag(1, 0) = ((A^{-1})_{11})^{t-1} e1 e1†.
        let (a, b, d) = (2.0, 0.7, 1.5);
        let x = ComplexMatrix::from_real_rows(&[vec![a, b], vec![b, d]]).unwrap();
        let y = ComplexMatrix::diag(&[1.0, 0.0]);
        let s = shorted_operator(&x, &y).unwrap();
        assert!((s[(0, 0)].re - (a - b * b / d)).abs() < 1e-14);
        assert!(s[(1, 1)].norm() < 1e-14 && s[(0, 1)].norm() < 1e-14);
        let alpha = 0.4;
        let g = geometric_mean(&s, &y, alpha).unwrap();
        assert!((g[(0, 0)].re - (a - b * b / d).powf(alpha)).abs() < 1e-12);
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn exact_limit_matches_high_precision_regularization() {
        // Frozen from X + εI with ε = 1e-70 at 120 digits; neither support contains the other.
        let x3 = ComplexMatrix::from_real_rows(&[vec![0.3, 0.3, 0.0], vec![0.3, 0.5, 0.2], vec![0.0, 0.2, 0.2]]).unwrap();
        let mut y3 = ComplexMatrix::diag(&[0.35, 0.3, 0.35]);
        y3[(0, 2)] = c(0.0, -0.35);
        y3[(2, 0)] = c(0.0, 0.35);
        let mut x4 = ComplexMatrix::diag(&[0.4, 0.2, 0.4, 0.2]);
        x4[(0, 2)] = c(0.4, 0.0);
        x4[(2, 0)] = c(0.4, 0.0);
        x4[(1, 3)] = c(0.0, -0.2);
        x4[(3, 1)] = c(0.0, 0.2);
        let y4 = ComplexMatrix::from_real_rows(&[
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.45, 0.45, 0.0],
            vec![0.0, 0.45, 0.75, -0.3],
            vec![0.0, 0.0, -0.3, 0.3],
        ])
        .unwrap();
        let expect = [
            (0.3, 1.7053503480189224, 5.235_000_118_584_705),
            (0.5, 2.310432456049533, 7.3552355026696171),
            (0.8, 5.487_113_522_880_842, 18.486_471_269_115_41),
        ];
        for (alpha, e3, e4) in expect {
            let g3 = geometric_renyi(&x3, &y3, (1, 3), alpha).unwrap().value;
            let g4 = geometric_renyi(&x4, &y4, (2, 2), alpha).unwrap().value;
            assert!((g3 - e3).abs() < 1e-9, "{alpha}: {g3} vs {e3}");
            assert!((g4 - e4).abs() < 1e-9, "{alpha}: {g4} vs {e4}");
        }
    }

    #[test]
    fn orthogonal_supports_are_infinitely_far() {
        // Entries of order 1e-17 off the support must not leak through the fractional power.
        let mut x = ComplexMatrix::diag(&[0.0, 0.0, 0.6, 0.4]);
        let y = ComplexMatrix::diag(&[0.7, 0.3, 0.0, 0.0]);
        x[(0, 2)] = C64::new(1e-17, 0.0);
        x[(2, 0)] = C64::new(1e-17, 0.0);
        for alpha in [0.2, 0.5, 0.9] {
            assert!(geometric_renyi(&x, &y, (2, 2), alpha).unwrap().is_infinite());
        }
    }

    #[test]
    fn alpha_range() {
        let x = ComplexMatrix::identity(2);
        for a in [0.0, -1.0, 2.5, f64::NAN] {
            assert!(matches!(geometric_renyi(&x, &x, (1, 2), a), Err(Error::BadAlpha(_))));
        }
    }
}
