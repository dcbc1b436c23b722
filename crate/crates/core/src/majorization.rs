//! Lorenz curves, relative majorization and joins of dichotomies.
//!
//! The lower Lorenz curve of `(p, q)` is the convex polygon through the
//! cumulative sums `(Σ p, Σ q)` taken in order of decreasing `p_x / q_x`.
//! `(p, q) ≻ (p', q')` exactly when the curve of `(p, q)` lies nowhere above
//! the curve of `(p', q')`.

use crate::channels::{ClassicalChannel, ProbVector};
use crate::classical::{ratio_order, ClassicalDivergence};
use crate::error::{Error, Result};
use crate::linalg::tolerances;
use crate::value::DivergenceValue;

/// Cross-product threshold below which three hull points count as collinear.
const COLLINEAR_TOL: f64 = 1e-13;

/// An ordered pair of distributions on the same alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Dichotomy {
    pub p: ProbVector,
    pub q: ProbVector,
}

impl Dichotomy {
    pub fn new(p: ProbVector, q: ProbVector) -> Result<Self> {
        if p.dim() != q.dim() {
            return Err(Error::DimensionMismatch(format!(
                "dichotomy components of length {} and {}",
                p.dim(),
                q.dim()
            )));
        }
        Ok(Self { p, q })
    }

    /// Validating constructor from raw weights.
    pub fn from_weights(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        Self::new(ProbVector::new(p)?, ProbVector::new(q)?)
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    pub fn lorenz(&self) -> LorenzCurve {
        lorenz_curve(self)
    }

    /// `(Ep, Eq)`.
    pub fn process(&self, e: &ClassicalChannel) -> Result<Self> {
        Self::new(e.apply(&self.p)?, e.apply(&self.q)?)
    }
}

/// Vertices of a lower Lorenz curve, from `(0, 0)` to `(1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzCurve {
    vertices: Vec<(f64, f64)>,
}

impl LorenzCurve {
    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// The curve as a function of the abscissa. On a vertical segment at
    /// `a = 1` the lowest point is returned.
    pub fn evaluate(&self, a: f64) -> f64 {
        let v = &self.vertices;
        if a <= 0.0 {
            return 0.0;
        }
        for w in v.windows(2) {
            let ((a0, b0), (a1, b1)) = (w[0], w[1]);
            if a1 > a0 && a <= a1 {
                return b0 + (b1 - b0) * ((a - a0) / (a1 - a0)).max(0.0);
            }
        }
        // a at or beyond the last abscissa: bottom of the final vertical run
        let last_a = v.last().map_or(1.0, |x| x.0);
        v.iter().find(|x| x.0 >= last_a).map_or(1.0, |x| x.1)
    }

    /// Segment slopes `Δb / Δa`, with `+∞` for vertical segments.
    pub fn slopes(&self) -> Vec<f64> {
        self.vertices
            .windows(2)
            .map(|w| {
                let (da, db) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                if da > 0.0 {
                    db / da
                } else if db > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Whether slopes are nondecreasing up to `tol`.
    pub fn is_convex(&self, tol: f64) -> bool {
        let s = self.slopes();
        s.windows(2).all(|w| w[1] >= w[0] - tol)
    }

    /// `a,b` per line, no header.
    pub fn to_csv(&self) -> String {
        self.vertices.iter().map(|(a, b)| format!("{a},{b}\n")).collect()
    }
}

/// Cumulative sums in descending-ratio order. Collinear vertices are kept.
pub fn lorenz_curve(d: &Dichotomy) -> LorenzCurve {
    let (p, q) = (d.p.weights(), d.q.weights());
    let order = ratio_order(p, q);
    let last_p = order.iter().rposition(|&i| p[i] > 0.0);
    let mut vertices = Vec::with_capacity(order.len() + 1);
    vertices.push((0.0, 0.0));
    let (mut a, mut b) = (0.0, 0.0);
    for (k, &i) in order.iter().enumerate() {
        a += p[i];
        b += q[i];
        if last_p.is_some_and(|l| k >= l) {
            a = 1.0;
        }
        vertices.push((a, b));
    }
    if let Some(v) = vertices.last_mut() {
        *v = (1.0, 1.0);
    }
    LorenzCurve { vertices }
}

fn abscissas(curves: &[&LorenzCurve]) -> Vec<f64> {
    let mut xs: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.vertices.iter().map(|v| v.0))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// `d ≻ d'`: the curve of `d` is nowhere above the curve of `d'` (within
/// `tol.eq`), checked on the union of both vertex sets.
pub fn relatively_majorizes(d: &Dichotomy, d_prime: &Dichotomy) -> bool {
    curve_below(&lorenz_curve(d), &lorenz_curve(d_prime), tolerances().eq)
}

/// Whether `lower` lies nowhere above `upper` up to `tol`.
pub fn curve_below(lower: &LorenzCurve, upper: &LorenzCurve, tol: f64) -> bool {
    abscissas(&[lower, upper])
        .into_iter()
        .all(|a| lower.evaluate(a) <= upper.evaluate(a) + tol)
}

/// `(r, u)` with `r = ⊕_x p_x u^{(n_x)}` and `u` uniform on `n = Σ n_x`
/// points, for `q = (n_1/n, ..., n_k/n)` given by its numerators.
pub fn rational_flatten(p: &ProbVector, numerators: &[u64]) -> Result<Dichotomy> {
    if numerators.len() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} numerators for a vector of length {}",
            numerators.len(),
            p.dim()
        )));
    }
    if let Some(i) = numerators.iter().position(|&n| n == 0) {
        return Err(Error::ZeroDenominator(i));
    }
    let n: u64 = numerators.iter().sum();
    let r: Vec<f64> = p
        .weights()
        .iter()
        .zip(numerators)
        .flat_map(|(&px, &nx)| std::iter::repeat_n(px / nx as f64, nx as usize))
        .collect();
    Dichotomy::new(ProbVector::new_unchecked(r), ProbVector::uniform(n as usize))
}

/// Numerators of `q` over the smallest common denominator `<= max_den`.
pub fn rational_numerators(q: &ProbVector, max_den: u64) -> Result<Vec<u64>> {
    let tol = tolerances().eq;
    for n in 1..=max_den {
        let nums: Vec<f64> = q.weights().iter().map(|&x| (x * n as f64).round()).collect();
        let fits = q
            .weights()
            .iter()
            .zip(&nums)
            .all(|(&x, &k)| (x - k / n as f64).abs() <= tol);
        if fits && nums.iter().sum::<f64>() == n as f64 {
            return Ok(nums.into_iter().map(|k| k as u64).collect());
        }
    }
    Err(Error::NotRational(max_den))
}

/// Least upper bound in the majorization order of a list of probability
/// vectors, returned sorted in decreasing order.
///
/// `Ω_k` is the largest `k`-th partial sum of the decreasingly sorted inputs;
/// the result is the increments of the least concave majorant of `Ω`. When
/// `Ω` is itself concave these are just `Ω_k - Ω_{k-1}`.
pub fn majorization_join(rs: &[ProbVector]) -> Result<ProbVector> {
    let d = rs.first().ok_or(Error::EmptyList)?.dim();
    if rs.iter().any(|r| r.dim() != d) {
        return Err(Error::DimensionMismatch("vectors of unequal length".into()));
    }
    let mut omega = vec![0.0; d + 1];
    for r in rs {
        let mut s = r.weights().to_vec();
        s.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        for (k, x) in s.into_iter().enumerate() {
            acc += x;
            omega[k + 1] = f64::max(omega[k + 1], acc);
        }
    }
    let pts: Vec<(f64, f64)> = omega.iter().enumerate().map(|(k, &w)| (k as f64, w)).collect();
    let hull = upper_hull(&pts);
    let mut out = Vec::with_capacity(d);
    for w in hull.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        let steps = (x1 - x0).round() as usize;
        out.extend(std::iter::repeat_n((y1 - y0) / steps as f64, steps));
    }
    Ok(ProbVector::new_unchecked(out))
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Lower convex hull of points sorted by abscissa; collinear points dropped.
fn lower_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut h: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in pts {
        while h.len() >= 2 && cross(h[h.len() - 2], h[h.len() - 1], p) <= COLLINEAR_TOL {
            h.pop();
        }
        h.push(p);
    }
    h
}

fn upper_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let flipped: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x, -y)).collect();
    lower_hull(&flipped).into_iter().map(|(x, y)| (x, -y)).collect()
}

/// Least upper bound of dichotomies in the relative majorization order.
///
/// Takes the pointwise minimum of the input Lorenz curves and returns the
/// dichotomy whose curve is its greatest convex minorant. Collinear vertices
/// are merged; `q`-mass at ratio zero becomes a final atom `(0, q)`.
pub fn dichotomy_join(ds: &[Dichotomy]) -> Result<Dichotomy> {
    if ds.is_empty() {
        return Err(Error::EmptyList);
    }
    let curves: Vec<LorenzCurve> = ds.iter().map(lorenz_curve).collect();
    let refs: Vec<&LorenzCurve> = curves.iter().collect();
    let pts: Vec<(f64, f64)> = abscissas(&refs)
        .into_iter()
        .map(|a| (a, curves.iter().map(|c| c.evaluate(a)).fold(f64::INFINITY, f64::min)))
        .collect();
    let hull = lower_hull(&pts);
    let (mut p, mut q) = (Vec::new(), Vec::new());
    for w in hull.windows(2) {
        p.push(w[1].0 - w[0].0);
        q.push(w[1].1 - w[0].1);
    }
    let tail = 1.0 - hull.last().map_or(0.0, |v| v.1);
    if tail > 0.0 {
        p.push(0.0);
        q.push(tail);
    }
    Dichotomy::new(ProbVector::new_unchecked(p), ProbVector::new_unchecked(q))
}

/// Level-by-level greedy vertex selection: the first vertex of the join is
/// the level-1 vertex of smallest slope from the origin, and each later
/// vertex is the level-`z` vertex of smallest slope from the previous one.
///
/// Returns `None` when some slope denominator is not positive. Agrees with
/// [`dichotomy_join`] on many inputs but is not guaranteed to produce an
/// upper bound of every input.
pub fn dichotomy_join_greedy(ds: &[Dichotomy]) -> Option<Dichotomy> {
    let n = ds.first()?.dim();
    if ds.iter().any(|d| d.dim() != n) {
        return None;
    }
    let levels: Vec<Vec<(f64, f64)>> = ds
        .iter()
        .map(|d| {
            let (p, q) = (d.p.weights(), d.q.weights());
            let mut order = ratio_order(p, q);
            order.extend((0..n).filter(|&i| p[i] == 0.0 && q[i] == 0.0));
            let (mut a, mut b) = (0.0, 0.0);
            order
                .into_iter()
                .map(|i| {
                    a += p[i];
                    b += q[i];
                    (a, b)
                })
                .collect()
        })
        .collect();
    let mut prev = (0.0, 0.0);
    let (mut p, mut q) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for z in 0..n {
        let mut best: Option<((f64, f64), f64)> = None;
        for curve in &levels {
            let v = curve[z];
            let da = v.0 - prev.0;
            if da <= 0.0 {
                return None;
            }
            let s = (v.1 - prev.1) / da;
            if best.is_none_or(|(_, bs)| s < bs) {
                best = Some((v, s));
            }
        }
        let (v, _) = best?;
        p.push(v.0 - prev.0);
        q.push(v.1 - prev.1);
        prev = v;
    }
    Dichotomy::new(ProbVector::new_unchecked(p), ProbVector::new_unchecked(q)).ok()
}

fn column_dichotomies(m: &ClassicalChannel, n: &ClassicalChannel) -> Result<Vec<Dichotomy>> {
    if !m.same_shape(n) {
        return Err(Error::DimensionMismatch(format!(
            "channels {}->{} and {}->{}",
            m.dim_in(),
            m.dim_out(),
            n.dim_in(),
            n.dim_out()
        )));
    }
    (0..m.dim_in())
        .map(|x| Dichotomy::new(m.column(x), n.column(x)))
        .collect()
}

/// Smallest channel extension: `max_x D(m_x ‖ n_x)` over input letters.
pub fn classical_channel_min_ext(
    div: ClassicalDivergence,
    m: &ClassicalChannel,
    n: &ClassicalChannel,
) -> Result<DivergenceValue> {
    let mut best = DivergenceValue::exact(f64::NEG_INFINITY);
    for d in column_dichotomies(m, n)? {
        let v = div.eval(&d.p, &d.q)?;
        if v.value > best.value {
            best = v;
        }
    }
    Ok(best)
}

/// Largest channel extension: `D` evaluated on the join of the column
/// dichotomies.
pub fn classical_channel_max_ext(
    div: ClassicalDivergence,
    m: &ClassicalChannel,
    n: &ClassicalChannel,
) -> Result<DivergenceValue> {
    let j = dichotomy_join(&column_dichotomies(m, n)?)?;
    div.eval(&j.p, &j.q)
}
