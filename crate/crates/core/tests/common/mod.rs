//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use dyndiv::channels::{ProbVector, QuantumChannel, QuantumState};
use dyndiv::linalg::{ComplexMatrix, C64};
use dyndiv::majorization::{lorenz_curve, Dichotomy};
use dyndiv::random::{random_prob_vector, random_stochastic, SeededRng};
use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use rand::Rng;

/// Whether some column-stochastic `E` maps `(p, q)` onto `(p2, q2)`, by
/// minimizing the total violation of `E p = p2, E q = q2`.
pub fn blackwell_lp(d: &Dichotomy, target: &Dichotomy) -> bool {
    blackwell_residual(d, target) <= 1e-9
}

pub fn blackwell_residual(d: &Dichotomy, target: &Dichotomy) -> f64 {
    let (n, m) = (d.dim(), target.dim());
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let e: Vec<Vec<_>> = (0..m)
        .map(|_| (0..n).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect())
        .collect();
    for x in 0..n {
        let col: Vec<_> = e.iter().map(|row| (row[x], 1.0)).collect();
        lp.add_constraint(&col, ComparisonOp::Eq, 1.0);
    }
    for (src, dst) in [(&d.p, &target.p), (&d.q, &target.q)] {
        for y in 0..m {
            let plus = lp.add_var(1.0, (0.0, f64::INFINITY));
            let minus = lp.add_var(1.0, (0.0, f64::INFINITY));
            let mut row: Vec<_> = (0..n).map(|x| (e[y][x], src[x])).collect();
            row.push((plus, 1.0));
            row.push((minus, -1.0));
            lp.add_constraint(&row, ComparisonOp::Eq, dst[y]);
        }
    }
    lp.solve().expect("slack LP is always feasible").objective()
}

/// Greatest convex function on the merged abscissas of all input curves
/// that lies below every curve and starts at the origin, by LP.
pub fn join_lp(ds: &[Dichotomy]) -> Vec<(f64, f64)> {
    let curves: Vec<_> = ds.iter().map(lorenz_curve).collect();
    let mut xs: Vec<f64> = curves.iter().flat_map(|c| c.vertices().iter().map(|v| v.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let g: Vec<_> = xs
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if i == 0 {
                lp.add_var(0.0, (0.0, 0.0))
            } else {
                lp.add_var(1.0, (-1.0, 1.0))
            }
        })
        .collect();
    for (i, &a) in xs.iter().enumerate() {
        for c in &curves {
            lp.add_constraint([(g[i], 1.0)], ComparisonOp::Le, c.evaluate(a));
        }
    }
    // slope(i-1, i) <= slope(i, i+1)
    for i in 1..xs.len().saturating_sub(1) {
        let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
        lp.add_constraint(
            [(g[i - 1], h1), (g[i], -(h0 + h1)), (g[i + 1], h0)],
            ComparisonOp::Ge,
            0.0,
        );
    }
    let sol = lp.solve().expect("join LP feasible");
    xs.iter().zip(&g).map(|(&a, &v)| (a, sol[v])).collect()
}

pub fn pv(w: &[f64]) -> ProbVector {
    ProbVector::new(w.to_vec()).unwrap()
}

pub fn random_dichotomy(rng: &mut SeededRng, n: usize) -> Dichotomy {
    Dichotomy::new(random_prob_vector(rng, n), random_prob_vector(rng, n)).unwrap()
}

/// A mix of related and unrelated pairs so both answers occur often.
pub fn blackwell_instance(rng: &mut SeededRng) -> (Dichotomy, Dichotomy) {
    let n = rng.random_range(2..=5);
    let m = rng.random_range(2..=5);
    let d = random_dichotomy(rng, n);
    let target = match rng.random_range(0..3) {
        0 => d.process(&random_stochastic(rng, n, m)).unwrap(),
        1 => random_dichotomy(rng, m),
        _ => {
            // processed, then pushed slightly toward more distinguishable
            let e = d.process(&random_stochastic(rng, n, m)).unwrap();
            let sharp = |v: &ProbVector| {
                let w: Vec<f64> = v.weights().iter().map(|x| x.powf(1.05)).collect();
                let s: f64 = w.iter().sum();
                ProbVector::new(w.iter().map(|x| x / s).collect()).unwrap()
            };
            Dichotomy::new(sharp(&e.p), e.q.clone()).unwrap()
        }
    };
    (d, target)
}

/// `-log2 min{q·e : p·e >= 1 - eps, 0 <= e <= 1}` by LP.
pub fn hyptest_lp(p: &ProbVector, q: &ProbVector, eps: f64) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let e: Vec<_> = q.weights().iter().map(|&qi| lp.add_var(qi, (0.0, 1.0))).collect();
    let row: Vec<_> = e.iter().zip(p.weights()).map(|(&v, &pi)| (v, pi)).collect();
    lp.add_constraint(&row, ComparisonOp::Ge, 1.0 - eps);
    let beta = lp.solve().expect("the all-ones test is feasible").objective();
    if beta <= 0.0 { f64::INFINITY } else { -beta.log2() }
}

fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.entries())
}

fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// Quantum hypothesis testing through the dual
/// `max_t t(1 - eps) - Tr(tρ - σ)_+`: log-spaced grid, then golden section.
pub fn hyptest_grid(rho: &QuantumState, sigma: &QuantumState, eps: f64) -> f64 {
    let (r, s) = (to_nalgebra(rho.matrix()), to_nalgebra(sigma.matrix()));
    let dual = |t: f64| {
        let pos: f64 = hermitian_eigenvalues(&(&r * C64::new(t, 0.0) - &s)).iter().filter(|&&l| l > 0.0).sum();
        t * (1.0 - eps) - pos
    };
    let grid: Vec<f64> = (0..=3000).map(|k| 10f64.powf(-6.0 + 14.0 * k as f64 / 3000.0)).collect();
    let best = (0..grid.len()).max_by(|&a, &b| dual(grid[a]).total_cmp(&dual(grid[b]))).unwrap();
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if dual(a) < dual(b) { lo = a } else { hi = b }
    }
    -dual(0.5 * (lo + hi)).log2()
}

/// `log2 min{t : t J_N - J_M >= 0}` by bisection on a PSD test.
pub fn dmax_bisection(m: &QuantumChannel, n: &QuantumChannel) -> f64 {
    let (jm, jn) = (to_nalgebra(m.choi()), to_nalgebra(n.choi()));
    let feasible = |t: f64| {
        let min = hermitian_eigenvalues(&(&jn * C64::new(t, 0.0) - &jm)).into_iter().fold(f64::INFINITY, f64::min);
        min >= -1e-13
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while !feasible(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) { hi = mid } else { lo = mid }
    }
    hi.log2()
}

/// `log2 Tr[J_N^{-1} J_V]` through an LU solve.
pub fn inverse_trace(v: &QuantumChannel, n: &QuantumChannel) -> f64 {
    let x = to_nalgebra(n.choi()).lu().solve(&to_nalgebra(v.choi())).expect("invertible Choi matrix");
    x.trace().re.log2()
}

/// `Σ p log2(p/q)` by direct summation.
pub fn kl_sum(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).log2()).sum()
}
