//! Divergences between quantum channels.
//!
//! Closed forms (`channel_dmax`, `geometric_renyi_channel`,
//! `isometry_max_ext`) work on Choi matrices directly. The remaining
//! divergences maximize a state divergence of the channel outputs over pure
//! inputs `ψ` on `R ⊗ A`; those optimizer results are lower bounds and carry
//! `exact = false`.

use rand::Rng;

use crate::channels::{apply_channel, QuantumChannel, QuantumState};
use crate::error::{Error, Result};
use crate::geometric::{geometric_renyi, max_divergence};
use crate::linalg::{fn_on_support, rank, support_contained, tolerances, ScalarFn, C64};
use crate::random::{derive_seed, haar_vector, random_mixed_state, rng_from_seed};
use crate::state::{hyptest_q, umegaki};
use crate::value::DivergenceValue;

/// Settings for the pure-input optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Haar-random starting points, on top of the structured ones.
    pub restarts: usize,
    /// Gradient steps per starting point.
    pub max_iters: usize,
    /// Line search gives up below this step length.
    pub step_tol: f64,
    pub seed: u64,
    /// Reference dimension `|R|`; `None` means `|A|`.
    pub ref_dim: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_iters: 60,
            step_tol: 1e-9,
            seed: 0,
            ref_dim: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 || self.step_tol.is_nan() || self.step_tol <= 0.0 || self.ref_dim == Some(0) {
            return Err(Error::BadConfig(format!(
                "need restarts >= 1, max_iters >= 1, step_tol > 0, ref_dim >= 1; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// An optimizer result: the best value found, the input achieving it, and a
/// certified upper bound where one is available.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub value: DivergenceValue,
    pub upper: Option<DivergenceValue>,
    /// Best `ψ` on `R ⊗ A`, normalized.
    pub input: Vec<C64>,
    pub ref_dim: usize,
}

fn check_shapes(m: &QuantumChannel, n: &QuantumChannel) -> Result<()> {
    if !m.same_shape(n) {
        return Err(Error::ShapeMismatch(format!(
            "{}->{} vs {}->{}",
            m.dim_in(),
            m.dim_out(),
            n.dim_in(),
            n.dim_out()
        )));
    }
    Ok(())
}

/// `log2 min{t : tN - M is CP}`, i.e. `log2 λ_max(J_N^{-1/2} J_M J_N^{-1/2})`
/// when `supp J_M ⊆ supp J_N`, else `+∞`.
pub fn channel_dmax(m: &QuantumChannel, n: &QuantumChannel) -> Result<DivergenceValue> {
    check_shapes(m, n)?;
    max_divergence(m.choi(), n.choi())
}

/// Closed-form geometric Rényi channel divergence, `α ∈ (0, 2]`.
pub fn geometric_renyi_channel(m: &QuantumChannel, n: &QuantumChannel, alpha: f64) -> Result<DivergenceValue> {
    check_shapes(m, n)?;
    geometric_renyi(m.choi(), n.choi(), (m.dim_in(), m.dim_out()), alpha)
}

/// `log2 Tr[J_N^{-1} J_V]` for an isometry channel `V`.
pub fn isometry_max_ext(v: &QuantumChannel, n: &QuantumChannel) -> Result<DivergenceValue> {
    check_shapes(v, n)?;
    let tol = tolerances();
    let r = rank(v.choi(), tol)?;
    if r != 1 {
        return Err(Error::NotIsometry(format!("Choi matrix has rank {r}")));
    }
    if !support_contained(v.choi(), n.choi(), tol)? {
        return Ok(DivergenceValue::infinite());
    }
    let inv = fn_on_support(n.choi(), ScalarFn::Inverse, tol)?;
    Ok(DivergenceValue::exact(inv.trace_product(v.choi()).re.log2()))
}

struct InputSearch<'a, F> {
    m: &'a QuantumChannel,
    n: &'a QuantumChannel,
    ref_dim: usize,
    bounded: bool,
    objective: F,
}

impl<F> InputSearch<'_, F>
where
    F: Fn(&QuantumState, &QuantumState) -> Result<f64>,
{
    fn eval(&self, x: &[f64]) -> Result<f64> {
        let psi: Vec<C64> = x.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
        let state = QuantumState::pure(&psi)?;
        let a = apply_channel(self.m, &state, self.ref_dim)?;
        let b = apply_channel(self.n, &state, self.ref_dim)?;
        let f = (self.objective)(&a, &b)?;
        // with finite D_max an infinite value is a rank-threshold artifact
        Ok(if self.bounded && f == f64::INFINITY { f64::NEG_INFINITY } else { f })
    }

    /// Projected finite-difference ascent with Armijo backtracking.
    fn ascend(&self, mut x: Vec<f64>, cfg: &OptimizerConfig) -> Result<(f64, Vec<f64>)> {
        normalize(&mut x);
        let mut f = self.eval(&x)?;
        let h = 1e-6;
        let mut step = 0.5;
        for _ in 0..cfg.max_iters {
            if !f.is_finite() {
                break;
            }
            let mut g = vec![0.0; x.len()];
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let (fp, fm) = (self.eval(&xp)?, self.eval(&xm)?);
                if !fp.is_finite() || !fm.is_finite() {
                    g[i] = 0.0;
                    continue;
                }
                g[i] = (fp - fm) / (2.0 * h);
            }
            let gn2: f64 = g.iter().map(|v| v * v).sum();
            if gn2.sqrt() < 1e-10 {
                break;
            }
            let mut accepted = false;
            while step >= cfg.step_tol {
                let mut cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                normalize(&mut cand);
                let fc = self.eval(&cand)?;
                if fc >= f + 1e-4 * step * gn2 {
                    x = cand;
                    f = fc;
                    accepted = true;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok((f, x))
    }

    fn run(&self, cfg: &OptimizerConfig) -> Result<(f64, Vec<f64>)> {
        let da = self.m.dim_in();
        let dim = self.ref_dim * da;
        let mut starts: Vec<Vec<C64>> = Vec::new();
        let mut omega = vec![C64::new(0.0, 0.0); dim];
        for i in 0..self.ref_dim.min(da) {
            omega[i * da + i] = C64::new(1.0, 0.0);
        }
        starts.push(omega);
        for a in 0..da {
            let mut e = vec![C64::new(0.0, 0.0); dim];
            e[a] = C64::new(1.0, 0.0);
            starts.push(e);
        }
        for k in 0..cfg.restarts {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, 0x70_7369, k as u64));
            starts.push(haar_vector(&mut rng, dim));
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for s in starts {
            let x: Vec<f64> = s.iter().flat_map(|z| [z.re, z.im]).collect();
            let (f, x) = self.ascend(x, cfg)?;
            if f == f64::INFINITY {
                return Ok((f, x));
            }
            if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
                best = Some((f, x));
            }
        }
        Ok(best.expect("at least one start"))
    }
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= n);
}

fn search<F>(m: &QuantumChannel, n: &QuantumChannel, cfg: &OptimizerConfig, objective: F) -> Result<ChannelEstimate>
where
    F: Fn(&QuantumState, &QuantumState) -> Result<f64>,
{
    check_shapes(m, n)?;
    cfg.validate()?;
    let ref_dim = cfg.ref_dim.unwrap_or(m.dim_in());
    let bounded = channel_dmax(m, n)?.value.is_finite();
    let s = InputSearch { m, n, ref_dim, bounded, objective };
    let (f, x) = s.run(cfg)?;
    let mut input: Vec<C64> = x.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
    let norm = input.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    input.iter_mut().for_each(|z| *z /= norm);
    // an infinite value is witnessed by the input itself
    let value = if f == f64::INFINITY {
        DivergenceValue::infinite()
    } else if f == f64::NEG_INFINITY {
        DivergenceValue::estimate(0.0)
    } else {
        DivergenceValue::estimate(f.max(0.0))
    };
    Ok(ChannelEstimate {
        value,
        upper: None,
        input,
        ref_dim,
    })
}

/// Best hypothesis-testing divergence of the outputs over pure inputs.
/// At `ε = 0` this is the channel min-relative entropy
/// `max_ψ -log2 Tr[N(ψ) Π_{M(ψ)}]`, infinite when some input makes the
/// outputs orthogonal (checked at the inputs visited).
pub fn channel_hyptest(m: &QuantumChannel, n: &QuantumChannel, eps: f64, cfg: &OptimizerConfig) -> Result<ChannelEstimate> {
    crate::classical::check_epsilon(eps)?;
    search(m, n, cfg, |a, b| Ok(hyptest_q(a, b, eps)?.value))
}

/// Best Umegaki divergence of the outputs over pure inputs, with
/// [`channel_dmax`] as the certified upper bound.
pub fn channel_umegaki(m: &QuantumChannel, n: &QuantumChannel, cfg: &OptimizerConfig) -> Result<ChannelEstimate> {
    let mut est = search(m, n, cfg, |a, b| Ok(umegaki(a, b)?.value))?;
    est.upper = Some(channel_dmax(m, n)?);
    Ok(est)
}

/// Lower bound on the amortized divergence
/// `sup D(M(ρ) ‖ N(σ)) - D(ρ ‖ σ)` over states on `R ⊗ A`.
///
/// Seeds with [`channel_umegaki`] (the `ρ = σ` slice) and then samples
/// mixed pairs, `8 · restarts` of them.
pub fn amortized_lb(m: &QuantumChannel, n: &QuantumChannel, cfg: &OptimizerConfig) -> Result<ChannelEstimate> {
    let mut est = channel_umegaki(m, n, cfg)?;
    est.upper = None;
    if est.value.is_infinite() {
        return Ok(est);
    }
    let r = est.ref_dim;
    let dim = r * m.dim_in();
    let mut best = est.value.value;
    for k in 0..8 * cfg.restarts {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, 0x616d_6f72, k as u64));
        let rho = random_mixed_state(&mut rng, dim);
        let other = random_mixed_state(&mut rng, dim);
        let t: f64 = rng.random_range(0.05..0.95);
        let sigma = rho.mix(&other, t);
        let base = umegaki(&rho, &sigma)?.value;
        if !base.is_finite() {
            continue;
        }
        let out = umegaki(&apply_channel(m, &rho, r)?, &apply_channel(n, &sigma, r)?)?.value;
        if out == f64::INFINITY {
            best = f64::INFINITY;
            break;
        }
        best = best.max(out - base);
    }
    est.value = if best == f64::INFINITY {
        DivergenceValue::infinite()
    } else {
        DivergenceValue::estimate(best)
    };
    Ok(est)
}
