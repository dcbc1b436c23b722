//! Seeded random states, channels and superchannels.
//!
//! Every sampler takes an explicit RNG; [`sample_random`] wraps them behind a
//! `(kind, dims, seed)` interface with bit-identical output for equal seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::channels::{
    ClassicalChannel, ProbVector, QuantumChannel, QuantumState, Superchannel,
};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer, used to derive independent per-instance seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for instance `index` of stream `stream` under a base seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(stream)).wrapping_add(index))
}

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Haar-random unit vector in `C^d`.
pub fn haar_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..d).map(|_| gaussian_c64(rng)).collect();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-300 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> QuantumState {
    QuantumState::pure(&haar_vector(rng, d)).expect("nonzero vector")
}

/// Reduced state of a Haar-random pure state on `C^d ⊗ C^d` (full rank almost surely).
pub fn random_mixed_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> QuantumState {
    random_mixed_state_with_rank(rng, d, d)
}

/// `G G† / Tr` with a `d × k` Ginibre matrix `G`; rank `min(d, k)`.
pub fn random_mixed_state_with_rank<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> QuantumState {
    let g = ComplexMatrix::from_fn(d, k, |_, _| gaussian_c64(rng));
    let m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    QuantumState::new_unchecked(m.scale_re(1.0 / tr))
}

/// Haar-random isometry `C^din → C^dout` (columns orthonormal), via
/// Gram-Schmidt on a Ginibre matrix.
pub fn haar_isometry<R: Rng + ?Sized>(rng: &mut R, din: usize, dout: usize) -> ComplexMatrix {
    assert!(dout >= din, "isometry needs dout >= din");
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(din);
    while cols.len() < din {
        let mut v: Vec<C64> = (0..dout).map(|_| gaussian_c64(rng)).collect();
        // two passes of modified Gram-Schmidt for stability
        for _ in 0..2 {
            for c in &cols {
                let ip: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= ip * y;
                }
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-8 {
            cols.push(v.into_iter().map(|z| z / n).collect());
        }
    }
    ComplexMatrix::from_fn(dout, din, |r, c| cols[c][r])
}

pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    haar_isometry(rng, d, d)
}

/// Random channel from an isometry `A → B ⊗ E` with `|E| = |A||B|`.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, din: usize, dout: usize) -> QuantumChannel {
    random_channel_with_env(rng, din, dout, din * dout)
}

pub fn random_channel_with_env<R: Rng + ?Sized>(
    rng: &mut R,
    din: usize,
    dout: usize,
    env: usize,
) -> QuantumChannel {
    let v = haar_isometry(rng, din, dout * env);
    let kraus: Vec<ComplexMatrix> = (0..env)
        .map(|e| ComplexMatrix::from_fn(dout, din, |b, a| v[(b * env + e, a)]))
        .collect();
    QuantumChannel::from_kraus(kraus).expect("Stinespring dilation is trace preserving")
}

/// Dirichlet(1, ..., 1) probability vector.
pub fn random_prob_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ProbVector {
    let w: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    ProbVector::new_unchecked(w.into_iter().map(|x: f64| x / s).collect())
}

/// Column-stochastic matrix with Dirichlet(1) columns.
pub fn random_stochastic<R: Rng + ?Sized>(rng: &mut R, din: usize, dout: usize) -> ClassicalChannel {
    let cols: Vec<ProbVector> = (0..din).map(|_| random_prob_vector(rng, dout)).collect();
    ClassicalChannel::from_columns(&cols).expect("nonempty")
}

/// Superchannel mapping `A → B` channels to `A' → B'` channels through a
/// reference of dimension `dim_r`.
pub fn random_superchannel<R: Rng + ?Sized>(
    rng: &mut R,
    input: (usize, usize),
    output: (usize, usize),
    dim_r: usize,
) -> Superchannel {
    let (a, b) = input;
    let (ap, bp) = output;
    let pre = random_channel(rng, ap, dim_r * a);
    let post = random_channel(rng, dim_r * b, bp);
    Superchannel::new(pre, post, dim_r).expect("dimensions compose")
}

/// Superchannel whose pre/post maps are classical, so classical channels
/// stay classical.
pub fn random_classical_superchannel<R: Rng + ?Sized>(
    rng: &mut R,
    input: (usize, usize),
    output: (usize, usize),
    dim_r: usize,
) -> Superchannel {
    let (a, b) = input;
    let (ap, bp) = output;
    let pre = QuantumChannel::from_classical(&random_stochastic(rng, ap, dim_r * a));
    let post = QuantumChannel::from_classical(&random_stochastic(rng, dim_r * b, bp));
    Superchannel::new(pre, post, dim_r).expect("dimensions compose")
}

/// Kinds accepted by [`sample_random`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    PureState,
    MixedState,
    Channel,
    Stochastic,
    Superchannel,
    Isometry,
}

/// Output of [`sample_random`].
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    State(QuantumState),
    Channel(QuantumChannel),
    Stochastic(ClassicalChannel),
    Superchannel(Superchannel),
    Isometry(ComplexMatrix),
}

/// Deterministic sampler.
///
/// `dims` is `[d]` for states, `[din, dout]` for channels, stochastic
/// matrices and isometries, and `[a, b, a', b', r]` for superchannels.
pub fn sample_random(kind: SampleKind, dims: &[usize], seed: u64) -> Result<Sample> {
    let expected = match kind {
        SampleKind::PureState | SampleKind::MixedState => 1,
        SampleKind::Superchannel => 5,
        _ => 2,
    };
    if dims.len() != expected || dims.contains(&0) {
        return Err(Error::BadDims(format!(
            "{kind:?} needs {expected} positive dimensions, got {dims:?}"
        )));
    }
    if kind == SampleKind::Isometry && dims[1] < dims[0] {
        return Err(Error::BadDims(format!(
            "isometry needs dout >= din, got {dims:?}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let r = &mut rng;
    Ok(match kind {
        SampleKind::PureState => Sample::State(random_pure_state(r, dims[0])),
        SampleKind::MixedState => Sample::State(random_mixed_state(r, dims[0])),
        SampleKind::Channel => Sample::Channel(random_channel(r, dims[0], dims[1])),
        SampleKind::Stochastic => Sample::Stochastic(random_stochastic(r, dims[0], dims[1])),
        SampleKind::Superchannel => Sample::Superchannel(random_superchannel(
            r,
            (dims[0], dims[1]),
            (dims[2], dims[3]),
            dims[4],
        )),
        SampleKind::Isometry => Sample::Isometry(haar_isometry(r, dims[0], dims[1])),
    })
}
