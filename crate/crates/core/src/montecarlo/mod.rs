//! Random-matrix samplers, Dyson Brownian motion, vicious walkers and
//! histogram comparison against analytic densities.

mod histogram;
mod walkers;

pub use histogram::{compare_density, pass_fraction, BinComparison, Binning, Histogram};
pub use walkers::{
    endpoint_law, enumerate_vicious, simulate_walkers, survival_probability, vicious_count, WalkerConfig,
};

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, DenseMatrix};

/// Samples drawn per independent RNG stream.
pub const CHUNK: usize = 512;
/// Step halvings allowed before a crossing is reported.
pub const MAX_HALVINGS: usize = 10;
/// Kramers pair mismatch tolerated, relative to the spectral scale.
pub const KRAMERS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleTag {
    Goe,
    Gse,
    LaguerreOrthogonal { a: usize },
    Dyson { tau: f64 },
    Walkers { step: usize },
}

/// Sorted eigenvalue (or position) vectors with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub tag: EnsembleTag,
    pub n: usize,
    pub seed: u64,
    pub samples: Vec<Vec<f64>>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Every value of every sample.
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().flatten().copied().collect()
    }

    /// Rows `sample,slice,x1,…,xN`.
    pub fn write_csv<W: Write>(&self, out: &mut W, slice: usize, header: bool) -> std::io::Result<()> {
        if header {
            write!(out, "sample,slice")?;
            for j in 1..=self.n {
                write!(out, ",x{j}")?;
            }
            writeln!(out)?;
        }
        for (i, s) in self.samples.iter().enumerate() {
            write!(out, "{i},{slice}")?;
            for v in s {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Stream `chunk` of the generator seeded by `seed`.
pub(crate) fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Runs `draw` for `count` samples over independent chunk streams.
pub(crate) fn parallel_draw<T: Send>(
    count: usize,
    seed: u64,
    draw: impl Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let size = CHUNK.min(count - c * CHUNK);
            (0..size).map(|_| draw(&mut rng)).collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    sd * rng.sample::<f64, _>(StandardNormal)
}

/// Real symmetric matrix with density `∝ exp(-Tr X²/2)`.
fn goe_matrix(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = normal(rng, 1.0);
        for j in i + 1..n {
            let v = normal(rng, std::f64::consts::FRAC_1_SQRT_2);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

fn goe_eigenvalues(n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    symmetric_eigenvalues(&goe_matrix(n, rng))
}

/// GOE eigenvalues, density `∝ Π e^{-x²/2} |Δ|`.
pub fn sample_goe(n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    check_size(n)?;
    let samples = parallel_draw(count, seed, |rng| goe_eigenvalues(n, rng))?;
    Ok(SampleBatch { tag: EnsembleTag::Goe, n, seed, samples })
}

/// Self-dual quaternion matrix with density `∝ exp(-Tr H²/2)` (trace over
/// the `2n × 2n` complex form), eigenvalue density `∝ Π e^{-x²} Δ⁴`.
pub fn sample_gse(n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    check_size(n)?;
    let samples = parallel_draw(count, seed, |rng| {
        let (re, im) = gse_matrix(n, rng);
        kramers_eigenvalues(&re, &im)
    })?;
    Ok(SampleBatch { tag: EnsembleTag::Gse, n, seed, samples })
}

/// Real and imaginary parts of the `2n × 2n` complex representation.
fn gse_matrix(n: usize, rng: &mut ChaCha8Rng) -> (DenseMatrix<f64>, DenseMatrix<f64>) {
    let d = 2 * n;
    let mut re = DenseMatrix::zeros(d, d);
    let mut im = DenseMatrix::zeros(d, d);
    for i in 0..n {
        let q0 = normal(rng, std::f64::consts::FRAC_1_SQRT_2);
        re[(2 * i, 2 * i)] = q0;
        re[(2 * i + 1, 2 * i + 1)] = q0;
        for j in i + 1..n {
            let q: [f64; 4] = std::array::from_fn(|_| normal(rng, 0.5));
            // q0 + q1 i + q2 j + q3 k as [[q0 + i q1, q2 + i q3], [-q2 + i q3, q0 - i q1]]
            let block_re = [[q[0], q[2]], [-q[2], q[0]]];
            let block_im = [[q[1], q[3]], [q[3], -q[1]]];
            for a in 0..2 {
                for b in 0..2 {
                    re[(2 * i + a, 2 * j + b)] = block_re[a][b];
                    im[(2 * i + a, 2 * j + b)] = block_im[a][b];
                    re[(2 * j + b, 2 * i + a)] = block_re[a][b];
                    im[(2 * j + b, 2 * i + a)] = -block_im[a][b];
                }
            }
        }
    }
    (re, im)
}

/// Eigenvalues of the hermitian `re + i·im`, each Kramers pair once.
fn kramers_eigenvalues(re: &DenseMatrix<f64>, im: &DenseMatrix<f64>) -> Result<Vec<f64>> {
    let d = re.rows();
    // [[A, -B], [B, A]] repeats every complex eigenvalue twice
    let big = DenseMatrix::from_fn(2 * d, 2 * d, |i, j| match (i < d, j < d) {
        (true, true) => re[(i, j)],
        (true, false) => -im[(i, j - d)],
        (false, true) => im[(i - d, j)],
        (false, false) => re[(i - d, j - d)],
    });
    let ev = symmetric_eigenvalues(&big)?;
    let scale = ev.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut out = Vec::with_capacity(d / 2);
    for group in ev.chunks(4) {
        let spread = group[3] - group[0];
        if spread > KRAMERS_TOL * scale {
            return Err(Error::NotSelfDual(spread));
        }
        out.push(group.iter().sum::<f64>() / 4.0);
    }
    Ok(out)
}

/// Eigenvalues of `AᵀA` with `A` an `(n+a) × n` standard Gaussian matrix:
/// density `∝ Π x^{(a-1)/2} e^{-x/2} |Δ|`.
pub fn sample_laguerre_orthogonal(n: usize, a: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    check_size(n)?;
    let rows = n + a;
    let samples = parallel_draw(count, seed, |rng| {
        let m = DenseMatrix::from_fn(rows, n, |_, _| normal(rng, 1.0));
        let w = m.transpose().matmul(&m)?;
        symmetric_eigenvalues(&w)
    })?;
    Ok(SampleBatch { tag: EnsembleTag::LaguerreOrthogonal { a }, n, seed, samples })
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    Ok(())
}

/// Settings for the eigenvalue diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct DysonConfig {
    pub n: usize,
    /// Observation times, non-decreasing and non-negative.
    pub times: Vec<f64>,
    /// Euler step.
    pub step: f64,
    pub count: usize,
    pub seed: u64,
}

/// Drift `-x_j + Σ_{l≠j} 1/(x_j - x_l)`.
fn dyson_drift(x: &[f64], out: &mut [f64]) {
    for j in 0..x.len() {
        let mut v = -x[j];
        for l in 0..x.len() {
            if l != j {
                v += 1.0 / (x[j] - x[l]);
            }
        }
        out[j] = v;
    }
}

/// One Euler step of length `h`, halving on order violations.
fn dyson_step(x: &mut [f64], h: f64, rng: &mut ChaCha8Rng, drift: &mut [f64], trial: &mut [f64]) -> Result<()> {
    dyson_drift(x, drift);
    for halvings in 0..=MAX_HALVINGS {
        let sub = h / (1u64 << halvings) as f64;
        let steps = 1usize << halvings;
        trial.copy_from_slice(x);
        let mut ok = true;
        for s in 0..steps {
            if s > 0 {
                dyson_drift(trial, drift);
            }
            for j in 0..trial.len() {
                trial[j] += drift[j] * sub + normal(rng, sub.sqrt());
            }
            if trial.windows(2).any(|w| w[0] >= w[1]) {
                ok = false;
                break;
            }
        }
        if ok {
            x.copy_from_slice(trial);
            return Ok(());
        }
        dyson_drift(x, drift);
    }
    Err(Error::StepTooLarge(MAX_HALVINGS))
}

/// Eigenvalue diffusion with stationary law `∝ Π e^{-x²} Δ²`, started
/// from GOE eigenvalues at time 0. Returns one batch per requested time.
pub fn sample_dyson(cfg: &DysonConfig) -> Result<Vec<SampleBatch>> {
    check_size(cfg.n)?;
    if !(cfg.step > 0.0) || cfg.times.iter().any(|t| !(*t >= 0.0)) || cfg.times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(format!(
            "need step > 0 and non-decreasing times >= 0, got step {} and {:?}",
            cfg.step, cfg.times
        )));
    }
    let n = cfg.n;
    let paths = parallel_draw(cfg.count, cfg.seed, |rng| {
        let mut x = goe_eigenvalues(n, rng)?;
        let (mut drift, mut trial) = (vec![0.0; n], vec![0.0; n]);
        let mut now = 0.0;
        let mut record = Vec::with_capacity(cfg.times.len());
        for &t in &cfg.times {
            while now < t {
                let h = cfg.step.min(t - now);
                dyson_step(&mut x, h, rng, &mut drift, &mut trial)?;
                now += h;
                if t - now < 1e-12 * cfg.step {
                    now = t;
                }
            }
            record.push(x.clone());
        }
        Ok(record)
    })?;
    Ok(cfg
        .times
        .iter()
        .enumerate()
        .map(|(m, &tau)| SampleBatch {
            tag: EnsembleTag::Dyson { tau },
            n,
            seed: cfg.seed,
            samples: paths.iter().map(|p| p[m].clone()).collect(),
        })
        .collect())
}
