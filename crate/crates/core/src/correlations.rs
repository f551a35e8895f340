//! Correlation functions as Pfaffians of the kernel blocks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eynard_mehta::{biorthogonalize, em_correlation, BiorthoSet, HermitianChain};
use crate::kernels::{CorrelationKernel, KernelOptions, PointData, SliceChain};
use crate::measures::Measure;
use crate::skewproduct::SkewKernel;

/// How correlations are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Normalized correlation functions; the empty configuration gives 1.
    #[default]
    Rho,
    /// The raw multiple integral, i.e. `ρ` times `Π r_k` (and `s_{N-1}`).
    WRaw,
}

/// Evaluation points per slice.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointConfiguration {
    slices: Vec<Vec<f64>>,
}

impl PointConfiguration {
    pub fn new(slices: Vec<Vec<f64>>) -> Self {
        Self { slices }
    }

    /// All points on slice 0.
    pub fn single_slice(points: &[f64]) -> Self {
        Self { slices: vec![points.to_vec()] }
    }

    pub fn from_pairs(pts: &[(usize, f64)]) -> Self {
        let len = pts.iter().map(|p| p.0 + 1).max().unwrap_or(0);
        let mut slices = vec![Vec::new(); len];
        for &(m, x) in pts {
            slices[m].push(x);
        }
        Self { slices }
    }

    pub fn slices(&self) -> &[Vec<f64>] {
        &self.slices
    }

    /// Number of points per slice.
    pub fn counts(&self) -> Vec<usize> {
        self.slices.iter().map(Vec::len).collect()
    }

    pub fn pairs(&self) -> Vec<(usize, f64)> {
        self.slices.iter().enumerate().flat_map(|(m, xs)| xs.iter().map(move |&x| (m, x))).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.iter().all(Vec::is_empty)
    }
}

/// Chain, size and options of an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub chain: SliceChain,
    /// Pfaffian size `N` (twice the eigenvalue count for symplectic ensembles).
    pub n: usize,
    pub mode: NormalizationMode,
    pub options: KernelOptions,
    /// Points per physical eigenvalue: 2 for symplectic ensembles.
    pub multiplicity: u32,
    separable: bool,
}

impl EnsembleSpec {
    pub fn new(chain: SliceChain, n: usize) -> Self {
        Self {
            chain,
            n,
            mode: NormalizationMode::Rho,
            options: KernelOptions::default(),
            multiplicity: 1,
            separable: false,
        }
    }

    /// Sign kernel on one slice: the orthogonal ensemble of `measure`.
    pub fn orthogonal(measure: Measure, n: usize) -> Result<Self> {
        Ok(Self::new(SliceChain::single(measure, SkewKernel::SignType)?, n))
    }

    /// Derivative kernel with `n` doubly degenerate eigenvalues.
    pub fn symplectic(measure: Measure, n: usize) -> Result<Self> {
        let mut s = Self::new(SliceChain::single(measure, SkewKernel::DerivativeType)?, 2 * n);
        s.multiplicity = 2;
        Ok(s)
    }

    /// Gaussian orthogonal ensemble with density `∝ exp(-Tr X²/2)`.
    pub fn goe(n: usize) -> Result<Self> {
        Self::orthogonal(Measure::Hermite, n)
    }

    /// Gaussian symplectic ensemble, eigenvalue density `∝ Π e^{-x²} Δ⁴`.
    pub fn gse(n: usize) -> Result<Self> {
        Self::symplectic(Measure::Hermite, n)
    }

    /// Geometric-weight ensemble on the non-negative integers.
    pub fn discrete_exp(q: f64, alpha: f64, n: usize) -> Result<Self> {
        Ok(Self::new(SliceChain::single(Measure::DiscreteExp { q }, SkewKernel::DiscreteExpType { alpha })?, n))
    }

    /// GOE matrix evolved by the Ornstein–Uhlenbeck matrix process,
    /// observed at `taus`.
    pub fn dyson(n: usize, taus: &[f64]) -> Result<Self> {
        Ok(Self::new(SliceChain::dyson(SkewKernel::SignType, taus)?, n))
    }

    /// Scaled vicious walkers; returns the spec and the time of each slice.
    pub fn walkers(n: usize, times: &[f64], horizon: f64) -> Result<(Self, Vec<f64>)> {
        let (chain, ts) = SliceChain::walkers(times, horizon)?;
        Ok((Self::new(chain, n), ts))
    }

    /// Skew base slice followed by a hermitian Hermite sub-chain.
    pub fn separable(measure: Measure, kernel: SkewKernel, n: usize, dts: &[f64]) -> Result<Self> {
        let mut s = Self::new(SliceChain::separable(measure, kernel, n, dts)?, n);
        s.separable = true;
        Ok(s)
    }

    pub fn with_mode(mut self, mode: NormalizationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_options(mut self, options: KernelOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_jmax(mut self, jmax: usize) -> Self {
        self.chain = self.chain.with_jmax(jmax);
        self
    }

    pub fn is_separable(&self) -> bool {
        self.separable
    }
}

/// An assembled ensemble ready for evaluation.
#[derive(Debug, Clone)]
pub struct Ensemble {
    spec: EnsembleSpec,
    kernel: CorrelationKernel,
}

impl Ensemble {
    pub fn new(spec: EnsembleSpec) -> Result<Self> {
        let kernel = CorrelationKernel::new(&spec.chain, spec.n, &spec.options)?;
        Ok(Self { spec, kernel })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn kernel(&self) -> &CorrelationKernel {
        &self.kernel
    }

    fn points(&self, pts: &[(usize, f64)]) -> Result<Vec<PointData>> {
        pts.iter().map(|&(m, x)| self.kernel.point(m, x)).collect()
    }

    /// Correlation at points `(slice, x)`, w.r.t. the slice measures.
    pub fn correlation_at(&self, pts: &[(usize, f64)]) -> Result<f64> {
        let data = self.points(pts)?;
        let pf = self.kernel.pfaffian(&data)?;
        Ok(match self.spec.mode {
            NormalizationMode::Rho => pf / (self.spec.multiplicity as f64).powi(pts.len() as i32),
            NormalizationMode::WRaw => {
                let (ln, sign) = self.kernel.ln_prefactor();
                pf * sign * ln.exp()
            }
        })
    }

    pub fn correlation(&self, pts: &PointConfiguration) -> Result<f64> {
        self.correlation_at(&pts.pairs())
    }

    /// One-point function on slice `m` w.r.t. its measure.
    pub fn density(&self, m: usize, x: f64) -> Result<f64> {
        self.correlation_at(&[(m, x)])
    }

    /// One-point function w.r.t. `dx` (counting measure on discrete supports).
    pub fn density_dx(&self, m: usize, x: f64) -> Result<f64> {
        Ok(self.density(m, x)? * self.spec.chain.slice(m).measure.weight(x))
    }

    /// `density` on a grid, evaluated in parallel.
    pub fn density_grid(&self, m: usize, xs: &[f64]) -> Result<Vec<f64>> {
        xs.par_iter().map(|&x| self.density(m, x)).collect()
    }

    /// `density_dx` on a grid, evaluated in parallel.
    pub fn density_dx_grid(&self, m: usize, xs: &[f64]) -> Result<Vec<f64>> {
        xs.par_iter().map(|&x| self.density_dx(m, x)).collect()
    }

    /// Hermitian part of a separable ensemble as a determinantal engine.
    pub fn hermitian_part(&self) -> Result<BiorthoSet> {
        if !self.spec.separable {
            return Err(Error::InvalidParameter("ensemble is not separable".into()));
        }
        biorthogonalize(&HermitianChain::from_chain(&self.spec.chain, 1)?, self.spec.n)
    }
}

/// Both sides of the factorization of a separable ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduction {
    /// Full Pfaffian over all points.
    pub lhs: f64,
    /// Pfaffian over skew-slice points times the hermitian determinant.
    pub rhs: f64,
}

impl Reduction {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.abs().max(self.rhs.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Compares the full Pfaffian with the skew Pfaffian on slice 0 times the
/// determinantal correlation of the hermitian slices.
pub fn em_reduction_check(ens: &Ensemble, pts: &PointConfiguration) -> Result<Reduction> {
    let set = ens.hermitian_part()?;
    let all = pts.pairs();
    let data = ens.points(&all)?;
    let lhs = ens.kernel.pfaffian(&data)?;
    let skew: Vec<PointData> = data.iter().filter(|p| p.slice() == 0).cloned().collect();
    let herm: Vec<(usize, f64)> = all.iter().filter(|p| p.0 > 0).map(|&(m, x)| (m - 1, x)).collect();
    let rhs = ens.kernel.pfaffian(&skew)? * em_correlation(&set, &herm)?;
    Ok(Reduction { lhs, rhs })
}

/// `Ensemble::new(spec)?.correlation(pts)`.
pub fn correlation(spec: &EnsembleSpec, pts: &PointConfiguration) -> Result<f64> {
    Ensemble::new(spec.clone())?.correlation(pts)
}

/// `Ensemble::new(spec)?.density(m, x)`.
pub fn density(spec: &EnsembleSpec, m: usize, x: f64) -> Result<f64> {
    Ensemble::new(spec.clone())?.density(m, x)
}
