//! Multi-slice chains and the D/S/I kernel blocks.
//!
//! A chain has slices `0..M`. Slice 0 carries the skew kernel and the last
//! slice carries the Vandermonde factor. Slice `p` is linked to slice `p-1`
//! (slice 0 to the base kernel) by
//!
//! `g(x,y) = Σ_{l',l} Λ_{l'l} ĉ^{(p)}_{l'}(x) ĉ^{(p-1)}_l(y)`
//!
//! with `ĉ` the orthonormal polynomials of each slice and `Λ` lower
//! triangular (diagonal for the usual parametric chains). Integrating a
//! function on slice `m` against the links maps its coefficients to the
//! base by `P_m = Λ^{(0)T} ⋯ Λ^{(m)T}`. Skew-orthogonal polynomials are built
//! once in base coordinates from `K_{jl} = ⟨ĉ_j, ĉ_l⟩` and pulled back to
//! every slice with `P_m^{-1}`.
//!
//! Slice 0 with identity link is evaluated directly: `Φ` through the base
//! projection and `F` in closed form. Every other slice goes through the
//! truncated spectral series with a tail check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pfaffian, AntisymMatrix, DenseMatrix};
use crate::measures::Measure;
use crate::orthopoly::{build_family, OrthoPolyFamily};
use crate::skewpoly::{construct_from_gram, SkewPolySet};
use crate::skewproduct::{OrthonormalBasis, SkewKernel, SkewProjection, SkewSetup};


/// Default relative tolerance for truncated spectral sums.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
/// Extra spectral terms beyond `N` when no truncation is given.
pub const DEFAULT_EXTRA_TERMS: usize = 40;
/// Number of trailing terms used for the tail estimate.
const TAIL_TERMS: usize = 4;

/// Coefficients of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Link {
    Identity,
    /// `λ_l = e^{-(l+1/2) dt}`.
    Ornstein {
        dt: f64,
    },
    /// `λ_l = rho^l`.
    Geometric {
        rho: f64,
    },
    /// `inner` for `l < rank`, zero beyond.
    Truncated {
        rank: usize,
        inner: Box<Link>,
    },
    /// Explicit diagonal; must cover the truncation order.
    Explicit {
        coeffs: Vec<f64>,
    },
    /// Lower-triangular `Λ_{l'l}` by rows; missing entries are zero.
    Triangular {
        rows: Vec<Vec<f64>>,
    },
}

impl Link {
    fn validate(&self) -> Result<()> {
        match self {
            Link::Identity => Ok(()),
            Link::Ornstein { dt } if *dt > 0.0 && dt.is_finite() => Ok(()),
            Link::Geometric { rho } if *rho > 0.0 && *rho <= 1.0 => Ok(()),
            Link::Truncated { rank, inner } if *rank > 0 => inner.validate(),
            Link::Explicit { coeffs } if coeffs.iter().all(|c| *c >= 0.0 && c.is_finite()) => Ok(()),
            Link::Triangular { rows }
                if rows.iter().enumerate().all(|(i, r)| r.len() <= i + 1 && r.iter().all(|v| v.is_finite())) =>
            {
                Ok(())
            }
            other => Err(Error::InvalidParameter(format!("invalid link {other:?}"))),
        }
    }

    fn is_identity(&self) -> bool {
        matches!(self, Link::Identity) || matches!(self, Link::Geometric { rho } if *rho == 1.0)
    }

    /// Diagonal coefficient `λ_l` of a diagonal link.
    fn diagonal(&self, l: usize) -> Result<Option<f64>> {
        Ok(Some(match self {
            Link::Identity => 1.0,
            Link::Ornstein { dt } => (-(l as f64 + 0.5) * dt).exp(),
            Link::Geometric { rho } => rho.powi(l as i32),
            Link::Truncated { rank, inner } => {
                if l < *rank {
                    match inner.diagonal(l)? {
                        Some(v) => v,
                        None => return Ok(None),
                    }
                } else {
                    0.0
                }
            }
            Link::Explicit { coeffs } => *coeffs
                .get(l)
                .ok_or_else(|| Error::InvalidParameter(format!("explicit link has no coefficient {l}")))?,
            Link::Triangular { .. } => return Ok(None),
        }))
    }

    /// `Λ` truncated to `dim × dim`.
    pub fn matrix(&self, dim: usize) -> Result<DenseMatrix<f64>> {
        if let Link::Triangular { rows } = self {
            return Ok(DenseMatrix::from_fn(dim, dim, |i, j| {
                rows.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)
            }));
        }
        if let Link::Truncated { rank, inner } = self {
            let mut m = inner.matrix(dim)?;
            for i in (*rank).min(dim)..dim {
                for j in 0..dim {
                    m[(i, j)] = 0.0;
                }
            }
            return Ok(m);
        }
        let mut m = DenseMatrix::zeros(dim, dim);
        for l in 0..dim {
            m[(l, l)] = self.diagonal(l)?.unwrap_or(0.0);
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub measure: Measure,
    pub link: Link,
}

/// Slices, links and the base skew kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceChain {
    base: SkewSetup,
    slices: Vec<SliceSpec>,
    jmax: Option<usize>,
    tail_tol: f64,
}

impl SliceChain {
    pub fn new(base: SkewSetup, slices: Vec<SliceSpec>) -> Result<Self> {
        let first = slices.first().ok_or_else(|| Error::InvalidParameter("a chain needs at least one slice".into()))?;
        if first.measure != *base.measure() {
            return Err(Error::InvalidParameter("slice 0 must use the measure of the skew kernel".into()));
        }
        for s in &slices {
            s.measure.validate()?;
            s.link.validate()?;
        }
        Ok(Self { base, slices, jmax: None, tail_tol: DEFAULT_TAIL_TOL })
    }

    /// One slice, no smoothing.
    pub fn single(measure: Measure, kernel: SkewKernel) -> Result<Self> {
        Self::new(SkewSetup::new(measure, kernel)?, vec![SliceSpec { measure, link: Link::Identity }])
    }

    /// Hermite slices at times `0 ≤ τ_0 < τ_1 < …` of the Ornstein–Uhlenbeck
    /// matrix process started from the base ensemble.
    pub fn dyson(kernel: SkewKernel, taus: &[f64]) -> Result<Self> {
        let mut slices = Vec::with_capacity(taus.len());
        let mut prev = 0.0;
        for (i, &t) in taus.iter().enumerate() {
            let dt = t - prev;
            let link = if i == 0 && t == 0.0 {
                Link::Identity
            } else if dt > 0.0 {
                Link::Ornstein { dt }
            } else {
                return Err(Error::InvalidParameter(format!(
                    "times must satisfy 0 <= tau_0 < tau_1 < ..., got {taus:?}"
                )));
            };
            slices.push(SliceSpec { measure: Measure::Hermite, link });
            prev = t;
        }
        Self::new(SkewSetup::new(Measure::Hermite, kernel)?, slices)
    }

    /// Base slice followed by a hermitian Hermite sub-chain. The first link
    /// is `Σ_{j<N} Q_j(x) R_j(y) / h_j` with `R_j` the monic skew-orthogonal
    /// polynomials of the base and `Q_j`, `h_j` biorthogonal for the
    /// sub-chain; the sub-chain links are Ornstein steps `dts`.
    pub fn separable(measure: Measure, kernel: SkewKernel, n: usize, dts: &[f64]) -> Result<Self> {
        let base = SkewSetup::new(measure, kernel)?;
        let fam0 = build_family(&measure, n.saturating_sub(1))?;
        let proj = base.project(OrthonormalBasis::new(fam0.clone(), n)?)?;
        let skew = construct_from_gram(proj.gram(), n, &[])?;
        let herm = build_family(&Measure::Hermite, n.saturating_sub(1))?;
        let rows = (0..n)
            .map(|j| {
                // Q_j = C_j on the first hermitian slice, P_j = C_j on the last
                let ln_ratio: f64 = dts.iter().map(|dt| -(j as f64 + 0.5) * dt).sum();
                let scale = (0.5 * fam0.ln_h(j) - ln_ratio - 0.5 * herm.ln_h(j)).exp();
                (0..=j).map(|l| skew.alpha()[(j, l)] * scale).collect()
            })
            .collect();
        let mut slices = vec![
            SliceSpec { measure, link: Link::Identity },
            SliceSpec { measure: Measure::Hermite, link: Link::Triangular { rows } },
        ];
        for &dt in dts {
            slices.push(SliceSpec { measure: Measure::Hermite, link: Link::Ornstein { dt } });
        }
        Self::new(base, slices)
    }

    /// Scaled vicious walkers from the origin observed at `times` with
    /// horizon `horizon`. Slices run backwards in time from the horizon;
    /// the returned vector gives the time of each slice.
    pub fn walkers(times: &[f64], horizon: f64) -> Result<(Self, Vec<f64>)> {
        let mut ts: Vec<f64> = times.to_vec();
        if ts.iter().any(|&t| !(t > 0.0 && t <= horizon)) || ts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "walker times must increase within (0, {horizon}], got {times:?}"
            )));
        }
        if ts.last() != Some(&horizon) {
            ts.push(horizon);
        }
        ts.reverse();
        let mut slices = Vec::with_capacity(ts.len());
        for (i, &t) in ts.iter().enumerate() {
            let link = if i == 0 { Link::Identity } else { Link::Geometric { rho: (t / ts[i - 1]).sqrt() } };
            slices.push(SliceSpec { measure: Measure::Gaussian { variance: t }, link });
        }
        let base = SkewSetup::new(Measure::Gaussian { variance: horizon }, SkewKernel::SignType)?;
        Ok((Self::new(base, slices)?, ts))
    }

    /// Fixes the highest spectral index kept in truncated sums.
    pub fn with_jmax(mut self, jmax: usize) -> Self {
        self.jmax = Some(jmax);
        self
    }

    pub fn with_tail_tol(mut self, tol: f64) -> Self {
        self.tail_tol = tol;
        self
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn base(&self) -> &SkewSetup {
        &self.base
    }

    pub fn slice(&self, m: usize) -> &SliceSpec {
        &self.slices[m]
    }

    pub fn jmax(&self) -> Option<usize> {
        self.jmax
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    /// Slice 0 with identity link uses the base kernel verbatim.
    pub fn is_direct(&self, m: usize) -> bool {
        m == 0 && self.slices[0].link.is_identity()
    }
}

/// The function in the last row/column for odd sizes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FinalColumn {
    /// The kernel prefactor `p`, i.e. a column of ones in the physical density.
    #[default]
    Prefactor,
    /// `f = Σ_j c_j ĉ_j` in the orthonormal basis of slice 0.
    Coefficients { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KernelOptions {
    /// Gauge constants `v_k`, applied in the internal normalization.
    pub gauge: Vec<f64>,
    pub final_column: FinalColumn,
}

#[derive(Debug, Clone)]
struct OddData {
    /// Coefficients of `f` in base orthonormal polynomials.
    fhat: Vec<f64>,
    /// `s_k` in the internal normalization.
    s: Vec<f64>,
    prefactor: bool,
}

/// Values at one evaluation point.
#[derive(Debug, Clone)]
pub struct PointData {
    slice: usize,
    x: f64,
    /// `R_k` (barred for odd sizes; the last entry stays unbarred).
    r: Vec<f64>,
    phi: Vec<f64>,
    f: f64,
    chat: Vec<f64>,
    route: Route,
}

#[derive(Debug, Clone)]
enum Route {
    Direct { phi_all: Vec<f64> },
    Series { omega: Vec<f64>, k_omega: Vec<f64> },
}

impl PointData {
    pub fn slice(&self) -> usize {
        self.slice
    }

    pub fn x(&self) -> f64 {
        self.x
    }
}

/// Assembled kernel blocks for a chain and a size `N`.
///
/// Internally `R_k` is scaled by `1/√h^{(M)}_k` relative to the monic
/// polynomial; accessors with `monic` in the name undo this.
#[derive(Debug, Clone)]
pub struct CorrelationKernel {
    chain: SliceChain,
    n: usize,
    dim: usize,
    /// Truncation at a finite support: every series is exact.
    exact: bool,
    families: Vec<OrthoPolyFamily>,
    /// `P_m`, slice coefficients to base coefficients.
    push: Vec<DenseMatrix<f64>>,
    /// `Λ^{(p)}` for every link.
    links: Vec<DenseMatrix<f64>>,
    gram: DenseMatrix<f64>,
    projection: SkewProjection<OrthonormalBasis>,
    polys: SkewPolySet,
    /// `σ_k = (P_M)_{kk}`.
    sigma: Vec<f64>,
    /// Base coefficients of `R_k`: `σ_k a_k`.
    coef: DenseMatrix<f64>,
    /// Per slice, coefficients of `R^{(m)}_k` on `ĉ^{(m)}`.
    rcoef: Vec<DenseMatrix<f64>>,
    odd: Option<OddData>,
}

/// Geometric extrapolation of a series beyond its kept terms, relative to
/// the whole sum.
pub(crate) fn geometric_tail(terms: &[f64]) -> f64 {
    let total: f64 = terms.iter().map(|v| v.abs()).sum();
    if total == 0.0 || terms.len() < 2 * TAIL_TERMS {
        return 0.0;
    }
    let len = terms.len();
    let block = |from: usize| terms[from..from + TAIL_TERMS].iter().map(|v| v.abs()).sum::<f64>();
    let (last, prev) = (block(len - TAIL_TERMS), block(len - 2 * TAIL_TERMS));
    if last == 0.0 {
        0.0
    } else if last < prev {
        let ratio = last / prev;
        last * ratio / (1.0 - ratio) / total
    } else {
        f64::INFINITY
    }
}

pub(crate) fn check_tail(terms: &[f64], tol: f64) -> Result<()> {
    let tail = geometric_tail(terms);
    if tail > tol {
        return Err(Error::IncreaseJmax { tail, tol });
    }
    Ok(())
}

pub(crate) fn support_cap(m: &Measure) -> Option<usize> {
    match m {
        Measure::SymHahn { l } | Measure::DiscreteChebyshev { l } => Some(*l as usize + 1),
        _ => None,
    }
}

/// Assembles the even-size kernel.
pub fn assemble_even(chain: &SliceChain, n: usize, opts: &KernelOptions) -> Result<CorrelationKernel> {
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("assemble_even needs even N, got {n}")));
    }
    CorrelationKernel::new(chain, n, opts)
}

/// Assembles the odd-size kernel with the barred blocks.
pub fn assemble_odd(chain: &SliceChain, n: usize, opts: &KernelOptions) -> Result<CorrelationKernel> {
    if n % 2 != 1 {
        return Err(Error::InvalidParameter(format!("assemble_odd needs odd N, got {n}")));
    }
    CorrelationKernel::new(chain, n, opts)
}

/// Solves `U x = b` on the leading `n × n` block of an upper-triangular `U`.
fn back_solve(u: &DenseMatrix<f64>, b: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let d = u[(i, i)];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::ZeroDiagonal(i));
        }
        let s: f64 = (i + 1..n).map(|j| u[(i, j)] * x[j]).sum();
        x[i] = (b.get(i).copied().unwrap_or(0.0) - s) / d;
    }
    Ok(x)
}

impl CorrelationKernel {
    pub fn new(chain: &SliceChain, n: usize, opts: &KernelOptions) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        let all_direct = (0..chain.len()).all(|m| chain.is_direct(m));
        let mut dim = if all_direct { n } else { chain.jmax.map_or(n + DEFAULT_EXTRA_TERMS, |j| j + 1).max(n) };
        let mut exact = false;
        for s in &chain.slices {
            if let Some(cap) = support_cap(&s.measure) {
                if n > cap {
                    return Err(Error::TruncatedBySupport { order: n - 1, support: cap });
                }
                dim = dim.min(cap);
                exact |= dim == cap;
            }
        }
        let families = chain.slices.iter().map(|s| build_family(&s.measure, dim - 1)).collect::<Result<Vec<_>>>()?;
        let links = chain.slices.iter().map(|s| s.link.matrix(dim)).collect::<Result<Vec<_>>>()?;
        let mut push = Vec::with_capacity(chain.len());
        let mut acc = DenseMatrix::identity(dim);
        for lam in &links {
            acc = acc.matmul(&lam.transpose())?;
            push.push(acc.clone());
        }
        let projection = chain.base.project(OrthonormalBasis::new(families[0].clone(), dim)?)?;
        let gram = projection.gram().as_dense().clone();
        let kn = AntisymMatrix::from_upper(n, |i, j| gram[(i, j)]);
        let polys = construct_from_gram(&kn, n, &opts.gauge)?;
        let last = push.last().expect("chain is non-empty");
        let sigma: Vec<f64> = (0..n).map(|k| last[(k, k)]).collect();
        if let Some(k) = sigma.iter().position(|s| !(s.abs() > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "links vanish at order {k} < N; the last slice cannot carry N polynomials"
            )));
        }
        let coef = DenseMatrix::from_fn(n, n, |k, j| polys.alpha()[(k, j)] * sigma[k]);
        let rcoef = push
            .iter()
            .map(|p| {
                let rows = (0..n).map(|k| back_solve(p, coef.row(k), n)).collect::<Result<Vec<_>>>()?;
                DenseMatrix::from_rows(&rows)
            })
            .collect::<Result<Vec<_>>>()?;
        let odd = if n % 2 == 1 {
            let fhat = match &opts.final_column {
                FinalColumn::Prefactor => projection
                    .totals()
                    .ok_or_else(|| {
                        Error::InvalidParameter(
                            "derivative kernels have no prefactor column; give explicit coefficients".into(),
                        )
                    })?
                    .to_vec(),
                FinalColumn::Coefficients { coeffs } => {
                    let mut c = coeffs.clone();
                    c.resize(dim, 0.0);
                    c
                }
            };
            let s: Vec<f64> = (0..n).map(|k| (0..=k).map(|j| coef[(k, j)] * fhat[j]).sum()).collect();
            let scale = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if !(s[n - 1].abs() > 1e-13 * scale) {
                return Err(Error::OddNormalizationVanishes);
            }
            let prefactor = matches!(opts.final_column, FinalColumn::Prefactor);
            Some(OddData { fhat, s, prefactor })
        } else {
            None
        };
        Ok(Self {
            chain: chain.clone(),
            n,
            dim,
            exact,
            families,
            push,
            links,
            gram,
            projection,
            polys,
            sigma,
            coef,
            rcoef,
            odd,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn chain(&self) -> &SliceChain {
        &self.chain
    }

    pub fn is_odd(&self) -> bool {
        self.odd.is_some()
    }

    /// Number of spectral terms kept.
    pub fn spectral_terms(&self) -> usize {
        self.dim
    }

    /// Skew-orthogonal set in base coordinates, unit leading coefficients.
    pub fn polys(&self) -> &SkewPolySet {
        &self.polys
    }

    /// Orthonormal family of slice `m`.
    pub fn family(&self, m: usize) -> &OrthoPolyFamily {
        &self.families[m]
    }

    fn last_slice(&self) -> usize {
        self.chain.len() - 1
    }

    /// From internal to monic scale.
    fn ln_monic_scale(&self, k: usize) -> f64 {
        0.5 * self.families[self.last_slice()].ln_h(k)
    }

    /// Monic skew-orthogonal polynomials at the last slice, over `C^{(M)}_j`.
    pub fn monic_polys(&self) -> Result<SkewPolySet> {
        let m = self.last_slice();
        let r = (0..self.n / 2).map(|k| self.r(k)).collect();
        let set = SkewPolySet::from_alpha(self.rcoef[m].clone(), r, self.polys.gauge().to_vec())?;
        let s: Vec<f64> = (0..self.n).map(|j| (-0.5 * self.families[m].ln_h(j)).exp()).collect();
        set.rescale_basis(&s)?.normalize_leading()
    }

    /// Pair norm `r_k` in the internal normalization.
    fn r(&self, k: usize) -> f64 {
        self.polys.r()[k] * self.sigma[2 * k] * self.sigma[2 * k + 1]
    }

    /// Monic `r_k`.
    pub fn r_monic(&self, k: usize) -> f64 {
        self.r(k) * (self.ln_monic_scale(2 * k) + self.ln_monic_scale(2 * k + 1)).exp()
    }

    /// Monic `s_k` for odd sizes.
    pub fn s_monic(&self, k: usize) -> Option<f64> {
        self.odd.as_ref().map(|o| o.s[k] * self.ln_monic_scale(k).exp())
    }

    /// `ln |Π r_{j-1}|` (times `|s_{N-1}|` for odd sizes) and its sign: the
    /// factor between the raw integral and the Pfaffian.
    pub fn ln_prefactor(&self) -> (f64, f64) {
        let mut ln = 0.0;
        let mut sign = 1.0;
        for k in 0..self.n / 2 {
            let r = self.r(k);
            ln += r.abs().ln() + self.ln_monic_scale(2 * k) + self.ln_monic_scale(2 * k + 1);
            sign *= r.signum();
        }
        if let Some(o) = &self.odd {
            let s = o.s[self.n - 1];
            ln += s.abs().ln() + self.ln_monic_scale(self.n - 1);
            sign *= s.signum();
        }
        (ln, sign)
    }

    fn check_tail(&self, terms: &[f64]) -> Result<()> {
        if self.exact {
            return Ok(());
        }
        check_tail(terms, self.chain.tail_tol)
    }

    /// Evaluates everything the blocks need at `x` on slice `m`.
    pub fn point(&self, m: usize, x: f64) -> Result<PointData> {
        if m >= self.chain.len() {
            return Err(Error::InvalidParameter(format!("slice {m} out of range")));
        }
        if !self.chain.slices[m].measure.contains(x) {
            return Err(Error::OutsideSupport { slice: m, x });
        }
        let n = self.n;
        let mut chat = vec![0.0; self.dim];
        self.families[m].orthonormal_into(x, &mut chat);
        let rc = &self.rcoef[m];
        let r: Vec<f64> = (0..n).map(|k| (0..n).map(|j| rc[(k, j)] * chat[j]).sum()).collect();
        let (route, psi, f) = if self.chain.is_direct(m) {
            let phi_all = self.projection.phi(x);
            let f = match &self.odd {
                None => 0.0,
                Some(o) if o.prefactor => self.chain.base.prefactor(x),
                Some(o) => chat.iter().zip(&o.fhat).map(|(a, b)| a * b).sum(),
            };
            let psi = phi_all[..n].to_vec();
            (Route::Direct { phi_all }, psi, f)
        } else {
            let omega = self.push[m].matvec(&chat)?;
            self.check_tail(&omega)?;
            let k_omega = self.gram.matvec(&omega)?;
            let psi = k_omega[..n].to_vec();
            let f = self.odd.as_ref().map_or(0.0, |o| omega.iter().zip(&o.fhat).map(|(a, b)| a * b).sum());
            (Route::Series { omega, k_omega }, psi, f)
        };
        let phi: Vec<f64> = (0..n).map(|k| (0..=k).map(|j| self.coef[(k, j)] * psi[j]).sum()).collect();
        let (r, phi) = match &self.odd {
            None => (r, phi),
            Some(o) => (self.bar(&r, o, -1.0), self.bar(&phi, o, -1.0)),
        };
        Ok(PointData { slice: m, x, r, phi, f, chat, route })
    }

    /// `v_k + sign (s_k/s_{N-1}) v_{N-1}` for `k < N-1`.
    fn bar(&self, v: &[f64], o: &OddData, sign: f64) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|k| if k + 1 < n { v[k] + sign * o.s[k] / o.s[n - 1] * v[n - 1] } else { v[k] }).collect()
    }

    /// Unbarred internal `(R_k, Φ_k)` at a point.
    fn unbarred(&self, m: usize, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.point(m, x)?;
        match &self.odd {
            None => Ok((p.r, p.phi)),
            Some(o) => Ok((self.bar(&p.r, o, 1.0), self.bar(&p.phi, o, 1.0))),
        }
    }

    /// Monic `R^{(m)}_k(x)`, a polynomial on every slice.
    pub fn propagate_r(&self, m: usize, k: usize, x: f64) -> Result<f64> {
        if m >= self.chain.len() || k >= self.n {
            return Err(Error::InvalidParameter(format!("no R_{k} on slice {m}")));
        }
        let chat = self.families[m].orthonormal(self.n - 1, x);
        let v: f64 = (0..self.n).map(|j| self.rcoef[m][(k, j)] * chat[j]).sum();
        Ok(v * self.ln_monic_scale(k).exp())
    }

    /// Monic `Φ^{(m)}_k(x)`.
    pub fn compute_phi(&self, m: usize, k: usize, x: f64) -> Result<f64> {
        Ok(self.unbarred(m, x)?.1[k] * self.ln_monic_scale(k).exp())
    }

    /// `f^{(m)}(x)` for odd sizes.
    pub fn final_column(&self, m: usize, x: f64) -> Result<Option<f64>> {
        let p = self.point(m, x)?;
        Ok(self.odd.as_ref().map(|_| p.f))
    }

    fn pairs(&self) -> usize {
        self.n / 2
    }

    /// `D^{(m,n)}(x,y)` (barred for odd sizes).
    pub fn d(&self, p: &PointData, q: &PointData) -> f64 {
        (0..self.pairs()).map(|k| (p.r[2 * k] * q.r[2 * k + 1] - p.r[2 * k + 1] * q.r[2 * k]) / self.r(k)).sum()
    }

    /// `S^{(m,n)}(x,y)` including the `-G` term for `m > n`.
    pub fn s(&self, p: &PointData, q: &PointData) -> Result<f64> {
        let mut v: f64 = (0..self.pairs())
            .map(|k| (p.phi[2 * k] * q.r[2 * k + 1] - p.phi[2 * k + 1] * q.r[2 * k]) / self.r(k))
            .sum();
        if let Some(o) = &self.odd {
            v += p.f * q.r[self.n - 1] / o.s[self.n - 1];
        }
        if p.slice > q.slice {
            v -= self.g(p, q)?;
        }
        Ok(v)
    }

    /// `I^{(m,n)}(x,y)` in the direct form.
    pub fn i(&self, p: &PointData, q: &PointData) -> f64 {
        let mut v: f64 = -(0..self.pairs())
            .map(|k| (p.phi[2 * k] * q.phi[2 * k + 1] - p.phi[2 * k + 1] * q.phi[2 * k]) / self.r(k))
            .sum::<f64>();
        if let Some(o) = &self.odd {
            let l = self.n - 1;
            v += (p.phi[l] * q.f - q.phi[l] * p.f) / o.s[l];
        }
        v + self.f_value(p, q)
    }

    /// `G^{(m,n)}(x,y)` for `m > n` by its spectral series.
    pub fn g(&self, p: &PointData, q: &PointData) -> Result<f64> {
        let (m, n) = (p.slice, q.slice);
        if m <= n {
            return Err(Error::InvalidParameter(format!("G^({m},{n}) is only a function for m > n")));
        }
        let mut v = q.chat.clone();
        for lam in &self.links[n + 1..=m] {
            v = lam.matvec(&v)?;
        }
        let terms: Vec<f64> = p.chat.iter().zip(&v).map(|(a, b)| a * b).collect();
        self.check_tail(&terms)?;
        Ok(terms.iter().sum())
    }

    /// `F^{(m,n)}(x,y)`.
    pub fn f_value(&self, p: &PointData, q: &PointData) -> f64 {
        // exact zero; truncated series far in the tail cancel badly here
        if p.slice == q.slice && p.x == q.x {
            return 0.0;
        }
        match (&p.route, &q.route) {
            (Route::Direct { .. }, Route::Direct { .. }) => self.chain.base.kernel_value(p.x, q.x),
            (Route::Series { omega, .. }, Route::Direct { phi_all }) => {
                omega.iter().zip(phi_all).map(|(a, b)| a * b).sum()
            }
            (Route::Direct { phi_all }, Route::Series { omega, .. }) => {
                -omega.iter().zip(phi_all).map(|(a, b)| a * b).sum::<f64>()
            }
            (Route::Series { omega, .. }, Route::Series { k_omega, .. }) => {
                omega.iter().zip(k_omega).map(|(a, b)| a * b).sum()
            }
        }
    }

    /// `I^{(m,n)}(x,y)` from the tail `Σ_{k ≥ N/2}` of the full spectral
    /// decomposition. Even sizes and series slices only.
    pub fn i_tail(&self, p: &PointData, q: &PointData) -> Result<f64> {
        let (Route::Series { k_omega: kp, .. }, Route::Series { k_omega: kq, .. }) = (&p.route, &q.route) else {
            return Err(Error::InvalidParameter("tail form needs series slices on both sides".into()));
        };
        if self.is_odd() {
            return Err(Error::InvalidParameter("tail form is implemented for even N".into()));
        }
        let full_dim = self.dim / 2 * 2;
        let k = AntisymMatrix::from_upper(full_dim, |i, j| self.gram[(i, j)]);
        let full = construct_from_gram(&k, full_dim, self.polys.gauge())?;
        let phi = |kv: &[f64], idx: usize| -> f64 { (0..=idx).map(|j| full.alpha()[(idx, j)] * kv[j]).sum() };
        let mut v = 0.0;
        for pair in self.pairs()..full_dim / 2 {
            let (a, b) = (2 * pair, 2 * pair + 1);
            v += (phi(kp, a) * phi(kq, b) - phi(kp, b) * phi(kq, a)) / full.r()[pair];
        }
        Ok(v)
    }

    /// The antisymmetric matrix for a list of points, validated before use.
    pub fn matrix(&self, pts: &[PointData]) -> Result<AntisymMatrix<f64>> {
        let k = pts.len();
        let mut a = DenseMatrix::zeros(2 * k, 2 * k);
        for (i, p) in pts.iter().enumerate() {
            for (j, q) in pts.iter().enumerate() {
                a[(2 * i, 2 * j)] = self.d(p, q);
                a[(2 * i, 2 * j + 1)] = self.s(q, p)?;
                a[(2 * i + 1, 2 * j)] = -self.s(p, q)?;
                a[(2 * i + 1, 2 * j + 1)] = -self.i(p, q);
            }
        }
        let scale = a.max_abs().max(1.0);
        AntisymMatrix::with_tolerance(a, 1e-9 * scale)
    }

    /// `Pf[A]` over the given points.
    pub fn pfaffian(&self, pts: &[PointData]) -> Result<f64> {
        pfaffian(&self.matrix(pts)?)
    }
}
