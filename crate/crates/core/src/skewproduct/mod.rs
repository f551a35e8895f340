//! Antisymmetric kernels `F(x,y)` and the skew inner product
//! `⟨f,g⟩ = ∫∫ dμ(x) dμ(y) f(x) g(y) F(x,y)`.
//!
//! Every supported kernel factors as `F(x,y) = p(x) p(y) k(x,y)`, so the
//! product only sees the effective weight `ν = w p` (sign and discrete
//! exponential kernels) or `ν = (w p)^2` (derivative kernels, after
//! integrating the `∂δ` by parts).

mod panels;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{AntisymMatrix, DenseMatrix};
use crate::measures::{ln_fact, quadrature, IntegrationRule, Measure};
use crate::orthopoly::OrthoPolyFamily;

use panels::{Panels, WeightShape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SkewKernel {
    /// `p(x) p(y) sgn(y-x)`.
    SignType,
    /// `2 p(x) p(y) ∂_x δ(x-y)`.
    DerivativeType,
    /// `q^{-(x+y)/2} α^{|y-x|/2} sgn(y-x)` on the geometric measure.
    DiscreteExpType { alpha: f64 },
}

/// A finite family of functions evaluated together.
pub trait Basis: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: f64, out: &mut [f64]);
    fn eval_with_derivative(&self, x: f64, out: &mut [f64], dout: &mut [f64]);
}

/// `1, x, …, x^{dim-1}`.
#[derive(Debug, Clone, Copy)]
pub struct Monomials {
    pub dim: usize,
}

impl Basis for Monomials {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: f64, out: &mut [f64]) {
        let mut p = 1.0;
        for o in out.iter_mut() {
            *o = p;
            p *= x;
        }
    }

    fn eval_with_derivative(&self, x: f64, out: &mut [f64], dout: &mut [f64]) {
        self.eval(x, out);
        for (j, d) in dout.iter_mut().enumerate() {
            *d = if j == 0 { 0.0 } else { j as f64 * out[j - 1] };
        }
    }
}

/// Arbitrary polynomials given by ascending monomial coefficients.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    polys: Vec<Vec<f64>>,
}

impl PolyBasis {
    pub fn new(polys: Vec<Vec<f64>>) -> Self {
        Self { polys }
    }
}

fn horner(c: &[f64], x: f64) -> (f64, f64) {
    let (mut v, mut d) = (0.0, 0.0);
    for &a in c.iter().rev() {
        d = d * x + v;
        v = v * x + a;
    }
    (v, d)
}

impl Basis for PolyBasis {
    fn dim(&self) -> usize {
        self.polys.len()
    }

    fn eval(&self, x: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.polys) {
            *o = horner(c, x).0;
        }
    }

    fn eval_with_derivative(&self, x: f64, out: &mut [f64], dout: &mut [f64]) {
        for ((o, d), c) in out.iter_mut().zip(dout.iter_mut()).zip(&self.polys) {
            (*o, *d) = horner(c, x);
        }
    }
}

/// Orthonormal `ĉ_j = C_j/√h_j`, `j < dim`.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    fam: OrthoPolyFamily,
    dim: usize,
}

impl OrthonormalBasis {
    pub fn new(fam: OrthoPolyFamily, dim: usize) -> Result<Self> {
        if dim == 0 || dim > fam.max_order() + 1 {
            return Err(Error::InvalidParameter(format!(
                "basis of size {dim} needs family order {}",
                dim.saturating_sub(1)
            )));
        }
        Ok(Self { fam, dim })
    }

    pub fn family(&self) -> &OrthoPolyFamily {
        &self.fam
    }
}

impl Basis for OrthonormalBasis {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: f64, out: &mut [f64]) {
        self.fam.orthonormal_into(x, out);
    }

    fn eval_with_derivative(&self, x: f64, out: &mut [f64], dout: &mut [f64]) {
        let (p, d) = self.fam.orthonormal_with_derivative(self.dim - 1, x);
        out.copy_from_slice(&p);
        dout.copy_from_slice(&d);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Continuous(WeightShape),
    /// Integration is exact with Gauss rules of this measure.
    Derivative(Measure),
    Discrete,
}

/// A validated (measure, kernel) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewSetup {
    measure: Measure,
    kernel: SkewKernel,
    shape: Shape,
}

impl SkewSetup {
    pub fn new(measure: Measure, kernel: SkewKernel) -> Result<Self> {
        measure.validate()?;
        let mismatch = || Err(Error::KernelMeasureMismatch(format!("{kernel:?} is not available for {measure:?}")));
        let plain = |lo, hi, k0, c1, c2| Shape::Continuous(WeightShape { lo, hi, e_lo: 0.0, e_hi: 0.0, k0, c1, c2 });
        let inf = f64::INFINITY;
        let shape = match (kernel, measure) {
            (SkewKernel::SignType, Measure::Hermite) => plain(-inf, inf, 0.0, 0.0, 0.5),
            (SkewKernel::SignType, Measure::Gaussian { variance }) => {
                plain(-inf, inf, -0.5 * (2.0 * std::f64::consts::PI * variance).ln(), 0.0, 0.5 / variance)
            }
            (SkewKernel::SignType, Measure::Laguerre { a }) => Shape::Continuous(WeightShape {
                lo: 0.0,
                hi: inf,
                e_lo: 0.5 * (a - 1.0),
                e_hi: 0.0,
                k0: 0.0,
                c1: 0.5,
                c2: 0.0,
            }),
            (SkewKernel::SignType, Measure::Jacobi { a, b }) => Shape::Continuous(WeightShape {
                lo: -1.0,
                hi: 1.0,
                e_lo: 0.5 * (b - 1.0),
                e_hi: 0.5 * (a - 1.0),
                k0: 0.0,
                c1: 0.0,
                c2: 0.0,
            }),
            (SkewKernel::SignType, Measure::SymHahn { .. } | Measure::DiscreteChebyshev { .. }) => Shape::Discrete,
            (SkewKernel::DerivativeType, Measure::Hermite) => Shape::Derivative(Measure::Hermite),
            (SkewKernel::DerivativeType, Measure::Laguerre { a }) => {
                Shape::Derivative(Measure::Laguerre { a: a + 1.0 })
            }
            (SkewKernel::DerivativeType, Measure::Jacobi { a, b }) => {
                Shape::Derivative(Measure::Jacobi { a: a + 1.0, b: b + 1.0 })
            }
            (SkewKernel::DiscreteExpType { alpha }, Measure::DiscreteExp { q }) => {
                if !(alpha > 0.0 && alpha * q < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "discrete exponential kernel needs 0 < alpha < 1/q, got alpha = {alpha}"
                    )));
                }
                Shape::Discrete
            }
            _ => return mismatch(),
        };
        Ok(Self { measure, kernel, shape })
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn kernel(&self) -> &SkewKernel {
        &self.kernel
    }

    pub fn is_derivative(&self) -> bool {
        matches!(self.shape, Shape::Derivative(_))
    }

    /// `ln p(x)` where `F(x,y) = p(x) p(y) k(x,y)`.
    pub fn ln_prefactor(&self, x: f64) -> f64 {
        let case2 = self.is_derivative();
        let s = if case2 { -1.0 } else { 1.0 };
        match self.measure {
            Measure::Hermite => 0.5 * x * x,
            Measure::Gaussian { .. } | Measure::DiscreteChebyshev { .. } => 0.0,
            Measure::Laguerre { a } => -0.5 * (a + s) * x.ln() + 0.5 * x,
            Measure::Jacobi { a, b } => -0.5 * (a + s) * (1.0 - x).ln() - 0.5 * (b + s) * (1.0 + x).ln(),
            Measure::SymHahn { l } => {
                let h = l as f64 / 2.0;
                ln_fact(h + x) + ln_fact(h - x)
            }
            Measure::DiscreteExp { q } => -0.5 * x * q.ln(),
        }
    }

    pub fn prefactor(&self, x: f64) -> f64 {
        self.ln_prefactor(x).exp()
    }

    /// Effective weight `ν(x)`.
    pub fn nu(&self, x: f64) -> f64 {
        match self.shape {
            Shape::Continuous(s) => s.ln_nu(x).exp(),
            Shape::Derivative(m) => m.weight(x),
            Shape::Discrete => (self.measure.ln_weight(x) + self.ln_prefactor(x)).exp(),
        }
    }

    /// `F(x,y)` pointwise. Derivative kernels vanish off the diagonal and
    /// are reported as 0 everywhere.
    pub fn kernel_value(&self, x: f64, y: f64) -> f64 {
        let sgn = sign(y - x);
        match self.kernel {
            SkewKernel::DerivativeType => 0.0,
            SkewKernel::SignType => {
                if sgn == 0.0 {
                    0.0
                } else {
                    sgn * (self.ln_prefactor(x) + self.ln_prefactor(y)).exp()
                }
            }
            SkewKernel::DiscreteExpType { alpha } => {
                if sgn == 0.0 {
                    0.0
                } else {
                    let ln = self.ln_prefactor(x) + self.ln_prefactor(y) + 0.5 * (y - x).abs() * alpha.ln();
                    sgn * ln.exp()
                }
            }
        }
    }

    /// Skew Gram, totals `∫ν b_j` and the data needed to evaluate
    /// `Φ_{b_j}(x) = ∫ dμ(y) b_j(y) F(y,x)` for every basis function.
    pub fn project<B: Basis>(&self, basis: B) -> Result<SkewProjection<B>> {
        let dim = basis.dim();
        let mut a = vec![0.0; dim * dim];
        let mut totals = None;
        let mut panels = None;
        let mut nodes = None;
        match self.shape {
            Shape::Continuous(shape) => {
                let (p, acc) = Panels::build(shape, &self.measure, &basis)?;
                totals = Some(p.total().to_vec());
                a = acc;
                panels = Some(p);
            }
            Shape::Derivative(m) => {
                let rule = quadrature(&m, dim + 1)?;
                let (mut v, mut d) = (vec![0.0; dim], vec![0.0; dim]);
                // ∫ν (b_j b_l' - b_j' b_l); accumulate the b_j b_l' half
                for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
                    basis.eval_with_derivative(y, &mut v, &mut d);
                    for j in 0..dim {
                        let c = w * v[j];
                        for l in 0..dim {
                            a[j * dim + l] += c * d[l];
                        }
                    }
                }
            }
            Shape::Discrete => {
                let rule = self.measure.discrete_rule(dim)?;
                let rho = match self.kernel {
                    SkewKernel::DiscreteExpType { alpha } => alpha.sqrt(),
                    _ => 1.0,
                };
                let mut prefix = vec![0.0; dim];
                let mut tot = vec![0.0; dim];
                let mut v = vec![0.0; dim];
                let mut last: Option<f64> = None;
                for &y in &rule.nodes {
                    if let Some(x0) = last {
                        let decay = rho.powf(y - x0);
                        prefix.iter_mut().for_each(|p| *p *= decay);
                    }
                    basis.eval(y, &mut v);
                    let nu = self.nu(y);
                    for j in 0..dim {
                        let c = nu * prefix[j];
                        if c != 0.0 {
                            for l in 0..dim {
                                a[j * dim + l] += c * v[l];
                            }
                        }
                    }
                    for j in 0..dim {
                        prefix[j] += nu * v[j];
                        tot[j] += nu * v[j];
                    }
                    last = Some(y);
                }
                totals = Some(tot);
                nodes = Some(rule);
            }
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::KernelMeasureMismatch("non-finite skew product".into()));
        }
        let gram = AntisymMatrix::from_upper(dim, |j, l| a[j * dim + l] - a[l * dim + j]);
        Ok(SkewProjection { setup: *self, basis, gram, totals, panels, nodes })
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Skew-product data of a basis under a fixed setup.
#[derive(Debug, Clone)]
pub struct SkewProjection<B> {
    setup: SkewSetup,
    basis: B,
    gram: AntisymMatrix<f64>,
    totals: Option<Vec<f64>>,
    panels: Option<Panels>,
    nodes: Option<IntegrationRule>,
}

impl<B: Basis> SkewProjection<B> {
    pub fn setup(&self) -> &SkewSetup {
        &self.setup
    }

    pub fn basis(&self) -> &B {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `K_{jl} = ⟨b_j, b_l⟩`.
    pub fn gram(&self) -> &AntisymMatrix<f64> {
        &self.gram
    }

    /// `∫ dμ b_j p`, the coefficients of the prefactor column used for odd
    /// sizes. Absent for derivative kernels.
    pub fn totals(&self) -> Option<&[f64]> {
        self.totals.as_deref()
    }

    /// `Φ_{b_j}(x)` for all `j`.
    pub fn phi(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.phi_into(x, &mut out);
        out
    }

    pub fn phi_into(&self, x: f64, out: &mut [f64]) {
        let dim = self.dim();
        let s = &self.setup;
        if let Some(p) = &self.panels {
            p.partial_at(x, &self.basis, out);
            let pre = s.prefactor(x);
            let tot = p.total();
            for (o, &t) in out.iter_mut().zip(tot) {
                *o = pre * (2.0 * *o - t);
            }
        } else if let Some(rule) = &self.nodes {
            let rho = match s.kernel {
                SkewKernel::DiscreteExpType { alpha } => alpha.sqrt(),
                _ => 1.0,
            };
            out.iter_mut().for_each(|o| *o = 0.0);
            let mut v = vec![0.0; dim];
            for &y in &rule.nodes {
                let sg = sign(x - y);
                if sg == 0.0 {
                    continue;
                }
                self.basis.eval(y, &mut v);
                let c = sg * s.nu(y) * rho.powf((x - y).abs());
                for (o, &b) in out.iter_mut().zip(&v) {
                    *o += c * b;
                }
            }
            let pre = s.prefactor(x);
            out.iter_mut().for_each(|o| *o *= pre);
        } else {
            // Φ = -(ν' b + 2 ν b') / w
            let (nu_w, dnu_w) = match s.measure {
                Measure::Hermite => (1.0, -2.0 * x),
                Measure::Laguerre { a } => (x, a + 1.0 - x),
                Measure::Jacobi { a, b } => (1.0 - x * x, -(a + 1.0) * (1.0 + x) + (b + 1.0) * (1.0 - x)),
                _ => unreachable!("derivative kernels are validated at setup"),
            };
            let mut d = vec![0.0; dim];
            self.basis.eval_with_derivative(x, out, &mut d);
            for (o, &db) in out.iter_mut().zip(&d) {
                *o = -(dnu_w * *o + 2.0 * nu_w * db);
            }
        }
    }
}

/// `⟨f, g⟩` for polynomials in ascending monomial coefficients.
pub fn skew_inner(kernel: SkewKernel, measure: Measure, f: &[f64], g: &[f64]) -> Result<f64> {
    let setup = SkewSetup::new(measure, kernel)?;
    let proj = setup.project(PolyBasis::new(vec![f.to_vec(), g.to_vec()]))?;
    Ok(proj.gram().as_dense()[(0, 1)])
}

/// Monomial Gram `J_{jl} = ⟨x^j, x^l⟩`, `0 ≤ j,l < n`.
pub fn gram(kernel: SkewKernel, measure: Measure, n: usize) -> Result<AntisymMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("gram size must be at least 1".into()));
    }
    let setup = SkewSetup::new(measure, kernel)?;
    Ok(setup.project(Monomials { dim: n })?.gram().clone())
}

/// `Bᵀ K B` for a coefficient matrix whose columns express new functions.
pub fn transform_gram(k: &AntisymMatrix<f64>, coeffs: &DenseMatrix<f64>) -> Result<AntisymMatrix<f64>> {
    k.congruence(coeffs)
}
