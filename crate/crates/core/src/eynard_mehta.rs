//! Determinantal kernel of a chain of coupled hermitian slices.
//!
//! Monic biorthogonal families `P_j` (last slice) and `Q_j` (first slice)
//! are built by two-sided elimination of the pairing matrix
//! `B_{jl} = ∫∫ G(x,y) C^{last}_j(x) C^{first}_l(y)`, and the kernel is
//! `Σ_{k<N} Q^{(m)}_k(x) P^{(n)}_k(y) / h_k − G^{(m,n)}(x,y)` with the
//! transition term present only for `m > n`.

use crate::error::{Error, Result};
use crate::kernels::{check_tail, support_cap, SliceChain, SliceSpec, DEFAULT_EXTRA_TERMS, DEFAULT_TAIL_TOL};
use crate::linalg::{determinant, DenseMatrix};
use crate::measures::Measure;
use crate::orthopoly::{build_family, OrthoPolyFamily};

/// Hermitian slices joined by links; the first slice's link is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianChain {
    slices: Vec<SliceSpec>,
    jmax: Option<usize>,
    tail_tol: f64,
}

impl HermitianChain {
    pub fn new(slices: Vec<SliceSpec>) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::InvalidParameter("a chain needs at least one slice".into()));
        }
        for s in &slices {
            s.measure.validate()?;
        }
        Ok(Self { slices, jmax: None, tail_tol: DEFAULT_TAIL_TOL })
    }

    /// Slices `first..` of a skew chain.
    pub fn from_chain(chain: &SliceChain, first: usize) -> Result<Self> {
        if first >= chain.len() {
            return Err(Error::InvalidParameter(format!("chain has {} slices, cannot start at {first}", chain.len())));
        }
        let mut c = Self::new((first..chain.len()).map(|m| chain.slice(m).clone()).collect())?;
        c.jmax = chain.jmax();
        c.tail_tol = chain.tail_tol();
        Ok(c)
    }

    /// Hermite slices at increasing times joined by Ornstein steps.
    pub fn dyson(taus: &[f64]) -> Result<Self> {
        use crate::kernels::Link;
        if taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(format!("times must increase, got {taus:?}")));
        }
        let slices = taus
            .iter()
            .enumerate()
            .map(|(i, &t)| SliceSpec {
                measure: Measure::Hermite,
                link: if i == 0 { Link::Identity } else { Link::Ornstein { dt: t - taus[i - 1] } },
            })
            .collect();
        Self::new(slices)
    }

    pub fn with_jmax(mut self, jmax: usize) -> Self {
        self.jmax = Some(jmax);
        self
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
}

/// Monic biorthogonal polynomials with their pairings.
#[derive(Debug, Clone)]
pub struct BiorthoSet {
    chain: HermitianChain,
    n: usize,
    dim: usize,
    exact: bool,
    families: Vec<OrthoPolyFamily>,
    /// `Λ` of slice `p` to `p-1`, for `p ≥ 1`.
    links: Vec<DenseMatrix<f64>>,
    /// `P_j = Σ_k p_{jk} C^{last}_k`.
    p: DenseMatrix<f64>,
    /// `Q_j = Σ_k q_{jk} C^{first}_k`.
    q: DenseMatrix<f64>,
    h: Vec<f64>,
    /// `Q_j` pushed to every slice, on that slice's orthonormal basis.
    q_hat: Vec<DenseMatrix<f64>>,
    /// `P_j` pulled back to every slice, on that slice's orthonormal basis.
    p_hat: Vec<DenseMatrix<f64>>,
}

/// Evaluation data at one point.
#[derive(Debug, Clone)]
pub struct EmPoint {
    slice: usize,
    chat: Vec<f64>,
    q: Vec<f64>,
    p: Vec<f64>,
}

/// Builds `P`, `Q` and `h` for the first `n` orders.
pub fn biorthogonalize(chain: &HermitianChain, n: usize) -> Result<BiorthoSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let single = chain.len() == 1;
    let mut dim = if single { n } else { chain.jmax.map_or(n + DEFAULT_EXTRA_TERMS, |j| j + 1).max(n) };
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
    let links = chain.slices[1..].iter().map(|s| s.link.matrix(dim)).collect::<Result<Vec<_>>>()?;
    let last = chain.len() - 1;
    // T_m maps first-slice coefficients to slice m
    let mut forward = vec![DenseMatrix::identity(dim)];
    for lam in &links {
        let next = lam.matmul(forward.last().expect("non-empty"))?;
        forward.push(next);
    }
    let (fl, ff) = (&families[last], &families[0]);
    let total = &forward[last];
    let b = DenseMatrix::from_fn(n, n, |j, l| total[(j, l)] * (0.5 * (fl.ln_h(j) + ff.ln_h(l))).exp());
    let (lower, h, upper) = ldu(&b)?;
    let p = invert_unit_lower(&lower);
    let q = invert_unit_lower(&upper.transpose());
    let q_first = DenseMatrix::from_fn(n, dim, |k, l| if l < n { q[(k, l)] * (0.5 * ff.ln_h(l)).exp() } else { 0.0 });
    let p_last = DenseMatrix::from_fn(n, dim, |k, l| if l < n { p[(k, l)] * (0.5 * fl.ln_h(l)).exp() } else { 0.0 });
    let q_hat = forward.iter().map(|t| q_first.matmul(&t.transpose())).collect::<Result<Vec<_>>>()?;
    // pull P back through Λ^{(last)} ⋯ Λ^{(m+1)}
    let mut p_hat = vec![p_last.clone()];
    for lam in links.iter().rev() {
        let next = p_hat.last().expect("non-empty").matmul(lam)?;
        p_hat.push(next);
    }
    p_hat.reverse();
    Ok(BiorthoSet { chain: chain.clone(), n, dim, exact, families, links, p, q, h, q_hat, p_hat })
}

/// `B = L D U` with unit triangular `L`, `U`.
fn ldu(b: &DenseMatrix<f64>) -> Result<(DenseMatrix<f64>, Vec<f64>, DenseMatrix<f64>)> {
    let n = b.rows();
    let mut a = b.clone();
    let mut l = DenseMatrix::identity(n);
    let mut u = DenseMatrix::identity(n);
    let mut d = vec![0.0; n];
    let scale = b.max_abs();
    for k in 0..n {
        let piv = a[(k, k)];
        if !(piv.abs() > 1e-13 * scale) {
            return Err(Error::SingularPairing(k));
        }
        d[k] = piv;
        for i in k + 1..n {
            l[(i, k)] = a[(i, k)] / piv;
            u[(k, i)] = a[(k, i)] / piv;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[(i, j)] -= l[(i, k)] * piv * u[(k, j)];
            }
        }
    }
    Ok((l, d, u))
}

fn invert_unit_lower(l: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    let n = l.rows();
    let mut inv = DenseMatrix::identity(n);
    for i in 0..n {
        for j in 0..i {
            let s: f64 = (j..i).map(|k| l[(i, k)] * inv[(k, j)]).sum();
            inv[(i, j)] = -s;
        }
    }
    inv
}

impl BiorthoSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn chain(&self) -> &HermitianChain {
        &self.chain
    }

    /// Pairing constants `h_j`.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Monic coefficients of `P_j` on the last slice's orthogonal polynomials.
    pub fn p_coeffs(&self) -> &DenseMatrix<f64> {
        &self.p
    }

    /// Monic coefficients of `Q_j` on the first slice's orthogonal polynomials.
    pub fn q_coeffs(&self) -> &DenseMatrix<f64> {
        &self.q
    }

    /// Largest `|∫∫ G P_j Q_l| / h` over `j ≠ l`, from the coefficients.
    pub fn pairing_residual(&self) -> Result<f64> {
        let last = self.chain.len() - 1;
        let mut worst = 0.0f64;
        for j in 0..self.n {
            for l in 0..self.n {
                let v: f64 = (0..self.dim).map(|i| self.p_hat[last][(j, i)] * self.q_hat[last][(l, i)]).sum();
                let want = if j == l { self.h[j] } else { 0.0 };
                worst = worst.max((v - want).abs() / self.h[j.min(l)].abs());
            }
        }
        Ok(worst)
    }

    pub fn point(&self, m: usize, x: f64) -> Result<EmPoint> {
        if m >= self.chain.len() {
            return Err(Error::InvalidParameter(format!("slice {m} out of range")));
        }
        if !self.chain.slices[m].measure.contains(x) {
            return Err(Error::OutsideSupport { slice: m, x });
        }
        let mut chat = vec![0.0; self.dim];
        self.families[m].orthonormal_into(x, &mut chat);
        let q = self.q_hat[m].matvec(&chat)?;
        let p = self.p_hat[m].matvec(&chat)?;
        if !self.exact && m > 0 {
            for k in 0..self.n {
                let terms: Vec<f64> = (0..self.dim).map(|i| self.q_hat[m][(k, i)] * chat[i]).collect();
                check_tail(&terms, self.chain.tail_tol)?;
            }
        }
        Ok(EmPoint { slice: m, chat, q, p })
    }

    /// `Q^{(m)}_k(x)`.
    pub fn q_value(&self, m: usize, k: usize, x: f64) -> Result<f64> {
        Ok(self.point(m, x)?.q[k])
    }

    /// `P^{(m)}_k(x)`.
    pub fn p_value(&self, m: usize, k: usize, x: f64) -> Result<f64> {
        Ok(self.point(m, x)?.p[k])
    }

    /// Transition density `G^{(m,n)}(x,y)` for `m > n`.
    pub fn transition(&self, a: &EmPoint, b: &EmPoint) -> Result<f64> {
        if a.slice <= b.slice {
            return Err(Error::InvalidParameter("transition needs a later first slice".into()));
        }
        let mut v = b.chat.clone();
        for lam in &self.links[b.slice..a.slice] {
            v = lam.matvec(&v)?;
        }
        let terms: Vec<f64> = a.chat.iter().zip(&v).map(|(x, y)| x * y).collect();
        if !self.exact {
            check_tail(&terms, self.chain.tail_tol)?;
        }
        Ok(terms.iter().sum())
    }

    /// Kernel between two points.
    pub fn kernel(&self, a: &EmPoint, b: &EmPoint) -> Result<f64> {
        let mut v: f64 = (0..self.n).map(|k| a.q[k] * b.p[k] / self.h[k]).sum();
        if a.slice > b.slice {
            v -= self.transition(a, b)?;
        }
        Ok(v)
    }
}

/// Correlation of points `(slice, x)`: the determinant of the kernel matrix.
pub fn em_correlation(set: &BiorthoSet, pts: &[(usize, f64)]) -> Result<f64> {
    if pts.is_empty() {
        return Ok(1.0);
    }
    let data = pts.iter().map(|&(m, x)| set.point(m, x)).collect::<Result<Vec<_>>>()?;
    let mut k = DenseMatrix::zeros(pts.len(), pts.len());
    for (i, a) in data.iter().enumerate() {
        for (j, b) in data.iter().enumerate() {
            k[(i, j)] = set.kernel(a, b)?;
        }
    }
    determinant(&k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Link;
    use crate::measures::quadrature;
    use std::f64::consts::PI;

    /// Monic Hermite polynomials for `e^{-x²}`.
    fn monic_hermite(n: usize, x: f64) -> f64 {
        let (mut a, mut b) = (0.0, 1.0);
        for k in 0..n {
            let c = x * b - 0.5 * k as f64 * a;
            a = b;
            b = c;
        }
        b
    }

    fn hermite_h(n: usize) -> f64 {
        PI.sqrt() * (1..=n).map(|k| k as f64 / 2.0).product::<f64>()
    }

    #[test]
    fn single_slice_is_orthogonal_family() {
        let set = biorthogonalize(&HermitianChain::dyson(&[0.0]).unwrap(), 5).unwrap();
        for j in 0..5 {
            assert!((set.h()[j] - hermite_h(j)).abs() < 1e-12 * hermite_h(j));
            for k in 0..5 {
                let want = if j == k { 1.0 } else { 0.0 };
                assert_eq!(set.p_coeffs()[(j, k)], want);
                assert_eq!(set.q_coeffs()[(j, k)], want);
            }
        }
        assert!((set.q_value(0, 0, 0.7).unwrap() - 1.0).abs() < 1e-14);
        assert!((set.p_value(0, 0, -1.3).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn density_is_christoffel_darboux_diagonal() {
        let n = 6;
        let set = biorthogonalize(&HermitianChain::dyson(&[0.0]).unwrap(), n).unwrap();
        for x in [-2.0f64, -0.3, 0.0, 1.1] {
            let eps = 1e-5;
            let d = |k: usize| (monic_hermite(k, x + eps) - monic_hermite(k, x - eps)) / (2.0 * eps);
            let want = (d(n) * monic_hermite(n - 1, x) - d(n - 1) * monic_hermite(n, x)) / hermite_h(n - 1);
            let got = em_correlation(&set, &[(0, x)]).unwrap();
            assert!((got - want).abs() < 1e-8 * want, "x={x}: {got} vs {want}");
        }
        assert_eq!(em_correlation(&set, &[]).unwrap(), 1.0);
    }

    #[test]
    fn two_slice_pairing_matches_quadrature() {
        let dt = 0.4;
        let set = biorthogonalize(&HermitianChain::dyson(&[0.1, 0.1 + dt]).unwrap().with_jmax(120), 4).unwrap();
        let rule = quadrature(&Measure::Hermite, 50).unwrap();
        let r = (-dt).exp();
        let mehler = |x: f64, y: f64| {
            let d = 1.0 - r * r;
            (-0.5 * dt).exp() / (PI.sqrt() * d.sqrt()) * ((2.0 * r * x * y - r * r * (x * x + y * y)) / d).exp()
        };
        for j in 0..4 {
            for l in 0..4 {
                let v =
                    rule.integrate(|x| rule.integrate(|y| mehler(x, y) * monic_hermite(j, x) * monic_hermite(l, y)));
                let want = if j == l { set.h()[j] } else { 0.0 };
                assert!((v - want).abs() < 1e-9 * set.h()[j.min(l)], "({j},{l}): {v} vs {want}");
            }
            let ratio = set.h()[j] / hermite_h(j);
            assert!((ratio - (-(j as f64 + 0.5) * dt).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn triangular_links_biorthogonalize() {
        let rows = vec![vec![0.9], vec![0.2, 0.7], vec![-0.1, 0.3, 0.5], vec![0.05, 0.0, 0.2, 0.4]];
        let chain = HermitianChain::new(vec![
            SliceSpec { measure: Measure::Hermite, link: Link::Identity },
            SliceSpec { measure: Measure::Laguerre { a: 1.0 }, link: Link::Triangular { rows } },
        ])
        .unwrap();
        let set = biorthogonalize(&chain, 4).unwrap();
        assert!(set.pairing_residual().unwrap() < 1e-12);
        for k in 0..4 {
            assert_eq!(set.p_coeffs()[(k, k)], 1.0);
            assert_eq!(set.q_coeffs()[(k, k)], 1.0);
        }
    }

    #[test]
    fn hierarchy_integrates_to_lower_order() {
        let n = 4;
        let set = biorthogonalize(&HermitianChain::dyson(&[0.0, 0.7]).unwrap().with_jmax(80), n).unwrap();
        let rule = quadrature(&Measure::Hermite, 40).unwrap();
        for (m, x) in [(0, 0.3), (1, -0.8)] {
            let one = em_correlation(&set, &[(m, x)]).unwrap();
            let two = rule.integrate(|y| em_correlation(&set, &[(m, x), (m, y)]).unwrap());
            assert!((two - (n as f64 - 1.0) * one).abs() < 1e-6 * one);
        }
    }

    #[test]
    fn singular_pairing_rejected() {
        let chain = HermitianChain::new(vec![
            SliceSpec { measure: Measure::Hermite, link: Link::Identity },
            SliceSpec { measure: Measure::Hermite, link: Link::Truncated { rank: 2, inner: Box::new(Link::Identity) } },
        ])
        .unwrap();
        assert!(matches!(biorthogonalize(&chain, 3), Err(Error::SingularPairing(2))));
    }
}
