//! Skew-orthogonal polynomials.
//!
//! A [`SkewPolySet`] stores `R_k = Σ_j α_{kj} b_j` over some triangular basis
//! `b_j` (degree `j`), the inverse expansion `b_k = Σ_j β_{kj} R_j`, and the
//! pair norms `r_k = ⟨R_{2k}, R_{2k+1}⟩`.

use crate::error::{Error, Result};
use crate::linalg::{AntisymMatrix, DenseMatrix};
use crate::measures::{ln_fact, Measure};
use crate::skewproduct::SkewKernel;

/// Relative size below which a pair norm counts as degenerate.
const DEGENERATE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct SkewPolySet {
    alpha: DenseMatrix<f64>,
    beta: DenseMatrix<f64>,
    r: Vec<f64>,
    gauge: Vec<f64>,
}

impl SkewPolySet {
    /// Builds a set from lower-triangular coefficients; `β` is derived.
    pub fn from_alpha(alpha: DenseMatrix<f64>, r: Vec<f64>, gauge: Vec<f64>) -> Result<Self> {
        let beta = invert_expansion(&alpha)?;
        Ok(Self { alpha, beta, r, gauge })
    }

    pub fn order(&self) -> usize {
        self.alpha.rows()
    }

    pub fn alpha(&self) -> &DenseMatrix<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DenseMatrix<f64> {
        &self.beta
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn gauge(&self) -> &[f64] {
        &self.gauge
    }

    /// Coefficients of `R_k` (length `order`).
    pub fn coeffs(&self, k: usize) -> &[f64] {
        self.alpha.row(k)
    }

    /// Re-expresses the set over `b'_j = b_j / s_j`.
    pub fn rescale_basis(&self, s: &[f64]) -> Result<Self> {
        let n = self.order();
        if s.len() < n {
            return Err(Error::Shape(format!("{} scale factors for order {n}", s.len())));
        }
        let alpha = DenseMatrix::from_fn(n, n, |k, j| self.alpha[(k, j)] * s[j]);
        Self::from_alpha(alpha, self.r.clone(), self.gauge.clone())
    }

    /// Divides each `R_k` by its leading coefficient.
    pub fn normalize_leading(&self) -> Result<Self> {
        let n = self.order();
        let lead: Vec<f64> = (0..n).map(|k| self.alpha[(k, k)]).collect();
        if let Some(k) = lead.iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroDiagonal(k));
        }
        let alpha = DenseMatrix::from_fn(n, n, |k, j| self.alpha[(k, j)] / lead[k]);
        let r = self.r.iter().enumerate().map(|(k, &rk)| rk / (lead[2 * k] * lead[2 * k + 1])).collect();
        Self::from_alpha(alpha, r, self.gauge.clone())
    }

    /// Skew Gram of the `R_k` given the basis Gram `K`.
    pub fn skew_moments(&self, k: &AntisymMatrix<f64>) -> Result<AntisymMatrix<f64>> {
        let n = self.order();
        let kd = k.as_dense();
        let c = DenseMatrix::from_fn(kd.rows(), n, |j, col| if j < n { self.alpha[(col, j)] } else { 0.0 });
        k.congruence(&c)
    }

    /// Largest deviation from the skew-orthogonality relations, relative
    /// to `max |r_k|`.
    pub fn residual(&self, k: &AntisymMatrix<f64>) -> Result<f64> {
        let m = self.skew_moments(k)?;
        let md = m.as_dense();
        let n = self.order();
        let scale = self.r.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let want = if i % 2 == 0 && j == i + 1 { self.r[i / 2] } else { 0.0 };
                worst = worst.max((md[(i, j)] - want).abs());
            }
        }
        Ok(worst / scale)
    }
}

/// Skew Gram–Schmidt on the Gram matrix of a triangular basis. `R_k` has
/// unit coefficient on `b_k`; `R_{2k+1}` has zero `b_{2k}` component plus
/// `gauge[k]·R_{2k}`. Missing gauge entries are zero.
pub fn construct_from_gram(j: &AntisymMatrix<f64>, n: usize, gauge: &[f64]) -> Result<SkewPolySet> {
    let dim = j.dim();
    if n == 0 || n > dim {
        return Err(Error::InvalidParameter(format!("order {n} for a Gram of size {dim}")));
    }
    let jd = j.as_dense();
    let skew = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for (p, &ap) in a.iter().enumerate() {
            if ap == 0.0 {
                continue;
            }
            let row = jd.row(p);
            s += ap * row[..n].iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        }
        s
    };
    let scale = jd.max_abs().max(f64::MIN_POSITIVE);
    let unit = |i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r: Vec<f64> = Vec::new();
    let project = |e: &mut Vec<f64>, rows: &[Vec<f64>], r: &[f64]| {
        // two passes against earlier pairs for numerical stability
        for _ in 0..2 {
            for (p, &rp) in r.iter().enumerate() {
                let (a, b) = (&rows[2 * p], &rows[2 * p + 1]);
                let eb = skew(e, b);
                let ea = skew(e, a);
                for ((x, &ai), &bi) in e.iter_mut().zip(a).zip(b) {
                    *x += -eb / rp * ai + ea / rp * bi;
                }
            }
        }
    };
    let pairs = n / 2;
    let mut v = Vec::with_capacity(pairs);
    for k in 0..pairs {
        let mut e0 = unit(2 * k);
        let mut e1 = unit(2 * k + 1);
        project(&mut e0, &rows, &r);
        project(&mut e1, &rows, &r);
        let rk = skew(&e0, &e1);
        if !(rk.abs() > DEGENERATE * scale) {
            return Err(Error::DegenerateSkewMoments(k));
        }
        let vk = gauge.get(k).copied().unwrap_or(0.0);
        let shift = e1[2 * k] - vk;
        for (x, &y) in e1.iter_mut().zip(&e0) {
            *x -= shift * y;
        }
        rows.push(e0);
        rows.push(e1);
        r.push(rk);
        v.push(vk);
    }
    if n % 2 == 1 {
        let mut e = unit(n - 1);
        project(&mut e, &rows, &r);
        rows.push(e);
    }
    let alpha = DenseMatrix::from_fn(n, n, |k, j| if j <= k { rows[k][j] } else { 0.0 });
    SkewPolySet::from_alpha(alpha, r, v)
}

/// Inverse of a lower-triangular expansion by forward substitution.
pub fn invert_expansion(alpha: &DenseMatrix<f64>) -> Result<DenseMatrix<f64>> {
    if !alpha.is_square() {
        return Err(Error::NotSquare { rows: alpha.rows(), cols: alpha.cols() });
    }
    let n = alpha.rows();
    for k in 0..n {
        if alpha[(k, k)] == 0.0 {
            return Err(Error::ZeroDiagonal(k));
        }
    }
    let mut beta = DenseMatrix::zeros(n, n);
    // solve α β = I column by column
    for c in 0..n {
        for k in c..n {
            let mut s = if k == c { 1.0 } else { 0.0 };
            for j in c..k {
                s -= alpha[(k, j)] * beta[(j, c)];
            }
            beta[(k, c)] = s / alpha[(k, k)];
        }
    }
    Ok(beta)
}

fn fact(x: f64) -> f64 {
    ln_fact(x).exp()
}

/// Printed skew-orthogonal expansions of the classical families, over the
/// monic `C_j` with unit leading coefficients and `r̃_n`. The kernel
/// selects the case: sign type (I), derivative type (II) or the discrete
/// exponential kernel.
pub fn classical_table(measure: &Measure, kernel: SkewKernel, n: usize) -> Result<SkewPolySet> {
    measure.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("table order must be at least 1".into()));
    }
    let unlisted = || Err(Error::UnlistedCombination(format!("{kernel:?} on {measure:?}")));
    let pairs = n / 2;
    let mut m = DenseMatrix::identity(n);
    let mut r = Vec::with_capacity(pairs);
    // `inverse` marks tables that print C in terms of R̃
    let inverse = match (kernel, *measure) {
        (SkewKernel::SignType, Measure::Hermite) => {
            for k in 1..n.div_ceil(2) {
                if 2 * k + 1 < n {
                    m[(2 * k + 1, 2 * k - 1)] = -(k as f64);
                }
            }
            for k in 0..pairs {
                let kf = k as f64;
                r.push(2f64.powf(1.0 - 2.0 * kf) * std::f64::consts::PI.sqrt() * fact(2.0 * kf));
            }
            false
        }
        (SkewKernel::DerivativeType, Measure::Hermite) => {
            for k in 1..=(n - 1) / 2 {
                m[(2 * k, 2 * k - 2)] = -(k as f64);
            }
            for k in 0..pairs {
                let kf = k as f64;
                r.push(2f64.powf(-2.0 * kf) * std::f64::consts::PI.sqrt() * fact(2.0 * kf + 1.0));
            }
            true
        }
        (SkewKernel::SignType, Measure::Laguerre { a }) => {
            for k in 1..n.div_ceil(2) {
                if 2 * k + 1 < n {
                    let kf = k as f64;
                    m[(2 * k + 1, 2 * k - 1)] = -(2.0 * kf) * (a + 2.0 * kf);
                }
            }
            for k in 0..pairs {
                let kf = k as f64;
                r.push(4.0 * (ln_fact(2.0 * kf) + ln_fact(a + 2.0 * kf)).exp());
            }
            false
        }
        (SkewKernel::DerivativeType, Measure::Laguerre { a }) => {
            for k in 1..=(n - 1) / 2 {
                let kf = k as f64;
                m[(2 * k, 2 * k - 2)] = -(2.0 * kf) * (a + 2.0 * kf);
            }
            for k in 0..pairs {
                let kf = k as f64;
                r.push((ln_fact(2.0 * kf + 1.0) + ln_fact(a + 2.0 * kf + 1.0)).exp());
            }
            true
        }
        (SkewKernel::SignType, Measure::Jacobi { a, b }) => {
            for k in 1..n.div_ceil(2) {
                if 2 * k + 1 < n {
                    let kf = k as f64;
                    let s = a + b + 4.0 * kf;
                    m[(2 * k + 1, 2 * k - 1)] = -8.0 * kf * (a + 2.0 * kf) * (b + 2.0 * kf) * (a + b + 2.0 * kf)
                        / ((s - 1.0) * s * (s + 1.0) * (s + 2.0));
                }
            }
            for k in 0..pairs {
                let kf = k as f64;
                let s = a + b + 4.0 * kf;
                let ln = (s + 3.0) * std::f64::consts::LN_2
                    + ln_fact(2.0 * kf)
                    + ln_fact(a + 2.0 * kf)
                    + ln_fact(b + 2.0 * kf)
                    + ln_fact(a + b + 2.0 * kf)
                    - ln_fact(s)
                    - ln_fact(s + 2.0);
                r.push(ln.exp());
            }
            false
        }
        (SkewKernel::DerivativeType, Measure::Jacobi { a, b }) => {
            for k in 1..=(n - 1) / 2 {
                let kf = k as f64;
                let s = a + b + 4.0 * kf;
                m[(2 * k, 2 * k - 2)] = -8.0 * kf * (a + 2.0 * kf) * (b + 2.0 * kf) * (a + b + 2.0 * kf)
                    / ((s + 1.0) * s * (s - 1.0) * (s - 2.0));
            }
            for k in 0..pairs {
                let kf = k as f64;
                let s = a + b + 4.0 * kf;
                let ln = (s + 3.0) * std::f64::consts::LN_2
                    + ln_fact(2.0 * kf + 1.0)
                    + ln_fact(a + 2.0 * kf + 1.0)
                    + ln_fact(b + 2.0 * kf + 1.0)
                    + ln_fact(a + b + 2.0 * kf + 1.0)
                    - ln_fact(s + 1.0)
                    - ln_fact(s + 3.0);
                r.push(ln.exp());
            }
            true
        }
        (SkewKernel::SignType, Measure::SymHahn { l }) => {
            if n > l as usize + 1 {
                return Err(Error::TruncatedBySupport { order: n - 1, support: l as usize + 1 });
            }
            let lf = l as f64;
            for k in 1..n.div_ceil(2) {
                if 2 * k + 1 < n {
                    let kf = k as f64;
                    m[(2 * k + 1, 2 * k - 1)] = -kf * (lf - kf + 1.0) * (lf - 2.0 * kf) * (lf - 2.0 * kf + 1.0)
                        / ((2.0 * lf - 4.0 * kf + 3.0) * (2.0 * lf - 4.0 * kf + 1.0));
                }
            }
            for k in 0..pairs {
                let kf = k as f64;
                let ln = ln_fact(2.0 * kf) + ln_fact(2.0 * lf - 4.0 * kf + 1.0) + ln_fact(2.0 * lf - 4.0 * kf)
                    - std::f64::consts::LN_2
                    - ln_fact(2.0 * lf - 2.0 * kf + 1.0)
                    - ln_fact(lf - 2.0 * kf - 1.0)
                    - 3.0 * ln_fact(lf - 2.0 * kf);
                r.push(ln.exp());
            }
            false
        }
        (SkewKernel::SignType, Measure::DiscreteChebyshev { l }) => {
            if n > l as usize + 1 {
                return Err(Error::TruncatedBySupport { order: n - 1, support: l as usize + 1 });
            }
            let lf = l as f64;
            for k in 1..=(n - 1) / 2 {
                let kf = k as f64;
                m[(2 * k, 2 * k - 2)] = -kf * (2.0 * kf - 1.0) * (lf - 2.0 * kf + 1.0) * (lf + 2.0 * kf + 1.0)
                    / (2.0 * (4.0 * kf - 1.0) * (4.0 * kf + 1.0));
            }
            for k in 0..pairs {
                let kf = k as f64;
                let ln = std::f64::consts::LN_2
                    + ln_fact(lf + 2.0 * kf + 2.0)
                    + ln_fact(2.0 * kf)
                    + 3.0 * ln_fact(2.0 * kf + 1.0)
                    - ln_fact(lf - 2.0 * kf - 1.0)
                    - ln_fact(4.0 * kf + 2.0)
                    - ln_fact(4.0 * kf + 3.0);
                r.push(ln.exp());
            }
            true
        }
        (SkewKernel::DiscreteExpType { alpha }, Measure::DiscreteExp { q }) => {
            let sa = alpha.sqrt();
            let sq = q.sqrt();
            let kappa = (sa - sq) / (1.0 - sa * sq);
            for k in 0..n.div_ceil(2) {
                let row = 2 * k;
                if row >= n {
                    break;
                }
                for j in 0..k {
                    let d = (k - j) as f64;
                    let ln_even = ln_fact(2.0 * k as f64) - ln_fact(2.0 * j as f64);
                    m[(row, 2 * j)] = ln_even.exp() * q.powf(d) / (1.0 - q).powf(2.0 * d);
                    let ln_odd = ln_fact(2.0 * k as f64) - ln_fact(2.0 * j as f64 + 1.0);
                    m[(row, 2 * j + 1)] = -kappa * ln_odd.exp() * q.powf(d - 0.5) / (1.0 - q).powf(2.0 * d - 1.0);
                }
                if row + 1 < n {
                    m[(row + 1, row)] = -kappa * sq / (1.0 - q) * (2 * k + 1) as f64;
                }
            }
            for k in 0..pairs {
                let kf = k as f64;
                let ln = ln_fact(2.0 * kf) + ln_fact(2.0 * kf + 1.0) + 0.5 * alpha.ln() + (2.0 * kf + 0.5) * q.ln()
                    - (4.0 * kf + 1.0) * (1.0 - q).ln()
                    - 2.0 * (1.0 - sa * sq).ln();
                r.push(ln.exp());
            }
            false
        }
        _ => return unlisted(),
    };
    let alpha = if inverse { invert_expansion(&m)? } else { m };
    SkewPolySet::from_alpha(alpha, r, vec![0.0; pairs])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::determinant;
    use crate::orthopoly::build_family;
    use crate::skewproduct::{gram, OrthonormalBasis, SkewSetup};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    fn all_setups() -> Vec<(Measure, SkewKernel)> {
        vec![
            (Measure::Hermite, SkewKernel::SignType),
            (Measure::Hermite, SkewKernel::DerivativeType),
            (Measure::Laguerre { a: 0.0 }, SkewKernel::SignType),
            (Measure::Laguerre { a: 0.5 }, SkewKernel::SignType),
            (Measure::Laguerre { a: 2.0 }, SkewKernel::DerivativeType),
            (Measure::Laguerre { a: 0.0 }, SkewKernel::DerivativeType),
            (Measure::Jacobi { a: 0.0, b: 0.0 }, SkewKernel::SignType),
            (Measure::Jacobi { a: 0.5, b: 1.0 }, SkewKernel::SignType),
            (Measure::Jacobi { a: 0.0, b: 0.0 }, SkewKernel::DerivativeType),
            (Measure::Jacobi { a: 0.5, b: 1.0 }, SkewKernel::DerivativeType),
            (Measure::SymHahn { l: 10 }, SkewKernel::SignType),
            (Measure::SymHahn { l: 7 }, SkewKernel::SignType),
            (Measure::DiscreteChebyshev { l: 10 }, SkewKernel::SignType),
            (Measure::DiscreteExp { q: 0.5 }, SkewKernel::DiscreteExpType { alpha: 0.25 }),
            (Measure::DiscreteExp { q: 0.5 }, SkewKernel::DiscreteExpType { alpha: 0.5 }),
            (Measure::DiscreteExp { q: 0.3 }, SkewKernel::DiscreteExpType { alpha: 0.6 }),
        ]
    }

    /// Numerical set over ĉ and the table set moved to ĉ with unit leading
    /// coefficients, plus the ĉ Gram.
    fn both(m: Measure, k: SkewKernel, n: usize) -> (SkewPolySet, SkewPolySet, AntisymMatrix<f64>) {
        let fam = build_family(&m, n - 1).unwrap();
        let setup = SkewSetup::new(m, k).unwrap();
        let proj = setup.project(OrthonormalBasis::new(fam.clone(), n).unwrap()).unwrap();
        let num = construct_from_gram(proj.gram(), n, &[]).unwrap();
        let sqrt_h: Vec<f64> = (0..n).map(|j| fam.h(j).sqrt()).collect();
        let table = classical_table(&m, k, n).unwrap().rescale_basis(&sqrt_h).unwrap().normalize_leading().unwrap();
        (num, table, proj.gram().clone())
    }

    #[test]
    fn leading_polynomial_is_one() {
        let j = gram(SkewKernel::SignType, Measure::Hermite, 4).unwrap();
        let s = construct_from_gram(&j, 4, &[]).unwrap();
        assert_eq!(s.coeffs(0), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn hermite_case_one_monomial_construction() {
        // R̃_2 = C_2 = x² - 1/2, R̃_3 = C_3 - C_1 = x³ - 5x/2, r̃_1 = √π
        let j = gram(SkewKernel::SignType, Measure::Hermite, 4).unwrap();
        let s = construct_from_gram(&j, 4, &[]).unwrap();
        let c2 = s.coeffs(2);
        assert!((c2[0] + 0.5).abs() < 1e-12 && c2[1].abs() < 1e-12 && c2[2] == 1.0);
        let c3 = s.coeffs(3);
        assert!(c3[0].abs() < 1e-12 && (c3[1] + 2.5).abs() < 1e-12 && c3[2].abs() < 1e-12);
        assert!((s.r()[1] - SQRT_PI).abs() < 1e-11);
        assert!((s.r()[0] - 2.0 * SQRT_PI).abs() < 1e-12);
    }

    #[test]
    fn jacobi_table_rational_coefficient() {
        let t = classical_table(&Measure::Jacobi { a: 0.0, b: 0.0 }, SkewKernel::SignType, 4).unwrap();
        assert!((t.alpha()[(3, 1)] + 8.0 / 45.0).abs() < 1e-15);
    }

    #[test]
    fn table_examples() {
        let t = classical_table(&Measure::Hermite, SkewKernel::DerivativeType, 4).unwrap();
        assert!((t.alpha()[(2, 0)] - 1.0).abs() < 1e-15);
        assert!((t.r()[0] - SQRT_PI).abs() < 1e-15);
        let t = classical_table(&Measure::SymHahn { l: 4 }, SkewKernel::SignType, 4).unwrap();
        assert!((t.alpha()[(3, 1)] + 24.0 / 35.0).abs() < 1e-15);
        let t =
            classical_table(&Measure::DiscreteExp { q: 0.25 }, SkewKernel::DiscreteExpType { alpha: 0.25 }, 4).unwrap();
        assert_eq!(t.coeffs(1), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn unlisted_combination() {
        let e = classical_table(&Measure::SymHahn { l: 4 }, SkewKernel::DerivativeType, 4).unwrap_err();
        assert!(matches!(e, Error::UnlistedCombination(_)));
        assert!(classical_table(&Measure::Gaussian { variance: 1.0 }, SkewKernel::SignType, 2).is_err());
    }

    #[test]
    fn invert_examples() {
        let id = DenseMatrix::<f64>::identity(4);
        assert_eq!(invert_expansion(&id).unwrap(), id);
        let t = classical_table(&Measure::Hermite, SkewKernel::SignType, 4).unwrap();
        assert!((t.beta()[(3, 1)] - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DenseMatrix::from_fn(7, 7, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => rng.random_range(0.5..2.0),
            _ => rng.random_range(-1.0..1.0),
        });
        let b = invert_expansion(&a).unwrap();
        let p = a.matmul(&b).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p[(i, j)] - want).abs() < 1e-12);
            }
        }
        let mut z = DenseMatrix::<f64>::identity(3);
        z[(1, 1)] = 0.0;
        assert_eq!(invert_expansion(&z), Err(Error::ZeroDiagonal(1)));
    }

    #[test]
    fn tables_match_numerical_construction() {
        for (m, k) in all_setups() {
            let n = match m {
                Measure::SymHahn { l } => 10.min(l as usize + 1) / 2 * 2,
                _ => 10,
            };
            let (num, table, gram) = both(m, k, n);
            for i in 0..n / 2 {
                let (a, b) = (num.r()[i], table.r()[i]);
                assert!((a - b).abs() <= 1e-8 * b.abs(), "{m:?} {k:?} r_{i}: {a} vs {b}");
            }
            // R_{2k} is unique; R_{2k+1} is compared after removing its b_{2k} part
            for row in 0..n {
                let x = num.coeffs(row);
                let mut y = table.coeffs(row).to_vec();
                if row % 2 == 1 {
                    let c = y[row - 1];
                    for (yj, &e) in y.iter_mut().zip(table.coeffs(row - 1)) {
                        *yj -= c * e;
                    }
                }
                let scale = y.iter().fold(1.0f64, |s, v| s.max(v.abs()));
                for j in 0..n {
                    assert!((x[j] - y[j]).abs() <= 1e-8 * scale, "{m:?} {k:?} R_{row}[{j}]: {} vs {}", x[j], y[j]);
                }
            }
            assert!(num.residual(&gram).unwrap() < 1e-8);
            assert!(table.residual(&gram).unwrap() < 1e-8, "{m:?} {k:?} table residual");
        }
    }

    #[test]
    fn gauge_shift_moves_only_odd_members() {
        let fam = build_family(&Measure::Hermite, 6).unwrap();
        let setup = SkewSetup::new(Measure::Hermite, SkewKernel::SignType).unwrap();
        let proj = setup.project(OrthonormalBasis::new(fam, 6).unwrap()).unwrap();
        let a = construct_from_gram(proj.gram(), 6, &[]).unwrap();
        let b = construct_from_gram(proj.gram(), 6, &[0.3, -1.2, 2.0]).unwrap();
        assert_eq!(b.gauge(), &[0.3, -1.2, 2.0]);
        for k in 0..3 {
            for j in 0..6 {
                assert!((a.coeffs(2 * k)[j] - b.coeffs(2 * k)[j]).abs() < 1e-14);
                let want = a.coeffs(2 * k + 1)[j] + b.gauge()[k] * a.coeffs(2 * k)[j];
                assert!((b.coeffs(2 * k + 1)[j] - want).abs() < 1e-12);
            }
            assert!((a.r()[k] - b.r()[k]).abs() < 1e-12 * a.r()[k]);
        }
        assert!(b.residual(proj.gram()).unwrap() < 1e-10);
    }

    /// Determinant formulas in the monomial basis, with `v_k = 0`.
    fn determinant_form(j: &DenseMatrix<f64>, k: usize, odd: bool) -> Vec<f64> {
        let rows: Vec<usize> = if odd {
            std::iter::once(2 * k + 1).chain((0..2 * k).rev()).collect()
        } else {
            (0..=2 * k).rev().collect()
        };
        let cols: Vec<usize> = (0..2 * k).rev().collect();
        let u = determinant(&DenseMatrix::from_fn(2 * k, 2 * k, |a, b| j[(cols[a], cols[b])])).unwrap();
        let top = if odd { 2 * k + 1 } else { 2 * k };
        (0..=top)
            .map(|p| {
                let m = DenseMatrix::from_fn(2 * k + 1, 2 * k + 1, |a, b| {
                    if b == 0 {
                        if rows[a] == p {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        j[(rows[a], cols[b - 1])]
                    }
                });
                determinant(&m).unwrap() / if k == 0 { 1.0 } else { u }
            })
            .collect()
    }

    #[test]
    fn gram_schmidt_equals_determinant_formulas() {
        for (m, k) in [
            (Measure::Hermite, SkewKernel::SignType),
            (Measure::Laguerre { a: 0.5 }, SkewKernel::SignType),
            (Measure::Jacobi { a: 0.5, b: 1.0 }, SkewKernel::DerivativeType),
            (Measure::DiscreteChebyshev { l: 8 }, SkewKernel::SignType),
        ] {
            let j = gram(k, m, 6).unwrap();
            let s = construct_from_gram(&j, 6, &[]).unwrap();
            for p in 0..3 {
                for (odd, row) in [(false, 2 * p), (true, 2 * p + 1)] {
                    let d = determinant_form(j.as_dense(), p, odd);
                    let scale = d.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                    for (i, &dv) in d.iter().enumerate() {
                        assert!(
                            (s.coeffs(row)[i] - dv).abs() < 1e-8 * scale,
                            "{m:?} R_{row}[{i}]: {} vs {dv}",
                            s.coeffs(row)[i]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn odd_order_has_unpaired_last_member() {
        let j = gram(SkewKernel::SignType, Measure::Hermite, 5).unwrap();
        let s = construct_from_gram(&j, 5, &[]).unwrap();
        assert_eq!(s.r().len(), 2);
        assert!((s.coeffs(4)[4] - 1.0).abs() < 1e-15);
        assert!((s.coeffs(4)[2] + 3.0).abs() < 1e-10 && (s.coeffs(4)[0] - 0.75).abs() < 1e-10);
    }

    #[test]
    fn degenerate_gram_rejected() {
        let z = AntisymMatrix::<f64>::from_upper(4, |i, j| if (i, j) == (0, 1) { 1.0 } else { 0.0 });
        assert_eq!(construct_from_gram(&z, 4, &[]), Err(Error::DegenerateSkewMoments(1)));
    }
}
