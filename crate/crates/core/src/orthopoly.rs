//! Monic orthogonal polynomials `C_n` and their norms `h_n`.
//!
//! Continuous families use closed-form recurrences. Discrete families run
//! Stieltjes on the (possibly truncated) support with full
//! reorthogonalization, which stays accurate up to the support size.

use crate::error::{Error, Result};
use crate::measures::{ln_fact, ln_gamma, Measure};

/// Recurrence `C_{k+1} = (x - α_k) C_k - β_k C_{k-1}`, norms `h_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoPolyFamily {
    measure: Measure,
    alpha: Vec<f64>,
    /// `beta[0]` is the total mass.
    beta: Vec<f64>,
    ln_h: Vec<f64>,
}

pub fn build_family(m: &Measure, max_order: usize) -> Result<OrthoPolyFamily> {
    m.validate()?;
    let n = max_order + 1;
    let (alpha, beta, ln_mass) = if m.is_discrete() {
        let rule = m.discrete_rule(max_order + 2)?;
        let finite = !matches!(m, Measure::DiscreteExp { .. });
        if finite && n > rule.len() {
            return Err(Error::TruncatedBySupport { order: max_order, support: rule.len() });
        }
        let lw: Vec<f64> = rule.nodes.iter().map(|&x| m.ln_weight(x)).collect();
        stieltjes(&rule.nodes, &lw, n)?
    } else {
        let (a, b) = m.continuous_recurrence(n)?;
        let ln_mass = b[0].ln();
        (a, b, ln_mass)
    };
    let mut ln_h = Vec::with_capacity(n);
    let mut acc = ln_mass;
    ln_h.push(acc);
    for b in &beta[1..] {
        acc += b.ln();
        ln_h.push(acc);
    }
    Ok(OrthoPolyFamily { measure: *m, alpha, beta, ln_h })
}

/// Discrete Stieltjes (Lanczos form) for `n` recurrence coefficients.
/// Weights enter as logs and are rescaled to avoid underflow; the log of
/// the total mass is returned alongside.
fn stieltjes(nodes: &[f64], ln_w: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let top = ln_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ln_w.iter().map(|&l| (l - top).exp()).collect();
    let scaled_mass: f64 = w.iter().sum();
    let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    // q_k[i] = sqrt(w_i) ĉ_k(x_i), orthonormal in the plain dot product
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let norm0 = scaled_mass.sqrt();
    basis.push(sw.iter().map(|s| s / norm0).collect());
    let mut alpha = Vec::with_capacity(n);
    let ln_mass = scaled_mass.ln() + top;
    let mut beta = vec![ln_mass.exp()];
    for k in 0..n {
        let qk = &basis[k];
        let a = qk.iter().zip(nodes).map(|(q, x)| q * q * x).sum::<f64>();
        alpha.push(a);
        if k + 1 == n {
            break;
        }
        let mut v: Vec<f64> = qk.iter().zip(nodes).map(|(q, x)| (x - a) * q).collect();
        if k > 0 {
            let b = beta[k].sqrt();
            for (vi, pi) in v.iter_mut().zip(&basis[k - 1]) {
                *vi -= b * pi;
            }
        }
        for _ in 0..2 {
            for p in &basis {
                let c = dot(&v, p);
                for (vi, pi) in v.iter_mut().zip(p) {
                    *vi -= c * pi;
                }
            }
        }
        let nv = dot(&v, &v).sqrt();
        if !(nv > 0.0) {
            return Err(Error::TruncatedBySupport { order: k + 1, support: nodes.len() });
        }
        // β_{k+1} from the projection onto q_{k+1}, which is what the
        // three-term recurrence uses
        let qn: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let b = qn.iter().zip(nodes).zip(qk).map(|((q, x), p)| q * x * p).sum::<f64>();
        beta.push(b * b);
        basis.push(qn);
    }
    Ok((alpha, beta, ln_mass))
}

impl OrthoPolyFamily {
    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn max_order(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `β_k`, with `β_0` the total mass (which may underflow for wide
    /// Hahn supports; `ln_h(0)` does not).
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn h(&self, k: usize) -> f64 {
        self.ln_h[k].exp()
    }

    pub fn ln_h(&self, k: usize) -> f64 {
        self.ln_h[k]
    }

    /// Monic `C_n(x)` by the recurrence.
    pub fn eval(&self, n: usize, x: f64) -> f64 {
        assert!(n <= self.max_order(), "degree {n} beyond stored order");
        let (mut prev, mut cur) = (0.0, 1.0);
        for k in 0..n {
            let next = (x - self.alpha[k]) * cur - if k > 0 { self.beta[k] * prev } else { 0.0 };
            prev = cur;
            cur = next;
        }
        cur
    }

    /// `ĉ_j(x) = C_j(x)/√h_j` for `j = 0..=n`.
    pub fn orthonormal(&self, n: usize, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        self.orthonormal_into(x, &mut out);
        out
    }

    pub fn orthonormal_into(&self, x: f64, out: &mut [f64]) {
        let n = out.len();
        assert!(n <= self.alpha.len(), "degree beyond stored order");
        if n == 0 {
            return;
        }
        out[0] = (-0.5 * self.ln_h[0]).exp();
        if n > 1 {
            out[1] = (x - self.alpha[0]) * out[0] / self.beta[1].sqrt();
        }
        for k in 1..n - 1 {
            out[k + 1] = ((x - self.alpha[k]) * out[k] - self.beta[k].sqrt() * out[k - 1]) / self.beta[k + 1].sqrt();
        }
    }

    /// Orthonormal values and their `x`-derivatives for `j = 0..=n`.
    pub fn orthonormal_with_derivative(&self, n: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
        assert!(n <= self.max_order(), "degree {n} beyond stored order");
        let mut p = vec![0.0; n + 1];
        let mut d = vec![0.0; n + 1];
        p[0] = (-0.5 * self.ln_h[0]).exp();
        if n >= 1 {
            let s = self.beta[1].sqrt();
            p[1] = (x - self.alpha[0]) * p[0] / s;
            d[1] = p[0] / s;
        }
        for k in 1..n {
            let s = self.beta[k + 1].sqrt();
            let b = self.beta[k].sqrt();
            p[k + 1] = ((x - self.alpha[k]) * p[k] - b * p[k - 1]) / s;
            d[k + 1] = (p[k] + (x - self.alpha[k]) * d[k] - b * d[k - 1]) / s;
        }
        (p, d)
    }

    /// Monomial coefficients (ascending powers) of `C_0..=C_n`.
    pub fn monic_coefficients(&self, n: usize) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..n {
            let mut next = vec![0.0; k + 2];
            for (i, &c) in out[k].iter().enumerate() {
                next[i + 1] += c;
                next[i] -= self.alpha[k] * c;
            }
            if k > 0 {
                for (i, &c) in out[k - 1].iter().enumerate() {
                    next[i] -= self.beta[k] * c;
                }
            }
            out.push(next);
        }
        out
    }
}

/// Value of monic `C_n` of `fam` at `x`.
pub fn eval_poly(fam: &OrthoPolyFamily, n: usize, x: f64) -> f64 {
    fam.eval(n, x)
}

/// `ln h_n` from the closed forms of the classical families.
pub fn ln_norm_closed_form(m: &Measure, n: usize) -> Option<f64> {
    let nf = n as f64;
    let v = match *m {
        Measure::Hermite => 0.5 * std::f64::consts::PI.ln() + ln_fact(nf) - nf * std::f64::consts::LN_2,
        Measure::Gaussian { variance } => ln_fact(nf) + nf * variance.ln(),
        Measure::Laguerre { a } => ln_fact(nf) + ln_fact(nf + a),
        Measure::Jacobi { a, b } => {
            if n == 0 {
                m.total_mass().ln()
            } else {
                (a + b + 2.0 * nf + 1.0) * std::f64::consts::LN_2
                    + ln_fact(nf)
                    + ln_fact(nf + a)
                    + ln_fact(nf + b)
                    + ln_fact(nf + a + b)
                    - ln_fact(2.0 * nf + a + b)
                    - ln_fact(2.0 * nf + a + b + 1.0)
            }
        }
        Measure::SymHahn { l } => {
            if n > l as usize {
                return None;
            }
            let l = l as f64;
            ln_fact(nf) + ln_fact(2.0 * l - 2.0 * nf + 1.0) + ln_fact(2.0 * l - 2.0 * nf)
                - ln_fact(2.0 * l - nf + 1.0)
                - 4.0 * ln_fact(l - nf)
        }
        Measure::DiscreteChebyshev { l } => {
            if n > l as usize {
                return None;
            }
            let l = l as f64;
            ln_fact(l + nf + 1.0) + 4.0 * ln_fact(nf) - ln_fact(l - nf) - ln_fact(2.0 * nf + 1.0) - ln_fact(2.0 * nf)
        }
        Measure::DiscreteExp { q } => nf * q.ln() + 2.0 * ln_fact(nf) - (2.0 * nf + 1.0) * (1.0 - q).ln(),
    };
    Some(v)
}

fn pochhammer(a: f64, k: usize) -> f64 {
    (0..k).map(|i| a + i as f64).product()
}

/// Hahn polynomial `Q_n^{(a,b)}(x; L)` as a terminating hypergeometric sum.
pub fn hahn_q(n: usize, a: f64, b: f64, x: f64, l: u32) -> f64 {
    let lf = l as f64;
    let nf = n as f64;
    let mut sum = 0.0;
    let mut fact = 1.0;
    for k in 0..=n.min(l as usize) {
        if k > 0 {
            fact *= k as f64;
        }
        let num = pochhammer(-nf, k) * pochhammer(nf + a + b + 1.0, k) * pochhammer(-x, k);
        let den = pochhammer(a + 1.0, k) * pochhammer(-lf, k) * fact;
        sum += num / den;
    }
    sum
}

/// Meixner polynomial `M_n(x; c, q)`.
pub fn meixner_m(n: usize, c: f64, q: f64, x: f64) -> f64 {
    let z = 1.0 - 1.0 / q;
    let mut sum = 0.0;
    let mut fact = 1.0;
    for k in 0..=n {
        if k > 0 {
            fact *= k as f64;
        }
        sum += pochhammer(-(n as f64), k) * pochhammer(-x, k) / (pochhammer(c, k) * fact) * z.powi(k as i32);
    }
    sum
}

/// Monic `C_n(x)` from the hypergeometric representation, for the three
/// discrete families.
pub fn hypergeometric_monic(m: &Measure, n: usize, x: f64) -> Option<f64> {
    let nf = n as f64;
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    match *m {
        Measure::SymHahn { l } => {
            let lf = l as f64;
            let ab = -lf - 1.0;
            let lc = 2.0 * ln_fact(lf) + ln_fact(2.0 * lf - 2.0 * nf + 1.0)
                - 2.0 * ln_fact(lf - nf)
                - ln_fact(2.0 * lf - nf + 1.0);
            Some(sign * lc.exp() * hahn_q(n, ab, ab, x + lf / 2.0, l))
        }
        Measure::DiscreteChebyshev { l } => {
            let lf = l as f64;
            let lc = ln_fact(lf) + 2.0 * ln_fact(nf) - ln_fact(lf - nf) - ln_fact(2.0 * nf);
            Some(sign * lc.exp() * hahn_q(n, 0.0, 0.0, x, l))
        }
        Measure::DiscreteExp { q } => {
            let pref = q.powi(n as i32) * ln_gamma(nf + 1.0).exp() / (q - 1.0).powi(n as i32);
            Some(pref * meixner_m(n, 1.0, q, x))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::quadrature;

    fn defaults() -> Vec<Measure> {
        vec![
            Measure::Hermite,
            Measure::Laguerre { a: 0.0 },
            Measure::Jacobi { a: 0.0, b: 0.0 },
            Measure::SymHahn { l: 10 },
            Measure::DiscreteChebyshev { l: 10 },
            Measure::DiscreteExp { q: 0.5 },
        ]
    }

    #[test]
    fn norm_examples() {
        let f = build_family(&Measure::Hermite, 4).unwrap();
        assert!((f.h(2) - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-14);
        let f = build_family(&Measure::Laguerre { a: 1.0 }, 3).unwrap();
        assert!((f.h(1) - 2.0).abs() < 1e-13);
        let f = build_family(&Measure::DiscreteExp { q: 0.5 }, 3).unwrap();
        assert!((f.h(0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn eval_examples() {
        for m in defaults() {
            let f = build_family(&m, 2).unwrap();
            assert_eq!(f.eval(0, 0.37), 1.0);
        }
        let f = build_family(&Measure::Hermite, 3).unwrap();
        for x in [-1.3, 0.0, 0.4, 2.0] {
            assert!((f.eval(2, x) - (x * x - 0.5)).abs() < 1e-14);
        }
        let f = build_family(&Measure::DiscreteChebyshev { l: 2 }, 1).unwrap();
        assert!((f.eval(1, 0.0) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn truncated_by_support() {
        let err = build_family(&Measure::DiscreteChebyshev { l: 3 }, 4).unwrap_err();
        assert_eq!(err, Error::TruncatedBySupport { order: 4, support: 4 });
        assert!(build_family(&Measure::DiscreteChebyshev { l: 3 }, 3).is_ok());
    }

    #[test]
    fn norms_match_closed_forms() {
        let mut cases = defaults();
        cases.extend([
            Measure::Laguerre { a: 2.5 },
            Measure::Jacobi { a: 0.5, b: 1.0 },
            Measure::SymHahn { l: 7 },
            Measure::DiscreteExp { q: 0.25 },
            Measure::Gaussian { variance: 3.0 },
        ]);
        for m in cases {
            let top = match m {
                Measure::SymHahn { l } | Measure::DiscreteChebyshev { l } => (l as usize).min(12),
                _ => 12,
            };
            let f = build_family(&m, top).unwrap();
            for n in 0..=top {
                let want = ln_norm_closed_form(&m, n).unwrap();
                assert!((f.ln_h(n) - want).abs() < 1e-10, "{m:?} n={n}: {} vs {want}", f.ln_h(n));
            }
        }
    }

    #[test]
    fn orthogonality_residuals() {
        for m in defaults() {
            let f = build_family(&m, 8).unwrap();
            let rule = if m.is_discrete() { m.discrete_rule(8).unwrap() } else { quadrature(&m, 12).unwrap() };
            for j in 0..=8 {
                for l in 0..j {
                    let v = rule.integrate(|x| f.eval(j, x) * f.eval(l, x));
                    let rel = v.abs() / (f.h(j) * f.h(l)).sqrt();
                    assert!(rel < 1e-9, "{m:?} ({j},{l}) residual {rel}");
                }
                let hj = rule.integrate(|x| f.eval(j, x).powi(2));
                assert!((hj / f.h(j) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn recurrence_matches_hypergeometric_forms() {
        let cases = [
            Measure::SymHahn { l: 10 },
            Measure::SymHahn { l: 9 },
            Measure::DiscreteChebyshev { l: 10 },
            Measure::DiscreteExp { q: 0.5 },
            Measure::DiscreteExp { q: 0.3 },
        ];
        for m in cases {
            let f = build_family(&m, 8).unwrap();
            let rule = m.discrete_rule(0).unwrap();
            let pts: Vec<f64> = rule.nodes.iter().take(20).cloned().collect();
            for n in 0..=8 {
                let scale = pts.iter().map(|&x| f.eval(n, x).abs()).fold(0.0, f64::max);
                for &x in &pts {
                    let a = f.eval(n, x);
                    let b = hypergeometric_monic(&m, n, x).unwrap();
                    assert!((a - b).abs() <= 1e-10 * scale, "{m:?} n={n} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn meixner_recurrence_closed_form() {
        let q = 0.4;
        let f = build_family(&Measure::DiscreteExp { q }, 10).unwrap();
        for n in 0..10 {
            let nf = n as f64;
            assert!((f.alpha()[n] - (nf + (nf + 1.0) * q) / (1.0 - q)).abs() < 1e-10);
            if n > 0 {
                assert!((f.beta()[n] - nf * nf * q / (1.0 - q).powi(2)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn orthonormal_values_and_derivatives() {
        let f = build_family(&Measure::Laguerre { a: 0.5 }, 6).unwrap();
        let x = 1.7;
        let (p, d) = f.orthonormal_with_derivative(6, x);
        let eps = 1e-6;
        let hi = f.orthonormal(6, x + eps);
        let lo = f.orthonormal(6, x - eps);
        for j in 0..=6 {
            assert!((p[j] - f.eval(j, x) / f.h(j).sqrt()).abs() < 1e-12);
            assert!((d[j] - (hi[j] - lo[j]) / (2.0 * eps)).abs() < 1e-7);
        }
    }

    #[test]
    fn monomial_coefficients() {
        let f = build_family(&Measure::Hermite, 4).unwrap();
        let c = f.monic_coefficients(3);
        assert_eq!(c[2], vec![-0.5, 0.0, 1.0]);
        assert_eq!(c[3], vec![0.0, -1.5, 0.0, 1.0]);
    }

    #[test]
    fn large_hahn_support_stays_finite() {
        let f = build_family(&Measure::SymHahn { l: 200 }, 20).unwrap();
        for n in 0..=20 {
            let want = ln_norm_closed_form(&Measure::SymHahn { l: 200 }, n).unwrap();
            assert!((f.ln_h(n) - want).abs() < 1e-8 * want.abs().max(1.0), "n={n}: {} vs {want}", f.ln_h(n));
        }
    }
}
