//! Reference measures and their integration rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::tridiag_eigen;

/// Tail mass below which the DiscreteExp support is cut.
pub const DISCRETE_EXP_TAIL: f64 = 1e-16;

/// A weight on an interval (density w.r.t. `dx`) or on a node set
/// (point masses).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Measure {
    /// `e^{-x^2}` on the real line.
    Hermite,
    /// Normal density of the given variance (total mass 1).
    Gaussian { variance: f64 },
    /// `x^a e^{-x}` on `(0, ∞)`.
    Laguerre { a: f64 },
    /// `(1-x)^a (1+x)^b` on `(-1, 1)`.
    Jacobi { a: f64, b: f64 },
    /// Mass `1/[(L/2+x)!(L/2-x)!]^2` at `x = -L/2, …, L/2`.
    SymHahn { l: u32 },
    /// Unit mass at `x = 0, …, L`.
    DiscreteChebyshev { l: u32 },
    /// Mass `q^x` at `x = 0, 1, 2, …`.
    DiscreteExp { q: f64 },
}

/// Nodes and positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl IntegrationRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Affine map of a rule on `[-1, 1]` onto `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> IntegrationRule {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        IntegrationRule {
            nodes: self.nodes.iter().map(|&t| mid + half * t).collect(),
            weights: self.weights.iter().map(|&w| w * half).collect(),
        }
    }
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln x!` extended to real `x > -1`.
pub(crate) fn ln_fact(x: f64) -> f64 {
    libm::lgamma(x + 1.0)
}

impl Measure {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Measure::Hermite | Measure::SymHahn { .. } | Measure::DiscreteChebyshev { .. } => Ok(()),
            Measure::Gaussian { variance } if !(variance > 0.0 && variance.is_finite()) => {
                bad(format!("gaussian variance must be positive, got {variance}"))
            }
            Measure::Laguerre { a } if !(a > -1.0 && a.is_finite()) => {
                bad(format!("laguerre a must exceed -1, got {a}"))
            }
            Measure::Jacobi { a, b } if !(a > -1.0 && b > -1.0 && a.is_finite() && b.is_finite()) => {
                bad(format!("jacobi a, b must exceed -1, got ({a}, {b})"))
            }
            Measure::DiscreteExp { q } if !(q > 0.0 && q < 1.0) => {
                bad(format!("discrete_exp q must lie in (0,1), got {q}"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Measure::SymHahn { .. } | Measure::DiscreteChebyshev { .. } | Measure::DiscreteExp { .. })
    }

    /// Closed hull of the support; infinite ends are reported as infinities.
    pub fn interval(&self) -> (f64, f64) {
        match *self {
            Measure::Hermite | Measure::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Measure::Laguerre { .. } => (0.0, f64::INFINITY),
            Measure::Jacobi { .. } => (-1.0, 1.0),
            Measure::SymHahn { l } => (-(l as f64) / 2.0, l as f64 / 2.0),
            Measure::DiscreteChebyshev { l } => (0.0, l as f64),
            Measure::DiscreteExp { .. } => (0.0, f64::INFINITY),
        }
    }

    /// Whether `x` is a support point (a node, for discrete measures).
    pub fn contains(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        let (lo, hi) = self.interval();
        if x < lo || x > hi {
            return false;
        }
        match *self {
            Measure::SymHahn { l } => {
                let i = x + l as f64 / 2.0;
                (i - i.round()).abs() < 1e-9
            }
            Measure::DiscreteChebyshev { .. } | Measure::DiscreteExp { .. } => (x - x.round()).abs() < 1e-9,
            _ => true,
        }
    }

    /// Log of the density (continuous) or point mass (discrete) at `x`.
    pub fn ln_weight(&self, x: f64) -> f64 {
        match *self {
            Measure::Hermite => -x * x,
            Measure::Gaussian { variance } => {
                -x * x / (2.0 * variance) - 0.5 * (2.0 * std::f64::consts::PI * variance).ln()
            }
            Measure::Laguerre { a } => a * x.ln() - x,
            Measure::Jacobi { a, b } => a * (1.0 - x).ln() + b * (1.0 + x).ln(),
            Measure::SymHahn { l } => {
                let h = l as f64 / 2.0;
                -2.0 * (ln_fact(h + x) + ln_fact(h - x))
            }
            Measure::DiscreteChebyshev { .. } => 0.0,
            Measure::DiscreteExp { q } => x * q.ln(),
        }
    }

    pub fn weight(&self, x: f64) -> f64 {
        self.ln_weight(x).exp()
    }

    /// `∫ dμ`.
    pub fn total_mass(&self) -> f64 {
        match *self {
            Measure::Hermite => std::f64::consts::PI.sqrt(),
            Measure::Gaussian { .. } => 1.0,
            Measure::Laguerre { a } => libm::tgamma(a + 1.0),
            Measure::Jacobi { a, b } => {
                ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(a + b + 2.0))
                    .exp()
            }
            Measure::DiscreteExp { q } => 1.0 / (1.0 - q),
            Measure::SymHahn { .. } | Measure::DiscreteChebyshev { .. } => {
                self.discrete_rule(0).map(|r| r.weights.iter().sum()).unwrap_or(0.0)
            }
        }
    }

    /// Monic recurrence `C_{k+1} = (x - α_k) C_k - β_k C_{k-1}` for the
    /// continuous families, `k < n`, with `β_0` the total mass.
    pub fn continuous_recurrence(&self, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let mut alpha = Vec::with_capacity(n);
        let mut beta = Vec::with_capacity(n);
        for k in 0..n {
            let kf = k as f64;
            let (al, be) = match *self {
                Measure::Hermite => (0.0, kf / 2.0),
                Measure::Gaussian { variance } => (0.0, kf * variance),
                Measure::Laguerre { a } => (2.0 * kf + 1.0 + a, kf * (kf + a)),
                Measure::Jacobi { a, b } => jacobi_coeffs(a, b, k),
                _ => {
                    return Err(Error::InvalidParameter("discrete measures have no closed-form recurrence here".into()))
                }
            };
            alpha.push(al);
            beta.push(if k == 0 { self.total_mass() } else { be });
        }
        Ok((alpha, beta))
    }

    /// Exact support rule for discrete measures. DiscreteExp is cut where
    /// `x^{2·degree} q^x` has dropped below `DISCRETE_EXP_TAIL` relative to
    /// its peak and the plain tail mass is below `DISCRETE_EXP_TAIL`.
    pub fn discrete_rule(&self, degree: usize) -> Result<IntegrationRule> {
        self.validate()?;
        let (nodes, weights): (Vec<f64>, Vec<f64>) = match *self {
            Measure::SymHahn { l } => (0..=l)
                .map(|i| {
                    let x = i as f64 - l as f64 / 2.0;
                    (x, self.weight(x))
                })
                .unzip(),
            Measure::DiscreteChebyshev { l } => (0..=l).map(|i| (i as f64, 1.0)).unzip(),
            Measure::DiscreteExp { q } => {
                let lq = q.ln();
                let cut = DISCRETE_EXP_TAIL.ln();
                let base = ((cut + (1.0 - q).ln()) / lq).ceil().max(1.0) as usize;
                let d2 = 2.0 * degree as f64;
                let ln_term = |x: f64| if x == 0.0 { 0.0 } else { d2 * x.ln() + x * lq };
                let peak_x = (d2 / -lq).floor();
                let peak = ln_term(peak_x).max(ln_term(peak_x + 1.0)).max(0.0);
                let mut end = base;
                while (end as f64) <= peak_x + 1.0 || ln_term(end as f64) > peak + cut {
                    end += 1;
                }
                (0..end).map(|i| (i as f64, q.powi(i as i32))).unzip()
            }
            _ => return Err(Error::InvalidParameter("continuous measure has no finite support".into())),
        };
        Ok(IntegrationRule { nodes, weights })
    }
}

fn jacobi_coeffs(a: f64, b: f64, k: usize) -> (f64, f64) {
    let kf = k as f64;
    let s = 2.0 * kf + a + b;
    let alpha = if k == 0 { (b - a) / (a + b + 2.0) } else { (b * b - a * a) / (s * (s + 2.0)) };
    let beta = match k {
        0 => 0.0,
        1 => 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b)),
        _ => 4.0 * kf * (kf + a) * (kf + b) * (kf + a + b) / (s * s * (s + 1.0) * (s - 1.0)),
    };
    (alpha, beta)
}

/// Gauss rule for continuous measures (exact through degree `2n-1`); the
/// full support for finite discrete measures; the tail-truncated support
/// for DiscreteExp.
pub fn quadrature(m: &Measure, n: usize) -> Result<IntegrationRule> {
    m.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("quadrature order must be at least 1".into()));
    }
    if m.is_discrete() {
        return m.discrete_rule(0);
    }
    let (alpha, beta) = m.continuous_recurrence(n)?;
    let off: Vec<f64> = beta[1..].iter().map(|b| b.sqrt()).collect();
    let (nodes, first) = tridiag_eigen(&alpha, &off)?;
    let weights = first.iter().map(|z| beta[0] * z * z).collect();
    Ok(IntegrationRule { nodes, weights })
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> IntegrationRule {
    quadrature(&Measure::Jacobi { a: 0.0, b: 0.0 }, n).expect("legendre parameters valid")
}

/// Panel width and grading used by [`support_rule`].
const PANEL: f64 = 0.5;
const GRADING: f64 = 0.15;
const GRADED_LEVELS: i32 = 14;
/// Near `±1` the sine map stops resolving `1 - |x|` below about 1e-15.
const GRADED_LEVELS_SINE: i32 = 5;

/// Rule for `∫ f dx` over the support of `m` (counting measure on discrete
/// supports), wide enough for the one-point density of `n` particles and
/// split at `kinks`. Half-line and interval supports are integrated in
/// `x = t²` and `x = sin t` with panels graded towards the ends, so
/// algebraic endpoint behaviour of densities is resolved.
pub fn support_rule(m: &Measure, n: usize, kinks: &[f64]) -> Result<IntegrationRule> {
    m.validate()?;
    if m.is_discrete() {
        let nodes = m.discrete_rule(2 * n + 4)?.nodes;
        return Ok(IntegrationRule { weights: vec![1.0; nodes.len()], nodes });
    }
    // e^{-x²} beyond the soft edge √(2n) is below 1e-15 of the bulk after 6 units
    let reach = (2.0 * n as f64).sqrt() + 6.0;
    // t range, x(t) with dx/dt, t(x), and which ends are graded
    let (lo, hi, graded): (f64, f64, [bool; 2]) = match *m {
        Measure::Hermite | Measure::Gaussian { .. } => (-reach, reach, [false, false]),
        Measure::Laguerre { a } => (0.0, (4.0 * n as f64 + 2.0 * a + 80.0).sqrt(), [true, false]),
        Measure::Jacobi { .. } => (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, [true, true]),
        _ => unreachable!("discrete measures handled above"),
    };
    let map = |t: f64| -> (f64, f64) {
        match *m {
            Measure::Gaussian { variance } => ((2.0 * variance).sqrt() * t, (2.0 * variance).sqrt()),
            Measure::Laguerre { .. } => (t * t, 2.0 * t),
            Measure::Jacobi { .. } => (t.sin(), t.cos()),
            _ => (t, 1.0),
        }
    };
    let inverse = |x: f64| -> Option<f64> {
        match *m {
            Measure::Gaussian { variance } => Some(x / (2.0 * variance).sqrt()),
            Measure::Laguerre { .. } => (x > 0.0).then(|| x.sqrt()),
            Measure::Jacobi { .. } => (x.abs() < 1.0).then(|| x.asin()),
            _ => Some(x),
        }
    };
    let mut edges = vec![lo];
    let mut cuts: Vec<f64> = kinks.iter().filter_map(|&k| inverse(k)).filter(|&t| t > lo && t < hi).collect();
    cuts.sort_by(f64::total_cmp);
    edges.extend(cuts);
    edges.push(hi);
    let levels = if matches!(m, Measure::Jacobi { .. }) { GRADED_LEVELS_SINE } else { GRADED_LEVELS };
    let base = gauss_legendre(20);
    let (mut nodes, mut weights) = (Vec::new(), Vec::new());
    let mut panel = |a: f64, b: f64| {
        let r = base.mapped(a, b);
        for (t, w) in r.nodes.iter().zip(&r.weights) {
            let (x, dx) = map(*t);
            nodes.push(x);
            weights.push(w * dx);
        }
    };
    for (i, seg) in edges.windows(2).enumerate() {
        let (a, b) = (seg[0], seg[1]);
        let count = ((b - a) / PANEL).ceil().max(1.0) as usize;
        let h = (b - a) / count as f64;
        for p in 0..count {
            let (pa, pb) = (a + p as f64 * h, a + (p + 1) as f64 * h);
            let left_end = i == 0 && p == 0 && graded[0];
            let right_end = i == edges.len() - 2 && p == count - 1 && graded[1];
            if left_end {
                panel(pa, pa + h * GRADING.powi(levels));
                for k in (0..levels).rev() {
                    panel(pa + h * GRADING.powi(k + 1), pa + h * GRADING.powi(k));
                }
            } else if right_end {
                for k in 0..levels {
                    panel(pb - h * GRADING.powi(k), pb - h * GRADING.powi(k + 1));
                }
                panel(pb - h * GRADING.powi(levels), pb);
            } else {
                panel(pa, pb);
            }
        }
    }
    Ok(IntegrationRule { nodes, weights })
}

/// `∫ x^k dμ`.
pub fn moment(m: &Measure, k: usize) -> Result<f64> {
    let rule = if m.is_discrete() { m.discrete_rule(k.div_ceil(2))? } else { quadrature(m, k / 2 + 1)? };
    Ok(rule.integrate(|x| x.powi(k as i32)))
}
