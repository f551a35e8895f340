//! Composite quadrature for `∫∫ ν(x)ν(y) f(x) g(y) sgn(y-x)`.
//!
//! The sign kernel breaks polynomial exactness of a single Gauss rule, so
//! the line is cut into panels at the Gauss nodes of the reference measure.
//! Running partial integrals `P_j(y) = ∫_lo^y ν b_j` are exact per panel;
//! panels touching an algebraic endpoint singularity use Gauss–Jacobi rules
//! in both the outer and the inner integral.

use crate::error::{Error, Result};
use crate::measures::{quadrature, IntegrationRule, Measure};

use super::Basis;

const ORDER: usize = 20;
/// Log-envelope drop at which an infinite end is cut.
const TAIL_DROP: f64 = 46.0;

/// `ν(y) = exp(k0 - c2 y² - c1 y) (y-lo)^{e_lo} (hi-y)^{e_hi}`, the power
/// factors present only at finite ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct WeightShape {
    pub lo: f64,
    pub hi: f64,
    pub e_lo: f64,
    pub e_hi: f64,
    pub k0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl WeightShape {
    fn ln_smooth(&self, y: f64) -> f64 {
        self.k0 - self.c2 * y * y - self.c1 * y
    }

    fn ln_lo_factor(&self, y: f64) -> f64 {
        if self.lo.is_finite() {
            self.e_lo * (y - self.lo).ln()
        } else {
            0.0
        }
    }

    fn ln_hi_factor(&self, y: f64) -> f64 {
        if self.hi.is_finite() {
            self.e_hi * (self.hi - y).ln()
        } else {
            0.0
        }
    }

    pub fn ln_nu(&self, y: f64) -> f64 {
        self.ln_smooth(y) + self.ln_lo_factor(y) + self.ln_hi_factor(y)
    }

    /// `ν` without the `(y-lo)^{e_lo}` factor.
    fn nu_sans_lo(&self, y: f64) -> f64 {
        (self.ln_smooth(y) + self.ln_hi_factor(y)).exp()
    }

    /// `ν` without the `(hi-y)^{e_hi}` factor.
    fn nu_sans_hi(&self, y: f64) -> f64 {
        (self.ln_smooth(y) + self.ln_lo_factor(y)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PanelKind {
    Plain,
    Left,
    Right,
}

#[derive(Debug, Clone)]
struct Rules {
    gl: IntegrationRule,
    /// weight `(1+t)^{e_lo}` and `(1+t)^{2 e_lo + 1}` on `[-1, 1]`
    lo_inner: Option<IntegrationRule>,
    lo_outer: Option<IntegrationRule>,
    /// weight `(1-t)^{e_hi}` and `(1-t)^{2 e_hi + 1}`
    hi_inner: Option<IntegrationRule>,
    hi_outer: Option<IntegrationRule>,
}

/// Cached panel layout and boundary partials for one basis.
#[derive(Debug, Clone)]
pub(crate) struct Panels {
    shape: WeightShape,
    breaks: Vec<f64>,
    partial: Vec<Vec<f64>>,
    total: Vec<f64>,
    rules: Rules,
    dim: usize,
}

/// Rule for `∫_lo^hi (y-lo)^e h(y) dy` given the `(1+t)^e` rule on `[-1,1]`.
fn map_left(rule: &IntegrationRule, e: f64, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let half = 0.5 * (hi - lo);
    let scale = half.powf(e + 1.0);
    let nodes = rule.nodes.iter().map(|&t| lo + half * (1.0 + t)).collect();
    let weights = rule.weights.iter().map(|&w| w * scale).collect();
    (nodes, weights)
}

/// Rule for `∫_lo^hi (hi-y)^e h(y) dy` given the `(1-t)^e` rule on `[-1,1]`.
fn map_right(rule: &IntegrationRule, e: f64, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let half = 0.5 * (hi - lo);
    let scale = half.powf(e + 1.0);
    let nodes = rule.nodes.iter().map(|&t| hi - half * (1.0 - t)).collect();
    let weights = rule.weights.iter().map(|&w| w * scale).collect();
    (nodes, weights)
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (s, &v) in acc.iter_mut().zip(x) {
        *s += a * v;
    }
}

impl Panels {
    /// Lays out panels for `basis` and returns them with the matrix
    /// `A_{jl} = ∫ ν P_j b_l`; the skew Gram is `A - Aᵀ`.
    pub fn build<B: Basis + ?Sized>(shape: WeightShape, measure: &Measure, basis: &B) -> Result<(Panels, Vec<f64>)> {
        let dim = basis.dim();
        let jac = |a: f64, b: f64| quadrature(&Measure::Jacobi { a, b }, ORDER);
        let rules = Rules {
            gl: jac(0.0, 0.0)?,
            lo_inner: if shape.lo.is_finite() { Some(jac(0.0, shape.e_lo)?) } else { None },
            lo_outer: if shape.lo.is_finite() { Some(jac(0.0, 2.0 * shape.e_lo + 1.0)?) } else { None },
            hi_inner: if shape.hi.is_finite() { Some(jac(shape.e_hi, 0.0)?) } else { None },
            hi_outer: if shape.hi.is_finite() { Some(jac(2.0 * shape.e_hi + 1.0, 0.0)?) } else { None },
        };
        let breaks = layout(&shape, measure, basis)?;
        let mut panels = Panels { shape, breaks, partial: Vec::new(), total: vec![0.0; dim], rules, dim };
        let np = panels.breaks.len() - 1;
        let mut acc = vec![0.0; dim];
        let mut partial = Vec::with_capacity(np + 1);
        partial.push(acc.clone());
        let mut buf = vec![0.0; dim];
        for i in 0..np {
            let (lo, hi) = (panels.breaks[i], panels.breaks[i + 1]);
            match panels.kind(i) {
                PanelKind::Left => {
                    let r = panels.rules.lo_inner.as_ref().expect("finite lo");
                    let (ys, ws) = map_left(r, shape.e_lo, lo, hi);
                    for (&y, &w) in ys.iter().zip(&ws) {
                        basis.eval(y, &mut buf);
                        axpy(&mut acc, w * shape.nu_sans_lo(y), &buf);
                    }
                }
                PanelKind::Right => {
                    let r = panels.rules.hi_inner.as_ref().expect("finite hi");
                    let (ys, ws) = map_right(r, shape.e_hi, lo, hi);
                    for (&y, &w) in ys.iter().zip(&ws) {
                        basis.eval(y, &mut buf);
                        axpy(&mut acc, w * shape.nu_sans_hi(y), &buf);
                    }
                }
                PanelKind::Plain => {
                    let r = panels.rules.gl.mapped(lo, hi);
                    for (&y, &w) in r.nodes.iter().zip(&r.weights) {
                        basis.eval(y, &mut buf);
                        axpy(&mut acc, w * shape.ln_nu(y).exp(), &buf);
                    }
                }
            }
            partial.push(acc.clone());
        }
        panels.total = acc;
        panels.partial = partial;

        let mut a = vec![0.0; dim * dim];
        let mut pv = vec![0.0; dim];
        let add = |a: &mut [f64], omega: f64, p: &[f64], b: &[f64]| {
            for (j, &pj) in p.iter().enumerate() {
                let c = omega * pj;
                if c == 0.0 {
                    continue;
                }
                axpy(&mut a[j * dim..(j + 1) * dim], c, b);
            }
        };
        for i in 0..np {
            let (lo, hi) = (panels.breaks[i], panels.breaks[i + 1]);
            match panels.kind(i) {
                PanelKind::Left => {
                    let r = panels.rules.lo_outer.as_ref().expect("finite lo");
                    let (ys, ws) = map_left(r, 2.0 * shape.e_lo + 1.0, lo, hi);
                    for (&y, &w) in ys.iter().zip(&ws) {
                        panels.left_reduced(y, &mut pv, basis, &mut buf);
                        basis.eval(y, &mut buf);
                        add(&mut a, w * shape.nu_sans_lo(y), &pv, &buf);
                    }
                }
                PanelKind::Right => {
                    let r = panels.rules.hi_inner.as_ref().expect("finite hi");
                    let (ys, ws) = map_right(r, shape.e_hi, lo, hi);
                    for (&y, &w) in ys.iter().zip(&ws) {
                        basis.eval(y, &mut buf);
                        add(&mut a, w * shape.nu_sans_hi(y), &panels.total, &buf);
                    }
                    let r = panels.rules.hi_outer.as_ref().expect("finite hi");
                    let (ys, ws) = map_right(r, 2.0 * shape.e_hi + 1.0, lo, hi);
                    for (&y, &w) in ys.iter().zip(&ws) {
                        panels.right_reduced(y, &mut pv, basis, &mut buf);
                        basis.eval(y, &mut buf);
                        add(&mut a, -w * shape.nu_sans_hi(y), &pv, &buf);
                    }
                }
                PanelKind::Plain => {
                    let r = panels.rules.gl.mapped(lo, hi);
                    for (&y, &w) in r.nodes.iter().zip(&r.weights) {
                        pv.copy_from_slice(&panels.partial[i]);
                        panels.plain_inner(lo, y, &mut pv, basis, &mut buf);
                        basis.eval(y, &mut buf);
                        add(&mut a, w * shape.ln_nu(y).exp(), &pv, &buf);
                    }
                }
            }
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::KernelMeasureMismatch("non-finite skew product".into()));
        }
        Ok((panels, a))
    }

    fn kind(&self, i: usize) -> PanelKind {
        let np = self.breaks.len() - 1;
        if i == 0 && self.shape.lo.is_finite() {
            PanelKind::Left
        } else if i + 1 == np && self.shape.hi.is_finite() {
            PanelKind::Right
        } else {
            PanelKind::Plain
        }
    }

    /// `∫_0^1 s^e ν̃(lo + s(y-lo)) b(lo + s(y-lo)) ds`, so that
    /// `P(y) = (y-lo)^{e+1}` times this.
    fn left_reduced<B: Basis + ?Sized>(&self, y: f64, out: &mut [f64], basis: &B, buf: &mut [f64]) {
        let r = self.rules.lo_inner.as_ref().expect("finite lo");
        let (ss, ws) = map_left(r, self.shape.e_lo, 0.0, 1.0);
        out.iter_mut().for_each(|v| *v = 0.0);
        let lo = self.shape.lo;
        for (&s, &w) in ss.iter().zip(&ws) {
            let t = lo + s * (y - lo);
            basis.eval(t, buf);
            axpy(out, w * self.shape.nu_sans_lo(t), buf);
        }
    }

    /// Right-end analogue: `∫_y^hi ν b = (hi-y)^{e+1}` times this.
    fn right_reduced<B: Basis + ?Sized>(&self, y: f64, out: &mut [f64], basis: &B, buf: &mut [f64]) {
        let r = self.rules.lo_inner_for_hi();
        let (ss, ws) = map_left(&r, self.shape.e_hi, 0.0, 1.0);
        out.iter_mut().for_each(|v| *v = 0.0);
        let hi = self.shape.hi;
        for (&s, &w) in ss.iter().zip(&ws) {
            let t = hi - s * (hi - y);
            basis.eval(t, buf);
            axpy(out, w * self.shape.nu_sans_hi(t), buf);
        }
    }

    /// Adds `∫_lo^y ν b` over a smooth stretch.
    fn plain_inner<B: Basis + ?Sized>(&self, lo: f64, y: f64, out: &mut [f64], basis: &B, buf: &mut [f64]) {
        if y <= lo {
            return;
        }
        let r = self.rules.gl.mapped(lo, y);
        for (&t, &w) in r.nodes.iter().zip(&r.weights) {
            basis.eval(t, buf);
            axpy(out, w * self.shape.ln_nu(t).exp(), buf);
        }
    }

    pub fn total(&self) -> &[f64] {
        &self.total
    }

    /// `P_j(x) = ∫_lo^x ν b_j` for all `j`.
    pub fn partial_at<B: Basis + ?Sized>(&self, x: f64, basis: &B, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let first = self.breaks[0];
        let last = *self.breaks.last().expect("nonempty layout");
        if x <= first {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        if x >= last {
            out.copy_from_slice(&self.total);
            return;
        }
        let i = self.breaks.partition_point(|&t| t <= x) - 1;
        let mut buf = vec![0.0; self.dim];
        match self.kind(i) {
            PanelKind::Left => {
                self.left_reduced(x, out, basis, &mut buf);
                let f = (x - self.shape.lo).powf(self.shape.e_lo + 1.0);
                out.iter_mut().for_each(|v| *v *= f);
            }
            PanelKind::Right => {
                self.right_reduced(x, out, basis, &mut buf);
                let f = (self.shape.hi - x).powf(self.shape.e_hi + 1.0);
                for (v, &t) in out.iter_mut().zip(&self.total) {
                    *v = t - f * *v;
                }
            }
            PanelKind::Plain => {
                out.copy_from_slice(&self.partial[i]);
                self.plain_inner(self.breaks[i], x, out, basis, &mut buf);
            }
        }
    }

    #[cfg(test)]
    pub fn panel_count(&self) -> usize {
        self.breaks.len() - 1
    }
}

impl Rules {
    /// The `s^{e_hi}` rule on `[-1,1]` in left-weight orientation.
    fn lo_inner_for_hi(&self) -> IntegrationRule {
        let r = self.hi_inner.as_ref().expect("finite hi");
        // (1-t)^e mirrored to (1+t)^e
        IntegrationRule {
            nodes: r.nodes.iter().rev().map(|&t| -t).collect(),
            weights: r.weights.iter().rev().copied().collect(),
        }
    }
}

/// Breakpoints: finite ends, the Gauss nodes of `measure`, and geometric
/// extensions toward infinite ends until the envelope
/// `ν(y) Σ_j |b_j(y)|` has dropped by `TAIL_DROP` in log.
fn layout<B: Basis + ?Sized>(shape: &WeightShape, measure: &Measure, basis: &B) -> Result<Vec<f64>> {
    let dim = basis.dim();
    let order = (dim + 8).max(4);
    let nodes = quadrature(measure, order)?.nodes;
    let mut buf = vec![0.0; dim];
    let mut env = |y: f64| {
        basis.eval(y, &mut buf);
        let s: f64 = buf.iter().map(|v| v.abs()).sum();
        shape.ln_nu(y) + s.ln()
    };
    let peak = nodes.iter().map(|&y| env(y)).fold(f64::NEG_INFINITY, f64::max);
    let extend = |start: f64, gap0: f64, dir: f64, env: &mut dyn FnMut(f64) -> f64| -> Result<Vec<f64>> {
        let mut out = Vec::new();
        let mut y = start;
        let mut gap = gap0;
        let mut prev = env(y);
        let mut top = peak.max(prev);
        for _ in 0..20_000 {
            gap = (gap * 1.2).min(4.0 * gap0);
            y += dir * gap;
            out.push(y);
            let e = env(y);
            top = top.max(e);
            if e < top - TAIL_DROP && e < prev {
                return Ok(out);
            }
            prev = e;
        }
        Err(Error::KernelMeasureMismatch("weight envelope does not decay".into()))
    };
    let n = nodes.len();
    let gap_lo = if n > 1 { nodes[1] - nodes[0] } else { 1.0 };
    let gap_hi = if n > 1 { nodes[n - 1] - nodes[n - 2] } else { 1.0 };
    let mut breaks = Vec::with_capacity(n + 64);
    if shape.lo.is_finite() {
        breaks.push(shape.lo);
    } else {
        let mut left = extend(nodes[0], gap_lo, -1.0, &mut env)?;
        left.reverse();
        breaks.extend(left);
    }
    breaks.extend_from_slice(&nodes);
    if shape.hi.is_finite() {
        breaks.push(shape.hi);
    } else {
        breaks.extend(extend(nodes[n - 1], gap_hi, 1.0, &mut env)?);
    }
    Ok(breaks)
}
