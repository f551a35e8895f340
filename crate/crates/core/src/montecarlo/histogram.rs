use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::gauss_legendre;

/// Bin layout for a histogram.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Binning {
    /// Width `2·IQR·n^{-1/3}` over the data range.
    #[default]
    FreedmanDiaconis,
    Fixed {
        lo: f64,
        hi: f64,
        bins: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Values that fell outside the edges.
    pub outside: u64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

impl Histogram {
    pub fn new(values: &[f64], binning: Binning) -> Result<Self> {
        let edges: Vec<f64> = match binning {
            Binning::Fixed { lo, hi, bins } => {
                if bins == 0 || !(hi > lo) {
                    return Err(Error::InvalidParameter(format!("bad bins: [{lo}, {hi}] with {bins}")));
                }
                (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect()
            }
            Binning::FreedmanDiaconis => {
                if values.len() < 2 {
                    return Err(Error::InvalidParameter("need at least two values".into()));
                }
                let mut s = values.to_vec();
                s.sort_by(f64::total_cmp);
                let (lo, hi) = (s[0], s[s.len() - 1]);
                let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
                let mut width = 2.0 * iqr / (s.len() as f64).cbrt();
                if !(width > 0.0) {
                    width = (hi - lo).max(1.0);
                }
                let bins = (((hi - lo) / width).ceil() as usize).max(1);
                (0..=bins).map(|k| lo + width * k as f64).collect()
            }
        };
        let mut h = Self { counts: vec![0; edges.len() - 1], edges, outside: 0 };
        for &v in values {
            h.add(v);
        }
        Ok(h)
    }

    fn add(&mut self, v: f64) {
        let (lo, hi) = (self.edges[0], self.edges[self.edges.len() - 1]);
        if !(v >= lo && v <= hi) {
            self.outside += 1;
            return;
        }
        // right-closed last bin
        let k = self.edges.partition_point(|&e| e <= v).clamp(1, self.counts.len());
        self.counts[k - 1] += 1;
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Merges counts from a histogram with identical edges.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::InvalidParameter("histogram edges differ".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.outside += other.outside;
        Ok(())
    }
}

/// One bin of an empirical-versus-analytic comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinComparison {
    pub bin_left: f64,
    pub bin_right: f64,
    /// Empirical density: count per sample per unit length.
    pub empirical: f64,
    /// Bin average of the analytic density.
    pub analytic: f64,
    pub zscore: f64,
}

/// Compares a histogram of all values from `samples` draws of `n` points
/// with the one-point density `rho_dx` (integrating to `n`). Counts are
/// treated as binomial with `samples·n` trials.
pub fn compare_density(
    hist: &Histogram,
    samples: usize,
    n: usize,
    rho_dx: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<BinComparison>> {
    let rule = gauss_legendre(16);
    let trials = (samples * n) as f64;
    hist.edges
        .windows(2)
        .zip(&hist.counts)
        .map(|(e, &c)| {
            let (a, b) = (e[0], e[1]);
            let width = b - a;
            let mapped = rule.mapped(a, b);
            let mut mass = 0.0;
            for (x, w) in mapped.nodes.iter().zip(&mapped.weights) {
                mass += w * rho_dx(*x)?;
            }
            let p = (mass / n as f64).clamp(0.0, 1.0);
            let expected = trials * p;
            let sd = (trials * p * (1.0 - p)).sqrt();
            let diff = c as f64 - expected;
            let zscore = if sd > 0.0 {
                diff / sd
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            Ok(BinComparison {
                bin_left: a,
                bin_right: b,
                empirical: c as f64 / (samples as f64 * width),
                analytic: mass / width,
                zscore,
            })
        })
        .collect()
}

/// Fraction of bins with `|z| < limit`.
pub fn pass_fraction(bins: &[BinComparison], limit: f64) -> f64 {
    if bins.is_empty() {
        return 0.0;
    }
    bins.iter().filter(|b| b.zscore.abs() < limit).count() as f64 / bins.len() as f64
}
