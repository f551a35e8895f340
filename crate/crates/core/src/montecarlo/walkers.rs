use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{parallel_draw, EnsembleTag, SampleBatch};
use crate::error::{Error, Result};
use crate::linalg::{determinant, DenseMatrix};
use crate::measures::ln_fact;

/// Lowest tolerated acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-6;
/// Attempts allowed per accepted path.
const RATE_WINDOW: u64 = (1.0 / MIN_ACCEPTANCE) as u64;
/// Largest `N·K` for exhaustive path enumeration.
const ENUMERATION_LIMIT: usize = 24;

/// Nonintersecting simple random walkers on the integer lattice.
///
/// Positions are raw lattice sites: walkers start at even sites and move
/// by ±1 each step. Scaled positions are `site/√L` and scaled times `k/L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerConfig {
    pub n: usize,
    /// Number of steps `K`, even.
    pub horizon: usize,
    /// Steps at which positions are recorded.
    pub slices: Vec<usize>,
    /// Starting sites, even and strictly increasing.
    pub starts: Vec<i64>,
    /// Scaling parameter `L`.
    pub scaling: f64,
}

impl WalkerConfig {
    /// Walkers packed around the origin at sites `0, ±2, …`.
    pub fn new(n: usize, horizon: usize, slices: Vec<usize>, scaling: f64) -> Result<Self> {
        let shift = ((n.max(1) - 1) / 2) as i64;
        let starts = (0..n as i64).map(|j| 2 * (j - shift)).collect();
        let cfg = Self { n, horizon, slices, starts, scaling };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_starts(mut self, starts: Vec<i64>) -> Result<Self> {
        self.starts = starts;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n == 0 || self.n > 64 {
            return bad(format!("walker count must be in 1..=64, got {}", self.n));
        }
        if !self.horizon.is_multiple_of(2) {
            return bad(format!("horizon K must be even, got {}", self.horizon));
        }
        if self.starts.len() != self.n || !increasing(&self.starts) || self.starts.iter().any(|s| s % 2 != 0) {
            return bad(format!("starts must be {} strictly increasing even sites, got {:?}", self.n, self.starts));
        }
        if self.slices.windows(2).any(|w| w[0] >= w[1]) || self.slices.iter().any(|&k| k > self.horizon) {
            return bad(format!("slices must increase within 0..={}, got {:?}", self.horizon, self.slices));
        }
        if !(self.scaling > 0.0) {
            return bad(format!("scaling L must be positive, got {}", self.scaling));
        }
        Ok(())
    }

    /// `k/L` for each recorded slice.
    pub fn scaled_times(&self) -> Vec<f64> {
        self.slices.iter().map(|&k| k as f64 / self.scaling).collect()
    }

    /// `K/L`.
    pub fn scaled_horizon(&self) -> f64 {
        self.horizon as f64 / self.scaling
    }
}

fn increasing(v: &[i64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Probability that a single walk goes from `s` to `e` in `k` steps.
fn step_law(k: usize, s: i64, e: i64) -> f64 {
    let twice_up = k as i64 + e - s;
    if twice_up < 0 || twice_up % 2 != 0 || twice_up / 2 > k as i64 {
        return 0.0;
    }
    let up = (twice_up / 2) as f64;
    let k = k as f64;
    (ln_fact(k) - ln_fact(up) - ln_fact(k - up) - k * std::f64::consts::LN_2).exp()
}

/// Probability that the walkers survive `K` steps and end at `ends`:
/// `2^{-KN} det[C(K, (K + e_j - s_l)/2)]`.
pub fn vicious_count(cfg: &WalkerConfig, ends: &[i64]) -> Result<f64> {
    cfg.validate()?;
    if ends.len() != cfg.n || !increasing(ends) {
        return Err(Error::InvalidParameter(format!("ends must be {} strictly increasing sites, got {ends:?}", cfg.n)));
    }
    let m = DenseMatrix::from_fn(cfg.n, cfg.n, |j, l| step_law(cfg.horizon, cfg.starts[l], ends[j]));
    determinant(&m)
}

/// Every strictly increasing end configuration within reach.
fn reachable_ends(cfg: &WalkerConfig) -> Vec<Vec<i64>> {
    let k = cfg.horizon as i64;
    let lo = cfg.starts[0] - k;
    let hi = cfg.starts[cfg.n - 1] + k;
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(cfg.n);
    fn rec(lo: i64, hi: i64, n: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        let first = cur.last().map_or(lo, |&p| p + 2);
        let mut e = first;
        while e <= hi {
            cur.push(e);
            rec(lo, hi, n, cur, out);
            cur.pop();
            e += 2;
        }
    }
    rec(lo, hi, cfg.n, &mut cur, &mut out);
    out
}

/// Total survival probability, summed from the determinant law.
pub fn survival_probability(cfg: &WalkerConfig) -> Result<f64> {
    reachable_ends(cfg).iter().map(|e| vicious_count(cfg, e)).sum()
}

/// End-point law conditioned on survival, from the determinant formula.
/// Only configurations of positive probability are listed.
pub fn endpoint_law(cfg: &WalkerConfig) -> Result<BTreeMap<Vec<i64>, f64>> {
    cfg.validate()?;
    let mut law = BTreeMap::new();
    let mut total = 0.0;
    for ends in reachable_ends(cfg) {
        let p = vicious_count(cfg, &ends)?;
        if p > 0.0 {
            total += p;
            law.insert(ends, p);
        }
    }
    if !(total > 0.0) {
        return Err(Error::TooConstrained(0.0));
    }
    law.values_mut().for_each(|p| *p /= total);
    Ok(law)
}

/// Exact end-point law of surviving walkers by listing all `2^{NK}` paths.
pub fn enumerate_vicious(cfg: &WalkerConfig) -> Result<BTreeMap<Vec<i64>, f64>> {
    cfg.validate()?;
    let total_bits = cfg.n * cfg.horizon;
    if total_bits > ENUMERATION_LIMIT {
        return Err(Error::InvalidParameter(format!("N·K = {total_bits} too large to enumerate")));
    }
    let weight = 0.5f64.powi(total_bits as i32);
    let mut law = BTreeMap::new();
    let mut pos = cfg.starts.clone();
    'paths: for bits in 0u64..1 << total_bits {
        pos.copy_from_slice(&cfg.starts);
        for k in 0..cfg.horizon {
            for (j, p) in pos.iter_mut().enumerate() {
                *p += if bits >> (k * cfg.n + j) & 1 == 1 { 1 } else { -1 };
            }
            if !increasing(&pos) {
                continue 'paths;
            }
        }
        *law.entry(pos.clone()).or_insert(0.0) += weight;
    }
    Ok(law)
}

/// Rejection-sampled nonintersecting paths, one batch of scaled positions
/// per recorded slice.
pub fn simulate_walkers(cfg: &WalkerConfig, count: usize, seed: u64) -> Result<Vec<SampleBatch>> {
    cfg.validate()?;
    let scale = cfg.scaling.sqrt().recip();
    let paths = parallel_draw_walkers(cfg, count, seed)?;
    Ok(cfg
        .slices
        .iter()
        .enumerate()
        .map(|(m, &step)| SampleBatch {
            tag: EnsembleTag::Walkers { step },
            n: cfg.n,
            seed,
            samples: paths.iter().map(|p| p[m].iter().map(|&s| s as f64 * scale).collect()).collect(),
        })
        .collect())
}

fn parallel_draw_walkers(cfg: &WalkerConfig, count: usize, seed: u64) -> Result<Vec<Vec<Vec<i64>>>> {
    parallel_draw(count, seed, |rng| {
        let mut pos = cfg.starts.clone();
        let mut record = Vec::with_capacity(cfg.slices.len());
        let mut attempts = 0u64;
        loop {
            attempts += 1;
            // no acceptance in a full window bounds the rate below MIN_ACCEPTANCE
            if attempts > RATE_WINDOW {
                return Err(Error::TooConstrained(1.0 / attempts as f64));
            }
            pos.copy_from_slice(&cfg.starts);
            record.clear();
            let mut next = 0;
            let mut alive = true;
            for k in 0..=cfg.horizon {
                if k > 0 {
                    let bits = rng.next_u64();
                    for (j, p) in pos.iter_mut().enumerate() {
                        *p += if bits >> j & 1 == 1 { 1 } else { -1 };
                    }
                    if !increasing(&pos) {
                        alive = false;
                        break;
                    }
                }
                if next < cfg.slices.len() && cfg.slices[next] == k {
                    record.push(pos.clone());
                    next += 1;
                }
            }
            if alive {
                return Ok(record);
            }
        }
    })
}
