use std::collections::BTreeMap;

use skewcorr::correlations::{em_reduction_check, Ensemble, EnsembleSpec, NormalizationMode, PointConfiguration};
use skewcorr::kernels::KernelOptions;
use skewcorr::linalg::{determinant, pfaffian};
use skewcorr::measures::{quadrature, support_rule, Measure};
use skewcorr::montecarlo::{
    compare_density, endpoint_law, enumerate_vicious, pass_fraction, sample_dyson, sample_goe, sample_gse,
    sample_laguerre_orthogonal, simulate_walkers, survival_probability, DysonConfig, Histogram, SampleBatch,
};
use skewcorr::orthopoly::build_family;
use skewcorr::skewpoly::{classical_table, construct_from_gram, SkewPolySet};
use skewcorr::skewproduct::{OrthonormalBasis, SkewKernel, SkewSetup};
use skewcorr::Error as NumError;

use crate::config::{Case, Chain, Command, Family, RunConfig, Wrt};
use crate::error::CliError;
use crate::output::{Cell, Report};

/// Largest `N·K` cross-checked by path enumeration in `walkers`.
const ENUMERATION_LIMIT: usize = 24;

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let command = cfg.command.ok_or_else(|| CliError::Config("no command given".into()))?;
    let mut report = match command {
        Command::Density => density(cfg),
        Command::Correlate => correlate(cfg),
        Command::Skewpoly => skewpoly(cfg),
        Command::Verify => verify(cfg),
        Command::Mc => mc(cfg),
        Command::EmCheck => em_check(cfg),
        Command::Walkers => walkers(cfg),
    }?;
    report.command = command.name().to_string();
    Ok(report)
}

fn describe(cfg: &RunConfig, r: &mut Report) {
    let e = &cfg.ensemble;
    r.note("family", format!("{:?}", e.family).to_lowercase());
    r.note("case", format!("{:?}", e.case).to_lowercase());
    r.note("n", e.n);
    r.note("chain", format!("{:?}", e.chain).to_lowercase());
    if !e.times.is_empty() {
        r.note("times", format!("{:?}", e.times));
    }
}

fn slice_measure(e: &Ensemble, m: usize) -> Result<Measure, CliError> {
    let chain = &e.spec().chain;
    if m >= chain.len() {
        return Err(CliError::Config(format!("slice {m} out of range: chain has {} slices", chain.len())));
    }
    Ok(chain.slice(m).measure)
}

/// Number of physical eigenvalues per slice.
fn count(spec: &EnsembleSpec) -> usize {
    spec.n / spec.multiplicity as usize
}

fn density(cfg: &RunConfig) -> Result<Report, CliError> {
    let e = Ensemble::new(cfg.spec()?)?;
    let m = cfg.grid.slice;
    slice_measure(&e, m)?;
    let xs = cfg.grid()?;
    let vals = match cfg.ensemble.wrt {
        Wrt::Dx => e.density_dx_grid(m, &xs)?,
        Wrt::Mu => e.density_grid(m, &xs)?,
    };
    let mut r = Report::new("density", cfg.seed, &["slice", "x", "rho1"]);
    describe(cfg, &mut r);
    r.note("wrt", format!("{:?}", cfg.ensemble.wrt).to_lowercase());
    for (x, v) in xs.iter().zip(vals) {
        r.row(vec![m.into(), (*x).into(), v.into()]);
    }
    Ok(r)
}

fn correlate(cfg: &RunConfig) -> Result<Report, CliError> {
    let e = Ensemble::new(cfg.spec()?)?;
    let mut r = Report::new("correlate", cfg.seed, &["id", "rho"]);
    describe(cfg, &mut r);
    r.note("wrt", format!("{:?}", cfg.ensemble.wrt).to_lowercase());
    for (id, pts) in cfg.points.iter().enumerate() {
        let mut v = e.correlation_at(pts)?;
        if cfg.ensemble.wrt == Wrt::Dx {
            for &(m, x) in pts {
                v *= slice_measure(&e, m)?.weight(x);
            }
        }
        r.row(vec![id.into(), v.into()]);
    }
    Ok(r)
}

/// Measure and kernel of the skew base slice.
fn base_pair(cfg: &RunConfig) -> Result<(Measure, SkewKernel), CliError> {
    Ok(match cfg.ensemble.chain {
        Chain::Single | Chain::Separable => (cfg.measure()?, cfg.kernel()?),
        Chain::Dyson => (Measure::Hermite, SkewKernel::SignType),
        Chain::Walkers => (Measure::Gaussian { variance: cfg.ensemble.horizon.unwrap_or(1.0) }, SkewKernel::SignType),
    })
}

struct Constructed {
    /// Numerical set in the monic orthogonal basis.
    numeric: SkewPolySet,
    /// Printed table in the same basis, if listed.
    table: Option<SkewPolySet>,
    /// Residual of both sets against the Gram matrix.
    residuals: Vec<f64>,
}

fn construct(m: Measure, k: SkewKernel, n: usize, gauge: &[f64]) -> Result<Constructed, CliError> {
    let fam = build_family(&m, n - 1)?;
    let proj = SkewSetup::new(m, k)?.project(OrthonormalBasis::new(fam.clone(), n)?)?;
    let raw = construct_from_gram(proj.gram(), n, gauge)?;
    let mut residuals = vec![raw.residual(proj.gram())?];
    let inv_sqrt_h: Vec<f64> = (0..n).map(|j| (-0.5 * fam.ln_h(j)).exp()).collect();
    let numeric = raw.rescale_basis(&inv_sqrt_h)?.normalize_leading()?;
    let table = match classical_table(&m, k, n) {
        Ok(t) => {
            let sqrt_h: Vec<f64> = inv_sqrt_h.iter().map(|s| s.recip()).collect();
            residuals.push(t.rescale_basis(&sqrt_h)?.residual(proj.gram())?);
            Some(t.normalize_leading()?)
        }
        Err(NumError::UnlistedCombination(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Constructed { numeric, table, residuals })
}

/// Largest relative gap on gauge-invariant data: `r_k` and even rows.
fn table_gap(a: &SkewPolySet, b: &SkewPolySet) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in a.r().iter().zip(b.r()) {
        worst = worst.max((x - y).abs() / y.abs().max(f64::MIN_POSITIVE));
    }
    for row in (0..a.order()).step_by(2) {
        let (x, y) = (a.coeffs(row), b.coeffs(row));
        let scale = y.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        for (p, q) in x.iter().zip(y) {
            worst = worst.max((p - q).abs() / scale);
        }
    }
    worst
}

fn skewpoly(cfg: &RunConfig) -> Result<Report, CliError> {
    let (m, k) = base_pair(cfg)?;
    let n = cfg.pfaffian_size();
    let c = construct(m, k, n, &cfg.ensemble.gauge)?;
    let mut columns = vec!["source".to_string(), "row".into(), "r".into()];
    columns.extend((0..n).map(|j| format!("c{j}")));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut r = Report::new("skewpoly", cfg.seed, &cols);
    describe(cfg, &mut r);
    r.note("basis", "monic orthogonal polynomials of the measure");
    r.note("residual", format!("{:e} (tolerance {:e})", c.residuals[0], cfg.tolerances.residual));
    let mut ok = c.residuals.iter().all(|&x| x < cfg.tolerances.residual);
    let mut sets = vec![("constructed", &c.numeric)];
    match &c.table {
        Some(t) => {
            let gap = table_gap(&c.numeric, t);
            r.note("table_gap", format!("{gap:e} (tolerance {:e})", cfg.tolerances.table));
            ok &= gap < cfg.tolerances.table;
            sets.push(("table", t));
        }
        None => r.note("table", "none listed for this combination"),
    }
    for (source, set) in sets {
        for row in 0..n {
            let norm: Cell = set.r().get(row / 2).map_or(Cell::Text(String::new()), |&v| v.into());
            let mut cells = vec![source.into(), row.into(), norm];
            cells.extend(set.coeffs(row).iter().map(|&v| Cell::from(v)));
            cells.resize(n + 3, Cell::Num(0.0));
            r.row(cells);
        }
    }
    r.pass = Some(ok);
    Ok(r)
}

/// One line of a verification report.
struct Check {
    name: String,
    value: f64,
    tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance }
    }

    fn pass(&self) -> bool {
        self.value < self.tolerance
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Three probe points inside the support of `m`.
fn probes(m: &Measure, count: usize) -> Result<Vec<f64>, CliError> {
    if m.is_discrete() {
        // support points at the quartiles of the measure, made distinct
        let rule = m.discrete_rule(2 * count + 4)?;
        let len = rule.nodes.len();
        let mut cdf = rule.weights.clone();
        for i in 1..len {
            cdf[i] += cdf[i - 1];
        }
        let mut picks: Vec<usize> = Vec::new();
        for q in [0.25, 0.5, 0.75] {
            let i = cdf.iter().position(|&c| c >= q * cdf[len - 1]).unwrap_or(len - 1);
            let floor = picks.last().map_or(0, |&p| p + 1);
            picks.push(i.max(floor).min(len - 1));
        }
        picks.dedup();
        return Ok(picks.into_iter().map(|i| rule.nodes[i]).collect());
    }
    Ok(quadrature(m, 3)?.nodes)
}

fn verify(cfg: &RunConfig) -> Result<Report, CliError> {
    let tol = &cfg.tolerances;
    let spec = cfg.spec()?.with_mode(NormalizationMode::Rho);
    let e = Ensemble::new(spec.clone())?;
    let n_pts = count(&spec);
    let mut checks = Vec::new();

    let (bm, bk) = base_pair(cfg)?;
    let c = construct(bm, bk, spec.n.max(2), &[])?;
    checks.push(Check::new("skew_residual_constructed", c.residuals[0], tol.residual));
    if let Some(t) = &c.table {
        checks.push(Check::new("skew_residual_table", c.residuals[1], tol.residual));
        checks.push(Check::new("table_agreement", table_gap(&c.numeric, t), tol.table));
    }

    for m in 0..spec.chain.len() {
        let measure = slice_measure(&e, m)?;
        let xs = probes(&measure, n_pts)?;
        let pts: Vec<_> = xs.iter().map(|&x| e.kernel().point(m, x)).collect::<Result<_, _>>()?;
        let mat = e.kernel().matrix(&pts)?;
        let pf = pfaffian(&mat)?;
        // measured against the Hadamard bound, so vanishing ρ_k stays meaningful
        let d = mat.as_dense();
        let bound: f64 =
            (0..mat.dim()).map(|i| (0..mat.dim()).map(|j| d[(i, j)].powi(2)).sum::<f64>().sqrt()).product();
        let gap = (pf * pf - determinant(d)?).abs() / bound.max(f64::MIN_POSITIVE);
        checks.push(Check::new(format!("pfaffian_squared_vs_det[slice={m}]"), gap, tol.pfaffian));

        let rule = support_rule(&measure, n_pts, &[])?;
        let total: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| Ok(w * e.density_dx(m, x)?))
            .sum::<Result<f64, CliError>>()?;
        checks.push(Check::new(format!("sum_rule_rho1[slice={m}]"), rel(total, n_pts as f64), tol.sum_rule));
        if n_pts >= 2 {
            for &x in &xs {
                let rule = support_rule(&measure, n_pts, &[x])?;
                let mut two = 0.0;
                for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
                    two += w * e.correlation_at(&[(m, x), (m, y)])? * measure.weight(y);
                }
                let one = (n_pts - 1) as f64 * e.density(m, x)?;
                checks.push(Check::new(format!("sum_rule_rho2[slice={m} x={x:.6}]"), rel(two, one), tol.sum_rule));
            }
        }

        let pairs = spec.n / 2;
        if pairs > 0 {
            let gauge: Vec<f64> =
                (0..pairs).map(|k| if k % 2 == 0 { 1.5 + k as f64 } else { -2.0 - k as f64 }).collect();
            let shifted = Ensemble::new(spec.clone().with_options(KernelOptions { gauge, ..Default::default() }))?;
            let mut worst = 0.0f64;
            for k in 1..=n_pts.min(xs.len()) {
                let p: Vec<(usize, f64)> = xs[..k].iter().map(|&x| (m, x)).collect();
                let (a, b) = (e.correlation_at(&p)?, shifted.correlation_at(&p)?);
                if a != 0.0 || b != 0.0 {
                    worst = worst.max(rel(b, a));
                }
            }
            checks.push(Check::new(format!("gauge_invariance[slice={m}]"), worst, tol.gauge));
        }
    }

    if spec.is_separable() {
        let slices: Vec<Vec<f64>> = (0..spec.chain.len()).map(|m| vec![0.4 - 0.3 * m as f64]).collect();
        let red = em_reduction_check(&e, &PointConfiguration::new(slices))?;
        checks.push(Check::new("em_reduction", red.relative_gap(), tol.em));
    }

    let mut r = Report::new("verify", cfg.seed, &["check", "value", "tolerance", "pass"]);
    describe(cfg, &mut r);
    r.note("mode", "rho");
    for c in &checks {
        r.row(vec![c.name.clone().into(), c.value.into(), c.tolerance.into(), c.pass().into()]);
    }
    r.pass = Some(checks.iter().all(Check::pass));
    Ok(r)
}

fn mc(cfg: &RunConfig) -> Result<Report, CliError> {
    let e = &cfg.ensemble;
    let (mc, seed) = (&cfg.mc, cfg.seed);
    let spec = cfg.spec()?.with_mode(NormalizationMode::Rho);
    let (batch, slice): (SampleBatch, usize) = match (e.chain, e.family, e.case) {
        (Chain::Single, Family::Hermite, Case::Sign) => (sample_goe(e.n, mc.count, seed)?, 0),
        (Chain::Single, Family::Hermite, Case::Derivative) => (sample_gse(e.n, mc.count, seed)?, 0),
        (Chain::Single, Family::Laguerre, Case::Sign) => {
            let a = e.a.unwrap_or(0.0);
            if a < 0.0 || a.fract() != 0.0 {
                return Err(CliError::Config(format!("the Laguerre sampler needs a non-negative integer a, got {a}")));
            }
            (sample_laguerre_orthogonal(e.n, a as usize, mc.count, seed)?, 0)
        }
        (Chain::Dyson, _, _) => {
            let slice = mc.slice.unwrap_or(e.times.len().saturating_sub(1));
            let mut batches =
                sample_dyson(&DysonConfig { n: e.n, times: e.times.clone(), step: mc.step, count: mc.count, seed })?;
            if slice >= batches.len() {
                return Err(CliError::Config(format!("mc.slice {slice} out of range")));
            }
            (batches.swap_remove(slice), slice)
        }
        (chain, family, case) => {
            return Err(CliError::Config(format!("no sampler for {chain:?} {family:?} with case {case:?}")));
        }
    };
    let ens = Ensemble::new(spec)?;
    let hist = Histogram::new(&batch.values(), mc.binning)?;
    let bins = compare_density(&hist, batch.len(), batch.n, |x| ens.density_dx(slice, x))?;
    let frac = pass_fraction(&bins, cfg.tolerances.zscore);
    let mut r = Report::new("mc", seed, &["bin_left", "bin_right", "empirical", "analytic", "zscore"]);
    describe(cfg, &mut r);
    r.note("slice", slice);
    r.note("samples", batch.len());
    r.note("outside", hist.outside);
    r.note(
        "pass_fraction",
        format!("{frac} of bins with |z| < {} (tolerance >= {})", cfg.tolerances.zscore, cfg.tolerances.pass_fraction),
    );
    for b in &bins {
        r.row(vec![b.bin_left.into(), b.bin_right.into(), b.empirical.into(), b.analytic.into(), b.zscore.into()]);
    }
    r.pass = Some(frac >= cfg.tolerances.pass_fraction);
    Ok(r)
}

fn em_check(cfg: &RunConfig) -> Result<Report, CliError> {
    if cfg.ensemble.chain != Chain::Separable {
        return Err(CliError::Config("em-check needs chain = \"separable\"".into()));
    }
    let e = Ensemble::new(cfg.spec()?.with_mode(NormalizationMode::Rho))?;
    let slices = e.spec().chain.len();
    let tuples: Vec<Vec<(usize, f64)>> = if cfg.points.is_empty() {
        vec![(0..slices).map(|m| (m, 0.4 - 0.3 * m as f64)).collect()]
    } else {
        cfg.points.clone()
    };
    let tol = cfg.tolerances.em;
    let mut r = Report::new("em-check", cfg.seed, &["id", "lhs", "rhs", "relative_gap", "tolerance", "pass"]);
    describe(cfg, &mut r);
    let mut ok = true;
    for (id, pts) in tuples.iter().enumerate() {
        let red = em_reduction_check(&e, &PointConfiguration::from_pairs(pts))?;
        let gap = red.relative_gap();
        ok &= gap < tol;
        r.row(vec![id.into(), red.lhs.into(), red.rhs.into(), gap.into(), tol.into(), (gap < tol).into()]);
    }
    r.pass = Some(ok);
    Ok(r)
}

fn walkers(cfg: &RunConfig) -> Result<Report, CliError> {
    let w = cfg.walkers.config()?;
    let count = cfg.walkers.count;
    if count == 0 {
        return Err(CliError::Config("walkers.count must be positive".into()));
    }
    let law = endpoint_law(&w)?;
    let tol = &cfg.tolerances;
    let mut r = {
        let mut cols: Vec<String> = (1..=w.n).map(|j| format!("e{j}")).collect();
        cols.extend(["exact".into(), "empirical".into()]);
        let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
        Report::new("walkers", cfg.seed, &cols)
    };
    r.note("walkers", w.n);
    r.note("steps", w.horizon);
    r.note("starts", format!("{:?}", w.starts));
    r.note("survival", survival_probability(&w)?);
    let mut ok = true;
    if w.n * w.horizon <= ENUMERATION_LIMIT {
        let brute = enumerate_vicious(&w)?;
        let surv: f64 = brute.values().sum();
        let keys: std::collections::BTreeSet<&Vec<i64>> = brute.keys().chain(law.keys()).collect();
        let gap = keys
            .into_iter()
            .map(|k| (law.get(k).copied().unwrap_or(0.0) - brute.get(k).copied().unwrap_or(0.0) / surv).abs())
            .fold(0.0f64, f64::max);
        r.note("enumeration_gap", format!("{gap:e} (tolerance {:e})", tol.enumeration));
        ok &= gap < tol.enumeration;
    }
    let batch = &simulate_walkers(&w, count, cfg.seed)?[0];
    let scale = w.scaling.sqrt();
    let mut hits = BTreeMap::<Vec<i64>, u64>::new();
    for s in &batch.samples {
        *hits.entry(s.iter().map(|x| (x * scale).round() as i64).collect()).or_default() += 1;
    }
    let freq: BTreeMap<Vec<i64>, f64> = hits.into_iter().map(|(k, c)| (k, c as f64 / count as f64)).collect();
    let (mut tv, mut sigma) = (0.0, 0.0);
    for (ends, &p) in &law {
        let f = freq.get(ends).copied().unwrap_or(0.0);
        tv += 0.5 * (f - p).abs();
        sigma += 0.5 * (p * (1.0 - p) / count as f64).sqrt();
        let mut cells: Vec<Cell> = ends.iter().map(|&e| e.into()).collect();
        cells.extend([p.into(), f.into()]);
        r.row(cells);
    }
    // simulated ends outside the exact support also count
    tv += 0.5 * freq.iter().filter(|(k, _)| !law.contains_key(*k)).map(|(_, f)| f).sum::<f64>();
    r.note("total_variation", format!("{tv:e} (tolerance {} sigma = {:e})", tol.tv_sigmas, tol.tv_sigmas * sigma));
    ok &= tv < tol.tv_sigmas * sigma;
    r.pass = Some(ok);
    Ok(r)
}
