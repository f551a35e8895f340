//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skewcorr::correlations::{em_reduction_check, Ensemble, EnsembleSpec, PointConfiguration};
use skewcorr::eynard_mehta::{biorthogonalize, em_correlation, HermitianChain};
use skewcorr::kernels::KernelOptions;
use skewcorr::linalg::{determinant, pfaffian, AntisymMatrix};
use skewcorr::measures::{gauss_legendre, IntegrationRule, Measure};
use skewcorr::montecarlo::{
    compare_density, enumerate_vicious, pass_fraction, sample_dyson, sample_goe, sample_gse, simulate_walkers,
    survival_probability, vicious_count, Binning, DysonConfig, Histogram, SampleBatch, WalkerConfig,
};
use skewcorr::orthopoly::build_family;
use skewcorr::skewpoly::{classical_table, construct_from_gram, SkewPolySet};
use skewcorr::skewproduct::{OrthonormalBasis, SkewKernel, SkewSetup};

type Outcome = Result<String, String>;
type Joint = fn(&[f64]) -> f64;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Fails with `what` unless `ok`.
fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn err(e: skewcorr::Error) -> String {
    e.to_string()
}

// 1 ------------------------------------------------------------------------

fn pfaffian_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let n = 2 * (1 + trial % 10);
        let a = AntisymMatrix::from_upper(n, |_, _| rng.random_range(-1.0..1.0));
        let pf = pfaffian(&a).map_err(err)?;
        let det = determinant(a.as_dense()).map_err(err)?;
        worst = worst.max(rel(pf * pf, det));
    }
    ensure(worst < 1e-10, || format!("Pf² vs det rel {worst:e}"))?;
    let (a, b, c, d, e, f): (f64, f64, f64, f64, f64, f64) = (1.5, -0.25, 2.0, 0.75, -3.0, 0.5);
    let m = AntisymMatrix::from_upper(4, |i, j| match (i, j) {
        (0, 1) => a,
        (0, 2) => b,
        (0, 3) => c,
        (1, 2) => d,
        (1, 3) => e,
        _ => f,
    });
    let closed = a * f - b * e + c * d;
    let gap = (pfaffian(&m).map_err(err)? - closed).abs();
    ensure(gap < 1e-14, || format!("4×4 closed form off by {gap:e}"))?;
    Ok(format!("200 trials, max rel {worst:.1e} (tol 1e-10); 4×4 gap {gap:.1e} (tol 1e-14)"))
}

// 2, 3 ---------------------------------------------------------------------

fn table_families() -> Vec<(Measure, SkewKernel)> {
    let mut v = vec![(Measure::Hermite, SkewKernel::SignType), (Measure::Hermite, SkewKernel::DerivativeType)];
    for a in [0.0, 0.5, 2.0] {
        v.push((Measure::Laguerre { a }, SkewKernel::SignType));
        v.push((Measure::Laguerre { a }, SkewKernel::DerivativeType));
    }
    for (a, b) in [(0.0, 0.0), (0.5, 1.0)] {
        v.push((Measure::Jacobi { a, b }, SkewKernel::SignType));
        v.push((Measure::Jacobi { a, b }, SkewKernel::DerivativeType));
    }
    v.push((Measure::SymHahn { l: 6 }, SkewKernel::SignType));
    v.push((Measure::SymHahn { l: 7 }, SkewKernel::SignType));
    v.push((Measure::DiscreteChebyshev { l: 10 }, SkewKernel::SignType));
    for alpha in [0.25, 0.5] {
        v.push((Measure::DiscreteExp { q: 0.5 }, SkewKernel::DiscreteExpType { alpha }));
    }
    v
}

/// Numerically constructed set, printed table moved onto the same basis,
/// and the basis Gram.
fn constructed(
    m: Measure,
    k: SkewKernel,
    n: usize,
) -> skewcorr::Result<(SkewPolySet, SkewPolySet, AntisymMatrix<f64>)> {
    let fam = build_family(&m, n - 1)?;
    let proj = SkewSetup::new(m, k)?.project(OrthonormalBasis::new(fam.clone(), n)?)?;
    let num = construct_from_gram(proj.gram(), n, &[])?;
    let sqrt_h: Vec<f64> = (0..n).map(|j| fam.h(j).sqrt()).collect();
    let table = classical_table(&m, k, n)?.rescale_basis(&sqrt_h)?.normalize_leading()?;
    Ok((num, table, proj.gram().clone()))
}

fn classical_tables() -> Outcome {
    let mut worst = 0.0f64;
    for (m, k) in table_families() {
        // orders 0..=4 need five basis members
        let (num, table, _) = constructed(m, k, 6).map_err(err)?;
        for i in 0..3 {
            let gap = rel(num.r()[i], table.r()[i]);
            ensure(gap < 1e-8, || format!("{m:?} {k:?}: r_{i} rel {gap:e}"))?;
            worst = worst.max(gap);
        }
        // even members and r_k are gauge invariant
        for row in [0, 2, 4] {
            let (x, y) = (num.coeffs(row), table.coeffs(row));
            let scale = y.iter().fold(1.0f64, |s, v| s.max(v.abs()));
            for j in 0..6 {
                let gap = (x[j] - y[j]).abs() / scale;
                ensure(gap < 1e-8, || format!("{m:?} {k:?}: R_{row}[{j}] rel {gap:e}"))?;
                worst = worst.max(gap);
            }
        }
    }
    Ok(format!("{} families, max rel {worst:.1e} (tol 1e-8)", table_families().len()))
}

fn skew_orthogonality() -> Outcome {
    let mut worst = 0.0f64;
    let mut sets = 0;
    for (m, k) in table_families() {
        let cap = match m {
            Measure::SymHahn { l } | Measure::DiscreteChebyshev { l } => (l as usize + 1).min(10),
            _ => 10,
        };
        for n in 2..=cap {
            let (num, table, gram) = constructed(m, k, n).map_err(err)?;
            for s in [&num, &table] {
                let r = s.residual(&gram).map_err(err)?;
                ensure(r < 1e-8, || format!("{m:?} {k:?} N={n}: residual {r:e}"))?;
                worst = worst.max(r);
                sets += 1;
            }
        }
    }
    Ok(format!("{sets} sets, max residual {worst:.1e} × max r (tol 1e-8)"))
}

// 4 ------------------------------------------------------------------------

/// Gauss–Legendre panels on `[lo, hi]`.
struct Line {
    rule: IntegrationRule,
}

const CUT: f64 = 10.0;

impl Line {
    fn new() -> Self {
        Self { rule: gauss_legendre(24) }
    }

    fn seg(&self, lo: f64, hi: f64, f: &dyn Fn(f64) -> f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let h = (hi - lo) / 3.0;
        (0..3).map(|p| self.rule.mapped(lo + p as f64 * h, lo + (p + 1) as f64 * h).integrate(f)).sum()
    }

    /// `∫_{-CUT}^{CUT} f`, split at every kink.
    fn over(&self, kinks: &[f64], f: &dyn Fn(f64) -> f64) -> f64 {
        let mut cuts: Vec<f64> = kinks.iter().copied().filter(|k| k.abs() < CUT).collect();
        cuts.sort_by(f64::total_cmp);
        let mut edges = vec![-CUT];
        edges.extend(cuts);
        edges.push(CUT);
        edges.windows(2).map(|w| self.seg(w[0], w[1], f)).sum()
    }
}

/// Unnormalized joint density of `N = xs.len()` eigenvalues w.r.t. `dx`.
fn goe_joint(xs: &[f64]) -> f64 {
    let mut v = (-0.5 * xs.iter().map(|x| x * x).sum::<f64>()).exp();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            v *= (xs[i] - xs[j]).abs();
        }
    }
    v
}

fn gse_joint(xs: &[f64]) -> f64 {
    let mut v = (-xs.iter().map(|x| x * x).sum::<f64>()).exp();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            v *= (xs[i] - xs[j]).powi(4);
        }
    }
    v
}

/// Integrates `joint(fixed ++ free)` over the free coordinates.
fn marginal(line: &Line, joint: Joint, fixed: &[f64], free: usize) -> f64 {
    if free == 0 {
        return joint(fixed);
    }
    line.over(fixed, &|y| {
        let mut p = fixed.to_vec();
        p.push(y);
        marginal(line, joint, &p, free - 1)
    })
}

fn brute_force_correlations() -> Outcome {
    let line = Line::new();
    let singles = [-1.7, -0.6, 0.0, 0.45, 1.9];
    let pairs = [(-1.0, 0.3), (0.2, 1.4), (-0.8, -0.1)];
    let mut worst = 0.0f64;
    let cases: [(&str, usize, Joint, EnsembleSpec); 3] = [
        ("GOE N=2", 2, goe_joint, EnsembleSpec::goe(2).map_err(err)?),
        ("GOE N=3", 3, goe_joint, EnsembleSpec::goe(3).map_err(err)?),
        ("GSE N=2", 2, gse_joint, EnsembleSpec::gse(2).map_err(err)?),
    ];
    for (name, n, joint, spec) in cases {
        let e = Ensemble::new(spec).map_err(err)?;
        let z = marginal(&line, joint, &[], n);
        let nf = n as f64;
        for x in singles {
            let brute = nf * marginal(&line, joint, &[x], n - 1) / z;
            let got = e.density_dx(0, x).map_err(err)?;
            let gap = rel(got, brute);
            ensure(gap < 1e-6, || format!("{name} ρ₁({x}) {got} vs {brute}"))?;
            worst = worst.max(gap);
        }
        for (x, y) in pairs {
            let brute = nf * (nf - 1.0) * marginal(&line, joint, &[x, y], n - 2) / z;
            let w = Measure::Hermite.weight(x) * Measure::Hermite.weight(y);
            let got = e.correlation_at(&[(0, x), (0, y)]).map_err(err)? * w;
            let gap = rel(got, brute);
            ensure(gap < 1e-6, || format!("{name} ρ₂({x},{y}) {got} vs {brute}"))?;
            worst = worst.max(gap);
        }
    }
    Ok(format!("GOE N=2,3 and GSE N=2, 5 ρ₁ + 3 ρ₂ each, max rel {worst:.1e} (tol 1e-6)"))
}

// 5 ------------------------------------------------------------------------

fn sum_rules() -> Outcome {
    let line = Line::new();
    let mut specs = Vec::new();
    for n in 1..=6 {
        specs.push((format!("GOE N={n}"), EnsembleSpec::goe(n).map_err(err)?));
    }
    for n in 1..=3 {
        specs.push((format!("GSE n={n}"), EnsembleSpec::gse(n).map_err(err)?));
    }
    let mut worst = 0.0f64;
    for (name, spec) in specs {
        let count = (spec.n / spec.multiplicity as usize) as f64;
        let e = Ensemble::new(spec).map_err(err)?;
        let dx = |x: f64| e.density_dx(0, x).unwrap_or(f64::NAN);
        let total = line.over(&[], &dx);
        let gap = (total - count).abs() / count;
        ensure(gap < 1e-6, || format!("{name}: ∫ρ₁ = {total}"))?;
        worst = worst.max(gap);
        if count < 2.0 {
            continue;
        }
        for x in [-1.1, 0.3, 1.6] {
            let two = line
                .over(&[x], &|y| e.correlation_at(&[(0, x), (0, y)]).unwrap_or(f64::NAN) * Measure::Hermite.weight(y));
            let one = e.density(0, x).map_err(err)?;
            let gap = rel(two, (count - 1.0) * one);
            ensure(gap < 1e-6, || format!("{name}: ∫ρ₂({x},·) = {two} vs {}", (count - 1.0) * one))?;
            worst = worst.max(gap);
        }
    }
    Ok(format!("GOE N≤6, GSE n≤3, max rel {worst:.1e} (tol 1e-6)"))
}

// 6 ------------------------------------------------------------------------

fn gauge_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pts = [(0, -0.9), (0, 0.15), (0, 1.3)];
    let mut worst = 0.0f64;
    for n in 2..=6 {
        for spec in [
            EnsembleSpec::goe(n).map_err(err)?,
            EnsembleSpec::orthogonal(Measure::Laguerre { a: 0.5 }, n).map_err(err)?,
        ] {
            let pairs = spec.n / 2;
            let base = Ensemble::new(spec.clone()).map_err(err)?;
            let gauge: Vec<f64> = (0..pairs).map(|_| rng.random_range(-5.0..5.0)).collect();
            let shifted =
                Ensemble::new(spec.with_options(KernelOptions { gauge, ..Default::default() })).map_err(err)?;
            let moved = (0..2 * pairs)
                .step_by(2)
                .map(|k| rel(shifted.kernel().polys().coeffs(k + 1)[k], base.kernel().polys().coeffs(k + 1)[k]))
                .fold(0.0f64, f64::max);
            ensure(moved > 1e-3, || format!("N={n}: gauge left the odd members unchanged"))?;
            let laguerre = matches!(base.spec().chain.slice(0).measure, Measure::Laguerre { .. });
            // ρ_k vanishes identically for k > N
            for k in 1..=n.min(3) {
                let p: Vec<(usize, f64)> =
                    pts[..k].iter().map(|&(m, x)| (m, if laguerre { x + 2.0 } else { x })).collect();
                let (a, b) = (base.correlation_at(&p).map_err(err)?, shifted.correlation_at(&p).map_err(err)?);
                let gap = rel(b, a);
                ensure(gap < 1e-9, || format!("N={n} k={k}: {a} vs {b}"))?;
                worst = worst.max(gap);
            }
        }
    }
    Ok(format!("GOE and Laguerre N=2..6, ρ₁..ρ₃, max rel {worst:.1e} (tol 1e-9)"))
}

// 7 ------------------------------------------------------------------------

fn eynard_mehta_reduction() -> Outcome {
    let mut worst = 0.0f64;
    for n in [2, 3] {
        for dts in [vec![0.5], vec![0.3, 0.6]] {
            let spec = EnsembleSpec::separable(Measure::Hermite, SkewKernel::SignType, n, &dts).map_err(err)?;
            let e = Ensemble::new(spec.with_jmax(120)).map_err(err)?;
            let m = dts.len() + 1;
            let mut slices = vec![vec![0.4]];
            for s in 1..m {
                slices.push(vec![-0.3 + 0.5 * s as f64]);
            }
            slices[m - 1].push(1.3);
            let red = em_reduction_check(&e, &PointConfiguration::new(slices)).map_err(err)?;
            let gap = red.relative_gap();
            ensure(gap < 1e-8, || format!("N={n} M={m}: {} vs {}", red.lhs, red.rhs))?;
            worst = worst.max(gap);
        }
    }
    Ok(format!("M=2,3 with N=2,3, max rel {worst:.1e} (tol 1e-8)"))
}

// 8 ------------------------------------------------------------------------

fn histogram_check(batch: &SampleBatch, rho_dx: impl Fn(f64) -> skewcorr::Result<f64>) -> Result<(f64, usize), String> {
    let h = Histogram::new(&batch.values(), Binning::FreedmanDiaconis).map_err(err)?;
    let bins = compare_density(&h, batch.len(), batch.n, rho_dx).map_err(err)?;
    Ok((pass_fraction(&bins, 4.0), bins.len()))
}

fn monte_carlo() -> Outcome {
    let goe = sample_goe(4, 100_000, 8).map_err(err)?;
    let e = Ensemble::new(EnsembleSpec::goe(4).map_err(err)?).map_err(err)?;
    let (fg, bg) = histogram_check(&goe, |x| e.density_dx(0, x))?;
    let gse = sample_gse(2, 100_000, 9).map_err(err)?;
    let e = Ensemble::new(EnsembleSpec::gse(2).map_err(err)?).map_err(err)?;
    let (fs, bs) = histogram_check(&gse, |x| e.density_dx(0, x))?;
    ensure(fg >= 0.95 && fs >= 0.95, || format!("bins with |z| < 4: GOE {fg:.3}, GSE {fs:.3}"))?;
    Ok(format!("|z| < 4 in {:.1}% of {bg} GOE bins, {:.1}% of {bs} GSE bins (need 95%)", 100.0 * fg, 100.0 * fs))
}

// 9 ------------------------------------------------------------------------

fn dyson_chain() -> Outcome {
    let n = 3;
    let e = Ensemble::new(EnsembleSpec::dyson(n, &[0.0, 12.0]).map_err(err)?).map_err(err)?;
    let gue = biorthogonalize(&HermitianChain::dyson(&[0.0]).map_err(err)?, n).map_err(err)?;
    let mut worst = 0.0f64;
    for x in [-1.6, -0.7, 0.0, 0.5, 1.4] {
        let (a, b) = (e.density(1, x).map_err(err)?, em_correlation(&gue, &[(0, x)]).map_err(err)?);
        let gap = rel(a, b);
        ensure(gap < 1e-3, || format!("τ=12, x={x}: {a} vs {b}"))?;
        worst = worst.max(gap);
    }
    // simulated diffusion against the parametric density at finite τ
    let taus = [0.0, 0.4, 1.5];
    let chain = Ensemble::new(EnsembleSpec::dyson(n, &taus).map_err(err)?.with_jmax(100)).map_err(err)?;
    let cfg = DysonConfig { n, times: taus.to_vec(), step: 0.002, count: 20_000, seed: 10 };
    let batches = sample_dyson(&cfg).map_err(err)?;
    let mut worst_z = 0.0f64;
    let mut bins = 0;
    for (m, b) in batches.iter().enumerate() {
        let h = Histogram::new(&b.values(), Binning::Fixed { lo: -4.0, hi: 4.0, bins: 32 }).map_err(err)?;
        let cmp = compare_density(&h, b.len(), n, |x| chain.density_dx(m, x)).map_err(err)?;
        for c in &cmp {
            ensure(c.zscore.abs() < 4.0, || {
                format!("τ={}: bin [{:.2},{:.2}) z = {:.2}", taus[m], c.bin_left, c.bin_right, c.zscore)
            })?;
            worst_z = worst_z.max(c.zscore.abs());
        }
        bins += cmp.len();
    }
    Ok(format!(
        "τ₂=12 max rel {worst:.1e} (tol 1e-3); MC at τ = 0, 0.4, 1.5: max |z| {worst_z:.2} over {bins} bins (tol 4)"
    ))
}

// 10 -----------------------------------------------------------------------

fn vicious_walkers() -> Outcome {
    let mut worst = 0.0f64;
    for k in [2, 4, 6] {
        for starts in [vec![0, 2], vec![-2, 2], vec![0, 4]] {
            let cfg = WalkerConfig::new(2, k, vec![k], 1.0).map_err(err)?.with_starts(starts).map_err(err)?;
            let law = enumerate_vicious(&cfg).map_err(err)?;
            let reach = k as i64 + 4;
            for a in (-reach..=reach).step_by(2) {
                for b in (a + 2..=reach).step_by(2) {
                    let exact = law.get(&vec![a, b]).copied().unwrap_or(0.0);
                    let det = vicious_count(&cfg, &[a, b]).map_err(err)?;
                    worst = worst.max((det - exact).abs());
                }
            }
        }
    }
    ensure(worst < 1e-12, || format!("determinant vs enumeration abs {worst:e}"))?;
    let cfg = WalkerConfig::new(2, 6, vec![6], 1.0).map_err(err)?;
    let count = 100_000;
    let batch = &simulate_walkers(&cfg, count, 11).map_err(err)?[0];
    let surv = survival_probability(&cfg).map_err(err)?;
    let mut freq = std::collections::BTreeMap::<Vec<i64>, f64>::new();
    for s in &batch.samples {
        *freq.entry(s.iter().map(|x| x.round() as i64).collect()).or_default() += 1.0 / count as f64;
    }
    let (mut tv, mut sigma) = (0.0, 0.0);
    for (ends, p) in enumerate_vicious(&cfg).map_err(err)? {
        let p = p / surv;
        tv += 0.5 * (freq.get(&ends).copied().unwrap_or(0.0) - p).abs();
        sigma += 0.5 * (p * (1.0 - p) / count as f64).sqrt();
    }
    ensure(tv < 3.0 * sigma, || format!("TV {tv:e} vs 3σ {:e}", 3.0 * sigma))?;
    Ok(format!("exact law abs gap {worst:.1e} (tol 1e-12); simulated TV {tv:.2e} < 3σ = {:.2e}", 3.0 * sigma))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("pfaffian correctness", pfaffian_correctness, Some(Duration::from_secs(1))),
        ("classical-table agreement", classical_tables, Some(Duration::from_secs(30))),
        ("skew-orthogonality residuals", skew_orthogonality, None),
        ("brute-force correlation equivalence", brute_force_correlations, Some(Duration::from_secs(120))),
        ("sum rules", sum_rules, None),
        ("gauge invariance", gauge_invariance, None),
        ("Eynard–Mehta reduction", eynard_mehta_reduction, None),
        ("Monte Carlo", monte_carlo, Some(Duration::from_secs(120))),
        ("Dyson chain", dyson_chain, None),
        ("vicious walkers", vicious_walkers, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = run();
        let took = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, limit) {
            if took > *limit {
                outcome = Err(format!("runtime {:.2} s exceeds {:.0} s", took.as_secs_f64(), limit.as_secs_f64()));
            }
        }
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} [{:.2} s]", i + 1, took.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} [{:.2} s]", i + 1, took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
