use proptest::prelude::*;

use skewcorr::correlations::{Ensemble, EnsembleSpec};
use skewcorr::kernels::KernelOptions;
use skewcorr::linalg::{determinant, pfaffian, AntisymMatrix, DenseMatrix};
use skewcorr::measures::{quadrature, Measure};
use skewcorr::montecarlo::{enumerate_vicious, vicious_count, Binning, Histogram, WalkerConfig};
use skewcorr::skewproduct::{skew_inner, SkewKernel};

fn antisym(n: usize) -> impl Strategy<Value = AntisymMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| AntisymMatrix::from_upper(n, |i, j| v[i * n + j]))
}

fn even_antisym() -> impl Strategy<Value = AntisymMatrix<f64>> {
    (1usize..=10).prop_flat_map(|h| antisym(2 * h))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pfaffian_squares_to_determinant(a in even_antisym()) {
        let pf = pfaffian(&a).unwrap();
        let det = determinant(a.as_dense()).unwrap();
        prop_assert!((pf * pf - det).abs() <= 1e-10 * det.abs().max(1e-12), "{} vs {}", pf * pf, det);
    }

    #[test]
    fn pfaffian_congruence_scales_by_determinant(
        a in (1usize..=4).prop_flat_map(|h| antisym(2 * h)),
        seed in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let n = a.dim();
        let b = DenseMatrix::from_fn(n, n, |i, j| seed[i * 8 + j] + if i == j { 2.0 } else { 0.0 });
        let lhs = pfaffian(&a.congruence(&b).unwrap()).unwrap();
        let rhs = determinant(&b).unwrap() * pfaffian(&a).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10) || (lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn repeated_row_pair_gives_zero(a in (2usize..=5).prop_flat_map(|h| antisym(2 * h)), i in 0usize..10, j in 0usize..10) {
        let n = a.dim();
        let (i, j) = (i % n, j % n);
        prop_assume!(i != j);
        let d = a.as_dense();
        // copy row/column i onto j; the (i, j) entry becomes zero
        let m = AntisymMatrix::from_upper(n, |r, c| {
            let map = |k: usize| if k == j { i } else { k };
            let (r2, c2) = (map(r), map(c));
            if r2 == c2 { 0.0 } else { d[(r2, c2)] }
        });
        prop_assert!(pfaffian(&m).unwrap().abs() < 1e-10);
    }

    #[test]
    fn skew_inner_is_antisymmetric(
        f in prop::collection::vec(-2.0f64..2.0, 1..6),
        g in prop::collection::vec(-2.0f64..2.0, 1..6),
        which in 0usize..4,
    ) {
        let (m, k) = [
            (Measure::Hermite, SkewKernel::SignType),
            (Measure::Laguerre { a: 0.5 }, SkewKernel::SignType),
            (Measure::Jacobi { a: 0.5, b: 1.0 }, SkewKernel::DerivativeType),
            (Measure::DiscreteChebyshev { l: 10 }, SkewKernel::SignType),
        ][which];
        let fg = skew_inner(k, m, &f, &g).unwrap();
        let gf = skew_inner(k, m, &g, &f).unwrap();
        prop_assert!((fg + gf).abs() <= 1e-10 * fg.abs().max(1e-8), "{fg} vs {gf}");
    }

    #[test]
    fn quadrature_nodes_lie_in_support(a in -0.9f64..4.0, b in -0.9f64..4.0, n in 1usize..40) {
        let j = quadrature(&Measure::Jacobi { a, b }, n).unwrap();
        prop_assert!(j.nodes.iter().all(|&x| x > -1.0 && x < 1.0));
        let l = quadrature(&Measure::Laguerre { a }, n).unwrap();
        prop_assert!(l.nodes.iter().all(|&x| x > 0.0));
        prop_assert!(j.weights.iter().chain(&l.weights).all(|&w| w > 0.0));
    }

    #[test]
    fn histogram_conserves_counts(v in prop::collection::vec(-5.0f64..5.0, 2..300), bins in 1usize..40) {
        let fd = Histogram::new(&v, Binning::FreedmanDiaconis).unwrap();
        prop_assert_eq!(fd.counts.iter().sum::<u64>() + fd.outside, v.len() as u64);
        prop_assert_eq!(fd.outside, 0);
        let fixed = Histogram::new(&v, Binning::Fixed { lo: -2.0, hi: 3.0, bins }).unwrap();
        let inside = v.iter().filter(|&&x| (-2.0..=3.0).contains(&x)).count() as u64;
        prop_assert_eq!(fixed.counts.iter().sum::<u64>(), inside);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn correlations_ignore_gauge(
        n in 2usize..=6,
        gauge in prop::collection::vec(-4.0f64..4.0, 3),
        xs in prop::collection::vec(-2.5f64..2.5, 3),
    ) {
        let base = Ensemble::new(EnsembleSpec::goe(n).unwrap()).unwrap();
        let opts = KernelOptions { gauge: gauge[..n / 2].to_vec(), ..Default::default() };
        let shifted = Ensemble::new(EnsembleSpec::goe(n).unwrap().with_options(opts)).unwrap();
        for k in 1..=n.min(3) {
            let pts: Vec<(usize, f64)> = xs[..k].iter().map(|&x| (0, x)).collect();
            let (a, b) = (base.correlation_at(&pts).unwrap(), shifted.correlation_at(&pts).unwrap());
            prop_assert!(close(a, b, 1e-9) || (a - b).abs() < 1e-13, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn two_point_function_is_symmetric(n in 2usize..=6, x in -2.5f64..2.5, y in -2.5f64..2.5, symplectic in any::<bool>()) {
        let spec = if symplectic { EnsembleSpec::gse(n / 2 + 1).unwrap() } else { EnsembleSpec::goe(n).unwrap() };
        let e = Ensemble::new(spec).unwrap();
        let (a, b) = (e.correlation_at(&[(0, x), (0, y)]).unwrap(), e.correlation_at(&[(0, y), (0, x)]).unwrap());
        // near coincidence ρ₂ cancels like |x−y|^β, so errors are measured on the ρ₁ρ₁ scale
        let scale = e.density(0, x).unwrap() * e.density(0, y).unwrap();
        prop_assert!(close(a, b, 1e-10) || (a - b).abs() < 1e-10 * scale, "{a} vs {b}");
    }

    #[test]
    fn walker_determinant_counts_paths(
        k in (1usize..=3).prop_map(|h| 2 * h),
        s0 in -2i64..=0,
        gap in 1i64..=3,
        e0 in -4i64..=2,
        egap in 1i64..=4,
    ) {
        let starts = vec![2 * s0, 2 * (s0 + gap)];
        let cfg = WalkerConfig::new(2, k, vec![k], 1.0).unwrap().with_starts(starts).unwrap();
        let law = enumerate_vicious(&cfg).unwrap();
        let ends = vec![2 * e0, 2 * (e0 + egap)];
        let exact = law.get(&ends).copied().unwrap_or(0.0);
        let det = vicious_count(&cfg, &ends).unwrap();
        prop_assert!((det - exact).abs() < 1e-12, "{det} vs {exact}");
        prop_assert_eq!(vicious_count(&cfg, &[ends[0] + 1, ends[1] + 1]).unwrap(), 0.0);
    }
}
