use fbmx::fbm::*;
use fbmx::numeric::SampleStats;
use fbmx::rng::{stream, Purpose};
use fbmx::Error;
use proptest::prelude::*;

fn h(v: f64) -> Hurst {
    Hurst::new(v).unwrap()
}

#[test]
fn hurst_bounds_name_the_open_interval() {
    for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
        let err = Hurst::new(bad).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(err.to_string().contains("(0, 1)"), "{err}");
    }
}

#[test]
fn grid_shape_and_origin() {
    let g = sample_fbm(h(0.75), 10, 2, 42).unwrap();
    assert_eq!(g.rows().count(), 1025);
    assert_eq!(g.row(0), &[0.0, 0.0]);
    assert_eq!(g.to_csv().lines().count(), 1026);
    assert_eq!(g.node_time(1024), 1.0);
}

#[test]
fn same_seed_same_path() {
    let a = sample_fbm(h(0.3), 9, 3, 7).unwrap();
    let b = sample_fbm(h(0.3), 9, 3, 7).unwrap();
    let c = sample_fbm(h(0.3), 9, 3, 8).unwrap();
    assert_eq!(a.values(), b.values());
    assert_ne!(a.values(), c.values());
}

#[test]
fn auto_method_switches_to_circulant() {
    let s = FbmSampler::new(h(0.6), AUTO_CIRCULANT_LEVEL - 1, 1, SamplerMethod::Auto).unwrap();
    assert_eq!(s.method(), SamplerMethod::Cholesky);
    let s = FbmSampler::new(h(0.6), AUTO_CIRCULANT_LEVEL, 1, SamplerMethod::Auto).unwrap();
    assert_eq!(s.method(), SamplerMethod::Circulant);
    let err = FbmSampler::new(h(0.6), MAX_CHOLESKY_LEVEL + 1, 1, SamplerMethod::Cholesky).unwrap_err();
    assert!(matches!(err, Error::Resource(_)));
}

/// Empirical covariance of `(B_s, B_t)` against the kernel, for both samplers.
#[test]
fn empirical_covariance_matches_kernel() {
    let m = 5;
    let reps = 20_000;
    for hv in [0.2, 0.5, 0.8] {
        let kernel = CovarianceKernel::new(h(hv));
        for method in [SamplerMethod::Cholesky, SamplerMethod::Circulant] {
            let s = FbmSampler::new(h(hv), m, 2, method).unwrap();
            let mut rng = stream(11, Purpose::Test, 0);
            let pairs = [(8usize, 32usize), (32, 32), (3, 17), (20, 21)];
            let mut stats = vec![SampleStats::default(); pairs.len()];
            for _ in 0..reps {
                let g = s.sample(&mut rng);
                for (st, &(i, j)) in stats.iter_mut().zip(&pairs) {
                    // second coordinate must be independent of the first
                    st.push(g.row(i)[0] * g.row(j)[0] + g.row(i)[1] * g.row(j)[1]);
                }
            }
            for (st, &(i, j)) in stats.iter().zip(&pairs) {
                let want = 2.0 * kernel.covariance(i as f64 / 32.0, j as f64 / 32.0).unwrap();
                let z = (st.mean - want) / st.std_error();
                assert!(z.abs() < 4.5, "H={hv} {method:?} ({i},{j}): {} vs {want}", st.mean);
            }
        }
    }
}

#[test]
fn samplers_agree_on_increment_variance_at_fine_mesh() {
    let m = 12;
    let hv = 0.35;
    let s = FbmSampler::new(h(hv), m, 1, SamplerMethod::Circulant).unwrap();
    let mut rng = stream(3, Purpose::Test, 0);
    let mut st = SampleStats::default();
    for _ in 0..200 {
        let g = s.sample(&mut rng);
        let q: f64 = (0..g.cells()).map(|i| g.increment(i)[0].powi(2)).sum();
        st.push(q);
    }
    // quadratic variation: n · n^{−2H}
    let n = (1u64 << m) as f64;
    let want = n.powf(1.0 - 2.0 * hv);
    assert!((st.mean - want).abs() < 4.0 * st.std_error() + 1e-9 * want);
}

#[test]
fn fgn_autocovariance_matches_scaled_increments() {
    for hv in [0.2, 0.5, 0.9] {
        assert!((fgn_autocovariance(h(hv), 0) - 1.0).abs() < 1e-15);
        let k = CovarianceKernel::new(h(hv));
        let step = 1.0 / 8.0;
        for lag in 1..6 {
            let c = lag as f64 * step;
            let want = k.increment_covariance(0.0, step, c, c + step).unwrap() / step.powf(2.0 * hv);
            assert!((fgn_autocovariance(h(hv), lag) - want).abs() < 1e-12);
        }
    }
    assert_eq!(fgn_autocovariance(h(0.5), 3), 0.0);
}

#[test]
fn coarsening_keeps_every_other_node() {
    let g = sample_fbm(h(0.4), 8, 2, 5).unwrap();
    let c = g.coarsen(6).unwrap();
    assert_eq!(c.cells(), 64);
    for i in 0..=64 {
        assert_eq!(c.row(i), g.row(4 * i));
    }
    assert!(g.coarsen(9).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_is_symmetric_and_consistent(hv in 0.01f64..0.99, s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let k = CovarianceKernel::new(h(hv));
        let a = k.covariance(s, t).unwrap();
        prop_assert!((a - k.covariance(t, s).unwrap()).abs() < 1e-14);
        prop_assert!((k.covariance(t, t).unwrap() - t.powf(2.0 * hv)).abs() < 1e-12);
        // Cauchy–Schwarz
        prop_assert!(a.abs() <= (s * t).powf(hv) + 1e-12);
    }

    #[test]
    fn interpolation_is_linear_between_nodes(seed in 0u64..1000, u in 0.0f64..1.0) {
        let g = sample_fbm(h(0.6), 4, 1, seed).unwrap();
        let i = ((u * 16.0).floor() as usize).min(15);
        let frac = u * 16.0 - i as f64;
        let want = g.row(i)[0] * (1.0 - frac) + g.row(i + 1)[0] * frac;
        prop_assert!((g.interpolate(u).unwrap()[0] - want).abs() < 1e-12);
    }
}
