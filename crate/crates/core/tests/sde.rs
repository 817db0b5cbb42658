use fbmx::algebra::{is_commuting, parse_expr, parse_fields, ScalarExpr, VectorField};
use fbmx::fbm::{sample_fbm, FbmGrid};
use fbmx::sde::*;
use fbmx::{Error, Hurst};

fn h(v: f64) -> Hurst {
    Hurst::new(v).unwrap()
}

fn spec(fields: &str, hurst: f64, x0: Vec<f64>) -> SdeSpec {
    SdeSpec::new(parse_fields(fields).unwrap(), h(hurst), x0).unwrap()
}

#[test]
fn zero_fields_stay_put() {
    let s = spec("0; 0", 0.6, vec![1.0, -2.0]);
    let grid = sample_fbm(h(0.6), 6, 1, 3).unwrap();
    let tr = solve_wong_zakai(&s, &grid, &SolveConfig::new(6)).unwrap();
    assert!(tr.states.iter().all(|x| x == &vec![1.0, -2.0]));
    assert_eq!(tr.times.len(), 65);
}

#[test]
fn additive_noise_is_exact() {
    let s = spec("0.7", 0.4, vec![0.5]);
    let grid = sample_fbm(h(0.4), 8, 1, 11).unwrap();
    let tr = solve_wong_zakai(&s, &grid, &SolveConfig::new(8)).unwrap();
    for (x, b) in tr.states.iter().zip(grid.rows()) {
        assert!((x[0] - (0.5 + 0.7 * b[0])).abs() < 1e-13);
    }
}

#[test]
fn geometric_matches_exponential() {
    let s = spec("x1", 0.7, vec![1.5]);
    let grid = sample_fbm(h(0.7), 10, 1, 5).unwrap();
    let tr = solve_wong_zakai(&s, &grid, &SolveConfig::new(10)).unwrap();
    let want = 1.5 * grid.row(1024)[0].exp();
    assert!((tr.last()[0] - want).abs() < 1e-10 * want, "{} vs {want}", tr.last()[0]);
}

#[test]
fn horizon_scaling() {
    let s = spec("1", 0.3, vec![0.0]);
    let grid = sample_fbm(h(0.3), 5, 1, 2).unwrap();
    let cfg = SolveConfig { horizon: 0.25, ..SolveConfig::new(5) };
    let tr = solve_wong_zakai(&s, &grid, &cfg).unwrap();
    assert_eq!(*tr.times.last().unwrap(), 0.25);
    assert!((tr.last()[0] - 0.25f64.powf(0.3) * grid.row(32)[0]).abs() < 1e-14);
    let csv = tr.to_csv();
    assert!(csv.starts_with("t,x1\n"));
    assert_eq!(csv.lines().count(), 34);
}

#[test]
fn mismatches_rejected() {
    let s = spec("1", 0.3, vec![0.0]);
    let grid = sample_fbm(h(0.4), 5, 1, 2).unwrap();
    assert!(matches!(solve_wong_zakai(&s, &grid, &SolveConfig::new(5)), Err(Error::Domain(_))));
    let grid = sample_fbm(h(0.3), 5, 1, 2).unwrap();
    assert!(solve_wong_zakai(&s, &grid, &SolveConfig::new(6)).is_err());
    let bad = SolveConfig { substeps: 0, ..SolveConfig::new(5) };
    assert!(solve_wong_zakai(&s, &grid, &bad).is_err());
    assert!(SdeSpec::new(parse_fields("1").unwrap(), h(0.3), vec![0.0, 1.0]).is_err());
}

#[test]
fn divergence_reports_last_state() {
    let s = spec("x1^2", 0.5, vec![1.0]);
    let grid = FbmGrid::from_samples(h(0.5), 1, vec![vec![0.0], vec![0.5], vec![3.0]]).unwrap();
    let cfg = SolveConfig { divergence_bound: 100.0, ..SolveConfig::new(1) };
    match solve_wong_zakai(&s, &grid, &cfg) {
        Err(Error::Divergence { last_state, time, .. }) => {
            assert!((last_state[0] - 2.0).abs() < 1e-3);
            assert_eq!(time, 1.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn flows() {
    let rot = parse_fields("-x2; x1").unwrap().remove(0);
    let x = flow_exp(&rot, std::f64::consts::FRAC_PI_2, &[1.0, 0.0], 1e-10).unwrap();
    assert!(x[0].abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9, "{x:?}");
    assert_eq!(flow_exp(&rot, 0.0, &[0.3, 0.4], 1e-10).unwrap(), vec![0.3, 0.4]);
    let c = parse_fields("2; -1").unwrap().remove(0);
    let x = flow_exp(&c, 1.5, &[0.0, 1.0], 1e-10).unwrap();
    assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] + 0.5).abs() < 1e-12);
    // x + x³/3 is transported at unit speed by 1/(1+x²)
    let sig = parse_fields("1/(1+x1^2)").unwrap().remove(0);
    for s in [-2.0, 0.7, 3.0] {
        let y = flow_exp(&sig, s, &[2.0], 1e-12).unwrap()[0];
        let lhs = y + y.powi(3) / 3.0;
        assert!((lhs - (2.0 + 8.0 / 3.0 + s)).abs() < 1e-9, "{s}: {lhs}");
    }
    let tol = 1e-9;
    let a = flow_exp(&sig, 1.1, &[0.5], tol).unwrap();
    let b = flow_exp(&sig, 0.6, &flow_exp(&sig, 0.5, &[0.5], tol).unwrap(), tol).unwrap();
    assert!((a[0] - b[0]).abs() < 2.0 * tol * (1.0 + a[0].abs()));
}

#[test]
fn commutative_solver() {
    let s = spec("1; 0\n0; 1", 0.2, vec![1.0, 2.0]);
    let x = solve_commutative(&s, &[0.5, -0.25], 1e-10).unwrap();
    assert!((x[0] - 1.5).abs() < 1e-12 && (x[1] - 1.75).abs() < 1e-12);
    assert_eq!(solve_commutative(&s, &[0.0, 0.0], 1e-10).unwrap(), vec![1.0, 2.0]);
    let one = spec("1/(1+x1^2)", 0.2, vec![2.0]);
    let v = &one.fields[0];
    assert_eq!(solve_commutative(&one, &[0.8], 1e-10).unwrap(), flow_exp(v, 0.8, &[2.0], 1e-10).unwrap());
}

#[test]
fn wong_zakai_agrees_with_commutative_flow() {
    for (fields, x0) in [("1; 0\n0; 1", vec![0.3, -0.2]), ("1/(1+x1^2)", vec![2.0])] {
        let s = SdeSpec::new(parse_fields(fields).unwrap(), h(0.6), x0).unwrap();
        let d = s.driver_dimension();
        let grid = sample_fbm(h(0.6), 12, d, 21).unwrap();
        let wz = solve_wong_zakai(&s, &grid, &SolveConfig::new(12)).unwrap();
        let flow = solve_commutative(&s, grid.row(4096), 1e-12).unwrap();
        for (a, b) in wz.last().iter().zip(&flow) {
            assert!((a - b).abs() < 1e-4, "{fields}: {a} vs {b}");
        }
    }
}

#[test]
fn wong_zakai_refinement_is_cauchy() {
    // coarse grids are the fine draw observed at dyadic nodes
    let s = spec("-x2; x1\n1; 0", 0.5, vec![1.0, 0.0]);
    let mut trend = Vec::new();
    for seed in 0..8 {
        let fine = sample_fbm(h(0.5), 12, 2, 100 + seed).unwrap();
        let reference = solve_wong_zakai(&s, &fine, &SolveConfig::new(12)).unwrap();
        let gaps: Vec<f64> = [6u32, 8, 10]
            .iter()
            .map(|&m| {
                let g = fine.coarsen(m).unwrap();
                let x = solve_wong_zakai(&s, &g, &SolveConfig::new(m)).unwrap();
                x.last().iter().zip(reference.last()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            })
            .collect();
        trend.push(gaps);
    }
    let mean = |k: usize| trend.iter().map(|g| g[k]).sum::<f64>() / trend.len() as f64;
    assert!(mean(0) > mean(1) && mean(1) > mean(2), "{trend:?}");
}

#[test]
fn ptf_constant_function() {
    let s = spec("x1", 0.6, vec![1.0]);
    let cfg = PtfConfig::wong_zakai(5, 200, 1);
    let e = estimate_ptf(&s, &ScalarExpr::one(), 0.5, &cfg).unwrap();
    assert_eq!((e.mean, e.std_error), (1.0, 0.0));
    assert!(estimate_ptf(&s, &ScalarExpr::one(), 0.5, &PtfConfig::wong_zakai(5, 50, 1)).is_err());
    assert!(PtfEstimate::CSV_HEADER.starts_with("t,f,mean"));
    assert!(e.csv_row().contains("wong-zakai,5,200"));
}

#[test]
fn ptf_additive_second_moment() {
    let s = spec("0.8", 0.35, vec![0.5]);
    let f = parse_expr("x1^2").unwrap();
    let ts = [0.1, 0.4, 1.0];
    let est = estimate_ptf_many(&s, &f, &ts, &PtfConfig::wong_zakai(6, 20_000, 9)).unwrap();
    for (e, t) in est.iter().zip(ts) {
        let want = 0.25 + 0.64 * t.powf(0.7);
        assert!((e.mean - want).abs() < 4.0 * e.std_error, "t={t}: {} ± {} vs {want}", e.mean, e.std_error);
    }
    let c = estimate_ptf_many(&s, &f, &ts, &PtfConfig::commutative(1e-10, 20_000, 9)).unwrap();
    for (e, t) in c.iter().zip(ts) {
        let want = 0.25 + 0.64 * t.powf(0.7);
        assert!((e.mean - want).abs() < 4.0 * e.std_error);
    }
}

#[test]
fn ptf_matches_semigroup() {
    let s = spec("1/(1+x1^2)", 0.75, vec![2.0]);
    let f = parse_expr("x1^2").unwrap();
    let sg = semigroup_commutative(&s, &f, 0.1, &[2.0], 6).unwrap();
    let e = estimate_ptf(&s, &f, 0.1, &PtfConfig::wong_zakai(8, 20_000, 4)).unwrap();
    assert!((e.mean - sg.value).abs() < 4.0 * e.std_error + sg.last_term, "{} ± {} vs {}", e.mean, e.std_error, sg.value);
}

#[test]
fn too_many_divergent_replicates_fail() {
    let s = spec("x1^2", 0.5, vec![1.0]);
    let cfg = PtfConfig { divergence_bound: 50.0, ..PtfConfig::wong_zakai(6, 500, 3) };
    match estimate_ptf(&s, &parse_expr("x1").unwrap(), 1.0, &cfg) {
        Err(Error::Numerical(m)) => assert!(m.contains("diverged"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn semigroup_basics() {
    let s = spec("1", 0.3, vec![0.7]);
    let f = parse_expr("x1^2").unwrap();
    let v = semigroup_commutative(&s, &f, 0.0, &[0.7], 4).unwrap();
    assert_eq!(v.value, 0.7 * 0.7);
    let v = semigroup_commutative(&s, &f, 0.2, &[0.7], 4).unwrap();
    assert!(v.exact && v.last_term == 0.0);
    assert!((v.value - (0.49 + 0.2f64.powf(0.6))).abs() < 1e-15);
    let far = spec("1/(1+x1^2)", 0.3, vec![1.0]);
    assert!(matches!(semigroup_commutative(&far, &f, 0.2, &[1.0], 6), Err(Error::Numerical(_))));
}

#[test]
fn generator_pde_residual_vanishes() {
    let s = spec("1/(1+x1^2)", 0.75, vec![2.0]);
    let sg = Semigroup::new(&s, &parse_expr("x1^2").unwrap(), 6).unwrap();
    let r = sg.pde_residual(&s, 0.2, 2.0, 1e-4, 1e-3).unwrap();
    assert!(r.generator_residual.abs() < 1e-5, "{r:?}");
    // the pure diffusion form misses the σσ'∂ drift
    assert!(r.diffusion_residual.abs() > 1e-3, "{r:?}");
}

#[test]
fn commuting_certificate() {
    let tr: Vec<VectorField> = parse_fields("1; 0\n0; 1").unwrap();
    assert!(is_commuting(&tr, &[vec![0.0, 0.0]], 1e-12));
}
