use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use fbmx::algebra::{build_gamma, parse_expr, parse_fields, parse_functions, GammaEngine, VectorField};
use fbmx::expansion::{geometric_grid, hermite_dictionary, invariant_residual, validate_expansion, MeasureSpec, Verdict};
use fbmx::fbm::{FbmSampler, SamplerMethod};
use fbmx::moments::{
    expected_iterated_closed_form, expected_iterated_interpolated, expected_iterated_wick, mc_expected_iterated,
    McConfig, MomentEstimate,
};
use fbmx::rng::{stream, Purpose};
use fbmx::sde::{PtfConfig, PtfSolver, SdeSpec};
use fbmx::signature::{check_chen, PiecewisePath};
use fbmx::{Hurst, Word};

use crate::args::*;
use crate::output::{parse_vector, to_json, Failure};

const DEFAULT_INTERP_MESH: u32 = 12;
const DEFAULT_MC_MESH: u32 = 10;

/// What a command produced: the result text, the resolved configuration and
/// the outcome of its `--assert` check, if it has one.
pub struct Outcome {
    pub body: String,
    pub config: Value,
    pub check: Option<Result<(), String>>,
}

fn seed(g: &Global, what: &str) -> Result<u64, Failure> {
    g.seed.ok_or_else(|| Failure::usage(format!("{what} is stochastic: --seed is required")))
}

fn hurst(v: f64) -> Result<Hurst, Failure> {
    Ok(Hurst::new(v)?)
}

fn read(path: &std::path::Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn fields(path: &std::path::Path) -> Result<Vec<VectorField>, Failure> {
    Ok(parse_fields(&read(path)?)?)
}

fn config(command: &str, g: &Global, args: &impl Serialize, resolved: Value) -> Value {
    json!({ "command": command, "global": g, "args": args, "resolved": resolved })
}

fn engine(e: &EngineArgs, g: &Global) -> Result<GammaEngine, Failure> {
    Ok(match e.engine {
        EngineArg::Closed => GammaEngine::ClosedForm,
        EngineArg::Wick => GammaEngine::Wick,
        EngineArg::Interp => GammaEngine::Interpolation { mesh_level: e.engine_mesh.unwrap_or(DEFAULT_INTERP_MESH) },
        EngineArg::Mc => GammaEngine::MonteCarlo(McConfig::new(
            e.engine_mesh.unwrap_or(DEFAULT_MC_MESH),
            e.engine_replicates,
            seed(g, "the mc engine")?,
        )),
        EngineArg::Commutative => GammaEngine::Commutative,
    })
}

fn engine_json(e: &GammaEngine) -> Value {
    match e {
        GammaEngine::Interpolation { mesh_level } => json!({ "name": e.name(), "mesh_level": mesh_level }),
        GammaEngine::MonteCarlo(cfg) => json!({ "name": e.name(), "mc": cfg }),
        _ => json!({ "name": e.name() }),
    }
}

pub fn execute(cmd: &Command, g: &Global) -> Result<Outcome, Failure> {
    match cmd {
        Command::Fbm(FbmCommand::Sample(a)) => fbm_sample(a, g),
        Command::Moments(a) => moments(a, g),
        Command::Gamma(a) => gamma(a, g),
        Command::Expand(a) => expand(a, g),
        Command::Invariant(a) => invariant(a, g),
        Command::SignatureCheck(a) => signature_check(a, g),
    }
}

fn fbm_sample(a: &FbmSampleArgs, g: &Global) -> Result<Outcome, Failure> {
    let seed = seed(g, "fbm sample")?;
    let method = match a.method {
        Sampler::Auto => SamplerMethod::Auto,
        Sampler::Cholesky => SamplerMethod::Cholesky,
        Sampler::Circulant => SamplerMethod::Circulant,
    };
    let sampler = FbmSampler::new(hurst(a.hurst)?, a.mesh, a.dim, method)?;
    let grid = sampler.sample(&mut stream(seed, Purpose::FbmPath, 0));
    let body = match g.format {
        Format::Csv => grid.to_csv(),
        Format::Json => to_json(&json!({
            "hurst": a.hurst,
            "mesh_level": a.mesh,
            "dimension": a.dim,
            "method": sampler.method(),
            "t": (0..=grid.cells()).map(|i| grid.node_time(i)).collect::<Vec<_>>(),
            "values": grid.rows().map(|r| r.to_vec()).collect::<Vec<_>>(),
        })),
    };
    let resolved = json!({ "seed": seed, "method": sampler.method() });
    Ok(Outcome { body, config: config("fbm sample", g, a, resolved), check: None })
}

fn moments(a: &MomentsArgs, g: &Global) -> Result<Outcome, Failure> {
    let h = hurst(a.hurst)?;
    let word: Word = a.word.parse()?;
    let (est, resolved) = match a.method {
        MomentMethodArg::Closed => (expected_iterated_closed_form(h, &word)?, json!({})),
        MomentMethodArg::Wick => (expected_iterated_wick(h, &word)?, json!({})),
        MomentMethodArg::Interp => {
            let m = a.mesh.unwrap_or(DEFAULT_INTERP_MESH);
            (expected_iterated_interpolated(h, &word, m)?, json!({ "mesh_level": m }))
        }
        MomentMethodArg::Mc => {
            let cfg = McConfig::new(a.mesh.unwrap_or(DEFAULT_MC_MESH), a.replicates, seed(g, "moments --method mc")?);
            (mc_expected_iterated(h, &word, &cfg)?, json!({ "mc": cfg }))
        }
    };
    let body = match g.format {
        Format::Csv => format!("{}\n{}\n", MomentEstimate::CSV_HEADER, est.csv_row()),
        Format::Json => to_json(&json!({
            "H": est.hurst,
            "word": est.word.to_string(),
            "method": est.method.to_string(),
            "value": est.value,
            "std_error": est.std_error,
            "mesh_level": est.mesh_level,
            "replicates": est.replicates,
        })),
    };
    Ok(Outcome { body, config: config("moments", g, a, resolved), check: None })
}

fn gamma(a: &GammaArgs, g: &Global) -> Result<Outcome, Failure> {
    let h = hurst(a.hurst)?;
    let fields = fields(&a.fields)?;
    let eng = engine(&a.engine, g)?;
    let op = build_gamma(a.k, h, &fields, eng)?;
    let terms: Vec<(&Word, f64, f64)> = op.terms().iter().map(|(w, &c)| (w, c, op.std_error(w))).collect();
    let body = match g.format {
        Format::Csv => {
            let mut s = String::from("word,coefficient,std_error\n");
            for (w, c, se) in &terms {
                s.push_str(&format!("{w},{c:.16e},{se:.16e}\n"));
            }
            s
        }
        Format::Json => {
            let mut out = json!({
                "k": a.k,
                "H": a.hurst,
                "engine": eng.name(),
                "terms": terms.iter().map(|(w, c, se)| json!({
                    "word": w.to_string(), "coefficient": c, "std_error": se
                })).collect::<Vec<_>>(),
            });
            if a.k == 2 && fields.len() >= 2 {
                let c = |l: [usize; 4]| op.coefficient(&Word::from(l));
                out["pairing"] = json!({
                    "lead": c([1, 1, 2, 2]),
                    "nested": c([1, 2, 2, 1]),
                    "interleaved": c([1, 2, 1, 2]),
                });
            }
            to_json(&out)
        }
    };
    let check = (a.k >= 1).then(|| {
        let ones = Word::new(vec![1; 2 * a.k]).expect("non-empty word");
        let want = 1.0 / ((1..=a.k).map(|i| i as f64).product::<f64>() * 2f64.powi(a.k as i32));
        let got = op.coefficient(&ones);
        let tol = 4.0 * op.std_error(&ones) + 1e-12;
        if (got - want).abs() <= tol {
            Ok(())
        } else {
            Err(format!("coefficient of {ones} is {got:.16e}, expected {want:.16e} within {tol:.3e}"))
        }
    });
    let resolved = json!({ "engine": engine_json(&eng), "fields": fields.len() });
    Ok(Outcome { body, config: config("gamma", g, a, resolved), check })
}

fn expand(a: &ExpandArgs, g: &Global) -> Result<Outcome, Failure> {
    let seed = seed(g, "expand")?;
    let h = hurst(a.hurst)?;
    let fields = fields(&a.fields)?;
    let f = parse_expr(&a.function)?;
    let n = fields.first().map(VectorField::dimension).unwrap_or(0);
    let x = match &a.x {
        Some(s) => parse_vector(s, "x")?,
        None => vec![0.0; n],
    };
    let spec = SdeSpec::new(fields, h, x)?;
    let mc = match a.solver {
        SolverArg::WongZakai => {
            let mut cfg = PtfConfig::wong_zakai(a.mesh, a.replicates, seed);
            cfg.solver = PtfSolver::WongZakai { mesh_level: a.mesh, substeps: a.substeps, sampler: SamplerMethod::Auto };
            cfg
        }
        SolverArg::Commutative => PtfConfig::commutative(a.ode_tol, a.replicates, seed),
    };
    if a.t_count < 2 || !(a.t_min > 0.0 && a.t_max > a.t_min) {
        return Err(Failure::usage("need 0 < --t-min < --t-max and --t-count ≥ 2"));
    }
    let ts = geometric_grid(a.t_min, a.t_max, a.t_count);
    let eng = engine(&a.engine, g)?;
    let report = validate_expansion(&spec, &f, a.n, &ts, &mc, eng)?;
    let body = match g.format {
        Format::Csv => report.to_csv(),
        Format::Json => to_json(&report.to_json()),
    };
    let threshold = (2 * a.n + 1) as f64 * a.hurst;
    let check = Some(match (report.verdict, report.slope) {
        (Verdict::BelowResolution, _) => Ok(()),
        (_, Some(s)) if s > threshold => Ok(()),
        (v, s) => Err(format!("{} (slope {s:?}, needed > {threshold})", v.text())),
    });
    let resolved = json!({ "x": spec.initial, "t_grid": ts, "mc": mc, "engine": engine_json(&eng) });
    Ok(Outcome { body, config: config("expand", g, a, resolved), check })
}

fn invariant(a: &InvariantArgs, g: &Global) -> Result<Outcome, Failure> {
    let h = hurst(a.hurst)?;
    let fields = fields(&a.fields)?;
    let n = fields.first().map(VectorField::dimension).unwrap_or(0);
    let corner = |v: &Option<String>, what: &str| -> Result<Vec<f64>, Failure> {
        parse_vector(v.as_deref().ok_or_else(|| Failure::usage(format!("--{what} is required for this measure")))?, what)
    };
    let measure = match a.measure {
        MeasureKind::Circle => {
            let c = parse_vector(&a.center, "center")?;
            let center: [f64; 2] = c.try_into().map_err(|_| Failure::usage("--center needs two coordinates"))?;
            MeasureSpec::Circle { center, radius: a.radius, nodes: a.nodes }
        }
        MeasureKind::Box => MeasureSpec::uniform_box(corner(&a.lower, "lower")?, corner(&a.upper, "upper")?, a.order)?,
        MeasureKind::Density => {
            let src = a.density.as_deref().ok_or_else(|| Failure::usage("--density is required for this measure"))?;
            MeasureSpec::DensityOnBox {
                density: parse_expr(src)?,
                lower: corner(&a.lower, "lower")?,
                upper: corner(&a.upper, "upper")?,
                order: a.order,
            }
        }
        MeasureKind::Point => MeasureSpec::Point(corner(&a.point, "point")?),
    };
    let test_fns = match &a.functions {
        Some(p) => parse_functions(&read(p)?)?,
        None => hermite_dictionary(n, 4),
    };
    let tols = parse_vector(&a.tol, "tol")?;
    if tols.is_empty() {
        return Err(Failure::usage("--tol needs at least one value"));
    }
    let eng = engine(&a.engine, g)?;
    let report = invariant_residual(&fields, h, &measure, &test_fns, a.k_max, eng)?;
    let max_abs: Vec<f64> = (1..=a.k_max).map(|k| report.max_abs(k)).collect();
    let body = match g.format {
        Format::Csv => report.to_csv(),
        Format::Json => to_json(&json!({ "report": report, "max_abs": max_abs })),
    };
    let failures: Vec<String> = max_abs
        .iter()
        .enumerate()
        .filter_map(|(i, &m)| {
            let tol = tols[i.min(tols.len() - 1)];
            (!(m <= tol)).then(|| format!("k={}: max residual {m:.3e} > {tol:.3e}", i + 1))
        })
        .collect();
    let check = Some(if failures.is_empty() { Ok(()) } else { Err(failures.join("; ")) });
    let resolved = json!({
        "measure": format!("{measure:?}"),
        "functions": report.functions,
        "engine": engine_json(&eng),
    });
    Ok(Outcome { body, config: config("invariant", g, a, resolved), check })
}

/// Path through `segments + 1` uniform points in `[-1, 1]^d` with random knots.
fn random_path(seed: u64, segments: usize, dim: usize) -> Result<PiecewisePath, Failure> {
    if segments == 0 || dim == 0 {
        return Err(Failure::usage("--segments and --dim must be positive"));
    }
    let mut rng = stream(seed, Purpose::RandomPath, 0);
    let gaps: Vec<f64> = (0..segments).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = gaps.iter().sum();
    let mut knots = vec![0.0];
    let mut acc = 0.0;
    for gap in &gaps[..segments - 1] {
        acc += gap / total;
        knots.push(acc);
    }
    knots.push(1.0);
    let values = (0..=segments).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    Ok(PiecewisePath::new(knots, values)?)
}

fn signature_check(a: &SignatureArgs, g: &Global) -> Result<Outcome, Failure> {
    let seed = seed(g, "signature-check")?;
    let path = random_path(seed, a.segments, a.dim)?;
    let defect = check_chen(&path, a.split, a.degree)?;
    let body = match g.format {
        Format::Csv => format!(
            "segments,dimension,degree,split,defect\n{},{},{},{:.16e},{:.16e}\n",
            a.segments, a.dim, a.degree, a.split, defect
        ),
        Format::Json => to_json(&json!({
            "segments": a.segments,
            "dimension": a.dim,
            "degree": a.degree,
            "split": a.split,
            "defect": defect,
        })),
    };
    let check = Some(if defect <= a.tol {
        Ok(())
    } else {
        Err(format!("Chen defect {defect:.3e} exceeds {:.3e}", a.tol))
    });
    let resolved = json!({ "seed": seed, "knots": path.knots() });
    Ok(Outcome { body, config: config("signature-check", g, a, resolved), check })
}
