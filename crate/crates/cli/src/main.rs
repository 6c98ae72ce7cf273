use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use trace_sharp::appendix::{AppendixOracle, IdentityRule};
use trace_sharp::asymptotics::{expansion_coefficients, fit_sweep, AsymptoticModel, AsymptoticRules, CutoffSpec};
use trace_sharp::bubble::{extension_half, w_radial, ExtensionRule, KernelRule};
use trace_sharp::constants::{
    a0_closed_form, bubble_amplitude, bubble_lp_norm_p, extremal_energy, kappa, kernel_constant, sphere_area,
};
use trace_sharp::geometry::{curvature_condition, CurvatureData};
use trace_sharp::quadrature::semi_infinite;
use trace_sharp::rayleigh::{
    encode_checkpoint, mu_estimate, AlphaSchedule, CheckpointHeader, CylinderModel, FlowOptions, GridSpec, MuOptions,
};
use trace_sharp::{ConstantSet, Error, SobolevParams};

const SCHEMA: &str = "1";

#[derive(Parser)]
#[command(name = "trace-sharp", version, about = "Sharp weighted trace inequality: constants and numerical checks")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "TRACE_SHARP_THREADS")]
    threads: Option<usize>,

    /// Directory receiving the report files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sharp constant, bubble normalization and expansion coefficients.
    Constants(Common),
    /// Weighted integral identities at the default rule and at doubled nodes.
    VerifyAppendix {
        #[command(flatten)]
        common: Common,
        /// Largest acceptable relative error.
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
    },
    /// Kernel normalization, extension routes and the bubble L^p identity.
    BubbleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Seed for the random sample points.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Second-order curvature hypothesis for a boundary point.
    Geometry {
        #[command(flatten)]
        common: Common,
        /// Curvature data (JSON).
        #[arg(long)]
        curvature: PathBuf,
    },
    /// Test-function energies over a dyadic range of ε.
    #[command(after_help = "CSV columns (sweep.csv): eps,mu_eps,I1,I2,boundary_lp,quotient")]
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Curvature data (JSON); flat when omitted.
        #[arg(long)]
        curvature: Option<PathBuf>,
        /// Smallest ε; the sweep halves ε from --eps-max while staying above it.
        #[arg(long, default_value_t = 1.0 / 512.0)]
        eps_min: f64,
        #[arg(long, default_value_t = 1.0 / 16.0)]
        eps_max: f64,
        /// Cut-off radius.
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
    },
    /// Discrete constrained minimization on the flat torus cylinder.
    #[command(
        after_help = "CSV columns (mu.csv): iteration,alpha,i_alpha,energy,lp_norm_p,signed_mean,step,interior_residual\n\
                      The minimizing field is written to mu.ckpt."
    )]
    Mu {
        #[command(flatten)]
        common: Common,
        /// Grid as "Jx,Jt".
        #[arg(long, default_value = "32,32")]
        grid: String,
        /// Increasing penalty weights, comma separated.
        #[arg(long, default_value = "1,10,100,1000")]
        alpha_schedule: String,
        /// Relative decrease at which each descent stops.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        restarts: usize,
        /// Bubble scale of the two-bubble start.
        #[arg(long, default_value_t = 0.125)]
        competitor_eps: f64,
    },
}

#[derive(Args, Clone, Copy)]
struct Common {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    sigma: f64,
}

enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

/// Files to write once the computation has finished.
struct Artifacts {
    name: &'static str,
    config: Value,
    passed: bool,
    results: Value,
    extra: Vec<(String, Vec<u8>)>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Numerical(format!("thread pool: {e}")))?;
    }
    let job = prepare(&cli.command)?;
    let name = job.name();
    match job.execute() {
        Ok(art) => {
            write_artifacts(&cli.out, &art)?;
            Ok(art.passed)
        }
        Err(Failure::Numerical(msg)) => {
            let report = json!({
                "schema": SCHEMA,
                "command": name,
                "status": "error",
                "error": msg,
            });
            write_file(&cli.out, &format!("{name}.json"), &to_json(&report))?;
            Err(Failure::Numerical(msg))
        }
        Err(e) => Err(e),
    }
}

/// Inputs validated before anything is computed or written.
enum Job {
    Constants(SobolevParams),
    Appendix { params: SobolevParams, tol: f64 },
    Bubble { params: SobolevParams, tol: f64, seed: u64 },
    Geometry { params: SobolevParams, data: CurvatureData, path: PathBuf },
    Sweep { params: SobolevParams, data: CurvatureData, path: Option<PathBuf>, eps: Vec<f64>, delta: f64 },
    Mu { model: CylinderModel, schedule: AlphaSchedule, opts: MuOptions },
}

fn params(c: &Common) -> Result<SobolevParams, Failure> {
    Ok(SobolevParams::new(c.n, c.sigma)?)
}

fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::Validation(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn read_curvature(path: &Path, n: u32) -> Result<CurvatureData, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
    let data = CurvatureData::parse_json(&text)?;
    if data.n() != n as usize {
        return Err(Failure::Validation(format!("curvature data has n = {}, --n is {n}", data.n())));
    }
    Ok(data)
}

fn prepare(cmd: &Command) -> Result<Job, Failure> {
    Ok(match cmd {
        Command::Constants(c) => Job::Constants(params(c)?),
        Command::VerifyAppendix { common, tol } => {
            let params = params(common)?;
            params.require_l2_range()?;
            Job::Appendix { params, tol: positive("tol", *tol)? }
        }
        Command::BubbleCheck { common, tol, seed } => {
            Job::Bubble { params: params(common)?, tol: positive("tol", *tol)?, seed: *seed }
        }
        Command::Geometry { common, curvature } => {
            let params = params(common)?;
            let data = read_curvature(curvature, params.n())?;
            Job::Geometry { params, data, path: curvature.clone() }
        }
        Command::Sweep { common, curvature, eps_min, eps_max, delta } => {
            let params = params(common)?;
            let data = match curvature {
                Some(path) => read_curvature(path, params.n())?,
                None => CurvatureData::flat(params.n() as usize),
            };
            let (lo, hi) = (positive("eps-min", *eps_min)?, positive("eps-max", *eps_max)?);
            if hi >= 1.0 {
                return Err(Failure::Validation(format!("--eps-max must be below 1, got {hi}")));
            }
            let eps: Vec<f64> =
                (0..64).map(|k| hi * 0.5f64.powi(k)).take_while(|&e| e >= lo * (1.0 - 1e-12)).collect();
            if eps.len() < 4 {
                return Err(Failure::Validation(format!(
                    "the range [{lo}, {hi}] holds {} octaves; the slope fits need at least 4",
                    eps.len()
                )));
            }
            CutoffSpec::new(*delta)?;
            Job::Sweep { params, data, path: curvature.clone(), eps, delta: *delta }
        }
        Command::Mu { common, grid, alpha_schedule, tol, seed, restarts, competitor_eps } => {
            let params = params(common)?;
            let grid: GridSpec = grid.parse()?;
            let schedule: AlphaSchedule = alpha_schedule.parse()?;
            let model = CylinderModel::new(&params, 2.0, 1.0, grid)?;
            if *restarts == 0 || *restarts > 64 {
                return Err(Failure::Validation(format!("--restarts must be in 1..=64, got {restarts}")));
            }
            let opts = MuOptions {
                eps: positive("competitor-eps", *competitor_eps)?,
                restarts: *restarts,
                seed: *seed,
                flow: FlowOptions { rel_tol: positive("tol", *tol)?, ..Default::default() },
            };
            Job::Mu { model, schedule, opts }
        }
    })
}

impl Job {
    fn name(&self) -> &'static str {
        match self {
            Job::Constants(_) => "constants",
            Job::Appendix { .. } => "verify-appendix",
            Job::Bubble { .. } => "bubble-check",
            Job::Geometry { .. } => "geometry",
            Job::Sweep { .. } => "sweep",
            Job::Mu { .. } => "mu",
        }
    }

    fn execute(&self) -> Result<Artifacts, Failure> {
        match self {
            Job::Constants(p) => constants(p),
            Job::Appendix { params, tol } => appendix(params, *tol),
            Job::Bubble { params, tol, seed } => bubble_check(params, *tol, *seed),
            Job::Geometry { params, data, path } => geometry(params, data, path),
            Job::Sweep { params, data, path, eps, delta } => sweep(params, data, path.as_deref(), eps, *delta),
            Job::Mu { model, schedule, opts } => mu(model, schedule, opts),
        }
    }
}

fn param_config(p: &SobolevParams) -> Value {
    json!({ "n": p.n(), "sigma": p.sigma() })
}

fn constants(p: &SobolevParams) -> Result<Artifacts, Failure> {
    let set = ConstantSet::compute(p);
    let results = json!({
        "p": p.p(),
        "sharp_constant": set.sharp,
        "sharp_inverse": 1.0 / set.sharp,
        "kappa": set.kappa,
        "kernel_constant": kernel_constant(p),
        "bubble_amplitude": bubble_amplitude(p),
        "bubble_lp_norm_p": bubble_lp_norm_p(p),
        "extremal_energy": extremal_energy(p),
        "a0_ratio": set.a0_ratio,
        "a0": a0_closed_form(p).ok(),
        "expansion": expansion_coefficients(p).ok(),
    });
    Ok(Artifacts { name: "constants", config: param_config(p), passed: true, results, extra: Vec::new() })
}

fn appendix(p: &SobolevParams, tol: f64) -> Result<Artifacts, Failure> {
    let oracle = AppendixOracle::new(p, tol)?;
    let rule = IdentityRule::default();
    let a0 = oracle.verify_a0_finite(&rule)?;
    let coarse = oracle.verify_all(&rule)?;
    let fine = oracle.verify_all(&rule.doubled())?;
    let mut passed = true;
    let identities: Vec<Value> = coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| {
            let improves = f.rel_err < c.rel_err || f.rel_err <= 1e-13;
            passed &= f.rel_err <= tol && improves;
            json!({
                "identity": c.identity.name(),
                "coefficient": c.coefficient,
                "lhs": f.lhs,
                "rhs": f.rhs,
                "rel_err": f.rel_err,
                "rel_err_coarse": c.rel_err,
                "tail_bound": f.tail_bound,
                "tail_flagged": f.tail_flagged,
                "improves_under_doubling": improves,
            })
        })
        .collect();
    let config = json!({ "n": p.n(), "sigma": p.sigma(), "tol": tol, "rule": rule });
    let results = json!({ "a0": a0, "identities": identities });
    Ok(Artifacts { name: "verify-appendix", config, passed, results, extra: Vec::new() })
}

fn bubble_check(p: &SobolevParams, tol: f64, seed: u64) -> Result<Artifacts, Failure> {
    let unit = KernelRule::new(p, 16, 8)?;
    let normalization = [(0.0, 0.05), (0.7, 0.2), (3.0, 1.0), (0.1, 40.0)]
        .iter()
        .map(|&(r, t)| (unit.extend(&|_| 1.0, r, t, 1.0) - 1.0).abs())
        .fold(0.0f64, f64::max);

    // Kernel quadrature against the closed form at σ = 1/2, otherwise against
    // the one-dimensional reduction.
    let kernel = KernelRule::new(p, 24, 48)?;
    let rule = ExtensionRule::standard(p)?;
    let half = p.sigma() == 0.5;
    let f = |r: f64| w_radial(p, 1.0, r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extension = 0.0f64;
    for _ in 0..50 {
        let r = rng.gen_range(0.0..3.0);
        let t = rng.gen_range(0.01..3.0);
        let reference = if half { extension_half(p, 1.0, r, t).value } else { rule.radial(1.0, r, t)?.value };
        extension = extension.max(((kernel.extend(&f, r, t, 1.0) - reference) / reference).abs());
    }

    let nf = p.nf();
    let (radial, _) = semi_infinite(nf - 1.0, 2.0 * nf, 24, |r| w_radial(p, 1.0, r).powf(p.p()))?;
    let lp = sphere_area(p.n() - 1) * radial;
    let identity = ((lp.powf(2.0 * p.sigma() / nf) * trace_sharp::constants::sharp_constant(p) - kappa(p.sigma()))
        / kappa(p.sigma()))
    .abs();

    let passed = normalization <= tol && extension <= tol && identity <= tol;
    let results = json!({
        "kernel_normalization_max_abs_err": normalization,
        "extension_reference": if half { "closed_form" } else { "radial_reduction" },
        "extension_max_rel_err": extension,
        "extension_samples": 50,
        "lp_identity_rel_err": identity,
        "bubble_lp_norm_p": lp,
    });
    let config = json!({ "n": p.n(), "sigma": p.sigma(), "tol": tol, "seed": seed });
    Ok(Artifacts { name: "bubble-check", config, passed, results, extra: Vec::new() })
}

fn geometry(p: &SobolevParams, data: &CurvatureData, path: &Path) -> Result<Artifacts, Failure> {
    let (h, rbar, pi2, rtt) = (data.mean_curvature(), data.rbar_scalar(), data.pi_norm2(), data.rtt());
    let condition = curvature_condition(p, rbar, pi2, rtt)?;
    let coeffs = expansion_coefficients(p)?;
    let second_order = coeffs.second_order(rbar, pi2, rtt);
    let case = if h > 0.0 {
        "mean_curvature"
    } else if h == 0.0 && condition > 0.0 {
        "second_order"
    } else {
        "none"
    };
    let results = json!({
        "mean_curvature": h,
        "rbar_scalar": rbar,
        "pi_norm2": pi2,
        "rtt": rtt,
        "condition": condition,
        "expansion": coeffs,
        "second_order": second_order,
        "case": case,
    });
    let config = json!({ "n": p.n(), "sigma": p.sigma(), "curvature": path.display().to_string() });
    Ok(Artifacts { name: "geometry", config, passed: true, results, extra: Vec::new() })
}

fn sweep(
    p: &SobolevParams,
    data: &CurvatureData,
    path: Option<&Path>,
    eps: &[f64],
    delta: f64,
) -> Result<Artifacts, Failure> {
    let rules = AsymptoticRules::default();
    let model = AsymptoticModel::new(p, data, CutoffSpec::new(delta)?, None, rules)?;
    let rows = model.sweep(eps)?;
    let fits = fit_sweep(&rows, p)?;
    let csv = to_csv(&rows)?;
    let config = json!({
        "n": p.n(),
        "sigma": p.sigma(),
        "curvature": path.map(|q| q.display().to_string()),
        "eps": eps,
        "delta": delta,
        "v_ext": model.v_ext(),
        "rules": rules,
    });
    let results = json!({ "rows": rows, "fits": fits });
    Ok(Artifacts { name: "sweep", config, passed: true, results, extra: vec![("sweep.csv".into(), csv)] })
}

fn mu(model: &CylinderModel, schedule: &AlphaSchedule, opts: &MuOptions) -> Result<Artifacts, Failure> {
    let est = mu_estimate(model, schedule, opts)?;
    let header = CheckpointHeader {
        model: *model.spec(),
        iteration: est.history.len(),
        alpha: schedule.last(),
        xi_alpha: est.xi_alpha,
    };
    let ckpt = encode_checkpoint(&header, &est.field);
    let csv = to_csv(&est.history)?;
    let traces = model.trace_integrals(&est.field)?;
    let config = json!({
        "model": model.spec(),
        "alpha_schedule": schedule.values(),
        "options": opts,
    });
    let results = json!({
        "mu_hat": est.mu_hat,
        "xi_alpha": est.xi_alpha,
        "competitor_quotient": est.competitor_quotient,
        "below_competitor": est.mu_hat <= est.competitor_quotient,
        "signed_mean": traces.signed_mean,
        "restarts": est.restarts,
        "iterations": est.history.len(),
    });
    Ok(Artifacts {
        name: "mu",
        config,
        passed: est.mu_hat <= est.competitor_quotient,
        results,
        extra: vec![("mu.csv".into(), csv), ("mu.ckpt".into(), ckpt)],
    })
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Failure::Numerical(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| Failure::Numerical(format!("csv: {e}")))
}

fn to_json(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s.into_bytes()
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Numerical(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", path.display())))
}

fn write_artifacts(dir: &Path, art: &Artifacts) -> Result<(), Failure> {
    let report = json!({
        "schema": SCHEMA,
        "command": art.name,
        "status": if art.passed { "pass" } else { "fail" },
        "config": art.config,
        "results": art.results,
    });
    for (name, bytes) in &art.extra {
        write_file(dir, name, bytes)?;
    }
    write_file(dir, &format!("{}.json", art.name), &to_json(&report))
}
