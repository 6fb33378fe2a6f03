//! `fbh`: JSON front end for the fbh-core library.
//!
//! Every report is a single JSON line on stdout. Rejections print
//! `{"reason": ..., "message": ...}` and exit with 2; internal failures
//! exit with 1.

use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use fbh_core::ballgeo::{
    canonical_form_with, fit_projective_map, CanonicalOptions, FitOptions, ProjectiveAut, ProjectiveAutJson,
};
use fbh_core::calg::CVector;
use fbh_core::domain::{classify, fbh_defining, DomainParams, DomainPoint};
use fbh_core::fbhaut::{FbhAut, FbhAutJson};
use fbh_core::mapsys::{FiniteDifference, HolomorphicMap, MapDescriptor};
use fbh_core::normalizer::{
    fiber, normalize, normalize_ballfit, verify_proper, BallFitOptions, BallFitReport, NormalizationResult,
    NormalizeOptions,
};
use fbh_core::transfer::{Chart, ChartPoint, Stage};
use fbh_core::Error;

#[derive(Parser, Debug)]
#[command(name = "fbh", version, about = "Automorphisms, charts and normal forms on Fock-Bargmann-Hartogs domains")]
struct Cli {
    /// Fock weight of the domain for point and automorphism inputs.
    #[arg(long, global = true, default_value_t = 1.0)]
    mu: f64,
    /// Seed for every sampler.
    #[arg(long, global = true, env = "FBH_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads for sample evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Tolerance override `name=value`; names: boundary, base, k_gate,
    /// residual_gate, h_tol, fix, constraint.
    #[arg(long = "tol", global = true, value_parser = parse_tol)]
    tol: Vec<(String, f64)>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify a point as Interior, Boundary or Exterior.
    Member {
        #[arg(long)]
        point: String,
    },
    /// Automorphism group operations.
    Aut {
        #[command(subcommand)]
        op: AutOp,
    },
    /// Charts between the domain, the Siegel half-space and the ball.
    Transfer {
        #[command(subcommand)]
        op: TransferOp,
    },
    /// Projective ball automorphisms.
    Ball {
        #[command(subcommand)]
        op: BallOp,
    },
    /// Recover k, sigma and tau for a proper map.
    Normalize {
        #[arg(long)]
        map: String,
        #[arg(long, value_enum, default_value_t = StrategyArg::Direct)]
        strategy: StrategyArg,
        /// Treat the map as a black box (finite-difference Jacobian).
        #[arg(long)]
        black_box: bool,
        #[arg(long, default_value_t = 500)]
        grid_interior: usize,
        #[arg(long, default_value_t = 200)]
        grid_boundary: usize,
    },
    /// Sampled boundary-to-boundary and interior-to-closure checks.
    VerifyProper {
        #[arg(long)]
        map: String,
        /// Samples of each kind.
        #[arg(long, default_value_t = 200)]
        count: usize,
    },
    /// Count preimages of a generic target point.
    FiberCount {
        #[arg(long)]
        map: String,
        #[arg(long)]
        target: String,
    },
}

#[derive(Subcommand, Debug)]
enum AutOp {
    /// `f o g`.
    Compose {
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
    },
    Invert {
        #[arg(long)]
        g: String,
    },
    Apply {
        #[arg(long)]
        g: String,
        #[arg(long)]
        point: String,
    },
    /// Automorphism sending a boundary point to P = (0, ..., 0, 1).
    ToBase {
        #[arg(long)]
        point: String,
    },
}

#[derive(Subcommand, Debug)]
enum TransferOp {
    ToBall {
        #[arg(long)]
        point: String,
    },
    FromBall {
        #[arg(long)]
        point: String,
    },
}

#[derive(Subcommand, Debug)]
enum BallOp {
    /// Fit a projective transformation to `[{"x": .., "y": ..}, ...]`.
    Fit {
        #[arg(long)]
        pairs: String,
    },
    /// Canonical parameters of a transform fixing Q.
    Canonical {
        #[arg(long)]
        transform: String,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum StrategyArg {
    Direct,
    Ballfit,
    Both,
}

const TOL_NAMES: [&str; 7] = ["boundary", "base", "k_gate", "residual_gate", "h_tol", "fix", "constraint"];

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    if !TOL_NAMES.contains(&name) {
        return Err(format!("unknown tolerance `{name}`; known: {}", TOL_NAMES.join(", ")));
    }
    let v: f64 = value.parse().map_err(|e| format!("tolerance `{name}`: {e}"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("tolerance `{name}` must be positive, got {v}"));
    }
    Ok((name.to_string(), v))
}

/// A failure with its machine-readable reason.
struct Failure {
    reason: String,
    message: String,
    internal: bool,
    /// Extra fields merged into the stdout report.
    report: Option<Value>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            reason: e.reason().to_string(),
            message: e.to_string(),
            internal: !e.is_domain_rejection(),
            report: None,
        }
    }
}

impl Failure {
    fn rejection(reason: &str, message: String) -> Self {
        Failure {
            reason: reason.into(),
            message,
            internal: false,
            report: None,
        }
    }
}

type Outcome = Result<Value, Failure>;

struct Config {
    mu: f64,
    seed: u64,
    tol: BTreeMap<String, f64>,
}

impl Config {
    fn tol(&self, name: &str, default: f64) -> f64 {
        self.tol.get(name).copied().unwrap_or(default)
    }
}

/// Inline JSON when the argument starts with `{` or `[`, a file path otherwise.
fn load(arg: &str) -> Result<String, Failure> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg)
            .map_err(|e| Failure::rejection("InputUnreadable", format!("cannot read `{arg}`: {e}")))
    }
}

fn parse<T: DeserializeOwned>(arg: &str, what: &str) -> Result<T, Failure> {
    let text = load(arg)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Failure::from(Error::Schema {
            path: format!("{what}{}", if path == "." { String::new() } else { format!(".{path}") }),
            message: e.inner().to_string(),
        })
    })
}

fn parse_point(arg: &str) -> Result<DomainPoint<f64>, Failure> {
    parse(arg, "point")
}

fn parse_aut(arg: &str, cfg: &Config, what: &str) -> Result<FbhAut<f64>, Failure> {
    let raw: FbhAutJson<f64> = parse(arg, what)?;
    Ok(raw.into_aut(cfg.mu)?)
}

fn parse_map(arg: &str) -> Result<MapDescriptor<f64>, Failure> {
    Ok(MapDescriptor::from_json(&load(arg)?)?)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report serialization")
}

fn aut_value(g: &FbhAut<f64>) -> Value {
    to_value(&FbhAutJson::from(g))
}

fn cmd_member(cfg: &Config, point: &str) -> Outcome {
    let p = parse_point(point)?;
    let params = DomainParams::new(p.z.len(), p.w.len(), cfg.mu)?;
    let class = classify(&params, &p, cfg.tol("boundary", 1e-9))?;
    Ok(json!({
        "classification": class,
        "defining_value": fbh_defining(&params, &p)?,
    }))
}

fn cmd_aut(cfg: &Config, op: &AutOp) -> Outcome {
    Ok(match op {
        AutOp::Compose { f, g } => {
            let f = parse_aut(f, cfg, "f")?;
            let g = parse_aut(g, cfg, "g")?;
            aut_value(&f.compose(&g)?)
        }
        AutOp::Invert { g } => aut_value(&parse_aut(g, cfg, "g")?.inverse()),
        AutOp::Apply { g, point } => {
            let g = parse_aut(g, cfg, "g")?;
            to_value(&g.apply(&parse_point(point)?)?)
        }
        AutOp::ToBase { point } => {
            let q = parse_point(point)?;
            let params = DomainParams::new(q.z.len(), q.w.len(), cfg.mu)?;
            aut_value(&FbhAut::to_base_with_tol(params, &q, cfg.tol("boundary", 1e-9))?)
        }
    })
}

/// Tagged chart point, or an untagged `{"z", "w"}` domain point.
#[derive(Deserialize)]
#[serde(untagged)]
enum PointInput {
    Chart(ChartPoint<f64>),
    Domain(DomainPoint<f64>),
}

fn cmd_transfer(cfg: &Config, op: &TransferOp) -> Outcome {
    let chart = Chart::new(cfg.mu)?;
    let (arg, forward) = match op {
        TransferOp::ToBall { point } => (point, true),
        TransferOp::FromBall { point } => (point, false),
    };
    let cp = match parse::<PointInput>(arg, "point")? {
        PointInput::Chart(c) => c,
        PointInput::Domain(p) => ChartPoint::fbh(&p)?,
    };
    let out = if forward { chart.to_ball(&cp)? } else { chart.from_ball(&cp)? };
    debug_assert!(out.stage == if forward { Stage::Ball } else { Stage::Fbh });
    Ok(to_value(&out))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairJson {
    x: CVector<f64>,
    y: CVector<f64>,
}

fn cmd_ball(cfg: &Config, op: &BallOp) -> Outcome {
    match op {
        BallOp::Fit { pairs } => {
            let raw: Vec<PairJson> = parse(pairs, "pairs")?;
            let first = raw
                .first()
                .ok_or_else(|| Failure::from(Error::InsufficientData("no pairs given".into())))?;
            let (d_in, d_out) = (first.x.len(), first.y.len());
            let pairs: Vec<_> = raw.into_iter().map(|p| (p.x, p.y)).collect();
            let opts = FitOptions {
                h_tol: cfg.tol("h_tol", 1e-6),
                ..FitOptions::default()
            };
            let fit = fit_projective_map(&pairs, d_in, d_out, opts)?;
            Ok(json!({
                "M": fit.transform.matrix(),
                "algebraic_residual": fit.algebraic_residual,
                "action_residual": fit.action_residual,
                "h_residual": fit.h_residual,
            }))
        }
        BallOp::Canonical { transform } => {
            let raw: ProjectiveAutJson<f64> = parse(transform, "transform")?;
            let t = ProjectiveAut::new_with_tol(raw.m, cfg.tol("h_tol", 1e-9))?;
            let opts = CanonicalOptions {
                fix_tol: cfg.tol("fix", 1e-9),
                ..CanonicalOptions::default()
            };
            let cf = canonical_form_with(&t, opts)?;
            Ok(json!({ "params": cf.params, "diagnostics": cf.diagnostics }))
        }
    }
}

fn direct_value(r: &NormalizationResult<f64>) -> Value {
    json!({
        "k": r.k,
        "sigma": aut_value(&r.sigma),
        "tau": aut_value(&r.tau),
        "residual_sup": r.residual_sup,
        "strategy": "direct",
    })
}

fn ballfit_value(r: &BallFitReport<f64>) -> Value {
    json!({
        "k": r.k,
        "kappa": to_value(&[r.kappa.re, r.kappa.im]),
        "lambda": to_value(&[r.lambda.re, r.lambda.im]),
        "a0": to_value(&[r.a0.re, r.a0.im]),
        "a": r.a_vec,
        "a_norm": r.a_norm,
        "dilation_residual": r.dilation_residual,
        "relation_residual": r.relation_residual,
        "re_lambda": r.re_lambda,
        "h_residual": r.h_residual,
        "pairs_used": r.pairs_used,
        "strategy": "ballfit",
    })
}

fn cmd_normalize(
    cfg: &Config,
    map: &str,
    strategy: StrategyArg,
    black_box: bool,
    grid: (usize, usize),
) -> Outcome {
    let f = parse_map(map)?;
    let oracle: Box<dyn HolomorphicMap<f64>> = if black_box {
        Box::new(FiniteDifference(f))
    } else {
        Box::new(f)
    };
    let nopts = NormalizeOptions {
        k_gate: cfg.tol("k_gate", 1e-6),
        residual_gate: cfg.tol("residual_gate", 1e-8),
        grid_interior: grid.0,
        grid_boundary: grid.1,
        base_tol: cfg.tol("base", 1e-9),
        seed: cfg.seed,
        ..NormalizeOptions::default()
    };
    let bopts = BallFitOptions {
        h_tol: cfg.tol("h_tol", 1e-6),
        constraint_tol: cfg.tol("constraint", 1e-5),
        k_gate: cfg.tol("k_gate", 1e-6),
        base_tol: cfg.tol("base", 1e-9),
        seed: cfg.seed,
        ..BallFitOptions::default()
    };
    match strategy {
        StrategyArg::Direct => Ok(direct_value(&normalize(oracle.as_ref(), &nopts)?)),
        StrategyArg::Ballfit => Ok(ballfit_value(&normalize_ballfit(oracle.as_ref(), &bopts)?)),
        StrategyArg::Both => {
            let d = normalize(oracle.as_ref(), &nopts)?;
            let b = normalize_ballfit(oracle.as_ref(), &bopts)?;
            let mut out = direct_value(&d);
            out["strategy"] = json!("both");
            out["ballfit"] = ballfit_value(&b);
            if d.k != b.k {
                return Err(Failure {
                    report: Some(out),
                    ..Failure::rejection(
                        "StrategyDisagreement",
                        format!("direct strategy found k = {}, ball fit found k = {}", d.k, b.k),
                    )
                });
            }
            Ok(out)
        }
    }
}

fn cmd_verify_proper(cfg: &Config, map: &str, count: usize) -> Outcome {
    let f = parse_map(map)?;
    let rep = verify_proper(&f, cfg.seed, count)?;
    let out = to_value(&rep);
    if rep.pass {
        Ok(out)
    } else {
        Err(Failure {
            report: Some(out),
            ..Failure::rejection(
                "NotProper",
                format!(
                    "boundary residual {:e}, {} interior samples mapped outside",
                    rep.max_boundary_residual, rep.interior_violations
                ),
            )
        })
    }
}

fn cmd_fiber_count(map: &str, target: &str) -> Outcome {
    let f = parse_map(map)?;
    let t = parse_point(target)?;
    let fib = fiber(&f, &t)?;
    Ok(json!({ "count": fib.count(), "preimages": fib.preimages }))
}

fn run(cli: &Cli) -> Outcome {
    if !(cli.mu > 0.0 && cli.mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("--mu must be positive, got {}", cli.mu)).into());
    }
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::InvalidParameter("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure {
                internal: true,
                ..Failure::rejection("Internal", e.to_string())
            })?;
    }
    let cfg = Config {
        mu: cli.mu,
        seed: cli.seed,
        tol: cli.tol.iter().cloned().collect(),
    };
    match &cli.command {
        Command::Member { point } => cmd_member(&cfg, point),
        Command::Aut { op } => cmd_aut(&cfg, op),
        Command::Transfer { op } => cmd_transfer(&cfg, op),
        Command::Ball { op } => cmd_ball(&cfg, op),
        Command::Normalize {
            map,
            strategy,
            black_box,
            grid_interior,
            grid_boundary,
        } => cmd_normalize(&cfg, map, *strategy, *black_box, (*grid_interior, *grid_boundary)),
        Command::VerifyProper { map, count } => cmd_verify_proper(&cfg, map, *count),
        Command::FiberCount { map, target } => cmd_fiber_count(map, target),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| run(&cli)).unwrap_or_else(|_| {
        Err(Failure {
            internal: true,
            ..Failure::rejection("Internal", "unexpected panic".into())
        })
    });
    match outcome {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let mut out = f.report.unwrap_or_else(|| json!({}));
            out["reason"] = json!(f.reason);
            out["message"] = json!(f.message);
            println!("{out}");
            eprintln!("fbh: {}: {}", f.reason, f.message);
            ExitCode::from(if f.internal { 1 } else { 2 })
        }
    }
}
