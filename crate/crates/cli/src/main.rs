//! `normcone`: projections, derivatives and membership tests for Schatten norm cones.

mod io;
mod suite;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use normcone::cones::{tangent2_test, tangent_test, MEMBERSHIP_TOL};
use normcone::projection::{project_cone_with, CLASSIFY_TOL, MAX_NEWTON_ITER};
use normcone::sensitivity::{bsubdiff_with_tol, dirderiv_with_tol, DENSE_LIMIT};
use normcone::{ConePoint, DerivativeMap, GaugeSpec, OriginSampling, ProjectorDerivative};
use serde_json::{json, Map, Value};

use io::{emit, matrix, num, point_fields, read_point, vector, CliError, CliResult, EXIT_CHECK};

#[derive(Parser)]
#[command(name = "normcone", version, about = "Projection and sensitivity for Schatten norm cones")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PointArgs {
    /// Exponent: "1", "inf" or a number above 1. Overrides "p" in the input file.
    #[arg(long)]
    p: Option<String>,
    /// Point document with fields m, A, s and optionally p.
    #[arg(long)]
    input: PathBuf,
    /// Classification tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Project a point onto the cone.
    Project {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = MAX_NEWTON_ITER)]
        max_iter: usize,
    },
    /// Directional derivative of the projector at a point along a direction.
    Dirderiv {
        #[command(flatten)]
        point: PointArgs,
        /// Direction document (same shape as the input).
        #[arg(long)]
        dir: PathBuf,
    },
    /// Elements of the B-subdifferential of the projector.
    Bsubdiff {
        #[command(flatten)]
        point: PointArgs,
        /// At the origin: an outside point whose ray gives one more element.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Tangent (order 1) or second-order tangent (order 2) membership.
    Tangent {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        dir: PathBuf,
        /// Second-order correction, required for order 2.
        #[arg(long)]
        xi: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        order: u8,
    },
    /// Run the randomized invariant suites.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
    /// Time projections across sizes and exponents.
    Bench {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        cases: usize,
    },
}

fn gauge_of(flag: &Option<String>, from_file: Option<GaugeSpec>) -> CliResult<GaugeSpec> {
    match flag {
        Some(text) => text.parse().map_err(|e| CliError::validation(format!("--p: {e}"))),
        None => from_file.ok_or_else(|| CliError::validation("no exponent: pass --p or set \"p\" in the input")),
    }
}

fn load(args: &PointArgs) -> CliResult<(GaugeSpec, ConePoint, f64)> {
    let doc = read_point(&args.input)?;
    let g = gauge_of(&args.p, doc.p)?;
    let tol = args.tol.unwrap_or(CLASSIFY_TOL);
    if !(tol >= 0.0) {
        return Err(CliError::validation("--tol must be a nonnegative number"));
    }
    Ok((g, doc.point, tol))
}

fn load_like(path: &PathBuf, z: &ConePoint, what: &str) -> CliResult<ConePoint> {
    let d = read_point(path)?.point;
    if d.dim() != z.dim() {
        return Err(CliError::validation(format!(
            "{}: {what} has size {}, input has size {}",
            path.display(),
            d.dim(),
            z.dim()
        )));
    }
    Ok(d)
}

fn describe(el: &ProjectorDerivative) -> CliResult<Value> {
    let kind = match &el.map {
        DerivativeMap::Identity => "identity",
        DerivativeMap::Zero => "zero",
        DerivativeMap::Spectral(_) => "spectral",
        DerivativeMap::Complement(_) => "complement",
        DerivativeMap::RankOne { .. } => "rank_one",
        DerivativeMap::Frobenius { .. } => "frobenius",
    };
    let mut out = Map::new();
    out.insert("kind".into(), json!(kind));
    if el.m <= DENSE_LIMIT {
        out.insert("matrix".into(), matrix(&el.to_dense()?));
        return Ok(Value::Object(out));
    }
    // Too large for a dense matrix: describe the parameters instead.
    let inner = match &el.map {
        DerivativeMap::Complement(b) => b.as_ref(),
        other => other,
    };
    match inner {
        DerivativeMap::Spectral(data) => {
            out.insert("u".into(), vector(&data.u));
            out.insert("mu".into(), num(data.mu));
            out.insert("beta".into(), num(data.beta));
            out.insert("block_sizes".into(), json!(data.coeffs.block_sizes));
        }
        DerivativeMap::RankOne { identity, coeff, v } => {
            out.insert("identity".into(), json!(identity));
            out.insert("coeff".into(), num(*coeff));
            out.insert("V".into(), matrix(&v.a));
            out.insert("v_s".into(), num(v.s));
        }
        DerivativeMap::Frobenius { a_unit, ratio } => {
            out.insert("A_unit".into(), matrix(a_unit));
            out.insert("ratio".into(), num(*ratio));
        }
        _ => {}
    }
    Ok(Value::Object(out))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Project { point, max_iter } => {
            let (g, z, tol) = load(&point)?;
            let r = project_cone_with(g, &z, tol, max_iter)?;
            let mut out = Map::new();
            out.insert("region".into(), json!(r.region.as_str()));
            point_fields(&mut out, &r.point);
            out.insert("mu".into(), num(r.multiplier));
            out.insert("iterations".into(), json!(r.iterations));
            out.insert("residual".into(), num(r.residual));
            emit(&Value::Object(out));
        }
        Command::Dirderiv { point, dir } => {
            let (g, z, tol) = load(&point)?;
            let d = load_like(&dir, &z, "direction")?;
            let r = dirderiv_with_tol(g, &z, &d, tol)?;
            let mut out = Map::new();
            out.insert("case".into(), json!(r.case.label()));
            point_fields(&mut out, &r.value);
            emit(&Value::Object(out));
        }
        Command::Bsubdiff { point, dir } => {
            let (g, z, tol) = load(&point)?;
            let sampling = match dir {
                Some(path) => OriginSampling::Approach(vec![load_like(&path, &z, "approach point")?]),
                None => OriginSampling::None,
            };
            let elems = bsubdiff_with_tol(g, &z, &sampling, tol)?;
            let case = elems.first().map(|e| e.case.label()).unwrap_or("");
            let list = elems.iter().map(describe).collect::<CliResult<Vec<_>>>()?;
            emit(&json!({ "case": case, "elements": list }));
        }
        Command::Tangent { point, dir, xi, order } => {
            let (g, z, tol) = load(&point)?;
            let tol = point.tol.map_or(MEMBERSHIP_TOL, |_| tol);
            let d = load_like(&dir, &z, "direction")?;
            let verdict = if order == 1 {
                tangent_test(g, &z, &d, tol)?
            } else {
                let path = xi.ok_or_else(|| CliError::validation("--order 2 needs --xi"))?;
                let xi = load_like(&path, &z, "second-order term")?;
                tangent2_test(g, &z, &d, &xi, tol)?
            };
            let value = verdict.value.map_or(Value::Null, num);
            emit(&json!({ "order": order, "contained": verdict.contained, "value": value }));
        }
        Command::Check { seed, cases } => {
            let (doc, ok) = suite::check(seed, cases);
            emit(&doc);
            if !ok {
                return Err(CliError { code: EXIT_CHECK, message: "check suite reported failures".into() });
            }
        }
        Command::Bench { seed, cases } => emit(&suite::bench(seed, cases, 6)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { io::EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
