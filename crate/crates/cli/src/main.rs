//! Command-line front end: every computation of the library behind one
//! binary with machine-readable JSON output (plus CSV/SVG for tables and
//! traces).
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical non-convergence,
//! 3 certification/refutation failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use sobolev_strip::eigensolve::EigenError;
use sobolev_strip::extremal::PolyBump;
use sobolev_strip::noncompact::{build_translates_with, NetCandidate, NoncompactError};
use sobolev_strip::*;

#[derive(Parser)]
#[command(
    name = "sobolev-strip",
    version,
    about = "Sobolev embedding constants, p-trigonometric functions and \
             noncompactness witnesses on strip-like domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Exponent p (must be > 1).
    #[arg(long)]
    p: f64,
    /// RNG seed for randomized checks; identical configs give identical
    /// output bytes.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct DomainArgs {
    /// Number of unbounded axes k.
    #[arg(long, default_value_t = 1)]
    free: usize,
    /// Bounded interval a:b (repeat per bounded axis).
    #[arg(long = "interval", value_parser = parse_interval, required = true)]
    intervals: Vec<(f64, f64)>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate pi_p by singular quadrature and by the closed form.
    Pi {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Tabulate sin_p and cos_p; optional CSV and SVG output.
    SinpTable {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of samples.
        #[arg(long, default_value_t = 256)]
        samples: usize,
        /// Left end of the sample range.
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        /// Right end of the sample range (default 2 pi_p).
        #[arg(long)]
        to: Option<f64>,
        /// Write the table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write an SVG plot of the two curves here.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Embedding norm and first eigenvalue of the strip domain.
    Norm {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        domain: DomainArgs,
    },
    /// Rayleigh quotient of the canonical extremal function by quadrature.
    Rayleigh {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of unbounded axes k (0 = rectangle maximizer).
        #[arg(long, default_value_t = 0)]
        free: usize,
        #[arg(long = "interval", value_parser = parse_interval, required = true)]
        intervals: Vec<(f64, f64)>,
        /// Half width of the free-axis support (required when k >= 1).
        #[arg(long)]
        l: Option<f64>,
        /// Quadrature cells per half period.
        #[arg(long, default_value_t = 32)]
        resolution: usize,
    },
    /// Compare quadrature and closed-form norms of the strip trial u_l.
    VerifyUl {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        domain: DomainArgs,
        /// Half width of the free-axis support.
        #[arg(long)]
        l: f64,
        #[arg(long, default_value_t = 32)]
        resolution: usize,
    },
    /// First eigenpair of the pseudo-p-Laplacian on a rectangle.
    Eigen {
        #[command(flatten)]
        common: CommonArgs,
        /// Rectangle side a:b (repeat per axis).
        #[arg(long = "rect", value_parser = parse_interval, required = true)]
        rect: Vec<(f64, f64)>,
        /// Interior grid nodes per axis (one value broadcasts).
        #[arg(long = "grid", required = true)]
        grid: Vec<usize>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long = "max-iter", default_value_t = 100_000)]
        max_iter: usize,
        /// Write the convergence trace as SVG here.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Certify the isomorphism-number lower bound through A I B = id.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        domain: DomainArgs,
        /// Half width of the translate supports.
        #[arg(long)]
        l: f64,
        /// Number of translates m.
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 32)]
        resolution: usize,
    },
    /// Refute a randomized candidate entropy net by translation.
    Refute {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        domain: DomainArgs,
        /// Half width of the witness support.
        #[arg(long)]
        l: f64,
        /// Net radius r.
        #[arg(long, default_value_t = 0.6)]
        radius: f64,
        /// Intermediate radius r~ with r < r~ < ||I||.
        #[arg(long, default_value_t = 0.65)]
        rtilde: f64,
        /// Number of random centers.
        #[arg(long, default_value_t = 4)]
        centers: usize,
        /// Centers live within |x_i| <= xmax on the free axes.
        #[arg(long, default_value_t = 200.0)]
        xmax: f64,
        #[arg(long, default_value_t = 16)]
        resolution: usize,
    },
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected a:b, got {s}"))?;
    let a: f64 = a
        .trim()
        .parse()
        .map_err(|e| format!("bad endpoint {a}: {e}"))?;
    let b: f64 = b
        .trim()
        .parse()
        .map_err(|e| format!("bad endpoint {b}: {e}"))?;
    Ok((a, b))
}

enum CliError {
    Validation(String),
    NonConvergence(String),
    Certification(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) | Self::Io(_) => 1,
            Self::NonConvergence(_) => 2,
            Self::Certification(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Validation(m)
            | Self::NonConvergence(m)
            | Self::Certification(m)
            | Self::Io(m) => m,
        }
    }
}

fn validation<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version go to stdout with success; usage errors exit 1.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Pi { common } => {
            let quadrature = pi_p_quadrature(common.p).map_err(|e| match e {
                ptrig::PtrigError::NoConvergence { .. } => CliError::NonConvergence(e.to_string()),
                other => CliError::Validation(other.to_string()),
            })?;
            let closed = pi_p_closed_form(common.p).map_err(validation)?;
            let report = json!({
                "input": { "command": "pi", "p": common.p, "seed": common.seed },
                "result": {
                    "pi_p_quadrature": quadrature,
                    "pi_p_closed_form": closed,
                },
                "error_estimates": { "abs_difference": (quadrature - closed).abs() },
                "meta": meta(common.seed),
            });
            emit(&common.output, &report)
        }
        Command::SinpTable {
            common,
            samples,
            from,
            to,
            csv,
            svg,
        } => {
            if samples < 2 {
                return Err(CliError::Validation("need at least 2 samples".into()));
            }
            let p = PExponent::new(common.p).map_err(validation)?;
            let to = to.unwrap_or(2.0 * p.pi_p());
            if !(to > from) {
                return Err(CliError::Validation(format!(
                    "empty sample range {from}..{to}"
                )));
            }
            let mut xs = Vec::with_capacity(samples);
            let mut sins = Vec::with_capacity(samples);
            let mut coss = Vec::with_capacity(samples);
            for i in 0..samples {
                let x = from + (to - from) * i as f64 / (samples - 1) as f64;
                let (s, c) = p.sin_cos_p(x);
                xs.push(x);
                sins.push(s);
                coss.push(c);
            }
            if let Some(path) = &csv {
                let mut out = String::from("x,sin_p,cos_p\n");
                for i in 0..samples {
                    writeln!(out, "{},{},{}", xs[i], sins[i], coss[i]).expect("string write");
                }
                std::fs::write(path, out).map_err(|e| CliError::Io(e.to_string()))?;
            }
            if let Some(path) = &svg {
                let series = [
                    (
                        "#1f77b4",
                        xs.iter()
                            .copied()
                            .zip(sins.iter().copied())
                            .collect::<Vec<_>>(),
                    ),
                    (
                        "#d62728",
                        xs.iter()
                            .copied()
                            .zip(coss.iter().copied())
                            .collect::<Vec<_>>(),
                    ),
                ];
                std::fs::write(path, svg_polylines(&series))
                    .map_err(|e| CliError::Io(e.to_string()))?;
            }
            let report = json!({
                "input": {
                    "command": "sinp-table", "p": common.p, "seed": common.seed,
                    "samples": samples, "from": from, "to": to,
                },
                "result": {
                    "pi_p": p.pi_p(),
                    "x": xs,
                    "sin_p": sins,
                    "cos_p": coss,
                },
                "error_estimates": { "inversion_residual_bound": ptrig::INVERSION_TOL },
                "meta": meta(common.seed),
            });
            emit(&common.output, &report)
        }
        Command::Norm { common, domain } => {
            let p = PExponent::new(common.p).map_err(validation)?;
            let d = StripDomain::new(domain.free, domain.intervals.clone()).map_err(validation)?;
            let c = embedding_norm(&p, &d);
            let report = json!({
                "input": {
                    "command": "norm", "p": common.p, "seed": common.seed,
                    "free": domain.free, "intervals": domain.intervals,
                },
                "result": {
                    "lambda": c.lambda,
                    "norm": c.norm,
                    "pi_p": p.pi_p(),
                },
                "error_estimates": { "closed_form": 0.0 },
                "meta": meta(common.seed),
            });
            emit(&common.output, &report)
        }
        Command::Rayleigh {
            common,
            free,
            intervals,
            l,
            resolution,
        } => {
            let p = PExponent::new(common.p).map_err(validation)?;
            let (u, lambda) = if free == 0 {
                let rect = Rectangle::new(intervals.clone()).map_err(validation)?;
                let d = StripDomain::new(0, intervals.clone()).map_err(validation)?;
                (rectangle_maximizer(&p, &rect), lambda_closed_form(&p, &d))
            } else {
                let l = l.ok_or_else(|| {
                    CliError::Validation("--l is required when --free >= 1".into())
                })?;
                let d = StripDomain::new(free, intervals.clone()).map_err(validation)?;
                (
                    strip_trial(&p, &d, l).map_err(validation)?,
                    lambda_closed_form(&p, &d),
                )
            };
            let rep = u.rayleigh_report(resolution).map_err(validation)?;
            let report = json!({
                "input": {
                    "command": "rayleigh", "p": common.p, "seed": common.seed,
                    "free": free, "intervals": intervals, "l": l,
                    "resolution": resolution,
                },
                "result": {
                    "grad_norm_p": rep.grad_norm_p,
                    "func_norm_p": rep.func_norm_p,
                    "quotient": rep.quotient,
                    "lambda_closed_form": lambda,
                    "quotient_minus_lambda": rep.quotient - lambda,
                },
                "error_estimates": { "quotient_quadrature": rep.quad_error },
                "meta": meta(common.seed),
            });
            emit(&common.output, &report)
        }
        Command::VerifyUl {
            common,
            domain,
            l,
            resolution,
        } => {
            let p = PExponent::new(common.p).map_err(validation)?;
            let d = StripDomain::new(domain.free, domain.intervals.clone()).map_err(validation)?;
            let rep = verify_ul_norms(&p, &d, l, resolution).map_err(validation)?;
            let report = json!({
                "input": {
                    "command": "verify-ul", "p": common.p, "seed": common.seed,
                    "free": domain.free, "intervals": domain.intervals,
                    "l": l, "resolution": resolution,
                },
                "result": {
                    "func_norm_quad": rep.func_norm_quad,
                    "grad_norm_quad": rep.grad_norm_quad,
                    "func_norm_closed": rep.func_norm_closed,
                    "grad_norm_closed": rep.grad_norm_closed,
                    "func_abs_diff": rep.func_abs_diff,
                    "grad_abs_diff": rep.grad_abs_diff,
                },
                "error_estimates": {
                    "func_quadrature": rep.func_quad_error,
                    "grad_quadrature": rep.grad_quad_error,
                },
                "meta": meta(common.seed),
            });
            emit(&common.output, &report)
        }
        Command::Eigen {
            common,
            rect,
            grid,
            tol,
            max_iter,
            svg,
        } => {
            let p = PExponent::new(common.p).map_err(validation)?;
            let rectangle = Rectangle::new(rect.clone()).map_err(validation)?;
            let shape: Vec<usize> = if grid.len() == 1 {
                vec![grid[0]; rect.len()]
            } else if grid.len() == rect.len() {
                grid.clone()
            } else {
                return Err(CliError::Validation(format!(
                    "--grid takes 1 or {} values, got {}",
                    rect.len(),
                    grid.len()
                )));
            };
            let d = StripDomain::new(0, rect.clone()).map_err(validation)?;
            let lambda = lambda_closed_form(&p, &d);
            let res = first_eigenpair(&p, &rectangle, &shape, EigenOptions { tol, max_iter })
                .map_err(|e| match e {
                    EigenError::NotConverged { .. } => CliError::NonConvergence(e.to_string()),
                    other => CliError::Validation(other.to_string()),
                })?;
            if let Some(path) = &svg {
                let pts: Vec<(f64, f64)> = res
                    .history
                    .iter()
                    .enumerate()
                    .map(|(i, &q)| (i as f64, q))
                    .collect();
                std::fs::write(path, svg_polylines(&[("#1f77b4", pts)]))
                    .map_err(|e| CliError::Io(e.to_string()))?;
            }
            let ef_err = eigenfunction_error(&res, &p);
            let report = json!({
                "input": {
                    "command": "eigen", "p": common.p, "seed": common.seed,
                    "rect": rect, "grid": shape, "tol": tol, "max_iter": max_iter,
                },
                "result": {
                    "lambda_h": res.lambda_h,
                    "lambda_closed_form": lambda,
                    "abs_difference": (res.lambda_h - lambda).abs(),
                    "iterations": res.iterations,
                    "eigenfunction_max_error_vs_sinp_product": ef_err,
                },
                "error_estimates": {
                    "last_relative_quotient_change": res.residual,
                },
                "meta": meta(common.seed),
            });
            emit(&common.output, &report)
        }
        Command::Certify {
            common,
            domain,
            l,
            m,
            trials,
            tol,
            resolution,
        } => {
            let p = PExponent::new(common.p).map_err(validation)?;
            let d = StripDomain::new(domain.free, domain.intervals.clone()).map_err(validation)?;
            let ts = build_translates_with(&p, &d, l, m, resolution).map_err(noncompact_err)?;
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            let cert =
                certify_isomorphism_bound(&ts, trials, tol, &mut rng).map_err(noncompact_err)?;
            let norm = embedding_norm(&p, &d).norm;
            let report = json!({
                "input": {
                    "command": "certify", "p": common.p, "seed": common.seed,
                    "free": domain.free, "intervals": domain.intervals,
                    "l": l, "m": m, "trials": trials, "tol": tol,
                    "resolution": resolution,
                },
                "result": {
                    "b_isometry_dev": cert.b_isometry_dev,
                    "a_bound_dev": cert.a_bound_dev,
                    "aib_identity_dev": cert.aib_identity_dev,
                    "lower_bound": cert.lower_bound,
                    "embedding_norm": norm,
                    "gap": norm - cert.lower_bound,
                },
                "error_estimates": { "deviation_tolerance": tol },
                "meta": meta(common.seed),
            });
            emit(&common.output, &report)
        }
        Command::Refute {
            common,
            domain,
            l,
            radius,
            rtilde,
            centers,
            xmax,
            resolution,
        } => {
            let p = PExponent::new(common.p).map_err(validation)?;
            let d = StripDomain::new(domain.free, domain.intervals.clone()).map_err(validation)?;
            if centers == 0 || centers > 64 {
                return Err(CliError::Validation(format!(
                    "--centers must be in 1..=64, got {centers}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            let mut bumps = Vec::with_capacity(centers);
            use rand_chacha::rand_core::RngCore;
            let mut unit =
                |lo: f64, hi: f64| lo + (hi - lo) * (rng.next_u64() as f64 / u64::MAX as f64);
            for _ in 0..centers {
                let mut ivs = Vec::with_capacity(d.dim());
                for _ in 0..d.free_axes() {
                    let width = unit(1.0, 30.0);
                    let lo = unit(-xmax, xmax - width);
                    ivs.push((lo, lo + width));
                }
                for &(a, b) in d.intervals() {
                    let len = b - a;
                    let y0 = a + unit(0.0, 0.55) * len;
                    let y1 = y0 + unit(0.25, 0.4) * len;
                    ivs.push((y0, y1.min(b - 1e-9 * len)));
                }
                let bbox = Rectangle::new(ivs).map_err(validation)?;
                // Deterministic bump parameters from the same stream.
                let amp = unit(0.2, 2.0);
                let tilts: Vec<f64> = (0..d.dim()).map(|_| unit(-0.9, 0.9)).collect();
                bumps.push(PolyBump::new(bbox, amp, vec![2; d.dim()], tilts).map_err(validation)?);
            }
            let net = NetCandidate::from_bumps(bumps, radius).map_err(noncompact_err)?;
            let refutation =
                refute_net(&p, &d, l, &net, rtilde, resolution).map_err(noncompact_err)?;
            let report = json!({
                "input": {
                    "command": "refute", "p": common.p, "seed": common.seed,
                    "free": domain.free, "intervals": domain.intervals,
                    "l": l, "radius": radius, "rtilde": rtilde,
                    "centers": centers, "xmax": xmax, "resolution": resolution,
                },
                "result": {
                    "translation": refutation.translation,
                    "witness_lp_norm": refutation.witness_lp_norm,
                    "margins": refutation.margins,
                    "min_margin": refutation
                        .margins
                        .iter()
                        .cloned()
                        .fold(f64::INFINITY, f64::min),
                    "radius": refutation.radius,
                },
                "error_estimates": { "quadrature_resolution": resolution },
                "meta": meta(common.seed),
            });
            emit(&common.output, &report)
        }
    }
}

fn noncompact_err(e: NoncompactError) -> CliError {
    match e {
        NoncompactError::CertificationFailed { .. }
        | NoncompactError::Precondition { .. }
        | NoncompactError::MarginViolation { .. } => CliError::Certification(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn meta(seed: u64) -> Value {
    json!({
        "name": "sobolev-strip",
        "version": env!("CARGO_PKG_VERSION"),
        "format": 1,
        "seed": seed,
    })
}

fn emit(output: &Option<PathBuf>, report: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report).expect("serializable report");
    text.push('\n');
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(e.to_string())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Minimal SVG writer: one polyline per series in a fixed 640x400 viewport.
fn svg_polylines(series: &[(&str, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 40.0;
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, pts) in series {
        for &(x, y) in pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !(xmax > xmin) {
        xmax = xmin + 1.0;
    }
    if !(ymax > ymin) {
        ymax = ymin + 1.0;
    }
    let sx = |x: f64| PAD + (x - xmin) / (xmax - xmin) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - ymin) / (ymax - ymin) * (H - 2.0 * PAD);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\">\n\
         <rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for (color, pts) in series {
        out.push_str("<polyline fill=\"none\" stroke=\"");
        out.push_str(color);
        out.push_str("\" stroke-width=\"1.5\" points=\"");
        for &(x, y) in pts {
            let _ = write!(out, "{:.3},{:.3} ", sx(x), sy(y));
        }
        out.push_str("\"/>\n");
    }
    let _ = writeln!(
        out,
        "<text x=\"{PAD}\" y=\"{:.1}\" font-size=\"12\">[{xmin:.6}, {xmax:.6}] x [{ymin:.6}, {ymax:.6}]</text>",
        H - 10.0
    );
    out.push_str("</svg>\n");
    out
}
