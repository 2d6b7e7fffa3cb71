//! Command-line front end for the TV-distance estimator.
//!
//! Subcommands: `compute` runs the full Gaussian pipeline, `disprod` the
//! discrete product estimator, `oracle` the brute-force references. Inputs
//! are JSON files (`-` reads standard input); outputs go to standard
//! output. Exit codes: 0 on success, 2 for invalid input, 3 for numerical
//! failures (residual or budget violations).

use clap::{Parser, Subcommand, ValueEnum};
use gausstv::gaussian::GaussianParams;
use gausstv::{disprod, oracle, pipeline};
use serde::Deserialize;
use std::io::Read;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gausstv", version, about = "Relative-error TV distance between Gaussians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Plain,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate the TV distance between two Gaussians from a JSON pair.
    Compute {
        /// JSON file with mu1, sigma1, mu2, sigma2 (use - for stdin).
        #[arg(long)]
        input: String,
        /// Relative error target in (0, 1).
        #[arg(long)]
        eps: f64,
        /// Emit the full diagnostics record.
        #[arg(long)]
        diagnostics: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Approximate the TV distance between discrete product distributions.
    Disprod {
        /// JSON file with {"pairs": [{"p": [...], "q": [...]}, ...]}.
        #[arg(long)]
        input: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Reference computations: quadrature, grid, Monte Carlo, erf.
    Oracle {
        #[arg(long, value_enum)]
        method: Method,
        /// JSON Gaussian pair (all methods except erf).
        #[arg(long)]
        input: Option<String>,
        /// Quadrature tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Grid cells per axis.
        #[arg(long, default_value_t = 128)]
        cells: usize,
        /// Grid extent in marginal standard deviations.
        #[arg(long, default_value_t = 10.0)]
        extent: f64,
        /// Monte Carlo sample count.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Monte Carlo generator seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Argument for the erf method.
        #[arg(long)]
        x: Option<f64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Quad1d,
    Grid,
    Mc,
    Erf,
}

#[derive(Deserialize)]
struct PairInput {
    mu1: Vec<f64>,
    sigma1: Vec<Vec<f64>>,
    mu2: Vec<f64>,
    sigma2: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct DisprodInput {
    pairs: Vec<PqInput>,
}

#[derive(Deserialize)]
struct PqInput {
    p: Vec<f64>,
    q: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

fn input_error(message: String) -> CliError {
    CliError { code: 2, message }
}

fn from_lib_error(e: gausstv::Error) -> CliError {
    use gausstv::Error::*;
    let root = match &e {
        Stage { source, .. } => source.as_ref(),
        other => other,
    };
    let code = match root {
        ResidualTooLarge { .. } | BudgetTooTight { .. } | SingularCovariance(_) | ZeroDelta => 3,
        _ => 2,
    };
    CliError {
        code,
        message: format!("error: {e}"),
    }
}

fn read_input(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| input_error(format!("stdin: {e}")))?;
        return Ok(buf);
    }
    std::fs::read_to_string(path).map_err(|e| input_error(format!("{path}: {e}")))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &str, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text)
        .map_err(|e| input_error(format!("{path}:{}:{}: {e}", e.line(), e.column())))
}

fn load_pair(path: &str) -> Result<(GaussianParams, GaussianParams), CliError> {
    let text = read_input(path)?;
    let raw: PairInput = parse_json(path, &text)?;
    let p1 = GaussianParams::from_raw(raw.mu1, raw.sigma1).map_err(from_lib_error)?;
    let p2 = GaussianParams::from_raw(raw.mu2, raw.sigma2).map_err(from_lib_error)?;
    Ok((p1, p2))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Compute {
            input,
            eps,
            diagnostics,
            format,
        } => {
            let (p1, p2) = load_pair(&input)?;
            let result = pipeline::mult_gaussian_tv(&p1, &p2, eps).map_err(from_lib_error)?;
            emit_compute(&result, diagnostics, format);
            Ok(())
        }
        Command::Disprod { input, eps, format } => {
            let text = read_input(&input)?;
            let raw: DisprodInput = parse_json(&input, &text)?;
            let pairs: Vec<disprod::DiscretePair> = raw
                .pairs
                .into_iter()
                .map(|pq| disprod::DiscretePair::new(pq.p, pq.q))
                .collect::<gausstv::Result<_>>()
                .map_err(from_lib_error)?;
            let z = disprod::disprod_tv_det(&pairs, eps).map_err(from_lib_error)?;
            match format {
                Format::Json => println!(
                    "{}",
                    serde_json::json!({ "tv_estimate": z, "eps": eps })
                ),
                Format::Plain => println!("tv_estimate {z}"),
            }
            Ok(())
        }
        Command::Oracle {
            method,
            input,
            tol,
            cells,
            extent,
            samples,
            seed,
            x,
            format,
        } => run_oracle(method, input, tol, cells, extent, samples, seed, x, format),
    }
}

fn emit_compute(result: &pipeline::TvResult, diagnostics: bool, format: Format) {
    match format {
        Format::Json => {
            let mut obj = serde_json::json!({
                "tv_estimate": result.estimate,
                "eps": result.eps,
            });
            if diagnostics {
                let d = &result.diagnostics;
                obj["diagnostics"] = serde_json::json!({
                    "rank_case": d.rank_case,
                    "rank": d.rank,
                    "delta": d.delta,
                    "gamma": d.gamma,
                    "small_delta": d.small_delta,
                    "m": d.m,
                    "alphabet_size": d.alphabet_size,
                    "zeta": d.zeta,
                    "kappa1": d.kappa1,
                    "kappa2": d.kappa2,
                    "diag_residuals": d.diag_residuals.map(|(a, b)| vec![a, b]),
                    "budget_split": vec![d.budget_split.0, d.budget_split.1],
                });
            }
            println!("{obj}");
        }
        Format::Plain => {
            println!("tv_estimate {}", result.estimate);
            if diagnostics {
                let d = &result.diagnostics;
                println!("rank_case {}", d.rank_case);
                if let Some(delta) = d.delta {
                    println!("delta {delta}");
                }
                if let Some(m) = d.alphabet_size {
                    println!("alphabet_size {m}");
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_oracle(
    method: Method,
    input: Option<String>,
    tol: f64,
    cells: usize,
    extent: f64,
    samples: u64,
    seed: u64,
    x: Option<f64>,
    format: Format,
) -> Result<(), CliError> {
    let need_pair = |input: &Option<String>| -> Result<(GaussianParams, GaussianParams), CliError> {
        let path = input
            .as_deref()
            .ok_or_else(|| input_error("--input is required for this method".into()))?;
        load_pair(path)
    };
    match method {
        Method::Quad1d => {
            let (p1, p2) = need_pair(&input)?;
            if p1.dim() != 1 || p2.dim() != 1 {
                return Err(input_error("quad1d expects one-dimensional inputs".into()));
            }
            let v = oracle::quadrature_tv_1d_pair(
                p1.mean[0],
                p1.covariance[(0, 0)],
                p2.mean[0],
                p2.covariance[(0, 0)],
                tol,
            )
            .map_err(from_lib_error)?;
            match format {
                Format::Json => println!(
                    "{}",
                    serde_json::json!({ "tv": v, "method": "quad1d", "tol": tol })
                ),
                Format::Plain => println!("tv {v}"),
            }
        }
        Method::Grid => {
            let (p1, p2) = need_pair(&input)?;
            let e = oracle::grid_tv_nd(&p1, &p2, cells, extent).map_err(from_lib_error)?;
            match format {
                Format::Json => println!(
                    "{}",
                    serde_json::json!({
                        "tv": e.estimate,
                        "error_estimate": e.error_estimate,
                        "method": "grid",
                        "cells": cells,
                    })
                ),
                Format::Plain => println!("tv {} error_estimate {}", e.estimate, e.error_estimate),
            }
        }
        Method::Mc => {
            let (p1, p2) = need_pair(&input)?;
            let e = oracle::mc_tv_baseline(&p1, &p2, samples, seed).map_err(from_lib_error)?;
            match format {
                Format::Json => println!(
                    "{}",
                    serde_json::json!({
                        "tv": e.estimate,
                        "stderr": e.stderr,
                        "method": "mc",
                        "samples": samples,
                        "seed": seed,
                    })
                ),
                Format::Plain => println!("tv {} stderr {}", e.estimate, e.stderr),
            }
        }
        Method::Erf => {
            let x = x.ok_or_else(|| input_error("--x is required for the erf method".into()))?;
            let v = oracle::erf_reference(x).map_err(from_lib_error)?;
            match format {
                Format::Json => println!("{}", serde_json::json!({ "x": x, "erf": v })),
                Format::Plain => println!("erf {v}"),
            }
        }
    }
    Ok(())
}
