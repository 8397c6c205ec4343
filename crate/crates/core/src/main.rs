use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use nsf_core::constitutive::validate_constitutive;
use nsf_core::correction::validate_correction;
use nsf_core::diagnostics::fit_exponential_rate;
use nsf_core::harness::{
    exit_code_for, output_root, parse_config, preset, read_time_series, run_sweep, RunConfig, EXIT_AUDIT_FAILURE,
    EXIT_CONFIG, EXIT_PASS,
};
use nsf_core::lyapunov::check_f_convexity;
use nsf_core::quadrature::QuadratureGrid;
use nsf_core::steady::{solve_steady_temperature, verify_steady};
use nsf_core::Error;

/// Galerkin simulator and inequality auditor for heat-conducting power-law fluids.
#[derive(Parser)]
#[command(name = "nsf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios (config files or preset names).
    Run {
        #[arg(required = true)]
        configs: Vec<String>,
        /// Scenarios run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output root; overrides NSF_OUTPUT_ROOT.
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// Sample growth, coercivity and monotonicity of the stress law.
    ValidateConstitutive { config: String },
    /// Check the correction-function inequalities on a grid.
    ValidateCorrection { config: String },
    /// Sample the convexity estimate of the relative distance f_α.
    CheckZaba { config: String },
    /// Fit an exponential rate to a `t,value` CSV.
    FitDecay {
        csv: PathBuf,
        /// Fit window as `a,b`.
        #[arg(long, value_parser = parse_window)]
        window: Option<[f64; 2]>,
    },
    /// Solve and verify the steady temperature only.
    Steady { config: String },
}

fn parse_window(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => {
            let a: f64 = a.parse().map_err(|e| format!("window start: {e}"))?;
            let b: f64 = b.parse().map_err(|e| format!("window end: {e}"))?;
            Ok([a, b])
        }
        _ => Err(format!("expected `a,b`, got `{s}`")),
    }
}

/// A path to a TOML/JSON file, or the name of a built-in preset.
fn load_config(arg: &str) -> nsf_core::Result<RunConfig> {
    let path = Path::new(arg);
    if path.is_file() {
        parse_config(&std::fs::read_to_string(path)?)
    } else {
        preset(arg).map_err(|e| match e {
            Error::Config(mut msgs) => {
                msgs.insert(0, format!("`{arg}` is neither a readable file nor a preset"));
                Error::Config(msgs)
            }
            other => other,
        })
    }
}

fn emit<T: Serialize>(value: &T) {
    match serde_json::to_string_pretty(value) {
        // A closed pipe downstream is not an error of ours.
        Ok(s) => {
            let _ = writeln!(std::io::stdout().lock(), "{s}");
        }
        Err(e) => eprintln!("error: cannot serialise report: {e}"),
    }
}

fn fail(err: &Error) -> i32 {
    eprintln!("error: {err}");
    exit_code_for(err)
}

fn verdict(pass: bool) -> i32 {
    if pass {
        EXIT_PASS
    } else {
        EXIT_AUDIT_FAILURE
    }
}

fn bounds(cfg: &RunConfig, params: &nsf_core::constitutive::FluidParams) -> nsf_core::Result<(f64, f64)> {
    match cfg.theta_bounds {
        Some([lo, hi]) => Ok((lo, hi)),
        None => cfg.boundary.boundary_range(params, 64),
    }
}

fn run(configs: &[String], jobs: usize, root: Option<PathBuf>) -> i32 {
    let mut cfgs = Vec::with_capacity(configs.len());
    for c in configs {
        match load_config(c) {
            Ok(cfg) => cfgs.push(cfg),
            Err(e) => return fail(&e),
        }
    }
    let root = root.unwrap_or_else(output_root);
    let mut code = EXIT_PASS;
    for result in run_sweep(&cfgs, &root, jobs) {
        let c = match result {
            Ok(outcome) => {
                emit(&outcome.summary);
                eprintln!(
                    "{}: {:?} ({})",
                    outcome.summary.name,
                    outcome.summary.status,
                    outcome.dir.join("summary.json").display()
                );
                outcome.summary.exit_code()
            }
            Err(e) => fail(&e),
        };
        code = code.max(c);
    }
    code
}

fn dispatch(cli: Cli) -> i32 {
    match cli.command {
        Command::Run {
            configs,
            jobs,
            output_root,
        } => run(&configs, jobs, output_root),
        Command::ValidateConstitutive { config } => {
            let report = load_config(&config).and_then(|cfg| {
                let params = cfg.fluid.build()?;
                Ok(validate_constitutive(&params, &params, &cfg.validation.sampling.0))
            });
            match report {
                Ok(r) => {
                    emit(&r);
                    verdict(r.pass)
                }
                Err(e) => fail(&e),
            }
        }
        Command::ValidateCorrection { config } => {
            let report = load_config(&config).and_then(|cfg| {
                let params = cfg.fluid.build()?;
                let (lo, hi) = bounds(&cfg, &params)?;
                let corr = cfg.correction.build(lo, hi)?;
                Ok(validate_correction(&corr, &cfg.validation.correction_grid.0))
            });
            match report {
                Ok(r) => {
                    emit(&r);
                    verdict(r.pass)
                }
                Err(e) => fail(&e),
            }
        }
        Command::CheckZaba { config } => {
            let report = load_config(&config).and_then(|cfg| {
                let params = cfg.fluid.build()?;
                let alpha = cfg.validation.convexity_alpha.unwrap_or(cfg.lyapunov.alpha);
                Ok(check_f_convexity(alpha, &params, &cfg.validation.convexity.0))
            });
            match report {
                Ok(r) => {
                    emit(&r);
                    verdict(r.pass)
                }
                Err(e) => fail(&e),
            }
        }
        Command::FitDecay { csv, window } => {
            let text = match std::fs::read_to_string(&csv) {
                Ok(t) => t,
                Err(e) => return fail(&Error::Io(e)),
            };
            let (t, v) = match read_time_series(&text) {
                Ok(s) => s,
                Err(msg) => return fail(&Error::config(format!("{}: {msg}", csv.display()))),
            };
            let window = window.unwrap_or([t[0], t[t.len() - 1]]);
            match fit_exponential_rate(&t, &v, window) {
                Ok(fit) => {
                    emit(&fit);
                    EXIT_PASS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Steady { config } => {
            let report = load_config(&config).and_then(|cfg| {
                let params = cfg.fluid.build()?;
                let (lo, hi) = bounds(&cfg, &params)?;
                let r = &cfg.resolution;
                let [kx, ky] = r.temperature_modes;
                let grid = QuadratureGrid::new(
                    r.quadrature_order
                        .unwrap_or_else(|| QuadratureGrid::default_order(r.max_mode())),
                );
                let st = solve_steady_temperature(&cfg.boundary, &params, (kx, ky), &grid, (lo, hi))?;
                Ok(verify_steady(&st, &params))
            });
            match report {
                Ok(r) => {
                    emit(&r);
                    verdict(r.within_bounds)
                }
                Err(e) => fail(&e),
            }
        }
    }
}

fn main() -> ExitCode {
    let code = dispatch(Cli::parse());
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_CONFIG as u8))
}
