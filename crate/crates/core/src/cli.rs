//! Command-line front end. `run` takes the argument list and an output sink
//! and returns the process exit code:
//! 0 verified, 1 verification failed, 2 bad input, 3 pipeline failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::algebra::{make_backend, Backend, MatrixOverAlgebra, INVERT_TOL};
use crate::certify::{run_t_suite, FactorizationCertificate};
use crate::error::{Error, Result};
use crate::general::{factorize_two_exp_with, regroup_unitriangular, single_exp_certificate, FactorOptions};
use crate::literal::{ElementLiteral, MatrixLiteral, MatrixSpec};
use crate::matfunc::{choose_branch_angle, log_unipotent};
use crate::spectra::{spectrum, zero_in_unbounded_component};
use crate::triangular::{two_exp_triangular, PIPELINE_PRODUCT_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNVERIFIED: i32 = 1;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_PIPELINE: i32 = 3;

const REGROUP_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "expfact", version, about = "Factor matrices over sampled function algebras into two exponentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// ε for the triangular route: σ(exp B2) ⊂ N_ε(Sₙ).
    #[arg(long, global = true, default_value_t = 0.25)]
    pub epsilon: f64,

    /// Zero threshold for input validation (pointwise |det A|).
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,

    /// Seed for the random stage of the shift searches.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,

    /// Write the main result here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Factor the matrix in a spec file as exp(B1)·exp(B2).
    Factorize {
        spec: PathBuf,
        /// Force the triangular route.
        #[arg(long)]
        triangular: bool,
    },
    /// Print the sampled spectrum as a point cloud.
    Spectrum { spec: PathBuf },
    /// Recheck a certificate.
    Verify {
        certificate: PathBuf,
        /// Also replay the stored reduction trace against the input.
        #[arg(long)]
        replay: bool,
    },
    /// Regroup an alternating unitriangular product into unipotent factors.
    Regroup { factors: PathBuf },
    /// Built-in demonstrations.
    Demo {
        #[command(subcommand)]
        which: Demo,
    },
    /// Single logarithm over a finite point set.
    Singleexp { spec: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum Demo {
    /// The matrix [[e^{2πix}, 1], [0, 1]] and diag(2, ·) of it.
    TCounterexample {
        #[arg(long, default_value_t = 257)]
        samples: usize,
    },
}

/// Input for `regroup`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorList {
    pub backend: Backend,
    pub n: usize,
    /// Each factor as a row-major list of element literals.
    pub factors: Vec<Vec<ElementLiteral>>,
}

struct Failure {
    code: i32,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match error {
            Error::Io(_) | Error::Json(_) | Error::Config(_) | Error::Structural(_) => EXIT_SPEC,
            _ => EXIT_PIPELINE,
        };
        Failure { code, error }
    }
}

fn spec_error(error: Error) -> Failure {
    Failure { code: EXIT_SPEC, error }
}

fn read(path: &PathBuf) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| spec_error(e.into()))
}

fn load_spec(path: &PathBuf, tol: f64) -> std::result::Result<(MatrixSpec, MatrixOverAlgebra), Failure> {
    let spec = MatrixSpec::from_json(&read(path)?).map_err(spec_error)?;
    let (_, m) = spec.build().map_err(spec_error)?;
    let det = m.det();
    if let Some(i) = (0..det.values().len()).find(|&i| det.value(i).norm() <= tol) {
        return Err(spec_error(Error::NotInvertible { index: i, magnitude: det.value(i).norm() }));
    }
    Ok((spec, m))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(out, "{e}");
            return if e.use_stderr() { EXIT_SPEC } else { EXIT_OK };
        }
    };
    run_cli(&cli, out)
}

pub fn run_cli(cli: &Cli, out: &mut dyn Write) -> i32 {
    let result = dispatch(cli);
    match result {
        Ok((value, text, code)) => {
            let body = match cli.output {
                OutputFormat::Json => serde_json::to_string_pretty(&value).expect("serializable") + "\n",
                OutputFormat::Text => text,
            };
            let written = match &cli.out {
                Some(path) => fs::write(path, body).map_err(Error::from),
                None => out.write_all(body.as_bytes()).map_err(Error::from),
            };
            match written {
                Ok(()) => code,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_SPEC
                }
            }
        }
        Err(Failure { code, error }) => {
            eprintln!("error: {error}");
            let mut report = json!({ "error": error.to_string(), "kind": format!("{:?}", error.root()).split([' ', '{', '(']).next().unwrap_or("").to_string() });
            if let Error::Pipeline { trace, .. } = &error {
                report["trace"] = serde_json::to_value(trace.as_ref()).unwrap_or_default();
            }
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("serializable"));
            code
        }
    }
}

type Outcome = std::result::Result<(serde_json::Value, String, i32), Failure>;

fn cert_outcome(cert: &FactorizationCertificate) -> Outcome {
    let text = cert_text(cert);
    let code = if cert.verified { EXIT_OK } else { EXIT_UNVERIFIED };
    Ok((serde_json::to_value(cert).map_err(Error::from)?, text, code))
}

fn cert_text(cert: &FactorizationCertificate) -> String {
    let mut s = format!(
        "backend {} n={} factors={} residual={:.3e} (tol {:.0e}) verified={}\n",
        cert.backend.name(),
        cert.n,
        cert.factor_count,
        cert.residual,
        cert.tol,
        cert.verified
    );
    for (i, norm) in cert.norms.iter().enumerate() {
        s += &format!("  |B{}| = {:.4}\n", i + 1, norm);
    }
    for c in &cert.claims {
        s += &format!("  claim {:?} on B{}: verified={} margin={:.3e}\n", c.claim, c.factor + 1, c.verified, c.margin);
    }
    if let Some(j) = cert.continuity {
        s += &format!("  continuity jump {:.3e} (input {:.3e})\n", j, cert.input_continuity.unwrap_or(f64::NAN));
    }
    if let Some(h) = cert.holomorphy {
        s += &format!("  holomorphy residual {h:.3e}\n");
    }
    s
}

fn is_triangular(m: &MatrixOverAlgebra) -> bool {
    let tiny = 1e-12 * m.max_abs().max(1.0);
    m.max_abs_below_diagonal() <= tiny || m.max_abs_above_diagonal() <= tiny
}

fn diagonal_product_is_one(m: &MatrixOverAlgebra) -> bool {
    (0..m.space().len()).all(|s| {
        let p: C64 = m.at(s).diagonal().iter().product();
        (p - C64::new(1.0, 0.0)).norm() <= PIPELINE_PRODUCT_TOL
    })
}

fn factorize(cli: &Cli, path: &PathBuf, force_triangular: bool) -> Outcome {
    let (spec, mut m) = load_spec(path, cli.tol)?;
    if spec.normalize_det {
        let n = m.dim();
        let delta = m.det().log_exp1(INVERT_TOL)?.scale(C64::new(1.0 / n as f64, 0.0));
        for (s, ms) in m.samples_mut().iter_mut().enumerate() {
            *ms = ms.scale((-delta.value(s)).exp());
        }
    }
    let cert = if force_triangular || (is_triangular(&m) && diagonal_product_is_one(&m)) {
        two_exp_triangular(&m, cli.epsilon)?.certificate
    } else {
        factorize_two_exp_with(&m, FactorOptions { eps: cli.epsilon, seed: cli.seed })?.certificate
    };
    cert_outcome(&cert)
}

fn spectrum_cmd(cli: &Cli, path: &PathBuf) -> Outcome {
    let (_, m) = load_spec(path, cli.tol)?;
    let s = spectrum(&m)?;
    let unbounded = zero_in_unbounded_component(&s).ok();
    let angle = choose_branch_angle(&s).ok();
    let text = format!(
        "{} points, resolution {:.3e}, |λ| in [{:.4}, {:.4}], 0 in unbounded component: {}, branch angle: {}\n",
        s.points.len(),
        s.resolution,
        s.min_abs(),
        s.max_abs(),
        unbounded.map_or("ambiguous".to_string(), |b| b.to_string()),
        angle.map_or("none".to_string(), |a| format!("{a:.6}"))
    );
    let value = json!({
        "resolution": s.resolution,
        "zero_in_unbounded_component": unbounded,
        "branch_angle": angle,
        "points": s.points,
    });
    Ok((value, text, EXIT_OK))
}

fn verify(path: &PathBuf, replay: bool) -> Outcome {
    let cert: FactorizationCertificate = serde_json::from_str(&read(path)?).map_err(|e| spec_error(e.into()))?;
    let fresh = cert.recheck()?;
    let mut value = serde_json::to_value(&fresh).map_err(Error::from)?;
    let mut text = cert_text(&fresh);
    let mut ok = fresh.verified;
    if replay {
        let deviation = match &cert.trace {
            Some(trace) => {
                let space = cert.space()?;
                trace.replay(&cert.input_matrix(&space)?)?
            }
            None => 0.0,
        };
        let replayed = deviation <= 1e-9;
        ok &= replayed;
        value["replay_deviation"] = json!(deviation);
        text += &format!("  replay deviation {deviation:.3e} ({})\n", if replayed { "ok" } else { "FAILED" });
    }
    Ok((value, text, if ok { EXIT_OK } else { EXIT_UNVERIFIED }))
}

fn regroup(path: &PathBuf) -> Outcome {
    let list: FactorList = serde_json::from_str(&read(path)?).map_err(|e| spec_error(e.into()))?;
    let space = make_backend(list.backend).map_err(spec_error)?;
    let factors = list
        .factors
        .iter()
        .map(|entries| MatrixLiteral { n: list.n, entries: entries.clone() }.to_matrix(&space))
        .collect::<Result<Vec<_>>>()
        .map_err(spec_error)?;
    let grouped = regroup_unitriangular(&factors)?;
    let product = |v: &[MatrixOverAlgebra]| -> Result<MatrixOverAlgebra> {
        v[1..].iter().try_fold(v[0].clone(), |acc, m| acc.mul(m))
    };
    let residual = product(&grouped)?.max_diff(&product(&factors)?)?;
    let unipotent: Vec<bool> = grouped.iter().map(|f| log_unipotent(f).is_ok()).collect();
    let ok = residual <= REGROUP_TOL && unipotent.iter().all(|&u| u);
    let text = format!(
        "{} factors -> {} unipotent factors, product residual {:.3e}, all unipotent: {}\n",
        factors.len(),
        grouped.len(),
        residual,
        unipotent.iter().all(|&u| u)
    );
    let value = json!({
        "backend": list.backend,
        "n": list.n,
        "factors": grouped.iter().map(MatrixLiteral::from_matrix).collect::<Vec<_>>(),
        "residual": residual,
        "unipotent": unipotent,
        "verified": ok,
    });
    Ok((value, text, if ok { EXIT_OK } else { EXIT_UNVERIFIED }))
}

fn demo_t(cli: &Cli, samples: usize) -> Outcome {
    let report = run_t_suite(samples, cli.epsilon)?;
    let code = if report.passed { EXIT_OK } else { EXIT_UNVERIFIED };
    Ok((serde_json::to_value(&report).map_err(Error::from)?, report.table(), code))
}

fn singleexp(cli: &Cli, path: &PathBuf) -> Outcome {
    let (_, m) = load_spec(path, cli.tol)?;
    let (_, cert) = single_exp_certificate(&m)?;
    cert_outcome(&cert)
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Factorize { spec, triangular } => factorize(cli, spec, *triangular),
        Command::Spectrum { spec } => spectrum_cmd(cli, spec),
        Command::Verify { certificate, replay } => verify(certificate, *replay),
        Command::Regroup { factors } => regroup(factors),
        Command::Demo { which: Demo::TCounterexample { samples } } => demo_t(cli, *samples),
        Command::Singleexp { spec } => singleexp(cli, spec),
    }
}
