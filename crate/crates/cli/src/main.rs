use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use saddlechol::bounds::{scaling_candidates, EpsConvention, NormwiseContext, ScalingPurpose};
use saddlechol::densela::{fmt_g17, Matrix};
use saddlechol::genchol::{assemble_k, factorize, relative_residual};
use saddlechol::harness::{
    run_componentwise_campaign, run_gamma_sweep, run_normwise_campaign, summarize_componentwise,
    summarize_normwise, EnsembleConfig, SweepKind, SweepTable, DEFAULT_SEED, DOMINATION_SLACK,
    W_MAX_ORDER,
};
use saddlechol::oracle::{actual_delta_l_from, build_w, w_inverse_norm};
use saddlechol::report::{render, to_json_object, write_atomic, Format};
use saddlechol::{Error, SaddleMatrix};

const EXIT_IO: u8 = 1;
const EXIT_BREAKDOWN: u8 = 2;
const EXIT_CONDITION: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(name = "saddlechol", version, about = "Generalized Cholesky factorization of saddle-point matrices and perturbation bounds for its factor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorize a saddle-point matrix and write the dense factor L.
    Factor {
        /// Saddle matrix file: an `m n` header, then the rows of K.
        #[arg(long)]
        input: PathBuf,
        /// Output file (standard output when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every normwise bound for K and a perturbation dK.
    Bounds {
        /// Saddle matrix file for K.
        #[arg(long)]
        k: PathBuf,
        /// Matrix file for the symmetric perturbation dK.
        #[arg(long)]
        dk: PathBuf,
        /// Also factorize K + dK and report the actual change of the factor.
        #[arg(long)]
        with_actual: bool,
        /// Also build W and report the matrix-vector-equation bound.
        #[arg(long)]
        with_w_bound: bool,
        /// Output file for the JSON report (standard output when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random normwise verification campaign.
    Verify {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Values of ||L^-1||_2^2 ||dK||_F at which to place each perturbation.
        #[arg(long, value_delimiter = ',', default_value = "1e-8,1e-4,0.1,0.4")]
        dk_levels: Vec<f64>,
        /// Build W and report the matrix-vector-equation bound (m + n <= 24).
        #[arg(long)]
        with_w_bound: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Componentwise backward-error and synthetic-perturbation campaign.
    Backward {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Envelope constant of the synthetic perturbations.
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Envelope constant of the backward-error check: min-paper or max-safe.
        #[arg(long, default_value = "max-safe")]
        eps_convention: EpsConvention,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Adversarial 2x2 families over a list of gamma values.
    Sweep {
        /// remark32 (bad column scaling) or remark33 (ill-conditioned W).
        #[arg(long, default_value = "remark33")]
        kind: SweepKind,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        gammas: Vec<f64>,
        /// ||dK||_F for the remark32 bounds.
        #[arg(long, default_value_t = 1e-8)]
        dk_fro: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct EnsembleArgs {
    /// Order of the leading block A.
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Order of the trailing block C (at most m).
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Cap on the log-uniform condition targets of A and the Schur block.
    #[arg(long, default_value_t = 1e3)]
    cond_target: f64,
}

#[derive(Args)]
struct OutputArgs {
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Output file (standard output when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl EnsembleArgs {
    fn config(&self) -> EnsembleConfig {
        EnsembleConfig {
            m: self.m,
            n: self.n,
            trials: self.trials,
            cond_target: self.cond_target,
            seed: self.seed,
            ..Default::default()
        }
    }
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Breakdown { .. } | Error::PerturbedFactorization(_) => EXIT_BREAKDOWN,
            _ => EXIT_IO,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_IO,
        msg: format!("{}: {e}", path.display()),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()).map_err(|e| Failure {
            code: EXIT_IO,
            msg: format!("{}: {e}", p.display()),
        }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure {
            code: EXIT_IO,
            msg: e.to_string(),
        }),
    }
}

fn cmd_factor(input: &Path, out: Option<&Path>) -> Result<u8, Failure> {
    let s = SaddleMatrix::parse_text(&read(input)?)?;
    let l = factorize(&s)?;
    emit(out, &l.to_dense().to_text())?;
    eprintln!(
        "m={} n={} relative_residual={}",
        s.spec().m,
        s.spec().n,
        fmt_g17(relative_residual(&l, &s))
    );
    Ok(0)
}

fn cmd_bounds(k_path: &Path, dk_path: &Path, with_actual: bool, with_w: bool, out: Option<&Path>) -> Result<u8, Failure> {
    let s = SaddleMatrix::parse_text(&read(k_path)?)?;
    let dk = Matrix::parse_text(&read(dk_path)?)?;
    let p = s.spec().order();
    if dk.shape() != (p, p) {
        return Err(Error::DimensionMismatch {
            op: "bounds (dK)",
            left: (p, p),
            right: dk.shape(),
        }
        .into());
    }
    dk.check_symmetric()?;
    let factor = factorize(&s)?;
    let l = factor.to_dense();
    let k = assemble_k(&s);
    let set = scaling_candidates(&l, ScalingPurpose::KappaMin)?;
    let ctx = NormwiseContext::new(&l, Some(&k), &set)?;
    let dk_fro = saddlechol::densela::fro_norm(&dk);
    let w_inv = if with_w {
        if p > W_MAX_ORDER {
            eprintln!("W bound skipped: order {p} exceeds {W_MAX_ORDER}");
            None
        } else {
            Some(w_inverse_norm(&build_w(&factor)?)?)
        }
    } else {
        None
    };
    let cond_ok = ctx.cond_3_1(dk_fro);
    let actual = if with_actual {
        match actual_delta_l_from(&factor, &k, &dk) {
            Ok(d) => Some(d),
            Err(Error::PerturbedFactorization(e)) if !cond_ok => {
                eprintln!("perturbed factorization failed: {e}");
                None
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let report = ctx.report(dk_fro, w_inv, actual.as_ref())?;
    emit(out, &format!("{}\n", to_json_object(&report)))?;
    let violated: Vec<&str> = match report.actual_dl_fro {
        Some(a) => report
            .rigorous_bounds()
            .into_iter()
            .filter(|(_, b)| a > b + DOMINATION_SLACK)
            .map(|(name, _)| name)
            .collect(),
        None => Vec::new(),
    };
    eprintln!(
        "dk_fro={} cond_3_1_ok={} violations={}",
        fmt_g17(dk_fro),
        cond_ok,
        violated.len()
    );
    Ok(if !cond_ok {
        EXIT_CONDITION
    } else if !violated.is_empty() {
        EXIT_VIOLATION
    } else {
        0
    })
}

fn cmd_verify(cfg: EnsembleConfig, output: &OutputArgs) -> Result<u8, Failure> {
    let records = run_normwise_campaign(&cfg)?;
    emit(output.out.as_deref(), &render(&records, output.format)?)?;
    let summary = summarize_normwise(cfg.trials, &records);
    eprintln!("{}", summary.line());
    Ok(if summary.violations > 0 { EXIT_VIOLATION } else { 0 })
}

fn cmd_backward(cfg: EnsembleConfig, output: &OutputArgs) -> Result<u8, Failure> {
    let records = run_componentwise_campaign(&cfg)?;
    emit(output.out.as_deref(), &render(&records, output.format)?)?;
    let summary = summarize_componentwise(&records);
    let envelope = records.iter().filter(|r| !r.backward_ok()).count();
    eprintln!("{} envelope_violations={envelope}", summary.line());
    Ok(if summary.violations > 0 { EXIT_VIOLATION } else { 0 })
}

fn cmd_sweep(kind: SweepKind, gammas: &[f64], dk_fro: f64, output: &OutputArgs) -> Result<u8, Failure> {
    let table = run_gamma_sweep(kind, gammas, dk_fro)?;
    emit(output.out.as_deref(), &table.render(output.format)?)?;
    let mut line = format!("kind={kind} rows={}", table.len());
    match &table {
        SweepTable::W(rows) => {
            if let Some(slope) = table.winv_sq_slope() {
                line.push_str(&format!(" winv2_sq_slope={slope:.4}"));
            }
            if let Some(min) = rows.iter().map(|r| r.threshold_ratio).reduce(f64::min) {
                line.push_str(&format!(" min_threshold_ratio={}", fmt_g17(min)));
            }
        }
        SweepTable::Scaling(rows) => {
            if let Some(max) = rows.iter().map(|r| r.kappa_ratio).reduce(f64::max) {
                line.push_str(&format!(" max_kappa_ratio={}", fmt_g17(max)));
            }
        }
    }
    eprintln!("{line}");
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Factor { input, out } => cmd_factor(&input, out.as_deref()),
        Command::Bounds {
            k,
            dk,
            with_actual,
            with_w_bound,
            out,
        } => cmd_bounds(&k, &dk, with_actual, with_w_bound, out.as_deref()),
        Command::Verify {
            ensemble,
            dk_levels,
            with_w_bound,
            output,
        } => {
            let cfg = EnsembleConfig {
                dk_levels,
                with_w_bound,
                ..ensemble.config()
            };
            cfg.validate()?;
            cmd_verify(cfg, &output)
        }
        Command::Backward {
            ensemble,
            eps,
            eps_convention,
            output,
        } => {
            let cfg = EnsembleConfig {
                eps,
                eps_convention,
                ..ensemble.config()
            };
            cfg.validate()?;
            cmd_backward(cfg, &output)
        }
        Command::Sweep {
            kind,
            gammas,
            dk_fro,
            output,
        } => cmd_sweep(kind, &gammas, dk_fro, &output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_IO } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
