use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dimsplit::experiments::{
    compute_reference, paper_dr_rows, paper_pr_rows, run_convergence_with_reference,
    run_trajectory, verify_assumptions, ExperimentConfig, InitialData, ReferenceSpec, Row,
    DEFAULT_VERIFY_GRIDS,
};
use dimsplit::{CoefficientSet, Field, Scheme};

#[derive(Parser)]
#[command(
    name = "dimsplit",
    version,
    about = "Dimension splitting for 2D anisotropic diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one trajectory and write the final field.
    Run {
        /// dr, pr or cn
        #[arg(long)]
        scheme: Scheme,
        /// Number of subintervals per direction, h = 1/m
        #[arg(long)]
        m: usize,
        /// Time step
        #[arg(long, value_parser = parse_real)]
        k: f64,
        /// Final time, a multiple of k
        #[arg(long, value_parser = parse_real)]
        t_end: f64,
        /// paper or constant
        #[arg(long, default_value = "paper")]
        coeff: CoefficientSet,
        /// `paper`, or `file PATH` for a field file.
        #[arg(long, num_args = 1..=2, default_value = "paper")]
        initial: Vec<String>,
        /// Output field file; stdout if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure errors of a row set against a fine reference solution.
    Convergence {
        /// dr or pr
        #[arg(long)]
        scheme: Scheme,
        /// Use the published row set for the scheme.
        #[arg(long)]
        paper_rows: bool,
        /// Extra row as `K,M`; K may be written `1/N`.
        #[arg(long = "row", value_parser = parse_row)]
        rows: Vec<Row>,
        /// Reference grid size
        #[arg(long, default_value_t = 1024)]
        ref_m: usize,
        /// Reference time step
        #[arg(long, value_parser = parse_real, default_value = "1/8192")]
        ref_k: f64,
        /// Reference integrator, pr or cn
        #[arg(long, default_value = "pr")]
        ref_scheme: Scheme,
        #[arg(long, value_parser = parse_real, default_value = "0.5")]
        t_end: f64,
        #[arg(long, default_value = "paper")]
        coeff: CoefficientSet,
        /// Also write the table as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check the structural assumptions on a list of grids.
    Verify {
        /// Grid size to check; repeatable, defaults to 8 16 32 64 128
        #[arg(long = "m")]
        m: Vec<usize>,
        #[arg(long, default_value = "paper")]
        coeff: CoefficientSet,
    },
}

fn parse_real(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{s:?}: {e}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not a finite number"))
    }
}

fn parse_row(s: &str) -> Result<Row, String> {
    let (k, m) = s
        .split_once(',')
        .ok_or_else(|| format!("row {s:?} must look like K,M"))?;
    let m = m.trim().parse().map_err(|e| format!("row {s:?}: {e}"))?;
    Ok(Row::new(parse_real(k)?, m))
}

fn parse_initial(args: &[String]) -> Result<InitialData, String> {
    match args {
        [p] if p == "paper" => Ok(InitialData::Paper),
        [f, path] if f == "file" => Field::load(path)
            .map(InitialData::Field)
            .map_err(|e| format!("cannot read {path}: {e}")),
        _ => Err(format!(
            "--initial expects `paper` or `file PATH`, got {args:?}"
        )),
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    configure_threads()?;
    match cli.command {
        Command::Run {
            scheme,
            m,
            k,
            t_end,
            coeff,
            initial,
            out,
        } => {
            let initial = parse_initial(&initial)?;
            let u = run_trajectory(coeff, &initial, scheme, m, k, t_end)?;
            match out {
                Some(path) => u.save(path)?,
                None => u.write_to(std::io::stdout().lock())?,
            }
        }
        Command::Convergence {
            scheme,
            paper_rows,
            rows,
            ref_m,
            ref_k,
            ref_scheme,
            t_end,
            coeff,
            csv,
        } => {
            if !matches!(scheme, Scheme::DouglasRachford | Scheme::PeacemanRachford) {
                return Err("convergence studies take --scheme dr or pr".into());
            }
            let mut all = Vec::new();
            if paper_rows {
                all = match scheme {
                    Scheme::DouglasRachford => paper_dr_rows(),
                    _ => paper_pr_rows(),
                };
            }
            all.extend(rows);
            let config = ExperimentConfig {
                scheme,
                rows: all,
                t_end,
                reference: ReferenceSpec {
                    m: ref_m,
                    k: ref_k,
                    scheme: ref_scheme,
                },
                coefficients: coeff,
                initial: InitialData::Paper,
            };
            config.validate()?;
            let reference = compute_reference(&config)?;
            let report = run_convergence_with_reference(&config, &reference)?;
            print!("{report}");
            if let Some(path) = csv {
                report.write_csv(BufWriter::new(File::create(path)?))?;
            }
        }
        Command::Verify { m, coeff } => {
            let grids = if m.is_empty() {
                DEFAULT_VERIFY_GRIDS.to_vec()
            } else {
                m
            };
            let report = verify_assumptions(coeff, &grids)?;
            print!("{report}");
            if !report.all_passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn is_broken_pipe(e: &(dyn std::error::Error + 'static)) -> bool {
    match e.downcast_ref::<dimsplit::Error>() {
        Some(dimsplit::Error::Io(io)) => io.kind() == std::io::ErrorKind::BrokenPipe,
        _ => false,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(e.as_ref()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
