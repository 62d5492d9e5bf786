use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tds_psa::cli::{self, CliError, ComputeOptions, RegionFlags, SystemFile};

#[derive(Parser)]
#[command(
    name = "tds-psa",
    version,
    about = "Pseudospectral abscissa of retarded time-delay systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict and correct the pseudospectral abscissa; prints a JSON record.
    Compute {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        flags: Flags,
    },
    /// Export level-set polylines of the pseudospectrum boundary.
    Contour {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        flags: Flags,
        #[command(flatten)]
        region: Region,
    },
    /// Brute-force grid reference for the pseudospectral abscissa.
    Oracle {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        flags: Flags,
        #[command(flatten)]
        region: Region,
        /// Rounds of x10 local grid refinement.
        #[arg(long)]
        refine: Option<usize>,
        /// Also run `compute` and report the gap.
        #[arg(long)]
        compare: bool,
    },
}

#[derive(Args)]
struct Input {
    /// System file (JSON).
    #[arg(required_unless_present = "random")]
    file: Option<PathBuf>,
    /// Use a random plant `n,m` instead of a file (unit weights).
    #[arg(long, value_parser = parse_pair, conflicts_with = "file")]
    random: Option<(usize, usize)>,
    /// Seed for `--random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Flags {
    /// Discretization order.
    #[arg(long = "N", default_value_t = tds_psa::discretization::DEFAULT_N)]
    n: usize,
    /// Bisection tolerance of the prediction step.
    #[arg(long, default_value_t = tds_psa::predictor::DEFAULT_TOL)]
    tol: f64,
    /// Overrides the epsilon in the file.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = tds_psa::corrector::DEFAULT_GN_TOL)]
    gn_tol: f64,
    /// Gauss-Newton iteration cap per start.
    #[arg(long, default_value_t = tds_psa::corrector::DEFAULT_GN_MAX_ITER)]
    max_iter: usize,
    /// Write the output here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Region {
    #[arg(long, allow_negative_numbers = true)]
    re_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    re_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    im_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    im_max: Option<f64>,
    /// Grid nodes along the real axis.
    #[arg(long)]
    n_re: Option<usize>,
    /// Grid nodes along the imaginary axis.
    #[arg(long)]
    n_im: Option<usize>,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected n,m")?;
    Ok((
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

impl Input {
    fn load(&self, epsilon: Option<f64>) -> Result<SystemFile, CliError> {
        match (&self.file, self.random) {
            (_, Some((n, m))) => Ok(cli::random_system_file(
                self.seed,
                n,
                m,
                epsilon.unwrap_or(0.1),
            )),
            (Some(path), None) => SystemFile::read(path),
            (None, None) => unreachable!("clap requires one input"),
        }
    }
}

impl Flags {
    fn options(&self) -> ComputeOptions {
        ComputeOptions {
            n: self.n,
            tol: self.tol,
            epsilon: self.epsilon,
            gn_tol: self.gn_tol,
            max_iter: self.max_iter,
            ..Default::default()
        }
    }

    fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.output {
            Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io {
                path: path.clone(),
                message: e.to_string(),
            }),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

impl From<&Region> for RegionFlags {
    fn from(r: &Region) -> Self {
        RegionFlags {
            re_min: r.re_min,
            re_max: r.re_max,
            im_min: r.im_min,
            im_max: r.im_max,
            n_re: r.n_re,
            n_im: r.n_im,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Compute { input, flags } => {
            let record = cli::cmd_compute(&input.load(flags.epsilon)?, &flags.options())?;
            for w in &record.warnings {
                eprintln!("warning: {w}");
            }
            flags.emit(&(serde_json::to_string_pretty(&record).expect("record serializes") + "\n"))
        }
        Command::Contour {
            input,
            flags,
            region,
        } => {
            let file = cli::cmd_contour(
                &input.load(flags.epsilon)?,
                &(&region).into(),
                &flags.options(),
            )?;
            flags.emit(&file.to_text())
        }
        Command::Oracle {
            input,
            flags,
            region,
            refine,
            compare,
        } => {
            let record = cli::cmd_oracle(
                &input.load(flags.epsilon)?,
                &(&region).into(),
                refine,
                compare,
                &flags.options(),
            )?;
            flags.emit(&(serde_json::to_string_pretty(&record).expect("record serializes") + "\n"))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
