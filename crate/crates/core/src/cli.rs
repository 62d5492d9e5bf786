//! File formats and command implementations behind the `tds-psa` binary.
//!
//! A system file is JSON:
//!
//! ```json
//! {
//!   "name": "one-delay",
//!   "n": 1,
//!   "delays": [1.0],
//!   "A0": [[0.0]],
//!   "A": [[[-1.0]]],
//!   "weights": [1, "inf"],
//!   "epsilon": 0.1
//! }
//! ```
//!
//! `delays` lists `tau_1..tau_m` (`tau_0 = 0` is implicit), matrices are
//! row-major nested arrays (a flat row-major list of `n * n` numbers is
//! also accepted), and `weights` has `m + 1` entries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corrector::{GaussNewtonOptions, DEFAULT_GN_MAX_ITER, DEFAULT_GN_TOL};
use crate::discretization::{self, DEFAULT_N};
use crate::error::PsaError;
use crate::model::{PerturbationSpec, TimeDelaySystem, Weight};
use crate::numerics::RMatrix;
use crate::oracle::{self, GridRegion, DEFAULT_REFINE_ITERS};
use crate::pipeline::{pseudospectral_abscissa, PsaOptions};
use crate::predictor::{
    self, BisectionOptions, PredictorOptions, UpperBound, DEFAULT_MAX_BISECTION_ITER, DEFAULT_TOL,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("cannot parse system file: {0}")]
    Parse(String),
    #[error("invalid field `{field}`: {message}")]
    InvalidField { field: String, message: String },
    #[error(transparent)]
    Solver(#[from] PsaError),
}

impl CliError {
    /// 2 when every corrector start failed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(PsaError::AllStartsFailed { .. }) => 2,
            _ => 1,
        }
    }

    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::InvalidField {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixData {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixData {
    fn to_matrix(&self, n: usize, field: &str) -> Result<RMatrix, CliError> {
        let m = match self {
            MatrixData::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(CliError::field(field, format!("expected {n}x{n} rows")));
                }
                RMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
            MatrixData::Flat(v) => {
                if v.len() != n * n {
                    return Err(CliError::field(
                        field,
                        format!("expected {} row-major entries, got {}", n * n, v.len()),
                    ));
                }
                RMatrix::from_row_slice(n, n, v)
            }
        };
        if m.iter().any(|x| !x.is_finite()) {
            return Err(CliError::field(field, "entries must be finite"));
        }
        Ok(m)
    }

    fn from_matrix(m: &RMatrix) -> Self {
        MatrixData::Rows(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub delays: Vec<f64>,
    #[serde(rename = "A0")]
    pub a0: MatrixData,
    #[serde(rename = "A", default)]
    pub a: Vec<MatrixData>,
    pub weights: Vec<Weight>,
    pub epsilon: f64,
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system file serializes")
    }

    pub fn from_problem(name: &str, sys: &TimeDelaySystem, pert: &PerturbationSpec) -> Self {
        Self {
            name: name.to_string(),
            n: sys.n(),
            delays: sys.delays()[1..].to_vec(),
            a0: MatrixData::from_matrix(&sys.matrices()[0]),
            a: sys.matrices()[1..]
                .iter()
                .map(MatrixData::from_matrix)
                .collect(),
            weights: pert.weights().to_vec(),
            epsilon: pert.epsilon(),
        }
    }

    /// Validates every field and builds the system and perturbation spec.
    pub fn to_problem(&self) -> Result<(TimeDelaySystem, PerturbationSpec), CliError> {
        if self.n == 0 {
            return Err(CliError::field("n", "must be positive"));
        }
        if self.a.len() != self.delays.len() {
            return Err(CliError::field(
                "A",
                format!("{} matrices for {} delays", self.a.len(), self.delays.len()),
            ));
        }
        for (i, &tau) in self.delays.iter().enumerate() {
            if tau <= 0.0 || !tau.is_finite() {
                return Err(CliError::field(
                    format!("delays[{i}]"),
                    format!("must be positive and finite, got {tau}"),
                ));
            }
        }
        let mut matrices = vec![self.a0.to_matrix(self.n, "A0")?];
        for (i, m) in self.a.iter().enumerate() {
            matrices.push(m.to_matrix(self.n, &format!("A[{i}]"))?);
        }
        if self.weights.len() != self.delays.len() + 1 {
            return Err(CliError::field(
                "weights",
                format!(
                    "expected {} entries (one per matrix), got {}",
                    self.delays.len() + 1,
                    self.weights.len()
                ),
            ));
        }
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(CliError::field(
                "epsilon",
                format!("must be positive, got {}", self.epsilon),
            ));
        }
        let mut delays = vec![0.0];
        delays.extend_from_slice(&self.delays);
        let sys = TimeDelaySystem::new(delays, matrices)?;
        let pert = PerturbationSpec::new(self.weights.clone(), self.epsilon)
            .map_err(|e| CliError::field("weights", e.to_string()))?;
        Ok((sys, pert))
    }
}

/// Flags shared by the commands that run the full computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeOptions {
    pub n: usize,
    pub tol: f64,
    pub epsilon: Option<f64>,
    pub gn_tol: f64,
    pub max_iter: usize,
    pub max_bisection_iter: usize,
}

impl Default for ComputeOptions {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            tol: DEFAULT_TOL,
            epsilon: None,
            gn_tol: DEFAULT_GN_TOL,
            max_iter: DEFAULT_GN_MAX_ITER,
            max_bisection_iter: DEFAULT_MAX_BISECTION_ITER,
        }
    }
}

impl ComputeOptions {
    pub fn psa_options(&self) -> PsaOptions {
        PsaOptions {
            predictor: PredictorOptions {
                n: self.n,
                bisection: BisectionOptions {
                    tol: self.tol,
                    max_iter: self.max_bisection_iter,
                    ..Default::default()
                },
                ..Default::default()
            },
            corrector: GaussNewtonOptions {
                tol: self.gn_tol,
                max_iter: self.max_iter,
                damped: false,
            },
        }
    }

    fn problem(&self, file: &SystemFile) -> Result<(TimeDelaySystem, PerturbationSpec), CliError> {
        let (sys, pert) = file.to_problem()?;
        let pert = match self.epsilon {
            Some(eps) => pert
                .with_epsilon(eps)
                .map_err(|e| CliError::field("epsilon", e.to_string()))?,
            None => pert,
        };
        Ok((sys, pert))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub name: String,
    pub alpha_eps: f64,
    pub omega_eps: f64,
    pub alpha_pred: f64,
    pub frequencies: Vec<f64>,
    pub spectral_abscissa: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub tol: f64,
    pub epsilon: f64,
    /// Final bisection bracket `[lower, upper]`.
    pub bracket: (f64, Option<f64>),
    pub bisection_iterations: usize,
    /// Gauss-Newton iterations per start, `null` for failed starts.
    pub gn_iterations: Vec<Option<usize>>,
    pub warnings: Vec<String>,
    pub wall_time_seconds: f64,
}

pub fn cmd_compute(file: &SystemFile, opts: &ComputeOptions) -> Result<ResultRecord, CliError> {
    let (sys, pert) = opts.problem(file)?;
    let started = Instant::now();
    let res = pseudospectral_abscissa(&sys, &pert, &opts.psa_options())?;
    let wall_time_seconds = started.elapsed().as_secs_f64();
    let p = &res.prediction;
    Ok(ResultRecord {
        name: file.name.clone(),
        alpha_eps: res.alpha_eps,
        omega_eps: res.omega_eps,
        alpha_pred: p.alpha_pred,
        frequencies: p.frequencies.clone(),
        spectral_abscissa: res.spectral.value,
        n: predictor::effective_order(&sys, opts.n),
        tol: opts.tol,
        epsilon: pert.epsilon(),
        bracket: (
            p.bracket.lower,
            match p.bracket.upper {
                UpperBound::Finite(u) => Some(u),
                UpperBound::Infinite => None,
            },
        ),
        bisection_iterations: p.iterations,
        gn_iterations: res
            .correction
            .per_start
            .iter()
            .map(|s| s.converged.then_some(s.iterations))
            .collect(),
        warnings: res.warnings,
        wall_time_seconds,
    })
}

pub fn run_compute(path: &Path, opts: &ComputeOptions) -> Result<ResultRecord, CliError> {
    cmd_compute(&SystemFile::read(path)?, opts)
}

/// Region flags; unset bounds are chosen automatically.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RegionFlags {
    pub re_min: Option<f64>,
    pub re_max: Option<f64>,
    pub im_min: Option<f64>,
    pub im_max: Option<f64>,
    pub n_re: Option<usize>,
    pub n_im: Option<usize>,
}

impl RegionFlags {
    /// Fills unset bounds from [`GridRegion::enclosing`] with
    /// `re_min = alpha(F) - margin`, mirrored to `-im_max` when `mirror`.
    fn resolve(
        &self,
        sys: &TimeDelaySystem,
        pert: &PerturbationSpec,
        alpha: f64,
        margin: f64,
        mirror: bool,
        default_nodes: usize,
    ) -> Result<GridRegion, CliError> {
        let re_min = self.re_min.unwrap_or(alpha - margin);
        let auto = GridRegion::enclosing(sys, pert, re_min, 2, 2)?;
        let im_max = self.im_max.unwrap_or(auto.im_max);
        let im_min = self.im_min.unwrap_or(if mirror { -im_max } else { 0.0 });
        Ok(GridRegion::new(
            re_min,
            self.re_max.unwrap_or(auto.re_max),
            im_min,
            im_max,
            self.n_re.unwrap_or(default_nodes),
            self.n_im.unwrap_or(default_nodes),
        )?)
    }
}

fn spectral_abscissa_and_roots(
    sys: &TimeDelaySystem,
    n: usize,
) -> Result<predictor::SpectralAbscissa, CliError> {
    let disc = discretization::assemble(sys, predictor::effective_order(sys, n))?;
    Ok(predictor::spectral_abscissa_exact(
        sys,
        &disc,
        predictor::DEFAULT_NEWTON_TOL,
    )?)
}

/// Contour polylines plus the metadata needed to plot them.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourFile {
    pub name: String,
    pub level: f64,
    pub epsilon: f64,
    pub region: GridRegion,
    pub alpha_pred: Option<f64>,
    pub alpha_eps: Option<f64>,
    pub omega_eps: Option<f64>,
    /// Characteristic roots (upper half-plane) for star markers.
    pub roots: Vec<(f64, f64)>,
    /// `(polyline_id, re, im)` rows.
    pub rows: Vec<(usize, f64, f64)>,
}

impl ContourFile {
    pub fn polyline_count(&self) -> usize {
        self.rows.iter().map(|r| r.0 + 1).max().unwrap_or(0)
    }

    /// `#`-prefixed `key: value` header lines, then a `polyline_id,re,im`
    /// CSV table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let r = &self.region;
        let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:e}"));
        writeln!(s, "# name: {}", self.name).unwrap();
        writeln!(s, "# level: {:e}", self.level).unwrap();
        writeln!(s, "# epsilon: {:e}", self.epsilon).unwrap();
        writeln!(
            s,
            "# region: {:e} {:e} {:e} {:e} {} {}",
            r.re_min, r.re_max, r.im_min, r.im_max, r.n_re, r.n_im
        )
        .unwrap();
        writeln!(s, "# alpha_pred: {}", opt(self.alpha_pred)).unwrap();
        writeln!(s, "# alpha_eps: {}", opt(self.alpha_eps)).unwrap();
        writeln!(s, "# omega_eps: {}", opt(self.omega_eps)).unwrap();
        for (re, im) in &self.roots {
            writeln!(s, "# root: {re:e} {im:e}").unwrap();
        }
        writeln!(s, "polyline_id,re,im").unwrap();
        for (id, re, im) in &self.rows {
            writeln!(s, "{id},{re:e},{im:e}").unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = |what: &str| CliError::Parse(format!("contour file: {what}"));
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| bad(&format!("bad number {v:?}")))
        };
        let opt = |v: &str| {
            if v.trim() == "none" {
                Ok(None)
            } else {
                num(v).map(Some)
            }
        };
        let mut out = ContourFile {
            name: String::new(),
            level: f64::NAN,
            epsilon: f64::NAN,
            region: GridRegion {
                re_min: 0.0,
                re_max: 0.0,
                im_min: 0.0,
                im_max: 0.0,
                n_re: 0,
                n_im: 0,
            },
            alpha_pred: None,
            alpha_eps: None,
            omega_eps: None,
            roots: vec![],
            rows: vec![],
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            if let Some(meta) = line.strip_prefix("# ") {
                let (key, value) = meta.split_once(": ").ok_or_else(|| bad(line))?;
                match key {
                    "name" => out.name = value.to_string(),
                    "level" => out.level = num(value)?,
                    "epsilon" => out.epsilon = num(value)?,
                    "alpha_pred" => out.alpha_pred = opt(value)?,
                    "alpha_eps" => out.alpha_eps = opt(value)?,
                    "omega_eps" => out.omega_eps = opt(value)?,
                    "region" => {
                        let p: Vec<&str> = value.split_whitespace().collect();
                        if p.len() != 6 {
                            return Err(bad("region needs 6 values"));
                        }
                        out.region = GridRegion {
                            re_min: num(p[0])?,
                            re_max: num(p[1])?,
                            im_min: num(p[2])?,
                            im_max: num(p[3])?,
                            n_re: p[4].parse().map_err(|_| bad("n_re"))?,
                            n_im: p[5].parse().map_err(|_| bad("n_im"))?,
                        };
                    }
                    "root" => {
                        let (a, b) = value.split_once(' ').ok_or_else(|| bad(line))?;
                        out.roots.push((num(a)?, num(b)?));
                    }
                    _ => return Err(bad(&format!("unknown key {key}"))),
                }
            } else if line.trim() == "polyline_id,re,im" {
                continue;
            } else {
                let p: Vec<&str> = line.split(',').collect();
                if p.len() != 3 {
                    return Err(bad(line));
                }
                out.rows.push((
                    p[0].trim().parse().map_err(|_| bad(line))?,
                    num(p[1])?,
                    num(p[2])?,
                ));
            }
        }
        Ok(out)
    }
}

pub fn cmd_contour(
    file: &SystemFile,
    region: &RegionFlags,
    opts: &ComputeOptions,
) -> Result<ContourFile, CliError> {
    let (sys, pert) = opts.problem(file)?;
    let spectral = spectral_abscissa_and_roots(&sys, opts.n)?;
    let grid = region.resolve(&sys, &pert, spectral.value, 2.0, true, 200)?;
    let set = oracle::contours(&sys, &pert, &grid)?;
    let computed = pseudospectral_abscissa(&sys, &pert, &opts.psa_options()).ok();
    let rows = set
        .polylines
        .iter()
        .enumerate()
        .flat_map(|(id, line)| line.iter().map(move |z| (id, z.re, z.im)))
        .collect();
    Ok(ContourFile {
        name: file.name.clone(),
        level: set.level,
        epsilon: pert.epsilon(),
        region: grid,
        alpha_pred: computed.as_ref().map(|r| r.prediction.alpha_pred),
        alpha_eps: computed.as_ref().map(|r| r.alpha_eps),
        omega_eps: computed.as_ref().map(|r| r.omega_eps),
        roots: spectral.roots.iter().map(|z| (z.re, z.im)).collect(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub name: String,
    pub alpha_grid: f64,
    pub omega_grid: f64,
    pub resolution: f64,
    /// `[re_min, re_max, im_min, im_max, n_re, n_im]` of the initial grid.
    pub region: (f64, f64, f64, f64, usize, usize),
    pub refine_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
}

pub fn cmd_oracle(
    file: &SystemFile,
    region: &RegionFlags,
    refine_iters: Option<usize>,
    compare: bool,
    opts: &ComputeOptions,
) -> Result<OracleRecord, CliError> {
    let (sys, pert) = opts.problem(file)?;
    let spectral = spectral_abscissa_and_roots(&sys, opts.n)?;
    let grid = region.resolve(&sys, &pert, spectral.value, 0.5, false, 400)?;
    let refine_iters = refine_iters.unwrap_or(DEFAULT_REFINE_ITERS);
    let res = oracle::grid_psa(&sys, &pert, &grid, refine_iters)?;
    let alpha_eps = if compare {
        Some(pseudospectral_abscissa(&sys, &pert, &opts.psa_options())?.alpha_eps)
    } else {
        None
    };
    Ok(OracleRecord {
        name: file.name.clone(),
        alpha_grid: res.alpha,
        omega_grid: res.omega,
        resolution: res.resolution,
        region: (
            grid.re_min,
            grid.re_max,
            grid.im_min,
            grid.im_max,
            grid.n_re,
            grid.n_im,
        ),
        refine_iters,
        alpha_eps,
        gap: alpha_eps.map(|a| (a - res.alpha).abs()),
    })
}

/// Seeded random plant as a system file, with unit weights.
pub fn random_system_file(seed: u64, n: usize, m: usize, epsilon: f64) -> SystemFile {
    use rand::SeedableRng;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let sys = crate::random::random_plant(&mut rng, n, m);
    let pert = PerturbationSpec::unit(m, epsilon).expect("positive epsilon");
    SystemFile::from_problem(&format!("random-n{n}-m{m}-seed{seed}"), &sys, &pert)
}
