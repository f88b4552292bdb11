use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::checks::{self, CheckError, OracleRun};
use super::config::{CheckKind, ConfigError, RunConfig};
use super::gns;
use super::report::{BoundReport, CheckRecord, RunInfo, Witness};
use crate::constants::{consistency_report, ConsistencyReport, ConstantsBundle};
use crate::operators::{halton_ball, validate, Floors, OperatorError, OperatorSpec, DEFAULT_SAMPLE_COUNT, FLOOR_TOLERANCE};
use crate::oracles::MCConfig;
use crate::pdekernel::{kernel_matrix, BallGrid, DiscreteOperator, KernelMatrix, KernelOptions, Orientation, SCHEME};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Validate,
    Constants,
    Grid,
    Kernel,
    Checks,
    Oracle,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Validate => "validate",
            Stage::Constants => "constants",
            Stage::Grid => "grid",
            Stage::Kernel => "kernel",
            Stage::Checks => "checks",
            Stage::Oracle => "oracle",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{stage} stage: {message}")]
    Stage { stage: Stage, message: String },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Stage { stage: Stage::Config, .. } => EXIT_CONFIG,
            HarnessError::Stage { .. } => EXIT_RUNTIME,
        }
    }
}

fn at<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> HarnessError {
    move |e| HarnessError::Stage { stage, message: e.to_string() }
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// A parsed config with its operator, constants and validation row.
#[derive(Debug, Clone)]
pub struct Session {
    pub config: RunConfig,
    pub spec: OperatorSpec,
    pub floors: Floors,
    pub constants: ConstantsBundle,
    pub consistency: ConsistencyReport,
    pub preliminary: Vec<CheckRecord>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Session {
    pub fn prepare(config: RunConfig, overrides: &Overrides) -> Result<Session, HarnessError> {
        let spec = config.operator_spec().map_err(at(Stage::Config))?;
        let floors = spec.require_floors().map_err(at(Stage::Config))?;
        let n = config.operator.dim as u32;
        let lambda = config.operator.lambda;
        let constants =
            ConstantsBundle::new(n, lambda, floors.h0.value, floors.h0_star.value).map_err(at(Stage::Constants))?;
        let consistency = consistency_report(n, lambda).map_err(at(Stage::Constants))?;

        let sample = halton_ball(DEFAULT_SAMPLE_COUNT, spec.dim(), config.operator.check_radius);
        let tag = "structural conditions on the coefficients";
        let validation = match validate(&spec, &sample) {
            Ok(v) => {
                let margin = v.ellipticity_margin.min(v.h0_margin).min(v.h0_star_margin);
                let witness = if margin == v.ellipticity_margin {
                    &v.ellipticity_witness
                } else if margin == v.h0_margin {
                    &v.h0_witness
                } else {
                    &v.h0_star_witness
                };
                CheckRecord::gate("operator_validation", tag, margin, FLOOR_TOLERANCE)
                    .witness(Witness::at(Some(witness.clone()), None, None))
                    .note(format!(
                        "{} points in B(0, {}); floors {}",
                        v.samples,
                        config.operator.check_radius,
                        if v.floors_certified { "declared" } else { "estimated by sampling, not certified" }
                    ))
            }
            Err(e @ (OperatorError::Ellipticity { .. } | OperatorError::FloorViolation { .. })) => {
                CheckRecord::gate("operator_validation", tag, f64::NEG_INFINITY, 0.0).note(e.to_string())
            }
            Err(e) => return Err(at(Stage::Validate)(e)),
        };
        let sharp = CheckRecord::gate(
            "constants_consistency",
            "closed-form constant against the sharp Sobolev route",
            1e-10 - consistency.sharp_route_relative_error,
            0.0,
        )
        .constant("C_closed", consistency.c_closed)
        .values(consistency.c_from_s_sharp, consistency.c_closed);
        let stated = CheckRecord::gate(
            "constants_stated_route",
            "closed-form constant against the stated Sobolev constant",
            consistency.expected_ratio - consistency.paper_route_ratio,
            1e-10 * consistency.expected_ratio,
        )
        .constant("C_from_S_paper", consistency.c_from_s_paper)
        .values(consistency.paper_route_ratio, consistency.expected_ratio)
        .note("the two routes differ by exactly 2^(2N-2)")
        .informational();

        let seed = overrides.seed.or(config.mc.as_ref().map(|m| m.seed)).unwrap_or(0);
        let out_dir = overrides.out_dir.clone().unwrap_or_else(|| config.output.dir.clone());
        Ok(Session {
            config,
            spec,
            floors,
            constants,
            consistency,
            preliminary: vec![validation, sharp, stated],
            seed,
            out_dir,
        })
    }

    pub fn valid(&self) -> bool {
        !self.preliminary[0].failed()
    }

    pub fn grid(&self) -> Result<Arc<BallGrid>, HarnessError> {
        let cfg = &self.config;
        BallGrid::new(cfg.operator.dim, cfg.largest_radius(), cfg.grid.h).map(Arc::new).map_err(at(Stage::Grid))
    }

    pub fn operator(&self, grid: Arc<BallGrid>) -> Result<DiscreteOperator, HarnessError> {
        DiscreteOperator::assemble(&self.spec, grid).map_err(at(Stage::Grid))
    }

    pub fn options(&self) -> KernelOptions {
        KernelOptions { dt: self.config.grid.dt, t_min: self.config.t_min() }
    }

    pub fn source_nodes(&self, grid: &BallGrid) -> Result<Vec<usize>, HarnessError> {
        self.config
            .sources
            .iter()
            .map(|p| {
                grid.locate(p).ok_or_else(|| HarnessError::Stage {
                    stage: Stage::Grid,
                    message: format!("source {p:?} is not a node of the grid"),
                })
            })
            .collect()
    }

    pub fn kernel(&self, op: &DiscreteOperator, orientation: Orientation) -> Result<KernelMatrix, HarnessError> {
        let sources = self.source_nodes(op.grid())?;
        kernel_matrix(op, &sources, &self.config.times, &self.options(), orientation).map_err(at(Stage::Kernel))
    }

    pub fn info(&self, nodes: usize) -> RunInfo {
        let cfg = &self.config;
        RunInfo {
            label: self.spec.label().to_string(),
            scheme: SCHEME,
            seed: self.seed,
            dim: cfg.operator.dim,
            lambda: cfg.operator.lambda,
            h: cfg.grid.h,
            dt: cfg.grid.dt,
            radii: cfg.grid.radii.clone(),
            times: cfg.times.clone(),
            sources: cfg.sources.clone(),
            nodes,
            floors: self.floors,
            floors_certified: self.floors.certified(),
        }
    }

    fn report(&self, nodes: usize, rows: Vec<CheckRecord>) -> BoundReport {
        let mut all = self.preliminary.clone();
        all.extend(rows);
        BoundReport::new(self.info(nodes), self.constants, self.consistency.clone(), all)
    }

    pub fn oracle_run(&self) -> Option<OracleRun> {
        let m = self.config.mc.as_ref()?;
        let radius = self.config.largest_radius();
        let mc = MCConfig {
            samples: m.samples,
            dt: m.dt,
            seed: self.seed,
            bandwidth: m.bandwidth,
            r_trunc: m.r_trunc.min(radius),
        };
        Some(OracleRun { mc, x0: m.x0.clone(), time: m.time })
    }
}

/// Operator validation and constants only.
pub fn run_validate(config: RunConfig, overrides: &Overrides) -> Result<BoundReport, HarnessError> {
    let session = Session::prepare(config, overrides)?;
    Ok(session.report(0, Vec::new()))
}

/// Computes second-argument kernel columns for every source and time.
pub fn run_kernel(config: RunConfig, overrides: &Overrides) -> Result<(BoundReport, Option<KernelMatrix>), HarnessError> {
    let session = Session::prepare(config, overrides)?;
    if !session.valid() {
        return Ok((session.report(0, Vec::new()), None));
    }
    let op = session.operator(session.grid()?)?;
    let kernel = session.kernel(&op, Orientation::Transposed)?;
    Ok((session.report(op.len(), Vec::new()), Some(kernel)))
}

fn checks_err(e: CheckError) -> HarnessError {
    at(Stage::Checks)(e)
}

/// The full pipeline: validate, constants, grid, kernels, enabled checks and
/// the Monte Carlo oracle when configured.
pub fn run(config: RunConfig, overrides: &Overrides) -> Result<BoundReport, HarnessError> {
    let session = Session::prepare(config, overrides)?;
    if !session.valid() {
        return Ok(session.report(0, Vec::new()));
    }
    let cfg = &session.config;
    let enabled = |k: CheckKind| cfg.checks.enabled.contains(&k);
    let grid = session.grid()?;
    let op = session.operator(grid.clone())?;
    let opts = session.options();
    let sources = session.source_nodes(&grid)?;
    let kernel = session.kernel(&op, Orientation::Transposed)?;
    let forward = if enabled(CheckKind::Duality) || enabled(CheckKind::L2) {
        Some(session.kernel(&op, Orientation::Forward)?)
    } else {
        None
    };
    let constants = &session.constants;
    let m = cfg.checks.cutoff_m.unwrap_or_else(|| ((cfg.largest_radius() / 2.0).floor() as u32).max(1));

    let mut rows = Vec::new();
    for kind in CheckKind::ALL.into_iter().filter(|k| enabled(*k)) {
        log::info!("running check {}", kind.name());
        match kind {
            CheckKind::Nash => rows.push(checks::check_nash_bound(&kernel, constants, cfg.checks.nash_tolerance)),
            CheckKind::Mass => rows.extend(checks::check_mass(&kernel, &session.floors)),
            CheckKind::Positivity => rows.push(checks::check_positivity(&op, &kernel, opts.dt)),
            CheckKind::ChapmanKolmogorov => {
                for &(t, s) in &cfg.checks.ck_pairs {
                    rows.push(checks::check_chapman_kolmogorov(&op, &sources, t, s, &opts).map_err(checks_err)?);
                }
            }
            CheckKind::Duality => {
                let fwd = forward.as_ref().expect("forward kernel computed");
                rows.extend(checks::check_duality(&session.spec, &op, &kernel, fwd, &opts).map_err(checks_err)?);
            }
            CheckKind::L2 => {
                rows.extend(checks::check_l2(&kernel, forward.as_ref().expect("forward kernel computed"), constants))
            }
            CheckKind::Gns => rows.extend(gns::check_gns(
                cfg.operator.dim,
                cfg.checks.gns_radius,
                cfg.grid.h,
                &gns::default_tests(),
                constants,
            )),
            CheckKind::Zeta => rows.push(
                checks::check_zeta(&session.spec, m, &grid, &sources, &cfg.times, &opts, constants)
                    .map_err(checks_err)?,
            ),
            CheckKind::Cutoff => rows.extend(
                checks::check_approx_kernel_domination(&session.spec, m, &grid, &cfg.sources, &cfg.times, opts.dt)
                    .map_err(checks_err)?,
            ),
            CheckKind::Holder => {
                rows.extend(checks::check_holder_chain(&op, &kernel, &opts, constants).map_err(checks_err)?)
            }
            CheckKind::Monotonicity => rows.push(
                checks::check_monotonicity(
                    &session.spec,
                    cfg.grid.h,
                    &cfg.grid.radii,
                    &cfg.sources[0],
                    &cfg.times,
                    opts.dt,
                )
                .map_err(checks_err)?,
            ),
        }
    }
    if let Some(oracle) = session.oracle_run() {
        let (mc_rows, _) = checks::check_feynman_kac(&session.spec, &op, &oracle).map_err(at(Stage::Oracle))?;
        rows.extend(mc_rows);
    }
    Ok(session.report(op.len(), rows))
}

/// Monte Carlo oracle only. Also returns the density rows for output.
pub fn run_oracle(config: RunConfig, overrides: &Overrides) -> Result<(BoundReport, Vec<DensityRow>), HarnessError> {
    let session = Session::prepare(config, overrides)?;
    let Some(oracle) = session.oracle_run() else {
        return Err(HarnessError::Stage { stage: Stage::Config, message: "the config has no [mc] section".into() });
    };
    if !session.valid() {
        return Ok((session.report(0, Vec::new()), Vec::new()));
    }
    let grid = session.grid()?;
    let op = session.operator(grid.clone())?;
    let (rows, estimate) = checks::check_feynman_kac(&session.spec, &op, &oracle).map_err(at(Stage::Oracle))?;
    let density = (0..grid.len())
        .filter(|&i| estimate.values[i] > 0.0)
        .map(|i| DensityRow { point: grid.point(i), value: estimate.values[i], std_error: estimate.std_errors[i] })
        .collect();
    Ok((session.report(op.len(), rows), density))
}

#[derive(Debug, Clone)]
pub struct DensityRow {
    pub point: Vec<f64>,
    pub value: f64,
    pub std_error: f64,
}

pub fn write_density_csv(rows: &[DensityRow], path: &Path) -> Result<(), HarnessError> {
    use std::io::Write;
    let mut w = BufWriter::new(File::create(path).map_err(at(Stage::Output))?);
    let dim = rows.first().map_or(0, |r| r.point.len());
    let header: Vec<String> = (1..=dim).map(|i| format!("y{i}")).chain(["density".into(), "std_error".into()]).collect();
    writeln!(w, "{}", header.join(",")).map_err(at(Stage::Output))?;
    for r in rows {
        let coords: Vec<String> = r.point.iter().map(|c| c.to_string()).collect();
        writeln!(w, "{},{:e},{:e}", coords.join(","), r.value, r.std_error).map_err(at(Stage::Output))?;
    }
    w.flush().map_err(at(Stage::Output))
}

/// Writes `report.json` and `report.csv` into `dir`.
pub fn write_report(report: &BoundReport, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(at(Stage::Output))?;
    let json = File::create(dir.join("report.json")).map_err(at(Stage::Output))?;
    report.write_json(BufWriter::new(json)).map_err(at(Stage::Output))?;
    let csv = File::create(dir.join("report.csv")).map_err(at(Stage::Output))?;
    report.write_csv(BufWriter::new(csv)).map_err(at(Stage::Output))
}

/// Writes `kernel.bin` and `kernel.csv` into `dir`.
pub fn write_kernel(kernel: &KernelMatrix, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(at(Stage::Output))?;
    let bin = File::create(dir.join("kernel.bin")).map_err(at(Stage::Output))?;
    kernel.write_binary(BufWriter::new(bin)).map_err(at(Stage::Output))?;
    let csv = File::create(dir.join("kernel.csv")).map_err(at(Stage::Output))?;
    kernel.write_csv(BufWriter::new(csv)).map_err(at(Stage::Output))
}

pub fn exit_code(report: &BoundReport) -> i32 {
    if report.passed {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAIL
    }
}
