//! Command pipelines. Every command computes all of its tables in memory and
//! only then hands them to [`write_output`], so a failing run leaves nothing
//! on disk.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::apparatus::ApparatusConfig;
use crate::config::{Format, RunConfig};
use crate::detector::{
    error_scaling, gridded_from_counts, invert_plane, reconstruct_from_counts, simulate_all, DetectorModel, Exposure,
    PlaneCounts,
};
use crate::disturbance::{EraserMixture, PairingMode};
use crate::error::{Error, Result};
use crate::fringe::{fringe_grid, pattern, visibility_extrema, visibility_theoretical};
use crate::study::{all_planes, drawdown, largest_drop, launch, plane_disturbance, tradeoff, EnsemblePair};
use crate::trajectory::{final_position_deviation, seed, Scheme, TrajectoryEnsemble, VelocityField};
use crate::wavefield::WaveField;

pub const UNITS: &str = "x mm, z m, p hbar/d, v as v/c, P(p) d/hbar, intensity 1/mm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Field,
    Trajectories,
    Disturbance,
    Tradeoff,
    DetectorSim,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Field => "field",
            Command::Trajectories => "trajectories",
            Command::Disturbance => "disturbance",
            Command::Tradeoff => "tradeoff",
            Command::DetectorSim => "detector-sim",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Missing,
}

impl Cell {
    fn float(v: f64) -> Cell {
        if v.is_finite() {
            Cell::Float(v)
        } else {
            Cell::Missing
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::float)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<String>,
}

impl Table {
    fn new(name: &str, columns: &[&'static str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Numeric values of one column; text and missing cells become NaN.
    pub fn floats(&self, name: &str) -> Vec<f64> {
        let k = self.column(name).unwrap_or_else(|| panic!("no column {name} in {}", self.name));
        self.rows
            .iter()
            .map(|r| match r[k] {
                Cell::Int(v) => v as f64,
                Cell::Float(v) => v,
                _ => f64::NAN,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub command: Command,
    pub config_hash: String,
    pub seed: u64,
    pub tables: Vec<Table>,
}

impl Output {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    fn header(&self, table: &Table) -> Vec<String> {
        let mut lines = vec![
            format!("whichway {} / {}", self.command.name(), table.name),
            format!("config_sha256: {}", self.config_hash),
            format!("units: {UNITS}"),
            format!("seed: {}", self.seed),
        ];
        lines.extend(table.notes.iter().map(|n| format!("note: {n}")));
        lines
    }

    pub fn render(&self, table: &Table, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = String::new();
                for line in self.header(table) {
                    let _ = writeln!(out, "# {line}");
                }
                let _ = writeln!(out, "{}", table.columns.join(","));
                for row in &table.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    let _ = writeln!(out, "{}", cells.join(","));
                }
                out
            }
            Format::Json => {
                let rows: Vec<Value> = table
                    .rows
                    .iter()
                    .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
                    .collect();
                let doc = json!({
                    "command": self.command.name(),
                    "table": table.name,
                    "config_sha256": self.config_hash,
                    "units": UNITS,
                    "seed": self.seed,
                    "notes": table.notes,
                    "columns": table.columns,
                    "rows": rows,
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("json renders");
                s.push('\n');
                s
            }
        }
    }
}

/// Writes every table of `output` into `dir` as `<table>.csv` or `.json`.
pub fn write_output(output: &Output, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    let rendered: Vec<(PathBuf, String)> = output
        .tables
        .iter()
        .map(|t| {
            let ext = match format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            (dir.join(format!("{}.{ext}", t.name)), output.render(t, format))
        })
        .collect();
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    for (path, text) in &rendered {
        std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(rendered.into_iter().map(|(p, _)| p).collect())
}

/// Validates `config` and runs `command` entirely in memory.
pub fn run(command: Command, config: &RunConfig) -> Result<Output> {
    config.validate()?;
    let tables = match command {
        Command::Field => cmd_field(config)?,
        Command::Trajectories => cmd_trajectories(config)?,
        Command::Disturbance => cmd_disturbance(config)?,
        Command::Tradeoff => cmd_tradeoff(config)?,
        Command::DetectorSim => cmd_detector_sim(config)?,
    };
    Ok(Output {
        command,
        config_hash: config.hash(),
        seed: config.detector.seed,
        tables,
    })
}

fn phases() -> [f64; 2] {
    [0.0, PI]
}

fn cmd_field(config: &RunConfig) -> Result<Vec<Table>> {
    let apparatus = config.apparatus.apparatus()?;
    let points = config.fringe.points;
    let mut profile = Table::new(
        "field",
        &["phi", "plane", "z_m", "x_mm", "intensity_per_mm", "probability", "p_hbar_over_d", "vc_ratio"],
    );
    let mut summary = Table::new(
        "field_summary",
        &["phi", "plane", "z_m", "sigma_mm", "normalization", "fringe_period_mm"],
    );
    for phase in phases() {
        let field = WaveField::new(apparatus.clone(), phase)?;
        let planes: Vec<(Vec<Vec<Cell>>, f64)> = apparatus
            .planes()
            .par_iter()
            .enumerate()
            .map(|(j, &z)| {
                let half = 0.5 * apparatus.slit_separation() + 6.0 * apparatus.sigma_at(z);
                let dx = 2.0 * half / (points - 1) as f64;
                let mut rows = Vec::with_capacity(points);
                let mut total = 0.0;
                for k in 0..points {
                    let x = -half + k as f64 * dx;
                    let rho = field.intensity(x, z)?;
                    total += rho * dx;
                    let sample = field.momentum(x, z).ok();
                    rows.push(vec![
                        phase.into(),
                        j.into(),
                        z.into(),
                        (x * 1e3).into(),
                        (rho * 1e-3).into(),
                        (rho * dx).into(),
                        sample.map(|s| s.p).into(),
                        sample.map(|s| s.v_over_c).into(),
                    ]);
                }
                Ok((rows, total))
            })
            .collect::<Result<_>>()?;
        for (j, (rows, total)) in planes.into_iter().enumerate() {
            let z = apparatus.planes()[j];
            profile.rows.extend(rows);
            summary.push(vec![
                phase.into(),
                j.into(),
                z.into(),
                (apparatus.sigma_at(z) * 1e3).into(),
                total.into(),
                (apparatus.fringe_period(z) * 1e3).into(),
            ]);
        }
    }
    Ok(vec![profile, summary])
}

fn trajectory_rows(table: &mut Table, ensemble: &TrajectoryEnsemble, apparatus: &ApparatusConfig) {
    let phase = ensemble.phase();
    for i in 0..ensemble.len() {
        for (j, &z) in ensemble.planes().iter().enumerate() {
            let p = ensemble.momentum(i, j);
            table.push(vec![
                i.into(),
                phase.into(),
                z.into(),
                (ensemble.position(i, j) * 1e3).into(),
                p.into(),
                apparatus.momentum_to_velocity_ratio(p).into(),
            ]);
        }
    }
}

fn scheme_label(scheme: Scheme) -> String {
    match scheme {
        Scheme::PaperEuler => "paper-euler".into(),
        Scheme::Refined(k) => format!("refined-{k}"),
    }
}

fn cmd_trajectories(config: &RunConfig) -> Result<Vec<Table>> {
    let apparatus = config.apparatus.apparatus()?;
    let scheme = config.trajectory.scheme();
    let other = match scheme {
        Scheme::PaperEuler => config.trajectory.refined(),
        Scheme::Refined(_) => Scheme::PaperEuler,
    };
    let n = config.trajectory.n_per_slit;
    let pair = launch(&apparatus, n, scheme)?;
    let check = launch(&apparatus, n, other)?;
    let mut paths = Table::new(
        "trajectories",
        &["seed_index", "phi", "z_m", "x_mm", "p_hbar_over_d", "vc_ratio"],
    );
    let mut report = Table::new(
        "trajectory_report",
        &["phi", "scheme", "compared_with", "max_final_deviation_over_d", "crossing_violations", "skipped"],
    );
    for (ensemble, reference) in [(&pair.zero, &check.zero), (&pair.pi, &check.pi)] {
        trajectory_rows(&mut paths, ensemble, &apparatus);
        for &(seed, plane) in ensemble.skipped() {
            paths
                .notes
                .push(format!("phi = {}: seed {seed} stopped at a node before plane {plane}", ensemble.phase()));
        }
        report.push(vec![
            ensemble.phase().into(),
            Cell::Text(scheme_label(scheme)),
            Cell::Text(scheme_label(other)),
            (final_position_deviation(ensemble, reference) / apparatus.slit_separation()).into(),
            ensemble.crossing_violations().into(),
            ensemble.skipped().len().into(),
        ]);
    }
    Ok(vec![paths, report])
}

fn reference_field(config: &RunConfig, apparatus: &ApparatusConfig) -> Result<Option<WaveField>> {
    Ok(match config.disturbance.pairing {
        PairingMode::SamePoint => Some(WaveField::new(apparatus.clone(), 0.0)?),
        PairingMode::PairedTrajectory => None,
    })
}

fn disturbance_tables(
    config: &RunConfig,
    pair: &EnsemblePair,
    reference: Option<&dyn VelocityField>,
    prefix: &str,
) -> Result<Vec<Table>> {
    let kernel = config.disturbance.kernel();
    let mixture = EraserMixture::new(config.disturbance.eta0)?;
    let planes = all_planes(pair, &kernel, reference)?;
    let mut density = Table::new(
        &format!("{prefix}_density"),
        &["plane", "z_m", "p_hbar_over_d", "p_zero", "p_pi", "p_mix"],
    );
    let mut curve = Table::new(
        &format!("{prefix}_curve"),
        &["plane", "z_m", "mean_abs_zero", "mean_abs_pi", "mean_abs_mix", "integral_pi", "integral_mix"],
    );
    let mut mix_curve = Vec::with_capacity(planes.len());
    for d in &planes {
        let mixed = d.mixed(mixture)?;
        for k in 0..mixed.grid().len() {
            density.push(vec![
                d.plane.into(),
                d.z.into(),
                mixed.grid().point(k).into(),
                d.zero.value_at(k).into(),
                d.pi.value_at(k).into(),
                mixed.value_at(k).into(),
            ]);
        }
        let m = crate::disturbance::mean_abs(&mixed);
        mix_curve.push(m);
        curve.push(vec![
            d.plane.into(),
            d.z.into(),
            crate::disturbance::mean_abs(&d.zero).into(),
            crate::disturbance::mean_abs(&d.pi).into(),
            m.into(),
            d.pi.integral().into(),
            mixed.integral().into(),
        ]);
    }
    density.notes.push(format!(
        "eta0 = {}, kernel sigma = {} hbar/d, pairing = {:?}",
        mixture.eta0(),
        kernel.sigma,
        kernel.pairing
    ));
    curve.notes.push(format!("mixture eta0 = {}", mixture.eta0()));
    curve.notes.push(format!("largest single-plane drop = {:.6} hbar/d", largest_drop(&mix_curve)));
    curve.notes.push(format!("drawdown from running maximum = {:.6} hbar/d", drawdown(&mix_curve)));
    let last = planes.last().expect("at least two planes");
    let mut peaks = Table::new(&format!("{prefix}_peaks"), &["z_m", "p_hbar_over_d", "height", "prominence"]);
    for peak in last.dominant_pi_peaks(config.disturbance.dominant_fraction) {
        peaks.push(vec![last.z.into(), peak.momentum.into(), peak.height.into(), peak.prominence.into()]);
    }
    peaks
        .notes
        .push(format!("P^pi peaks with prominence >= {} of the largest", config.disturbance.dominant_fraction));
    Ok(vec![density, curve, peaks])
}

fn cmd_disturbance(config: &RunConfig) -> Result<Vec<Table>> {
    let apparatus = config.apparatus.apparatus()?;
    let pair = launch(&apparatus, config.trajectory.n_per_slit, config.trajectory.scheme())?;
    let reference = reference_field(config, &apparatus)?;
    disturbance_tables(config, &pair, reference.as_ref().map(|f| f as &dyn VelocityField), "disturbance")
}

struct Regime {
    label: &'static str,
    apparatus: ApparatusConfig,
    scheme: Scheme,
}

fn cmd_tradeoff(config: &RunConfig) -> Result<Vec<Table>> {
    let regimes = [
        Regime {
            label: "last-plane",
            apparatus: config.apparatus.apparatus()?,
            scheme: config.trajectory.scheme(),
        },
        Regime {
            label: "extended",
            apparatus: config.apparatus.extended()?,
            scheme: config.trajectory.refined(),
        },
    ];
    let mut sweep = Table::new(
        "tradeoff",
        &[
            "regime",
            "z_m",
            "V",
            "eta0",
            "mean_abs",
            "mean_abs_minus_bias",
            "bound",
            "margin",
            "V_extrema",
            "V_theoretical",
            "V_confident",
        ],
    );
    let mut fringes = Table::new("fringe", &["regime", "z_m", "V", "eta0", "x_mm", "intensity_per_mm"]);
    let kernel = config.disturbance.kernel();
    let visibilities = &config.tradeoff.visibilities;
    for regime in &regimes {
        let apparatus = &regime.apparatus;
        let pair = launch(apparatus, config.trajectory.n_per_slit, regime.scheme)?;
        let reference = reference_field(config, apparatus)?;
        let last = pair.planes().len() - 1;
        let z = pair.planes()[last];
        let d = plane_disturbance(&pair, last, &kernel, reference.as_ref().map(|f| f as &dyn VelocityField))?;
        let points = tradeoff(&d, visibilities)?;
        let xs = fringe_grid(apparatus, z, config.fringe.half_width_periods, config.fringe.points)?;
        let measured: Vec<_> = points
            .par_iter()
            .map(|p| {
                let mixture = EraserMixture::new(p.eta0)?;
                let pat = pattern(z, mixture, apparatus, &xs)?;
                let ext = visibility_extrema(&pat)?;
                let theory = visibility_theoretical(mixture, z, apparatus, config.fringe.half_width_periods)?;
                Ok((pat, ext, theory))
            })
            .collect::<Result<_>>()?;
        for (p, (pat, ext, theory)) in points.iter().zip(measured) {
            sweep.push(vec![
                regime.label.into(),
                z.into(),
                p.visibility.into(),
                p.eta0.into(),
                p.mean_abs.into(),
                p.bias_noted.into(),
                p.bound.into(),
                p.margin().into(),
                ext.value.into(),
                theory.value.into(),
                Cell::Text(ext.confident.to_string()),
            ]);
            for (&x, &i) in pat.xs().iter().zip(pat.intensity()) {
                fringes.push(vec![
                    regime.label.into(),
                    z.into(),
                    p.visibility.into(),
                    p.eta0.into(),
                    (x * 1e3).into(),
                    (i * 1e-3).into(),
                ]);
            }
        }
        sweep.notes.push(format!("{}: z = {z} m, scheme {}", regime.label, scheme_label(regime.scheme)));
    }
    sweep
        .notes
        .push(format!("bound = (2/pi)(1 - V); bias = {} sqrt(2/pi) eta0", kernel.sigma));
    Ok(vec![sweep, fringes])
}

fn count_rows(table: &mut Table, counts: &[PlaneCounts], model: &DetectorModel, phase: f64) {
    for plane in counts {
        let p = invert_plane(plane, model);
        for (k, &x) in model.pixels().iter().enumerate() {
            table.push(vec![
                phase.into(),
                plane.plane.into(),
                k.into(),
                (x * 1e3).into(),
                plane.right[k].into(),
                plane.left[k].into(),
                p[k].into(),
            ]);
        }
    }
}

fn cmd_detector_sim(config: &RunConfig) -> Result<Vec<Table>> {
    let apparatus = config.apparatus.apparatus()?;
    let even = WaveField::new(apparatus.clone(), 0.0)?;
    let odd = WaveField::new(apparatus.clone(), PI)?;
    let model = DetectorModel::new(config.detector.settings(), &[&even, &odd])?;
    let exposure = if config.detector.noiseless {
        Exposure::Noiseless
    } else {
        Exposure::ShotNoise
    };
    let counts_zero = simulate_all(&even, &model, exposure)?;
    let counts_pi = simulate_all(&odd, &model, exposure)?;
    let seeds = seed(&apparatus, config.trajectory.n_per_slit)?;
    let pair = EnsemblePair {
        zero: reconstruct_from_counts(&counts_zero, &model, &seeds, 0.0)?,
        pi: reconstruct_from_counts(&counts_pi, &model, &seeds, PI)?,
    };
    let gridded = gridded_from_counts(&counts_zero, &model, 0.0)?;
    let reference = match config.disturbance.pairing {
        PairingMode::SamePoint => Some(&gridded as &dyn VelocityField),
        PairingMode::PairedTrajectory => None,
    };

    let mut counts = Table::new("detector_counts", &["phi", "plane", "pixel_index", "x_mm", "N_R", "N_L", "p_hat"]);
    count_rows(&mut counts, &counts_zero, &model, 0.0);
    count_rows(&mut counts, &counts_pi, &model, PI);
    counts.notes.push(format!(
        "{exposure:?}, exposure {} counts at the brightest pixel, coupling {}",
        config.detector.exposure, config.detector.coupling
    ));
    if let Some(w) = gridded.aliasing_warning() {
        counts.notes.push(format!("aliasing: {w}"));
    }

    let mut tables = vec![counts];
    let mut noisy = disturbance_tables(config, &pair, reference, "detector")?;
    let kernel = config.disturbance.kernel();
    let last = pair.planes().len() - 1;
    let d = plane_disturbance(&pair, last, &kernel, reference)?;
    let mut sweep = Table::new("detector_tradeoff", &["z_m", "V", "eta0", "mean_abs", "bound", "margin"]);
    for p in tradeoff(&d, &config.tradeoff.visibilities)? {
        sweep.push(vec![
            d.z.into(),
            p.visibility.into(),
            p.eta0.into(),
            p.mean_abs.into(),
            p.bound.into(),
            p.margin().into(),
        ]);
    }
    let mut scaling = Table::new(
        "detector_scaling",
        &["expected_counts", "repetitions", "p_true", "mean_estimate", "standard_error", "error_times_sqrt_counts"],
    );
    let rows = error_scaling(
        &model,
        config.detector.scaling_velocity_ratio,
        &config.detector.scaling_counts,
        config.detector.scaling_repetitions,
        config.detector.seed,
    )?;
    for r in rows {
        scaling.push(vec![
            r.expected_counts.into(),
            r.repetitions.into(),
            r.true_momentum.into(),
            r.mean_estimate.into(),
            r.standard_error.into(),
            (r.standard_error * r.expected_counts.sqrt()).into(),
        ]);
    }
    scaling
        .notes
        .push(format!("single pixel at v/c = {}", config.detector.scaling_velocity_ratio));
    tables.append(&mut noisy);
    tables.push(sweep);
    tables.push(scaling);
    Ok(tables)
}
