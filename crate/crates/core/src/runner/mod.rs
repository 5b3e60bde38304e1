//! Run orchestration: setup from a [`RunConfig`], the mode registry, and
//! the artifacts every run leaves on disk.
//!
//! A run directory holds
//!
//! - `diagnostics.csv`, one row per step,
//! - `profiles.csv`, the spatial fields every `output_stride` steps,
//! - `snapshots/step_NNNNNN.bin` when snapshots are enabled,
//! - mode-specific tables,
//! - `manifest.toml`, written last, also on abort.

mod modes;
mod plot;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub use modes::{
    cross_refinement_error, ConvergenceRow, ConvergenceStudy, CrossValidate, Full, ModeRegistry, OrbitAudit,
    OrbitAuditResult, RunMode, Vp1d,
};
pub use plot::{emit_plot_data, PLOT_DIR};

use crate::background::{Background, NEUTRALITY_TOLERANCE};
use crate::characteristics::{LATTICE_POINTS, SPACING_TOLERANCE};
use crate::config::RunConfig;
use crate::diagnostics::{csv_header, csv_row, record, DiagnosticsConfig, DiagnosticsRecord};
use crate::distribution::DistributionFunction;
use crate::error::{Error, ExitKind, Result};
use crate::fields::{init_e1_from_gauss, FieldState, ALIGNMENT_TOLERANCE, GAUSS_END_TOLERANCE};
use crate::moments::compute_moments_with;
use crate::profile::{Profile, ProfileRegistry};
use crate::snapshot;
use crate::solver::{step_strang, SolverConfig};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const PROFILES_FILE: &str = "profiles.csv";
pub const PROFILES_HEADER: &str = "time,x,rho,E1,E2,B,A";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Everything a run needs at `t = 0`.
#[derive(Debug)]
pub struct Simulation {
    pub profile: Box<dyn Profile>,
    pub f0: DistributionFunction,
    pub background: Background,
    pub fields0: FieldState,
    pub solver: SolverConfig,
    pub diagnostics: DiagnosticsConfig,
    pub steps: usize,
}

impl Simulation {
    pub fn prepare(cfg: &RunConfig, profiles: &ProfileRegistry) -> Result<Self> {
        cfg.validate(profiles)?;
        let grid = cfg.grid.build()?;
        let profile = cfg.profile.build(profiles)?;
        let f0 = crate::distribution::sample_initial_distribution(profile.as_ref(), grid)?;
        let background = Background::build(&cfg.background, &f0, cfg.neutralize)?;
        let m = compute_moments_with(&f0, &background, cfg.relativistic)?;
        let e1 = init_e1_from_gauss(grid.x, &m.rho)?;
        let sample =
            |b: &Option<crate::fields::FieldBump>| b.map_or_else(|| vec![0.0; grid.x.len()], |b| b.sample(grid.x));
        let e2 = sample(&cfg.fields.e2);
        let b = sample(&cfg.fields.b);
        if [&e2, &b].iter().any(|v| v[0] != 0.0 || v[v.len() - 1] != 0.0) {
            return Err(Error::SupportBoundary(
                "initial E2 or B does not vanish at the box edges".into(),
            ));
        }
        let fields0 = FieldState::from_components(grid.x, e1, &e2, &b, 0.0)?;
        let max = f0.max_value();
        let solver = cfg.solver_config(&grid, if max > 0.0 { max } else { 1.0 });
        let diagnostics = DiagnosticsConfig {
            epsilons: cfg.epsilons.clone(),
            support_threshold: solver.support_threshold(),
            relativistic: cfg.relativistic,
        };
        let steps = cfg.steps(solver.dt);
        Ok(Self {
            profile,
            f0,
            background,
            fields0,
            solver,
            diagnostics,
            steps,
        })
    }

    pub fn record(&self, f: &DistributionFunction, fields: &FieldState) -> DiagnosticsRecord {
        record(f, fields, &self.background, &self.diagnostics)
    }
}

/// Output directory plus what the mode reports back for the manifest.
#[derive(Debug)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub summary: toml::Table,
    pub steps_completed: usize,
    pub time_reached: f64,
}

impl RunContext {
    pub fn new(out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            summary: toml::Table::new(),
            steps_completed: 0,
            time_reached: 0.0,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    pub fn put(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.summary.insert(key.to_string(), value.into());
    }
}

/// Per-step diagnostics, stride-wise profiles and snapshots of one
/// trajectory.
pub struct Recorder {
    diagnostics: BufWriter<File>,
    profiles: Option<BufWriter<File>>,
    snapshots: Option<PathBuf>,
    stride: usize,
    pub records: Vec<DiagnosticsRecord>,
}

impl Recorder {
    /// Writes to `diagnostics_name`; profiles and snapshots only when
    /// `artifacts` is set.
    pub fn new(ctx: &RunContext, cfg: &RunConfig, diagnostics_name: &str, artifacts: bool) -> Result<Self> {
        let mut diagnostics = ctx.create(diagnostics_name)?;
        writeln!(diagnostics, "{}", csv_header(&cfg.epsilons))?;
        let profiles = if artifacts {
            let mut p = ctx.create(PROFILES_FILE)?;
            writeln!(p, "{PROFILES_HEADER}")?;
            Some(p)
        } else {
            None
        };
        let snapshots = if artifacts && cfg.snapshots {
            let dir = ctx.path(SNAPSHOT_DIR);
            std::fs::create_dir_all(&dir)?;
            Some(dir)
        } else {
            None
        };
        Ok(Self {
            diagnostics,
            profiles,
            snapshots,
            stride: cfg.output_stride,
            records: Vec::new(),
        })
    }

    pub fn observe(
        &mut self,
        sim: &Simulation,
        step: usize,
        f: &DistributionFunction,
        fields: &FieldState,
    ) -> Result<()> {
        let r = sim.record(f, fields);
        writeln!(self.diagnostics, "{}", csv_row(&r))?;
        self.records.push(r);
        if step.is_multiple_of(self.stride) || step == sim.steps {
            if let Some(p) = &mut self.profiles {
                let m = compute_moments_with(f, &sim.background, sim.solver.relativistic)?;
                let mut block = String::new();
                for (i, x) in fields.axis.nodes().iter().enumerate() {
                    writeln!(
                        block,
                        "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                        f.time, x, m.rho[i], fields.e1[i], fields.e2[i], fields.b[i], fields.a[i]
                    )
                    .unwrap();
                }
                p.write_all(block.as_bytes())?;
            }
            if let Some(dir) = &self.snapshots {
                snapshot::save(&dir.join(format!("step_{step:06}.bin")), f, Some(fields))?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<Vec<DiagnosticsRecord>> {
        self.diagnostics.flush()?;
        if let Some(p) = &mut self.profiles {
            p.flush()?;
        }
        Ok(self.records)
    }
}

/// Steps the full system from `t = 0`, recording every step and handing
/// each new field state to `on_step`.
pub fn integrate_full(
    sim: &Simulation,
    ctx: &mut RunContext,
    recorder: &mut Recorder,
    mut on_step: impl FnMut(&DistributionFunction, &FieldState) -> Result<()>,
) -> Result<(DistributionFunction, FieldState)> {
    let mut f = sim.f0.clone();
    let mut fields = sim.fields0.clone();
    recorder.observe(sim, 0, &f, &fields)?;
    for n in 1..=sim.steps {
        let out = step_strang(&f, &fields, &sim.background, &sim.solver)?;
        if out.clamp.clamped_nodes > 0 {
            log::debug!("step {n}: clamped {} nodes", out.clamp.clamped_nodes);
        }
        if n.is_multiple_of(recorder.stride) {
            log::info!("step {n}/{} t = {:.4}", sim.steps, out.f.time);
        }
        f = out.f;
        fields = out.fields;
        ctx.steps_completed = n;
        ctx.time_reached = f.time;
        recorder.observe(sim, n, &f, &fields)?;
        on_step(&f, &fields)?;
    }
    Ok((f, fields))
}

/// Conservation summary of one trajectory.
pub fn summarize(records: &[DiagnosticsRecord], summary: &mut toml::Table) {
    let q0 = records.first().map_or(0.0, |r| r.total_charge);
    let scale = if q0 != 0.0 { q0.abs() } else { 1.0 };
    let charge_drift = records
        .iter()
        .map(|r| (r.total_charge - q0).abs() / scale)
        .fold(0.0, f64::max);
    let fold = |f: fn(&DiagnosticsRecord) -> f64| records.iter().map(f).fold(0.0, f64::max);
    summary.insert("energy_drift".into(), crate::diagnostics::energy_drift(records).into());
    summary.insert("charge_drift".into(), charge_drift.into());
    summary.insert("max_sym_error".into(), fold(|r| r.sym_error).into());
    summary.insert("max_gauss_residual".into(), fold(|r| r.gauss_residual).into());
    let gap = records.iter().map(|r| r.min_v1_gap).fold(f64::INFINITY, f64::min);
    if gap.is_finite() {
        summary.insert("min_v1_gap".into(), gap.into());
    }
}

/// Outcome written to the manifest.
#[derive(Debug)]
pub struct RunReport {
    pub summary: toml::Table,
    pub steps_completed: usize,
    pub manifest: PathBuf,
}

/// Validates `cfg`, runs its mode in `out_dir` and writes the manifest.
///
/// On failure the manifest still records the status, reason and exit code
/// before the error is returned.
pub fn run(cfg: &RunConfig, out_dir: &Path, profiles: &ProfileRegistry, modes: &ModeRegistry) -> Result<RunReport> {
    let mut ctx = RunContext::new(out_dir)?;
    let result = modes.get(&cfg.mode).and_then(|mode| {
        mode.check(cfg)?;
        let sim = Simulation::prepare(cfg, profiles)?;
        mode.execute(cfg, &sim, profiles, &mut ctx)
    });
    let manifest = ctx.path(MANIFEST_FILE);
    std::fs::write(&manifest, manifest_text(cfg, &ctx, result.as_ref().err()))?;
    result.map(|()| RunReport {
        summary: ctx.summary,
        steps_completed: ctx.steps_completed,
        manifest,
    })
}

/// Checks a configuration the way [`run`] would, without stepping.
pub fn validate(cfg: &RunConfig, profiles: &ProfileRegistry, modes: &ModeRegistry) -> Result<Simulation> {
    modes.get(&cfg.mode)?.check(cfg)?;
    Simulation::prepare(cfg, profiles)
}

/// Fixed numerical constants, recorded alongside the configured tolerances.
pub fn constants() -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("time_step".into(), "dt = dx".into());
    t.insert("advection".into(), "natural cubic spline, zero outside the box".into());
    t.insert(
        "splitting".into(),
        "Strang: x/2, velocity (v1/2, v2, v1/2 when B != 0), x/2".into(),
    );
    t.insert("field_update".into(), "light-cone transport of E2 +- B".into());
    t.insert(
        "mid_step_current".into(),
        "average of pre- and post-kick currents".into(),
    );
    t.insert("e1_anchor".into(), "E1(x_min) = 0".into());
    t.insert(
        "energy".into(),
        "sum |v|^2 f + sum (E1^2 + E2^2 + B^2), no factor 1/2".into(),
    );
    t.insert("alignment_tolerance".into(), ALIGNMENT_TOLERANCE.into());
    t.insert("gauss_end_tolerance".into(), GAUSS_END_TOLERANCE.into());
    t.insert("neutrality_tolerance".into(), NEUTRALITY_TOLERANCE.into());
    t.insert("history_spacing_tolerance".into(), SPACING_TOLERANCE.into());
    t.insert("orbit_integrator".into(), "RK4, step dt/2".into());
    t.insert("default_lattice_points".into(), (LATTICE_POINTS as i64).into());
    t
}

fn manifest_text(cfg: &RunConfig, ctx: &RunContext, err: Option<&Error>) -> String {
    let kind = err.map_or(ExitKind::Ok, Error::exit_kind);
    let mut run = toml::Table::new();
    run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    run.insert("status".into(), if err.is_some() { "aborted" } else { "ok" }.into());
    run.insert("exit_code".into(), i64::from(kind.code()).into());
    if let Some(e) = err {
        run.insert("reason".into(), e.reason().into());
        run.insert("message".into(), e.to_string().into());
    }
    run.insert("steps_completed".into(), (ctx.steps_completed as i64).into());
    run.insert("time_reached".into(), ctx.time_reached.into());
    let mut doc = toml::Table::new();
    doc.insert("run".into(), run.into());
    doc.insert("constants".into(), constants().into());
    doc.insert("summary".into(), ctx.summary.clone().into());
    let config: toml::Value = toml::Value::try_from(cfg).expect("config serializes");
    doc.insert("config".into(), config);
    toml::to_string(&doc).expect("manifest serializes")
}
