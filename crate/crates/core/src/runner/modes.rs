use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use super::{integrate_full, summarize, Recorder, RunContext, Simulation, DIAGNOSTICS_FILE};
use crate::characteristics::{
    max_v2a_drift, min_distance_to_light_speed, moc_residual, orbit_lattice, significant_nodes, trace_orbit,
    write_orbit_csv, CharacteristicState, FieldHistory,
};
use crate::config::RunConfig;
use crate::distribution::DistributionFunction;
use crate::error::{Error, Result};
use crate::fields::max_abs;
use crate::profile::ProfileRegistry;
use crate::reduction::{cross_validate_observed, require_symmetric, step_vp, VPState};

/// One way of driving a run. Modes are looked up by name in a
/// [`ModeRegistry`].
pub trait RunMode: Send + Sync {
    fn name(&self) -> &'static str;

    fn describe(&self) -> &'static str;

    /// Mode-specific checks that need no stepping.
    fn check(&self, _cfg: &RunConfig) -> Result<()> {
        Ok(())
    }

    fn execute(
        &self,
        cfg: &RunConfig,
        sim: &Simulation,
        profiles: &ProfileRegistry,
        ctx: &mut RunContext,
    ) -> Result<()>;
}

pub struct ModeRegistry {
    modes: BTreeMap<&'static str, Box<dyn RunMode>>,
}

impl ModeRegistry {
    pub fn empty() -> Self {
        Self { modes: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Full));
        r.register(Box::new(Vp1d));
        r.register(Box::new(CrossValidate));
        r.register(Box::new(OrbitAudit));
        r.register(Box::new(ConvergenceStudy));
        r
    }

    pub fn register(&mut self, mode: Box<dyn RunMode>) {
        self.modes.insert(mode.name(), mode);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.modes.keys().copied()
    }

    pub fn get(&self, name: &str) -> Result<&dyn RunMode> {
        self.modes.get(name).map(|m| m.as_ref()).ok_or_else(|| {
            Error::UnknownMode(format!(
                "{name} (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })
    }
}

impl Default for ModeRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// The coupled Vlasov-Maxwell system.
pub struct Full;

impl RunMode for Full {
    fn name(&self) -> &'static str {
        "full"
    }

    fn describe(&self) -> &'static str {
        "full Vlasov-Maxwell run with per-step diagnostics"
    }

    fn execute(&self, cfg: &RunConfig, sim: &Simulation, _: &ProfileRegistry, ctx: &mut RunContext) -> Result<()> {
        let mut rec = Recorder::new(ctx, cfg, DIAGNOSTICS_FILE, true)?;
        let mut transverse = 0.0f64;
        integrate_full(sim, ctx, &mut rec, |_, fields| {
            transverse = transverse.max(fields.max_transverse());
            Ok(())
        })?;
        let records = rec.finish()?;
        summarize(&records, &mut ctx.summary);
        ctx.put("max_transverse", transverse);
        Ok(())
    }
}

/// The electrostatic reduction for `v2`-even data.
pub struct Vp1d;

impl RunMode for Vp1d {
    fn name(&self) -> &'static str {
        "vp1d"
    }

    fn describe(&self) -> &'static str {
        "reduced Vlasov-Poisson run (requires v2-even data and E2 = B = 0)"
    }

    fn execute(&self, cfg: &RunConfig, sim: &Simulation, _: &ProfileRegistry, ctx: &mut RunContext) -> Result<()> {
        require_symmetric(&sim.f0, &sim.fields0)?;
        let mut rec = Recorder::new(ctx, cfg, DIAGNOSTICS_FILE, true)?;
        let mut state = VPState::new(sim.f0.clone(), &sim.background, cfg.relativistic)?;
        rec.observe(sim, 0, &state.f, &state.field_state())?;
        let mut ampere = 0.0f64;
        for n in 1..=sim.steps {
            state = step_vp(&state, &sim.background, &sim.solver)?;
            ctx.steps_completed = n;
            ctx.time_reached = state.time;
            ampere = ampere.max(state.ampere_drift());
            rec.observe(sim, n, &state.f, &state.field_state())?;
        }
        let records = rec.finish()?;
        summarize(&records, &mut ctx.summary);
        ctx.put("max_ampere_drift", ampere);
        Ok(())
    }
}

pub const CROSS_VALIDATION_FILE: &str = "cross_validation.csv";

/// Full and reduced solver side by side.
pub struct CrossValidate;

impl RunMode for CrossValidate {
    fn name(&self) -> &'static str {
        "cross-validate"
    }

    fn describe(&self) -> &'static str {
        "full and reduced solvers side by side on v2-even data"
    }

    fn execute(&self, cfg: &RunConfig, sim: &Simulation, _: &ProfileRegistry, ctx: &mut RunContext) -> Result<()> {
        require_symmetric(&sim.f0, &sim.fields0)?;
        let mut rec = Recorder::new(ctx, cfg, DIAGNOSTICS_FILE, true)?;
        rec.observe(sim, 0, &sim.f0, &sim.fields0)?;
        let mut n = 0;
        let mut progress = (0, 0.0);
        let report = cross_validate_observed(
            &sim.f0,
            &sim.fields0,
            &sim.background,
            &sim.solver,
            sim.steps,
            cfg.output_stride,
            |f, fields| {
                n += 1;
                progress = (n, f.time);
                rec.observe(sim, n, f, fields)
            },
        );
        (ctx.steps_completed, ctx.time_reached) = progress;
        let report = report?;
        std::fs::write(ctx.path(CROSS_VALIDATION_FILE), report.to_csv())?;
        let records = rec.finish()?;
        summarize(&records, &mut ctx.summary);
        ctx.put("max_f_discrepancy", report.max_f());
        ctx.put("max_e1_discrepancy", report.max_e1());
        ctx.put("max_transverse", report.max_transverse());
        Ok(())
    }
}

pub const ORBIT_DIR: &str = "orbits";

/// Points sampled from the final distribution for the characteristic check.
pub const MOC_SAMPLES: usize = 400;

/// Relative level above which nodes are sampled for that check.
pub const MOC_LEVEL: f64 = 0.01;

/// Results of an orbit audit over a finished run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitAuditResult {
    pub max_v2a_drift: f64,
    pub min_light_speed_gap: f64,
    pub moc_residual: f64,
    pub orbits: usize,
}

/// Characteristic checks against the field history of a run.
pub struct OrbitAudit;

impl OrbitAudit {
    pub fn audit(
        history: &FieldHistory,
        sim: &Simulation,
        f_end: &DistributionFunction,
        lattice: usize,
    ) -> Result<OrbitAuditResult> {
        if sim.profile.is_zero() {
            return Ok(OrbitAuditResult {
                max_v2a_drift: 0.0,
                min_light_speed_gap: f64::INFINITY,
                moc_residual: 0.0,
                orbits: 0,
            });
        }
        let points = orbit_lattice(&sim.profile.support(), lattice);
        let samples = significant_nodes(f_end, MOC_LEVEL, MOC_SAMPLES);
        Ok(OrbitAuditResult {
            max_v2a_drift: max_v2a_drift(history, &points)?,
            min_light_speed_gap: min_distance_to_light_speed(history, &points)?,
            moc_residual: moc_residual(history, &samples, sim.profile.as_ref())?,
            orbits: points.len(),
        })
    }
}

impl RunMode for OrbitAudit {
    fn name(&self) -> &'static str {
        "orbit-audit"
    }

    fn describe(&self) -> &'static str {
        "full run followed by characteristic checks on an orbit lattice"
    }

    fn execute(&self, cfg: &RunConfig, sim: &Simulation, _: &ProfileRegistry, ctx: &mut RunContext) -> Result<()> {
        let mut rec = Recorder::new(ctx, cfg, DIAGNOSTICS_FILE, true)?;
        let mut history = FieldHistory::new(sim.fields0.axis, sim.fields0.time, sim.solver.dt, cfg.relativistic)?;
        history.push(&sim.fields0)?;
        let (f, _) = integrate_full(sim, ctx, &mut rec, |_, fields| history.push(fields))?;
        let records = rec.finish()?;
        summarize(&records, &mut ctx.summary);

        let result = Self::audit(&history, sim, &f, cfg.orbit.lattice)?;
        ctx.put("orbits", result.orbits as i64);
        ctx.put("max_v2a_drift", result.max_v2a_drift);
        if result.min_light_speed_gap.is_finite() {
            ctx.put("min_light_speed_gap", result.min_light_speed_gap);
        }
        ctx.put("moc_residual", result.moc_residual);

        if result.orbits > 0 && cfg.orbit.dump > 0 {
            let dir = ctx.path(ORBIT_DIR);
            std::fs::create_dir_all(&dir)?;
            let points = orbit_lattice(&sim.profile.support(), cfg.orbit.lattice);
            let (s0, s1) = history.span();
            let dump = cfg.orbit.dump.min(points.len());
            for k in 0..dump {
                let (x, v1, v2) = points[k * points.len() / dump];
                let orbit = trace_orbit(&history, CharacteristicState::new(s0, x, v1, v2), s1)?;
                let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("orbit_{k:03}.csv")))?);
                write_orbit_csv(&mut out, &orbit)?;
                out.flush()?;
            }
        }
        Ok(())
    }
}

pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const CONVERGENCE_HEADER: &str =
    "level,n_x,n_v1,n_v2,dt,steps,energy_drift,charge_drift,max_transverse,cross_refinement_error,observed_order";

/// One resolution of a convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub cells: [usize; 3],
    pub dt: f64,
    pub steps: usize,
    pub energy_drift: f64,
    pub charge_drift: f64,
    pub max_transverse: f64,
    /// `max |f_level - f_(level+1)|` on the shared nodes; absent on the
    /// finest level.
    pub cross_refinement_error: Option<f64>,
    /// `log2` of consecutive cross-refinement errors.
    pub observed_order: Option<f64>,
}

/// Runs of the same problem at successive doublings of every cell count.
pub struct ConvergenceStudy;

/// `max |coarse - fine|` over the coarse nodes, which are every second fine
/// node along each axis.
pub fn cross_refinement_error(coarse: &DistributionFunction, fine: &DistributionFunction) -> Result<f64> {
    let (c, g) = (coarse.grid, fine.grid);
    if c.refined(2) != g {
        return Err(Error::GridMismatch(
            "fine grid is not a doubling of the coarse grid".into(),
        ));
    }
    let mut err = 0.0f64;
    for i in 0..c.nx() {
        for j in 0..c.nv1() {
            for k in 0..c.nv2() {
                err = err.max((coarse.at(i, j, k) - fine.at(2 * i, 2 * j, 2 * k)).abs());
            }
        }
    }
    Ok(err)
}

impl ConvergenceStudy {
    fn level_config(cfg: &RunConfig, level: usize) -> RunConfig {
        let mut c = cfg.clone();
        c.grid = cfg.grid.refined(1 << level);
        c
    }

    /// Runs every level; the first writes the usual artifacts and the
    /// others only their diagnostics.
    pub fn study(cfg: &RunConfig, profiles: &ProfileRegistry, ctx: &mut RunContext) -> Result<Vec<ConvergenceRow>> {
        let mut rows = Vec::new();
        let mut finals: Vec<DistributionFunction> = Vec::new();
        for level in 0..cfg.convergence.levels {
            let lc = Self::level_config(cfg, level);
            let sim = Simulation::prepare(&lc, profiles)?;
            let name = if level == 0 {
                DIAGNOSTICS_FILE.to_string()
            } else {
                format!("diagnostics_level{level}.csv")
            };
            let mut rec = Recorder::new(ctx, &lc, &name, level == 0)?;
            let mut transverse = 0.0f64;
            let (f, _) = integrate_full(&sim, ctx, &mut rec, |_, fields| {
                transverse = transverse.max(max_abs(&fields.e2) + max_abs(&fields.b));
                Ok(())
            })?;
            let records = rec.finish()?;
            let mut s = toml::Table::new();
            summarize(&records, &mut s);
            let get = |k: &str| s[k].as_float().unwrap();
            rows.push(ConvergenceRow {
                cells: lc.grid.cells,
                dt: sim.solver.dt,
                steps: sim.steps,
                energy_drift: get("energy_drift"),
                charge_drift: get("charge_drift"),
                max_transverse: transverse,
                cross_refinement_error: None,
                observed_order: None,
            });
            finals.push(f);
        }
        for l in 0..rows.len() - 1 {
            rows[l].cross_refinement_error = Some(cross_refinement_error(&finals[l], &finals[l + 1])?);
        }
        for l in 1..rows.len() - 1 {
            if let (Some(a), Some(b)) = (rows[l - 1].cross_refinement_error, rows[l].cross_refinement_error) {
                rows[l].observed_order = Some((a / b).log2());
            }
        }
        Ok(rows)
    }

    pub fn table(rows: &[ConvergenceRow]) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
        let mut s = format!("{CONVERGENCE_HEADER}\n");
        for (l, r) in rows.iter().enumerate() {
            writeln!(
                s,
                "{l},{},{},{},{:e},{},{:e},{:e},{:e},{},{}",
                r.cells[0],
                r.cells[1],
                r.cells[2],
                r.dt,
                r.steps,
                r.energy_drift,
                r.charge_drift,
                r.max_transverse,
                opt(r.cross_refinement_error),
                opt(r.observed_order)
            )
            .unwrap();
        }
        s
    }
}

impl RunMode for ConvergenceStudy {
    fn name(&self) -> &'static str {
        "convergence-study"
    }

    fn describe(&self) -> &'static str {
        "the same run at successive grid doublings with observed orders"
    }

    /// Every level must stop at the same time, so `t_final` has to be a
    /// whole number of coarse steps.
    fn check(&self, cfg: &RunConfig) -> Result<()> {
        if cfg.convergence.levels < 3 {
            return Err(Error::Config("convergence-study needs at least 3 levels".into()));
        }
        let dt = cfg.grid.build()?.dx();
        let steps = cfg.t_final / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config(format!(
                "t_final = {} is not a whole number of coarse steps dt = {dt}",
                cfg.t_final
            )));
        }
        Ok(())
    }

    fn execute(&self, cfg: &RunConfig, _: &Simulation, profiles: &ProfileRegistry, ctx: &mut RunContext) -> Result<()> {
        let rows = Self::study(cfg, profiles, ctx)?;
        std::fs::write(ctx.path(CONVERGENCE_FILE), Self::table(&rows))?;
        let orders: Vec<f64> = rows.iter().filter_map(|r| r.observed_order).collect();
        let drifts: Vec<f64> = rows.iter().map(|r| r.energy_drift).collect();
        ctx.put("observed_orders", orders);
        ctx.put("energy_drifts", drifts);
        Ok(())
    }
}
