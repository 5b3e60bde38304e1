//! Vlasov–Poisson solver for `v2`-even data, with `v2` as a parameter.
//!
//! The state keeps one `(x, v1)` slice per `v2` node in the phase-grid
//! layout. A step uses the same sweeps as [`crate::solver::step_strang`]
//! with the purely electrostatic force, and takes `E1` from Gauss's law at
//! the half step and at the end of the step. An Ampère-advanced copy of `E1`
//! (with the same averaged mid-step current as the full solver) is carried
//! along as a consistency diagnostic.

use std::fmt::Write as _;

use crate::background::Background;
use crate::distribution::DistributionFunction;
use crate::error::{Error, Result};
use crate::fields::{advance_e1_ampere, check_alignment, cumulative_trapezoid, max_abs, FieldState};
use crate::moments::{compute_moments_with, velocity_moments};
use crate::solver::{advect_x, check_cfl, finish_distribution, kick, step_strang, ForceField, SolverConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct VPState {
    pub f: DistributionFunction,
    pub e1: Vec<f64>,
    /// `E1` advanced by `∂t E1 = -j1` from the same initial value.
    pub e1_ampere: Vec<f64>,
    pub time: f64,
}

impl VPState {
    pub fn new(f: DistributionFunction, b: &Background, relativistic: bool) -> Result<Self> {
        let m = compute_moments_with(&f, b, relativistic)?;
        let e1 = crate::fields::init_e1_from_gauss(f.grid.x, &m.rho)?;
        Ok(Self {
            time: f.time,
            e1_ampere: e1.clone(),
            e1,
            f,
        })
    }

    /// `max |E1_ampere - E1_gauss|`.
    pub fn ampere_drift(&self) -> f64 {
        self.e1
            .iter()
            .zip(&self.e1_ampere)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// The equivalent full-system field state (`E2 = B = 0`).
    pub fn field_state(&self) -> FieldState {
        let mut s = FieldState::zeros(self.f.grid.x);
        s.e1 = self.e1.clone();
        s.time = self.time;
        s
    }
}

pub fn step_vp(state: &VPState, b: &Background, cfg: &SolverConfig) -> Result<VPState> {
    let g = state.f.grid;
    let dt = cfg.dt;
    check_alignment(dt, g.dx())?;

    let half = advect_x(&state.f, 0.5 * dt, cfg.relativistic);
    let mid = compute_moments_with(&half, b, cfg.relativistic)?;
    let e1_mid = cumulative_trapezoid(g.dx(), &mid.rho);

    let mut force = ForceField::electrostatic(e1_mid);
    force.relativistic = cfg.relativistic;
    check_cfl(&force, &g, dt, cfg.cfl_limit)?;
    let mut accelerated = half;
    kick(&mut accelerated, &force, dt);
    let after = velocity_moments(&accelerated, cfg.relativistic);
    let j1_mid: Vec<f64> = mid.j1.iter().zip(&after).map(|(a, b)| 0.5 * (a + b.j1)).collect();
    let e1_ampere = advance_e1_ampere(&state.e1_ampere, &j1_mid, dt)?;

    let mut f = advect_x(&accelerated, 0.5 * dt, cfg.relativistic);
    f.time = state.time + dt;
    finish_distribution(&mut f, cfg)?;
    let end = compute_moments_with(&f, b, cfg.relativistic)?;
    Ok(VPState {
        e1: cumulative_trapezoid(g.dx(), &end.rho),
        e1_ampere,
        time: f.time,
        f,
    })
}

/// Fails with a symmetry error naming the first asymmetric node pair.
pub fn require_symmetric(f: &DistributionFunction, fields: &FieldState) -> Result<()> {
    if let Some((a, b)) = f.first_asymmetric_pair() {
        return Err(Error::Symmetry(format!(
            "f0 is not even in v2: f{a:?} = {:e} but f{b:?} = {:e}",
            f.at(a.0, a.1, a.2),
            f.at(b.0, b.1, b.2)
        )));
    }
    if fields.max_transverse() != 0.0 {
        return Err(Error::Symmetry("initial E2 and B must vanish".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscrepancyRow {
    pub time: f64,
    /// `max |f_full - f_vp|`
    pub f_max: f64,
    /// `∭ |f_full - f_vp|` (node sum times cell volume)
    pub f_l1: f64,
    /// `max |E1_full - E1_vp|`
    pub e1_max: f64,
    /// `max |E2| + max |B|` of the full solver.
    pub transverse: f64,
    /// Ampère drift of the reduced solver.
    pub ampere_drift: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrossValidationReport {
    pub rows: Vec<DiscrepancyRow>,
}

impl CrossValidationReport {
    pub fn max_f(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.f_max))
    }

    pub fn max_e1(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.e1_max))
    }

    pub fn max_transverse(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.transverse))
    }

    pub fn last(&self) -> Option<&DiscrepancyRow> {
        self.rows.last()
    }

    pub const CSV_HEADER: &'static str = "time,f_max_diff,f_l1_diff,e1_max_diff,transverse_max,ampere_drift";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e},{:e}",
                r.time, r.f_max, r.f_l1, r.e1_max, r.transverse, r.ampere_drift
            )
            .unwrap();
        }
        s
    }
}

fn compare(full: &DistributionFunction, fields: &FieldState, vp: &VPState) -> DiscrepancyRow {
    let g = full.grid;
    let (mut f_max, mut f_sum) = (0.0f64, 0.0);
    for (a, b) in full.values.iter().zip(&vp.f.values) {
        let d = (a - b).abs();
        f_max = f_max.max(d);
        f_sum += d;
    }
    let e1_max = fields
        .e1
        .iter()
        .zip(&vp.e1)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    DiscrepancyRow {
        time: full.time,
        f_max,
        f_l1: f_sum * g.dx() * g.dv1() * g.dv2(),
        e1_max,
        transverse: max_abs(&fields.e2) + max_abs(&fields.b),
        ampere_drift: vp.ampere_drift(),
    }
}

/// Runs the full and the reduced solver side by side from the same
/// symmetric data and records their differences every `stride` steps.
pub fn cross_validate(
    f0: &DistributionFunction,
    fields0: &FieldState,
    b: &Background,
    cfg: &SolverConfig,
    steps: usize,
    stride: usize,
) -> Result<CrossValidationReport> {
    cross_validate_observed(f0, fields0, b, cfg, steps, stride, |_, _| Ok(()))
}

/// [`cross_validate`], calling `observe` with the full solver's state after
/// every step.
pub fn cross_validate_observed(
    f0: &DistributionFunction,
    fields0: &FieldState,
    b: &Background,
    cfg: &SolverConfig,
    steps: usize,
    stride: usize,
    mut observe: impl FnMut(&DistributionFunction, &FieldState) -> Result<()>,
) -> Result<CrossValidationReport> {
    require_symmetric(f0, fields0)?;
    let stride = stride.max(1);
    let mut vp = VPState::new(f0.clone(), b, cfg.relativistic)?;
    let mut f = f0.clone();
    let mut fields = fields0.clone();
    let mut report = CrossValidationReport {
        rows: vec![compare(&f, &fields, &vp)],
    };
    for n in 1..=steps {
        let out = step_strang(&f, &fields, b, cfg)?;
        f = out.f;
        fields = out.fields;
        vp = step_vp(&vp, b, cfg)?;
        observe(&f, &fields)?;
        if n % stride == 0 || n == steps {
            report.rows.push(compare(&f, &fields, &vp));
        }
    }
    Ok(report)
}
