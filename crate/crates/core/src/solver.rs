//! Strang-split semi-Lagrangian step for the Vlasov equation.
//!
//! One step of length `dt == dx`:
//!
//! 1. half-step free streaming in `x`,
//! 2. predicted mid-step fields from the currents of the half-streamed
//!    distribution,
//! 3. full-step velocity advection under the frozen mid-step force
//!    (see [`kick`]),
//! 4. field advance with the mid-step currents, taken as the average of the
//!    currents before and after the velocity advection,
//! 5. half-step free streaming in `x`.
//!
//! Using only the pre-kick currents in step 4 lags the current by half a
//! step and makes the Ampère and Maxwell updates first order in time.
//!
//! Each sub-sweep is a constant shift along a 1D line, applied with the
//! natural cubic spline of [`crate::spline`].

use rayon::prelude::*;

use crate::background::Background;
use crate::distribution::{ClampReport, DistributionFunction, NegativityPolicy};
use crate::error::{Error, Result};
use crate::fields::{advance_e1_ampere, advance_fields_lightcone, check_alignment, cumulative_trapezoid, FieldState};
use crate::grid::PhaseGrid;
use crate::moments::{compute_moments_with, velocity_moments, Moments};
use crate::spline::{evaluate_at, shift_line, Scratch, SplineFactors};

/// `v` itself, or `v / sqrt(1 + |v|^2)` when `relativistic`.
pub fn velocity_map(v: (f64, f64), relativistic: bool) -> (f64, f64) {
    if !relativistic {
        return v;
    }
    let gamma = (1.0 + v.0 * v.0 + v.1 * v.1).sqrt();
    (v.0 / gamma, v.1 / gamma)
}

/// How the step obtains the longitudinal field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum E1Closure {
    /// `E1` advanced by `∂t E1 = -j1`; the force uses the average of the
    /// old and new values.
    #[default]
    Ampere,
    /// `E1` recomputed from Gauss's law at the half step and at the end.
    Gauss,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub relativistic: bool,
    /// Largest admissible velocity shift per step, in cells (at most 1).
    pub cfl_limit: f64,
    pub negativity: NegativityPolicy,
    /// `max f0`, the scale for the negativity and support thresholds.
    pub reference_max: f64,
    /// Relative threshold that defines "f != 0" on the grid.
    pub support_ratio: f64,
    /// Relative level on the outer node layer that counts as the support
    /// having reached the box.
    pub boundary_ratio: f64,
    pub e1_closure: E1Closure,
}

/// Default `support_threshold / max f0`.
pub const SUPPORT_RATIO: f64 = 1e-12;

/// Default outer-layer tolerance relative to `max f0`.
pub const BOUNDARY_RATIO: f64 = 1e-6;

impl SolverConfig {
    /// Magic time step `dt = dx` with default tolerances.
    pub fn for_grid(grid: &PhaseGrid, reference_max: f64) -> Self {
        Self {
            dt: grid.dx(),
            relativistic: false,
            cfl_limit: 1.0,
            negativity: NegativityPolicy::default(),
            reference_max,
            support_ratio: SUPPORT_RATIO,
            boundary_ratio: BOUNDARY_RATIO,
            e1_closure: E1Closure::Ampere,
        }
    }

    pub fn support_threshold(&self) -> f64 {
        self.support_ratio * self.reference_max
    }

    pub fn boundary_threshold(&self) -> f64 {
        self.boundary_ratio * self.reference_max
    }
}

/// Mid-step force `K = (E1 + v̂2 B, E2 - v̂1 B)` on the spatial grid.
#[derive(Clone, Debug)]
pub struct ForceField {
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub b: Vec<f64>,
    pub relativistic: bool,
}

impl ForceField {
    pub fn from_state(fields: &FieldState, relativistic: bool) -> Self {
        Self {
            e1: fields.e1.clone(),
            e2: fields.e2.clone(),
            b: fields.b.clone(),
            relativistic,
        }
    }

    /// Purely longitudinal force `(E1, 0)`.
    pub fn electrostatic(e1: Vec<f64>) -> Self {
        let n = e1.len();
        Self {
            e1,
            e2: vec![0.0; n],
            b: vec![0.0; n],
            relativistic: false,
        }
    }

    #[inline]
    pub fn k1(&self, ix: usize, v1: f64, v2: f64) -> f64 {
        let (_, w2) = velocity_map((v1, v2), self.relativistic);
        self.e1[ix] + w2 * self.b[ix]
    }

    #[inline]
    pub fn k2(&self, ix: usize, v1: f64, v2: f64) -> f64 {
        let (w1, _) = velocity_map((v1, v2), self.relativistic);
        self.e2[ix] - w1 * self.b[ix]
    }

    /// Largest `|K1|` and `|K2|` over the velocity box.
    pub fn max_components(&self, grid: &PhaseGrid) -> (f64, f64) {
        let v1s = grid.v1.nodes();
        let v2s = grid.v2.nodes();
        let mut m1: f64 = 0.0;
        let mut m2: f64 = 0.0;
        for ix in 0..self.e1.len() {
            if self.relativistic {
                for &v1 in &v1s {
                    for &v2 in &v2s {
                        m1 = m1.max(self.k1(ix, v1, v2).abs());
                        m2 = m2.max(self.k2(ix, v1, v2).abs());
                    }
                }
            } else {
                for &v2 in [v2s[0], v2s[v2s.len() - 1]].iter() {
                    m1 = m1.max(self.k1(ix, 0.0, v2).abs());
                }
                for &v1 in [v1s[0], v1s[v1s.len() - 1]].iter() {
                    m2 = m2.max(self.k2(ix, v1, 0.0).abs());
                }
            }
        }
        (m1, m2)
    }
}

/// Everything a step produces.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub f: DistributionFunction,
    pub fields: FieldState,
    /// Moments of the advanced distribution.
    pub moments: Moments,
    /// Density of the half-streamed distribution and the mid-step currents
    /// that drove the fields.
    pub mid_moments: Moments,
    pub clamp: ClampReport,
}

/// Free streaming `∂t f + s(v) ∂x f = 0` over `tau`, line by line in `x`.
pub fn advect_x(f: &DistributionFunction, tau: f64, relativistic: bool) -> DistributionFunction {
    let g = f.grid;
    let (nx, nv1, nv2) = (g.nx(), g.nv1(), g.nv2());
    let factors = SplineFactors::new(nx);
    let v1s = g.v1.nodes();
    let v2s = g.v2.nodes();
    let dx = g.dx();
    let blocks: Vec<Vec<f64>> = (0..nv1)
        .into_par_iter()
        .map_init(
            || (Scratch::default(), vec![0.0; nx], vec![0.0; nx]),
            |(scratch, line, out), iv1| {
                let mut block = vec![0.0; nx * nv2];
                for iv2 in 0..nv2 {
                    let (speed, _) = velocity_map((v1s[iv1], v2s[iv2]), relativistic);
                    for (ix, l) in line.iter_mut().enumerate() {
                        *l = f.values[g.index(ix, iv1, iv2)];
                    }
                    shift_line(&factors, line, speed * tau / dx, out, scratch);
                    for (ix, o) in out.iter().enumerate() {
                        block[ix * nv2 + iv2] = *o;
                    }
                }
                block
            },
        )
        .collect();
    let mut values = vec![0.0; g.size()];
    for (iv1, block) in blocks.iter().enumerate() {
        for ix in 0..nx {
            let dst = g.index(ix, iv1, 0);
            values[dst..dst + nv2].copy_from_slice(&block[ix * nv2..(ix + 1) * nv2]);
        }
    }
    DistributionFunction {
        grid: g,
        values,
        time: f.time,
    }
}

/// Full velocity advection over `dt` under a frozen force.
///
/// Without a magnetic field the two sweeps commute and run once each
/// (`v1`, then `v2`). With `B != 0` the `v1` sweep is split in halves around
/// the `v2` sweep, since the rotation terms `v2 B` and `-v1 B` do not
/// commute and a one-sided ordering is only first order in `dt`.
pub fn kick(f: &mut DistributionFunction, force: &ForceField, dt: f64) {
    if force.b.iter().all(|b| *b == 0.0) {
        sweep_v1(f, force, dt);
        sweep_v2(f, force, dt);
    } else {
        sweep_v1(f, force, 0.5 * dt);
        sweep_v2(f, force, dt);
        sweep_v1(f, force, 0.5 * dt);
    }
}

/// Acceleration along `v1` over `dt`: `∂t f + K1 ∂v1 f = 0` on every `(x, v2)` line.
pub fn sweep_v1(f: &mut DistributionFunction, force: &ForceField, dt: f64) {
    let g = f.grid;
    let (nv1, nv2) = (g.nv1(), g.nv2());
    let factors = SplineFactors::new(nv1);
    let v1s = g.v1.nodes();
    let v2s = g.v2.nodes();
    let dv1 = g.dv1();
    f.values.par_chunks_mut(g.slab()).enumerate().for_each_init(
        || {
            (
                Scratch::default(),
                vec![0.0; nv1],
                vec![0.0; nv1],
                vec![0.0; nv1],
                vec![0.0; nv1],
            )
        },
        |(scratch, line, out, pos, m), (ix, slab)| {
            for iv2 in 0..nv2 {
                for (iv1, l) in line.iter_mut().enumerate() {
                    *l = slab[iv1 * nv2 + iv2];
                }
                if force.relativistic {
                    for (k, p) in pos.iter_mut().enumerate() {
                        *p = k as f64 - force.k1(ix, v1s[k], v2s[iv2]) * dt / dv1;
                    }
                    evaluate_at(&factors, line, pos, out, m);
                } else {
                    let shift = force.k1(ix, 0.0, v2s[iv2]) * dt / dv1;
                    shift_line(&factors, line, shift, out, scratch);
                }
                for (iv1, o) in out.iter().enumerate() {
                    slab[iv1 * nv2 + iv2] = *o;
                }
            }
        },
    );
}

/// Acceleration along `v2` over `dt`: `∂t f + K2 ∂v2 f = 0` on every `(x, v1)` line.
pub fn sweep_v2(f: &mut DistributionFunction, force: &ForceField, dt: f64) {
    let g = f.grid;
    let (nv1, nv2) = (g.nv1(), g.nv2());
    let factors = SplineFactors::new(nv2);
    let v1s = g.v1.nodes();
    let v2s = g.v2.nodes();
    let dv2 = g.dv2();
    f.values.par_chunks_mut(nv2).enumerate().for_each_init(
        || (Scratch::default(), vec![0.0; nv2], vec![0.0; nv2], vec![0.0; nv2]),
        |(scratch, out, pos, m), (line_index, line)| {
            let ix = line_index / nv1;
            let v1 = v1s[line_index % nv1];
            if force.relativistic {
                for (k, p) in pos.iter_mut().enumerate() {
                    *p = k as f64 - force.k2(ix, v1, v2s[k]) * dt / dv2;
                }
                evaluate_at(&factors, line, pos, out, m);
            } else {
                let shift = force.k2(ix, v1, 0.0) * dt / dv2;
                shift_line(&factors, line, shift, out, scratch);
            }
            line.copy_from_slice(out);
        },
    );
}

/// Fails when the force would move data by more than `limit` cells.
pub fn check_cfl(force: &ForceField, grid: &PhaseGrid, dt: f64, limit: f64) -> Result<()> {
    let (k1, k2) = force.max_components(grid);
    let s1 = k1 * dt / grid.dv1();
    let s2 = k2 * dt / grid.dv2();
    if !(s1.is_finite() && s2.is_finite()) {
        return Err(Error::NonFinite("force field".into()));
    }
    if s1 > limit || s2 > limit {
        return Err(Error::Cfl {
            max_force: k1.max(k2),
            shift_cells: s1.max(s2),
            limit,
        });
    }
    Ok(())
}

/// Post-step validation shared by the full and reduced solvers.
pub(crate) fn finish_distribution(f: &mut DistributionFunction, cfg: &SolverConfig) -> Result<ClampReport> {
    f.check_finite()?;
    let report = f.apply_negativity(cfg.negativity, cfg.reference_max)?;
    f.check_support(cfg.boundary_threshold())?;
    Ok(report)
}

/// One Strang-split step of the coupled system.
pub fn step_strang(
    f: &DistributionFunction,
    fields: &FieldState,
    background: &Background,
    cfg: &SolverConfig,
) -> Result<StepOutput> {
    let g = f.grid;
    let dt = cfg.dt;
    check_alignment(dt, g.dx())?;
    if fields.axis != g.x {
        return Err(Error::GridMismatch("field axis differs from the phase grid".into()));
    }

    let half = advect_x(f, 0.5 * dt, cfg.relativistic);
    let before = compute_moments_with(&half, background, cfg.relativistic)?;

    // predictor: fields advanced with the pre-kick currents
    let predicted = advance_fields_lightcone(fields, &before.j2, dt)?;
    let mut mid = fields.midpoint(&predicted);
    mid.e1 = match cfg.e1_closure {
        E1Closure::Ampere => fields
            .e1
            .iter()
            .zip(&before.j1)
            .map(|(e, j)| e - 0.5 * dt * j)
            .collect(),
        E1Closure::Gauss => cumulative_trapezoid(g.dx(), &before.rho),
    };
    let force = ForceField::from_state(&mid, cfg.relativistic);
    check_cfl(&force, &g, dt, cfg.cfl_limit)?;

    let mut accelerated = half;
    kick(&mut accelerated, &force, dt);

    // corrector: mid-step currents average the pre- and post-kick moments
    let after = velocity_moments(&accelerated, cfg.relativistic);
    let mid_moments = Moments {
        rho: before.rho,
        j1: before.j1.iter().zip(&after).map(|(a, b)| 0.5 * (a + b.j1)).collect(),
        j2: before.j2.iter().zip(&after).map(|(a, b)| 0.5 * (a + b.j2)).collect(),
    };
    let mut next = advance_fields_lightcone(fields, &mid_moments.j2, dt)?;
    if cfg.e1_closure == E1Closure::Ampere {
        next.e1 = advance_e1_ampere(&fields.e1, &mid_moments.j1, dt)?;
    }

    let mut f_next = advect_x(&accelerated, 0.5 * dt, cfg.relativistic);
    f_next.time = f.time + dt;
    let clamp = finish_distribution(&mut f_next, cfg)?;

    let moments = compute_moments_with(&f_next, background, cfg.relativistic)?;
    if cfg.e1_closure == E1Closure::Gauss {
        next.e1 = cumulative_trapezoid(g.dx(), &moments.rho);
    }
    next.time = f_next.time;
    if !next.energy().is_finite() {
        return Err(Error::NonFinite(format!("fields at t = {}", next.time)));
    }
    Ok(StepOutput {
        f: f_next,
        fields: next,
        moments,
        mid_moments,
        clamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::total_charge;
    use crate::distribution::sample_initial_distribution;
    use crate::fields::FieldBump;
    use crate::grid::make_grid;
    use crate::profile::{ProfileParams, ProfileRegistry};

    fn setup(
        name: &str,
        params: ProfileParams,
        counts: (usize, usize, usize),
    ) -> (DistributionFunction, Background, SolverConfig) {
        let g = make_grid([(-8.0, 8.0), (-2.0, 2.0), (-2.0, 2.0)], counts).unwrap();
        let p = ProfileRegistry::builtin().build(name, &params).unwrap();
        let f = sample_initial_distribution(p.as_ref(), g).unwrap();
        let b = Background::zeros(g.x);
        let cfg = SolverConfig::for_grid(&g, f.max_value());
        (f, b, cfg)
    }

    #[test]
    fn velocity_map_cases() {
        assert_eq!(velocity_map((0.0, 0.0), true), (0.0, 0.0));
        let (a, b) = velocity_map((1.0, 0.0), true);
        assert!((a - 1.0 / 2f64.sqrt()).abs() < 1e-16 && b == 0.0);
        let (a, b) = velocity_map((0.6e6, -0.8e6), true);
        assert!((a * a + b * b).sqrt() < 1.0);
        assert_eq!(velocity_map((3.0, -2.0), false), (3.0, -2.0));
    }

    #[test]
    fn free_streaming_matches_shifted_profile() {
        // zero fields, no background: f(t, x, v) = f0(x - v1 t, v)
        let params = ProfileParams::default().with("perturbation", 0.0);
        let (f0, bg, cfg) = setup("even-bump", params.clone(), (96, 32, 16));
        // neutral zero-charge setup would require a background; drive the
        // splitting with the streaming operators directly
        let mut f = f0.clone();
        let steps = 8;
        for _ in 0..steps {
            f = advect_x(&f, cfg.dt, false);
        }
        let p = ProfileRegistry::builtin().build("even-bump", &params).unwrap();
        let g = f.grid;
        let t = steps as f64 * cfg.dt;
        let mut err: f64 = 0.0;
        for ix in 0..g.nx() {
            for iv1 in 0..g.nv1() {
                for iv2 in 0..g.nv2() {
                    let exact = p.eval(g.x.node(ix) - g.v1.node(iv1) * t, g.v1.node(iv1), g.v2.node(iv2));
                    err = err.max((f.at(ix, iv1, iv2) - exact).abs());
                }
            }
        }
        assert!(err < 2e-3 * f0.max_value(), "{err}");
        let _ = bg;
    }

    #[test]
    fn zero_distribution_with_vacuum_fields() {
        let (f0, bg, cfg) = setup("zero", ProfileParams::default(), (64, 16, 16));
        let ax = f0.grid.x;
        let bump = FieldBump {
            amplitude: 0.3,
            center: -1.0,
            half_width: 1.0,
        }
        .sample(ax);
        let mut fields =
            FieldState::from_components(ax, vec![0.0; ax.len()], &bump, &vec![0.0; ax.len()], 0.0).unwrap();
        let mut f = f0;
        for _ in 0..10 {
            let out = step_strang(&f, &fields, &bg, &cfg).unwrap();
            f = out.f;
            fields = out.fields;
        }
        assert!(f.values.iter().all(|v| *v == 0.0));
        assert!(fields.max_transverse() > 0.0);
        assert!(fields.e1.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn even_data_keeps_transverse_fields_zero() {
        let g = make_grid([(-8.0, 8.0), (-2.0, 2.0), (-2.0, 2.0)], (64, 48, 48)).unwrap();
        let p = ProfileRegistry::builtin()
            .build("even-bump", &ProfileParams::default().with("v1_center", 0.2))
            .unwrap();
        let f0 = sample_initial_distribution(p.as_ref(), g).unwrap();
        let bg = Background::build(&Default::default(), &f0, true).unwrap();
        let cfg = SolverConfig::for_grid(&g, f0.max_value());
        let m0 = compute_moments_with(&f0, &bg, false).unwrap();
        let e1 = crate::fields::init_e1_from_gauss(g.x, &m0.rho).unwrap();
        let mut fields = FieldState::from_components(g.x, e1, &vec![0.0; g.nx()], &vec![0.0; g.nx()], 0.0).unwrap();
        let mut f = f0;
        for _ in 0..12 {
            let out = step_strang(&f, &fields, &bg, &cfg).unwrap();
            f = out.f;
            fields = out.fields;
            assert_eq!(fields.max_transverse(), 0.0);
            assert_eq!(f.symmetry_error(), 0.0);
        }
    }

    #[test]
    fn cfl_violation_reports_force() {
        let (f0, bg, cfg) = setup("even-bump", ProfileParams::default(), (48, 16, 16));
        let ax = f0.grid.x;
        let big = vec![50.0; ax.len()];
        let fields = FieldState::from_components(ax, big, &vec![0.0; ax.len()], &vec![0.0; ax.len()], 0.0).unwrap();
        match step_strang(&f0, &fields, &bg, &cfg) {
            Err(Error::Cfl { max_force, .. }) => assert!(max_force >= 49.0),
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn misaligned_dt_rejected() {
        let (f0, bg, mut cfg) = setup("zero", ProfileParams::default(), (16, 8, 8));
        cfg.dt *= 0.5;
        let fields = FieldState::zeros(f0.grid.x);
        assert!(matches!(
            step_strang(&f0, &fields, &bg, &cfg),
            Err(Error::LightConeAlignment { .. })
        ));
    }

    #[test]
    fn support_reaching_boundary_aborts() {
        // beam moving right, box edge two cells away from the support
        let params = ProfileParams::default()
            .with("x_center", 6.5)
            .with("x_width", 1.2)
            .with("v1_center", 1.0)
            .with("v1_width", 0.5);
        let (f0, bg, cfg) = setup("even-bump", params, (48, 16, 16));
        let fields = FieldState::zeros(f0.grid.x);
        let mut f = f0;
        let mut hit = false;
        for _ in 0..30 {
            match step_strang(&f, &fields, &bg, &cfg) {
                Ok(out) => f = out.f,
                Err(Error::SupportBoundary(_)) => {
                    hit = true;
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(hit);
    }

    #[test]
    fn mass_conserved_per_step() {
        let g = make_grid([(-8.0, 8.0), (-2.0, 2.0), (-2.0, 2.0)], (64, 48, 48)).unwrap();
        let p = ProfileRegistry::builtin()
            .build("two-stream", &ProfileParams::default())
            .unwrap();
        let f0 = sample_initial_distribution(p.as_ref(), g).unwrap();
        let bg = Background::build(&Default::default(), &f0, true).unwrap();
        let cfg = SolverConfig::for_grid(&g, f0.max_value());
        let m0 = compute_moments_with(&f0, &bg, false).unwrap();
        let e1 = crate::fields::init_e1_from_gauss(g.x, &m0.rho).unwrap();
        let mut fields = FieldState::from_components(g.x, e1, &vec![0.0; g.nx()], &vec![0.0; g.nx()], 0.0).unwrap();
        let q0 = total_charge(&f0);
        let mut f = f0;
        for _ in 0..10 {
            let out = step_strang(&f, &fields, &bg, &cfg).unwrap();
            let q = total_charge(&out.f);
            assert!(((q - total_charge(&f)) / q0).abs() <= 1e-10);
            f = out.f;
            fields = out.fields;
        }
    }

    #[test]
    fn step_commutes_with_mirror() {
        let (f0, _, cfg) = setup("asymmetric-bump", ProfileParams::default(), (32, 24, 24));
        let bg = Background::build(&Default::default(), &f0, true).unwrap();
        let ax = f0.grid.x;
        let m0 = compute_moments_with(&f0, &bg, false).unwrap();
        let e1 = crate::fields::init_e1_from_gauss(ax, &m0.rho).unwrap();
        let bump = FieldBump {
            amplitude: 0.1,
            center: -1.0,
            half_width: 2.0,
        }
        .sample(ax);
        let fields = FieldState::from_components(ax, e1, &bump, &vec![0.0; ax.len()], 0.0).unwrap();
        let a = step_strang(&f0, &fields, &bg, &cfg).unwrap();
        let b = step_strang(&f0.mirrored(), &fields.mirrored(), &bg, &cfg).unwrap();
        let am = a.f.mirrored();
        for (x, y) in am.values.iter().zip(&b.f.values) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let fm = a.fields.mirrored();
        for i in 0..ax.len() {
            assert!(fm.e2[i] == b.fields.e2[i] && fm.b[i] == b.fields.b[i]);
            assert_eq!(fm.e1[i].to_bits(), b.fields.e1[i].to_bits());
        }
    }

    #[test]
    fn relativistic_step_runs_and_bounds_speed() {
        let (f0, _, mut cfg) = setup("asymmetric-bump", ProfileParams::default(), (32, 48, 48));
        cfg.relativistic = true;
        let bg = Background::build(&Default::default(), &f0, true).unwrap();
        let m0 = compute_moments_with(&f0, &bg, true).unwrap();
        let e1 = crate::fields::init_e1_from_gauss(f0.grid.x, &m0.rho).unwrap();
        let fields = FieldState::from_components(f0.grid.x, e1, &vec![0.0; 33], &vec![0.0; 33], 0.0).unwrap();
        let out = step_strang(&f0, &fields, &bg, &cfg).unwrap();
        assert!(out.f.values.iter().all(|v| v.is_finite()));
        assert!(out.fields.max_transverse() > 0.0);
    }
}
