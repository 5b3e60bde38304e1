//! Electromagnetic fields on the spatial grid.
//!
//! `E2` and `B` are stored through the light-cone variables
//! `plus = E2 + B` and `minus = E2 - B`, which satisfy
//! `(∂t + ∂x) plus = -j2` and `(∂t - ∂x) minus = -j2`. With `dt == dx` both
//! become exact one-node shifts. `E2` and `B` are reconstructed as the half
//! sum and half difference, and `A` is always the cumulative integral of `B`.

use crate::background::integrate;
use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::profile::bump;

/// Relative tolerance on `|dt - dx|` for the light-cone update.
pub const ALIGNMENT_TOLERANCE: f64 = 1e-12;

/// Relative tolerance on `E1(x_max)` from the Gauss integral.
pub const GAUSS_END_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub axis: Axis,
    pub e1: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub e2: Vec<f64>,
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub time: f64,
}

impl FieldState {
    pub fn zeros(axis: Axis) -> Self {
        let n = axis.len();
        Self {
            axis,
            e1: vec![0.0; n],
            plus: vec![0.0; n],
            minus: vec![0.0; n],
            e2: vec![0.0; n],
            b: vec![0.0; n],
            a: vec![0.0; n],
            time: 0.0,
        }
    }

    /// Builds a state from `E1`, `E2`, `B` samples.
    pub fn from_components(axis: Axis, e1: Vec<f64>, e2: &[f64], b: &[f64], time: f64) -> Result<Self> {
        let n = axis.len();
        if e1.len() != n || e2.len() != n || b.len() != n {
            return Err(Error::GridMismatch("field arrays do not match the x-axis".into()));
        }
        let plus: Vec<f64> = e2.iter().zip(b).map(|(e, b)| e + b).collect();
        let minus: Vec<f64> = e2.iter().zip(b).map(|(e, b)| e - b).collect();
        Ok(Self::from_light_cone(axis, e1, plus, minus, time))
    }

    /// Builds a state from the light-cone variables, reconstructing `E2`, `B`, `A`.
    pub fn from_light_cone(axis: Axis, e1: Vec<f64>, plus: Vec<f64>, minus: Vec<f64>, time: f64) -> Self {
        let e2 = plus.iter().zip(&minus).map(|(p, m)| 0.5 * (p + m)).collect();
        let b: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| 0.5 * (p - m)).collect();
        let a = compute_a(axis, &b);
        Self {
            axis,
            e1,
            plus,
            minus,
            e2,
            b,
            a,
            time,
        }
    }

    /// `(E2, B) -> (-E2, -B)`, `E1` unchanged.
    pub fn mirrored(&self) -> Self {
        let neg = |v: &Vec<f64>| v.iter().map(|x| -x).collect::<Vec<_>>();
        Self::from_light_cone(self.axis, self.e1.clone(), neg(&self.plus), neg(&self.minus), self.time)
    }

    /// `∫ (E1² + E2² + B²) dx`.
    pub fn energy(&self) -> f64 {
        let density: Vec<f64> = (0..self.e1.len())
            .map(|i| self.e1[i] * self.e1[i] + self.e2[i] * self.e2[i] + self.b[i] * self.b[i])
            .collect();
        integrate(self.axis, &density)
    }

    pub fn max_transverse(&self) -> f64 {
        max_abs(&self.e2) + max_abs(&self.b)
    }

    /// Largest `|E1|+|E2|+|B|` at the box edges.
    pub fn boundary_max(&self) -> f64 {
        let n = self.e1.len();
        [0, n - 1]
            .iter()
            .map(|&i| self.e1[i].abs() + self.e2[i].abs() + self.b[i].abs())
            .fold(0.0, f64::max)
    }

    /// Pointwise average of two states (used for the mid-step force).
    pub fn midpoint(&self, other: &FieldState) -> FieldState {
        let avg = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect::<Vec<_>>();
        FieldState::from_light_cone(
            self.axis,
            avg(&self.e1, &other.e1),
            avg(&self.plus, &other.plus),
            avg(&self.minus, &other.minus),
            0.5 * (self.time + other.time),
        )
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Cumulative trapezoid integral from the left edge, starting at zero.
pub fn cumulative_trapezoid(step: f64, values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * step;
        out.push(acc);
    }
    out
}

/// `A(x) = ∫_{x_min}^x B dy` by the cumulative trapezoid rule.
pub fn compute_a(axis: Axis, b: &[f64]) -> Vec<f64> {
    cumulative_trapezoid(axis.spacing(), b)
}

/// `E1(x) = ∫_{x_min}^x ρ dy`, failing when `E1(x_max)` does not vanish.
pub fn init_e1_from_gauss(axis: Axis, rho: &[f64]) -> Result<Vec<f64>> {
    if rho.len() != axis.len() {
        return Err(Error::GridMismatch("ρ does not match the x-axis".into()));
    }
    let e1 = cumulative_trapezoid(axis.spacing(), rho);
    let end = *e1.last().unwrap();
    let scale = integrate(axis, &rho.iter().map(|r| r.abs()).collect::<Vec<_>>()).max(1.0);
    if end.abs() > GAUSS_END_TOLERANCE * scale {
        return Err(Error::Neutrality(format!(
            "∫ρ dx = {end:e}; E1 would not vanish at the right edge"
        )));
    }
    Ok(e1)
}

/// `max_i |(E1[i+1] - E1[i-1]) / 2dx - ρ[i]|` over interior nodes.
pub fn gauss_residual(axis: Axis, e1: &[f64], rho: &[f64]) -> f64 {
    let inv = 1.0 / (2.0 * axis.spacing());
    (1..e1.len() - 1)
        .map(|i| ((e1[i + 1] - e1[i - 1]) * inv - rho[i]).abs())
        .fold(0.0, f64::max)
}

/// `E1 - dt * j1` pointwise.
pub fn advance_e1_ampere(e1: &[f64], j1_mid: &[f64], dt: f64) -> Result<Vec<f64>> {
    if e1.len() != j1_mid.len() {
        return Err(Error::GridMismatch("j1 does not match E1".into()));
    }
    Ok(e1.iter().zip(j1_mid).map(|(e, j)| e - dt * j).collect())
}

pub fn check_alignment(dt: f64, dx: f64) -> Result<()> {
    if (dt - dx).abs() > ALIGNMENT_TOLERANCE * dx {
        return Err(Error::LightConeAlignment { dt, dx });
    }
    Ok(())
}

/// Advances `E2`, `B` one step along the light cones with the half-step
/// transverse current `j2_mid`. `E1` is carried over unchanged.
///
/// `plus[i] <- plus[i-1] - dt * (j2[i-1] + j2[i]) / 2`,
/// `minus[i] <- minus[i+1] - dt * (j2[i] + j2[i+1]) / 2`; nothing enters
/// through the box edges.
pub fn advance_fields_lightcone(state: &FieldState, j2_mid: &[f64], dt: f64) -> Result<FieldState> {
    check_alignment(dt, state.axis.spacing())?;
    let n = state.plus.len();
    if j2_mid.len() != n {
        return Err(Error::GridMismatch("j2 does not match the field grid".into()));
    }
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    plus[0] = 0.0 - dt * (0.5 * j2_mid[0]);
    for i in 1..n {
        plus[i] = state.plus[i - 1] - dt * (0.5 * (j2_mid[i - 1] + j2_mid[i]));
    }
    minus[n - 1] = 0.0 - dt * (0.5 * j2_mid[n - 1]);
    for i in 0..n - 1 {
        minus[i] = state.minus[i + 1] - dt * (0.5 * (j2_mid[i] + j2_mid[i + 1]));
    }
    Ok(FieldState::from_light_cone(
        state.axis,
        state.e1.clone(),
        plus,
        minus,
        state.time + dt,
    ))
}

/// Discrete residual of `(∂tt - ∂xx) A = j2` at the middle of three levels.
///
/// Returns the pointwise residual on interior nodes (zero at the edges).
pub fn wave_residual_a(levels: &[&[f64]], j2: &[f64], dt: f64, dx: f64) -> Result<Vec<f64>> {
    if levels.len() < 3 {
        return Err(Error::History(format!(
            "wave residual needs three A levels, got {}",
            levels.len()
        )));
    }
    let (prev, cur, next) = (levels[0], levels[1], levels[2]);
    let n = cur.len();
    let mut res = vec![0.0; n];
    let (it, ix) = (1.0 / (dt * dt), 1.0 / (dx * dx));
    for i in 1..n - 1 {
        let att = (next[i] - 2.0 * cur[i] + prev[i]) * it;
        let axx = (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) * ix;
        res[i] = att - axx - j2[i];
    }
    Ok(res)
}

/// Compactly supported transverse initial data `amplitude * bump((x - c) / w)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FieldBump {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
}

impl FieldBump {
    pub fn sample(&self, axis: Axis) -> Vec<f64> {
        if self.amplitude == 0.0 || self.half_width <= 0.0 {
            return vec![0.0; axis.len()];
        }
        axis.nodes()
            .iter()
            .map(|x| self.amplitude * bump((x - self.center) / self.half_width))
            .collect()
    }
}
