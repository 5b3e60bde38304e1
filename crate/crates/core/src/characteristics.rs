//! Characteristic curves through a stored field history.
//!
//! The fields are cubic splines in `x` at each stored time level and linear
//! in time between levels. Orbits are integrated with classical RK4 using
//! half the history spacing as the step.

use std::io::Write;

use rayon::prelude::*;

use crate::distribution::DistributionFunction;
use crate::error::{Error, Result};
use crate::fields::FieldState;
use crate::grid::Axis;
use crate::profile::{Profile, SupportBox};
use crate::solver::velocity_map;
use crate::spline::UniformSpline;

/// Relative tolerance on the uniform spacing of history levels.
pub const SPACING_TOLERANCE: f64 = 1e-9;

/// A point `(s, X, V1, V2)` of a characteristic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharacteristicState {
    pub s: f64,
    pub x: f64,
    pub v1: f64,
    pub v2: f64,
}

impl CharacteristicState {
    pub fn new(s: f64, x: f64, v1: f64, v2: f64) -> Self {
        Self { s, x, v1, v2 }
    }
}

#[derive(Clone, Debug)]
struct Level {
    e1: UniformSpline,
    e2: UniformSpline,
    b: UniformSpline,
    a: UniformSpline,
}

impl Level {
    fn new(state: &FieldState) -> Self {
        let ax = state.axis;
        let spline = |v: &[f64]| UniformSpline::new(ax.min, ax.spacing(), v.to_vec());
        Self {
            e1: spline(&state.e1),
            e2: spline(&state.e2),
            b: spline(&state.b),
            a: spline(&state.a),
        }
    }
}

/// Local field values `(E1, E2, B, A)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocalFields {
    pub e1: f64,
    pub e2: f64,
    pub b: f64,
    pub a: f64,
}

/// Field snapshots at uniformly spaced times.
#[derive(Clone, Debug)]
pub struct FieldHistory {
    axis: Axis,
    t0: f64,
    dt: f64,
    relativistic: bool,
    levels: Vec<Level>,
}

impl FieldHistory {
    pub fn new(axis: Axis, t0: f64, dt: f64, relativistic: bool) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::History(format!("history spacing {dt} is not positive")));
        }
        Ok(Self {
            axis,
            t0,
            dt,
            relativistic,
            levels: Vec::new(),
        })
    }

    /// Builds a history from consecutive states; the spacing is taken from the first two.
    pub fn from_states(states: &[FieldState], relativistic: bool) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::History("a history needs at least two levels".into()));
        }
        let dt = states[1].time - states[0].time;
        let mut h = Self::new(states[0].axis, states[0].time, dt, relativistic)?;
        for s in states {
            h.push(s)?;
        }
        Ok(h)
    }

    /// Appends the next level; its time must continue the uniform spacing.
    pub fn push(&mut self, state: &FieldState) -> Result<()> {
        if state.axis != self.axis {
            return Err(Error::GridMismatch("history level on a different axis".into()));
        }
        let expected = self.t0 + self.levels.len() as f64 * self.dt;
        if (state.time - expected).abs() > SPACING_TOLERANCE * self.dt.max(expected.abs()) {
            return Err(Error::History(format!(
                "level at t = {} breaks uniform spacing (expected {expected})",
                state.time
            )));
        }
        self.levels.push(Level::new(state));
        Ok(())
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn relativistic(&self) -> bool {
        self.relativistic
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Covered time interval.
    pub fn span(&self) -> (f64, f64) {
        let n = self.levels.len().max(1) - 1;
        (self.t0, self.t0 + n as f64 * self.dt)
    }

    fn covers(&self, s: f64) -> bool {
        let (a, b) = self.span();
        let slack = SPACING_TOLERANCE * self.dt;
        s >= a - slack && s <= b + slack
    }

    /// Fields at `(s, x)`: spline in `x`, linear in `s`.
    pub fn at(&self, s: f64, x: f64) -> Result<LocalFields> {
        if !self.covers(s) || self.levels.len() < 2 {
            let (a, b) = self.span();
            return Err(Error::History(format!("time {s} outside history [{a}, {b}]")));
        }
        if !(x >= self.axis.min && x <= self.axis.max) {
            return Err(Error::Escaped { s, x });
        }
        let p = ((s - self.t0) / self.dt).clamp(0.0, (self.levels.len() - 1) as f64);
        let k = (p.floor() as usize).min(self.levels.len() - 2);
        let w = p - k as f64;
        let (l0, l1) = (&self.levels[k], &self.levels[k + 1]);
        let lerp = |u: &UniformSpline, v: &UniformSpline| {
            let a = u.eval(x);
            if w == 0.0 {
                a
            } else {
                (1.0 - w) * a + w * v.eval(x)
            }
        };
        Ok(LocalFields {
            e1: lerp(&l0.e1, &l1.e1),
            e2: lerp(&l0.e2, &l1.e2),
            b: lerp(&l0.b, &l1.b),
            a: lerp(&l0.a, &l1.a),
        })
    }

    fn rhs(&self, s: f64, y: [f64; 3]) -> Result<[f64; 3]> {
        let f = self.at(s, y[0])?;
        let (u1, u2) = velocity_map((y[1], y[2]), self.relativistic);
        Ok([u1, f.e1 + u2 * f.b, f.e2 - u1 * f.b])
    }
}

/// Integrates the characteristic through `(t, x, v)` to time `s_target`.
pub fn integrate_characteristic(
    history: &FieldHistory,
    t: f64,
    x: f64,
    v: (f64, f64),
    s_target: f64,
) -> Result<CharacteristicState> {
    let mut last = CharacteristicState::new(t, x, v.0, v.1);
    walk(history, last, s_target, |p| last = p)?;
    Ok(last)
}

/// Calls `visit` at the start and after every RK4 step.
fn walk(
    history: &FieldHistory,
    start: CharacteristicState,
    s_target: f64,
    mut visit: impl FnMut(CharacteristicState),
) -> Result<()> {
    let (lo, hi) = history.span();
    let slack = SPACING_TOLERANCE * history.dt;
    if start.s.min(s_target) < lo - slack || start.s.max(s_target) > hi + slack {
        return Err(Error::History(format!(
            "interval [{}, {}] outside history [{lo}, {hi}]",
            start.s.min(s_target),
            start.s.max(s_target)
        )));
    }
    if !(start.x >= history.axis.min && start.x <= history.axis.max) {
        return Err(Error::Escaped { s: start.s, x: start.x });
    }
    visit(start);
    let span = s_target - start.s;
    let steps = (span.abs() / (0.5 * history.dt) - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok(());
    }
    let h = span / steps as f64;
    let mut y = [start.x, start.v1, start.v2];
    for n in 0..steps {
        let s = start.s + n as f64 * h;
        let k1 = history.rhs(s, y)?;
        let k2 = history.rhs(s + 0.5 * h, axpy(y, 0.5 * h, k1))?;
        let k3 = history.rhs(s + 0.5 * h, axpy(y, 0.5 * h, k2))?;
        let k4 = history.rhs(s + h, axpy(y, h, k3))?;
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let s_next = if n + 1 == steps {
            s_target
        } else {
            start.s + (n + 1) as f64 * h
        };
        if !(y[0] >= history.axis.min && y[0] <= history.axis.max) {
            return Err(Error::Escaped { s: s_next, x: y[0] });
        }
        visit(CharacteristicState::new(s_next, y[0], y[1], y[2]));
    }
    Ok(())
}

#[inline]
fn axpy(y: [f64; 3], a: f64, k: [f64; 3]) -> [f64; 3] {
    [y[0] + a * k[0], y[1] + a * k[1], y[2] + a * k[2]]
}

/// `|(v2 + A(t, x)) - (V2(s0) + A(s0, X(s0)))|` with `s0` the start of the history.
pub fn v2a_drift(history: &FieldHistory, t: f64, x: f64, v: (f64, f64)) -> Result<f64> {
    let s0 = history.span().0;
    let end = integrate_characteristic(history, t, x, v, s0)?;
    let now = v.1 + history.at(t, x)?.a;
    let then = end.v2 + history.at(s0, end.x)?.a;
    Ok((now - then).abs())
}

/// One row of an orbit dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitPoint {
    pub state: CharacteristicState,
    /// `A(s, X(s))`
    pub a: f64,
    /// `V2(s) + A(s, X(s))`
    pub invariant: f64,
}

/// The orbit from `start` to `s_target`, one point per RK4 step.
pub fn trace_orbit(history: &FieldHistory, start: CharacteristicState, s_target: f64) -> Result<Vec<OrbitPoint>> {
    let mut states = Vec::new();
    walk(history, start, s_target, |p| states.push(p))?;
    states
        .into_iter()
        .map(|p| {
            let a = history.at(p.s, p.x)?.a;
            Ok(OrbitPoint {
                state: p,
                a,
                invariant: p.v2 + a,
            })
        })
        .collect()
}

pub const ORBIT_CSV_HEADER: &str = "s,X,V1,V2,A,invariant";

pub fn write_orbit_csv<W: Write>(mut out: W, orbit: &[OrbitPoint]) -> std::io::Result<()> {
    writeln!(out, "{ORBIT_CSV_HEADER}")?;
    for p in orbit {
        let s = p.state;
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            s.s, s.x, s.v1, s.v2, p.a, p.invariant
        )?;
    }
    Ok(())
}

/// `n^3` starting points evenly spread over the interior of `support`
/// (fractions `(2k + 1) / n - 1` of each half-width).
pub fn orbit_lattice(support: &SupportBox, n: usize) -> Vec<(f64, f64, f64)> {
    let frac = |k: usize| (2 * k + 1) as f64 / n as f64 - 1.0;
    let at = |(lo, hi): (f64, f64), k: usize| 0.5 * (lo + hi) + 0.5 * (hi - lo) * frac(k);
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push((at(support.x, i), at(support.v1, j), at(support.v2, k)));
            }
        }
    }
    out
}

/// Default lattice resolution per axis.
pub const LATTICE_POINTS: usize = 5;

/// Smallest `||V1(s)| - 1|` along the orbits started at `samples` at the
/// beginning of the history and followed to its end.
pub fn min_distance_to_light_speed(history: &FieldHistory, samples: &[(f64, f64, f64)]) -> Result<f64> {
    let (s0, s1) = history.span();
    samples
        .par_iter()
        .map(|&(x, v1, v2)| {
            let mut gap = f64::INFINITY;
            walk(history, CharacteristicState::new(s0, x, v1, v2), s1, |p| {
                gap = gap.min((p.v1.abs() - 1.0).abs());
            })?;
            Ok(gap)
        })
        .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))
}

/// Largest invariant drift over orbits started at `samples` at the end of
/// the history and followed back to its beginning.
pub fn max_v2a_drift(history: &FieldHistory, samples: &[(f64, f64, f64)]) -> Result<f64> {
    let t = history.span().1;
    samples
        .par_iter()
        .map(|&(x, v1, v2)| v2a_drift(history, t, x, (v1, v2)))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Grid nodes where `f >= level * max f`, thinned to at most `limit`
/// evenly strided points `(x, v1, v2, f)`.
pub fn significant_nodes(f: &DistributionFunction, level: f64, limit: usize) -> Vec<(f64, f64, f64, f64)> {
    let g = f.grid;
    let cut = level * f.max_value();
    let hits: Vec<usize> = (0..g.size())
        .filter(|&k| f.values[k] > 0.0 && f.values[k] >= cut)
        .collect();
    let stride = hits.len().div_ceil(limit.max(1)).max(1);
    hits.iter()
        .step_by(stride)
        .map(|&k| {
            let (i, j, l) = g.unravel(k);
            (g.x.node(i), g.v1.node(j), g.v2.node(l), f.values[k])
        })
        .collect()
}

/// `max |f(t, x, v) - f0(X(s0), V(s0))|` over `samples`, following each
/// characteristic from the end of the history back to its start.
pub fn moc_residual(history: &FieldHistory, samples: &[(f64, f64, f64, f64)], f0: &dyn Profile) -> Result<f64> {
    let (s0, t) = history.span();
    samples
        .par_iter()
        .map(|&(x, v1, v2, value)| {
            let end = integrate_characteristic(history, t, x, (v1, v2), s0)?;
            Ok((value - f0.eval(end.x, end.v1, end.v2)).abs())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis() -> Axis {
        Axis::new(-10.0, 10.0, 160)
    }

    fn frozen(
        e1: impl Fn(f64) -> f64,
        e2: impl Fn(f64) -> f64,
        b: impl Fn(f64) -> f64,
        dt: f64,
        t_end: f64,
    ) -> FieldHistory {
        let ax = axis();
        let xs = ax.nodes();
        let n = (t_end / dt).round() as usize;
        let states: Vec<FieldState> = (0..=n)
            .map(|k| {
                FieldState::from_components(
                    ax,
                    xs.iter().map(|x| e1(*x)).collect(),
                    &xs.iter().map(|x| e2(*x)).collect::<Vec<_>>(),
                    &xs.iter().map(|x| b(*x)).collect::<Vec<_>>(),
                    k as f64 * dt,
                )
                .unwrap()
            })
            .collect();
        FieldHistory::from_states(&states, false).unwrap()
    }

    #[test]
    fn zero_fields_give_straight_lines() {
        let h = frozen(|_| 0.0, |_| 0.0, |_| 0.0, 0.125, 2.0);
        let p = integrate_characteristic(&h, 2.0, 1.0, (0.7, -0.3), 0.0).unwrap();
        assert!((p.x - (1.0 - 2.0 * 0.7)).abs() < 1e-14);
        assert_eq!((p.v1, p.v2), (0.7, -0.3));
        assert_eq!(v2a_drift(&h, 2.0, 1.0, (0.7, -0.3)).unwrap(), 0.0);
    }

    #[test]
    fn constant_b_rotates_velocity() {
        let b0 = 0.8;
        let h = frozen(|_| 0.0, |_| 0.0, |_| b0, 0.05, 3.0);
        let (x, v1, v2, t) = (0.5, 0.6, 0.2, 3.0);
        let p = integrate_characteristic(&h, t, x, (v1, v2), 0.0).unwrap();
        // V1 + i V2 = (v1 + i v2) exp(-i B0 (s - t))
        let th = -b0 * (0.0 - t);
        let (c, s) = (th.cos(), th.sin());
        let ev1 = v1 * c - v2 * s;
        let ev2 = v2 * c + v1 * s;
        // X(s) = x + Re[(v1 + i v2)(exp(-i B0 (s - t)) - 1) / (-i B0)]
        let ex = x - (v1 * s + v2 * (c - 1.0)) / b0;
        assert!((p.v1 - ev1).abs() < 1e-8, "{} vs {ev1}", p.v1);
        assert!((p.v2 - ev2).abs() < 1e-8);
        assert!((p.x - ex).abs() < 1e-8, "{} vs {ex}", p.x);
        let speed = (p.v1 * p.v1 + p.v2 * p.v2).sqrt();
        assert!((speed - (v1 * v1 + v2 * v2).sqrt()).abs() < 1e-9);
        // RK4 keeps the linear invariant V2 + B0 X to round-off
        assert!(v2a_drift(&h, t, x, (v1, v2)).unwrap() < 1e-12);
    }

    fn smooth(dt: f64) -> FieldHistory {
        frozen(
            |x| 0.3 * (0.5 * x).sin(),
            |x| 0.2 * (0.3 * x).cos(),
            |x| 0.5 + 0.2 * (0.4 * x).sin(),
            dt,
            2.0,
        )
    }

    #[test]
    fn time_reversal() {
        let h = smooth(0.05);
        let back = integrate_characteristic(&h, 2.0, 0.3, (0.4, -0.2), 0.0).unwrap();
        let fwd = integrate_characteristic(&h, 0.0, back.x, (back.v1, back.v2), 2.0).unwrap();
        assert!((fwd.x - 0.3).abs() < 1e-9);
        assert!((fwd.v1 - 0.4).abs() < 1e-9);
        assert!((fwd.v2 + 0.2).abs() < 1e-9);
    }

    #[test]
    fn rk4_self_convergence() {
        let end = |dt: f64| integrate_characteristic(&smooth(dt), 2.0, 0.3, (0.9, -0.6), 0.0).unwrap();
        let reference = end(0.4 / 32.0);
        let err = |p: CharacteristicState| {
            (p.x - reference.x).abs() + (p.v1 - reference.v1).abs() + (p.v2 - reference.v2).abs()
        };
        let e1 = err(end(0.4));
        let e2 = err(end(0.2));
        let ratio = e1 / e2;
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn invariant_drift_converges_at_fourth_order() {
        // B = B0 + B1 x: A is quadratic and the orbit stays far from the box
        // edges, so the drift is the time-integration error alone
        let drift = |dt: f64| {
            let h = frozen(|_| 0.0, |_| 0.0, |x| 0.8 + 0.3 * x, dt, 2.0);
            v2a_drift(&h, 2.0, 0.2, (0.9, 0.5)).unwrap()
        };
        let ratio = drift(0.4) / drift(0.2);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn escape_is_reported() {
        let h = frozen(|_| 0.0, |_| 0.0, |_| 0.0, 0.25, 4.0);
        let err = integrate_characteristic(&h, 4.0, 9.0, (-1.5, 0.0), 0.0);
        match err {
            Err(e @ Error::Escaped { .. }) => assert!(e.to_string().contains("characteristic escaped domain")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn light_speed_gap_with_zero_fields() {
        let h = frozen(|_| 0.0, |_| 0.0, |_| 0.0, 0.25, 1.0);
        let support = SupportBox {
            x: (-1.0, 1.0),
            v1: (-0.5, 0.5),
            v2: (-0.5, 0.5),
        };
        let lattice = orbit_lattice(&support, LATTICE_POINTS);
        assert_eq!(lattice.len(), 125);
        let gap = min_distance_to_light_speed(&h, &lattice).unwrap();
        // outermost lattice value is |v1| = 0.4
        assert!((gap - 0.6).abs() < 1e-15);
    }

    #[test]
    fn orbit_csv_has_header_and_rows() {
        let h = smooth(0.1);
        let orbit = trace_orbit(&h, CharacteristicState::new(0.0, 0.0, 0.5, 0.1), 1.0).unwrap();
        assert_eq!(orbit.len(), 21);
        let mut buf = Vec::new();
        write_orbit_csv(&mut buf, &orbit).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,X,V1,V2,A,invariant\n"));
        assert_eq!(text.lines().count(), 22);
    }

    #[test]
    fn uneven_history_rejected() {
        let ax = axis();
        let mut h = FieldHistory::new(ax, 0.0, 0.1, false).unwrap();
        h.push(&FieldState::zeros(ax)).unwrap();
        let mut late = FieldState::zeros(ax);
        late.time = 0.3;
        assert!(matches!(h.push(&late), Err(Error::History(_))));
    }
}
