//! Sampled phase-space density and its support/positivity bookkeeping.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::profile::Profile;

#[derive(Clone, Debug, PartialEq)]
pub struct DistributionFunction {
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

/// `(i_x, i_v1, i_v2)`
pub type NodeIndex = (usize, usize, usize);

/// Handling of spline undershoot below zero.
///
/// Both tolerances are relative to the reference maximum `max f0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NegativityPolicy {
    /// Values in `[-clamp, 0)` are set to zero.
    pub clamp: f64,
    /// Values below `-abort` stop the run.
    pub abort: f64,
    /// Rescale after clamping so the trapezoid mass is unchanged.
    pub conserve_mass: bool,
}

impl Default for NegativityPolicy {
    fn default() -> Self {
        Self {
            clamp: 1e-12,
            abort: 0.5,
            conserve_mass: true,
        }
    }
}

/// Outcome of applying a [`NegativityPolicy`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClampReport {
    /// Phase-space mass added by clamping (node sum times cell volume).
    pub clamped_mass: f64,
    pub clamped_nodes: usize,
    /// Most negative value left in place after clamping (0 if none).
    pub min_value: f64,
}

impl DistributionFunction {
    pub fn zeros(grid: PhaseGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.size()],
            time: 0.0,
        }
    }

    #[inline]
    pub fn at(&self, ix: usize, iv1: usize, iv2: usize) -> f64 {
        self.values[self.grid.index(ix, iv1, iv2)]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The `(x, v1, v2) -> (x, v1, -v2)` reflection of the sampled data.
    pub fn mirrored(&self) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        for ix in 0..g.nx() {
            for iv1 in 0..g.nv1() {
                let base = g.index(ix, iv1, 0);
                let line = &self.values[base..base + g.nv2()];
                for (o, v) in out.values[base..base + g.nv2()].iter_mut().zip(line.iter().rev()) {
                    *o = *v;
                }
            }
        }
        out
    }

    /// Largest `|f(x, v1, v2) - f(x, v1, -v2)|` over the grid.
    pub fn symmetry_error(&self) -> f64 {
        let g = self.grid;
        let nv2 = g.nv2();
        self.values
            .par_chunks(nv2)
            .map(|line| {
                (0..nv2 / 2 + 1)
                    .map(|k| (line[k] - line[nv2 - 1 - k]).abs())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// First node pair `(i_x, i_v1, i_v2)` / mirror that differ, if any.
    pub fn first_asymmetric_pair(&self) -> Option<(NodeIndex, NodeIndex)> {
        let g = self.grid;
        for ix in 0..g.nx() {
            for iv1 in 0..g.nv1() {
                for iv2 in 0..g.nv2() / 2 {
                    let m = g.v2.mirror(iv2);
                    if self.at(ix, iv1, iv2) != self.at(ix, iv1, m) {
                        return Some(((ix, iv1, iv2), (ix, iv1, m)));
                    }
                }
            }
        }
        None
    }

    /// Largest `|f|` on the outermost layer of nodes in any direction.
    pub fn boundary_max(&self) -> f64 {
        let g = self.grid;
        let (nx, nv1, nv2) = (g.nx(), g.nv1(), g.nv2());
        let slab = g.slab();
        let mut m: f64 = 0.0;
        for v in &self.values[..slab] {
            m = m.max(v.abs());
        }
        for v in &self.values[(nx - 1) * slab..] {
            m = m.max(v.abs());
        }
        for ix in 0..nx {
            for iv1 in 0..nv1 {
                let base = g.index(ix, iv1, 0);
                let line = &self.values[base..base + nv2];
                if iv1 == 0 || iv1 == nv1 - 1 {
                    m = line.iter().fold(m, |a, v| a.max(v.abs()));
                } else {
                    m = m.max(line[0].abs()).max(line[nv2 - 1].abs());
                }
            }
        }
        m
    }

    /// Fails when the outer layer carries more than `threshold`.
    pub fn check_support(&self, threshold: f64) -> Result<()> {
        let m = self.boundary_max();
        if m > threshold {
            return Err(Error::SupportBoundary(format!(
                "max |f| on the outer layer is {m:e} (threshold {threshold:e}) at t = {}",
                self.time
            )));
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(k) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "f at node {:?}, t = {}",
                self.grid.unravel(k),
                self.time
            )));
        }
        Ok(())
    }

    /// Applies the undershoot policy relative to `reference_max`.
    pub fn apply_negativity(&mut self, policy: NegativityPolicy, reference_max: f64) -> Result<ClampReport> {
        let clamp = policy.clamp * reference_max;
        let abort = policy.abort * reference_max;
        let mut report = ClampReport::default();
        let before = if policy.conserve_mass {
            crate::background::total_charge(self)
        } else {
            0.0
        };
        for (k, v) in self.values.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -abort {
                    return Err(Error::Negative {
                        value: *v,
                        index: self.grid.unravel(k),
                        tolerance: -abort,
                    });
                }
                if *v >= -clamp {
                    report.clamped_mass -= *v;
                    report.clamped_nodes += 1;
                    *v = 0.0;
                } else {
                    report.min_value = report.min_value.min(*v);
                }
            }
        }
        let g = self.grid;
        report.clamped_mass *= g.dx() * g.dv1() * g.dv2();
        if report.clamped_nodes > 0 && policy.conserve_mass {
            let after = crate::background::total_charge(self);
            if after > 0.0 {
                let scale = before / after;
                self.values.par_iter_mut().for_each(|v| *v *= scale);
            }
        }
        if report.clamped_nodes > 0 {
            log::debug!(
                "t = {}: clamped {} nodes, mass {:e}",
                self.time,
                report.clamped_nodes,
                report.clamped_mass
            );
        }
        Ok(report)
    }
}

/// Samples `profile` on the grid nodes at `t = 0`.
///
/// The outer layer must come out exactly zero; otherwise the profile's
/// support touches the box and the call fails.
pub fn sample_initial_distribution(profile: &dyn Profile, grid: PhaseGrid) -> Result<DistributionFunction> {
    let mut f = DistributionFunction::zeros(grid);
    if !profile.is_zero() {
        let xs = grid.x.nodes();
        let v1s = grid.v1.nodes();
        let v2s = grid.v2.nodes();
        f.values
            .par_chunks_mut(grid.slab())
            .zip(xs.par_iter())
            .for_each(|(slab, &x)| {
                for (iv1, &v1) in v1s.iter().enumerate() {
                    for (iv2, &v2) in v2s.iter().enumerate() {
                        slab[iv1 * v2s.len() + iv2] = profile.eval(x, v1, v2);
                    }
                }
            });
    }
    if let Some(k) = f.values.iter().position(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::Config(format!(
            "profile `{}` is negative or non-finite at node {:?}",
            profile.name(),
            grid.unravel(k)
        )));
    }
    if f.boundary_max() != 0.0 {
        return Err(Error::SupportBoundary(format!(
            "initial profile `{}` does not vanish on the outer layer of the grid",
            profile.name()
        )));
    }
    Ok(f)
}
