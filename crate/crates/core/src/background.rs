//! Neutralizing background density `b(x)`.

use serde::{Deserialize, Serialize};

use crate::distribution::DistributionFunction;
use crate::error::{Error, Result};
use crate::grid::{trapezoid_weights, Axis, PhaseGrid};
use crate::profile::bump;

/// Relative mismatch tolerated between `∬ f0` and `∫ b` without rescaling.
pub const NEUTRALITY_TOLERANCE: f64 = 1e-10;

/// How the background profile is shaped before normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackgroundSpec {
    /// `amplitude * bump((x - center) / half_width)`.
    Bump {
        center: f64,
        half_width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `b(x) = ∫ f0(x, v) dv`, so the initial charge density vanishes.
    MatchInitial,
    /// `b ≡ 0`; only neutral when `f0 ≡ 0`.
    None,
}

fn one() -> f64 {
    1.0
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        BackgroundSpec::Bump {
            center: 0.0,
            half_width: 3.0,
            amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Background {
    pub axis: Axis,
    pub values: Vec<f64>,
    /// Trapezoid integral `∫ b dx`.
    pub total: f64,
}

impl Background {
    pub fn zeros(axis: Axis) -> Self {
        Self {
            axis,
            values: vec![0.0; axis.len()],
            total: 0.0,
        }
    }

    pub fn from_values(axis: Axis, values: Vec<f64>) -> Result<Self> {
        if values.len() != axis.len() {
            return Err(Error::GridMismatch(format!(
                "background has {} samples for {} nodes",
                values.len(),
                axis.len()
            )));
        }
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Config("background must be finite and nonnegative".into()));
        }
        let total = integrate(axis, &values);
        Ok(Self { axis, values, total })
    }

    /// Builds the background for `f0` and enforces global neutrality,
    /// rescaling when `neutralize` is set.
    pub fn build(spec: &BackgroundSpec, f0: &DistributionFunction, neutralize: bool) -> Result<Self> {
        let axis = f0.grid.x;
        let raw = match spec {
            BackgroundSpec::Bump {
                center,
                half_width,
                amplitude,
            } => {
                if *half_width <= 0.0 {
                    return Err(Error::Config("background half_width must be positive".into()));
                }
                axis.nodes()
                    .iter()
                    .map(|x| amplitude * bump((x - center) / half_width))
                    .collect()
            }
            BackgroundSpec::MatchInitial => spatial_density(f0),
            BackgroundSpec::None => vec![0.0; axis.len()],
        };
        let mut b = Self::from_values(axis, raw)?;
        if b.values[0] != 0.0 || b.values[axis.len() - 1] != 0.0 {
            return Err(Error::SupportBoundary(
                "background does not vanish at the box edges".into(),
            ));
        }
        let charge = total_charge(f0);
        if neutralize {
            if b.total > 0.0 {
                let scale = charge / b.total;
                for v in &mut b.values {
                    *v *= scale;
                }
                b.total = integrate(axis, &b.values);
            } else if charge != 0.0 {
                return Err(Error::Neutrality(
                    "cannot neutralize: background integrates to zero".into(),
                ));
            }
        }
        let scale = charge.abs().max(b.total.abs());
        if scale > 0.0 && ((charge - b.total) / scale).abs() > NEUTRALITY_TOLERANCE {
            return Err(Error::Neutrality(format!("∬f0 = {charge:e} but ∫b = {:e}", b.total)));
        }
        Ok(b)
    }
}

/// Trapezoid integral over an axis.
pub fn integrate(axis: Axis, values: &[f64]) -> f64 {
    let w = trapezoid_weights(values.len());
    values.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>() * axis.spacing()
}

/// `∫ f dv` at each x node (trapezoid in both velocity directions).
pub fn spatial_density(f: &DistributionFunction) -> Vec<f64> {
    crate::moments::velocity_moments(f, false)
        .into_iter()
        .map(|m| m.density)
        .collect()
}

/// `∬ f dv dx` with the trapezoid rule in every direction.
pub fn total_charge(f: &DistributionFunction) -> f64 {
    integrate(f.grid.x, &spatial_density(f))
}

/// Shorthand for grids that must share the spatial axis.
pub fn ensure_same_space(grid: &PhaseGrid, axis: &Axis) -> Result<()> {
    if grid.x != *axis {
        return Err(Error::GridMismatch(format!(
            "distribution x-axis {:?} differs from {:?}",
            grid.x, axis
        )));
    }
    Ok(())
}
