//! Velocity moments of the distribution: charge density and currents.
//!
//! Quadrature is the trapezoid rule in `v1` and `v2`. The `v2` sum runs over
//! mirror pairs `(k, n - k)` so that `v2`-even data yields `j2 == 0` exactly
//! and the mirror image of any data yields `-j2` bitwise.

use rayon::prelude::*;

use crate::background::{ensure_same_space, Background};
use crate::distribution::DistributionFunction;
use crate::error::Result;
use crate::grid::trapezoid_weights;

#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub rho: Vec<f64>,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Self {
            rho: vec![0.0; n],
            j1: vec![0.0; n],
            j2: vec![0.0; n],
        }
    }
}

/// Per-x-node velocity integrals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SliceMoments {
    /// `∫ f dv`
    pub density: f64,
    /// `∫ v1 f dv` (or `∫ v̂1 f dv`)
    pub j1: f64,
    /// `∫ v2 f dv` (or `∫ v̂2 f dv`)
    pub j2: f64,
    /// `∫ |v|^2 f dv`, or `2 ∫ (γ - 1) f dv` in relativistic mode.
    pub kinetic: f64,
}

/// Velocity integrals at every x node, one x-slab per task with a fixed
/// summation order inside each slab.
pub fn velocity_moments(f: &DistributionFunction, relativistic: bool) -> Vec<SliceMoments> {
    let g = f.grid;
    let nv1 = g.nv1();
    let nv2 = g.nv2();
    let v1s = g.v1.nodes();
    let v2s = g.v2.nodes();
    let w1 = trapezoid_weights(nv1);
    let w2 = trapezoid_weights(nv2);
    let cell = g.dv1() * g.dv2();
    let half = nv2 / 2;
    let has_middle = nv2 % 2 == 1;

    f.values
        .par_chunks(g.slab())
        .map(|slab| {
            let mut out = SliceMoments::default();
            for iv1 in 0..nv1 {
                let line = &slab[iv1 * nv2..(iv1 + 1) * nv2];
                let v1 = v1s[iv1];
                let mut dens = 0.0;
                let mut cur1 = 0.0;
                let mut cur2 = 0.0;
                let mut kin = 0.0;
                for k in 0..half {
                    let m = nv2 - 1 - k;
                    let even = line[k] + line[m];
                    let odd = line[k] - line[m];
                    let v2 = v2s[k];
                    let (s1, s2, e) = speeds(v1, v2, relativistic);
                    dens += w2[k] * even;
                    cur1 += w2[k] * s1 * even;
                    cur2 += w2[k] * s2 * odd;
                    kin += w2[k] * e * even;
                }
                if has_middle {
                    let v = line[half];
                    let (s1, _, e) = speeds(v1, 0.0, relativistic);
                    dens += w2[half] * v;
                    cur1 += w2[half] * s1 * v;
                    kin += w2[half] * e * v;
                }
                out.density += w1[iv1] * dens;
                out.j1 += w1[iv1] * cur1;
                out.j2 += w1[iv1] * cur2;
                out.kinetic += w1[iv1] * kin;
            }
            out.density *= cell;
            out.j1 *= cell;
            out.j2 *= cell;
            out.kinetic *= cell;
            out
        })
        .collect()
}

/// Transport velocities `(s1, s2)` and kinetic weight for a velocity node.
#[inline]
fn speeds(v1: f64, v2: f64, relativistic: bool) -> (f64, f64, f64) {
    if relativistic {
        let gamma = (1.0 + v1 * v1 + v2 * v2).sqrt();
        (v1 / gamma, v2 / gamma, 2.0 * (gamma - 1.0))
    } else {
        (v1, v2, v1 * v1 + v2 * v2)
    }
}

/// `ρ = ∫ f dv - b`, `j = ∫ v f dv` on the spatial grid.
pub fn compute_moments(f: &DistributionFunction, b: &Background) -> Result<Moments> {
    compute_moments_with(f, b, false)
}

pub fn compute_moments_with(f: &DistributionFunction, b: &Background, relativistic: bool) -> Result<Moments> {
    ensure_same_space(&f.grid, &b.axis)?;
    let slices = velocity_moments(f, relativistic);
    Ok(Moments {
        rho: slices.iter().zip(&b.values).map(|(s, b)| s.density - b).collect(),
        j1: slices.iter().map(|s| s.j1).collect(),
        j2: slices.iter().map(|s| s.j2).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::sample_initial_distribution;
    use crate::grid::{make_grid, Axis, PhaseGrid};
    use crate::profile::{bump, ProfileParams, ProfileRegistry};
    use proptest::prelude::*;

    fn grid(nx: usize, nv: usize) -> PhaseGrid {
        make_grid([(-4.0, 4.0), (-2.0, 2.0), (-2.0, 2.0)], (nx, nv, nv)).unwrap()
    }

    fn sample(name: &str, g: PhaseGrid) -> DistributionFunction {
        let p = ProfileRegistry::builtin()
            .build(name, &ProfileParams::default())
            .unwrap();
        sample_initial_distribution(p.as_ref(), g).unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let g = grid(8, 8);
        let m = compute_moments(&DistributionFunction::zeros(g), &Background::zeros(g.x)).unwrap();
        assert_eq!(m, Moments::zeros(g.nx()));
    }

    #[test]
    fn even_data_has_exactly_zero_j2() {
        let f = sample("even-bump", grid(32, 32));
        let m = compute_moments(&f, &Background::zeros(f.grid.x)).unwrap();
        assert!(m.j2.iter().all(|v| *v == 0.0));
        assert!(m.rho.iter().any(|v| *v > 0.0));
    }

    #[test]
    fn mirror_negates_j2_bitwise() {
        let f = sample("asymmetric-bump", grid(16, 24));
        let b = Background::zeros(f.grid.x);
        let a = compute_moments(&f, &b).unwrap();
        let m = compute_moments(&f.mirrored(), &b).unwrap();
        for i in 0..a.rho.len() {
            assert_eq!(a.rho[i].to_bits(), m.rho[i].to_bits());
            assert_eq!(a.j1[i].to_bits(), m.j1[i].to_bits());
            assert!(-a.j2[i] == m.j2[i]);
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let f = DistributionFunction::zeros(grid(8, 8));
        let b = Background::zeros(Axis::new(-1.0, 1.0, 8));
        assert!(compute_moments(&f, &b).is_err());
    }

    /// Separable `f = X(x) * g(v1) * h(v2)` with `g` a shifted bump.
    fn separable(g: PhaseGrid) -> DistributionFunction {
        let mut f = DistributionFunction::zeros(g);
        for ix in 0..g.nx() {
            let x = g.x.node(ix);
            for iv1 in 0..g.nv1() {
                let v1 = g.v1.node(iv1);
                for iv2 in 0..g.nv2() {
                    let v2 = g.v2.node(iv2);
                    let k = g.index(ix, iv1, iv2);
                    f.values[k] = bump(x / 3.0)
                        * (-(v1 - 0.3) * (v1 - 0.3) / 0.18).exp()
                        * (-(v2 * v2) / 0.18).exp()
                        * bump(v1 / 1.9)
                        * bump(v2 / 1.9);
                }
            }
        }
        f
    }

    #[test]
    fn refined_velocity_quadrature_agrees() {
        let coarse = grid(16, 24);
        let mut fine = coarse;
        fine.v1 = coarse.v1.refined(4);
        fine.v2 = coarse.v2.refined(4);
        let b = Background::zeros(coarse.x);
        let mc = compute_moments(&separable(coarse), &b).unwrap();
        let mf = compute_moments(&separable(fine), &b).unwrap();
        let scale_r = mf.rho.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let scale_j = mf.j1.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        for i in 0..mc.rho.len() {
            assert!((mc.rho[i] - mf.rho[i]).abs() <= 1e-4 * scale_r);
            assert!((mc.j1[i] - mf.j1[i]).abs() <= 1e-4 * scale_j);
        }
    }

    #[test]
    fn even_data_j2_far_below_j1() {
        let params = ProfileParams::default().with("v1_center", 0.4);
        let p = ProfileRegistry::builtin().build("even-bump", &params).unwrap();
        let f = sample_initial_distribution(p.as_ref(), grid(24, 40)).unwrap();
        for rel in [false, true] {
            let m = compute_moments_with(&f, &Background::zeros(f.grid.x), rel).unwrap();
            let j1 = m.j1.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
            let j2 = m.j2.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
            assert!(j2 <= 1e-13 * j1);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn linear_in_f(alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let g = grid(8, 12);
            let f1 = sample("two-stream", g);
            let f2 = sample("asymmetric-bump", g);
            let mut mix = f1.clone();
            for (k, v) in mix.values.iter_mut().enumerate() {
                *v = alpha * f1.values[k] + beta * f2.values[k];
            }
            let b = Background::zeros(g.x);
            let m = compute_moments(&mix, &b).unwrap();
            let m1 = compute_moments(&f1, &b).unwrap();
            let m2 = compute_moments(&f2, &b).unwrap();
            for i in 0..g.nx() {
                let expect = [
                    alpha * m1.rho[i] + beta * m2.rho[i],
                    alpha * m1.j1[i] + beta * m2.j1[i],
                    alpha * m1.j2[i] + beta * m2.j2[i],
                ];
                let got = [m.rho[i], m.j1[i], m.j2[i]];
                for (e, g) in expect.iter().zip(&got) {
                    prop_assert!((e - g).abs() <= 1e-13 * (1.0 + e.abs()));
                }
            }
        }
    }
}
