//! Per-step scalar diagnostics.
//!
//! Diagnostics only observe: they never modify state or stop a run.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::background::{integrate, Background};
use crate::distribution::DistributionFunction;
use crate::fields::{gauss_residual, max_abs, FieldState};
use crate::moments::velocity_moments;

/// Settings shared by every record of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsConfig {
    /// Distances `ε` from `|v1| = 1` for the gradient monitor.
    pub epsilons: Vec<f64>,
    /// Absolute level above which `f` counts as nonzero.
    pub support_threshold: f64,
    pub relativistic: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub kinetic_energy: f64,
    pub field_energy: f64,
    pub total_charge: f64,
    pub q_support: f64,
    pub sup_a: f64,
    pub gauss_residual: f64,
    pub sym_error: f64,
    /// `(ε, sup |∂x f| + |∇v f|)` in configuration order.
    pub seps_grad_sup: Vec<(f64, f64)>,
    pub min_v1_gap: f64,
}

impl DiagnosticsRecord {
    pub fn total_energy(&self) -> f64 {
        self.kinetic_energy + self.field_energy
    }

    pub fn seps(&self, eps: f64) -> Option<f64> {
        self.seps_grad_sup.iter().find(|(e, _)| *e == eps).map(|(_, v)| *v)
    }
}

pub fn record(
    f: &DistributionFunction,
    fields: &FieldState,
    b: &Background,
    cfg: &DiagnosticsConfig,
) -> DiagnosticsRecord {
    let g = f.grid;
    let slices = velocity_moments(f, cfg.relativistic);
    let density: Vec<f64> = slices.iter().map(|s| s.density).collect();
    let kinetic: Vec<f64> = slices.iter().map(|s| s.kinetic).collect();
    let rho: Vec<f64> = density.iter().zip(&b.values).map(|(d, b)| d - b).collect();
    let support = support_summary(f, cfg.support_threshold);
    DiagnosticsRecord {
        time: f.time,
        kinetic_energy: integrate(g.x, &kinetic),
        field_energy: fields.energy(),
        total_charge: integrate(g.x, &density),
        q_support: 1.0 + support.max_speed,
        sup_a: max_abs(&fields.a),
        gauss_residual: gauss_residual(g.x, &fields.e1, &rho),
        sym_error: f.symmetry_error(),
        seps_grad_sup: seps_gradient_monitor(f, &cfg.epsilons, cfg.support_threshold),
        min_v1_gap: support.min_v1_gap,
    }
}

struct SupportSummary {
    max_speed: f64,
    min_v1_gap: f64,
}

fn support_summary(f: &DistributionFunction, threshold: f64) -> SupportSummary {
    let g = f.grid;
    let v1s = g.v1.nodes();
    let v2s = g.v2.nodes();
    let (nv1, nv2) = (g.nv1(), g.nv2());
    let (speed, gap) = f
        .values
        .par_chunks(g.slab())
        .map(|slab| {
            let mut speed: f64 = 0.0;
            let mut gap = f64::INFINITY;
            for iv1 in 0..nv1 {
                for iv2 in 0..nv2 {
                    if slab[iv1 * nv2 + iv2] > threshold {
                        let (a, b) = (v1s[iv1], v2s[iv2]);
                        speed = speed.max((a * a + b * b).sqrt());
                        gap = gap.min((a.abs() - 1.0).abs());
                    }
                }
            }
            (speed, gap)
        })
        .reduce(|| (0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));
    SupportSummary {
        max_speed: speed,
        min_v1_gap: if gap.is_finite() { gap } else { 0.0 },
    }
}

/// Centered difference of `f` along a line, one-sided at the ends.
#[inline]
fn diff(line_at: impl Fn(usize) -> f64, k: usize, n: usize, h: f64) -> f64 {
    if k == 0 {
        (line_at(1) - line_at(0)) / h
    } else if k == n - 1 {
        (line_at(n - 1) - line_at(n - 2)) / h
    } else {
        (line_at(k + 1) - line_at(k - 1)) / (2.0 * h)
    }
}

/// Largest `|∂x f| + |∇v f|` per `v1` node, and whether that `v1` row meets the support.
fn gradient_by_v1(f: &DistributionFunction, threshold: f64) -> (Vec<f64>, Vec<bool>) {
    let g = f.grid;
    let (nx, nv1, nv2) = (g.nx(), g.nv1(), g.nv2());
    let (dx, dv1, dv2) = (g.dx(), g.dv1(), g.dv2());
    let v = &f.values;
    (0..nx)
        .into_par_iter()
        .map(|ix| {
            let mut grad = vec![0.0f64; nv1];
            let mut hit = vec![false; nv1];
            for iv1 in 0..nv1 {
                for iv2 in 0..nv2 {
                    let gx = diff(|k| v[g.index(k, iv1, iv2)], ix, nx, dx);
                    let g1 = diff(|k| v[g.index(ix, k, iv2)], iv1, nv1, dv1);
                    let g2 = diff(|k| v[g.index(ix, iv1, k)], iv2, nv2, dv2);
                    grad[iv1] = grad[iv1].max(gx.abs() + (g1 * g1 + g2 * g2).sqrt());
                    hit[iv1] |= v[g.index(ix, iv1, iv2)] > threshold;
                }
            }
            (grad, hit)
        })
        .reduce(
            || (vec![0.0; nv1], vec![false; nv1]),
            |(mut ga, mut ha), (gb, hb)| {
                for k in 0..nv1 {
                    ga[k] = ga[k].max(gb[k]);
                    ha[k] |= hb[k];
                }
                (ga, ha)
            },
        )
}

/// `sup (|∂x f| + |∇v f|)` over `S_ε = {||v1| - 1| > ε}` for each `ε`.
/// An `S_ε` that misses the support reports 0.
pub fn seps_gradient_monitor(f: &DistributionFunction, epsilons: &[f64], threshold: f64) -> Vec<(f64, f64)> {
    let (grad, hit) = gradient_by_v1(f, threshold);
    let v1s = f.grid.v1.nodes();
    epsilons
        .iter()
        .map(|&eps| {
            let rows = (0..v1s.len()).filter(|&k| (v1s[k].abs() - 1.0).abs() > eps);
            let (sup, touches) = rows.fold((0.0f64, false), |(s, t), k| (s.max(grad[k]), t || hit[k]));
            (eps, if touches { sup } else { 0.0 })
        })
        .collect()
}

/// Largest relative deviation of the total energy from its first value
/// (absolute when the first value is zero).
pub fn energy_drift(records: &[DiagnosticsRecord]) -> f64 {
    let Some(first) = records.first() else {
        return 0.0;
    };
    let e0 = first.total_energy();
    let scale = if e0 != 0.0 { e0.abs() } else { 1.0 };
    records
        .iter()
        .map(|r| (r.total_energy() - e0).abs() / scale)
        .fold(0.0, f64::max)
}

pub const CSV_COLUMNS: [&str; 9] = [
    "time",
    "kinetic_energy",
    "field_energy",
    "total_charge",
    "Q_support",
    "sup_A",
    "gauss_residual",
    "sym_error",
    "min_v1_gap",
];

pub fn csv_header(epsilons: &[f64]) -> String {
    let mut h = CSV_COLUMNS.join(",");
    for e in epsilons {
        write!(h, ",seps_grad_sup:{e}").unwrap();
    }
    h
}

pub fn csv_row(r: &DiagnosticsRecord) -> String {
    let mut row = String::new();
    let scalars = [
        r.time,
        r.kinetic_energy,
        r.field_energy,
        r.total_charge,
        r.q_support,
        r.sup_a,
        r.gauss_residual,
        r.sym_error,
        r.min_v1_gap,
    ];
    for (k, v) in scalars.iter().chain(r.seps_grad_sup.iter().map(|(_, s)| s)).enumerate() {
        if k > 0 {
            row.push(',');
        }
        write!(row, "{v:e}").unwrap();
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::sample_initial_distribution;
    use crate::grid::make_grid;
    use crate::profile::{ProfileParams, ProfileRegistry};
    use crate::solver::advect_x;

    fn sample(name: &str, params: ProfileParams) -> DistributionFunction {
        let g = make_grid([(-8.0, 8.0), (-1.6, 1.6), (-1.6, 1.6)], (64, 32, 32)).unwrap();
        let p = ProfileRegistry::builtin().build(name, &params).unwrap();
        sample_initial_distribution(p.as_ref(), g).unwrap()
    }

    fn cfg(f: &DistributionFunction) -> DiagnosticsConfig {
        DiagnosticsConfig {
            epsilons: vec![0.1, 0.5, 0.8],
            support_threshold: 1e-12 * f.max_value(),
            relativistic: false,
        }
    }

    #[test]
    fn zero_data_record() {
        let f = sample("zero", ProfileParams::default());
        let r = record(&f, &FieldState::zeros(f.grid.x), &Background::zeros(f.grid.x), &cfg(&f));
        assert_eq!(r.q_support, 1.0);
        for v in [
            r.kinetic_energy,
            r.field_energy,
            r.total_charge,
            r.sup_a,
            r.gauss_residual,
            r.sym_error,
            r.min_v1_gap,
        ] {
            assert_eq!(v, 0.0);
        }
        assert!(r.seps_grad_sup.iter().all(|(_, s)| *s == 0.0));
    }

    #[test]
    fn even_data_has_zero_symmetry_error() {
        let f = sample("even-bump", ProfileParams::default());
        let r = record(&f, &FieldState::zeros(f.grid.x), &Background::zeros(f.grid.x), &cfg(&f));
        assert_eq!(r.sym_error, 0.0);
        assert!(r.total_charge > 0.0);
        let f = sample("asymmetric-bump", ProfileParams::default());
        let r = record(&f, &FieldState::zeros(f.grid.x), &Background::zeros(f.grid.x), &cfg(&f));
        assert!(r.sym_error > 0.1);
    }

    #[test]
    fn free_streaming_keeps_kinetic_energy_and_support() {
        let f0 = sample("two-stream", ProfileParams::default().with("v2_drift", 0.0));
        let c = cfg(&f0);
        let fields = FieldState::zeros(f0.grid.x);
        let bg = Background::zeros(f0.grid.x);
        let r0 = record(&f0, &fields, &bg, &c);
        let mut f = f0.clone();
        for _ in 0..6 {
            f = advect_x(&f, 0.125, false);
            let r = record(&f, &fields, &bg, &c);
            let rel = ((r.kinetic_energy - r0.kinetic_energy) / r0.kinetic_energy).abs();
            assert!(rel < 1e-13, "{rel:e}");
            assert_eq!(r.q_support, r0.q_support);
        }
    }

    #[test]
    fn monitor_on_narrow_support_matches_global_sup() {
        let params = ProfileParams::default().with("v1_width", 0.3).with("v2_width", 0.3);
        let f = sample("even-bump", params);
        let m = seps_gradient_monitor(&f, &[0.5, 0.8], 0.0);
        let (grad, _) = gradient_by_v1(&f, 0.0);
        let global = grad.iter().copied().fold(0.0, f64::max);
        assert_eq!(m[0].1, global);
        assert!(m[1].1 <= m[0].1);
    }

    #[test]
    fn monitor_is_monotone_in_eps() {
        let f = sample("two-stream", ProfileParams::default().with("beam_speed", 0.8));
        let eps: Vec<f64> = (1..20).map(|k| k as f64 * 0.05).collect();
        let m = seps_gradient_monitor(&f, &eps, 1e-12);
        for w in m.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
    }

    #[test]
    fn empty_set_reports_zero() {
        // support near |v1| = 1 lies outside S_0.5
        let params = ProfileParams::default().with("v1_center", 1.0).with("v1_width", 0.3);
        let f = sample("even-bump", params);
        let m = seps_gradient_monitor(&f, &[0.1, 0.5], 1e-12);
        assert!(m[0].1 > 0.0);
        assert_eq!(m[1].1, 0.0);
    }

    #[test]
    fn min_gap_and_q_support() {
        let params = ProfileParams::default().with("v1_width", 0.5).with("v2_width", 0.5);
        let f = sample("even-bump", params);
        let r = record(&f, &FieldState::zeros(f.grid.x), &Background::zeros(f.grid.x), &cfg(&f));
        // support nodes have |v1| < 0.5 on a 0.1 grid: largest is 0.4
        assert!((r.min_v1_gap - 0.6).abs() < 1e-12);
        assert!(r.q_support > 1.4 && r.q_support < 1.5 * 2f64.sqrt() + 1.0);
    }

    #[test]
    fn energy_drift_of_constant_series_is_zero() {
        let f = sample("even-bump", ProfileParams::default());
        let r = record(&f, &FieldState::zeros(f.grid.x), &Background::zeros(f.grid.x), &cfg(&f));
        assert_eq!(energy_drift(&[r.clone(), r.clone()]), 0.0);
        let mut later = r.clone();
        later.field_energy += 0.01 * r.total_energy();
        assert!((energy_drift(&[r, later]) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let h = csv_header(&[0.1, 0.5]);
        assert_eq!(
            h,
            "time,kinetic_energy,field_energy,total_charge,Q_support,sup_A,gauss_residual,sym_error,min_v1_gap,seps_grad_sup:0.1,seps_grad_sup:0.5"
        );
        let f = sample("zero", ProfileParams::default());
        let mut c = cfg(&f);
        c.epsilons = vec![0.1, 0.5];
        let r = record(&f, &FieldState::zeros(f.grid.x), &Background::zeros(f.grid.x), &c);
        assert_eq!(csv_row(&r).split(',').count(), 11);
    }
}
