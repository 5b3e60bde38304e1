//! Natural cubic spline interpolation on uniform 1D data.
//!
//! All positions are in index units: node `k` sits at `k`. Samples outside
//! `[0, len - 1]` read as zero, which matches the compact-support invariant
//! of everything this module is used on.

/// Precomputed Thomas-algorithm factors for the natural spline system
/// `M[i-1] + 4 M[i] + M[i+1] = 6 (y[i-1] - 2 y[i] + y[i+1])`, `M[0] = M[n-1] = 0`.
#[derive(Clone, Debug)]
pub struct SplineFactors {
    len: usize,
    inv: Vec<f64>,
}

impl SplineFactors {
    pub fn new(len: usize) -> Self {
        let mut inv = vec![0.0; len];
        if len >= 3 {
            let mut prev = 0.0;
            for slot in inv.iter_mut().take(len - 1).skip(1) {
                let c = 1.0 / (4.0 - prev);
                *slot = c;
                prev = c;
            }
        }
        Self { len, inv }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Writes the second derivatives of the natural spline through `y` into `m`.
    pub fn second_derivatives(&self, y: &[f64], m: &mut [f64]) {
        let n = self.len;
        debug_assert_eq!(y.len(), n);
        debug_assert_eq!(m.len(), n);
        m.fill(0.0);
        if n < 3 {
            return;
        }
        let mut prev = 0.0;
        for i in 1..n - 1 {
            let rhs = 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]);
            let d = (rhs - prev) * self.inv[i];
            m[i] = d;
            prev = d;
        }
        for i in (1..n - 2).rev() {
            m[i] -= self.inv[i] * m[i + 1];
        }
    }
}

#[inline]
fn eval_cell(y: &[f64], m: &[f64], j: usize, t: f64) -> f64 {
    let a = 1.0 - t;
    a * y[j] + t * y[j + 1] + ((a * a * a - a) * m[j] + (t * t * t - t) * m[j + 1]) / 6.0
}

/// Shifts `y` by `shift` cells (`out[i] = s(i - shift)`) for `shift >= 0`.
fn shift_nonnegative(factors: &SplineFactors, y: &[f64], shift: f64, out: &mut [f64], m: &mut [f64]) {
    let n = y.len();
    let whole = shift.floor();
    let alpha = shift - whole;
    let whole = whole as usize;
    if alpha == 0.0 {
        for (i, o) in out.iter_mut().enumerate() {
            *o = if i >= whole { y[i - whole] } else { 0.0 };
        }
        return;
    }
    factors.second_derivatives(y, m);
    // p = i - whole - alpha = (i - whole - 1) + (1 - alpha)
    let t = 1.0 - alpha;
    let a = alpha;
    let wy0 = a;
    let wy1 = t;
    let wm0 = (a * a * a - a) / 6.0;
    let wm1 = (t * t * t - t) / 6.0;
    for (i, o) in out.iter_mut().enumerate() {
        *o = if i > whole && i - whole < n {
            let j = i - whole - 1;
            wy0 * y[j] + wy1 * y[j + 1] + wm0 * m[j] + wm1 * m[j + 1]
        } else {
            0.0
        };
    }
}

/// Shifts a line of samples by a constant number of cells with scratch
/// buffers supplied by the caller.
///
/// A negative shift is applied as a positive shift of the reversed line so
/// that `shift_line(rev(y), -s) == rev(shift_line(y, s))` holds bitwise.
pub fn shift_line(factors: &SplineFactors, y: &[f64], shift: f64, out: &mut [f64], scratch: &mut Scratch) {
    let n = y.len();
    debug_assert_eq!(out.len(), n);
    debug_assert_eq!(factors.len(), n);
    if shift == 0.0 {
        out.copy_from_slice(y);
        return;
    }
    scratch.ensure(n);
    if shift > 0.0 {
        shift_nonnegative(factors, y, shift, out, &mut scratch.m[..n]);
    } else {
        let rev = &mut scratch.rev[..n];
        for (r, v) in rev.iter_mut().zip(y.iter().rev()) {
            *r = *v;
        }
        let tmp = &mut scratch.tmp[..n];
        shift_nonnegative(factors, rev, -shift, tmp, &mut scratch.m[..n]);
        for (o, v) in out.iter_mut().zip(tmp.iter().rev()) {
            *o = *v;
        }
    }
}

/// Per-thread scratch storage for [`shift_line`].
#[derive(Default, Debug)]
pub struct Scratch {
    m: Vec<f64>,
    rev: Vec<f64>,
    tmp: Vec<f64>,
}

impl Scratch {
    fn ensure(&mut self, n: usize) {
        if self.m.len() < n {
            self.m.resize(n, 0.0);
            self.rev.resize(n, 0.0);
            self.tmp.resize(n, 0.0);
        }
    }
}

/// Cubic-spline evaluation of `profile` shifted by `shift` cells.
///
/// Integer shifts reduce to index moves and are exact; zero returns the input.
pub fn interpolate_1d(profile: &[f64], shift: f64) -> Vec<f64> {
    let factors = SplineFactors::new(profile.len());
    let mut out = vec![0.0; profile.len()];
    let mut scratch = Scratch::default();
    shift_line(&factors, profile, shift, &mut out, &mut scratch);
    out
}

/// Natural cubic spline through uniformly spaced samples, evaluable anywhere.
#[derive(Clone, Debug)]
pub struct UniformSpline {
    origin: f64,
    step: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl UniformSpline {
    pub fn new(origin: f64, step: f64, y: Vec<f64>) -> Self {
        let factors = SplineFactors::new(y.len());
        let mut m = vec![0.0; y.len()];
        factors.second_derivatives(&y, &mut m);
        Self { origin, step, y, m }
    }

    /// Index-space evaluation; zero outside the sampled range.
    pub fn eval_index(&self, p: f64) -> f64 {
        let n = self.y.len();
        if !(p >= 0.0 && p <= (n - 1) as f64) {
            return 0.0;
        }
        let j = (p.floor() as usize).min(n - 2);
        eval_cell(&self.y, &self.m, j, p - j as f64)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_index((x - self.origin) / self.step)
    }

    pub fn contains(&self, x: f64) -> bool {
        let p = (x - self.origin) / self.step;
        p >= 0.0 && p <= (self.y.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }
}

/// Evaluates the spline through `y` at arbitrary index positions (zero outside).
pub fn evaluate_at(factors: &SplineFactors, y: &[f64], positions: &[f64], out: &mut [f64], m: &mut [f64]) {
    let n = y.len();
    factors.second_derivatives(y, m);
    for (o, &p) in out.iter_mut().zip(positions) {
        *o = if p >= 0.0 && p <= (n - 1) as f64 {
            let j = (p.floor() as usize).min(n - 2);
            eval_cell(y, m, j, p - j as f64)
        } else {
            0.0
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian(n: usize, h: f64, center: f64, sigma: f64) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let x = k as f64 * h - center;
                (-x * x / (2.0 * sigma * sigma)).exp()
            })
            .collect()
    }

    #[test]
    fn zero_shift_is_identity() {
        let y = gaussian(50, 0.1, 2.5, 0.4);
        assert_eq!(interpolate_1d(&y, 0.0), y);
    }

    #[test]
    fn whole_cell_shift_is_index_move() {
        let mut y = vec![0.0; 40];
        for (k, v) in y.iter_mut().enumerate().skip(10).take(15) {
            *v = ((k as f64) * 0.37).sin().abs() + 0.1;
        }
        let right = interpolate_1d(&y, 1.0);
        let left = interpolate_1d(&y, -1.0);
        for i in 1..39 {
            assert_eq!(right[i].to_bits(), y[i - 1].to_bits());
            assert_eq!(left[i].to_bits(), y[i + 1].to_bits());
        }
        let three = interpolate_1d(&y, 3.0);
        for i in 3..40 {
            assert_eq!(three[i], y[i - 3]);
        }
    }

    #[test]
    fn shifted_gaussian_fourth_order() {
        // Closed-form oracle: exp(-(x - a)^2 / 2σ²) sampled at the shifted nodes.
        let err = |n: usize| {
            let len = 6.0;
            let h = len / n as f64;
            let y = gaussian(n + 1, h, 3.0, 0.35);
            let shift = 0.37;
            let out = interpolate_1d(&y, shift);
            let exact = gaussian(n + 1, h, 3.0 + shift * h, 0.35);
            out.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let e1 = err(60);
        let e2 = err(120);
        let e3 = err(240);
        assert!(e1 < 1e-4, "{e1}");
        let r1 = e1 / e2;
        let r2 = e2 / e3;
        assert!(r1 > 12.0 && r2 > 12.0, "ratios {r1} {r2}");
    }

    #[test]
    fn mass_conserved_for_compact_data() {
        let n = 80;
        let y: Vec<f64> = (0..n)
            .map(|k| {
                let r = (k as f64 - 40.0) / 12.0;
                if r.abs() < 1.0 {
                    (1.0 - r * r).powi(6)
                } else {
                    0.0
                }
            })
            .collect();
        let before: f64 = y.iter().sum();
        for shift in [0.3, -0.71, 1.45, -2.2] {
            let after: f64 = interpolate_1d(&y, shift).iter().sum();
            assert!(
                ((after - before) / before).abs() < 1e-13,
                "{shift}: {after} vs {before}"
            );
        }
    }

    #[test]
    fn uniform_spline_reproduces_nodes_and_lines() {
        let y: Vec<f64> = (0..20).map(|k| 0.5 + 0.25 * k as f64).collect();
        let s = UniformSpline::new(-1.0, 0.5, y.clone());
        for (k, v) in y.iter().enumerate() {
            assert!((s.eval(-1.0 + 0.5 * k as f64) - v).abs() < 1e-14);
        }
        // linear data is reproduced exactly by a natural spline
        assert!((s.eval(2.3) - (0.5 + 0.25 * (3.3 / 0.5))).abs() < 1e-13);
        assert_eq!(s.eval(-1.5), 0.0);
        assert_eq!(s.eval(100.0), 0.0);
    }

    proptest! {
        #[test]
        fn reversal_equivariance_is_bitwise(
            data in proptest::collection::vec(-1.0f64..1.0, 8..40),
            shift in -0.999f64..0.999,
        ) {
            let rev: Vec<f64> = data.iter().rev().copied().collect();
            let a = interpolate_1d(&data, shift);
            let b = interpolate_1d(&rev, -shift);
            for (x, y) in a.iter().rev().zip(&b) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }

        #[test]
        fn linear_in_data(
            a in proptest::collection::vec(-1.0f64..1.0, 16),
            b in proptest::collection::vec(-1.0f64..1.0, 16),
            alpha in -2.0f64..2.0,
            shift in -0.99f64..0.99,
        ) {
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + y).collect();
            let lhs = interpolate_1d(&mix, shift);
            let ia = interpolate_1d(&a, shift);
            let ib = interpolate_1d(&b, shift);
            for i in 0..16 {
                prop_assert!((lhs[i] - (alpha * ia[i] + ib[i])).abs() < 1e-12);
            }
        }
    }
}
