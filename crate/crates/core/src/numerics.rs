//! Shared numerical kernels: adaptive quadrature on finite and semi-infinite
//! intervals, bracketed root finding and scalar minimization.
//!
//! All routines are pure functions of their inputs and safe to call from any
//! number of threads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerances and budgets for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Semi-infinite integrals are truncated once the integrand falls below
    /// this fraction of its running peak.
    pub tail_cutoff_epsilon: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            tail_cutoff_epsilon: 1e-12,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tols(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) || self.max_subdivisions < 1 {
            return Err(Error::InvalidModel(
                "quadrature spec requires rel_tol > 0, abs_tol > 0, max_subdivisions >= 1".into(),
            ));
        }
        Ok(())
    }

    fn tolerance(&self, estimate: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * estimate.abs())
    }
}

// 15-point Kronrod / 7-point Gauss pair on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod panel. Returns (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_gauss = f_center * WG[3];
    let mut res_kronrod = f_center * WGK[7];
    let mut res_abs = res_kronrod.abs();
    let mut fv = [0.0f64; 15];
    fv[7] = f_center;

    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        res_kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let integral = res_kronrod * half;
    res_abs *= half.abs();
    res_asc *= half.abs();

    let mut err = ((res_kronrod - res_gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (integral, err)
}

struct Panel {
    a: f64,
    b: f64,
    integral: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn integrate_finite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    let (integral, error) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, integral, error });
    let mut total_i = integral;
    let mut total_e = error;

    while total_e > spec.tolerance(total_i) {
        if heap.len() >= spec.max_subdivisions {
            return Err(Error::NonConvergence(format!(
                "estimated error {:.3e} above tolerance {:.3e} after {} subdivisions on [{}, {}]",
                total_e,
                spec.tolerance(total_i),
                heap.len(),
                a,
                b
            )));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // Interval no longer splittable in f64; accept what we have.
            heap.push(worst);
            break;
        }
        let (i1, e1) = gk15(f, worst.a, mid);
        let (i2, e2) = gk15(f, mid, worst.b);
        total_i += i1 + i2 - worst.integral;
        total_e += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, integral: i1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, integral: i2, error: e2 });
    }
    Ok(total_i)
}

fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: &F, a: f64, spec: &QuadratureSpec) -> Result<f64> {
    // Scan geometrically for the radius where the integrand has decayed below
    // tail_cutoff_epsilon of its running peak.
    let step0 = a.abs().max(1e-3);
    let mut peak = 0.0f64;
    let mut cutoff = None;
    for j in 0..64u32 {
        let x = a + step0 * (2.0f64).powi(j as i32);
        let v = f(x).abs();
        peak = peak.max(v);
        if v <= spec.tail_cutoff_epsilon * peak {
            cutoff = Some(x);
            break;
        }
    }
    let mut t = cutoff.ok_or_else(|| {
        Error::NonConvergence("integrand tail not detected on the semi-infinite interval".into())
    })?;

    // Integrate to the detected radius, then keep doubling it until the added
    // tail contribution is below tolerance.
    let mut total = integrate_finite(f, a, t, spec)?;
    for _ in 0..32 {
        let tail = integrate_finite(f, t, 2.0 * t, spec)?;
        total += tail;
        t *= 2.0;
        if tail.abs() <= spec.tolerance(total) {
            return Ok(total);
        }
    }
    Err(Error::NonConvergence(
        "semi-infinite tail contribution did not fall below tolerance".into(),
    ))
}

/// Integrate `f` over `(a, b)`; `b` may be `f64::INFINITY`.
///
/// Endpoints themselves are never evaluated, so integrable endpoint
/// singularities are tolerated.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(a < b) {
        return Err(Error::InvalidInterval);
    }
    if b.is_infinite() {
        integrate_semi_infinite(&f, a, spec)
    } else {
        integrate_finite(&f, a, b, spec)
    }
}

/// Integrate with mandatory split points, e.g. at path loss segment breaks
/// where the integrand has a kink or a jump.
pub fn integrate_with_splits<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    splits: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(a < b) {
        return Err(Error::InvalidInterval);
    }
    let mut pts: Vec<f64> = splits
        .iter()
        .copied()
        .filter(|s| s.is_finite() && *s > a && *s < b)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut total = 0.0;
    let mut lo = a;
    for s in pts {
        total += integrate(&f, lo, s, spec)?;
        lo = s;
    }
    total += integrate(&f, lo, b, spec)?;
    Ok(total)
}

/// Bisection root finder on `[lo, hi]`, requiring a sign change.
///
/// Returns the bracket midpoint once the bracket width drops to `tol`.
pub fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidInterval);
    }
    let mut lo = lo;
    let mut hi = hi;
    let flo = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    let fhi = f(hi);
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket);
    }
    let lo_sign = flo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
///
/// Unimodality is the caller's responsibility; for a non-unimodal `f` the
/// result is some local minimum.
pub fn minimize_scalar<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidInterval);
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
///
/// Monotone input data produces a monotone interpolant, which is what the
/// tabulated distance CDFs need. Outside the node range the end values are
/// held constant.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// Hermite interpolant with caller-supplied node derivatives, clamped to
    /// the Fritsch-Carlson region so monotone data stays monotone. Exact
    /// derivatives (when available) give fourth-order accuracy.
    pub fn with_slopes(xs: Vec<f64>, ys: Vec<f64>, mut slopes: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || slopes.len() != n {
            return Err(Error::InvalidModel(
                "interpolation needs at least two nodes and matching lengths".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidModel(
                "interpolation abscissae must be strictly increasing".into(),
            ));
        }
        for i in 0..n - 1 {
            let delta = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            if delta == 0.0 {
                slopes[i] = 0.0;
                slopes[i + 1] = 0.0;
            } else {
                // Sufficient condition for monotonicity: slope/secant in [0, 3].
                for m in [i, i + 1] {
                    let ratio = slopes[m] / delta;
                    if ratio < 0.0 {
                        slopes[m] = 0.0;
                    } else if ratio > 3.0 {
                        slopes[m] = 3.0 * delta;
                    }
                }
            }
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::InvalidModel(
                "interpolation needs at least two nodes and matching lengths".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidModel(
                "interpolation abscissae must be strictly increasing".into(),
            ));
        }

        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        let mut m = vec![0.0f64; n];
        m[0] = edge_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], delta.get(1).copied().unwrap_or(delta[0]));
        m[n - 1] = edge_slope(
            h[n - 2],
            if n >= 3 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n >= 3 { delta[n - 3] } else { delta[n - 2] },
        );
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                m[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        Ok(Self { xs, ys, slopes: m })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }

    pub fn max_x(&self) -> f64 {
        *self.xs.last().expect("at least two nodes")
    }

    pub fn max_y(&self) -> f64 {
        *self.ys.last().expect("at least two nodes")
    }
}

fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    // Three-point one-sided estimate, clamped to keep monotonicity.
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// `n` logarithmically spaced values over `[lo, hi]`, inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2, "logspace needs 0 < lo < hi and n >= 2");
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
