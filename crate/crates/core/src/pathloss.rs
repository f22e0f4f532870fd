//! Piecewise LoS/NLoS path loss model.
//!
//! Distances are kilometers and powers are milliwatts throughout the crate;
//! the amplitude constants are referenced to 1 km. All dB/linear conversion
//! lives here so no other module touches logarithmic units.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{integrate, QuadratureSpec};

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Propagation state of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    Los,
    Nlos,
}

/// Per-segment LoS probability as a function of link distance.
#[derive(Clone)]
pub enum LosProbability {
    Constant(f64),
    /// `intercept + slope * r`, clamped to [0, 1].
    Linear { intercept: f64, slope: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl LosProbability {
    fn eval(&self, r: f64) -> f64 {
        let v = match self {
            LosProbability::Constant(c) => *c,
            LosProbability::Linear { intercept, slope } => intercept + slope * r,
            LosProbability::Custom(f) => f(r),
        };
        v.clamp(0.0, 1.0)
    }

    /// `∫ p(u) 2π u du` over `[lo, hi]`, closed form where possible.
    fn cum_intensity(&self, lo: f64, hi: f64) -> f64 {
        use std::f64::consts::PI;
        if hi <= lo {
            return 0.0;
        }
        match self {
            LosProbability::Constant(c) => c * PI * (hi * hi - lo * lo),
            LosProbability::Linear { intercept, slope } => {
                // The clamp only matters where the raw line leaves [0, 1];
                // split at the crossing radii and integrate the clamped parts.
                let mut total = 0.0;
                let mut xs = vec![lo, hi];
                for bound in [0.0, 1.0] {
                    if slope.abs() > 0.0 {
                        let x = (bound - intercept) / slope;
                        if x > lo && x < hi {
                            xs.push(x);
                        }
                    }
                }
                xs.sort_by(f64::total_cmp);
                for w in xs.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let mid = 0.5 * (a + b);
                    let raw = intercept + slope * mid;
                    total += if raw <= 0.0 {
                        0.0
                    } else if raw >= 1.0 {
                        PI * (b * b - a * a)
                    } else {
                        PI * intercept * (b * b - a * a) + 2.0 * PI * slope / 3.0 * (b * b * b - a * a * a)
                    };
                }
                total
            }
            LosProbability::Custom(f) => {
                let spec = QuadratureSpec::default();
                integrate(|u| f(u).clamp(0.0, 1.0) * 2.0 * PI * u, lo, hi, &spec)
                    .expect("LoS probability integrand is bounded and smooth")
            }
        }
    }
}

impl fmt::Debug for LosProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LosProbability::Constant(c) => write!(f, "Constant({c})"),
            LosProbability::Linear { intercept, slope } => {
                write!(f, "Linear {{ intercept: {intercept}, slope: {slope} }}")
            }
            LosProbability::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// One piece of the path loss model, valid on `(lower, upper_km]`.
#[derive(Debug, Clone)]
pub struct Segment {
    /// Break distance ending this piece; `f64::INFINITY` on the last piece.
    pub upper_km: f64,
    pub los_amplitude: f64,
    pub los_exponent: f64,
    pub nlos_amplitude: f64,
    pub nlos_exponent: f64,
    pub los_probability: LosProbability,
}

impl Segment {
    fn coeffs(&self, path: Path) -> (f64, f64) {
        match path {
            Path::Los => (self.los_amplitude, self.los_exponent),
            Path::Nlos => (self.nlos_amplitude, self.nlos_exponent),
        }
    }
}

/// The stacked piecewise path loss model.
#[derive(Debug, Clone)]
pub struct PathLossModel {
    segments: Vec<Segment>,
    /// Prefix of `∫ Pr^L(u) 2π u du` at each segment's lower break.
    cum_los_prefix: Vec<f64>,
    /// Radius beyond which the LoS probability is identically zero
    /// (`f64::INFINITY` if LoS remains possible at any distance).
    los_support_end: f64,
}

const VALIDATION_SAMPLES: usize = 10_000;

/// LoS-dominance (`ζ^L >= ζ^NL`) is only checked at and beyond 10 m. With a
/// steeper NLoS exponent the two power laws cross somewhere in the near
/// field (3.1 m for the case-study constants), below the range where this
/// kind of model is meaningful. None of the equivalent-radius machinery
/// depends on the ordering; `r₁ <= r <= r₂` is only guaranteed where the
/// dominance holds.
const DOMINANCE_FLOOR_KM: f64 = 0.01;

impl PathLossModel {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidModel("at least one segment is required".into()));
        }
        let last = segments.last().expect("non-empty");
        if !last.upper_km.is_infinite() {
            return Err(Error::InvalidModel(
                "the last segment must extend to infinity".into(),
            ));
        }
        let mut prev_upper = 0.0;
        for seg in &segments {
            if !(seg.upper_km > prev_upper) {
                return Err(Error::InvalidModel(
                    "break distances must be strictly increasing".into(),
                ));
            }
            prev_upper = seg.upper_km;
            if !(seg.los_amplitude > 0.0) || !(seg.nlos_amplitude > 0.0) {
                return Err(Error::InvalidModel("amplitudes must be positive".into()));
            }
            if !(seg.los_exponent > 0.0) || !(seg.nlos_exponent > 0.0) {
                return Err(Error::InvalidModel("exponents must be positive".into()));
            }
        }
        if last.los_exponent <= 2.0 {
            return Err(Error::ExponentTooSmall(last.los_exponent));
        }
        if last.nlos_exponent <= 2.0 {
            return Err(Error::ExponentTooSmall(last.nlos_exponent));
        }

        let mut cum_los_prefix = vec![0.0];
        let mut lower = 0.0;
        for seg in &segments[..segments.len() - 1] {
            let prev = *cum_los_prefix.last().expect("non-empty prefix");
            cum_los_prefix.push(prev + seg.los_probability.cum_intensity(lower, seg.upper_km));
            lower = seg.upper_km;
        }

        let mut model = Self {
            segments,
            cum_los_prefix,
            los_support_end: f64::INFINITY,
        };
        model.validate_shape()?;
        model.los_support_end = model.compute_los_support_end();
        Ok(model)
    }

    /// Walk back from the tail: LoS support ends where a trailing run of
    /// identically-zero probability pieces begins. Relies on the validated
    /// non-increase of the stacked probability.
    fn compute_los_support_end(&self) -> f64 {
        let mut support = f64::INFINITY;
        let lowers: Vec<f64> = std::iter::once(0.0)
            .chain(self.segments.iter().map(|s| s.upper_km))
            .take(self.segments.len())
            .collect();
        for (seg, &lo) in self.segments.iter().zip(lowers.iter()).rev() {
            let hi = if seg.upper_km.is_infinite() {
                (lo * 4.0).max(100.0)
            } else {
                seg.upper_km
            };
            let probes = [lo + (hi - lo) * 1e-9, 0.5 * (lo + hi), hi];
            if probes.iter().all(|&r| seg.los_probability.eval(r) <= 0.0) {
                support = lo;
            } else {
                break;
            }
        }
        support
    }

    /// Sampled validation of the invariants the implicit inverses rely on:
    /// strictly decreasing stacked gains, LoS never weaker than NLoS, and a
    /// non-increasing LoS probability in [0, 1].
    fn validate_shape(&self) -> Result<()> {
        let mut prev_l = f64::INFINITY;
        let mut prev_nl = f64::INFINITY;
        let mut prev_p = 1.0f64;
        let mut lower = 0.0f64;
        for seg in &self.segments {
            let hi = if seg.upper_km.is_infinite() {
                (lower * 10.0).max(100.0)
            } else {
                seg.upper_km
            };
            let lo = if lower > 0.0 { lower } else { hi * 1e-6 };
            let (llo, lhi) = (lo.ln(), hi.ln());
            for i in 0..=VALIDATION_SAMPLES {
                let r = (llo + (lhi - llo) * i as f64 / VALIDATION_SAMPLES as f64).exp();
                let zl = seg.los_amplitude * r.powf(-seg.los_exponent);
                let znl = seg.nlos_amplitude * r.powf(-seg.nlos_exponent);
                if zl >= prev_l || znl >= prev_nl {
                    return Err(Error::InvalidModel(format!(
                        "stacked path gain is not strictly decreasing near r = {r} km"
                    )));
                }
                if r >= DOMINANCE_FLOOR_KM && znl > zl * (1.0 + 1e-12) {
                    return Err(Error::InvalidModel(format!(
                        "NLoS gain exceeds LoS gain at r = {r} km"
                    )));
                }
                let p = seg.los_probability.eval(r);
                if p > prev_p + 1e-9 {
                    return Err(Error::InvalidModel(format!(
                        "LoS probability increases near r = {r} km"
                    )));
                }
                prev_l = zl;
                prev_nl = znl;
                prev_p = p;
            }
            lower = hi;
        }
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Index of the segment containing `r` (pieces cover `(d_{n-1}, d_n]`).
    pub fn segment_index(&self, r: f64) -> usize {
        self.segments
            .partition_point(|seg| seg.upper_km < r)
            .min(self.segments.len() - 1)
    }

    /// Radius beyond which LoS transmission is impossible.
    pub fn los_support_end(&self) -> f64 {
        self.los_support_end
    }

    /// Break distances interior to the model (finite `d_n`).
    pub fn breaks(&self) -> Vec<f64> {
        self.segments
            .iter()
            .map(|s| s.upper_km)
            .filter(|u| u.is_finite())
            .collect()
    }

    /// Stacked path gain `ζ^Path(r) = A_n r^{-α_n}`.
    pub fn zeta(&self, path: Path, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::NonPositiveDistance(r));
        }
        Ok(self.zeta_raw(path, r))
    }

    #[inline]
    pub(crate) fn zeta_raw(&self, path: Path, r: f64) -> f64 {
        let (a, alpha) = self.segments[self.segment_index(r)].coeffs(path);
        a * r.powf(-alpha)
    }

    /// Stacked LoS probability at distance `r >= 0`.
    pub fn los_probability(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        self.segments[self.segment_index(r)].los_probability.eval(r)
    }

    /// `∫_0^r Pr^L(u) 2π u du` (BS density factored out).
    pub fn cum_los_intensity(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let idx = self.segment_index(r);
        let lower = if idx == 0 { 0.0 } else { self.segments[idx - 1].upper_km };
        self.cum_los_prefix[idx] + self.segments[idx].los_probability.cum_intensity(lower, r)
    }

    /// `∫_0^r (1 - Pr^L(u)) 2π u du`.
    pub fn cum_nlos_intensity(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        std::f64::consts::PI * r * r - self.cum_los_intensity(r)
    }

    /// Inverse of the stacked gain: smallest `r` with `ζ^Path(r) <= target`.
    ///
    /// Uses the per-segment closed form; a target falling inside a downward
    /// jump of the stacked function maps to the break distance itself.
    pub(crate) fn zeta_inverse(&self, path: Path, target: f64) -> f64 {
        if !(target > 0.0) {
            return f64::INFINITY;
        }
        let mut lower = 0.0f64;
        for seg in &self.segments {
            let (a, alpha) = seg.coeffs(path);
            let x = (a / target).powf(1.0 / alpha);
            if x > lower && x <= seg.upper_km {
                return x;
            }
            if x <= lower {
                return lower;
            }
            lower = seg.upper_km;
        }
        unreachable!("the last segment extends to infinity");
    }

    /// Equivalent-gain NLoS radius: the `r₁` with `ζ^NL(r₁) = ζ_n^L(r)`.
    pub fn r1_of(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::NonPositiveDistance(r));
        }
        Ok(self.zeta_inverse(Path::Nlos, self.zeta_raw(Path::Los, r)))
    }

    /// Equivalent-gain LoS radius: the `r₂` with `ζ^L(r₂) = ζ_n^NL(r)`.
    pub fn r2_of(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::NonPositiveDistance(r));
        }
        Ok(self.zeta_inverse(Path::Los, self.zeta_raw(Path::Nlos, r)))
    }
}

/// Two-piece model with a linear LoS probability cutting off at `d1_km` and
/// distance-independent LoS/NLoS constants across both pieces.
pub fn make_two_piece_linear(
    d1_km: f64,
    los_amplitude: f64,
    los_exponent: f64,
    nlos_amplitude: f64,
    nlos_exponent: f64,
) -> Result<PathLossModel> {
    if !(d1_km > 0.0) {
        return Err(Error::InvalidModel("d1 must be positive".into()));
    }
    PathLossModel::new(vec![
        Segment {
            upper_km: d1_km,
            los_amplitude,
            los_exponent,
            nlos_amplitude,
            nlos_exponent,
            los_probability: LosProbability::Linear {
                intercept: 1.0,
                slope: -1.0 / d1_km,
            },
        },
        Segment {
            upper_km: f64::INFINITY,
            los_amplitude,
            los_exponent,
            nlos_amplitude,
            nlos_exponent,
            los_probability: LosProbability::Constant(0.0),
        },
    ])
}

/// The two-piece linear-LoS-probability case study model:
/// `d1 = 0.3 km`, `α^L = 2.09`, `α^NL = 3.75`, `A^L = 10^-10.38`,
/// `A^NL = 10^-14.54`.
pub fn make_3gpp_case1() -> PathLossModel {
    make_two_piece_linear(0.3, 10f64.powf(-10.38), 2.09, 10f64.powf(-14.54), 3.75)
        .expect("the case-study constants form a valid model")
}

/// Single-slope baseline: one NLoS-only piece, under which smallest-path-loss
/// association coincides with nearest-BS association.
pub fn make_single_slope(alpha: f64, amplitude: f64) -> Result<PathLossModel> {
    if alpha <= 2.0 {
        return Err(Error::ExponentTooSmall(alpha));
    }
    if !(amplitude > 0.0) {
        return Err(Error::InvalidModel("amplitude must be positive".into()));
    }
    PathLossModel::new(vec![Segment {
        upper_km: f64::INFINITY,
        los_amplitude: amplitude,
        los_exponent: alpha,
        nlos_amplitude: amplitude,
        nlos_exponent: alpha,
        los_probability: LosProbability::Constant(0.0),
    }])
}

/// Densities and powers of the deployment under study.
#[derive(Debug, Clone, Copy)]
pub struct NetworkConfig {
    /// Deployed BS density in BSs/km².
    pub lambda_bs: f64,
    /// Active UE density in UEs/km²; `f64::INFINITY` models the fully loaded
    /// network in which every BS is active.
    pub rho_ue: f64,
    pub tx_power_mw: f64,
    pub noise_power_mw: f64,
}

impl NetworkConfig {
    pub fn new(lambda_bs: f64, rho_ue: f64, tx_power_mw: f64, noise_power_mw: f64) -> Result<Self> {
        if !(lambda_bs > 0.0) {
            return Err(Error::InvalidModel("lambda_bs must be positive".into()));
        }
        if !(rho_ue >= 0.0) {
            return Err(Error::InvalidModel("rho_ue must be non-negative".into()));
        }
        if !(tx_power_mw > 0.0) || !(noise_power_mw > 0.0) {
            return Err(Error::InvalidModel("powers must be positive".into()));
        }
        Ok(Self {
            lambda_bs,
            rho_ue,
            tx_power_mw,
            noise_power_mw,
        })
    }

    pub fn from_dbm(lambda_bs: f64, rho_ue: f64, tx_power_dbm: f64, noise_dbm: f64) -> Result<Self> {
        Self::new(lambda_bs, rho_ue, dbm_to_mw(tx_power_dbm), dbm_to_mw(noise_dbm))
    }
}
