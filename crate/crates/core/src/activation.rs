//! Activated-BS density: how many base stations actually serve at least one
//! user when idle ones are switched off.
//!
//! Exact closed forms do not exist under smallest-path-loss association; the
//! module provides the nearest-BS approximation `λ₀(q)`, a rigorous upper
//! bound built from the probability that a BS serves nobody, the nearest-BS
//! lower bound, and an offline MMSE calibration of the exponent `q`.

use std::f64::consts::PI;

use crate::association::DistanceDistributions;
use crate::error::{Error, Result};
use crate::numerics::{find_root, integrate_with_splits, minimize_scalar, QuadratureSpec};
use crate::pathloss::PathLossModel;

/// The classical Voronoi-cell load exponent for nearest-BS association.
pub const Q_NEAREST: f64 = 3.5;

/// Upper limit of the calibration search when `λ₀(q) = λ̃^UB` has no finite
/// solution (the bound is the `q → ∞` limit of `λ₀`).
const Q_SEARCH_CAP: f64 = 50.0;

/// Nearest-BS activated-density approximation
/// `λ₀(q) = λ [1 - (1 + ρ/(qλ))^(-q)]`.
pub fn lambda0(lambda_bs: f64, rho_ue: f64, q: f64) -> f64 {
    debug_assert!(lambda_bs > 0.0 && rho_ue >= 0.0 && q > 0.0);
    if rho_ue.is_infinite() {
        return lambda_bs;
    }
    lambda_bs * (1.0 - (1.0 + rho_ue / (q * lambda_bs)).powf(-q))
}

/// Probability that a user at distance `r` from a given BS is *not* served
/// by it: some other BS offers a larger gain on either branch.
pub fn prob_not_associated_given_r(dist: &DistanceDistributions, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveDistance(r));
    }
    Ok(prob_not_associated_raw(dist, r))
}

fn prob_not_associated_raw(dist: &DistanceDistributions, r: f64) -> f64 {
    use crate::pathloss::Path::{Los, Nlos};
    let model = dist.model();
    let r1 = model.r1_of(r).expect("r > 0");
    let r2 = model.r2_of(r).expect("r > 0");
    let p = model.los_probability(r);
    let v = (dist.cdf_serving_distance(Los, r) + dist.cdf_serving_distance(Nlos, r1)) * p
        + (dist.cdf_serving_distance(Los, r2) + dist.cdf_serving_distance(Nlos, r)) * (1.0 - p);
    v.clamp(0.0, 1.0)
}

/// Upper bound on the activated density: `λ (1 - Q^off)` where `Q^off` is the
/// probability that a given BS serves no user at all.
///
/// The Poisson sum over the user count collapses analytically to
/// `Q^off = exp(-2πρ ∫₀^∞ (1 - Pr[not associated | r]) r dr)`; summing the
/// series term by term would overflow for any realistic window radius.
pub fn lambda_tilde_upper(dist: &DistanceDistributions, rho_ue: f64) -> Result<f64> {
    let lambda = dist.lambda_bs();
    if rho_ue == 0.0 {
        return Ok(0.0);
    }
    if rho_ue.is_infinite() {
        return Ok(lambda);
    }
    if !(rho_ue > 0.0) {
        return Err(Error::InvalidModel("rho_ue must be non-negative".into()));
    }

    // Truncate where the association probability has effectively vanished.
    let mut hi = dist.r_max();
    for _ in 0..60 {
        if 1.0 - prob_not_associated_raw(dist, hi) < 1e-12 {
            break;
        }
        hi *= 2.0;
    }

    let model = dist.model();
    let mut splits = model.breaks();
    for d in model.breaks() {
        splits.push(model.r1_of(d)?);
        splits.push(model.r2_of(d)?);
    }
    splits.push(dist.r_max());

    let spec = QuadratureSpec::with_tols(1e-10, 1e-14);
    let integral = integrate_with_splits(
        |r| (1.0 - prob_not_associated_raw(dist, r)) * r,
        0.0,
        hi,
        &splits,
        &spec,
    )?;
    let q_off = (-2.0 * PI * rho_ue * integral).exp();
    Ok(lambda * (1.0 - q_off))
}

/// Lower bound on the activated density: the nearest-BS value `λ₀(3.5)`.
pub fn lambda_tilde_lower(lambda_bs: f64, rho_ue: f64) -> f64 {
    lambda0(lambda_bs, rho_ue, Q_NEAREST)
}

/// Bundle of the three activated-density estimates for one operating point.
#[derive(Debug, Clone, Copy)]
pub struct ActivationEstimate {
    pub lambda_bs: f64,
    pub rho_ue: f64,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub approx: f64,
    pub q_used: f64,
}

impl ActivationEstimate {
    pub fn compute(dist: &DistanceDistributions, rho_ue: f64, q: f64) -> Result<Self> {
        let lambda_bs = dist.lambda_bs();
        let est = Self {
            lambda_bs,
            rho_ue,
            upper_bound: lambda_tilde_upper(dist, rho_ue)?,
            lower_bound: lambda_tilde_lower(lambda_bs, rho_ue),
            approx: lambda0(lambda_bs, rho_ue, q),
            q_used: q,
        };
        let tol = 1e-9 * lambda_bs.max(1.0);
        if est.lower_bound > est.approx + tol
            || est.approx > est.upper_bound + tol
            || est.upper_bound > lambda_bs + tol
        {
            return Err(Error::NumericalInconsistency(format!(
                "activated-density ordering violated: LB {} approx {} UB {} lambda {}",
                est.lower_bound, est.approx, est.upper_bound, lambda_bs
            )));
        }
        Ok(est)
    }
}

/// Offline MMSE calibration of `q`: minimizes the squared deviation between
/// `λ₀(λᵢ, ρ, q)` and the simulated activated densities across the grid.
///
/// The search interval is `[3.5, q_hi]` where `q_hi` solves
/// `λ₀(q_hi) = λ̃^UB` at the largest grid density, capped at 50 when no
/// solution exists below. The objective is assumed unimodal in `q`
/// (golden-section search); a dense scan cross-checks the assumption and
/// takes over if the two disagree.
pub fn calibrate_q_star(
    model: &PathLossModel,
    rho_ue: f64,
    lambda_grid: &[f64],
    mc_activated: &[f64],
) -> Result<f64> {
    if lambda_grid.is_empty() || lambda_grid.len() != mc_activated.len() {
        return Err(Error::EmptyGrid);
    }
    let lambda_max = lambda_grid.iter().copied().fold(f64::NAN, f64::max);
    if !(lambda_max > 0.0) {
        return Err(Error::EmptyGrid);
    }

    let dist = DistanceDistributions::new(model, lambda_max)?;
    let ub = lambda_tilde_upper(&dist, rho_ue)?;
    let q_hi = if lambda0(lambda_max, rho_ue, Q_SEARCH_CAP) < ub {
        Q_SEARCH_CAP
    } else if lambda0(lambda_max, rho_ue, Q_NEAREST) >= ub {
        return Ok(Q_NEAREST);
    } else {
        find_root(
            |q| lambda0(lambda_max, rho_ue, q) - ub,
            Q_NEAREST,
            Q_SEARCH_CAP,
            1e-9,
        )?
    };

    let mse = |q: f64| -> f64 {
        lambda_grid
            .iter()
            .zip(mc_activated)
            .map(|(&lam, &mc)| {
                let e = lambda0(lam, rho_ue, q) - mc;
                e * e
            })
            .sum()
    };

    let q_golden = minimize_scalar(&mse, Q_NEAREST, q_hi, 1e-5)?;

    // Guard against a non-unimodal objective: scan densely and refine around
    // the scan winner if it beats the golden-section result.
    let scan_n = 256;
    let mut q_best = q_golden;
    let mut mse_best = mse(q_golden);
    for i in 0..=scan_n {
        let q = Q_NEAREST + (q_hi - Q_NEAREST) * i as f64 / scan_n as f64;
        let v = mse(q);
        if v < mse_best {
            mse_best = v;
            q_best = q;
        }
    }
    if q_best != q_golden {
        let step = (q_hi - Q_NEAREST) / scan_n as f64;
        let lo = (q_best - step).max(Q_NEAREST);
        let hi = (q_best + step).min(q_hi);
        if lo < hi {
            let refined = minimize_scalar(&mse, lo, hi, 1e-5)?;
            if mse(refined) <= mse_best {
                q_best = refined;
            }
        }
    }
    Ok(q_best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::logspace;
    use crate::pathloss::{make_3gpp_case1, make_single_slope};

    #[test]
    fn lambda0_reference_values() {
        assert_eq!(lambda0(100.0, 0.0, 3.5), 0.0);
        let v = lambda0(300.0, 300.0, 3.5);
        assert!((v - 175.51540470574008).abs() < 1e-9, "got {v}");
        let lb = lambda_tilde_lower(100.0, 300.0);
        assert!((lb - 88.54377836609319).abs() < 1e-9, "got {lb}");
        // Every UE gets its own BS in the ultra-dense limit.
        assert!((lambda0(1e6, 300.0, 3.5) - 300.0).abs() < 0.1);
        assert_eq!(lambda0(42.0, f64::INFINITY, 3.5), 42.0);
    }

    #[test]
    fn lambda0_is_increasing_in_q_lambda_rho_and_bounded() {
        for &lam in &[10.0, 100.0, 1000.0] {
            for &rho in &[30.0, 300.0, 3000.0] {
                for &q in &[3.5, 4.18, 8.0, 20.0] {
                    let v = lambda0(lam, rho, q);
                    assert!(v <= lam.min(rho) + 1e-9);
                    assert!(lambda0(lam, rho, q + 0.1) > v);
                    assert!(lambda0(lam * 1.1, rho, q) > v);
                    assert!(lambda0(lam, rho * 1.1, q) > v);
                }
            }
        }
    }

    #[test]
    fn not_associated_probability_limits() {
        let dist = DistanceDistributions::new(&make_3gpp_case1(), 100.0).unwrap();
        let near = prob_not_associated_given_r(&dist, 1e-6).unwrap();
        assert!(near < 1e-6, "got {near}");
        let far = prob_not_associated_given_r(&dist, dist.r_max() * 4.0).unwrap();
        assert!(far > 1.0 - 1e-9, "got {far}");
        let mid = prob_not_associated_given_r(&dist, 0.05).unwrap();
        assert!(mid > 0.0 && mid < 1.0);
        assert!(prob_not_associated_given_r(&dist, 0.0).is_err());
    }

    #[test]
    fn upper_bound_matches_mean_cell_closed_form_single_slope() {
        // Nearest-BS association: 1 - Pr[not associated | r] = exp(-λπr²)
        // exactly, so the bound collapses to λ(1 - e^(-ρ/λ)).
        let model = make_single_slope(3.75, 10f64.powf(-14.54)).unwrap();
        for (lam, rho) in [(100.0, 300.0), (30.0, 300.0), (300.0, 100.0)] {
            let dist = DistanceDistributions::new(&model, lam).unwrap();
            let ub = lambda_tilde_upper(&dist, rho).unwrap();
            let closed = lam * (1.0 - (-rho / lam).exp());
            assert!(
                (ub - closed).abs() < 1e-6 * lam,
                "lam={lam}: {ub} vs {closed}"
            );
        }
    }

    #[test]
    fn upper_bound_is_mean_cell_area_identity_for_two_piece_model() {
        // The association-cell areas of any stationary rule average to 1/λ,
        // so Q^off = e^(-ρ/λ) independently of the path loss shape. This
        // exercises the whole CDF + equivalent-radius chain.
        let dist = DistanceDistributions::new(&make_3gpp_case1(), 100.0).unwrap();
        let ub = lambda_tilde_upper(&dist, 300.0).unwrap();
        let closed = 100.0 * (1.0 - (-3.0f64).exp());
        assert!((ub - closed).abs() < 1e-3, "{ub} vs {closed}");
    }

    #[test]
    fn upper_bound_limits_and_range() {
        let dist = DistanceDistributions::new(&make_3gpp_case1(), 100.0).unwrap();
        assert_eq!(lambda_tilde_upper(&dist, 0.0).unwrap(), 0.0);
        let saturated = lambda_tilde_upper(&dist, 1e9).unwrap();
        assert!((saturated - 100.0).abs() < 1e-9);
        let ub = lambda_tilde_upper(&dist, 300.0).unwrap();
        assert!(ub > lambda_tilde_lower(100.0, 300.0) && ub <= 100.0);
    }

    #[test]
    fn activation_estimate_ordering() {
        let dist = DistanceDistributions::new(&make_3gpp_case1(), 100.0).unwrap();
        let est = ActivationEstimate::compute(&dist, 300.0, 4.18).unwrap();
        assert!(est.lower_bound <= est.approx);
        assert!(est.approx <= est.upper_bound);
        assert!(est.upper_bound <= est.lambda_bs);
        assert!(est.approx <= est.rho_ue);
    }

    #[test]
    fn calibration_recovers_synthetic_q() {
        let model = make_3gpp_case1();
        let grid = logspace(10.0, 1000.0, 8);
        for q_true in [3.5, 4.0, 5.0] {
            let oracle: Vec<f64> = grid.iter().map(|&l| lambda0(l, 300.0, q_true)).collect();
            let q = calibrate_q_star(&model, 300.0, &grid, &oracle).unwrap();
            assert!((q - q_true).abs() < 0.01, "expected {q_true}, got {q}");
        }
    }

    #[test]
    fn calibration_rejects_empty_or_mismatched_grid() {
        let model = make_3gpp_case1();
        assert!(matches!(
            calibrate_q_star(&model, 300.0, &[], &[]),
            Err(Error::EmptyGrid)
        ));
        assert!(matches!(
            calibrate_q_star(&model, 300.0, &[10.0, 20.0], &[9.0]),
            Err(Error::EmptyGrid)
        ));
    }
}
