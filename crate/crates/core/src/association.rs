//! Serving-distance distributions under smallest-path-loss association.
//!
//! A user attaches to the base station with the largest path gain, which
//! under a LoS/NLoS model is not necessarily the nearest one. The serving
//! distance therefore splits into a LoS branch and an NLoS branch whose
//! densities involve the equivalent-gain radii `r₁` and `r₂`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{integrate, logspace, MonotoneCubic, QuadratureSpec};
use crate::pathloss::{Path, PathLossModel};

const GRID_NODES: usize = 512;
const GRID_START_KM: f64 = 1e-4;
/// Tail residual mass below which the distance grid is truncated.
const TAIL_RESIDUAL: f64 = 1e-9;

/// Tabulated serving-distance distributions for one `(model, λ)` pair.
///
/// Construction integrates the branch densities once on a log-spaced grid;
/// afterwards the object is immutable and cheap to query from any thread.
#[derive(Debug, Clone)]
pub struct DistanceDistributions {
    model: PathLossModel,
    lambda_bs: f64,
    cdf_los: MonotoneCubic,
    cdf_nlos: MonotoneCubic,
    tail_los: f64,
    tail_nlos: f64,
    r_max: f64,
    total_mass_raw: f64,
    grid: Vec<f64>,
}

impl DistanceDistributions {
    pub fn new(model: &PathLossModel, lambda_bs: f64) -> Result<Self> {
        if !(lambda_bs > 0.0) {
            return Err(Error::InvalidModel("lambda_bs must be positive".into()));
        }
        let model = model.clone();

        // A serving distance beyond r implies no BS of any kind within
        // r₁(r), so the residual mass is bounded by exp(-λπ r₁(r)²).
        let mut r_max = 1.0 / lambda_bs.sqrt();
        for _ in 0..60 {
            let r1 = model.r1_of(r_max).expect("r_max > 0");
            if lambda_bs * PI * r1 * r1 > -TAIL_RESIDUAL.ln() {
                break;
            }
            r_max *= 2.0;
        }

        // Grid nodes: log-spaced, with the break distances and their
        // equivalent-gain preimages inserted so every kink is a node.
        let mut grid = logspace(GRID_START_KM, r_max, GRID_NODES);
        for d in model.breaks() {
            for p in [d, model.r1_of(d)?, model.r2_of(d)?] {
                if p > GRID_START_KM && p < r_max {
                    grid.push(p);
                }
            }
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-15 * b.abs());

        let spec = QuadratureSpec::with_tols(1e-9, 1e-13);
        let pdf_l = |r: f64| pdf_raw(&model, lambda_bs, Path::Los, r);
        let pdf_nl = |r: f64| pdf_raw(&model, lambda_bs, Path::Nlos, r);

        let mut f_los = Vec::with_capacity(grid.len());
        let mut f_nlos = Vec::with_capacity(grid.len());
        let mut acc_l = integrate(pdf_l, 0.0, grid[0], &spec)?;
        let mut acc_nl = integrate(pdf_nl, 0.0, grid[0], &spec)?;
        f_los.push(acc_l);
        f_nlos.push(acc_nl);
        for w in grid.windows(2) {
            acc_l += integrate(pdf_l, w[0], w[1], &spec)?;
            acc_nl += integrate(pdf_nl, w[0], w[1], &spec)?;
            f_los.push(acc_l);
            f_nlos.push(acc_nl);
        }

        let total = acc_l + acc_nl;
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::NumericalInconsistency(format!(
                "serving-distance mass {total} deviates from 1 beyond 1e-6"
            )));
        }
        // Normalize so the two tails sum to one exactly; the activation
        // integrands rely on the complement vanishing identically at large r.
        for v in f_los.iter_mut().chain(f_nlos.iter_mut()) {
            *v /= total;
        }
        let tail_los = *f_los.last().expect("non-empty grid");
        let tail_nlos = 1.0 - tail_los;

        // The node derivatives of the CDFs are the densities themselves.
        let slopes_l: Vec<f64> = grid.iter().map(|&r| pdf_l(r) / total).collect();
        let slopes_nl: Vec<f64> = grid.iter().map(|&r| pdf_nl(r) / total).collect();

        Ok(Self {
            cdf_los: MonotoneCubic::with_slopes(grid.clone(), f_los, slopes_l)?,
            cdf_nlos: MonotoneCubic::with_slopes(grid.clone(), f_nlos, slopes_nl)?,
            model,
            lambda_bs,
            tail_los,
            tail_nlos,
            r_max,
            total_mass_raw: total,
            grid,
        })
    }

    pub fn model(&self) -> &PathLossModel {
        &self.model
    }

    pub fn lambda_bs(&self) -> f64 {
        self.lambda_bs
    }

    /// Radius holding all but `1e-9` of the serving-distance mass.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Raw (pre-normalization) total mass of both branches; equals one up to
    /// quadrature error for a correct model.
    pub fn total_mass_raw(&self) -> f64 {
        self.total_mass_raw
    }

    /// Branch density of the serving distance, evaluated from the closed
    /// formula (not the tabulation).
    pub fn pdf_serving_distance(&self, path: Path, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::NonPositiveDistance(r));
        }
        Ok(pdf_raw(&self.model, self.lambda_bs, path, r))
    }

    /// Branch CDF of the serving distance from the tabulated grid.
    pub fn cdf_serving_distance(&self, path: Path, r: f64) -> f64 {
        let (interp, tail) = match path {
            Path::Los => (&self.cdf_los, self.tail_los),
            Path::Nlos => (&self.cdf_nlos, self.tail_nlos),
        };
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.r_max {
            return tail;
        }
        let first = self.grid[0];
        if r < first {
            // Quadratic onset: the density scales like 2πλr near zero.
            return interp.eval(first) * (r / first) * (r / first);
        }
        interp.eval(r).clamp(0.0, tail)
    }

    /// Total CDF mass at infinity (exactly one after normalization).
    pub fn total_mass(&self) -> f64 {
        self.tail_los + self.tail_nlos
    }

    pub(crate) fn grid(&self) -> &[f64] {
        &self.grid
    }
}

fn pdf_raw(model: &PathLossModel, lambda: f64, path: Path, r: f64) -> f64 {
    let pr_los = model.los_probability(r);
    match path {
        Path::Los => {
            if pr_los <= 0.0 {
                return 0.0;
            }
            let r1 = model.r1_of(r).expect("r > 0");
            (-lambda * model.cum_nlos_intensity(r1)).exp()
                * (-lambda * model.cum_los_intensity(r)).exp()
                * pr_los
                * 2.0
                * PI
                * r
                * lambda
        }
        Path::Nlos => {
            if pr_los >= 1.0 {
                return 0.0;
            }
            let r2 = model.r2_of(r).expect("r > 0");
            (-lambda * model.cum_los_intensity(r2)).exp()
                * (-lambda * model.cum_nlos_intensity(r)).exp()
                * (1.0 - pr_los)
                * 2.0
                * PI
                * r
                * lambda
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathloss::{make_3gpp_case1, make_single_slope};

    fn single_slope() -> PathLossModel {
        make_single_slope(3.75, 10f64.powf(-14.54)).unwrap()
    }

    #[test]
    fn single_slope_pdf_matches_rayleigh_closed_form() {
        let dist = DistanceDistributions::new(&single_slope(), 100.0).unwrap();
        let r = 0.05;
        let lam = 100.0;
        let expected = 2.0 * PI * lam * r * (-lam * PI * r * r).exp();
        let got = dist.pdf_serving_distance(Path::Nlos, r).unwrap();
        assert!((got - expected).abs() / expected < 1e-12, "{got} vs {expected}");
        assert!((got - 14.323).abs() < 1e-3);
        assert_eq!(dist.pdf_serving_distance(Path::Los, r).unwrap(), 0.0);
    }

    #[test]
    fn single_slope_cdf_matches_closed_form() {
        let lam = 100.0;
        let dist = DistanceDistributions::new(&single_slope(), lam).unwrap();
        let expected_at = |r: f64| 1.0 - (-lam * PI * r * r).exp();
        let got = dist.cdf_serving_distance(Path::Nlos, 0.05);
        assert!((got - expected_at(0.05)).abs() < 1e-8, "got {got}");
        assert!((got - 0.5441).abs() < 1e-4);
        for r in logspace(2e-4, dist.r_max() * 0.98, 400) {
            let g = dist.cdf_serving_distance(Path::Nlos, r);
            let e = expected_at(r);
            assert!((g - e).abs() < 1e-8, "r={r}: {g} vs {e}");
        }
        assert_eq!(dist.cdf_serving_distance(Path::Nlos, 0.0), 0.0);
        assert_eq!(dist.cdf_serving_distance(Path::Los, dist.r_max() * 2.0), 0.0);
    }

    #[test]
    fn los_pdf_vanishes_beyond_cutoff() {
        let dist = DistanceDistributions::new(&make_3gpp_case1(), 100.0).unwrap();
        for r in [0.3, 0.31, 0.5, 1.0] {
            assert_eq!(dist.pdf_serving_distance(Path::Los, r).unwrap(), 0.0);
        }
        assert!(dist.pdf_serving_distance(Path::Los, 0.29).unwrap() > 0.0);
    }

    #[test]
    fn normalization_across_densities() {
        let model = make_3gpp_case1();
        for lam in [1.0, 10.0, 100.0, 1000.0, 10_000.0] {
            let dist = DistanceDistributions::new(&model, lam).unwrap();
            assert!(
                (dist.total_mass_raw() - 1.0).abs() < 1e-6,
                "lambda={lam}: raw mass {}",
                dist.total_mass_raw()
            );
            assert!((dist.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pdf_is_non_negative_and_cdf_monotone() {
        let dist = DistanceDistributions::new(&make_3gpp_case1(), 300.0).unwrap();
        let mut prev_l = 0.0;
        let mut prev_nl = 0.0;
        for r in logspace(1e-4, dist.r_max() * 1.1, 10_000) {
            assert!(dist.pdf_serving_distance(Path::Los, r).unwrap() >= 0.0);
            assert!(dist.pdf_serving_distance(Path::Nlos, r).unwrap() >= 0.0);
            let fl = dist.cdf_serving_distance(Path::Los, r);
            let fnl = dist.cdf_serving_distance(Path::Nlos, r);
            assert!(fl >= prev_l - 1e-12 && fnl >= prev_nl - 1e-12);
            prev_l = fl;
            prev_nl = fnl;
        }
    }

    #[test]
    fn cdf_derivative_matches_pdf_at_interior_nodes() {
        let model = make_3gpp_case1();
        let lam = 100.0;
        let dist = DistanceDistributions::new(&model, lam).unwrap();
        let mut kinks = model.breaks();
        for d in model.breaks() {
            kinks.push(model.r1_of(d).unwrap());
            kinks.push(model.r2_of(d).unwrap());
        }
        let grid = dist.grid().to_vec();
        let mut checked = 0;
        for i in 1..grid.len() - 1 {
            let r = grid[i];
            if r < 5e-3 || r > dist.r_max() * 0.5 {
                continue; // negligible density; relative comparison is meaningless
            }
            if kinks.iter().any(|k| (r / k - 1.0).abs() < 0.1) {
                continue;
            }
            let h = r * 1e-3;
            for path in [Path::Los, Path::Nlos] {
                let deriv = (dist.cdf_serving_distance(path, r + h)
                    - dist.cdf_serving_distance(path, r - h))
                    / (2.0 * h);
                let pdf = dist.pdf_serving_distance(path, r).unwrap();
                if pdf > 1e-3 {
                    assert!(
                        (deriv - pdf).abs() / pdf < 1e-4,
                        "path {path:?} r={r}: {deriv} vs {pdf}"
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 200, "only {checked} interior nodes checked");
    }
}
