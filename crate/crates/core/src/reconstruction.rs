//! Potential recovery from observed motion.
//!
//! Forces are read off the equations of motion (`f = -∇U = q̈ / 2`) and the
//! band-limited potential is fitted to them by linear least squares. The
//! rank of the gradient design matrix decides whether the sampled points
//! determine a band-limited potential uniquely (a key set).

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{ObservationSeries, PhaseFlow, PhaseState, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{self, TorusPoint};
use crate::linalg::LeastSquares;
use crate::math::{self, TAU};
use crate::potential::{band_size, FourierSeries, FourierSeries2D};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;
pub const DEFAULT_STRIDE: usize = 10;
/// Samples slower than this are unusable for the conformal recovery.
pub const MIN_CONFORMAL_SPEED: f64 = 1e-8;

/// The force `f = -∇U(q)` observed at `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSample<const D: usize> {
    pub q: [f64; D],
    pub f: [f64; D],
    pub weight: f64,
}

impl<const D: usize> ForceSample<D> {
    pub fn new(q: [f64; D], f: [f64; D]) -> Self {
        ForceSample { q, f, weight: 1.0 }
    }
}

/// Every `stride`-th observation turned into a force sample via
/// `f = acceleration / 2` (inverting `q̈ = -2∇U`).
pub fn extract_force<const D: usize>(
    obs: &ObservationSeries<D>,
    stride: usize,
) -> Result<Vec<ForceSample<D>>> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1"));
    }
    if obs.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(obs
        .positions
        .iter()
        .zip(&obs.accelerations)
        .step_by(stride)
        .map(|(q, a)| ForceSample::new(*q, a.map(|x| 0.5 * x)))
        .collect())
}

/// The linear map from band coefficients `[a_0, b_0, a_1, b_1, ...]` to the
/// stacked forces `-∇U_θ(q_i)`, accumulated as a triangular factor.
#[derive(Debug, Clone)]
pub struct GradientDesign<const D: usize> {
    k_max: u32,
    ls: LeastSquares,
    template: FourierSeries<D>,
}

impl<const D: usize> GradientDesign<D> {
    pub fn new(k_max: u32) -> Result<Self> {
        let template = FourierSeries::<D>::zero(k_max)?;
        Ok(GradientDesign {
            k_max,
            ls: LeastSquares::new(2 * template.len()),
            template,
        })
    }

    pub fn from_samples(samples: &[ForceSample<D>], k_max: u32) -> Result<Self> {
        let mut d = Self::new(k_max)?;
        d.extend(samples);
        Ok(d)
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    pub fn unknowns(&self) -> usize {
        self.ls.columns()
    }

    pub fn equations(&self) -> usize {
        self.ls.rows()
    }

    pub fn least_squares(&self) -> &LeastSquares {
        &self.ls
    }

    /// `-∂_d U_θ(q) = Σ k_d (a_k sin(k·q) - b_k cos(k·q))`.
    pub fn extend(&mut self, samples: &[ForceSample<D>]) {
        let n = self.unknowns();
        let mut phases = vec![(0.0, 0.0); self.template.len()];
        let mut row = vec![0.0; n];
        for s in samples {
            if !(s.weight > 0.0) {
                continue;
            }
            let w = math::sqrt(s.weight);
            self.template
                .for_each_phase(&s.q, |i, c, sn| phases[i] = (c, sn));
            for d in 0..D {
                for (i, (k, &(c, sn))) in self.template.waves().iter().zip(&phases).enumerate() {
                    let kd = k[d] as f64 * w;
                    row[2 * i] = kd * sn;
                    row[2 * i + 1] = -kd * c;
                }
                self.ls.push_row(&mut row, w * s.f[d]);
            }
        }
    }

    /// Descending singular values of the design.
    pub fn singular_values(&self) -> Vec<f64> {
        self.ls.singular_values()
    }

    /// `‖A θ‖` for flat coefficients `theta`.
    pub fn image_norm(&self, theta: &[f64]) -> f64 {
        self.ls.image_norm(theta)
    }

    /// Same as [`image_norm`](Self::image_norm) for the coefficients of a
    /// series on this band (its mean is invisible to the design).
    pub fn image_norm_of(&self, series: &FourierSeries<D>) -> f64 {
        let mut theta = vec![0.0; self.unknowns()];
        for (i, k) in self.template.waves().iter().enumerate() {
            let (a, b) = series.coefficient(*k);
            theta[2 * i] = a;
            theta[2 * i + 1] = b;
        }
        self.image_norm(&theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult<const D: usize> {
    /// Mean gauged to zero.
    pub fitted: FourierSeries<D>,
    pub residual_rms: f64,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `σ_max / σ_min` over the retained singular values.
    pub condition: f64,
    pub rank: usize,
    /// Smallest singular value below `rank_tol · σ_max`.
    pub rank_deficient: bool,
}

impl<const D: usize> ReconstructionResult<D> {
    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }
}

/// Samples needed for the equation count to reach the unknown count.
pub fn min_samples<const D: usize>(k_max: u32) -> usize {
    (2 * band_size::<D>(k_max)).div_ceil(D)
}

/// Least-squares fit of a band-limited potential to observed forces, with
/// the minimum-norm completion on directions the data cannot see.
pub fn fit_potential<const D: usize>(
    samples: &[ForceSample<D>],
    k_max: u32,
    rank_tol: f64,
) -> Result<ReconstructionResult<D>> {
    if k_max == 0 {
        return Err(Error::ZeroBandLimit);
    }
    let needed = min_samples::<D>(k_max);
    if samples.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: samples.len(),
        });
    }
    let design = GradientDesign::from_samples(samples, k_max)?;
    Ok(solve_design(&design, rank_tol))
}

fn solve_design<const D: usize>(
    design: &GradientDesign<D>,
    rank_tol: f64,
) -> ReconstructionResult<D> {
    let ls = design.least_squares();
    let sol = ls.solve(rank_tol);
    let residual_sq = ls.residual_sq(&sol.x);
    let rows = ls.rows().max(1);
    let retained = &sol.singular_values[..sol.rank];
    let condition = match (retained.first(), retained.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    };
    let sigma_max = sol.singular_values.first().copied().unwrap_or(0.0);
    let sigma_min = sol.singular_values.last().copied().unwrap_or(0.0);
    let rank_deficient = !(sigma_max > 0.0) || sigma_min < rank_tol * sigma_max;
    let fitted = FourierSeries::from_flat(design.k_max(), 0.0, &sol.x)
        .expect("solution length matches the band");
    ReconstructionResult {
        fitted,
        residual_rms: math::sqrt(residual_sq.max(0.0) / rows as f64),
        singular_values: sol.singular_values,
        condition,
        rank: sol.rank,
        rank_deficient,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeySetDiagnostic {
    pub rank: usize,
    pub unknowns: usize,
    /// `σ_max / σ_min` over the full spectrum; infinite when `σ_min = 0`.
    pub condition: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// True when `σ_min ≥ rank_tol · σ_max`.
    pub key: bool,
}

impl KeySetDiagnostic {
    pub fn verdict(&self) -> &'static str {
        if self.key {
            "key"
        } else {
            "not key"
        }
    }
}

pub fn key_set_diagnostic<const D: usize>(
    samples: &[ForceSample<D>],
    k_max: u32,
    rank_tol: f64,
) -> Result<KeySetDiagnostic> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let design = GradientDesign::from_samples(samples, k_max)?;
    Ok(diagnose(&design.singular_values(), rank_tol))
}

pub fn diagnose(singular_values: &[f64], rank_tol: f64) -> KeySetDiagnostic {
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let sigma_min = singular_values.last().copied().unwrap_or(0.0);
    let cutoff = rank_tol * sigma_max;
    let rank = singular_values
        .iter()
        .filter(|&&s| s > 0.0 && s >= cutoff)
        .count();
    KeySetDiagnostic {
        rank,
        unknowns: singular_values.len(),
        condition: if sigma_min > 0.0 {
            sigma_max / sigma_min
        } else {
            f64::INFINITY
        },
        sigma_min,
        sigma_max,
        key: sigma_max > 0.0 && sigma_min >= cutoff,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMetrics {
    pub grid_n: usize,
    /// Visit counts, row-major in `(i, j)` with `i` along `q1`.
    pub visits: Vec<u64>,
    /// Fraction of cells visited at least once.
    pub occupancy: f64,
    /// Centre of the most visited cell (ties: smallest `(i, j)`).
    pub q_star: TorusPoint,
    pub circle_radius: f64,
    /// Sign changes of `|q(t) - q*| - r` along the samples.
    pub crossing_count: usize,
    /// Crossings grouped by direction and (interpolated) position on the
    /// circle, merging those within [`CROSSING_CLUSTER_TOL`] radians.
    pub distinct_crossings: usize,
}

pub const CROSSING_CLUSTER_TOL: f64 = 1e-3;

fn cell_of(x: f64, n: usize) -> usize {
    ((x / TAU * n as f64) as usize).min(n - 1)
}

/// Grid occupancy and circle crossings of a sampled path on the 2-torus.
pub fn coverage_metrics(
    positions: &[[f64; 2]],
    grid_n: usize,
    circle_radius: f64,
) -> Result<CoverageMetrics> {
    if positions.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if grid_n == 0 {
        return Err(Error::InvalidArgument(
            "grid must have at least one cell per side",
        ));
    }
    if !(circle_radius > 0.0) {
        return Err(Error::InvalidArgument("circle radius must be positive"));
    }
    let mut visits = vec![0u64; grid_n * grid_n];
    for q in positions {
        visits[cell_of(q[0], grid_n) * grid_n + cell_of(q[1], grid_n)] += 1;
    }
    let occupied = visits.iter().filter(|&&v| v > 0).count();
    let mut best = 0;
    for (idx, &v) in visits.iter().enumerate() {
        if v > visits[best] {
            best = idx;
        }
    }
    let h = TAU / grid_n as f64;
    let q_star = TorusPoint {
        q1: (best / grid_n) as f64 * h + 0.5 * h,
        q2: (best % grid_n) as f64 * h + 0.5 * h,
    };
    let crossings = circle_crossings(positions, q_star, circle_radius);
    Ok(CoverageMetrics {
        grid_n,
        occupancy: occupied as f64 / visits.len() as f64,
        visits,
        q_star,
        circle_radius,
        crossing_count: crossings.len(),
        distinct_crossings: distinct(&crossings),
    })
}

/// A sign change of `|q - q*| - r`: direction (outward = true) and the
/// polar angle of the interpolated crossing point about `q*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleCrossing {
    pub index: usize,
    pub outward: bool,
    pub angle: f64,
}

pub fn circle_crossings(
    positions: &[[f64; 2]],
    centre: TorusPoint,
    radius: f64,
) -> Vec<CircleCrossing> {
    let c = centre.as_array();
    let mut out = Vec::new();
    let mut prev: Option<([f64; 2], f64)> = None;
    for (i, q) in positions.iter().enumerate() {
        let d = geometry::displacement(&c, q);
        let g = math::norm(&d) - radius;
        if let Some((pd, pg)) = prev {
            if (pg < 0.0) != (g < 0.0) {
                // Interpolate along the chord, in the chart centred at q*.
                let t = pg / (pg - g);
                let x = [pd[0] + t * (d[0] - pd[0]), pd[1] + t * (d[1] - pd[1])];
                out.push(CircleCrossing {
                    index: i,
                    outward: g >= 0.0,
                    angle: math::atan2(x[1], x[0]),
                });
            }
        }
        prev = Some((d, g));
    }
    out
}

fn distinct(crossings: &[CircleCrossing]) -> usize {
    let mut count = 0;
    for outward in [false, true] {
        let mut angles: Vec<f64> = crossings
            .iter()
            .filter(|c| c.outward == outward)
            .map(|c| c.angle)
            .collect();
        if angles.is_empty() {
            continue;
        }
        angles.sort_by(f64::total_cmp);
        let mut clusters = 1;
        for w in angles.windows(2) {
            if w[1] - w[0] > CROSSING_CLUSTER_TOL {
                clusters += 1;
            }
        }
        // The first and last clusters meet across ±π.
        if clusters > 1 && angles[0] + TAU - angles[angles.len() - 1] <= CROSSING_CLUSTER_TOL {
            clusters -= 1;
        }
        count += clusters;
    }
    count
}

/// Positions of a 2-torus trajectory, for [`coverage_metrics`].
pub fn trajectory_positions<S>(traj: &Trajectory<S>) -> Vec<[f64; 2]>
where
    S: PhaseFlow<State = PhaseState<2>>,
{
    traj.states.iter().map(|s| s.q).collect()
}

/// `max |(fit - mean_fit) - (truth - mean_truth)|` over a uniform grid.
pub fn sup_norm_error(fit: &FourierSeries2D, truth: &FourierSeries2D, grid_n: usize) -> f64 {
    let h = TAU / grid_n as f64;
    let mut worst: f64 = 0.0;
    for i in 0..grid_n {
        for j in 0..grid_n {
            let q = [i as f64 * h, j as f64 * h];
            let d = (fit.evaluate(&q) - fit.mean()) - (truth.evaluate(&q) - truth.mean());
            worst = worst.max(math::abs(d));
        }
    }
    worst
}

/// Per-wave-vector comparison over the fitted band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientComparison<const D: usize> {
    pub k: [i32; D],
    pub a_true: f64,
    pub b_true: f64,
    pub a_fit: f64,
    pub b_fit: f64,
}

impl<const D: usize> CoefficientComparison<D> {
    pub fn abs_err(&self) -> f64 {
        math::abs(self.a_fit - self.a_true).max(math::abs(self.b_fit - self.b_true))
    }
}

pub fn compare_coefficients<const D: usize>(
    fit: &FourierSeries<D>,
    truth: &FourierSeries<D>,
) -> Vec<CoefficientComparison<D>> {
    let band = if fit.k_max() >= truth.k_max() {
        fit
    } else {
        truth
    };
    band.waves()
        .iter()
        .map(|&k| {
            let (a_true, b_true) = truth.coefficient(k);
            let (a_fit, b_fit) = fit.coefficient(k);
            CoefficientComparison {
                k,
                a_true,
                b_true,
                a_fit,
                b_fit,
            }
        })
        .collect()
}

/// Largest coefficientwise relative error. Each error is measured against
/// `max(|c_true|, floor)` with `floor = 1e-6 · max |c_true|`, so vanishing
/// true coefficients do not divide by zero; an all-zero truth gives the
/// absolute error.
pub fn max_relative_coefficient_error<const D: usize>(
    fit: &FourierSeries<D>,
    truth: &FourierSeries<D>,
) -> f64 {
    let rows = compare_coefficients(fit, truth);
    let scale = rows
        .iter()
        .map(|r| math::abs(r.a_true).max(math::abs(r.b_true)))
        .fold(0.0, f64::max);
    let floor = if scale > 0.0 { 1e-6 * scale } else { 1.0 };
    rows.iter()
        .flat_map(|r| [(r.a_fit, r.a_true), (r.b_fit, r.b_true)])
        .map(|(f, t)| math::abs(f - t) / math::abs(t).max(floor))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalReconstruction {
    /// `(q_i, ρ(q_i))` from the speed law, for the samples kept.
    pub rho_pointwise: Vec<([f64; 2], f64)>,
    /// Direct fit of the pointwise values, mean included.
    pub rho_fitted: FourierSeries2D,
    pub pointwise_residual_rms: f64,
    /// Fit of the recovered gradients; mean gauged to zero.
    pub gradient_fitted: ReconstructionResult<2>,
    /// Sup distance between the two fitted exponents after aligning means.
    pub agreement: f64,
    pub dropped: usize,
}

/// `∇ρ` from one conformal observation: solves
/// `q̈ = (∇ρ·q̇) q̇ - (|q̇|²/2) ∇ρ`. The matrix `q̇q̇ᵀ - (|q̇|²/2) I` has
/// eigenvalue `|q̇|²/2` along `q̇` and `-|q̇|²/2` across it.
pub fn conformal_gradient(velocity: [f64; 2], acceleration: [f64; 2]) -> [f64; 2] {
    let s2 = velocity[0] * velocity[0] + velocity[1] * velocity[1];
    let along = (velocity[0] * acceleration[0] + velocity[1] * acceleration[1]) / s2;
    core::array::from_fn(|i| 2.0 / s2 * (2.0 * along * velocity[i] - acceleration[i]))
}

/// Recovers `ρ` for `H = e^ρ |p|²` twice: from the speed law
/// `|q̇|² = 4E e^ρ` and from the gradients implied by the accelerations.
pub fn reconstruct_conformal_factor(
    obs: &ObservationSeries<2>,
    energy: f64,
    k_max: u32,
    rank_tol: f64,
    grid_n: usize,
) -> Result<ConformalReconstruction> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::InvalidArgument("conformal energy must be positive"));
    }
    let template = FourierSeries2D::zero(k_max)?;
    let mut pointwise = Vec::with_capacity(obs.len());
    let mut gradients = Vec::with_capacity(obs.len());
    let mut dropped = 0;
    for ((q, v), a) in obs
        .positions
        .iter()
        .zip(&obs.velocities)
        .zip(&obs.accelerations)
    {
        let s2 = v[0] * v[0] + v[1] * v[1];
        if !(math::sqrt(s2) >= MIN_CONFORMAL_SPEED) {
            dropped += 1;
            continue;
        }
        pointwise.push((*q, math::ln(s2 / (4.0 * energy))));
        let g = conformal_gradient(*v, *a);
        gradients.push(ForceSample::new(*q, g.map(|x| -x)));
    }
    if pointwise.is_empty() {
        return Err(Error::AllSamplesDropped(dropped));
    }

    // (a) function fit: columns [1, cos(k·q), sin(k·q), ...].
    let n = 1 + 2 * template.len();
    let mut ls = LeastSquares::new(n);
    let mut row = vec![0.0; n];
    for (q, r) in &pointwise {
        row[0] = 1.0;
        template.for_each_phase(q, |i, c, s| {
            row[1 + 2 * i] = c;
            row[2 + 2 * i] = s;
        });
        ls.push_row(&mut row, *r);
    }
    let sol = ls.solve(rank_tol);
    let rho_fitted = FourierSeries2D::from_flat(k_max, sol.x[0], &sol.x[1..])?;
    let pointwise_residual_rms = math::sqrt(ls.residual_sq(&sol.x).max(0.0) / ls.rows() as f64);

    // (b) gradient fit.
    let gradient_fitted = fit_potential(&gradients, k_max, rank_tol)?;
    let agreement = sup_norm_error(&gradient_fitted.fitted, &rho_fitted, grid_n);

    Ok(ConformalReconstruction {
        rho_pointwise: pointwise,
        rho_fitted,
        pointwise_residual_rms,
        gradient_fitted,
        agreement,
        dropped,
    })
}
