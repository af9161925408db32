//! Scenario runner and the work behind each CLI subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use orbitfit_core::dynamics::{
    integrate, integrate_sampled, observe, random_conformal_state, random_sphere_state,
    random_state_on_level, ConformalSystem, NaturalSystem, ObservedFlow, PhaseState, SphereState,
    SphereSystem, Trajectory,
};
use orbitfit_core::periodicity::{
    detect_closed_orbit, pendulum_period, period_lipschitz_check, ClosedOrbitRecord, SearchOptions,
};
use orbitfit_core::reconstruction::{
    compare_coefficients, coverage_metrics, diagnose, extract_force, fit_potential,
    max_relative_coefficient_error, reconstruct_conformal_factor, sup_norm_error,
    trajectory_positions, GradientDesign,
};
use orbitfit_core::{FourierSeries, FourierSeries2D, FourierSeries3D};
use serde::Serialize;
use serde_json::Value;

use crate::config::{Scenario, ScenarioConfig};
use crate::error::{HarnessError, Result};
use crate::io;

/// Grid used for sup-norm comparisons of fitted series.
pub const SUP_GRID: usize = 128;
/// Grid used for the grid-sup energy gate bound.
pub const GATE_GRID: usize = 256;
/// Frequency vector of the 3-torus flow; `k = (1, 1, -1)` annihilates it.
pub const T3_OMEGA: [f64; 3] = [1.0, PHI, 1.0 + PHI];
pub const T3_NULL_WAVE: [i32; 3] = [1, 1, -1];
pub const PHI: f64 = 1.618_033_988_749_895;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub op: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, "<=", threshold, value <= threshold)
    }

    pub fn lt(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, "<", threshold, value < threshold)
    }

    pub fn ge(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, ">=", threshold, value >= threshold)
    }

    pub fn gt(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, ">", threshold, value > threshold)
    }

    pub fn holds(name: &str, value: bool) -> Self {
        let v = if value { 1.0 } else { 0.0 };
        Self::new(name, v, "==", 1.0, value)
    }

    fn new(name: &str, value: f64, op: &'static str, threshold: f64, pass: bool) -> Self {
        Check {
            name: name.to_string(),
            value,
            op,
            threshold,
            pass,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub config: ScenarioConfig,
    pub metrics: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub duration: Duration,
    /// Artifacts written, relative to `config.output_dir`.
    pub files: Vec<String>,
}

impl ScenarioReport {
    fn new(config: &ScenarioConfig) -> Self {
        ScenarioReport {
            config: config.clone(),
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            duration: Duration::ZERO,
            files: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn metric(&self, name: &str) -> Option<&Value> {
        self.metrics.get(name)
    }

    pub fn metric_f64(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).and_then(Value::as_f64)
    }

    pub fn metric_bool(&self, name: &str) -> Option<bool> {
        self.metrics.get(name).and_then(Value::as_bool)
    }

    pub fn metric_list(&self, name: &str) -> Option<Vec<f64>> {
        self.metrics
            .get(name)?
            .as_array()?
            .iter()
            .map(Value::as_f64)
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn put(&mut self, name: &str, value: impl Into<Value>) {
        self.metrics.insert(name.to_string(), value.into());
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        io::write_artifact(&self.config.output_dir, name, contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// `summary.json`: the diagnostic keys at top level (null where a
    /// scenario has no such quantity), then everything else.
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            scenario: &'a str,
            seed: u64,
            passed: bool,
            residual_rms: Option<&'a Value>,
            condition: Option<&'a Value>,
            sigma_min: Option<&'a Value>,
            rank_deficient: Option<&'a Value>,
            occupancy: Option<&'a Value>,
            crossing_count: Option<&'a Value>,
            sup_error: Option<&'a Value>,
            wall_clock_seconds: f64,
            metrics: &'a BTreeMap<String, Value>,
            checks: &'a [Check],
            config: BTreeMap<&'static str, String>,
            files: &'a [String],
        }
        let m = |k: &str| self.metrics.get(k);
        let summary = Summary {
            scenario: self.config.scenario.as_str(),
            seed: self.config.seed,
            passed: self.passed(),
            residual_rms: m("residual_rms"),
            condition: m("condition"),
            sigma_min: m("sigma_min"),
            rank_deficient: m("rank_deficient"),
            occupancy: m("occupancy"),
            crossing_count: m("crossing_count"),
            sup_error: m("sup_error"),
            wall_clock_seconds: self.duration.as_secs_f64(),
            metrics: &self.metrics,
            checks: &self.checks,
            config: self.config.entries().into_iter().collect(),
            files: &self.files,
        };
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        text
    }

    /// Writes the resolved config echo and `summary.json`.
    fn finish(mut self, started: Instant) -> Result<Self> {
        self.duration = started.elapsed();
        let echo = self.config.emit();
        self.write("config.txt", &echo)?;
        self.files.push("summary.json".into());
        let summary = self.summary_json();
        io::write_artifact(&self.config.output_dir, "summary.json", &summary)?;
        Ok(self)
    }
}

/// Independent seed streams derived from one user seed; stream 0 is the
/// seed itself.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Order-preserving parallel map over contiguous chunks.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let f = &f;
    thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn search_options(cfg: &ScenarioConfig) -> SearchOptions {
    SearchOptions {
        dt: cfg.step(),
        t_max: cfg.t_max,
        drift_tol: cfg.drift_tol,
        eps_close: cfg.eps_close,
        period_floor: cfg.period_floor,
        radius: cfg.section_radius,
    }
}

/// `E = energy_factor · max(C₀, 1)` with `C₀` the ℓ¹ coefficient bound.
pub fn scenario_energy<const D: usize>(cfg: &ScenarioConfig, u: &FourierSeries<D>) -> f64 {
    cfg.energy_factor * u.sup_bound().max(1.0)
}

fn record_gate<const D: usize>(
    report: &mut ScenarioReport,
    u: &FourierSeries<D>,
    energy: f64,
    enforce: bool,
) -> Result<()> {
    let l1 = u.sup_bound();
    let grid = u.grid_sup_abs(if D == 2 { GATE_GRID } else { 32 });
    report.put("energy", energy);
    report.put("c0_l1", l1);
    report.put("c0_grid", grid);
    if enforce {
        if energy < l1 {
            return Err(HarnessError::Gate {
                energy,
                c0: l1,
                bound: "l1",
            });
        }
        report
            .checks
            .push(Check::ge("gate_energy_vs_c0_l1", energy, l1));
        report
            .checks
            .push(Check::ge("gate_energy_vs_c0_grid", energy, grid));
    }
    Ok(())
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    match cfg.scenario {
        Scenario::TorusReconstruct => {
            let truth = FourierSeries2D::random(cfg.seed, cfg.kmax, cfg.amplitude)?;
            torus_reconstruct(cfg, truth)
        }
        Scenario::SphereClosed => sphere_closed(cfg),
        Scenario::LowEnergy => low_energy(cfg),
        Scenario::T3Underdetermined => t3_underdetermined(cfg),
        Scenario::GronwallCheck => gronwall_check(cfg),
        Scenario::ConformalReconstruct => conformal_reconstruct(cfg),
    }
}

/// Runs every config concurrently (at most `jobs` at a time), each into its
/// own output directory. Results come back in input order.
pub fn run_batch(configs: &[ScenarioConfig], jobs: usize) -> Vec<Result<ScenarioReport>> {
    let jobs = jobs.max(1);
    let mut out = Vec::with_capacity(configs.len());
    for group in configs.chunks(jobs) {
        let results: Vec<Result<ScenarioReport>> = thread::scope(|scope| {
            let handles: Vec<_> = group
                .iter()
                .map(|cfg| scope.spawn(move || run_scenario(cfg)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scenario thread panicked"))
                .collect()
        });
        out.extend(results);
    }
    out
}

/// Simulate, observe, extract forces, fit, and score against `truth`.
pub fn torus_reconstruct(cfg: &ScenarioConfig, truth: FourierSeries2D) -> Result<ScenarioReport> {
    let started = Instant::now();
    let mut report = ScenarioReport::new(cfg);
    let energy = scenario_energy(cfg, &truth);
    record_gate(&mut report, &truth, energy, true)?;
    let start = random_state_on_level(&truth, energy, stream_seed(cfg.seed, 1))?;
    let traj = integrate_sampled(
        NaturalSystem::new(truth.clone()),
        start,
        cfg.dt,
        cfg.substeps,
        cfg.t_final,
        cfg.drift_tol,
    )?;
    report.put("max_drift", traj.max_drift);
    let obs = observe(&traj, cfg.mode)?;
    let samples = extract_force(&obs, cfg.stride)?;
    let fit = fit_potential(&samples, cfg.kmax, cfg.rank_tol)?;
    let diag = diagnose(&fit.singular_values, cfg.rank_tol);
    let sup_error = sup_norm_error(&fit.fitted, &truth, SUP_GRID);
    let coef_err = max_relative_coefficient_error(&fit.fitted, &truth);
    let cover = coverage_metrics(&trajectory_positions(&traj), cfg.grid_n, cfg.circle_radius)?;

    report.put("samples", samples.len() as u64);
    report.put("unknowns", diag.unknowns as u64);
    report.put("residual_rms", fit.residual_rms);
    report.put("condition", fit.condition);
    report.put("sigma_min", fit.sigma_min());
    report.put("sigma_max", diag.sigma_max);
    report.put("rank", fit.rank as u64);
    report.put("rank_deficient", fit.rank_deficient);
    report.put("verdict", diag.verdict());
    report.put("sup_error", sup_error);
    report.put("coefficient_relative_error", coef_err);
    report.put("occupancy", cover.occupancy);
    report.put("crossing_count", cover.crossing_count as u64);
    report.put("distinct_crossings", cover.distinct_crossings as u64);
    report.put("q_star", vec![cover.q_star.q1, cover.q_star.q2]);

    report.checks.push(Check::holds("verdict_key", diag.key));
    report
        .checks
        .push(Check::le("sup_error", sup_error, cfg.sup_tol));
    if cfg.mode == orbitfit_core::dynamics::ObservationMode::Exact {
        report.checks.push(Check::le(
            "coefficient_relative_error",
            coef_err,
            cfg.coef_tol,
        ));
    }

    report.write("potential_true.csv", &io::potential_csv(&truth))?;
    report.write("potential_fit.csv", &io::potential_csv(&fit.fitted))?;
    report.write(
        "trajectory.csv",
        &io::torus_trajectory_csv(&traj, cfg.csv_stride),
    )?;
    report.write(
        "reconstruction.csv",
        &io::reconstruction_csv(&compare_coefficients(&fit.fitted, &truth)),
    )?;
    report.write("coverage.csv", &io::coverage_csv(&cover))?;
    report.finish(started)
}

fn sphere_closed(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let started = Instant::now();
    let mut report = ScenarioReport::new(cfg);
    let energy = cfg.energy_factor;
    let oracle = std::f64::consts::PI / energy.sqrt();
    report.put("energy", energy);
    report.put("period_oracle", oracle);
    let opts = search_options(cfg);
    let seeds: Vec<u64> = (0..cfg.ensemble as u64).map(|i| cfg.seed + i).collect();
    let runs = parallel_map(&seeds, |&seed| -> Result<_> {
        let start = random_sphere_state(energy, seed)?;
        let rec = detect_closed_orbit(&SphereSystem, &start, &opts)?;
        Ok((seed, start, rec))
    });
    let runs: Vec<(u64, SphereState, Option<ClosedOrbitRecord<SphereState>>)> =
        runs.into_iter().collect::<Result<_>>()?;

    let periods: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.2.as_ref().map(|x| x.period))
        .collect();
    let closed = periods.len();
    let worst_oracle = periods
        .iter()
        .map(|t| (t - oracle).abs() / oracle)
        .fold(0.0, f64::max);
    let (lo, hi) = periods
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &t| {
            (l.min(t), h.max(t))
        });
    let spread = if closed > 0 {
        (hi - lo) / lo
    } else {
        f64::INFINITY
    };
    let gap = runs
        .iter()
        .filter_map(|r| r.2.as_ref().map(|x| x.closure_gap))
        .fold(0.0, f64::max);
    report.put("closed", closed as u64);
    report.put("ensemble", runs.len() as u64);
    report.put("periods", periods.clone());
    report.put("max_relative_period_error", worst_oracle);
    report.put("period_spread", spread);
    report.put("max_closure_gap", gap);

    report.checks.push(Check::ge(
        "closed_fraction",
        closed as f64 / runs.len() as f64,
        1.0,
    ));
    report.checks.push(Check::le(
        "max_relative_period_error",
        worst_oracle,
        cfg.period_tol,
    ));
    report
        .checks
        .push(Check::le("period_spread", spread, cfg.period_tol));

    let rows: Vec<io::OrbitRow<'_, SphereState>> = runs
        .iter()
        .map(|(seed, start, rec)| io::OrbitRow {
            seed: *seed,
            start,
            record: rec.as_ref(),
        })
        .collect();
    let orbits = io::sphere_orbits_csv(&rows);
    report.write("orbits.csv", &orbits)?;
    if let Some((_, start, Some(rec))) = runs.first() {
        let traj = integrate(SphereSystem, *start, cfg.step(), rec.period, cfg.drift_tol)?;
        report.write(
            "trajectory.csv",
            &io::sphere_trajectory_csv(&traj, cfg.csv_stride),
        )?;
    }
    report.finish(started)
}

/// Samples, diagnosis and coverage of one natural-system run; shared by the
/// two halves of the low-energy comparison.
struct KeySetRun {
    traj: Trajectory<NaturalSystem<2>>,
    fit: orbitfit_core::reconstruction::ReconstructionResult<2>,
    diag: orbitfit_core::reconstruction::KeySetDiagnostic,
    cover: orbitfit_core::reconstruction::CoverageMetrics,
}

fn key_set_run(
    cfg: &ScenarioConfig,
    u: &FourierSeries2D,
    start: PhaseState<2>,
) -> Result<KeySetRun> {
    let traj = integrate_sampled(
        NaturalSystem::new(u.clone()),
        start,
        cfg.dt,
        cfg.substeps,
        cfg.t_final,
        cfg.drift_tol,
    )?;
    let obs = observe(&traj, cfg.mode)?;
    let samples = extract_force(&obs, cfg.stride)?;
    let fit = fit_potential(&samples, cfg.kmax, cfg.rank_tol)?;
    let diag = diagnose(&fit.singular_values, cfg.rank_tol);
    let cover = coverage_metrics(&trajectory_positions(&traj), cfg.grid_n, cfg.circle_radius)?;
    Ok(KeySetRun {
        traj,
        fit,
        diag,
        cover,
    })
}

/// Seeded uniform angle, drawn through the core's seeded sampler.
fn seeded_point<const D: usize>(seed: u64) -> Result<[f64; D]> {
    let flat = FourierSeries::<D>::zero(1)?;
    Ok(random_state_on_level(&flat, 1.0, seed)?.q)
}

/// The single-cosine potential `amplitude · cos q1` on the configured band.
pub fn pendulum_potential(cfg: &ScenarioConfig) -> Result<FourierSeries2D> {
    Ok(FourierSeries2D::zero(cfg.kmax)?.with_term([1, 0], cfg.amplitude, 0.0)?)
}

fn low_energy(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let started = Instant::now();
    let mut report = ScenarioReport::new(cfg);
    let u = pendulum_potential(cfg)?;
    let eps = cfg.amplitude;
    let energy = scenario_energy(cfg, &u);
    record_gate(&mut report, &u, energy, false)?;
    if !(energy.abs() < eps) {
        return Err(HarnessError::Usage(format!(
            "low-energy needs |E| < amplitude (E = {energy}, amplitude = {eps})"
        )));
    }
    // Brake start: at rest on the Hill boundary cos q1 = E/ε.
    let q2 = seeded_point::<2>(stream_seed(cfg.seed, 1))?[1];
    let brake = PhaseState::new([(energy / eps).acos(), q2], [0.0, 0.0])?;
    let low = key_set_run(cfg, &u, brake)?;
    report.put("max_drift", low.traj.max_drift);
    report.put("residual_rms", low.fit.residual_rms);
    report.put("condition", low.diag.condition);
    report.put("sigma_min", low.diag.sigma_min);
    report.put("sigma_max", low.diag.sigma_max);
    report.put("rank", low.fit.rank as u64);
    report.put("rank_deficient", low.fit.rank_deficient);
    report.put("verdict", low.diag.verdict());
    report.put("occupancy", low.cover.occupancy);
    report.put("crossing_count", low.cover.crossing_count as u64);
    report.put("distinct_crossings", low.cover.distinct_crossings as u64);
    report.put(
        "hill_band_fraction",
        1.0 - (energy / eps).acos() / std::f64::consts::PI,
    );
    report.put("sup_error", sup_norm_error(&low.fit.fitted, &u, SUP_GRID));

    // A generic start at the same low energy, for reference only.
    let generic_start = random_state_on_level(&u, energy, stream_seed(cfg.seed, 2))?;
    let generic = key_set_run(cfg, &u, generic_start)?;
    report.put("generic_occupancy", generic.cover.occupancy);
    report.put("generic_condition", generic.diag.condition);
    report.put("generic_verdict", generic.diag.verdict());

    // The same potential above the gate.
    let high_energy = cfg.compare_energy_factor * u.sup_bound().max(1.0);
    let high_start = random_state_on_level(&u, high_energy, stream_seed(cfg.seed, 3))?;
    let high = key_set_run(cfg, &u, high_start)?;
    report.put("compare_energy", high_energy);
    report.put("compare_condition", high.diag.condition);
    report.put("compare_verdict", high.diag.verdict());
    report.put("compare_occupancy", high.cover.occupancy);

    report.checks.push(Check::lt(
        "occupancy",
        low.cover.occupancy,
        cfg.occupancy_max,
    ));
    report.checks.push(Check::gt(
        "condition",
        low.diag.condition,
        cfg.condition_min,
    ));
    report
        .checks
        .push(Check::holds("rank_deficient", low.fit.rank_deficient));
    report
        .checks
        .push(Check::holds("verdict_not_key", !low.diag.key));
    report.checks.push(Check::lt(
        "compare_condition",
        high.diag.condition,
        cfg.condition_max,
    ));
    report
        .checks
        .push(Check::holds("compare_verdict_key", high.diag.key));

    report.write("potential_true.csv", &io::potential_csv(&u))?;
    report.write(
        "trajectory.csv",
        &io::torus_trajectory_csv(&low.traj, cfg.csv_stride),
    )?;
    report.write(
        "trajectory_compare.csv",
        &io::torus_trajectory_csv(&high.traj, cfg.csv_stride),
    )?;
    report.write(
        "reconstruction.csv",
        &io::reconstruction_csv(&compare_coefficients(&low.fit.fitted, &u)),
    )?;
    report.write(
        "reconstruction_compare.csv",
        &io::reconstruction_csv(&compare_coefficients(&high.fit.fitted, &u)),
    )?;
    report.write("coverage.csv", &io::coverage_csv(&low.cover))?;
    report.finish(started)
}

fn t3_underdetermined(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let started = Instant::now();
    let mut report = ScenarioReport::new(cfg);
    let truth = FourierSeries3D::zero(cfg.kmax)?;
    let q0 = seeded_point::<3>(stream_seed(cfg.seed, 1))?;
    let start = PhaseState::new(q0, T3_OMEGA.map(|w| 0.5 * w))?;
    let traj = integrate_sampled(
        NaturalSystem::new(truth.clone()),
        start,
        cfg.dt,
        cfg.substeps,
        cfg.t_final,
        cfg.drift_tol,
    )?;
    let obs = observe(&traj, cfg.mode)?;
    let samples = extract_force(&obs, cfg.stride)?;
    let fit = fit_potential(&samples, cfg.kmax, cfg.rank_tol)?;
    let design = GradientDesign::from_samples(&samples, cfg.kmax)?;

    // k·q(t) ≡ θ₀ on the orbit, so cos θ₀·cos(k·q) + sin θ₀·sin(k·q) has a
    // vanishing gradient there.
    let theta0: f64 = T3_NULL_WAVE
        .iter()
        .zip(&q0)
        .map(|(&k, &q)| k as f64 * q)
        .sum();
    let null =
        FourierSeries3D::zero(cfg.kmax)?.with_term(T3_NULL_WAVE, theta0.cos(), theta0.sin())?;
    let sigma_max = fit.singular_values.first().copied().unwrap_or(0.0);
    let sigma_ratio = fit.sigma_min() / sigma_max;
    let null_rel = design.image_norm_of(&null) / sigma_max;

    report.put("energy", traj.energy0);
    report.put("omega", T3_OMEGA.to_vec());
    report.put("theta0", theta0);
    report.put("residual_rms", fit.residual_rms);
    report.put("condition", fit.condition);
    report.put("sigma_min", fit.sigma_min());
    report.put("sigma_max", sigma_max);
    report.put("sigma_ratio", sigma_ratio);
    report.put("rank", fit.rank as u64);
    report.put("unknowns", design.unknowns() as u64);
    report.put("rank_deficient", fit.rank_deficient);
    report.put("null_image_relative", null_rel);

    report
        .checks
        .push(Check::holds("rank_deficient", fit.rank_deficient));
    report
        .checks
        .push(Check::lt("sigma_ratio", sigma_ratio, cfg.rank_tol));
    report
        .checks
        .push(Check::lt("null_image_relative", null_rel, cfg.null_tol));

    report.write(
        "trajectory.csv",
        &io::torus_trajectory_csv(&traj, cfg.csv_stride),
    )?;
    report.write("null_direction.csv", &io::potential_csv(&null))?;
    report.write(
        "reconstruction.csv",
        &io::reconstruction_csv(&compare_coefficients(&fit.fitted, &truth)),
    )?;
    report.finish(started)
}

/// Energies of the pendulum family: evenly spaced in `[-0.9ε, 0.8ε]`.
pub fn gronwall_energies(eps: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = (-0.9 * eps, 0.8 * eps);
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// `q = (π, 0)`, `p = (√(E + ε), 0)`: the bottom of the well at energy `E`.
pub fn gronwall_family(eps: f64, energies: &[f64]) -> Result<Vec<PhaseState<2>>> {
    energies
        .iter()
        .map(|&e| {
            Ok(PhaseState::new(
                [std::f64::consts::PI, 0.0],
                [(e + eps).sqrt(), 0.0],
            )?)
        })
        .collect()
}

fn gronwall_check(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let started = Instant::now();
    let mut report = ScenarioReport::new(cfg);
    let eps = cfg.amplitude;
    if !(eps > 0.0) {
        return Err(HarnessError::Usage(
            "gronwall-check needs amplitude > 0".into(),
        ));
    }
    let u = pendulum_potential(cfg)?;
    let system = NaturalSystem::new(u.clone());
    let energies = gronwall_energies(eps, cfg.ensemble);
    let family = gronwall_family(eps, &energies)?;
    let lip = period_lipschitz_check(&system, &family, &energies, &search_options(cfg))?;
    let oracle: Vec<f64> = energies
        .iter()
        .map(|&e| pendulum_period(e, eps))
        .collect::<std::result::Result<_, _>>()?;
    let rel: Vec<f64> = lip
        .periods
        .iter()
        .zip(&oracle)
        .map(|(t, o)| (t - o).abs() / o)
        .collect();
    let worst = rel.iter().copied().fold(0.0, f64::max);
    let margin = (eps - energies.iter().copied().fold(f64::NEG_INFINITY, f64::max)) / eps;

    report.put("separatrix_energy", eps);
    report.put("separatrix_margin", margin);
    report.put("energies", energies.clone());
    report.put("periods", lip.periods.clone());
    report.put("oracle_periods", oracle.clone());
    report.put("max_relative_period_error", worst);
    report.put("max_log_slope", lip.max_slope);
    report.put("c2", lip.c2);
    report.put("bound_holds", lip.bound_holds);

    report
        .checks
        .push(Check::ge("separatrix_margin", margin, 0.1));
    report.checks.push(Check::le(
        "max_relative_period_error",
        worst,
        cfg.period_tol,
    ));
    report.checks.push(Check::holds(
        "max_log_slope_finite",
        lip.max_slope.is_finite(),
    ));
    report
        .checks
        .push(Check::holds("bound_holds", lip.bound_holds));

    let mut csv = String::from("s,energy,period,oracle_period,relative_error,arc,log_slope\n");
    for i in 0..energies.len() {
        let slope = if i == 0 {
            String::new()
        } else {
            io::num(lip.slopes[i - 1])
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            io::num(lip.s[i]),
            io::num(energies[i]),
            io::num(lip.periods[i]),
            io::num(oracle[i]),
            io::num(rel[i]),
            io::num(lip.arc[i]),
            slope
        ));
    }
    report.write("potential_true.csv", &io::potential_csv(&u))?;
    report.write("gronwall.csv", &csv)?;
    report.finish(started)
}

/// `max |(|q̇|² - 4E e^ρ) / (4E e^ρ)|` along the observed samples.
pub fn speed_law_error(
    rho: &FourierSeries2D,
    energy: f64,
    positions: &[[f64; 2]],
    velocities: &[[f64; 2]],
) -> f64 {
    positions
        .iter()
        .zip(velocities)
        .map(|(q, v)| {
            let want = 4.0 * energy * rho.evaluate(q).exp();
            ((v[0] * v[0] + v[1] * v[1]) - want).abs() / want
        })
        .fold(0.0, f64::max)
}

fn conformal_reconstruct(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let started = Instant::now();
    let mut report = ScenarioReport::new(cfg);
    let rho = FourierSeries2D::random(cfg.seed, cfg.kmax, cfg.amplitude)?;
    let energy = cfg.energy_factor;
    let start = random_conformal_state(&rho, energy, stream_seed(cfg.seed, 1))?;
    let system = ConformalSystem::new(rho.clone());
    let traj = integrate_sampled(
        system,
        start,
        cfg.dt,
        cfg.substeps,
        cfg.t_final,
        cfg.drift_tol,
    )?;
    let thinned = traj.decimate(cfg.stride);
    let obs = observe(&thinned, cfg.mode)?;
    let rec = reconstruct_conformal_factor(&obs, energy, cfg.kmax, cfg.rank_tol, SUP_GRID)?;
    let pointwise_err = max_relative_coefficient_error(&rec.rho_fitted, &rho);
    let mean_err = (rec.rho_fitted.mean() - rho.mean()).abs();
    let gradient_err = max_relative_coefficient_error(&rec.gradient_fitted.fitted, &rho);
    let speed = speed_law_error(&rho, energy, &obs.positions, &obs.velocities);
    let direct_speed = thinned
        .states
        .iter()
        .map(|s| {
            let v = thinned.system.velocity(s);
            let want = 4.0 * energy * rho.evaluate(&s.q).exp();
            ((v[0] * v[0] + v[1] * v[1]) - want).abs() / want
        })
        .fold(0.0, f64::max);

    report.put("energy", energy);
    report.put("max_drift", traj.max_drift);
    report.put("samples", obs.len() as u64);
    report.put("dropped", rec.dropped as u64);
    report.put("pointwise_residual_rms", rec.pointwise_residual_rms);
    report.put("pointwise_coefficient_error", pointwise_err);
    report.put("pointwise_mean_error", mean_err);
    report.put("gradient_coefficient_error", gradient_err);
    report.put("residual_rms", rec.gradient_fitted.residual_rms);
    report.put("condition", rec.gradient_fitted.condition);
    report.put("sigma_min", rec.gradient_fitted.sigma_min());
    report.put("rank_deficient", rec.gradient_fitted.rank_deficient);
    report.put("agreement", rec.agreement);
    report.put(
        "sup_error",
        sup_norm_error(&rec.gradient_fitted.fitted, &rho, SUP_GRID),
    );
    report.put("speed_law_error", speed);
    report.put("speed_law_error_all_states", direct_speed);

    report.checks.push(Check::le(
        "pointwise_coefficient_error",
        pointwise_err,
        cfg.coef_tol,
    ));
    report
        .checks
        .push(Check::le("pointwise_mean_error", mean_err, cfg.coef_tol));
    report.checks.push(Check::le(
        "gradient_coefficient_error",
        gradient_err,
        cfg.coef_tol,
    ));
    report
        .checks
        .push(Check::le("agreement", rec.agreement, cfg.agreement_tol));
    report
        .checks
        .push(Check::le("speed_law_error", speed, cfg.speed_tol));

    let mut samples_csv = String::from("q1,q2,rho\n");
    for (q, r) in &rec.rho_pointwise {
        samples_csv.push_str(&format!(
            "{},{},{}\n",
            io::num(q[0]),
            io::num(q[1]),
            io::num(*r)
        ));
    }
    report.write("potential_true.csv", &io::potential_csv(&rho))?;
    report.write("rho_pointwise_fit.csv", &io::potential_csv(&rec.rho_fitted))?;
    report.write(
        "rho_gradient_fit.csv",
        &io::potential_csv(&rec.gradient_fitted.fitted),
    )?;
    report.write("rho_samples.csv", &samples_csv)?;
    report.write(
        "trajectory.csv",
        &io::torus_trajectory_csv(&thinned, cfg.csv_stride),
    )?;
    report.write(
        "reconstruction.csv",
        &io::reconstruction_csv(&compare_coefficients(&rec.gradient_fitted.fitted, &rho)),
    )?;
    report.write(
        "reconstruction_pointwise.csv",
        &io::reconstruction_csv(&compare_coefficients(&rec.rho_fitted, &rho)),
    )?;
    report.finish(started)
}

/// `simulate`: one seeded torus trajectory under the drift gate.
pub fn simulate(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let started = Instant::now();
    let mut report = ScenarioReport::new(cfg);
    let u = FourierSeries2D::random(cfg.seed, cfg.kmax, cfg.amplitude)?;
    let energy = scenario_energy(cfg, &u);
    record_gate(&mut report, &u, energy, true)?;
    let start = random_state_on_level(&u, energy, stream_seed(cfg.seed, 1))?;
    let traj = integrate_sampled(
        NaturalSystem::new(u.clone()),
        start,
        cfg.dt,
        cfg.substeps,
        cfg.t_final,
        cfg.drift_tol,
    )?;
    report.put("max_drift", traj.max_drift);
    report.put("samples", traj.len() as u64);
    report
        .checks
        .push(Check::le("max_drift", traj.max_drift, cfg.drift_tol));
    report.write("potential_true.csv", &io::potential_csv(&u))?;
    report.write(
        "trajectory.csv",
        &io::torus_trajectory_csv(&traj, cfg.csv_stride),
    )?;
    report.finish(started)
}

/// `reconstruct`: the torus pipeline, optionally against a potential read
/// from a CSV file instead of the seeded one.
pub fn reconstruct(cfg: &ScenarioConfig, potential: Option<&Path>) -> Result<ScenarioReport> {
    let truth = match potential {
        Some(path) => io::parse_potential_csv::<2>(&io::read_text(path)?, Some(cfg.kmax), path)?,
        None => FourierSeries2D::random(cfg.seed, cfg.kmax, cfg.amplitude)?,
    };
    torus_reconstruct(cfg, truth)
}

/// `detect-orbits`: closed-orbit search from `ensemble` seeded starts, on
/// the sphere for `sphere-closed` configs and on the seeded torus system
/// otherwise. Reports counts; there is no pass/fail threshold.
pub fn detect_orbits(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    if cfg.scenario == Scenario::SphereClosed {
        return sphere_closed(cfg);
    }
    let started = Instant::now();
    let mut report = ScenarioReport::new(cfg);
    let u = FourierSeries2D::random(cfg.seed, cfg.kmax, cfg.amplitude)?;
    let energy = scenario_energy(cfg, &u);
    record_gate(&mut report, &u, energy, true)?;
    let system = NaturalSystem::new(u);
    let opts = search_options(cfg);
    let seeds: Vec<u64> = (0..cfg.ensemble as u64).map(|i| cfg.seed + i).collect();
    let runs = parallel_map(&seeds, |&seed| -> Result<_> {
        let start = random_state_on_level(&system.potential, energy, stream_seed(seed, 1))?;
        let rec = detect_closed_orbit(&system, &start, &opts)?;
        Ok((seed, start, rec))
    });
    let runs: Vec<(u64, PhaseState<2>, Option<ClosedOrbitRecord<PhaseState<2>>>)> =
        runs.into_iter().collect::<Result<_>>()?;
    let closed = runs.iter().filter(|r| r.2.is_some()).count();
    report.put("closed", closed as u64);
    report.put("ensemble", runs.len() as u64);
    let rows: Vec<io::OrbitRow<'_, PhaseState<2>>> = runs
        .iter()
        .map(|(seed, start, rec)| io::OrbitRow {
            seed: *seed,
            start,
            record: rec.as_ref(),
        })
        .collect();
    report.write("orbits.csv", &io::torus_orbits_csv(&rows))?;
    report.finish(started)
}

/// `coverage`: occupancy and circle crossings of one torus trajectory. With
/// `slope`, the potential is dropped and the flow is free with
/// `q̇ = (1, slope)`.
pub fn coverage(cfg: &ScenarioConfig, slope: Option<f64>) -> Result<ScenarioReport> {
    let started = Instant::now();
    let mut report = ScenarioReport::new(cfg);
    let (u, start) = match slope {
        Some(s) => {
            let u = FourierSeries2D::zero(cfg.kmax)?;
            let q0 = seeded_point::<2>(stream_seed(cfg.seed, 1))?;
            (u, PhaseState::new(q0, [0.5, 0.5 * s])?)
        }
        None => {
            let u = FourierSeries2D::random(cfg.seed, cfg.kmax, cfg.amplitude)?;
            let energy = scenario_energy(cfg, &u);
            record_gate(&mut report, &u, energy, true)?;
            let start = random_state_on_level(&u, energy, stream_seed(cfg.seed, 1))?;
            (u, start)
        }
    };
    let traj = integrate_sampled(
        NaturalSystem::new(u),
        start,
        cfg.dt,
        cfg.substeps,
        cfg.t_final,
        cfg.drift_tol,
    )?;
    let cover = coverage_metrics(&trajectory_positions(&traj), cfg.grid_n, cfg.circle_radius)?;
    report.put("occupancy", cover.occupancy);
    report.put("crossing_count", cover.crossing_count as u64);
    report.put("distinct_crossings", cover.distinct_crossings as u64);
    report.put("q_star", vec![cover.q_star.q1, cover.q_star.q2]);
    report.write("coverage.csv", &io::coverage_csv(&cover))?;
    report.write(
        "trajectory.csv",
        &io::torus_trajectory_csv(&traj, cfg.csv_stride),
    )?;
    report.finish(started)
}

/// Directory a batch member writes into.
pub fn batch_dir(root: &Path, cfg: &ScenarioConfig, index: usize) -> PathBuf {
    root.join(format!("{index:02}-{}-seed{}", cfg.scenario, cfg.seed))
}
