//! Transversal sections, first-return maps and closed-orbit detection.
//!
//! Everything here works on an arbitrary [`PhaseFlow`]: sections live in the
//! flat phase coordinates the flow exposes, and distances use the flow's own
//! offset (torus metric on positions, Euclidean on momenta).

use alloc::vec::Vec;

use crate::dynamics::{step_count, PhaseFlow, PhaseVec, DEFAULT_DRIFT_TOL, MAX_PHASE_DIM};
use crate::error::{Error, Result};
use crate::math::{self, PI};
use crate::potential::FourierSeries;

pub const DEFAULT_SECTION_RADIUS: f64 = 0.1;
pub const DEFAULT_EPS_CLOSE: f64 = 1e-6;
pub const DEFAULT_T_MAX: f64 = 1e3;
/// Period floor used when the system exerts no force.
pub const DEFAULT_PERIOD_FLOOR: f64 = 0.5;
/// Width of the time bracket left by crossing refinement.
pub const CROSSING_TOL: f64 = 1e-10;

const MAX_HALVINGS: u32 = 10;
const PROBE: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

/// A small disk through `base`, orthogonal to the flow direction there.
#[derive(Debug, Clone)]
pub struct PoincareSection<T> {
    pub base: T,
    /// `F(base) / |F(base)|`.
    pub normal: PhaseVec,
    pub radius: f64,
    /// Orthonormal basis of the disk's hyperplane.
    pub basis: Vec<PhaseVec>,
}

impl<T> PoincareSection<T> {
    /// Halvings applied to the requested radius.
    pub fn halvings(&self, requested: f64) -> u32 {
        math::round(libm::log2(requested / self.radius)) as u32
    }
}

/// Knobs shared by the return-map and detection routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub dt: f64,
    pub t_max: f64,
    pub drift_tol: f64,
    pub eps_close: f64,
    pub period_floor: f64,
    pub radius: f64,
}

impl SearchOptions {
    pub fn new(dt: f64) -> Self {
        SearchOptions {
            dt,
            t_max: DEFAULT_T_MAX,
            drift_tol: DEFAULT_DRIFT_TOL,
            eps_close: DEFAULT_EPS_CLOSE,
            period_floor: DEFAULT_PERIOD_FLOOR,
            radius: DEFAULT_SECTION_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedOrbitRecord<T> {
    pub initial: T,
    pub period: f64,
    pub closure_gap: f64,
    /// Section crossings inspected, including the accepted one.
    pub returns_used: usize,
}

fn dot(a: &PhaseVec, b: &PhaseVec) -> f64 {
    math::dot(a, b)
}

fn unit(i: usize) -> PhaseVec {
    let mut e = [0.0; MAX_PHASE_DIM];
    e[i] = 1.0;
    e
}

/// Orthonormal basis of `normal`'s complement inside the first `m`
/// coordinates. The coordinate axis most aligned with `normal` is the one
/// left out, which keeps Gram–Schmidt well conditioned.
fn complement_basis(normal: &PhaseVec, m: usize) -> Vec<PhaseVec> {
    let skip = (0..m)
        .max_by(|&a, &b| {
            math::abs(normal[a])
                .total_cmp(&math::abs(normal[b]))
                .then(b.cmp(&a))
        })
        .unwrap_or(0);
    let mut basis: Vec<PhaseVec> = Vec::with_capacity(m.saturating_sub(1));
    for i in (0..m).filter(|&i| i != skip) {
        let mut w = unit(i);
        for b in core::iter::once(normal).chain(basis.iter()) {
            let c = dot(&w, b);
            for (wk, bk) in w.iter_mut().zip(b) {
                *wk -= c * bk;
            }
        }
        let n = math::norm(&w);
        basis.push(w.map(|x| x / n));
    }
    basis
}

fn transversal<S: PhaseFlow>(
    system: &S,
    x0: &S::State,
    normal: &PhaseVec,
    basis: &[PhaseVec],
    radius: f64,
) -> bool {
    let probe = |delta: &PhaseVec| dot(&system.field(&system.displaced(x0, delta)), normal) > 0.0;
    if basis.len() < 2 {
        return basis
            .iter()
            .all(|b| PROBE.iter().all(|&a| probe(&b.map(|x| radius * a * x))));
    }
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            for &a in &PROBE {
                for &b in &PROBE {
                    if a * a + b * b > 1.0 {
                        continue;
                    }
                    let delta: PhaseVec =
                        core::array::from_fn(|k| radius * (a * basis[i][k] + b * basis[j][k]));
                    if !probe(&delta) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Builds the section through `x0`, halving `radius` (at most ten times)
/// until the flow crosses every probe point in the positive direction.
pub fn build_section<S: PhaseFlow>(
    system: &S,
    x0: &S::State,
    radius: f64,
) -> Result<PoincareSection<S::State>> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidArgument("section radius must be positive"));
    }
    let f = system.field(x0);
    let speed = math::norm(&f);
    if !speed.is_finite() {
        return Err(Error::NonFinite("vector field at the section base"));
    }
    if speed == 0.0 {
        return Err(Error::SingularBasePoint);
    }
    let normal = f.map(|x| x / speed);
    let basis = complement_basis(&normal, system.phase_dim());
    let mut r = radius;
    for _ in 0..=MAX_HALVINGS {
        if transversal(system, x0, &normal, &basis, r) {
            return Ok(PoincareSection {
                base: x0.clone(),
                normal,
                radius: r,
                basis,
            });
        }
        r *= 0.5;
    }
    Err(Error::TransversalityFailed {
        halvings: MAX_HALVINGS,
    })
}

/// Signed distance of `state` from the section's hyperplane.
pub fn signed_offset<S: PhaseFlow>(
    system: &S,
    section: &PoincareSection<S::State>,
    state: &S::State,
) -> f64 {
    dot(&system.offset(&section.base, state), &section.normal)
}

fn relative_drift(e: f64, e0: f64) -> f64 {
    math::abs(e - e0) / math::abs(e0).max(1.0)
}

/// First crossing of the section from below, inside the disk, within
/// `opts.t_max`. The crossing time is bracketed to [`CROSSING_TOL`] by
/// bisecting the integrator step on which the sign change happened.
pub fn first_return<S: PhaseFlow>(
    system: &S,
    section: &PoincareSection<S::State>,
    start: &S::State,
    opts: &SearchOptions,
) -> Result<Option<(S::State, f64)>> {
    let dt = opts.dt;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument("step must be positive and finite"));
    }
    if !(opts.t_max.is_finite() && opts.t_max > 0.0) {
        return Err(Error::InvalidArgument("return horizon must be positive"));
    }
    let e0 = system.energy(start);
    let steps = step_count(dt, opts.t_max);
    let mut cur = start.clone();
    // The start sits on the section; only later crossings count.
    let mut below = false;
    for i in 0..steps {
        let next = system.advance(&cur, dt);
        let drift = relative_drift(system.energy(&next), e0);
        if !(drift <= opts.drift_tol) {
            return Err(Error::DriftExceeded {
                step: i + 1,
                drift,
                tolerance: opts.drift_tol,
            });
        }
        let sigma = signed_offset(system, section, &next);
        if below && sigma >= 0.0 {
            let (mut lo, mut hi) = (0.0, dt);
            let mut hit = next.clone();
            while hi - lo > CROSSING_TOL {
                let mid = 0.5 * (lo + hi);
                let s = system.advance(&cur, mid);
                if signed_offset(system, section, &s) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                    hit = s;
                }
            }
            if math::norm(&system.offset(&section.base, &hit)) <= section.radius {
                return Ok(Some((hit, i as f64 * dt + hi)));
            }
        }
        below = sigma < 0.0;
        cur = next;
    }
    Ok(None)
}

/// Integrates `state` for exactly `t` (whole steps plus one partial step).
pub fn flow_for<S: PhaseFlow>(system: &S, state: &S::State, t: f64, dt: f64) -> S::State {
    let n = math::floor(t / dt) as usize;
    let mut s = state.clone();
    for _ in 0..n {
        s = system.advance(&s, dt);
    }
    let rest = t - n as f64 * dt;
    if rest > 0.0 {
        s = system.advance(&s, rest);
    }
    s
}

/// Earliest section return at or after `opts.period_floor` that lands within
/// `opts.eps_close` of `start` and closes again (within twice that) after a
/// second period. `None` when no such return occurs before `opts.t_max`.
pub fn detect_closed_orbit<S: PhaseFlow>(
    system: &S,
    start: &S::State,
    opts: &SearchOptions,
) -> Result<Option<ClosedOrbitRecord<S::State>>> {
    if !(opts.eps_close > 0.0) {
        return Err(Error::InvalidArgument("closure tolerance must be positive"));
    }
    if !(opts.period_floor > 0.0 && opts.period_floor < opts.t_max) {
        return Err(Error::InvalidArgument(
            "period floor must lie in (0, t_max)",
        ));
    }
    let section = build_section(system, start, opts.radius)?;
    let mut cur = start.clone();
    let mut elapsed = 0.0;
    let mut returns = 0;
    while elapsed < opts.t_max {
        let remaining = SearchOptions {
            t_max: opts.t_max - elapsed,
            ..*opts
        };
        if remaining.t_max < opts.dt {
            break;
        }
        let Some((hit, tau)) = first_return(system, &section, &cur, &remaining)? else {
            break;
        };
        elapsed += tau;
        returns += 1;
        if elapsed >= opts.period_floor {
            let gap = system.distance(start, &hit);
            if gap <= opts.eps_close {
                let twice = flow_for(system, start, 2.0 * elapsed, opts.dt);
                if system.distance(start, &twice) <= 2.0 * opts.eps_close {
                    return Ok(Some(ClosedOrbitRecord {
                        initial: start.clone(),
                        period: elapsed,
                        closure_gap: gap,
                        returns_used: returns,
                    }));
                }
            }
        }
        cur = hit;
    }
    Ok(None)
}

/// Speed-over-force lower bound on periods of `|p|² + U` at energy `energy`:
/// `2√(E - sup U) / (2 sup|∇U|)`, with the ℓ¹ coefficient bounds standing in
/// for the suprema. Force-free potentials get `default`. Never below `10·dt`.
pub fn minimum_period_floor<const D: usize>(
    potential: &FourierSeries<D>,
    energy: f64,
    dt: f64,
    default: f64,
) -> Result<f64> {
    let floor = 10.0 * dt;
    if potential.is_zero() {
        return Ok(default.max(floor));
    }
    let bound = potential.sup_bound();
    if !(energy >= bound) {
        return Err(Error::EnergyBelowPotentialMax { energy, bound });
    }
    let min_speed = 2.0 * math::sqrt(energy - bound);
    let max_accel = 2.0 * potential.gradient_bound() + f64::MIN_POSITIVE;
    Ok((min_speed / max_accel).max(floor))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub s: Vec<f64>,
    pub periods: Vec<f64>,
    /// Accumulated phase-space length of the family up to each grid point.
    pub arc: Vec<f64>,
    /// `Δ log T / Δs` between consecutive grid points.
    pub slopes: Vec<f64>,
    /// `max |Δ log T / Δs|`.
    pub max_slope: f64,
    /// `max |Δ log T| / Δarc`: the smallest constant making the exponential
    /// bound hold step by step.
    pub c2: f64,
    /// `T(s) ≤ T(s₀)·exp(C₂·arc(s))` at every grid point.
    pub bound_holds: bool,
}

/// Detects the period of every member of a one-parameter family of initial
/// conditions and measures how fast `log T` moves along it.
pub fn period_lipschitz_check<S: PhaseFlow>(
    system: &S,
    family: &[S::State],
    s_grid: &[f64],
    opts: &SearchOptions,
) -> Result<LipschitzReport> {
    if family.len() != s_grid.len() || family.is_empty() {
        return Err(Error::InvalidArgument(
            "family and grid must be nonempty and aligned",
        ));
    }
    let mut periods = Vec::with_capacity(family.len());
    for (x, &s) in family.iter().zip(s_grid) {
        match detect_closed_orbit(system, x, opts)? {
            Some(rec) => periods.push(rec.period),
            None => return Err(Error::DetectionFailed { s }),
        }
    }
    let mut arc = Vec::with_capacity(family.len());
    arc.push(0.0);
    for w in family.windows(2) {
        let last = *arc.last().unwrap_or(&0.0);
        arc.push(last + system.distance(&w[0], &w[1]));
    }
    let mut slopes = Vec::with_capacity(family.len().saturating_sub(1));
    let mut max_slope: f64 = 0.0;
    let mut c2: f64 = 0.0;
    for i in 1..family.len() {
        let dlog = math::ln(periods[i]) - math::ln(periods[i - 1]);
        let slope = dlog / (s_grid[i] - s_grid[i - 1]);
        slopes.push(slope);
        max_slope = max_slope.max(math::abs(slope));
        let darc = arc[i] - arc[i - 1];
        let local = if dlog == 0.0 {
            0.0
        } else {
            math::abs(dlog) / darc
        };
        c2 = c2.max(local);
    }
    let bound_holds = periods
        .iter()
        .zip(&arc)
        .all(|(&t, &a)| t <= periods[0] * math::exp(c2 * a) * (1.0 + 1e-12));
    Ok(LipschitzReport {
        s: s_grid.to_vec(),
        periods,
        arc,
        slopes,
        max_slope,
        c2,
        bound_holds,
    })
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if math::abs(a - b) <= 1e-16 * a {
            break;
        }
        (a, b) = (0.5 * (a + b), math::sqrt(a * b));
    }
    a
}

/// Complete elliptic integral of the first kind, `K(m)` with `m = k²`.
pub fn elliptic_k(m: f64) -> f64 {
    PI / (2.0 * agm(1.0, math::sqrt(1.0 - m)))
}

/// Libration period of `|p|² + ε cos q1` at energy `-ε < E < ε`:
/// `4 K(k) / √(2ε)` with `k² = (E + ε) / 2ε`.
pub fn pendulum_period(energy: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument("pendulum strength must be positive"));
    }
    if !(energy > -eps && energy < eps) {
        return Err(Error::InvalidArgument(
            "energy must lie strictly between -ε and ε",
        ));
    }
    let m = (energy + eps) / (2.0 * eps);
    Ok(4.0 * elliptic_k(m) / math::sqrt(2.0 * eps))
}
