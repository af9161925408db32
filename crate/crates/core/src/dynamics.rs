//! Hamiltonian vector fields, fixed-step integrators and the observation
//! channel that turns a simulated run into inverse-problem data.
//!
//! Three families of systems are supported:
//!
//! * [`NaturalSystem`]: `H = |p|² + U(q)` on the flat `D`-torus, integrated
//!   with kick–drift–kick leapfrog (symplectic, reversible, second order).
//! * [`ConformalSystem`]: `H = e^{ρ(q)} |p|²` on the 2-torus, integrated with
//!   the implicit generalized leapfrog followed by a rescaling of `p` back
//!   onto the starting energy level.
//! * [`SphereSystem`]: the great-circle flow of the round sphere, integrated
//!   in the embedding with RK4 and per-step renormalization.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{self, MetricTag, SpherePoint, TorusPoint};
use crate::math::{self, TAU};
use crate::potential::{FourierSeries, FourierSeries2D};

/// Room for the largest phase space handled here (`T*T³` and `TS²` in `R⁶`).
pub const MAX_PHASE_DIM: usize = 6;

/// A phase-space tangent or displacement, zero padded past the system's
/// dimension so inner products and norms need no special casing.
pub type PhaseVec = [f64; MAX_PHASE_DIM];

pub const DEFAULT_DRIFT_TOL: f64 = 1e-6;

/// A phase point on `T*T^D`.
///
/// `q` is wrapped into `[0, 2π)`; `winding` counts the periods removed since
/// the state was created, so `q + 2π·winding` is the continuous lift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState<const D: usize> {
    pub q: [f64; D],
    pub p: [f64; D],
    pub winding: [i64; D],
}

impl<const D: usize> PhaseState<D> {
    pub fn new(q: [f64; D], p: [f64; D]) -> Result<Self> {
        if !q.iter().chain(&p).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("phase state"));
        }
        let mut wq = [0.0; D];
        let mut winding = [0; D];
        for i in 0..D {
            (wq[i], winding[i]) = geometry::wrap_angle(q[i]);
        }
        Ok(PhaseState { q: wq, p, winding })
    }

    pub fn lift(&self) -> [f64; D] {
        core::array::from_fn(|i| self.q[i] + TAU * self.winding[i] as f64)
    }

    /// Same phase point with the lift reset to the fundamental domain.
    pub fn unwound(mut self) -> Self {
        self.winding = [0; D];
        self
    }

    fn offset(&self, to: &Self) -> PhaseVec {
        let dq = geometry::displacement(&self.q, &to.q);
        let mut out = [0.0; MAX_PHASE_DIM];
        for i in 0..D {
            out[i] = dq[i];
            out[D + i] = to.p[i] - self.p[i];
        }
        out
    }

    fn displaced(&self, delta: &PhaseVec) -> Self {
        let dq: [f64; D] = core::array::from_fn(|i| delta[i]);
        let p = core::array::from_fn(|i| self.p[i] + delta[D + i]);
        self.drifted(&dq, p)
    }

    /// Advances the lift by `dq` and rewraps.
    fn drifted(&self, dq: &[f64; D], p: [f64; D]) -> Self {
        let mut next = PhaseState {
            q: [0.0; D],
            p,
            winding: self.winding,
        };
        for (i, d) in dq.iter().enumerate() {
            let (w, n) = geometry::wrap_angle(self.q[i] + d);
            next.q[i] = w;
            next.winding[i] += n;
        }
        next
    }
}

impl PhaseState<2> {
    pub fn point(&self) -> TorusPoint {
        self.q.into()
    }
}

/// Position on the unit sphere plus embedded tangent velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereState {
    pub x: SpherePoint,
    pub v: [f64; 3],
}

impl SphereState {
    pub fn new(x: SpherePoint, v: [f64; 3]) -> Result<Self> {
        geometry::sphere_geodesic_field(x, v)?;
        Ok(SphereState { x, v })
    }
}

/// A time-invariant flow on a phase space, with the metric structure needed
/// by return maps and orbit detection.
pub trait PhaseFlow {
    type State: Clone;

    fn tag(&self) -> MetricTag;

    /// One integrator step of size `dt` (any `0 < dt ≤` the run's step).
    fn advance(&self, state: &Self::State, dt: f64) -> Self::State;

    fn energy(&self, state: &Self::State) -> f64;

    /// The vector field `F(x)` in flat phase coordinates.
    fn field(&self, state: &Self::State) -> PhaseVec;

    /// Minimal phase displacement `to - from`.
    fn offset(&self, from: &Self::State, to: &Self::State) -> PhaseVec;

    /// Dimension of the (embedding) phase space; entries of [`PhaseVec`] past
    /// it are always zero.
    fn phase_dim(&self) -> usize;

    /// The state at `state + delta` in flat phase coordinates. Embedded
    /// systems do not project back onto their constraint surface.
    fn displaced(&self, state: &Self::State, delta: &PhaseVec) -> Self::State;

    fn distance(&self, a: &Self::State, b: &Self::State) -> f64 {
        math::norm(&self.offset(a, b))
    }
}

/// Torus systems whose velocity and acceleration can be read off the state
/// exactly (the oracle-grade observation channel).
pub trait ObservedFlow<const D: usize>: PhaseFlow<State = PhaseState<D>> {
    fn velocity(&self, state: &PhaseState<D>) -> [f64; D];
    fn acceleration(&self, state: &PhaseState<D>) -> [f64; D];
}

/// `H = |p|² + U(q)` on the flat `D`-torus.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSystem<const D: usize> {
    pub potential: FourierSeries<D>,
}

impl<const D: usize> NaturalSystem<D> {
    pub fn new(potential: FourierSeries<D>) -> Self {
        NaturalSystem { potential }
    }

    pub fn hamiltonian(&self, s: &PhaseState<D>) -> f64 {
        s.p.iter().map(|x| x * x).sum::<f64>() + self.potential.evaluate(&s.q)
    }

    /// `(q̇, ṗ) = (2p, -∇U(q))`.
    pub fn vector_field(&self, s: &PhaseState<D>) -> ([f64; D], [f64; D]) {
        let g = self.potential.gradient(&s.q);
        (s.p.map(|x| 2.0 * x), g.map(|x| -x))
    }

    fn kick(&self, q: &[f64; D], p: &[f64; D], h: f64) -> [f64; D] {
        let g = self.potential.gradient(q);
        core::array::from_fn(|i| p[i] - h * g[i])
    }
}

impl<const D: usize> PhaseFlow for NaturalSystem<D> {
    type State = PhaseState<D>;

    fn tag(&self) -> MetricTag {
        if D == 3 {
            MetricTag::FlatTorus3
        } else {
            MetricTag::FlatTorus2
        }
    }

    fn advance(&self, s: &PhaseState<D>, dt: f64) -> PhaseState<D> {
        let half = 0.5 * dt;
        let p_half = self.kick(&s.q, &s.p, half);
        let dq = p_half.map(|x| 2.0 * dt * x);
        let mut next = s.drifted(&dq, p_half);
        next.p = self.kick(&next.q, &p_half, half);
        next
    }

    fn energy(&self, s: &PhaseState<D>) -> f64 {
        self.hamiltonian(s)
    }

    fn field(&self, s: &PhaseState<D>) -> PhaseVec {
        let (qd, pd) = self.vector_field(s);
        let mut out = [0.0; MAX_PHASE_DIM];
        out[..D].copy_from_slice(&qd);
        out[D..2 * D].copy_from_slice(&pd);
        out
    }

    fn offset(&self, from: &PhaseState<D>, to: &PhaseState<D>) -> PhaseVec {
        from.offset(to)
    }

    fn phase_dim(&self) -> usize {
        2 * D
    }

    fn displaced(&self, s: &PhaseState<D>, delta: &PhaseVec) -> PhaseState<D> {
        s.displaced(delta)
    }
}

impl<const D: usize> ObservedFlow<D> for NaturalSystem<D> {
    fn velocity(&self, s: &PhaseState<D>) -> [f64; D] {
        s.p.map(|x| 2.0 * x)
    }

    fn acceleration(&self, s: &PhaseState<D>) -> [f64; D] {
        self.potential.gradient(&s.q).map(|g| -2.0 * g)
    }
}

/// `H = e^{ρ(q)} (p1² + p2²)`: the geodesic flow of a conformally flat metric
/// on the 2-torus.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalSystem {
    pub rho: FourierSeries2D,
}

const IMPLICIT_MAX_ITER: usize = 100;

impl ConformalSystem {
    pub fn new(rho: FourierSeries2D) -> Self {
        ConformalSystem { rho }
    }

    pub fn hamiltonian(&self, s: &PhaseState<2>) -> f64 {
        math::exp(self.rho.evaluate(&s.q)) * (s.p[0] * s.p[0] + s.p[1] * s.p[1])
    }

    /// `q̇ = 2e^ρ p`, `ṗ = -e^ρ |p|² ∇ρ`.
    pub fn vector_field(&self, s: &PhaseState<2>) -> ([f64; 2], [f64; 2]) {
        self.field_at(&s.q, &s.p)
    }

    fn field_at(&self, q: &[f64; 2], p: &[f64; 2]) -> ([f64; 2], [f64; 2]) {
        let (r, g) = self.rho.value_and_gradient(q);
        let e = math::exp(r);
        let p2 = p[0] * p[0] + p[1] * p[1];
        (
            [2.0 * e * p[0], 2.0 * e * p[1]],
            [-e * p2 * g[0], -e * p2 * g[1]],
        )
    }
}

fn converged<const N: usize>(a: &[f64; N], b: &[f64; N]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| math::abs(x - y) <= 4.0 * f64::EPSILON * (1.0 + math::abs(*y)))
}

impl PhaseFlow for ConformalSystem {
    type State = PhaseState<2>;

    fn tag(&self) -> MetricTag {
        MetricTag::ConformalTorus
    }

    fn advance(&self, s: &PhaseState<2>, dt: f64) -> PhaseState<2> {
        let half = 0.5 * dt;
        let q0 = s.q;

        // p½ = p - h/2 ∂qH(q, p½)
        let mut p_half = s.p;
        for _ in 0..IMPLICIT_MAX_ITER {
            let (_, pd) = self.field_at(&q0, &p_half);
            let next = [s.p[0] + half * pd[0], s.p[1] + half * pd[1]];
            let done = converged(&next, &p_half);
            p_half = next;
            if done {
                break;
            }
        }

        // q' = q + h/2 (∂pH(q, p½) + ∂pH(q', p½)), solved for the offset.
        let (v0, _) = self.field_at(&q0, &p_half);
        let mut dq = [dt * v0[0], dt * v0[1]];
        for _ in 0..IMPLICIT_MAX_ITER {
            let q1 = [q0[0] + dq[0], q0[1] + dq[1]];
            let (v1, _) = self.field_at(&q1, &p_half);
            let next = [half * (v0[0] + v1[0]), half * (v0[1] + v1[1])];
            let done = converged(&next, &dq);
            dq = next;
            if done {
                break;
            }
        }

        let mut next = s.drifted(&dq, p_half);
        let (_, pd) = self.field_at(&next.q, &p_half);
        next.p = [p_half[0] + half * pd[0], p_half[1] + half * pd[1]];

        // Back onto the energy level of the input state.
        let target = self.hamiltonian(s);
        let reached = self.hamiltonian(&next);
        if target > 0.0 && reached > 0.0 {
            let scale = math::sqrt(target / reached);
            next.p = next.p.map(|x| x * scale);
        }
        next
    }

    fn energy(&self, s: &PhaseState<2>) -> f64 {
        self.hamiltonian(s)
    }

    fn field(&self, s: &PhaseState<2>) -> PhaseVec {
        let (qd, pd) = self.vector_field(s);
        [qd[0], qd[1], pd[0], pd[1], 0.0, 0.0]
    }

    fn offset(&self, from: &PhaseState<2>, to: &PhaseState<2>) -> PhaseVec {
        from.offset(to)
    }

    fn phase_dim(&self) -> usize {
        4
    }

    fn displaced(&self, s: &PhaseState<2>, delta: &PhaseVec) -> PhaseState<2> {
        s.displaced(delta)
    }
}

impl ObservedFlow<2> for ConformalSystem {
    fn velocity(&self, s: &PhaseState<2>) -> [f64; 2] {
        self.vector_field(s).0
    }

    /// `q̈ = 2e^ρ [(∇ρ·q̇) p + ṗ]`.
    fn acceleration(&self, s: &PhaseState<2>) -> [f64; 2] {
        let (r, g) = self.rho.value_and_gradient(&s.q);
        let e = math::exp(r);
        let p = s.p;
        let p2 = p[0] * p[0] + p[1] * p[1];
        let qd = [2.0 * e * p[0], 2.0 * e * p[1]];
        let slope = g[0] * qd[0] + g[1] * qd[1];
        core::array::from_fn(|i| 2.0 * e * (slope * p[i] - e * p2 * g[i]))
    }
}

/// Free geodesic flow on the unit sphere, `H = |p|²` with `v = 2p`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SphereSystem;

impl SphereSystem {
    fn deriv(x: &[f64; 3], v: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
        let s2 = math::dot(v, v);
        (*v, x.map(|c| -s2 * c))
    }
}

fn axpy3(a: &[f64; 3], h: f64, d: &[f64; 3]) -> [f64; 3] {
    core::array::from_fn(|i| a[i] + h * d[i])
}

impl PhaseFlow for SphereSystem {
    type State = SphereState;

    fn tag(&self) -> MetricTag {
        MetricTag::RoundSphere
    }

    fn advance(&self, s: &SphereState, dt: f64) -> SphereState {
        let x0 = s.x.as_array();
        let v0 = s.v;
        let speed = math::norm(&v0);
        let (k1x, k1v) = Self::deriv(&x0, &v0);
        let (k2x, k2v) = Self::deriv(&axpy3(&x0, 0.5 * dt, &k1x), &axpy3(&v0, 0.5 * dt, &k1v));
        let (k3x, k3v) = Self::deriv(&axpy3(&x0, 0.5 * dt, &k2x), &axpy3(&v0, 0.5 * dt, &k2v));
        let (k4x, k4v) = Self::deriv(&axpy3(&x0, dt, &k3x), &axpy3(&v0, dt, &k3v));
        let x: [f64; 3] = core::array::from_fn(|i| {
            x0[i] + dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i])
        });
        let v: [f64; 3] = core::array::from_fn(|i| {
            v0[i] + dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
        });

        // Renormalize onto the unit sphere, project to the tangent plane and
        // restore the speed.
        let n = math::norm(&x);
        let x = x.map(|c| c / n);
        let radial = math::dot(&x, &v);
        let mut v: [f64; 3] = core::array::from_fn(|i| v[i] - radial * x[i]);
        let vn = math::norm(&v);
        if vn > 0.0 {
            v = v.map(|c| c * speed / vn);
        }
        SphereState {
            x: SpherePoint {
                x: x[0],
                y: x[1],
                z: x[2],
            },
            v,
        }
    }

    fn energy(&self, s: &SphereState) -> f64 {
        0.25 * math::dot(&s.v, &s.v)
    }

    fn field(&self, s: &SphereState) -> PhaseVec {
        let (xd, vd) = Self::deriv(&s.x.as_array(), &s.v);
        [xd[0], xd[1], xd[2], vd[0], vd[1], vd[2]]
    }

    fn offset(&self, from: &SphereState, to: &SphereState) -> PhaseVec {
        let a = from.x.as_array();
        let b = to.x.as_array();
        [
            b[0] - a[0],
            b[1] - a[1],
            b[2] - a[2],
            to.v[0] - from.v[0],
            to.v[1] - from.v[1],
            to.v[2] - from.v[2],
        ]
    }

    fn phase_dim(&self) -> usize {
        6
    }

    fn displaced(&self, s: &SphereState, delta: &PhaseVec) -> SphereState {
        SphereState {
            x: SpherePoint {
                x: s.x.x + delta[0],
                y: s.x.y + delta[1],
                z: s.x.z + delta[2],
            },
            v: [s.v[0] + delta[3], s.v[1] + delta[4], s.v[2] + delta[5]],
        }
    }
}

/// A uniformly sampled run of a flow.
#[derive(Debug, Clone)]
pub struct Trajectory<S: PhaseFlow> {
    pub system: S,
    pub dt: f64,
    pub energy0: f64,
    /// `max_i |H_i - H_0| / max(1, |H_0|)`.
    pub max_drift: f64,
    pub drift_tol: f64,
    pub times: Vec<f64>,
    pub states: Vec<S::State>,
}

impl<S: PhaseFlow> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&S::State> {
        self.states.last()
    }

    /// Keeps every `stride`-th sample; the result is sampled at `stride·dt`.
    pub fn decimate(&self, stride: usize) -> Self
    where
        S: Clone,
    {
        let stride = stride.max(1);
        Trajectory {
            system: self.system.clone(),
            dt: self.dt * stride as f64,
            energy0: self.energy0,
            max_drift: self.max_drift,
            drift_tol: self.drift_tol,
            times: self.times.iter().step_by(stride).copied().collect(),
            states: self.states.iter().step_by(stride).cloned().collect(),
        }
    }

    /// The first `n` samples.
    pub fn prefix(&self, n: usize) -> Self
    where
        S: Clone,
    {
        let n = n.min(self.len());
        Trajectory {
            system: self.system.clone(),
            dt: self.dt,
            energy0: self.energy0,
            max_drift: self.max_drift,
            drift_tol: self.drift_tol,
            times: self.times[..n].to_vec(),
            states: self.states[..n].to_vec(),
        }
    }
}

fn relative_drift(h: f64, h0: f64) -> f64 {
    math::abs(h - h0) / math::abs(h0).max(1.0)
}

/// Number of steps for a horizon, tolerant to `horizon / dt` landing a hair
/// below an integer.
pub(crate) fn step_count(dt: f64, horizon: f64) -> usize {
    math::floor(horizon / dt + 1e-9) as usize
}

/// Integrates `system` from `state0` with fixed step `dt` up to `horizon`,
/// recording every step. Fails with the offending step if the relative
/// energy drift ever exceeds `drift_tol`.
pub fn integrate<S: PhaseFlow>(
    system: S,
    state0: S::State,
    dt: f64,
    horizon: f64,
    drift_tol: f64,
) -> Result<Trajectory<S>> {
    integrate_sampled(system, state0, dt, 1, horizon, drift_tol)
}

/// Like [`integrate`], but takes `substeps` integrator steps of size
/// `dt / substeps` between recorded samples. The trajectory is sampled at
/// `dt`; the drift gate is checked after every integrator step.
pub fn integrate_sampled<S: PhaseFlow>(
    system: S,
    state0: S::State,
    dt: f64,
    substeps: usize,
    horizon: f64,
    drift_tol: f64,
) -> Result<Trajectory<S>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument("step must be positive and finite"));
    }
    if !(horizon.is_finite() && horizon >= dt) {
        return Err(Error::InvalidArgument("horizon must be at least one step"));
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be at least 1"));
    }
    let samples = step_count(dt, horizon);
    let h = dt / substeps as f64;
    let energy0 = system.energy(&state0);
    let mut times = Vec::with_capacity(samples + 1);
    let mut states = Vec::with_capacity(samples + 1);
    times.push(0.0);
    states.push(state0.clone());
    let mut current = state0;
    let mut max_drift: f64 = 0.0;
    for i in 1..=samples {
        for j in 0..substeps {
            current = system.advance(&current, h);
            let drift = relative_drift(system.energy(&current), energy0);
            if !(drift <= drift_tol) {
                return Err(Error::DriftExceeded {
                    step: (i - 1) * substeps + j + 1,
                    drift,
                    tolerance: drift_tol,
                });
            }
            max_drift = max_drift.max(drift);
        }
        times.push(i as f64 * dt);
        states.push(current.clone());
    }
    Ok(Trajectory {
        system,
        dt,
        energy0,
        max_drift,
        drift_tol,
        times,
        states,
    })
}

/// Integrates `q̈ = -2∇U(q)` on the 2-torus.
pub fn integrate_natural(
    state0: PhaseState<2>,
    potential: &FourierSeries2D,
    dt: f64,
    horizon: f64,
    drift_tol: f64,
) -> Result<Trajectory<NaturalSystem<2>>> {
    integrate(
        NaturalSystem::new(potential.clone()),
        state0,
        dt,
        horizon,
        drift_tol,
    )
}

pub fn hamiltonian(state: &PhaseState<2>, potential: &FourierSeries2D) -> f64 {
    state.p[0] * state.p[0] + state.p[1] * state.p[1] + potential.evaluate(&state.q)
}

pub fn vector_field(state: &PhaseState<2>, potential: &FourierSeries2D) -> ([f64; 2], [f64; 2]) {
    let g = potential.gradient(&state.q);
    ([2.0 * state.p[0], 2.0 * state.p[1]], [-g[0], -g[1]])
}

pub fn conformal_vector_field(
    state: &PhaseState<2>,
    rho: &FourierSeries2D,
) -> ([f64; 2], [f64; 2]) {
    let (r, g) = rho.value_and_gradient(&state.q);
    let e = math::exp(r);
    let p2 = state.p[0] * state.p[0] + state.p[1] * state.p[1];
    (
        [2.0 * e * state.p[0], 2.0 * e * state.p[1]],
        [-e * p2 * g[0], -e * p2 * g[1]],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationMode {
    /// Velocity and acceleration read from the simulated field.
    Exact,
    /// Central differences of the unwrapped positions; endpoints dropped.
    PositionsOnly,
}

impl ObservationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ObservationMode::Exact => "exact",
            ObservationMode::PositionsOnly => "positions-only",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries<const D: usize> {
    pub mode: ObservationMode,
    pub times: Vec<f64>,
    pub positions: Vec<[f64; D]>,
    pub velocities: Vec<[f64; D]>,
    pub accelerations: Vec<[f64; D]>,
}

impl<const D: usize> ObservationSeries<D> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Lift increment between consecutive samples, formed from the small wrapped
/// coordinates and the integer winding change.
fn lift_increment<const D: usize>(a: &PhaseState<D>, b: &PhaseState<D>) -> [f64; D] {
    core::array::from_fn(|i| (b.q[i] - a.q[i]) + TAU * (b.winding[i] - a.winding[i]) as f64)
}

pub fn observe<const D: usize, S: ObservedFlow<D>>(
    traj: &Trajectory<S>,
    mode: ObservationMode,
) -> Result<ObservationSeries<D>> {
    let n = traj.len();
    match mode {
        ObservationMode::Exact => {
            if n == 0 {
                return Err(Error::TooFewSamples { needed: 1, got: 0 });
            }
            Ok(ObservationSeries {
                mode,
                times: traj.times.clone(),
                positions: traj.states.iter().map(|s| s.q).collect(),
                velocities: traj
                    .states
                    .iter()
                    .map(|s| traj.system.velocity(s))
                    .collect(),
                accelerations: traj
                    .states
                    .iter()
                    .map(|s| traj.system.acceleration(s))
                    .collect(),
            })
        }
        ObservationMode::PositionsOnly => {
            if n < 3 {
                return Err(Error::TooFewSamples { needed: 3, got: n });
            }
            let dt = traj.dt;
            let mut out = ObservationSeries {
                mode,
                times: Vec::with_capacity(n - 2),
                positions: Vec::with_capacity(n - 2),
                velocities: Vec::with_capacity(n - 2),
                accelerations: Vec::with_capacity(n - 2),
            };
            for i in 1..n - 1 {
                let back = lift_increment(&traj.states[i - 1], &traj.states[i]);
                let fwd = lift_increment(&traj.states[i], &traj.states[i + 1]);
                out.times.push(traj.times[i]);
                out.positions.push(traj.states[i].q);
                out.velocities
                    .push(core::array::from_fn(|d| (fwd[d] + back[d]) / (2.0 * dt)));
                out.accelerations
                    .push(core::array::from_fn(|d| (fwd[d] - back[d]) / (dt * dt)));
            }
            Ok(out)
        }
    }
}

fn random_direction<const D: usize>(rng: &mut ChaCha8Rng) -> [f64; D] {
    // Box–Muller normals, normalized: uniform on the sphere in any dimension.
    loop {
        let v: [f64; D] = core::array::from_fn(|_| {
            let u1: f64 = 1.0 - rng.gen::<f64>();
            let u2: f64 = rng.gen();
            math::sqrt(-2.0 * math::ln(u1)) * math::cos(TAU * u2)
        });
        let n = math::norm(&v);
        if n > 1e-12 {
            return v.map(|c| c / n);
        }
    }
}

/// Seeded initial condition on the energy level `H = energy` of a natural
/// system: `q` uniform on the torus (resampled until it lies in the Hill
/// region), momentum direction uniform.
pub fn random_state_on_level<const D: usize>(
    potential: &FourierSeries<D>,
    energy: f64,
    seed: u64,
) -> Result<PhaseState<D>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let q: [f64; D] = core::array::from_fn(|_| rng.gen::<f64>() * TAU);
        let u = potential.evaluate(&q);
        if u <= energy {
            let speed = math::sqrt(energy - u);
            let dir = random_direction::<D>(&mut rng);
            return PhaseState::new(q, dir.map(|c| speed * c));
        }
    }
    Err(Error::EnergyBelowPotentialMax {
        energy,
        bound: potential.sup_bound(),
    })
}

/// Seeded initial condition for the conformal system with `H = energy`.
pub fn random_conformal_state(
    rho: &FourierSeries2D,
    energy: f64,
    seed: u64,
) -> Result<PhaseState<2>> {
    if !(energy > 0.0) {
        return Err(Error::InvalidArgument("conformal energy must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = [rng.gen::<f64>() * TAU, rng.gen::<f64>() * TAU];
    let speed = math::sqrt(energy * math::exp(-rho.evaluate(&q)));
    let dir = random_direction::<2>(&mut rng);
    PhaseState::new(q, dir.map(|c| speed * c))
}

/// Seeded unit-sphere initial condition with `|v| = 2√energy`.
pub fn random_sphere_state(energy: f64, seed: u64) -> Result<SphereState> {
    if !(energy > 0.0) {
        return Err(Error::InvalidArgument("sphere energy must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_direction::<3>(&mut rng);
    let w = random_direction::<3>(&mut rng);
    let radial = math::dot(&x, &w);
    let t: [f64; 3] = core::array::from_fn(|i| w[i] - radial * x[i]);
    let tn = math::norm(&t);
    let speed = 2.0 * math::sqrt(energy);
    let v = t.map(|c| c * speed / tn);
    let x = SpherePoint::from_array(x)?;
    // Re-project after normalization so tangency holds to rounding.
    let xa = x.as_array();
    let r = math::dot(&xa, &v);
    let v: [f64; 3] = core::array::from_fn(|i| v[i] - r * xa[i]);
    SphereState::new(x, v)
}
