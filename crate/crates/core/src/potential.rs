//! Band-limited real trigonometric series on the flat `D`-torus.
//!
//! A series is `mean + Σ_k [a_k cos(k·q) + b_k sin(k·q)]` over the canonical
//! half of the band `0 < |k|_∞ ≤ K_max`: of each pair `{k, -k}` only the one
//! whose first nonzero component is positive is stored.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;

/// Largest supported band limit. Evaluation keeps its phase tables on the
/// stack.
pub const MAX_BAND: u32 = 16;
const TABLE: usize = MAX_BAND as usize + 1;

pub type FourierSeries2D = FourierSeries<2>;
pub type FourierSeries3D = FourierSeries<3>;

#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries<const D: usize> {
    k_max: u32,
    mean: f64,
    waves: Vec<[i32; D]>,
    /// `[a_k, b_k]`, aligned with `waves`.
    coeffs: Vec<[f64; 2]>,
}

/// True when the first nonzero component of `k` is positive.
pub fn is_canonical<const D: usize>(k: &[i32; D]) -> bool {
    k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

/// Canonical wave vectors with `0 < |k|_∞ ≤ k_max`, in lexicographic order.
pub fn canonical_band<const D: usize>(k_max: u32) -> Vec<[i32; D]> {
    let k = k_max as i32;
    let side = (2 * k + 1) as usize;
    let total = side.pow(D as u32);
    let mut out = Vec::with_capacity((total - 1) / 2);
    for idx in 0..total {
        let mut rem = idx;
        let mut wave = [0i32; D];
        for c in wave.iter_mut().rev() {
            *c = (rem % side) as i32 - k;
            rem /= side;
        }
        if is_canonical(&wave) {
            out.push(wave);
        }
    }
    out
}

/// Number of stored wave vectors for a band: `((2K+1)^D - 1) / 2`.
pub fn band_size<const D: usize>(k_max: u32) -> usize {
    ((2 * k_max as usize + 1).pow(D as u32) - 1) / 2
}

impl<const D: usize> FourierSeries<D> {
    pub fn zero(k_max: u32) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::ZeroBandLimit);
        }
        if k_max > MAX_BAND {
            return Err(Error::InvalidArgument("band limit exceeds MAX_BAND"));
        }
        let waves = canonical_band::<D>(k_max);
        let coeffs = alloc::vec![[0.0; 2]; waves.len()];
        Ok(FourierSeries {
            k_max,
            mean: 0.0,
            waves,
            coeffs,
        })
    }

    /// Builds a series from coefficients laid out as `[a_0, b_0, a_1, b_1, ...]`
    /// in canonical band order.
    pub fn from_flat(k_max: u32, mean: f64, flat: &[f64]) -> Result<Self> {
        let mut s = Self::zero(k_max)?;
        if flat.len() != 2 * s.waves.len() {
            return Err(Error::InvalidArgument(
                "coefficient vector length does not match band",
            ));
        }
        for (c, pair) in s.coeffs.iter_mut().zip(flat.chunks_exact(2)) {
            *c = [pair[0], pair[1]];
        }
        s.mean = mean;
        Ok(s)
    }

    /// Seeded random series: every coefficient independently uniform in
    /// `[-amplitude, amplitude)`, mean zero.
    pub fn random(seed: u64, k_max: u32, amplitude: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidArgument(
                "amplitude must be finite and nonnegative",
            ));
        }
        let mut s = Self::zero(k_max)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in s.coeffs.iter_mut() {
            let a: f64 = rng.gen();
            let b: f64 = rng.gen();
            *c = [amplitude * (2.0 * a - 1.0), amplitude * (2.0 * b - 1.0)];
        }
        Ok(s)
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn set_mean(&mut self, mean: f64) {
        self.mean = mean;
    }

    pub fn waves(&self) -> &[[i32; D]] {
        &self.waves
    }

    pub fn len(&self) -> usize {
        self.waves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waves.is_empty()
    }

    /// `(k, a_k, b_k)` for every stored wave vector.
    pub fn terms(&self) -> impl Iterator<Item = ([i32; D], f64, f64)> + '_ {
        self.waves
            .iter()
            .zip(&self.coeffs)
            .map(|(k, c)| (*k, c[0], c[1]))
    }

    /// Coefficients as `[a_0, b_0, a_1, b_1, ...]`.
    pub fn flat_coefficients(&self) -> Vec<f64> {
        self.coeffs.iter().flat_map(|c| c.iter().copied()).collect()
    }

    fn index_of(&self, k: &[i32; D]) -> Option<usize> {
        self.waves.binary_search(k).ok()
    }

    /// Sets the term for `k`, storing it under the canonical representative
    /// (`cos` is even, `sin` is odd, so `-k` flips the sign of `b`).
    pub fn set_term(&mut self, k: [i32; D], a: f64, b: f64) -> Result<()> {
        let (k, b) = if is_canonical(&k) {
            (k, b)
        } else {
            (k.map(|c| -c), -b)
        };
        let i = self.index_of(&k).ok_or(Error::InvalidWaveVector)?;
        self.coeffs[i] = [a, b];
        Ok(())
    }

    pub fn with_term(mut self, k: [i32; D], a: f64, b: f64) -> Result<Self> {
        self.set_term(k, a, b)?;
        Ok(self)
    }

    /// `(a_k, b_k)` as seen from `k` (which need not be canonical); zero for
    /// wave vectors outside the band.
    pub fn coefficient(&self, k: [i32; D]) -> (f64, f64) {
        let (k, sign) = if is_canonical(&k) {
            (k, 1.0)
        } else {
            (k.map(|c| -c), -1.0)
        };
        match self.index_of(&k) {
            Some(i) => (self.coeffs[i][0], sign * self.coeffs[i][1]),
            None => (0.0, 0.0),
        }
    }

    /// Calls `f(index, cos(k·q), sin(k·q))` for every stored wave vector.
    #[inline]
    pub(crate) fn for_each_phase(&self, q: &[f64; D], mut f: impl FnMut(usize, f64, f64)) {
        // powers[d][m] = e^{i m q_d}
        let mut powers = [[(1.0f64, 0.0f64); TABLE]; D];
        let k = self.k_max as usize;
        for (d, row) in powers.iter_mut().enumerate() {
            let (s, c) = math::sin_cos(q[d]);
            row[1] = (c, s);
            for m in 2..=k {
                let (pr, pi) = row[m - 1];
                row[m] = (pr * c - pi * s, pr * s + pi * c);
            }
        }
        for (i, wave) in self.waves.iter().enumerate() {
            let (mut re, mut im) = (1.0, 0.0);
            for d in 0..D {
                let m = wave[d];
                if m == 0 {
                    continue;
                }
                let (pr, pi) = powers[d][m.unsigned_abs() as usize];
                let pi = if m < 0 { -pi } else { pi };
                let nr = re * pr - im * pi;
                im = re * pi + im * pr;
                re = nr;
            }
            f(i, re, im);
        }
    }

    pub fn evaluate(&self, q: &[f64; D]) -> f64 {
        let mut sum = 0.0;
        self.for_each_phase(q, |i, c, s| {
            let [a, b] = self.coeffs[i];
            sum += a * c + b * s;
        });
        self.mean + sum
    }

    /// `∇U(q)`; the force is its negative.
    pub fn gradient(&self, q: &[f64; D]) -> [f64; D] {
        self.value_and_gradient(q).1
    }

    pub fn value_and_gradient(&self, q: &[f64; D]) -> (f64, [f64; D]) {
        let mut value = 0.0;
        let mut grad = [0.0; D];
        self.for_each_phase(q, |i, c, s| {
            let [a, b] = self.coeffs[i];
            value += a * c + b * s;
            let slope = b * c - a * s;
            for (g, &kd) in grad.iter_mut().zip(&self.waves[i]) {
                *g += kd as f64 * slope;
            }
        });
        (self.mean + value, grad)
    }

    /// `|mean| + Σ (|a_k| + |b_k|)`, a certified upper bound for `sup |U|`.
    pub fn sup_bound(&self) -> f64 {
        math::abs(self.mean)
            + self
                .coeffs
                .iter()
                .map(|c| math::abs(c[0]) + math::abs(c[1]))
                .sum::<f64>()
    }

    /// `Σ |k| (|a_k| + |b_k|)`, an upper bound for `sup |∇U|`.
    pub fn gradient_bound(&self) -> f64 {
        self.terms()
            .map(|(k, a, b)| {
                let kn = math::sqrt(k.iter().map(|&c| (c * c) as f64).sum());
                kn * (math::abs(a) + math::abs(b))
            })
            .sum()
    }

    /// Largest `|U|` over a uniform grid with `n` points per side.
    pub fn grid_sup_abs(&self, n: usize) -> f64 {
        self.grid_extrema(n).1
    }

    /// Largest `U` over a uniform grid with `n` points per side.
    pub fn grid_max(&self, n: usize) -> f64 {
        self.grid_extrema(n).0
    }

    fn grid_extrema(&self, n: usize) -> (f64, f64) {
        let total = n.pow(D as u32);
        let h = math::TAU / n as f64;
        let mut max = f64::NEG_INFINITY;
        let mut sup_abs: f64 = 0.0;
        for idx in 0..total {
            let mut rem = idx;
            let q: [f64; D] = core::array::from_fn(|_| {
                let i = rem % n;
                rem /= n;
                i as f64 * h
            });
            let u = self.evaluate(&q);
            max = max.max(u);
            sup_abs = sup_abs.max(math::abs(u));
        }
        (max, sup_abs)
    }

    pub fn is_zero(&self) -> bool {
        self.mean == 0.0 && self.coeffs.iter().all(|c| c[0] == 0.0 && c[1] == 0.0)
    }

    /// Adds a constant to the series.
    pub fn shifted(mut self, c: f64) -> Self {
        self.mean += c;
        self
    }
}

/// Convenience for the 2-torus: `U(q)`.
pub fn evaluate(u: &FourierSeries2D, q: crate::TorusPoint) -> f64 {
    u.evaluate(&q.as_array())
}

/// Convenience for the 2-torus: `∇U(q)`.
pub fn gradient(u: &FourierSeries2D, q: crate::TorusPoint) -> [f64; 2] {
    u.gradient(&q.as_array())
}

pub fn sup_bound_c0<const D: usize>(u: &FourierSeries<D>) -> f64 {
    u.sup_bound()
}

pub fn random_potential(seed: u64, k_max: u32, amplitude: f64) -> Result<FourierSeries2D> {
    FourierSeries::random(seed, k_max, amplitude)
}
