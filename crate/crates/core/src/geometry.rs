//! Charts and kinematics for the supported configuration spaces: the flat
//! tori `R^n / 2πZ^n` (n = 2, 3) and the unit sphere embedded in `R^3`.

use core::fmt;

use crate::error::{Error, Result};
use crate::math::{self, PI, TAU};

/// Largest `|<x, v>|` accepted as a tangent velocity on the unit sphere.
pub const TANGENCY_TOL: f64 = 1e-10;

/// Which metric a dynamical run lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricTag {
    FlatTorus2,
    RoundSphere,
    FlatTorus3,
    /// `e^{ρ(q)} (p1² + p2²)` on the 2-torus; the exponent is owned by the
    /// conformal system.
    ConformalTorus,
}

impl MetricTag {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricTag::FlatTorus2 => "flat-torus-2",
            MetricTag::RoundSphere => "round-sphere",
            MetricTag::FlatTorus3 => "flat-torus-3",
            MetricTag::ConformalTorus => "conformal-torus",
        }
    }
}

impl fmt::Display for MetricTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A point of the flat 2-torus, both angles in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    pub q1: f64,
    pub q2: f64,
}

impl TorusPoint {
    pub fn as_array(self) -> [f64; 2] {
        [self.q1, self.q2]
    }
}

impl From<[f64; 2]> for TorusPoint {
    /// Assumes the components are already wrapped.
    fn from(q: [f64; 2]) -> Self {
        TorusPoint { q1: q[0], q2: q[1] }
    }
}

/// Reduces an angle into `[0, 2π)` and reports how many periods were removed,
/// so that `x ≈ wrapped + 2π·winding`.
pub fn wrap_angle(x: f64) -> (f64, i64) {
    let mut r = libm::fmod(x, TAU);
    let mut n = math::round((x - r) / TAU) as i64;
    if r < 0.0 {
        r += TAU;
        n -= 1;
    }
    // -tiny + 2π can round up to 2π itself.
    if r >= TAU {
        r = 0.0;
        n += 1;
    }
    (r, n)
}

pub fn wrap_to_fundamental_domain(raw: [f64; 2]) -> Result<TorusPoint> {
    if !raw.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("torus coordinates"));
    }
    Ok(TorusPoint {
        q1: wrap_angle(raw[0]).0,
        q2: wrap_angle(raw[1]).0,
    })
}

/// Minimal representative of `b - a` for two wrapped angles, in `[-π, π)`.
#[inline]
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let mut d = b - a;
    if d >= PI {
        d -= TAU;
    } else if d < -PI {
        d += TAU;
    }
    // Inputs outside [0, 2π) can leave d one period off.
    if !(-PI..PI).contains(&d) {
        d -= TAU * math::floor((d + PI) / TAU);
        if d >= PI {
            d -= TAU;
        }
    }
    d
}

/// Componentwise minimal displacement on the flat `D`-torus.
pub fn displacement<const D: usize>(a: &[f64; D], b: &[f64; D]) -> [f64; D] {
    core::array::from_fn(|i| angle_difference(a[i], b[i]))
}

/// Minimal-length representative of `b - a`; its Euclidean norm is the
/// flat-torus geodesic distance.
pub fn torus_displacement(a: TorusPoint, b: TorusPoint) -> [f64; 2] {
    displacement(&a.as_array(), &b.as_array())
}

pub fn torus_distance<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    math::norm(&displacement(a, b))
}

/// Conformal factor `E - U` of the Jacobi metric at a configuration point
/// where the potential equals `u`.
pub fn jacobi_metric_factor(energy: f64, u: f64) -> Result<f64> {
    if !energy.is_finite() || !u.is_finite() {
        return Err(Error::NonFinite("energy or potential value"));
    }
    if energy < u {
        return Err(Error::OutsideHillRegion {
            energy,
            potential: u,
        });
    }
    Ok(energy - u)
}

/// A point of the unit sphere in embedding coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpherePoint {
    /// Projects a nonzero vector onto the sphere.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_array([x, y, z])
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self> {
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("sphere coordinates"));
        }
        let n = math::norm(&v);
        if n == 0.0 {
            return Err(Error::InvalidArgument("cannot normalize the zero vector"));
        }
        Ok(SpherePoint {
            x: v[0] / n,
            y: v[1] / n,
            z: v[2] / n,
        })
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Great-circle geodesic field of the round sphere in the embedding:
/// `(ẋ, v̇) = (v, -|v|² x)`.
///
/// A zero velocity gives a zero field; such points are equilibria and are
/// rejected later by anything that needs a non-singular flow.
pub fn sphere_geodesic_field(x: SpherePoint, v: [f64; 3]) -> Result<([f64; 3], [f64; 3])> {
    if !v.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite("sphere velocity"));
    }
    let x = x.as_array();
    let radial = math::dot(&x, &v);
    if math::abs(radial) > TANGENCY_TOL {
        return Err(Error::NotTangent(radial));
    }
    let speed2 = math::dot(&v, &v);
    Ok((v, [-speed2 * x[0], -speed2 * x[1], -speed2 * x[2]]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_examples() {
        let p = wrap_to_fundamental_domain([0.0, 0.0]).unwrap();
        assert_eq!(p, TorusPoint { q1: 0.0, q2: 0.0 });

        let p = wrap_to_fundamental_domain([TAU, -PI]).unwrap();
        assert_eq!(p.q1, 0.0);
        assert!((p.q2 - PI).abs() < 1e-15);

        // 7 mod 2π by direct subtraction: 7 lies in [2π, 4π).
        let p = wrap_to_fundamental_domain([7.0, 7.0]).unwrap();
        assert!((p.q1 - 0.7168146928204138).abs() < 1e-15);
        assert_eq!(p.q1, p.q2);
    }

    #[test]
    fn wrap_rejects_non_finite() {
        assert!(wrap_to_fundamental_domain([f64::NAN, 0.0]).is_err());
        assert!(wrap_to_fundamental_domain([0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn wrap_tiny_negative_stays_in_range() {
        let (r, n) = wrap_angle(-1e-300);
        assert!((0.0..TAU).contains(&r));
        assert!(n == -1 || n == 0);
        let (r, n) = wrap_angle(-3.0 * TAU - 0.5);
        assert!((r - (TAU - 0.5)).abs() < 1e-12);
        assert_eq!(n, -4);
    }

    #[test]
    fn displacement_examples() {
        let a = TorusPoint { q1: 1.3, q2: 5.0 };
        assert_eq!(torus_displacement(a, a), [0.0, 0.0]);

        let d = torus_displacement(
            TorusPoint { q1: 0.0, q2: 0.0 },
            TorusPoint {
                q1: TAU - 0.1,
                q2: 0.0,
            },
        );
        assert!((d[0] + 0.1).abs() < 1e-15);
        assert_eq!(d[1], 0.0);

        // Brute force over the 9 nearest lattice translates.
        let a = [1.0, 2.0];
        let b = [4.0, 6.0];
        let mut best = [0.0; 2];
        let mut best_norm = f64::INFINITY;
        for i in -1..=1 {
            for j in -1..=1 {
                let c = [b[0] - a[0] + TAU * i as f64, b[1] - a[1] + TAU * j as f64];
                let n = (c[0] * c[0] + c[1] * c[1]).sqrt();
                if n < best_norm {
                    best_norm = n;
                    best = c;
                }
            }
        }
        let d = torus_displacement(a.into(), b.into());
        assert!((d[0] - best[0]).abs() < 1e-15 && (d[1] - best[1]).abs() < 1e-15);
        assert!((d[0] - 3.0).abs() < 1e-15);
        assert!((d[1] - (4.0 - TAU)).abs() < 1e-15);
    }

    #[test]
    fn jacobi_factor_examples() {
        assert_eq!(jacobi_metric_factor(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(jacobi_metric_factor(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(jacobi_metric_factor(2.0, -0.5).unwrap(), 2.5);
        assert!(matches!(
            jacobi_metric_factor(0.5, 1.0),
            Err(Error::OutsideHillRegion { .. })
        ));
    }

    #[test]
    fn sphere_field_examples() {
        let x = SpherePoint::new(1.0, 0.0, 0.0).unwrap();
        let (v, a) = sphere_geodesic_field(x, [0.0, 1.0, 0.0]).unwrap();
        assert_eq!(v, [0.0, 1.0, 0.0]);
        assert_eq!(a, [-1.0, 0.0, 0.0]);

        let (_, a) = sphere_geodesic_field(x, [0.0; 3]).unwrap();
        assert_eq!(a, [0.0; 3]);

        let x = SpherePoint::new(0.0, 0.0, 1.0).unwrap();
        let (_, a) = sphere_geodesic_field(x, [0.0, 2.0, 0.0]).unwrap();
        assert_eq!(a, [0.0, 0.0, -4.0]);

        assert!(matches!(
            sphere_geodesic_field(x, [0.0, 1.0, 1e-6]),
            Err(Error::NotTangent(_))
        ));
    }

    #[test]
    fn sphere_point_is_normalized() {
        let p = SpherePoint::new(3.0, -4.0, 12.0).unwrap();
        let n = p.x * p.x + p.y * p.y + p.z * p.z;
        assert!((n - 1.0).abs() < 1e-12);
        assert!(SpherePoint::new(0.0, 0.0, 0.0).is_err());
    }
}
