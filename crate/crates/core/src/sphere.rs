//! Riemannian primitives of the unit hypersphere `S^p ⊂ R^{p+1}`.
//!
//! Points are stored as plain coordinate vectors that are re-normalized on
//! construction. The geodesic distance is `arccos⟨x, y⟩`, the exponential map
//! follows great circles
//!
//! ```text
//! Exp_x(u) = cos(‖u‖) x + sin(‖u‖)/‖u‖ · u
//! ```
//!
//! and the logarithmic map is its inverse inside the injectivity radius π:
//!
//! ```text
//! Log_x(y) = d(x, y) / ‖Proj_x(y − x)‖ · Proj_x(y − x),   Proj_x(z) = z − ⟨x, z⟩ x
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this norm a tangent vector is treated as zero by `exp_map`, and below
/// this distance `log_map` returns the zero tangent.
pub const ZERO_TOLERANCE: f64 = 1e-14;

/// A point on the unit hypersphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector {
    coords: Vec<f64>,
}

impl UnitVector {
    /// Builds a point from ambient coordinates, re-normalizing them.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::TooFewCoordinates(coords.len()));
        }
        let norm = norm(&coords);
        if !norm.is_finite() || norm <= f64::MIN_POSITIVE {
            return Err(Error::NotNormalizable(norm));
        }
        // Leave already-normalized input bit-for-bit unchanged so that
        // serialized points round-trip exactly.
        if (norm - 1.0).abs() <= 2.0 * f64::EPSILON {
            return Ok(Self { coords });
        }
        let coords = coords.into_iter().map(|c| c / norm).collect();
        Ok(Self { coords })
    }

    /// The `i`-th standard basis vector of `R^{p+1}`, seen as a point on `S^p`.
    pub fn basis(p: usize, i: usize) -> Self {
        assert!(p >= 1 && i <= p, "basis index out of range");
        let mut coords = vec![0.0; p + 1];
        coords[i] = 1.0;
        Self { coords }
    }

    /// Builds a point from coordinates already known to be unit norm up to
    /// round-off; they are re-normalized but never rejected.
    pub(crate) fn from_raw(mut coords: Vec<f64>) -> Self {
        let n = norm(&coords);
        debug_assert!(n > 0.0 && n.is_finite());
        if (n - 1.0).abs() > 2.0 * f64::EPSILON {
            coords.iter_mut().for_each(|c| *c /= n);
        }
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Intrinsic dimension `p` of the sphere this point lives on.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    /// Number of ambient coordinates, `p + 1`.
    pub fn ambient_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn antipode(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }

    fn check_same_dim(&self, other: usize) -> Result<()> {
        if self.coords.len() != other {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                found: other,
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(v: UnitVector) -> Self {
        v.coords
    }
}

/// A vector in the tangent space `T_x S^p`, carrying its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: UnitVector,
    vec: Vec<f64>,
}

impl TangentVector {
    /// Projects `z` onto the tangent space at `base`.
    pub fn new(base: UnitVector, z: &[f64]) -> Result<Self> {
        base.check_same_dim(z.len())?;
        let mut vec = z.to_vec();
        project_in_place(base.coords(), &mut vec);
        Ok(Self { base, vec })
    }

    pub fn zero(base: UnitVector) -> Self {
        let vec = vec![0.0; base.ambient_dim()];
        Self { base, vec }
    }

    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    pub fn vec(&self) -> &[f64] {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        norm(&self.vec)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            base: self.base.clone(),
            vec: self.vec.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Great-circle distance `arccos⟨x, y⟩ ∈ [0, π]`.
pub fn geodesic_distance(x: &UnitVector, y: &UnitVector) -> Result<f64> {
    x.check_same_dim(y.ambient_dim())?;
    Ok(distance(x.coords(), y.coords()))
}

/// `Proj_x(z) = z − ⟨x, z⟩ x`.
pub fn project_to_tangent(x: &UnitVector, z: &[f64]) -> Result<TangentVector> {
    TangentVector::new(x.clone(), z)
}

pub fn exp_map(x: &UnitVector, u: &TangentVector) -> Result<UnitVector> {
    x.check_same_dim(u.vec.len())?;
    Ok(UnitVector::from_raw(exp_raw(x.coords(), u.vec())))
}

pub fn log_map(x: &UnitVector, y: &UnitVector) -> Result<TangentVector> {
    x.check_same_dim(y.ambient_dim())?;
    let mut out = vec![0.0; x.ambient_dim()];
    if !log_raw(x.coords(), y.coords(), &mut out) {
        return Err(Error::AntipodalPoints);
    }
    Ok(TangentVector {
        base: x.clone(),
        vec: out,
    })
}

// Slice-level kernels shared by the estimators. Callers guarantee equal lengths.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Geodesic distance between two unit vectors.
///
/// `arccos` of the clamped inner product; close to 0 and π the equivalent chord
/// form `2 asin(‖x ∓ y‖ / 2)` is used because `arccos` loses half the digits there.
pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    let c = dot(x, y).clamp(-1.0, 1.0);
    if c.abs() < 0.9 {
        return c.acos();
    }
    let chord = if c > 0.0 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    } else {
        x.iter().zip(y).map(|(a, b)| (a + b) * (a + b)).sum::<f64>()
    }
    .sqrt();
    let half = 2.0 * (0.5 * chord).min(1.0).asin();
    if c > 0.0 {
        half
    } else {
        std::f64::consts::PI - half
    }
}

pub(crate) fn project_in_place(x: &[f64], z: &mut [f64]) {
    let c = dot(x, z);
    z.iter_mut().zip(x).for_each(|(zi, xi)| *zi -= c * xi);
}

pub(crate) fn exp_raw(x: &[f64], u: &[f64]) -> Vec<f64> {
    let n = norm(u);
    if n < ZERO_TOLERANCE {
        return x.to_vec();
    }
    let (s, c) = n.sin_cos();
    let k = s / n;
    x.iter().zip(u).map(|(xi, ui)| c * xi + k * ui).collect()
}

/// Writes `Log_x(y)` into `out`. Returns `false` when `y` is antipodal to `x`
/// (direction undefined); `out` is then zeroed.
pub(crate) fn log_raw(x: &[f64], y: &[f64], out: &mut [f64]) -> bool {
    let d = distance(x, y);
    let c = dot(x, y);
    out.iter_mut()
        .zip(x.iter().zip(y))
        .for_each(|(o, (xi, yi))| *o = yi - c * xi);
    if d < ZERO_TOLERANCE {
        out.iter_mut().for_each(|o| *o = 0.0);
        return true;
    }
    let pn = norm(out);
    if pn <= 1e-300 || d >= std::f64::consts::PI {
        out.iter_mut().for_each(|o| *o = 0.0);
        return false;
    }
    let k = d / pn;
    out.iter_mut().for_each(|o| *o *= k);
    true
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use proptest::prelude::*;

    use super::*;

    fn uv(c: &[f64]) -> UnitVector {
        UnitVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let e0 = uv(&[1.0, 0.0, 0.0]);
        assert_eq!(geodesic_distance(&e0, &e0).unwrap(), 0.0);
        let d = geodesic_distance(&e0, &uv(&[0.0, 1.0, 0.0])).unwrap();
        assert!((d - FRAC_PI_2).abs() < 1e-15);
        let d = geodesic_distance(&e0, &uv(&[-1.0, 0.0, 0.0])).unwrap();
        assert!((d - PI).abs() < 1e-15);
    }

    #[test]
    fn distance_dimension_mismatch() {
        let a = uv(&[1.0, 0.0]);
        let b = uv(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            geodesic_distance(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constructor_renormalizes_and_rejects() {
        let v = uv(&[3.0, 4.0]);
        assert!((v.coords()[0] - 0.6).abs() < 1e-16);
        assert!(UnitVector::new(vec![1.0]).is_err());
        assert!(UnitVector::new(vec![0.0, 0.0]).is_err());
        assert!(UnitVector::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn projection_examples() {
        let x = uv(&[1.0, 0.0, 0.0]);
        assert_eq!(
            project_to_tangent(&x, &[1.0, 0.0, 0.0]).unwrap().vec(),
            &[0.0; 3]
        );
        assert_eq!(
            project_to_tangent(&x, &[0.0, 2.0, 0.0]).unwrap().vec(),
            &[0.0, 2.0, 0.0]
        );
        assert_eq!(
            project_to_tangent(&x, &[3.0, 4.0, 0.0]).unwrap().vec(),
            &[0.0, 4.0, 0.0]
        );
        assert_eq!(project_to_tangent(&x, &[0.0; 3]).unwrap().norm(), 0.0);
    }

    #[test]
    fn exp_map_examples() {
        let x = uv(&[1.0, 0.0]);
        assert_eq!(exp_map(&x, &TangentVector::zero(x.clone())).unwrap(), x);
        let u = project_to_tangent(&x, &[0.0, FRAC_PI_2]).unwrap();
        let y = exp_map(&x, &u).unwrap();
        assert!((y.coords()[0]).abs() < 1e-15 && (y.coords()[1] - 1.0).abs() < 1e-15);

        let x = uv(&[1.0, 0.0, 0.0]);
        let u = project_to_tangent(&x, &[0.0, PI, 0.0]).unwrap();
        let y = exp_map(&x, &u).unwrap();
        assert!((y.coords()[0] + 1.0).abs() < 1e-15);
        assert!(y.coords()[1].abs() < 1e-15);
    }

    #[test]
    fn log_map_examples() {
        let x = uv(&[1.0, 0.0]);
        assert_eq!(log_map(&x, &x).unwrap().norm(), 0.0);
        let v = log_map(&x, &uv(&[0.0, 1.0])).unwrap();
        assert!(v.vec()[0].abs() < 1e-15 && (v.vec()[1] - FRAC_PI_2).abs() < 1e-15);

        let x = uv(&[1.0, 0.0, 0.0]);
        let y = uv(&[0.3f64.cos(), 0.3f64.sin(), 0.0]);
        let v = log_map(&x, &y).unwrap();
        assert!((v.norm() - 0.3).abs() < 1e-14);
        assert!((v.vec()[1] - 0.3).abs() < 1e-14);
        assert!(v.vec()[2].abs() < 1e-15);
    }

    #[test]
    fn log_map_antipodal_is_error() {
        let x = uv(&[0.0, 0.0, 1.0]);
        assert!(matches!(
            log_map(&x, &x.antipode()),
            Err(Error::AntipodalPoints)
        ));
    }

    #[test]
    fn distance_is_accurate_near_zero_and_pi() {
        let x = uv(&[1.0, 0.0, 0.0]);
        for t in [1e-9_f64, 1e-6, 1e-3] {
            let y = uv(&[t.cos(), t.sin(), 0.0]);
            let d = geodesic_distance(&x, &y).unwrap();
            assert!((d - t).abs() < 1e-15 * t.max(1e-3), "{t} {d}");
            let z = uv(&[-t.cos(), t.sin(), 0.0]);
            let d = geodesic_distance(&x, &z).unwrap();
            assert!((d - (PI - t)).abs() < 1e-14, "{t} {d}");
        }
    }

    fn point(dim: usize) -> impl Strategy<Value = UnitVector> {
        prop::collection::vec(-1.0f64..1.0, dim)
            .prop_filter("non-zero", |v| norm(v) > 1e-3)
            .prop_map(|v| UnitVector::new(v).unwrap())
    }

    fn point_and_tangent() -> impl Strategy<Value = (UnitVector, TangentVector)> {
        (2usize..7).prop_flat_map(|dim| {
            (
                point(dim),
                prop::collection::vec(-1.0f64..1.0, dim),
                0.01f64..(PI - 0.1),
            )
                .prop_filter_map("tangent non-degenerate", |(x, z, len)| {
                    let t = project_to_tangent(&x, &z).unwrap();
                    let n = t.norm();
                    (n > 1e-3).then(|| {
                        let t = t.scaled(len / n);
                        (x, t)
                    })
                })
        })
    }

    proptest! {
        #[test]
        fn exp_log_round_trip((x, u) in point_and_tangent()) {
            let y = exp_map(&x, &u).unwrap();
            let back = log_map(&x, &y).unwrap();
            for (a, b) in back.vec().iter().zip(u.vec()) {
                prop_assert!((a - b).abs() < 1e-8);
            }
            let d = geodesic_distance(&x, &y).unwrap();
            prop_assert!((d - u.norm()).abs() < 1e-10);
            prop_assert!((norm(y.coords()) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn projection_idempotent(x in point(4), z in prop::collection::vec(-5.0f64..5.0, 4)) {
            let once = project_to_tangent(&x, &z).unwrap();
            let twice = project_to_tangent(&x, once.vec()).unwrap();
            for (a, b) in once.vec().iter().zip(twice.vec()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!(dot(x.coords(), once.vec()).abs() < 1e-10);
        }

        #[test]
        fn distance_symmetric_and_triangle(a in point(3), b in point(3), c in point(3)) {
            let ab = geodesic_distance(&a, &b).unwrap();
            let ba = geodesic_distance(&b, &a).unwrap();
            let bc = geodesic_distance(&b, &c).unwrap();
            let ac = geodesic_distance(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() < 1e-10);
            prop_assert!(ac <= ab + bc + 1e-10);
            prop_assert!((0.0..=PI).contains(&ab));
        }
    }
}
