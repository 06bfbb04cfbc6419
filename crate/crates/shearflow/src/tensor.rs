//! Pointwise tensor calculus for the threshold nonlinearity.
//!
//! The constitutive response of a discontinuous shear-thickening fluid is
//! driven by the vector-valued soft-threshold map
//! `E ↦ max(0, |E| − g) · E/|E|` acting on symmetric strain-rate tensors,
//! together with its one-sided directional derivative and a C¹ smoothed
//! family indexed by a width `delta`. Everything here is a pure function of
//! its inputs; values are immutable and safe to share across threads.

use crate::error::{Error, Result};

/// Relative tolerance used to decide |E| = g in the directional derivative.
pub const EQ_TOL_REL: f64 = 1e-12;

/// A small symmetric matrix value (2x2 or 3x3), e.g. a strain rate.
///
/// Entries are symmetrized at construction, so `a[i][j] == a[j][i]` holds
/// exactly afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor {
    n: usize,
    a: [[f64; 3]; 3],
}

impl SymTensor {
    /// Builds an `n`-dimensional symmetric tensor from a full matrix,
    /// symmetrizing the off-diagonal entries.
    pub fn new(n: usize, entries: [[f64; 3]; 3]) -> Self {
        assert!(n == 2 || n == 3, "spatial dimension must be 2 or 3");
        let mut a = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = 0.5 * (entries[i][j] + entries[j][i]);
            }
        }
        debug_assert!(a.iter().flatten().all(|x| x.is_finite()));
        Self { n, a }
    }

    pub fn zero(n: usize) -> Self {
        assert!(n == 2 || n == 3);
        Self { n, a: [[0.0; 3]; 3] }
    }

    /// 2D strain tensor from its three independent components.
    pub fn from_2d(e00: f64, e01: f64, e11: f64) -> Self {
        let mut a = [[0.0; 3]; 3];
        a[0][0] = e00;
        a[0][1] = e01;
        a[1][0] = e01;
        a[1][1] = e11;
        Self { n: 2, a }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    /// Frobenius inner product `E : H`.
    pub fn dot(&self, other: &SymTensor) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j] * other.a[i][j];
            }
        }
        s
    }

    /// Frobenius norm `|E|`.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, c: f64) -> SymTensor {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.a[i][j] *= c;
            }
        }
        out
    }

    pub fn add(&self, other: &SymTensor) -> SymTensor {
        debug_assert_eq!(self.n, other.n);
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.a[i][j] += other.a[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &SymTensor) -> SymTensor {
        self.add(&other.scale(-1.0))
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &SymTensor) -> SymTensor {
        self.add(&other.scale(c))
    }
}

/// Fluid model parameters: viscosity, threshold and excess-stress weight.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FluidParams {
    /// Viscosity of the Newtonian part.
    pub mu: f64,
    /// Weight of the threshold (excess-stress) term.
    pub nu: f64,
    /// Activation threshold on |εy|.
    pub g: f64,
}

impl FluidParams {
    pub fn new(mu: f64, nu: f64, g: f64) -> Result<Self> {
        for (name, value) in [("mu", mu), ("nu", nu), ("g", g)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    constraint: "> 0",
                });
            }
        }
        Ok(Self { mu, nu, g })
    }
}

/// Smoothing width for the regularized threshold map; must stay below g.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegParam {
    pub delta: f64,
}

impl RegParam {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                constraint: "> 0",
            });
        }
        Ok(Self { delta })
    }
}

fn check_g(g: f64) -> Result<()> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::InvalidParameter {
            name: "g",
            value: g,
            constraint: "> 0",
        });
    }
    Ok(())
}

fn check_delta(g: f64, delta: f64) -> Result<()> {
    check_g(g)?;
    if !(delta > 0.0) || !(delta < g) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            constraint: "0 < delta < g",
        });
    }
    Ok(())
}

/// Soft threshold of the tensor norm: `max(0, |E| − g) · E/|E|`, with value 0
/// for |E| ≤ g. Equivalently the residual of the projection of E onto the
/// Frobenius ball of radius g.
pub fn soft_threshold(e: &SymTensor, g: f64) -> Result<SymTensor> {
    check_g(g)?;
    let s = e.norm();
    if s <= g {
        Ok(SymTensor::zero(e.dim()))
    } else {
        // (s - g)/s so that the arithmetic matches the smoothed map exactly
        // outside the smoothing band.
        Ok(e.scale((s - g) / s))
    }
}

/// One-sided directional derivative of [`soft_threshold`] at `e` in direction
/// `h`, with |E| = g decided by `|  |E| − g | <= tol_eq`.
///
/// Three cases: zero below the threshold, the linearization of
/// `E − g E/|E|` above it, and `max(0, E:H) E/g²` on the threshold sphere.
pub fn soft_threshold_dir_with_tol(
    e: &SymTensor,
    h: &SymTensor,
    g: f64,
    tol_eq: f64,
) -> Result<SymTensor> {
    check_g(g)?;
    let s = e.norm();
    if s < g - tol_eq {
        Ok(SymTensor::zero(e.dim()))
    } else if s > g + tol_eq {
        let c = e.dot(h);
        // H + g E (E:H)/|E|^3 − g H/|E|
        Ok(h.scale(1.0 - g / s).axpy(g * c / (s * s * s), e))
    } else {
        let c = e.dot(h);
        if c > 0.0 {
            Ok(e.scale(c / (g * g)))
        } else {
            Ok(SymTensor::zero(e.dim()))
        }
    }
}

/// [`soft_threshold_dir_with_tol`] with the default tolerance `1e-12 * g`.
pub fn soft_threshold_dir(e: &SymTensor, h: &SymTensor, g: f64) -> Result<SymTensor> {
    soft_threshold_dir_with_tol(e, h, g, EQ_TOL_REL * g)
}

/// C¹ smoothing of `x ↦ max(0, x)` with width `delta`.
///
/// Returns the value and its derivative. The middle branch on |x| ≤ δ is the
/// quartic `−x⁴/(16δ³) + 3x²/(8δ) + x/2 + 3δ/16`; value and slope match the
/// outer branches `x ↦ x` and `x ↦ 0` at ±δ.
pub fn smoothed_max(x: f64, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            constraint: "> 0",
        });
    }
    Ok(smoothed_max_unchecked(x, delta))
}

#[inline]
fn smoothed_max_unchecked(x: f64, delta: f64) -> (f64, f64) {
    if x > delta {
        (x, 1.0)
    } else if x < -delta {
        (0.0, 0.0)
    } else {
        let d3 = delta * delta * delta;
        let value = -x.powi(4) / (16.0 * d3) + 3.0 * x * x / (8.0 * delta) + 0.5 * x
            + 3.0 * delta / 16.0;
        let slope = -x.powi(3) / (4.0 * d3) + 3.0 * x / (4.0 * delta) + 0.5;
        (value, slope)
    }
}

/// Derivative of the slope `1_δ`, i.e. the second derivative of the smoothed
/// max; zero outside |x| ≤ δ.
#[inline]
fn smoothed_max_curvature(x: f64, delta: f64) -> f64 {
    if x.abs() <= delta {
        3.0 * (delta * delta - x * x) / (4.0 * delta * delta * delta)
    } else {
        0.0
    }
}

/// Scalar coefficient of the smoothed threshold map:
/// `phi(s) = max_δ(0, s) · 1_δ(s)` with `s = |E| − g`, and its derivative.
#[inline]
fn phi_and_derivative(s: f64, delta: f64) -> (f64, f64) {
    let (v, slope) = smoothed_max_unchecked(s, delta);
    let phi = v * slope;
    let dphi = slope * slope + v * smoothed_max_curvature(s, delta);
    (phi, dphi)
}

/// Smoothed threshold map `max_δ(0, |E|−g) · 1_δ(|E|−g) · E/|E|`.
///
/// Requires `0 < delta < g`, which keeps the map identically zero on a
/// neighborhood of E = 0 so the direction E/|E| is never formed there.
/// Coincides exactly with [`soft_threshold`] when `| |E| − g | > delta`.
pub fn soft_threshold_reg(e: &SymTensor, g: f64, delta: f64) -> Result<SymTensor> {
    check_delta(g, delta)?;
    let norm = e.norm();
    let s = norm - g;
    if s <= -delta {
        return Ok(SymTensor::zero(e.dim()));
    }
    let (phi, _) = phi_and_derivative(s, delta);
    Ok(e.scale(phi / norm))
}

/// Jacobian of [`soft_threshold_reg`] applied to a direction:
///
/// `phi'(s) (E:H/|E|) E/|E| + phi(s) (H/|E| − E (E:H)/|E|³)`, `s = |E| − g`,
///
/// zero for |E| ≤ g − δ. The map H ↦ result is self-adjoint, so this also
/// serves as the adjoint application.
pub fn soft_threshold_reg_jac(
    e: &SymTensor,
    h: &SymTensor,
    g: f64,
    delta: f64,
) -> Result<SymTensor> {
    check_delta(g, delta)?;
    let norm = e.norm();
    let s = norm - g;
    if s <= -delta {
        return Ok(SymTensor::zero(e.dim()));
    }
    let (phi, dphi) = phi_and_derivative(s, delta);
    let c = e.dot(h);
    let radial = e.scale(dphi * c / (norm * norm));
    let tangential = h.axpy(-c / (norm * norm), e).scale(phi / norm);
    Ok(radial.add(&tangential))
}

/// Bilinear form `(J_δ(E) H) : K` of the smoothed-threshold Jacobian,
/// evaluated so that it is exactly symmetric in (H, K) in floating point.
pub fn reg_jac_form(e: &SymTensor, h: &SymTensor, k: &SymTensor, g: f64, delta: f64) -> f64 {
    let norm = e.norm();
    let s = norm - g;
    if s <= -delta {
        return 0.0;
    }
    let (phi, dphi) = phi_and_derivative(s, delta);
    let eh = e.dot(h);
    let ek = e.dot(k);
    let n2 = norm * norm;
    dphi * eh * ek / n2 + phi / norm * (h.dot(k) - eh * ek / n2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymTensor {
        let mut a = [[0.0; 3]; 3];
        for row in a.iter_mut().take(n) {
            for x in row.iter_mut().take(n) {
                *x = rng.gen_range(-scale..scale);
            }
        }
        SymTensor::new(n, a)
    }

    #[test]
    fn threshold_is_zero_below_g() {
        let g = 0.7;
        let e = SymTensor::from_2d(0.3, 0.1, -0.2);
        assert!(e.norm() < g);
        let r = soft_threshold(&e, g).unwrap();
        assert_eq!(r.norm(), 0.0);
        let zero = SymTensor::zero(2);
        assert_eq!(soft_threshold(&zero, g).unwrap().norm(), 0.0);
    }

    #[test]
    fn threshold_radial_value() {
        // E = 2g U with |U| = 1 gives m(E) = g U = E/2.
        let g = 0.5;
        let u = SymTensor::from_2d(1.0, 0.0, 0.0);
        assert_relative_eq!(u.norm(), 1.0);
        let e = u.scale(2.0 * g);
        let r = soft_threshold(&e, g).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(r.entry(i, j), g * u.entry(i, j), max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn threshold_rejects_bad_g() {
        let e = SymTensor::from_2d(1.0, 0.0, 0.0);
        assert!(soft_threshold(&e, 0.0).is_err());
        assert!(soft_threshold(&e, -1.0).is_err());
    }

    #[test]
    fn dir_zero_below() {
        let g = 1.0;
        let e = SymTensor::from_2d(0.2, 0.0, 0.1);
        let h = SymTensor::from_2d(5.0, -3.0, 2.0);
        assert_eq!(soft_threshold_dir(&e, &h, g).unwrap().norm(), 0.0);
    }

    #[test]
    fn dir_on_sphere_negative_pairing_is_zero() {
        let g = 0.5;
        let u = SymTensor::from_2d(1.0, 0.0, 0.0);
        let e = u.scale(g); // |E| = g
        let h = u.scale(-1.0); // E:H < 0
        assert_eq!(soft_threshold_dir(&e, &h, g).unwrap().norm(), 0.0);
        // E:H > 0 activates the radial formula: m'(E;U) = (E:U) E/g^2 = U.
        let d = soft_threshold_dir(&e, &u, g).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(d.entry(i, j), u.entry(i, j), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn dir_radial_above() {
        // along t ↦ m(tU) = (t − g) U the slope is U
        let g = 0.3;
        let u = SymTensor::from_2d(0.0, std::f64::consts::FRAC_1_SQRT_2, 0.0);
        assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-15);
        let e = u.scale(2.0 * g);
        let d = soft_threshold_dir(&e, &u, g).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(d.entry(i, j), u.entry(i, j), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn dir_matches_difference_quotient() {
        let g = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 50 {
            let n = if checked % 2 == 0 { 2 } else { 3 };
            let e = random_tensor(&mut rng, n, 1.0);
            if (e.norm() - g).abs() <= 0.1 {
                continue;
            }
            let h = random_tensor(&mut rng, n, 1.0);
            let d = soft_threshold_dir(&e, &h, g).unwrap();
            let mut prev_err = f64::INFINITY;
            for &t in &[1e-3, 1e-4, 1e-5] {
                let fd = soft_threshold(&e.axpy(t, &h), g)
                    .unwrap()
                    .sub(&soft_threshold(&e, g).unwrap())
                    .scale(1.0 / t);
                let err = fd.sub(&d).norm();
                // one-sided quotient converges at rate O(t)
                assert!(err <= prev_err.max(1e-11) * 0.4 || err < 1e-11,
                    "err {err} prev {prev_err} t {t}");
                prev_err = err;
            }
            assert!(prev_err <= 1e-4 * (1.0 + h.norm()));
            checked += 1;
        }
    }

    #[test]
    fn smoothed_max_branch_values() {
        let d = 0.25;
        let (v, s) = smoothed_max(d, d).unwrap();
        assert_relative_eq!(v, d, epsilon = 1e-15);
        assert_relative_eq!(s, 1.0, epsilon = 1e-15);
        let (v, s) = smoothed_max(-d, d).unwrap();
        assert_relative_eq!(v, 0.0, epsilon = 1e-15);
        assert_relative_eq!(s, 0.0, epsilon = 1e-15);
        let (v, s) = smoothed_max(0.0, d).unwrap();
        assert_relative_eq!(v, 3.0 * d / 16.0, epsilon = 1e-15);
        assert_relative_eq!(s, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn reg_zero_below_band_and_exact_above() {
        let g = 0.5;
        let delta = 0.1;
        let e = SymTensor::from_2d(0.2, 0.05, -0.1);
        assert!(e.norm() <= g - delta);
        assert_eq!(soft_threshold_reg(&e, g, delta).unwrap().norm(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let e = random_tensor(&mut rng, 2, 1.5);
            if (e.norm() - g).abs() <= delta {
                continue;
            }
            let a = soft_threshold_reg(&e, g, delta).unwrap();
            let b = soft_threshold(&e, g).unwrap();
            // bitwise identical outside the smoothing band
            assert_eq!(a, b);
        }
    }

    #[test]
    fn reg_value_on_sphere() {
        let g = 0.5;
        let delta = 0.125;
        let u = SymTensor::from_2d(0.6, 0.8, 0.0);
        let e = u.scale(g / u.norm());
        let r = soft_threshold_reg(&e, g, delta).unwrap();
        // phi(0) = (3δ/16)(1/2) = 3δ/32, applied to E/|E| = E/g
        let expected = e.scale(3.0 * delta / 32.0 / g);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(r.entry(i, j), expected.entry(i, j), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn reg_rejects_delta_not_below_g() {
        let e = SymTensor::from_2d(1.0, 0.0, 0.0);
        assert!(soft_threshold_reg(&e, 0.5, 0.5).is_err());
        assert!(soft_threshold_reg(&e, 0.5, 0.7).is_err());
        assert!(soft_threshold_reg_jac(&e, &e, 0.5, 0.5).is_err());
    }

    #[test]
    fn jac_zero_below_band() {
        let g = 0.5;
        let delta = 0.1;
        let e = SymTensor::from_2d(0.1, 0.1, 0.0);
        let h = SymTensor::from_2d(3.0, 1.0, -2.0);
        assert!(e.norm() <= g - delta);
        assert_eq!(soft_threshold_reg_jac(&e, &h, g, delta).unwrap().norm(), 0.0);
    }

    #[test]
    fn jac_matches_difference_quotient() {
        let g = 0.5;
        let delta = 0.07;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..60 {
            let n = if k % 2 == 0 { 2 } else { 3 };
            let e = random_tensor(&mut rng, n, 1.0);
            if e.norm() < 1e-3 {
                continue;
            }
            let h = random_tensor(&mut rng, n, 1.0);
            let j = soft_threshold_reg_jac(&e, &h, g, delta).unwrap();
            let mut prev_err = f64::INFINITY;
            for &t in &[1e-4, 1e-5, 1e-6] {
                let fd = soft_threshold_reg(&e.axpy(t, &h), g, delta)
                    .unwrap()
                    .sub(&soft_threshold_reg(&e, g, delta).unwrap())
                    .scale(1.0 / t);
                let err = fd.sub(&j).norm();
                assert!(err <= prev_err.max(1e-9) * 0.5 || err < 1e-9,
                    "err {err} prev_err {prev_err}");
                prev_err = err;
            }
        }
    }

    #[test]
    fn jac_application_is_self_adjoint() {
        let g = 0.5;
        let delta = 0.2;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for k in 0..200 {
            let n = if k % 2 == 0 { 2 } else { 3 };
            let e = random_tensor(&mut rng, n, 1.2);
            let h = random_tensor(&mut rng, n, 1.0);
            let w = random_tensor(&mut rng, n, 1.0);
            let lhs = soft_threshold_reg_jac(&e, &h, g, delta).unwrap().dot(&w);
            let rhs = soft_threshold_reg_jac(&e, &w, g, delta).unwrap().dot(&h);
            assert_relative_eq!(lhs, rhs, epsilon = 1e-13, max_relative = 1e-11);
            // and the bilinear form agrees with the application
            let form = reg_jac_form(&e, &h, &w, g, delta);
            assert_relative_eq!(form, lhs, epsilon = 1e-13, max_relative = 1e-11);
        }
    }

    #[test]
    fn jac_consistent_with_dir_off_the_kink() {
        // with | |E| − g | >= eps and delta < eps the two derivatives coincide
        let g = 0.5;
        let eps = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut count = 0;
        while count < 100 {
            let e = random_tensor(&mut rng, 2, 1.0);
            if (e.norm() - g).abs() < eps {
                continue;
            }
            let h = random_tensor(&mut rng, 2, 1.0);
            let a = soft_threshold_reg_jac(&e, &h, g, 0.05).unwrap();
            let b = soft_threshold_dir(&e, &h, g).unwrap();
            assert!(a.sub(&b).norm() <= 1e-14 * (1.0 + h.norm()));
            count += 1;
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn sym2() -> impl Strategy<Value = SymTensor> {
            (-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5)
                .prop_map(|(a, b, c)| SymTensor::from_2d(a, b, c))
        }

        fn sym3() -> impl Strategy<Value = SymTensor> {
            proptest::array::uniform6(-1.5f64..1.5).prop_map(|v| {
                SymTensor::new(
                    3,
                    [
                        [v[0], v[3], v[4]],
                        [v[3], v[1], v[5]],
                        [v[4], v[5], v[2]],
                    ],
                )
            })
        }

        proptest! {
            #[test]
            fn monotone(e in sym2(), d in sym2()) {
                let g = 0.5;
                let me = soft_threshold(&e, g).unwrap();
                let md = soft_threshold(&d, g).unwrap();
                prop_assert!(me.sub(&md).dot(&e.sub(&d)) >= -1e-10);
            }

            #[test]
            fn monotone_3d(e in sym3(), d in sym3()) {
                let g = 0.5;
                let me = soft_threshold(&e, g).unwrap();
                let md = soft_threshold(&d, g).unwrap();
                prop_assert!(me.sub(&md).dot(&e.sub(&d)) >= -1e-10);
            }

            #[test]
            fn one_lipschitz(e in sym2(), d in sym2()) {
                let g = 0.5;
                let me = soft_threshold(&e, g).unwrap();
                let md = soft_threshold(&d, g).unwrap();
                prop_assert!(me.sub(&md).norm() <= e.sub(&d).norm() + 1e-12);
            }

            #[test]
            fn reg_monotone(e in sym2(), d in sym2()) {
                let (g, delta) = (0.5, 0.2);
                let me = soft_threshold_reg(&e, g, delta).unwrap();
                let md = soft_threshold_reg(&d, g, delta).unwrap();
                prop_assert!(me.sub(&md).dot(&e.sub(&d)) >= -1e-10);
            }

            #[test]
            fn jac_positive_semidefinite(e in sym2(), h in sym2()) {
                let (g, delta) = (0.5, 0.2);
                let jh = soft_threshold_reg_jac(&e, &h, g, delta).unwrap();
                prop_assert!(jh.dot(&h) >= -1e-10);
            }

            #[test]
            fn jac_uniformly_bounded(e in sym3(), h in sym3(), delta in 1e-4f64..0.49) {
                let g = 0.5;
                let jh = soft_threshold_reg_jac(&e, &h, g, delta).unwrap();
                prop_assert!(jh.norm() <= 3.0 * h.norm() + 1e-12);
            }

            #[test]
            fn reg_close_to_nonsmooth(e in sym2(), delta in 1e-4f64..0.49) {
                let g = 0.5;
                let a = soft_threshold_reg(&e, g, delta).unwrap();
                let b = soft_threshold(&e, g).unwrap();
                prop_assert!(a.sub(&b).norm() <= 0.5 * delta);
            }

            #[test]
            fn dir_positively_homogeneous(e in sym2(), h in sym2(), c in 1e-3f64..50.0) {
                let g = 0.5;
                let a = soft_threshold_dir(&e, &h.scale(c), g).unwrap();
                let b = soft_threshold_dir(&e, &h, g).unwrap().scale(c);
                prop_assert!(a.sub(&b).norm() <= 1e-10 * (1.0 + b.norm()));
            }
        }
    }
}
