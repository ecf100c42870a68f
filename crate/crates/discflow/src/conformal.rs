//! Möbius automorphisms of the disc, conformal pullbacks, the scaled
//! stereographic chart of a spherical cap, and the driving function
//! `J = j + sqrt(j^2 + f)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryField, DiscField, DiscGrid};

/// Largest admissible `|a|` is `1 - MOBIUS_MARGIN`.
pub const MOBIUS_MARGIN: f64 = 1e-12;

/// `z -> e^{i theta} (z + a) / (1 + conj(a) z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobiusMap {
    pub a: Complex64,
    pub theta: f64,
}

impl MobiusMap {
    pub fn new(a: Complex64, theta: f64) -> Result<Self> {
        if !(a.norm() < 1.0 - MOBIUS_MARGIN) || !theta.is_finite() {
            return Err(Error::Domain(format!(
                "Möbius parameter |a| = {} must be below 1",
                a.norm()
            )));
        }
        Ok(Self {
            a,
            theta: theta.rem_euclid(2.0 * PI),
        })
    }

    pub fn identity() -> Self {
        Self {
            a: Complex64::new(0.0, 0.0),
            theta: 0.0,
        }
    }

    pub fn translation(a: Complex64) -> Result<Self> {
        Self::new(a, 0.0)
    }

    fn rotation(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.theta)
    }

    /// Evaluates the map without the `|z| <= 1` check.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.rotation() * (z + self.a) / (1.0 + self.a.conj() * z)
    }

    pub fn apply(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() > 1.0 + 1e-14 {
            return Err(Error::Domain(format!("|z| = {} exceeds 1", z.norm())));
        }
        Ok(self.eval(z))
    }

    /// `|Phi'(z)| = (1 - |a|^2) / |1 + conj(a) z|^2`.
    pub fn derivative_modulus(&self, z: Complex64) -> f64 {
        (1.0 - self.a.norm_sqr()) / (1.0 + self.a.conj() * z).norm_sqr()
    }

    pub fn inverse(&self) -> MobiusMap {
        let rot = self.rotation();
        MobiusMap {
            a: -rot * self.a,
            theta: (-self.theta).rem_euclid(2.0 * PI),
        }
    }

    /// `self ∘ other`, i.e. `other` is applied first.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        let zero = Complex64::new(0.0, 0.0);
        let image = self.eval(other.eval(zero));
        // Phi'(0) = e^{i theta} (1 - |a|^2) fixes the rotation; Phi(0) = e^{i theta} a.
        let slope = self.rotation() * (1.0 - self.a.norm_sqr())
            / (1.0 + self.a.conj() * other.eval(zero)).powi(2)
            * other.rotation()
            * (1.0 - other.a.norm_sqr());
        let theta = slope.arg().rem_euclid(2.0 * PI);
        MobiusMap {
            a: image * Complex64::from_polar(1.0, -theta),
            theta,
        }
    }
}

/// Spherical cap of the unit sphere seen through the scaled stereographic
/// chart `z -> (2Rz, 1 - R^2|z|^2) / (1 + R^2|z|^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapGeometry {
    /// Chart scale `R` in `(0, 1]`.
    pub radius: f64,
    /// Euclidean radius `2R / (1 + R^2)` of the rim circle.
    pub rim: f64,
    /// Height `(1 - R^2) / (1 + R^2)` of the rim plane.
    pub height: f64,
    /// Geodesic curvature `(1 - R^2) / (2R)` of the rim.
    pub rim_curvature: f64,
}

impl CapGeometry {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(Error::Domain(format!("cap radius {radius} outside (0, 1]")));
        }
        let d = 1.0 + radius * radius;
        Ok(Self {
            radius,
            rim: 2.0 * radius / d,
            height: (1.0 - radius * radius) / d,
            rim_curvature: (1.0 - radius * radius) / (2.0 * radius),
        })
    }

    /// Interior share of the Gauss–Bonnet budget, `2 pi R^2 / (1 + R^2)`.
    pub fn interior_budget(&self) -> f64 {
        2.0 * PI * self.radius * self.radius / (1.0 + self.radius * self.radius)
    }

    /// Area of the cap.
    pub fn area(&self) -> f64 {
        2.0 * self.interior_budget()
    }

    /// Point on the sphere over `z`.
    pub fn embed(&self, z: Complex64) -> [f64; 3] {
        let rr = self.radius * self.radius * z.norm_sqr();
        let d = 1.0 + rr;
        [
            2.0 * self.radius * z.re / d,
            2.0 * self.radius * z.im / d,
            (1.0 - rr) / d,
        ]
    }

    /// `e^{w}` with `e^{2w} |dz|^2` the pulled-back round metric.
    pub fn metric_factor(&self, z: Complex64) -> f64 {
        2.0 * self.radius / (1.0 + self.radius * self.radius * z.norm_sqr())
    }
}

/// Horizontal part of the chart, `2Rz / (1 + R^2 |z|^2)`.
pub fn stereographic(radius: f64, z: Complex64) -> [f64; 2] {
    let d = 1.0 + radius * radius * z.norm_sqr();
    [2.0 * radius * z.re / d, 2.0 * radius * z.im / d]
}

/// `e^{w_R}` sampled on the grid.
pub fn cap_metric_factor(grid: &DiscGrid, radius: f64) -> DiscField {
    grid.sample(|x, y| 2.0 * radius / (1.0 + radius * radius * (x * x + y * y)))
}

/// `R = sqrt(1 + j0^2 / f0) - j0 / sqrt(f0)`.
pub fn scaling_radius(f0: f64, j0: f64) -> Result<f64> {
    if !(f0 > 0.0) {
        return Err(Error::Domain(format!("f0 = {f0} must be positive")));
    }
    if !(j0 >= 0.0) {
        return Err(Error::Domain(format!("j0 = {j0} must be non-negative")));
    }
    Ok((1.0 + j0 * j0 / f0).sqrt() - j0 / f0.sqrt())
}

fn node_point(grid: &DiscGrid, i: usize, k: usize) -> Complex64 {
    let (x, y) = grid.node(i, k);
    Complex64::new(x, y)
}

/// `u ∘ Phi` sampled at the grid nodes by spectral interpolation.
pub fn compose_field(grid: &DiscGrid, u: &DiscField, phi: &MobiusMap) -> Result<DiscField> {
    grid.check(u)?;
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let w = phi.eval(node_point(grid, i, k));
            let r = w.norm().min(1.0);
            let t = if r == 0.0 { 0.0 } else { w.arg() };
            values.push(grid.interpolate_polar(u, r, t));
        }
    }
    DiscField::from_values(grid.n_r(), grid.n_theta(), values)
}

/// `b ∘ Phi` on the boundary circle.
pub fn compose_boundary(grid: &DiscGrid, b: &BoundaryField, phi: &MobiusMap) -> Result<BoundaryField> {
    grid.check_boundary(b)?;
    let values = grid
        .angles()
        .iter()
        .map(|&t| {
            let w = phi.eval(Complex64::from_polar(1.0, t));
            grid.interpolate_boundary(b, w.arg())
        })
        .collect();
    Ok(BoundaryField { values })
}

/// `log |Phi'|` on the grid.
pub fn log_derivative_modulus(grid: &DiscGrid, phi: &MobiusMap) -> DiscField {
    grid.sample(|x, y| phi.derivative_modulus(Complex64::new(x, y)).ln())
}

/// Conformal factor of `Phi^* (e^{2u} |dz|^2)`: `v = u ∘ Phi + log |Phi'|`.
pub fn pullback_conformal_factor(grid: &DiscGrid, u: &DiscField, phi: &MobiusMap) -> Result<DiscField> {
    let composed = compose_field(grid, u, phi)?;
    Ok(composed.zip_map(&log_derivative_modulus(grid, phi), |a, b| a + b))
}

fn check_driving_inputs(grid: &DiscGrid, f: &DiscField, j_harm: &DiscField) -> Result<()> {
    grid.check(f)?;
    grid.check(j_harm)?;
    if f.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("f must be positive everywhere".into()));
    }
    Ok(())
}

/// `J = j + sqrt(j^2 + f)` with `j` harmonically extended.
pub fn driving_function(grid: &DiscGrid, f: &DiscField, j_harm: &DiscField) -> Result<DiscField> {
    check_driving_inputs(grid, f, j_harm)?;
    Ok(j_harm.zip_map(f, |j, f| j + (j * j + f).sqrt()))
}

/// Cartesian gradient of the driving function on the grid.
pub fn driving_gradient(
    grid: &DiscGrid,
    f: &DiscField,
    j_harm: &DiscField,
) -> Result<(DiscField, DiscField)> {
    grid.gradient(&driving_function(grid, f, j_harm)?)
}

/// Gradient of the driving function at the boundary point `e^{i theta}`.
pub fn driving_gradient_at(
    grid: &DiscGrid,
    f: &DiscField,
    j_harm: &DiscField,
    theta: f64,
) -> Result<[f64; 2]> {
    let (gx, gy) = driving_gradient(grid, f, j_harm)?;
    Ok([
        grid.interpolate_boundary(&gx.trace(), theta),
        grid.interpolate_boundary(&gy.trace(), theta),
    ])
}

/// Outward normal derivative of the driving function at the boundary nodes.
pub fn driving_normal_derivative(
    grid: &DiscGrid,
    f: &DiscField,
    j_harm: &DiscField,
) -> Result<BoundaryField> {
    grid.normal_derivative(&driving_function(grid, f, j_harm)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_boundary_parameters() {
        assert!(MobiusMap::translation(c(1.0, 0.0)).is_err());
        assert!(MobiusMap::translation(c(0.0, 1.0 - 1e-13)).is_err());
        assert!(MobiusMap::translation(c(0.0, 0.999)).is_ok());
    }

    #[test]
    fn maps_zero_to_a() {
        let phi = MobiusMap::translation(c(0.3, -0.2)).unwrap();
        assert!((phi.apply(c(0.0, 0.0)).unwrap() - c(0.3, -0.2)).norm() < 1e-15);
    }

    #[test]
    fn apply_rejects_outside_points() {
        let phi = MobiusMap::identity();
        assert!(matches!(phi.apply(c(1.1, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn inverse_round_trip() {
        let phi = MobiusMap::translation(c(0.3, 0.1)).unwrap();
        let inv = phi.inverse();
        for k in 0..100 {
            let t = k as f64 * 0.37;
            let z = Complex64::from_polar(0.95 * ((k as f64 * 0.13).sin().abs()), t);
            assert!((phi.eval(inv.eval(z)) - z).norm() < 1e-14);
            assert!((inv.eval(phi.eval(z)) - z).norm() < 1e-14);
        }
    }

    #[test]
    fn rotation_equivariance() {
        let a = c(0.5, 0.0);
        let rot = Complex64::from_polar(1.0, PI / 3.0);
        let z = c(0.0, 0.2);
        let lhs = MobiusMap::translation(rot * a).unwrap().eval(rot * z);
        let rhs = rot * MobiusMap::translation(a).unwrap().eval(z);
        assert!((lhs - rhs).norm() < 1e-15);
    }

    #[test]
    fn boundary_maps_to_boundary() {
        let phi = MobiusMap::new(c(-0.6, 0.3), 1.1).unwrap();
        for k in 0..50 {
            let z = Complex64::from_polar(1.0, k as f64 * 0.2);
            assert!((phi.eval(z).norm() - 1.0).abs() < 1e-14);
            let inner = Complex64::from_polar(0.99, k as f64 * 0.2);
            assert!(phi.eval(inner).norm() < 1.0);
        }
    }

    #[test]
    fn cap_geometry_identities() {
        for k in 1..=9 {
            let cap = CapGeometry::new(k as f64 / 10.0).unwrap();
            assert!((cap.rim * cap.rim + cap.height * cap.height - 1.0).abs() < 1e-14);
            assert!((cap.rim_curvature * cap.rim - cap.height).abs() < 1e-14);
        }
        assert!(CapGeometry::new(0.0).is_err());
        assert!(CapGeometry::new(1.5).is_err());
    }

    #[test]
    fn stereographic_examples() {
        assert_eq!(stereographic(0.4, c(0.0, 0.0)), [0.0, 0.0]);
        let r = 0.4;
        let rim = 2.0 * r / (1.0 + r * r);
        for k in 0..12 {
            let p = stereographic(r, Complex64::from_polar(1.0, k as f64));
            assert!((p[0].hypot(p[1]) - rim).abs() < 1e-15);
        }
    }

    #[test]
    fn cap_area_matches_closed_form() {
        let grid = DiscGrid::new(32, 64).unwrap();
        for &r in &[0.3, 0.5, 0.8, 1.0] {
            let e2w = cap_metric_factor(&grid, r).map(|v| v * v);
            let area = grid.integrate_disc(&e2w).unwrap();
            assert!((area - 2.0 * PI * 2.0 * r * r / (1.0 + r * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_radius_examples() {
        assert_eq!(scaling_radius(1.0, 0.0).unwrap(), 1.0);
        let r = scaling_radius(3.0, 1.0).unwrap();
        assert!((r - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let big_j = 1.0 + (1.0f64 + 3.0).sqrt();
        assert!((big_j * r * 3f64.sqrt() - 3.0).abs() < 1e-14);
        assert!(matches!(scaling_radius(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn pullback_of_zero_is_log_derivative() {
        let grid = DiscGrid::new(32, 64).unwrap();
        let phi = MobiusMap::translation(c(0.5, 0.0)).unwrap();
        let v = pullback_conformal_factor(&grid, &grid.zeros(), &phi).unwrap();
        let exact = grid.sample(|x, y| (0.75 / ((1.0 + 0.5 * x).powi(2) + (0.5 * y).powi(2))).ln());
        assert!(v.max_abs_diff(&exact) < 1e-14);
    }

    #[test]
    fn pullback_by_identity() {
        let grid = DiscGrid::new(16, 32).unwrap();
        let u = grid.sample(|x, y| x * y + 0.3 * x);
        let v = pullback_conformal_factor(&grid, &u, &MobiusMap::identity()).unwrap();
        assert!(v.max_abs_diff(&u) < 1e-13);
    }

    #[test]
    fn driving_function_constant_data() {
        let grid = DiscGrid::new(16, 32).unwrap();
        let f = grid.constant(3.0);
        let j = grid.constant(1.0);
        let big_j = driving_function(&grid, &f, &j).unwrap();
        assert!(big_j.add_scalar(-3.0).max_abs() < 1e-15);
        let (gx, gy) = driving_gradient(&grid, &f, &j).unwrap();
        assert!(gx.max_abs() < 1e-10 && gy.max_abs() < 1e-10);
        assert!(matches!(
            driving_function(&grid, &grid.constant(0.0), &j),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn driving_normal_derivative_mode_one() {
        let grid = DiscGrid::new(32, 64).unwrap();
        let f = grid.constant(1.0);
        let j = grid
            .harmonic_extension(&grid.sample_boundary(|t| 1.0 + 0.5 * t.cos()))
            .unwrap();
        let dn = driving_normal_derivative(&grid, &f, &j).unwrap();
        let expected = (1.0 + 1.5 / 3.25f64.sqrt()) * 0.5;
        assert!((dn.values[0] - expected).abs() < 1e-10);
        // Finite difference along the inward radius at theta = 0.
        let big_j = |x: f64| {
            let jv = 1.0 + 0.5 * x;
            jv + (jv * jv + 1.0).sqrt()
        };
        let h = 1e-5;
        let fd = (big_j(1.0) - big_j(1.0 - h)) / h;
        assert!((fd - expected).abs() < 1e-5);
        let grad = driving_gradient_at(&grid, &f, &j, 0.0).unwrap();
        assert!((grad[0] - expected).abs() < 1e-10 && grad[1].abs() < 1e-10);
    }

    #[test]
    fn driving_function_dominates_sqrt_f() {
        let grid = DiscGrid::new(16, 32).unwrap();
        let f = grid.sample(|x, y| 1.0 + 0.5 * x * y + 0.2 * x);
        let j = grid
            .harmonic_extension(&grid.sample_boundary(|t| 0.5 + 0.3 * t.sin()))
            .unwrap();
        let big_j = driving_function(&grid, &f, &j).unwrap();
        for (jv, fv) in big_j.values.iter().zip(&f.values) {
            assert!(*jv >= fv.sqrt());
        }
    }
}
