//! Round spherical caps: exact cap solutions, the Steklov eigenproblem pulled
//! back to the disc, the lifted tangent fields and the Kazdan–Warner residual.
//!
//! The cap of scale `R` is the image of the disc under the inverse
//! stereographic map `z -> Psi(R z)`; its metric on the disc is
//! `e^{2 w_R} |dz|^2` with `e^{w_R} = 2R / (1 + R^2 |z|^2)`, its boundary
//! circle sits at height `sigma = (1 - R^2) / (1 + R^2)` and has geodesic
//! curvature `k_R = (1 - R^2) / (2R)`.

use std::cmp::Ordering;

use faer::complex_native::c64;
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{BoundaryField, DiscField, DiscGrid};
use crate::model;

/// `log(2R / sqrt(scale) / (1 + R^2 |z|^2))` at one point.
pub fn cap_profile_at(radius: f64, scale: f64, z: Complex64) -> f64 {
    (2.0 * radius / scale.sqrt() / (1.0 + radius * radius * z.norm_sqr())).ln()
}

fn check_radius(radius: f64, allow_one: bool) -> Result<()> {
    let ok = radius > 0.0 && (radius < 1.0 || (allow_one && radius == 1.0));
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("cap radius {radius} out of range")))
    }
}

/// Conformal factor of the round cap of curvature `scale` and boundary
/// curvature `sqrt(scale) (1 - R^2) / (2R)`.
pub fn cap_profile(grid: &DiscGrid, radius: f64, scale: f64) -> Result<DiscField> {
    check_radius(radius, true)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("cap scale {scale} must be positive")));
    }
    Ok(grid.sample(|x, y| cap_profile_at(radius, scale, Complex64::new(x, y))))
}

/// Height `sigma = (1 - R^2) / (1 + R^2)` of the rim, equal to `k_R e^{w_R}` on the circle.
pub fn rim_height(radius: f64) -> f64 {
    (1.0 - radius * radius) / (1.0 + radius * radius)
}

/// Pullbacks of the horizontal coordinates `X_1, X_2` of the cap.
pub fn coordinate_functions(grid: &DiscGrid, radius: f64) -> [DiscField; 2] {
    let d = move |x: f64, y: f64| 1.0 + radius * radius * (x * x + y * y);
    [
        grid.sample(|x, y| 2.0 * radius * x / d(x, y)),
        grid.sample(|x, y| 2.0 * radius * y / d(x, y)),
    ]
}

/// Densities of a measure on the closed disc: `interior dz + boundary ds_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CapMeasures {
    pub interior: DiscField,
    pub boundary: BoundaryField,
}

impl CapMeasures {
    /// `2 e^{2 w_R} dz + sigma ds_0`, the pullback of `2 dmu + k_R ds` on the cap.
    pub fn steklov(grid: &DiscGrid, radius: f64) -> Result<Self> {
        check_radius(radius, true)?;
        let w = cap_profile(grid, radius, 1.0)?;
        Ok(Self {
            interior: w.map(|w| 2.0 * (2.0 * w).exp()),
            boundary: BoundaryField::constant(grid.n_theta(), rim_height(radius)),
        })
    }

    /// `e^{2v} dz + e^{v} ds_0` for a conformal factor `v` on the disc.
    pub fn of_metric(v: &DiscField) -> Self {
        Self {
            interior: v.map(|v| (2.0 * v).exp()),
            boundary: v.trace().map(f64::exp),
        }
    }

    pub fn integrate(&self, grid: &DiscGrid, f: &DiscField) -> Result<f64> {
        let a = grid.integrate_disc(&f.zip_map(&self.interior, |f, w| f * w))?;
        let b = grid.integrate_boundary(&f.trace().zip_map(&self.boundary, |f, w| f * w))?;
        Ok(a + b)
    }

    pub fn inner(&self, grid: &DiscGrid, f: &DiscField, g: &DiscField) -> Result<f64> {
        self.integrate(grid, &f.zip_map(g, |a, b| a * b))
    }

    pub fn total(&self, grid: &DiscGrid) -> Result<f64> {
        self.integrate(grid, &grid.constant(1.0))
    }
}

#[derive(Clone, Debug)]
pub struct SteklovSpectrum {
    pub radius: f64,
    pub eigenvalues: Vec<f64>,
    /// Orthonormal in the measure of [`CapMeasures::steklov`].
    pub eigenfunctions: Vec<DiscField>,
    /// Fourier mode of each eigenfunction.
    pub modes: Vec<usize>,
}

struct RadialPair {
    value: f64,
    mode: usize,
    sine: bool,
    vector: Vec<f64>,
}

/// Lowest `n_eigs` pairs of `-Laplacian phi = 2 lambda e^{2 w_R} phi` in the disc,
/// `d phi / d nu = lambda sigma phi` on the circle, solved one Fourier mode at a time.
pub fn steklov_spectrum(grid: &DiscGrid, radius: f64, n_eigs: usize) -> Result<SteklovSpectrum> {
    check_radius(radius, false)?;
    if n_eigs > grid.len() {
        return Err(Error::Dimension(format!(
            "{n_eigs} eigenpairs requested from {} unknowns",
            grid.len()
        )));
    }
    let nr = grid.n_r();
    let nt = grid.n_theta();
    let sigma = rim_height(radius);
    let mass: Vec<f64> = grid
        .radii()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if i == 0 {
                sigma
            } else {
                let e = 2.0 * radius / (1.0 + radius * radius * r * r);
                2.0 * e * e
            }
        })
        .collect();

    let mut pairs = Vec::with_capacity(grid.len());
    for m in 0..=nt / 2 {
        let lap = grid.mode_laplacian(m);
        let dr = grid.mode_radial_derivative(m);
        let op = Mat::from_fn(nr, nr, |i, j| {
            let a = if i == 0 { dr[j] } else { -lap[i * nr + j] };
            a / mass[i]
        });
        let evd = op.eigendecomposition::<c64>();
        let values = evd.s().column_vector();
        let vectors = evd.u();
        for c in 0..nr {
            let value = values.read(c).re;
            let mut vector: Vec<f64> = (0..nr).map(|i| vectors.read(i, c).re).collect();
            let imag: f64 = (0..nr).map(|i| vectors.read(i, c).im.abs()).fold(0.0, f64::max);
            let real: f64 = vector.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if imag > real {
                vector = (0..nr).map(|i| vectors.read(i, c).im).collect();
            }
            let kinds: &[bool] = if m == 0 || 2 * m == nt { &[false] } else { &[false, true] };
            for &sine in kinds {
                pairs.push(RadialPair {
                    value,
                    mode: m,
                    sine,
                    vector: vector.clone(),
                });
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .unwrap_or(Ordering::Equal)
            .then(a.mode.cmp(&b.mode))
            .then(a.sine.cmp(&b.sine))
    });
    pairs.truncate(n_eigs);

    let measure = CapMeasures::steklov(grid, radius)?;
    let angles = grid.angles();
    let mut eigenvalues = Vec::with_capacity(n_eigs);
    let mut eigenfunctions: Vec<DiscField> = Vec::with_capacity(n_eigs);
    let mut modes = Vec::with_capacity(n_eigs);
    for (idx, p) in pairs.iter().enumerate() {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..nr {
            for &t in angles {
                let a = p.mode as f64 * t;
                values.push(p.vector[i] * if p.sine { a.sin() } else { a.cos() });
            }
        }
        let mut phi = DiscField::from_values(nr, nt, values)?;
        for (q, prev) in pairs[..idx].iter().enumerate() {
            if prev.mode == p.mode && prev.sine == p.sine {
                let c = measure.inner(grid, &phi, &eigenfunctions[q])?;
                phi = phi.zip_map(&eigenfunctions[q], |a, b| a - c * b);
            }
        }
        let norm = measure.inner(grid, &phi, &phi)?.sqrt();
        if !(norm > 0.0) {
            return Err(Error::Convergence("degenerate Steklov eigenvector".into()));
        }
        eigenfunctions.push(phi.map(|v| v / norm));
        eigenvalues.push(p.value);
        modes.push(p.mode);
    }
    Ok(SteklovSpectrum {
        radius,
        eigenvalues,
        eigenfunctions,
        modes,
    })
}

/// Largest principal angle between `span(basis)` and `span(reference)` in the
/// inner product of `measure`; both sets must be linearly independent.
pub fn subspace_angle(
    grid: &DiscGrid,
    measure: &CapMeasures,
    basis: &[DiscField],
    reference: &[DiscField],
) -> Result<f64> {
    let ortho = |set: &[DiscField]| -> Result<Vec<DiscField>> {
        let mut out: Vec<DiscField> = Vec::new();
        for f in set {
            let mut g = f.clone();
            for e in &out {
                let c = measure.inner(grid, &g, e)?;
                g = g.zip_map(e, |a, b| a - c * b);
            }
            let n = measure.inner(grid, &g, &g)?.sqrt();
            out.push(g.map(|v| v / n));
        }
        Ok(out)
    };
    let q = ortho(basis)?;
    let r = ortho(reference)?;
    let mut worst: f64 = 0.0;
    for e in &q {
        let mut proj = 0.0;
        for f in &r {
            let c = measure.inner(grid, e, f)?;
            proj += c * c;
        }
        worst = worst.max((1.0 - proj).max(0.0).sqrt());
    }
    Ok(worst.asin())
}

/// Vector field on the disc, Cartesian components at the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentField {
    pub x: DiscField,
    pub y: DiscField,
}

impl TangentField {
    /// Outward normal component `x V_x + y V_y` on the circle.
    pub fn normal_component(&self, grid: &DiscGrid) -> BoundaryField {
        let nt = grid.n_theta();
        let values = (0..nt)
            .map(|k| {
                let (x, y) = grid.node(0, k);
                x * self.x.values[k] + y * self.y.values[k]
            })
            .collect();
        BoundaryField { values }
    }

    /// Counter-clockwise tangential component `x V_y - y V_x` on the circle.
    pub fn tangential_component(&self, grid: &DiscGrid) -> BoundaryField {
        let nt = grid.n_theta();
        let values = (0..nt)
            .map(|k| {
                let (x, y) = grid.node(0, k);
                x * self.y.values[k] - y * self.x.values[k]
            })
            .collect();
        BoundaryField { values }
    }

    /// Divergence in the metric `e^{2w} |dz|^2`: `e^{-2w} div(e^{2w} V)`.
    pub fn divergence(&self, grid: &DiscGrid, w: &DiscField) -> Result<DiscField> {
        let e2 = w.map(|w| (2.0 * w).exp());
        let (dx, _) = grid.gradient(&self.x.zip_map(&e2, |a, b| a * b))?;
        let (_, dy) = grid.gradient(&self.y.zip_map(&e2, |a, b| a * b))?;
        Ok(dx.zip_map(&dy, |a, b| a + b).zip_map(&e2, |d, e| d / e))
    }
}

/// The fields `grad X_1 + sigma X ^ e_2` and `grad X_2 - sigma X ^ e_1` of the cap,
/// pushed down to the disc. They generate Möbius motions of the disc:
/// `c (1 - z^2)` and `i c (1 + z^2)` with `c = R / (1 + R^2)`.
pub fn lifted_tangent_fields(grid: &DiscGrid, radius: f64) -> Result<[TangentField; 2]> {
    check_radius(radius, true)?;
    let c = radius / (1.0 + radius * radius);
    let field = |f: fn(Complex64) -> Complex64| {
        let x = grid.sample(|x, y| c * f(Complex64::new(x, y)).re);
        let y = grid.sample(|x, y| c * f(Complex64::new(x, y)).im);
        TangentField { x, y }
    };
    Ok([
        field(|z| Complex64::new(1.0, 0.0) - z * z),
        field(|z| Complex64::new(0.0, 1.0) * (Complex64::new(1.0, 0.0) + z * z)),
    ])
}

/// `1/2 int dK . xi_i dmu_g + int dk . xi_i ds_g` for the metric
/// `g = e^{2 u_cap} g_cap`, `i = 1, 2`; zero for every conformal factor.
pub fn kazdan_warner_residual(grid: &DiscGrid, u_cap: &DiscField, radius: f64) -> Result<[f64; 2]> {
    check_radius(radius, true)?;
    grid.check(u_cap)?;
    let w = cap_profile(grid, radius, 1.0)?;
    let u = u_cap.zip_map(&w, |a, b| a + b);
    let gauss = model::gauss_curvature(grid, &u)?;
    let geodesic = model::geodesic_curvature(grid, &u)?;
    let (kx, ky) = grid.gradient(&gauss)?;
    let dk = grid.boundary_derivative(&geodesic)?;
    let area = u.map(|u| (2.0 * u).exp());
    let length = u.trace().map(f64::exp);
    let mut out = [0.0; 2];
    for (o, xi) in out.iter_mut().zip(lifted_tangent_fields(grid, radius)?.iter()) {
        let dir = kx
            .zip_map(&xi.x, |a, b| a * b)
            .zip_map(&ky.zip_map(&xi.y, |a, b| a * b), |a, b| a + b);
        let interior = grid.integrate_disc(&dir.zip_map(&area, |a, b| a * b))?;
        let along = dk
            .zip_map(&xi.tangential_component(grid), |a, b| a * b)
            .zip_map(&length, |a, b| a * b);
        *o = 0.5 * interior + grid.integrate_boundary(&along)?;
    }
    Ok(out)
}

/// The same two numbers after integrating by parts on the disc and along the
/// circle, which removes every exponential of `u`:
/// `1/2 int Laplacian(U) (div xi + 2 grad U . xi) dz - int (dU/dnu + 1) d/ds (xi_tau e^U) e^{-U} ds`
/// with `U = u_cap + w_R`.
pub fn kazdan_warner_residual_weak(grid: &DiscGrid, u_cap: &DiscField, radius: f64) -> Result<[f64; 2]> {
    check_radius(radius, true)?;
    grid.check(u_cap)?;
    let w = cap_profile(grid, radius, 1.0)?;
    let u = u_cap.zip_map(&w, |a, b| a + b);
    let lap = grid.laplacian(&u)?;
    let (ux, uy) = grid.gradient(&u)?;
    let dn = grid.normal_derivative(&u)?;
    let ds = grid.boundary_derivative(&u.trace())?;
    let mut out = [0.0; 2];
    for (o, xi) in out.iter_mut().zip(lifted_tangent_fields(grid, radius)?.iter()) {
        let (dxx, _) = grid.gradient(&xi.x)?;
        let (_, dyy) = grid.gradient(&xi.y)?;
        let mut integrand = lap.clone();
        for p in 0..grid.len() {
            let div = dxx.values[p] + dyy.values[p];
            let adv = ux.values[p] * xi.x.values[p] + uy.values[p] * xi.y.values[p];
            integrand.values[p] *= div + 2.0 * adv;
        }
        let tau = xi.tangential_component(grid);
        let dtau = grid.boundary_derivative(&tau)?;
        let mut along = dn.clone();
        for k in 0..grid.n_theta() {
            along.values[k] = (dn.values[k] + 1.0) * (dtau.values[k] + tau.values[k] * ds.values[k]);
        }
        *o = 0.5 * grid.integrate_disc(&integrand)? - grid.integrate_boundary(&along)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::CapGeometry;
    use crate::random;
    use std::f64::consts::PI;

    fn grid() -> DiscGrid {
        DiscGrid::new(32, 64).unwrap()
    }

    #[test]
    fn cap_profile_curvatures() {
        let g = grid();
        for r in [0.3, 1.0 / 3f64.sqrt(), 0.8, 1.0] {
            let v = cap_profile(&g, r, 1.0).unwrap();
            let k = model::gauss_curvature(&g, &v).unwrap();
            assert!(k.add_scalar(-1.0).max_abs() < 1e-8);
            let kg = model::geodesic_curvature(&g, &v).unwrap();
            let kr = (1.0 - r * r) / (2.0 * r);
            assert!(kg.values.iter().all(|&x| (x - kr).abs() < 1e-10));
        }
    }

    #[test]
    fn cap_scale_law() {
        let g = grid();
        let r = 0.6;
        let s = 2.5;
        let v = cap_profile(&g, r, s).unwrap();
        let k = model::gauss_curvature(&g, &v).unwrap();
        assert!(k.add_scalar(-s).max_abs() < 1e-8);
        let kg = model::geodesic_curvature(&g, &v).unwrap();
        let expect = s.sqrt() * (1.0 - r * r) / (2.0 * r);
        assert!(kg.values.iter().all(|&x| (x - expect).abs() < 1e-10));
    }

    #[test]
    fn cap_gauss_bonnet_split() {
        for r in [0.2, 0.5, 1.0 / 3f64.sqrt(), 0.9, 1.0] {
            let kr = (1.0 - r * r) / (2.0 * r);
            let total = 2.0 * r * r / (1.0 + r * r) + kr * 2.0 * r / (1.0 + r * r);
            assert!((total - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn steklov_measure_mass() {
        let g = grid();
        for r in [0.3, 0.5, 0.8] {
            let rho = CapGeometry::new(r).unwrap().interior_budget();
            let total = CapMeasures::steklov(&g, r).unwrap().total(&g).unwrap();
            assert!((total - 2.0 * (PI + rho)).abs() < 1e-8);
            assert!((total - (4.0 * rho + 2.0 * PI * rim_height(r))).abs() < 1e-8);
        }
    }

    #[test]
    fn steklov_low_spectrum() {
        let g = DiscGrid::new(16, 32).unwrap();
        let s = steklov_spectrum(&g, 0.5, 6).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-8);
        assert!(s.eigenfunctions[0].max_abs_diff(&g.constant(s.eigenfunctions[0].values[0])) < 1e-8);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-6);
        assert!((s.eigenvalues[2] - 1.0).abs() < 1e-6);
        assert!(s.eigenvalues[3] > 1.05);
        let m = CapMeasures::steklov(&g, 0.5).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                let ip = m.inner(&g, &s.eigenfunctions[a], &s.eigenfunctions[b]).unwrap();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn steklov_rejects_too_many_pairs() {
        let g = DiscGrid::new(8, 16).unwrap();
        assert!(matches!(steklov_spectrum(&g, 0.5, 129), Err(Error::Dimension(_))));
    }

    #[test]
    fn tangent_fields_are_tangent_with_cap_divergence() {
        let g = grid();
        for r in [0.4, 0.7, 1.0] {
            let w = cap_profile(&g, r, 1.0).unwrap();
            let xs = coordinate_functions(&g, r);
            let fields = lifted_tangent_fields(&g, r).unwrap();
            for (xi, x) in fields.iter().zip(&xs) {
                assert!(xi.normal_component(&g).max_abs() < 1e-10);
                let div = xi.divergence(&g, &w).unwrap();
                assert!(div.zip_map(x, |d, x| d + 2.0 * x).max_abs() < 1e-7);
            }
        }
    }

    #[test]
    fn tangent_fields_at_hemisphere_are_gradients() {
        let g = grid();
        let w = cap_profile(&g, 1.0, 1.0).unwrap();
        let xs = coordinate_functions(&g, 1.0);
        let fields = lifted_tangent_fields(&g, 1.0).unwrap();
        for (xi, x) in fields.iter().zip(&xs) {
            let (gx, gy) = g.gradient(x).unwrap();
            let inv = w.map(|w| (-2.0 * w).exp());
            assert!(xi.x.max_abs_diff(&gx.zip_map(&inv, |a, b| a * b)) < 1e-10);
            assert!(xi.y.max_abs_diff(&gy.zip_map(&inv, |a, b| a * b)) < 1e-10);
        }
    }

    #[test]
    fn kazdan_warner_examples() {
        let g = grid();
        let r = 1.0 / 3f64.sqrt();
        let zero = kazdan_warner_residual(&g, &g.zeros(), r).unwrap();
        assert!(zero[0].hypot(zero[1]) < 1e-7);
        let x1 = coordinate_functions(&g, r)[0].map(|v| 0.3 * v);
        let res = kazdan_warner_residual(&g, &x1, r).unwrap();
        assert!(res[0].hypot(res[1]) < 1e-6);
        let mut rng = random::rng(random::DEFAULT_SEED);
        let u = random::band_limited(&g, &mut rng);
        let res = kazdan_warner_residual_weak(&g, &u, 0.7).unwrap();
        assert!(res[0].hypot(res[1]) < 1e-9);
        // The direct form differentiates e^{-2u}; random fields need the finer grid.
        let fine = DiscGrid::new(48, 96).unwrap();
        let mut rng = random::rng(random::DEFAULT_SEED);
        let u = random::band_limited(&fine, &mut rng);
        let res = kazdan_warner_residual(&fine, &u, 0.7).unwrap();
        assert!(res[0].hypot(res[1]) < 1e-6);
    }
}
