//! Polar pseudospectral discretization of the closed unit disc.
//!
//! Angles are equispaced, `theta_k = 2 pi k / n_theta`. Radial nodes are the
//! non-negative half of the Chebyshev–Lobatto points of `[-1, 1]` with an odd
//! number of intervals `N = 2 n_r - 1`, so the origin is never a node. A value
//! at the mirrored node `-r_j` in direction `theta` is the value at `r_j` in
//! direction `theta + pi`; folding the doubled-interval operators this way gives
//! one small radial operator per Fourier mode, with sign `(-1)^m`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar sampled on the polar tensor grid, row-major `(n_r, n_theta)`.
/// Row 0 is the boundary circle `r = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscField {
    pub n_r: usize,
    pub n_theta: usize,
    pub values: Vec<f64>,
}

/// Scalar sampled at the angular nodes of the boundary circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryField {
    pub values: Vec<f64>,
}

impl DiscField {
    pub fn from_values(n_r: usize, n_theta: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_r * n_theta {
            return Err(Error::Dimension(format!(
                "{} values for a {n_r}x{n_theta} grid",
                values.len()
            )));
        }
        Ok(Self { n_r, n_theta, values })
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.n_theta + k]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DiscField {
        DiscField {
            n_r: self.n_r,
            n_theta: self.n_theta,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination; panics on a shape mismatch, which is a programming error.
    pub fn zip_map(&self, other: &DiscField, f: impl Fn(f64, f64) -> f64) -> DiscField {
        assert_eq!(
            (self.n_r, self.n_theta),
            (other.n_r, other.n_theta),
            "field shapes differ"
        );
        DiscField {
            n_r: self.n_r,
            n_theta: self.n_theta,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_scalar(&self, c: f64) -> DiscField {
        self.map(|v| v + c)
    }

    pub fn trace(&self) -> BoundaryField {
        BoundaryField {
            values: self.values[..self.n_theta].to_vec(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &DiscField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl BoundaryField {
    pub fn constant(n_theta: usize, c: f64) -> Self {
        Self {
            values: vec![c; n_theta],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> BoundaryField {
        BoundaryField {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &BoundaryField, f: impl Fn(f64, f64) -> f64) -> BoundaryField {
        assert_eq!(self.len(), other.len(), "boundary field lengths differ");
        BoundaryField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Boundary condition `p u + q du/dnu = g` on the unit circle.
#[derive(Clone, Debug)]
pub struct Robin {
    pub p: BoundaryField,
    pub q: BoundaryField,
    pub g: BoundaryField,
}

impl Robin {
    pub fn dirichlet(g: BoundaryField) -> Self {
        let n = g.len();
        Self {
            p: BoundaryField::constant(n, 1.0),
            q: BoundaryField::constant(n, 0.0),
            g,
        }
    }

    pub fn neumann(g: BoundaryField) -> Self {
        let n = g.len();
        Self {
            p: BoundaryField::constant(n, 0.0),
            q: BoundaryField::constant(n, 1.0),
            g,
        }
    }
}

pub struct DiscGrid {
    n_r: usize,
    n_theta: usize,
    r: Vec<f64>,
    theta: Vec<f64>,
    cos_t: Vec<f64>,
    sin_t: Vec<f64>,
    radial_weights: Vec<f64>,
    // Full doubled-interval Chebyshev data, N + 1 points.
    x_full: Vec<f64>,
    bary: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    // Folded radial operators per |m| in 0..=n_theta/2, each n_r x n_r row-major.
    mode_dr: Vec<Vec<f64>>,
    mode_lap: Vec<Vec<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for DiscGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscGrid")
            .field("n_r", &self.n_r)
            .field("n_theta", &self.n_theta)
            .finish()
    }
}

/// Chebyshev–Lobatto points `cos(pi j / n)` and the first-derivative matrix.
fn chebyshev(n: usize) -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let m = n + 1;
    let c: Vec<f64> = (0..m)
        .map(|j| {
            let end = if j == 0 || j == n { 2.0 } else { 1.0 };
            if j % 2 == 0 {
                end
            } else {
                -end
            }
        })
        .collect();
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        let mut row_sum = 0.0;
        for j in 0..m {
            if i != j {
                let v = c[i] / c[j] / (x[i] - x[j]);
                d[i * m + j] = v;
                row_sum += v;
            }
        }
        d[i * m + i] = -row_sum;
    }
    (x, d)
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Weights `w_j` with `sum_j w_j g(r_j) = int_0^1 g(r) r dr`, exact when `g` is a
/// polynomial of degree `< n_r` in `r^2`. In `s = r^2` the nodes become the
/// points `cos(2 pi j / N)` of `[-1, 1]`, and the weights solve the Chebyshev
/// moment equations there.
fn radial_weights(r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let y: Vec<f64> = r.iter().map(|&ri| 2.0 * ri * ri - 1.0).collect();
    let mut a = Mat::<f64>::zeros(n, n);
    let mut b = Mat::<f64>::zeros(n, 1);
    for k in 0..n {
        for (j, &yj) in y.iter().enumerate() {
            let t = (k as f64 * yj.clamp(-1.0, 1.0).acos()).cos();
            a.write(k, j, t);
        }
        let moment = if k % 2 == 0 {
            2.0 / (1.0 - (k * k) as f64)
        } else {
            0.0
        };
        b.write(k, 0, moment);
    }
    let c = a.partial_piv_lu().solve(&b);
    (0..n).map(|j| 0.25 * c.read(j, 0)).collect()
}

impl DiscGrid {
    pub fn new(n_r: usize, n_theta: usize) -> Result<Self> {
        if n_r < 8 {
            return Err(Error::Dimension(format!("n_r = {n_r} must be at least 8")));
        }
        if n_theta < 8 || !n_theta.is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "n_theta = {n_theta} must be even and at least 8"
            )));
        }
        let big_n = 2 * n_r - 1;
        let np = big_n + 1;
        let (x_full, d1) = chebyshev(big_n);
        let mut d2 = matmul(&d1, &d1, np);
        // Rows must annihilate constants exactly; restoring that through the
        // diagonal removes most of the round-off of the squared matrix.
        for i in 0..np {
            let off: f64 = (0..np).filter(|&j| j != i).map(|j| d2[i * np + j]).sum();
            d2[i * np + i] = -off;
        }
        let r: Vec<f64> = x_full[..n_r].to_vec();
        let theta: Vec<f64> = (0..n_theta)
            .map(|k| 2.0 * PI * k as f64 / n_theta as f64)
            .collect();
        let cos_t = theta.iter().map(|t| t.cos()).collect();
        let sin_t = theta.iter().map(|t| t.sin()).collect();
        let bary = (0..np)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == big_n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();

        let mut mode_dr = Vec::with_capacity(n_theta / 2 + 1);
        let mut mode_lap = Vec::with_capacity(n_theta / 2 + 1);
        for m in 0..=n_theta / 2 {
            let s = if m % 2 == 0 { 1.0 } else { -1.0 };
            let m2 = (m * m) as f64;
            let mut dr = vec![0.0; n_r * n_r];
            let mut lap = vec![0.0; n_r * n_r];
            for i in 0..n_r {
                for j in 0..n_r {
                    let a1 = d1[i * np + j] + s * d1[i * np + big_n - j];
                    let a2 = d2[i * np + j] + s * d2[i * np + big_n - j];
                    dr[i * n_r + j] = a1;
                    lap[i * n_r + j] = a2 + a1 / r[i];
                }
                lap[i * n_r + i] -= m2 / (r[i] * r[i]);
            }
            mode_dr.push(dr);
            mode_lap.push(lap);
        }

        let radial_weights = radial_weights(&r);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n_theta);
        let inv = planner.plan_fft_inverse(n_theta);
        Ok(Self {
            n_r,
            n_theta,
            r,
            theta,
            cos_t,
            sin_t,
            radial_weights,
            x_full,
            bary,
            d1,
            d2,
            mode_dr,
            mode_lap,
            fwd,
            inv,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn angles(&self) -> &[f64] {
        &self.theta
    }

    /// Quadrature weights for `int_0^1 g(r) r dr`.
    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    pub fn angular_weight(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    /// Cartesian coordinates of node `(i, k)`.
    pub fn node(&self, i: usize, k: usize) -> (f64, f64) {
        (self.r[i] * self.cos_t[k], self.r[i] * self.sin_t[k])
    }

    /// Smallest spacing between neighbouring nodes, radially or along a circle.
    pub fn h_min(&self) -> f64 {
        let dr = self.r[0] - self.r[1];
        let dtheta = self.r[self.n_r - 1] * self.angular_weight();
        dr.min(dtheta)
    }

    /// Index of the angular node diametrically opposite `k`.
    pub fn opposite(&self, k: usize) -> usize {
        (k + self.n_theta / 2) % self.n_theta
    }

    pub fn check(&self, u: &DiscField) -> Result<()> {
        if u.n_r != self.n_r || u.n_theta != self.n_theta || u.values.len() != self.len() {
            return Err(Error::Dimension(format!(
                "field is {}x{}, grid is {}x{}",
                u.n_r, u.n_theta, self.n_r, self.n_theta
            )));
        }
        Ok(())
    }

    pub fn check_boundary(&self, b: &BoundaryField) -> Result<()> {
        if b.len() != self.n_theta {
            return Err(Error::Dimension(format!(
                "boundary field has {} values, grid has {} angles",
                b.len(),
                self.n_theta
            )));
        }
        Ok(())
    }

    pub fn zeros(&self) -> DiscField {
        self.constant(0.0)
    }

    pub fn constant(&self, c: f64) -> DiscField {
        DiscField {
            n_r: self.n_r,
            n_theta: self.n_theta,
            values: vec![c; self.len()],
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> DiscField {
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.n_r {
            for k in 0..self.n_theta {
                let (x, y) = self.node(i, k);
                values.push(f(x, y));
            }
        }
        DiscField {
            n_r: self.n_r,
            n_theta: self.n_theta,
            values,
        }
    }

    /// Samples `f(r, theta)` at every node.
    pub fn sample_polar(&self, f: impl Fn(f64, f64) -> f64) -> DiscField {
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.n_r {
            for k in 0..self.n_theta {
                values.push(f(self.r[i], self.theta[k]));
            }
        }
        DiscField {
            n_r: self.n_r,
            n_theta: self.n_theta,
            values,
        }
    }

    pub fn sample_boundary(&self, f: impl Fn(f64) -> f64) -> BoundaryField {
        BoundaryField {
            values: self.theta.iter().map(|&t| f(t)).collect(),
        }
    }

    /// Folded radial Laplacian `d_rr + d_r / r - m^2 / r^2` for Fourier mode `m`,
    /// `n_r x n_r` row-major; row 0 is the boundary node.
    pub(crate) fn mode_laplacian(&self, m: usize) -> &[f64] {
        &self.mode_lap[m]
    }

    /// Folded radial derivative for Fourier mode `m`, `n_r x n_r` row-major.
    pub(crate) fn mode_radial_derivative(&self, m: usize) -> &[f64] {
        &self.mode_dr[m]
    }

    fn mode_index(&self, k: usize) -> usize {
        k.min(self.n_theta - k)
    }

    /// Signed wavenumber of FFT slot `k`; the Nyquist slot maps to 0 for first derivatives.
    fn wavenumber(&self, k: usize) -> f64 {
        let n = self.n_theta;
        if 2 * k == n {
            0.0
        } else if k < n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        }
    }

    fn to_modes(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for row in buf.chunks_mut(self.n_theta) {
            self.fwd.process(row);
        }
        buf
    }

    fn from_modes(&self, mut modes: Vec<Complex64>) -> Vec<f64> {
        for row in modes.chunks_mut(self.n_theta) {
            self.inv.process(row);
        }
        let scale = 1.0 / self.n_theta as f64;
        modes.iter().map(|c| c.re * scale).collect()
    }

    fn apply_radial(&self, modes: &[Complex64], ops: &[Vec<f64>]) -> Vec<Complex64> {
        let (nr, nt) = (self.n_r, self.n_theta);
        let mut out = vec![Complex64::new(0.0, 0.0); nr * nt];
        let mut col = vec![Complex64::new(0.0, 0.0); nr];
        for k in 0..nt {
            let op = &ops[self.mode_index(k)];
            for j in 0..nr {
                col[j] = modes[j * nt + k];
            }
            for i in 0..nr {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..nr {
                    acc += col[j] * op[i * nr + j];
                }
                out[i * nt + k] = acc;
            }
        }
        out
    }

    fn field(&self, values: Vec<f64>) -> DiscField {
        DiscField {
            n_r: self.n_r,
            n_theta: self.n_theta,
            values,
        }
    }

    pub fn laplacian(&self, u: &DiscField) -> Result<DiscField> {
        self.check(u)?;
        let modes = self.to_modes(&u.values);
        let out = self.apply_radial(&modes, &self.mode_lap);
        Ok(self.field(self.from_modes(out)))
    }

    pub fn radial_derivative(&self, u: &DiscField) -> Result<DiscField> {
        self.check(u)?;
        let modes = self.to_modes(&u.values);
        let out = self.apply_radial(&modes, &self.mode_dr);
        Ok(self.field(self.from_modes(out)))
    }

    pub fn angular_derivative(&self, u: &DiscField) -> Result<DiscField> {
        self.check(u)?;
        let mut modes = self.to_modes(&u.values);
        for (idx, c) in modes.iter_mut().enumerate() {
            let m = self.wavenumber(idx % self.n_theta);
            *c *= Complex64::new(0.0, m);
        }
        Ok(self.field(self.from_modes(modes)))
    }

    /// Derivative along the boundary circle.
    pub fn boundary_derivative(&self, b: &BoundaryField) -> Result<BoundaryField> {
        self.check_boundary(b)?;
        let mut c: Vec<Complex64> = b.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut c);
        for (k, ck) in c.iter_mut().enumerate() {
            *ck *= Complex64::new(0.0, self.wavenumber(k));
        }
        self.inv.process(&mut c);
        let scale = 1.0 / self.n_theta as f64;
        Ok(BoundaryField {
            values: c.iter().map(|z| z.re * scale).collect(),
        })
    }

    /// Outward normal derivative at the boundary nodes.
    pub fn normal_derivative(&self, u: &DiscField) -> Result<BoundaryField> {
        self.check(u)?;
        let (nr, nt) = (self.n_r, self.n_theta);
        let modes = self.to_modes(&u.values);
        let mut row = vec![Complex64::new(0.0, 0.0); nt];
        for (k, slot) in row.iter_mut().enumerate() {
            let op = &self.mode_dr[self.mode_index(k)];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..nr {
                acc += modes[j * nt + k] * op[j];
            }
            *slot = acc;
        }
        self.inv.process(&mut row);
        let scale = 1.0 / nt as f64;
        Ok(BoundaryField {
            values: row.iter().map(|z| z.re * scale).collect(),
        })
    }

    /// Cartesian gradient `(u_x, u_y)`.
    pub fn gradient(&self, u: &DiscField) -> Result<(DiscField, DiscField)> {
        let ur = self.radial_derivative(u)?;
        let ut = self.angular_derivative(u)?;
        let mut gx = vec![0.0; self.len()];
        let mut gy = vec![0.0; self.len()];
        for i in 0..self.n_r {
            for k in 0..self.n_theta {
                let p = i * self.n_theta + k;
                let (c, s) = (self.cos_t[k], self.sin_t[k]);
                let a = ut.values[p] / self.r[i];
                gx[p] = c * ur.values[p] - s * a;
                gy[p] = s * ur.values[p] + c * a;
            }
        }
        Ok((self.field(gx), self.field(gy)))
    }

    pub fn integrate_disc(&self, w: &DiscField) -> Result<f64> {
        self.check(w)?;
        let mut total = 0.0;
        for i in 0..self.n_r {
            let row: f64 = w.values[i * self.n_theta..(i + 1) * self.n_theta].iter().sum();
            total += self.radial_weights[i] * row;
        }
        Ok(total * self.angular_weight())
    }

    pub fn integrate_boundary(&self, w: &BoundaryField) -> Result<f64> {
        self.check_boundary(w)?;
        Ok(w.values.iter().sum::<f64>() * self.angular_weight())
    }

    /// Dirichlet integral `int_B |grad u|^2 dz`.
    pub fn dirichlet_integral(&self, u: &DiscField) -> Result<f64> {
        let (gx, gy) = self.gradient(u)?;
        self.integrate_disc(&gx.zip_map(&gy, |a, b| a * a + b * b))
    }

    pub fn harmonic_extension(&self, b: &BoundaryField) -> Result<DiscField> {
        self.check_boundary(b)?;
        let nt = self.n_theta;
        let mut c: Vec<Complex64> = b.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut c);
        let mut modes = vec![Complex64::new(0.0, 0.0); self.len()];
        for i in 0..self.n_r {
            for k in 0..nt {
                let m = self.mode_index(k) as i32;
                modes[i * nt + k] = c[k] * self.r[i].powi(m);
            }
        }
        Ok(self.field(self.from_modes(modes)))
    }

    /// Solves `(c - Laplacian) u = rhs` in the disc with `p u + q du/dnu = g` on the
    /// boundary. Constant `p`, `q` decouple by Fourier mode; otherwise the full nodal
    /// system is solved. With `c = 0` and `p = 0` the solution is fixed by zero mean
    /// and the data must satisfy the Neumann compatibility condition.
    pub fn helmholtz_solve(&self, c: f64, rhs: &DiscField, robin: &Robin) -> Result<DiscField> {
        self.check(rhs)?;
        self.check_boundary(&robin.p)?;
        self.check_boundary(&robin.q)?;
        self.check_boundary(&robin.g)?;
        if c < 0.0 {
            return Err(Error::Domain(format!("Helmholtz shift c = {c} must be >= 0")));
        }
        let pure_neumann = c == 0.0 && robin.p.values.iter().all(|&p| p == 0.0);
        if pure_neumann {
            if robin.q.values.contains(&0.0) {
                return Err(Error::Solvability(
                    "boundary condition vanishes identically at some node".into(),
                ));
            }
            let interior = self.integrate_disc(rhs)?;
            let flux = self.integrate_boundary(&robin.g.zip_map(&robin.q, |g, q| g / q))?;
            let scale = 1.0 + interior.abs() + flux.abs();
            if (interior + flux).abs() > 1e-8 * scale {
                return Err(Error::Solvability(format!(
                    "Neumann data incompatible: int rhs + int g/q = {:.3e}",
                    interior + flux
                )));
            }
        }
        let constant = |b: &BoundaryField| b.values.iter().all(|&v| v == b.values[0]);
        if constant(&robin.p) && constant(&robin.q) {
            self.helmholtz_modes(c, rhs, robin.p.values[0], robin.q.values[0], &robin.g, pure_neumann)
        } else {
            self.helmholtz_dense(c, rhs, robin, pure_neumann)
        }
    }

    fn helmholtz_modes(
        &self,
        c: f64,
        rhs: &DiscField,
        p: f64,
        q: f64,
        g: &BoundaryField,
        pure_neumann: bool,
    ) -> Result<DiscField> {
        let (nr, nt) = (self.n_r, self.n_theta);
        let rhs_modes = self.to_modes(&rhs.values);
        let mut g_modes: Vec<Complex64> = g.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut g_modes);
        let mut out = vec![Complex64::new(0.0, 0.0); nr * nt];
        for m in 0..=nt / 2 {
            let bordered = pure_neumann && m == 0;
            let size = if bordered { nr + 1 } else { nr };
            let mut a = Mat::<f64>::zeros(size, size);
            let (lap, dr) = (&self.mode_lap[m], &self.mode_dr[m]);
            for j in 0..nr {
                a.write(0, j, q * dr[j]);
            }
            a.write(0, 0, a.read(0, 0) + p);
            for i in 1..nr {
                for j in 0..nr {
                    a.write(i, j, -lap[i * nr + j]);
                }
                a.write(i, i, a.read(i, i) + c);
            }
            if bordered {
                for i in 0..nr {
                    a.write(i, nr, 1.0);
                    a.write(nr, i, self.radial_weights[i]);
                }
            }
            let slots: Vec<usize> = if m == 0 || 2 * m == nt {
                vec![m]
            } else {
                vec![m, nt - m]
            };
            let mut b = Mat::<f64>::zeros(size, 2 * slots.len());
            for (s, &k) in slots.iter().enumerate() {
                b.write(0, 2 * s, g_modes[k].re);
                b.write(0, 2 * s + 1, g_modes[k].im);
                for i in 1..nr {
                    b.write(i, 2 * s, rhs_modes[i * nt + k].re);
                    b.write(i, 2 * s + 1, rhs_modes[i * nt + k].im);
                }
            }
            let x = a.partial_piv_lu().solve(&b);
            for (s, &k) in slots.iter().enumerate() {
                for i in 0..nr {
                    out[i * nt + k] = Complex64::new(x.read(i, 2 * s), x.read(i, 2 * s + 1));
                }
            }
        }
        let values = self.from_modes(out);
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solvability("singular radial system".into()));
        }
        Ok(self.field(values))
    }

    fn helmholtz_dense(
        &self,
        c: f64,
        rhs: &DiscField,
        robin: &Robin,
        pure_neumann: bool,
    ) -> Result<DiscField> {
        let n = self.len();
        let size = if pure_neumann { n + 1 } else { n };
        let mut a = Mat::<f64>::zeros(size, size);
        let lap = self.nodal_laplacian();
        for row in self.n_theta..n {
            for col in 0..n {
                a.write(row, col, -lap.read(row, col));
            }
            a.write(row, row, a.read(row, row) + c);
        }
        for k in 0..self.n_theta {
            for (col, w) in self.nodal_normal_derivative_row(k) {
                a.write(k, col, a.read(k, col) + robin.q.values[k] * w);
            }
            a.write(k, k, a.read(k, k) + robin.p.values[k]);
        }
        if pure_neumann {
            for i in 0..self.n_r {
                for k in 0..self.n_theta {
                    let p = i * self.n_theta + k;
                    a.write(p, n, 1.0);
                    a.write(n, p, self.radial_weights[i]);
                }
            }
        }
        let mut b = Mat::<f64>::zeros(size, 1);
        for p in 0..n {
            let v = if p < self.n_theta {
                robin.g.values[p]
            } else {
                rhs.values[p]
            };
            b.write(p, 0, v);
        }
        let x = a.partial_piv_lu().solve(&b);
        let values: Vec<f64> = (0..n).map(|p| x.read(p, 0)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solvability("singular nodal system".into()));
        }
        Ok(self.field(values))
    }

    /// Dense nodal Laplacian acting on the row-major node vector.
    pub fn nodal_laplacian(&self) -> Mat<f64> {
        let (nr, nt) = (self.n_r, self.n_theta);
        let big_n = 2 * nr - 1;
        let np = big_n + 1;
        let n = nr * nt;
        let h = self.angular_weight();
        let mut dtt = vec![0.0; nt];
        dtt[0] = -PI * PI / (3.0 * h * h) - 1.0 / 6.0;
        for (d, v) in dtt.iter_mut().enumerate().skip(1) {
            let s = (d as f64 * h / 2.0).sin();
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            *v = -sign / (2.0 * s * s);
        }
        let mut a = Mat::<f64>::zeros(n, n);
        for i in 0..nr {
            let inv_r = 1.0 / self.r[i];
            for k in 0..nt {
                let row = i * nt + k;
                let ko = self.opposite(k);
                for j in 0..nr {
                    let pos = self.d2[i * np + j] + inv_r * self.d1[i * np + j];
                    let neg = self.d2[i * np + big_n - j] + inv_r * self.d1[i * np + big_n - j];
                    a.write(row, j * nt + k, a.read(row, j * nt + k) + pos);
                    a.write(row, j * nt + ko, a.read(row, j * nt + ko) + neg);
                }
                for l in 0..nt {
                    let d = (k + nt - l) % nt;
                    let col = i * nt + l;
                    a.write(row, col, a.read(row, col) + inv_r * inv_r * dtt[d]);
                }
            }
        }
        a
    }

    /// Nonzero coefficients `(node index, weight)` of the normal derivative at boundary node `k`.
    pub fn nodal_normal_derivative_row(&self, k: usize) -> Vec<(usize, f64)> {
        let (nr, nt) = (self.n_r, self.n_theta);
        let big_n = 2 * nr - 1;
        let ko = self.opposite(k);
        let mut row = Vec::with_capacity(2 * nr);
        for j in 0..nr {
            row.push((j * nt + k, self.d1[j]));
            row.push((j * nt + ko, self.d1[big_n - j]));
        }
        row
    }

    /// Radial barycentric coefficients on the doubled interval for abscissa `x`.
    fn radial_coefficients(&self, x: f64) -> Vec<f64> {
        let np = self.x_full.len();
        let mut lam = vec![0.0; np];
        if let Some(j) = self.x_full.iter().position(|&xj| (x - xj).abs() < 1e-15) {
            lam[j] = 1.0;
            return lam;
        }
        let mut total = 0.0;
        for j in 0..np {
            let v = self.bary[j] / (x - self.x_full[j]);
            lam[j] = v;
            total += v;
        }
        for v in lam.iter_mut() {
            *v /= total;
        }
        lam
    }

    /// Spectral interpolation of `u` at the point `(r cos theta, r sin theta)`, `0 <= r <= 1`.
    pub fn interpolate_polar(&self, u: &DiscField, r: f64, theta: f64) -> f64 {
        let (nr, nt) = (self.n_r, self.n_theta);
        let big_n = 2 * nr - 1;
        let lam = self.radial_coefficients(r);
        let mut column = vec![0.0; nt];
        for (k, slot) in column.iter_mut().enumerate() {
            let ko = self.opposite(k);
            let mut acc = 0.0;
            for j in 0..nr {
                acc += lam[j] * u.values[j * nt + k] + lam[big_n - j] * u.values[j * nt + ko];
            }
            *slot = acc;
        }
        self.interpolate_angle(&column, theta)
    }

    pub fn interpolate(&self, u: &DiscField, x: f64, y: f64) -> f64 {
        let r = x.hypot(y);
        let theta = if r == 0.0 { 0.0 } else { y.atan2(x) };
        self.interpolate_polar(u, r.min(1.0), theta)
    }

    /// Trigonometric interpolation of equispaced samples at angle `theta`.
    pub fn interpolate_angle(&self, samples: &[f64], theta: f64) -> f64 {
        let nt = self.n_theta;
        let h = self.angular_weight();
        let t = theta.rem_euclid(2.0 * PI);
        let pos = t / h;
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-13 {
            return samples[(nearest as usize) % nt];
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &s) in samples.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let w = sign / ((t - self.theta[k]) / 2.0).tan();
            num += w * s;
            den += w;
        }
        num / den
    }

    pub fn interpolate_boundary(&self, b: &BoundaryField, theta: f64) -> f64 {
        self.interpolate_angle(&b.values, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> DiscGrid {
        DiscGrid::new(32, 64).unwrap()
    }

    #[test]
    fn rejects_small_or_odd_grids() {
        assert!(DiscGrid::new(7, 64).is_err());
        assert!(DiscGrid::new(16, 63).is_err());
        assert!(DiscGrid::new(16, 6).is_err());
    }

    #[test]
    fn weights_sum_to_disc_and_circle() {
        let g = grid();
        assert!((g.angular_weight() * g.n_theta() as f64 - 2.0 * PI).abs() < 1e-12);
        assert!((g.integrate_disc(&g.constant(1.0)).unwrap() - PI).abs() < 1e-12);
        let one = BoundaryField::constant(g.n_theta(), 1.0);
        assert!((g.integrate_boundary(&one).unwrap() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn integrates_x_squared() {
        let g = grid();
        let w = g.sample(|x, _| x * x);
        assert!((g.integrate_disc(&w).unwrap() - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_of_simple_polynomials() {
        let g = grid();
        let lap = g.laplacian(&g.sample(|x, y| x * x + y * y)).unwrap();
        assert!(lap.values.iter().all(|v| (v - 4.0).abs() < 1e-8));
        let lap = g.laplacian(&g.sample(|x, _| x)).unwrap();
        assert!(lap.max_abs() < 1e-8);
    }

    #[test]
    fn laplacian_of_log_profile() {
        let g = grid();
        let r2 = 0.25;
        let u = g.sample(|x, y| (1.0 + r2 * (x * x + y * y)).ln());
        let exact = g.sample(|x, y| {
            let d = 1.0 + r2 * (x * x + y * y);
            4.0 * r2 / (d * d)
        });
        let lap = g.laplacian(&u).unwrap();
        assert!(lap.max_abs_diff(&exact) < 1e-8);
    }

    #[test]
    fn laplacian_shape_mismatch() {
        let g = grid();
        let other = DiscGrid::new(16, 32).unwrap();
        assert!(matches!(
            g.laplacian(&other.zeros()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn normal_derivative_examples() {
        let g = grid();
        let dn = g.normal_derivative(&g.sample(|x, _| x)).unwrap();
        for (k, v) in dn.values.iter().enumerate() {
            assert!((v - g.angles()[k].cos()).abs() < 1e-10);
        }
        assert!(g.normal_derivative(&g.constant(3.0)).unwrap().max_abs() < 1e-10);
        let dn = g.normal_derivative(&g.sample(|x, y| x * x + y * y)).unwrap();
        assert!(dn.values.iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn gradient_examples() {
        let g = grid();
        let (gx, gy) = g.gradient(&g.sample(|x, _| x)).unwrap();
        assert!(gx.add_scalar(-1.0).max_abs() < 1e-10 && gy.max_abs() < 1e-10);
        let (gx, gy) = g.gradient(&g.sample(|x, y| x * x + y * y)).unwrap();
        assert!(gx.max_abs_diff(&g.sample(|x, _| 2.0 * x)) < 1e-10);
        assert!(gy.max_abs_diff(&g.sample(|_, y| 2.0 * y)) < 1e-10);
        let (gx, gy) = g.gradient(&g.sample(|x, y| x * y)).unwrap();
        assert!(gx.max_abs_diff(&g.sample(|_, y| y)) < 1e-10);
        assert!(gy.max_abs_diff(&g.sample(|x, _| x)) < 1e-10);
    }

    #[test]
    fn harmonic_extension_examples() {
        let g = grid();
        let h = g.harmonic_extension(&g.sample_boundary(|t| t.cos())).unwrap();
        assert!(h.max_abs_diff(&g.sample(|x, _| x)) < 1e-12);
        let h = g.harmonic_extension(&BoundaryField::constant(64, 2.5)).unwrap();
        assert!(h.add_scalar(-2.5).max_abs() < 1e-12);
        let h = g.harmonic_extension(&g.sample_boundary(|t| (2.0 * t).cos())).unwrap();
        assert!(h.max_abs_diff(&g.sample(|x, y| x * x - y * y)) < 1e-12);
    }

    #[test]
    fn helmholtz_dirichlet_harmonic() {
        let g = grid();
        let robin = Robin::dirichlet(g.sample_boundary(|t| t.cos()));
        let u = g.helmholtz_solve(0.0, &g.zeros(), &robin).unwrap();
        assert!(u.max_abs_diff(&g.sample(|x, _| x)) < 1e-10);
    }

    #[test]
    fn helmholtz_manufactured() {
        let g = grid();
        let u0 = g.sample(|x, y| x * x - y * y);
        let rhs = u0.zip_map(&g.laplacian(&u0).unwrap(), |u, l| u - l);
        let robin = Robin::dirichlet(g.sample_boundary(|t| (2.0 * t).cos()));
        let u = g.helmholtz_solve(1.0, &rhs, &robin).unwrap();
        assert!(u.max_abs_diff(&u0) < 1e-10);
    }

    #[test]
    fn helmholtz_variable_robin_matches_manufactured() {
        let g = DiscGrid::new(12, 16).unwrap();
        let u0 = g.sample(|x, y| (0.3 * x - 0.2 * y).exp());
        let rhs = u0.zip_map(&g.laplacian(&u0).unwrap(), |u, l| 2.0 * u - l);
        let p = g.sample_boundary(|t| 1.0 + 0.5 * t.cos());
        let q = g.sample_boundary(|t| 0.7 + 0.2 * t.sin());
        let dn = g.normal_derivative(&u0).unwrap();
        let trace = u0.trace();
        let gvals: Vec<f64> = (0..16)
            .map(|k| p.values[k] * trace.values[k] + q.values[k] * dn.values[k])
            .collect();
        let robin = Robin {
            p,
            q,
            g: BoundaryField { values: gvals },
        };
        let u = g.helmholtz_solve(2.0, &rhs, &robin).unwrap();
        assert!(u.max_abs_diff(&u0) < 1e-9);
    }

    #[test]
    fn helmholtz_neumann_incompatible() {
        let g = grid();
        let robin = Robin::neumann(BoundaryField::constant(64, 0.0));
        let err = g.helmholtz_solve(0.0, &g.constant(1.0), &robin).unwrap_err();
        assert!(matches!(err, Error::Solvability(_)));
    }

    #[test]
    fn helmholtz_neumann_compatible_mean_zero() {
        let g = grid();
        // u = x^2 + y^2 - 1/2 has -Laplacian = -4, normal derivative 2, mean zero.
        let robin = Robin::neumann(BoundaryField::constant(64, 2.0));
        let u = g.helmholtz_solve(0.0, &g.constant(-4.0), &robin).unwrap();
        assert!(u.max_abs_diff(&g.sample(|x, y| x * x + y * y - 0.5)) < 1e-9);
    }

    #[test]
    fn nodal_laplacian_agrees_with_modal() {
        let g = DiscGrid::new(10, 16).unwrap();
        let u = g.sample(|x, y| (x + 0.5 * y * y).sin() + x * y * y * y);
        let modal = g.laplacian(&u).unwrap();
        let a = g.nodal_laplacian();
        for p in 0..g.len() {
            let v: f64 = (0..g.len()).map(|q| a.read(p, q) * u.values[q]).sum();
            assert!((v - modal.values[p]).abs() < 1e-9);
        }
        let dn = g.normal_derivative(&u).unwrap();
        for k in 0..16 {
            let v: f64 = g
                .nodal_normal_derivative_row(k)
                .iter()
                .map(|&(q, w)| w * u.values[q])
                .sum();
            assert!((v - dn.values[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolation_reproduces_smooth_fields() {
        let g = grid();
        let f = |x: f64, y: f64| (x - 0.3 * y).exp() * (1.0 + x * y);
        let u = g.sample(f);
        for &(x, y) in &[(0.0, 0.0), (0.31, -0.42), (-0.7, 0.7), (0.999, 0.01), (1.0, 0.0)] {
            assert!((g.interpolate(&u, x, y) - f(x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_derivative_of_cosine() {
        let g = grid();
        let d = g.boundary_derivative(&g.sample_boundary(|t| (3.0 * t).cos())).unwrap();
        for (k, v) in d.values.iter().enumerate() {
            assert!((v + 3.0 * (3.0 * g.angles()[k]).sin()).abs() < 1e-11);
        }
    }
}
