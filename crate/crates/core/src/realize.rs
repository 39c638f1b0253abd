//! Concrete realizations of the catalog targets' structure bundles, built so
//! the frame equation becomes an ODE on a finite-dimensional state:
//!
//! - flat space forms: the affine isometry group, (n+1) x (n+1) matrices;
//! - curved space forms: the isometry group of the ambient quadric
//!   (rotation group, or the Lorentz group of the hyperboloid model);
//! - complex space forms: the (indefinite) unitary group acting on the
//!   ambient complex quadric, stored as real matrices;
//! - Lie-group targets: exponential coordinates of the second kind driven by
//!   adjoint-representation transport (no faithful matrix model needed);
//! - E(kappa, tau): fibration-chart coordinates plus an orthonormal frame
//!   pinned to the vertical field, with the closed-form frame connection;
//! - products: block direct sums of factor realizations.
//!
//! A state encodes a point of the target structure bundle; `state_derivative`
//! is the right-invariant vector field whose lambda-value is the given
//! (theta, omega) pair.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::chart::{curvature_endo, levi_civita_at, ChartGrid, ConnectionField, DiffParams, FieldSource, MetricField};
use crate::error::{Error, Result};
use crate::fd::FdOrder;
use crate::gstructure::standard_complex_structure;
use crate::models::{characteristic_tensors, LieAlgebra, ModelSpace};
use crate::tensor::{checked_inverse, Bilinear, Mat, Vect};

pub trait Realization: Send + Sync {
    fn nbar(&self) -> usize;
    fn state_len(&self) -> usize;
    fn point_dim(&self) -> usize;
    /// Base frame at the realization's origin.
    fn identity_state(&self) -> Vect;
    /// State velocity for the instantaneous form value (u, omega).
    fn state_derivative(&self, state: &Vect, u: &Vect, omega: &Mat) -> Result<Vect>;
    /// Pull a drifted state back onto the realization manifold.
    fn reproject(&self, state: &Vect) -> Vect;
    /// Distance of the state from the realization manifold (frame constraints).
    fn structural_residual(&self, state: &Vect) -> f64;
    /// Target point under the state.
    fn point(&self, state: &Vect) -> Vect;
    /// Frame vectors as point-coordinate tangent columns (point_dim x nbar).
    fn frame_tangent(&self, state: &Vect) -> Mat;
    /// Target metric in point coordinates.
    fn ambient_metric(&self, point: &Vect) -> Mat;
    /// Target covariant derivative of a field w along a curve, given the
    /// plain coordinate derivative dw.
    fn covariant_deriv(&self, point: &Vect, vel: &Vect, w: &Vect, dw: &Vect) -> Vect;
    /// Group-style distance between states (holonomy measurements).
    fn distance(&self, a: &Vect, b: &Vect) -> f64;
    /// Left translation by a group element, where group structure is exact.
    fn compose(&self, g: &Vect, state: &Vect) -> Option<Vect>;
    /// Group element exp(t * zeta(u, omega)) where available.
    fn exp_lambda(&self, u: &Vect, omega: &Mat, t: f64) -> Option<Vect>;
    /// Max defect between curvature/torsion computed from the realization and
    /// the model's characteristic tensors, over random samples.
    fn curvature_check(&self, model: &ModelSpace, rng: &mut ChaCha8Rng, samples: usize) -> Result<f64>;
    fn describe(&self) -> String;
}

fn mat_of(state: &Vect, m: usize) -> Mat {
    Mat::from_column_slice(m, m, state.as_slice())
}

fn state_of(mat: &Mat) -> Vect {
    Vect::from_column_slice(mat.as_slice())
}

/// Newton iteration toward the eta-orthogonal polar factor.
fn eta_polar(f: &Mat, eta: &Mat) -> Mat {
    let eta_inv = eta.clone().try_inverse().expect("eta invertible");
    let mut q = f.clone();
    for _ in 0..4 {
        if let Some(qi) = q.clone().try_inverse() {
            q = (&q + &eta_inv * qi.transpose() * eta) * 0.5;
        } else {
            break;
        }
    }
    q
}

fn randv(rng: &mut ChaCha8Rng, n: usize) -> Vect {
    Vect::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Admissible omega-lift of a theta value: the canonical representative of
/// the model's inner torsion plus a random structure-algebra element.
fn admissible_omega(model: &ModelSpace, u: &Vect, rng: &mut ChaCha8Rng) -> Result<Mat> {
    let s = model.standard_structure();
    let t = characteristic_tensors(model, &s)?;
    let rep = s.representative(&t.inner(u)?)?;
    Ok(rep + s.random_lie_member(rng))
}

/// Check the structure identity of a matrix realization: for left-invariant
/// lambda values, [zeta(z1), zeta(z2)] decomposes through the model's torsion
/// and curvature. Returns the max defect over the samples.
fn commutator_fidelity(
    model: &ModelSpace,
    embed: &dyn Fn(&Vect, &Mat) -> Mat,
    decompose: &dyn Fn(&Mat) -> (Vect, Mat),
    rng: &mut ChaCha8Rng,
    samples: usize,
) -> Result<f64> {
    let s = model.standard_structure();
    let t = characteristic_tensors(model, &s)?;
    let n = model.dim();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u1 = randv(rng, n);
        let u2 = randv(rng, n);
        let x1 = admissible_omega(model, &u1, rng)?;
        let x2 = admissible_omega(model, &u2, rng)?;
        let z1 = embed(&u1, &x1);
        let z2 = embed(&u2, &x2);
        let k = &z1 * &z2 - &z2 * &z1;
        let (theta, omega) = decompose(&k);
        let theta_expect = &x1 * &u2 - &x2 * &u1 - t.torsion(&u1, &u2)?;
        let omega_curv = &x1 * &x2 - &x2 * &x1 - omega;
        // the curvature part is recovered modulo nothing: compare directly
        let r = t.curvature(&u1, &u2)?;
        worst = worst.max((theta - theta_expect).norm()).max((omega_curv - r).norm());
    }
    Ok(worst)
}

/// Curvature of a coordinate metric field by nested finite differences,
/// compared against the transported characteristic curvature. The frame that
/// transports R_Z is supplied per sample point.
fn metric_fd_fidelity(
    model: &ModelSpace,
    metric: &MetricField,
    grid: &ChartGrid,
    frame_at: &dyn Fn(&Vect) -> Mat,
    points: &[Vect],
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let s = model.standard_structure();
    let tensors = characteristic_tensors(model, &s)?;
    let dp = DiffParams { step: 2e-3, order: FdOrder::Four };
    let conn = ConnectionField::new(
        grid.dim(),
        FieldSource::closed({
            let metric = metric.clone();
            let grid = grid.clone();
            move |x: &Vect| {
                levi_civita_at(&metric, &grid, x, dp)
                    .unwrap_or_else(|_| vec![Mat::from_element(grid.dim(), grid.dim(), f64::NAN); grid.dim()])
            }
        }),
    );
    let n = grid.dim();
    let mut worst = 0.0f64;
    for x in points {
        let p = frame_at(x);
        let p_inv = checked_inverse(&p)?;
        for _ in 0..4 {
            let v = randv(rng, n);
            let w = randv(rng, n);
            let r_fd = curvature_endo(&conn, grid, x, &v, &w, dp)?;
            let r_model = &p * tensors.curvature(&(&p_inv * &v), &(&p_inv * &w))? * &p_inv;
            worst = worst.max((r_fd - r_model).norm());
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Affine group of a flat (possibly complex) space form
// ---------------------------------------------------------------------------

pub struct AffineGroup {
    nbar: usize,
    eta: Mat,
    complex: bool,
}

impl AffineGroup {
    pub fn new(nbar: usize, index: usize, complex: bool) -> Self {
        let eta = if complex {
            crate::gstructure::unitary_model_form(nbar, index)
        } else {
            Bilinear::minkowski(nbar, index).gram().clone()
        };
        Self { nbar, eta, complex }
    }

    fn m(&self) -> usize {
        self.nbar + 1
    }

    fn zeta(&self, u: &Vect, omega: &Mat) -> Mat {
        let n = self.nbar;
        let mut z = Mat::zeros(n + 1, n + 1);
        z.view_mut((0, 0), (n, n)).copy_from(omega);
        for i in 0..n {
            z[(i, n)] = u[i];
        }
        z
    }
}

impl Realization for AffineGroup {
    fn nbar(&self) -> usize {
        self.nbar
    }
    fn state_len(&self) -> usize {
        self.m() * self.m()
    }
    fn point_dim(&self) -> usize {
        self.nbar
    }
    fn identity_state(&self) -> Vect {
        state_of(&Mat::identity(self.m(), self.m()))
    }
    fn state_derivative(&self, state: &Vect, u: &Vect, omega: &Mat) -> Result<Vect> {
        let f = mat_of(state, self.m());
        Ok(state_of(&(f * self.zeta(u, omega))))
    }
    fn reproject(&self, state: &Vect) -> Vect {
        let n = self.nbar;
        let mut f = mat_of(state, self.m());
        let mut q = f.view((0, 0), (n, n)).into_owned();
        if self.complex {
            let j = standard_complex_structure(n);
            q = (&q - &j * &q * &j) * 0.5;
        }
        let q = eta_polar(&q, &self.eta);
        f.view_mut((0, 0), (n, n)).copy_from(&q);
        for i in 0..n {
            f[(n, i)] = 0.0;
        }
        f[(n, n)] = 1.0;
        state_of(&f)
    }
    fn structural_residual(&self, state: &Vect) -> f64 {
        let n = self.nbar;
        let f = mat_of(state, self.m());
        let q = f.view((0, 0), (n, n)).into_owned();
        let mut r = (q.transpose() * &self.eta * &q - &self.eta).norm();
        if self.complex {
            let j = standard_complex_structure(n);
            r += (&q * &j - &j * &q).norm();
        }
        r
    }
    fn point(&self, state: &Vect) -> Vect {
        let f = mat_of(state, self.m());
        Vect::from_fn(self.nbar, |i, _| f[(i, self.nbar)])
    }
    fn frame_tangent(&self, state: &Vect) -> Mat {
        mat_of(state, self.m()).view((0, 0), (self.nbar, self.nbar)).into_owned()
    }
    fn ambient_metric(&self, _point: &Vect) -> Mat {
        self.eta.clone()
    }
    fn covariant_deriv(&self, _point: &Vect, _vel: &Vect, _w: &Vect, dw: &Vect) -> Vect {
        dw.clone()
    }
    fn distance(&self, a: &Vect, b: &Vect) -> f64 {
        let (fa, fb) = (mat_of(a, self.m()), mat_of(b, self.m()));
        match fa.try_inverse() {
            Some(fi) => (fi * fb - Mat::identity(self.m(), self.m())).norm(),
            None => f64::INFINITY,
        }
    }
    fn compose(&self, g: &Vect, state: &Vect) -> Option<Vect> {
        Some(state_of(&(mat_of(g, self.m()) * mat_of(state, self.m()))))
    }
    fn exp_lambda(&self, u: &Vect, omega: &Mat, t: f64) -> Option<Vect> {
        Some(state_of(&(self.zeta(u, omega) * t).exp()))
    }
    fn curvature_check(&self, model: &ModelSpace, rng: &mut ChaCha8Rng, samples: usize) -> Result<f64> {
        let n = self.nbar;
        let embed = |u: &Vect, x: &Mat| self.zeta(u, x);
        let decompose = move |w: &Mat| {
            let x = w.view((0, 0), (n, n)).into_owned();
            let u = Vect::from_fn(n, |i, _| w[(i, n)]);
            (u, x)
        };
        commutator_fidelity(model, &embed, &decompose, rng, samples)
    }
    fn describe(&self) -> String {
        format!("affine isometry group of flat R^{}", self.nbar)
    }
}

// ---------------------------------------------------------------------------
// Isometry group of an ambient quadric (curved space forms)
// ---------------------------------------------------------------------------

pub struct QuadricGroup {
    nbar: usize,
    /// ambient real dimension
    ndim: usize,
    eta_amb: Mat,
    eta_model: Mat,
    radius: f64,
    sigma: f64,
    complex: bool,
}

impl QuadricGroup {
    /// Real space form of curvature c != 0 and index r: sphere-type for
    /// c > 0 (sigma = +1), hyperboloid in one extra timelike direction for
    /// c < 0 (sigma = -1).
    pub fn space_form(nbar: usize, index: usize, c: f64) -> Self {
        let sigma = c.signum();
        let radius = 1.0 / c.abs().sqrt();
        let eta_model = Bilinear::minkowski(nbar, index).gram().clone();
        let mut eta_amb = Mat::zeros(nbar + 1, nbar + 1);
        eta_amb.view_mut((0, 0), (nbar, nbar)).copy_from(&eta_model);
        eta_amb[(nbar, nbar)] = sigma;
        Self { nbar, ndim: nbar + 1, eta_amb, eta_model, radius, sigma, complex: false }
    }

    /// Complex space form of holomorphic curvature c != 0; nbar = 2l real
    /// dimensions, index = 2s. Ambient: complex quadric in C^{l+1}, realized
    /// over the reals in the (re, im)-stacked layout.
    pub fn complex_space_form(nbar: usize, index: usize, c: f64) -> Self {
        let l = nbar / 2;
        let s = index / 2;
        let sigma = c.signum();
        let radius = 2.0 / c.abs().sqrt();
        let mp = l + 1;
        // complex-axis signs: (l - s) positive, s negative, position sigma
        let mut diag = vec![1.0; mp];
        for d in diag.iter_mut().take(l).skip(l - s) {
            *d = -1.0;
        }
        diag[l] = sigma;
        let mut eta_amb = Mat::zeros(2 * mp, 2 * mp);
        for i in 0..mp {
            eta_amb[(i, i)] = diag[i];
            eta_amb[(mp + i, mp + i)] = diag[i];
        }
        let eta_model = crate::gstructure::unitary_model_form(nbar, index);
        Self { nbar, ndim: 2 * mp, eta_amb, eta_model, radius, sigma, complex: true }
    }

    /// Real-embed a complex matrix given as (re, im).
    fn complex_embed(re: &Mat, im: &Mat) -> Mat {
        let m = re.nrows();
        let mut out = Mat::zeros(2 * m, 2 * m);
        out.view_mut((0, 0), (m, m)).copy_from(re);
        out.view_mut((m, m), (m, m)).copy_from(re);
        out.view_mut((m, 0), (m, m)).copy_from(im);
        out.view_mut((0, m), (m, m)).copy_from(&(-im));
        out
    }

    fn zeta(&self, u: &Vect, omega: &Mat) -> Mat {
        if !self.complex {
            let n = self.nbar;
            let mut z = Mat::zeros(n + 1, n + 1);
            z.view_mut((0, 0), (n, n)).copy_from(omega);
            let b = &self.eta_model * u * (-self.sigma / self.radius);
            for i in 0..n {
                z[(i, n)] = u[i] / self.radius;
                z[(n, i)] = b[i];
            }
            z
        } else {
            let l = self.nbar / 2;
            let mp = l + 1;
            let mut re = Mat::zeros(mp, mp);
            let mut im = Mat::zeros(mp, mp);
            re.view_mut((0, 0), (l, l)).copy_from(&omega.view((0, 0), (l, l)).into_owned());
            im.view_mut((0, 0), (l, l)).copy_from(&omega.view((l, 0), (l, l)).into_owned());
            for i in 0..l {
                let (ur, ui) = (u[i], u[l + i]);
                re[(i, l)] = ur / self.radius;
                im[(i, l)] = ui / self.radius;
                // antihermitian closure: A_pos,i = -sigma eta_ii conj(u_i)/rho
                let eii = self.eta_amb[(i, i)];
                re[(l, i)] = -self.sigma * eii * ur / self.radius;
                im[(l, i)] = self.sigma * eii * ui / self.radius;
            }
            Self::complex_embed(&re, &im)
        }
    }

    fn decompose(&self, w: &Mat) -> (Vect, Mat) {
        if !self.complex {
            let n = self.nbar;
            let x = w.view((0, 0), (n, n)).into_owned();
            let u = Vect::from_fn(n, |i, _| w[(i, n)] * self.radius);
            (u, x)
        } else {
            let l = self.nbar / 2;
            let mp = l + 1;
            // central vertical part: s = Im(A_pos,pos)
            let s = w[(mp + l, l)];
            let mut u = Vect::zeros(2 * l);
            for i in 0..l {
                u[i] = w[(i, l)] * self.radius;
                u[l + i] = w[(mp + i, l)] * self.radius;
            }
            let mut x = Mat::zeros(2 * l, 2 * l);
            let re = w.view((0, 0), (l, l)).into_owned();
            let im = w.view((mp, 0), (l, l)).into_owned() - Mat::identity(l, l) * s;
            x.view_mut((0, 0), (l, l)).copy_from(&re);
            x.view_mut((l, l), (l, l)).copy_from(&re);
            x.view_mut((l, 0), (l, l)).copy_from(&im);
            x.view_mut((0, l), (l, l)).copy_from(&(-&im));
            (u, x)
        }
    }

    /// Model-frame columns of the state (tangent vectors), and the position.
    fn frame_cols(&self) -> Vec<usize> {
        if !self.complex {
            (0..self.nbar).collect()
        } else {
            let l = self.nbar / 2;
            let mp = l + 1;
            (0..l).chain(mp..mp + l).collect()
        }
    }

    fn pos_col(&self) -> usize {
        if !self.complex {
            self.nbar
        } else {
            self.nbar / 2
        }
    }
}

impl Realization for QuadricGroup {
    fn nbar(&self) -> usize {
        self.nbar
    }
    fn state_len(&self) -> usize {
        self.ndim * self.ndim
    }
    fn point_dim(&self) -> usize {
        self.ndim
    }
    fn identity_state(&self) -> Vect {
        state_of(&Mat::identity(self.ndim, self.ndim))
    }
    fn state_derivative(&self, state: &Vect, u: &Vect, omega: &Mat) -> Result<Vect> {
        let f = mat_of(state, self.ndim);
        Ok(state_of(&(f * self.zeta(u, omega))))
    }
    fn reproject(&self, state: &Vect) -> Vect {
        let mut f = mat_of(state, self.ndim);
        if self.complex {
            let j = standard_complex_structure(self.ndim);
            f = (&f - &j * &f * &j) * 0.5;
        }
        state_of(&eta_polar(&f, &self.eta_amb))
    }
    fn structural_residual(&self, state: &Vect) -> f64 {
        let f = mat_of(state, self.ndim);
        let mut r = (f.transpose() * &self.eta_amb * &f - &self.eta_amb).norm();
        if self.complex {
            let j = standard_complex_structure(self.ndim);
            r += (&f * &j - &j * &f).norm();
        }
        r
    }
    fn point(&self, state: &Vect) -> Vect {
        let f = mat_of(state, self.ndim);
        f.column(self.pos_col()).into_owned() * self.radius
    }
    fn frame_tangent(&self, state: &Vect) -> Mat {
        let f = mat_of(state, self.ndim);
        let mut out = Mat::zeros(self.ndim, self.nbar);
        for (k, c) in self.frame_cols().into_iter().enumerate() {
            out.set_column(k, &f.column(c));
        }
        out
    }
    fn ambient_metric(&self, _point: &Vect) -> Mat {
        self.eta_amb.clone()
    }
    fn covariant_deriv(&self, point: &Vect, _vel: &Vect, _w: &Vect, dw: &Vect) -> Vect {
        // tangential projection of the flat ambient derivative
        let pp = self.sigma * self.radius * self.radius;
        let inner = (point.transpose() * &self.eta_amb * dw)[(0, 0)];
        let mut out = dw - point * (inner / pp);
        if self.complex {
            let j = standard_complex_structure(self.ndim);
            let jp = &j * point;
            let inner_j = (jp.transpose() * &self.eta_amb * &out)[(0, 0)];
            out -= jp * (inner_j / pp);
        }
        out
    }
    fn distance(&self, a: &Vect, b: &Vect) -> f64 {
        let (fa, fb) = (mat_of(a, self.ndim), mat_of(b, self.ndim));
        match fa.try_inverse() {
            Some(fi) => (fi * fb - Mat::identity(self.ndim, self.ndim)).norm(),
            None => f64::INFINITY,
        }
    }
    fn compose(&self, g: &Vect, state: &Vect) -> Option<Vect> {
        Some(state_of(&(mat_of(g, self.ndim) * mat_of(state, self.ndim))))
    }
    fn exp_lambda(&self, u: &Vect, omega: &Mat, t: f64) -> Option<Vect> {
        Some(state_of(&(self.zeta(u, omega) * t).exp()))
    }
    fn curvature_check(&self, model: &ModelSpace, rng: &mut ChaCha8Rng, samples: usize) -> Result<f64> {
        let embed = |u: &Vect, x: &Mat| self.zeta(u, x);
        let decompose = move |w: &Mat| self.decompose(w);
        commutator_fidelity(model, &embed, &decompose, rng, samples)
    }
    fn describe(&self) -> String {
        if self.complex {
            format!(
                "unitary isometry group of the ambient complex quadric (radius {:.4}, sigma {:+})",
                self.radius, self.sigma
            )
        } else {
            format!(
                "isometry group of the ambient quadric (radius {:.4}, sigma {:+})",
                self.radius, self.sigma
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Lie-group targets in exponential coordinates of the second kind
// ---------------------------------------------------------------------------

pub struct Exp2Group {
    algebra: LieAlgebra,
    inner: Bilinear,
    gammas: Vec<Mat>,
}

impl Exp2Group {
    pub fn new(model: &ModelSpace) -> Result<Self> {
        let ModelSpace::LieGroupLeftInvariant { algebra, inner, .. } = model else {
            return Err(Error::UnsupportedModel("exp-2 realization needs a Lie-group model".into()));
        };
        if algebra.dim() > 10 {
            return Err(Error::UnsupportedModel(format!(
                "no realization for Lie algebras of dimension {} > 10",
                algebra.dim()
            )));
        }
        Ok(Self { algebra: algebra.clone(), inner: inner.clone(), gammas: model.lie_gamma()? })
    }

    /// Differential of the product-of-exponentials chart: the matrix M(x)
    /// with f^{-1} f' = M(x) xdot, built from adjoint exponentials.
    fn chart_mat(&self, x: &Vect) -> Mat {
        let n = self.algebra.dim();
        let mut m = Mat::zeros(n, n);
        let mut acc = Mat::identity(n, n);
        for j in (0..n).rev() {
            if j < n - 1 {
                acc = &acc * (&self.algebra.ad[j + 1] * (-x[j + 1])).exp();
            }
            let col = &acc * Vect::from_fn(n, |r, _| if r == j { 1.0 } else { 0.0 });
            m.set_column(j, &col);
        }
        m
    }
}

impl Realization for Exp2Group {
    fn nbar(&self) -> usize {
        self.algebra.dim()
    }
    fn state_len(&self) -> usize {
        self.algebra.dim()
    }
    fn point_dim(&self) -> usize {
        self.algebra.dim()
    }
    fn identity_state(&self) -> Vect {
        Vect::zeros(self.algebra.dim())
    }
    fn state_derivative(&self, state: &Vect, u: &Vect, _omega: &Mat) -> Result<Vect> {
        let m = self.chart_mat(state);
        checked_inverse(&m).map(|mi| mi * u).map_err(|_| {
            Error::IntegrationDiverged("exponential-coordinate chart became singular".into())
        })
    }
    fn reproject(&self, state: &Vect) -> Vect {
        state.clone()
    }
    fn structural_residual(&self, _state: &Vect) -> f64 {
        0.0
    }
    fn point(&self, state: &Vect) -> Vect {
        state.clone()
    }
    fn frame_tangent(&self, state: &Vect) -> Mat {
        let m = self.chart_mat(state);
        checked_inverse(&m).unwrap_or_else(|_| Mat::from_element(self.nbar(), self.nbar(), f64::NAN))
    }
    fn ambient_metric(&self, point: &Vect) -> Mat {
        let m = self.chart_mat(point);
        m.transpose() * self.inner.gram() * m
    }
    fn covariant_deriv(&self, point: &Vect, vel: &Vect, w: &Vect, dw: &Vect) -> Vect {
        // transport through the left trivialization: what = M w obeys
        // nabla what = d what + Gamma(M vel) what
        let n = self.nbar();
        let m = self.chart_mat(point);
        let dm: Vec<Mat> = (0..n)
            .map(|i| {
                let f = |y: &Vect| self.chart_mat(y);
                crate::fd::partial(&f, point, i, 1e-5, FdOrder::Two)
            })
            .collect();
        let what = &m * w;
        let mut dwhat = &m * dw;
        for i in 0..n {
            dwhat += &dm[i] * w * vel[i];
        }
        let mvel = &m * vel;
        let mut gam = Mat::zeros(n, n);
        for i in 0..n {
            gam += &self.gammas[i] * mvel[i];
        }
        match checked_inverse(&m) {
            Ok(mi) => mi * (dwhat + gam * what),
            Err(_) => Vect::from_element(n, f64::NAN),
        }
    }
    fn distance(&self, a: &Vect, b: &Vect) -> f64 {
        (a - b).norm()
    }
    fn compose(&self, _g: &Vect, _state: &Vect) -> Option<Vect> {
        None
    }
    fn exp_lambda(&self, _u: &Vect, _omega: &Mat, _t: f64) -> Option<Vect> {
        None
    }
    fn curvature_check(&self, model: &ModelSpace, rng: &mut ChaCha8Rng, samples: usize) -> Result<f64> {
        // curvature of the pulled-back coordinate metric by nested finite
        // differences against the Koszul curvature transported by the chart
        let n = self.nbar();
        let metric = MetricField::new(
            {
                let me = Exp2Group { algebra: self.algebra.clone(), inner: self.inner.clone(), gammas: self.gammas.clone() };
                FieldSource::closed(move |x: &Vect| me.ambient_metric(x))
            },
            self.inner.index(),
        );
        let grid = ChartGrid::new(
            Vect::from_element(n, -0.6),
            Vect::from_element(n, 0.6),
            vec![5; n],
        )?;
        let mut points = Vec::new();
        for _ in 0..samples.min(6) {
            points.push(randv(rng, n) * 0.3);
        }
        let me = Exp2Group { algebra: self.algebra.clone(), inner: self.inner.clone(), gammas: self.gammas.clone() };
        let frame_at = move |x: &Vect| me.frame_tangent(x);
        metric_fd_fidelity(model, &metric, &grid, &frame_at, &points, rng)
    }
    fn describe(&self) -> String {
        format!(
            "Lie group in exponential coordinates of the second kind (dim {})",
            self.algebra.dim()
        )
    }
}

// ---------------------------------------------------------------------------
// E(kappa, tau) in fibration-chart coordinates with a pinned frame
// ---------------------------------------------------------------------------

pub struct EkChart {
    kappa: f64,
    tau: f64,
}

impl EkChart {
    pub fn new(kappa: f64, tau: f64) -> Self {
        Self { kappa, tau }
    }

    fn lambda(&self, p: &Vect) -> f64 {
        1.0 / (1.0 + self.kappa * (p[0] * p[0] + p[1] * p[1]) / 4.0)
    }

    /// Coordinate matrix of the frame (xi, E1, E2).
    fn frame_coords(&self, p: &Vect) -> Mat {
        let li = 1.0 / self.lambda(p); // lambda^{-1}
        Mat::from_column_slice(
            3,
            3,
            &[
                0.0, 0.0, 1.0, // xi = d/dz
                li, 0.0, -self.tau * p[1], // E1
                0.0, li, self.tau * p[0], // E2
            ],
        )
    }

    /// Frame-connection matrices Omega_i = nabla along frame vector i,
    /// in the (xi, E1, E2) ordering; a = kappa x / 2, b = kappa y / 2.
    fn omegas(&self, p: &Vect) -> [Mat; 3] {
        let a = self.kappa * p[0] / 2.0;
        let b = self.kappa * p[1] / 2.0;
        let t = self.tau;
        let o1 = Mat::from_column_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -t, 0.0, t, 0.0]);
        let o2 = Mat::from_column_slice(3, 3, &[0.0, 0.0, -t, 0.0, 0.0, b, t, -b, 0.0]);
        let o3 = Mat::from_column_slice(3, 3, &[0.0, t, 0.0, -t, 0.0, -a, 0.0, a, 0.0]);
        [o1, o2, o3]
    }

    fn split(state: &Vect) -> (Vect, Mat) {
        let y = Vect::from_fn(3, |i, _| state[i]);
        let q = Mat::from_column_slice(3, 3, &state.as_slice()[3..12]);
        (y, q)
    }

    fn join(y: &Vect, q: &Mat) -> Vect {
        let mut out = Vect::zeros(12);
        for i in 0..3 {
            out[i] = y[i];
        }
        for (k, v) in q.as_slice().iter().enumerate() {
            out[3 + k] = *v;
        }
        out
    }

    /// Coordinate metric of the fibration chart.
    pub fn metric_at(&self, p: &Vect) -> Mat {
        let l = self.lambda(p);
        let eta = Vect::from_vec(vec![self.tau * l * p[1], -self.tau * l * p[0], 1.0]);
        let mut g = Mat::zeros(3, 3);
        g[(0, 0)] = l * l;
        g[(1, 1)] = l * l;
        g += &eta * eta.transpose();
        g
    }

    /// Chart domain bound: for kappa > 0 the chart covers r^2 < 4/kappa.
    pub fn domain_radius(&self) -> f64 {
        if self.kappa > 0.0 {
            (4.0 / self.kappa).sqrt()
        } else {
            f64::INFINITY
        }
    }
}

impl Realization for EkChart {
    fn nbar(&self) -> usize {
        3
    }
    fn state_len(&self) -> usize {
        12
    }
    fn point_dim(&self) -> usize {
        3
    }
    fn identity_state(&self) -> Vect {
        Self::join(&Vect::zeros(3), &Mat::identity(3, 3))
    }
    fn state_derivative(&self, state: &Vect, u: &Vect, omega: &Mat) -> Result<Vect> {
        let (y, q) = Self::split(state);
        let w = &q * u;
        let om = self.omegas(&y);
        let mut ow = Mat::zeros(3, 3);
        for i in 0..3 {
            ow += &om[i] * w[i];
        }
        let ydot = self.frame_coords(&y) * &w;
        let qdot = &q * omega - ow * &q;
        Ok(Self::join(&ydot, &qdot))
    }
    fn reproject(&self, state: &Vect) -> Vect {
        let (y, q) = Self::split(state);
        // pin the first column to the vertical, Gram-Schmidt the second,
        // complete with the cross product (frame components are Euclidean)
        let e1 = Vect::from_vec(vec![1.0, 0.0, 0.0]);
        let mut c2 = q.column(1).into_owned();
        c2 -= &e1 * e1.dot(&c2);
        let c2 = &c2 / c2.norm();
        let c3 = Vect::from_vec(vec![
            e1[1] * c2[2] - e1[2] * c2[1],
            e1[2] * c2[0] - e1[0] * c2[2],
            e1[0] * c2[1] - e1[1] * c2[0],
        ]);
        let mut qn = Mat::zeros(3, 3);
        qn.set_column(0, &e1);
        qn.set_column(1, &c2);
        qn.set_column(2, &c3);
        Self::join(&y, &qn)
    }
    fn structural_residual(&self, state: &Vect) -> f64 {
        let (_, q) = Self::split(state);
        let pin = (q.column(0).into_owned() - Vect::from_vec(vec![1.0, 0.0, 0.0])).norm();
        let ortho = (q.transpose() * &q - Mat::identity(3, 3)).norm();
        let orient = if q.determinant() > 0.0 { 0.0 } else { 1.0 };
        pin + ortho + orient
    }
    fn point(&self, state: &Vect) -> Vect {
        Self::split(state).0
    }
    fn frame_tangent(&self, state: &Vect) -> Mat {
        let (y, q) = Self::split(state);
        self.frame_coords(&y) * q
    }
    fn ambient_metric(&self, point: &Vect) -> Mat {
        self.metric_at(point)
    }
    fn covariant_deriv(&self, point: &Vect, vel: &Vect, w: &Vect, dw: &Vect) -> Vect {
        // coordinate Christoffels by finite differences of the chart metric
        let me = EkChart::new(self.kappa, self.tau);
        let metric = MetricField::new(FieldSource::closed(move |x: &Vect| me.metric_at(x)), 0);
        let r = self.domain_radius();
        let half = (0.45 * r).min(8.0);
        let grid = ChartGrid::new(Vect::from_element(3, -half), Vect::from_element(3, half), vec![5; 3])
            .expect("chart grid");
        let dp = DiffParams { step: 1e-4, order: FdOrder::Four };
        match levi_civita_at(&metric, &grid, point, dp) {
            Ok(gs) => {
                let mut gv = Mat::zeros(3, 3);
                for i in 0..3 {
                    gv += &gs[i] * vel[i];
                }
                dw + gv * w
            }
            Err(_) => Vect::from_element(3, f64::NAN),
        }
    }
    fn distance(&self, a: &Vect, b: &Vect) -> f64 {
        (a - b).norm()
    }
    fn compose(&self, _g: &Vect, _state: &Vect) -> Option<Vect> {
        None
    }
    fn exp_lambda(&self, _u: &Vect, _omega: &Mat, _t: f64) -> Option<Vect> {
        None
    }
    fn curvature_check(&self, model: &ModelSpace, rng: &mut ChaCha8Rng, samples: usize) -> Result<f64> {
        let me = EkChart::new(self.kappa, self.tau);
        let metric = MetricField::new(FieldSource::closed(move |x: &Vect| me.metric_at(x)), 0);
        let r = self.domain_radius();
        let half = (0.35 * r).min(1.0);
        let grid = ChartGrid::new(Vect::from_element(3, -2.0 * half), Vect::from_element(3, 2.0 * half), vec![5; 3])?;
        let mut points = Vec::new();
        for _ in 0..samples.min(8) {
            points.push(randv(rng, 3) * half * 0.8);
        }
        let me2 = EkChart::new(self.kappa, self.tau);
        let frame_at = move |x: &Vect| {
            // any structural frame transports the tensors; use the pinned one
            me2.frame_coords(x)
                * Mat::from_column_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
        };
        metric_fd_fidelity(model, &metric, &grid, &frame_at, &points, rng)
    }
    fn describe(&self) -> String {
        format!(
            "fibration chart of E(kappa={}, tau={}) with the pinned orthonormal frame",
            self.kappa, self.tau
        )
    }
}

// ---------------------------------------------------------------------------
// Products
// ---------------------------------------------------------------------------

pub struct ProductRealization {
    factors: Vec<Box<dyn Realization>>,
    dims: Vec<usize>,
}

impl ProductRealization {
    fn state_offsets(&self) -> Vec<usize> {
        let mut out = vec![0];
        for f in &self.factors {
            out.push(out.last().unwrap() + f.state_len());
        }
        out
    }

    fn point_offsets(&self) -> Vec<usize> {
        let mut out = vec![0];
        for f in &self.factors {
            out.push(out.last().unwrap() + f.point_dim());
        }
        out
    }

    fn dim_offsets(&self) -> Vec<usize> {
        let mut out = vec![0];
        for d in &self.dims {
            out.push(out.last().unwrap() + d);
        }
        out
    }

    fn slice(v: &Vect, from: usize, len: usize) -> Vect {
        Vect::from_fn(len, |i, _| v[from + i])
    }
}

impl Realization for ProductRealization {
    fn nbar(&self) -> usize {
        self.dims.iter().sum()
    }
    fn state_len(&self) -> usize {
        self.factors.iter().map(|f| f.state_len()).sum()
    }
    fn point_dim(&self) -> usize {
        self.factors.iter().map(|f| f.point_dim()).sum()
    }
    fn identity_state(&self) -> Vect {
        let mut out = Vect::zeros(self.state_len());
        let so = self.state_offsets();
        for (i, f) in self.factors.iter().enumerate() {
            out.rows_mut(so[i], f.state_len()).copy_from(&f.identity_state());
        }
        out
    }
    fn state_derivative(&self, state: &Vect, u: &Vect, omega: &Mat) -> Result<Vect> {
        let so = self.state_offsets();
        let dof = self.dim_offsets();
        let mut out = Vect::zeros(self.state_len());
        for (i, f) in self.factors.iter().enumerate() {
            let s = Self::slice(state, so[i], f.state_len());
            let ui = Self::slice(u, dof[i], self.dims[i]);
            let xi = omega.view((dof[i], dof[i]), (self.dims[i], self.dims[i])).into_owned();
            out.rows_mut(so[i], f.state_len()).copy_from(&f.state_derivative(&s, &ui, &xi)?);
        }
        Ok(out)
    }
    fn reproject(&self, state: &Vect) -> Vect {
        let so = self.state_offsets();
        let mut out = state.clone();
        for (i, f) in self.factors.iter().enumerate() {
            let s = Self::slice(state, so[i], f.state_len());
            out.rows_mut(so[i], f.state_len()).copy_from(&f.reproject(&s));
        }
        out
    }
    fn structural_residual(&self, state: &Vect) -> f64 {
        let so = self.state_offsets();
        self.factors
            .iter()
            .enumerate()
            .map(|(i, f)| f.structural_residual(&Self::slice(state, so[i], f.state_len())))
            .sum()
    }
    fn point(&self, state: &Vect) -> Vect {
        let so = self.state_offsets();
        let po = self.point_offsets();
        let mut out = Vect::zeros(self.point_dim());
        for (i, f) in self.factors.iter().enumerate() {
            let s = Self::slice(state, so[i], f.state_len());
            out.rows_mut(po[i], f.point_dim()).copy_from(&f.point(&s));
        }
        out
    }
    fn frame_tangent(&self, state: &Vect) -> Mat {
        let so = self.state_offsets();
        let po = self.point_offsets();
        let dof = self.dim_offsets();
        let mut out = Mat::zeros(self.point_dim(), self.nbar());
        for (i, f) in self.factors.iter().enumerate() {
            let s = Self::slice(state, so[i], f.state_len());
            out.view_mut((po[i], dof[i]), (f.point_dim(), self.dims[i]))
                .copy_from(&f.frame_tangent(&s));
        }
        out
    }
    fn ambient_metric(&self, point: &Vect) -> Mat {
        let po = self.point_offsets();
        let mut out = Mat::zeros(self.point_dim(), self.point_dim());
        for (i, f) in self.factors.iter().enumerate() {
            let p = Self::slice(point, po[i], f.point_dim());
            out.view_mut((po[i], po[i]), (f.point_dim(), f.point_dim()))
                .copy_from(&f.ambient_metric(&p));
        }
        out
    }
    fn covariant_deriv(&self, point: &Vect, vel: &Vect, w: &Vect, dw: &Vect) -> Vect {
        let po = self.point_offsets();
        let mut out = Vect::zeros(self.point_dim());
        for (i, f) in self.factors.iter().enumerate() {
            let p = Self::slice(point, po[i], f.point_dim());
            let v = Self::slice(vel, po[i], f.point_dim());
            let wi = Self::slice(w, po[i], f.point_dim());
            let dwi = Self::slice(dw, po[i], f.point_dim());
            out.rows_mut(po[i], f.point_dim()).copy_from(&f.covariant_deriv(&p, &v, &wi, &dwi));
        }
        out
    }
    fn distance(&self, a: &Vect, b: &Vect) -> f64 {
        let so = self.state_offsets();
        self.factors
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.distance(
                    &Self::slice(a, so[i], f.state_len()),
                    &Self::slice(b, so[i], f.state_len()),
                )
            })
            .sum()
    }
    fn compose(&self, g: &Vect, state: &Vect) -> Option<Vect> {
        let so = self.state_offsets();
        let mut out = Vect::zeros(self.state_len());
        for (i, f) in self.factors.iter().enumerate() {
            let gi = Self::slice(g, so[i], f.state_len());
            let si = Self::slice(state, so[i], f.state_len());
            out.rows_mut(so[i], f.state_len()).copy_from(&f.compose(&gi, &si)?);
        }
        Some(out)
    }
    fn exp_lambda(&self, u: &Vect, omega: &Mat, t: f64) -> Option<Vect> {
        let so = self.state_offsets();
        let dof = self.dim_offsets();
        let mut out = Vect::zeros(self.state_len());
        for (i, f) in self.factors.iter().enumerate() {
            let ui = Self::slice(u, dof[i], self.dims[i]);
            let xi = omega.view((dof[i], dof[i]), (self.dims[i], self.dims[i])).into_owned();
            out.rows_mut(so[i], f.state_len()).copy_from(&f.exp_lambda(&ui, &xi, t)?);
        }
        Some(out)
    }
    fn curvature_check(&self, model: &ModelSpace, rng: &mut ChaCha8Rng, samples: usize) -> Result<f64> {
        let ModelSpace::Product(list) = model else {
            return Err(Error::UnsupportedModel("product realization vs non-product model".into()));
        };
        let mut worst = 0.0f64;
        for (f, m) in self.factors.iter().zip(list.iter()) {
            worst = worst.max(f.curvature_check(m, rng, samples)?);
        }
        Ok(worst)
    }
    fn describe(&self) -> String {
        let parts: Vec<String> = self.factors.iter().map(|f| f.describe()).collect();
        format!("product [{}]", parts.join("; "))
    }
}

/// Build the realization of a catalog model.
pub fn realize_target(model: &ModelSpace) -> Result<Box<dyn Realization>> {
    model.validate()?;
    Ok(match model {
        ModelSpace::SpaceForm { curvature, dim, index } => {
            if *curvature == 0.0 {
                Box::new(AffineGroup::new(*dim, *index, false))
            } else {
                Box::new(QuadricGroup::space_form(*dim, *index, *curvature))
            }
        }
        ModelSpace::ComplexSpaceForm { curvature, dim, index } => {
            if *curvature == 0.0 {
                Box::new(AffineGroup::new(*dim, *index, true))
            } else {
                Box::new(QuadricGroup::complex_space_form(*dim, *index, *curvature))
            }
        }
        ModelSpace::LieGroupLeftInvariant { .. } => Box::new(Exp2Group::new(model)?),
        ModelSpace::EKappaTau { kappa, tau } => Box::new(EkChart::new(*kappa, *tau)),
        ModelSpace::Product(list) => {
            let mut factors = Vec::new();
            let mut dims = Vec::new();
            for m in list.iter() {
                factors.push(realize_target(m)?);
                dims.push(m.dim());
            }
            Box::new(ProductRealization { factors, dims })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(2024)
    }

    #[test]
    fn flat_realization_matches_tensors() {
        let model = ModelSpace::SpaceForm { curvature: 0.0, dim: 3, index: 0 };
        let r = realize_target(&model).unwrap();
        let d = r.curvature_check(&model, &mut rng(), 20).unwrap();
        assert!(d < 1e-12, "flat fidelity {d:.3e}");
    }

    #[test]
    fn sphere_realization_matches_tensors() {
        for c in [1.0, 2.5] {
            let model = ModelSpace::SpaceForm { curvature: c, dim: 2, index: 0 };
            let r = realize_target(&model).unwrap();
            let d = r.curvature_check(&model, &mut rng(), 20).unwrap();
            assert!(d < 1e-12, "sphere fidelity {d:.3e}");
        }
    }

    #[test]
    fn hyperbolic_realization_matches_tensors() {
        for (dim, index, c) in [(2usize, 0usize, -1.0), (3, 0, -0.7), (3, 1, -1.3)] {
            let model = ModelSpace::SpaceForm { curvature: c, dim, index };
            let r = realize_target(&model).unwrap();
            let d = r.curvature_check(&model, &mut rng(), 20).unwrap();
            assert!(d < 1e-12, "hyperboloid fidelity {d:.3e}");
        }
    }

    #[test]
    fn complex_space_form_realization_matches_tensors() {
        for (dim, c) in [(2usize, 1.0), (4, 0.8), (4, -1.1)] {
            let model = ModelSpace::ComplexSpaceForm { curvature: c, dim, index: 0 };
            let r = realize_target(&model).unwrap();
            let d = r.curvature_check(&model, &mut rng(), 20).unwrap();
            assert!(d < 1e-11, "complex space form fidelity {d:.3e} (dim {dim}, c {c})");
        }
    }

    #[test]
    fn sphere_frame_columns_are_tangent_unit() {
        let model = ModelSpace::SpaceForm { curvature: 1.0, dim: 2, index: 0 };
        let r = realize_target(&model).unwrap();
        // move the identity around a little, then inspect
        let mut state = r.identity_state();
        let u = Vect::from_vec(vec![0.3, -0.2]);
        let om = Mat::zeros(2, 2);
        for _ in 0..5 {
            let d = r.state_derivative(&state, &u, &om).unwrap();
            state += d * 0.1;
            state = r.reproject(&state);
        }
        let p = r.point(&state);
        assert!((p.norm() - 1.0).abs() < 1e-9, "|point| = {}", p.norm());
        let fr = r.frame_tangent(&state);
        for c in 0..2 {
            let col = fr.column(c).into_owned();
            assert!(col.dot(&p).abs() < 1e-9, "frame not tangent");
            assert!((col.norm() - 1.0).abs() < 1e-9, "frame not unit");
        }
    }

    #[test]
    fn ek_chart_vertical_field_derivative() {
        // nabla_v xi = tau v x xi against finite differences of the chart data
        let tau = 0.5;
        for kappa in [0.0, 1.0, -1.0] {
            let me = EkChart::new(kappa, tau);
            let metric = MetricField::new(FieldSource::closed(move |x: &Vect| me.metric_at(x)), 0);
            let grid = ChartGrid::new(
                Vect::from_element(3, -0.8),
                Vect::from_element(3, 0.8),
                vec![5; 3],
            )
            .unwrap();
            let dp = DiffParams { step: 1e-4, order: FdOrder::Four };
            let xi = crate::chart::SectionField {
                source: FieldSource::constant(Vect::from_vec(vec![0.0, 0.0, 1.0])),
            };
            let p = Vect::from_vec(vec![0.21, -0.13, 0.4]);
            let gs = levi_civita_at(&metric, &grid, &p, dp).unwrap();
            let conn = ConnectionField::new(3, FieldSource::constant(gs));
            let nxi = crate::chart::covariant_section_derivative(&conn, &xi, &grid, &p, dp);
            let g = metric.at(&p).unwrap();
            // coordinate orientation is positive for the (xi, E1, E2) frame
            for i in 0..3 {
                let v = Vect::from_fn(3, |r, _| if r == i { 1.0 } else { 0.0 });
                let expect = g.cross(&v, &Vect::from_vec(vec![0.0, 0.0, 1.0]), 1.0).unwrap() * tau;
                let d = (&nxi[i] - expect).norm();
                assert!(d < 1e-8, "kappa {kappa}: axis {i} defect {d:.3e}");
            }
        }
    }

    #[test]
    fn ek_chart_curvature_matches_characteristic_tensors() {
        for (kappa, tau) in [(0.0, 0.5), (1.0, 0.3), (-1.0, 0.4), (0.7, 0.0)] {
            let model = ModelSpace::EKappaTau { kappa, tau };
            let r = realize_target(&model).unwrap();
            let d = r.curvature_check(&model, &mut rng(), 8).unwrap();
            assert!(d < 1e-8, "E({kappa},{tau}) chart fidelity {d:.3e}");
        }
    }

    #[test]
    fn heisenberg_exp2_curvature_matches() {
        let model = ModelSpace::LieGroupLeftInvariant {
            algebra: LieAlgebra::heisenberg(),
            inner: Bilinear::euclidean(3),
            connection: crate::models::LieConnection::LeviCivita,
        };
        let r = realize_target(&model).unwrap();
        let d = r.curvature_check(&model, &mut rng(), 6).unwrap();
        assert!(d < 1e-8, "heisenberg exp2 fidelity {d:.3e}");
    }

    #[test]
    fn product_realization_blocks() {
        let model = ModelSpace::Product(vec![
            ModelSpace::SpaceForm { curvature: -1.0, dim: 2, index: 0 },
            ModelSpace::SpaceForm { curvature: 0.0, dim: 1, index: 0 },
        ]);
        let r = realize_target(&model).unwrap();
        assert_eq!(r.nbar(), 3);
        let d = r.curvature_check(&model, &mut rng(), 15).unwrap();
        assert!(d < 1e-12, "product fidelity {d:.3e}");
        // the flat factor's point moves linearly under a pure second-factor u
        let mut state = r.identity_state();
        let u = Vect::from_vec(vec![0.0, 0.0, 0.25]);
        let om = Mat::zeros(3, 3);
        for _ in 0..4 {
            let d = r.state_derivative(&state, &u, &om).unwrap();
            state += d;
            state = r.reproject(&state);
        }
        let p = r.point(&state);
        // hyperboloid factor stays at its origin
        assert!((p[0]).abs() < 1e-12 && (p[1]).abs() < 1e-12);
        assert!((p[3] - 1.0).abs() < 1e-12, "flat coordinate moved by {}", p[3]);
    }

    #[test]
    fn unsupported_large_algebra() {
        let model = ModelSpace::LieGroupLeftInvariant {
            algebra: LieAlgebra::abelian(11),
            inner: Bilinear::euclidean(11),
            connection: crate::models::LieConnection::LeviCivita,
        };
        assert!(matches!(realize_target(&model), Err(Error::UnsupportedModel(_))));
    }
}
