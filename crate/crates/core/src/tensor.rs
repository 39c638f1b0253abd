//! Small dense linear algebra shared by every other module.
//!
//! All fiberwise objects (frames, curvature values, bilinear forms) are
//! dynamically sized but tiny (dimension <= 16), stored column-major in
//! [`nalgebra`] types. Everything here is an immutable value; all functions
//! are pure.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Column vector in a fiber or tangent space.
pub type Vect = DVector<f64>;
/// Dense matrix; rows index the codomain, columns the domain.
pub type Mat = DMatrix<f64>;

/// Default tolerances. Entry points that take a [`crate::config::Tolerances`]
/// let callers override the ones that matter for a run.
pub mod tol {
    /// Reciprocal condition estimate below which a frame counts as singular.
    pub const RCOND_SINGULAR: f64 = 1e-12;
    /// |det g| below which a metric counts as degenerate.
    pub const DEGENERATE_DET: f64 = 1e-12;
    /// Eigenvalues closer to zero than this do not count toward a signature.
    pub const SIGNATURE: f64 = 1e-9;
    /// Residual allowed on G-structure auxiliary-data constraints.
    pub const CONSTRAINT: f64 = 1e-10;
    /// Admissibility residual allowed on pulled-back form values.
    pub const ADMISSIBLE: f64 = 1e-8;
    /// Compatibility-residual gate for the solver.
    pub const SOLVER_GATE: f64 = 1e-6;
    /// Frame drift allowed per integration step before re-projection.
    pub const FRAME_DRIFT: f64 = 1e-6;
}

pub fn check_finite_vec(v: &Vect, what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::ShapeError(format!("{what}: non-finite entry")));
    }
    Ok(())
}

pub fn check_finite_mat(m: &Mat, what: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::ShapeError(format!("{what}: non-finite entry")));
    }
    Ok(())
}

/// Reciprocal condition estimate sigma_min / sigma_max.
pub fn rcond(m: &Mat) -> f64 {
    let sv = m.clone().singular_values();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for s in sv.iter() {
        lo = lo.min(*s);
        hi = hi.max(*s);
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Inverse with a singularity gate on the reciprocal condition number.
pub fn checked_inverse(m: &Mat) -> Result<Mat> {
    let rc = rcond(m);
    if rc < tol::RCOND_SINGULAR {
        return Err(Error::SingularFrame {
            rcond: rc,
            threshold: tol::RCOND_SINGULAR,
        });
    }
    m.clone()
        .try_inverse()
        .ok_or(Error::SingularFrame { rcond: rc, threshold: tol::RCOND_SINGULAR })
}

/// Conjugation X -> p X p^{-1}, the Lie algebra isomorphism induced by an
/// invertible map p.
pub fn ad_conjugate(p: &Mat, x: &Mat) -> Result<Mat> {
    if !p.is_square() || !x.is_square() || p.nrows() != x.nrows() {
        return Err(Error::ShapeError(format!(
            "ad_conjugate: p is {}x{}, x is {}x{}",
            p.nrows(),
            p.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    let p_inv = checked_inverse(p)?;
    Ok(p * x * p_inv)
}

/// Matrix commutator [a, b] = ab - ba.
pub fn comm(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

/// Nondegenerate symmetric bilinear form with a declared signature.
///
/// Symmetry is required exactly on construction; the declared index (number
/// of negative directions) is checked against the eigenvalue sign counts.
#[derive(Debug, Clone)]
pub struct Bilinear {
    gram: Mat,
    inv: Mat,
    index: usize,
}

impl Bilinear {
    pub fn new(gram: Mat, index: usize) -> Result<Self> {
        if !gram.is_square() {
            return Err(Error::ShapeError("bilinear form must be square".into()));
        }
        check_finite_mat(&gram, "bilinear form")?;
        if gram != gram.transpose() {
            return Err(Error::SpecViolation("bilinear form is not exactly symmetric".into()));
        }
        let n = gram.nrows();
        let eig = gram.clone().symmetric_eigen();
        let mut neg = 0usize;
        let mut pos = 0usize;
        for ev in eig.eigenvalues.iter() {
            if *ev > tol::SIGNATURE {
                pos += 1;
            } else if *ev < -tol::SIGNATURE {
                neg += 1;
            }
        }
        if pos + neg < n {
            return Err(Error::DegenerateForm(format!(
                "eigenvalue within {:.1e} of zero",
                tol::SIGNATURE
            )));
        }
        if neg != index {
            return Err(Error::SpecViolation(format!(
                "declared index {index} but eigenvalue signs give ({pos}, {neg})"
            )));
        }
        let inv = gram
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateForm("gram matrix not invertible".into()))?;
        Ok(Self { gram, inv, index })
    }

    /// Euclidean form of the given dimension.
    pub fn euclidean(n: usize) -> Self {
        Self::new(Mat::identity(n, n), 0).expect("identity form is valid")
    }

    /// Standard form of index r: +1 on the first n-r axes, -1 on the last r.
    pub fn minkowski(n: usize, r: usize) -> Self {
        let mut g = Mat::identity(n, n);
        for i in (n - r)..n {
            g[(i, i)] = -1.0;
        }
        Self::new(g, r).expect("standard form is valid")
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    pub fn inv(&self) -> &Mat {
        &self.inv
    }

    pub fn apply(&self, v: &Vect, w: &Vect) -> f64 {
        (v.transpose() * &self.gram * w)[(0, 0)]
    }

    /// Transpose of T with respect to this form: the unique T* with
    /// B(Tv, w) = B(v, T*w) for all v, w.
    pub fn transpose_of(&self, t: &Mat) -> Result<Mat> {
        if t.nrows() != self.dim() || t.ncols() != self.dim() {
            return Err(Error::ShapeError(format!(
                "transpose_wrt: form dim {} vs map {}x{}",
                self.dim(),
                t.nrows(),
                t.ncols()
            )));
        }
        Ok(&self.inv * t.transpose() * &self.gram)
    }

    /// Symmetric part (T + T*)/2 with respect to this form.
    pub fn sym_part(&self, t: &Mat) -> Result<Mat> {
        Ok((t + self.transpose_of(t)?) * 0.5)
    }

    /// Antisymmetric part (T - T*)/2 with respect to this form.
    pub fn antisym_part(&self, t: &Mat) -> Result<Mat> {
        Ok((t - self.transpose_of(t)?) * 0.5)
    }

    /// Endomorphism S with B(S e, e') = C(e, e') for a bilinear value C.
    pub fn endo_from_form(&self, c: &Mat) -> Mat {
        &self.inv * c.transpose()
    }

    /// Gradient-style raise: vector u with B(u, .) = the covector row `a`.
    pub fn raise(&self, a: &Vect) -> Vect {
        &self.inv * a
    }

    /// Oriented cross product on a 3-dimensional space: the vector v x w with
    /// B(v x w, u) = orientation * sqrt|det B| * det[v w u] for all u.
    pub fn cross(&self, v: &Vect, w: &Vect, orientation: f64) -> Result<Vect> {
        if self.dim() != 3 {
            return Err(Error::ShapeError("cross product needs dimension 3".into()));
        }
        let scale = orientation * self.gram.determinant().abs().sqrt();
        let c = Vect::from_vec(vec![
            v[1] * w[2] - v[2] * w[1],
            v[2] * w[0] - v[0] * w[2],
            v[0] * w[1] - v[1] * w[0],
        ]);
        // det[v w u] = c . u, so the raised covector is B^{-1} c scaled.
        Ok(&self.inv * c * scale)
    }
}

/// Frobenius norm of a matrix.
pub fn fnorm(m: &Mat) -> f64 {
    m.norm()
}

/// Max-abs entry of a matrix.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain Gauss-Jordan inverse, independent of nalgebra's LU path.
    fn gauss_inverse(m: &Mat) -> Mat {
        let n = m.nrows();
        let mut a = m.clone();
        let mut inv = Mat::identity(n, n);
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a[(r, col)].abs() > a[(piv, col)].abs() {
                    piv = r;
                }
            }
            a.swap_rows(col, piv);
            inv.swap_rows(col, piv);
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= d;
                inv[(col, j)] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[(r, col)];
                    for j in 0..n {
                        a[(r, j)] -= f * a[(col, j)];
                        inv[(r, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
        inv
    }

    fn seeded_mat(n: usize, seed: u64) -> Mat {
        // xorshift so the expected values do not depend on rand's stream
        let mut s = seed.max(1);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        Mat::from_fn(n, n, |_, _| next())
    }

    #[test]
    fn ad_conjugate_identity_is_identity() {
        let x = seeded_mat(3, 7);
        let p = Mat::identity(3, 3);
        let y = ad_conjugate(&p, &x).unwrap();
        assert!(fnorm(&(y - x)) == 0.0);
    }

    #[test]
    fn ad_conjugate_scalar_commutes() {
        let x = seeded_mat(3, 11);
        let p = Mat::identity(3, 3) * 2.0;
        let y = ad_conjugate(&p, &x).unwrap();
        assert!(fnorm(&(y - x)) < 1e-14);
    }

    #[test]
    fn ad_conjugate_matches_gauss_elimination_oracle() {
        let p = seeded_mat(4, 23) + Mat::identity(4, 4) * 2.0;
        let x = seeded_mat(4, 29);
        let ours = ad_conjugate(&p, &x).unwrap();
        let oracle = &p * &x * gauss_inverse(&p);
        assert!(max_abs(&(ours - oracle)) < 1e-12);
    }

    #[test]
    fn ad_conjugate_singular_frame_rejected() {
        let mut p = Mat::identity(3, 3);
        p[(2, 2)] = 0.0;
        let x = seeded_mat(3, 3);
        assert!(matches!(ad_conjugate(&p, &x), Err(Error::SingularFrame { .. })));
    }

    #[test]
    fn ad_conjugate_is_bracket_homomorphism() {
        let p = seeded_mat(4, 41) + Mat::identity(4, 4) * 2.0;
        let x = seeded_mat(4, 43);
        let y = seeded_mat(4, 47);
        let lhs = ad_conjugate(&p, &comm(&x, &y)).unwrap();
        let rhs = comm(&ad_conjugate(&p, &x).unwrap(), &ad_conjugate(&p, &y).unwrap());
        assert!(max_abs(&(lhs - rhs)) < 1e-10);
    }

    #[test]
    fn transpose_wrt_euclidean_is_ordinary_transpose() {
        let b = Bilinear::euclidean(4);
        let t = seeded_mat(4, 53);
        let ts = b.transpose_of(&t).unwrap();
        assert!(max_abs(&(ts - t.transpose())) < 1e-14);
    }

    #[test]
    fn transpose_wrt_minkowski_elementary() {
        // B = diag(1,1,-1), T = E_13 maps e3 to e1; its B-transpose is -E_31.
        let b = Bilinear::minkowski(3, 1);
        let mut t = Mat::zeros(3, 3);
        t[(0, 2)] = 1.0;
        let ts = b.transpose_of(&t).unwrap();
        let mut expect = Mat::zeros(3, 3);
        expect[(2, 0)] = -1.0;
        assert!(max_abs(&(ts.clone() - expect)) < 1e-14);
        // defining identity on all basis pairs
        for i in 0..3 {
            for j in 0..3 {
                let ei = Vect::from_fn(3, |k, _| if k == i { 1.0 } else { 0.0 });
                let ej = Vect::from_fn(3, |k, _| if k == j { 1.0 } else { 0.0 });
                let lhs = b.apply(&(&t * &ei), &ej);
                let rhs = b.apply(&ei, &(&ts * &ej));
                assert!((lhs - rhs).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn transpose_wrt_is_involution_and_antihomomorphism() {
        let mut g = seeded_mat(4, 59);
        g = &g * g.transpose() + Mat::identity(4, 4) * 4.0;
        // force exact symmetry
        let g = (&g + g.transpose()) * 0.5;
        let g = (&g + g.transpose()) * 0.5;
        let b = Bilinear::new(g, 0).unwrap();
        let t = seeded_mat(4, 61);
        let s = seeded_mat(4, 67);
        let tt = b.transpose_of(&b.transpose_of(&t).unwrap()).unwrap();
        assert!(max_abs(&(tt - t.clone())) < 1e-12);
        let lhs = b.transpose_of(&(&t * &s)).unwrap();
        let rhs = b.transpose_of(&s).unwrap() * b.transpose_of(&t).unwrap();
        assert!(max_abs(&(lhs - rhs)) < 1e-10);
    }

    #[test]
    fn antisymmetric_map_transposes_to_minus_itself() {
        let b = Bilinear::minkowski(3, 1);
        // build a B-antisymmetric map: X = G^{-1} A with A antisymmetric
        let mut a = Mat::zeros(3, 3);
        a[(0, 1)] = 2.0;
        a[(1, 0)] = -2.0;
        a[(1, 2)] = -0.7;
        a[(2, 1)] = 0.7;
        let x = b.inv() * a;
        let xs = b.transpose_of(&x).unwrap();
        assert!(max_abs(&(xs + x)) < 1e-13);
    }

    #[test]
    fn bilinear_rejects_asymmetry_and_wrong_signature() {
        let mut g = Mat::identity(2, 2);
        g[(0, 1)] = 1e-15;
        assert!(Bilinear::new(g, 0).is_err());
        assert!(Bilinear::new(Mat::identity(2, 2), 1).is_err());
        let z = Mat::zeros(2, 2);
        assert!(matches!(Bilinear::new(z, 0), Err(Error::DegenerateForm(_))));
    }

    #[test]
    fn cross_product_standard_orientation() {
        let b = Bilinear::euclidean(3);
        let e1 = Vect::from_vec(vec![1.0, 0.0, 0.0]);
        let e2 = Vect::from_vec(vec![0.0, 1.0, 0.0]);
        let c = b.cross(&e1, &e2, 1.0).unwrap();
        assert!((c[2] - 1.0).abs() < 1e-15 && c[0].abs() + c[1].abs() < 1e-15);
    }
}
