//! G-structures on a bundle as tagged variants with their auxiliary data,
//! the explicit identifications of gl/g they induce, and inner torsion.
//!
//! Each variant identifies the quotient gl(E_x)/g_x with a concrete space
//! (symmetric maps, maps into a quotient, anticommuting maps, ...); classes
//! are stored through those identifications so equality is testable.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::chart::{
    christoffel_of_frame, covariant_endo_derivative, covariant_metric_derivative,
    covariant_section_derivative, ChartGrid, ConnectionField, DiffParams, EndoField, FieldSource,
    FrameField, MetricField, SectionField,
};
use crate::error::{Error, Result};
use crate::fd::Linear;
use crate::tensor::{checked_inverse, rcond, tol, Bilinear, Mat, Vect};

/// Pointwise G-structure data on a single fiber.
#[derive(Clone)]
pub enum StructureAt {
    /// 1-structure given by a distinguished frame; G is trivial.
    TrivialFrame { frame: Mat },
    /// Orthonormal frames of a nondegenerate symmetric form.
    Orthonormal { g: Bilinear },
    /// Frames adapted to a distinguished subspace spanned by `basis` columns.
    Subbundle { basis: Mat, g: Option<Bilinear> },
    /// Orthonormal frames adapted to a nondegenerate subspace.
    AdaptedOrthonormal { g: Bilinear, basis: Mat, sub_index: usize },
    /// Frames sending the first model vector to a distinguished section.
    UnitSection { eps: Vect, g: Option<Bilinear> },
    /// Complex-linear frames of an almost complex structure.
    AlmostComplex { j: Mat },
    /// Complex-linear isometries (unitary frames).
    Unitary { g: Bilinear, j: Mat },
    /// Oriented orthonormal frames of a 3-dimensional fiber pinning a unit
    /// vector as the first frame vector. `orientation` is +1 when the
    /// coordinate basis of the fiber is positively oriented.
    OrientedUnitVector3 { g: Bilinear, eps: Vect, orientation: f64 },
    /// Block product of child structures on consecutive coordinate slices.
    Product { children: Vec<StructureAt>, dims: Vec<usize> },
}

/// Class of an endomorphism in gl(E_x)/g_x, stored through the variant's
/// concrete identification.
#[derive(Debug, Clone)]
pub enum QuotientRepr {
    Full(Mat),
    Sym(Mat),
    /// (k-l) x l matrix in adapted quotient coordinates.
    HomToQuotient(Mat),
    /// Symmetric part plus an ambient-valued map F -> F-perp (k x l columns).
    SymPlusHom(Mat, Mat),
    Vector(Vect),
    SymPlusPerp(Mat, Vect),
    AntiCommuting(Mat),
    SymPlusAntiCommuting(Mat, Mat),
    DirectSum { children: Vec<QuotientRepr>, off_diag: Mat },
}

impl QuotientRepr {
    pub fn norm(&self) -> f64 {
        match self {
            QuotientRepr::Full(m) | QuotientRepr::Sym(m) | QuotientRepr::HomToQuotient(m) => {
                m.norm()
            }
            QuotientRepr::AntiCommuting(m) => m.norm(),
            QuotientRepr::SymPlusHom(a, b) | QuotientRepr::SymPlusAntiCommuting(a, b) => {
                (a.norm_squared() + b.norm_squared()).sqrt()
            }
            QuotientRepr::Vector(v) => v.norm(),
            QuotientRepr::SymPlusPerp(a, v) => (a.norm_squared() + v.norm_squared()).sqrt(),
            QuotientRepr::DirectSum { children, off_diag } => {
                let c: f64 = children.iter().map(|c| c.norm().powi(2)).sum();
                (c + off_diag.norm_squared()).sqrt()
            }
        }
    }

    pub fn sub(&self, other: &QuotientRepr) -> Result<QuotientRepr> {
        use QuotientRepr::*;
        Ok(match (self, other) {
            (Full(a), Full(b)) => Full(a - b),
            (Sym(a), Sym(b)) => Sym(a - b),
            (HomToQuotient(a), HomToQuotient(b)) => HomToQuotient(a - b),
            (SymPlusHom(a, b), SymPlusHom(c, d)) => SymPlusHom(a - c, b - d),
            (Vector(a), Vector(b)) => Vector(a - b),
            (SymPlusPerp(a, b), SymPlusPerp(c, d)) => SymPlusPerp(a - c, b - d),
            (AntiCommuting(a), AntiCommuting(b)) => AntiCommuting(a - b),
            (SymPlusAntiCommuting(a, b), SymPlusAntiCommuting(c, d)) => {
                SymPlusAntiCommuting(a - c, b - d)
            }
            (
                DirectSum { children: ca, off_diag: oa },
                DirectSum { children: cb, off_diag: ob },
            ) => {
                if ca.len() != cb.len() {
                    return Err(Error::ShapeError("direct-sum arity mismatch".into()));
                }
                let children = ca
                    .iter()
                    .zip(cb.iter())
                    .map(|(x, y)| x.sub(y))
                    .collect::<Result<Vec<_>>>()?;
                DirectSum { children, off_diag: oa - ob }
            }
            _ => return Err(Error::ShapeError("quotient variant mismatch".into())),
        })
    }

    pub fn distance(&self, other: &QuotientRepr) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }
}

impl StructureAt {
    pub fn dim(&self) -> usize {
        match self {
            StructureAt::TrivialFrame { frame } => frame.nrows(),
            StructureAt::Orthonormal { g } => g.dim(),
            StructureAt::Subbundle { basis, .. } => basis.nrows(),
            StructureAt::AdaptedOrthonormal { g, .. } => g.dim(),
            StructureAt::UnitSection { eps, .. } => eps.len(),
            StructureAt::AlmostComplex { j } => j.nrows(),
            StructureAt::Unitary { g, .. } => g.dim(),
            StructureAt::OrientedUnitVector3 { g, .. } => g.dim(),
            StructureAt::Product { dims, .. } => dims.iter().sum(),
        }
    }

    /// Check the variant's defining constraints on its auxiliary data.
    pub fn validate(&self, constraint_tol: f64) -> Result<()> {
        match self {
            StructureAt::TrivialFrame { frame } => {
                if rcond(frame) < tol::RCOND_SINGULAR {
                    return Err(Error::SpecViolation("trivial frame is singular".into()));
                }
            }
            StructureAt::Orthonormal { .. } => {}
            StructureAt::Subbundle { basis, .. } => {
                if basis.ncols() == 0 || basis.ncols() >= basis.nrows() {
                    return Err(Error::SpecViolation("subbundle rank must be 0 < l < k".into()));
                }
                if rcond(&(basis.transpose() * basis)) < tol::RCOND_SINGULAR {
                    return Err(Error::SpecViolation("subbundle basis is rank deficient".into()));
                }
            }
            StructureAt::AdaptedOrthonormal { g, basis, sub_index } => {
                let gf = basis.transpose() * g.gram() * basis;
                let gf = (&gf + gf.transpose()) * 0.5;
                Bilinear::new(gf, *sub_index).map_err(|e| {
                    Error::SpecViolation(format!("subspace form has wrong signature: {e}"))
                })?;
            }
            StructureAt::UnitSection { eps, g } => {
                if eps.norm() == 0.0 {
                    return Err(Error::SpecViolation("unit section vanishes".into()));
                }
                if let Some(g) = g {
                    let n = g.apply(eps, eps);
                    if (n - 1.0).abs() > constraint_tol {
                        return Err(Error::SpecViolation(format!(
                            "metric unit section has g(eps,eps) = {n}, expected 1"
                        )));
                    }
                }
            }
            StructureAt::AlmostComplex { j } => {
                let r = (j * j + Mat::identity(j.nrows(), j.nrows())).norm();
                if r > constraint_tol {
                    return Err(Error::SpecViolation(format!("J^2 + I has norm {r:.3e}")));
                }
            }
            StructureAt::Unitary { g, j } => {
                let r = (j * j + Mat::identity(j.nrows(), j.nrows())).norm();
                if r > constraint_tol {
                    return Err(Error::SpecViolation(format!("J^2 + I has norm {r:.3e}")));
                }
                let anti = (g.transpose_of(j)? + j).norm();
                if anti > constraint_tol {
                    return Err(Error::SpecViolation(format!(
                        "J not g-antisymmetric, residual {anti:.3e}"
                    )));
                }
                if g.index() % 2 != 0 || g.dim() % 2 != 0 {
                    return Err(Error::SpecViolation("unitary structure needs even dim and index".into()));
                }
            }
            StructureAt::OrientedUnitVector3 { g, eps, orientation } => {
                if g.dim() != 3 {
                    return Err(Error::SpecViolation("oriented unit-vector structure needs dim 3".into()));
                }
                if g.index() != 0 {
                    return Err(Error::SpecViolation("oriented unit-vector structure is Riemannian".into()));
                }
                let n = g.apply(eps, eps);
                if (n - 1.0).abs() > constraint_tol {
                    return Err(Error::SpecViolation(format!("g(xi,xi) = {n}, expected 1")));
                }
                if orientation.abs() != 1.0 {
                    return Err(Error::SpecViolation("orientation must be +/-1".into()));
                }
            }
            StructureAt::Product { children, dims } => {
                if children.len() != dims.len() {
                    return Err(Error::SpecViolation("product arity mismatch".into()));
                }
                for (c, d) in children.iter().zip(dims.iter()) {
                    if c.dim() != *d {
                        return Err(Error::SpecViolation("product child dimension mismatch".into()));
                    }
                    c.validate(constraint_tol)?;
                }
            }
        }
        Ok(())
    }

    /// Adapted basis [F | complement] for subbundle quotients.
    fn adapted_basis(basis: &Mat, g: Option<&Bilinear>) -> Result<Mat> {
        let k = basis.nrows();
        let l = basis.ncols();
        let mut b = Mat::zeros(k, k);
        b.view_mut((0, 0), (k, l)).copy_from(basis);
        // complement: g-orthogonal when a form is present, Euclidean otherwise
        let proj = match g {
            Some(g) => {
                let gf = basis.transpose() * g.gram() * basis;
                let gf_inv = checked_inverse(&gf)
                    .map_err(|_| Error::DegenerateForm("form degenerate on subbundle".into()))?;
                basis * gf_inv * basis.transpose() * g.gram()
            }
            None => {
                let gram = basis.transpose() * basis;
                let gram_inv = checked_inverse(&gram)?;
                basis * gram_inv * basis.transpose()
            }
        };
        let mut col = l;
        for i in 0..k {
            if col == k {
                break;
            }
            let e = Vect::from_fn(k, |r, _| if r == i { 1.0 } else { 0.0 });
            let mut c = &e - &proj * &e;
            // Euclidean Gram-Schmidt against the accepted complement columns
            for j in l..col {
                let u = b.column(j).into_owned();
                c -= &u * (u.dot(&c) / u.dot(&u));
            }
            if c.norm() > 1e-8 {
                b.set_column(col, &c);
                col += 1;
            }
        }
        if col != k {
            return Err(Error::SpecViolation("could not complete subbundle basis".into()));
        }
        Ok(b)
    }

    /// g-orthogonal projector onto the complement of `basis`.
    fn perp_projector(g: &Bilinear, basis: &Mat) -> Result<Mat> {
        let gf = basis.transpose() * g.gram() * basis;
        let gf_inv = checked_inverse(&gf)
            .map_err(|_| Error::DegenerateForm("form degenerate on subbundle".into()))?;
        let k = basis.nrows();
        Ok(Mat::identity(k, k) - basis * gf_inv * basis.transpose() * g.gram())
    }

    /// Project an endomorphism onto the quotient gl(E_x)/g_x through the
    /// variant's identification. Elements of g_x map to zero exactly.
    pub fn quotient_project(&self, t: &Mat) -> Result<QuotientRepr> {
        let k = self.dim();
        if t.nrows() != k || t.ncols() != k {
            return Err(Error::ShapeError(format!(
                "quotient_project: {}x{} endo on dim {k}",
                t.nrows(),
                t.ncols()
            )));
        }
        Ok(match self {
            StructureAt::TrivialFrame { .. } => QuotientRepr::Full(t.clone()),
            StructureAt::Orthonormal { g } => QuotientRepr::Sym(g.sym_part(t)?),
            StructureAt::Subbundle { basis, g } => {
                let b = Self::adapted_basis(basis, g.as_ref())?;
                let b_inv = checked_inverse(&b)?;
                let l = basis.ncols();
                let q = (b_inv * t * basis).view((l, 0), (k - l, l)).into_owned();
                QuotientRepr::HomToQuotient(q)
            }
            StructureAt::AdaptedOrthonormal { g, basis, .. } => {
                let sym = g.sym_part(t)?;
                let anti = g.antisym_part(t)?;
                let qp = Self::perp_projector(g, basis)?;
                QuotientRepr::SymPlusHom(sym, qp * anti * basis)
            }
            StructureAt::UnitSection { eps, g: None } => QuotientRepr::Vector(t * eps),
            StructureAt::UnitSection { eps, g: Some(g) }
            | StructureAt::OrientedUnitVector3 { eps, g, .. } => {
                let sym = g.sym_part(t)?;
                let anti = g.antisym_part(t)?;
                QuotientRepr::SymPlusPerp(sym, anti * eps)
            }
            StructureAt::AlmostComplex { j } => QuotientRepr::AntiCommuting(t * j - j * t),
            StructureAt::Unitary { g, j } => {
                // (T + g_x) -> ((T + T*)/2, [(T - T*)/2, J])
                let sym = g.sym_part(t)?;
                let anti = g.antisym_part(t)?;
                QuotientRepr::SymPlusAntiCommuting(sym, &anti * j - j * &anti)
            }
            StructureAt::Product { children, dims } => {
                let mut off = t.clone();
                let mut offset = 0usize;
                let mut reprs = Vec::with_capacity(children.len());
                for (c, d) in children.iter().zip(dims.iter()) {
                    let block = t.view((offset, offset), (*d, *d)).into_owned();
                    reprs.push(c.quotient_project(&block)?);
                    off.view_mut((offset, offset), (*d, *d)).fill(0.0);
                    offset += d;
                }
                QuotientRepr::DirectSum { children: reprs, off_diag: off }
            }
        })
    }

    /// A canonical endomorphism representing a quotient class (a section of
    /// the projection: quotient_project(representative(q)) == q).
    pub fn representative(&self, q: &QuotientRepr) -> Result<Mat> {
        use QuotientRepr::*;
        Ok(match (self, q) {
            (StructureAt::TrivialFrame { .. }, Full(m)) => m.clone(),
            (StructureAt::Orthonormal { .. }, Sym(m)) => m.clone(),
            (StructureAt::Subbundle { basis, g }, HomToQuotient(qm)) => {
                let b = Self::adapted_basis(basis, g.as_ref())?;
                let k = self.dim();
                let l = basis.ncols();
                let mut inner = Mat::zeros(k, k);
                inner.view_mut((l, 0), (k - l, l)).copy_from(qm);
                &b * inner * checked_inverse(&b)?
            }
            (StructureAt::AdaptedOrthonormal { g, basis, .. }, SymPlusHom(s, h)) => {
                // antisymmetric part A with q_perp(A f_j) = h_j on the subspace
                // and A mapping the complement back into F by antisymmetry
                let gf = basis.transpose() * g.gram() * basis;
                let gf_inv = checked_inverse(&gf)?;
                // A = h (G F (F^T G F)^{-1})^T - (G F ... )^T-dual construction:
                let w = g.gram() * basis * gf_inv; // k x l, rows pair with h columns
                let a = h * w.transpose() - g.inv() * (h * w.transpose()).transpose() * g.gram();
                s + a
            }
            (StructureAt::UnitSection { eps, g: None }, Vector(w)) => {
                let scale = eps.dot(eps);
                w * eps.transpose() / scale
            }
            (StructureAt::UnitSection { eps, g: Some(g) }, SymPlusPerp(s, w))
            | (StructureAt::OrientedUnitVector3 { eps, g, .. }, SymPlusPerp(s, w)) => {
                let ge = g.gram() * eps;
                let gw = g.gram() * w;
                let denom = g.apply(eps, eps);
                s + (w * ge.transpose() - eps * gw.transpose()) / denom
            }
            (StructureAt::AlmostComplex { j }, AntiCommuting(km)) => -(km * j) * 0.5,
            (StructureAt::Unitary { j, .. }, SymPlusAntiCommuting(s, km)) => s - km * j * 0.5,
            (StructureAt::Product { children, dims }, DirectSum { children: qs, off_diag }) => {
                let mut out = off_diag.clone();
                let mut offset = 0usize;
                for ((c, d), qc) in children.iter().zip(dims.iter()).zip(qs.iter()) {
                    let rep = c.representative(qc)?;
                    out.view_mut((offset, offset), (*d, *d)).copy_from(&rep);
                    offset += d;
                }
                out
            }
            _ => return Err(Error::ShapeError("representative: variant mismatch".into())),
        })
    }

    /// The zero class in this variant's identification.
    pub fn zero_class(&self) -> QuotientRepr {
        let k = self.dim();
        match self {
            StructureAt::TrivialFrame { .. } => QuotientRepr::Full(Mat::zeros(k, k)),
            StructureAt::Orthonormal { .. } => QuotientRepr::Sym(Mat::zeros(k, k)),
            StructureAt::Subbundle { basis, .. } => {
                QuotientRepr::HomToQuotient(Mat::zeros(k - basis.ncols(), basis.ncols()))
            }
            StructureAt::AdaptedOrthonormal { basis, .. } => {
                QuotientRepr::SymPlusHom(Mat::zeros(k, k), Mat::zeros(k, basis.ncols()))
            }
            StructureAt::UnitSection { g: None, .. } => QuotientRepr::Vector(Vect::zeros(k)),
            StructureAt::UnitSection { .. } | StructureAt::OrientedUnitVector3 { .. } => {
                QuotientRepr::SymPlusPerp(Mat::zeros(k, k), Vect::zeros(k))
            }
            StructureAt::AlmostComplex { .. } => QuotientRepr::AntiCommuting(Mat::zeros(k, k)),
            StructureAt::Unitary { .. } => {
                QuotientRepr::SymPlusAntiCommuting(Mat::zeros(k, k), Mat::zeros(k, k))
            }
            StructureAt::Product { children, .. } => QuotientRepr::DirectSum {
                children: children.iter().map(|c| c.zero_class()).collect(),
                off_diag: Mat::zeros(k, k),
            },
        }
    }

    /// Random element of the structure algebra g_x (projects to zero).
    pub fn random_lie_member(&self, rng: &mut ChaCha8Rng) -> Mat {
        let k = self.dim();
        let randm = |rng: &mut ChaCha8Rng, r: usize, c: usize| {
            Mat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
        };
        match self {
            StructureAt::TrivialFrame { .. } => Mat::zeros(k, k),
            StructureAt::Orthonormal { g } => {
                let a = randm(rng, k, k);
                let anti = &a - a.transpose();
                g.inv() * anti
            }
            StructureAt::Subbundle { basis, g } => {
                let b = Self::adapted_basis(basis, g.as_ref()).expect("adapted basis");
                let l = basis.ncols();
                let mut inner = randm(rng, k, k);
                inner.view_mut((l, 0), (k - l, l)).fill(0.0);
                &b * inner * checked_inverse(&b).expect("basis invertible")
            }
            StructureAt::AdaptedOrthonormal { g, basis, .. } => {
                // g-antisymmetric and subbundle preserving: antisymmetrize a
                // block-preserving map in the adapted splitting
                let qp = Self::perp_projector(g, basis).expect("projector");
                let pf = Mat::identity(k, k) - &qp;
                let a = randm(rng, k, k);
                let anti = g.inv() * (&a - a.transpose());
                // keep the block-diagonal (structure-preserving) part
                &pf * &anti * &pf + &qp * &anti * &qp
            }
            StructureAt::UnitSection { eps, g: None } => {
                let a = randm(rng, k, k);
                let ae = &a * eps;
                a - ae * eps.transpose() / eps.dot(eps)
            }
            StructureAt::UnitSection { eps, g: Some(g) }
            | StructureAt::OrientedUnitVector3 { eps, g, .. } => {
                let a = randm(rng, k, k);
                let anti = g.inv() * (&a - a.transpose());
                // remove the part moving eps, staying antisymmetric
                let w = &anti * eps;
                let ge = g.gram() * eps;
                let gw = g.gram() * &w;
                let denom = g.apply(eps, eps);
                anti - (w * ge.transpose() - eps * gw.transpose()) / denom
            }
            StructureAt::AlmostComplex { j } => {
                let a = randm(rng, k, k);
                // commutes with J
                (&a - j * &a * j) * 0.5
            }
            StructureAt::Unitary { g, j } => {
                let a = randm(rng, k, k);
                let anti = g.inv() * (&a - a.transpose());
                (&anti - j * &anti * j) * 0.5
            }
            StructureAt::Product { children, dims } => {
                let mut out = Mat::zeros(k, k);
                let mut offset = 0;
                for (c, d) in children.iter().zip(dims.iter()) {
                    out.view_mut((offset, offset), (*d, *d))
                        .copy_from(&c.random_lie_member(rng));
                    offset += d;
                }
                out
            }
        }
    }

    /// Deterministic frame belonging to the structure (a point of P_x).
    pub fn structural_frame(&self) -> Result<Mat> {
        let k = self.dim();
        match self {
            StructureAt::TrivialFrame { frame } => Ok(frame.clone()),
            StructureAt::Orthonormal { g } => pseudo_orthonormal_frame(g, &[]),
            StructureAt::Subbundle { basis, g } => Self::adapted_basis(basis, g.as_ref()),
            StructureAt::AdaptedOrthonormal { g, basis, .. } => {
                // orthonormalize inside F, then inside the complement,
                // positive-norm columns first within each block
                let f_cols: Vec<Vect> = (0..basis.ncols()).map(|i| basis.column(i).into_owned()).collect();
                let f_on = sort_by_sign(g, pseudo_gs(g, &f_cols, basis.ncols())?);
                let qp = Self::perp_projector(g, basis)?;
                let mut cands = Vec::new();
                for i in 0..k {
                    let e = Vect::from_fn(k, |r, _| if r == i { 1.0 } else { 0.0 });
                    cands.push(&qp * e);
                }
                let c_on = sort_by_sign(g, pseudo_gs(g, &cands, k - basis.ncols())?);
                let mut out = Mat::zeros(k, k);
                for (i, v) in f_on.iter().chain(c_on.iter()).enumerate() {
                    out.set_column(i, v);
                }
                Ok(out)
            }
            StructureAt::UnitSection { eps, g: None } => {
                let mut cols = vec![eps.clone()];
                for i in 0..k {
                    if cols.len() == k {
                        break;
                    }
                    let e = Vect::from_fn(k, |r, _| if r == i { 1.0 } else { 0.0 });
                    let mut c = e;
                    for u in cols.iter() {
                        c -= u * (u.dot(&c) / u.dot(u));
                    }
                    if c.norm() > 1e-8 {
                        let nc = c.norm();
                        cols.push(c / nc * eps.norm());
                    }
                }
                if cols.len() != k {
                    return Err(Error::SpecViolation("could not complete unit-section frame".into()));
                }
                let mut out = Mat::zeros(k, k);
                for (i, v) in cols.iter().enumerate() {
                    out.set_column(i, v);
                }
                Ok(out)
            }
            StructureAt::UnitSection { eps, g: Some(g) } => pseudo_orthonormal_frame(g, &[eps.clone()]),
            StructureAt::OrientedUnitVector3 { g, eps, orientation } => {
                let mut f = pseudo_orthonormal_frame(g, &[eps.clone()])?;
                if f.determinant() * orientation < 0.0 {
                    let c2 = -f.column(2).into_owned();
                    f.set_column(2, &c2);
                }
                Ok(f)
            }
            StructureAt::AlmostComplex { j } => {
                let mut cols: Vec<Vect> = Vec::new();
                for i in 0..k {
                    if 2 * cols.len() == k {
                        break;
                    }
                    let e = Vect::from_fn(k, |r, _| if r == i { 1.0 } else { 0.0 });
                    let mut c = e;
                    for u in cols.iter() {
                        let ju = j * u;
                        c -= u * (u.dot(&c) / u.dot(u));
                        c -= &ju * (ju.dot(&c) / ju.dot(&ju));
                    }
                    if c.norm() > 1e-8 {
                        cols.push(c.normalize());
                    }
                }
                if 2 * cols.len() != k {
                    return Err(Error::SpecViolation("could not build complex frame".into()));
                }
                let mut out = Mat::zeros(k, k);
                for (i, v) in cols.iter().enumerate() {
                    out.set_column(i, v);
                    out.set_column(k / 2 + i, &(j * v));
                }
                Ok(out)
            }
            StructureAt::Unitary { g, j } => {
                // complex pseudo-orthonormal frame: pick f, then use J f as its pair
                let l = k / 2;
                let mut pos: Vec<Vect> = Vec::new();
                let mut neg: Vec<Vect> = Vec::new();
                let mut held: Vec<Vect> = Vec::new();
                for i in 0..k {
                    if pos.len() + neg.len() == l {
                        break;
                    }
                    let e = Vect::from_fn(k, |r, _| if r == i { 1.0 } else { 0.0 });
                    let mut c = e;
                    for u in held.iter() {
                        let gu = g.apply(u, u);
                        c -= u * (g.apply(u, &c) / gu);
                        let ju = j * u;
                        let gju = g.apply(&ju, &ju);
                        c -= &ju * (g.apply(&ju, &c) / gju);
                    }
                    let n = g.apply(&c, &c);
                    if n.abs() > 1e-8 {
                        let v = &c / n.abs().sqrt();
                        held.push(v.clone());
                        if n > 0.0 {
                            pos.push(v);
                        } else {
                            neg.push(v);
                        }
                    }
                }
                if pos.len() + neg.len() != l {
                    return Err(Error::SpecViolation("could not build unitary frame".into()));
                }
                let ordered: Vec<Vect> = pos.into_iter().chain(neg).collect();
                let mut out = Mat::zeros(k, k);
                for (i, v) in ordered.iter().enumerate() {
                    out.set_column(i, v);
                    out.set_column(l + i, &(j * v));
                }
                Ok(out)
            }
            StructureAt::Product { children, dims } => {
                let mut out = Mat::zeros(k, k);
                let mut offset = 0;
                for (c, d) in children.iter().zip(dims.iter()) {
                    out.view_mut((offset, offset), (*d, *d)).copy_from(&c.structural_frame()?);
                    offset += d;
                }
                Ok(out)
            }
        }
    }

    /// Residual of the structural constraints on a candidate frame p
    /// (zero iff p is a point of P_x).
    pub fn frame_residual(&self, p: &Mat) -> f64 {
        let k = self.dim();
        match self {
            StructureAt::TrivialFrame { frame } => (p - frame).norm(),
            StructureAt::Orthonormal { g } => {
                let eta = Bilinear::minkowski(k, g.index());
                (p.transpose() * g.gram() * p - eta.gram()).norm()
            }
            StructureAt::Subbundle { basis, g } => {
                // p must map the leading l coordinates into span(basis)
                let l = basis.ncols();
                let qp = match Self::adapted_basis(basis, g.as_ref()) {
                    Ok(b) => match checked_inverse(&b) {
                        Ok(bi) => bi,
                        Err(_) => return f64::INFINITY,
                    },
                    Err(_) => return f64::INFINITY,
                };
                let coords = qp * p;
                coords.view((l, 0), (k - l, l)).norm()
            }
            StructureAt::AdaptedOrthonormal { g, basis, sub_index } => {
                let l = basis.ncols();
                let mut eta = Mat::identity(k, k);
                for i in (l - sub_index)..l {
                    eta[(i, i)] = -1.0;
                }
                let extra_neg = g.index() - sub_index;
                for i in (k - extra_neg)..k {
                    eta[(i, i)] = -1.0;
                }
                let iso = (p.transpose() * g.gram() * p - eta).norm();
                let sub = match Self::perp_projector(g, basis) {
                    Ok(qp) => (qp * p.view((0, 0), (k, l))).norm(),
                    Err(_) => return f64::INFINITY,
                };
                iso + sub
            }
            StructureAt::UnitSection { eps, .. } => (p.column(0).into_owned() - eps).norm(),
            StructureAt::AlmostComplex { j } => {
                let j0 = standard_complex_structure(k);
                (p * j0 - j * p).norm()
            }
            StructureAt::Unitary { g, j } => {
                let j0 = standard_complex_structure(k);
                let eta = unitary_model_form(k, g.index());
                (p * &j0 - j * p).norm() + (p.transpose() * g.gram() * p - eta).norm()
            }
            StructureAt::OrientedUnitVector3 { g, eps, orientation } => {
                let iso = (p.transpose() * g.gram() * p - Mat::identity(3, 3)).norm();
                let pin = (p.column(0).into_owned() - eps).norm();
                let orient = if p.determinant() * orientation > 0.0 { 0.0 } else { 1.0 };
                iso + pin + orient
            }
            StructureAt::Product { children, dims } => {
                let mut r = 0.0;
                let mut offset = 0;
                for (c, d) in children.iter().zip(dims.iter()) {
                    r += c.frame_residual(&p.view((offset, offset), (*d, *d)).into_owned());
                    offset += d;
                }
                // off-diagonal blocks must vanish
                let mut off = p.clone();
                let mut o = 0;
                for d in dims.iter() {
                    off.view_mut((o, o), (*d, *d)).fill(0.0);
                    o += d;
                }
                r + off.norm()
            }
        }
    }
}

/// The standard complex structure (v, w) -> (-w, v) as a matrix.
pub fn standard_complex_structure(k: usize) -> Mat {
    let l = k / 2;
    let mut j = Mat::zeros(k, k);
    for i in 0..l {
        j[(l + i, i)] = 1.0;
        j[(i, l + i)] = -1.0;
    }
    j
}

/// Model form for unitary structures: index r = 2s split across the two
/// real blocks paired by the standard complex structure.
pub fn unitary_model_form(k: usize, r: usize) -> Mat {
    let l = k / 2;
    let s = r / 2;
    let mut eta = Mat::identity(k, k);
    for i in (l - s)..l {
        eta[(i, i)] = -1.0;
    }
    for i in (k - s)..k {
        eta[(i, i)] = -1.0;
    }
    eta
}

/// Stable partition of pseudo-orthonormal vectors: positive g-norm first.
fn sort_by_sign(g: &Bilinear, vecs: Vec<Vect>) -> Vec<Vect> {
    let (pos, neg): (Vec<_>, Vec<_>) = vecs.into_iter().partition(|v| g.apply(v, v) > 0.0);
    pos.into_iter().chain(neg).collect()
}

/// Pseudo-orthonormal Gram-Schmidt retaining `want` vectors.
fn pseudo_gs(g: &Bilinear, candidates: &[Vect], want: usize) -> Result<Vec<Vect>> {
    let mut accepted: Vec<Vect> = Vec::new();
    for cand in candidates.iter() {
        if accepted.len() == want {
            break;
        }
        let mut c = cand.clone();
        for u in accepted.iter() {
            let gu = g.apply(u, u);
            c -= u * (g.apply(u, &c) / gu);
        }
        let n = g.apply(&c, &c);
        if n.abs() > 1e-8 * (1.0 + c.norm_squared()) {
            accepted.push(&c / n.abs().sqrt());
        }
    }
    if accepted.len() != want {
        return Err(Error::SpecViolation("Gram-Schmidt ran out of candidates".into()));
    }
    Ok(accepted)
}

/// Frame of pseudo-orthonormal columns, positive-norm columns first, with
/// `pinned` vectors forced to the leading columns.
fn pseudo_orthonormal_frame(g: &Bilinear, pinned: &[Vect]) -> Result<Mat> {
    let k = g.dim();
    let mut cands: Vec<Vect> = pinned.to_vec();
    for i in 0..k {
        cands.push(Vect::from_fn(k, |r, _| if r == i { 1.0 } else { 0.0 }));
    }
    let all = pseudo_gs(g, &cands, k)?;
    let keep_first = pinned.len();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, v) in all.iter().enumerate() {
        if i < keep_first {
            continue;
        }
        if g.apply(v, v) > 0.0 {
            pos.push(v.clone());
        } else {
            neg.push(v.clone());
        }
    }
    let mut out = Mat::zeros(k, k);
    let mut col = 0;
    for v in all.iter().take(keep_first) {
        out.set_column(col, v);
        col += 1;
    }
    for v in pos.iter().chain(neg.iter()) {
        out.set_column(col, v);
        col += 1;
    }
    Ok(out)
}

/// Field-level G-structure: the variant tag plus the chart fields carrying
/// its auxiliary data.
#[derive(Clone)]
pub enum GStructureSpec {
    TrivialFrame { frame: FrameField },
    Orthonormal { metric: MetricField },
    Subbundle { sub: FrameField, metric: Option<MetricField> },
    AdaptedOrthonormal { metric: MetricField, sub: FrameField, sub_index: usize },
    UnitSection { section: SectionField, metric: Option<MetricField> },
    AlmostComplex { j: EndoField },
    Unitary { metric: MetricField, j: EndoField },
    OrientedUnitVector3 { metric: MetricField, section: SectionField, orientation: f64 },
    Product { children: Vec<GStructureSpec>, dims: Vec<usize> },
}

impl GStructureSpec {
    pub fn variant_name(&self) -> &'static str {
        match self {
            GStructureSpec::TrivialFrame { .. } => "trivial_frame",
            GStructureSpec::Orthonormal { .. } => "orthonormal",
            GStructureSpec::Subbundle { .. } => "subbundle",
            GStructureSpec::AdaptedOrthonormal { .. } => "adapted_orthonormal",
            GStructureSpec::UnitSection { .. } => "unit_section",
            GStructureSpec::AlmostComplex { .. } => "almost_complex",
            GStructureSpec::Unitary { .. } => "unitary",
            GStructureSpec::OrientedUnitVector3 { .. } => "oriented_unit_vector3",
            GStructureSpec::Product { .. } => "product",
        }
    }

    /// Evaluate the auxiliary data at a point.
    pub fn at(&self, x: &Vect) -> Result<StructureAt> {
        Ok(match self {
            GStructureSpec::TrivialFrame { frame } => {
                StructureAt::TrivialFrame { frame: frame.at(x) }
            }
            GStructureSpec::Orthonormal { metric } => StructureAt::Orthonormal { g: metric.at(x)? },
            GStructureSpec::Subbundle { sub, metric } => StructureAt::Subbundle {
                basis: sub.at(x),
                g: metric.as_ref().map(|m| m.at(x)).transpose()?,
            },
            GStructureSpec::AdaptedOrthonormal { metric, sub, sub_index } => {
                StructureAt::AdaptedOrthonormal {
                    g: metric.at(x)?,
                    basis: sub.at(x),
                    sub_index: *sub_index,
                }
            }
            GStructureSpec::UnitSection { section, metric } => StructureAt::UnitSection {
                eps: section.source.eval(x),
                g: metric.as_ref().map(|m| m.at(x)).transpose()?,
            },
            GStructureSpec::AlmostComplex { j } => {
                StructureAt::AlmostComplex { j: j.source.eval(x) }
            }
            GStructureSpec::Unitary { metric, j } => {
                StructureAt::Unitary { g: metric.at(x)?, j: j.source.eval(x) }
            }
            GStructureSpec::OrientedUnitVector3 { metric, section, orientation } => {
                StructureAt::OrientedUnitVector3 {
                    g: metric.at(x)?,
                    eps: section.source.eval(x),
                    orientation: *orientation,
                }
            }
            GStructureSpec::Product { children, dims } => StructureAt::Product {
                children: children.iter().map(|c| c.at(x)).collect::<Result<Vec<_>>>()?,
                dims: dims.clone(),
            },
        })
    }

    /// A structure frame section as a frame field (smooth wherever the
    /// underlying Gram-Schmidt pivots do not change).
    pub fn frame_section(&self) -> FrameField {
        let spec = self.clone();
        FrameField::new(FieldSource::closed(move |x: &Vect| {
            spec.at(x)
                .and_then(|s| s.structural_frame())
                .unwrap_or_else(|_| Mat::from_element(1, 1, f64::NAN))
        }))
    }

    /// Inner torsion of the structure with respect to `conn`, through the
    /// variant's closed form.
    pub fn inner_torsion(
        &self,
        conn: &ConnectionField,
        grid: &ChartGrid,
        x: &Vect,
        v: &Vect,
        dp: DiffParams,
    ) -> Result<QuotientRepr> {
        grid.require_interior(x, dp.stencil_halfwidth())?;
        match self {
            GStructureSpec::TrivialFrame { frame } => {
                let gs = christoffel_of_frame(conn, frame, grid, x, dp)?;
                let mut out = Mat::zeros(conn.rank, conn.rank);
                for i in 0..v.len() {
                    out += &gs[i] * v[i];
                }
                Ok(QuotientRepr::Full(out))
            }
            GStructureSpec::Orthonormal { metric } => {
                let g = metric.at(x)?;
                let nab = covariant_metric_derivative(conn, metric, grid, x, dp);
                let nv = contract(&nab, v);
                Ok(QuotientRepr::Sym(g.endo_from_form(&nv) * -0.5))
            }
            GStructureSpec::Subbundle { sub, metric } => {
                // absolute second fundamental form of the subbundle
                let basis = sub.at(x);
                let g = metric.as_ref().map(|m| m.at(x)).transpose()?;
                let b = StructureAt::adapted_basis(&basis, g.as_ref())?;
                let b_inv = checked_inverse(&b)?;
                let dsub = sub.partials(x, dp);
                let gv = conn.gamma_of(x, v);
                let mut nabla_f = Mat::zeros(basis.nrows(), basis.ncols());
                for i in 0..v.len() {
                    nabla_f += &dsub[i] * v[i];
                }
                nabla_f += gv * &basis;
                let l = basis.ncols();
                let k = basis.nrows();
                let q = (b_inv * nabla_f).view((l, 0), (k - l, l)).into_owned();
                Ok(QuotientRepr::HomToQuotient(q))
            }
            GStructureSpec::AdaptedOrthonormal { metric, sub, .. } => {
                let g = metric.at(x)?;
                let basis = sub.at(x);
                let qp = StructureAt::perp_projector(&g, &basis)?;
                let nab = covariant_metric_derivative(conn, metric, grid, x, dp);
                let ng_endo = g.endo_from_form(&contract(&nab, v));
                // alpha-component of the connection for the splitting F + F-perp
                let dsub = sub.partials(x, dp);
                let gv = conn.gamma_of(x, v);
                let mut nabla_f = Mat::zeros(basis.nrows(), basis.ncols());
                for i in 0..v.len() {
                    nabla_f += &dsub[i] * v[i];
                }
                nabla_f += gv * &basis;
                let alpha = &qp * nabla_f;
                Ok(QuotientRepr::SymPlusHom(
                    ng_endo.clone() * -0.5,
                    alpha + &qp * ng_endo * &basis * 0.5,
                ))
            }
            GStructureSpec::UnitSection { section, metric: None } => {
                let nab = covariant_section_derivative(conn, section, grid, x, dp);
                Ok(QuotientRepr::Vector(contract_vec(&nab, v)))
            }
            GStructureSpec::UnitSection { section, metric: Some(metric) } => {
                let g = metric.at(x)?;
                let eps = section.source.eval(x);
                let nab_g = covariant_metric_derivative(conn, metric, grid, x, dp);
                let ng_endo = g.endo_from_form(&contract(&nab_g, v));
                let nab_e = covariant_section_derivative(conn, section, grid, x, dp);
                let ne = contract_vec(&nab_e, v);
                Ok(QuotientRepr::SymPlusPerp(ng_endo.clone() * -0.5, ne + ng_endo * eps * 0.5))
            }
            GStructureSpec::OrientedUnitVector3 { metric, section, .. } => {
                let g = metric.at(x)?;
                let eps = section.source.eval(x);
                let nab_g = covariant_metric_derivative(conn, metric, grid, x, dp);
                let ng_endo = g.endo_from_form(&contract(&nab_g, v));
                let nab_e = covariant_section_derivative(conn, section, grid, x, dp);
                let ne = contract_vec(&nab_e, v);
                Ok(QuotientRepr::SymPlusPerp(ng_endo.clone() * -0.5, ne + ng_endo * eps * 0.5))
            }
            GStructureSpec::AlmostComplex { j } => {
                let nab = covariant_endo_derivative(conn, j, grid, x, dp);
                Ok(QuotientRepr::AntiCommuting(contract(&nab, v)))
            }
            GStructureSpec::Unitary { metric, j } => {
                // second slot: [(Gamma - Gamma*)/2, J] = nabla J - [-(nabla g)/2, J],
                // with nabla g identified with an endomorphism through g
                let g = metric.at(x)?;
                let jx = j.source.eval(x);
                let nab_g = covariant_metric_derivative(conn, metric, grid, x, dp);
                let ng_endo = g.endo_from_form(&contract(&nab_g, v));
                let nab_j = covariant_endo_derivative(conn, j, grid, x, dp);
                let nj = contract(&nab_j, v);
                Ok(QuotientRepr::SymPlusAntiCommuting(
                    ng_endo.clone() * -0.5,
                    nj + (&ng_endo * &jx - &jx * &ng_endo) * 0.5,
                ))
            }
            GStructureSpec::Product { children, dims } => {
                let gv = conn.gamma_of(x, v);
                let mut off = gv.clone();
                let mut reprs = Vec::with_capacity(children.len());
                let mut offset = 0usize;
                for (child, d) in children.iter().zip(dims.iter()) {
                    let sub_conn = slice_connection(conn, offset, *d);
                    reprs.push(child.inner_torsion(&sub_conn, grid, x, v, dp)?);
                    off.view_mut((offset, offset), (*d, *d)).fill(0.0);
                    offset += d;
                }
                Ok(QuotientRepr::DirectSum { children: reprs, off_diag: off })
            }
        }
    }

    /// Definition-level inner torsion: project the Christoffel tensor of a
    /// structure frame section. Used to cross-check the closed forms.
    pub fn inner_torsion_via_frame(
        &self,
        conn: &ConnectionField,
        frame: &FrameField,
        grid: &ChartGrid,
        x: &Vect,
        v: &Vect,
        dp: DiffParams,
    ) -> Result<QuotientRepr> {
        let s_at = self.at(x)?;
        let p = frame.at(x);
        let res = s_at.frame_residual(&p);
        if res > 1e-6 {
            return Err(Error::FrameNotInStructure(res));
        }
        let gs = christoffel_of_frame(conn, frame, grid, x, dp)?;
        let mut gv = Mat::zeros(conn.rank, conn.rank);
        for i in 0..v.len() {
            gv += &gs[i] * v[i];
        }
        s_at.quotient_project(&gv)
    }
}

/// Extract the diagonal block of a connection as a connection on the slice.
pub fn slice_connection(conn: &ConnectionField, offset: usize, dim: usize) -> ConnectionField {
    let parent = conn.christoffel.clone();
    ConnectionField::new(
        dim,
        FieldSource::closed(move |x: &Vect| {
            parent
                .eval(x)
                .iter()
                .map(|g| g.view((offset, offset), (dim, dim)).into_owned())
                .collect()
        }),
    )
}

fn contract(mats: &[Mat], v: &Vect) -> Mat {
    let mut out = mats[0].zeros_like();
    for i in 0..v.len() {
        if v[i] != 0.0 {
            out += &mats[i] * v[i];
        }
    }
    out
}

fn contract_vec(vecs: &[Vect], v: &Vect) -> Vect {
    let mut out = Vect::zeros(vecs[0].len());
    for i in 0..v.len() {
        if v[i] != 0.0 {
            out += &vecs[i] * v[i];
        }
    }
    out
}
