//! Catalog of infinitesimally homogeneous target spaces: their torsion,
//! curvature, and inner-torsion tensors transported to any vector space
//! carrying the matching G-structure.
//!
//! Curvature convention throughout: R(v, w) = [nabla_v, nabla_w] - nabla_[v,w].

use crate::error::{Error, Result};
use crate::gstructure::{standard_complex_structure, unitary_model_form, QuotientRepr, StructureAt};
use crate::tensor::{checked_inverse, tol, Bilinear, Mat, Vect};

/// Left-invariant connection choice on a Lie-group model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LieConnection {
    /// Levi-Civita connection of the left-invariant metric (Koszul formula).
    LeviCivita,
    /// The flat left connection Gamma = 0 (torsion -[.,.]).
    Flat,
}

/// Lie algebra given by structure constants: `ad[i]` is the matrix of
/// ad(e_i), i.e. column j holds the coordinates of [e_i, e_j].
#[derive(Debug, Clone)]
pub struct LieAlgebra {
    pub ad: Vec<Mat>,
}

impl LieAlgebra {
    pub fn new(ad: Vec<Mat>) -> Result<Self> {
        let n = ad.len();
        for m in ad.iter() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::ShapeError("structure constants must be n matrices n x n".into()));
            }
        }
        let alg = Self { ad };
        alg.validate()?;
        Ok(alg)
    }

    pub fn dim(&self) -> usize {
        self.ad.len()
    }

    pub fn bracket(&self, u: &Vect, v: &Vect) -> Vect {
        let mut out = Vect::zeros(self.dim());
        for i in 0..self.dim() {
            if u[i] != 0.0 {
                out += &self.ad[i] * v * u[i];
            }
        }
        out
    }

    fn basis(n: usize, i: usize) -> Vect {
        Vect::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })
    }

    /// Antisymmetry and the Jacobi identity, within 1e-10.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let ei = Self::basis(n, i);
                let ej = Self::basis(n, j);
                let anti = (self.bracket(&ei, &ej) + self.bracket(&ej, &ei)).norm();
                if anti > 1e-10 {
                    return Err(Error::SpecViolation(format!(
                        "structure constants not antisymmetric at ({i},{j}): {anti:.3e}"
                    )));
                }
                for k in 0..n {
                    let ek = Self::basis(n, k);
                    let jac = self.bracket(&ei, &self.bracket(&ej, &ek))
                        + self.bracket(&ej, &self.bracket(&ek, &ei))
                        + self.bracket(&ek, &self.bracket(&ei, &ej));
                    if jac.norm() > 1e-10 {
                        return Err(Error::SpecViolation(format!(
                            "Jacobi identity fails at ({i},{j},{k}): {:.3e}",
                            jac.norm()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The abelian algebra of the given dimension.
    pub fn abelian(n: usize) -> Self {
        Self { ad: vec![Mat::zeros(n, n); n] }
    }

    /// so(3): [e1,e2] = e3 cyclic.
    pub fn so3() -> Self {
        let mut ad = vec![Mat::zeros(3, 3); 3];
        ad[0][(2, 1)] = 1.0;
        ad[0][(1, 2)] = -1.0;
        ad[1][(0, 2)] = 1.0;
        ad[1][(2, 0)] = -1.0;
        ad[2][(1, 0)] = 1.0;
        ad[2][(0, 1)] = -1.0;
        Self { ad }
    }

    /// Heisenberg: [e1,e2] = e3, everything else zero.
    pub fn heisenberg() -> Self {
        let mut ad = vec![Mat::zeros(3, 3); 3];
        ad[0][(2, 1)] = 1.0;
        ad[1][(2, 0)] = -1.0;
        Self { ad }
    }
}

/// Koszul formula for the left-invariant Levi-Civita connection:
/// <Gamma(X)Y, Z> = (-<X,[Y,Z]> + <Y,[Z,X]> + <Z,[X,Y]>) / 2.
/// Returns the matrices Gamma(e_i).
pub fn koszul_gamma(alg: &LieAlgebra, inner: &Bilinear) -> Result<Vec<Mat>> {
    let n = alg.dim();
    if inner.dim() != n {
        return Err(Error::ShapeError("koszul: inner product dimension mismatch".into()));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ei = LieAlgebra::basis(n, i);
        let mut gi = Mat::zeros(n, n);
        for j in 0..n {
            let ej = LieAlgebra::basis(n, j);
            let mut rhs = Vect::zeros(n);
            for l in 0..n {
                let el = LieAlgebra::basis(n, l);
                rhs[l] = 0.5
                    * (-inner.apply(&ei, &alg.bracket(&ej, &el))
                        + inner.apply(&ej, &alg.bracket(&el, &ei))
                        + inner.apply(&el, &alg.bracket(&ei, &ej)));
            }
            gi.set_column(j, &(inner.inv() * rhs));
        }
        out.push(gi);
    }
    Ok(out)
}

/// Tagged target-space catalog.
#[derive(Clone)]
pub enum ModelSpace {
    SpaceForm { curvature: f64, dim: usize, index: usize },
    ComplexSpaceForm { curvature: f64, dim: usize, index: usize },
    LieGroupLeftInvariant { algebra: LieAlgebra, inner: Bilinear, connection: LieConnection },
    EKappaTau { kappa: f64, tau: f64 },
    Product(Vec<ModelSpace>),
}

impl ModelSpace {
    pub fn dim(&self) -> usize {
        match self {
            ModelSpace::SpaceForm { dim, .. } => *dim,
            ModelSpace::ComplexSpaceForm { dim, .. } => *dim,
            ModelSpace::LieGroupLeftInvariant { algebra, .. } => algebra.dim(),
            ModelSpace::EKappaTau { .. } => 3,
            ModelSpace::Product(list) => list.iter().map(|m| m.dim()).sum(),
        }
    }

    pub fn index(&self) -> usize {
        match self {
            ModelSpace::SpaceForm { index, .. } => *index,
            ModelSpace::ComplexSpaceForm { index, .. } => *index,
            ModelSpace::LieGroupLeftInvariant { inner, .. } => inner.index(),
            ModelSpace::EKappaTau { .. } => 0,
            ModelSpace::Product(list) => list.iter().map(|m| m.index()).sum(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpace::SpaceForm { .. } => "space_form",
            ModelSpace::ComplexSpaceForm { .. } => "complex_space_form",
            ModelSpace::LieGroupLeftInvariant { .. } => "lie_group",
            ModelSpace::EKappaTau { .. } => "ekappatau",
            ModelSpace::Product(_) => "product",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpace::SpaceForm { dim, index, .. } => {
                if *dim == 0 || *index > *dim {
                    return Err(Error::UnsupportedModel("space form needs 0 <= index <= dim > 0".into()));
                }
            }
            ModelSpace::ComplexSpaceForm { dim, index, .. } => {
                if dim % 2 != 0 || index % 2 != 0 || *index > *dim {
                    return Err(Error::UnsupportedModel(
                        "complex space form needs even dim and even index".into(),
                    ));
                }
            }
            ModelSpace::LieGroupLeftInvariant { algebra, inner, .. } => {
                algebra.validate()?;
                if inner.dim() != algebra.dim() {
                    return Err(Error::ShapeError("lie group: inner product dimension mismatch".into()));
                }
            }
            ModelSpace::EKappaTau { .. } => {}
            ModelSpace::Product(list) => {
                if list.is_empty() {
                    return Err(Error::UnsupportedModel("empty product".into()));
                }
                for m in list.iter() {
                    m.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Christoffel matrices of the left-invariant connection on a Lie model.
    pub fn lie_gamma(&self) -> Result<Vec<Mat>> {
        match self {
            ModelSpace::LieGroupLeftInvariant { algebra, inner, connection } => match connection {
                LieConnection::LeviCivita => koszul_gamma(algebra, inner),
                LieConnection::Flat => Ok(vec![Mat::zeros(algebra.dim(), algebra.dim()); algebra.dim()]),
            },
            _ => Err(Error::UnsupportedModel("lie_gamma on a non-Lie model".into())),
        }
    }

    /// The standard G-structure on the model vector space R^dim.
    pub fn standard_structure(&self) -> StructureAt {
        match self {
            ModelSpace::SpaceForm { dim, index, .. } => {
                StructureAt::Orthonormal { g: Bilinear::minkowski(*dim, *index) }
            }
            ModelSpace::ComplexSpaceForm { dim, index, .. } => StructureAt::Unitary {
                g: Bilinear::new(unitary_model_form(*dim, *index), *index).expect("model form"),
                j: standard_complex_structure(*dim),
            },
            ModelSpace::LieGroupLeftInvariant { algebra, .. } => {
                StructureAt::TrivialFrame { frame: Mat::identity(algebra.dim(), algebra.dim()) }
            }
            ModelSpace::EKappaTau { .. } => StructureAt::OrientedUnitVector3 {
                g: Bilinear::euclidean(3),
                eps: Vect::from_vec(vec![1.0, 0.0, 0.0]),
                orientation: 1.0,
            },
            ModelSpace::Product(list) => StructureAt::Product {
                children: list.iter().map(|m| m.standard_structure()).collect(),
                dims: list.iter().map(|m| m.dim()).collect(),
            },
        }
    }

    /// Does a structure carry the auxiliary data this model's tensors need?
    pub fn check_structure(&self, s: &StructureAt) -> Result<()> {
        if s.dim() != self.dim() {
            return Err(Error::SpecViolation(format!(
                "structure dim {} vs model dim {}",
                s.dim(),
                self.dim()
            )));
        }
        let ok = match (self, s) {
            (ModelSpace::SpaceForm { index, .. }, StructureAt::Orthonormal { g }) => {
                g.index() == *index
            }
            (ModelSpace::ComplexSpaceForm { index, .. }, StructureAt::Unitary { g, .. }) => {
                g.index() == *index
            }
            (ModelSpace::LieGroupLeftInvariant { .. }, StructureAt::TrivialFrame { .. }) => true,
            (ModelSpace::EKappaTau { .. }, StructureAt::OrientedUnitVector3 { .. }) => true,
            (ModelSpace::Product(list), StructureAt::Product { children, .. }) => {
                list.len() == children.len()
                    && list.iter().zip(children.iter()).all(|(m, c)| m.check_structure(c).is_ok())
            }
            // a two-factor product of space forms is equivalently carried by
            // an adapted orthonormal structure (the first factor subspace)
            (ModelSpace::Product(list), StructureAt::AdaptedOrthonormal { g, basis, sub_index }) => {
                list.len() == 2
                    && matches!(list[0], ModelSpace::SpaceForm { .. })
                    && matches!(list[1], ModelSpace::SpaceForm { .. })
                    && basis.ncols() == list[0].dim()
                    && *sub_index == list[0].index()
                    && g.index() == self.index()
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::SpecViolation(format!(
                "model {} does not match structure variant",
                self.name()
            )))
        }
    }
}

/// Characteristic tensors of a model transported to a structured space.
pub struct CharTensors {
    model: ModelSpace,
    structure: StructureAt,
}

/// Build the transported tensors, validating the structure against the model.
pub fn characteristic_tensors(model: &ModelSpace, structure: &StructureAt) -> Result<CharTensors> {
    model.validate()?;
    structure.validate(tol::CONSTRAINT)?;
    model.check_structure(structure)?;
    Ok(CharTensors { model: model.clone(), structure: structure.clone() })
}

impl CharTensors {
    pub fn structure(&self) -> &StructureAt {
        &self.structure
    }

    /// Torsion value T_Z(v, w).
    pub fn torsion(&self, v: &Vect, w: &Vect) -> Result<Vect> {
        match (&self.model, &self.structure) {
            (ModelSpace::SpaceForm { .. }, _)
            | (ModelSpace::ComplexSpaceForm { .. }, _)
            | (ModelSpace::EKappaTau { .. }, _) => Ok(Vect::zeros(self.model.dim())),
            (ModelSpace::LieGroupLeftInvariant { algebra, .. }, StructureAt::TrivialFrame { frame }) => {
                let p_inv = checked_inverse(frame)?;
                let (a, b) = (&p_inv * v, &p_inv * w);
                let gs = self.model.lie_gamma()?;
                let mut t = -algebra.bracket(&a, &b);
                for i in 0..algebra.dim() {
                    t += &gs[i] * &b * a[i] - &gs[i] * &a * b[i];
                }
                Ok(frame * t)
            }
            (ModelSpace::Product(_), _) => {
                let mut out = Vect::zeros(self.model.dim());
                for (factor, basis, child) in self.factors()? {
                    let coords_v = Self::factor_coords(&basis, v)?;
                    let coords_w = Self::factor_coords(&basis, w)?;
                    let child_t = characteristic_tensors(&factor, &child)?;
                    out += &basis.0 * child_t.torsion(&coords_v, &coords_w)?;
                }
                Ok(out)
            }
            _ => Err(Error::SpecViolation("structure/model mismatch".into())),
        }
    }

    /// Curvature endomorphism R_Z(v, w).
    pub fn curvature(&self, v: &Vect, w: &Vect) -> Result<Mat> {
        let n = self.model.dim();
        match (&self.model, &self.structure) {
            (ModelSpace::SpaceForm { curvature: c, .. }, StructureAt::Orthonormal { g }) => {
                // R(v, w) u = c (<w, u> v - <v, u> w)
                let gv = g.gram() * v;
                let gw = g.gram() * w;
                Ok((v * gw.transpose() - w * gv.transpose()) * *c)
            }
            (ModelSpace::ComplexSpaceForm { curvature: c, .. }, StructureAt::Unitary { g, j }) => {
                // -c/4 (<z1,u> z2 - <z2,u> z1 - <z1,Ju> J z2 + <z2,Ju> J z1 - 2 <z1,J z2> J u)
                let gv = g.gram() * v;
                let gw = g.gram() * w;
                let jv = j * v;
                let jw = j * w;
                let gjv = g.gram() * &jv;
                let gjw = g.gram() * &jw;
                let vjw = g.apply(v, &jw);
                let m = w * gv.transpose() - v * gw.transpose() + &jw * gjv.transpose()
                    - &jv * gjw.transpose()
                    - j * (2.0 * vjw);
                Ok(m * (-c / 4.0))
            }
            (ModelSpace::LieGroupLeftInvariant { algebra, .. }, StructureAt::TrivialFrame { frame }) => {
                let p_inv = checked_inverse(frame)?;
                let (a, b) = (&p_inv * v, &p_inv * w);
                let gs = self.model.lie_gamma()?;
                let mut ga = Mat::zeros(n, n);
                let mut gb = Mat::zeros(n, n);
                for i in 0..n {
                    ga += &gs[i] * a[i];
                    gb += &gs[i] * b[i];
                }
                let br = algebra.bracket(&a, &b);
                let mut gbr = Mat::zeros(n, n);
                for i in 0..n {
                    gbr += &gs[i] * br[i];
                }
                let r = &ga * &gb - &gb * &ga - gbr;
                Ok(frame * r * p_inv)
            }
            (ModelSpace::EKappaTau { kappa, tau }, StructureAt::OrientedUnitVector3 { g, eps, .. }) => {
                // R(v,w)u = (kappa - 3 tau^2)(<w,u> v - <v,u> w)
                //   + (kappa - 4 tau^2)(<v,z><u,z> w - <w,z><u,z> v
                //                       + <v,u><w,z> z - <w,u><v,z> z)
                let a = kappa - 3.0 * tau * tau;
                let b = kappa - 4.0 * tau * tau;
                let gv = g.gram() * v;
                let gw = g.gram() * w;
                let gz = g.gram() * eps;
                let vz = g.apply(v, eps);
                let wz = g.apply(w, eps);
                let m = (v * gw.transpose() - w * gv.transpose()) * a
                    + (w * gz.transpose() * vz - v * gz.transpose() * wz
                        + eps * gv.transpose() * wz
                        - eps * gw.transpose() * vz)
                        * b;
                Ok(m)
            }
            (ModelSpace::Product(_), _) => {
                let mut out = Mat::zeros(n, n);
                for (factor, basis, child) in self.factors()? {
                    let coords_v = Self::factor_coords(&basis, v)?;
                    let coords_w = Self::factor_coords(&basis, w)?;
                    let child_t = characteristic_tensors(&factor, &child)?;
                    let r = child_t.curvature(&coords_v, &coords_w)?;
                    out += &basis.0 * r * &basis.1;
                }
                Ok(out)
            }
            _ => Err(Error::SpecViolation("structure/model mismatch".into())),
        }
    }

    pub fn curvature_apply(&self, v: &Vect, w: &Vect, u: &Vect) -> Result<Vect> {
        Ok(self.curvature(v, w)? * u)
    }

    /// Inner torsion class In_Z(v) in the structure's quotient representation.
    pub fn inner(&self, v: &Vect) -> Result<QuotientRepr> {
        match (&self.model, &self.structure) {
            (ModelSpace::SpaceForm { .. }, _) | (ModelSpace::ComplexSpaceForm { .. }, _) => {
                Ok(self.structure.zero_class())
            }
            (ModelSpace::LieGroupLeftInvariant { .. }, StructureAt::TrivialFrame { frame }) => {
                let p_inv = checked_inverse(frame)?;
                let a = &p_inv * v;
                let gs = self.model.lie_gamma()?;
                let n = self.model.dim();
                let mut ga = Mat::zeros(n, n);
                for i in 0..n {
                    ga += &gs[i] * a[i];
                }
                Ok(QuotientRepr::Full(frame * ga * p_inv))
            }
            (ModelSpace::EKappaTau { tau, .. }, StructureAt::OrientedUnitVector3 { g, eps, orientation }) => {
                let cross = g.cross(v, eps, *orientation)?;
                Ok(QuotientRepr::SymPlusPerp(Mat::zeros(3, 3), cross * *tau))
            }
            (ModelSpace::Product(list), StructureAt::Product { children, .. }) => {
                let n = self.model.dim();
                let mut reprs = Vec::new();
                let mut offset = 0usize;
                for (factor, child) in list.iter().zip(children.iter()) {
                    let d = factor.dim();
                    let sub_v = Vect::from_fn(d, |i, _| v[offset + i]);
                    let child_t = characteristic_tensors(factor, child)?;
                    reprs.push(child_t.inner(&sub_v)?);
                    offset += d;
                }
                Ok(QuotientRepr::DirectSum { children: reprs, off_diag: Mat::zeros(n, n) })
            }
            (ModelSpace::Product(_), StructureAt::AdaptedOrthonormal { .. }) => {
                // both space-form factors have vanishing inner torsion
                Ok(self.structure.zero_class())
            }
            _ => Err(Error::SpecViolation("structure/model mismatch".into())),
        }
    }

    /// Admissibility defect of a pulled-back form value (u, X): the distance
    /// between the class of X and In_Z(u).
    pub fn admissibility_residual(&self, u: &Vect, x_omega: &Mat) -> Result<f64> {
        let class = self.structure.quotient_project(x_omega)?;
        class.distance(&self.inner(u)?)
    }

    /// Factor decomposition of a product structure: (factor model,
    /// (embedding, coordinate-extraction) bases, child structure).
    #[allow(clippy::type_complexity)]
    fn factors(&self) -> Result<Vec<(ModelSpace, (Mat, Mat), StructureAt)>> {
        let ModelSpace::Product(list) = &self.model else {
            return Err(Error::SpecViolation("factors() on a non-product".into()));
        };
        let n = self.model.dim();
        match &self.structure {
            StructureAt::Product { children, .. } => {
                let mut out = Vec::new();
                let mut offset = 0usize;
                for (factor, child) in list.iter().zip(children.iter()) {
                    let d = factor.dim();
                    let mut emb = Mat::zeros(n, d);
                    for i in 0..d {
                        emb[(offset + i, i)] = 1.0;
                    }
                    out.push((factor.clone(), (emb.clone(), emb.transpose()), child.clone()));
                    offset += d;
                }
                Ok(out)
            }
            StructureAt::AdaptedOrthonormal { g, basis, sub_index } => {
                // two space-form factors on F and its g-orthogonal complement
                let l = basis.ncols();
                let gf = basis.transpose() * g.gram() * basis;
                let gf = (&gf + gf.transpose()) * 0.5;
                let g1 = Bilinear::new(gf, *sub_index)?;
                let gf_inv = checked_inverse(g1.gram())?;
                let coords1 = &gf_inv * basis.transpose() * g.gram();
                // complement basis from the adapted frame construction
                let full = self.structure.structural_frame()?;
                let comp = full.view((0, l), (n, n - l)).into_owned();
                let gc = comp.transpose() * g.gram() * &comp;
                let gc = (&gc + gc.transpose()) * 0.5;
                let g2 = Bilinear::new(gc.clone(), g.index() - sub_index)?;
                let gc_inv = checked_inverse(&gc)?;
                let coords2 = &gc_inv * comp.transpose() * g.gram();
                Ok(vec![
                    (
                        list[0].clone(),
                        (basis.clone(), coords1),
                        StructureAt::Orthonormal { g: g1 },
                    ),
                    (
                        list[1].clone(),
                        (comp, coords2),
                        StructureAt::Orthonormal { g: g2 },
                    ),
                ])
            }
            _ => Err(Error::SpecViolation("product structure required".into())),
        }
    }

    fn factor_coords(basis: &(Mat, Mat), v: &Vect) -> Result<Vect> {
        Ok(&basis.1 * v)
    }
}
