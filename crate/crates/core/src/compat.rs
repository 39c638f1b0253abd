//! Pointwise residuals of the compatibility system: Gauss, Ricci, the two
//! Codazzi equations, the two torsion equations, and the inner-torsion
//! equation, evaluated against the target's characteristic tensors on the
//! Whitney sum. All of it is computable with no immersion in hand.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chart::{
    curvature_endo, nabla_otimes_a0, nabla_otimes_alpha, torsion_at, DiffParams, WhitneyData,
};
use crate::error::{Error, Result};
use crate::gstructure::{GStructureSpec, QuotientRepr};
use crate::models::{characteristic_tensors, CharTensors, ModelSpace};
use crate::tensor::{Bilinear, Mat, Vect};

/// Everything a residual evaluation needs: the source-side data, the target
/// model, and the structure on the Whitney sum the target structure is
/// matched against.
pub struct Compat {
    pub data: WhitneyData,
    pub model: ModelSpace,
    pub structure: GStructureSpec,
    pub dp: DiffParams,
    hat_conn: crate::chart::ConnectionField,
}

impl Compat {
    pub fn new(data: WhitneyData, model: ModelSpace, structure: GStructureSpec) -> Result<Self> {
        data.validate()?;
        model.validate()?;
        if model.dim() != data.total_rank() {
            return Err(Error::ShapeError(format!(
                "target dim {} but n + k = {}",
                model.dim(),
                data.total_rank()
            )));
        }
        let dp = DiffParams { step: data.grid.fd_step(), order: crate::fd::FdOrder::Four };
        let hat_conn = crate::chart::assemble_whitney(&data)?;
        Ok(Self { data, model, structure, dp, hat_conn })
    }

    /// The assembled Whitney-sum connection.
    pub fn whitney_connection(&self) -> &crate::chart::ConnectionField {
        &self.hat_conn
    }

    pub(crate) fn embed(&self, v: &Vect) -> Vect {
        let mut out = Vect::zeros(self.data.total_rank());
        for i in 0..v.len() {
            out[i] = v[i];
        }
        out
    }

    fn tangent_part(&self, w: &Vect) -> Vect {
        Vect::from_fn(self.data.dim_m, |i, _| w[i])
    }

    fn normal_part(&self, w: &Vect) -> Vect {
        Vect::from_fn(self.data.rank_e0, |i, _| w[self.data.dim_m + i])
    }

    /// Target characteristic tensors on the Whitney fiber at x.
    pub fn target_tensors(&self, x: &Vect) -> Result<CharTensors> {
        characteristic_tensors(&self.model, &self.structure.at(x)?)
    }

    fn alpha(&self, x: &Vect, v: &Vect, w: &Vect) -> Vect {
        self.data.alpha0.apply(x, v, w)
    }

    fn weingarten(&self, x: &Vect, v: &Vect, e: &Vect) -> Result<Vect> {
        let mats = self.data.a0_mats(x)?;
        let mut out = Vect::zeros(self.data.dim_m);
        for i in 0..v.len() {
            if v[i] != 0.0 {
                out += &mats[i] * e * v[i];
            }
        }
        Ok(out)
    }

    /// Gauss equation defect (tangent part), affine form.
    pub fn gauss_residual(&self, x: &Vect, v: &Vect, w: &Vect, u: &Vect) -> Result<Vect> {
        let t = self.target_tensors(x)?;
        let lhs = self.tangent_part(&t.curvature_apply(&self.embed(v), &self.embed(w), &self.embed(u))?);
        let r = curvature_endo(&self.data.tangent_conn, &self.data.grid, x, v, w, self.dp)? * u;
        let rhs = r + self.weingarten(x, v, &self.alpha(x, w, u))?
            - self.weingarten(x, w, &self.alpha(x, v, u))?;
        Ok(lhs - rhs)
    }

    /// Gauss equation defect, metric form (paired with z through the metrics).
    pub fn gauss_residual_metric(
        &self,
        x: &Vect,
        v: &Vect,
        w: &Vect,
        u: &Vect,
        z: &Vect,
    ) -> Result<f64> {
        let (g, g0) = self.metrics_at(x)?;
        let t = self.target_tensors(x)?;
        let rbar = t.curvature_apply(&self.embed(v), &self.embed(w), &self.embed(u))?;
        let ghat = self.whitney_form(&g, &g0);
        let lhs = ghat.apply(&rbar, &self.embed(z));
        let r = curvature_endo(&self.data.tangent_conn, &self.data.grid, x, v, w, self.dp)? * u;
        let rhs = g.apply(&r, z) - g0.apply(&self.alpha(x, w, u), &self.alpha(x, v, z))
            + g0.apply(&self.alpha(x, v, u), &self.alpha(x, w, z));
        Ok(lhs - rhs)
    }

    /// Ricci equation defect (normal part), affine form.
    pub fn ricci_residual(&self, x: &Vect, v: &Vect, w: &Vect, e: &Vect) -> Result<Vect> {
        let t = self.target_tensors(x)?;
        let mut ehat = Vect::zeros(self.data.total_rank());
        for i in 0..e.len() {
            ehat[self.data.dim_m + i] = e[i];
        }
        let lhs = self.normal_part(&t.curvature_apply(&self.embed(v), &self.embed(w), &ehat)?);
        let r0 = curvature_endo(&self.data.normal_conn, &self.data.grid, x, v, w, self.dp)? * e;
        let rhs = r0 + self.alpha(x, v, &self.weingarten(x, w, e)?)
            - self.alpha(x, w, &self.weingarten(x, v, e)?);
        Ok(lhs - rhs)
    }

    /// Ricci equation defect, metric form.
    pub fn ricci_residual_metric(
        &self,
        x: &Vect,
        v: &Vect,
        w: &Vect,
        e: &Vect,
        e2: &Vect,
    ) -> Result<f64> {
        let (g, g0) = self.metrics_at(x)?;
        let t = self.target_tensors(x)?;
        let mut ehat = Vect::zeros(self.data.total_rank());
        for i in 0..e.len() {
            ehat[self.data.dim_m + i] = e[i];
        }
        let ghat = self.whitney_form(&g, &g0);
        let mut e2hat = Vect::zeros(self.data.total_rank());
        for i in 0..e2.len() {
            e2hat[self.data.dim_m + i] = e2[i];
        }
        let lhs = ghat.apply(
            &t.curvature_apply(&self.embed(v), &self.embed(w), &ehat)?,
            &e2hat,
        );
        let r0 = curvature_endo(&self.data.normal_conn, &self.data.grid, x, v, w, self.dp)? * e;
        let a_e = self.data.weingarten_operator(x, e)?;
        let a_e2 = self.data.weingarten_operator(x, e2)?;
        let a_e2_star = g.transpose_of(&a_e2)?;
        let rhs = g0.apply(&r0, e2) + g.apply(&(&a_e * v), &(a_e2_star * w))
            - g.apply(&(&a_e * w), &(&a_e2 * v));
        Ok(lhs - rhs)
    }

    /// First Codazzi equation defect (normal part of the target curvature on
    /// three tangent slots).
    pub fn codazzi_residual(&self, x: &Vect, v: &Vect, w: &Vect, u: &Vect) -> Result<Vect> {
        let t = self.target_tensors(x)?;
        let lhs = self.normal_part(&t.curvature_apply(&self.embed(v), &self.embed(w), &self.embed(u))?);
        let na = nabla_otimes_alpha(&self.data, &self.data.grid, x, self.dp)?;
        let n = self.data.dim_m;
        let k = self.data.rank_e0;
        let mut d_vw = Vect::zeros(k);
        let mut d_wv = Vect::zeros(k);
        for i in 0..n {
            for j in 0..n {
                if v[i] * w[j] != 0.0 {
                    d_vw += &na[i][j] * u * (v[i] * w[j]);
                    d_wv += &na[j][i] * u * (v[i] * w[j]);
                }
            }
        }
        let tors = torsion_at(&self.data.tangent_conn, x, v, w);
        let rhs = d_vw - d_wv + self.alpha(x, &tors, u);
        Ok(lhs - rhs)
    }

    /// Second Codazzi equation defect (tangent part on two tangent slots and
    /// one fiber slot), using the Weingarten data.
    pub fn codazzi2_residual(&self, x: &Vect, v: &Vect, w: &Vect, e: &Vect) -> Result<Vect> {
        let t = self.target_tensors(x)?;
        let mut ehat = Vect::zeros(self.data.total_rank());
        for i in 0..e.len() {
            ehat[self.data.dim_m + i] = e[i];
        }
        let lhs = self.tangent_part(&t.curvature_apply(&self.embed(v), &self.embed(w), &ehat)?);
        let na = nabla_otimes_a0(&self.data, &self.data.grid, x, self.dp)?;
        let n = self.data.dim_m;
        let mut d_vw = Vect::zeros(n);
        let mut d_wv = Vect::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if v[i] * w[j] != 0.0 {
                    d_vw += &na[i][j] * e * (v[i] * w[j]);
                    d_wv += &na[j][i] * e * (v[i] * w[j]);
                }
            }
        }
        let tors = torsion_at(&self.data.tangent_conn, x, v, w);
        let rhs = d_vw - d_wv + self.weingarten(x, &tors, e)?;
        Ok(lhs - rhs)
    }

    /// Codazzi equation defect, metric form.
    pub fn codazzi_residual_metric(
        &self,
        x: &Vect,
        v: &Vect,
        w: &Vect,
        u: &Vect,
        e: &Vect,
    ) -> Result<f64> {
        let (g, g0) = self.metrics_at(x)?;
        let t = self.target_tensors(x)?;
        let mut ehat = Vect::zeros(self.data.total_rank());
        for i in 0..e.len() {
            ehat[self.data.dim_m + i] = e[i];
        }
        let ghat = self.whitney_form(&g, &g0);
        let lhs = ghat.apply(
            &t.curvature_apply(&self.embed(v), &self.embed(w), &self.embed(u))?,
            &ehat,
        );
        let na = nabla_otimes_alpha(&self.data, &self.data.grid, x, self.dp)?;
        let n = self.data.dim_m;
        let k = self.data.rank_e0;
        let mut diff = Vect::zeros(k);
        for i in 0..n {
            for j in 0..n {
                if v[i] * w[j] != 0.0 {
                    diff += (&na[i][j] - &na[j][i]) * u * (v[i] * w[j]);
                }
            }
        }
        Ok(lhs - g0.apply(&diff, e))
    }

    /// Torsion equation defects: tangent part against the source torsion and
    /// fiber part against the antisymmetric part of alpha0.
    pub fn torsion_residuals(&self, x: &Vect, v: &Vect, w: &Vect) -> Result<(Vect, Vect)> {
        let t = self.target_tensors(x)?;
        let tbar = t.torsion(&self.embed(v), &self.embed(w))?;
        let lhs_t = self.tangent_part(&tbar);
        let lhs_n = self.normal_part(&tbar);
        let tors = torsion_at(&self.data.tangent_conn, x, v, w);
        let asym = self.alpha(x, v, w) - self.alpha(x, w, v);
        Ok((lhs_t - tors, lhs_n - asym))
    }

    /// Inner-torsion equation defect: the target's inner torsion on the
    /// Whitney fiber against the structure's inner torsion under the
    /// assembled connection.
    pub fn inner_torsion_residual(&self, x: &Vect, v: &Vect) -> Result<QuotientRepr> {
        let t = self.target_tensors(x)?;
        let lhs = t.inner(&self.embed(v))?;
        let rhs = self.structure.inner_torsion(&self.hat_conn, &self.data.grid, x, v, self.dp)?;
        lhs.sub(&rhs)
    }

    fn metrics_at(&self, x: &Vect) -> Result<(Bilinear, Bilinear)> {
        let g = self
            .data
            .metric
            .as_ref()
            .ok_or_else(|| Error::SpecViolation("metric form needs g".into()))?
            .at(x)?;
        let g0 = self
            .data
            .metric0
            .as_ref()
            .ok_or_else(|| Error::SpecViolation("metric form needs g0".into()))?
            .at(x)?;
        Ok((g, g0))
    }

    fn whitney_form(&self, g: &Bilinear, g0: &Bilinear) -> Bilinear {
        let n = self.data.dim_m;
        let k = self.data.rank_e0;
        let mut gram = Mat::zeros(n + k, n + k);
        gram.view_mut((0, 0), (n, n)).copy_from(g.gram());
        gram.view_mut((n, n), (k, k)).copy_from(g0.gram());
        Bilinear::new(gram, g.index() + g0.index()).expect("whitney form")
    }
}

/// Spec-facing Weingarten solve: the unique A0 with
/// g0(alpha0(v,w), e) = -g(A0(e) v, w); returns the per-direction matrices.
pub fn weingarten_from_alpha(
    g: &Bilinear,
    g0: &Bilinear,
    alpha_mats: &[Mat],
) -> Vec<Mat> {
    crate::chart::solve_weingarten(g, g0, alpha_mats)
}


/// Per-node cache of everything the residual families need, so sampling many
/// tuples per node costs only small contractions.
pub struct NodeResiduals {
    n: usize,
    k: usize,
    /// target curvature endos on embedded tangent basis pairs, R[i][j], i < j
    rbar: Vec<Vec<Mat>>,
    /// target torsion on embedded basis pairs
    tbar: Vec<Vec<Vect>>,
    /// source curvature endos per pair
    r: Vec<Vec<Mat>>,
    /// normal curvature endos per pair
    r0: Vec<Vec<Mat>>,
    /// alpha0 matrices per direction
    alpha: Vec<Mat>,
    /// Weingarten matrices per direction
    a0: Vec<Mat>,
    /// tangent torsion values per pair
    tors: Vec<Vec<Vect>>,
    /// covariant derivative tables of alpha0 and A0
    na: Vec<Vec<Mat>>,
    na2: Vec<Vec<Mat>>,
    /// inner-torsion classes per coordinate direction (target, structure)
    inner_lhs: Vec<QuotientRepr>,
    inner_rhs: Vec<QuotientRepr>,
}

impl NodeResiduals {
    pub fn new(compat: &Compat, x: &Vect) -> Result<Self> {
        let n = compat.data.dim_m;
        let k = compat.data.rank_e0;
        let t = compat.target_tensors(x)?;
        let basis = |d: usize, i: usize| Vect::from_fn(d, |r, _| if r == i { 1.0 } else { 0.0 });
        let mut rbar = vec![vec![Mat::zeros(n + k, n + k); n]; n];
        let mut tbar = vec![vec![Vect::zeros(n + k); n]; n];
        let mut r = vec![vec![Mat::zeros(n, n); n]; n];
        let mut r0 = vec![vec![Mat::zeros(k, k); n]; n];
        let mut tors = vec![vec![Vect::zeros(n); n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (ei, ej) = (basis(n, i), basis(n, j));
                rbar[i][j] = t.curvature(&compat.embed(&ei), &compat.embed(&ej))?;
                tbar[i][j] = t.torsion(&compat.embed(&ei), &compat.embed(&ej))?;
                r[i][j] = curvature_endo(&compat.data.tangent_conn, &compat.data.grid, x, &ei, &ej, compat.dp)?;
                r0[i][j] = curvature_endo(&compat.data.normal_conn, &compat.data.grid, x, &ei, &ej, compat.dp)?;
                tors[i][j] = torsion_at(&compat.data.tangent_conn, x, &ei, &ej);
            }
        }
        let alpha = compat.data.alpha0.mats(x);
        let a0 = compat.data.a0_mats(x)?;
        let na = nabla_otimes_alpha(&compat.data, &compat.data.grid, x, compat.dp)?;
        let na2 = nabla_otimes_a0(&compat.data, &compat.data.grid, x, compat.dp)?;
        let mut inner_lhs = Vec::with_capacity(n);
        let mut inner_rhs = Vec::with_capacity(n);
        for i in 0..n {
            let ei = basis(n, i);
            inner_lhs.push(t.inner(&compat.embed(&ei))?);
            inner_rhs.push(compat.structure.inner_torsion(
                compat.whitney_connection(),
                &compat.data.grid,
                x,
                &ei,
                compat.dp,
            )?);
        }
        Ok(Self { n, k, rbar, tbar, r, r0, alpha, a0, tors, na, na2, inner_lhs, inner_rhs })
    }

    fn pair_sum<T: crate::fd::Linear>(&self, table: &[Vec<T>], v: &Vect, w: &Vect) -> T {
        let mut out = table[0][1].zeros_like();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let c = v[i] * w[j] - v[j] * w[i];
                if c != 0.0 {
                    out.axpy(c, &table[i][j]);
                }
            }
        }
        out
    }

    fn alpha_of(&self, v: &Vect, w: &Vect) -> Vect {
        let mut out = Vect::zeros(self.k);
        for i in 0..self.n {
            if v[i] != 0.0 {
                out += &self.alpha[i] * w * v[i];
            }
        }
        out
    }

    fn wein_of(&self, v: &Vect, e: &Vect) -> Vect {
        let mut out = Vect::zeros(self.n);
        for i in 0..self.n {
            if v[i] != 0.0 {
                out += &self.a0[i] * e * v[i];
            }
        }
        out
    }

    pub fn gauss(&self, v: &Vect, w: &Vect, u: &Vect) -> Vect {
        let rb: Mat = self.pair_sum(&self.rbar, v, w);
        let lhs = Vect::from_fn(self.n, |i, _| {
            let mut acc = 0.0;
            for c in 0..self.n {
                acc += rb[(i, c)] * u[c];
            }
            acc
        });
        let r: Mat = self.pair_sum(&self.r, v, w);
        let rhs = r * u + self.wein_of(v, &self.alpha_of(w, u)) - self.wein_of(w, &self.alpha_of(v, u));
        lhs - rhs
    }

    pub fn ricci(&self, v: &Vect, w: &Vect, e: &Vect) -> Vect {
        let rb: Mat = self.pair_sum(&self.rbar, v, w);
        let lhs = Vect::from_fn(self.k, |i, _| {
            let mut acc = 0.0;
            for c in 0..self.k {
                acc += rb[(self.n + i, self.n + c)] * e[c];
            }
            acc
        });
        let r0: Mat = self.pair_sum(&self.r0, v, w);
        let rhs = r0 * e + self.alpha_of(v, &self.wein_of(w, e)) - self.alpha_of(w, &self.wein_of(v, e));
        lhs - rhs
    }

    pub fn codazzi(&self, v: &Vect, w: &Vect, u: &Vect) -> Vect {
        let rb: Mat = self.pair_sum(&self.rbar, v, w);
        let lhs = Vect::from_fn(self.k, |i, _| {
            let mut acc = 0.0;
            for c in 0..self.n {
                acc += rb[(self.n + i, c)] * u[c];
            }
            acc
        });
        let mut diff = Vect::zeros(self.k);
        for i in 0..self.n {
            for j in 0..self.n {
                let c = v[i] * w[j];
                if c != 0.0 {
                    diff += (&self.na[i][j] - &self.na[j][i]) * u * c;
                }
            }
        }
        let tors: Vect = self.pair_sum(&self.tors, v, w);
        lhs - (diff + self.alpha_of(&tors, u))
    }

    pub fn codazzi2(&self, v: &Vect, w: &Vect, e: &Vect) -> Vect {
        let rb: Mat = self.pair_sum(&self.rbar, v, w);
        let lhs = Vect::from_fn(self.n, |i, _| {
            let mut acc = 0.0;
            for c in 0..self.k {
                acc += rb[(i, self.n + c)] * e[c];
            }
            acc
        });
        let mut diff = Vect::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let c = v[i] * w[j];
                if c != 0.0 {
                    diff += (&self.na2[i][j] - &self.na2[j][i]) * e * c;
                }
            }
        }
        let tors: Vect = self.pair_sum(&self.tors, v, w);
        lhs - (diff + self.wein_of(&tors, e))
    }

    pub fn torsion(&self, v: &Vect, w: &Vect) -> (Vect, Vect) {
        let tb: Vect = self.pair_sum(&self.tbar, v, w);
        let lhs_t = Vect::from_fn(self.n, |i, _| tb[i]);
        let lhs_n = Vect::from_fn(self.k, |i, _| tb[self.n + i]);
        let tors: Vect = self.pair_sum(&self.tors, v, w);
        let asym = self.alpha_of(v, w) - self.alpha_of(w, v);
        (lhs_t - tors, lhs_n - asym)
    }

    pub fn inner(&self, v: &Vect) -> Result<QuotientRepr> {
        let mut out: Option<QuotientRepr> = None;
        for i in 0..self.n {
            if v[i] == 0.0 && out.is_some() {
                continue;
            }
            let term = self.inner_lhs[i].sub(&self.inner_rhs[i])?;
            out = Some(match out {
                None => scale_repr(&term, v[i]),
                Some(acc) => add_repr(&acc, &scale_repr(&term, v[i]))?,
            });
        }
        Ok(out.expect("at least one direction"))
    }
}

fn scale_repr(q: &QuotientRepr, c: f64) -> QuotientRepr {
    use QuotientRepr::*;
    match q {
        Full(m) => Full(m * c),
        Sym(m) => Sym(m * c),
        HomToQuotient(m) => HomToQuotient(m * c),
        SymPlusHom(a, b) => SymPlusHom(a * c, b * c),
        Vector(v) => Vector(v * c),
        SymPlusPerp(a, v) => SymPlusPerp(a * c, v * c),
        AntiCommuting(m) => AntiCommuting(m * c),
        SymPlusAntiCommuting(a, b) => SymPlusAntiCommuting(a * c, b * c),
        DirectSum { children, off_diag } => DirectSum {
            children: children.iter().map(|x| scale_repr(x, c)).collect(),
            off_diag: off_diag * c,
        },
    }
}

fn add_repr(a: &QuotientRepr, b: &QuotientRepr) -> Result<QuotientRepr> {
    a.sub(&scale_repr(b, -1.0))
}

/// Statistics of one equation family over the sampled tuples.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyStats {
    pub name: String,
    pub max: f64,
    pub rms: f64,
    pub samples: usize,
    pub worst_node: Vec<usize>,
}

impl FamilyStats {
    fn new(name: &str) -> Self {
        Self { name: name.into(), max: 0.0, rms: 0.0, samples: 0, worst_node: Vec::new() }
    }

    fn push(&mut self, value: f64, node: &[usize]) {
        if value > self.max {
            self.max = value;
            self.worst_node = node.to_vec();
        }
        self.rms += value * value;
        self.samples += 1;
    }

    fn finish(&mut self) {
        if self.samples > 0 {
            self.rms = (self.rms / self.samples as f64).sqrt();
        }
    }
}

/// Residuals of all seven equation families over a sampled set of tuples.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub families: Vec<FamilyStats>,
    pub seed: u64,
    pub nodes_sampled: usize,
}

impl ResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.families.iter().fold(0.0, |a, f| a.max(f.max))
    }

    pub fn worst_family(&self) -> &str {
        self.families
            .iter()
            .max_by(|a, b| a.max.total_cmp(&b.max))
            .map(|f| f.name.as_str())
            .unwrap_or("none")
    }

    pub fn family(&self, name: &str) -> Option<&FamilyStats> {
        self.families.iter().find(|f| f.name == name)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "residual report ({} nodes, seed {})\n",
            self.nodes_sampled, self.seed
        ));
        for f in &self.families {
            out.push_str(&format!(
                "  {:<14} max {:.3e}  rms {:.3e}  ({} samples, worst node {:?})\n",
                f.name, f.max, f.rms, f.samples, f.worst_node
            ));
        }
        out
    }
}

/// Deterministic sampling plan for residual evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SamplePlan {
    pub seed: u64,
    pub random_tuples_per_node: usize,
    pub node_stride: usize,
    pub margin_nodes: usize,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self { seed: 42, random_tuples_per_node: 8, node_stride: 1, margin_nodes: 1 }
    }
}

/// Evaluate every family on basis tuples plus seeded random tuples per node.
pub fn full_report(compat: &Compat, plan: SamplePlan) -> Result<ResidualReport> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let n = compat.data.dim_m;
    let k = compat.data.rank_e0;
    let grid = compat.data.grid.clone();
    let mut fams = vec![
        FamilyStats::new("gauss"),
        FamilyStats::new("ricci"),
        FamilyStats::new("codazzi"),
        FamilyStats::new("codazzi2"),
        FamilyStats::new("torsion_tangent"),
        FamilyStats::new("torsion_normal"),
        FamilyStats::new("inner_torsion"),
    ];
    let nodes: Vec<Vec<usize>> = grid
        .interior_nodes(plan.margin_nodes)
        .into_iter()
        .step_by(plan.node_stride.max(1))
        .collect();
    if nodes.is_empty() {
        return Err(Error::OutOfDomain("no interior nodes to sample".into()));
    }
    let basis = |d: usize, i: usize| Vect::from_fn(d, |r, _| if r == i { 1.0 } else { 0.0 });
    for multi in nodes.iter() {
        let x = grid.node(multi);
        let node = NodeResiduals::new(compat, &x)?;
        let mut tuples: Vec<(Vect, Vect, Vect, Vect)> = Vec::new();
        // basis tuples: all (e_i, e_j) pairs with a fixed third/fiber slot
        for i in 0..n {
            for j in (i + 1)..n {
                tuples.push((basis(n, i), basis(n, j), basis(n, 0), basis(k, 0)));
            }
        }
        for _ in 0..plan.random_tuples_per_node {
            let rv = |rng: &mut ChaCha8Rng, d: usize| {
                Vect::from_fn(d, |_, _| rng.gen_range(-1.0..1.0))
            };
            tuples.push((rv(&mut rng, n), rv(&mut rng, n), rv(&mut rng, n), rv(&mut rng, k)));
        }
        for (v, w, u, e) in tuples {
            fams[0].push(node.gauss(&v, &w, &u).norm(), multi);
            fams[1].push(node.ricci(&v, &w, &e).norm(), multi);
            fams[2].push(node.codazzi(&v, &w, &u).norm(), multi);
            fams[3].push(node.codazzi2(&v, &w, &e).norm(), multi);
            let (tt, tn) = node.torsion(&v, &w);
            fams[4].push(tt.norm(), multi);
            fams[5].push(tn.norm(), multi);
            fams[6].push(node.inner(&v)?.norm(), multi);
        }
    }
    for f in fams.iter_mut() {
        f.finish();
    }
    Ok(ResidualReport { families: fams, seed: plan.seed, nodes_sampled: nodes.len() })
}
