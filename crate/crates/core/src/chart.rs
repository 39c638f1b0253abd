//! Sampled rectangular charts and the fields living on them: metrics,
//! connections (as Christoffel data in the coordinate frame), bilinear bundle
//! maps, and the Whitney-sum connection assembled from immersion data.
//!
//! Conventions: a connection on a rank-k bundle over an n-dimensional chart
//! is stored as n matrices `gamma[i]` of size k x k, the endomorphism
//! Gamma(e_i) in the coordinate trivialization. Differential operators never
//! extrapolate: a point within one stencil width of the boundary is an error.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fd::{self, FdOrder, Linear};
use crate::tensor::{checked_inverse, tol, Bilinear, Mat, Vect};

/// Rectangular sampled coordinate domain.
#[derive(Debug, Clone)]
pub struct ChartGrid {
    min: Vect,
    max: Vect,
    samples: Vec<usize>,
}

impl ChartGrid {
    pub fn new(min: Vect, max: Vect, samples: Vec<usize>) -> Result<Self> {
        let n = min.len();
        if max.len() != n || samples.len() != n || n == 0 {
            return Err(Error::ShapeError("chart: min/max/samples lengths differ".into()));
        }
        for i in 0..n {
            if !(max[i] > min[i]) {
                return Err(Error::ShapeError(format!("chart: max <= min on axis {i}")));
            }
            if samples[i] < 3 {
                return Err(Error::ShapeError(format!(
                    "chart: need >= 3 samples on axis {i} for central differences"
                )));
            }
        }
        Ok(Self { min, max, samples })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    pub fn min(&self) -> &Vect {
        &self.min
    }

    pub fn max(&self) -> &Vect {
        &self.max
    }

    /// Node spacing per axis.
    pub fn spacing(&self) -> Vect {
        Vect::from_fn(self.dim(), |i, _| {
            (self.max[i] - self.min[i]) / (self.samples[i] - 1) as f64
        })
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Step for central differences of closed-form fields.
    pub fn fd_step(&self) -> f64 {
        (self.min_spacing() / 100.0).max(1e-5)
    }

    pub fn node_count(&self) -> usize {
        self.samples.iter().product()
    }

    /// Flat index with the last axis fastest.
    pub fn index_of(&self, multi: &[usize]) -> usize {
        let mut idx = 0usize;
        for (i, &m) in multi.iter().enumerate() {
            idx = idx * self.samples[i] + m;
        }
        idx
    }

    pub fn multi_of(&self, mut idx: usize) -> Vec<usize> {
        let n = self.dim();
        let mut multi = vec![0usize; n];
        for i in (0..n).rev() {
            multi[i] = idx % self.samples[i];
            idx /= self.samples[i];
        }
        multi
    }

    pub fn node(&self, multi: &[usize]) -> Vect {
        let h = self.spacing();
        Vect::from_fn(self.dim(), |i, _| self.min[i] + h[i] * multi[i] as f64)
    }

    pub fn nearest_node(&self, x: &Vect) -> Vec<usize> {
        let h = self.spacing();
        (0..self.dim())
            .map(|i| {
                let t = ((x[i] - self.min[i]) / h[i]).round();
                (t.max(0.0) as usize).min(self.samples[i] - 1)
            })
            .collect()
    }

    pub fn contains(&self, x: &Vect, margin: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        (0..self.dim()).all(|i| x[i] >= self.min[i] + margin && x[i] <= self.max[i] - margin)
    }

    pub fn require_interior(&self, x: &Vect, margin: f64) -> Result<()> {
        if !self.contains(x, margin) {
            return Err(Error::OutOfDomain(format!(
                "point {:?} not interior to chart with margin {margin:.3e}",
                x.as_slice()
            )));
        }
        Ok(())
    }

    /// Multi-indices of nodes at least `margin_nodes` nodes away from every face.
    pub fn interior_nodes(&self, margin_nodes: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for idx in 0..self.node_count() {
            let multi = self.multi_of(idx);
            if multi
                .iter()
                .enumerate()
                .all(|(i, &m)| m >= margin_nodes && m + margin_nodes < self.samples[i])
            {
                out.push(multi);
            }
        }
        out
    }
}

/// Differentiation parameters for chart operators.
#[derive(Debug, Clone, Copy)]
pub struct DiffParams {
    pub step: f64,
    pub order: FdOrder,
}

impl DiffParams {
    pub fn for_grid(grid: &ChartGrid) -> Self {
        Self { step: grid.fd_step(), order: FdOrder::Two }
    }

    pub fn high_accuracy() -> Self {
        Self { step: 1e-3, order: FdOrder::Four }
    }

    pub fn stencil_halfwidth(&self) -> f64 {
        match self.order {
            FdOrder::Two => self.step,
            FdOrder::Four => 2.0 * self.step,
        }
    }
}

/// Caller-supplied evaluator or per-node samples with interpolation.
#[derive(Clone)]
pub enum FieldSource<T: Linear> {
    ClosedForm(Arc<dyn Fn(&Vect) -> T + Send + Sync>),
    GridSampled { grid: ChartGrid, values: Arc<Vec<T>>, order: InterpOrder },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpOrder {
    Linear,
    Cubic,
}

impl<T: Linear> FieldSource<T> {
    pub fn closed(f: impl Fn(&Vect) -> T + Send + Sync + 'static) -> Self {
        FieldSource::ClosedForm(Arc::new(f))
    }

    pub fn constant(value: T) -> Self
    where
        T: Send + Sync + 'static,
    {
        FieldSource::ClosedForm(Arc::new(move |_| value.clone()))
    }

    pub fn sampled(grid: ChartGrid, values: Vec<T>, order: InterpOrder) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::ShapeError(format!(
                "sampled field: {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(FieldSource::GridSampled { grid, values: Arc::new(values), order })
    }

    /// Sample a source onto grid nodes.
    pub fn sample_on(&self, grid: &ChartGrid) -> Vec<T> {
        (0..grid.node_count())
            .map(|idx| self.eval(&grid.node(&grid.multi_of(idx))))
            .collect()
    }

    pub fn eval(&self, x: &Vect) -> T {
        match self {
            FieldSource::ClosedForm(f) => f(x),
            FieldSource::GridSampled { grid, values, order } => interp(grid, values, x, *order),
        }
    }

    /// d/dx_i by central differences; closed forms use `dp.step`, sampled
    /// fields use the grid's own spacing.
    pub fn partial(&self, x: &Vect, i: usize, dp: DiffParams) -> T {
        let step = match self {
            FieldSource::ClosedForm(_) => dp.step,
            FieldSource::GridSampled { grid: g, .. } => g.spacing()[i],
        };
        let f = |y: &Vect| self.eval(y);
        fd::partial(&f, x, i, step, dp.order)
    }
}

/// Per-axis interpolation window: node offsets and weights.
fn axis_window(grid: &ChartGrid, x: &Vect, axis: usize, order: InterpOrder) -> (usize, Vec<f64>) {
    let h = grid.spacing();
    let s = grid.samples()[axis];
    let t = ((x[axis] - grid.min()[axis]) / h[axis]).clamp(0.0, (s - 1) as f64);
    match order {
        InterpOrder::Linear => {
            let j = (t.floor() as usize).min(s - 2);
            let frac = t - j as f64;
            (j, vec![1.0 - frac, frac])
        }
        InterpOrder::Cubic => {
            if s < 4 {
                // fall back to linear on short axes
                return axis_window(grid, x, axis, InterpOrder::Linear);
            }
            let j = t.floor() as isize;
            let base = (j - 1).clamp(0, s as isize - 4) as usize;
            let xi = t - base as f64;
            let mut w = vec![0.0; 4];
            for (m, wm) in w.iter_mut().enumerate() {
                let mut p = 1.0;
                for l in 0..4 {
                    if l != m {
                        p *= (xi - l as f64) / (m as f64 - l as f64);
                    }
                }
                *wm = p;
            }
            (base, w)
        }
    }
}

fn interp<T: Linear>(grid: &ChartGrid, values: &[T], x: &Vect, order: InterpOrder) -> T {
    let n = grid.dim();
    let windows: Vec<(usize, Vec<f64>)> =
        (0..n).map(|i| axis_window(grid, x, i, order)).collect();
    let mut out = values[0].zeros_like();
    let mut multi = vec![0usize; n];
    // iterate the tensor-product window
    let counts: Vec<usize> = windows.iter().map(|w| w.1.len()).collect();
    let total: usize = counts.iter().product();
    for flat in 0..total {
        let mut rem = flat;
        let mut weight = 1.0;
        for i in (0..n).rev() {
            let c = rem % counts[i];
            rem /= counts[i];
            multi[i] = windows[i].0 + c;
            weight *= windows[i].1[c];
        }
        if weight != 0.0 {
            out.axpy(weight, &values[grid.index_of(&multi)]);
        }
    }
    out
}

/// Semi-Riemannian structure on a bundle over the chart.
#[derive(Clone)]
pub struct MetricField {
    pub source: FieldSource<Mat>,
    pub index: usize,
}

impl MetricField {
    pub fn new(source: FieldSource<Mat>, index: usize) -> Self {
        Self { source, index }
    }

    pub fn gram(&self, x: &Vect) -> Mat {
        let g = self.source.eval(x);
        // enforce exact symmetry against interpolation round-off
        (&g + g.transpose()) * 0.5
    }

    pub fn at(&self, x: &Vect) -> Result<Bilinear> {
        let g = self.gram(x);
        if g.determinant().abs() < tol::DEGENERATE_DET {
            return Err(Error::DegenerateForm(format!("|det g| < {:.1e}", tol::DEGENERATE_DET)));
        }
        Bilinear::new(g, self.index)
    }
}

/// Connection on a rank-k bundle stored through its coordinate Christoffel
/// data: `gammas(x)[i]` is the k x k endomorphism Gamma(e_i).
#[derive(Clone)]
pub struct ConnectionField {
    pub rank: usize,
    pub christoffel: FieldSource<Vec<Mat>>,
}

impl ConnectionField {
    pub fn new(rank: usize, christoffel: FieldSource<Vec<Mat>>) -> Self {
        Self { rank, christoffel }
    }

    pub fn flat(dim_m: usize, rank: usize) -> Self {
        let zeros: Vec<Mat> = (0..dim_m).map(|_| Mat::zeros(rank, rank)).collect();
        Self { rank, christoffel: FieldSource::constant(zeros) }
    }

    pub fn gammas(&self, x: &Vect) -> Vec<Mat> {
        self.christoffel.eval(x)
    }

    /// Gamma(v) = sum_i v_i Gamma(e_i).
    pub fn gamma_of(&self, x: &Vect, v: &Vect) -> Mat {
        let gs = self.gammas(x);
        let mut out = Mat::zeros(self.rank, self.rank);
        for i in 0..v.len() {
            if v[i] != 0.0 {
                out += &gs[i] * v[i];
            }
        }
        out
    }
}

/// Bilinear bundle map `TM x V -> W` stored per tangent direction:
/// `mats(x)[i]` is the (dim W) x (dim V) matrix of the map with first slot e_i.
#[derive(Clone)]
pub struct BilMapField {
    pub out_dim: usize,
    pub right_dim: usize,
    pub source: FieldSource<Vec<Mat>>,
}

impl BilMapField {
    pub fn new(out_dim: usize, right_dim: usize, source: FieldSource<Vec<Mat>>) -> Self {
        Self { out_dim, right_dim, source }
    }

    pub fn zero(dim_m: usize, out_dim: usize, right_dim: usize) -> Self {
        let zeros: Vec<Mat> = (0..dim_m).map(|_| Mat::zeros(out_dim, right_dim)).collect();
        Self { out_dim, right_dim, source: FieldSource::constant(zeros) }
    }

    pub fn mats(&self, x: &Vect) -> Vec<Mat> {
        self.source.eval(x)
    }

    pub fn apply(&self, x: &Vect, v: &Vect, w: &Vect) -> Vect {
        let ms = self.mats(x);
        let mut out = Vect::zeros(self.out_dim);
        for i in 0..v.len() {
            if v[i] != 0.0 {
                out += &ms[i] * w * v[i];
            }
        }
        out
    }

    /// The operator w -> map(v, w).
    pub fn operator(&self, x: &Vect, v: &Vect) -> Mat {
        let ms = self.mats(x);
        let mut out = Mat::zeros(self.out_dim, self.right_dim);
        for i in 0..v.len() {
            if v[i] != 0.0 {
                out += &ms[i] * v[i];
            }
        }
        out
    }
}

/// Vector-valued section of a bundle over the chart.
#[derive(Clone)]
pub struct SectionField {
    pub source: FieldSource<Vect>,
}

/// Endomorphism-valued field (almost complex structures, frames, ...).
#[derive(Clone)]
pub struct EndoField {
    pub source: FieldSource<Mat>,
}

/// Frame section with an optional analytic Jacobian (`jac(x)[i]` = d_i s).
#[derive(Clone)]
pub struct FrameField {
    pub value: FieldSource<Mat>,
    pub jacobian: Option<Arc<dyn Fn(&Vect) -> Vec<Mat> + Send + Sync>>,
}

impl FrameField {
    pub fn new(value: FieldSource<Mat>) -> Self {
        Self { value, jacobian: None }
    }

    pub fn with_jacobian(
        value: FieldSource<Mat>,
        jac: impl Fn(&Vect) -> Vec<Mat> + Send + Sync + 'static,
    ) -> Self {
        Self { value, jacobian: Some(Arc::new(jac)) }
    }

    pub fn at(&self, x: &Vect) -> Mat {
        self.value.eval(x)
    }

    pub fn partials(&self, x: &Vect, dp: DiffParams) -> Vec<Mat> {
        if let Some(j) = &self.jacobian {
            return j(x);
        }
        (0..x.len()).map(|i| self.value.partial(x, i, dp)).collect()
    }
}

/// Levi-Civita Christoffel endomorphisms of `metric` at `x`:
/// Gamma^k_{ij} = g^{kl}(d_i g_{jl} + d_j g_{il} - d_l g_{ij}) / 2.
pub fn levi_civita_at(
    metric: &MetricField,
    grid: &ChartGrid,
    x: &Vect,
    dp: DiffParams,
) -> Result<Vec<Mat>> {
    grid.require_interior(x, dp.stencil_halfwidth())?;
    levi_civita_core(metric, grid, x, dp)
}

/// Same computation without the boundary-margin gate; the difference stencil
/// may probe just past the chart for closed-form sources.
pub fn levi_civita_core(
    metric: &MetricField,
    grid: &ChartGrid,
    x: &Vect,
    dp: DiffParams,
) -> Result<Vec<Mat>> {
    let n = grid.dim();
    let g = metric.at(x)?;
    let dg: Vec<Mat> = (0..n).map(|i| metric.source.partial(x, i, dp)).collect();
    let ginv = g.inv();
    let mut gammas = Vec::with_capacity(n);
    for i in 0..n {
        let mut gi = Mat::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                gi[(k, j)] = 0.5 * acc;
            }
        }
        gammas.push(gi);
    }
    Ok(gammas)
}

/// Wrap the Levi-Civita computation of a metric as a connection field using
/// the grid's default differentiation step.
pub fn levi_civita(metric: &MetricField, grid: &ChartGrid) -> ConnectionField {
    levi_civita_with(metric, grid, DiffParams::for_grid(grid))
}

/// Levi-Civita connection field with explicit differentiation parameters.
/// Evaluations on the chart boundary are allowed (their stencils overhang by
/// up to one stencil width, which closed-form sources must tolerate).
pub fn levi_civita_with(metric: &MetricField, grid: &ChartGrid, dp: DiffParams) -> ConnectionField {
    let metric = metric.clone();
    let grid_c = grid.clone();
    ConnectionField::new(
        grid.dim(),
        FieldSource::closed(move |x| {
            levi_civita_core(&metric, &grid_c, x, dp).unwrap_or_else(|_| {
                let n = grid_c.dim();
                vec![Mat::from_element(n, n, f64::NAN); n]
            })
        }),
    )
}

/// Curvature endomorphism R(v, w) at x from the coordinate formula
/// R(e_i, e_j) = d_i Gamma_j - d_j Gamma_i + [Gamma_i, Gamma_j].
pub fn curvature_endo(
    conn: &ConnectionField,
    grid: &ChartGrid,
    x: &Vect,
    v: &Vect,
    w: &Vect,
    dp: DiffParams,
) -> Result<Mat> {
    let n = grid.dim();
    grid.require_interior(x, 2.0 * dp.stencil_halfwidth())?;
    let gs = conn.gammas(x);
    let dgs: Vec<Vec<Mat>> = (0..n).map(|i| conn.christoffel.partial(x, i, dp)).collect();
    let mut out = Mat::zeros(conn.rank, conn.rank);
    for i in 0..n {
        for j in (i + 1)..n {
            let a = v[i] * w[j] - v[j] * w[i];
            if a != 0.0 {
                let rij = &dgs[i][j] - &dgs[j][i] + &gs[i] * &gs[j] - &gs[j] * &gs[i];
                out += rij * a;
            }
        }
    }
    Ok(out)
}

/// iota-torsion of a connection against a bundle morphism `iota: TM -> E`
/// given as a (k x n)-matrix field.
pub fn iota_torsion(
    conn: &ConnectionField,
    iota: &EndoField,
    grid: &ChartGrid,
    x: &Vect,
    v: &Vect,
    w: &Vect,
    dp: DiffParams,
) -> Result<Vect> {
    let n = grid.dim();
    grid.require_interior(x, dp.stencil_halfwidth())?;
    let gs = conn.gammas(x);
    let io = iota.source.eval(x);
    let dio: Vec<Mat> = (0..n).map(|i| iota.source.partial(x, i, dp)).collect();
    let mut out = Vect::zeros(conn.rank);
    for i in 0..n {
        for j in (i + 1)..n {
            let a = v[i] * w[j] - v[j] * w[i];
            if a != 0.0 {
                let tij = dio[i].column(j) - dio[j].column(i)
                    + &gs[i] * io.column(j)
                    - &gs[j] * io.column(i);
                out += tij * a;
            }
        }
    }
    Ok(out)
}

/// Torsion T(v, w) of a tangent-bundle connection in the coordinate frame.
pub fn torsion_at(conn: &ConnectionField, x: &Vect, v: &Vect, w: &Vect) -> Vect {
    let gs = conn.gammas(x);
    let n = conn.rank;
    let mut out = Vect::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let a = v[i] * w[j] - v[j] * w[i];
            if a != 0.0 {
                out += (gs[i].column(j) - gs[j].column(i)) * a;
            }
        }
    }
    out
}

/// Christoffel endomorphisms of `conn` relative to the frame section `s`:
/// Gamma^s(e_i) = Gamma(e_i) + (d_i s) s^{-1}, expressed in the coordinate
/// trivialization of the fiber.
pub fn christoffel_of_frame(
    conn: &ConnectionField,
    s: &FrameField,
    grid: &ChartGrid,
    x: &Vect,
    dp: DiffParams,
) -> Result<Vec<Mat>> {
    grid.require_interior(x, dp.stencil_halfwidth())?;
    let sx = s.at(x);
    let s_inv = checked_inverse(&sx)?;
    let ds = s.partials(x, dp);
    let gs = conn.gammas(x);
    Ok((0..grid.dim()).map(|i| &gs[i] + &ds[i] * &s_inv).collect())
}

/// Covariant derivative matrices of a metric: (nabla_i g) = d_i G - Gamma_i^T G - G Gamma_i.
pub fn covariant_metric_derivative(
    conn: &ConnectionField,
    metric: &MetricField,
    grid: &ChartGrid,
    x: &Vect,
    dp: DiffParams,
) -> Vec<Mat> {
    let g = metric.gram(x);
    let gs = conn.gammas(x);
    (0..grid.dim())
        .map(|i| {
            let dg = metric.source.partial(x, i, dp);
            let dg = (&dg + dg.transpose()) * 0.5;
            dg - gs[i].transpose() * &g - &g * &gs[i]
        })
        .collect()
}

/// Covariant derivative of an endomorphism field: nabla_i J = d_i J + [Gamma_i, J].
pub fn covariant_endo_derivative(
    conn: &ConnectionField,
    field: &EndoField,
    grid: &ChartGrid,
    x: &Vect,
    dp: DiffParams,
) -> Vec<Mat> {
    let j = field.source.eval(x);
    let gs = conn.gammas(x);
    (0..grid.dim())
        .map(|i| {
            let dj = field.source.partial(x, i, dp);
            dj + &gs[i] * &j - &j * &gs[i]
        })
        .collect()
}

/// Covariant derivative of a section: nabla_i eps = d_i eps + Gamma_i eps.
pub fn covariant_section_derivative(
    conn: &ConnectionField,
    section: &SectionField,
    grid: &ChartGrid,
    x: &Vect,
    dp: DiffParams,
) -> Vec<Vect> {
    let e = section.source.eval(x);
    let gs = conn.gammas(x);
    (0..grid.dim())
        .map(|i| {
            let de = section.source.partial(x, i, dp);
            de + &gs[i] * &e
        })
        .collect()
}

/// Immersion-problem data over the chart: tangent/normal connections, second
/// fundamental form, Weingarten data, optional metrics.
#[derive(Clone)]
pub struct WhitneyData {
    pub grid: ChartGrid,
    pub dim_m: usize,
    pub rank_e0: usize,
    pub metric: Option<MetricField>,
    pub metric0: Option<MetricField>,
    pub tangent_conn: ConnectionField,
    pub normal_conn: ConnectionField,
    pub alpha0: BilMapField,
    /// Weingarten data; when absent it is derived pointwise from the metrics.
    pub a0: Option<BilMapField>,
}

impl WhitneyData {
    pub fn total_rank(&self) -> usize {
        self.dim_m + self.rank_e0
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim_m;
        let k = self.rank_e0;
        if self.grid.dim() != n {
            return Err(Error::ShapeError("whitney: grid dim != dim_m".into()));
        }
        if self.tangent_conn.rank != n || self.normal_conn.rank != k {
            return Err(Error::ShapeError("whitney: connection ranks inconsistent".into()));
        }
        if self.alpha0.out_dim != k || self.alpha0.right_dim != n {
            return Err(Error::ShapeError("whitney: alpha0 must map TMxTM -> E0".into()));
        }
        if let Some(a0) = &self.a0 {
            if a0.out_dim != n || a0.right_dim != k {
                return Err(Error::ShapeError("whitney: a0 must map TMxE0 -> TM".into()));
            }
        }
        if self.a0.is_none() && (self.metric.is_none() || self.metric0.is_none()) {
            return Err(Error::ShapeError(
                "whitney: a0 must be given unless both metrics are present".into(),
            ));
        }
        // isometric problem: alpha0 must be symmetric at the nodes
        if self.metric.is_some() && self.metric0.is_some() {
            for multi in self.grid.interior_nodes(0) {
                let x = self.grid.node(&multi);
                let ms = self.alpha0.mats(&x);
                for i in 0..n {
                    for j in (i + 1)..n {
                        let d = (ms[i].column(j) - ms[j].column(i)).norm();
                        if d > tol::CONSTRAINT {
                            return Err(Error::SpecViolation(format!(
                                "alpha0 asymmetric by {d:.3e} at node {multi:?}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Weingarten matrices at x (n x k per tangent direction), either the
    /// supplied field or the unique solution of
    /// g0(alpha0(v, w), e) = -g(A0(e) v, w).
    pub fn a0_mats(&self, x: &Vect) -> Result<Vec<Mat>> {
        if let Some(a0) = &self.a0 {
            return Ok(a0.mats(x));
        }
        // direct solve, skipping the signature validation done in validate()
        let g = self.metric.as_ref().unwrap().gram(x);
        let g0 = self.metric0.as_ref().unwrap().gram(x);
        let g_inv = g
            .try_inverse()
            .ok_or_else(|| Error::DegenerateForm("tangent metric singular".into()))?;
        Ok(self
            .alpha0
            .mats(x)
            .iter()
            .map(|a| -(&g_inv * a.transpose() * &g0))
            .collect())
    }

    /// A0(e) as an endomorphism of TM: v -> A0(v, e).
    pub fn weingarten_operator(&self, x: &Vect, e: &Vect) -> Result<Mat> {
        let mats = self.a0_mats(x)?;
        let n = self.dim_m;
        let mut out = Mat::zeros(n, n);
        for (i, m) in mats.iter().enumerate() {
            let col = m * e;
            for r in 0..n {
                out[(r, i)] = col[r];
            }
        }
        Ok(out)
    }

    /// Metric on the Whitney sum: block diagonal g + g0.
    pub fn whitney_metric(&self) -> Option<MetricField> {
        let (g, g0) = (self.metric.clone()?, self.metric0.clone()?);
        let n = self.dim_m;
        let k = self.rank_e0;
        let idx = g.index + g0.index;
        let src = FieldSource::closed(move |x: &Vect| {
            let mut out = Mat::zeros(n + k, n + k);
            out.view_mut((0, 0), (n, n)).copy_from(&g.gram(x));
            out.view_mut((n, n), (k, k)).copy_from(&g0.gram(x));
            out
        });
        Some(MetricField::new(src, idx))
    }
}

/// A0 matrices solving g0(alpha0(v, w), e) = -g(A0(e) v, w):
/// a0[i] = -G^{-1} alpha0[i]^T G0.
pub fn solve_weingarten(g: &Bilinear, g0: &Bilinear, alpha_mats: &[Mat]) -> Vec<Mat> {
    alpha_mats.iter().map(|a| -(g.inv() * a.transpose() * g0.gram())).collect()
}

/// Whitney-sum connection assembled from the data's components: per tangent
/// direction the block matrix [[Gamma_i, A0_i], [alpha0_i, Gamma0_i]].
pub fn assemble_whitney(data: &WhitneyData) -> Result<ConnectionField> {
    data.validate()?;
    let n = data.dim_m;
    let k = data.rank_e0;
    let d = data.clone();
    let src = FieldSource::closed(move |x: &Vect| {
        let gs = d.tangent_conn.gammas(x);
        let g0s = d.normal_conn.gammas(x);
        let als = d.alpha0.mats(x);
        let a0s = d.a0_mats(x).expect("weingarten data");
        (0..n)
            .map(|i| {
                let mut b = Mat::zeros(n + k, n + k);
                b.view_mut((0, 0), (n, n)).copy_from(&gs[i]);
                b.view_mut((0, n), (n, k)).copy_from(&a0s[i]);
                b.view_mut((n, 0), (k, n)).copy_from(&als[i]);
                b.view_mut((n, n), (k, k)).copy_from(&g0s[i]);
                b
            })
            .collect()
    });
    Ok(ConnectionField::new(n + k, src))
}

/// Components of a Whitney-sum connection with respect to the splitting:
/// (tangent block, normal block, alpha block, weingarten block) per direction.
pub fn split_whitney(conn: &ConnectionField, dim_m: usize, x: &Vect) -> (Vec<Mat>, Vec<Mat>, Vec<Mat>, Vec<Mat>) {
    let total = conn.rank;
    let k = total - dim_m;
    let gs = conn.gammas(x);
    let mut t = Vec::new();
    let mut nrm = Vec::new();
    let mut al = Vec::new();
    let mut wg = Vec::new();
    for g in gs.iter() {
        t.push(g.view((0, 0), (dim_m, dim_m)).into_owned());
        wg.push(g.view((0, dim_m), (dim_m, k)).into_owned());
        al.push(g.view((dim_m, 0), (k, dim_m)).into_owned());
        nrm.push(g.view((dim_m, dim_m), (k, k)).into_owned());
    }
    (t, nrm, al, wg)
}

/// Covariant derivative of alpha0 under the connection induced by the
/// tangent and normal connections: returns d[i][j] with
/// (nabla x alpha0)(e_i, e_j, u) = d[i][j] u.
pub fn nabla_otimes_alpha(
    data: &WhitneyData,
    grid: &ChartGrid,
    x: &Vect,
    dp: DiffParams,
) -> Result<Vec<Vec<Mat>>> {
    let n = data.dim_m;
    grid.require_interior(x, dp.stencil_halfwidth())?;
    let als = data.alpha0.mats(x);
    let gs = data.tangent_conn.gammas(x);
    let g0s = data.normal_conn.gammas(x);
    let dals: Vec<Vec<Mat>> = (0..n).map(|i| data.alpha0.source.partial(x, i, dp)).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            // d_i alpha[j] + Gamma0_i alpha[j] - alpha[Gamma_i e_j] - alpha[j] Gamma_i
            let mut d = dals[i][j].clone() + &g0s[i] * &als[j] - &als[j] * &gs[i];
            for l in 0..n {
                d -= &als[l] * gs[i][(l, j)];
            }
            row.push(d);
        }
        out.push(row);
    }
    Ok(out)
}

/// Covariant derivative of the Weingarten data: d[i][j] with
/// (nabla x A0)(e_i, e_j, e) = d[i][j] e.
pub fn nabla_otimes_a0(
    data: &WhitneyData,
    grid: &ChartGrid,
    x: &Vect,
    dp: DiffParams,
) -> Result<Vec<Vec<Mat>>> {
    let n = data.dim_m;
    grid.require_interior(x, dp.stencil_halfwidth())?;
    let a0s = data.a0_mats(x)?;
    let gs = data.tangent_conn.gammas(x);
    let g0s = data.normal_conn.gammas(x);
    let da0s: Vec<Vec<Mat>> = match &data.a0 {
        Some(a0) => (0..n).map(|i| a0.source.partial(x, i, dp)).collect(),
        None => {
            // differentiate the metric-derived field
            let d = data.clone();
            let f = move |y: &Vect| d.a0_mats(y).expect("weingarten data");
            (0..n).map(|i| fd::partial(&f, x, i, dp.step, dp.order)).collect()
        }
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            // d_i a0[j] + Gamma_i a0[j] - a0[Gamma_i e_j] - a0[j] Gamma0_i
            let mut d = da0s[i][j].clone() + &gs[i] * &a0s[j] - &a0s[j] * &g0s[i];
            for l in 0..n {
                d -= &a0s[l] * gs[i][(l, j)];
            }
            row.push(d);
        }
        out.push(row);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Grid-field files
// ---------------------------------------------------------------------------

/// Sampled-field file layout: a small commented header (name, grid, value
/// shape), then one whitespace-separated line of components per node, nodes
/// in row-major order with the last axis fastest.
///
/// ```text
/// # framefield-grid v1
/// # name=<field name>
/// # dim=2 shape=5,7
/// # min=0.0,0.0 max=1.0,2.0
/// # components=4 rows=2 cols=2
/// 1.0 0.0 0.0 1.0
/// ...
/// ```
pub struct GridFieldFile {
    pub name: String,
    pub grid: ChartGrid,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Vec<f64>>,
}

pub fn save_grid_field(
    path: &std::path::Path,
    name: &str,
    grid: &ChartGrid,
    rows: usize,
    cols: usize,
    values: &[Vec<f64>],
) -> Result<()> {
    use std::io::Write;
    if values.len() != grid.node_count() {
        return Err(Error::ShapeError("grid field save: node count mismatch".into()));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# framefield-grid v1")?;
    writeln!(f, "# name={name}")?;
    let shape: Vec<String> = grid.samples().iter().map(|s| s.to_string()).collect();
    writeln!(f, "# dim={} shape={}", grid.dim(), shape.join(","))?;
    let fmt = |v: &Vect| v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(",");
    writeln!(f, "# min={} max={}", fmt(grid.min()), fmt(grid.max()))?;
    writeln!(f, "# components={} rows={rows} cols={cols}", rows * cols)?;
    for v in values {
        let line: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(f, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn load_grid_field(path: &std::path::Path) -> Result<GridFieldFile> {
    let text = std::fs::read_to_string(path)?;
    let mut name = String::new();
    let mut dim = 0usize;
    let mut shape: Vec<usize> = Vec::new();
    let mut min: Vec<f64> = Vec::new();
    let mut max: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    let mut cols = 0usize;
    let mut components = 0usize;
    let mut values: Vec<Vec<f64>> = Vec::new();
    let parse_usizes = |s: &str| -> Vec<usize> {
        s.split(',').filter_map(|t| t.trim().parse().ok()).collect()
    };
    let parse_f64s = |s: &str| -> Vec<f64> {
        s.split(',').filter_map(|t| t.trim().parse().ok()).collect()
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for tok in rest.split_whitespace() {
                if let Some((k, v)) = tok.split_once('=') {
                    match k {
                        "name" => name = v.to_string(),
                        "dim" => dim = v.parse().unwrap_or(0),
                        "shape" => shape = parse_usizes(v),
                        "min" => min = parse_f64s(v),
                        "max" => max = parse_f64s(v),
                        "components" => components = v.parse().unwrap_or(0),
                        "rows" => rows = v.parse().unwrap_or(0),
                        "cols" => cols = v.parse().unwrap_or(0),
                        _ => {}
                    }
                }
            }
            continue;
        }
        let vals: Vec<f64> = line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
        if vals.len() != components {
            return Err(Error::ShapeError(format!(
                "grid field load: line has {} components, header says {components}",
                vals.len()
            )));
        }
        values.push(vals);
    }
    if shape.len() != dim || min.len() != dim || max.len() != dim {
        return Err(Error::ShapeError("grid field load: inconsistent header".into()));
    }
    let grid = ChartGrid::new(Vect::from_vec(min), Vect::from_vec(max), shape)?;
    if values.len() != grid.node_count() {
        return Err(Error::ShapeError(format!(
            "grid field load: {} nodes in file, grid needs {}",
            values.len(),
            grid.node_count()
        )));
    }
    Ok(GridFieldFile { name, grid, rows, cols, values })
}

impl GridFieldFile {
    /// Reinterpret as a matrix-valued sampled field (column-major entries).
    pub fn matrix_source(&self, order: InterpOrder) -> Result<FieldSource<Mat>> {
        let vals: Vec<Mat> = self
            .values
            .iter()
            .map(|v| Mat::from_column_slice(self.rows, self.cols, v))
            .collect();
        FieldSource::sampled(self.grid.clone(), vals, order)
    }

    /// Reinterpret as a vector-valued sampled field.
    pub fn vector_source(&self, order: InterpOrder) -> Result<FieldSource<Vect>> {
        let vals: Vec<Vect> = self.values.iter().map(|v| Vect::from_vec(v.clone())).collect();
        FieldSource::sampled(self.grid.clone(), vals, order)
    }
}
