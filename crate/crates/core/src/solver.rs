//! Reconstruction of the immersion: pull back the canonical and connection
//! forms through a structure frame section, integrate the resulting frame
//! equation through a target realization over the grid, and verify the
//! result (pullback metric, recovered second fundamental form, structure
//! preservation, plaquette holonomy, sweep-order independence).

use serde::Serialize;

use crate::chart::{assemble_whitney, ChartGrid, ConnectionField, DiffParams, FrameField, WhitneyData};
use crate::compat::{full_report, Compat, SamplePlan};
use crate::error::{Error, Result};
use crate::realize::Realization;
use crate::tensor::{checked_inverse, tol, Mat, Vect};

/// Pulled-back canonical + connection form of the Whitney data relative to a
/// structure frame section: at (x, v) the pair (theta, omega) with
/// theta = s(x)^{-1} (v + 0) and omega = Ad_{s(x)}^{-1} of the frame
/// Christoffel tensor.
pub struct LambdaField {
    data: WhitneyData,
    frame: FrameField,
    hat: ConnectionField,
    dp: DiffParams,
}

impl LambdaField {
    pub fn new(data: WhitneyData, frame: FrameField) -> Result<Self> {
        let hat = assemble_whitney(&data)?;
        let dp = DiffParams::for_grid(&data.grid);
        Ok(Self { data, frame, hat, dp })
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.data.grid
    }

    /// (theta, omega) value at a chart point and tangent vector.
    pub fn at(&self, x: &Vect, v: &Vect) -> Result<(Vect, Mat)> {
        let s = self.frame.at(x);
        // plain inverse in the integration hot path; structure frames are
        // well-conditioned by construction
        let s_inv = s.clone().try_inverse().ok_or(Error::SingularFrame {
            rcond: 0.0,
            threshold: crate::tensor::tol::RCOND_SINGULAR,
        })?;
        let total = self.data.total_rank();
        let mut iota = Vect::zeros(total);
        for i in 0..v.len() {
            iota[i] = v[i];
        }
        let theta = &s_inv * iota;
        let gv = self.hat.gamma_of(x, v);
        let ds = self.frame.partials(x, self.dp);
        let mut dvs = Mat::zeros(total, total);
        for i in 0..v.len() {
            if v[i] != 0.0 {
                dvs += &ds[i] * v[i];
            }
        }
        let omega = &s_inv * (gv * &s + dvs);
        Ok((theta, omega))
    }

    /// Admissibility defect of the form value against a model's inner
    /// torsion, maximized over the coordinate directions at x.
    pub fn admissibility_residual(
        &self,
        model: &crate::models::ModelSpace,
        x: &Vect,
    ) -> Result<f64> {
        let s = model.standard_structure();
        let t = crate::models::characteristic_tensors(model, &s)?;
        let n = self.data.dim_m;
        let mut worst = 0.0f64;
        for i in 0..n {
            let v = Vect::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
            let (theta, omega) = self.at(x, &v)?;
            worst = worst.max(t.admissibility_residual(&theta, &omega)?);
        }
        Ok(worst)
    }
}

/// Options steering `solve_grid`.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Start node (multi-index); defaults to the chart center node.
    pub start: Option<Vec<usize>>,
    /// Initial realization state (the lift of sigma_0); identity by default.
    pub initial_state: Option<Vect>,
    /// Integration substeps per grid edge.
    pub step_refine: usize,
    /// Compatibility gate on the max residual before solving.
    pub residual_gate: f64,
    /// Solve even when the gate fails.
    pub force: bool,
    /// Frame-drift threshold per step, checked before re-projection.
    pub drift_tol: f64,
    /// Axis order of the sweep; `None` is ascending axes.
    pub axis_order: Option<Vec<usize>>,
    /// Seed for the gating residual report.
    pub seed: u64,
    /// Node stride for the gating residual report.
    pub gate_stride: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            start: None,
            initial_state: None,
            step_refine: 1,
            residual_gate: tol::SOLVER_GATE,
            force: false,
            drift_tol: tol::FRAME_DRIFT,
            axis_order: None,
            seed: 42,
            gate_stride: 2,
        }
    }
}

/// Diagnostics attached to a reconstructed solution.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// max | gbar(df v, df w) - g(v, w) | over nodes and basis pairs, with
    /// df read off the reconstructed frame.
    pub pullback_metric_max: f64,
    /// max | (nabla-bar df)(v, w) - df(nabla v w) - L alpha0(v, w) |.
    pub alpha_recovery_max: f64,
    /// max structure-preservation defect of the frames.
    pub structure_max: f64,
    /// max | L e_i - central difference of the base map |; O(h^2) by
    /// construction, ties the frame to the numerical differential.
    pub frame_vs_fd_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveDiagnostics {
    pub max_drift: f64,
    pub holonomy_max: f64,
    pub gate_max_residual: f64,
    pub verification: VerificationReport,
}

/// Reconstructed frame field and base map over the grid.
pub struct ImmersionSolution {
    pub grid: ChartGrid,
    /// Realization state per node (flat index order).
    pub states: Vec<Vect>,
    /// Target point coordinates per node.
    pub points: Vec<Vect>,
    pub point_dim: usize,
    pub diagnostics: SolveDiagnostics,
}

fn rk4_edge(
    realization: &dyn Realization,
    lambda: &LambdaField,
    state: &Vect,
    from: &Vect,
    to: &Vect,
    steps: usize,
    drift_tol: f64,
    max_drift: &mut f64,
) -> Result<Vect> {
    let dir = to - from;
    let h = 1.0 / steps as f64;
    let mut st = state.clone();
    let eval = |t: f64, s: &Vect| -> Result<Vect> {
        let x = from + &dir * t;
        let (theta, omega) = lambda.at(&x, &dir)?;
        realization.state_derivative(s, &theta, &omega)
    };
    for k in 0..steps {
        let t0 = k as f64 * h;
        let k1 = eval(t0, &st)?;
        let k2 = eval(t0 + 0.5 * h, &(&st + &k1 * (0.5 * h)))?;
        let k3 = eval(t0 + 0.5 * h, &(&st + &k2 * (0.5 * h)))?;
        let k4 = eval(t0 + h, &(&st + &k3 * h))?;
        st += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if st.iter().any(|x| !x.is_finite()) {
            return Err(Error::IntegrationDiverged("non-finite state".into()));
        }
        let drift = realization.structural_residual(&st);
        *max_drift = max_drift.max(drift);
        if drift > drift_tol {
            return Err(Error::SingularFrame { rcond: drift, threshold: drift_tol });
        }
        st = realization.reproject(&st);
    }
    Ok(st)
}

/// Integrate the frame equation along a polyline of chart points.
pub fn integrate_along_curve(
    lambda: &LambdaField,
    realization: &dyn Realization,
    start_state: &Vect,
    curve: &[Vect],
    steps_per_edge: usize,
) -> Result<Vec<Vect>> {
    let mut out = vec![start_state.clone()];
    let mut drift = 0.0;
    for win in curve.windows(2) {
        let next = rk4_edge(
            realization,
            lambda,
            out.last().unwrap(),
            &win[0],
            &win[1],
            steps_per_edge,
            tol::FRAME_DRIFT,
            &mut drift,
        )?;
        out.push(next);
    }
    Ok(out)
}

/// Sweep edges: the spine runs along `axis_order[0]` through the start node,
/// later axes fill outward from everything already reached.
fn sweep_edges(
    grid: &ChartGrid,
    start: &[usize],
    axis_order: &[usize],
) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut edges = Vec::new();
    let mut filled: Vec<Vec<usize>> = vec![start.to_vec()];
    for &axis in axis_order {
        let mut next_filled = Vec::new();
        for base in &filled {
            next_filled.push(base.clone());
            let s = grid.samples()[axis];
            let c = base[axis];
            let mut prev = base.clone();
            for m in (c + 1)..s {
                let mut node = prev.clone();
                node[axis] = m;
                edges.push((prev.clone(), node.clone()));
                next_filled.push(node.clone());
                prev = node;
            }
            prev = base.clone();
            for m in (0..c).rev() {
                let mut node = prev.clone();
                node[axis] = m;
                edges.push((prev.clone(), node.clone()));
                next_filled.push(node.clone());
                prev = node;
            }
        }
        filled = next_filled;
    }
    edges
}

/// Integrate the frame equation over the whole grid from the start node and
/// verify the result.
pub fn solve_grid(
    compat: &Compat,
    frame: &FrameField,
    realization: &dyn Realization,
    opts: &SolveOptions,
) -> Result<ImmersionSolution> {
    let grid = compat.data.grid.clone();
    let n = grid.dim();

    // compatibility gate
    let plan = SamplePlan {
        seed: opts.seed,
        random_tuples_per_node: 4,
        node_stride: opts.gate_stride.max(1),
        margin_nodes: 1,
    };
    let report = full_report(compat, plan)?;
    let gate_max = report.max_residual();
    if gate_max > opts.residual_gate && !opts.force {
        return Err(Error::ResidualGate {
            family: report.worst_family().to_string(),
            max: gate_max,
            gate: opts.residual_gate,
        });
    }

    let lambda = LambdaField::new(compat.data.clone(), frame.clone())?;

    // start node and initial state
    let start: Vec<usize> = opts
        .start
        .clone()
        .unwrap_or_else(|| grid.samples().iter().map(|s| s / 2).collect());
    let x0 = grid.node(&start);
    let s0 = frame.at(&x0);
    let frame_res = compat.structure.at(&x0)?.frame_residual(&s0);
    if frame_res > 1e-6 {
        return Err(Error::FrameNotInStructure(frame_res));
    }
    let adm = lambda.admissibility_residual(&compat.model, &x0)?;
    if adm > tol::ADMISSIBLE && !opts.force {
        return Err(Error::SpecViolation(format!(
            "form values leave the admissible subspace by {adm:.3e} at the start node"
        )));
    }
    let init = opts.initial_state.clone().unwrap_or_else(|| realization.identity_state());
    let init_res = realization.structural_residual(&init);
    if init_res > 1e-8 {
        return Err(Error::FrameNotInStructure(init_res));
    }

    let axis_order: Vec<usize> = opts.axis_order.clone().unwrap_or_else(|| (0..n).collect());
    let edges = sweep_edges(&grid, &start, &axis_order);

    let mut states: Vec<Option<Vect>> = vec![None; grid.node_count()];
    states[grid.index_of(&start)] = Some(init);
    let mut max_drift = 0.0f64;
    for (from, to) in edges {
        let from_state = states[grid.index_of(&from)]
            .clone()
            .ok_or_else(|| Error::IntegrationDiverged("sweep order broke".into()))?;
        let next = rk4_edge(
            realization,
            &lambda,
            &from_state,
            &grid.node(&from),
            &grid.node(&to),
            opts.step_refine.max(1),
            opts.drift_tol,
            &mut max_drift,
        )?;
        states[grid.index_of(&to)] = Some(next);
    }
    let states: Vec<Vect> = states
        .into_iter()
        .map(|s| s.ok_or_else(|| Error::IntegrationDiverged("unreached node".into())))
        .collect::<Result<_>>()?;
    let points: Vec<Vect> = states.iter().map(|s| realization.point(s)).collect();

    // diagnostics: holonomy sampled on a stride keeping the scan near 64
    // plaquettes
    let plaquettes: usize = grid.samples().iter().map(|s| s - 1).product();
    let hol_stride = ((plaquettes as f64 / 64.0).sqrt().ceil() as usize).max(1);
    let holonomy_max = holonomy_scan(&lambda, realization, opts.step_refine.max(1), hol_stride)?;
    let mut sol = ImmersionSolution {
        grid,
        point_dim: realization.point_dim(),
        states,
        points,
        diagnostics: SolveDiagnostics {
            max_drift,
            holonomy_max,
            gate_max_residual: gate_max,
            verification: VerificationReport {
                pullback_metric_max: f64::NAN,
                alpha_recovery_max: f64::NAN,
                structure_max: f64::NAN,
                frame_vs_fd_max: f64::NAN,
            },
        },
    };
    sol.diagnostics.verification = verify_solution(&sol, compat, frame, realization)?;
    Ok(sol)
}

/// Group distance from the identity after integrating the form around one
/// grid plaquette, normalized by the plaquette area.
pub fn holonomy_residual(
    lambda: &LambdaField,
    realization: &dyn Realization,
    corner: &[usize],
    axes: (usize, usize),
    steps_per_edge: usize,
) -> Result<f64> {
    let grid = lambda.grid();
    let h = grid.spacing();
    let (i, j) = axes;
    let mut c = corner.to_vec();
    let x00 = grid.node(&c);
    c[i] += 1;
    let x10 = grid.node(&c);
    c[j] += 1;
    let x11 = grid.node(&c);
    c[i] -= 1;
    let x01 = grid.node(&c);
    let loop_pts = [x00.clone(), x10, x11, x01, x00];
    let id = realization.identity_state();
    let path = integrate_along_curve(lambda, realization, &id, &loop_pts, steps_per_edge)?;
    let area = h[i] * h[j];
    Ok(realization.distance(&id, path.last().unwrap()) / area)
}

/// Max plaquette holonomy over a strided sample of the grid (all axis
/// pairs); stride 1 visits every plaquette.
pub fn holonomy_scan(
    lambda: &LambdaField,
    realization: &dyn Realization,
    steps_per_edge: usize,
    stride: usize,
) -> Result<f64> {
    let grid = lambda.grid();
    let n = grid.dim();
    let stride = stride.max(1);
    let mut worst = 0.0f64;
    for idx in 0..grid.node_count() {
        let multi = grid.multi_of(idx);
        if multi.iter().any(|m| m % stride != 0) {
            continue;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if multi[i] + 1 < grid.samples()[i] && multi[j] + 1 < grid.samples()[j] {
                    worst =
                        worst.max(holonomy_residual(lambda, realization, &multi, (i, j), steps_per_edge)?);
                }
            }
        }
    }
    Ok(worst)
}

/// Check a reconstructed solution: pullback metric, recovered second
/// fundamental form, and frame structure preservation.
pub fn verify_solution(
    sol: &ImmersionSolution,
    compat: &Compat,
    frame: &FrameField,
    realization: &dyn Realization,
) -> Result<VerificationReport> {
    let grid = &sol.grid;
    let n = grid.dim();
    let h = grid.spacing();
    let data = &compat.data;

    // structure preservation everywhere
    let mut structure_max = 0.0f64;
    for s in &sol.states {
        structure_max = structure_max.max(realization.structural_residual(s));
    }

    // df columns read off the frame: L restricted to the tangent factor
    let tangent_cols = |multi: &[usize]| -> Result<Mat> {
        let idx = grid.index_of(multi);
        let x = grid.node(multi);
        let s = frame.at(&x);
        let s_inv = checked_inverse(&s)?;
        let l_map = realization.frame_tangent(&sol.states[idx]) * &s_inv;
        Ok(l_map.view((0, 0), (sol.point_dim, n)).into_owned())
    };

    // (i) pullback metric against the source metric, no differencing involved
    let mut pullback_max = 0.0f64;
    let mut frame_vs_fd_max = 0.0f64;
    for idx in 0..grid.node_count() {
        let multi = grid.multi_of(idx);
        let x = grid.node(&multi);
        let g = match &data.metric {
            Some(m) => m.at(&x)?,
            None => continue,
        };
        let p = &sol.points[idx];
        let amb = realization.ambient_metric(p);
        let df = tangent_cols(&multi)?;
        for a in 0..n {
            for b in a..n {
                let lhs = (df.column(a).transpose() * &amb * df.column(b))[(0, 0)];
                let ea = Vect::from_fn(n, |r, _| if r == a { 1.0 } else { 0.0 });
                let eb = Vect::from_fn(n, |r, _| if r == b { 1.0 } else { 0.0 });
                pullback_max = pullback_max.max((lhs - g.apply(&ea, &eb)).abs());
            }
        }
    }

    // frame columns against central differences of the base map (O(h^2))
    for multi in grid.interior_nodes(1) {
        let df = tangent_cols(&multi)?;
        for a in 0..n {
            let mut plus = multi.clone();
            plus[a] += 1;
            let mut minus = multi.clone();
            minus[a] -= 1;
            let fd = (&sol.points[grid.index_of(&plus)] - &sol.points[grid.index_of(&minus)])
                / (2.0 * h[a]);
            frame_vs_fd_max = frame_vs_fd_max.max((df.column(a).into_owned() - fd).norm());
        }
    }

    // (ii) second fundamental form recovered by differencing the frame field
    let mut alpha_max = 0.0f64;
    for multi in grid.interior_nodes(2) {
        let x = grid.node(&multi);
        let idx = grid.index_of(&multi);
        let p = &sol.points[idx];
        let s = frame.at(&x);
        let s_inv = checked_inverse(&s)?;
        let l_map = realization.frame_tangent(&sol.states[idx]) * &s_inv;
        let gammas = data.tangent_conn.gammas(&x);
        let df = tangent_cols(&multi)?;
        for a in 0..n {
            for b in 0..n {
                // 4th-order central difference of the df_b field along axis a
                let shifted = |off: isize| -> Result<Vect> {
                    let mut m2 = multi.clone();
                    m2[a] = (m2[a] as isize + off) as usize;
                    Ok(tangent_cols(&m2)?.column(b).into_owned())
                };
                let dwb = (shifted(-2)? - shifted(2)? + (shifted(1)? - shifted(-1)?) * 8.0)
                    / (12.0 * h[a]);
                let nab = realization.covariant_deriv(
                    p,
                    &df.column(a).into_owned(),
                    &df.column(b).into_owned(),
                    &dwb,
                );
                let mut tangent_part = Vect::zeros(sol.point_dim);
                for l in 0..n {
                    tangent_part += df.column(l) * gammas[a][(l, b)];
                }
                let ea = Vect::from_fn(n, |r, _| if r == a { 1.0 } else { 0.0 });
                let eb = Vect::from_fn(n, |r, _| if r == b { 1.0 } else { 0.0 });
                let alpha = data.alpha0.apply(&x, &ea, &eb);
                let mut alpha_hat = Vect::zeros(data.total_rank());
                for r in 0..alpha.len() {
                    alpha_hat[n + r] = alpha[r];
                }
                let expected = tangent_part + &l_map * alpha_hat;
                alpha_max = alpha_max.max((nab - expected).norm());
            }
        }
    }

    Ok(VerificationReport {
        pullback_metric_max: pullback_max,
        alpha_recovery_max: alpha_max,
        structure_max,
        frame_vs_fd_max,
    })
}

/// Discrete rigidity check: solve with two different sweep orders and return
/// the max node-wise distance between the two base maps.
pub fn uniqueness_check(
    compat: &Compat,
    frame: &FrameField,
    realization: &dyn Realization,
    opts: &SolveOptions,
) -> Result<f64> {
    let n = compat.data.grid.dim();
    let mut o1 = opts.clone();
    o1.axis_order = Some((0..n).collect());
    o1.gate_stride = o1.gate_stride.max(4);
    let mut o2 = o1.clone();
    o2.axis_order = Some((0..n).rev().collect());
    let s1 = solve_grid(compat, frame, realization, &o1)?;
    let s2 = solve_grid(compat, frame, realization, &o2)?;
    let mut worst = 0.0f64;
    for (a, b) in s1.points.iter().zip(s2.points.iter()) {
        worst = worst.max((a - b).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::aligned_max_error;
    use crate::fixtures::{fixture, FixtureParams};
    use crate::realize::realize_target;

    fn setup(name: &str, samples: Option<Vec<usize>>, scale: f64) -> (Compat, FrameField, Box<dyn crate::realize::Realization>, crate::fixtures::Fixture) {
        let params = FixtureParams { alpha_scale: scale, samples };
        let f = fixture(name, &params).unwrap();
        let compat = Compat::new(f.data.clone(), f.model.clone(), f.structure.clone()).unwrap();
        let real = realize_target(&f.model).unwrap();
        (compat, f.frame.clone(), real, f)
    }


    #[test]
    fn curve_integration_examples_and_order() {
        use crate::chart::{BilMapField, ChartGrid, ConnectionField, FieldSource, MetricField, WhitneyData};
        use crate::models::ModelSpace;
        // 1-dimensional chart developing onto the unit 2-sphere with a frame
        // kept parallel: data flat in the structure frame, so lambda has a
        // constant value and the exact flow is a matrix exponential
        let grid = ChartGrid::new(
            Vect::from_vec(vec![0.0]),
            Vect::from_vec(vec![2.0 * std::f64::consts::PI]),
            vec![65],
        )
        .unwrap();
        let speed = 0.6; // |gamma'| in the target
        let data = WhitneyData {
            grid: grid.clone(),
            dim_m: 1,
            rank_e0: 1,
            metric: Some(MetricField::new(FieldSource::constant(Mat::from_element(1, 1, speed * speed)), 0)),
            metric0: Some(MetricField::new(FieldSource::constant(Mat::identity(1, 1)), 0)),
            tangent_conn: ConnectionField::flat(1, 1),
            normal_conn: ConnectionField::flat(1, 1),
            alpha0: BilMapField::zero(1, 1, 1),
            a0: None,
        };
        let _hat_metric = data.whitney_metric().unwrap();
        let frame = FrameField::with_jacobian(
            FieldSource::constant(Mat::from_column_slice(2, 2, &[1.0 / speed, 0.0, 0.0, 1.0])),
            |_x| vec![Mat::zeros(2, 2)],
        );
        let model = ModelSpace::SpaceForm { curvature: 1.0, dim: 2, index: 0 };
        let real = crate::realize::realize_target(&model).unwrap();
        let lambda = LambdaField::new(data.clone(), frame.clone()).unwrap();
        // lambda value is constant (theta = e1, omega = 0): check it
        let (theta, omega) = lambda.at(&Vect::from_vec(vec![1.0]), &Vect::from_vec(vec![1.0])).unwrap();
        assert!((theta - Vect::from_vec(vec![speed, 0.0])).norm() < 1e-14);
        assert!(omega.norm() < 1e-14);

        let id = real.identity_state();
        let curve: Vec<Vect> = (0..grid.node_count()).map(|i| grid.node(&[i])).collect();
        let path = integrate_along_curve(&lambda, real.as_ref(), &id, &curve, 1).unwrap();
        // exact endpoint: the development is a great-circle arc of length
        // 2 pi speed; transporting by the constant rotation generator
        let u = Vect::from_vec(vec![speed, 0.0]);
        let om0 = Mat::zeros(2, 2);
        let exact = real
            .exp_lambda(&u, &om0, 2.0 * std::f64::consts::PI)
            .unwrap();
        let err64 = (path.last().unwrap() - &exact).norm();
        // base point sits at angle L = 2 pi speed along a great circle
        let p = real.point(path.last().unwrap());
        let angle = (2.0 * std::f64::consts::PI * speed).rem_euclid(2.0 * std::f64::consts::PI);
        assert!((p[2] - angle.cos()).abs() < 1e-5, "development angle off: {} vs {}", p[2], angle.cos());

        // halving the step: fourth-order convergence
        let path2 = integrate_along_curve(&lambda, real.as_ref(), &id, &curve, 2).unwrap();
        let err128 = (path2.last().unwrap() - &exact).norm();
        assert!(err64 / err128 > 12.0, "rk4 order: {err64:.3e} -> {err128:.3e}");

        // lambda = 0 along a curve leaves the state constant
        let zero_data = WhitneyData {
            metric: Some(MetricField::new(FieldSource::constant(Mat::identity(1, 1)), 0)),
            ..data
        };
        let id_frame = FrameField::with_jacobian(
            FieldSource::constant(Mat::identity(2, 2)),
            |_x| vec![Mat::zeros(2, 2)],
        );
        let lam0 = LambdaField::new(zero_data, id_frame).unwrap();
        let flat = crate::realize::realize_target(&ModelSpace::SpaceForm { curvature: 0.0, dim: 2, index: 0 }).unwrap();
        let idf = flat.identity_state();
        // zero tangent steps: traverse the same node twice
        let still = integrate_along_curve(&lam0, flat.as_ref(), &idf, &[curve[0].clone(), curve[0].clone()], 1).unwrap();
        assert!((still.last().unwrap() - &idf).norm() < 1e-15);
    }

    #[test]
    fn flat_segment_moves_linearly() {
        let (_c, frame, real, f) = setup("flat_plane", Some(vec![7, 7]), 1.0);
        let lambda = LambdaField::new(f.data.clone(), frame.clone()).unwrap();
        let a = f.data.grid.node(&[1, 1]);
        let b = f.data.grid.node(&[5, 1]);
        let id = real.identity_state();
        let path = integrate_along_curve(&lambda, real.as_ref(), &id, &[a.clone(), b.clone()], 1).unwrap();
        let moved = real.point(path.last().unwrap()) - real.point(&id);
        let expect = Vect::from_vec(vec![b[0] - a[0], b[1] - a[1], 0.0]);
        assert!((moved - expect).norm() < 1e-10);
    }

    #[test]
    fn flat_plane_is_reconstructed_exactly() {
        let (compat, frame, real, fixt) = setup("flat_plane", Some(vec![7, 7]), 1.0);
        let sol = solve_grid(&compat, &frame, real.as_ref(), &SolveOptions::default()).unwrap();
        let exact = fixt.exact.as_ref().unwrap();
        let dst: Vec<Vect> = (0..sol.grid.node_count())
            .map(|i| exact(&sol.grid.node(&sol.grid.multi_of(i))))
            .collect();
        let err = aligned_max_error(&sol.points, &dst);
        assert!(err < 1e-10, "flat reconstruction error {err:.3e}");
        assert!(sol.diagnostics.verification.pullback_metric_max < 1e-10);
        assert!(sol.diagnostics.holonomy_max < 1e-12);
    }

    #[test]
    fn sphere_reconstruction_accuracy_and_order() {
        let (compat, frame, real, fixt) = setup("sphere", Some(vec![41, 41]), 1.0);
        let sol = solve_grid(&compat, &frame, real.as_ref(), &SolveOptions::default()).unwrap();
        let exact = fixt.exact.as_ref().unwrap();
        let dst: Vec<Vect> = (0..sol.grid.node_count())
            .map(|i| exact(&sol.grid.node(&sol.grid.multi_of(i))))
            .collect();
        let err41 = aligned_max_error(&sol.points, &dst);
        assert!(err41 < 1e-6, "sphere 41x41 error {err41:.3e}");

        // halving h: 81x81 over the same chart
        let (compat2, frame2, real2, fixt2) = setup("sphere", Some(vec![81, 81]), 1.0);
        let sol2 = solve_grid(&compat2, &frame2, real2.as_ref(), &SolveOptions::default()).unwrap();
        let exact2 = fixt2.exact.as_ref().unwrap();
        let dst2: Vec<Vect> = (0..sol2.grid.node_count())
            .map(|i| exact2(&sol2.grid.node(&sol2.grid.multi_of(i))))
            .collect();
        let err81 = aligned_max_error(&sol2.points, &dst2);
        assert!(
            err41 / err81 >= 8.0,
            "halving h only improved {err41:.3e} -> {err81:.3e}"
        );
    }

    #[test]
    fn sphere_solution_lies_on_a_unit_sphere() {
        let (compat, frame, real, fixt) = setup("sphere", Some(vec![41, 41]), 1.0);
        let sol = solve_grid(&compat, &frame, real.as_ref(), &SolveOptions::default()).unwrap();
        // align onto the exact parametrization, then the image is the unit sphere
        let exact = fixt.exact.as_ref().unwrap();
        let dst: Vec<Vect> = (0..sol.grid.node_count())
            .map(|i| exact(&sol.grid.node(&sol.grid.multi_of(i))))
            .collect();
        let (q, t) = crate::align::rigid_align(&sol.points, &dst);
        for p in &sol.points {
            let y = &q * p + &t;
            assert!((y.norm() - 1.0).abs() < 1e-6);
        }
        // verification residuals
        let v = &sol.diagnostics.verification;
        assert!(v.pullback_metric_max < 1e-4, "pullback {:.3e}", v.pullback_metric_max);
        assert!(v.structure_max < 1e-7, "structure {:.3e}", v.structure_max);
    }

    #[test]
    fn nil_cylinder_reconstructed_nodewise() {
        let (compat, frame, real, fixt) = setup("nil_cylinder", Some(vec![33, 33]), 1.0);
        let mut opts = SolveOptions::default();
        opts.initial_state = fixt.initial_state.clone();
        let sol = solve_grid(&compat, &frame, real.as_ref(), &opts).unwrap();
        let exact = fixt.exact.as_ref().unwrap();
        let mut worst = 0.0f64;
        for i in 0..sol.grid.node_count() {
            let x = sol.grid.node(&sol.grid.multi_of(i));
            worst = worst.max((&sol.points[i] - exact(&x)).norm());
        }
        assert!(worst < 1e-5, "cylinder node error {worst:.3e}");
        assert!(sol.diagnostics.verification.structure_max < 1e-9);
    }

    #[test]
    fn h2xr_line_coordinate_is_constant() {
        let (compat, frame, real, _f) = setup("h2xr", Some(vec![13, 13]), 1.0);
        let sol = solve_grid(&compat, &frame, real.as_ref(), &SolveOptions::default()).unwrap();
        for p in &sol.points {
            assert!(p[3].abs() < 1e-9, "line coordinate moved: {}", p[3]);
        }
        // the hyperboloid factor stays on the quadric
        for p in &sol.points {
            let q = p[0] * p[0] + p[1] * p[1] - p[2] * p[2];
            assert!((q + 1.0).abs() < 1e-8, "left quadric defect {q:+.3e}");
        }
    }

    #[test]
    fn residual_gate_blocks_incompatible_data_unless_forced() {
        let (compat, frame, real, _f) = setup("sphere", Some(vec![9, 9]), 1.1);
        let err = solve_grid(&compat, &frame, real.as_ref(), &SolveOptions::default());
        assert!(matches!(err, Err(Error::ResidualGate { .. })));
        let mut opts = SolveOptions::default();
        opts.force = true;
        opts.step_refine = 4;
        assert!(solve_grid(&compat, &frame, real.as_ref(), &opts).is_ok());
    }

    #[test]
    fn holonomy_flat_is_zero_and_scales_with_perturbation() {
        let (_c, frame, real, f) = setup("flat_plane", Some(vec![7, 7]), 1.0);
        let lambda = LambdaField::new(f.data.clone(), frame.clone()).unwrap();
        let hol = holonomy_residual(&lambda, real.as_ref(), &[3, 3], (0, 1), 1).unwrap();
        assert!(hol < 1e-14, "flat holonomy {hol:.3e}");

        // perturbation scaling on the sphere
        let mut ratios = Vec::new();
        for delta in [1e-3, 1e-2, 1e-1] {
            let (_c2, frame2, real2, f2) = setup("sphere", Some(vec![21, 21]), 1.0 + delta);
            let lam = LambdaField::new(f2.data.clone(), frame2.clone()).unwrap();
            let h = holonomy_residual(&lam, real2.as_ref(), &[10, 10], (0, 1), 1).unwrap();
            ratios.push(h / delta);
        }
        let rmax = ratios.iter().cloned().fold(0.0f64, f64::max);
        let rmin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(rmax / rmin < 3.0, "holonomy/delta ratios spread: {ratios:?}");
    }

    #[test]
    fn uniqueness_check_small_on_controls_large_on_perturbed() {
        let (compat, frame, real, _f) = setup("sphere", Some(vec![41, 41]), 1.0);
        let mut uo = SolveOptions::default();
        uo.step_refine = 2;
        let d = uniqueness_check(&compat, &frame, real.as_ref(), &uo).unwrap();
        assert!(d < 1e-7, "sweep orders disagree by {d:.3e}");

        let (compat2, frame2, real2, _f2) = setup("sphere", Some(vec![21, 21]), 1.2);
        let mut opts = SolveOptions::default();
        opts.force = true;
        let d2 = uniqueness_check(&compat2, &frame2, real2.as_ref(), &opts).unwrap();
        assert!(d2 > 1e-3, "perturbed data still path-independent: {d2:.3e}");
    }


    #[test]
    fn holonomy_bounded_by_residual_plus_h2_on_controls() {
        for name in ["sphere", "nil_cylinder", "h2xr"] {
            let (compat, frame, real, f) = setup(name, Some(vec![21, 21]), 1.0);
            let lambda = LambdaField::new(f.data.clone(), frame.clone()).unwrap();
            let hol = holonomy_scan(&lambda, real.as_ref(), 1, 5).unwrap();
            let plan = crate::compat::SamplePlan {
                seed: 1,
                random_tuples_per_node: 2,
                node_stride: 4,
                margin_nodes: 1,
            };
            let rep = crate::compat::full_report(&compat, plan).unwrap();
            let h = f.data.grid.min_spacing();
            let bound = rep.max_residual() + h * h;
            assert!(hol < bound, "{name}: holonomy {hol:.3e} above bound {bound:.3e}");
        }
    }

    #[test]
    fn non_structural_initial_state_is_rejected() {
        let (compat, frame, real, _f) = setup("sphere", Some(vec![21, 21]), 1.0);
        let mut bad = real.identity_state();
        // shear the rotation block: no longer orthogonal
        bad[1] += 0.05;
        let opts = SolveOptions { initial_state: Some(bad), ..SolveOptions::default() };
        match solve_grid(&compat, &frame, real.as_ref(), &opts) {
            Err(Error::FrameNotInStructure(r)) => assert!(r > 1e-2),
            other => panic!("expected FrameNotInStructure, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn rigid_motion_equivariance() {
        let (compat, frame, real, _f) = setup("sphere", Some(vec![21, 21]), 1.0);
        let base = solve_grid(&compat, &frame, real.as_ref(), &SolveOptions::default()).unwrap();
        // compose the initial condition with an isometry of the flat target
        let u = Vect::from_vec(vec![0.4, -0.2, 0.7]);
        let mut om = Mat::zeros(3, 3);
        om[(0, 1)] = 0.6;
        om[(1, 0)] = -0.6;
        om[(2, 0)] = 0.3;
        om[(0, 2)] = -0.3;
        let g = real.exp_lambda(&u, &om, 1.0).unwrap();
        let mut opts = SolveOptions::default();
        opts.initial_state = Some(real.compose(&g, &real.identity_state()).unwrap());
        let moved = solve_grid(&compat, &frame, real.as_ref(), &opts).unwrap();
        // the moved solution is the isometry applied to the base solution
        let gm = Mat::from_column_slice(4, 4, g.as_slice());
        let mut worst = 0.0f64;
        for (s, p) in base.states.iter().zip(moved.points.iter()) {
            let fs = Mat::from_column_slice(4, 4, s.as_slice());
            let composed = &gm * fs;
            let expect = Vect::from_fn(3, |i, _| composed[(i, 3)]);
            worst = worst.max((p - expect).norm());
        }
        assert!(worst < 1e-10, "equivariance defect {worst:.3e}");
    }

    #[test]
    fn frame_preservation_along_integration() {
        let (compat, frame, real, _f) = setup("clifford_torus", Some(vec![17, 17]), 1.0);
        let sol = solve_grid(&compat, &frame, real.as_ref(), &SolveOptions::default()).unwrap();
        assert!(sol.diagnostics.max_drift < 1e-6, "drift {:.3e}", sol.diagnostics.max_drift);
        assert!(sol.diagnostics.verification.structure_max < 1e-7);
        // clifford torus sits inside the unit 3-sphere
        for p in &sol.points {
            assert!((p.norm() - 1.0).abs() < 1e-7);
        }
    }
}
