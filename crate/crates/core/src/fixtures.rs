//! Built-in closed-form geometries: immersion data over a chart, the
//! structure on the Whitney sum, the target model, a structure frame section,
//! and (where known) the exact immersion for verification.
//!
//! All Christoffel data here is closed form, so the solver's only numerical
//! error source is the integrator itself.

use std::sync::Arc;

use crate::chart::{
    BilMapField, ChartGrid, ConnectionField, FieldSource, FrameField, MetricField, SectionField,
    WhitneyData,
};
use crate::error::{Error, Result};
use crate::gstructure::GStructureSpec;
use crate::models::ModelSpace;
use crate::tensor::{Mat, Vect};

/// A packaged scenario: data, structure, target, frame, initial state, and
/// the exact immersion when one is known.
pub struct Fixture {
    pub name: String,
    pub description: String,
    pub data: WhitneyData,
    pub structure: GStructureSpec,
    pub model: ModelSpace,
    pub frame: FrameField,
    /// Exact immersion in the realization's point coordinates, comparable
    /// after rigid alignment (matrix-group targets) or node-wise (chart
    /// targets with `initial_state` supplied).
    pub exact: Option<Arc<dyn Fn(&Vect) -> Vect + Send + Sync>>,
    /// Initial solver state matching `exact`, where the default identity
    /// state would not.
    pub initial_state: Option<Vect>,
    /// Exact comparison needs rigid alignment first.
    pub align_before_compare: bool,
}

pub const FIXTURE_NAMES: [&str; 5] =
    ["flat_plane", "sphere", "clifford_torus", "h2xr", "nil_cylinder"];

/// Optional overrides applied on top of a fixture's defaults.
#[derive(Debug, Clone)]
pub struct FixtureParams {
    /// Scale factor applied to the second fundamental form data; 1.0 is the
    /// compatible geometry, anything else is a negative control.
    pub alpha_scale: f64,
    /// Override the default chart sampling (same bounds).
    pub samples: Option<Vec<usize>>,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self { alpha_scale: 1.0, samples: None }
    }
}

pub fn fixture(name: &str, params: &FixtureParams) -> Result<Fixture> {
    match name {
        "flat_plane" => flat_plane(params),
        "sphere" => sphere(params),
        "clifford_torus" => clifford_torus(params),
        "h2xr" => h2xr(params),
        "nil_cylinder" => nil_cylinder(params),
        other => Err(Error::Config(format!(
            "unknown fixture '{other}'; available: {}",
            FIXTURE_NAMES.join(", ")
        ))),
    }
}

fn samples_or(params: &FixtureParams, default: [usize; 2]) -> Vec<usize> {
    params.samples.clone().unwrap_or_else(|| default.to_vec())
}

/// Totally geodesic plane in flat 3-space.
fn flat_plane(params: &FixtureParams) -> Result<Fixture> {
    let grid = ChartGrid::new(
        Vect::from_vec(vec![-1.0, -1.0]),
        Vect::from_vec(vec![1.0, 1.0]),
        samples_or(params, [11, 11]),
    )?;
    let metric = MetricField::new(FieldSource::constant(Mat::identity(2, 2)), 0);
    let metric0 = MetricField::new(FieldSource::constant(Mat::identity(1, 1)), 0);
    let alpha_mats = vec![Mat::zeros(1, 2); 2];
    let data = WhitneyData {
        grid: grid.clone(),
        dim_m: 2,
        rank_e0: 1,
        metric: Some(metric.clone()),
        metric0: Some(metric0.clone()),
        tangent_conn: ConnectionField::flat(2, 2),
        normal_conn: ConnectionField::flat(2, 1),
        alpha0: BilMapField::new(1, 2, FieldSource::constant(alpha_mats)),
        a0: None,
    };
    let hat_metric = data.whitney_metric().unwrap();
    let structure = GStructureSpec::Orthonormal { metric: hat_metric };
    let frame = FrameField::with_jacobian(FieldSource::constant(Mat::identity(3, 3)), |_x| {
        vec![Mat::zeros(3, 3); 2]
    });
    Ok(Fixture {
        name: "flat_plane".into(),
        description: "totally geodesic plane in flat 3-space".into(),
        data,
        structure,
        model: ModelSpace::SpaceForm { curvature: 0.0, dim: 3, index: 0 },
        frame,
        exact: Some(Arc::new(|x: &Vect| Vect::from_vec(vec![x[0], x[1], 0.0]))),
        initial_state: None,
        align_before_compare: true,
    })
}

/// Unit round sphere immersed in flat 3-space; chart in spherical angles.
fn sphere(params: &FixtureParams) -> Result<Fixture> {
    let grid = ChartGrid::new(
        Vect::from_vec(vec![0.3, 0.0]),
        Vect::from_vec(vec![std::f64::consts::PI - 0.3, std::f64::consts::PI]),
        samples_or(params, [41, 41]),
    )?;
    let metric = MetricField::new(
        FieldSource::closed(|x: &Vect| {
            Mat::from_column_slice(2, 2, &[1.0, 0.0, 0.0, x[0].sin().powi(2)])
        }),
        0,
    );
    let metric0 = MetricField::new(FieldSource::constant(Mat::identity(1, 1)), 0);
    // closed-form Levi-Civita of the round metric
    let tangent_conn = ConnectionField::new(
        2,
        FieldSource::closed(|x: &Vect| {
            let (s, c) = (x[0].sin(), x[0].cos());
            let g_theta = Mat::from_column_slice(2, 2, &[0.0, 0.0, 0.0, c / s]);
            let g_phi = Mat::from_column_slice(2, 2, &[0.0, c / s, -s * c, 0.0]);
            vec![g_theta, g_phi]
        }),
    );
    let scale = params.alpha_scale;
    let alpha0 = BilMapField::new(
        1,
        2,
        FieldSource::closed(move |x: &Vect| {
            let s2 = x[0].sin().powi(2);
            vec![
                Mat::from_row_slice(1, 2, &[scale, 0.0]),
                Mat::from_row_slice(1, 2, &[0.0, scale * s2]),
            ]
        }),
    );
    let data = WhitneyData {
        grid: grid.clone(),
        dim_m: 2,
        rank_e0: 1,
        metric: Some(metric.clone()),
        metric0: Some(metric0),
        tangent_conn,
        normal_conn: ConnectionField::flat(2, 1),
        alpha0,
        a0: None,
    };
    let hat_metric = data.whitney_metric().unwrap();
    let structure = GStructureSpec::Orthonormal { metric: hat_metric };
    // orthonormal section of the whitney sum: (d_theta, d_phi / sin, e0)
    let frame = FrameField::with_jacobian(
        FieldSource::closed(|x: &Vect| {
            Mat::from_column_slice(
                3,
                3,
                &[1.0, 0.0, 0.0, 0.0, 1.0 / x[0].sin(), 0.0, 0.0, 0.0, 1.0],
            )
        }),
        |x: &Vect| {
            let (s, c) = (x[0].sin(), x[0].cos());
            let mut d_theta = Mat::zeros(3, 3);
            d_theta[(1, 1)] = -c / (s * s);
            vec![d_theta, Mat::zeros(3, 3)]
        },
    );
    Ok(Fixture {
        name: "sphere".into(),
        description: "unit round sphere in flat 3-space (spherical chart)".into(),
        data,
        structure,
        model: ModelSpace::SpaceForm { curvature: 0.0, dim: 3, index: 0 },
        frame,
        exact: Some(Arc::new(|x: &Vect| {
            let (t, p) = (x[0], x[1]);
            Vect::from_vec(vec![t.sin() * p.cos(), t.sin() * p.sin(), t.cos()])
        })),
        initial_state: None,
        align_before_compare: true,
    })
}

/// Clifford torus in the round 3-sphere.
fn clifford_torus(params: &FixtureParams) -> Result<Fixture> {
    let grid = ChartGrid::new(
        Vect::from_vec(vec![0.0, 0.0]),
        Vect::from_vec(vec![2.4, 2.4]),
        samples_or(params, [17, 17]),
    )?;
    let metric = MetricField::new(FieldSource::constant(Mat::identity(2, 2) * 0.5), 0);
    let metric0 = MetricField::new(FieldSource::constant(Mat::identity(1, 1)), 0);
    let scale = params.alpha_scale;
    let alpha0 = BilMapField::new(
        1,
        2,
        FieldSource::constant(vec![
            Mat::from_row_slice(1, 2, &[0.5 * scale, 0.0]),
            Mat::from_row_slice(1, 2, &[0.0, -0.5 * scale]),
        ]),
    );
    let data = WhitneyData {
        grid: grid.clone(),
        dim_m: 2,
        rank_e0: 1,
        metric: Some(metric),
        metric0: Some(metric0),
        tangent_conn: ConnectionField::flat(2, 2),
        normal_conn: ConnectionField::flat(2, 1),
        alpha0,
        a0: None,
    };
    let hat_metric = data.whitney_metric().unwrap();
    let structure = GStructureSpec::Orthonormal { metric: hat_metric };
    let r2 = std::f64::consts::SQRT_2;
    let frame = FrameField::with_jacobian(
        FieldSource::constant(Mat::from_column_slice(
            3,
            3,
            &[r2, 0.0, 0.0, 0.0, r2, 0.0, 0.0, 0.0, 1.0],
        )),
        |_x| vec![Mat::zeros(3, 3); 2],
    );
    Ok(Fixture {
        name: "clifford_torus".into(),
        description: "Clifford torus in the unit 3-sphere".into(),
        data,
        structure,
        model: ModelSpace::SpaceForm { curvature: 1.0, dim: 3, index: 0 },
        frame,
        exact: Some(Arc::new(|x: &Vect| {
            let s = 1.0 / std::f64::consts::SQRT_2;
            Vect::from_vec(vec![
                s * x[0].cos(),
                s * x[0].sin(),
                s * x[1].cos(),
                s * x[1].sin(),
            ])
        })),
        initial_state: None,
        align_before_compare: true,
    })
}

/// Totally geodesic hyperbolic slice of the product of a hyperbolic plane
/// and a line; half-plane chart.
fn h2xr(params: &FixtureParams) -> Result<Fixture> {
    let grid = ChartGrid::new(
        Vect::from_vec(vec![-0.8, 0.6]),
        Vect::from_vec(vec![0.8, 2.2]),
        samples_or(params, [17, 17]),
    )?;
    let metric = MetricField::new(
        FieldSource::closed(|x: &Vect| {
            let s = 1.0 / (x[1] * x[1]);
            Mat::from_column_slice(2, 2, &[s, 0.0, 0.0, s])
        }),
        0,
    );
    let metric0 = MetricField::new(FieldSource::constant(Mat::identity(1, 1)), 0);
    // half-plane Levi-Civita in closed form
    let tangent_conn = ConnectionField::new(
        2,
        FieldSource::closed(|x: &Vect| {
            let iy = 1.0 / x[1];
            // Gamma(e_a), Gamma(e_b): columns are the images of (e_a, e_b)
            let ga = Mat::from_column_slice(2, 2, &[0.0, iy, -iy, 0.0]);
            let gb = Mat::from_column_slice(2, 2, &[-iy, 0.0, 0.0, -iy]);
            vec![ga, gb]
        }),
    );
    let alpha0 = BilMapField::new(
        1,
        2,
        FieldSource::constant(vec![Mat::zeros(1, 2), Mat::zeros(1, 2)]),
    );
    let data = WhitneyData {
        grid: grid.clone(),
        dim_m: 2,
        rank_e0: 1,
        metric: Some(metric.clone()),
        metric0: Some(metric0),
        tangent_conn,
        normal_conn: ConnectionField::flat(2, 1),
        alpha0,
        a0: None,
    };
    let hat_metric = data.whitney_metric().unwrap();
    // adapted orthonormal structure: the first factor subspace is TM
    let sub = FrameField::with_jacobian(
        FieldSource::constant(Mat::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])),
        |_x| vec![Mat::zeros(3, 2); 2],
    );
    let structure =
        GStructureSpec::AdaptedOrthonormal { metric: hat_metric, sub, sub_index: 0 };
    let frame = FrameField::with_jacobian(
        FieldSource::closed(|x: &Vect| {
            Mat::from_column_slice(3, 3, &[x[1], 0.0, 0.0, 0.0, x[1], 0.0, 0.0, 0.0, 1.0])
        }),
        |_x| {
            let mut db = Mat::zeros(3, 3);
            db[(0, 0)] = 1.0;
            db[(1, 1)] = 1.0;
            vec![Mat::zeros(3, 3), db]
        },
    );
    // initial state matching the closed-form hyperboloid immersion at the
    // start node: quadric factor columns (b da phi, b db phi, phi), line
    // factor at the identity
    let start = grid.node(&grid.nearest_node(&Vect::from_vec(vec![0.0, 1.4])));
    let (a0, b0) = (start[0], start[1]);
    let phi = |a: f64, b: f64| {
        Vect::from_vec(vec![
            (a * a + b * b - 1.0) / (2.0 * b),
            a / b,
            (a * a + b * b + 1.0) / (2.0 * b),
        ])
    };
    let da = Vect::from_vec(vec![a0 / b0, 1.0 / b0, a0 / b0]) * b0;
    let db = Vect::from_vec(vec![
        (b0 * b0 - a0 * a0 + 1.0) / (2.0 * b0 * b0),
        -a0 / (b0 * b0),
        (b0 * b0 - a0 * a0 - 1.0) / (2.0 * b0 * b0),
    ]) * b0;
    let mut quadric_state = Mat::zeros(3, 3);
    quadric_state.set_column(0, &da);
    quadric_state.set_column(1, &db);
    quadric_state.set_column(2, &phi(a0, b0));
    let mut initial = Vect::zeros(9 + 4);
    for (i, v) in quadric_state.as_slice().iter().enumerate() {
        initial[i] = *v;
    }
    // 2x2 affine identity for the line factor, column-major
    initial[9] = 1.0;
    initial[12] = 1.0;
    Ok(Fixture {
        name: "h2xr".into(),
        description: "totally geodesic hyperbolic slice of (hyperbolic plane) x (line)".into(),
        data,
        structure,
        model: ModelSpace::Product(vec![
            ModelSpace::SpaceForm { curvature: -1.0, dim: 2, index: 0 },
            ModelSpace::SpaceForm { curvature: 0.0, dim: 1, index: 0 },
        ]),
        frame,
        exact: Some(Arc::new(|x: &Vect| {
            // half-plane onto the hyperboloid sheet, line coordinate constant
            let (a, b) = (x[0], x[1]);
            Vect::from_vec(vec![
                (a * a + b * b - 1.0) / (2.0 * b),
                a / b,
                (a * a + b * b + 1.0) / (2.0 * b),
                0.0,
            ])
        })),
        initial_state: Some(initial),
        align_before_compare: false,
    })
}

/// Vertical round cylinder in the Heisenberg-type geometry E(0, tau).
fn nil_cylinder(params: &FixtureParams) -> Result<Fixture> {
    let tau: f64 = 0.5;
    let radius: f64 = 0.8;
    let grid = ChartGrid::new(
        Vect::from_vec(vec![-1.2, -1.0]),
        Vect::from_vec(vec![1.2, 1.0]),
        samples_or(params, [17, 17]),
    )?;
    let (r, t) = (radius, tau);
    // induced metric of the cylinder x^2 + y^2 = r^2 in chart (angle u, height z)
    let g_mat = Mat::from_column_slice(
        2,
        2,
        &[r * r + t * t * r.powi(4), -t * r * r, -t * r * r, 1.0],
    );
    let metric = MetricField::new(FieldSource::constant(g_mat), 0);
    let metric0 = MetricField::new(FieldSource::constant(Mat::identity(1, 1)), 0);
    let scale = params.alpha_scale;
    // second fundamental form in the (u, z) chart against the outward normal
    let alpha0 = BilMapField::new(
        1,
        2,
        FieldSource::constant(vec![
            Mat::from_row_slice(1, 2, &[-r * (1.0 + 2.0 * t * t * r * r) * scale, t * r * scale]),
            Mat::from_row_slice(1, 2, &[t * r * scale, 0.0]),
        ]),
    );
    let data = WhitneyData {
        grid: grid.clone(),
        dim_m: 2,
        rank_e0: 1,
        metric: Some(metric),
        metric0: Some(metric0),
        tangent_conn: ConnectionField::flat(2, 2),
        normal_conn: ConnectionField::flat(2, 1),
        alpha0,
        a0: None,
    };
    let hat_metric = data.whitney_metric().unwrap();
    // the vertical field is tangent to the cylinder: unit section (X, nu) = (d_z, 0)
    let section = SectionField {
        source: FieldSource::constant(Vect::from_vec(vec![0.0, 1.0, 0.0])),
    };
    let structure = GStructureSpec::OrientedUnitVector3 {
        metric: hat_metric,
        section,
        orientation: 1.0,
    };
    // structure frame: (xi-section, normalized horizontal tangent flipped, e0)
    let frame = FrameField::with_jacobian(
        FieldSource::constant(Mat::from_column_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, -1.0 / r, -t * r, 0.0, 0.0, 0.0, 1.0],
        )),
        |_x| vec![Mat::zeros(3, 3); 2],
    );
    // initial state matching the exact cylinder at the start node
    let start = grid.node(&grid.nearest_node(&Vect::from_vec(vec![0.0, 0.0])));
    let (u0, z0) = (start[0], start[1]);
    let (c0, s0) = (u0.cos(), u0.sin());
    let y0 = Vect::from_vec(vec![r * c0, r * s0, z0]);
    // target frame components (xi, E1, E2) of L s(x0) e_i
    let q = Mat::from_column_slice(
        3,
        3,
        &[1.0, 0.0, 0.0, 0.0, s0, -c0, 0.0, c0, s0],
    );
    let mut initial = Vect::zeros(12);
    for i in 0..3 {
        initial[i] = y0[i];
    }
    for (i, v) in q.as_slice().iter().enumerate() {
        initial[3 + i] = *v;
    }
    Ok(Fixture {
        name: "nil_cylinder".into(),
        description: "vertical round cylinder in E(0, 1/2) (Heisenberg geometry)".into(),
        data,
        structure,
        model: ModelSpace::EKappaTau { kappa: 0.0, tau },
        frame,
        exact: Some(Arc::new(move |x: &Vect| {
            Vect::from_vec(vec![r * x[0].cos(), r * x[0].sin(), x[1]])
        })),
        initial_state: Some(initial),
        align_before_compare: false,
    })
}
