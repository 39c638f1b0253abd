//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured figure once its assertions hold.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use framefield_core::align::aligned_max_error;
use framefield_core::chart::{ChartGrid, ConnectionField, DiffParams, EndoField, FieldSource};
use framefield_core::compat::{full_report, Compat, SamplePlan};
use framefield_core::config::RunConfig;
use framefield_core::fixtures::{fixture, FixtureParams, FIXTURE_NAMES};
use framefield_core::gstructure::{standard_complex_structure, GStructureSpec, StructureAt};
use framefield_core::models::{characteristic_tensors, LieAlgebra, LieConnection, ModelSpace};
use framefield_core::realize::realize_target;
use framefield_core::run::{cmd_check, cmd_solve};
use framefield_core::solver::{holonomy_residual, solve_grid, uniqueness_check, LambdaField, SolveOptions};
use framefield_core::tensor::Bilinear;

type Mat = DMatrix<f64>;
type Vect = DVector<f64>;

fn randv(rng: &mut ChaCha8Rng, n: usize) -> Vect {
    Vect::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn structure_zoo() -> Vec<(&'static str, StructureAt)> {
    vec![
        (
            "trivial_frame",
            StructureAt::TrivialFrame {
                frame: Mat::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.3, 0.1, 0.0, 1.0]),
            },
        ),
        ("orthonormal", StructureAt::Orthonormal { g: Bilinear::minkowski(4, 1) }),
        (
            "subbundle",
            StructureAt::Subbundle {
                basis: Mat::from_row_slice(4, 2, &[1.0, 0.1, 0.0, 1.0, 0.2, 0.0, 0.0, 0.3]),
                g: None,
            },
        ),
        (
            "adapted_orthonormal",
            StructureAt::AdaptedOrthonormal {
                g: Bilinear::euclidean(4),
                basis: Mat::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
                sub_index: 0,
            },
        ),
        (
            "unit_section",
            StructureAt::UnitSection {
                eps: Vect::from_vec(vec![0.6, 0.8, 0.0]),
                g: Some(Bilinear::euclidean(3)),
            },
        ),
        (
            "almost_complex",
            StructureAt::AlmostComplex { j: standard_complex_structure(4) },
        ),
        (
            "unitary",
            StructureAt::Unitary { g: Bilinear::euclidean(4), j: standard_complex_structure(4) },
        ),
        (
            "oriented_unit_vector3",
            StructureAt::OrientedUnitVector3 {
                g: Bilinear::euclidean(3),
                eps: Vect::from_vec(vec![1.0, 0.0, 0.0]),
                orientation: 1.0,
            },
        ),
    ]
}

/// Criterion 1: structure-algebra elements project to zero under the quotient
/// identifications; generic elements do not.
#[test]
fn criterion_1_inner_torsion_kernel_suite() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for (name, s) in structure_zoo() {
        let k = s.dim();
        for _ in 0..200 {
            let member = s.random_lie_member(&mut rng);
            let q = s.quotient_project(&member).unwrap();
            assert!(q.norm() < 1e-12, "{name}: member projects to {:.3e}", q.norm());
        }
        let mut nonzero = 0usize;
        for _ in 0..200 {
            let x = Mat::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
            if s.quotient_project(&x).unwrap().norm() > 1e-8 {
                nonzero += 1;
            }
        }
        assert_eq!(nonzero, 200, "{name}: some generic elements projected to zero");
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 5.0, "kernel suite took {dt:.1}s");
    println!("criterion 1 (inner-torsion kernel suite): PASS in {dt:.2}s");
}

/// Criterion 2: the closed inner-torsion forms match the definition-level
/// computation through an explicit structure frame section.
#[test]
fn criterion_2_inner_torsion_formula_equivalence() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;

    // round sphere: orthonormal structure on the whitney sum
    {
        let f = fixture("sphere", &FixtureParams { alpha_scale: 1.0, samples: Some(vec![15, 15]) }).unwrap();
        let compat = Compat::new(f.data.clone(), f.model.clone(), f.structure.clone()).unwrap();
        let hat = compat.whitney_connection();
        let grid = &f.data.grid;
        let dp = compat.dp;
        for idx in [33, 64, 96] {
            let x = grid.node(&grid.multi_of(idx * grid.node_count() / 128 % grid.node_count()));
            if !grid.contains(&x, 0.1) {
                continue;
            }
            for i in 0..2 {
                let v = Vect::from_fn(2, |r, _| if r == i { 1.0 } else { 0.0 });
                let closed = f.structure.inner_torsion(hat, grid, &x, &v, dp).unwrap();
                let via = f
                    .structure
                    .inner_torsion_via_frame(hat, &f.frame, grid, &x, &v, dp)
                    .unwrap();
                worst = worst.max(closed.distance(&via).unwrap());
            }
        }
    }

    // nil cylinder: oriented unit-vector structure (metric unit-section form)
    {
        let f = fixture("nil_cylinder", &FixtureParams { alpha_scale: 1.0, samples: Some(vec![15, 15]) }).unwrap();
        let compat = Compat::new(f.data.clone(), f.model.clone(), f.structure.clone()).unwrap();
        let hat = compat.whitney_connection();
        let grid = &f.data.grid;
        let x = grid.node(&[7, 7]);
        for i in 0..2 {
            let v = Vect::from_fn(2, |r, _| if r == i { 1.0 } else { 0.0 });
            let closed = f.structure.inner_torsion(hat, grid, &x, &v, compat.dp).unwrap();
            let via = f
                .structure
                .inner_torsion_via_frame(hat, &f.frame, grid, &x, &v, compat.dp)
                .unwrap();
            worst = worst.max(closed.distance(&via).unwrap());
        }
    }

    // almost complex structure with a varying J on a flat chart
    {
        let grid = ChartGrid::new(Vect::zeros(2), Vect::from_element(2, 1.0), vec![9, 9]).unwrap();
        let j_field = EndoField {
            source: FieldSource::closed(|x: &Vect| {
                // J = R(t) J0 R(t)^-1 with a position-dependent rotation
                let t = 0.4 * x[0] - 0.3 * x[1];
                let r = Mat::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
                &r * standard_complex_structure(2) * r.transpose()
            }),
        };
        let spec = GStructureSpec::AlmostComplex { j: j_field };
        let conn = ConnectionField::flat(2, 2);
        let frame = spec.frame_section();
        let dp = DiffParams::for_grid(&grid);
        let x = Vect::from_vec(vec![0.5, 0.4]);
        for i in 0..2 {
            let v = Vect::from_fn(2, |r, _| if r == i { 1.0 } else { 0.0 });
            let closed = spec.inner_torsion(&conn, &grid, &x, &v, dp).unwrap();
            let via = spec.inner_torsion_via_frame(&conn, &frame, &grid, &x, &v, dp).unwrap();
            worst = worst.max(closed.distance(&via).unwrap());
        }
    }

    let dt = t0.elapsed().as_secs_f64();
    assert!(worst < 1e-7, "closed forms vs frame projection: {worst:.3e}");
    assert!(dt < 10.0, "formula equivalence took {dt:.1}s");
    println!("criterion 2 (inner-torsion formula equivalence): PASS, max diff {worst:.3e} in {dt:.2}s");
}

/// Criterion 3: catalog cross-consistency of the E(kappa, tau) tensors.
#[test]
fn criterion_3_catalog_cross_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    // permutation between the product layout (h1, h2, vertical) and the
    // E(kappa,tau) layout (vertical, h1, h2)
    let mut perm = Mat::zeros(3, 3);
    perm[(1, 0)] = 1.0;
    perm[(2, 1)] = 1.0;
    perm[(0, 2)] = 1.0;
    let perm_t = perm.transpose();
    let mut worst = 0.0f64;
    for kappa in [-1.0, 0.0, 1.0] {
        let ek = ModelSpace::EKappaTau { kappa, tau: 0.0 };
        let prod = ModelSpace::Product(vec![
            ModelSpace::SpaceForm { curvature: kappa, dim: 2, index: 0 },
            ModelSpace::SpaceForm { curvature: 0.0, dim: 1, index: 0 },
        ]);
        let ek_t = characteristic_tensors(&ek, &ek.standard_structure()).unwrap();
        let prod_t = characteristic_tensors(&prod, &prod.standard_structure()).unwrap();
        for _ in 0..100 {
            let (v, w, u) = (randv(&mut rng, 3), randv(&mut rng, 3), randv(&mut rng, 3));
            let a = &perm_t * ek_t.curvature_apply(&(&perm * &v), &(&perm * &w), &(&perm * &u)).unwrap();
            let b = prod_t.curvature_apply(&v, &w, &u).unwrap();
            worst = worst.max((a - b).norm());
        }
    }
    let tau = 0.7;
    let ek = ModelSpace::EKappaTau { kappa: 4.0 * tau * tau, tau };
    let sf = ModelSpace::SpaceForm { curvature: tau * tau, dim: 3, index: 0 };
    let ek_t = characteristic_tensors(&ek, &ek.standard_structure()).unwrap();
    let sf_t = characteristic_tensors(&sf, &sf.standard_structure()).unwrap();
    for _ in 0..100 {
        let (v, w, u) = (randv(&mut rng, 3), randv(&mut rng, 3), randv(&mut rng, 3));
        let a = ek_t.curvature_apply(&v, &w, &u).unwrap();
        let b = sf_t.curvature_apply(&v, &w, &u).unwrap();
        worst = worst.max((a - b).norm());
    }
    assert!(worst < 1e-12, "catalog cross-consistency defect {worst:.3e}");
    println!("criterion 3 (catalog cross-consistency): PASS, max diff {worst:.3e}");
}

/// Criterion 4: realizations reproduce the characteristic curvature.
#[test]
fn criterion_4_realization_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let models: Vec<(ModelSpace, f64)> = vec![
        (ModelSpace::SpaceForm { curvature: 0.0, dim: 3, index: 0 }, 1e-12),
        (ModelSpace::SpaceForm { curvature: 1.0, dim: 2, index: 0 }, 1e-12),
        (ModelSpace::SpaceForm { curvature: -1.0, dim: 3, index: 0 }, 1e-12),
        (ModelSpace::SpaceForm { curvature: 2.0, dim: 4, index: 1 }, 1e-12),
        (ModelSpace::ComplexSpaceForm { curvature: 1.0, dim: 4, index: 0 }, 1e-11),
        (ModelSpace::ComplexSpaceForm { curvature: -0.8, dim: 4, index: 0 }, 1e-11),
        (
            ModelSpace::LieGroupLeftInvariant {
                algebra: LieAlgebra::heisenberg(),
                inner: Bilinear::euclidean(3),
                connection: LieConnection::LeviCivita,
            },
            1e-8,
        ),
        (
            ModelSpace::LieGroupLeftInvariant {
                algebra: LieAlgebra::so3(),
                inner: Bilinear::euclidean(3),
                connection: LieConnection::LeviCivita,
            },
            1e-8,
        ),
        (ModelSpace::EKappaTau { kappa: 0.0, tau: 0.5 }, 1e-8),
        (ModelSpace::EKappaTau { kappa: 1.0, tau: 0.3 }, 1e-8),
        (ModelSpace::EKappaTau { kappa: -1.0, tau: 0.4 }, 1e-8),
        (
            ModelSpace::Product(vec![
                ModelSpace::SpaceForm { curvature: -1.0, dim: 2, index: 0 },
                ModelSpace::SpaceForm { curvature: 0.0, dim: 1, index: 0 },
            ]),
            1e-12,
        ),
    ];
    for (model, tol) in models {
        assert!(model.dim() <= 4);
        let r = realize_target(&model).unwrap();
        let d = r.curvature_check(&model, &mut rng, 20).unwrap();
        assert!(d <= 1e-8f64.max(tol), "{}: fidelity {d:.3e}", r.describe());
        println!("criterion 4 part ({}): defect {d:.3e}", model.name());
    }
    println!("criterion 4 (realization fidelity): PASS");
}

/// Criterion 5: the compatibility system on the positive controls, and the
/// scaled-alpha negative control.
#[test]
fn criterion_5_compatibility_controls() {
    for name in FIXTURE_NAMES {
        let f = fixture(name, &FixtureParams { alpha_scale: 1.0, samples: Some(vec![11, 11]) }).unwrap();
        let compat = Compat::new(f.data, f.model, f.structure).unwrap();
        let plan = SamplePlan { seed: 105, random_tuples_per_node: 8, node_stride: 2, margin_nodes: 1 };
        let rep = full_report(&compat, plan).unwrap();
        assert!(
            rep.max_residual() < 1e-8,
            "{name}: {} at {:.3e}",
            rep.worst_family(),
            rep.max_residual()
        );
        println!("criterion 5 part ({name}): max residual {:.3e}", rep.max_residual());
    }
    let f = fixture("sphere", &FixtureParams { alpha_scale: 1.1, samples: Some(vec![11, 11]) }).unwrap();
    let compat = Compat::new(f.data, f.model, f.structure).unwrap();
    let plan = SamplePlan { seed: 105, random_tuples_per_node: 8, node_stride: 2, margin_nodes: 1 };
    let rep = full_report(&compat, plan).unwrap();
    let gauss = rep.family("gauss").unwrap();
    assert!(gauss.max > 1e-2, "negative control: gauss only {:.3e}", gauss.max);
    println!("criterion 5 (compatibility controls): PASS, negative control gauss {:.3e}", gauss.max);
}

/// Criterion 6: sphere reconstruction accuracy and convergence order.
#[test]
fn criterion_6_reconstruction_accuracy() {
    let t0 = Instant::now();
    let solve_err = |samples: usize| -> f64 {
        let f = fixture("sphere", &FixtureParams { alpha_scale: 1.0, samples: Some(vec![samples, samples]) })
            .unwrap();
        let compat = Compat::new(f.data.clone(), f.model.clone(), f.structure.clone()).unwrap();
        let real = realize_target(&f.model).unwrap();
        let sol = solve_grid(&compat, &f.frame, real.as_ref(), &SolveOptions::default()).unwrap();
        let exact = f.exact.as_ref().unwrap();
        let dst: Vec<Vect> = (0..sol.grid.node_count())
            .map(|i| exact(&sol.grid.node(&sol.grid.multi_of(i))))
            .collect();
        aligned_max_error(&sol.points, &dst)
    };
    let err41 = solve_err(41);
    let err81 = solve_err(81);
    let dt = t0.elapsed().as_secs_f64();
    assert!(err41 < 1e-6, "41x41 error {err41:.3e}");
    assert!(err41 / err81 >= 8.0, "refinement gain {:.2}", err41 / err81);
    assert!(dt < 10.0, "reconstruction took {dt:.1}s");
    println!(
        "criterion 6 (reconstruction accuracy): PASS, err(41)={err41:.3e}, err(81)={err81:.3e}, gain {:.1}x in {dt:.2}s",
        err41 / err81
    );
}

/// Criterion 7: plaquette holonomy scales linearly with the injected
/// perturbation across two decades.
#[test]
fn criterion_7_frobenius_sensitivity() {
    let mut ratios = Vec::new();
    for delta in [1e-3, 1e-2, 1e-1] {
        let f = fixture(
            "sphere",
            &FixtureParams { alpha_scale: 1.0 + delta, samples: Some(vec![21, 21]) },
        )
        .unwrap();
        let lambda = LambdaField::new(f.data.clone(), f.frame.clone()).unwrap();
        let real = realize_target(&f.model).unwrap();
        let h = holonomy_residual(&lambda, real.as_ref(), &[10, 10], (0, 1), 1).unwrap();
        ratios.push(h / delta);
    }
    let rmax = ratios.iter().cloned().fold(0.0f64, f64::max);
    let rmin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(
        rmax / rmin < 3.0,
        "holonomy-to-perturbation ratios spread beyond 3x: {ratios:?}"
    );
    println!(
        "criterion 7 (frobenius sensitivity): PASS, holonomy/delta in [{rmin:.3e}, {rmax:.3e}]"
    );
}

/// Criterion 8: sweep-order independence on the positive controls, path
/// dependence on the negative control.
#[test]
fn criterion_8_uniqueness_rigidity() {
    let cases: Vec<(&str, Vec<usize>, usize)> = vec![
        ("flat_plane", vec![9, 9], 1),
        ("sphere", vec![41, 41], 2),
        ("clifford_torus", vec![17, 17], 1),
        ("h2xr", vec![17, 17], 3),
        ("nil_cylinder", vec![33, 33], 2),
    ];
    for (name, samples, refine) in cases {
        let f = fixture(name, &FixtureParams { alpha_scale: 1.0, samples: Some(samples) }).unwrap();
        let compat = Compat::new(f.data.clone(), f.model.clone(), f.structure.clone()).unwrap();
        let real = realize_target(&f.model).unwrap();
        let opts = SolveOptions {
            step_refine: refine,
            initial_state: f.initial_state.clone(),
            ..SolveOptions::default()
        };
        let d = uniqueness_check(&compat, &f.frame, real.as_ref(), &opts).unwrap();
        assert!(d < 1e-7, "{name}: sweep orders disagree by {d:.3e}");
        println!("criterion 8 part ({name}): sweep difference {d:.3e}");
    }
    // negative control
    let f = fixture("sphere", &FixtureParams { alpha_scale: 1.2, samples: Some(vec![21, 21]) }).unwrap();
    let compat = Compat::new(f.data.clone(), f.model.clone(), f.structure.clone()).unwrap();
    let real = realize_target(&f.model).unwrap();
    let opts = SolveOptions { force: true, ..SolveOptions::default() };
    let d = uniqueness_check(&compat, &f.frame, real.as_ref(), &opts).unwrap();
    assert!(d > 1e-3, "perturbed data still path-independent: {d:.3e}");
    println!("criterion 8 (uniqueness/rigidity): PASS, negative control difference {d:.3e}");
}

/// Criterion 9: identical config and seed give byte-identical outputs.
#[test]
fn criterion_9_determinism() {
    let dir = std::env::temp_dir().join("framefield-acceptance-determinism");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let mut artifacts: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for run in 0..2 {
        let out = dir.join(format!("run{run}"));
        let cfg = RunConfig::from_json(&format!(
            r#"{{ "fixture": "sphere", "samples": [21, 21], "seed": 4242,
                 "output": {{ "dir": "{}" }} }}"#,
            out.display()
        ))
        .unwrap();
        cmd_check(&cfg).unwrap();
        cmd_solve(&cfg).unwrap();
        let mut files = Vec::new();
        for name in ["check_report.json", "solution.obj", "solution.csv", "solve_summary.json"] {
            files.push((name.to_string(), std::fs::read(out.join(name)).unwrap()));
        }
        artifacts.push(files);
    }
    for ((name, a), (_, b)) in artifacts[0].iter().zip(artifacts[1].iter()) {
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    println!("criterion 9 (determinism): PASS, 4 artifacts byte-identical");
}
