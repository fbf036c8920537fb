use mmo_core::harness::{emit_diagram, overlay_path, sweep_koper, write_diagram_csv, GridSpec, SweepResult};
use mmo_core::{lambda_sh, KoperParams, RegimeLabel, Side};

fn small_grid() -> GridSpec {
    GridSpec {
        k_min: -4.5,
        k_max: -3.5,
        k_step: 0.5,
        lambda_min: 0.0,
        lambda_max: 3.0,
        lambda_step: 1.5,
        ..GridSpec::default()
    }
}

fn csv_of(res: &SweepResult) -> String {
    let mut buf = Vec::new();
    write_diagram_csv(res, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn sweep_is_deterministic_and_independent_of_workers() {
    let g = small_grid();
    let a = sweep_koper(&g).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| sweep_koper(&g).unwrap());
    assert_eq!(a.points.len(), 9);
    assert_eq!(csv_of(&a), csv_of(&b));
    // grid order: k outer, lambda inner
    assert_eq!((a.points[1].k, a.points[1].lambda), (-4.5, 1.5));
}

#[test]
fn diagram_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("diagram.csv");
    let empty = SweepResult {
        points: Vec::new(),
        overlays: Default::default(),
        empirical_divider: None,
        divider_offset: None,
    };
    let json = emit_diagram(&empty, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "k,lambda,regime,farey\n");
    assert_eq!(json, overlay_path(&path));

    let one = sweep_koper(&GridSpec {
        k_min: -4.5,
        k_max: -4.5,
        lambda_min: 0.0,
        lambda_max: 0.0,
        ..GridSpec::default()
    })
    .unwrap();
    emit_diagram(&one, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1], "-4.5,0,RelaxationTwoScale,{L^0}");
    let overlays: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(overlays["overlays"]["k"], serde_json::json!([-4.5]));
}

#[test]
fn failures_are_recorded_per_point() {
    let g = GridSpec {
        k_min: -4.5,
        k_max: -4.5,
        lambda_min: 0.0,
        lambda_max: 0.0,
        integrator: mmo_core::IntegratorConfig {
            max_steps: 10,
            ..Default::default()
        },
        ..GridSpec::default()
    };
    let res = sweep_koper(&g).unwrap();
    assert_eq!(res.points.len(), 1);
    assert!(res.points[0].regime.is_none());
    assert!(res.points[0]
        .error
        .as_deref()
        .unwrap()
        .contains("maximum number of steps"));
    assert!(csv_of(&res).ends_with("-4.5,0,,\n"));
}

/// Coarse version of the two-parameter diagram: steady outside the
/// singular-Hopf wedge, no double epochs well below k = -4 and no single
/// epochs well above it.
#[test]
fn coarse_diagram_consistency() {
    let res = sweep_koper(&GridSpec::default()).unwrap();
    assert_eq!(res.points.len(), 169);
    let divider = res.overlays.geometry_divider.unwrap();
    assert!((divider + 4.0).abs() < 1e-8);
    for p in &res.points {
        let r = p
            .regime
            .unwrap_or_else(|| panic!("({}, {}) failed: {:?}", p.k, p.lambda, p.error));
        let sh = lambda_sh(&KoperParams::new(p.k, 0.0, 0.01, 0.01), Side::Minus);
        if p.lambda.abs() > sh + 0.05 {
            assert_eq!(r, RegimeLabel::SteadyState, "({}, {})", p.k, p.lambda);
        }
        if p.lambda.abs() < sh - 0.05 {
            assert!(
                !(p.k < -4.1 && r == RegimeLabel::MmoDouble),
                "({}, {}): {r}",
                p.k,
                p.lambda
            );
            assert!(!(p.k > -3.9 && r.is_single()), "({}, {}): {r}", p.k, p.lambda);
        }
    }
}
