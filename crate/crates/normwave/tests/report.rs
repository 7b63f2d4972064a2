use normwave::dynamics::{evolve, ComplexField};
use normwave::flow::{solve_global, FlowConfig};
use normwave::report::{to_json, EvolveDoc, FieldRef, ShootDoc, SolveReportDoc};
use normwave::shooting::{find_ground_state, ShootOptions};
use normwave::{NonlinearityModel, RadialGrid};

/// Every float token (one with a decimal point) carries 17 significant digits.
fn assert_floats_have_17_digits(json: &str) {
    let is_num = |c: char| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-');
    let mut count = 0;
    for token in json
        .split(|c: char| !is_num(c))
        .filter(|t| t.contains('.') && t.contains(|c: char| c.is_ascii_digit()))
    {
        let mantissa = token
            .trim_start_matches('-')
            .split(['e', 'E'])
            .next()
            .unwrap();
        let digits = mantissa.chars().filter(char::is_ascii_digit).count();
        assert_eq!(digits, 17, "{token}");
        count += 1;
    }
    assert!(count > 0);
}

#[test]
fn solve_report_round_trips() {
    let grid = RadialGrid::new(3, 60.0, 1024).unwrap();
    let model = NonlinearityModel::cubic_quintic();
    let r = solve_global(&model, 300.0, &grid, &FlowConfig::default()).unwrap();
    for field in [
        FieldRef::inline(&r.field),
        FieldRef::csv("ground.field.csv"),
    ] {
        let json = r.to_json(field.clone()).unwrap();
        assert_floats_have_17_digits(&json);
        let back: SolveReportDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r.to_doc(field));
        assert_eq!(back.energy, r.energy());
    }
    let inline = serde_json::to_value(FieldRef::inline(&r.field)).unwrap();
    assert_eq!(inline["storage"], "inline");
    assert_eq!(inline["u"].as_array().unwrap().len(), 1024);
}

#[test]
fn shoot_and_evolve_documents_round_trip() {
    let grid = RadialGrid::new(3, 80.0, 1024).unwrap();
    let model = NonlinearityModel::cubic_quintic();
    let s = find_ground_state(&model, 0.1, &grid, &ShootOptions::default()).unwrap();
    let doc = s.to_doc(FieldRef::csv("shoot.field.csv"));
    let json = to_json(&doc).unwrap();
    assert_floats_have_17_digits(&json);
    assert_eq!(serde_json::from_str::<ShootDoc>(&json).unwrap(), doc);

    let traj = evolve(
        &ComplexField::from_real(&s.profile),
        0.5,
        1e-2,
        &model,
        10,
        Some(&s.profile),
    )
    .unwrap();
    let doc = EvolveDoc::new(&traj, 0.5, 1e-2, "evolve.trajectory.csv");
    assert_eq!(doc.steps, 50);
    assert_eq!(doc.samples, traj.samples.len());
    let json = to_json(&doc).unwrap();
    assert_eq!(serde_json::from_str::<EvolveDoc>(&json).unwrap(), doc);
}

#[test]
fn non_finite_values_become_null() {
    assert_eq!(to_json(&f64::NAN).unwrap(), "null\n");
    assert_eq!(
        to_json(&[1.0, f64::INFINITY])
            .unwrap()
            .matches("null")
            .count(),
        1
    );
    assert_eq!(to_json(&0.1).unwrap(), "1.0000000000000001e-1\n");
}
