use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use junction_pde::convergence::{run_convergence, Ladder, LadderAxis, OrderVerdict, Reference};
use junction_pde::problem_file::load_builtin;
use junction_pde::shooting::ShootingOptions;

fn heat_closed_form() -> (junction_pde::ProblemSpecF64, Reference) {
    let p = load_builtin::<f64>("heat_neumann_1edge").unwrap();
    (p.spec, Reference::ClosedForm(p.reference.unwrap()))
}

/// Backward Euler applied to the cosine mode, exactly: only the spatial
/// error remains when a run is compared against it.
fn heat_time_discrete() -> Reference {
    let lambda = FRAC_PI_2 * FRAC_PI_2;
    Reference::Oracle {
        name: "backward Euler exact".into(),
        eval: Arc::new(move |p| (1.0 + p.dt * lambda).powi(-(p.k as i32)) * (FRAC_PI_2 * p.x).cos()),
    }
}

#[test]
fn heat_time_ladder_is_first_order() {
    let (spec, exact) = heat_closed_form();
    let ladder = Ladder {
        axis: LadderAxis::Steps,
        values: vec![16, 32, 64, 128],
        fixed: 801,
    };
    let r = run_convergence(&spec, &exact, &ladder, &ShootingOptions::default()).unwrap();
    assert_eq!(r.verdict, OrderVerdict::Pass, "{}", r.to_text());
    assert!((r.order.unwrap() - 1.0).abs() <= 0.1, "{}", r.to_text());
}

#[test]
fn heat_space_ladder_is_second_order() {
    let (spec, _) = heat_closed_form();
    let ladder = Ladder {
        axis: LadderAxis::Nodes,
        values: vec![51, 101, 201, 401],
        fixed: 4096,
    };
    let r = run_convergence(&spec, &heat_time_discrete(), &ladder, &ShootingOptions::default()).unwrap();
    assert_eq!(r.verdict, OrderVerdict::Pass, "{}", r.to_text());
    assert!((r.order.unwrap() - 2.0).abs() <= 0.1, "{}", r.to_text());
}

#[test]
fn self_reference_agrees_on_the_order() {
    let (spec, _) = heat_closed_form();
    let ladder = Ladder {
        axis: LadderAxis::Nodes,
        values: vec![26, 51, 101, 201],
        fixed: 512,
    };
    let r = run_convergence(&spec, &Reference::SelfReference, &ladder, &ShootingOptions::default()).unwrap();
    assert_eq!(r.rungs.len(), 3);
    assert!(r.order.unwrap() > 1.8 && r.order.unwrap() < 2.4, "{}", r.to_text());
}

#[test]
fn manufactured_three_edge_time_ladder() {
    let p = load_builtin::<f64>("kirchhoff_heat_3edge").unwrap();
    let ladder = Ladder {
        axis: LadderAxis::Steps,
        values: vec![8, 16, 32, 64],
        fixed: 401,
    };
    let r = run_convergence(&p.spec, &Reference::ClosedForm(p.reference.unwrap()), &ladder, &ShootingOptions::default())
        .unwrap();
    assert_eq!(r.verdict, OrderVerdict::Pass, "{}", r.to_text());
}
