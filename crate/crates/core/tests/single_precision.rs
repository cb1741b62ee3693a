use junction_pde::rothe::{solve_parabolic, RotheConfig};
use junction_pde::shooting::{solve_elliptic_junction, ShootingOptions};
use junction_pde::{load_builtin, JunctionGrid};

#[test]
fn cosh_junction_in_f32() {
    let p = load_builtin::<f32>("kirchhoff_cosh_2edge").unwrap();
    let grid = JunctionGrid::uniform(p.spec.junction().clone(), 101).unwrap();
    let sol = solve_elliptic_junction(&p.spec, &grid, &ShootingOptions::default()).unwrap();
    let theta = 0.5 / 1f64.cosh();
    assert!((sol.theta_star as f64 - theta).abs() < 1e-5, "{}", sol.theta_star);
    assert!(sol.edges.iter().all(|e| e.newton_iterations > 0));
}

#[test]
fn heat_mode_in_f32() {
    let p = load_builtin::<f32>("heat_neumann_1edge").unwrap();
    let grid = JunctionGrid::uniform(p.spec.junction().clone(), 51).unwrap();
    let sol = solve_parabolic(&p.spec, &RotheConfig::new(32, grid)).unwrap();
    let lambda = std::f64::consts::FRAC_PI_2.powi(2);
    let expected = (1.0 + lambda * 0.5 / 32.0).powi(-32);
    let vertex = sol.snapshots.last().unwrap().vertex_value() as f64;
    assert!((vertex - expected).abs() < 2e-3, "{vertex} vs {expected}");
}

