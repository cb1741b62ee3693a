use junction_pde::analysis::{run_estimates, EstimateOptions, EstimateVerdict};
use junction_pde::problem_file::{load_builtin, BUILTIN_PROBLEMS};
use junction_pde::shooting::ShootingOptions;

#[test]
fn suite_estimates() {
    for (name, _) in BUILTIN_PROBLEMS.iter().filter(|(n, _)| *n != "broken_monotone") {
        let p = load_builtin::<f64>(name).unwrap();
        let r = run_estimates(
            &p.spec,
            &EstimateOptions { nodes: 201, steps: vec![32, 64, 128], shooting: ShootingOptions::default(), margin: 0.2 },
        )
        .unwrap_or_else(|e| panic!("{name}: {e}"));
        println!("== {name}\n{}", r.to_text());
        for e in &r.entries {
            assert_ne!(e.verdict, EstimateVerdict::Fail, "{name}: {e:?}");
        }
    }
}
