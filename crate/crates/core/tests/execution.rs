use poplotto::equilibrium::{verify_nash_with, verify_subpop_consistency_with};
use poplotto::structure::{outcome_matrix_with, sub_leagues_with, transitivity_report_with};
use poplotto::{solve, DiscreteBudgetDistribution, Execution};

#[test]
fn policies_agree_bit_for_bit() {
    let dist = DiscreteBudgetDistribution::new((0..25).map(|i| (0.2 * 1.3f64.powi(i), 1.0 + (i % 4) as f64))).unwrap();
    let sol = solve(&dist).unwrap();
    let (seq, par) = (Execution::Sequential, Execution::Parallel);

    let w = outcome_matrix_with(&sol, seq).unwrap();
    assert_eq!(w, outcome_matrix_with(&sol, par).unwrap());
    assert_eq!(
        transitivity_report_with(&w, 1e-9, seq),
        transitivity_report_with(&w, 1e-9, par)
    );
    assert_eq!(
        sub_leagues_with(&dist, 1e-9, seq).unwrap(),
        sub_leagues_with(&dist, 1e-9, par).unwrap()
    );
    assert_eq!(
        verify_subpop_consistency_with(&dist, &sol, 1e-9, seq),
        verify_subpop_consistency_with(&dist, &sol, 1e-9, par)
    );
    assert_eq!(verify_nash_with(&sol, 1e-9, seq), verify_nash_with(&sol, 1e-9, par));
}
