//! Frozen reports for the pinned establishment fixture (see
//! `examples/find_establishment_fixture.rs`).

use poplotto::structure::{SubLeague, TransitivityFlags};
use poplotto::{
    leagues, outcome_matrix, solve, sub_leagues, transitivity_report, verify_nash, DiscreteBudgetDistribution,
};

fn fixture() -> DiscreteBudgetDistribution {
    DiscreteBudgetDistribution::new([
        (0.11, 0.04),
        (0.14, 0.067),
        (0.25, 0.086),
        (0.36, 0.009),
        (0.64, 0.114),
        (1.07, 0.222),
        (1.56, 0.017),
        (2.76, 0.011),
        (3.77, 0.435),
    ])
    .unwrap()
}

#[test]
fn establishment_fixture_reports() {
    let d = fixture();
    let sol = solve(&d).unwrap();
    assert!(verify_nash(&sol, 1e-9).pass);
    assert_eq!(
        leagues(&sol, 1e-9).unwrap().member_sets(),
        vec![vec![0, 1, 2, 3], vec![4, 5], vec![6, 7, 8]]
    );

    let subs = sub_leagues(&d, 1e-9).unwrap();
    assert_eq!(
        subs.sub_leagues,
        vec![
            SubLeague {
                members: vec![6],
                parent: 2,
                first_seen: 8
            },
            SubLeague {
                members: vec![7],
                parent: 2,
                first_seen: 8
            },
        ]
    );

    let w = outcome_matrix(&sol).unwrap();
    let t = transitivity_report(&w, 1e-9);
    assert_eq!(
        t.flags,
        TransitivityFlags {
            weak_stochastic: true,
            strong_stochastic: false,
            certainty: true,
            dominance: true,
            establishment: false,
        }
    );
    assert_eq!(t.violation_counts, [0, 1, 0, 0, 1]);
    assert_eq!(t.violations.establishment, vec![[6, 7, 8]]);
    assert_eq!(t.violations.strong_stochastic, vec![[6, 7, 8]]);

    // 8 surely beats 7, 9 beats 8 in expectation, yet 9 does not surely beat 7
    assert!(w.get(7, 6) >= 1.0 - 1e-9);
    assert!(w.get(8, 7) > 0.5);
    assert!(w.get(8, 6) < 1.0 - 1e-9);
}
