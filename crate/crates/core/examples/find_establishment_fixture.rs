//! Seeded random search for a budget distribution whose equilibrium is not
//! transitive in establishment while staying transitive in certainty and
//! dominance. Prints the first hit as a `subpopulations` file.
//!
//! Usage: cargo run --release --example find_establishment_fixture [seed] [groups]

use poplotto::{outcome_matrix, solve, transitivity_report, DiscreteBudgetDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let groups: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(9);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for attempt in 0..1_000_000u64 {
        let mut budgets: Vec<f64> = (0..groups).map(|_| 10f64.powf(rng.random_range(-1.0..2.0))).collect();
        budgets.sort_by(f64::total_cmp);
        // round so the pinned fixture is short to write down
        let budgets: Vec<f64> = budgets.iter().map(|b| (b * 100.0).round() / 100.0).collect();
        if budgets.windows(2).any(|w| w[1] <= w[0]) || budgets[0] <= 0.0 {
            continue;
        }
        let weights: Vec<f64> = (0..groups).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = weights.iter().sum();
        let masses: Vec<f64> = weights
            .iter()
            .map(|w| (w / total * 1000.0).round().max(1.0) / 1000.0)
            .collect();

        let Ok(dist) = DiscreteBudgetDistribution::new(budgets.iter().copied().zip(masses.iter().copied())) else {
            continue;
        };
        let Ok(sol) = solve(&dist) else { continue };
        let Ok(w) = outcome_matrix(&sol) else { continue };
        let t = transitivity_report(&w, 1e-9);
        if !t.flags.establishment && t.flags.certainty && t.flags.dominance {
            eprintln!(
                "seed {seed}, attempt {attempt}, triples {:?}",
                t.violations.establishment
            );
            let subs: Vec<String> = budgets
                .iter()
                .zip(&masses)
                .map(|(b, m)| format!("{{\"budget\":{b},\"mass\":{m}}}"))
                .collect();
            println!("{{\"subpopulations\":[{}]}}", subs.join(","));
            return;
        }
    }
    eprintln!("no fixture found");
    std::process::exit(1);
}
