//! Independent equilibrium checks.
//!
//! Nothing here looks at how a solution was built. Every check starts from
//! the group strategies alone and recomputes the aggregate `g` as their sum.
//!
//! * [`verify_nash`]: `g` non-increasing, and constant on the support hull
//!   of each strategy, plus `G(0) = 0`.
//! * [`verify_linear_bounds`]: for each group a line `A_i + s_i·x`, built
//!   from a dyad on that group's support, bounds `G` from above and touches
//!   it on the support.
//! * [`best_dyad`]: brute-force search for the most profitable two-point
//!   deviation against `G`.
//! * [`verify_subpop_consistency`]: the checks above on every
//!   budget-truncated sub-population.

use serde::{Deserialize, Serialize};

use crate::density::{combine, PiecewiseDensity};
use crate::exec::Execution;
use crate::payoff::{score, Dyad};
use crate::solver::{DiscreteBudgetDistribution, EquilibriumSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Nash,
    LinearBounds,
}

/// Per-group quantities shared by all checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCheck {
    pub index: usize,
    pub budget: f64,
    pub mass: f64,
    /// Intercept `A_i` of the bounding line.
    pub a_intercept: f64,
    /// `H(f_i)`, the expected payoff against the population.
    pub payoff: f64,
    /// `(H(f_i) - A_i) / b_i`
    pub slope: f64,
    /// Worst excess of `G` over the line, or gap between them on the support.
    pub bound_violation: f64,
    /// Spread of `g` over the support hull.
    pub flat_violation: f64,
    /// `|H(f_i) - G(b_i)|`
    pub identity_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestDyad {
    pub dyad: Dyad,
    pub payoff: f64,
    /// `payoff - G(b)`; positive means the dyad beats any equilibrium play.
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupDeviation {
    pub group: usize,
    #[serde(flatten)]
    pub best: BestDyad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub check: CheckKind,
    pub tol: f64,
    pub groups: Vec<GroupCheck>,
    /// Largest upward step of `g`; an atom away from 0 counts with its mass.
    pub monotone_violation: f64,
    /// `G(0)` including any atom at 0.
    pub g_at_zero: f64,
    /// Disagreement between the stated aggregate and the strategy sum,
    /// together with any departure of the total mass from 1.
    pub mixture_gap: f64,
    /// The group whose best dyad gains the most.
    pub best_deviation: Option<GroupDeviation>,
    pub pass: bool,
}

impl EquilibriumReport {
    pub fn max_flat_violation(&self) -> f64 {
        self.groups.iter().map(|g| g.flat_violation).fold(0.0, f64::max)
    }

    pub fn max_bound_violation(&self) -> f64 {
        self.groups.iter().map(|g| g.bound_violation).fold(0.0, f64::max)
    }

    pub fn max_identity_gap(&self) -> f64 {
        self.groups.iter().map(|g| g.identity_gap).fold(0.0, f64::max)
    }
}

pub fn verify_nash(sol: &EquilibriumSolution, tol: f64) -> EquilibriumReport {
    verify_nash_with(sol, tol, Execution::default())
}

pub fn verify_nash_with(sol: &EquilibriumSolution, tol: f64, exec: Execution) -> EquilibriumReport {
    let mut report = analyze(sol, tol, CheckKind::Nash, exec);
    report.pass = report.monotone_violation <= tol
        && report.max_flat_violation() <= tol
        && report.g_at_zero <= tol
        && report.mixture_gap <= tol;
    report
}

pub fn verify_linear_bounds(sol: &EquilibriumSolution, tol: f64) -> EquilibriumReport {
    verify_linear_bounds_with(sol, tol, Execution::default())
}

pub fn verify_linear_bounds_with(sol: &EquilibriumSolution, tol: f64, exec: Execution) -> EquilibriumReport {
    let mut report = analyze(sol, tol, CheckKind::LinearBounds, exec);
    report.pass = report.max_bound_violation() <= tol && report.mixture_gap <= tol;
    report
}

/// Worst `|H(f_i) - G(b_i)|` over the groups.
pub fn payoff_identity_check(sol: &EquilibriumSolution, tol: f64) -> f64 {
    analyze(sol, tol, CheckKind::Nash, Execution::default()).max_identity_gap()
}

/// Best two-point deviation for budget `b` against aggregate `g`.
///
/// Candidates are the breakpoints and atoms of `g`, the origin and one
/// point past the support. `G` is piecewise linear between candidates and
/// a dyad's payoff is monotone in each endpoint on every linear piece, so
/// the search is exact. Atoms in `g` are approached from the right.
/// Returns `None` when `b <= 0`.
pub fn best_dyad(b: f64, g: &PiecewiseDensity) -> Option<BestDyad> {
    if !(b > 0.0) {
        return None;
    }
    let far = g.support_hull().map_or(0.0, |(_, hi)| hi).max(b) + 1.0;
    let mut points: Vec<f64> = std::iter::once(0.0)
        .chain(g.breakpoints().iter().copied())
        .chain(g.atoms().iter().map(|a| a.location))
        .chain(std::iter::once(far))
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let values: Vec<f64> = points.iter().map(|&x| g.cdf(x).upper()).collect();

    let split = points.partition_point(|&x| x < b);
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..split {
        let (x1, g1) = (points[i], values[i]);
        for j in split..points.len() {
            let (x2, g2) = (points[j], values[j]);
            if x2 <= b {
                continue;
            }
            let lambda = (x2 - b) / (x2 - x1);
            let payoff = lambda * g1 + (1.0 - lambda) * g2;
            if best.is_none_or(|(_, _, p)| payoff > p) {
                best = Some((i, j, payoff));
            }
        }
    }
    let (i, j, payoff) = best?;
    let dyad = Dyad::new(points[i], points[j], b).ok()?;
    Some(BestDyad {
        dyad,
        payoff,
        gain: payoff - g.cdf(b).mid(),
    })
}

/// Result of the equilibrium check on one budget-truncated population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixVerdict {
    /// Number of groups kept.
    pub groups: usize,
    /// Largest budget kept.
    pub threshold: f64,
    pub pass: bool,
    pub monotone_violation: f64,
    pub flat_violation: f64,
}

/// Runs [`verify_nash`] on every prefix `{f_1..f_j}` rescaled to unit mass.
/// Thresholds strictly between two budgets select the same prefix.
pub fn verify_subpop_consistency(
    dist: &DiscreteBudgetDistribution,
    sol: &EquilibriumSolution,
    tol: f64,
) -> Vec<PrefixVerdict> {
    verify_subpop_consistency_with(dist, sol, tol, Execution::default())
}

pub fn verify_subpop_consistency_with(
    dist: &DiscreteBudgetDistribution,
    sol: &EquilibriumSolution,
    tol: f64,
    exec: Execution,
) -> Vec<PrefixVerdict> {
    let n = dist.len().min(sol.strategies.len());
    exec.map(n, |j| {
        let kept = &sol.strategies[..=j];
        let mass: f64 = kept.iter().map(PiecewiseDensity::total_mass).sum();
        let strategies: Vec<PiecewiseDensity> = kept.iter().map(|s| s.scaled(1.0 / mass)).collect();
        let parts: Vec<(f64, &PiecewiseDensity)> = strategies.iter().map(|s| (1.0, s)).collect();
        let aggregate = crate::density::mixture(&parts);
        let prefix = EquilibriumSolution { strategies, aggregate };
        let report = verify_nash_with(&prefix, tol, Execution::Sequential);
        PrefixVerdict {
            groups: j + 1,
            threshold: dist.entries()[j].budget,
            pass: report.pass,
            monotone_violation: report.monotone_violation,
            flat_violation: report.max_flat_violation(),
        }
    })
}

fn analyze(sol: &EquilibriumSolution, tol: f64, check: CheckKind, exec: Execution) -> EquilibriumReport {
    let g = sol.strategy_sum();
    let total = g.total_mass();
    let mixture_gap = aggregate_gap(&g, &sol.aggregate).max((total - 1.0).abs());
    let g_unit = if total > 0.0 { g.scaled(1.0 / total) } else { g.clone() };

    let groups: Vec<(GroupCheck, Option<BestDyad>)> = exec
        .map_slice(&sol.strategies.iter().enumerate().collect::<Vec<_>>(), |&(i, f)| {
            group_check(i, f, &g_unit)
        });

    let best_deviation = groups
        .iter()
        .filter_map(|(c, d)| d.map(|best| GroupDeviation { group: c.index, best }))
        .max_by(|a, b| a.best.gain.total_cmp(&b.best.gain));

    EquilibriumReport {
        check,
        tol,
        groups: groups.into_iter().map(|(c, _)| c).collect(),
        monotone_violation: monotone_violation(&g_unit),
        g_at_zero: g_unit.cdf(0.0).upper(),
        mixture_gap,
        best_deviation,
        pass: false,
    }
}

fn group_check(index: usize, f: &PiecewiseDensity, g: &PiecewiseDensity) -> (GroupCheck, Option<BestDyad>) {
    let mass = f.total_mass();
    let Ok(unit) = f.normalized() else {
        let nan = f64::NAN;
        return (
            GroupCheck {
                index,
                budget: nan,
                mass,
                a_intercept: nan,
                payoff: nan,
                slope: nan,
                bound_violation: f64::INFINITY,
                flat_violation: f64::INFINITY,
                identity_gap: f64::INFINITY,
            },
            None,
        );
    };
    let budget = unit.first_moment();
    let (lo, hi) = unit.support_hull().expect("unit mass has support");
    let payoff = score(&unit, g);
    let big_g = |x: f64| g.cdf(x).mid();

    let (a_intercept, slope) = if lo < budget && budget < hi {
        let a = (hi * big_g(lo) - lo * big_g(hi)) / (hi - lo);
        (a, (payoff - a) / budget)
    } else {
        let s = g.height_left_of(budget);
        (big_g(budget) - s * budget, s)
    };
    let line = |x: f64| a_intercept + slope * x;

    let mut bound_violation: f64 = 0.0;
    let probes = std::iter::once(0.0)
        .chain(g.breakpoints().iter().copied())
        .chain(g.atoms().iter().map(|a| a.location));
    for x in probes {
        bound_violation = bound_violation.max(g.cdf(x).upper() - line(x));
    }
    let on_support = g
        .breakpoints()
        .iter()
        .copied()
        .filter(|&x| x >= lo && x <= hi)
        .chain(support_points(&unit));
    for x in on_support {
        bound_violation = bound_violation.max((big_g(x) - line(x)).abs());
    }

    let check = GroupCheck {
        index,
        budget,
        mass,
        a_intercept,
        payoff,
        slope,
        bound_violation,
        flat_violation: flat_violation(g, lo, hi),
        identity_gap: (payoff - big_g(budget)).abs(),
    };
    (check, best_dyad(budget, g))
}

/// Endpoints of positive-height cells and atom locations.
fn support_points(f: &PiecewiseDensity) -> impl Iterator<Item = f64> + '_ {
    f.segments()
        .filter(|(_, _, h)| *h > 0.0)
        .flat_map(|(a, b, _)| [a, b])
        .chain(f.atoms().iter().map(|a| a.location))
}

fn flat_violation(g: &PiecewiseDensity, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (a, b, h) in g.segments() {
        if b > lo && a < hi {
            min = min.min(h);
            max = max.max(h);
        }
    }
    // parts of the hull outside g's breakpoint range have density 0
    let (start, end) = (
        g.breakpoints().first().copied().unwrap_or(f64::INFINITY),
        g.breakpoints().last().copied().unwrap_or(f64::NEG_INFINITY),
    );
    if lo < start || hi > end {
        min = min.min(0.0);
        max = max.max(0.0);
    }
    let atoms: f64 = g
        .atoms()
        .iter()
        .filter(|a| a.location >= lo && a.location <= hi)
        .map(|a| a.mass)
        .sum();
    (max - min).max(0.0) + atoms
}

fn monotone_violation(g: &PiecewiseDensity) -> f64 {
    let mut worst: f64 = 0.0;
    let mut prev = match g.breakpoints().first() {
        // density is 0 on [0, first breakpoint)
        Some(&x0) if x0 > 0.0 => 0.0,
        _ => f64::INFINITY,
    };
    for &h in g.heights() {
        worst = worst.max(h - prev);
        prev = h;
    }
    for a in g.atoms() {
        if a.location > 0.0 {
            worst = worst.max(a.mass);
        }
    }
    worst
}

/// Largest height or CDF difference between two densities.
fn aggregate_gap(a: &PiecewiseDensity, b: &PiecewiseDensity) -> f64 {
    match combine(&[(1.0, a), (-1.0, b)]) {
        Ok(diff) => diff_size(&diff),
        Err(_) => match combine(&[(1.0, b), (-1.0, a)]) {
            Ok(diff) => diff_size(&diff),
            // differences of mixed sign: measure on the union grid directly
            Err(_) => {
                let mut points: Vec<f64> = a.breakpoints().iter().chain(b.breakpoints()).copied().collect();
                points.sort_by(f64::total_cmp);
                points.dedup();
                let mut gap: f64 = 0.0;
                for w in points.windows(2) {
                    let mid = 0.5 * (w[0] + w[1]);
                    gap = gap.max((a.height_at(mid) - b.height_at(mid)).abs());
                }
                for &x in &points {
                    gap = gap.max((a.cdf(x).upper() - b.cdf(x).upper()).abs());
                }
                for atom in a.atoms().iter().chain(b.atoms()) {
                    gap = gap.max((a.cdf(atom.location).at - b.cdf(atom.location).at).abs());
                }
                gap
            }
        },
    }
}

fn diff_size(d: &PiecewiseDensity) -> f64 {
    let h = d.heights().iter().fold(0.0f64, |m, h| m.max(h.abs()));
    h.max(d.total_mass().abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve;

    fn dist(pairs: &[(f64, f64)]) -> DiscreteBudgetDistribution {
        DiscreteBudgetDistribution::new(pairs.iter().copied()).unwrap()
    }

    /// β=(1,10) fixture with 10% of group 1's mass moved from [0,1] to an
    /// atom at 3.
    fn perturbed() -> EquilibriumSolution {
        let mut sol = solve(&dist(&[(1.0, 0.5), (10.0, 0.5)])).unwrap();
        sol.strategies[0] = PiecewiseDensity::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.25], vec![(3.0, 0.05)]).unwrap();
        sol.aggregate = sol.strategy_sum();
        sol
    }

    #[test]
    fn solver_output_passes() {
        for d in [
            dist(&[(1.0, 1.0)]),
            dist(&[(1.0, 0.5), (10.0, 0.5)]),
            dist(&[(1.0, 0.5), (1.5, 0.5)]),
            dist(&[(1.0, 0.2), (1.5, 0.3), (10.0, 0.5)]),
        ] {
            let sol = solve(&d).unwrap();
            let r = verify_nash(&sol, 1e-9);
            assert!(r.pass, "{r:?}");
            assert!(verify_linear_bounds(&sol, 1e-9).pass);
            assert!(r.best_deviation.unwrap().best.gain <= 1e-9);
        }
    }

    #[test]
    fn perturbation_fails() {
        let r = verify_nash(&perturbed(), 1e-9);
        assert!(!r.pass);
        assert!((r.monotone_violation - 0.05).abs() < 1e-12);
    }

    #[test]
    fn stale_aggregate_fails() {
        let mut sol = solve(&dist(&[(1.0, 0.5), (10.0, 0.5)])).unwrap();
        sol.aggregate = PiecewiseDensity::uniform(0.0, 2.0, 1.0).unwrap();
        let r = verify_nash(&sol, 1e-9);
        assert!(!r.pass && r.mixture_gap > 0.1);
    }

    #[test]
    fn linear_bound_intercepts() {
        let sol = solve(&dist(&[(1.0, 0.5), (1.5, 0.5)])).unwrap();
        let r = verify_linear_bounds(&sol, 1e-9);
        for g in &r.groups {
            assert!(g.a_intercept.abs() < 1e-12, "{g:?}");
            assert!((g.slope - 0.4).abs() < 1e-12);
        }

        let sol = solve(&dist(&[(1.0, 0.5), (10.0, 0.5)])).unwrap();
        let r = verify_linear_bounds(&sol, 1e-9);
        assert!((r.groups[1].a_intercept - 0.4375).abs() < 1e-12);
        assert!((r.groups[1].slope - 0.03125).abs() < 1e-12);
        assert!(r.pass);

        let sol = solve(&dist(&[(3.0, 1.0)])).unwrap();
        let r = verify_linear_bounds(&sol, 1e-9);
        assert_eq!(r.groups[0].a_intercept, 0.0);
    }

    #[test]
    fn linear_bounds_reject_perturbation() {
        assert!(!verify_linear_bounds(&perturbed(), 1e-9).pass);
    }

    #[test]
    fn best_dyad_examples() {
        let g = PiecewiseDensity::uniform(0.0, 2.0, 1.0).unwrap();
        let best = best_dyad(1.0, &g).unwrap();
        assert!((best.payoff - 0.5).abs() < 1e-15 && best.gain.abs() < 1e-15);

        let sol = solve(&dist(&[(1.0, 0.5), (10.0, 0.5)])).unwrap();
        let best = best_dyad(10.0, &sol.aggregate).unwrap();
        assert!((best.payoff - 0.75).abs() < 1e-12 && best.gain.abs() < 1e-12);

        let bad = perturbed().strategy_sum();
        assert!(best_dyad(1.0, &bad).unwrap().gain > 0.01);
        assert!(best_dyad(0.0, &g).is_none());
    }

    #[test]
    fn payoff_identity() {
        let sol = solve(&dist(&[(1.0, 0.5), (10.0, 0.5)])).unwrap();
        let r = verify_nash(&sol, 1e-9);
        assert!((r.groups[0].payoff - 0.25).abs() < 1e-12);
        assert!((r.groups[1].payoff - 0.75).abs() < 1e-12);
        assert!(payoff_identity_check(&sol, 1e-9) < 1e-9);
        let single = solve(&dist(&[(2.0, 1.0)])).unwrap();
        assert!((verify_nash(&single, 1e-9).groups[0].payoff - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prefixes_of_solver_output_pass() {
        let d = dist(&[(1.0, 0.3), (1.5, 0.3), (10.0, 0.4)]);
        let sol = solve(&d).unwrap();
        let verdicts = verify_subpop_consistency(&d, &sol, 1e-9);
        assert_eq!(verdicts.len(), 3);
        assert!(verdicts.iter().all(|v| v.pass), "{verdicts:?}");
        let single = dist(&[(1.0, 1.0)]);
        assert!(verify_subpop_consistency(&single, &solve(&single).unwrap(), 1e-9)[0].pass);
    }

    #[test]
    fn gap_at_origin_is_a_monotone_violation() {
        let g = PiecewiseDensity::step(vec![1.0, 3.0], vec![0.5]).unwrap();
        assert_eq!(monotone_violation(&g), 0.5);
    }
}
