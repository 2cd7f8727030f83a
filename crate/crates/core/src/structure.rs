//! Competitive structure of a population: leagues and sub-leagues, the
//! pairwise outcome matrix, five transitivity notions, the dice embedding,
//! intra-league rewiring and digraph/CSV export.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{combine, mixture, PiecewiseDensity};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::payoff::score;
use crate::solver::{solve, DiscreteBudgetDistribution, EquilibriumSolution};
use crate::EPS;

/// Groups sharing one value of `g` at their budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct League {
    /// `g(b_i)` shared by the members.
    pub value: f64,
    /// 0-based group indices, ascending.
    pub members: Vec<usize>,
    /// Smallest and largest member budget.
    pub span: (f64, f64),
}

/// Leagues ordered by strictly decreasing `g` value, i.e. from the weakest
/// league to the strongest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaguePartition {
    pub leagues: Vec<League>,
    /// Budget of every group, indexed like the strategies.
    pub budgets: Vec<f64>,
}

impl LeaguePartition {
    pub fn league_of(&self, group: usize) -> Option<usize> {
        self.leagues.iter().position(|l| l.members.contains(&group))
    }

    pub fn member_sets(&self) -> Vec<Vec<usize>> {
        self.leagues.iter().map(|l| l.members.clone()).collect()
    }
}

/// Clusters groups by the aggregate density at their budget. Values within
/// `tol` of a league's first value join it. A budget sitting on a
/// breakpoint of `g` reads the segment to its left.
pub fn leagues(sol: &EquilibriumSolution, tol: f64) -> Result<LeaguePartition> {
    let budgets = sol.budgets()?;
    let g = sol.strategy_sum();
    let values: Vec<f64> = budgets.iter().map(|&b| g.height_left_of(b)).collect();

    let mut order: Vec<usize> = (0..budgets.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(budgets[i].total_cmp(&budgets[j])));

    let mut out: Vec<League> = Vec::new();
    for i in order {
        match out.last_mut() {
            Some(l) if (l.value - values[i]).abs() <= tol => l.members.push(i),
            _ => out.push(League {
                value: values[i],
                members: vec![i],
                span: (0.0, 0.0),
            }),
        }
    }
    for l in &mut out {
        l.members.sort_unstable();
        let lo = l.members.iter().map(|&i| budgets[i]).fold(f64::INFINITY, f64::min);
        let hi = l.members.iter().map(|&i| budgets[i]).fold(f64::NEG_INFINITY, f64::max);
        l.span = (lo, hi);
    }
    Ok(LeaguePartition { leagues: out, budgets })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Groups kept (budgets up to `threshold`).
    pub groups: usize,
    pub threshold: f64,
    pub leagues: Vec<Vec<usize>>,
    /// Pieces of full-population leagues that are separate leagues here.
    pub sub_leagues: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubLeague {
    pub members: Vec<usize>,
    /// Index into the full population's leagues.
    pub parent: usize,
    /// Smallest truncation (number of groups) at which it is separate.
    pub first_seen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubLeagueReport {
    pub full: LeaguePartition,
    pub truncations: Vec<Truncation>,
    /// Distinct sub-leagues over all truncations, one nesting level each.
    pub sub_leagues: Vec<SubLeague>,
}

pub fn sub_leagues(dist: &DiscreteBudgetDistribution, tol: f64) -> Result<SubLeagueReport> {
    sub_leagues_with(dist, tol, Execution::default())
}

/// Solves every budget truncation and reports which members of a full
/// league fall into two or more separate leagues there.
pub fn sub_leagues_with(dist: &DiscreteBudgetDistribution, tol: f64, exec: Execution) -> Result<SubLeagueReport> {
    let full = leagues(&solve(dist)?, tol)?;
    let n = dist.len();

    let prefixes: Vec<Result<LeaguePartition>> = exec.map(n.saturating_sub(1), |j| {
        let prefix = dist.prefix(j + 1)?;
        leagues(&solve(&prefix)?, tol)
    });

    let mut truncations = Vec::with_capacity(prefixes.len());
    let mut found: Vec<SubLeague> = Vec::new();
    for (j, part) in prefixes.into_iter().enumerate() {
        let part = part?;
        let mut pieces = Vec::new();
        for (parent, league) in full.leagues.iter().enumerate() {
            let split: Vec<Vec<usize>> = part
                .leagues
                .iter()
                .map(|l| {
                    l.members
                        .iter()
                        .copied()
                        .filter(|m| league.members.contains(m))
                        .collect::<Vec<_>>()
                })
                .filter(|s: &Vec<usize>| !s.is_empty())
                .collect();
            if split.len() >= 2 {
                for s in split {
                    if !found.iter().any(|f| f.members == s) {
                        found.push(SubLeague {
                            members: s.clone(),
                            parent,
                            first_seen: j + 1,
                        });
                    }
                    pieces.push(s);
                }
            }
        }
        truncations.push(Truncation {
            groups: j + 1,
            threshold: dist.entries()[j].budget,
            leagues: part.member_sets(),
            sub_leagues: pieces,
        });
    }
    Ok(SubLeagueReport {
        full,
        truncations,
        sub_leagues: found,
    })
}

/// `W[i][j] = H(f_i, f_j)` on unit-mass strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutcomeMatrix(Vec<Vec<f64>>);

impl OutcomeMatrix {
    /// Square, entries in `[0, 1]`. The lower triangle and diagonal are
    /// rebuilt from the upper triangle so antisymmetry holds by construction.
    #[allow(clippy::needless_range_loop)]
    pub fn from_upper(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidDensity("outcome matrix must be square".into()));
        }
        let mut w = rows;
        for i in 0..n {
            w[i][i] = 0.5;
            for j in i + 1..n {
                w[j][i] = 1.0 - w[i][j];
            }
        }
        Ok(OutcomeMatrix(w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.0
    }
}

pub fn outcome_matrix(sol: &EquilibriumSolution) -> Result<OutcomeMatrix> {
    outcome_matrix_with(sol, Execution::default())
}

pub fn outcome_matrix_with(sol: &EquilibriumSolution, exec: Execution) -> Result<OutcomeMatrix> {
    let unit = sol.normalized_strategies()?;
    let n = unit.len();
    let rows = exec.map(n, |i| {
        let mut row = vec![0.0; n];
        for j in i + 1..n {
            row[j] = score(&unit[i], &unit[j]);
        }
        row
    });
    OutcomeMatrix::from_upper(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitivityFlags {
    pub weak_stochastic: bool,
    pub strong_stochastic: bool,
    pub certainty: bool,
    pub dominance: bool,
    pub establishment: bool,
}

/// Violating triples `(i, j, k)`: `j` over `i` and `k` over `j` hold but the
/// required relation of `k` over `i` does not.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    pub weak_stochastic: Vec<[usize; 3]>,
    pub strong_stochastic: Vec<[usize; 3]>,
    pub certainty: Vec<[usize; 3]>,
    pub dominance: Vec<[usize; 3]>,
    pub establishment: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitivityReport {
    pub flags: TransitivityFlags,
    /// At most [`MAX_RECORDED`] triples per notion.
    pub violations: Violations,
    /// Total violating triples per notion, in the field order of `flags`.
    pub violation_counts: [usize; 5],
}

pub const MAX_RECORDED: usize = 1000;

pub fn transitivity_report(w: &OutcomeMatrix, tol: f64) -> TransitivityReport {
    transitivity_report_with(w, tol, Execution::default())
}

/// Exhaustive scan over ordered triples of distinct groups. `≥ ½` and `= 1`
/// are widened by `tol`.
pub fn transitivity_report_with(w: &OutcomeMatrix, tol: f64, exec: Execution) -> TransitivityReport {
    let n = w.len();
    let half = |x: f64| x >= 0.5 - tol;
    let sure = |x: f64| x >= 1.0 - tol;

    let per_i: Vec<[Vec<[usize; 3]>; 5]> = exec.map(n, |i| {
        let mut v: [Vec<[usize; 3]>; 5] = Default::default();
        for j in (0..n).filter(|&j| j != i) {
            let ji = w.get(j, i);
            for k in (0..n).filter(|&k| k != i && k != j) {
                let (kj, ki) = (w.get(k, j), w.get(k, i));
                let t = [i, j, k];
                if half(ji) && half(kj) {
                    if !half(ki) {
                        v[0].push(t);
                    }
                    if ki < ji.max(kj) - tol {
                        v[1].push(t);
                    }
                }
                if sure(ji) && sure(kj) && !sure(ki) {
                    v[2].push(t);
                }
                if half(ji) && sure(kj) && !sure(ki) {
                    v[3].push(t);
                }
                if sure(ji) && half(kj) && !sure(ki) {
                    v[4].push(t);
                }
            }
        }
        v
    });

    let mut counts = [0usize; 5];
    let mut lists: [Vec<[usize; 3]>; 5] = Default::default();
    for v in per_i {
        for (c, (list, found)) in counts.iter_mut().zip(lists.iter_mut().zip(v)) {
            *c += found.len();
            let room = MAX_RECORDED.saturating_sub(list.len());
            list.extend(found.into_iter().take(room));
        }
    }
    let [weak_stochastic, strong_stochastic, certainty, dominance, establishment] = lists;
    TransitivityReport {
        flags: TransitivityFlags {
            weak_stochastic: counts[0] == 0,
            strong_stochastic: counts[1] == 0,
            certainty: counts[2] == 0,
            dominance: counts[3] == 0,
            establishment: counts[4] == 0,
        },
        violations: Violations {
            weak_stochastic,
            strong_stochastic,
            certainty,
            dominance,
            establishment,
        },
        violation_counts: counts,
    }
}

/// Embeds dice as strategies: face `v` becomes a unit block on `[v-1, v]`
/// holding `1/faces` of the die's mass, and every die gets an equal share
/// of the population. Integer ties between faces become equal blocks, which
/// also split evenly, so pairwise win probabilities are preserved.
pub fn dice_to_population(dice: &[Vec<u32>]) -> Result<EquilibriumSolution> {
    let faces = dice.first().map(Vec::len).unwrap_or(0);
    if faces == 0 {
        return Err(Error::InvalidDice(
            "need at least one die with at least one face".into(),
        ));
    }
    if dice.iter().any(|d| d.len() != faces) {
        return Err(Error::InvalidDice("all dice need the same number of faces".into()));
    }
    if dice.iter().flatten().any(|&v| v == 0) {
        return Err(Error::InvalidDice("face values start at 1".into()));
    }
    let share = 1.0 / dice.len() as f64;
    let strategies = dice
        .iter()
        .map(|die| {
            let lo = *die.iter().min().unwrap();
            let hi = *die.iter().max().unwrap();
            let bps: Vec<f64> = (lo - 1..=hi).map(f64::from).collect();
            let heights: Vec<f64> = (lo..=hi)
                .map(|v| share * die.iter().filter(|&&f| f == v).count() as f64 / faces as f64)
                .collect();
            PiecewiseDensity::step(bps, heights)
        })
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<(f64, &PiecewiseDensity)> = strategies.iter().map(|s| (1.0, s)).collect();
    let aggregate = mixture(&parts);
    Ok(EquilibriumSolution { strategies, aggregate })
}

/// Grid cells per shared span in the rewiring search.
const REWIRE_CELLS: usize = 12;
const REWIRE_ROUNDS: usize = 24;

/// Reshuffles strategies inside one league without touching `g`.
///
/// Moves are three-slice exchanges between two members `p` and `q` on the
/// overlap of their support hulls: `p` hands slices around centres `c1`
/// and `c3` to `q` and takes back a slice around `c2` in between, with
/// amounts `t(c3-c2)`, `t(c3-c1)` and `t(c2-c1)` so both masses and both
/// means are unchanged. Pointwise the densities are only exchanged, so the
/// aggregate is untouched and every support stays where `g` is flat.
///
/// A target pair `(i, j)` is picked and moves are chosen greedily to push
/// its expected winner below one half. Targets are tried in seeded order;
/// the first flipped target wins, otherwise the first target's best effort
/// is returned. A league needs at least three members: with two, their
/// densities sum to `g` on the shared region and no exchange can change
/// their pairwise outcome.
pub fn league_rewire(sol: &EquilibriumSolution, league: usize, seed: u64) -> Result<EquilibriumSolution> {
    let part = leagues(sol, EPS)?;
    let members = &part
        .leagues
        .get(league)
        .ok_or_else(|| Error::Rewire(format!("no league {league} (have {})", part.leagues.len())))?
        .members;
    if members.len() < 2 {
        return Err(Error::Rewire(format!("league {league} has a single group")));
    }
    let mut targets: Vec<(usize, usize)> = Vec::new();
    for (x, &a) in members.iter().enumerate() {
        for &b in &members[x + 1..] {
            targets.push((a, b));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    targets.shuffle(&mut rng);

    let mut fallback: Option<EquilibriumSolution> = None;
    for &target in &targets {
        if let Some((out, flipped)) = rewire_target(sol, members, target) {
            if flipped {
                return Ok(out);
            }
            fallback.get_or_insert(out);
        }
    }
    fallback.ok_or_else(|| Error::Rewire("no budget-neutral exchange changes any outcome".into()))
}

/// Greedy exchanges among `members` aimed at the pair `(i, j)`. Returns the
/// new solution and whether the expected winner of the pair changed, or
/// `None` when no exchange improved the objective.
fn rewire_target(
    sol: &EquilibriumSolution,
    members: &[usize],
    (i, j): (usize, usize),
) -> Option<(EquilibriumSolution, bool)> {
    let mass: Vec<f64> = sol.strategies.iter().map(PiecewiseDensity::total_mass).collect();
    let start = score(&sol.strategies[i], &sol.strategies[j]) / (mass[i] * mass[j]);
    // minimise the win probability of the current expected winner
    let (w, l) = if start >= 0.5 { (i, j) } else { (j, i) };

    let mut strategies = sol.strategies.clone();
    let mut current = start.max(1.0 - start);
    let mut moved = false;
    for _ in 0..REWIRE_ROUNDS {
        if current < 0.5 - EPS {
            break;
        }
        // exchanges between two bystanders cannot move the objective
        let mut grids: Vec<Vec<f64>> = Vec::new();
        let mut moves: Vec<(usize, usize, [usize; 3], usize)> = Vec::new();
        for (x, &p) in members.iter().enumerate() {
            for &q in &members[x + 1..] {
                if ![p, q].iter().any(|m| *m == w || *m == l) {
                    continue;
                }
                let (Some(hp), Some(hq)) = (strategies[p].support_hull(), strategies[q].support_hull()) else {
                    continue;
                };
                let (lo, hi) = (hp.0.max(hq.0), hp.1.min(hq.1));
                if hi - lo <= EPS {
                    continue;
                }
                grids.push(exchange_grid(lo, hi));
                let cells = grids.last().map_or(0, Vec::len) - 1;
                for c1 in 0..cells {
                    for c2 in c1 + 1..cells {
                        for c3 in c2 + 1..cells {
                            moves.push((p, q, [c1, c2, c3], grids.len() - 1));
                            moves.push((q, p, [c1, c2, c3], grids.len() - 1));
                        }
                    }
                }
            }
        }
        let candidates: Vec<Option<(f64, usize)>> = Execution::default().map(moves.len(), |m| {
            let (giver, taker, cells, grid) = moves[m];
            let (g2, t2) = exchange(&strategies[giver], &strategies[taker], &grids[grid], cells)?;
            let pick = |k: usize| {
                if k == giver {
                    &g2
                } else if k == taker {
                    &t2
                } else {
                    &strategies[k]
                }
            };
            Some((score(pick(w), pick(l)) / (mass[w] * mass[l]), m))
        });
        let (value, m) = candidates.into_iter().flatten().min_by(|x, y| x.0.total_cmp(&y.0))?;
        if value >= current - 1e-12 {
            break;
        }
        let (giver, taker, cells, grid) = moves[m];
        let (g2, t2) = exchange(&strategies[giver], &strategies[taker], &grids[grid], cells)?;
        strategies[giver] = g2;
        strategies[taker] = t2;
        current = value;
        moved = true;
    }
    if !moved {
        return None;
    }
    let flipped = current < 0.5 - EPS;
    Some((
        EquilibriumSolution {
            strategies,
            aggregate: sol.aggregate.clone(),
        },
        flipped,
    ))
}

/// Even grid over `[lo, hi]`. Slices always land on these cells, so
/// repeated exchanges do not multiply breakpoints.
fn exchange_grid(lo: f64, hi: f64) -> Vec<f64> {
    let step = (hi - lo) / REWIRE_CELLS as f64;
    (0..=REWIRE_CELLS).map(|i| lo + step * i as f64).collect()
}

/// Lowest density of `d` on `[l, r)`.
fn floor_height(d: &PiecewiseDensity, l: f64, r: f64) -> f64 {
    d.breakpoints()
        .iter()
        .copied()
        .filter(|&x| x > l && x < r)
        .chain(std::iter::once(l))
        .map(|x| d.height_at(x))
        .fold(f64::INFINITY, f64::min)
}

/// `giver` sends the outer cells to `taker` and receives the middle one,
/// at the largest amount both can afford.
fn exchange(
    giver: &PiecewiseDensity,
    taker: &PiecewiseDensity,
    grid: &[f64],
    cells: [usize; 3],
) -> Option<(PiecewiseDensity, PiecewiseDensity)> {
    let cell = |c: usize| (grid[c], grid[c + 1]);
    let [(l1, r1), (l2, r2), (l3, r3)] = cells.map(cell);
    let (c1, c2, c3) = (0.5 * (l1 + r1), 0.5 * (l2 + r2), 0.5 * (l3 + r3));
    let room = |d: &PiecewiseDensity, l: f64, r: f64| floor_height(d, l, r) * (r - l);
    let t = (room(giver, l1, r1) / (c3 - c2))
        .min(room(giver, l3, r3) / (c2 - c1))
        .min(room(taker, l2, r2) / (c3 - c1));
    if !(t > 1e-12) {
        return None;
    }
    let s1 = PiecewiseDensity::uniform(l1, r1, t * (c3 - c2)).ok()?;
    let s2 = PiecewiseDensity::uniform(l2, r2, t * (c3 - c1)).ok()?;
    let s3 = PiecewiseDensity::uniform(l3, r3, t * (c2 - c1)).ok()?;
    let g = combine(&[(1.0, giver), (-1.0, &s1), (-1.0, &s3), (1.0, &s2)]).ok()?;
    let k = combine(&[(1.0, taker), (1.0, &s1), (1.0, &s3), (-1.0, &s2)]).ok()?;
    Some((g, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DigraphFormat {
    Dot,
    Json,
}

impl FromStr for DigraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(DigraphFormat::Dot),
            "json" => Ok(DigraphFormat::Json),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigraphNode {
    pub id: usize,
    pub budget: f64,
    pub league: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigraphEdge {
    pub from: usize,
    pub to: usize,
    /// Win probability of `to` against `from`.
    pub win_prob: f64,
    pub certain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Digraph {
    pub nodes: Vec<DigraphNode>,
    pub edges: Vec<DigraphEdge>,
}

/// Endorsement graph: an edge `i → j` points at the expected winner
/// (`W[j][i] ≥ ½`) and is marked certain when `W[j][i] = 1` within `tol`.
/// Node ids are 1-based.
pub fn digraph(w: &OutcomeMatrix, partition: &LeaguePartition, tol: f64) -> Digraph {
    let n = w.len();
    let nodes = (0..n)
        .map(|i| DigraphNode {
            id: i + 1,
            budget: partition.budgets.get(i).copied().unwrap_or(f64::NAN),
            league: partition.league_of(i).unwrap_or(usize::MAX),
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let p = w.get(j, i);
            if p >= 0.5 - tol {
                edges.push(DigraphEdge {
                    from: i + 1,
                    to: j + 1,
                    win_prob: p,
                    certain: p >= 1.0 - tol,
                });
            }
        }
    }
    Digraph { nodes, edges }
}

pub fn export_digraph(w: &OutcomeMatrix, partition: &LeaguePartition, format: DigraphFormat, tol: f64) -> String {
    let graph = digraph(w, partition, tol);
    match format {
        DigraphFormat::Json => serde_json::to_string_pretty(&graph).expect("digraph serializes"),
        DigraphFormat::Dot => {
            let mut out = String::from("digraph population {\n");
            for (l, league) in partition.leagues.iter().enumerate() {
                let _ = writeln!(out, "  subgraph cluster_league_{l} {{");
                let _ = writeln!(out, "    label=\"league {} (g={})\";", l, league.value);
                for &m in &league.members {
                    let _ = writeln!(
                        out,
                        "    n{} [label=\"{} (b={})\"];",
                        m + 1,
                        m + 1,
                        partition.budgets[m]
                    );
                }
                out.push_str("  }\n");
            }
            for e in &graph.edges {
                let color = if e.certain { "red" } else { "black" };
                let _ = writeln!(
                    out,
                    "  n{} -> n{} [certain={}, color={}];",
                    e.from, e.to, e.certain, color
                );
            }
            out.push_str("}\n");
            out
        }
    }
}

/// Step-function samples for plotting: two rows per segment (its left and
/// right end at the segment's height) and one row per atom.
///
/// Columns: `series,kind,x,value` with series `aggregate` or `group_<i>`
/// (1-based) and kind `step` or `atom`.
pub fn plot_csv(sol: &EquilibriumSolution) -> String {
    let mut out = String::from("series,kind,x,value\n");
    let mut emit = |name: &str, d: &PiecewiseDensity| {
        for (lo, hi, h) in d.segments() {
            let _ = writeln!(out, "{name},step,{lo},{h}");
            let _ = writeln!(out, "{name},step,{hi},{h}");
        }
        for a in d.atoms() {
            let _ = writeln!(out, "{name},atom,{},{}", a.location, a.mass);
        }
    };
    emit("aggregate", &sol.aggregate);
    for (i, s) in sol.strategies.iter().enumerate() {
        emit(&format!("group_{}", i + 1), s);
    }
    out
}
