//! Sub-population consistent equilibrium for a discrete budget distribution.
//!
//! Groups are added in increasing budget order. Each new group pours its
//! mass onto the current aggregate `g` (a staircase of strictly decreasing
//! terraces) behind a movable wall: the mass settles with a flat top,
//! levelling every terrace lower than that top, and the wall position is
//! chosen so that the poured block has the group's budget as its mean.
//! Each pass of [`fill`] assumes the block covers one more terrace than the
//! last; when the level would reach the next terrace up, that terrace gap is
//! filled flush, the two terraces merge, and the remaining mass continues
//! with its budget adjusted so the whole block keeps the requested mean.

use serde::{Deserialize, Serialize};

use crate::density::PiecewiseDensity;
use crate::error::{Error, Result};
use crate::EPS;

/// Budget groups `(β_i, k_i)` sorted by strictly increasing budget, with
/// masses normalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteBudgetDistribution {
    entries: Vec<BudgetGroup>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetGroup {
    pub budget: f64,
    pub mass: f64,
}

impl DiscreteBudgetDistribution {
    /// Validates `(budget, mass)` pairs and rescales masses to sum to one.
    /// Budgets must be positive and strictly increasing.
    pub fn new(entries: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let entries: Vec<BudgetGroup> = entries
            .into_iter()
            .map(|(budget, mass)| BudgetGroup { budget, mass })
            .collect();
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("no groups".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if !(e.budget.is_finite() && e.budget > 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "group {i}: budget {} must be positive",
                    e.budget
                )));
            }
            if !(e.mass.is_finite() && e.mass > 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "group {i}: mass {} must be positive",
                    e.mass
                )));
            }
        }
        if let Some(w) = entries.windows(2).find(|w| w[1].budget <= w[0].budget) {
            return Err(Error::InvalidDistribution(format!(
                "budgets must be strictly increasing ({} then {})",
                w[0].budget, w[1].budget
            )));
        }
        let total: f64 = entries.iter().map(|e| e.mass).sum();
        Ok(DiscreteBudgetDistribution {
            entries: entries
                .into_iter()
                .map(|e| BudgetGroup {
                    budget: e.budget,
                    mass: e.mass / total,
                })
                .collect(),
        })
    }

    /// Sorts by budget and sums the masses of equal budgets before
    /// validating.
    pub fn merged(entries: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut raw: Vec<(f64, f64)> = entries.into_iter().collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (b, k) in raw {
            match out.last_mut() {
                Some(last) if last.0 == b => last.1 += k,
                _ => out.push((b, k)),
            }
        }
        Self::new(out)
    }

    pub fn entries(&self) -> &[BudgetGroup] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn budgets(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.budget).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.mass).collect()
    }

    /// The first `len` groups, renormalized: the population with budgets at
    /// most `β_len`.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.entries.len() {
            return Err(Error::InvalidDistribution(format!(
                "prefix length {len} out of range 1..={}",
                self.entries.len()
            )));
        }
        Self::new(self.entries[..len].iter().map(|e| (e.budget, e.mass)))
    }
}

/// Working state of the construction: boundaries `P = [0, P_1, …, P_m]` and
/// the heights of the `m` terraces `[P_{t-1}, P_t)`. The height left of `0`
/// is an unbounded sentinel, exposed only through [`TerraceProfile::ceiling`].
#[derive(Debug, Clone, PartialEq)]
pub struct TerraceProfile {
    boundaries: Vec<f64>,
    heights: Vec<f64>,
}

impl Default for TerraceProfile {
    fn default() -> Self {
        Self::new()
    }
}

impl TerraceProfile {
    /// No terraces yet: `P = [0]`.
    pub fn new() -> Self {
        TerraceProfile {
            boundaries: vec![0.0],
            heights: Vec::new(),
        }
    }

    /// Boundaries must start at 0 and increase strictly; heights (one per
    /// terrace) must be positive and strictly decreasing.
    pub fn from_parts(boundaries: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidDistribution(format!("terrace profile: {msg}")));
        if boundaries.first() != Some(&0.0) {
            return bad("boundaries must start at 0".into());
        }
        if heights.len() + 1 != boundaries.len() {
            return bad(format!(
                "{} boundaries need {} heights",
                boundaries.len(),
                boundaries.len() - 1
            ));
        }
        if boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("boundaries must increase strictly".into());
        }
        if heights.iter().any(|h| !(h.is_finite() && *h > 0.0)) || heights.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("heights must be positive and strictly decreasing".into());
        }
        Ok(TerraceProfile { boundaries, heights })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Terrace heights, left to right (the sentinel is not included).
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn terrace_count(&self) -> usize {
        self.heights.len()
    }

    /// Height of terrace `t` counting the sentinel as terrace 0; `None`
    /// means unbounded.
    pub fn ceiling(&self, t: usize) -> Option<f64> {
        if t == 0 {
            None
        } else {
            Some(self.heights[t - 1])
        }
    }

    /// Right end of the last terrace.
    pub fn end(&self) -> f64 {
        *self.boundaries.last().expect("profile always has boundary 0")
    }

    pub fn to_density(&self) -> PiecewiseDensity {
        PiecewiseDensity::step(self.boundaries.clone(), self.heights.clone()).expect("profile is a valid step density")
    }

    fn merge_last_two(&mut self) {
        let m = self.heights.len();
        self.boundaries.remove(m - 1);
        self.heights.remove(m - 1);
    }
}

/// The constructed equilibrium: one strategy per group, each carrying its
/// group's mass, and their sum `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub strategies: Vec<PiecewiseDensity>,
    pub aggregate: PiecewiseDensity,
}

impl EquilibriumSolution {
    /// Conditional mean of each strategy.
    pub fn budgets(&self) -> Result<Vec<f64>> {
        self.strategies.iter().map(PiecewiseDensity::mean).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.strategies.iter().map(PiecewiseDensity::total_mass).collect()
    }

    /// Each strategy rescaled to unit mass.
    pub fn normalized_strategies(&self) -> Result<Vec<PiecewiseDensity>> {
        self.strategies.iter().map(PiecewiseDensity::normalized).collect()
    }

    /// Sum of the strategies, recomputed from scratch.
    pub fn strategy_sum(&self) -> PiecewiseDensity {
        let parts: Vec<(f64, &PiecewiseDensity)> = self.strategies.iter().map(|s| (1.0, s)).collect();
        crate::density::mixture(&parts)
    }

    /// Budget distribution implied by the strategies (means and masses),
    /// with groups sorted by budget and equal budgets merged.
    pub fn implied_distribution(&self) -> Result<DiscreteBudgetDistribution> {
        let budgets = self.budgets()?;
        DiscreteBudgetDistribution::merged(budgets.into_iter().zip(self.masses()))
    }
}

/// Builds the sub-population consistent equilibrium group by group.
pub fn solve(dist: &DiscreteBudgetDistribution) -> Result<EquilibriumSolution> {
    let mut profile = TerraceProfile::new();
    let mut strategies = Vec::with_capacity(dist.len());
    for (i, group) in dist.entries().iter().enumerate() {
        let (next, strategy) = fill(&profile, group.budget, group.mass).map_err(|e| e.in_group(i))?;
        profile = next;
        strategies.push(strategy);
    }
    Ok(EquilibriumSolution {
        strategies,
        aggregate: profile.to_density(),
    })
}

/// Adds a group of mass `k` and budget `beta` to `profile`. Returns the
/// updated profile and the group's strategy (mass `k`, conditional mean
/// `beta`).
///
/// `beta` must exceed every budget already poured into `profile`; when it
/// does not, the mean becomes unreachable before the wall meets the
/// existing terraces and this fails with [`Error::Numerical`].
pub fn fill(profile: &TerraceProfile, beta: f64, k: f64) -> Result<(TerraceProfile, PiecewiseDensity)> {
    if !(beta.is_finite() && beta > 0.0 && k.is_finite() && k > 0.0) {
        return Err(Error::numerical(format!(
            "fill needs positive budget and mass, got β={beta}, k={k}"
        )));
    }
    let mut next = profile.clone();
    let mut mass = k;
    let mut budget = beta;

    loop {
        let end = next.end();
        let m = next.terrace_count();

        if budget > end {
            let p = budget + (budget - end);
            let y = mass / (p - end);
            if next.ceiling(m).is_none_or(|c| y < c) {
                next.boundaries.push(p);
                next.heights.push(y);
                break;
            }
        }

        if m == 0 {
            return Err(Error::numerical(format!(
                "budget {budget} not reachable on an empty profile"
            )));
        }
        let (x2, x1, y1) = (next.boundaries[m - 1], next.boundaries[m], next.heights[m - 1]);
        let (p, y) = quadratic_fill(x2, x1, y1, mass, budget)?;

        if next.ceiling(m - 1).is_none_or(|c| y < c) {
            if p < x1 - EPS * x1.max(1.0) {
                return Err(Error::numerical(format!(
                    "mean {budget} reached at wall {p}, inside the structure ending at {x1}; budgets out of order?"
                )));
            }
            if y < y1 - EPS {
                return Err(Error::numerical(format!("level {y} fell below terrace {y1}")));
            }
            next.boundaries[m] = p.max(x1);
            next.heights[m - 1] = y;
            break;
        }

        // overflow: raise the last terrace flush with its neighbour, merge,
        // and continue with what is left
        let upper = next.heights[m - 2];
        let raised = (upper - y1) * (x1 - x2);
        let centre = 0.5 * (x1 + x2);
        let leftover = mass - raised;
        next.merge_last_two();
        if leftover <= EPS * k {
            if leftover < -EPS * k.max(1.0) {
                return Err(Error::numerical(format!(
                    "overflow used {raised}, more than the remaining mass {mass}"
                )));
            }
            break;
        }
        budget = (mass * budget - raised * centre) / leftover;
        mass = leftover;
    }

    let strategy = poured_block(profile, &next)?;
    Ok((next, strategy))
}

/// Difference between the updated and original profile over the last
/// (newly levelled) terrace.
fn poured_block(before: &TerraceProfile, after: &TerraceProfile) -> Result<PiecewiseDensity> {
    let m = after.terrace_count();
    let (left, right) = (after.boundaries[m - 1], after.boundaries[m]);
    let level = after.heights[m - 1];
    let old = before.to_density();

    let mut bps = vec![left];
    bps.extend(before.boundaries.iter().copied().filter(|&b| b > left && b < right));
    bps.push(right);
    let heights = bps
        .windows(2)
        .map(|w| {
            let h = level - old.height_at(w[0]);
            if h < -EPS {
                Err(Error::numerical(format!(
                    "level {level} below existing terrace at {}",
                    w[0]
                )))
            } else {
                Ok(h.max(0.0))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    PiecewiseDensity::step(bps, heights)
}

/// One-terrace pour: a block of height `y - y1` on `[x2, x1]` plus height
/// `y` on `[x1, p]`, with mass `k` and mean `beta`. Returns the larger
/// root `p` of the mass/mean quadratic and the level `y`.
pub fn quadratic_fill(x2: f64, x1: f64, y1: f64, k: f64, beta: f64) -> Result<(f64, f64)> {
    if !(x2 < x1) || y1 < 0.0 || !(k > 0.0) {
        return Err(Error::numerical(format!(
            "quadratic fill needs x2 < x1, y1 >= 0, k > 0 (x2={x2}, x1={x1}, y1={y1}, k={k})"
        )));
    }
    let existing = (x1 - x2) * y1;
    let a = k + existing;
    let b = -2.0 * k * beta - (x1 * x1 - x2 * x2) * y1;
    let c = -x2 * x2 * a - x2 * b;
    let disc = b * b - 4.0 * a * c;
    if disc < -EPS * (b * b).max(1.0) {
        return Err(Error::numerical(format!("negative discriminant {disc}")));
    }
    // b < 0 here, so the + root has no cancellation
    let p = (-b + disc.max(0.0).sqrt()) / (2.0 * a);
    let y = a / (p - x2);
    Ok((p, y))
}
