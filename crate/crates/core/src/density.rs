//! Piecewise-constant densities with point atoms.
//!
//! Every strategy, every renormalized group strategy and the population
//! aggregate is a [`PiecewiseDensity`]: a step function on contiguous
//! half-open segments `[x_{j-1}, x_j)` plus a finite list of atoms. Nothing
//! requires unit mass at this level; group strategies carry their group's
//! population share as mass.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::EPS;

/// Heights or atom masses this far below zero after signed arithmetic are
/// treated as rounding noise and clamped.
const NEGATIVE_NOISE: f64 = 1e-12;

/// Two locations closer than [`EPS`] are the same point.
#[inline]
pub fn same_location(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPS
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// CDF evaluated at a point, with the mass sitting exactly at the point kept
/// apart from the mass strictly below it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CdfValue {
    /// `P(X < x)`
    pub below: f64,
    /// `P(X = x)`
    pub at: f64,
}

impl CdfValue {
    /// Tie-split value `P(X < x) + P(X = x) / 2`: the payoff of a point
    /// placed at `x` against this distribution.
    #[inline]
    pub fn mid(&self) -> f64 {
        self.below + 0.5 * self.at
    }

    /// Right limit `P(X <= x)`.
    #[inline]
    pub fn upper(&self) -> f64 {
        self.below + self.at
    }
}

/// Non-negative measure on the half-line: step density plus atoms.
///
/// Breakpoints are strictly increasing and at least [`EPS`] apart; atoms are
/// sorted by location, distinct up to [`EPS`] and carry positive mass.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub struct PiecewiseDensity {
    breakpoints: Vec<f64>,
    heights: Vec<f64>,
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    breakpoints: Vec<f64>,
    heights: Vec<f64>,
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<DensityRepr> for PiecewiseDensity {
    type Error = Error;

    fn try_from(repr: DensityRepr) -> Result<Self> {
        PiecewiseDensity::new(repr.breakpoints, repr.heights, repr.atoms)
    }
}

impl From<PiecewiseDensity> for DensityRepr {
    fn from(d: PiecewiseDensity) -> Self {
        DensityRepr {
            breakpoints: d.breakpoints,
            heights: d.heights,
            atoms: d.atoms.iter().map(|a| (a.location, a.mass)).collect(),
        }
    }
}

impl PiecewiseDensity {
    /// Validates and normalizes the representation: breakpoints closer than
    /// [`EPS`] are merged (the zero-width segment is dropped), zero-mass
    /// atoms are dropped and atoms at the same location are coalesced.
    pub fn new(breakpoints: Vec<f64>, heights: Vec<f64>, atoms: Vec<(f64, f64)>) -> Result<Self> {
        let expected = breakpoints.len().saturating_sub(1);
        if heights.len() != expected {
            return Err(Error::InvalidDensity(format!(
                "{} breakpoints need {} heights, got {}",
                breakpoints.len(),
                expected,
                heights.len()
            )));
        }
        if let Some(x) = breakpoints.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidDensity(format!(
                "breakpoint {x} is not a finite non-negative number"
            )));
        }
        if let Some(h) = heights.iter().find(|h| !h.is_finite() || **h < 0.0) {
            return Err(Error::InvalidDensity(format!(
                "height {h} is not a finite non-negative number"
            )));
        }

        let mut bps: Vec<f64> = Vec::with_capacity(breakpoints.len());
        let mut hs: Vec<f64> = Vec::with_capacity(heights.len());
        for (j, &x) in breakpoints.iter().enumerate() {
            match bps.last() {
                None => bps.push(x),
                Some(&last) if x < last - EPS => {
                    return Err(Error::InvalidDensity(format!(
                        "breakpoints not increasing: {x} after {last}"
                    )))
                }
                // near-duplicate: the segment ending here has zero width
                Some(&last) if x - last <= EPS => {}
                Some(_) => {
                    hs.push(heights[j - 1]);
                    bps.push(x);
                }
            }
        }
        if bps.len() < 2 {
            bps.clear();
        }

        let atoms = coalesce_atoms(
            atoms
                .into_iter()
                .map(|(location, mass)| Atom { location, mass })
                .collect(),
            false,
        )?;

        Ok(PiecewiseDensity {
            breakpoints: bps,
            heights: hs,
            atoms,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Step density without atoms.
    pub fn step(breakpoints: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        Self::new(breakpoints, heights, Vec::new())
    }

    /// Uniform density carrying `mass` on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, mass: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidDensity(format!("empty interval [{lo}, {hi}]")));
        }
        Self::step(vec![lo, hi], vec![mass / (hi - lo)])
    }

    /// A single point mass.
    pub fn point(location: f64, mass: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), vec![(location, mass)])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `(lo, hi, height)` for every segment, left to right.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.heights)
            .map(|(w, &h)| (w[0], w[1], h))
    }

    pub fn is_empty(&self) -> bool {
        self.heights.iter().all(|&h| h == 0.0) && self.atoms.is_empty()
    }

    /// Mass of the step part alone.
    pub fn continuous_mass(&self) -> f64 {
        self.segments().map(|(lo, hi, h)| h * (hi - lo)).sum()
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.continuous_mass() + self.atom_mass()
    }

    /// Unnormalized first moment `∫ x dμ`.
    pub fn first_moment(&self) -> f64 {
        let steps: f64 = self.segments().map(|(lo, hi, h)| 0.5 * h * (hi * hi - lo * lo)).sum();
        let atoms: f64 = self.atoms.iter().map(|a| a.location * a.mass).sum();
        steps + atoms
    }

    /// First moment divided by total mass, i.e. the conditional mean.
    pub fn mean(&self) -> Result<f64> {
        let mass = self.total_mass();
        if mass <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(self.first_moment() / mass)
    }

    /// Step-part mass strictly below `x`.
    pub fn continuous_cdf(&self, x: f64) -> f64 {
        let mut below = 0.0;
        for (lo, hi, h) in self.segments() {
            if hi <= x {
                below += h * (hi - lo);
            } else {
                if lo < x {
                    below += h * (x - lo);
                }
                break;
            }
        }
        below
    }

    pub fn cdf(&self, x: f64) -> CdfValue {
        let mut below = self.continuous_cdf(x);
        let mut at = 0.0;
        for a in &self.atoms {
            if same_location(a.location, x) {
                at += a.mass;
            } else if a.location < x {
                below += a.mass;
            } else {
                break;
            }
        }
        CdfValue { below, at }
    }

    /// Density of the segment containing `x` under the half-open convention
    /// (`0` outside the breakpoint range). Atoms are ignored.
    pub fn height_at(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= x);
        if i == 0 || i >= self.breakpoints.len() {
            0.0
        } else {
            self.heights[i - 1]
        }
    }

    /// Density of the segment that ends at or contains `x`, i.e. the left
    /// segment when `x` is (within [`EPS`]) a breakpoint.
    pub fn height_left_of(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b < x - EPS);
        if i == 0 || i >= self.breakpoints.len() {
            0.0
        } else {
            self.heights[i - 1]
        }
    }

    /// `[inf σ, sup σ]` over positive-height segments and atoms.
    pub fn support_hull(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b, h) in self.segments() {
            if h > 0.0 {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        if let (Some(first), Some(last)) = (self.atoms.first(), self.atoms.last()) {
            lo = lo.min(first.location);
            hi = hi.max(last.location);
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Same shape with every height and atom mass multiplied by `w >= 0`.
    pub fn scaled(&self, w: f64) -> Self {
        debug_assert!(w >= 0.0);
        PiecewiseDensity {
            breakpoints: self.breakpoints.clone(),
            heights: self.heights.iter().map(|h| h * w).collect(),
            atoms: self
                .atoms
                .iter()
                .filter(|a| a.mass * w > 0.0)
                .map(|a| Atom {
                    location: a.location,
                    mass: a.mass * w,
                })
                .collect(),
        }
    }

    /// Rescaled to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        let mass = self.total_mass();
        if mass <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(self.scaled(1.0 / mass))
    }

    pub(crate) fn require_unit_mass(&self) -> Result<()> {
        let mass = self.total_mass();
        if (mass - 1.0).abs() > EPS {
            return Err(Error::Unnormalized(mass));
        }
        Ok(())
    }

    /// Average height of the step part over `[l, r]`. Exact lookup when a
    /// single segment covers the cell.
    fn cell_height(&self, l: f64, r: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= l);
        if i >= 1 && i < self.breakpoints.len() && self.breakpoints[i] >= r {
            return self.heights[i - 1];
        }
        (self.continuous_cdf(r) - self.continuous_cdf(l)) / (r - l)
    }
}

/// Weighted sum of densities over the union of their breakpoints.
///
/// Weights must be non-negative. Breakpoints of different parts closer than
/// [`EPS`] collapse to one; cells touched by such a merge get the part's
/// average height over the cell, which keeps every part's mass intact.
pub fn mixture(parts: &[(f64, &PiecewiseDensity)]) -> PiecewiseDensity {
    debug_assert!(parts.iter().all(|(w, _)| *w >= 0.0));
    combine(parts).expect("non-negative mixture cannot produce negative mass")
}

/// Signed linear combination. Fails when the result has a negative height
/// or atom beyond rounding noise.
pub(crate) fn combine(parts: &[(f64, &PiecewiseDensity)]) -> Result<PiecewiseDensity> {
    let live: Vec<(f64, &PiecewiseDensity)> = parts.iter().copied().filter(|(w, _)| *w != 0.0).collect();

    let mut points: Vec<f64> = live.iter().flat_map(|(_, d)| d.breakpoints.iter().copied()).collect();
    points.sort_by(f64::total_cmp);

    // clusters of near-equal points; first/interior clusters keep their
    // minimum, the last keeps its maximum so every part's range is covered
    let mut grid: Vec<f64> = Vec::new();
    let mut last_max = f64::NEG_INFINITY;
    for p in points {
        match grid.last() {
            Some(&l) if p - l <= EPS => last_max = last_max.max(p),
            _ => {
                grid.push(p);
                last_max = p;
            }
        }
    }
    if let Some(end) = grid.last_mut() {
        *end = last_max;
    }
    if grid.len() < 2 {
        grid.clear();
    }

    let mut heights = Vec::with_capacity(grid.len().saturating_sub(1));
    for w in grid.windows(2) {
        let (l, r) = (w[0], w[1]);
        let mut h = 0.0;
        for (weight, d) in &live {
            if d.breakpoints.len() >= 2 && r > d.breakpoints[0] && l < *d.breakpoints.last().unwrap() {
                h += weight * d.cell_height(l, r);
            }
        }
        if h < 0.0 {
            if h < -NEGATIVE_NOISE {
                return Err(Error::InvalidDensity(format!("negative height {h} on [{l}, {r})")));
            }
            h = 0.0;
        }
        heights.push(h);
    }

    let atoms: Vec<Atom> = live
        .iter()
        .flat_map(|(w, d)| {
            d.atoms.iter().map(move |a| Atom {
                location: a.location,
                mass: w * a.mass,
            })
        })
        .collect();
    let atoms = coalesce_atoms(atoms, true)?;

    Ok(PiecewiseDensity {
        breakpoints: grid,
        heights,
        atoms,
    })
}

fn coalesce_atoms(mut atoms: Vec<Atom>, signed: bool) -> Result<Vec<Atom>> {
    for a in &atoms {
        if !a.location.is_finite() || a.location < 0.0 || !a.mass.is_finite() {
            return Err(Error::InvalidDensity(format!(
                "atom ({}, {}) is not a finite non-negative point",
                a.location, a.mass
            )));
        }
        if !signed && a.mass < 0.0 {
            return Err(Error::InvalidDensity(format!(
                "atom at {} has negative mass",
                a.location
            )));
        }
    }
    atoms.sort_by(|a, b| a.location.partial_cmp(&b.location).unwrap_or(Ordering::Equal));

    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if same_location(last.location, a.location) => last.mass += a.mass,
            _ => out.push(a),
        }
    }
    for a in &out {
        if a.mass < -NEGATIVE_NOISE {
            return Err(Error::InvalidDensity(format!(
                "atom at {} has negative mass",
                a.location
            )));
        }
    }
    let floor = if signed { NEGATIVE_NOISE } else { 0.0 };
    out.retain(|a| a.mass > floor);
    Ok(out)
}
