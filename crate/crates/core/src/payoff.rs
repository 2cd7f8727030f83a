//! Pairwise win probabilities and dyad payoffs.
//!
//! All integrals are closed form: on every cell of the union of two
//! breakpoint lists both densities are constant, so the opponent's CDF is
//! linear there and the cell contributes a quadratic term.

use serde::{Deserialize, Serialize};

use crate::density::{same_location, PiecewiseDensity};
use crate::error::{Error, Result};

/// Two-point strategy `λ·δ(x1) + (1-λ)·δ(x2)` with mean `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dyad {
    pub x1: f64,
    pub x2: f64,
    pub b: f64,
    pub lambda: f64,
}

impl Dyad {
    pub fn new(x1: f64, x2: f64, b: f64) -> Result<Self> {
        if !(0.0 <= x1 && x1 < b && b < x2) || !x2.is_finite() {
            return Err(Error::InvalidDyad { x1, x2, b });
        }
        Ok(Dyad {
            x1,
            x2,
            b,
            lambda: (x2 - b) / (x2 - x1),
        })
    }

    /// The dyad as a two-atom unit-mass density.
    pub fn to_density(&self) -> PiecewiseDensity {
        PiecewiseDensity::new(
            Vec::new(),
            Vec::new(),
            vec![(self.x1, self.lambda), (self.x2, 1.0 - self.lambda)],
        )
        .expect("dyad atoms are valid")
    }
}

/// `P(X_f > X_h) + ½·P(X_f = X_h)` for unit-mass `f` and `h`.
pub fn win_prob(f: &PiecewiseDensity, h: &PiecewiseDensity) -> Result<f64> {
    f.require_unit_mass()?;
    h.require_unit_mass()?;
    Ok(score(f, h))
}

/// Expected payoff against the population aggregate: `∫ f·G`, which is the
/// win probability against a single opponent playing `g`.
pub fn population_payoff(f: &PiecewiseDensity, g: &PiecewiseDensity) -> Result<f64> {
    win_prob(f, g)
}

/// `λ·G(x1) + (1-λ)·G(x2)` using the tie-split CDF value at each point.
pub fn dyad_payoff(chi: &Dyad, g: &PiecewiseDensity) -> f64 {
    chi.lambda * g.cdf(chi.x1).mid() + (1.0 - chi.lambda) * g.cdf(chi.x2).mid()
}

/// Unnormalized `∫∫ ([x > y] + ½[x = y]) dμ_f(x) dμ_h(y)`.
pub(crate) fn score(f: &PiecewiseDensity, h: &PiecewiseDensity) -> f64 {
    let mut total = continuous_vs_continuous(f, h);

    let f_cont = f.continuous_mass();
    for a in h.atoms() {
        total += a.mass * (f_cont - f.continuous_cdf(a.location));
    }
    for a in f.atoms() {
        total += a.mass * h.continuous_cdf(a.location);
    }
    for a in f.atoms() {
        for b in h.atoms() {
            if same_location(a.location, b.location) {
                total += 0.5 * a.mass * b.mass;
            } else if a.location > b.location {
                total += a.mass * b.mass;
            }
        }
    }
    total
}

fn continuous_vs_continuous(f: &PiecewiseDensity, h: &PiecewiseDensity) -> f64 {
    let (fb, hb) = (f.breakpoints(), h.breakpoints());
    if fb.len() < 2 || hb.len() < 2 {
        return 0.0;
    }
    let mut points: Vec<f64> = fb.iter().chain(hb).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut total = 0.0;
    let mut h_cdf = 0.0;
    for w in points.windows(2) {
        let (l, r) = (w[0], w[1]);
        let width = r - l;
        let fh = f.height_at(l);
        let hh = h.height_at(l);
        if fh != 0.0 {
            total += fh * (h_cdf * width + 0.5 * hh * width * width);
        }
        h_cdf += hh * width;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::mixture;
    use proptest::prelude::*;

    fn u(lo: f64, hi: f64) -> PiecewiseDensity {
        PiecewiseDensity::uniform(lo, hi, 1.0).unwrap()
    }

    #[test]
    fn self_play_is_half() {
        let d = PiecewiseDensity::new(vec![0.0, 1.0, 3.0], vec![0.2, 0.3], vec![(0.5, 0.2)]).unwrap();
        assert!((win_prob(&d, &d).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn general_lotto_pair() {
        let strong = u(0.0, 2.0);
        let weak = PiecewiseDensity::new(vec![0.0, 2.0], vec![0.25], vec![(0.0, 0.5)]).unwrap();
        assert!((win_prob(&strong, &weak).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_rejected() {
        let half = PiecewiseDensity::uniform(0.0, 2.0, 0.5).unwrap();
        assert_eq!(win_prob(&half, &u(0.0, 1.0)), Err(Error::Unnormalized(0.5)));
    }

    #[test]
    fn dyad_examples() {
        let chi = Dyad::new(0.0, 2.0, 1.0).unwrap();
        assert_eq!(chi.lambda, 0.5);
        assert!((dyad_payoff(&chi, &u(0.0, 2.0)) - 0.5).abs() < 1e-15);

        let chi = Dyad::new(0.5, 1.5, 1.0).unwrap();
        assert!((dyad_payoff(&chi, &u(0.0, 2.0)) - 0.5).abs() < 1e-15);

        let g = PiecewiseDensity::step(vec![0.0, 2.5], vec![0.4]).unwrap();
        let chi = Dyad::new(0.5, 3.0, 1.0).unwrap();
        assert!((chi.lambda - 0.8).abs() < 1e-15);
        assert!((dyad_payoff(&chi, &g) - 0.36).abs() < 1e-12);

        assert!(Dyad::new(1.0, 2.0, 1.0).is_err());
        assert!(Dyad::new(-0.1, 2.0, 1.0).is_err());
        assert!(Dyad::new(0.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn dyad_on_opposing_atom_splits_tie() {
        let g = PiecewiseDensity::new(vec![0.0, 2.0], vec![0.25], vec![(1.0, 0.5)]).unwrap();
        let chi = Dyad::new(1.0, 3.0, 2.0).unwrap();
        // G(1) = 0.25 below + half of the 0.5 atom; G(3) = 1
        assert!((dyad_payoff(&chi, &g) - (0.5 * 0.5 + 0.5)).abs() < 1e-15);
        assert!((win_prob(&chi.to_density(), &g).unwrap() - dyad_payoff(&chi, &g)).abs() < 1e-12);
    }

    #[test]
    fn population_payoff_examples() {
        let g = mixture(&[(0.5, &u(0.0, 2.0)), (0.5, &u(2.0, 18.0))]);
        assert!((population_payoff(&g, &g).unwrap() - 0.5).abs() < 1e-15);
        assert!((population_payoff(&u(2.0, 18.0), &g).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(population_payoff(&u(20.0, 21.0), &g).unwrap(), 1.0);
    }

    #[test]
    fn dominance_is_exact() {
        assert_eq!(win_prob(&u(2.0, 18.0), &u(0.0, 2.0)).unwrap(), 1.0);
        assert_eq!(win_prob(&u(0.0, 2.0), &u(2.0, 18.0)).unwrap(), 0.0);
    }

    fn arb_unit() -> impl Strategy<Value = PiecewiseDensity> {
        (
            0.0f64..3.0,
            prop::collection::vec((0.05f64..3.0, 0.0f64..2.0), 1..5),
            prop::collection::vec((0.0f64..8.0, 0.01f64..1.0), 0..3),
        )
            .prop_map(|(start, segs, atoms)| {
                let mut bps = vec![start];
                let mut hs = Vec::new();
                for (w, h) in segs {
                    bps.push(bps.last().unwrap() + w);
                    hs.push(h);
                }
                // snap atoms to a coarse grid so exact ties occur
                let atoms = atoms.into_iter().map(|(x, m)| ((x * 2.0).round() / 2.0, m)).collect();
                PiecewiseDensity::new(bps, hs, atoms).unwrap()
            })
            .prop_filter("needs mass", |d| d.total_mass() > 1e-3)
            .prop_map(|d| d.normalized().unwrap())
    }

    proptest! {
        #[test]
        fn antisymmetric(f in arb_unit(), h in arb_unit()) {
            let s = win_prob(&f, &h).unwrap() + win_prob(&h, &f).unwrap();
            prop_assert!((s - 1.0).abs() <= 1e-12, "sum {}", s);
        }

        #[test]
        fn dyad_payoff_matches_win_prob(g in arb_unit(), x1 in 0.0f64..5.0, gap1 in 0.01f64..3.0, gap2 in 0.01f64..3.0) {
            let chi = Dyad::new(x1, x1 + gap1 + gap2, x1 + gap1).unwrap();
            let direct = win_prob(&chi.to_density(), &g).unwrap();
            prop_assert!((direct - dyad_payoff(&chi, &g)).abs() <= 1e-12);
        }

        #[test]
        fn disjoint_supports_win_surely(f in arb_unit(), h in arb_unit()) {
            let (_, f_hi) = f.support_hull().unwrap();
            let (h_lo, _) = h.support_hull().unwrap();
            let shifted = mixture(&[(1.0, &h)]);
            let offset = f_hi - h_lo + 0.5;
            let moved = PiecewiseDensity::new(
                shifted.breakpoints().iter().map(|x| x + offset).collect(),
                shifted.heights().to_vec(),
                shifted.atoms().iter().map(|a| (a.location + offset, a.mass)).collect(),
            ).unwrap();
            prop_assert!((win_prob(&moved, &f).unwrap() - 1.0).abs() <= 1e-12);
        }
    }
}
