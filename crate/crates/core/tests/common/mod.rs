//! Oracles shared by the integration tests. None of them call into the
//! library's CDF or payoff code.

#![allow(dead_code)]

use poplotto::PiecewiseDensity;
use rand::Rng;

/// Draws from `d` (any positive mass) by picking an atom or segment in
/// proportion to its mass, then a uniform point inside a segment.
pub fn sample<R: Rng>(d: &PiecewiseDensity, rng: &mut R) -> f64 {
    let segments: Vec<(f64, f64, f64)> = d.segments().collect();
    let total: f64 =
        segments.iter().map(|(lo, hi, h)| (hi - lo) * h).sum::<f64>() + d.atoms().iter().map(|a| a.mass).sum::<f64>();
    let mut u = rng.random::<f64>() * total;
    for a in d.atoms() {
        if u < a.mass {
            return a.location;
        }
        u -= a.mass;
    }
    for &(lo, hi, h) in &segments {
        let m = (hi - lo) * h;
        if u < m {
            return lo + (hi - lo) * rng.random::<f64>();
        }
        u -= m;
    }
    segments
        .last()
        .map_or_else(|| d.atoms().last().unwrap().location, |s| s.1)
}

/// Monte Carlo estimate of `P(X > Y) + ½·P(X = Y)` and its standard error.
pub fn monte_carlo_win<R: Rng>(f: &PiecewiseDensity, h: &PiecewiseDensity, n: usize, rng: &mut R) -> (f64, f64) {
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let (x, y) = (sample(f, rng), sample(h, rng));
        let s = if x > y {
            1.0
        } else if x == y {
            0.5
        } else {
            0.0
        };
        sum += s;
        sq += s * s;
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

/// Exact dice duel by counting face pairs: `P(a > b) + ½·P(a = b)`.
pub fn dice_duel(a: &[u32], b: &[u32]) -> f64 {
    let mut score = 0.0;
    for x in a {
        for y in b {
            score += match x.cmp(y) {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    score / (a.len() * b.len()) as f64
}

/// Brute force over partitions of {1..9} into three triples summing to 15,
/// each face doubled into a six-sided die. Returns the first triple (in
/// lexicographic order) whose duels form a 5/9 cycle.
pub fn search_magic_dice() -> Option<[Vec<u32>; 3]> {
    let triples: Vec<[u32; 3]> = (1..=9)
        .flat_map(|a| (a + 1..=9).flat_map(move |b| (b + 1..=9).map(move |c| [a, b, c])))
        .filter(|t| t.iter().sum::<u32>() == 15)
        .collect();
    for (x, a) in triples.iter().enumerate() {
        for (y, b) in triples.iter().enumerate().skip(x + 1) {
            for c in triples.iter().skip(y + 1) {
                let mut all: Vec<u32> = a.iter().chain(b).chain(c).copied().collect();
                all.sort_unstable();
                if all != (1..=9).collect::<Vec<_>>() {
                    continue;
                }
                let die = |t: &[u32; 3]| t.iter().flat_map(|&f| [f, f]).collect::<Vec<u32>>();
                let (da, db, dc) = (die(a), die(b), die(c));
                let five_ninths = |p: f64| (p - 5.0 / 9.0).abs() < 1e-15;
                if five_ninths(dice_duel(&da, &db))
                    && five_ninths(dice_duel(&db, &dc))
                    && five_ninths(dice_duel(&dc, &da))
                {
                    return Some([da, db, dc]);
                }
                if five_ninths(dice_duel(&db, &da))
                    && five_ninths(dice_duel(&dc, &db))
                    && five_ninths(dice_duel(&da, &dc))
                {
                    return Some([db, da, dc]);
                }
            }
        }
    }
    None
}

/// Budgets log-uniform on `[0.1, 100]`, sorted and distinct, with
/// Dirichlet(1, …, 1) masses drawn as normalized unit exponentials.
pub fn random_distribution<R: Rng>(rng: &mut R, max_groups: usize) -> Vec<(f64, f64)> {
    use rand_distr::{Distribution, Exp1};
    let n = rng.random_range(1..=max_groups);
    let mut budgets: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..2.0))).collect();
    budgets.sort_by(f64::total_cmp);
    budgets.dedup();
    let weights: Vec<f64> = budgets.iter().map(|_| Exp1.sample(rng)).collect();
    let total: f64 = weights.iter().sum();
    budgets
        .into_iter()
        .zip(weights.into_iter().map(|w| w / total))
        .collect()
}
