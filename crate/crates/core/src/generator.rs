//! Seeded random instances of piecewise-constant measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::formats::Instance;
use crate::measures::{GridDensity, MeasureMode, MeasureSet};

/// Spreads `total` cuts over `d` axes as evenly as possible, earlier axes
/// taking the remainder.
pub fn balanced_split(total: usize, d: usize) -> Vec<usize> {
    (0..d).map(|i| total / d + usize::from(i < total % d)).collect()
}

/// Every way of writing `total` as an ordered sum of `d` non-negative parts,
/// in lexicographic order.
pub fn all_splits(total: usize, d: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            all_splits(total - first, d - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// A random normalized density with between 1 and `resolution` cells per
/// axis. About a quarter of the cells are empty.
pub fn random_density<R: Rng>(rng: &mut R, d: usize, resolution: usize) -> GridDensity {
    let breakpoints: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            let cells = rng.gen_range(1..=resolution.max(1));
            loop {
                let gaps: Vec<f64> = (0..cells).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = gaps.iter().sum();
                let mut bp = vec![0.0];
                let mut acc = 0.0;
                for g in &gaps[..cells - 1] {
                    acc += g / total;
                    bp.push(acc);
                }
                bp.push(1.0);
                if bp.windows(2).all(|w| w[0] < w[1]) {
                    break bp;
                }
            }
        })
        .collect();
    let count: usize = breakpoints.iter().map(|b| b.len() - 1).product();
    let mut values: Vec<f64> =
        (0..count).map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen::<f64>() }).collect();
    if values.iter().all(|&v| v == 0.0) {
        values[0] = 1.0;
    }
    GridDensity::new(breakpoints, values)
        .and_then(|g| g.normalize(MeasureMode::Probability))
        .expect("generated densities are valid")
}

/// Deterministic instance for `(seed, n, d, k, resolution)` with the
/// balanced cut split.
pub fn generate_instance(seed: u64, n: usize, d: usize, k: usize, resolution: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let measures = (0..n).map(|_| random_density(&mut rng, d, resolution)).collect();
    Instance {
        k,
        m: balanced_split(n * (k - 1), d),
        measures: MeasureSet::new(measures).expect("same dimension"),
        mode: MeasureMode::Probability,
    }
}
