//! Search for fair divisions.
//!
//! Existence of a fair division with `m_i` cuts along axis `i` is a
//! topological fact with no constructive proof, so [`solve_base`] is a
//! multi-start heuristic whose output is always re-verified. Each restart
//! alternates two phases:
//!
//! 1. with the cuts frozen, box masses are fixed and the labeling is improved
//!    by simulated annealing over recolor and swap moves;
//! 2. with the labeling frozen, the residual is a piecewise multilinear
//!    function of the cut positions, and the cuts are driven to a zero by
//!    damped Gauss-Newton steps, with a pattern search on the max-abs
//!    residual as fallback when the damped steps stall.
//!
//! Composite `k` is reduced to prime factors by [`solve`]: a division for
//! the smallest prime factor `p` splits the cube into `p` classes, the
//! measures are restricted to each class and rescaled, each class is divided
//! recursively for `k/p`, and [`compose`] merges the pieces.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divisions::{evaluate, CutConfiguration, Division, DivisionError, Labeling};
use crate::grid;
use crate::measures::{GridDensity, MeasureError, MeasureMode, MeasureSet};

/// Mass below which a restricted measure is treated as null.
const NULL_MASS: f64 = 1e-9;
/// Damped steps stop once the residual reaches this level.
const POLISH_TARGET: f64 = 1e-14;
/// Work limit of the exhaustive discrete search.
const DISCRETE_LIMIT: f64 = 1e8;
/// Outer divisions tried before a composite solve gives up.
const OUTER_ATTEMPTS: u64 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("cut budget mismatch: sum of m is {actual}, need {expected}")]
    BudgetMismatch { expected: usize, actual: usize },
    #[error("m has {actual} axes, measures have dimension {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("need at least two thieves, got {0}")]
    TooFewThieves(usize),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no division within tolerance {tolerance:e} after {restarts} restarts (best residual {best:e})")]
    SearchExhausted { best: f64, tolerance: f64, restarts: usize },
    #[error("region has zero volume")]
    EmptyRegion,
    #[error("color {color} has {count} beads, not divisible by {k}")]
    NotDivisible { color: usize, count: usize, k: usize },
    #[error("exhaustive search would take about {0:e} steps")]
    TooLarge(f64),
    #[error("no split found; this contradicts the necklace theorem")]
    Infeasible,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Division(#[from] DivisionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Acceptance threshold on the max-abs residual for prime `k`.
    pub tolerance: f64,
    /// Acceptance threshold for divisions composed from sub-solutions.
    pub composite_tolerance: f64,
    pub restarts: usize,
    /// Residual evaluations allowed per restart.
    pub budget: usize,
    pub seed: u64,
    pub initial_temperature: f64,
    /// Geometric cooling factor per annealing move.
    pub cooling: f64,
    pub pattern_step: f64,
    pub pattern_shrink: f64,
    pub mode: MeasureMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            composite_tolerance: 1e-4,
            restarts: 32,
            budget: 100_000,
            seed: 0,
            initial_temperature: 0.02,
            cooling: 0.995,
            pattern_step: 0.05,
            pattern_shrink: 0.5,
            mode: MeasureMode::Probability,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolveError> {
        let bad = |s: &str| Err(SolveError::InvalidConfig(s.into()));
        if !(self.tolerance > 0.0) || !(self.composite_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.restarts == 0 || self.budget == 0 {
            return bad("restarts and budget must be positive");
        }
        if !(self.cooling > 0.0 && self.cooling <= 1.0) || !(self.initial_temperature >= 0.0) {
            return bad("cooling must lie in (0, 1] and temperature must be non-negative");
        }
        if !(self.pattern_step > 0.0) || !(self.pattern_shrink > 0.0 && self.pattern_shrink < 1.0) {
            return bad("pattern step must be positive and shrink must lie in (0, 1)");
        }
        Ok(())
    }

    /// Tolerance a final division for `k` thieves must meet.
    pub fn acceptance_tolerance(&self, k: usize) -> f64 {
        if is_prime(k) {
            self.tolerance
        } else {
            self.tolerance.max(self.composite_tolerance)
        }
    }

    fn reseeded(&self, salt: u64) -> Self {
        Self { seed: mix(self.seed, salt), ..self.clone() }
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn is_prime(k: usize) -> bool {
    k >= 2 && (2..).take_while(|p| p * p <= k).all(|p| k % p != 0)
}

pub fn smallest_prime_factor(k: usize) -> usize {
    (2..).take_while(|p| p * p <= k).find(|p| k % p == 0).unwrap_or(k)
}

/// Cut budgets for the reduction `k = k1·k2`: `outer` for the first
/// division into `k1` classes, `inner[j]` for dividing class `j + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorPlan {
    pub k1: usize,
    pub k2: usize,
    pub outer: Vec<usize>,
    pub inner: Vec<Vec<usize>>,
}

/// Lays the per-axis unit budgets out in axis order and cuts the sequence
/// into consecutive blocks of sizes `n(k1−1)`, then `n(k2−1)` for each of
/// the `k1` classes.
pub fn allocate_cut_budgets(n: usize, d: usize, k1: usize, k2: usize, m: &[usize]) -> Result<FactorPlan, SolveError> {
    if k1 < 2 || k2 < 2 {
        return Err(SolveError::TooFewThieves(k1.min(k2)));
    }
    if m.len() != d {
        return Err(SolveError::DimensionMismatch { expected: d, actual: m.len() });
    }
    let expected = n * (k1 * k2 - 1);
    let actual: usize = m.iter().sum();
    if actual != expected {
        return Err(SolveError::BudgetMismatch { expected, actual });
    }
    let units: Vec<usize> = m.iter().enumerate().flat_map(|(axis, &c)| std::iter::repeat(axis).take(c)).collect();
    let tally = |block: &[usize]| {
        let mut counts = vec![0; d];
        for &axis in block {
            counts[axis] += 1;
        }
        counts
    };
    let outer_len = n * (k1 - 1);
    let inner_len = n * (k2 - 1);
    let outer = tally(&units[..outer_len]);
    let inner = (0..k1)
        .map(|j| tally(&units[outer_len + j * inner_len..outer_len + (j + 1) * inner_len]))
        .collect();
    Ok(FactorPlan { k1, k2, outer, inner })
}

fn check_problem(measures: &MeasureSet, k: usize, m: &[usize], config: &SolverConfig) -> Result<(), SolveError> {
    config.validate()?;
    if k < 2 {
        return Err(SolveError::TooFewThieves(k));
    }
    if m.len() != measures.dim() {
        return Err(SolveError::DimensionMismatch { expected: measures.dim(), actual: m.len() });
    }
    let expected = measures.len() * (k - 1);
    let actual: usize = m.iter().sum();
    if actual != expected {
        return Err(SolveError::BudgetMismatch { expected, actual });
    }
    measures.check_mode(config.mode, 1e-9)?;
    Ok(())
}

/// Finds a division with exactly `m[i]` cuts along axis `i` whose residual
/// against `measures` is within [`SolverConfig::acceptance_tolerance`].
pub fn solve(measures: &MeasureSet, k: usize, m: &[usize], config: &SolverConfig) -> Result<Division, SolveError> {
    check_problem(measures, k, m, config)?;
    let division = solve_recursive(measures, k, m, config)?;
    let tolerance = config.acceptance_tolerance(k);
    let residual = evaluate(&division, measures)?.norm();
    if division.cuts().counts() != m || residual > tolerance {
        return Err(SolveError::SearchExhausted { best: residual, tolerance, restarts: config.restarts });
    }
    Ok(division)
}

fn solve_recursive(measures: &MeasureSet, k: usize, m: &[usize], config: &SolverConfig) -> Result<Division, SolveError> {
    if is_prime(k) {
        return solve_base(measures, k, m, config);
    }
    let k1 = smallest_prime_factor(k);
    let k2 = k / k1;
    let plan = allocate_cut_budgets(measures.len(), measures.dim(), k1, k2, m)?;
    let mut last_err = None;
    for attempt in 0..OUTER_ATTEMPTS {
        let outer_config = config.reseeded(attempt);
        let outer = match solve_base(measures, k1, &plan.outer, &outer_config) {
            Ok(d) => d,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let mut inners = Vec::with_capacity(k1);
        for class in 1..=k1 {
            let region: Vec<usize> = (0..outer.labels().len()).filter(|&b| outer.labels()[b] == class).collect();
            let restricted = measures
                .iter()
                .map(|g| restrict_measure(g, outer.cuts(), &region, k1 as f64))
                .collect::<Result<Vec<_>, _>>()
                .and_then(|v| Ok(MeasureSet::new(v)?));
            let inner_config = outer_config.reseeded(1000 + class as u64);
            match restricted.and_then(|r| solve_recursive(&r, k2, &plan.inner[class - 1], &inner_config)) {
                Ok(d) => inners.push(d),
                Err(e) => {
                    last_err = Some(e);
                    break;
                }
            }
        }
        if inners.len() == k1 {
            return compose(&outer, &inners, &plan);
        }
    }
    Err(last_err.unwrap_or(SolveError::SearchExhausted {
        best: f64::INFINITY,
        tolerance: config.acceptance_tolerance(k),
        restarts: config.restarts,
    }))
}

/// Restriction `S ↦ scale · μ(S ∩ region)` of a density to a union of
/// elementary boxes of `cuts`, renormalized. A region carrying (almost) no
/// mass gets the uniform density on the region instead.
pub fn restrict_measure(
    density: &GridDensity,
    cuts: &CutConfiguration,
    region: &[usize],
    scale: f64,
) -> Result<GridDensity, SolveError> {
    if cuts.dim() != density.dim() {
        return Err(SolveError::DimensionMismatch { expected: density.dim(), actual: cuts.dim() });
    }
    let box_shape = cuts.shape();
    let box_count = cuts.box_count();
    let mut in_region = vec![false; box_count];
    for &b in region {
        if b >= box_count {
            return Err(SolveError::ShapeMismatch(format!("box {b} outside a grid of {box_count} boxes")));
        }
        in_region[b] = true;
    }
    let mut region_volume = 0.0;
    let mut idx = vec![0; box_shape.len()];
    for &inside in &in_region {
        if inside {
            region_volume += cuts.elementary_box(&idx)?.volume();
        }
        grid::advance(&box_shape, &mut idx);
    }
    if region_volume <= 0.0 {
        return Err(SolveError::EmptyRegion);
    }

    let breakpoints: Vec<Vec<f64>> = (0..density.dim())
        .map(|a| {
            let mut bp: Vec<f64> = density.breakpoints()[a]
                .iter()
                .chain(cuts.cuts()[a].iter())
                .copied()
                .collect();
            bp.sort_by(f64::total_cmp);
            bp.dedup();
            bp
        })
        .collect();
    let cell_shape: Vec<usize> = breakpoints.iter().map(|b| b.len() - 1).collect();
    let box_strides = grid::strides(&box_shape);
    let orig_strides = grid::strides(&density.cell_shape());
    let cell_count: usize = cell_shape.iter().product();
    let mut inside = vec![false; cell_count];
    let mut values = vec![0.0; cell_count];
    let mut volumes = vec![0.0; cell_count];
    let mut cell = vec![0; cell_shape.len()];
    for flat in 0..cell_count {
        let mut box_flat = 0;
        let mut orig_flat = 0;
        let mut vol = 1.0;
        for a in 0..cell.len() {
            let (lo, hi) = (breakpoints[a][cell[a]], breakpoints[a][cell[a] + 1]);
            let mid = 0.5 * (lo + hi);
            vol *= hi - lo;
            box_flat += cuts.cuts()[a].partition_point(|&c| c < mid) * box_strides[a];
            let ob = &density.breakpoints()[a];
            orig_flat += (ob.partition_point(|&b| b <= mid) - 1) * orig_strides[a];
        }
        inside[flat] = in_region[box_flat];
        volumes[flat] = vol;
        if inside[flat] {
            values[flat] = scale * density.values()[orig_flat];
        }
        grid::advance(&cell_shape, &mut cell);
    }
    let total: f64 = values.iter().zip(&volumes).map(|(v, w)| v * w).sum();
    if total < NULL_MASS {
        for (v, &i) in values.iter_mut().zip(&inside) {
            *v = if i { 1.0 / region_volume } else { 0.0 };
        }
    } else {
        values.iter_mut().for_each(|v| *v /= total);
    }
    Ok(GridDensity::new(breakpoints, values)?)
}

/// Merges an outer division into `k1` classes with one division per class
/// into `k2` parts. A merged cell lying in outer class `j1` and in part `j2`
/// of that class's division gets color `(j1−1)·k2 + j2`.
pub fn compose(outer: &Division, inners: &[Division], plan: &FactorPlan) -> Result<Division, SolveError> {
    let mismatch = |s: String| Err(SolveError::ShapeMismatch(s));
    if outer.k() != plan.k1 || inners.len() != plan.k1 {
        return mismatch(format!("expected an outer division for {} and {} inner divisions", plan.k1, plan.k1));
    }
    if outer.cuts().counts() != plan.outer {
        return mismatch(format!("outer cut counts {:?} differ from plan {:?}", outer.cuts().counts(), plan.outer));
    }
    for (j, inner) in inners.iter().enumerate() {
        if inner.k() != plan.k2 || inner.cuts().counts() != plan.inner[j] {
            return mismatch(format!("inner division {} does not match the plan", j + 1));
        }
        if inner.cuts().dim() != outer.cuts().dim() {
            return mismatch("inner and outer dimensions differ".into());
        }
    }
    let d = outer.cuts().dim();
    let sources: Vec<&Division> = std::iter::once(outer).chain(inners.iter()).collect();

    // Per axis: merged positions, and for every merged interval the interval
    // index it occupies in each source division.
    let mut merged = Vec::with_capacity(d);
    let mut interval_of: Vec<Vec<Vec<usize>>> = vec![Vec::with_capacity(d); sources.len()];
    for axis in 0..d {
        let mut tagged: Vec<(f64, usize)> = sources
            .iter()
            .enumerate()
            .flat_map(|(s, div)| div.cuts().cuts()[axis].iter().map(move |&x| (x, s)))
            .collect();
        tagged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut seen = vec![0; sources.len()];
        let mut per_source = vec![vec![0]; sources.len()];
        for &(_, s) in &tagged {
            seen[s] += 1;
            for (t, list) in per_source.iter_mut().enumerate() {
                list.push(seen[t]);
            }
        }
        for (t, list) in per_source.into_iter().enumerate() {
            interval_of[t].push(list);
        }
        merged.push(tagged.into_iter().map(|(x, _)| x).collect::<Vec<f64>>());
    }

    let cuts = CutConfiguration::new(merged)?;
    let shape = cuts.shape();
    let mut labels = Vec::with_capacity(cuts.box_count());
    let mut cell = vec![0; d];
    let mut src_index = vec![0; d];
    let source_flat = |div: &Division, source: usize, cell: &[usize], buf: &mut Vec<usize>| {
        for a in 0..d {
            buf[a] = interval_of[source][a][cell[a]];
        }
        grid::flat_index(&grid::strides(&div.cuts().shape()), buf)
    };
    loop {
        let j1 = outer.labels()[source_flat(outer, 0, &cell, &mut src_index)];
        let inner = &inners[j1 - 1];
        let j2 = inner.labels()[source_flat(inner, j1, &cell, &mut src_index)];
        labels.push((j1 - 1) * plan.k2 + j2);
        if !grid::advance(&shape, &mut cell) {
            break;
        }
    }
    Ok(Division::new(cuts, Labeling::new(plan.k1 * plan.k2, labels)?)?)
}

/// Multi-start search for a division when `k` is treated as a single block
/// (normally prime). Restarts run in parallel; the lowest-index restart that
/// meets the tolerance wins, so the result does not depend on scheduling.
pub fn solve_base(measures: &MeasureSet, k: usize, m: &[usize], config: &SolverConfig) -> Result<Division, SolveError> {
    check_problem(measures, k, m, config)?;
    let engine = Engine::new(measures, k, m);
    let chunk = rayon::current_num_threads().max(1);
    let mut best: Option<(f64, usize)> = None;
    for start in (0..config.restarts).step_by(chunk) {
        let end = (start + chunk).min(config.restarts);
        let outcomes: Vec<Outcome> = (start..end).into_par_iter().map(|r| engine.run(r, config)).collect();
        for (offset, out) in outcomes.iter().enumerate() {
            let restart = start + offset;
            if out.residual <= config.tolerance {
                return engine.division(&out.cuts, &out.labels);
            }
            if best.map_or(true, |(b, _)| out.residual < b) {
                best = Some((out.residual, restart));
            }
        }
    }
    Err(SolveError::SearchExhausted {
        best: best.map_or(f64::INFINITY, |b| b.0),
        tolerance: config.tolerance,
        restarts: config.restarts,
    })
}

struct Outcome {
    residual: f64,
    cuts: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

/// Box masses and their derivatives for one cut configuration.
struct Tables {
    /// `[measure][box]`
    masses: Vec<Vec<f64>>,
    /// `[measure][box][axis]`: derivative of the box mass with respect to its
    /// upper and lower face on that axis.
    upper: Vec<Vec<Vec<f64>>>,
    lower: Vec<Vec<Vec<f64>>>,
}

struct Engine<'a> {
    measures: &'a MeasureSet,
    k: usize,
    m: Vec<usize>,
    d: usize,
    box_shape: Vec<usize>,
    box_count: usize,
    corner_shape: Vec<usize>,
    corner_strides: Vec<usize>,
    corner_count: usize,
    unknowns: usize,
}

impl<'a> Engine<'a> {
    fn new(measures: &'a MeasureSet, k: usize, m: &[usize]) -> Self {
        let box_shape: Vec<usize> = m.iter().map(|c| c + 1).collect();
        let corner_shape: Vec<usize> = m.iter().map(|c| c + 2).collect();
        Self {
            measures,
            k,
            m: m.to_vec(),
            d: m.len(),
            box_count: box_shape.iter().product(),
            box_shape,
            corner_strides: grid::strides(&corner_shape),
            corner_count: corner_shape.iter().product(),
            corner_shape,
            unknowns: m.iter().sum(),
        }
    }

    fn division(&self, cuts: &[Vec<f64>], labels: &[usize]) -> Result<Division, SolveError> {
        Ok(Division::from_parts(self.k, cuts.to_vec(), labels.to_vec())?)
    }

    fn position(cuts: &[Vec<f64>], axis: usize, p: usize) -> f64 {
        if p == 0 {
            0.0
        } else if p > cuts[axis].len() {
            1.0
        } else {
            cuts[axis][p - 1]
        }
    }

    fn tables(&self, cuts: &[Vec<f64>], with_grad: bool) -> Tables {
        let d = self.d;
        let n = self.measures.len();
        let mut cdf = vec![vec![0.0; self.corner_count]; n];
        let mut grad = if with_grad { vec![vec![0.0; self.corner_count * d]; n] } else { Vec::new() };
        let mut corner = vec![0; d];
        let mut point = vec![0.0; d];
        for flat in 0..self.corner_count {
            for a in 0..d {
                point[a] = Self::position(cuts, a, corner[a]);
            }
            for (j, g) in self.measures.iter().enumerate() {
                cdf[j][flat] = if with_grad {
                    g.cdf_with_gradient(&point, &mut grad[j][flat * d..(flat + 1) * d])
                } else {
                    g.cdf_unchecked(&point)
                };
            }
            grid::advance(&self.corner_shape, &mut corner);
        }

        let mut masses = vec![vec![0.0; self.box_count]; n];
        let mut upper = if with_grad { vec![vec![vec![0.0; d]; self.box_count]; n] } else { Vec::new() };
        let mut lower = upper.clone();
        let mut b = vec![0; d];
        for flat in 0..self.box_count {
            let base = grid::flat_index(&self.corner_strides, &b);
            let degenerate = (0..d).any(|a| Self::position(cuts, a, b[a]) == Self::position(cuts, a, b[a] + 1));
            for mask in 0..(1usize << d) {
                let mut at = base;
                let mut lows = 0;
                for a in 0..d {
                    if mask >> a & 1 == 1 {
                        at += self.corner_strides[a];
                    } else {
                        lows += 1;
                    }
                }
                let sign = if lows % 2 == 0 { 1.0 } else { -1.0 };
                for j in 0..n {
                    if !degenerate {
                        masses[j][flat] += sign * cdf[j][at];
                    }
                    if with_grad {
                        // d/d(face on axis i) sums the signed ∂_i F over the
                        // corners on that face.
                        for i in 0..d {
                            let g = sign * grad[j][at * d + i];
                            if mask >> i & 1 == 1 {
                                upper[j][flat][i] += g;
                            } else {
                                lower[j][flat][i] += g;
                            }
                        }
                    }
                }
            }
            grid::advance(&self.box_shape, &mut b);
        }
        Tables { masses, upper, lower }
    }

    fn color_sums(&self, masses: &[Vec<f64>], labels: &[usize]) -> Vec<Vec<f64>> {
        masses
            .iter()
            .map(|row| {
                let mut s = vec![0.0; self.k];
                for (x, &l) in row.iter().zip(labels) {
                    s[l - 1] += x;
                }
                s
            })
            .collect()
    }

    fn residual(&self, masses: &[Vec<f64>], labels: &[usize]) -> Vec<f64> {
        let share = 1.0 / self.k as f64;
        self.color_sums(masses, labels).into_iter().flatten().map(|s| s - share).collect()
    }

    fn jacobian(&self, t: &Tables, labels: &[usize]) -> DMatrix<f64> {
        let n = self.measures.len();
        let mut jac = DMatrix::zeros(n * self.k, self.unknowns);
        let offsets: Vec<usize> = self
            .m
            .iter()
            .scan(0, |acc, &c| {
                let o = *acc;
                *acc += c;
                Some(o)
            })
            .collect();
        let mut b = vec![0; self.d];
        for flat in 0..self.box_count {
            let c = labels[flat] - 1;
            for i in 0..self.d {
                // Upper face of this box is cut number b_i + 1 (1-based) on axis i.
                if b[i] < self.m[i] {
                    let col = offsets[i] + b[i];
                    for j in 0..n {
                        jac[(j * self.k + c, col)] += t.upper[j][flat][i];
                    }
                }
                if b[i] > 0 {
                    let col = offsets[i] + b[i] - 1;
                    for j in 0..n {
                        jac[(j * self.k + c, col)] += t.lower[j][flat][i];
                    }
                }
            }
            grid::advance(&self.box_shape, &mut b);
        }
        jac
    }

    fn flatten(cuts: &[Vec<f64>]) -> Vec<f64> {
        cuts.iter().flatten().copied().collect()
    }

    fn unflatten(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.d);
        let mut at = 0;
        for &c in &self.m {
            let mut axis: Vec<f64> = x[at..at + c].iter().map(|v| v.clamp(0.0, 1.0)).collect();
            axis.sort_by(f64::total_cmp);
            out.push(axis);
            at += c;
        }
        out
    }

    fn inf_norm(r: &[f64]) -> f64 {
        r.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn sq_norm(r: &[f64]) -> f64 {
        r.iter().map(|v| v * v).sum()
    }

    /// Damped Gauss-Newton on the cut positions for a fixed labeling.
    fn newton(&self, cuts: &mut Vec<Vec<f64>>, labels: &[usize], evals: &mut usize, limit: usize) -> f64 {
        let mut t = self.tables(cuts, true);
        *evals += 1;
        let mut r = self.residual(&t.masses, labels);
        let mut lambda = 1e-9;
        for _ in 0..60 {
            if Self::inf_norm(&r) <= POLISH_TARGET || *evals >= limit || self.unknowns == 0 {
                break;
            }
            let jac = self.jacobian(&t, labels);
            let jt = jac.transpose();
            let normal = &jt * &jac;
            let rhs = -(&jt * DVector::from_column_slice(&r));
            let x = Self::flatten(cuts);
            let current = Self::sq_norm(&r);
            let mut accepted = false;
            while lambda < 1e6 && *evals < limit {
                let mut a = normal.clone();
                for i in 0..self.unknowns {
                    a[(i, i)] += lambda * (1.0 + normal[(i, i)]);
                }
                let step = match a.cholesky() {
                    Some(ch) => ch.solve(&rhs),
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                };
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let trial_cuts = self.unflatten(&trial);
                let tt = self.tables(&trial_cuts, true);
                *evals += 1;
                let tr = self.residual(&tt.masses, labels);
                if Self::sq_norm(&tr) < current {
                    *cuts = trial_cuts;
                    t = tt;
                    r = tr;
                    lambda = (lambda * 0.1).max(1e-12);
                    accepted = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !accepted {
                break;
            }
        }
        Self::inf_norm(&r)
    }

    /// Coordinate pattern search on the max-abs residual.
    fn pattern_search(
        &self,
        cuts: &mut Vec<Vec<f64>>,
        labels: &[usize],
        config: &SolverConfig,
        evals: &mut usize,
        limit: usize,
    ) -> f64 {
        let mut x = Self::flatten(cuts);
        let score = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let c = self.unflatten(x);
            Self::inf_norm(&self.residual(&self.tables(&c, false).masses, labels))
        };
        let mut best = score(&x, evals);
        let mut step = config.pattern_step;
        while step > 1e-10 && *evals < limit && best > POLISH_TARGET {
            let mut improved = false;
            for i in 0..x.len() {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] = (y[i] + dir * step).clamp(0.0, 1.0);
                    let s = score(&y, evals);
                    if s < best {
                        best = s;
                        x = Self::flatten(&self.unflatten(&y));
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= config.pattern_shrink;
            }
        }
        *cuts = self.unflatten(&x);
        best
    }

    fn energy(&self, sums: &[Vec<f64>]) -> f64 {
        let share = 1.0 / self.k as f64;
        let mut worst = 0.0f64;
        let mut total = 0.0;
        for row in sums {
            for &s in row {
                let dev = (s - share).abs();
                worst = worst.max(dev);
                total += dev;
            }
        }
        // Max-abs residual; the mean deviation breaks ties on plateaus.
        worst + 1e-2 * total / (sums.len() * self.k) as f64
    }

    /// Largest-first greedy: each box goes to the color whose shares are
    /// furthest below target.
    fn greedy_labels(&self, masses: &[Vec<f64>]) -> Vec<usize> {
        let n = masses.len();
        let mut order: Vec<usize> = (0..self.box_count).collect();
        let weight = |b: usize| masses.iter().map(|row| row[b].abs()).sum::<f64>();
        order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)).then(a.cmp(&b)));
        let mut sums = vec![vec![0.0; self.k]; n];
        let mut labels = vec![1; self.box_count];
        let share = 1.0 / self.k as f64;
        for b in order {
            let best = (0..self.k)
                .min_by(|&c1, &c2| {
                    let cost = |c: usize| (0..n).map(|j| (sums[j][c] + masses[j][b] - share).powi(2)).sum::<f64>()
                        - (0..n).map(|j| (sums[j][c] - share).powi(2)).sum::<f64>();
                    cost(c1).total_cmp(&cost(c2))
                })
                .unwrap_or(0);
            for j in 0..n {
                sums[j][best] += masses[j][b];
            }
            labels[b] = best + 1;
        }
        labels
    }

    /// Simulated annealing over recolor and swap moves for fixed box masses.
    fn anneal(
        &self,
        masses: &[Vec<f64>],
        labels: &mut Vec<usize>,
        rng: &mut ChaCha8Rng,
        temperature: f64,
        config: &SolverConfig,
        evals: &mut usize,
    ) {
        let n = masses.len();
        let mut sums = self.color_sums(masses, labels);
        let mut energy = self.energy(&sums);
        let mut best = (energy, labels.clone());
        let moves = (40 * self.box_count).max(200);
        let mut temp = temperature;
        for _ in 0..moves {
            *evals += 1;
            let b1 = rng.gen_range(0..self.box_count);
            let c1 = labels[b1];
            let (b2, c2) = if rng.gen_bool(0.5) {
                let b2 = rng.gen_range(0..self.box_count);
                (Some(b2), labels[b2])
            } else {
                let mut c = rng.gen_range(1..self.k);
                if c >= c1 {
                    c += 1;
                }
                (None, c)
            };
            if c1 == c2 {
                continue;
            }
            let apply = |sums: &mut Vec<Vec<f64>>, sign: f64| {
                for j in 0..n {
                    sums[j][c1 - 1] -= sign * masses[j][b1];
                    sums[j][c2 - 1] += sign * masses[j][b1];
                    if let Some(b2) = b2 {
                        sums[j][c2 - 1] -= sign * masses[j][b2];
                        sums[j][c1 - 1] += sign * masses[j][b2];
                    }
                }
            };
            apply(&mut sums, 1.0);
            let next = self.energy(&sums);
            let accept = next < energy || (temp > 0.0 && rng.gen::<f64>() < (-(next - energy) / temp).exp());
            if accept {
                labels[b1] = c2;
                if let Some(b2) = b2 {
                    labels[b2] = c1;
                }
                energy = next;
                if energy < best.0 {
                    best = (energy, labels.clone());
                }
            } else {
                apply(&mut sums, -1.0);
            }
            temp *= config.cooling;
        }
        *labels = best.1;
    }

    fn checkerboard(&self) -> Vec<usize> {
        let mut b = vec![0; self.d];
        (0..self.box_count)
            .map(|_| {
                let label = 1 + b.iter().sum::<usize>() % 2;
                grid::advance(&self.box_shape, &mut b);
                label
            })
            .collect()
    }

    fn initial_cuts(&self, restart: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        self.m
            .iter()
            .map(|&c| {
                if restart == 0 {
                    (1..=c).map(|l| l as f64 / (c + 1) as f64).collect()
                } else {
                    // Uniform Dirichlet gaps.
                    let gaps: Vec<f64> = (0..=c).map(|_| Exp1.sample(rng)).collect();
                    let total: f64 = gaps.iter().sum();
                    gaps[..c]
                        .iter()
                        .scan(0.0, |acc, g| {
                            *acc += g / total;
                            Some(acc.min(1.0))
                        })
                        .collect()
                }
            })
            .collect()
    }

    fn run(&self, restart: usize, config: &SolverConfig) -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, restart as u64));
        let mut evals = 0;
        let limit = config.budget;
        let mut cuts = self.initial_cuts(restart, &mut rng);
        // Two thieves can always share with the checkerboard labeling, so
        // every other restart keeps it fixed and only moves the cuts.
        let checkerboard = self.k == 2 && restart % 2 == 0;
        let mut labels = if checkerboard {
            self.checkerboard()
        } else {
            self.greedy_labels(&self.tables(&cuts, false).masses)
        };
        let mut best = Outcome { residual: f64::INFINITY, cuts: cuts.clone(), labels: labels.clone() };
        let mut stale = 0;
        while evals < limit {
            let masses = self.tables(&cuts, false).masses;
            evals += 1;
            let temperature = if stale == 0 { config.initial_temperature * 0.1 } else { config.initial_temperature };
            if !checkerboard {
                self.anneal(&masses, &mut labels, &mut rng, temperature, config, &mut evals);
            }
            let mut residual = self.newton(&mut cuts, &labels, &mut evals, limit);
            if residual > config.tolerance {
                residual = residual.min(self.pattern_search(&mut cuts, &labels, config, &mut evals, limit));
                residual = residual.min(self.newton(&mut cuts, &labels, &mut evals, limit));
            }
            if residual < best.residual {
                let gain = residual < 0.5 * best.residual;
                best = Outcome { residual, cuts: cuts.clone(), labels: labels.clone() };
                stale = if gain { 0 } else { stale + 1 };
            } else {
                stale += 1;
            }
            if best.residual <= config.tolerance {
                break;
            }
            if stale >= 3 {
                // Jump to a fresh region of the configuration space.
                cuts = self.initial_cuts(1, &mut rng);
                if !checkerboard {
                    labels = self.greedy_labels(&self.tables(&cuts, false).masses);
                    labels.shuffle(&mut rng);
                }
                stale = 0;
            } else {
                let sigma = 0.02 * stale as f64 + 0.01;
                let x: Vec<f64> = Self::flatten(&cuts)
                    .into_iter()
                    .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                cuts = self.unflatten(&x);
            }
        }
        best
    }
}

/// An exact split of a discrete necklace: `cuts` are bead boundaries
/// (a cut at `p` separates bead `p−1` from bead `p`), and `assignment[q]` is
/// the thief receiving piece `q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteSplit {
    pub beads: usize,
    pub cuts: Vec<usize>,
    pub assignment: Vec<usize>,
}

impl DiscreteSplit {
    /// The same split as a division of `[0,1]`.
    pub fn to_division(&self, k: usize) -> Result<Division, SolveError> {
        let cuts = self.cuts.iter().map(|&p| p as f64 / self.beads as f64).collect();
        Ok(Division::from_parts(k, vec![cuts], self.assignment.clone())?)
    }
}

fn binomial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exhaustive search for a split of a bead necklace (colors `1..=n`) among
/// `k` thieves with the fewest cuts, at most `n(k−1)`.
pub fn solve_discrete_1d(beads: &[usize], k: usize) -> Result<DiscreteSplit, SolveError> {
    if k < 2 {
        return Err(SolveError::TooFewThieves(k));
    }
    let total = beads.len();
    let colors = beads.iter().copied().max().unwrap_or(0);
    if colors == 0 || beads.contains(&0) {
        return Err(SolveError::Measure(MeasureError::UnknownColor { color: 0, colors }));
    }
    let mut counts = vec![0; colors];
    for &b in beads {
        counts[b - 1] += 1;
    }
    if let Some(c) = (0..colors).find(|&c| counts[c] % k != 0) {
        return Err(SolveError::NotDivisible { color: c + 1, count: counts[c], k });
    }
    let max_cuts = (colors * (k - 1)).min(total - 1);
    let work = binomial(total - 1, max_cuts) * (k as f64).powi(max_cuts as i32 + 1);
    if work > DISCRETE_LIMIT {
        return Err(SolveError::TooLarge(work));
    }
    let quota: Vec<usize> = counts.iter().map(|c| c / k).collect();
    // prefix[p][c] = beads of color c among the first p
    let mut prefix = vec![vec![0; colors]; total + 1];
    for (p, &b) in beads.iter().enumerate() {
        prefix[p + 1] = prefix[p].clone();
        prefix[p + 1][b - 1] += 1;
    }

    struct Search<'s> {
        total: usize,
        k: usize,
        quota: &'s [usize],
        prefix: &'s [Vec<usize>],
        held: Vec<Vec<usize>>,
        cuts: Vec<usize>,
        assignment: Vec<usize>,
    }

    impl Search<'_> {
        fn piece(&mut self, start: usize, cuts_left: usize) -> bool {
            let last = if cuts_left == 0 { self.total } else { self.total - 1 };
            let ends: Vec<usize> = if cuts_left == 0 { vec![self.total] } else { (start + 1..=self.total).collect() };
            for end in ends {
                if end > last && end != self.total {
                    continue;
                }
                for thief in 0..self.k {
                    let fits = (0..self.quota.len()).all(|c| {
                        self.held[thief][c] + self.prefix[end][c] - self.prefix[start][c] <= self.quota[c]
                    });
                    if !fits {
                        continue;
                    }
                    for c in 0..self.quota.len() {
                        self.held[thief][c] += self.prefix[end][c] - self.prefix[start][c];
                    }
                    self.assignment.push(thief + 1);
                    let done = if end == self.total {
                        true // quotas are exact once every bead is placed
                    } else {
                        self.cuts.push(end);
                        let ok = self.piece(end, cuts_left - 1);
                        if !ok {
                            self.cuts.pop();
                        }
                        ok
                    };
                    if done {
                        return true;
                    }
                    self.assignment.pop();
                    for c in 0..self.quota.len() {
                        self.held[thief][c] -= self.prefix[end][c] - self.prefix[start][c];
                    }
                }
            }
            false
        }
    }

    for budget in 0..=max_cuts {
        let mut search = Search {
            total,
            k,
            quota: &quota,
            prefix: &prefix,
            held: vec![vec![0; colors]; k],
            cuts: Vec::new(),
            assignment: Vec::new(),
        };
        if search.piece(0, budget) {
            return Ok(DiscreteSplit { beads: total, cuts: search.cuts, assignment: search.assignment });
        }
    }
    Err(SolveError::Infeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::generate_instance;
    use crate::measures::AxisBox;
    use proptest::prelude::{prop_assert_eq, proptest, ProptestConfig};

    fn density(bp: &[f64], values: &[f64]) -> GridDensity {
        GridDensity::new(vec![bp.to_vec()], values.to_vec()).unwrap()
    }

    fn set(ds: Vec<GridDensity>) -> MeasureSet {
        MeasureSet::new(ds).unwrap()
    }

    #[test]
    fn allocation_examples() {
        let plan = allocate_cut_budgets(2, 2, 2, 2, &[2, 4]).unwrap();
        assert_eq!(plan.outer, vec![2, 0]);
        assert_eq!(plan.inner, vec![vec![0, 2], vec![0, 2]]);
        let plan = allocate_cut_budgets(1, 1, 2, 2, &[3]).unwrap();
        assert_eq!((plan.outer, plan.inner), (vec![1], vec![vec![1], vec![1]]));
        assert_eq!(
            allocate_cut_budgets(1, 1, 2, 2, &[2]),
            Err(SolveError::BudgetMismatch { expected: 3, actual: 2 })
        );
    }

    #[test]
    fn primes() {
        let p: Vec<usize> = (0..20).filter(|&k| is_prime(k)).collect();
        assert_eq!(p, vec![2, 3, 5, 7, 11, 13, 17, 19]);
        assert_eq!(smallest_prime_factor(6), 2);
        assert_eq!(smallest_prime_factor(9), 3);
        assert_eq!(smallest_prime_factor(7), 7);
    }

    #[test]
    fn restriction_examples() {
        let u = GridDensity::uniform(2).unwrap();
        let cuts = CutConfiguration::new(vec![vec![0.5], vec![]]).unwrap();
        let r = restrict_measure(&u, &cuts, &[0], 2.0).unwrap();
        assert!((r.total_mass() - 1.0).abs() < 1e-12);
        let left = AxisBox::new(vec![0.0, 0.0], vec![0.5, 1.0]);
        assert!((r.box_mass(&left).unwrap() - 1.0).abs() < 1e-12);

        let g = density(&[0.0, 0.5, 1.0], &[2.0, 0.0]);
        let cuts = CutConfiguration::new(vec![vec![0.5]]).unwrap();
        let r = restrict_measure(&g, &cuts, &[1], 2.0).unwrap();
        assert_eq!(r.values(), &[0.0, 2.0]);

        let cuts = CutConfiguration::new(vec![vec![0.25, 0.75]]).unwrap();
        let r = restrict_measure(&g, &cuts, &[0, 2], 2.0).unwrap();
        assert_eq!(r.breakpoints()[0], vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(r.values(), &[4.0, 0.0, 0.0, 0.0]);

        assert_eq!(restrict_measure(&g, &cuts, &[], 2.0), Err(SolveError::EmptyRegion));
    }

    #[test]
    fn compose_quarters() {
        let outer = Division::from_parts(2, vec![vec![0.5]], vec![1, 2]).unwrap();
        let inners = vec![
            Division::from_parts(2, vec![vec![0.25]], vec![1, 2]).unwrap(),
            Division::from_parts(2, vec![vec![0.75]], vec![1, 2]).unwrap(),
        ];
        let plan = allocate_cut_budgets(1, 1, 2, 2, &[3]).unwrap();
        let d = compose(&outer, &inners, &plan).unwrap();
        assert_eq!(d.cuts().cuts(), &[vec![0.25, 0.5, 0.75]]);
        assert_eq!(d.labels(), &[1, 2, 3, 4]);
        let ms = set(vec![GridDensity::uniform(1).unwrap()]);
        assert_eq!(evaluate(&d, &ms).unwrap().norm(), 0.0);
    }

    #[test]
    fn compose_rejects_wrong_shapes() {
        let outer = Division::from_parts(2, vec![vec![0.5]], vec![1, 2]).unwrap();
        let inner = Division::from_parts(2, vec![vec![0.25]], vec![1, 2]).unwrap();
        let plan = allocate_cut_budgets(1, 1, 2, 2, &[3]).unwrap();
        assert!(matches!(compose(&outer, &[inner], &plan), Err(SolveError::ShapeMismatch(_))));
    }

    #[test]
    fn solve_examples() {
        let cfg = SolverConfig::default();
        let u = set(vec![GridDensity::uniform(1).unwrap()]);
        let d = solve(&u, 2, &[1], &cfg).unwrap();
        assert!((d.cuts().cuts()[0][0] - 0.5).abs() < 1e-6);

        let two = set(vec![density(&[0.0, 0.5, 1.0], &[2.0, 0.0]), density(&[0.0, 0.5, 1.0], &[0.0, 2.0])]);
        let d = solve(&two, 2, &[2], &cfg).unwrap();
        assert!(evaluate(&d, &two).unwrap().norm() <= 1e-6);
        assert_eq!(d.cuts().counts(), vec![2]);

        let d = solve(&u, 4, &[3], &cfg).unwrap();
        assert!(evaluate(&d, &u).unwrap().norm() <= 1e-4);
        let mut colors = d.labels().to_vec();
        colors.sort_unstable();
        colors.dedup();
        assert_eq!(colors, vec![1, 2, 3, 4]);
    }

    #[test]
    fn solve_base_examples() {
        let cfg = SolverConfig::default();
        let u2 = set(vec![GridDensity::uniform(2).unwrap()]);
        let d = solve_base(&u2, 2, &[1, 0], &cfg).unwrap();
        assert!((d.cuts().cuts()[0][0] - 0.5).abs() < 1e-6);

        let u = GridDensity::uniform(1).unwrap();
        let ms = set(vec![u.clone(), u]);
        let d = solve_base(&ms, 3, &[4], &cfg).unwrap();
        assert!(evaluate(&d, &ms).unwrap().norm() <= 1e-6);

        for seed in 0..5 {
            let inst = generate_instance(seed, 2, 2, 2, 4);
            let d = solve_base(&inst.measures, 2, &[1, 1], &cfg).unwrap();
            assert!(evaluate(&d, &inst.measures).unwrap().norm() <= 1e-6);
        }
    }

    #[test]
    fn solve_rejects_bad_problems() {
        let cfg = SolverConfig::default();
        let u = set(vec![GridDensity::uniform(1).unwrap()]);
        assert_eq!(solve(&u, 2, &[2], &cfg), Err(SolveError::BudgetMismatch { expected: 1, actual: 2 }));
        assert_eq!(solve(&u, 1, &[0], &cfg), Err(SolveError::TooFewThieves(1)));
        assert!(matches!(solve(&u, 2, &[1, 0], &cfg), Err(SolveError::DimensionMismatch { .. })));
        let bad = SolverConfig { restarts: 0, ..cfg };
        assert!(matches!(solve(&u, 2, &[1], &bad), Err(SolveError::InvalidConfig(_))));
    }

    #[test]
    fn signed_measures_need_signed_mode() {
        let g = density(&[0.0, 0.5, 1.0], &[3.0, -1.0]);
        let ms = set(vec![g]);
        let cfg = SolverConfig::default();
        assert!(matches!(solve(&ms, 2, &[1], &cfg), Err(SolveError::Measure(_))));
        let cfg = SolverConfig { mode: MeasureMode::Signed, ..cfg };
        let d = solve(&ms, 2, &[1], &cfg).unwrap();
        assert!(evaluate(&d, &ms).unwrap().norm() <= 1e-6);
    }

    #[test]
    fn discrete_examples() {
        let s = solve_discrete_1d(&[1, 2, 1, 2], 2).unwrap();
        assert_eq!((s.cuts, s.assignment), (vec![2], vec![1, 2]));
        let s = solve_discrete_1d(&[1, 1, 2, 2], 2).unwrap();
        assert_eq!((s.cuts, s.assignment), (vec![1, 3], vec![1, 2, 1]));
        let s = solve_discrete_1d(&[1, 1], 2).unwrap();
        assert_eq!(s.cuts, vec![1]);
        assert_eq!(
            solve_discrete_1d(&[1, 1, 2], 2),
            Err(SolveError::NotDivisible { color: 2, count: 1, k: 2 })
        );
        let d = solve_discrete_1d(&[1, 1, 2, 2], 2).unwrap().to_division(2).unwrap();
        let ms = crate::measures::bead_necklace_to_measures(&[1, 1, 2, 2], 2).unwrap();
        assert!(evaluate(&d, &ms).unwrap().norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn factor_plans_partition_the_budget(n in 1usize..4, d in 1usize..4, k1 in 2usize..4, k2 in 2usize..4, seed in 0u64..1000) {
            let total = n * (k1 * k2 - 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = vec![0; d];
            for _ in 0..total {
                m[rng.gen_range(0..d)] += 1;
            }
            let plan = allocate_cut_budgets(n, d, k1, k2, &m).unwrap();
            prop_assert_eq!(plan.outer.iter().sum::<usize>(), n * (k1 - 1));
            prop_assert_eq!(plan.inner.len(), k1);
            for inner in &plan.inner {
                prop_assert_eq!(inner.iter().sum::<usize>(), n * (k2 - 1));
            }
            for axis in 0..d {
                let used = plan.outer[axis] + plan.inner.iter().map(|v| v[axis]).sum::<usize>();
                prop_assert_eq!(used, m[axis]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn solving_is_deterministic(seed in 0u64..1000) {
            let inst = generate_instance(seed, 2, 1, 2, 4);
            let cfg = SolverConfig { seed, ..SolverConfig::default() };
            let a = solve(&inst.measures, 2, &[2], &cfg).unwrap();
            let b = solve(&inst.measures, 2, &[2], &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
