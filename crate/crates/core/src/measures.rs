//! Piecewise-constant measures on the unit cube `[0,1]^d`.
//!
//! A [`GridDensity`] is constant on the cells of a per-axis tensor grid. Its
//! cumulative distribution is multilinear inside every cell, so evaluating
//! it reduces to interpolating a prefix-sum table of cell masses at the
//! corners of the cell containing the query point. Box masses then follow by
//! inclusion-exclusion over the `2^d` box corners.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid;

const ZERO_MASS: f64 = 1e-12;

/// Largest supported dimension; box masses cost `2^d` cdf evaluations.
pub const MAX_DIM: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("dimension {0} exceeds the supported maximum of {MAX_DIM}")]
    DimensionTooLarge(usize),
    #[error("axis {axis}: breakpoints must start at 0, end at 1 and strictly increase")]
    InvalidBreakpoints { axis: usize },
    #[error("expected {expected} cell values, got {actual}")]
    ValueCount { expected: usize, actual: usize },
    #[error("cell value {index} is not finite")]
    NonFiniteValue { index: usize },
    #[error("total mass {0:e} is too close to zero to normalize")]
    ZeroTotalMass(f64),
    #[error("cell {index} has negative value {value} in probability mode")]
    NegativeCell { index: usize, value: f64 },
    #[error("coordinate {axis} = {value} lies outside [0, 1]")]
    OutOfRange { axis: usize, value: f64 },
    #[error("point or box has dimension {actual}, density has dimension {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("box interval on axis {axis} is reversed")]
    ReversedInterval { axis: usize },
    #[error("bead color {color} is outside 1..={colors}")]
    UnknownColor { color: usize, colors: usize },
    #[error("color {0} does not occur in the necklace")]
    MissingColor(usize),
    #[error("a measure set needs at least one measure")]
    EmptyMeasureSet,
    #[error("total mass {0} is not 1 in probability mode")]
    NotProbability(f64),
}

/// Whether negative cell values are admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureMode {
    #[default]
    Probability,
    Signed,
}

/// A closed axis-parallel box inside the unit cube. Degenerate boxes are
/// allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn unit(d: usize) -> Self {
        Self { lo: vec![0.0; d], hi: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| a == b)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// Piecewise-constant density over a tensor grid on `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    breakpoints: Vec<Vec<f64>>,
    values: Vec<f64>,
    // Mass of [0, corner] for every grid corner, shape (cells_i + 1).
    prefix: Vec<f64>,
    prefix_strides: Vec<usize>,
}

impl GridDensity {
    /// Builds a density from per-axis breakpoints and row-major cell values.
    /// Signed values are accepted here; [`GridDensity::normalize`] enforces
    /// probability mode.
    pub fn new(breakpoints: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self, MeasureError> {
        if breakpoints.is_empty() {
            return Err(MeasureError::ZeroDimension);
        }
        if breakpoints.len() > MAX_DIM {
            return Err(MeasureError::DimensionTooLarge(breakpoints.len()));
        }
        for (axis, bp) in breakpoints.iter().enumerate() {
            let ok = bp.len() >= 2
                && bp[0] == 0.0
                && bp[bp.len() - 1] == 1.0
                && bp.windows(2).all(|w| w[0] < w[1]);
            if !ok {
                return Err(MeasureError::InvalidBreakpoints { axis });
            }
        }
        let shape: Vec<usize> = breakpoints.iter().map(|b| b.len() - 1).collect();
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(MeasureError::ValueCount { expected, actual: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(MeasureError::NonFiniteValue { index });
        }

        let corner_shape: Vec<usize> = shape.iter().map(|s| s + 1).collect();
        let prefix_strides = grid::strides(&corner_shape);
        let mut prefix = vec![0.0; corner_shape.iter().product()];

        // Cell masses at offset +1 on every axis, then cumulative sums per axis.
        let cell_strides = grid::strides(&shape);
        let mut cell = vec![0; shape.len()];
        let mut shifted = vec![0; shape.len()];
        loop {
            let volume: f64 = cell
                .iter()
                .enumerate()
                .map(|(a, &c)| breakpoints[a][c + 1] - breakpoints[a][c])
                .product();
            for (s, c) in shifted.iter_mut().zip(&cell) {
                *s = c + 1;
            }
            prefix[grid::flat_index(&prefix_strides, &shifted)] =
                values[grid::flat_index(&cell_strides, &cell)] * volume;
            if !grid::advance(&shape, &mut cell) {
                break;
            }
        }
        for axis in 0..shape.len() {
            let stride = prefix_strides[axis];
            let mut idx = vec![0; shape.len()];
            loop {
                if idx[axis] > 0 {
                    let at = grid::flat_index(&prefix_strides, &idx);
                    prefix[at] += prefix[at - stride];
                }
                if !grid::advance(&corner_shape, &mut idx) {
                    break;
                }
            }
        }

        Ok(Self { breakpoints, values, prefix, prefix_strides })
    }

    /// The uniform probability density on the unit cube.
    pub fn uniform(d: usize) -> Result<Self, MeasureError> {
        Self::new(vec![vec![0.0, 1.0]; d], vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn breakpoints(&self) -> &[Vec<f64>] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_shape(&self) -> Vec<usize> {
        self.breakpoints.iter().map(|b| b.len() - 1).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.prefix[self.prefix.len() - 1]
    }

    pub fn has_negative_cell(&self) -> bool {
        self.values.iter().any(|&v| v < 0.0)
    }

    /// Checks the probability-mode invariants: no negative cell and unit
    /// total mass within `tol`.
    pub fn check_probability(&self, tol: f64) -> Result<(), MeasureError> {
        if let Some(index) = self.values.iter().position(|&v| v < 0.0) {
            return Err(MeasureError::NegativeCell { index, value: self.values[index] });
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > tol {
            return Err(MeasureError::NotProbability(total));
        }
        Ok(())
    }

    /// Rescales the values so that the total mass is one.
    pub fn normalize(&self, mode: MeasureMode) -> Result<Self, MeasureError> {
        if mode == MeasureMode::Probability {
            if let Some(index) = self.values.iter().position(|&v| v < 0.0) {
                return Err(MeasureError::NegativeCell { index, value: self.values[index] });
            }
        }
        let total = self.total_mass();
        if total.abs() < ZERO_MASS {
            return Err(MeasureError::ZeroTotalMass(total));
        }
        let values = self.values.iter().map(|v| v / total).collect();
        Self::new(self.breakpoints.clone(), values)
    }

    /// `μ([0,x_1] × … × [0,x_d])`.
    pub fn cdf(&self, point: &[f64]) -> Result<f64, MeasureError> {
        self.check_point(point)?;
        Ok(self.cdf_unchecked(point))
    }

    /// Mass of a closed box, by inclusion-exclusion over its corners.
    pub fn box_mass(&self, b: &AxisBox) -> Result<f64, MeasureError> {
        if b.dim() != self.dim() || b.hi.len() != self.dim() {
            return Err(MeasureError::DimensionMismatch { expected: self.dim(), actual: b.dim() });
        }
        self.check_point(&b.lo)?;
        self.check_point(&b.hi)?;
        if let Some(axis) = (0..self.dim()).find(|&a| b.lo[a] > b.hi[a]) {
            return Err(MeasureError::ReversedInterval { axis });
        }
        Ok(self.box_mass_unchecked(&b.lo, &b.hi))
    }

    pub(crate) fn box_mass_unchecked(&self, lo: &[f64], hi: &[f64]) -> f64 {
        if lo.iter().zip(hi).any(|(a, b)| a == b) {
            return 0.0;
        }
        let d = self.dim();
        let mut corner = vec![0.0; d];
        let mut mass = 0.0;
        for mask in 0..(1usize << d) {
            let mut lower = 0;
            for a in 0..d {
                if mask >> a & 1 == 1 {
                    corner[a] = hi[a];
                } else {
                    corner[a] = lo[a];
                    lower += 1;
                }
            }
            let f = self.cdf_unchecked(&corner);
            if lower % 2 == 0 {
                mass += f;
            } else {
                mass -= f;
            }
        }
        mass
    }

    fn check_point(&self, point: &[f64]) -> Result<(), MeasureError> {
        if point.len() != self.dim() {
            return Err(MeasureError::DimensionMismatch { expected: self.dim(), actual: point.len() });
        }
        for (axis, &value) in point.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(MeasureError::OutOfRange { axis, value });
            }
        }
        Ok(())
    }

    /// Index of the cell containing `x` on `axis`; points on an interior
    /// breakpoint belong to the cell on their right, `x = 1` to the last cell.
    fn locate(&self, axis: usize, x: f64) -> usize {
        let bp = &self.breakpoints[axis];
        bp.partition_point(|&b| b <= x).saturating_sub(1).min(bp.len() - 2)
    }

    pub(crate) fn cdf_unchecked(&self, point: &[f64]) -> f64 {
        self.cdf_impl(point, None)
    }

    /// Cdf together with its one-sided partial derivatives (right derivative
    /// at interior breakpoints, left derivative at `x = 1`).
    pub(crate) fn cdf_with_gradient(&self, point: &[f64], grad: &mut [f64]) -> f64 {
        self.cdf_impl(point, Some(grad))
    }

    fn cdf_impl(&self, point: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let d = self.dim();
        let mut base = 0;
        let mut frac = [0.0f64; MAX_DIM];
        let mut width = [0.0f64; MAX_DIM];
        for a in 0..d {
            let c = self.locate(a, point[a]);
            let bp = &self.breakpoints[a];
            width[a] = bp[c + 1] - bp[c];
            frac[a] = ((point[a] - bp[c]) / width[a]).clamp(0.0, 1.0);
            base += c * self.prefix_strides[a];
        }
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut value = 0.0;
        for mask in 0..(1usize << d) {
            let mut at = base;
            let mut weight = 1.0;
            for a in 0..d {
                if mask >> a & 1 == 1 {
                    at += self.prefix_strides[a];
                    weight *= frac[a];
                } else {
                    weight *= 1.0 - frac[a];
                }
            }
            let p = self.prefix[at];
            value += weight * p;
            if let Some(g) = grad.as_deref_mut() {
                for i in 0..d {
                    let mut w = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                    w /= width[i];
                    for a in (0..d).filter(|&a| a != i) {
                        w *= if mask >> a & 1 == 1 { frac[a] } else { 1.0 - frac[a] };
                    }
                    g[i] += w * p;
                }
            }
        }
        value
    }
}

/// An ordered family of densities on the same cube.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSet {
    dim: usize,
    measures: Vec<GridDensity>,
}

impl MeasureSet {
    pub fn new(measures: Vec<GridDensity>) -> Result<Self, MeasureError> {
        let first = measures.first().ok_or(MeasureError::EmptyMeasureSet)?;
        let dim = first.dim();
        if let Some(m) = measures.iter().find(|m| m.dim() != dim) {
            return Err(MeasureError::DimensionMismatch { expected: dim, actual: m.dim() });
        }
        Ok(Self { dim, measures })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn measures(&self) -> &[GridDensity] {
        &self.measures
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GridDensity> {
        self.measures.iter()
    }

    pub fn check_mode(&self, mode: MeasureMode, tol: f64) -> Result<(), MeasureError> {
        for m in &self.measures {
            match mode {
                MeasureMode::Probability => m.check_probability(tol)?,
                MeasureMode::Signed => {
                    let total = m.total_mass();
                    if (total - 1.0).abs() > tol {
                        return Err(MeasureError::NotProbability(total));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Embeds a discrete necklace (colors `1..=colors`) into `[0,1]`: bead `p`
/// of `T` occupies `[p/T, (p+1)/T]`, and measure `i` is the normalized
/// indicator of the beads of color `i`.
pub fn bead_necklace_to_measures(beads: &[usize], colors: usize) -> Result<MeasureSet, MeasureError> {
    if let Some(&color) = beads.iter().find(|&&c| c == 0 || c > colors) {
        return Err(MeasureError::UnknownColor { color, colors });
    }
    let total = beads.len();
    let breakpoints: Vec<f64> = (0..=total).map(|p| p as f64 / total as f64).collect();
    let mut measures = Vec::with_capacity(colors);
    for color in 1..=colors {
        let count = beads.iter().filter(|&&c| c == color).count();
        if count == 0 {
            return Err(MeasureError::MissingColor(color));
        }
        let height = total as f64 / count as f64;
        let values = beads.iter().map(|&c| if c == color { height } else { 0.0 }).collect();
        measures.push(GridDensity::new(vec![breakpoints.clone()], values)?);
    }
    MeasureSet::new(measures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Independent oracle: sum of value × overlap volume over every cell.
    fn overlap_mass(g: &GridDensity, b: &AxisBox) -> f64 {
        let shape = g.cell_shape();
        let mut cell = vec![0; shape.len()];
        let mut total = 0.0;
        let mut flat = 0;
        loop {
            let mut vol = 1.0;
            for a in 0..shape.len() {
                let bp = &g.breakpoints()[a];
                let lo = bp[cell[a]].max(b.lo[a]);
                let hi = bp[cell[a] + 1].min(b.hi[a]);
                vol *= (hi - lo).max(0.0);
            }
            total += g.values()[flat] * vol;
            flat += 1;
            if !grid::advance(&shape, &mut cell) {
                break;
            }
        }
        total
    }

    #[test]
    fn normalize_examples() {
        let g = GridDensity::new(vec![vec![0.0, 1.0]], vec![2.0]).unwrap();
        assert_eq!(g.normalize(MeasureMode::Probability).unwrap().values(), &[1.0]);

        let g = GridDensity::new(vec![vec![0.0, 0.5, 1.0]], vec![2.0, 2.0]).unwrap();
        assert_eq!(g.normalize(MeasureMode::Probability).unwrap().values(), &[1.0, 1.0]);

        // 4 · ¼ = 1 already
        let half = vec![0.0, 0.5, 1.0];
        let g = GridDensity::new(vec![half.clone(), half], vec![4.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(close(g.total_mass(), 1.0, 1e-15));
        assert_eq!(g.normalize(MeasureMode::Probability).unwrap().values(), &[4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_errors() {
        let g = GridDensity::new(vec![vec![0.0, 0.5, 1.0]], vec![1.0, -1.0]).unwrap();
        assert!(matches!(g.normalize(MeasureMode::Signed), Err(MeasureError::ZeroTotalMass(_))));
        let g = GridDensity::new(vec![vec![0.0, 0.5, 1.0]], vec![3.0, -1.0]).unwrap();
        assert!(matches!(
            g.normalize(MeasureMode::Probability),
            Err(MeasureError::NegativeCell { index: 1, .. })
        ));
        let s = g.normalize(MeasureMode::Signed).unwrap();
        assert_eq!(s.values(), &[3.0, -1.0]);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(GridDensity::new(vec![], vec![1.0]), Err(MeasureError::ZeroDimension));
        assert_eq!(
            GridDensity::new(vec![vec![0.0, 0.5, 0.5, 1.0]], vec![1.0; 3]),
            Err(MeasureError::InvalidBreakpoints { axis: 0 })
        );
        assert_eq!(
            GridDensity::new(vec![vec![0.1, 1.0]], vec![1.0]),
            Err(MeasureError::InvalidBreakpoints { axis: 0 })
        );
        assert_eq!(
            GridDensity::new(vec![vec![0.0, 1.0], vec![0.0, 0.5, 1.0]], vec![1.0]),
            Err(MeasureError::ValueCount { expected: 2, actual: 1 })
        );
    }

    #[test]
    fn cdf_examples() {
        let u1 = GridDensity::uniform(1).unwrap();
        assert!(close(u1.cdf(&[0.3]).unwrap(), 0.3, 1e-15));
        let u2 = GridDensity::uniform(2).unwrap();
        assert!(close(u2.cdf(&[0.5, 0.5]).unwrap(), 0.25, 1e-15));
        let g = GridDensity::new(vec![vec![0.0, 0.5, 1.0]], vec![2.0, 0.0]).unwrap();
        assert!(close(g.cdf(&[0.75]).unwrap(), 1.0, 1e-15));
        assert!(matches!(u1.cdf(&[1.5]), Err(MeasureError::OutOfRange { axis: 0, .. })));
        assert!(matches!(u2.cdf(&[0.5, -0.1]), Err(MeasureError::OutOfRange { axis: 1, .. })));
    }

    #[test]
    fn box_mass_examples() {
        let u2 = GridDensity::uniform(2).unwrap();
        let b = AxisBox::new(vec![0.25, 0.25], vec![0.75, 0.75]);
        assert!(close(u2.box_mass(&b).unwrap(), 0.25, 1e-15));
        let flat = AxisBox::new(vec![0.4, 0.0], vec![0.4, 1.0]);
        assert_eq!(u2.box_mass(&flat).unwrap(), 0.0);
        let g = GridDensity::new(vec![vec![0.0, 0.5, 1.0]], vec![2.0, 0.0]).unwrap();
        let b = AxisBox::new(vec![0.25], vec![0.75]);
        assert!(close(g.box_mass(&b).unwrap(), 0.5, 1e-15));
        let reversed = AxisBox::new(vec![0.75], vec![0.25]);
        assert!(matches!(g.box_mass(&reversed), Err(MeasureError::ReversedInterval { axis: 0 })));
    }

    #[test]
    fn cdf_gradient_matches_slices() {
        let g = GridDensity::new(
            vec![vec![0.0, 0.3, 1.0], vec![0.0, 0.5, 1.0]],
            vec![1.0, 2.0, 0.5, 0.25],
        )
        .unwrap();
        let mut grad = [0.0; 2];
        let x = [0.6, 0.7];
        g.cdf_with_gradient(&x, &mut grad);
        let h = 1e-7;
        for a in 0..2 {
            let mut xp = x;
            xp[a] += h;
            let fd = (g.cdf(&xp).unwrap() - g.cdf(&x).unwrap()) / h;
            assert!(close(fd, grad[a], 1e-6), "axis {a}: {fd} vs {}", grad[a]);
        }
    }

    #[test]
    fn bead_embedding_examples() {
        // AABB
        let set = bead_necklace_to_measures(&[1, 1, 2, 2], 2).unwrap();
        let a = &set.measures()[0];
        assert_eq!(a.breakpoints()[0], vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(a.values(), &[2.0, 2.0, 0.0, 0.0]);
        assert!(close(a.box_mass(&AxisBox::new(vec![0.0], vec![0.5])).unwrap(), 1.0, 1e-15));

        let set = bead_necklace_to_measures(&[1], 1).unwrap();
        assert_eq!(set.measures()[0], GridDensity::uniform(1).unwrap());

        // ABAB
        let set = bead_necklace_to_measures(&[1, 2, 1, 2], 2).unwrap();
        let a = &set.measures()[0];
        assert!(close(a.box_mass(&AxisBox::new(vec![0.0], vec![0.25])).unwrap(), 0.5, 1e-15));

        assert_eq!(
            bead_necklace_to_measures(&[1, 3], 2),
            Err(MeasureError::UnknownColor { color: 3, colors: 2 })
        );
        assert_eq!(bead_necklace_to_measures(&[1, 1], 2), Err(MeasureError::MissingColor(2)));
    }

    #[test]
    fn measure_set_dimension_check() {
        let a = GridDensity::uniform(1).unwrap();
        let b = GridDensity::uniform(2).unwrap();
        assert!(MeasureSet::new(vec![a, b]).is_err());
        assert_eq!(MeasureSet::new(vec![]), Err(MeasureError::EmptyMeasureSet));
    }

    fn density_strategy(signed: bool) -> impl Strategy<Value = GridDensity> {
        (1usize..=3)
            .prop_flat_map(|d| prop::collection::vec(1usize..=6, d))
            .prop_flat_map(move |cells| {
                let axes: Vec<_> = cells
                    .iter()
                    .map(|&c| prop::collection::vec(0.05f64..1.0, c))
                    .collect();
                let total: usize = cells.iter().product();
                let lo = if signed { -1.0 } else { 0.0 };
                (axes, prop::collection::vec(lo..3.0f64, total))
            })
            .prop_map(|(gaps, values)| {
                let bps = gaps
                    .into_iter()
                    .map(|g| {
                        let s: f64 = g.iter().sum();
                        let mut acc = 0.0;
                        let mut bp = vec![0.0];
                        for x in &g[..g.len() - 1] {
                            acc += x / s;
                            bp.push(acc);
                        }
                        bp.push(1.0);
                        bp
                    })
                    .collect();
                GridDensity::new(bps, values).unwrap()
            })
    }

    fn box_in(d: usize) -> impl Strategy<Value = AxisBox> {
        prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), d).prop_map(|iv| {
            let lo = iv.iter().map(|(a, b)| a.min(*b)).collect();
            let hi = iv.iter().map(|(a, b)| a.max(*b)).collect();
            AxisBox::new(lo, hi)
        })
    }

    proptest! {
        #[test]
        fn box_mass_matches_overlap_oracle(
            (g, b) in density_strategy(true).prop_flat_map(|g| { let d = g.dim(); (Just(g), box_in(d)) })
        ) {
            let fast = g.box_mass(&b).unwrap();
            let slow = overlap_mass(&g, &b);
            prop_assert!((fast - slow).abs() <= 1e-9, "{} vs {}", fast, slow);
        }

        #[test]
        fn box_mass_is_additive(
            (g, b, axis, t) in density_strategy(true).prop_flat_map(|g| {
                let d = g.dim();
                (Just(g), box_in(d), 0..d, 0.0f64..=1.0)
            })
        ) {
            let split = b.lo[axis] + t * (b.hi[axis] - b.lo[axis]);
            let mut left = b.clone();
            left.hi[axis] = split;
            let mut right = b.clone();
            right.lo[axis] = split;
            let whole = g.box_mass(&b).unwrap();
            let parts = g.box_mass(&left).unwrap() + g.box_mass(&right).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-10);
        }

        #[test]
        fn full_cube_is_total_mass(g in density_strategy(false)) {
            let d = g.dim();
            let full = g.box_mass(&AxisBox::unit(d)).unwrap();
            prop_assert!((full - g.total_mass()).abs() <= 1e-12);
            if g.total_mass() > 1e-6 {
                let n = g.normalize(MeasureMode::Probability).unwrap();
                prop_assert!((n.box_mass(&AxisBox::unit(d)).unwrap() - 1.0).abs() <= 1e-12);
                prop_assert_eq!(n.breakpoints(), g.breakpoints());
            }
        }

        #[test]
        fn cdf_is_monotone(
            (g, x, axis, dx) in density_strategy(false).prop_flat_map(|g| {
                let d = g.dim();
                (Just(g), prop::collection::vec(0.0f64..=1.0, d), 0..d, 0.0f64..=1.0)
            })
        ) {
            let mut y = x.clone();
            y[axis] = (x[axis] + dx).min(1.0);
            prop_assert!(g.cdf(&y).unwrap() >= g.cdf(&x).unwrap() - 1e-12);
        }
    }
}
