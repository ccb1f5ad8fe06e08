//! Divisions of the cube by axis-parallel cuts, their labelings, and the
//! residual matrix that measures how far a division is from fair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid;
use crate::measures::{AxisBox, MeasureError, MeasureSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivisionError {
    #[error("axis {axis}: cut positions must be sorted values in [0, 1]")]
    InvalidCuts { axis: usize },
    #[error("box index {index:?} is outside the grid of shape {shape:?}")]
    IndexOutOfRange { index: Vec<usize>, shape: Vec<usize> },
    #[error("label {label} at position {position} is outside 1..={k}")]
    InvalidLabel { position: usize, label: usize, k: usize },
    #[error("need at least two colors, got {0}")]
    TooFewColors(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sign representation needs exactly two colors, got {0}")]
    NotTwoColors(usize),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Per-axis sorted cut positions. Repeated positions are legal and produce
/// degenerate boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutConfiguration {
    cuts: Vec<Vec<f64>>,
}

impl CutConfiguration {
    pub fn new(cuts: Vec<Vec<f64>>) -> Result<Self, DivisionError> {
        for (axis, c) in cuts.iter().enumerate() {
            let ok = c.iter().all(|x| (0.0..=1.0).contains(x)) && c.windows(2).all(|w| w[0] <= w[1]);
            if !ok {
                return Err(DivisionError::InvalidCuts { axis });
            }
        }
        Ok(Self { cuts })
    }

    pub fn dim(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self) -> &[Vec<f64>] {
        &self.cuts
    }

    /// `m_i` for every axis.
    pub fn counts(&self) -> Vec<usize> {
        self.cuts.iter().map(Vec::len).collect()
    }

    /// `m_i + 1` elementary intervals per axis.
    pub fn shape(&self) -> Vec<usize> {
        self.cuts.iter().map(|c| c.len() + 1).collect()
    }

    pub fn box_count(&self) -> usize {
        self.shape().iter().product()
    }

    /// `x^i_p` with the conventions `x^i_0 = 0` and `x^i_{m_i+1} = 1`.
    pub fn position(&self, axis: usize, p: usize) -> f64 {
        let c = &self.cuts[axis];
        if p == 0 {
            0.0
        } else if p > c.len() {
            1.0
        } else {
            c[p - 1]
        }
    }

    /// The box `[x^1_{j_1}, x^1_{j_1+1}] × … × [x^d_{j_d}, x^d_{j_d+1}]`.
    pub fn elementary_box(&self, index: &[usize]) -> Result<AxisBox, DivisionError> {
        let shape = self.shape();
        if index.len() != shape.len() || index.iter().zip(&shape).any(|(j, s)| j >= s) {
            return Err(DivisionError::IndexOutOfRange { index: index.to_vec(), shape });
        }
        let lo = index.iter().enumerate().map(|(a, &j)| self.position(a, j)).collect();
        let hi = index.iter().enumerate().map(|(a, &j)| self.position(a, j + 1)).collect();
        Ok(AxisBox::new(lo, hi))
    }
}

/// Colors `1..=k` over the elementary boxes, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    k: usize,
    labels: Vec<usize>,
}

impl Labeling {
    pub fn new(k: usize, labels: Vec<usize>) -> Result<Self, DivisionError> {
        if k < 2 {
            return Err(DivisionError::TooFewColors(k));
        }
        if let Some(position) = labels.iter().position(|&l| l == 0 || l > k) {
            return Err(DivisionError::InvalidLabel { position, label: labels[position], k });
        }
        Ok(Self { k, labels })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// A cut configuration together with a labeling of its boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Division {
    cuts: CutConfiguration,
    labeling: Labeling,
}

impl Division {
    pub fn new(cuts: CutConfiguration, labeling: Labeling) -> Result<Self, DivisionError> {
        if labeling.labels.len() != cuts.box_count() {
            return Err(DivisionError::ShapeMismatch(format!(
                "{} labels for a grid of {} boxes",
                labeling.labels.len(),
                cuts.box_count()
            )));
        }
        Ok(Self { cuts, labeling })
    }

    /// Convenience constructor from raw parts.
    pub fn from_parts(k: usize, cuts: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self, DivisionError> {
        Self::new(CutConfiguration::new(cuts)?, Labeling::new(k, labels)?)
    }

    pub fn k(&self) -> usize {
        self.labeling.k
    }

    pub fn cuts(&self) -> &CutConfiguration {
        &self.cuts
    }

    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }

    pub fn labels(&self) -> &[usize] {
        &self.labeling.labels
    }

    /// Mass of every box under every measure, `[measure][box]`.
    pub fn box_masses(&self, measures: &MeasureSet) -> Result<Vec<Vec<f64>>, DivisionError> {
        if measures.dim() != self.cuts.dim() {
            return Err(DivisionError::ShapeMismatch(format!(
                "division has dimension {}, measures have dimension {}",
                self.cuts.dim(),
                measures.dim()
            )));
        }
        let shape = self.cuts.shape();
        let mut out = vec![Vec::with_capacity(self.cuts.box_count()); measures.len()];
        let mut index = vec![0; shape.len()];
        loop {
            let b = self.cuts.elementary_box(&index)?;
            for (row, m) in out.iter_mut().zip(measures.iter()) {
                row.push(m.box_mass(&b)?);
            }
            if !grid::advance(&shape, &mut index) {
                break;
            }
        }
        Ok(out)
    }
}

/// `M[j][c] = μ_j(A_c) − 1/k`, one row per measure and one column per color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualMatrix {
    k: usize,
    rows: Vec<Vec<f64>>,
}

impl ResidualMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let k = rows.first().map_or(0, Vec::len);
        Self { k, rows }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, measure: usize, color: usize) -> f64 {
        self.rows[measure][color]
    }

    /// Max-abs entry.
    pub fn norm(&self) -> f64 {
        residual_norm(self)
    }

    /// `μ_j(A_c)` recovered from the residual.
    pub fn masses(&self) -> Vec<Vec<f64>> {
        let share = 1.0 / self.k as f64;
        self.rows.iter().map(|r| r.iter().map(|v| v + share).collect()).collect()
    }
}

pub fn evaluate(division: &Division, measures: &MeasureSet) -> Result<ResidualMatrix, DivisionError> {
    let masses = division.box_masses(measures)?;
    let k = division.k();
    let share = 1.0 / k as f64;
    let rows = masses
        .iter()
        .map(|row| {
            let mut sums = vec![0.0; k];
            for (m, &label) in row.iter().zip(division.labels()) {
                sums[label - 1] += m;
            }
            sums.iter().map(|s| s - share).collect()
        })
        .collect();
    Ok(ResidualMatrix { k, rows })
}

pub fn residual_norm(m: &ResidualMatrix) -> f64 {
    m.rows.iter().flatten().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// One (measure, color) share that misses `1/k` by more than the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub measure: usize,
    pub color: usize,
    pub mass: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub k: usize,
    pub cut_counts: Vec<usize>,
    pub expected_counts: Vec<usize>,
    pub counts_match: bool,
    pub residual_norm: f64,
    pub tolerance: f64,
    pub fair: bool,
    pub passed: bool,
    /// `masses[j][c] = μ_j(A_{c+1})`.
    pub masses: Vec<Vec<f64>>,
    pub deviations: Vec<Deviation>,
    pub problems: Vec<String>,
}

/// Checks a division against the measures. Problems are reported, never
/// raised.
pub fn verify(division: &Division, measures: &MeasureSet, tol: f64, expected_m: &[usize]) -> VerificationReport {
    let cut_counts = division.cuts().counts();
    let counts_match = cut_counts == expected_m;
    let mut problems = Vec::new();
    if !counts_match {
        problems.push(format!("cut-count mismatch: expected {expected_m:?}, got {cut_counts:?}"));
    }
    let (residual, masses, deviations) = match evaluate(division, measures) {
        Ok(m) => {
            let deviations = m
                .rows()
                .iter()
                .enumerate()
                .flat_map(|(j, row)| {
                    row.iter().enumerate().filter(|(_, v)| v.abs() > tol).map(move |(c, &v)| Deviation {
                        measure: j + 1,
                        color: c + 1,
                        mass: v + 1.0 / division.k() as f64,
                        deviation: v,
                    })
                })
                .collect();
            (m.norm(), m.masses(), deviations)
        }
        Err(e) => {
            problems.push(e.to_string());
            (f64::INFINITY, Vec::new(), Vec::new())
        }
    };
    let fair = residual <= tol;
    if !fair && residual.is_finite() {
        problems.push(format!("residual {residual:e} exceeds tolerance {tol:e}"));
    }
    VerificationReport {
        k: division.k(),
        cut_counts,
        expected_counts: expected_m.to_vec(),
        counts_match,
        residual_norm: residual,
        tolerance: tol,
        fair,
        passed: fair && counts_match,
        masses,
        deviations,
        problems,
    }
}

/// Two-thief divisions as signs: color 1 is `+1`, color 2 is `−1`.
pub fn sign_representation(division: &Division) -> Result<Vec<i8>, DivisionError> {
    if division.k() != 2 {
        return Err(DivisionError::NotTwoColors(division.k()));
    }
    Ok(division.labels().iter().map(|&l| if l == 1 { 1 } else { -1 }).collect())
}
