//! Rainbow complexes: copies of a polytope `Q`, one per labeling of its
//! vertices by `1..=k`, glued along faces where the labelings agree.
//!
//! A cell is a pair `(F, h)` of a face of `Q` and a labeling of the vertices
//! of `F`. Cells are numbered face by face in the lattice order, and within
//! a face by the base-`k` code of `h` (first vertex most significant, label
//! 1 as digit 0). On the top face this numbering is the lexicographic order
//! of labelings, which is the shelling order checked by
//! [`lex_shelling_check`].

use std::collections::HashMap;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid;
use crate::polytope::{FaceLattice, PolytopeError};
use crate::solver::is_prime;

pub const DEFAULT_MAX_CELLS: usize = 2_000_000;
/// Largest number of top cells the shelling check enumerates.
pub const SHELLING_LIMIT: usize = 1_000_000;
/// Largest number of top cells for which attachment sets are also built
/// literally as unions over earlier cells.
pub const LITERAL_LIMIT: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RainbowError {
    #[error("complex would have {cells:e} cells, limit is {limit}")]
    TooLarge { cells: f64, limit: usize },
    #[error("need at least two labels, got {0}")]
    TooFewLabels(usize),
    #[error("{0} is not prime")]
    NotPrime(usize),
    #[error("the complex uses {k} labels but the action is by Z_{p}")]
    LabelMismatch { k: usize, p: usize },
    #[error("cell {0} is fixed by the action")]
    FixedCellFound(usize),
    #[error("sphere counts disagree: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RainbowCell {
    pub face: usize,
    /// Labels in `1..=k`, one per vertex of the face in sorted order.
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RainbowComplex {
    k: usize,
    base: FaceLattice,
    /// First cell id of each face, plus the total at the end.
    offsets: Vec<usize>,
    /// For each face and each of its facets, the positions of the facet's
    /// vertices inside the face's vertex list.
    restrictions: Vec<Vec<(usize, Vec<usize>)>>,
}

fn cell_estimate(q: &FaceLattice, k: usize) -> f64 {
    q.faces().iter().map(|f| (k as f64).powi(f.vertices.len() as i32)).sum()
}

impl RainbowComplex {
    pub fn build(base: &FaceLattice, k: usize, max_cells: usize) -> Result<Self, RainbowError> {
        if k < 2 {
            return Err(RainbowError::TooFewLabels(k));
        }
        let estimate = cell_estimate(base, k);
        if estimate > max_cells as f64 {
            return Err(RainbowError::TooLarge { cells: estimate, limit: max_cells });
        }
        let mut offsets = Vec::with_capacity(base.faces().len() + 1);
        let mut total = 0;
        for f in base.faces() {
            offsets.push(total);
            total += k.pow(f.vertices.len() as u32);
        }
        offsets.push(total);
        let restrictions = base
            .faces()
            .iter()
            .map(|f| {
                f.facets
                    .iter()
                    .map(|&g| {
                        let pos = base
                            .face(g)
                            .vertices
                            .iter()
                            .map(|v| f.vertices.binary_search(v).expect("facet vertices lie in the face"))
                            .collect();
                        (g, pos)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { k, base: base.clone(), offsets, restrictions })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn base(&self) -> &FaceLattice {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn cell_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Number of cells in each dimension `0..=d`.
    pub fn cell_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.dim() + 1];
        for (id, f) in self.base.faces().iter().enumerate() {
            counts[f.dim] += self.offsets[id + 1] - self.offsets[id];
        }
        counts
    }

    /// Σ (−1)^i · (number of i-cells).
    pub fn alternating_count(&self) -> BigInt {
        self.cell_counts()
            .iter()
            .enumerate()
            .map(|(i, &c)| if i % 2 == 0 { BigInt::from(c) } else { -BigInt::from(c) })
            .sum()
    }

    /// Ids of the cells of dimension `i`, which are contiguous.
    pub fn cells_in_dim(&self, i: usize) -> std::ops::Range<usize> {
        let faces = self.base.faces();
        let first = faces.iter().position(|f| f.dim == i).unwrap_or(faces.len());
        let end = faces.iter().rposition(|f| f.dim == i).map_or(first, |p| p + 1);
        self.offsets[first]..self.offsets[end]
    }

    pub fn cell_dim(&self, id: usize) -> usize {
        self.base.face(self.face_of(id)).dim
    }

    fn face_of(&self, id: usize) -> usize {
        self.offsets.partition_point(|&o| o <= id) - 1
    }

    fn digits(&self, face: usize, code: usize) -> Vec<usize> {
        let shape = vec![self.k; self.base.face(face).vertices.len()];
        let mut out = vec![0; shape.len()];
        grid::unravel(&shape, code, &mut out);
        out
    }

    fn encode(&self, digits: impl Iterator<Item = usize>) -> usize {
        digits.fold(0, |acc, d| acc * self.k + d)
    }

    pub fn cell(&self, id: usize) -> RainbowCell {
        let face = self.face_of(id);
        let labels = self.digits(face, id - self.offsets[face]).into_iter().map(|d| d + 1).collect();
        RainbowCell { face, labels }
    }

    pub fn cell_id(&self, cell: &RainbowCell) -> Option<usize> {
        let verts = self.base.faces().get(cell.face)?.vertices.len();
        if cell.labels.len() != verts || cell.labels.iter().any(|&l| l == 0 || l > self.k) {
            return None;
        }
        Some(self.offsets[cell.face] + self.encode(cell.labels.iter().map(|l| l - 1)))
    }

    /// Facets of a cell: `(F', h|F')` for every facet `F'` of `F`.
    pub fn facets(&self, id: usize) -> Vec<usize> {
        let face = self.face_of(id);
        let digits = self.digits(face, id - self.offsets[face]);
        self.restrictions[face]
            .iter()
            .map(|(g, pos)| self.offsets[*g] + self.encode(pos.iter().map(|&p| digits[p])))
            .collect()
    }

    /// Every cell lies below some top cell.
    pub fn is_pure(&self) -> bool {
        let mut seen = vec![false; self.cell_count()];
        let top = self.cells_in_dim(self.dim());
        let mut stack: Vec<usize> = top.collect();
        while let Some(c) = stack.pop() {
            if !std::mem::replace(&mut seen[c], true) {
                stack.extend(self.facets(c));
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// χ(Ω(Q;[k])) by summing `(−1)^{dim F} k^{|F|}` over the faces of `Q`.
pub fn euler_direct(q: &FaceLattice, k: usize) -> BigInt {
    q.faces()
        .iter()
        .map(|f| {
            let term = BigInt::from(k).pow(f.vertices.len() as u32);
            if f.dim % 2 == 0 {
                term
            } else {
                -term
            }
        })
        .sum()
}

/// `f_0 k − f_1 k² + … + (−1)^{d−1} f_{d−1} k^d + (−1)^d k^{d+1}` for the
/// f-vector of the proper faces `(f_0, …, f_{d−1})`.
pub fn euler_fvector_formula(fvec: &[usize], k: usize) -> BigInt {
    let d = fvec.len();
    let k = BigInt::from(k);
    let sign = |i: usize| if i % 2 == 0 { BigInt::from(1) } else { BigInt::from(-1) };
    let body: BigInt = fvec.iter().enumerate().map(|(i, &f)| sign(i) * BigInt::from(f) * k.pow(i as u32 + 1)).sum();
    body + sign(d) * k.pow(d as u32 + 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EulerComparison {
    pub k: usize,
    pub f_vector: Vec<usize>,
    pub direct: String,
    /// Only evaluated for simplicial bases.
    pub formula: Option<String>,
    pub simplex: bool,
    pub agree: Option<bool>,
    /// Set when the closed formula disagrees with the direct count.
    pub note: Option<String>,
}

/// The direct Euler characteristic next to the closed formula in the f-vector.
pub fn euler_comparison(q: &FaceLattice, k: usize) -> EulerComparison {
    let f = q.f_vector();
    let d = q.dim();
    let direct = euler_direct(q, k);
    let simplicial = q.is_simplicial();
    let formula = simplicial.then(|| euler_fvector_formula(&f[..d], k));
    let agree = formula.as_ref().map(|v| *v == direct);
    let note = (agree == Some(false)).then(|| {
        "open question: the closed f-vector formula disagrees with the direct cell count; \
         the direct count is authoritative and both values are reported"
            .to_string()
    });
    EulerComparison {
        k,
        f_vector: f.clone(),
        direct: direct.to_string(),
        formula: formula.map(|v| v.to_string()),
        simplex: f[0] == d + 1,
        agree,
        note,
    }
}

/// Rank over GF(2) of a matrix given by columns of row indices.
fn rank_mod2(columns: Vec<Vec<usize>>) -> usize {
    let mut pivots: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut rank = 0;
    for mut col in columns {
        col.sort_unstable();
        // Repeated rows cancel in pairs.
        let mut reduced = Vec::with_capacity(col.len());
        for r in col {
            if reduced.last() == Some(&r) {
                reduced.pop();
            } else {
                reduced.push(r);
            }
        }
        col = reduced;
        while let Some(&low) = col.last() {
            match pivots.get(&low) {
                Some(p) => col = symmetric_difference(&col, p),
                None => {
                    pivots.insert(low, col);
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Reduced GF(2) Betti numbers of a finite regular cell complex given by the
/// dimension and facet list of each cell. Facet indices refer to the same
/// list. An empty complex has all Betti numbers zero here.
pub fn reduced_betti_mod2(dims: &[usize], facets: &[Vec<usize>]) -> Vec<usize> {
    let Some(&top) = dims.iter().max() else { return Vec::new() };
    let mut local = vec![0; dims.len()];
    let mut counts = vec![0; top + 1];
    for (c, &d) in dims.iter().enumerate() {
        local[c] = counts[d];
        counts[d] += 1;
    }
    let mut columns: Vec<Vec<Vec<usize>>> = vec![Vec::new(); top + 1];
    for (c, &d) in dims.iter().enumerate() {
        if d > 0 {
            columns[d].push(facets[c].iter().map(|&f| local[f]).collect());
        }
    }
    let ranks: Vec<usize> = columns.into_iter().map(rank_mod2).collect();
    (0..=top)
        .map(|i| {
            let next = if i < top { ranks[i + 1] } else { 0 };
            let b = counts[i] - ranks[i] - next;
            if i == 0 {
                b - 1
            } else {
                b
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyReport {
    pub cell_counts: Vec<usize>,
    /// Betti numbers over GF(2), degree 0 reduced.
    pub betti: Vec<usize>,
    pub euler: i64,
    pub note: String,
}

pub fn homology_mod2(complex: &RainbowComplex) -> HomologyReport {
    let n = complex.cell_count();
    let dims: Vec<usize> = (0..n).map(|c| complex.cell_dim(c)).collect();
    let facets: Vec<Vec<usize>> = (0..n).map(|c| complex.facets(c)).collect();
    let betti = reduced_betti_mod2(&dims, &facets);
    let euler = betti.iter().enumerate().map(|(i, &b)| if i % 2 == 0 { b as i64 } else { -(b as i64) }).sum::<i64>() + 1;
    HomologyReport {
        cell_counts: complex.cell_counts(),
        betti,
        euler,
        note: "vanishing GF(2) homology is necessary for connectivity; simple connectivity is not certified".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// The constant labeling 1, attached along nothing.
    First,
    /// Attached along a contractible part of its boundary.
    Contractible,
    /// Attached along its whole boundary; contributes a sphere.
    FullBoundary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShellingStep {
    pub labels: Vec<usize>,
    /// Vertices with label other than 1.
    pub support: Vec<usize>,
    /// Smallest face containing the support.
    pub support_face: Option<usize>,
    pub kind: StepKind,
    /// Number of boundary faces in the attachment set.
    pub attachment_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShellingReport {
    pub k: usize,
    pub top_cells: usize,
    pub contractible: usize,
    pub full_boundary: usize,
    pub sphere_count: usize,
    /// Whether attachment sets were also built as literal unions.
    pub literal_checked: bool,
    pub steps: Vec<ShellingStep>,
    pub violations: Vec<String>,
    pub passed: bool,
}

/// Classifies each top cell of Ω(Q;[k]) in lexicographic order and checks
/// every attachment set three ways: as the union of its intersections with
/// earlier cells (small cases only), as the faces missing a support vertex,
/// and as the boundary minus the open star of the support face.
pub fn lex_shelling_check(q: &FaceLattice, k: usize) -> Result<ShellingReport, RainbowError> {
    if k < 2 {
        return Err(RainbowError::TooFewLabels(k));
    }
    let n = q.vertex_count();
    let top_cells = (k as f64).powi(n as i32);
    if top_cells > SHELLING_LIMIT as f64 {
        return Err(RainbowError::TooLarge { cells: top_cells, limit: SHELLING_LIMIT });
    }
    let top_cells = top_cells as usize;
    let literal = top_cells <= LITERAL_LIMIT;
    let faces = q.faces();
    let proper: Vec<usize> = (0..faces.len()).filter(|&f| f != q.top()).collect();
    let labelings: Vec<Vec<usize>> = (0..top_cells)
        .map(|code| {
            let mut digits = vec![0; n];
            grid::unravel(&vec![k; n], code, &mut digits);
            digits
        })
        .collect();

    // Attachment sets depend only on the support; check each support once.
    let mut by_support: HashMap<Vec<usize>, SupportAnalysis> = HashMap::new();
    for digits in &labelings {
        let support: Vec<usize> = (0..n).filter(|&v| digits[v] != 0).collect();
        by_support.entry(support).or_insert((None, Vec::new(), None));
    }
    let supports: Vec<Vec<usize>> = by_support.keys().cloned().collect();
    let analysed: Vec<(Vec<usize>, SupportAnalysis)> = supports
        .into_par_iter()
        .map(|support| {
            let result = analyse_support(q, &proper, &support);
            (support, result)
        })
        .collect();
    by_support.extend(analysed);

    let steps_and_problems: Vec<(ShellingStep, Vec<String>)> = labelings
        .par_iter()
        .enumerate()
        .map(|(code, digits)| {
            let mut problems = Vec::new();
            let support: Vec<usize> = (0..n).filter(|&v| digits[v] != 0).collect();
            let (support_face, rule, problem) = &by_support[&support];
            problems.extend(problem.iter().cloned());
            if literal {
                let union = literal_attachment(&labelings, code, digits, q, &proper);
                if &union != rule {
                    problems.push(format!("labeling {code}: literal attachment set differs from the support rule"));
                }
            }
            let kind = match support_face {
                None => StepKind::First,
                Some(f) if *f == q.top() => StepKind::FullBoundary,
                Some(_) => StepKind::Contractible,
            };
            let step = ShellingStep {
                labels: digits.iter().map(|d| d + 1).collect(),
                support,
                support_face: *support_face,
                kind,
                attachment_size: rule.iter().filter(|&&b| b).count(),
            };
            (step, problems)
        })
        .collect();

    let mut violations = Vec::new();
    let mut steps = Vec::with_capacity(top_cells);
    for (step, problems) in steps_and_problems {
        violations.extend(problems);
        steps.push(step);
    }
    if steps.iter().filter(|s| s.kind == StepKind::First).count() != 1 || steps[0].kind != StepKind::First {
        violations.push("the constant labeling must be the unique first cell".into());
    }
    let contractible = steps.iter().filter(|s| s.kind == StepKind::Contractible).count();
    let full_boundary = steps.iter().filter(|s| s.kind == StepKind::FullBoundary).count();
    Ok(ShellingReport {
        k,
        top_cells,
        contractible,
        full_boundary,
        sphere_count: full_boundary,
        literal_checked: literal,
        passed: violations.is_empty(),
        steps,
        violations,
    })
}

/// Support face, attachment set (indexed by face id) and any inconsistency
/// for one support set.
type SupportAnalysis = (Option<usize>, Vec<bool>, Option<String>);

fn analyse_support(q: &FaceLattice, proper: &[usize], support: &[usize]) -> SupportAnalysis {
    let faces = q.faces();
    let mut rule = vec![false; faces.len()];
    if support.is_empty() {
        return (None, rule, None);
    }
    let sf = q.minimal_face_containing(support);
    let mut star_complement = vec![false; faces.len()];
    for &f in proper {
        rule[f] = !support.iter().all(|v| faces[f].vertices.binary_search(v).is_ok());
        star_complement[f] = !q.contains(f, sf);
    }
    let mut problems = Vec::new();
    if rule != star_complement {
        problems.push(format!("support {support:?}: attachment set is not the boundary minus the open star"));
    }
    let members: Vec<usize> = (0..faces.len()).filter(|&f| rule[f]).collect();
    if sf == q.top() {
        if members.len() != proper.len() {
            problems.push(format!("support {support:?}: full-boundary step attaches along a proper subset"));
        }
    } else {
        let mut local = vec![usize::MAX; faces.len()];
        for (i, &f) in members.iter().enumerate() {
            local[f] = i;
        }
        let dims: Vec<usize> = members.iter().map(|&f| faces[f].dim).collect();
        let facets: Vec<Vec<usize>> = members.iter().map(|&f| faces[f].facets.iter().map(|&g| local[g]).collect()).collect();
        let betti = reduced_betti_mod2(&dims, &facets);
        if members.is_empty() || betti.iter().any(|&b| b != 0) {
            problems.push(format!("support {support:?}: attachment set is not connected and acyclic (betti {betti:?})"));
        }
    }
    let problem = (!problems.is_empty()).then(|| problems.join("; "));
    (Some(sf), rule, problem)
}

/// Proper faces `F` such that `(F, g|F)` lies in an earlier top cell.
fn literal_attachment(labelings: &[Vec<usize>], code: usize, g: &[usize], q: &FaceLattice, proper: &[usize]) -> Vec<bool> {
    let mut hit = vec![false; q.faces().len()];
    for f in &labelings[..code] {
        for &face in proper {
            if !hit[face] && q.face(face).vertices.iter().all(|&v| f[v] == g[v]) {
                hit[face] = true;
            }
        }
    }
    hit
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereCrosscheck {
    pub sphere_count: usize,
    pub top_betti: usize,
    pub euler_prediction: String,
    pub lower_betti_vanish: bool,
}

/// Sphere count from the shelling against the top Betti number and
/// `(−1)^d (χ − 1)`.
pub fn sphere_count_crosscheck(q: &FaceLattice, k: usize) -> Result<SphereCrosscheck, RainbowError> {
    let complex = RainbowComplex::build(q, k, DEFAULT_MAX_CELLS)?;
    let homology = homology_mod2(&complex);
    let shelling = lex_shelling_check(q, k)?;
    let d = q.dim();
    let chi = euler_direct(q, k);
    let prediction: BigInt = if d % 2 == 0 { chi - 1 } else { 1 - chi };
    let top_betti = homology.betti[d];
    let lower_betti_vanish = homology.betti[..d].iter().all(|&b| b == 0);
    let report = SphereCrosscheck {
        sphere_count: shelling.sphere_count,
        top_betti,
        euler_prediction: prediction.to_string(),
        lower_betti_vanish,
    };
    if !shelling.passed {
        return Err(RainbowError::Mismatch(shelling.violations.join("; ")));
    }
    if BigInt::from(shelling.sphere_count) != prediction || shelling.sphere_count != top_betti || !lower_betti_vanish {
        return Err(RainbowError::Mismatch(format!(
            "spheres {} vs top Betti {} vs Euler {}; lower Betti {:?}",
            shelling.sphere_count,
            top_betti,
            report.euler_prediction,
            &homology.betti[..d]
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionReport {
    pub p: usize,
    pub cells: usize,
    pub orbits: usize,
    pub free: bool,
    pub facets_preserved: bool,
}

/// Checks that shifting every label by one (mod p) is a free cellular
/// action on Ω(Q;[p]).
pub fn zp_action_check(complex: &RainbowComplex, p: usize) -> Result<ActionReport, RainbowError> {
    if !is_prime(p) {
        return Err(RainbowError::NotPrime(p));
    }
    if complex.k() != p {
        return Err(RainbowError::LabelMismatch { k: complex.k(), p });
    }
    let shift = |id: usize| {
        let mut cell = complex.cell(id);
        for l in &mut cell.labels {
            *l = *l % p + 1;
        }
        complex.cell_id(&cell).expect("shifted labels stay in range")
    };
    let n = complex.cell_count();
    let mut facets_preserved = true;
    for id in 0..n {
        let image = shift(id);
        if image == id {
            return Err(RainbowError::FixedCellFound(id));
        }
        let mut moved: Vec<usize> = complex.facets(id).into_iter().map(shift).collect();
        let mut target = complex.facets(image);
        moved.sort_unstable();
        target.sort_unstable();
        facets_preserved &= moved == target;
    }
    let mut seen = vec![false; n];
    let mut orbits = 0;
    for id in 0..n {
        if seen[id] {
            continue;
        }
        orbits += 1;
        let mut c = id;
        let mut length = 0;
        while !seen[c] {
            seen[c] = true;
            c = shift(c);
            length += 1;
        }
        if length != p {
            return Err(RainbowError::FixedCellFound(id));
        }
    }
    Ok(ActionReport { p, cells: n, orbits, free: orbits * p == n, facets_preserved })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub m: Vec<usize>,
    pub k: usize,
    pub dim: usize,
    pub pure: bool,
    pub betti: Vec<usize>,
    /// Reduced Betti numbers vanish below the top dimension.
    pub acyclic_below_top: bool,
    pub top_betti: usize,
}

/// Homological connectivity of Ω over `Δ_{m_1} × … × Δ_{m_d}`.
pub fn connectivity_report(m: &[usize], k: usize) -> Result<ConnectivityReport, RainbowError> {
    let q = FaceLattice::product_of_simplices(m)?;
    let complex = RainbowComplex::build(&q, k, DEFAULT_MAX_CELLS)?;
    let homology = homology_mod2(&complex);
    let dim = m.iter().sum::<usize>();
    Ok(ConnectivityReport {
        m: m.to_vec(),
        k,
        dim: complex.dim(),
        pure: complex.is_pure() && complex.dim() == dim,
        acyclic_below_top: homology.betti[..dim].iter().all(|&b| b == 0),
        top_betti: homology.betti[dim],
        betti: homology.betti,
    })
}
