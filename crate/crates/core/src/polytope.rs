//! Convex polytopes as purely combinatorial face lattices.
//!
//! Faces are identified by their vertex sets. The empty face is implicit; the
//! polytope itself is the unique top face. Faces are stored sorted by
//! dimension and then by vertex set, so faces of equal dimension are
//! contiguous. The vertex order fixed at construction is the order used for
//! lexicographic shelling of rainbow complexes.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse polytope spec '{0}'")]
    BadSpec(String),
    #[error("malformed face list: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Face {
    pub dim: usize,
    pub vertices: Vec<usize>,
    /// Ids of the codimension-one subfaces.
    pub facets: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct FaceLattice {
    vertex_count: usize,
    faces: Vec<Face>,
    top: usize,
    index: HashMap<Vec<usize>, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub f_vector: Vec<usize>,
    pub violations: Vec<String>,
}

impl FaceLattice {
    /// Builds a lattice from `(dimension, vertex set)` pairs. Facets are the
    /// contained faces of one dimension less.
    pub fn from_faces(vertex_count: usize, faces: Vec<(usize, Vec<usize>)>) -> Result<Self, PolytopeError> {
        let mut faces: Vec<(usize, Vec<usize>)> = faces
            .into_iter()
            .map(|(d, mut v)| {
                v.sort_unstable();
                v.dedup();
                (d, v)
            })
            .collect();
        faces.sort();
        faces.dedup();
        if faces.iter().any(|(_, v)| v.is_empty() || v.iter().any(|&x| x >= vertex_count)) {
            return Err(PolytopeError::Malformed("face with no vertices or an unknown vertex".into()));
        }
        let mut index = HashMap::with_capacity(faces.len());
        for (id, (_, v)) in faces.iter().enumerate() {
            if index.insert(v.clone(), id).is_some() {
                return Err(PolytopeError::Malformed(format!("vertex set {v:?} listed with two dimensions")));
            }
        }
        let max_dim = faces.iter().map(|f| f.0).max().unwrap_or(0);
        let tops: Vec<usize> = (0..faces.len())
            .filter(|&i| faces[i].0 == max_dim && faces[i].1.len() == vertex_count)
            .collect();
        if tops.len() != 1 {
            return Err(PolytopeError::Malformed("no unique top face containing every vertex".into()));
        }
        let sets: Vec<HashSet<usize>> = faces.iter().map(|f| f.1.iter().copied().collect()).collect();
        let built: Vec<Face> = faces
            .iter()
            .enumerate()
            .map(|(i, (dim, vertices))| {
                let facets = (0..faces.len())
                    .filter(|&j| {
                        j != i && faces[j].0 + 1 == *dim && faces[j].1.iter().all(|v| sets[i].contains(v))
                    })
                    .collect();
                Face { dim: *dim, vertices: vertices.clone(), facets }
            })
            .collect();
        Ok(Self { vertex_count, faces: built, top: tops[0], index })
    }

    /// Like [`FaceLattice::from_faces`], inferring each dimension as one more
    /// than the largest dimension of a proper subface (vertices have
    /// dimension 0).
    pub fn from_vertex_sets(vertex_count: usize, sets: Vec<Vec<usize>>) -> Result<Self, PolytopeError> {
        let mut sets: Vec<Vec<usize>> = sets
            .into_iter()
            .map(|mut v| {
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        sets.sort_by_key(|s| (s.len(), s.clone()));
        sets.dedup();
        let mut dims: Vec<usize> = Vec::with_capacity(sets.len());
        for i in 0..sets.len() {
            let sub = (0..i)
                .filter(|&j| sets[j].len() < sets[i].len() && sets[j].iter().all(|v| sets[i].binary_search(v).is_ok()))
                .map(|j| dims[j] + 1)
                .max()
                .unwrap_or(0);
            dims.push(sub);
        }
        Self::from_faces(vertex_count, dims.into_iter().zip(sets).collect())
    }

    /// The ν-simplex; `simplex(0)` is a point.
    pub fn simplex(nu: usize) -> Result<Self, PolytopeError> {
        if nu > 16 {
            return Err(PolytopeError::InvalidParameter(format!("simplex dimension {nu} is too large")));
        }
        let n = nu + 1;
        let faces = (1usize..1 << n)
            .map(|mask| {
                let v: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                (v.len() - 1, v)
            })
            .collect();
        Self::from_faces(n, faces)
    }

    /// The d-cube; vertex `i` has coordinates given by the binary digits of
    /// `i`, first axis most significant.
    pub fn cube(d: usize) -> Result<Self, PolytopeError> {
        if d == 0 || d > 8 {
            return Err(PolytopeError::InvalidParameter(format!("cube dimension must be in 1..=8, got {d}")));
        }
        let mut faces = Vec::new();
        // Each face is a word over {0, 1, *}.
        for word in 0..3usize.pow(d as u32) {
            let digits: Vec<usize> = (0..d).map(|i| word / 3usize.pow((d - 1 - i) as u32) % 3).collect();
            let free: Vec<usize> = (0..d).filter(|&i| digits[i] == 2).collect();
            let vertices = (0..1usize << free.len())
                .map(|sub| {
                    (0..d).fold(0, |acc, i| {
                        let bit = if digits[i] == 2 {
                            let pos = free.iter().position(|&f| f == i).unwrap();
                            sub >> (free.len() - 1 - pos) & 1
                        } else {
                            digits[i]
                        };
                        acc << 1 | bit
                    })
                })
                .collect();
            faces.push((free.len(), vertices));
        }
        Self::from_faces(1 << d, faces)
    }

    /// The d-dimensional crosspolytope; vertex `2i` is `+e_i`, `2i+1` is `−e_i`.
    pub fn crosspolytope(d: usize) -> Result<Self, PolytopeError> {
        if d == 0 || d > 8 {
            return Err(PolytopeError::InvalidParameter(format!("crosspolytope dimension must be in 1..=8, got {d}")));
        }
        let mut faces = Vec::new();
        // Each axis contributes nothing, +e_i or −e_i.
        for word in 1..3usize.pow(d as u32) {
            let v: Vec<usize> = (0..d)
                .filter_map(|i| match word / 3usize.pow(i as u32) % 3 {
                    1 => Some(2 * i),
                    2 => Some(2 * i + 1),
                    _ => None,
                })
                .collect();
            faces.push((v.len() - 1, v));
        }
        faces.push((d, (0..2 * d).collect()));
        Self::from_faces(2 * d, faces)
    }

    pub fn polygon(g: usize) -> Result<Self, PolytopeError> {
        if g < 3 {
            return Err(PolytopeError::InvalidParameter(format!("a polygon needs at least 3 vertices, got {g}")));
        }
        let mut faces: Vec<(usize, Vec<usize>)> = (0..g).map(|i| (0, vec![i])).collect();
        faces.extend((0..g).map(|i| (1, vec![i, (i + 1) % g])));
        faces.push((2, (0..g).collect()));
        Self::from_faces(g, faces)
    }

    /// Cartesian product. Vertex `(a, b)` gets index `a·|V'| + b`, and the
    /// faces are the products of a face of each factor.
    pub fn product(&self, other: &FaceLattice) -> FaceLattice {
        let width = other.vertex_count;
        let mut faces = Vec::with_capacity(self.faces.len() * other.faces.len());
        for f in &self.faces {
            for g in &other.faces {
                let vertices = f.vertices.iter().flat_map(|a| g.vertices.iter().map(move |b| a * width + b)).collect();
                faces.push((f.dim + g.dim, vertices));
            }
        }
        Self::from_faces(self.vertex_count * width, faces).expect("products of polytopes are polytopes")
    }

    /// `Δ_{m_1} × … × Δ_{m_d}`.
    pub fn product_of_simplices(m: &[usize]) -> Result<Self, PolytopeError> {
        let (first, rest) = m
            .split_first()
            .ok_or_else(|| PolytopeError::InvalidParameter("empty list of simplex dimensions".into()))?;
        rest.iter().try_fold(Self::simplex(*first)?, |acc, &nu| Ok(acc.product(&Self::simplex(nu)?)))
    }

    /// Parses `simplex:2`, `cube:3`, `xpoly:2`, `polygon:5`, `point`,
    /// `square` or `prod:A,B,...` with nested specs.
    pub fn parse(spec: &str) -> Result<Self, PolytopeError> {
        let bad = || PolytopeError::BadSpec(spec.to_string());
        let spec = spec.trim();
        if let Some(rest) = spec.strip_prefix("prod:") {
            let parts = rest.split(',').map(Self::parse).collect::<Result<Vec<_>, _>>()?;
            let (first, others) = parts.split_first().ok_or_else(bad)?;
            return Ok(others.iter().fold(first.clone(), |acc, p| acc.product(p)));
        }
        match spec {
            "point" => return Self::simplex(0),
            "square" => return Self::polygon(4),
            _ => {}
        }
        let (kind, arg) = spec.split_once(':').ok_or_else(bad)?;
        let arg: usize = arg.trim().parse().map_err(|_| bad())?;
        match kind.trim() {
            "simplex" => Self::simplex(arg),
            "cube" => Self::cube(arg),
            "xpoly" => Self::crosspolytope(arg),
            "polygon" => Self::polygon(arg),
            _ => Err(bad()),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn dim(&self) -> usize {
        self.faces[self.top].dim
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, id: usize) -> &Face {
        &self.faces[id]
    }

    pub fn top(&self) -> usize {
        self.top
    }

    pub fn face_id(&self, vertices: &[usize]) -> Option<usize> {
        self.index.get(vertices).copied()
    }

    /// `(f_0, …, f_d)`.
    pub fn f_vector(&self) -> Vec<usize> {
        let mut f = vec![0; self.dim() + 1];
        for face in &self.faces {
            f[face.dim] += 1;
        }
        f
    }

    /// Every proper face is a simplex.
    pub fn is_simplicial(&self) -> bool {
        self.faces
            .iter()
            .enumerate()
            .all(|(id, f)| id == self.top || f.vertices.len() == f.dim + 1)
    }

    /// `F ⊆ G` as vertex sets.
    pub fn contains(&self, outer: usize, inner: usize) -> bool {
        let big = &self.faces[outer].vertices;
        self.faces[inner].vertices.iter().all(|v| big.binary_search(v).is_ok())
    }

    /// Smallest face whose vertex set contains `vertices`.
    pub fn minimal_face_containing(&self, vertices: &[usize]) -> usize {
        (0..self.faces.len())
            .filter(|&id| vertices.iter().all(|v| self.faces[id].vertices.binary_search(v).is_ok()))
            .min_by_key(|&id| (self.faces[id].dim, id))
            .unwrap_or(self.top)
    }

    /// Checks the face-lattice axioms and reports every violation.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let d = self.dim();
        let f = self.f_vector();

        let tops: Vec<usize> = (0..self.faces.len())
            .filter(|&i| self.faces[i].dim == d && self.faces[i].vertices.len() == self.vertex_count)
            .collect();
        if tops.len() != 1 || f[d] != 1 {
            violations.push(format!("expected one top face of dimension {d}, found {}", f[d]));
        }
        for v in 0..self.vertex_count {
            match self.face_id(&[v]) {
                Some(id) if self.faces[id].dim == 0 => {}
                _ => violations.push(format!("vertex {v} is not a 0-face")),
            }
        }
        for face in &self.faces {
            if face.dim > 0 {
                let rank = face.facets.iter().map(|&g| self.faces[g].dim + 1).max().unwrap_or(0);
                if rank != face.dim {
                    violations.push(format!("face {:?} has dimension {} but rank {rank}", face.vertices, face.dim));
                }
            }
            if face.dim == 1 && face.vertices.len() != 2 {
                violations.push(format!("edge {:?} does not have exactly two vertices", face.vertices));
            }
        }
        // Meets: intersections of faces are faces.
        for a in 0..self.faces.len() {
            for b in a + 1..self.faces.len() {
                let common: Vec<usize> = self.faces[a]
                    .vertices
                    .iter()
                    .filter(|v| self.faces[b].vertices.binary_search(v).is_ok())
                    .copied()
                    .collect();
                if !common.is_empty() && self.face_id(&common).is_none() {
                    violations.push(format!(
                        "faces {:?} and {:?} meet in {common:?}, which is not a face",
                        self.faces[a].vertices, self.faces[b].vertices
                    ));
                }
            }
        }
        // Diamond property on intervals of length two.
        for (g, big) in self.faces.iter().enumerate() {
            if big.dim < 2 {
                continue;
            }
            for (h, small) in self.faces.iter().enumerate() {
                if small.dim + 2 != big.dim || !self.contains(g, h) {
                    continue;
                }
                let between = big.facets.iter().filter(|&&m| self.contains(m, h)).count();
                if between != 2 {
                    violations.push(format!(
                        "interval [{:?}, {:?}] has {between} intermediate faces",
                        small.vertices, big.vertices
                    ));
                }
            }
        }
        let boundary: i64 = f[..d].iter().enumerate().map(|(i, &c)| if i % 2 == 0 { c as i64 } else { -(c as i64) }).sum();
        let expected = 1 - if d % 2 == 0 { 1 } else { -1 };
        if boundary != expected {
            violations.push(format!("Euler relation fails: boundary sum {boundary}, expected {expected}"));
        }
        ValidationReport { passed: violations.is_empty(), f_vector: f, violations }
    }

    /// Brute-force lattice isomorphism over vertex bijections; `None` when
    /// there are too many vertices to try.
    pub fn is_isomorphic(&self, other: &FaceLattice) -> Option<bool> {
        if self.vertex_count != other.vertex_count || self.f_vector() != other.f_vector() {
            return Some(false);
        }
        if self.vertex_count > 10 {
            return None;
        }
        let targets: HashSet<Vec<usize>> = other.faces.iter().map(|f| f.vertices.clone()).collect();
        let n = self.vertex_count;
        let mut map = vec![usize::MAX; n];
        let mut used = vec![false; n];
        fn extend(
            lattice: &FaceLattice,
            targets: &HashSet<Vec<usize>>,
            map: &mut Vec<usize>,
            used: &mut Vec<bool>,
            next: usize,
        ) -> bool {
            if next == map.len() {
                return lattice.faces.iter().all(|f| {
                    let mut image: Vec<usize> = f.vertices.iter().map(|&v| map[v]).collect();
                    image.sort_unstable();
                    targets.contains(&image)
                });
            }
            for t in 0..map.len() {
                if !used[t] {
                    used[t] = true;
                    map[next] = t;
                    if extend(lattice, targets, map, used, next + 1) {
                        return true;
                    }
                    used[t] = false;
                }
            }
            false
        }
        Some(extend(self, &targets, &mut map, &mut used, 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_f_vectors() {
        assert_eq!(FaceLattice::cube(3).unwrap().f_vector(), vec![8, 12, 6, 1]);
        assert_eq!(FaceLattice::simplex(2).unwrap().f_vector(), vec![3, 3, 1]);
        assert_eq!(FaceLattice::simplex(0).unwrap().f_vector(), vec![1]);
        assert_eq!(FaceLattice::crosspolytope(3).unwrap().f_vector(), vec![6, 12, 8, 1]);
        assert_eq!(FaceLattice::polygon(5).unwrap().f_vector(), vec![5, 5, 1]);
        assert_eq!(FaceLattice::cube(1).unwrap().f_vector(), vec![2, 1]);
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(FaceLattice::cube(0), Err(PolytopeError::InvalidParameter(_))));
        assert!(matches!(FaceLattice::crosspolytope(0), Err(PolytopeError::InvalidParameter(_))));
        assert!(matches!(FaceLattice::polygon(2), Err(PolytopeError::InvalidParameter(_))));
    }

    #[test]
    fn crosspolytope_2_is_a_square() {
        let x = FaceLattice::crosspolytope(2).unwrap();
        let p = FaceLattice::polygon(4).unwrap();
        assert_eq!(x.is_isomorphic(&p), Some(true));
        assert_eq!(FaceLattice::cube(2).unwrap().is_isomorphic(&p), Some(true));
        assert_eq!(FaceLattice::polygon(5).unwrap().is_isomorphic(&p), Some(false));
    }

    #[test]
    fn products() {
        let s1 = FaceLattice::simplex(1).unwrap();
        let s2 = FaceLattice::simplex(2).unwrap();
        let point = FaceLattice::simplex(0).unwrap();
        assert_eq!(s1.product(&s1).f_vector(), vec![4, 4, 1]);
        let prism = s2.product(&s1);
        assert_eq!(prism.f_vector(), vec![6, 9, 5, 1]);
        assert!(prism.validate().passed);
        assert_eq!(s2.product(&point).is_isomorphic(&s2), Some(true));
        assert_eq!(s1.product(&s1).is_isomorphic(&FaceLattice::cube(2).unwrap()), Some(true));
        let cube3 = FaceLattice::product_of_simplices(&[1, 1, 1]).unwrap();
        assert_eq!(cube3.is_isomorphic(&FaceLattice::cube(3).unwrap()), Some(true));
    }

    #[test]
    fn product_f_vector_is_a_convolution() {
        let pieces = ["simplex:0", "simplex:1", "simplex:2", "polygon:5", "cube:2", "xpoly:2"];
        for a in pieces {
            for b in pieces {
                let (p, q) = (FaceLattice::parse(a).unwrap(), FaceLattice::parse(b).unwrap());
                let (fp, fq) = (p.f_vector(), q.f_vector());
                let mut conv = vec![0; fp.len() + fq.len() - 1];
                for (i, x) in fp.iter().enumerate() {
                    for (j, y) in fq.iter().enumerate() {
                        conv[i + j] += x * y;
                    }
                }
                let prod = p.product(&q);
                assert_eq!(prod.f_vector(), conv, "{a} × {b}");
                assert!(prod.validate().passed, "{a} × {b}");
            }
        }
    }

    #[test]
    fn constructors_validate() {
        for spec in [
            "point", "simplex:1", "simplex:2", "simplex:3", "simplex:4", "cube:1", "cube:2", "cube:3", "cube:4",
            "xpoly:1", "xpoly:2", "xpoly:3", "xpoly:4", "polygon:3", "polygon:4", "polygon:7", "square",
            "prod:simplex:2,simplex:1", "prod:simplex:1,simplex:1,simplex:1",
        ] {
            let q = FaceLattice::parse(spec).unwrap();
            let r = q.validate();
            assert!(r.passed, "{spec}: {:?}", r.violations);
        }
    }

    #[test]
    fn deleted_edge_breaks_the_diamond_property() {
        let cube = FaceLattice::cube(3).unwrap();
        let edge = cube.faces().iter().position(|f| f.dim == 1).unwrap();
        let sets = cube
            .faces()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != edge)
            .map(|(_, f)| f.vertices.clone())
            .collect();
        let broken = FaceLattice::from_vertex_sets(8, sets).unwrap();
        let r = broken.validate();
        assert!(!r.passed);
        assert!(r.violations.iter().any(|v| v.contains("intermediate faces")), "{:?}", r.violations);
    }

    #[test]
    fn prism_euler_relation() {
        let r = FaceLattice::parse("prod:simplex:2,simplex:1").unwrap().validate();
        assert!(r.passed);
        // 6 − 9 + 5 = 2 = 1 − (−1)^3
        let f = &r.f_vector;
        assert_eq!(f[0] as i64 - f[1] as i64 + f[2] as i64, 2);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "simplex", "simplex:x", "torus:2", "prod:", "prod:simplex:1,,"] {
            assert!(FaceLattice::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn minimal_faces() {
        let sq = FaceLattice::polygon(4).unwrap();
        assert_eq!(sq.face(sq.minimal_face_containing(&[0, 1])).vertices, vec![0, 1]);
        assert_eq!(sq.minimal_face_containing(&[0, 2]), sq.top());
        assert!(FaceLattice::simplex(3).unwrap().is_simplicial());
        assert!(!FaceLattice::cube(3).unwrap().is_simplicial());
        assert!(sq.is_simplicial());
    }
}
