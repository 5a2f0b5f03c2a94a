//! Combinatorial planar embeddings given as rotation systems.
//!
//! Each vertex lists its neighbours in counterclockwise order. A directed
//! edge (dart) `u -> v` is followed on its face by `v -> w`, where `w` is the
//! neighbour preceding `u` in the rotation of `v`. With counterclockwise
//! rotations this keeps the face on the left of every dart, and the outer
//! face is traced like any other.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanarEmbedding {
    rotations: Vec<Vec<usize>>,
    /// First dart id of each vertex; darts of `v` are `offset[v]..offset[v+1]`.
    offset: Vec<usize>,
    /// Reverse dart of each dart.
    twin: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Face {
    pub id: usize,
    /// Closed walk of darts `(tail, head)`.
    pub boundary: Vec<(usize, usize)>,
    /// Distinct boundary vertices in order of first appearance on the walk.
    pub boundary_vertices: Vec<usize>,
}

impl Face {
    pub fn len(&self) -> usize {
        self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundary.is_empty()
    }
}

/// `V - E + F == 2`.
pub fn euler_check(num_vertices: usize, num_edges: usize, num_faces: usize) -> bool {
    num_vertices as i64 - num_edges as i64 + num_faces as i64 == 2
}

impl PlanarEmbedding {
    pub fn new(rotations: Vec<Vec<usize>>) -> Result<Self> {
        let n = rotations.len();
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for r in &rotations {
            offset.push(offset.last().unwrap() + r.len());
        }
        let mut position = std::collections::HashMap::with_capacity(offset[n]);
        for (v, r) in rotations.iter().enumerate() {
            for (k, &w) in r.iter().enumerate() {
                if w >= n {
                    return Err(Error::InvalidEmbedding(format!(
                        "vertex {v} lists unknown neighbour {w}"
                    )));
                }
                if w == v {
                    return Err(Error::InvalidEmbedding(format!(
                        "vertex {v} appears in its own rotation"
                    )));
                }
                if position.insert((v, w), offset[v] + k).is_some() {
                    return Err(Error::InvalidEmbedding(format!("vertex {v} lists neighbour {w} twice")));
                }
            }
        }
        let mut twin = vec![0; offset[n]];
        for (v, r) in rotations.iter().enumerate() {
            for (k, &w) in r.iter().enumerate() {
                match position.get(&(w, v)) {
                    Some(&d) => twin[offset[v] + k] = d,
                    None => {
                        return Err(Error::InvalidEmbedding(format!(
                            "{w} is a neighbour of {v} but not vice versa"
                        )))
                    }
                }
            }
        }
        Ok(Self {
            rotations,
            offset,
            twin,
        })
    }

    pub fn rotations(&self) -> &[Vec<usize>] {
        &self.rotations
    }

    pub fn num_vertices(&self) -> usize {
        self.rotations.len()
    }

    pub fn num_edges(&self) -> usize {
        self.twin.len() / 2
    }

    pub fn num_darts(&self) -> usize {
        self.twin.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.rotations[v].len()
    }

    /// Undirected edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .rotations
            .iter()
            .enumerate()
            .flat_map(|(v, r)| r.iter().filter(move |&&w| v < w).map(move |&w| (v, w)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn dart_tail(&self, d: usize) -> usize {
        self.offset.partition_point(|&o| o <= d) - 1
    }

    pub fn dart_head(&self, d: usize) -> usize {
        let v = self.dart_tail(d);
        self.rotations[v][d - self.offset[v]]
    }

    pub fn twin(&self, d: usize) -> usize {
        self.twin[d]
    }

    /// Dart id of the `k`-th entry of `v`'s rotation.
    pub(crate) fn dart_at(&self, v: usize, k: usize) -> usize {
        self.offset[v] + k
    }

    /// Dart id of `u -> v`, if that edge exists.
    pub fn dart(&self, u: usize, v: usize) -> Option<usize> {
        self.rotations
            .get(u)?
            .iter()
            .position(|&w| w == v)
            .map(|k| self.offset[u] + k)
    }

    /// The dart following `d` on its face.
    pub fn next_dart(&self, d: usize) -> usize {
        let t = self.twin[d];
        let v = self.dart_tail(t);
        let deg = self.rotations[v].len();
        let k = t - self.offset[v];
        self.offset[v] + (k + deg - 1) % deg
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.num_vertices();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &w in &self.rotations[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Traces every face walk, starting each from its lowest unvisited dart.
    /// Works on disconnected embeddings; returns the walks as dart ids.
    pub(crate) fn dart_faces(&self) -> Vec<Vec<usize>> {
        let mut visited = vec![false; self.num_darts()];
        let mut faces = Vec::new();
        for start in 0..self.num_darts() {
            if visited[start] {
                continue;
            }
            let mut walk = Vec::new();
            let mut d = start;
            while !visited[d] {
                visited[d] = true;
                walk.push(d);
                d = self.next_dart(d);
            }
            faces.push(walk);
        }
        faces
    }

    pub(crate) fn face_from_darts(&self, id: usize, darts: &[usize]) -> Face {
        let boundary: Vec<(usize, usize)> = darts.iter().map(|&d| (self.dart_tail(d), self.dart_head(d))).collect();
        let mut boundary_vertices = Vec::new();
        for &(u, _) in &boundary {
            if !boundary_vertices.contains(&u) {
                boundary_vertices.push(u);
            }
        }
        Face {
            id,
            boundary,
            boundary_vertices,
        }
    }

    /// Euler's formula on every component with at least one edge, given the
    /// face walks from [`Self::dart_faces`].
    pub(crate) fn check_euler_per_component(&self, walks: &[Vec<usize>]) -> Result<()> {
        let n = self.num_vertices();
        let mut comp_of = vec![0; n];
        let comps = self.components();
        for (c, members) in comps.iter().enumerate() {
            for &v in members {
                comp_of[v] = c;
            }
        }
        let mut faces = vec![0i64; comps.len()];
        for walk in walks {
            faces[comp_of[self.dart_tail(walk[0])]] += 1;
        }
        let mut edges = vec![0i64; comps.len()];
        for (v, rot) in self.rotations().iter().enumerate() {
            edges[comp_of[v]] += rot.len() as i64;
        }
        for (c, members) in comps.iter().enumerate() {
            let e = edges[c] / 2;
            if e == 0 {
                continue;
            }
            let euler = members.len() as i64 - e + faces[c];
            if euler != 2 {
                return Err(Error::NotPlanarEmbedding { euler });
            }
        }
        Ok(())
    }

    /// Faces of a connected embedding, checked against Euler's formula.
    /// A lone vertex has a single face with an empty walk.
    pub fn faces(&self) -> Result<Vec<Face>> {
        let n = self.num_vertices();
        if n == 0 {
            return Err(Error::InvalidEmbedding("empty graph".into()));
        }
        let comps = self.components().len();
        if comps > 1 {
            return Err(Error::Disconnected { components: comps });
        }
        if self.num_edges() == 0 {
            return Ok(vec![Face {
                id: 0,
                boundary: Vec::new(),
                boundary_vertices: vec![0],
            }]);
        }
        let walks = self.dart_faces();
        if !euler_check(n, self.num_edges(), walks.len()) {
            return Err(Error::NotPlanarEmbedding {
                euler: n as i64 - self.num_edges() as i64 + walks.len() as i64,
            });
        }
        Ok(walks
            .iter()
            .enumerate()
            .map(|(id, w)| self.face_from_darts(id, w))
            .collect())
    }

    /// The embedding induced on a sorted vertex set that is closed under
    /// adjacency, relabelled to `0..vertices.len()`.
    pub fn induced(&self, vertices: &[usize]) -> Result<Self> {
        let mut local = vec![usize::MAX; self.num_vertices()];
        for (k, &v) in vertices.iter().enumerate() {
            local[v] = k;
        }
        let rotations = vertices
            .iter()
            .map(|&v| {
                self.rotations[v]
                    .iter()
                    .map(|&w| match local[w] {
                        usize::MAX => Err(Error::InvalidEmbedding(format!("vertex set is not closed: {v} -> {w}"))),
                        k => Ok(k),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rotations)
    }

    /// Prepends `count` isolated vertices and shifts every id up by `count`.
    pub fn with_leading_isolated(&self, count: usize) -> Self {
        let mut rotations = vec![Vec::new(); count];
        rotations.extend(
            self.rotations
                .iter()
                .map(|r| r.iter().map(|&w| w + count).collect::<Vec<_>>()),
        );
        Self::new(rotations).expect("shifting preserves validity")
    }
}

/// 4-connected `rows x cols` grid, row-major ids. Edges are listed
/// horizontal ones first (row-major), then vertical ones (row-major).
/// Rotations run up, left, down, right.
pub fn grid(rows: usize, cols: usize) -> (Vec<(usize, usize)>, PlanarEmbedding) {
    assert!(rows >= 1 && cols >= 1, "grid dimensions must be positive");
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols.saturating_sub(1) {
            edges.push((id(r, c), id(r, c + 1)));
        }
    }
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols {
            edges.push((id(r, c), id(r + 1, c)));
        }
    }
    let mut rotations = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut rot = Vec::with_capacity(4);
            if r > 0 {
                rot.push(id(r - 1, c));
            }
            if c > 0 {
                rot.push(id(r, c - 1));
            }
            if r + 1 < rows {
                rot.push(id(r + 1, c));
            }
            if c + 1 < cols {
                rot.push(id(r, c + 1));
            }
            rotations.push(rot);
        }
    }
    (
        edges,
        PlanarEmbedding::new(rotations).expect("grid rotations are valid"),
    )
}

/// Simple cycle `0 - 1 - ... - (k-1) - 0`.
pub fn cycle(k: usize) -> (Vec<(usize, usize)>, PlanarEmbedding) {
    assert!(k >= 3, "a simple cycle needs at least 3 vertices");
    let edges = (0..k).map(|i| (i.min((i + 1) % k), i.max((i + 1) % k))).collect();
    let rotations = (0..k).map(|i| vec![(i + k - 1) % k, (i + 1) % k]).collect();
    (
        edges,
        PlanarEmbedding::new(rotations).expect("cycle rotations are valid"),
    )
}
