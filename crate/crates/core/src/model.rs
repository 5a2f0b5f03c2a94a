//! Binary pairwise MRFs in disagreement-cost form.
//!
//! Every model is written as
//!
//! ```text
//! E(x) = sum_{(i,j)} theta_ij [x_i != x_j] + sum_i theta_i [x_i != 0] + constant
//! ```
//!
//! and can be turned into a unary-free [`SymmetricIsing`] by attaching the unary
//! terms to an extra node 0 whose label is pinned to 0.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Largest magnitude for which every integer is exactly representable in an `f64`.
pub const MAX_EXACT_INTEGER: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub theta: f64,
}

/// A binary labeling, one entry in `{0, 1}` per node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelAssignment(Vec<u8>);

impl LabelAssignment {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidModel(format!("label {bad} is not binary")));
        }
        Ok(Self(labels))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// Bits of `mask`, most significant first, so that increasing masks
    /// enumerate assignments in lexicographic order.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self((0..n).map(|i| ((mask >> (n - 1 - i)) & 1) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

impl From<Vec<bool>> for LabelAssignment {
    fn from(v: Vec<bool>) -> Self {
        Self(v.into_iter().map(u8::from).collect())
    }
}

/// Flips every label.
pub fn complement(x: &LabelAssignment) -> LabelAssignment {
    LabelAssignment(x.0.iter().map(|&l| 1 - l).collect())
}

/// 2x2 pairwise potential `entries[x_i][x_j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwisePotentialTable {
    pub entries: [[f64; 2]; 2],
}

impl PairwisePotentialTable {
    pub fn new(entries: [[f64; 2]; 2]) -> Result<Self> {
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite potential table entry".into()));
        }
        Ok(Self { entries })
    }

    fn transposed(&self) -> Self {
        let e = self.entries;
        Self {
            entries: [[e[0][0], e[1][0]], [e[0][1], e[1][1]]],
        }
    }
}

/// Checks node indices and weights, orders each pair as `i < j` and merges
/// parallel edges by summing their weights. Output order follows first
/// appearance.
fn normalize_edges(num_nodes: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Vec<Edge>> {
    let mut out: Vec<Edge> = Vec::new();
    let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for e in edges {
        if e.i == e.j {
            return Err(Error::InvalidModel(format!("self-loop on node {}", e.i)));
        }
        if e.i >= num_nodes || e.j >= num_nodes {
            return Err(Error::InvalidModel(format!(
                "edge ({}, {}) references a node outside 0..{num_nodes}",
                e.i, e.j
            )));
        }
        if !e.theta.is_finite() {
            return Err(Error::InvalidModel(format!(
                "non-finite weight on edge ({}, {})",
                e.i, e.j
            )));
        }
        let (i, j) = if e.i < e.j { (e.i, e.j) } else { (e.j, e.i) };
        match index.get(&(i, j)) {
            Some(&k) => out[k].theta += e.theta,
            None => {
                index.insert((i, j), out.len());
                out.push(Edge { i, j, theta: e.theta });
            }
        }
    }
    Ok(out)
}

fn pairwise_energy(edges: &[Edge], x: &[u8]) -> f64 {
    edges.iter().filter(|e| x[e.i] != x[e.j]).map(|e| e.theta).sum()
}

/// Planar binary MRF in disagreement-cost form.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMRF {
    num_nodes: usize,
    edges: Vec<Edge>,
    unary: Vec<f64>,
    constant: f64,
}

impl BinaryMRF {
    pub fn new(num_nodes: usize, edges: Vec<Edge>, unary: Vec<f64>, constant: f64) -> Result<Self> {
        if unary.len() != num_nodes {
            return Err(Error::Dimension {
                expected: num_nodes,
                got: unary.len(),
            });
        }
        if unary.iter().any(|u| !u.is_finite()) || !constant.is_finite() {
            return Err(Error::InvalidModel("non-finite unary or constant".into()));
        }
        let edges = normalize_edges(num_nodes, edges)?;
        Ok(Self {
            num_nodes,
            edges,
            unary,
            constant,
        })
    }

    /// Convenience constructor from `(i, j, theta)` triples.
    pub fn from_triples(num_nodes: usize, edges: &[(usize, usize, f64)], unary: Vec<f64>) -> Result<Self> {
        let edges = edges.iter().map(|&(i, j, theta)| Edge { i, j, theta }).collect();
        Self::new(num_nodes, edges, unary, 0.0)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn unary(&self) -> &[f64] {
        &self.unary
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn is_integral(&self) -> bool {
        let int = |v: f64| v.fract() == 0.0 && v.abs() <= MAX_EXACT_INTEGER;
        self.edges.iter().all(|e| int(e.theta)) && self.unary.iter().all(|&u| int(u)) && int(self.constant)
    }

    pub fn energy(&self, x: &LabelAssignment) -> Result<f64> {
        if x.len() != self.num_nodes {
            return Err(Error::Dimension {
                expected: self.num_nodes,
                got: x.len(),
            });
        }
        let x = x.labels();
        let unary: f64 = self.unary.iter().zip(x).filter(|(_, &l)| l != 0).map(|(u, _)| u).sum();
        Ok(pairwise_energy(&self.edges, x) + unary + self.constant)
    }

    /// Node degrees in the pairwise graph.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for e in &self.edges {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg
    }

    /// Connected components of the pairwise graph, each sorted, ordered by
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.num_nodes).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..self.num_nodes {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        groups.into_values().collect()
    }

    /// The sub-model induced by `nodes` (sorted, closed under adjacency),
    /// relabelled to `0..nodes.len()`. The constant is not carried over.
    pub fn restrict(&self, nodes: &[usize]) -> Result<Self> {
        let mut local = vec![usize::MAX; self.num_nodes];
        for (k, &v) in nodes.iter().enumerate() {
            local[v] = k;
        }
        let mut edges = Vec::new();
        for e in &self.edges {
            match (local[e.i], local[e.j]) {
                (usize::MAX, usize::MAX) => {}
                (a, b) if a != usize::MAX && b != usize::MAX => edges.push(Edge {
                    i: a,
                    j: b,
                    theta: e.theta,
                }),
                _ => return Err(Error::InvalidModel("restriction is not closed under adjacency".into())),
            }
        }
        let unary = nodes.iter().map(|&v| self.unary[v]).collect();
        Self::new(nodes.len(), edges, unary, 0.0)
    }
}

/// Builds a disagreement-cost model whose energy equals the sum of the
/// given pairwise tables for every assignment.
pub fn reparameterize(tables: &[(usize, usize, PairwisePotentialTable)], node_count: usize) -> Result<BinaryMRF> {
    let mut unary = vec![0.0; node_count];
    let mut constant = 0.0;
    let mut edges = Vec::with_capacity(tables.len());
    for &(i, j, table) in tables {
        if i >= node_count || j >= node_count || i == j {
            return Err(Error::InvalidModel(format!("table on invalid pair ({i}, {j})")));
        }
        let (i, j, t) = if i < j {
            (i, j, table)
        } else {
            (j, i, table.transposed())
        };
        let [[p00, p01], [p10, p11]] = t.entries;
        let theta = (p01 + p10 - p00 - p11) / 2.0;
        unary[i] += p10 - p00 - theta;
        unary[j] += p01 - p00 - theta;
        constant += p00;
        edges.push(Edge { i, j, theta });
    }
    BinaryMRF::new(node_count, edges, unary, constant)
}

/// Rounds `value * factor` half away from zero.
fn scale_value(value: f64, factor: f64) -> Result<f64> {
    let scaled = (value * factor).round();
    if !scaled.is_finite() || scaled.abs() > MAX_EXACT_INTEGER {
        return Err(Error::Range(format!(
            "{value} * {factor} overflows the exact integer range"
        )));
    }
    // avoid -0.0 in output files
    Ok(scaled + 0.0)
}

/// Multiplies every weight by `factor` and rounds to the nearest integer
/// (ties away from zero).
pub fn scale_to_integer(model: &BinaryMRF, factor: f64) -> Result<BinaryMRF> {
    if !factor.is_finite() || factor <= 0.0 {
        return Err(Error::Range(format!("scale factor must be positive, got {factor}")));
    }
    let edges = model
        .edges
        .iter()
        .map(|e| {
            Ok(Edge {
                theta: scale_value(e.theta, factor)?,
                ..*e
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let unary = model
        .unary
        .iter()
        .map(|&u| scale_value(u, factor))
        .collect::<Result<Vec<_>>>()?;
    Ok(BinaryMRF {
        num_nodes: model.num_nodes,
        edges,
        unary,
        constant: scale_value(model.constant, factor)?,
    })
}

/// Unary-free Ising model. Node 0 is the auxiliary node that absorbed the
/// unary terms of the model it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricIsing {
    num_nodes: usize,
    edges: Vec<Edge>,
}

impl SymmetricIsing {
    pub fn new(num_nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        let edges = normalize_edges(num_nodes, edges)?;
        Ok(Self { num_nodes, edges })
    }

    pub fn from_triples(num_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(
            num_nodes,
            edges.iter().map(|&(i, j, theta)| Edge { i, j, theta }).collect(),
        )
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn energy(&self, x: &LabelAssignment) -> Result<f64> {
        if x.len() != self.num_nodes {
            return Err(Error::Dimension {
                expected: self.num_nodes,
                got: x.len(),
            });
        }
        Ok(pairwise_energy(&self.edges, x.labels()))
    }
}

/// Moves unary terms onto edges to a new node 0; original node `i` becomes
/// `i + 1`. Zero unary terms produce no edge. The model constant is dropped.
pub fn symmetrize(model: &BinaryMRF) -> SymmetricIsing {
    let mut edges: Vec<Edge> = model
        .unary
        .iter()
        .enumerate()
        .filter(|(_, &u)| u != 0.0)
        .map(|(i, &u)| Edge {
            i: 0,
            j: i + 1,
            theta: u,
        })
        .collect();
    edges.extend(model.edges.iter().map(|e| Edge {
        i: e.i + 1,
        j: e.j + 1,
        theta: e.theta,
    }));
    SymmetricIsing {
        num_nodes: model.num_nodes + 1,
        edges,
    }
}
