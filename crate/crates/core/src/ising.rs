//! Exact ground states of unary-free planar Ising models.
//!
//! A labelling of a connected plane graph is determined (up to a global flip)
//! by its set of cut edges, and an edge set is a cut exactly when every face
//! walk crosses it an even number of times. Each face with `k` non-bridge
//! darts gets a gadget: a fan-triangulation chain of `k - 2` triangles (a
//! single edge when `k == 2`) whose zero-weight internal edges can absorb any
//! even number of its `k` ports. Each non-bridge edge links the ports of its
//! two darts with weight `-theta`. In a perfect matching a matched link is an
//! uncut edge, so
//!
//! ```text
//! min cut energy = sum(theta over non-bridges) + min matching weight
//! ```
//!
//! Bridges never constrain parity and are decided on their own sign.

use std::collections::VecDeque;

use crate::embedding::PlanarEmbedding;
use crate::error::{Error, Result};
use crate::matching::{Matching, MatchingSolver, WeightedMatchGraph};
use crate::model::{LabelAssignment, SymmetricIsing, MAX_EXACT_INTEGER};

/// How an original edge is represented in the expanded dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRepr {
    /// Index of the match-graph edge linking the two dart ports.
    Link(usize),
    /// Both sides lie on the same face; cut iff its weight is negative.
    Bridge,
}

#[derive(Debug, Clone)]
pub struct ExpandedDual {
    match_graph: WeightedMatchGraph,
    num_nodes: usize,
    edges: Vec<(usize, usize, i64)>,
    edge_map: Vec<EdgeRepr>,
    gadget_map: Vec<Vec<usize>>,
    offset: i64,
}

fn bridge_energy(w: i64) -> i64 {
    w.min(0)
}

impl ExpandedDual {
    /// Builds the expanded dual of an integer-weighted graph under the given
    /// embedding. Disconnected graphs are handled component-wise.
    pub fn new(num_nodes: usize, edges: &[(usize, usize, i64)], embedding: &PlanarEmbedding) -> Result<Self> {
        if embedding.num_vertices() != num_nodes {
            return Err(Error::InvalidEmbedding(format!(
                "embedding has {} vertices, model has {num_nodes}",
                embedding.num_vertices()
            )));
        }
        if embedding.num_edges() != edges.len() {
            return Err(Error::InvalidEmbedding(format!(
                "embedding has {} edges, model has {}",
                embedding.num_edges(),
                edges.len()
            )));
        }
        let mut edge_darts = Vec::with_capacity(edges.len());
        for &(i, j, _) in edges {
            let d = embedding
                .dart(i, j)
                .ok_or_else(|| Error::InvalidEmbedding(format!("edge ({i}, {j}) missing from embedding")))?;
            edge_darts.push(d);
        }

        let walks = embedding.dart_faces();
        let mut dart_face = vec![0; embedding.num_darts()];
        for (f, walk) in walks.iter().enumerate() {
            for &d in walk {
                dart_face[d] = f;
            }
        }
        embedding.check_euler_per_component(&walks)?;

        let is_bridge = |d: usize| dart_face[d] == dart_face[embedding.twin(d)];

        let mut port = vec![usize::MAX; embedding.num_darts()];
        let mut gadget_map = Vec::with_capacity(walks.len());
        let mut match_edges: Vec<(usize, usize, i64)> = Vec::new();
        let mut next_vertex = 0;
        for walk in &walks {
            let ports: Vec<usize> = walk.iter().copied().filter(|&d| !is_bridge(d)).collect();
            let k = ports.len();
            let base = next_vertex;
            match k {
                0 => {}
                1 => {
                    return Err(Error::Internal("face with a single non-bridge dart".into()));
                }
                2 => {
                    port[ports[0]] = base;
                    port[ports[1]] = base + 1;
                    match_edges.push((base, base + 1, 0));
                    next_vertex += 2;
                }
                _ => {
                    let triangles = k - 2;
                    for t in 0..triangles {
                        let (l, m, r) = (base + 3 * t, base + 3 * t + 1, base + 3 * t + 2);
                        match_edges.extend([(l, m, 0), (m, r, 0), (l, r, 0)]);
                        if t + 1 < triangles {
                            match_edges.push((r, base + 3 * (t + 1), 0));
                        }
                    }
                    port[ports[0]] = base;
                    for t in 0..triangles {
                        port[ports[t + 1]] = base + 3 * t + 1;
                    }
                    port[ports[k - 1]] = base + 3 * (triangles - 1) + 2;
                    next_vertex += 3 * triangles;
                }
            }
            gadget_map.push((base..next_vertex).collect());
        }

        let mut edge_map = Vec::with_capacity(edges.len());
        let mut offset = 0i64;
        for (e, &d) in edge_darts.iter().enumerate() {
            let w = edges[e].2;
            if is_bridge(d) {
                edge_map.push(EdgeRepr::Bridge);
                offset += bridge_energy(w);
            } else {
                edge_map.push(EdgeRepr::Link(match_edges.len()));
                match_edges.push((port[d], port[embedding.twin(d)], -w));
                offset += w;
            }
        }

        Ok(Self {
            match_graph: WeightedMatchGraph::new(next_vertex, match_edges)?,
            num_nodes,
            edges: edges.to_vec(),
            edge_map,
            gadget_map,
            offset,
        })
    }

    pub fn match_graph(&self) -> &WeightedMatchGraph {
        &self.match_graph
    }

    pub fn edge_map(&self) -> &[EdgeRepr] {
        &self.edge_map
    }

    /// Gadget vertices of each face, in face-trace order.
    pub fn gadget_map(&self) -> &[Vec<usize>] {
        &self.gadget_map
    }

    /// Ground energy = `offset + min matching weight`.
    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn set_weight(&mut self, edge: usize, weight: i64) {
        let old = self.edges[edge].2;
        self.edges[edge].2 = weight;
        match self.edge_map[edge] {
            EdgeRepr::Link(k) => {
                self.offset += weight - old;
                self.match_graph.set_weight(k, -weight);
            }
            EdgeRepr::Bridge => self.offset += bridge_energy(weight) - bridge_energy(old),
        }
    }

    /// Recovers labels from a perfect matching of the match graph. Each
    /// component's smallest vertex gets label 0.
    pub fn decode(&self, matching: &Matching) -> Result<(LabelAssignment, i64)> {
        let g = self.match_graph.edges();
        let cut: Vec<bool> = self
            .edge_map
            .iter()
            .zip(&self.edges)
            .map(|(repr, &(_, _, w))| match *repr {
                EdgeRepr::Link(k) => !matching.contains(g[k].0, g[k].1),
                EdgeRepr::Bridge => w < 0,
            })
            .collect();

        let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); self.num_nodes];
        for (&(i, j, _), &c) in self.edges.iter().zip(&cut) {
            adj[i].push((j, c));
            adj[j].push((i, c));
        }
        let mut labels = vec![u8::MAX; self.num_nodes];
        for root in 0..self.num_nodes {
            if labels[root] != u8::MAX {
                continue;
            }
            labels[root] = 0;
            let mut queue = VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                for &(w, c) in &adj[v] {
                    let want = labels[v] ^ u8::from(c);
                    if labels[w] == u8::MAX {
                        labels[w] = want;
                        queue.push_back(w);
                    } else if labels[w] != want {
                        return Err(Error::Internal("matching does not encode a cut".into()));
                    }
                }
            }
        }
        let energy: i64 = self.edges.iter().zip(&cut).filter(|(_, &c)| c).map(|(e, _)| e.2).sum();
        if energy != self.offset + matching.total_weight() {
            return Err(Error::Internal(format!(
                "cut energy {energy} disagrees with matching bound {}",
                self.offset + matching.total_weight()
            )));
        }
        Ok((LabelAssignment::new(labels)?, energy))
    }
}

/// A minimiser of a symmetric Ising energy, normalised so node 0 has label 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundState {
    pub labels: LabelAssignment,
    pub energy: i64,
}

/// Ground-state solver that keeps its expanded dual and matching state so
/// that weight updates re-solve from the previous optimum.
#[derive(Debug, Clone)]
pub struct IsingSolver {
    dual: ExpandedDual,
    matcher: MatchingSolver,
}

impl IsingSolver {
    pub fn new(num_nodes: usize, edges: &[(usize, usize, i64)], embedding: &PlanarEmbedding) -> Result<Self> {
        let dual = ExpandedDual::new(num_nodes, edges, embedding)?;
        let matcher = MatchingSolver::new(dual.match_graph.clone())?;
        Ok(Self { dual, matcher })
    }

    pub fn expanded_dual(&self) -> &ExpandedDual {
        &self.dual
    }

    pub fn set_weight(&mut self, edge: usize, weight: i64) {
        self.dual.set_weight(edge, weight);
    }

    pub fn solve(&mut self) -> Result<GroundState> {
        let matching = self.matcher.rewarm_solve(&self.dual.match_graph)?;
        let (labels, energy) = self.dual.decode(&matching)?;
        Ok(GroundState { labels, energy })
    }
}

fn integer_edges(ising: &SymmetricIsing) -> Result<Vec<(usize, usize, i64)>> {
    ising
        .edges()
        .iter()
        .map(|e| {
            if e.theta.fract() != 0.0 || e.theta.abs() > MAX_EXACT_INTEGER {
                Err(Error::NonInteger(format!(
                    "edge ({}, {}) has weight {}",
                    e.i, e.j, e.theta
                )))
            } else {
                Ok((e.i, e.j, e.theta as i64))
            }
        })
        .collect()
}

pub fn build_expanded_dual(ising: &SymmetricIsing, embedding: &PlanarEmbedding) -> Result<ExpandedDual> {
    ExpandedDual::new(ising.num_nodes(), &integer_edges(ising)?, embedding)
}

/// Exact minimiser of a symmetric Ising model with integer weights on a
/// planar embedding covering all of its nodes.
pub fn ground_state(ising: &SymmetricIsing, embedding: &PlanarEmbedding) -> Result<GroundState> {
    IsingSolver::new(ising.num_nodes(), &integer_edges(ising)?, embedding)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{cycle, grid};

    fn ising_on(emb_edges: &[(usize, usize)], weights: &[f64], n: usize) -> SymmetricIsing {
        let triples: Vec<_> = emb_edges.iter().zip(weights).map(|(&(i, j), &w)| (i, j, w)).collect();
        SymmetricIsing::from_triples(n, &triples).unwrap()
    }

    #[test]
    fn single_edge() {
        let emb = PlanarEmbedding::new(vec![vec![1], vec![0]]).unwrap();
        let s = SymmetricIsing::from_triples(2, &[(0, 1, 3.0)]).unwrap();
        let g = ground_state(&s, &emb).unwrap();
        assert_eq!(g.energy, 0);
        assert_eq!(g.labels.labels(), &[0, 0]);
        let s = SymmetricIsing::from_triples(2, &[(0, 1, -3.0)]).unwrap();
        let g = ground_state(&s, &emb).unwrap();
        assert_eq!(g.energy, -3);
        assert_eq!(g.labels.labels(), &[0, 1]);
    }

    #[test]
    fn triangles_and_squares() {
        let (e, emb) = cycle(3);
        assert_eq!(ground_state(&ising_on(&e, &[-1.0; 3], 3), &emb).unwrap().energy, -2);
        let g = ground_state(&ising_on(&e, &[1.0; 3], 3), &emb).unwrap();
        assert_eq!(g.energy, 0);
        assert_eq!(g.labels.labels(), &[0, 0, 0]);
        let (e, emb) = cycle(4);
        assert_eq!(ground_state(&ising_on(&e, &[-1.0; 4], 4), &emb).unwrap().energy, -4);
    }

    #[test]
    fn gadget_size_on_3x3_grid() {
        // unary-free 3x3 grid: auxiliary node 0 is isolated
        let (e, emb) = grid(3, 3);
        let shifted: Vec<_> = e.iter().map(|&(i, j)| (i + 1, j + 1)).collect();
        let s = ising_on(&shifted, &[1.0; 12], 10);
        let dual = build_expanded_dual(&s, &emb.with_leading_isolated(1)).unwrap();
        // four 4-faces (2 triangles each) and one 8-face (6 triangles)
        assert_eq!(dual.match_graph().num_vertices(), 42);
        assert_eq!(dual.match_graph().edges().len(), 4 * 7 + 23 + 12);
        assert_eq!(dual.offset(), 12);
    }

    #[test]
    fn non_integer_weights_rejected() {
        let emb = PlanarEmbedding::new(vec![vec![1], vec![0]]).unwrap();
        let s = SymmetricIsing::from_triples(2, &[(0, 1, 0.5)]).unwrap();
        assert!(matches!(ground_state(&s, &emb), Err(Error::NonInteger(_))));
    }

    #[test]
    fn embedding_mismatch_rejected() {
        let (_, emb) = cycle(4);
        let s = SymmetricIsing::from_triples(4, &[(0, 2, 1.0)]).unwrap();
        assert!(ground_state(&s, &emb).is_err());
    }

    #[test]
    fn trees_use_bridges_only() {
        let emb = PlanarEmbedding::new(vec![vec![1], vec![0, 2, 3], vec![1], vec![1]]).unwrap();
        let s = SymmetricIsing::from_triples(4, &[(0, 1, -2.0), (1, 2, 5.0), (1, 3, -1.0)]).unwrap();
        let dual = build_expanded_dual(&s, &emb).unwrap();
        assert_eq!(dual.match_graph().num_vertices(), 0);
        let g = ground_state(&s, &emb).unwrap();
        assert_eq!(g.energy, -3);
        assert_eq!(g.labels.labels(), &[0, 1, 1, 0]);
    }

    #[test]
    fn resolve_after_weight_change() {
        let (e, emb) = grid(3, 3);
        let edges: Vec<_> = e
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| (i, j, (k as i64 % 5) - 2))
            .collect();
        let mut solver = IsingSolver::new(9, &edges, &emb).unwrap();
        let first = solver.solve().unwrap();
        solver.set_weight(0, 7);
        solver.set_weight(5, -9);
        let second = solver.solve().unwrap();
        let mut changed = edges.clone();
        changed[0].2 = 7;
        changed[5].2 = -9;
        let fresh = IsingSolver::new(9, &changed, &emb).unwrap().solve().unwrap();
        assert_eq!(second.energy, fresh.energy);
        assert!(first.energy <= 0);
    }
}
