//! Exact minimum-weight perfect matching on general graphs with integer
//! weights.

mod blossom;

use std::collections::HashSet;
use std::io::Write;

use blossom::BlossomState;

use crate::error::{Error, Result};

/// Integer-weighted undirected graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedMatchGraph {
    num_vertices: usize,
    edges: Vec<(usize, usize, i64)>,
}

impl WeightedMatchGraph {
    pub fn new(num_vertices: usize, edges: Vec<(usize, usize, i64)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v, _) in &edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on vertex {u}")));
            }
            if u >= num_vertices || v >= num_vertices {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) out of range")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
        }
        // Duals can drift to a few multiples of sum |w|; keep well clear of overflow.
        let max_abs = edges.iter().map(|e| e.2.unsigned_abs()).max().unwrap_or(0);
        let headroom = (i64::MAX as u64) / (8 * (num_vertices as u64 + 1));
        if max_abs > headroom {
            return Err(Error::Range(format!(
                "edge weight magnitude {max_abs} exceeds {headroom} for {num_vertices} vertices"
            )));
        }
        Ok(Self { num_vertices, edges })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[(usize, usize, i64)] {
        &self.edges
    }

    pub fn set_weight(&mut self, edge: usize, weight: i64) {
        self.edges[edge].2 = weight;
    }

    fn same_topology(&self, other: &Self) -> bool {
        self.num_vertices == other.num_vertices
            && self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .zip(&other.edges)
                .all(|(a, b)| a.0 == b.0 && a.1 == b.1)
    }

    /// DIMACS-style dump (`p edge V E` then `e u v w`, 1-based ids) for
    /// cross-checking with external matching codes.
    pub fn write_dimacs<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "p edge {} {}", self.num_vertices, self.edges.len())?;
        for &(u, v, w) in &self.edges {
            writeln!(out, "e {} {} {}", u + 1, v + 1, w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    mate: Vec<usize>,
    total_weight: i64,
}

impl Matching {
    pub fn total_weight(&self) -> i64 {
        self.total_weight
    }

    pub fn mate(&self, v: usize) -> usize {
        self.mate[v]
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.mate.get(u) == Some(&v)
    }

    /// Matched pairs `(u, v)` with `u < v`, sorted.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.mate
            .iter()
            .enumerate()
            .filter(|&(u, &v)| u < v)
            .map(|(u, &v)| (u, v))
            .collect()
    }

    /// Builds a matching from an explicit pair list, checking that it is
    /// perfect and uses edges of `g`.
    pub fn from_pairs(g: &WeightedMatchGraph, pairs: &[(usize, usize)]) -> Result<Self> {
        let n = g.num_vertices();
        let mut mate = vec![usize::MAX; n];
        for &(u, v) in pairs {
            if u >= n || v >= n || mate[u] != usize::MAX || mate[v] != usize::MAX {
                return Err(Error::InvalidGraph(format!(
                    "pair ({u}, {v}) is not a valid matching pair"
                )));
            }
            mate[u] = v;
            mate[v] = u;
        }
        if mate.contains(&usize::MAX) {
            return Err(Error::NoPerfectMatching);
        }
        let mut total_weight = 0;
        let mut used = 0;
        for &(u, v, w) in g.edges() {
            if mate[u] == v {
                total_weight += w;
                used += 1;
            }
        }
        if used != n / 2 {
            return Err(Error::InvalidGraph("pair is not an edge of the graph".into()));
        }
        Ok(Self { mate, total_weight })
    }
}

/// Matching solver that keeps its primal/dual state between solves so that
/// re-solving after weight changes starts from the previous optimum.
#[derive(Debug, Clone)]
pub struct MatchingSolver {
    graph: WeightedMatchGraph,
    state: BlossomState,
}

impl MatchingSolver {
    pub fn new(graph: WeightedMatchGraph) -> Result<Self> {
        let n = graph.num_vertices();
        if n % 2 == 1 {
            return Err(Error::NoPerfectMatching);
        }
        let (pairs, weights) = Self::split(&graph);
        let state = BlossomState::new(n, pairs, weights);
        Ok(Self { graph, state })
    }

    fn split(graph: &WeightedMatchGraph) -> (Vec<(usize, usize)>, Vec<i64>) {
        // The engine maximises, so weights are negated.
        graph.edges.iter().map(|&(u, v, w)| ((u, v), -w)).unzip()
    }

    pub fn graph(&self) -> &WeightedMatchGraph {
        &self.graph
    }

    /// Solves from scratch.
    pub fn solve(&mut self) -> Result<Matching> {
        self.state.initialize_cold();
        self.finish()
    }

    /// Re-solves after the weights of `graph` changed; the topology must be
    /// identical to the one this solver was built with. Falls back to a cold
    /// solve when there is no previous solution.
    pub fn rewarm_solve(&mut self, graph: &WeightedMatchGraph) -> Result<Matching> {
        if !self.graph.same_topology(graph) {
            return Err(Error::InvalidRewarm(
                "graph topology differs from the previous solve".into(),
            ));
        }
        self.graph.edges.clone_from(&graph.edges);
        self.state.set_weights(graph.edges.iter().map(|e| -e.2).collect());
        if self.state.has_solution() {
            self.state.initialize_warm();
        } else {
            self.state.initialize_cold();
        }
        self.finish()
    }

    fn finish(&mut self) -> Result<Matching> {
        if !self.state.run() {
            return Err(Error::NoPerfectMatching);
        }
        let mate: Vec<usize> = self
            .state
            .mates()
            .into_iter()
            .map(|m| m.expect("perfect matching covers every vertex"))
            .collect();
        let total_weight = self
            .graph
            .edges
            .iter()
            .filter(|&&(u, v, _)| mate[u] == v)
            .map(|e| e.2)
            .sum();
        Ok(Matching { mate, total_weight })
    }

    #[cfg(test)]
    fn dual_certificate_holds(&self) -> bool {
        self.state.check_optimality()
    }
}

/// Minimum-weight perfect matching of `g`.
pub fn min_weight_perfect_matching(g: &WeightedMatchGraph) -> Result<Matching> {
    MatchingSolver::new(g.clone())?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::brute_force_mwpm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(n: usize, edges: &[(usize, usize, i64)]) -> WeightedMatchGraph {
        WeightedMatchGraph::new(n, edges.to_vec()).unwrap()
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64, range: i64) -> WeightedMatchGraph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(density) {
                    edges.push((u, v, rng.gen_range(-range..=range)));
                }
            }
        }
        WeightedMatchGraph::new(n, edges).unwrap()
    }

    #[test]
    fn single_edge() {
        let m = min_weight_perfect_matching(&graph(2, &[(0, 1, -5)])).unwrap();
        assert_eq!(m.pairs(), vec![(0, 1)]);
        assert_eq!(m.total_weight(), -5);
    }

    #[test]
    fn four_cycle() {
        let g = graph(4, &[(0, 1, 1), (1, 2, 2), (2, 3, 3), (0, 3, 4)]);
        let m = min_weight_perfect_matching(&g).unwrap();
        assert_eq!(m.pairs(), vec![(0, 1), (2, 3)]);
        assert_eq!(m.total_weight(), 4);
    }

    #[test]
    fn k4_prefers_cheap_pairs() {
        let g = graph(
            4,
            &[(0, 1, 1), (2, 3, 1), (0, 2, 10), (0, 3, 10), (1, 2, 10), (1, 3, 10)],
        );
        let m = min_weight_perfect_matching(&g).unwrap();
        assert_eq!(m.pairs(), vec![(0, 1), (2, 3)]);
        assert_eq!(m.total_weight(), 2);
    }

    #[test]
    fn no_perfect_matching() {
        assert!(matches!(
            min_weight_perfect_matching(&graph(3, &[(0, 1, 1), (1, 2, 1)])),
            Err(Error::NoPerfectMatching)
        ));
        // star: even order but no perfect matching
        assert!(matches!(
            min_weight_perfect_matching(&graph(4, &[(0, 1, 1), (0, 2, 1), (0, 3, 1)])),
            Err(Error::NoPerfectMatching)
        ));
        assert!(matches!(
            min_weight_perfect_matching(&graph(2, &[])),
            Err(Error::NoPerfectMatching)
        ));
    }

    #[test]
    fn invalid_graphs() {
        assert!(WeightedMatchGraph::new(2, vec![(0, 0, 1)]).is_err());
        assert!(WeightedMatchGraph::new(2, vec![(0, 1, 1), (1, 0, 2)]).is_err());
        assert!(WeightedMatchGraph::new(2, vec![(0, 2, 1)]).is_err());
        assert!(WeightedMatchGraph::new(2, vec![(0, 1, i64::MAX / 4)]).is_err());
    }

    #[test]
    fn empty_graph_has_empty_matching() {
        let m = min_weight_perfect_matching(&graph(0, &[])).unwrap();
        assert_eq!(m.total_weight(), 0);
        assert!(m.pairs().is_empty());
    }

    #[test]
    fn agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for trial in 0..400 {
            let n = 2 * rng.gen_range(1..=6);
            let density = 0.3 + 0.7 * rng.gen::<f64>();
            let g = random_graph(&mut rng, n, density, 20);
            let expected = brute_force_mwpm(&g);
            let mut solver = MatchingSolver::new(g.clone()).unwrap();
            match (solver.solve(), expected) {
                (Ok(m), Ok(e)) => {
                    assert_eq!(m.total_weight(), e.total_weight(), "trial {trial}");
                    assert!(solver.dual_certificate_holds(), "trial {trial}");
                    assert_eq!(
                        Matching::from_pairs(&g, &m.pairs()).unwrap().total_weight(),
                        m.total_weight()
                    );
                    checked += 1;
                }
                (Err(Error::NoPerfectMatching), Err(Error::NoPerfectMatching)) => {}
                (a, b) => panic!("trial {trial}: solver {a:?} vs oracle {b:?}"),
            }
        }
        assert!(checked > 200);
    }

    #[test]
    fn rewarm_matches_cold_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut g = random_graph(&mut rng, 20, 0.35, 50);
        let mut warm = MatchingSolver::new(g.clone()).unwrap();
        warm.solve().unwrap();
        for _ in 0..50 {
            for _ in 0..rng.gen_range(0..8) {
                let k = rng.gen_range(0..g.edges().len());
                g.set_weight(k, rng.gen_range(-50..=50));
            }
            let cold = min_weight_perfect_matching(&g).unwrap();
            let hot = warm.rewarm_solve(&g).unwrap();
            assert_eq!(hot.total_weight(), cold.total_weight());
            assert!(warm.dual_certificate_holds());
        }
    }

    #[test]
    fn rewarm_stress() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..40 {
            let n = 2 * rng.gen_range(4..30);
            let density = 0.1 + 0.5 * rng.gen::<f64>();
            let range = [3, 20, 1000][trial % 3];
            let mut g = random_graph(&mut rng, n, density, range);
            let mut warm = MatchingSolver::new(g.clone()).unwrap();
            if warm.solve().is_err() {
                continue;
            }
            for _ in 0..30 {
                let changes = if rng.gen_bool(0.3) {
                    g.edges().len()
                } else {
                    rng.gen_range(1..6)
                };
                for _ in 0..changes {
                    let k = rng.gen_range(0..g.edges().len());
                    let w = g.edges()[k].2 + rng.gen_range(-range..=range);
                    g.set_weight(k, w.clamp(-5 * range, 5 * range));
                }
                let cold = min_weight_perfect_matching(&g).unwrap();
                let hot = warm.rewarm_solve(&g).unwrap();
                assert_eq!(hot.total_weight(), cold.total_weight(), "trial {trial}");
                assert!(warm.dual_certificate_holds());
            }
        }
    }

    #[test]
    fn rewarm_examples() {
        let mut g = graph(4, &[(0, 1, 1), (1, 2, 2), (2, 3, 3), (0, 3, 4)]);
        let mut solver = MatchingSolver::new(g.clone()).unwrap();
        let first = solver.solve().unwrap();
        let again = solver.rewarm_solve(&g).unwrap();
        assert_eq!(first, again);

        g.set_weight(3, -4);
        let m = solver.rewarm_solve(&g).unwrap();
        assert_eq!(m.pairs(), vec![(0, 3), (1, 2)]);
        assert_eq!(m.total_weight(), -2);

        let other = graph(4, &[(0, 1, 1), (1, 2, 2), (2, 3, 3), (1, 3, 4)]);
        assert!(matches!(solver.rewarm_solve(&other), Err(Error::InvalidRewarm(_))));
    }

    #[test]
    fn dimacs_dump() {
        let g = graph(2, &[(0, 1, -5)]);
        let mut buf = Vec::new();
        g.write_dimacs(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "p edge 2 1\ne 1 2 -5\n");
    }
}
