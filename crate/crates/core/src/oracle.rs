//! Exhaustive reference solvers. Deliberately naive.

use crate::error::{Error, Result};
use crate::matching::{Matching, WeightedMatchGraph};
use crate::model::{BinaryMRF, LabelAssignment};

pub const MAP_NODE_CAP: usize = 24;
pub const MATCHING_VERTEX_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub assignment: LabelAssignment,
    pub energy: f64,
}

/// Minimum energy over all `2^N` assignments. Ties go to the
/// lexicographically smallest assignment.
pub fn brute_force_map(model: &BinaryMRF) -> Result<OracleResult> {
    let n = model.num_nodes();
    if n > MAP_NODE_CAP {
        return Err(Error::TooLarge {
            size: n,
            cap: MAP_NODE_CAP,
        });
    }
    let mut best: Option<OracleResult> = None;
    for mask in 0..(1u64 << n) {
        let x = LabelAssignment::from_mask(mask, n);
        let e = model.energy(&x)?;
        if best.as_ref().is_none_or(|b| e < b.energy) {
            best = Some(OracleResult {
                assignment: x,
                energy: e,
            });
        }
    }
    Ok(best.expect("at least one assignment"))
}

/// Minimum-weight perfect matching by enumerating every perfect matching.
pub fn brute_force_mwpm(g: &WeightedMatchGraph) -> Result<Matching> {
    let n = g.num_vertices();
    if n > MATCHING_VERTEX_CAP {
        return Err(Error::TooLarge {
            size: n,
            cap: MATCHING_VERTEX_CAP,
        });
    }
    if n % 2 == 1 {
        return Err(Error::NoPerfectMatching);
    }
    let mut weight = vec![vec![None; n]; n];
    for &(u, v, w) in g.edges() {
        weight[u][v] = Some(w);
        weight[v][u] = Some(w);
    }

    fn search(
        weight: &[Vec<Option<i64>>],
        used: &mut [bool],
        pairs: &mut Vec<(usize, usize)>,
        acc: i64,
        best: &mut Option<(i64, Vec<(usize, usize)>)>,
    ) {
        let Some(u) = used.iter().position(|&x| !x) else {
            if best.as_ref().is_none_or(|b| acc < b.0) {
                *best = Some((acc, pairs.clone()));
            }
            return;
        };
        used[u] = true;
        for v in u + 1..used.len() {
            if let (false, Some(w)) = (used[v], weight[u][v]) {
                used[v] = true;
                pairs.push((u, v));
                search(weight, used, pairs, acc + w, best);
                pairs.pop();
                used[v] = false;
            }
        }
        used[u] = false;
    }

    let mut best = None;
    search(&weight, &mut vec![false; n], &mut Vec::new(), 0, &mut best);
    match best {
        Some((_, pairs)) => Matching::from_pairs(g, &pairs),
        None => Err(Error::NoPerfectMatching),
    }
}
