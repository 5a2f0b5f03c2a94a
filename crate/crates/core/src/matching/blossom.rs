// Primal-dual blossom algorithm for maximum-weight perfect matching.
//
// The search follows the classic formulation of Galil (as popularised by
// J. van Rantwijk's reference implementation), with blossoms shrunk and
// expanded on demand, but all exposed vertices grow alternating trees at
// once. After an augmentation only the two trees that met are dissolved;
// the others keep their labels and keep growing. Only the perfect
// (maximum-cardinality) variant is implemented, which lets vertex duals go
// negative and permits arbitrary feasible starting duals. That in turn allows
// warm starts from a previous optimum after weight changes.
//
// Dual updates are lazy: a labelled vertex or top-level blossom stores its
// dual as of `stamp`, and the drift since then follows from its label and
// the global dual clock `now`. Pending events (edges becoming tight, T-blossom
// duals reaching zero) sit in a heap keyed by the clock value at which they
// fire, so a dual step costs a heap pop instead of a scan.
//
// Conventions: `dual[v]` is twice the LP vertex variable, `dual[b]` for a
// blossom is its LP variable, and the reduced cost of an edge between two
// different top-level blossoms is `dual[i] + dual[j] - 2 * w`. Endpoint `p`
// of edge `k = p / 2` is vertex `endpoint[p]`; `mate[v]` stores the remote
// endpoint of the matched edge at `v`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

const NONE: usize = usize::MAX;

const FREE: u8 = 0;
const S: u8 = 1;
const T: u8 = 2;
const BREADCRUMB: u8 = 4;

#[derive(Debug, Clone)]
pub(crate) struct BlossomState {
    n: usize,
    edges: Vec<(usize, usize)>,
    weight: Vec<i64>,
    endpoint: Vec<usize>,
    neighbend: Vec<Vec<usize>>,
    mate: Vec<usize>,
    label: Vec<u8>,
    labelend: Vec<usize>,
    inblossom: Vec<usize>,
    blossomparent: Vec<usize>,
    blossomchilds: Vec<Vec<usize>>,
    blossombase: Vec<usize>,
    blossomendps: Vec<Vec<usize>>,
    unusedblossoms: Vec<usize>,
    dual: Vec<i64>,
    allowedge: Vec<bool>,
    queue: Vec<usize>,
    stamp: Vec<i64>,
    now: i64,
    /// Pending events as (due clock, tag): tags below the edge count are
    /// edges, the rest are blossoms offset by the edge count.
    heap: BinaryHeap<Reverse<(i64, usize)>>,
    /// Root of the alternating tree each labelled vertex belongs to.
    tree: Vec<usize>,
    leafbuf: Vec<usize>,
    solved: bool,
}

impl BlossomState {
    /// `weight` are maximisation weights; every vertex must be covered by
    /// at least one edge for a perfect matching to exist.
    pub(crate) fn new(n: usize, edges: Vec<(usize, usize)>, weight: Vec<i64>) -> Self {
        let m = edges.len();
        let mut endpoint = Vec::with_capacity(2 * m);
        let mut neighbend = vec![Vec::new(); n];
        for (k, &(i, j)) in edges.iter().enumerate() {
            endpoint.push(i);
            endpoint.push(j);
            neighbend[i].push(2 * k + 1);
            neighbend[j].push(2 * k);
        }
        Self {
            n,
            edges,
            weight,
            endpoint,
            neighbend,
            mate: vec![NONE; n],
            label: vec![FREE; 2 * n],
            labelend: vec![NONE; 2 * n],
            inblossom: (0..n).collect(),
            blossomparent: vec![NONE; 2 * n],
            blossomchilds: vec![Vec::new(); 2 * n],
            blossombase: (0..n).chain(std::iter::repeat_n(NONE, n)).collect(),
            blossomendps: vec![Vec::new(); 2 * n],
            unusedblossoms: (n..2 * n).rev().collect(),
            dual: vec![0; 2 * n],
            allowedge: vec![false; m],
            queue: Vec::new(),
            stamp: vec![0; 2 * n],
            now: 0,
            heap: BinaryHeap::new(),
            tree: vec![NONE; n],
            leafbuf: Vec::new(),
            solved: false,
        }
    }

    pub(crate) fn has_solution(&self) -> bool {
        self.solved
    }

    pub(crate) fn set_weights(&mut self, weight: Vec<i64>) {
        debug_assert_eq!(weight.len(), self.edges.len());
        self.weight = weight;
    }

    #[inline]
    fn vdual(&self, v: usize) -> i64 {
        let d = self.now - self.stamp[v];
        match self.label[self.inblossom[v]] {
            S => self.dual[v] - d,
            T => self.dual[v] + d,
            _ => self.dual[v],
        }
    }

    fn bdual(&self, b: usize) -> i64 {
        if self.blossomparent[b] != NONE {
            return self.dual[b];
        }
        let d = self.now - self.stamp[b];
        match self.label[b] {
            S => self.dual[b] + d,
            T => self.dual[b] - d,
            _ => self.dual[b],
        }
    }

    /// Folds the drift into the stored dual; required before the label
    /// of the vertex's top-level blossom changes.
    #[inline]
    fn settle(&mut self, v: usize) {
        self.dual[v] = self.vdual(v);
        self.stamp[v] = self.now;
    }

    fn settle_blossom(&mut self, b: usize) {
        if b < self.n {
            return;
        }
        self.dual[b] = self.bdual(b);
        self.stamp[b] = self.now;
    }

    #[inline]
    fn slack(&self, k: usize) -> i64 {
        let (i, j) = self.edges[k];
        self.vdual(i) + self.vdual(j) - 2 * self.weight[k]
    }

    /// Queues edge `k` if it joins an S-blossom to a free or another
    /// S-blossom, keyed by the clock value at which it becomes tight.
    fn push_edge(&mut self, k: usize) {
        let (i, j) = self.edges[k];
        let (bi, bj) = (self.inblossom[i], self.inblossom[j]);
        if bi == bj || self.allowedge[k] {
            return;
        }
        let s = self.slack(k);
        let due = match (self.label[bi], self.label[bj]) {
            (S, S) => {
                debug_assert!(s % 2 == 0, "odd reduced cost between S-blossoms");
                s / 2
            }
            (S, FREE) | (FREE, S) => s,
            _ => return,
        };
        self.heap.push(Reverse((self.now + due, k)));
    }

    /// Mate of every vertex (vertex ids), `None` for exposed vertices.
    pub(crate) fn mates(&self) -> Vec<Option<usize>> {
        self.mate
            .iter()
            .map(|&p| if p == NONE { None } else { Some(self.endpoint[p]) })
            .collect()
    }

    fn leaves(&self, b: usize, out: &mut Vec<usize>) {
        if b < self.n {
            out.push(b);
            return;
        }
        let mut stack = vec![b];
        while let Some(x) = stack.pop() {
            if x < self.n {
                out.push(x);
            } else {
                stack.extend(self.blossomchilds[x].iter().rev());
            }
        }
    }

    fn leaves_vec(&self, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.leaves(b, &mut out);
        out
    }

    /// Drops all blossom structure, keeping vertex duals and the matching.
    fn reset_blossoms(&mut self) {
        let n = self.n;
        for v in 0..n {
            self.inblossom[v] = v;
            self.blossomparent[v] = NONE;
            self.blossombase[v] = v;
        }
        for b in n..2 * n {
            self.blossomparent[b] = NONE;
            self.blossomchilds[b].clear();
            self.blossomendps[b].clear();
            self.blossombase[b] = NONE;
            self.dual[b] = 0;
        }
        self.unusedblossoms = (n..2 * n).rev().collect();
    }

    fn match_edge(&mut self, k: usize) {
        self.mate[self.edges[k].0] = 2 * k + 1;
        self.mate[self.edges[k].1] = 2 * k;
    }

    /// Greedy dual start: every vertex takes its best incident weight, then
    /// exposed vertices lower their dual to the tightest feasible value and
    /// grab a tight edge to another exposed vertex if one exists.
    pub(crate) fn initialize_cold(&mut self) {
        self.reset_blossoms();
        self.mate.fill(NONE);
        for v in 0..self.n {
            self.dual[v] = self.neighbend[v].iter().map(|&p| self.weight[p / 2]).max().unwrap_or(0);
        }
        self.greedy_match_exposed();
        self.fix_exposed_parity();
        self.solved = false;
    }

    /// Converts the previous optimum into a blossom-free feasible start for
    /// the current weights. Matched edges stay matched only while tight.
    pub(crate) fn initialize_warm(&mut self) {
        let n = self.n;
        // Fold blossom duals into their leaves: feasible once blossoms vanish.
        let mut folded = vec![0i64; n];
        for (v, f) in folded.iter_mut().enumerate() {
            let mut y = self.dual[v];
            let mut b = self.blossomparent[v];
            while b != NONE {
                y += self.dual[b];
                b = self.blossomparent[b];
            }
            *f = y;
        }
        self.reset_blossoms();
        self.dual[..n].copy_from_slice(&folded);
        // Restore feasibility by raising duals, preferring endpoints that are
        // exposed or whose matched edge is already broken.
        for k in 0..self.edges.len() {
            let s = self.slack(k);
            if s < 0 {
                let (i, j) = self.edges[k];
                let v = if self.mate[i] == NONE || self.mate[i] == 2 * k + 1 || self.mate[j] != NONE {
                    i
                } else {
                    j
                };
                self.dual[v] -= s;
            }
        }
        // Re-tighten matched edges where the slack at an endpoint allows it.
        for v in 0..n {
            let p = self.mate[v];
            if p == NONE {
                continue;
            }
            let k = p / 2;
            let mut s = self.slack(k);
            if s == 0 {
                continue;
            }
            for x in [v, self.endpoint[p]] {
                let room = self.neighbend[x]
                    .iter()
                    .filter(|&&q| q / 2 != k)
                    .map(|&q| self.slack(q / 2))
                    .min()
                    .unwrap_or(i64::MAX);
                let d = room.min(s);
                self.dual[x] -= d;
                s -= d;
                if s == 0 {
                    break;
                }
            }
            if s != 0 {
                let w = self.endpoint[p];
                self.mate[v] = NONE;
                self.mate[w] = NONE;
            }
        }
        self.greedy_match_exposed();
        self.fix_exposed_parity();
        self.solved = false;
    }

    /// Lowers each exposed vertex's dual as far as feasibility allows and
    /// matches it along a resulting tight edge to another exposed vertex.
    fn greedy_match_exposed(&mut self) {
        for v in 0..self.n {
            if self.mate[v] != NONE || self.neighbend[v].is_empty() {
                continue;
            }
            let room = self.neighbend[v].iter().map(|&p| self.slack(p / 2)).min().unwrap();
            self.dual[v] -= room;
            let tight = self.neighbend[v]
                .iter()
                .copied()
                .find(|&p| self.mate[self.endpoint[p]] == NONE && self.slack(p / 2) == 0);
            if let Some(p) = tight {
                self.match_edge(p / 2);
            }
        }
    }

    /// Exposed vertices must share a parity so that reduced costs between
    /// S-blossoms stay even and every delta is an integer.
    fn fix_exposed_parity(&mut self) {
        for v in 0..self.n {
            if self.mate[v] == NONE && self.dual[v] & 1 != 0 {
                self.dual[v] += 1;
            }
        }
    }

    fn assign_label(&mut self, w: usize, t: u8, p: usize) {
        let b = self.inblossom[w];
        debug_assert!(self.label[w] == FREE && self.label[b] == FREE);
        debug_assert!(b < self.n || self.blossomparent[b] == NONE);
        self.label[w] = t;
        self.label[b] = t;
        self.labelend[w] = p;
        self.labelend[b] = p;
        let root = if p == NONE { w } else { self.tree[self.endpoint[p]] };
        let mut leaves = std::mem::take(&mut self.leafbuf);
        leaves.clear();
        self.leaves(b, &mut leaves);
        // The top was free, so its duals carry no drift: restart the clock.
        for &v in &leaves {
            self.tree[v] = root;
            self.stamp[v] = self.now;
        }
        if b >= self.n {
            self.stamp[b] = self.now;
            if t == T {
                self.heap.push(Reverse((self.now + self.dual[b], self.edges.len() + b)));
            }
        }
        if t == S {
            self.queue.extend_from_slice(&leaves);
        }
        self.leafbuf = leaves;
        if t == T {
            let base = self.blossombase[b];
            debug_assert!(self.mate[base] != NONE);
            let mb = self.mate[base];
            self.assign_label(self.endpoint[mb], S, mb ^ 1);
        }
    }

    /// Walks up from `v` and `w` to find a common ancestor (new blossom
    /// base) or `NONE` when the two trees differ (augmenting path).
    fn scan_blossom(&mut self, mut v: usize, mut w: usize) -> usize {
        let mut path = Vec::new();
        let mut base = NONE;
        while v != NONE || w != NONE {
            let mut b = self.inblossom[v];
            if self.label[b] & BREADCRUMB != 0 {
                base = self.blossombase[b];
                break;
            }
            debug_assert_eq!(self.label[b], S);
            path.push(b);
            self.label[b] = S | BREADCRUMB;
            if self.labelend[b] == NONE {
                v = NONE;
            } else {
                v = self.endpoint[self.labelend[b]];
                b = self.inblossom[v];
                debug_assert_eq!(self.label[b], T);
                v = self.endpoint[self.labelend[b]];
            }
            if w != NONE {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = S;
        }
        base
    }

    fn add_blossom(&mut self, base: usize, k: usize) {
        let (mut v, mut w) = self.edges[k];
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];
        let b = self.unusedblossoms.pop().expect("blossom pool exhausted");
        self.blossombase[b] = base;
        self.blossomparent[b] = NONE;
        self.settle_blossom(bb);
        self.blossomparent[bb] = b;
        let mut path = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.settle_blossom(bv);
            self.blossomparent[bv] = b;
            path.push(bv);
            endps.push(self.labelend[bv]);
            v = self.endpoint[self.labelend[bv]];
            bv = self.inblossom[v];
        }
        path.push(bb);
        path.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.settle_blossom(bw);
            self.blossomparent[bw] = b;
            path.push(bw);
            endps.push(self.labelend[bw] ^ 1);
            w = self.endpoint[self.labelend[bw]];
            bw = self.inblossom[w];
        }
        self.blossomchilds[b] = path;
        self.blossomendps[b] = endps;
        self.label[b] = S;
        self.labelend[b] = self.labelend[bb];
        self.dual[b] = 0;
        self.stamp[b] = self.now;
        let mut leaves = std::mem::take(&mut self.leafbuf);
        leaves.clear();
        self.leaves(b, &mut leaves);
        for &leaf in &leaves {
            if self.label[self.inblossom[leaf]] == T {
                self.queue.push(leaf);
            }
            self.settle(leaf);
            self.inblossom[leaf] = b;
        }
        self.leafbuf = leaves;
    }

    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        for leaf in self.leaves_vec(b) {
            self.settle(leaf);
        }
        self.settle_blossom(b);
        let childs = std::mem::take(&mut self.blossomchilds[b]);
        for &s in &childs {
            self.blossomparent[s] = NONE;
            self.stamp[s] = self.now;
            if s < self.n {
                self.inblossom[s] = s;
            } else if endstage && self.dual[s] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                for leaf in self.leaves_vec(s) {
                    self.inblossom[leaf] = s;
                }
            }
        }
        self.blossomchilds[b] = childs;

        if !endstage && self.label[b] == T {
            // Relabel the sub-blossoms on the even-length path from the
            // entry child to the base.
            let len = self.blossomchilds[b].len() as i64;
            let at = |j: i64| (((j % len) + len) % len) as usize;
            let entrychild = self.inblossom[self.endpoint[self.labelend[b] ^ 1]];
            let mut j = self.blossomchilds[b].iter().position(|&c| c == entrychild).unwrap() as i64;
            let (jstep, endptrick): (i64, i64) = if j & 1 != 0 {
                j -= len;
                (1, 0)
            } else {
                (-1, 1)
            };
            let mut p = self.labelend[b];
            while j != 0 {
                let q = self.blossomendps[b][at(j - endptrick)];
                let e1 = self.endpoint[p ^ 1];
                let e2 = self.endpoint[q ^ endptrick as usize ^ 1];
                self.label[e1] = FREE;
                self.label[e2] = FREE;
                self.assign_label(e1, T, p);
                self.allowedge[q / 2] = true;
                j += jstep;
                p = self.blossomendps[b][at(j - endptrick)] ^ endptrick as usize;
                self.allowedge[p / 2] = true;
                j += jstep;
            }
            let bv = self.blossomchilds[b][at(j)];
            let e = self.endpoint[p ^ 1];
            self.label[e] = T;
            self.label[bv] = T;
            self.labelend[e] = p;
            self.labelend[bv] = p;
            if bv >= self.n {
                self.heap
                    .push(Reverse((self.now + self.dual[bv], self.edges.len() + bv)));
            }
            j += jstep;
            while self.blossomchilds[b][at(j)] != entrychild {
                let bv = self.blossomchilds[b][at(j)];
                if self.label[bv] == S {
                    j += jstep;
                    continue;
                }
                let reached = self.leaves_vec(bv).into_iter().find(|&v| self.label[v] != FREE);
                if let Some(v) = reached {
                    debug_assert_eq!(self.label[v], T);
                    debug_assert_eq!(self.inblossom[v], bv);
                    self.label[v] = FREE;
                    let m = self.mate[self.blossombase[bv]];
                    self.label[self.endpoint[m]] = FREE;
                    let le = self.labelend[v];
                    self.assign_label(v, T, le);
                }
                j += jstep;
            }
            // Sub-blossoms left unlabelled now feel the S-blossoms next
            // to them.
            for c in self.blossomchilds[b].clone() {
                if self.label[c] == FREE {
                    for x in self.leaves_vec(c) {
                        for idx in 0..self.neighbend[x].len() {
                            self.push_edge(self.neighbend[x][idx] / 2);
                        }
                    }
                }
            }
        }
        self.label[b] = FREE;
        self.labelend[b] = NONE;
        self.blossomchilds[b].clear();
        self.blossomendps[b].clear();
        self.blossombase[b] = NONE;
        self.dual[b] = 0;
        self.unusedblossoms.push(b);
    }

    /// Swaps matched and unmatched edges along the path from `v` to the base
    /// of blossom `b`, then rotates `b` so that `v` becomes its base.
    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossomparent[t] != b {
            t = self.blossomparent[t];
        }
        if t >= self.n {
            self.augment_blossom(t, v);
        }
        let len = self.blossomchilds[b].len() as i64;
        let at = |j: i64| (((j % len) + len) % len) as usize;
        let i = self.blossomchilds[b].iter().position(|&c| c == t).unwrap();
        let mut j = i as i64;
        let (jstep, endptrick): (i64, usize) = if i & 1 != 0 {
            j -= len;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t = self.blossomchilds[b][at(j)];
            let p = self.blossomendps[b][at(j - endptrick as i64)] ^ endptrick;
            if t >= self.n {
                self.augment_blossom(t, self.endpoint[p]);
            }
            j += jstep;
            let t = self.blossomchilds[b][at(j)];
            if t >= self.n {
                self.augment_blossom(t, self.endpoint[p ^ 1]);
            }
            self.mate[self.endpoint[p]] = p ^ 1;
            self.mate[self.endpoint[p ^ 1]] = p;
        }
        self.blossomchilds[b].rotate_left(i);
        self.blossomendps[b].rotate_left(i);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        debug_assert_eq!(self.blossombase[b], v);
    }

    fn augment_matching(&mut self, k: usize) {
        let (v, w) = self.edges[k];
        for (mut s, mut p) in [(v, 2 * k + 1), (w, 2 * k)] {
            loop {
                let bs = self.inblossom[s];
                debug_assert_eq!(self.label[bs], S);
                if bs >= self.n {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.labelend[bs] == NONE {
                    break;
                }
                let t = self.endpoint[self.labelend[bs]];
                let bt = self.inblossom[t];
                debug_assert_eq!(self.label[bt], T);
                s = self.endpoint[self.labelend[bt]];
                let j = self.endpoint[self.labelend[bt] ^ 1];
                debug_assert_eq!(self.blossombase[bt], t);
                if bt >= self.n {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.labelend[bt];
                p = self.labelend[bt] ^ 1;
            }
        }
    }

    fn reset_stage(&mut self) {
        self.label.fill(FREE);
        self.allowedge.fill(false);
        self.queue.clear();
        self.heap.clear();
        self.now = 0;
        self.stamp.fill(0);
    }

    /// After an augmentation, returns every vertex of the two trees that
    /// met to the unlabelled state so the remaining trees can keep growing.
    fn dissolve(&mut self, r1: usize, r2: usize) {
        let members: Vec<usize> = (0..self.n)
            .filter(|&v| self.label[self.inblossom[v]] != FREE && (self.tree[v] == r1 || self.tree[v] == r2))
            .collect();
        let mut tops = Vec::new();
        for &v in &members {
            self.settle(v);
            let top = self.inblossom[v];
            if top >= self.n {
                self.settle_blossom(top);
            }
        }
        for &v in &members {
            self.label[v] = FREE;
            self.labelend[v] = NONE;
            let mut b = self.blossomparent[v];
            while b != NONE {
                if self.blossomparent[b] == NONE && self.label[b] != FREE {
                    tops.push(b);
                }
                self.label[b] = FREE;
                self.labelend[b] = NONE;
                b = self.blossomparent[b];
            }
        }
        for b in tops {
            if self.dual[b] == 0 && self.blossombase[b] != NONE {
                self.expand_blossom(b, true);
            }
        }
        for &x in &members {
            for idx in 0..self.neighbend[x].len() {
                let p = self.neighbend[x][idx];
                let w = self.endpoint[p];
                self.allowedge[p / 2] = false;
                // A leaf inside a surviving T-blossom may have been reached
                // from `x`; find another tight S neighbour or forget it.
                if self.label[w] == T && self.labelend[w] == p ^ 1 && self.inblossom[w] != w {
                    let bw = self.inblossom[w];
                    let other = self.neighbend[w].iter().copied().find(|&q| {
                        let by = self.inblossom[self.endpoint[q]];
                        by != bw && self.label[by] == S && self.slack(q / 2) == 0
                    });
                    match other {
                        Some(q) => {
                            self.labelend[w] = q;
                            self.allowedge[q / 2] = true;
                        }
                        None => {
                            self.label[w] = FREE;
                            self.labelend[w] = NONE;
                        }
                    }
                }
            }
        }
        for &x in &members {
            for idx in 0..self.neighbend[x].len() {
                self.push_edge(self.neighbend[x][idx] / 2);
            }
        }
    }

    /// Grows alternating trees from all exposed vertices at once until the
    /// matching is perfect or no augmenting path remains. Returns whether
    /// the final matching is perfect.
    pub(crate) fn run(&mut self) -> bool {
        let n = self.n;
        let m = self.edges.len();
        self.reset_stage();
        let mut exposed = 0;
        for v in 0..n {
            if self.mate[v] == NONE {
                exposed += 1;
                self.assign_label(v, S, NONE);
            }
        }
        while exposed > 0 {
            while let Some(v) = self.queue.pop() {
                if self.label[self.inblossom[v]] != S {
                    continue;
                }
                for idx in 0..self.neighbend[v].len() {
                    let p = self.neighbend[v][idx];
                    let k = p / 2;
                    let w = self.endpoint[p];
                    if self.inblossom[v] == self.inblossom[w] {
                        continue;
                    }
                    if !self.allowedge[k] && self.slack(k) <= 0 {
                        self.allowedge[k] = true;
                    }
                    let bw = self.inblossom[w];
                    if self.allowedge[k] {
                        if self.label[bw] == FREE {
                            self.assign_label(w, T, p ^ 1);
                        } else if self.label[bw] == S {
                            let base = self.scan_blossom(v, w);
                            if base != NONE {
                                self.add_blossom(base, k);
                            } else {
                                let (r1, r2) = (self.tree[v], self.tree[w]);
                                self.augment_matching(k);
                                self.dissolve(r1, r2);
                                exposed -= 2;
                                break;
                            }
                        } else if self.label[w] == FREE {
                            self.label[w] = T;
                            self.labelend[w] = p ^ 1;
                        }
                    } else {
                        self.push_edge(k);
                    }
                }
            }
            if exposed == 0 {
                break;
            }

            // Advance the dual clock to the next valid event. Entries whose
            // situation changed since they were queued are dropped or
            // requeued at their corrected time.
            let mut event = None;
            while let Some(Reverse((key, tag))) = self.heap.pop() {
                if tag < m {
                    let k = tag;
                    let (i, j) = self.edges[k];
                    let (bi, bj) = (self.inblossom[i], self.inblossom[j]);
                    if bi == bj || self.allowedge[k] {
                        continue;
                    }
                    let s = self.slack(k);
                    let due = self.now
                        + match (self.label[bi], self.label[bj]) {
                            (S, S) => s / 2,
                            (S, FREE) | (FREE, S) => s,
                            _ => continue,
                        };
                    if due > key {
                        self.heap.push(Reverse((due, k)));
                        continue;
                    }
                    debug_assert_eq!(due, key);
                    event = Some((due, tag));
                    break;
                } else {
                    let b = tag - m;
                    if self.blossombase[b] == NONE || self.blossomparent[b] != NONE || self.label[b] != T {
                        continue;
                    }
                    let due = self.now + self.bdual(b);
                    if due > key {
                        self.heap.push(Reverse((due, tag)));
                        continue;
                    }
                    debug_assert_eq!(due, key);
                    event = Some((due, tag));
                    break;
                }
            }
            let Some((due, tag)) = event else {
                // No augmenting path left: maximum cardinality reached.
                break;
            };
            self.now = due;
            if tag < m {
                self.allowedge[tag] = true;
                let (i, j) = self.edges[tag];
                self.queue.push(if self.label[self.inblossom[i]] == S { i } else { j });
            } else {
                self.expand_blossom(tag - m, false);
            }
        }
        // Make the stored duals current again.
        for v in 0..n {
            self.dual[v] = self.vdual(v);
        }
        for b in n..2 * n {
            if self.blossombase[b] != NONE {
                self.dual[b] = self.bdual(b);
            }
        }
        self.now = 0;
        self.stamp.fill(0);
        self.heap.clear();
        self.solved = true;
        self.is_perfect()
    }

    fn is_perfect(&self) -> bool {
        self.mate.iter().all(|&p| p != NONE)
    }

    /// Checks LP feasibility and complementary slackness of the current
    /// primal/dual pair (edges between top-level blossoms only).
    #[cfg(test)]
    pub(crate) fn check_optimality(&self) -> bool {
        for k in 0..self.edges.len() {
            let (i, j) = self.edges[k];
            let mut s = self.slack(k);
            // Add duals of blossoms containing both endpoints.
            let mut ancestors_i = Vec::new();
            let mut b = self.blossomparent[i];
            while b != NONE {
                ancestors_i.push(b);
                b = self.blossomparent[b];
            }
            let mut b = self.blossomparent[j];
            while b != NONE {
                if ancestors_i.contains(&b) {
                    s += 2 * self.bdual(b);
                }
                b = self.blossomparent[b];
            }
            if s < 0 {
                return false;
            }
            if self.mate[i] == 2 * k + 1 && s != 0 {
                return false;
            }
        }
        (self.n..2 * self.n).all(|b| self.blossombase[b] == NONE || self.dual[b] >= 0)
    }
}
