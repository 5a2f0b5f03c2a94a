//! Planar cycle covering lower bounds.
//!
//! Every face of the embedded model graph gets its own copy of the unary
//! node, joined to each distinct vertex on the face boundary. The unary
//! weight `theta_i` is split over the copies adjacent to `i`, which leaves
//! a unary-free planar Ising model whose ground energy is a lower bound on
//! the MAP energy. The splits are tuned by projected subgradient ascent with
//! Polyak steps, and each ground state also yields an upper bound.

use std::io::Write;
use std::time::Instant;

use crate::embedding::PlanarEmbedding;
use crate::error::{Error, Result};
use crate::ising::IsingSolver;
use crate::model::{BinaryMRF, LabelAssignment};

/// The model graph plus one face node per face, in a combined planar
/// embedding. Base nodes keep their ids; face `f` is node `num_base + f`.
#[derive(Debug, Clone)]
pub struct PccGraph {
    num_base: usize,
    num_faces: usize,
    base_edges: Vec<(usize, usize)>,
    /// `(node, face)` pairs, grouped by face in boundary order.
    incidences: Vec<(usize, usize)>,
    node_incidences: Vec<Vec<usize>>,
    /// Component id of every node of the augmented graph.
    component: Vec<usize>,
    num_components: usize,
    embedding: PlanarEmbedding,
}

impl PccGraph {
    pub fn num_base(&self) -> usize {
        self.num_base
    }

    pub fn num_faces(&self) -> usize {
        self.num_faces
    }

    pub fn num_vertices(&self) -> usize {
        self.num_base + self.num_faces
    }

    pub fn num_edges(&self) -> usize {
        self.base_edges.len() + self.incidences.len()
    }

    pub fn face_node(&self, f: usize) -> usize {
        self.num_base + f
    }

    pub fn incidences(&self) -> &[(usize, usize)] {
        &self.incidences
    }

    /// Incidence indices of node `i`, i.e. `N_i`.
    pub fn node_incidences(&self, i: usize) -> &[usize] {
        &self.node_incidences[i]
    }

    pub fn embedding(&self) -> &PlanarEmbedding {
        &self.embedding
    }

    /// Edges of the augmented graph: model edges first, then one edge per
    /// incidence.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.base_edges
            .iter()
            .copied()
            .chain(self.incidences.iter().map(|&(i, f)| (i, self.face_node(f))))
            .collect()
    }
}

/// Adds a face node inside every face (including the outer one) of the
/// model graph. A node without edges gets a private face node so that its
/// unary term is still covered.
pub fn build_pcc(model: &BinaryMRF, embedding: &PlanarEmbedding) -> Result<PccGraph> {
    let n = model.num_nodes();
    if embedding.num_vertices() != n {
        return Err(Error::InvalidEmbedding(format!(
            "embedding has {} vertices, model has {n}",
            embedding.num_vertices()
        )));
    }
    let mut model_edges: Vec<(usize, usize)> = model.edges().iter().map(|e| (e.i, e.j)).collect();
    let base_edges = model_edges.clone();
    model_edges.sort_unstable();
    if model_edges != embedding.edges() {
        return Err(Error::InvalidEmbedding(
            "embedding edges differ from model edges".into(),
        ));
    }

    let walks = embedding.dart_faces();
    embedding.check_euler_per_component(&walks)?;
    let mut dart_face = vec![0; embedding.num_darts()];
    let mut first_on_face = vec![false; embedding.num_darts()];
    let mut face_vertices: Vec<Vec<usize>> = Vec::with_capacity(walks.len());
    for (f, walk) in walks.iter().enumerate() {
        let mut seen: Vec<usize> = Vec::new();
        for &d in walk {
            dart_face[d] = f;
            let v = embedding.dart_tail(d);
            if !seen.contains(&v) {
                seen.push(v);
                first_on_face[d] = true;
            }
        }
        face_vertices.push(seen);
    }
    for v in 0..n {
        if embedding.degree(v) == 0 {
            face_vertices.push(vec![v]);
        }
    }
    let num_faces = face_vertices.len();

    let mut rotations = Vec::with_capacity(n + num_faces);
    let mut isolated_face = walks.len();
    for (v, rot) in embedding.rotations().iter().enumerate() {
        if rot.is_empty() {
            rotations.push(vec![n + isolated_face]);
            isolated_face += 1;
            continue;
        }
        let mut out = Vec::with_capacity(2 * rot.len());
        for (k, &w) in rot.iter().enumerate() {
            out.push(w);
            let d = embedding.dart_at(v, k);
            if first_on_face[d] {
                out.push(n + dart_face[d]);
            }
        }
        rotations.push(out);
    }
    let mut incidences = Vec::new();
    let mut node_incidences = vec![Vec::new(); n];
    for (f, verts) in face_vertices.iter().enumerate() {
        rotations.push(verts.clone());
        for &v in verts {
            node_incidences[v].push(incidences.len());
            incidences.push((v, f));
        }
    }
    let augmented = PlanarEmbedding::new(rotations)?;

    let comps = augmented.components();
    let mut component = vec![0; augmented.num_vertices()];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            component[v] = c;
        }
    }

    Ok(PccGraph {
        num_base: n,
        num_faces,
        base_edges,
        incidences,
        node_incidences,
        component,
        num_components: comps.len(),
        embedding: augmented,
    })
}

/// Per-incidence unary splits `theta_i^f`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalParams {
    theta_split: Vec<f64>,
}

impl VariationalParams {
    pub fn new(model: &BinaryMRF, pcc: &PccGraph, theta_split: Vec<f64>) -> Result<Self> {
        if theta_split.len() != pcc.incidences.len() {
            return Err(Error::Dimension {
                expected: pcc.incidences.len(),
                got: theta_split.len(),
            });
        }
        let params = Self { theta_split };
        if params.sum_violation(model, pcc) > 1e-8 {
            return Err(Error::InvalidModel("splits do not sum to the unary weights".into()));
        }
        Ok(params)
    }

    pub fn theta_split(&self) -> &[f64] {
        &self.theta_split
    }

    /// Largest `|sum_f theta_i^f - theta_i| / max(1, |theta_i|)` over nodes.
    pub fn sum_violation(&self, model: &BinaryMRF, pcc: &PccGraph) -> f64 {
        model
            .unary()
            .iter()
            .zip(&pcc.node_incidences)
            .map(|(&t, inc)| {
                let s: f64 = inc.iter().map(|&k| self.theta_split[k]).sum();
                (s - t).abs() / t.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// Moves each node's splits by a common shift so they sum to `theta_i`.
    fn project(&mut self, model: &BinaryMRF, pcc: &PccGraph) {
        for (&t, inc) in model.unary().iter().zip(&pcc.node_incidences) {
            let s: f64 = inc.iter().map(|&k| self.theta_split[k]).sum();
            let shift = (t - s) / inc.len() as f64;
            if shift != 0.0 {
                for &k in inc {
                    self.theta_split[k] += shift;
                }
            }
        }
    }
}

/// Uniform split `theta_i / |N_i|`.
pub fn init_params(model: &BinaryMRF, pcc: &PccGraph) -> VariationalParams {
    let mut theta_split = vec![0.0; pcc.incidences.len()];
    for (&t, inc) in model.unary().iter().zip(&pcc.node_incidences) {
        for &k in inc {
            theta_split[k] = t / inc.len() as f64;
        }
    }
    VariationalParams { theta_split }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    /// Labels of base nodes followed by face nodes.
    pub config: LabelAssignment,
}

/// Exact ground-state oracle for the augmented model, kept alive across
/// iterations so that each solve starts from the previous matching.
#[derive(Debug, Clone)]
struct BoundOracle {
    solver: IsingSolver,
    scale: f64,
    weights: Vec<i64>,
    /// Positive rounding residuals per edge, in scaled units.
    residual: Vec<f64>,
}

impl BoundOracle {
    fn new(model: &BinaryMRF, pcc: &PccGraph, params: &VariationalParams, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale < 1.0 {
            return Err(Error::Range(format!("matching scale must be at least 1, got {scale}")));
        }
        let thetas = model
            .edges()
            .iter()
            .map(|e| e.theta)
            .chain(params.theta_split.iter().copied());
        let mut weights = Vec::with_capacity(pcc.num_edges());
        let mut residual = Vec::with_capacity(pcc.num_edges());
        for t in thetas {
            let (w, r) = quantize(t, scale)?;
            weights.push(w);
            residual.push(r);
        }
        let triples: Vec<(usize, usize, i64)> = pcc
            .edges()
            .into_iter()
            .zip(&weights)
            .map(|((i, j), &w)| (i, j, w))
            .collect();
        Ok(Self {
            solver: IsingSolver::new(pcc.num_vertices(), &triples, &pcc.embedding)?,
            scale,
            weights,
            residual,
        })
    }

    fn update(&mut self, first_split_edge: usize, params: &VariationalParams) -> Result<()> {
        for (k, &t) in params.theta_split.iter().enumerate() {
            let e = first_split_edge + k;
            let (w, r) = quantize(t, self.scale)?;
            self.residual[e] = r;
            if self.weights[e] != w {
                self.weights[e] = w;
                self.solver.set_weight(e, w);
            }
        }
        Ok(())
    }

    /// For any labelling, true energy >= (integer energy - sum of positive
    /// residuals) / scale, so the result is a valid bound despite rounding.
    fn evaluate(&mut self, constant: f64) -> Result<LowerBound> {
        let gs = self.solver.solve()?;
        let slack: f64 = self.residual.iter().sum();
        Ok(LowerBound {
            value: constant + (gs.energy as f64 - slack) / self.scale,
            config: gs.labels,
        })
    }
}

/// Rounds `theta * scale` to an integer weight; also returns the positive
/// part of the rounding error.
fn quantize(theta: f64, scale: f64) -> Result<(i64, f64)> {
    let exact = theta * scale;
    let w = exact.round();
    if !w.is_finite() || w.abs() > crate::model::MAX_EXACT_INTEGER {
        return Err(Error::Range(format!(
            "weight {theta} overflows at matching scale {scale}"
        )));
    }
    Ok((w as i64, (w - exact).max(0.0)))
}

/// Default integer scale applied to weights before each matching solve.
pub const DEFAULT_MATCHING_SCALE: f64 = 1e6;

/// One-shot lower bound for the given splits.
pub fn lower_bound(model: &BinaryMRF, pcc: &PccGraph, params: &VariationalParams) -> Result<LowerBound> {
    BoundOracle::new(model, pcc, params, DEFAULT_MATCHING_SCALE)?.evaluate(model.constant())
}

/// `g_i^f = [x_i != x_f] - mean over N_i`, one entry per incidence.
pub fn subgradient(pcc: &PccGraph, config: &LabelAssignment) -> Vec<f64> {
    let x = config.labels();
    let disagree = |k: usize| {
        let (i, f) = pcc.incidences[k];
        f64::from(u8::from(x[i] != x[pcc.face_node(f)]))
    };
    let mut g = vec![0.0; pcc.incidences.len()];
    for inc in &pcc.node_incidences {
        let mean = inc.iter().map(|&k| disagree(k)).sum::<f64>() / inc.len() as f64;
        for &k in inc {
            g[k] = disagree(k) - mean;
        }
    }
    g
}

/// Polyak step `(best_upper - lower) / (2 |g|^2)`; `None` when `g` vanishes.
pub fn polyak_step(best_upper: f64, lower: f64, grad_sq_norm: f64) -> Option<f64> {
    (grad_sq_norm > 0.0).then(|| 0.5 * (best_upper - lower) / grad_sq_norm)
}

/// Restricts a joint configuration to the model nodes and keeps, per
/// connected component, the better of it and its complement. Each component
/// is first oriented so that most of its face nodes carry label 0; on a tie
/// in energy that orientation is kept.
pub fn decode_upper(model: &BinaryMRF, pcc: &PccGraph, config: &LabelAssignment) -> Result<(LabelAssignment, f64)> {
    let x = config.labels();
    if x.len() != pcc.num_vertices() {
        return Err(Error::Dimension {
            expected: pcc.num_vertices(),
            got: x.len(),
        });
    }
    let c = pcc.num_components;
    let mut face_votes = vec![0i64; c];
    for f in 0..pcc.num_faces {
        let v = pcc.face_node(f);
        face_votes[pcc.component[v]] += if x[v] == 1 { 1 } else { -1 };
    }
    let mut labels: Vec<u8> = (0..pcc.num_base)
        .map(|i| x[i] ^ u8::from(face_votes[pcc.component[i]] > 0))
        .collect();
    // Flipping a component changes only its unary part.
    let mut unary_now = vec![0.0; c];
    let mut unary_flipped = vec![0.0; c];
    for (i, &t) in model.unary().iter().enumerate() {
        if labels[i] == 1 {
            unary_now[pcc.component[i]] += t;
        } else {
            unary_flipped[pcc.component[i]] += t;
        }
    }
    for (i, l) in labels.iter_mut().enumerate() {
        let k = pcc.component[i];
        if unary_flipped[k] < unary_now[k] {
            *l ^= 1;
        }
    }
    let assignment = LabelAssignment::new(labels)?;
    let energy = model.energy(&assignment)?;
    Ok((assignment, energy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop once `best_upper - best_lower < tol`.
    pub tol: f64,
    pub matching_scale: f64,
    /// Record wall-clock time in the trace. Off by default so that traces
    /// are byte-for-byte reproducible.
    pub timing: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1.0,
            matching_scale: DEFAULT_MATCHING_SCALE,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub best_upper: f64,
    pub step_size: f64,
    pub subgrad_norm2: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundTrace {
    pub records: Vec<TraceRecord>,
}

pub const TRACE_HEADER: &str = "iter,lower_bound,upper_bound,best_upper,step_size,subgrad_norm2,elapsed_ms";

impl BoundTrace {
    /// Running maximum of the per-iteration lower bounds.
    pub fn best_lower(&self) -> Option<f64> {
        self.records.iter().map(|r| r.lower_bound).reduce(f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iter, r.lower_bound, r.upper_bound, r.best_upper, r.step_size, r.subgrad_norm2, r.elapsed_ms
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Certificate {
    Optimal,
    Gap(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub best_assignment: LabelAssignment,
    pub best_upper: f64,
    pub best_lower: f64,
    pub certificate: Certificate,
    pub trace: BoundTrace,
}

impl SolveResult {
    pub fn gap(&self) -> f64 {
        self.best_upper - self.best_lower
    }

    pub fn iterations(&self) -> usize {
        self.trace.records.len()
    }

    pub fn is_optimal(&self) -> bool {
        self.certificate == Certificate::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Converged,
    /// Zero subgradient with a gap left: no further progress possible.
    Stalled,
}

/// Stateful subgradient loop; `optimize` drives it to completion, tests
/// can step it and inspect the parameters in between.
#[derive(Debug, Clone)]
pub struct PccOptimizer<'a> {
    model: &'a BinaryMRF,
    pcc: PccGraph,
    params: VariationalParams,
    oracle: BoundOracle,
    options: SolveOptions,
    best_assignment: LabelAssignment,
    best_upper: f64,
    best_lower: f64,
    trace: BoundTrace,
    started: Instant,
}

impl<'a> PccOptimizer<'a> {
    pub fn new(model: &'a BinaryMRF, embedding: &PlanarEmbedding, options: SolveOptions) -> Result<Self> {
        let pcc = build_pcc(model, embedding)?;
        let params = init_params(model, &pcc);
        let oracle = BoundOracle::new(model, &pcc, &params, options.matching_scale)?;
        let best_assignment = LabelAssignment::zeros(model.num_nodes());
        // Trivial bounds until the first iteration: all-zero labels above,
        // every negative weight paid below.
        let best_upper = model.energy(&best_assignment)?;
        let best_lower = model.constant()
            + model.edges().iter().map(|e| e.theta.min(0.0)).sum::<f64>()
            + model.unary().iter().map(|t| t.min(0.0)).sum::<f64>();
        Ok(Self {
            model,
            pcc,
            params,
            oracle,
            options,
            best_assignment,
            best_upper,
            best_lower,
            trace: BoundTrace::default(),
            started: Instant::now(),
        })
    }

    pub fn pcc(&self) -> &PccGraph {
        &self.pcc
    }

    pub fn params(&self) -> &VariationalParams {
        &self.params
    }

    pub fn trace(&self) -> &BoundTrace {
        &self.trace
    }

    pub fn gap(&self) -> f64 {
        self.best_upper - self.best_lower
    }

    /// One lower-bound solve, upper-bound decode and parameter update.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let lb = self.oracle.evaluate(self.model.constant())?;
        let (assignment, upper) = decode_upper(self.model, &self.pcc, &lb.config)?;
        if upper < self.best_upper {
            self.best_upper = upper;
            self.best_assignment = assignment;
        }
        if self.trace.records.is_empty() || lb.value > self.best_lower {
            self.best_lower = lb.value;
        }
        let g = subgradient(&self.pcc, &lb.config);
        let norm2: f64 = g.iter().map(|v| v * v).sum();
        let outcome = if self.gap() < self.options.tol {
            StepOutcome::Converged
        } else {
            match polyak_step(self.best_upper, lb.value, norm2) {
                None => StepOutcome::Stalled,
                Some(step) => {
                    self.apply(step, &g)?;
                    StepOutcome::Continue
                }
            }
        };
        let step_size = match outcome {
            StepOutcome::Continue => polyak_step(self.best_upper, lb.value, norm2).unwrap_or(0.0),
            _ => 0.0,
        };
        let elapsed_ms = if self.options.timing {
            self.started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        self.trace.records.push(TraceRecord {
            iter: self.trace.records.len() + 1,
            lower_bound: lb.value,
            upper_bound: upper,
            best_upper: self.best_upper,
            step_size,
            subgrad_norm2: norm2,
            elapsed_ms,
        });
        Ok(outcome)
    }

    fn apply(&mut self, step: f64, g: &[f64]) -> Result<()> {
        for (t, d) in self.params.theta_split.iter_mut().zip(g) {
            *t += step * d;
        }
        self.params.project(self.model, &self.pcc);
        self.oracle.update(self.model.edges().len(), &self.params)
    }

    pub fn finish(self) -> SolveResult {
        let gap = self.gap();
        let certificate = if self.model.is_integral() && gap < 1.0 && !self.trace.records.is_empty() {
            Certificate::Optimal
        } else {
            Certificate::Gap(gap)
        };
        SolveResult {
            best_assignment: self.best_assignment,
            best_upper: self.best_upper,
            best_lower: self.best_lower,
            certificate,
            trace: self.trace,
        }
    }
}

/// Runs the subgradient loop until the gap drops below `tol`, the
/// subgradient vanishes, or `max_iters` lower bounds have been computed.
pub fn optimize(model: &BinaryMRF, embedding: &PlanarEmbedding, options: SolveOptions) -> Result<SolveResult> {
    if !model.is_integral() {
        log::warn!("model weights are not integers; no optimality certificate will be issued");
    }
    let mut opt = PccOptimizer::new(model, embedding, options)?;
    for _ in 0..options.max_iters {
        if opt.step()? != StepOutcome::Continue {
            break;
        }
    }
    Ok(opt.finish())
}
