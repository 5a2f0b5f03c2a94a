//! Seeded grid instances, model files, single runs and parallel batches.
//!
//! Instances are drawn with ChaCha8 (`rand_chacha` 0.3.1, seeded through
//! `SeedableRng::seed_from_u64`). Each uniform draw on `[lo, hi)` consumes one
//! `next_u64` and uses its top 53 bits, so a seed reproduces the same
//! weights on every platform.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::embedding::{grid, PlanarEmbedding};
use crate::error::{Error, Result};
use crate::model::{scale_to_integer, BinaryMRF, Edge, MAX_EXACT_INTEGER};
use crate::pcc::{optimize, SolveOptions, SolveResult};

pub const DEFAULT_SCALE: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub rows: usize,
    pub cols: usize,
    /// Unary weights are drawn from `U(-a, a)`.
    pub a: f64,
    pub seed: u64,
    #[serde(default = "default_scale")]
    pub scale: u64,
}

fn default_scale() -> u64 {
    DEFAULT_SCALE
}

impl InstanceSpec {
    pub fn new(rows: usize, cols: usize, a: f64, seed: u64) -> Self {
        Self {
            rows,
            cols,
            a,
            seed,
            scale: DEFAULT_SCALE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Range(format!(
                "grid {}x{} must be non-empty",
                self.rows, self.cols
            )));
        }
        if !self.a.is_finite() || self.a < 0.0 {
            return Err(Error::Range(format!(
                "unary magnitude a = {} must be finite and >= 0",
                self.a
            )));
        }
        if self.scale == 0 {
            return Err(Error::Range("scale must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GridInstance {
    pub spec: InstanceSpec,
    pub model: BinaryMRF,
    pub embedding: PlanarEmbedding,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    lo + (hi - lo) * u
}

/// Draws horizontal edges, then vertical edges (both row-major) from
/// `U(-1, 1)`, then unary weights from `U(-a, a)`, and scales to integers.
pub fn generate_grid_instance(spec: &InstanceSpec) -> Result<GridInstance> {
    spec.validate()?;
    let (edges, embedding) = grid(spec.rows, spec.cols);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let edges: Vec<Edge> = edges
        .iter()
        .map(|&(i, j)| Edge {
            i,
            j,
            theta: uniform(&mut rng, -1.0, 1.0),
        })
        .collect();
    let unary = (0..spec.rows * spec.cols)
        .map(|_| uniform(&mut rng, -spec.a, spec.a))
        .collect();
    let raw = BinaryMRF::new(spec.rows * spec.cols, edges, unary, 0.0)?;
    Ok(GridInstance {
        spec: *spec,
        model: scale_to_integer(&raw, spec.scale as f64)?,
        embedding,
    })
}

/// Weight that serialises as a JSON integer when it is one.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(transparent)]
struct Weight(f64);

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.fract() == 0.0 && self.0.abs() <= MAX_EXACT_INTEGER {
            s.serialize_i64(self.0 as i64)
        } else {
            s.serialize_f64(self.0)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EmbeddingDoc {
    rotations: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDoc {
    num_nodes: usize,
    edges: Vec<(usize, usize, Weight)>,
    unary: Vec<Weight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constant: Option<Weight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<EmbeddingDoc>,
    /// Generator parameters, kept so runs can be labelled later.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    instance: Option<InstanceSpec>,
}

/// A model read from disk together with its embedding.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub model: BinaryMRF,
    pub embedding: PlanarEmbedding,
    pub instance: Option<InstanceSpec>,
}

impl ModelFile {
    pub fn to_json(&self, include_embedding: bool) -> String {
        let m = &self.model;
        let doc = ModelDoc {
            num_nodes: m.num_nodes(),
            edges: m.edges().iter().map(|e| (e.i, e.j, Weight(e.theta))).collect(),
            unary: m.unary().iter().map(|&u| Weight(u)).collect(),
            constant: (m.constant() != 0.0).then_some(Weight(m.constant())),
            embedding: include_embedding.then(|| EmbeddingDoc {
                rotations: self.embedding.rotations().to_vec(),
            }),
            instance: self.instance,
        };
        serde_json::to_string_pretty(&doc).expect("model documents always serialise")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        Self::from_doc(doc).map_err(serde::de::Error::custom)
    }

    fn from_doc(doc: ModelDoc) -> Result<Self> {
        let edges = doc.edges.iter().map(|&(i, j, w)| Edge { i, j, theta: w.0 }).collect();
        let unary = doc.unary.iter().map(|w| w.0).collect();
        let model = BinaryMRF::new(doc.num_nodes, edges, unary, doc.constant.map_or(0.0, |w| w.0))?;
        let embedding = match (doc.embedding, &doc.instance) {
            (Some(e), _) => PlanarEmbedding::new(e.rotations)?,
            (None, Some(spec)) => grid(spec.rows, spec.cols).1,
            (None, None) => infer_embedding(&model)?,
        };
        Ok(Self {
            model,
            embedding,
            instance: doc.instance,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let doc: ModelDoc = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_doc(doc)
    }

    pub fn write(&self, path: &Path, include_embedding: bool) -> Result<()> {
        std::fs::write(path, self.to_json(include_embedding) + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl From<GridInstance> for ModelFile {
    fn from(g: GridInstance) -> Self {
        Self {
            model: g.model,
            embedding: g.embedding,
            instance: Some(g.spec),
        }
    }
}

/// Embedding for a model file without one: the canonical grid if the edge
/// set is a grid, any rotation order if the graph is a forest.
fn infer_embedding(model: &BinaryMRF) -> Result<PlanarEmbedding> {
    let n = model.num_nodes();
    let mut edges: Vec<(usize, usize)> = model.edges().iter().map(|e| (e.i, e.j)).collect();
    edges.sort_unstable();
    for rows in 1..=n {
        if !n.is_multiple_of(rows) {
            continue;
        }
        let (_, emb) = grid(rows, n / rows);
        if emb.edges() == edges {
            return Ok(emb);
        }
    }
    let mut rotations = vec![Vec::new(); n];
    for &(i, j) in &edges {
        rotations[i].push(j);
        rotations[j].push(i);
    }
    let emb = PlanarEmbedding::new(rotations)?;
    if edges.len() + emb.components().len() == n {
        return Ok(emb);
    }
    Err(Error::InvalidEmbedding(
        "model has no embedding and is neither a grid nor a forest".into(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub spec: Option<InstanceSpec>,
    pub converged: bool,
    pub iters: usize,
    pub gap: f64,
    pub wall_ms: f64,
}

pub const RESULTS_HEADER: &str = "rows,cols,a,seed,converged,iters,gap,wall_ms";

impl RunSummary {
    pub fn from_result(spec: Option<InstanceSpec>, result: &SolveResult, wall_ms: f64) -> Self {
        Self {
            spec,
            converged: result.gap() < 1.0,
            iters: result.iterations(),
            gap: result.gap(),
            wall_ms,
        }
    }

    pub fn csv_row(&self) -> String {
        let (rows, cols, a, seed) = match &self.spec {
            Some(s) => (
                s.rows.to_string(),
                s.cols.to_string(),
                s.a.to_string(),
                s.seed.to_string(),
            ),
            None => Default::default(),
        };
        format!(
            "{rows},{cols},{a},{seed},{},{},{},{:.3}",
            self.converged, self.iters, self.gap, self.wall_ms
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_trace(result: &SolveResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    result.trace.write_csv(&mut out).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

/// Appends summary rows to a results CSV, writing the header first if the
/// file is new or empty.
pub fn append_results(path: &Path, summaries: &[RunSummary]) -> Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    if fresh {
        writeln!(out, "{RESULTS_HEADER}").map_err(io_err(path))?;
    }
    for s in summaries {
        writeln!(out, "{}", s.csv_row()).map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Generates the instance, optimises it and optionally writes the trace.
pub fn run(spec: &InstanceSpec, options: &SolveOptions, trace: Option<&Path>) -> Result<(RunSummary, SolveResult)> {
    let inst = generate_grid_instance(spec)?;
    let started = Instant::now();
    let result = optimize(&inst.model, &inst.embedding, *options)?;
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    if let Some(path) = trace {
        write_trace(&result, path)?;
    }
    Ok((RunSummary::from_result(Some(*spec), &result, wall_ms), result))
}

#[derive(Debug, Clone, Deserialize)]
struct BatchGroup {
    rows: usize,
    cols: usize,
    a: f64,
    seeds: Vec<u64>,
    #[serde(default = "default_scale")]
    scale: u64,
}

/// Batch file: `{"max_iters": 2000, "tol": 1.0, "runs": [{"rows": 16,
/// "cols": 16, "a": 3.2, "seeds": [0, 1, 2], "scale": 500}]}`.
#[derive(Debug, Clone, Deserialize)]
pub struct BatchSpec {
    #[serde(default)]
    max_iters: Option<usize>,
    #[serde(default)]
    tol: Option<f64>,
    runs: Vec<BatchGroup>,
}

impl BatchSpec {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn instances(&self) -> Vec<InstanceSpec> {
        self.runs
            .iter()
            .flat_map(|g| {
                g.seeds.iter().map(|&seed| InstanceSpec {
                    rows: g.rows,
                    cols: g.cols,
                    a: g.a,
                    seed,
                    scale: g.scale,
                })
            })
            .collect()
    }

    pub fn options(&self) -> SolveOptions {
        let d = SolveOptions::default();
        SolveOptions {
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            tol: self.tol.unwrap_or(d.tol),
            ..d
        }
    }
}

/// Outcome of one batch entry; failures are kept so the batch can go on.
#[derive(Debug)]
pub struct BatchEntry {
    pub spec: InstanceSpec,
    pub outcome: Result<RunSummary>,
}

/// Runs every spec on a pool of `jobs` threads. Results come back in input
/// order regardless of scheduling.
pub fn batch(specs: &[InstanceSpec], options: &SolveOptions, jobs: usize) -> Result<Vec<BatchEntry>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        specs
            .par_iter()
            .map(|spec| BatchEntry {
                spec: *spec,
                outcome: run(spec, options, None).map(|(s, _)| s),
            })
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub rows: usize,
    pub cols: usize,
    pub a: f64,
    pub scale: u64,
    pub runs: usize,
    pub converged: usize,
    pub failed: usize,
    /// Geometric mean of wall time over converged runs.
    pub geo_mean_wall_ms: Option<f64>,
}

impl Aggregate {
    pub fn convergence_fraction(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.converged as f64 / self.runs as f64
        }
    }
}

pub const AGGREGATE_HEADER: &str = "rows,cols,a,scale,runs,converged,failed,fraction,geomean_wall_ms";

impl std::fmt::Display for Aggregate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            self.rows,
            self.cols,
            self.a,
            self.scale,
            self.runs,
            self.converged,
            self.failed,
            self.convergence_fraction(),
            self.geo_mean_wall_ms.map_or(String::new(), |t| format!("{t:.3}"))
        )
    }
}

pub fn geometric_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

/// One row per distinct `(rows, cols, a, scale)`, in order of first
/// appearance.
pub fn aggregate(entries: &[BatchEntry]) -> Vec<Aggregate> {
    let mut groups: Vec<(Aggregate, Vec<f64>)> = Vec::new();
    for e in entries {
        let s = &e.spec;
        let idx = match groups
            .iter()
            .position(|(g, _)| g.rows == s.rows && g.cols == s.cols && g.a == s.a && g.scale == s.scale)
        {
            Some(i) => i,
            None => {
                groups.push((
                    Aggregate {
                        rows: s.rows,
                        cols: s.cols,
                        a: s.a,
                        scale: s.scale,
                        runs: 0,
                        converged: 0,
                        failed: 0,
                        geo_mean_wall_ms: None,
                    },
                    Vec::new(),
                ));
                groups.len() - 1
            }
        };
        let (g, times) = &mut groups[idx];
        g.runs += 1;
        match &e.outcome {
            Ok(r) if r.converged => {
                g.converged += 1;
                times.push(r.wall_ms);
            }
            Ok(_) => {}
            Err(_) => g.failed += 1,
        }
    }
    groups
        .into_iter()
        .map(|(mut g, times)| {
            g.geo_mean_wall_ms = geometric_mean(&times);
            g
        })
        .collect()
}

pub fn trace_path_for(dir: &Path, spec: &InstanceSpec) -> PathBuf {
    dir.join(format!(
        "trace_{}x{}_a{}_s{}.csv",
        spec.rows, spec.cols, spec.a, spec.seed
    ))
}
