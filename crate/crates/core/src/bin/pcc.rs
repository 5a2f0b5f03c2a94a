use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use pcc::harness::{
    aggregate, append_results, batch, generate_grid_instance, write_trace, BatchSpec, InstanceSpec, ModelFile,
    RunSummary, AGGREGATE_HEADER, DEFAULT_SCALE,
};
use pcc::oracle::{brute_force_map, MAP_NODE_CAP};
use pcc::pcc::{optimize, Certificate, SolveOptions, DEFAULT_MATCHING_SCALE};

#[derive(Parser)]
#[command(name = "pcc", version, about = "Planar cycle covering bounds for binary MRFs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random grid model
    GenGrid {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SCALE)]
        scale: u64,
        /// Write the rotation system into the file as well
        #[arg(long)]
        with_embedding: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the subgradient optimiser on a model file
    Solve {
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1.0)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MATCHING_SCALE)]
        matching_scale: f64,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Results CSV to append a summary row to
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Record wall-clock times in the trace (makes it non-reproducible)
        #[arg(long)]
        timing: bool,
    },
    /// Exhaustive MAP search for small models
    Oracle { model: PathBuf },
    /// Run many seeded instances in parallel
    Batch {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn labels_string(labels: &[u8]) -> String {
    labels.iter().map(|l| char::from(b'0' + l)).collect()
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::GenGrid {
            rows,
            cols,
            a,
            seed,
            scale,
            with_embedding,
            output,
        } => {
            let spec = InstanceSpec {
                rows,
                cols,
                a,
                seed,
                scale,
            };
            let inst = generate_grid_instance(&spec)?;
            ModelFile::from(inst).write(&output, with_embedding)?;
        }
        Command::Solve {
            model,
            max_iters,
            tol,
            matching_scale,
            trace,
            summary,
            timing,
        } => {
            let file = ModelFile::read(&model)?;
            let options = SolveOptions {
                max_iters,
                tol,
                matching_scale,
                timing,
            };
            let started = Instant::now();
            let result = optimize(&file.model, &file.embedding, options)
                .with_context(|| format!("solving {}", model.display()))?;
            let wall_ms = started.elapsed().as_secs_f64() * 1e3;
            if let Some(path) = &trace {
                write_trace(&result, path)?;
            }
            if let Some(path) = &summary {
                append_results(path, &[RunSummary::from_result(file.instance, &result, wall_ms)])?;
            }
            let status = match result.certificate {
                Certificate::Optimal => "optimal".to_string(),
                Certificate::Gap(g) => format!("gap {g}"),
            };
            println!("upper {}", result.best_upper);
            println!("lower {}", result.best_lower);
            println!("iterations {}", result.iterations());
            println!("status {status}");
            println!("labels {}", labels_string(result.best_assignment.labels()));
        }
        Command::Oracle { model } => {
            let file = ModelFile::read(&model)?;
            let n = file.model.num_nodes();
            if n > MAP_NODE_CAP {
                bail!("oracle refuses models with {n} nodes (limit {MAP_NODE_CAP})");
            }
            let r = brute_force_map(&file.model)?;
            println!("energy {}", r.energy);
            println!("labels {}", labels_string(r.assignment.labels()));
        }
        Command::Batch { spec, out, jobs } => {
            let spec = BatchSpec::read(&spec)?;
            let entries = batch(&spec.instances(), &spec.options(), jobs)?;
            if out.exists() {
                std::fs::remove_file(&out).with_context(|| format!("replacing {}", out.display()))?;
            }
            let mut ok = Vec::new();
            for e in &entries {
                match &e.outcome {
                    Ok(s) => ok.push(s.clone()),
                    Err(err) => log::error!(
                        "{}x{} a={} seed={} failed: {err}",
                        e.spec.rows,
                        e.spec.cols,
                        e.spec.a,
                        e.spec.seed
                    ),
                }
            }
            append_results(&out, &ok)?;
            println!("{AGGREGATE_HEADER}");
            for row in aggregate(&entries) {
                println!("{row}");
            }
        }
    }
    Ok(())
}
