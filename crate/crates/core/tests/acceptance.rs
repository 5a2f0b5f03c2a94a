// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails. Runs without the libtest harness so the lines always reach
// stdout in order.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcc::embedding::{cycle, grid, PlanarEmbedding};
use pcc::harness::{generate_grid_instance, InstanceSpec};
use pcc::ising::ground_state;
use pcc::matching::{min_weight_perfect_matching, WeightedMatchGraph};
use pcc::model::{scale_to_integer, BinaryMRF, SymmetricIsing};
use pcc::oracle::{brute_force_map, brute_force_mwpm};
use pcc::pcc::{build_pcc, init_params, lower_bound, optimize, PccOptimizer, SolveOptions, StepOutcome};
use pcc::Error;

type Outcome = Result<String, String>;
type Shape = (Vec<(usize, usize)>, PlanarEmbedding, usize);
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn grid_instance(rows: usize, cols: usize, a: f64, seed: u64) -> (BinaryMRF, PlanarEmbedding) {
    let inst = generate_grid_instance(&InstanceSpec::new(rows, cols, a, seed)).expect("valid spec");
    (inst.model, inst.embedding)
}

/// Cycle with `U(-1, 1)` couplings and `U(-a, a)` unaries, scaled like the
/// grid generator.
fn cycle_instance(len: usize, a: f64, scale: f64, rng: &mut ChaCha8Rng) -> (BinaryMRF, PlanarEmbedding) {
    let (edges, emb) = cycle(len);
    let triples: Vec<_> = edges.iter().map(|&(i, j)| (i, j, rng.gen_range(-1.0..1.0))).collect();
    let unary = (0..len).map(|_| rng.gen_range(-a..a)).collect();
    let raw = BinaryMRF::from_triples(len, &triples, unary).unwrap();
    (scale_to_integer(&raw, scale).unwrap(), emb)
}

fn matching_exactness() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut compared, mut infeasible) = (0, 0);
    let mut trial = 0u64;
    while compared < 240 {
        trial += 1;
        let n = 2 * rng.gen_range(1..=6);
        let density = rng.gen_range(0.25..1.0);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(density) {
                    edges.push((u, v, rng.gen_range(-20..=20)));
                }
            }
        }
        let g = WeightedMatchGraph::new(n, edges).map_err(|e| e.to_string())?;
        match (min_weight_perfect_matching(&g), brute_force_mwpm(&g)) {
            (Ok(m), Ok(e)) => {
                check(m.total_weight() == e.total_weight(), || {
                    format!(
                        "graph {trial}: blossom {} vs oracle {}",
                        m.total_weight(),
                        e.total_weight()
                    )
                })?;
                compared += 1;
            }
            (Err(Error::NoPerfectMatching), Err(Error::NoPerfectMatching)) => infeasible += 1,
            (a, b) => return Err(format!("graph {trial}: blossom {a:?} vs oracle {b:?}")),
        }
    }
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(10), || format!("took {}", secs(elapsed)))?;
    Ok(format!(
        "{compared} weights exact, {infeasible} infeasible agreed, {}",
        secs(elapsed)
    ))
}

fn ising_exactness() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut shapes: Vec<Shape> = Vec::new();
    for rows in 1..=3 {
        for cols in 1..=4 {
            if rows * cols >= 2 {
                let (e, emb) = grid(rows, cols);
                shapes.push((e, emb, rows * cols));
            }
        }
    }
    for len in 3..=10 {
        let (e, emb) = cycle(len);
        shapes.push((e, emb, len));
    }
    let mut count = 0;
    for round in 0..12 {
        for (edges, emb, n) in &shapes {
            let triples: Vec<_> = edges
                .iter()
                .map(|&(i, j)| (i, j, rng.gen_range(-10..=10) as f64))
                .collect();
            let ising = SymmetricIsing::from_triples(*n, &triples).unwrap();
            let gs = ground_state(&ising, emb).map_err(|e| e.to_string())?;
            let model = BinaryMRF::from_triples(*n, &triples, vec![0.0; *n]).unwrap();
            let oracle = brute_force_map(&model).unwrap();
            check(gs.energy as f64 == oracle.energy, || {
                format!(
                    "round {round}, {n} nodes: ground state {} vs oracle {}",
                    gs.energy, oracle.energy
                )
            })?;
            check(model.energy(&gs.labels).unwrap() == oracle.energy, || {
                format!("round {round}, {n} nodes: returned labels do not attain the reported energy")
            })?;
            count += 1;
        }
    }
    let elapsed = started.elapsed();
    check(count >= 200, || format!("only {count} models"))?;
    check(elapsed < Duration::from_secs(30), || format!("took {}", secs(elapsed)))?;
    Ok(format!("{count} models exact, {}", secs(elapsed)))
}

fn lower_bound_validity() -> Outcome {
    let options = SolveOptions {
        max_iters: 100,
        tol: 0.0,
        ..SolveOptions::default()
    };
    let mut iterates = 0;
    for a in [0.2, 0.8, 3.2] {
        for seed in 0..20 {
            let (model, emb) = grid_instance(4, 4, a, seed);
            let e_map = brute_force_map(&model).unwrap().energy;
            let result = optimize(&model, &emb, options).map_err(|e| e.to_string())?;
            for r in &result.trace.records {
                check(r.lower_bound <= e_map + 1e-6, || {
                    format!(
                        "a={a} seed={seed} iter {}: lower {} > E_MAP {e_map}",
                        r.iter, r.lower_bound
                    )
                })?;
                iterates += 1;
            }
        }
    }
    Ok(format!("{iterates} iterates over 60 grids, zero violations"))
}

fn unary_free_tightness() -> Outcome {
    let mut count = 0;
    for seed in 0..50u64 {
        let rows = 2 + (seed % 3) as usize;
        let cols = 2 + (seed / 3 % 3) as usize;
        let (model, emb) = grid_instance(rows, cols, 0.0, seed);
        let pcc = build_pcc(&model, &emb).map_err(|e| e.to_string())?;
        let lb = lower_bound(&model, &pcc, &init_params(&model, &pcc)).map_err(|e| e.to_string())?;
        let e_map = brute_force_map(&model).unwrap().energy;
        check(lb.value == e_map, || {
            format!("{rows}x{cols} seed {seed}: bound {} vs E_MAP {e_map}", lb.value)
        })?;
        count += 1;
    }
    Ok(format!("{count} grids, bound equals E_MAP at initialisation"))
}

fn single_cycle_tightness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let options = SolveOptions {
        max_iters: 500,
        ..SolveOptions::default()
    };
    let mut closed = 0;
    for _ in 0..100 {
        let len = rng.gen_range(3..=8);
        let (model, emb) = cycle_instance(len, 0.8, 500.0, &mut rng);
        let result = optimize(&model, &emb, options).map_err(|e| e.to_string())?;
        if result.gap() < 1.0 {
            closed += 1;
        }
    }
    check(closed >= 90, || format!("gap closed on {closed}/100 cycles"))?;
    Ok(format!("gap < 1 on {closed}/100 cycles"))
}

fn structural_invariant() -> Outcome {
    let mut count = 0;
    for rows in 2..=7 {
        for cols in 2..=7 {
            let (model, emb) = grid_instance(rows, cols, 0.8, 0);
            let pcc = build_pcc(&model, &emb).map_err(|e| e.to_string())?;
            let v = rows * cols;
            let e = model.edges().len();
            let f = emb.faces().unwrap().len();
            check(pcc.num_vertices() == v + f && pcc.num_edges() == 3 * e, || {
                format!(
                    "{rows}x{cols}: {} nodes / {} edges, expected {} / {}",
                    pcc.num_vertices(),
                    pcc.num_edges(),
                    v + f,
                    3 * e
                )
            })?;
            if (rows, cols) == (3, 3) {
                check(pcc.num_vertices() == 14 && pcc.num_edges() == 36, || {
                    "3x3 is not 14/36".into()
                })?;
            }
            count += 1;
        }
    }
    Ok(format!("{count} grids have V+F nodes and 3E edges, 3x3 gives 14/36"))
}

fn sum_constraint() -> Outcome {
    // Weak unaries keep the gap open long enough for a full-length run.
    let (model, emb) = grid_instance(16, 16, 0.2, 9);
    let options = SolveOptions {
        max_iters: 1000,
        tol: 0.0,
        ..SolveOptions::default()
    };
    let mut opt = PccOptimizer::new(&model, &emb, options).map_err(|e| e.to_string())?;
    let mut worst = opt.params().sum_violation(&model, opt.pcc());
    let mut iters = 0;
    for _ in 0..1000 {
        let outcome = opt.step().map_err(|e| e.to_string())?;
        iters += 1;
        worst = worst.max(opt.params().sum_violation(&model, opt.pcc()));
        if outcome != StepOutcome::Continue {
            break;
        }
    }
    check(worst <= 1e-8, || format!("relative violation {worst:e}"))?;
    check(iters == 1000, || format!("run stopped after {iters} iterations"))?;
    Ok(format!("{iters} iterations, worst relative violation {worst:e}"))
}

fn certificate_soundness() -> Outcome {
    let (mut optimal, mut runs) = (0, 0);
    for (rows, cols) in [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4)] {
        for a in [0.2, 0.8, 3.2] {
            for seed in 0..8 {
                let (model, emb) = grid_instance(rows, cols, a, seed);
                let result = optimize(&model, &emb, SolveOptions::default()).map_err(|e| e.to_string())?;
                runs += 1;
                if result.is_optimal() {
                    let e_map = brute_force_map(&model).unwrap().energy;
                    let decoded = model.energy(&result.best_assignment).unwrap();
                    check(decoded == e_map, || {
                        format!("{rows}x{cols} a={a} seed={seed}: certified {decoded} but E_MAP is {e_map}")
                    })?;
                    optimal += 1;
                }
            }
        }
    }
    check(optimal > 0, || "no run was certified".into())?;
    Ok(format!("{optimal}/{runs} certified runs all match E_MAP"))
}

fn convergence_budget() -> Outcome {
    let options = SolveOptions {
        max_iters: 2000,
        ..SolveOptions::default()
    };
    let mut summary = Vec::new();
    let mut failed = Vec::new();
    for (a, needed) in [(3.2, 9), (0.2, 7)] {
        let mut converged = 0;
        let mut slowest = Duration::ZERO;
        for seed in 0..10 {
            let (model, emb) = grid_instance(16, 16, a, seed);
            let started = Instant::now();
            let result = optimize(&model, &emb, options).map_err(|e| e.to_string())?;
            let elapsed = started.elapsed();
            slowest = slowest.max(elapsed);
            if result.gap() < 1.0 {
                converged += 1;
            }
            if elapsed >= Duration::from_secs(60) {
                failed.push(format!("a={a} seed={seed} took {}", secs(elapsed)));
            }
        }
        if converged < needed {
            failed.push(format!("a={a}: {converged}/10 converged, need {needed}"));
        }
        summary.push(format!("a={a}: {converged}/10 (slowest {})", secs(slowest)));
    }
    check(failed.is_empty(), || failed.join("; "))?;
    Ok(summary.join(", "))
}

fn determinism() -> Outcome {
    let options = SolveOptions {
        max_iters: 300,
        tol: 0.0,
        ..SolveOptions::default()
    };
    let mut cases = 0;
    for (rows, cols, a, seed) in [(8, 8, 0.8, 3), (5, 7, 3.2, 11), (6, 6, 0.2, 4)] {
        let (model, emb) = grid_instance(rows, cols, a, seed);
        let traces: Vec<Vec<u8>> = (0..2)
            .map(|_| {
                let mut buf = Vec::new();
                optimize(&model, &emb, options)
                    .unwrap()
                    .trace
                    .write_csv(&mut buf)
                    .unwrap();
                buf
            })
            .collect();
        check(traces[0] == traces[1], || {
            format!("{rows}x{cols} a={a} seed={seed}: traces differ")
        })?;
        check(traces[0].len() > 100, || "trace is suspiciously short".into())?;
        cases += 1;
    }
    Ok(format!("{cases} repeated runs produced byte-identical traces"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("matching exactness", matching_exactness),
        ("planar Ising exactness", ising_exactness),
        ("lower-bound validity", lower_bound_validity),
        ("unary-free tightness", unary_free_tightness),
        ("single-cycle tightness", single_cycle_tightness),
        ("structural invariant", structural_invariant),
        ("sum-constraint conservation", sum_constraint),
        ("certificate soundness", certificate_soundness),
        ("convergence budget", convergence_budget),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (idx, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let took = secs(started.elapsed());
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{took}]", idx + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL {name}: {detail} [{took}]", idx + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
