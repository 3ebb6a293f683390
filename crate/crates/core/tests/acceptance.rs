//! End-to-end checks of the solver against closed forms, exact identities
//! and the reference experiment. Prints one PASS/FAIL line per criterion
//! and exits non-zero if a hard criterion fails.

use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use bdsde::experiments::{repeat_runs, repeat_with, sweep_config, ExperimentConfig, GChoice, RunStats};
use bdsde::forward::simulate_exit_indices;
use bdsde::model::{Domain, NoiseBundle, NoiseCoefficient, TimeGrid};
use bdsde::oracles::{forward_contract_oracle, solve_via_transform};
use bdsde::regression::{lsq_oracle, project, HypercubePartition};
use bdsde::solver::{solve, strong_error, SolverConfig, SolverMode};

const ORACLE_Y0: f64 = 14.712_859_075_707_911;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reference() -> ExperimentConfig {
    ExperimentConfig::default()
}

// 1. bsde mode, M = 32768, 50 runs: |mean − u(0,100)| ≤ 0.05, std ∈ [0.02, 0.15]
fn closed_form_value() -> Outcome {
    let c = ExperimentConfig {
        mode: SolverMode::Bsde,
        ..reference()
    };
    let s = repeat_runs(&c, 50).expect("bsde runs");
    let diff = (s.mean - ORACLE_Y0).abs();
    outcome(
        diff <= 0.05 && (0.02..=0.15).contains(&s.std),
        format!("mean {:.5} (|diff| {diff:.5} <= 0.05), std {:.5} in [0.02, 0.15]", s.mean, s.std),
    )
}

// 2. f = 0, g = 0.5, Φ = 10 on the whole space: y_n = 10 + 0.5·(W_T − W_{t_n})
fn backward_noise_exactness() -> Outcome {
    let c = 0.5;
    let mut coeffs = reference().coefficients();
    coeffs.driver = Arc::new(|_, _, _, _, out| out[0] = 0.0);
    coeffs.terminal = Arc::new(|_, _, out| out[0] = 10.0);
    coeffs.noise = NoiseCoefficient::TimeOnly(Arc::new(move |_, out| out[0] = c));
    let grid = TimeGrid::new(0.25, 20).unwrap();
    let dom = Domain::whole_space(1).unwrap();
    let mut worst: f64 = 0.0;
    for (seed, paths) in [(5, 2), (6, 17), (7, 1000)] {
        let noise = NoiseBundle::sample(seed, paths, &grid, 1, 1).unwrap();
        let cfg = SolverConfig {
            mode: SolverMode::BdsdeFixedHorizon,
            ..SolverConfig::default()
        };
        let sol = solve(&coeffs, &grid, &dom, &noise, &[100.0], &reference().basis(), &cfg).unwrap();
        let w = noise.backward_path();
        for n in 0..=20 {
            let tail: f64 = w[n..].iter().sum();
            for m in 0..paths {
                worst = worst.max((sol.y_realized(n, m)[0] - (10.0 + c * tail)).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.3e} <= 1e-12"))
}

// 3. 100 random instances, M ≤ 64, ≤ 8 cells: projection = least squares
fn regression_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let cells = rng.gen_range(1..=8usize);
        let delta = rng.gen_range(0.5..2.0);
        let lower = rng.gen_range(-5.0..5.0);
        let upper = lower + delta * cells as f64;
        let partition = Arc::new(HypercubePartition::new(vec![lower], vec![upper], delta).unwrap());
        let m = rng.gen_range(1..=64usize);
        let points: Vec<f64> = (0..m).map(|_| rng.gen_range(lower - 1.0..upper + 1.0)).collect();
        let targets: Vec<f64> = (0..m).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let fast = project(&partition, &points, &targets, 1, None).unwrap();
        let slow = lsq_oracle(&partition, &points, &targets, 1, None).unwrap();
        for (a, b) in fast.function.coefficients().iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max coefficient gap {worst:.3e} <= 1e-10"))
}

// 4. g(t) = 0.5t: direct solve and transformed BSDE agree in Y0
fn transform_round_trip() -> Outcome {
    let c = reference();
    let mut coeffs = c.coefficients();
    coeffs.noise = NoiseCoefficient::TimeOnly(Arc::new(|t, out| out[0] = 0.5 * t));
    let grid = c.grid().unwrap();
    let noise = NoiseBundle::sample(11, 32768, &grid, 1, 1).unwrap();
    let cfg = SolverConfig {
        mode: SolverMode::BdsdeFixedHorizon,
        ..SolverConfig::default()
    };
    let dom = c.domain().unwrap();
    let direct = solve(&coeffs, &grid, &dom, &noise, &[c.x0], &c.basis(), &cfg).unwrap();
    let (bsde, _) = solve_via_transform(&coeffs, &grid, &dom, &noise, &[c.x0], &c.basis(), &cfg).unwrap();
    let gap = (direct.y0()[0] - bsde.y0()[0]).abs();
    outcome(
        gap <= 1e-10,
        format!("Y0 {:.10} vs {:.10}, gap {gap:.3e} <= 1e-10", direct.y0()[0], bsde.y0()[0]),
    )
}

// 5. `table` with different thread counts writes identical bytes
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("table.json");
    std::fs::write(&config, r#"{"table_m_values": [128, 512, 2048], "reps": 3, "g_choice": "g1"}"#).unwrap();
    let mut files = Vec::new();
    for threads in [1, 4] {
        let out = dir.path().join(format!("table_{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_bdsde"))
            .args(["table", "--seed", "42", "--threads", &threads.to_string()])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .expect("run binary");
        if !status.status.success() {
            return outcome(false, format!("table exited with {}", status.status));
        }
        files.push(std::fs::read(&out).unwrap());
    }
    let rows = files[0].iter().filter(|&&b| b == b'\n').count();
    outcome(
        files[0] == files[1],
        format!("{} bytes, {rows} lines, threads 1 vs 4 identical", files[0].len()),
    )
}

fn t0_stats(g: GChoice, mode: SolverMode) -> RunStats {
    let c = ExperimentConfig {
        g_choice: g,
        mode,
        ..reference()
    };
    repeat_with(&c, 50, |s| vec![s.y0()[0]]).unwrap().remove(0)
}

// 6. random-terminal and fixed-horizon means at t_0 within 3·(std_rt + std_fh)
fn random_terminal_consistency(g1_rt: &mut Option<RunStats>) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [GChoice::G1, GChoice::G2, GChoice::G3] {
        let rt = t0_stats(g, SolverMode::BdsdeRandomTerminal);
        let fh = t0_stats(g, SolverMode::BdsdeFixedHorizon);
        let gap = (rt.mean - fh.mean).abs();
        let bound = 3.0 * (rt.std + fh.std);
        pass &= gap <= bound;
        parts.push(format!(
            "{g}: rt {:.4}({:.4}) fh {:.4}({:.4}) gap {gap:.2e} <= {bound:.3}",
            rt.mean, rt.std, fh.mean, fh.std
        ));
        if g == GChoice::G1 {
            *g1_rt = Some(rt);
        }
    }
    outcome(pass, parts.join("; "))
}

// 7. the boundary shift moves the mean exit time towards a fine-grid reference
fn boundary_shift() -> Outcome {
    let coeffs = reference().market().coefficients(GChoice::None, Default::default());
    let dom = Domain::axis_box(vec![90.0], vec![110.0]).unwrap();
    let paths = 100_000;
    let mean_exit = |steps: usize, shift: bool, seed: u64| {
        let grid = TimeGrid::new(0.25, steps).unwrap();
        let idx = simulate_exit_indices(&coeffs, &grid, &dom, seed, paths, &[100.0], shift).unwrap();
        idx.iter().map(|&i| grid.time(i)).sum::<f64>() / paths as f64
    };
    let reference = mean_exit(2560, false, 77);
    let shifted = mean_exit(20, true, 78);
    let unshifted = mean_exit(20, false, 78);
    let (es, eu) = ((shifted - reference).abs(), (unshifted - reference).abs());
    outcome(
        es < eu,
        format!("reference {reference:.5}, shifted {shifted:.5} (err {es:.5}) < unshifted {unshifted:.5} (err {eu:.5})"),
    )
}

// 8. linear oracle: strong error at j=5 below j=1; |Y0 − u(0,100)| non-increasing over j = 1,3,5 up to one inversion
fn refinement_trend() -> Outcome {
    let base = ExperimentConfig {
        mode: SolverMode::Bsde,
        g_choice: GChoice::None,
        ..reference()
    };
    let m = base.market();
    let oracle = forward_contract_oracle(m.strike, m.r, m.horizon, move |x| m.sigma * x);
    let reps = 50;
    let mut errors = Vec::new();
    let mut gaps = Vec::new();
    for j in [1, 3, 5] {
        let c = sweep_config(&base, j).unwrap();
        let stats = repeat_with(&c, reps, |s| {
            vec![
                s.y0()[0],
                strong_error(s, |t, x, out| (oracle.u)(t, x, out), |t, x, out| (oracle.z)(t, x, out)),
            ]
        })
        .unwrap();
        gaps.push((stats[0].mean - ORACLE_Y0).abs());
        errors.push(stats[1].mean);
    }
    let inversions = gaps.windows(2).filter(|w| w[1] > w[0]).count();
    outcome(
        errors[2] < errors[0] && inversions <= 1,
        format!(
            "strong error j=1,3,5: {:.4}, {:.4}, {:.4}; |Y0 - u|: {:.4}, {:.4}, {:.4} ({inversions} inversion(s))",
            errors[0], errors[1], errors[2], gaps[0], gaps[1], gaps[2]
        ),
    )
}

// 9. best-effort: g1 random-terminal mean at t_0 within 1.0 of 13.458
fn published_band(g1_rt: Option<RunStats>) -> Outcome {
    let s = g1_rt.unwrap_or_else(|| t0_stats(GChoice::G1, SolverMode::BdsdeRandomTerminal));
    let gap = (s.mean - 13.458).abs();
    outcome(gap <= 1.0, format!("mean {:.4} ({:.4}), |diff| {gap:.4} <= 1.0", s.mean, s.std))
}

type Check = Box<dyn FnOnce(&mut Option<RunStats>) -> Outcome>;

fn main() {
    let mut g1_rt = None;
    let criteria: Vec<(usize, &str, bool, Check)> = vec![
        (1, "closed-form value", true, Box::new(|_| closed_form_value())),
        (2, "backward-noise exactness", true, Box::new(|_| backward_noise_exactness())),
        (3, "regression oracle equivalence", true, Box::new(|_| regression_oracle())),
        (4, "transformation round-trip", true, Box::new(|_| transform_round_trip())),
        (5, "determinism across thread counts", true, Box::new(|_| determinism())),
        (6, "random-terminal consistency", true, Box::new(random_terminal_consistency)),
        (7, "boundary-shift effectiveness", true, Box::new(|_| boundary_shift())),
        (8, "refinement trend", true, Box::new(|_| refinement_trend())),
        (9, "reference table band (soft)", false, Box::new(|g: &mut Option<RunStats>| published_band(g.take()))),
    ];
    let mut hard_failures = 0;
    for (id, name, hard, check) in criteria {
        let start = Instant::now();
        let o = check(&mut g1_rt);
        let verdict = if o.pass { "PASS" } else if hard { "FAIL" } else { "FAIL (soft)" };
        println!(
            "criterion {id} [{name}]: {verdict} — {} ({:.1}s)",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if hard && !o.pass {
            hard_failures += 1;
        }
    }
    if hard_failures > 0 {
        println!("{hard_failures} acceptance criterion/criteria failed");
        std::process::exit(1);
    }
    println!("all hard acceptance criteria passed");
}
