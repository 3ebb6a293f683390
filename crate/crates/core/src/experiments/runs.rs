use std::path::Path;

use crate::error::{Error, Result};
use crate::model::NoiseBundle;
use crate::solver::{solve, BackwardSolution, SolverMode};

use super::config::ExperimentConfig;
use super::csv_out::{emit_csv, format_number};
use super::presets::GChoice;

/// Sample mean and standard deviation (divisor `R − 1`) of per-run values.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl RunStats {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("reps", "need at least 2 runs for a standard deviation"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            values,
            mean,
            std: var.sqrt(),
        })
    }

    pub fn runs(&self) -> usize {
        self.values.len()
    }
}

/// Seed of repetition `r`.
pub fn run_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

/// One solve of `config` with the noise of repetition `r`.
pub fn solve_once(config: &ExperimentConfig, r: usize) -> Result<BackwardSolution> {
    let grid = config.grid()?;
    let seed = run_seed(config.seed, r);
    let noise = match config.backward_seed {
        Some(b) => NoiseBundle::sample_split(seed, b, config.paths, &grid, 1, 1)?,
        None => NoiseBundle::sample(seed, config.paths, &grid, 1, 1)?,
    };
    solve(
        &config.coefficients(),
        &grid,
        &config.domain()?,
        &noise,
        &[config.x0],
        &config.basis(),
        &config.solver(),
    )
    .map_err(|e| e.at(format!("run {r} (seed {seed})")))
}

/// Runs `reps` solves and collects `extract` of each; entry `i` of the
/// result holds statistic `i` across runs.
pub fn repeat_with<F>(config: &ExperimentConfig, reps: usize, extract: F) -> Result<Vec<RunStats>>
where
    F: Fn(&BackwardSolution) -> Vec<f64>,
{
    if reps < 2 {
        return Err(Error::invalid("reps", "need at least 2 runs for a standard deviation"));
    }
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for r in 0..reps {
        let values = extract(&solve_once(config, r)?);
        if columns.is_empty() {
            columns = vec![Vec::with_capacity(reps); values.len()];
        }
        for (c, v) in columns.iter_mut().zip(values) {
            c.push(v);
        }
    }
    columns.into_iter().map(RunStats::from_values).collect()
}

/// Statistics of `Y0` over `reps` repetitions with seeds `seed + r`.
pub fn repeat_runs(config: &ExperimentConfig, reps: usize) -> Result<RunStats> {
    let mut stats = repeat_with(config, reps, |s| vec![s.y0()[0]])?;
    Ok(stats.remove(0))
}

/// Reported value at grid index `n`: `Y0` at `n = 0`, otherwise `y_n`
/// averaged over the paths still alive at `t_n` (NaN if none are).
pub fn reported_value(solution: &BackwardSolution, n: usize) -> f64 {
    if n == 0 {
        solution.y0()[0]
    } else {
        solution.live_mean(n).map_or(f64::NAN, |v| v[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub time_index: usize,
    pub mode: SolverMode,
    pub g_choice: GChoice,
    pub paths: usize,
    pub stats: RunStats,
}

/// Grid indices reported in the table: `N−1`, `N−5` and `0`, where they exist.
pub fn table_time_indices(steps: usize) -> Vec<usize> {
    let mut t: Vec<usize> = [steps.checked_sub(1), steps.checked_sub(5), Some(0)]
        .into_iter()
        .flatten()
        .collect();
    t.sort_unstable();
    t.dedup();
    t
}

/// Every path count × mode × reported time, sorted by `(time_index, mode, M)`.
pub fn run_table(config: &ExperimentConfig) -> Result<Vec<TableRow>> {
    let times = table_time_indices(config.steps);
    let mut rows = Vec::new();
    for m in config.table_m() {
        for mode in SolverMode::ALL {
            let run_config = ExperimentConfig {
                paths: m,
                mode,
                ..config.clone()
            };
            let stats = repeat_with(&run_config, config.reps, |s| {
                times.iter().map(|&n| reported_value(s, n)).collect()
            })?;
            for (&time_index, stats) in times.iter().zip(stats) {
                rows.push(TableRow {
                    time_index,
                    mode,
                    g_choice: config.g_choice,
                    paths: m,
                    stats,
                });
            }
        }
    }
    rows.sort_by_key(|r| (r.time_index, r.mode, r.paths));
    Ok(rows)
}

pub fn write_table(rows: &[TableRow], path: &Path) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.time_index.to_string(),
                r.mode.to_string(),
                r.g_choice.to_string(),
                r.paths.to_string(),
                format_number(r.stats.mean),
                format_number(r.stats.std),
            ]
        })
        .collect();
    emit_csv(&["time_index", "mode", "g_choice", "M", "mean", "std"], &body, path)
}

/// `(N_j, M_j, δ_j)`: `N = round(2·√2^{j−1})`, `M = round(2·√2^{3(j−1)})`,
/// `δ = 50/√2^{j−1}`.
pub fn sweep_point(j: usize) -> Result<(usize, usize, f64)> {
    if j == 0 {
        return Err(Error::invalid("j", "sweep levels start at 1"));
    }
    let s = std::f64::consts::SQRT_2.powi(j as i32 - 1);
    let n = ((2.0 * s).round() as usize).max(1);
    let m = (2.0 * s * s * s).round() as usize;
    Ok((n, m, 50.0 / s))
}

/// Config of sweep level `j`: refined grid, path count and basis on the
/// sweep bounds.
pub fn sweep_config(config: &ExperimentConfig, j: usize) -> Result<ExperimentConfig> {
    let (steps, paths, delta) = sweep_point(j)?;
    Ok(ExperimentConfig {
        steps,
        paths,
        delta,
        basis_lower: config.sweep_basis_lower,
        basis_upper: config.sweep_basis_upper,
        basis_from_paths: false,
        ..config.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub j: usize,
    pub steps: usize,
    pub paths: usize,
    pub delta: f64,
    pub mode: SolverMode,
    pub stats: RunStats,
}

pub fn run_convergence(config: &ExperimentConfig, j_max: usize) -> Result<Vec<SweepRow>> {
    if j_max == 0 {
        return Err(Error::invalid("j_max", "must be at least 1"));
    }
    let mut rows = Vec::new();
    for j in 1..=j_max {
        let level = sweep_config(config, j)?;
        for mode in SolverMode::ALL {
            let stats = repeat_runs(&ExperimentConfig { mode, ..level.clone() }, config.reps)
                .map_err(|e| e.at(format!("sweep level j={j}, {mode}")))?;
            rows.push(SweepRow {
                j,
                steps: level.steps,
                paths: level.paths,
                delta: level.delta,
                mode,
                stats,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.j.to_string(),
                r.steps.to_string(),
                r.paths.to_string(),
                format_number(r.delta),
                r.mode.to_string(),
                format_number(r.stats.mean),
                format_number(r.stats.std),
            ]
        })
        .collect();
    emit_csv(&["j", "N", "M", "delta", "mode", "mean", "std"], &body, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            paths: 256,
            reps: 4,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn stats_match_two_pass_reference() {
        let values = vec![1.5, 2.25, -0.75, 3.0, 10.125];
        let s = RunStats::from_values(values.clone()).unwrap();
        let mean = 16.125 / 5.0;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        assert!((s.mean - mean).abs() < 1e-15);
        assert!((s.std - (ss / 4.0).sqrt()).abs() <= 1e-12 * s.std);
        assert!(RunStats::from_values(vec![1.0]).is_err());
    }

    #[test]
    fn identical_runs_have_zero_spread() {
        let c = small();
        // σ = 0 is not a valid config, so zero the diffusion on the coefficients
        let mut coeffs = c.coefficients();
        coeffs.diffusion = Arc::new(|_, out| out[0] = 0.0);
        coeffs.driver = Arc::new(|_, _, _, _, out| out[0] = 0.0);
        coeffs.terminal = Arc::new(|_, _, out| out[0] = 7.0);
        let coeffs = coeffs.without_noise();
        let grid = c.grid().unwrap();
        let values: Vec<f64> = (0..3)
            .map(|r| {
                let noise = NoiseBundle::sample(run_seed(c.seed, r), c.paths, &grid, 1, 1).unwrap();
                solve(&coeffs, &grid, &c.domain().unwrap(), &noise, &[c.x0], &c.basis(), &c.solver())
                    .unwrap()
                    .y0()[0]
            })
            .collect();
        let s = RunStats::from_values(values).unwrap();
        assert_eq!((s.mean, s.std), (7.0, 0.0));
    }

    #[test]
    fn run_r_equals_standalone_solve() {
        let c = small();
        let stats = repeat_runs(&c, 3).unwrap();
        let grid = c.grid().unwrap();
        let noise = NoiseBundle::sample(c.seed + 2, c.paths, &grid, 1, 1).unwrap();
        let direct = solve(&c.coefficients(), &grid, &c.domain().unwrap(), &noise, &[c.x0], &c.basis(), &c.solver()).unwrap();
        assert_eq!(stats.values[2].to_bits(), direct.y0()[0].to_bits());
        assert!(repeat_runs(&c, 1).is_err());
    }

    #[test]
    fn shared_backward_seed() {
        let c = ExperimentConfig {
            backward_seed: Some(99),
            ..small()
        };
        let a = solve_once(&c, 0).unwrap();
        let b = solve_once(&c, 1).unwrap();
        let grid = c.grid().unwrap();
        let w = NoiseBundle::sample_backward(99, &grid, 1);
        let expect = NoiseBundle::sample_split(c.seed, 99, c.paths, &grid, 1, 1).unwrap();
        assert_eq!(expect.backward_path(), &w[..]);
        assert_ne!(a.y0(), b.y0());
    }

    #[test]
    fn sweep_formula() {
        assert_eq!(sweep_point(1).unwrap(), (2, 2, 50.0));
        let expected = [(2, 2), (3, 6), (4, 16), (6, 45), (8, 128), (11, 362), (16, 1024)];
        for (j, &(n, m)) in (1..=7).zip(&expected) {
            let (nn, mm, delta) = sweep_point(j).unwrap();
            assert_eq!((nn, mm), (n, m), "j={j}");
            assert!((delta - 50.0 / 2f64.sqrt().powi(j as i32 - 1)).abs() < 1e-12);
        }
        assert!((sweep_point(5).unwrap().2 - 12.5).abs() < 1e-12);
        assert!(sweep_point(0).is_err());
    }

    #[test]
    fn table_times() {
        assert_eq!(table_time_indices(20), vec![0, 15, 19]);
        assert_eq!(table_time_indices(3), vec![0, 2]);
        assert_eq!(table_time_indices(1), vec![0]);
    }

    #[test]
    fn table_is_sorted_and_bsde_ignores_g() {
        let c = ExperimentConfig {
            table_m_values: Some(vec![64, 32]),
            reps: 2,
            ..ExperimentConfig::default()
        };
        let rows = run_table(&c).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 3);
        let keys: Vec<_> = rows.iter().map(|r| (r.time_index, r.mode, r.paths)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let other = run_table(&ExperimentConfig {
            g_choice: GChoice::G3,
            ..c.clone()
        })
        .unwrap();
        for (a, b) in rows.iter().zip(&other) {
            if a.mode == SolverMode::Bsde {
                assert_eq!(a.stats, b.stats);
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_table(&rows, &path).unwrap();
        let (header, body) = super::super::read_csv(&path).unwrap();
        assert_eq!(header, ["time_index", "mode", "g_choice", "M", "mean", "std"]);
        assert_eq!(body.len(), 18);
    }
}
