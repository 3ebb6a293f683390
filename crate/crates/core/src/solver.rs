//! Backward induction for the discrete BDSDE.
//!
//! At each step `n = N−1, …, 0` the `z` regression is explicit and the `y`
//! regression is resolved with a fixed number of Picard sweeps. Driver and
//! noise terms are switched off for paths that have already exited; those
//! paths keep contributing their frozen terminal value to the `y`
//! regression.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{emit_csv, format_number};
use crate::forward::{simulate_stopped, PathSet};
use crate::model::{CoefficientSet, Domain, NoiseBundle, TimeGrid};
use crate::regression::{project_cells, CellFunction, HypercubePartition};

/// Which equation is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    /// `g` forced to zero, fixed horizon.
    Bsde,
    /// Backward noise on, exits ignored.
    BdsdeFixedHorizon,
    /// Backward noise on, terminal time is the exit time.
    BdsdeRandomTerminal,
}

impl SolverMode {
    pub const ALL: [SolverMode; 3] = [
        SolverMode::Bsde,
        SolverMode::BdsdeFixedHorizon,
        SolverMode::BdsdeRandomTerminal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverMode::Bsde => "bsde",
            SolverMode::BdsdeFixedHorizon => "bdsde-fixed-horizon",
            SolverMode::BdsdeRandomTerminal => "bdsde-random-terminal",
        }
    }

    /// Coefficients and domain actually used in this mode.
    pub fn apply(self, coeffs: &CoefficientSet, domain: &Domain) -> Result<(CoefficientSet, Domain)> {
        Ok(match self {
            SolverMode::Bsde => (coeffs.without_noise(), Domain::whole_space(domain.dim())?),
            SolverMode::BdsdeFixedHorizon => (coeffs.clone(), Domain::whole_space(domain.dim())?),
            SolverMode::BdsdeRandomTerminal => (coeffs.clone(), domain.clone()),
        })
    }
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub picard_iterations: usize,
    pub mode: SolverMode,
    /// Shrink the domain by the boundary shift before testing exits.
    pub shift_enabled: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            picard_iterations: 3,
            mode: SolverMode::BdsdeRandomTerminal,
            shift_enabled: true,
        }
    }
}

/// Where the hypercube basis lives.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisConfig {
    Fixed {
        lower: Vec<f64>,
        upper: Vec<f64>,
        delta: f64,
    },
    /// Spans the extrema of the simulated paths.
    FromPaths { delta: f64 },
}

impl BasisConfig {
    pub fn partition(&self, paths: &PathSet) -> Result<HypercubePartition> {
        match self {
            BasisConfig::Fixed {
                lower,
                upper,
                delta,
            } => HypercubePartition::new(lower.clone(), upper.clone(), *delta),
            BasisConfig::FromPaths { delta } => {
                let (lo, hi) = paths.bounds();
                HypercubePartition::covering(lo, hi, *delta)
            }
        }
    }
}

/// Per-step regression diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub n: usize,
    pub z_empty_cells: usize,
    pub y_empty_cells: usize,
    /// `sup |y⁽ⁱ⁾ − y⁽ⁱ⁻¹⁾|` over cells for `i = 1..=I`.
    pub picard_residuals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BackwardSolution {
    paths: PathSet,
    k: usize,
    y_funcs: Vec<CellFunction>,
    z_funcs: Vec<CellFunction>,
    y_realized: Vec<f64>,
    z_realized: Vec<f64>,
    y0: Vec<f64>,
    z0: Vec<f64>,
    diagnostics: Vec<StepDiagnostics>,
}

impl BackwardSolution {
    pub fn paths(&self) -> &PathSet {
        &self.paths
    }

    pub fn grid(&self) -> &TimeGrid {
        self.paths.grid()
    }

    /// `Y` at the start point.
    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    /// `Z` at the start point, `k×d`.
    pub fn z0(&self) -> &[f64] {
        &self.z0
    }

    /// Regression function `y_n`, `n = 0..=N`.
    pub fn y_function(&self, n: usize) -> &CellFunction {
        &self.y_funcs[n]
    }

    /// Regression function `z_n`, `n = 0..N`.
    pub fn z_function(&self, n: usize) -> &CellFunction {
        &self.z_funcs[n]
    }

    /// Realised `y_n` on path `m`.
    pub fn y_realized(&self, n: usize, m: usize) -> &[f64] {
        let at = (n * self.paths.len() + m) * self.k;
        &self.y_realized[at..at + self.k]
    }

    /// Realised `z_n` on path `m`.
    pub fn z_realized(&self, n: usize, m: usize) -> &[f64] {
        let w = self.k * self.paths.d();
        let at = (n * self.paths.len() + m) * w;
        &self.z_realized[at..at + w]
    }

    /// Diagnostics ordered by ascending `n`.
    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    pub fn total_empty_cells(&self) -> usize {
        self.diagnostics
            .iter()
            .map(|s| s.y_empty_cells + s.z_empty_cells)
            .sum()
    }

    /// Mean of realised `y_n` over paths still alive at `t_n`; `None` when
    /// every path has exited.
    pub fn live_mean(&self, n: usize) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.k];
        let mut count = 0usize;
        for m in 0..self.paths.len() {
            if self.paths.is_live(m, n) {
                count += 1;
                for (s, v) in sum.iter_mut().zip(self.y_realized(n, m)) {
                    *s += v;
                }
            }
        }
        (count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect())
    }

    /// CSV with header `n,picard_iter,residual,empty_cells`.
    pub fn write_diagnostics_csv(&self, path: &Path) -> Result<()> {
        let mut rows = Vec::new();
        for s in &self.diagnostics {
            if s.picard_residuals.is_empty() {
                rows.push(vec![s.n.to_string(), "0".into(), "0".into(), s.y_empty_cells.to_string()]);
            }
            for (i, r) in s.picard_residuals.iter().enumerate() {
                rows.push(vec![
                    s.n.to_string(),
                    (i + 1).to_string(),
                    format_number(*r),
                    s.y_empty_cells.to_string(),
                ]);
            }
        }
        emit_csv(&["n", "picard_iter", "residual", "empty_cells"], &rows, path)
    }
}

/// `y_N^m = Φ(exit_time^m, exit_state^m)`, flattened `M×k`.
pub fn terminal_values(paths: &PathSet, coeffs: &CoefficientSet) -> Result<Vec<f64>> {
    let k = coeffs.k;
    let mut out = vec![0.0; paths.len() * k];
    fill_rows(&mut out, k, 0, |m, row, _| {
        coeffs
            .terminal(paths.exit_time(m), paths.exit_state(m), row)
            .map_err(|e| e.at(format!("terminal value of path {m}")))
    })?;
    Ok(out)
}

const ROWS_PER_TASK: usize = 512;

/// Fills `out` row by row in parallel blocks, handing each block a scratch
/// buffer of `scratch_len` values. Reports the error of the lowest failing
/// row.
fn fill_rows<F>(out: &mut [f64], width: usize, scratch_len: usize, f: F) -> Result<()>
where
    F: Fn(usize, &mut [f64], &mut [f64]) -> Result<()> + Sync,
{
    match out
        .par_chunks_mut(width * ROWS_PER_TASK)
        .enumerate()
        .find_map_first(|(b, block)| {
            let mut scratch = vec![0.0; scratch_len];
            block
                .chunks_mut(width)
                .enumerate()
                .find_map(|(r, row)| f(b * ROWS_PER_TASK + r, row, &mut scratch).err())
        }) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Simulates the stopped forward paths and runs the backward scheme.
pub fn solve(
    coeffs: &CoefficientSet,
    grid: &TimeGrid,
    domain: &Domain,
    noise: &NoiseBundle,
    x0: &[f64],
    basis: &BasisConfig,
    config: &SolverConfig,
) -> Result<BackwardSolution> {
    let (coeffs, domain) = config.mode.apply(coeffs, domain)?;
    let shift = config.shift_enabled && config.mode == SolverMode::BdsdeRandomTerminal;
    let paths = simulate_stopped(&coeffs, grid, &domain, noise, x0, shift)?;
    let terminal = terminal_values(&paths, &coeffs)?;
    backward_induction(&coeffs, paths, noise, basis, config.picard_iterations, terminal)
}

/// Backward scheme on already simulated paths with explicit terminal values
/// (`M×k`). The coefficient set is used as given.
pub fn backward_induction(
    coeffs: &CoefficientSet,
    paths: PathSet,
    noise: &NoiseBundle,
    basis: &BasisConfig,
    picard_iterations: usize,
    terminal: Vec<f64>,
) -> Result<BackwardSolution> {
    backward_induction_with_levels(coeffs, paths, noise, basis, picard_iterations, terminal, None)
}

/// [`backward_induction`] with reference levels `c_n` (`(N+1)×k`) that do
/// not depend on the forward noise. `c_n` is the Picard starting point at
/// step `n` and is subtracted from the z-regression target as a control
/// variate (`E[c_n·ΔB_n | X_n] = 0`). `None` means all zero.
pub fn backward_induction_with_levels(
    coeffs: &CoefficientSet,
    paths: PathSet,
    noise: &NoiseBundle,
    basis: &BasisConfig,
    picard_iterations: usize,
    terminal: Vec<f64>,
    levels: Option<&[f64]>,
) -> Result<BackwardSolution> {
    let (k, d, l) = (coeffs.k, coeffs.d, coeffs.l);
    let grid = paths.grid().clone();
    let steps = grid.steps();
    let h = grid.h();
    let count = paths.len();
    if terminal.len() != count * k {
        return Err(Error::Shape(format!(
            "{} terminal values for {count} paths of width {k}",
            terminal.len()
        )));
    }
    if noise.paths() != count || noise.steps() != steps || noise.d() != d {
        return Err(Error::Shape("noise bundle does not match the path set".into()));
    }
    if coeffs.has_noise() && noise.l() != l {
        return Err(Error::Shape(format!(
            "backward noise has dimension {}, coefficients expect l={l}",
            noise.l()
        )));
    }
    if let Some(levels) = levels {
        if levels.len() != (steps + 1) * k {
            return Err(Error::Shape(format!("{} reference levels for {} steps of width {k}", levels.len(), steps)));
        }
    }
    let level = |n: usize| -> &[f64] {
        match levels {
            Some(c) => &c[n * k..(n + 1) * k],
            None => &[],
        }
    };
    let partition = Arc::new(basis.partition(&paths)?);
    if partition.dim() != d {
        return Err(Error::Shape(format!("basis of dimension {} for d={d}", partition.dim())));
    }
    let kd = k * d;
    let cells_at = |n: usize| -> Vec<Option<usize>> {
        (0..count).map(|m| partition.cell_of(paths.state(m, n))).collect()
    };

    let mut y_realized = vec![0.0; (steps + 1) * count * k];
    let mut z_realized = vec![0.0; steps * count * kd];
    y_realized[steps * count * k..].copy_from_slice(&terminal);

    let mut cells_next = cells_at(steps);
    let mut y_funcs = Vec::with_capacity(steps + 1);
    let mut z_funcs = Vec::with_capacity(steps);
    y_funcs.push(project_cells(&partition, &cells_next, &terminal, k, None)?.function);
    let mut z_next = CellFunction::zero(Arc::clone(&partition), kd);
    let mut diagnostics = Vec::with_capacity(steps);

    let mut noise_term = vec![0.0; count * k];
    let mut z_targets = vec![0.0; count * kd];
    let mut base = vec![0.0; count * k];
    let mut y_targets = vec![0.0; count * k];

    for n in (0..steps).rev() {
        let t_n = grid.time(n);
        let t_next = grid.time(n + 1);
        let cells = cells_at(n);
        let live: Vec<bool> = (0..count).map(|m| paths.is_live(m, n)).collect();
        let (y_done, y_rest) = y_realized.split_at_mut((n + 1) * count * k);
        let y_next = &y_rest[..count * k];
        let dw = noise.backward(n);

        // Σ_j g_j(t_{n+1}, X_{n+1}, y_{n+1}, z_{n+1}(X_{n+1}))·ΔW_{n,j}
        if coeffs.has_noise() {
            fill_rows(&mut noise_term, k, k * l, |m, out, g| {
                out.fill(0.0);
                if !live[m] {
                    return Ok(());
                }
                coeffs
                    .noise(
                        t_next,
                        paths.state(m, n + 1),
                        &y_next[m * k..(m + 1) * k],
                        z_next.cell_value(cells_next[m]),
                        g,
                    )
                    .map_err(|e| e.at(format!("g at n={n}, path {m}")))?;
                for (j1, o) in out.iter_mut().enumerate() {
                    *o = g[j1 * l..(j1 + 1) * l].iter().zip(dw).map(|(a, b)| a * b).sum();
                }
                Ok(())
            })?;
        } else {
            noise_term.fill(0.0);
        }

        // explicit z regression
        fill_rows(&mut z_targets, kd, 0, |m, out, _| {
            if !live[m] {
                out.fill(0.0);
                return Ok(());
            }
            let db = noise.forward(m, n);
            let c = level(n);
            for j1 in 0..k {
                let mut v = y_next[m * k + j1] + noise_term[m * k + j1];
                if !c.is_empty() {
                    v -= c[j1];
                }
                for j2 in 0..d {
                    out[j1 * d + j2] = v * db[j2] / h;
                }
            }
            Ok(())
        })?;
        let z_proj = project_cells(&partition, &cells, &z_targets, kd, Some(&live))
            .map_err(|e| e.at(format!("z regression at n={n}")))?;
        let z_fn = z_proj.function;

        for m in 0..count {
            let row = m * k..(m + 1) * k;
            if live[m] {
                for ((b, y), g) in base[row.clone()].iter_mut().zip(&y_next[row.clone()]).zip(&noise_term[row.clone()]) {
                    *b = y + g;
                }
            } else {
                base[row.clone()].copy_from_slice(&terminal[row]);
            }
        }

        // implicit y regression by Picard sweeps from y⁽⁰⁾ = c_n
        let mut y_fn = match levels {
            Some(_) => CellFunction::from_coefficients(
                Arc::clone(&partition),
                k,
                level(n).repeat(partition.total_cells()),
            )?,
            None => CellFunction::zero(Arc::clone(&partition), k),
        };
        let mut residuals = Vec::with_capacity(picard_iterations);
        let mut y_empty = 0;
        if picard_iterations == 0 {
            let proj = project_cells(&partition, &cells, &base, k, None)
                .map_err(|e| e.at(format!("y regression at n={n}")))?;
            y_fn = proj.function;
            y_empty = proj.empty_cells;
        }
        for i in 1..=picard_iterations {
            let previous = &y_fn;
            fill_rows(&mut y_targets, k, k, |m, out, f| {
                out.copy_from_slice(&base[m * k..(m + 1) * k]);
                if !live[m] {
                    return Ok(());
                }
                coeffs
                    .driver(
                        t_n,
                        paths.state(m, n),
                        previous.cell_value(cells[m]),
                        z_fn.cell_value(cells[m]),
                        f,
                    )
                    .map_err(|e| e.at(format!("f at n={n}, Picard {i}, path {m}")))?;
                for (o, fv) in out.iter_mut().zip(f.iter()) {
                    *o += h * fv;
                }
                Ok(())
            })?;
            let proj = project_cells(&partition, &cells, &y_targets, k, None)
                .map_err(|e| e.at(format!("y regression at n={n}, Picard {i}")))?;
            residuals.push(proj.function.sup_distance(previous));
            y_empty = proj.empty_cells;
            y_fn = proj.function;
        }

        let y_here = &mut y_done[n * count * k..];
        let z_here = &mut z_realized[n * count * kd..(n + 1) * count * kd];
        for m in 0..count {
            if live[m] {
                y_here[m * k..(m + 1) * k].copy_from_slice(y_fn.cell_value(cells[m]));
                z_here[m * kd..(m + 1) * kd].copy_from_slice(z_fn.cell_value(cells[m]));
            } else {
                y_here[m * k..(m + 1) * k].copy_from_slice(&terminal[m * k..(m + 1) * k]);
            }
        }

        diagnostics.push(StepDiagnostics {
            n,
            z_empty_cells: z_proj.empty_cells,
            y_empty_cells: y_empty,
            picard_residuals: residuals,
        });
        y_funcs.push(y_fn);
        z_funcs.push(z_fn.clone());
        z_next = z_fn;
        cells_next = cells;
    }

    y_funcs.reverse();
    z_funcs.reverse();
    diagnostics.reverse();
    let x0 = paths.state(0, 0);
    let y0 = y_funcs[0].evaluate(x0).to_vec();
    let z0 = if steps > 0 {
        z_funcs[0].evaluate(x0).to_vec()
    } else {
        vec![0.0; kd]
    };
    Ok(BackwardSolution {
        paths,
        k,
        y_funcs,
        z_funcs,
        y_realized,
        z_realized,
        y0,
        z0,
        diagnostics,
    })
}

/// Empirical squared error against reference `(Y, Z)` maps:
/// `max_i E[1_{i<exit}|Y_ref − y_i|²] + h·Σ_i E[1_{i<exit}‖Z_ref − z_i‖²]`,
/// expectations replaced by the average over all `M` paths.
pub fn strong_error<Y, Z>(solution: &BackwardSolution, reference_y: Y, reference_z: Z) -> f64
where
    Y: Fn(f64, &[f64], &mut [f64]),
    Z: Fn(f64, &[f64], &mut [f64]),
{
    let paths = solution.paths();
    let grid = paths.grid();
    let count = paths.len() as f64;
    let k = solution.k;
    let kd = k * paths.d();
    let mut ry = vec![0.0; k];
    let mut rz = vec![0.0; kd];
    let mut sup_y: f64 = 0.0;
    let mut sum_z = 0.0;
    for i in 0..grid.steps() {
        let t = grid.time(i);
        let mut ey = 0.0;
        let mut ez = 0.0;
        for m in 0..paths.len() {
            if !paths.is_live(m, i) {
                continue;
            }
            let x = paths.state(m, i);
            reference_y(t, x, &mut ry);
            reference_z(t, x, &mut rz);
            ey += ry.iter().zip(solution.y_realized(i, m)).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            ez += rz.iter().zip(solution.z_realized(i, m)).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        sup_y = sup_y.max(ey / count);
        sum_z += grid.h() * ez / count;
    }
    sup_y + sum_z
}
