//! Validation oracles and the pointwise evaluation of the associated SPDE.
//!
//! * [`forward_contract_oracle`]: exact `(u, D_σu)` for the borrowing/lending
//!   driver with a forward-contract payoff and no backward noise.
//! * [`transform_to_bsde`]: when `g` depends on time only, shifting `Y` by
//!   `∫g dW` turns the doubly stochastic equation into a plain one.
//! * [`spde_point`] / [`spde_field`] / [`spde_error`]: `u^N(t_n, x) = Y_{t_n}`
//!   of the scheme started at `(t_n, x)` with one shared backward path.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::{emit_csv, format_number};
use crate::forward::{in_shifted_domain, simulate_stopped, PathSet};
use crate::model::noise::fingerprint;
use crate::model::{CoefficientSet, Domain, NoiseBundle, NoiseCoefficient, TimeGrid};
use crate::solver::{backward_induction_with_levels, solve, terminal_values, BackwardSolution, BasisConfig, SolverConfig};

/// `(t, x) ↦ out`.
pub type FieldFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
pub type FieldMap = Arc<FieldFn>;

/// Exact solution pair `(u, D_σu)` with a note on where it is exact.
#[derive(Clone)]
pub struct OracleSolution {
    pub u: FieldMap,
    pub z: FieldMap,
    pub validity: &'static str,
}

impl OracleSolution {
    pub fn u_at(&self, t: f64, x: &[f64]) -> f64 {
        let mut out = [0.0];
        (self.u)(t, x, &mut out);
        out[0]
    }

    pub fn z_at(&self, t: f64, x: &[f64]) -> f64 {
        let mut out = [0.0];
        (self.z)(t, x, &mut out);
        out[0]
    }
}

/// `u(t,x) = K·e^{−r(T−t)} − x`, `D_σu(t,x) = −σ(x)`.
///
/// Exact for `f = −θz − ry + (y − z/σ)⁻(R − r)` with `g = 0` because
/// `y − z/σ = K·e^{−r(T−t)} > 0` on this pair, so the borrowing term is
/// inactive and the equation is linear.
pub fn forward_contract_oracle<S>(strike: f64, r: f64, horizon: f64, sigma: S) -> OracleSolution
where
    S: Fn(f64) -> f64 + Send + Sync + 'static,
{
    OracleSolution {
        u: Arc::new(move |t, x, out| out[0] = strike * (-r * (horizon - t)).exp() - x[0]),
        z: Arc::new(move |_, x, out| out[0] = -sigma(x[0])),
        validity: "g = 0, fixed horizon or negligible exit probability, K > 0",
    }
}

/// BSDE data equivalent to a BDSDE whose noise coefficient depends on time
/// only.
#[derive(Clone)]
pub struct TransformedProblem {
    /// Coefficients with `g` removed and driver `f̄(t,x,y,z) = f(t,x,y − C(t),z)`.
    pub coeffs: CoefficientSet,
    /// `ξ̄^m = Φ(τ̄^m, X^m_τ̄) + C_{exit^m}`, flattened `M×k`.
    pub terminal: Vec<f64>,
    /// `C_n = Σ_{j<n} g(t_{j+1})·ΔW_j` for `n = 0..=N`, flattened.
    pub cumulative: Vec<f64>,
    k: usize,
}

impl TransformedProblem {
    /// Shift to subtract from the transformed `Ȳ_n` of a path exiting at
    /// `exit_index`.
    pub fn shift(&self, n: usize, exit_index: usize) -> &[f64] {
        let i = n.min(exit_index);
        &self.cumulative[i * self.k..(i + 1) * self.k]
    }
}

/// Builds the equivalent BSDE for the paths `paths` and the backward path
/// of `noise`. Fails with a misuse error unless `g` is time-only (or zero).
pub fn transform_to_bsde(
    coeffs: &CoefficientSet,
    paths: &PathSet,
    noise: &NoiseBundle,
) -> Result<TransformedProblem> {
    let (k, l) = (coeffs.k, coeffs.l);
    let grid = paths.grid().clone();
    let steps = grid.steps();
    let mut cumulative = vec![0.0; (steps + 1) * k];
    match &coeffs.noise {
        NoiseCoefficient::Zero => {}
        NoiseCoefficient::TimeOnly(g) => {
            if noise.l() != l {
                return Err(Error::Shape(format!("backward noise of dimension {} for l={l}", noise.l())));
            }
            let mut gv = vec![0.0; k * l];
            for n in 0..steps {
                let t = grid.time(n + 1);
                g(t, &mut gv);
                if gv.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Evaluation {
                        coefficient: "g",
                        context: format!("t={t}"),
                    });
                }
                let dw = noise.backward(n);
                for j1 in 0..k {
                    let inc: f64 = gv[j1 * l..(j1 + 1) * l].iter().zip(dw).map(|(a, b)| a * b).sum();
                    cumulative[(n + 1) * k + j1] = cumulative[n * k + j1] + inc;
                }
            }
        }
        NoiseCoefficient::General(_) => {
            return Err(Error::Misuse(
                "the BSDE transformation needs a noise coefficient that depends on time only".into(),
            ))
        }
    }

    let mut terminal = terminal_values(paths, coeffs)?;
    for m in 0..paths.len() {
        let e = paths.exit_index(m);
        for j in 0..k {
            terminal[m * k + j] += cumulative[e * k + j];
        }
    }

    let driver = Arc::clone(&coeffs.driver);
    let table = cumulative.clone();
    let wrapped_grid = grid.clone();
    let shifted_driver: crate::model::Driver = Arc::new(move |t, x, y, z, out| {
        let Ok(n) = wrapped_grid.index_of(t) else {
            out.fill(f64::NAN);
            return;
        };
        let shifted: Vec<f64> = y.iter().zip(&table[n * k..(n + 1) * k]).map(|(a, c)| a - c).collect();
        driver(t, x, &shifted, z, out);
    });
    Ok(TransformedProblem {
        coeffs: CoefficientSet {
            driver: shifted_driver,
            noise: NoiseCoefficient::Zero,
            ..coeffs.clone()
        },
        terminal,
        cumulative,
        k,
    })
}

/// Solves through [`transform_to_bsde`] on the same paths a direct solve
/// would use. The shifts `C_n` serve as reference levels, which makes the
/// regressions coincide with those of the direct scheme. `Y0` of the
/// original equation is the BSDE `Y0` (the shift vanishes at `t = 0`).
pub fn solve_via_transform(
    coeffs: &CoefficientSet,
    grid: &TimeGrid,
    domain: &Domain,
    noise: &NoiseBundle,
    x0: &[f64],
    basis: &BasisConfig,
    config: &SolverConfig,
) -> Result<(BackwardSolution, TransformedProblem)> {
    let (coeffs, domain) = config.mode.apply(coeffs, domain)?;
    let shift = config.shift_enabled && config.mode == crate::solver::SolverMode::BdsdeRandomTerminal;
    let paths = simulate_stopped(&coeffs, grid, &domain, noise, x0, shift)?;
    let transformed = transform_to_bsde(&coeffs, &paths, noise)?;
    let solution = backward_induction_with_levels(
        &transformed.coeffs,
        paths,
        noise,
        basis,
        config.picard_iterations,
        transformed.terminal.clone(),
        Some(&transformed.cumulative),
    )?;
    Ok((solution, transformed))
}

/// `u^N(t_n, x)` and `v^N(t_n, x)` with the fingerprint of the backward
/// path segment that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdePoint {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub backward_fingerprint: u64,
}

/// Runs the scheme on `{t_n, …, T}` from `x`, reusing `ΔW_n..ΔW_{N−1}` of
/// `backward_path` (flattened `N×l`). Forward noise is drawn from `seed` on
/// the tail grid, so `(t_0, x0)` reproduces [`solve`] with the same seed.
#[allow(clippy::too_many_arguments)]
pub fn spde_point(
    coeffs: &CoefficientSet,
    grid: &TimeGrid,
    domain: &Domain,
    backward_path: &[f64],
    t_n: f64,
    x: &[f64],
    paths: usize,
    basis: &BasisConfig,
    config: &SolverConfig,
    seed: u64,
) -> Result<SpdePoint> {
    let l = coeffs.l;
    if backward_path.len() != grid.steps() * l {
        return Err(Error::Shape(format!(
            "backward path of {} values for {} steps of dimension {l}",
            backward_path.len(),
            grid.steps()
        )));
    }
    let n = grid.index_of(t_n)?;
    let segment = &backward_path[n * l..];
    let backward_fingerprint = fingerprint(segment);
    if n == grid.steps() {
        let mut u = vec![0.0; coeffs.k];
        coeffs.terminal(grid.horizon(), x, &mut u)?;
        return Ok(SpdePoint {
            u,
            v: vec![0.0; coeffs.k * coeffs.d],
            backward_fingerprint,
        });
    }
    let tail = grid.tail(n)?;
    let noise = NoiseBundle::sample(seed, paths, &tail, coeffs.d, l)?.with_backward(segment.to_vec())?;
    let solution = solve(coeffs, &tail, domain, &noise, x, basis, config)?;
    Ok(SpdePoint {
        u: solution.y0().to_vec(),
        v: solution.z0().to_vec(),
        backward_fingerprint,
    })
}

/// Evenly spaced midpoints of `n` cells on `[lower, upper]` with their
/// quadrature weight (the cell width).
pub fn midpoint_lattice(lower: f64, upper: f64, n: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if n == 0 || lower.partial_cmp(&upper) != Some(std::cmp::Ordering::Less) {
        return Err(Error::invalid("lattice", format!("need n >= 1 and lower < upper, got {n} on ({lower}, {upper})")));
    }
    let width = (upper - lower) / n as f64;
    let points = (0..n).map(|i| vec![lower + (i as f64 + 0.5) * width]).collect();
    Ok((points, vec![width; n]))
}

/// Values of `u` (width `k`) and `v` (width `k·d`) on times × points.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdeField {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub k: usize,
    pub kd: usize,
    /// `times × points × k`.
    pub u: Vec<f64>,
    /// `times × points × k·d`.
    pub v: Vec<f64>,
}

impl SpdeField {
    fn check(&self) -> Result<()> {
        let cells = self.times.len() * self.points.len();
        if self.u.len() != cells * self.k || self.v.len() != cells * self.kd {
            return Err(Error::Shape(format!(
                "field has {} u and {} v values for {} times × {} points",
                self.u.len(),
                self.v.len(),
                self.times.len(),
                self.points.len()
            )));
        }
        Ok(())
    }

    /// Tabulates exact maps on the same layout.
    pub fn from_maps(
        times: Vec<f64>,
        points: Vec<Vec<f64>>,
        k: usize,
        kd: usize,
        u: &FieldFn,
        v: &FieldFn,
    ) -> Self {
        let mut uu = Vec::with_capacity(times.len() * points.len() * k);
        let mut vv = Vec::with_capacity(times.len() * points.len() * kd);
        let mut bu = vec![0.0; k];
        let mut bv = vec![0.0; kd];
        for &t in &times {
            for x in &points {
                u(t, x, &mut bu);
                v(t, x, &mut bv);
                uu.extend_from_slice(&bu);
                vv.extend_from_slice(&bv);
            }
        }
        Self {
            times,
            points,
            k,
            kd,
            u: uu,
            v: vv,
        }
    }

    /// CSV with header `t,x,u,v` (first coordinate and first component).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.check()?;
        let mut rows = Vec::with_capacity(self.times.len() * self.points.len());
        for (ti, t) in self.times.iter().enumerate() {
            for (pi, x) in self.points.iter().enumerate() {
                let at = ti * self.points.len() + pi;
                rows.push(vec![
                    format_number(*t),
                    format_number(x[0]),
                    format_number(self.u[at * self.k]),
                    format_number(self.v[at * self.kd]),
                ]);
            }
        }
        emit_csv(&["t", "x", "u", "v"], &rows, path)
    }
}

/// `u^N`, `v^N` at every grid index in `time_indices` and every point, all
/// sharing `backward_path`.
///
/// Points that lie in the domain but not in the shifted domain are stopped
/// at once: they get `u = Φ(t, x)` and `v = 0`.
#[allow(clippy::too_many_arguments)]
pub fn spde_field(
    coeffs: &CoefficientSet,
    grid: &TimeGrid,
    domain: &Domain,
    backward_path: &[f64],
    time_indices: &[usize],
    points: &[Vec<f64>],
    paths: usize,
    basis: &BasisConfig,
    config: &SolverConfig,
    seed: u64,
) -> Result<SpdeField> {
    let (k, kd) = (coeffs.k, coeffs.k * coeffs.d);
    let mut times = Vec::with_capacity(time_indices.len());
    for &n in time_indices {
        if n > grid.steps() {
            return Err(Error::Range {
                value: n as f64,
                lower: 0.0,
                upper: grid.steps() as f64,
            });
        }
        times.push(grid.time(n));
    }
    let random_terminal = config.mode == crate::solver::SolverMode::BdsdeRandomTerminal;
    let jobs: Vec<(f64, &Vec<f64>)> = times.iter().flat_map(|&t| points.iter().map(move |x| (t, x))).collect();
    let values: Vec<Result<(Vec<f64>, Vec<f64>)>> = jobs
        .par_iter()
        .map(|&(t, x)| {
            let stopped = random_terminal
                && domain.contains(x)
                && !in_shifted_domain(domain, coeffs, x, grid.h(), config.shift_enabled)?;
            if stopped {
                let mut u = vec![0.0; k];
                coeffs.terminal(t, x, &mut u)?;
                return Ok((u, vec![0.0; kd]));
            }
            let p = spde_point(coeffs, grid, domain, backward_path, t, x, paths, basis, config, seed)
                .map_err(|e| e.at(format!("SPDE point t={t}, x={x:?}")))?;
            Ok((p.u, p.v))
        })
        .collect();
    let mut u = Vec::with_capacity(jobs.len() * k);
    let mut v = Vec::with_capacity(jobs.len() * kd);
    for value in values {
        let (a, b) = value?;
        u.extend(a);
        v.extend(b);
    }
    Ok(SpdeField {
        times,
        points: points.to_vec(),
        k,
        kd,
        u,
        v,
    })
}

/// Discretised SPDE error
/// `sup_t E[Σ_p w_p ρ_p |u − u_ref|²] + Σ_t Δt·E[Σ_p w_p ρ_p ‖v − v_ref‖²]`
/// where `E` is the mean over `runs`, `w` the quadrature weights, and `Δt`
/// the gap to the next stored time (zero for the last one).
pub fn spde_error(runs: &[SpdeField], reference: &SpdeField, weights: &[f64], rho: &[f64]) -> Result<f64> {
    reference.check()?;
    if runs.is_empty() {
        return Err(Error::invalid("runs", "need at least one numerical field"));
    }
    let points = reference.points.len();
    if weights.len() != points || rho.len() != points {
        return Err(Error::Shape(format!(
            "{} weights and {} ρ values for {points} points",
            weights.len(),
            rho.len()
        )));
    }
    for run in runs {
        run.check()?;
        if run.times != reference.times || run.points.len() != points || run.k != reference.k || run.kd != reference.kd {
            return Err(Error::Shape("numerical and reference fields are on different grids".into()));
        }
    }
    let (k, kd) = (reference.k, reference.kd);
    let nt = reference.times.len();
    let mut sup_u: f64 = 0.0;
    let mut sum_v = 0.0;
    for ti in 0..nt {
        let dt = if ti + 1 < nt {
            reference.times[ti + 1] - reference.times[ti]
        } else {
            0.0
        };
        let mut eu = 0.0;
        let mut ev = 0.0;
        for run in runs {
            for p in 0..points {
                let at = ti * points + p;
                let wr = weights[p] * rho[p];
                let du: f64 = run.u[at * k..(at + 1) * k]
                    .iter()
                    .zip(&reference.u[at * k..(at + 1) * k])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                let dv: f64 = run.v[at * kd..(at + 1) * kd]
                    .iter()
                    .zip(&reference.v[at * kd..(at + 1) * kd])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                eu += wr * du;
                ev += wr * dv;
            }
        }
        let runs = runs.len() as f64;
        sup_u = sup_u.max(eu / runs);
        sum_v += dt * ev / runs;
    }
    Ok(sup_u + sum_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{CustomNoise, GChoice, MarketModel};
    use crate::solver::SolverMode;

    fn reference_basis() -> BasisConfig {
        BasisConfig::Fixed {
            lower: vec![60.0],
            upper: vec![200.0],
            delta: 1.0,
        }
    }

    fn oracle() -> OracleSolution {
        forward_contract_oracle(115.0, 0.01, 0.25, |x| 0.2 * x)
    }

    #[test]
    fn forward_contract_values() {
        let o = oracle();
        assert_eq!(o.u_at(0.25, &[100.0]), 15.0);
        assert!((o.u_at(0.0, &[100.0]) - 14.712_859_075_707_911).abs() < 1e-12);
        assert_eq!(o.z_at(0.1, &[100.0]), -20.0);
        for x in [61.0, 100.0, 199.0] {
            assert_eq!(o.u_at(0.25, &[x]), 115.0 - x);
        }
    }

    #[test]
    fn forward_contract_satisfies_driver_balance() {
        // u(t,x) − E-free drift step u(t+h, x + b h) − h·f(t,x,u,z) is O(h²)
        let model = MarketModel::default();
        let o = oracle();
        for h in [0.0125, 0.00625] {
            let mut worst: f64 = 0.0;
            for i in 0..10 {
                let t = i as f64 * 0.02;
                for x in [70.0, 100.0, 150.0] {
                    let u = o.u_at(t, &[x]);
                    let z = o.z_at(t, &[x]);
                    let next = o.u_at(t + h, &[x + model.mu * x * h]);
                    let gap = u - next - h * model.driver_value(u, z);
                    worst = worst.max(gap.abs());
                }
            }
            assert!(worst <= 115.0 * 0.01 * 0.01 * h * h, "h={h}: {worst}");
        }
    }

    #[test]
    fn identity_transform_without_noise() {
        let model = MarketModel::default();
        let coeffs = model.coefficients(GChoice::None, CustomNoise::default());
        let g = TimeGrid::new(0.25, 20).unwrap();
        let noise = NoiseBundle::sample(3, 50, &g, 1, 1).unwrap();
        let dom = Domain::axis_box(vec![60.0], vec![200.0]).unwrap();
        let paths = simulate_stopped(&coeffs, &g, &dom, &noise, &[100.0], true).unwrap();
        let t = transform_to_bsde(&coeffs, &paths, &noise).unwrap();
        assert_eq!(t.terminal, terminal_values(&paths, &coeffs).unwrap());
        assert!(t.cumulative.iter().all(|&c| c == 0.0));
        let (mut a, mut b) = ([0.0], [0.0]);
        coeffs.driver(0.1, &[100.0], &[3.0], &[-20.0], &mut a).unwrap();
        t.coeffs.driver(0.1, &[100.0], &[3.0], &[-20.0], &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn general_noise_is_rejected() {
        let model = MarketModel::default();
        let coeffs = model.coefficients(GChoice::G2, CustomNoise::default());
        let g = TimeGrid::new(0.25, 4).unwrap();
        let noise = NoiseBundle::sample(3, 5, &g, 1, 1).unwrap();
        let paths = simulate_stopped(&coeffs, &g, &Domain::whole_space(1).unwrap(), &noise, &[100.0], false).unwrap();
        assert!(matches!(transform_to_bsde(&coeffs, &paths, &noise), Err(Error::Misuse(_))));
    }

    #[test]
    fn constant_noise_recovers_terminal_plus_integral() {
        let c = 0.7;
        let model = MarketModel::default();
        let mut coeffs = model.coefficients(GChoice::None, CustomNoise::default());
        coeffs.driver = Arc::new(|_, _, _, _, out| out[0] = 0.0);
        coeffs.terminal = Arc::new(|_, _, out| out[0] = 4.0);
        coeffs.noise = NoiseCoefficient::TimeOnly(Arc::new(move |_, out| out[0] = c));
        let g = TimeGrid::new(0.25, 20).unwrap();
        let noise = NoiseBundle::sample(19, 40, &g, 1, 1).unwrap();
        let cfg = SolverConfig {
            mode: SolverMode::BdsdeFixedHorizon,
            ..SolverConfig::default()
        };
        let dom = Domain::whole_space(1).unwrap();
        let (sol, _) = solve_via_transform(&coeffs, &g, &dom, &noise, &[100.0], &reference_basis(), &cfg).unwrap();
        let w_t: f64 = noise.backward_path().iter().sum();
        assert!((sol.y0()[0] - (4.0 + c * w_t)).abs() < 1e-12);
    }

    #[test]
    fn transform_round_trip_matches_direct_solve() {
        let model = MarketModel::default();
        let mut coeffs = model.coefficients(GChoice::None, CustomNoise::default());
        coeffs.noise = NoiseCoefficient::TimeOnly(Arc::new(|t, out| out[0] = 0.5 * t));
        let g = TimeGrid::new(0.25, 20).unwrap();
        let noise = NoiseBundle::sample(23, 2048, &g, 1, 1).unwrap();
        let cfg = SolverConfig {
            mode: SolverMode::BdsdeFixedHorizon,
            ..SolverConfig::default()
        };
        let dom = Domain::axis_box(vec![60.0], vec![200.0]).unwrap();
        let direct = solve(&coeffs, &g, &dom, &noise, &[100.0], &reference_basis(), &cfg).unwrap();
        let (bsde, t) = solve_via_transform(&coeffs, &g, &dom, &noise, &[100.0], &reference_basis(), &cfg).unwrap();
        assert!((direct.y0()[0] - bsde.y0()[0]).abs() < 1e-10);
        for n in [0, 7, 19, 20] {
            for m in [0, 100, 2047] {
                let e = bsde.paths().exit_index(m);
                let back = bsde.y_realized(n, m)[0] - t.shift(n, e)[0];
                assert!((back - direct.y_realized(n, m)[0]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn spde_point_at_origin_matches_solve() {
        let model = MarketModel::default();
        let coeffs = model.coefficients(GChoice::G1, CustomNoise::default());
        let g = TimeGrid::new(0.25, 20).unwrap();
        let dom = Domain::axis_box(vec![60.0], vec![200.0]).unwrap();
        let cfg = SolverConfig::default();
        let noise = NoiseBundle::sample(31, 1000, &g, 1, 1).unwrap();
        let direct = solve(&coeffs, &g, &dom, &noise, &[100.0], &reference_basis(), &cfg).unwrap();
        let p = spde_point(&coeffs, &g, &dom, noise.backward_path(), 0.0, &[100.0], 1000, &reference_basis(), &cfg, 31).unwrap();
        assert_eq!(p.u, direct.y0());
        assert_eq!(p.v, direct.z0());
    }

    #[test]
    fn spde_point_terminal_slice_and_errors() {
        let model = MarketModel::default();
        let coeffs = model.coefficients(GChoice::G1, CustomNoise::default());
        let g = TimeGrid::new(0.25, 20).unwrap();
        let dom = Domain::axis_box(vec![60.0], vec![200.0]).unwrap();
        let w = NoiseBundle::sample_backward(1, &g, 1);
        let cfg = SolverConfig::default();
        let p = spde_point(&coeffs, &g, &dom, &w, 0.25, &[120.0], 10, &reference_basis(), &cfg, 1).unwrap();
        assert_eq!(p.u, vec![-5.0]);
        let err = spde_point(&coeffs, &g, &dom, &w, 0.013, &[120.0], 10, &reference_basis(), &cfg, 1).unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
    }

    #[test]
    fn spde_points_share_the_backward_segment() {
        let model = MarketModel::default();
        let coeffs = model.coefficients(GChoice::G2, CustomNoise::default());
        let g = TimeGrid::new(0.25, 20).unwrap();
        let dom = Domain::axis_box(vec![60.0], vec![200.0]).unwrap();
        let w = NoiseBundle::sample_backward(5, &g, 1);
        let cfg = SolverConfig::default();
        let t = g.time(10);
        let a = spde_point(&coeffs, &g, &dom, &w, t, &[90.0], 200, &reference_basis(), &cfg, 9).unwrap();
        let b = spde_point(&coeffs, &g, &dom, &w, t, &[130.0], 200, &reference_basis(), &cfg, 9).unwrap();
        assert_eq!(a.backward_fingerprint, b.backward_fingerprint);
        assert_eq!(a.backward_fingerprint, fingerprint(&w[10..]));
    }

    #[test]
    fn spde_error_edge_cases() {
        let o = oracle();
        let (points, weights) = midpoint_lattice(60.0, 200.0, 29).unwrap();
        let g = TimeGrid::new(0.25, 4).unwrap();
        let exact = SpdeField::from_maps(g.times(), points.clone(), 1, 1, &*o.u, &*o.z);
        let ones = vec![1.0; 29];
        assert_eq!(spde_error(std::slice::from_ref(&exact), &exact, &weights, &ones).unwrap(), 0.0);
        let mut off = exact.clone();
        off.u.iter_mut().for_each(|u| *u += 1.0);
        off.v.iter_mut().for_each(|v| *v += 1.0);
        assert_eq!(spde_error(&[off.clone()], &exact, &weights, &vec![0.0; 29]).unwrap(), 0.0);
        // sup of ∫1 dx over (60,200) plus T·∫1 dx
        let e = spde_error(&[off.clone()], &exact, &weights, &ones).unwrap();
        assert!((e - (140.0 + 0.25 * 140.0)).abs() < 1e-9, "{e}");
        let mut short = off;
        short.times.pop();
        assert!(matches!(spde_error(&[short], &exact, &weights, &ones), Err(Error::Shape(_))));
        assert!(spde_error(std::slice::from_ref(&exact), &exact, &weights[..3], &ones).is_err());
    }

    #[test]
    fn lattice_midpoints() {
        let (p, w) = midpoint_lattice(0.0, 1.0, 4).unwrap();
        assert_eq!(p, vec![vec![0.125], vec![0.375], vec![0.625], vec![0.875]]);
        assert_eq!(w, vec![0.25; 4]);
        assert!(midpoint_lattice(1.0, 0.0, 4).is_err());
    }
}
