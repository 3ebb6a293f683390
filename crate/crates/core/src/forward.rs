//! Forward Euler simulation stopped at the discrete exit time of a domain
//! whose boundary is pulled inwards by `c0·√h·|nᵀσ(x)|`.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::noise::{IncrementStream, FORWARD_STREAM};
use crate::model::{CoefficientSet, Domain, NoiseBundle, TimeGrid};

/// Overshoot constant of a Gaussian random walk, `E[s²_τ+] / (2·E[s_τ+])`.
pub const C0: f64 = 0.5826;

/// Width of the boundary layer removed from the domain at `x`.
///
/// Uses the inward normal of the nearest face; `|nᵀσ(x)|` is then the norm
/// of the corresponding row of `σ(x)`. Zero for the whole space.
pub fn shift_width(domain: &Domain, coeffs: &CoefficientSet, x: &[f64], h: f64) -> Result<f64> {
    let mut sigma = vec![0.0; coeffs.d * coeffs.d];
    shift_width_with(domain, coeffs, x, h, &mut sigma)
}

fn shift_width_with(
    domain: &Domain,
    coeffs: &CoefficientSet,
    x: &[f64],
    h: f64,
    sigma: &mut [f64],
) -> Result<f64> {
    let Some(face) = domain.nearest_face(x) else {
        return Ok(0.0);
    };
    let d = coeffs.d;
    coeffs.diffusion(x, sigma)?;
    let row = &sigma[face.axis * d..(face.axis + 1) * d];
    let amplitude = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(C0 * h.sqrt() * amplitude)
}

/// Membership in the shifted open domain `{x ∈ O : d(x, ∂O) > shift(x)}`.
pub fn in_shifted_domain(
    domain: &Domain,
    coeffs: &CoefficientSet,
    x: &[f64],
    h: f64,
    shift_enabled: bool,
) -> Result<bool> {
    let mut sigma = vec![0.0; coeffs.d * coeffs.d];
    in_shifted_domain_with(domain, coeffs, x, h, shift_enabled, &mut sigma)
}

fn in_shifted_domain_with(
    domain: &Domain,
    coeffs: &CoefficientSet,
    x: &[f64],
    h: f64,
    shift_enabled: bool,
    sigma: &mut [f64],
) -> Result<bool> {
    if !domain.contains(x) {
        return Ok(false);
    }
    if !shift_enabled || domain.is_whole_space() {
        return Ok(true);
    }
    Ok(domain.distance_to_boundary(x) > shift_width_with(domain, coeffs, x, h, sigma)?)
}

/// Scratch space for [`euler_step`].
#[derive(Debug, Clone)]
pub struct EulerScratch {
    drift: Vec<f64>,
    diffusion: Vec<f64>,
}

impl EulerScratch {
    pub fn new(d: usize) -> Self {
        Self {
            drift: vec![0.0; d],
            diffusion: vec![0.0; d * d],
        }
    }
}

/// `out = x + b(x)·h + σ(x)·dB`.
pub fn euler_step(
    coeffs: &CoefficientSet,
    x: &[f64],
    h: f64,
    db: &[f64],
    scratch: &mut EulerScratch,
    out: &mut [f64],
) -> Result<()> {
    let d = x.len();
    coeffs.drift(x, &mut scratch.drift)?;
    coeffs.diffusion(x, &mut scratch.diffusion)?;
    for (j, o) in out.iter_mut().enumerate() {
        let row = &scratch.diffusion[j * d..(j + 1) * d];
        let noise: f64 = row.iter().zip(db).map(|(s, w)| s * w).sum();
        *o = x[j] + scratch.drift[j] * h + noise;
    }
    Ok(())
}

/// `M` stopped Euler trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    grid: TimeGrid,
    d: usize,
    paths: usize,
    states: Vec<f64>,
    exit_index: Vec<usize>,
    exited: Vec<bool>,
}

impl PathSet {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.paths
    }

    pub fn is_empty(&self) -> bool {
        self.paths == 0
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    /// `X_i` of path `m`.
    pub fn state(&self, m: usize, i: usize) -> &[f64] {
        let at = (m * (self.steps() + 1) + i) * self.d;
        &self.states[at..at + self.d]
    }

    /// First index at which the path left the shifted domain, or `N`.
    pub fn exit_index(&self, m: usize) -> usize {
        self.exit_index[m]
    }

    pub fn exit_indices(&self) -> &[usize] {
        &self.exit_index
    }

    /// Whether the path actually left the domain (rather than reaching `T`).
    pub fn exited(&self, m: usize) -> bool {
        self.exited[m]
    }

    pub fn exit_state(&self, m: usize) -> &[f64] {
        self.state(m, self.exit_index[m])
    }

    pub fn exit_time(&self, m: usize) -> f64 {
        self.grid.time(self.exit_index[m])
    }

    /// True while `t_i` is strictly before the exit time of path `m`.
    pub fn is_live(&self, m: usize, i: usize) -> bool {
        i < self.exit_index[m]
    }

    /// Fraction of paths that left the domain before `T`.
    pub fn exit_fraction(&self) -> f64 {
        self.exited.iter().filter(|&&e| e).count() as f64 / self.paths as f64
    }

    /// Componentwise extrema over all paths and times.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for x in self.states.chunks(self.d) {
            for j in 0..self.d {
                lo[j] = lo[j].min(x[j]);
                hi[j] = hi[j].max(x[j]);
            }
        }
        (lo, hi)
    }

    /// Debug dump with header `m,i,t,x_1..x_d,exited`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["m".to_string(), "i".into(), "t".into()];
        header.extend((1..=self.d).map(|j| format!("x_{j}")));
        header.push("exited".into());
        let mut rows = Vec::with_capacity(self.paths * (self.steps() + 1));
        for m in 0..self.paths {
            for i in 0..=self.steps() {
                let mut row = vec![m.to_string(), i.to_string(), crate::experiments::format_number(self.grid.time(i))];
                row.extend(self.state(m, i).iter().map(|&v| crate::experiments::format_number(v)));
                let frozen = self.exited[m] && i >= self.exit_index[m];
                row.push(u8::from(frozen).to_string());
                rows.push(row);
            }
        }
        crate::experiments::emit_csv(&header, &rows, path)
    }
}

fn check_start(
    domain: &Domain,
    coeffs: &CoefficientSet,
    x0: &[f64],
    h: f64,
    shift_enabled: bool,
) -> Result<()> {
    if !domain.contains(x0) {
        return Err(Error::StartOutsideDomain { x0: x0.to_vec() });
    }
    if shift_enabled && !in_shifted_domain(domain, coeffs, x0, h, true)? {
        return Err(Error::StartInsideShift {
            x0: x0.to_vec(),
            shift: shift_width(domain, coeffs, x0, h)?,
        });
    }
    Ok(())
}

fn check_dims(coeffs: &CoefficientSet, domain: &Domain, x0: &[f64]) -> Result<()> {
    coeffs.validate()?;
    if domain.dim() != coeffs.d || x0.len() != coeffs.d {
        return Err(Error::Shape(format!(
            "coefficients have d={}, domain has d={}, start point has d={}",
            coeffs.d,
            domain.dim(),
            x0.len()
        )));
    }
    Ok(())
}

/// Evolves every path with [`euler_step`] and freezes it at the first grid
/// index `i >= 1` where it is outside the (shifted) domain.
pub fn simulate_stopped(
    coeffs: &CoefficientSet,
    grid: &TimeGrid,
    domain: &Domain,
    noise: &NoiseBundle,
    x0: &[f64],
    shift_enabled: bool,
) -> Result<PathSet> {
    check_dims(coeffs, domain, x0)?;
    if noise.d() != coeffs.d || noise.steps() != grid.steps() {
        return Err(Error::Shape(format!(
            "noise is {} steps of dimension {}, grid has {} steps and d={}",
            noise.steps(),
            noise.d(),
            grid.steps(),
            coeffs.d
        )));
    }
    let h = grid.h();
    check_start(domain, coeffs, x0, h, shift_enabled)?;

    let d = coeffs.d;
    let steps = grid.steps();
    let paths = noise.paths();
    let mut states = vec![0.0; paths * (steps + 1) * d];
    let outcomes: Vec<Result<(usize, bool)>> = states
        .par_chunks_mut((steps + 1) * d)
        .enumerate()
        .map(|(m, row)| {
            let mut scratch = EulerScratch::new(d);
            row[..d].copy_from_slice(x0);
            let mut exit = None;
            for i in 0..steps {
                let (done, rest) = row.split_at_mut((i + 1) * d);
                let next = &mut rest[..d];
                let current = &done[i * d..];
                if exit.is_some() {
                    next.copy_from_slice(current);
                    continue;
                }
                euler_step(coeffs, current, h, noise.forward(m, i), &mut scratch, next)
                    .map_err(|e| e.at(format!("path {m}, step {i}")))?;
                if !in_shifted_domain_with(domain, coeffs, next, h, shift_enabled, &mut scratch.diffusion)? {
                    exit = Some(i + 1);
                }
            }
            Ok(match exit {
                Some(i) => (i, true),
                None => (steps, false),
            })
        })
        .collect();

    let mut exit_index = Vec::with_capacity(paths);
    let mut exited = Vec::with_capacity(paths);
    for outcome in outcomes {
        let (i, e) = outcome?;
        exit_index.push(i);
        exited.push(e);
    }
    Ok(PathSet {
        grid: grid.clone(),
        d,
        paths,
        states,
        exit_index,
        exited,
    })
}

/// Exit indices of `paths` trajectories, generating increments on the fly
/// instead of storing them. Path `m` uses the same increments as row `m` of
/// [`NoiseBundle::sample`] with the same seed.
pub fn simulate_exit_indices(
    coeffs: &CoefficientSet,
    grid: &TimeGrid,
    domain: &Domain,
    seed: u64,
    paths: usize,
    x0: &[f64],
    shift_enabled: bool,
) -> Result<Vec<usize>> {
    check_dims(coeffs, domain, x0)?;
    if paths == 0 {
        return Err(Error::invalid("M", "path count must be at least 1"));
    }
    let h = grid.h();
    check_start(domain, coeffs, x0, h, shift_enabled)?;
    let d = coeffs.d;
    let steps = grid.steps();
    let outcomes: Vec<Result<usize>> = (0..paths)
        .into_par_iter()
        .map(|m| {
            let mut stream = IncrementStream::new(seed, FORWARD_STREAM, m as u64, h);
            let mut scratch = EulerScratch::new(d);
            let mut x = x0.to_vec();
            let mut next = vec![0.0; d];
            let mut db = vec![0.0; d];
            for i in 0..steps {
                stream.fill(&mut db);
                euler_step(coeffs, &x, h, &db, &mut scratch, &mut next)?;
                if !in_shifted_domain_with(domain, coeffs, &next, h, shift_enabled, &mut scratch.diffusion)? {
                    return Ok(i + 1);
                }
                std::mem::swap(&mut x, &mut next);
            }
            Ok(steps)
        })
        .collect();
    outcomes.into_iter().collect()
}
