//! Empirical least-squares projection on indicators of a uniform box
//! partition.
//!
//! The indicator basis is orthogonal under the empirical scalar product, so
//! the least-squares coefficient of a cell is the mean of the targets whose
//! sample point falls in that cell. [`lsq_oracle`] solves the same problem
//! through dense normal equations and is kept as an independent check.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Half-open boxes of edge `delta` covering `[lower, upper)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypercubePartition {
    lower: Vec<f64>,
    upper: Vec<f64>,
    delta: f64,
    cells_per_dim: Vec<usize>,
    total: usize,
}

fn cell_count(span: f64, delta: f64) -> usize {
    let ratio = span / delta;
    let nearest = ratio.round();
    // (d2-d1)/delta that is an integer up to rounding must not gain a sliver cell
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        (nearest as usize).max(1)
    } else {
        ratio.ceil() as usize
    }
}

impl HypercubePartition {
    /// `⌈(upper − lower)/delta⌉` cells per axis; the last cell is truncated
    /// at `upper` when the ratio is not an integer.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("delta", format!("edge must be positive, got {delta}")));
        }
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid(
                "basis bounds",
                format!("bounds have lengths {} and {}", lower.len(), upper.len()),
            ));
        }
        let mut cells_per_dim = Vec::with_capacity(lower.len());
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(
                    "basis bounds",
                    format!("coordinate {j}: need lower < upper, got ({lo}, {hi})"),
                ));
            }
            cells_per_dim.push(cell_count(hi - lo, delta));
        }
        let total = cells_per_dim.iter().product();
        Ok(Self {
            lower,
            upper,
            delta,
            cells_per_dim,
            total,
        })
    }

    /// Partition anchored at `min` whose last cell contains `max`.
    pub fn covering(min: Vec<f64>, max: Vec<f64>, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("delta", format!("edge must be positive, got {delta}")));
        }
        let upper = min
            .iter()
            .zip(&max)
            .map(|(lo, hi)| lo + (((hi - lo) / delta).floor() + 1.0) * delta)
            .collect();
        Self::new(min, upper, delta)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cells_per_dim(&self) -> &[usize] {
        &self.cells_per_dim
    }

    pub fn total_cells(&self) -> usize {
        self.total
    }

    /// Flat index of the cell containing `x`, `None` outside `[lower, upper)`.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for (j, &xj) in x.iter().enumerate() {
            let lo = self.lower[j];
            if !(xj >= lo && xj < self.upper[j]) {
                return None;
            }
            let idx = (((xj - lo) / self.delta) as usize).min(self.cells_per_dim[j] - 1);
            flat = flat * self.cells_per_dim[j] + idx;
        }
        Some(flat)
    }
}

/// Piecewise-constant function with one `width`-vector per cell, zero
/// outside the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFunction {
    partition: Arc<HypercubePartition>,
    width: usize,
    coefficients: Vec<f64>,
    zeros: Vec<f64>,
}

impl CellFunction {
    pub fn zero(partition: Arc<HypercubePartition>, width: usize) -> Self {
        let coefficients = vec![0.0; partition.total_cells() * width];
        Self {
            partition,
            width,
            coefficients,
            zeros: vec![0.0; width],
        }
    }

    pub fn from_coefficients(
        partition: Arc<HypercubePartition>,
        width: usize,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        if coefficients.len() != partition.total_cells() * width {
            return Err(Error::Shape(format!(
                "{} coefficients for {} cells of width {width}",
                coefficients.len(),
                partition.total_cells()
            )));
        }
        Ok(Self {
            partition,
            width,
            coefficients,
            zeros: vec![0.0; width],
        })
    }

    pub fn partition(&self) -> &Arc<HypercubePartition> {
        &self.partition
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Coefficient vector of a cell, zero for `None`.
    pub fn cell_value(&self, cell: Option<usize>) -> &[f64] {
        match cell {
            Some(c) => &self.coefficients[c * self.width..(c + 1) * self.width],
            None => &self.zeros,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> &[f64] {
        self.cell_value(self.partition.cell_of(x))
    }

    /// Largest coefficient difference between two functions on one partition.
    pub fn sup_distance(&self, other: &CellFunction) -> f64 {
        self.coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Result of [`project`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub function: CellFunction,
    /// Cells that received no masked-in sample.
    pub empty_cells: usize,
}

fn check_lengths(samples: usize, targets: usize, width: usize, mask: Option<&[bool]>) -> Result<()> {
    if samples == 0 {
        return Err(Error::invalid("M", "projection needs at least one sample"));
    }
    if width == 0 || targets != samples * width {
        return Err(Error::Shape(format!(
            "{targets} target values for {samples} samples of width {width}"
        )));
    }
    if let Some(mask) = mask {
        if mask.len() != samples {
            return Err(Error::Shape(format!("mask of length {} for {samples} samples", mask.len())));
        }
    }
    Ok(())
}

/// Projection from precomputed cell indices.
///
/// Each cell mean is accumulated as `v_first + Σ(v − v_first)/n` with
/// samples taken in ascending order, so cells whose targets are all equal
/// reproduce that value exactly.
pub fn project_cells(
    partition: &Arc<HypercubePartition>,
    cells: &[Option<usize>],
    targets: &[f64],
    width: usize,
    mask: Option<&[bool]>,
) -> Result<Projection> {
    check_lengths(cells.len(), targets.len(), width, mask)?;
    let total = partition.total_cells();
    let mut anchors = vec![0.0; total * width];
    let mut sums = vec![0.0; total * width];
    let mut counts = vec![0usize; total];
    for (m, (cell, v)) in cells.iter().zip(targets.chunks(width)).enumerate() {
        if mask.is_some_and(|mask| !mask[m]) {
            continue;
        }
        if let Some(bad) = v.iter().position(|t| !t.is_finite()) {
            return Err(Error::Evaluation {
                coefficient: "regression target",
                context: format!("sample {m}, component {bad}"),
            });
        }
        let Some(c) = *cell else { continue };
        let range = c * width..(c + 1) * width;
        if counts[c] == 0 {
            anchors[range].copy_from_slice(v);
        } else {
            for ((s, a), t) in sums[range.clone()].iter_mut().zip(&anchors[range]).zip(v) {
                *s += t - a;
            }
        }
        counts[c] += 1;
    }
    let mut empty_cells = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n == 0 {
            empty_cells += 1;
            continue;
        }
        let n = n as f64;
        for (s, a) in sums[c * width..(c + 1) * width]
            .iter_mut()
            .zip(&anchors[c * width..(c + 1) * width])
        {
            *s = a + *s / n;
        }
    }
    Ok(Projection {
        function: CellFunction::from_coefficients(Arc::clone(partition), width, sums)?,
        empty_cells,
    })
}

/// Least-squares projection of `targets` (`M×width`) at `points` (`M×d`)
/// onto the cell indicators, restricted to samples with `mask[m]`.
pub fn project(
    partition: &Arc<HypercubePartition>,
    points: &[f64],
    targets: &[f64],
    width: usize,
    mask: Option<&[bool]>,
) -> Result<Projection> {
    let d = partition.dim();
    if !points.len().is_multiple_of(d) {
        return Err(Error::Shape(format!("{} coordinates for dimension {d}", points.len())));
    }
    let cells: Vec<Option<usize>> = points.chunks(d).map(|x| partition.cell_of(x)).collect();
    project_cells(partition, &cells, targets, width, mask)
}

/// Coefficients minimising the empirical squared residual over the indicator
/// basis, computed by assembling and solving the normal equations `AᵀA c =
/// Aᵀv` with Gaussian elimination. Cells without samples give a zero row and
/// get coefficient zero. Cost is `O(M·L + L³)`; meant for small instances.
pub fn lsq_oracle(
    partition: &HypercubePartition,
    points: &[f64],
    targets: &[f64],
    width: usize,
    mask: Option<&[bool]>,
) -> Result<Vec<f64>> {
    let d = partition.dim();
    let samples = points.len() / d.max(1);
    check_lengths(samples, targets.len(), width, mask)?;
    let cells = partition.total_cells();

    // design matrix, one row per masked-in sample
    let mut design: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<&[f64]> = Vec::new();
    for (m, (x, v)) in points.chunks(d).zip(targets.chunks(width)).enumerate() {
        if mask.is_some_and(|mask| !mask[m]) {
            continue;
        }
        if v.iter().any(|t| !t.is_finite()) {
            return Err(Error::Evaluation {
                coefficient: "regression target",
                context: format!("sample {m}"),
            });
        }
        let mut row = vec![0.0; cells];
        if let Some(c) = partition.cell_of(x) {
            row[c] = 1.0;
        }
        design.push(row);
        rhs.push(v);
    }

    let mut gram = vec![vec![0.0; cells]; cells];
    let mut moment = vec![vec![0.0; width]; cells];
    for (row, v) in design.iter().zip(&rhs) {
        for a in 0..cells {
            if row[a] == 0.0 {
                continue;
            }
            for b in 0..cells {
                gram[a][b] += row[a] * row[b];
            }
            for q in 0..width {
                moment[a][q] += row[a] * v[q];
            }
        }
    }

    let active: Vec<usize> = (0..cells).filter(|&a| gram[a].iter().any(|&g| g != 0.0)).collect();
    let n = active.len();
    let mut coefficients = vec![0.0; cells * width];
    if n == 0 {
        return Ok(coefficients);
    }
    for q in 0..width {
        let mut a: Vec<Vec<f64>> = active
            .iter()
            .map(|&i| {
                let mut r: Vec<f64> = active.iter().map(|&j| gram[i][j]).collect();
                r.push(moment[i][q]);
                r
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap_or(col);
            a.swap(col, pivot);
            let p = a[col][col];
            if p == 0.0 {
                return Err(Error::Shape("singular normal equations".into()));
            }
            for row in col + 1..n {
                let factor = a[row][col] / p;
                if factor != 0.0 {
                    for k in col..=n {
                        a[row][k] -= factor * a[col][k];
                    }
                }
            }
        }
        let mut solution = vec![0.0; n];
        for row in (0..n).rev() {
            let tail: f64 = (row + 1..n).map(|k| a[row][k] * solution[k]).sum();
            solution[row] = (a[row][n] - tail) / a[row][row];
        }
        for (s, &cell) in solution.iter().zip(&active) {
            coefficients[cell * width + q] = *s;
        }
    }
    Ok(coefficients)
}
