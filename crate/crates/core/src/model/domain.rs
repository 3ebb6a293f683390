use crate::error::{Error, Result};

/// Spatial domain in which the forward diffusion lives.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// `R^d`; nothing ever exits.
    WholeSpace { dim: usize },
    /// Open axis-aligned box `(lower, upper)`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

/// Closest face of a box to an interior point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestFace {
    /// Coordinate whose bound is closest.
    pub axis: usize,
    /// Sign of the inward normal along `axis` (+1 on the lower face).
    pub inward: f64,
    pub distance: f64,
}

impl Domain {
    pub fn whole_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("d", "dimension must be at least 1"));
        }
        Ok(Domain::WholeSpace { dim })
    }

    pub fn axis_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid(
                "domain",
                format!("bounds have lengths {} and {}", lower.len(), upper.len()),
            ));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(
                    "domain",
                    format!("coordinate {j}: need lower < upper, got ({lo}, {hi})"),
                ));
            }
        }
        Ok(Domain::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::WholeSpace { dim } => *dim,
            Domain::Box { lower, .. } => lower.len(),
        }
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self, Domain::WholeSpace { .. })
    }

    /// Membership in the open domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::WholeSpace { .. } => true,
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(xi, (lo, hi))| lo < xi && xi < hi),
        }
    }

    /// Euclidean distance from an interior point to the boundary; infinite
    /// for the whole space and zero for points outside the box.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match self.nearest_face(x) {
            Some(face) => face.distance.max(0.0),
            None => f64::INFINITY,
        }
    }

    /// Face of minimal distance. Ties go to the lowest coordinate index, and
    /// within one coordinate to the lower face.
    pub fn nearest_face(&self, x: &[f64]) -> Option<NearestFace> {
        let Domain::Box { lower, upper } = self else {
            return None;
        };
        let mut best: Option<NearestFace> = None;
        for (axis, (xi, (lo, hi))) in x.iter().zip(lower.iter().zip(upper)).enumerate() {
            for (distance, inward) in [(xi - lo, 1.0), (hi - xi, -1.0)] {
                if best.is_none_or(|b| distance < b.distance) {
                    best = Some(NearestFace {
                        axis,
                        inward,
                        distance,
                    });
                }
            }
        }
        best
    }
}
