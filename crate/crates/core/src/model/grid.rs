use crate::error::{Error, Result};

/// Uniform time partition of `[0, T]`.
///
/// A grid may also be the tail `{t_n, ..., t_N}` of a larger grid (see
/// [`TimeGrid::tail`]); local index `i` then maps to the global time
/// `t_{origin + i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    total_steps: usize,
    origin: usize,
    step: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("T", format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::invalid("N", "step count must be at least 1"));
        }
        Ok(Self {
            horizon,
            total_steps: steps,
            origin: 0,
            step: horizon / steps as f64,
        })
    }

    /// Sub-grid starting at local index `n` and ending at the same horizon.
    pub fn tail(&self, n: usize) -> Result<Self> {
        if n > self.steps() {
            return Err(Error::Range {
                value: n as f64,
                lower: 0.0,
                upper: self.steps() as f64,
            });
        }
        Ok(Self {
            origin: self.origin + n,
            ..self.clone()
        })
    }

    /// Final time `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps in this grid.
    pub fn steps(&self) -> usize {
        self.total_steps - self.origin
    }

    pub fn h(&self) -> f64 {
        self.step
    }

    /// Global index of local index 0.
    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Time of local index `i`, computed as `(origin + i)·h` with the last
    /// point pinned to `T`.
    pub fn time(&self, i: usize) -> f64 {
        let global = self.origin + i;
        if global == self.total_steps {
            self.horizon
        } else {
            global as f64 * self.step
        }
    }

    pub fn start(&self) -> f64 {
        self.time(0)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|i| self.time(i)).collect()
    }

    fn check_range(&self, s: f64) -> Result<()> {
        let lo = self.start();
        if !(s >= lo && s <= self.horizon) {
            return Err(Error::Range {
                value: s,
                lower: lo,
                upper: self.horizon,
            });
        }
        Ok(())
    }

    /// Local index of the largest grid time `<= s`.
    pub fn floor_index(&self, s: f64) -> Result<usize> {
        self.check_range(s)?;
        let mut i = (((s - self.start()) / self.step).floor() as usize).min(self.steps());
        // guard against rounding in the division
        while i > 0 && self.time(i) > s {
            i -= 1;
        }
        while i < self.steps() && self.time(i + 1) <= s {
            i += 1;
        }
        Ok(i)
    }

    /// Local index of the smallest grid time `>= s`.
    pub fn ceil_index(&self, s: f64) -> Result<usize> {
        let i = self.floor_index(s)?;
        if self.time(i) == s {
            Ok(i)
        } else {
            Ok(i + 1)
        }
    }

    /// Largest grid time `<= s`.
    pub fn floor(&self, s: f64) -> Result<f64> {
        Ok(self.time(self.floor_index(s)?))
    }

    /// Smallest grid time `>= s`.
    pub fn ceil(&self, s: f64) -> Result<f64> {
        Ok(self.time(self.ceil_index(s)?))
    }

    /// Local index of a time that lies on the grid, up to a relative
    /// tolerance of `1e-9·h`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let lo = self.start();
        let pos = (t - lo) / self.step;
        let i = pos.round();
        if !(i >= 0.0 && i <= self.steps() as f64) || (pos - i).abs() > 1e-9 {
            return Err(Error::Range {
                value: t,
                lower: lo,
                upper: self.horizon,
            });
        }
        Ok(i as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_grid() {
        let g = TimeGrid::new(0.25, 20).unwrap();
        assert_eq!(g.h(), 0.0125);
        assert_eq!(g.time(20), 0.25);
        assert_eq!(g.time(0), 0.0);
    }

    #[test]
    fn single_step() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        assert_eq!(g.times(), vec![0.0, 1.0]);
    }

    #[test]
    fn halved_step_hits_horizon_exactly() {
        let g = TimeGrid::new(0.25, 40).unwrap();
        assert_eq!(g.h(), 0.00625);
        assert_eq!(g.time(40), 0.25);
        for i in 0..40 {
            assert_eq!(g.time(i), i as f64 * 0.00625);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            TimeGrid::new(0.0, 4),
            Err(Error::InvalidParameter { name: "T", .. })
        ));
        assert!(TimeGrid::new(-1.0, 4).is_err());
        assert!(matches!(
            TimeGrid::new(1.0, 0),
            Err(Error::InvalidParameter { name: "N", .. })
        ));
    }

    #[test]
    fn floor_and_ceil() {
        let g = TimeGrid::new(0.25, 20).unwrap();
        assert_eq!(g.floor(g.time(7)).unwrap(), g.time(7));
        assert_eq!(g.ceil(g.time(7)).unwrap(), g.time(7));
        assert_eq!(g.floor(0.013).unwrap(), 0.0125);
        assert_eq!(g.ceil(0.013).unwrap(), 0.025);
        assert_eq!(g.floor(0.25).unwrap(), 0.25);
        assert_eq!(g.ceil(0.0).unwrap(), 0.0);
        assert!(matches!(g.floor(0.3), Err(Error::Range { .. })));
        assert!(matches!(g.ceil(-0.01), Err(Error::Range { .. })));
    }

    #[test]
    fn tail_keeps_global_times() {
        let g = TimeGrid::new(0.25, 20).unwrap();
        let t = g.tail(5).unwrap();
        assert_eq!(t.steps(), 15);
        assert_eq!(t.time(0), g.time(5));
        assert_eq!(t.time(15), 0.25);
        assert_eq!(t.index_of(g.time(6)).unwrap(), 1);
        assert!(t.index_of(0.0).is_err());
        assert!(g.index_of(0.013).is_err());
    }

    proptest::proptest! {
        #[test]
        fn floor_ceil_are_idempotent(s in 0.0f64..=1.0, n in 1usize..64) {
            let g = TimeGrid::new(1.0, n).unwrap();
            let c = g.ceil(s).unwrap();
            let f = g.floor(s).unwrap();
            proptest::prop_assert_eq!(g.floor(c).unwrap(), c);
            proptest::prop_assert_eq!(g.ceil(f).unwrap(), f);
            proptest::prop_assert!(f <= s && s <= c);
            proptest::prop_assert!(c - f <= g.h() * (1.0 + 1e-12));
        }
    }
}
