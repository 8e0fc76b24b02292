//! Mapping raw scores to outcomes in `[0, 1]`.

use alloc::vec::Vec;

/// Minimum history length before scores are graded.
pub const COLD_START: usize = 5;
/// Neutral outcome returned during cold start.
pub const NEUTRAL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OutcomeMode {
    /// `(raw - floor) / (p90 - floor)`, clamped.
    #[default]
    Fractional,
    /// `1` when `raw >= p90`, else `0`.
    Binary,
}

/// Running normalizer with the 90th percentile as ceiling and the running
/// minimum as floor.
#[derive(Debug, Clone, Default)]
pub struct Normalizer {
    /// Kept sorted ascending.
    sorted: Vec<f64>,
    mode: OutcomeMode,
}

impl Normalizer {
    pub fn new(mode: OutcomeMode) -> Self {
        Self { sorted: Vec::new(), mode }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn floor(&self) -> Option<f64> {
        self.sorted.first().copied()
    }

    /// Linear-interpolated 90th percentile of the history.
    pub fn p90(&self) -> Option<f64> {
        let n = self.sorted.len();
        if n == 0 {
            return None;
        }
        let rank = 0.9 * (n - 1) as f64;
        let lo = libm::floor(rank) as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = rank - lo as f64;
        Some(self.sorted[lo] + frac * (self.sorted[hi] - self.sorted[lo]))
    }

    /// Grades `raw` against the current history without recording it.
    pub fn grade(&self, raw: f64) -> f64 {
        if self.sorted.len() < COLD_START {
            return NEUTRAL;
        }
        let (floor, p90) = (self.floor().expect("nonempty"), self.p90().expect("nonempty"));
        if p90 <= floor {
            return NEUTRAL;
        }
        match self.mode {
            OutcomeMode::Fractional => ((raw - floor) / (p90 - floor)).clamp(0.0, 1.0),
            OutcomeMode::Binary => f64::from(u8::from(raw >= p90)),
        }
    }

    /// Records `raw`, then grades it against the updated history.
    pub fn normalize(&mut self, raw: f64) -> f64 {
        let raw = if raw.is_nan() { f64::NEG_INFINITY } else { raw };
        let at = self.sorted.partition_point(|&x| x <= raw);
        self.sorted.insert(at, raw);
        self.grade(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cold_start_is_neutral() {
        let mut n = Normalizer::default();
        assert_eq!(n.normalize(-7.0), 0.5);
        for x in [1.0, 2.0, 3.0] {
            assert_eq!(n.normalize(x), 0.5);
        }
    }

    #[test]
    fn endpoints_and_clamp() {
        let mut n = Normalizer::default();
        for x in 0..10 {
            n.normalize(f64::from(x));
        }
        let p90 = n.p90().unwrap();
        assert!((p90 - 8.1).abs() < 1e-12);
        assert_eq!(n.grade(p90), 1.0);
        assert_eq!(n.grade(0.0), 0.0);
        assert_eq!(n.grade(100.0), 1.0);
        assert_eq!(n.grade(-100.0), 0.0);
        // Recording a new maximum: p90 moves but the score stays at the ceiling.
        assert_eq!(n.normalize(50.0), 1.0);
        // A new minimum grades to zero.
        assert_eq!(n.normalize(-1.0), 0.0);
    }

    #[test]
    fn degenerate_history_is_neutral() {
        let mut n = Normalizer::default();
        for _ in 0..8 {
            assert_eq!(n.normalize(3.0), 0.5);
        }
    }

    #[test]
    fn binary_mode_thresholds_at_p90() {
        let mut n = Normalizer::new(OutcomeMode::Binary);
        for x in 0..10 {
            n.normalize(f64::from(x));
        }
        assert_eq!(n.grade(8.1), 1.0);
        assert_eq!(n.grade(8.0), 0.0);
    }
}
