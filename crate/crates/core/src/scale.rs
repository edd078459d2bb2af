use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bounds and granularity of a dataset's explicit ratings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid rating scale {min}..{max} step {step}")]
pub struct ScaleError {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl RatingScale {
    /// Half-star scale used by the current MovieLens releases.
    pub const HALF_STARS: RatingScale = RatingScale {
        min: 0.5,
        max: 5.0,
        step: 0.5,
    };

    /// Integer 1..5 scale used by ML-100K and ML-1M.
    pub const FIVE_STARS: RatingScale = RatingScale {
        min: 1.0,
        max: 5.0,
        step: 1.0,
    };

    pub fn new(min: f64, max: f64, step: f64) -> Result<Self, ScaleError> {
        let scale = RatingScale { min, max, step };
        scale.validate()?;
        Ok(scale)
    }

    pub fn validate(&self) -> Result<(), ScaleError> {
        let ok = self.min.is_finite()
            && self.max.is_finite()
            && self.step.is_finite()
            && self.min < self.max
            && self.step > 0.0
            && self.step <= self.max - self.min;
        if ok {
            Ok(())
        } else {
            Err(ScaleError {
                min: self.min,
                max: self.max,
                step: self.step,
            })
        }
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, value: f64) -> bool {
        value.is_finite() && value >= self.min && value <= self.max
    }

    /// True when `value` is inside the bounds and a whole number of steps above `min`.
    pub fn is_on_step(&self, value: f64) -> bool {
        if !self.contains(value) {
            return false;
        }
        let steps = (value - self.min) / self.step;
        libm::fabs(steps - libm::round(steps)) < 1e-9
    }

    /// Clips `value` to the bounds and rounds it to the nearest step.
    pub fn snap(&self, value: f64) -> f64 {
        let clipped = value.clamp(self.min, self.max);
        let steps = libm::round((clipped - self.min) / self.step);
        (self.min + steps * self.step).min(self.max)
    }

    /// Every admissible rating value, ascending.
    pub fn points(&self) -> Vec<f64> {
        let n = libm::floor((self.range() / self.step) + 1e-9) as usize;
        (0..=n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        RatingScale::HALF_STARS
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_star_points() {
        let pts = RatingScale::HALF_STARS.points();
        assert_eq!(pts.len(), 10);
        assert_eq!(pts[0], 0.5);
        assert_eq!(pts[9], 5.0);
    }

    #[test]
    fn snap_clips_and_rounds() {
        let s = RatingScale::FIVE_STARS;
        assert_eq!(s.snap(7.3), 5.0);
        assert_eq!(s.snap(-2.0), 1.0);
        assert_eq!(s.snap(3.4), 3.0);
        assert_eq!(s.snap(3.6), 4.0);
        assert_eq!(RatingScale::HALF_STARS.snap(3.3), 3.5);
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(RatingScale::new(5.0, 1.0, 1.0).is_err());
        assert!(RatingScale::new(1.0, 5.0, 0.0).is_err());
        assert!(RatingScale::new(1.0, 5.0, f64::NAN).is_err());
    }

    #[test]
    fn on_step() {
        let s = RatingScale::HALF_STARS;
        assert!(s.is_on_step(3.5));
        assert!(!s.is_on_step(3.25));
        assert!(!s.is_on_step(0.0));
    }
}
