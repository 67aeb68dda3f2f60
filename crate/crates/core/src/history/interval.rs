use std::fmt;

use super::HistoryError;

/// The past interval `I` on which histories are defined.
///
/// `Compact(r)` is `[-r, 0]`, `WholePast` is `(-inf, 0]` and `Point` is the
/// degenerate interval `{0}` used for ordinary differential equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PastInterval {
    Compact(f64),
    WholePast,
    Point,
}

impl PastInterval {
    pub fn compact(r: f64) -> Result<Self, HistoryError> {
        if r.is_finite() && r > 0.0 {
            Ok(PastInterval::Compact(r))
        } else {
            Err(HistoryError::InvalidInterval(r))
        }
    }

    /// Infimum of the interval (`-inf` for the whole past).
    pub fn lower(&self) -> f64 {
        match *self {
            PastInterval::Compact(r) => -r,
            PastInterval::WholePast => f64::NEG_INFINITY,
            PastInterval::Point => 0.0,
        }
    }

    pub fn length(&self) -> f64 {
        -self.lower()
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta <= 0.0 && theta >= self.lower()
    }

    /// Clips a look-back window `[-reach, 0]` to the interval.
    pub fn clip_reach(&self, reach: f64) -> f64 {
        reach.max(0.0).min(self.length())
    }

    pub fn is_point(&self) -> bool {
        matches!(self, PastInterval::Point)
    }
}

impl fmt::Display for PastInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PastInterval::Compact(r) => write!(f, "[-{r}, 0]"),
            PastInterval::WholePast => write!(f, "(-inf, 0]"),
            PastInterval::Point => write!(f, "{{0}}"),
        }
    }
}
