use crate::scalar::Scalar;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Log-distance path loss `PL(d) = PL0 + 10 n log10(d / d0)`, with optional
/// log-normal shadowing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDistance<T> {
    pub exponent: T,
    pub pl0_db: T,
    pub d0_m: T,
    pub shadowing_sigma_db: Option<T>,
}

impl<T: Scalar> LogDistance<T> {
    pub const DEFAULT_EXPONENT: f64 = 3.76;
    pub const DEFAULT_D0_M: f64 = 40.0;

    /// Picks PL0 so that a link with `budget_db` (tx power minus
    /// sensitivity) closes at exactly `range_m`.
    pub fn calibrated(exponent: T, d0_m: T, budget_db: T, range_m: T) -> Self {
        let pl0_db = budget_db - T::lit(10.0) * exponent * (range_m / d0_m).log10();
        LogDistance { exponent, pl0_db, d0_m, shadowing_sigma_db: None }
    }

    pub fn with_shadowing(mut self, sigma_db: T) -> Self {
        self.shadowing_sigma_db = Some(sigma_db);
        self
    }

    pub fn loss_db(&self, distance_m: T) -> T {
        let d = distance_m.max(T::one());
        self.pl0_db + T::lit(10.0) * self.exponent * (d / self.d0_m).log10()
    }

    /// Deterministic loss plus one shadowing draw, if enabled.
    pub fn sample_loss_db<R: Rng + ?Sized>(&self, distance_m: T, rng: &mut R) -> T {
        let base = self.loss_db(distance_m);
        match self.shadowing_sigma_db {
            Some(sigma) if sigma > T::zero() => {
                let normal = Normal::new(0.0, sigma.to_f64_lossy()).expect("finite sigma");
                base + T::lit(normal.sample(rng))
            }
            _ => base,
        }
    }

    /// Distance at which the loss equals `budget_db`.
    pub fn max_range(&self, budget_db: T) -> T {
        let exp = (budget_db - self.pl0_db) / (T::lit(10.0) * self.exponent);
        self.d0_m * T::lit(10.0).powf(exp)
    }
}
