//! Constant-update training schedule: epochs inversely proportional to the
//! dataset size so every size sees the same number of examples.

use crate::error::{Error, Result};

/// Epoch-hours spent at every dataset size.
pub const DEFAULT_BUDGET_HOURS: f64 = 3000.0;

/// `round(budget / hours)`, at least one epoch.
pub fn epochs_for(hours: f64, budget_hours: f64) -> Result<u64> {
    if !(hours > 0.0) || !hours.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dataset size must be positive, got {hours} h"
        )));
    }
    if !(budget_hours > 0.0) || !budget_hours.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "budget must be positive, got {budget_hours} h"
        )));
    }
    Ok(((budget_hours / hours).round() as u64).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_dataset_sizes() {
        for (h, e) in [(3.0, 1000), (10.0, 300), (30.0, 100), (100.0, 30), (300.0, 10)] {
            assert_eq!(epochs_for(h, DEFAULT_BUDGET_HOURS).unwrap(), e);
        }
    }

    #[test]
    fn huge_datasets_still_train_once() {
        assert_eq!(epochs_for(1e6, DEFAULT_BUDGET_HOURS).unwrap(), 1);
    }

    #[test]
    fn rejects_zero() {
        assert!(epochs_for(0.0, 3000.0).is_err());
    }
}
