use crate::error::{Error, Result};

/// Linear-interpolation percentile (`p` in [0, 100]) of unsorted data.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("percentile of an empty batch"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Exponentially averaged 5th–95th percentile spread of returns, floored at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleStats {
    pub value: f64,
    pub ema_decay: f64,
}

impl ScaleStats {
    pub fn new(ema_decay: f64) -> Self {
        Self { value: 1.0, ema_decay }
    }

    /// `max(1, P95 − P5)` of the batch.
    pub fn raw(batch: &[f64]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("scale update on an empty batch"));
        }
        let mut sorted = batch.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok((percentile_sorted(&sorted, 95.0) - percentile_sorted(&sorted, 5.0)).max(1.0))
    }

    /// Folds a batch into the running scale and returns the batch's raw spread.
    pub fn update(&mut self, batch: &[f64]) -> Result<f64> {
        let raw = Self::raw(batch)?;
        self.value = (self.ema_decay * self.value + (1.0 - self.ema_decay) * raw).max(1.0);
        Ok(raw)
    }
}
