use thiserror::Error;

/// Smoothing weight used for both the RTT and the inter-ACK estimators
/// unless configured otherwise.
pub const DEFAULT_ALPHA: f64 = 0.125;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum EwmaError {
    #[error("smoothing weight {0} is outside (0, 1]")]
    InvalidAlpha(f64),
    #[error("sample {0} is not positive")]
    NonPositiveSample(f64),
}

/// Exponentially weighted moving average of a positive quantity (seconds).
///
/// The first sample seeds the estimate; later samples blend in with weight
/// `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ewma {
    alpha: f64,
    value: Option<f64>,
}

impl Ewma {
    pub fn new(alpha: f64) -> Result<Self, EwmaError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(EwmaError::InvalidAlpha(alpha));
        }
        Ok(Ewma { alpha, value: None })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    pub fn is_initialized(&self) -> bool {
        self.value.is_some()
    }

    pub fn update(&mut self, sample: f64) -> Result<f64, EwmaError> {
        if !(sample > 0.0) || !sample.is_finite() {
            return Err(EwmaError::NonPositiveSample(sample));
        }
        let next = match self.value {
            None => sample,
            Some(v) => {
                let blended = (1.0 - self.alpha) * v + self.alpha * sample;
                // rounding must not leave the convex hull of (v, sample)
                blended.clamp(v.min(sample), v.max(sample))
            }
        };
        self.value = Some(next);
        Ok(next)
    }
}

impl Default for Ewma {
    fn default() -> Self {
        Ewma {
            alpha: DEFAULT_ALPHA,
            value: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn blends_with_alpha() {
        let mut e = Ewma::new(0.25).unwrap();
        e.update(0.100).unwrap();
        let v = e.update(0.200).unwrap();
        assert!((v - 0.125).abs() < 1e-15);
    }

    #[test]
    fn first_sample_seeds() {
        let mut e = Ewma::default();
        assert!(!e.is_initialized());
        assert_eq!(e.update(0.080).unwrap(), 0.080);
        assert_eq!(e.alpha(), 0.125);
    }

    #[test]
    fn alpha_one_is_memoryless() {
        let mut e = Ewma::new(1.0).unwrap();
        e.update(7.0).unwrap();
        assert_eq!(e.update(0.3).unwrap(), 0.3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Ewma::new(0.0).is_err());
        assert!(Ewma::new(1.5).is_err());
        assert!(Ewma::new(f64::NAN).is_err());
        let mut e = Ewma::default();
        assert_eq!(e.update(0.0), Err(EwmaError::NonPositiveSample(0.0)));
        assert!(e.update(-1.0).is_err());
        assert!(e.update(f64::INFINITY).is_err());
        assert_eq!(e.value(), None);
    }

    proptest! {
        #[test]
        fn stays_within_sample_range(
            alpha in 0.001f64..=1.0,
            samples in prop::collection::vec(1e-6f64..1e3, 1..64),
        ) {
            let mut e = Ewma::new(alpha).unwrap();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in samples {
                lo = lo.min(s);
                hi = hi.max(s);
                let v = e.update(s).unwrap();
                prop_assert!(v >= lo && v <= hi, "{v} outside [{lo}, {hi}]");
            }
        }
    }
}
