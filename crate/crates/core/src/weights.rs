//! Generalized Bernoulli weights `B` used to modulate diffusion in the
//! Scharfetter-Gummel flux.
//!
//! Every weight satisfies `0 < B(s) <= 1` for `s >= 0`, `B(0) = 1` and the
//! coercivity bound `B(s) >= 1 - alpha * s` on `[0, 1/alpha]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude the Bernoulli function is evaluated by its Taylor
/// polynomial.
const BERNOULLI_SERIES_THRESHOLD: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `B(s) = 1`.
    Upwind,
    /// `B(s) = s / (e^s - 1)`, the classical Scharfetter-Gummel weight.
    Bernoulli,
    /// `B(s) = 2 / (e^s + 1)`.
    Sigmoid,
    /// `B(s) = e^{-s/2}`.
    GeometricMean,
}

impl WeightKind {
    pub const ALL: [WeightKind; 4] = [
        WeightKind::Upwind,
        WeightKind::Bernoulli,
        WeightKind::Sigmoid,
        WeightKind::GeometricMean,
    ];

    /// Coercivity constant `alpha` with `B(s) >= 1 - alpha s` on `[0, 1/alpha]`.
    pub fn alpha(self) -> f64 {
        match self {
            WeightKind::Upwind => 0.0,
            WeightKind::Bernoulli | WeightKind::Sigmoid | WeightKind::GeometricMean => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightKind::Upwind => "upwind",
            WeightKind::Bernoulli => "bernoulli",
            WeightKind::Sigmoid => "sigmoid",
            WeightKind::GeometricMean => "geometric_mean",
        }
    }

    /// `B(s)` for `s >= 0`.
    pub fn eval(self, s: f64) -> Result<f64> {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::usage(format!(
                "weight argument must be finite and nonnegative, got {s}"
            )));
        }
        Ok(self.eval_unchecked(s))
    }

    /// `B_kappa(s) = kappa * B(s / kappa)`.
    pub fn eval_scaled(self, kappa: f64, s: f64) -> Result<f64> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::config(format!("kappa must be positive, got {kappa}")));
        }
        Ok(kappa * self.eval(s / kappa)?)
    }

    #[inline]
    pub(crate) fn eval_unchecked(self, s: f64) -> f64 {
        match self {
            WeightKind::Upwind => 1.0,
            WeightKind::Bernoulli => bernoulli(s),
            WeightKind::Sigmoid => {
                let e = (-s).exp();
                2.0 * e / (1.0 + e)
            }
            WeightKind::GeometricMean => (-0.5 * s).exp(),
        }
    }

    #[inline]
    pub(crate) fn eval_scaled_unchecked(self, kappa: f64, s: f64) -> f64 {
        kappa * self.eval_unchecked(s / kappa)
    }
}

impl std::str::FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown weight '{s}'")))
    }
}

/// Bernoulli function `s / (e^s - 1)` on the whole real line.
///
/// Only the nonnegative half enters the flux; the negative half is used to
/// check the reflection identity `B(-s) = B(s) + s`.
pub fn bernoulli(s: f64) -> f64 {
    if s.abs() < BERNOULLI_SERIES_THRESHOLD {
        1.0 - s / 2.0 + s * s / 12.0
    } else if s > 1.0 {
        let e = (-s).exp();
        s * e / (-(-s).exp_m1())
    } else {
        s / s.exp_m1()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn values_at_zero() {
        for k in WeightKind::ALL {
            assert_eq!(k.eval(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn bernoulli_at_one() {
        // 1/(e-1) = 0.58197670686932642439...
        let b = WeightKind::Bernoulli.eval(1.0).unwrap();
        assert!((b - 0.581_976_706_869_326_4).abs() < 1e-15);
    }

    #[test]
    fn upwind_is_constant() {
        assert_eq!(WeightKind::Upwind.eval(7.3).unwrap(), 1.0);
        assert_eq!(WeightKind::Upwind.eval_scaled(0.01, 5.0).unwrap(), 0.01);
    }

    #[test]
    fn scaled_weight() {
        for k in WeightKind::ALL {
            assert_eq!(k.eval_scaled(0.25, 0.0).unwrap(), 0.25);
        }
        let tiny = WeightKind::Bernoulli.eval_scaled(1e-6, 1.0).unwrap();
        assert!((0.0..=1e-6 * 1e-300).contains(&tiny));
        assert!(WeightKind::Bernoulli.eval_scaled(0.0, 1.0).is_err());
        assert!(WeightKind::Bernoulli.eval_scaled(-1.0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(WeightKind::Bernoulli.eval(-1e-3).is_err());
        assert!(WeightKind::Sigmoid.eval(f64::NAN).is_err());
        assert!(WeightKind::GeometricMean.eval(f64::INFINITY).is_err());
    }

    #[test]
    fn large_arguments_underflow_cleanly() {
        for k in [WeightKind::Bernoulli, WeightKind::Sigmoid, WeightKind::GeometricMean] {
            for s in [50.0, 700.0, 710.0, 1e4, 1e300] {
                let b = k.eval(s).unwrap();
                assert!(b.is_finite() && (0.0..1e-10).contains(&b), "{k:?} {s} {b}");
            }
        }
    }

    #[test]
    fn series_switchover_is_continuous() {
        let t = BERNOULLI_SERIES_THRESHOLD;
        let below = bernoulli(t * (1.0 - 1e-12));
        let above = bernoulli(t * (1.0 + 1e-12));
        assert!((below - above).abs() <= 1e-14);
        let below = bernoulli(-t * (1.0 - 1e-12));
        let above = bernoulli(-t * (1.0 + 1e-12));
        assert!((below - above).abs() <= 1e-14);
        // the s = 1 branch switch as well
        assert!((bernoulli(1.0 - 1e-15) - bernoulli(1.0 + 1e-15)).abs() <= 1e-14);
    }

    #[test]
    fn bernoulli_reflection_identity() {
        let mut s = -30.0;
        while s <= 30.0 {
            let lhs = bernoulli(-s);
            let rhs = bernoulli(s) + s;
            assert!((lhs - rhs).abs() <= 1e-13, "s = {s}: {lhs} vs {rhs}");
            s += 0.0137;
        }
    }

    #[test]
    fn names_roundtrip() {
        for k in WeightKind::ALL {
            assert_eq!(k.name().parse::<WeightKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("stolarsky".parse::<WeightKind>().is_err());
    }

    proptest! {
        #[test]
        fn bounded_in_unit_interval(s in 0.0f64..1e3) {
            for k in WeightKind::ALL {
                let b = k.eval(s).unwrap();
                prop_assert!(b <= 1.0);
                prop_assert!(b >= 0.0);
                if s < 700.0 {
                    prop_assert!(b > 0.0);
                }
            }
        }

        #[test]
        fn coercivity_bound(frac in 0.0f64..=1.0) {
            for k in WeightKind::ALL {
                let alpha = k.alpha();
                let s = if alpha > 0.0 { frac / alpha } else { frac * 1e3 };
                prop_assert!(k.eval(s).unwrap() >= 1.0 - alpha * s - 1e-12);
            }
        }

        #[test]
        fn scaled_weight_is_continuous_in_kappa(kappa in 1e-3f64..10.0, s in 0.0f64..10.0) {
            for k in WeightKind::ALL {
                let a = k.eval_scaled(kappa, s).unwrap();
                let b = k.eval_scaled(kappa * (1.0 + 1e-9), s).unwrap();
                prop_assert!((a - b).abs() <= 1e-7 * kappa.max(1.0));
                prop_assert!(a <= kappa * (1.0 + 1e-15));
            }
        }
    }
}
