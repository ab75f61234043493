//! Gaussian pulse schedules and the instantaneous couplings they induce.
//!
//! Time is dimensionless (`T`), in units of the first pulse's intensity
//! 1/e half-duration. The first pulse peaks at `T = 0` by construction;
//! `delta2`/`delta3` place the peaks of the second and third pulse, with
//! negative values meaning "peaks earlier" (the counterintuitive ordering
//! has the third pulse ahead of the second).

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Cross ionization-width coupling amplitude between `n` and `f`.
///
/// `Auto` keeps the Cauchy-Schwarz equality `g_nf(T)^2 = g_nn(T) g_ff(T)`
/// exactly at every instant; an explicit peak value is rescaled onto the
/// same geometric-mean envelope and must satisfy
/// `g_nf0^2 <= g_nn0 * g_ff0`, so the inequality still holds everywhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CrossCoupling {
    Auto,
    Explicit(f64),
}

impl Serialize for CrossCoupling {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CrossCoupling::Auto => serializer.serialize_str("auto"),
            CrossCoupling::Explicit(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for CrossCoupling {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct CrossVisitor;
        impl<'de> Visitor<'de> for CrossVisitor {
            type Value = CrossCoupling;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a non-negative number or the string \"auto\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(CrossCoupling::Explicit(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(CrossCoupling::Explicit(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(CrossCoupling::Explicit(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                if v == "auto" {
                    Ok(CrossCoupling::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        deserializer.deserialize_any(CrossVisitor)
    }
}

/// Peak strengths, delays, and durations of the three Gaussian pulses.
///
/// Envelope forms:
/// - `g_mn(T) = g_mn0 * exp(-T^2 / 2)` (field-amplitude Gaussian),
/// - `g_nn(T) = g_nn0 * exp(-((T - delta2) / d2)^2)` (intensity Gaussian),
/// - `g_ff(T) = g_ff0 * exp(-((T - delta3) / d3)^2)`,
/// - `g_nf(T) = g_nf0 * exp(-(T - delta2)^2 / (2 d2^2)) * exp(-(T - delta3)^2 / (2 d3^2))`,
///
/// i.e. the cross coupling rides the geometric mean of the two width
/// envelopes. A disabled pulse contributes zero; the cross coupling needs
/// both the second and third pulse enabled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    /// Peak one-photon Rabi coupling of the `m`-`n` transition.
    pub g_mn0: f64,
    /// Peak light-induced width of level `n` (second pulse).
    pub g_nn0: f64,
    /// Peak light-induced width of level `f` (third pulse).
    pub g_ff0: f64,
    /// Peak cross coupling, or `Auto` for the geometric mean.
    pub g_nf0: CrossCoupling,
    /// Delay of the second pulse's peak relative to `T = 0`.
    pub delta2: f64,
    /// Delay of the third pulse's peak relative to `T = 0`.
    pub delta3: f64,
    /// Duration of the second pulse over the first pulse's duration.
    pub d2: f64,
    /// Duration of the third pulse over the first pulse's duration.
    pub d3: f64,
    pub e1_enabled: bool,
    pub e2_enabled: bool,
    pub e3_enabled: bool,
}

/// Instantaneous non-negative coupling values at one time point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstantCouplings {
    pub g_mn: f64,
    pub g_nn: f64,
    pub g_ff: f64,
    pub g_nf: f64,
}

impl InstantCouplings {
    pub const ZERO: InstantCouplings = InstantCouplings {
        g_mn: 0.0,
        g_nn: 0.0,
        g_ff: 0.0,
        g_nf: 0.0,
    };

    pub(crate) fn check_finite(&self) -> Result<()> {
        for (v, name) in [
            (self.g_mn, "g_mn"),
            (self.g_nn, "g_nn"),
            (self.g_ff, "g_ff"),
            (self.g_nf, "g_nf"),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite { quantity: name });
            }
        }
        Ok(())
    }
}

impl Default for PulseSchedule {
    /// All three pulses enabled at unit durations, zero delays, zero peaks.
    fn default() -> Self {
        PulseSchedule {
            g_mn0: 0.0,
            g_nn0: 0.0,
            g_ff0: 0.0,
            g_nf0: CrossCoupling::Auto,
            delta2: 0.0,
            delta3: 0.0,
            d2: 1.0,
            d3: 1.0,
            e1_enabled: true,
            e2_enabled: true,
            e3_enabled: true,
        }
    }
}

impl PulseSchedule {
    /// Peak value of the cross coupling envelope.
    pub fn peak_cross(&self) -> f64 {
        match self.g_nf0 {
            CrossCoupling::Auto => (self.g_nn0 * self.g_ff0).sqrt(),
            CrossCoupling::Explicit(v) => v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.d2) {
            return Err(Error::InvalidSchedule(format!(
                "d2 must be positive and finite, got {}",
                self.d2
            )));
        }
        if !positive(self.d3) {
            return Err(Error::InvalidSchedule(format!(
                "d3 must be positive and finite, got {}",
                self.d3
            )));
        }
        for (v, name) in [
            (self.g_mn0, "g_mn0"),
            (self.g_nn0, "g_nn0"),
            (self.g_ff0, "g_ff0"),
            (self.delta2, "delta2"),
            (self.delta3, "delta3"),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite { quantity: name });
            }
        }
        for (v, name) in [
            (self.g_mn0, "g_mn0"),
            (self.g_nn0, "g_nn0"),
            (self.g_ff0, "g_ff0"),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidSchedule(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if let CrossCoupling::Explicit(v) = self.g_nf0 {
            if !v.is_finite() {
                return Err(Error::NonFinite { quantity: "g_nf0" });
            }
            if v < 0.0 {
                return Err(Error::InvalidSchedule(format!(
                    "g_nf0 must be non-negative, got {v}"
                )));
            }
            // keeps g_nf(T)^2 <= g_nn(T) g_ff(T) at every instant
            let bound = self.g_nn0 * self.g_ff0;
            if v * v > bound * (1.0 + 1e-12) + f64::MIN_POSITIVE {
                return Err(Error::InvalidSchedule(format!(
                    "g_nf0 = {v} violates g_nf0^2 <= g_nn0 * g_ff0 = {bound}"
                )));
            }
        }
        Ok(())
    }

    /// Instantaneous couplings at dimensionless time `T`.
    pub fn couplings_at(&self, t: f64) -> Result<InstantCouplings> {
        self.validate()?;
        if !t.is_finite() {
            return Err(Error::NonFinite { quantity: "T" });
        }
        Ok(self.eval(t))
    }

    /// Envelope evaluation without re-validation; schedule assumed valid.
    pub(crate) fn eval(&self, t: f64) -> InstantCouplings {
        let g_mn = if self.e1_enabled {
            self.g_mn0 * (-t * t / 2.0).exp()
        } else {
            0.0
        };
        let u2 = (t - self.delta2) / self.d2;
        let u3 = (t - self.delta3) / self.d3;
        let g_nn = if self.e2_enabled {
            self.g_nn0 * (-u2 * u2).exp()
        } else {
            0.0
        };
        let g_ff = if self.e3_enabled {
            self.g_ff0 * (-u3 * u3).exp()
        } else {
            0.0
        };
        let g_nf = if self.e2_enabled && self.e3_enabled {
            self.peak_cross() * (-(u2 * u2 + u3 * u3) / 2.0).exp()
        } else {
            0.0
        };
        InstantCouplings {
            g_mn,
            g_nn,
            g_ff,
            g_nf,
        }
    }

    /// Peak times and durations of the enabled pulses, for window sizing.
    pub(crate) fn enabled_peaks(&self) -> Vec<(f64, f64)> {
        let mut peaks = Vec::new();
        if self.e1_enabled {
            peaks.push((0.0, 1.0));
        }
        if self.e2_enabled {
            peaks.push((self.delta2, self.d2));
        }
        if self.e3_enabled {
            peaks.push((self.delta3, self.d3));
        }
        peaks
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig2_like() -> PulseSchedule {
        PulseSchedule {
            g_nn0: 3.61,
            g_ff0: 9.61,
            delta3: -3.9,
            e1_enabled: false,
            ..PulseSchedule::default()
        }
    }

    #[test]
    fn auto_cross_peaks_match_quoted_values() {
        // 3.61 * 9.61 = (1.9 * 3.1)^2 and 0.25 * 0.36 = 0.3^2
        let s = fig2_like();
        assert_relative_eq!(s.peak_cross(), 5.89, max_relative = 1e-12);
        let s = PulseSchedule {
            g_nn0: 0.25,
            g_ff0: 0.36,
            ..PulseSchedule::default()
        };
        assert_relative_eq!(s.peak_cross(), 0.30, max_relative = 1e-12);
    }

    #[test]
    fn envelopes_at_peak_and_tail() {
        let s = fig2_like();
        let at_peak2 = s.couplings_at(0.0).unwrap();
        assert_relative_eq!(at_peak2.g_nn, 3.61);
        let at_peak3 = s.couplings_at(-3.9).unwrap();
        assert_relative_eq!(at_peak3.g_ff, 9.61);
        // far tail: everything dead
        let tail = s.couplings_at(-300.0).unwrap();
        assert_eq!(
            (tail.g_mn, tail.g_nn, tail.g_ff, tail.g_nf),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn disabled_pulses_contribute_zero() {
        let mut s = fig2_like();
        s.g_mn0 = 2.0;
        let c = s.couplings_at(0.0).unwrap();
        assert_eq!(c.g_mn, 0.0); // e1 disabled

        s.e3_enabled = false;
        let c = s.couplings_at(0.0).unwrap();
        assert_eq!(c.g_ff, 0.0);
        assert_eq!(c.g_nf, 0.0); // cross needs both width pulses
        assert!(c.g_nn > 0.0);
    }

    #[test]
    fn nonpositive_duration_rejected() {
        let mut s = fig2_like();
        s.d2 = 0.0;
        assert!(matches!(
            s.couplings_at(0.0),
            Err(Error::InvalidSchedule(_))
        ));
        s.d2 = 1.0;
        s.d3 = -0.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn explicit_cross_above_geometric_mean_rejected() {
        let mut s = fig2_like();
        s.g_nf0 = CrossCoupling::Explicit(5.89);
        assert!(s.validate().is_ok());
        s.g_nf0 = CrossCoupling::Explicit(6.0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn explicit_cross_rescales_same_envelope() {
        let mut s = fig2_like();
        s.g_nf0 = CrossCoupling::Explicit(2.0);
        let auto = fig2_like();
        for t in [-5.0, -3.9, -1.0, 0.0, 2.5] {
            let ce = s.couplings_at(t).unwrap();
            let ca = auto.couplings_at(t).unwrap();
            assert_relative_eq!(ce.g_nf, ca.g_nf * 2.0 / 5.89, max_relative = 1e-12);
        }
    }

    #[test]
    fn cross_serde_roundtrip() {
        let s = fig2_like();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"auto\""));
        let back: PulseSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);

        let mut e = fig2_like();
        e.g_nf0 = CrossCoupling::Explicit(0.3);
        let back: PulseSchedule =
            serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(e, back);
    }

    proptest! {
        #[test]
        fn cauchy_schwarz_everywhere(
            g_nn0 in 0.0..20.0f64,
            g_ff0 in 0.0..20.0f64,
            frac in 0.0..1.0f64,
            d2 in 0.3..3.0f64,
            d3 in 0.3..3.0f64,
            delta2 in -5.0..5.0f64,
            delta3 in -5.0..5.0f64,
            t in -10.0..10.0f64,
            explicit in proptest::bool::ANY,
        ) {
            let g_nf0 = if explicit {
                CrossCoupling::Explicit(frac * (g_nn0 * g_ff0).sqrt())
            } else {
                CrossCoupling::Auto
            };
            let s = PulseSchedule {
                g_mn0: 0.0, g_nn0, g_ff0, g_nf0,
                delta2, delta3, d2, d3,
                e1_enabled: true, e2_enabled: true, e3_enabled: true,
            };
            s.validate().unwrap();
            let c = s.couplings_at(t).unwrap();
            prop_assert!(c.g_nn >= 0.0 && c.g_ff >= 0.0 && c.g_nf >= 0.0);
            prop_assert!(c.g_nf * c.g_nf <= c.g_nn * c.g_ff * (1.0 + 1e-9) + 1e-300);
            if !explicit {
                // equality in auto mode
                prop_assert!((c.g_nf * c.g_nf - c.g_nn * c.g_ff).abs()
                    <= 1e-9 * (c.g_nn * c.g_ff).max(1e-300));
            }
        }

        #[test]
        fn time_shift_covariance_without_first_pulse(
            shift in -4.0..4.0f64,
            t in -6.0..6.0f64,
        ) {
            let base = fig2_like();
            let mut moved = base.clone();
            moved.delta2 += shift;
            moved.delta3 += shift;
            let c0 = base.couplings_at(t).unwrap();
            let c1 = moved.couplings_at(t + shift).unwrap();
            prop_assert!((c0.g_nn - c1.g_nn).abs() < 1e-12 * (1.0 + c0.g_nn));
            prop_assert!((c0.g_ff - c1.g_ff).abs() < 1e-12 * (1.0 + c0.g_ff));
            prop_assert!((c0.g_nf - c1.g_nf).abs() < 1e-12 * (1.0 + c0.g_nf));
        }
    }
}
