//! Unbiased random quantizers with time-varying levels and bit accounting.
//!
//! A quantizer `Q_t` satisfies `E[Q_t(y)] = y` and
//! `E‖Q_t(y) − y‖² ≤ ε_{d,k_t}‖y‖²`, where the resolution `ε` shrinks as the
//! level `k_t` grows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::norm2;

/// Bits charged per coordinate for an unquantized value.
pub const EXACT_BITS_PER_COORD: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizerKind {
    Identity,
    /// Coordinatewise stochastic rounding to the grid `Z/k_t`.
    Probabilistic,
    /// Stochastic k-level quantization of `|y_j|/‖y‖`, sent with the norm.
    KLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LevelSchedule {
    /// `k_t = ⌈t^exponent⌉`.
    Power { exponent: f64 },
    /// Levels chosen so that `ε_{d,k_t} ≤ κ₁/t^ξ`.
    Resolution { kappa1: f64, xi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub kind: QuantizerKind,
    pub schedule: LevelSchedule,
    /// Upper limit `B` on the level.
    pub cap: Option<u64>,
    /// Half-width of the interval assumed representable; only affects bit counts.
    pub value_range: f64,
}

/// A quantized vector as transmitted.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMessage {
    pub payload: Vec<f64>,
    pub bits: u64,
    /// Payload equals the input bit for bit.
    pub exact: bool,
}

impl QuantizedMessage {
    /// Unquantized transmission of `y`.
    pub fn exact(y: &[f64]) -> Self {
        Self {
            payload: y.to_vec(),
            bits: y.len() as u64 * EXACT_BITS_PER_COORD,
            exact: true,
        }
    }
}

/// `⌈t^p⌉`, snapping values within float noise of an integer.
fn ceil_pow(t: usize, p: f64) -> f64 {
    let v = (t as f64).powf(p);
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r.max(1.0)
    } else {
        v.ceil().max(1.0)
    }
}

fn ceil_log2(m: u64) -> u64 {
    if m <= 1 {
        0
    } else {
        u64::from((m - 1).ilog2()) + 1
    }
}

impl QuantizerSpec {
    pub fn identity() -> Self {
        Self {
            kind: QuantizerKind::Identity,
            schedule: LevelSchedule::Power { exponent: 0.0 },
            cap: None,
            value_range: 1.0,
        }
    }

    pub fn new(
        kind: QuantizerKind,
        schedule: LevelSchedule,
        cap: Option<u64>,
        value_range: f64,
    ) -> Result<Self> {
        let spec = Self {
            kind,
            schedule,
            cap,
            value_range,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn probabilistic_power(exponent: f64, cap: Option<u64>, value_range: f64) -> Result<Self> {
        Self::new(
            QuantizerKind::Probabilistic,
            LevelSchedule::Power { exponent },
            cap,
            value_range,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == QuantizerKind::Identity {
            return Ok(());
        }
        if !(self.value_range.is_finite() && self.value_range > 0.0) {
            return Err(invalid(format!(
                "value_range must be positive, got {}",
                self.value_range
            )));
        }
        if self.cap == Some(0) {
            return Err(invalid("level cap B must be a positive integer"));
        }
        match self.schedule {
            LevelSchedule::Power { exponent } if !(exponent.is_finite() && exponent >= 0.0) => {
                Err(invalid(format!("level exponent must be nonnegative, got {exponent}")))
            }
            LevelSchedule::Resolution { kappa1, xi }
                if !(kappa1.is_finite() && kappa1 > 0.0 && xi.is_finite() && xi > 0.0) =>
            {
                Err(invalid("resolution schedule needs kappa1 > 0 and xi > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Effective level `k_t` (cap included); `None` for the identity kind.
    pub fn level_at(&self, t: usize, dim: usize) -> Option<u64> {
        let t = t.max(1);
        let raw = match (self.kind, self.schedule) {
            (QuantizerKind::Identity, _) => return None,
            (_, LevelSchedule::Power { exponent }) => ceil_pow(t, exponent),
            (kind, LevelSchedule::Resolution { kappa1, xi }) => {
                let txi = (t as f64).powf(xi);
                let d = dim as f64;
                let v = match kind {
                    // d/(4k²) ≤ κ₁/t^ξ
                    QuantizerKind::Probabilistic => (d * txi / (4.0 * kappa1)).sqrt(),
                    // min(d/k², √d/k) ≤ d/k² ≤ κ₁/t^ξ
                    _ => (d * txi / kappa1).sqrt(),
                };
                v.ceil().max(1.0)
            }
        };
        let k = if raw >= u64::MAX as f64 { u64::MAX } else { raw as u64 };
        Some(self.cap.map_or(k, |b| k.min(b)))
    }

    /// Resolution `ε_{d,k_t}`; zero for the identity kind.
    pub fn resolution(&self, dim: usize, t: usize) -> f64 {
        let Some(k) = self.level_at(t, dim) else {
            return 0.0;
        };
        let k = k as f64;
        let d = dim as f64;
        let eps = match self.kind {
            QuantizerKind::Identity => 0.0,
            QuantizerKind::Probabilistic => d / (4.0 * k * k),
            QuantizerKind::KLevel => (d / (k * k)).min(d.sqrt() / k),
        };
        match self.schedule {
            // the scheduled value is the contract; capped levels may exceed it
            LevelSchedule::Resolution { kappa1, xi } => eps.max(kappa1 / (t as f64).powf(xi)),
            LevelSchedule::Power { .. } => eps,
        }
    }

    /// Bits for one message of dimension `dim` whose coordinates lie within
    /// `range` (clamped below by `value_range`).
    fn bits_for_range(&self, dim: usize, t: usize, range: f64) -> u64 {
        let d = dim as u64;
        match (self.kind, self.level_at(t, dim)) {
            (QuantizerKind::Probabilistic, Some(k)) => {
                let span = (range.max(self.value_range) * k as f64).ceil() as u64;
                d * ceil_log2(2 * span + 1)
            }
            (QuantizerKind::KLevel, Some(k)) => d * ceil_log2(2 * k + 1) + EXACT_BITS_PER_COORD,
            _ => d * EXACT_BITS_PER_COORD,
        }
    }

    /// Nominal bits per message at round `t`.
    pub fn message_bits(&self, dim: usize, t: usize) -> u64 {
        self.bits_for_range(dim, t, self.value_range)
    }

    /// Quantizes `y` at round `t`, one uniform draw per coordinate.
    pub fn quantize<R: Rng + ?Sized>(
        &self,
        y: &[f64],
        t: usize,
        rng: &mut R,
    ) -> Result<QuantizedMessage> {
        if t == 0 {
            return Err(invalid("rounds start at 1"));
        }
        if let Some(j) = y.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("coordinate {j} is not finite ({})", y[j])));
        }
        let dim = y.len();
        let Some(k) = self.level_at(t, dim) else {
            return Ok(QuantizedMessage::exact(y));
        };
        let kf = k as f64;
        match self.kind {
            QuantizerKind::Identity => Ok(QuantizedMessage::exact(y)),
            QuantizerKind::Probabilistic => {
                let payload: Vec<f64> = y
                    .iter()
                    .map(|&a| {
                        let scaled = a * kf;
                        let lo = scaled.floor();
                        let frac = scaled - lo;
                        let u: f64 = rng.random();
                        if u < frac {
                            (lo + 1.0) / kf
                        } else {
                            lo / kf
                        }
                    })
                    .collect();
                let observed = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let exact = payload == y;
                Ok(QuantizedMessage {
                    payload,
                    bits: self.bits_for_range(dim, t, observed),
                    exact,
                })
            }
            QuantizerKind::KLevel => {
                let norm = norm2(y);
                let payload: Vec<f64> = if norm == 0.0 {
                    vec![0.0; dim]
                } else {
                    y.iter()
                        .map(|&a| {
                            let r = a.abs() / norm * kf;
                            let lo = r.floor();
                            let u: f64 = rng.random();
                            let level = if u < r - lo { lo + 1.0 } else { lo };
                            norm * a.signum() * level / kf
                        })
                        .collect()
                };
                let exact = payload == y;
                Ok(QuantizedMessage {
                    payload,
                    bits: self.message_bits(dim, t),
                    exact,
                })
            }
        }
    }
}
