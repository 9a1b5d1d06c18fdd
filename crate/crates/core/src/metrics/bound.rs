//! The regret bound's constants, its evaluation, and the parameter regimes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Quantities the bound constants are built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub agents: usize,
    /// Enclosing radius `R`.
    pub radius: f64,
    /// `L_X`
    pub lipschitz: f64,
    /// `G_X`
    pub smoothness: f64,
    pub sigma: f64,
    pub gamma: f64,
    /// `ε_{d,k_1}`
    pub eps_first: f64,
    /// `Σ_i ‖x_{i,1} − x_{a,1}‖`
    pub initial_spread: f64,
    /// `Σ_i ‖x_{i,1}‖`
    pub initial_norm_sum: f64,
    /// `Σ_i ‖∇f_{i,1}(x̂_{i,1})‖`
    pub initial_grad_norm_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
    pub d6: f64,
    pub c1: f64,
    pub c2: f64,
    pub e0: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub lipschitz: f64,
    pub smoothness: f64,
    pub radius: f64,
    pub agents: usize,
}

impl BoundConstants {
    pub fn new(inp: &BoundInputs) -> Result<Self> {
        let BoundInputs {
            agents,
            radius: r,
            lipschitz: l,
            smoothness: g,
            sigma: s,
            gamma: gm,
            ..
        } = *inp;
        if s >= 1.0 {
            return Err(invalid(format!("sigma = {s} ≥ 1: mixing constants are degenerate")));
        }
        let scalars = [
            r,
            l,
            g,
            s,
            gm,
            inp.eps_first,
            inp.initial_spread,
            inp.initial_norm_sum,
            inp.initial_grad_norm_sum,
        ];
        if agents == 0 || scalars.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("bound inputs must be finite and nonnegative with at least one agent"));
        }
        let n = agents as f64;
        let k = 1.0 - s;
        let c1 = (s * n * gm * inp.eps_first.sqrt() + n * gm) / k * inp.initial_grad_norm_sum;
        let c2 = 2.0 * n * gm / k + 1.0;
        let e0 = 4.0 * r * c2 * g + n * l;
        Ok(Self {
            d1: n * l * inp.initial_spread + n * gm * e0 / k * inp.initial_norm_sum + 4.0 * r * c1,
            d2: 4.0 * n * r * (n * l + g * r)
                + 2.0 * n * n * r * gm * e0 / k
                + 8.0 * n * n * gm * g * r * r / 2.0,
            d3: n * r * e0 * (1.0 + n * gm * s / k)
                + n * n * l * r
                + 4.0 * n * r * l * c2
                + 4.0 * n * n * gm * g * r * r / k,
            d4: 2.0 * n * l * r,
            d5: n * g * r * r,
            d6: 4.0 * n * n * r * gm / k + 2.0 * n * r,
            c1,
            c2,
            e0,
            sigma: s,
            gamma: gm,
            lipschitz: l,
            smoothness: g,
            radius: r,
            agents,
        })
    }
}

/// `D₁ + D₂αT + D₃Σ√ε_t + D₄/α + (D₅/α)Σε_t + (2n/α)H_T + D₆D_T`.
pub fn theorem1_bound(
    bc: &BoundConstants,
    alpha: f64,
    horizon: usize,
    eps: &[f64],
    h_total: f64,
    d_total: f64,
) -> Result<f64> {
    if bc.sigma >= 1.0 {
        return Err(invalid(format!("sigma = {} ≥ 1: mixing constants are degenerate", bc.sigma)));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha = {alpha} outside (0, 1]")));
    }
    if eps.iter().chain([&h_total, &d_total]).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid("resolutions and variations must be finite and nonnegative"));
    }
    let n = bc.agents as f64;
    let sum_sqrt: f64 = eps.iter().map(|e| e.sqrt()).sum();
    let sum: f64 = eps.iter().sum();
    Ok(bc.d1
        + bc.d2 * alpha * horizon as f64
        + bc.d3 * sum_sqrt
        + bc.d4 / alpha
        + bc.d5 / alpha * sum
        + 2.0 * n / alpha * h_total
        + bc.d6 * d_total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum Regime {
    /// `γ < ξ < 1`: `O(max{T^{1−b}, T^γ(1+H_T)} + D_T)`.
    SlowResolution { b: f64, exponent: f64 },
    /// `ξ = 1`: `O(max{T^{1−γ}, T^γ ln T, T^γ H_T} + D_T)`.
    Harmonic { exponent: f64 },
    /// `ξ > 1`: `O(max{T^{1−γ}, T^γ(1+H_T)} + D_T)`.
    FastResolution { exponent: f64 },
}

impl Regime {
    /// Dominant power of `T` outside the variation terms (`ln T` factors dropped).
    pub fn exponent(&self) -> f64 {
        match *self {
            Regime::SlowResolution { exponent, .. }
            | Regime::Harmonic { exponent }
            | Regime::FastResolution { exponent } => exponent,
        }
    }

    pub fn case(&self) -> u8 {
        match self {
            Regime::SlowResolution { .. } => 1,
            Regime::Harmonic { .. } => 2,
            Regime::FastResolution { .. } => 3,
        }
    }
}

/// Classifies the schedules `ε_t = κ₁/t^ξ`, `α = κ₂/T^γ`.
pub fn corollary1_regime(gamma: f64, xi: f64) -> Result<Regime> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("gamma = {gamma} outside (0, 1)")));
    }
    if !xi.is_finite() || xi <= gamma {
        return Err(invalid(format!("xi = {xi} must exceed gamma = {gamma}")));
    }
    Ok(if xi < 1.0 {
        let b = gamma.min(xi / 2.0).min(xi - gamma);
        Regime::SlowResolution {
            b,
            exponent: (1.0 - b).max(gamma),
        }
    } else if xi == 1.0 {
        Regime::Harmonic {
            exponent: (1.0 - gamma).max(gamma),
        }
    } else {
        Regime::FastResolution {
            exponent: (1.0 - gamma).max(gamma),
        }
    })
}

/// Step exponent `γ = 1/2 − log_T √(1 + T^θ)` for variation `H_T = O(T^θ)`;
/// the regret is then `O(√(T(1+H_T)) + D_T)`.
pub fn optimal_gamma(theta: f64, horizon: usize) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("theta = {theta} outside (0, 1)")));
    }
    if horizon < 2 {
        return Err(invalid("horizon must be at least 2"));
    }
    let t = horizon as f64;
    let gamma = 0.5 - 0.5 * (1.0 + t.powf(theta)).ln() / t.ln();
    if gamma <= 0.0 {
        return Err(invalid(format!("gamma = {gamma} is not positive for theta = {theta}, T = {horizon}")));
    }
    Ok(gamma)
}
