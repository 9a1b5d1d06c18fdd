//! Comparators, dynamic regret, variations, and the regret bound.

mod bound;
mod comparator;
mod regret;
mod variation;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::Trace;
use crate::error::{invalid, Error, Result};
use crate::problem::OnlineProblem;

pub use bound::{corollary1_regime, optimal_gamma, theorem1_bound, BoundConstants, BoundInputs, Regime};
pub use comparator::{comparator, comparators, Comparator, Quadratic, COMPARATOR_TOL, FW_MAX_ITERS};
pub use regret::{all_regrets, dynamic_regret, global_average, instantaneous_regret};
pub use variation::{sample_points, variations, Variations, VARIATION_SAMPLES};

/// Column order of [`RegretReport::write_csv`].
pub const CSV_HEADER: &str = "t,agent,loss,regret_partial,bits_cumulative,consensus_err,tracking_err";

/// Everything measured about one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    /// `Regret_d^j(t)`, indexed `[j][t−1]`.
    pub regret: Vec<Vec<f64>>,
    /// `(1/n) Σ_j Regret_d^j(t)/t`.
    pub global_average: Vec<f64>,
    pub h_total: f64,
    pub d_total: f64,
    /// The variations are sampled maxima, hence lower bounds.
    pub variations_sampled: bool,
    pub total_bits: u64,
    /// `Σ_i ‖x̂_{i,t} − x_{a,t}‖` per round.
    pub consensus_err: Vec<f64>,
    /// `Σ_i ‖ŝ_{i,t} − (1/n)∇F_t(x_{a,t})‖` per round.
    pub tracking_err: Vec<f64>,
    pub comparator_gaps: Vec<f64>,
}

impl RegretReport {
    pub fn build(
        trace: &Trace,
        problem: &OnlineProblem,
        comparators: &[Comparator],
        variations: &Variations,
    ) -> Result<Self> {
        let regret = all_regrets(trace, problem, comparators)?;
        if let Some((j, t)) = regret
            .iter()
            .enumerate()
            .find_map(|(j, r)| r.iter().position(|v| !v.is_finite()).map(|t| (j, t + 1)))
        {
            return Err(Error::NonFinite {
                agent: j,
                round: t,
                what: "regret".into(),
            });
        }
        Ok(Self {
            global_average: global_average(&regret),
            regret,
            h_total: variations.h_total,
            d_total: variations.d_total,
            variations_sampled: true,
            total_bits: trace.total_bits(),
            consensus_err: trace.rounds.iter().map(|r| r.consensus_error()).collect(),
            tracking_err: trace.rounds.iter().map(|r| r.tracking_error()).collect(),
            comparator_gaps: comparators.iter().map(|c| c.gap).collect(),
        })
    }

    /// `Regret_d^j(T)` per agent.
    pub fn final_regret(&self) -> Vec<f64> {
        self.regret.iter().map(|r| *r.last().unwrap_or(&0.0)).collect()
    }

    pub fn final_global_average(&self) -> f64 {
        *self.global_average.last().unwrap_or(&0.0)
    }

    /// One row per `(t, agent)` with the columns of [`CSV_HEADER`].
    pub fn write_csv<W: Write>(&self, trace: &Trace, mut out: W) -> Result<()> {
        if trace.len() != self.global_average.len() {
            return Err(invalid("report and trace lengths differ"));
        }
        let io = |e: std::io::Error| Error::Io(e.to_string());
        writeln!(out, "{CSV_HEADER}").map_err(io)?;
        let mut bits = vec![0u64; trace.agents];
        for rec in &trace.rounds {
            for j in 0..trace.agents {
                bits[j] += rec.bits[j];
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    rec.t,
                    j,
                    rec.losses[j],
                    self.regret[j][rec.t - 1],
                    bits[j],
                    rec.consensus_err[j],
                    rec.tracking_err[j]
                )
                .map_err(io)?;
            }
        }
        Ok(())
    }
}
