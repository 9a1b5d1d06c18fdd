//! Runtime checks of the standing assumptions on network, set and losses.

use serde::{Deserialize, Serialize};

use crate::network::{check_double_stochastic, check_joint_connectivity, GraphSequence, STOCHASTIC_TOL};
use crate::problem::{estimate_constants, ConstantsMode, ConstraintSet, OnlineProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Joint strong connectivity over every window (plus double stochasticity).
    Network,
    /// Convex compact set inside a Euclidean ball.
    ConstraintSet,
    /// Losses are Lipschitz on the set.
    LossLipschitz,
    /// Gradients are Lipschitz on the set.
    GradientLipschitz,
    /// Stream well-formed: sizes agree, `ρ ≥ 0`, finite data.
    Problem,
}

impl Check {
    pub fn label(&self) -> &'static str {
        match self {
            Check::Network => "assumption 1 (network)",
            Check::ConstraintSet => "assumption 2 (constraint set)",
            Check::LossLipschitz => "assumption 3 (loss Lipschitz)",
            Check::GradientLipschitz => "assumption 4 (gradient Lipschitz)",
            Check::Problem => "problem validity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub check: Check,
    pub ok: bool,
    pub detail: String,
}

impl Finding {
    fn new(check: Check, ok: bool, detail: impl Into<String>) -> Self {
        Self {
            check,
            ok,
            detail: detail.into(),
        }
    }
}

/// Runs every check; never fails, violations are reported as findings.
pub fn check_all(problem: &OnlineProblem, graphs: &GraphSequence, set: &ConstraintSet) -> Vec<Finding> {
    let mut out = Vec::with_capacity(5);

    let mut problem_issues = Vec::new();
    if problem.rho() < 0.0 || !problem.rho().is_finite() {
        problem_issues.push(format!("rho = {} must be nonnegative", problem.rho()));
    }
    if problem.dim() != set.dim() {
        problem_issues.push(format!(
            "problem dimension {} differs from set dimension {}",
            problem.dim(),
            set.dim()
        ));
    }
    if graphs.agents() != problem.agents() {
        problem_issues.push(format!(
            "graph has {} agents, problem has {}",
            graphs.agents(),
            problem.agents()
        ));
    }
    if graphs.horizon() < problem.horizon() {
        problem_issues.push(format!(
            "graph horizon {} shorter than problem horizon {}",
            graphs.horizon(),
            problem.horizon()
        ));
    }
    out.push(Finding::new(
        Check::Problem,
        problem_issues.is_empty(),
        if problem_issues.is_empty() {
            "ok".to_string()
        } else {
            problem_issues.join("; ")
        },
    ));

    let mut net_issues = Vec::new();
    if let Some(t) = (1..=graphs.horizon())
        .find(|&t| !check_double_stochastic(&graphs.weights_unchecked(t), STOCHASTIC_TOL))
    {
        net_issues.push(format!("W_{t} is not doubly stochastic"));
    }
    if !check_joint_connectivity(graphs, graphs.window()) {
        net_issues.push(format!(
            "union graph over some window of length {} is not strongly connected",
            graphs.window()
        ));
    }
    out.push(Finding::new(
        Check::Network,
        net_issues.is_empty(),
        if net_issues.is_empty() {
            format!("window Q = {}, zeta = {}", graphs.window(), graphs.zeta())
        } else {
            net_issues.join("; ")
        },
    ));

    out.push(Finding::new(
        Check::ConstraintSet,
        set.enclosing_radius() > 0.0,
        format!("{:?} radius {}, enclosing radius R = {}", set.kind(), set.radius(), set.enclosing_radius()),
    ));

    if problem.dim() == set.dim() && problem.rho() >= 0.0 {
        match estimate_constants(problem, set, ConstantsMode::ClosedForm) {
            Ok(c) => {
                out.push(Finding::new(
                    Check::LossLipschitz,
                    c.lipschitz.is_finite() && c.lipschitz > 0.0,
                    format!("L_X = {}", c.lipschitz),
                ));
                out.push(Finding::new(
                    Check::GradientLipschitz,
                    c.smoothness.is_finite() && c.smoothness > 0.0,
                    format!("G_X = {}", c.smoothness),
                ));
            }
            Err(e) => {
                out.push(Finding::new(Check::LossLipschitz, false, e.to_string()));
                out.push(Finding::new(Check::GradientLipschitz, false, e.to_string()));
            }
        }
    } else {
        out.push(Finding::new(Check::LossLipschitz, false, "problem invalid"));
        out.push(Finding::new(Check::GradientLipschitz, false, "problem invalid"));
    }
    out
}
