//! Constraint sets with linear minimization oracles, and online loss streams.
//!
//! Losses are regularized least-squares terms
//! `f_{i,t}(x) = ½(p_{i,t}ᵀx − q_{i,t})² + ρ‖x‖²`, one per agent and round.
//! Agents are indexed from 0, rounds from 1.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{dot, norm2};
use crate::rng::{self, Purpose};

/// Membership tolerance on the set's defining norm.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Largest feature magnitude produced by the regression generator.
pub const FEATURE_BOUND: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    L1Ball,
    L2Ball,
}

/// A centered norm ball in `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    kind: SetKind,
    radius: f64,
    dim: usize,
}

impl ConstraintSet {
    pub fn new(kind: SetKind, radius: f64, dim: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        Ok(Self { kind, radius, dim })
    }

    pub fn l1_ball(radius: f64, dim: usize) -> Result<Self> {
        Self::new(SetKind::L1Ball, radius, dim)
    }

    pub fn l2_ball(radius: f64, dim: usize) -> Result<Self> {
        Self::new(SetKind::L2Ball, radius, dim)
    }

    pub fn kind(&self) -> SetKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Radius `R` of the smallest centered Euclidean ball containing the set.
    pub fn enclosing_radius(&self) -> f64 {
        // max ‖x‖₂ over ‖x‖₁ ≤ r is attained at a vertex, so R = r for both kinds
        self.radius
    }

    /// The set's defining norm of `x`.
    pub fn norm(&self, x: &[f64]) -> f64 {
        match self.kind {
            SetKind::L1Ball => x.iter().map(|v| v.abs()).sum(),
            SetKind::L2Ball => norm2(x),
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(invalid(format!(
                "expected a vector of length {}, got {len}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Linear minimization oracle: `argmin_{x ∈ X} ⟨x, direction⟩`.
    ///
    /// Ties on the L1 ball go to the lowest index, and `sign(0) = +1`, so the
    /// zero direction maps to `−radius·e₀` for both kinds.
    pub fn lmo(&self, direction: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(direction.len())?;
        let mut out = vec![0.0; self.dim];
        self.lmo_into(direction, &mut out);
        Ok(out)
    }

    /// Allocation-free [`lmo`](Self::lmo); `out.len()` must equal the dimension.
    pub fn lmo_into(&self, direction: &[f64], out: &mut [f64]) {
        debug_assert_eq!(direction.len(), self.dim);
        match self.kind {
            SetKind::L1Ball => {
                let (best, _) = direction.iter().enumerate().fold(
                    (0usize, f64::NEG_INFINITY),
                    |(bi, bv), (j, v)| if v.abs() > bv { (j, v.abs()) } else { (bi, bv) },
                );
                out.fill(0.0);
                let sign = if direction[best] < 0.0 { -1.0 } else { 1.0 };
                out[best] = -self.radius * sign;
            }
            SetKind::L2Ball => {
                let n = norm2(direction);
                if n == 0.0 {
                    out.fill(0.0);
                    out[0] = -self.radius;
                } else {
                    for (o, v) in out.iter_mut().zip(direction) {
                        *o = -self.radius * v / n;
                    }
                }
            }
        }
    }

    /// Membership within [`FEASIBILITY_TOL`].
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x.len())?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        self.norm(x) <= self.radius + FEASIBILITY_TOL
    }

    /// Draws a point uniformly from the set.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            SetKind::L1Ball => {
                // d+1 exponentials normalized: the first d are uniform on the
                // positive part of the cross-polytope, the last is slack
                let e: Vec<f64> = (0..=self.dim).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = e.iter().sum();
                e[..self.dim]
                    .iter()
                    .map(|v| {
                        let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        s * self.radius * v / total
                    })
                    .collect()
            }
            SetKind::L2Ball => {
                let g: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
                let n = norm2(&g).max(f64::MIN_POSITIVE);
                let u: f64 = rng.random::<f64>();
                let scale = self.radius * u.powf(1.0 / self.dim as f64) / n;
                g.iter().map(|v| v * scale).collect()
            }
        }
    }
}

/// One agent's data for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: f64,
}

impl Sample {
    fn residual(&self, x: &[f64]) -> f64 {
        dot(&self.features, x) - self.label
    }

    pub fn loss(&self, x: &[f64], rho: f64) -> f64 {
        let r = self.residual(x);
        0.5 * r * r + rho * dot(x, x)
    }

    pub fn grad_into(&self, x: &[f64], rho: f64, out: &mut [f64]) {
        let r = self.residual(x);
        for ((o, p), xv) in out.iter_mut().zip(&self.features).zip(x) {
            *o = p * r + 2.0 * rho * xv;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Stream {
    /// Lazily generated from `(seed, agent, round)`.
    Regression {
        seed: u64,
        x0: Vec<f64>,
        time_invariant: bool,
    },
    /// Stored data, indexed `[round - 1][agent]`.
    Explicit(Vec<Vec<Sample>>),
}

/// A stream of per-agent, per-round losses over a finite horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineProblem {
    agents: usize,
    dim: usize,
    horizon: usize,
    rho: f64,
    stream: Stream,
}

/// Parameters for [`generate_regression_stream`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionParams {
    pub seed: u64,
    pub agents: usize,
    pub dim: usize,
    pub horizon: usize,
    pub rho: f64,
    /// Ground truth; drawn sparse when absent.
    pub x0: Option<Vec<f64>>,
    /// L1 norm of the drawn ground truth (half the ball radius by default).
    pub x0_l1: f64,
    /// Repeat round 1 forever.
    pub time_invariant: bool,
}

impl RegressionParams {
    pub fn new(seed: u64, agents: usize, dim: usize, horizon: usize, rho: f64) -> Self {
        Self {
            seed,
            agents,
            dim,
            horizon,
            rho,
            x0: None,
            x0_l1: 1.0,
            time_invariant: false,
        }
    }
}

/// Builds the linear-regression stream: features uniform on `[−5, 5]^d`,
/// labels `q = pᵀx₀ + ζ/(4t)` with `ζ ~ U[0, 1]`.
pub fn generate_regression_stream(params: RegressionParams) -> Result<OnlineProblem> {
    let RegressionParams {
        seed,
        agents,
        dim,
        horizon,
        rho,
        x0,
        x0_l1,
        time_invariant,
    } = params;
    if agents == 0 || dim == 0 || horizon == 0 {
        return Err(invalid("agents, dimension and horizon must all be at least 1"));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(invalid(format!("rho must be nonnegative, got {rho}")));
    }
    let x0 = match x0 {
        Some(v) => {
            if v.len() != dim {
                return Err(invalid(format!("x0 has length {}, expected {dim}", v.len())));
            }
            v
        }
        None => default_ground_truth(seed, dim, x0_l1),
    };
    Ok(OnlineProblem {
        agents,
        dim,
        horizon,
        rho,
        stream: Stream::Regression {
            seed,
            x0,
            time_invariant,
        },
    })
}

/// `⌈d/10⌉` nonzeros at random distinct positions, scaled to the given L1 norm.
fn default_ground_truth(seed: u64, dim: usize, l1: f64) -> Vec<f64> {
    let mut rng = rng::stream(seed, Purpose::GroundTruth, 0, 0);
    let support = dim.div_ceil(10);
    let positions = rand::seq::index::sample(&mut rng, dim, support);
    let mut x0 = vec![0.0; dim];
    for j in positions.iter() {
        // magnitudes in [0.1, 1] so no selected coordinate collapses to zero
        let mag: f64 = rng.random_range(0.1..=1.0);
        x0[j] = if rng.random::<bool>() { mag } else { -mag };
    }
    let total: f64 = x0.iter().map(|v| v.abs()).sum();
    for v in &mut x0 {
        *v *= l1 / total;
    }
    x0
}

impl OnlineProblem {
    /// A problem over stored data, `samples[t - 1][i]`.
    pub fn from_samples(samples: Vec<Vec<Sample>>, rho: f64) -> Result<Self> {
        let horizon = samples.len();
        let agents = samples.first().map_or(0, Vec::len);
        let dim = samples
            .first()
            .and_then(|r| r.first())
            .map_or(0, |s| s.features.len());
        if horizon == 0 || agents == 0 || dim == 0 {
            return Err(invalid("explicit stream needs at least one round, agent and coordinate"));
        }
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(invalid(format!("rho must be nonnegative, got {rho}")));
        }
        for round in &samples {
            if round.len() != agents || round.iter().any(|s| s.features.len() != dim) {
                return Err(invalid("explicit stream has ragged rounds"));
            }
        }
        Ok(Self {
            agents,
            dim,
            horizon,
            rho,
            stream: Stream::Explicit(samples),
        })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Ground truth of a generated stream.
    pub fn ground_truth(&self) -> Option<&[f64]> {
        match &self.stream {
            Stream::Regression { x0, .. } => Some(x0),
            Stream::Explicit(_) => None,
        }
    }

    /// True when every round carries the same losses.
    pub fn is_time_invariant(&self) -> bool {
        match &self.stream {
            Stream::Regression { time_invariant, .. } => *time_invariant || self.horizon == 1,
            Stream::Explicit(rounds) => rounds.windows(2).all(|w| w[0] == w[1]),
        }
    }

    fn check_index(&self, agent: usize, round: usize) -> Result<()> {
        if agent >= self.agents {
            return Err(invalid(format!("agent {agent} out of range 0..{}", self.agents)));
        }
        if round == 0 || round > self.horizon {
            return Err(invalid(format!("round {round} out of range 1..={}", self.horizon)));
        }
        Ok(())
    }

    /// Data of agent `agent` at round `round`.
    pub fn sample(&self, agent: usize, round: usize) -> Result<Sample> {
        self.check_index(agent, round)?;
        Ok(self.sample_unchecked(agent, round))
    }

    pub(crate) fn sample_unchecked(&self, agent: usize, round: usize) -> Sample {
        match &self.stream {
            Stream::Regression {
                seed,
                x0,
                time_invariant,
            } => {
                let t = if *time_invariant { 1 } else { round };
                let mut rng = rng::stream(*seed, Purpose::Features, agent as u64, t as u64);
                let unif = Uniform::new_inclusive(-FEATURE_BOUND, FEATURE_BOUND)
                    .expect("static bounds");
                let features: Vec<f64> = (0..self.dim).map(|_| unif.sample(&mut rng)).collect();
                let zeta: f64 = rng.random::<f64>();
                let label = dot(&features, x0) + zeta / (4.0 * t as f64);
                Sample { features, label }
            }
            Stream::Explicit(rounds) => rounds[round - 1][agent].clone(),
        }
    }

    /// All agents' data at one round.
    pub fn round(&self, round: usize) -> Result<Vec<Sample>> {
        self.check_index(0, round)?;
        Ok((0..self.agents).map(|i| self.sample_unchecked(i, round)).collect())
    }

    pub fn loss_eval(&self, agent: usize, round: usize, x: &[f64]) -> Result<f64> {
        self.check_index(agent, round)?;
        self.check_len(x)?;
        Ok(self.sample_unchecked(agent, round).loss(x, self.rho))
    }

    pub fn loss_grad(&self, agent: usize, round: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_index(agent, round)?;
        self.check_len(x)?;
        let mut g = vec![0.0; self.dim];
        self.sample_unchecked(agent, round).grad_into(x, self.rho, &mut g);
        Ok(g)
    }

    /// `F_t(x) = Σ_i f_{i,t}(x)`.
    pub fn global_loss(&self, round: usize, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        Ok(self.round(round)?.iter().map(|s| s.loss(x, self.rho)).sum())
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(invalid(format!("expected length {}, got {}", self.dim, x.len())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsMode {
    ClosedForm,
    Sampled,
}

/// Lipschitz constants of the losses (`L_X`) and of their gradients (`G_X`) over the set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub lipschitz: f64,
    pub smoothness: f64,
    pub how: ConstantsMode,
}

/// Points drawn per (agent, round) in sampled mode.
const SAMPLED_POINTS: usize = 16;

pub fn estimate_constants(
    problem: &OnlineProblem,
    set: &ConstraintSet,
    mode: ConstantsMode,
) -> Result<ProblemConstants> {
    if set.dim() != problem.dim() {
        return Err(invalid("constraint set and problem dimensions differ"));
    }
    let radius = set.enclosing_radius();
    let rho = problem.rho();
    let mut lipschitz: f64 = 0.0;
    let mut smoothness: f64 = 0.0;
    let mut rng = rng::stream(0, Purpose::Sampling, 0, 0);
    let mut gx = vec![0.0; problem.dim()];
    let mut gy = vec![0.0; problem.dim()];
    for t in 1..=problem.horizon() {
        for i in 0..problem.agents() {
            let s = problem.sample_unchecked(i, t);
            match mode {
                ConstantsMode::ClosedForm => {
                    let pn = norm2(&s.features);
                    lipschitz =
                        lipschitz.max(pn * (pn * radius + s.label.abs()) + 2.0 * rho * radius);
                    smoothness = smoothness.max(pn * pn + 2.0 * rho);
                }
                ConstantsMode::Sampled => {
                    for _ in 0..SAMPLED_POINTS {
                        let x = set.sample_uniform(&mut rng);
                        let y = set.sample_uniform(&mut rng);
                        s.grad_into(&x, rho, &mut gx);
                        s.grad_into(&y, rho, &mut gy);
                        lipschitz = lipschitz.max(norm2(&gx)).max(norm2(&gy));
                        let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                        let dg: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
                        let denom = norm2(&dx);
                        if denom > 0.0 {
                            smoothness = smoothness.max(norm2(&dg) / denom);
                        }
                    }
                }
            }
        }
    }
    Ok(ProblemConstants {
        lipschitz,
        smoothness,
        how: mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(features: Vec<f64>, label: f64, rho: f64) -> OnlineProblem {
        OnlineProblem::from_samples(vec![vec![Sample { features, label }]], rho).unwrap()
    }

    #[test]
    fn lmo_examples() {
        let b3 = ConstraintSet::l1_ball(2.0, 3).unwrap();
        assert_eq!(b3.lmo(&[3.0, -1.0, 2.0]).unwrap(), vec![-2.0, 0.0, 0.0]);
        assert_eq!(b3.lmo(&[0.0, 0.0, 0.0]).unwrap(), vec![-2.0, 0.0, 0.0]);
        let b2 = ConstraintSet::l1_ball(2.0, 2).unwrap();
        assert_eq!(b2.lmo(&[0.0, -5.0]).unwrap(), vec![0.0, 2.0]);
        // ties go to the lowest index
        assert_eq!(b3.lmo(&[1.0, -3.0, 3.0]).unwrap(), vec![0.0, 2.0, 0.0]);
        assert!(b3.lmo(&[1.0]).is_err());
    }

    #[test]
    fn l2_lmo_is_scaled_negative_direction() {
        let b = ConstraintSet::l2_ball(2.0, 2).unwrap();
        assert_eq!(b.lmo(&[3.0, 4.0]).unwrap(), vec![-1.2, -1.6]);
        assert_eq!(b.lmo(&[0.0, 0.0]).unwrap(), vec![-2.0, 0.0]);
    }

    #[test]
    fn contains_examples() {
        let b = ConstraintSet::l1_ball(2.0, 2).unwrap();
        assert!(b.contains(&[1.0, 0.5]).unwrap());
        assert!(!b.contains(&[2.1, 0.0]).unwrap());
        assert!(b.contains(&[2.0, 0.0]).unwrap());
        assert!(b.contains(&[2.0 + 0.5e-9, 0.0]).unwrap());
        assert!(b.contains(&[1.0]).is_err());
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(ConstraintSet::l1_ball(0.0, 2).is_err());
        assert!(ConstraintSet::l1_ball(1.0, 0).is_err());
        assert!(ConstraintSet::l2_ball(f64::NAN, 2).is_err());
    }

    #[test]
    fn loss_examples() {
        assert_eq!(one(vec![1.0, 0.0], 1.0, 0.0).loss_eval(0, 1, &[2.0, 0.0]).unwrap(), 0.5);
        assert_eq!(one(vec![1.0, 0.0], 1.0, 0.0).loss_eval(0, 1, &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(one(vec![1.0, 1.0], 0.0, 0.5).loss_eval(0, 1, &[1.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn grad_examples() {
        let g = one(vec![1.0, 0.0], 1.0, 0.0).loss_grad(0, 1, &[2.0, 0.0]).unwrap();
        assert_eq!(g, vec![1.0, 0.0]);
        let g = one(vec![2.0, 0.0], 0.0, 0.5).loss_grad(0, 1, &[1.0, 1.0]).unwrap();
        assert_eq!(g, vec![5.0, 1.0]);
        let g = one(vec![1.5, -2.0], 0.5, 0.0).loss_grad(0, 1, &[1.0, 0.5]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn out_of_range_indices_rejected() {
        let p = one(vec![1.0, 0.0], 1.0, 0.0);
        assert!(p.loss_eval(1, 1, &[0.0, 0.0]).is_err());
        assert!(p.loss_eval(0, 0, &[0.0, 0.0]).is_err());
        assert!(p.loss_eval(0, 2, &[0.0, 0.0]).is_err());
        assert!(p.loss_grad(0, 1, &[0.0]).is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_regression_stream(RegressionParams::new(7, 1, 2, 1, 0.0)).unwrap();
        let b = generate_regression_stream(RegressionParams::new(7, 1, 2, 1, 0.0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sample(0, 1).unwrap(), b.sample(0, 1).unwrap());
        let c = generate_regression_stream(RegressionParams::new(8, 1, 2, 1, 0.0)).unwrap();
        assert_ne!(a.sample(0, 1).unwrap(), c.sample(0, 1).unwrap());
    }

    #[test]
    fn generator_bounds_and_label_model() {
        let p = generate_regression_stream(RegressionParams::new(3, 4, 30, 50, 5e-6)).unwrap();
        let x0 = p.ground_truth().unwrap().to_vec();
        assert_eq!(x0.iter().filter(|v| **v != 0.0).count(), 3);
        let l1: f64 = x0.iter().map(|v| v.abs()).sum();
        assert!((l1 - 1.0).abs() < 1e-12);
        for t in 1..=50 {
            for i in 0..4 {
                let s = p.sample(i, t).unwrap();
                assert!(s.features.iter().all(|v| v.abs() <= FEATURE_BOUND));
                let gap = s.label - dot(&s.features, &x0);
                assert!(gap >= -1e-12 && gap <= 1.0 / (4.0 * t as f64) + 1e-12);
            }
        }
    }

    #[test]
    fn time_invariant_stream_repeats_round_one() {
        let mut params = RegressionParams::new(3, 2, 5, 10, 0.0);
        params.time_invariant = true;
        let p = generate_regression_stream(params).unwrap();
        assert!(p.is_time_invariant());
        assert_eq!(p.round(1).unwrap(), p.round(10).unwrap());
    }

    #[test]
    fn generator_rejects_bad_arguments() {
        assert!(generate_regression_stream(RegressionParams::new(1, 0, 2, 1, 0.0)).is_err());
        assert!(generate_regression_stream(RegressionParams::new(1, 1, 2, 1, -1.0)).is_err());
        let mut p = RegressionParams::new(1, 1, 2, 1, 0.0);
        p.x0 = Some(vec![1.0]);
        assert!(generate_regression_stream(p).is_err());
    }

    #[test]
    fn constants_examples() {
        let set = ConstraintSet::l1_ball(2.0, 2).unwrap();
        let c = estimate_constants(&one(vec![1.0, 0.0], 0.0, 0.0), &set, ConstantsMode::ClosedForm)
            .unwrap();
        assert_eq!(c.smoothness, 1.0);
        assert_eq!(c.lipschitz, 2.0);
        let c = estimate_constants(&one(vec![0.0, 0.0], 3.0, 0.0), &set, ConstantsMode::ClosedForm)
            .unwrap();
        assert_eq!((c.lipschitz, c.smoothness), (0.0, 0.0));
    }

    #[test]
    fn sampled_constants_never_exceed_closed_form() {
        let p = generate_regression_stream(RegressionParams::new(11, 3, 6, 20, 0.01)).unwrap();
        for set in [ConstraintSet::l1_ball(2.0, 6).unwrap(), ConstraintSet::l2_ball(1.5, 6).unwrap()] {
            let closed = estimate_constants(&p, &set, ConstantsMode::ClosedForm).unwrap();
            let sampled = estimate_constants(&p, &set, ConstantsMode::Sampled).unwrap();
            assert!(sampled.lipschitz <= closed.lipschitz);
            assert!(sampled.smoothness <= closed.smoothness * (1.0 + 1e-12));
            assert!(sampled.lipschitz > 0.0 && sampled.smoothness > 0.0);
        }
    }
}
