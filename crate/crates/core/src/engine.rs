//! Round-by-round execution of the quantized decentralized online
//! Frank-Wolfe method with gradient tracking.
//!
//! Each round is synchronous and runs in barrier-separated phases:
//!
//! 1. every agent quantizes its decision; a quantized state that leaves the
//!    constraint set is replaced by the exact state (and charged as such),
//! 2. every agent mixes the received states with the round's weights,
//! 3. every agent evaluates and quantizes its local gradient at the mixed state,
//! 4. every agent updates its tracked gradient with the change of quantized gradients,
//! 5. every agent mixes the tracked gradients,
//! 6. every agent calls the linear oracle and takes a Frank-Wolfe step.
//!
//! Mixing reads only values produced in the preceding phase of the same round.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dist2, mean_rows, norm2};
use crate::network::{check_double_stochastic, check_joint_connectivity, GraphSequence, WeightMatrix, STOCHASTIC_TOL};
use crate::problem::{ConstraintSet, OnlineProblem, Sample};
use crate::quantizer::{QuantizedMessage, QuantizerSpec};
use crate::rng::{self, Purpose};

/// Frank-Wolfe step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepSize {
    Constant { alpha: f64 },
    /// `α = κ₂ / T^γ`.
    Horizon { kappa2: f64, gamma: f64 },
}

impl StepSize {
    pub fn value(&self, horizon: usize) -> f64 {
        match *self {
            StepSize::Constant { alpha } => alpha,
            StepSize::Horizon { kappa2, gamma } => kappa2 / (horizon as f64).powf(gamma),
        }
    }

    /// Checks `0 < α ≤ 1` (and `κ₂ ≤ T^γ` for the horizon form).
    pub fn validate(&self, horizon: usize) -> Result<f64> {
        if let StepSize::Horizon { kappa2, gamma } = *self {
            if !(kappa2 > 0.0 && gamma.is_finite()) {
                return Err(Error::Config(format!(
                    "step schedule needs kappa2 > 0 and finite gamma, got kappa2={kappa2}, gamma={gamma}"
                )));
            }
            if kappa2 > (horizon as f64).powf(gamma) {
                return Err(Error::Config(format!(
                    "kappa2 = {kappa2} exceeds T^gamma = {}",
                    (horizon as f64).powf(gamma)
                )));
            }
        }
        let alpha = self.value(horizon);
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!(
                "step size alpha = {alpha} violates parameter 0 < α ≤ 1"
            )));
        }
        Ok(alpha)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig<'a> {
    pub problem: &'a OnlineProblem,
    pub graphs: &'a GraphSequence,
    pub set: ConstraintSet,
    pub state_quantizer: QuantizerSpec,
    pub grad_quantizer: QuantizerSpec,
    pub step: StepSize,
    /// Initial decisions `x_{i,1}`; zeros when absent.
    pub initial: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

impl RunConfig<'_> {
    /// Validates parameters and the network/set assumptions; returns `α`.
    pub fn validate(&self) -> Result<f64> {
        let p = self.problem;
        let alpha = self.step.validate(p.horizon())?;
        if self.set.dim() != p.dim() {
            return Err(Error::Config(format!(
                "set dimension {} differs from problem dimension {}",
                self.set.dim(),
                p.dim()
            )));
        }
        if self.graphs.agents() != p.agents() {
            return Err(Error::Config(format!(
                "graph has {} agents, problem has {}",
                self.graphs.agents(),
                p.agents()
            )));
        }
        if self.graphs.horizon() < p.horizon() {
            return Err(Error::Config("graph sequence shorter than the problem horizon".into()));
        }
        self.state_quantizer.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.grad_quantizer.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(init) = &self.initial {
            if init.len() != p.agents() {
                return Err(Error::Config("one initial decision per agent required".into()));
            }
            for (i, x) in init.iter().enumerate() {
                if x.len() != p.dim() || !self.set.contains_unchecked(x) {
                    return Err(Error::Config(format!(
                        "initial decision of agent {i} is not in the constraint set"
                    )));
                }
            }
        }
        if let Some(t) = (1..=p.horizon())
            .find(|&t| !check_double_stochastic(&self.graphs.weights_unchecked(t), STOCHASTIC_TOL))
        {
            return Err(Error::Config(format!(
                "assumption 1 violated: W_{t} is not doubly stochastic"
            )));
        }
        if !check_joint_connectivity(self.graphs, self.graphs.window()) {
            return Err(Error::Config(format!(
                "assumption 1 violated: some window of length {} is not strongly connected",
                self.graphs.window()
            )));
        }
        Ok(alpha)
    }
}

/// Per-agent algorithm state between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// Decision `x_{i,t}` for the upcoming round.
    pub x: Vec<f64>,
    /// Mixed state `x̂_{i,t}` of the last completed round.
    pub x_hat: Vec<f64>,
    /// Tracked global-gradient estimate `ŝ_{i,t}`.
    pub s_hat: Vec<f64>,
    /// Pre-mix tracked gradient `∇̄f_{i,t}`.
    pub tracked: Vec<f64>,
    /// Quantized local gradient sent in the last completed round.
    pub last_qgrad: Option<Vec<f64>>,
}

/// Everything recorded about one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    /// `x_{i,t}` per agent.
    pub decisions: Vec<Vec<f64>>,
    /// `x̂_{i,t}` per agent.
    pub consensus: Vec<Vec<f64>>,
    /// `f_{i,t}(x_{i,t})` per agent.
    pub losses: Vec<f64>,
    /// State plus gradient bits sent by each agent.
    pub bits: Vec<u64>,
    /// Whether the agent fell back to sending its exact state.
    pub fallback: Vec<bool>,
    /// `x_{a,t}`
    pub x_avg: Vec<f64>,
    /// `v_{a,t}`
    pub v_avg: Vec<f64>,
    /// `(1/n) Σ_i e_{i,t}`, the mean state quantization error.
    pub e_avg: Vec<f64>,
    /// `‖e_{i,t}‖²` per agent.
    pub e_sq: Vec<f64>,
    /// `‖x̂_{i,t} − x_{a,t}‖` per agent.
    pub consensus_err: Vec<f64>,
    /// `‖ŝ_{i,t} − (1/n)∇F_t(x_{a,t})‖` per agent.
    pub tracking_err: Vec<f64>,
}

impl RoundRecord {
    pub fn consensus_error(&self) -> f64 {
        self.consensus_err.iter().sum()
    }

    pub fn tracking_error(&self) -> f64 {
        self.tracking_err.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub agents: usize,
    pub dim: usize,
    pub alpha: f64,
    pub rounds: Vec<RoundRecord>,
    /// `Σ_i ‖∇f_{i,1}(x̂_{i,1})‖`, needed by the bound evaluator.
    pub initial_grad_norm_sum: f64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn round(&self, t: usize) -> &RoundRecord {
        &self.rounds[t - 1]
    }

    pub fn total_bits(&self) -> u64 {
        self.rounds.iter().flat_map(|r| r.bits.iter()).sum()
    }

    pub fn fallback_count(&self) -> usize {
        self.rounds
            .iter()
            .map(|r| r.fallback.iter().filter(|f| **f).count())
            .sum()
    }
}

/// Stateful driver; [`step`](Engine::step) executes one round.
pub struct Engine<'a> {
    config: RunConfig<'a>,
    alpha: f64,
    states: Vec<AgentState>,
    next_round: usize,
    initial_grad_norm_sum: f64,
}

fn mix(w: &WeightMatrix, i: usize, values: &[Vec<f64>], out: &mut [f64]) {
    out.fill(0.0);
    for (j, v) in values.iter().enumerate() {
        let wij = w[(i, j)];
        if wij != 0.0 {
            for (o, x) in out.iter_mut().zip(v) {
                *o += wij * x;
            }
        }
    }
}

impl<'a> Engine<'a> {
    pub fn new(config: RunConfig<'a>) -> Result<Self> {
        let alpha = config.validate()?;
        let (n, d) = (config.problem.agents(), config.problem.dim());
        let init = config.initial.clone().unwrap_or_else(|| vec![vec![0.0; d]; n]);
        let states = init
            .into_iter()
            .map(|x| AgentState {
                x,
                x_hat: vec![0.0; d],
                s_hat: vec![0.0; d],
                tracked: vec![0.0; d],
                last_qgrad: None,
            })
            .collect();
        Ok(Self {
            config,
            alpha,
            states,
            next_round: 1,
            initial_grad_norm_sum: 0.0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    /// The round the next [`step`](Self::step) executes.
    pub fn next_round(&self) -> usize {
        self.next_round
    }

    pub fn is_done(&self) -> bool {
        self.next_round > self.config.problem.horizon()
    }

    pub fn step(&mut self) -> Result<RoundRecord> {
        let t = self.next_round;
        let cfg = &self.config;
        let problem = cfg.problem;
        if t > problem.horizon() {
            return Err(invalid(format!("horizon {} already reached", problem.horizon())));
        }
        let (n, d) = (problem.agents(), problem.dim());
        let rho = problem.rho();
        let w = cfg.graphs.weights_unchecked(t);
        let samples: Vec<Sample> = (0..n).map(|i| problem.sample_unchecked(i, t)).collect();

        let decisions: Vec<Vec<f64>> = self.states.iter().map(|s| s.x.clone()).collect();
        let losses: Vec<f64> = samples
            .iter()
            .zip(&decisions)
            .map(|(s, x)| s.loss(x, rho))
            .collect();

        // phase 1: quantize states, falling back to the exact state outside X
        let mut bits = vec![0u64; n];
        let mut fallback = vec![false; n];
        let mut sent = Vec::with_capacity(n);
        for (i, x) in decisions.iter().enumerate() {
            let mut rng = rng::stream(cfg.seed, Purpose::StateQuantizer, i as u64, t as u64);
            let mut m = cfg.state_quantizer.quantize(x, t, &mut rng)?;
            if !cfg.set.contains_unchecked(&m.payload) {
                m = QuantizedMessage::exact(x);
                fallback[i] = true;
            }
            bits[i] += m.bits;
            sent.push(m.payload);
        }
        let mut e_avg = vec![0.0; d];
        let mut e_sq = vec![0.0; n];
        for (i, (q, x)) in sent.iter().zip(&decisions).enumerate() {
            for (k, (a, b)) in q.iter().zip(x).enumerate() {
                let e = a - b;
                e_avg[k] += e / n as f64;
                e_sq[i] += e * e;
            }
        }

        // phase 2: mix states
        let mut consensus = vec![vec![0.0; d]; n];
        for (i, out) in consensus.iter_mut().enumerate() {
            mix(&w, i, &sent, out);
        }

        // phase 3: local gradients at the mixed states, quantized
        let mut qgrads = Vec::with_capacity(n);
        let mut raw = vec![0.0; d];
        for i in 0..n {
            samples[i].grad_into(&consensus[i], rho, &mut raw);
            if raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    agent: i,
                    round: t,
                    what: "local gradient".into(),
                });
            }
            if t == 1 {
                self.initial_grad_norm_sum += norm2(&raw);
            }
            let mut rng = rng::stream(cfg.seed, Purpose::GradQuantizer, i as u64, t as u64);
            let m = cfg.grad_quantizer.quantize(&raw, t, &mut rng)?;
            bits[i] += m.bits;
            qgrads.push(m.payload);
        }

        // phase 4: gradient tracking
        let tracked: Vec<Vec<f64>> = self
            .states
            .iter()
            .zip(&qgrads)
            .map(|(s, g)| match &s.last_qgrad {
                None => g.clone(),
                Some(prev) => s
                    .s_hat
                    .iter()
                    .zip(g)
                    .zip(prev)
                    .map(|((sh, gi), pi)| sh + gi - pi)
                    .collect(),
            })
            .collect();

        // phase 5: mix tracked gradients
        let mut s_hat = vec![vec![0.0; d]; n];
        for (i, out) in s_hat.iter_mut().enumerate() {
            mix(&w, i, &tracked, out);
        }

        // phase 6: Frank-Wolfe step
        let alpha = self.alpha;
        let mut v = vec![0.0; d];
        let mut v_avg = vec![0.0; d];
        for i in 0..n {
            cfg.set.lmo_into(&s_hat[i], &mut v);
            for (a, vk) in v_avg.iter_mut().zip(&v) {
                *a += vk / n as f64;
            }
            let st = &mut self.states[i];
            st.x = consensus[i]
                .iter()
                .zip(&v)
                .map(|(xh, vk)| xh + alpha * (vk - xh))
                .collect();
        }

        let x_avg = mean_rows(&decisions);
        let consensus_err: Vec<f64> = consensus.iter().map(|xh| dist2(xh, &x_avg)).collect();
        let mut avg_grad = vec![0.0; d];
        for s in &samples {
            s.grad_into(&x_avg, rho, &mut raw);
            for (a, g) in avg_grad.iter_mut().zip(&raw) {
                *a += g / n as f64;
            }
        }
        let tracking_err: Vec<f64> = s_hat.iter().map(|s| dist2(s, &avg_grad)).collect();

        for (i, st) in self.states.iter_mut().enumerate() {
            st.x_hat = consensus[i].clone();
            st.s_hat = std::mem::take(&mut s_hat[i]);
            st.tracked = tracked[i].clone();
            st.last_qgrad = Some(std::mem::take(&mut qgrads[i]));
        }
        self.next_round += 1;

        Ok(RoundRecord {
            t,
            decisions,
            consensus,
            losses,
            bits,
            fallback,
            x_avg,
            v_avg,
            e_avg,
            e_sq,
            consensus_err,
            tracking_err,
        })
    }

    /// Runs the remaining rounds.
    pub fn finish(mut self) -> Result<Trace> {
        let mut rounds = Vec::with_capacity(self.config.problem.horizon());
        while !self.is_done() {
            rounds.push(self.step()?);
        }
        Ok(Trace {
            agents: self.config.problem.agents(),
            dim: self.config.problem.dim(),
            alpha: self.alpha,
            rounds,
            initial_grad_norm_sum: self.initial_grad_norm_sum,
        })
    }
}

/// Executes rounds `1..=T`.
pub fn run(config: RunConfig<'_>) -> Result<Trace> {
    Engine::new(config)?.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_graphs, GraphKind};
    use crate::problem::{generate_regression_stream, RegressionParams};
    use nalgebra::DMatrix;

    fn setup(n: usize, d: usize, t: usize) -> (OnlineProblem, GraphSequence, ConstraintSet) {
        let p = generate_regression_stream(RegressionParams::new(5, n, d, t, 5e-6)).unwrap();
        let g = generate_graphs(GraphKind::RandomWindow, n, t, 3, 5).unwrap();
        (p, g, ConstraintSet::l1_ball(2.0, d).unwrap())
    }

    fn config<'a>(p: &'a OnlineProblem, g: &'a GraphSequence, x: ConstraintSet, q: QuantizerSpec) -> RunConfig<'a> {
        RunConfig {
            problem: p,
            graphs: g,
            set: x,
            state_quantizer: q,
            grad_quantizer: q,
            step: StepSize::Constant { alpha: 0.1 },
            initial: None,
            seed: 17,
        }
    }

    #[test]
    fn exact_averaging_on_two_agents() {
        let p = generate_regression_stream(RegressionParams::new(1, 2, 2, 1, 0.0)).unwrap();
        let w = DMatrix::from_element(2, 2, 0.5);
        let g = GraphSequence::from_matrices(vec![w], 1).unwrap();
        let mut cfg = config(&p, &g, ConstraintSet::l1_ball(2.0, 2).unwrap(), QuantizerSpec::identity());
        cfg.initial = Some(vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
        let trace = run(cfg).unwrap();
        assert_eq!(trace.round(1).consensus, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn step_size_validation() {
        assert!(StepSize::Constant { alpha: 0.0 }.validate(10).is_err());
        assert!(StepSize::Constant { alpha: 1.5 }.validate(10).is_err());
        assert_eq!(StepSize::Constant { alpha: 1.0 }.validate(10).unwrap(), 1.0);
        assert!(StepSize::Horizon { kappa2: 20.0, gamma: 0.5 }.validate(100).is_err());
        let a = StepSize::Horizon { kappa2: 0.5, gamma: 0.3 }.validate(2000).unwrap();
        assert!((a - 0.5 / 2000f64.powf(0.3)).abs() < 1e-15);
        let msg = StepSize::Constant { alpha: 0.0 }.validate(1).unwrap_err().to_string();
        assert!(msg.contains("0 < α ≤ 1"));
    }

    #[test]
    fn rejects_zero_step_before_round_one() {
        let (p, g, x) = setup(3, 4, 5);
        let mut cfg = config(&p, &g, x, QuantizerSpec::identity());
        cfg.step = StepSize::Constant { alpha: 0.0 };
        assert!(matches!(run(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_disconnected_network() {
        let (p, _, x) = setup(3, 4, 4);
        let g = GraphSequence::from_matrices(vec![DMatrix::identity(3, 3); 4], 2).unwrap();
        let err = run(config(&p, &g, x, QuantizerSpec::identity())).unwrap_err();
        assert!(err.to_string().contains("assumption 1"));
    }

    #[test]
    fn rejects_infeasible_initial_point() {
        let (p, g, x) = setup(2, 3, 4);
        let mut cfg = config(&p, &g, x, QuantizerSpec::identity());
        cfg.initial = Some(vec![vec![3.0, 0.0, 0.0], vec![0.0; 3]]);
        assert!(run(cfg).is_err());
    }

    #[test]
    fn feasibility_fallback_sends_exact_state() {
        // k = 1 rounds (1.5, 0.5) to integers; (2, 1) leaves the ball
        let p = generate_regression_stream(RegressionParams::new(1, 1, 2, 1, 0.0)).unwrap();
        let g = GraphSequence::from_matrices(vec![DMatrix::identity(1, 1)], 1).unwrap();
        let q = QuantizerSpec::probabilistic_power(0.0, None, 2.0).unwrap();
        let mut hits = 0;
        for seed in 0..64 {
            let mut cfg = config(&p, &g, ConstraintSet::l1_ball(2.0, 2).unwrap(), q);
            cfg.initial = Some(vec![vec![1.5, 0.5]]);
            cfg.seed = seed;
            let r = run(cfg).unwrap().rounds.remove(0);
            if r.fallback[0] {
                hits += 1;
                assert_eq!(r.consensus[0], vec![1.5, 0.5]);
                assert_eq!(r.e_sq[0], 0.0);
                let grad_bits = q.message_bits(2, 1);
                assert!(r.bits[0] >= 128 + grad_bits);
            } else {
                let c = &r.consensus[0];
                assert!(c[0].abs() + c[1].abs() <= 2.0);
                assert!(c.iter().all(|v| v.fract() == 0.0));
            }
        }
        // P(fallback) = 1/4 per seed
        assert!(hits > 5 && hits < 30, "{hits}");
    }

    #[test]
    fn iterates_stay_feasible() {
        let (p, g, x) = setup(5, 8, 60);
        let q = QuantizerSpec::probabilistic_power(0.8, None, 2.0).unwrap();
        let trace = run(config(&p, &g, x, q)).unwrap();
        assert_eq!(trace.len(), 60);
        for r in &trace.rounds {
            for (xi, xh) in r.decisions.iter().zip(&r.consensus) {
                assert!(x.contains(xi).unwrap());
                assert!(x.contains(xh).unwrap());
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let (p, g, x) = setup(4, 6, 30);
        let q = QuantizerSpec::probabilistic_power(1.0, None, 2.0).unwrap();
        let a = run(config(&p, &g, x, q)).unwrap();
        let b = run(config(&p, &g, x, q)).unwrap();
        assert_eq!(a, b);
        let mut other = config(&p, &g, x, q);
        other.seed = 18;
        assert_ne!(a, run(other).unwrap());
    }

    #[test]
    fn convex_combination_update() {
        // one agent, identity weights, a direction pointing along −e₀
        let s = Sample { features: vec![1.0, 0.0], label: 10.0 };
        let p = OnlineProblem::from_samples(vec![vec![s.clone()], vec![s]], 0.0).unwrap();
        let g = GraphSequence::from_matrices(vec![DMatrix::identity(1, 1); 2], 1).unwrap();
        let mut cfg = config(&p, &g, ConstraintSet::l1_ball(2.0, 2).unwrap(), QuantizerSpec::identity());
        cfg.step = StepSize::Constant { alpha: 0.5 };
        let trace = run(cfg).unwrap();
        // gradient at 0 is (−10, 0), so v = (2, 0) and x₂ = 0 + 0.5·(2 − 0)
        assert_eq!(trace.round(2).decisions[0], vec![1.0, 0.0]);
        assert_eq!(trace.round(1).v_avg, vec![2.0, 0.0]);
    }

    #[test]
    fn single_agent_is_centralized_online_frank_wolfe() {
        let p = generate_regression_stream(RegressionParams::new(3, 1, 5, 40, 1e-3)).unwrap();
        let g = GraphSequence::from_matrices(vec![DMatrix::identity(1, 1); 40], 1).unwrap();
        let x = ConstraintSet::l1_ball(2.0, 5).unwrap();
        let trace = run(config(&p, &g, x, QuantizerSpec::identity())).unwrap();
        let mut xt = vec![0.0; 5];
        let mut grad = vec![0.0; 5];
        for t in 1..=40 {
            assert_eq!(trace.round(t).decisions[0], xt);
            p.sample(0, t).unwrap().grad_into(&xt, p.rho(), &mut grad);
            let v = x.lmo(&grad).unwrap();
            xt = xt.iter().zip(&v).map(|(a, b)| a + 0.1 * (b - a)).collect();
        }
    }

    #[test]
    fn tracked_gradients_are_conserved() {
        let (p, g, x) = setup(6, 5, 40);
        let q = QuantizerSpec::probabilistic_power(1.0, None, 2.0).unwrap();
        let mut engine = Engine::new(config(&p, &g, x, q)).unwrap();
        while !engine.is_done() {
            engine.step().unwrap();
            for k in 0..5 {
                let tracked: f64 = engine.states().iter().map(|s| s.tracked[k]).sum();
                let sent: f64 = engine
                    .states()
                    .iter()
                    .map(|s| s.last_qgrad.as_ref().unwrap()[k])
                    .sum();
                assert!((tracked - sent).abs() <= 1e-10 * sent.abs().max(1.0));
            }
        }
    }

    #[test]
    fn average_state_recursion_holds() {
        let (p, g, x) = setup(5, 6, 50);
        let q = QuantizerSpec::probabilistic_power(0.8, None, 2.0).unwrap();
        let trace = run(config(&p, &g, x, q)).unwrap();
        let a = trace.alpha;
        for t in 2..=50 {
            let prev = trace.round(t - 1);
            for k in 0..6 {
                let mixed = prev.x_avg[k] + prev.e_avg[k];
                let expect = (1.0 - a) * mixed + a * prev.v_avg[k];
                assert!((trace.round(t).x_avg[k] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn state_quantization_error_within_resolution() {
        let p = generate_regression_stream(RegressionParams::new(2, 2, 6, 1, 0.0)).unwrap();
        let g = GraphSequence::from_matrices(vec![DMatrix::from_element(2, 2, 0.5)], 1).unwrap();
        let x = ConstraintSet::l1_ball(2.0, 6).unwrap();
        // k_1 = 3
        let q = QuantizerSpec::probabilistic_power(1.0, Some(3), 2.0).unwrap();
        let q = QuantizerSpec { schedule: crate::quantizer::LevelSchedule::Power { exponent: 0.0 }, ..q };
        let init = vec![vec![0.31, -0.47, 0.05, 0.2, -0.12, 0.6], vec![-0.9, 0.1, 0.33, 0.0, 0.25, -0.2]];
        let runs = 4000;
        let mut mean = [0.0; 2];
        for seed in 0..runs {
            let mut cfg = config(&p, &g, x, q);
            cfg.initial = Some(init.clone());
            cfg.seed = seed;
            let r = run(cfg).unwrap();
            for i in 0..2 {
                mean[i] += r.round(1).e_sq[i] / runs as f64;
            }
        }
        let eps = q.resolution(6, 1);
        for m in mean {
            assert!(m > 0.0 && m <= 1.1 * eps * 4.0, "{m} vs {eps}");
        }
    }

    #[test]
    fn fine_quantization_approaches_identity() {
        use crate::quantizer::{LevelSchedule, QuantizerKind};
        let (p, g, x) = setup(4, 6, 1000);
        let exact = run(config(&p, &g, x, QuantizerSpec::identity())).unwrap();
        let mut gaps = Vec::new();
        for kappa1 in [1e-4, 1e-10, 1e-16] {
            let schedule = LevelSchedule::Resolution { kappa1, xi: 2.0 };
            let q = QuantizerSpec::new(QuantizerKind::Probabilistic, schedule, None, 2.0).unwrap();
            let fine = run(config(&p, &g, x, q)).unwrap();
            let (a, b) = (exact.round(1000), fine.round(1000));
            gaps.push((0..4).map(|i| dist2(&a.decisions[i], &b.decisions[i])).fold(0.0, f64::max));
        }
        assert!(gaps[2] < 1e-6, "{gaps:?}");
        assert!(gaps[2] <= gaps[1] && gaps[1] <= gaps[0], "{gaps:?}");
    }
}
