//! Dynamic regret against per-round comparators.

use crate::engine::Trace;
use crate::error::{invalid, Result};
use crate::problem::OnlineProblem;

use super::comparator::Comparator;

fn check(trace: &Trace, problem: &OnlineProblem, comparators: &[Comparator]) -> Result<()> {
    if trace.len() != problem.horizon() || comparators.len() != trace.len() {
        return Err(invalid(format!(
            "trace has {} rounds, problem {}, comparators {}",
            trace.len(),
            problem.horizon(),
            comparators.len()
        )));
    }
    Ok(())
}

/// Per-round gaps `F_t(x_{j,t}) − F_t(x_t*)` for every agent `j`, indexed `[j][t−1]`.
pub fn instantaneous_regret(
    trace: &Trace,
    problem: &OnlineProblem,
    comparators: &[Comparator],
) -> Result<Vec<Vec<f64>>> {
    check(trace, problem, comparators)?;
    let n = problem.agents();
    let rho = problem.rho();
    let mut out = vec![Vec::with_capacity(trace.len()); n];
    for (rec, cmp) in trace.rounds.iter().zip(comparators) {
        let samples = problem.round(rec.t)?;
        for (j, x) in rec.decisions.iter().enumerate() {
            let f: f64 = samples.iter().map(|s| s.loss(x, rho)).sum();
            out[j].push(f - cmp.value);
        }
    }
    Ok(out)
}

fn partial_sums(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// `Regret_d^j(t) = Σ_{s≤t} [F_s(x_{j,s}) − F_s(x_s*)]` for `t = 1..=T`.
pub fn dynamic_regret(
    trace: &Trace,
    problem: &OnlineProblem,
    j: usize,
    comparators: &[Comparator],
) -> Result<Vec<f64>> {
    check(trace, problem, comparators)?;
    if j >= problem.agents() {
        return Err(invalid(format!("agent {j} out of range")));
    }
    let rho = problem.rho();
    let gaps: Vec<f64> = trace
        .rounds
        .iter()
        .zip(comparators)
        .map(|(rec, cmp)| {
            let samples = problem.round(rec.t)?;
            let f: f64 = samples.iter().map(|s| s.loss(&rec.decisions[j], rho)).sum();
            Ok(f - cmp.value)
        })
        .collect::<Result<_>>()?;
    Ok(partial_sums(&gaps))
}

/// Partial sums of each row of [`instantaneous_regret`].
pub fn all_regrets(trace: &Trace, problem: &OnlineProblem, comparators: &[Comparator]) -> Result<Vec<Vec<f64>>> {
    Ok(instantaneous_regret(trace, problem, comparators)?
        .iter()
        .map(|g| partial_sums(g))
        .collect())
}

/// `(1/n) Σ_j Regret_d^j(t) / t`.
pub fn global_average(regrets: &[Vec<f64>]) -> Vec<f64> {
    let n = regrets.len() as f64;
    let len = regrets.first().map_or(0, Vec::len);
    (0..len)
        .map(|t| regrets.iter().map(|r| r[t]).sum::<f64>() / n / (t + 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RoundRecord;
    use crate::problem::Sample;

    fn record(t: usize, x: Vec<f64>) -> RoundRecord {
        RoundRecord {
            t,
            decisions: vec![x.clone()],
            consensus: vec![x.clone()],
            losses: vec![0.0],
            bits: vec![0],
            fallback: vec![false],
            x_avg: x.clone(),
            v_avg: x,
            e_avg: vec![0.0],
            e_sq: vec![0.0],
            consensus_err: vec![0.0],
            tracking_err: vec![0.0],
        }
    }

    fn trace(xs: Vec<f64>) -> Trace {
        Trace {
            agents: 1,
            dim: 1,
            alpha: 0.5,
            rounds: xs.into_iter().enumerate().map(|(i, x)| record(i + 1, vec![x])).collect(),
            initial_grad_norm_sum: 0.0,
        }
    }

    #[test]
    fn arithmetic_example() {
        // F₁(x) = ½x², so F₁(√6) = 3 against a comparator value of 1
        let s = Sample { features: vec![1.0], label: 0.0 };
        let p = OnlineProblem::from_samples(vec![vec![s]], 0.0).unwrap();
        let tr = trace(vec![6f64.sqrt()]);
        let cmp = Comparator { x: vec![2f64.sqrt()], value: 1.0, gap: 0.0 };
        let r = dynamic_regret(&tr, &p, 0, &[cmp]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_when_playing_the_comparator() {
        let s = Sample { features: vec![2.0], label: 1.0 };
        let p = OnlineProblem::from_samples(vec![vec![s.clone()], vec![s]], 0.0).unwrap();
        let tr = trace(vec![0.5, 0.5]);
        let cmp = Comparator { x: vec![0.5], value: 0.0, gap: 0.0 };
        let r = dynamic_regret(&tr, &p, 0, &[cmp.clone(), cmp.clone()]).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
        assert_eq!(all_regrets(&tr, &p, &[cmp.clone(), cmp]).unwrap(), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn average_divides_by_t_and_n() {
        let g = global_average(&[vec![2.0, 4.0], vec![4.0, 8.0]]);
        assert_eq!(g, vec![3.0, 3.0]);
    }
}
