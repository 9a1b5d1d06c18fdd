//! Per-round minimizers `x_t* ∈ argmin_{x∈X} F_t(x)` with a Frank-Wolfe gap certificate.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problem::{ConstraintSet, OnlineProblem, SetKind};

/// Default certificate tolerance on the Frank-Wolfe gap.
pub const COMPARATOR_TOL: f64 = 1e-8;
/// Iteration cap of the Frank-Wolfe polish.
pub const FW_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparator {
    pub x: Vec<f64>,
    /// `F_t(x_t*)`
    pub value: f64,
    /// `max_{v∈X} ⟨∇F_t(x_t*), x_t* − v⟩`
    pub gap: f64,
}

/// `F_t(x) = ½xᵀAx − bᵀx + c`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl Quadratic {
    pub fn of_round(problem: &OnlineProblem, t: usize) -> Result<Self> {
        let d = problem.dim();
        let samples = problem.round(t)?;
        let n = samples.len() as f64;
        let mut a = DMatrix::identity(d, d) * (2.0 * n * problem.rho());
        let mut b = DVector::zeros(d);
        let mut c = 0.0;
        for s in &samples {
            let p = DVector::from_column_slice(&s.features);
            a.ger(1.0, &p, &p, 1.0);
            b.axpy(s.label, &p, 1.0);
            c += 0.5 * s.label * s.label;
        }
        Ok(Self { a, b, c })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x)) - self.b.dot(x) + self.c
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }
}

fn fw_gap(set: &ConstraintSet, x: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let v = DVector::from_vec(set.lmo(g.as_slice()).expect("dimension checked"));
    g.dot(&(x - v))
}

/// Frank-Wolfe with exact line search, started at `x`; returns the final gap.
fn polish(q: &Quadratic, set: &ConstraintSet, x: &mut DVector<f64>, tol: f64) -> Result<f64> {
    let mut gap = f64::INFINITY;
    for _ in 0..FW_MAX_ITERS {
        let g = q.grad(x);
        let v = DVector::from_vec(set.lmo(g.as_slice())?);
        let dir = &v - &*x;
        gap = -g.dot(&dir);
        if gap <= tol {
            return Ok(gap);
        }
        let curv = dir.dot(&(&q.a * &dir));
        let step = if curv > 0.0 { (gap / curv).min(1.0) } else { 1.0 };
        x.axpy(step, &dir, 1.0);
    }
    Err(Error::SolverCap {
        iterations: FW_MAX_ITERS,
        gap,
        tol,
    })
}

/// Lasso homotopy on `½xᵀAx − bᵀx + λ‖x‖₁`, following the path from
/// `λ = ‖b‖_∞` down until `‖x‖₁ = r` or `λ = 0`.
fn l1_homotopy(q: &Quadratic, r: f64) -> DVector<f64> {
    let d = q.b.len();
    let mut x = DVector::zeros(d);
    let (mut j0, mut lambda) = (0, 0.0);
    for (j, v) in q.b.iter().enumerate() {
        if v.abs() > lambda {
            (j0, lambda) = (j, v.abs());
        }
    }
    if lambda == 0.0 {
        return x;
    }
    let mut active = vec![j0];
    let mut signs = vec![q.b[j0].signum()];
    // an index that just changed status may sit at its breakpoint up to rounding
    let (mut joined, mut left) = (Some(j0), None);
    let eps_step = 1e-12 * lambda;
    for _ in 0..(20 * d + 20) {
        let k = active.len();
        let a_ss = DMatrix::from_fn(k, k, |r, c| q.a[(active[r], active[c])]);
        let Some(chol) = a_ss.cholesky() else {
            return x;
        };
        let s = DVector::from_vec(signs.clone());
        let b_s = DVector::from_fn(k, |r, _| q.b[active[r]]);
        let x_s = chol.solve(&(b_s - &s * lambda));
        let u = chol.solve(&s);
        x.fill(0.0);
        for (r, &j) in active.iter().enumerate() {
            x[j] = x_s[r];
        }
        let l1 = s.dot(&x_s);
        let slope = s.dot(&u);

        let mut delta = lambda;
        let mut event = None;
        if slope > 0.0 {
            let hit = (r - l1) / slope;
            if hit <= delta {
                delta = hit.max(0.0);
                event = Some(Event::Radius);
            }
        }
        let c = &q.b - &q.a * &x;
        for j in 0..d {
            if active.contains(&j) {
                continue;
            }
            let aj: f64 = active.iter().enumerate().map(|(r, &i)| q.a[(j, i)] * u[r]).sum();
            for (num, den, sign) in [(lambda - c[j], 1.0 - aj, 1.0), (lambda + c[j], 1.0 + aj, -1.0)] {
                if den > 1e-14 {
                    let cand = (num / den).max(0.0);
                    if cand < delta && (left != Some(j) || cand > eps_step) {
                        delta = cand;
                        event = Some(Event::Join(j, sign));
                    }
                }
            }
        }
        for (r, &j) in active.iter().enumerate() {
            if x_s[r] * u[r] < 0.0 {
                let cand = -x_s[r] / u[r];
                if cand < delta && (joined != Some(j) || cand > eps_step) {
                    delta = cand;
                    event = Some(Event::Leave(j));
                }
            }
        }
        x.fill(0.0);
        for (r, &j) in active.iter().enumerate() {
            x[j] = x_s[r] + delta * u[r];
        }
        lambda -= delta;
        match event {
            None | Some(Event::Radius) => return x,
            Some(Event::Join(j, sign)) => {
                active.push(j);
                signs.push(sign);
                (joined, left) = (Some(j), None);
            }
            Some(Event::Leave(j)) => {
                let r = active.iter().position(|&i| i == j).expect("active");
                active.remove(r);
                signs.remove(r);
                x[j] = 0.0;
                (joined, left) = (None, Some(j));
            }
        }
        if lambda <= 0.0 {
            return x;
        }
    }
    x
}

enum Event {
    Radius,
    Join(usize, f64),
    Leave(usize),
}

/// Trust-region style solve of `min F` on the L2 ball via `(A + μI)x = b`.
fn l2_secular(q: &Quadratic, r: f64) -> DVector<f64> {
    let eig = q.a.clone().symmetric_eigen();
    let beta = eig.eigenvectors.transpose() * &q.b;
    let solve = |mu: f64| -> DVector<f64> {
        let coef = DVector::from_fn(beta.len(), |k, _| {
            let den = eig.eigenvalues[k] + mu;
            if den > 0.0 {
                beta[k] / den
            } else {
                0.0
            }
        });
        &eig.eigenvectors * coef
    };
    let free = solve(0.0);
    if free.norm() <= r {
        return free;
    }
    let (mut lo, mut hi) = (0.0, q.b.norm() / r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if solve(mid).norm() > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    solve(hi)
}

/// Solves `min_{x∈X} F_t(x)` to a Frank-Wolfe gap of at most `tol`.
pub fn comparator(problem: &OnlineProblem, set: &ConstraintSet, t: usize, tol: f64) -> Result<Comparator> {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    if set.dim() != problem.dim() {
        return Err(invalid("constraint set and problem dimensions differ"));
    }
    let q = Quadratic::of_round(problem, t)?;
    let r = set.radius();
    let mut x = match set.kind() {
        SetKind::L1Ball => l1_homotopy(&q, r),
        SetKind::L2Ball => l2_secular(&q, r),
    };
    // clip rounding drift back into X
    let norm = set.norm(x.as_slice());
    if norm > r {
        x *= r / norm;
    }
    let mut gap = fw_gap(set, &x, &q.grad(&x));
    if gap > tol {
        gap = polish(&q, set, &mut x, tol)?;
    }
    Ok(Comparator {
        value: q.value(&x),
        x: x.as_slice().to_vec(),
        gap,
    })
}

/// Comparators for `t = 1..=T`, solved in parallel.
pub fn comparators(problem: &OnlineProblem, set: &ConstraintSet, tol: f64) -> Result<Vec<Comparator>> {
    (1..=problem.horizon())
        .into_par_iter()
        .map(|t| comparator(problem, set, t, tol))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate_regression_stream, RegressionParams, Sample};
    use crate::rng::{self, Purpose};

    fn single(features: Vec<f64>, label: f64) -> OnlineProblem {
        OnlineProblem::from_samples(vec![vec![Sample { features, label }]], 0.0).unwrap()
    }

    #[test]
    fn interior_optimum() {
        let p = single(vec![1.0, 0.0], 1.0);
        let c = comparator(&p, &ConstraintSet::l1_ball(2.0, 2).unwrap(), 1, 1e-8).unwrap();
        assert!((c.x[0] - 1.0).abs() < 1e-12 && c.x[1].abs() < 1e-12);
        assert!(c.value.abs() < 1e-20);
    }

    #[test]
    fn clipped_optimum() {
        let p = single(vec![1.0, 0.0], 10.0);
        let c = comparator(&p, &ConstraintSet::l1_ball(2.0, 2).unwrap(), 1, 1e-8).unwrap();
        assert_eq!(c.x, vec![2.0, 0.0]);
        assert_eq!(c.value, 32.0);
    }

    #[test]
    fn beats_random_feasible_points() {
        let p = generate_regression_stream(RegressionParams::new(4, 3, 4, 3, 0.01)).unwrap();
        let x = ConstraintSet::l1_ball(2.0, 4).unwrap();
        let mut rng = rng::stream(9, Purpose::Sampling, 0, 0);
        for t in 1..=3 {
            let c = comparator(&p, &x, t, 1e-8).unwrap();
            assert!(c.gap <= 1e-8);
            assert!(x.contains(&c.x).unwrap());
            for _ in 0..10_000 {
                let y = x.sample_uniform(&mut rng);
                assert!(c.value <= p.global_loss(t, &y).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn default_scale_certificates() {
        let p = generate_regression_stream(RegressionParams::new(1, 10, 30, 20, 5e-6)).unwrap();
        let x = ConstraintSet::l1_ball(2.0, 30).unwrap();
        for c in comparators(&p, &x, COMPARATOR_TOL).unwrap() {
            assert!(c.gap <= COMPARATOR_TOL, "{}", c.gap);
        }
    }

    #[test]
    fn l2_ball_solution() {
        let p = single(vec![3.0, 4.0], 50.0);
        let set = ConstraintSet::l2_ball(1.0, 2).unwrap();
        let c = comparator(&p, &set, 1, 1e-10).unwrap();
        assert!((c.x[0] - 0.6).abs() < 1e-8 && (c.x[1] - 0.8).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let p = single(vec![1.0], 0.0);
        assert!(comparator(&p, &ConstraintSet::l1_ball(1.0, 1).unwrap(), 1, 0.0).is_err());
    }
}
