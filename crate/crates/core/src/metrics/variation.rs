//! Function variation `H_T` and gradient variation `D_T`.
//!
//! The inner maximum over `X` is taken over a fixed low-discrepancy sample of
//! the set (plus its extreme points and the origin), so the estimates are lower
//! bounds of the true suprema and are exact for a static stream.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::problem::{ConstraintSet, OnlineProblem, SetKind};

/// Default number of sample points.
pub const VARIATION_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variations {
    pub h_total: f64,
    pub d_total: f64,
    /// `f_t^sup` for `t = 1..T−1`.
    pub f_sup: Vec<f64>,
    /// `g_t^sup` for `t = 1..T−1`.
    pub g_sup: Vec<f64>,
    pub samples: usize,
}

fn primes(count: usize) -> Vec<u8> {
    (2u16..=255)
        .filter(|&p| (2..p).take_while(|k| k * k <= p).all(|k| p % k != 0))
        .map(|p| p as u8)
        .take(count)
        .collect()
}

/// Halton points of `[−1, 1]^d` mapped onto the set, followed by `±r e_k` and `0`.
pub fn sample_points(set: &ConstraintSet, samples: usize) -> Vec<Vec<f64>> {
    let d = set.dim();
    let bases = primes(54);
    let r = set.radius();
    let mut pts = Vec::with_capacity(samples + 2 * d + 1);
    for idx in 1..=samples {
        let y: Vec<f64> = (0..d)
            .map(|k| {
                // beyond the available bases, reuse them on a shifted index
                let shift = (k / bases.len()) * (samples + 1);
                2.0 * halton::number(bases[k % bases.len()], idx + shift) - 1.0
            })
            .collect();
        let sup = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let own = match set.kind() {
            SetKind::L1Ball => y.iter().map(|v| v.abs()).sum::<f64>(),
            SetKind::L2Ball => y.iter().map(|v| v * v).sum::<f64>().sqrt(),
        };
        let scale = if own > 0.0 { r * sup / own } else { 0.0 };
        pts.push(y.iter().map(|v| v * scale).collect());
    }
    for k in 0..d {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[k] = sign * r;
            pts.push(e);
        }
    }
    pts.push(vec![0.0; d]);
    pts
}

/// Estimates `(H_T, D_T)` from `samples` Halton points.
pub fn variations(problem: &OnlineProblem, set: &ConstraintSet, samples: usize) -> Result<Variations> {
    if samples == 0 {
        return Err(invalid("variations needs at least one sample"));
    }
    if set.dim() != problem.dim() {
        return Err(invalid("constraint set and problem dimensions differ"));
    }
    let pts = sample_points(set, samples);
    let d = problem.dim();
    let m = pts.len();
    let xs = DMatrix::from_fn(d, m, |k, j| pts[j][k]);
    let n = problem.agents();
    let horizon = problem.horizon();

    let features = |t: usize| -> Result<(DMatrix<f64>, Vec<f64>)> {
        let round = problem.round(t)?;
        let p = DMatrix::from_fn(n, d, |i, k| round[i].features[k]);
        Ok((p, round.into_iter().map(|s| s.label).collect()))
    };

    let mut f_sup = Vec::with_capacity(horizon.saturating_sub(1));
    let mut g_sup = Vec::with_capacity(horizon.saturating_sub(1));
    let mut prev = features(1)?;
    let mut prev_dots = &prev.0 * &xs;
    for t in 1..horizon {
        let next = features(t + 1)?;
        let next_dots = &next.0 * &xs;
        let (mut fmax, mut gmax) = (0.0f64, 0.0f64);
        for i in 0..n {
            let p = prev.0.row(i);
            let a = next.0.row(i);
            if p == a && prev.1[i] == next.1[i] {
                continue;
            }
            let (pp, aa, ap) = (p.dot(&p), a.dot(&a), a.dot(&p));
            for j in 0..m {
                let w = prev_dots[(i, j)] - prev.1[i];
                let u = next_dots[(i, j)] - next.1[i];
                // the ρ‖x‖² terms cancel
                fmax = fmax.max((0.5 * (u * u - w * w)).abs());
                let g2 = aa * u * u + pp * w * w - 2.0 * ap * u * w;
                gmax = gmax.max(g2.max(0.0).sqrt());
            }
        }
        f_sup.push(fmax);
        g_sup.push(gmax);
        prev = next;
        prev_dots = next_dots;
    }
    Ok(Variations {
        h_total: f_sup.iter().sum(),
        d_total: g_sup.iter().sum(),
        f_sup,
        g_sup,
        samples,
    })
}
