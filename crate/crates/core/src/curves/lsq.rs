//! Box-constrained Levenberg–Marquardt for three-parameter models.

use nalgebra::{Matrix3, Vector3};

pub type Params = [f64; 3];

#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    pub lo: Params,
    pub hi: Params,
}

impl Bounds {
    pub fn clamp(&self, p: Params) -> Params {
        [0, 1, 2].map(|i| p[i].clamp(self.lo[i], self.hi[i]))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease of an accepted step is below this.
    pub ftol: f64,
    /// Stop when the relative parameter change is below this.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 2000, ftol: 1e-15, xtol: 1e-13 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmOutcome {
    pub params: Params,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn cost_of(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum()
}

/// Minimise `sum(residual(p)_i^2)` starting at `start`, keeping `p` inside
/// `bounds` by projection. `residual` writes into its output slice and
/// returns false when the model is undefined at `p`.
pub fn minimize(
    residual: impl Fn(&Params, &mut [f64]) -> bool,
    m: usize,
    start: Params,
    bounds: &Bounds,
    opts: &LmOptions,
) -> Option<LmOutcome> {
    let mut p = bounds.clamp(start);
    let mut r = vec![0.0; m];
    if !residual(&p, &mut r) {
        return None;
    }
    let mut cost = cost_of(&r);
    let mut lambda = 1e-3;
    let mut jac = vec![[0.0f64; 3]; m];
    let mut r_plus = vec![0.0; m];
    let mut r_minus = vec![0.0; m];
    let mut trial = vec![0.0; m];

    for iteration in 0..opts.max_iterations {
        if cost < 1e-28 {
            return Some(LmOutcome { params: p, cost, iterations: iteration, converged: true });
        }
        // Central differences, one-sided at an active bound.
        for k in 0..3 {
            let h = 1e-7 * p[k].abs().max(1e-3);
            let up = (p[k] + h).min(bounds.hi[k]);
            let down = (p[k] - h).max(bounds.lo[k]);
            if up <= down {
                jac.iter_mut().for_each(|row| row[k] = 0.0);
                continue;
            }
            let mut pu = p;
            pu[k] = up;
            let mut pd = p;
            pd[k] = down;
            if !residual(&pu, &mut r_plus) || !residual(&pd, &mut r_minus) {
                return Some(LmOutcome { params: p, cost, iterations: iteration, converged: false });
            }
            for i in 0..m {
                jac[i][k] = (r_plus[i] - r_minus[i]) / (up - down);
            }
        }
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for i in 0..m {
            let row = Vector3::from(jac[i]);
            jtj += row * row.transpose();
            jtr += row * r[i];
        }
        if jtr.norm() < 1e-14 * (1.0 + cost.sqrt()) {
            return Some(LmOutcome { params: p, cost, iterations: iteration, converged: true });
        }

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = bounds.clamp([p[0] + step[0], p[1] + step[1], p[2] + step[2]]);
            if residual(&cand, &mut trial) {
                let c = cost_of(&trial);
                if c.is_finite() && c < cost {
                    let rel_drop = (cost - c) / cost.max(1e-300);
                    let rel_step = (0..3)
                        .map(|k| (cand[k] - p[k]).abs() / (p[k].abs() + 1e-8))
                        .fold(0.0, f64::max);
                    p = cand;
                    cost = c;
                    std::mem::swap(&mut r, &mut trial);
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if rel_drop < opts.ftol || rel_step < opts.xtol {
                        return Some(LmOutcome { params: p, cost, iterations: iteration + 1, converged: true });
                    }
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent direction at any damping: a (possibly constrained) minimum.
            return Some(LmOutcome { params: p, cost, iterations: iteration + 1, converged: true });
        }
    }
    Some(LmOutcome { params: p, cost, iterations: opts.max_iterations, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential_decay() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.2).collect();
        let truth = [3.0, -0.7, 1.5];
        let ys: Vec<f64> = xs.iter().map(|x| truth[0] * (truth[1] * x).exp() + truth[2]).collect();
        let res = |p: &Params, out: &mut [f64]| {
            for (o, (x, y)) in out.iter_mut().zip(xs.iter().zip(&ys)) {
                *o = p[0] * (p[1] * x).exp() + p[2] - y;
            }
            true
        };
        let b = Bounds { lo: [-10.0; 3], hi: [10.0; 3] };
        let out = minimize(res, xs.len(), [1.0, -0.1, 0.0], &b, &LmOptions::default()).unwrap();
        assert!(out.converged);
        for k in 0..3 {
            assert!((out.params[k] - truth[k]).abs() < 1e-8, "{:?}", out.params);
        }
    }

    #[test]
    fn respects_bounds() {
        // Unconstrained optimum p0 = 5 lies outside the box.
        let res = |p: &Params, out: &mut [f64]| {
            out[0] = p[0] - 5.0;
            out[1] = p[1];
            out[2] = p[2];
            true
        };
        let b = Bounds { lo: [0.0; 3], hi: [2.0; 3] };
        let out = minimize(res, 3, [1.0, 1.0, 1.0], &b, &LmOptions::default()).unwrap();
        assert!((out.params[0] - 2.0).abs() < 1e-12);
        assert!(out.params[1].abs() < 1e-8);
    }

    #[test]
    fn undefined_start_is_rejected() {
        let b = Bounds { lo: [0.0; 3], hi: [1.0; 3] };
        assert!(minimize(|_, _| false, 1, [0.5; 3], &b, &LmOptions::default()).is_none());
    }
}
