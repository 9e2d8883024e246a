//! Box-constrained limited-memory quasi-Newton minimisation with
//! finite-difference gradients, plus Halton start points.
//!
//! Each iteration builds the L-BFGS direction on the variables that are not
//! pinned at a bound, then backtracks along the projected path
//! `P(x + alpha * d)` until the Armijo condition holds.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiNewtonConfig {
    pub max_iter: usize,
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Stop when the infinity norm of the projected gradient falls below this.
    pub grad_tol: f64,
    /// Stop when the relative objective decrease of an iteration falls below this.
    pub f_tol: f64,
    /// Stop as soon as the objective reaches this value.
    pub f_target: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for QuasiNewtonConfig {
    fn default() -> Self {
        Self {
            max_iter: 60,
            memory: 6,
            grad_tol: 1e-7,
            f_tol: 1e-9,
            f_target: 0.0,
            armijo: 1e-4,
            max_backtracks: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    GradientConverged,
    ObjectiveConverged,
    TargetReached,
    MaxIterations,
    LineSearchFailed,
}

impl Status {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Status::GradientConverged | Status::ObjectiveConverged | Status::TargetReached
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
}

struct Problem<'a, F> {
    f: F,
    lower: &'a [f64],
    upper: &'a [f64],
    steps: &'a [f64],
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Problem<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(self.lower).zip(self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Central differences, one-sided where a bound cuts the stencil.
    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            let hi = (x[i] + self.steps[i]).min(self.upper[i]);
            let lo = (x[i] - self.steps[i]).max(self.lower[i]);
            if hi <= lo {
                continue;
            }
            probe[i] = hi;
            let fp = self.eval(&probe);
            probe[i] = lo;
            let fm = self.eval(&probe);
            probe[i] = x[i];
            g[i] = (fp - fm) / (hi - lo);
        }
        g
    }

    fn free_mask(&self, x: &[f64], g: &[f64]) -> Vec<bool> {
        (0..x.len())
            .map(|i| {
                let pinned_low = x[i] <= self.lower[i] && g[i] > 0.0;
                let pinned_high = x[i] >= self.upper[i] && g[i] < 0.0;
                self.upper[i] > self.lower[i] && !pinned_low && !pinned_high
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Two-loop recursion restricted to the free variables.
fn lbfgs_direction(g: &[f64], free: &[bool], memory: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> {
        v.iter().zip(free).map(|(x, f)| if *f { *x } else { 0.0 }).collect()
    };
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y) in memory.iter().rev() {
        let (s, y) = (mask(s), mask(y));
        let sy = dot(&s, &y);
        if sy <= 0.0 {
            alphas.push(0.0);
            continue;
        }
        let a = dot(&s, &q) / sy;
        for (qi, yi) in q.iter_mut().zip(&y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y)) = memory.back() {
        let (s, y) = (mask(s), mask(y));
        let yy = dot(&y, &y);
        let sy = dot(&s, &y);
        if yy > 0.0 && sy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y), a) in memory.iter().zip(alphas.iter().rev()) {
        let (s, y) = (mask(s), mask(y));
        let sy = dot(&s, &y);
        if sy <= 0.0 {
            continue;
        }
        let b = dot(&y, &q) / sy;
        for (qi, si) in q.iter_mut().zip(&s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Minimises `f` over the box `[lower, upper]` starting from `x0` (projected into the box).
/// `steps` are the per-coordinate finite-difference steps.
pub fn minimize_bounded<F: FnMut(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    steps: &[f64],
    cfg: &QuasiNewtonConfig,
) -> Minimum {
    let n = x0.len();
    assert!(lower.len() == n && upper.len() == n && steps.len() == n);
    let mut p = Problem {
        f,
        lower,
        upper,
        steps,
        evaluations: 0,
    };
    let mut x = x0.to_vec();
    p.project(&mut x);
    let mut fx = p.eval(&x);
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(cfg.memory);
    let mut g = p.gradient(&x);

    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        if fx <= cfg.f_target {
            status = Status::TargetReached;
            break;
        }
        let free = p.free_mask(&x, &g);
        let pg: Vec<f64> = g.iter().zip(&free).map(|(v, f)| if *f { *v } else { 0.0 }).collect();
        if inf_norm(&pg) < cfg.grad_tol {
            status = Status::GradientConverged;
            break;
        }
        iterations += 1;

        let mut accepted = None;
        for use_memory in [true, false] {
            if !use_memory && memory.is_empty() {
                break;
            }
            let mut d = if use_memory && !memory.is_empty() {
                lbfgs_direction(&g, &free, &memory)
            } else {
                pg.iter().map(|v| -v).collect()
            };
            if dot(&d, &pg) >= 0.0 {
                d = pg.iter().map(|v| -v).collect();
            }
            if memory.is_empty() || !use_memory {
                // first step: move at most a tenth of the unit scale
                let scale = 0.1 / inf_norm(&d).max(1e-300);
                if scale < 1.0 {
                    d.iter_mut().for_each(|v| *v *= scale);
                }
            }
            let mut alpha = 1.0;
            for _ in 0..cfg.max_backtracks {
                let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
                p.project(&mut trial);
                let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                let decrease = dot(&g, &step);
                if inf_norm(&step) == 0.0 {
                    break;
                }
                let ft = p.eval(&trial);
                if ft <= fx + cfg.armijo * decrease && decrease < 0.0 {
                    accepted = Some((trial, ft));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            memory.clear();
        }

        let Some((x_new, f_new)) = accepted else {
            status = Status::LineSearchFailed;
            break;
        };
        let g_new = p.gradient(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if memory.len() == cfg.memory {
                memory.pop_front();
            }
            memory.push_back((s, y));
        }
        let rel = (fx - f_new) / fx.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        if rel <= cfg.f_tol {
            status = Status::ObjectiveConverged;
            break;
        }
    }
    if fx <= cfg.f_target {
        status = Status::TargetReached;
    }
    Minimum {
        x,
        f: fx,
        iterations,
        evaluations: p.evaluations,
        status,
    }
}

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Point `index` of the Halton sequence in `[0, 1)^dim`; `index` 0 is the origin, so start from 1.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len());
    PRIMES[..dim].iter().map(|&b| radical_inverse(index, b)).collect()
}
