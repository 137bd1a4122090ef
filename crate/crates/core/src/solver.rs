//! The Bradley-Terry-Luce negative log-likelihood on the zero-sum subspace.
//!
//! Terms are aggregated per edge `(i, j)` with `i > j`:
//!
//! ```text
//! ℒ(θ) = Σ_{(i,j)} w_ij · ( −(a_ij / w_ij)(θ_i − θ_j) + log(1 + e^{θ_i − θ_j}) )
//! ```
//!
//! where `w_ij` is the (possibly weighted) number of comparisons and `a_ij`
//! the (weighted) number won by `i`. The default minimizer is damped Newton
//! with the zero-sum constraint handled by adding `11ᵀ/m` to the Hessian.
//! Preconditioned gradient descent is kept for fidelity checks.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplacian::{components, WeightedLaplacian};
use crate::logistic::{log1p_exp, sigmoid, sigmoid_prime};
use crate::pairing::{PairedComparisons, WeightedPairs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtlTerm {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    /// Weighted count of comparisons won by `i`.
    pub wins_i: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtlObjective {
    m: usize,
    terms: Vec<BtlTerm>,
}

impl BtlObjective {
    pub fn new(m: usize, terms: Vec<BtlTerm>) -> Result<Self> {
        for t in &terms {
            if t.i >= m || t.j >= t.i {
                return Err(Error::InvalidArgument(format!("term ({}, {}) must satisfy m > i > j", t.i, t.j)));
            }
            if t.weight.is_nan() || t.weight <= 0.0 || !(0.0..=t.weight).contains(&t.wins_i) {
                return Err(Error::InvalidArgument(format!(
                    "term ({}, {}) needs weight > 0 and 0 <= wins <= weight",
                    t.i, t.j
                )));
            }
        }
        Ok(Self { m, terms })
    }

    /// RP-MLE objective: weight L_ij, wins L_ij·Y_ji.
    pub fn from_comparisons(pc: &PairedComparisons) -> Self {
        let terms = pc
            .edges()
            .into_iter()
            .map(|((i, j), t)| BtlTerm { i, j, weight: t.count as f64, wins_i: t.wins_i as f64 })
            .collect();
        Self { m: pc.n_items(), terms }
    }

    /// Pseudo-likelihood objective from weighted all-pairs records.
    pub fn from_weighted_pairs(wp: &WeightedPairs) -> Self {
        let mut agg: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
        for r in &wp.records {
            let e = agg.entry((r.item_i, r.item_j)).or_default();
            e.0 += r.weight;
            if r.outcome == 0 {
                e.1 += r.weight;
            }
        }
        let terms = agg
            .into_iter()
            .filter(|(_, (w, _))| *w > 0.0)
            .map(|((i, j), (weight, wins_i))| BtlTerm { i, j, weight, wins_i })
            .collect();
        Self { m: wp.m, terms }
    }

    pub fn n_items(&self) -> usize {
        self.m
    }

    pub fn terms(&self) -> &[BtlTerm] {
        &self.terms
    }

    /// Components of the comparison graph over the terms.
    pub fn components(&self) -> Vec<Vec<usize>> {
        components(self.m, self.terms.iter().map(|t| (t.i, t.j)))
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() == self.m {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected: self.m, actual: theta.len() })
        }
    }

    pub fn nll(&self, theta: &[f64]) -> Result<f64> {
        self.check_len(theta)?;
        Ok(self.nll_unchecked(theta))
    }

    fn nll_unchecked(&self, theta: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let d = theta[t.i] - theta[t.j];
                // Same value either way; the branch keeps the large-|d| terms free of cancellation.
                if d > 0.0 {
                    (t.weight - t.wins_i) * d + t.weight * log1p_exp(-d)
                } else {
                    -t.wins_i * d + t.weight * log1p_exp(d)
                }
            })
            .sum()
    }

    /// Σ (w σ(θ_i − θ_j) − a)(e_i − e_j).
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_len(theta)?;
        Ok(self.gradient_unchecked(theta))
    }

    fn gradient_unchecked(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.m];
        for t in &self.terms {
            let d = theta[t.i] - theta[t.j];
            let r =
                if d > 0.0 { (t.weight - t.wins_i) - t.weight * sigmoid(-d) } else { t.weight * sigmoid(d) - t.wins_i };
            g[t.i] += r;
            g[t.j] -= r;
        }
        g
    }

    /// Σ w σ'(θ_i − θ_j)(e_i − e_j)(e_i − e_j)ᵀ.
    pub fn hessian(&self, theta: &[f64]) -> Result<WeightedLaplacian> {
        self.check_len(theta)?;
        Ok(self.hessian_unchecked(theta))
    }

    fn hessian_unchecked(&self, theta: &[f64]) -> WeightedLaplacian {
        WeightedLaplacian::from_edges(
            self.m,
            self.terms.iter().map(|t| (t.i, t.j, t.weight * sigmoid_prime(theta[t.i] - theta[t.j]))),
        )
    }

    /// Σ (w/4)(e_i − e_j)(e_i − e_j)ᵀ, which dominates the Hessian everywhere.
    fn hessian_bound(&self) -> WeightedLaplacian {
        WeightedLaplacian::from_edges(self.m, self.terms.iter().map(|t| (t.i, t.j, 0.25 * t.weight)))
    }

    fn require_connected(&self) -> Result<()> {
        if self.terms.is_empty() && self.m > 1 {
            return Err(Error::NoComparisons);
        }
        let comps = self.components();
        if comps.len() > 1 {
            return Err(Error::Disconnected { components: comps });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when ‖∇ℒ‖∞ falls to this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Iterates with ‖θ‖∞ above this are taken as evidence the MLE does not exist.
    pub divergence_bound: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100, divergence_bound: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub theta_hat: Vec<f64>,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn center(theta: &mut [f64]) {
    if theta.is_empty() {
        return;
    }
    let mean = theta.iter().sum::<f64>() / theta.len() as f64;
    theta.iter_mut().for_each(|v| *v -= mean);
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn completed_cholesky(l: &WeightedLaplacian) -> Option<Cholesky<f64, Dyn>> {
    let shift = 1.0 / l.n_items() as f64;
    Cholesky::new(l.matrix().map(|v| v + shift))
}

/// Newton steps longer than this block convergence even when the gradient is below `tol`.
const STEP_TOL: f64 = 1e-5;

/// Damped Newton from θ = 0.
pub fn solve_newton(obj: &BtlObjective, opts: &SolverOptions) -> Result<SolveResult> {
    solve_newton_from(obj, &vec![0.0; obj.m], opts)
}

/// Damped Newton from a warm start (shifted to zero mean before iterating).
pub fn solve_newton_from(obj: &BtlObjective, start: &[f64], opts: &SolverOptions) -> Result<SolveResult> {
    obj.check_len(start)?;
    obj.require_connected()?;
    let m = obj.m;
    let mut theta = start.to_vec();
    center(&mut theta);
    let mut f = obj.nll_unchecked(&theta);
    let mut iterations = 0;
    loop {
        let g = obj.gradient_unchecked(&theta);
        let grad_inf_norm = inf_norm(&g);
        let h = obj.hessian_unchecked(&theta);
        let Some(chol) = completed_cholesky(&h) else {
            return Err(Error::Diverged { bound: opts.divergence_bound, iterations });
        };
        let mut step: Vec<f64> = chol.solve(&DVector::from_column_slice(&g)).iter().map(|v| -v).collect();
        center(&mut step);
        // A small gradient with a large Newton step means the likelihood keeps
        // improving towards infinity; keep going until the bound catches it.
        let converged = grad_inf_norm <= opts.tol && inf_norm(&step) <= STEP_TOL;
        if !converged && grad_inf_norm <= opts.tol && iterations >= opts.max_iter {
            return Err(Error::Diverged { bound: opts.divergence_bound, iterations });
        }
        if converged || iterations >= opts.max_iter {
            return Ok(SolveResult { converged, theta_hat: theta, grad_inf_norm, iterations });
        }
        iterations += 1;
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();

        let mut t = 1.0;
        let slack = 8.0 * f64::EPSILON * f.abs().max(1.0);
        let mut candidate = vec![0.0; m];
        let accepted = loop {
            for k in 0..m {
                candidate[k] = theta[k] + t * step[k];
            }
            let fc = obj.nll_unchecked(&candidate);
            if fc <= f + 1e-4 * t * slope + slack {
                break Some(fc);
            }
            t *= 0.5;
            if t < 1e-12 {
                break None;
            }
        };
        let Some(fc) = accepted else {
            // No decrease is representable: the iterate is as good as floating point allows.
            return Ok(SolveResult { converged: false, theta_hat: theta, grad_inf_norm, iterations });
        };
        std::mem::swap(&mut theta, &mut candidate);
        center(&mut theta);
        f = fc;
        if inf_norm(&theta) > opts.divergence_bound {
            return Err(Error::Diverged { bound: opts.divergence_bound, iterations });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdOptions {
    /// Step size; `None` picks 1/λ_max(P†·H̄) with H̄ the global Hessian bound.
    pub eta: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub divergence_bound: f64,
    /// Starting point; `None` means θ⁰ = 0. Passing θ* replicates the analysis trajectory.
    pub start: Option<Vec<f64>>,
}

impl Default for PgdOptions {
    fn default() -> Self {
        Self { eta: None, tol: 1e-10, max_iter: 10_000, divergence_bound: 30.0, start: None }
    }
}

struct Preconditioner {
    chol: Cholesky<f64, Dyn>,
}

impl Preconditioner {
    fn new(precond: &WeightedLaplacian) -> Result<Self> {
        if !precond.is_connected() {
            return Err(Error::Disconnected { components: precond.components().to_vec() });
        }
        let chol = completed_cholesky(precond)
            .ok_or_else(|| Error::InvalidArgument("preconditioner is not a valid Laplacian".into()))?;
        Ok(Self { chol })
    }

    /// P†·v for v ⊥ 1.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.chol.solve(&DVector::from_column_slice(v)).iter().copied().collect();
        center(&mut out);
        out
    }

    /// Largest eigenvalue of P†·A for a Laplacian A on the same items.
    fn max_relative_eigenvalue(&self, a: &WeightedLaplacian) -> f64 {
        let l = self.chol.l();
        let half = l.solve_lower_triangular(a.matrix()).expect("triangular factor is nonsingular");
        let sym: DMatrix<f64> = l.solve_lower_triangular(&half.transpose()).expect("triangular factor is nonsingular");
        let sym = (&sym + sym.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(0.0, f64::max)
    }
}

/// One preconditioned gradient step θ − η·P†∇ℒ(θ).
pub fn pgd_step(obj: &BtlObjective, precond: &WeightedLaplacian, theta: &[f64], eta: f64) -> Result<Vec<f64>> {
    obj.check_len(theta)?;
    let pc = Preconditioner::new(precond)?;
    Ok(step_with(obj, &pc, theta, eta))
}

fn step_with(obj: &BtlObjective, pc: &Preconditioner, theta: &[f64], eta: f64) -> Vec<f64> {
    let dir = pc.apply(&obj.gradient_unchecked(theta));
    let mut next: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t - eta * d).collect();
    center(&mut next);
    next
}

/// The default PGD step size for `precond`.
pub fn default_pgd_step(obj: &BtlObjective, precond: &WeightedLaplacian) -> Result<f64> {
    let pc = Preconditioner::new(precond)?;
    Ok(1.0 / pc.max_relative_eigenvalue(&obj.hessian_bound()))
}

/// Preconditioned gradient descent θ^{τ+1} = θ^τ − η·P†∇ℒ(θ^τ).
pub fn solve_pgd(obj: &BtlObjective, precond: &WeightedLaplacian, opts: &PgdOptions) -> Result<SolveResult> {
    obj.require_connected()?;
    if precond.n_items() != obj.m {
        return Err(Error::LengthMismatch { expected: obj.m, actual: precond.n_items() });
    }
    let pc = Preconditioner::new(precond)?;
    let eta = match opts.eta {
        Some(eta) => eta,
        None => 1.0 / pc.max_relative_eigenvalue(&obj.hessian_bound()),
    };
    let mut theta = match &opts.start {
        Some(s) => {
            obj.check_len(s)?;
            s.clone()
        }
        None => vec![0.0; obj.m],
    };
    center(&mut theta);
    let mut iterations = 0;
    loop {
        let grad_inf_norm = inf_norm(&obj.gradient_unchecked(&theta));
        if grad_inf_norm <= opts.tol || iterations >= opts.max_iter || eta == 0.0 {
            return Ok(SolveResult {
                converged: grad_inf_norm <= opts.tol,
                theta_hat: theta,
                grad_inf_norm,
                iterations,
            });
        }
        theta = step_with(obj, &pc, &theta, eta);
        iterations += 1;
        if inf_norm(&theta) > opts.divergence_bound {
            return Err(Error::Diverged { bound: opts.divergence_bound, iterations });
        }
    }
}
