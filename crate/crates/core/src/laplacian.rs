//! Weighted graph Laplacians over the item-item comparison graph.
//!
//! `L_w = Σ_{i>j} w_ij (e_i − e_j)(e_i − e_j)ᵀ`. With count weights this is
//! `L_L`; with weights `L_ij·σ'(θ_i − θ_j)` it is `L_{Lz}` at the true
//! parameters and `L_{Lẑ}` at an estimate, and equals the Hessian of the
//! paired negative log-likelihood there.
//!
//! Pseudo-inverses use the rank-completion identity
//! `L† = (L + 11ᵀ/m)⁻¹ − 11ᵀ/m`, valid whenever `L1 = 0` and the graph is
//! connected. A spectral route is kept alongside as a cross-check.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::logistic::sigmoid_prime;
use crate::model::ConditionNumbers;
use crate::pairing::PairedComparisons;

/// Above this size, vector solves use conjugate gradients instead of a dense factorization.
pub const DENSE_SOLVE_LIMIT: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLaplacian {
    m: usize,
    matrix: DMatrix<f64>,
    components: Vec<Vec<usize>>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Connected components of the graph on `0..m` with the given edges, each sorted,
/// ordered by smallest member.
pub fn components(m: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut uf = UnionFind((0..m).collect());
    for (i, j) in edges {
        uf.union(i, j);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; m];
    for v in 0..m {
        let r = uf.find(v);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(v);
    }
    groups
}

impl WeightedLaplacian {
    /// Assembles `Σ w (e_i − e_j)(e_i − e_j)ᵀ`; repeated edges accumulate.
    pub fn from_edges(m: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut matrix = DMatrix::zeros(m, m);
        let mut linked = Vec::new();
        for (i, j, w) in edges {
            if i == j {
                continue;
            }
            matrix[(i, i)] += w;
            matrix[(j, j)] += w;
            matrix[(i, j)] -= w;
            matrix[(j, i)] -= w;
            if w > 0.0 {
                linked.push((i, j));
            }
        }
        Self { m, components: components(m, linked), matrix }
    }

    pub fn n_items(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn is_connected(&self) -> bool {
        self.components.len() == 1
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Disconnected { components: self.components.clone() })
        }
    }

    /// Eigenvalues in descending order, λ₁ ≥ … ≥ λ_m.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// max_i Σ_j w_ij.
    pub fn max_weighted_degree(&self) -> f64 {
        (0..self.m).map(|i| self.matrix[(i, i)]).fold(0.0, f64::max)
    }

    fn completed(&self) -> DMatrix<f64> {
        let shift = 1.0 / self.m as f64;
        self.matrix.map(|v| v + shift)
    }

    fn completed_cholesky(&self) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        self.require_connected()?;
        Cholesky::new(self.completed()).ok_or_else(|| {
            Error::InvalidArgument("Laplacian is not positive semidefinite with a one-dimensional null space".into())
        })
    }

    /// L† via the rank-completion identity.
    pub fn pseudo_inverse(&self) -> Result<DMatrix<f64>> {
        let inv = self.completed_cholesky()?.inverse();
        let shift = 1.0 / self.m as f64;
        Ok(inv.map(|v| v - shift))
    }

    /// L† via the eigendecomposition, inverting eigenvalues above a relative cutoff.
    pub fn pseudo_inverse_spectral(&self) -> Result<DMatrix<f64>> {
        self.require_connected()?;
        let eig = SymmetricEigen::new(self.matrix.clone());
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let cutoff = top * 1e-12 * self.m as f64;
        let inv = eig.eigenvalues.map(|l| if l > cutoff { 1.0 / l } else { 0.0 });
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose())
    }

    /// L†·b. Dense factorization up to [`DENSE_SOLVE_LIMIT`] items, conjugate gradients above.
    pub fn apply_pinv(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.m {
            return Err(Error::LengthMismatch { expected: self.m, actual: b.len() });
        }
        let mean = b.mean();
        let centered = b.map(|v| v - mean);
        let mut x = if self.m <= DENSE_SOLVE_LIMIT {
            self.completed_cholesky()?.solve(&centered)
        } else {
            self.require_connected()?;
            conjugate_gradient(&self.completed(), &centered, 1e-13, 10 * self.m)
        };
        let xm = x.mean();
        x.iter_mut().for_each(|v| *v -= xm);
        Ok(x)
    }

    /// Trace(L†).
    pub fn pinv_trace(&self) -> Result<f64> {
        if self.m <= DENSE_SOLVE_LIMIT {
            return Ok(self.pseudo_inverse()?.trace());
        }
        let mut trace = 0.0;
        for i in 0..self.m {
            let e = DVector::from_fn(self.m, |k, _| if k == i { 1.0 } else { 0.0 });
            trace += self.apply_pinv(&e)?[i];
        }
        Ok(trace)
    }

    /// Trace(L†) = Σ 1/λ over the nonzero spectrum.
    pub fn pinv_trace_spectral(&self) -> Result<f64> {
        self.require_connected()?;
        let ev = self.eigenvalues();
        Ok(ev[..self.m - 1].iter().map(|l| 1.0 / l).sum())
    }
}

fn conjugate_gradient(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64, max_iter: usize) -> DVector<f64> {
    let mut x = DVector::zeros(b.len());
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let target = rel_tol * rel_tol * rs.max(f64::MIN_POSITIVE);
    for _ in 0..max_iter {
        if rs <= target {
            break;
        }
        let ap = a * &p;
        let alpha = rs / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rs_next = r.dot(&r);
        p = &r + (rs_next / rs) * &p;
        rs = rs_next;
    }
    x
}

/// z̃_ij = e^{θ_i}e^{θ_j}/(e^{θ_i}+e^{θ_j})² = σ'(θ_i − θ_j).
#[inline]
pub fn btl_weight(theta_i: f64, theta_j: f64) -> f64 {
    sigmoid_prime(theta_i - theta_j)
}

/// L_L = Σ L_ij (e_i − e_j)(e_i − e_j)ᵀ.
pub fn build_count_laplacian(pc: &PairedComparisons) -> WeightedLaplacian {
    WeightedLaplacian::from_edges(pc.n_items(), pc.edges().into_iter().map(|((i, j), t)| (i, j, t.count as f64)))
}

/// L_{Lz̃} = Σ L_ij z̃_ij (e_i − e_j)(e_i − e_j)ᵀ with z̃ evaluated at `theta`.
pub fn build_z_laplacian(pc: &PairedComparisons, theta: &[f64]) -> Result<WeightedLaplacian> {
    if theta.len() != pc.n_items() {
        return Err(Error::LengthMismatch { expected: pc.n_items(), actual: theta.len() });
    }
    Ok(WeightedLaplacian::from_edges(
        pc.n_items(),
        pc.edges().into_iter().map(|((i, j), t)| (i, j, t.count as f64 * btl_weight(theta[i], theta[j]))),
    ))
}

/// Trace(L†); errors on a disconnected graph.
pub fn pseudo_inverse_trace(l: &WeightedLaplacian) -> Result<f64> {
    l.pinv_trace()
}

/// Degree and eigenvalue bounds on a count Laplacian.
///
/// `max_eigen_bound` (λ₁ ≤ 2·max weighted degree) holds for every Laplacian.
/// The other two hold with high probability under the sampling model and are
/// only reported.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub lambda_max: f64,
    pub lambda_fiedler: f64,
    pub min_degree: f64,
    pub max_degree: f64,
    pub max_eigen_bound: bool,
    pub spectral_range: bool,
    pub degree_range: bool,
}

pub fn spectral_diagnostics(l_count: &WeightedLaplacian, n: usize, p: f64, kappa: &ConditionNumbers) -> SpectralReport {
    let ev = l_count.eigenvalues();
    let m = l_count.n_items();
    let lambda_max = ev.first().copied().unwrap_or(0.0);
    let lambda_fiedler = if m >= 2 { ev[m - 2] } else { 0.0 };
    let degrees: Vec<f64> = (0..m).map(|i| l_count.matrix()[(i, i)]).collect();
    let min_degree = degrees.iter().copied().fold(f64::INFINITY, f64::min);
    let max_degree = degrees.iter().copied().fold(0.0, f64::max);
    let np = n as f64 * p;
    let k2 = kappa.kappa2;
    let max_eigen_bound = lambda_max <= 2.0 * max_degree * (1.0 + 1e-12) + 1e-12;
    SpectralReport {
        lambda_max,
        lambda_fiedler,
        min_degree,
        max_degree,
        max_eigen_bound,
        spectral_range: np / (4.0 * k2) <= lambda_fiedler && lambda_max <= 3.0 * np,
        degree_range: np / (24.0 * k2) <= min_degree && max_degree <= 1.5 * np,
    }
}
