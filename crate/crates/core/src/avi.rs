//! Semismooth Newton solver for affine variational inequalities.
//!
//! The KKT system of the condensed game pairs an affine stationarity
//! condition `H u + f + G' lambda = 0` (H possibly asymmetric) with
//! complementarity between the multipliers and the constraint slacks
//! `s = g - G u`. Complementarity is reformulated with the smoothed
//! Fischer-Burmeister function
//!
//! ```text
//! phi_eps(a, b) = a + b - sqrt(a^2 + b^2 + 2 eps^2)
//! ```
//!
//! which at `eps = 0` vanishes exactly when `a >= 0`, `b >= 0`, `a b = 0`.
//! An outer loop drives `eps` to zero while an inner damped Newton method
//! solves each smoothed system; the Newton matrix is assembled in full and
//! factored with LU, which handles the asymmetry of `H` directly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AviError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("solver settings: {0}")]
    InvalidSettings(String),
}

/// Affine variational inequality data `(H, f, G, g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AviProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub g_mat: DMatrix<f64>,
    pub g_vec: DVector<f64>,
}

impl AviProblem {
    pub fn new(
        h: DMatrix<f64>,
        f: DVector<f64>,
        g_mat: DMatrix<f64>,
        g_vec: DVector<f64>,
    ) -> Result<Self, AviError> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(AviError::Dimension { what: "H columns", expected: n, got: h.ncols() });
        }
        if f.len() != n {
            return Err(AviError::Dimension { what: "f", expected: n, got: f.len() });
        }
        if g_mat.ncols() != n {
            return Err(AviError::Dimension { what: "G columns", expected: n, got: g_mat.ncols() });
        }
        if g_vec.len() != g_mat.nrows() {
            return Err(AviError::Dimension {
                what: "g",
                expected: g_mat.nrows(),
                got: g_vec.len(),
            });
        }
        Ok(Self { h, f, g_mat, g_vec })
    }

    /// Problem without inequality constraints.
    pub fn unconstrained(h: DMatrix<f64>, f: DVector<f64>) -> Result<Self, AviError> {
        let n = h.nrows();
        Self::new(h, f, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn n_u(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_c(&self) -> usize {
        self.g_mat.nrows()
    }

    /// Constraint slacks `g - G u`.
    pub fn slacks(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.g_vec - &self.g_mat * u
    }
}

/// Tunable parameters of the smoothed Fischer-Burmeister Newton method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Stationarity / complementarity tolerance on the exact KKT residual.
    pub tol: f64,
    /// Cap on total Newton iterations.
    pub max_iter: usize,
    /// Initial Fischer-Burmeister smoothing.
    pub smoothing_init: f64,
    /// Multiplicative smoothing reduction per outer round.
    pub smoothing_decay: f64,
    /// Diagonal weight added to the Newton matrix when it is singular.
    pub regularization: f64,
    /// Backtracking factor of the merit line search.
    pub linesearch_factor: f64,
    /// Smallest accepted line-search step.
    pub linesearch_min_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            smoothing_init: 1e-1,
            smoothing_decay: 0.1,
            regularization: 1e-9,
            linesearch_factor: 0.5,
            linesearch_min_step: 1e-12,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), AviError> {
        if !(self.tol > 0.0) {
            return Err(AviError::InvalidSettings(format!("tol must be > 0 (got {})", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(AviError::InvalidSettings("max_iter must be >= 1".into()));
        }
        if !(self.smoothing_decay > 0.0 && self.smoothing_decay < 1.0) {
            return Err(AviError::InvalidSettings(format!(
                "smoothing_decay must lie in (0, 1) (got {})",
                self.smoothing_decay
            )));
        }
        if !(self.smoothing_init >= 0.0) {
            return Err(AviError::InvalidSettings("smoothing_init must be >= 0".into()));
        }
        if !(self.linesearch_factor > 0.0 && self.linesearch_factor < 1.0) {
            return Err(AviError::InvalidSettings("linesearch_factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Degenerate,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveStatus::Converged => write!(f, "converged"),
            SolveStatus::MaxIterations => write!(f, "max-iterations"),
            SolveStatus::Degenerate => write!(f, "degenerate"),
        }
    }
}

/// Componentwise KKT residual of a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    /// `|H u + f + G' lambda|_inf`
    pub stationarity: f64,
    /// `max(0, max_i (G u - g)_i)`
    pub primal_feasibility: f64,
    /// `max(0, max_i -lambda_i)`
    pub dual_feasibility: f64,
    /// `max_i |lambda_i s_i|`
    pub complementarity: f64,
    /// `|phi_0(lambda, s)|_inf`
    pub fischer_burmeister: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_feasibility)
            .max(self.dual_feasibility)
            .max(self.complementarity)
            .max(self.fischer_burmeister)
    }
}

/// Solver output: primal-dual pair, exact residual, and iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct AviSolution {
    pub u: DVector<f64>,
    pub lambda: DVector<f64>,
    /// Max-norm KKT residual of `(u, lambda)` at zero smoothing.
    pub residual: f64,
    pub kkt: KktResidual,
    pub status: SolveStatus,
    /// Total Newton iterations spent.
    pub iterations: usize,
    /// Exact residuals of the accepted outer iterates, non-increasing.
    pub outer_residuals: Vec<f64>,
}

/// Smoothed Fischer-Burmeister function.
fn phi(a: f64, b: f64, eps: f64) -> f64 {
    a + b - (a * a + b * b + 2.0 * eps * eps).sqrt()
}

/// Stacked residual of the smoothed KKT system:
/// `(H u + f + G' lambda, phi_eps(lambda_i, s_i))` with `s = g - G u`.
pub fn fb_residual(
    problem: &AviProblem,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
    epsilon: f64,
) -> DVector<f64> {
    let n_u = problem.n_u();
    let n_c = problem.n_c();
    let mut r = DVector::zeros(n_u + n_c);
    let stat = &problem.h * u + &problem.f + problem.g_mat.transpose() * lambda;
    r.rows_mut(0, n_u).copy_from(&stat);
    let s = problem.slacks(u);
    for i in 0..n_c {
        r[n_u + i] = phi(lambda[i], s[i], epsilon);
    }
    r
}

/// Exact KKT residual components of a primal-dual pair.
pub fn kkt_residual(problem: &AviProblem, u: &DVector<f64>, lambda: &DVector<f64>) -> KktResidual {
    let stat = &problem.h * u + &problem.f + problem.g_mat.transpose() * lambda;
    let s = problem.slacks(u);
    let mut primal = 0.0f64;
    let mut dual = 0.0f64;
    let mut comp = 0.0f64;
    let mut fb = 0.0f64;
    for i in 0..problem.n_c() {
        primal = primal.max(-s[i]);
        dual = dual.max(-lambda[i]);
        comp = comp.max((lambda[i] * s[i]).abs());
        fb = fb.max(phi(lambda[i], s[i], 0.0).abs());
    }
    KktResidual {
        stationarity: stat.amax(),
        primal_feasibility: primal.max(0.0),
        dual_feasibility: dual.max(0.0),
        complementarity: comp,
        fischer_burmeister: fb,
    }
}

/// Newton matrix of the smoothed system at `(u, lambda)`.
fn newton_matrix(
    problem: &AviProblem,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
    eps: f64,
) -> DMatrix<f64> {
    let n_u = problem.n_u();
    let n_c = problem.n_c();
    let n = n_u + n_c;
    let mut j = DMatrix::zeros(n, n);
    j.view_mut((0, 0), (n_u, n_u)).copy_from(&problem.h);
    if n_c > 0 {
        j.view_mut((0, n_u), (n_u, n_c)).copy_from(&problem.g_mat.transpose());
        let s = problem.slacks(u);
        for i in 0..n_c {
            let root = (lambda[i] * lambda[i] + s[i] * s[i] + 2.0 * eps * eps).sqrt();
            // subgradient choice at the exact corner
            let (da, db) = if root < 1e-300 {
                let t = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
                (t, t)
            } else {
                (1.0 - lambda[i] / root, 1.0 - s[i] / root)
            };
            for col in 0..n_u {
                j[(n_u + i, col)] = -db * problem.g_mat[(i, col)];
            }
            j[(n_u + i, n_u + i)] = da;
        }
    }
    j
}

fn solve_newton_step(
    jac: &DMatrix<f64>,
    rhs: &DVector<f64>,
    regularization: f64,
) -> Option<DVector<f64>> {
    let lu = jac.clone().lu();
    if let Some(step) = lu.solve(rhs) {
        if step.iter().all(|x| x.is_finite()) {
            return Some(step);
        }
    }
    if regularization <= 0.0 {
        return None;
    }
    // escalate a diagonal proximal weight until the factorization succeeds
    let mut delta = regularization;
    for _ in 0..4 {
        let mut reg = jac.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += delta;
        }
        if let Some(step) = reg.lu().solve(rhs) {
            if step.iter().all(|x| x.is_finite()) {
                return Some(step);
            }
        }
        delta *= 1e3;
    }
    None
}

/// Solves the AVI with the smoothed Fischer-Burmeister Newton method.
///
/// Deterministic for fixed inputs and settings. On non-convergence the best
/// iterate found (by exact KKT residual) is returned with a non-`Converged`
/// status.
pub fn solve(
    problem: &AviProblem,
    settings: &SolverSettings,
    warm_start: Option<(&DVector<f64>, &DVector<f64>)>,
) -> AviSolution {
    settings.validate().expect("invalid solver settings");
    let n_u = problem.n_u();
    let n_c = problem.n_c();
    let (mut u, mut lambda) = match warm_start {
        Some((u0, l0)) => {
            assert_eq!(u0.len(), n_u, "warm-start primal dimension");
            assert_eq!(l0.len(), n_c, "warm-start dual dimension");
            (u0.clone(), l0.clone())
        }
        None => (DVector::zeros(n_u), DVector::zeros(n_c)),
    };

    let mut best_u = u.clone();
    let mut best_lambda = lambda.clone();
    let mut best_kkt = kkt_residual(problem, &u, &lambda);
    let mut best_res = best_kkt.max();
    let mut outer_residuals = vec![best_res];
    let mut iterations = 0usize;

    if best_res <= settings.tol {
        return AviSolution {
            u: best_u,
            lambda: best_lambda,
            residual: best_res,
            kkt: best_kkt,
            status: SolveStatus::Converged,
            iterations,
            outer_residuals,
        };
    }

    // near a solution there is no point smoothing more than the residual
    let mut eps = settings.smoothing_init.min((0.1 * best_res).max(1e-10));
    let eps_floor = 1e-14;
    let mut status = SolveStatus::MaxIterations;

    'outer: while iterations < settings.max_iter {
        let inner_tol = (0.5 * settings.tol).max(0.1 * eps);
        let mut stalls = 0usize;
        while iterations < settings.max_iter {
            let residual = fb_residual(problem, &u, &lambda, eps);
            if residual.amax() <= inner_tol {
                break;
            }
            let jac = newton_matrix(problem, &u, &lambda, eps);
            let rhs = -&residual;
            let Some(step) = solve_newton_step(&jac, &rhs, settings.regularization) else {
                status = SolveStatus::Degenerate;
                break 'outer;
            };

            // backtracking on the squared merit of the smoothed residual
            let merit0 = 0.5 * residual.norm_squared();
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha >= settings.linesearch_min_step {
                let u_trial = &u + step.rows(0, n_u) * alpha;
                let l_trial = &lambda + step.rows(n_u, n_c) * alpha;
                let merit = 0.5 * fb_residual(problem, &u_trial, &l_trial, eps).norm_squared();
                if merit <= merit0 * (1.0 - 2e-4 * alpha) {
                    u = u_trial;
                    lambda = l_trial;
                    accepted = true;
                    break;
                }
                alpha *= settings.linesearch_factor;
            }
            if !accepted {
                // take the minimum step and let the smoothing update recover
                let alpha = settings.linesearch_min_step;
                u += step.rows(0, n_u) * alpha;
                lambda += step.rows(n_u, n_c) * alpha;
                stalls += 1;
            }
            iterations += 1;
            if stalls >= 2 {
                break;
            }
        }

        let kkt = kkt_residual(problem, &u, &lambda);
        let res = kkt.max();
        if res < best_res {
            best_res = res;
            best_kkt = kkt;
            best_u = u.clone();
            best_lambda = lambda.clone();
            outer_residuals.push(res);
        }
        if best_res <= settings.tol {
            status = SolveStatus::Converged;
            break;
        }
        eps = (eps * settings.smoothing_decay).max(eps_floor);
    }

    AviSolution {
        u: best_u,
        lambda: best_lambda,
        residual: best_res,
        kkt: best_kkt,
        status,
        iterations,
        outer_residuals,
    }
}

/// Local-uniqueness certificate at a solved point.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    /// Constraint indices active within `tol_active`.
    pub active_set: Vec<usize>,
    /// Active constraint gradients are linearly independent.
    pub licq_ok: bool,
    /// `y' H y > 0` on the null space of the active gradients.
    pub second_order_ok: bool,
    /// Smallest eigenvalue of the symmetric part of `H` restricted to that
    /// null space; `None` when the null space is trivial.
    pub min_eigenvalue: Option<f64>,
    /// Cardinality of the active set minus the rank of its gradients.
    pub rank_gap: usize,
}

/// Checks the local-uniqueness conditions at a solution: linear independence
/// of active constraint gradients and positive definiteness of `H` (through
/// its symmetric part) on their null space.
pub fn check_regularity(
    problem: &AviProblem,
    solution: &AviSolution,
    tol_active: f64,
) -> RegularityReport {
    let s = problem.slacks(&solution.u);
    let active_set: Vec<usize> = (0..problem.n_c()).filter(|&i| s[i] <= tol_active).collect();
    let n = problem.n_u();

    // rank from the singular values of the active rows; null-space basis
    // from the smallest eigenvectors of their Gram matrix
    let (licq_ok, rank_gap, null_basis) = if active_set.is_empty() {
        (true, 0, DMatrix::identity(n, n))
    } else {
        let m = active_set.len();
        let mut ga = DMatrix::zeros(m, n);
        for (r, &i) in active_set.iter().enumerate() {
            ga.row_mut(r).copy_from(&problem.g_mat.row(i));
        }
        let svd = nalgebra::SVD::new(ga.clone(), false, false);
        let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let sigma_tol = (m.max(n) as f64) * f64::EPSILON * sigma_max;
        let rank = svd.singular_values.iter().filter(|&&s| s > sigma_tol).count();

        let gram = ga.transpose() * &ga;
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let null_dim = n - rank;
        let mut basis = DMatrix::zeros(n, null_dim);
        for (col, &idx) in order[..null_dim].iter().enumerate() {
            basis.set_column(col, &eig.eigenvectors.column(idx));
        }
        (rank == m, m - rank.min(m), basis)
    };

    if null_basis.ncols() == 0 {
        // vacuous second-order condition
        return RegularityReport {
            active_set,
            licq_ok,
            second_order_ok: true,
            min_eigenvalue: None,
            rank_gap,
        };
    }

    let sym = (&problem.h + problem.h.transpose()) * 0.5;
    let reduced = null_basis.transpose() * sym * &null_basis;
    let reduced_sym = (&reduced + reduced.transpose()) * 0.5;
    let eig = reduced_sym.symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);

    RegularityReport {
        active_set,
        licq_ok,
        second_order_ok: min_eig > 0.0,
        min_eigenvalue: Some(min_eig),
        rank_gap,
    }
}
