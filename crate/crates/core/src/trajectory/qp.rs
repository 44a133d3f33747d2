// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Equality-constrained quadratic programs solved through their KKT system.

use nalgebra::{DMatrix, DVector, LU};

use crate::{Error, Result};

/// `min 1/2 x^T H x + f^T x  subject to  A x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

/// Maximum accepted `|Ax - b|_inf`, relative to `max(1, |b|_inf)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

const RANK_TOLERANCE: f64 = 1e-10;
const PIVOT_TOLERANCE: f64 = 1e-14;

/// A factorized KKT matrix
///
/// ```text
/// [ H  A^T ] [x] = [-f]
/// [ A   0  ] [l]   [ b]
/// ```
///
/// reusable across right-hand sides that share `H` and `A` (the three axes of
/// a trajectory, for instance).
pub struct KktSystem {
    unknowns: usize,
    eq_matrix: DMatrix<f64>,
    row_scale: DVector<f64>,
    hessian_scale: f64,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl KktSystem {
    pub fn new(hessian: &DMatrix<f64>, eq_matrix: &DMatrix<f64>) -> Result<Self> {
        let n = hessian.nrows();
        let m = eq_matrix.nrows();
        if hessian.ncols() != n || eq_matrix.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: H is {}x{}, A is {}x{}",
                hessian.nrows(),
                hessian.ncols(),
                m,
                eq_matrix.ncols()
            )));
        }

        // Equilibrate: unit max-norm constraint rows, Hessian scaled to unit
        // max entry. Neither changes the minimizer.
        let row_scale = DVector::from_iterator(
            m,
            eq_matrix.row_iter().map(|r| {
                let peak = r.amax();
                if peak > 0.0 {
                    1.0 / peak
                } else {
                    1.0
                }
            }),
        );
        let mut scaled_a = eq_matrix.clone();
        for (i, mut row) in scaled_a.row_iter_mut().enumerate() {
            row *= row_scale[i];
        }
        let h_peak = hessian.amax();
        let hessian_scale = if h_peak > 0.0 { 1.0 / h_peak } else { 1.0 };

        let rank = numerical_rank(&scaled_a);
        if rank < m {
            return Err(Error::SingularConstraints { rank, rows: m });
        }

        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(&(hessian * hessian_scale));
        kkt.view_mut((n, 0), (m, n)).copy_from(&scaled_a);
        kkt.view_mut((0, n), (n, m)).copy_from(&scaled_a.transpose());

        let lu = kkt.lu();
        let pivots = lu.u().diagonal().map(f64::abs);
        let (lo, hi) = (pivots.min(), pivots.max());
        if !(lo > PIVOT_TOLERANCE * hi) {
            return Err(Error::NumericalFailure {
                reason: "KKT matrix is singular; H is not positive definite on the constraint null space".into(),
                condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
            });
        }

        Ok(Self {
            unknowns: n,
            eq_matrix: eq_matrix.clone(),
            row_scale,
            hessian_scale,
            lu,
        })
    }

    pub fn solve(&self, linear: &DVector<f64>, eq_rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.unknowns;
        let m = self.row_scale.len();
        if linear.len() != n || eq_rhs.len() != m {
            return Err(Error::InvalidInput("right-hand side has the wrong dimension".into()));
        }
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-linear * self.hessian_scale));
        rhs.rows_mut(n, m).copy_from(&eq_rhs.component_mul(&self.row_scale));
        let sol = self.lu.solve(&rhs).ok_or_else(|| Error::NumericalFailure {
            reason: "LU solve failed".into(),
            condition: f64::INFINITY,
        })?;
        let x = sol.rows(0, n).into_owned();

        let residual = (&self.eq_matrix * &x - eq_rhs).amax();
        let allowed = RESIDUAL_TOLERANCE * eq_rhs.amax().max(1.0);
        if !(residual <= allowed) {
            return Err(Error::NumericalFailure {
                reason: format!("constraint residual {residual:.3e} exceeds {allowed:.3e}"),
                condition: self.condition_estimate(),
            });
        }
        Ok(x)
    }

    /// Ratio of extreme pivot magnitudes of the factorization.
    pub fn condition_estimate(&self) -> f64 {
        let pivots = self.lu.u().diagonal().map(f64::abs);
        pivots.max() / pivots.min()
    }
}

fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let top = sv.max();
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * top).count()
}

/// Solves an equality-constrained QP. Requires `A` to have full row rank and
/// `H` to be positive semidefinite and positive definite on the null space of
/// `A`.
pub fn solve_qp_equality(problem: &QpProblem) -> Result<DVector<f64>> {
    KktSystem::new(&problem.hessian, &problem.eq_matrix)?.solve(&problem.linear, &problem.eq_rhs)
}
