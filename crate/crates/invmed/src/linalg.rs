//! Dense complex linear algebra helpers and a matrix-free GMRES.
//!
//! The dense side is thin glue over `nalgebra`: Hermitian positive-definite
//! solves via Cholesky with iterative refinement and an explicit residual
//! check, plus small utilities (hermitization, power-iteration eigenvalue
//! bounds) used by the filter updates and their tests.
//!
//! The iterative side is a restarted GMRES for non-Hermitian complex
//! systems, written against a closure so the Lippmann-Schwinger operator
//! can stay matrix-free (its matvec is an FFT convolution).

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Relative residual accepted by [`hermitian_solve`].
const HERMITIAN_RESIDUAL_TOL: f64 = 1e-12;

/// Solve `A X = B` for Hermitian positive-definite `A`.
///
/// Uses a Cholesky factorization followed by up to three rounds of
/// iterative refinement, then verifies `||A X - B|| <= 1e-12 ||B||`
/// (Frobenius norms) and fails rather than returning an inaccurate
/// solution. Refinement keeps the check meaningful even for the badly
/// conditioned systems probed at the edges of regularization brackets.
pub fn hermitian_solve(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "hermitian_solve: A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Linalg("Cholesky failed: matrix not positive definite".into()))?;
    let mut x = chol.solve(b);
    let b_norm = b.norm().max(f64::MIN_POSITIVE);
    let mut residual = b - a * &x;
    for _ in 0..3 {
        if residual.norm() <= HERMITIAN_RESIDUAL_TOL * b_norm {
            break;
        }
        x += chol.solve(&residual);
        residual = b - a * &x;
    }
    let rel = residual.norm() / b_norm;
    if rel > HERMITIAN_RESIDUAL_TOL {
        return Err(Error::Linalg(format!(
            "hermitian_solve: residual {rel:.3e} above {HERMITIAN_RESIDUAL_TOL:.0e}"
        )));
    }
    Ok(x)
}

/// Vector right-hand-side convenience wrapper around [`hermitian_solve`].
pub fn hermitian_solve_vec(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let cols = DMatrix::from_columns(std::slice::from_ref(b));
    Ok(DVector::from_column_slice(hermitian_solve(a, &cols)?.as_slice()))
}

/// `(A + A^H) / 2`: project onto the Hermitian part. Used after filter
/// weight updates to shed roundoff asymmetry.
pub fn hermitian_part(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Max relative asymmetry `||A - A^H|| / ||A||`.
pub fn hermitian_defect(a: &DMatrix<Complex64>) -> f64 {
    let n = a.norm();
    if n == 0.0 {
        0.0
    } else {
        (a - a.adjoint()).norm() / n
    }
}

/// Extreme eigenvalues `(min, max)` of a Hermitian matrix by power
/// iteration on `A` and on `c I - A`. Good to a few digits, which is all
/// the positive-semidefiniteness checks need.
pub fn hermitian_eig_bounds(a: &DMatrix<Complex64>, iters: usize) -> (f64, f64) {
    let n = a.nrows();
    if n == 0 {
        return (0.0, 0.0);
    }
    let power = |m: &DMatrix<Complex64>| -> f64 {
        let mut v = DVector::from_fn(n, |i, _| {
            Complex64::new(((i * 2654435761 + 1) % 97) as f64 / 97.0 - 0.5, ((i * 40503 + 7) % 89) as f64 / 89.0)
        });
        let mut norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v /= Complex64::new(norm, 0.0);
        for _ in 0..iters {
            v = m * v;
            norm = v.norm();
            if norm == 0.0 {
                return 0.0;
            }
            v /= Complex64::new(norm, 0.0);
        }
        // Rayleigh quotient: real for Hermitian m.
        (v.adjoint() * m * &v)[(0, 0)].re
    };
    let lambda_abs = power(a).abs().max(a.norm());
    let shift = Complex64::new(2.0 * lambda_abs.max(1e-300), 0.0);
    let eye = DMatrix::identity(n, n) * shift;
    let hi = shift.re - power(&(&eye - a));
    let lo = power(&(&eye - a.clone().scale(-1.0))) - shift.re;
    (lo.min(hi), hi.max(lo))
}

// ---- restarted GMRES -------------------------------------------------------

/// Options for [`gmres`]. `tol` is relative to the right-hand-side norm.
#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { tol: 1e-8, restart: 60, max_iter: 500 }
    }
}

/// Outcome of a converged GMRES run.
#[derive(Debug, Clone)]
pub struct GmresSolution {
    pub x: Vec<Complex64>,
    /// True relative residual `||b - A x|| / ||b||` recomputed from the
    /// returned iterate (not the recurrence estimate).
    pub residual: f64,
    pub iterations: usize,
    /// Relative residual after every restart cycle.
    pub history: Vec<f64>,
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
///
/// `apply` computes the matvec `A v`. Iteration stops once the true
/// residual of the unrolled iterate drops below `opts.tol * ||b||`; the
/// recurrence estimate alone is not trusted.
pub fn gmres<F>(apply: F, b: &[Complex64], opts: &GmresOptions) -> Result<GmresSolution>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let b_norm = vec_norm(b);
    if b_norm == 0.0 {
        return Ok(GmresSolution { x: vec![Complex64::ZERO; n], residual: 0.0, iterations: 0, history: vec![0.0] });
    }
    let restart = opts.restart.max(1).min(n);
    let mut x = vec![Complex64::ZERO; n];
    let mut total_iters = 0usize;
    let mut history = Vec::new();

    while total_iters < opts.max_iter {
        // residual of the current iterate
        let ax = apply(&x);
        let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let r_norm = vec_norm(&r);
        let rel = r_norm / b_norm;
        history.push(rel);
        if rel <= opts.tol {
            return Ok(GmresSolution { x, residual: rel, iterations: total_iters, history });
        }

        // Arnoldi process
        for ri in r.iter_mut() {
            *ri /= Complex64::new(r_norm, 0.0);
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r];
        let mut h = vec![vec![Complex64::ZERO; restart]; restart + 1]; // h[i][j]
        let mut cs = vec![Complex64::ZERO; restart];
        let mut sn = vec![Complex64::ZERO; restart];
        let mut g = vec![Complex64::ZERO; restart + 1];
        g[0] = Complex64::new(r_norm, 0.0);
        let mut k_used = 0;

        for j in 0..restart {
            if total_iters >= opts.max_iter {
                break;
            }
            let mut w = apply(&basis[j]);
            total_iters += 1;
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                h[i][j] = hij;
                axpy(-hij, v, &mut w);
            }
            let w_norm = vec_norm(&w);
            h[j + 1][j] = Complex64::new(w_norm, 0.0);

            // apply accumulated rotations to the new column
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i].conj() * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            // new rotation [c, s; -conj(s), c] (c real) zeroing h[j+1][j]
            let (f, gv) = (h[j][j], h[j + 1][j]);
            let denom = (f.norm_sqr() + gv.norm_sqr()).sqrt();
            if denom == 0.0 {
                cs[j] = Complex64::ONE;
                sn[j] = Complex64::ZERO;
            } else if f.norm() == 0.0 {
                cs[j] = Complex64::ZERO;
                sn[j] = gv.conj() / Complex64::new(denom, 0.0);
            } else {
                cs[j] = Complex64::new(f.norm() / denom, 0.0);
                sn[j] = (f / Complex64::new(f.norm(), 0.0)) * gv.conj() / Complex64::new(denom, 0.0);
            }
            let t = cs[j] * h[j][j] + sn[j] * h[j + 1][j];
            h[j + 1][j] = -sn[j].conj() * h[j][j] + cs[j] * h[j + 1][j];
            h[j][j] = t;
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] = cs[j] * g[j];
            k_used = j + 1;

            let est = g[j + 1].norm() / b_norm;
            if w_norm == 0.0 || est <= 0.5 * opts.tol {
                break;
            }
            for wi in w.iter_mut() {
                *wi /= Complex64::new(w_norm, 0.0);
            }
            basis.push(w);
        }

        // back-substitute the k_used x k_used triangular system
        let mut y = vec![Complex64::ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &basis[j], &mut x);
        }
    }

    let ax = apply(&x);
    let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let rel = vec_norm(&r) / b_norm;
    history.push(rel);
    if rel <= opts.tol {
        return Ok(GmresSolution { x, residual: rel, iterations: total_iters, history });
    }
    Err(Error::SolverStalled { residual: rel, iterations: total_iters, history, direction: None })
}
