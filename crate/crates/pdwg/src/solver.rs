//! Sparse symmetric indefinite solves for the saddle-point system.
//!
//! The direct path factorizes with sparse LU (partial pivoting); the matrix is
//! indefinite, so a Cholesky factorization would be invalid. The iterative
//! path is MINRES on a symmetrically equilibrated system, which tames the
//! large scale disparity introduced by the `h^-3` stabilizer weights.

use crate::assembly::SaddleSystem;
use crate::{Error, Result};
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use std::io::Write;

/// Compressed sparse row matrix, structurally symmetric.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_unstable_by_key(|&i| (triplets[i].0, triplets[i].1));

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c, v) = triplets[i];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { n, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Largest deviation `|A_ij - A_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Relative residual `||A x - b|| / ||b||` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        self.matvec(x, &mut ax);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.n {
            num += (ax[i] - b[i]) * (ax[i] - b[i]);
            den += b[i] * b[i];
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            num.sqrt()
        }
    }

    /// MatrixMarket coordinate output (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.n, self.n, self.nnz())?;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                writeln!(out, "{} {} {:.16e}", r + 1, self.col_idx[k] + 1, self.values[k])?;
            }
        }
        Ok(())
    }
}

/// MatrixMarket dense array output for a right-hand side.
pub fn write_matrix_market_vector<W: Write>(out: &mut W, v: &[f64]) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} 1", v.len())?;
    for x in v {
        writeln!(out, "{x:.16e}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    Minres,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub method: Method,
    pub tol: f64,
    pub max_iter: usize,
}

impl SolveOptions {
    pub fn direct() -> Self {
        SolveOptions { method: Method::Direct, tol: 1e-10, max_iter: 0 }
    }

    pub fn minres() -> Self {
        SolveOptions { method: Method::Minres, tol: 1e-9, max_iter: 200_000 }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions::direct()
    }
}

/// Statistics of one linear solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub method: &'static str,
    pub n: usize,
    pub nnz: usize,
    pub iterations: usize,
    /// Relative residual of the returned solution.
    pub residual: f64,
}

/// Solve the assembled saddle-point system for the free unknowns.
pub fn solve(system: &SaddleSystem, opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
    let a = &system.matrix;
    let b = &system.rhs;
    match opts.method {
        Method::Direct => {
            let x = lu_solve(a, b)?;
            let residual = a.relative_residual(&x, b);
            if !residual.is_finite() || residual > opts.tol {
                return Err(Error::Singular);
            }
            Ok((x, SolveReport { method: "direct", n: a.n, nnz: a.nnz(), iterations: 0, residual }))
        }
        Method::Minres => {
            let (x, iterations) = minres_equilibrated(a, b, opts.tol, opts.max_iter)?;
            let residual = a.relative_residual(&x, b);
            if !residual.is_finite() || residual > opts.tol {
                return Err(Error::NotConverged { iterations, residual });
            }
            Ok((x, SolveReport { method: "minres", n: a.n, nnz: a.nnz(), iterations, residual }))
        }
    }
}

fn lu_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let mut triplets = Vec::with_capacity(a.nnz());
    for r in 0..a.n {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            triplets.push(Triplet::new(r, a.col_idx[k], a.values[k]));
        }
    }
    let mat =
        SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &triplets).map_err(|_| Error::Singular)?;
    // the factorization panics on an exactly zero numeric pivot instead of
    // returning an error; treat that as a singular system
    let lu = quiet_catch(|| mat.sp_lu())
        .map_err(|_| Error::Singular)?
        .map_err(|_| Error::Singular)?;
    let rhs = Mat::from_fn(a.n, 1, |i, _| b[i]);
    let sol = lu.solve(&rhs);
    Ok((0..a.n).map(|i| sol[(i, 0)]).collect())
}

/// `catch_unwind` with the default panic message suppressed on this thread.
fn quiet_catch<T>(f: impl FnOnce() -> T) -> std::thread::Result<T> {
    use std::cell::Cell;
    use std::sync::Once;
    thread_local! {
        static SUPPRESS: Cell<bool> = const { Cell::new(false) };
    }
    static HOOK: Once = Once::new();
    HOOK.call_once(|| {
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(move |info| {
            if !SUPPRESS.with(|s| s.get()) {
                prev(info);
            }
        }));
    });
    SUPPRESS.with(|s| s.set(true));
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f));
    SUPPRESS.with(|s| s.set(false));
    result
}

/// MINRES with symmetric diagonal equilibration: solve `(D A D) y = D b`,
/// `x = D y`, where `D_i = 1 / sqrt(max_j |A_ij|)`.
fn minres_equilibrated(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let mut d = vec![1.0; n];
    for r in 0..n {
        let row_max = (a.row_ptr[r]..a.row_ptr[r + 1]).map(|k| a.values[k].abs()).fold(0.0f64, f64::max);
        if row_max > 0.0 {
            d[r] = 1.0 / row_max.sqrt();
        }
    }
    let bs: Vec<f64> = (0..n).map(|i| d[i] * b[i]).collect();
    let apply = |x: &[f64], y: &mut [f64], tmp: &mut [f64]| {
        for i in 0..n {
            tmp[i] = d[i] * x[i];
        }
        a.matvec(tmp, y);
        for i in 0..n {
            y[i] *= d[i];
        }
    };

    let norm_b = bs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    // converge the scaled system a bit past the requested tolerance; the true
    // residual is checked by the caller
    let target = 0.01 * tol * norm_b;

    let mut x = vec![0.0; n];
    let mut v_prev = vec![0.0; n];
    let mut v = bs.clone();
    let mut beta = norm_b;
    for vi in v.iter_mut() {
        *vi /= beta;
    }
    let mut w0 = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let (mut gamma0, mut gamma1) = (1.0f64, 1.0f64);
    let (mut sigma0, mut sigma1) = (0.0f64, 0.0f64);
    let mut eta = beta;
    let mut z = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    let mut iterations = 0;
    for iter in 1..=max_iter {
        iterations = iter;
        apply(&v, &mut z, &mut tmp);
        let alpha = v.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            z[i] -= alpha * v[i] + beta * v_prev[i];
        }
        let beta_new = z.iter().map(|v| v * v).sum::<f64>().sqrt();

        let delta = gamma1 * alpha - gamma0 * sigma1 * beta;
        let rho1 = (delta * delta + beta_new * beta_new).sqrt();
        let rho2 = sigma1 * alpha + gamma0 * gamma1 * beta;
        let rho3 = sigma0 * beta;
        let gamma_new = delta / rho1;
        let sigma_new = beta_new / rho1;

        for i in 0..n {
            let wn = (v[i] - rho3 * w0[i] - rho2 * w1[i]) / rho1;
            x[i] += gamma_new * eta * wn;
            w0[i] = w1[i];
            w1[i] = wn;
        }
        eta = -sigma_new * eta;

        if beta_new <= f64::EPSILON * norm_b {
            break; // Krylov space exhausted: exact solve reached
        }
        std::mem::swap(&mut v_prev, &mut v);
        for i in 0..n {
            v[i] = z[i] / beta_new;
        }
        gamma0 = gamma1;
        gamma1 = gamma_new;
        sigma0 = sigma1;
        sigma1 = sigma_new;
        beta = beta_new;

        if eta.abs() <= target {
            break;
        }
    }
    for i in 0..n {
        x[i] *= d[i];
    }
    Ok((x, iterations))
}
