//! Lowest eigenpairs of the symmetric definite pencil `K u = λ M u`.
//!
//! [`solve_lowest`] is a blocked preconditioned iteration in the LOBPCG
//! family: each step runs Rayleigh–Ritz on `[X, W, P]` (current block,
//! preconditioned residuals, previous search directions), with the basis
//! made `M`-orthonormal by SVQB so near-dependent directions are dropped
//! instead of blowing up. [`dense_solve`] is the brute-force reference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::CsrMatrix;

/// Seed of the initial block.
pub const DEFAULT_SEED: u64 = 0x5EED;

pub const DEFAULT_TOL: f64 = 1e-8;

/// Largest pencil `dense_solve` accepts.
pub const DENSE_LIMIT: usize = 2500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub lambda: f64,
    #[serde(skip)]
    pub vector: Vec<f64>,
    /// `‖K u − λ M u‖₂ / (|λ| ‖M u‖₂)`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenBasis {
    /// Ascending, `M`-orthonormal.
    pub pairs: Vec<EigenPair>,
    pub iterations: usize,
    /// Smallest Ritz value after every iteration.
    #[serde(skip)]
    pub history: Vec<f64>,
}

impl EigenBasis {
    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.pairs.iter().map(|p| p.residual).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// Block width; defaults to `2k`.
    pub block: Option<usize>,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            block: None,
            max_iter: 20_000,
            seed: DEFAULT_SEED,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn relative_residual(k: &CsrMatrix, m: &CsrMatrix, lambda: f64, u: &[f64]) -> f64 {
    let ku = k.mul_vec(u);
    let mu = m.mul_vec(u);
    residual_from_products(&ku, &mu, lambda)
}

fn residual_from_products(ku: &[f64], mu: &[f64], lambda: f64) -> f64 {
    let r: f64 = ku
        .iter()
        .zip(mu)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt();
    r / (lambda.abs() * norm(mu)).max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------------
// dense symmetric eigensolver (Householder tridiagonalisation + implicit QL)
// ---------------------------------------------------------------------------

/// Eigen-decomposition of a dense symmetric matrix stored row-major.
/// Returns ascending eigenvalues and, if requested, eigenvectors as columns
/// of a row-major `n × n` matrix.
pub fn symmetric_eigen(a: &[f64], n: usize, want_vectors: bool) -> (Vec<f64>, Option<Vec<f64>>) {
    let mut v = a.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 0 {
        return (d, want_vectors.then(Vec::new));
    }
    tridiagonalize(&mut v, n, &mut d, &mut e, want_vectors);
    tridiagonal_ql(&mut v, n, &mut d, &mut e, want_vectors);
    (d, want_vectors.then_some(v))
}

fn tridiagonalize(v: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], vectors: bool) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    if vectors {
        for i in 0..n - 1 {
            v[at(n - 1, i)] = v[at(i, i)];
            v[at(i, i)] = 1.0;
            let h = d[i + 1];
            if h != 0.0 {
                for k in 0..=i {
                    d[k] = v[at(k, i + 1)] / h;
                }
                for j in 0..=i {
                    let mut g = 0.0;
                    for k in 0..=i {
                        g += v[at(k, i + 1)] * v[at(k, j)];
                    }
                    for k in 0..=i {
                        v[at(k, j)] -= g * d[k];
                    }
                }
            }
            for k in 0..=i {
                v[at(k, i + 1)] = 0.0;
            }
        }
        for j in 0..n {
            d[j] = v[at(n - 1, j)];
            v[at(n - 1, j)] = 0.0;
        }
        v[at(n - 1, n - 1)] = 1.0;
    } else {
        // the diagonal sits on v's diagonal once the reflectors are applied
        for i in 0..n {
            d[i] = v[at(i, i)];
        }
    }
    e[0] = 0.0;
}

fn tridiagonal_ql(v: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], vectors: bool) {
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if vectors {
                        for k in 0..n {
                            h = v[at(k, i + 1)];
                            v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                            v[at(k, i)] = c * v[at(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    // selection sort keeps vectors aligned
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            if vectors {
                for row in 0..n {
                    v.swap(at(row, i), at(row, k));
                }
            }
        }
    }
}

/// In-place lower Cholesky factor of a dense SPD matrix.
fn cholesky(a: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let mut s = a[j * n + j];
        for k in 0..j {
            s -= a[j * n + k] * a[j * n + k];
        }
        if !(s > 0.0) {
            return Err(Error::IndefiniteMass { row: j, pivot: s });
        }
        let ljj = s.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
        for i in 0..j {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

/// Every eigenpair of the pencil via Cholesky reduction to a standard
/// symmetric problem.
pub fn dense_solve(k: &CsrMatrix, m: &CsrMatrix) -> Result<EigenBasis> {
    dense_impl(k, m, true)
}

/// Eigenvalues only; skips the `O(n³)` back-transformation.
pub fn dense_eigenvalues(k: &CsrMatrix, m: &CsrMatrix) -> Result<Vec<f64>> {
    Ok(dense_impl(k, m, false)?.values())
}

fn dense_impl(k: &CsrMatrix, m: &CsrMatrix, vectors: bool) -> Result<EigenBasis> {
    let n = k.dim();
    if m.dim() != n {
        return Err(Error::Dimension(format!("K is {n}, M is {}", m.dim())));
    }
    if n > DENSE_LIMIT {
        return Err(Error::Dimension(format!(
            "dense reference limited to {DENSE_LIMIT} dofs, got {n}"
        )));
    }
    let mut l = m.to_dense();
    cholesky(&mut l, n)?;
    // Y = L⁻¹ K, then C = L⁻¹ Yᵀ = L⁻¹ K L⁻ᵀ
    let mut y = k.to_dense();
    forward_substitute_columns(&l, n, &mut y);
    let mut c = transpose(&y, n);
    forward_substitute_columns(&l, n, &mut c);
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (c[i * n + j] + c[j * n + i]);
            c[i * n + j] = s;
            c[j * n + i] = s;
        }
    }
    let (values, vecs) = symmetric_eigen(&c, n, vectors);
    let pairs = match vecs {
        Some(z) => {
            // x = L⁻ᵀ z, column by column
            let mut x = z;
            back_substitute_transpose_columns(&l, n, &mut x);
            (0..n)
                .map(|j| {
                    let u: Vec<f64> = (0..n).map(|i| x[i * n + j]).collect();
                    let residual = relative_residual(k, m, values[j], &u);
                    EigenPair {
                        lambda: values[j],
                        vector: u,
                        residual,
                    }
                })
                .collect()
        }
        None => values
            .iter()
            .map(|&lambda| EigenPair {
                lambda,
                vector: Vec::new(),
                residual: f64::NAN,
            })
            .collect(),
    };
    Ok(EigenBasis {
        pairs,
        iterations: 0,
        history: Vec::new(),
    })
}

fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// Solves `L X = B` in place for all columns of `B` (row-major).
fn forward_substitute_columns(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        for k in 0..i {
            let lik = l[i * n + k];
            if lik != 0.0 {
                let (head, tail) = b.split_at_mut(i * n);
                let src = &head[k * n..k * n + n];
                for (dst, s) in tail[..n].iter_mut().zip(src) {
                    *dst -= lik * s;
                }
            }
        }
        let lii = l[i * n + i];
        for v in &mut b[i * n..i * n + n] {
            *v /= lii;
        }
    }
}

/// Solves `Lᵀ X = B` in place for all columns of `B` (row-major).
fn back_substitute_transpose_columns(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l[k * n + i];
            if lki != 0.0 {
                let (head, tail) = b.split_at_mut(k * n);
                let dst = &mut head[i * n..i * n + n];
                for (d, s) in dst.iter_mut().zip(&tail[..n]) {
                    *d -= lki * s;
                }
            }
        }
        let lii = l[i * n + i];
        for v in &mut b[i * n..i * n + n] {
            *v /= lii;
        }
    }
}

// ---------------------------------------------------------------------------
// blocked preconditioned iteration
// ---------------------------------------------------------------------------

type Block = Vec<Vec<f64>>;

fn apply(a: &CsrMatrix, block: &Block) -> Block {
    block.iter().map(|v| a.mul_vec(v)).collect()
}

fn combine(block: &Block, coeffs: &[f64], rows: usize, col: usize, stride: usize) -> Vec<f64> {
    let n = block[0].len();
    let mut out = vec![0.0; n];
    for r in 0..rows {
        let c = coeffs[r * stride + col];
        if c != 0.0 {
            for (o, v) in out.iter_mut().zip(&block[r]) {
                *o += c * v;
            }
        }
    }
    out
}

/// Removes the `M`-components of `w` along the `M`-orthonormal `x`.
fn project_out(w: &mut Block, x: &Block, mx: &Block) {
    for _ in 0..2 {
        for wv in w.iter_mut() {
            for (xv, mxv) in x.iter().zip(mx) {
                let c = dot(mxv, wv);
                for (a, b) in wv.iter_mut().zip(xv) {
                    *a -= c * b;
                }
            }
        }
    }
}

/// `M`-orthonormalises `v` by SVQB, dropping directions whose scaled Gram
/// eigenvalue falls below `drop_tol`.
fn svqb(m: &CsrMatrix, v: Block, drop_tol: f64) -> Result<Block> {
    if v.is_empty() {
        return Ok(v);
    }
    let mv = apply(m, &v);
    let c = v.len();
    let mut g = vec![0.0; c * c];
    for i in 0..c {
        for j in 0..=i {
            let s = dot(&v[i], &mv[j]);
            g[i * c + j] = s;
            g[j * c + i] = s;
        }
    }
    let mut scale = vec![0.0; c];
    for i in 0..c {
        let gii = g[i * c + i];
        if gii < 0.0 {
            return Err(Error::IndefiniteMass { row: i, pivot: gii });
        }
        scale[i] = if gii > 0.0 { 1.0 / gii.sqrt() } else { 0.0 };
    }
    for i in 0..c {
        for j in 0..c {
            g[i * c + j] *= scale[i] * scale[j];
        }
    }
    let (theta, u) = symmetric_eigen(&g, c, true);
    let u = u.expect("vectors requested");
    let top = theta.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut out = Vec::new();
    for (j, &th) in theta.iter().enumerate() {
        if th > drop_tol * top && th > 0.0 {
            let mut coeff = vec![0.0; c];
            for i in 0..c {
                coeff[i] = scale[i] * u[i * c + j] / th.sqrt();
            }
            out.push(combine(&v, &coeff, c, 0, 1));
        }
    }
    Ok(out)
}

/// The `k` smallest eigenpairs of `K u = λ M u`.
pub fn solve_lowest(k: &CsrMatrix, m: &CsrMatrix, count: usize, tol: f64) -> Result<EigenBasis> {
    solve_lowest_with(
        k,
        m,
        count,
        SolverOptions {
            tol,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_lowest_with(
    k: &CsrMatrix,
    m: &CsrMatrix,
    count: usize,
    opts: SolverOptions,
) -> Result<EigenBasis> {
    let n = k.dim();
    if m.dim() != n {
        return Err(Error::Dimension(format!("K is {n}, M is {}", m.dim())));
    }
    if count == 0 || count > n {
        return Err(Error::Dimension(format!(
            "cannot extract {count} pairs from {n} dofs"
        )));
    }
    let block = opts.block.unwrap_or(2 * count).max(count).min(n);
    if 3 * block >= n {
        // too small for a subspace iteration to make sense
        let mut all = dense_solve(k, m)?;
        all.pairs.truncate(count);
        return Ok(all);
    }

    let inv_diag: Vec<f64> = k
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init: Block = (0..block)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut x = svqb(m, init, 1e-14)?;
    if x.len() < block {
        return Err(Error::IndefiniteMass { row: 0, pivot: 0.0 });
    }
    let mut p: Block = Vec::new();
    let mut lambda = vec![0.0; block];
    let mut history = Vec::new();
    let mut best_residual = f64::INFINITY;
    let mut converged_once = false;

    for iter in 0..=opts.max_iter {
        // Rayleigh–Ritz on [X, W, P]; the first pass only on X
        let (kx, mx) = (apply(k, &x), apply(m, &x));
        let mut residuals = vec![0.0; block];
        let mut w: Block = Vec::new();
        if iter > 0 {
            for i in 0..block {
                residuals[i] = residual_from_products(&kx[i], &mx[i], lambda[i]);
            }
            let worst = residuals[..count].iter().fold(0.0_f64, |a, &b| a.max(b));
            best_residual = best_residual.min(worst);
            if worst <= opts.tol {
                converged_once = true;
            }
            if converged_once {
                let pairs = (0..count)
                    .map(|i| EigenPair {
                        lambda: lambda[i],
                        vector: x[i].clone(),
                        residual: residuals[i],
                    })
                    .collect();
                return Ok(EigenBasis {
                    pairs,
                    iterations: iter,
                    history,
                });
            }
            if iter == opts.max_iter {
                break;
            }
            for i in 0..block {
                // soft locking: converged wanted columns stop contributing
                if i < count && residuals[i] <= 0.1 * opts.tol {
                    continue;
                }
                let r: Vec<f64> = kx[i]
                    .iter()
                    .zip(&mx[i])
                    .zip(&inv_diag)
                    .map(|((a, b), d)| (a - lambda[i] * b) * d)
                    .collect();
                w.push(r);
            }
        }
        let mut extra: Block = w;
        extra.extend(p.iter().cloned());
        project_out(&mut extra, &x, &mx);
        let q = svqb(m, extra, 1e-13)?;
        // guard against rounding: second pass against X after SVQB mixing
        let mut q = q;
        project_out(&mut q, &x, &mx);
        let q = svqb(m, q, 1e-13)?;

        let mut basis: Block = x.clone();
        basis.extend(q.iter().cloned());
        let mut kbasis = kx;
        kbasis.extend(apply(k, &q));
        let dim = basis.len();
        let mut h = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let a = dot(&basis[i], &kbasis[j]);
                let b = dot(&basis[j], &kbasis[i]);
                let s = 0.5 * (a + b);
                h[i * dim + j] = s;
                h[j * dim + i] = s;
            }
        }
        let (theta, c) = symmetric_eigen(&h, dim, true);
        let c = c.expect("vectors requested");
        let mut new_x = Vec::with_capacity(block);
        let mut new_p = Vec::with_capacity(block);
        for j in 0..block {
            new_x.push(combine(&basis, &c, dim, j, dim));
            if !q.is_empty() {
                // component along the new directions only
                let mut coeff = vec![0.0; dim];
                for r in block..dim {
                    coeff[r] = c[r * dim + j];
                }
                new_p.push(combine(&basis, &coeff, dim, 0, 1));
            }
        }
        lambda.copy_from_slice(&theta[..block]);
        history.push(lambda[0]);
        x = new_x;
        p = new_p;
        // periodic re-orthonormalisation keeps X M-orthonormal to rounding
        if iter % 20 == 19 {
            let re = svqb(m, x.clone(), 1e-14)?;
            if re.len() == block {
                x = re;
            }
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        best_residual,
    })
}
