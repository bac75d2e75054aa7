//! Fixed-capacity dense vectors and matrices.
//!
//! State points live in `R^{1+n}` with index 0 the normal coordinate `x`
//! and indices `1..=n` the tangential coordinates `y`. Capacities are fixed
//! so that the inner simulation loop never allocates.


/// Maximum state dimension `1 + n`.
pub const MAX_DIM: usize = 4;
/// Maximum number of Brownian drivers `m`.
pub const MAX_NOISE: usize = 4;

pub type Vector = [f64; MAX_DIM];
pub type Matrix = [[f64; MAX_DIM]; MAX_DIM];
/// Diffusion matrix `sigma[i][l]`, row `i` is the state component, column `l` the driver.
pub type NoiseMatrix = [[f64; MAX_NOISE]; MAX_DIM];

pub const ZERO: Vector = [0.0; MAX_DIM];
pub const ZERO_MATRIX: Matrix = [[0.0; MAX_DIM]; MAX_DIM];
pub const ZERO_NOISE: NoiseMatrix = [[0.0; MAX_NOISE]; MAX_DIM];

/// `Σ = σ σᵀ` restricted to the leading `dim × m` block.
pub fn gram(sigma: &NoiseMatrix, dim: usize, m: usize) -> Matrix {
    let mut out = ZERO_MATRIX;
    for i in 0..dim {
        for j in i..dim {
            let mut acc = 0.0;
            for l in 0..m {
                acc += sigma[i][l] * sigma[j][l];
            }
            out[i][j] = acc;
            out[j][i] = acc;
        }
    }
    out
}

pub fn norm(v: &Vector, dim: usize) -> f64 {
    libm::sqrt(v[..dim].iter().map(|c| c * c).sum::<f64>())
}

pub fn max_abs(v: &Vector, dim: usize) -> f64 {
    v[..dim].iter().fold(0.0, |acc: f64, c| acc.max(c.abs()))
}

pub fn all_finite(v: &Vector, dim: usize) -> bool {
    v[..dim].iter().all(|c| c.is_finite())
}

/// Solves `a · x = b` for the leading `n × n` block by Gaussian elimination
/// with partial pivoting. Returns `None` for a numerically singular system.
pub fn solve(a: &Matrix, b: &Vector, n: usize) -> Option<Vector> {
    let mut a = *a;
    let mut b = *b;
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = ZERO;
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x.iter().all(|c| c.is_finite()).then_some(x)
}

/// Eigenvalues of the leading `n × n` block of a symmetric matrix (cyclic Jacobi).
pub fn symmetric_eigenvalues(a: &Matrix, n: usize) -> Vector {
    let mut a = *a;
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut out = ZERO;
    for i in 0..n {
        out[i] = a[i][i];
    }
    out
}

pub fn min_eigenvalue(a: &Matrix, n: usize) -> f64 {
    let ev = symmetric_eigenvalues(a, n);
    ev[..n].iter().fold(f64::INFINITY, |acc, &e| acc.min(e))
}

pub fn max_eigenvalue(a: &Matrix, n: usize) -> f64 {
    let ev = symmetric_eigenvalues(a, n);
    ev[..n].iter().fold(f64::NEG_INFINITY, |acc, &e| acc.max(e))
}
