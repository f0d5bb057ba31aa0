//! Cyclic Jacobi eigensolver for dense real symmetric matrices.

/// Upper bound on full sweeps; quadratic convergence needs far fewer.
const MAX_SWEEPS: usize = 100;

/// Relative off-diagonal Frobenius norm at which iteration stops.
pub(crate) const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Diagonalizes the row-major symmetric matrix `a` in place.
///
/// Returns the (unsorted) diagonal and the accumulated rotation matrix in
/// row-major order, whose column `k` is the eigenvector for `diag[k]`.
/// Sweeps visit pairs `(p, q)`, `p < q`, in lexicographic order.
pub(crate) fn diagonalize(n: usize, mut a: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if total > 0.0 {
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm(n, &a) < OFF_DIAGONAL_TOL * total {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    rotate(n, &mut a, &mut v, p, q);
                }
            }
        }
    }
    let diag = (0..n).map(|i| a[i * n + i]).collect();
    (diag, v)
}

fn off_diagonal_norm(n: usize, a: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// One Jacobi rotation annihilating `a[p][q]` (Rutishauser's stable form).
fn rotate(n: usize, a: &mut [f64], v: &mut [f64], p: usize, q: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    // theta == 0 has signum +1, giving t = 1 (a 45 degree rotation).
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = c * akp - s * akq;
        a[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = c * apk - s * aqk;
        a[q * n + k] = s * apk + c * aqk;
    }
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;

    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}
