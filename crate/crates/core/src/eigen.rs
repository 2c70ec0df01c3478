//! Cyclic Jacobi eigensolver for dense real symmetric matrices.

/// Off-diagonal Frobenius norm below which the sweep loop stops.
pub const JACOBI_TOLERANCE: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of the symmetric matrix `a` (row-major, `n`×`n`), sorted ascending.
///
/// Runs cyclic Jacobi sweeps until the off-diagonal norm drops below
/// [`JACOBI_TOLERANCE`] scaled by the matrix norm (or by 1 for tiny matrices).
/// Only the lower triangle is read; the input is treated as symmetric.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = a[i * n + j];
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }

    let frob: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    // absolute 1e-10 on eigenvalues needs the off-diagonal mass well below it
    let tol = JACOBI_TOLERANCE * 1e-3 * frob.max(1.0);

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m, n) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, n, p, q);
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[i * n + j] * m[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// One Jacobi rotation annihilating m[p][q].
fn rotate(m: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = m[p * n + p];
    let aqq = m[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let mkp = m[k * n + p];
        let mkq = m[k * n + q];
        m[k * n + p] = c * mkp - s * mkq;
        m[k * n + q] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[p * n + k];
        let mqk = m[q * n + k];
        m[p * n + k] = c * mpk - s * mqk;
        m[q * n + k] = s * mpk + c * mqk;
    }
    m[p * n + q] = 0.0;
    m[q * n + p] = 0.0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_fixed_point() {
        let a = [3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(symmetric_eigenvalues(&a, 3), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_by_hand() {
        // [[2,1],[1,2]] has spectrum {1, 3}
        let e = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn trace_is_preserved() {
        let a = [
            4.0, 1.0, -2.0, 2.0, //
            1.0, 2.0, 0.0, 1.0, //
            -2.0, 0.0, 3.0, -2.0, //
            2.0, 1.0, -2.0, -1.0,
        ];
        let e = symmetric_eigenvalues(&a, 4);
        let tr: f64 = e.iter().sum();
        assert!((tr - 8.0).abs() < 1e-10);
        let sq: f64 = e.iter().map(|v| v * v).sum();
        let frob2: f64 = a.iter().map(|v| v * v).sum();
        assert!((sq - frob2).abs() < 1e-9);
    }

    #[test]
    fn empty_and_scalar() {
        assert!(symmetric_eigenvalues(&[], 0).is_empty());
        assert_eq!(symmetric_eigenvalues(&[5.0], 1), vec![5.0]);
    }
}
