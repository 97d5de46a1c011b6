//! Dense complex linear algebra helpers for small matrices (dim <= 256).
//!
//! Everything here works on `ndarray::Array2<Complex64>`. The Hermitian
//! eigensolver is a classical complex Jacobi rotation method, which is exact
//! enough (residuals ~1e-13) at these sizes and avoids a LAPACK dependency.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

pub type C64 = Complex64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// e^{i phi}
pub fn cis(phi: f64) -> C64 {
    C64::new(phi.cos(), phi.sin())
}

pub fn eye(n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { cr(1.0) } else { cr(0.0) })
}

pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Kronecker product with the first factor most significant.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[[i, j]];
            if aij == cr(0.0) {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[[i * rb + k, j * cb + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch in max_abs_diff");
    let mut m = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        m = m.max((x - y).norm());
    }
    m
}

pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().sum()
}

pub fn is_unitary(a: &Array2<C64>, tol: f64) -> bool {
    let n = a.nrows();
    if n != a.ncols() {
        return false;
    }
    max_abs_diff(&dagger(a).dot(a), &eye(n)) <= tol
}

/// Hermitian eigendecomposition by complex Jacobi rotations.
/// Returns (eigenvalues ascending, eigenvector columns).
pub fn eigh(a: &Array2<C64>) -> (Vec<f64>, Array2<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = eye(n);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]].norm_sqr();
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.norm() < 1e-300 {
                    continue;
                }
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                // Unitary 2x2 rotation diagonalizing the (p,q) block:
                // G = [[c, -s e^{-i a}], [s e^{i a}, c]] with a = arg(apq).
                let alpha = apq.arg();
                let abs_apq = apq.norm();
                let theta = if (app - aqq).abs() < 1e-300 {
                    std::f64::consts::FRAC_PI_4
                } else {
                    0.5 * (2.0 * abs_apq / (app - aqq)).atan()
                };
                let (cs, sn) = (theta.cos(), theta.sin());
                let e_pa = cis(alpha);
                // Apply G^dag M G where columns p,q rotate.
                for i in 0..n {
                    let mip = m[[i, p]];
                    let miq = m[[i, q]];
                    m[[i, p]] = mip * cr(cs) + miq * e_pa.conj() * cr(sn);
                    m[[i, q]] = -mip * e_pa * cr(sn) + miq * cr(cs);
                }
                for j in 0..n {
                    let mpj = m[[p, j]];
                    let mqj = m[[q, j]];
                    m[[p, j]] = mpj * cr(cs) + mqj * e_pa * cr(sn);
                    m[[q, j]] = -mpj * e_pa.conj() * cr(sn) + mqj * cr(cs);
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = vip * cr(cs) + viq * e_pa.conj() * cr(sn);
                    v[[i, q]] = -vip * e_pa * cr(sn) + viq * cr(cs);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| m[[i, i]].re).collect();
    order.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
    let mut sorted_vecs = Array2::zeros((n, n));
    for (newcol, &oldcol) in order.iter().enumerate() {
        for i in 0..n {
            sorted_vecs[[i, newcol]] = v[[i, oldcol]];
        }
    }
    (sorted_vals, sorted_vecs)
}

/// Solve A x = b for square complex A by Gaussian elimination with partial
/// pivoting. Panics on (numerically) singular systems.
pub fn solve(a: &Array2<C64>, b: &Array1<C64>) -> Array1<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[[col, col]].norm();
        for r in (col + 1)..n {
            if m[[r, col]].norm() > best {
                best = m[[r, col]].norm();
                piv = r;
            }
        }
        assert!(best > 1e-12, "singular linear system");
        if piv != col {
            for j in 0..n {
                let t = m[[col, j]];
                m[[col, j]] = m[[piv, j]];
                m[[piv, j]] = t;
            }
            let t = x[col];
            x[col] = x[piv];
            x[piv] = t;
        }
        let d = m[[col, col]];
        for r in (col + 1)..n {
            let f = m[[r, col]] / d;
            if f == cr(0.0) {
                continue;
            }
            for j in col..n {
                let v = m[[col, j]];
                m[[r, j]] = m[[r, j]] - f * v;
            }
            let v = x[col];
            x[r] = x[r] - f * v;
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for j in (col + 1)..n {
            s -= m[[col, j]] * x[j];
        }
        x[col] = s / m[[col, col]];
    }
    x
}

/// Invert a square complex matrix column-by-column via `solve`.
pub fn inverse(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let mut out = Array2::zeros((n, n));
    for j in 0..n {
        let mut e = Array1::zeros(n);
        e[j] = cr(1.0);
        let col = solve(a, &e);
        for i in 0..n {
            out[[i, j]] = col[i];
        }
    }
    out
}

/// Column-major vectorization vec(A): stacks columns.
pub fn vec_mat(a: &Array2<C64>) -> Array1<C64> {
    let (r, cdim) = a.dim();
    let mut v = Array1::zeros(r * cdim);
    for j in 0..cdim {
        for i in 0..r {
            v[j * r + i] = a[[i, j]];
        }
    }
    v
}

/// Inverse of `vec_mat` for square matrices.
pub fn unvec(v: &Array1<C64>, n: usize) -> Array2<C64> {
    assert_eq!(v.len(), n * n);
    let mut a = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            a[[i, j]] = v[j * n + i];
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> Array2<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let mut a: Array2<C64> =
            Array2::from_shape_fn((n, n), |_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        a = &a + &dagger(&a);
        a
    }

    #[test]
    fn eigh_reconstructs_matrix() {
        for n in [2, 3, 6, 9] {
            let a = random_hermitian(n, n as u64);
            let (vals, vecs) = eigh(&a);
            let d = Array2::from_shape_fn((n, n), |(i, j)| {
                if i == j {
                    cr(vals[i])
                } else {
                    cr(0.0)
                }
            });
            let rec = vecs.dot(&d).dot(&dagger(&vecs));
            assert!(max_abs_diff(&rec, &a) < 1e-10, "n={n}");
            assert!(is_unitary(&vecs, 1e-10));
        }
    }

    #[test]
    fn solve_and_inverse_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        let n = 8;
        let a: Array2<C64> =
            Array2::from_shape_fn((n, n), |_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let b: Array1<C64> =
            Array1::from_shape_fn(n, |_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let x = solve(&a, &b);
        let r = a.dot(&x);
        let err: f64 = r
            .iter()
            .zip(b.iter())
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10);
        let inv = inverse(&a);
        assert!(max_abs_diff(&a.dot(&inv), &eye(n)) < 1e-10);
    }

    #[test]
    fn kron_index_convention() {
        // |1><1| (x) |2><2| on qutrits lands at index 1*3+2 = 5.
        let mut p1 = Array2::zeros((3, 3));
        p1[[1, 1]] = cr(1.0);
        let mut p2 = Array2::zeros((3, 3));
        p2[[2, 2]] = cr(1.0);
        let k = kron(&p1, &p2);
        assert_eq!(k[[5, 5]], cr(1.0));
        assert_eq!(k.iter().map(|z| z.norm()).sum::<f64>(), 1.0);
    }

    #[test]
    fn vec_unvec_roundtrip() {
        let a = random_hermitian(4, 3);
        assert!(max_abs_diff(&unvec(&vec_mat(&a), 4), &a) < 1e-15);
    }
}
