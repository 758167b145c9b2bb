//! Test-side oracles. Nothing here calls into the estimator or the
//! library's solvers; they are written from the defining formulas.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C = Complex64;
pub type M = DMatrix<C>;
pub type V = DVector<C>;

pub fn gauss<R: Rng>(rng: &mut R) -> C {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C::new(re, im)
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> M {
    M::from_fn(rows, cols, |_, _| gauss(rng))
}

pub fn random_vector<R: Rng>(n: usize, rng: &mut R) -> V {
    V::from_fn(n, |_, _| gauss(rng))
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> V {
    let v = random_vector(n, rng);
    let norm = v.norm();
    v.unscale(norm)
}

pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> M {
    let a = random_matrix(n, n, rng);
    (&a + a.adjoint()).unscale(2.0)
}

/// `Σ_{k<terms} (−i H t / ħ)^k / k!`.
pub fn taylor_expm(h: &M, t: f64, hbar: f64, terms: usize) -> M {
    let n = h.nrows();
    let x = h.scale(t / hbar) * C::new(0.0, -1.0);
    let mut term = M::identity(n, n);
    let mut sum = M::identity(n, n);
    for k in 1..terms {
        term = &term * &x / C::from(k as f64);
        sum += &term;
    }
    sum
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &M) -> M {
    let n = a.nrows();
    let mut aug = M::zeros(n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..n {
        aug[(i, n + i)] = C::from(1.0);
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| aug[(i, col)].norm().total_cmp(&aug[(j, col)].norm()))
            .unwrap();
        aug.swap_rows(col, pivot);
        let p = aug[(col, col)];
        assert!(p.norm() > 0.0, "singular matrix");
        for j in 0..2 * n {
            aug[(col, j)] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = aug[(i, col)];
                if f != C::from(0.0) {
                    for j in 0..2 * n {
                        let v = aug[(col, j)];
                        aug[(i, j)] -= f * v;
                    }
                }
            }
        }
    }
    aug.view((0, n), (n, n)).into_owned()
}

/// Minimizer of `Σ λ^{T−k}‖y_k − H_k x‖² + λ^T δ⁻¹‖x − x0‖²`, posed as one
/// stacked least-squares problem and solved by SVD.
pub fn weighted_ls(steps: &[(M, V)], lambda: f64, delta: f64, x0: &V) -> V {
    let d = x0.len();
    let t = steps.len() as i32;
    let rows: usize = d + steps.iter().map(|(h, _)| h.nrows()).sum::<usize>();
    let mut a = M::zeros(rows, d);
    let mut b = V::zeros(rows);
    let w0 = (lambda.powi(t) / delta).sqrt();
    a.view_mut((0, 0), (d, d))
        .copy_from(&M::identity(d, d).scale(w0));
    b.rows_mut(0, d).copy_from(&x0.scale(w0));
    let mut r = d;
    for (k, (h, y)) in steps.iter().enumerate() {
        let w = lambda.powi(t - 1 - k as i32).sqrt();
        let m = h.nrows();
        a.view_mut((r, 0), (m, d)).copy_from(&h.scale(w));
        b.rows_mut(r, m).copy_from(&y.scale(w));
        r += m;
    }
    a.svd(true, true).solve(&b, 1e-14).unwrap()
}

/// `|⟨ψ|φ⟩|² / (‖ψ‖²‖φ‖²)`.
pub fn fidelity(psi: &V, phi: &V) -> f64 {
    let overlap = psi.dotc(phi).norm_sqr();
    overlap / (psi.norm_squared() * phi.norm_squared())
}

/// Complete measurement set of `n` Kraus operators: the `d`-row blocks of
/// the first `d` columns of a random `n·d` unitary.
pub fn random_kraus<R: Rng>(d: usize, n: usize, rng: &mut R) -> Vec<M> {
    let z = random_matrix(n * d, d, rng);
    let q = z.qr().q();
    (0..n)
        .map(|m| q.view((m * d, 0), (d, d)).into_owned())
        .collect()
}

pub fn unitarity_defect(u: &M) -> f64 {
    let n = u.ncols();
    (u.adjoint() * u - M::identity(n, n)).norm()
}

/// Computational-basis projectors.
pub fn projectors(d: usize) -> Vec<M> {
    (0..d)
        .map(|k| {
            let mut p = M::zeros(d, d);
            p[(k, k)] = C::from(1.0);
            p
        })
        .collect()
}

/// Projectors stacked into one `d²×d` observation matrix.
pub fn stacked_projectors(d: usize) -> M {
    let mut h = M::zeros(d * d, d);
    for (k, p) in projectors(d).iter().enumerate() {
        h.rows_mut(k * d, d).copy_from(p);
    }
    h
}
