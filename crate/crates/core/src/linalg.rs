//! Dense complex linear-algebra helpers on top of nalgebra.
//!
//! Decompositions returned here are deterministic: spectra are sorted in
//! non-increasing order and every eigen/singular vector is rotated so its
//! first non-negligible entry is real and positive.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{c_real, CMat, CVec, Real};

/// Condition number above which Hermitian matrices are diagonally loaded
/// before inversion.
pub const COND_LIMIT: f64 = 1e12;
/// Relative diagonal load, as a fraction of `Tr(M)/dim`.
pub const DIAG_LOAD: f64 = 1e-12;

/// Unit-modulus phase of `z`, with the phase of zero defined as 0.
#[inline]
pub fn unit_phase<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.re == T::zero() && z.im == T::zero() {
        return c_real(T::one());
    }
    let theta = z.im.atan2(z.re);
    Complex::new(theta.cos(), theta.sin())
}

/// Entrywise phase projection `exp(j·arg(M))`, the nearest unit-modulus matrix.
pub fn phase_project<T: Real>(m: &CMat<T>) -> CMat<T> {
    m.map(unit_phase)
}

/// Column-major vectorisation.
pub fn vec_of<T: Real>(m: &CMat<T>) -> CVec<T> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec<T: Real>(v: &CVec<T>, rows: usize, cols: usize) -> CMat<T> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

#[inline]
pub fn trace_re<T: Real>(m: &CMat<T>) -> T {
    m.diagonal().iter().fold(T::zero(), |acc, z| acc + z.re)
}

#[inline]
pub fn frob2<T: Real>(m: &CMat<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

/// `(M + Mᴴ)/2`.
pub fn hermitian_part<T: Real>(m: &CMat<T>) -> CMat<T> {
    (m + m.adjoint()) * c_real(T::lit(0.5))
}

/// Relative Hermitian defect `‖M − Mᴴ‖_F / max(‖M‖_F, tiny)`.
pub fn hermitian_defect<T: Real>(m: &CMat<T>) -> T {
    let scale = frob2(m).sqrt();
    if scale == T::zero() {
        return T::zero();
    }
    frob2(&(m - m.adjoint())).sqrt() / scale
}

pub fn identity<T: Real>(n: usize) -> CMat<T> {
    DMatrix::identity(n, n)
}

fn normalize_column_phase<T: Real>(m: &mut CMat<T>, j: usize) -> Complex<T> {
    let col_max = m.column(j).iter().fold(T::zero(), |a, z| a.max(z.modulus()));
    if col_max == T::zero() {
        return c_real(T::one());
    }
    let tol = col_max * T::eps().sqrt();
    let pivot = m.column(j).iter().copied().find(|z| z.modulus() > tol);
    match pivot {
        Some(p) => {
            let rot = unit_phase(p).conj();
            m.column_mut(j).iter_mut().for_each(|z| *z *= rot);
            rot
        }
        None => c_real(T::one()),
    }
}

/// Rotates every column so its first non-negligible entry is real-positive.
pub fn normalize_phases<T: Real>(m: &mut CMat<T>) {
    for j in 0..m.ncols() {
        normalize_column_phase(m, j);
    }
}

/// Hermitian eigendecomposition, eigenvalues in non-increasing order.
#[derive(Debug, Clone)]
pub struct HermEig<T: Real> {
    pub values: Vec<T>,
    pub vectors: CMat<T>,
}

pub fn herm_eig<T: Real>(m: &CMat<T>) -> HermEig<T> {
    let n = m.nrows();
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    normalize_phases(&mut vectors);
    HermEig { values, vectors }
}

/// Eigenvalues of a Hermitian matrix, non-increasing.
pub fn herm_eigenvalues<T: Real>(m: &CMat<T>) -> Vec<T> {
    let ev = hermitian_part(m).symmetric_eigenvalues();
    let mut v: Vec<T> = ev.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Thin SVD `M = U·diag(s)·Vᴴ` with `s` non-increasing.
///
/// `u` is `m × r`, `v` is `n × r` with `r = min(m, n)`.
#[derive(Debug, Clone)]
pub struct Svd<T: Real> {
    pub u: CMat<T>,
    pub s: Vec<T>,
    pub v: CMat<T>,
}

pub fn svd<T: Real>(m: &CMat<T>) -> Result<Svd<T>> {
    let (rows, cols) = m.shape();
    let r = rows.min(cols);
    if r == 0 {
        return Err(Error::InvalidDimension("SVD of an empty matrix".into()));
    }
    let dec = m.clone().svd(true, true);
    let u = dec
        .u
        .ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    let v_t = dec
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return Vᴴ".into()))?;
    if dec.singular_values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite singular values".into()));
    }
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        dec.singular_values[b]
            .partial_cmp(&dec.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let s = order.iter().map(|&i| dec.singular_values[i]).collect();
    let mut uu = DMatrix::from_fn(rows, r, |i, c| u[(i, order[c])]);
    let mut vv = DMatrix::from_fn(cols, r, |i, c| v_t[(order[c], i)].conj());
    for j in 0..r {
        let rot = normalize_column_phase(&mut vv, j);
        uu.column_mut(j).iter_mut().for_each(|z| *z *= rot);
    }
    Ok(Svd { u: uu, s, v: vv })
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `basis` (`n × r`), returned as `n × (n − r)`.
///
/// Built from a Householder QR of `basis`, so the columns are orthonormal to
/// working precision regardless of how ill-conditioned the original problem was.
pub fn orthonormal_complement<T: Real>(basis: &CMat<T>) -> CMat<T> {
    let (n, r) = basis.shape();
    let mut a = basis.clone();
    let mut reflectors: Vec<CVec<T>> = Vec::with_capacity(r);
    for j in 0..r.min(n) {
        let x = a.view((j, j), (n - j, 1)).clone_owned();
        let norm = frob2(&x).sqrt();
        let mut v = DVector::from_iterator(n - j, x.iter().copied());
        if norm == T::zero() {
            reflectors.push(DVector::zeros(n - j));
            continue;
        }
        let alpha = -unit_phase(x[(0, 0)]) * c_real(norm);
        v[0] -= alpha;
        let vnorm = v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
        if vnorm == T::zero() {
            reflectors.push(DVector::zeros(n - j));
            continue;
        }
        v /= c_real(vnorm);
        // A[j.., j..] -= 2 v (vᴴ A[j.., j..])
        let mut block = a.view_mut((j, j), (n - j, r - j));
        let w = v.adjoint() * &block;
        block -= &v * w * c_real(T::lit(2.0));
        reflectors.push(v);
    }
    let m = n - r.min(n);
    let mut q = DMatrix::zeros(n, m);
    for c in 0..m {
        q[(r + c, c)] = c_real(T::one());
    }
    for (j, v) in reflectors.iter().enumerate().rev() {
        if v.iter().all(|z| z.norm_sqr() == T::zero()) {
            continue;
        }
        let mut block = q.view_mut((j, 0), (n - j, m));
        let w = v.adjoint() * &block;
        block -= v * w * c_real(T::lit(2.0));
    }
    normalize_phases(&mut q);
    q
}

/// Numerical rank of a matrix with singular values `s` and shape `(rows, cols)`,
/// using the `max(dim)·eps·σ_max` threshold.
pub fn numerical_rank<T: Real>(s: &[T], rows: usize, cols: usize) -> usize {
    let smax = s.first().copied().unwrap_or(T::zero());
    let tol = T::count(rows.max(cols)) * T::eps() * smax;
    s.iter().filter(|&&x| x > tol).count()
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn herm_sqrt<T: Real>(m: &CMat<T>) -> CMat<T> {
    let e = herm_eig(m);
    let d: Vec<T> = e.values.iter().map(|&x| x.max(T::zero()).sqrt()).collect();
    scale_by_spectrum(&e.vectors, &d)
}

/// Pseudo-inverse of the principal square root of a Hermitian PSD matrix.
///
/// Returns the matrix and whether any eigenvalue fell below the rank threshold.
pub fn herm_inv_sqrt<T: Real>(m: &CMat<T>) -> (CMat<T>, bool) {
    let e = herm_eig(m);
    let n = m.nrows();
    let top = e.values.first().copied().unwrap_or(T::zero()).max(T::zero());
    let tol = T::count(n.max(1)) * T::eps() * top;
    let mut deficient = false;
    let d: Vec<T> = e
        .values
        .iter()
        .map(|&x| {
            if x > tol {
                T::one() / x.sqrt()
            } else {
                deficient = true;
                T::zero()
            }
        })
        .collect();
    (scale_by_spectrum(&e.vectors, &d), deficient)
}

/// `U·diag(d)·Uᴴ`.
pub fn scale_by_spectrum<T: Real>(u: &CMat<T>, d: &[T]) -> CMat<T> {
    let mut scaled = u.clone();
    for (j, &dj) in d.iter().enumerate() {
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= c_real(dj));
    }
    scaled * u.adjoint()
}

/// Applies the diagonal-loading rule to a Hermitian matrix expected to be
/// positive definite. Returns the (possibly loaded) matrix and whether loading
/// was applied.
pub fn condition_hpd<T: Real>(m: &CMat<T>, what: &str) -> Result<(CMat<T>, bool)> {
    let h = hermitian_part(m);
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!("{what}: non-finite entries")));
    }
    let n = h.nrows();
    if n == 0 {
        return Ok((h, false));
    }
    let ev = herm_eigenvalues(&h);
    let (hi, lo) = (ev[0], ev[n - 1]);
    if lo > T::zero() && hi / lo <= T::lit(COND_LIMIT) {
        return Ok((h, false));
    }
    let tr = trace_re(&h);
    if tr <= T::zero() {
        return Err(Error::Numerical(format!(
            "{what}: matrix is singular (trace {})",
            tr.as_f64()
        )));
    }
    let load = T::lit(DIAG_LOAD) * tr / T::count(n);
    let loaded = &h + identity::<T>(n) * c_real(load);
    if herm_eigenvalues(&loaded)[n - 1] <= T::zero() {
        return Err(Error::Numerical(format!(
            "{what}: not positive definite after diagonal loading"
        )));
    }
    Ok((loaded, true))
}

/// Inverse of a Hermitian positive definite matrix via Cholesky, with the
/// diagonal-loading rule applied first.
pub fn hpd_inverse<T: Real>(m: &CMat<T>, what: &str) -> Result<CMat<T>> {
    let (h, _) = condition_hpd(m, what)?;
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("{what}: Cholesky factorisation failed")))?;
    Ok(hermitian_part(&chol.inverse()))
}

/// Solves `M X = B` for Hermitian positive definite `M` (diagonal loading applied).
pub fn hpd_solve<T: Real>(m: &CMat<T>, b: &CMat<T>, what: &str) -> Result<CMat<T>> {
    let (h, _) = condition_hpd(m, what)?;
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("{what}: Cholesky factorisation failed")))?;
    Ok(chol.solve(b))
}

/// Natural-log determinant of a Hermitian positive definite matrix.
pub fn logdet_hpd<T: Real>(m: &CMat<T>) -> Result<T> {
    let h = hermitian_part(m);
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Numerical("log-det of a matrix that is not positive definite".into()))?;
    let l = chol.l();
    Ok(l.diagonal()
        .iter()
        .fold(T::zero(), |acc, z| acc + z.re.ln())
        * T::lit(2.0))
}

/// Kronecker product.
pub fn kron<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    a.kronecker(b)
}

/// Largest entry magnitude of `|M_ij| − 1`; 0 for an empty matrix.
pub fn unit_modulus_defect<T: Real>(m: &CMat<T>) -> T {
    m.iter()
        .fold(T::zero(), |acc, z| acc.max((z.modulus() - T::one()).abs()))
}

/// Whether every entry of `m` is finite.
pub fn all_finite<T: Real>(m: &CMat<T>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rows: usize, cols: usize, seed: u64) -> CMat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| {
            Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn phase_of_zero_is_one() {
        assert_eq!(unit_phase(Complex::new(0.0f64, 0.0)), Complex::new(1.0, 0.0));
        let p = unit_phase(Complex::new(0.5f64, 0.5));
        assert!((p - Complex::from_polar(1.0, std::f64::consts::FRAC_PI_4)).norm() < 1e-15);
    }

    #[test]
    fn svd_reconstructs_and_is_sorted() {
        let m = random_mat(5, 3, 1);
        let d = svd(&m).unwrap();
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        let mut us = d.u.clone();
        for j in 0..3 {
            us.column_mut(j).iter_mut().for_each(|z| *z *= d.s[j]);
        }
        let rec = us * d.v.adjoint();
        assert!(frob2(&(rec - &m)).sqrt() < 1e-12);
        for j in 0..3 {
            let first = d.v.column(j).iter().find(|z| z.norm() > 1e-8).copied().unwrap();
            assert!(first.im.abs() < 1e-14 && first.re > 0.0);
        }
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let m = random_mat(7, 3, 2);
        let q = svd(&m).unwrap().u;
        let c = orthonormal_complement(&q);
        assert_eq!(c.shape(), (7, 4));
        let gram = c.adjoint() * &c;
        assert!(frob2(&(gram - identity::<f64>(4))).sqrt() < 1e-13);
        assert!(frob2(&(q.adjoint() * &c)).sqrt() < 1e-13);
    }

    #[test]
    fn complement_of_nothing_is_identity() {
        let empty: CMat<f64> = DMatrix::zeros(3, 0);
        let c = orthonormal_complement(&empty);
        assert!(frob2(&(c - identity::<f64>(3))).sqrt() < 1e-15);
    }

    #[test]
    fn sqrt_and_inverse_sqrt() {
        let a = random_mat(4, 4, 3);
        let h = &a * a.adjoint() + identity::<f64>(4);
        let s = herm_sqrt(&h);
        assert!(frob2(&(&s * &s - &h)).sqrt() < 1e-12);
        let (is, deficient) = herm_inv_sqrt(&h);
        assert!(!deficient);
        assert!(frob2(&(&is * &h * &is - identity::<f64>(4))).sqrt() < 1e-12);
    }

    #[test]
    fn logdet_matches_eigenvalues() {
        let a = random_mat(3, 3, 4);
        let h = &a * a.adjoint() + identity::<f64>(3);
        let direct: f64 = herm_eigenvalues(&h).iter().map(|x| x.ln()).sum();
        assert!((logdet_hpd(&h).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_loaded() {
        let v = random_mat(3, 1, 5);
        let rank_one = &v * v.adjoint();
        let (_, loaded) = condition_hpd(&rank_one, "test").unwrap();
        assert!(loaded);
        let zero: CMat<f64> = DMatrix::zeros(2, 2);
        assert!(condition_hpd(&zero, "zero").is_err());
    }
}
