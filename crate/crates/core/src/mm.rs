//! Majorization-minimization for unit-modulus quadratic programs
//!
//! ```text
//! minimize  xᴴÃx − 2·Re{aᴴx}   subject to |x_q| = 1 for every q.
//! ```
//!
//! Each step majorizes the quadratic term with `λ·I`, `λ ≥ λ_max(Ã)`, which
//! turns the surrogate into a linear function minimized in closed form by a
//! phase projection. The objective never increases between iterates.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{frob2, herm_eigenvalues, hermitian_defect, unit_phase, unvec, vec_of};
use crate::scalar::{c_real, CMat, CVec, Real};

/// Largest dense dimension for which `λ_max` is computed by a full
/// eigensolve. Above it the engine uses power iteration.
pub const EXACT_EIG_LIMIT: usize = 4096;
/// Relative Hermitian tolerance accepted on input matrices.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// The quadratic-form matrix of a [`UnitModulusQP`].
#[derive(Debug, Clone, PartialEq)]
pub enum HermitianOperator<T: Real> {
    Dense(CMat<T>),
    /// `left ⊗ right`, kept factored so products cost
    /// `O(pq(p + q))` instead of `O(p²q²)`.
    Kronecker { left: CMat<T>, right: CMat<T> },
}

impl<T: Real> HermitianOperator<T> {
    pub fn dim(&self) -> usize {
        match self {
            Self::Dense(m) => m.nrows(),
            Self::Kronecker { left, right } => left.nrows() * right.nrows(),
        }
    }

    /// `Ãx`.
    pub fn apply(&self, x: &CVec<T>) -> CVec<T> {
        match self {
            Self::Dense(m) => m * x,
            Self::Kronecker { left, right } => {
                // (C ⊗ B) vec(X) = vec(B X Cᵀ)
                let xm = unvec(x, right.nrows(), left.nrows());
                vec_of(&(right * xm * left.transpose()))
            }
        }
    }

    /// Materialised matrix.
    pub fn to_dense(&self) -> CMat<T> {
        match self {
            Self::Dense(m) => m.clone(),
            Self::Kronecker { left, right } => left.kronecker(right),
        }
    }

    /// `‖Ã‖_F`.
    pub fn frobenius_norm(&self) -> T {
        match self {
            Self::Dense(m) => frob2(m).sqrt(),
            Self::Kronecker { left, right } => (frob2(left) * frob2(right)).sqrt(),
        }
    }

    fn hermitian_defect(&self) -> T {
        match self {
            Self::Dense(m) => hermitian_defect(m),
            Self::Kronecker { left, right } => hermitian_defect(left).max(hermitian_defect(right)),
        }
    }

    /// Largest and smallest eigenvalue, when they can be computed exactly.
    fn extreme_eigenvalues(&self) -> Option<(T, T)> {
        match self {
            Self::Dense(m) => {
                if m.nrows() > EXACT_EIG_LIMIT {
                    return None;
                }
                let ev = herm_eigenvalues(m);
                Some((ev[0], ev[ev.len() - 1]))
            }
            Self::Kronecker { left, right } => {
                if left.nrows().max(right.nrows()) > EXACT_EIG_LIMIT {
                    return None;
                }
                let l = herm_eigenvalues(left);
                let r = herm_eigenvalues(right);
                let (l_hi, l_lo) = (l[0], l[l.len() - 1]);
                let (r_hi, r_lo) = (r[0], r[r.len() - 1]);
                let products = [l_hi * r_hi, l_hi * r_lo, l_lo * r_hi, l_lo * r_lo];
                let hi = products.iter().copied().fold(products[0], |a, b| a.max(b));
                let lo = products.iter().copied().fold(products[0], |a, b| a.min(b));
                Some((hi, lo))
            }
        }
    }

    /// Gershgorin upper bound on every eigenvalue.
    fn gershgorin(&self) -> T {
        fn rows<T: Real>(m: &CMat<T>) -> T {
            (0..m.nrows())
                .map(|i| {
                    let off = (0..m.ncols())
                        .filter(|&j| j != i)
                        .fold(T::zero(), |a, j| a + m[(i, j)].modulus());
                    m[(i, i)].re + off
                })
                .fold(T::zero(), |a, b| a.max(b))
        }
        fn abs_rows<T: Real>(m: &CMat<T>) -> T {
            (0..m.nrows())
                .map(|i| m.row(i).iter().fold(T::zero(), |a, z| a + z.modulus()))
                .fold(T::zero(), |a, b| a.max(b))
        }
        match self {
            Self::Dense(m) => rows(m),
            // Row sums of |C ⊗ B| factor as products of row sums.
            Self::Kronecker { left, right } => abs_rows(left) * abs_rows(right),
        }
    }

    /// Power iteration on a shifted operator. Returns an estimate that is an
    /// upper bound up to the final residual, or `None` if it stalls.
    fn power_bound(&self, tol: T, max_iter: usize) -> Option<T> {
        let n = self.dim();
        let mut v: CVec<T> = DVector::from_fn(n, |i, _| {
            c_real(T::one() + T::count(i % 7) * T::lit(0.01))
        });
        v /= c_real(v.norm());
        let mut mu = T::zero();
        for _ in 0..max_iter {
            let w = self.apply(&v);
            let new_mu = v.dotc(&w).re;
            let norm = w.norm();
            if norm == T::zero() {
                return Some(T::zero());
            }
            let residual = (&w - &v * c_real(new_mu)).norm();
            if (new_mu - mu).abs() <= tol * new_mu.abs().max(T::eps()) {
                return Some(new_mu + residual);
            }
            mu = new_mu;
            v = w / c_real(norm);
        }
        None
    }
}

/// `min xᴴÃx − 2Re{aᴴx}` over unit-modulus `x`.
///
/// `blocks` optionally records the sizes of the support blocks the variable
/// was gathered from (partially-connected problems); it does not change the
/// algebra, since `Ã` and `a` are already restricted to the support.
#[derive(Debug, Clone)]
pub struct UnitModulusQP<T: Real> {
    a_tilde: HermitianOperator<T>,
    a: CVec<T>,
    blocks: Option<Vec<usize>>,
    lambda: T,
}

impl<T: Real> UnitModulusQP<T> {
    /// Validates the problem and computes the majorizer constant.
    pub fn new(a_tilde: HermitianOperator<T>, a: CVec<T>) -> Result<Self> {
        let n = a_tilde.dim();
        if n == 0 {
            return Err(Error::InvalidDimension("empty unit-modulus QP".into()));
        }
        if a.len() != n {
            return Err(Error::InvalidDimension(format!(
                "linear term has length {}, quadratic term is {n}×{n}",
                a.len()
            )));
        }
        if let HermitianOperator::Dense(m) = &a_tilde {
            if !m.is_square() {
                return Err(Error::InvalidDimension("quadratic term must be square".into()));
            }
        }
        if a_tilde.hermitian_defect() > T::lit(HERMITIAN_TOL) {
            return Err(Error::InvalidInput("quadratic term is not Hermitian".into()));
        }
        let lambda = lambda_max_bound(&a_tilde)?;
        Ok(Self {
            a_tilde,
            a,
            blocks: None,
            lambda,
        })
    }

    pub fn dense(a_tilde: CMat<T>, a: CVec<T>) -> Result<Self> {
        Self::new(HermitianOperator::Dense(a_tilde), a)
    }

    pub fn with_blocks(mut self, blocks: Vec<usize>) -> Result<Self> {
        if blocks.iter().sum::<usize>() != self.dim() || blocks.contains(&0) {
            return Err(Error::InvalidDimension(
                "support blocks must be non-empty and cover the variable".into(),
            ));
        }
        self.blocks = Some(blocks);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn a_tilde(&self) -> &HermitianOperator<T> {
        &self.a_tilde
    }

    pub fn linear(&self) -> &CVec<T> {
        &self.a
    }

    pub fn blocks(&self) -> Option<&[usize]> {
        self.blocks.as_deref()
    }

    /// The majorizer constant in use.
    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// `xᴴÃx − 2Re{aᴴx}`.
    pub fn objective(&self, x: &CVec<T>) -> T {
        let ax = self.a_tilde.apply(x);
        x.dotc(&ax).re - T::lit(2.0) * self.a.dotc(x).re
    }

    /// Surrogate `g(x | y) = λ‖x‖² + 2Re{xᴴ(Ã − λI)y} + yᴴ(λI − Ã)y − 2Re{aᴴx}`.
    pub fn majorizer(&self, x: &CVec<T>, y: &CVec<T>) -> T {
        let shifted = self.a_tilde.apply(y) - y * c_real(self.lambda);
        let two = T::lit(2.0);
        self.lambda * x.norm_squared() + two * x.dotc(&shifted).re - y.dotc(&shifted).re
            - two * self.a.dotc(x).re
    }
}

/// Upper bound on `λ_max(Ã)`.
///
/// Exact for dense problems up to [`EXACT_EIG_LIMIT`] and for Kronecker
/// operators with small factors; otherwise power iteration to 1e-6 relative,
/// falling back to the Gershgorin bound.
pub fn lambda_max_bound<T: Real>(a_tilde: &HermitianOperator<T>) -> Result<T> {
    if a_tilde.hermitian_defect() > T::lit(HERMITIAN_TOL) {
        return Err(Error::InvalidInput("quadratic term is not Hermitian".into()));
    }
    let scale = a_tilde.frobenius_norm();
    if let Some((hi, lo)) = a_tilde.extreme_eigenvalues() {
        if lo < -T::lit(HERMITIAN_TOL) * scale {
            return Err(Error::InvalidInput(format!(
                "quadratic term is not positive semidefinite (λ_min = {})",
                lo.as_f64()
            )));
        }
        return Ok(hi.max(T::zero()));
    }
    let gersh = a_tilde.gershgorin();
    Ok(match a_tilde.power_bound(T::lit(1e-6), 10_000) {
        Some(est) => est.min(gersh),
        None => gersh,
    })
}

/// One MM update: `x = −exp(j·arg((Ã − λI)x_prev − a))`.
pub fn mm_step<T: Real>(qp: &UnitModulusQP<T>, x_prev: &CVec<T>) -> CVec<T> {
    let at = qp.a_tilde.apply(x_prev) - x_prev * c_real(qp.lambda) - &qp.a;
    at.map(|z| -unit_phase(z))
}

/// Objective history of one MM run.
#[derive(Debug, Clone, PartialEq)]
pub struct MMTrace<T: Real> {
    /// Objective at the start point followed by one value per step.
    pub objective_values: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> MMTrace<T> {
    /// Whether the trace is non-increasing within `tol·(1 + |f|)`.
    pub fn is_monotone(&self, tol: T) -> bool {
        self.objective_values
            .windows(2)
            .all(|w| w[1] <= w[0] + tol * (T::one() + w[0].abs()))
    }

    pub fn final_objective(&self) -> Option<T> {
        self.objective_values.last().copied()
    }
}

/// Iterates [`mm_step`] until the relative objective change drops below
/// `eps_obj` or `max_iter` steps have run.
pub fn mm_solve<T: Real>(
    qp: &UnitModulusQP<T>,
    x0: &CVec<T>,
    eps_obj: T,
    max_iter: usize,
) -> Result<(CVec<T>, MMTrace<T>)> {
    if x0.len() != qp.dim() {
        return Err(Error::InvalidDimension(format!(
            "start point has length {}, problem has {}",
            x0.len(),
            qp.dim()
        )));
    }
    let mut x = x0.clone();
    let mut f = qp.objective(&x);
    let mut best = (x.clone(), f);
    let mut trace = MMTrace {
        objective_values: vec![f],
        iterations: 0,
        converged: false,
    };
    for _ in 0..max_iter {
        let next = mm_step(qp, &x);
        let f_next = qp.objective(&next);
        trace.objective_values.push(f_next);
        trace.iterations += 1;
        let done = (f - f_next).abs() <= eps_obj * (T::one() + f.abs());
        x = next;
        f = f_next;
        if f <= best.1 {
            best = (x.clone(), f);
        }
        if done {
            trace.converged = true;
            break;
        }
    }
    Ok((best.0, trace))
}

/// Convenience wrapper for matrix-valued variables: reshapes `x0` (column
/// major), solves, and reshapes back.
pub fn mm_solve_matrix<T: Real>(
    qp: &UnitModulusQP<T>,
    x0: &CMat<T>,
    eps_obj: T,
    max_iter: usize,
) -> Result<(CMat<T>, MMTrace<T>)> {
    let (r, c) = x0.shape();
    let (x, trace) = mm_solve(qp, &vec_of(x0), eps_obj, max_iter)?;
    Ok((unvec(&x, r, c), trace))
}

/// Dense Hermitian matrix built from a generator, handy for small problems.
pub fn dense_from_fn<T: Real>(n: usize, f: impl FnMut(usize, usize) -> Complex<T>) -> CMat<T> {
    DMatrix::from_fn(n, n, f)
}
