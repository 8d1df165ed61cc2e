//! Fully-digital reference designs and the primitives they share with the
//! hybrid solvers: water-filling, null spaces, the generalized EVD, Wiener
//! combining and the power-constrained weighted least-squares precoder step.

use log::debug;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    frob2, herm_eig, hermitian_part, hpd_inverse, hpd_solve, identity, numerical_rank,
    orthonormal_complement, svd, trace_re,
};
use crate::metrics::{mse_list, rx_covariance, wmmse_objective};
use crate::model::{ChannelSet, SystemConfig};
use crate::scalar::{c_real, CMat, Real};

/// Water-filling allocation and its multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill<T: Real> {
    pub powers: Vec<T>,
    /// Water level `ν = 1/(μ ln 2)`.
    pub level: T,
    /// Lagrange multiplier `μ` of the power constraint.
    pub mu: T,
}

/// Maximizes `Σ log₂(1 + g_s f_s/σ²)` subject to `Σ f_s = P`, `f_s ≥ 0`.
///
/// Zero gains are allowed and receive no power; at least one gain must be
/// positive.
pub fn waterfill<T: Real>(gains: &[T], sigma2: T, power: T) -> Result<WaterFill<T>> {
    if !(power > T::zero()) || !(sigma2 > T::zero()) {
        return Err(Error::InvalidInput("water-filling needs P > 0 and σ² > 0".into()));
    }
    if gains.iter().any(|g| !(*g >= T::zero())) {
        return Err(Error::InvalidInput("water-filling gains must be non-negative".into()));
    }
    let floors: Vec<Option<T>> = gains
        .iter()
        .map(|&g| (g > T::zero()).then(|| sigma2 / g))
        .collect();
    let Some(max_floor) = floors.iter().flatten().copied().reduce(|a, b| a.max(b)) else {
        return Err(Error::InvalidInput("water-filling needs a positive gain".into()));
    };
    let fill = |nu: T| -> T {
        floors
            .iter()
            .flatten()
            .fold(T::zero(), |acc, &f| acc + (nu - f).max(T::zero()))
    };
    let (mut lo, mut hi) = (T::zero(), power + max_floor);
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if fill(mid) < power {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::eps() * hi {
            break;
        }
    }
    // Closed form on the active set removes the bisection error.
    let mut nu = hi;
    let active: Vec<T> = floors.iter().flatten().copied().filter(|&f| f < nu).collect();
    if !active.is_empty() {
        let candidate =
            (power + active.iter().fold(T::zero(), |a, &b| a + b)) / T::count(active.len());
        let consistent = floors
            .iter()
            .flatten()
            .all(|&f| (f < candidate) == active.contains(&f) || (f - candidate).abs() <= T::eps() * candidate);
        if consistent {
            nu = candidate;
        }
    }
    let powers = floors
        .iter()
        .map(|f| f.map_or(T::zero(), |f| (nu - f).max(T::zero())))
        .collect();
    let mu = T::one() / (nu * T::lit(std::f64::consts::LN_2));
    Ok(WaterFill {
        powers,
        level: nu,
        mu,
    })
}

/// Vertical stack of the channels leaving transmitter `k` towards every other
/// receiver, `[H_{i,k}]_{i≠k}`.
pub fn leakage_stack<T: Real>(config: &SystemConfig<T>, channels: &ChannelSet<T>, k: usize) -> CMat<T> {
    let nt = config.pairs[k].nt;
    let rows: usize = (0..config.k()).filter(|&i| i != k).map(|i| config.pairs[i].nr).sum();
    let mut out = DMatrix::zeros(rows, nt);
    let mut r = 0;
    for i in (0..config.k()).filter(|&i| i != k) {
        let h = channels.get(i, k);
        out.view_mut((r, 0), (h.nrows(), nt)).copy_from(h);
        r += h.nrows();
    }
    out
}

/// Orthonormal basis (`nt × L`) of the null space of `h_tilde`, where `L` is
/// `nt` minus the numerical rank.
pub fn null_space_basis<T: Real>(h_tilde: &CMat<T>, nt: usize) -> Result<CMat<T>> {
    if h_tilde.ncols() != nt {
        return Err(Error::InvalidDimension(format!(
            "leakage channel has {} columns, expected {nt}",
            h_tilde.ncols()
        )));
    }
    if h_tilde.nrows() == 0 || frob2(h_tilde) == T::zero() {
        return Ok(identity(nt));
    }
    let d = svd(h_tilde)?;
    let rank = numerical_rank(&d.s, h_tilde.nrows(), nt);
    let row_space = d.v.columns(0, rank).into_owned();
    Ok(orthonormal_complement(&row_space))
}

/// Block-diagonalization zero-forcing precoder of transmitter `k` with
/// water-filled stream powers.
pub fn bdzf_precoder<T: Real>(config: &SystemConfig<T>, channels: &ChannelSet<T>, k: usize) -> Result<CMat<T>> {
    let p = &config.pairs[k];
    let basis = null_space_basis(&leakage_stack(config, channels, k), p.nt)?;
    let l = basis.ncols();
    if l < p.ns {
        return Err(Error::Infeasible(format!(
            "BD-ZF for pair {k}: null space has dimension {l} < Ns = {}; \
             need Nt_k exceeding the leakage rank by Ns (Nt_k > Σ_{{i≠k}} Nr_i for full-rank channels)",
            p.ns
        )));
    }
    let eff = channels.get(k, k) * &basis;
    let d = svd(&eff)?;
    if d.s.len() < p.ns {
        return Err(Error::Infeasible(format!(
            "BD-ZF for pair {k}: effective channel supports only {} streams",
            d.s.len()
        )));
    }
    let gains: Vec<T> = d.s[..p.ns].iter().map(|&s| s * s).collect();
    let wf = waterfill(&gains, p.noise, p.power)?;
    let mut v = d.v.columns(0, p.ns).into_owned();
    for (j, &f) in wf.powers.iter().enumerate() {
        v.column_mut(j).iter_mut().for_each(|z| *z *= c_real(f.sqrt()));
    }
    Ok(basis * v)
}

/// Generalized eigen-decomposition of the pencil `(A, B)`, `B` positive
/// definite: `TᴴAT = diag(σ)` with `σ` non-increasing and `TᴴBT = I`.
pub fn gevd<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Result<(CMat<T>, Vec<T>)> {
    let n = a.nrows();
    if !a.is_square() || b.shape() != (n, n) {
        return Err(Error::InvalidDimension("GEVD needs square matrices of equal size".into()));
    }
    let chol = hermitian_part(b)
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("GEVD: B is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&identity::<T>(n))
        .ok_or_else(|| Error::InvalidInput("GEVD: singular Cholesky factor".into()))?;
    let c = hermitian_part(&(&l_inv * a * l_inv.adjoint()));
    let e = herm_eig(&c);
    Ok((l_inv.adjoint() * e.vectors, e.values))
}

/// SLNR-maximizing precoder of transmitter `k`, scaled to full power.
pub fn slnr_precoder<T: Real>(config: &SystemConfig<T>, channels: &ChannelSet<T>, k: usize) -> Result<CMat<T>> {
    let p = &config.pairs[k];
    let hkk = channels.get(k, k);
    let a = hkk.adjoint() * hkk;
    let load = T::count(p.nr) * p.noise / p.power;
    let mut b = identity::<T>(p.nt) * c_real(load);
    for i in (0..config.k()).filter(|&i| i != k) {
        let h = channels.get(i, k);
        b += h.adjoint() * h;
    }
    let (t, _) = gevd(&a, &b)?;
    let t1 = t.columns(0, p.ns).into_owned();
    let norm2 = frob2(&t1);
    Ok(t1 * c_real((p.power / norm2).sqrt()))
}

/// Digital combiner minimizing the MSE for a fixed analog combiner `ga`:
/// `(gaᴴ R_y ga)⁻¹ gaᴴ H_kk F_k`, where `hf = H_kk F_k`.
pub fn wiener_combiner<T: Real>(r_y: &CMat<T>, ga: &CMat<T>, hf: &CMat<T>) -> Result<CMat<T>> {
    let gah = ga.adjoint();
    hpd_solve(&(&gah * r_y * ga), &(gah * hf), "Wiener combiner covariance")
}

/// Fully-digital MMSE combiner `R_y⁻¹ H_kk F_k`.
pub fn mmse_full_digital_combiner<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    precoders: &[CMat<T>],
    k: usize,
) -> Result<CMat<T>> {
    let r = rx_covariance(config, channels, precoders, k);
    hpd_solve(&r, &(channels.get(k, k) * &precoders[k]), "received covariance")
}

/// Minimizer of `Tr(FᴴMF) − 2Re Tr(rhsᴴF)` subject to `‖F‖² ≤ P`:
/// `F = (M + βI)⁻¹ rhs`, with `β ≥ 0` the smallest multiplier meeting the
/// budget. Returns `(F, β)`.
pub fn power_constrained_ls<T: Real>(m: &CMat<T>, rhs: &CMat<T>, power: T) -> Result<(CMat<T>, T)> {
    let e = herm_eig(m);
    let q = e.vectors.adjoint() * rhs;
    let n = m.nrows();
    let top = e.values.first().copied().unwrap_or(T::zero()).max(T::zero());
    let tol = T::count(n.max(1)) * T::eps() * top;
    let row_energy: Vec<T> = (0..n).map(|r| q.row(r).iter().fold(T::zero(), |a, z| a + z.norm_sqr())).collect();
    let q_scale = row_energy.iter().fold(T::zero(), |a, &b| a + b);
    let lam: Vec<T> = e.values.iter().map(|&x| x.max(T::zero())).collect();
    // Directions with no curvature and no pull stay at zero.
    let dead: Vec<bool> = (0..n)
        .map(|r| lam[r] <= tol && row_energy[r] <= T::eps() * T::eps() * q_scale)
        .collect();
    let power_at = |beta: T| -> T {
        (0..n).filter(|&r| !dead[r]).fold(T::zero(), |acc, r| {
            let d = lam[r] + beta;
            if d <= T::zero() {
                T::max_value().unwrap_or(T::one() / T::eps())
            } else {
                acc + row_energy[r] / (d * d)
            }
        })
    };
    let solution = |beta: T| -> CMat<T> {
        let mut scaled = q.clone();
        for r in 0..n {
            let d = lam[r] + beta;
            let s = if dead[r] || d <= T::zero() { T::zero() } else { T::one() / d };
            scaled.row_mut(r).iter_mut().for_each(|z| *z *= c_real(s));
        }
        &e.vectors * scaled
    };
    if q_scale == T::zero() {
        return Ok((DMatrix::zeros(m.ncols(), rhs.ncols()), T::zero()));
    }
    let singular = (0..n).any(|r| !dead[r] && lam[r] <= tol);
    if !singular && power_at(T::zero()) <= power {
        return Ok((solution(T::zero()), T::zero()));
    }
    let (mut lo, mut hi) = (T::zero(), (q_scale / power).sqrt());
    for _ in 0..200 {
        if hi - lo <= T::lit(1e-13) * hi {
            break;
        }
        let mid = (lo + hi) * T::lit(0.5);
        if power_at(mid) > power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut f = solution(hi);
    // Clip the residual bisection slack so the budget holds to rounding.
    let pw = frob2(&f);
    if pw > power {
        f *= c_real((power / pw).sqrt());
    }
    Ok((f, hi))
}

/// Per-pair fully-digital transceiver.
#[derive(Debug, Clone, PartialEq)]
pub struct FullDigitalState<T: Real> {
    pub f: Vec<CMat<T>>,
    pub g: Vec<CMat<T>>,
    pub w: Vec<CMat<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmmseOptions<T: Real> {
    pub eps_obj: T,
    pub max_iter: usize,
}

impl<T: Real> Default for WmmseOptions<T> {
    fn default() -> Self {
        Self {
            eps_obj: T::lit(1e-4),
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseTrace<T: Real> {
    /// WMMSE objective after every sweep.
    pub objectives: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Top-`Ns` right singular vectors of each direct channel at equal power.
pub fn eigen_precoders<T: Real>(config: &SystemConfig<T>, channels: &ChannelSet<T>) -> Result<Vec<CMat<T>>> {
    config
        .pairs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let d = svd(channels.get(k, k))?;
            let mut f = DMatrix::zeros(p.nt, p.ns);
            let cols = p.ns.min(d.v.ncols());
            f.columns_mut(0, cols).copy_from(&d.v.columns(0, cols));
            Ok(f * c_real((p.power / T::count(p.ns)).sqrt()))
        })
        .collect()
}

/// Iterative fully-digital WMMSE: Wiener combiners, `W = E⁻¹`, then the
/// power-constrained precoder step, repeated until the objective settles.
pub fn wmmse_full_digital<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    init: Option<Vec<CMat<T>>>,
    opts: WmmseOptions<T>,
) -> Result<(FullDigitalState<T>, WmmseTrace<T>)> {
    channels.validate(config)?;
    let kk = config.k();
    let mut f = match init {
        Some(f) => f,
        None => eigen_precoders(config, channels)?,
    };
    let mut trace = WmmseTrace {
        objectives: Vec::new(),
        iterations: 0,
        converged: false,
    };
    let mut g = Vec::new();
    let mut w = Vec::new();
    for _ in 0..opts.max_iter.max(1) {
        g = (0..kk)
            .map(|k| mmse_full_digital_combiner(config, channels, &f, k))
            .collect::<Result<_>>()?;
        let e = mse_list(config, channels, &f, &g)?;
        w = e
            .iter()
            .map(|m| hpd_inverse(m, "MSE matrix"))
            .collect::<Result<_>>()?;
        for k in 0..kk {
            let mut m = DMatrix::zeros(config.pairs[k].nt, config.pairs[k].nt);
            for i in 0..kk {
                let l = g[i].adjoint() * channels.get(i, k);
                m += l.adjoint() * &w[i] * &l;
            }
            let lkk = g[k].adjoint() * channels.get(k, k);
            let rhs = lkk.adjoint() * &w[k];
            f[k] = power_constrained_ls(&hermitian_part(&m), &rhs, config.pairs[k].power)?.0;
        }
        let e = mse_list(config, channels, &f, &g)?;
        let obj = wmmse_objective(&e, &w)?;
        trace.iterations += 1;
        let done = trace
            .objectives
            .last()
            .is_some_and(|&prev: &T| (prev - obj).abs() <= opts.eps_obj * (T::one() + prev.abs()));
        trace.objectives.push(obj);
        if done {
            trace.converged = true;
            break;
        }
    }
    debug!(
        "fd-wmmse: {} sweeps, converged = {}",
        trace.iterations, trace.converged
    );
    Ok((FullDigitalState { f, g, w }, trace))
}

/// Stacks fully-digital precoders with their MMSE combiners, the receiver
/// used to score the closed-form baselines.
pub fn with_mmse_combiners<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    f: Vec<CMat<T>>,
) -> Result<FullDigitalState<T>> {
    let g: Vec<CMat<T>> = (0..config.k())
        .map(|k| mmse_full_digital_combiner(config, channels, &f, k))
        .collect::<Result<_>>()?;
    let e = mse_list(config, channels, &f, &g)?;
    let w = e
        .iter()
        .map(|m| hpd_inverse(m, "MSE matrix"))
        .collect::<Result<_>>()?;
    Ok(FullDigitalState { f, g, w })
}

/// Trace of `F Fᴴ`.
pub fn power_of<T: Real>(f: &CMat<T>) -> T {
    trace_re(&(f * f.adjoint()))
}
