//! Low-complexity hybrid designs that approximate a fully-digital target.
//!
//! The precoder of each pair is fitted to a BD-ZF or SLNR-Max target by
//! iterative phase projection; the combiner is fitted to the fully-digital
//! MMSE combiner in the `R_y`-weighted Frobenius norm, with MM analog steps.
//! Pairs are designed independently once the targets are known.

use log::{debug, warn};
use nalgebra::DMatrix;

use crate::digital::{bdzf_precoder, slnr_precoder};
use crate::error::{Error, Result};
use crate::linalg::{
    frob2, herm_sqrt, hermitian_part, hpd_inverse, hpd_solve, identity, orthonormal_complement,
    phase_project, svd, trace_re, unvec, vec_of,
};
use crate::metrics::{mse_list, rx_covariance};
use crate::mm::{mm_solve, HermitianOperator, MMTrace, UnitModulusQP};
use crate::model::{ChannelSet, HybridPair, HybridState, SystemConfig};
use crate::scalar::{c_real, CMat, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxOptions<T: Real> {
    /// Cycle cap and relative tolerance of the iterative-PP precoder fit.
    pub fit_max_iter: usize,
    pub fit_eps: T,
    /// Alternation cap and relative tolerance of the combiner fit.
    pub comb_max_iter: usize,
    pub comb_eps: T,
    /// Inner MM cap and tolerance for the analog combiner.
    pub mm_max_iter: usize,
    pub mm_eps: T,
}

impl<T: Real> Default for ApproxOptions<T> {
    fn default() -> Self {
        Self {
            fit_max_iter: 100,
            fit_eps: T::lit(1e-6),
            comb_max_iter: 100,
            comb_eps: T::lit(1e-6),
            mm_max_iter: 50,
            mm_eps: T::lit(1e-8),
        }
    }
}

/// A fully-digital target and the data the fit needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderFitProblem<T: Real> {
    pub target: CMat<T>,
    /// Left singular vectors of the target, extended to `NtRF` orthonormal
    /// columns when `NtRF > Ns`.
    pub u_target: CMat<T>,
    pub power: T,
}

impl<T: Real> PrecoderFitProblem<T> {
    pub fn new(target: CMat<T>, nt_rf: usize, power: T) -> Result<Self> {
        let (nt, ns) = target.shape();
        if frob2(&target) == T::zero() {
            return Err(Error::InvalidInput("cannot fit a zero target".into()));
        }
        if nt_rf < ns || nt_rf > nt {
            return Err(Error::InvalidDimension(format!(
                "need Ns ({ns}) <= NtRF ({nt_rf}) <= Nt ({nt})"
            )));
        }
        let u = svd(&target)?.u;
        let u_target = if nt_rf > u.ncols() {
            let extra = orthonormal_complement(&u);
            let mut out = DMatrix::zeros(nt, nt_rf);
            out.columns_mut(0, u.ncols()).copy_from(&u);
            out.columns_mut(u.ncols(), nt_rf - u.ncols())
                .copy_from(&extra.columns(0, nt_rf - u.ncols()));
            out
        } else {
            u.columns(0, nt_rf).into_owned()
        };
        Ok(Self {
            target,
            u_target,
            power,
        })
    }
}

/// `U Λ V` for diagonal `Λ` (given by its entries) and unitary `V`.
pub fn unconstrained_analog<T: Real>(problem: &PrecoderFitProblem<T>, lambda: &[T], v: &CMat<T>) -> CMat<T> {
    let mut ul = problem.u_target.clone();
    for (j, &l) in lambda.iter().enumerate() {
        ul.column_mut(j).iter_mut().for_each(|z| *z *= c_real(l));
    }
    ul * v
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T: Real> {
    pub fa: CMat<T>,
    pub fd: CMat<T>,
    /// `‖UΛV − F_A‖²` after every block step.
    pub objectives: Vec<T>,
    pub cycles: usize,
    pub converged: bool,
}

/// Iterative phase-projection fit: alternates `F_A = PP(UΛV)`, the diagonal
/// `Λ` and the unitary `V`, then sets the digital precoder in closed form so
/// the composed precoder spends exactly `P`.
pub fn iterative_pp_fit<T: Real>(problem: &PrecoderFitProblem<T>, max_iter: usize, eps: T) -> Result<FitResult<T>> {
    let n_rf = problem.u_target.ncols();
    let mut lambda = vec![T::one(); n_rf];
    let mut v: CMat<T> = identity(n_rf);
    let mut objectives = Vec::new();
    let mut fa = phase_project(&unconstrained_analog(problem, &lambda, &v));
    let fit = |lambda: &[T], v: &CMat<T>, fa: &CMat<T>| frob2(&(unconstrained_analog(problem, lambda, v) - fa));
    objectives.push(fit(&lambda, &v, &fa));
    let mut prev = objectives[0];
    let mut converged = false;
    let mut cycles = 0;
    for _ in 0..max_iter {
        let vfu = &v * fa.adjoint() * &problem.u_target;
        for (i, l) in lambda.iter_mut().enumerate() {
            *l = vfu[(i, i)].re;
        }
        objectives.push(fit(&lambda, &v, &fa));
        let mut ul = problem.u_target.clone();
        for (j, &l) in lambda.iter().enumerate() {
            ul.column_mut(j).iter_mut().for_each(|z| *z *= c_real(l));
        }
        let d = svd(&(fa.adjoint() * ul))?;
        v = d.v * d.u.adjoint();
        objectives.push(fit(&lambda, &v, &fa));
        fa = phase_project(&unconstrained_analog(problem, &lambda, &v));
        let f = fit(&lambda, &v, &fa);
        objectives.push(f);
        cycles += 1;
        if (prev - f).abs() <= eps * (T::one() + prev.abs()) {
            converged = true;
            break;
        }
        prev = f;
    }
    let fd = digital_for_target(&fa, &problem.target, problem.power)?;
    Ok(FitResult {
        fa,
        fd,
        objectives,
        cycles,
        converged,
    })
}

/// `F_D = √P·F_AᴴF / ‖(F_AᴴF_A)^{1/2} F_AᴴF‖_F`.
pub fn digital_for_target<T: Real>(fa: &CMat<T>, target: &CMat<T>, power: T) -> Result<CMat<T>> {
    let y = fa.adjoint() * target;
    let denom = frob2(&(herm_sqrt(&(fa.adjoint() * fa)) * &y)).sqrt();
    if !(denom > T::zero()) {
        return Err(Error::Numerical(
            "analog precoder is orthogonal to the target".into(),
        ));
    }
    Ok(y * c_real(power.sqrt() / denom))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinerFit<T: Real> {
    pub ga: CMat<T>,
    pub gd: CMat<T>,
    /// `‖R_y^{1/2}(Ĝ − G_A G_D)‖²` after every block step.
    pub objectives: Vec<T>,
    pub inner: Vec<MMTrace<T>>,
    pub converged: bool,
}

/// Weighted distance `‖R^{1/2}(Ĝ − G)‖²`.
pub fn combiner_fit_objective<T: Real>(r_y: &CMat<T>, g_hat: &CMat<T>, g: &CMat<T>) -> T {
    let d = g_hat - g;
    trace_re(&(d.adjoint() * r_y * d))
}

/// Hybrid approximation of the MMSE combiner of pair `k` for the given
/// composed precoders.
pub fn mm_hybrid_combiner<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    precoders: &[CMat<T>],
    k: usize,
    opts: &ApproxOptions<T>,
) -> Result<CombinerFit<T>> {
    let p = &config.pairs[k];
    let r = hermitian_part(&rx_covariance(config, channels, precoders, k));
    let g_hat = hpd_solve(&r, &(channels.get(k, k) * &precoders[k]), "received covariance")?;
    let u = svd(channels.get(k, k))?.u;
    let mut unc = DMatrix::zeros(p.nr, p.nr_rf);
    let cols = p.nr_rf.min(u.ncols());
    unc.columns_mut(0, cols).copy_from(&u.columns(0, cols));
    let mut ga = phase_project(&unc);
    let mut gd = DMatrix::zeros(p.nr_rf, p.ns);
    let mut objectives = vec![combiner_fit_objective(&r, &g_hat, &(&ga * &gd))];
    let mut inner = Vec::new();
    let mut converged = false;
    let mut prev = objectives[0];
    let rg = &r * &g_hat;
    for _ in 0..opts.comb_max_iter {
        let gar = ga.adjoint() * &r;
        gd = match hpd_solve(&(&gar * &ga), &(&gar * &g_hat), "analog-combined covariance") {
            Ok(gd) => gd,
            Err(e) => {
                warn!("pair {k}: {e}");
                return Err(e);
            }
        };
        objectives.push(combiner_fit_objective(&r, &g_hat, &(&ga * &gd)));
        let left = hermitian_part(&(&gd * gd.adjoint()).transpose());
        let qp = UnitModulusQP::new(
            HermitianOperator::Kronecker {
                left,
                right: r.clone(),
            },
            vec_of(&(&rg * gd.adjoint())),
        )?;
        let (x, tr) = mm_solve(&qp, &vec_of(&ga), opts.mm_eps, opts.mm_max_iter)?;
        ga = unvec(&x, p.nr, p.nr_rf);
        inner.push(tr);
        let f = combiner_fit_objective(&r, &g_hat, &(&ga * &gd));
        objectives.push(f);
        if (prev - f).abs() <= opts.comb_eps * (T::one() + prev.abs()) {
            converged = true;
            break;
        }
        prev = f;
    }
    // Digital stage matched to the final analog combiner.
    let gar = ga.adjoint() * &r;
    gd = hpd_solve(&(&gar * &ga), &(&gar * &g_hat), "analog-combined covariance")?;
    objectives.push(combiner_fit_objective(&r, &g_hat, &(&ga * &gd)));
    Ok(CombinerFit {
        ga,
        gd,
        objectives,
        inner,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxTrace<T: Real> {
    pub precoder_fits: Vec<FitResult<T>>,
    pub combiner_fits: Vec<CombinerFit<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    BdZf,
    Slnr,
}

/// Fits hybrid transceivers to the given fully-digital targets.
pub fn fit_hybrid<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    targets: Vec<CMat<T>>,
    opts: &ApproxOptions<T>,
) -> Result<(HybridState<T>, ApproxTrace<T>)> {
    let mut fits = Vec::with_capacity(config.k());
    for (p, target) in config.pairs.iter().zip(targets) {
        let problem = PrecoderFitProblem::new(target, p.nt_rf, p.power)?;
        fits.push(iterative_pp_fit(&problem, opts.fit_max_iter, opts.fit_eps)?);
    }
    let precoders: Vec<CMat<T>> = fits.iter().map(|f| &f.fa * &f.fd).collect();
    let combs: Vec<CombinerFit<T>> = (0..config.k())
        .map(|k| mm_hybrid_combiner(config, channels, &precoders, k, opts))
        .collect::<Result<_>>()?;
    let combiners: Vec<CMat<T>> = combs.iter().map(|c| &c.ga * &c.gd).collect();
    let e = mse_list(config, channels, &precoders, &combiners)?;
    let pairs = fits
        .iter()
        .zip(&combs)
        .zip(&e)
        .map(|((f, c), ek)| {
            Ok(HybridPair {
                fa: f.fa.clone(),
                fd: f.fd.clone(),
                ga: c.ga.clone(),
                gd: c.gd.clone(),
                w: hpd_inverse(ek, "MSE matrix")?,
            })
        })
        .collect::<Result<_>>()?;
    debug!(
        "hybrid fit: precoder cycles {:?}",
        fits.iter().map(|f| f.cycles).collect::<Vec<_>>()
    );
    Ok((
        HybridState { pairs },
        ApproxTrace {
            precoder_fits: fits,
            combiner_fits: combs,
        },
    ))
}

/// Hybrid design fitted to a fully-digital target of the given kind.
pub fn hybrid_from_target<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    target: Target,
    opts: &ApproxOptions<T>,
) -> Result<(HybridState<T>, ApproxTrace<T>)> {
    channels.validate(config)?;
    let targets = (0..config.k())
        .map(|k| match target {
            Target::BdZf => bdzf_precoder(config, channels, k).map_err(|e| match e {
                Error::Infeasible(msg) => Error::Infeasible(format!(
                    "{msg}; the SLNR-Max hybrid design has no dimension condition"
                )),
                other => other,
            }),
            Target::Slnr => slnr_precoder(config, channels, k),
        })
        .collect::<Result<Vec<_>>>()?;
    fit_hybrid(config, channels, targets, opts)
}

/// Low-complexity hybrid BD-ZF design.
pub fn bdzf_hybrid<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    opts: &ApproxOptions<T>,
) -> Result<(HybridState<T>, ApproxTrace<T>)> {
    hybrid_from_target(config, channels, Target::BdZf, opts)
}

/// Low-complexity hybrid SLNR-Max design.
pub fn slnr_hybrid<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    opts: &ApproxOptions<T>,
) -> Result<(HybridState<T>, ApproxTrace<T>)> {
    hybrid_from_target(config, channels, Target::Slnr, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digital::mmse_full_digital_combiner;
    use crate::linalg::unit_modulus_defect;
    use crate::metrics::{sum_rate, tx_power};
    use crate::model::{complex_gaussian, gen_mmwave, gen_rayleigh, steering_vector, PairConfig, RngSpec};
    use nalgebra::Complex;
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn cfg(k: usize, nt: usize, nr: usize, rf: usize, ns: usize, power: f64) -> SystemConfig<f64> {
        SystemConfig::uniform(k, PairConfig { nt, nr, nt_rf: rf, nr_rf: rf, ns, power, noise: 1.0 }).unwrap()
    }

    fn rand_mat(r: usize, c: usize, seed: u64) -> CMat<f64> {
        let mut rng = RngSpec::new(seed, 4).rng();
        DMatrix::from_fn(r, c, |_, _| complex_gaussian(&mut rng))
    }

    #[test]
    fn u_target_spans_target() {
        let t = rand_mat(8, 2, 1);
        let pr = PrecoderFitProblem::new(t.clone(), 3, 1.0).unwrap();
        assert_eq!(pr.u_target.shape(), (8, 3));
        let gram = pr.u_target.adjoint() * &pr.u_target;
        assert!(frob2(&(gram - identity::<f64>(3))).sqrt() < 1e-12);
        let proj = &pr.u_target * pr.u_target.adjoint() * &t;
        assert!(frob2(&(proj - &t)).sqrt() < 1e-12);
        let one = rand_mat(5, 1, 2);
        let pr = PrecoderFitProblem::new(one.clone(), 1, 1.0).unwrap();
        let cos = pr.u_target.column(0).dotc(&one.column(0)).norm() / one.norm();
        assert!((cos - 1.0).abs() < 1e-12);
        assert!(matches!(PrecoderFitProblem::new(DMatrix::<C>::zeros(3, 1), 1, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn unconstrained_gram_structure() {
        let pr = PrecoderFitProblem::new(rand_mat(6, 2, 3), 2, 1.0).unwrap();
        let v = svd(&rand_mat(2, 2, 4)).unwrap().u;
        let lam = [2.0, 0.5];
        let f = unconstrained_analog(&pr, &lam, &v);
        let l = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C::new(4.0, 0.0), C::new(0.25, 0.0)]));
        assert!(frob2(&(f.adjoint() * &f - v.adjoint() * l * &v)).sqrt() < 1e-12);
    }

    #[test]
    fn scalar_fit() {
        let pr = PrecoderFitProblem::new(DMatrix::from_element(1, 1, C::new(0.7, 0.0)), 1, 2.0).unwrap();
        let r = iterative_pp_fit(&pr, 50, 1e-12).unwrap();
        assert!((r.fa[(0, 0)] - C::new(1.0, 0.0)).norm() < 1e-14);
        assert!((r.fd[(0, 0)].norm_sqr() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn steering_target_is_fit_exactly() {
        let t: CMat<f64> = DMatrix::from_column_slice(16, 1, steering_vector::<f64>(16, 0.4).unwrap().as_slice()) * C::new(0.0, 0.3);
        let pr = PrecoderFitProblem::new(t.clone(), 1, 2.0).unwrap();
        let r = iterative_pp_fit(&pr, 50, 1e-14).unwrap();
        assert!(*r.objectives.last().unwrap() < 1e-20);
        let f = &r.fa * &r.fd;
        let scaled = &t * C::new((2.0 / frob2(&t)).sqrt(), 0.0);
        assert!(frob2(&(f - scaled)).sqrt() < 1e-12);
    }

    #[test]
    fn combiner_exact_representation() {
        // NrRF = Nr: the hybrid combiner can represent Ĝ exactly.
        let c = cfg(1, 4, 3, 3, 2, 1.0);
        let ch = gen_rayleigh(&c, RngSpec::new(6, 0));
        let f = vec![rand_mat(4, 2, 7)];
        let fit = mm_hybrid_combiner(&c, &ch, &f, 0, &ApproxOptions::default()).unwrap();
        assert!(*fit.objectives.last().unwrap() < 1e-16 + 1e-12 * fit.objectives[0]);
        let g_hat = mmse_full_digital_combiner(&c, &ch, &f, 0).unwrap();
        assert!(frob2(&(&fit.ga * &fit.gd - g_hat)).sqrt() < 1e-8);
    }

    #[test]
    fn scalar_combiner_phase_cancels() {
        let c = cfg(1, 1, 1, 1, 1, 1.0);
        let ch = ChannelSet::from_matrices(&c, vec![vec![DMatrix::from_element(1, 1, C::new(0.0, 2.0))]]).unwrap();
        let fit = mm_hybrid_combiner(&c, &ch, &[DMatrix::from_element(1, 1, C::new(1.0, 0.0))], 0, &ApproxOptions::default()).unwrap();
        assert!(*fit.objectives.last().unwrap() < 1e-20);
    }

    #[test]
    fn combiner_is_monotone_and_no_better_than_wiener() {
        let c = cfg(2, 16, 8, 2, 2, 10.0);
        let ch = gen_rayleigh(&c, RngSpec::new(8, 0));
        let f = vec![rand_mat(16, 2, 9), rand_mat(16, 2, 10)];
        let fit = mm_hybrid_combiner(&c, &ch, &f, 0, &ApproxOptions::default()).unwrap();
        assert!(fit.objectives.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0])));
        assert!(unit_modulus_defect(&fit.ga) < 1e-12);
        let g_hat = vec![mmse_full_digital_combiner(&c, &ch, &f, 0).unwrap(), mmse_full_digital_combiner(&c, &ch, &f, 1).unwrap()];
        let hyb = vec![&fit.ga * &fit.gd, g_hat[1].clone()];
        let e_opt = trace_re(&mse_list(&c, &ch, &f, &g_hat).unwrap()[0]);
        let e_hyb = trace_re(&mse_list(&c, &ch, &f, &hyb).unwrap()[0]);
        assert!(e_hyb >= e_opt - 1e-12);
    }

    #[test]
    fn bdzf_hybrid_is_feasible_with_exact_power() {
        let c = cfg(2, 64, 16, 4, 4, 10.0);
        let ch = gen_mmwave(&c, 10, RngSpec::new(11, 0)).unwrap();
        let (st, tr) = bdzf_hybrid(&c, &ch, &ApproxOptions::default()).unwrap();
        for k in 0..2 {
            assert!((tx_power(&st, k) - 10.0).abs() <= 1e-9 * 10.0);
            assert!(unit_modulus_defect(&st.pairs[k].fa) < 1e-12);
            assert!(unit_modulus_defect(&st.pairs[k].ga) < 1e-12);
            let o = &tr.precoder_fits[k].objectives;
            assert!(o.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0])));
        }
        assert!(sum_rate(&c, &ch, &st).unwrap().sum_rate > 0.0);
    }

    #[test]
    fn infeasible_bdzf_points_to_slnr() {
        let c = cfg(3, 8, 4, 2, 2, 1.0);
        let ch = gen_rayleigh(&c, RngSpec::new(12, 0));
        match bdzf_hybrid(&c, &ch, &ApproxOptions::default()) {
            Err(Error::Infeasible(msg)) => assert!(msg.contains("SLNR")),
            other => panic!("expected infeasibility, got {other:?}"),
        }
        assert!(slnr_hybrid(&c, &ch, &ApproxOptions::default()).is_ok());
    }

    #[test]
    fn variants_agree_without_interference() {
        let c = cfg(2, 32, 8, 2, 2, 10.0);
        let mut ch = gen_mmwave(&c, 4, RngSpec::new(13, 0)).unwrap();
        ch.h[0][1].fill(C::new(0.0, 0.0));
        ch.h[1][0].fill(C::new(0.0, 0.0));
        let o = ApproxOptions::default();
        let a = sum_rate(&c, &ch, &bdzf_hybrid(&c, &ch, &o).unwrap().0).unwrap().sum_rate;
        let b = sum_rate(&c, &ch, &slnr_hybrid(&c, &ch, &o).unwrap().0).unwrap().sum_rate;
        assert!((a - b).abs() <= 0.05 * a.max(b), "bdzf {a}, slnr {b}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn fit_is_monotone_with_exact_power(nt in 4usize..24, ns in 1usize..3, extra in 0usize..2, seed in 0u64..1000, p in 0.1f64..10.0) {
            let rf = (ns + extra).min(nt);
            let pr = PrecoderFitProblem::new(rand_mat(nt, ns, seed), rf, p).unwrap();
            let r = iterative_pp_fit(&pr, 100, 1e-10).unwrap();
            prop_assert!(r.objectives.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0])));
            prop_assert!(unit_modulus_defect(&r.fa) < 1e-12);
            prop_assert!((frob2(&(&r.fa * &r.fd)) - p).abs() <= 1e-9 * p);
        }
    }
}
