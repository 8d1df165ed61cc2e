//! Sum rate, MSE matrices, SLNR, leakage and transmit power.
//!
//! Everything here works on composed precoders `F_k = F_A F_D` and combiners
//! `G_k = G_A G_D`, so rates are always evaluated on the exact matrices a
//! design returns.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{condition_hpd, frob2, identity, logdet_hpd, trace_re};
use crate::model::{ChannelSet, HybridState, SystemConfig};
use crate::scalar::{c_real, CMat, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport<T: Real> {
    /// Bits/s/Hz per pair.
    pub rates: Vec<T>,
    pub sum_rate: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport<T: Real> {
    pub e: Vec<CMat<T>>,
    /// `Σ_k Tr(W_k E_k) − ln det W_k − Ns_k`.
    pub wmmse_objective: T,
}

fn check_lists<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    precoders: &[CMat<T>],
    combiners: &[CMat<T>],
) -> Result<()> {
    let k = config.k();
    if channels.k() != k || precoders.len() != k || combiners.len() != k {
        return Err(Error::InvalidDimension(format!(
            "expected {k} pairs of channels, precoders and combiners"
        )));
    }
    for (i, p) in config.pairs.iter().enumerate() {
        if precoders[i].nrows() != p.nt || combiners[i].nrows() != p.nr {
            return Err(Error::InvalidDimension(format!(
                "pair {i}: precoder {:?} / combiner {:?} do not match Nt={} Nr={}",
                precoders[i].shape(),
                combiners[i].shape(),
                p.nt,
                p.nr
            )));
        }
        if precoders[i].ncols() != combiners[i].ncols() {
            return Err(Error::InvalidDimension(format!(
                "pair {i}: precoder and combiner stream counts differ"
            )));
        }
    }
    Ok(())
}

/// Received covariance at receiver `k`: `Σ_i H_ki F_i F_iᴴ H_kiᴴ + σ²I`.
pub fn rx_covariance<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    precoders: &[CMat<T>],
    k: usize,
) -> CMat<T> {
    let nr = config.pairs[k].nr;
    let mut r = identity::<T>(nr) * c_real(config.pairs[k].noise);
    for (i, f) in precoders.iter().enumerate() {
        let hf = channels.get(k, i) * f;
        r += &hf * hf.adjoint();
    }
    r
}

/// Per-pair rates `log₂ det(I + T_k T_kᴴ R_k⁻¹)` for composed matrices.
pub fn rates<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    precoders: &[CMat<T>],
    combiners: &[CMat<T>],
) -> Result<RateReport<T>> {
    check_lists(config, channels, precoders, combiners)?;
    let ln2 = T::lit(std::f64::consts::LN_2);
    let mut out = Vec::with_capacity(config.k());
    for (k, g) in combiners.iter().enumerate() {
        let gh = g.adjoint();
        let t = &gh * channels.get(k, k) * &precoders[k];
        if frob2(&t) == T::zero() {
            out.push(T::zero());
            continue;
        }
        let mut r = (&gh * g) * c_real(config.pairs[k].noise);
        for (i, f) in precoders.iter().enumerate() {
            if i != k {
                let x = &gh * channels.get(k, i) * f;
                r += &x * x.adjoint();
            }
        }
        let (r, _) = condition_hpd(&r, &format!("interference-plus-noise covariance of pair {k}"))?;
        let signal = &r + &t * t.adjoint();
        let rate = (logdet_hpd(&signal)? - logdet_hpd(&r)?) / ln2;
        out.push(rate.max(T::zero()));
    }
    let sum_rate = out.iter().fold(T::zero(), |a, &b| a + b);
    Ok(RateReport {
        rates: out,
        sum_rate,
    })
}

/// Sum rate of a hybrid state.
pub fn sum_rate<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &HybridState<T>,
) -> Result<RateReport<T>> {
    state.check_dims(config)?;
    rates(config, channels, &state.precoders(), &state.combiners())
}

/// MSE matrix of every pair for composed matrices.
pub fn mse_list<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    precoders: &[CMat<T>],
    combiners: &[CMat<T>],
) -> Result<Vec<CMat<T>>> {
    check_lists(config, channels, precoders, combiners)?;
    let mut out = Vec::with_capacity(config.k());
    for (k, g) in combiners.iter().enumerate() {
        let gh = g.adjoint();
        let ns = g.ncols();
        let mut e = (&gh * g) * c_real(config.pairs[k].noise);
        for (i, f) in precoders.iter().enumerate() {
            let mut x = &gh * channels.get(k, i) * f;
            if i == k {
                x -= identity::<T>(ns);
            }
            e += &x * x.adjoint();
        }
        out.push(crate::linalg::hermitian_part(&e));
    }
    Ok(out)
}

/// `Σ_k Tr(W_k E_k) − ln det W_k − Ns_k`.
pub fn wmmse_objective<T: Real>(e: &[CMat<T>], w: &[CMat<T>]) -> Result<T> {
    if e.len() != w.len() {
        return Err(Error::InvalidDimension("one weight per MSE matrix is required".into()));
    }
    let mut total = T::zero();
    for (ek, wk) in e.iter().zip(w) {
        total += trace_re(&(wk * ek)) - logdet_hpd(wk)? - T::count(ek.nrows());
    }
    Ok(total)
}

/// MSE matrices and WMMSE objective of a hybrid state (exact `F_A`).
pub fn mse_matrices<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &HybridState<T>,
) -> Result<MseReport<T>> {
    state.check_dims(config)?;
    let e = mse_list(config, channels, &state.precoders(), &state.combiners())?;
    let w: Vec<CMat<T>> = state.pairs.iter().map(|p| p.w.clone()).collect();
    let wmmse_objective = wmmse_objective(&e, &w)?;
    Ok(MseReport { e, wmmse_objective })
}

/// Signal-to-leakage-plus-noise ratio of precoder `f` at transmitter `k`:
/// `‖H_kk F‖² / (σ²·Ns + Σ_{i≠k} ‖H_ik F‖²)`, where `H_ik` carries
/// transmitter `k`'s signal to receiver `i`.
pub fn slnr<T: Real>(config: &SystemConfig<T>, channels: &ChannelSet<T>, k: usize, f: &CMat<T>) -> Result<T> {
    if f.nrows() != config.pairs[k].nt {
        return Err(Error::InvalidDimension(format!(
            "precoder has {} rows, Nt = {}",
            f.nrows(),
            config.pairs[k].nt
        )));
    }
    let signal = frob2(&(channels.get(k, k) * f));
    let mut leak = config.pairs[k].noise * T::count(f.ncols());
    for i in (0..config.k()).filter(|&i| i != k) {
        leak += frob2(&(channels.get(i, k) * f));
    }
    Ok(signal / leak)
}

/// `max_{i≠k} ‖H_ik F‖_F`; zero when there is a single pair.
pub fn leakage_norm<T: Real>(channels: &ChannelSet<T>, k: usize, f: &CMat<T>) -> T {
    (0..channels.k())
        .filter(|&i| i != k)
        .map(|i| frob2(&(channels.get(i, k) * f)).sqrt())
        .fold(T::zero(), |a, b| a.max(b))
}

/// `Tr(F_A F_D F_Dᴴ F_Aᴴ)`.
pub fn tx_power<T: Real>(state: &HybridState<T>, k: usize) -> T {
    frob2(&state.pairs[k].precoder())
}

/// Total power of a list of precoders, one entry per pair.
pub fn powers<T: Real>(precoders: &[CMat<T>]) -> Vec<T> {
    precoders.iter().map(frob2).collect()
}

/// Zero matrix helper used by callers building placeholder states.
pub fn zeros<T: Real>(rows: usize, cols: usize) -> CMat<T> {
    DMatrix::zeros(rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gen_rayleigh, HybridPair, PairConfig, RngSpec};
    use nalgebra::Complex;

    type C = Complex<f64>;

    fn scalar_cfg(k: usize) -> SystemConfig<f64> {
        SystemConfig::uniform(
            k,
            PairConfig {
                nt: 1,
                nr: 1,
                nt_rf: 1,
                nr_rf: 1,
                ns: 1,
                power: 1.0,
                noise: 1.0,
            },
        )
        .unwrap()
    }

    fn s(x: f64) -> CMat<f64> {
        DMatrix::from_element(1, 1, C::new(x, 0.0))
    }

    fn scalar_state(k: usize, fd: f64, gd: f64) -> HybridState<f64> {
        HybridState {
            pairs: (0..k)
                .map(|_| HybridPair {
                    fa: s(1.0),
                    fd: s(fd),
                    ga: s(1.0),
                    gd: s(gd),
                    w: s(1.0),
                })
                .collect(),
        }
    }

    fn scalar_channels(k: usize, cross: f64) -> ChannelSet<f64> {
        let h = (0..k)
            .map(|a| (0..k).map(|b| s(if a == b { 1.0 } else { cross })).collect())
            .collect();
        ChannelSet::from_matrices(&scalar_cfg(k), h).unwrap()
    }

    #[test]
    fn siso_rates() {
        let r = sum_rate(&scalar_cfg(1), &scalar_channels(1, 0.0), &scalar_state(1, 1.0, 1.0)).unwrap();
        assert!((r.sum_rate - 1.0).abs() < 1e-14);
        let r = sum_rate(&scalar_cfg(2), &scalar_channels(2, 0.0), &scalar_state(2, 1.0, 1.0)).unwrap();
        assert!((r.sum_rate - 2.0).abs() < 1e-14);
        let r = sum_rate(&scalar_cfg(2), &scalar_channels(2, 0.0), &scalar_state(2, 0.0, 1.0)).unwrap();
        assert_eq!(r.sum_rate, 0.0);
    }

    #[test]
    fn scalar_mse_cases() {
        let cfg = scalar_cfg(1);
        let m = mse_matrices(&cfg, &scalar_channels(1, 0.0), &scalar_state(1, 1.0, 0.5)).unwrap();
        assert!((m.e[0][(0, 0)].re - 0.5).abs() < 1e-15);
        // objective with W = 1: Tr(E) − 0 − 1
        assert!((m.wmmse_objective + 0.5).abs() < 1e-15);
        let mut noiseless = cfg.clone();
        noiseless.pairs[0].noise = 0.0;
        let e = mse_list(&noiseless, &scalar_channels(1, 0.0), &[s(1.0)], &[s(1.0)]).unwrap();
        assert!(e[0][(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn scalar_slnr_and_leakage() {
        let cfg = scalar_cfg(2);
        assert!((slnr(&cfg, &scalar_channels(2, 1.0), 0, &s(1.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!((slnr(&cfg, &scalar_channels(2, 0.0), 0, &s(1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(leakage_norm(&scalar_channels(1, 0.0), 0, &s(1.0)), 0.0);
        assert!((leakage_norm(&scalar_channels(2, 3.0), 1, &s(1.0)) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn power_accounting() {
        let mut st = scalar_state(1, 0.0, 1.0);
        assert_eq!(tx_power(&st, 0), 0.0);
        st.pairs[0].fa = DMatrix::from_element(7, 1, C::new(1.0, 0.0));
        st.pairs[0].fd = s(1.0);
        assert!((tx_power(&st, 0) - 7.0).abs() < 1e-15);
    }

    fn random_problem(seed: u64) -> (SystemConfig<f64>, ChannelSet<f64>, Vec<CMat<f64>>, Vec<CMat<f64>>) {
        let cfg = SystemConfig::uniform(
            3,
            PairConfig {
                nt: 6,
                nr: 4,
                nt_rf: 3,
                nr_rf: 3,
                ns: 2,
                power: 2.0,
                noise: 0.5,
            },
        )
        .unwrap();
        let ch = gen_rayleigh(&cfg, RngSpec::new(seed, 0));
        let mut rng = RngSpec::new(seed, 1).rng();
        let f = (0..3)
            .map(|_| DMatrix::from_fn(6, 2, |_, _| crate::model::complex_gaussian(&mut rng)))
            .collect();
        let g = (0..3)
            .map(|_| DMatrix::from_fn(4, 2, |_, _| crate::model::complex_gaussian(&mut rng)))
            .collect();
        (cfg, ch, f, g)
    }

    #[test]
    fn rotation_invariance() {
        let (cfg, ch, f, g) = random_problem(1);
        let base = rates(&cfg, &ch, &f, &g).unwrap().sum_rate;
        let th = 0.7f64;
        let u = DMatrix::from_row_slice(
            2,
            2,
            &[C::new(th.cos(), 0.0), C::new(0.0, th.sin()), C::new(0.0, th.sin()), C::new(th.cos(), 0.0)],
        );
        let fr: Vec<_> = f.iter().map(|m| m * &u).collect();
        let rot = rates(&cfg, &ch, &fr, &g).unwrap().sum_rate;
        assert!((rot - base).abs() <= 1e-9 * base);
    }

    #[test]
    fn snr_scaling_invariance() {
        let (cfg, ch, f, g) = random_problem(2);
        let base = rates(&cfg, &ch, &f, &g).unwrap().sum_rate;
        let mut scaled = cfg.clone();
        for p in &mut scaled.pairs {
            p.noise *= 3.0;
            p.power *= 3.0;
        }
        let fs: Vec<_> = f.iter().map(|m| m * C::new(3f64.sqrt(), 0.0)).collect();
        let r = rates(&scaled, &ch, &fs, &g).unwrap().sum_rate;
        assert!((r - base).abs() <= 1e-9 * base);
    }

    #[test]
    fn objective_at_inverse_weights_is_logdet() {
        let (cfg, ch, f, g) = random_problem(3);
        let e = mse_list(&cfg, &ch, &f, &g).unwrap();
        let w: Vec<_> = e.iter().map(|m| crate::linalg::hpd_inverse(m, "E").unwrap()).collect();
        let obj = wmmse_objective(&e, &w).unwrap();
        let direct: f64 = e.iter().map(|m| logdet_hpd(m).unwrap()).sum();
        assert!((obj - direct).abs() < 1e-8);
        for m in &e {
            assert!(crate::linalg::herm_eigenvalues(m).iter().all(|&x| x > -1e-10));
        }
    }

    #[test]
    fn mismatched_lists_are_rejected() {
        let (cfg, ch, f, g) = random_problem(4);
        assert!(rates(&cfg, &ch, &f[..2], &g).is_err());
    }
}
