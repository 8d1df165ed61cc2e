//! Large-array probe: how fast cross channels decorrelate from the direct
//! channel, and how much the hybrid BD-ZF precoder leaks, as `Nt` grows.

use hybridmm::approx::{bdzf_hybrid, ApproxOptions};
use hybridmm::linalg::frob2;
use hybridmm::metrics::leakage_norm;
use hybridmm::{ChannelSet, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::run::draw_channels;
use crate::spec::{ChannelSpec, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub nt: usize,
    /// Median of `‖H_ik H_kkᴴ‖_F / Nt`, averaged over `i ≠ k`.
    pub correlation: f64,
    /// Median of the largest leakage `‖H_ik F_k‖_F` of the hybrid BD-ZF
    /// precoders.
    pub leakage: f64,
    /// Median of the largest `‖H_ik F_k‖_F / (‖H_ik‖_F ‖F_k‖_F)`, free of
    /// the channel gain that grows with the array.
    pub leakage_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub channel: ChannelSpec,
    pub nt_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Dimensions other than `Nt`.
    pub system: SystemSpec,
}

/// Probe at the reference dimensions (`K = 2`, `Nr = 16`, 4 RF chains,
/// 4 streams, 0 dB).
pub fn run_asymptotic_probe(channel: ChannelSpec, nt_list: &[usize], trials: usize, seed: u64) -> Result<Vec<ProbeRow>> {
    run_probe(&ProbeSpec {
        channel,
        nt_list: nt_list.to_vec(),
        trials,
        seed,
        system: SystemSpec::default(),
    })
}

pub fn run_probe(spec: &ProbeSpec) -> Result<Vec<ProbeRow>> {
    if spec.trials == 0 || spec.nt_list.is_empty() {
        return Err(SimError::InvalidSpec("the probe needs trials and antenna counts".into()));
    }
    if spec.nt_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::InvalidSpec("antenna counts must be strictly increasing".into()));
    }
    let core = |e: hybridmm::Error| SimError::InvalidSpec(e.to_string());
    spec.nt_list
        .iter()
        .map(|&nt| {
            let config = SystemSpec { nt, ..spec.system }.to_config().map_err(core)?;
            config.validate().map_err(core)?;
            let mut corr = Vec::with_capacity(spec.trials);
            let mut leak = Vec::with_capacity(spec.trials);
            let mut leak_norm = Vec::with_capacity(spec.trials);
            for trial in 0..spec.trials {
                let ch = draw_channels(spec.channel, &config, spec.seed, trial).map_err(core)?;
                corr.push(correlation_metric(&ch, nt));
                let (raw, rel) = if config.k() > 1 { hybrid_leakage(&config, &ch).map_err(core)? } else { (0.0, 0.0) };
                leak.push(raw);
                leak_norm.push(rel);
            }
            Ok(ProbeRow {
                nt,
                correlation: median(&mut corr),
                leakage: median(&mut leak),
                leakage_normalized: median(&mut leak_norm),
            })
        })
        .collect()
}

/// `‖H_ik H_kkᴴ‖_F / Nt` averaged over ordered pairs `i ≠ k`; 0 for `K = 1`.
pub fn correlation_metric(ch: &ChannelSet<f64>, nt: usize) -> f64 {
    let k = ch.k();
    if k < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for kk in 0..k {
        for i in (0..k).filter(|&i| i != kk) {
            total += frob2(&(ch.get(i, kk) * ch.get(kk, kk).adjoint())).sqrt() / nt as f64;
        }
    }
    total / (k * (k - 1)) as f64
}

/// Largest raw and normalized leakage of the hybrid BD-ZF precoders.
fn hybrid_leakage(config: &SystemConfig<f64>, ch: &ChannelSet<f64>) -> hybridmm::Result<(f64, f64)> {
    let (state, _) = bdzf_hybrid(config, ch, &ApproxOptions::default())?;
    let (mut raw, mut rel) = (0.0f64, 0.0f64);
    for k in 0..config.k() {
        let f = state.pairs[k].precoder();
        raw = raw.max(leakage_norm(ch, k, &f));
        let fnorm = frob2(&f).sqrt();
        for i in (0..config.k()).filter(|&i| i != k) {
            let h = ch.get(i, k);
            rel = rel.max(frob2(&(h * &f)).sqrt() / (frob2(h).sqrt() * fnorm));
        }
    }
    Ok((raw, rel))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
