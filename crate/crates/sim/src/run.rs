//! Monte-Carlo runner. At each sweep point every trial draws one channel set
//! from stream `trial` of the experiment seed and feeds it to all selected
//! schemes, so scheme comparisons are paired.

use std::time::Instant;

use hybridmm::approx::{bdzf_hybrid, slnr_hybrid, ApproxOptions};
use hybridmm::digital::{bdzf_precoder, slnr_precoder, with_mmse_combiners, wmmse_full_digital, FullDigitalState};
use hybridmm::joint::{mm_alt_opt, two_stage_pp};
use hybridmm::linalg::frob2;
use hybridmm::metrics::{rates, sum_rate};
use hybridmm::partial::{make_layout, partial_mm_alt_opt};
use hybridmm::{gen_mmwave, gen_rayleigh, CMat, ChannelSet, HybridState, RateReport, RngSpec, SystemConfig};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::spec::{ChannelSpec, ExperimentSpec, Scheme, SolverSpec};

/// Constraint residuals of an emitted design.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Feasibility {
    /// Largest `||x| − 1|` over the analog support entries.
    pub unit_modulus_defect: f64,
    /// Largest `max(0, ‖F_k‖²/P_k − 1)`.
    pub power_excess: f64,
    /// Smallest `‖F_k‖²/P_k`.
    pub power_ratio_min: f64,
    /// Largest magnitude outside the block-diagonal support (0 when fully
    /// connected).
    pub off_support_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub scheme: Scheme,
    pub sweep_axis: String,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    /// `None` for a skipped record.
    pub sum_rate_bits: Option<f64>,
    pub per_pair_rates: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub wall_time_ms: u64,
    pub skipped: Option<String>,
    pub feasibility: Option<Feasibility>,
}

#[derive(Debug, Clone)]
pub enum Design {
    Hybrid(HybridState<f64>),
    Digital(FullDigitalState<f64>),
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub design: Design,
    pub rates: RateReport<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Serial,
    Parallel,
}

/// Channel set of one trial.
pub fn draw_channels(
    channel: ChannelSpec,
    config: &SystemConfig<f64>,
    seed: u64,
    trial: usize,
) -> hybridmm::Result<ChannelSet<f64>> {
    let rng = RngSpec::new(seed, trial as u64);
    match channel {
        ChannelSpec::Rayleigh => Ok(gen_rayleigh(config, rng)),
        ChannelSpec::Mmwave { paths } => gen_mmwave(config, paths, rng),
    }
}

/// Up-front dimension checks for one scheme; `Err` carries the reason.
pub fn check_feasible(scheme: Scheme, config: &SystemConfig<f64>) -> std::result::Result<(), String> {
    config.validate().map_err(|e| e.to_string())?;
    if scheme.needs_null_space() {
        for (k, p) in config.pairs.iter().enumerate() {
            let leak: usize = config.pairs.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, q)| q.nr).sum();
            if p.nt < leak + p.ns {
                return Err(format!(
                    "BD-ZF needs Nt >= sum of other Nr + Ns for pair {k} ({} < {})",
                    p.nt,
                    leak + p.ns
                ));
            }
        }
    }
    Ok(())
}

/// Runs one scheme on one channel draw.
pub fn run_scheme(
    scheme: Scheme,
    config: &SystemConfig<f64>,
    channels: &ChannelSet<f64>,
    solver: &SolverSpec,
    rng: RngSpec,
) -> hybridmm::Result<TrialResult> {
    let opts = solver.solver_options();
    let hybrid = |(state, iterations, converged): (HybridState<f64>, usize, bool)| -> hybridmm::Result<TrialResult> {
        let rates = sum_rate(config, channels, &state)?;
        Ok(TrialResult {
            design: Design::Hybrid(state),
            rates,
            iterations,
            converged,
        })
    };
    let digital = |state: FullDigitalState<f64>, iterations: usize, converged: bool| -> hybridmm::Result<TrialResult> {
        let rates = rates(config, channels, &state.f, &state.g)?;
        Ok(TrialResult {
            design: Design::Digital(state),
            rates,
            iterations,
            converged,
        })
    };
    let closed_form = |f: fn(&SystemConfig<f64>, &ChannelSet<f64>, usize) -> hybridmm::Result<CMat<f64>>| {
        let pre = (0..config.k()).map(|k| f(config, channels, k)).collect::<hybridmm::Result<Vec<_>>>()?;
        digital(with_mmse_combiners(config, channels, pre)?, 0, true)
    };
    let approx = |(state, trace): (HybridState<f64>, hybridmm::approx::ApproxTrace<f64>)| {
        let iterations = trace.precoder_fits.iter().map(|f| f.cycles).max().unwrap_or(0);
        let converged = trace.precoder_fits.iter().all(|f| f.converged) && trace.combiner_fits.iter().all(|c| c.converged);
        hybrid((state, iterations, converged))
    };
    match scheme {
        Scheme::FdWmmse => {
            let (state, trace) = wmmse_full_digital(config, channels, None, solver.wmmse_options())?;
            digital(state, trace.iterations, trace.converged)
        }
        Scheme::FdBdzf => closed_form(bdzf_precoder),
        Scheme::FdSlnr => closed_form(slnr_precoder),
        Scheme::MmAltOpt => {
            let (s, t) = mm_alt_opt(config, channels, &opts, rng)?;
            hybrid((s, t.iterations, t.converged))
        }
        Scheme::TwoStagePp => {
            let (s, t) = two_stage_pp(config, channels, &opts)?;
            hybrid((s, t.iterations, t.converged))
        }
        Scheme::HybridBdzf => approx(bdzf_hybrid(config, channels, &ApproxOptions::default())?),
        Scheme::HybridSlnr => approx(slnr_hybrid(config, channels, &ApproxOptions::default())?),
        Scheme::PartialTx | Scheme::PartialTxrx => {
            let (s, t) = partial_mm_alt_opt(config, channels, &opts, scheme == Scheme::PartialTx, rng)?;
            hybrid((s, t.iterations, t.converged))
        }
    }
}

/// Constraint residuals of a design produced by `scheme`.
pub fn feasibility(scheme: Scheme, config: &SystemConfig<f64>, design: &Design) -> hybridmm::Result<Feasibility> {
    let mut out = Feasibility {
        power_ratio_min: f64::INFINITY,
        ..Default::default()
    };
    let mut power = |k: usize, f: &CMat<f64>| {
        let ratio = frob2(f) / config.pairs[k].power;
        out.power_excess = out.power_excess.max(ratio - 1.0);
        out.power_ratio_min = out.power_ratio_min.min(ratio);
    };
    match design {
        Design::Digital(s) => s.f.iter().enumerate().for_each(|(k, f)| power(k, f)),
        Design::Hybrid(s) => {
            s.pairs.iter().enumerate().for_each(|(k, p)| power(k, &p.precoder()));
            for (k, p) in s.pairs.iter().enumerate() {
                let layout = make_layout(config, k)?;
                let tx = matches!(scheme, Scheme::PartialTx | Scheme::PartialTxrx).then_some(&layout.tx[..]);
                let rx = (scheme == Scheme::PartialTxrx).then_some(&layout.rx[..]);
                for (m, blocks) in [(&p.fa, tx), (&p.ga, rx)] {
                    let (um, off) = support_residuals(m, blocks);
                    out.unit_modulus_defect = out.unit_modulus_defect.max(um);
                    out.off_support_max = out.off_support_max.max(off);
                }
            }
        }
    }
    out.power_excess = out.power_excess.max(0.0);
    Ok(out)
}

fn support_residuals(m: &CMat<f64>, blocks: Option<&[usize]>) -> (f64, f64) {
    let owner = blocks.map(hybridmm::joint::block_owner);
    let (mut um, mut off) = (0.0f64, 0.0f64);
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let a = m[(r, c)].norm();
            match &owner {
                Some(o) if o[r] != c => off = off.max(a),
                _ => um = um.max((a - 1.0).abs()),
            }
        }
    }
    (um, off)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<SimRecord>> {
    run_experiment_with(spec, Parallelism::Parallel)
}

pub fn run_experiment_with(spec: &ExperimentSpec, par: Parallelism) -> Result<Vec<SimRecord>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.sweep.values.len())
        .flat_map(|v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let run = |&(v, t): &(usize, usize)| run_point(spec, v, t);
    let mut records: Vec<SimRecord> = match par {
        Parallelism::Serial => jobs.iter().flat_map(run).collect(),
        Parallelism::Parallel => jobs.par_iter().flat_map_iter(run).collect(),
    };
    let order = |r: &SimRecord| {
        (
            spec.sweep.values.iter().position(|&x| x == r.sweep_value),
            spec.schemes.iter().position(|&s| s == r.scheme),
            r.trial,
        )
    };
    records.sort_by_key(order);
    if records.iter().all(|r| r.skipped.is_some()) {
        let reason = records.first().and_then(|r| r.skipped.clone()).unwrap_or_default();
        return Err(SimError::Infeasible(reason));
    }
    info!("{} records", records.len());
    Ok(records)
}

fn run_point(spec: &ExperimentSpec, v: usize, trial: usize) -> Vec<SimRecord> {
    let value = spec.sweep.values[v];
    let base = |scheme: Scheme| SimRecord {
        scheme,
        sweep_axis: spec.sweep.axis.name().to_string(),
        sweep_value: value,
        trial,
        seed: spec.seed,
        sum_rate_bits: None,
        per_pair_rates: Vec::new(),
        outer_iterations: 0,
        converged: false,
        wall_time_ms: 0,
        skipped: None,
        feasibility: None,
    };
    let skipped = |scheme: Scheme, reason: String| SimRecord {
        skipped: Some(reason),
        ..base(scheme)
    };
    let config = match spec.system_at(value).to_config().and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => return spec.schemes.iter().map(|&s| skipped(s, e.to_string())).collect(),
    };
    let channels = match draw_channels(spec.channel, &config, spec.seed, trial) {
        Ok(c) => c,
        Err(e) => return spec.schemes.iter().map(|&s| skipped(s, e.to_string())).collect(),
    };
    spec.schemes
        .iter()
        .map(|&scheme| {
            if let Err(reason) = check_feasible(scheme, &config) {
                return skipped(scheme, reason);
            }
            let start = Instant::now();
            let out = run_scheme(scheme, &config, &channels, &spec.solver, RngSpec::new(spec.seed, trial as u64))
                .and_then(|r| feasibility(scheme, &config, &r.design).map(|f| (r, f)));
            let elapsed = start.elapsed().as_millis() as u64;
            match out {
                Ok((r, f)) => SimRecord {
                    sum_rate_bits: Some(r.rates.sum_rate.max(0.0)),
                    per_pair_rates: r.rates.rates.clone(),
                    outer_iterations: r.iterations,
                    converged: r.converged,
                    wall_time_ms: if spec.timing { elapsed } else { 0 },
                    feasibility: Some(f),
                    ..base(scheme)
                },
                Err(e) => {
                    warn!("{scheme} at {}={value}, trial {trial}: {e}", spec.sweep.axis);
                    skipped(scheme, e.to_string())
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{Sweep, SweepAxis, SystemSpec};

    fn small(schemes: Vec<Scheme>) -> ExperimentSpec {
        ExperimentSpec {
            schemes,
            system: SystemSpec { k: 2, nt: 16, nr: 4, n_rf: 2, ns: 2, snr_db: 0.0, noise: 1.0 },
            channel: ChannelSpec::Mmwave { paths: 4 },
            sweep: Sweep { axis: SweepAxis::SnrDb, values: vec![0.0, 10.0] },
            trials: 2,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn cardinality() {
        let r = run_experiment(&small(vec![Scheme::FdSlnr])).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.iter().all(|x| x.sum_rate_bits.unwrap() >= 0.0));
    }

    #[test]
    fn paired_draws_and_serial_parallel_agreement() {
        let spec = small(Scheme::ALL.to_vec());
        let a = run_experiment_with(&spec, Parallelism::Serial).unwrap();
        let b = run_experiment_with(&spec, Parallelism::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 9 * 4);
        let c = SystemSpec { snr_db: 10.0, ..spec.system }.to_config().unwrap();
        let h1 = draw_channels(spec.channel, &c, 3, 1).unwrap();
        let h2 = draw_channels(spec.channel, &c, 3, 1).unwrap();
        assert_eq!(h1.h, h2.h);
    }

    #[test]
    fn infeasible_points_are_skipped() {
        let mut spec = small(vec![Scheme::FdBdzf, Scheme::FdSlnr]);
        spec.system.k = 5;
        let r = run_experiment(&spec).unwrap();
        assert!(r.iter().filter(|x| x.scheme == Scheme::FdBdzf).all(|x| x.skipped.is_some() && x.sum_rate_bits.is_none()));
        assert!(r.iter().filter(|x| x.scheme == Scheme::FdSlnr).all(|x| x.skipped.is_none()));
        spec.schemes = vec![Scheme::FdBdzf];
        assert!(matches!(run_experiment(&spec), Err(SimError::Infeasible(_))));
    }

    #[test]
    fn invalid_sweep_points_are_skipped() {
        let mut spec = small(vec![Scheme::MmAltOpt]);
        spec.sweep = Sweep { axis: SweepAxis::NRf, values: vec![1.0, 2.0] };
        let r = run_experiment(&spec).unwrap();
        assert!(r[..2].iter().all(|x| x.skipped.is_some()));
        assert!(r[2..].iter().all(|x| x.skipped.is_none()));
    }
}
