//! Experiment description: schemes, system dimensions, channel model, sweep
//! and solver settings. Every field has a default matching the reference
//! setup, so a config file only needs the values it changes.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use hybridmm::{InitMode, PairConfig, SolverOptions, SystemConfig, WmmseOptions};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    FdWmmse,
    FdBdzf,
    FdSlnr,
    MmAltOpt,
    TwoStagePp,
    HybridBdzf,
    HybridSlnr,
    PartialTx,
    PartialTxrx,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::FdWmmse,
        Scheme::FdBdzf,
        Scheme::FdSlnr,
        Scheme::MmAltOpt,
        Scheme::TwoStagePp,
        Scheme::HybridBdzf,
        Scheme::HybridSlnr,
        Scheme::PartialTx,
        Scheme::PartialTxrx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::FdWmmse => "fd-wmmse",
            Scheme::FdBdzf => "fd-bdzf",
            Scheme::FdSlnr => "fd-slnr",
            Scheme::MmAltOpt => "mm-alt-opt",
            Scheme::TwoStagePp => "two-stage-pp",
            Scheme::HybridBdzf => "hybrid-bdzf",
            Scheme::HybridSlnr => "hybrid-slnr",
            Scheme::PartialTx => "partial-tx",
            Scheme::PartialTxrx => "partial-txrx",
        }
    }

    /// Schemes that need the BD-ZF dimension condition.
    pub fn needs_null_space(self) -> bool {
        matches!(self, Scheme::FdBdzf | Scheme::HybridBdzf)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| SimError::InvalidSpec(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "snr_db")]
    SnrDb,
    #[serde(rename = "n_rf")]
    NRf,
    #[serde(rename = "n_t")]
    Nt,
    #[serde(rename = "k_users")]
    KUsers,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::NRf => "n_rf",
            SweepAxis::Nt => "n_t",
            SweepAxis::KUsers => "k_users",
        }
    }

    fn is_integral(self) -> bool {
        self != SweepAxis::SnrDb
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        [SweepAxis::SnrDb, SweepAxis::NRf, SweepAxis::Nt, SweepAxis::KUsers]
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| SimError::InvalidSpec(format!("unknown sweep axis `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChannelSpec {
    Rayleigh,
    Mmwave { paths: usize },
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec::Mmwave { paths: 10 }
    }
}

/// Identical pairs; `n_rf` applies to both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    pub k: usize,
    pub nt: usize,
    pub nr: usize,
    pub n_rf: usize,
    pub ns: usize,
    pub snr_db: f64,
    pub noise: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            k: 2,
            nt: 64,
            nr: 16,
            n_rf: 4,
            ns: 4,
            snr_db: 0.0,
            noise: 1.0,
        }
    }
}

impl SystemSpec {
    /// `SNR = P/σ²`, so the power is `σ²·10^(SNR/10)`.
    pub fn to_config(&self) -> hybridmm::Result<SystemConfig<f64>> {
        SystemConfig::uniform(
            self.k,
            PairConfig {
                nt: self.nt,
                nr: self.nr,
                nt_rf: self.n_rf,
                nr_rf: self.n_rf,
                ns: self.ns,
                power: self.noise * 10f64.powf(self.snr_db / 10.0),
                noise: self.noise,
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitSpec {
    TwoStagePp,
    RandomPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub eps_obj: f64,
    pub eps_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub init: InitSpec,
    pub wmmse_eps: f64,
    pub wmmse_max_iter: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let s = SolverOptions::<f64>::default();
        let w = WmmseOptions::<f64>::default();
        Self {
            eps_obj: s.eps_obj,
            eps_inner: s.eps_inner,
            max_outer: s.max_outer,
            max_inner: s.max_inner,
            init: InitSpec::TwoStagePp,
            wmmse_eps: w.eps_obj,
            wmmse_max_iter: w.max_iter,
        }
    }
}

impl SolverSpec {
    pub fn solver_options(&self) -> SolverOptions<f64> {
        SolverOptions {
            eps_obj: self.eps_obj,
            eps_inner: self.eps_inner,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            init_mode: match self.init {
                InitSpec::TwoStagePp => InitMode::TwoStagePP,
                InitSpec::RandomPhase => InitMode::RandomPhase,
            },
        }
    }

    pub fn wmmse_options(&self) -> WmmseOptions<f64> {
        WmmseOptions {
            eps_obj: self.wmmse_eps,
            max_iter: self.wmmse_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            axis: SweepAxis::SnrDb,
            values: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schemes: Vec<Scheme>,
    pub system: SystemSpec,
    pub channel: ChannelSpec,
    pub sweep: Sweep,
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverSpec,
    /// Record wall-clock times; off by default so outputs are reproducible.
    pub timing: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            system: SystemSpec::default(),
            channel: ChannelSpec::default(),
            sweep: Sweep::default(),
            trials: 100,
            seed: 1,
            solver: SolverSpec::default(),
            timing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// The reference setup with 100 trials.
    Full,
    /// The same setup with 25 trials.
    Desk,
}

impl FromStr for Preset {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            _ => Err(SimError::InvalidSpec(format!("unknown preset `{s}`"))),
        }
    }
}

impl ExperimentSpec {
    pub fn preset(p: Preset) -> Self {
        let trials = match p {
            Preset::Full => 100,
            Preset::Desk => 25,
        };
        Self {
            trials,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| SimError::Config {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment spec is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if self.schemes.is_empty() {
            return bad("no scheme selected".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.sweep.values.is_empty() {
            return bad("the sweep has no values".into());
        }
        if self.sweep.values.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("sweep values must be strictly increasing".into());
        }
        for &v in &self.sweep.values {
            if !v.is_finite() {
                return bad(format!("sweep value {v} is not finite"));
            }
            if self.sweep.axis.is_integral() && (v < 1.0 || v.fract() != 0.0) {
                return bad(format!("{} values must be positive integers, got {v}", self.sweep.axis));
            }
        }
        if let ChannelSpec::Mmwave { paths: 0 } = self.channel {
            return bad("mmWave channels need at least one path".into());
        }
        if !(self.system.noise > 0.0) {
            return bad("noise variance must be positive".into());
        }
        let s = &self.solver;
        if !(s.eps_obj > 0.0 && s.eps_inner > 0.0 && s.wmmse_eps > 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        if s.max_outer == 0 || s.max_inner == 0 || s.wmmse_max_iter == 0 {
            return bad("solver iteration caps must be positive".into());
        }
        Ok(())
    }

    /// System dimensions at one sweep value.
    pub fn system_at(&self, value: f64) -> SystemSpec {
        let mut s = self.system;
        match self.sweep.axis {
            SweepAxis::SnrDb => s.snr_db = value,
            SweepAxis::NRf => s.n_rf = value as usize,
            SweepAxis::Nt => s.nt = value as usize,
            SweepAxis::KUsers => s.k = value as usize,
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("fd-zf".parse::<Scheme>().is_err());
        assert_eq!("k_users".parse::<SweepAxis>().unwrap(), SweepAxis::KUsers);
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let spec = ExperimentSpec::default();
        let back = ExperimentSpec::from_toml(&spec.to_toml(), Path::new("x")).unwrap();
        assert_eq!(back, spec);
        let partial = ExperimentSpec::from_toml(
            "schemes = [\"mm-alt-opt\"]\ntrials = 3\n[channel]\nkind = \"rayleigh\"\n[sweep]\naxis = \"n_rf\"\nvalues = [4, 8]\n",
            Path::new("x"),
        )
        .unwrap();
        assert_eq!(partial.schemes, vec![Scheme::MmAltOpt]);
        assert_eq!(partial.channel, ChannelSpec::Rayleigh);
        assert_eq!(partial.system, SystemSpec::default());
        assert_eq!(partial.system_at(8.0).n_rf, 8);
        assert!(ExperimentSpec::from_toml("trails = 3", Path::new("x")).is_err());
    }

    #[test]
    fn validation() {
        let mut s = ExperimentSpec::default();
        assert!(s.validate().is_ok());
        s.sweep.values = vec![0.0, 0.0];
        assert!(s.validate().is_err());
        s.sweep = Sweep { axis: SweepAxis::Nt, values: vec![32.5] };
        assert!(s.validate().is_err());
        s.sweep.values = vec![32.0];
        s.trials = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn snr_sets_power() {
        let s = SystemSpec { snr_db: 10.0, noise: 2.0, ..Default::default() };
        let c = s.to_config().unwrap();
        assert!((c.pairs[0].power - 20.0).abs() < 1e-12);
    }
}
