//! Hybrid analog-digital transceiver design for multi-pair MIMO interference
//! channels: channel models, a unit-modulus MM engine, fully-digital
//! baselines, joint and approximate hybrid designs, and partially-connected
//! variants.
//!
//! Everything is generic over the real scalar `T: Real`; the `*64` aliases
//! below fix `T = f64`.

pub mod approx;
pub mod digital;
pub mod error;
pub mod joint;
pub mod linalg;
pub mod metrics;
pub mod mm;
pub mod model;
pub mod partial;
pub mod scalar;

pub use approx::{bdzf_hybrid, slnr_hybrid, ApproxOptions, ApproxTrace};
pub use digital::{bdzf_precoder, slnr_precoder, waterfill, wmmse_full_digital, FullDigitalState, WmmseOptions};
pub use error::{Error, Result};
pub use joint::{mm_alt_opt, two_stage_pp, AltOptTrace, Design, InitMode, SolverOptions};
pub use metrics::{rates, sum_rate, RateReport};
pub use mm::{mm_solve, HermitianOperator, MMTrace, UnitModulusQP};
pub use model::{
    gen_mmwave, gen_rayleigh, ChannelModel, ChannelSet, HybridPair, HybridState, PairConfig, RngSpec,
    SystemConfig,
};
pub use partial::{make_layout, partial_mm_alt_opt, PartialLayout};
pub use scalar::{CMat, CVec, Cplx, Real};

pub type CMat64 = CMat<f64>;
pub type CVec64 = CVec<f64>;
pub type SystemConfig64 = SystemConfig<f64>;
pub type PairConfig64 = PairConfig<f64>;
pub type ChannelSet64 = ChannelSet<f64>;
pub type HybridState64 = HybridState<f64>;
pub type SolverOptions64 = SolverOptions<f64>;
pub type ApproxOptions64 = ApproxOptions<f64>;
pub type WmmseOptions64 = WmmseOptions<f64>;
pub type RateReport64 = RateReport<f64>;
