//! Joint hybrid WMMSE design by alternating optimization with MM analog
//! updates, and the phase-projection two-stage design.
//!
//! The solver works on the substituted digital precoder `F̃_D` and models the
//! effective precoder of pair `k` as `X_k = F_A · diag(s) · F̃_D`. For fully
//! connected arrays `s = 1/√Nt` (the large-array approximation
//! `F_AᴴF_A ≈ Nt·I`); the partially-connected designs use `s_j = 1/√|block j|`,
//! which is exact. While iterating, the `fd` field of [`HybridPair`] holds `F̃_D`;
//! [`Design::finalize`] maps it back to `F_D`.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};

use crate::digital::{power_constrained_ls, wiener_combiner};
use crate::error::{Error, Result};
use crate::linalg::{
    herm_inv_sqrt, hermitian_part, hpd_inverse, identity, phase_project, svd, unvec, vec_of,
};
use crate::metrics::{mse_list, mse_matrices, rx_covariance, wmmse_objective};
use crate::mm::{mm_solve, HermitianOperator, MMTrace, UnitModulusQP};
use crate::model::{random_unit_modulus, ChannelSet, HybridPair, HybridState, RngSpec, SystemConfig};
use crate::scalar::{c_real, CMat, Real};

/// Seed salt for random analog initialisation.
const INIT_SALT: u64 = 0x5EED_1A17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    RandomPhase,
    TwoStagePP,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T: Real> {
    /// Relative tolerance on the outer objective.
    pub eps_obj: T,
    /// Relative tolerance of the inner MM loops. The MM objective carries no
    /// constant offset, so this must be much tighter than `eps_obj` for the
    /// analog updates to make real progress.
    pub eps_inner: T,
    pub max_outer: usize,
    pub max_inner: usize,
    pub init_mode: InitMode,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            eps_obj: T::lit(1e-4),
            eps_inner: T::lit(1e-8),
            max_outer: 100,
            max_inner: 50,
            init_mode: InitMode::TwoStagePP,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_obj > T::zero()) || !(self.eps_inner > T::zero()) || self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidInput(
                "solver options need eps_obj > 0 and iteration caps >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalogBlock {
    Precoder,
    Combiner,
}

/// One inner MM run.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerRecord<T: Real> {
    pub outer: usize,
    pub pair: usize,
    pub block: AnalogBlock,
    pub trace: MMTrace<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltOptTrace<T: Real> {
    /// Solver objective at the initial point and after every outer sweep.
    pub outer_objectives: Vec<T>,
    /// Solver objective after every block update.
    pub block_objectives: Vec<T>,
    pub inner: Vec<InnerRecord<T>>,
    pub iterations: usize,
    pub converged: bool,
    /// WMMSE objective of the returned state evaluated with the exact analog
    /// matrices; differs from the last solver objective by the
    /// large-array approximation.
    pub exact_objective: T,
}

impl<T: Real> AltOptTrace<T> {
    fn new() -> Self {
        Self {
            outer_objectives: Vec::new(),
            block_objectives: Vec::new(),
            inner: Vec::new(),
            iterations: 0,
            converged: false,
            exact_objective: T::zero(),
        }
    }

    /// Whether the block-level objective never rose by more than `tol`
    /// relative.
    pub fn is_monotone(&self, tol: T) -> bool {
        let ok = |v: &[T]| v.windows(2).all(|w| w[1] <= w[0] + tol * (T::one() + w[0].abs()));
        ok(&self.outer_objectives) && ok(&self.block_objectives)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutputMap {
    /// `F_D = (F_AᴴF_A)^{-1/2} F̃_D`.
    GramRoot,
    /// `F_D = diag(s) F̃_D`, exact when the Gram is diagonal.
    Scale,
}

/// How the analog stages are parametrized.
#[derive(Debug, Clone, PartialEq)]
pub struct Design<T: Real> {
    tx_scale: Vec<Vec<T>>,
    tx_blocks: Vec<Option<Vec<usize>>>,
    rx_blocks: Vec<Option<Vec<usize>>>,
    output: OutputMap,
}

impl<T: Real> Design<T> {
    /// Fully connected transmitters and receivers with `F̃_A = F_A/√Nt`.
    pub fn fully_connected(config: &SystemConfig<T>) -> Self {
        let k = config.k();
        Self {
            tx_scale: config
                .pairs
                .iter()
                .map(|p| vec![T::one() / T::count(p.nt).sqrt(); p.nt_rf])
                .collect(),
            tx_blocks: vec![None; k],
            rx_blocks: vec![None; k],
            output: OutputMap::GramRoot,
        }
    }

    /// Block-diagonal analog precoders (and combiners when `rx_blocks` are
    /// given) with subarray sizes per RF chain.
    pub fn partially_connected(
        config: &SystemConfig<T>,
        tx_blocks: Vec<Vec<usize>>,
        rx_blocks: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let k = config.k();
        if tx_blocks.len() != k || rx_blocks.as_ref().is_some_and(|r| r.len() != k) {
            return Err(Error::InvalidDimension("one layout per pair is required".into()));
        }
        for (p, b) in config.pairs.iter().zip(&tx_blocks) {
            check_blocks(b, p.nt, p.nt_rf)?;
        }
        if let Some(rx) = &rx_blocks {
            for (p, b) in config.pairs.iter().zip(rx) {
                check_blocks(b, p.nr, p.nr_rf)?;
            }
        }
        let tx_scale = tx_blocks
            .iter()
            .map(|b| b.iter().map(|&n| T::one() / T::count(n).sqrt()).collect())
            .collect();
        Ok(Self {
            tx_scale,
            tx_blocks: tx_blocks.into_iter().map(Some).collect(),
            rx_blocks: match rx_blocks {
                Some(rx) => rx.into_iter().map(Some).collect(),
                None => vec![None; k],
            },
            output: OutputMap::Scale,
        })
    }

    pub fn tx_blocks(&self, k: usize) -> Option<&[usize]> {
        self.tx_blocks[k].as_deref()
    }

    pub fn rx_blocks(&self, k: usize) -> Option<&[usize]> {
        self.rx_blocks[k].as_deref()
    }

    /// `F_A · diag(s)`.
    fn scaled_fa(&self, k: usize, fa: &CMat<T>) -> CMat<T> {
        let mut out = fa.clone();
        for (j, &s) in self.tx_scale[k].iter().enumerate() {
            out.column_mut(j).iter_mut().for_each(|z| *z *= c_real(s));
        }
        out
    }

    /// `diag(s) · F̃_D`.
    fn scaled_fd(&self, k: usize, fdt: &CMat<T>) -> CMat<T> {
        let mut out = fdt.clone();
        for (j, &s) in self.tx_scale[k].iter().enumerate() {
            out.row_mut(j).iter_mut().for_each(|z| *z *= c_real(s));
        }
        out
    }

    /// Effective precoders `X_k` as the solver models them.
    pub fn effective_precoders(&self, state: &HybridState<T>) -> Vec<CMat<T>> {
        state
            .pairs
            .iter()
            .enumerate()
            .map(|(k, p)| &p.fa * self.scaled_fd(k, &p.fd))
            .collect()
    }

    /// Maps a solver iterate (`fd` = `F̃_D`) to a reportable state.
    pub fn finalize(&self, state: &HybridState<T>) -> HybridState<T> {
        let pairs = state
            .pairs
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let fd = match self.output {
                    OutputMap::Scale => self.scaled_fd(k, &p.fd),
                    OutputMap::GramRoot => {
                        let (root, deficient) = herm_inv_sqrt(&(p.fa.adjoint() * &p.fa));
                        if deficient {
                            warn!("pair {k}: analog precoder Gram is rank deficient, using pseudo-inverse root");
                        }
                        root * &p.fd
                    }
                };
                HybridPair { fd, ..p.clone() }
            })
            .collect();
        HybridState { pairs }
    }
}

fn check_blocks(blocks: &[usize], n: usize, n_rf: usize) -> Result<()> {
    if blocks.len() != n_rf || blocks.contains(&0) || blocks.iter().sum::<usize>() != n {
        return Err(Error::InvalidDimension(format!(
            "subarray sizes {blocks:?} must be {n_rf} positive values summing to {n}"
        )));
    }
    Ok(())
}

/// Solver objective `Σ_k Tr(W_k E_k) − ln det W_k − Ns_k` with effective
/// precoders `X_k`.
pub fn solver_objective<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &HybridState<T>,
    design: &Design<T>,
) -> Result<T> {
    let x = design.effective_precoders(state);
    let g = state.combiners();
    let e = mse_list(config, channels, &x, &g)?;
    let w: Vec<CMat<T>> = state.pairs.iter().map(|p| p.w.clone()).collect();
    wmmse_objective(&e, &w)
}

/// `G_D` update: Wiener combiner for the current effective precoders.
pub fn update_digital_combiner_with<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &mut HybridState<T>,
    design: &Design<T>,
) -> Result<()> {
    let x = design.effective_precoders(state);
    for k in 0..config.k() {
        let r = rx_covariance(config, channels, &x, k);
        let hx = channels.get(k, k) * &x[k];
        state.pairs[k].gd = wiener_combiner(&r, &state.pairs[k].ga, &hx)?;
    }
    Ok(())
}

/// `W = E⁻¹`.
pub fn update_weights_with<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &mut HybridState<T>,
    design: &Design<T>,
) -> Result<()> {
    let x = design.effective_precoders(state);
    let e = mse_list(config, channels, &x, &state.combiners())?;
    for (p, ek) in state.pairs.iter_mut().zip(&e) {
        p.w = hpd_inverse(ek, "MSE matrix")?;
    }
    Ok(())
}

/// `F̃_D` update: power-constrained weighted least squares per transmitter.
pub fn update_digital_precoder_with<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &mut HybridState<T>,
    design: &Design<T>,
) -> Result<()> {
    let kk = config.k();
    let g: Vec<CMat<T>> = state.combiners();
    for k in 0..kk {
        let fas = design.scaled_fa(k, &state.pairs[k].fa);
        let n = fas.ncols();
        let mut m = DMatrix::zeros(n, n);
        let mut rhs = DMatrix::zeros(n, config.pairs[k].ns);
        for i in 0..kk {
            let l = g[i].adjoint() * channels.get(i, k) * &fas;
            let lh = l.adjoint();
            m += &lh * &state.pairs[i].w * &l;
            if i == k {
                rhs = lh * &state.pairs[k].w;
            }
        }
        state.pairs[k].fd = power_constrained_ls(&hermitian_part(&m), &rhs, config.pairs[k].power)?.0;
    }
    Ok(())
}

/// Restricts a Kronecker-structured QP to a block-diagonal support: entry
/// `r` of the reduced variable is element `(r, c(r))` of the matrix variable,
/// where `c(r)` is the block containing row `r`.
pub fn restrict_to_blocks<T: Real>(
    left: &CMat<T>,
    right: &CMat<T>,
    linear: &CMat<T>,
    blocks: &[usize],
) -> (CMat<T>, DVector<nalgebra::Complex<T>>) {
    let owner = block_owner(blocks);
    let n = owner.len();
    // (Cᵀ ⊗ B)[(r1, c1), (r2, c2)] = C[c2, c1]·B[r1, r2] with left = Cᵀ.
    let a_hat = DMatrix::from_fn(n, n, |r1, r2| left[(owner[r1], owner[r2])] * right[(r1, r2)]);
    let a_vec = DVector::from_fn(n, |r, _| linear[(r, owner[r])]);
    (a_hat, a_vec)
}

/// Column (RF chain) owning each row of a block-diagonal analog matrix.
pub fn block_owner(blocks: &[usize]) -> Vec<usize> {
    blocks
        .iter()
        .enumerate()
        .flat_map(|(j, &n)| std::iter::repeat_n(j, n))
        .collect()
}

/// Support entries of a block-diagonal matrix, stacked block by block.
pub fn gather_support<T: Real>(m: &CMat<T>, blocks: &[usize]) -> DVector<nalgebra::Complex<T>> {
    let owner = block_owner(blocks);
    DVector::from_fn(owner.len(), |r, _| m[(r, owner[r])])
}

/// Inverse of [`gather_support`]; off-support entries are exactly zero.
pub fn scatter_support<T: Real>(x: &DVector<nalgebra::Complex<T>>, blocks: &[usize]) -> CMat<T> {
    let owner = block_owner(blocks);
    let mut m = DMatrix::zeros(owner.len(), blocks.len());
    for (r, &c) in owner.iter().enumerate() {
        m[(r, c)] = x[r];
    }
    m
}

fn solve_analog<T: Real>(
    left: CMat<T>,
    right: CMat<T>,
    linear: CMat<T>,
    current: &CMat<T>,
    blocks: Option<&[usize]>,
    opts: &SolverOptions<T>,
) -> Result<(CMat<T>, MMTrace<T>)> {
    let left = hermitian_part(&left);
    let right = hermitian_part(&right);
    match blocks {
        None => {
            let qp = UnitModulusQP::new(HermitianOperator::Kronecker { left, right }, vec_of(&linear))?;
            let (x, tr) = mm_solve(&qp, &vec_of(current), opts.eps_inner, opts.max_inner)?;
            Ok((unvec(&x, current.nrows(), current.ncols()), tr))
        }
        Some(b) => {
            let (a_hat, a_vec) = restrict_to_blocks(&left, &right, &linear, b);
            let qp = UnitModulusQP::dense(hermitian_part(&a_hat), a_vec)?.with_blocks(b.to_vec())?;
            let (x, tr) = mm_solve(&qp, &gather_support(current, b), opts.eps_inner, opts.max_inner)?;
            Ok((scatter_support(&x, b), tr))
        }
    }
}

/// QP data `(left, right, linear)` of the analog precoder of pair `k`:
/// objective `vec(F_A)ᴴ(left ⊗ right)vec(F_A) − 2Re{vec(linear)ᴴvec(F_A)}`.
pub fn analog_precoder_terms<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &HybridState<T>,
    design: &Design<T>,
    k: usize,
) -> (CMat<T>, CMat<T>, CMat<T>) {
    let y = design.scaled_fd(k, &state.pairs[k].fd);
    let nt = config.pairs[k].nt;
    let mut b = DMatrix::zeros(nt, nt);
    let mut lin = DMatrix::zeros(nt, y.nrows());
    for i in 0..config.k() {
        let mik = channels.get(i, k).adjoint() * state.pairs[i].combiner();
        let mw = &mik * &state.pairs[i].w;
        if i == k {
            lin = &mw * y.adjoint();
        }
        b += mw * mik.adjoint();
    }
    let left = (&y * y.adjoint()).transpose();
    (left, b, lin)
}

/// QP data of the analog combiner of pair `k`.
pub fn analog_combiner_terms<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &HybridState<T>,
    design: &Design<T>,
    k: usize,
) -> (CMat<T>, CMat<T>, CMat<T>) {
    let x = design.effective_precoders(state);
    let s = rx_covariance(config, channels, &x, k);
    let p = &state.pairs[k];
    let left = (&p.gd * &p.w * p.gd.adjoint()).transpose();
    let lin = channels.get(k, k) * &x[k] * &p.w * p.gd.adjoint();
    (left, s, lin)
}

/// `F_A` update by MM, independently per transmitter.
pub fn update_analog_precoder_with<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &mut HybridState<T>,
    design: &Design<T>,
    opts: &SolverOptions<T>,
) -> Result<Vec<MMTrace<T>>> {
    let mut traces = Vec::with_capacity(config.k());
    for k in 0..config.k() {
        let (left, right, lin) = analog_precoder_terms(config, channels, state, design, k);
        let (fa, tr) = solve_analog(left, right, lin, &state.pairs[k].fa, design.tx_blocks(k), opts)?;
        state.pairs[k].fa = fa;
        traces.push(tr);
    }
    Ok(traces)
}

/// `G_A` update by MM, independently per receiver.
pub fn update_analog_combiner_with<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &mut HybridState<T>,
    design: &Design<T>,
    opts: &SolverOptions<T>,
) -> Result<Vec<MMTrace<T>>> {
    let mut traces = Vec::with_capacity(config.k());
    for k in 0..config.k() {
        let (left, right, lin) = analog_combiner_terms(config, channels, state, design, k);
        let (ga, tr) = solve_analog(left, right, lin, &state.pairs[k].ga, design.rx_blocks(k), opts)?;
        state.pairs[k].ga = ga;
        traces.push(tr);
    }
    Ok(traces)
}

/// Fully-connected wrappers of the five block updates.
pub fn update_weights<T: Real>(config: &SystemConfig<T>, channels: &ChannelSet<T>, state: &mut HybridState<T>) -> Result<()> {
    update_weights_with(config, channels, state, &Design::fully_connected(config))
}

pub fn update_digital_combiner<T: Real>(config: &SystemConfig<T>, channels: &ChannelSet<T>, state: &mut HybridState<T>) -> Result<()> {
    update_digital_combiner_with(config, channels, state, &Design::fully_connected(config))
}

pub fn update_digital_precoder<T: Real>(config: &SystemConfig<T>, channels: &ChannelSet<T>, state: &mut HybridState<T>) -> Result<()> {
    update_digital_precoder_with(config, channels, state, &Design::fully_connected(config))
}

pub fn update_analog_precoder<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &mut HybridState<T>,
    opts: &SolverOptions<T>,
) -> Result<Vec<MMTrace<T>>> {
    update_analog_precoder_with(config, channels, state, &Design::fully_connected(config), opts)
}

pub fn update_analog_combiner<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &mut HybridState<T>,
    opts: &SolverOptions<T>,
) -> Result<Vec<MMTrace<T>>> {
    update_analog_combiner_with(config, channels, state, &Design::fully_connected(config), opts)
}

/// Phase projection of the leading singular vectors, restricted to a block
/// support when one is given.
fn projected_init<T: Real>(basis: &CMat<T>, n_rf: usize, blocks: Option<&[usize]>) -> CMat<T> {
    let n = basis.nrows();
    let mut unc = DMatrix::zeros(n, n_rf);
    let cols = n_rf.min(basis.ncols());
    unc.columns_mut(0, cols).copy_from(&basis.columns(0, cols));
    match blocks {
        None => phase_project(&unc),
        Some(b) => {
            let owner = block_owner(b);
            // Each subarray takes the phases of the matching column.
            let x = DVector::from_fn(n, |r, _| unc[(r, owner[r])]);
            scatter_support(&x.map(crate::linalg::unit_phase), b)
        }
    }
}

/// Initial solver iterate: analog stages from `mode`, `F̃_D` from the leading
/// right singular vectors of the effective channel at full power, `W = I`.
pub fn initial_state<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    design: &Design<T>,
    mode: InitMode,
    rng: RngSpec,
) -> Result<HybridState<T>> {
    let mut gen = rng.derive(INIT_SALT).rng();
    let mut pairs = Vec::with_capacity(config.k());
    for (k, p) in config.pairs.iter().enumerate() {
        let (fa, ga) = match mode {
            InitMode::TwoStagePP => {
                let d = svd(channels.get(k, k))?;
                (
                    projected_init(&d.v, p.nt_rf, design.tx_blocks(k)),
                    projected_init(&d.u, p.nr_rf, design.rx_blocks(k)),
                )
            }
            InitMode::RandomPhase => {
                let fa = random_unit_modulus(p.nt, p.nt_rf, &mut gen);
                let ga = random_unit_modulus(p.nr, p.nr_rf, &mut gen);
                let mask = |m: CMat<T>, b: Option<&[usize]>| match b {
                    None => m,
                    Some(b) => scatter_support(&gather_support(&m, b), b),
                };
                (mask(fa, design.tx_blocks(k)), mask(ga, design.rx_blocks(k)))
            }
        };
        let eff = ga.adjoint() * channels.get(k, k) * design.scaled_fa(k, &fa);
        let v = svd(&eff)?.v;
        let mut fd = DMatrix::zeros(p.nt_rf, p.ns);
        let cols = p.ns.min(v.ncols());
        fd.columns_mut(0, cols).copy_from(&v.columns(0, cols));
        let fd = fd * c_real((p.power / T::count(p.ns)).sqrt());
        pairs.push(HybridPair {
            fa,
            fd,
            ga,
            gd: DMatrix::zeros(p.nr_rf, p.ns),
            w: identity(p.ns),
        });
    }
    Ok(HybridState { pairs })
}

fn record<T: Real>(
    trace: &mut AltOptTrace<T>,
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    state: &HybridState<T>,
    design: &Design<T>,
) -> Result<T> {
    let f = solver_objective(config, channels, state, design)?;
    trace.block_objectives.push(f);
    Ok(f)
}

/// Alternating optimization from a given iterate. With `analog` false only
/// the digital blocks and weights are updated.
pub fn alternate<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    mut state: HybridState<T>,
    design: &Design<T>,
    opts: &SolverOptions<T>,
    analog: bool,
) -> Result<(HybridState<T>, AltOptTrace<T>)> {
    opts.validate()?;
    channels.validate(config)?;
    for (k, p) in config.pairs.iter().enumerate() {
        if design.output == OutputMap::GramRoot && p.nt < 16 {
            warn!("pair {k}: Nt = {} is small for the large-array approximation", p.nt);
        }
    }
    let mut trace = AltOptTrace::new();
    let mut prev = solver_objective(config, channels, &state, design)?;
    trace.outer_objectives.push(prev);
    trace.block_objectives.push(prev);
    for outer in 0..opts.max_outer {
        update_digital_combiner_with(config, channels, &mut state, design)?;
        record(&mut trace, config, channels, &state, design)?;
        update_weights_with(config, channels, &mut state, design)?;
        record(&mut trace, config, channels, &state, design)?;
        update_digital_precoder_with(config, channels, &mut state, design)?;
        let mut f = record(&mut trace, config, channels, &state, design)?;
        if analog {
            let tx = update_analog_precoder_with(config, channels, &mut state, design, opts)?;
            record(&mut trace, config, channels, &state, design)?;
            let rx = update_analog_combiner_with(config, channels, &mut state, design, opts)?;
            f = record(&mut trace, config, channels, &state, design)?;
            for (pair, tr) in tx.into_iter().enumerate() {
                trace.inner.push(InnerRecord { outer, pair, block: AnalogBlock::Precoder, trace: tr });
            }
            for (pair, tr) in rx.into_iter().enumerate() {
                trace.inner.push(InnerRecord { outer, pair, block: AnalogBlock::Combiner, trace: tr });
            }
        }
        trace.outer_objectives.push(f);
        trace.iterations += 1;
        if (prev - f).abs() <= opts.eps_obj * (T::one() + prev.abs()) {
            trace.converged = true;
            break;
        }
        prev = f;
    }
    let out = design.finalize(&state);
    trace.exact_objective = mse_matrices(config, channels, &out)?.wmmse_objective;
    debug!(
        "alternating optimization: {} sweeps, converged = {}, objective {}",
        trace.iterations,
        trace.converged,
        prev.as_f64()
    );
    Ok((out, trace))
}

/// Joint hybrid transceiver design (MM-Alt-Opt). Block order per sweep:
/// `G_D`, `W`, `F̃_D`, `F_A`, `G_A`.
pub fn mm_alt_opt<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    opts: &SolverOptions<T>,
    rng: RngSpec,
) -> Result<(HybridState<T>, AltOptTrace<T>)> {
    let design = Design::fully_connected(config);
    let init = initial_state(config, channels, &design, opts.init_mode, rng)?;
    alternate(config, channels, init, &design, opts, true)
}

/// Two-stage design: phase-projected singular vectors for the analog stages,
/// then the digital blocks alternate with the analog stages fixed.
pub fn two_stage_pp<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    opts: &SolverOptions<T>,
) -> Result<(HybridState<T>, AltOptTrace<T>)> {
    let design = Design::fully_connected(config);
    let init = initial_state(config, channels, &design, InitMode::TwoStagePP, RngSpec::new(0, 0))?;
    alternate(config, channels, init, &design, opts, false)
}
