//! System configuration, channel generation and transceiver state.
//!
//! Channels are indexed `h[k][i]`: the `N_r,k × N_t,i` matrix from transmitter
//! `i` to receiver `k`. All random draws go through [`RngSpec`], a seeded
//! ChaCha8 generator whose 64-bit stream id selects an independent keystream,
//! so trial `t` reproduces the same draws whether trials run serially or in
//! parallel.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, unit_modulus_defect};
use crate::scalar::{c_real, CMat, CVec, Real};

/// Antenna, RF-chain, stream and power budget of one transmit/receive pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig<T: Real> {
    pub nt: usize,
    pub nr: usize,
    pub nt_rf: usize,
    pub nr_rf: usize,
    pub ns: usize,
    /// Maximum transmit power (linear).
    pub power: T,
    /// Receiver noise variance (linear).
    pub noise: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<T: Real> {
    pub pairs: Vec<PairConfig<T>>,
}

impl<T: Real> SystemConfig<T> {
    /// `k` identical pairs.
    pub fn uniform(k: usize, pair: PairConfig<T>) -> Result<Self> {
        let cfg = Self {
            pairs: vec![pair; k],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn new(pairs: Vec<PairConfig<T>>) -> Result<Self> {
        let cfg = Self { pairs };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::InvalidInput("at least one pair is required".into()));
        }
        for (k, p) in self.pairs.iter().enumerate() {
            if p.ns == 0 || p.ns > p.nt_rf || p.nt_rf > p.nt {
                return Err(Error::InvalidDimension(format!(
                    "pair {k}: need 1 <= Ns ({}) <= NtRF ({}) <= Nt ({})",
                    p.ns, p.nt_rf, p.nt
                )));
            }
            if p.ns > p.nr_rf || p.nr_rf > p.nr {
                return Err(Error::InvalidDimension(format!(
                    "pair {k}: need Ns ({}) <= NrRF ({}) <= Nr ({})",
                    p.ns, p.nr_rf, p.nr
                )));
            }
            if !(p.power > T::zero()) || !(p.noise > T::zero()) {
                return Err(Error::InvalidInput(format!(
                    "pair {k}: power and noise variance must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Paths of one mmWave channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCluster<T: Real> {
    pub gains: Vec<Complex<T>>,
    /// Angles of arrival (radians, `[0, 2π)`).
    pub aoa: Vec<T>,
    /// Angles of departure (radians, `[0, 2π)`).
    pub aod: Vec<T>,
}

impl<T: Real> PathCluster<T> {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// `√(nr·nt/L) Σ_l α_l a_r(θ_l) a_tᴴ(ψ_l)`.
    pub fn to_matrix(&self, nr: usize, nt: usize) -> Result<CMat<T>> {
        let l = self.len();
        if l == 0 {
            return Err(Error::InvalidInput("path cluster needs at least one path".into()));
        }
        let scale = (T::count(nr * nt) / T::count(l)).sqrt();
        let mut h = DMatrix::zeros(nr, nt);
        for p in 0..l {
            let ar = steering_vector::<T>(nr, self.aoa[p])?;
            let at = steering_vector::<T>(nt, self.aod[p])?;
            h += (ar * at.adjoint()) * (self.gains[p] * c_real(scale));
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel<T: Real> {
    Rayleigh,
    /// `paths[k][i]` generated `h[k][i]`.
    MmWave { paths: Vec<Vec<PathCluster<T>>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T: Real> {
    pub h: Vec<Vec<CMat<T>>>,
    pub model: ChannelModel<T>,
}

impl<T: Real> ChannelSet<T> {
    /// Wraps explicit matrices after checking shapes against `config`.
    pub fn from_matrices(config: &SystemConfig<T>, h: Vec<Vec<CMat<T>>>) -> Result<Self> {
        let set = Self {
            h,
            model: ChannelModel::Rayleigh,
        };
        set.validate(config)?;
        Ok(set)
    }

    pub fn k(&self) -> usize {
        self.h.len()
    }

    /// Channel from transmitter `i` to receiver `k`.
    #[inline]
    pub fn get(&self, k: usize, i: usize) -> &CMat<T> {
        &self.h[k][i]
    }

    pub fn validate(&self, config: &SystemConfig<T>) -> Result<()> {
        let k = config.k();
        if self.h.len() != k || self.h.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidDimension(format!(
                "channel grid must be {k}×{k}"
            )));
        }
        for (rk, row) in self.h.iter().enumerate() {
            for (ti, m) in row.iter().enumerate() {
                let want = (config.pairs[rk].nr, config.pairs[ti].nt);
                if m.shape() != want {
                    return Err(Error::InvalidDimension(format!(
                        "H[{rk}][{ti}] is {:?}, expected {want:?}",
                        m.shape()
                    )));
                }
                if !all_finite(m) {
                    return Err(Error::Numerical(format!("H[{rk}][{ti}] has non-finite entries")));
                }
            }
        }
        Ok(())
    }

    /// `‖H‖_F` over the whole grid.
    pub fn frobenius_norm(&self) -> T {
        self.h
            .iter()
            .flatten()
            .map(crate::linalg::frob2)
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Multiplies every channel by `s`.
    pub fn scaled(&self, s: Complex<T>) -> Self {
        Self {
            h: self
                .h
                .iter()
                .map(|row| row.iter().map(|m| m * s).collect())
                .collect(),
            model: self.model.clone(),
        }
    }
}

/// Per-pair hybrid transceiver matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridPair<T: Real> {
    /// Analog precoder, `Nt × NtRF`.
    pub fa: CMat<T>,
    /// Digital precoder, `NtRF × Ns`.
    pub fd: CMat<T>,
    /// Analog combiner, `Nr × NrRF`.
    pub ga: CMat<T>,
    /// Digital combiner, `NrRF × Ns`.
    pub gd: CMat<T>,
    /// MSE weight, `Ns × Ns`.
    pub w: CMat<T>,
}

impl<T: Real> HybridPair<T> {
    /// Composed precoder `F_A F_D`.
    pub fn precoder(&self) -> CMat<T> {
        &self.fa * &self.fd
    }

    /// Composed combiner `G_A G_D`.
    pub fn combiner(&self) -> CMat<T> {
        &self.ga * &self.gd
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridState<T: Real> {
    pub pairs: Vec<HybridPair<T>>,
}

impl<T: Real> HybridState<T> {
    pub fn precoders(&self) -> Vec<CMat<T>> {
        self.pairs.iter().map(HybridPair::precoder).collect()
    }

    pub fn combiners(&self) -> Vec<CMat<T>> {
        self.pairs.iter().map(HybridPair::combiner).collect()
    }

    /// Checks shapes against `config`.
    pub fn check_dims(&self, config: &SystemConfig<T>) -> Result<()> {
        if self.pairs.len() != config.k() {
            return Err(Error::InvalidDimension(format!(
                "state has {} pairs, config has {}",
                self.pairs.len(),
                config.k()
            )));
        }
        for (k, (s, p)) in self.pairs.iter().zip(&config.pairs).enumerate() {
            let checks = [
                ("F_A", s.fa.shape(), (p.nt, p.nt_rf)),
                ("F_D", s.fd.shape(), (p.nt_rf, p.ns)),
                ("G_A", s.ga.shape(), (p.nr, p.nr_rf)),
                ("G_D", s.gd.shape(), (p.nr_rf, p.ns)),
                ("W", s.w.shape(), (p.ns, p.ns)),
            ];
            for (name, got, want) in checks {
                if got != want {
                    return Err(Error::InvalidDimension(format!(
                        "pair {k}: {name} is {got:?}, expected {want:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest `||x| − 1|` over the support of every analog matrix. Entries that
    /// are exactly zero are skipped when `allow_zeros` is set (block-diagonal
    /// analog matrices).
    pub fn unit_modulus_defect(&self, allow_zeros: bool) -> T {
        let mut worst = T::zero();
        for p in &self.pairs {
            for m in [&p.fa, &p.ga] {
                if allow_zeros {
                    for z in m.iter() {
                        if z.re != T::zero() || z.im != T::zero() {
                            worst = worst.max((z.modulus() - T::one()).abs());
                        }
                    }
                } else {
                    worst = worst.max(unit_modulus_defect(m));
                }
            }
        }
        worst
    }
}

/// Seed plus stream id; identical pairs give bit-identical draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// The generator for this (seed, stream) pair.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A spec for an unrelated purpose (e.g. solver initialisation) that
    /// shares the stream id but not the keystream.
    pub fn derive(&self, salt: u64) -> Self {
        Self {
            seed: self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            stream_id: self.stream_id,
        }
    }
}

/// One CN(0,1) sample: independent N(0, 1/2) real and imaginary parts.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex::new(T::lit(re * s), T::lit(im * s))
}

fn uniform_angle<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let u: f64 = rng.random();
    T::lit(u * std::f64::consts::TAU)
}

/// ULA response with half-wavelength spacing:
/// `(1/√N)[1, e^{-jπ sinφ}, …, e^{-j(N-1)π sinφ}]ᵀ`.
pub fn steering_vector<T: Real>(n: usize, angle: T) -> Result<CVec<T>> {
    if n == 0 {
        return Err(Error::InvalidDimension(
            "steering vector needs at least one antenna".into(),
        ));
    }
    let norm = T::one() / T::count(n).sqrt();
    let step = T::pi() * angle.sin();
    Ok(DVector::from_fn(n, |idx, _| {
        let phase = -step * T::count(idx);
        Complex::new(phase.cos() * norm, phase.sin() * norm)
    }))
}

/// i.i.d. CN(0,1) channels for every (k, i).
pub fn gen_rayleigh<T: Real>(config: &SystemConfig<T>, spec: RngSpec) -> ChannelSet<T> {
    let mut rng = spec.rng();
    let k = config.k();
    let mut h = Vec::with_capacity(k);
    for rk in 0..k {
        let mut row = Vec::with_capacity(k);
        for ti in 0..k {
            let (nr, nt) = (config.pairs[rk].nr, config.pairs[ti].nt);
            row.push(DMatrix::from_fn(nr, nt, |_, _| complex_gaussian(&mut rng)));
        }
        h.push(row);
    }
    ChannelSet {
        h,
        model: ChannelModel::Rayleigh,
    }
}

/// Clustered geometric mmWave channels with `l` paths per matrix. Gains are
/// CN(0,1); angles of arrival and departure are uniform on `[0, 2π)` and drawn
/// independently for every (k, i).
pub fn gen_mmwave<T: Real>(config: &SystemConfig<T>, l: usize, spec: RngSpec) -> Result<ChannelSet<T>> {
    if l == 0 {
        return Err(Error::InvalidInput("mmWave channel needs L >= 1".into()));
    }
    let mut rng = spec.rng();
    let k = config.k();
    let mut h = Vec::with_capacity(k);
    let mut paths = Vec::with_capacity(k);
    for rk in 0..k {
        let mut row = Vec::with_capacity(k);
        let mut prow = Vec::with_capacity(k);
        for ti in 0..k {
            let mut cluster = PathCluster {
                gains: Vec::with_capacity(l),
                aoa: Vec::with_capacity(l),
                aod: Vec::with_capacity(l),
            };
            for _ in 0..l {
                cluster.gains.push(complex_gaussian(&mut rng));
                cluster.aoa.push(uniform_angle(&mut rng));
                cluster.aod.push(uniform_angle(&mut rng));
            }
            row.push(cluster.to_matrix(config.pairs[rk].nr, config.pairs[ti].nt)?);
            prow.push(cluster);
        }
        h.push(row);
        paths.push(prow);
    }
    Ok(ChannelSet {
        h,
        model: ChannelModel::MmWave { paths },
    })
}

/// Matrix of i.i.d. uniform phases.
pub fn random_unit_modulus<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat<T> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let phi: T = uniform_angle(rng);
        Complex::new(phi.cos(), phi.sin())
    })
}
