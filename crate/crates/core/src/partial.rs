//! Partially-connected hybrid transceivers: each RF chain drives its own
//! subarray, so the analog matrices are block diagonal. The MM steps run on
//! the stacked support entries only, and the digital precoder uses the exact
//! diagonal Gram of the analog precoder.

use crate::error::{Error, Result};
use crate::joint::{
    alternate, analog_combiner_terms, analog_precoder_terms, initial_state, restrict_to_blocks,
    AltOptTrace, Design, SolverOptions,
};
use crate::linalg::hermitian_part;
use crate::mm::UnitModulusQP;
use crate::model::{ChannelSet, HybridState, RngSpec, SystemConfig};
use crate::scalar::{CMat, Real};

/// Subarray sizes of one pair, one entry per RF chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialLayout {
    pub tx: Vec<usize>,
    pub rx: Vec<usize>,
}

/// `n_rf − 1` blocks of `⌊n / n_rf⌋` antennas; the last block takes the rest.
pub fn split(n: usize, n_rf: usize) -> Result<Vec<usize>> {
    if n_rf == 0 || n_rf > n {
        return Err(Error::InvalidDimension(format!(
            "cannot split {n} antennas over {n_rf} RF chains"
        )));
    }
    let base = n / n_rf;
    let mut sizes = vec![base; n_rf];
    sizes[n_rf - 1] = n - (n_rf - 1) * base;
    Ok(sizes)
}

pub fn make_layout<T: Real>(config: &SystemConfig<T>, k: usize) -> Result<PartialLayout> {
    let p = config
        .pairs
        .get(k)
        .ok_or_else(|| Error::InvalidInput(format!("no pair {k}")))?;
    Ok(PartialLayout {
        tx: split(p.nt, p.nt_rf)?,
        rx: split(p.nr, p.nr_rf)?,
    })
}

pub fn make_layouts<T: Real>(config: &SystemConfig<T>) -> Result<Vec<PartialLayout>> {
    (0..config.k()).map(|k| make_layout(config, k)).collect()
}

/// Solver design for the given layouts; `tx_only` keeps the receivers
/// fully connected.
pub fn partial_design<T: Real>(
    config: &SystemConfig<T>,
    layouts: &[PartialLayout],
    tx_only: bool,
) -> Result<Design<T>> {
    let tx = layouts.iter().map(|l| l.tx.clone()).collect();
    let rx = (!tx_only).then(|| layouts.iter().map(|l| l.rx.clone()).collect());
    Design::partially_connected(config, tx, rx)
}

/// Reduced QP of the analog precoder of pair `k` over its `Nt` support
/// entries, stacked block by block. `state.pairs[i].fd` holds the unscaled
/// digital precoders of the solver.
pub fn assemble_partial_precoder_qp<T: Real>(
    state: &HybridState<T>,
    channels: &ChannelSet<T>,
    config: &SystemConfig<T>,
    k: usize,
    layouts: &[PartialLayout],
) -> Result<UnitModulusQP<T>> {
    let design = partial_design(config, layouts, true)?;
    let (left, right, lin) = analog_precoder_terms(config, channels, state, &design, k);
    reduced_qp(&left, &right, &lin, &layouts[k].tx)
}

/// Reduced QP of the analog combiner of pair `k` over its `Nr` support
/// entries.
pub fn assemble_partial_combiner_qp<T: Real>(
    state: &HybridState<T>,
    channels: &ChannelSet<T>,
    config: &SystemConfig<T>,
    k: usize,
    layouts: &[PartialLayout],
) -> Result<UnitModulusQP<T>> {
    let design = partial_design(config, layouts, false)?;
    let (left, right, lin) = analog_combiner_terms(config, channels, state, &design, k);
    reduced_qp(&left, &right, &lin, &layouts[k].rx)
}

fn reduced_qp<T: Real>(
    left: &CMat<T>,
    right: &CMat<T>,
    lin: &CMat<T>,
    blocks: &[usize],
) -> Result<UnitModulusQP<T>> {
    let (a_hat, a) = restrict_to_blocks(&hermitian_part(left), &hermitian_part(right), lin, blocks);
    UnitModulusQP::dense(hermitian_part(&a_hat), a)?.with_blocks(blocks.to_vec())
}

/// Partially-connected MM-Alt-Opt. With `tx_only` the receivers stay fully
/// connected and reuse the fully-connected combiner updates.
pub fn partial_mm_alt_opt<T: Real>(
    config: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    opts: &SolverOptions<T>,
    tx_only: bool,
    rng: RngSpec,
) -> Result<(HybridState<T>, AltOptTrace<T>)> {
    config.validate()?;
    let layouts = make_layouts(config)?;
    let design = partial_design(config, &layouts, tx_only)?;
    let init = initial_state(config, channels, &design, opts.init_mode, rng)?;
    alternate(config, channels, init, &design, opts, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digital::{wmmse_full_digital, WmmseOptions};
    use crate::joint::{block_owner, gather_support, mm_alt_opt, scatter_support, InitMode};
    use crate::linalg::{frob2, kron, unit_modulus_defect, vec_of};
    use crate::metrics::{rates, sum_rate};
    use crate::model::{gen_mmwave, gen_rayleigh, random_unit_modulus, PairConfig};
    use nalgebra::{Complex, DMatrix, DVector};
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn cfg(k: usize, nt: usize, nr: usize, nt_rf: usize, nr_rf: usize, ns: usize) -> SystemConfig<f64> {
        SystemConfig::uniform(k, PairConfig { nt, nr, nt_rf, nr_rf, ns, power: 10.0, noise: 1.0 }).unwrap()
    }

    #[test]
    fn floor_rule() {
        assert_eq!(split(64, 4).unwrap(), vec![16; 4]);
        assert_eq!(split(10, 3).unwrap(), vec![3, 3, 4]);
        assert_eq!(split(5, 5).unwrap(), vec![1; 5]);
        assert!(matches!(split(3, 4), Err(Error::InvalidDimension(_))));
        let c = cfg(2, 10, 7, 3, 2, 1);
        assert_eq!(make_layout(&c, 1).unwrap(), PartialLayout { tx: vec![3, 3, 4], rx: vec![3, 4] });
        assert!(make_layout(&c, 2).is_err());
    }

    /// Solver iterate with block-diagonal analog stages.
    fn iterate(c: &SystemConfig<f64>, ch: &ChannelSet<f64>, seed: u64, tx_only: bool) -> HybridState<f64> {
        let layouts = make_layouts(c).unwrap();
        let design = partial_design(c, &layouts, tx_only).unwrap();
        let mut st = initial_state(c, ch, &design, InitMode::RandomPhase, RngSpec::new(seed, 0)).unwrap();
        let mut rng = RngSpec::new(seed, 9).rng();
        for p in &mut st.pairs {
            p.w = random_unit_modulus(p.w.nrows(), p.w.ncols(), &mut rng);
            p.w = &p.w * p.w.adjoint() + DMatrix::identity(p.w.nrows(), p.w.ncols());
            p.gd = random_unit_modulus(p.gd.nrows(), p.gd.ncols(), &mut rng);
        }
        st
    }

    fn masked_equivalence(qp: &UnitModulusQP<f64>, left: &CMat<f64>, right: &CMat<f64>, lin: &CMat<f64>, blocks: &[usize], seed: u64) {
        let full = kron(&hermitian_part(left), &hermitian_part(right));
        let a = vec_of(lin);
        let mut rng = RngSpec::new(seed, 1).rng();
        for _ in 0..100 {
            let n = block_owner(blocks).len();
            let xb: DVector<C> = random_unit_modulus::<f64, _>(n, 1, &mut rng).column(0).into_owned();
            let x = vec_of(&scatter_support(&xb, blocks));
            let reference = x.dotc(&(&full * &x)).re - 2.0 * a.dotc(&x).re;
            let got = qp.objective(&xb);
            assert!((got - reference).abs() <= 1e-9 * reference.abs().max(1.0), "{got} vs {reference}");
        }
    }

    #[test]
    fn precoder_qp_matches_masked_full_form() {
        for (nt, rf) in [(16, 4), (10, 3)] {
            let c = cfg(2, nt, 6, rf, 2, 2);
            let ch = gen_rayleigh(&c, RngSpec::new(3, 0));
            let st = iterate(&c, &ch, 4, true);
            let layouts = make_layouts(&c).unwrap();
            let design = partial_design(&c, &layouts, true).unwrap();
            for k in 0..2 {
                let qp = assemble_partial_precoder_qp(&st, &ch, &c, k, &layouts).unwrap();
                assert_eq!(qp.dim(), nt);
                let (l, r, a) = analog_precoder_terms(&c, &ch, &st, &design, k);
                masked_equivalence(&qp, &l, &r, &a, &layouts[k].tx, 5 + k as u64);
            }
        }
    }

    #[test]
    fn combiner_qp_matches_masked_full_form() {
        for (nr, rf) in [(8, 2), (7, 3)] {
            let c = cfg(2, 12, nr, 3, rf, 2);
            let ch = gen_rayleigh(&c, RngSpec::new(6, 0));
            let st = iterate(&c, &ch, 7, false);
            let layouts = make_layouts(&c).unwrap();
            let design = partial_design(&c, &layouts, false).unwrap();
            for k in 0..2 {
                let qp = assemble_partial_combiner_qp(&st, &ch, &c, k, &layouts).unwrap();
                assert_eq!(qp.dim(), nr);
                let (l, r, a) = analog_combiner_terms(&c, &ch, &st, &design, k);
                masked_equivalence(&qp, &l, &r, &a, &layouts[k].rx, 8 + k as u64);
            }
        }
    }

    #[test]
    fn single_block_is_the_full_form() {
        let c = cfg(1, 8, 4, 1, 1, 1);
        let ch = gen_rayleigh(&c, RngSpec::new(10, 0));
        let st = iterate(&c, &ch, 11, true);
        let layouts = make_layouts(&c).unwrap();
        let design = partial_design(&c, &layouts, true).unwrap();
        let qp = assemble_partial_precoder_qp(&st, &ch, &c, 0, &layouts).unwrap();
        let (l, r, a) = analog_precoder_terms(&c, &ch, &st, &design, 0);
        let full = kron(&hermitian_part(&l), &hermitian_part(&r));
        assert!(frob2(&(qp.a_tilde().to_dense() - full)).sqrt() < 1e-12);
        assert!((qp.linear() - vec_of(&a)).norm() < 1e-12);
    }

    #[test]
    fn decoupled_pairs_give_block_diagonal_qp() {
        let c = cfg(2, 12, 6, 3, 2, 1);
        let mut ch = gen_rayleigh(&c, RngSpec::new(12, 0));
        ch.h[0][1].fill(C::new(0.0, 0.0));
        ch.h[1][0].fill(C::new(0.0, 0.0));
        let mut st = iterate(&c, &ch, 13, false);
        // A single stream with one-dimensional digital stages makes left rank one;
        // zero off-diagonal entries in left keep Â block diagonal.
        st.pairs[0].fd = DMatrix::from_fn(3, 1, |r, _| if r == 1 { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) });
        let layouts = make_layouts(&c).unwrap();
        let qp = assemble_partial_precoder_qp(&st, &ch, &c, 0, &layouts).unwrap();
        let a = qp.a_tilde().to_dense();
        let owner = block_owner(&layouts[0].tx);
        for r1 in 0..12 {
            for r2 in 0..12 {
                if owner[r1] != owner[r2] {
                    assert_eq!(a[(r1, r2)], C::new(0.0, 0.0));
                }
            }
        }
    }

    fn check_structure(c: &SystemConfig<f64>, st: &HybridState<f64>, rx_partial: bool) {
        for (k, p) in st.pairs.iter().enumerate() {
            let l = make_layout(c, k).unwrap();
            let owner = block_owner(&l.tx);
            for r in 0..p.fa.nrows() {
                for j in 0..p.fa.ncols() {
                    if j == owner[r] {
                        assert!((p.fa[(r, j)].norm() - 1.0).abs() < 1e-12);
                    } else {
                        assert_eq!(p.fa[(r, j)], C::new(0.0, 0.0));
                    }
                }
            }
            let gram = p.fa.adjoint() * &p.fa;
            let expected = DMatrix::from_diagonal(&DVector::from_iterator(l.tx.len(), l.tx.iter().map(|&n| C::new(n as f64, 0.0))));
            assert!(frob2(&(gram - expected)).sqrt() < 1e-10);
            if rx_partial {
                let back = scatter_support(&gather_support(&p.ga, &l.rx), &l.rx);
                assert_eq!(back, p.ga);
            } else {
                assert!(unit_modulus_defect(&p.ga) < 1e-12);
            }
        }
    }

    #[test]
    fn structure_monotonicity_and_exact_objective() {
        let c = cfg(2, 32, 8, 4, 2, 2);
        let ch = gen_mmwave(&c, 6, RngSpec::new(14, 0)).unwrap();
        for tx_only in [true, false] {
            let (st, tr) = partial_mm_alt_opt(&c, &ch, &SolverOptions::default(), tx_only, RngSpec::new(14, 0)).unwrap();
            check_structure(&c, &st, !tx_only);
            assert!(tr.is_monotone(1e-8));
            let last = *tr.outer_objectives.last().unwrap();
            assert!((tr.exact_objective - last).abs() <= 1e-9 * (1.0 + last.abs()));
            let power: f64 = frob2(&(&st.pairs[0].fa * &st.pairs[0].fd));
            assert!(power <= 10.0 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn uneven_split_is_exact() {
        let c = cfg(2, 10, 7, 3, 3, 2);
        let ch = gen_rayleigh(&c, RngSpec::new(15, 0));
        let (st, tr) = partial_mm_alt_opt(&c, &ch, &SolverOptions::default(), false, RngSpec::new(15, 0)).unwrap();
        check_structure(&c, &st, true);
        assert!(tr.is_monotone(1e-8));
        let last = *tr.outer_objectives.last().unwrap();
        assert!((tr.exact_objective - last).abs() <= 1e-9 * (1.0 + last.abs()));
    }

    #[test]
    fn one_antenna_per_chain_matches_full_digital() {
        let c = cfg(2, 6, 4, 6, 4, 2);
        let mut worst: f64 = 1.0;
        for seed in 0..5 {
            let ch = gen_rayleigh(&c, RngSpec::new(16, seed));
            let opts = SolverOptions { eps_obj: 1e-7, max_outer: 500, ..Default::default() };
            let (st, _) = partial_mm_alt_opt(&c, &ch, &opts, false, RngSpec::new(16, seed)).unwrap();
            let hyb = sum_rate(&c, &ch, &st).unwrap().sum_rate;
            let (fd, _) = wmmse_full_digital(&c, &ch, None, WmmseOptions { eps_obj: 1e-7, max_iter: 500 }).unwrap();
            let dig = rates(&c, &ch, &fd.f, &fd.g).unwrap().sum_rate;
            worst = worst.min(hyb / dig);
        }
        assert!(worst >= 0.98, "worst ratio {worst}");
    }

    #[test]
    fn ordering_against_fully_connected() {
        let c = cfg(2, 32, 8, 4, 4, 2);
        let (mut full, mut tx, mut both) = (0.0, 0.0, 0.0);
        for seed in 0..6 {
            let ch = gen_mmwave(&c, 10, RngSpec::new(17, seed)).unwrap();
            let o = SolverOptions::default();
            let rng = RngSpec::new(17, seed);
            full += sum_rate(&c, &ch, &mm_alt_opt(&c, &ch, &o, rng).unwrap().0).unwrap().sum_rate;
            tx += sum_rate(&c, &ch, &partial_mm_alt_opt(&c, &ch, &o, true, rng).unwrap().0).unwrap().sum_rate;
            both += sum_rate(&c, &ch, &partial_mm_alt_opt(&c, &ch, &o, false, rng).unwrap().0).unwrap().sum_rate;
        }
        assert!(full >= tx && tx >= both, "{full} {tx} {both}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn split_invariants(n in 1usize..200, rf_frac in 0.0f64..1.0) {
            let rf = 1 + ((n - 1) as f64 * rf_frac) as usize;
            let s = split(n, rf).unwrap();
            prop_assert_eq!(s.len(), rf);
            prop_assert_eq!(s.iter().sum::<usize>(), n);
            prop_assert!(s.iter().all(|&b| b >= 1));
            prop_assert!(s[..rf - 1].iter().all(|&b| b == n / rf));
        }
    }
}
