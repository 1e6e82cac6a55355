//! Per-subcarrier channel estimation from the staggered training slots, and
//! interference-cancelling combiners (zero forcing, null space).

use crate::error::{Error, Result};
use crate::frontend::C64;
use crate::linalg::{pinv, Rows};
use crate::signal::{DftPlan, SampleStream};
use crate::waveform::{demodulate_body, FrameLayout, OfdmConfig, OfdmFrame};

/// Demodulated chains, `[chain][symbol][dft bin]`.
pub type SymbolGrid = Vec<Vec<Vec<C64>>>;

pub fn demodulate_chains(chains: &[SampleStream<f64>], cfg: &OfdmConfig, layout: &FrameLayout) -> Result<SymbolGrid> {
    let plan = DftPlan::<f64>::new(cfg.fft_size)?;
    chains
        .iter()
        .map(|chain| {
            if chain.len() < layout.total_samples() {
                return Err(Error::Dimension(format!(
                    "chain holds {} samples, frame needs {}",
                    chain.len(),
                    layout.total_samples()
                )));
            }
            Ok((0..layout.total_symbols())
                .map(|s| demodulate_body(&plan, &chain.samples()[layout.body(s)]))
                .collect())
        })
        .collect()
}

/// Effective chain-by-user channel on the used subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    /// DFT bin of each entry along the last axis.
    pub bins: Vec<usize>,
    /// `[chain][user][used bin]`.
    pub gains: Vec<Vec<Vec<C64>>>,
}

impl EffectiveChannel {
    pub fn chains(&self) -> usize {
        self.gains.len()
    }

    pub fn users(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }

    /// `chains x users` matrix at position `f` of [`EffectiveChannel::bins`].
    pub fn at(&self, f: usize) -> Rows {
        self.gains.iter().map(|c| c.iter().map(|u| u[f]).collect()).collect()
    }

    /// Builds a channel from per-bin `chains x users` matrices.
    pub fn from_bins(bins: Vec<usize>, per_bin: &[Rows]) -> Result<Self> {
        if bins.len() != per_bin.len() || per_bin.is_empty() {
            return Err(Error::Dimension("one matrix per bin required".into()));
        }
        let (chains, users) = (per_bin[0].len(), per_bin[0].first().map_or(0, Vec::len));
        if chains == 0 || users == 0 || per_bin.iter().any(|m| m.len() != chains || m.iter().any(|r| r.len() != users)) {
            return Err(Error::Dimension("ragged effective channel".into()));
        }
        let gains = (0..chains)
            .map(|c| (0..users).map(|u| per_bin.iter().map(|m| m[c][u]).collect()).collect())
            .collect();
        Ok(Self { bins, gains })
    }
}

/// Least-squares estimate `Y / LTS` during each user's training slot, averaged over
/// the slot's repetitions.
pub fn estimate_channel(grid: &SymbolGrid, frame: &OfdmFrame) -> Result<EffectiveChannel> {
    let cfg = &frame.config;
    let layout = &frame.layout;
    let lts = cfg.lts_spectrum();
    let bins = cfg.used_bins();
    if layout.lts_repetitions == 0 {
        return Err(Error::InvalidArgument("frame carries no training symbols".into()));
    }
    let reps = layout.lts_repetitions as f64;
    let mut gains = Vec::with_capacity(grid.len());
    for chain in grid {
        let mut per_user = Vec::with_capacity(frame.users());
        for &slot in &frame.lts_slot {
            let syms: Vec<&Vec<C64>> = (0..layout.lts_repetitions)
                .map(|r| chain.get(layout.lts_symbol(slot, r)))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Dimension(format!("training slot {slot} missing")))?;
            per_user.push(
                bins.iter()
                    .map(|&b| syms.iter().map(|s| s[b]).sum::<C64>() / (lts[b] * reps))
                    .collect(),
            );
        }
        gains.push(per_user);
    }
    Ok(EffectiveChannel { bins, gains })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerMethod {
    Zf,
    Nullspace,
}

/// Per-bin `users x chains` combining matrices; `None` marks an erased bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerMatrix {
    pub method: CombinerMethod,
    pub bins: Vec<usize>,
    pub weights: Vec<Option<Rows>>,
}

impl CombinerMatrix {
    pub fn erased(&self) -> usize {
        self.weights.iter().filter(|w| w.is_none()).count()
    }
}

/// Per-user rows `n^H / (n^H h_i)` with `n` the part of `h_i` orthogonal to every
/// other user's column.
fn nullspace_rows(h: &Rows, tol: f64) -> Option<Rows> {
    let chains = h.len();
    let users = h[0].len();
    let column = |u: usize| -> Vec<C64> { h.iter().map(|r| r[u]).collect() };
    let dot = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let norm = |a: &[C64]| dot(a, a).re.sqrt();
    (0..users)
        .map(|i| {
            // orthonormal basis of the other users' columns (modified Gram-Schmidt)
            let mut basis: Vec<Vec<C64>> = Vec::new();
            for j in (0..users).filter(|&j| j != i) {
                let mut v = column(j);
                let scale = norm(&v);
                for q in &basis {
                    let c = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
                let n = norm(&v);
                if !(n > tol * scale) {
                    return None;
                }
                v.iter_mut().for_each(|x| *x /= n);
                basis.push(v);
            }
            let hi = column(i);
            let mut n = hi.clone();
            for q in &basis {
                let c = dot(q, &n);
                n.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            if !(norm(&n) > tol * norm(&hi)) {
                return None;
            }
            let g = dot(&n, &hi);
            Some((0..chains).map(|c| n[c].conj() / g).collect())
        })
        .collect()
}

pub fn combiner(heff: &EffectiveChannel, method: CombinerMethod, rank_tolerance: f64) -> Result<CombinerMatrix> {
    if heff.users() > heff.chains() {
        return Err(Error::Dimension(format!(
            "{} users cannot be separated by {} chains",
            heff.users(),
            heff.chains()
        )));
    }
    let weights = (0..heff.bins.len())
        .map(|f| {
            let h = heff.at(f);
            match method {
                CombinerMethod::Zf => pinv(&h, rank_tolerance),
                CombinerMethod::Nullspace => nullspace_rows(&h, rank_tolerance),
            }
        })
        .collect();
    Ok(CombinerMatrix {
        method,
        bins: heff.bins.clone(),
        weights,
    })
}

/// Combiner outputs on the data subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub combiner: CombinerMatrix,
    /// `[user][payload symbol][data subcarrier]`; erased bins hold zero.
    pub symbols: Vec<Vec<Vec<C64>>>,
    /// Per data subcarrier: whether its bin was erased.
    pub erased: Vec<bool>,
}

pub fn combine(grid: &SymbolGrid, frame: &OfdmFrame, heff: &EffectiveChannel, method: CombinerMethod, rank_tolerance: f64) -> Result<Equalized> {
    if grid.len() != heff.chains() {
        return Err(Error::Dimension(format!(
            "{} chains demodulated, channel has {}",
            grid.len(),
            heff.chains()
        )));
    }
    let comb = combiner(heff, method, rank_tolerance)?;
    let layout = &frame.layout;
    let data_bins = frame.config.data_bins();
    let pos: Vec<usize> = data_bins
        .iter()
        .map(|b| heff.bins.iter().position(|x| x == b).ok_or(Error::Dimension(format!("bin {b} not estimated"))))
        .collect::<Result<_>>()?;
    let erased = pos.iter().map(|&f| comb.weights[f].is_none()).collect();
    let symbols = (0..heff.users())
        .map(|u| {
            (0..layout.payload_symbols)
                .map(|p| {
                    let s = layout.payload_symbol(p);
                    data_bins
                        .iter()
                        .zip(&pos)
                        .map(|(&b, &f)| match &comb.weights[f] {
                            Some(v) => v[u].iter().zip(grid).map(|(w, chain)| w * chain[s][b]).sum(),
                            None => C64::new(0.0, 0.0),
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(Equalized {
        combiner: comb,
        symbols,
        erased,
    })
}

pub fn zf_combine(grid: &SymbolGrid, frame: &OfdmFrame, heff: &EffectiveChannel, rank_tolerance: f64) -> Result<Equalized> {
    combine(grid, frame, heff, CombinerMethod::Zf, rank_tolerance)
}

pub fn nullspace_combine(grid: &SymbolGrid, frame: &OfdmFrame, heff: &EffectiveChannel, rank_tolerance: f64) -> Result<Equalized> {
    combine(grid, frame, heff, CombinerMethod::Nullspace, rank_tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply, rayleigh};
    use crate::linalg::matmul;
    use crate::signal::add_awgn;
    use crate::signal::Rng;
    use crate::waveform::{build_frame, random_payloads, recover_bits};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Frame through a per-bin `chains x users` mixing, optional noise per chain.
    fn received(frame: &OfdmFrame, mix: &dyn Fn(usize) -> Rows, chains: usize, noise: f64, rng: &mut Rng) -> SymbolGrid {
        let cfg = &frame.config;
        let tx = demodulate_chains(&frame.tx_streams, cfg, &frame.layout).unwrap();
        (0..chains)
            .map(|ch| {
                (0..frame.layout.total_symbols())
                    .map(|s| {
                        (0..cfg.fft_size)
                            .map(|b| {
                                let m = mix(b);
                                let v: C64 = (0..frame.users()).map(|u| m[ch][u] * tx[u][s][b]).sum();
                                v + if noise > 0.0 { rng.complex_normal(noise) } else { c(0.0, 0.0) }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    fn frame(users: usize, reps: usize, rng: &mut Rng) -> OfdmFrame {
        let cfg = OfdmConfig {
            lts_repetitions: reps,
            ..OfdmConfig::default()
        };
        build_frame(&cfg, &random_payloads(&cfg, users, 3, rng)).unwrap()
    }

    #[test]
    fn identity_channel_passes_through() {
        let mut rng = Rng::new(1, 0);
        let f = frame(2, 2, &mut rng);
        let eye = |_: usize| vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
        let grid = received(&f, &eye, 2, 0.0, &mut rng);
        let h = estimate_channel(&grid, &f).unwrap();
        let eq = zf_combine(&grid, &f, &h, 1e-9).unwrap();
        for u in 0..2 {
            for (got, want) in eq.symbols[u].iter().flatten().zip(f.data_symbols[u].iter().flatten()) {
                assert!((got - want).norm() < 1e-12);
            }
        }
        assert!(eq.erased.iter().all(|e| !e));
    }

    #[test]
    fn flat_scalar_channel_estimate() {
        let mut rng = Rng::new(2, 0);
        let f = frame(1, 2, &mut rng);
        let g = c(0.3, -0.7);
        let grid = received(&f, &|_| vec![vec![g]], 1, 0.0, &mut rng);
        let h = estimate_channel(&grid, &f).unwrap();
        assert_eq!(h.bins.len(), 52);
        assert!(h.gains[0][0].iter().all(|v| (v - g).norm() < 1e-12));
    }

    #[test]
    fn injected_channel_is_recovered() {
        let mut rng = Rng::new(3, 0);
        let f = frame(3, 2, &mut rng);
        let truth: Vec<Rows> = (0..64)
            .map(|_| (0..4).map(|_| (0..3).map(|_| rng.complex_normal(1.0)).collect()).collect())
            .collect();
        let grid = received(&f, &|b| truth[b].clone(), 4, 0.0, &mut rng);
        let h = estimate_channel(&grid, &f).unwrap();
        for (i, &b) in h.bins.iter().enumerate() {
            let est = h.at(i);
            for ch in 0..4 {
                for u in 0..3 {
                    assert!((est[ch][u] - truth[b][ch][u]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn two_by_two_example_and_noise_doubling() {
        let h = vec![vec![c(1.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]];
        let heff = EffectiveChannel::from_bins(vec![1], std::slice::from_ref(&h)).unwrap();
        let comb = combiner(&heff, CombinerMethod::Zf, 1e-9).unwrap();
        let v = comb.weights[0].clone().unwrap();
        let x = [c(0.5, -1.0), c(-2.0, 0.25)];
        for (u, row) in v.iter().enumerate() {
            let y: Vec<C64> = h.iter().map(|r| r[0] * x[0] + r[1] * x[1]).collect();
            let got: C64 = row.iter().zip(&y).map(|(w, y)| w * y).sum();
            assert!((got - x[u]).norm() < 1e-12);
            // the inversion adds or subtracts the two chains: 2 v_u has squared norm 2,
            // i.e. the combined noise is twice one chain's before the 1/2 scaling
            let boost: f64 = row.iter().map(|w| (w * 2.0).norm_sqr()).sum();
            assert!((boost - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nullspace_matches_zf() {
        let mut rng = Rng::new(4, 0);
        for (chains, users) in [(1, 1), (2, 2), (4, 4), (6, 3)] {
            let h: Rows = (0..chains).map(|_| (0..users).map(|_| rng.complex_normal(1.0)).collect()).collect();
            let heff = EffectiveChannel::from_bins(vec![1], &[h]).unwrap();
            let a = combiner(&heff, CombinerMethod::Zf, 1e-9).unwrap().weights[0].clone().unwrap();
            let b = combiner(&heff, CombinerMethod::Nullspace, 1e-9).unwrap().weights[0].clone().unwrap();
            for (ra, rb) in a.iter().zip(&b) {
                for (x, y) in ra.iter().zip(rb) {
                    assert!((x - y).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn singular_bin_is_erased() {
        let h = vec![vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(1.0, 0.0), c(2.0, 0.0)]];
        let ok = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
        let heff = EffectiveChannel::from_bins(vec![1, 2], &[h, ok]).unwrap();
        for m in [CombinerMethod::Zf, CombinerMethod::Nullspace] {
            let comb = combiner(&heff, m, 1e-9).unwrap();
            assert!(comb.weights[0].is_none() && comb.weights[1].is_some());
            assert_eq!(comb.erased(), 1);
        }
    }

    #[test]
    fn more_users_than_chains_rejected() {
        let heff = EffectiveChannel::from_bins(vec![1], &[vec![vec![c(1.0, 0.0), c(1.0, 0.0)]]]).unwrap();
        assert!(combiner(&heff, CombinerMethod::Zf, 1e-9).is_err());
    }

    #[test]
    fn bins_are_independent() {
        let mut rng = Rng::new(5, 0);
        let mats: Vec<Rows> = (0..5)
            .map(|_| (0..3).map(|_| (0..3).map(|_| rng.complex_normal(1.0)).collect()).collect())
            .collect();
        let a = combiner(&EffectiveChannel::from_bins((0..5).collect(), &mats).unwrap(), CombinerMethod::Zf, 1e-9).unwrap();
        let rev: Vec<Rows> = mats.iter().rev().cloned().collect();
        let b = combiner(&EffectiveChannel::from_bins((0..5).collect(), &rev).unwrap(), CombinerMethod::Zf, 1e-9).unwrap();
        for i in 0..5 {
            assert_eq!(a.weights[i], b.weights[4 - i]);
        }
    }

    #[test]
    fn estimate_variance_halves_with_two_repetitions() {
        let mut rng = Rng::new(6, 0);
        let var = |reps: usize, rng: &mut Rng| {
            let mut acc = 0.0;
            let mut n = 0.0;
            for _ in 0..40 {
                let f = frame(1, reps, rng);
                let grid = received(&f, &|_| vec![vec![c(1.0, 0.0)]], 1, 0.1, rng);
                let h = estimate_channel(&grid, &f).unwrap();
                for v in &h.gains[0][0] {
                    acc += (v - c(1.0, 0.0)).norm_sqr();
                    n += 1.0;
                }
            }
            acc / n
        };
        let one = var(1, &mut rng);
        let two = var(2, &mut rng);
        assert!((one / two - 2.0).abs() < 0.2, "{one} vs {two}");
        assert!((one - 0.1).abs() < 0.01);
    }

    #[test]
    fn end_to_end_rayleigh_noiseless() {
        let mut rng = Rng::new(7, 0);
        let f = frame(3, 2, &mut rng);
        let ch = rayleigh(3, 5, 64, &mut rng).unwrap();
        let rx = apply(&ch, &f.tx_streams, f.config.cp_len).unwrap();
        let grid = demodulate_chains(&rx, &f.config, &f.layout).unwrap();
        let h = estimate_channel(&grid, &f).unwrap();
        let eq = zf_combine(&grid, &f, &h, 1e-9).unwrap();
        for u in 0..3 {
            let bits = recover_bits(&f.config, &eq.symbols[u], f.payload_len).unwrap();
            assert_eq!(bits, f.payload_bits[u]);
        }
        // noise keeps the symbols near the constellation but not exact
        let noisy: Vec<_> = rx.iter().map(|s| add_awgn(s, 1e-3, &mut rng).unwrap()).collect();
        let grid = demodulate_chains(&noisy, &f.config, &f.layout).unwrap();
        let h = estimate_channel(&grid, &f).unwrap();
        let eq = zf_combine(&grid, &f, &h, 1e-9).unwrap();
        assert_eq!(recover_bits(&f.config, &eq.symbols[0], f.payload_len).unwrap(), f.payload_bits[0]);
    }

    #[test]
    fn short_chain_rejected() {
        let mut rng = Rng::new(8, 0);
        let f = frame(1, 1, &mut rng);
        let short = SampleStream::<f64>::zeros(10, 1.0).unwrap();
        assert!(demodulate_chains(&[short], &f.config, &f.layout).is_err());
    }

    proptest! {
        #[test]
        fn zf_leakage_floor(seed in any::<u64>(), users in 1usize..9, extra in 0usize..4) {
            let chains = (users + extra).min(8);
            let mut rng = Rng::new(seed, 0);
            let h: Rows = (0..chains).map(|_| (0..users).map(|_| rng.complex_normal(1.0)).collect()).collect();
            let heff = EffectiveChannel::from_bins(vec![1], std::slice::from_ref(&h)).unwrap();
            if let Some(v) = combiner(&heff, CombinerMethod::Zf, 1e-9).unwrap().weights[0].clone() {
                let p = matmul(&v, &h);
                for (i, row) in p.iter().enumerate() {
                    for (j, x) in row.iter().enumerate() {
                        let want = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                        prop_assert!((x - want).norm() < 1e-9);
                    }
                }
            }
        }
    }
}
