//! Seeded Monte-Carlo trials: frame → channel → front end → (despread) → estimate →
//! combine → decode → metrics, for each receiver architecture.

pub mod config;
pub mod sweep;
pub mod validate;

pub use config::{ArchKind, CombinerKind, ExperimentConfig, Scenario, Switching, SyncMode};
pub use sweep::{run_points, run_sweep, SweepSummary, TrialPoint, TrialRecord};

use crate::babf::{babf_select, random_switch_matrix};
use crate::channel::{apply, ray_trace, rayleigh_taps, ChannelSet, Point, RoomScene};
use crate::despread::time_despread;
use crate::equalize::{combine, demodulate_chains, estimate_channel, EffectiveChannel, Equalized};
use crate::error::{Error, Result};
use crate::frontend::{
    capture_hybrid, capture_physical, capture_switched, conjugate_phase_weights, effective_hybrid_weights,
    AnalogModel, FrontendConfig, SwitchMatrix, C64,
};
use crate::linalg::Rows;
use crate::metrics::{self, TrialMetrics};
use crate::signal::{Rng, SampleStream};
use crate::waveform::{build_frame, random_payloads, recover_bits, OfdmFrame};

// substream tags: every random draw of a trial comes from its own stream, so e.g. the
// channel of trial 7 does not depend on the architecture or SNR it is run under
const TAG_CHANNEL: u64 = 1;
const TAG_PAYLOAD: u64 = 2;
const TAG_NOISE: u64 = 3;
const TAG_SWITCH: u64 = 4;
const TAG_SYNC: u64 = 5;
const TAG_PLACEMENT: u64 = 6;

/// Everything a trial produces beyond the CSV metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub metrics: TrialMetrics,
    pub chains: usize,
    pub switches: Option<SwitchMatrix>,
    pub babf_fallback: Option<usize>,
    /// Worst cross-user leakage of the combiner on the true channel, dBc.
    pub leakage_dbc: f64,
    /// Set when the trial could not run as configured (e.g. BABF found no full-rank S).
    pub flag: Option<String>,
}

/// Uniform positions at least 0.5 m from the walls and 1 m from the access point.
fn random_positions(cfg: &ExperimentConfig, rng: &mut Rng) -> Vec<Point> {
    let s = &cfg.scene;
    let ap = Point::new(s.ap_x_m, s.ap_y_m);
    (0..cfg.users)
        .map(|_| loop {
            let p = Point::new(0.5 + rng.uniform() * (s.room_x_m - 1.0), 0.5 + rng.uniform() * (s.room_y_m - 1.0));
            if p.distance(&ap) >= 1.0 {
                break p;
            }
        })
        .collect()
}

pub fn trial_channel(cfg: &ExperimentConfig, antennas: usize, trial_id: u64) -> Result<ChannelSet> {
    let root = Rng::new(cfg.seed, trial_id);
    let ofdm = cfg.ofdm_config();
    let raw = match cfg.scenario {
        Scenario::Rayleigh => rayleigh_taps(
            cfg.users,
            antennas,
            ofdm.fft_size,
            cfg.rayleigh_taps,
            &mut root.substream(TAG_CHANNEL),
        )?,
        Scenario::Raytrace => {
            let s = &cfg.scene;
            let users = if s.users.is_empty() {
                random_positions(cfg, &mut root.substream(TAG_PLACEMENT))
            } else {
                s.users.clone()
            };
            let scene = RoomScene::rectangular(
                s.room_x_m,
                s.room_y_m,
                s.gamma,
                Point::new(s.ap_x_m, s.ap_y_m),
                users,
                antennas,
                s.carrier_hz,
                ofdm.subcarrier_spacing_hz(),
            );
            ray_trace(&scene, ofdm.fft_size, s.max_reflections)?
        }
    };
    let chan = raw.normalized_per_user();
    // offsets are drawn in both modes so that aligned and offset runs share every other draw
    let mut sync = root.substream(TAG_SYNC);
    let offsets: Vec<f64> = (0..cfg.users).map(|_| sync.uniform() * cfg.max_offset_samples).collect();
    match cfg.sync_mode {
        SyncMode::Aligned => Ok(chan),
        SyncMode::Offset => chan.with_timing_offsets(&offsets),
    }
}

fn switch_matrix(cfg: &ExperimentConfig, h_ref: &[Vec<C64>], antennas: usize, rng: &mut Rng) -> Result<(SwitchMatrix, Option<usize>, Option<String>)> {
    let k = cfg.users;
    let first_k = || SwitchMatrix::from_columns(antennas, &(0..k).map(|c| vec![c]).collect::<Vec<_>>());
    match cfg.switching {
        Switching::Identity => Ok((first_k()?, None, None)),
        Switching::Random => Ok((random_switch_matrix(antennas, k, rng)?, None, None)),
        Switching::Babf => match babf_select(h_ref, &cfg.babf_config()) {
            Ok(r) => Ok((r.switches, Some(r.fallback_level), None)),
            Err(e) => Ok((first_k()?, None, Some(format!("babf: {e}; one antenna per slot used")))),
        },
    }
}

struct Reception {
    chains: Vec<SampleStream<f64>>,
    analog: AnalogModel,
    switches: Option<SwitchMatrix>,
    babf_fallback: Option<usize>,
    flag: Option<String>,
}

fn receive(cfg: &ExperimentConfig, arch: ArchKind, chan: &ChannelSet, rx: &[SampleStream<f64>], fe: &FrontendConfig, trial_id: u64) -> Result<Reception> {
    let root = Rng::new(cfg.seed, trial_id);
    let mut noise = root.substream(TAG_NOISE);
    let antennas = chan.antennas();
    let h_ref = chan.at_bin(cfg.ofdm_config().reference_bin());
    let chains = cfg.chains(arch, antennas);
    Ok(match arch {
        ArchKind::Greenmo => {
            let (s, fallback, flag) = switch_matrix(cfg, &h_ref, antennas, &mut root.substream(TAG_SWITCH))?;
            let y = capture_switched(rx, &s, fe, &mut noise)?;
            Reception {
                chains: time_despread(&y, s.slots())?.chains,
                analog: AnalogModel::switched(&s, fe),
                switches: Some(s),
                babf_fallback: fallback,
                flag,
            }
        }
        ArchKind::Dbf => Reception {
            chains: capture_physical(rx, chains, fe, &mut noise)?,
            analog: AnalogModel::physical(antennas, chains),
            switches: None,
            babf_fallback: None,
            flag: None,
        },
        ArchKind::HbfFull | ArchKind::HbfPartial => {
            let mode = arch.hybrid_mode().expect("hybrid arch");
            let w = conjugate_phase_weights(&h_ref, chains, mode)?;
            Reception {
                chains: capture_hybrid(rx, &w, mode, fe, &mut noise)?,
                analog: AnalogModel::hybrid(&effective_hybrid_weights(&w, mode, antennas)?),
                switches: None,
                babf_fallback: None,
                flag: None,
            }
        }
        ArchKind::Fdma => unreachable!("fdma users are received one at a time"),
    })
}

/// Per data bin: the combiner and the true `chains x users` channel.
fn per_bin_truth(frame: &OfdmFrame, eq: &Equalized, chan_at: &dyn Fn(usize) -> Rows) -> (Vec<Option<Rows>>, Vec<Rows>) {
    frame
        .config
        .data_bins()
        .iter()
        .map(|&b| {
            let f = eq.combiner.bins.iter().position(|&x| x == b).expect("data bin estimated");
            (eq.combiner.weights[f].clone(), chan_at(b))
        })
        .unzip()
}

fn leakage_dbc(weights: &[Option<Rows>], truth: &[Rows]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (w, h) in weights.iter().zip(truth) {
        let Some(v) = w else { continue };
        for (u, row) in v.iter().enumerate() {
            let p: Vec<C64> = (0..h[0].len()).map(|j| row.iter().zip(h).map(|(a, hc)| a * hc[j]).sum()).collect();
            for (j, x) in p.iter().enumerate() {
                if j != u {
                    worst = worst.max(10.0 * (x.norm_sqr() / p[u].norm_sqr()).log10());
                }
            }
        }
    }
    worst.max(-300.0)
}

struct Decoded {
    sinr_db: Vec<f64>,
    recovered: Vec<Vec<u8>>,
    received: Vec<C64>,
    sent: Vec<C64>,
    leakage_dbc: f64,
}

#[allow(clippy::too_many_arguments)]
fn decode_users(cfg: &ExperimentConfig, frame: &OfdmFrame, eq: &Equalized, users: &[usize], weights: &[Option<Rows>], truth: &[Rows], noise_cov: &[Vec<C64>], noise_var: f64) -> Result<Decoded> {
    let ofdm = cfg.ofdm_config();
    let sinr_db = metrics::sinr(weights, truth, noise_cov, noise_var)?;
    let mut out = Decoded {
        sinr_db,
        recovered: Vec::new(),
        received: Vec::new(),
        sent: Vec::new(),
        leakage_dbc: leakage_dbc(weights, truth),
    };
    for (slot, &u) in users.iter().enumerate() {
        out.recovered.push(recover_bits(&ofdm, &eq.symbols[slot], frame.payload_len)?);
        out.received.extend(eq.symbols[slot].iter().flatten());
        out.sent.extend(frame.data_symbols[u].iter().flatten());
    }
    Ok(out)
}

pub fn run_trial(cfg: &ExperimentConfig, point: &TrialPoint, trial_id: u64) -> Result<TrialOutcome> {
    let ofdm = cfg.ofdm_config();
    let root = Rng::new(cfg.seed, trial_id);
    let antennas = point.antennas;
    let chan = trial_channel(cfg, antennas, trial_id)?;
    let payloads = random_payloads(&ofdm, cfg.users, cfg.ofdm.payload_symbols, &mut root.substream(TAG_PAYLOAD));
    let frame = build_frame(&ofdm, &payloads)?;
    let fe = FrontendConfig {
        insertion_loss_db: cfg.insertion_loss_db,
        snr_db: point.snr_db,
        quantizer_bits: cfg.quantizer_bits,
        oversample_factor: cfg.users,
    };
    let method = cfg.combiner.into();
    let tol = cfg.babf.rank_tolerance;
    let chains = cfg.chains(point.arch, antennas);

    let (decoded, switches, babf_fallback, flag) = if point.arch == ArchKind::Fdma {
        // users in disjoint bands: each is received alone on antenna 0
        let mut noise = root.substream(TAG_NOISE);
        let mut parts = Vec::with_capacity(cfg.users);
        for u in 0..cfg.users {
            let solo = ChannelSet::new(
                vec![vec![chan.gains()[u][0].clone()]],
                chan.carrier_hz(),
                chan.subcarrier_spacing_hz(),
            )?;
            let rx = apply(&solo, &frame.tx_streams[u..=u], ofdm.cp_len)?;
            let chain = capture_physical(&rx, 1, &fe, &mut noise)?;
            let grid = demodulate_chains(&chain, &ofdm, &frame.layout)?;
            let all = estimate_channel(&grid, &frame)?;
            let heff = EffectiveChannel {
                bins: all.bins.clone(),
                gains: vec![vec![all.gains[0][u].clone()]],
            };
            let eq = combine(&grid, &frame, &heff, method, tol)?;
            let (w, t) = per_bin_truth(&frame, &eq, &|b| vec![vec![chan.gain(u, 0, b)]]);
            parts.push(decode_users(cfg, &frame, &eq, &[u], &w, &t, &[vec![C64::new(1.0, 0.0)]], fe.noise_variance())?);
        }
        let mut d = Decoded {
            sinr_db: Vec::new(),
            recovered: Vec::new(),
            received: Vec::new(),
            sent: Vec::new(),
            leakage_dbc: -300.0,
        };
        for p in parts {
            d.sinr_db.extend(p.sinr_db);
            d.recovered.extend(p.recovered);
            d.received.extend(p.received);
            d.sent.extend(p.sent);
        }
        (d, None, None, None)
    } else {
        let rx = apply(&chan, &frame.tx_streams, ofdm.cp_len)?;
        let r = receive(cfg, point.arch, &chan, &rx, &fe, trial_id)?;
        let grid = demodulate_chains(&r.chains, &ofdm, &frame.layout)?;
        let heff = estimate_channel(&grid, &frame)?;
        let eq = combine(&grid, &frame, &heff, method, tol)?;
        let (w, t) = per_bin_truth(&frame, &eq, &|b| r.analog.effective(&chan.at_bin(b)));
        let users: Vec<usize> = (0..cfg.users).collect();
        let d = decode_users(cfg, &frame, &eq, &users, &w, &t, &r.analog.noise_cov, fe.noise_variance())?;
        (d, r.switches, r.babf_fallback, r.flag)
    };

    let (goodput_bps, ber) = metrics::goodput_and_ber(&decoded.recovered, &frame.payload_bits, &frame.timing())?;
    let evm_pct = metrics::evm_pct(&decoded.received, &decoded.sent)?;
    let linear: Vec<f64> = decoded.sinr_db.iter().map(|&s| metrics::db_to_linear(s)).collect();
    let bw = ofdm.user_bandwidth_hz;
    let capacity_bps = metrics::capacity(&linear, bw);
    let power = metrics::power(&cfg.power_model(), point.arch.power_arch(), antennas, chains, bw)?;
    let m = TrialMetrics {
        mean_sinr_db: metrics::mean(&decoded.sinr_db),
        sinr_db: decoded.sinr_db,
        evm_pct,
        evm_sinr_db: metrics::evm_sinr_db(evm_pct),
        ber,
        goodput_bps,
        capacity_bps,
        se_bps_per_hz: capacity_bps / (cfg.users as f64 * bw),
        bits_per_joule: power.bits_per_joule(goodput_bps),
        power,
    };
    if !m.mean_sinr_db.is_finite() {
        return Err(Error::NonFinite("mean_sinr_db"));
    }
    Ok(TrialOutcome {
        metrics: m,
        chains,
        switches,
        babf_fallback,
        leakage_dbc: decoded.leakage_dbc,
        flag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(arch: ArchKind, antennas: usize, snr_db: f64) -> TrialPoint {
        TrialPoint { arch, antennas, snr_db }
    }

    #[test]
    fn ideal_switched_pipeline() {
        let cfg = ExperimentConfig {
            antennas: vec![4],
            switching: Switching::Identity,
            ..ExperimentConfig::default()
        };
        let out = run_trial(&cfg, &point(ArchKind::Greenmo, 4, f64::INFINITY), 0).unwrap();
        assert_eq!(out.metrics.ber, 0.0);
        assert!(out.metrics.sinr_db.iter().all(|&s| s == metrics::SINR_CAP_DB));
        assert_eq!(out.switches, Some(SwitchMatrix::identity(4).unwrap()));
        assert!((out.metrics.goodput_bps - 48e6).abs() < 1e-6);
        assert!(out.leakage_dbc < -60.0);
    }

    #[test]
    fn greenmo_and_dbf_share_a_channel() {
        let cfg = ExperimentConfig {
            arch: vec![ArchKind::Greenmo, ArchKind::Dbf],
            dbf_chains: Some(4),
            ..ExperimentConfig::default()
        };
        let g = run_trial(&cfg, &point(ArchKind::Greenmo, 8, 15.0), 3).unwrap();
        let d = run_trial(&cfg, &point(ArchKind::Dbf, 8, 15.0), 3).unwrap();
        assert!(g.metrics.mean_sinr_db.is_finite() && d.metrics.mean_sinr_db.is_finite());
        assert_eq!((g.chains, d.chains), (4, 4));
        assert_eq!(g.metrics.power.total_mw, 762.0);
        assert_eq!(d.metrics.power.total_mw, 2032.0);
        assert_eq!(trial_channel(&cfg, 8, 3).unwrap(), trial_channel(&cfg, 8, 3).unwrap());
    }

    #[test]
    fn every_architecture_runs_noiseless() {
        let cfg = ExperimentConfig {
            users: 2,
            scenario: Scenario::Raytrace,
            ..ExperimentConfig::default()
        };
        for arch in [ArchKind::Greenmo, ArchKind::Dbf, ArchKind::HbfFull, ArchKind::HbfPartial, ArchKind::Fdma] {
            let out = run_trial(&cfg, &point(arch, 8, f64::INFINITY), 1).unwrap();
            assert_eq!(out.metrics.ber, 0.0, "{arch}");
            assert!(out.metrics.mean_sinr_db > 60.0, "{arch}: {}", out.metrics.mean_sinr_db);
        }
    }

    #[test]
    fn nullspace_combiner_matches_zf() {
        let zf = ExperimentConfig::default();
        let ns = ExperimentConfig {
            combiner: CombinerKind::Nullspace,
            ..ExperimentConfig::default()
        };
        let a = run_trial(&zf, &point(ArchKind::Greenmo, 8, 15.0), 2).unwrap();
        let b = run_trial(&ns, &point(ArchKind::Greenmo, 8, 15.0), 2).unwrap();
        for (x, y) in a.metrics.sinr_db.iter().zip(&b.metrics.sinr_db) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_and_noise_sensitive() {
        let cfg = ExperimentConfig::default();
        let p = point(ArchKind::Greenmo, 8, 10.0);
        assert_eq!(run_trial(&cfg, &p, 5).unwrap(), run_trial(&cfg, &p, 5).unwrap());
        let quiet = run_trial(&cfg, &point(ArchKind::Greenmo, 8, 30.0), 5).unwrap();
        assert!(quiet.metrics.mean_sinr_db > run_trial(&cfg, &p, 5).unwrap().metrics.mean_sinr_db);
    }

    #[test]
    fn sync_offsets_change_the_channel_only_by_phase() {
        let aligned = ExperimentConfig::default();
        let offset = ExperimentConfig {
            sync_mode: SyncMode::Offset,
            ..ExperimentConfig::default()
        };
        let a = trial_channel(&aligned, 4, 0).unwrap();
        let b = trial_channel(&offset, 4, 0).unwrap();
        assert_ne!(a, b);
        for u in 0..4 {
            for m in 0..4 {
                for f in 0..64 {
                    assert!((a.gain(u, m, f).norm() - b.gain(u, m, f).norm()).abs() < 1e-12);
                }
            }
        }
    }
}
