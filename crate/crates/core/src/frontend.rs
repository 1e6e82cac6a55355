//! Analog front ends: the switched single-chain array and the multi-chain baselines.
//!
//! Noise model: every antenna contributes its own white thermal noise ahead of any
//! analog network (switch, phase shifter or combiner). An antenna that is switched
//! off in a slot contributes neither signal nor noise to it. With `snr_db` the noise
//! variance per sample is `10^(-snr_db/10)`, relative to unit signal energy per
//! subcarrier through a unit-power channel, so a chain fed by one antenna sees exactly
//! the configured SNR whether it is physical or virtual.

use num_complex::Complex;

use crate::codes::{superpose, SwitchCode};
use crate::error::{Error, Result};
use crate::signal::{upsample, Rng, SampleStream};

pub type C64 = Complex<f64>;

/// `M x K` on/off assignment of antennas (rows) to slots (columns).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SwitchMatrix {
    rows: Vec<Vec<u8>>,
    slots: usize,
}

impl SwitchMatrix {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let slots = rows.first().map(Vec::len).ok_or(Error::Empty)?;
        if slots == 0 {
            return Err(Error::Empty);
        }
        if rows.iter().any(|r| r.len() != slots) {
            return Err(Error::Dimension("ragged switch matrix".into()));
        }
        if rows.iter().flatten().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("switch entries must be 0 or 1".into()));
        }
        for k in 0..slots {
            if rows.iter().all(|r| r[k] == 0) {
                return Err(Error::EmptyColumn(k));
            }
        }
        Ok(Self { rows, slots })
    }

    /// Builds from column membership lists: `columns[k]` holds the antennas on in slot `k`.
    pub fn from_columns(antennas: usize, columns: &[Vec<usize>]) -> Result<Self> {
        let mut rows = vec![vec![0u8; columns.len()]; antennas];
        for (k, col) in columns.iter().enumerate() {
            for &m in col {
                if m >= antennas {
                    return Err(Error::Dimension(format!("antenna {m} of {antennas}")));
                }
                rows[m][k] = 1;
            }
        }
        Self::new(rows)
    }

    pub fn identity(size: usize) -> Result<Self> {
        Self::new((0..size).map(|m| (0..size).map(|k| u8::from(m == k)).collect()).collect())
    }

    pub fn antennas(&self) -> usize {
        self.rows.len()
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn get(&self, antenna: usize, slot: usize) -> u8 {
        self.rows[antenna][slot]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn column(&self, slot: usize) -> Vec<u8> {
        self.rows.iter().map(|r| r[slot]).collect()
    }

    /// Antennas on in each slot.
    pub fn column_counts(&self) -> Vec<usize> {
        (0..self.slots)
            .map(|k| self.rows.iter().filter(|r| r[k] == 1).count())
            .collect()
    }

    /// Slot sequence driving `antenna`: the superposition of its slot codes.
    pub fn row_sequence(&self, antenna: usize) -> Result<Vec<u8>> {
        let codes = self.rows[antenna]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(k, _)| SwitchCode::new(self.slots, k))
            .collect::<Result<Vec<_>>>()?;
        if codes.is_empty() {
            return Ok(vec![0; self.slots]);
        }
        superpose(&codes)
    }

    /// Control word: one group of `ceil(K/4)` hex digits per antenna row, antenna 0
    /// first; within a row, slot 0 is the least significant bit.
    pub fn to_hex(&self) -> String {
        let width = self.slots.div_ceil(4);
        self.rows
            .iter()
            .map(|r| {
                let v: u64 = r.iter().enumerate().map(|(k, &b)| u64::from(b) << k).sum();
                format!("{v:0width$X}")
            })
            .collect()
    }

    pub fn from_hex(word: &str, slots: usize) -> Result<Self> {
        if slots == 0 || slots > 64 {
            return Err(Error::InvalidArgument(format!("{slots} slots")));
        }
        let width = slots.div_ceil(4);
        if word.is_empty() || !word.len().is_multiple_of(width) || !word.is_ascii() {
            return Err(Error::InvalidArgument(format!("control word {word:?}")));
        }
        let rows = word
            .as_bytes()
            .chunks(width)
            .map(|chunk| {
                let text = std::str::from_utf8(chunk).expect("ascii");
                let v = u64::from_str_radix(text, 16)
                    .map_err(|_| Error::InvalidArgument(format!("hex digit group {text:?}")))?;
                if slots < 64 && v >> slots != 0 {
                    return Err(Error::InvalidArgument(format!("{text} sets bits beyond slot {slots}")));
                }
                Ok((0..slots).map(|k| ((v >> k) & 1) as u8).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }
}

impl std::fmt::Display for SwitchMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontendConfig {
    /// Per-path switch plus combiner loss.
    pub insertion_loss_db: f64,
    pub snr_db: f64,
    /// Uniform I/Q quantizer on the sampled stream, off when `None`.
    pub quantizer_bits: Option<u32>,
    /// Slots per user sample period (K).
    pub oversample_factor: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            insertion_loss_db: 0.5,
            snr_db: 15.0,
            quantizer_bits: None,
            oversample_factor: 4,
        }
    }
}

impl FrontendConfig {
    /// Per-sample, per-antenna noise variance; zero for infinite SNR.
    pub fn noise_variance(&self) -> f64 {
        if self.snr_db.is_infinite() && self.snr_db > 0.0 {
            0.0
        } else {
            10f64.powf(-self.snr_db / 10.0)
        }
    }

    pub fn loss_amplitude(&self) -> f64 {
        10f64.powf(-self.insertion_loss_db / 20.0)
    }

    fn validate(&self) -> Result<()> {
        if self.oversample_factor == 0 {
            return Err(Error::InvalidArgument("oversample factor must be at least 1".into()));
        }
        if !(self.insertion_loss_db >= 0.0) {
            return Err(Error::InvalidArgument("insertion loss must be non-negative".into()));
        }
        if self.snr_db.is_nan() {
            return Err(Error::NonFinite("snr_db"));
        }
        Ok(())
    }
}

fn check_streams(streams: &[SampleStream<f64>]) -> Result<(usize, f64)> {
    let first = streams.first().ok_or(Error::Empty)?;
    let (len, rate) = (first.len(), first.rate_hz());
    if streams.iter().any(|s| s.len() != len || s.rate_hz() != rate) {
        return Err(Error::Dimension("antenna streams differ in length or rate".into()));
    }
    Ok((len, rate))
}

/// Samples the switched array: each antenna is interpolated to `K*B`, gets its own
/// noise, is gated by its slot sequence and scaled by the insertion loss, and all
/// antennas are summed into one stream.
pub fn capture_switched(
    antenna_streams: &[SampleStream<f64>],
    switches: &SwitchMatrix,
    cfg: &FrontendConfig,
    rng: &mut Rng,
) -> Result<SampleStream<f64>> {
    cfg.validate()?;
    let (len, rate) = check_streams(antenna_streams)?;
    if antenna_streams.len() != switches.antennas() {
        return Err(Error::Dimension(format!(
            "{} streams for a {}-antenna switch matrix",
            antenna_streams.len(),
            switches.antennas()
        )));
    }
    let k = switches.slots();
    if k != cfg.oversample_factor {
        return Err(Error::Dimension(format!(
            "switch matrix has {k} slots, front end runs at {}x",
            cfg.oversample_factor
        )));
    }
    let sigma2 = cfg.noise_variance();
    let gain = cfg.loss_amplitude();
    let mut out = vec![C64::new(0.0, 0.0); len * k];
    for (m, stream) in antenna_streams.iter().enumerate() {
        let gate = switches.row_sequence(m)?;
        if gate.iter().all(|&g| g == 0) {
            continue;
        }
        let fast = upsample(stream, k)?;
        for (n, (acc, s)) in out.iter_mut().zip(fast.samples()).enumerate() {
            if gate[n % k] == 1 {
                let noise = if sigma2 > 0.0 {
                    rng.complex_normal(sigma2)
                } else {
                    C64::new(0.0, 0.0)
                };
                *acc += (s + noise) * gain;
            }
        }
    }
    if let Some(bits) = cfg.quantizer_bits {
        quantize(&mut out, bits);
    }
    SampleStream::new(out, rate * k as f64)
}

/// One physical chain per antenna for the first `num_chains` antennas.
pub fn capture_physical(
    antenna_streams: &[SampleStream<f64>],
    num_chains: usize,
    cfg: &FrontendConfig,
    rng: &mut Rng,
) -> Result<Vec<SampleStream<f64>>> {
    cfg.validate()?;
    check_streams(antenna_streams)?;
    if num_chains == 0 || num_chains > antenna_streams.len() {
        return Err(Error::Dimension(format!(
            "{num_chains} chains for {} antennas",
            antenna_streams.len()
        )));
    }
    antenna_streams[..num_chains]
        .iter()
        .map(|s| {
            let mut samples = s.samples().to_vec();
            add_noise(&mut samples, cfg.noise_variance(), rng);
            if let Some(bits) = cfg.quantizer_bits {
                quantize(&mut samples, bits);
            }
            SampleStream::new(samples, s.rate_hz())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridMode {
    /// Every antenna feeds every chain.
    Fully,
    /// Chain `k` sees only the contiguous block of `M/K` antennas starting at `k*M/K`.
    Partially,
}

/// Whether `antenna` may feed `chain` in the given connection mode.
pub fn hybrid_connected(mode: HybridMode, antennas: usize, chains: usize, antenna: usize, chain: usize) -> bool {
    match mode {
        HybridMode::Fully => true,
        HybridMode::Partially => antenna / (antennas / chains) == chain,
    }
}

/// Phase-shifter network into `chains` physical chains: `chain_k = sum_m w[m][k] * antenna_m`.
///
/// Nonzero weights must be unit modulus (continuous phases). In partial mode, weights
/// outside each chain's antenna block are zeroed.
pub fn capture_hybrid(
    antenna_streams: &[SampleStream<f64>],
    weights: &[Vec<C64>],
    mode: HybridMode,
    cfg: &FrontendConfig,
    rng: &mut Rng,
) -> Result<Vec<SampleStream<f64>>> {
    cfg.validate()?;
    let (len, rate) = check_streams(antenna_streams)?;
    let w = effective_hybrid_weights(weights, mode, antenna_streams.len())?;
    let chains = w[0].len();
    let sigma2 = cfg.noise_variance();
    let noisy: Vec<Vec<C64>> = antenna_streams
        .iter()
        .map(|s| {
            let mut v = s.samples().to_vec();
            add_noise(&mut v, sigma2, rng);
            v
        })
        .collect();
    (0..chains)
        .map(|k| {
            let mut out = vec![C64::new(0.0, 0.0); len];
            for (m, ant) in noisy.iter().enumerate() {
                let wk = w[m][k];
                if wk == C64::new(0.0, 0.0) {
                    continue;
                }
                out.iter_mut().zip(ant).for_each(|(o, a)| *o += wk * a);
            }
            if let Some(bits) = cfg.quantizer_bits {
                quantize(&mut out, bits);
            }
            SampleStream::new(out, rate)
        })
        .collect()
}

/// Validates hybrid weights and applies the partial-connection mask.
pub fn effective_hybrid_weights(weights: &[Vec<C64>], mode: HybridMode, antennas: usize) -> Result<Vec<Vec<C64>>> {
    if weights.len() != antennas {
        return Err(Error::Dimension(format!(
            "{} weight rows for {antennas} antennas",
            weights.len()
        )));
    }
    let chains = weights[0].len();
    if chains == 0 || weights.iter().any(|r| r.len() != chains) {
        return Err(Error::Dimension("ragged weight matrix".into()));
    }
    if mode == HybridMode::Partially && !antennas.is_multiple_of(chains) {
        return Err(Error::Dimension(format!(
            "{antennas} antennas do not split into {chains} blocks"
        )));
    }
    let mut w = weights.to_vec();
    for (m, row) in w.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            if !hybrid_connected(mode, antennas, chains, m, k) {
                *v = C64::new(0.0, 0.0);
            } else if v.norm() != 0.0 && (v.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "weight ({m}, {k}) has modulus {}",
                    v.norm()
                )));
            }
        }
    }
    Ok(w)
}

/// Analog phase-only beam per chain: chain `k` co-phases user `k` over the antennas it
/// can reach. `channel` is `users x antennas` at the reference bin.
pub fn conjugate_phase_weights(channel: &[Vec<C64>], chains: usize, mode: HybridMode) -> Result<Vec<Vec<C64>>> {
    if channel.len() < chains {
        return Err(Error::Dimension(format!(
            "{} users cannot steer {chains} chains",
            channel.len()
        )));
    }
    let antennas = channel[0].len();
    if mode == HybridMode::Partially && (chains == 0 || !antennas.is_multiple_of(chains)) {
        return Err(Error::Dimension(format!(
            "{antennas} antennas do not split into {chains} blocks"
        )));
    }
    Ok((0..antennas)
        .map(|m| {
            (0..chains)
                .map(|k| {
                    if hybrid_connected(mode, antennas, chains, m, k) {
                        C64::from_polar(1.0, -channel[k][m].arg())
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect())
}

/// Linear model of a front end: chain outputs are `combining * antenna signals` plus
/// noise with covariance `noise_variance * noise_cov`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogModel {
    /// `chains x antennas`.
    pub combining: Vec<Vec<C64>>,
    /// `chains x chains`, in units of the per-antenna noise variance.
    pub noise_cov: Vec<Vec<C64>>,
}

impl AnalogModel {
    pub fn chains(&self) -> usize {
        self.combining.len()
    }

    /// Switched array after despreading: chain `k` sums its slot's antennas. Slots
    /// sample different instants, so their noise is independent.
    pub fn switched(switches: &SwitchMatrix, cfg: &FrontendConfig) -> Self {
        let g = cfg.loss_amplitude();
        let k = switches.slots();
        let combining = (0..k)
            .map(|c| (0..switches.antennas()).map(|m| C64::new(g * f64::from(switches.get(m, c)), 0.0)).collect())
            .collect();
        let counts = switches.column_counts();
        let noise_cov = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| if i == j { C64::new(g * g * counts[i] as f64, 0.0) } else { C64::new(0.0, 0.0) })
                    .collect()
            })
            .collect();
        Self { combining, noise_cov }
    }

    pub fn physical(antennas: usize, chains: usize) -> Self {
        let combining = (0..chains)
            .map(|c| (0..antennas).map(|m| C64::new(f64::from(u8::from(m == c)), 0.0)).collect())
            .collect();
        let noise_cov = (0..chains)
            .map(|i| (0..chains).map(|j| C64::new(f64::from(u8::from(i == j)), 0.0)).collect())
            .collect();
        Self { combining, noise_cov }
    }

    /// Phase-shifter network with already-masked weights (`antennas x chains`).
    pub fn hybrid(weights: &[Vec<C64>]) -> Self {
        let chains = weights[0].len();
        let combining: Vec<Vec<C64>> = (0..chains).map(|k| weights.iter().map(|row| row[k]).collect()).collect();
        // W^T conj(W): per-antenna noise is shared by every chain that taps it
        let noise_cov = (0..chains)
            .map(|i| {
                (0..chains)
                    .map(|j| weights.iter().map(|row| row[i] * row[j].conj()).sum())
                    .collect()
            })
            .collect();
        Self { combining, noise_cov }
    }

    /// Effective chain-by-user channel at one bin from a `users x antennas` matrix.
    pub fn effective(&self, channel: &[Vec<C64>]) -> Vec<Vec<C64>> {
        self.combining
            .iter()
            .map(|g| {
                channel
                    .iter()
                    .map(|h| g.iter().zip(h).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect()
    }
}

fn add_noise(samples: &mut [C64], sigma2: f64, rng: &mut Rng) {
    if sigma2 > 0.0 {
        samples.iter_mut().for_each(|s| *s += rng.complex_normal(sigma2));
    }
}

/// Uniform mid-rise quantizer per rail with full scale at four times the RMS level.
fn quantize(samples: &mut [C64], bits: u32) {
    let rms = (samples.iter().map(C64::norm_sqr).sum::<f64>() / samples.len() as f64 / 2.0).sqrt();
    if rms == 0.0 || bits == 0 {
        return;
    }
    let full = 4.0 * rms;
    let levels = (1u64 << bits.min(52)) as f64;
    let step = 2.0 * full / levels;
    let q = |v: f64| {
        let idx = (v / step).floor().clamp(-levels / 2.0, levels / 2.0 - 1.0);
        (idx + 0.5) * step
    };
    samples.iter_mut().for_each(|s| *s = C64::new(q(s.re), q(s.im)));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_free() -> FrontendConfig {
        FrontendConfig {
            insertion_loss_db: 0.0,
            snr_db: f64::INFINITY,
            quantizer_bits: None,
            oversample_factor: 1,
        }
    }

    fn random_streams(rng: &mut Rng, count: usize, len: usize) -> Vec<SampleStream<f64>> {
        (0..count)
            .map(|_| SampleStream::new((0..len).map(|_| rng.complex_normal(1.0)).collect(), 10e6).unwrap())
            .collect()
    }

    #[test]
    fn single_antenna_single_slot_passthrough() {
        let mut rng = Rng::new(1, 0);
        let x = random_streams(&mut rng, 1, 32);
        let s = SwitchMatrix::identity(1).unwrap();
        let y = capture_switched(&x, &s, &noise_free(), &mut rng).unwrap();
        assert_eq!(y.rate_hz(), 10e6);
        for (a, b) in y.samples().iter().zip(x[0].samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_switching_interleaves_interpolated_antennas() {
        let mut rng = Rng::new(2, 0);
        let x = random_streams(&mut rng, 4, 24);
        let cfg = FrontendConfig {
            oversample_factor: 4,
            ..noise_free()
        };
        let y = capture_switched(&x, &SwitchMatrix::identity(4).unwrap(), &cfg, &mut rng).unwrap();
        assert_eq!(y.rate_hz(), 40e6);
        for (k, stream) in x.iter().enumerate() {
            let fast = upsample(stream, 4).unwrap();
            for n in 0..24 {
                assert!((y.samples()[4 * n + k] - fast.samples()[4 * n + k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn shared_column_sums_antennas() {
        let mut rng = Rng::new(3, 0);
        let x = random_streams(&mut rng, 2, 16);
        let s = SwitchMatrix::new(vec![vec![1, 0], vec![1, 1]]).unwrap();
        let cfg = FrontendConfig {
            oversample_factor: 2,
            ..noise_free()
        };
        let y = capture_switched(&x, &s, &cfg, &mut rng).unwrap();
        let a = upsample(&x[0], 2).unwrap();
        let b = upsample(&x[1], 2).unwrap();
        for n in 0..16 {
            let slot0 = a.samples()[2 * n] + b.samples()[2 * n];
            assert!((y.samples()[2 * n] - slot0).norm() < 1e-12);
            assert!((y.samples()[2 * n + 1] - b.samples()[2 * n + 1]).norm() < 1e-12);
        }
    }

    #[test]
    fn switched_capture_is_linear() {
        let mut rng = Rng::new(4, 0);
        let x = random_streams(&mut rng, 3, 20);
        let z = random_streams(&mut rng, 3, 20);
        let s = SwitchMatrix::new(vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let cfg = FrontendConfig {
            oversample_factor: 2,
            insertion_loss_db: 0.5,
            ..noise_free()
        };
        let a = C64::new(0.3, -2.0);
        let mixed: Vec<_> = x
            .iter()
            .zip(&z)
            .map(|(p, q)| SampleStream::new(p.samples().iter().zip(q.samples()).map(|(u, v)| a * u + v).collect(), 10e6).unwrap())
            .collect();
        let lhs = capture_switched(&mixed, &s, &cfg, &mut rng).unwrap();
        let px = capture_switched(&x, &s, &cfg, &mut rng).unwrap();
        let pz = capture_switched(&z, &s, &cfg, &mut rng).unwrap();
        for i in 0..lhs.len() {
            assert!((lhs.samples()[i] - (a * px.samples()[i] + pz.samples()[i])).norm() < 1e-9);
        }
    }

    #[test]
    fn switched_dimension_errors() {
        let mut rng = Rng::new(5, 0);
        let x = random_streams(&mut rng, 2, 8);
        let cfg = FrontendConfig {
            oversample_factor: 2,
            ..noise_free()
        };
        let s3 = SwitchMatrix::identity(3).unwrap();
        assert!(capture_switched(&x, &s3, &cfg, &mut rng).is_err());
        let s2 = SwitchMatrix::identity(2).unwrap();
        let bad = FrontendConfig {
            oversample_factor: 4,
            ..noise_free()
        };
        assert!(capture_switched(&x, &s2, &bad, &mut rng).is_err());
        assert_eq!(SwitchMatrix::new(vec![vec![1, 0], vec![1, 0]]), Err(Error::EmptyColumn(1)));
    }

    #[test]
    fn physical_capture() {
        let mut rng = Rng::new(6, 0);
        let x = random_streams(&mut rng, 8, 16);
        let out = capture_physical(&x, 8, &noise_free(), &mut rng).unwrap();
        assert_eq!(out.len(), 8);
        assert_eq!(out[3], x[3]);
        assert!(capture_physical(&x, 9, &noise_free(), &mut rng).is_err());
    }

    #[test]
    fn physical_noise_is_independent_across_chains() {
        let mut rng = Rng::new(7, 0);
        let zeros = vec![SampleStream::<f64>::zeros(100_000, 1.0).unwrap(); 2];
        let cfg = FrontendConfig {
            snr_db: 0.0,
            ..noise_free()
        };
        let out = capture_physical(&zeros, 2, &cfg, &mut rng).unwrap();
        let (a, b) = (out[0].samples(), out[1].samples());
        let cross: C64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<C64>() / a.len() as f64;
        assert!(cross.norm() < 0.01, "cross {cross}");
    }

    #[test]
    fn one_hot_hybrid_equals_physical() {
        let mut rng = Rng::new(8, 0);
        let x = random_streams(&mut rng, 4, 16);
        let w: Vec<Vec<C64>> = (0..4)
            .map(|m| (0..2).map(|k| C64::new(f64::from(u8::from(m == k)), 0.0)).collect())
            .collect();
        let h = capture_hybrid(&x, &w, HybridMode::Fully, &noise_free(), &mut rng).unwrap();
        let p = capture_physical(&x, 2, &noise_free(), &mut rng).unwrap();
        assert_eq!(h, p);
    }

    #[test]
    fn conjugate_combining_gain_is_m() {
        // equal-magnitude channel with random phases, unit-power white symbols
        let m = 8;
        let len = 200_000;
        let mut rng = Rng::new(9, 0);
        let phases: Vec<f64> = (0..m).map(|_| rng.uniform() * std::f64::consts::TAU).collect();
        let sym: Vec<C64> = (0..len).map(|_| rng.complex_normal(1.0)).collect();
        let streams: Vec<_> = phases
            .iter()
            .map(|&p| SampleStream::new(sym.iter().map(|s| s * C64::from_polar(1.0, p)).collect(), 1.0).unwrap())
            .collect();
        let channel = vec![phases.iter().map(|&p| C64::from_polar(1.0, p)).collect::<Vec<_>>()];
        let w = conjugate_phase_weights(&channel, 1, HybridMode::Fully).unwrap();
        let cfg = FrontendConfig {
            snr_db: 10.0,
            ..noise_free()
        };
        let out = capture_hybrid(&streams, &w, HybridMode::Fully, &cfg, &mut rng).unwrap();
        // split output into signal (known m * sym) and noise
        let noise: f64 = out[0]
            .samples()
            .iter()
            .zip(&sym)
            .map(|(y, s)| (y - s * m as f64).norm_sqr())
            .sum::<f64>()
            / len as f64;
        let snr_out = 10.0 * ((m * m) as f64 / noise).log10();
        let gain = snr_out - 10.0;
        assert!((gain - 10.0 * (m as f64).log10()).abs() < 0.1, "gain {gain}");
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn partial_connection_blocks() {
        let mut rng = Rng::new(10, 0);
        let channel: Vec<Vec<C64>> = (0..8).map(|_| (0..64).map(|_| rng.complex_normal(1.0)).collect()).collect();
        let w = conjugate_phase_weights(&channel, 8, HybridMode::Partially).unwrap();
        for k in 0..8 {
            let touched: Vec<usize> = (0..64).filter(|&m| w[m][k].norm() > 0.0).collect();
            assert_eq!(touched, (8 * k..8 * k + 8).collect::<Vec<_>>());
        }
        let full = conjugate_phase_weights(&channel, 8, HybridMode::Fully).unwrap();
        let masked = effective_hybrid_weights(&full, HybridMode::Partially, 64).unwrap();
        assert_eq!(masked, w);
    }

    #[test]
    fn non_unit_weight_rejected() {
        let mut rng = Rng::new(11, 0);
        let x = random_streams(&mut rng, 2, 4);
        let w = vec![vec![C64::new(0.5, 0.0)], vec![C64::new(1.0, 0.0)]];
        assert!(capture_hybrid(&x, &w, HybridMode::Fully, &noise_free(), &mut rng).is_err());
    }

    #[test]
    fn hex_control_word() {
        let s = SwitchMatrix::new(vec![vec![1, 0, 0, 0], vec![0, 1, 1, 0], vec![1, 1, 1, 1]]).unwrap();
        assert_eq!(s.to_hex(), "16F");
        assert_eq!(SwitchMatrix::from_hex("16F", 4).unwrap(), s);
        let wide = SwitchMatrix::identity(8).unwrap();
        assert_eq!(wide.to_hex(), "0102040810204080");
        assert_eq!(SwitchMatrix::from_hex(&wide.to_hex(), 8).unwrap(), wide);
        assert!(SwitchMatrix::from_hex("1G", 4).is_err());
        assert!(SwitchMatrix::from_hex("31", 1).is_err());
    }

    #[test]
    fn row_sequences_are_code_superpositions() {
        let s = SwitchMatrix::new(vec![vec![1, 0, 1, 0], vec![0, 1, 0, 1]]).unwrap();
        assert_eq!(s.row_sequence(0).unwrap(), vec![1, 0, 1, 0]);
        assert_eq!(s.column_counts(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn analog_model_matches_hybrid_noise() {
        let w = vec![vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)], vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)]];
        let model = AnalogModel::hybrid(&w);
        assert!((model.noise_cov[0][0] - C64::new(2.0, 0.0)).norm() < 1e-12);
        // chain0 taps (1, -1), chain1 taps (j, 1): sum w_m0 conj(w_m1) = -j - 1
        assert!((model.noise_cov[0][1] - C64::new(-1.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn quantizer_error_shrinks_with_bits() {
        let mut rng = Rng::new(12, 0);
        let x: Vec<C64> = (0..4096).map(|_| rng.complex_normal(1.0)).collect();
        let err = |bits| {
            let mut y = x.clone();
            quantize(&mut y, bits);
            x.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / x.len() as f64
        };
        assert!(err(10) < err(6) / 100.0);
    }
}
