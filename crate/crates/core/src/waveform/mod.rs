//! 802.11-style OFDM framing for the uplink users.
//!
//! Per user: convolutional encode, block interleave, 16-QAM map, place on the
//! 48 data subcarriers, IFFT, prepend the cyclic prefix. The preamble gives each
//! user its own long-training-symbol slot so channel estimates never collide.
//!
//! Time-domain symbols use the unitary transform (`sqrt(N) * idft`), so a unit
//! energy constellation point on a subcarrier is unit energy per bin after the
//! receiver's `dft / sqrt(N)`.

pub mod coding;
pub mod qam;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::signal::{DftPlan, Rng, SampleStream};

pub use coding::{conv_encode, viterbi_decode};
pub use qam::{qam16_demap, qam16_map};

pub type C64 = Complex<f64>;

/// 802.11 L-LTF values on subcarriers -26..=26 (DC included as zero).
const LTS: [i8; 53] = [
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0, 1, -1, -1, 1, 1, -1, 1,
    -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1,
];

const PILOT_FREQS: [isize; 4] = [-21, -7, 7, 21];
const PILOT_VALUES: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub fft_size: usize,
    pub cp_len: usize,
    pub user_bandwidth_hz: f64,
    /// Long training symbols per user slot.
    pub lts_repetitions: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            fft_size: 64,
            cp_len: 16,
            user_bandwidth_hz: 10e6,
            lts_repetitions: 2,
        }
    }
}

impl OfdmConfig {
    pub const DATA_SUBCARRIERS: usize = 48;
    pub const PILOT_SUBCARRIERS: usize = 4;
    pub const NULL_SUBCARRIERS: usize = 12;
    pub const CODE_RATE: f64 = 0.5;

    pub fn validate(&self) -> Result<()> {
        if self.fft_size != 64 {
            return Err(Error::InvalidArgument("only the 64-bin OFDM layout is supported".into()));
        }
        if self.cp_len == 0 || self.cp_len >= self.fft_size {
            return Err(Error::InvalidArgument(format!("cyclic prefix {}", self.cp_len)));
        }
        if !(self.user_bandwidth_hz > 0.0) {
            return Err(Error::InvalidArgument("user bandwidth must be positive".into()));
        }
        if self.lts_repetitions == 0 {
            return Err(Error::InvalidArgument("at least one LTS per user".into()));
        }
        Ok(())
    }

    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    pub fn symbol_duration_s(&self) -> f64 {
        self.symbol_len() as f64 / self.user_bandwidth_hz
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.user_bandwidth_hz / self.fft_size as f64
    }

    pub fn coded_bits_per_symbol(&self) -> usize {
        Self::DATA_SUBCARRIERS * qam::BITS_PER_SYMBOL
    }

    pub fn data_bits_per_symbol(&self) -> usize {
        self.coded_bits_per_symbol() / 2
    }

    /// Error-free per-user payload rate: `B * (48/64) * 4 * 1/2 * (64/80)`.
    pub fn user_data_rate_bps(&self) -> f64 {
        self.data_bits_per_symbol() as f64 / self.symbol_duration_s()
    }

    fn bin(&self, freq: isize) -> usize {
        freq.rem_euclid(self.fft_size as isize) as usize
    }

    /// DFT bins of the data subcarriers in increasing frequency.
    pub fn data_bins(&self) -> Vec<usize> {
        (-26isize..=26)
            .filter(|f| *f != 0 && !PILOT_FREQS.contains(f))
            .map(|f| self.bin(f))
            .collect()
    }

    pub fn pilot_bins(&self) -> Vec<usize> {
        PILOT_FREQS.iter().map(|&f| self.bin(f)).collect()
    }

    /// Data and pilot bins (52) in increasing frequency.
    pub fn used_bins(&self) -> Vec<usize> {
        (-26isize..=26).filter(|f| *f != 0).map(|f| self.bin(f)).collect()
    }

    /// Known training value on every bin (zero on unused bins).
    pub fn lts_spectrum(&self) -> Vec<C64> {
        let mut spec = vec![C64::new(0.0, 0.0); self.fft_size];
        for (i, &v) in LTS.iter().enumerate() {
            spec[self.bin(i as isize - 26)] = C64::new(f64::from(v), 0.0);
        }
        spec
    }

    /// Data bin closest to DC (ties to the positive side).
    pub fn reference_bin(&self) -> usize {
        self.bin(1)
    }
}

/// Symbol schedule of a frame: `users * lts_repetitions` training symbols, one
/// user at a time, then `payload_symbols` data symbols sent by all users at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub users: usize,
    pub lts_repetitions: usize,
    pub payload_symbols: usize,
    pub symbol_len: usize,
    pub cp_len: usize,
}

impl FrameLayout {
    pub fn total_symbols(&self) -> usize {
        self.users * self.lts_repetitions + self.payload_symbols
    }

    pub fn total_samples(&self) -> usize {
        self.total_symbols() * self.symbol_len
    }

    /// Symbol index of repetition `rep` of `user`'s training slot.
    pub fn lts_symbol(&self, user: usize, rep: usize) -> usize {
        user * self.lts_repetitions + rep
    }

    pub fn payload_symbol(&self, p: usize) -> usize {
        self.users * self.lts_repetitions + p
    }

    /// Sample range of the FFT body of symbol `index`.
    pub fn body(&self, index: usize) -> std::ops::Range<usize> {
        let start = index * self.symbol_len + self.cp_len;
        start..start + self.symbol_len - self.cp_len
    }
}

/// Timing needed to turn delivered packets into a rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTiming {
    pub payload_symbols: usize,
    pub symbol_duration_s: f64,
    pub data_bits_per_symbol: usize,
}

impl FrameTiming {
    pub fn payload_airtime_s(&self) -> f64 {
        self.payload_symbols as f64 * self.symbol_duration_s
    }

    pub fn bits_per_packet(&self) -> usize {
        self.payload_symbols * self.data_bits_per_symbol
    }
}

#[derive(Debug, Clone)]
pub struct OfdmFrame {
    pub config: OfdmConfig,
    pub layout: FrameLayout,
    /// Unpadded payload per user.
    pub payload_bits: Vec<Vec<u8>>,
    /// Payload length before padding (shared by all users).
    pub payload_len: usize,
    /// Training slot index of each user (equals the user index).
    pub lts_slot: Vec<usize>,
    /// Transmitted constellation points per user, `[payload symbol][data subcarrier]`.
    pub data_symbols: Vec<Vec<Vec<C64>>>,
    pub tx_streams: Vec<SampleStream<f64>>,
}

impl OfdmFrame {
    pub fn users(&self) -> usize {
        self.payload_bits.len()
    }

    pub fn timing(&self) -> FrameTiming {
        FrameTiming {
            payload_symbols: self.layout.payload_symbols,
            symbol_duration_s: self.config.symbol_duration_s(),
            data_bits_per_symbol: self.config.data_bits_per_symbol(),
        }
    }
}

/// Payload bits that exactly fill `symbols` OFDM symbols after the code tail.
pub fn payload_capacity(cfg: &OfdmConfig, symbols: usize) -> usize {
    (symbols * cfg.data_bits_per_symbol()).saturating_sub(coding::TAIL_BITS)
}

pub fn random_payloads(cfg: &OfdmConfig, users: usize, symbols: usize, rng: &mut Rng) -> Vec<Vec<u8>> {
    let n = payload_capacity(cfg, symbols);
    (0..users).map(|_| (0..n).map(|_| rng.bit()).collect()).collect()
}

/// 802.11a first interleaver permutation: coded bit `k` goes to position
/// `(N/16)(k mod 16) + floor(k/16)`.
pub fn interleave(bits: &[u8]) -> Vec<u8> {
    let n = bits.len();
    let mut out = vec![0u8; n];
    for (k, &b) in bits.iter().enumerate() {
        out[(n / 16) * (k % 16) + k / 16] = b;
    }
    out
}

pub fn deinterleave(bits: &[u8]) -> Vec<u8> {
    let n = bits.len();
    (0..n).map(|k| bits[(n / 16) * (k % 16) + k / 16]).collect()
}

fn modulate(plan: &DftPlan<f64>, spectrum: &[C64], cp_len: usize, out: &mut [C64]) {
    let n = spectrum.len();
    let mut body = spectrum.to_vec();
    plan.inverse(&mut body);
    let scale = (n as f64).sqrt();
    body.iter_mut().for_each(|v| *v *= scale);
    out[..cp_len].copy_from_slice(&body[n - cp_len..]);
    out[cp_len..].copy_from_slice(&body);
}

/// Builds every user's transmit stream; all payloads must share one length.
pub fn build_frame(cfg: &OfdmConfig, payloads: &[Vec<u8>]) -> Result<OfdmFrame> {
    cfg.validate()?;
    let users = payloads.len();
    if users == 0 {
        return Err(Error::InvalidArgument("at least one user".into()));
    }
    let payload_len = payloads[0].len();
    if payloads.iter().any(|p| p.len() != payload_len) {
        return Err(Error::Dimension("payloads differ in length".into()));
    }
    let per_symbol = cfg.data_bits_per_symbol();
    let payload_symbols = (payload_len + coding::TAIL_BITS).div_ceil(per_symbol);
    let layout = FrameLayout {
        users,
        lts_repetitions: cfg.lts_repetitions,
        payload_symbols,
        symbol_len: cfg.symbol_len(),
        cp_len: cfg.cp_len,
    };
    let plan = DftPlan::<f64>::new(cfg.fft_size)?;
    let data_bins = cfg.data_bins();
    let pilot_bins = cfg.pilot_bins();
    let lts = cfg.lts_spectrum();
    let fill = payload_capacity(cfg, payload_symbols);

    let mut data_symbols = Vec::with_capacity(users);
    let mut tx_streams = Vec::with_capacity(users);
    for (u, bits) in payloads.iter().enumerate() {
        let mut padded = bits.clone();
        padded.resize(fill, 0);
        let coded = conv_encode(&padded);
        let mut samples = vec![C64::new(0.0, 0.0); layout.total_samples()];
        let sym = layout.symbol_len;
        for rep in 0..layout.lts_repetitions {
            let s = layout.lts_symbol(u, rep) * sym;
            modulate(&plan, &lts, cfg.cp_len, &mut samples[s..s + sym]);
        }
        let mut grid = Vec::with_capacity(payload_symbols);
        for (p, chunk) in coded.chunks_exact(cfg.coded_bits_per_symbol()).enumerate() {
            let points = qam16_map(&interleave(chunk))?;
            let mut spec = vec![C64::new(0.0, 0.0); cfg.fft_size];
            for (&b, &v) in data_bins.iter().zip(&points) {
                spec[b] = v;
            }
            for (&b, &v) in pilot_bins.iter().zip(&PILOT_VALUES) {
                spec[b] = C64::new(v, 0.0);
            }
            let s = layout.payload_symbol(p) * sym;
            modulate(&plan, &spec, cfg.cp_len, &mut samples[s..s + sym]);
            grid.push(points);
        }
        data_symbols.push(grid);
        tx_streams.push(SampleStream::new(samples, cfg.user_bandwidth_hz)?);
    }
    Ok(OfdmFrame {
        config: cfg.clone(),
        layout,
        payload_bits: payloads.to_vec(),
        payload_len,
        lts_slot: (0..users).collect(),
        data_symbols,
        tx_streams,
    })
}

/// Receive-side bit recovery from equalized data symbols `[payload symbol][data subcarrier]`.
pub fn recover_bits(cfg: &OfdmConfig, symbols: &[Vec<C64>], payload_len: usize) -> Result<Vec<u8>> {
    let mut coded = Vec::with_capacity(symbols.len() * cfg.coded_bits_per_symbol());
    for row in symbols {
        if row.len() != OfdmConfig::DATA_SUBCARRIERS {
            return Err(Error::Dimension(format!("{} data symbols per OFDM symbol", row.len())));
        }
        coded.extend(deinterleave(&qam16_demap(row)));
    }
    let mut bits = viterbi_decode(&coded)?;
    if bits.len() < payload_len {
        return Err(Error::Dimension("fewer decoded bits than payload".into()));
    }
    bits.truncate(payload_len);
    Ok(bits)
}

/// Receiver FFT of one symbol body, unitary scaling.
pub fn demodulate_body(plan: &DftPlan<f64>, body: &[C64]) -> Vec<C64> {
    let mut buf = body.to_vec();
    plan.forward(&mut buf);
    let scale = 1.0 / (buf.len() as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}
