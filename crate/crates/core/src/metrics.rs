//! Link metrics (SINR, EVM, BER, goodput, capacity) and the architecture power model.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::frontend::C64;
use crate::linalg::Rows;
use crate::waveform::FrameTiming;

pub const SINR_CAP_DB: f64 = 80.0;

fn to_db(linear: f64) -> f64 {
    (10.0 * linear.log10()).clamp(-SINR_CAP_DB, SINR_CAP_DB)
}

/// SIR of `user` given its combined row `p = v_user * Heff`.
pub fn sir_db(p: &[C64], user: usize) -> f64 {
    let interference: f64 = p.iter().enumerate().filter(|&(j, _)| j != user).map(|(_, v)| v.norm_sqr()).sum();
    to_db(p[user].norm_sqr() / interference)
}

/// Per-user SINR in dB, the linear SINR averaged over bins.
///
/// `weights[f]` is the `users x chains` combiner at bin `f` (`None` = erased, counts as
/// zero), `truth[f]` the true `chains x users` channel, and the chain noise covariance
/// is `noise_var * noise_cov`.
pub fn sinr(weights: &[Option<Rows>], truth: &[Rows], noise_cov: &[Vec<C64>], noise_var: f64) -> Result<Vec<f64>> {
    if weights.len() != truth.len() || truth.is_empty() {
        return Err(Error::Dimension("one combiner per true channel bin".into()));
    }
    let users = truth[0].first().map_or(0, Vec::len);
    let cap = 10f64.powf(SINR_CAP_DB / 10.0);
    let mut acc = vec![0.0; users];
    for (w, h) in weights.iter().zip(truth) {
        let Some(v) = w else { continue };
        for (u, row) in v.iter().enumerate().take(users) {
            let p: Vec<C64> = (0..users).map(|j| row.iter().zip(h).map(|(a, hc)| a * hc[j]).sum()).collect();
            let signal = p[u].norm_sqr();
            let interference: f64 = p.iter().enumerate().filter(|&(j, _)| j != u).map(|(_, x)| x.norm_sqr()).sum();
            let noise: f64 = row
                .iter()
                .enumerate()
                .map(|(i, a)| row.iter().enumerate().map(|(j, b)| a * noise_cov[i][j] * b.conj()).sum::<C64>())
                .sum::<C64>()
                .re
                * noise_var;
            acc[u] += (signal / (interference + noise)).min(cap);
        }
    }
    Ok(acc.into_iter().map(|s| to_db(s / truth.len() as f64)).collect())
}

/// RMS error vector magnitude in percent over all symbols.
pub fn evm_pct(received: &[C64], sent: &[C64]) -> Result<f64> {
    if received.len() != sent.len() || sent.is_empty() {
        return Err(Error::Dimension("EVM needs equal, nonempty symbol lists".into()));
    }
    let err: f64 = received.iter().zip(sent).map(|(r, s)| (r - s).norm_sqr()).sum();
    let pow: f64 = sent.iter().map(|s| s.norm_sqr()).sum();
    Ok(100.0 * (err / pow).sqrt())
}

/// SINR implied by an EVM, `-20 log10(evm)`.
pub fn evm_sinr_db(evm_pct: f64) -> f64 {
    to_db((100.0 / evm_pct).powi(2))
}

/// Shannon sum rate, `sum_u B log2(1 + sinr_u)` with linear SINRs.
pub fn capacity(sinr_linear: &[f64], bandwidth_hz: f64) -> f64 {
    sinr_linear.iter().map(|s| bandwidth_hz * (1.0 + s.max(0.0)).log2()).sum()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Goodput counts whole packets: a user's packet is delivered only with zero
/// post-decoding bit errors, and then carries its full data capacity.
pub fn goodput_and_ber(recovered: &[Vec<u8>], sent: &[Vec<u8>], timing: &FrameTiming) -> Result<(f64, f64)> {
    if recovered.len() != sent.len() || sent.is_empty() {
        return Err(Error::Dimension("one recovered payload per user".into()));
    }
    let (mut errors, mut total, mut delivered) = (0usize, 0usize, 0usize);
    for (r, s) in recovered.iter().zip(sent) {
        if r.len() != s.len() {
            return Err(Error::Dimension(format!("recovered {} bits, sent {}", r.len(), s.len())));
        }
        let e = r.iter().zip(s).filter(|(a, b)| a != b).count();
        errors += e;
        total += s.len();
        delivered += usize::from(e == 0);
    }
    let goodput = (delivered * timing.bits_per_packet()) as f64 / timing.payload_airtime_s();
    Ok((goodput, errors as f64 / total.max(1) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arch {
    GreenMo,
    Dbf,
    Hbf,
    Fdma,
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greenmo" => Ok(Self::GreenMo),
            "dbf" => Ok(Self::Dbf),
            "hbf" => Ok(Self::Hbf),
            "fdma" => Ok(Self::Fdma),
            _ => Err(Error::InvalidArgument(format!("unknown architecture {s:?}"))),
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GreenMo => "greenmo",
            Self::Dbf => "dbf",
            Self::Hbf => "hbf",
            Self::Fdma => "fdma",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerModel {
    /// Front end of a single-chain receiver (LNA, mixer, LO, filters).
    pub single_chain_rfe_mw: f64,
    /// Front end per chain of a multi-chain receiver.
    pub per_chain_rfe_mw: f64,
    pub switch_mw: f64,
    pub adc_mw_per_10mhz: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            single_chain_rfe_mw: 354.0,
            per_chain_rfe_mw: 408.0,
            switch_mw: 1.0,
            adc_mw_per_10mhz: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerReport {
    pub rfe_mw: f64,
    pub switch_mw: f64,
    pub adc_mw: f64,
    pub total_mw: f64,
}

impl PowerReport {
    pub fn bits_per_joule(&self, goodput_bps: f64) -> f64 {
        goodput_bps / (self.total_mw * 1e-3)
    }
}

/// `chains` is the number of sampled streams: virtual chains for greenmo, physical
/// chains for dbf/hbf, users for fdma.
pub fn power(model: &PowerModel, arch: Arch, antennas: usize, chains: usize, per_chain_bw_hz: f64) -> Result<PowerReport> {
    if antennas == 0 || chains == 0 || !(per_chain_bw_hz > 0.0) {
        return Err(Error::InvalidArgument("power model parameters must be positive".into()));
    }
    let (rfe_mw, switch_mw) = match arch {
        Arch::GreenMo => (model.single_chain_rfe_mw, model.switch_mw * antennas as f64),
        Arch::Fdma => (model.single_chain_rfe_mw, 0.0),
        Arch::Dbf | Arch::Hbf => (model.per_chain_rfe_mw * chains as f64, 0.0),
    };
    // total sampled bandwidth is the same whether it is one fast ADC or several slow ones
    let adc_mw = model.adc_mw_per_10mhz * chains as f64 * per_chain_bw_hz / 10e6;
    Ok(PowerReport {
        rfe_mw,
        switch_mw,
        adc_mw,
        total_mw: rfe_mw + switch_mw + adc_mw,
    })
}

/// FoM (joules per conversion step) that puts a 12-bit, 10 MS/s converter at 100 mW.
pub const ADC_FOM_J: f64 = 0.1 / (4096.0 * 10e6);

/// `FoM * 2^q * fs`, in watts.
pub fn adc_power(fom_j: f64, bits: u32, fs_hz: f64) -> Result<f64> {
    if !(fom_j > 0.0 && fs_hz > 0.0) || bits == 0 {
        return Err(Error::InvalidArgument("ADC parameters must be positive".into()));
    }
    Ok(fom_j * 2f64.powi(bits as i32) * fs_hz)
}

/// One row of results.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub sinr_db: Vec<f64>,
    pub mean_sinr_db: f64,
    pub evm_pct: f64,
    pub evm_sinr_db: f64,
    pub ber: f64,
    pub goodput_bps: f64,
    pub capacity_bps: f64,
    pub se_bps_per_hz: f64,
    pub power: PowerReport,
    pub bits_per_joule: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median (mean of the middle pair for even lengths); NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
