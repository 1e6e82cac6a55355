//! Recovering `K` virtual chains at rate `B` from one stream sampled at `K*B`.
//!
//! The time path slices samples `Kn+k` into chain `k` and delays it by `k/K`
//! of a chain sample, which lines every chain up with chain 0. The frequency path
//! reaches the same chains through the harmonic zones of the fast stream and the
//! inverse phase matrix; it exists to cross-check the time path.

use num_complex::Complex;

use crate::codes::phase_matrix;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::signal::{apply_delay_ramp, signed_bin, DftPlan, SampleStream};

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualChainSet<T: Real> {
    pub chains: Vec<SampleStream<T>>,
    pub slot_of_chain: Vec<usize>,
}

impl<T: Real> VirtualChainSet<T> {
    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }
}

/// The `K` bandwidth-`B` zones of a `K*B`-rate spectrum.
///
/// Zone `r` is the band centred on harmonic `r*B` (harmonics above `K/2` are the
/// negative ones); within a zone, column `q` holds signed offset `signed_bin(q, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumZones<T: Real> {
    pub zones: Vec<Vec<Complex<T>>>,
}

fn check(y: &SampleStream<impl Real>, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if !y.len().is_multiple_of(k) {
        return Err(Error::NotDivisible { len: y.len(), by: k });
    }
    Ok(y.len() / k)
}

/// Slices samples `Kn+k` into chain `k` without delay compensation.
pub fn slice_chains<T: Real>(y: &SampleStream<T>, k: usize) -> Result<Vec<SampleStream<T>>> {
    let len = check(y, k)?;
    let rate = y.rate_hz() / k as f64;
    (0..k)
        .map(|slot| {
            let s = (0..len).map(|n| y.samples()[n * k + slot]).collect();
            SampleStream::new(s, rate)
        })
        .collect()
}

/// Inverse of [`slice_chains`].
pub fn interleave_chains<T: Real>(chains: &[SampleStream<T>]) -> Result<SampleStream<T>> {
    let k = chains.len();
    let first = chains.first().ok_or(Error::Empty)?;
    let len = first.len();
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::Dimension("chains differ in length".into()));
    }
    let mut out = Vec::with_capacity(len * k);
    for n in 0..len {
        out.extend(chains.iter().map(|c| c.samples()[n]));
    }
    SampleStream::new(out, first.rate_hz() * k as f64)
}

pub fn time_despread<T: Real>(y: &SampleStream<T>, k: usize) -> Result<VirtualChainSet<T>> {
    let raw = slice_chains(y, k)?;
    let len = raw[0].len();
    let plan = DftPlan::<T>::new(len)?;
    let chains = raw
        .into_iter()
        .enumerate()
        .map(|(slot, chain)| {
            if slot == 0 {
                return Ok(chain);
            }
            let rate = chain.rate_hz();
            let mut buf = chain.into_samples();
            plan.forward(&mut buf);
            apply_delay_ramp(&mut buf, slot as f64 / k as f64);
            plan.inverse(&mut buf);
            SampleStream::new(buf, rate)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VirtualChainSet {
        chains,
        slot_of_chain: (0..k).collect(),
    })
}

/// Splits the spectrum of `y` into its `K` harmonic zones.
pub fn spectrum_zones<T: Real>(y: &SampleStream<T>, k: usize) -> Result<SpectrumZones<T>> {
    let len = check(y, k)?;
    let total = y.len();
    let plan = DftPlan::<T>::new(total)?;
    let mut spec = y.samples().to_vec();
    plan.forward(&mut spec);
    let zones = (0..k)
        .map(|r| {
            (0..len)
                .map(|q| {
                    let idx = (signed_bin(q, len) + (r * len) as isize).rem_euclid(total as isize);
                    spec[idx as usize]
                })
                .collect()
        })
        .collect();
    Ok(SpectrumZones { zones })
}

pub fn freq_despread<T: Real>(y: &SampleStream<T>, k: usize) -> Result<VirtualChainSet<T>> {
    let zones = spectrum_zones(y, k)?.zones;
    let len = zones[0].len();
    let unmix = phase_matrix(k)?.unmixing::<T>();
    let plan = DftPlan::<T>::new(len)?;
    let rate = y.rate_hz() / k as f64;
    let chains = unmix
        .iter()
        .map(|row| {
            let mut buf: Vec<Complex<T>> = (0..len)
                .map(|q| {
                    row.iter()
                        .zip(&zones)
                        .fold(Complex::new(T::zero(), T::zero()), |acc, (w, z)| acc + *w * z[q])
                })
                .collect();
            plan.inverse(&mut buf);
            SampleStream::new(buf, rate)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VirtualChainSet {
        chains,
        slot_of_chain: (0..k).collect(),
    })
}
