//! Sample streams, DFT conventions, fractional delay, noise and seeded randomness.
//!
//! DFT convention: forward transform is unnormalized, inverse carries `1/N`.
//! Bin `q` of an `N`-point transform maps to the signed frequency index
//! [`signed_bin`], so the upper half (including the Nyquist bin for even `N`)
//! is read as negative frequencies. Every routine that reinterprets bins as
//! frequencies (fractional delay, band-limited upsampling, zone despreading)
//! goes through that one function so their conventions agree exactly.

use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::num::{cast, Real};

/// Complex baseband samples tagged with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream<T: Real> {
    samples: Vec<Complex<T>>,
    rate_hz: f64,
}

impl<T: Real> SampleStream<T> {
    pub fn new(samples: Vec<Complex<T>>, rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty);
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("sample rate {rate_hz}")));
        }
        if samples.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::NonFinite("sample"));
        }
        Ok(Self { samples, rate_hz })
    }

    /// All-zero stream.
    pub fn zeros(len: usize, rate_hz: f64) -> Result<Self> {
        Self::new(vec![Complex::new(T::zero(), T::zero()); len], rate_hz)
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `|x|^2`.
    pub fn power(&self) -> T {
        let sum = self.samples.iter().fold(T::zero(), |acc, s| acc + s.norm_sqr());
        sum / cast(self.samples.len())
    }

    pub(crate) fn from_parts_unchecked(samples: Vec<Complex<T>>, rate_hz: f64) -> Self {
        debug_assert!(!samples.is_empty());
        Self { samples, rate_hz }
    }
}

/// Signed frequency index of bin `q` in an `n`-point DFT.
///
/// Bins with `2q < n` are non-negative; the rest (Nyquist included) are negative.
pub fn signed_bin(q: usize, n: usize) -> isize {
    if 2 * q < n {
        q as isize
    } else {
        q as isize - n as isize
    }
}

/// Cached forward/inverse plans for one transform size.
pub struct DftPlan<T: Real> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> DftPlan<T> {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Empty);
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, buf: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.len, "DFT buffer length");
        self.forward.process(buf);
    }

    /// Inverse transform in place, scaled by `1/N`.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.len, "DFT buffer length");
        self.inverse.process(buf);
        let scale = T::one() / cast(self.len);
        buf.iter_mut().for_each(|v| *v = v.scale(scale));
    }
}

pub fn dft<T: Real>(x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let plan = DftPlan::new(x.len())?;
    let mut buf = x.to_vec();
    plan.forward(&mut buf);
    Ok(buf)
}

pub fn idft<T: Real>(x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let plan = DftPlan::new(x.len())?;
    let mut buf = x.to_vec();
    plan.inverse(&mut buf);
    Ok(buf)
}

/// Reorders a spectrum so the most negative frequency comes first.
pub fn fftshift<V: Clone>(x: &[V]) -> Vec<V> {
    let mut out = x.to_vec();
    out.rotate_right(x.len() / 2);
    out
}

/// Inverse of [`fftshift`].
pub fn ifftshift<V: Clone>(x: &[V]) -> Vec<V> {
    let mut out = x.to_vec();
    out.rotate_left(x.len() / 2);
    out
}

/// Circularly delays `x` by `delay_samples` (fractional allowed): `y[n] = x(n - d)`.
///
/// Implemented as a per-bin phase ramp `exp(-j 2 pi f d)` with `f` from [`signed_bin`].
pub fn fractional_delay<T: Real>(x: &SampleStream<T>, delay_samples: f64) -> Result<SampleStream<T>> {
    if !delay_samples.is_finite() {
        return Err(Error::NonFinite("delay"));
    }
    let n = x.len();
    if 2.0 * delay_samples.abs() >= n as f64 {
        return Err(Error::InvalidArgument(format!(
            "delay {delay_samples} exceeds half the stream length {n}"
        )));
    }
    if delay_samples == 0.0 {
        return Ok(x.clone());
    }
    let plan = DftPlan::new(n)?;
    let mut buf = x.samples().to_vec();
    plan.forward(&mut buf);
    apply_delay_ramp(&mut buf, delay_samples);
    plan.inverse(&mut buf);
    Ok(SampleStream::from_parts_unchecked(buf, x.rate_hz()))
}

pub(crate) fn apply_delay_ramp<T: Real>(spectrum: &mut [Complex<T>], delay_samples: f64) {
    let n = spectrum.len();
    for (q, v) in spectrum.iter_mut().enumerate() {
        let f = signed_bin(q, n) as f64 / n as f64;
        let phase = -2.0 * std::f64::consts::PI * f * delay_samples;
        *v = *v * Complex::new(T::of(phase.cos()), T::of(phase.sin()));
    }
}

/// Exact band-limited (periodic sinc) interpolation by an integer factor.
///
/// Output sample `factor*n` equals input sample `n`; the rate is multiplied by `factor`.
pub fn upsample<T: Real>(x: &SampleStream<T>, factor: usize) -> Result<SampleStream<T>> {
    if factor == 0 {
        return Err(Error::InvalidArgument("upsampling factor 0".into()));
    }
    if factor == 1 {
        return Ok(x.clone());
    }
    let n = x.len();
    let spectrum = dft(x.samples())?;
    let big = n * factor;
    let mut wide = vec![Complex::new(T::zero(), T::zero()); big];
    let gain: T = cast(factor);
    for (q, v) in spectrum.iter().enumerate() {
        let idx = signed_bin(q, n).rem_euclid(big as isize) as usize;
        wide[idx] = v.scale(gain);
    }
    let samples = idft(&wide)?;
    Ok(SampleStream::from_parts_unchecked(samples, x.rate_hz() * factor as f64))
}

/// Adds circularly-symmetric complex Gaussian noise with per-sample variance `noise_power`.
pub fn add_awgn<T: Real>(x: &SampleStream<T>, noise_power: f64, rng: &mut Rng) -> Result<SampleStream<T>> {
    if !(noise_power >= 0.0) || !noise_power.is_finite() {
        return Err(Error::InvalidArgument(format!("noise power {noise_power}")));
    }
    if noise_power == 0.0 {
        return Ok(x.clone());
    }
    let samples = x
        .samples()
        .iter()
        .map(|s| {
            let n = rng.complex_normal(noise_power);
            s + Complex::new(T::of(n.re), T::of(n.im))
        })
        .collect();
    Ok(SampleStream::from_parts_unchecked(samples, x.rate_hz()))
}

/// Seeded random source: ChaCha20 keyed from `master_seed`, with `stream_id`
/// selecting the ChaCha stream (nonce).
///
/// The key is derived with `rand_core`'s `seed_from_u64` (PCG32 expansion), so a
/// given `(master_seed, stream_id)` pair yields the same draws on every platform.
/// Normal variates use `rand_distr::StandardNormal` (ziggurat).
#[derive(Debug, Clone)]
pub struct Rng {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
}

impl Rng {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent child stream identified by `tag`, same master seed.
    pub fn substream(&self, tag: u64) -> Rng {
        Rng::new(self.master_seed, splitmix64(self.stream_id ^ splitmix64(tag)))
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn bit(&mut self) -> u8 {
        (self.inner.next_u32() & 1) as u8
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Complex Gaussian with `E|z|^2 = variance`.
    pub fn complex_normal(&mut self, variance: f64) -> Complex<f64> {
        let s = (variance / 2.0).sqrt();
        Complex::new(self.normal() * s, self.normal() * s)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
