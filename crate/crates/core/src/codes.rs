//! Duty-cycled on/off switching codes and their harmonic structure.
//!
//! Indices are 0-based: code `i` is on in slot `i` of every `K`-slot period
//! (the one-based `c_{i+1}` in the usual notation). A code is stored as one
//! period; longer sequences index it modulo `K`.

use std::f64::consts::PI;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::signal::dft;

/// One-hot slot code with period `num_slots`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SwitchCode {
    num_slots: usize,
    phase_index: usize,
}

impl SwitchCode {
    pub fn new(num_slots: usize, phase_index: usize) -> Result<Self> {
        if num_slots == 0 {
            return Err(Error::InvalidArgument("code period must be positive".into()));
        }
        if phase_index >= num_slots {
            return Err(Error::InvalidArgument(format!(
                "phase index {phase_index} outside 0..{num_slots}"
            )));
        }
        Ok(Self {
            num_slots,
            phase_index,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn phase_index(&self) -> usize {
        self.phase_index
    }

    /// Code value at sample `n` of the periodic sequence.
    pub fn at(&self, n: usize) -> u8 {
        u8::from(n % self.num_slots == self.phase_index)
    }

    /// One period.
    pub fn bits(&self) -> Vec<u8> {
        (0..self.num_slots).map(|n| self.at(n)).collect()
    }
}

pub fn generate_codes(num_slots: usize) -> Result<Vec<SwitchCode>> {
    if num_slots == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    (0..num_slots).map(|i| SwitchCode::new(num_slots, i)).collect()
}

/// DFT of `code` repeated out to `num_samples`.
///
/// Nonzero only at bins `m * num_samples / K`, each of magnitude `num_samples / K`
/// and phase `-2 pi i m / K`.
pub fn code_spectrum<T: Real>(code: &SwitchCode, num_samples: usize) -> Result<Vec<Complex<T>>> {
    let k = code.num_slots();
    if num_samples == 0 || !num_samples.is_multiple_of(k) {
        return Err(Error::NotDivisible {
            len: num_samples,
            by: k,
        });
    }
    let seq: Vec<Complex<T>> = (0..num_samples)
        .map(|n| Complex::new(T::of(f64::from(code.at(n))), T::zero()))
        .collect();
    dft(&seq)
}

/// `K x K` table of harmonic phases: row = code index, column = harmonic index.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    order: usize,
    entries: Vec<Vec<f64>>,
}

impl PhaseMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Unreduced phases `2 pi i j / K` in radians.
    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn get(&self, code: usize, harmonic: usize) -> f64 {
        self.entries[code][harmonic]
    }

    /// Element-wise `exp(-j * entries)`: the mixing from despread chains to spectral zones.
    pub fn mixing<T: Real>(&self) -> Vec<Vec<Complex<T>>> {
        self.map_exp(-1.0)
    }

    /// Element-wise `exp(+j * entries) / K`: the inverse of [`PhaseMatrix::mixing`].
    pub fn unmixing<T: Real>(&self) -> Vec<Vec<Complex<T>>> {
        let scale = T::one() / T::of(self.order as f64);
        self.map_exp(1.0)
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.scale(scale)).collect())
            .collect()
    }

    fn map_exp<T: Real>(&self, sign: f64) -> Vec<Vec<Complex<T>>> {
        self.entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&p| {
                        // reduce before evaluating trig so large entries keep precision
                        let r = (sign * p).rem_euclid(2.0 * PI);
                        Complex::new(T::of(r.cos()), T::of(r.sin()))
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn phase_matrix(order: usize) -> Result<PhaseMatrix> {
    if order == 0 {
        return Err(Error::InvalidArgument("phase matrix order must be positive".into()));
    }
    let k = order as f64;
    let entries = (0..order)
        .map(|i| (0..order).map(|j| 2.0 * PI * (i * j) as f64 / k).collect())
        .collect();
    Ok(PhaseMatrix { order, entries })
}

/// Slot sequence of an antenna driven by several codes at once.
pub fn superpose(codes: &[SwitchCode]) -> Result<Vec<u8>> {
    let first = codes.first().ok_or(Error::Empty)?;
    let k = first.num_slots();
    let mut out = vec![0u8; k];
    for code in codes {
        if code.num_slots() != k {
            return Err(Error::Dimension(format!(
                "codes of period {k} and {} mixed",
                code.num_slots()
            )));
        }
        let slot = &mut out[code.phase_index()];
        if *slot == 1 {
            return Err(Error::InvalidArgument(format!(
                "phase index {} listed twice",
                code.phase_index()
            )));
        }
        *slot = 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_slot_codes() {
        let codes = generate_codes(4).unwrap();
        let bits: Vec<_> = codes.iter().map(SwitchCode::bits).collect();
        assert_eq!(
            bits,
            vec![vec![1, 0, 0, 0], vec![0, 1, 0, 0], vec![0, 0, 1, 0], vec![0, 0, 0, 1]]
        );
        assert_eq!(generate_codes(1).unwrap()[0].bits(), vec![1]);
        assert!(generate_codes(0).is_err());
    }

    #[test]
    fn orthogonal_and_complete() {
        for k in [1, 2, 3, 4, 8] {
            let codes = generate_codes(k).unwrap();
            for n in 0..3 * k {
                let total: u32 = codes.iter().map(|c| u32::from(c.at(n))).sum();
                assert_eq!(total, 1);
            }
            for a in &codes {
                for b in &codes {
                    let dot: u32 = (0..k).map(|n| u32::from(a.at(n) * b.at(n))).sum();
                    assert_eq!(dot, u32::from(a == b));
                }
            }
        }
    }

    #[test]
    fn spectrum_of_second_code() {
        let code = SwitchCode::new(4, 1).unwrap();
        let spec = code_spectrum::<f64>(&code, 64).unwrap();
        let want_phase: [f64; 4] = [0.0, -90.0, -180.0, -270.0];
        for (bin, v) in spec.iter().enumerate() {
            if bin % 16 == 0 {
                let m = bin / 16;
                assert!((v.norm() - 16.0).abs() < 1e-9);
                let want = Complex::from_polar(1.0, want_phase[m].to_radians());
                assert!((v / v.norm() - want).norm() < 1e-9, "bin {bin}");
            } else {
                assert!(v.norm() < 1e-9, "bin {bin} leaks {}", v.norm());
            }
        }
    }

    #[test]
    fn spectrum_edge_cases() {
        let one = SwitchCode::new(1, 0).unwrap();
        let spec = code_spectrum::<f64>(&one, 8).unwrap();
        assert!((spec[0].re - 8.0).abs() < 1e-12);
        assert!(spec[1..].iter().all(|v| v.norm() < 1e-12));

        let c0 = SwitchCode::new(4, 0).unwrap();
        let spec = code_spectrum::<f64>(&c0, 16).unwrap();
        for m in 0..4 {
            let v = spec[4 * m];
            assert!(v.re > 0.0 && v.im.abs() < 1e-12);
        }
        assert!(matches!(
            code_spectrum::<f64>(&c0, 10),
            Err(Error::NotDivisible { len: 10, by: 4 })
        ));
    }

    #[test]
    fn phase_matrix_values() {
        let p2 = phase_matrix(2).unwrap();
        assert_eq!(p2.entries(), &[vec![0.0, 0.0], vec![0.0, PI]]);
        assert_eq!(phase_matrix(1).unwrap().entries(), &[vec![0.0]]);
        let p4 = phase_matrix(4).unwrap();
        assert!((p4.get(2, 3).rem_euclid(2.0 * PI) - PI).abs() < 1e-12);
        assert!(phase_matrix(0).is_err());
    }

    #[test]
    fn phase_matrix_rows_are_orthogonal() {
        for k in [1, 2, 3, 4, 8] {
            let e = phase_matrix(k).unwrap().mixing::<f64>();
            for i in 0..k {
                for j in 0..k {
                    let dot: Complex<f64> = (0..k).map(|c| e[i][c] * e[j][c].conj()).sum();
                    let want = if i == j { k as f64 } else { 0.0 };
                    assert!((dot - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn unmixing_inverts_mixing() {
        let p = phase_matrix(8).unwrap();
        let a = p.mixing::<f64>();
        let b = p.unmixing::<f64>();
        for i in 0..8 {
            for j in 0..8 {
                let v: Complex<f64> = (0..8).map(|c| b[i][c] * a[c][j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn superposition() {
        let c = generate_codes(4).unwrap();
        assert_eq!(superpose(&[c[0], c[2]]).unwrap(), vec![1, 0, 1, 0]);
        assert_eq!(superpose(&[c[0]]).unwrap(), c[0].bits());
        assert_eq!(superpose(&c).unwrap(), vec![1, 1, 1, 1]);
        assert!(superpose(&[c[1], c[1]]).is_err());
        assert!(superpose(&[]).is_err());
    }
}
