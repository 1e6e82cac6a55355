//! Gray-coded 16-QAM with unit average energy.

use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const BITS_PER_SYMBOL: usize = 4;

fn scale() -> f64 {
    1.0 / 10f64.sqrt()
}

/// Two bits to one axis level: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
fn level(b0: u8, b1: u8) -> f64 {
    match (b0 & 1, b1 & 1) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

fn slice(v: f64) -> (u8, u8) {
    let v = v / scale();
    if v < -2.0 {
        (0, 0)
    } else if v < 0.0 {
        (0, 1)
    } else if v < 2.0 {
        (1, 1)
    } else {
        (1, 0)
    }
}

/// Maps groups of four bits (I pair first, then Q pair).
pub fn qam16_map(bits: &[u8]) -> Result<Vec<C64>> {
    if !bits.len().is_multiple_of(BITS_PER_SYMBOL) {
        return Err(Error::NotDivisible {
            len: bits.len(),
            by: BITS_PER_SYMBOL,
        });
    }
    Ok(bits
        .chunks_exact(4)
        .map(|b| C64::new(level(b[0], b[1]), level(b[2], b[3])) * scale())
        .collect())
}

/// Hard nearest-point demapping.
pub fn qam16_demap(symbols: &[C64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| {
            let (a, b) = slice(s.re);
            let (c, d) = slice(s.im);
            [a, b, c, d]
        })
        .collect()
}
