//! Rate-1/2, constraint-length-7 convolutional code (generators 133/171 octal)
//! with zero-tail termination and a hard-decision Viterbi decoder.

use crate::error::{Error, Result};

pub const CONSTRAINT_LENGTH: usize = 7;
pub const TAIL_BITS: usize = CONSTRAINT_LENGTH - 1;
const G0: u8 = 0o133;
const G1: u8 = 0o171;
const STATES: usize = 1 << TAIL_BITS;

fn parity(x: u8) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Output pair for `bit` entering a register holding the previous six bits in `state`
/// (most recent in bit 5).
fn branch(state: usize, bit: u8) -> (u8, u8) {
    let reg = (bit << 6) | state as u8;
    (parity(reg & G0), parity(reg & G1))
}

fn next_state(state: usize, bit: u8) -> usize {
    ((usize::from(bit) << 5) | (state >> 1)) & (STATES - 1)
}

/// Encodes `bits` followed by six zero tail bits; output length `2 * (len + 6)`.
pub fn conv_encode(bits: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * (bits.len() + TAIL_BITS));
    let mut state = 0usize;
    for &b in bits.iter().chain(std::iter::repeat_n(&0u8, TAIL_BITS)) {
        let b = b & 1;
        let (a, c) = branch(state, b);
        out.push(a);
        out.push(c);
        state = next_state(state, b);
    }
    out
}

/// Maximum-likelihood (Hamming metric) decode of a zero-tail codeword; strips the tail.
pub fn viterbi_decode(coded: &[u8]) -> Result<Vec<u8>> {
    if !coded.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "coded length {} is odd",
            coded.len()
        )));
    }
    let steps = coded.len() / 2;
    if steps < TAIL_BITS {
        return Err(Error::InvalidArgument("codeword shorter than the tail".into()));
    }
    let table: Vec<[(usize, u8, u8); 2]> = (0..STATES)
        .map(|s| {
            let t = |b: u8| {
                let (a, c) = branch(s, b);
                (next_state(s, b), a, c)
            };
            [t(0), t(1)]
        })
        .collect();

    const INF: u32 = u32::MAX / 2;
    let mut metric = vec![INF; STATES];
    metric[0] = 0;
    // survivor: (previous state, input bit) per step and state
    let mut survivors = vec![[(0u8, 0u8); STATES]; steps];
    let mut next = vec![INF; STATES];
    for (step, pair) in coded.chunks_exact(2).enumerate() {
        next.fill(INF);
        let (r0, r1) = (pair[0] & 1, pair[1] & 1);
        for s in 0..STATES {
            let m = metric[s];
            if m >= INF {
                continue;
            }
            for (bit, &(ns, a, c)) in table[s].iter().enumerate() {
                let cand = m + u32::from(a ^ r0) + u32::from(c ^ r1);
                // strict comparison keeps the lowest predecessor on ties
                if cand < next[ns] {
                    next[ns] = cand;
                    survivors[step][ns] = (s as u8, bit as u8);
                }
            }
        }
        std::mem::swap(&mut metric, &mut next);
    }
    let mut state = 0usize;
    let mut bits = vec![0u8; steps];
    for step in (0..steps).rev() {
        let (prev, bit) = survivors[step][state];
        bits[step] = bit;
        state = usize::from(prev);
    }
    bits.truncate(steps - TAIL_BITS);
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Rng;

    fn random_bits(rng: &mut Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.bit()).collect()
    }

    #[test]
    fn all_zero_input() {
        assert!(conv_encode(&[0; 20]).iter().all(|&b| b == 0));
        assert_eq!(conv_encode(&[0; 20]).len(), 52);
    }

    #[test]
    fn impulse_response_matches_generators() {
        // a single one reads out the generator taps, most recent first
        let coded = conv_encode(&[1]);
        let a: Vec<u8> = coded.iter().step_by(2).copied().collect();
        let b: Vec<u8> = coded.iter().skip(1).step_by(2).copied().collect();
        assert_eq!(a, vec![1, 0, 1, 1, 0, 1, 1]);
        assert_eq!(b, vec![1, 1, 1, 1, 0, 0, 1]);
    }

    #[test]
    fn round_trip_1024() {
        let mut rng = Rng::new(1, 0);
        let bits = random_bits(&mut rng, 1024);
        assert_eq!(viterbi_decode(&conv_encode(&bits)).unwrap(), bits);
    }

    #[test]
    fn odd_length_rejected() {
        assert!(viterbi_decode(&[0, 1, 0]).is_err());
    }

    fn hamming(a: &[u8], b: &[u8]) -> usize {
        a.iter().zip(b).filter(|(x, y)| x != y).count()
    }

    #[test]
    fn single_error_matches_exhaustive_nearest_codeword() {
        let n = 10;
        let mut rng = Rng::new(2, 0);
        let bits = random_bits(&mut rng, n);
        let coded = conv_encode(&bits);
        for flip in 0..coded.len() {
            let mut rx = coded.clone();
            rx[flip] ^= 1;
            // oracle: brute force over every message
            let best = (0..1u32 << n)
                .map(|m| (0..n).map(|i| ((m >> i) & 1) as u8).collect::<Vec<u8>>())
                .min_by_key(|msg| hamming(&conv_encode(msg), &rx))
                .unwrap();
            assert_eq!(best, bits);
            assert_eq!(viterbi_decode(&rx).unwrap(), bits, "flip {flip}");
        }
    }

    #[test]
    fn corrects_scattered_errors() {
        let mut rng = Rng::new(3, 0);
        let bits = random_bits(&mut rng, 500);
        let mut rx = conv_encode(&bits);
        for i in (0..rx.len()).step_by(40) {
            rx[i] ^= 1;
        }
        assert_eq!(viterbi_decode(&rx).unwrap(), bits);
    }
}
