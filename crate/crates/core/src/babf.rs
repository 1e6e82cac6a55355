//! Binarized analog beamforming: per user, switch on the largest set of antennas whose
//! channel phases sit within `phi` of a pivot antenna, then make sure the effective
//! channel `H S` is invertible.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::f64::consts::FRAC_PI_3;

use crate::error::{Error, Result};
use crate::frontend::{SwitchMatrix, C64};
use crate::linalg::full_rank;
use crate::signal::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BabfConfig {
    pub phi: f64,
    pub rank_tolerance: f64,
    pub max_fallbacks: usize,
}

impl Default for BabfConfig {
    fn default() -> Self {
        Self {
            phi: FRAC_PI_3,
            rank_tolerance: 1e-9,
            max_fallbacks: 64,
        }
    }
}

impl BabfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidArgument(format!("phi {} outside (0, pi/2]", self.phi)));
        }
        if !(self.rank_tolerance >= 0.0 && self.rank_tolerance < 1.0) {
            return Err(Error::InvalidArgument("rank tolerance outside [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BabfResult {
    pub switches: SwitchMatrix,
    /// `users x antennas`: in-phase set size with each antenna as pivot.
    pub scores: Vec<Vec<usize>>,
    /// Number of selection changes needed to reach full rank.
    pub fallback_level: usize,
}

/// Antennas within `phi` of `pivot`, by phase relative to the pivot.
fn in_phase_set(row: &[C64], pivot: usize, phi: f64) -> Vec<usize> {
    let p = row[pivot].conj();
    (0..row.len()).filter(|&j| (row[j] * p).arg().abs() < phi).collect()
}

/// Distinct candidate sets for one user, best first.
fn ranked_candidates(row: &[C64], phi: f64) -> (Vec<usize>, Vec<Vec<usize>>) {
    let sets: Vec<Vec<usize>> = (0..row.len()).map(|m| in_phase_set(row, m, phi)).collect();
    let scores = sets.iter().map(Vec::len).collect();
    // (score desc, antenna indices asc, pivot asc); the sort is stable so equal sets keep pivot order
    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.sort_by(|&a, &b| sets[b].len().cmp(&sets[a].len()).then_with(|| sets[a].cmp(&sets[b])));
    let mut ranked: Vec<Vec<usize>> = Vec::new();
    for m in order {
        if !ranked.contains(&sets[m]) {
            ranked.push(sets[m].clone());
        }
    }
    (scores, ranked)
}

fn effective(h: &[Vec<C64>], columns: &[&Vec<usize>]) -> Vec<Vec<C64>> {
    h.iter()
        .map(|row| columns.iter().map(|set| set.iter().map(|&m| row[m]).sum()).collect())
        .collect()
}

/// `h_ref` is `users x antennas` at the reference subcarrier.
pub fn babf_select(h_ref: &[Vec<C64>], cfg: &BabfConfig) -> Result<BabfResult> {
    cfg.validate()?;
    let users = h_ref.len();
    let antennas = h_ref.first().map_or(0, Vec::len);
    if users == 0 || antennas == 0 || h_ref.iter().any(|r| r.len() != antennas) {
        return Err(Error::Dimension("channel must be a nonempty users x antennas matrix".into()));
    }
    if users > antennas {
        return Err(Error::Dimension(format!("{users} users exceed {antennas} antennas")));
    }
    if h_ref.iter().flatten().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite("h_ref"));
    }
    if let Some(u) = h_ref.iter().position(|r| r.iter().all(|v| v.norm() == 0.0)) {
        return Err(Error::InvalidArgument(format!("user {u} has an all-zero channel")));
    }

    let (scores, ranked): (Vec<_>, Vec<_>) = h_ref.iter().map(|r| ranked_candidates(r, cfg.phi)).unzip();
    let total = |pick: &[usize]| -> usize { pick.iter().enumerate().map(|(u, &r)| ranked[u][r].len()).sum() };
    // best-first walk over joint selections: highest total score first, then the
    // lexicographically smallest vector of per-user ranks
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    let start = vec![0usize; users];
    heap.push((total(&start), Reverse(start.clone())));
    seen.insert(start);
    let mut level = 0;
    while let Some((_, Reverse(pick))) = heap.pop() {
        if level > cfg.max_fallbacks {
            break;
        }
        let columns: Vec<&Vec<usize>> = (0..users).map(|u| &ranked[u][pick[u]]).collect();
        if full_rank(&effective(h_ref, &columns), cfg.rank_tolerance) {
            let cols: Vec<Vec<usize>> = columns.into_iter().cloned().collect();
            return Ok(BabfResult {
                switches: SwitchMatrix::from_columns(antennas, &cols)?,
                scores,
                fallback_level: level,
            });
        }
        level += 1;
        for u in 0..users {
            if pick[u] + 1 < ranked[u].len() {
                let mut next = pick.clone();
                next[u] += 1;
                if seen.insert(next.clone()) {
                    heap.push((total(&next), Reverse(next)));
                }
            }
        }
    }
    Err(Error::RankDeficient(level.saturating_sub(1)))
}

/// Uniform random binary `M x K` matrix, redrawn until every column is used and the
/// columns are linearly independent.
pub fn random_switch_matrix(antennas: usize, slots: usize, rng: &mut Rng) -> Result<SwitchMatrix> {
    if slots == 0 || antennas < slots {
        return Err(Error::Dimension(format!("need 1 <= K <= M, got M={antennas}, K={slots}")));
    }
    for _ in 0..10_000 {
        let rows: Vec<Vec<u8>> = (0..antennas).map(|_| (0..slots).map(|_| rng.bit()).collect()).collect();
        let as_complex: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&b| C64::new(f64::from(b), 0.0)).collect())
            .collect();
        if (0..slots).all(|c| rows.iter().any(|r| r[c] == 1)) && full_rank(&as_complex, 1e-9) {
            return SwitchMatrix::new(rows);
        }
    }
    Err(Error::RankDeficient(10_000))
}
