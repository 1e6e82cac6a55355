//! The acceptance suite: each check measures one number and compares it with a threshold.

use std::f64::consts::PI;
use std::fmt;
use std::fs;

use num_complex::Complex;

use super::{run_points, run_sweep, ArchKind, ExperimentConfig, Scenario, Switching, SyncMode, TrialPoint, TrialRecord};
use crate::channel::Point;
use crate::codes::{code_spectrum, generate_codes};
use crate::despread::{freq_despread, time_despread};
use crate::error::Result;
use crate::metrics::{self, adc_power, power, Arch, PowerModel, ADC_FOM_J};
use crate::signal::{Rng, SampleStream};
use crate::waveform::OfdmConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] {:>2} {}: {}", self.id, self.name, self.measured)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub results: Vec<CriterionResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{r}")?;
        }
        let n = self.results.iter().filter(|r| r.passed).count();
        write!(f, "{n}/{} criteria passed", self.results.len())
    }
}

fn result(id: u8, name: &'static str, passed: bool, measured: String) -> CriterionResult {
    CriterionResult { id, name, passed, measured }
}

fn mean_sinrs(records: &[TrialRecord]) -> Vec<f64> {
    records.iter().map(|r| r.outcome.metrics.mean_sinr_db).collect()
}

fn jobs(points: &[TrialPoint], trials: u64) -> Vec<(TrialPoint, u64)> {
    points.iter().flat_map(|p| (0..trials).map(move |t| (*p, t))).collect()
}

fn wrap_deg(x: f64) -> f64 {
    (x + 180.0).rem_euclid(360.0) - 180.0
}

/// Codes are one-hot per slot, and their spectra match the closed form.
pub fn code_math() -> Result<CriterionResult> {
    let mut worst: f64 = 0.0;
    let mut exact = true;
    for k in [1usize, 2, 4, 8] {
        let codes = generate_codes(k)?;
        for n in 0..k {
            let on: u32 = codes.iter().map(|c| u32::from(c.at(n))).sum();
            exact &= on == 1;
        }
        for (i, a) in codes.iter().enumerate() {
            for (j, b) in codes.iter().enumerate() {
                let dot: u32 = (0..k).map(|n| u32::from(a.at(n) * b.at(n))).sum();
                exact &= dot == u32::from(i == j);
            }
        }
        let n = 16 * k;
        for (i, c) in codes.iter().enumerate() {
            let spec = code_spectrum::<f64>(c, n)?;
            for (bin, v) in spec.iter().enumerate() {
                let want = if bin % (n / k) == 0 {
                    let m = (bin / (n / k)) as f64;
                    Complex::from_polar((n / k) as f64, -2.0 * PI * i as f64 * m / k as f64)
                } else {
                    Complex::new(0.0, 0.0)
                };
                worst = worst.max((v - want).norm());
            }
        }
    }
    // K = 4, code 1 at harmonics 0..3
    let spec = code_spectrum::<f64>(&generate_codes(4)?[1], 64)?;
    let phases: Vec<f64> = (0..4).map(|h| spec[h * 16].arg().to_degrees()).collect();
    let phase_err = phases
        .iter()
        .zip([0.0, -90.0, -180.0, -270.0])
        .map(|(p, w)| wrap_deg(p - w).abs())
        .fold(0.0, f64::max);
    let passed = exact && worst < 1e-9 && phase_err < 1e-9;
    Ok(result(
        1,
        "code math exactness",
        passed,
        format!(
            "orthogonal+complete={exact}, max spectrum error {worst:.2e}, K=4 code 1 phases [{:.1}, {:.1}, {:.1}, {:.1}] deg",
            phases[0], phases[1], phases[2], phases[3]
        ),
    ))
}

/// Time and frequency despreading agree on random noiseless inputs.
pub fn despread_equivalence() -> Result<CriterionResult> {
    let mut rng = Rng::new(0x5eed, 2);
    let mut worst: f64 = 0.0;
    for k in [1usize, 2, 4, 8] {
        for _ in 0..100 {
            let x: Vec<_> = (0..k * 64).map(|_| rng.complex_normal(1.0)).collect();
            let y = SampleStream::new(x, k as f64 * 10e6)?;
            let t = time_despread(&y, k)?;
            let f = freq_despread(&y, k)?;
            for (a, b) in t.chains.iter().zip(&f.chains) {
                for (p, q) in a.samples().iter().zip(b.samples()) {
                    worst = worst.max((p - q).norm());
                }
            }
        }
    }
    Ok(result(2, "despreading equivalence", worst < 1e-9, format!("max abs error {worst:.2e} over 400 inputs")))
}

/// Four virtual chains behind an identity switch matrix versus four physical chains.
pub fn virtual_equals_physical(workers: Option<usize>) -> Result<CriterionResult> {
    let cfg = ExperimentConfig {
        arch: vec![ArchKind::Greenmo, ArchKind::Dbf],
        users: 4,
        antennas: vec![4],
        switching: Switching::Identity,
        scenario: Scenario::Rayleigh,
        ..ExperimentConfig::default()
    };
    let mut diffs = Vec::new();
    for snr_db in [17.0, 18.0, 19.0, 20.0] {
        let g = TrialPoint { arch: ArchKind::Greenmo, antennas: 4, snr_db };
        let d = TrialPoint { arch: ArchKind::Dbf, antennas: 4, snr_db };
        let gv = mean_sinrs(&run_points(&cfg, &jobs(&[g], 75), workers)?);
        let dv = mean_sinrs(&run_points(&cfg, &jobs(&[d], 75), workers)?);
        diffs.extend(gv.iter().zip(&dv).map(|(a, b)| a - b));
    }
    let med = metrics::median(&diffs);
    Ok(result(
        3,
        "virtual = physical chains",
        med.abs() <= 0.5,
        format!("median paired difference {med:+.3} dB over {} trials", diffs.len()),
    ))
}

/// Noiseless full-rank scenarios: ZF leaves no measurable cross-user leakage.
pub fn interference_floor(workers: Option<usize>) -> Result<CriterionResult> {
    let mut worst_leak = f64::NEG_INFINITY;
    let mut worst_ber: f64 = 0.0;
    let mut runs = 0;
    let mut skipped = 0;
    for (users, scenario) in [(1, Scenario::Rayleigh), (2, Scenario::Rayleigh), (3, Scenario::Raytrace), (4, Scenario::Rayleigh), (4, Scenario::Raytrace)] {
        let cfg = ExperimentConfig {
            arch: vec![ArchKind::Greenmo, ArchKind::Dbf],
            users,
            antennas: (users..=8).collect(),
            snr_db: vec![f64::INFINITY],
            scenario,
            rayleigh_taps: 4,
            ofdm: super::config::OfdmSection { payload_symbols: 4, ..Default::default() },
            ..ExperimentConfig::default()
        };
        let records = run_points(&cfg, &jobs(&cfg.points(), 5), workers)?;
        for r in records {
            // a flagged trial ran without a full-rank BABF matrix; not a full-rank scenario
            if r.outcome.flag.is_some() {
                skipped += 1;
                continue;
            }
            runs += 1;
            worst_leak = worst_leak.max(r.outcome.leakage_dbc);
            worst_ber = worst_ber.max(r.outcome.metrics.ber);
        }
    }
    Ok(result(
        4,
        "noiseless interference floor",
        worst_leak < -60.0 && worst_ber == 0.0 && runs > 0,
        format!("worst leakage {worst_leak:.1} dBc, worst BER {worst_ber}, {runs} trials ({skipped} rank-deficient skipped)"),
    ))
}

/// The fixed 8-antenna, 4-user room used by the BABF comparison.
pub fn babf_scene() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        arch: vec![ArchKind::Greenmo],
        users: 4,
        antennas: vec![8],
        snr_db: vec![15.0],
        trials: 100,
        scenario: Scenario::Raytrace,
        ..ExperimentConfig::default()
    };
    cfg.scene.users = vec![Point::new(2.0, 6.0), Point::new(4.5, 3.5), Point::new(8.0, 6.5), Point::new(10.5, 2.5)];
    cfg
}

pub fn babf_vs_random(workers: Option<usize>) -> Result<CriterionResult> {
    let babf = babf_scene();
    let random = ExperimentConfig { switching: Switching::Random, ..babf.clone() };
    let p = TrialPoint { arch: ArchKind::Greenmo, antennas: 8, snr_db: 15.0 };
    let b = metrics::median(&mean_sinrs(&run_points(&babf, &jobs(&[p], 100), workers)?));
    let r = metrics::median(&mean_sinrs(&run_points(&random, &jobs(&[p], 100), workers)?));
    let gap = b - r;
    Ok(result(
        5,
        "babf beats random switching",
        gap >= 3.0,
        format!("median mean SINR babf {b:.2} dB, random {r:.2} dB, gap {gap:.2} dB"),
    ))
}

pub fn antenna_hardening(workers: Option<usize>) -> Result<CriterionResult> {
    let cfg = ExperimentConfig {
        arch: vec![ArchKind::Greenmo],
        users: 4,
        antennas: vec![4, 6, 8],
        snr_db: vec![15.0],
        scenario: Scenario::Raytrace,
        ..ExperimentConfig::default()
    };
    let mut medians = Vec::new();
    let mut frac_above = 0.0;
    for &m in &cfg.antennas {
        let p = TrialPoint { arch: ArchKind::Greenmo, antennas: m, snr_db: 15.0 };
        let recs = run_points(&cfg, &jobs(&[p], 100), workers)?;
        medians.push(metrics::median(&mean_sinrs(&recs)));
        if m == 8 {
            let ok = recs.iter().filter(|r| r.outcome.metrics.sinr_db.iter().all(|&s| s > 10.0)).count();
            frac_above = ok as f64 / recs.len() as f64;
        }
    }
    let increasing = medians.windows(2).all(|w| w[1] > w[0]);
    Ok(result(
        6,
        "antenna hardening",
        increasing && frac_above >= 0.9,
        format!(
            "medians M=4/6/8: {:.2}/{:.2}/{:.2} dB, M=8 all users > 10 dB in {:.0}% of trials",
            medians[0],
            medians[1],
            medians[2],
            100.0 * frac_above
        ),
    ))
}

pub fn large_array_ordering(workers: Option<usize>) -> Result<CriterionResult> {
    let cfg = ExperimentConfig {
        arch: vec![ArchKind::Greenmo, ArchKind::Dbf, ArchKind::HbfFull, ArchKind::HbfPartial],
        users: 8,
        antennas: vec![64],
        snr_db: vec![15.0],
        scenario: Scenario::Raytrace,
        ..ExperimentConfig::default()
    };
    let med = |arch| -> Result<f64> {
        let p = TrialPoint { arch, antennas: 64, snr_db: 15.0 };
        Ok(metrics::median(&mean_sinrs(&run_points(&cfg, &jobs(&[p], 50), workers)?)))
    };
    let (g, d, full, part) = (med(ArchKind::Greenmo)?, med(ArchKind::Dbf)?, med(ArchKind::HbfFull)?, med(ArchKind::HbfPartial)?);
    let gap = d - g;
    let passed = part < g && g <= full && (full - d).abs() <= 2.0 && (3.0..=7.0).contains(&gap);
    Ok(result(
        7,
        "64-antenna ordering",
        passed,
        format!("medians hbf_partial {part:.2}, greenmo {g:.2}, hbf_full {full:.2}, dbf {d:.2} dB; dbf-greenmo gap {gap:.2} dB"),
    ))
}

pub fn power_arithmetic() -> Result<CriterionResult> {
    let m = PowerModel::default();
    let got = [
        power(&m, Arch::GreenMo, 8, 4, 10e6)?.total_mw,
        power(&m, Arch::Dbf, 4, 4, 10e6)?.total_mw,
        power(&m, Arch::Fdma, 1, 4, 10e6)?.total_mw,
        power(&m, Arch::Dbf, 8, 8, 10e6)?.total_mw,
    ];
    let base = adc_power(ADC_FOM_J, 12, 10e6)?;
    let linear = [2.0, 4.0, 8.0].iter().all(|&s| adc_power(ADC_FOM_J, 12, s * 10e6).unwrap() == s * base)
        && adc_power(ADC_FOM_J, 13, 10e6)? == 2.0 * base;
    Ok(result(
        8,
        "power arithmetic",
        got == [762.0, 2032.0, 754.0, 4064.0] && linear,
        format!("{} / {} / {} / {} mW, adc linear={linear}", got[0], got[1], got[2], got[3]),
    ))
}

pub fn rate_anchors() -> Result<CriterionResult> {
    let ofdm = OfdmConfig::default();
    let cfg = ExperimentConfig::default();
    // error-free delivery: every bit of every user's packet arrives
    let sent: Vec<Vec<u8>> = vec![vec![0; crate::waveform::payload_capacity(&ofdm, cfg.ofdm.payload_symbols)]; 4];
    let timing = crate::waveform::FrameTiming {
        payload_symbols: cfg.ofdm.payload_symbols,
        symbol_duration_s: ofdm.symbol_duration_s(),
        data_bits_per_symbol: ofdm.data_bits_per_symbol(),
    };
    let (goodput, _) = metrics::goodput_and_ber(&sent, &sent, &timing)?;
    let cap = metrics::capacity(&[metrics::db_to_linear(15.0); 4], 10e6);
    Ok(result(
        9,
        "rate and capacity anchors",
        (goodput - 48e6).abs() < 1e-6 && (195e6..=205e6).contains(&cap),
        format!("goodput {:.3} Mbps, capacity {:.2} Mbps", goodput / 1e6, cap / 1e6),
    ))
}

pub fn sync_insensitivity(workers: Option<usize>) -> Result<CriterionResult> {
    let aligned = ExperimentConfig::default();
    let offset = ExperimentConfig { sync_mode: SyncMode::Offset, ..aligned.clone() };
    let p = TrialPoint { arch: ArchKind::Greenmo, antennas: 8, snr_db: 15.0 };
    let a = mean_sinrs(&run_points(&aligned, &jobs(&[p], 100), workers)?);
    let o = mean_sinrs(&run_points(&offset, &jobs(&[p], 100), workers)?);
    let diffs: Vec<f64> = a.iter().zip(&o).map(|(x, y)| x - y).collect();
    let med = metrics::median(&diffs);
    Ok(result(
        10,
        "sync insensitivity",
        med.abs() < 1.0,
        format!(
            "median paired difference {med:+.3} dB (medians {:.2} vs {:.2} dB)",
            metrics::median(&a),
            metrics::median(&o)
        ),
    ))
}

pub fn sweep_determinism(workers: Option<usize>) -> Result<CriterionResult> {
    let cfg = ExperimentConfig {
        arch: vec![ArchKind::Greenmo, ArchKind::Dbf, ArchKind::HbfFull, ArchKind::Fdma],
        users: 2,
        antennas: vec![4],
        snr_db: vec![5.0, 15.0],
        trials: 4,
        sync_mode: SyncMode::Offset,
        ..ExperimentConfig::default()
    };
    let dir = std::env::temp_dir().join(format!("vrfsim-determinism-{}", std::process::id()));
    fs::create_dir_all(&dir)?;
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    run_sweep(&cfg, &a, workers)?;
    // a different worker count must not change a byte
    run_sweep(&cfg, &b, Some(1))?;
    let (x, y) = (fs::read(&a)?, fs::read(&b)?);
    let _ = fs::remove_dir_all(&dir);
    Ok(result(
        11,
        "sweep determinism",
        x == y && !x.is_empty(),
        format!("{} bytes, identical={}", x.len(), x == y),
    ))
}

type Check = Box<dyn Fn() -> Result<CriterionResult>>;

/// Runs every criterion in order. An error inside one check is reported as its failure.
pub fn run_all(workers: Option<usize>) -> Report {
    let checks: Vec<(u8, &'static str, Check)> = vec![
        (1, "code math exactness", Box::new(code_math)),
        (2, "despreading equivalence", Box::new(despread_equivalence)),
        (3, "virtual = physical chains", Box::new(move || virtual_equals_physical(workers))),
        (4, "noiseless interference floor", Box::new(move || interference_floor(workers))),
        (5, "babf beats random switching", Box::new(move || babf_vs_random(workers))),
        (6, "antenna hardening", Box::new(move || antenna_hardening(workers))),
        (7, "64-antenna ordering", Box::new(move || large_array_ordering(workers))),
        (8, "power arithmetic", Box::new(power_arithmetic)),
        (9, "rate and capacity anchors", Box::new(rate_anchors)),
        (10, "sync insensitivity", Box::new(move || sync_insensitivity(workers))),
        (11, "sweep determinism", Box::new(move || sweep_determinism(workers))),
    ];
    let results = checks
        .into_iter()
        .map(|(id, name, f)| f().unwrap_or_else(|e| result(id, name, false, format!("error: {e}"))))
        .collect();
    Report { results }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_criteria_pass() {
        for r in [code_math(), despread_equivalence(), power_arithmetic(), rate_anchors()] {
            let r = r.unwrap();
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn report_formatting() {
        let rep = Report {
            results: vec![result(1, "a", true, "x".into()), result(2, "b", false, "y".into())],
        };
        assert!(!rep.passed());
        let text = rep.to_string();
        assert!(text.contains("[PASS]  1 a: x"));
        assert!(text.contains("[FAIL]  2 b: y"));
        assert!(text.ends_with("1/2 criteria passed"));
    }
}
