//! Two-photon coincidence experiment and the CHSH inequality.
//!
//! The quantum model for a polarization-entangled pair gives the
//! coincidence probability `½cos²(a − b)` and the two-channel correlation
//! `cos 2(a − b)`. Two local hidden-variable responses share a hidden
//! polarization angle `λ`, uniform on `[0°, 180°)`, between both photons:
//!
//! * `MalusStochastic`: each side fires independently with `cos²(θ − λ)`.
//! * `DeterministicThreshold`: a side fires iff `cos²(θ − λ) ≥ threshold`.
//!
//! Monte Carlo pairs are generated in fixed-size chunks. Chunk `c` of
//! setting `s` draws from a ChaCha8 stream selected by `(s, c)` under the
//! master seed, and counts are integer sums, so results do not depend on how
//! chunks are scheduled across threads.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv::{fmt_f64, write_header, write_row};
use crate::polarization::malus;
use crate::{Error, Result};

/// Pairs per RNG stream.
const CHUNK: u64 = 1 << 16;

/// Minimum pairs per setting for a Monte Carlo CHSH estimate.
pub const MIN_CHSH_PAIRS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerPair {
    pub a: f64,
    pub b: f64,
}

impl AnalyzerPair {
    pub fn new(a: f64, b: f64) -> Self {
        AnalyzerPair { a, b }
    }

    pub fn delta(&self) -> f64 {
        self.a - self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LhvModel {
    MalusStochastic,
    DeterministicThreshold { threshold: f64 },
}

impl LhvModel {
    pub fn id(&self) -> &'static str {
        match self {
            LhvModel::MalusStochastic => "malus_stochastic",
            LhvModel::DeterministicThreshold { .. } => "deterministic_threshold",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LhvModel::MalusStochastic => Ok(()),
            LhvModel::DeterministicThreshold { threshold } => {
                if threshold > 0.0 && threshold < 1.0 {
                    Ok(())
                } else {
                    Err(Error::param("threshold", "must lie in (0, 1)"))
                }
            }
        }
    }
}

/// Quantum coincidence probability `½cos²(a − b)`.
pub fn qm_coincidence(pair: AnalyzerPair) -> f64 {
    0.5 * malus(pair.delta())
}

/// Quantum two-channel correlation `cos 2(a − b)`.
pub fn qm_correlation(pair: AnalyzerPair) -> f64 {
    (2.0 * pair.delta().rem_euclid(180.0)).to_radians().cos()
}

/// Closed-form `MalusStochastic` coincidence probability `(2 + cos 2δ)/8`,
/// the average of `cos²(a − λ)·cos²(b − λ)` over uniform `λ`.
pub fn lhv_coincidence_analytic(pair: AnalyzerPair, model: &LhvModel) -> Result<f64> {
    match model {
        LhvModel::MalusStochastic => {
            let c = (2.0 * pair.delta().rem_euclid(180.0)).to_radians().cos();
            Ok((2.0 + c) / 8.0)
        }
        other => Err(Error::UnsupportedModel(other.id())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl Counts {
    fn zero() -> Self {
        Counts {
            n11: 0,
            n10: 0,
            n01: 0,
            n00: 0,
        }
    }

    fn add(mut self, o: Counts) -> Self {
        self.n11 += o.n11;
        self.n10 += o.n10;
        self.n01 += o.n01;
        self.n00 += o.n00;
        self
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }
}

/// Monte Carlo coincidence counts. `1` is detection (transmission) and `0`
/// non-detection; the first index is side A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceStats {
    pub pair: AnalyzerPair,
    pub model: LhvModel,
    pub n_pairs: u64,
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
    pub p11: f64,
    /// Binomial standard error of `p11`.
    pub p11_stderr: f64,
    pub rng_seed: u64,
}

impl CoincidenceStats {
    fn from_counts(pair: AnalyzerPair, model: LhvModel, c: Counts, seed: u64) -> Self {
        let n = c.total();
        let p11 = c.n11 as f64 / n as f64;
        CoincidenceStats {
            pair,
            model,
            n_pairs: n,
            n11: c.n11,
            n10: c.n10,
            n01: c.n01,
            n00: c.n00,
            p11,
            p11_stderr: (p11 * (1.0 - p11) / n as f64).sqrt(),
            rng_seed: seed,
        }
    }

    /// Detection rate on side A.
    pub fn marginal_a(&self) -> f64 {
        (self.n11 + self.n10) as f64 / self.n_pairs as f64
    }

    pub fn marginal_b(&self) -> f64 {
        (self.n11 + self.n01) as f64 / self.n_pairs as f64
    }

    /// Two-channel correlation `p11 + p00 − p10 − p01`.
    pub fn correlation(&self) -> f64 {
        (self.n11 as f64 + self.n00 as f64 - self.n10 as f64 - self.n01 as f64) / self.n_pairs as f64
    }

    pub fn correlation_stderr(&self) -> f64 {
        let e = self.correlation();
        ((1.0 - e * e).max(0.0) / self.n_pairs as f64).sqrt()
    }
}

fn chunk_counts(model: &LhvModel, a_rad: f64, b_rad: f64, seed: u64, stream: u64, n: u64) -> Counts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut c = Counts::zero();
    for _ in 0..n {
        let lambda = PI * rng.random::<f64>();
        let ca = (a_rad - lambda).cos();
        let cb = (b_rad - lambda).cos();
        let (pa, pb) = (ca * ca, cb * cb);
        let (da, db) = match *model {
            LhvModel::MalusStochastic => (rng.random::<f64>() < pa, rng.random::<f64>() < pb),
            LhvModel::DeterministicThreshold { threshold } => (pa >= threshold, pb >= threshold),
        };
        match (da, db) {
            (true, true) => c.n11 += 1,
            (true, false) => c.n10 += 1,
            (false, true) => c.n01 += 1,
            (false, false) => c.n00 += 1,
        }
    }
    c
}

fn simulate(pair: AnalyzerPair, model: &LhvModel, n_pairs: u64, seed: u64, setting: u32) -> Result<CoincidenceStats> {
    model.validate()?;
    if n_pairs < 1 {
        return Err(Error::param("n_pairs", "must be at least 1"));
    }
    if !(pair.a.is_finite() && pair.b.is_finite()) {
        return Err(Error::param("pair", "angles must be finite"));
    }
    let a_rad = pair.a.rem_euclid(180.0).to_radians();
    let b_rad = pair.b.rem_euclid(180.0).to_radians();
    let n_chunks = n_pairs.div_ceil(CHUNK);
    let counts = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let len = CHUNK.min(n_pairs - chunk * CHUNK);
            let stream = (u64::from(setting) << 40) | chunk;
            chunk_counts(model, a_rad, b_rad, seed, stream, len)
        })
        .reduce(Counts::zero, Counts::add);
    Ok(CoincidenceStats::from_counts(pair, *model, counts, seed))
}

/// Monte Carlo coincidence experiment for a local hidden-variable model.
/// Bit-reproducible for a fixed `seed`.
pub fn lhv_coincidence_mc(pair: AnalyzerPair, model: &LhvModel, n_pairs: u64, seed: u64) -> Result<CoincidenceStats> {
    simulate(pair, model, n_pairs, seed, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationModel {
    Quantum,
    Lhv { model: LhvModel },
}

impl CorrelationModel {
    pub fn id(&self) -> &'static str {
        match self {
            CorrelationModel::Quantum => "qm",
            CorrelationModel::Lhv { model } => model.id(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub model: CorrelationModel,
    /// `(a,b), (a,b′), (a′,b), (a′,b′)`.
    pub settings: [AnalyzerPair; 4],
    pub correlations: [f64; 4],
    pub correlation_stderr: [f64; 4],
    /// `|E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)|`
    pub s_value: f64,
    pub standard_error: f64,
    pub n_pairs: u64,
    pub rng_seed: u64,
    /// Outcome convention used for the correlations.
    pub convention: String,
}

impl ChshResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// CHSH statistic for the four settings built from `(a, a′) × (b, b′)`.
///
/// Quantum correlations are analytic (`n_pairs` is ignored). LHV
/// correlations come from Monte Carlo with `n_pairs` per setting, counting
/// non-detection on a side as its `0` outcome.
pub fn chsh_statistic(
    a: f64,
    a_prime: f64,
    b: f64,
    b_prime: f64,
    model: &CorrelationModel,
    n_pairs: u64,
    seed: u64,
) -> Result<ChshResult> {
    let settings = [
        AnalyzerPair::new(a, b),
        AnalyzerPair::new(a, b_prime),
        AnalyzerPair::new(a_prime, b),
        AnalyzerPair::new(a_prime, b_prime),
    ];
    let (correlations, errors, n_used, convention) = match model {
        CorrelationModel::Quantum => (
            settings.map(qm_correlation),
            [0.0; 4],
            0,
            "analytic two-channel correlation cos 2(a-b)",
        ),
        CorrelationModel::Lhv { model } => {
            if n_pairs < MIN_CHSH_PAIRS {
                return Err(Error::param(
                    "n_pairs",
                    format!("CHSH needs at least {MIN_CHSH_PAIRS} pairs"),
                ));
            }
            let mut e = [0.0; 4];
            let mut se = [0.0; 4];
            for (k, pair) in settings.iter().enumerate() {
                // Repeated settings reuse the earlier estimate.
                if let Some(j) = settings[..k].iter().position(|p| p == pair) {
                    e[k] = e[j];
                    se[k] = se[j];
                    continue;
                }
                let stats = simulate(*pair, model, n_pairs, seed, k as u32 + 1)?;
                e[k] = stats.correlation();
                se[k] = stats.correlation_stderr();
            }
            (e, se, n_pairs, "two-channel: detection = +1, non-detection = -1")
        }
    };
    let s_value = (correlations[0] - correlations[1] + correlations[2] + correlations[3]).abs();
    let standard_error = errors.iter().map(|s| s * s).sum::<f64>().sqrt();
    Ok(ChshResult {
        model: *model,
        settings,
        correlations,
        correlation_stderr: errors,
        s_value,
        standard_error,
        n_pairs: n_used,
        rng_seed: seed,
        convention: convention.to_owned(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub delta: f64,
    pub p_qm: f64,
    pub p_lhv: f64,
    pub stderr: f64,
}

/// Side-by-side coincidence probabilities over a grid of analyzer
/// separations `δ = a − b` (with `b = 0`).
///
/// With `monte_carlo = Some((n_pairs, seed))` the LHV column is simulated;
/// otherwise the closed form is used and `stderr` is zero.
pub fn compare_predictions(
    deltas: &[f64],
    lhv: &LhvModel,
    monte_carlo: Option<(u64, u64)>,
) -> Result<Vec<ComparisonRow>> {
    if deltas.is_empty() {
        return Err(Error::EmptyGrid);
    }
    deltas
        .iter()
        .map(|&delta| {
            let pair = AnalyzerPair::new(delta, 0.0);
            let (p_lhv, stderr) = match monte_carlo {
                Some((n, seed)) => {
                    let s = lhv_coincidence_mc(pair, lhv, n, seed)?;
                    (s.p11, s.p11_stderr)
                }
                None => (lhv_coincidence_analytic(pair, lhv)?, 0.0),
            };
            Ok(ComparisonRow {
                delta,
                p_qm: qm_coincidence(pair),
                p_lhv,
                stderr,
            })
        })
        .collect()
}

pub fn write_comparison_csv<W: Write>(out: &mut W, rows: &[ComparisonRow]) -> io::Result<()> {
    write_header(out, &["delta_deg", "p_qm", "p_lhv", "stderr"])?;
    for r in rows {
        write_row(
            out,
            &[fmt_f64(r.delta), fmt_f64(r.p_qm), fmt_f64(r.p_lhv), fmt_f64(r.stderr)],
        )?;
    }
    Ok(())
}
