//! Malus-law polarizer chains and the three-polarizer experiment
//!
//! ```text
//! source --|0°--|α--|β-->
//! ```
//!
//! Angles are taken in degrees and reduced modulo 180° before conversion to
//! radians, so every transmission is exactly 180°-periodic in each angle.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::csv::{fmt_f64, write_header, write_row};
use crate::{Error, Result};

/// Golden-section stopping tolerance, degrees.
pub const BETA_TOLERANCE_DEG: f64 = 1e-4;

/// `cos²θ` for `θ` in degrees.
pub fn malus(theta_deg: f64) -> f64 {
    let c = theta_deg.rem_euclid(180.0).to_radians().cos();
    c * c
}

/// Ideal three-polarizer transmission `cos²α · cos²(α − β)`, normalized to
/// the intensity leaving the first polarizer.
pub fn three_polarizer_probability(alpha_deg: f64, beta_deg: f64) -> f64 {
    malus(alpha_deg) * malus(alpha_deg - beta_deg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polarizer {
    /// Axis relative to the first polarizer, degrees.
    pub axis: f64,
    /// Transmittance along the axis.
    pub k_parallel: f64,
    /// Transmittance across the axis.
    pub k_perp: f64,
}

impl Polarizer {
    pub fn ideal(axis: f64) -> Self {
        Polarizer {
            axis,
            k_parallel: 1.0,
            k_perp: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.axis.is_finite() {
            return Err(Error::param("axis", "must be finite"));
        }
        if !(self.k_perp >= 0.0 && self.k_perp < self.k_parallel && self.k_parallel <= 1.0) {
            return Err(Error::param(
                "k_parallel",
                format!(
                    "need 0 ≤ k_perp < k_parallel ≤ 1, got k_parallel = {}, k_perp = {}",
                    self.k_parallel, self.k_perp
                ),
            ));
        }
        Ok(())
    }

    /// Fraction of linearly polarized light at `incoming_deg` transmitted.
    pub fn transmit(&self, incoming_deg: f64) -> f64 {
        self.k_perp + (self.k_parallel - self.k_perp) * malus(incoming_deg - self.axis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Unpolarized,
    Linear { angle: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizerChain {
    pub polarizers: Vec<Polarizer>,
    pub source: Source,
}

impl PolarizerChain {
    pub fn validate(&self) -> Result<()> {
        if self.polarizers.is_empty() {
            return Err(Error::param("polarizers", "chain must not be empty"));
        }
        self.polarizers.iter().try_for_each(Polarizer::validate)
    }
}

/// Transmitted fraction of the source intensity. Each stage multiplies by
/// `k⊥ + (k∥ − k⊥)·cos²Δθ` and leaves the light polarized along its own
/// axis; an unpolarized source passes `(k∥ + k⊥)/2` at the first stage.
pub fn chain_transmission(chain: &PolarizerChain) -> Result<f64> {
    chain.validate()?;
    let mut stages = chain.polarizers.iter();
    let first = stages.next().expect("validated non-empty");
    let mut total = match chain.source {
        Source::Unpolarized => 0.5 * (first.k_parallel + first.k_perp),
        Source::Linear { angle } => first.transmit(angle),
    };
    let mut polarization = first.axis;
    for p in stages {
        total *= p.transmit(polarization);
        polarization = p.axis;
    }
    Ok(total)
}

/// Transmission model for the `(α, β)` experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransmissionModel {
    /// `cos²α · cos²(α − β)`.
    Quantum,
    /// Three identical imperfect polarizers at `0°, α, β`, light entering
    /// linearly polarized along the first axis.
    ImperfectQuantum { k_parallel: f64, k_perp: f64 },
}

impl TransmissionModel {
    pub fn id(&self) -> &'static str {
        match self {
            TransmissionModel::Quantum => "quantum",
            TransmissionModel::ImperfectQuantum { .. } => "imperfect_quantum",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TransmissionModel::Quantum => Ok(()),
            TransmissionModel::ImperfectQuantum { k_parallel, k_perp } => Polarizer {
                axis: 0.0,
                k_parallel,
                k_perp,
            }
            .validate(),
        }
    }

    pub fn probability(&self, alpha_deg: f64, beta_deg: f64) -> f64 {
        match *self {
            TransmissionModel::Quantum => three_polarizer_probability(alpha_deg, beta_deg),
            TransmissionModel::ImperfectQuantum { k_parallel, k_perp } => {
                let stage = |axis| Polarizer {
                    axis,
                    k_parallel,
                    k_perp,
                };
                stage(0.0).transmit(0.0) * stage(alpha_deg).transmit(0.0) * stage(beta_deg).transmit(alpha_deg)
            }
        }
    }
}

/// Uniform angle grid `start, start+step, …, ≤ stop` (degrees).
pub fn angle_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::param("angle_grid", "need start ≤ stop and step > 0"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// The `β` minimizing `P(α, ·)`, reduced to `[0°, 180°)`, and the minimum.
///
/// A scan over `beta_grid` picks the best grid point (ties go to the
/// smallest reduced angle), then golden-section search refines it within one
/// grid spacing on either side.
pub fn scan_min_beta(alpha_deg: f64, beta_grid: &[f64], model: &TransmissionModel) -> Result<(f64, f64)> {
    if beta_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    model.validate()?;
    let p = |b: f64| model.probability(alpha_deg, b);
    let mut best = (f64::INFINITY, f64::INFINITY);
    for &b in beta_grid {
        let reduced = b.rem_euclid(180.0);
        let v = p(reduced);
        if v < best.1 || (v == best.1 && reduced < best.0) {
            best = (reduced, v);
        }
    }
    let spacing = beta_grid
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .filter(|s| *s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let half_width = if spacing.is_finite() { spacing.min(90.0) } else { 1.0 };
    let refined = golden_section(p, best.0 - half_width, best.0 + half_width, BETA_TOLERANCE_DEG);
    let refined_value = p(refined);
    let (beta, value) = if refined_value <= best.1 {
        (refined.rem_euclid(180.0), refined_value)
    } else {
        best
    };
    // rem_euclid can round up to exactly 180.
    let beta = if beta >= 180.0 { 0.0 } else { beta };
    Ok((beta, value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub beta: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionCurve {
    pub points: Vec<CurvePoint>,
    pub model: TransmissionModel,
}

impl TransmissionCurve {
    /// Evaluates `model` along an arbitrary `(α, β)` path.
    pub fn along_path(model: TransmissionModel, pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        model.validate()?;
        let points = pairs
            .into_iter()
            .map(|(alpha, beta)| CurvePoint {
                alpha,
                beta,
                probability: model.probability(alpha, beta),
            })
            .collect();
        Ok(TransmissionCurve { points, model })
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write_header(out, &["alpha_deg", "beta_deg", "probability", "model_id"])?;
        for pt in &self.points {
            write_row(
                out,
                &[
                    fmt_f64(pt.alpha),
                    fmt_f64(pt.beta),
                    fmt_f64(pt.probability),
                    self.model.id().to_owned(),
                ],
            )?;
        }
        Ok(())
    }

    /// Parses the `alpha_deg,beta_deg,probability,model_id` schema. Model
    /// parameters are not part of the CSV and come from `model`.
    pub fn read_csv(text: &str, model: TransmissionModel) -> Result<Self> {
        let bad = |why: &str| Error::param("csv", why.to_owned());
        let mut lines = text.lines();
        if lines.next() != Some("alpha_deg,beta_deg,probability,model_id") {
            return Err(bad("unexpected header"));
        }
        let mut points = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 || cols[3] != model.id() {
                return Err(bad("malformed row"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            points.push(CurvePoint {
                alpha: num(cols[0])?,
                beta: num(cols[1])?,
                probability: num(cols[2])?,
            });
        }
        Ok(TransmissionCurve { points, model })
    }
}

/// For each `α`, the minimal-transmission partner `β*(α)` and `P(α, β*)`.
pub fn extrema_curve(alpha_list: &[f64], model: &TransmissionModel, beta_step: f64) -> Result<TransmissionCurve> {
    if alpha_list.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let beta_grid: Vec<f64> = angle_grid(0.0, 180.0, beta_step)?
        .into_iter()
        .filter(|b| *b < 180.0)
        .collect();
    let points = alpha_list
        .iter()
        .map(|&alpha| {
            let (beta, probability) = scan_min_beta(alpha, &beta_grid, model)?;
            Ok(CurvePoint {
                alpha,
                beta,
                probability,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TransmissionCurve { points, model: *model })
}

/// Circular distance between `β*` and `α + 90°` (degrees, modulo 180°).
pub fn distance_from_crossed(alpha_deg: f64, beta_deg: f64) -> f64 {
    circular_distance(beta_deg, alpha_deg + 90.0)
}
