//! Polar (Madelung) decomposition `ψ = λ·exp(iΦ/ħ)`.
//!
//! Substituting the decomposition into the Schrödinger equation gives two
//! real equations,
//!
//! ```text
//! (∇Φ)²/2m + V + V_q = −∂ₜΦ                  (energy / Hamilton–Jacobi form)
//! ΔΦ + 2(∇Φ)(∇ ln λ) = −2m ∂ₜ ln λ            (continuity)
//! V_q = −(ħ²/2m) Δλ/λ                          (quantum potential)
//! ```
//!
//! Near nodes of `ψ` the phase is undefined and `V_q` is singular. Points
//! with `λ < ε_node` are masked, as are both ends of any grid cell across
//! which the linear interpolant of `ψ` drops below `ε_node` (a node between
//! grid points, where `|ψ|` has a kink). Derived quantities are only formed
//! at interior points whose stencil is entirely unmasked. Everywhere else
//! the sentinel `NaN` is stored.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::csv::{fmt_f64, write_header, write_row};
use crate::state::{GridSpec, PotentialSpec, SystemConfig, WaveFunction};
use crate::{Complex64, Error, Result};

/// Default node threshold relative to `max λ`.
pub const DEFAULT_NODE_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MadelungFields {
    pub grid: GridSpec,
    pub time: f64,
    /// `|ψ|`, kept at every point.
    pub lambda: Vec<f64>,
    /// `ħ·arg ψ`, unwrapped within each unmasked run.
    pub phi: Vec<f64>,
    pub v_q: Vec<f64>,
    pub momentum: Vec<f64>,
    /// `true` where `λ < ε_node`.
    pub node_mask: Vec<bool>,
    hbar: f64,
}

impl MadelungFields {
    /// Whether the 3-point stencil around `i` is interior and unmasked.
    pub fn is_valid(&self, i: usize) -> bool {
        i > 0 && i + 1 < self.node_mask.len() && !self.node_mask[i - 1] && !self.node_mask[i] && !self.node_mask[i + 1]
    }

    pub fn valid_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_mask.len()).filter(move |&i| self.is_valid(i))
    }

    /// Rebuilds `λ·exp(iΦ/ħ)`; masked points give zero.
    pub fn reconstruct(&self) -> Vec<num_complex::Complex64> {
        self.lambda
            .iter()
            .zip(&self.phi)
            .zip(&self.node_mask)
            .map(|((&l, &p), &masked)| {
                if masked {
                    num_complex::Complex64::default()
                } else {
                    num_complex::Complex64::from_polar(l, p / self.hbar)
                }
            })
            .collect()
    }

    /// Writes `x,lambda,phi,v_q,momentum,masked`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write_header(out, &["x", "lambda", "phi", "v_q", "momentum", "masked"])?;
        for i in 0..self.lambda.len() {
            write_row(
                out,
                &[
                    fmt_f64(self.grid.x(i)),
                    fmt_f64(self.lambda[i]),
                    fmt_f64(self.phi[i]),
                    fmt_f64(self.v_q[i]),
                    fmt_f64(self.momentum[i]),
                    u8::from(self.node_mask[i]).to_string(),
                ],
            )?;
        }
        Ok(())
    }
}

/// `ε_node = DEFAULT_NODE_FRACTION · max|ψ|`.
pub fn default_node_threshold(psi: &WaveFunction) -> f64 {
    let max = psi.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    (DEFAULT_NODE_FRACTION * max).max(f64::MIN_POSITIVE)
}

/// Wraps an angle into `(−π, π]`.
fn wrap_angle(a: f64) -> f64 {
    let w = a - 2.0 * PI * ((a + PI) / (2.0 * PI)).floor();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Smallest `|a + s(b − a)|` over `s ∈ [0, 1]`.
fn segment_min_norm(a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len_sq = d.norm_sqr();
    if len_sq == 0.0 {
        return a.norm();
    }
    let s = (-(a.conj() * d).re / len_sq).clamp(0.0, 1.0);
    (a + d * s).norm()
}

/// Decomposes `psi` into amplitude, phase, quantum potential and Bohm
/// momentum.
pub fn decompose(psi: &WaveFunction, config: &SystemConfig, epsilon_node: f64) -> Result<MadelungFields> {
    if !(epsilon_node > 0.0) {
        return Err(Error::param("epsilon_node", "must be positive"));
    }
    if psi.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::param("psi", "non-finite amplitude"));
    }
    let hbar = config.hbar;
    let lambda: Vec<f64> = psi.values.iter().map(|v| v.norm()).collect();
    let mut node_mask: Vec<bool> = lambda.iter().map(|&l| l < epsilon_node).collect();
    for (i, w) in psi.values.windows(2).enumerate() {
        let both_above = !node_mask[i] && !node_mask[i + 1];
        if both_above && segment_min_norm(w[0], w[1]) < epsilon_node {
            node_mask[i] = true;
            node_mask[i + 1] = true;
        }
    }
    if node_mask.iter().all(|&m| m) {
        return Err(Error::AllMasked);
    }

    // Unwrap each unmasked run independently, left to right.
    let mut phi = vec![f64::NAN; lambda.len()];
    let mut prev: Option<f64> = None;
    for (i, v) in psi.values.iter().enumerate() {
        if node_mask[i] {
            prev = None;
            continue;
        }
        let raw = v.arg();
        let unwrapped = match prev {
            None => raw,
            Some(p) => p + wrap_angle(raw - p),
        };
        phi[i] = hbar * unwrapped;
        prev = Some(unwrapped);
    }

    let mut fields = MadelungFields {
        grid: psi.grid,
        time: psi.time,
        lambda,
        phi,
        v_q: Vec::new(),
        momentum: Vec::new(),
        node_mask,
        hbar,
    };
    fields.v_q = quantum_potential(&fields, config);
    fields.momentum = bohm_momentum(&fields);
    Ok(fields)
}

/// `V_q = −(ħ²/2m)·Δλ/λ` with the 3-point Laplacian.
pub fn quantum_potential(fields: &MadelungFields, config: &SystemConfig) -> Vec<f64> {
    let dx = fields.grid.dx();
    let coeff = -config.hbar * config.hbar / (2.0 * config.mass * dx * dx);
    let l = &fields.lambda;
    (0..l.len())
        .map(|i| {
            if fields.is_valid(i) {
                coeff * (l[i + 1] - 2.0 * l[i] + l[i - 1]) / l[i]
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// `p = ∇Φ` by central differences.
pub fn bohm_momentum(fields: &MadelungFields) -> Vec<f64> {
    let inv = 1.0 / (2.0 * fields.grid.dx());
    let phi = &fields.phi;
    (0..phi.len())
        .map(|i| {
            if fields.is_valid(i) {
                (phi[i + 1] - phi[i - 1]) * inv
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// `target.phi` moved onto the unwrapping branch of `reference`.
///
/// Within an unmasked run the two phases differ by the physical change plus
/// a constant multiple of `2πħ`. The multiple is read off at the run's
/// largest amplitude, where the phase is best conditioned, and removed from
/// the whole run. Requires the physical change there to be below `πħ`.
fn phase_on_branch_of(reference: &MadelungFields, target: &MadelungFields) -> Vec<f64> {
    let period = 2.0 * PI * target.hbar;
    let mut out = target.phi.clone();
    let n = out.len();
    let mut start = 0;
    while start < n {
        if target.node_mask[start] {
            start += 1;
            continue;
        }
        let end = (start..n).find(|&i| target.node_mask[i]).unwrap_or(n);
        let anchor = (start..end)
            .filter(|&i| reference.phi[i].is_finite())
            .max_by(|&a, &b| target.lambda[a].total_cmp(&target.lambda[b]));
        if let Some(i) = anchor {
            let shift = period * ((target.phi[i] - reference.phi[i]) / period).round();
            out[start..end].iter_mut().for_each(|p| *p -= shift);
        }
        start = end;
    }
    out
}

/// Moves each snapshot's phase onto the branch of its predecessor so that
/// the stack is continuous in time. Needed before differentiating
/// independently unwrapped phases in time.
pub fn align_phase_in_time(series: &mut [MadelungFields]) {
    for k in 1..series.len() {
        let aligned = phase_on_branch_of(&series[k - 1], &series[k]);
        series[k].phi = aligned;
    }
}

/// Residuals of the two real field equations at the middle snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct MadelungResiduals {
    pub time: f64,
    /// `(∇Φ)²/2m + V + V_q + ∂ₜΦ`
    pub r6: Vec<f64>,
    /// `ΔΦ + 2(∇Φ)(∇ ln λ) + 2m ∂ₜ ln λ`
    pub r7: Vec<f64>,
}

impl MadelungResiduals {
    /// Largest finite `|r6|` and `|r7|` over points selected by `keep`.
    pub fn max_abs(&self, keep: impl Fn(usize) -> bool) -> (f64, f64) {
        let fold = |v: &[f64]| {
            v.iter()
                .enumerate()
                .filter(|(i, r)| r.is_finite() && keep(*i))
                .fold(0.0f64, |m, (_, r)| m.max(r.abs()))
        };
        (fold(&self.r6), fold(&self.r7))
    }
}

/// Evaluates both field-equation residuals at the middle snapshot of
/// `fields_t`, using central time differences with its two neighbours.
///
/// The neighbouring phases are moved onto the middle snapshot's unwrapping
/// branch first, so the snapshots need not share an offset.
pub fn madelung_residuals(
    fields_t: &[MadelungFields],
    potential: &PotentialSpec,
    config: &SystemConfig,
) -> Result<MadelungResiduals> {
    if fields_t.len() < 3 {
        return Err(Error::InsufficientSnapshots {
            needed: 3,
            got: fields_t.len(),
        });
    }
    let mid = fields_t.len() / 2;
    let (before, now, after) = (&fields_t[mid - 1], &fields_t[mid], &fields_t[mid + 1]);
    if before.grid != now.grid || after.grid != now.grid {
        return Err(Error::GridMismatch);
    }
    let span = after.time - before.time;
    if !(span > 0.0) {
        return Err(Error::param("fields_t", "snapshot times must increase"));
    }
    let mass = config.mass;
    let dx = now.grid.dx();
    let n = now.lambda.len();
    let before_phi = phase_on_branch_of(now, before);
    let after_phi = phase_on_branch_of(now, after);
    let mut r6 = vec![f64::NAN; n];
    let mut r7 = vec![f64::NAN; n];
    for i in 0..n {
        if !(now.is_valid(i) && !before.node_mask[i] && !after.node_mask[i]) {
            continue;
        }
        let phi = &now.phi;
        let grad_phi = now.momentum[i];
        let lap_phi = (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (dx * dx);
        let dphi_dt = (after_phi[i] - before_phi[i]) / span;
        let l = &now.lambda;
        let grad_ln_lambda = (l[i + 1].ln() - l[i - 1].ln()) / (2.0 * dx);
        let dln_lambda_dt = (after.lambda[i].ln() - before.lambda[i].ln()) / span;
        let v = potential.value(now.grid.x(i), mass);

        r6[i] = grad_phi * grad_phi / (2.0 * mass) + v + now.v_q[i] + dphi_dt;
        r7[i] = lap_phi + 2.0 * grad_phi * grad_ln_lambda + 2.0 * mass * dln_lambda_dt;
    }
    Ok(MadelungResiduals { time: now.time, r6, r7 })
}
