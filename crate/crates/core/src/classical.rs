//! Classical trajectories, the Lagrangian action along them, and the
//! Hamilton–Jacobi residual `(∇S)²/2m + V + ∂ₜS` of a sampled field.

use std::io::{self, Write};

use crate::csv::{fmt_f64, write_header, write_row};
use crate::madelung::MadelungFields;
use crate::state::{GridSpec, PotentialSpec, SystemConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalState {
    pub x: f64,
    pub p: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<ClassicalState>,
    /// Total energy of the initial state.
    pub energy: f64,
    /// Lagrangian action accumulated from the first sample, per sample.
    pub action: Vec<f64>,
}

impl Trajectory {
    /// Writes `t,x,p,energy,action`, where `energy` is the instantaneous
    /// total energy of each sample.
    pub fn write_csv<W: Write>(&self, out: &mut W, potential: &PotentialSpec, config: &SystemConfig) -> io::Result<()> {
        write_header(out, &["t", "x", "p", "energy", "action"])?;
        for (s, a) in self.samples.iter().zip(&self.action) {
            write_row(
                out,
                &[
                    fmt_f64(s.t),
                    fmt_f64(s.x),
                    fmt_f64(s.p),
                    fmt_f64(energy(s, potential, config)),
                    fmt_f64(*a),
                ],
            )?;
        }
        Ok(())
    }

    pub fn max_relative_energy_drift(&self, potential: &PotentialSpec, config: &SystemConfig) -> f64 {
        let scale = self.energy.abs().max(f64::MIN_POSITIVE);
        self.samples
            .iter()
            .map(|s| (energy(s, potential, config) - self.energy).abs() / scale)
            .fold(0.0, f64::max)
    }
}

pub fn energy(s: &ClassicalState, potential: &PotentialSpec, config: &SystemConfig) -> f64 {
    s.p * s.p / (2.0 * config.mass) + potential.value(s.x, config.mass)
}

/// Integrates Hamilton's equations with velocity Verlet.
///
/// Inside an infinite well the motion is a free drift with exact elastic
/// reflection at the walls. A finite barrier has no force field and is
/// rejected.
pub fn integrate_hamilton(
    initial: ClassicalState,
    potential: &PotentialSpec,
    config: &SystemConfig,
    dt: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::param("dt", "must be finite and non-zero"));
    }
    if !(initial.x.is_finite() && initial.p.is_finite() && initial.t.is_finite()) {
        return Err(Error::param("initial", "state must be finite"));
    }
    potential.validate()?;
    let m = config.mass;
    let mut samples = Vec::with_capacity(n_steps + 1);
    samples.push(initial);

    match *potential {
        PotentialSpec::InfiniteWell { width } => {
            if !(initial.x > 0.0 && initial.x < width) {
                return Err(Error::param("initial", "start must lie inside the well"));
            }
            let mut s = initial;
            for _ in 0..n_steps {
                let (x, p) = reflect_into(s.x + s.p / m * dt, s.p, width);
                s = ClassicalState { x, p, t: s.t + dt };
                samples.push(s);
            }
        }
        _ => {
            let mut s = initial;
            let mut force = -potential.derivative(s.x, m)?;
            for _ in 0..n_steps {
                let p_half = s.p + 0.5 * dt * force;
                let x = s.x + dt * p_half / m;
                force = -potential.derivative(x, m)?;
                let p = p_half + 0.5 * dt * force;
                s = ClassicalState { x, p, t: s.t + dt };
                samples.push(s);
            }
        }
    }

    let energy = energy(&initial, potential, config);
    let action = lagrangian_action(&samples, potential, config, 0.0);
    Ok(Trajectory {
        samples,
        energy,
        action,
    })
}

/// Folds a free drift back into `(0, width)`, flipping momentum once per
/// wall hit.
fn reflect_into(mut x: f64, mut p: f64, width: f64) -> (f64, f64) {
    let period = 2.0 * width;
    x = x.rem_euclid(period);
    if x > width {
        x = period - x;
        p = -p;
    }
    (x, p)
}

fn lagrangian_action(
    samples: &[ClassicalState],
    potential: &PotentialSpec,
    config: &SystemConfig,
    constant: f64,
) -> Vec<f64> {
    let lagrangian = |s: &ClassicalState| {
        let v = match potential {
            PotentialSpec::InfiniteWell { .. } => 0.0,
            _ => potential.value(s.x, config.mass),
        };
        s.p * s.p / (2.0 * config.mass) - v
    };
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = constant;
    out.push(acc);
    for w in samples.windows(2) {
        acc += 0.5 * (w[1].t - w[0].t) * (lagrangian(&w[0]) + lagrangian(&w[1]));
        out.push(acc);
    }
    out
}

/// Hamilton's principal function along the trajectory,
/// `S(t) = constant + ∫ (p²/2m − V) dt` by the trapezoid rule.
pub fn principal_function(
    traj: &Trajectory,
    potential: &PotentialSpec,
    config: &SystemConfig,
    constant: f64,
) -> Vec<f64> {
    lagrangian_action(&traj.samples, potential, config, constant)
}

/// A real field `S(x, t)` sampled on a grid at equally spaced times.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionField {
    pub grid: GridSpec,
    pub times: Vec<f64>,
    /// One row per time slice.
    pub slices: Vec<Vec<f64>>,
}

impl ActionField {
    pub fn from_fn(grid: GridSpec, times: Vec<f64>, s: impl Fn(f64, f64) -> f64) -> Self {
        let slices = times
            .iter()
            .map(|&t| (0..grid.n_points).map(|i| s(grid.x(i), t)).collect())
            .collect();
        ActionField { grid, times, slices }
    }

    /// Stacks Madelung phases as an action field. Run
    /// [`crate::madelung::align_phase_in_time`] first so the slices share an
    /// unwrapping branch; masked points become `NaN`.
    pub fn from_phases(fields: &[MadelungFields]) -> Result<Self> {
        let first = fields
            .first()
            .ok_or(Error::InsufficientSnapshots { needed: 3, got: 0 })?;
        if fields.iter().any(|f| f.grid != first.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(ActionField {
            grid: first.grid,
            times: fields.iter().map(|f| f.time).collect(),
            slices: fields.iter().map(|f| f.phi.clone()).collect(),
        })
    }
}

/// `r9 = (∇S)²/2m + V + ∂ₜS` at the middle time slice, by central
/// differences. Boundary points are `NaN`.
pub fn hj_residual(s_field: &ActionField, potential: &PotentialSpec, config: &SystemConfig) -> Result<Vec<f64>> {
    let n_slices = s_field.slices.len();
    if n_slices < 3 || s_field.times.len() != n_slices {
        return Err(Error::InsufficientSnapshots {
            needed: 3,
            got: n_slices.min(s_field.times.len()),
        });
    }
    let mid = n_slices / 2;
    let span = s_field.times[mid + 1] - s_field.times[mid - 1];
    if !(span > 0.0) {
        return Err(Error::param("times", "must increase"));
    }
    let n = s_field.grid.n_points;
    if s_field.slices.iter().any(|s| s.len() != n) {
        return Err(Error::GridMismatch);
    }
    let dx = s_field.grid.dx();
    let (before, now, after) = (&s_field.slices[mid - 1], &s_field.slices[mid], &s_field.slices[mid + 1]);
    let mut out = vec![f64::NAN; n];
    for i in 1..n.saturating_sub(1) {
        let grad = (now[i + 1] - now[i - 1]) / (2.0 * dx);
        let ds_dt = (after[i] - before[i]) / span;
        let v = potential.value(s_field.grid.x(i), config.mass);
        out[i] = grad * grad / (2.0 * config.mass) + v + ds_dt;
    }
    Ok(out)
}
