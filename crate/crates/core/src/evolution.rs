//! Time-dependent propagation and stationary states on the grid.
//!
//! Propagation uses Crank–Nicolson,
//! `(1 + i dt H / 2ħ) ψ(t+dt) = (1 − i dt H / 2ħ) ψ(t)`,
//! which is the Cayley transform of the discrete Hamiltonian: unitary on the
//! discrete inner product and commuting with `H`, so both norm and `⟨H⟩`
//! are conserved to round-off. Boundaries are hard walls.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{inverse_iteration, kth_eigenvalue, sturm_count, ComplexTridiagonalLu};
use crate::state::{
    expectation_value, write_snapshots_csv, DiscreteHamiltonian, Observable, PotentialSpec, SystemConfig, WaveFunction,
};
use crate::{Error, Result};

/// A stationary state `Hψ = Eψ` with quantum number `index` (0 = ground).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub energy: f64,
    pub state: WaveFunction,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationPlan {
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

impl PropagationPlan {
    pub fn new(dt: f64, n_steps: usize, record_every: usize) -> Self {
        PropagationPlan {
            dt,
            n_steps,
            boundary: Boundary::Dirichlet,
            record_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", "must be positive"));
        }
        if self.n_steps < 1 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        if self.record_every < 1 {
            return Err(Error::param("record_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// A recorded state together with the step it was taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub state: WaveFunction,
}

/// Writes a propagation series in the `step,t,x,re,im` CSV schema.
pub fn write_series_csv<W: Write>(out: &mut W, series: &[Snapshot]) -> io::Result<()> {
    write_snapshots_csv(out, series.iter().map(|s| (s.step, &s.state)))
}

/// Pre-factored Crank–Nicolson propagator for a fixed potential and `dt`.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    hamiltonian: DiscreteHamiltonian,
    lu: ComplexTridiagonalLu,
    /// `i dt / 2ħ`
    half_step: Complex64,
    dt: f64,
    config: SystemConfig,
}

impl CrankNicolson {
    pub fn new(potential: &PotentialSpec, config: &SystemConfig, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", "must be positive"));
        }
        let hamiltonian = DiscreteHamiltonian::new(potential, config)?;
        let half_step = Complex64::new(0.0, dt / (2.0 * config.hbar));
        let diag: Vec<Complex64> = hamiltonian
            .diag
            .iter()
            .map(|&d| Complex64::new(1.0, 0.0) + half_step * d)
            .collect();
        let off = half_step * hamiltonian.off;
        let lu = ComplexTridiagonalLu::factor(&diag, off, off)?;
        Ok(CrankNicolson {
            hamiltonian,
            lu,
            half_step,
            dt,
            config: *config,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        if psi.grid != self.config.grid {
            return Err(Error::GridMismatch);
        }
        let h_psi = self.hamiltonian.apply(&psi.values);
        let range = self.hamiltonian.active.clone();
        let mut rhs: Vec<Complex64> = range
            .clone()
            .map(|i| psi.values[i] - self.half_step * h_psi[i])
            .collect();
        self.lu.solve(&mut rhs);
        let mut values = vec![Complex64::default(); psi.len()];
        values[range].copy_from_slice(&rhs);
        Ok(WaveFunction {
            grid: psi.grid,
            values,
            time: psi.time + self.dt,
        })
    }
}

/// One Crank–Nicolson step of length `dt`.
pub fn crank_nicolson_step(
    psi: &WaveFunction,
    potential: &PotentialSpec,
    config: &SystemConfig,
    dt: f64,
) -> Result<WaveFunction> {
    CrankNicolson::new(potential, config, dt)?.step(psi)
}

/// Applies `plan.n_steps` Crank–Nicolson steps. The first snapshot is the
/// input; afterwards every `record_every`-th step is kept.
pub fn propagate(
    psi: &WaveFunction,
    potential: &PotentialSpec,
    config: &SystemConfig,
    plan: &PropagationPlan,
) -> Result<Vec<Snapshot>> {
    plan.validate()?;
    let stepper = CrankNicolson::new(potential, config, plan.dt)?;
    let mut series = Vec::with_capacity(plan.n_steps / plan.record_every + 1);
    series.push(Snapshot {
        step: 0,
        state: psi.clone(),
    });
    let mut current = psi.clone();
    for step in 1..=plan.n_steps {
        current = stepper.step(&current)?;
        if step % plan.record_every == 0 {
            series.push(Snapshot {
                step,
                state: current.clone(),
            });
        }
    }
    Ok(series)
}

/// A time step with `E·dt ≤ 0.1` (in units of ħ) for the energy content of
/// `psi`, taken as `⟨H⟩` plus three standard deviations.
pub fn suggested_dt(psi: &WaveFunction, potential: &PotentialSpec, config: &SystemConfig) -> Result<f64> {
    let mean = expectation_value(psi, &Observable::Hamiltonian(*potential), config)?.value;
    let h = DiscreteHamiltonian::new(potential, config)?;
    let h_psi = WaveFunction {
        values: h.apply(&psi.values),
        ..psi.clone()
    };
    let second = h_psi.norm_sq();
    let spread = (second - mean * mean).max(0.0).sqrt();
    let scale = (mean.abs() + 3.0 * spread).max(f64::MIN_POSITIVE);
    Ok(0.1 * config.hbar / scale)
}

/// Lowest `n_states` eigenpairs of the discrete Hamiltonian, energies
/// ascending, states real and normalized with a positive leftmost lobe.
pub fn solve_stationary(potential: &PotentialSpec, config: &SystemConfig, n_states: usize) -> Result<Vec<EigenPair>> {
    let h = DiscreteHamiltonian::new(potential, config)?;
    let dim = h.diag.len();
    if n_states < 1 {
        return Err(Error::param("n_states", "must be at least 1"));
    }
    if n_states >= dim / 2 {
        return Err(Error::param(
            "n_states",
            format!("{n_states} states requested from only {dim} active grid points"),
        ));
    }
    let grid = config.grid;
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(n_states);
    for k in 0..n_states {
        let energy = kth_eigenvalue(&h.diag, h.off, k)?;
        if let Some(prev) = pairs.last() {
            if !(energy > prev.energy) {
                return Err(Error::NonConvergence(format!(
                    "eigenvalues {} and {k} are not strictly increasing",
                    k - 1
                )));
            }
        }
        let mut v = inverse_iteration(&h.diag, h.off, energy);
        let first = v.iter().position(|x| x.abs() > 1e-8).unwrap_or(0);
        if v[first] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let mut values = vec![Complex64::default(); grid.n_points];
        for (slot, x) in values[h.active.clone()].iter_mut().zip(&v) {
            *slot = Complex64::new(*x, 0.0);
        }
        let mut state = WaveFunction {
            grid,
            values,
            time: 0.0,
        };
        state.normalize()?;
        pairs.push(EigenPair {
            energy,
            state,
            index: k,
        });
    }
    Ok(pairs)
}

/// Number of discrete eigenvalues strictly below `energy`.
pub fn count_states_below(potential: &PotentialSpec, config: &SystemConfig, energy: f64) -> Result<usize> {
    let h = DiscreteHamiltonian::new(potential, config)?;
    Ok(sturm_count(&h.diag, h.off, energy))
}

/// `‖Hψ − Eψ‖` in the trapezoid norm.
pub fn eigen_residual(pair: &EigenPair, potential: &PotentialSpec, config: &SystemConfig) -> Result<f64> {
    let h = DiscreteHamiltonian::new(potential, config)?;
    let values = h
        .apply(&pair.state.values)
        .into_iter()
        .zip(&pair.state.values)
        .map(|(hv, v)| hv - v * pair.energy)
        .collect();
    Ok(WaveFunction {
        values,
        ..pair.state.clone()
    }
    .norm_sq()
    .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{inner_product, GridSpec};
    use std::f64::consts::PI;

    fn natural(x_min: f64, x_max: f64, n: usize) -> SystemConfig {
        SystemConfig::natural(GridSpec::new(x_min, x_max, n).unwrap())
    }

    #[test]
    fn harmonic_spectrum() {
        let cfg = natural(-10.0, 10.0, 2001);
        let pot = PotentialSpec::HarmonicOscillator { omega: 1.0 };
        let pairs = solve_stationary(&pot, &cfg, 6).unwrap();
        for p in &pairs {
            let exact = p.index as f64 + 0.5;
            assert!(
                ((p.energy - exact) / exact).abs() < 1e-3,
                "n={} E={}",
                p.index,
                p.energy
            );
            assert!(eigen_residual(p, &pot, &cfg).unwrap() <= 1e-6 * p.energy.abs());
            assert!(p.state.is_normalized());
        }
    }

    #[test]
    fn infinite_well_ground_state() {
        let cfg = natural(0.0, 1.0, 2000);
        let pot = PotentialSpec::InfiniteWell { width: 1.0 };
        let pairs = solve_stationary(&pot, &cfg, 3).unwrap();
        for p in &pairs {
            let n = (p.index + 1) as f64;
            let exact = n * n * PI * PI / 2.0;
            assert!(((p.energy - exact) / exact).abs() < 1e-3);
        }
        let overlap = inner_product(&pairs[0].state, &pairs[1].state).unwrap();
        assert!(overlap.norm() < 1e-10);
    }

    #[test]
    fn eigenvalue_error_is_second_order() {
        // Discrete well: E_h = (2/dx²)(1 − cos(π dx / L)) / 2, error ∝ dx².
        let pot = PotentialSpec::InfiniteWell { width: 1.0 };
        let exact = PI * PI / 2.0;
        let errors: Vec<f64> = [101, 201, 401]
            .iter()
            .map(|&n| {
                let e = solve_stationary(&pot, &natural(0.0, 1.0, n), 1).unwrap()[0].energy;
                (e - exact).abs()
            })
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.05, "order {order}");
        }
    }

    #[test]
    fn barrier_has_finitely_many_states_below_height() {
        // A finite barrier inside a box: the discrete spectrum below the
        // barrier top is a finite list of separated levels, while any
        // classical energy is admissible.
        let cfg = natural(-5.0, 5.0, 1001);
        let pot = PotentialSpec::FiniteBarrier {
            height: 10.0,
            width: 1.0,
            center: 0.0,
        };
        let below = count_states_below(&pot, &cfg, 10.0).unwrap();
        assert!(below > 0 && below < 20, "{below}");
        let pairs = solve_stationary(&pot, &cfg, below).unwrap();
        assert!(pairs.iter().all(|p| p.energy < 10.0));
        let above = solve_stationary(&pot, &cfg, below + 1).unwrap();
        assert!(above[below].energy >= 10.0);
        for w in pairs.windows(2) {
            assert!(w[1].energy - w[0].energy > 1e-6);
        }
    }

    #[test]
    fn too_many_states_is_rejected() {
        let cfg = natural(0.0, 1.0, 20);
        assert!(solve_stationary(&PotentialSpec::Free, &cfg, 0).is_err());
        assert!(solve_stationary(&PotentialSpec::Free, &cfg, 15).is_err());
    }

    #[test]
    fn ground_state_phase_rotation() {
        let cfg = natural(-10.0, 10.0, 801);
        let pot = PotentialSpec::HarmonicOscillator { omega: 1.0 };
        let ground = &solve_stationary(&pot, &cfg, 1).unwrap()[0];
        let dt = 0.01;
        let next = crank_nicolson_step(&ground.state, &pot, &cfg, dt).unwrap();
        // Exact discrete phase of the Cayley transform is
        // −2·atan(E dt / 2), which is e^{−iE dt} to O(dt³).
        let expected = Complex64::from_polar(1.0, -ground.energy * dt);
        for (a, b) in next.values.iter().zip(&ground.state.values) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
            assert!((a - b * expected).norm() < 1e-6 * b.norm().max(1e-300) + 1e-14);
        }
        assert_eq!(next.time, dt);
    }

    #[test]
    fn free_packet_step_is_unitary() {
        let cfg = natural(-40.0, 40.0, 1601);
        let psi = WaveFunction::gaussian(cfg.grid, 0.0, 1.0, 2.0).unwrap();
        let next = crank_nicolson_step(&psi, &PotentialSpec::Free, &cfg, 0.01).unwrap();
        assert!((next.norm_sq() - psi.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn zero_field_stays_zero() {
        let cfg = natural(-1.0, 1.0, 64);
        let zero = WaveFunction::zeros(cfg.grid).unwrap();
        let next = crank_nicolson_step(&zero, &PotentialSpec::HarmonicOscillator { omega: 2.0 }, &cfg, 0.1).unwrap();
        assert!(next.values.iter().all(|v| *v == Complex64::default()));
    }

    #[test]
    fn free_packet_moves_and_spreads() {
        let cfg = natural(-60.0, 60.0, 4001);
        let (x0, sigma0, k0) = (-10.0, 1.0, 2.0);
        let psi = WaveFunction::gaussian(cfg.grid, x0, sigma0, k0).unwrap();
        let plan = PropagationPlan::new(0.005, 1000, 500);
        let series = propagate(&psi, &PotentialSpec::Free, &cfg, &plan).unwrap();
        assert_eq!(series.len(), 3);
        assert_eq!(series[0].state, psi);
        let last = &series[2].state;
        let t = last.time;
        assert!((t - 5.0).abs() < 1e-12);

        let x_mean = expectation_value(last, &Observable::Position, &cfg).unwrap().value;
        let x2: f64 = last
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| cfg.grid.weight(i) * v.norm_sqr() * (cfg.grid.x(i) - x_mean).powi(2))
            .sum::<f64>()
            * cfg.grid.dx();
        // Central differences slow the group velocity to cos(k dx) · ħk/m,
        // so allow the O(dx²) discrepancy in the drift.
        let x_exact = x0 + k0 * t;
        assert!((x_mean - x_exact).abs() < 2e-2, "{x_mean} vs {x_exact}");
        let width_exact = sigma0 * sigma0 + (t / (2.0 * sigma0)).powi(2);
        assert!(((x2 - width_exact) / width_exact).abs() < 5e-3, "{x2} vs {width_exact}");
    }

    #[test]
    fn harmonic_eigenstate_modulus_is_stationary() {
        let cfg = natural(-10.0, 10.0, 801);
        let pot = PotentialSpec::HarmonicOscillator { omega: 1.0 };
        let ground = solve_stationary(&pot, &cfg, 1).unwrap().remove(0);
        let series = propagate(&ground.state, &pot, &cfg, &PropagationPlan::new(0.01, 1000, 1000)).unwrap();
        let last = &series.last().unwrap().state;
        for (a, b) in last.values.iter().zip(&ground.state.values) {
            assert!((a.norm() - b.norm()).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_plan() {
        let cfg = natural(-1.0, 1.0, 64);
        let psi = WaveFunction::gaussian(cfg.grid, 0.0, 0.2, 0.0).unwrap();
        assert!(propagate(&psi, &PotentialSpec::Free, &cfg, &PropagationPlan::new(0.0, 10, 1)).is_err());
        assert!(propagate(&psi, &PotentialSpec::Free, &cfg, &PropagationPlan::new(0.1, 0, 1)).is_err());
        assert!(crank_nicolson_step(&psi, &PotentialSpec::Free, &cfg, -1.0).is_err());
    }

    #[test]
    fn suggested_dt_scales_with_energy() {
        let cfg = natural(-20.0, 20.0, 801);
        let slow = WaveFunction::gaussian(cfg.grid, 0.0, 1.0, 0.5).unwrap();
        let fast = WaveFunction::gaussian(cfg.grid, 0.0, 1.0, 4.0).unwrap();
        let a = suggested_dt(&slow, &PotentialSpec::Free, &cfg).unwrap();
        let b = suggested_dt(&fast, &PotentialSpec::Free, &cfg).unwrap();
        assert!(a > b && b > 0.0);
    }
}
