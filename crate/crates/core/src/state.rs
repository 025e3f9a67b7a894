//! Grids, wavefunctions, potentials and the basic Hilbert-space operations.
//!
//! Inner products use the trapezoid rule on the uniform grid. The first and
//! last grid points are hard walls: the discrete Hamiltonian pins the field
//! to zero there, so for any state produced by [`crate::evolution`] the
//! trapezoid rule and the plain Riemann sum coincide.

use std::io::{self, Write};
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csv::{fmt_f64, write_header, write_row};
use crate::{Error, Result};

/// Smallest grid a [`WaveFunction`] may live on.
pub const MIN_GRID_POINTS: usize = 8;

/// `|‖ψ‖² − 1|` allowed for inputs that must be normalized.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Imaginary part of `⟨ψ|A|ψ⟩` above which a Hermitian expectation value is
/// flagged as under-resolved.
pub const HERMITIAN_RESIDUE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        let spec = GridSpec { x_min, x_max, n_points };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the invariants required of a simulation grid.
    pub fn validate(&self) -> Result<()> {
        self.validate_with_min(MIN_GRID_POINTS)
    }

    fn validate_with_min(&self, min_points: usize) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite()) {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if self.x_max <= self.x_min {
            return Err(Error::InvalidGrid(format!(
                "x_max ({}) must exceed x_min ({})",
                self.x_max, self.x_min
            )));
        }
        if self.n_points < min_points {
            return Err(Error::InvalidGrid(format!(
                "n_points = {} is below the minimum of {min_points}",
                self.n_points
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of point `i` (in units of `dx`).
    pub(crate) fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_points {
            0.5
        } else {
            1.0
        }
    }
}

/// Equally spaced coordinates from `x_min` to `x_max` inclusive.
///
/// Coordinate construction only needs two points; [`GridSpec::validate`]
/// applies the stricter minimum used for wavefunctions.
pub fn build_grid(spec: &GridSpec) -> Result<Vec<f64>> {
    spec.validate_with_min(2)?;
    Ok(spec.points())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
    pub grid: GridSpec,
}

fn one() -> f64 {
    1.0
}

impl SystemConfig {
    /// Natural units, `ħ = m = 1`.
    pub fn natural(grid: GridSpec) -> Self {
        SystemConfig {
            hbar: 1.0,
            mass: 1.0,
            grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::param("hbar", "must be positive"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::param("mass", "must be positive"));
        }
        self.grid.validate()
    }
}

/// Time-independent potential families.
///
/// The infinite well occupies `[0, width]`; grid points outside it are hard
/// walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Free,
    HarmonicOscillator { omega: f64 },
    InfiniteWell { width: f64 },
    FiniteBarrier { height: f64, width: f64, center: f64 },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialSpec::Free => Ok(()),
            PotentialSpec::HarmonicOscillator { omega } => {
                if omega > 0.0 && omega.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("omega", "must be positive"))
                }
            }
            PotentialSpec::InfiniteWell { width } => {
                if width > 0.0 && width.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("width", "must be positive"))
                }
            }
            PotentialSpec::FiniteBarrier { height, width, center } => {
                if !(width > 0.0 && width.is_finite()) {
                    Err(Error::param("width", "must be positive"))
                } else if !height.is_finite() || !center.is_finite() {
                    Err(Error::param("height", "height and center must be finite"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// `V(x)`; `+∞` outside an infinite well.
    pub fn value(&self, x: f64, mass: f64) -> f64 {
        match *self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::HarmonicOscillator { omega } => 0.5 * mass * omega * omega * x * x,
            PotentialSpec::InfiniteWell { width } => {
                if x > 0.0 && x < width {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PotentialSpec::FiniteBarrier { height, width, center } => {
                if (x - center).abs() < 0.5 * width {
                    height
                } else {
                    0.0
                }
            }
        }
    }

    /// `V'(x)` where the potential is smooth.
    pub fn derivative(&self, x: f64, mass: f64) -> Result<f64> {
        match *self {
            PotentialSpec::Free => Ok(0.0),
            PotentialSpec::HarmonicOscillator { omega } => Ok(mass * omega * omega * x),
            PotentialSpec::InfiniteWell { .. } => Err(Error::NotDifferentiable("infinite well walls")),
            PotentialSpec::FiniteBarrier { .. } => Err(Error::NotDifferentiable("finite barrier edges")),
        }
    }

    /// Smallest value of `V` on the grid.
    pub fn min_on(&self, grid: &GridSpec, mass: f64) -> f64 {
        (0..grid.n_points)
            .map(|i| self.value(grid.x(i), mass))
            .fold(f64::INFINITY, f64::min)
    }

    /// Index range of grid points that carry a degree of freedom: the domain
    /// endpoints and every point where `V` is infinite are walls.
    pub(crate) fn active_range(&self, grid: &GridSpec, mass: f64) -> Range<usize> {
        let n = grid.n_points;
        let mut lo = 1;
        while lo < n - 1 && !self.value(grid.x(lo), mass).is_finite() {
            lo += 1;
        }
        let mut hi = n - 1;
        while hi > lo && !self.value(grid.x(hi - 1), mass).is_finite() {
            hi -= 1;
        }
        lo..hi
    }
}

/// The 3-point finite-difference Hamiltonian `−ħ²/2m ∂² + V` restricted to
/// the active (non-wall) points.
#[derive(Debug, Clone)]
pub(crate) struct DiscreteHamiltonian {
    /// Diagonal entries over the active range.
    pub diag: Vec<f64>,
    /// The (constant) off-diagonal entry, `−ħ²/(2m dx²)`.
    pub off: f64,
    pub active: Range<usize>,
    pub n_points: usize,
}

impl DiscreteHamiltonian {
    pub fn new(potential: &PotentialSpec, config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        potential.validate()?;
        let grid = &config.grid;
        let dx = grid.dx();
        let kinetic = config.hbar * config.hbar / (2.0 * config.mass * dx * dx);
        let active = potential.active_range(grid, config.mass);
        if active.is_empty() {
            return Err(Error::InvalidGrid(
                "no grid point lies inside the potential's allowed region".into(),
            ));
        }
        let diag = active
            .clone()
            .map(|i| 2.0 * kinetic + potential.value(grid.x(i), config.mass))
            .collect();
        Ok(DiscreteHamiltonian {
            diag,
            off: -kinetic,
            active,
            n_points: grid.n_points,
        })
    }

    /// `Hψ` on the full grid; wall points map to zero.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_points];
        let (lo, hi) = (self.active.start, self.active.end);
        for i in lo..hi {
            let left = if i > lo { psi[i - 1] } else { Complex64::default() };
            let right = if i + 1 < hi { psi[i + 1] } else { Complex64::default() };
            out[i] = psi[i] * self.diag[i - lo] + (left + right) * self.off;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    pub time: f64,
}

impl WaveFunction {
    pub fn new(grid: GridSpec, values: Vec<Complex64>, time: f64) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.n_points {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} grid points",
                values.len(),
                grid.n_points
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::param("values", "non-finite amplitude"));
        }
        Ok(WaveFunction { grid, values, time })
    }

    pub fn from_fn(grid: GridSpec, time: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        grid.validate()?;
        let values = (0..grid.n_points).map(|i| f(grid.x(i))).collect();
        WaveFunction::new(grid, values, time)
    }

    pub fn zeros(grid: GridSpec) -> Result<Self> {
        WaveFunction::new(grid, vec![Complex64::default(); grid.n_points], 0.0)
    }

    /// Normalized Gaussian packet `exp(−(x−x₀)²/4σ² + i k₀ x)`, so that
    /// `⟨p⟩ = ħk₀` and the position spread is `σ`.
    pub fn gaussian(grid: GridSpec, center: f64, sigma: f64, k0: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive"));
        }
        let mut psi = WaveFunction::from_fn(grid, 0.0, |x| {
            let u = x - center;
            Complex64::from_polar((-u * u / (4.0 * sigma * sigma)).exp(), k0 * x)
        })?;
        psi.normalize()?;
        Ok(psi)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ wᵢ |ψᵢ|² dx` with trapezoid weights.
    pub fn norm_sq(&self) -> f64 {
        let dx = self.grid.dx();
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.weight(i) * v.norm_sqr())
            .sum::<f64>()
            * dx
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sq().sqrt();
        if !(norm > 0.0) {
            return Err(Error::param("values", "cannot normalize the zero field"));
        }
        for v in &mut self.values {
            *v /= norm;
        }
        Ok(())
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sq() - 1.0).abs() <= NORMALIZATION_TOL
    }

    /// Writes `step,t,x,re,im` rows (no header) for this snapshot.
    pub fn write_csv_rows<W: Write>(&self, step: usize, out: &mut W) -> io::Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            write_row(
                out,
                &[
                    step.to_string(),
                    fmt_f64(self.time),
                    fmt_f64(self.grid.x(i)),
                    fmt_f64(v.re),
                    fmt_f64(v.im),
                ],
            )?;
        }
        Ok(())
    }
}

pub const SNAPSHOT_COLUMNS: [&str; 5] = ["step", "t", "x", "re", "im"];

/// Writes a snapshot series in the `step,t,x,re,im` schema.
pub fn write_snapshots_csv<'a, W: Write>(
    out: &mut W,
    snapshots: impl IntoIterator<Item = (usize, &'a WaveFunction)>,
) -> io::Result<()> {
    write_header(out, &SNAPSHOT_COLUMNS)?;
    for (step, psi) in snapshots {
        psi.write_csv_rows(step, out)?;
    }
    Ok(())
}

/// `⟨a|b⟩ = Σ wᵢ conj(aᵢ) bᵢ dx` with trapezoid weights.
pub fn inner_product(a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
    if a.grid != b.grid || a.len() != b.len() {
        return Err(Error::GridMismatch);
    }
    Ok(weighted_dot(&a.grid, &a.values, &b.values))
}

fn weighted_dot(grid: &GridSpec, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| x.conj() * y * grid.weight(i))
        .sum::<Complex64>()
        * grid.dx()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    Hamiltonian(PotentialSpec),
    Position,
    Momentum,
}

/// Result of [`expectation_value`]. A Hermitian observable has a real
/// expectation value; a large `imaginary_residue` means the grid does not
/// resolve the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub imaginary_residue: f64,
}

impl Expectation {
    pub fn is_resolved(&self) -> bool {
        self.imaginary_residue.abs() <= HERMITIAN_RESIDUE_TOL
    }
}

/// `⟨ψ|A|ψ⟩` for one of the supported observables.
///
/// The Hamiltonian uses the 3-point Laplacian with hard walls, the momentum
/// `−iħ` times the central difference with zero ghost values.
pub fn expectation_value(psi: &WaveFunction, observable: &Observable, config: &SystemConfig) -> Result<Expectation> {
    if psi.grid != config.grid {
        return Err(Error::GridMismatch);
    }
    let norm_sq = psi.norm_sq();
    if (norm_sq - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { norm_sq });
    }
    let grid = &psi.grid;
    let applied: Vec<Complex64> = match observable {
        Observable::Hamiltonian(potential) => DiscreteHamiltonian::new(potential, config)?.apply(&psi.values),
        Observable::Position => psi.values.iter().enumerate().map(|(i, v)| v * grid.x(i)).collect(),
        Observable::Momentum => {
            let n = psi.len();
            let scale = Complex64::new(0.0, -config.hbar / (2.0 * grid.dx()));
            (0..n)
                .map(|i| {
                    let right = if i + 1 < n {
                        psi.values[i + 1]
                    } else {
                        Complex64::default()
                    };
                    let left = if i > 0 { psi.values[i - 1] } else { Complex64::default() };
                    (right - left) * scale
                })
                .collect()
        }
    };
    let z = weighted_dot(grid, &psi.values, &applied);
    Ok(Expectation {
        value: z.re,
        imaginary_residue: z.im,
    })
}

/// Pointwise `ca·a + cb·b`, optionally renormalized.
pub fn superpose(
    a: &WaveFunction,
    ca: Complex64,
    b: &WaveFunction,
    cb: Complex64,
    renormalize: bool,
) -> Result<WaveFunction> {
    if a.grid != b.grid || a.len() != b.len() {
        return Err(Error::GridMismatch);
    }
    let values = a.values.iter().zip(&b.values).map(|(x, y)| ca * x + cb * y).collect();
    let mut out = WaveFunction {
        grid: a.grid,
        values,
        time: a.time,
    };
    if renormalize {
        out.normalize()?;
    }
    Ok(out)
}
