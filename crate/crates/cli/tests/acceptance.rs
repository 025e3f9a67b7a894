//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::{PI, SQRT_2};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use qlab::classical::{hj_residual, ActionField};
use qlab::epr_bell::{chsh_statistic, lhv_coincidence_mc, AnalyzerPair, CorrelationModel, LhvModel};
use qlab::evolution::{propagate, solve_stationary, CrankNicolson, PropagationPlan};
use qlab::madelung::{align_phase_in_time, decompose, default_node_threshold, madelung_residuals, MadelungFields};
use qlab::polarization::{angle_grid, scan_min_beta, three_polarizer_probability, TransmissionModel};
use qlab::state::{expectation_value, Observable};
use qlab::{Complex64, GridSpec, PotentialSpec, SystemConfig, WaveFunction};
use qlab_cli::{RunManifest, OUT_DIR_ENV};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn natural(x_min: f64, x_max: f64, n_points: usize) -> SystemConfig {
    SystemConfig::natural(GridSpec::new(x_min, x_max, n_points).unwrap())
}

fn energy(psi: &WaveFunction, v: &PotentialSpec, sys: &SystemConfig) -> f64 {
    expectation_value(psi, &Observable::Hamiltonian(*v), sys).unwrap().value
}

fn unitarity_and_energy() -> Verdict {
    let sys = natural(-40.0, 40.0, 2048);
    let free = PotentialSpec::Free;
    let psi0 = WaveFunction::gaussian(sys.grid, -5.0, 1.0, 2.0).unwrap();
    let e0 = energy(&psi0, &free, &sys);

    let start = Instant::now();
    let stepper = CrankNicolson::new(&free, &sys, 0.005).unwrap();
    let mut psi = psi0;
    let mut states = Vec::with_capacity(1000);
    for _ in 0..1000 {
        psi = stepper.step(&psi).unwrap();
        states.push(psi.norm_sq());
    }
    let elapsed = start.elapsed().as_secs_f64();

    let norm_dev = states.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    let e_dev = (energy(&psi, &free, &sys) - e0).abs() / e0.abs();
    verdict(
        norm_dev <= 1e-8 && e_dev <= 1e-6 && elapsed < 5.0,
        format!(
            "max|norm-1| = {norm_dev:.2e} (<= 1e-8), rel |dH| = {e_dev:.2e} (<= 1e-6), \
             1000 steps at n=2048 in {elapsed:.2} s (< 5 s)"
        ),
    )
}

fn spectra() -> Verdict {
    let ho = PotentialSpec::HarmonicOscillator { omega: 1.0 };
    let pairs = solve_stationary(&ho, &natural(-10.0, 10.0, 2000), 6).unwrap();
    let ho_err = pairs
        .iter()
        .map(|p| (p.energy - (p.index as f64 + 0.5)).abs() / (p.index as f64 + 0.5))
        .fold(0.0, f64::max);

    let well = PotentialSpec::InfiniteWell { width: 1.0 };
    let e1 = solve_stationary(&well, &natural(0.0, 1.0, 2000), 1).unwrap()[0].energy;
    let well_err = (e1 - PI * PI / 2.0).abs() / (PI * PI / 2.0);
    verdict(
        ho_err <= 1e-3 && well_err <= 1e-3,
        format!("oscillator n<=5 max rel err = {ho_err:.2e}, well E1 rel err = {well_err:.2e} (<= 1e-3)"),
    )
}

fn fields_of(psi: &WaveFunction, sys: &SystemConfig) -> MadelungFields {
    decompose(psi, sys, default_node_threshold(psi)).unwrap()
}

fn quantum_potential_identities() -> Verdict {
    let sys = natural(-10.0, 10.0, 2001);
    let mut plane = WaveFunction::from_fn(sys.grid, 0.0, |x| Complex64::from_polar(1.0, 3.0 * x)).unwrap();
    plane.normalize().unwrap();
    let f = fields_of(&plane, &sys);
    let vq_plane = f.valid_indices().map(|i| f.v_q[i].abs()).fold(0.0, f64::max);

    let mut worst = 0.0f64;
    let mut cases = Vec::new();
    let ho = PotentialSpec::HarmonicOscillator { omega: 1.0 };
    cases.push((ho, natural(-10.0, 10.0, 2000)));
    let well = PotentialSpec::InfiniteWell { width: 1.0 };
    cases.push((well, natural(0.0, 1.0, 2000)));
    for (v, sys) in &cases {
        for pair in solve_stationary(v, sys, 6).unwrap() {
            let f = fields_of(&pair.state, sys);
            let dev = f
                .valid_indices()
                .map(|i| (v.value(sys.grid.x(i), sys.mass) + f.v_q[i] - pair.energy).abs())
                .fold(0.0, f64::max);
            worst = worst.max(dev / pair.energy.abs());
        }
    }
    verdict(
        vq_plane <= 1e-6 && worst <= 5e-3,
        format!(
            "plane wave max|V_q| = {vq_plane:.2e} (<= 1e-6), bound states max|V+V_q-E|/|E| = {worst:.2e} (<= 5e-3)"
        ),
    )
}

/// Free packet on [-20, 20] decomposed at steps `m-1, m, m+1` with
/// `t = m·dt = 1`.
fn packet_triplet(n_points: usize, dt: f64) -> (SystemConfig, Vec<MadelungFields>) {
    let sys = natural(-20.0, 20.0, n_points);
    let psi = WaveFunction::gaussian(sys.grid, -2.0, 1.0, 1.0).unwrap();
    let m = (1.0 / dt).round() as usize;
    let series = propagate(&psi, &PotentialSpec::Free, &sys, &PropagationPlan::new(dt, m + 1, 1)).unwrap();
    let fields = series[m - 1..=m + 1]
        .iter()
        .map(|s| fields_of(&s.state, &sys))
        .collect();
    (sys, fields)
}

fn residual_order() -> Verdict {
    let levels = [(801, 0.01), (1601, 0.005), (3201, 0.0025)];
    let maxima: Vec<(f64, f64)> = levels
        .iter()
        .map(|&(n, dt)| {
            let (sys, fields) = packet_triplet(n, dt);
            madelung_residuals(&fields, &PotentialSpec::Free, &sys)
                .unwrap()
                .max_abs(|_| true)
        })
        .collect();
    let mut orders = Vec::new();
    for w in maxima.windows(2) {
        orders.push(((w[0].0 / w[1].0).log2(), (w[0].1 / w[1].1).log2()));
    }
    let min_order = orders.iter().map(|o| o.0.min(o.1)).fold(f64::INFINITY, f64::min);
    let listing: Vec<String> = maxima.iter().map(|(a, b)| format!("({a:.2e}, {b:.2e})")).collect();
    let ord: Vec<String> = orders.iter().map(|(a, b)| format!("({a:.2}, {b:.2})")).collect();
    verdict(
        min_order >= 1.8,
        format!(
            "max(|r6|, |r7|) at n=801/1601/3201: {}; orders {} (>= 1.8)",
            listing.join(" "),
            ord.join(" ")
        ),
    )
}

fn hamilton_jacobi_identity() -> Verdict {
    let (sys, mut fields) = packet_triplet(3201, 0.0025);
    align_phase_in_time(&mut fields);
    let hj = hj_residual(&ActionField::from_phases(&fields).unwrap(), &PotentialSpec::Free, &sys).unwrap();
    let v_q = &fields[1].v_q;
    let dev = hj
        .iter()
        .zip(v_q)
        .map(|(h, v)| h + v)
        .filter(|d| d.is_finite())
        .fold(0.0, |m: f64, d| m.max(d.abs()));
    verdict(
        dev <= 5e-3,
        format!("max|hj_residual + V_q| = {dev:.2e} at n=3201 (<= 5e-3)"),
    )
}

fn three_polarizer() -> Verdict {
    let grid = angle_grid(0.0, 179.0, 1.0).unwrap();
    let direct = |a: f64, b: f64| {
        let c1 = a.to_radians().cos();
        let c2 = (a - b).to_radians().cos();
        c1 * c1 * c2 * c2
    };
    let mut formula_err = 0.0f64;
    for &a in &grid {
        for &b in &grid {
            formula_err = formula_err.max((three_polarizer_probability(a, b) - direct(a, b)).abs());
        }
    }
    let (mut beta_err, mut p_max) = (0.0f64, 0.0f64);
    for &a in &grid {
        let (beta, p) = scan_min_beta(a, &grid, &TransmissionModel::Quantum).unwrap();
        let d = (beta - (a + 90.0)).rem_euclid(180.0);
        beta_err = beta_err.max(d.min(180.0 - d).abs());
        p_max = p_max.max(p);
    }
    let ulps = 4.0 * f64::EPSILON;
    verdict(
        formula_err <= ulps && beta_err <= 1e-3 && p_max <= 1e-9,
        format!(
            "formula max err = {formula_err:.1e} (<= {ulps:.1e}), max|beta* - (alpha+90)| = {beta_err:.1e} deg \
             (<= 1e-3), max p_min = {p_max:.1e} (<= 1e-9)"
        ),
    )
}

/// `(1/π)∫₀^π cos²(δ − λ) cos²λ dλ` by the midpoint rule.
fn lhv_quadrature(delta_deg: f64) -> f64 {
    let n = 20_000;
    let d = delta_deg.to_radians();
    (0..n)
        .map(|k| {
            let l = PI * (k as f64 + 0.5) / n as f64;
            (d - l).cos().powi(2) * l.cos().powi(2)
        })
        .sum::<f64>()
        / n as f64
}

fn bell_chsh() -> Verdict {
    let qm = chsh_statistic(0.0, 45.0, 22.5, 67.5, &CorrelationModel::Quantum, 0, 0).unwrap();
    let s_exact = 2.0 * SQRT_2;
    let qm_err = (qm.s_value - s_exact).abs();

    let model = LhvModel::MalusStochastic;
    let n = 1_000_000;
    let mut worst_z = 0.0f64;
    for delta in angle_grid(0.0, 180.0, 5.0).unwrap() {
        let stats = lhv_coincidence_mc(AnalyzerPair::new(delta, 0.0), &model, n, 20_240_611).unwrap();
        let p = lhv_quadrature(delta);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        worst_z = worst_z.max((stats.p11 - p).abs() / sigma);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lhv = CorrelationModel::Lhv { model };
    let mut worst_excess = f64::NEG_INFINITY;
    let mut max_s = 0.0f64;
    for k in 0..100u64 {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..180.0));
        let r = chsh_statistic(q[0], q[1], q[2], q[3], &lhv, 100_000, 1000 + k).unwrap();
        worst_excess = worst_excess.max(r.s_value - (2.0 + 3.0 * r.standard_error));
        max_s = max_s.max(r.s_value);
    }
    verdict(
        qm_err <= 4.0 * f64::EPSILON * s_exact && worst_z <= 3.0 && worst_excess <= 0.0,
        format!(
            "|S_qm - 2*sqrt2| = {qm_err:.1e}; MC 1e6 pairs max |p - (2+cos 2d)/8|/sigma = {worst_z:.2} (<= 3) \
             on 37 deltas; max S over 100 quadruples = {max_s:.3} (<= 2 + 3 sigma)"
        ),
    )
}

fn run_twice(name: &str, args: &[&str], root: &Path) -> Result<(), String> {
    let mut manifests = Vec::new();
    for rep in ["a", "b"] {
        let out = root.join(format!("{name}-{rep}"));
        let status = Command::new(env!("CARGO_BIN_EXE_qlab"))
            .args(args)
            .arg("--out")
            .arg(&out)
            .env_remove(OUT_DIR_ENV)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("{name}: {}", String::from_utf8_lossy(&status.stderr).trim()));
        }
        let m = RunManifest::read(&out).map_err(|e| e.to_string())?;
        if !m.verify(&out).is_empty() {
            return Err(format!("{name}: checksum mismatch"));
        }
        manifests.push((out, m));
    }
    let (a, b) = (&manifests[0], &manifests[1]);
    if a.1.files != b.1.files {
        return Err(format!("{name}: manifests list different payloads"));
    }
    for f in &a.1.files {
        if fs::read(a.0.join(&f.path)).ok() != fs::read(b.0.join(&f.path)).ok() {
            return Err(format!("{name}: {} differs", f.path));
        }
    }
    Ok(())
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let runs: [(&str, &[&str]); 7] = [
        ("evolve", &["run", "evolve", "--seed", "3"]),
        ("eigen", &["run", "eigen", "--seed", "3"]),
        ("madelung", &["run", "madelung", "--seed", "3"]),
        ("classical_compare", &["run", "classical_compare", "--seed", "3"]),
        ("three_polarizer", &["run", "three_polarizer", "--seed", "3"]),
        ("bell_qm", &["run", "bell", "--seed", "3"]),
        ("bell_malus", &["run", "bell", "--model", "malus", "--seed", "3"]),
    ];
    let failures: Vec<String> = runs
        .iter()
        .filter_map(|(name, args)| run_twice(name, args, tmp.path()).err())
        .collect();
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{} experiment runs repeated with identical seeds gave byte-identical payloads",
                runs.len()
            )
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let suite = Instant::now();
    let criteria: [Criterion; 8] = [
        ("unitarity and energy", unitarity_and_energy),
        ("spectra", spectra),
        ("quantum-potential identities", quantum_potential_identities),
        ("Madelung residual order", residual_order),
        ("Hamilton-Jacobi cross-module identity", hamilton_jacobi_identity),
        ("three-polarizer", three_polarizer),
        ("Bell/CHSH", bell_chsh),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let mut v = check();
        if k == 6 {
            let total = suite.elapsed().as_secs_f64();
            v.pass &= total < 60.0;
            v.detail.push_str(&format!("; suite time so far {total:.1} s (< 60 s)"));
        }
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} [{}] {name}: {} [{:.2} s]",
            k + 1,
            v.detail,
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        suite.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
