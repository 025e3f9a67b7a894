//! Experiment dispatch. Each experiment renders its outputs in memory; the
//! caller writes them only after every computation succeeded.

use qlab::classical::{hj_residual, integrate_hamilton, ActionField, ClassicalState};
use qlab::csv::{fmt_f64, write_header, write_row};
use qlab::epr_bell::{chsh_statistic, compare_predictions, write_comparison_csv};
use qlab::evolution::{eigen_residual, propagate, solve_stationary, write_series_csv, PropagationPlan, Snapshot};
use qlab::madelung::{align_phase_in_time, decompose, madelung_residuals, MadelungFields};
use qlab::polarization::{angle_grid, extrema_curve};
use qlab::state::{expectation_value, Observable};
use qlab::{PotentialSpec, SystemConfig, WaveFunction};
use serde_json::json;

use crate::config::{
    BellParams, ClassicalCompareParams, EigenParams, EvolveParams, Experiment, ExperimentConfig, MadelungParams,
    PacketSpec, ThreePolarizerParams,
};

/// A named output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Rendered outputs of one experiment and a one-line result summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub headline: String,
}

type Rows = Vec<u8>;

fn artifact(name: &str, bytes: Vec<u8>) -> Artifact {
    Artifact {
        name: name.to_owned(),
        bytes,
    }
}

fn json_artifact(name: &str, value: &serde_json::Value) -> Artifact {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    artifact(name, text.into_bytes())
}

/// Largest finite `|v|`.
fn max_finite_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().filter(|x| x.is_finite()).fold(0.0, |m, x| m.max(x.abs()))
}

pub fn execute(config: &ExperimentConfig) -> qlab::Result<Outcome> {
    match &config.experiment {
        Experiment::Evolve(p) => evolve(p),
        Experiment::Eigen(p) => eigen(p),
        Experiment::Madelung(p) => madelung(p),
        Experiment::ClassicalCompare(p) => classical_compare(p),
        Experiment::ThreePolarizer(p) => three_polarizer(p),
        Experiment::Bell(p) => bell(p, config.seed),
    }
}

fn packet(spec: &PacketSpec, system: &SystemConfig) -> qlab::Result<WaveFunction> {
    WaveFunction::gaussian(system.grid, spec.center, spec.sigma, spec.k0)
}

fn moments(psi: &WaveFunction, potential: &PotentialSpec, system: &SystemConfig) -> qlab::Result<[f64; 3]> {
    let e = |o: Observable| expectation_value(psi, &o, system).map(|x| x.value);
    Ok([
        e(Observable::Hamiltonian(*potential))?,
        e(Observable::Position)?,
        e(Observable::Momentum)?,
    ])
}

fn evolve(p: &EvolveParams) -> qlab::Result<Outcome> {
    let psi = packet(&p.packet, &p.system)?;
    let plan = PropagationPlan::new(p.dt, p.n_steps, p.record_every);
    let series = propagate(&psi, &p.potential, &p.system, &plan)?;

    let mut states = Rows::new();
    write_series_csv(&mut states, &series).expect("in-memory write");

    let mut obs = Rows::new();
    write_header(&mut obs, &["step", "t", "norm", "energy", "x_mean", "p_mean"]).expect("in-memory write");
    let e0 = moments(&psi, &p.potential, &p.system)?[0];
    let mut drift = 0.0f64;
    let mut norm_drift = 0.0f64;
    for s in &series {
        let [e, x, k] = moments(&s.state, &p.potential, &p.system)?;
        let norm = s.state.norm_sq();
        drift = drift.max((e - e0).abs());
        norm_drift = norm_drift.max((norm - 1.0).abs());
        let row = [
            s.step.to_string(),
            fmt_f64(s.state.time),
            fmt_f64(norm),
            fmt_f64(e),
            fmt_f64(x),
            fmt_f64(k),
        ];
        write_row(&mut obs, &row).expect("in-memory write");
    }
    Ok(Outcome {
        artifacts: vec![artifact("evolve.csv", states), artifact("observables.csv", obs)],
        headline: format!("max |norm - 1| = {norm_drift:.3e}, max |<H> - <H>_0| = {drift:.3e}"),
    })
}

fn eigen(p: &EigenParams) -> qlab::Result<Outcome> {
    let pairs = solve_stationary(&p.potential, &p.system, p.n_states)?;

    let mut values = Rows::new();
    write_header(&mut values, &["index", "energy", "residual"]).expect("in-memory write");
    for pair in &pairs {
        let res = eigen_residual(pair, &p.potential, &p.system)?;
        write_row(
            &mut values,
            &[pair.index.to_string(), fmt_f64(pair.energy), fmt_f64(res)],
        )
        .expect("in-memory write");
    }

    let mut states = Rows::new();
    let names: Vec<String> = std::iter::once("x".to_owned())
        .chain(pairs.iter().map(|pr| format!("psi_{}", pr.index)))
        .collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    write_header(&mut states, &names).expect("in-memory write");
    for i in 0..p.system.grid.n_points {
        let row: Vec<String> = std::iter::once(fmt_f64(p.system.grid.x(i)))
            .chain(pairs.iter().map(|pr| fmt_f64(pr.state.values[i].re)))
            .collect();
        write_row(&mut states, &row).expect("in-memory write");
    }
    let listing: Vec<String> = pairs.iter().map(|pr| format!("{:.6}", pr.energy)).collect();
    Ok(Outcome {
        artifacts: vec![artifact("eigenvalues.csv", values), artifact("eigenstates.csv", states)],
        headline: format!("E = [{}]", listing.join(", ")),
    })
}

/// Decomposes the snapshots at steps `centre − 1, centre, centre + 1` and
/// aligns their phases in time.
fn decomposed_triplet(
    psi: &WaveFunction,
    potential: &PotentialSpec,
    system: &SystemConfig,
    dt: f64,
    centre: usize,
    node_fraction: f64,
) -> qlab::Result<Vec<MadelungFields>> {
    let series = propagate(psi, potential, system, &PropagationPlan::new(dt, centre + 1, 1))?;
    triplet_from(&series[centre - 1..=centre + 1], system, node_fraction)
}

fn triplet_from(snaps: &[Snapshot], system: &SystemConfig, node_fraction: f64) -> qlab::Result<Vec<MadelungFields>> {
    let mut fields = snaps
        .iter()
        .map(|s| {
            let max = s.state.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            decompose(&s.state, system, (node_fraction * max).max(f64::MIN_POSITIVE))
        })
        .collect::<qlab::Result<Vec<_>>>()?;
    align_phase_in_time(&mut fields);
    Ok(fields)
}

fn madelung(p: &MadelungParams) -> qlab::Result<Outcome> {
    let psi = packet(&p.packet, &p.system)?;
    let fields = decomposed_triplet(&psi, &p.potential, &p.system, p.dt, p.n_steps, p.node_fraction)?;
    let res = madelung_residuals(&fields, &p.potential, &p.system)?;
    let now = &fields[1];

    let mut decomposition = Rows::new();
    now.write_csv(&mut decomposition).expect("in-memory write");

    let mut residuals = Rows::new();
    write_header(&mut residuals, &["x", "r6", "r7"]).expect("in-memory write");
    for i in 0..p.system.grid.n_points {
        let row = [fmt_f64(p.system.grid.x(i)), fmt_f64(res.r6[i]), fmt_f64(res.r7[i])];
        write_row(&mut residuals, &row).expect("in-memory write");
    }

    let (r6, r7) = res.max_abs(|_| true);
    let summary = json!({
        "time": res.time,
        "max_abs_r6": r6,
        "max_abs_r7": r7,
        "masked_points": now.node_mask.iter().filter(|m| **m).count(),
    });
    Ok(Outcome {
        artifacts: vec![
            artifact("madelung.csv", decomposition),
            artifact("residuals.csv", residuals),
            json_artifact("summary.json", &summary),
        ],
        headline: format!("t = {:.6}, max |r6| = {r6:.3e}, max |r7| = {r7:.3e}", res.time),
    })
}

fn classical_compare(p: &ClassicalCompareParams) -> qlab::Result<Outcome> {
    let psi = packet(&p.packet, &p.system)?;
    let series = propagate(&psi, &p.potential, &p.system, &PropagationPlan::new(p.dt, p.n_steps, 1))?;
    let [_, x0, p0] = moments(&psi, &p.potential, &p.system)?;
    let start = ClassicalState { x: x0, p: p0, t: 0.0 };
    let traj = integrate_hamilton(start, &p.potential, &p.system, p.dt, p.n_steps)?;

    let mut trajectory = Rows::new();
    traj.write_csv(&mut trajectory, &p.potential, &p.system)
        .expect("in-memory write");

    let mut comparison = Rows::new();
    write_header(
        &mut comparison,
        &["t", "x_classical", "p_classical", "x_quantum", "p_quantum"],
    )
    .expect("in-memory write");
    let mut max_dx = 0.0f64;
    for (c, s) in traj.samples.iter().zip(&series) {
        let [_, xq, pq] = moments(&s.state, &p.potential, &p.system)?;
        max_dx = max_dx.max((c.x - xq).abs());
        let row = [fmt_f64(c.t), fmt_f64(c.x), fmt_f64(c.p), fmt_f64(xq), fmt_f64(pq)];
        write_row(&mut comparison, &row).expect("in-memory write");
    }

    let n = series.len();
    let fields = triplet_from(&series[n - 3..], &p.system, qlab::madelung::DEFAULT_NODE_FRACTION)?;
    let hj = hj_residual(&ActionField::from_phases(&fields)?, &p.potential, &p.system)?;
    let v_q = &fields[1].v_q;
    let mut hj_rows = Rows::new();
    write_header(&mut hj_rows, &["x", "hj_residual", "minus_v_q"]).expect("in-memory write");
    for i in 0..p.system.grid.n_points {
        let row = [fmt_f64(p.system.grid.x(i)), fmt_f64(hj[i]), fmt_f64(-v_q[i])];
        write_row(&mut hj_rows, &row).expect("in-memory write");
    }
    let hj_deviation = max_finite_abs(hj.iter().zip(v_q).map(|(h, v)| h + v));

    let summary = json!({
        "final_time": traj.samples.last().map(|s| s.t),
        "max_abs_x_difference": max_dx,
        "classical_energy_drift": traj.max_relative_energy_drift(&p.potential, &p.system),
        "max_abs_hj_plus_v_q": hj_deviation,
    });
    Ok(Outcome {
        artifacts: vec![
            artifact("trajectory.csv", trajectory),
            artifact("comparison.csv", comparison),
            artifact("hj.csv", hj_rows),
            json_artifact("summary.json", &summary),
        ],
        headline: format!("max |x_cl - <x>| = {max_dx:.3e}, max |hj + V_q| = {hj_deviation:.3e}"),
    })
}

fn three_polarizer(p: &ThreePolarizerParams) -> qlab::Result<Outcome> {
    let [start, stop, step] = p.alpha_sweep;
    let alphas = angle_grid(start, stop, step)?;
    let curve = extrema_curve(&alphas, &p.model, p.beta_step)?;
    let mut rows = Rows::new();
    curve.write_csv(&mut rows).expect("in-memory write");
    let worst = curve.points.iter().map(|pt| pt.probability).fold(0.0, f64::max);
    Ok(Outcome {
        artifacts: vec![artifact("three_polarizer.csv", rows)],
        headline: format!("{} alpha rows, max p_min = {worst:.3e}", curve.points.len()),
    })
}

fn bell(p: &BellParams, seed: u64) -> qlab::Result<Outcome> {
    let [a, a_prime, b, b_prime] = p.angles;
    let chsh = chsh_statistic(a, a_prime, b, b_prime, &p.model, p.n_pairs, seed)?;
    let mut json = chsh.to_json();
    json.push('\n');

    let deltas = angle_grid(0.0, 180.0, p.delta_step)?;
    let rows = compare_predictions(&deltas, &p.table_model, Some((p.n_pairs, seed)))?;
    let mut table = Rows::new();
    write_comparison_csv(&mut table, &rows).expect("in-memory write");
    Ok(Outcome {
        artifacts: vec![
            artifact("chsh.json", json.into_bytes()),
            artifact("coincidences.csv", table),
        ],
        headline: format!(
            "S = {:.4} +/- {:.1e} ({})",
            chsh.s_value,
            chsh.standard_error,
            chsh.model.id()
        ),
    })
}
