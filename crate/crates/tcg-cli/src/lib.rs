//! Command implementations for the `tcg` binary.
//!
//! Every command is a pure function of a [`RunConfig`] plus its own
//! arguments, returning the full output as a string; identical
//! configurations produce byte-identical output. The binary is a thin
//! argument-parsing shell around these functions.

use anyhow::{Context, Result};
use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;
use tcg_core::circuit::{
    self, comparator_circuit, depth_and_counts, ghz_circuit, ghz_target, simulate, truth_table,
    truth_table_noisy, w_circuit, w_target, Circuit, Scheme, COMPARATOR_BASELINE,
};
use tcg_core::noise::{decoherence_comparison, recovered_population, DeviceConfig, NoiseModel};
use tcg_core::qudit::state_fidelity;
use tcg_core::reference::verification_report;
use tcg_core::tomography::{
    cu_qubit_template, feedback_calibrate, qpt_with, qst, qubit_projection, truth_table_fidelity,
    ChiMatrix,
};

/// Options shared by every subcommand. Flags override the device-config
/// file, which overrides the built-in device table.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub shots: Option<u64>,
    pub noise: bool,
    pub device_config: Option<String>,
    pub scheme: Scheme,
    pub expand_composites: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            shots: None,
            noise: false,
            device_config: None,
            scheme: Scheme::Cu,
            expand_composites: false,
        }
    }
}

pub fn parse_scheme(s: &str) -> Result<Scheme> {
    match s {
        "cz" => Ok(Scheme::Cz),
        "cu" => Ok(Scheme::Cu),
        "spcu" => Ok(Scheme::Spcu),
        "tcg" => Ok(Scheme::Tcg),
        other => anyhow::bail!("unknown scheme '{other}' (expected cz, cu, spcu, or tcg)"),
    }
}

/// Output of a command: the report body plus whether all checks passed
/// (commands that have nothing to check always pass).
pub struct CommandOutput {
    pub body: String,
    pub ok: bool,
}

fn device_config(cfg: &RunConfig) -> Result<DeviceConfig> {
    match &cfg.device_config {
        None => Ok(DeviceConfig::builtin()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading device config {path}"))?;
            DeviceConfig::from_toml(&text).map_err(|e| anyhow::anyhow!("{path}: {e}"))
        }
    }
}

fn noise_model(cfg: &RunConfig, m: usize) -> Result<Option<NoiseModel>> {
    if !cfg.noise {
        return Ok(None);
    }
    let dev = device_config(cfg)?;
    let model = NoiseModel::from_device(&dev, m, true, true, false)
        .map_err(|e| anyhow::anyhow!("building noise model: {e}"))?;
    Ok(Some(model))
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Complex matrix as JSON-ready rows/cols plus row-major [re, im] pairs.
#[derive(Serialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_complex(m: &Array2<Complex64>) -> MatrixJson {
        let (r, c) = m.dim();
        MatrixJson {
            rows: r,
            cols: c,
            data: m.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct VerifyEntryJson {
    name: String,
    residual: f64,
    tolerance: f64,
    passed: bool,
}

#[derive(Serialize)]
struct VerifyReportJson {
    convention_flipped: bool,
    entries: Vec<VerifyEntryJson>,
    all_passed: bool,
}

/// Recompose every gate family and compare against its closed form.
/// `flip_convention` swaps the pulse convention as a negative control and
/// must make the report fail.
pub fn cmd_verify(flip_convention: bool) -> Result<CommandOutput> {
    let entries: Vec<VerifyEntryJson> = verification_report(flip_convention)
        .into_iter()
        .map(|e| VerifyEntryJson {
            passed: e.passed(),
            name: e.name,
            residual: e.residual,
            tolerance: e.tolerance,
        })
        .collect();
    let all_passed = entries.iter().all(|e| e.passed);
    let report = VerifyReportJson {
        convention_flipped: flip_convention,
        entries,
        all_passed,
    };
    Ok(CommandOutput {
        body: serde_json::to_string_pretty(&report)? + "\n",
        ok: all_passed,
    })
}

// ---------------------------------------------------------------------------
// depth-table
// ---------------------------------------------------------------------------

fn prep_circuit(family: &str, m: usize, param: f64, scheme: Scheme) -> Result<Circuit> {
    match family {
        "ghz" => Ok(ghz_circuit(m, param, scheme)),
        "w" => Ok(w_circuit(m, param, scheme)),
        other => anyhow::bail!("unknown family '{other}' (expected ghz or w)"),
    }
}

/// Gate counts and circuit depth for the entangled-state preparation
/// families under each gate scheme, plus the four-qudit comparator.
pub fn cmd_depth_table(cfg: &RunConfig, m_min: usize, m_max: usize) -> Result<CommandOutput> {
    anyhow::ensure!(m_min >= 3 && m_max >= m_min, "need 3 <= m_min <= m_max");
    let mut body = String::new();
    body.push_str("# gate counts and scheduled depth of preparation circuits\n");
    body.push_str("# family: ghz (tau=0) or w (lambda=1); scheme: gate set used\n");
    body.push_str(
        "# n1q/n2q: single- and two-qudit gate counts; depth: earliest-start moment count\n",
    );
    body.push_str("# ratio_vs_cz: depth divided by the cz-scheme depth at the same point\n");
    body.push_str("family,m,scheme,n1q,n2q,depth,ratio_vs_cz\n");
    for family in ["ghz", "w"] {
        for m in m_min..=m_max {
            let param = if family == "ghz" { 0.0 } else { 1.0 };
            let cz = depth_and_counts(
                &prep_circuit(family, m, param, Scheme::Cz)?,
                cfg.expand_composites,
            );
            for scheme in [Scheme::Cz, Scheme::Cu, Scheme::Spcu] {
                let name = match scheme {
                    Scheme::Cz => "cz",
                    Scheme::Cu => "cu",
                    Scheme::Spcu => "spcu",
                    Scheme::Tcg => "tcg",
                };
                let c = prep_circuit(family, m, param, scheme)?;
                let k = depth_and_counts(&c, cfg.expand_composites);
                let _ = writeln!(
                    body,
                    "{family},{m},{name},{},{},{},{}",
                    k.n1q,
                    k.n2q,
                    k.depth,
                    fmt(k.depth as f64 / cz.depth as f64)
                );
            }
        }
    }
    let comp = depth_and_counts(&comparator_circuit(), cfg.expand_composites);
    let base = COMPARATOR_BASELINE;
    let _ = writeln!(
        body,
        "comparator,4,tcg,{},{},{},{}",
        comp.n1q,
        comp.n2q,
        comp.depth,
        fmt(comp.depth as f64 / base.depth as f64)
    );
    let _ = writeln!(
        body,
        "comparator,4,cz,{},{},{},1",
        base.n1q, base.n2q, base.depth
    );
    Ok(CommandOutput { body, ok: true })
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

fn derived_seed(seed: u64, salt: u64) -> u64 {
    seed.wrapping_add(salt + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn prepare_point(
    cfg: &RunConfig,
    family: &str,
    m: usize,
    param: f64,
    point: u64,
) -> Result<(f64, Option<(f64, f64, usize)>)> {
    let c = prep_circuit(family, m, param, cfg.scheme)?;
    let target = match family {
        "ghz" => ghz_target(m, param),
        _ => w_target(param),
    };
    let model = noise_model(cfg, m)?;
    let rho = simulate(&c, None, model.as_ref());
    let target_cmp = if rho.space == target.space {
        target.clone()
    } else {
        circuit::lift_state(&target, &rho.space)
    };
    let exact = state_fidelity(&rho, &target_cmp).map_err(|e| anyhow::anyhow!("{e}"))?;
    let sampled = match cfg.shots {
        Some(shots) if m <= 4 => {
            const REPS: usize = 20;
            let target_qubit = qubit_projection(&target);
            let mut fids = Vec::with_capacity(REPS);
            for r in 0..REPS {
                let est = qst(
                    &rho,
                    Some(shots),
                    derived_seed(cfg.seed, point * 1000 + r as u64),
                );
                let f = state_fidelity(&est.rho, &target_qubit)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                fids.push(f);
            }
            let n = fids.len() as f64;
            let mean = fids.iter().sum::<f64>() / n;
            let var = fids.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (n - 1.0);
            Some((mean, var.sqrt(), REPS))
        }
        _ => None,
    };
    Ok((exact, sampled))
}

/// Prepare a GHZ or W state under the configured scheme and noise setting
/// and report fidelity to the ideal target; with `sweep_points`, sweep the
/// family parameter (tau for GHZ, lambda for W). When shots are set and the
/// register has at most 4 sites, each point additionally reports the mean
/// and standard deviation of 20 independent state-tomography estimates.
pub fn cmd_prepare(
    cfg: &RunConfig,
    family: &str,
    m: usize,
    param: f64,
    sweep_points: Option<usize>,
) -> Result<CommandOutput> {
    anyhow::ensure!(m >= 3, "preparation families need m >= 3");
    if family == "w" {
        anyhow::ensure!(m == 3 || sweep_points.is_none(), "w sweep is three-site");
    }
    let mut body = String::new();
    body.push_str("# entangled-state preparation fidelity\n");
    body.push_str("# param: tau (ghz branch phase) or lambda (w amplitude ratio)\n");
    body.push_str("# fidelity: overlap of the simulated state with the ideal target\n");
    body.push_str(
        "# qst_mean/qst_sd/qst_reps: sampled state-tomography fidelity statistics (empty without shots)\n",
    );
    body.push_str("family,m,scheme,param,fidelity,qst_mean,qst_sd,qst_reps\n");
    let scheme_name = match cfg.scheme {
        Scheme::Cz => "cz",
        Scheme::Cu => "cu",
        Scheme::Spcu => "spcu",
        Scheme::Tcg => "tcg",
    };
    let params: Vec<f64> = match sweep_points {
        None => vec![param],
        Some(n) => {
            anyhow::ensure!(n >= 2, "sweep needs at least 2 points");
            let hi = if family == "ghz" { 2.0 * PI } else { 2f64.sqrt() };
            (0..n).map(|k| k as f64 * hi / (n - 1) as f64).collect()
        }
    };
    for (pi, &p) in params.iter().enumerate() {
        let (exact, sampled) = prepare_point(cfg, family, m, p, pi as u64)?;
        let (qm, qs, qr) = match sampled {
            None => (String::new(), String::new(), String::new()),
            Some((mean, sd, reps)) => (fmt(mean), fmt(sd), reps.to_string()),
        };
        let _ = writeln!(
            body,
            "{family},{m},{scheme_name},{},{},{qm},{qs},{qr}",
            fmt(p),
            fmt(exact)
        );
    }
    Ok(CommandOutput { body, ok: true })
}

// ---------------------------------------------------------------------------
// comparator
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ComparatorReport {
    counts: CountsJson,
    baseline: CountsJson,
    two_qudit_reduction: f64,
    depth_reduction: f64,
    shots: Option<u64>,
    noise: bool,
    truth_table_fidelity: f64,
    ideal_table: Vec<Vec<f64>>,
    measured_table: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct CountsJson {
    n1q: usize,
    n2q: usize,
    depth: usize,
}

/// Simulate the four-qudit comparator, compare its truth table against the
/// ideal one, and report gate-count reductions versus the cz-decomposed
/// baseline.
pub fn cmd_comparator(cfg: &RunConfig) -> Result<CommandOutput> {
    let c = comparator_circuit();
    let counts = depth_and_counts(&c, cfg.expand_composites);
    let base = COMPARATOR_BASELINE;
    let ideal = truth_table(&c, None, cfg.seed);
    let model = noise_model(cfg, c.qudits.len())?;
    let measured = match &model {
        Some(nm) => truth_table_noisy(&c, nm, cfg.shots, cfg.seed),
        None => truth_table(&c, cfg.shots, cfg.seed),
    };
    let fid = truth_table_fidelity(&measured, &ideal);
    let to_rows = |t: &Array2<f64>| -> Vec<Vec<f64>> {
        t.outer_iter().map(|r| r.to_vec()).collect()
    };
    let report = ComparatorReport {
        counts: CountsJson {
            n1q: counts.n1q,
            n2q: counts.n2q,
            depth: counts.depth,
        },
        baseline: CountsJson {
            n1q: base.n1q,
            n2q: base.n2q,
            depth: base.depth,
        },
        two_qudit_reduction: 1.0 - counts.n2q as f64 / base.n2q as f64,
        depth_reduction: 1.0 - counts.depth as f64 / base.depth as f64,
        shots: cfg.shots,
        noise: cfg.noise,
        truth_table_fidelity: fid,
        ideal_table: to_rows(&ideal),
        measured_table: to_rows(&measured),
    };
    Ok(CommandOutput {
        body: serde_json::to_string_pretty(&report)? + "\n",
        ok: fid >= 0.99,
    })
}

// ---------------------------------------------------------------------------
// qpt
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct QptReport {
    theta: f64,
    phi: f64,
    shots: Option<u64>,
    noise: bool,
    process_fidelity: f64,
    chi: MatrixJson,
}

/// Process tomography of the conditional rotation at (theta, phi); reports
/// the chi matrix and its fidelity against the analytic chi of the ideal
/// gate.
pub fn cmd_qpt(cfg: &RunConfig, theta: f64, phi: f64) -> Result<CommandOutput> {
    let mut c = Circuit::new_qutrits(2, Scheme::Cu);
    c.push2(
        "cu",
        0,
        1,
        &[
            ("theta", circuit::ParamValue::Num(theta)),
            ("phi", circuit::ParamValue::Num(phi)),
        ],
    );
    let model = noise_model(cfg, 2)?;
    let chi = qpt_with(
        |psi| simulate(&c, Some(psi), model.as_ref()),
        &c.space(),
        cfg.shots,
        cfg.seed,
    );
    let target = ChiMatrix::of_qubit_unitary(&cu_qubit_template(theta, phi));
    let fid = chi.fidelity(&target);
    let report = QptReport {
        theta,
        phi,
        shots: cfg.shots,
        noise: cfg.noise,
        process_fidelity: fid,
        chi: MatrixJson::from_complex(&chi.matrix),
    };
    Ok(CommandOutput {
        body: serde_json::to_string_pretty(&report)? + "\n",
        ok: true,
    })
}

// ---------------------------------------------------------------------------
// feedback
// ---------------------------------------------------------------------------

/// Closed-loop calibration of the conditional rotation: repeatedly run
/// process tomography of the gate with a hidden control offset and correct
/// the applied parameters until the process fidelity crosses the threshold.
pub fn cmd_feedback(
    cfg: &RunConfig,
    theta: f64,
    phi: f64,
    dtheta: f64,
    dphi: f64,
    max_iter: usize,
    threshold: f64,
) -> Result<CommandOutput> {
    let model = noise_model(cfg, 2)?;
    let state = feedback_calibrate(
        theta,
        phi,
        dtheta,
        dphi,
        cfg.shots,
        cfg.seed,
        max_iter,
        threshold,
        model.as_ref(),
    );
    let mut body = String::new();
    body.push_str("# closed-loop conditional-rotation calibration\n");
    let _ = writeln!(
        body,
        "# target theta={} phi={}; hidden offsets dtheta={} dphi={}",
        fmt(theta),
        fmt(phi),
        fmt(dtheta),
        fmt(dphi)
    );
    body.push_str("# process_fidelity: tomography estimate against the ideal gate per iteration\n");
    body.push_str("iteration,process_fidelity\n");
    for (i, f) in state.fidelity_history.iter().enumerate() {
        let _ = writeln!(body, "{},{}", i + 1, fmt(*f));
    }
    let _ = writeln!(
        body,
        "# converged={} iterations={} applied_theta={} applied_phi={} estimated_theta={} estimated_phi={}",
        state.converged,
        state.iterations,
        fmt(state.applied_theta),
        fmt(state.applied_phi),
        fmt(state.theta_hat),
        fmt(state.phi_hat)
    );
    Ok(CommandOutput {
        body,
        ok: state.converged,
    })
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

/// Population scans of the conditional rotation: `rotation` sweeps theta on
/// |11>, `phase` sweeps the pulse phase after a half rotation, `echo` the
/// same with a refocusing pulse (doubled phase sensitivity).
pub fn cmd_scan(cfg: &RunConfig, kind: &str, points: usize, phi0: f64) -> Result<CommandOutput> {
    anyhow::ensure!(points >= 2, "scan needs at least 2 points");
    let _ = cfg;
    let grid: Vec<f64> = (0..points)
        .map(|k| k as f64 * 2.0 * PI / (points - 1) as f64)
        .collect();
    let mut body = String::new();
    match kind {
        "rotation" => {
            body.push_str("# conditional-rotation angle scan on input |11>\n");
            body.push_str("# expected: p10 = sin^2(theta/2), p11 = cos^2(theta/2)\n");
            body.push_str("theta,p10,p11,expected_p10\n");
            for (th, p10, p11) in circuit::rotation_scan(&grid) {
                let _ = writeln!(
                    body,
                    "{},{},{},{}",
                    fmt(th),
                    fmt(p10),
                    fmt(p11),
                    fmt((th / 2.0).sin().powi(2))
                );
            }
        }
        "phase" => {
            body.push_str("# pulse-phase scan after a half rotation on |1+>\n");
            body.push_str("# expected: p = cos^2(phi + phi0)\n");
            body.push_str("phi,p,expected\n");
            for (ph, p) in circuit::phase_scan(&grid, phi0) {
                let _ = writeln!(body, "{},{},{}", fmt(ph), fmt(p), fmt((ph + phi0).cos().powi(2)));
            }
        }
        "echo" => {
            body.push_str("# pulse-phase scan with a refocusing pulse (doubled sensitivity)\n");
            body.push_str("# expected: p = cos^2(2(phi + phi0))\n");
            body.push_str("phi,p,expected\n");
            for (ph, p) in circuit::echo_phase_scan(&grid, phi0) {
                let _ = writeln!(
                    body,
                    "{},{},{}",
                    fmt(ph),
                    fmt(p),
                    fmt((2.0 * (ph + phi0)).cos().powi(2))
                );
            }
        }
        other => anyhow::bail!("unknown scan '{other}' (expected rotation, phase, or echo)"),
    }
    Ok(CommandOutput { body, ok: true })
}

// ---------------------------------------------------------------------------
// decohere
// ---------------------------------------------------------------------------

/// Recovered-population comparison of identity-composing CZ, conditional-
/// rotation, and CZ-decomposed conditional-NOT sequences: uniform
/// relaxation and dephasing scans plus the configured device parameters.
pub fn cmd_decohere(cfg: &RunConfig) -> Result<CommandOutput> {
    let t1_grid = [2.0, 5.0, 10.0, 20.0, 50.0];
    let tphi_grid = [1.0, 2.0, 5.0, 10.0, 20.0];
    let mut body = String::new();
    body.push_str("# recovered population of identity-composing two-qudit sequences\n");
    body.push_str("# scan t1: pure relaxation on |11>; scan tphi: pure dephasing on |1+>\n");
    body.push_str("# device rows: full device noise model (decoherence and leakage)\n");
    body.push_str("scan,t1_us,tphi_us,recovered_cz,recovered_cu,recovered_cnot\n");
    for row in decoherence_comparison(&t1_grid, &tphi_grid) {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{}",
            row.scan,
            fmt(row.t1_us),
            fmt(row.tphi_us),
            fmt(row.recovered_cz),
            fmt(row.recovered_cu),
            fmt(row.recovered_cnot)
        );
    }
    let dev = device_config(cfg)?;
    let model = NoiseModel::from_device(&dev, 2, true, true, false)
        .map_err(|e| anyhow::anyhow!("building device noise model: {e}"))?;
    let (seq_cz, seq_cu, seq_cnot) = tcg_core::noise::comparison_sequences();
    let (psi_t1, psi_tphi) = tcg_core::noise::comparison_initial_states();
    for (name, psi) in [("device_11", &psi_t1), ("device_1plus", &psi_tphi)] {
        let _ = writeln!(
            body,
            "{name},,,{},{},{}",
            fmt(recovered_population(&seq_cz, psi, &model)),
            fmt(recovered_population(&seq_cu, psi, &model)),
            fmt(recovered_population(&seq_cnot, psi, &model))
        );
    }
    Ok(CommandOutput { body, ok: true })
}

// ---------------------------------------------------------------------------
// circuit round-trip helper used by the binary for --expand-composites
// ---------------------------------------------------------------------------

/// Load a circuit from JSON, optionally expand composites, and re-serialize.
pub fn roundtrip_circuit(json: &str, expand: bool) -> Result<String> {
    let c = Circuit::from_json(json).context("parsing circuit JSON")?;
    c.validate(true).map_err(|e| anyhow::anyhow!("{e}"))?;
    let out = if expand {
        circuit::expand_composites(&c)
    } else {
        c
    };
    Ok(out.to_json())
}
