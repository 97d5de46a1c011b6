//! Circuit representation, ASAP scheduling, depth/gate-count accounting,
//! library circuits (GHZ, W, comparator, Ramsey-style scans) and execution.

use crate::composer;
use crate::gates::{self, Excursion, RotationConvention};
use crate::linalg::{cis, cr, C64};
use crate::noise::NoiseModel;
use crate::qudit::{
    embed, HilbertSpace, Operator, QuditError, StateVector,
};
use crate::qudit::DensityMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    Str(String),
    List(Vec<f64>),
}

impl ParamValue {
    pub fn as_num(&self) -> f64 {
        match self {
            ParamValue::Num(x) => *x,
            _ => panic!("parameter is not a number"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateInstance {
    pub gate: String,
    pub params: BTreeMap<String, ParamValue>,
    pub sites: Vec<usize>,
}

impl GateInstance {
    pub fn num(&self, key: &str) -> f64 {
        self.params
            .get(key)
            .unwrap_or_else(|| panic!("missing parameter {key} on gate {}", self.gate))
            .as_num()
    }
    pub fn num_or(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).map(|p| p.as_num()).unwrap_or(default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuditDecl {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Cz,
    Cu,
    Spcu,
    Tcg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub qudits: Vec<QuditDecl>,
    pub topology: Vec<(usize, usize)>,
    pub ops: Vec<GateInstance>,
    pub scheme: Scheme,
}

fn chain_topology(m: usize) -> Vec<(usize, usize)> {
    (0..m.saturating_sub(1)).map(|i| (i, i + 1)).collect()
}

impl Circuit {
    pub fn new_qutrits(m: usize, scheme: Scheme) -> Self {
        Circuit {
            qudits: (0..m)
                .map(|i| QuditDecl {
                    name: format!("q{i}"),
                    dim: 3,
                })
                .collect(),
            topology: chain_topology(m),
            ops: Vec::new(),
            scheme,
        }
    }

    pub fn site_count(&self) -> usize {
        self.qudits.len()
    }

    pub fn space(&self) -> HilbertSpace {
        HilbertSpace::new(self.qudits.iter().map(|q| q.dim).collect())
    }

    pub fn push1(&mut self, gate: &str, site: usize, params: &[(&str, ParamValue)]) {
        self.ops.push(GateInstance {
            gate: gate.to_string(),
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            sites: vec![site],
        });
    }

    pub fn push2(&mut self, gate: &str, a: usize, b: usize, params: &[(&str, ParamValue)]) {
        self.ops.push(GateInstance {
            gate: gate.to_string(),
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            sites: vec![a, b],
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialization")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Check that all op sites exist and (optionally) that two-qudit ops lie
    /// on declared topology edges.
    pub fn validate(&self, enforce_topology: bool) -> Result<(), QuditError> {
        let m = self.site_count();
        for op in &self.ops {
            for &s in &op.sites {
                if s >= m {
                    return Err(QuditError::BadSite(s));
                }
            }
            if enforce_topology && op.sites.len() == 2 {
                let (a, b) = (op.sites[0], op.sites[1]);
                let on_edge = self
                    .topology
                    .iter()
                    .any(|&(x, y)| (x, y) == (a, b) || (y, x) == (a, b));
                if !on_edge {
                    return Err(QuditError::Invariant(format!(
                        "two-qudit op {} on ({a},{b}) violates topology",
                        op.gate
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateClass {
    Single,
    CzLike,
    CuComposite,
    SpcuComposite,
}

pub fn classify(gate: &str) -> GateClass {
    match gate {
        "x01" | "x12" | "z" | "su2" => GateClass::Single,
        "cz" | "sqrt_cz" | "cp" => GateClass::CzLike,
        "spcu" => GateClass::SpcuComposite,
        "cu" | "ctrl_x01" | "ctrl_x12" | "ctrl_cycle" => GateClass::CuComposite,
        other => panic!("unknown gate {other}"),
    }
}

pub fn duration_ns(class: GateClass) -> f64 {
    match class {
        GateClass::Single => gates::DUR_1Q_NS,
        GateClass::CzLike => gates::DUR_CZ_NS,
        GateClass::CuComposite => gates::DUR_CU_NS,
        GateClass::SpcuComposite => gates::DUR_SPCU_NS,
    }
}

fn excursion_of(op: &GateInstance) -> Excursion {
    match op.params.get("excursion") {
        Some(ParamValue::Str(s)) if s == "second" => Excursion::Second,
        _ => Excursion::First,
    }
}

/// Resolve a gate instance into an operator over its own sites' dims.
pub fn resolve_gate(op: &GateInstance, dims: &[usize]) -> Operator {
    let base: Operator = match op.gate.as_str() {
        "x01" => gates::x01(op.num("theta"), op.num_or("phi", 0.0), RotationConvention::MinusI),
        "x12" => gates::x12(op.num("theta"), op.num_or("phi", 0.0), RotationConvention::MinusI),
        "z" => {
            let phases = match op.params.get("phases") {
                Some(ParamValue::List(v)) => v.clone(),
                _ => panic!("z gate needs a phases list"),
            };
            gates::z_phases(&phases)
        }
        "su2" => gates::su2(
            op.num_or("alpha", 0.0),
            op.num("b"),
            op.num("g"),
            op.num("d"),
        ),
        "cp" => gates::cp(op.num("theta"), op.num_or("phi_q", 0.0), excursion_of(op)),
        "sqrt_cz" => gates::sqrt_cz(excursion_of(op)),
        "cz" => gates::cz(),
        "cu" => composer::cu(op.num("theta"), op.num_or("phi", 0.0)).operator,
        "spcu" => composer::spcu(op.num("theta"), op.num_or("phi", 0.0)).operator,
        "ctrl_x01" | "ctrl_x12" | "ctrl_cycle" => controlled_block(op),
        other => panic!("unknown gate {other}"),
    };
    lift_levels(&base, dims)
}

/// Controlled single-qutrit block: applies the target pulse only when the
/// control sits at level `cv` (sites order: [control, target]).
fn controlled_block(op: &GateInstance) -> Operator {
    let cv = op.num_or("cv", 1.0) as usize;
    let v = match op.gate.as_str() {
        "ctrl_x01" => gates::x01(op.num_or("theta", PI), op.num_or("phi", 0.0), RotationConvention::MinusI),
        "ctrl_x12" => gates::x12(op.num_or("theta", PI), op.num_or("phi", 0.0), RotationConvention::MinusI),
        "ctrl_cycle" => {
            let a = gates::x01(PI, 0.0, RotationConvention::MinusI);
            let b = gates::x12(PI, 0.0, RotationConvention::MinusI);
            a.then(&b)
        }
        _ => unreachable!(),
    };
    let mut m = Array2::zeros((9, 9));
    for k in 0..3usize {
        if k == cv {
            for i in 0..3 {
                for j in 0..3 {
                    m[[k * 3 + i, k * 3 + j]] = v.matrix[[i, j]];
                }
            }
        } else {
            for i in 0..3 {
                m[[k * 3 + i, k * 3 + i]] = cr(1.0);
            }
        }
    }
    Operator::new(HilbertSpace::qutrits(2), m)
}

/// Lift an operator to larger per-site dims (identity on the added levels).
pub fn lift_levels(op: &Operator, dims: &[usize]) -> Operator {
    let old_dims = op.space.dims().to_vec();
    assert_eq!(old_dims.len(), dims.len());
    if old_dims == dims {
        return op.clone();
    }
    let space = HilbertSpace::new(dims.to_vec());
    let n = space.total_dim();
    let old_space = op.space.clone();
    let mut m: Array2<C64> = Array2::zeros((n, n));
    for col in 0..n {
        let lc = space.labels_of(col);
        let in_range = lc.iter().zip(old_dims.iter()).all(|(&l, &d)| l < d);
        if !in_range {
            m[[col, col]] = cr(1.0);
            continue;
        }
        let old_col = old_space.index_of(&lc);
        for row in 0..n {
            let lr = space.labels_of(row);
            if !lr.iter().zip(old_dims.iter()).all(|(&l, &d)| l < d) {
                continue;
            }
            let v = op.matrix[[old_space.index_of(&lr), old_col]];
            if v != cr(0.0) {
                m[[row, col]] = v;
            }
        }
    }
    Operator::new(space, m)
}

#[derive(Debug, Clone)]
pub struct Schedule {
    /// Indices into the circuit's op list, grouped into moments with
    /// disjoint site support (ASAP).
    pub moments: Vec<Vec<usize>>,
    pub moment_duration_ns: Vec<f64>,
}

pub fn schedule(c: &Circuit) -> Schedule {
    let m = c.site_count();
    let mut avail = vec![0usize; m];
    let mut moments: Vec<Vec<usize>> = Vec::new();
    for (k, op) in c.ops.iter().enumerate() {
        let t = op.sites.iter().map(|&s| avail[s]).max().unwrap_or(0);
        if t >= moments.len() {
            moments.resize(t + 1, Vec::new());
        }
        moments[t].push(k);
        for &s in &op.sites {
            avail[s] = t + 1;
        }
    }
    let moment_duration_ns = moments
        .iter()
        .map(|ids| {
            ids.iter()
                .map(|&k| duration_ns(classify(&c.ops[k].gate)))
                .fold(0.0, f64::max)
        })
        .collect();
    Schedule {
        moments,
        moment_duration_ns,
    }
}

/// Replace composite conditional rotations by their component pulses.
pub fn expand_composites(c: &Circuit) -> Circuit {
    let mut out = c.clone();
    out.ops = Vec::new();
    for op in &c.ops {
        match op.gate.as_str() {
            "cu" => {
                let (a, b) = (op.sites[0], op.sites[1]);
                out.push2("sqrt_cz", a, b, &[]);
                out.push1(
                    "x12",
                    a,
                    &[
                        ("theta", ParamValue::Num(op.num("theta"))),
                        ("phi", ParamValue::Num(op.num_or("phi", 0.0))),
                    ],
                );
                out.push2("sqrt_cz", a, b, &[]);
            }
            "spcu" => {
                let (a, b) = (op.sites[0], op.sites[1]);
                out.push1(
                    "x12",
                    a,
                    &[
                        ("theta", ParamValue::Num(op.num("theta"))),
                        ("phi", ParamValue::Num(op.num_or("phi", 0.0))),
                    ],
                );
                out.push2("sqrt_cz", a, b, &[]);
            }
            _ => out.ops.push(op.clone()),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub n1q: usize,
    pub n2q: usize,
    pub depth: usize,
}

pub fn depth_and_counts(c: &Circuit, expand: bool) -> Counts {
    let circ = if expand { expand_composites(c) } else { c.clone() };
    let sched = schedule(&circ);
    let n1q = circ.ops.iter().filter(|o| o.sites.len() == 1).count();
    let n2q = circ.ops.iter().filter(|o| o.sites.len() == 2).count();
    Counts {
        n1q,
        n2q,
        depth: sched.moments.len(),
    }
}

/// Noiseless pure-state propagation.
pub fn simulate_state(c: &Circuit, initial: &StateVector) -> StateVector {
    let space = c.space();
    assert_eq!(space, initial.space, "initial state space mismatch");
    let mut psi = initial.clone();
    for op in &c.ops {
        let dims: Vec<usize> = op.sites.iter().map(|&s| space.dims()[s]).collect();
        let g = resolve_gate(op, &dims);
        let full = embed(&g, &op.sites, &space).expect("embed scheduled gate");
        psi = full.apply(&psi);
    }
    psi
}

/// Full simulation. Without noise this is pure propagation promoted to a
/// density matrix. With noise, gates apply per ASAP moment; each moment is
/// followed by per-qudit decoherence for the moment duration, and each gate
/// deposits its per-gate leakage on the qudits it touches. When leakage is
/// enabled the simulation runs with a fourth |3> level per site, so the
/// returned density matrix lives in the lifted space.
pub fn simulate(
    c: &Circuit,
    initial: Option<&StateVector>,
    noise: Option<&NoiseModel>,
) -> DensityMatrix {
    let base_space = c.space();
    let default_init = StateVector::ground(base_space.clone());
    let init = initial.unwrap_or(&default_init);
    assert_eq!(init.space, base_space);

    let Some(model) = noise else {
        return simulate_state(c, init).to_density();
    };

    let with_leak = model.leakage;
    let sim_dims: Vec<usize> = base_space
        .dims()
        .iter()
        .map(|&d| if with_leak && d == 3 { 4 } else { d })
        .collect();
    let sim_space = HilbertSpace::new(sim_dims.clone());
    let psi0 = lift_state(init, &sim_space);
    let mut rho = psi0.to_density();

    let sched = schedule(c);
    for (mi, ids) in sched.moments.iter().enumerate() {
        for &k in ids {
            let op = &c.ops[k];
            let dims3: Vec<usize> = op.sites.iter().map(|&s| base_space.dims()[s]).collect();
            let g3 = resolve_gate(op, &dims3);
            let dims_sim: Vec<usize> = op.sites.iter().map(|&s| sim_space.dims()[s]).collect();
            let g = lift_levels(&g3, &dims_sim);
            let full = embed(&g, &op.sites, &sim_space).expect("embed scheduled gate");
            rho = DensityMatrix {
                space: sim_space.clone(),
                matrix: full
                    .matrix
                    .dot(&rho.matrix)
                    .dot(&crate::linalg::dagger(&full.matrix)),
            };
            if with_leak {
                apply_gate_leak(&mut rho, op, model);
            }
        }
        if model.decoherence {
            let dt = sched.moment_duration_ns[mi];
            let two_qudit_moment = ids.iter().any(|&k| c.ops[k].sites.len() >= 2);
            for s in 0..sim_space.site_count() {
                model.apply_decoherence_site(&mut rho, s, dt, two_qudit_moment);
            }
        }
    }
    rho
}

fn apply_gate_leak(rho: &mut DensityMatrix, op: &GateInstance, model: &NoiseModel) {
    match classify(&op.gate) {
        GateClass::Single => {
            let ell = model.leak_1q;
            model.apply_leak_site(rho, op.sites[0], ell);
        }
        GateClass::CzLike => {
            for &s in &op.sites {
                model.apply_leak_site(rho, s, model.leak_cz);
            }
        }
        GateClass::CuComposite | GateClass::SpcuComposite => {
            let theta = op.num_or("theta", PI);
            let scale = (theta / PI) * (theta / PI);
            model.apply_leak_site(rho, op.sites[0], model.leak_cu * scale);
            if op.sites.len() > 1 {
                model.apply_leak_site(rho, op.sites[1], model.leak_cz);
            }
        }
    }
}

/// Lift a state into a space with extra per-site levels (same labels).
pub fn lift_state(psi: &StateVector, target: &HilbertSpace) -> StateVector {
    if &psi.space == target {
        return psi.clone();
    }
    let mut amps = ndarray::Array1::zeros(target.total_dim());
    for (i, z) in psi.amps.iter().enumerate() {
        if *z == cr(0.0) {
            continue;
        }
        let labels = psi.space.labels_of(i);
        amps[target.index_of(&labels)] = *z;
    }
    StateVector {
        space: target.clone(),
        amps,
    }
}

// ---------------------------------------------------------------------------
// Library circuits
// ---------------------------------------------------------------------------

/// GHZ-family preparation (|0..0> + e^{i tau} |1..1>)/sqrt(2) on m qutrits.
pub fn ghz_circuit(m: usize, tau: f64, scheme: Scheme) -> Circuit {
    assert!(m >= 3, "GHZ family needs at least 3 qudits");
    let mut c = Circuit::new_qutrits(m, scheme);
    // Opening superposition pulse; the phase absorbs tau and the branch
    // phases accumulated by the m-1 conditional pulses.
    let phi0 = tau + PI / 2.0 - (m as f64 - 1.0) * PI;
    c.push1(
        "x01",
        0,
        &[
            ("theta", ParamValue::Num(PI / 2.0)),
            ("phi", ParamValue::Num(phi0)),
        ],
    );
    for i in 0..(m - 1) {
        match scheme {
            Scheme::Cu | Scheme::Tcg => c.push2(
                "cu",
                i,
                i + 1,
                &[("theta", ParamValue::Num(PI)), ("phi", ParamValue::Num(0.0))],
            ),
            Scheme::Spcu => c.push2(
                "spcu",
                i,
                i + 1,
                &[("theta", ParamValue::Num(PI)), ("phi", ParamValue::Num(0.0))],
            ),
            Scheme::Cz => {
                c.push1(
                    "x01",
                    i + 1,
                    &[
                        ("theta", ParamValue::Num(PI / 2.0)),
                        ("phi", ParamValue::Num(PI / 2.0)),
                    ],
                );
                c.push2("cz", i, i + 1, &[]);
                c.push1(
                    "x01",
                    i + 1,
                    &[
                        ("theta", ParamValue::Num(PI / 2.0)),
                        ("phi", ParamValue::Num(-PI / 2.0)),
                    ],
                );
            }
        }
    }
    c
}

pub fn ghz_target(m: usize, tau: f64) -> StateVector {
    let space = HilbertSpace::qutrits(m);
    let mut amps = ndarray::Array1::zeros(space.total_dim());
    amps[0] = cr(1.0 / 2f64.sqrt());
    amps[space.index_of(&vec![1; m])] = cis(tau) * cr(1.0 / 2f64.sqrt());
    StateVector {
        space,
        amps,
    }
}

/// W-family target on 3 qutrits: (|001> + lambda |010> + sqrt(2-lambda^2)|100>)/sqrt(3).
pub fn w_target(lambda: f64) -> StateVector {
    assert!((0.0..=2f64.sqrt() + 1e-12).contains(&lambda));
    let space = HilbertSpace::qutrits(3);
    let mut amps = ndarray::Array1::zeros(space.total_dim());
    let w3 = (2.0 - lambda * lambda).max(0.0).sqrt();
    amps[space.index_of(&[0, 0, 1])] = cr(1.0 / 3f64.sqrt());
    amps[space.index_of(&[0, 1, 0])] = cr(lambda / 3f64.sqrt());
    amps[space.index_of(&[1, 0, 0])] = cr(w3 / 3f64.sqrt());
    StateVector { space, amps }
}

fn w_angles(lambda: f64) -> (f64, f64) {
    let lam2 = lambda * lambda;
    let theta1 = 2.0 * ((1.0 + lam2) / 3.0).sqrt().acos();
    let theta2 = 2.0 * (lambda / (1.0 + lam2).sqrt()).acos();
    (theta1, theta2)
}

/// W-family preparation circuit. Exact for m = 3 (any lambda); for m > 3 the
/// same serial pattern extends the chain for count accounting.
pub fn w_circuit(m: usize, lambda: f64, scheme: Scheme) -> Circuit {
    assert!(m >= 3);
    assert!((0.0..=2f64.sqrt() + 1e-12).contains(&lambda), "lambda out of range");
    match scheme {
        Scheme::Cz => w_circuit_cz(m, lambda),
        _ => w_circuit_cu(m, lambda, scheme),
    }
}

fn w_circuit_cu(m: usize, lambda: f64, scheme: Scheme) -> Circuit {
    let (theta1, theta2) = w_angles(lambda);
    let mut c = Circuit::new_qutrits(m, scheme);
    let spcu = scheme == Scheme::Spcu;
    // conditional rotations whose |11> input is empty can use the short-path
    // composite; on the active branch it matches the full composite exactly
    let cond = |c: &mut Circuit, a: usize, b: usize, th: f64, ph: f64, short_ok: bool| {
        if spcu && short_ok {
            c.push2(
                "spcu",
                a,
                b,
                &[
                    ("theta", ParamValue::Num(th)),
                    ("phi", ParamValue::Num(ph)),
                ],
            );
        } else {
            c.push2(
                "cu",
                a,
                b,
                &[("theta", ParamValue::Num(th)), ("phi", ParamValue::Num(ph))],
            );
        }
    };
    c.push1("x01", 0, &[("theta", ParamValue::Num(theta1)), ("phi", ParamValue::Num(0.0))]);
    cond(&mut c, 0, 1, PI, PI / 2.0, true);
    c.push1(
        "x01",
        1,
        &[("theta", ParamValue::Num(PI)), ("phi", ParamValue::Num(PI / 2.0))],
    );
    for k in 2..m {
        cond(&mut c, k - 1, k, theta2, 0.0, true);
    }
    for k in (2..m).rev() {
        // the back-sweep sees population on the |11> input: full composite
        cond(&mut c, k, k - 1, PI, 0.0, false);
    }
    c
}

/// CZ-scheme W circuit: each conditional rotation is decomposed into CZ
/// pulses plus single-qudit layers; phase bookkeeping is merged into
/// neighboring singles so the single-qudit count stays at 5m-6.
fn w_circuit_cz(m: usize, lambda: f64) -> Circuit {
    let (theta1, theta2) = w_angles(lambda);
    let mut c = Circuit::new_qutrits(m, Scheme::Cz);

    let push_su2 = |c: &mut Circuit, site: usize, u: &Array2<C64>| {
        let (alpha, b, g, d) = gates::zyz(u);
        c.push1(
            "su2",
            site,
            &[
                ("alpha", ParamValue::Num(alpha)),
                ("b", ParamValue::Num(b)),
                ("d", ParamValue::Num(d)),
                ("g", ParamValue::Num(g)),
            ],
        );
    };

    // 2x2 building blocks
    let rz = |a: f64| gates::su2_matrix(0.0, a, 0.0, 0.0);
    let ry = |a: f64| gates::su2_matrix(0.0, 0.0, a, 0.0);
    // pi-rotation conditional: pre/post singles on the target around one CZ
    let pre_pi = |ph: f64| ry(PI / 2.0).dot(&rz(-ph));
    let post_pi = |ph: f64| rz(ph).dot(&ry(-PI / 2.0));
    // generic-angle conditional (target block [[c,-s],[-s,-c]]): ZYZ split of
    // the special-unitary part; the determinant phase goes on the control.
    let (cv_a, cv_b, cv_c, cv_alpha) = {
        let cth = (theta2 / 2.0).cos();
        let sth = (theta2 / 2.0).sin();
        let mut v: Array2<C64> = Array2::zeros((2, 2));
        v[[0, 0]] = cr(cth);
        v[[0, 1]] = cr(-sth);
        v[[1, 0]] = cr(-sth);
        v[[1, 1]] = cr(-cth);
        controlled_v_singles(&v)
    };

    // opening rotation and first conditional-NOT
    c.push1("x01", 0, &[("theta", ParamValue::Num(theta1)), ("phi", ParamValue::Num(0.0))]);
    push_su2(&mut c, 1, &pre_pi(PI / 2.0));
    push_su2(&mut c, 2, &cv_c);
    c.push2("cz", 0, 1, &[]);
    // merged single: conditional-NOT post rotation followed by the X01(pi)
    // pulse of the preparation sequence
    let x01_block = {
        let g = gates::x01(PI, PI / 2.0, RotationConvention::MinusI);
        let mut b: Array2<C64> = Array2::zeros((2, 2));
        for i in 0..2 {
            for j in 0..2 {
                b[[i, j]] = g.matrix[[i, j]];
            }
        }
        b
    };
    push_su2(&mut c, 1, &x01_block.dot(&post_pi(PI / 2.0)));
    // first generic conditional block on (1,2)
    c.push2("cz", 1, 2, &[]);
    push_su2(&mut c, 2, &cv_b);
    c.push1(
        "z",
        1,
        &[("phases", ParamValue::List(vec![0.0, cv_alpha, 0.0]))],
    );
    c.push2("cz", 1, 2, &[]);
    push_su2(&mut c, 2, &cv_a);
    // further generic stages k = 3..m-1 on (k-1, k)
    for k in 3..m {
        push_su2(&mut c, k, &cv_c);
        c.push2("cz", k - 1, k, &[]);
        push_su2(&mut c, k, &cv_b);
        c.push2("cz", k - 1, k, &[]);
        push_su2(&mut c, k, &cv_a);
    }
    // back-sweep conditional-NOTs (k, k-1), k = m-1 .. 2; for k >= 3 the
    // control phase of stage k merges into this pre-rotation on q_{k-1}
    for k in (2..m).rev() {
        let mut pre = pre_pi(0.0);
        if k >= 3 {
            let mut zph: Array2<C64> = Array2::zeros((2, 2));
            zph[[0, 0]] = cr(1.0);
            zph[[1, 1]] = cis(cv_alpha);
            pre = pre.dot(&zph);
        }
        push_su2(&mut c, k - 1, &pre);
        c.push2("cz", k, k - 1, &[]);
        push_su2(&mut c, k - 1, &post_pi(0.0));
    }
    c
}

/// Split a controlled-V (V a 2x2 unitary) into three target singles A, B, C
/// around two CZs plus a level-1 phase alpha on the control:
/// (diag(1,e^{i alpha}) on ctrl) . A . CZ . B . CZ . C == diag(I, V),
/// with A B C = I. Returns (A, B, C, alpha).
fn controlled_v_singles(v: &Array2<C64>) -> (Array2<C64>, Array2<C64>, Array2<C64>, f64) {
    let (alpha, b, g, d) = gates::zyz(v);
    let rz = |a: f64| gates::su2_matrix(0.0, a, 0.0, 0.0);
    let ry = |a: f64| gates::su2_matrix(0.0, 0.0, a, 0.0);
    let h = {
        let s = 1.0 / 2f64.sqrt();
        let mut m: Array2<C64> = Array2::zeros((2, 2));
        m[[0, 0]] = cr(s);
        m[[0, 1]] = cr(s);
        m[[1, 0]] = cr(s);
        m[[1, 1]] = cr(-s);
        m
    };
    let a_m = rz(b).dot(&ry(g / 2.0));
    let b_m = ry(-g / 2.0).dot(&rz(-(d + b) / 2.0));
    let c_m = rz((d - b) / 2.0);
    (a_m.dot(&h), h.dot(&b_m).dot(&h), h.dot(&c_m), alpha)
}

/// Four-qudit comparator: inputs |a>, |b> on the first two qudits, ancillas
/// |00> on the last two; outputs encode the comparison (a AND NOT b, a, b,
/// NOT a AND b). Built from six conditional composite blocks, one echo pulse
/// pair, and six frame-phase corrections so every contract amplitude is
/// exactly +1.
pub fn comparator_circuit() -> Circuit {
    let mut c = Circuit::new_qutrits(4, Scheme::Tcg);
    c.topology = vec![(0, 1), (1, 2), (2, 3), (0, 3)];
    let num = ParamValue::Num;
    c.push2("ctrl_x01", 1, 2, &[("cv", num(1.0)), ("theta", num(PI))]);
    c.push1("z", 2, &[("phases", ParamValue::List(vec![0.0, -PI / 4.0, 0.0]))]);
    c.push2("ctrl_cycle", 1, 0, &[("cv", num(1.0))]);
    c.push1("x12", 2, &[("theta", num(PI)), ("phi", num(0.0))]);
    c.push2("ctrl_x01", 0, 3, &[("cv", num(2.0)), ("theta", num(PI))]);
    c.push1("x12", 2, &[("theta", num(PI)), ("phi", num(0.0))]);
    c.push1(
        "z",
        3,
        &[("phases", ParamValue::List(vec![0.0, 3.0 * PI / 8.0, 0.0]))],
    );
    c.push2("ctrl_x12", 1, 0, &[("cv", num(1.0)), ("theta", num(PI))]);
    c.push1(
        "z",
        3,
        &[("phases", ParamValue::List(vec![0.0, 3.0 * PI / 8.0, 0.0]))],
    );
    c.push2("ctrl_x01", 0, 1, &[("cv", num(1.0)), ("theta", num(PI))]);
    c.push1("z", 1, &[("phases", ParamValue::List(vec![0.0, PI / 8.0, 0.0]))]);
    c.push2("ctrl_x01", 3, 0, &[("cv", num(1.0)), ("theta", num(PI))]);
    c.push1("z", 1, &[("phases", ParamValue::List(vec![0.0, PI / 8.0, 0.0]))]);
    c.push1("z", 0, &[("phases", ParamValue::List(vec![0.0, PI / 4.0, 0.0]))]);
    c
}

/// Reference Clifford-baseline comparator counts (cited constants; no circuit
/// construction exists at this granularity).
pub const COMPARATOR_BASELINE: Counts = Counts {
    n1q: 22,
    n2q: 12,
    depth: 25,
};

// ---------------------------------------------------------------------------
// Scans and truth tables
// ---------------------------------------------------------------------------

/// Population table of a circuit over computational basis inputs: rows are
/// computational outputs, columns inputs. With shots, each column is a
/// seeded multinomial draw (population leaked outside the computational
/// labels is dropped, so sampled columns may sum below 1).
pub fn truth_table(c: &Circuit, shots: Option<u64>, seed: u64) -> Array2<f64> {
    let space = c.space();
    let m = space.site_count();
    let comp = space.computational_indices();
    let k = comp.len();
    let mut table = Array2::zeros((k, k));
    for (col, &input_idx) in comp.iter().enumerate() {
        let labels = space.labels_of(input_idx);
        let psi = StateVector::basis(space.clone(), &labels);
        let out = simulate_state(c, &psi);
        let mut probs: Vec<f64> = comp.iter().map(|&i| out.amps[i].norm_sqr()).collect();
        let leak = 1.0 - probs.iter().sum::<f64>();
        match shots {
            None => {
                for (row, p) in probs.iter().enumerate() {
                    table[[row, col]] = *p;
                }
            }
            Some(n) => {
                probs.push(leak.max(0.0));
                let counts = crate::tomography::sample_counts(
                    &probs,
                    n,
                    seed.wrapping_add(col as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15),
                );
                for row in 0..k {
                    table[[row, col]] = counts[row] as f64 / n as f64;
                }
            }
        }
    }
    let _ = m;
    table
}

/// Truth table under a noise model: same layout as [`truth_table`], but
/// each column is the diagonal of the noisy output density matrix (or a
/// seeded multinomial draw from it).
pub fn truth_table_noisy(
    c: &Circuit,
    noise: &NoiseModel,
    shots: Option<u64>,
    seed: u64,
) -> Array2<f64> {
    let space = c.space();
    let comp = space.computational_indices();
    let k = comp.len();
    let mut table = Array2::zeros((k, k));
    for (col, &input_idx) in comp.iter().enumerate() {
        let labels = space.labels_of(input_idx);
        let psi = StateVector::basis(space.clone(), &labels);
        let rho = simulate(c, Some(&psi), Some(noise));
        let out_comp = rho.space.computational_indices();
        let mut probs: Vec<f64> = out_comp
            .iter()
            .map(|&i| rho.matrix[[i, i]].re.max(0.0))
            .collect();
        let leak = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        match shots {
            None => {
                for (row, p) in probs.iter().enumerate() {
                    table[[row, col]] = *p;
                }
            }
            Some(n) => {
                probs.push(leak);
                let counts = crate::tomography::sample_counts(
                    &probs,
                    n,
                    seed.wrapping_add(col as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15),
                );
                for row in 0..k {
                    table[[row, col]] = counts[row] as f64 / n as f64;
                }
            }
        }
    }
    table
}

/// Rotation scan: conditional rotation applied to |11>, reporting the
/// populations P10 = sin^2(theta/2) and P11 = cos^2(theta/2).
pub fn rotation_scan(theta_grid: &[f64]) -> Vec<(f64, f64, f64)> {
    let space = HilbertSpace::qutrits(2);
    theta_grid
        .iter()
        .map(|&th| {
            let g = composer::cu(th, 0.0);
            let psi = StateVector::basis(space.clone(), &[1, 1]);
            let out = g.operator.apply(&psi);
            (
                th,
                out.amps[space.index_of(&[1, 0])].norm_sqr(),
                out.amps[space.index_of(&[1, 1])].norm_sqr(),
            )
        })
        .collect()
}

/// Ramsey-style phase scan: equatorial preparation on the target of |10>,
/// conditional pi rotation with phase phi(+phi0), equatorial projection.
/// P10 = cos^2(phi + phi0), period pi.
pub fn phase_scan(phi_grid: &[f64], phi0: f64) -> Vec<(f64, f64)> {
    let space = HilbertSpace::qutrits(2);
    let prep = embed(
        &gates::x01(PI / 2.0, 0.0, RotationConvention::MinusI),
        &[1],
        &space,
    )
    .unwrap();
    phi_grid
        .iter()
        .map(|&phi| {
            let g = composer::cu(PI, phi + phi0);
            let psi = StateVector::basis(space.clone(), &[1, 0]);
            let out = prep.apply(&psi);
            let out = g.operator.apply(&out);
            let out = prep.apply(&out);
            (phi, out.amps[space.index_of(&[1, 0])].norm_sqr())
        })
        .collect()
}

/// Echo variant: two conditional pi rotations around an X01 pi echo pulse
/// double the phase sensitivity. P10 = cos^2(2(phi + phi0)), period pi/2.
pub fn echo_phase_scan(phi_grid: &[f64], phi0: f64) -> Vec<(f64, f64)> {
    let space = HilbertSpace::qutrits(2);
    let prep = embed(
        &gates::x01(PI / 2.0, 0.0, RotationConvention::MinusI),
        &[1],
        &space,
    )
    .unwrap();
    let echo = embed(
        &gates::x01(PI, 0.0, RotationConvention::MinusI),
        &[1],
        &space,
    )
    .unwrap();
    phi_grid
        .iter()
        .map(|&phi| {
            let g = composer::cu(PI, phi + phi0);
            let psi = StateVector::basis(space.clone(), &[1, 0]);
            let mut out = prep.apply(&psi);
            out = g.operator.apply(&out);
            out = echo.apply(&out);
            out = g.operator.apply(&out);
            out = prep.apply(&out);
            (phi, out.amps[space.index_of(&[1, 0])].norm_sqr())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::state_fidelity;

    #[test]
    fn json_roundtrip_bit_exact() {
        let c = ghz_circuit(4, 0.3, Scheme::Cu);
        let s1 = c.to_json();
        let c2 = Circuit::from_json(&s1).unwrap();
        let s2 = c2.to_json();
        assert_eq!(s1, s2);
        assert_eq!(c, c2);
        let w = w_circuit(3, 0.7, Scheme::Cz);
        let s1 = w.to_json();
        assert_eq!(s1, Circuit::from_json(&s1).unwrap().to_json());
    }

    #[test]
    fn ghz_prep_exact_all_schemes() {
        for scheme in [Scheme::Cu, Scheme::Spcu, Scheme::Cz] {
            for m in 3..=5 {
                for tau in [0.0, 1.1, PI, 5.0] {
                    let c = ghz_circuit(m, tau, scheme);
                    let out = simulate_state(&c, &StateVector::ground(c.space()));
                    let f = state_fidelity(&out.to_density(), &ghz_target(m, tau)).unwrap();
                    assert!(
                        (f - 1.0).abs() < 1e-10,
                        "scheme {scheme:?} m={m} tau={tau} F={f}"
                    );
                }
            }
        }
    }

    #[test]
    fn w_prep_exact_all_schemes() {
        for scheme in [Scheme::Cu, Scheme::Spcu, Scheme::Cz] {
            for lambda in [0.0, 0.4, 1.0, 1.3, 2f64.sqrt()] {
                let c = w_circuit(3, lambda, scheme);
                let out = simulate_state(&c, &StateVector::ground(c.space()));
                let f = state_fidelity(&out.to_density(), &w_target(lambda)).unwrap();
                assert!(
                    (f - 1.0).abs() < 1e-10,
                    "scheme {scheme:?} lambda={lambda} F={f}"
                );
            }
        }
    }

    #[test]
    fn table_counts_formulas() {
        for m in 3..=10 {
            let cz = depth_and_counts(&ghz_circuit(m, 0.0, Scheme::Cz), false);
            assert_eq!((cz.n1q, cz.n2q, cz.depth), (2 * m - 1, m - 1, 2 * m - 1), "ghz cz m={m}");
            let cu = depth_and_counts(&ghz_circuit(m, 0.0, Scheme::Cu), false);
            assert_eq!((cu.n1q, cu.n2q, cu.depth), (1, m - 1, m), "ghz cu m={m}");
            let wcz = depth_and_counts(&w_circuit(m, 1.0, Scheme::Cz), false);
            assert_eq!(
                (wcz.n1q, wcz.n2q, wcz.depth),
                (5 * m - 6, 3 * m - 5, 6 * m - 9),
                "w cz m={m}"
            );
            let wcu = depth_and_counts(&w_circuit(m, 1.0, Scheme::Cu), false);
            assert_eq!(
                (wcu.n1q, wcu.n2q, wcu.depth),
                (2, 2 * m - 3, 2 * m - 1),
                "w cu m={m}"
            );
        }
    }

    #[test]
    fn comparator_counts() {
        let counts = depth_and_counts(&comparator_circuit(), false);
        assert_eq!((counts.n1q, counts.n2q, counts.depth), (8, 6, 7));
    }

    #[test]
    fn comparator_truth_map() {
        let c = comparator_circuit();
        c.validate(true).unwrap();
        let space = c.space();
        for a in 0..2usize {
            for b in 0..2usize {
                let psi = StateVector::basis(space.clone(), &[a, b, 0, 0]);
                let out = simulate_state(&c, &psi);
                let expect = [
                    a & (1 - b), // a AND NOT b
                    a,
                    b,
                    (1 - a) & b, // NOT a AND b
                ];
                let amp = out.amps[space.index_of(&expect)];
                assert!(
                    (amp - cr(1.0)).norm() < 1e-12,
                    "({a},{b}) -> {expect:?}, amp {amp}"
                );
            }
        }
    }

    #[test]
    fn expansion_changes_granularity() {
        let c = ghz_circuit(3, 0.0, Scheme::Cu);
        let plain = depth_and_counts(&c, false);
        let exp = depth_and_counts(&c, true);
        assert_eq!(plain.n2q, 2);
        assert_eq!(exp.n2q, 4); // each composite opens into two half-exchanges
        assert_eq!(exp.n1q, 3); // one opening pulse + one internal pulse each
        assert!(exp.depth > plain.depth);
    }

    #[test]
    fn schedule_disjoint_and_ordered() {
        let c = ghz_circuit(4, 0.0, Scheme::Cz);
        let sched = schedule(&c);
        for ids in &sched.moments {
            let mut seen = std::collections::HashSet::new();
            for &k in ids {
                for &s in &c.ops[k].sites {
                    assert!(seen.insert(s), "overlapping sites in a moment");
                }
            }
        }
    }

    #[test]
    fn stacked_singles_depth() {
        let mut c = Circuit::new_qutrits(1, Scheme::Cu);
        for _ in 0..5 {
            c.push1("x01", 0, &[("theta", ParamValue::Num(0.3)), ("phi", ParamValue::Num(0.0))]);
        }
        assert_eq!(depth_and_counts(&c, false).depth, 5);
    }

    #[test]
    fn scans_match_closed_forms() {
        let grid: Vec<f64> = (0..25).map(|k| k as f64 * PI / 12.0).collect();
        for (th, p10, p11) in rotation_scan(&grid) {
            assert!((p10 - (th / 2.0).sin().powi(2)).abs() < 1e-12);
            assert!((p11 - (th / 2.0).cos().powi(2)).abs() < 1e-12);
        }
        for (ph, p10) in phase_scan(&grid, 0.4) {
            assert!((p10 - (ph + 0.4).cos().powi(2)).abs() < 1e-12, "phi={ph}");
        }
        for (ph, p10) in echo_phase_scan(&grid, 0.4) {
            assert!(
                (p10 - (2.0 * (ph + 0.4)).cos().powi(2)).abs() < 1e-12,
                "phi={ph}"
            );
        }
    }

    #[test]
    fn truth_table_columns_sum_to_one() {
        let c = comparator_circuit();
        let t = truth_table(&c, None, 0);
        for col in 0..16 {
            let s: f64 = (0..16).map(|r| t[[r, col]]).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_circuit_identity() {
        let c = Circuit::new_qutrits(2, Scheme::Cu);
        let psi = StateVector::basis(c.space(), &[1, 0]);
        let out = simulate_state(&c, &psi);
        assert!((out.amps[c.space().index_of(&[1, 0])] - cr(1.0)).norm() < 1e-15);
    }
}
