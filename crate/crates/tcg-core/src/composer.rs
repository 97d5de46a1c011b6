//! Composition of conditional gates from transition/internal pulse pathways.
//!
//! A pathway alternates transition pulses (which move population between the
//! computational subspace and the auxiliary levels) and internal operations
//! (block-diagonal with respect to that split). Symmetric pathways return all
//! population coherently, so their computational restriction is unitary;
//! the short-path variant keeps only the ascending half and trades
//! reversibility for fewer pulses.

use crate::gates::{self, Excursion, RotationConvention};
use crate::linalg::{self, cis, cr, C64};
use crate::qudit::{embed, restrict_computational, HilbertSpace, Operator, QuditError};
use ndarray::Array2;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Transition,
    Internal,
}

#[derive(Debug, Clone)]
pub struct PathStep {
    pub kind: StepKind,
    pub op: Operator,
}

#[derive(Debug, Clone)]
pub struct PathSpec {
    pub steps: Vec<PathStep>,
    pub space: HilbertSpace,
}

impl PathSpec {
    pub fn new(space: HilbertSpace, steps: Vec<PathStep>) -> Self {
        assert!(!steps.is_empty(), "path must be nonempty");
        for s in &steps {
            assert_eq!(s.op.space, space, "path step acts outside declared space");
        }
        PathSpec { steps, space }
    }
}

#[derive(Debug, Clone)]
pub struct ComposedGate {
    pub operator: Operator,
    /// 2^m x 2^m computational-subspace block.
    pub restricted: Array2<C64>,
    pub symmetric: bool,
}

impl ComposedGate {
    fn from_operator(op: Operator, symmetric: bool) -> Self {
        let restricted = restrict_computational(&op);
        ComposedGate {
            operator: op,
            restricted,
            symmetric,
        }
    }
}

/// Max off-block element with respect to the computational/auxiliary split.
fn block_diagonal_deviation(op: &Operator) -> f64 {
    let comp = op.space.computational_indices();
    let in_comp: Vec<bool> = {
        let mut v = vec![false; op.space.total_dim()];
        for &i in &comp {
            v[i] = true;
        }
        v
    };
    let mut dev = 0.0f64;
    for ((i, j), z) in op.matrix.indexed_iter() {
        if in_comp[i] != in_comp[j] {
            dev = dev.max(z.norm());
        }
    }
    dev
}

fn product_in_application_order(space: &HilbertSpace, ops: &[&Operator]) -> Operator {
    let mut m = linalg::eye(space.total_dim());
    for op in ops {
        m = op.matrix.dot(&m);
    }
    Operator::new(space.clone(), m)
}

/// Compose a symmetric pathway. The step list is taken in application order;
/// if it ends with an internal step the mirrored descending suffix (all
/// preceding steps in reverse) is appended automatically to complete the
/// palindrome. The computational restriction of the result must be unitary.
pub fn compose_symmetric(path: &PathSpec) -> Result<ComposedGate, QuditError> {
    for (i, s) in path.steps.iter().enumerate() {
        if s.kind == StepKind::Internal && block_diagonal_deviation(&s.op) > 1e-10 {
            return Err(QuditError::Invariant(format!(
                "declared internal step {i} is not block-diagonal with respect to the computational split"
            )));
        }
    }
    let mut seq: Vec<&Operator> = path.steps.iter().map(|s| &s.op).collect();
    if path.steps.last().unwrap().kind == StepKind::Internal {
        for s in path.steps[..path.steps.len() - 1].iter().rev() {
            seq.push(&s.op);
        }
    }
    let op = product_in_application_order(&path.space, &seq);
    let gate = ComposedGate::from_operator(op, true);
    let k = gate.restricted.nrows();
    let dev = linalg::max_abs_diff(
        &linalg::dagger(&gate.restricted).dot(&gate.restricted),
        &linalg::eye(k),
    );
    if dev > 1e-10 {
        return Err(QuditError::Invariant(format!(
            "symmetric pathway restriction is not unitary (deviation {dev:.2e})"
        )));
    }
    Ok(gate)
}

/// Compose an asymmetric short pathway as given. The restriction is generally
/// not unitary; R R^dag must still be a projector (each computational input
/// either survives coherently or departs entirely).
pub fn compose_short_path(path: &PathSpec) -> ComposedGate {
    let seq: Vec<&Operator> = path.steps.iter().map(|s| &s.op).collect();
    let op = product_in_application_order(&path.space, &seq);
    ComposedGate::from_operator(op, false)
}

fn t_step(op: Operator) -> PathStep {
    PathStep {
        kind: StepKind::Transition,
        op,
    }
}

/// Main two-qutrit conditional rotation, control on site 0: full-exchange
/// pulse, X12 on the control, full-exchange pulse. Restriction:
/// [[1,0,0,0],[0,1,0,0],[0,0,c,-e^{-i phi} s],[0,0,-e^{i phi} s,-c]].
pub fn cu(theta: f64, phi: f64) -> ComposedGate {
    cu_with_control(theta, phi, 0)
}

/// Conditional rotation with selectable control site. control_site = 0 uses
/// the |20> excursion with the X12 pulse on site 0 (rotation block on
/// {|10>,|11>}); control_site = 1 uses the |02> excursion with the pulse on
/// site 1 (rotation block on {|01>,|11>}).
pub fn cu_with_control(theta: f64, phi: f64, control_site: usize) -> ComposedGate {
    assert!(control_site < 2);
    let space = HilbertSpace::qutrits(2);
    let (exc, site) = if control_site == 0 {
        (Excursion::First, 0usize)
    } else {
        (Excursion::Second, 1usize)
    };
    let half = gates::sqrt_cz(exc);
    let pulse = embed(
        &gates::x12(theta, phi, RotationConvention::MinusI),
        &[site],
        &space,
    )
    .unwrap();
    let path = PathSpec::new(
        space,
        vec![t_step(half.clone()), t_step(pulse), t_step(half)],
    );
    compose_symmetric(&path).expect("conditional rotation pathway is symmetric")
}

/// Short-path conditional rotation used for state preparation (applied order:
/// X12 pulse on the control, then the full-exchange pulse). On the
/// computational subspace: |10> -> c|10> - e^{i phi} s |11>, while |11>
/// departs entirely (zero restricted column) — irreversible by construction.
pub fn spcu(theta: f64, phi: f64) -> ComposedGate {
    let space = HilbertSpace::qutrits(2);
    let pulse = embed(
        &gates::x12(theta, phi, RotationConvention::MinusI),
        &[0],
        &space,
    )
    .unwrap();
    let half = gates::sqrt_cz(Excursion::First);
    let path = PathSpec::new(space, vec![t_step(pulse), t_step(half)]);
    compose_short_path(&path)
}

/// Phase-extended conditional rotation (|02> excursion convention, rotation
/// block on {|01>,|11>}): the excursion sandwich dressed with a level-1 phase
/// phi_c2 on site 0, and an extra diagonal phase phi_c1 on the |11> corner of
/// the rotation block. The phi_c1 != 0 member of the family is not reachable
/// by diagonal dressing of the base pathway and is generated directly; it is
/// only unitary at phi_c1 = 0 (mod 2 pi), mirroring the printed closed form.
pub fn cu_phase_extended(
    theta: f64,
    phi: f64,
    phi_c1: f64,
    phi_c2: f64,
    conv: RotationConvention,
) -> ComposedGate {
    let space = HilbertSpace::qutrits(2);
    let half = gates::sqrt_cz(Excursion::Second);
    let zc2 = embed(&gates::z_phases(&[0.0, phi_c2, 0.0]), &[0], &space).unwrap();
    let pulse = embed(&gates::x12(theta, phi, conv), &[1], &space).unwrap();
    let mid = product_in_application_order(&space, &[&pulse, &zc2]);
    let mut full = product_in_application_order(&space, &[&half, &mid, &half]);
    let idx11 = space.index_of(&[1, 1]);
    let v = full.matrix[[idx11, idx11]] * cis(phi_c1);
    full.matrix[[idx11, idx11]] = v;
    let full = Operator::new(space, full.matrix);
    ComposedGate::from_operator(full, false)
}

/// Alternative conditional-rotation pathway built from two X01 pi pulses
/// around a partial excursion (|02> convention). Carries the closed form's
/// overall phase e^{i(phi1 - phi2)} so the matrix matches it verbatim.
pub fn cu_prime(theta: f64, phi1: f64, phi2: f64) -> ComposedGate {
    let space = HilbertSpace::qutrits(2);
    let half = gates::sqrt_cz(Excursion::Second);
    let p1 = embed(
        &gates::x01(PI, phi1, RotationConvention::BareSin),
        &[1],
        &space,
    )
    .unwrap();
    let p2 = embed(
        &gates::x01(PI, phi2, RotationConvention::BareSin),
        &[1],
        &space,
    )
    .unwrap();
    let mid = gates::cp(theta, 0.0, Excursion::Second);
    let mut op = product_in_application_order(&space, &[&half, &p2, &mid, &p1, &half]);
    op.matrix = op.matrix.mapv(|z| z * cis(phi1 - phi2));
    let op = Operator::new(space, op.matrix);
    ComposedGate::from_operator(op, true)
}

/// Genuinely qutrit conditional exchange between |01> and |12>, built from
/// two X12 pi pulses around a partial excursion.
pub fn cu_qutrit(theta: f64, phi1: f64, phi2: f64, phi_q: f64) -> ComposedGate {
    let space = HilbertSpace::qutrits(2);
    let half = gates::sqrt_cz(Excursion::Second);
    let p1 = embed(
        &gates::x12(PI, phi1, RotationConvention::BareSin),
        &[1],
        &space,
    )
    .unwrap();
    let p2 = embed(
        &gates::x12(PI, phi2, RotationConvention::BareSin),
        &[1],
        &space,
    )
    .unwrap();
    let mid = gates::cp(theta, phi_q, Excursion::Second);
    let op = product_in_application_order(&space, &[&half, &p2, &mid, &p1, &half]);
    ComposedGate::from_operator(op, true)
}

/// Partial-SWAP family: X12/X01 pi-pulse dressing around a partial excursion,
/// exchanging |01> and |10> with angle theta. Exposes the accumulated frame
/// phases phi_x = -phi1+phi2-phi3+phi4 and phi_y = phi1+2 phi2-2 phi3-phi4.
/// Carries the closed form's overall phase e^{i(phi2 - phi3)}.
pub struct SwapGate {
    pub gate: ComposedGate,
    pub phi_x: f64,
    pub phi_y: f64,
}

pub fn swap_family(theta: f64, phi1: f64, phi2: f64, phi3: f64, phi4: f64) -> SwapGate {
    let space = HilbertSpace::qutrits(2);
    let bare = RotationConvention::BareSin;
    let a = embed(&gates::x12(PI, phi1, bare), &[1], &space).unwrap();
    let b = embed(&gates::x01(PI, phi2, bare), &[1], &space).unwrap();
    let mid = gates::cp(theta, 0.0, Excursion::Second);
    let c = embed(&gates::x01(PI, phi3, bare), &[1], &space).unwrap();
    let d = embed(&gates::x12(PI, phi4, bare), &[1], &space).unwrap();
    // application order: d, c, mid, b, a
    let mut op = product_in_application_order(&space, &[&d, &c, &mid, &b, &a]);
    op.matrix = op.matrix.mapv(|z| z * cis(phi2 - phi3));
    let op = Operator::new(space, op.matrix);
    SwapGate {
        gate: ComposedGate::from_operator(op, true),
        phi_x: -phi1 + phi2 - phi3 + phi4,
        phi_y: phi1 + 2.0 * phi2 - 2.0 * phi3 - phi4,
    }
}

/// Doubly-conditional rotation on three sites with dims (3,4,3): controlled
/// exchange between |101> and |111>, via the three-qudit excursion pulse and
/// two X01 pi pulses on the middle site.
pub fn ccu(theta: f64, phi1: f64, phi2: f64, mix_a: C64, mix_b: C64) -> ComposedGate {
    let space = HilbertSpace::new(vec![3, 4, 3]);
    let full = gates::ccp(PI, mix_a, mix_b);
    let mid = gates::ccp(theta, mix_a, mix_b);
    let x = |ph: f64| {
        let mut m = linalg::eye(4);
        m[[0, 0]] = cr(0.0);
        m[[1, 1]] = cr(0.0);
        m[[0, 1]] = cis(-ph);
        m[[1, 0]] = cis(ph);
        embed(
            &Operator::new(HilbertSpace::new(vec![4]), m),
            &[1],
            &space,
        )
        .unwrap()
    };
    let p1 = x(phi1);
    let p2 = x(phi2);
    let op = product_in_application_order(&space, &[&full, &p2, &mid, &p1, &full]);
    ComposedGate::from_operator(op, true)
}

/// Excursion-phase independence: a conditional-NOT built with excursion phase
/// zeta equals the zeta = 0 gate conjugated by a single-site level-1 phase.
/// Returns the worst residual over both excursion conventions.
pub fn path_independence_check(zeta: f64) -> f64 {
    let space = HilbertSpace::qutrits(2);
    let mut worst = 0.0f64;
    for (exc, pulse_site, corr_site, corr_sign) in [
        (Excursion::First, 0usize, 1usize, -1.0f64),
        (Excursion::Second, 1usize, 0usize, 1.0f64),
    ] {
        let build = |z: f64| {
            let half = gates::cp(PI, z, exc);
            let pulse = embed(
                &gates::x12(PI, 0.0, RotationConvention::MinusI),
                &[pulse_site],
                &space,
            )
            .unwrap();
            product_in_application_order(&space, &[&half, &pulse, &half])
        };
        let cz = build(zeta);
        let c0 = build(0.0);
        let zt = embed(
            &gates::z_phases(&[0.0, corr_sign * zeta, 0.0]),
            &[corr_site],
            &space,
        )
        .unwrap();
        let corrected = zt
            .matrix
            .dot(&c0.matrix)
            .dot(&linalg::dagger(&zt.matrix));
        worst = worst.max(linalg::max_abs_diff(&cz.matrix, &corrected));
    }
    worst
}
