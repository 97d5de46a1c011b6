//! Component gate generators: two-level rotations on a qutrit, level
//! phases, the conditional-phase excursion gate, and its three-qudit
//! extension.
//!
//! Two conventions exist in the literature for the off-diagonal entries of a
//! two-level rotation and both are supported:
//!  * `MinusI` (default): [[c, -i e^{-i phi} s], [-i e^{i phi} s, c]] — a
//!    proper rotation about an equatorial axis, unitary for all angles.
//!  * `BareSin`: [[c, e^{-i phi} s], [e^{i phi} s, c]] — matches several
//!    printed closed forms verbatim; only unitary at theta = 0, pi mod 2pi.

use crate::linalg::{cis, cr, eye, C64};
use crate::qudit::{HilbertSpace, Operator};
use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationConvention {
    #[default]
    MinusI,
    BareSin,
}

/// Which site hosts the |2> excursion in the conditional-phase gate.
/// `First` couples |11> with |20>; `Second` couples |11> with |02>.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Excursion {
    #[default]
    First,
    Second,
}

pub const DUR_1Q_NS: f64 = 30.0;
pub const DUR_CZ_NS: f64 = 40.0;
pub const DUR_CU_NS: f64 = 90.0;
pub const DUR_SPCU_NS: f64 = 60.0;

fn two_level(dim: usize, lo: usize, hi: usize, theta: f64, phi: f64, conv: RotationConvention) -> Operator {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let f = match conv {
        RotationConvention::MinusI => C64::new(0.0, -1.0),
        RotationConvention::BareSin => cr(1.0),
    };
    let mut m = eye(dim);
    m[[lo, lo]] = cr(c);
    m[[hi, hi]] = cr(c);
    m[[lo, hi]] = f * cis(-phi) * cr(s);
    m[[hi, lo]] = f * cis(phi) * cr(s);
    Operator::new(HilbertSpace::new(vec![dim]), m)
}

/// Rotation on the {|0>,|1>} levels of one qutrit.
pub fn x01(theta: f64, phi: f64, conv: RotationConvention) -> Operator {
    two_level(3, 0, 1, theta, phi, conv)
}

/// Rotation on the {|1>,|2>} levels of one qutrit.
pub fn x12(theta: f64, phi: f64, conv: RotationConvention) -> Operator {
    two_level(3, 1, 2, theta, phi, conv)
}

/// Diagonal phase gate diag(e^{i p0}, e^{i p1}, ...): one phase per level.
pub fn z_phases(phases: &[f64]) -> Operator {
    let d = phases.len();
    let mut m = eye(d);
    for (k, &p) in phases.iter().enumerate() {
        m[[k, k]] = cis(p);
    }
    Operator::new(HilbertSpace::new(vec![d]), m)
}

/// General single-qubit gate e^{i alpha} Rz(b) Ry(g) Rz(d) lifted to the
/// {|0>,|1>} block of a qutrit (identity on |2>).
pub fn su2(alpha: f64, b: f64, g: f64, d: f64) -> Operator {
    let m2 = su2_matrix(alpha, b, g, d);
    let mut m = eye(3);
    for i in 0..2 {
        for j in 0..2 {
            m[[i, j]] = m2[[i, j]];
        }
    }
    Operator::new(HilbertSpace::qutrits(1), m)
}

pub fn su2_matrix(alpha: f64, b: f64, g: f64, d: f64) -> Array2<C64> {
    let rz = |a: f64| {
        let mut m: Array2<C64> = Array2::zeros((2, 2));
        m[[0, 0]] = cis(-a / 2.0);
        m[[1, 1]] = cis(a / 2.0);
        m
    };
    let ry = |a: f64| {
        let (c, s) = ((a / 2.0).cos(), (a / 2.0).sin());
        let mut m: Array2<C64> = Array2::zeros((2, 2));
        m[[0, 0]] = cr(c);
        m[[0, 1]] = cr(-s);
        m[[1, 0]] = cr(s);
        m[[1, 1]] = cr(c);
        m
    };
    rz(b).dot(&ry(g)).dot(&rz(d)).mapv(|z| z * cis(alpha))
}

/// ZYZ angles (alpha, b, g, d) with U = e^{i alpha} Rz(b) Ry(g) Rz(d),
/// for any 2x2 unitary.
pub fn zyz(u: &Array2<C64>) -> (f64, f64, f64, f64) {
    assert_eq!(u.dim(), (2, 2));
    let det = u[[0, 0]] * u[[1, 1]] - u[[0, 1]] * u[[1, 0]];
    let alpha = 0.5 * det.arg();
    let v = u.mapv(|z| z * cis(-alpha));
    let g = 2.0 * v[[1, 0]].norm().atan2(v[[0, 0]].norm());
    let sum_bd = if v[[1, 1]].norm() > 1e-12 {
        2.0 * v[[1, 1]].arg()
    } else {
        0.0
    };
    let diff_bd = if v[[1, 0]].norm() > 1e-12 {
        2.0 * v[[1, 0]].arg()
    } else {
        0.0
    };
    ((alpha), (sum_bd + diff_bd) / 2.0, g, (sum_bd - diff_bd) / 2.0)
}

/// Conditional-phase excursion gate on two qutrits: identity except a
/// `MinusI`-style rotation on the coupled pair selected by `exc`, with phase
/// `phi_q`. At theta = pi it fully exchanges the pair (sqrt-CZ); squared and
/// restricted to the computational subspace it is CZ.
pub fn cp(theta: f64, phi_q: f64, exc: Excursion) -> Operator {
    let (lo, hi) = match exc {
        // second site hosts |2>: couple |02>(index 2) and |11>(index 4)
        Excursion::Second => (2usize, 4usize),
        // first site hosts |2>: couple |11>(index 4) and |20>(index 6)
        Excursion::First => (4usize, 6usize),
    };
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let mut m = eye(9);
    m[[lo, lo]] = cr(c);
    m[[hi, hi]] = cr(c);
    m[[lo, hi]] = C64::new(0.0, -1.0) * cis(-phi_q) * cr(s);
    m[[hi, lo]] = C64::new(0.0, -1.0) * cis(phi_q) * cr(s);
    Operator::new(HilbertSpace::qutrits(2), m)
}

/// Full-exchange excursion pulse cp(pi, 0): alias sqrt-CZ / iSWAP on the
/// coupled pair.
pub fn sqrt_cz(exc: Excursion) -> Operator {
    cp(std::f64::consts::PI, 0.0, exc)
}

/// True two-qutrit CZ on the computational subspace: diagonal, -1 on |11>.
pub fn cz() -> Operator {
    let mut m = eye(9);
    m[[4, 4]] = cr(-1.0);
    Operator::new(HilbertSpace::qutrits(2), m)
}

/// Three-qudit conditional-phase excursion on sites with dims (3,4,3):
/// rotation between |111> and the superposition a|021> + b|030>, identity on
/// everything orthogonal to that plane. The middle site needs a fourth level
/// to host |3>.
pub fn ccp(theta: f64, mix_a: C64, mix_b: C64) -> Operator {
    let norm = mix_a.norm_sqr() + mix_b.norm_sqr();
    assert!(
        (norm - 1.0).abs() <= 1e-10,
        "ccp mix amplitudes must be normalized, got |a|^2+|b|^2 = {norm}"
    );
    let space = HilbertSpace::new(vec![3, 4, 3]);
    let n = space.total_dim();
    let t = space.index_of(&[1, 1, 1]);
    let u1 = space.index_of(&[0, 2, 1]);
    let u2 = space.index_of(&[0, 3, 0]);
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let mut m = eye(n);
    // |t><t| and |u><u| with |u> = a|021> + b|030>
    let mut add = |i: usize, j: usize, vi: C64, vj: C64| {
        m[[i, j]] += vi * vj.conj();
    };
    // (c - 1)(|t><t| + |u><u|)
    add(t, t, cr(c - 1.0), cr(1.0));
    for (i, vi) in [(u1, mix_a), (u2, mix_b)] {
        for (j, vj) in [(u1, mix_a), (u2, mix_b)] {
            add(i, j, cr(c - 1.0) * vi, vj);
        }
    }
    // -i s (|t><u| + |u><t|)
    for (i, vi) in [(u1, mix_a), (u2, mix_b)] {
        add(t, i, C64::new(0.0, -s), vi);
        add(i, t, C64::new(0.0, -s) * vi, cr(1.0));
    }
    Operator::new(space, m)
}
