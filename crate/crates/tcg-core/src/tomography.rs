//! State tomography (Pauli-basis linear inversion with PSD projection),
//! process tomography with chi-matrix reconstruction in the two-qubit Pauli
//! basis, truth-table fidelity, shot sampling, and the feedback-calibration
//! loop for conditional-rotation parameters.

use crate::linalg::{self, cis, cr, dagger, C64};
use crate::qudit::{DensityMatrix, HilbertSpace, QuditError, StateVector};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Deterministic multinomial draw. Probabilities must sum to 1 within 1e-9
/// and may not be below -1e-12 (tiny negatives from rounding are clamped).
pub fn sample_counts(probs: &[f64], shots: u64, seed: u64) -> Vec<u64> {
    let mut clean: Vec<f64> = Vec::with_capacity(probs.len());
    for &p in probs {
        assert!(p >= -1e-12, "negative probability {p}");
        clean.push(p.max(0.0));
    }
    let total: f64 = clean.iter().sum();
    assert!((total - 1.0).abs() < 1e-9, "probabilities sum to {total}");
    let mut counts = vec![0u64; probs.len()];
    if shots == 0 {
        return counts;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..shots {
        let mut u: f64 = rng.gen::<f64>() * total;
        let mut bin = clean.len() - 1;
        for (i, &p) in clean.iter().enumerate() {
            if u < p {
                bin = i;
                break;
            }
            u -= p;
        }
        counts[bin] += 1;
    }
    counts
}

// ---------------------------------------------------------------------------
// Pauli basis
// ---------------------------------------------------------------------------

/// Single-qubit Pauli by index: 0=I, 1=X, 2=Y, 3=Z.
pub fn pauli(i: usize) -> Array2<C64> {
    let mut m: Array2<C64> = Array2::zeros((2, 2));
    match i {
        0 => {
            m[[0, 0]] = cr(1.0);
            m[[1, 1]] = cr(1.0);
        }
        1 => {
            m[[0, 1]] = cr(1.0);
            m[[1, 0]] = cr(1.0);
        }
        2 => {
            m[[0, 1]] = C64::new(0.0, -1.0);
            m[[1, 0]] = C64::new(0.0, 1.0);
        }
        3 => {
            m[[0, 0]] = cr(1.0);
            m[[1, 1]] = cr(-1.0);
        }
        _ => panic!("pauli index {i} out of range"),
    }
    m
}

/// Tensor product of single-qubit Paulis, first letter most significant.
pub fn pauli_string(letters: &[usize]) -> Array2<C64> {
    let mut m = pauli(letters[0]);
    for &l in &letters[1..] {
        m = linalg::kron(&m, &pauli(l));
    }
    m
}

fn pauli_letters(index: usize, m: usize) -> Vec<usize> {
    let mut letters = vec![0; m];
    let mut rest = index;
    for i in (0..m).rev() {
        letters[i] = rest % 4;
        rest /= 4;
    }
    letters
}

// ---------------------------------------------------------------------------
// State tomography
// ---------------------------------------------------------------------------

/// Measurement bases per site: 0 = Z (no pre-rotation), 1 = X, 2 = Y.
fn basis_rotation(basis: usize, dim: usize) -> Array2<C64> {
    use crate::circuit::lift_levels;
    use crate::gates::{x01, RotationConvention};
    let g = match basis {
        0 => crate::qudit::Operator::identity(HilbertSpace::new(vec![3])),
        1 => x01(PI / 2.0, -PI / 2.0, RotationConvention::MinusI),
        2 => x01(PI / 2.0, 0.0, RotationConvention::MinusI),
        _ => panic!("basis index {basis}"),
    };
    lift_levels(&g, &[dim]).matrix
}

/// Probabilities over qubit outcome strings (b in {0,1}^m) plus total mass
/// in the leak bin (any site at level >= 2), for one measurement setting.
fn setting_probs(
    rho: &DensityMatrix,
    setting: &[usize],
    shots: Option<u64>,
    seed: u64,
) -> (Vec<f64>, f64) {
    let space = &rho.space;
    let m = space.site_count();
    // rotate, then read the diagonal
    let mut full = {
        let mut op = basis_rotation(setting[0], space.dims()[0]);
        for s in 1..m {
            op = linalg::kron(&op, &basis_rotation(setting[s], space.dims()[s]));
        }
        op
    };
    let rotated = full.dot(&rho.matrix).dot(&dagger(&full));
    full = rotated;
    let n = space.total_dim();
    let mut diag: Vec<f64> = (0..n).map(|i| full[[i, i]].re.max(0.0)).collect();
    let total: f64 = diag.iter().sum();
    if total > 0.0 {
        // compensate rounding so sampled draws see a proper distribution
        for p in diag.iter_mut() {
            *p /= total;
        }
    }
    let weights: Vec<f64> = match shots {
        None => diag,
        Some(nshots) => sample_counts(&diag, nshots, seed)
            .into_iter()
            .map(|c| c as f64 / nshots as f64)
            .collect(),
    };
    let mut qubit = vec![0.0; 1 << m];
    let mut leak = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let labels = space.labels_of(i);
        if labels.iter().any(|&l| l >= 2) {
            leak += w;
        } else {
            let b = labels.iter().fold(0usize, |acc, &l| (acc << 1) | l);
            qubit[b] += w;
        }
    }
    (qubit, leak)
}

/// Report of a state-tomography run.
pub struct QstResult {
    /// PSD-projected, unit-trace estimate on the qubit subspace (2^m).
    pub rho: DensityMatrix,
    /// average population read outside the qubit levels across settings
    pub leak_fraction: f64,
}

/// Pauli linear-inversion state tomography on the {0,1} levels of each site.
/// Populations at level >= 2 go to a leak bin excluded from the inversion.
/// Exact probabilities when `shots` is None; multinomial sampling otherwise.
pub fn qst(rho_prepared: &DensityMatrix, shots: Option<u64>, seed: u64) -> QstResult {
    let m = rho_prepared.space.site_count();
    assert!(m <= 4, "state tomography limited to 4 sites");
    let n_settings = 3usize.pow(m as u32);
    let mut probs_by_setting: Vec<Vec<f64>> = Vec::with_capacity(n_settings);
    let mut leak_total = 0.0;
    let mut settings: Vec<Vec<usize>> = Vec::with_capacity(n_settings);
    for si in 0..n_settings {
        let mut setting = vec![0; m];
        let mut rest = si;
        for i in (0..m).rev() {
            setting[i] = rest % 3;
            rest /= 3;
        }
        let (p, leak) = setting_probs(
            rho_prepared,
            &setting,
            shots,
            seed.wrapping_add(1 + si as u64).wrapping_mul(0x9e3779b97f4a7c15),
        );
        leak_total += leak;
        probs_by_setting.push(p);
        settings.push(setting);
    }

    // expectation of each Pauli string, averaged over every setting that
    // measures its non-identity letters in the matching basis (identity
    // letters are summed over, so any basis on those sites is compatible)
    let dim = 1 << m;
    let mut est: Array2<C64> = Array2::zeros((dim, dim));
    for p_idx in 0..4usize.pow(m as u32) {
        let letters = pauli_letters(p_idx, m);
        let mut expval = 0.0;
        let mut n_compat = 0usize;
        for (si, setting) in settings.iter().enumerate() {
            let compat = letters.iter().zip(setting.iter()).all(|(&l, &s)| match l {
                1 => s == 1,
                2 => s == 2,
                3 => s == 0,
                _ => true,
            });
            if !compat {
                continue;
            }
            n_compat += 1;
            let probs = &probs_by_setting[si];
            for (b, &pb) in probs.iter().enumerate() {
                let mut sign = 1.0;
                for (i, &l) in letters.iter().enumerate() {
                    if l != 0 && (b >> (m - 1 - i)) & 1 == 1 {
                        sign = -sign;
                    }
                }
                expval += sign * pb;
            }
        }
        expval /= n_compat as f64;
        let pm = pauli_string(&letters);
        est = est + pm.mapv(|z| z * (expval / dim as f64));
    }

    // project to the closest density matrix: normalize the trace, then zero
    // out negative eigenvalues while redistributing their mass over the
    // remaining spectrum (keeps the trace at 1 with minimal disturbance)
    let tr0 = linalg::trace(&est).re;
    if tr0 > 0.0 {
        est.mapv_inplace(|z| z / tr0);
    }
    let (vals, vecs) = linalg::eigh(&est);
    let mut mu: Vec<f64> = vals.clone(); // ascending
    let mut deficit = 0.0;
    for i in 0..dim {
        let remaining = (dim - i) as f64;
        if mu[i] + deficit / remaining < 0.0 {
            deficit += mu[i];
            mu[i] = 0.0;
        } else {
            let shift = deficit / remaining;
            for v in mu.iter_mut().skip(i) {
                *v += shift;
            }
            break;
        }
    }
    let mut proj: Array2<C64> = Array2::zeros((dim, dim));
    for (k, &lam) in mu.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        for i in 0..dim {
            for j in 0..dim {
                proj[[i, j]] += vecs[[i, k]] * vecs[[j, k]].conj() * lam;
            }
        }
    }
    QstResult {
        rho: DensityMatrix {
            space: HilbertSpace::new(vec![2; m]),
            matrix: proj,
        },
        leak_fraction: leak_total / n_settings as f64,
    }
}

/// Project a multi-site state onto its {0,1} levels (for comparing
/// reconstructed qubit-subspace density matrices against qutrit targets).
pub fn qubit_projection(psi: &StateVector) -> StateVector {
    let m = psi.space.site_count();
    let space = HilbertSpace::new(vec![2; m]);
    let mut amps = Array1::zeros(1 << m);
    for i in 0..psi.space.total_dim() {
        let labels = psi.space.labels_of(i);
        if labels.iter().all(|&l| l < 2) {
            amps[space.index_of(&labels)] = psi.amps[i];
        }
    }
    let norm: f64 = amps.iter().map(|z: &C64| z.norm_sqr()).sum::<f64>().sqrt();
    assert!(norm > 1e-12, "state has no qubit-subspace support");
    StateVector {
        space,
        amps: amps.mapv(|z| z / norm),
    }
}

// ---------------------------------------------------------------------------
// Process tomography
// ---------------------------------------------------------------------------

/// Process matrix in the two-qubit Pauli basis ordered II, IX, IY, IZ, XI,
/// ..., ZZ.
#[derive(Debug, Clone)]
pub struct ChiMatrix {
    pub matrix: Array2<C64>,
}

impl ChiMatrix {
    pub fn validate(&self) -> Result<(), QuditError> {
        let h = dagger(&self.matrix);
        if linalg::max_abs_diff(&self.matrix, &h) > 1e-8 {
            return Err(QuditError::Invariant("chi matrix not Hermitian".into()));
        }
        Ok(())
    }

    /// Process fidelity Tr(chi_a chi_b) between two chi matrices.
    pub fn fidelity(&self, other: &ChiMatrix) -> f64 {
        linalg::trace(&self.matrix.dot(&other.matrix)).re
    }

    /// Analytic chi of a two-qubit unitary: chi = c c^dag with
    /// c_m = Tr(P_m U)/4.
    pub fn of_qubit_unitary(u: &Array2<C64>) -> ChiMatrix {
        let c = pauli_overlaps(u);
        let mut m: Array2<C64> = Array2::zeros((16, 16));
        for i in 0..16 {
            for j in 0..16 {
                m[[i, j]] = c[i] * c[j].conj();
            }
        }
        ChiMatrix { matrix: m }
    }
}

fn pauli_overlaps(u: &Array2<C64>) -> Vec<C64> {
    (0..16)
        .map(|p| {
            let pm = pauli_string(&pauli_letters(p, 2));
            linalg::trace(&pm.dot(u)) / cr(4.0)
        })
        .collect()
}

/// The 16 two-site preparation states: per site {|0>, |1>, |+>, |+i>}.
pub fn qpt_preparations(space: &HilbertSpace) -> Vec<StateVector> {
    assert_eq!(space.site_count(), 2, "process tomography is two-site");
    let single = |dim: usize, which: usize| -> StateVector {
        let mut amps = Array1::zeros(dim);
        let s = 1.0 / 2f64.sqrt();
        match which {
            0 => amps[0] = cr(1.0),
            1 => amps[1] = cr(1.0),
            2 => {
                amps[0] = cr(s);
                amps[1] = cr(s);
            }
            3 => {
                amps[0] = cr(s);
                amps[1] = C64::new(0.0, s);
            }
            _ => unreachable!(),
        }
        StateVector {
            space: HilbertSpace::new(vec![dim]),
            amps,
        }
    };
    let mut preps = Vec::with_capacity(16);
    for a in 0..4 {
        for b in 0..4 {
            preps.push(crate::qudit::tensor_state(
                &single(space.dims()[0], a),
                &single(space.dims()[1], b),
            ));
        }
    }
    preps
}

fn qubit_density(which: (usize, usize)) -> Array2<C64> {
    let single = |w: usize| -> Array1<C64> {
        let s = 1.0 / 2f64.sqrt();
        let mut v = Array1::zeros(2);
        match w {
            0 => v[0] = cr(1.0),
            1 => v[1] = cr(1.0),
            2 => {
                v[0] = cr(s);
                v[1] = cr(s);
            }
            3 => {
                v[0] = cr(s);
                v[1] = C64::new(0.0, s);
            }
            _ => unreachable!(),
        }
        v
    };
    let a = single(which.0);
    let b = single(which.1);
    let mut psi = Array1::zeros(4);
    for i in 0..2 {
        for j in 0..2 {
            psi[i * 2 + j] = a[i] * b[j];
        }
    }
    let mut rho = Array2::zeros((4, 4));
    for i in 0..4 {
        for j in 0..4 {
            rho[[i, j]] = psi[i] * psi[j].conj();
        }
    }
    rho
}

/// Extract the qubit-subspace block of a two-site density matrix (levels
/// {0,1} on each site), without normalization.
fn qubit_block(rho: &DensityMatrix) -> Array2<C64> {
    let space = &rho.space;
    let idx: Vec<usize> = (0..space.total_dim())
        .filter(|&i| space.labels_of(i).iter().all(|&l| l < 2))
        .collect();
    let mut out = Array2::zeros((4, 4));
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            out[[r, c]] = rho.matrix[[i, j]];
        }
    }
    out
}

/// Process tomography of an arbitrary two-site process. `process` maps each
/// of the 16 preparation states to an output density matrix; outputs are
/// read exactly (shots None) or through sampled state tomography.
pub fn qpt_with<F>(
    process: F,
    in_space: &HilbertSpace,
    shots: Option<u64>,
    seed: u64,
) -> ChiMatrix
where
    F: Fn(&StateVector) -> DensityMatrix,
{
    let preps = qpt_preparations(in_space);
    let mut in_mat: Array2<C64> = Array2::zeros((16, 16));
    let mut out_mat: Array2<C64> = Array2::zeros((16, 16));
    for (k, prep) in preps.iter().enumerate() {
        let which = (k / 4, k % 4);
        let rho_in = qubit_density(which);
        let rho_out_full = process(prep);
        let rho_out = match shots {
            None => qubit_block(&rho_out_full),
            Some(n) => {
                let est = qst(
                    &rho_out_full,
                    Some(n),
                    seed.wrapping_add(101 + k as u64).wrapping_mul(0x2545f4914f6cdd1d),
                );
                // undo the unit-trace normalization by the surviving mass so
                // leakage shows up as a trace deficit in the process
                let surv = 1.0 - est.leak_fraction;
                est.rho.matrix.mapv(|z| z * surv.max(0.0))
            }
        };
        let vin = linalg::vec_mat(&rho_in);
        let vout = linalg::vec_mat(&rho_out);
        for r in 0..16 {
            in_mat[[r, k]] = vin[r];
            out_mat[[r, k]] = vout[r];
        }
    }
    let superop = out_mat.dot(&linalg::inverse(&in_mat));
    chi_from_superop(&superop)
}

/// Convenience wrapper: process tomography of a two-site unitary.
pub fn qpt_unitary(u: &crate::qudit::Operator, shots: Option<u64>, seed: u64) -> ChiMatrix {
    qpt_with(
        |psi| u.apply(psi).to_density(),
        &u.space,
        shots,
        seed,
    )
}

/// chi_{mn} = Tr[(conj(P_n) kron P_m)^dag S] / 16 for a column-major-vec
/// superoperator S.
fn chi_from_superop(s: &Array2<C64>) -> ChiMatrix {
    let mut chi: Array2<C64> = Array2::zeros((16, 16));
    for m_i in 0..16 {
        let pm = pauli_string(&pauli_letters(m_i, 2));
        for n_i in 0..16 {
            let pn_conj = pauli_string(&pauli_letters(n_i, 2)).mapv(|z| z.conj());
            let basis = linalg::kron(&pn_conj, &pm);
            chi[[m_i, n_i]] = linalg::trace(&dagger(&basis).dot(s)) / cr(16.0);
        }
    }
    ChiMatrix { matrix: chi }
}

/// Two-qubit matrix of the conditional rotation as it acts on the {0,1}
/// levels: identity on the control-0 block, [[c, -e^{-i phi} s],
/// [-e^{i phi} s, -c]] on the control-1 block.
pub fn cu_qubit_template(theta: f64, phi: f64) -> Array2<C64> {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let mut m: Array2<C64> = Array2::zeros((4, 4));
    m[[0, 0]] = cr(1.0);
    m[[1, 1]] = cr(1.0);
    m[[2, 2]] = cr(c);
    m[[2, 3]] = -cis(-phi) * s;
    m[[3, 2]] = -cis(phi) * s;
    m[[3, 3]] = cr(-c);
    m
}

// ---------------------------------------------------------------------------
// Truth-table fidelity
// ---------------------------------------------------------------------------

/// F = (Tr(Me^T Me) + |Tr(M0^T Me)|^2) / (d (d + 1)) for real truth tables.
pub fn truth_table_fidelity(me: &Array2<f64>, m0: &Array2<f64>) -> f64 {
    assert_eq!(me.dim(), m0.dim(), "truth-table dimension mismatch");
    let d = me.dim().0 as f64;
    let t1: f64 = me.iter().map(|x| x * x).sum();
    let t2: f64 = me
        .iter()
        .zip(m0.iter())
        .map(|(a, b)| a * b)
        .sum();
    (t1 + t2 * t2) / (d * (d + 1.0))
}

// ---------------------------------------------------------------------------
// Feedback calibration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FeedbackState {
    pub applied_theta: f64,
    pub applied_phi: f64,
    pub theta_hat: f64,
    pub phi_hat: f64,
    pub iterations: usize,
    pub fidelity_history: Vec<f64>,
    pub converged: bool,
}

/// Estimate (theta, phi) from a reconstructed process matrix by staged grid
/// refinement of Tr(chi_exp chi(theta, phi)).
pub fn extract_cu_parameters(chi_exp: &ChiMatrix) -> (f64, f64) {
    let objective = |th: f64, ph: f64| -> f64 {
        let c = pauli_overlaps(&cu_qubit_template(th, ph));
        // c^dag chi c
        let mut acc = cr(0.0);
        for i in 0..16 {
            for j in 0..16 {
                acc += c[i].conj() * chi_exp.matrix[[i, j]] * c[j];
            }
        }
        acc.re
    };
    let mut th_c = PI / 2.0;
    let mut ph_c = 0.0;
    let mut th_w = PI / 2.0 + 0.5;
    let mut ph_w = PI;
    for _ in 0..4 {
        let mut best = (f64::MIN, th_c, ph_c);
        let n = 41;
        for i in 0..n {
            let th = th_c - th_w + 2.0 * th_w * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let ph = ph_c - ph_w + 2.0 * ph_w * j as f64 / (n - 1) as f64;
                let v = objective(th, ph);
                if v > best.0 {
                    best = (v, th, ph);
                }
            }
        }
        th_c = best.1;
        ph_c = best.2;
        th_w /= (41 - 1) as f64 / 4.0;
        ph_w /= (41 - 1) as f64 / 4.0;
    }
    (th_c, ph_c)
}

/// Iterative calibration of a conditional rotation against a fixed
/// miscalibration offset. Each round reconstructs the applied process,
/// estimates the effective parameters, and corrects the applied pulse.
/// Terminates when Tr(chi_exp chi_target) >= threshold or at max_iter.
#[allow(clippy::too_many_arguments)]
pub fn feedback_calibrate(
    theta: f64,
    phi: f64,
    dtheta: f64,
    dphi: f64,
    shots: Option<u64>,
    seed: u64,
    max_iter: usize,
    threshold: f64,
    noise: Option<&crate::noise::NoiseModel>,
) -> FeedbackState {
    assert!(max_iter >= 1);
    let chi_target = ChiMatrix::of_qubit_unitary(&cu_qubit_template(theta, phi));
    let in_space = HilbertSpace::qutrits(2);
    let mut state = FeedbackState {
        applied_theta: theta,
        applied_phi: phi,
        theta_hat: f64::NAN,
        phi_hat: f64::NAN,
        iterations: 0,
        fidelity_history: Vec::new(),
        converged: false,
    };
    for it in 0..max_iter {
        let actual_theta = state.applied_theta + dtheta;
        let actual_phi = state.applied_phi + dphi;
        let chi_exp = match noise {
            None => {
                let gate = crate::composer::cu(actual_theta, actual_phi);
                qpt_unitary(&gate.operator, shots, seed.wrapping_add(it as u64 * 7919))
            }
            Some(model) => {
                let mut c = crate::circuit::Circuit::new_qutrits(2, crate::circuit::Scheme::Cu);
                c.push2(
                    "cu",
                    0,
                    1,
                    &[
                        ("theta", crate::circuit::ParamValue::Num(actual_theta)),
                        ("phi", crate::circuit::ParamValue::Num(actual_phi)),
                    ],
                );
                qpt_with(
                    |psi| crate::circuit::simulate(&c, Some(psi), Some(model)),
                    &in_space,
                    shots,
                    seed.wrapping_add(it as u64 * 7919),
                )
            }
        };
        let f = chi_exp.fidelity(&chi_target);
        state.iterations = it + 1;
        state.fidelity_history.push(f);
        let (th_hat, ph_hat) = extract_cu_parameters(&chi_exp);
        state.theta_hat = th_hat;
        state.phi_hat = ph_hat;
        if f >= threshold {
            state.converged = true;
            break;
        }
        state.applied_theta -= th_hat - theta;
        state.applied_phi -= ph_hat - phi;
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ghz_circuit, simulate_state, Scheme};
    use crate::composer;
    use crate::qudit::Operator;

    #[test]
    fn sample_counts_edge_cases() {
        assert_eq!(sample_counts(&[0.5, 0.5], 0, 1), vec![0, 0]);
        assert_eq!(sample_counts(&[1.0, 0.0, 0.0], 500, 7), vec![500, 0, 0]);
    }

    #[test]
    fn sample_counts_binomial_statistics() {
        let shots = 5000u64;
        let sigma = (shots as f64 * 0.25).sqrt();
        let mut mean = 0.0;
        let n_seeds = 100;
        for seed in 0..n_seeds {
            mean += sample_counts(&[0.5, 0.5], shots, seed)[0] as f64;
        }
        mean /= n_seeds as f64;
        assert!((mean - 2500.0).abs() < 3.0 * sigma / (n_seeds as f64).sqrt() * 3.0);
        // determinism
        assert_eq!(
            sample_counts(&[0.3, 0.3, 0.4], 1000, 42),
            sample_counts(&[0.3, 0.3, 0.4], 1000, 42)
        );
    }

    #[test]
    fn qst_exact_on_ground_state() {
        let rho = StateVector::ground(HilbertSpace::qutrits(2)).to_density();
        let est = qst(&rho, None, 0);
        assert!((est.rho.matrix[[0, 0]].re - 1.0).abs() < 1e-9);
        assert!(est.leak_fraction.abs() < 1e-12);
    }

    #[test]
    fn qst_exact_on_random_embedded_state() {
        let space = HilbertSpace::qutrits(2);
        let mut amps = Array1::zeros(9);
        let raw = [0.11, -0.4, 0.35, 0.6];
        let norm: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (k, (i, j)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
            amps[space.index_of(&[*i, *j])] = cr(raw[k] / norm) * cis(0.3 * k as f64);
        }
        let psi = StateVector::new(space, amps).unwrap();
        let est = qst(&psi.to_density(), None, 0);
        let target = qubit_projection(&psi);
        let f = crate::qudit::state_fidelity(&est.rho, &target).unwrap();
        assert!((f - 1.0).abs() < 1e-9, "F = {f}");
    }

    #[test]
    fn qst_ghz_exact_and_sampled() {
        let c = ghz_circuit(3, 0.0, Scheme::Cu);
        let out = simulate_state(&c, &StateVector::ground(c.space()));
        let target = qubit_projection(&out);
        let exact = qst(&out.to_density(), None, 0);
        let f_exact = crate::qudit::state_fidelity(&exact.rho, &target).unwrap();
        assert!((f_exact - 1.0).abs() < 1e-9);
        let sampled = qst(&out.to_density(), Some(5000), 11);
        let f_sampled = crate::qudit::state_fidelity(&sampled.rho, &target).unwrap();
        assert!(f_sampled >= 0.99, "sampled F = {f_sampled}");
    }

    #[test]
    fn qpt_identity_process() {
        let ident = Operator::identity(HilbertSpace::qutrits(2));
        let chi = qpt_unitary(&ident, None, 0);
        chi.validate().unwrap();
        assert!((chi.matrix[[0, 0]].re - 1.0).abs() < 1e-9);
        let offdiag: f64 = (0..16)
            .flat_map(|i| (0..16).map(move |j| (i, j)))
            .filter(|&(i, j)| (i, j) != (0, 0))
            .map(|(i, j)| chi.matrix[[i, j]].norm())
            .fold(0.0, f64::max);
        assert!(offdiag < 1e-9);
        let chi0 = ChiMatrix::of_qubit_unitary(&Array2::from_diag_elem(4, cr(1.0)));
        assert!((chi.fidelity(&chi0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn qpt_conditional_not_with_phase_correction() {
        // conditional rotation at theta = pi plus a control-frame phase flip
        // equals the textbook conditional-NOT
        let gate = composer::cu(PI, 0.0);
        let corr = crate::qudit::embed(
            &crate::gates::z_phases(&[0.0, PI, 0.0]),
            &[0],
            &gate.operator.space,
        )
        .unwrap();
        let composed = gate.operator.then(&corr);
        let chi = qpt_unitary(&composed, None, 0);
        let mut cnot: Array2<C64> = Array2::zeros((4, 4));
        cnot[[0, 0]] = cr(1.0);
        cnot[[1, 1]] = cr(1.0);
        cnot[[2, 3]] = cr(1.0);
        cnot[[3, 2]] = cr(1.0);
        let chi0 = ChiMatrix::of_qubit_unitary(&cnot);
        let f = chi.fidelity(&chi0);
        assert!((f - 1.0).abs() < 1e-9, "F = {f}");
    }

    #[test]
    fn chi_is_global_phase_invariant() {
        let u = composer::cu(1.1, 0.7).operator;
        let mut v = u.clone();
        v.matrix.mapv_inplace(|z| z * cis(0.9));
        let a = qpt_unitary(&u, None, 0);
        let b = qpt_unitary(&v, None, 0);
        assert!(linalg::max_abs_diff(&a.matrix, &b.matrix) < 1e-9);
    }

    #[test]
    fn depolarizing_admixture_decreases_fidelity() {
        let u = composer::cu(PI, 0.0).operator;
        let chi0 = {
            let chi = qpt_unitary(&u, None, 0);
            chi
        };
        let mut last = f64::MAX;
        for lam in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let chi = qpt_with(
                |psi| {
                    let pure = u.apply(psi).to_density();
                    let n = pure.matrix.dim().0;
                    let mut mixed = pure.matrix.mapv(|z| z * (1.0 - lam));
                    // depolarize within the qubit subspace
                    for i in 0..n {
                        let labels = pure.space.labels_of(i);
                        if labels.iter().all(|&l| l < 2) {
                            mixed[[i, i]] += cr(lam / 4.0);
                        }
                    }
                    DensityMatrix {
                        space: pure.space.clone(),
                        matrix: mixed,
                    }
                },
                &u.space,
                None,
                0,
            );
            let f = chi.fidelity(&chi0);
            assert!(f < last || lam == 0.0, "lam={lam} f={f} last={last}");
            if lam == 0.0 {
                assert!((f - 1.0).abs() < 1e-9);
            }
            last = f;
        }
    }

    #[test]
    fn truth_table_fidelity_formula() {
        let eye = Array2::from_diag_elem(16, 1.0);
        assert!((truth_table_fidelity(&eye, &eye) - 1.0).abs() < 1e-12);
        let zero = Array2::zeros((16, 16));
        assert!(truth_table_fidelity(&zero, &eye).abs() < 1e-12);
    }

    #[test]
    fn feedback_converges_immediately_when_calibrated() {
        let st = feedback_calibrate(PI, 0.0, 0.0, 0.0, None, 0, 5, 0.999, None);
        assert!(st.converged);
        assert_eq!(st.iterations, 1);
        assert!((st.fidelity_history[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn feedback_corrects_angle_offset() {
        let st = feedback_calibrate(PI / 2.0, 0.3, 0.1, 0.0, None, 0, 5, 0.999, None);
        assert!(st.converged, "history {:?}", st.fidelity_history);
        assert!(st.iterations <= 5);
        assert!(*st.fidelity_history.last().unwrap() >= 0.999);
    }
}
