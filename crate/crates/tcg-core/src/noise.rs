//! Phenomenological decoherence and leakage channels applied per scheduled
//! moment: level-dependent amplitude damping (cascade |2> -> |1> -> |0>),
//! pure dephasing, and optional per-gate leakage into a fourth |3> level.

use crate::linalg::{self, cr, C64};
use crate::qudit::{DensityMatrix, QuditError};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Per-qudit relaxation/dephasing parameters (times in microseconds).
/// `kappa` sets the |2> lifetime to T1/kappa. Working-point values are used
/// during two-qudit moments when the model is working-point aware.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuditNoiseParams {
    pub t1_us: f64,
    pub kappa: f64,
    pub tphi_us: f64,
    pub t1_working_us: f64,
    pub tphi_working_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub qudits: Vec<QuditNoiseParams>,
    pub decoherence: bool,
    pub leakage: bool,
    pub working_point_aware: bool,
    /// per-gate leakage probabilities by gate class
    pub leak_1q: f64,
    pub leak_cu: f64,
    pub leak_cz: f64,
}

pub const DEFAULT_LEAK_1Q: f64 = 1e-3;
pub const DEFAULT_LEAK_CU: f64 = 1e-3;
pub const DEFAULT_LEAK_CZ: f64 = 1e-5;

/// Derive the pure-dephasing time from (T1, T2*): 1/Tphi = 1/T2* - 1/(2 T1).
pub fn tphi_from_t2star(t1_us: f64, t2s_us: f64) -> Result<f64, QuditError> {
    if t1_us <= 0.0 || t2s_us <= 0.0 {
        return Err(QuditError::Invariant(format!(
            "non-positive coherence times T1={t1_us} T2*={t2s_us}"
        )));
    }
    let rate = 1.0 / t2s_us - 1.0 / (2.0 * t1_us);
    if rate <= 0.0 {
        return Err(QuditError::Invariant(format!(
            "inconsistent pair T1={t1_us} T2*={t2s_us}: derived dephasing rate {rate} not positive"
        )));
    }
    Ok(1.0 / rate)
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), QuditError> {
        for (i, q) in self.qudits.iter().enumerate() {
            if q.t1_us <= 0.0 || q.tphi_us <= 0.0 || q.t1_working_us <= 0.0 || q.tphi_working_us <= 0.0 {
                return Err(QuditError::Invariant(format!(
                    "qudit {i}: non-positive T1 or Tphi"
                )));
            }
            if q.kappa < 1.0 {
                return Err(QuditError::Invariant(format!(
                    "qudit {i}: kappa {} < 1",
                    q.kappa
                )));
            }
        }
        for ell in [self.leak_1q, self.leak_cu, self.leak_cz] {
            if !(0.0..=0.01).contains(&ell) {
                return Err(QuditError::Invariant(format!(
                    "leak rate {ell} outside [0, 0.01]"
                )));
            }
        }
        Ok(())
    }

    /// Model built from a device parameter table, cycling over its qudits.
    pub fn from_device(
        cfg: &DeviceConfig,
        m: usize,
        decoherence: bool,
        leakage: bool,
        working_point_aware: bool,
    ) -> Result<NoiseModel, QuditError> {
        if cfg.qudits.is_empty() {
            return Err(QuditError::Invariant("device config has no qudits".into()));
        }
        let mut qudits = Vec::with_capacity(m);
        for i in 0..m {
            let d = &cfg.qudits[i % cfg.qudits.len()];
            qudits.push(QuditNoiseParams {
                t1_us: d.t1_us,
                kappa: 2f64.sqrt(),
                tphi_us: tphi_from_t2star(d.t1_us, d.t2_star_us)?,
                t1_working_us: d.t1_working_us,
                tphi_working_us: tphi_from_t2star(d.t1_working_us, d.t2_star_working_us)?,
            });
        }
        let model = NoiseModel {
            qudits,
            decoherence,
            leakage,
            working_point_aware,
            leak_1q: DEFAULT_LEAK_1Q,
            leak_cu: DEFAULT_LEAK_CU,
            leak_cz: DEFAULT_LEAK_CZ,
        };
        model.validate()?;
        Ok(model)
    }

    /// Default model for m qudits from the built-in device table.
    pub fn device_default(m: usize) -> NoiseModel {
        NoiseModel::from_device(&DeviceConfig::builtin(), m, true, true, false)
            .expect("built-in device table is consistent")
    }

    /// Uniform model (same parameters on every qudit), decoherence only.
    pub fn uniform(m: usize, t1_us: f64, tphi_us: f64) -> NoiseModel {
        NoiseModel {
            qudits: vec![
                QuditNoiseParams {
                    t1_us,
                    kappa: 2f64.sqrt(),
                    tphi_us,
                    t1_working_us: t1_us,
                    tphi_working_us: tphi_us,
                };
                m
            ],
            decoherence: true,
            leakage: false,
            working_point_aware: false,
            leak_1q: 0.0,
            leak_cu: 0.0,
            leak_cz: 0.0,
        }
    }

    fn rates(&self, q: usize, working: bool) -> (f64, f64, f64) {
        let p = &self.qudits[q % self.qudits.len()];
        let (t1, tphi) = if working && self.working_point_aware {
            (p.t1_working_us, p.tphi_working_us)
        } else {
            (p.t1_us, p.tphi_us)
        };
        let t1_ns = t1 * 1000.0;
        (1.0 / t1_ns, p.kappa / t1_ns, 1.0 / (tphi * 1000.0))
    }

    /// Single-site channel images of the matrix units |a><b| for a dt_ns
    /// idle. The |3> level (dim 4) is inert under decoherence.
    fn channel_factors(&self, q: usize, dt_ns: f64, working: bool, dim: usize) -> ChannelFactors {
        let (g1, g2, gphi) = self.rates(q, working);
        let t = dt_ns;
        let e1 = (-g1 * t).exp();
        let e2 = (-g2 * t).exp();
        // population transferred |2> -> |1> over the interval; the kappa=1
        // limit is the degenerate-rate form g*t*e^{-g*t}
        let eta = if (g2 - g1).abs() < 1e-12 * g1.max(g2) {
            g1 * t * e1
        } else {
            g2 * (e1 - e2) / (g2 - g1)
        };
        // dephasing amplitudes; |2>-related coherences damped at 4x the
        // exponent of the 0-1 coherence (quadratic level-sensitivity model)
        let d01 = (-gphi * t / 2.0).exp();
        let d2 = (-2.0 * gphi * t).exp();
        let amp_half = [1.0, e1.sqrt(), e2.sqrt(), 1.0];
        // |3> carries no phase noise of its own, like |0>; mapping it to 0
        // keeps the combined map completely positive
        let deph_class = |l: usize| if l == 3 { 0 } else { l };
        let mut coh = [[1.0f64; 4]; 4];
        for a in 0..dim.min(4) {
            for b in 0..dim.min(4) {
                if a == b {
                    continue;
                }
                let mut f = amp_half[a] * amp_half[b];
                let (x, y) = (deph_class(a), deph_class(b));
                let (lo, hi) = (x.min(y), x.max(y));
                if (lo, hi) == (0, 1) {
                    f *= d01;
                } else if hi == 2 {
                    f *= d2;
                }
                coh[a][b] = f;
            }
        }
        ChannelFactors {
            e1,
            e2,
            eta,
            coh,
        }
    }

    /// Apply the single-site decoherence channel to every site-index pair of
    /// the full density matrix in place.
    pub fn apply_decoherence_site(
        &self,
        rho: &mut DensityMatrix,
        site: usize,
        dt_ns: f64,
        working: bool,
    ) {
        if dt_ns <= 0.0 {
            return;
        }
        let space = rho.space.clone();
        let dim = space.dims()[site];
        let f = self.channel_factors(site, dt_ns, working, dim);
        let n = space.total_dim();
        let mut out: Array2<C64> = Array2::zeros((n, n));
        for r in 0..n {
            let lr = space.labels_of(r);
            for c in 0..n {
                let lc = space.labels_of(c);
                let (a, b) = (lr[site], lc[site]);
                let v = rho.matrix[[r, c]];
                if v == cr(0.0) {
                    continue;
                }
                if a != b {
                    out[[r, c]] += v * f.coh[a][b];
                    continue;
                }
                match a {
                    0 | 3 => out[[r, c]] += v,
                    1 => {
                        out[[r, c]] += v * f.e1;
                        let (r0, c0) = (relabel(&space, &lr, site, 0), relabel(&space, &lc, site, 0));
                        out[[r0, c0]] += v * (1.0 - f.e1);
                    }
                    2 => {
                        out[[r, c]] += v * f.e2;
                        let (r1, c1) = (relabel(&space, &lr, site, 1), relabel(&space, &lc, site, 1));
                        out[[r1, c1]] += v * f.eta;
                        let (r0, c0) = (relabel(&space, &lr, site, 0), relabel(&space, &lc, site, 0));
                        out[[r0, c0]] += v * (1.0 - f.e2 - f.eta);
                    }
                    _ => out[[r, c]] += v,
                }
            }
        }
        rho.matrix = out;
    }

    /// Per-gate leakage into |3> on one site (requires a 4-level site):
    /// K0 = diag(1, sqrt(1-l), sqrt(1-2l), 1), K1 = sqrt(l)|3><1|,
    /// K2 = sqrt(2l)|3><2|. Trace preserving.
    pub fn apply_leak_site(&self, rho: &mut DensityMatrix, site: usize, ell: f64) {
        if ell <= 0.0 {
            return;
        }
        let space = rho.space.clone();
        let dim = space.dims()[site];
        assert!(dim >= 4, "leakage channel needs a 4-level site");
        let g = [1.0, (1.0 - ell).sqrt(), (1.0 - 2.0 * ell).sqrt(), 1.0];
        let n = space.total_dim();
        let mut out: Array2<C64> = Array2::zeros((n, n));
        for r in 0..n {
            let lr = space.labels_of(r);
            for c in 0..n {
                let lc = space.labels_of(c);
                let (a, b) = (lr[site], lc[site]);
                let v = rho.matrix[[r, c]];
                if v == cr(0.0) {
                    continue;
                }
                out[[r, c]] += v * g[a] * g[b];
                // jump contributions land on the |3><3| sector
                let transfer = if a == 1 && b == 1 {
                    ell
                } else if a == 2 && b == 2 {
                    2.0 * ell
                } else {
                    0.0
                };
                if transfer > 0.0 {
                    let (r3, c3) = (relabel(&space, &lr, site, 3), relabel(&space, &lc, site, 3));
                    out[[r3, c3]] += v * transfer;
                }
            }
        }
        rho.matrix = out;
    }

    /// Kraus operators of the single-qudit decoherence channel for one
    /// scheduled moment, obtained from the channel's Choi matrix. The set is
    /// complete: sum K^dag K = identity within 1e-12.
    pub fn kraus_for_moment(
        &self,
        q: usize,
        dt_ns: f64,
        dim: usize,
        working: bool,
    ) -> Vec<Array2<C64>> {
        if dt_ns <= 0.0 {
            return vec![ndarray::Array2::from_diag_elem(dim, cr(1.0))];
        }
        let f = self.channel_factors(q, dt_ns, working, dim);
        // image of each matrix unit |a><b|
        let unit_image = |a: usize, b: usize| -> Array2<C64> {
            let mut m: Array2<C64> = Array2::zeros((dim, dim));
            if a != b {
                m[[a, b]] = cr(f.coh[a][b]);
                return m;
            }
            match a {
                1 => {
                    m[[1, 1]] = cr(f.e1);
                    m[[0, 0]] = cr(1.0 - f.e1);
                }
                2 => {
                    m[[2, 2]] = cr(f.e2);
                    m[[1, 1]] = cr(f.eta);
                    m[[0, 0]] = cr(1.0 - f.e2 - f.eta);
                }
                _ => m[[a, a]] = cr(1.0),
            }
            m
        };
        let n2 = dim * dim;
        let mut choi: Array2<C64> = Array2::zeros((n2, n2));
        for a in 0..dim {
            for b in 0..dim {
                let img = unit_image(a, b);
                for i in 0..dim {
                    for j in 0..dim {
                        choi[[i * dim + a, j * dim + b]] += img[[i, j]];
                    }
                }
            }
        }
        let (vals, vecs) = linalg::eigh(&choi);
        let mut kraus = Vec::new();
        for (k, &lam) in vals.iter().enumerate() {
            if lam < 1e-14 {
                continue;
            }
            let s = lam.sqrt();
            let mut km: Array2<C64> = Array2::zeros((dim, dim));
            for i in 0..dim {
                for a in 0..dim {
                    km[[i, a]] = vecs[[i * dim + a, k]] * s;
                }
            }
            kraus.push(km);
        }
        kraus
    }
}

fn relabel(space: &crate::qudit::HilbertSpace, labels: &[usize], site: usize, level: usize) -> usize {
    let mut l = labels.to_vec();
    l[site] = level;
    space.index_of(&l)
}

struct ChannelFactors {
    e1: f64,
    e2: f64,
    eta: f64,
    coh: [[f64; 4]; 4],
}

// ---------------------------------------------------------------------------
// Device parameter table
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceQudit {
    pub name: String,
    pub f01_ghz: f64,
    pub f12_ghz: f64,
    pub t1_us: f64,
    pub t2_star_us: f64,
    pub t1_working_us: f64,
    pub t2_star_working_us: f64,
}

/// Device parameter table (loadable from TOML; see `from_toml`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub qudits: Vec<DeviceQudit>,
}

impl DeviceConfig {
    pub fn from_toml(s: &str) -> Result<DeviceConfig, QuditError> {
        let cfg: DeviceConfig = toml::from_str(s)
            .map_err(|e| QuditError::Invariant(format!("device config parse error: {e}")))?;
        for q in &cfg.qudits {
            for v in [
                q.f01_ghz,
                q.f12_ghz,
                q.t1_us,
                q.t2_star_us,
                q.t1_working_us,
                q.t2_star_working_us,
            ] {
                if v <= 0.0 {
                    return Err(QuditError::Invariant(format!(
                        "device config: non-positive value for {}",
                        q.name
                    )));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("device config serialization")
    }

    /// Built-in four-transmon parameter table (idle and working points).
    pub fn builtin() -> DeviceConfig {
        let mk = |name: &str,
                  f01: f64,
                  f12: f64,
                  t1: f64,
                  t2s: f64,
                  t1w: f64,
                  t2sw: f64| DeviceQudit {
            name: name.to_string(),
            f01_ghz: f01,
            f12_ghz: f12,
            t1_us: t1,
            t2_star_us: t2s,
            t1_working_us: t1w,
            t2_star_working_us: t2sw,
        };
        DeviceConfig {
            qudits: vec![
                mk("Q1", 4.659, 4.421, 11.019, 6.051, 8.604, 1.403),
                mk("Q2", 4.280, 4.030, 10.677, 2.264, 11.777, 2.533),
                mk("Q3", 4.098, 3.852, 11.259, 3.134, 11.259, 3.134),
                mk("Q4", 3.954, 3.710, 13.512, 2.256, 13.512, 2.256),
            ],
        }
    }
}

// ---------------------------------------------------------------------------
// Decoherence comparison harness
// ---------------------------------------------------------------------------

/// One row of the comparison table: recovered population of the initial
/// state after an identity-composing sequence, per gate type.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub scan: String,
    pub t1_us: f64,
    pub tphi_us: f64,
    pub recovered_cz: f64,
    pub recovered_cu: f64,
    pub recovered_cnot: f64,
}

/// Recovered-population comparison of identity-composing two-qudit
/// sequences (CZ.CZ, CU(pi)^2, and a CZ-based conditional-NOT squared) under
/// pure relaxation (T1 scan, initial |11>) and pure dephasing (Tphi scan,
/// initial |1+>).
pub fn decoherence_comparison(t1_grid_us: &[f64], tphi_grid_us: &[f64]) -> Vec<ComparisonRow> {
    let (seq_cz, seq_cu, seq_cnot) = comparison_sequences();
    let (psi_t1, psi_tphi) = comparison_initial_states();
    const HUGE: f64 = 1e12;
    let mut rows = Vec::new();
    let mut eval = |scan: &str, t1: f64, tphi: f64, psi: &crate::qudit::StateVector| {
        let model = NoiseModel::uniform(2, t1, tphi);
        rows.push(ComparisonRow {
            scan: scan.to_string(),
            t1_us: t1,
            tphi_us: tphi,
            recovered_cz: recovered_population(&seq_cz, psi, &model),
            recovered_cu: recovered_population(&seq_cu, psi, &model),
            recovered_cnot: recovered_population(&seq_cnot, psi, &model),
        });
    };
    for &t1 in t1_grid_us {
        eval("t1", t1, HUGE, &psi_t1);
    }
    for &tphi in tphi_grid_us {
        eval("tphi", HUGE, tphi, &psi_tphi);
    }
    rows
}

/// Recovered population of `psi` after running `c` under `model`.
pub fn recovered_population(
    c: &crate::circuit::Circuit,
    psi: &crate::qudit::StateVector,
    model: &NoiseModel,
) -> f64 {
    let rho = crate::circuit::simulate(c, Some(psi), Some(model));
    let psi_cmp = if rho.space == psi.space {
        psi.clone()
    } else {
        crate::circuit::lift_state(psi, &rho.space)
    };
    crate::qudit::state_fidelity(&rho, &psi_cmp).unwrap()
}

/// The comparison's initial states: |11> for relaxation scans and |1+> for
/// dephasing scans.
pub fn comparison_initial_states() -> (crate::qudit::StateVector, crate::qudit::StateVector) {
    use crate::qudit::{HilbertSpace, StateVector};
    let space = HilbertSpace::qutrits(2);
    let psi_t1 = StateVector::basis(space.clone(), &[1, 1]);
    let psi_tphi = {
        let mut amps = ndarray::Array1::zeros(space.total_dim());
        let s = 1.0 / 2f64.sqrt();
        amps[space.index_of(&[1, 0])] = cr(s);
        amps[space.index_of(&[1, 1])] = cr(s);
        StateVector::new(space, amps).unwrap()
    };
    (psi_t1, psi_tphi)
}

/// Identity-composing two-qudit sequences used by the comparison:
/// CZ.CZ, CU(pi)^2, and a CZ-decomposed conditional-NOT squared.
pub fn comparison_sequences() -> (
    crate::circuit::Circuit,
    crate::circuit::Circuit,
    crate::circuit::Circuit,
) {
    use crate::circuit::{Circuit, ParamValue, Scheme};
    use std::f64::consts::PI;

    let seq_cz = {
        let mut c = Circuit::new_qutrits(2, Scheme::Cz);
        c.push2("cz", 0, 1, &[]);
        c.push2("cz", 0, 1, &[]);
        c
    };
    let seq_cu = {
        let mut c = Circuit::new_qutrits(2, Scheme::Cu);
        for _ in 0..2 {
            c.push2(
                "cu",
                0,
                1,
                &[("theta", ParamValue::Num(PI)), ("phi", ParamValue::Num(0.0))],
            );
        }
        c
    };
    let seq_cnot = {
        let mut c = Circuit::new_qutrits(2, Scheme::Cz);
        for _ in 0..2 {
            c.push1(
                "x01",
                1,
                &[("theta", ParamValue::Num(PI / 2.0)), ("phi", ParamValue::Num(PI / 2.0))],
            );
            c.push2("cz", 0, 1, &[]);
            c.push1(
                "x01",
                1,
                &[("theta", ParamValue::Num(PI / 2.0)), ("phi", ParamValue::Num(-PI / 2.0))],
            );
        }
        c
    };
    (seq_cz, seq_cu, seq_cnot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dagger;
    use crate::qudit::{HilbertSpace, StateVector};
    use ndarray::Array2;

    fn single_site_rho(dim: usize, level: usize) -> DensityMatrix {
        let space = HilbertSpace::new(vec![dim]);
        StateVector::basis(space, &[level]).to_density()
    }

    #[test]
    fn idle_level_one_decays_exponentially() {
        let model = NoiseModel::uniform(1, 10.0, 1e12);
        let mut rho = single_site_rho(3, 1);
        let dt = 90.0;
        model.apply_decoherence_site(&mut rho, 0, dt, false);
        let p1 = rho.matrix[[1, 1]].re;
        let expect = (-dt / 10_000.0).exp();
        assert!((p1 - expect).abs() < 1e-12);
        // the transferred population lands on |0>
        assert!((rho.matrix[[0, 0]].re - (1.0 - expect)).abs() < 1e-12);
        // p1 example: 1 - e^{-0.009}
        assert!(((1.0 - expect) - 0.008_959_6).abs() < 1e-6);
    }

    #[test]
    fn level_two_decays_faster_by_kappa() {
        let model = NoiseModel::uniform(1, 10.0, 1e12);
        let mut rho = single_site_rho(3, 2);
        let dt = 500.0;
        model.apply_decoherence_site(&mut rho, 0, dt, false);
        let expect = (-2f64.sqrt() * dt / 10_000.0).exp();
        assert!((rho.matrix[[2, 2]].re - expect).abs() < 1e-12);
        // cascade: some population is caught in |1>, the rest reaches |0>
        assert!(rho.matrix[[1, 1]].re > 0.0);
        let tr: f64 = (0..3).map(|i| rho.matrix[[i, i]].re).sum();
        assert!((tr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_one_degenerate_rates() {
        let mut model = NoiseModel::uniform(1, 10.0, 1e12);
        model.qudits[0].kappa = 1.0;
        let mut rho = single_site_rho(3, 2);
        model.apply_decoherence_site(&mut rho, 0, 300.0, false);
        let g: f64 = 300.0 / 10_000.0;
        assert!((rho.matrix[[2, 2]].re - (-g).exp()).abs() < 1e-12);
        assert!((rho.matrix[[1, 1]].re - g * (-g).exp()).abs() < 1e-9);
    }

    #[test]
    fn semigroup_property() {
        let model = NoiseModel::uniform(1, 7.0, 1e12);
        let space = HilbertSpace::new(vec![3]);
        let mut amps = ndarray::Array1::zeros(3);
        amps[0] = cr(0.4f64.sqrt());
        amps[1] = cr(0.3f64.sqrt());
        amps[2] = cr(0.3f64.sqrt());
        let psi = StateVector::new(space, amps).unwrap();
        let mut a = psi.to_density();
        model.apply_decoherence_site(&mut a, 0, 130.0, false);
        model.apply_decoherence_site(&mut a, 0, 270.0, false);
        let mut b = psi.to_density();
        model.apply_decoherence_site(&mut b, 0, 400.0, false);
        assert!(crate::linalg::max_abs_diff(&a.matrix, &b.matrix) < 1e-10);
    }

    #[test]
    fn kraus_complete_and_matches_elementwise() {
        let model = NoiseModel::device_default(1);
        for dim in [3usize, 4] {
            for dt in [30.0, 90.0, 400.0] {
                let kraus = model.kraus_for_moment(0, dt, dim, false);
                let mut comp: Array2<C64> = Array2::zeros((dim, dim));
                for k in &kraus {
                    comp = comp + dagger(k).dot(k);
                }
                let eye = Array2::from_diag_elem(dim, cr(1.0));
                assert!(
                    crate::linalg::max_abs_diff(&comp, &eye) < 1e-12,
                    "completeness dim={dim} dt={dt}"
                );
                // Kraus application equals the element-wise channel
                let space = HilbertSpace::new(vec![dim]);
                let mut amps = ndarray::Array1::zeros(dim);
                let w = 1.0 / (dim as f64).sqrt();
                for i in 0..dim {
                    amps[i] = cr(w) * crate::linalg::cis(0.3 * i as f64);
                }
                let psi = StateVector::new(space, amps).unwrap();
                let mut via_elem = psi.to_density();
                model.apply_decoherence_site(&mut via_elem, 0, dt, false);
                let rho0 = psi.to_density();
                let mut via_kraus: Array2<C64> = Array2::zeros((dim, dim));
                for k in &kraus {
                    via_kraus = via_kraus + k.dot(&rho0.matrix).dot(&dagger(k));
                }
                assert!(
                    crate::linalg::max_abs_diff(&via_elem.matrix, &via_kraus) < 1e-10,
                    "kraus/elementwise mismatch dim={dim} dt={dt}"
                );
            }
        }
    }

    #[test]
    fn zero_dt_identity_kraus() {
        let model = NoiseModel::device_default(1);
        let kraus = model.kraus_for_moment(0, 0.0, 3, false);
        assert_eq!(kraus.len(), 1);
        let eye = Array2::from_diag_elem(3, cr(1.0));
        assert!(crate::linalg::max_abs_diff(&kraus[0], &eye) < 1e-15);
    }

    #[test]
    fn leak_channel_preserves_trace() {
        let model = NoiseModel::device_default(1);
        let space = HilbertSpace::new(vec![4]);
        let mut amps = ndarray::Array1::zeros(4);
        amps[1] = cr(0.6f64.sqrt());
        amps[2] = cr(0.4f64.sqrt());
        let psi = StateVector::new(space, amps).unwrap();
        let mut rho = psi.to_density();
        model.apply_leak_site(&mut rho, 0, 1e-3);
        let tr: f64 = (0..4).map(|i| rho.matrix[[i, i]].re).sum();
        assert!((tr - 1.0).abs() < 1e-12);
        let expect3 = 1e-3 * 0.6 + 2e-3 * 0.4;
        assert!((rho.matrix[[3, 3]].re - expect3).abs() < 1e-12);
    }

    #[test]
    fn invalid_t2_star_rejected() {
        // T2* above the 2*T1 relaxation limit has no positive dephasing rate
        assert!(tphi_from_t2star(10.0, 25.0).is_err());
        assert!(tphi_from_t2star(10.0, 15.0).is_ok());
    }

    #[test]
    fn builtin_device_roundtrips_through_toml() {
        let cfg = DeviceConfig::builtin();
        let s = cfg.to_toml();
        let back = DeviceConfig::from_toml(&s).unwrap();
        assert_eq!(cfg, back);
        let model = NoiseModel::from_device(&cfg, 3, true, true, true).unwrap();
        assert_eq!(model.qudits.len(), 3);
        assert!(model.qudits[0].tphi_us > 0.0);
    }

    #[test]
    fn comparison_ordering_and_monotonicity() {
        let t1s = [5.0, 10.0, 20.0, 1e9];
        let tphis = [2.0, 8.0, 32.0, 1e9];
        let rows = decoherence_comparison(&t1s, &tphis);
        for scan in ["t1", "tphi"] {
            let mut prev = (0.0, 0.0, 0.0);
            for row in rows.iter().filter(|r| r.scan == scan) {
                assert!(row.recovered_cz >= prev.0, "{row:?}");
                assert!(row.recovered_cu >= prev.1, "{row:?}");
                assert!(row.recovered_cnot >= prev.2, "{row:?}");
                prev = (row.recovered_cz, row.recovered_cu, row.recovered_cnot);
            }
        }
        // near-infinite times recover the state completely
        let last_t1 = rows.iter().filter(|r| r.scan == "t1").last().unwrap();
        assert!(last_t1.recovered_cnot > 1.0 - 1e-6);
        let last_tphi = rows.iter().filter(|r| r.scan == "tphi").last().unwrap();
        assert!(last_tphi.recovered_cnot > 1.0 - 1e-6);
    }

    #[test]
    fn comparison_ordering_at_device_parameters() {
        // under the full default model (decoherence plus per-gate leakage)
        // the bare CZ recovers best, and the composite conditional rotation
        // edges out the CZ-decomposed conditional-NOT
        let model = NoiseModel::device_default(2);
        let (seq_cz, seq_cu, seq_cnot) = comparison_sequences();
        let (psi_t1, psi_tphi) = comparison_initial_states();
        for psi in [&psi_t1, &psi_tphi] {
            let f_cz = recovered_population(&seq_cz, psi, &model);
            let f_cu = recovered_population(&seq_cu, psi, &model);
            let f_cnot = recovered_population(&seq_cnot, psi, &model);
            assert!(
                f_cz >= f_cu && f_cu >= f_cnot,
                "cz={f_cz} cu={f_cu} cnot={f_cnot}"
            );
        }
    }
}
