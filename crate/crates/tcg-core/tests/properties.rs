//! Randomized invariant checks for the composer, scheduler, noise
//! channels, and serialization layer.

use proptest::prelude::*;
use std::f64::consts::PI;
use tcg_core::circuit::{
    self, expand_composites, schedule, simulate, simulate_state, Circuit, ParamValue, Scheme,
};
use tcg_core::composer;
use tcg_core::gates;
use tcg_core::linalg::{self, cis};
use tcg_core::noise::NoiseModel;
use tcg_core::qudit::{distance_up_to_global_phase, HilbertSpace, StateVector};
use tcg_core::tomography::sample_counts;

fn angle() -> impl Strategy<Value = f64> {
    0.0..(2.0 * PI)
}

/// Random small circuit over two qutrits using the public gate vocabulary.
fn small_circuit() -> impl Strategy<Value = Circuit> {
    let gate = prop_oneof![
        (angle(), angle()).prop_map(|(t, p)| ("x01", 0usize, vec![("theta", t), ("phi", p)])),
        (angle(), angle()).prop_map(|(t, p)| ("x12", 1usize, vec![("theta", t), ("phi", p)])),
        (angle(), angle()).prop_map(|(t, p)| ("cu", 2usize, vec![("theta", t), ("phi", p)])),
        (angle(), angle()).prop_map(|(t, p)| ("spcu", 2usize, vec![("theta", t), ("phi", p)])),
        Just(("cz", 2usize, vec![])),
    ];
    prop::collection::vec(gate, 1..6).prop_map(|ops| {
        let mut c = Circuit::new_qutrits(2, Scheme::Tcg);
        for (name, arity, params) in ops {
            let ps: Vec<(&str, ParamValue)> = params
                .iter()
                .map(|(k, v)| (*k, ParamValue::Num(*v)))
                .collect();
            if arity == 2 {
                c.push2(name, 0, 1, &ps);
            } else {
                c.push1(name, arity, &ps);
            }
        }
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The conditional-rotation composite is unitary, leaves the
    /// computational subspace invariant, and its restricted block is
    /// unitary for every angle pair.
    #[test]
    fn composed_cu_is_unitary_and_leak_free(theta in angle(), phi in angle()) {
        let g = composer::cu(theta, phi);
        prop_assert!(g.operator.unitary);
        prop_assert!(linalg::is_unitary(&g.restricted, 1e-10));
        // no amplitude may connect computational and excursion labels
        let space = HilbertSpace::qutrits(2);
        let comp = space.computational_indices();
        for &i in &comp {
            for j in 0..space.total_dim() {
                if !comp.contains(&j) {
                    prop_assert!(g.operator.matrix[[i, j]].norm() < 1e-12);
                    prop_assert!(g.operator.matrix[[j, i]].norm() < 1e-12);
                }
            }
        }
    }

    /// ZYZ decomposition reproduces any dressed SU(2) rotation.
    #[test]
    fn zyz_roundtrip(alpha in angle(), b in angle(), g in angle(), d in angle()) {
        let u = gates::su2_matrix(alpha, b, g, d);
        let (a2, b2, g2, d2) = gates::zyz(&u);
        let v = gates::su2_matrix(a2, b2, g2, d2);
        prop_assert!(linalg::max_abs_diff(&u, &v) < 1e-9);
    }

    /// Earliest-start scheduling uses each site at most once per moment
    /// and keeps every operation exactly once, in program order per site.
    #[test]
    fn schedule_moments_are_disjoint(c in small_circuit()) {
        let sched = schedule(&c);
        let mut seen = vec![false; c.ops.len()];
        for moment in &sched.moments {
            let mut used = std::collections::HashSet::new();
            for &k in moment {
                prop_assert!(!seen[k]);
                seen[k] = true;
                for &s in &c.ops[k].sites {
                    prop_assert!(used.insert(s));
                }
            }
        }
        prop_assert!(seen.iter().all(|&x| x));
        prop_assert!(sched.moments.len() <= c.ops.len());
    }

    /// Circuit JSON serialization round-trips exactly.
    #[test]
    fn circuit_json_roundtrip(c in small_circuit()) {
        let s = c.to_json();
        let c2 = Circuit::from_json(&s).unwrap();
        prop_assert_eq!(&c, &c2);
        prop_assert_eq!(s, c2.to_json());
    }

    /// Expanding composites into pulse-level gates preserves the circuit
    /// action on every computational basis state up to global phase.
    #[test]
    fn composite_expansion_preserves_action(c in small_circuit()) {
        let expanded = expand_composites(&c);
        let space = c.space();
        for &idx in &space.computational_indices() {
            let labels = space.labels_of(idx);
            let psi = StateVector::basis(space.clone(), &labels);
            let a = simulate_state(&c, &psi);
            let b = simulate_state(&expanded, &psi);
            // align a to b by the phase of their overlap, then compare
            let overlap: num_complex::Complex64 =
                a.amps.iter().zip(b.amps.iter()).map(|(x, y)| y.conj() * x).sum();
            let gamma = if overlap.norm() > 1e-12 { -overlap.arg() } else { 0.0 };
            let dist = a
                .amps
                .iter()
                .zip(b.amps.iter())
                .map(|(x, y)| (x * cis(gamma) - y).norm())
                .fold(0.0f64, f64::max);
            prop_assert!(dist < 1e-9);
        }
    }

    /// Noisy evolution returns a physical state: unit trace, Hermitian,
    /// non-negative populations.
    #[test]
    fn noisy_simulation_stays_physical(c in small_circuit(), t1 in 5.0..50.0f64, tphi in 1.0..20.0f64) {
        let mut model = NoiseModel::uniform(2, t1, tphi);
        model.leakage = true;
        let rho = simulate(&c, None, Some(model).as_ref());
        let tr = rho.trace();
        prop_assert!((tr.re - 1.0).abs() < 1e-9 && tr.im.abs() < 1e-12);
        let n = rho.space.total_dim();
        for i in 0..n {
            prop_assert!(rho.matrix[[i, i]].re > -1e-10);
            prop_assert!(rho.matrix[[i, i]].im.abs() < 1e-12);
            for j in 0..n {
                let d = rho.matrix[[i, j]] - rho.matrix[[j, i]].conj();
                prop_assert!(d.norm() < 1e-10);
            }
        }
    }

    /// The relaxation-and-dephasing channel is a semigroup: evolving for
    /// dt twice equals evolving once for 2 dt.
    #[test]
    fn decoherence_composes_as_semigroup(t1 in 5.0..50.0f64, tphi in 1.0..20.0f64, dt in 1.0..200.0f64) {
        let model = NoiseModel::uniform(1, t1, tphi);
        let space = HilbertSpace::qutrits(1);
        let mut amps = ndarray::Array1::zeros(3);
        let s = 1.0 / 3f64.sqrt();
        for i in 0..3 { amps[i] = linalg::cr(s); }
        let psi = StateVector::new(space, amps).unwrap();
        let mut a = psi.to_density();
        model.apply_decoherence_site(&mut a, 0, dt, false);
        model.apply_decoherence_site(&mut a, 0, dt, false);
        let mut b = psi.to_density();
        model.apply_decoherence_site(&mut b, 0, 2.0 * dt, false);
        prop_assert!(linalg::max_abs_diff(&a.matrix, &b.matrix) < 1e-10);
    }

    /// Sampling is deterministic in the seed and conserves shots.
    #[test]
    fn sampling_is_seeded_and_conserving(seed in any::<u64>(), w in 0.0..1.0f64) {
        let probs = [w / 2.0, (1.0 - w) / 2.0, 0.25, 0.25];
        let a = sample_counts(&probs, 10_000, seed);
        let b = sample_counts(&probs, 10_000, seed);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.iter().sum::<u64>(), 10_000);
    }

    /// Global-phase-invariant distance ignores a pure phase and is
    /// symmetric under it.
    #[test]
    fn global_phase_distance_ignores_phase(theta in angle(), phi in angle(), gamma in angle()) {
        let g = composer::cu(theta, phi);
        let shifted = tcg_core::qudit::Operator::new(
            g.operator.space.clone(),
            g.operator.matrix.mapv(|z| z * cis(gamma)),
        );
        let (dist, aligned) = distance_up_to_global_phase(&shifted, &g.operator);
        prop_assert!(aligned);
        prop_assert!(dist < 1e-9);
    }

    /// Exact truth tables are stochastic: non-negative columns summing to
    /// at most one (one exactly, absent leakage).
    #[test]
    fn truth_table_columns_are_distributions(theta in angle(), phi in angle()) {
        let mut c = Circuit::new_qutrits(2, Scheme::Cu);
        c.push2("cu", 0, 1, &[("theta", ParamValue::Num(theta)), ("phi", ParamValue::Num(phi))]);
        let t = circuit::truth_table(&c, None, 0);
        for j in 0..4 {
            let mut s = 0.0;
            for i in 0..4 {
                prop_assert!(t[[i, j]] >= -1e-12);
                s += t[[i, j]];
            }
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
