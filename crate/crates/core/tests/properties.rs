use num_complex::Complex64 as C64;
use proptest::prelude::*;
use qantenna_core::cloud::sample;
use qantenna_core::coupling::{landau_zener_probability, CouplingSet};
use qantenna_core::link::{bell_measure, entanglement_rate, AtomPhotonState};
use qantenna_core::retrieval::{retrieval_kernel, RetrievalParams};
use qantenna_core::write::{propagate, simulate_collective, simulate_write};
use qantenna_core::*;

fn sweep(t_total: f64, delta: f64) -> PulseSchedule {
    PulseSchedule {
        t_total,
        t_ramp: 0.2 * t_total,
        t_fall: 0.1 * t_total,
        delta_start: delta,
        delta_end: -delta,
        shape: PulseShape::Sin2RampHold,
    }
}

fn state(v: [f64; 8]) -> Option<AtomPhotonState> {
    let mut s = AtomPhotonState {
        amp: [[C64::new(0.0, 0.0); 2]; 2],
    };
    for k in 0..4 {
        s.amp[k / 2][k % 2] = C64::new(v[2 * k], v[2 * k + 1]);
    }
    let n = s.norm().sqrt();
    if n < 1e-3 {
        return None;
    }
    for row in s.amp.iter_mut() {
        for a in row.iter_mut() {
            *a /= n;
        }
    }
    Some(s)
}

fn couplings() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec((-30.0..30.0f64, -200.0..200.0f64), 1..12)
        .prop_map(|v| v.into_iter().unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lossless_write_conserves_norm((d, shift) in couplings(), delta in 0.0..120.0f64) {
        let set = CouplingSet::synthetic(d, shift).unwrap();
        let r = simulate_write(&set, &sweep(1.0, delta), &WriteOptions::default()).unwrap();
        for n in &r.norm {
            prop_assert!((n - 1.0).abs() < 1e-6, "norm {n}");
        }
    }

    #[test]
    fn decay_accounts_for_lost_weight((d, shift) in couplings(), gamma in 0.0..0.5f64) {
        let set = CouplingSet::synthetic(d, shift).unwrap();
        let opts = WriteOptions { slaving_ratio: None, ..WriteOptions::with_gamma(gamma) };
        let r = simulate_write(&set, &sweep(1.0, 60.0), &opts).unwrap();
        for (n, l) in r.norm.iter().zip(&r.loss) {
            prop_assert!((n + l - 1.0).abs() < 1e-6);
            prop_assert!(*n <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn forward_then_backward_is_identity((d, shift) in couplings(), t in 0.2..1.0f64) {
        let set = CouplingSet::synthetic(d, shift).unwrap();
        let sched = sweep(1.0, 60.0);
        let opts = WriteOptions::default();
        let mut y0 = vec![C64::new(0.0, 0.0); set.len() + 1];
        y0[0] = C64::new(1.0, 0.0);
        let fwd = propagate(&set, &sched, &opts, &y0, 0.0, t).unwrap();
        let back = propagate(&set, &sched, &opts, &fwd, t, 0.0).unwrap();
        for (a, b) in back.iter().zip(&y0) {
            prop_assert!((a - b).norm() < 1e-5);
        }
    }

    #[test]
    fn landau_zener_decreases_with_coupling(d in 0.1..40.0f64, extra in 0.01..10.0f64, alpha in 10.0..1e4f64) {
        let a = landau_zener_probability(d, alpha).unwrap();
        let b = landau_zener_probability(d + extra, alpha).unwrap();
        prop_assert!(b <= a);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn slower_sweeps_transfer_more(d in 5.0..20.0f64) {
        let opts = WriteOptions { n_output: 2, ..WriteOptions::default() };
        let model = TwoLevelEff { d_bar: d, delta_tilde: 0.0 };
        let mut last = 0.0;
        for t in [0.5, 2.0, 8.0] {
            let s = PulseSchedule { t_ramp: 0.0, t_fall: 0.0, shape: PulseShape::Constant, ..sweep(t, 4000.0) };
            let eta = simulate_collective(&model, &s, &opts).unwrap().eta_w;
            prop_assert!(eta >= last - 1e-3, "eta {eta} after {last}");
            last = eta;
        }
    }

    #[test]
    fn sampled_clouds_stay_finite(n in 1usize..300, sp in 1.0..10.0f64, sz in 1.0..50.0f64, seed: u64) {
        let g = CloudGeometry { n_atoms: n, sigma_perp: sp, sigma_z: sz, center: [0.0; 3] };
        let c = sample(&g, seed).unwrap();
        prop_assert_eq!(c.len(), n);
        prop_assert!(c.positions.iter().all(|r| r.x.is_finite() && r.y.is_finite() && r.z.is_finite()));
        prop_assert!(g.peak_density() > 0.0);
        prop_assert!(g.unit_density_at(&Vec3::new(0.0, 0.0, 0.0)) >= g.unit_density_at(&Vec3::new(sp, 0.0, sz)));
    }

    #[test]
    fn bell_probabilities_sum_to_one(a in prop::array::uniform8(-1.0..1.0f64), b in prop::array::uniform8(-1.0..1.0f64)) {
        let (Some(a), Some(b)) = (state(a), state(b)) else { return Ok(()) };
        let out = bell_measure(&a, &b).unwrap();
        let total: f64 = out.iter().map(|o| o.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(out.iter().all(|o| o.probability >= -1e-15));
    }

    #[test]
    fn identical_photons_never_herald(re in -1.0..1.0f64, im in -1.0..1.0f64, pol in 0usize..2) {
        // Photons in the same polarization bunch at the beam splitter.
        let mut s = AtomPhotonState { amp: [[C64::new(0.0, 0.0); 2]; 2] };
        s.amp[0][pol] = C64::new(re, im);
        s.amp[1][pol] = C64::new(im, -re);
        let Some(s) = state([s.amp[0][0].re, s.amp[0][0].im, s.amp[0][1].re, s.amp[0][1].im,
                             s.amp[1][0].re, s.amp[1][0].im, s.amp[1][1].re, s.amp[1][1].im]) else { return Ok(()) };
        let herald: f64 = bell_measure(&s, &s).unwrap().iter().filter(|o| o.herald.is_some()).map(|o| o.probability).sum();
        prop_assert!(herald.abs() < 1e-12);
    }

    #[test]
    fn kernel_is_hermitian(od in 0.5..20.0f64, delta in -3.0..3.0f64, z in 0.0..1.0f64, zp in 0.0..1.0f64, z_s in 0.0..0.5f64) {
        let p = RetrievalParams { od, delta_norm: delta, z_s, omega_c: 60.0, gamma_e: 40.0, g_root_n: 100.0 };
        let a = retrieval_kernel(&p, z, zp);
        let b = retrieval_kernel(&p, zp, z);
        prop_assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn rate_grows_with_success_probability(p in 0.0..0.5f64, q in 0.0..0.5f64, every in 1u32..100) {
        let model = RateModel { prep_every: every, ..Experiment::reference().rate };
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        let a = entanglement_rate(lo, &model).unwrap();
        let b = entanglement_rate(hi, &model).unwrap();
        prop_assert!(a.practical_rate_hz <= b.practical_rate_hz);
        prop_assert!(a.practical_rate_hz <= a.ideal_rate_hz);
    }

    #[test]
    fn config_round_trips(n in 1usize..2000, sp in 0.5..20.0f64, seed: u64, omega in 0.1..50.0f64) {
        let mut cfg = ExperimentConfig::default();
        cfg.ensemble.n_atoms = n;
        cfg.ensemble.sigma_perp_um = sp;
        cfg.mc.master_seed = seed;
        cfg.channels.up.omega_max_2pi_mhz = omega;
        let back = ExperimentConfig::from_json_str(&cfg.to_json()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_experiment().unwrap(), cfg.to_experiment().unwrap());
    }
}
