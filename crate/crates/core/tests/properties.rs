mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wiener_fb::experiments::*;
use wiener_fb::mrmat::pseudoinverse;
use wiener_fb::pr::*;
use wiener_fb::runtime::{ensemble, modulated_noise, run_pipeline};
use wiener_fb::stochastic::SignalModel;
use wiener_fb::wiener::{
    assemble_normal_equations, min_mse_channel, mse_vs_delay, quadratic_form_matrix, solve,
    WienerProblem,
};
use wiener_fb::{to_db, Error, Vector};

fn selector_vectors(m: usize, len: usize, delay: usize, c: f64) -> Vec<Vector> {
    (0..m)
        .map(|i| {
            let mut v = Vector::zeros(len);
            if i + delay < len {
                v[i + delay] = c;
            }
            v
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pseudocirculant_paths_agree(
        m in 1usize..5,
        extra in 0usize..6,
        delay in 0usize..8,
        c in prop_oneof![-3.0..-0.1f64, 0.1..3.0f64],
        tweaks in prop::collection::vec((0usize..64, 0usize..4, -1.0..1.0f64, 0u8..4), 0..4),
    ) {
        let len = m + extra + 2;
        let mut s = selector_vectors(m, len, delay, c);
        let tol = 1e-6;
        for (pos, row, amount, kind) in tweaks {
            let row = row % m;
            let pos = pos % len;
            // Perturbations straddling the classification threshold.
            let scale = match kind {
                0 => 0.5 * tol,
                1 => 2.0 * tol,
                2 => 1.0,
                _ => tol,
            };
            s[row][pos] += amount * scale * c.abs();
        }
        let direct = check_pseudocirculant(&s, tol);
        let structural = check_pseudocirculant_properties(&s, tol);
        prop_assert_eq!(direct, structural);
    }
}

#[test]
fn random_feasible_banks_reconstruct_and_perturbation_breaks_it() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut tested = 0;
    while tested < 10 {
        let m = rng.random_range(2..=3);
        let l = m + rng.random_range(1..=2);
        let p = rng.random_range(2..=4);
        let bank = common::bank(&mut rng, m, l, 6);
        let k = bank.build_k(p).unwrap();
        let cert = pr_feasibility(&k, DEFAULT_TOLERANCE).unwrap();
        if !cert.feasible {
            continue;
        }
        let (lo, hi) = cert.delay_range.unwrap();
        let d = rng.random_range(lo..=hi);
        let w = common::vector(&mut rng, k.stacked_len());
        let sol = pr_solution(&k, d, 1.0, Some(&w), DEFAULT_TOLERANCE).unwrap();
        let product = polyphase_product(&k, &sol).unwrap();
        let check = check_pseudocirculant(&product.s, 1e-8);
        assert!(check.pass && check.delay == d);

        let u = common::taps(&mut rng, 1000);
        let run = run_pipeline(&bank, &sol, &u).unwrap();
        assert_eq!(
            run.overall_delay(),
            reconstruction_identity(&check, m).unwrap()
        );
        assert!(run.max_error(true) <= 1e-9, "error {}", run.max_error(true));

        let mut bad = sol.clone();
        let col = rng.random_range(0..k.stacked_len());
        bad.rows[(0, col)] += 1e-3;
        let product = polyphase_product(&k, &bad).unwrap();
        assert!(!check_pseudocirculant(&product.s, 1e-8).pass);
        assert!(!check_pseudocirculant_properties(&product.s, 1e-8).pass);
        let run = run_pipeline(&bank, &bad, &u).unwrap();
        assert!(run.max_error(true) > 1e-6);
        tested += 1;
    }
}

#[test]
fn elt_pr_delay_is_sharp() {
    let k = elt_bank_default().build_k(EXP2_SYNTHESIS_LEN).unwrap();
    for d in [10, 11, 13] {
        assert!(matches!(
            pr_solution(&k, d, 1.0, None, DEFAULT_TOLERANCE),
            Err(Error::DelayOutOfRange { .. })
        ));
    }
    let sol = pr_solution(&k, 12, 1.0, None, DEFAULT_TOLERANCE).unwrap();
    let check = check_pseudocirculant(&polyphase_product(&k, &sol).unwrap().s, 1e-8);
    assert_eq!(reconstruction_identity(&check, 4).unwrap(), 15);
    // The pipeline confirms the alignment: only lag 15 reproduces the input.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = common::taps(&mut rng, 400);
    let run = run_pipeline(&elt_bank_default(), &sol, &u).unwrap();
    let start = run.transient_samples();
    let best = (0..30)
        .min_by(|&a, &b| {
            let err = |lag: usize| -> f64 {
                (start..u.len())
                    .map(|n| (run.reconstructed[n] - u[n - lag.min(n)]).abs())
                    .fold(0.0, f64::max)
            };
            err(a).total_cmp(&err(b))
        })
        .unwrap();
    assert_eq!(best, 15);
    assert!(run.max_error(false) < 1e-9);
}

#[test]
fn exp3_certificate_and_null_space() {
    let k = exp3_blocked().build_k(EXP3_SYNTHESIS_LEN).unwrap();
    let cert = certify(&k, Some(0), 1.0, DEFAULT_TOLERANCE).unwrap();
    assert!(cert.feasible && cert.admits_delay(0));
    assert_eq!(cert.pseudocirculant_pass, Some(true));
    assert!(nullspace_structure_check(&k, &cert, 1e-8).unwrap());
    let sol = pr_solution(&k, 0, 1.0, None, DEFAULT_TOLERANCE).unwrap();
    let check = check_pseudocirculant_properties(&polyphase_product(&k, &sol).unwrap().s, 1e-8);
    assert_eq!(reconstruction_identity(&check, 6).unwrap(), 5);
}

#[test]
fn exp1_bank_is_not_pr() {
    let k = exp1_bank_default().build_k(EXP1_SYNTHESIS_LEN).unwrap();
    assert!(!pr_feasibility(&k, DEFAULT_TOLERANCE).unwrap().feasible);
}

#[test]
fn blocked_nufb_reproduces_native_subbands() {
    let nufb = exp3_nufb();
    let ufb = exp3_blocked();
    let k = ufb.build_k(1).unwrap();
    let sol = solve(
        &WienerProblem::new(k, &SignalModel::white(1.0), 0).unwrap(),
        None,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u = modulated_noise(300, &mut rng);
    let run = run_pipeline(&ufb, &sol, &u).unwrap();
    let native = |ch: usize, t: isize| -> f64 {
        let c = &nufb.channels()[ch];
        if t < 0 {
            return 0.0;
        }
        let base = c.decimation as isize * t;
        c.taps
            .iter()
            .enumerate()
            .filter_map(|(k, h)| {
                let idx = base - k as isize;
                (idx >= 0).then(|| h * u[idx as usize])
            })
            .sum()
    };
    let mut g = 0;
    for (ch, &mi) in EXP3_DECIMATIONS.iter().enumerate() {
        for l in 0..6 / mi {
            for n in 0..run.blocks() {
                let t = (6 / mi * n) as isize - l as isize;
                assert!((run.subbands[g][n] - native(ch, t)).abs() < 1e-12);
            }
            g += 1;
        }
    }
}

#[test]
fn pipeline_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let m = rng.random_range(1..=4);
        let l = rng.random_range(1..=4);
        let bank = common::bank(&mut rng, m, l, 7);
        let k = bank.build_k(rng.random_range(1..=4)).unwrap();
        let sol = solve(
            &WienerProblem::new(k, &common::ar_model(&mut rng), 1).unwrap(),
            None,
        )
        .unwrap();
        let u1 = common::taps(&mut rng, 300);
        let u2 = common::taps(&mut rng, 300);
        let alpha = 1.7;
        let mix: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| alpha * a + b).collect();
        let r1 = run_pipeline(&bank, &sol, &u1).unwrap();
        let r2 = run_pipeline(&bank, &sol, &u2).unwrap();
        let rm = run_pipeline(&bank, &sol, &mix).unwrap();
        let scale = rm.reconstructed.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        for n in 0..mix.len() {
            let lin = alpha * r1.reconstructed[n] + r2.reconstructed[n];
            assert!((rm.reconstructed[n] - lin).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn factored_and_literal_mse_agree_when_well_conditioned() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut checked = 0;
    while checked < 20 {
        let m = rng.random_range(1..=3);
        let l = rng.random_range(1..=3);
        let bank = common::bank(&mut rng, m, l, 5);
        let k = bank.build_k(rng.random_range(1..=3)).unwrap();
        let prob = WienerProblem::new(
            k.clone(),
            &common::ar_model(&mut rng),
            rng.random_range(0..6),
        )
        .unwrap();
        let (a, b) = assemble_normal_equations(&prob).unwrap();
        let sv = a.clone().svd(false, false).singular_values;
        let nonzero: Vec<f64> = sv
            .iter()
            .copied()
            .filter(|&x| x > 1e-10 * sv.max())
            .collect();
        if nonzero.iter().copied().fold(f64::INFINITY, f64::min) < 1e-4 * sv.max() {
            continue;
        }
        let sol = solve(&prob, None).unwrap();
        let pinv = pseudoinverse(&a).unwrap();
        for (i, bi) in b.iter().enumerate() {
            let literal = min_mse_channel(&prob, &pinv, bi);
            assert!((literal - sol.channel_mse.as_ref().unwrap()[i]).abs() < 1e-9);
        }
        let literal_b = k.as_matrix().transpose() * &pinv * k.as_matrix();
        let factored = quadratic_form_matrix(&k, prob.correlation().ruu()).unwrap();
        let ruu = prob.correlation().ruu();
        // Both agree on the range of R_uu.
        assert!((ruu * (&literal_b - &factored) * ruu).amax() < 1e-8);
        checked += 1;
    }
}

#[test]
fn delay_scan_matches_direct_solves() {
    let k = exp1_bank_default().build_k(EXP1_SYNTHESIS_LEN).unwrap();
    let model = exp1_model();
    let scan = mse_vs_delay(&k, &model, &EXP1_DELAYS).unwrap();
    for entry in &scan.entries {
        let sol = solve(
            &WienerProblem::new(k.clone(), &model, entry.delay).unwrap(),
            None,
        )
        .unwrap();
        for (a, b) in entry
            .channel_mse
            .iter()
            .zip(sol.channel_mse.as_ref().unwrap())
        {
            assert!(
                (a - b).abs() <= 1e-12 + 1e-9 * b,
                "d = {}: {a} vs {b}",
                entry.delay
            );
        }
    }
}

#[test]
fn adding_channels_never_hurts() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..20 {
        let m = rng.random_range(1..=4);
        let bank = common::bank(&mut rng, m, 4, 6);
        let model = common::ar_model(&mut rng);
        let p = rng.random_range(1..=4);
        let d = rng.random_range(0..8);
        let mut prev = f64::INFINITY;
        for n in 1..=4 {
            let idx: Vec<usize> = (0..n).collect();
            let k = bank.subset(&idx).unwrap().build_k(p).unwrap();
            let sol = solve(&WienerProblem::new(k, &model, d).unwrap(), None).unwrap();
            let total = sol.total_mse.unwrap();
            assert!(total <= prev + 1e-9);
            prev = total;
        }
    }
}

#[test]
fn exp1_ensemble_tracks_analytic_values() {
    let bank = exp1_bank_default();
    let k = bank.build_k(EXP1_SYNTHESIS_LEN).unwrap();
    let model = exp1_model();
    let sol = solve(&WienerProblem::new(k, &model, 10).unwrap(), None).unwrap();
    let ens = ensemble(&bank, &sol, &model, EXP1_RUNS, EXP1_RUN_LEN, 2024, false).unwrap();
    let reference = EXP1_REFERENCE_DB.iter().find(|r| r.0 == 10).unwrap();
    for (got, want) in ens.mse.channel.iter().zip([reference.1, reference.2]) {
        assert!(
            (to_db(*got) - want).abs() < 0.5,
            "{} dB vs {want} dB",
            to_db(*got)
        );
    }
    let again = ensemble(&bank, &sol, &model, EXP1_RUNS, EXP1_RUN_LEN, 2024, false).unwrap();
    assert_eq!(ens.squared_error, again.squared_error);
}
