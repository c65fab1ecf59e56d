//! Ready-made setups for the three reference experiments.
//!
//! 1. Two-channel windowed-sinc bank, AR(2) input, MSE versus delay.
//! 2. Four-channel extended lapped transform, AR(1) input, MSE versus the
//!    set of available subbands and the perfect-reconstruction delay.
//! 3. Four-channel non-uniform bank (`M_i = 2, 3, 6, 6`) with a PR
//!    synthesis bank, driven by a non-stationary input.

use crate::bank::{design_highpass, design_lowpass, elt_bank, elt_window_k2, Bank, Channel};
use crate::stochastic::SignalModel;
use crate::Result;

pub const EXP1_DECIMATION: usize = 2;
pub const EXP1_LOWPASS_CUTOFF: f64 = 0.6;
pub const EXP1_HIGHPASS_CUTOFF: f64 = 0.4;
/// Default filter lengths. The windowed-sinc design takes lengths, so a
/// "filter of order N" is length `N + 1` here.
pub const EXP1_LOWPASS_LEN: usize = 10;
pub const EXP1_HIGHPASS_LEN: usize = 11;
pub const EXP1_AR: [f64; 2] = [0.7, 0.1];
pub const EXP1_SYNTHESIS_LEN: usize = 11;
pub const EXP1_DELAYS: [usize; 7] = [0, 5, 9, 10, 11, 15, 20];
pub const EXP1_RUNS: usize = 200;
pub const EXP1_RUN_LEN: usize = 4000;

/// Reference `(d, J_0, J_1, J_total)` in dB for the experiment-1 setup.
pub const EXP1_REFERENCE_DB: [(usize, f64, f64, f64); 7] = [
    (0, -0.8673, -1.3434, 1.9115),
    (5, -33.1717, -43.7244, -32.8052),
    (9, -62.8689, -68.3970, -61.7967),
    (10, -68.3970, -70.7269, -66.3972),
    (11, -70.7269, -61.6691, -61.1606),
    (15, -57.3320, -45.5881, -45.3068),
    (20, -29.5288, -33.7826, -28.1442),
];

pub const EXP2_DECIMATION: usize = 4;
pub const EXP2_AR: [f64; 1] = [0.95];
pub const EXP2_SYNTHESIS_LEN: usize = 4;
pub const EXP2_DELAY: usize = 10;
pub const EXP2_PR_SWEEP: [usize; 4] = [10, 11, 12, 13];

/// Reference total MSE (dB) for each subset of [`exp2_subsets`], in order.
pub const EXP2_REFERENCE_TOTAL_DB: [f64; 15] = [
    -7.8231, 5.8675, 5.9215, 5.9652, -11.7388, -9.0295, -8.6055, 5.7663, 5.8104, 5.8662, -15.5518,
    -14.0058, -10.0944, 5.7092, -31.8758,
];

/// Reference total MSE (dB) of the full ELT bank at delays 10..=13.
pub const EXP2_REFERENCE_SWEEP_DB: [f64; 4] = [-31.8758, -32.0844, -138.3732, -30.2194];

pub const EXP3_H0: [f64; 7] = [-0.1295, -0.12, 0.3695, 0.5018, 0.3695, -0.12, -0.1295];
pub const EXP3_H1: [f64; 8] = [
    0.1308, 0.1728, -0.3775, 0.2117, 0.2117, -0.3775, 0.1728, 0.1308,
];
pub const EXP3_H2: [f64; 11] = [
    0.0717, 0.0749, -0.1148, 0.1659, -0.2069, 0.2224, -0.2069, 0.1659, -0.1148, 0.0749, 0.0717,
];
pub const EXP3_H3: [f64; 10] = [
    0.0881, 0.1617, -0.1686, -0.1538, 0.1752, 0.1752, -0.1538, -0.1686, 0.1617, 0.0881,
];
pub const EXP3_DECIMATIONS: [usize; 4] = [2, 3, 6, 6];
pub const EXP3_SYNTHESIS_LEN: usize = 7;
pub const EXP3_DELAY: usize = 0;
pub const EXP3_INPUT_LEN: usize = 10_000;

pub fn exp1_bank(lowpass_len: usize, highpass_len: usize) -> Result<Bank> {
    Bank::uniform(
        vec![
            design_lowpass(EXP1_LOWPASS_CUTOFF, lowpass_len)?,
            design_highpass(EXP1_HIGHPASS_CUTOFF, highpass_len)?,
        ],
        EXP1_DECIMATION,
    )
}

pub fn exp1_bank_default() -> Bank {
    exp1_bank(EXP1_LOWPASS_LEN, EXP1_HIGHPASS_LEN).expect("valid design parameters")
}

pub fn exp1_model() -> SignalModel {
    SignalModel::ar_unit_variance(EXP1_AR.to_vec()).expect("stable AR(2)")
}

/// ELT bank with the closed-form overlap-2 window, `M = 4`.
pub fn elt_bank_default() -> Bank {
    elt_bank(&elt_window_k2(EXP2_DECIMATION), EXP2_DECIMATION).expect("valid window")
}

pub fn exp2_model() -> SignalModel {
    SignalModel::ar_unit_variance(EXP2_AR.to_vec()).expect("stable AR(1)")
}

/// Channel subsets: singletons, pairs, triples, then the full bank, each
/// group in lexicographic order.
pub fn exp2_subsets() -> Vec<Vec<usize>> {
    let n = EXP2_DECIMATION;
    let mut out = Vec::new();
    for size in 1..=n {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            out.push(combo.clone());
            let Some(pos) = (0..size).rev().find(|&i| combo[i] < n - size + i) else {
                break;
            };
            combo[pos] += 1;
            for j in pos + 1..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    out
}

/// The non-uniform analysis bank of experiment 3.
pub fn exp3_nufb() -> Bank {
    let taps: [&[f64]; 4] = [&EXP3_H0, &EXP3_H1, &EXP3_H2, &EXP3_H3];
    Bank::new(
        taps.iter()
            .zip(EXP3_DECIMATIONS)
            .map(|(t, decimation)| Channel {
                taps: t.to_vec(),
                decimation,
            })
            .collect(),
    )
    .expect("valid bank")
}

/// Experiment-3 bank blocked to a uniform bank with `M = 6`.
pub fn exp3_blocked() -> Bank {
    exp3_nufb().nufb_to_ufb()
}
