//! Random problem generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use wiener_fb::bank::Bank;
use wiener_fb::stochastic::SignalModel;
use wiener_fb::{Matrix, Vector};

pub fn taps<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Uniform bank with `channels` filters of random length `1..=max_len`.
pub fn bank<R: Rng>(rng: &mut R, decimation: usize, channels: usize, max_len: usize) -> Bank {
    let filters = (0..channels)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            let mut t = taps(rng, len);
            // Keep the leading tap away from zero so no channel vanishes.
            t[0] += t[0].signum() * 0.1;
            t
        })
        .collect();
    Bank::uniform(filters, decimation).unwrap()
}

/// Stable AR model of order 1..=3 with real roots inside |z| < 0.85,
/// normalized to unit variance.
pub fn ar_model<R: Rng>(rng: &mut R) -> SignalModel {
    let order = rng.random_range(1..=3);
    // Expand Π (z - ρ_k) = z^p - a_1 z^{p-1} - ... - a_p.
    let mut poly = vec![1.0];
    for _ in 0..order {
        let root: f64 = rng.random_range(-0.85..0.85);
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= root * c;
        }
        poly = next;
    }
    let coefs = poly[1..].iter().map(|c| -c).collect();
    SignalModel::ar_unit_variance(coefs).unwrap()
}

pub fn vector<R: Rng>(rng: &mut R, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}

pub fn matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Random matrix of the given rank.
pub fn low_rank<R: Rng>(rng: &mut R, rows: usize, cols: usize, rank: usize) -> Matrix {
    matrix(rng, rows, rank) * matrix(rng, rank, cols)
}

/// `p_{i,j}(n) = Σ_r Σ_l a_{i,r}(l) h_r(M(n-l) + j)` by direct summation.
pub fn brute_force_polyphase(
    bank: &Bank,
    rows: &Matrix,
    synthesis_len: usize,
) -> Vec<Vec<Vec<f64>>> {
    let m = bank.decimation().unwrap();
    let padded = bank.pad_to_common_length();
    let q = padded.filter_len();
    let t = q.div_ceil(m);
    let out_len = synthesis_len + t - 1;
    let h = |r: usize, idx: isize| -> f64 {
        if idx < 0 {
            0.0
        } else {
            padded.channels()[r]
                .taps
                .get(idx as usize)
                .copied()
                .unwrap_or(0.0)
        }
    };
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    (0..out_len)
                        .map(|n| {
                            let mut acc = 0.0;
                            for r in 0..padded.len() {
                                for l in 0..synthesis_len {
                                    let idx = m as isize * (n as isize - l as isize) + j as isize;
                                    acc += rows[(i, r * synthesis_len + l)] * h(r, idx);
                                }
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}
