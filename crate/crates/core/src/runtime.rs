//! Sample-level simulation of the analysis / synthesis chain.
//!
//! The input is filtered by each analysis channel and decimated,
//! `v_r(n) = Σ_k h_r(k)·u(Mn - k)` with `u(n) = 0` for `n < 0`. The stacked
//! observation `v_s(n) = [v_0(n), ..., v_0(n-P+1), v_1(n), ...]` feeds the
//! low-rate synthesis filter `y_i(n) = a_i · v_s(n)`, and the output stream
//! is unblocked as `û(Mn + i) = y_{M-1-i}(n)`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bank::Bank;
use crate::stochastic::{simulate, SignalModel};
use crate::wiener::SynthesisSolution;
use crate::{Error, Result, Vector};

/// Splits `u` into blocks `b(n)[i] = u(Mn + M - 1 - i)`, zero-padding the
/// last block.
pub fn block(u: &[f64], decimation: usize) -> Vec<Vec<f64>> {
    assert!(decimation > 0, "decimation must be >= 1");
    let m = decimation;
    (0..u.len().div_ceil(m))
        .map(|n| {
            (0..m)
                .map(|i| u.get(m * n + m - 1 - i).copied().unwrap_or(0.0))
                .collect()
        })
        .collect()
}

/// Inverse of [`block`]: `û(Mn + i) = b(n)[M-1-i]`, truncated to `len`.
pub fn unblock(blocks: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    for b in blocks {
        out.extend(b.iter().rev());
    }
    out.truncate(len);
    out
}

/// Test signal `x(n)·sin(0.1 n²)` with standard normal `x`.
pub fn modulated_noise<R: rand::Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let x: f64 = StandardNormal.sample(rng);
            let t = n as f64;
            x * (0.1 * t * t).sin()
        })
        .collect()
}

/// Deterministic per-realization generator: stream `index` of `seed`.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub input: Vec<f64>,
    /// `L` subband sequences `v_r(n)`.
    pub subbands: Vec<Vec<f64>>,
    /// `M` low-rate synthesis outputs `y_i(n)`.
    pub outputs: Vec<Vec<f64>>,
    /// Unblocked output, same length as the input.
    pub reconstructed: Vec<f64>,
    /// `|û(n) - c·u(n - d - M + 1)|`.
    pub error: Vec<f64>,
    pub delay: usize,
    pub decimation: usize,
    pub synthesis_len: usize,
    pub filter_len: usize,
    pub scale: f64,
    /// Number of leading output blocks affected by the zero initial state.
    pub transient_blocks: usize,
    /// Multiplications spent in the synthesis filter.
    pub synthesis_multiplies: u64,
}

impl PipelineRun {
    /// End-to-end delay `d + M - 1` between `u` and `û`.
    pub fn overall_delay(&self) -> usize {
        self.delay + self.decimation - 1
    }

    pub fn transient_samples(&self) -> usize {
        (self.transient_blocks * self.decimation).min(self.input.len())
    }

    pub fn blocks(&self) -> usize {
        self.outputs.first().map_or(0, |y| y.len())
    }

    /// `v_s(n)` as fed to the synthesis filter.
    pub fn stacked_observation(&self, n: usize) -> Vector {
        let p = self.synthesis_len;
        Vector::from_fn(self.subbands.len() * p, |idx, _| {
            let (r, l) = (idx / p, idx % p);
            n.checked_sub(l).map_or(0.0, |t| self.subbands[r][t])
        })
    }

    /// `ū(Mn) = [u(Mn), u(Mn-1), ..., u(Mn-q+1)]`, zero before time 0 and
    /// past the end of the input.
    pub fn reversed_input_block(&self, n: usize) -> Vector {
        let q = self.decimation * (self.synthesis_len - 1) + self.filter_len;
        let t = self.decimation * n;
        Vector::from_fn(q, |k, _| {
            t.checked_sub(k)
                .and_then(|s| self.input.get(s))
                .copied()
                .unwrap_or(0.0)
        })
    }

    /// Largest reconstruction error, optionally including the transient.
    pub fn max_error(&self, include_transient: bool) -> f64 {
        let start = if include_transient {
            0
        } else {
            self.transient_samples()
        };
        self.error[start..].iter().copied().fold(0.0, f64::max)
    }

    /// `e_i(n) = c·u(Mn - i - d) - y_i(n)` for every block.
    pub fn channel_errors(&self) -> Vec<Vec<f64>> {
        let m = self.decimation as isize;
        (0..self.decimation)
            .map(|i| {
                self.outputs[i]
                    .iter()
                    .enumerate()
                    .map(|(n, y)| {
                        let t = m * n as isize - i as isize - self.delay as isize;
                        let desired = if t >= 0 {
                            self.input.get(t as usize).copied().unwrap_or(0.0)
                        } else {
                            0.0
                        };
                        self.scale * desired - y
                    })
                    .collect()
            })
            .collect()
    }

    /// Writes `n,u_hat,error` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["n", "u_hat", "error"]).map_err(io)?;
        for (n, (u, e)) in self.reconstructed.iter().zip(&self.error).enumerate() {
            w.write_record([n.to_string(), format_sig(*u), format_sig(*e)])
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Formats with 12 significant digits.
pub fn format_sig(x: f64) -> String {
    format!("{x:.11e}")
}

/// Runs `input` through the analysis bank and the synthesis filter.
pub fn run_pipeline(
    bank: &Bank,
    solution: &SynthesisSolution,
    input: &[f64],
) -> Result<PipelineRun> {
    let m = bank.decimation().ok_or(Error::NonUniformBank)?;
    let l_count = bank.len();
    let p = solution.synthesis_len;
    if m != solution.decimation || l_count != solution.channels {
        return Err(Error::DimensionMismatch(format!(
            "bank has {l_count} channels at M = {m}, solution expects {} at M = {}",
            solution.channels, solution.decimation
        )));
    }
    if input.is_empty() {
        return Err(Error::InvalidArgument("input signal is empty".into()));
    }
    let padded = bank.pad_to_common_length();
    let q = padded.filter_len();
    let nblocks = input.len().div_ceil(m);

    let subbands: Vec<Vec<f64>> = padded
        .channels()
        .iter()
        .map(|ch| {
            (0..nblocks)
                .map(|n| {
                    ch.taps
                        .iter()
                        .enumerate()
                        .filter_map(|(k, h)| {
                            (m * n)
                                .checked_sub(k)
                                .and_then(|t| input.get(t))
                                .map(|u| h * u)
                        })
                        .sum()
                })
                .collect()
        })
        .collect();

    // Every output sample costs one length-LP dot product, zero state included.
    let lp = l_count * p;
    let mut outputs = vec![vec![0.0; nblocks]; m];
    let mut vs = vec![0.0; lp];
    for n in 0..nblocks {
        for (r, band) in subbands.iter().enumerate() {
            for l in 0..p {
                vs[r * p + l] = n.checked_sub(l).map_or(0.0, |t| band[t]);
            }
        }
        for (i, y) in outputs.iter_mut().enumerate() {
            y[n] = solution
                .rows
                .row(i)
                .iter()
                .zip(&vs)
                .map(|(a, v)| a * v)
                .sum();
        }
    }

    let blocks: Vec<Vec<f64>> = (0..nblocks)
        .map(|n| (0..m).map(|i| outputs[i][n]).collect())
        .collect();
    let reconstructed = unblock(&blocks, input.len());
    let lag = solution.delay + m - 1;
    let error = reconstructed
        .iter()
        .enumerate()
        .map(|(n, u_hat)| {
            let reference = n.checked_sub(lag).map_or(0.0, |t| input[t]);
            (u_hat - solution.scale * reference).abs()
        })
        .collect();

    Ok(PipelineRun {
        input: input.to_vec(),
        subbands,
        outputs,
        reconstructed,
        error,
        delay: solution.delay,
        decimation: m,
        synthesis_len: p,
        filter_len: q,
        scale: solution.scale,
        transient_blocks: (p * m + q).div_ceil(m),
        synthesis_multiplies: (nblocks * m * lp) as u64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMse {
    /// Time-averaged `e_i(n)²` per output channel.
    pub channel: Vec<f64>,
    pub total: f64,
}

/// Time-averaged squared channel error of one run.
pub fn empirical_mse(run: &PipelineRun, include_transient: bool) -> Result<EmpiricalMse> {
    let start = if include_transient {
        0
    } else {
        run.transient_blocks
    };
    let count = run.blocks().saturating_sub(start);
    if count == 0 {
        return Err(Error::EmptyOverlap);
    }
    let channel: Vec<f64> = run
        .channel_errors()
        .iter()
        .map(|e| e[start..].iter().map(|x| x * x).sum::<f64>() / count as f64)
        .collect();
    let total = channel.iter().sum();
    Ok(EmpiricalMse { channel, total })
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub runs: usize,
    pub seed: u64,
    /// Ensemble-averaged `e_i(n)²`, `M × blocks`.
    pub squared_error: Vec<Vec<f64>>,
    /// Further averaged over time (transient excluded unless requested).
    pub mse: EmpiricalMse,
    pub transient_blocks: usize,
}

/// Runs `runs` independent realizations of an AR `model`, each `len`
/// samples long, in parallel. Realization `k` uses [`realization_rng`]`(seed, k)`.
pub fn ensemble(
    bank: &Bank,
    solution: &SynthesisSolution,
    model: &SignalModel,
    runs: usize,
    len: usize,
    seed: u64,
    include_transient: bool,
) -> Result<Ensemble> {
    if runs == 0 {
        return Err(Error::InvalidArgument(
            "ensemble needs at least one run".into(),
        ));
    }
    let per_run = (0..runs)
        .into_par_iter()
        .map(|k| {
            let mut rng = realization_rng(seed, k as u64);
            let u = simulate(model, len, &mut rng)?;
            let run = run_pipeline(bank, solution, &u)?;
            Ok((run.channel_errors(), run.transient_blocks))
        })
        .collect::<Result<Vec<_>>>()?;
    let transient_blocks = per_run[0].1;
    let m = solution.decimation;
    let nblocks = per_run[0].0[0].len();
    let mut squared_error = vec![vec![0.0; nblocks]; m];
    for (errors, _) in &per_run {
        for (acc, e) in squared_error.iter_mut().zip(errors) {
            for (a, x) in acc.iter_mut().zip(e) {
                *a += x * x;
            }
        }
    }
    squared_error
        .iter_mut()
        .flatten()
        .for_each(|a| *a /= runs as f64);
    let start = if include_transient {
        0
    } else {
        transient_blocks
    };
    if nblocks <= start {
        return Err(Error::EmptyOverlap);
    }
    let channel: Vec<f64> = squared_error
        .iter()
        .map(|s| s[start..].iter().sum::<f64>() / (nblocks - start) as f64)
        .collect();
    let total = channel.iter().sum();
    Ok(Ensemble {
        runs,
        seed,
        squared_error,
        mse: EmpiricalMse { channel, total },
        transient_blocks,
    })
}
