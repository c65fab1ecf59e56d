//! Analysis banks and the stacked decimate-convolve matrix `K`.
//!
//! A [`Bank`] is a list of causal FIR channels, each with its own decimation
//! factor. Non-uniform banks are turned into equivalent uniform ones by
//! blocking ([`Bank::nufb_to_ufb`]): channel `i` with factor `M_i` becomes
//! `M/M_i` channels `h_i(n - l·M_i)` decimated by `M = lcm(M_i)`.
//!
//! For a uniform bank with `L` channels of common length `Q`, decimation `M`
//! and synthesis length `P`, [`Bank::build_k`] returns the `LP × q` matrix
//! (`q = M(P-1)+Q`) whose block `i` is `D^0 · reverse(H_i)`. Entry-wise,
//! `K[iP + l, Ml + k] = h_i(k)`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mrmat::{
    build_convolution_matrix, build_decimation_matrix, reverse_matrix, ConvolutionForm,
};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub taps: Vec<f64>,
    pub decimation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankKind {
    Uniform(usize),
    NonUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bank {
    channels: Vec<Channel>,
}

impl Bank {
    pub fn new(channels: Vec<Channel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidArgument(
                "a bank needs at least one channel".into(),
            ));
        }
        for (i, ch) in channels.iter().enumerate() {
            if ch.taps.is_empty() {
                return Err(Error::EmptyTaps);
            }
            if ch.decimation == 0 {
                return Err(Error::InvalidArgument(format!(
                    "channel {i}: decimation must be >= 1"
                )));
            }
            if ch.taps.iter().any(|t| !t.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "channel {i}: non-finite tap"
                )));
            }
        }
        Ok(Self { channels })
    }

    /// All channels share the decimation factor `decimation`.
    pub fn uniform(taps: Vec<Vec<f64>>, decimation: usize) -> Result<Self> {
        Self::new(
            taps.into_iter()
                .map(|taps| Channel { taps, decimation })
                .collect(),
        )
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn kind(&self) -> BankKind {
        let m = self.channels[0].decimation;
        if self.channels.iter().all(|c| c.decimation == m) {
            BankKind::Uniform(m)
        } else {
            BankKind::NonUniform
        }
    }

    /// Common decimation factor, if the bank is uniform.
    pub fn decimation(&self) -> Option<usize> {
        match self.kind() {
            BankKind::Uniform(m) => Some(m),
            BankKind::NonUniform => None,
        }
    }

    /// Longest channel length `Q`.
    pub fn filter_len(&self) -> usize {
        self.channels
            .iter()
            .map(|c| c.taps.len())
            .max()
            .unwrap_or(0)
    }

    /// Keeps only the channels at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let channels = indices
            .iter()
            .map(|&i| {
                self.channels
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("no channel {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(channels)
    }

    /// Extends every channel with trailing zeros to the longest length.
    pub fn pad_to_common_length(&self) -> Self {
        let q = self.filter_len();
        let channels = self
            .channels
            .iter()
            .map(|c| {
                let mut taps = c.taps.clone();
                taps.resize(q, 0.0);
                Channel {
                    taps,
                    decimation: c.decimation,
                }
            })
            .collect();
        Self { channels }
    }

    /// Equivalent uniform bank by blocking each subband.
    ///
    /// Output channel order is (original channel, delay index), and the
    /// result is padded to a common length.
    pub fn nufb_to_ufb(&self) -> Self {
        let m = self.channels.iter().map(|c| c.decimation).fold(1, lcm);
        let mut channels = Vec::new();
        for ch in &self.channels {
            let k = m / ch.decimation;
            for l in 0..k {
                let mut taps = vec![0.0; l * ch.decimation];
                taps.extend_from_slice(&ch.taps);
                channels.push(Channel {
                    taps,
                    decimation: m,
                });
            }
        }
        Self { channels }.pad_to_common_length()
    }

    /// The `LP × (M(P-1)+Q)` matrix mapping `ū(Mn)` to the stacked subband
    /// observations.
    pub fn build_k(&self, synthesis_len: usize) -> Result<KMatrix> {
        let m = self.decimation().ok_or(Error::NonUniformBank)?;
        if synthesis_len == 0 {
            return Err(Error::InvalidArgument(
                "synthesis length P must be >= 1".into(),
            ));
        }
        let p = synthesis_len;
        let padded = self.pad_to_common_length();
        let q_len = padded.filter_len();
        let span = m * (p - 1) + 1;
        let cols = span + q_len - 1;
        let decim = build_decimation_matrix(m, 0, p, span)?;

        let mut k = Matrix::zeros(self.len() * p, cols);
        for (i, ch) in padded.channels.iter().enumerate() {
            let h = build_convolution_matrix(&ch.taps, span, ConvolutionForm::Observation)?;
            let block = decim.as_matrix() * reverse_matrix(h.as_matrix());
            k.view_mut((i * p, 0), (p, cols)).copy_from(&block);
        }
        Ok(KMatrix {
            matrix: k,
            decimation: m,
            channels: self.len(),
            synthesis_len: p,
            filter_len: q_len,
        })
    }

    /// Parses a bank from TOML. Relative CSV paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, source_name: &str, base_dir: &Path) -> Result<Self> {
        let file: BankFile = toml::from_str(text).map_err(|e| Error::Config {
            source_name: source_name.to_string(),
            message: e.to_string(),
        })?;
        file.into_bank(source_name, base_dir)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, &path.display().to_string(), base)
    }

    /// Reads one channel per CSV row (no header), all with the same factor.
    pub fn from_csv(path: &Path, decimation: usize) -> Result<Self> {
        let taps = read_taps_csv(path)?;
        Self::uniform(taps, decimation)
    }

    /// TOML rendering that [`Bank::from_toml_str`] reads back.
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            channels: &'a [Channel],
        }
        toml::to_string(&Out {
            channels: &self.channels,
        })
        .expect("bank serializes")
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Stacked decimate-convolve matrix for a uniform bank.
#[derive(Debug, Clone, PartialEq)]
pub struct KMatrix {
    matrix: Matrix,
    decimation: usize,
    channels: usize,
    synthesis_len: usize,
    filter_len: usize,
}

impl KMatrix {
    pub fn as_matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// `M`
    pub fn decimation(&self) -> usize {
        self.decimation
    }

    /// `L`
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `P`
    pub fn synthesis_len(&self) -> usize {
        self.synthesis_len
    }

    /// `Q`
    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    /// `q = M(P-1)+Q`, the length of `ū(Mn)`.
    pub fn block_len(&self) -> usize {
        self.matrix.ncols()
    }

    /// `LP`, the length of a synthesis row `a_i`.
    pub fn stacked_len(&self) -> usize {
        self.matrix.nrows()
    }

    /// Rows `iP .. iP+P` belonging to channel `i`.
    pub fn block(&self, channel: usize) -> nalgebra::DMatrixView<'_, f64> {
        let p = self.synthesis_len;
        self.matrix.rows(channel * p, p)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankFile {
    #[serde(default)]
    channels: Vec<ChannelSpec>,
    csv: Option<PathBuf>,
    decimation: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSpec {
    taps: Option<Vec<f64>>,
    lowpass: Option<DesignSpec>,
    highpass: Option<DesignSpec>,
    decimation: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignSpec {
    cutoff: f64,
    length: usize,
}

impl BankFile {
    fn into_bank(self, source_name: &str, base_dir: &Path) -> Result<Bank> {
        let cfg_err = |message: String| Error::Config {
            source_name: source_name.to_string(),
            message,
        };
        let mut channels = Vec::new();
        if let Some(csv) = &self.csv {
            let m = self
                .decimation
                .ok_or_else(|| cfg_err("`csv` requires a top-level `decimation`".into()))?;
            let path = base_dir.join(csv);
            for taps in read_taps_csv(&path)? {
                channels.push(Channel {
                    taps,
                    decimation: m,
                });
            }
        } else if self.decimation.is_some() {
            return Err(cfg_err(
                "top-level `decimation` is only used together with `csv`".into(),
            ));
        }
        for (i, spec) in self.channels.into_iter().enumerate() {
            let sources = spec.taps.is_some() as u8
                + spec.lowpass.is_some() as u8
                + spec.highpass.is_some() as u8;
            if sources != 1 {
                return Err(cfg_err(format!(
                    "channels[{i}]: give exactly one of `taps`, `lowpass`, `highpass`"
                )));
            }
            let taps = if let Some(t) = spec.taps {
                t
            } else if let Some(d) = spec.lowpass {
                design_lowpass(d.cutoff, d.length)
                    .map_err(|e| cfg_err(format!("channels[{i}].lowpass: {e}")))?
            } else {
                let d = spec.highpass.expect("checked above");
                design_highpass(d.cutoff, d.length)
                    .map_err(|e| cfg_err(format!("channels[{i}].highpass: {e}")))?
            };
            channels.push(Channel {
                taps,
                decimation: spec.decimation,
            });
        }
        if channels.is_empty() {
            return Err(cfg_err("no channels defined".into()));
        }
        Bank::new(channels).map_err(|e| cfg_err(e.to_string()))
    }
}

/// Reads a CSV of taps, one filter per row, without header.
pub fn read_taps_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let name = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config {
            source_name: name.clone(),
            message: e.to_string(),
        })?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Config {
            source_name: name.clone(),
            message: e.to_string(),
        })?;
        let taps = record
            .iter()
            .filter(|f| !f.is_empty())
            .enumerate()
            .map(|(col, f)| {
                f.parse::<f64>().map_err(|e| Error::Config {
                    source_name: name.clone(),
                    message: format!("line {}, field {}: {e}", line + 1, col + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if !taps.is_empty() {
            rows.push(taps);
        }
    }
    Ok(rows)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn hamming(len: usize) -> impl Iterator<Item = f64> {
    let denom = (len - 1) as f64;
    (0..len).map(move |n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
}

fn check_design(cutoff: f64, length: usize) -> Result<()> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff} outside (0, 1)"
        )));
    }
    if length < 2 {
        return Err(Error::InvalidArgument("filter length must be >= 2".into()));
    }
    Ok(())
}

/// Hamming-windowed linear-phase lowpass with unit DC gain. `cutoff` is
/// relative to Nyquist.
pub fn design_lowpass(cutoff: f64, length: usize) -> Result<Vec<f64>> {
    check_design(cutoff, length)?;
    let mid = (length - 1) as f64 / 2.0;
    let mut h: Vec<f64> = hamming(length)
        .enumerate()
        .map(|(n, w)| w * cutoff * sinc(cutoff * (n as f64 - mid)))
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= dc);
    Ok(h)
}

/// Hamming-windowed linear-phase highpass with unit gain at Nyquist.
/// Only odd lengths are accepted.
pub fn design_highpass(cutoff: f64, length: usize) -> Result<Vec<f64>> {
    check_design(cutoff, length)?;
    if length % 2 == 0 {
        return Err(Error::EvenLengthHighpass(length));
    }
    let mid = (length - 1) / 2;
    let mut h: Vec<f64> = hamming(length)
        .enumerate()
        .map(|(n, w)| {
            let m = n as f64 - mid as f64;
            w * (sinc(m) - cutoff * sinc(cutoff * m))
        })
        .collect();
    let nyquist: f64 = h
        .iter()
        .enumerate()
        .map(|(n, x)| if (n + mid) % 2 == 0 { *x } else { -*x })
        .sum();
    h.iter_mut().for_each(|x| *x /= nyquist);
    Ok(h)
}

/// Closed-form extended lapped transform window for overlap factor 2
/// (length `4M`):
/// `h(n) = -1/(2√2) + ½·cos((n + ½)·π / (2M))`.
pub fn elt_window_k2(decimation: usize) -> Vec<f64> {
    let m = decimation as f64;
    (0..4 * decimation)
        .map(|n| -1.0 / (2.0 * 2f64.sqrt()) + 0.5 * ((n as f64 + 0.5) * PI / (2.0 * m)).cos())
        .collect()
}

/// Cosine-modulated ELT analysis bank built from a window `h`:
/// `f_k(n) = h(n)·√(2/M)·cos((n + (M+1)/2)(k + ½)π/M)`.
pub fn elt_bank(window: &[f64], decimation: usize) -> Result<Bank> {
    if window.is_empty() {
        return Err(Error::EmptyTaps);
    }
    let m = decimation as f64;
    let taps = (0..decimation)
        .map(|k| {
            window
                .iter()
                .enumerate()
                .map(|(n, &h)| {
                    h * (2.0 / m).sqrt()
                        * ((n as f64 + (m + 1.0) / 2.0) * (k as f64 + 0.5) * PI / m).cos()
                })
                .collect()
        })
        .collect();
    Bank::uniform(taps, decimation)
}
