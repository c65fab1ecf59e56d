//! Second-order statistics of the wide-sense stationary input.
//!
//! A [`SignalModel`] supplies the autocorrelation `r(k)`; from it
//! [`correlation_bundle`] builds the Toeplitz matrix `R_uu = E[ū ūᵀ]` of the
//! time-reversed input block `ū(Mn) = [u(Mn), u(Mn-1), ..., u(Mn-q+1)]` and
//! the cross-correlation rows `r^{o}[k] = E[u(Mn-o)·u(Mn-k)] = r(k-o)` used
//! for the desired signals `d_i(n) = u(Mn-i-d)` (offset `o = i + d`).

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// `u(n) = Σ_k a_k u(n-k) + e(n)` with white `e` of the given variance.
    Ar {
        coefficients: Vec<f64>,
        noise_variance: f64,
    },
    /// A recorded realization; the biased estimator is used for its ACF.
    Empirical { samples: Vec<f64> },
    /// Autocorrelation values `r(0), r(1), ...` given directly.
    Explicit { acf: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    kind: ModelKind,
    normalize_unit_variance: bool,
}

impl SignalModel {
    /// Autoregressive model. Fails when the recursion is not stable.
    pub fn ar(coefficients: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if !noise_variance.is_finite() || noise_variance <= 0.0 {
            return Err(Error::InvalidArgument(
                "AR noise variance must be positive".into(),
            ));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "AR coefficients must be finite".into(),
            ));
        }
        let max_root = ar_max_root(&coefficients);
        if max_root >= 1.0 - 1e-12 {
            return Err(Error::UnstableAr { max_root });
        }
        Ok(Self {
            kind: ModelKind::Ar {
                coefficients,
                noise_variance,
            },
            normalize_unit_variance: false,
        })
    }

    /// Zero-mean, unit-variance AR process (the usual experiment setup).
    pub fn ar_unit_variance(coefficients: Vec<f64>) -> Result<Self> {
        Ok(Self::ar(coefficients, 1.0)?.normalized(true))
    }

    /// White noise of the given variance.
    pub fn white(variance: f64) -> Self {
        Self::ar(Vec::new(), variance).expect("white noise is a stable AR(0) model")
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument(
                "empirical model needs samples".into(),
            ));
        }
        let energy: f64 = samples.iter().map(|x| x * x).sum();
        if !energy.is_finite() || energy <= 0.0 {
            return Err(Error::InvalidArgument(
                "empirical samples have zero energy".into(),
            ));
        }
        Ok(Self {
            kind: ModelKind::Empirical { samples },
            normalize_unit_variance: false,
        })
    }

    pub fn explicit(acf: Vec<f64>) -> Result<Self> {
        match acf.first() {
            Some(&r0) if r0 > 0.0 => Ok(Self {
                kind: ModelKind::Explicit { acf },
                normalize_unit_variance: false,
            }),
            _ => Err(Error::InvalidArgument("explicit ACF needs r(0) > 0".into())),
        }
    }

    /// Scale the ACF so that `r(0) = 1`.
    pub fn normalized(mut self, on: bool) -> Self {
        self.normalize_unit_variance = on;
        self
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn normalize_unit_variance(&self) -> bool {
        self.normalize_unit_variance
    }

    /// Largest magnitude of the AR characteristic roots (0 for other kinds).
    pub fn max_root_magnitude(&self) -> f64 {
        match &self.kind {
            ModelKind::Ar { coefficients, .. } => ar_max_root(coefficients),
            _ => 0.0,
        }
    }

    /// Largest lag this model can report, if bounded.
    pub fn max_available_lag(&self) -> Option<usize> {
        match &self.kind {
            ModelKind::Explicit { acf } => Some(acf.len() - 1),
            _ => None,
        }
    }
}

/// Largest root magnitude of `z^p - a_1 z^{p-1} - ... - a_p`.
fn ar_max_root(coefficients: &[f64]) -> f64 {
    let p = coefficients.len();
    if p == 0 {
        return 0.0;
    }
    let mut companion = Matrix::zeros(p, p);
    for (j, &a) in coefficients.iter().enumerate() {
        companion[(0, j)] = a;
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Solves the Yule-Walker equations for `r(0..=p)` and extends by recursion.
fn ar_acf(coefficients: &[f64], noise_variance: f64, max_lag: usize) -> Result<Vec<f64>> {
    let p = coefficients.len();
    let n = p + 1;
    // r(k) - Σ_i a_i r(|k-i|) = σ² δ(k),  k = 0..=p
    let mut a = Matrix::zeros(n, n);
    let mut b = Vector::zeros(n);
    b[0] = noise_variance;
    for k in 0..n {
        a[(k, k)] += 1.0;
        for (i, &coef) in coefficients.iter().enumerate() {
            let lag = (k as isize - (i as isize + 1)).unsigned_abs();
            a[(k, lag)] -= coef;
        }
    }
    let head = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("singular Yule-Walker system".into()))?;
    let mut r: Vec<f64> = head.iter().copied().collect();
    while r.len() <= max_lag {
        let k = r.len();
        let next = coefficients
            .iter()
            .enumerate()
            .map(|(i, &c)| c * r[k - i - 1])
            .sum();
        r.push(next);
    }
    r.truncate(max_lag + 1);
    Ok(r)
}

/// Biased estimator `r̂(k) = (1/N) Σ_n x(n) x(n-k)`.
pub fn sample_acf(samples: &[f64], max_lag: usize) -> Vec<f64> {
    let n = samples.len();
    (0..=max_lag)
        .map(|k| {
            if k >= n {
                0.0
            } else {
                samples[k..]
                    .iter()
                    .zip(samples)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / n as f64
            }
        })
        .collect()
}

/// Autocorrelation `r(0..=max_lag)` of the model.
pub fn acf(model: &SignalModel, max_lag: usize) -> Result<Vec<f64>> {
    let mut r = match &model.kind {
        ModelKind::Ar {
            coefficients,
            noise_variance,
        } => ar_acf(coefficients, *noise_variance, max_lag)?,
        ModelKind::Empirical { samples } => sample_acf(samples, max_lag),
        ModelKind::Explicit { acf } => {
            if max_lag >= acf.len() {
                return Err(Error::AcfLagOutOfRange {
                    requested: max_lag,
                    available: acf.len() - 1,
                });
            }
            acf[..=max_lag].to_vec()
        }
    };
    if model.normalize_unit_variance {
        let r0 = r[0];
        r.iter_mut().for_each(|x| *x /= r0);
    }
    Ok(r)
}

/// Symmetric Toeplitz matrix `T(a, b) = r(|a - b|)` of size `n`.
pub fn toeplitz(r: &[f64], n: usize) -> Matrix {
    assert!(r.len() >= n, "need {n} ACF values, got {}", r.len());
    Matrix::from_fn(n, n, |a, b| r[a.abs_diff(b)])
}

/// `R_uu` plus the cross-correlation rows for the requested offsets.
#[derive(Debug, Clone)]
pub struct CorrelationBundle {
    ruu: Matrix,
    rows: BTreeMap<usize, Vector>,
    acf: Vec<f64>,
}

impl CorrelationBundle {
    pub fn ruu(&self) -> &Matrix {
        &self.ruu
    }

    /// Row `r^{o}` with entries `r(k - o)`, `k = 0..q`.
    pub fn row(&self, offset: usize) -> Result<&Vector> {
        self.rows
            .get(&offset)
            .ok_or(Error::MissingCorrelationRow(offset))
    }

    pub fn offsets(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }

    pub fn r0(&self) -> f64 {
        self.acf[0]
    }

    /// The autocorrelation values this bundle was assembled from.
    pub fn acf(&self) -> &[f64] {
        &self.acf
    }

    /// Size `q = M(P-1)+Q` of the input block.
    pub fn block_len(&self) -> usize {
        self.ruu.nrows()
    }
}

fn cross_row(r: &[f64], offset: usize, q: usize) -> Vector {
    Vector::from_fn(q, |k, _| r[k.abs_diff(offset)])
}

/// Builds `R_uu` (size `q = M(P-1)+Q`) and `r^{i+d}` for `i = 0..M` and
/// every `d` in `delays`.
pub fn correlation_bundle(
    model: &SignalModel,
    decimation: usize,
    synthesis_len: usize,
    filter_len: usize,
    delays: &[usize],
) -> Result<CorrelationBundle> {
    if decimation == 0 || synthesis_len == 0 || filter_len == 0 {
        return Err(Error::InvalidArgument(
            "decimation, synthesis length and filter length must be >= 1".into(),
        ));
    }
    let q = decimation * (synthesis_len - 1) + filter_len;
    let max_offset = delays.iter().max().map_or(0, |d| d + decimation - 1);
    let r = acf(model, (q - 1).max(max_offset))?;
    bundle_from_acf(r, decimation, q, delays)
}

/// Same as [`correlation_bundle`] from precomputed ACF values covering every
/// required lag.
pub fn bundle_from_acf(
    r: Vec<f64>,
    decimation: usize,
    block_len: usize,
    delays: &[usize],
) -> Result<CorrelationBundle> {
    let max_offset = delays.iter().max().map_or(0, |d| d + decimation - 1);
    let need = (block_len - 1).max(max_offset);
    if r.len() <= need {
        return Err(Error::AcfLagOutOfRange {
            requested: need,
            available: r.len().saturating_sub(1),
        });
    }
    let ruu = toeplitz(&r, block_len);
    let mut rows = BTreeMap::new();
    for &d in delays {
        for i in 0..decimation {
            rows.entry(d + i)
                .or_insert_with(|| cross_row(&r, d + i, block_len));
        }
    }
    Ok(CorrelationBundle { ruu, rows, acf: r })
}

/// Burn-in length before collecting AR samples.
pub fn burn_in(model: &SignalModel) -> usize {
    match &model.kind {
        ModelKind::Ar { coefficients, .. } if !coefficients.is_empty() => {
            let rho = ar_max_root(coefficients);
            (10.0 * coefficients.len() as f64 / (1.0 - rho)).ceil() as usize
        }
        _ => 0,
    }
}

/// Draws `len` samples of an AR model after burn-in. Normalized models are
/// scaled to unit variance.
pub fn simulate<R: Rng + ?Sized>(model: &SignalModel, len: usize, rng: &mut R) -> Result<Vec<f64>> {
    let ModelKind::Ar {
        coefficients,
        noise_variance,
    } = &model.kind
    else {
        return Err(Error::InvalidArgument(
            "only AR models can be simulated".into(),
        ));
    };
    let p = coefficients.len();
    let sigma = noise_variance.sqrt();
    let scale = if model.normalize_unit_variance {
        1.0 / ar_acf(coefficients, *noise_variance, 0)?[0].sqrt()
    } else {
        1.0
    };
    let skip = burn_in(model);
    let mut history = vec![0.0; p];
    let mut out = Vec::with_capacity(len);
    for n in 0..skip + len {
        let e: f64 = rng.sample(StandardNormal);
        let mut x = sigma * e;
        for (k, &a) in coefficients.iter().enumerate() {
            x += a * history[k];
        }
        if p > 0 {
            history.rotate_right(1);
            history[0] = x;
        }
        if n >= skip {
            out.push(x * scale);
        }
    }
    Ok(out)
}
