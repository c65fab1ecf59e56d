//! Matrix Wiener design of the synthesis bank.
//!
//! Row `i` of the synthesis filter, `a_i` (length `LP`, channel-major, tap
//! index fastest), produces `y_i(n) = a_iᵀ v_s(n)` as an estimate of
//! `d_i(n) = u(Mn - i - d)`. The Wiener-Hopf equations read `A a_i = b_i` with
//!
//! * `A = (K R_uu Kᵀ)ᵀ`
//! * `b_i = (r^{i+d} Kᵀ)ᵀ`
//!
//! and every solution has the form `a_i = A†b_i + (I - A†A) w`. The system
//! is always consistent, so any `w` gives an optimal bank with the same
//! per-channel error `J_i = r(0) - b_iᵀ A† b_i`.

use rayon::prelude::*;

use crate::bank::KMatrix;
use crate::mrmat::pseudoinverse_with_rank;
use crate::stochastic::{acf, bundle_from_acf, correlation_bundle, CorrelationBundle, SignalModel};
use crate::{Error, Matrix, Result, Vector};

/// A synthesis design problem for one delay.
#[derive(Debug, Clone)]
pub struct WienerProblem {
    k: KMatrix,
    corr: CorrelationBundle,
    delay: usize,
}

impl WienerProblem {
    /// Builds the correlation data for `delay` from `model`.
    pub fn new(k: KMatrix, model: &SignalModel, delay: usize) -> Result<Self> {
        let corr = correlation_bundle(
            model,
            k.decimation(),
            k.synthesis_len(),
            k.filter_len(),
            &[delay],
        )?;
        Self::with_bundle(k, corr, delay)
    }

    pub fn with_bundle(k: KMatrix, corr: CorrelationBundle, delay: usize) -> Result<Self> {
        if corr.block_len() != k.block_len() {
            return Err(Error::DimensionMismatch(format!(
                "correlation block length {} but K has {} columns",
                corr.block_len(),
                k.block_len()
            )));
        }
        for i in 0..k.decimation() {
            corr.row(i + delay)?;
        }
        Ok(Self { k, corr, delay })
    }

    pub fn k(&self) -> &KMatrix {
        &self.k
    }

    pub fn correlation(&self) -> &CorrelationBundle {
        &self.corr
    }

    pub fn delay(&self) -> usize {
        self.delay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    /// Minimum-MSE design.
    Wiener,
    /// `Kᵀ a_i = c·e_{i+d}` design, independent of the input statistics.
    PerfectReconstruction,
}

struct Parts {
    system: Matrix,
    system_pinv: Matrix,
    rank: usize,
    nullspace_projector: Matrix,
    particular: Vec<Vector>,
}

/// One member of a parametric synthesis family.
#[derive(Debug, Clone)]
pub struct SynthesisSolution {
    pub kind: SolutionKind,
    /// Coefficient matrix of the row system: `A` for Wiener, `Kᵀ` for PR.
    pub system: Matrix,
    pub system_pinv: Matrix,
    /// Right-hand sides: `b_i` for Wiener, `c·e_{i+d}` for PR.
    pub rhs: Vec<Vector>,
    /// `M × LP`, row `i` is the particular solution `system† · rhs_i`.
    pub particular_rows: Matrix,
    /// `I - system† · system`.
    pub nullspace_projector: Matrix,
    pub w: Vector,
    /// `M × LP` synthesis filter; row `i` is `a_i`.
    pub rows: Matrix,
    pub delay: usize,
    /// Reconstruction gain `c` (1 for Wiener designs).
    pub scale: f64,
    /// Numerical rank of `system`.
    pub rank: usize,
    /// `‖system·a_i - rhs_i‖ / (1 + ‖rhs_i‖)` per row.
    pub residuals: Vec<f64>,
    /// Analytic `J_i` in linear units, when known.
    pub channel_mse: Option<Vec<f64>>,
    pub total_mse: Option<f64>,
    pub decimation: usize,
    pub channels: usize,
    pub synthesis_len: usize,
}

impl SynthesisSolution {
    pub(crate) fn from_system(
        kind: SolutionKind,
        system: Matrix,
        rhs: Vec<Vector>,
        w: Option<&Vector>,
        k: &KMatrix,
        delay: usize,
        scale: f64,
    ) -> Result<Self> {
        let (system_pinv, rank) = pseudoinverse_with_rank(&system)?;
        let particular = rhs.iter().map(|b| &system_pinv * b).collect();
        let lp = system.ncols();
        let nullspace_projector = Matrix::identity(lp, lp) - &system_pinv * &system;
        let parts = Parts {
            system,
            system_pinv,
            rank,
            nullspace_projector,
            particular,
        };
        Self::from_parts(kind, parts, rhs, w, k, delay, scale)
    }

    fn from_parts(
        kind: SolutionKind,
        parts: Parts,
        rhs: Vec<Vector>,
        w: Option<&Vector>,
        k: &KMatrix,
        delay: usize,
        scale: f64,
    ) -> Result<Self> {
        let lp = k.stacked_len();
        let w = match w {
            Some(w) if w.len() != lp => {
                return Err(Error::DimensionMismatch(format!(
                    "w has length {}, expected LP = {lp}",
                    w.len()
                )))
            }
            Some(w) => w.clone(),
            None => Vector::zeros(lp),
        };
        let Parts {
            system,
            system_pinv,
            rank,
            nullspace_projector,
            particular,
        } = parts;
        let free = &nullspace_projector * &w;
        let m = k.decimation();
        let mut particular_rows = Matrix::zeros(m, lp);
        let mut rows = Matrix::zeros(m, lp);
        let mut residuals = Vec::with_capacity(m);
        for (i, (b, part)) in rhs.iter().zip(&particular).enumerate() {
            let a = part + &free;
            residuals.push((&system * &a - b).norm() / (1.0 + b.norm()));
            particular_rows.set_row(i, &part.transpose());
            rows.set_row(i, &a.transpose());
        }
        Ok(Self {
            kind,
            system,
            system_pinv,
            rhs,
            particular_rows,
            nullspace_projector,
            w,
            rows,
            delay,
            scale,
            rank,
            residuals,
            channel_mse: None,
            total_mse: None,
            decimation: m,
            channels: k.channels(),
            synthesis_len: k.synthesis_len(),
        })
    }

    /// `a_i` as a column vector.
    pub fn row(&self, i: usize) -> Vector {
        self.rows.row(i).transpose()
    }

    /// Tap `l` of the filter from subband `r` to output `i`.
    pub fn tap(&self, i: usize, r: usize, l: usize) -> f64 {
        self.rows[(i, r * self.synthesis_len + l)]
    }

    /// Dimension of the free-parameter space, `LP - rank`.
    pub fn nullspace_dim(&self) -> usize {
        self.rows.ncols() - self.rank
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// `A = (K R_uu Kᵀ)ᵀ` and `b_i = K (r^{i+d})ᵀ` for `i = 0..M`.
pub fn assemble_normal_equations(prob: &WienerProblem) -> Result<(Matrix, Vec<Vector>)> {
    let k = prob.k.as_matrix();
    let a = (k * prob.corr.ruu() * k.transpose()).transpose();
    let b = (0..prob.k.decimation())
        .map(|i| Ok(k * prob.corr.row(i + prob.delay)?))
        .collect::<Result<Vec<_>>>()?;
    Ok((a, b))
}

/// `J_i = r(0) - b_iᵀ A† b_i`, clipped at zero.
///
/// Evaluated literally from `A†`; [`solve`] reaches the same value through
/// a factorization that is more accurate for ill-conditioned `A`.
pub fn min_mse_channel(prob: &WienerProblem, a_pinv: &Matrix, b: &Vector) -> f64 {
    (prob.corr.r0() - b.dot(&(a_pinv * b))).max(0.0)
}

/// `R_uu = C Cᵀ` through the symmetric eigendecomposition, together with
/// `C†`. Tiny or negative eigenvalues are dropped.
fn correlation_factor(ruu: &Matrix) -> (Matrix, Matrix) {
    let q = ruu.nrows();
    let eig = ruu.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let tol = q as f64 * f64::EPSILON * lambda_max;
    let mut c = Matrix::zeros(q, q);
    let mut c_pinv = Matrix::zeros(q, q);
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let s = lambda.sqrt();
            let v = eig.eigenvectors.column(j);
            c.set_column(j, &(v * s));
            c_pinv.set_row(j, &(v.transpose() / s));
        }
    }
    (c, c_pinv)
}

/// With `F = K C`, `A = F Fᵀ` and `b_i = F g_i` where `g_i = C† r^{i+d}`,
/// so `A† b_i = (Fᵀ)† g_i`. Working with `F` instead of `A` keeps the
/// conditioning at `cond(F) = √cond(A)`.
struct Factored {
    ft: Matrix,
    ft_pinv: Matrix,
    c_pinv: Matrix,
    rank: usize,
}

impl Factored {
    fn new(k: &KMatrix, ruu: &Matrix) -> Result<Self> {
        let (c, c_pinv) = correlation_factor(ruu);
        let ft = (k.as_matrix() * c).transpose();
        let (ft_pinv, rank) = pseudoinverse_with_rank(&ft)?;
        Ok(Self {
            ft,
            ft_pinv,
            c_pinv,
            rank,
        })
    }

    /// `Fᵀ (Fᵀ)†`, the orthogonal projector onto the range of `Fᵀ`.
    fn range_projector(&self) -> Matrix {
        &self.ft * &self.ft_pinv
    }
}

/// Wiener synthesis bank `a_i = A†b_i + (I - A†A) w` (`w = 0` when `None`).
pub fn solve(prob: &WienerProblem, w: Option<&Vector>) -> Result<SynthesisSolution> {
    let (a, b) = assemble_normal_equations(prob)?;
    let f = Factored::new(&prob.k, prob.corr.ruu())?;
    let lp = prob.k.stacked_len();
    let g: Vec<Vector> = (0..prob.k.decimation())
        .map(|i| Ok(&f.c_pinv * prob.corr.row(i + prob.delay)?))
        .collect::<Result<_>>()?;
    let particular: Vec<Vector> = g.iter().map(|gi| &f.ft_pinv * gi).collect();
    // r(0) - b_iᵀ A† b_i = (r(0) - ‖g_i‖²) + ‖(I - Fᵀ(Fᵀ)†) g_i‖²; the first
    // term vanishes whenever r^{i+d} is a row of R_uu.
    let mse: Vec<f64> = particular
        .iter()
        .zip(&g)
        .map(|(p, gi)| {
            (prob.corr.r0() - gi.norm_squared()).max(0.0) + (&f.ft * p - gi).norm_squared()
        })
        .collect();
    let parts = Parts {
        system_pinv: &f.ft_pinv * f.ft_pinv.transpose(),
        nullspace_projector: Matrix::identity(lp, lp) - &f.ft_pinv * &f.ft,
        rank: f.rank,
        system: a,
        particular,
    };
    let mut sol =
        SynthesisSolution::from_parts(SolutionKind::Wiener, parts, b, w, &prob.k, prob.delay, 1.0)?;
    sol.total_mse = Some(mse.iter().sum());
    sol.channel_mse = Some(mse);
    Ok(sol)
}

/// Mean-square error of arbitrary synthesis rows under `corr`,
/// `r(0) - 2 a_iᵀ b_i + a_iᵀ A a_i`.
///
/// Evaluated as `(r(0) - ‖g_i‖²) + ‖Fᵀ a_i - g_i‖²` (notation of
/// [`solve`]), which avoids the cancellation between the last two terms
/// when `a_i` is large.
pub fn evaluate_mse(
    k: &KMatrix,
    corr: &CorrelationBundle,
    delay: usize,
    rows: &Matrix,
) -> Result<Vec<f64>> {
    if rows.nrows() != k.decimation() || rows.ncols() != k.stacked_len() {
        return Err(Error::DimensionMismatch(format!(
            "rows are {}x{}, expected {}x{}",
            rows.nrows(),
            rows.ncols(),
            k.decimation(),
            k.stacked_len()
        )));
    }
    let f = Factored::new(k, corr.ruu())?;
    (0..k.decimation())
        .map(|i| {
            let g = &f.c_pinv * corr.row(i + delay)?;
            let fit = &f.ft * rows.row(i).transpose() - &g;
            Ok(((corr.r0() - g.norm_squared()).max(0.0) + fit.norm_squared()).max(0.0))
        })
        .collect()
}

/// `B = Kᵀ (K R_uu Kᵀ)† K`, the quadratic-form matrix of `J_i(d)`.
///
/// Formed as `C†ᵀ Fᵀ(Fᵀ)† C†` (see [`solve`]), which agrees with the
/// literal expression on the range of `R_uu`, where every `r^{i+d}` lives.
pub fn quadratic_form_matrix(k: &KMatrix, ruu: &Matrix) -> Result<Matrix> {
    let f = Factored::new(k, ruu)?;
    let b = f.c_pinv.transpose() * f.range_projector() * &f.c_pinv;
    Ok((&b + b.transpose()) * 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayMse {
    pub delay: usize,
    pub channel_mse: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseScan {
    pub entries: Vec<DelayMse>,
    /// Delay with the smallest total MSE (first one on ties).
    pub best_delay: usize,
}

/// Analytic MSE for every delay in `delays`, ordered as given.
pub fn mse_vs_delay(k: &KMatrix, model: &SignalModel, delays: &[usize]) -> Result<MseScan> {
    if delays.is_empty() {
        return Err(Error::EmptyRange);
    }
    let m = k.decimation();
    let q = k.block_len();
    let max_delay = *delays.iter().max().expect("non-empty");
    let r = acf(model, (q - 1).max(max_delay + m - 1))?;
    let corr = bundle_from_acf(r, m, q, &[])?;
    let b = quadratic_form_matrix(k, corr.ruu())?;
    let acf_vals = corr.acf();
    let r0 = corr.r0();

    let entries: Vec<DelayMse> = delays
        .par_iter()
        .map(|&d| {
            let channel_mse: Vec<f64> = (0..m)
                .map(|i| {
                    let row = Vector::from_fn(q, |kk, _| acf_vals[kk.abs_diff(i + d)]);
                    (r0 - row.dot(&(&b * &row))).max(0.0)
                })
                .collect();
            let total = channel_mse.iter().sum();
            DelayMse {
                delay: d,
                channel_mse,
                total,
            }
        })
        .collect();
    let best_delay = entries
        .iter()
        .min_by(|a, b| a.total.total_cmp(&b.total).then(a.delay.cmp(&b.delay)))
        .map(|e| e.delay)
        .expect("non-empty");
    Ok(MseScan {
        entries,
        best_delay,
    })
}

/// The default delay scan `0..q`.
pub fn default_delays(k: &KMatrix) -> Vec<usize> {
    (0..k.block_len()).collect()
}
