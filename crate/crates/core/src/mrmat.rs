//! Time-domain matrix forms of multirate operations.
//!
//! Sequences are handled as observation vectors `[v(n-P+1), ..., v(n)]`
//! (oldest first). Their time reversal, `[v(n), ..., v(n-P+1)]`, is obtained
//! with the counter-identity `J_P`, and a matrix is reversed along both axes
//! with `J_M B J_N` ([`reverse_matrix`]).
//!
//! | operator | shape | meaning |
//! |---|---|---|
//! | [`DecimationMatrix`] `D^l` | `rows × cols` | picks `x(M·i + l)` |
//! | [`ExpansionMatrix`] `U` | `(M(P-1)+1) × P` | inserts `M-1` zeros, `U = (D^0)^T` |
//! | [`ConvolutionForm::Observation`] `H` | `P × (P+Q-1)` | last `P` outputs of a filter from the last `P+Q-1` inputs |
//! | [`ConvolutionForm::FullOutput`] `H̃` | `(P+Q-1) × P` | full convolution of a finite block |
//!
//! The two convolution forms are related by `H̃ = reverse(H)^T`.

use nalgebra::SVD;

use crate::{Error, Matrix, Result};

/// 0/1 matrix with a unit entry at `(i, M·i + l)` for every row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecimationMatrix {
    factor: usize,
    advance: usize,
    matrix: Matrix,
}

impl DecimationMatrix {
    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn advance(&self) -> usize {
        self.advance
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}

/// `M`-fold expander acting on a length-`P` block; the transpose of the
/// zero-advance decimation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionMatrix {
    factor: usize,
    matrix: Matrix,
}

impl ExpansionMatrix {
    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionForm {
    /// `y(n) = H x(n)`: maps the input observation vector of length
    /// `P+Q-1` to the output observation vector of length `P`.
    Observation,
    /// `y = H̃ x`: complete output (length `P+Q-1`) of a length-`P` input
    /// block that vanishes outside `[0, P-1]`.
    FullOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionMatrix {
    taps: Vec<f64>,
    form: ConvolutionForm,
    matrix: Matrix,
}

impl ConvolutionMatrix {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn form(&self) -> ConvolutionForm {
        self.form
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}

/// Builds `D^l` of size `out_len × in_len` with `D(i, j) = 1` iff `j = M·i + l`.
///
/// Every row must land inside the input, i.e. `M·(out_len-1) + l < in_len`.
pub fn build_decimation_matrix(
    factor: usize,
    advance: usize,
    out_len: usize,
    in_len: usize,
) -> Result<DecimationMatrix> {
    if factor == 0 {
        return Err(Error::InvalidArgument(
            "decimation factor must be >= 1".into(),
        ));
    }
    if out_len == 0 {
        return Err(Error::InvalidArgument(
            "decimation output length must be >= 1".into(),
        ));
    }
    let last = factor * (out_len - 1) + advance;
    if last >= in_len {
        return Err(Error::DimensionMismatch(format!(
            "decimation by {factor} with advance {advance}: row {} reads column {last}, input has {in_len}",
            out_len - 1
        )));
    }
    let mut matrix = Matrix::zeros(out_len, in_len);
    for i in 0..out_len {
        matrix[(i, factor * i + advance)] = 1.0;
    }
    Ok(DecimationMatrix {
        factor,
        advance,
        matrix,
    })
}

/// Builds the expander `U` of size `(M(in_len-1)+1) × in_len`.
pub fn build_expansion_matrix(factor: usize, in_len: usize) -> Result<ExpansionMatrix> {
    if in_len == 0 {
        return Err(Error::InvalidArgument(
            "expansion input length must be >= 1".into(),
        ));
    }
    let decim = build_decimation_matrix(factor, 0, in_len, factor * (in_len - 1) + 1)?;
    Ok(ExpansionMatrix {
        factor,
        matrix: decim.matrix.transpose(),
    })
}

/// Builds either convolution form for a causal FIR filter and an
/// observation length `obs_len` (`P`).
pub fn build_convolution_matrix(
    taps: &[f64],
    obs_len: usize,
    form: ConvolutionForm,
) -> Result<ConvolutionMatrix> {
    if taps.is_empty() {
        return Err(Error::EmptyTaps);
    }
    if obs_len == 0 {
        return Err(Error::InvalidArgument(
            "observation length must be >= 1".into(),
        ));
    }
    let q = taps.len();
    let matrix = match form {
        ConvolutionForm::Observation => {
            // Row i: h(Q-1) .. h(0) starting at column i.
            let mut h = Matrix::zeros(obs_len, obs_len + q - 1);
            for i in 0..obs_len {
                for (k, &tap) in taps.iter().enumerate() {
                    h[(i, i + q - 1 - k)] = tap;
                }
            }
            h
        }
        ConvolutionForm::FullOutput => {
            let mut h = Matrix::zeros(obs_len + q - 1, obs_len);
            for j in 0..obs_len {
                for (k, &tap) in taps.iter().enumerate() {
                    h[(j + k, j)] = tap;
                }
            }
            h
        }
    };
    Ok(ConvolutionMatrix {
        taps: taps.to_vec(),
        form,
        matrix,
    })
}

/// `J_M B J_N`: reverses the order of both rows and columns.
pub fn reverse_matrix(b: &Matrix) -> Matrix {
    let (rows, cols) = b.shape();
    Matrix::from_fn(rows, cols, |i, j| b[(rows - 1 - i, cols - 1 - j)])
}

/// Singular values at or below this are treated as zero.
pub fn rank_threshold(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

fn svd(a: &Matrix) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    // A convergence threshold of a single epsilon can make the bidiagonal
    // iteration stop on a wrong decomposition; 5 eps is nalgebra's default.
    let dec = SVD::try_new(a.clone(), true, true, 5.0 * f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numerical(format!(
            "SVD of {}x{} matrix did not converge",
            a.nrows(),
            a.ncols()
        ))
    })?;
    let (u, v_t) = (
        dec.u.as_ref().expect("requested U"),
        dec.v_t.as_ref().expect("requested V^T"),
    );
    let rebuilt = u * Matrix::from_diagonal(&dec.singular_values) * v_t;
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let err = (rebuilt - a).amax();
    if err.is_nan() || err > 1e-10 * scale * a.nrows().max(a.ncols()) as f64 {
        return Err(Error::Numerical(format!(
            "SVD of {}x{} matrix is inaccurate (reconstruction error {err:e})",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(dec)
}

/// Moore-Penrose pseudoinverse through a thresholded SVD.
pub fn pseudoinverse(a: &Matrix) -> Result<Matrix> {
    Ok(pseudoinverse_with_rank(a)?.0)
}

/// Pseudoinverse together with the numerical rank used to form it.
pub fn pseudoinverse_with_rank(a: &Matrix) -> Result<(Matrix, usize)> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(
            "pseudoinverse of an empty matrix".into(),
        ));
    }
    let dec = svd(a)?;
    let sigma_max = dec.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = rank_threshold(rows, cols, sigma_max);
    let u = dec.u.as_ref().expect("requested U");
    let v_t = dec.v_t.as_ref().expect("requested V^T");

    let mut pinv = Matrix::zeros(cols, rows);
    let mut rank = 0;
    for (k, &s) in dec.singular_values.iter().enumerate() {
        if s > tol && s > 0.0 {
            rank += 1;
            // pinv += v_k u_k^T / s
            pinv.ger(1.0 / s, &v_t.row(k).transpose(), &u.column(k), 1.0);
        }
    }
    Ok((pinv, rank))
}

/// Numerical rank under the same threshold as [`pseudoinverse`].
pub fn rank(a: &Matrix) -> Result<usize> {
    if a.is_empty() {
        return Ok(0);
    }
    let s = svd(a)?.singular_values;
    let sigma_max = s.iter().copied().fold(0.0, f64::max);
    let tol = rank_threshold(a.nrows(), a.ncols(), sigma_max);
    Ok(s.iter().filter(|&&x| x > tol && x > 0.0).count())
}

/// Orthonormal basis of the (right) null space of `a`, one basis vector per
/// column of the result.
pub fn null_space(a: &Matrix) -> Result<Matrix> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    // Pad with zero rows so the SVD returns a full n×n V.
    let padded = if rows < cols {
        let mut p = Matrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let dec = svd(&padded)?;
    let sigma_max = dec.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = rank_threshold(rows, cols, sigma_max);
    let v_t = dec.v_t.as_ref().expect("requested V^T");
    let null_rows: Vec<usize> = dec
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol || s == 0.0)
        .map(|(k, _)| k)
        .collect();
    let mut basis = Matrix::zeros(cols, null_rows.len());
    for (c, &k) in null_rows.iter().enumerate() {
        basis.set_column(c, &v_t.row(k).transpose());
    }
    Ok(basis)
}
