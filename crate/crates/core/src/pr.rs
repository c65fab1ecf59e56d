//! Perfect-reconstruction analysis.
//!
//! With `s_i = Kᵀ a_i`, the polyphase product of synthesis and analysis
//! banks is `p_{i,j}(l) = s_i(j + M·l)`. The bank reconstructs perfectly,
//! `û(n) = c·u(n - d - M + 1)`, exactly when `s_i = c·e_{i+d}` for every
//! row `i` ([`check_pseudocirculant`]).
//!
//! Such rows exist iff `e_{d}, ..., e_{d+M-1}` lie in the row space of `K`,
//! i.e. iff rows and columns `d..d+M` of `K†K - I` vanish.
//! [`pr_feasibility`] finds the largest such zero band `[p, p+r)` and the
//! admissible delays `p ≤ d ≤ p + r - M`; [`pr_solution`] then returns
//! `a_i = c(K†)ᵀ e_{i+d} + (I - K K†)ᵀ w`, which never depends on the input
//! statistics.

use serde::Serialize;

use crate::bank::KMatrix;
use crate::mrmat::{build_decimation_matrix, null_space, pseudoinverse};
use crate::wiener::{SolutionKind, SynthesisSolution};
use crate::{Error, Matrix, Result, Vector};

/// Default zero-block tolerance, relative to `‖K†K‖_∞`.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Time-domain polyphase product `P(n) = A(n) ∗ E(n)`.
#[derive(Debug, Clone)]
pub struct PolyphaseProduct {
    /// Polyphase length of the analysis filters, `⌈Q/M⌉`.
    pub t: usize,
    /// `p[i][j]`, each of length `P + T - 1`.
    pub p: Vec<Vec<Vector>>,
    /// `s_i = Kᵀ a_i`, each of length `q = M(P-1)+Q`.
    pub s: Vec<Vector>,
}

/// `p_{i,j} = D^j Kᵀ a_i`, with `s_i` zero-padded to a multiple of `M`.
pub fn polyphase_product(k: &KMatrix, solution: &SynthesisSolution) -> Result<PolyphaseProduct> {
    let m = k.decimation();
    if solution.rows.ncols() != k.stacked_len() || solution.rows.nrows() != m {
        return Err(Error::DimensionMismatch(format!(
            "solution is {}x{}, K expects {}x{}",
            solution.rows.nrows(),
            solution.rows.ncols(),
            m,
            k.stacked_len()
        )));
    }
    let t = k.filter_len().div_ceil(m);
    let out_len = k.synthesis_len() + t - 1;
    let padded_len = m * out_len;
    let kt = k.as_matrix().transpose();
    let s: Vec<Vector> = (0..m).map(|i| &kt * solution.row(i)).collect();
    let selectors = (0..m)
        .map(|j| build_decimation_matrix(m, j, out_len, padded_len))
        .collect::<Result<Vec<_>>>()?;
    let p = s
        .iter()
        .map(|si| {
            let mut padded = Vector::zeros(padded_len);
            padded.rows_mut(0, si.len()).copy_from(si);
            selectors.iter().map(|d| d.as_matrix() * &padded).collect()
        })
        .collect();
    Ok(PolyphaseProduct { t, p, s })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PseudocirculantCheck {
    pub pass: bool,
    /// Detected gain `c`: the largest-magnitude entry of `s_0`.
    pub scale: f64,
    /// Detected delay `d0`: the position of that entry.
    pub delay: usize,
}

fn reference(s: &[Vector], tolerance: f64) -> Option<(f64, usize, f64)> {
    let s0 = s.first()?;
    let (d0, c) = s0
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0f64), |best, (i, x)| {
            if x.abs() > best.1.abs() {
                (i, x)
            } else {
                best
            }
        });
    if c == 0.0 || !c.is_finite() {
        return None;
    }
    // Above one half the "zero" and "equal to c" classes overlap.
    let tol = tolerance.clamp(0.0, 0.49);
    Some((c, d0, tol * c.abs()))
}

/// Checks `s_i ≈ c·e_{i+d0}` directly: `‖s_i - c·e_{i+d0}‖_∞ ≤ tol·|c|`.
pub fn check_pseudocirculant(s: &[Vector], tolerance: f64) -> PseudocirculantCheck {
    let Some((c, d0, thresh)) = reference(s, tolerance) else {
        return PseudocirculantCheck {
            pass: false,
            scale: 0.0,
            delay: 0,
        };
    };
    let pass = s.iter().enumerate().all(|(i, si)| {
        let target = i + d0;
        target < si.len()
            && si.iter().enumerate().all(|(l, &x)| {
                let expected = if l == target { c } else { 0.0 };
                (x - expected).abs() <= thresh
            })
    });
    PseudocirculantCheck {
        pass,
        scale: c,
        delay: d0,
    }
}

/// Checks the same condition through the structure of the polyphase
/// product `p_{i,j}(l) = s_i(j + M·l)`:
///
/// 1. each row `i` has exactly one non-zero `p_{i,j}`,
/// 2. each column `j` has at most one non-zero `p_{i,j}`,
/// 3. a non-zero `p_{i,j}` has a single non-zero entry,
/// 4. `p_{i+1,j+1} = p_{i,j}` on the support,
/// 5. `p_{i+1,0}(0) = 0` and `p_{i+1,0}(l) = p_{i,M-1}(l-1)`.
///
/// Entries with magnitude `≤ tol·|c|` count as zero and every non-zero
/// entry must equal `c` within the same margin.
pub fn check_pseudocirculant_properties(s: &[Vector], tolerance: f64) -> PseudocirculantCheck {
    let Some((c, d0, thresh)) = reference(s, tolerance) else {
        return PseudocirculantCheck {
            pass: false,
            scale: 0.0,
            delay: 0,
        };
    };
    let fail = PseudocirculantCheck {
        pass: false,
        scale: c,
        delay: d0,
    };
    let m = s.len();
    let len = s.iter().map(|v| v.len()).max().unwrap_or(0);
    let cells = len.div_ceil(m);
    let entry = |i: usize, j: usize, l: usize| s[i].get(j + m * l).copied().unwrap_or(0.0);
    let nonzero = |i: usize, j: usize, l: usize| entry(i, j, l).abs() > thresh;

    let mut used_columns = vec![false; m];
    for i in 0..m {
        let active: Vec<usize> = (0..m)
            .filter(|&j| (0..cells).any(|l| nonzero(i, j, l)))
            .collect();
        // Properties 1 and 2.
        if active.len() != 1 || used_columns[active[0]] {
            return fail;
        }
        let j = active[0];
        used_columns[j] = true;
        // Property 3, and the common value of the diagonal.
        let support: Vec<usize> = (0..cells).filter(|&l| nonzero(i, j, l)).collect();
        if support.len() != 1 || (entry(i, j, support[0]) - c).abs() > thresh {
            return fail;
        }
    }
    for i in 0..m.saturating_sub(1) {
        // Property 4.
        for j in 0..m - 1 {
            if (0..cells).any(|l| nonzero(i + 1, j + 1, l) != nonzero(i, j, l)) {
                return fail;
            }
        }
        // Property 5.
        if nonzero(i + 1, 0, 0) {
            return fail;
        }
        if (1..cells).any(|l| nonzero(i + 1, 0, l) != nonzero(i, m - 1, l - 1)) {
            return fail;
        }
    }
    PseudocirculantCheck {
        pass: true,
        scale: c,
        delay: d0,
    }
}

/// End-to-end sample delay `d0 + M - 1` of a passing bank.
pub fn reconstruction_identity(check: &PseudocirculantCheck, decimation: usize) -> Result<usize> {
    if !check.pass {
        return Err(Error::InvalidArgument(
            "reconstruction delay is only defined for a pseudocirculant product".into(),
        ));
    }
    Ok(check.delay + decimation - 1)
}

/// Outcome of the PR feasibility analysis of an analysis bank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCertificate {
    pub feasible: bool,
    /// Start of the largest zero band of `K†K - I`.
    pub p: usize,
    /// Width of that band.
    pub r: usize,
    /// `q = M(P-1)+Q`.
    pub q: usize,
    pub decimation: usize,
    /// `[p, p + r - M]` of the largest band, when feasible.
    pub delay_range: Option<(usize, usize)>,
    /// Delay ranges of every zero band at least `M` wide.
    pub delay_ranges: Vec<(usize, usize)>,
    /// Set when more than one band qualifies.
    pub multiple_intervals: bool,
    /// Largest `|K†K - I|` entry on the rows and columns of the band.
    pub zero_block_residual: f64,
    /// Absolute threshold used to call an entry zero.
    pub threshold: f64,
    /// Filled in by [`certify`].
    pub checked_delay: Option<usize>,
    pub c: Option<f64>,
    pub pseudocirculant_pass: Option<bool>,
    pub per_row_selectors: Option<Vec<Vec<f64>>>,
}

impl PrCertificate {
    pub fn admits_delay(&self, delay: usize) -> bool {
        self.delay_ranges
            .iter()
            .any(|&(lo, hi)| lo <= delay && delay <= hi)
    }

    fn ranges_text(&self) -> String {
        if self.delay_ranges.is_empty() {
            "{}".into()
        } else {
            self.delay_ranges
                .iter()
                .map(|(lo, hi)| format!("[{lo}, {hi}]"))
                .collect::<Vec<_>>()
                .join(" ∪ ")
        }
    }

    /// Machine-readable TOML report.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("certificate serializes")
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("feasible            : {}\n", self.feasible));
        out.push_str(&format!("q = M(P-1)+Q        : {}\n", self.q));
        out.push_str(&format!(
            "zero band [p, p+r)  : [{}, {})  (r = {}, M = {})\n",
            self.p,
            self.p + self.r,
            self.r,
            self.decimation
        ));
        out.push_str(&format!("delay range(s)      : {}\n", self.ranges_text()));
        if self.multiple_intervals {
            out.push_str("note                : several disjoint zero bands qualify; ranges are their union\n");
        }
        out.push_str(&format!(
            "zero-band residual  : {:.3e} (threshold {:.3e})\n",
            self.zero_block_residual, self.threshold
        ));
        if let (Some(d), Some(pass)) = (self.checked_delay, self.pseudocirculant_pass) {
            out.push_str(&format!(
                "PR design at d = {d:<3} : pseudocirculant {}, c = {}\n",
                if pass { "PASS" } else { "FAIL" },
                self.c.unwrap_or(f64::NAN)
            ));
        }
        out
    }
}

/// Finds the zero band of `K†K - I` and the admissible PR delays.
pub fn pr_feasibility(k: &KMatrix, tolerance: f64) -> Result<PrCertificate> {
    let km = k.as_matrix();
    let q = km.ncols();
    let m = k.decimation();
    let proj = pseudoinverse(km)? * km;
    let norm = proj
        .row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let threshold = tolerance * norm.max(f64::MIN_POSITIVE);
    let g = proj - Matrix::identity(q, q);
    let line_max: Vec<f64> = (0..q)
        .map(|i| g.row(i).amax().max(g.column(i).amax()))
        .collect();

    // Maximal runs of indices whose row and column vanish.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (i, &v) in line_max.iter().enumerate() {
        match (v <= threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - s));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, q - s));
    }
    let (p, r) = runs
        .iter()
        .copied()
        .fold((0, 0), |best, run| if run.1 > best.1 { run } else { best });
    let delay_ranges: Vec<(usize, usize)> = runs
        .iter()
        .filter(|&&(_, len)| len >= m)
        .map(|&(s, len)| (s, s + len - m))
        .collect();
    let feasible = r >= m;
    let zero_block_residual = line_max[p..p + r].iter().copied().fold(0.0, f64::max);
    Ok(PrCertificate {
        feasible,
        p,
        r,
        q,
        decimation: m,
        delay_range: feasible.then(|| (p, p + r - m)),
        multiple_intervals: delay_ranges.len() > 1,
        delay_ranges,
        zero_block_residual,
        threshold,
        checked_delay: None,
        c: None,
        pseudocirculant_pass: None,
        per_row_selectors: None,
    })
}

/// PR synthesis bank `a_i = c(K†)ᵀ e_{i+d} + (I - K K†)ᵀ w`.
///
/// Fails when the bank admits no PR solution or when `d` lies outside the
/// admissible range.
pub fn pr_solution(
    k: &KMatrix,
    delay: usize,
    scale: f64,
    w: Option<&Vector>,
    tolerance: f64,
) -> Result<SynthesisSolution> {
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::InvalidArgument(
            "PR gain c must be finite and non-zero".into(),
        ));
    }
    let cert = pr_feasibility(k, tolerance)?;
    if !cert.feasible {
        return Err(Error::InfeasibleBank);
    }
    if !cert.admits_delay(delay) {
        return Err(Error::DelayOutOfRange {
            delay,
            ranges: cert.ranges_text(),
        });
    }
    let q = k.block_len();
    let rhs = (0..k.decimation())
        .map(|i| {
            let mut e = Vector::zeros(q);
            e[i + delay] = scale;
            e
        })
        .collect();
    let system = k.as_matrix().transpose();
    SynthesisSolution::from_system(
        SolutionKind::PerfectReconstruction,
        system,
        rhs,
        w,
        k,
        delay,
        scale,
    )
}

/// Feasibility plus a PR design at `delay` (default: the first admissible
/// delay) checked for the pseudocirculant property.
pub fn certify(
    k: &KMatrix,
    delay: Option<usize>,
    scale: f64,
    tolerance: f64,
) -> Result<PrCertificate> {
    let mut cert = pr_feasibility(k, tolerance)?;
    let Some(d) = delay.or(cert.delay_range.map(|r| r.0)) else {
        return Ok(cert);
    };
    cert.checked_delay = Some(d);
    match pr_solution(k, d, scale, None, tolerance) {
        Ok(sol) => {
            let product = polyphase_product(k, &sol)?;
            let check = check_pseudocirculant(&product.s, tolerance);
            cert.c = Some(check.scale);
            cert.pseudocirculant_pass = Some(check.pass && check.delay == d);
            cert.per_row_selectors = Some(
                product
                    .s
                    .iter()
                    .map(|v| v.iter().copied().collect())
                    .collect(),
            );
        }
        Err(Error::InfeasibleBank | Error::DelayOutOfRange { .. }) => {
            cert.pseudocirculant_pass = Some(false);
        }
        Err(e) => return Err(e),
    }
    Ok(cert)
}

/// Every null-space basis vector of `K` vanishes on `[p, p+r)`.
pub fn nullspace_structure_check(
    k: &KMatrix,
    cert: &PrCertificate,
    tolerance: f64,
) -> Result<bool> {
    let basis = null_space(k.as_matrix())?;
    let band = cert.p..(cert.p + cert.r).min(basis.nrows());
    Ok(basis
        .column_iter()
        .all(|z| band.clone().all(|idx| z[idx].abs() <= tolerance)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::Bank;
    use crate::stochastic::SignalModel;
    use crate::wiener::{solve, WienerProblem};

    fn unit(len: usize, at: usize, c: f64) -> Vector {
        let mut v = Vector::zeros(len);
        v[at] = c;
        v
    }

    #[test]
    fn pseudocirculant_examples() {
        let s = vec![unit(8, 3, 1.0), unit(8, 4, 1.0)];
        for check in [
            check_pseudocirculant(&s, 1e-8),
            check_pseudocirculant_properties(&s, 1e-8),
        ] {
            assert_eq!(
                check,
                PseudocirculantCheck {
                    pass: true,
                    scale: 1.0,
                    delay: 3
                }
            );
        }
        let mut bad = unit(8, 0, 1.0);
        bad[1] = 0.5;
        let s = vec![bad, unit(8, 1, 1.0)];
        assert!(!check_pseudocirculant(&s, 1e-8).pass);
        assert!(!check_pseudocirculant_properties(&s, 1e-8).pass);
        // Selector for the last row would fall off the end.
        let s = vec![unit(4, 3, 2.0), Vector::zeros(4)];
        assert!(!check_pseudocirculant(&s, 1e-8).pass);
        assert!(!check_pseudocirculant_properties(&s, 1e-8).pass);
    }

    #[test]
    fn reconstruction_delay() {
        let pass = PseudocirculantCheck {
            pass: true,
            scale: 1.0,
            delay: 0,
        };
        assert_eq!(reconstruction_identity(&pass, 2).unwrap(), 1);
        assert_eq!(reconstruction_identity(&pass, 6).unwrap(), 5);
        let d12 = PseudocirculantCheck { delay: 12, ..pass };
        assert_eq!(reconstruction_identity(&d12, 4).unwrap(), 15);
        assert!(reconstruction_identity(
            &PseudocirculantCheck {
                pass: false,
                ..pass
            },
            2
        )
        .is_err());
    }

    #[test]
    fn full_column_rank_is_feasible_everywhere() {
        let k = Bank::uniform(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 2)
            .unwrap()
            .build_k(2)
            .unwrap();
        let cert = pr_feasibility(&k, DEFAULT_TOLERANCE).unwrap();
        assert!(cert.feasible);
        assert_eq!((cert.p, cert.r, cert.q), (0, 4, 4));
        assert_eq!(cert.delay_range, Some((0, 2)));
        assert!(nullspace_structure_check(&k, &cert, 1e-8).unwrap());
    }

    #[test]
    fn lazy_bank_pr_solution_is_selector() {
        let k = Bank::uniform(vec![vec![1.0], vec![0.0, 1.0]], 2)
            .unwrap()
            .build_k(1)
            .unwrap();
        let sol = pr_solution(&k, 0, 1.0, None, DEFAULT_TOLERANCE).unwrap();
        assert!((&sol.rows - Matrix::identity(2, 2)).amax() < 1e-15);
        let prod = polyphase_product(&k, &sol).unwrap();
        let check = check_pseudocirculant(&prod.s, 1e-10);
        assert!(check.pass);
        assert_eq!(check.delay, 0);
        // p_{0,0} = δ, p_{1,1} = δ, off-diagonal zero.
        assert_eq!(prod.p[0][0][0], 1.0);
        assert_eq!(prod.p[1][1][0], 1.0);
        assert_eq!(prod.p[0][1].amax(), 0.0);
    }

    #[test]
    fn infeasible_and_out_of_range() {
        // One channel, M = 2: K is P × (2(P-1)+Q) with rank P, never PR.
        let k = Bank::uniform(vec![vec![1.0, 0.5]], 2)
            .unwrap()
            .build_k(3)
            .unwrap();
        let cert = pr_feasibility(&k, DEFAULT_TOLERANCE).unwrap();
        assert!(!cert.feasible);
        assert!(cert.delay_range.is_none());
        assert!(matches!(
            pr_solution(&k, 0, 1.0, None, DEFAULT_TOLERANCE),
            Err(Error::InfeasibleBank)
        ));

        let k = Bank::uniform(vec![vec![1.0], vec![0.0, 1.0]], 2)
            .unwrap()
            .build_k(1)
            .unwrap();
        assert!(matches!(
            pr_solution(&k, 1, 1.0, None, DEFAULT_TOLERANCE),
            Err(Error::DelayOutOfRange { delay: 1, .. })
        ));
        assert!(pr_solution(&k, 0, 0.0, None, DEFAULT_TOLERANCE).is_err());
    }

    #[test]
    fn pr_family_with_random_w_keeps_selector() {
        let mut taps = vec![vec![1.0, 0.3], vec![0.2, -1.0, 0.4], vec![0.5, 0.5]];
        taps.push(taps[1].clone());
        let k = Bank::uniform(taps, 2).unwrap().build_k(3).unwrap();
        let cert = pr_feasibility(&k, DEFAULT_TOLERANCE).unwrap();
        assert!(cert.feasible);
        let d = cert.delay_range.unwrap().0;
        let w = Vector::from_fn(k.stacked_len(), |i, _| (i as f64 * 0.7).sin() * 3.0);
        let a = pr_solution(&k, d, 1.0, None, DEFAULT_TOLERANCE).unwrap();
        let b = pr_solution(&k, d, 1.0, Some(&w), DEFAULT_TOLERANCE).unwrap();
        assert!((&a.rows - &b.rows).amax() > 1e-3);
        for sol in [&a, &b] {
            let prod = polyphase_product(&k, sol).unwrap();
            let c1 = check_pseudocirculant(&prod.s, 1e-9);
            let c2 = check_pseudocirculant_properties(&prod.s, 1e-9);
            assert!(c1.pass && c2.pass);
            assert_eq!((c1.delay, c2.delay), (d, d));
            assert!((c1.scale - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wiener_at_pr_delay_is_pr() {
        let k = Bank::uniform(vec![vec![1.0, 0.5], vec![0.5, -1.0]], 2)
            .unwrap()
            .build_k(2)
            .unwrap();
        let cert = pr_feasibility(&k, DEFAULT_TOLERANCE).unwrap();
        let d = cert.delay_range.unwrap().0;
        let model = SignalModel::ar_unit_variance(vec![0.8]).unwrap();
        let sol = solve(&WienerProblem::new(k.clone(), &model, d).unwrap(), None).unwrap();
        assert!(sol.total_mse.unwrap() < 1e-12);
        let prod = polyphase_product(&k, &sol).unwrap();
        assert!(check_pseudocirculant(&prod.s, 1e-8).pass);
    }

    #[test]
    fn duplicated_channel_keeps_null_space() {
        let base = vec![vec![1.0, 0.3, -0.2], vec![0.4, 1.0]];
        let mut dup = base.clone();
        dup.push(base[0].clone());
        let k1 = Bank::uniform(base, 2).unwrap().build_k(2).unwrap();
        let k2 = Bank::uniform(dup, 2).unwrap().build_k(2).unwrap();
        let c1 = pr_feasibility(&k1, DEFAULT_TOLERANCE).unwrap();
        let c2 = pr_feasibility(&k2, DEFAULT_TOLERANCE).unwrap();
        assert_eq!((c1.p, c1.r), (c2.p, c2.r));
        assert_eq!(
            null_space(k1.as_matrix()).unwrap().ncols(),
            null_space(k2.as_matrix()).unwrap().ncols()
        );
        assert!(nullspace_structure_check(&k2, &c2, 1e-8).unwrap());
    }

    #[test]
    fn certificate_reports() {
        let k = Bank::uniform(vec![vec![1.0, 0.5], vec![0.5, -1.0]], 2)
            .unwrap()
            .build_k(2)
            .unwrap();
        let cert = certify(&k, None, 1.0, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(cert.pseudocirculant_pass, Some(true));
        let text = cert.to_toml();
        assert!(text.contains("feasible = true"), "{text}");
        assert!(cert.summary().contains("PASS"));
    }
}
