//! Regularized slip estimation and discrepancy-principle choice of `C`.
//!
//! For `B = 𝒟A`, `w = 𝒟u` and `K = DᵀD + EᵀE = LLᵀ`, the minimizer of
//! `‖Bg − w‖² + C gᵀKg` is reduced through `X = L⁻¹Bᵀ` and the spectrum of
//! the small matrix `G = XᵀX = B K⁻¹ Bᵀ = U Λ Uᵀ`. With `z = Uᵀw`:
//!
//! ```text
//! g        = L⁻ᵀ X U (Λ + C)⁻¹ z
//! misfit²  = Σ (C z_i / (λ_i + C))²
//! penalty  = Σ λ_i z_i² / (λ_i + C)²
//! misfit² + C·penalty = C Σ z_i² / (λ_i + C)
//! ```
//!
//! so every quantity needed by the sweep costs O(3N) per value of `C`.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{weighted, ForwardSystem};
use crate::grid::DifferenceOperators;
use crate::linalg::thin_svd;

/// Search interval for `C`.
pub const C_BRACKET: (f64, f64) = (1e-12, 1e6);
/// The lower end of [`C_BRACKET`] is pushed down, three decades at a time,
/// while the misfit there still exceeds the target, but not below this.
pub const C_FLOOR: f64 = 1e-200;
/// Bisection steps in `log10 C`.
pub const MAX_BISECTION: usize = 60;
/// Relative tolerance on the misfit when matching the error target.
pub const MISFIT_RTOL: f64 = 1e-4;

/// Spectral form of one `(m, u)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Eigenvalues of `G`; numerically null directions are exactly 0.
    pub lambda: Vec<f64>,
    /// `Uᵀw`.
    pub z: Vec<f64>,
    /// Squared norm of `w` outside the span of the eigenvectors.
    pub outside: f64,
    /// `‖w‖`.
    pub w_norm: f64,
}

impl Spectrum {
    /// Eigenvalues at or below `tol` are treated as exact zeros.
    fn new(mut lambda: Vec<f64>, z: Vec<f64>, w_norm: f64, full_basis: bool, tol: f64) -> Self {
        for l in lambda.iter_mut() {
            if *l <= tol {
                *l = 0.0;
            }
        }
        let outside = if full_basis {
            0.0
        } else {
            (w_norm * w_norm - z.iter().map(|v| v * v).sum::<f64>()).max(0.0)
        };
        Spectrum {
            lambda,
            z,
            outside,
            w_norm,
        }
    }

    /// `‖Bg_C − w‖`. At `C = 0` this is the distance from `w` to `range(B)`.
    pub fn misfit(&self, c: f64) -> f64 {
        let mut s = self.outside;
        for (l, z) in self.lambda.iter().zip(&self.z) {
            if c == 0.0 {
                if *l == 0.0 {
                    s += z * z;
                }
            } else {
                let r = c * z / (l + c);
                s += r * r;
            }
        }
        s.sqrt()
    }

    /// `g_Cᵀ K g_C`.
    pub fn penalty(&self, c: f64) -> f64 {
        self.lambda
            .iter()
            .zip(&self.z)
            .filter(|(l, _)| **l > 0.0)
            .map(|(l, z)| l * z * z / ((l + c) * (l + c)))
            .sum()
    }

    /// Minimum value `misfit² + C·penalty`.
    pub fn objective(&self, c: f64) -> f64 {
        c * (self.outside / c
            + self
                .lambda
                .iter()
                .zip(&self.z)
                .map(|(l, z)| z * z / (l + c))
                .sum::<f64>())
    }

    /// `(‖w − Pw‖, ‖w‖)`, the limits of the misfit as `C → 0` and `C → ∞`.
    pub fn endpoints(&self) -> (f64, f64) {
        (self.misfit(0.0), self.w_norm)
    }

    /// Discrepancy principle: the `C` whose misfit equals `err_target`.
    pub fn select_c(&self, err_target: f64) -> Result<CSelection> {
        let (lo, hi) = self.endpoints();
        if !(err_target > 0.0) || err_target >= hi {
            return Err(Error::ErrTargetOutOfRange {
                target: err_target,
                upper: hi,
            });
        }
        if err_target <= lo {
            return Ok(CSelection {
                c: 0.0,
                outcome: COutcome::BelowLowerEndpoint,
                iterations: 0,
                misfit: lo,
            });
        }
        let (mut cmin, cmax) = C_BRACKET;
        let top = self.misfit(cmax);
        if top < err_target * (1.0 - MISFIT_RTOL) {
            warn!("error target {err_target:e} not reached at C = {cmax:e} (misfit {top:e})");
            return Ok(CSelection {
                c: cmax,
                outcome: COutcome::BracketTop,
                iterations: 0,
                misfit: top,
            });
        }
        let mut bottom = self.misfit(cmin);
        while bottom > err_target * (1.0 + MISFIT_RTOL) && cmin > C_FLOOR {
            cmin *= 1e-3;
            bottom = self.misfit(cmin);
        }
        if bottom > err_target * (1.0 + MISFIT_RTOL) {
            warn!("error target {err_target:e} below misfit {bottom:e} at C = {cmin:e}");
            return Ok(CSelection {
                c: cmin,
                outcome: COutcome::BracketBottom,
                iterations: 0,
                misfit: bottom,
            });
        }
        let (mut a, mut b) = (cmin.log10(), cmax.log10());
        let mut best = (cmin, bottom);
        for it in 1..=MAX_BISECTION {
            let mid = 0.5 * (a + b);
            let c = 10f64.powf(mid);
            let f = self.misfit(c);
            best = (c, f);
            if (f - err_target).abs() <= MISFIT_RTOL * err_target {
                return Ok(CSelection {
                    c,
                    outcome: COutcome::Converged,
                    iterations: it,
                    misfit: f,
                });
            }
            if f < err_target {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(CSelection {
            c: best.0,
            outcome: COutcome::Converged,
            iterations: MAX_BISECTION,
            misfit: best.1,
        })
    }
}

/// How a per-cell `C` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum COutcome {
    Converged,
    /// The target is at or below the smallest attainable misfit; `C = 0`.
    BelowLowerEndpoint,
    /// Clamped to the top of the bracket.
    BracketTop,
    /// Clamped to [`C_FLOOR`].
    BracketBottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CSelection {
    pub c: f64,
    pub outcome: COutcome,
    pub iterations: usize,
    pub misfit: f64,
}

/// Regularized solution for one `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct TikhonovSolution {
    pub c: f64,
    pub slip: DVector<f64>,
    pub misfit: f64,
    pub penalty: f64,
    pub objective: f64,
}

/// Reduced problem for one geometry and data vector, with the vectors
/// needed to form slips and covariances.
#[derive(Debug, Clone)]
pub struct Regularized {
    pub spectrum: Spectrum,
    // L⁻ᵀ X U, with null directions zeroed
    y: DMatrix<f64>,
    k_inv_diag: Vec<f64>,
}

impl Regularized {
    pub fn new(system: &ForwardSystem, ops: &DifferenceOperators, u: &DVector<f64>) -> Result<Self> {
        check_len(system, ops, u)?;
        let b = system.weighted_operator();
        let w = u.component_mul(&system.weights);
        // X = P Σ Qᵀ; G = Q Σ² Qᵀ and X Q = P Σ
        let svd = thin_svd(&lower_solve_transposed(&b, ops))?;
        let p = svd.u;
        let qt = svd.v_t;
        let sigma = svd.singular_values;
        let lambda: Vec<f64> = sigma.iter().map(|s| s * s).collect();
        let z = (&qt * &w).as_slice().to_vec();
        let full = qt.nrows() == w.len();
        // singular values carry absolute error ~ eps·σ_max, so the cutoff is
        // on σ; a cutoff on σ² would drop directions with σ ~ √C
        let smax = sigma.iter().copied().fold(0.0, f64::max);
        let s_tol = 4.0 * lambda.len().max(1) as f64 * f64::EPSILON * smax;
        let spectrum = Spectrum::new(lambda, z, w.norm(), full, s_tol * s_tol);
        let mut y = p;
        for (i, mut col) in y.column_iter_mut().enumerate() {
            if spectrum.lambda[i] == 0.0 {
                col.fill(0.0);
            } else {
                col *= sigma[i];
                ops.solve_upper(col.as_mut_slice());
            }
        }
        let k_inv_diag = ops.k_inv.diagonal().as_slice().to_vec();
        Ok(Regularized {
            spectrum,
            y,
            k_inv_diag,
        })
    }

    pub fn solve(&self, c: f64) -> Result<TikhonovSolution> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::NonPositiveC(c));
        }
        let s = &self.spectrum;
        let coef = DVector::from_iterator(
            s.lambda.len(),
            s.lambda.iter().zip(&s.z).map(|(l, z)| z / (l + c)),
        );
        Ok(TikhonovSolution {
            c,
            slip: &self.y * coef,
            misfit: s.misfit(c),
            penalty: s.penalty(c),
            objective: s.objective(c),
        })
    }

    /// Diagonal of the slip posterior covariance `(BᵀB + CK)⁻¹` at `τ = 1`.
    pub fn covariance_diag(&self, c: f64) -> Result<Vec<f64>> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::NonPositiveC(c));
        }
        let lambda = &self.spectrum.lambda;
        Ok(self
            .k_inv_diag
            .iter()
            .enumerate()
            .map(|(k, kk)| {
                let corr: f64 = self
                    .y
                    .row(k)
                    .iter()
                    .zip(lambda)
                    .map(|(v, l)| v * v / (l + c))
                    .sum();
                ((kk - corr) / c).max(0.0)
            })
            .collect())
    }
}

/// `L⁻¹ Bᵀ` as a q × 3N matrix.
fn lower_solve_transposed(b: &DMatrix<f64>, ops: &DifferenceOperators) -> DMatrix<f64> {
    let mut x = b.transpose();
    for mut col in x.column_iter_mut() {
        ops.solve_lower(col.as_mut_slice());
    }
    x
}

fn check_len(system: &ForwardSystem, ops: &DifferenceOperators, u: &DVector<f64>) -> Result<()> {
    if u.len() != system.n_data() {
        return Err(Error::LengthMismatch {
            expected: system.n_data(),
            got: u.len(),
        });
    }
    if ops.q() != system.q() {
        return Err(Error::LengthMismatch {
            expected: system.q(),
            got: ops.q(),
        });
    }
    Ok(())
}

/// Minimizer of `‖𝒟(Ag − u)‖² + C gᵀKg` for `C > 0`.
pub fn solve(
    system: &ForwardSystem,
    ops: &DifferenceOperators,
    u: &DVector<f64>,
    c: f64,
) -> Result<TikhonovSolution> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::NonPositiveC(c));
    }
    Regularized::new(system, ops, u)?.solve(c)
}

/// `(‖𝒟(u − v)‖, ‖𝒟u‖)` with `𝒟v` the projection of `𝒟u` onto `range(𝒟A)`.
pub fn misfit_endpoints(system: &ForwardSystem, u: &DVector<f64>) -> Result<(f64, f64)> {
    if u.len() != system.n_data() {
        return Err(Error::LengthMismatch {
            expected: system.n_data(),
            got: u.len(),
        });
    }
    let w = u.component_mul(&system.weights);
    let r = system.svd.rank();
    let ur = system.svd.u.columns(0, r);
    let proj = ur * (ur.transpose() * &w);
    Ok(((&w - proj).norm(), w.norm()))
}

/// Per-cell discrepancy-principle `C`.
pub fn select_c_cell(
    system: &ForwardSystem,
    ops: &DifferenceOperators,
    u: &DVector<f64>,
    err_target: f64,
) -> Result<CSelection> {
    Regularized::new(system, ops, u)?.spectrum.select_c(err_target)
}

/// Everything the sweep keeps per cell: the reduced spectrum plus the
/// squared singular values of `𝒟A` for the determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpectrum {
    pub spectrum: Spectrum,
    /// Squared singular values of `𝒟A`, descending, `min(3N, q)` of them.
    pub mu_sq: Vec<f64>,
    pub q: usize,
}

impl CellSpectrum {
    /// Gram-matrix route from an assembled `A`: two small symmetric
    /// eigenproblems instead of SVDs of the wide operator.
    pub fn from_operator(
        a: &DMatrix<f64>,
        weights: &DVector<f64>,
        ops: &DifferenceOperators,
        u: &DVector<f64>,
    ) -> Result<Self> {
        if u.len() != a.nrows() || weights.len() != a.nrows() {
            return Err(Error::LengthMismatch {
                expected: a.nrows(),
                got: u.len(),
            });
        }
        let b = weighted(a, weights);
        let w = u.component_mul(weights);
        let x = lower_solve_transposed(&b, ops);
        let g = x.transpose() * &x;
        let eig = SymmetricEigen::try_new(g, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
        let z = (eig.eigenvectors.transpose() * &w).as_slice().to_vec();
        let lambda: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        let lmax = lambda.iter().copied().fold(0.0, f64::max);
        let tol = 4.0 * lambda.len().max(1) as f64 * f64::EPSILON * lmax;
        let spectrum = Spectrum::new(lambda, z, w.norm(), true, tol);

        let bbt = &b * b.transpose();
        let mu = SymmetricEigen::try_new(bbt, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
        let mut mu_sq: Vec<f64> = mu.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        mu_sq.sort_by(|x, y| y.total_cmp(x));
        mu_sq.truncate(a.ncols().min(a.nrows()));
        Ok(CellSpectrum {
            spectrum,
            mu_sq,
            q: a.ncols(),
        })
    }

    /// Same content from a fully factored system.
    pub fn from_system(system: &ForwardSystem, ops: &DifferenceOperators, u: &DVector<f64>) -> Result<Self> {
        let reg = Regularized::new(system, ops, u)?;
        Ok(CellSpectrum {
            spectrum: reg.spectrum,
            mu_sq: system.svd.singular_values.iter().map(|s| s * s).collect(),
            q: system.q(),
        })
    }

    /// Unnormalized log marginal density of `m` (prior factor excluded).
    pub fn log_density(&self, c: f64, tau: f64) -> Result<f64> {
        log_density_from(&self.spectrum, self.mu_sq.iter().copied(), self.q, c, tau)
    }
}

/// `−(τ/2)·F − ½ Σ_{j≤q} log(τ(μ_j² + C)/2π)`, μ zero-padded to `q`.
pub(crate) fn log_density_from(
    spectrum: &Spectrum,
    mu_sq: impl Iterator<Item = f64>,
    q: usize,
    c: f64,
    tau: f64,
) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::NonPositiveC(c));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::NonPositiveTau(tau));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut log_det = 0.0;
    let mut count = 0;
    for m2 in mu_sq.take(q) {
        log_det += (tau * (m2 + c) / two_pi).ln();
        count += 1;
    }
    log_det += (q - count) as f64 * (tau * c / two_pi).ln();
    Ok(-0.5 * tau * spectrum.objective(c) - 0.5 * log_det)
}

/// Global `C`: the largest per-cell value over admissible cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalC {
    pub c: f64,
    pub per_cell: Vec<Option<CSelection>>,
}

impl GlobalC {
    pub fn count(&self, outcome: COutcome) -> usize {
        self.per_cell.iter().flatten().filter(|s| s.outcome == outcome).count()
    }
}

pub fn select_c_global(cells: &[Option<CellSpectrum>], err_target: f64) -> Result<GlobalC> {
    let per_cell = cells
        .iter()
        .map(|c| c.as_ref().map(|c| c.spectrum.select_c(err_target)).transpose())
        .collect::<Result<Vec<_>>>()?;
    let c = per_cell.iter().flatten().map(|s| s.c).fold(0.0, f64::max);
    if per_cell.iter().all(Option::is_none) {
        return Err(Error::Data("no admissible cell in the parameter box".into()));
    }
    if !(c > 0.0) {
        return Err(Error::DegenerateC);
    }
    let tops = per_cell
        .iter()
        .flatten()
        .filter(|s| s.outcome == COutcome::BracketTop)
        .count();
    if tops > 0 {
        warn!("{tops} cells hit the top of the C bracket");
    }
    Ok(GlobalC { c, per_cell })
}
