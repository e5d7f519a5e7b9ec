//! Slip discretization on the fault rectangle.
//!
//! The rectangle `R` carries an `n × n` grid of interior nodes (row-major,
//! x1 fastest); slip is implicitly zero on the boundary. Gradients are
//! approximated by unscaled first differences `D` (along x1) and `E` (along
//! x2), each of the form `I − S` with `S` a nilpotent shift. The grid spacing
//! factor is left out of `D` and `E` and is absorbed into the regularization
//! constant.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{cross3, GeometryParam};

/// Default vertical clearance between every fault node and the surface (km).
pub const DEFAULT_DEPTH_GUARD_KM: f64 = 2.0;

/// In-plane slip direction convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum Rake {
    /// Up-dip along the steepest ascent of the plane.
    #[default]
    SteepestAscent,
    /// Steepest ascent rotated in the fault plane by the given angle in
    /// degrees, counter-clockwise seen from above the fault.
    FixedAngle(f64),
}

impl fmt::Display for Rake {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rake::SteepestAscent => write!(f, "steepest-ascent"),
            Rake::FixedAngle(deg) => write!(f, "fixed:{deg}"),
        }
    }
}

impl FromStr for Rake {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "steepest-ascent" {
            return Ok(Rake::SteepestAscent);
        }
        if let Some(deg) = s.strip_prefix("fixed:") {
            let v: f64 = deg
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad rake angle '{deg}'")))?;
            if !v.is_finite() {
                return Err(Error::Config(format!("bad rake angle '{deg}'")));
            }
            return Ok(Rake::FixedAngle(v));
        }
        Err(Error::Config(format!(
            "unknown rake '{s}' (expected 'steepest-ascent' or 'fixed:<degrees>')"
        )))
    }
}

impl TryFrom<String> for Rake {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Rake> for String {
    fn from(r: Rake) -> String {
        r.to_string()
    }
}

/// Unit slip direction on the plane `m` for the given rake.
pub fn rake_direction(rake: Rake, m: &GeometryParam) -> Result<[f64; 3]> {
    let slope2 = m.a * m.a + m.b * m.b;
    if slope2 == 0.0 {
        return Err(Error::RakeUndefined);
    }
    // (a, b, a² + b²) is the tangent with the largest x3 increase
    let len = (slope2 + slope2 * slope2).sqrt();
    let up = [m.a / len, m.b / len, slope2 / len];
    match rake {
        Rake::SteepestAscent => Ok(up),
        Rake::FixedAngle(deg) => {
            let n = m.normal();
            let side = cross3(&n, &up);
            let (s, c) = deg.to_radians().sin_cos();
            Ok([
                c * up[0] + s * side[0],
                c * up[1] + s * side[1],
                c * up[2] + s * side[2],
            ])
        }
    }
}

/// The fault rectangle and its interior node grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultGrid {
    pub center: [f64; 2],
    pub half_lengths: [f64; 2],
    pub n_side: usize,
    pub spacing: [f64; 2],
    pub rake: Rake,
}

impl FaultGrid {
    pub fn new(center: [f64; 2], half_lengths: [f64; 2], n_side: usize, rake: Rake) -> Result<Self> {
        if !(half_lengths[0] > 0.0 && half_lengths[1] > 0.0) {
            return Err(Error::Config(format!(
                "rectangle half-lengths must be positive, got {half_lengths:?}"
            )));
        }
        if n_side == 0 {
            return Err(Error::Config("n_side must be at least 1".into()));
        }
        if !(center[0].is_finite() && center[1].is_finite()) {
            return Err(Error::Config(format!("rectangle center must be finite, got {center:?}")));
        }
        let spacing = [
            2.0 * half_lengths[0] / (n_side + 1) as f64,
            2.0 * half_lengths[1] / (n_side + 1) as f64,
        ];
        Ok(FaultGrid {
            center,
            half_lengths,
            n_side,
            spacing,
            rake,
        })
    }

    /// Number of unknowns `q = n_side²`.
    #[inline]
    pub fn q(&self) -> usize {
        self.n_side * self.n_side
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i2 * self.n_side + i1
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n_side, k / self.n_side)
    }

    /// Horizontal coordinates of node `k`.
    #[inline]
    pub fn node(&self, k: usize) -> [f64; 2] {
        let (i1, i2) = self.ij(k);
        [
            self.center[0] - self.half_lengths[0] + (i1 + 1) as f64 * self.spacing[0],
            self.center[1] - self.half_lengths[1] + (i2 + 1) as f64 * self.spacing[1],
        ]
    }

    pub fn nodes(&self) -> Vec<[f64; 2]> {
        (0..self.q()).map(|k| self.node(k)).collect()
    }

    /// Node lifted onto the plane `m`.
    #[inline]
    pub fn lifted(&self, k: usize, m: &GeometryParam) -> [f64; 3] {
        let y = self.node(k);
        [y[0], y[1], m.depth_at(y[0], y[1])]
    }

    /// Highest node of the plane `m` (largest x3).
    pub fn shallowest(&self, m: &GeometryParam) -> f64 {
        let n = self.n_side - 1;
        [self.index(0, 0), self.index(n, 0), self.index(0, n), self.index(n, n)]
            .into_iter()
            .map(|k| self.lifted(k, m)[2])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks that every node of `m` sits at least `guard` km below the surface.
    pub fn check_depth(&self, m: &GeometryParam, guard: f64) -> Result<()> {
        let top = self.shallowest(m);
        if top > -guard {
            return Err(Error::DepthGuard { depth: top, guard });
        }
        Ok(())
    }

    /// Midpoint-rule area element of one node on the plane `m` (km²).
    #[inline]
    pub fn patch_weight(&self, m: &GeometryParam) -> f64 {
        self.spacing[0] * self.spacing[1] * m.jacobian()
    }

    pub fn rake_direction(&self, m: &GeometryParam) -> Result<[f64; 3]> {
        rake_direction(self.rake, m)
    }
}

/// Mean of `positions` weighted by `weights`.
pub fn weighted_center(positions: &[[f64; 2]], weights: &[f64]) -> Result<[f64; 2]> {
    if positions.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: positions.len(),
            got: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::Data("center weights must be non-negative with a positive sum".into()));
    }
    let mut c = [0.0; 2];
    for (p, w) in positions.iter().zip(weights) {
        c[0] += w * p[0];
        c[1] += w * p[1];
    }
    Ok([c[0] / total, c[1] / total])
}

/// Nodal slip magnitudes (mm) along the rake.
#[derive(Debug, Clone, PartialEq)]
pub struct SlipVector(pub DVector<f64>);

impl SlipVector {
    pub fn new(values: Vec<f64>, q: usize) -> Result<Self> {
        if values.len() != q {
            return Err(Error::LengthMismatch {
                expected: q,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("slip values must be finite".into()));
        }
        Ok(SlipVector(DVector::from_vec(values)))
    }

    pub fn zeros(q: usize) -> Self {
        SlipVector(DVector::zeros(q))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Station and patch quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureWeights {
    pub station_weights: Vec<f64>,
    pub patch_weight: f64,
}

impl QuadratureWeights {
    /// Unit station weights for scattered stations; midpoint patch weight.
    pub fn new(n_stations: usize, grid: &FaultGrid, m: &GeometryParam) -> Self {
        QuadratureWeights {
            station_weights: vec![1.0; n_stations],
            patch_weight: grid.patch_weight(m),
        }
    }
}

/// `D`, `E`, and the factored `K = DᵀD + EᵀE`.
///
/// `K` is stored as a banded Cholesky factor `L` (half-bandwidth `n_side`);
/// `K⁻¹` is formed once from it at construction.
#[derive(Debug, Clone)]
pub struct DifferenceOperators {
    n: usize,
    // row i holds L[i][i-w..=i], left-padded with zeros
    band: Vec<f64>,
    pub k_inv: DMatrix<f64>,
}

impl DifferenceOperators {
    pub fn new(grid: &FaultGrid) -> Self {
        let n = grid.n_side;
        let q = n * n;
        let w = n;
        let stride = w + 1;
        let mut band = vec![0.0; q * stride];
        let k_entry = |i: usize, j: usize| -> f64 {
            if i == j {
                let (i1, i2) = (i % n, i / n);
                2.0 + (i1 + 1 < n) as u8 as f64 + (i2 + 1 < n) as u8 as f64
            } else {
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                if (hi - lo == 1 && hi % n != 0) || hi - lo == n {
                    -1.0
                } else {
                    0.0
                }
            }
        };
        for i in 0..q {
            let j0 = i.saturating_sub(w);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(w));
                let mut s = k_entry(i, j);
                for k in k0..j {
                    s -= band[i * stride + w + k - i] * band[j * stride + w + k - j];
                }
                band[i * stride + w + j - i] = if i == j {
                    s.sqrt()
                } else {
                    s / band[j * stride + w]
                };
            }
        }
        let mut ops = DifferenceOperators {
            n,
            band,
            k_inv: DMatrix::zeros(0, 0),
        };
        let mut k_inv = DMatrix::zeros(q, q);
        let mut e = vec![0.0; q];
        for c in 0..q {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            ops.solve_lower(&mut e);
            ops.solve_upper(&mut e);
            k_inv.column_mut(c).copy_from_slice(&e);
        }
        ops.k_inv = k_inv;
        ops
    }

    #[inline]
    pub fn n_side(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.band[i * (self.n + 1) + self.n + j - i]
    }

    /// In place `x ← L⁻¹ x`.
    pub fn solve_lower(&self, x: &mut [f64]) {
        let w = self.n;
        for i in 0..x.len() {
            let mut s = x[i];
            for k in i.saturating_sub(w)..i {
                s -= self.l(i, k) * x[k];
            }
            x[i] = s / self.l(i, i);
        }
    }

    /// In place `x ← L⁻ᵀ x`.
    pub fn solve_upper(&self, x: &mut [f64]) {
        let w = self.n;
        let q = x.len();
        for i in (0..q).rev() {
            let mut s = x[i];
            for k in (i + 1)..(i + w + 1).min(q) {
                s -= self.l(k, i) * x[k];
            }
            x[i] = s / self.l(i, i);
        }
    }

    /// `K⁻¹ x` through the banded factor.
    pub fn solve_k(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.solve_lower(&mut y);
        self.solve_upper(&mut y);
        y
    }

    /// First differences along x1: `(Dg)_k = g_k − g_{k−1}` within a row.
    pub fn apply_d(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..g.len())
            .map(|k| if k % n == 0 { g[k] } else { g[k] - g[k - 1] })
            .collect()
    }

    /// First differences along x2: `(Eg)_k = g_k − g_{k−n}`.
    pub fn apply_e(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..g.len())
            .map(|k| if k < n { g[k] } else { g[k] - g[k - n] })
            .collect()
    }

    /// `K g = (DᵀD + EᵀE) g`.
    pub fn apply_k(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        let q = g.len();
        (0..q)
            .map(|k| {
                let (i1, i2) = (k % n, k / n);
                let mut s = 2.0 * g[k];
                if i1 > 0 {
                    s -= g[k - 1];
                }
                if i1 + 1 < n {
                    s += g[k] - g[k + 1];
                }
                if i2 > 0 {
                    s -= g[k - n];
                }
                if i2 + 1 < n {
                    s += g[k] - g[k + n];
                }
                s
            })
            .collect()
    }

    /// `‖Dg‖² + ‖Eg‖²`.
    pub fn penalty(&self, g: &[f64]) -> f64 {
        let d = self.apply_d(g);
        let e = self.apply_e(g);
        d.iter().chain(e.iter()).map(|v| v * v).sum()
    }

    pub fn dense_d(&self) -> DMatrix<f64> {
        let q = self.q();
        let n = self.n;
        DMatrix::from_fn(q, q, |i, j| {
            if i == j {
                1.0
            } else if j + 1 == i && i % n != 0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn dense_e(&self) -> DMatrix<f64> {
        let q = self.q();
        let n = self.n;
        DMatrix::from_fn(q, q, |i, j| {
            if i == j {
                1.0
            } else if j + n == i {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn dense_k(&self) -> DMatrix<f64> {
        let d = self.dense_d();
        let e = self.dense_e();
        d.transpose() * &d + e.transpose() * &e
    }
}
