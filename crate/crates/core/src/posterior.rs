//! Marginal posterior of the fault geometry over a rectangular parameter box.

use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::forward::{assemble_operator, ForwardSystem, StationSet};
use crate::green::{ElasticMedium, GeometryParam};
use crate::grid::{DifferenceOperators, FaultGrid};
use crate::solver::{log_density_from, CellSpectrum, Regularized};

/// Evenly spaced values `min..=max` along one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        let r = AxisRange { min, max, count };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("axis needs at least one value".into()));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(Error::Config(format!("bad axis range [{}, {}]", self.min, self.max)));
        }
        if self.count > 1 && self.min == self.max {
            return Err(Error::Config("axis with several values needs min < max".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.count == 1 {
            0.5 * (self.min + self.max)
        } else if i + 1 == self.count {
            self.max
        } else {
            self.min + i as f64 * self.step()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }

    /// Trapezoid weights; a single value carries the full axis width (or 1).
    pub fn weights(&self) -> Vec<f64> {
        if self.count == 1 {
            let w = self.max - self.min;
            return vec![if w > 0.0 { w } else { 1.0 }];
        }
        let h = self.step();
        (0..self.count)
            .map(|i| if i == 0 || i + 1 == self.count { 0.5 * h } else { h })
            .collect()
    }

    /// Nearest grid index to `v` (clamped).
    pub fn nearest(&self, v: f64) -> usize {
        if self.count == 1 {
            return 0;
        }
        let t = ((v - self.min) / self.step()).round();
        t.clamp(0.0, (self.count - 1) as f64) as usize
    }

    fn contains(&self, v: f64) -> bool {
        let tol = 1e-12 * (self.max - self.min).abs().max(self.min.abs()).max(1.0);
        v >= self.min - tol && v <= self.max + tol
    }
}

/// The box `B` of admissible geometries, discretized per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub a: AxisRange,
    pub b: AxisRange,
    pub d: AxisRange,
}

impl ParameterBox {
    pub fn new(a: AxisRange, b: AxisRange, d: AxisRange) -> Result<Self> {
        let p = ParameterBox { a, b, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.a.validate()?;
        self.b.validate()?;
        self.d.validate()?;
        if self.d.max >= 0.0 {
            return Err(Error::Config("intercept range must lie below the surface (d < 0)".into()));
        }
        Ok(())
    }

    pub fn axes(&self) -> [&AxisRange; 3] {
        [&self.a, &self.b, &self.d]
    }

    pub fn n_cells(&self) -> usize {
        self.a.count * self.b.count * self.d.count
    }

    #[inline]
    pub fn flat(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.b.count + j) * self.d.count + k
    }

    #[inline]
    pub fn ijk(&self, flat: usize) -> [usize; 3] {
        let k = flat % self.d.count;
        let r = flat / self.d.count;
        [r / self.b.count, r % self.b.count, k]
    }

    pub fn geometry(&self, flat: usize) -> GeometryParam {
        let [i, j, k] = self.ijk(flat);
        GeometryParam::new(self.a.value(i), self.b.value(j), self.d.value(k))
    }

    pub fn contains(&self, m: &GeometryParam) -> bool {
        self.a.contains(m.a) && self.b.contains(m.b) && self.d.contains(m.d)
    }

    /// Product trapezoid weight of every cell.
    pub fn cell_weights(&self) -> Vec<f64> {
        let (wa, wb, wd) = (self.a.weights(), self.b.weights(), self.d.weights());
        (0..self.n_cells())
            .map(|f| {
                let [i, j, k] = self.ijk(f);
                wa[i] * wb[j] * wd[k]
            })
            .collect()
    }

    /// Distance between cells measured in grid steps; singleton axes ignored.
    pub fn cell_distance(&self, m: &GeometryParam, n: &GeometryParam) -> f64 {
        let mut s = 0.0;
        for (ax, x, y) in [(&self.a, m.a, n.a), (&self.b, m.b, n.b), (&self.d, m.d, n.d)] {
            if ax.count > 1 {
                let t = (x - y) / ax.step();
                s += t * t;
            }
        }
        s.sqrt()
    }
}

/// `log 1_B(m)`.
pub fn log_prior(bx: &ParameterBox, m: &GeometryParam) -> f64 {
    if bx.contains(m) {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Unnormalized log marginal density of one geometry, prior included.
pub fn log_density_cell(
    system: &ForwardSystem,
    ops: &DifferenceOperators,
    u: &DVector<f64>,
    c: f64,
    tau: f64,
    bx: &ParameterBox,
) -> Result<f64> {
    let reg = Regularized::new(system, ops, u)?;
    let mu_sq = system.svd.singular_values.iter().map(|s| s * s);
    let l = log_density_from(&reg.spectrum, mu_sq, system.q(), c, tau)?;
    Ok(l + log_prior(bx, &system.m))
}

/// Everything the sweep needs that does not depend on `C` or `τ`.
#[derive(Debug, Clone)]
pub struct SpectraCache {
    pub bx: ParameterBox,
    /// `None` for cells excluded by the depth guard.
    pub cells: Vec<Option<CellSpectrum>>,
}

impl SpectraCache {
    #[allow(clippy::too_many_arguments)]
    pub fn compute(
        bx: &ParameterBox,
        grid: &FaultGrid,
        stations: &StationSet,
        medium: &ElasticMedium,
        ops: &DifferenceOperators,
        depth_guard: f64,
        exec: Exec,
    ) -> Result<Self> {
        bx.validate()?;
        let u = stations.data();
        let weights = stations.weights();
        let idx: Vec<usize> = (0..bx.n_cells()).collect();
        let cells = exec.map(&idx, |&f| {
            let m = bx.geometry(f);
            if grid.check_depth(&m, depth_guard).is_err() {
                return Ok(None);
            }
            let res = assemble_operator(&m, grid, stations, medium)
                .and_then(|a| CellSpectrum::from_operator(&a, &weights, ops, &u));
            match res {
                Ok(c) => Ok(Some(c)),
                Err(Error::RakeUndefined) => {
                    warn!("cell {:?} is horizontal; rake undefined, cell excluded", bx.ijk(f));
                    Ok(None)
                }
                Err(e) => {
                    let [i, j, k] = bx.ijk(f);
                    Err(Error::Cell {
                        i,
                        j,
                        k,
                        source: Box::new(e),
                    })
                }
            }
        });
        let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(SpectraCache { bx: *bx, cells })
    }

    pub fn n_admissible(&self) -> usize {
        self.cells.iter().flatten().count()
    }

    /// Posterior on the box at fixed `C` and `τ`.
    pub fn posterior(&self, c: f64, tau: f64) -> Result<PosteriorGrid> {
        let logs = self
            .cells
            .iter()
            .map(|cell| match cell {
                Some(s) => s.log_density(c, tau),
                None => Ok(f64::NEG_INFINITY),
            })
            .collect::<Result<Vec<_>>>()?;
        PosteriorGrid::from_log(self.bx, c, tau, logs)
    }
}

/// Normalized posterior density over the box cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub bx: ParameterBox,
    pub c: f64,
    pub tau: f64,
    /// Normalized log density (`−∞` where excluded).
    pub log_density: Vec<f64>,
    /// Normalized density; integrates to 1 under the trapezoid rule.
    pub density: Vec<f64>,
    /// Log of the normalizing constant of the unnormalized density.
    pub log_normalizer: f64,
}

impl PosteriorGrid {
    /// Normalizes unnormalized log densities in the log domain.
    pub fn from_log(bx: ParameterBox, c: f64, tau: f64, mut logs: Vec<f64>) -> Result<Self> {
        if logs.len() != bx.n_cells() {
            return Err(Error::LengthMismatch {
                expected: bx.n_cells(),
                got: logs.len(),
            });
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical("posterior vanishes on every cell".into()));
        }
        let w = bx.cell_weights();
        let z: f64 = logs.iter().zip(&w).map(|(l, w)| w * (l - max).exp()).sum();
        let log_normalizer = max + z.ln();
        for l in logs.iter_mut() {
            *l -= log_normalizer;
        }
        let density = logs.iter().map(|l| l.exp()).collect();
        Ok(PosteriorGrid {
            bx,
            c,
            tau,
            log_density: logs,
            density,
            log_normalizer,
        })
    }

    /// Trapezoid integral of the density (1 up to rounding).
    pub fn total_mass(&self) -> f64 {
        self.bx.cell_weights().iter().zip(&self.density).map(|(w, p)| w * p).sum()
    }

    /// Mass of cells farther than `radius` grid steps from `center`.
    pub fn mass_outside(&self, center: &GeometryParam, radius: f64) -> f64 {
        let w = self.bx.cell_weights();
        (0..self.bx.n_cells())
            .filter(|&f| self.bx.cell_distance(&self.bx.geometry(f), center) > radius)
            .map(|f| w[f] * self.density[f])
            .sum()
    }

    /// `ln` of [`mass_outside`](Self::mass_outside), computed without
    /// underflow; `−∞` when no cell lies outside.
    pub fn log_mass_outside(&self, center: &GeometryParam, radius: f64) -> f64 {
        let w = self.bx.cell_weights();
        let terms: Vec<f64> = (0..self.bx.n_cells())
            .filter(|&f| self.bx.cell_distance(&self.bx.geometry(f), center) > radius)
            .filter(|&f| w[f] > 0.0 && self.log_density[f].is_finite())
            .map(|f| w[f].ln() + self.log_density[f])
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return f64::NEG_INFINITY;
        }
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    pub fn map(&self) -> MapEstimate {
        let (best, _) = self
            .log_density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, l)| if *l > acc.1 { (i, *l) } else { acc });
        let index = self.bx.ijk(best);
        let cell = self.bx.geometry(best);
        let mut refined = cell.as_array();
        for (axis, r) in refined.iter_mut().enumerate() {
            *r += self.parabolic_offset(index, axis);
        }
        MapEstimate {
            index,
            cell,
            refined: GeometryParam::new(refined[0], refined[1], refined[2]),
            log_density: self.log_density[best],
        }
    }

    // vertex of the parabola through the log density at the MAP and its two
    // neighbours along one axis
    fn parabolic_offset(&self, idx: [usize; 3], axis: usize) -> f64 {
        let ax = self.bx.axes()[axis];
        if idx[axis] == 0 || idx[axis] + 1 >= ax.count {
            return 0.0;
        }
        let at = |delta: isize| {
            let mut j = idx;
            j[axis] = (j[axis] as isize + delta) as usize;
            self.log_density[self.bx.flat(j[0], j[1], j[2])]
        };
        let (lm, l0, lp) = (at(-1), at(0), at(1));
        let curv = lm - 2.0 * l0 + lp;
        if !(lm.is_finite() && lp.is_finite()) || curv >= 0.0 {
            return 0.0;
        }
        let t = (0.5 * (lm - lp) / curv).clamp(-0.5, 0.5);
        t * ax.step()
    }

    pub fn marginals(&self) -> Marginals {
        let bx = &self.bx;
        let (wa, wb, wd) = (bx.a.weights(), bx.b.weights(), bx.d.weights());
        let mut pa = vec![0.0; bx.a.count];
        let mut pb = vec![0.0; bx.b.count];
        let mut pd = vec![0.0; bx.d.count];
        for (f, p) in self.density.iter().enumerate() {
            let [i, j, k] = bx.ijk(f);
            pa[i] += wb[j] * wd[k] * p;
            pb[j] += wa[i] * wd[k] * p;
            pd[k] += wa[i] * wb[j] * p;
        }
        Marginals {
            a: Marginal::new(&bx.a, pa),
            b: Marginal::new(&bx.b, pb),
            d: Marginal::new(&bx.d, pd),
        }
    }
}

/// Argmax cell and a quadratic sub-cell refinement (diagnostic only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapEstimate {
    pub index: [usize; 3],
    pub cell: GeometryParam,
    pub refined: GeometryParam,
    pub log_density: f64,
}

/// One-dimensional marginal density on an axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub density: Vec<f64>,
}

impl Marginal {
    fn new(ax: &AxisRange, density: Vec<f64>) -> Self {
        Marginal {
            values: ax.values(),
            weights: ax.weights(),
            density,
        }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().zip(&self.density).map(|(w, p)| w * p).sum()
    }

    pub fn mean(&self) -> f64 {
        let m: f64 = self
            .values
            .iter()
            .zip(&self.weights)
            .zip(&self.density)
            .map(|((v, w), p)| v * w * p)
            .sum();
        m / self.mass()
    }

    pub fn std(&self) -> f64 {
        let mean = self.mean();
        let v: f64 = self
            .values
            .iter()
            .zip(&self.weights)
            .zip(&self.density)
            .map(|((v, w), p)| (v - mean).powi(2) * w * p)
            .sum();
        (v / self.mass()).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub a: Marginal,
    pub b: Marginal,
    pub d: Marginal,
}

impl Marginals {
    pub fn stds(&self) -> [f64; 3] {
        [self.a.std(), self.b.std(), self.d.std()]
    }

    pub fn means(&self) -> [f64; 3] {
        [self.a.mean(), self.b.mean(), self.d.mean()]
    }
}

/// Full sweep: spectra for every cell, then the posterior at `(C, τ)`.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    bx: &ParameterBox,
    grid: &FaultGrid,
    stations: &StationSet,
    medium: &ElasticMedium,
    ops: &DifferenceOperators,
    depth_guard: f64,
    c: f64,
    tau: f64,
    exec: Exec,
) -> Result<PosteriorGrid> {
    SpectraCache::compute(bx, grid, stations, medium, ops, depth_guard, exec)?.posterior(c, tau)
}

/// Posterior mass outside a ball around `truth` for several `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationPoint {
    pub tau: f64,
    pub outside_mass: f64,
    pub log_outside_mass: f64,
}

pub fn concentration_experiment(
    cache: &SpectraCache,
    c: f64,
    taus: &[f64],
    truth: &GeometryParam,
    radius_cells: f64,
) -> Result<Vec<ConcentrationPoint>> {
    taus.iter()
        .map(|&tau| {
            let pg = cache.posterior(c, tau)?;
            Ok(ConcentrationPoint {
                tau,
                outside_mass: pg.mass_outside(truth, radius_cells),
                log_outside_mass: pg.log_mass_outside(truth, radius_cells),
            })
        })
        .collect()
}

/// Gaussian slip posterior for a fixed geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SlipPosterior {
    pub mean: DVector<f64>,
    pub std: Vec<f64>,
}

pub fn slip_posterior(
    system: &ForwardSystem,
    ops: &DifferenceOperators,
    u: &DVector<f64>,
    c: f64,
    tau: f64,
) -> Result<SlipPosterior> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::NonPositiveTau(tau));
    }
    let reg = Regularized::new(system, ops, u)?;
    let mean = reg.solve(c)?.slip;
    let std = reg.covariance_diag(c)?.into_iter().map(|v| (v / tau).sqrt()).collect();
    Ok(SlipPosterior { mean, std })
}
