//! Discrete forward operator `A_m` from nodal slip to station displacements.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::green::{ElasticMedium, GeometryParam, SurfaceKernel};
use crate::grid::FaultGrid;
use crate::linalg::thin_svd;

/// GPS stations with measured displacements (mm) and per-component noise.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSet {
    pub names: Vec<String>,
    /// Horizontal positions (km).
    pub positions: Vec<[f64; 2]>,
    /// Displacement `(u1, u2, u3)` per station (mm).
    pub displacements: Vec<[f64; 3]>,
    pub sigma_hor: Vec<f64>,
    pub sigma_ver: Vec<f64>,
}

impl StationSet {
    pub fn new(
        names: Vec<String>,
        positions: Vec<[f64; 2]>,
        displacements: Vec<[f64; 3]>,
        sigma_hor: Vec<f64>,
        sigma_ver: Vec<f64>,
    ) -> Result<Self> {
        let s = StationSet {
            names,
            positions,
            displacements,
            sigma_hor,
            sigma_ver,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.names.len();
        for len in [
            self.positions.len(),
            self.displacements.len(),
            self.sigma_hor.len(),
            self.sigma_ver.len(),
        ] {
            if len != n {
                return Err(Error::LengthMismatch { expected: n, got: len });
            }
        }
        if n == 0 {
            return Err(Error::Data("station set is empty".into()));
        }
        for (i, name) in self.names.iter().enumerate() {
            if self.names[..i].contains(name) {
                return Err(Error::Data(format!("duplicate station name '{name}'")));
            }
            if !(self.sigma_hor[i] > 0.0 && self.sigma_ver[i] > 0.0) {
                return Err(Error::Data(format!("station '{name}': noise levels must be positive")));
            }
            let p = self.positions[i];
            let u = self.displacements[i];
            if !(p.iter().chain(u.iter()).all(|v| v.is_finite())) {
                return Err(Error::Data(format!("station '{name}': non-finite value")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Stacked data vector `(u1, u2, u3)` station by station.
    pub fn data(&self) -> DVector<f64> {
        DVector::from_iterator(3 * self.len(), self.displacements.iter().flatten().copied())
    }

    /// Diagonal of `𝒟`: `√C'_j / σ` per component, with unit station weights.
    pub fn weights(&self) -> DVector<f64> {
        DVector::from_iterator(
            3 * self.len(),
            self.sigma_hor
                .iter()
                .zip(&self.sigma_ver)
                .flat_map(|(h, v)| [1.0 / h, 1.0 / h, 1.0 / v]),
        )
    }

    /// Copy with the noise levels replaced for every station.
    pub fn with_noise(&self, sigma_hor: f64, sigma_ver: f64) -> Self {
        let n = self.len();
        StationSet {
            sigma_hor: vec![sigma_hor; n],
            sigma_ver: vec![sigma_ver; n],
            ..self.clone()
        }
    }

    /// Copy with new displacements.
    pub fn with_displacements(&self, displacements: Vec<[f64; 3]>) -> Result<Self> {
        let s = StationSet {
            displacements,
            ..self.clone()
        };
        s.validate()?;
        Ok(s)
    }
}

/// Assembles `A_m` (3N × q): column `k` is the surface response to unit slip
/// along the rake at node `k`, times the node's area element.
pub fn assemble_operator(
    m: &GeometryParam,
    grid: &FaultGrid,
    stations: &StationSet,
    medium: &ElasticMedium,
) -> Result<DMatrix<f64>> {
    let slip = grid.rake_direction(m)?;
    let kernel = SurfaceKernel::new(medium, slip, m.normal())?;
    let w = grid.patch_weight(m);
    let q = grid.q();
    let n = stations.len();
    let mut a = DMatrix::zeros(3 * n, q);
    for k in 0..q {
        let pos = grid.lifted(k, m);
        if !(pos[2] < 0.0) {
            return Err(Error::SourceAboveSurface(pos[2]));
        }
        let mut col = a.column_mut(k);
        for (j, x) in stations.positions.iter().enumerate() {
            let u = kernel.eval_unchecked(pos, *x);
            col[3 * j] = w * u[0];
            col[3 * j + 1] = w * u[1];
            col[3 * j + 2] = w * u[2];
        }
    }
    Ok(a)
}

/// Thin SVD `U Σ Vᵀ` of the weighted operator `𝒟 A_m`.
#[derive(Debug, Clone)]
pub struct WeightedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl WeightedSvd {
    /// Number of singular values above the rank threshold.
    pub fn rank(&self) -> usize {
        let smax = self.singular_values.max();
        let (r, c) = (self.u.nrows(), self.v_t.ncols());
        let tol = r.max(c) as f64 * f64::EPSILON * smax;
        self.singular_values.iter().filter(|s| **s > tol).count()
    }
}

/// Forward operator for one geometry together with its weighted SVD.
#[derive(Debug, Clone)]
pub struct ForwardSystem {
    pub m: GeometryParam,
    pub a: DMatrix<f64>,
    /// Diagonal of `𝒟`.
    pub weights: DVector<f64>,
    pub svd: WeightedSvd,
}

impl ForwardSystem {
    /// Builds `A_m`, rejecting geometries that breach the depth guard.
    pub fn assemble(
        m: &GeometryParam,
        grid: &FaultGrid,
        stations: &StationSet,
        medium: &ElasticMedium,
        depth_guard: f64,
    ) -> Result<Self> {
        grid.check_depth(m, depth_guard)?;
        let a = assemble_operator(m, grid, stations, medium)?;
        let weights = stations.weights();
        let b = weighted(&a, &weights);
        let svd = thin_svd(&b)?;
        let svd = WeightedSvd {
            u: svd.u,
            singular_values: svd.singular_values,
            v_t: svd.v_t,
        };
        Ok(ForwardSystem { m: *m, a, weights, svd })
    }

    pub fn n_data(&self) -> usize {
        self.a.nrows()
    }

    pub fn q(&self) -> usize {
        self.a.ncols()
    }

    /// Predicted displacements `A_m g`.
    pub fn predict(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        if g.len() != self.q() {
            return Err(Error::LengthMismatch {
                expected: self.q(),
                got: g.len(),
            });
        }
        Ok(&self.a * g)
    }

    /// `𝒟 A_m`.
    pub fn weighted_operator(&self) -> DMatrix<f64> {
        weighted(&self.a, &self.weights)
    }
}

/// Row scaling `diag(w) · a`.
pub(crate) fn weighted(a: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut b = a.clone();
    for (mut row, wi) in b.row_iter_mut().zip(w.iter()) {
        row *= *wi;
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::{green_surface, DislocationSource};
    use crate::grid::Rake;
    use approx::assert_relative_eq;

    fn stations() -> StationSet {
        StationSet::new(
            vec!["A".into(), "B".into(), "C".into()],
            vec![[0.0, 0.0], [12.0, -5.0], [-7.0, 20.0]],
            vec![[0.0; 3]; 3],
            vec![0.5; 3],
            vec![1.5; 3],
        )
        .unwrap()
    }

    #[test]
    fn columns_match_point_evaluations() {
        let m = GeometryParam::new(-0.3, -0.15, -14.0);
        let grid = FaultGrid::new([2.0, 3.0], [10.0, 8.0], 3, Rake::SteepestAscent).unwrap();
        let st = stations();
        let medium = ElasticMedium::default();
        let a = assemble_operator(&m, &grid, &st, &medium).unwrap();
        let slip = grid.rake_direction(&m).unwrap();
        let w = grid.patch_weight(&m);
        for k in 0..grid.q() {
            let src = DislocationSource::new(grid.lifted(k, &m), slip, m.normal()).unwrap();
            for (j, x) in st.positions.iter().enumerate() {
                let u = green_surface(&medium, &src, *x).unwrap();
                for c in 0..3 {
                    assert_relative_eq!(a[(3 * j + c, k)], w * u[c], max_relative = 1e-14);
                }
            }
        }
    }

    #[test]
    fn linear_in_slip() {
        let m = GeometryParam::new(0.1, -0.2, -15.0);
        let grid = FaultGrid::new([0.0, 0.0], [10.0, 10.0], 4, Rake::SteepestAscent).unwrap();
        let sys = ForwardSystem::assemble(&m, &grid, &stations(), &ElasticMedium::default(), 2.0).unwrap();
        let g = DVector::from_fn(16, |k, _| (k as f64).sin());
        let u1 = sys.predict(&g).unwrap();
        let u3 = sys.predict(&(&g * 3.0)).unwrap();
        assert_relative_eq!(u3, u1 * 3.0, max_relative = 1e-14);
    }

    #[test]
    fn svd_reconstructs_weighted_operator() {
        let m = GeometryParam::new(0.1, -0.2, -15.0);
        let grid = FaultGrid::new([0.0, 0.0], [10.0, 10.0], 4, Rake::FixedAngle(30.0)).unwrap();
        let sys = ForwardSystem::assemble(&m, &grid, &stations(), &ElasticMedium::default(), 2.0).unwrap();
        let s = &sys.svd;
        let rec = &s.u * DMatrix::from_diagonal(&s.singular_values) * &s.v_t;
        let b = sys.weighted_operator();
        assert!((rec - &b).norm() <= 1e-12 * b.norm());
        assert_eq!(s.singular_values.len(), 9);
    }

    #[test]
    fn depth_guard_rejects_shallow_plane() {
        let m = GeometryParam::new(-0.5, 0.0, -3.0);
        let grid = FaultGrid::new([0.0, 0.0], [10.0, 10.0], 4, Rake::SteepestAscent).unwrap();
        let err = ForwardSystem::assemble(&m, &grid, &stations(), &ElasticMedium::default(), 2.0).unwrap_err();
        assert!(matches!(err, Error::DepthGuard { .. }));
    }

    #[test]
    fn station_validation() {
        let mut st = stations();
        st.names[2] = "A".into();
        assert!(st.validate().is_err());
        let mut st = stations();
        st.sigma_ver[0] = 0.0;
        assert!(st.validate().is_err());
        let mut st = stations();
        st.positions.pop();
        assert!(matches!(st.validate(), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn weights_are_inverse_sigmas() {
        let w = stations().weights();
        assert_eq!(w.as_slice()[..3], [2.0, 2.0, 1.0 / 1.5]);
    }
}
