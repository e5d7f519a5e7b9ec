//! Run configuration and synthetic test scenarios.

use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forward::{assemble_operator, StationSet};
use crate::green::{ElasticMedium, GeometryParam};
use crate::grid::{weighted_center, FaultGrid, Rake, DEFAULT_DEPTH_GUARD_KM};
use crate::posterior::ParameterBox;

pub const DEFAULT_ERR_REL: f64 = 0.05;

/// Where the fault rectangle is centred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CenterMode {
    Explicit([f64; 2]),
    /// `"weighted"`: station positions weighted by displacement magnitude.
    Named(CenterKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterKeyword {
    Weighted,
}

impl Default for CenterMode {
    fn default() -> Self {
        CenterMode::Named(CenterKeyword::Weighted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    #[serde(default)]
    pub center: CenterMode,
    pub half_lengths: [f64; 2],
    pub n_side: usize,
    #[serde(default)]
    pub rake: Rake,
}

impl FaultSpec {
    /// Resolves the rectangle against the station data.
    pub fn build(&self, stations: &StationSet) -> Result<FaultGrid> {
        let center = match self.center {
            CenterMode::Explicit(c) => c,
            CenterMode::Named(CenterKeyword::Weighted) => {
                let w: Vec<f64> = stations
                    .displacements
                    .iter()
                    .map(|u| (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt())
                    .collect();
                weighted_center(&stations.positions, &w)?
            }
        };
        FaultGrid::new(center, self.half_lengths, self.n_side, self.rake)
    }
}

/// Per-component noise levels (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevels {
    pub sigma_hor: f64,
    pub sigma_ver: f64,
}

/// Inputs of one posterior run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_err_rel")]
    pub err_rel: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_guard")]
    pub depth_guard_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_override: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub medium: ElasticMedium,
    pub fault: FaultSpec,
    #[serde(rename = "box")]
    pub bx: ParameterBox,
    /// Replaces the per-station noise levels of the data file when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseLevels>,
}

fn default_err_rel() -> f64 {
    DEFAULT_ERR_REL
}

fn default_tau() -> f64 {
    1.0
}

fn default_guard() -> f64 {
    DEFAULT_DEPTH_GUARD_KM
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: ScenarioConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        self.bx.validate()?;
        if !(self.err_rel > 0.0 && self.err_rel < 1.0) {
            return Err(Error::Config(format!("err_rel must lie in (0, 1), got {}", self.err_rel)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::NonPositiveTau(self.tau));
        }
        if !(self.depth_guard_km >= 0.0) {
            return Err(Error::Config("depth_guard_km must be non-negative".into()));
        }
        if let Some(c) = self.c_override {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::NonPositiveC(c));
            }
        }
        if let Some(n) = self.noise {
            if !(n.sigma_hor > 0.0 && n.sigma_ver > 0.0) {
                return Err(Error::Config("noise levels must be positive".into()));
            }
        }
        let f = &self.fault;
        FaultGrid::new([0.0, 0.0], f.half_lengths, f.n_side, f.rake)?;
        Ok(())
    }

    /// Station set as seen by the inversion (noise override applied).
    pub fn effective_stations(&self, stations: &StationSet) -> StationSet {
        match self.noise {
            Some(n) => stations.with_noise(n.sigma_hor, n.sigma_ver),
            None => stations.clone(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Smooth slip bump `amplitude · exp(−½ Σ ((y − center)/width)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBump {
    pub center: [f64; 2],
    pub widths: [f64; 2],
    pub amplitude_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlipSpec {
    Bumps(Vec<GaussianBump>),
    /// One value per interior node of the truth grid.
    Nodal(Vec<f64>),
}

/// Ground truth used to generate synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTruth {
    pub geometry: GeometryParam,
    pub center: [f64; 2],
    pub half_lengths: [f64; 2],
    pub n_side: usize,
    /// Rake used for generation; may differ from the inversion rake.
    #[serde(default)]
    pub rake: Rake,
    pub slip: SlipSpec,
    /// Generation noise; zero gives exact data.
    pub noise: NoiseLevels,
    #[serde(default)]
    pub medium: ElasticMedium,
    #[serde(default = "default_guard")]
    pub depth_guard_km: f64,
}

impl SyntheticTruth {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("truth: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&s)
    }

    pub fn grid(&self) -> Result<FaultGrid> {
        FaultGrid::new(self.center, self.half_lengths, self.n_side, self.rake)
    }

    /// Nodal slip on the truth grid (mm); zero on the rectangle boundary by
    /// construction of the interior grid.
    pub fn nodal_slip(&self) -> Result<DVector<f64>> {
        let grid = self.grid()?;
        match &self.slip {
            SlipSpec::Nodal(v) => {
                if v.len() != grid.q() {
                    return Err(Error::LengthMismatch {
                        expected: grid.q(),
                        got: v.len(),
                    });
                }
                Ok(DVector::from_column_slice(v))
            }
            SlipSpec::Bumps(bumps) => {
                for b in bumps {
                    if !(b.widths[0] > 0.0 && b.widths[1] > 0.0) {
                        return Err(Error::Config("bump widths must be positive".into()));
                    }
                }
                Ok(DVector::from_iterator(
                    grid.q(),
                    grid.nodes().iter().map(|y| {
                        bumps
                            .iter()
                            .map(|b| {
                                let t0 = (y[0] - b.center[0]) / b.widths[0];
                                let t1 = (y[1] - b.center[1]) / b.widths[1];
                                b.amplitude_mm * (-0.5 * (t0 * t0 + t1 * t1)).exp()
                            })
                            .sum::<f64>()
                    }),
                ))
            }
        }
    }

    /// Noise-free displacements at the given station positions.
    pub fn exact_displacements(&self, stations: &StationSet) -> Result<Vec<[f64; 3]>> {
        self.medium.validate()?;
        let grid = self.grid()?;
        grid.check_depth(&self.geometry, self.depth_guard_km)?;
        let a = assemble_operator(&self.geometry, &grid, stations, &self.medium)?;
        let u = a * self.nodal_slip()?;
        Ok(u.as_slice().chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
    }
}

/// Synthetic data: exact displacements plus seeded Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub stations: StationSet,
    pub exact: Vec<[f64; 3]>,
}

/// Fills `template` with synthetic displacements for `truth`. The noise
/// levels written to the station file are those of the template.
pub fn synth(truth: &SyntheticTruth, template: &StationSet, seed: u64) -> Result<SynthOutput> {
    let n = truth.noise;
    if !(n.sigma_hor >= 0.0 && n.sigma_ver >= 0.0) {
        return Err(Error::Config("generation noise must be non-negative".into()));
    }
    let exact = truth.exact_displacements(template)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noisy = exact
        .iter()
        .map(|u| {
            let e: [f64; 3] = std::array::from_fn(|_| std_normal.sample(&mut rng));
            [
                u[0] + n.sigma_hor * e[0],
                u[1] + n.sigma_hor * e[1],
                u[2] + n.sigma_ver * e[2],
            ]
        })
        .collect();
    Ok(SynthOutput {
        stations: template.with_displacements(noisy)?,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::AxisRange;

    fn config() -> ScenarioConfig {
        ScenarioConfig {
            err_rel: 0.05,
            tau: 1.0,
            depth_guard_km: 2.0,
            c_override: Some(6e-4),
            seed: 3,
            medium: ElasticMedium::default(),
            fault: FaultSpec {
                center: CenterMode::Explicit([1.5, -2.0]),
                half_lengths: [40.0, 35.0],
                n_side: 30,
                rake: Rake::FixedAngle(20.0),
            },
            bx: ParameterBox::new(
                AxisRange::new(-0.5, 0.1, 21).unwrap(),
                AxisRange::new(-0.4, 0.2, 21).unwrap(),
                AxisRange::new(-30.0, -6.0, 21).unwrap(),
            )
            .unwrap(),
            noise: Some(NoiseLevels {
                sigma_hor: 0.5,
                sigma_ver: 1.5,
            }),
        }
    }

    #[test]
    fn config_round_trip() {
        let c = config();
        let back = ScenarioConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut w = c.clone();
        w.fault.center = CenterMode::default();
        w.c_override = None;
        w.noise = None;
        assert_eq!(ScenarioConfig::from_toml_str(&w.to_toml()).unwrap(), w);
    }

    #[test]
    fn config_defaults_and_errors() {
        let minimal = r#"
            [fault]
            half_lengths = [40.0, 40.0]
            n_side = 10
            [box]
            a = { min = -0.5, max = 0.1, count = 5 }
            b = { min = -0.4, max = 0.2, count = 5 }
            d = { min = -30.0, max = -6.0, count = 5 }
        "#;
        let c = ScenarioConfig::from_toml_str(minimal).unwrap();
        assert_eq!(c.err_rel, 0.05);
        assert_eq!(c.tau, 1.0);
        assert_eq!(c.fault.center, CenterMode::Named(CenterKeyword::Weighted));
        assert_eq!(c.fault.rake, Rake::SteepestAscent);
        assert!(ScenarioConfig::from_toml_str(&minimal.replace("n_side = 10", "n_side = 0")).is_err());
        assert!(ScenarioConfig::from_toml_str(&format!("bogus = 1\n{minimal}")).is_err());
        assert!(ScenarioConfig::from_toml_str(&format!("tau = -1.0\n{minimal}")).is_err());
    }
}
