//! Scenario fixtures shared by the integration tests.
#![allow(dead_code)]

use faultpost::io::{parse_stations, StationMode};
use faultpost::scenario::{CenterMode, FaultSpec, GaussianBump, NoiseLevels, SlipSpec};
use faultpost::*;

pub const STATIONS: &str = include_str!("../../../../data/guerrero_stations_approx.csv");

pub fn template() -> StationSet {
    parse_stations(STATIONS, "template", StationMode::Template).unwrap()
}

pub fn axis(min: f64, max: f64, count: usize) -> AxisRange {
    AxisRange::new(min, max, count).unwrap()
}

/// Truth for the moderately dipping, noisy scenario.
pub fn shallow_truth(noise: (f64, f64)) -> SyntheticTruth {
    truth(GeometryParam::new(-0.3, -0.15, -14.0), Rake::SteepestAscent, noise)
}

/// Truth whose slip deviates 20° from the steepest-ascent direction.
pub fn oblique_truth() -> SyntheticTruth {
    truth(GeometryParam::new(0.1, -0.15, -24.0), Rake::FixedAngle(20.0), (0.5, 1.5))
}

fn truth(geometry: GeometryParam, rake: Rake, noise: (f64, f64)) -> SyntheticTruth {
    SyntheticTruth {
        geometry,
        center: [10.0, 25.0],
        half_lengths: [35.0, 35.0],
        n_side: 40,
        rake,
        slip: SlipSpec::Bumps(vec![GaussianBump {
            center: [10.0, 25.0],
            widths: [12.0, 12.0],
            amplitude_mm: 1000.0,
        }]),
        noise: NoiseLevels {
            sigma_hor: noise.0,
            sigma_ver: noise.1,
        },
        medium: ElasticMedium::default(),
        depth_guard_km: 2.0,
    }
}

pub fn shallow_box(count: usize) -> ParameterBox {
    ParameterBox::new(axis(-0.5, 0.1, count), axis(-0.4, 0.2, count), axis(-30.0, -6.0, count)).unwrap()
}

pub fn oblique_box(count: usize) -> ParameterBox {
    ParameterBox::new(axis(-0.2, 0.4, count), axis(-0.45, 0.15, count), axis(-36.0, -12.0, count)).unwrap()
}

/// Inversion config: weighted centre, 70 km square, steepest-ascent rake.
pub fn config(bx: ParameterBox, n_side: usize) -> ScenarioConfig {
    ScenarioConfig {
        err_rel: 0.05,
        tau: 1.0,
        depth_guard_km: 2.0,
        c_override: None,
        seed: 1,
        medium: ElasticMedium::default(),
        fault: FaultSpec {
            center: CenterMode::default(),
            half_lengths: [35.0, 35.0],
            n_side,
            rake: Rake::SteepestAscent,
        },
        bx,
        noise: None,
    }
}
