mod common;

use common::*;
use faultpost::io::stations_csv;
use faultpost::scenario::{synth, SlipSpec};
use faultpost::*;

#[test]
fn zero_noise_gives_exact_prediction() {
    let truth = shallow_truth((0.0, 0.0));
    let out = synth(&truth, &template(), 9).unwrap();
    assert_eq!(out.stations.displacements, out.exact);

    // independent route: forward system at the truth geometry
    let grid = truth.grid().unwrap();
    let sys = ForwardSystem::assemble(&truth.geometry, &grid, &template(), &truth.medium, 2.0).unwrap();
    let u = sys.predict(&truth.nodal_slip().unwrap()).unwrap();
    for (got, want) in out.stations.data().iter().zip(u.iter()) {
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
}

#[test]
fn same_seed_same_bytes() {
    let truth = shallow_truth((0.5, 1.5));
    let a = stations_csv(&synth(&truth, &template(), 42).unwrap().stations).unwrap();
    let b = stations_csv(&synth(&truth, &template(), 42).unwrap().stations).unwrap();
    let c = stations_csv(&synth(&truth, &template(), 43).unwrap().stations).unwrap();
    assert_eq!(a.as_bytes(), b.as_bytes());
    assert_ne!(a, c);
}

#[test]
fn noise_sample_std_matches_configuration() {
    let mut truth = shallow_truth((0.5, 1.5));
    truth.n_side = 8;
    let tmpl = template();
    let (mut hor, mut ver) = (Vec::new(), Vec::new());
    for seed in 0..1000 {
        let out = synth(&truth, &tmpl, seed).unwrap();
        for (u, e) in out.stations.displacements.iter().zip(&out.exact) {
            hor.push(u[0] - e[0]);
            hor.push(u[1] - e[1]);
            ver.push(u[2] - e[2]);
        }
    }
    let std = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let (sh, sv) = (std(&hor), std(&ver));
    assert!((sh / 0.5 - 1.0).abs() < 0.05, "horizontal std {sh}");
    assert!((sv / 1.5 - 1.0).abs() < 0.05, "vertical std {sv}");
}

#[test]
fn truth_above_depth_guard_is_rejected() {
    let mut truth = shallow_truth((0.5, 1.5));
    truth.geometry = GeometryParam::new(0.0, 0.0, -1.0);
    assert!(matches!(synth(&truth, &template(), 1), Err(Error::DepthGuard { .. })));
}

#[test]
fn nodal_slip_spec_is_checked_and_used() {
    let mut truth = shallow_truth((0.0, 0.0));
    truth.n_side = 3;
    truth.slip = SlipSpec::Nodal(vec![1.0; 8]);
    assert!(matches!(truth.nodal_slip(), Err(Error::LengthMismatch { .. })));
    truth.slip = SlipSpec::Nodal(vec![1.0; 9]);
    let one = synth(&truth, &template(), 0).unwrap().exact;
    truth.slip = SlipSpec::Nodal(vec![2.0; 9]);
    let two = synth(&truth, &template(), 0).unwrap().exact;
    for (x, y) in one.iter().zip(&two) {
        for i in 0..3 {
            assert!((2.0 * x[i] - y[i]).abs() <= 1e-12 * y[i].abs().max(1e-12));
        }
    }
}

#[test]
fn truth_json_round_trips() {
    let truth = oblique_truth();
    let s = serde_json::to_string_pretty(&truth).unwrap();
    assert_eq!(SyntheticTruth::from_json_str(&s).unwrap(), truth);
    assert!(SyntheticTruth::from_json_str(&s.replace("\"n_side\"", "\"n_sides\"")).is_err());
}
