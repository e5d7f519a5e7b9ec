mod common;

use common::*;
use faultpost::io::{read_json, read_posterior};
use faultpost::pipeline::{files, inputs_from_manifest, run_pipeline, write_bundle, CSource, Manifest};
use faultpost::scenario::{synth, NoiseLevels};
use faultpost::*;

fn small_config() -> ScenarioConfig {
    let bx = ParameterBox::new(axis(-0.45, -0.15, 4), axis(-0.3, 0.0, 4), axis(-20.0, -10.0, 5)).unwrap();
    config(bx, 12)
}

fn small_data() -> StationSet {
    synth(&shallow_truth((0.5, 1.5)), &template(), 3).unwrap().stations
}

fn read_all(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    [files::POSTERIOR, files::MARGINAL_A, files::MARGINAL_B, files::MARGINAL_D, files::SLIP]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
        .collect()
}

#[test]
fn bundle_is_reproducible_and_manifest_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, st) = (small_config(), small_data());
    let first = run_pipeline(&cfg, &st, Exec::Parallel).unwrap();
    write_bundle(&tmp.path().join("a"), &first).unwrap();
    let second = run_pipeline(&cfg, &st, Exec::Sequential).unwrap();
    write_bundle(&tmp.path().join("b"), &second).unwrap();
    assert_eq!(read_all(&tmp.path().join("a")), read_all(&tmp.path().join("b")));

    let manifest: Manifest = read_json(&tmp.path().join("a").join(files::MANIFEST)).unwrap();
    let mut m1 = manifest.clone();
    m1.wall_time_s = 0.0;
    let mut m0 = first.manifest.clone();
    m0.wall_time_s = 0.0;
    assert_eq!(m1, m0);

    let (cfg2, st2) = inputs_from_manifest(&manifest).unwrap();
    assert_eq!(cfg2.hash(), manifest.config_hash);
    let third = run_pipeline(&cfg2, &st2, Exec::Parallel).unwrap();
    write_bundle(&tmp.path().join("c"), &third).unwrap();
    assert_eq!(read_all(&tmp.path().join("a")), read_all(&tmp.path().join("c")));
}

#[test]
fn posterior_table_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_pipeline(&small_config(), &small_data(), Exec::Parallel).unwrap();
    write_bundle(tmp.path(), &out).unwrap();
    let back = read_posterior(&tmp.path().join(files::POSTERIOR)).unwrap();
    assert_eq!(back.bx.n_cells(), out.posterior.bx.n_cells());
    for (x, y) in back.density.iter().zip(&out.posterior.density) {
        assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300));
    }
    assert_eq!(back.map().index, out.map.index);
}

#[test]
fn tampered_manifest_is_rejected() {
    let out = run_pipeline(&small_config(), &small_data(), Exec::Parallel).unwrap();
    let mut m = out.manifest.clone();
    m.stations_csv = m.stations_csv.replacen("ACAP", "ACAQ", 1);
    assert!(inputs_from_manifest(&m).is_err());
    let mut m = out.manifest;
    m.schema_version += 1;
    assert!(matches!(inputs_from_manifest(&m), Err(Error::Config(_))));
}

#[test]
fn degenerate_error_target_is_a_config_error() {
    let mut cfg = small_config();
    cfg.err_rel = 1e-9;
    let err = run_pipeline(&cfg, &small_data(), Exec::Parallel).err().unwrap();
    assert_eq!(err.kind(), ErrorKind::Config, "{err}");
}

#[test]
fn box_entirely_above_guard_is_a_data_error() {
    let mut cfg = small_config();
    cfg.bx = ParameterBox::new(axis(-0.1, 0.1, 3), axis(-0.1, 0.1, 3), axis(-1.5, -0.5, 3)).unwrap();
    let err = run_pipeline(&cfg, &small_data(), Exec::Parallel).err().unwrap();
    assert_eq!(err.kind(), ErrorKind::Data, "{err}");
}

/// Guerrero-like geometry with slow-slip-sized displacements (a few cm),
/// assumed noise (1, 3) mm and `C` fixed at 6e-4.
#[test]
fn guerrero_scale_override_and_std_magnitude() {
    let mut truth = shallow_truth((1.0, 3.0));
    truth.geometry = GeometryParam::new(-0.13, -0.19, -18.0);
    if let faultpost::scenario::SlipSpec::Bumps(b) = &mut truth.slip {
        b[0].amplitude_mm = 300.0;
    }
    let data = synth(&truth, &template(), 1).unwrap();
    let peak = data.exact.iter().map(|u| (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()).fold(0.0, f64::max);
    assert!((20.0..80.0).contains(&peak), "peak displacement {peak} mm");

    let bx = ParameterBox::new(axis(-0.43, 0.17, 21), axis(-0.49, 0.11, 21), axis(-30.0, -6.0, 21)).unwrap();
    let mut cfg = config(bx, 30);
    cfg.c_override = Some(6e-4);
    cfg.noise = Some(NoiseLevels {
        sigma_hor: 1.0,
        sigma_ver: 3.0,
    });
    let out = run_pipeline(&cfg, &data.stations, Exec::Parallel).unwrap();
    assert_eq!(out.manifest.c.global_c, 6e-4);
    assert_eq!(out.manifest.c.source, CSource::Override);

    let reported = [0.020, 0.023, 1.7];
    for (got, want) in out.manifest.posterior_std.iter().zip(reported) {
        assert!((got / want).log10().abs() < 1.0, "std {got} vs {want}");
    }
}
