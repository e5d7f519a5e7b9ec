use faultpost::grid::rake_direction;
use faultpost::posterior::log_density_cell;
use faultpost::solver::{misfit_endpoints, Regularized};
use faultpost::*;
use nalgebra::DVector;
use proptest::prelude::*;

fn stations(pos: &[(f64, f64)], disp: &[f64], shift: [f64; 2]) -> StationSet {
    let n = pos.len();
    StationSet::new(
        (0..n).map(|i| format!("P{i}")).collect(),
        pos.iter().map(|p| [p.0 + shift[0], p.1 + shift[1]]).collect(),
        (0..n).map(|i| [disp[3 * i], disp[3 * i + 1], disp[3 * i + 2]]).collect(),
        vec![0.5; n],
        vec![1.5; n],
    )
    .unwrap()
}

fn geometry() -> impl Strategy<Value = GeometryParam> {
    (-0.5f64..0.3, -0.4f64..0.3, -30.0f64..-8.0).prop_map(|(a, b, d)| GeometryParam::new(a, b, d))
}

fn station_layout() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<f64>)> {
    (3usize..9).prop_flat_map(|n| {
        (
            prop::collection::vec((-60.0f64..60.0, -60.0f64..60.0), n),
            prop::collection::vec(-40.0f64..40.0, 3 * n),
        )
    })
}

fn wide_box() -> ParameterBox {
    let ax = |lo, hi| AxisRange::new(lo, hi, 3).unwrap();
    ParameterBox::new(ax(-10.0, 10.0), ax(-10.0, 10.0), ax(-1e4, -1e-3)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Translating stations and fault horizontally by `t` maps the plane
    /// `(a, b, d)` to `(a, b, d − a t1 − b t2)` and leaves the density alone.
    #[test]
    fn log_density_is_shift_equivariant(
        m in geometry(),
        (pos, disp) in station_layout(),
        t in (-20.0f64..20.0, -20.0f64..20.0),
        n_side in 2usize..7,
        log_c in -5.0f64..-1.0,
    ) {
        let medium = ElasticMedium::default();
        let c = 10f64.powf(log_c);
        let eval = |shift: [f64; 2], m: GeometryParam| {
            let st = stations(&pos, &disp, shift);
            let grid = FaultGrid::new([5.0 + shift[0], -3.0 + shift[1]], [20.0, 20.0], n_side, Rake::SteepestAscent).unwrap();
            let ops = DifferenceOperators::new(&grid);
            let sys = ForwardSystem::assemble(&m, &grid, &st, &medium, 0.0)?;
            log_density_cell(&sys, &ops, &st.data(), c, 1.0, &wide_box())
        };
        let moved = GeometryParam::new(m.a, m.b, m.d - m.a * t.0 - m.b * t.1);
        // the box's depth axis is not shifted with the plane
        prop_assume!(moved.d < -1e-3);
        match (eval([0.0, 0.0], m), eval([t.0, t.1], moved)) {
            (Ok(x), Ok(y)) => prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0), "{x} vs {y}"),
            (x, y) => prop_assert_eq!(x.is_err(), y.is_err()),
        }
    }

    #[test]
    fn forward_map_is_linear(
        m in geometry(),
        (pos, disp) in station_layout(),
        g1 in prop::collection::vec(-100.0f64..100.0, 16),
        g2 in prop::collection::vec(-100.0f64..100.0, 16),
        s in -3.0f64..3.0,
    ) {
        let st = stations(&pos, &disp, [0.0, 0.0]);
        let grid = FaultGrid::new([0.0, 0.0], [25.0, 25.0], 4, Rake::FixedAngle(30.0)).unwrap();
        let sys = ForwardSystem::assemble(&m, &grid, &st, &ElasticMedium::default(), 0.0);
        prop_assume!(sys.is_ok(), "fault above the surface");
        let sys = sys.unwrap();
        let (g1, g2) = (DVector::from_vec(g1), DVector::from_vec(g2));
        let lhs = sys.predict(&(&g1 * s + &g2)).unwrap();
        let rhs = sys.predict(&g1).unwrap() * s + sys.predict(&g2).unwrap();
        let scale = lhs.amax().max(1e-12);
        prop_assert!((lhs - rhs).amax() <= 1e-12 * scale);
    }

    #[test]
    fn misfit_and_penalty_are_monotone_and_energy_is_bounded(
        m in geometry(),
        (pos, disp) in station_layout(),
        n_side in 1usize..9,
    ) {
        let st = stations(&pos, &disp, [0.0, 0.0]);
        let grid = FaultGrid::new([0.0, 0.0], [30.0, 30.0], n_side, Rake::SteepestAscent).unwrap();
        let ops = DifferenceOperators::new(&grid);
        let sys = ForwardSystem::assemble(&m, &grid, &st, &ElasticMedium::default(), 0.0);
        prop_assume!(sys.is_ok(), "fault above the surface");
        let sys = sys.unwrap();
        let u = st.data();
        let reg = Regularized::new(&sys, &ops, &u).unwrap();
        let (lo, hi) = misfit_endpoints(&sys, &u).unwrap();
        let eps = 1e-12 * hi;
        let q = grid.q() as f64;
        let (mut prev_f, mut prev_p) = (0.0, f64::INFINITY);
        for i in 0..20 {
            let c = 10f64.powf(-8.0 + 12.0 * i as f64 / 19.0);
            let sol = reg.solve(c).unwrap();
            prop_assert!(sol.misfit >= prev_f - eps && sol.penalty <= prev_p * (1.0 + 1e-12) + 1e-300);
            prop_assert!(sol.misfit >= lo - eps && sol.misfit <= hi + eps);
            prop_assert!(sol.slip.norm_squared() <= q / (8.0 * c) * hi * hi * (1.0 + 1e-9));
            prev_f = sol.misfit;
            prev_p = sol.penalty;
        }
    }

    #[test]
    fn woodbury_matches_dense_solve(
        m in geometry(),
        (pos, disp) in station_layout(),
        n_side in 1usize..11,
        log_c in -7.0f64..0.0,
    ) {
        let st = stations(&pos, &disp, [0.0, 0.0]);
        let grid = FaultGrid::new([0.0, 0.0], [30.0, 30.0], n_side, Rake::SteepestAscent).unwrap();
        let ops = DifferenceOperators::new(&grid);
        let sys = ForwardSystem::assemble(&m, &grid, &st, &ElasticMedium::default(), 0.0);
        prop_assume!(sys.is_ok(), "fault above the surface");
        let sys = sys.unwrap();
        let c = 10f64.powf(log_c);
        let b = sys.weighted_operator();
        let w = st.data().component_mul(&sys.weights);
        let dense = (b.transpose() * &b + ops.dense_k() * c).cholesky().unwrap().solve(&(b.transpose() * &w));
        let g = Regularized::new(&sys, &ops, &st.data()).unwrap().solve(c).unwrap().slip;
        let err = (&g - &dense).norm() / dense.norm().max(1e-300);
        prop_assert!(err <= 1e-8, "relative error {err:e}");
    }

    #[test]
    fn grid_and_box_indices_round_trip(n_side in 1usize..40, counts in (1usize..8, 1usize..8, 1usize..8)) {
        let grid = FaultGrid::new([0.0, 0.0], [10.0, 10.0], n_side, Rake::SteepestAscent).unwrap();
        for k in 0..grid.q() {
            let (i1, i2) = grid.ij(k);
            prop_assert_eq!(grid.index(i1, i2), k);
        }
        let bx = ParameterBox::new(
            AxisRange::new(-0.2, 0.2, counts.0).unwrap(),
            AxisRange::new(-0.2, 0.2, counts.1).unwrap(),
            AxisRange::new(-20.0, -10.0, counts.2).unwrap(),
        ).unwrap();
        for f in 0..bx.n_cells() {
            let [i, j, k] = bx.ijk(f);
            prop_assert_eq!(bx.flat(i, j, k), f);
        }
    }

    #[test]
    fn rake_is_unit_and_tangent(m in geometry(), theta in -180.0f64..180.0) {
        prop_assume!(m.a.hypot(m.b) > 1e-6);
        let n = m.normal();
        for r in [Rake::SteepestAscent, Rake::FixedAngle(theta)] {
            let v = rake_direction(r, &m).unwrap();
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            prop_assert!((v[0] * n[0] + v[1] * n[1] + v[2] * n[2]).abs() < 1e-12);
        }
        let up = rake_direction(Rake::SteepestAscent, &m).unwrap();
        let cos = rake_direction(Rake::FixedAngle(theta), &m).unwrap();
        let dot = up[0] * cos[0] + up[1] * cos[1] + up[2] * cos[2];
        prop_assert!((dot - theta.to_radians().cos()).abs() < 1e-12);
    }

    #[test]
    fn config_round_trips_through_toml(
        err_rel in 0.001f64..0.5,
        tau in 0.1f64..100.0,
        seed in any::<u64>(),
        c in prop::option::of(1e-8f64..1.0),
        center in prop::option::of((-50.0f64..50.0, -50.0f64..50.0)),
        rake in prop_oneof![Just(Rake::SteepestAscent), (-90.0f64..90.0).prop_map(Rake::FixedAngle)],
    ) {
        use faultpost::scenario::{CenterMode, FaultSpec};
        let ax = |lo, hi, n| AxisRange::new(lo, hi, n).unwrap();
        let cfg = ScenarioConfig {
            err_rel,
            tau,
            depth_guard_km: 2.0,
            c_override: c,
            seed,
            medium: ElasticMedium::default(),
            fault: FaultSpec {
                center: center.map_or(CenterMode::default(), |c| CenterMode::Explicit([c.0, c.1])),
                half_lengths: [35.0, 30.0],
                n_side: 12,
                rake,
            },
            bx: ParameterBox::new(ax(-0.5, 0.1, 7), ax(-0.4, 0.2, 5), ax(-30.0, -6.0, 9)).unwrap(),
            noise: None,
        };
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}

/// Shrunk counterexample that exposed an inaccurate library SVD.
#[test]
fn woodbury_graded_regression() {
    let pos = [
        (-24.10422605317238, -24.79590263666683),
        (-41.855796389618384, -34.165198947016165),
        (22.89116024257337, 53.09179359277955),
        (6.42378940151745, 16.365782349133898),
        (-51.29640351757195, 48.542820037858675),
    ];
    let mut disp = [0.0; 15];
    disp[14] = 33.81446336649149;
    let st = stations(&pos, &disp, [0.0, 0.0]);
    let m = GeometryParam::new(-0.4848512726001559, 0.03822831273454497, -23.35740683150185);
    let grid = FaultGrid::new([0.0, 0.0], [30.0, 30.0], 8, Rake::SteepestAscent).unwrap();
    let ops = DifferenceOperators::new(&grid);
    let sys = ForwardSystem::assemble(&m, &grid, &st, &ElasticMedium::default(), 0.0).unwrap();
    let b = sys.weighted_operator();
    let w = st.data().component_mul(&sys.weights);
    let dense = (b.transpose() * &b + ops.dense_k()).cholesky().unwrap().solve(&(b.transpose() * &w));
    let g = Regularized::new(&sys, &ops, &st.data()).unwrap().solve(1.0).unwrap().slip;
    let err = (&g - &dense).norm() / dense.norm();
    assert!(err <= 1e-10, "relative error {err:e}");
}
