use proptest::prelude::*;
use surge_core::evaluation::{rmse, squared_error};
use surge_core::gridding::{
    assemble_features, build_grid, dilate_mask, FeatureConfig, FeatureTensor, GridSpec, TriangleIndex,
};
use surge_core::oracle::{synth_surge, synth_tracks, synth_world, DomainBounds, SurgeOracleParams};
use surge_core::tracks::{
    detect_landfall, interpolate_track, lon_delta, normalize_lon, pack_runs, Basin, LandfallEvent, Storm,
    TrackPoint, LANDFALL_SUBSTEP_HOURS,
};
use surge_core::windfields::{coriolis, gradient_wind_speed, holland_b, pressure_at, HollandParams};
use surge_core::{Field2, SurgeField};

fn holland(p_c: f64, v_max: f64, r_max: f64, lat: f64) -> HollandParams {
    HollandParams {
        p_c,
        p_n: 1013.25,
        r_max,
        v_max,
        b: holland_b(p_c, 1013.25, v_max, 1.15).unwrap(),
        rho_air: 1.15,
        f: coriolis(lat),
    }
}

fn two_point_storm(lon0: f64, lon1: f64) -> Storm {
    let pt = |t: f64, lon: f64| TrackPoint {
        t,
        lat: 20.0,
        lon,
        r_max: 30.0,
        p_min: 960.0,
        v_max: 45.0,
    };
    Storm::new("s", Basin::WP, vec![pt(0.0, lon0), pt(6.0, lon1)]).unwrap()
}

proptest! {
    #[test]
    fn normalized_longitude_in_range(lon in -1000.0f64..1000.0) {
        let n = normalize_lon(lon);
        prop_assert!((-180.0..180.0).contains(&n));
        prop_assert!(((n - lon) / 360.0 - ((n - lon) / 360.0).round()).abs() < 1e-9);
    }

    #[test]
    fn interpolated_track_stays_between_fixes(lon0 in -179.0f64..179.0, step in -5.0f64..5.0, t in 0.0f64..=6.0) {
        let storm = two_point_storm(lon0, normalize_lon(lon0 + step));
        let p = interpolate_track(&storm, t).unwrap();
        let from_start = lon_delta(lon0, p.lon);
        prop_assert!(from_start.abs() <= step.abs() + 1e-9);
        prop_assert!(from_start * step >= -1e-12);
        prop_assert!((-180.0..180.0).contains(&p.lon));
    }

    #[test]
    fn pressure_bounded_by_center_and_ambient(
        p_c in 880.0f64..1005.0, v in 15.0f64..85.0, r_max in 5.0f64..150.0, r in 0.0f64..2000.0,
    ) {
        let hp = holland(p_c, v, r_max, 25.0);
        let p = pressure_at(r, &hp);
        prop_assert!(p >= p_c - 1e-9 && p <= hp.p_n + 1e-9);
    }

    #[test]
    fn wind_nonnegative_and_decays_far_out(
        p_c in 880.0f64..1005.0, v in 15.0f64..85.0, r_max in 5.0f64..150.0, lat in -40.0f64..40.0,
    ) {
        let hp = holland(p_c, v, r_max, lat);
        let mut prev = f64::INFINITY;
        for k in 1..=20 {
            let w = gradient_wind_speed(r_max * (1.0 + k as f64), &hp).unwrap();
            prop_assert!(w >= 0.0 && w.is_finite());
            prop_assert!(w <= prev + 1e-12);
            prev = w;
        }
    }

    #[test]
    fn grid_centers_symmetric_about_center(lat in -60.0f64..60.0, lon in -179.0f64..179.0, log_res in 3u32..8) {
        let res = 1usize << log_res;
        let g = build_grid(&LandfallEvent { t_landfall: 0.0, lat, lon }, 2.5, res).unwrap();
        for i in 0..res {
            let j = res - 1 - i;
            prop_assert!((g.cell_lat(i) + g.cell_lat(j) - 2.0 * lat).abs() < 1e-9);
            prop_assert!((lon_delta(lon, g.cell_lon(i)) + lon_delta(lon, g.cell_lon(j))).abs() < 1e-9);
        }
        prop_assert!(g.cell_lat(1) > g.cell_lat(0));
    }

    #[test]
    fn packing_uses_one_run_per_storm_of_busiest_basin(counts in prop::collection::vec(0usize..12, 6)) {
        let storms: Vec<Storm> = Basin::ALL
            .iter()
            .zip(&counts)
            .flat_map(|(&b, &c)| (0..c).map(move |i| Storm { id: format!("{b}{i}"), basin: b, points: Vec::new() }))
            .collect();
        let runs = pack_runs(&storms);
        prop_assert_eq!(runs.len(), counts.iter().copied().max().unwrap());
        prop_assert_eq!(runs.iter().map(|r| r.storms.len()).sum::<usize>(), storms.len());
    }

    #[test]
    fn oracle_surge_nonnegative_zero_on_land_and_monotone(
        u in -40.0f32..40.0, v in -40.0f32..40.0, depth in 0.0f32..200.0, scale in 1.0f32..3.0,
    ) {
        let (features, grid) = coastal(u, v, depth);
        let params = SurgeOracleParams::default();
        let base = synth_surge(&features, &grid, &params);
        let land = features.land_mask();
        for (s, &is_land) in base.data.iter().zip(&land.data) {
            prop_assert!(*s >= 0.0 && s.is_finite());
            prop_assert!(!is_land || *s == 0.0);
        }
        let (stronger, _) = coastal(u * scale, v * scale, depth);
        let boosted = synth_surge(&stronger, &grid, &params);
        for (a, b) in base.data.iter().zip(&boosted.data) {
            prop_assert!(b >= a);
        }
    }

    #[test]
    fn rmse_zero_iff_equal_and_symmetric(data in prop::collection::vec(-5.0f32..5.0, 16), shift in -1.0f32..1.0) {
        let a = SurgeField::from_vec(4, 4, data.clone());
        let b = SurgeField::from_vec(4, 4, data.iter().map(|x| x + shift).collect());
        prop_assert_eq!(rmse(&a, &a, None).unwrap(), 0.0);
        prop_assert!((rmse(&a, &b, None).unwrap() - rmse(&b, &a, None).unwrap()).abs() < 1e-12);
        prop_assert!((rmse(&a, &b, None).unwrap() - shift.abs() as f64).abs() < 1e-5);
    }

    #[test]
    fn masked_error_partitions_total(data in prop::collection::vec(-5.0f32..5.0, 16), bits in prop::collection::vec(any::<bool>(), 16)) {
        let a = SurgeField::from_vec(4, 4, data);
        let zero = SurgeField::filled(4, 4, 0.0);
        let mask = Field2::from_vec(4, 4, bits.clone());
        let inverse = Field2::from_vec(4, 4, bits.iter().map(|b| !b).collect());
        let (inside, outside) = (squared_error(&a, &zero, Some(&mask)).unwrap(), squared_error(&a, &zero, Some(&inverse)).unwrap());
        let all = squared_error(&a, &zero, None).unwrap();
        prop_assert_eq!(inside.count + outside.count, all.count);
        prop_assert!((inside.sum + outside.sum - all.sum).abs() < 1e-9);
    }

    #[test]
    fn dilation_grows_with_radius(bits in prop::collection::vec(prop::bool::weighted(0.05), 24 * 24), k in 0usize..5) {
        let mask = Field2::from_vec(24, 24, bits);
        let small = dilate_mask(&mask, k);
        let large = dilate_mask(&mask, k + 1);
        prop_assert!(mask.is_subset_of(&small));
        prop_assert!(small.is_subset_of(&large));
    }
}

/// 16x16 window with land in the east quarter and uniform water depth.
fn coastal(u: f32, v: f32, depth: f32) -> (FeatureTensor, GridSpec) {
    let grid = GridSpec::new(0.0, 0.0, 1.6, 16).unwrap();
    let mut t = FeatureTensor::zeros(3, 16, 16);
    for k in 0..3 {
        t.channel_mut(t.u_channel(k)).fill(u);
        t.channel_mut(t.v_channel(k)).fill(v);
    }
    let (bathy, land) = (t.bathymetry_channel(), t.land_channel());
    for i in 0..16 * 16 {
        let is_land = i % 16 >= 12;
        t.channel_mut(land)[i] = if is_land { 1.0 } else { 0.0 };
        t.channel_mut(bathy)[i] = if is_land { 0.0 } else { depth };
    }
    (t, grid)
}

#[test]
fn toy_storms_make_landfall_and_yield_finite_features() {
    let world = synth_world(4, DomainBounds::default());
    let raster = world.land_raster(1.0, 0.02);
    let index = TriangleIndex::build(&world.mesh);
    let storms = synth_tracks(&world, 4, 6, &[Basin::NA, Basin::SP]);
    assert_eq!(storms.len(), 6);
    for storm in &storms {
        let lf = detect_landfall(storm, &raster, LANDFALL_SUBSTEP_HOURS).expect("toy tracks cross the coast");
        assert!(world.is_land(lf.lat, lf.lon + 0.05) || world.is_land(lf.lat, lf.lon));
        let grid = build_grid(&lf, 2.5, 16).unwrap();
        let f = assemble_features(storm, &lf, &world.mesh, &index, &grid, &FeatureConfig::default()).unwrap();
        assert_eq!(f.channels(), 41);
        assert!(f.is_finite());
        let surge = synth_surge(&f, &grid, &SurgeOracleParams::default());
        assert!(surge.data.iter().any(|&s| s > 0.0), "{} has no surge", storm.id);
    }
}

#[test]
fn southern_hemisphere_rotates_clockwise() {
    let hp = holland(950.0, 50.0, 30.0, -15.0);
    // Point due east of the eye: counterclockwise flow points north, clockwise south.
    let (_, v_south) = surge_core::windfields::wind_vector_at(-15.0, 150.5, -15.0, 150.0, &hp, 0.0);
    let hp_n = holland(950.0, 50.0, 30.0, 15.0);
    let (_, v_north) = surge_core::windfields::wind_vector_at(15.0, 150.5, 15.0, 150.0, &hp_n, 0.0);
    assert!(v_south < 0.0 && v_north > 0.0);
}
