//! Seeded straight-line cyclones aimed at a toy world's shoreline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tracks::{Basin, Storm, TrackPoint};
use crate::windfields::{DEFAULT_AIR_DENSITY, DEFAULT_AMBIENT_PRESSURE_HPA, EARTH_RADIUS_KM};

use super::world::ToyWorld;

/// Distance kept between landfall latitudes and the domain edge, degrees.
const LAT_MARGIN: f64 = 1.6;
const CADENCE_HOURS: f64 = 3.0;

/// Latitude band assigned to a basin inside the world's domain. Northern
/// basins share the northern half, southern basins the southern half, each
/// basin taking an equal slice in `Basin::ALL` order.
pub fn basin_band(world: &ToyWorld, basin: Basin) -> (f64, f64) {
    let b = &world.bounds;
    let (lo, hi) = if b.south >= 0.0 || b.north <= 0.0 {
        (b.south + LAT_MARGIN, b.north - LAT_MARGIN)
    } else if basin.is_southern() {
        (b.south + LAT_MARGIN, -LAT_MARGIN.min(-b.south / 2.0))
    } else {
        (LAT_MARGIN.min(b.north / 2.0), b.north - LAT_MARGIN)
    };
    let peers: Vec<Basin> = Basin::ALL
        .into_iter()
        .filter(|x| x.is_southern() == basin.is_southern())
        .collect();
    let slot = peers.iter().position(|&x| x == basin).expect("basin in its hemisphere");
    let width = (hi - lo) / peers.len() as f64;
    (lo + slot as f64 * width, lo + (slot + 1) as f64 * width)
}

/// `count` storms cycling through `basins`, each crossing the shoreline with
/// at least 24 h of track before and after the nominal landfall.
pub fn synth_tracks(world: &ToyWorld, seed: u64, count: usize, basins: &[Basin]) -> Vec<Storm> {
    assert!(!basins.is_empty(), "at least one basin required");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_7AC5);
    let km_per_deg = EARTH_RADIUS_KM.to_radians();
    (0..count)
        .map(|k| {
            let basin = basins[k % basins.len()];
            let (lo, hi) = basin_band(world, basin);
            let lat_l = rng.gen_range(lo..hi);
            let lon_l = world.coast_lon(lat_l);

            let heading = rng.gen_range(-50.0f64..50.0).to_radians();
            let speed_kmh = rng.gen_range(3.0..7.0) * 3.6;
            let t_land = rng.gen_range(36.0..48.0);
            let duration = t_land + rng.gen_range(27.0..39.0);
            let v_peak = rng.gen_range(35.0..70.0);
            let b_shape = rng.gen_range(1.1..1.9);
            let r_max = rng.gen_range(20.0..60.0);
            let decay_hours = rng.gen_range(12.0..36.0);

            let n_points = (duration / CADENCE_HOURS).floor() as usize + 1;
            let points = (0..n_points)
                .map(|i| {
                    let t = i as f64 * CADENCE_HOURS;
                    let dist = (t - t_land) * speed_kmh;
                    let lat = lat_l + dist * heading.sin() / km_per_deg;
                    let lon = lon_l + dist * heading.cos() / (km_per_deg * lat_l.to_radians().cos());
                    let v_max = if t <= t_land {
                        v_peak * (0.6 + 0.4 * t / t_land)
                    } else {
                        v_peak * (-(t - t_land) / decay_hours).exp()
                    };
                    let dp = v_max * v_max * DEFAULT_AIR_DENSITY * std::f64::consts::E / (100.0 * b_shape);
                    TrackPoint {
                        t,
                        lat,
                        lon,
                        r_max,
                        p_min: DEFAULT_AMBIENT_PRESSURE_HPA - dp.max(1.0),
                        v_max,
                    }
                })
                .collect();
            Storm::new(format!("toy{seed}-{k:05}"), basin, points).expect("synthetic track is valid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::world::{synth_world, DomainBounds};
    use super::*;
    use crate::tracks::{detect_landfall, LANDFALL_SUBSTEP_HOURS};

    #[test]
    fn toy_storms_make_landfall_with_window_coverage() {
        let world = synth_world(1, DomainBounds::default());
        let raster = world.land_raster(2.0, 0.02);
        let storms = synth_tracks(&world, 1, 24, &[Basin::NA, Basin::SI, Basin::WP]);
        assert_eq!(storms.len(), 24);
        for s in &storms {
            let ev = detect_landfall(s, &raster, LANDFALL_SUBSTEP_HOURS).expect("landfall");
            assert!(ev.t_landfall - 24.0 >= s.t_first(), "{}", s.id);
            assert!(ev.t_landfall + 12.0 <= s.t_last(), "{}", s.id);
            assert!(s.peak_vmax() >= 33.0);
            assert_eq!(ev.lat < 0.0, s.basin.is_southern());
        }
    }

    #[test]
    fn deterministic() {
        let world = synth_world(2, DomainBounds::default());
        assert_eq!(
            synth_tracks(&world, 5, 6, &[Basin::EP]),
            synth_tracks(&world, 5, 6, &[Basin::EP])
        );
    }
}
