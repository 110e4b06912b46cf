//! Scratch numbers used while calibrating defaults. Not part of the test
//! suite.

use monopulse_core::array::*;
use monopulse_core::components::*;
use monopulse_core::doa::*;
use monopulse_core::netkernel::*;

fn main() {
    let f0 = 2e9;
    let z0 = 50.0;

    // Coupler bandwidth under (0.5 dB, 10 deg).
    let p = CouplerParams::new(f0, z0);
    let g = gen_pt_coupler(&p);
    let grid = FrequencyGrid::new(f0, 0.5 * f0, 1.5 * f0, 1001);
    let t = std::time::Instant::now();
    let s = sweep(&g, &grid).unwrap();
    println!("coupler 1001-pt sweep: {:?}", t.elapsed());
    let rep = metrics(&s, f0, &CriteriaSet::amp_phase(0.5, 10.0), &coupler_roles());
    println!("coupler BW: {:.2}% band {:?}", rep.fractional_bandwidth_pct, rep.band);

    // Comparator bandwidth under (10 dB, 0.5 dB, 10 deg).
    let gc = gen_comparator(f0, z0, z0, 0.0);
    let t = std::time::Instant::now();
    let sc = sweep(&gc, &grid).unwrap();
    println!("comparator 1001-pt sweep: {:?}", t.elapsed());
    let repc = metrics(&sc, f0, &CriteriaSet::full(10.0, 0.5, 10.0), &comparator_roles());
    println!("comparator BW: {:.2}% band {:?}", repc.fractional_bandwidth_pct, repc.band);

    // Lossy comparator transmissions at f0.
    let gl = gen_comparator(f0, z0, z0, 0.4);
    let sl = sweep(&gl, &FrequencyGrid::spot(f0, f0)).unwrap();
    let m = &sl.matrices[0];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for out in 0..4 {
        for inp in 0..4 {
            let db = -db20(m.get(4 + out, inp).norm());
            lo = lo.min(db);
            hi = hi.max(db);
        }
    }
    println!("lossy (0.4 dB/lambda) comparator transmissions: {lo:.3} .. {hi:.3} dB");

    // Crossover unwrapped thru phase at f0 from a DC-up sweep.
    let xp = CrossoverParams::scaled_reference(z0);
    let gx = gen_crossover(&xp, f0, z0);
    let gridx = FrequencyGrid::new(f0, f0 / 400.0, f0, 400);
    let sx = sweep(&gx, &gridx).unwrap();
    let mut prev = 0.0f64;
    let mut unwrapped = 0.0f64;
    for m in &sx.matrices {
        let ph = m.get(2, 0).arg();
        let mut d = ph - prev;
        while d > std::f64::consts::PI {
            d -= std::f64::consts::TAU;
        }
        while d < -std::f64::consts::PI {
            d += std::f64::consts::TAU;
        }
        unwrapped += d;
        prev = ph;
    }
    println!("crossover unwrapped thru phase at f0: {:.3} deg", unwrapped.to_degrees());

    // Pattern cuts at 1.95 GHz through the ideal comparator.
    let fop = 1.95e9;
    let geom = ArrayGeometry::default_at(fop);
    let gc2 = gen_comparator(fop, z0, z0, 0.0);
    let sc2 = sweep(&gc2, &FrequencyGrid::spot(fop, fop)).unwrap();
    let thetas = default_theta_grid(0.25);
    for (cut, name) in [(Cut::Azimuth, "az"), (Cut::Elevation, "el")] {
        let c = cut_pattern(&sc2, &geom, cut, Channel::Sum, fop, &thetas).unwrap();
        let met = pattern_metrics(&c).unwrap();
        println!(
            "sum cut {name}: hpbw {:.2} deg, sll {:?}, peak at {:.2}",
            met.hpbw_deg, met.sll_db, met.peak_deg
        );
    }
    let c = cut_pattern(&sc2, &geom, Cut::Azimuth, Channel::DeltaAz, fop, &thetas).unwrap();
    let met = pattern_metrics(&c).unwrap();
    println!("ideal d_az null depth: {:.1} dB", met.null_depth_db);

    // Null depth under uniform +/-0.5 dB / +/-5 deg draws, mean over seeds.
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    let mut depths = Vec::new();
    for seed in 0..32u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let factors: Vec<Complex64> = (0..4)
            .map(|_| {
                let a: f64 = rng.gen_range(-0.5..0.5);
                let ph: f64 = rng.gen_range(-5.0f64..5.0);
                Complex64::from_polar(10f64.powf(a / 20.0), ph.to_radians())
            })
            .collect();
        let mut peak = f64::NEG_INFINITY;
        let mut bore = 0.0;
        for &t in &thetas {
            let th = (t as f64).to_radians();
            let x = steering_vector(&geom, th, 0.0);
            let xi: Vec<Complex64> = x.iter().zip(&factors).map(|(a, b)| a * b).collect();
            let ch = ideal_channels(&[xi[0], xi[1], xi[2], xi[3]]);
            let v = ch.d_az.norm();
            if v > peak {
                peak = v;
            }
            if t == 0.0 {
                bore = v;
            }
        }
        depths.push(db20(peak) - db20(bore));
    }
    let mean = depths.iter().sum::<f64>() / depths.len() as f64;
    let min = depths.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = depths.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("impaired null depth over 32 seeds: mean {mean:.1} min {min:.1} max {max:.1} dB");

    // Standard dataset + estimation spread.
    let sset = Scenario::standard(0.62, 7);
    let data = gen_dataset(&sset);
    let rows = monopulse_core::dnn::rows_from_samples(&data);
    let mut worst: f64 = 0.0;
    let mut mse = 0.0;
    for r in &rows {
        let da = r.input[1] - r.target[1];
        let de = r.input[0] - r.target[0];
        mse += da * da + de * de;
        worst = worst.max(da.abs().max(de.abs()));
    }
    println!(
        "standard dataset: {} rows, uncorrected mse {:.3e} rad^2, worst {:.3} deg",
        rows.len(),
        mse / rows.len() as f64,
        worst.to_degrees()
    );
}
