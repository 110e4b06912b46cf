//! Group-delay calibration scratch: effective delay of the crossover thru
//! path vs z_x, and coupler bandwidth for candidate equalizer lengths.

use monopulse_core::components::*;
use monopulse_core::netkernel::*;

fn thru_slope_deg(xp: &CrossoverParams, f0: f64, z0: f64) -> f64 {
    // Local phase slope of the feed+core+feed path at f0, expressed as the
    // equivalent line length in degrees (a plain line of length L has slope
    // -L per relative frequency).
    let g = gen_crossover(xp, f0, z0);
    let df = 0.002 * f0;
    let s = sweep(&g, &FrequencyGrid::new(f0, f0 - df, f0 + df, 3)).unwrap();
    let a = s.matrices[0].get(2, 0).arg();
    let b = s.matrices[2].get(2, 0).arg();
    let mut d = b - a;
    while d > std::f64::consts::PI {
        d -= std::f64::consts::TAU;
    }
    while d < -std::f64::consts::PI {
        d += std::f64::consts::TAU;
    }
    -(d.to_degrees()) / (2.0 * df / f0)
}

fn main() {
    let f0 = 2e9;
    let z0 = 50.0;
    for zx in [30.0, 40.0, 50.0, 57.0, 70.0, 85.0, 100.0, 120.0, 140.0] {
        let xp = CrossoverParams { z_x: zx, z_y: z0, theta_x_deg: 90.0, theta_y_deg: 90.0 };
        println!("z_x {zx:6.1}: effective thru delay {:8.2} deg", thru_slope_deg(&xp, f0, z0));
    }
    for zy in [30.0, 40.0, 60.0, 70.0] {
        let xp = CrossoverParams { z_x: 57.0, z_y: zy, theta_x_deg: 90.0, theta_y_deg: 90.0 };
        println!("z_y {zy:6.1}: effective thru delay {:8.2} deg", thru_slope_deg(&xp, f0, z0));
    }
}
