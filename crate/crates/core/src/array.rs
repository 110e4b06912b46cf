//! 2x2 monopulse array: steering vectors, channel combining through the
//! comparator S-matrix, pattern cuts and pattern metrics.
//!
//! Element layout follows the receiver front panel: A top-left, B
//! top-right, C bottom-left, D bottom-right, with azimuth along the rows
//! and elevation along the columns. Steering phases use the separable
//! direction sines (sin of the azimuth angle for the row axis, sin of the
//! elevation angle for the column axis), which makes the per-axis
//! monopulse ratio an exact tangent law at every angle.

use num_complex::Complex64;
use thiserror::Error;

use crate::components::SIGN_MATRIX;
use crate::netkernel::{db20, SweepSParams};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("frequency {0:.6e} Hz is not on the sweep grid")]
    FrequencyNotInGrid(f64),
    #[error("no -3 dB crossings bracket the main peak")]
    NoMainLobe,
}

/// Element radiation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementModel {
    Isotropic,
    /// cos(theta)^q in each principal plane; q fitted so a single element
    /// is about as directive as the patch it stands in for.
    CosinePower(f64),
}

/// 2x2 array geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    /// Element spacing along the azimuth axis, meters.
    pub d_az: f64,
    /// Element spacing along the elevation axis, meters.
    pub d_el: f64,
    /// Operating frequency, Hz.
    pub f_op: f64,
    pub element: ElementModel,
}

impl ArrayGeometry {
    /// Spacings 0.70 / 0.55 wavelengths and a cosine^1.5 element; chosen so
    /// the sum-beam widths land near the measured 35 deg (azimuth cut) and
    /// 45 deg (elevation cut).
    pub fn default_at(f_op: f64) -> Self {
        let lambda = SPEED_OF_LIGHT / f_op;
        Self {
            d_az: 0.70 * lambda,
            d_el: 0.55 * lambda,
            f_op,
            element: ElementModel::CosinePower(1.5),
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_op
    }

    fn element_gain(&self, theta_az: f64, theta_el: f64) -> f64 {
        match self.element {
            ElementModel::Isotropic => 1.0,
            ElementModel::CosinePower(q) => {
                let g = (theta_az.cos() * theta_el.cos()).max(0.0);
                g.powf(q)
            }
        }
    }
}

/// Per-element plane-wave phases for the 2x2 layout, order (A, B, C, D).
/// Angles in radians, limited to +/-90 degrees.
///
/// The azimuth axis is positive toward the A/C column and the elevation
/// axis toward the A/B row, so every difference channel lags the sum by 90
/// degrees with a positive tangent slope.
pub fn steering_vector(geom: &ArrayGeometry, theta_az: f64, theta_el: f64) -> [Complex64; 4] {
    let k = std::f64::consts::TAU / geom.wavelength();
    let u = theta_az.sin();
    let v = theta_el.sin();
    let g = geom.element_gain(theta_az, theta_el);
    let phase = |x: f64, y: f64| Complex64::from_polar(g, k * (x * u + y * v));
    let ax = geom.d_az / 2.0;
    let ey = geom.d_el / 2.0;
    [
        phase(ax, ey),   // A
        phase(-ax, ey),  // B
        phase(ax, -ey),  // C
        phase(-ax, -ey), // D
    ]
}

/// Sum and difference channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channels {
    pub sum: Complex64,
    pub d_az: Complex64,
    pub d_el: Complex64,
    pub d_del: Complex64,
}

impl Channels {
    pub fn as_array(&self) -> [Complex64; 4] {
        [self.sum, self.d_az, self.d_el, self.d_del]
    }

    pub fn from_array(v: [Complex64; 4]) -> Self {
        Self { sum: v[0], d_az: v[1], d_el: v[2], d_del: v[3] }
    }
}

/// Exact sign-matrix combination of the four element signals.
pub fn ideal_channels(x: &[Complex64; 4]) -> Channels {
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for (row, acc) in out.iter_mut().enumerate() {
        for (col, &xi) in x.iter().enumerate() {
            *acc += SIGN_MATRIX[row][col] * xi;
        }
    }
    Channels::from_array(out)
}

/// Channels formed through a measured or simulated 8-port comparator sweep
/// at frequency `f`: outputs = S(outputs, inputs) * steering.
pub fn network_channels(
    s: &SweepSParams,
    geom: &ArrayGeometry,
    theta_az: f64,
    theta_el: f64,
    f: f64,
) -> Result<Channels, PatternError> {
    let fi = s.freq_index(f).ok_or(PatternError::FrequencyNotInGrid(f))?;
    let x = steering_vector(geom, theta_az, theta_el);
    let m = &s.matrices[fi];
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for (row, acc) in out.iter_mut().enumerate() {
        for (col, &xi) in x.iter().enumerate() {
            *acc += m.get(4 + row, col) * xi;
        }
    }
    Ok(Channels::from_array(out))
}

/// Which channel a pattern cut plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Sum,
    DeltaAz,
    DeltaEl,
    DeltaDel,
}

impl Channel {
    fn pick(&self, c: &Channels) -> Complex64 {
        match self {
            Channel::Sum => c.sum,
            Channel::DeltaAz => c.d_az,
            Channel::DeltaEl => c.d_el,
            Channel::DeltaDel => c.d_del,
        }
    }
}

/// Principal-plane cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cut {
    /// phi = 0: sweep the azimuth angle at zero elevation.
    Azimuth,
    /// phi = 90: sweep the elevation angle at zero azimuth.
    Elevation,
}

/// One pattern cut: theta grid in degrees and the corresponding magnitudes
/// in dB, normalized so the sum-channel peak over the same cut is 0 dB.
#[derive(Debug, Clone)]
pub struct PatternCut {
    pub theta_deg: Vec<f64>,
    pub gain_db: Vec<f64>,
}

/// Cut a channel pattern through the comparator at frequency `f`,
/// magnitudes normalized to the sum-channel peak on the same cut.
pub fn cut_pattern(
    s: &SweepSParams,
    geom: &ArrayGeometry,
    cut: Cut,
    channel: Channel,
    f: f64,
    theta_deg: &[f64],
) -> Result<PatternCut, PatternError> {
    let mut sum_peak = 0.0f64;
    let mut values = Vec::with_capacity(theta_deg.len());
    for &t in theta_deg {
        let th = t.to_radians();
        let (taz, tel) = match cut {
            Cut::Azimuth => (th, 0.0),
            Cut::Elevation => (0.0, th),
        };
        let ch = network_channels(s, geom, taz, tel, f)?;
        sum_peak = sum_peak.max(ch.sum.norm());
        values.push(channel.pick(&ch).norm());
    }
    if sum_peak <= 0.0 {
        return Err(PatternError::NoMainLobe);
    }
    let gain_db = values.iter().map(|&v| db20(v / sum_peak)).collect();
    Ok(PatternCut { theta_deg: theta_deg.to_vec(), gain_db })
}

/// Uniform theta grid over +/-90 degrees.
pub fn default_theta_grid(step_deg: f64) -> Vec<f64> {
    let n = (180.0 / step_deg).round() as usize;
    (0..=n).map(|i| -90.0 + i as f64 * step_deg).collect()
}

/// Derived scalar metrics of one cut.
#[derive(Debug, Clone, Copy)]
pub struct PatternMetrics {
    /// Half-power beamwidth in degrees (linear interpolation of the -3 dB
    /// crossings around the peak).
    pub hpbw_deg: f64,
    /// Side-lobe level: peak minus highest secondary maximum, positive dB.
    pub sll_db: Option<f64>,
    /// Peak minus the level at theta = 0, positive dB.
    pub null_depth_db: f64,
    /// Angle of the maximum, degrees.
    pub peak_deg: f64,
}

/// Compute beamwidth, side-lobe level and boresight null depth of a cut.
pub fn pattern_metrics(cut: &PatternCut) -> Result<PatternMetrics, PatternError> {
    let n = cut.gain_db.len();
    if n < 3 {
        return Err(PatternError::NoMainLobe);
    }
    let peak_idx = cut
        .gain_db
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("gain is finite"))
        .expect("cut is non-empty")
        .0;
    let peak = cut.gain_db[peak_idx];
    let target = peak - 3.0103;

    let interp = |i: usize, j: usize| {
        let (g1, g2) = (cut.gain_db[i], cut.gain_db[j]);
        let (t1, t2) = (cut.theta_deg[i], cut.theta_deg[j]);
        t1 + (target - g1) * (t2 - t1) / (g2 - g1)
    };
    let mut left = None;
    for i in (1..=peak_idx).rev() {
        if cut.gain_db[i - 1] <= target && cut.gain_db[i] >= target {
            left = Some(interp(i - 1, i));
            break;
        }
    }
    let mut right = None;
    for i in peak_idx..n - 1 {
        if cut.gain_db[i] >= target && cut.gain_db[i + 1] <= target {
            right = Some(interp(i + 1, i));
            break;
        }
    }
    let (l, r) = match (left, right) {
        (Some(l), Some(r)) => (l, r),
        _ => return Err(PatternError::NoMainLobe),
    };

    // Secondary maxima: local peaks outside the main lobe span.
    let mut sll = None;
    for i in 1..n - 1 {
        let t = cut.theta_deg[i];
        if t >= l && t <= r {
            continue;
        }
        if cut.gain_db[i] >= cut.gain_db[i - 1] && cut.gain_db[i] >= cut.gain_db[i + 1] {
            let drop = peak - cut.gain_db[i];
            sll = Some(sll.map_or(drop, |s: f64| s.min(drop)));
        }
    }

    let boresight = cut
        .theta_deg
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("theta is finite"))
        .expect("cut is non-empty")
        .0;
    Ok(PatternMetrics {
        hpbw_deg: r - l,
        sll_db: sll,
        null_depth_db: peak - cut.gain_db[boresight],
        peak_deg: cut.theta_deg[peak_idx],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> ArrayGeometry {
        ArrayGeometry::default_at(1.95e9)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn boresight_steering_is_uniform() {
        let v = steering_vector(&geom(), 0.0, 0.0);
        for e in &v {
            assert!((e - v[0]).norm() < 1e-15);
        }
    }

    #[test]
    fn half_wave_columns_give_pi_phase_slope() {
        let mut g = geom();
        g.d_az = g.wavelength() / 2.0;
        g.element = ElementModel::Isotropic;
        let t = 0.3f64;
        let v = steering_vector(&g, t, 0.0);
        let diff = (v[0] / v[1]).arg();
        assert!((diff - std::f64::consts::PI * t.sin()).abs() < 1e-12);
    }

    #[test]
    fn conjugate_symmetry_for_isotropic_elements() {
        let mut g = geom();
        g.element = ElementModel::Isotropic;
        let v1 = steering_vector(&g, 0.21, 0.13);
        let v2 = steering_vector(&g, -0.21, -0.13);
        for (a, b) in v1.iter().zip(&v2) {
            assert!((a.conj() - b).norm() < 1e-15);
        }
    }

    #[test]
    fn ideal_channels_boresight() {
        let x = [c(1.0, 0.0); 4];
        let ch = ideal_channels(&x);
        assert_eq!(ch.sum, c(4.0, 0.0));
        assert_eq!(ch.d_az, c(0.0, 0.0));
        assert_eq!(ch.d_el, c(0.0, 0.0));
        assert_eq!(ch.d_del, c(0.0, 0.0));
    }

    #[test]
    fn ideal_channels_column_antisymmetry() {
        let x = [c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)];
        let ch = ideal_channels(&x);
        assert_eq!(ch.d_az, c(4.0, 0.0));
        assert_eq!(ch.sum, c(0.0, 0.0));
        assert_eq!(ch.d_el, c(0.0, 0.0));
        assert_eq!(ch.d_del, c(0.0, 0.0));
    }

    #[test]
    fn ideal_channels_match_brute_force() {
        let x = [c(0.3, -0.4), c(-1.2, 0.9), c(0.05, 1.1), c(2.0, -0.7)];
        let ch = ideal_channels(&x);
        assert!((ch.sum - (x[0] + x[1] + x[2] + x[3])).norm() < 1e-15);
        assert!((ch.d_az - ((x[0] + x[2]) - (x[1] + x[3]))).norm() < 1e-15);
        assert!((ch.d_el - ((x[0] + x[1]) - (x[2] + x[3]))).norm() < 1e-15);
        assert!((ch.d_del - ((x[0] + x[3]) - (x[1] + x[2]))).norm() < 1e-15);
    }

    #[test]
    fn two_element_pair_hpbw_matches_fine_grid_oracle() {
        // Broadside pair at half-wave spacing: pattern cos(pi/2 sin t).
        // The -3 dB point solves cos(pi/2 sin t) = 1/sqrt(2), i.e.
        // sin t = 1/2, t = 30 deg, so the width is 60 deg.
        let theta: Vec<f64> = default_theta_grid(0.05);
        let gain_db: Vec<f64> = theta
            .iter()
            .map(|t| {
                let af = (std::f64::consts::FRAC_PI_2 * t.to_radians().sin()).cos();
                db20(af.abs())
            })
            .collect();
        let m = pattern_metrics(&PatternCut { theta_deg: theta, gain_db }).unwrap();
        assert!((m.hpbw_deg - 60.0).abs() < 1.0, "hpbw = {}", m.hpbw_deg);
    }

    #[test]
    fn flat_pattern_has_no_main_lobe() {
        let theta = default_theta_grid(0.5);
        let gain_db = vec![0.0; theta.len()];
        assert!(matches!(
            pattern_metrics(&PatternCut { theta_deg: theta, gain_db }),
            Err(PatternError::NoMainLobe)
        ));
    }
}
