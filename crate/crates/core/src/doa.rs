//! Ratio-based direction-of-arrival estimation, receive-chain impairment
//! models, and synthetic dataset generation.
//!
//! The per-axis monopulse ratio follows the tangent law
//! `gamma = tan(pi d sin(theta) / lambda)`. For the centered plane-wave
//! phase reference the difference channels sit in quadrature with the sum
//! channel, so the estimator derotates the difference by -90 degrees before
//! taking the real part of the ratio; the remaining quadrature component is
//! reported for diagnostics.
//!
//! Impairments split into a systematic part (per-channel gain/phase
//! miscalibration, drawn once per scenario - this is what the corrector
//! network can learn) and a per-sample part (receiver noise at a configured
//! SNR, drawn fresh for every sample from a seed derived as
//! `mix(scenario seed, sample index)`).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::array::{
    ideal_channels, network_channels, steering_vector, ArrayGeometry, Channels, PatternError,
};
use crate::netkernel::SweepSParams;

#[derive(Debug, Error)]
pub enum DoaError {
    #[error("sum channel is null; the ratio is undefined")]
    SumNull,
    #[error("ratio {0:.6} maps outside the unambiguous angular range")]
    OutOfUnambiguousRange(f64),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// Real monopulse ratio: the in-phase part of delta over sigma.
pub fn monopulse_ratio(delta: Complex64, sigma: Complex64) -> Result<f64, DoaError> {
    if sigma.norm() <= 1e-12 * delta.norm().max(1.0) {
        return Err(DoaError::SumNull);
    }
    Ok((delta / sigma).re)
}

/// Forward tangent law: the ratio a 2x2 pair produces at angle `theta`.
pub fn ratio_from_angle(theta: f64, d: f64, lambda: f64) -> f64 {
    (std::f64::consts::PI * d / lambda * theta.sin()).tan()
}

/// Invert the tangent law on its principal branch.
pub fn angle_from_ratio(gamma: f64, d: f64, lambda: f64) -> Result<f64, DoaError> {
    let arg = gamma.atan() * lambda / (std::f64::consts::PI * d);
    if arg.abs() > 1.0 {
        return Err(DoaError::OutOfUnambiguousRange(gamma));
    }
    Ok(arg.asin())
}

/// Single extra propagation path: a scaled, delayed copy of the incident
/// signal added to every element before combining.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multipath {
    /// Amplitude relative to the direct path, in [0, 1).
    pub rel_amp: f64,
    /// Excess path length in meters.
    pub excess_path_m: f64,
    /// Reflection phase in degrees.
    pub reflection_phase_deg: f64,
}

impl Multipath {
    pub fn factor(&self, lambda_m: f64) -> Complex64 {
        let phase = -std::f64::consts::TAU * self.excess_path_m / lambda_m
            + self.reflection_phase_deg.to_radians();
        Complex64::from_polar(self.rel_amp, phase)
    }
}

/// Receive-chain impairment description.
#[derive(Debug, Clone)]
pub struct ImpairmentConfig {
    /// Per-channel amplitude error sigma, dB.
    pub sigma_amp_db: f64,
    /// Per-channel phase error sigma, degrees.
    pub sigma_phase_deg: f64,
    /// Complex additive noise per channel, relative to the sum-channel
    /// magnitude. `None` disables noise.
    pub snr_db: Option<f64>,
    pub multipath: Option<Multipath>,
    /// Non-ideal comparator to combine through instead of the exact sign
    /// matrix.
    pub comparator: Option<SweepSParams>,
    pub seed: u64,
}

impl ImpairmentConfig {
    pub fn none(seed: u64) -> Self {
        Self {
            sigma_amp_db: 0.0,
            sigma_phase_deg: 0.0,
            snr_db: None,
            multipath: None,
            comparator: None,
            seed,
        }
    }

    /// Moderate fixed miscalibration plus high-SNR noise; the standard
    /// synthetic testbed.
    pub fn moderate(seed: u64) -> Self {
        Self {
            sigma_amp_db: 0.5,
            sigma_phase_deg: 5.0,
            snr_db: Some(50.0),
            multipath: None,
            comparator: None,
            seed,
        }
    }
}

/// One realization of the per-channel gain/phase miscalibration.
#[derive(Debug, Clone, Copy)]
pub struct ChannelErrors {
    pub factors: [Complex64; 4],
}

impl ChannelErrors {
    pub fn identity() -> Self {
        Self { factors: [Complex64::new(1.0, 0.0); 4] }
    }

    /// Draw gains 10^(a/20) e^(j phi), a ~ N(0, sigma_amp),
    /// phi ~ N(0, sigma_phase).
    pub fn draw(cfg: &ImpairmentConfig, rng: &mut impl Rng) -> Self {
        let mut factors = [Complex64::new(1.0, 0.0); 4];
        for f in factors.iter_mut() {
            let a_db = normal(rng) * cfg.sigma_amp_db;
            let ph = (normal(rng) * cfg.sigma_phase_deg).to_radians();
            *f = Complex64::from_polar(10f64.powf(a_db / 20.0), ph);
        }
        Self { factors }
    }
}

/// Standard normal via Box-Muller; keeps the draw sequence independent of
/// distribution-crate internals.
fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn complex_noise(sigma: f64, rng: &mut impl Rng) -> Complex64 {
    let s = sigma / std::f64::consts::SQRT_2;
    Complex64::new(normal(rng) * s, normal(rng) * s)
}

/// Apply fixed channel errors, then additive noise at the configured SNR.
pub fn apply_with_errors(
    channels: &Channels,
    errors: &ChannelErrors,
    snr_db: Option<f64>,
    rng: &mut impl Rng,
) -> Channels {
    let mut v = channels.as_array();
    for (c, f) in v.iter_mut().zip(&errors.factors) {
        *c *= f;
    }
    if let Some(snr) = snr_db {
        let sigma = v[0].norm() * 10f64.powf(-snr / 20.0);
        for c in v.iter_mut() {
            *c += complex_noise(sigma, rng);
        }
    }
    Channels::from_array(v)
}

/// Full impairment application: multipath copy, freshly drawn channel
/// errors, then noise. Deterministic given the rng state.
pub fn apply_impairments(
    channels: &Channels,
    cfg: &ImpairmentConfig,
    lambda_m: f64,
    rng: &mut impl Rng,
) -> Channels {
    let mut ch = *channels;
    if let Some(mp) = &cfg.multipath {
        let scale = Complex64::new(1.0, 0.0) + mp.factor(lambda_m);
        let mut v = ch.as_array();
        for c in v.iter_mut() {
            *c *= scale;
        }
        ch = Channels::from_array(v);
    }
    let errors = ChannelErrors::draw(cfg, rng);
    apply_with_errors(&ch, &errors, cfg.snr_db, rng)
}

/// Result of one ratio estimate, with the quadrature residuals kept for
/// diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct EstimateDetail {
    pub theta_az: f64,
    pub theta_el: f64,
    pub gamma_az: f64,
    pub gamma_el: f64,
    /// Imaginary parts of the derotated ratios; zero for an ideal chain.
    pub quad_az: f64,
    pub quad_el: f64,
    /// Diagonal-difference ratio, computed and logged but unused.
    pub gamma_del: f64,
}

fn ratios_to_angles(
    ch: &Channels,
    geom: &ArrayGeometry,
) -> Result<EstimateDetail, DoaError> {
    let lambda = geom.wavelength();
    // Difference channels lag the sum by 90 degrees in this phase
    // convention; derotate so the signal lands on the real axis.
    let derot = Complex64::new(0.0, -1.0);
    let r_az = (ch.d_az * derot) / ch.sum;
    let r_el = (ch.d_el * derot) / ch.sum;
    let r_del = (ch.d_del * derot) / ch.sum;
    let gamma_az = monopulse_ratio(ch.d_az * derot, ch.sum)?;
    let gamma_el = monopulse_ratio(ch.d_el * derot, ch.sum)?;
    Ok(EstimateDetail {
        theta_az: angle_from_ratio(gamma_az, geom.d_az, lambda)?,
        theta_el: angle_from_ratio(gamma_el, geom.d_el, lambda)?,
        gamma_az,
        gamma_el,
        quad_az: r_az.im,
        quad_el: r_el.im,
        gamma_del: r_del.re,
    })
}

/// Channels for a target at the given true angles: through the configured
/// comparator when present, otherwise the exact sign matrix.
pub fn form_channels(
    geom: &ArrayGeometry,
    theta_az: f64,
    theta_el: f64,
    cfg: &ImpairmentConfig,
) -> Result<Channels, DoaError> {
    match &cfg.comparator {
        Some(s) => Ok(network_channels(s, geom, theta_az, theta_el, geom.f_op)?),
        None => {
            let x = steering_vector(geom, theta_az, theta_el);
            Ok(ideal_channels(&x))
        }
    }
}

/// Full estimation pipeline with freshly drawn impairments.
pub fn estimate(
    geom: &ArrayGeometry,
    theta_az: f64,
    theta_el: f64,
    cfg: &ImpairmentConfig,
    rng: &mut impl Rng,
) -> Result<EstimateDetail, DoaError> {
    let ch = form_channels(geom, theta_az, theta_el, cfg)?;
    let ch = apply_impairments(&ch, cfg, geom.wavelength(), rng);
    ratios_to_angles(&ch, geom)
}

/// Estimation with a fixed miscalibration realization (the dataset path:
/// systematic errors shared across samples, noise fresh per sample).
pub fn estimate_with_errors(
    geom: &ArrayGeometry,
    theta_az: f64,
    theta_el: f64,
    cfg: &ImpairmentConfig,
    errors: &ChannelErrors,
    rng: &mut impl Rng,
) -> Result<EstimateDetail, DoaError> {
    let mut ch = form_channels(geom, theta_az, theta_el, cfg)?;
    if let Some(mp) = &cfg.multipath {
        let scale = Complex64::new(1.0, 0.0) + mp.factor(geom.wavelength());
        let mut v = ch.as_array();
        for c in v.iter_mut() {
            *c *= scale;
        }
        ch = Channels::from_array(v);
    }
    let ch = apply_with_errors(&ch, errors, cfg.snr_db, rng);
    ratios_to_angles(&ch, geom)
}

/// One labeled observation: true target position and the impaired estimate.
#[derive(Debug, Clone)]
pub struct DoaSample {
    pub index: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub distance_m: f64,
    pub theta_az_true: f64,
    pub theta_el_true: f64,
    /// Estimated (azimuth, elevation), radians; `None` when the estimator
    /// errored for this position.
    pub estimate: Option<(f64, f64)>,
    pub flag: String,
}

/// Target-walk scenario on a 2D plane facing the array.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub distance_m: f64,
    pub pitch_m: f64,
    pub count: usize,
    pub impairments: ImpairmentConfig,
    pub geometry: ArrayGeometry,
}

impl Scenario {
    /// The standard synthetic testbed: 145 positions on a 30 mm serpentine
    /// grid, moderate fixed miscalibration, 50 dB SNR.
    pub fn standard(distance_m: f64, seed: u64) -> Self {
        Self {
            distance_m,
            pitch_m: 0.030,
            count: 145,
            impairments: ImpairmentConfig::moderate(seed),
            geometry: ArrayGeometry::default_at(1.95e9),
        }
    }

    /// Zero-impairment variant.
    pub fn ideal(distance_m: f64, seed: u64) -> Self {
        let mut s = Self::standard(distance_m, seed);
        s.impairments = ImpairmentConfig::none(seed);
        s
    }

    /// Apply one `key=value` override. Unknown keys are errors.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), String> {
        let num = || value.parse::<f64>().map_err(|_| format!("non-numeric value for `{key}`"));
        match key {
            "distance_m" => self.distance_m = num()?,
            "pitch_m" => self.pitch_m = num()?,
            "count" => {
                self.count =
                    value.parse::<usize>().map_err(|_| "count must be an integer".to_string())?
            }
            "seed" => {
                self.impairments.seed =
                    value.parse::<u64>().map_err(|_| "seed must be an integer".to_string())?
            }
            "sigma_amp_db" => self.impairments.sigma_amp_db = num()?,
            "sigma_phase_deg" => self.impairments.sigma_phase_deg = num()?,
            "snr_db" => {
                self.impairments.snr_db = if value == "off" { None } else { Some(num()?) }
            }
            "multipath_rel_amp" => {
                let mp = self.impairments.multipath.get_or_insert(Multipath {
                    rel_amp: 0.0,
                    excess_path_m: 0.0,
                    reflection_phase_deg: 0.0,
                });
                mp.rel_amp = num()?;
            }
            "multipath_excess_m" => {
                let mp = self.impairments.multipath.get_or_insert(Multipath {
                    rel_amp: 0.0,
                    excess_path_m: 0.0,
                    reflection_phase_deg: 0.0,
                });
                mp.excess_path_m = num()?;
            }
            "multipath_phase_deg" => {
                let mp = self.impairments.multipath.get_or_insert(Multipath {
                    rel_amp: 0.0,
                    excess_path_m: 0.0,
                    reflection_phase_deg: 0.0,
                });
                mp.reflection_phase_deg = num()?;
            }
            "f_op_hz" => {
                let f = num()?;
                let scale_az = self.geometry.d_az / self.geometry.wavelength();
                let scale_el = self.geometry.d_el / self.geometry.wavelength();
                self.geometry.f_op = f;
                self.geometry.d_az = scale_az * self.geometry.wavelength();
                self.geometry.d_el = scale_el * self.geometry.wavelength();
            }
            "d_az_m" => self.geometry.d_az = num()?,
            "d_el_m" => self.geometry.d_el = num()?,
            "element_q" => {
                self.geometry.element = crate::array::ElementModel::CosinePower(num()?)
            }
            other => return Err(format!("unknown scenario key `{other}`")),
        }
        Ok(())
    }

    /// Parse a line-based `key=value` config file into overrides on self.
    pub fn apply_config(&mut self, text: &str) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    if let Err(e) = self.apply_kv(k.trim(), v.trim()) {
                        errors.push(format!("line {}: {}", idx + 1, e));
                    }
                }
                None => errors.push(format!("line {}: expected key=value", idx + 1)),
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Target positions: a serpentine square grid centered on boresight,
    /// followed by a revisit of the origin as the final sample.
    pub fn positions(&self) -> Vec<(f64, f64)> {
        let cells = self.count.saturating_sub(1).max(1);
        let side = (cells as f64).sqrt().ceil() as usize;
        let offset = (side as f64 - 1.0) / 2.0;
        let mut out = Vec::with_capacity(self.count);
        'fill: for row in 0..side {
            for k in 0..side {
                let col = if row % 2 == 0 { k } else { side - 1 - k };
                out.push((
                    (col as f64 - offset) * self.pitch_m,
                    (row as f64 - offset) * self.pitch_m,
                ));
                if out.len() == cells {
                    break 'fill;
                }
            }
        }
        out.push((0.0, 0.0));
        out
    }
}

/// splitmix64 step, used to derive independent per-sample seeds.
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generate the scenario's dataset. Failed samples are flagged, not
/// dropped. Reproducible: the systematic miscalibration is drawn once from
/// the scenario seed, per-sample noise from `mix(seed, index)`.
pub fn gen_dataset(s: &Scenario) -> Vec<DoaSample> {
    let mut sys_rng = ChaCha8Rng::seed_from_u64(s.impairments.seed);
    let errors = ChannelErrors::draw(&s.impairments, &mut sys_rng);
    let mut out = Vec::with_capacity(s.count);
    for (i, (x, y)) in s.positions().into_iter().enumerate() {
        let theta_az = (x / s.distance_m).atan();
        let theta_el = (y / s.distance_m).atan();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(s.impairments.seed, i as u64));
        let (estimate, flag) = match estimate_with_errors(
            &s.geometry,
            theta_az,
            theta_el,
            &s.impairments,
            &errors,
            &mut rng,
        ) {
            Ok(d) => (Some((d.theta_az, d.theta_el)), "ok".to_string()),
            Err(e) => (
                None,
                match e {
                    DoaError::SumNull => "sum_null".to_string(),
                    DoaError::OutOfUnambiguousRange(_) => "out_of_range".to_string(),
                    DoaError::Pattern(_) => "pattern_error".to_string(),
                },
            ),
        };
        out.push(DoaSample {
            index: i,
            x_m: x,
            y_m: y,
            distance_m: s.distance_m,
            theta_az_true: theta_az,
            theta_el_true: theta_el,
            estimate,
            flag,
        });
    }
    out
}

/// Dataset CSV, angles in degrees.
pub fn dataset_csv(samples: &[DoaSample]) -> String {
    let mut out = String::from(
        "index,x_m,y_m,D_m,theta_az_true_deg,theta_el_true_deg,\
         theta_az_est_deg,theta_el_est_deg,flags\n",
    );
    for s in samples {
        let (az, el) = match s.estimate {
            Some((a, e)) => (
                format!("{:.16e}", a.to_degrees()),
                format!("{:.16e}", e.to_degrees()),
            ),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e},{:.16e},{:.16e},{},{},{}\n",
            s.index,
            s.x_m,
            s.y_m,
            s.distance_m,
            s.theta_az_true.to_degrees(),
            s.theta_el_true.to_degrees(),
            az,
            el,
            s.flag,
        ));
    }
    out
}

/// Parse a dataset CSV produced by [`dataset_csv`].
pub fn parse_dataset_csv(text: &str) -> Result<Vec<DoaSample>, String> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(format!("line {}: expected 9 columns", idx + 1));
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| format!("line {}: bad {what}", idx + 1))
        };
        let estimate = if f[6].is_empty() || f[7].is_empty() {
            None
        } else {
            Some((
                num(f[6], "theta_az_est")?.to_radians(),
                num(f[7], "theta_el_est")?.to_radians(),
            ))
        };
        out.push(DoaSample {
            index: f[0].parse().map_err(|_| format!("line {}: bad index", idx + 1))?,
            x_m: num(f[1], "x_m")?,
            y_m: num(f[2], "y_m")?,
            distance_m: num(f[3], "D_m")?,
            theta_az_true: num(f[4], "theta_az_true")?.to_radians(),
            theta_el_true: num(f[5], "theta_el_true")?.to_radians(),
            estimate,
            flag: f[8].to_string(),
        });
    }
    Ok(out)
}
