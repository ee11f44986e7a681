//! Noise injection and end-to-end measurement synthesis.

use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forward::simulate_scattered_field;
use crate::geometry::{BackgroundMedium, Grid, SensorLayout};
use crate::scene::{rasterize_scene, SceneDescriptor};

/// Deterministic generator used for every seeded draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Adds circular complex white Gaussian noise so that
/// `10 log10(P_signal / P_noise) = snr_db` in expectation, with the signal
/// power taken over the whole vector. Each of the real and imaginary parts
/// has variance `sigma^2 / 2`. `snr_db = +inf` returns the signal unchanged.
pub fn add_awgn(signal: &DVector<Complex64>, snr_db: f64, seed: u64) -> Result<DVector<Complex64>> {
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!("SNR must be finite or +inf, got {snr_db}")));
    }
    let power = mean_power(signal);
    if !(power > 0.0) {
        return Err(Error::invalid("cannot set an SNR relative to a zero-power signal"));
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    let mut rng = seeded_rng(seed);
    Ok(signal.map(|s| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        s + Complex64::new(sigma * re, sigma * im)
    }))
}

pub fn mean_power(v: &DVector<Complex64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64
}

/// Noisy stacked scattered-field samples with their provenance.
///
/// Samples are ordered transmitter-major: entry `i * N^R + m` is receiver
/// `m` under transmitter `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub values: DVector<Complex64>,
    /// `None` for noiseless data.
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub frequency: f64,
    pub n_transmitters: usize,
    pub n_receivers: usize,
    /// SHA-256 of the scene, grid, sensors and frequency.
    pub provenance: String,
}

#[derive(Serialize, Deserialize)]
struct MeasurementFile {
    format: String,
    snr_db: Option<f64>,
    seed: u64,
    frequency_hz: f64,
    n_transmitters: usize,
    n_receivers: usize,
    provenance: String,
    re: Vec<f64>,
    im: Vec<f64>,
}

const MEAS_FORMAT: &str = "emsparse-measurements-v1";

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = MeasurementFile {
            format: MEAS_FORMAT.into(),
            snr_db: self.snr_db,
            seed: self.seed,
            frequency_hz: self.frequency,
            n_transmitters: self.n_transmitters,
            n_receivers: self.n_receivers,
            provenance: self.provenance.clone(),
            re: self.values.iter().map(|z| z.re).collect(),
            im: self.values.iter().map(|z| z.im).collect(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::format("measurement file", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: MeasurementFile =
            serde_json::from_str(text).map_err(|e| Error::format("measurement file", e))?;
        if f.format != MEAS_FORMAT {
            return Err(Error::format("measurement file", format!("unknown format {}", f.format)));
        }
        if f.re.len() != f.im.len() || f.re.len() != f.n_transmitters * f.n_receivers {
            return Err(Error::format("measurement file", "sample count does not match sensors"));
        }
        Ok(MeasurementSet {
            values: DVector::from_iterator(
                f.re.len(),
                f.re.iter().zip(&f.im).map(|(a, b)| Complex64::new(*a, *b)),
            ),
            snr_db: f.snr_db,
            seed: f.seed,
            frequency: f.frequency_hz,
            n_transmitters: f.n_transmitters,
            n_receivers: f.n_receivers,
            provenance: f.provenance,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_file(path, self.to_json()?.as_bytes())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable hash identifying the physical setup that produced a measurement.
pub fn provenance_hash(
    desc: &SceneDescriptor,
    grid: &Grid,
    sensors: &SensorLayout,
    medium: &BackgroundMedium,
) -> String {
    let payload = serde_json::json!({
        "scene": desc,
        "grid": [grid.side_length(), grid.n_side()],
        "sensors": sensors,
        "frequency": medium.frequency,
    });
    hex(&Sha256::digest(payload.to_string().as_bytes()))
}

/// Rasterise, solve the full scattering problem per transmitter, stack and
/// add noise. `snr_db = None` yields noiseless data.
pub fn synthesize_measurements(
    desc: &SceneDescriptor,
    grid: &Grid,
    sensors: &SensorLayout,
    medium: &BackgroundMedium,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<MeasurementSet> {
    let contrast = rasterize_scene(desc, grid)?;
    let clean = simulate_scattered_field(&contrast, grid, sensors, medium)?;
    let values = match snr_db {
        Some(snr) => add_awgn(&clean, snr, seed)?,
        None => clean,
    };
    Ok(MeasurementSet {
        values,
        snr_db,
        seed,
        frequency: medium.frequency,
        n_transmitters: sensors.n_transmitters(),
        n_receivers: sensors.n_receivers(),
        provenance: provenance_hash(desc, grid, sensors, medium),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_signal(n: usize) -> DVector<Complex64> {
        DVector::from_fn(n, |i, _| Complex64::from_polar(1.0, 0.37 * i as f64))
    }

    #[test]
    fn infinite_snr_is_identity() {
        let s = unit_signal(16);
        assert_eq!(add_awgn(&s, f64::INFINITY, 3).unwrap(), s);
    }

    #[test]
    fn empirical_snr_close_to_request() {
        let s = unit_signal(4096);
        let noisy = add_awgn(&s, 25.0, 17).unwrap();
        let noise = &noisy - &s;
        let snr = 10.0 * (mean_power(&s) / mean_power(&noise)).log10();
        assert!((24.5..=25.5).contains(&snr), "snr {snr}");
    }

    #[test]
    fn deterministic_per_seed() {
        let s = unit_signal(64);
        let a = add_awgn(&s, 10.0, 5).unwrap();
        let b = add_awgn(&s, 10.0, 5).unwrap();
        let c = add_awgn(&s, 10.0, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_signal_rejected() {
        let z = DVector::zeros(8);
        assert!(matches!(add_awgn(&z, 20.0, 1), Err(Error::InvalidArgument(_))));
        assert!(add_awgn(&unit_signal(4), f64::NAN, 1).is_err());
    }

    #[test]
    fn independent_draws_are_uncorrelated() {
        let s = unit_signal(1024);
        let n1 = add_awgn(&s, 20.0, 100).unwrap() - &s;
        let n2 = add_awgn(&s, 20.0, 101).unwrap() - &s;
        let dot: Complex64 = n1.iter().zip(n2.iter()).map(|(a, b)| a * b.conj()).sum();
        let corr = dot.norm() / (n1.norm() * n2.norm());
        assert!(corr < 0.05, "correlation {corr}");
    }
}
