//! Road elevation inputs.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::vehicle::FullVehicleParams;
use crate::{Error, Result};

/// Shape of a road signal in the time domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoadShape {
    Flat,
    Step {
        height: f64,
        start: f64,
    },
    HalfSineBump {
        height: f64,
        start: f64,
        duration: f64,
    },
    /// `(time s, elevation m)` pairs, linearly interpolated and held
    /// constant beyond the ends.
    Table {
        points: Vec<(f64, f64)>,
    },
    /// Two-column CSV `time_s,elevation_m`, with or without a header row.
    TableCsv {
        path: PathBuf,
    },
    /// ISO 8608 class `A`..`H` driven at `speed` m/s.
    Random {
        seed: u64,
        class: char,
        speed: f64,
    },
}

/// A road shape plus a delay in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec {
    #[serde(flatten)]
    pub shape: RoadShape,
    #[serde(default)]
    pub delay: f64,
}

impl RoadSpec {
    pub fn new(shape: RoadShape) -> Self {
        Self { shape, delay: 0.0 }
    }

    pub fn flat() -> Self {
        Self::new(RoadShape::Flat)
    }

    pub fn step(height: f64, start: f64) -> Self {
        Self::new(RoadShape::Step { height, start })
    }

    pub fn bump(height: f64, start: f64, duration: f64) -> Self {
        Self::new(RoadShape::HalfSineBump { height, start, duration })
    }

    /// 5 cm half-sine bump from 0.5 s to 1.0 s.
    pub fn default_bump() -> Self {
        Self::bump(0.05, 0.5, 0.5)
    }
}

/// Sinusoid bank of a random road.
#[derive(Debug, Clone, PartialEq)]
struct Harmonics {
    amplitude: Vec<f64>,
    omega: Vec<f64>,
    phase: Vec<f64>,
}

const RANDOM_COMPONENTS: usize = 64;
const RANDOM_BAND: (f64, f64) = (0.011, 2.83);
const RANDOM_FADE_IN: f64 = 1.0;

impl Harmonics {
    fn new(seed: u64, class: char, speed: f64) -> Result<Self> {
        let k = match class.to_ascii_uppercase() {
            c @ 'A'..='H' => (c as u8 - b'A') as i32,
            _ => return Err(Error::arg(format!("road class must be A..H, got {class:?}"))),
        };
        if !(speed.is_finite() && speed > 0.0) {
            return Err(Error::arg(format!("random road speed must be positive, got {speed}")));
        }
        // displacement PSD G(n) = G(n0) (n / n0)^-2, n0 = 0.1 cycles/m
        let g0 = 16e-6 * 4f64.powi(k);
        let n0 = 0.1;
        let (lo, hi) = RANDOM_BAND;
        let ratio = (hi / lo).powf(1.0 / RANDOM_COMPONENTS as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = Harmonics { amplitude: vec![], omega: vec![], phase: vec![] };
        for i in 0..RANDOM_COMPONENTS {
            let (a, b) = (lo * ratio.powi(i as i32), lo * ratio.powi(i as i32 + 1));
            let n = (a * b).sqrt();
            let psd = g0 * (n / n0).powi(-2);
            h.amplitude.push((2.0 * psd * (b - a)).sqrt());
            h.omega.push(2.0 * PI * n * speed);
            h.phase.push(rng.random_range(0.0..2.0 * PI));
        }
        Ok(h)
    }

    fn eval(&self, t: f64) -> f64 {
        let fade = if t < RANDOM_FADE_IN { 0.5 * (1.0 - (PI * t / RANDOM_FADE_IN).cos()) } else { 1.0 };
        let sum: f64 = (0..self.amplitude.len())
            .map(|i| self.amplitude[i] * (self.omega[i] * t + self.phase[i]).sin())
            .sum();
        fade * sum
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Signal {
    Flat,
    Step { height: f64, start: f64 },
    Bump { height: f64, start: f64, duration: f64 },
    Table(Arc<Vec<(f64, f64)>>),
    Random(Arc<Harmonics>),
}

/// A sampled-on-demand road elevation signal.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadProfile {
    signal: Signal,
    delay: f64,
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::arg(format!("road {name} must be finite, got {v}")))
    }
}

fn check_table(points: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
    if points.is_empty() {
        return Err(Error::arg("road table is empty"));
    }
    if points.iter().any(|(t, z)| !t.is_finite() || !z.is_finite()) {
        return Err(Error::arg("road table contains non-finite values"));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::arg("road table times must be strictly increasing"));
    }
    Ok(points)
}

fn read_table_csv(path: &PathBuf) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::arg(format!("cannot read road table {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::arg(format!("{}: {e}", path.display())))?;
        let parse = |i: usize| record.get(i).and_then(|f| f.parse::<f64>().ok());
        match (parse(0), parse(1), record.len()) {
            (Some(t), Some(z), 2) => points.push((t, z)),
            _ if line == 0 => continue, // header
            _ => {
                return Err(Error::arg(format!(
                    "{}:{}: expected two numeric columns time_s,elevation_m",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    check_table(points)
}

impl RoadProfile {
    pub fn from_spec(spec: &RoadSpec) -> Result<Self> {
        let signal = match &spec.shape {
            RoadShape::Flat => Signal::Flat,
            RoadShape::Step { height, start } => {
                Signal::Step { height: finite("height", *height)?, start: finite("start", *start)? }
            }
            RoadShape::HalfSineBump { height, start, duration } => {
                if !(duration.is_finite() && *duration > 0.0) {
                    return Err(Error::arg(format!("bump duration must be positive, got {duration}")));
                }
                Signal::Bump {
                    height: finite("height", *height)?,
                    start: finite("start", *start)?,
                    duration: *duration,
                }
            }
            RoadShape::Table { points } => Signal::Table(Arc::new(check_table(points.clone())?)),
            RoadShape::TableCsv { path } => Signal::Table(Arc::new(read_table_csv(path)?)),
            RoadShape::Random { seed, class, speed } => Signal::Random(Arc::new(Harmonics::new(*seed, *class, *speed)?)),
        };
        if !(spec.delay.is_finite() && spec.delay >= 0.0) {
            return Err(Error::arg(format!("road delay must be non-negative, got {}", spec.delay)));
        }
        Ok(Self { signal, delay: spec.delay })
    }

    pub fn flat() -> Self {
        Self { signal: Signal::Flat, delay: 0.0 }
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// The same profile arriving `extra` seconds later.
    pub fn delayed(&self, extra: f64) -> Result<Self> {
        if !(extra.is_finite() && extra >= 0.0) {
            return Err(Error::arg(format!("road delay must be non-negative, got {extra}")));
        }
        Ok(Self { signal: self.signal.clone(), delay: self.delay + extra })
    }

    /// Elevation (m) at time `t`; zero before the delay has elapsed.
    pub fn sample(&self, t: f64) -> f64 {
        let tau = t - self.delay;
        if tau < 0.0 {
            return 0.0;
        }
        match &self.signal {
            Signal::Flat => 0.0,
            Signal::Step { height, start } => {
                if tau >= *start {
                    *height
                } else {
                    0.0
                }
            }
            Signal::Bump { height, start, duration } => {
                if tau >= *start && tau <= start + duration {
                    height * (PI * (tau - start) / duration).sin()
                } else {
                    0.0
                }
            }
            Signal::Table(points) => interpolate(points, tau),
            Signal::Random(h) => h.eval(tau),
        }
    }
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let i = points.partition_point(|(ti, _)| *ti <= t);
    if i == 0 {
        return points[0].1;
    }
    if i == points.len() {
        return points[i - 1].1;
    }
    let ((t0, z0), (t1, z1)) = (points[i - 1], points[i]);
    z0 + (z1 - z0) * (t - t0) / (t1 - t0)
}

/// One profile per corner (left, right alternating per axle), each axle
/// delayed by its distance behind the front axle at `speed`.
pub fn per_axle_profiles(
    left: &RoadProfile,
    right: &RoadProfile,
    geometry: &FullVehicleParams,
    speed: f64,
) -> Result<Vec<RoadProfile>> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::arg(format!("vehicle speed must be positive, got {speed}")));
    }
    let front = geometry.axle_positions.first().copied().unwrap_or(0.0);
    let mut out = Vec::with_capacity(2 * geometry.axle_count());
    for x in &geometry.axle_positions {
        let delay = (x - front) / speed;
        out.push(left.delayed(delay)?);
        out.push(right.delayed(delay)?);
    }
    Ok(out)
}

/// Axle delays (s) at `speed`.
pub fn axle_delays(geometry: &FullVehicleParams, speed: f64) -> Vec<f64> {
    let front = geometry.axle_positions.first().copied().unwrap_or(0.0);
    geometry.axle_positions.iter().map(|x| (x - front) / speed).collect()
}
