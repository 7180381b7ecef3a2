//! Trajectory data model, ingestion, filtering, normalization, quantization,
//! and the synthetic emergency-lane-change corpus generator.
//!
//! A trajectory is a uniformly sampled sequence of
//! (lateral displacement, longitudinal velocity change) pairs, both measured
//! as deltas from the first sample so that the token vocabulary downstream is
//! translation-invariant.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One lane-change trajectory: uniformly sampled lateral displacement `x`
/// (meters) and longitudinal velocity change `v` (m/s) from the start pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample interval in seconds. Identical for all samples.
    pub dt: f64,
    /// Ordered (x, v) samples.
    pub samples: Vec<(f64, f64)>,
    /// Opaque identifier carried from the source file or generator.
    pub source_id: String,
}

impl Trajectory {
    pub fn new(dt: f64, samples: Vec<(f64, f64)>, source_id: impl Into<String>) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidArg(format!("dt must be positive, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidArg(format!(
                "trajectory needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(Error::NonFinite("trajectory sample".into()));
        }
        Ok(Self { dt, samples, source_id: source_id.into() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds: `(len - 1) * dt`.
    pub fn duration(&self) -> f64 {
        (self.samples.len() as f64 - 1.0) * self.dt
    }
}

/// Uniform 2D grid that discretizes (x, v) samples into tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub x_bins: usize,
    pub v_bins: usize,
}

impl Default for QuantizerGrid {
    /// Covers one lane width plus overshoot laterally and emergency braking
    /// longitudinally; 16x16 bins keep Monte-Carlo rollouts cheap.
    fn default() -> Self {
        Self { x_min: -4.5, x_max: 4.5, v_min: -10.0, v_max: 10.0, x_bins: 16, v_bins: 16 }
    }
}

impl QuantizerGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max) || !(self.v_min < self.v_max) {
            return Err(Error::InvalidArg("quantizer grid: min must be below max".into()));
        }
        if self.x_bins == 0 || self.v_bins == 0 {
            return Err(Error::InvalidArg("quantizer grid: bins must be positive".into()));
        }
        Ok(())
    }

    /// Vocabulary size: `x_bins * v_bins`.
    pub fn vocab(&self) -> usize {
        self.x_bins * self.v_bins
    }

    fn bin_of(value: f64, lo: f64, hi: f64, bins: usize) -> (usize, bool) {
        let w = (hi - lo) / bins as f64;
        let raw = ((value - lo) / w).floor() as i64;
        let clamped = raw.clamp(0, bins as i64 - 1) as usize;
        (clamped, raw < 0 || raw >= bins as i64)
    }

    fn center_of(bin: usize, lo: f64, hi: f64, bins: usize) -> f64 {
        let w = (hi - lo) / bins as f64;
        lo + (bin as f64 + 0.5) * w
    }
}

/// A quantized trajectory: one token per sample, token in `[0, vocab)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<usize>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Counts of out-of-range samples clamped to edge bins during quantization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampStats {
    pub x_clamped: usize,
    pub v_clamped: usize,
}

/// Load trajectories from a CSV file with header `id,t,x,v`.
///
/// Rows for one id must be contiguous and time-sorted. `dt` is taken from the
/// caller; the recorded timestamps are validated against it only for
/// monotonicity (public datasets disagree on the exact frame interval, so the
/// loader does not hard-code one).
pub fn load_trajectories(path: &Path, dt: f64) -> Result<Vec<Trajectory>> {
    if dt <= 0.0 {
        return Err(Error::InvalidArg(format!("dt must be positive, got {dt}")));
    }
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);

    let headers = reader.headers().map_err(csv_err)?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("missing column `{name}` in header {:?}", headers),
        })
    };
    let (ci, ct, cx, cv) = (col("id")?, col("t")?, col("x")?, col("v")?);

    let mut out: Vec<Trajectory> = Vec::new();
    let mut cur_id: Option<String> = None;
    let mut cur_samples: Vec<(f64, f64)> = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    let mut seen_ids: Vec<String> = Vec::new();

    let mut flush = |id: Option<String>, samples: &mut Vec<(f64, f64)>| -> Result<()> {
        if let Some(id) = id {
            let taken = std::mem::take(samples);
            out.push(Trajectory::new(dt, taken, id)?);
        }
        Ok(())
    };

    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize| -> Result<&str> {
            record.get(idx).ok_or(Error::Parse { line, msg: "short row".into() })
        };
        let num = |idx: usize, name: &str| -> Result<f64> {
            let raw = field(idx)?;
            raw.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("non-numeric `{name}` field: {raw:?}"),
            })
        };

        let id = field(ci)?.to_string();
        let t = num(ct, "t")?;
        let x = num(cx, "x")?;
        let v = num(cv, "v")?;

        if cur_id.as_deref() != Some(id.as_str()) {
            flush(cur_id.take(), &mut cur_samples)?;
            if seen_ids.contains(&id) {
                return Err(Error::Parse {
                    line,
                    msg: format!("rows for id `{id}` are not contiguous"),
                });
            }
            seen_ids.push(id.clone());
            cur_id = Some(id);
            last_t = f64::NEG_INFINITY;
        }
        if t <= last_t {
            return Err(Error::Parse {
                line,
                msg: format!(
                    "non-monotone timestamp {t} after {last_t} in trajectory `{}`",
                    cur_id.as_deref().unwrap_or("?")
                ),
            });
        }
        last_t = t;
        cur_samples.push((x, v));
    }
    flush(cur_id.take(), &mut cur_samples)?;
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    Error::Parse { line, msg: e.to_string() }
}

/// Write trajectories in the same `id,t,x,v` schema the loader reads.
pub fn write_trajectories<W: Write>(mut w: W, trajs: &[Trajectory]) -> Result<()> {
    writeln!(w, "id,t,x,v")?;
    for traj in trajs {
        for (k, (x, v)) in traj.samples.iter().enumerate() {
            writeln!(w, "{},{},{},{}", traj.source_id, k as f64 * traj.dt, x, v)?;
        }
    }
    Ok(())
}

/// Keep only trajectories strictly shorter than `max_duration` seconds.
pub fn filter_emergency(trajs: Vec<Trajectory>, max_duration: f64) -> Result<Vec<Trajectory>> {
    if max_duration <= 0.0 {
        return Err(Error::InvalidArg(format!(
            "max_duration must be positive, got {max_duration}"
        )));
    }
    Ok(trajs.into_iter().filter(|t| t.duration() < max_duration).collect())
}

/// Subtract the first sample channel-wise so `samples[0] == (0, 0)` exactly.
pub fn normalize(traj: &Trajectory) -> Result<Trajectory> {
    if traj.len() < 2 {
        return Err(Error::InvalidArg("normalize needs at least 2 samples".into()));
    }
    let (x0, v0) = traj.samples[0];
    let samples = traj.samples.iter().map(|&(x, v)| (x - x0, v - v0)).collect();
    Trajectory::new(traj.dt, samples, traj.source_id.clone())
}

/// Parameters for one synthetic emergency lane change.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    /// Target lateral offset in meters (signed).
    pub lane_offset: f64,
    /// Maneuver duration in seconds, `0.8 <= T < 2.0`.
    pub duration: f64,
    /// Peak deceleration magnitude in m/s^2.
    pub decel: f64,
    /// Standard deviation of additive zero-mean noise on both channels.
    pub noise_scale: f64,
    /// Sample interval in seconds.
    pub dt: f64,
}

/// Quintic minimum-jerk lateral profile: `x(tau) = D (10 tau^3 - 15 tau^4 + 6 tau^5)`.
fn quintic(tau: f64) -> f64 {
    let t3 = tau * tau * tau;
    t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)
}

/// Generate one synthetic emergency lane change.
///
/// The lateral channel follows the quintic profile toward `lane_offset`; the
/// velocity channel dips by up to `decel * T / 4` mid-maneuver and partially
/// recovers, mimicking brake-then-accelerate behavior. Both channels carry
/// zero-mean Gaussian noise except at the anchored first sample; output is
/// normalized.
pub fn synth_lane_change<R: Rng>(params: &SynthParams, rng: &mut R) -> Result<Trajectory> {
    if !(0.8..2.0).contains(&params.duration) {
        return Err(Error::InvalidArg(format!(
            "duration must be in [0.8, 2.0), got {}",
            params.duration
        )));
    }
    if params.lane_offset.abs() > 4.0 {
        return Err(Error::InvalidArg(format!(
            "lane_offset must satisfy |D| <= 4.0, got {}",
            params.lane_offset
        )));
    }
    if params.noise_scale < 0.0 {
        return Err(Error::InvalidArg("noise_scale must be nonnegative".into()));
    }
    if params.dt <= 0.0 {
        return Err(Error::InvalidArg("dt must be positive".into()));
    }
    let n = (params.duration / params.dt).round() as usize + 1;
    if n < 2 {
        return Err(Error::InvalidArg("duration/dt yields fewer than 2 samples".into()));
    }
    let noise = Normal::new(0.0, params.noise_scale.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidArg(e.to_string()))?;
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let tau = k as f64 / (n - 1) as f64;
        let x = params.lane_offset * quintic(tau);
        // Velocity change: smooth dip reaching -decel*T/4 at mid-maneuver,
        // recovering to half the dip by the end.
        let dip = -params.decel * params.duration / 4.0;
        let v = if tau < 0.5 {
            dip * quintic(tau * 2.0)
        } else {
            dip * (1.0 - 0.5 * quintic((tau - 0.5) * 2.0))
        };
        let (nx, nv) = if params.noise_scale > 0.0 && k > 0 {
            (noise.sample(rng), noise.sample(rng))
        } else {
            (0.0, 0.0)
        };
        samples.push((x + nx, v + nv));
    }
    normalize(&Trajectory::new(params.dt, samples, "synth")?)
}

/// Quantize a trajectory onto the grid. Out-of-range values clamp to edge
/// bins; the clamp counts are returned for logging.
pub fn quantize(traj: &Trajectory, grid: &QuantizerGrid) -> Result<(TokenSequence, ClampStats)> {
    grid.validate()?;
    let mut stats = ClampStats::default();
    let tokens = traj
        .samples
        .iter()
        .map(|&(x, v)| {
            let (xb, xc) = QuantizerGrid::bin_of(x, grid.x_min, grid.x_max, grid.x_bins);
            let (vb, vc) = QuantizerGrid::bin_of(v, grid.v_min, grid.v_max, grid.v_bins);
            stats.x_clamped += usize::from(xc);
            stats.v_clamped += usize::from(vc);
            xb * grid.v_bins + vb
        })
        .collect();
    Ok((TokenSequence { tokens }, stats))
}

/// Map tokens back to bin centers.
pub fn dequantize(tokens: &TokenSequence, grid: &QuantizerGrid, dt: f64) -> Result<Trajectory> {
    grid.validate()?;
    let samples = tokens
        .tokens
        .iter()
        .map(|&tok| {
            if tok >= grid.vocab() {
                return Err(Error::InvalidArg(format!(
                    "token {tok} out of vocabulary {}",
                    grid.vocab()
                )));
            }
            let xb = tok / grid.v_bins;
            let vb = tok % grid.v_bins;
            Ok((
                QuantizerGrid::center_of(xb, grid.x_min, grid.x_max, grid.x_bins),
                QuantizerGrid::center_of(vb, grid.v_min, grid.v_max, grid.v_bins),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(dt, samples, "dequantized")
}

/// Resample a trajectory to exactly `len` samples by linear interpolation,
/// preserving total duration. Sequence models downstream require a common
/// length.
pub fn resample(traj: &Trajectory, len: usize) -> Result<Trajectory> {
    if len < 2 {
        return Err(Error::InvalidArg("resample length must be >= 2".into()));
    }
    let n = traj.len();
    let new_dt = traj.duration() / (len as f64 - 1.0);
    let samples = (0..len)
        .map(|k| {
            let pos = k as f64 / (len as f64 - 1.0) * (n as f64 - 1.0);
            let i = (pos.floor() as usize).min(n - 2);
            let frac = pos - i as f64;
            let (x0, v0) = traj.samples[i];
            let (x1, v1) = traj.samples[i + 1];
            (x0 + frac * (x1 - x0), v0 + frac * (v1 - v0))
        })
        .collect();
    Trajectory::new(new_dt, samples, traj.source_id.clone())
}
