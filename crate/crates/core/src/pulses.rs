//! Pulse envelopes and piecewise-constant phase schedules.
//!
//! Holonomic gates in this crate depend on pulse areas and segment phases
//! only, so the representation keeps both exactly: closed-form areas per
//! envelope and one constant phase per segment. The two-interval schedule
//! splits an evolution at `tau` with a step change in drive phase; the
//! phase jump controls the gate's relative phases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{unit_phase, C64};

/// Envelope shape of one pulse segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Constant,
    SineSquared,
}

/// A single pulse envelope: `|Omega(t)|` over one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub shape: Shape,
    /// Peak amplitude in angular-frequency units (hbar = 1); non-negative.
    pub peak_amplitude: f64,
    /// Segment duration; positive.
    pub duration: f64,
}

impl Envelope {
    pub fn new(shape: Shape, peak_amplitude: f64, duration: f64) -> Result<Self> {
        if !(peak_amplitude >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "peak amplitude must be >= 0, got {peak_amplitude}"
            )));
        }
        if !(duration > 0.0) {
            return Err(Error::InvalidInput(format!(
                "duration must be > 0, got {duration}"
            )));
        }
        Ok(Self { shape, peak_amplitude, duration })
    }

    pub fn constant(peak_amplitude: f64, duration: f64) -> Result<Self> {
        Self::new(Shape::Constant, peak_amplitude, duration)
    }

    pub fn sine_squared(peak_amplitude: f64, duration: f64) -> Result<Self> {
        Self::new(Shape::SineSquared, peak_amplitude, duration)
    }

    /// `|Omega(t)|` at time `t` relative to the segment start; zero outside
    /// `[0, duration]`.
    pub fn amplitude(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            return 0.0;
        }
        match self.shape {
            Shape::Constant => self.peak_amplitude,
            Shape::SineSquared => {
                let s = (std::f64::consts::PI * t / self.duration).sin();
                self.peak_amplitude * s * s
            }
        }
    }
}

/// `int_0^T |Omega(t)| dt`, exact for the closed-form shapes.
pub fn pulse_area(envelope: &Envelope) -> f64 {
    match envelope.shape {
        Shape::Constant => envelope.peak_amplitude * envelope.duration,
        Shape::SineSquared => envelope.peak_amplitude * envelope.duration / 2.0,
    }
}

/// One segment of a pulse: an envelope with a constant drive phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub envelope: Envelope,
    /// Drive phase, constant within the segment (radians).
    pub phase: f64,
}

/// A pulse made of consecutive segments with piecewise-constant phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedPulse {
    segments: Vec<Segment>,
}

impl SegmentedPulse {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidInput("pulse needs at least one segment".into()));
        }
        Ok(Self { segments })
    }

    /// Single-segment pulse.
    pub fn single(envelope: Envelope, phase: f64) -> Self {
        Self { segments: vec![Segment { envelope, phase }] }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.envelope.duration).sum()
    }

    /// Cumulative segment boundary times `0 < tau_1 < ... < T`.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len());
        let mut acc = 0.0;
        for s in &self.segments {
            acc += s.envelope.duration;
            out.push(acc);
        }
        out
    }

    /// Segment index and segment-relative time at absolute time `t`.
    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        if t < 0.0 {
            return None;
        }
        let mut start = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            let end = start + s.envelope.duration;
            if t <= end {
                return Some((i, t - start));
            }
            start = end;
        }
        None
    }

    /// `|Omega(t)|` at absolute time `t`; zero outside the pulse.
    pub fn magnitude(&self, t: f64) -> f64 {
        match self.locate(t) {
            Some((i, rel)) => self.segments[i].envelope.amplitude(rel),
            None => 0.0,
        }
    }

    /// Complex amplitude `|Omega(t)| e^{i phi_seg}` at absolute time `t`.
    pub fn value(&self, t: f64) -> C64 {
        match self.locate(t) {
            Some((i, rel)) => {
                unit_phase(self.segments[i].phase) * self.segments[i].envelope.amplitude(rel)
            }
            None => C64::new(0.0, 0.0),
        }
    }

    /// Pulse area of segment `i`.
    pub fn segment_area(&self, i: usize) -> f64 {
        pulse_area(&self.segments[i].envelope)
    }

    pub fn total_area(&self) -> f64 {
        self.segments.iter().map(|s| pulse_area(&s.envelope)).sum()
    }
}

/// Build the two-interval schedule: two consecutive segments of equal pulse
/// area with a step change in drive phase at the boundary.
///
/// Segment durations are 1 each; the peak amplitude is chosen so that each
/// segment integrates to `area_per_interval` (`pi/2` for the gates built
/// here).
pub fn two_interval_schedule(
    area_per_interval: f64,
    phase1: f64,
    phase2: f64,
    shape: Shape,
) -> Result<SegmentedPulse> {
    if !(area_per_interval > 0.0) {
        return Err(Error::NonPositiveArea(area_per_interval));
    }
    let duration = 1.0;
    let peak = match shape {
        Shape::Constant => area_per_interval / duration,
        Shape::SineSquared => 2.0 * area_per_interval / duration,
    };
    let env = Envelope::new(shape, peak, duration)?;
    SegmentedPulse::new(vec![
        Segment { envelope: env, phase: phase1 },
        Segment { envelope: env, phase: phase2 },
    ])
}
