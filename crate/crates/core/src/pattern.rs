//! One-dimensional geometry of the reference and input traces.
//!
//! The axis runs along the direction of motion with its origin at the
//! leading edge of the first reference segment. Two-dimensional placement
//! (footprints, trace rows) is handled by [`crate::export`].

use serde::{Deserialize, Serialize};

use crate::codebook::Code;
use crate::error::{Error, Result};

/// Electrode height used when none is given.
pub const DEFAULT_ELECTRODE_HEIGHT_MM: f64 = 8.0;
/// Side length of the square contact footprints.
pub const DEFAULT_FOOTPRINT_SIDE_MM: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trace {
    Reference,
    Input,
}

/// Configuration family without its payload; used by design specs and sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigKind {
    Aligned,
    PhaseShifted,
}

impl ConfigKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConfigKind::Aligned => "aligned",
            ConfigKind::PhaseShifted => "phase_shifted",
        }
    }
}

impl std::str::FromStr for ConfigKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(ConfigKind::Aligned),
            "phase_shifted" | "phase-shifted" | "phase" => Ok(ConfigKind::PhaseShifted),
            other => Err(Error::InvalidSpec(format!(
                "unknown configuration {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Configuration {
    /// Input trace carries a fixed binary command code.
    Aligned { code: Code },
    /// Input trace repeats the reference shifted by the phase offset.
    PhaseShifted { cycles: u32 },
}

impl Configuration {
    pub fn kind(&self) -> ConfigKind {
        match self {
            Configuration::Aligned { .. } => ConfigKind::Aligned,
            Configuration::PhaseShifted { .. } => ConfigKind::PhaseShifted,
        }
    }
}

/// Physical dimensions of a pattern, in millimetres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "GeometryRepr")]
pub struct GeometrySpec {
    pub width_mm: f64,
    pub gap_mm: f64,
    pub electrode_height_mm: f64,
    pub footprint_side_mm: f64,
    pub phase_offset_mm: f64,
    pub slider_width_mm: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryRepr {
    width_mm: f64,
    gap_mm: Option<f64>,
    electrode_height_mm: Option<f64>,
    footprint_side_mm: Option<f64>,
    phase_offset_mm: Option<f64>,
    slider_width_mm: Option<f64>,
}

impl From<GeometryRepr> for GeometrySpec {
    fn from(r: GeometryRepr) -> Self {
        let base = GeometrySpec::with_width(r.width_mm);
        GeometrySpec {
            width_mm: r.width_mm,
            gap_mm: r.gap_mm.unwrap_or(base.gap_mm),
            electrode_height_mm: r.electrode_height_mm.unwrap_or(base.electrode_height_mm),
            footprint_side_mm: r.footprint_side_mm.unwrap_or(base.footprint_side_mm),
            phase_offset_mm: r.phase_offset_mm.unwrap_or(base.phase_offset_mm),
            slider_width_mm: r.slider_width_mm.unwrap_or(base.slider_width_mm),
        }
    }
}

impl GeometrySpec {
    /// Defaults derived from the electrode width: gap 3w, offset w, slider w.
    pub fn with_width(width_mm: f64) -> Self {
        GeometrySpec {
            width_mm,
            gap_mm: 3.0 * width_mm,
            electrode_height_mm: DEFAULT_ELECTRODE_HEIGHT_MM,
            footprint_side_mm: DEFAULT_FOOTPRINT_SIDE_MM,
            phase_offset_mm: width_mm,
            slider_width_mm: width_mm,
        }
    }

    /// Reference segment pitch (one full on/off cycle).
    pub fn pitch_mm(&self) -> f64 {
        self.width_mm + self.gap_mm
    }

    pub fn validate(&self, kind: ConfigKind) -> Result<()> {
        let dims = [
            ("width_mm", self.width_mm),
            ("gap_mm", self.gap_mm),
            ("electrode_height_mm", self.electrode_height_mm),
            ("footprint_side_mm", self.footprint_side_mm),
            ("phase_offset_mm", self.phase_offset_mm),
            ("slider_width_mm", self.slider_width_mm),
        ];
        for (name, value) in dims {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidDimension { name, value });
            }
        }
        if self.gap_mm < self.width_mm {
            return Err(Error::InvalidGeometry(format!(
                "gap {} mm is narrower than width {} mm",
                self.gap_mm, self.width_mm
            )));
        }
        if kind == ConfigKind::PhaseShifted && self.phase_offset_mm >= self.pitch_mm() {
            return Err(Error::InvalidGeometry(format!(
                "phase offset {} mm must be below the pitch {} mm",
                self.phase_offset_mm,
                self.pitch_mm()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub trace: Trace,
    pub start_mm: f64,
    pub length_mm: f64,
}

impl Segment {
    pub fn end_mm(&self) -> f64 {
        self.start_mm + self.length_mm
    }
}

/// A validated sequence pattern. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PatternRepr")]
pub struct SequencePattern {
    config: Configuration,
    geometry: GeometrySpec,
    segments: Vec<Segment>,
    total_travel_mm: f64,
    l_seq_mm: f64,
    delta_d_mm: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternRepr {
    config: Configuration,
    geometry: GeometrySpec,
    segments: Option<Vec<Segment>>,
    total_travel_mm: Option<f64>,
    l_seq_mm: Option<f64>,
    delta_d_mm: Option<f64>,
}

impl TryFrom<PatternRepr> for SequencePattern {
    type Error = Error;

    // Derived fields are recomputed; any supplied value must agree with them.
    fn try_from(r: PatternRepr) -> Result<Self> {
        let built = SequencePattern::build(&r.config, &r.geometry)?;
        let mismatch =
            |field: &str| Error::InvalidPattern(format!("{field} disagrees with geometry"));
        if r.segments.is_some_and(|s| s != built.segments) {
            return Err(mismatch("segments"));
        }
        if r.total_travel_mm
            .is_some_and(|v| v != built.total_travel_mm)
        {
            return Err(mismatch("total_travel_mm"));
        }
        if r.l_seq_mm.is_some_and(|v| v != built.l_seq_mm) {
            return Err(mismatch("l_seq_mm"));
        }
        if r.delta_d_mm.is_some_and(|v| v != built.delta_d_mm) {
            return Err(mismatch("delta_d_mm"));
        }
        Ok(built)
    }
}

impl SequencePattern {
    pub fn build(config: &Configuration, geometry: &GeometrySpec) -> Result<Self> {
        geometry.validate(config.kind())?;
        let pitch = geometry.pitch_mm();
        let w = geometry.width_mm;
        let cell = |i: usize| i as f64 * pitch;

        let mut segments = Vec::new();
        match config {
            Configuration::Aligned { code } => {
                let bits = code.bits();
                for i in 0..bits.len() {
                    segments.push(Segment {
                        trace: Trace::Reference,
                        start_mm: cell(i),
                        length_mm: w,
                    });
                }
                // Runs of 1-bits become one contiguous input segment.
                let mut i = 0;
                while i < bits.len() {
                    if !bits[i] {
                        i += 1;
                        continue;
                    }
                    let first = i;
                    while i + 1 < bits.len() && bits[i + 1] {
                        i += 1;
                    }
                    let start = cell(first);
                    let end = cell(i) + w;
                    segments.push(Segment {
                        trace: Trace::Input,
                        start_mm: start,
                        length_mm: end - start,
                    });
                    i += 1;
                }
            }
            Configuration::PhaseShifted { cycles } => {
                if *cycles == 0 {
                    return Err(Error::ZeroCycles);
                }
                let n = *cycles as usize;
                for i in 0..n {
                    segments.push(Segment {
                        trace: Trace::Reference,
                        start_mm: cell(i),
                        length_mm: w,
                    });
                }
                for i in 0..n {
                    segments.push(Segment {
                        trace: Trace::Input,
                        start_mm: cell(i) + geometry.phase_offset_mm,
                        length_mm: w,
                    });
                }
            }
        }

        let total_travel_mm = segments.iter().map(Segment::end_mm).fold(0.0, f64::max);
        Ok(SequencePattern {
            config: config.clone(),
            geometry: geometry.clone(),
            segments,
            total_travel_mm,
            l_seq_mm: pitch,
            delta_d_mm: pitch / 2.0,
        })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn geometry(&self) -> &GeometrySpec {
        &self.geometry
    }

    pub fn all_segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segments(&self, trace: Trace) -> impl Iterator<Item = &Segment> + '_ {
        self.segments.iter().filter(move |s| s.trace == trace)
    }

    pub fn total_travel_mm(&self) -> f64 {
        self.total_travel_mm
    }

    /// Full-cycle spatial pitch of the reference trace.
    pub fn l_seq_mm(&self) -> f64 {
        self.l_seq_mm
    }

    /// Displacement represented by one input transition.
    pub fn delta_d_mm(&self) -> f64 {
        self.delta_d_mm
    }

    /// Fraction of the slider electrode covering conductive segments of `trace`
    /// when the slider is centred at `slider_center_mm`.
    pub fn overlap_fraction(&self, trace: Trace, slider_center_mm: f64) -> f64 {
        let half = self.geometry.slider_width_mm / 2.0;
        let lo = slider_center_mm - half;
        let hi = slider_center_mm + half;
        let covered: f64 = self
            .segments(trace)
            .map(|s| (hi.min(s.end_mm()) - lo.max(s.start_mm)).max(0.0))
            .sum();
        (covered / self.geometry.slider_width_mm).clamp(0.0, 1.0)
    }

    /// Canonical JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pattern serializes")
    }
}
