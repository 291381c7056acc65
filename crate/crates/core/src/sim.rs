//! Framewise contact simulation: slider motion over a pattern sampled by a
//! touch panel with a fixed frame rate, a sampling phase and optional jitter.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{SequencePattern, Trace};

/// Default fraction of slider overlap the panel needs to report a touch.
pub const DEFAULT_DETECT_THRESHOLD: f64 = 0.25;

/// Jitter is clipped to this fraction of the frame period so timestamps stay monotone.
const JITTER_CLIP: f64 = 0.45;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSegment {
    pub velocity_mm_per_s: f64,
    pub duration_s: f64,
}

/// Piecewise constant-velocity motion of the slider centre.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionProfile {
    pub start_position_mm: f64,
    pub segments: Vec<MotionSegment>,
}

impl MotionProfile {
    pub fn new(start_position_mm: f64, segments: Vec<MotionSegment>) -> Result<Self> {
        if segments
            .iter()
            .any(|s| !(s.duration_s > 0.0) || !s.velocity_mm_per_s.is_finite())
        {
            return Err(Error::InvalidSpec(
                "motion segments need positive durations".into(),
            ));
        }
        Ok(MotionProfile {
            start_position_mm,
            segments,
        })
    }

    pub fn constant(
        start_position_mm: f64,
        velocity_mm_per_s: f64,
        duration_s: f64,
    ) -> Result<Self> {
        Self::new(
            start_position_mm,
            vec![MotionSegment {
                velocity_mm_per_s,
                duration_s,
            }],
        )
    }

    /// Constant-speed pass over the whole pattern, starting and ending
    /// `lead_mm` beyond its ends. Negative speed traverses from the far end.
    pub fn traverse(pattern: &SequencePattern, speed_mm_per_s: f64, lead_mm: f64) -> Result<Self> {
        if speed_mm_per_s == 0.0 || !speed_mm_per_s.is_finite() {
            return Err(Error::InvalidSpec("traverse speed must be non-zero".into()));
        }
        let span = pattern.total_travel_mm() + 2.0 * lead_mm;
        let start = if speed_mm_per_s > 0.0 {
            -lead_mm
        } else {
            pattern.total_travel_mm() + lead_mm
        };
        Self::constant(start, speed_mm_per_s, span / speed_mm_per_s.abs())
    }

    pub fn total_duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    pub fn end_position_mm(&self) -> f64 {
        self.start_position_mm
            + self
                .segments
                .iter()
                .map(|s| s.velocity_mm_per_s * s.duration_s)
                .sum::<f64>()
    }

    /// Slider centre at time `t_s`; clamped to the profile's endpoints outside it.
    pub fn position_at(&self, t_s: f64) -> f64 {
        let mut pos = self.start_position_mm;
        let mut remaining = t_s.max(0.0);
        for seg in &self.segments {
            let dt = remaining.min(seg.duration_s);
            pos += seg.velocity_mm_per_s * dt;
            remaining -= dt;
            if remaining <= 0.0 {
                break;
            }
        }
        pos
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingModel {
    pub rate_hz: f64,
    #[serde(default)]
    pub phase_s: f64,
    #[serde(default)]
    pub jitter_std_s: f64,
    #[serde(default = "default_threshold")]
    pub detect_threshold: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_threshold() -> f64 {
    DEFAULT_DETECT_THRESHOLD
}

impl SamplingModel {
    pub fn new(rate_hz: f64) -> Self {
        SamplingModel {
            rate_hz,
            phase_s: 0.0,
            jitter_std_s: 0.0,
            detect_threshold: DEFAULT_DETECT_THRESHOLD,
            seed: 0,
        }
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "sampling rate {} must be positive",
                self.rate_hz
            )));
        }
        if !(self.phase_s >= 0.0 && self.phase_s < self.period_s()) {
            return Err(Error::InvalidSpec(format!(
                "sampling phase {} outside [0, T_s)",
                self.phase_s
            )));
        }
        if !(self.jitter_std_s >= 0.0 && self.jitter_std_s.is_finite()) {
            return Err(Error::InvalidSpec("jitter must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.detect_threshold) {
            return Err(Error::InvalidSpec(format!(
                "threshold {} outside [0, 1)",
                self.detect_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameRepr", into = "FrameRepr")]
pub struct Frame {
    pub t_s: f64,
    pub ref_on: bool,
    pub input_on: bool,
}

impl Frame {
    pub fn state(&self, trace: Trace) -> bool {
        match trace {
            Trace::Reference => self.ref_on,
            Trace::Input => self.input_on,
        }
    }
}

/// Wire form of a frame: `{"t": seconds, "ref": 0|1, "input": 0|1}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRepr {
    t: f64,
    #[serde(rename = "ref")]
    reference: u8,
    input: u8,
}

impl TryFrom<FrameRepr> for Frame {
    type Error = Error;
    fn try_from(r: FrameRepr) -> Result<Self> {
        let bit = |v: u8| match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::InvalidStream(format!(
                "frame state {other} is not 0 or 1"
            ))),
        };
        if !r.t.is_finite() {
            return Err(Error::InvalidStream("non-finite timestamp".into()));
        }
        Ok(Frame {
            t_s: r.t,
            ref_on: bit(r.reference)?,
            input_on: bit(r.input)?,
        })
    }
}

impl From<Frame> for FrameRepr {
    fn from(f: Frame) -> Self {
        FrameRepr {
            t: f.t_s,
            reference: f.ref_on as u8,
            input: f.input_on as u8,
        }
    }
}

/// Timestamped binary states of both traces; timestamps strictly increase.
#[derive(Clone, Debug, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct FrameStream {
    frames: Vec<Frame>,
}

impl FrameStream {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        if let Some(w) = frames.windows(2).find(|w| !(w[1].t_s > w[0].t_s)) {
            return Err(Error::InvalidStream(format!(
                "timestamps must strictly increase ({} then {})",
                w[0].t_s, w[1].t_s
            )));
        }
        Ok(FrameStream { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Median frame spacing, the nominal sampling period.
    pub fn nominal_period_s(&self) -> Option<f64> {
        let mut diffs: Vec<f64> = self
            .frames
            .windows(2)
            .map(|w| w[1].t_s - w[0].t_s)
            .collect();
        if diffs.is_empty() {
            return None;
        }
        diffs.sort_by(f64::total_cmp);
        Some(diffs[diffs.len() / 2])
    }

    /// End of frame `n`'s span: the next timestamp, or one nominal period for the last frame.
    pub fn frame_end_s(&self, n: usize) -> f64 {
        match self.frames.get(n + 1) {
            Some(next) => next.t_s,
            None => self.frames[n].t_s + self.nominal_period_s().unwrap_or(0.0),
        }
    }

    /// The same frames played backwards, re-timed as `t_last - t`.
    pub fn time_reversed(&self) -> FrameStream {
        let last = self.frames.last().map_or(0.0, |f| f.t_s);
        let frames = self
            .frames
            .iter()
            .rev()
            .map(|f| Frame {
                t_s: last - f.t_s,
                ..*f
            })
            .collect();
        FrameStream { frames }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for f in &self.frames {
            serde_json::to_writer(&mut out, f)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut frames = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            frames.push(serde_json::from_str(&line)?);
        }
        FrameStream::new(frames)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// 0 -> 1
    Down,
    /// 1 -> 0
    Up,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub trace: Trace,
    pub kind: EdgeKind,
    pub t_s: f64,
}

/// State changes of both traces in time order.
#[derive(Clone, Debug, PartialEq, Default, Serialize)]
pub struct TransitionEvents {
    pub events: Vec<TransitionEvent>,
}

impl TransitionEvents {
    pub fn of(&self, trace: Trace) -> impl Iterator<Item = &TransitionEvent> + '_ {
        self.events.iter().filter(move |e| e.trace == trace)
    }

    pub fn count(&self, trace: Trace, kind: EdgeKind) -> usize {
        self.of(trace).filter(|e| e.kind == kind).count()
    }
}

/// One event per state change, stamped with the first frame showing the new state.
pub fn extract_events(stream: &FrameStream) -> TransitionEvents {
    let mut events = Vec::new();
    for w in stream.frames().windows(2) {
        for trace in [Trace::Reference, Trace::Input] {
            let (before, after) = (w[0].state(trace), w[1].state(trace));
            if before != after {
                let kind = if after { EdgeKind::Down } else { EdgeKind::Up };
                events.push(TransitionEvent {
                    trace,
                    kind,
                    t_s: w[1].t_s,
                });
            }
        }
    }
    TransitionEvents { events }
}

/// Sample the slider over the pattern.
///
/// Frame `n` is taken at `phase + n·T_s + jitter_n` for every nominal instant
/// inside the motion's duration; a trace reads 1 when the slider's overlap
/// with that trace exceeds the detection threshold.
pub fn simulate(
    pattern: &SequencePattern,
    motion: &MotionProfile,
    sampling: &SamplingModel,
) -> Result<FrameStream> {
    sampling.validate()?;
    let period = sampling.period_s();
    let total = motion.total_duration_s();
    let jitter = if sampling.jitter_std_s > 0.0 {
        Some(
            Normal::new(0.0, sampling.jitter_std_s)
                .map_err(|e| Error::InvalidSpec(e.to_string()))?,
        )
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let clip = JITTER_CLIP * period;

    let mut frames = Vec::new();
    let mut n: u64 = 0;
    loop {
        let nominal = sampling.phase_s + n as f64 * period;
        if nominal >= total {
            break;
        }
        let offset = jitter
            .as_ref()
            .map_or(0.0, |d| d.sample(&mut rng).clamp(-clip, clip));
        let t_s = nominal + offset;
        let x = motion.position_at(t_s);
        frames.push(Frame {
            t_s,
            ref_on: pattern.overlap_fraction(Trace::Reference, x) > sampling.detect_threshold,
            input_on: pattern.overlap_fraction(Trace::Input, x) > sampling.detect_threshold,
        });
        n += 1;
    }
    FrameStream::new(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{Configuration, GeometrySpec};

    fn aligned(code: &str, w: f64) -> SequencePattern {
        SequencePattern::build(
            &Configuration::Aligned {
                code: code.parse().unwrap(),
            },
            &GeometrySpec::with_width(w),
        )
        .unwrap()
    }

    fn frames(states: &[(f64, bool, bool)]) -> FrameStream {
        FrameStream::new(
            states
                .iter()
                .map(|&(t_s, r, i)| Frame {
                    t_s,
                    ref_on: r,
                    input_on: i,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn dwell_on_segment_is_always_on() {
        let p = aligned("100011", 3.0);
        let motion = MotionProfile::constant(1.5, 0.0, 1.0).unwrap();
        for phase in [0.0, 0.004, 0.0166] {
            let mut s = SamplingModel::new(60.0);
            s.phase_s = phase;
            let stream = simulate(&p, &motion, &s).unwrap();
            assert!(!stream.is_empty());
            assert!(stream.frames().iter().all(|f| f.ref_on && f.input_on));
        }
    }

    /// On-span of 2w = 6 mm at 60 mm/s lasts 0.1 s: six frames of a 60 Hz grid, ±1 by phase.
    #[test]
    fn on_frames_per_cell_at_half_normalized_speed() {
        use rand::Rng;
        let p = aligned("100011", 3.0);
        let motion = MotionProfile::traverse(&p, 60.0, 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut s = SamplingModel::new(60.0);
            s.detect_threshold = 0.0;
            s.phase_s = rng.random_range(0.0..1.0 / 60.0);
            let stream = simulate(&p, &motion, &s).unwrap();
            let mut runs = Vec::new();
            let mut run = 0;
            for f in stream.frames() {
                if f.ref_on {
                    run += 1;
                } else if run > 0 {
                    runs.push(run);
                    run = 0;
                }
            }
            assert_eq!(runs.len(), 6);
            assert!(runs.iter().all(|&r| (5..=7).contains(&r)), "{runs:?}");
        }
    }

    /// At v = 3·w·f_s the 2w on-span lasts 2/3 of a frame, so some phases miss a cell.
    #[test]
    fn fast_motion_can_miss_cells() {
        let p = aligned("100011", 3.0);
        let v = 3.0 * 3.0 * 60.0;
        let motion = MotionProfile::traverse(&p, v, 6.0).unwrap();
        let mut missed_any = false;
        for k in 0..100 {
            let mut s = SamplingModel::new(60.0);
            s.detect_threshold = 0.0;
            s.phase_s = k as f64 / 100.0 / 60.0;
            let events = extract_events(&simulate(&p, &motion, &s).unwrap());
            if events.count(Trace::Reference, EdgeKind::Down) < 6 {
                missed_any = true;
            }
        }
        assert!(missed_any);
    }

    #[test]
    fn event_extraction_examples() {
        let s = frames(&[
            (0.0, false, false),
            (1.0, false, false),
            (2.0, true, false),
            (3.0, true, false),
        ]);
        let e = extract_events(&s);
        assert_eq!(
            e.events,
            vec![TransitionEvent {
                trace: Trace::Reference,
                kind: EdgeKind::Down,
                t_s: 2.0
            }]
        );

        let s = frames(&[(1.0, true, false), (2.0, false, false), (3.0, true, false)]);
        let e = extract_events(&s);
        let kinds: Vec<_> = e.events.iter().map(|e| (e.kind, e.t_s)).collect();
        assert_eq!(kinds, vec![(EdgeKind::Up, 2.0), (EdgeKind::Down, 3.0)]);
    }

    #[test]
    fn full_traverse_of_100011_has_six_reference_pulses() {
        let p = aligned("100011", 3.0);
        let motion = MotionProfile::traverse(&p, 60.0, 6.0).unwrap();
        let e = extract_events(&simulate(&p, &motion, &SamplingModel::new(60.0)).unwrap());
        assert_eq!(e.count(Trace::Reference, EdgeKind::Down), 6);
        assert_eq!(e.count(Trace::Reference, EdgeKind::Up), 6);
        assert_eq!(e.count(Trace::Input, EdgeKind::Down), 2);
    }

    #[test]
    fn jitter_keeps_timestamps_monotone_and_is_seeded() {
        let p = aligned("100011", 2.0);
        let motion = MotionProfile::traverse(&p, 100.0, 4.0).unwrap();
        let mut s = SamplingModel::new(90.0);
        s.jitter_std_s = 0.01;
        s.seed = 42;
        let a = simulate(&p, &motion, &s).unwrap();
        let b = simulate(&p, &motion, &s).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        s.seed = 43;
        assert_ne!(a, simulate(&p, &motion, &s).unwrap());
    }

    #[test]
    fn jsonl_round_trip_and_validation() {
        let s = frames(&[(0.0, false, true), (0.5, true, false)]);
        let text = s.to_jsonl();
        assert_eq!(
            text,
            "{\"t\":0.0,\"ref\":0,\"input\":1}\n{\"t\":0.5,\"ref\":1,\"input\":0}\n"
        );
        assert_eq!(FrameStream::read_jsonl(text.as_bytes()).unwrap(), s);
        assert!(FrameStream::read_jsonl("{\"t\":0,\"ref\":2,\"input\":0}\n".as_bytes()).is_err());
        assert!(FrameStream::read_jsonl(
            "{\"t\":1,\"ref\":0,\"input\":0}\n{\"t\":1,\"ref\":0,\"input\":0}\n".as_bytes()
        )
        .is_err());
    }

    #[test]
    fn sampling_validation() {
        let mut s = SamplingModel::new(60.0);
        s.phase_s = 1.0 / 60.0;
        assert!(s.validate().is_err());
        let mut s = SamplingModel::new(60.0);
        s.detect_threshold = 1.0;
        assert!(s.validate().is_err());
        assert!(SamplingModel::new(0.0).validate().is_err());
    }
}
