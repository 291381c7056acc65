//! Aligned decoding: one input bit is latched per reference pulse by
//! majority vote, count ties are broken by frame overlap duration, and the
//! resulting pattern is resolved against a codebook.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::codebook::{Codebook, Direction, MatchOutcome, ObservedPattern, PrefixOutcome, Symbol};
use crate::error::{Error, Result};
use crate::pattern::Trace;
use crate::sim::{extract_events, EdgeKind, Frame, FrameStream, TransitionEvents};

/// Default inactivity window after which a partial code is discarded.
pub const DEFAULT_TIMEOUT_S: f64 = 1.0;

/// The span between a reference touch-down and the following touch-up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BitInterval {
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameOverlap {
    pub frame: usize,
    pub overlap_s: f64,
}

impl BitInterval {
    pub fn contains(&self, t_s: f64) -> bool {
        t_s >= self.start_s && t_s < self.end_s
    }

    /// Frames whose span `[t_n, t_{n+1})` intersects the interval, with the
    /// length of each intersection.
    pub fn frames(&self, stream: &FrameStream) -> Vec<FrameOverlap> {
        let frames = stream.frames();
        let first = frames
            .partition_point(|f| f.t_s <= self.start_s)
            .saturating_sub(1);
        (first..frames.len())
            .take_while(|&n| frames[n].t_s < self.end_s)
            .filter_map(|n| {
                let a = frames[n].t_s;
                let b = stream.frame_end_s(n);
                let overlap = b.min(self.end_s) - a.max(self.start_s);
                (b > self.start_s).then_some(FrameOverlap {
                    frame: n,
                    overlap_s: overlap,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalSet {
    pub intervals: Vec<BitInterval>,
    /// Fewer reference pulses were seen than expected.
    pub incomplete: bool,
}

/// Pair each reference Down with the next reference Up.
///
/// A leading Up (stream began on a segment) and a trailing unmatched Down are
/// ignored. With `expected_bits` the list is capped at that many intervals.
pub fn segment_intervals(
    events: &TransitionEvents,
    expected_bits: Option<usize>,
) -> Result<IntervalSet> {
    let mut refs = events.of(Trace::Reference).peekable();
    if refs.peek().is_none() {
        return Err(Error::NoReferenceEvents);
    }
    let mut intervals = Vec::new();
    let mut pending = None;
    for e in refs {
        match e.kind {
            EdgeKind::Down => pending = Some(e.t_s),
            EdgeKind::Up => {
                if let Some(start_s) = pending.take() {
                    intervals.push(BitInterval {
                        index: intervals.len(),
                        start_s,
                        end_s: e.t_s,
                    });
                }
            }
        }
        if expected_bits.is_some_and(|l| intervals.len() >= l) {
            break;
        }
    }
    let incomplete = expected_bits.is_some_and(|l| intervals.len() < l);
    Ok(IntervalSet {
        intervals,
        incomplete,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BitDecision {
    Zero,
    One,
    /// Exact tie after weighting, or no frame overlapped the interval (`starved`).
    Ambiguous {
        starved: bool,
    },
}

impl BitDecision {
    pub fn symbol(self) -> Symbol {
        match self {
            BitDecision::Zero => Symbol::Zero,
            BitDecision::One => Symbol::One,
            BitDecision::Ambiguous { .. } => Symbol::Wildcard,
        }
    }
}

/// Majority over `(state, overlap duration)` votes with duration-weighted tie-breaking.
pub fn decide_votes(votes: &[(bool, f64)]) -> BitDecision {
    use std::cmp::Ordering::*;
    if votes.is_empty() {
        return BitDecision::Ambiguous { starved: true };
    }
    let ones = votes.iter().filter(|v| v.0).count();
    match (2 * ones).cmp(&votes.len()) {
        Greater => BitDecision::One,
        Less => BitDecision::Zero,
        Equal => {
            let on: f64 = votes.iter().filter(|v| v.0).map(|v| v.1).sum();
            let total: f64 = votes.iter().map(|v| v.1).sum();
            match on.partial_cmp(&(total / 2.0)) {
                Some(Greater) => BitDecision::One,
                Some(Less) => BitDecision::Zero,
                _ => BitDecision::Ambiguous { starved: false },
            }
        }
    }
}

pub fn decide_bit(interval: &BitInterval, stream: &FrameStream) -> BitDecision {
    let frames = stream.frames();
    let votes: Vec<(bool, f64)> = interval
        .frames(stream)
        .into_iter()
        .map(|o| (frames[o.frame].input_on, o.overlap_s))
        .collect();
    decide_votes(&votes)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeOutcome {
    Command {
        command: String,
        direction: Direction,
    },
    NoMatch,
    Ambiguous,
    Incomplete,
}

impl DecodeOutcome {
    pub fn name(&self) -> &'static str {
        match self {
            DecodeOutcome::Command { .. } => "command",
            DecodeOutcome::NoMatch => "no_match",
            DecodeOutcome::Ambiguous => "ambiguous",
            DecodeOutcome::Incomplete => "incomplete",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignedDecode {
    pub outcome: DecodeOutcome,
    pub bits: ObservedPattern,
    pub decisions: Vec<BitDecision>,
}

/// Serialized as `{outcome, command, direction, bits}`.
impl Serialize for AlignedDecode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let (command, direction) = match &self.outcome {
            DecodeOutcome::Command { command, direction } => {
                (Some(command.as_str()), Some(*direction))
            }
            _ => (None, None),
        };
        let mut st = s.serialize_struct("AlignedDecode", 4)?;
        st.serialize_field("outcome", self.outcome.name())?;
        st.serialize_field("command", &command)?;
        st.serialize_field("direction", &direction)?;
        st.serialize_field("bits", &self.bits.to_string())?;
        st.end()
    }
}

/// Batch decode of a complete gesture.
pub fn decode(stream: &FrameStream, codebook: &Codebook) -> AlignedDecode {
    let events = extract_events(stream);
    let set = match segment_intervals(&events, Some(codebook.length())) {
        Ok(set) => set,
        Err(_) => {
            return AlignedDecode {
                outcome: DecodeOutcome::Incomplete,
                bits: ObservedPattern::default(),
                decisions: vec![],
            }
        }
    };
    let decisions: Vec<BitDecision> = set
        .intervals
        .iter()
        .map(|i| decide_bit(i, stream))
        .collect();
    let bits = ObservedPattern::new(decisions.iter().map(|d| d.symbol()).collect());
    let outcome = if set.incomplete {
        DecodeOutcome::Incomplete
    } else {
        match codebook
            .match_code(&bits)
            .expect("interval count equals codebook length")
        {
            MatchOutcome::Command { command, direction } => {
                DecodeOutcome::Command { command, direction }
            }
            MatchOutcome::NoMatch => DecodeOutcome::NoMatch,
            MatchOutcome::Ambiguous => DecodeOutcome::Ambiguous,
        }
    };
    AlignedDecode {
        outcome,
        bits,
        decisions,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum IncrementalOutcome {
    Command {
        command: String,
        direction: Direction,
    },
    Undecided,
    /// The bits so far match no code; further bits of this gesture are ignored.
    NoMatch,
    /// Inactivity timeout; buffered bits were discarded.
    Reset,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementalEvent {
    pub t_s: f64,
    /// Bits latched in the current gesture when the event fired.
    pub bits: String,
    #[serde(flatten)]
    pub outcome: IncrementalOutcome,
}

/// Streaming aligned decoder that classifies a gesture as soon as its prefix
/// is unique. One instance per input source.
#[derive(Clone, Debug)]
pub struct IncrementalDecoder {
    codebook: Codebook,
    timeout_s: f64,
    prev: Option<Frame>,
    open: Option<Vec<Frame>>,
    bits: ObservedPattern,
    settled: bool,
    last_ref_change_s: f64,
}

impl IncrementalDecoder {
    pub fn new(codebook: Codebook, timeout_s: f64) -> Self {
        IncrementalDecoder {
            codebook,
            timeout_s,
            prev: None,
            open: None,
            bits: ObservedPattern::default(),
            settled: false,
            last_ref_change_s: f64::NEG_INFINITY,
        }
    }

    pub fn bits(&self) -> &ObservedPattern {
        &self.bits
    }

    fn is_active(&self) -> bool {
        self.open.is_some() || !self.bits.is_empty()
    }

    fn clear(&mut self) {
        self.open = None;
        self.bits = ObservedPattern::default();
        self.settled = false;
    }

    fn event(&self, t_s: f64, outcome: IncrementalOutcome) -> IncrementalEvent {
        IncrementalEvent {
            t_s,
            bits: self.bits.to_string(),
            outcome,
        }
    }

    /// Check the inactivity timeout without a new frame.
    pub fn poll(&mut self, now_s: f64) -> Option<IncrementalEvent> {
        if self.is_active() && now_s - self.last_ref_change_s > self.timeout_s {
            let ev = self.event(now_s, IncrementalOutcome::Reset);
            self.clear();
            return Some(ev);
        }
        None
    }

    pub fn push(&mut self, frame: Frame) -> Result<Option<IncrementalEvent>> {
        if let Some(prev) = self.prev {
            if !(frame.t_s > prev.t_s) {
                return Err(Error::InvalidStream(
                    "timestamps must strictly increase".into(),
                ));
            }
        }
        let mut out = self.poll(frame.t_s);
        let Some(prev) = self.prev.replace(frame) else {
            return Ok(out);
        };

        match (prev.ref_on, frame.ref_on) {
            (false, true) => {
                self.last_ref_change_s = frame.t_s;
                self.open = Some(vec![frame]);
            }
            (true, false) => {
                self.last_ref_change_s = frame.t_s;
                if let Some(open) = self.open.take() {
                    let votes: Vec<(bool, f64)> = open
                        .iter()
                        .enumerate()
                        .map(|(k, f)| {
                            let next = open.get(k + 1).map_or(frame.t_s, |g| g.t_s);
                            (f.input_on, next - f.t_s)
                        })
                        .collect();
                    self.bits.push(decide_votes(&votes).symbol());
                    if !self.settled {
                        let outcome = match self.codebook.match_prefix(&self.bits) {
                            PrefixOutcome::Command { command, direction } => {
                                self.settled = true;
                                IncrementalOutcome::Command { command, direction }
                            }
                            PrefixOutcome::Undecided => IncrementalOutcome::Undecided,
                            PrefixOutcome::NoMatch => {
                                self.settled = true;
                                IncrementalOutcome::NoMatch
                            }
                        };
                        out = Some(self.event(frame.t_s, outcome));
                    }
                    if self.bits.len() >= self.codebook.length() {
                        self.clear();
                    }
                }
            }
            (true, true) => {
                if let Some(open) = self.open.as_mut() {
                    open.push(frame);
                }
            }
            (false, false) => {}
        }
        Ok(out)
    }
}

/// Feed a stream through an [`IncrementalDecoder`] and collect every event.
pub fn decode_incremental(
    stream: &FrameStream,
    codebook: &Codebook,
    timeout_s: f64,
) -> Vec<IncrementalEvent> {
    let mut dec = IncrementalDecoder::new(codebook.clone(), timeout_s);
    stream
        .frames()
        .iter()
        .filter_map(|&f| dec.push(f).expect("FrameStream timestamps are increasing"))
        .collect()
}
