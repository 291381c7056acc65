//! Phase-shifted decoding: direction from the lead/lag of input edges
//! relative to reference edges, distance from counting input edges.

use serde::Serialize;

use crate::aligned::{segment_intervals, BitInterval};
use crate::error::{Error, Result};
use crate::pattern::{ConfigKind, SequencePattern, Trace};
use crate::sim::{extract_events, EdgeKind, FrameStream, TransitionEvent, TransitionEvents};

/// Offset of an input edge from the matching reference edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "dt_s", rename_all = "snake_case")]
pub enum EdgeOffset {
    /// Positive: input lags the reference. Negative: input leads.
    Signed(f64),
    /// Both edges landed on the same frame.
    Neutral,
    /// No input edge of the required type in the search window.
    Undefined,
}

impl EdgeOffset {
    pub fn sign(self) -> i8 {
        match self {
            EdgeOffset::Signed(dt) if dt > 0.0 => 1,
            EdgeOffset::Signed(_) => -1,
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OffsetPair {
    pub start: EdgeOffset,
    pub end: EdgeOffset,
}

/// Half-open time range searched for the input edges belonging to one interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchWindow {
    pub lower_s: f64,
    pub upper_s: f64,
}

/// Window for interval `i`: from the end of the previous reference pulse up
/// to the start of the next one (open-ended at the stream edges).
pub fn search_window(intervals: &[BitInterval], i: usize) -> SearchWindow {
    SearchWindow {
        lower_s: if i == 0 {
            f64::NEG_INFINITY
        } else {
            intervals[i - 1].end_s
        },
        upper_s: intervals.get(i + 1).map_or(f64::INFINITY, |n| n.start_s),
    }
}

fn nearest_edge<'a>(
    inputs: impl Iterator<Item = &'a TransitionEvent>,
    kind: EdgeKind,
    reference_s: f64,
    window: SearchWindow,
) -> EdgeOffset {
    // min_by keeps the earliest of equally distant candidates
    let found = inputs
        .filter(|e| e.kind == kind && e.t_s >= window.lower_s && e.t_s < window.upper_s)
        .map(|e| e.t_s - reference_s)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()));
    match found {
        None => EdgeOffset::Undefined,
        Some(0.0) => EdgeOffset::Neutral,
        Some(dt) => EdgeOffset::Signed(dt),
    }
}

/// Pair the interval's reference Down/Up with the closest input Down/Up in `window`.
pub fn compute_offsets(
    interval: &BitInterval,
    window: SearchWindow,
    input_events: &TransitionEvents,
) -> OffsetPair {
    let inputs = || input_events.of(Trace::Input);
    OffsetPair {
        start: nearest_edge(inputs(), EdgeKind::Down, interval.start_s, window),
        end: nearest_edge(inputs(), EdgeKind::Up, interval.end_s, window),
    }
}

/// Direction sign: agreeing signed offsets, or one signed offset alongside a
/// neutral/undefined one, identify the direction; anything else yields 0.
pub fn decide_direction(offsets: &OffsetPair) -> i8 {
    match (offsets.start.sign(), offsets.end.sign()) {
        (a, b) if a == b => a,
        (a, 0) => a,
        (0, b) => b,
        _ => 0,
    }
}

/// Count input transitions per interval so each is counted exactly once.
///
/// Interval `i` owns `[end_{i-1}, end_i)`: a transition on a boundary goes
/// to the interval after it and one in the gap between pulses goes to the
/// following interval. The first interval extends back to the stream start
/// and the last one forward to the stream end.
pub fn attribute_and_count(
    intervals: &[BitInterval],
    input_events: &TransitionEvents,
) -> Vec<usize> {
    let mut counts = vec![0; intervals.len()];
    if intervals.is_empty() {
        return counts;
    }
    let last = intervals.len() - 1;
    let mut i = 0;
    for e in input_events.of(Trace::Input) {
        while i < last && e.t_s >= intervals[i].end_s {
            i += 1;
        }
        counts[i] += 1;
    }
    counts
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CycleEstimate {
    pub interval: usize,
    pub sigma: i8,
    pub transitions: usize,
    pub offsets: OffsetPair,
}

impl CycleEstimate {
    /// Both offsets signed and pointing the expected way.
    pub fn strictly_correct(&self, expected_sigma: i8) -> bool {
        self.offsets.start.sign() == expected_sigma && self.offsets.end.sign() == expected_sigma
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MotionEstimate {
    pub displacement_mm: f64,
    pub resolution_mm: f64,
    pub cycles: Vec<CycleEstimate>,
}

impl MotionEstimate {
    pub fn from_cycles(cycles: Vec<CycleEstimate>, resolution_mm: f64) -> Self {
        let displacement_mm = Self::accumulate(&cycles, resolution_mm);
        MotionEstimate {
            displacement_mm,
            resolution_mm,
            cycles,
        }
    }

    /// Signed sum of attributed transitions times the resolution.
    pub fn accumulate(cycles: &[CycleEstimate], resolution_mm: f64) -> f64 {
        let steps: i64 = cycles
            .iter()
            .map(|c| c.sigma as i64 * c.transitions as i64)
            .sum();
        steps as f64 * resolution_mm
    }
}

/// Direction and displacement for a stream recorded over a phase-shifted pattern.
///
/// A positive displacement means motion towards the side the input trace is
/// shifted to.
pub fn estimate_motion(stream: &FrameStream, pattern: &SequencePattern) -> Result<MotionEstimate> {
    if pattern.config().kind() != ConfigKind::PhaseShifted {
        return Err(Error::NotPhaseShifted);
    }
    let resolution = pattern.delta_d_mm();
    let events = extract_events(stream);
    let intervals = match segment_intervals(&events, None) {
        Ok(set) => set.intervals,
        Err(Error::NoReferenceEvents) => {
            return Ok(MotionEstimate::from_cycles(vec![], resolution))
        }
        Err(e) => return Err(e),
    };
    let counts = attribute_and_count(&intervals, &events);
    let cycles = intervals
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(i, (interval, transitions))| {
            let offsets = compute_offsets(interval, search_window(&intervals, i), &events);
            CycleEstimate {
                interval: i,
                sigma: decide_direction(&offsets),
                transitions,
                offsets,
            }
        })
        .collect();
    Ok(MotionEstimate::from_cycles(cycles, resolution))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{Configuration, GeometrySpec};
    use crate::sim::{simulate, Frame, MotionProfile, SamplingModel};

    fn ev(trace: Trace, kind: EdgeKind, t_s: f64) -> TransitionEvent {
        TransitionEvent { trace, kind, t_s }
    }

    fn events(list: &[(EdgeKind, f64)]) -> TransitionEvents {
        TransitionEvents {
            events: list.iter().map(|&(k, t)| ev(Trace::Input, k, t)).collect(),
        }
    }

    fn interval(index: usize, start_s: f64, end_s: f64) -> BitInterval {
        BitInterval {
            index,
            start_s,
            end_s,
        }
    }

    fn phase(cycles: u32, w: f64) -> SequencePattern {
        SequencePattern::build(
            &Configuration::PhaseShifted { cycles },
            &GeometrySpec::with_width(w),
        )
        .unwrap()
    }

    #[test]
    fn offset_examples() {
        let t = 1.0 / 60.0;
        let i = interval(0, 10.0 * t, 20.0 * t);
        let open = SearchWindow {
            lower_s: f64::NEG_INFINITY,
            upper_s: f64::INFINITY,
        };

        let e = events(&[(EdgeKind::Down, 12.0 * t), (EdgeKind::Up, 21.0 * t)]);
        let o = compute_offsets(&i, open, &e);
        assert_eq!((o.start.sign(), o.end.sign()), (1, 1));

        let e = events(&[(EdgeKind::Down, 10.0 * t), (EdgeKind::Up, 20.0 * t)]);
        let o = compute_offsets(&i, open, &e);
        assert_eq!((o.start, o.end), (EdgeOffset::Neutral, EdgeOffset::Neutral));

        let e = events(&[(EdgeKind::Up, 21.0 * t), (EdgeKind::Down, 26.0 * t)]);
        let w = SearchWindow {
            lower_s: 0.0,
            upper_s: 25.0 * t,
        };
        assert_eq!(compute_offsets(&i, w, &e).start, EdgeOffset::Undefined);

        // leading input edges are found before the reference edge
        let e = events(&[(EdgeKind::Down, 8.0 * t), (EdgeKind::Up, 18.0 * t)]);
        let o = compute_offsets(&i, open, &e);
        assert_eq!((o.start.sign(), o.end.sign()), (-1, -1));
    }

    #[test]
    fn direction_rule() {
        use EdgeOffset::*;
        let pair = |start, end| OffsetPair { start, end };
        assert_eq!(decide_direction(&pair(Signed(0.1), Signed(0.2))), 1);
        assert_eq!(decide_direction(&pair(Signed(-0.1), Neutral)), -1);
        assert_eq!(decide_direction(&pair(Undefined, Signed(-0.1))), -1);
        assert_eq!(decide_direction(&pair(Signed(0.1), Signed(-0.1))), 0);
        assert_eq!(decide_direction(&pair(Neutral, Undefined)), 0);
        assert_eq!(decide_direction(&pair(Neutral, Neutral)), 0);
    }

    #[test]
    fn attribution_examples() {
        let ivs = [
            interval(0, 0.0, 1.0),
            interval(1, 2.0, 3.0),
            interval(2, 4.0, 5.0),
            interval(3, 6.0, 7.0),
        ];
        let e = events(&[(EdgeKind::Down, 1.0)]);
        assert_eq!(attribute_and_count(&ivs, &e), vec![0, 1, 0, 0]);
        let e = events(&[(EdgeKind::Down, 6.2), (EdgeKind::Up, 6.8)]);
        assert_eq!(attribute_and_count(&ivs, &e), vec![0, 0, 0, 2]);
        let e = events(&[
            (EdgeKind::Down, -1.0),
            (EdgeKind::Up, 1.5),
            (EdgeKind::Down, 9.0),
        ]);
        assert_eq!(attribute_and_count(&ivs, &e), vec![1, 1, 0, 1]);
        assert!(attribute_and_count(&[], &e).is_empty());
    }

    fn traverse(p: &SequencePattern, v: f64, phase_frac: f64, rate: f64) -> FrameStream {
        let w = p.geometry().width_mm;
        let motion = MotionProfile::traverse(p, v, 2.0 * w).unwrap();
        let mut s = SamplingModel::new(rate);
        s.phase_s = phase_frac / rate;
        simulate(p, &motion, &s).unwrap()
    }

    #[test]
    fn full_traverse_counts_six_transitions_each_way() {
        let p = phase(3, 2.0);
        for k in 0..20 {
            let f = k as f64 / 20.0;
            let fwd = estimate_motion(&traverse(&p, 60.0, f, 60.0), &p).unwrap();
            assert_eq!(fwd.cycles.iter().map(|c| c.transitions).sum::<usize>(), 6);
            assert_eq!(fwd.displacement_mm, 24.0);
            assert!(fwd
                .cycles
                .iter()
                .all(|c| c.sigma == 1 && c.strictly_correct(1)));

            let rev = estimate_motion(&traverse(&p, -60.0, f, 60.0), &p).unwrap();
            assert_eq!(rev.displacement_mm, -24.0);
            assert!(rev.cycles.iter().all(|c| c.sigma == -1));
        }
    }

    #[test]
    fn stationary_slider_has_no_displacement() {
        let p = phase(3, 2.0);
        let motion = MotionProfile::constant(1.0, 0.0, 2.0).unwrap();
        let est = estimate_motion(
            &simulate(&p, &motion, &SamplingModel::new(60.0)).unwrap(),
            &p,
        )
        .unwrap();
        assert_eq!(est.displacement_mm, 0.0);
        assert!(est.cycles.iter().all(|c| c.sigma == 0));
    }

    #[test]
    fn time_reversed_stream_flips_sign() {
        let p = phase(3, 2.5);
        let s = traverse(&p, 90.0, 0.3, 90.0);
        let fwd = estimate_motion(&s, &p).unwrap();
        let rev = estimate_motion(&s.time_reversed(), &p).unwrap();
        assert_eq!(fwd.displacement_mm, -rev.displacement_mm);
    }

    #[test]
    fn aligned_pattern_is_rejected() {
        let p = SequencePattern::build(
            &Configuration::Aligned {
                code: "10".parse().unwrap(),
            },
            &GeometrySpec::with_width(2.0),
        )
        .unwrap();
        let s = FrameStream::new(vec![Frame {
            t_s: 0.0,
            ref_on: false,
            input_on: false,
        }])
        .unwrap();
        assert!(matches!(
            estimate_motion(&s, &p),
            Err(Error::NotPhaseShifted)
        ));
    }

    #[test]
    fn displacement_equals_recomputed_sum() {
        let p = phase(4, 1.5);
        for v in [30.0, 90.0, 150.0, 250.0] {
            let est = estimate_motion(&traverse(&p, v, 0.37, 60.0), &p).unwrap();
            assert_eq!(
                est.displacement_mm,
                MotionEstimate::accumulate(&est.cycles, est.resolution_mm)
            );
        }
    }
}
