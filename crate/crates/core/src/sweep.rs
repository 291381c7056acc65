//! Monte Carlo sweeps over configuration × rate × width × speed.
//!
//! Every trial gets its own seed: trial `k` (cells in plan order, trials
//! within a cell) uses output `k` of a SplitMix64 stream seeded with the plan
//! seed. Results are therefore identical between the sequential and parallel
//! runners and independent of thread count.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aligned::{decode, DecodeOutcome};
use crate::codebook::{Code, Codebook, CodebookEntry, Direction, DirectionSemantics};
use crate::error::{Error, Result};
use crate::pattern::{ConfigKind, Configuration, GeometrySpec, SequencePattern};
use crate::phase::estimate_motion;
use crate::sim::{simulate, MotionProfile, SamplingModel, DEFAULT_DETECT_THRESHOLD};

pub const DEFAULT_SEED: u64 = 0x5EED_D070;
pub const DEFAULT_CODE: &str = "100011";
pub const DEFAULT_CYCLES: u32 = 3;
const PLANTED_COMMAND: &str = "planted";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Output `index` of a SplitMix64 generator seeded with `seed`.
pub fn splitmix64(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSampling {
    /// Uniform phase in [0, T_s) drawn from each trial's seed.
    Random { seed: u64 },
    /// Trial `t` of `n` uses phase `(t + 0.5)/n · T_s`.
    Stratified,
}

impl Default for PhaseSampling {
    fn default() -> Self {
        PhaseSampling::Random { seed: DEFAULT_SEED }
    }
}

impl PhaseSampling {
    fn seed(self) -> u64 {
        match self {
            PhaseSampling::Random { seed } => seed,
            PhaseSampling::Stratified => DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepPlan {
    pub configs: Vec<ConfigKind>,
    pub rates_hz: Vec<f64>,
    pub widths_mm: Vec<f64>,
    pub speeds_mm_per_s: Vec<f64>,
    pub trials: u32,
    pub phases: PhaseSampling,
    pub jitter_std_s: f64,
    pub detect_threshold: f64,
    /// Code planted in aligned trials.
    pub code: Code,
    /// Reference cycles per phase-shifted trial.
    pub cycles: u32,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            configs: vec![ConfigKind::Aligned, ConfigKind::PhaseShifted],
            rates_hz: vec![60.0, 90.0],
            widths_mm: vec![1.5, 2.0, 2.5, 3.0],
            speeds_mm_per_s: (1..=10).map(|i| 20.0 * i as f64).collect(),
            trials: 10,
            phases: PhaseSampling::default(),
            jitter_std_s: 0.0,
            detect_threshold: DEFAULT_DETECT_THRESHOLD,
            code: DEFAULT_CODE.parse().expect("valid default code"),
            cycles: DEFAULT_CYCLES,
        }
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPlan(m));
        if self.configs.is_empty()
            || self.rates_hz.is_empty()
            || self.widths_mm.is_empty()
            || self.speeds_mm_per_s.is_empty()
        {
            return bad("every axis needs at least one value".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.cycles == 0 {
            return bad("cycles must be positive".into());
        }
        for (name, values) in [
            ("rate", &self.rates_hz),
            ("width", &self.widths_mm),
            ("speed", &self.speeds_mm_per_s),
        ] {
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return bad(format!("{name} {v} must be positive"));
            }
        }
        if !(self.jitter_std_s >= 0.0 && self.jitter_std_s.is_finite()) {
            return bad("jitter must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.detect_threshold) {
            return bad(format!(
                "threshold {} outside [0, 1)",
                self.detect_threshold
            ));
        }
        Ok(())
    }

    fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &config in &self.configs {
            for &rate_hz in &self.rates_hz {
                for &width_mm in &self.widths_mm {
                    for &speed in &self.speeds_mm_per_s {
                        out.push(CellKey {
                            config,
                            rate_hz,
                            width_mm,
                            speed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct CellKey {
    config: ConfigKind,
    rate_hz: f64,
    width_mm: f64,
    speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub config: ConfigKind,
    pub rate_hz: f64,
    pub width_mm: f64,
    pub speed_mm_per_s: f64,
    /// Normalized speed `v / (w·f_s)`.
    pub s: f64,
    pub accuracy: f64,
    /// Decisions behind `accuracy`: trials (aligned) or trials × cycles (phase-shifted).
    pub n: u64,
}

impl AccuracyCell {
    pub fn new(
        config: ConfigKind,
        rate_hz: f64,
        width_mm: f64,
        speed_mm_per_s: f64,
        correct: u64,
        n: u64,
    ) -> Self {
        AccuracyCell {
            config,
            rate_hz,
            width_mm,
            speed_mm_per_s,
            s: speed_mm_per_s / (width_mm * rate_hz),
            accuracy: correct as f64 / n as f64,
            n,
        }
    }
}

pub type RowKey = (ConfigKind, f64, f64);

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyMap {
    pub cells: Vec<AccuracyCell>,
}

impl AccuracyMap {
    /// Cells grouped by (config, rate, width), each row sorted by speed.
    pub fn rows(&self) -> Vec<(RowKey, Vec<&AccuracyCell>)> {
        let mut groups: BTreeMap<(ConfigKind, u64, u64), Vec<&AccuracyCell>> = BTreeMap::new();
        for c in &self.cells {
            groups
                .entry((c.config, c.rate_hz.to_bits(), c.width_mm.to_bits()))
                .or_default()
                .push(c);
        }
        groups
            .into_iter()
            .map(|((k, f, w), mut row)| {
                row.sort_by(|a, b| a.speed_mm_per_s.total_cmp(&b.speed_mm_per_s));
                ((k, f64::from_bits(f), f64::from_bits(w)), row)
            })
            .collect()
    }

    /// Mean accuracy per bin of width `bin` in `s`, for one configuration.
    /// Returns `(bin lower edge, mean accuracy, cells)` sorted by `s`.
    pub fn binned_accuracy(&self, config: ConfigKind, bin: f64) -> Vec<(f64, f64, usize)> {
        let mut bins: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
        for c in self.cells.iter().filter(|c| c.config == config) {
            let e = bins.entry((c.s / bin).floor() as i64).or_default();
            e.0 += c.accuracy;
            e.1 += 1;
        }
        bins.into_iter()
            .map(|(i, (sum, n))| (i as f64 * bin, sum / n as f64, n))
            .collect()
    }
}

/// Largest tested speed in a row at which accuracy is still exactly 1 with
/// every slower speed also at 1.
pub fn largest_perfect_speed(row: &[&AccuracyCell]) -> Option<f64> {
    row.iter()
        .take_while(|c| c.accuracy == 1.0)
        .last()
        .map(|c| c.speed_mm_per_s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Execution::Parallel;
        #[cfg(not(feature = "parallel"))]
        Execution::Sequential
    }
}

struct Prepared {
    pattern: SequencePattern,
    codebook: Option<Codebook>,
}

fn prepare(plan: &SweepPlan, key: &CellKey) -> Result<Prepared> {
    let config = match key.config {
        ConfigKind::Aligned => Configuration::Aligned {
            code: plan.code.clone(),
        },
        ConfigKind::PhaseShifted => Configuration::PhaseShifted {
            cycles: plan.cycles,
        },
    };
    let pattern = SequencePattern::build(&config, &GeometrySpec::with_width(key.width_mm))?;
    let codebook = match key.config {
        ConfigKind::Aligned => Some(Codebook::new(
            plan.code.len(),
            false,
            vec![CodebookEntry {
                code: plan.code.clone(),
                command: PLANTED_COMMAND.into(),
                semantics: DirectionSemantics::Unidirectional,
            }],
        )?),
        ConfigKind::PhaseShifted => None,
    };
    Ok(Prepared { pattern, codebook })
}

/// Returns (correct, decisions) for one trial.
fn run_trial(
    plan: &SweepPlan,
    key: &CellKey,
    prep: &Prepared,
    trial: u32,
    seed: u64,
) -> Result<(u64, u64)> {
    let period = 1.0 / key.rate_hz;
    let frac = match plan.phases {
        PhaseSampling::Random { .. } => ChaCha8Rng::seed_from_u64(seed).random::<f64>(),
        PhaseSampling::Stratified => (trial as f64 + 0.5) / plan.trials as f64,
    };
    let sampling = SamplingModel {
        rate_hz: key.rate_hz,
        phase_s: (frac * period).min(period * (1.0 - f64::EPSILON)),
        jitter_std_s: plan.jitter_std_s,
        detect_threshold: plan.detect_threshold,
        seed,
    };
    let motion = MotionProfile::traverse(&prep.pattern, key.speed, 2.0 * key.width_mm)?;
    let stream = simulate(&prep.pattern, &motion, &sampling)?;
    match &prep.codebook {
        Some(book) => {
            let d = decode(&stream, book);
            let ok = matches!(&d.outcome, DecodeOutcome::Command { command, direction: Direction::Forward } if command == PLANTED_COMMAND)
                && d.bits == (&plan.code).into();
            Ok((ok as u64, 1))
        }
        None => {
            let est = estimate_motion(&stream, &prep.pattern)?;
            let n = plan.cycles as usize;
            let ok = est
                .cycles
                .iter()
                .take(n)
                .filter(|c| c.strictly_correct(1))
                .count();
            Ok((ok as u64, n as u64))
        }
    }
}

pub fn run_sweep(plan: &SweepPlan) -> Result<AccuracyMap> {
    run_sweep_with(plan, Execution::default())
}

pub fn run_sweep_with(plan: &SweepPlan, exec: Execution) -> Result<AccuracyMap> {
    plan.validate()?;
    let keys = plan.cells();
    let prepared = keys
        .iter()
        .map(|k| prepare(plan, k))
        .collect::<Result<Vec<_>>>()?;
    let trials = plan.trials as u64;
    let seed = plan.phases.seed();
    let jobs: Vec<(usize, u32)> = (0..keys.len())
        .flat_map(|c| (0..plan.trials).map(move |t| (c, t)))
        .collect();
    let job = |&(c, t): &(usize, u32)| {
        run_trial(
            plan,
            &keys[c],
            &prepared[c],
            t,
            splitmix64(seed, c as u64 * trials + t as u64),
        )
    };
    let results: Vec<(u64, u64)> = match exec {
        Execution::Sequential => jobs.iter().map(job).collect::<Result<_>>()?,
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            jobs.par_iter().map(job).collect::<Result<_>>()?
        }
    };
    let cells = keys
        .iter()
        .zip(results.chunks(plan.trials as usize))
        .map(|(k, chunk)| {
            let (ok, n) = chunk.iter().fold((0, 0), |a, r| (a.0 + r.0, a.1 + r.1));
            AccuracyCell::new(k.config, k.rate_hz, k.width_mm, k.speed, ok, n)
        })
        .collect();
    Ok(AccuracyMap { cells })
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    config: ConfigKind,
    f_s: f64,
    w: f64,
    v: f64,
    s: f64,
    accuracy: f64,
    n: u64,
}

pub fn write_csv<W: Write>(map: &AccuracyMap, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    for c in &map.cells {
        wr.serialize(CsvRow {
            config: c.config,
            f_s: c.rate_hz,
            w: c.width_mm,
            v: c.speed_mm_per_s,
            s: c.s,
            accuracy: c.accuracy,
            n: c.n,
        })?;
    }
    wr.flush()?;
    Ok(())
}

pub fn to_csv_string(map: &AccuracyMap) -> String {
    let mut buf = Vec::new();
    write_csv(map, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

pub fn read_csv<R: Read>(input: R) -> Result<AccuracyMap> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["config", "f_s", "w", "v", "s", "accuracy", "n"] {
        return Err(Error::MalformedExport(format!(
            "unexpected csv header {:?}",
            headers
        )));
    }
    let mut cells = Vec::new();
    for row in rd.deserialize() {
        let r: CsvRow = row?;
        cells.push(AccuracyCell {
            config: r.config,
            rate_hz: r.f_s,
            width_mm: r.w,
            speed_mm_per_s: r.v,
            s: r.s,
            accuracy: r.accuracy,
            n: r.n,
        });
    }
    Ok(AccuracyMap { cells })
}
