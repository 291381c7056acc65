//! Parameter selection: the sampling-limited speed bound, width selection,
//! code length and travel planning, and calibration of the normalized-speed
//! threshold from accuracy maps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codebook::{allocate, Codebook};
use crate::error::{Error, Result};
use crate::pattern::ConfigKind;
use crate::sweep::{AccuracyCell, AccuracyMap};

/// Normalized speed at which accuracy drops to 90% (aligned).
pub const ALPHA_ALIGNED: f64 = 0.73;
/// Normalized speed at which accuracy drops to 90% (phase-shifted).
pub const ALPHA_PHASE_SHIFTED: f64 = 0.72;

pub const DEFAULT_V_MAX_MM_PER_S: f64 = 130.0;
pub const DEFAULT_CANDIDATE_WIDTHS_MM: [f64; 4] = [1.5, 2.0, 2.5, 3.0];
pub const DEFAULT_TRAVEL_MM: f64 = 40.0;

/// Speed above which the tabulated default widths no longer apply.
const TABLE_V_MAX: f64 = 130.0;
/// Accuracy level that defines the calibration crossing.
const S90_LEVEL: f64 = 0.90;
/// Cells narrower than this are left out of the alpha median.
const MIN_CALIBRATION_WIDTH_MM: f64 = 2.0;
const EPS: f64 = 1e-9;

pub fn alpha(kind: ConfigKind) -> f64 {
    match kind {
        ConfigKind::Aligned => ALPHA_ALIGNED,
        ConfigKind::PhaseShifted => ALPHA_PHASE_SHIFTED,
    }
}

/// Highest speed at which every reference pulse still spans one frame: `w·f_s`.
pub fn speed_bound(width_mm: f64, rate_hz: f64) -> f64 {
    width_mm * rate_hz
}

/// `v / (w·f_s)`
pub fn normalized_speed(v_mm_per_s: f64, width_mm: f64, rate_hz: f64) -> Result<f64> {
    if !(width_mm > 0.0 && width_mm.is_finite()) {
        return Err(Error::InvalidDimension {
            name: "width_mm",
            value: width_mm,
        });
    }
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "rate {rate_hz} Hz must be positive"
        )));
    }
    Ok(v_mm_per_s / (width_mm * rate_hz))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleMode {
    /// Smallest width with `v_max ≤ α·w·f_s`.
    Alpha,
    /// Tabulated widths for 60/90 Hz up to 130 mm/s, otherwise `Alpha`.
    #[default]
    PaperDefaults,
}

impl RuleMode {
    pub fn other(self) -> RuleMode {
        match self {
            RuleMode::Alpha => RuleMode::PaperDefaults,
            RuleMode::PaperDefaults => RuleMode::Alpha,
        }
    }
}

fn table_width(v_max: f64, rate_hz: f64, kind: ConfigKind) -> Option<f64> {
    if v_max > TABLE_V_MAX {
        return None;
    }
    let is = |hz: f64| (rate_hz - hz).abs() < EPS;
    match kind {
        _ if is(60.0) => Some(3.0),
        ConfigKind::Aligned if is(90.0) => Some(2.0),
        ConfigKind::PhaseShifted if is(90.0) => Some(2.5),
        _ => None,
    }
}

/// Smallest candidate width satisfying the selected rule.
pub fn min_width(
    v_max: f64,
    rate_hz: f64,
    kind: ConfigKind,
    candidates: &[f64],
    mode: RuleMode,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::InvalidSpec("no candidate widths".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let infeasible = || Error::NoFeasibleWidth { v_max, rate_hz };
    if mode == RuleMode::PaperDefaults {
        if let Some(floor) = table_width(v_max, rate_hz, kind) {
            return sorted
                .into_iter()
                .find(|&w| w >= floor - EPS)
                .ok_or_else(infeasible);
        }
    }
    sorted
        .into_iter()
        .find(|&w| v_max <= alpha(kind) * w * rate_hz)
        .ok_or_else(infeasible)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceClass {
    Smartphone,
    Tablet,
    Touchpad,
    Smartwatch,
    Custom,
}

impl DeviceClass {
    /// Default touch frame rate; `Custom` has none.
    pub fn default_rate_hz(self) -> Option<f64> {
        match self {
            DeviceClass::Smartphone | DeviceClass::Tablet | DeviceClass::Smartwatch => Some(60.0),
            DeviceClass::Touchpad => Some(90.0),
            DeviceClass::Custom => None,
        }
    }
}

/// Interaction types and the configuration each maps to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionType {
    OneShot,
    Toggle,
    Directional,
    Scalar,
    Cyclic,
}

impl InteractionType {
    pub fn config(self) -> ConfigKind {
        match self {
            InteractionType::OneShot | InteractionType::Toggle | InteractionType::Directional => {
                ConfigKind::Aligned
            }
            InteractionType::Scalar | InteractionType::Cyclic => ConfigKind::PhaseShifted,
        }
    }

    pub fn bidirectional(self) -> bool {
        matches!(self, InteractionType::Toggle | InteractionType::Directional)
    }

    /// Commands needed by one control of this type: a toggle is one reversible
    /// pair, cross keys are two (one per axis).
    pub fn default_commands(self) -> usize {
        match self {
            InteractionType::Directional => 2,
            _ => 1,
        }
    }
}

fn default_v_max() -> f64 {
    DEFAULT_V_MAX_MM_PER_S
}

fn default_true() -> bool {
    true
}

/// What the designer wants to build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub device_class: DeviceClass,
    /// Overrides the device's default frame rate.
    #[serde(default)]
    pub rate_hz: Option<f64>,
    #[serde(default = "default_v_max")]
    pub v_max_mm_per_s: f64,
    pub config: ConfigKind,
    #[serde(default)]
    pub n_commands: Option<usize>,
    #[serde(default)]
    pub travel_mm: Option<f64>,
    #[serde(default)]
    pub bidirectional: bool,
    #[serde(default = "default_true")]
    pub prefix_free: bool,
    #[serde(default)]
    pub rule_mode: RuleMode,
    #[serde(default)]
    pub candidates_mm: Option<Vec<f64>>,
}

impl DesignSpec {
    pub fn new(device_class: DeviceClass, config: ConfigKind) -> Self {
        DesignSpec {
            device_class,
            rate_hz: None,
            v_max_mm_per_s: DEFAULT_V_MAX_MM_PER_S,
            config,
            n_commands: None,
            travel_mm: None,
            bidirectional: false,
            prefix_free: true,
            rule_mode: RuleMode::default(),
            candidates_mm: None,
        }
    }

    pub fn for_interaction(device_class: DeviceClass, interaction: InteractionType) -> Self {
        let mut spec = DesignSpec::new(device_class, interaction.config());
        spec.bidirectional = interaction.bidirectional();
        if interaction.config() == ConfigKind::Aligned {
            spec.n_commands = Some(interaction.default_commands());
        }
        spec
    }

    pub fn rate(&self) -> Result<f64> {
        let rate = self
            .rate_hz
            .or(self.device_class.default_rate_hz())
            .ok_or_else(|| Error::InvalidSpec("custom devices need rate_hz".into()))?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "rate {rate} Hz must be positive"
            )));
        }
        Ok(rate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ConfigKind,
    pub rate_hz: f64,
    pub v_max_mm_per_s: f64,
    pub rule_mode: RuleMode,
    pub alpha: f64,
    pub min_width_mm: f64,
    pub chosen_width_mm: f64,
    /// Width the other rule mode would pick, if it finds one.
    pub alternate_width_mm: Option<f64>,
    pub spacing_mm: f64,
    pub l_seq_mm: f64,
    pub normalized_speed: f64,
    pub feasible: bool,
    pub code_length: Option<usize>,
    pub codebook: Option<Codebook>,
    pub cycles: Option<u32>,
    pub resolution_mm: Option<f64>,
    pub travel_mm: Option<f64>,
    pub advisories: Vec<String>,
}

const ADVISORY_ONE_AT_A_TIME: &str =
    "Mechanisms that share the two footprints must be actuated one at a time; simultaneous motion mixes their sequences.";
const ADVISORY_FOOTPRINTS: &str =
    "Keep the footprints clear of system navigation areas and frequently touched app regions.";

/// Run the parameter-selection workflow for `spec`.
pub fn plan(spec: &DesignSpec) -> Result<ValidationReport> {
    let rate = spec.rate()?;
    let v_max = spec.v_max_mm_per_s;
    if !(v_max > 0.0 && v_max.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "v_max {v_max} must be positive"
        )));
    }
    let candidates = spec
        .candidates_mm
        .clone()
        .unwrap_or_else(|| DEFAULT_CANDIDATE_WIDTHS_MM.to_vec());
    let kind = spec.config;
    let a = alpha(kind);

    let width = min_width(v_max, rate, kind, &candidates, spec.rule_mode)?;
    let alternate = min_width(v_max, rate, kind, &candidates, spec.rule_mode.other()).ok();
    let spacing = 3.0 * width;
    let l_seq = width + spacing;
    let s = normalized_speed(v_max, width, rate)?;
    let feasible = v_max <= a * width * rate;

    let mut report = ValidationReport {
        config: kind,
        rate_hz: rate,
        v_max_mm_per_s: v_max,
        rule_mode: spec.rule_mode,
        alpha: a,
        min_width_mm: width,
        chosen_width_mm: width,
        alternate_width_mm: alternate,
        spacing_mm: spacing,
        l_seq_mm: l_seq,
        normalized_speed: s,
        feasible,
        code_length: None,
        codebook: None,
        cycles: None,
        resolution_mm: None,
        travel_mm: None,
        advisories: Vec::new(),
    };

    match kind {
        ConfigKind::Aligned => {
            let n = spec.n_commands.unwrap_or(1);
            let book = allocate(n, spec.bidirectional, spec.prefix_free)?;
            report.code_length = Some(book.length());
            report.codebook = Some(book);
        }
        ConfigKind::PhaseShifted => {
            let travel = spec.travel_mm.unwrap_or(DEFAULT_TRAVEL_MM);
            if !(travel > 0.0 && travel.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "travel {travel} mm must be positive"
                )));
            }
            let resolution = l_seq / 2.0;
            let steps = (travel / resolution - EPS).ceil().max(1.0);
            report.resolution_mm = Some(resolution);
            report.travel_mm = Some(steps * resolution);
            report.cycles = Some((steps / 2.0).ceil() as u32);
        }
    }

    if !feasible {
        report.advisories.push(format!(
            "Normalized speed {s:.3} exceeds alpha {a} at w = {width} mm; expect accuracy below 90% near v_max."
        ));
    }
    match alternate {
        Some(alt) if (alt - width).abs() > EPS => report.advisories.push(format!(
            "Rule modes disagree: {:?} selects {alt} mm, {:?} selects {width} mm.",
            spec.rule_mode.other(),
            spec.rule_mode
        )),
        None => report.advisories.push(format!(
            "Rule modes disagree: {:?} finds no feasible width.",
            spec.rule_mode.other()
        )),
        _ => {}
    }
    report.advisories.push(ADVISORY_ONE_AT_A_TIME.into());
    report.advisories.push(ADVISORY_FOOTPRINTS.into());
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct S90Cell {
    pub config: ConfigKind,
    pub rate_hz: f64,
    pub width_mm: f64,
    pub s90: f64,
    /// Accuracy never fell below 90% in the tested range; `s90` is the largest tested s.
    pub censored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub cells: Vec<S90Cell>,
    /// Median s90 per configuration over uncensored cells with w ≥ 2 mm.
    pub alpha: BTreeMap<ConfigKind, f64>,
}

impl CalibrationResult {
    pub fn alpha(&self, kind: ConfigKind) -> Option<f64> {
        self.alpha.get(&kind).copied()
    }
}

/// First downward crossing of 90% along increasing `s`, linearly interpolated.
/// Returns `(s90, censored)`.
pub fn s90_crossing(points: &[(f64, f64)]) -> (f64, bool) {
    if points[0].1 < S90_LEVEL {
        return (points[0].0, false);
    }
    for w in points.windows(2) {
        let ((s0, a0), (s1, a1)) = (w[0], w[1]);
        if a0 >= S90_LEVEL && a1 < S90_LEVEL {
            return (s0 + (a0 - S90_LEVEL) / (a0 - a1) * (s1 - s0), false);
        }
    }
    (points[points.len() - 1].0, true)
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    })
}

/// Per-row s90 and the pooled alpha per configuration.
pub fn extract_s90(map: &AccuracyMap) -> Result<CalibrationResult> {
    if map.cells.is_empty() {
        return Err(Error::EmptyMap);
    }
    let mut cells = Vec::new();
    for ((config, rate_hz, width_mm), row) in map.rows() {
        if row.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "row {config:?} {rate_hz} Hz {width_mm} mm needs at least two speeds"
            )));
        }
        let points: Vec<(f64, f64)> = row
            .iter()
            .map(|c: &&AccuracyCell| (c.s, c.accuracy))
            .collect();
        let (s90, censored) = s90_crossing(&points);
        cells.push(S90Cell {
            config,
            rate_hz,
            width_mm,
            s90,
            censored,
        });
    }
    let mut alpha = BTreeMap::new();
    for kind in [ConfigKind::Aligned, ConfigKind::PhaseShifted] {
        let included = cells
            .iter()
            .filter(|c| {
                c.config == kind && !c.censored && c.width_mm >= MIN_CALIBRATION_WIDTH_MM - EPS
            })
            .map(|c| c.s90)
            .collect();
        if let Some(m) = median(included) {
            alpha.insert(kind, m);
        }
    }
    Ok(CalibrationResult { cells, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_examples() {
        assert_eq!(speed_bound(2.5, 90.0), 225.0);
        assert_eq!(speed_bound(3.0, 90.0), 270.0);
        assert_eq!(speed_bound(1.0, 60.0), 60.0);
    }

    #[test]
    fn normalized_speed_examples() {
        assert!((normalized_speed(130.0, 3.0, 60.0).unwrap() - 0.7222).abs() < 1e-4);
        assert_eq!(normalized_speed(180.0, 3.0, 60.0).unwrap(), 1.0);
        assert!((normalized_speed(100.0, 2.0, 90.0).unwrap() - 0.5556).abs() < 1e-4);
        assert!(normalized_speed(1.0, 0.0, 60.0).is_err());
        assert!(normalized_speed(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn min_width_examples() {
        let c = DEFAULT_CANDIDATE_WIDTHS_MM;
        assert_eq!(
            min_width(
                130.0,
                60.0,
                ConfigKind::Aligned,
                &c,
                RuleMode::PaperDefaults
            )
            .unwrap(),
            3.0
        );
        assert_eq!(
            min_width(
                130.0,
                90.0,
                ConfigKind::PhaseShifted,
                &c,
                RuleMode::PaperDefaults
            )
            .unwrap(),
            2.5
        );
        assert_eq!(
            min_width(130.0, 90.0, ConfigKind::Aligned, &c, RuleMode::Alpha).unwrap(),
            2.0
        );
        assert!(matches!(
            min_width(
                500.0,
                60.0,
                ConfigKind::Aligned,
                &c,
                RuleMode::PaperDefaults
            ),
            Err(Error::NoFeasibleWidth { .. })
        ));
        // 130 / (60 · 0.72) = 3.009 > 3.0
        assert!(min_width(130.0, 60.0, ConfigKind::PhaseShifted, &c, RuleMode::Alpha).is_err());
        assert!(min_width(130.0, 60.0, ConfigKind::Aligned, &[], RuleMode::Alpha).is_err());
    }

    #[test]
    fn plan_smartphone_bidirectional() {
        let mut spec = DesignSpec::new(DeviceClass::Smartphone, ConfigKind::Aligned);
        spec.n_commands = Some(5);
        spec.bidirectional = true;
        let r = plan(&spec).unwrap();
        assert_eq!(r.code_length, Some(4));
        assert_eq!(r.chosen_width_mm, 3.0);
        assert_eq!(r.spacing_mm, 9.0);
        assert!(r.feasible);
        assert_eq!(r.codebook.unwrap().entries().len(), 5);
    }

    #[test]
    fn plan_touchpad_travel_rounding() {
        let mut spec = DesignSpec::new(DeviceClass::Touchpad, ConfigKind::PhaseShifted);
        spec.travel_mm = Some(48.0);
        let r = plan(&spec).unwrap();
        assert_eq!(r.chosen_width_mm, 2.5);
        assert_eq!(r.resolution_mm, Some(5.0));
        assert_eq!(r.cycles, Some(5));
        assert_eq!(r.travel_mm, Some(50.0));
    }

    #[test]
    fn plan_rejects_unreachable_speed() {
        let mut spec = DesignSpec::new(DeviceClass::Smartphone, ConfigKind::Aligned);
        spec.v_max_mm_per_s = 500.0;
        assert!(matches!(plan(&spec), Err(Error::NoFeasibleWidth { .. })));
        let spec = DesignSpec::new(DeviceClass::Custom, ConfigKind::Aligned);
        assert!(matches!(plan(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn plan_surfaces_mode_disagreement() {
        let spec = DesignSpec::new(DeviceClass::Smartphone, ConfigKind::PhaseShifted);
        let r = plan(&spec).unwrap();
        assert_eq!(r.chosen_width_mm, 3.0);
        assert!(!r.feasible);
        assert_eq!(r.alternate_width_mm, None);
        assert!(r.advisories.iter().any(|a| a.contains("disagree")));
    }

    #[test]
    fn plan_picks_minimum_feasible_candidate() {
        for v in [40.0, 80.0, 100.0, 120.0, 130.0, 150.0, 190.0] {
            for rate in [60.0, 90.0, 120.0] {
                let mut spec = DesignSpec::new(DeviceClass::Custom, ConfigKind::Aligned);
                spec.rate_hz = Some(rate);
                spec.v_max_mm_per_s = v;
                spec.rule_mode = RuleMode::Alpha;
                if let Ok(r) = plan(&spec) {
                    let smaller_ok = DEFAULT_CANDIDATE_WIDTHS_MM
                        .iter()
                        .any(|&w| w < r.chosen_width_mm && v <= ALPHA_ALIGNED * w * rate);
                    assert!(!smaller_ok);
                    assert!(r.feasible);
                }
            }
        }
    }

    #[test]
    fn s90_examples() {
        assert!((s90_crossing(&[(0.6, 1.0), (0.8, 0.8)]).0 - 0.7).abs() < 1e-12);
        assert_eq!(s90_crossing(&[(0.2, 1.0), (0.4, 1.0)]), (0.4, true));
        // first crossing wins even if accuracy recovers later
        assert!(
            (s90_crossing(&[(0.2, 1.0), (0.4, 0.8), (0.6, 1.0), (0.8, 0.5)]).0 - 0.3).abs() < 1e-12
        );
    }

    #[test]
    fn spec_json_is_strict() {
        let ok = r#"{"device_class":"smartphone","config":"aligned","n_commands":3}"#;
        let spec: DesignSpec = serde_json::from_str(ok).unwrap();
        assert_eq!(spec.v_max_mm_per_s, 130.0);
        let bad = r#"{"device_class":"smartphone","config":"aligned","colour":"red"}"#;
        assert!(serde_json::from_str::<DesignSpec>(bad).is_err());
    }
}
