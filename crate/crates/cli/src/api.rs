//! Request handling shared by the command line and the HTTP service.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use duotouch_core::aligned::{decode as decode_aligned, decode_incremental, DEFAULT_TIMEOUT_S};
use duotouch_core::codebook::{Code, Codebook};
use duotouch_core::export::{layout, to_dxf, to_svg};
use duotouch_core::pattern::{Configuration, GeometrySpec, SequencePattern};
use duotouch_core::phase::estimate_motion;
use duotouch_core::rules::{plan, DesignSpec, ValidationReport};
use duotouch_core::sim::{Frame, FrameStream};
use duotouch_core::sweep::{run_sweep, AccuracyMap, SweepPlan};
use duotouch_core::Error;

/// Upper bound on simulated trials per sweep request.
pub const MAX_SWEEP_TRIALS: u64 = 2_000_000;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    /// Body is not valid JSON or does not fit the request schema.
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Domain(#[from] Error),
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Schema(_) => "InvalidRequest",
            ApiError::Domain(e) => e.code(),
        }
    }

    pub fn body(&self) -> String {
        let v = serde_json::json!({ "code": self.code(), "message": self.to_string() });
        to_json(&v)
    }
}

pub type ApiResult<T> = Result<T, ApiError>;

pub fn parse<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::Schema(e.to_string()))
}

/// Canonical output form: pretty JSON plus a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Configuration as sent by clients; converted after parsing so bad codes
/// surface as domain errors.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConfigRequest {
    Aligned { code: String },
    PhaseShifted { cycles: u32 },
}

impl ConfigRequest {
    pub fn resolve(&self) -> Result<Configuration, Error> {
        Ok(match self {
            ConfigRequest::Aligned { code } => Configuration::Aligned {
                code: code.parse::<Code>()?,
            },
            ConfigRequest::PhaseShifted { cycles } => {
                Configuration::PhaseShifted { cycles: *cycles }
            }
        })
    }
}

/// Either a design spec, or an explicit configuration with a geometry
/// (or just a width).
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternRequest {
    #[serde(default)]
    pub spec: Option<DesignSpec>,
    #[serde(default)]
    pub config: Option<ConfigRequest>,
    #[serde(default)]
    pub geometry: Option<GeometrySpec>,
    #[serde(default)]
    pub width_mm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedPattern {
    pub name: String,
    pub pattern: SequencePattern,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Design {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
    pub patterns: Vec<NamedPattern>,
}

pub fn validate(spec: &DesignSpec) -> ApiResult<ValidationReport> {
    Ok(plan(spec)?)
}

/// Plan a spec and build its patterns: one per command for aligned designs,
/// a single slider otherwise.
pub fn design(spec: &DesignSpec) -> ApiResult<Design> {
    let report = plan(spec)?;
    let geometry = GeometrySpec::with_width(report.chosen_width_mm);
    let patterns = match (&report.codebook, report.cycles) {
        (Some(book), _) => book
            .entries()
            .iter()
            .map(|e| {
                let config = Configuration::Aligned {
                    code: e.code.clone(),
                };
                Ok(NamedPattern {
                    name: e.command.clone(),
                    pattern: SequencePattern::build(&config, &geometry)?,
                })
            })
            .collect::<Result<_, Error>>()?,
        (None, Some(cycles)) => {
            let pattern =
                SequencePattern::build(&Configuration::PhaseShifted { cycles }, &geometry)?;
            vec![NamedPattern {
                name: "slider".into(),
                pattern,
            }]
        }
        (None, None) => unreachable!("a report carries a codebook or a cycle count"),
    };
    Ok(Design {
        report: Some(report),
        patterns,
    })
}

pub fn pattern(req: &PatternRequest) -> ApiResult<Design> {
    match (&req.spec, &req.config) {
        (Some(spec), None) if req.geometry.is_none() && req.width_mm.is_none() => design(spec),
        (None, Some(config)) => {
            let geometry = match (&req.geometry, req.width_mm) {
                (Some(g), None) => g.clone(),
                (None, Some(w)) => GeometrySpec::with_width(w),
                _ => {
                    return Err(ApiError::Schema(
                        "give exactly one of geometry or width_mm".into(),
                    ))
                }
            };
            let config = config.resolve()?;
            let name = match &config {
                Configuration::Aligned { code } => code.to_string(),
                Configuration::PhaseShifted { .. } => "slider".into(),
            };
            let pattern = SequencePattern::build(&config, &geometry)?;
            Ok(Design {
                report: None,
                patterns: vec![NamedPattern { name, pattern }],
            })
        }
        _ => Err(ApiError::Schema(
            "give either spec, or config with geometry or width_mm".into(),
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Svg,
    Dxf,
}

impl ExportFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Svg => "image/svg+xml",
            ExportFormat::Dxf => "application/dxf",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Svg => "svg",
            ExportFormat::Dxf => "dxf",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportRequest {
    #[serde(default)]
    pub format: Option<ExportFormat>,
    pub pattern: SequencePattern,
}

pub fn export(pattern: &SequencePattern, format: ExportFormat) -> String {
    let doc = layout(pattern);
    match format {
        ExportFormat::Svg => to_svg(&doc),
        ExportFormat::Dxf => to_dxf(&doc),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Aligned,
    #[serde(alias = "phase_shifted")]
    Phase,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeRequest {
    pub mode: DecodeMode,
    pub frames: Vec<Frame>,
    #[serde(default)]
    pub codebook: Option<Codebook>,
    #[serde(default)]
    pub pattern: Option<SequencePattern>,
    /// Aligned only: report prefix decisions as frames arrive.
    #[serde(default)]
    pub incremental: bool,
    #[serde(default)]
    pub timeout_s: Option<f64>,
}

pub fn decode(req: DecodeRequest) -> ApiResult<serde_json::Value> {
    let stream = FrameStream::new(req.frames)?;
    let value = match req.mode {
        DecodeMode::Aligned => {
            let book = req
                .codebook
                .ok_or_else(|| ApiError::Schema("aligned decoding needs a codebook".into()))?;
            if req.incremental {
                let timeout = req.timeout_s.unwrap_or(DEFAULT_TIMEOUT_S);
                serde_json::to_value(decode_incremental(&stream, &book, timeout))
            } else {
                serde_json::to_value(decode_aligned(&stream, &book))
            }
        }
        DecodeMode::Phase => {
            let pattern = req
                .pattern
                .ok_or_else(|| ApiError::Schema("phase decoding needs a pattern".into()))?;
            serde_json::to_value(estimate_motion(&stream, &pattern)?)
        }
    };
    Ok(value.expect("serializable"))
}

pub fn sweep(plan: &SweepPlan) -> ApiResult<AccuracyMap> {
    plan.validate()?;
    let cells = (plan.configs.len()
        * plan.rates_hz.len()
        * plan.widths_mm.len()
        * plan.speeds_mm_per_s.len()) as u64;
    if cells.saturating_mul(plan.trials as u64) > MAX_SWEEP_TRIALS {
        return Err(
            Error::InvalidPlan(format!("more than {MAX_SWEEP_TRIALS} trials requested")).into(),
        );
    }
    Ok(run_sweep(plan)?)
}
