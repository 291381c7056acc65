use std::io::{BufReader, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use duotouch_cli::api::{self, ApiError, DecodeMode, ExportFormat};
use duotouch_cli::server::{self, DEFAULT_PORT};
use duotouch_core::codebook::Codebook;
use duotouch_core::pattern::{ConfigKind, SequencePattern};
use duotouch_core::rules::{extract_s90, DesignSpec, DeviceClass, InteractionType, RuleMode};
use duotouch_core::sim::{simulate, FrameStream, MotionProfile, SamplingModel};
use duotouch_core::sweep::{write_csv, SweepPlan};
use duotouch_core::Error;

#[derive(Parser)]
#[command(
    name = "duotouch",
    version,
    about = "Design, simulate and decode two-trace touch patterns"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a design spec and print the validation report
    Validate(SpecArgs),
    /// Plan a design and write its patterns with SVG and DXF layouts
    Gen(SpecArgs),
    /// Simulate a constant-speed pass over a pattern; prints JSON lines
    Simulate(SimulateArgs),
    /// Decode a recorded frame stream
    Decode(DecodeArgs),
    /// Run a Monte Carlo accuracy sweep
    Sweep(SweepArgs),
    /// Write the layout of a pattern as SVG or DXF
    Export(ExportArgs),
    /// Serve the JSON API on localhost
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Device {
    Smartphone,
    Tablet,
    Touchpad,
    Smartwatch,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum Interaction {
    OneShot,
    Toggle,
    Directional,
    Scalar,
    Cyclic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfigArg {
    Aligned,
    PhaseShifted,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PaperDefaults,
    Alpha,
}

#[derive(Args)]
struct SpecArgs {
    /// DesignSpec JSON file (instead of the flags below)
    #[arg(long, conflicts_with_all = ["device", "interaction", "config"])]
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    device: Option<Device>,
    /// Interaction type; picks configuration and direction semantics
    #[arg(long = "type", value_enum, conflicts_with = "config")]
    interaction: Option<Interaction>,
    #[arg(long, value_enum)]
    config: Option<ConfigArg>,
    /// Touch frame rate in Hz (defaults per device)
    #[arg(long)]
    rate: Option<f64>,
    /// Maximum actuation speed in mm/s
    #[arg(long)]
    vmax: Option<f64>,
    #[arg(long)]
    commands: Option<usize>,
    /// Slider travel in mm (phase-shifted)
    #[arg(long)]
    travel: Option<f64>,
    #[arg(long)]
    bidirectional: bool,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Output file (validate) or directory (gen)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    pattern: PathBuf,
    /// Signed speed in mm/s; negative runs from the far end
    #[arg(long, allow_hyphen_values = true)]
    speed: f64,
    #[arg(long, default_value_t = 60.0)]
    rate: f64,
    /// Sampling phase in seconds, within one frame period
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threshold: Option<f64>,
    /// Travel before and after the pattern (defaults to 2w)
    #[arg(long)]
    lead: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, value_enum)]
    mode: DecodeModeArg,
    #[arg(long, required_if_eq("mode", "aligned"))]
    codebook: Option<PathBuf>,
    #[arg(long, required_if_eq("mode", "phase"))]
    pattern: Option<PathBuf>,
    /// Frame stream as JSON lines
    #[arg(long)]
    input: PathBuf,
    /// Report prefix decisions as frames arrive (aligned)
    #[arg(long)]
    incremental: bool,
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecodeModeArg {
    Aligned,
    Phase,
}

#[derive(Args)]
struct SweepArgs {
    /// SweepPlan JSON file; defaults apply when omitted
    #[arg(long)]
    plan: Option<PathBuf>,
    /// CSV output (JSON when the name ends in .json)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the s90 calibration instead of the map
    #[arg(long)]
    calibrate: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    pattern: PathBuf,
    #[arg(long, value_enum, default_value = "svg")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Svg,
    Dxf,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Svg => ExportFormat::Svg,
            FormatArg::Dxf => ExportFormat::Dxf,
        }
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "DUOTOUCH_PORT", default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
}

fn usage(kind: ErrorKind, msg: &str) -> ! {
    Cli::command().error(kind, msg).exit()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ApiError> {
    let bytes = std::fs::read(path).map_err(Error::from)?;
    api::parse(&bytes).map_err(|e| ApiError::Schema(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), ApiError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(Error::from)?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(Error::from)?,
    }
    Ok(())
}

impl SpecArgs {
    fn spec(&self) -> Result<DesignSpec, ApiError> {
        let mut spec = match (&self.spec, self.device) {
            (Some(path), _) => return read_json(path),
            (None, Some(device)) => {
                let device = match device {
                    Device::Smartphone => DeviceClass::Smartphone,
                    Device::Tablet => DeviceClass::Tablet,
                    Device::Touchpad => DeviceClass::Touchpad,
                    Device::Smartwatch => DeviceClass::Smartwatch,
                    Device::Custom => DeviceClass::Custom,
                };
                match (self.interaction, self.config) {
                    (Some(t), _) => DesignSpec::for_interaction(device, interaction(t)),
                    (None, Some(ConfigArg::Aligned)) => {
                        DesignSpec::new(device, ConfigKind::Aligned)
                    }
                    (None, Some(ConfigArg::PhaseShifted)) => {
                        DesignSpec::new(device, ConfigKind::PhaseShifted)
                    }
                    (None, None) => usage(
                        ErrorKind::MissingRequiredArgument,
                        "give --type or --config",
                    ),
                }
            }
            (None, None) => usage(
                ErrorKind::MissingRequiredArgument,
                "give --spec or --device",
            ),
        };
        spec.rate_hz = self.rate.or(spec.rate_hz);
        spec.v_max_mm_per_s = self.vmax.unwrap_or(spec.v_max_mm_per_s);
        spec.n_commands = self.commands.or(spec.n_commands);
        spec.travel_mm = self.travel.or(spec.travel_mm);
        spec.bidirectional |= self.bidirectional;
        if let Some(m) = self.mode {
            spec.rule_mode = match m {
                ModeArg::PaperDefaults => RuleMode::PaperDefaults,
                ModeArg::Alpha => RuleMode::Alpha,
            };
        }
        Ok(spec)
    }
}

fn interaction(t: Interaction) -> InteractionType {
    match t {
        Interaction::OneShot => InteractionType::OneShot,
        Interaction::Toggle => InteractionType::Toggle,
        Interaction::Directional => InteractionType::Directional,
        Interaction::Scalar => InteractionType::Scalar,
        Interaction::Cyclic => InteractionType::Cyclic,
    }
}

fn gen(args: &SpecArgs) -> Result<(), ApiError> {
    let design = api::design(&args.spec()?)?;
    let text = api::to_json(&design);
    let Some(dir) = &args.out else {
        return emit(None, &text);
    };
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    emit(Some(&dir.join("design.json")), &text)?;
    for p in &design.patterns {
        emit(
            Some(&dir.join(format!("{}.json", p.name))),
            &p.pattern.to_json(),
        )?;
        for format in [ExportFormat::Svg, ExportFormat::Dxf] {
            let path = dir.join(format!("{}.{}", p.name, format.extension()));
            emit(Some(&path), &api::export(&p.pattern, format))?;
        }
    }
    Ok(())
}

fn simulate_cmd(args: &SimulateArgs) -> Result<(), ApiError> {
    let pattern: SequencePattern = read_json(&args.pattern)?;
    let lead = args.lead.unwrap_or(2.0 * pattern.geometry().width_mm);
    let motion = MotionProfile::traverse(&pattern, args.speed, lead)?;
    let mut sampling = SamplingModel::new(args.rate);
    sampling.phase_s = args.phase;
    sampling.jitter_std_s = args.jitter;
    sampling.seed = args.seed;
    if let Some(t) = args.threshold {
        sampling.detect_threshold = t;
    }
    emit(
        args.out.as_deref(),
        &simulate(&pattern, &motion, &sampling)?.to_jsonl(),
    )
}

fn decode_cmd(args: &DecodeArgs) -> Result<(), ApiError> {
    let file = std::fs::File::open(&args.input).map_err(Error::from)?;
    let stream = FrameStream::read_jsonl(BufReader::new(file))?;
    let codebook: Option<Codebook> = args.codebook.as_deref().map(read_json).transpose()?;
    let pattern: Option<SequencePattern> = args.pattern.as_deref().map(read_json).transpose()?;
    let req = api::DecodeRequest {
        mode: match args.mode {
            DecodeModeArg::Aligned => DecodeMode::Aligned,
            DecodeModeArg::Phase => DecodeMode::Phase,
        },
        frames: stream.frames().to_vec(),
        codebook,
        pattern,
        incremental: args.incremental,
        timeout_s: args.timeout,
    };
    emit(args.out.as_deref(), &api::to_json(&api::decode(req)?))
}

fn sweep_cmd(args: &SweepArgs) -> Result<(), ApiError> {
    let plan: SweepPlan = match &args.plan {
        Some(p) => read_json(p)?,
        None => SweepPlan::default(),
    };
    let map = api::sweep(&plan)?;
    if args.calibrate {
        return emit(None, &api::to_json(&extract_s90(&map)?));
    }
    match &args.out {
        Some(path) if path.extension().is_some_and(|e| e == "json") => {
            emit(Some(path), &api::to_json(&map))
        }
        Some(path) => {
            let file = std::fs::File::create(path).map_err(Error::from)?;
            Ok(write_csv(&map, file)?)
        }
        None => emit(None, &api::to_json(&map)),
    }
}

fn export_cmd(args: &ExportArgs) -> Result<(), ApiError> {
    let pattern: SequencePattern = read_json(&args.pattern)?;
    emit(
        args.out.as_deref(),
        &api::export(&pattern, args.format.into()),
    )
}

fn run(cli: Cli) -> Result<(), ApiError> {
    match cli.command {
        Command::Validate(args) => {
            let report = api::validate(&args.spec()?)?;
            emit(args.out.as_deref(), &api::to_json(&report))
        }
        Command::Gen(args) => gen(&args),
        Command::Simulate(args) => simulate_cmd(&args),
        Command::Decode(args) => decode_cmd(&args),
        Command::Sweep(args) => sweep_cmd(&args),
        Command::Export(args) => export_cmd(&args),
        Command::Serve(args) => {
            let runtime = tokio::runtime::Runtime::new().map_err(Error::from)?;
            runtime
                .block_on(server::serve(SocketAddr::new(args.bind, args.port)))
                .map_err(Error::from)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{}", e.body());
            ExitCode::from(1)
        }
    }
}
