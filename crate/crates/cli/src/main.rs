use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qrloop::chain::{secret_key_rate, CodeSpec, RateBreakdown, RepeaterConfig};
use qrloop::code_gkp::StategenLevel;
use qrloop::config::{
    load_run_config, load_sweep_config, AxisSpec, ChainSection, OptimizeSection, RunConfig,
    SweepConfig, SweepSection,
};
use qrloop::report::{
    write_rate_csv, write_threshold_csv, write_validation_csv, RateRow, RunManifest, RunRecord,
    SweepRecord, ThresholdRecord, ValidationRecord,
};
use qrloop::sweep::{
    distance_curve, optimize_m, optimize_qpc_a, scan_nm, squeezing_threshold, Axis, MRange,
    SqueezedFamily, ThresholdSettings, DEFAULT_QPC_A_RANGE,
};
use qrloop::validation::{self, max_gated_z, FAIL_Z};
use qrloop::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_SUITE_FAILED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "qrloop",
    version,
    about = "Secret key rates of fiber-loop quantum repeaters"
)]
struct Cli {
    /// Worker threads for sweeps and Monte Carlo runs
    #[arg(long, global = true, env = "QRLOOP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one repeater configuration
    Rate(RateArgs),
    /// Tabulate rates over an n-m grid or a distance axis
    Sweep(SweepArgs),
    /// Search the least squeezing with a positive key fraction
    Threshold(ThresholdArgs),
    /// Compare analytic results against Monte Carlo estimates
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CodeKind {
    Gkp,
    SteaneGkp,
    Qpc,
    Ideal,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyKind {
    Gkp,
    SteaneGkp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stategen {
    Bare,
    Transferred,
}

impl From<Stategen> for StategenLevel {
    fn from(s: Stategen) -> Self {
        match s {
            Stategen::Bare => StategenLevel::Bare,
            Stategen::Transferred => StategenLevel::Transferred,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Chain parameters shared by all evaluating subcommands.
#[derive(Args, Clone, Default)]
struct ChainArgs {
    /// Configuration file (TOML, or JSON written by `rate --json`)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total distance in km
    #[arg(long = "L")]
    length: Option<f64>,
    /// Number of segments
    #[arg(long = "n")]
    segments: Option<u64>,
    /// Attenuation length in km
    #[arg(long)]
    att_length: Option<f64>,
    /// Signal velocity in fiber, m/s
    #[arg(long)]
    fiber_speed: Option<f64>,
    #[arg(long)]
    p_link: Option<f64>,
    #[arg(long)]
    p_loop: Option<f64>,
    #[arg(long)]
    p_bsm: Option<f64>,
    /// Smallest loop count considered when optimizing m
    #[arg(long)]
    m_min: Option<u64>,
    /// Largest loop count considered when optimizing m
    #[arg(long)]
    m_max: Option<u64>,
}

impl ChainArgs {
    fn apply(&self, chain: &mut ChainSection, optimize: &mut OptimizeSection) {
        if let Some(v) = self.length {
            chain.total_length_km = Some(v);
        }
        if let Some(v) = self.segments {
            chain.segments = Some(v);
        }
        if let Some(v) = self.att_length {
            chain.attenuation_length_km = v;
        }
        if let Some(v) = self.fiber_speed {
            chain.fiber_speed_m_per_s = v;
        }
        if let Some(v) = self.p_link {
            chain.p_link = v;
        }
        if let Some(v) = self.p_loop {
            chain.p_loop = v;
        }
        if let Some(v) = self.p_bsm {
            chain.p_bsm = v;
        }
        if let Some(v) = self.m_min {
            optimize.m_min = v;
        }
        if let Some(v) = self.m_max {
            optimize.m_max = v;
        }
    }
}

#[derive(Args, Clone, Default)]
struct CodeArgs {
    /// Memory code
    #[arg(long, value_enum)]
    code: Option<CodeKind>,
    /// GKP squeezing in dB
    #[arg(long = "s")]
    squeezing: Option<f64>,
    /// QPC photons per block; optimized over 2..=10 when omitted
    #[arg(long = "a")]
    qpc_a: Option<u32>,
    /// QPC block count
    #[arg(long = "b")]
    qpc_b: Option<u32>,
    /// Level of Steane-GKP state-generation errors
    #[arg(long, value_enum)]
    stategen: Option<Stategen>,
}

/// Code from flags layered over the configured one.
enum CodeChoice {
    Fixed(CodeSpec),
    /// QPC whose block size is still to be optimized
    QpcBestA {
        b: u32,
    },
}

impl CodeArgs {
    fn resolve(&self, configured: Option<CodeSpec>) -> Result<CodeChoice, Error> {
        let kind = match (self.code, configured) {
            (Some(k), _) => k,
            (None, Some(CodeSpec::Gkp { .. })) => CodeKind::Gkp,
            (None, Some(CodeSpec::SteaneGkp { .. })) => CodeKind::SteaneGkp,
            (None, Some(CodeSpec::Qpc { .. })) => CodeKind::Qpc,
            (None, Some(CodeSpec::Ideal)) => CodeKind::Ideal,
            (None, None) => return Err(Error::Parse("no memory code given (use --code)".into())),
        };
        let (cfg_s, cfg_stategen, cfg_a, cfg_b) = match configured {
            Some(CodeSpec::Gkp { squeezing_db }) => (Some(squeezing_db), None, None, None),
            Some(CodeSpec::SteaneGkp {
                squeezing_db,
                stategen,
            }) => (Some(squeezing_db), Some(stategen), None, None),
            Some(CodeSpec::Qpc { a, b }) => (None, None, Some(a), Some(b)),
            _ => (None, None, None, None),
        };
        let squeezing = || {
            self.squeezing
                .or(cfg_s)
                .ok_or_else(|| Error::Parse("GKP codes need a squeezing level (--s)".into()))
        };
        Ok(match kind {
            CodeKind::Gkp => CodeChoice::Fixed(CodeSpec::Gkp {
                squeezing_db: squeezing()?,
            }),
            CodeKind::SteaneGkp => CodeChoice::Fixed(CodeSpec::SteaneGkp {
                squeezing_db: squeezing()?,
                stategen: self
                    .stategen
                    .map(StategenLevel::from)
                    .or(cfg_stategen)
                    .unwrap_or_default(),
            }),
            CodeKind::Qpc => {
                let b = self
                    .qpc_b
                    .or(cfg_b)
                    .ok_or_else(|| Error::Parse("QPC needs a block count (--b)".into()))?;
                match self.qpc_a.or(cfg_a) {
                    Some(a) => CodeChoice::Fixed(CodeSpec::Qpc { a, b }),
                    None => CodeChoice::QpcBestA { b },
                }
            }
            CodeKind::Ideal => CodeChoice::Fixed(CodeSpec::Ideal),
        })
    }
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    code: CodeArgs,
    /// Loop passes per signaling period; optimized when omitted
    #[arg(long = "m")]
    loops: Option<u64>,
    /// Emit the full JSON record instead of a summary
    #[arg(long)]
    json: bool,
    /// Write the output to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    code: CodeArgs,
    /// Segment axis of an n-m grid, e.g. `log:10:10000:30` or `10,20,50`
    #[arg(long = "segments")]
    segment_axis: Option<String>,
    /// Loop axis of an n-m grid
    #[arg(long = "loops")]
    loop_axis: Option<String>,
    /// Distance axis in km; m is optimized per point
    #[arg(long = "lengths")]
    length_axis: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write the table to a file; a `.manifest.json` sidecar is written next
    /// to it
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, value_enum)]
    code: FamilyKind,
    #[arg(long, value_enum)]
    stategen: Option<Stategen>,
    /// Total distance(s) in km: one value, a list or an axis spec
    #[arg(long = "L")]
    lengths: String,
    #[arg(long = "n")]
    segments: u64,
    #[arg(long)]
    p_link: Option<f64>,
    #[arg(long)]
    p_loop: Option<f64>,
    #[arg(long)]
    p_bsm: Option<f64>,
    /// Key fraction the threshold must exceed
    #[arg(long, default_value_t = 0.0)]
    target: f64,
    /// Lower end of the squeezing bracket, dB
    #[arg(long, default_value_t = 5.0)]
    low: f64,
    /// Upper end of the squeezing bracket, dB
    #[arg(long, default_value_t = 30.0)]
    high: f64,
    #[arg(long, default_value_t = 0.1)]
    resolution: f64,
    #[arg(long)]
    m_max: Option<u64>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = validation::DEFAULT_SAMPLES)]
    samples: u64,
    #[arg(long, default_value_t = validation::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Model(Error),
    Io(io::Error),
    SuiteFailed(f64),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(io::Error::other(e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not start thread pool: {e}");
        }
    }
    let outcome = match cli.command {
        Command::Rate(args) => cmd_rate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Threshold(args) => cmd_threshold(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_DOMAIN
            })
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        Err(Failure::SuiteFailed(z)) => {
            eprintln!("validation failed: max |z| = {z:.2} exceeds {FAIL_Z}");
            ExitCode::from(EXIT_SUITE_FAILED)
        }
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_manifest(out: &Path, mut manifest: RunManifest) -> Result<(), Failure> {
    manifest.outputs.push(out.display().to_string());
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    let mut w = BufWriter::new(File::create(PathBuf::from(name))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    Ok(())
}

fn cmd_rate(args: RateArgs) -> Result<(), Failure> {
    let base = match &args.chain.config {
        Some(p) => Some(load_run_config(p)?),
        None => None,
    };
    let mut chain = base.as_ref().map(|c| c.chain.clone()).unwrap_or_default();
    let mut optimize = base.as_ref().map(|c| c.optimize).unwrap_or_default();
    args.chain.apply(&mut chain, &mut optimize);
    if args.loops.is_some() {
        chain.loops = args.loops;
    }
    let choice = args.code.resolve(base.as_ref().map(|c| c.code))?;
    let m_range = optimize.m_range()?;

    let (code, result) = match (choice, chain.loops) {
        (CodeChoice::Fixed(code), Some(m)) => (code, secret_key_rate(&chain.resolve(m)?, &code)?),
        (CodeChoice::Fixed(code), None) => {
            (code, optimize_m(&chain.resolve(1)?, &code, m_range)?.1)
        }
        (CodeChoice::QpcBestA { b }, Some(m)) => {
            let best = optimize_qpc_a(
                &chain.resolve(m)?,
                b,
                DEFAULT_QPC_A_RANGE,
                MRange::new(m, m)?,
            )?;
            (CodeSpec::qpc(best.a, b), best.rate)
        }
        (CodeChoice::QpcBestA { b }, None) => {
            let best = optimize_qpc_a(&chain.resolve(1)?, b, DEFAULT_QPC_A_RANGE, m_range)?;
            (CodeSpec::qpc(best.a, b), best.rate)
        }
    };

    let mut manifest = RunManifest::new("rate", None);
    if let Some(p) = &args.out {
        manifest.outputs.push(p.display().to_string());
    }
    let mut out = output(args.out.as_deref())?;
    if args.json {
        let record = RunRecord {
            manifest,
            config: RunConfig {
                chain,
                code,
                optimize,
            },
            result,
        };
        serde_json::to_writer_pretty(&mut out, &record)?;
        writeln!(out)?;
    } else {
        let optimized =
            if args.loops.is_none() && base.as_ref().is_none_or(|b| b.chain.loops.is_none()) {
                format!(" (optimized over {}..={})", m_range.min, m_range.max)
            } else {
                String::new()
            };
        print_summary(
            &mut out,
            &code,
            chain.total_length_km.unwrap_or(f64::NAN),
            &result,
            &optimized,
        )?;
    }
    out.flush()?;
    Ok(())
}

fn print_summary(
    out: &mut dyn Write,
    code: &CodeSpec,
    length_km: f64,
    r: &RateBreakdown,
    optimized: &str,
) -> io::Result<()> {
    let d = &r.diagnostics;
    writeln!(out, "code             {}", code.label())?;
    writeln!(out, "distance         {length_km} km")?;
    writeln!(
        out,
        "segments         {} ({} km each)",
        d.segments,
        length_km / d.segments as f64
    )?;
    writeln!(out, "loops            {}{optimized}", d.loops)?;
    writeln!(out, "p                {:.6e}", d.link.p)?;
    writeln!(out, "eta_loop         {:.6}", d.link.eta_loop)?;
    writeln!(out, "raw rate         {:.6} Hz", r.raw_rate_hz)?;
    writeln!(out, "QBER             {:.6e}", r.epsilon)?;
    writeln!(out, "SKF              {:.6}", r.skf)?;
    writeln!(out, "secret key rate  {:.6} Hz", r.skr_hz)?;
    Ok(())
}

fn fixed_code(choice: CodeChoice) -> Result<CodeSpec, Error> {
    match choice {
        CodeChoice::Fixed(c) => Ok(c),
        CodeChoice::QpcBestA { .. } => Err(Error::Parse(
            "sweeps need a fixed QPC block size (--a)".into(),
        )),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let base = match &args.chain.config {
        Some(p) => Some(load_sweep_config(p)?),
        None => None,
    };
    let mut chain = base.as_ref().map(|c| c.chain.clone()).unwrap_or_default();
    let mut optimize = base.as_ref().map(|c| c.optimize).unwrap_or_default();
    args.chain.apply(&mut chain, &mut optimize);
    let code = fixed_code(args.code.resolve(base.as_ref().map(|c| c.code))?)?;
    let sweep = match (&args.segment_axis, &args.loop_axis, &args.length_axis) {
        (Some(n), Some(m), None) => SweepSection::NmGrid {
            segments: AxisSpec::Spec(n.clone()),
            loops: AxisSpec::Spec(m.clone()),
        },
        (None, None, Some(l)) => SweepSection::Distance {
            lengths_km: AxisSpec::Spec(l.clone()),
        },
        (None, None, None) => match base.as_ref() {
            Some(b) => b.sweep.clone(),
            None => {
                return Err(Error::Parse(
                    "no sweep axes given (--segments with --loops, or --lengths)".into(),
                )
                .into())
            }
        },
        _ => {
            return Err(
                Error::Parse("give either --segments and --loops, or --lengths".into()).into(),
            )
        }
    };

    let rows: Vec<RateRow> = match &sweep {
        SweepSection::NmGrid { segments, loops } => {
            let l = chain.total_length_km.ok_or_else(|| {
                Error::Parse(
                    "missing `chain.total_length_km` (set it in the config file or pass --L)"
                        .into(),
                )
            })?;
            let ns = segments.axis()?.integers("segments")?;
            let ms = loops.axis()?.integers("loops")?;
            scan_nm(&chain.resolve_partial()?, &code, &ns, &ms)?
                .into_iter()
                .map(|cell| RateRow {
                    code,
                    total_length_km: l,
                    rate: cell.rate,
                })
                .collect()
        }
        SweepSection::Distance { lengths_km } => {
            if chain.segments.is_none() {
                return Err(Error::Parse(
                    "missing `chain.segments` (set it in the config file or pass --n)".into(),
                )
                .into());
            }
            let ls = lengths_km.axis()?.values;
            distance_curve(&chain.resolve_partial()?, &code, &ls, optimize.m_range()?)?
                .into_iter()
                .map(|p| RateRow {
                    code,
                    total_length_km: p.total_length_km,
                    rate: p.rate,
                })
                .collect()
        }
    };

    let manifest = RunManifest::new("sweep", None);
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => {
            write_rate_csv(&mut out, &rows)?;
            if let Some(p) = &args.out {
                write_manifest(p, manifest)?;
            }
        }
        Format::Json => {
            let mut manifest = manifest;
            if let Some(p) = &args.out {
                manifest.outputs.push(p.display().to_string());
            }
            let record = SweepRecord {
                manifest,
                config: SweepConfig {
                    chain,
                    code,
                    optimize,
                    sweep,
                },
                rows,
            };
            serde_json::to_writer_pretty(&mut out, &record)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_threshold(args: ThresholdArgs) -> Result<(), Failure> {
    let family = match args.code {
        FamilyKind::Gkp => SqueezedFamily::Gkp,
        FamilyKind::SteaneGkp => SqueezedFamily::SteaneGkp {
            stategen: args.stategen.map(StategenLevel::from).unwrap_or_default(),
        },
    };
    let lengths = args.lengths.parse::<Axis>()?.values;
    let mut m_range = MRange::default();
    if let Some(max) = args.m_max {
        m_range = MRange::new(m_range.min, max)?;
    }
    let settings = ThresholdSettings {
        target_skf: args.target,
        bracket_db: (args.low, args.high),
        resolution_db: args.resolution,
        m_range,
    };
    let family_label = match family {
        SqueezedFamily::Gkp => "gkp".to_string(),
        SqueezedFamily::SteaneGkp { stategen } => format!("steane_gkp({stategen} stategen)"),
    };
    let mut records = Vec::with_capacity(lengths.len());
    for &l in &lengths {
        let mut cfg = RepeaterConfig::new(l, args.segments, 1);
        if let Some(v) = args.p_link {
            cfg.p_link = v;
        }
        if let Some(v) = args.p_loop {
            cfg.p_loop = v;
        }
        if let Some(v) = args.p_bsm {
            cfg.p_bsm = v;
        }
        cfg.validate()?;
        let result = squeezing_threshold(family, &cfg, &settings)?;
        records.push(ThresholdRecord {
            manifest: RunManifest::new("threshold", None),
            family: family_label.clone(),
            total_length_km: l,
            segments: args.segments,
            result,
        });
    }
    let mut out = output(args.out.as_deref())?;
    if args.json {
        serde_json::to_writer_pretty(&mut out, &records)?;
        writeln!(out)?;
    } else {
        write_threshold_csv(&mut out, &records)?;
        if let Some(p) = &args.out {
            write_manifest(p, RunManifest::new("threshold", None))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let rows = validation::run_suite(args.samples, args.seed)?;
    let worst = max_gated_z(&rows);
    let manifest = RunManifest::new("validate", Some(args.seed));
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Some(Format::Json) => {
            let record = ValidationRecord {
                manifest,
                samples: args.samples,
                rows,
            };
            serde_json::to_writer_pretty(&mut out, &record)?;
            writeln!(out)?;
        }
        Some(Format::Csv) => {
            write_validation_csv(&mut out, &rows)?;
            if let Some(p) = &args.out {
                write_manifest(p, manifest)?;
            }
        }
        None => {
            writeln!(
                out,
                "{:<16} {:<18} {:>14} {:>14} {:>11} {:>8}  parameters",
                "quantity", "model", "analytic", "mc mean", "mc stderr", "z"
            )?;
            for r in &rows {
                let model = match r.model {
                    qrloop::mc_oracle::DependenceModel::IndependentPairs => "independent_pairs",
                    qrloop::mc_oracle::DependenceModel::Chain => "chain (gap)",
                };
                writeln!(
                    out,
                    "{:<16} {:<18} {:>14.8e} {:>14.8e} {:>11.3e} {:>8.3}  {}",
                    r.quantity, model, r.analytic, r.mc.mean, r.mc.std_error, r.z, r.parameters
                )?;
            }
            writeln!(
                out,
                "samples per row: {}, seed: {}, max |z| (gated): {worst:.3}",
                args.samples, args.seed
            )?;
        }
    }
    out.flush()?;
    if worst > FAIL_Z {
        return Err(Failure::SuiteFailed(worst));
    }
    Ok(())
}
