use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use landrisk::codec::{decode_png, encode_png, RawFrameReader};
use landrisk::pipeline::{
    list_rasters, threads_from_env, with_threads, DirSink, Engine, FileFrames, FrameSink, FrameSource, NullSink,
    RunConfig, StreamSink,
};
use landrisk::sora::GrcReport;
use landrisk::{risk_level_description, DilationPolicy, Environment, OperationalScenario, RiskLevel, Visibility};

/// Risk maps and landing-zone candidates from aerial semantic segmentation.
#[derive(Parser, Debug)]
#[command(name = "landrisk", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Class table JSON (default: bundled Semantic Drone Dataset table).
    #[arg(long, global = true, value_name = "PATH")]
    classes: Option<PathBuf>,

    /// Risk colormap JSON (default: blue to red).
    #[arg(long, global = true, value_name = "PATH")]
    colormap: Option<PathBuf>,

    /// Run config JSON; individual flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Overlay opacity of the risk colors, 0 to 1.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Highest risk level still considered safe for landing.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(0..=5))]
    threshold: Option<u8>,

    /// Number of landing candidates to report.
    #[arg(long, global = true)]
    k: Option<usize>,

    /// Minimum frame rate the stream must sustain.
    #[arg(long = "budget-fps", global = true)]
    budget_fps: Option<f64>,

    /// Dilation radius per risk level, six comma-separated integers.
    #[arg(long, global = true, value_name = "R0,..,R5", value_parser = parse_radii)]
    dilation: Option<DilationPolicy>,

    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Map label rasters (.png or .rlm) to risk rasters (.rkm) and colorized PNGs.
    Risk {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Base image, or directory of `<stem>.png` base images, for overlays.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Compare predicted and ground-truth label rasters with matching file names.
    Eval { pred_dir: PathBuf, gt_dir: PathBuf },
    /// Run raw label frames through the real-time pipeline.
    Stream {
        /// Concatenated RLM1 stream file, directory of .rlm frames, or `-` for stdin.
        #[arg(default_value = "-")]
        source: PathBuf,
        /// Write concatenated RKM1 records to stdout instead of `--out`.
        #[arg(long)]
        stdout: bool,
        /// Exit with status 3 if the minimum frame rate misses the budget.
        #[arg(long)]
        strict: bool,
    },
    /// Rank safe landing zone candidates in a label or risk raster.
    Slz {
        input: PathBuf,
        /// Base image for the annotated overlay.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Intrinsic ground risk class of an operational scenario.
    Grc {
        /// VLOS or BVLOS.
        #[arg(long)]
        visibility: Visibility,
        /// controlled_ground, sparsely_populated, populated or gathering_of_people.
        #[arg(long)]
        environment: Environment,
    },
    /// Print the definition of each risk level.
    Levels,
}

fn parse_radii(s: &str) -> std::result::Result<DilationPolicy, String> {
    let parts: Vec<u32> =
        s.split(',').map(|p| p.trim().parse::<u32>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    let radii: [u32; 6] = parts.try_into().map_err(|v: Vec<u32>| format!("expected 6 radii, got {}", v.len()))?;
    Ok(DilationPolicy::new(radii))
}

impl GlobalOpts {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.classes {
            cfg.class_table_path = Some(p.clone());
        }
        if let Some(p) = &self.colormap {
            cfg.colormap_path = Some(p.clone());
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(t) = self.threshold {
            cfg.slz_threshold = RiskLevel::new(t).expect("clap bounds the threshold");
        }
        if let Some(k) = self.k {
            cfg.slz_k = k;
        }
        if let Some(b) = self.budget_fps {
            cfg.budget_fps = b;
        }
        if let Some(d) = self.dilation {
            cfg.dilation = d;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn engine(&self) -> Result<Engine> {
        Ok(Engine::from_config(self.run_config()?)?)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

fn cmd_risk(g: &GlobalOpts, inputs: &[PathBuf], base: Option<&Path>) -> Result<ExitCode> {
    let engine = g.engine()?;
    let summary = engine.run_risk(inputs, &g.out_dir(), base)?;
    if g.json {
        print_json(&summary)?;
    } else {
        for p in &summary.written {
            println!("wrote {}", p.display());
        }
    }
    if summary.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("{} of {} inputs failed:", summary.failures.len(), summary.processed);
    for f in &summary.failures {
        eprintln!("  {}: {}", f.path.display(), f.error);
    }
    Ok(ExitCode::FAILURE)
}

fn cmd_eval(g: &GlobalOpts, pred: &Path, gt: &Path) -> Result<ExitCode> {
    let engine = g.engine()?;
    let report = engine.evaluate_dirs(pred, gt)?;
    if let Some(dir) = &g.out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("eval.json"), &report)?;
    }
    if g.json {
        print_json(&report)?;
    } else {
        println!("{:<20} {:>8} {:>9} {:>8} {:>8}", "granularity", "acc", "mean IoU", "F1", "bal acc");
        for (name, m) in [("class", &report.class_level), ("risk level", &report.risk_level)] {
            println!(
                "{:<20} {:>8.4} {:>9.4} {:>8.4} {:>8.4}",
                name, m.pixel_accuracy, m.mean_iou, m.mean_f1, m.balanced_accuracy
            );
        }
        println!("{} image pairs", report.pairs);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_stream(g: &GlobalOpts, source: &Path, to_stdout: bool, strict: bool) -> Result<ExitCode> {
    let engine = g.engine()?;
    let mut src: Box<dyn FrameSource> = if source == Path::new("-") {
        Box::new(RawFrameReader::new(BufReader::new(io::stdin())))
    } else if source.is_dir() {
        let frames = list_rasters(source)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("rlm")))
            .collect();
        Box::new(FileFrames::new(frames))
    } else {
        let f = fs::File::open(source).with_context(|| format!("opening {}", source.display()))?;
        Box::new(RawFrameReader::new(BufReader::new(f)))
    };
    let mut sink: Box<dyn FrameSink> = match (&g.out, to_stdout) {
        (_, true) => Box::new(StreamSink(BufWriter::new(io::stdout()))),
        (Some(dir), false) => Box::new(DirSink::new(dir)?),
        (None, false) => Box::new(NullSink),
    };
    let result = engine.run_stream(src.as_mut(), sink.as_mut());
    drop(sink);
    let stats = match &result {
        Ok(s) => s,
        Err(f) => &f.stats,
    };
    // Frames may be on stdout; keep stats on stderr in that case.
    let text = serde_json::to_string_pretty(stats)?;
    if to_stdout {
        eprintln!("{text}");
    } else if g.json {
        println!("{text}");
    } else {
        println!(
            "{} frames, min {:.1} fps, mean {:.1} fps, budget {:.1} fps: {}",
            stats.frames,
            stats.min_fps,
            stats.mean_fps,
            stats.budget_fps,
            if stats.pass { "pass" } else { "below budget" }
        );
        println!("({})", stats.measured);
    }
    if let Some(dir) = g.out.as_ref().filter(|_| !to_stdout) {
        write_json(&dir.join("stream_stats.json"), stats)?;
    }
    match result {
        Err(f) => bail!(f),
        Ok(s) if strict && !s.pass => Ok(ExitCode::from(3)),
        Ok(_) => Ok(ExitCode::SUCCESS),
    }
}

fn cmd_slz(g: &GlobalOpts, input: &Path, base: Option<&Path>) -> Result<ExitCode> {
    let engine = g.engine()?;
    let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let raster = engine.decode_input(&bytes).with_context(|| format!("decoding {}", input.display()))?;
    let (report, risk) = engine.slz(&raster)?;
    let base_image = match base {
        Some(p) => Some(decode_png(&fs::read(p).with_context(|| format!("reading {}", p.display()))?)?),
        None => None,
    };
    let image = engine.slz_image(&risk, &report, base_image.as_ref())?;
    let out = g.out_dir();
    fs::create_dir_all(&out)?;
    let name = stem(input);
    write_json(&out.join(format!("{name}_slz.json")), &report)?;
    fs::write(out.join(format!("{name}_slz.png")), encode_png(&image)?)?;
    if report.candidates.is_empty() {
        eprintln!("warning: no pixel at or below risk level {} in {}", report.threshold, input.display());
    }
    if g.json {
        print_json(&report)?;
    } else {
        for (rank, c) in report.candidates.iter().enumerate() {
            println!(
                "#{} center ({}, {}) clearance {:.2} px, mean risk {:.3}, max risk {}, region {} px",
                rank + 1,
                c.center[0],
                c.center[1],
                c.clearance_radius,
                c.mean_risk_in_zone,
                c.max_risk_in_zone,
                c.area
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_grc(g: &GlobalOpts, visibility: Visibility, environment: Environment) -> Result<ExitCode> {
    let report = GrcReport::from(OperationalScenario::new(visibility, environment));
    if g.json {
        print_json(&report)?;
    } else {
        println!("GRC {}: {}", report.grc, report.description);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_levels(g: &GlobalOpts) -> Result<ExitCode> {
    if g.json {
        let levels: Vec<_> = RiskLevel::all()
            .map(|l| serde_json::json!({"level": l, "description": risk_level_description(l)}))
            .collect();
        print_json(&serde_json::json!({"schema": landrisk::SCHEMA_VERSION, "levels": levels}))?;
    } else {
        for l in RiskLevel::all() {
            println!("{l}: {}", risk_level_description(l));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Risk { inputs, base } => cmd_risk(g, inputs, base.as_deref()),
        Command::Eval { pred_dir, gt_dir } => cmd_eval(g, pred_dir, gt_dir),
        Command::Stream { source, stdout, strict } => cmd_stream(g, source, *stdout, *strict),
        Command::Slz { input, base } => cmd_slz(g, input, base.as_deref()),
        Command::Grc { visibility, environment } => cmd_grc(g, *visibility, *environment),
        Command::Levels => cmd_levels(g),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match threads_from_env() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match with_threads(threads, || run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
