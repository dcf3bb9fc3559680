//! Batch and streaming drivers behind the `landrisk` commands.
//!
//! Frames are processed one at a time in arrival order. Each stage may fan out
//! across the rayon pool, so outputs do not depend on the worker count.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::classes::{map_class_to_risk, ClassTable};
use crate::codec::{
    self, decode_label_image, decode_png, decode_raw_labels, decode_raw_risk, encode_png, encode_raw_risk,
    image_to_labels, image_to_risk, RawFrameReader, LABEL_MAGIC, RISK_MAGIC,
};
use crate::error::{Error, Result};
use crate::metrics::{confusion, MetricsReport};
use crate::morphology::{dilate_risk, DilationPolicy};
use crate::render::{annotate_candidates, overlay, render_risk, RgbImage, RiskColormap};
use crate::slz::{select_slz, SlzCandidate};
use crate::types::{LabelMap, RiskLevel, RiskMap};
use crate::SCHEMA_VERSION;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "LANDRISK_THREADS";

pub const DEFAULT_DILATION: DilationPolicy = DilationPolicy { radius_per_level: [0, 0, 0, 5, 5, 15] };
pub const DEFAULT_BUDGET_FPS: f64 = 14.0;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Worker count from `LANDRISK_THREADS`, capped to the available parallelism.
pub fn threads_from_env() -> Result<usize> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n.min(available)),
            _ => Err(Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(available),
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    schema: Option<u32>,
    classes: Option<PathBuf>,
    colormap: Option<PathBuf>,
    dilation: Option<DilationPolicy>,
    slz: Option<SlzDoc>,
    alpha: Option<f64>,
    budget_fps: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlzDoc {
    threshold: Option<u8>,
    k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// `None` selects the bundled class table.
    pub class_table_path: Option<PathBuf>,
    /// `None` selects the bundled colormap.
    pub colormap_path: Option<PathBuf>,
    pub dilation: DilationPolicy,
    pub slz_threshold: RiskLevel,
    pub slz_k: usize,
    pub alpha: f64,
    pub budget_fps: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            class_table_path: None,
            colormap_path: None,
            dilation: DEFAULT_DILATION,
            slz_threshold: RiskLevel::from_const(1),
            slz_k: 5,
            alpha: 0.5,
            budget_fps: DEFAULT_BUDGET_FPS,
        }
    }
}

impl RunConfig {
    /// Loads a JSON run config. Relative file paths resolve against the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, dir).map_err(|e| e.in_file(path))
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let doc: ConfigDoc = serde_json::from_str(text)?;
        if let Some(s) = doc.schema {
            if s != SCHEMA_VERSION {
                return Err(Error::Config(format!("unsupported schema {s}")));
            }
        }
        let mut cfg = RunConfig {
            class_table_path: doc.classes.map(|p| base_dir.join(p)),
            colormap_path: doc.colormap.map(|p| base_dir.join(p)),
            ..RunConfig::default()
        };
        if let Some(d) = doc.dilation {
            cfg.dilation = d;
        }
        if let Some(slz) = doc.slz {
            if let Some(t) = slz.threshold {
                cfg.slz_threshold = RiskLevel::new(t).ok_or(Error::BadThreshold(t))?;
            }
            if let Some(k) = slz.k {
                cfg.slz_k = k;
            }
        }
        if let Some(a) = doc.alpha {
            cfg.alpha = a;
        }
        if let Some(b) = doc.budget_fps {
            cfg.budget_fps = b;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.budget_fps.is_finite() && self.budget_fps > 0.0) {
            return Err(Error::Config(format!("budget_fps {} must be positive", self.budget_fps)));
        }
        if self.slz_k == 0 {
            return Err(Error::Config("slz k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Raster read from disk, before or after risk mapping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputRaster {
    Labels(LabelMap),
    Risk(RiskMap),
}

/// Loaded tables plus run parameters.
#[derive(Clone, Debug)]
pub struct Engine {
    pub table: ClassTable,
    pub colormap: RiskColormap,
    pub config: RunConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BatchSummary {
    pub schema: u32,
    pub processed: usize,
    pub written: Vec<PathBuf>,
    pub failures: Vec<Failure>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub path: PathBuf,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub schema: u32,
    pub pairs: usize,
    pub class_level: MetricsReport,
    pub risk_level: MetricsReport,
    pub class_row_normalized: Vec<Vec<f64>>,
    pub risk_row_normalized: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlzReport {
    pub schema: u32,
    pub width: usize,
    pub height: usize,
    pub threshold: RiskLevel,
    pub k: usize,
    /// Dilation applied before selection; identity for inputs that were already risk maps.
    pub policy: DilationPolicy,
    pub candidates: Vec<SlzCandidate>,
}

/// Outputs for a single risk-mapped frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RiskArtifacts {
    pub risk: RiskMap,
    pub rkm: Vec<u8>,
    pub png: Vec<u8>,
    pub overlay_png: Option<Vec<u8>>,
}

impl Engine {
    pub fn new(table: ClassTable, colormap: RiskColormap, config: RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Engine { table, colormap, config })
    }

    pub fn from_config(config: RunConfig) -> Result<Self> {
        let table = match &config.class_table_path {
            Some(p) => ClassTable::load(p)?,
            None => ClassTable::default(),
        };
        let colormap = match &config.colormap_path {
            Some(p) => RiskColormap::load(p)?,
            None => RiskColormap::default(),
        };
        Self::new(table, colormap, config)
    }

    pub fn decode_input(&self, bytes: &[u8]) -> Result<InputRaster> {
        if bytes.starts_with(&LABEL_MAGIC) {
            return decode_raw_labels(bytes, &self.table).map(InputRaster::Labels);
        }
        if bytes.starts_with(&RISK_MAGIC) {
            return decode_raw_risk(bytes).map(InputRaster::Risk);
        }
        if bytes.starts_with(&PNG_SIGNATURE) {
            let image = decode_png(bytes)?;
            return match image_to_labels(&image, &self.table) {
                Ok(labels) => Ok(InputRaster::Labels(labels)),
                Err(label_err) => image_to_risk(&image, &self.colormap).map(InputRaster::Risk).map_err(|_| label_err),
            };
        }
        let magic = bytes.get(..4).map_or([0; 4], |m| m.try_into().unwrap());
        Err(Error::BadMagic(magic))
    }

    /// Reads a label raster from `.rlm` or color-coded `.png`.
    pub fn read_labels(&self, path: &Path) -> Result<LabelMap> {
        let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
        let labels = if bytes.starts_with(&PNG_SIGNATURE) {
            decode_label_image(&bytes, &self.table)
        } else {
            decode_raw_labels(&bytes, &self.table)
        };
        labels.map_err(|e| e.in_file(path))
    }

    /// Class map -> risk map -> safety dilation.
    pub fn risk_of_labels(&self, labels: &LabelMap) -> Result<RiskMap> {
        let risk = map_class_to_risk(labels, &self.table)?;
        Ok(dilate_risk(&risk, &self.config.dilation))
    }

    pub fn risk_artifacts(&self, labels: &LabelMap, base: Option<&RgbImage>) -> Result<RiskArtifacts> {
        let risk = self.risk_of_labels(labels)?;
        let rkm = encode_raw_risk(&risk);
        let png = encode_png(&render_risk(&risk, &self.colormap))?;
        let overlay_png = match base {
            Some(b) => Some(encode_png(&overlay(b, &risk, &self.colormap, self.config.alpha)?)?),
            None => None,
        };
        Ok(RiskArtifacts { risk, rkm, png, overlay_png })
    }

    /// Maps every input to `<stem>.rkm` and `<stem>.png` in `out_dir`, plus
    /// `<stem>_overlay.png` when a base image is found. Failures are collected,
    /// not fatal.
    pub fn run_risk(&self, inputs: &[PathBuf], out_dir: &Path, base: Option<&Path>) -> Result<BatchSummary> {
        fs::create_dir_all(out_dir).map_err(|e| Error::from(e).in_file(out_dir))?;
        let mut summary = BatchSummary { schema: SCHEMA_VERSION, ..Default::default() };
        for input in inputs {
            summary.processed += 1;
            match self.risk_file(input, out_dir, base) {
                Ok(mut written) => summary.written.append(&mut written),
                Err(e) => summary.failures.push(Failure { path: input.clone(), error: e.to_string() }),
            }
        }
        Ok(summary)
    }

    fn risk_file(&self, input: &Path, out_dir: &Path, base: Option<&Path>) -> Result<Vec<PathBuf>> {
        let labels = self.read_labels(input)?;
        let base_image = match base.and_then(|b| base_image_path(b, input)) {
            Some(p) => {
                let bytes = fs::read(&p).map_err(|e| Error::from(e).in_file(&p))?;
                Some(decode_png(&bytes).map_err(|e| e.in_file(&p))?)
            }
            None => None,
        };
        let art = self.risk_artifacts(&labels, base_image.as_ref()).map_err(|e| e.in_file(input))?;
        let stem = file_stem(input);
        let mut written = vec![
            write_file(&out_dir.join(format!("{stem}.rkm")), &art.rkm)?,
            write_file(&out_dir.join(format!("{stem}.png")), &art.png)?,
        ];
        if let Some(o) = &art.overlay_png {
            written.push(write_file(&out_dir.join(format!("{stem}_overlay.png")), o)?);
        }
        Ok(written)
    }

    /// Aggregated class- and risk-level metrics over files with matching names.
    pub fn evaluate_dirs(&self, pred_dir: &Path, gt_dir: &Path) -> Result<EvalReport> {
        let gt_files = list_rasters(gt_dir)?;
        let pred_files = list_rasters(pred_dir)?;
        for p in &pred_files {
            if !gt_files.iter().any(|g| g.file_name() == p.file_name()) {
                return Err(Error::UnmatchedFile(p.clone()));
            }
        }
        let mut pairs = Vec::with_capacity(gt_files.len());
        for g in &gt_files {
            let p = pred_dir.join(g.file_name().expect("listed files have names"));
            if !p.is_file() {
                return Err(Error::UnmatchedFile(g.clone()));
            }
            pairs.push((p, g.clone()));
        }
        self.evaluate_pairs(&pairs)
    }

    pub fn evaluate_pairs(&self, pairs: &[(PathBuf, PathBuf)]) -> Result<EvalReport> {
        if pairs.is_empty() {
            return Err(Error::NoFrames);
        }
        let mut total = crate::ConfusionMatrix::zeros(self.table.len());
        for (p, g) in pairs {
            let pred = self.read_labels(p)?;
            let gt = self.read_labels(g)?;
            let cm = confusion(&pred, &gt, self.table.len()).map_err(|e| e.in_file(p))?;
            total.merge(&cm)?;
        }
        let risk = total.coarsen_to_risk(&self.table)?;
        Ok(EvalReport {
            schema: SCHEMA_VERSION,
            pairs: pairs.len(),
            class_level: MetricsReport::from_confusion(&total)?,
            risk_level: MetricsReport::from_confusion(&risk)?,
            class_row_normalized: total.row_normalize(),
            risk_row_normalized: risk.row_normalize(),
        })
    }

    /// Landing candidates for one raster. Label inputs are mapped and dilated first.
    pub fn slz(&self, input: &InputRaster) -> Result<(SlzReport, RiskMap)> {
        let (risk, policy) = match input {
            InputRaster::Labels(l) => (self.risk_of_labels(l)?, self.config.dilation),
            InputRaster::Risk(r) => (r.clone(), DilationPolicy::IDENTITY),
        };
        let candidates = select_slz(&risk, self.config.slz_threshold, self.config.slz_k);
        let report = SlzReport {
            schema: SCHEMA_VERSION,
            width: risk.width(),
            height: risk.height(),
            threshold: self.config.slz_threshold,
            k: self.config.slz_k,
            policy,
            candidates,
        };
        Ok((report, risk))
    }

    /// Risk rendering (or overlay on `base`) with candidate circles drawn in.
    pub fn slz_image(&self, risk: &RiskMap, report: &SlzReport, base: Option<&RgbImage>) -> Result<RgbImage> {
        let img = match base {
            Some(b) => overlay(b, risk, &self.colormap, self.config.alpha)?,
            None => render_risk(risk, &self.colormap),
        };
        Ok(annotate_candidates(&img, &report.candidates))
    }

    /// Streams raw label frames through decode -> map -> dilate -> encode.
    pub fn run_stream(
        &self,
        source: &mut dyn FrameSource,
        sink: &mut dyn FrameSink,
    ) -> std::result::Result<PipelineStats, Box<StreamFailure>> {
        let mut acc = StatsAccumulator::new(self.config.budget_fps);
        loop {
            match self.stream_one(source, sink, &mut acc) {
                Ok(true) => {}
                Ok(false) => break,
                Err(error) => return Err(Box::new(StreamFailure { stats: acc.finish(), error })),
            }
        }
        let stats = acc.finish();
        if stats.frames == 0 {
            return Err(Box::new(StreamFailure { stats, error: Error::NoFrames }));
        }
        Ok(stats)
    }

    fn stream_one(
        &self,
        source: &mut dyn FrameSource,
        sink: &mut dyn FrameSink,
        acc: &mut StatsAccumulator,
    ) -> Result<bool> {
        let mut frame = FrameTimer::default();
        let Some(record) = frame.time(Stage::Read, || source.next_frame())? else {
            return Ok(false);
        };
        let labels = frame.time(Stage::Decode, || decode_raw_labels(&record, &self.table))?;
        let risk = frame.time(Stage::Map, || map_class_to_risk(&labels, &self.table))?;
        let risk = frame.time(Stage::Dilate, || dilate_risk(&risk, &self.config.dilation));
        let out = frame.time(Stage::Encode, || encode_raw_risk(&risk));
        frame.time(Stage::Write, || sink.write_frame(acc.frames, &out))?;
        acc.push(frame);
        Ok(true)
    }
}

/// Yields raw `RLM1` records in order.
pub trait FrameSource {
    fn next_frame(&mut self) -> Result<Option<Vec<u8>>>;
}

impl<R: Read> FrameSource for RawFrameReader<R> {
    fn next_frame(&mut self) -> Result<Option<Vec<u8>>> {
        self.next_record()
    }
}

/// A sequence of `.rlm` files, one frame each.
pub struct FileFrames {
    paths: std::vec::IntoIter<PathBuf>,
}

impl FileFrames {
    pub fn new(paths: Vec<PathBuf>) -> Self {
        FileFrames { paths: paths.into_iter() }
    }
}

impl FrameSource for FileFrames {
    fn next_frame(&mut self) -> Result<Option<Vec<u8>>> {
        match self.paths.next() {
            None => Ok(None),
            Some(p) => fs::read(&p).map(Some).map_err(|e| Error::from(e).in_file(p)),
        }
    }
}

/// In-memory frames, mostly for tests and benchmarks.
pub struct MemoryFrames<'a> {
    frames: std::slice::Iter<'a, Vec<u8>>,
}

impl<'a> MemoryFrames<'a> {
    pub fn new(frames: &'a [Vec<u8>]) -> Self {
        MemoryFrames { frames: frames.iter() }
    }
}

impl FrameSource for MemoryFrames<'_> {
    fn next_frame(&mut self) -> Result<Option<Vec<u8>>> {
        Ok(self.frames.next().cloned())
    }
}

/// Receives encoded `RKM1` frames in input order.
pub trait FrameSink {
    fn write_frame(&mut self, index: usize, record: &[u8]) -> Result<()>;
}

impl FrameSink for Vec<Vec<u8>> {
    fn write_frame(&mut self, _index: usize, record: &[u8]) -> Result<()> {
        self.push(record.to_vec());
        Ok(())
    }
}

/// Concatenates records onto a writer.
pub struct StreamSink<W>(pub W);

impl<W: std::io::Write> FrameSink for StreamSink<W> {
    fn write_frame(&mut self, _index: usize, record: &[u8]) -> Result<()> {
        codec::write_record(&mut self.0, record)
    }
}

/// Writes `frame_000000.rkm`, `frame_000001.rkm`, ... into a directory.
pub struct DirSink {
    dir: PathBuf,
}

impl DirSink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::from(e).in_file(&dir))?;
        Ok(DirSink { dir })
    }
}

impl FrameSink for DirSink {
    fn write_frame(&mut self, index: usize, record: &[u8]) -> Result<()> {
        write_file(&self.dir.join(format!("frame_{index:06}.rkm")), record).map(drop)
    }
}

/// Discards output.
pub struct NullSink;

impl FrameSink for NullSink {
    fn write_frame(&mut self, _index: usize, _record: &[u8]) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Stage {
    Read,
    Decode,
    Map,
    Dilate,
    Encode,
    Write,
}

impl Stage {
    const ALL: [Stage; 6] = [Stage::Read, Stage::Decode, Stage::Map, Stage::Dilate, Stage::Encode, Stage::Write];

    fn name(self) -> &'static str {
        match self {
            Stage::Read => "read",
            Stage::Decode => "decode",
            Stage::Map => "map",
            Stage::Dilate => "dilate",
            Stage::Encode => "encode",
            Stage::Write => "write",
        }
    }
}

#[derive(Default)]
struct FrameTimer {
    stages: [Duration; 6],
}

impl FrameTimer {
    fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages[stage as usize] += start.elapsed();
        out
    }

    fn latency(&self) -> Duration {
        self.stages.iter().sum()
    }
}

/// What the FPS figures cover. Segmentation inference is not part of it.
pub const MEASURED_QUANTITY: &str =
    "post-inference pipeline: read, raw decode, class-to-risk map, dilation, raw encode, write";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineStats {
    pub schema: u32,
    pub measured: &'static str,
    pub frames: usize,
    pub per_stage_nanos: BTreeMap<String, u64>,
    pub wall_nanos: u64,
    /// Lowest per-frame rate, `1 / latency`.
    pub min_fps: f64,
    /// Frames over summed latency.
    pub mean_fps: f64,
    pub budget_fps: f64,
    pub pass: bool,
    pub threads: usize,
}

#[derive(Debug, thiserror::Error)]
#[error("{error} (after {} frames)", stats.frames)]
pub struct StreamFailure {
    pub stats: PipelineStats,
    #[source]
    pub error: Error,
}

struct StatsAccumulator {
    started: Instant,
    frames: usize,
    stages: [Duration; 6],
    min_fps: f64,
    budget_fps: f64,
}

impl StatsAccumulator {
    fn new(budget_fps: f64) -> Self {
        StatsAccumulator {
            started: Instant::now(),
            frames: 0,
            stages: [Duration::ZERO; 6],
            min_fps: f64::INFINITY,
            budget_fps,
        }
    }

    fn push(&mut self, frame: FrameTimer) {
        self.frames += 1;
        for (acc, d) in self.stages.iter_mut().zip(frame.stages) {
            *acc += d;
        }
        self.min_fps = self.min_fps.min(fps(frame.latency()));
    }

    fn finish(&self) -> PipelineStats {
        let wall = self.started.elapsed();
        let busy: Duration = self.stages.iter().sum();
        let (min_fps, mean_fps) = if self.frames == 0 {
            (0.0, 0.0)
        } else {
            let mean = self.frames as f64 / busy.as_secs_f64().max(f64::MIN_POSITIVE);
            (self.min_fps, mean.max(self.min_fps))
        };
        PipelineStats {
            schema: SCHEMA_VERSION,
            measured: MEASURED_QUANTITY,
            frames: self.frames,
            per_stage_nanos: Stage::ALL
                .iter()
                .map(|&s| (s.name().to_string(), self.stages[s as usize].as_nanos() as u64))
                .collect(),
            wall_nanos: wall.as_nanos() as u64,
            min_fps,
            mean_fps,
            budget_fps: self.budget_fps,
            pass: self.frames > 0 && min_fps >= self.budget_fps,
            threads: rayon::current_num_threads(),
        }
    }
}

fn fps(latency: Duration) -> f64 {
    1.0 / latency.as_secs_f64().max(1e-9)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "frame".into(), |s| s.to_string_lossy().into_owned())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))?;
    Ok(path.to_path_buf())
}

fn base_image_path(base: &Path, input: &Path) -> Option<PathBuf> {
    if base.is_dir() {
        let candidate = base.join(format!("{}.png", file_stem(input)));
        candidate.is_file().then_some(candidate)
    } else {
        Some(base.to_path_buf())
    }
}

/// `.png` and `.rlm` files in `dir`, sorted by name.
pub fn list_rasters(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::from(e).in_file(dir))? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "rlm")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
