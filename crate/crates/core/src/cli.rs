//! Batch front end: parses flags and `key=value` config files, runs a
//! segmentation or the oracle suite, writes the artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;

use crate::descent::{run_descent_with, DescentConfig, DescentTrace, IntensityTerm};
use crate::error::Error;
use crate::grid::{LabelField, Partition, ScalarField};
use crate::init::{from_label_map, kmeans, tiles};
use crate::io::{read_flo, read_image, read_labels_pgm, read_mask_pgm, write_labels_pgm, write_overlay_png};
use crate::motion::{estimate_warp, warp_from_flow, FramePair, MotionTerm, RobustNorm, WarpKind, WarpModel};
use crate::solvers::SolverConfig;
use crate::validation::{render, run_suite};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Intensity,
    Motion,
    Validate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    Tiles,
    Kmeans,
    MaskFile,
}

/// Every resolved parameter of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub input: Option<PathBuf>,
    pub input2: Option<PathBuf>,
    pub n_regions: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub dtau_scale: f64,
    pub dilation: usize,
    pub max_iters: usize,
    pub init: InitKind,
    /// Label map for `init = mask-file`.
    pub mask: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub flow: Option<PathBuf>,
    pub occlusion: Option<PathBuf>,
    /// Trace destination; `out/trace.csv` when unset.
    pub trace: Option<PathBuf>,
    pub cg_tolerance: f64,
    pub heat_dt: f64,
    pub max_displacement: f64,
    pub convergence_window: usize,
    pub convergence_threshold: f64,
    pub warp: WarpKind,
    pub rho_threshold: f64,
    /// Alternations of warp estimation and descent in motion mode.
    pub motion_rounds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        let descent = DescentConfig::default();
        Self {
            mode: Mode::Intensity,
            input: None,
            input2: None,
            n_regions: 2,
            alpha: solver.alpha,
            epsilon: descent.epsilon,
            dtau_scale: descent.dtau_scale,
            dilation: descent.dilation_radius,
            max_iters: descent.max_iters,
            init: InitKind::Kmeans,
            mask: None,
            seed: 0,
            out: PathBuf::from("stss-out"),
            flow: None,
            occlusion: None,
            trace: None,
            cg_tolerance: solver.cg_tolerance,
            heat_dt: solver.heat_dt,
            max_displacement: descent.max_displacement,
            convergence_window: descent.convergence_window,
            convergence_threshold: descent.convergence_threshold,
            warp: WarpKind::Translation,
            rho_threshold: 0.2,
            motion_rounds: 3,
        }
    }
}

/// Why a run stopped; each kind has its own exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    /// Bad flag, key or value.
    Config(String),
    /// Input missing, unreadable or malformed, or an output not writable.
    Io(String),
    /// The segmentation itself failed.
    Solver(String),
    /// The oracle suite ran and some check failed.
    Validation,
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Io(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Validation => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "invalid configuration: {m}"),
            Failure::Io(m) => write!(f, "{m}"),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
            Failure::Validation => write!(f, "validation failed"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, Failure> {
    value
        .trim()
        .parse()
        .map_err(|_| Failure::Config(format!("`{key}` cannot be `{value}`")))
}

fn opt_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Sets one key. Dashes and underscores in keys are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "mode" => {
                self.mode = match v {
                    "intensity" => Mode::Intensity,
                    "motion" => Mode::Motion,
                    "validate" => Mode::Validate,
                    _ => return Err(Failure::Config(format!("unknown mode `{v}`"))),
                }
            }
            "input" => self.input = opt_path(v),
            "input2" => self.input2 = opt_path(v),
            "n_regions" => self.n_regions = parse(&key, v)?,
            "alpha" => self.alpha = parse(&key, v)?,
            "epsilon" => self.epsilon = parse(&key, v)?,
            "dtau_scale" => self.dtau_scale = parse(&key, v)?,
            "dilation" => self.dilation = parse(&key, v)?,
            "max_iters" => self.max_iters = parse(&key, v)?,
            "init" => {
                self.init = match v {
                    "tiles" => InitKind::Tiles,
                    "kmeans" => InitKind::Kmeans,
                    "mask-file" | "mask_file" => InitKind::MaskFile,
                    _ => return Err(Failure::Config(format!("unknown initializer `{v}`"))),
                }
            }
            "mask" => self.mask = opt_path(v),
            "seed" => self.seed = parse(&key, v)?,
            "out" => {
                self.out = opt_path(v).ok_or_else(|| Failure::Config("`out` cannot be empty".into()))?;
            }
            "flow" => self.flow = opt_path(v),
            "occlusion" => self.occlusion = opt_path(v),
            "trace" => self.trace = opt_path(v),
            "cg_tolerance" => self.cg_tolerance = parse(&key, v)?,
            "heat_dt" => self.heat_dt = parse(&key, v)?,
            "max_displacement" => self.max_displacement = parse(&key, v)?,
            "convergence_window" => self.convergence_window = parse(&key, v)?,
            "convergence_threshold" => self.convergence_threshold = parse(&key, v)?,
            "warp" => {
                self.warp = match v {
                    "translation" => WarpKind::Translation,
                    "affine" => WarpKind::Affine,
                    _ => return Err(Failure::Config(format!("unknown warp model `{v}`"))),
                }
            }
            "rho_threshold" => self.rho_threshold = parse(&key, v)?,
            "motion_rounds" => self.motion_rounds = parse(&key, v)?,
            _ => return Err(Failure::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), Failure> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Every key with its resolved value, in a form [`apply_text`] reads back
    /// to an equal config.
    ///
    /// [`apply_text`]: RunConfig::apply_text
    pub fn echo(&self) -> String {
        let p = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut s = String::new();
        let mode = match self.mode {
            Mode::Intensity => "intensity",
            Mode::Motion => "motion",
            Mode::Validate => "validate",
        };
        let init = match self.init {
            InitKind::Tiles => "tiles",
            InitKind::Kmeans => "kmeans",
            InitKind::MaskFile => "mask-file",
        };
        let warp = match self.warp {
            WarpKind::Translation => "translation",
            WarpKind::Affine => "affine",
        };
        let _ = writeln!(s, "mode={mode}");
        let _ = writeln!(s, "input={}", p(&self.input));
        let _ = writeln!(s, "input2={}", p(&self.input2));
        let _ = writeln!(s, "n_regions={}", self.n_regions);
        let _ = writeln!(s, "alpha={}", self.alpha);
        let _ = writeln!(s, "epsilon={}", self.epsilon);
        let _ = writeln!(s, "dtau_scale={}", self.dtau_scale);
        let _ = writeln!(s, "dilation={}", self.dilation);
        let _ = writeln!(s, "max_iters={}", self.max_iters);
        let _ = writeln!(s, "init={init}");
        let _ = writeln!(s, "mask={}", p(&self.mask));
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "out={}", self.out.display());
        let _ = writeln!(s, "flow={}", p(&self.flow));
        let _ = writeln!(s, "occlusion={}", p(&self.occlusion));
        let _ = writeln!(s, "trace={}", p(&self.trace));
        let _ = writeln!(s, "cg_tolerance={}", self.cg_tolerance);
        let _ = writeln!(s, "heat_dt={}", self.heat_dt);
        let _ = writeln!(s, "max_displacement={}", self.max_displacement);
        let _ = writeln!(s, "convergence_window={}", self.convergence_window);
        let _ = writeln!(s, "convergence_threshold={}", self.convergence_threshold);
        let _ = writeln!(s, "warp={warp}");
        let _ = writeln!(s, "rho_threshold={}", self.rho_threshold);
        let _ = writeln!(s, "motion_rounds={}", self.motion_rounds);
        s
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            cg_tolerance: self.cg_tolerance,
            heat_dt: self.heat_dt,
            alpha: self.alpha,
            ..SolverConfig::default()
        }
    }

    pub fn descent(&self) -> DescentConfig {
        DescentConfig {
            dtau_scale: self.dtau_scale,
            max_displacement: self.max_displacement,
            epsilon: self.epsilon,
            dilation_radius: self.dilation,
            max_iters: self.max_iters,
            convergence_window: self.convergence_window,
            convergence_threshold: self.convergence_threshold,
            ..DescentConfig::default()
        }
    }

    pub fn rho(&self) -> RobustNorm {
        RobustNorm::TruncatedLinear {
            threshold: self.rho_threshold,
        }
    }

    /// Value checks that need no file access.
    pub fn validate(&self) -> Result<(), Failure> {
        let cfg = |e: Error| Failure::Config(e.to_string());
        if self.mode == Mode::Validate {
            return Ok(());
        }
        if self.n_regions < 2 || self.n_regions > 256 {
            return Err(Failure::Config("n_regions must lie in [2, 256]".into()));
        }
        if self.input.is_none() {
            return Err(Failure::Config("`input` is required".into()));
        }
        if self.mode == Mode::Motion && self.input2.is_none() {
            return Err(Failure::Config("motion mode needs `input2`".into()));
        }
        if self.init == InitKind::MaskFile && self.mask.is_none() {
            return Err(Failure::Config("init=mask-file needs `mask`".into()));
        }
        if self.mode == Mode::Motion && self.motion_rounds == 0 {
            return Err(Failure::Config("motion_rounds must be at least 1".into()));
        }
        self.solver().validate().map_err(cfg)?;
        self.descent().validate().map_err(cfg)?;
        self.rho().validate().map_err(cfg)?;
        Ok(())
    }

    pub fn trace_path(&self) -> PathBuf {
        self.trace.clone().unwrap_or_else(|| self.out.join("trace.csv"))
    }
}

/// Flags mirror the config keys; a flag beats the same key in `--config`.
#[derive(Parser, Debug, Default)]
#[command(name = "stss", version, about = "Multi-scale region segmentation of images and frame pairs", allow_negative_numbers = true)]
pub struct Cli {
    /// `key=value` file applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// intensity, motion or validate.
    #[arg(long)]
    pub mode: Option<String>,
    /// Image, or frame 0 in motion mode (PGM/PPM, 8 or 16 bit, or PNG).
    #[arg(long)]
    pub input: Option<String>,
    /// Frame 1 in motion mode.
    #[arg(long)]
    pub input2: Option<String>,
    #[arg(long)]
    pub n_regions: Option<String>,
    /// Screened-Poisson scale.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Weight of the smoothing term on the indicators.
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub dtau_scale: Option<String>,
    /// Band radius around each region.
    #[arg(long)]
    pub dilation: Option<String>,
    #[arg(long)]
    pub max_iters: Option<String>,
    /// tiles, kmeans or mask-file.
    #[arg(long)]
    pub init: Option<String>,
    /// Label map (8-bit PGM) for `--init mask-file`.
    #[arg(long)]
    pub mask: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Dense flow (`.flo`) used to fit the warps instead of searching.
    #[arg(long)]
    pub flow: Option<String>,
    /// 8-bit PGM, 255 marks occluded frame-0 sites.
    #[arg(long)]
    pub occlusion: Option<String>,
    /// Trace CSV path.
    #[arg(long)]
    pub trace: Option<String>,
    #[arg(long)]
    pub cg_tolerance: Option<String>,
    #[arg(long)]
    pub heat_dt: Option<String>,
    #[arg(long)]
    pub max_displacement: Option<String>,
    #[arg(long)]
    pub convergence_window: Option<String>,
    #[arg(long)]
    pub convergence_threshold: Option<String>,
    /// translation or affine.
    #[arg(long)]
    pub warp: Option<String>,
    #[arg(long)]
    pub rho_threshold: Option<String>,
    #[arg(long)]
    pub motion_rounds: Option<String>,
}

impl Cli {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        let flags = [
            ("mode", &self.mode),
            ("input", &self.input),
            ("input2", &self.input2),
            ("n_regions", &self.n_regions),
            ("alpha", &self.alpha),
            ("epsilon", &self.epsilon),
            ("dtau_scale", &self.dtau_scale),
            ("dilation", &self.dilation),
            ("max_iters", &self.max_iters),
            ("init", &self.init),
            ("mask", &self.mask),
            ("seed", &self.seed),
            ("out", &self.out),
            ("flow", &self.flow),
            ("occlusion", &self.occlusion),
            ("trace", &self.trace),
            ("cg_tolerance", &self.cg_tolerance),
            ("heat_dt", &self.heat_dt),
            ("max_displacement", &self.max_displacement),
            ("convergence_window", &self.convergence_window),
            ("convergence_threshold", &self.convergence_threshold),
            ("warp", &self.warp),
            ("rho_threshold", &self.rho_threshold),
            ("motion_rounds", &self.motion_rounds),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

/// What a segmentation run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub labels: Option<LabelField>,
    pub trace: DescentTrace,
    /// Warps of the last motion round.
    pub warps: Vec<WarpModel>,
}

fn read_input(path: &Path) -> Result<Vec<ScalarField>, Failure> {
    read_image(path).map_err(|e| Failure::Io(format!("cannot read input: {e}")))
}

fn initial_labels(cfg: &RunConfig, channels: &[ScalarField]) -> Result<LabelField, Failure> {
    let (w, h) = channels[0].dims();
    let labels = match cfg.init {
        InitKind::Tiles => tiles(w, h, cfg.n_regions),
        InitKind::Kmeans => kmeans(channels, cfg.n_regions, cfg.seed),
        InitKind::MaskFile => {
            let path = cfg.mask.as_deref().expect("checked by validate");
            let map = read_labels_pgm(path).map_err(|e| Failure::Io(format!("cannot read mask: {e}")))?;
            from_label_map(map, (w, h), cfg.n_regions)
        }
    };
    labels.map_err(|e| Failure::Config(e.to_string()))
}

fn partition(labels: &LabelField, n: usize) -> Result<Partition, Failure> {
    Partition::from_labels(labels, n).map_err(|e| Failure::Solver(e.to_string()))
}

fn write_artifacts(cfg: &RunConfig, channels: &[ScalarField], report: &RunReport) -> Result<(), Failure> {
    let io = |e: Error| Failure::Io(format!("cannot write output: {e}"));
    std::fs::create_dir_all(&cfg.out).map_err(|e| Failure::Io(format!("{}: {e}", cfg.out.display())))?;
    std::fs::write(cfg.out.join("config.txt"), cfg.echo())
        .map_err(|e| Failure::Io(format!("{}: {e}", cfg.out.display())))?;
    report.trace.write_csv(&cfg.trace_path()).map_err(io)?;
    if let Some(labels) = &report.labels {
        write_labels_pgm(&cfg.out.join("labels.pgm"), labels).map_err(io)?;
        write_overlay_png(&cfg.out.join("overlay.png"), channels, labels).map_err(io)?;
    }
    if !report.warps.is_empty() {
        let mut s = String::from("region,kind,parameters\n");
        for (i, w) in report.warps.iter().enumerate() {
            let params: Vec<String> = w.parameters().iter().map(f64::to_string).collect();
            let _ = writeln!(s, "{i},{:?},{}", w.kind(), params.join(" "));
        }
        std::fs::write(cfg.out.join("warps.csv"), s).map_err(|e| Failure::Io(format!("{}: {e}", cfg.out.display())))?;
    }
    Ok(())
}

/// Writes whatever trace a failed descent left behind, then reports it.
fn descent_failure(cfg: &RunConfig, e: Error) -> Failure {
    if let Error::Descent { trace, .. } = &e {
        if std::fs::create_dir_all(&cfg.out).is_ok() {
            let _ = trace.write_csv(&cfg.trace_path());
        }
    }
    Failure::Solver(e.to_string())
}

fn run_intensity(cfg: &RunConfig) -> Result<(Vec<ScalarField>, RunReport), Failure> {
    let channels = read_input(cfg.input.as_deref().expect("checked by validate"))?;
    let labels = initial_labels(cfg, &channels)?;
    let term = IntensityTerm { channels: &channels };
    let (p, trace) = run_descent_with(&term, partition(&labels, cfg.n_regions)?, &cfg.descent(), &cfg.solver(), |_, _| {})
        .map_err(|e| descent_failure(cfg, e))?;
    let report = RunReport {
        labels: Some(p.hard_labels()),
        trace,
        warps: Vec::new(),
    };
    Ok((channels, report))
}

fn run_motion(cfg: &RunConfig) -> Result<(Vec<ScalarField>, RunReport), Failure> {
    let frame0 = read_input(cfg.input.as_deref().expect("checked by validate"))?;
    let frame1 = read_input(cfg.input2.as_deref().expect("checked by validate"))?;
    let occlusion = cfg
        .occlusion
        .as_deref()
        .map(read_mask_pgm)
        .transpose()
        .map_err(|e| Failure::Io(format!("cannot read occlusion: {e}")))?;
    let flow = cfg
        .flow
        .as_deref()
        .map(read_flo)
        .transpose()
        .map_err(|e| Failure::Io(format!("cannot read flow: {e}")))?;
    let pair = FramePair::new(frame0.clone(), frame1, occlusion).map_err(|e| Failure::Io(format!("frames do not match: {e}")))?;
    if let Some(f) = &flow {
        if f.dims() != pair.dims() {
            return Err(Failure::Io(format!("flow is {:?}, frames are {:?}", f.dims(), pair.dims())));
        }
    }
    let n = cfg.n_regions;
    let rho = cfg.rho();
    let mut labels = initial_labels(cfg, &frame0)?;
    let mut trace = DescentTrace::new(labels.labels().len());
    let mut warps = Vec::new();
    for _ in 0..cfg.motion_rounds {
        warps = (0..n)
            .map(|i| {
                let mask = labels.mask(i);
                match &flow {
                    Some(f) => warp_from_flow(f, &mask, cfg.warp),
                    None => estimate_warp(&pair, &mask, cfg.warp, rho),
                }
                .map_err(|e| Failure::Solver(format!("warp of region {i}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        let term = MotionTerm {
            pair: &pair,
            warps: &warps,
            rho,
        };
        let (p, round) = run_descent_with(&term, partition(&labels, n)?, &cfg.descent(), &cfg.solver(), |_, _| {})
            .map_err(|e| descent_failure(cfg, e))?;
        let offset = trace.entries.len();
        trace.entries.extend(round.entries.into_iter().map(|mut e| {
            e.iteration += offset;
            e
        }));
        trace.converged = round.converged;
        let next = p.hard_labels();
        let settled = next == labels;
        labels = next;
        if settled {
            break;
        }
    }
    let report = RunReport {
        labels: Some(labels),
        trace,
        warps,
    };
    Ok((frame0, report))
}

/// Runs a resolved config and writes its artifacts into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunReport, Failure> {
    cfg.validate()?;
    if cfg.mode == Mode::Validate {
        let checks = run_suite();
        print!("{}", render(&checks));
        return if checks.iter().all(|c| c.passed) {
            Ok(RunReport {
                labels: None,
                trace: DescentTrace::default(),
                warps: Vec::new(),
            })
        } else {
            Err(Failure::Validation)
        };
    }
    for p in [&cfg.input, &cfg.input2, &cfg.mask, &cfg.flow, &cfg.occlusion].into_iter().flatten() {
        if !p.exists() {
            return Err(Failure::Io(format!("{}: no such file", p.display())));
        }
    }
    let (channels, report) = match cfg.mode {
        Mode::Intensity => run_intensity(cfg)?,
        Mode::Motion => run_motion(cfg)?,
        Mode::Validate => unreachable!(),
    };
    write_artifacts(cfg, &channels, &report)?;
    Ok(report)
}

/// Worker count from `STSS_THREADS`, if set.
fn thread_cap() -> Result<Option<usize>, Failure> {
    match std::env::var("STSS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Config(format!("STSS_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

/// Entry point of the binary; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = (|| {
        let cfg = cli.resolve()?;
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = thread_cap()? {
            pool = pool.num_threads(n);
        }
        let pool = pool.build().map_err(|e| Failure::Config(e.to_string()))?;
        pool.install(|| run(&cfg))
    })();
    match outcome {
        Ok(_) => 0,
        Err(f) => {
            eprintln!("stss: {f}");
            f.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("mode=motion\ninput=a.pgm\ninput2=b.pgm\nalpha=12.5\nseed=9\ninit=tiles\nwarp=affine\n# note\n\nepsilon=0.01")
            .unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&cfg.echo()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.epsilon, 0.01);
    }

    #[test]
    fn shipped_defaults_are_echoed() {
        let echo = RunConfig::default().echo();
        assert!(echo.contains("alpha=20\n"));
        assert!(echo.contains("epsilon=0.005\n"));
    }

    #[test]
    fn bad_values_are_config_failures() {
        let mut cfg = RunConfig::default();
        for (k, v) in [("alpha", "x"), ("mode", "video"), ("nope", "1"), ("init", "random")] {
            assert_eq!(cfg.set(k, v).unwrap_err().exit_code(), 1, "{k}");
        }
        assert!(cfg.apply_text("alpha 3").is_err());
        cfg.epsilon = 0.5;
        cfg.input = Some("x".into());
        assert!(matches!(cfg.validate(), Err(Failure::Config(_))));
    }

    #[test]
    fn flags_beat_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "alpha=5\nseed=3\n").unwrap();
        let cli = Cli::try_parse_from(["stss", "--config", path.to_str().unwrap(), "--alpha", "7"]).unwrap();
        let cfg = cli.resolve().unwrap();
        assert_eq!((cfg.alpha, cfg.seed), (7.0, 3));
    }
}
