//! `qbve`: artificial data, the spectral reference solver, training,
//! prediction and evaluation from the command line.
//!
//! Every subcommand writes `manifest.json` into its output directory, also
//! when it fails. `qbve replay <manifest>` runs the recorded command again.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure or instability, 4 a `--gate` was violated.

mod gate;

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use qbve::bve::PhysicsConstants;
use qbve::data::{
    block_reduce_mean, equiangular_lats, equiangular_lons, gen_artificial_initial, reduce_to_shape, zeta_of_initial,
    AngleUnit, Field, Quantity, ARTIFICIAL_MODES,
};
use qbve::fom::FomReport;
use qbve::qnn::{Checkpoint, Entangler, ModelConfig, SphereMap, DEFAULT_POLE_CUTOFF_DEG};
use qbve::sem::{evolve_with, snapshot_time, SemConfig, DEFAULT_ROBERT, DEFAULT_TRUNCATION};
use qbve::train::{predict_fields, train, HistoryRow, Reference, TrainConfig, TrainMode, TrainObserver};
use qbve::write_atomic;

use gate::Gate;

const MANIFEST_FORMAT: &str = "qbve-manifest/1";
const MANIFEST_FILE: &str = "manifest.json";
const PSI_FILE: &str = "psi.txt";
const ZETA_FILE: &str = "zeta.txt";

#[derive(Parser, Debug)]
#[command(name = "qbve", version, about = "Quantum-circuit solver for the barotropic vorticity equation")]
struct Cli {
    /// Worker threads for parallel loops; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Sum per-point contributions in a fixed order so that training repeats
    /// bit for bit.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the two-mode initial stream function and its vorticity.
    GenArtificial(GenArgs),
    /// Evolve an initial vorticity field with the spectral solver.
    Sem(SemArgs),
    /// Block-average and/or subset the psi and zeta files of a directory.
    Reduce(ReduceArgs),
    /// Train a model on reference fields.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a lat-lon grid.
    Predict(PredictArgs),
    /// Figures of merit of a prediction against a reference.
    Evaluate(EvaluateArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Preset {
    /// omega = 1, r = 1
    Unit,
    /// omega = 7.292e-5 rad/s, r = 6.371e6 m
    Earth,
}

#[derive(Args, Debug, Clone)]
struct Physics {
    /// Physical constants preset.
    #[arg(long, value_enum, default_value_t = Preset::Unit)]
    preset: Preset,

    /// Rotation rate; overrides the preset [default: from --preset].
    #[arg(long)]
    omega: Option<f64>,

    /// Sphere radius; overrides the preset [default: from --preset].
    #[arg(long)]
    radius: Option<f64>,
}

impl Physics {
    fn resolve(&self) -> qbve::Result<PhysicsConstants> {
        let base = match self.preset {
            Preset::Unit => PhysicsConstants::unit(),
            Preset::Earth => PhysicsConstants::earth(),
        };
        PhysicsConstants::new(self.omega.unwrap_or(base.omega), self.radius.unwrap_or(base.radius))
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Latitude rows.
    #[arg(long, default_value_t = 100)]
    nlat: usize,

    /// Longitude columns.
    #[arg(long, default_value_t = 200)]
    nlon: usize,

    #[arg(long)]
    out_dir: PathBuf,

    #[command(flatten)]
    physics: Physics,
}

#[derive(Args, Debug)]
struct SemArgs {
    /// Initial vorticity file; its first slice is evolved.
    #[arg(long = "in")]
    input: PathBuf,

    #[arg(long)]
    out_dir: PathBuf,

    /// Time step.
    #[arg(long, default_value_t = 0.001)]
    dt: f64,

    #[arg(long, default_value_t = 3.0)]
    total_time: f64,

    /// Must be a whole number of time steps.
    #[arg(long, default_value_t = 0.3)]
    snapshot_interval: f64,

    /// Triangular truncation; the Gaussian grid follows from it.
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    truncation: usize,

    /// Robert-Asselin filter coefficient.
    #[arg(long, default_value_t = DEFAULT_ROBERT)]
    robert: f64,

    #[command(flatten)]
    physics: Physics,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    /// Directory holding psi.txt and/or zeta.txt.
    #[arg(long)]
    in_dir: PathBuf,

    #[arg(long)]
    out_dir: PathBuf,

    /// Target shape `NLATxNLON`; surplus edge rows and columns are dropped.
    #[arg(long, conflicts_with = "factor")]
    shape: Option<String>,

    /// Square block factor; edge blocks average the cells present.
    #[arg(long)]
    factor: Option<usize>,

    /// Keep only these times (comma separated) [default: all].
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Qcl,
    Dqc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MapArg {
    Colatitude,
    AsPrinted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EntanglerArg {
    Chain,
    Ring,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Dqc)]
    mode: ModeArg,

    #[arg(long, default_value_t = 4)]
    qubits: usize,

    /// Ansatz layers after the feature map.
    #[arg(long, default_value_t = 4)]
    layers: usize,

    /// Ansatz blocks inside the feature map, a multiple of 3.
    #[arg(long, default_value_t = 3)]
    fm_layers: usize,

    #[arg(long, value_enum, default_value_t = MapArg::Colatitude)]
    sphere_map: MapArg,

    #[arg(long, value_enum, default_value_t = EntanglerArg::Chain)]
    entangler: EntanglerArg,

    #[arg(long, default_value_t = 30_000)]
    iters: usize,

    #[arg(long, default_value_t = 0.01)]
    lr: f64,

    /// QCL batch size.
    #[arg(long, default_value_t = 1602)]
    batch: usize,

    /// DQC batch sizes for psi(t=0), zeta(t=0), equator psi and residual.
    #[arg(long, value_delimiter = ',', default_value = "350,300,25,350")]
    batches: Vec<usize>,

    /// Residual loss weight.
    #[arg(long, default_value_t = 0.1)]
    alpha4: f64,

    /// All four DQC weights, replacing 1/mean(data^2) [default: from data].
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Directory with reference psi.txt and zeta.txt.
    #[arg(long)]
    ref_dir: PathBuf,

    #[arg(long)]
    out_dir: PathBuf,

    /// Residual points stay within this latitude.
    #[arg(long, default_value_t = DEFAULT_POLE_CUTOFF_DEG)]
    pole_cutoff_deg: f64,

    /// Iterations between checkpoints; 0 writes only the final one.
    #[arg(long, default_value_t = 1000)]
    checkpoint_interval: usize,

    /// Residual points are drawn from t in [0, t_max].
    #[arg(long, default_value_t = 3.0)]
    t_max: f64,

    /// Use the dimensional form of the residual with every term scaled by r.
    #[arg(long)]
    strict_r_scaling: bool,

    /// Print a progress line every this many iterations; 0 is silent.
    #[arg(long, default_value_t = 100)]
    log_every: usize,

    #[command(flatten)]
    physics: Physics,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,

    /// Field whose grid, times and units are reused.
    #[arg(long)]
    template: Option<PathBuf>,

    /// Equiangular grid rows, instead of a template.
    #[arg(long, requires = "nlon", conflicts_with = "template")]
    nlat: Option<usize>,

    #[arg(long, requires = "nlat")]
    nlon: Option<usize>,

    /// Comma separated [default: the template times].
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,

    /// Skip the vorticity output.
    #[arg(long)]
    psi_only: bool,

    #[arg(long)]
    out_dir: PathBuf,

    #[command(flatten)]
    physics: Physics,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Directory with predicted psi.txt (and zeta.txt).
    #[arg(long)]
    pred_dir: PathBuf,

    /// Directory with reference psi.txt (and zeta.txt).
    #[arg(long)]
    ref_dir: PathBuf,

    #[arg(long)]
    out_dir: PathBuf,

    /// Threshold such as `psi_mre_median_t3<=0.25`; repeatable.
    #[arg(long)]
    gate: Vec<Gate>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    manifest: PathBuf,

    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Lib(qbve::Error),
    Usage(String),
    Gate(Vec<String>),
}

impl From<qbve::Error> for Failure {
    fn from(e: qbve::Error) -> Self {
        Failure::Lib(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Usage(s) => f.write_str(s),
            Failure::Gate(v) => write!(f, "gate failed: {}", v.join("; ")),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        use qbve::Error as E;
        match self {
            Failure::Lib(E::Numerical(_) | E::Instability { .. } | E::Singularity { .. } | E::DegenerateReference(_)) => 3,
            Failure::Lib(_) | Failure::Usage(_) => 2,
            Failure::Gate(_) => 4,
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: String,
    subcommand: String,
    /// Arguments after the program name.
    argv: Vec<String>,
    config: Value,
    seed: Option<u64>,
    threads: usize,
    deterministic: bool,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    status: String,
    error: Option<String>,
    #[serde(default)]
    notes: serde_json::Map<String, Value>,
    duration_s: f64,
}

impl Manifest {
    fn new(cli: &Cli, argv: &[String]) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: cli.command.name().into(),
            argv: argv.to_vec(),
            config: Value::Null,
            seed: None,
            threads: rayon::current_num_threads(),
            deterministic: cli.deterministic,
            inputs: Vec::new(),
            outputs: Vec::new(),
            status: "running".into(),
            error: None,
            notes: Default::default(),
            duration_s: 0.0,
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenArtificial(_) => "gen-artificial",
            Command::Sem(_) => "sem",
            Command::Reduce(_) => "reduce",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
            Command::Replay(_) => "replay",
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        match self {
            Command::GenArtificial(a) => Some(&a.out_dir),
            Command::Sem(a) => Some(&a.out_dir),
            Command::Reduce(a) => Some(&a.out_dir),
            Command::Train(a) => Some(&a.out_dir),
            Command::Predict(a) => Some(&a.out_dir),
            Command::Evaluate(a) => Some(&a.out_dir),
            Command::Replay(_) => None,
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match execute(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn execute(cli: Cli, argv: &[String]) -> Res<()> {
    if let Command::Replay(r) = &cli.command {
        return replay(r);
    }
    let out_dir = cli.command.out_dir().expect("every non-replay command has an output directory").to_path_buf();
    fs::create_dir_all(&out_dir).map_err(|e| qbve::Error::Io {
        path: out_dir.clone(),
        source: e,
    })?;
    let start = Instant::now();
    let mut manifest = Manifest::new(&cli, argv);
    let result = match &cli.command {
        Command::GenArtificial(a) => gen_artificial(a, &mut manifest),
        Command::Sem(a) => sem(a, &mut manifest),
        Command::Reduce(a) => reduce(a, &mut manifest),
        Command::Train(a) => train_cmd(a, cli.deterministic, &mut manifest),
        Command::Predict(a) => predict(a, &mut manifest),
        Command::Evaluate(a) => evaluate(a, &mut manifest),
        Command::Replay(_) => unreachable!(),
    };
    manifest.duration_s = start.elapsed().as_secs_f64();
    match &result {
        Ok(()) => manifest.status = "ok".into(),
        Err(e) => {
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
        }
    }
    let text = serde_json::to_string_pretty(&manifest).map_err(qbve::Error::from)?;
    write_atomic(&out_dir.join(MANIFEST_FILE), text.as_bytes())?;
    result
}

fn replay(args: &ReplayArgs) -> Res<()> {
    let text = fs::read_to_string(&args.manifest).map_err(|e| qbve::Error::Io {
        path: args.manifest.clone(),
        source: e,
    })?;
    let m: Manifest = serde_json::from_str(&text).map_err(qbve::Error::from)?;
    if m.format != MANIFEST_FORMAT {
        return Err(Failure::Usage(format!("unknown manifest format {:?}", m.format)));
    }
    let mut argv = m.argv.clone();
    if let Some(dir) = &args.out_dir {
        replace_flag(&mut argv, "--out-dir", &dir.to_string_lossy());
    }
    let cli = Cli::try_parse_from(std::iter::once("qbve".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| Failure::Usage(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Failure::Usage("a manifest cannot replay a replay".into()));
    }
    execute(cli, &argv)
}

/// Sets `flag` to `value` in either `--flag value` or `--flag=value` form.
fn replace_flag(argv: &mut Vec<String>, flag: &str, value: &str) {
    let eq = format!("{flag}=");
    for i in 0..argv.len() {
        if argv[i] == flag && i + 1 < argv.len() {
            argv[i + 1] = value.to_string();
            return;
        }
        if argv[i].starts_with(&eq) {
            argv[i] = format!("{eq}{value}");
            return;
        }
    }
    argv.push(flag.to_string());
    argv.push(value.to_string());
}

fn save(field: &Field, path: PathBuf, manifest: &mut Manifest) -> Res<()> {
    field.save(&path)?;
    manifest.outputs.push(path);
    Ok(())
}

fn load(path: PathBuf, manifest: &mut Manifest) -> Res<Field> {
    let f = Field::load(&path)?;
    manifest.inputs.push(path);
    Ok(f)
}

fn gen_artificial(a: &GenArgs, m: &mut Manifest) -> Res<()> {
    let consts = a.physics.resolve()?;
    m.config = json!({ "nlat": a.nlat, "nlon": a.nlon, "modes": ARTIFICIAL_MODES, "consts": consts });
    let psi = gen_artificial_initial(a.nlat, a.nlon)?;
    let zeta = zeta_of_initial(&psi, &ARTIFICIAL_MODES, &consts)?;
    save(&psi, a.out_dir.join(PSI_FILE), m)?;
    save(&zeta, a.out_dir.join(ZETA_FILE), m)
}

fn sem(a: &SemArgs, m: &mut Manifest) -> Res<()> {
    let config = SemConfig {
        truncation: a.truncation,
        robert_coeff: a.robert,
        ..SemConfig::new(a.dt, a.total_time, a.snapshot_interval, a.physics.resolve()?)
    };
    m.config = serde_json::to_value(&config).map_err(qbve::Error::from)?;
    let initial = load(a.input.clone(), m)?;
    let mut last = None;
    let run = evolve_with(&initial, &config, |k, _, _| {
        last = Some(k);
        Ok(())
    });
    let evo = match run {
        Ok(e) => e,
        Err(e) => {
            if let Some(k) = last {
                let t = snapshot_time(k, a.snapshot_interval);
                eprintln!("last stable snapshot: index {k}, t = {t}");
                m.notes.insert("last_stable_snapshot".into(), json!({ "index": k, "time": t }));
            }
            return Err(e.into());
        }
    };
    save(&evo.psi, a.out_dir.join(PSI_FILE), m)?;
    save(&evo.zeta, a.out_dir.join(ZETA_FILE), m)?;
    let mut csv = String::from("step,time,mean_vorticity,enstrophy\n");
    for d in &evo.diagnostics {
        csv.push_str(&format!("{},{},{:e},{:e}\n", d.step, d.time, d.mean_vorticity, d.enstrophy));
    }
    let path = a.out_dir.join("diagnostics.csv");
    write_atomic(&path, csv.as_bytes())?;
    m.outputs.push(path);
    Ok(())
}

fn parse_shape(s: &str) -> Res<(usize, usize)> {
    let bad = || Failure::Usage(format!("shape {s:?} is not NLATxNLON"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn reduce(a: &ReduceArgs, m: &mut Manifest) -> Res<()> {
    let shape = a.shape.as_deref().map(parse_shape).transpose()?;
    m.config = json!({ "shape": shape, "factor": a.factor, "times": a.times });
    let mut any = false;
    for name in [PSI_FILE, ZETA_FILE] {
        let path = a.in_dir.join(name);
        if !path.exists() {
            continue;
        }
        any = true;
        let mut f = load(path, m)?;
        if let Some(times) = &a.times {
            let idx = times
                .iter()
                .map(|&t| {
                    f.time_index(t, 1e-9)
                        .ok_or_else(|| Failure::Usage(format!("{name} has no slice at t = {t}")))
                })
                .collect::<Res<Vec<_>>>()?;
            f = f.select_times(&idx)?;
        }
        if let Some((nlat, nlon)) = shape {
            f = reduce_to_shape(&f, nlat, nlon)?;
        } else if let Some(k) = a.factor {
            f = block_reduce_mean(&f, k)?;
        }
        save(&f, a.out_dir.join(name), m)?;
    }
    if !any {
        return Err(Failure::Usage(format!(
            "{} holds neither {PSI_FILE} nor {ZETA_FILE}",
            a.in_dir.display()
        )));
    }
    Ok(())
}

struct FileObserver {
    history: BufWriter<File>,
    checkpoint: PathBuf,
    log_every: usize,
    total: usize,
}

impl TrainObserver for FileObserver {
    fn iteration(&mut self, row: &HistoryRow) -> qbve::Result<()> {
        let io = |e| qbve::Error::Io {
            path: "history.txt".into(),
            source: e,
        };
        writeln!(self.history, "{row}").map_err(io)?;
        self.history.flush().map_err(io)?;
        if self.log_every > 0 && (row.iter % self.log_every == 0 || row.iter == self.total) {
            eprintln!("iter {}/{} loss {:.6e}", row.iter, self.total, row.total);
        }
        Ok(())
    }

    fn checkpoint(&mut self, ck: &Checkpoint) -> qbve::Result<()> {
        ck.save(&self.checkpoint)
    }
}

fn train_cmd(a: &TrainArgs, deterministic: bool, m: &mut Manifest) -> Res<()> {
    let model = ModelConfig {
        fm_interleave_layers: a.fm_layers,
        sphere_map: match a.sphere_map {
            MapArg::Colatitude => SphereMap::Colatitude,
            MapArg::AsPrinted => SphereMap::AsPrinted,
        },
        entangler: match a.entangler {
            EntanglerArg::Chain => Entangler::Chain,
            EntanglerArg::Ring => Entangler::Ring,
        },
        rng_seed: a.seed,
        ..ModelConfig::new(a.qubits, a.layers)
    };
    let weights = match &a.weights {
        None => None,
        Some(w) => Some(
            <[f64; 4]>::try_from(w.as_slice())
                .map_err(|_| Failure::Usage(format!("--weights needs four values, got {}", w.len())))?,
        ),
    };
    let config = TrainConfig {
        mode: match a.mode {
            ModeArg::Qcl => TrainMode::Qcl,
            ModeArg::Dqc => TrainMode::Dqc,
        },
        model,
        iterations: a.iters,
        learning_rate: a.lr,
        batch_sizes: match a.mode {
            ModeArg::Qcl => vec![a.batch],
            ModeArg::Dqc => a.batches.clone(),
        },
        rng_seed: a.seed,
        pole_cutoff_deg: a.pole_cutoff_deg,
        checkpoint_interval: a.checkpoint_interval,
        alpha4: a.alpha4,
        weights,
        consts: a.physics.resolve()?,
        t_max: a.t_max,
        strict_r_scaling: a.strict_r_scaling,
        deterministic,
    };
    config.validate()?;
    m.config = serde_json::to_value(&config).map_err(qbve::Error::from)?;
    m.seed = Some(a.seed);
    let reference = Reference {
        psi: load(a.ref_dir.join(PSI_FILE), m)?,
        zeta: load(a.ref_dir.join(ZETA_FILE), m)?,
    };
    let history_path = a.out_dir.join("history.txt");
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(&history_path)
        .map_err(|e| qbve::Error::Io {
            path: history_path.clone(),
            source: e,
        })?;
    let ck_path = a.out_dir.join("checkpoint.json");
    let mut obs = FileObserver {
        history: BufWriter::new(file),
        checkpoint: ck_path.clone(),
        log_every: a.log_every,
        total: a.iters,
    };
    m.outputs.push(history_path);
    m.outputs.push(ck_path);
    let outcome = train(&config, &reference, &mut obs)?;
    if let Some(w) = outcome.weights {
        m.notes.insert("loss_weights".into(), json!(w.alpha));
    }
    if let Some(last) = outcome.history.last() {
        m.notes.insert("final_loss".into(), json!(last.total));
    }
    Ok(())
}

fn predict(a: &PredictArgs, m: &mut Manifest) -> Res<()> {
    let consts = a.physics.resolve()?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    m.inputs.push(a.checkpoint.clone());
    m.seed = Some(ck.rng_seed);
    let template = match (&a.template, a.nlat, a.nlon) {
        (Some(p), _, _) => load(p.clone(), m)?,
        (None, Some(nlat), Some(nlon)) => {
            let times = a.times.clone().unwrap_or_else(|| vec![0.0]);
            let n = times.len() * nlat * nlon;
            Field::new(
                Quantity::Psi,
                "nondimensional",
                AngleUnit::Degrees,
                times,
                equiangular_lats(nlat),
                equiangular_lons(nlon),
                vec![0.0; n],
            )?
        }
        _ => return Err(Failure::Usage("predict needs --template or --nlat and --nlon".into())),
    };
    let times = a.times.clone().unwrap_or_else(|| template.times.clone());
    m.config = json!({
        "consts": consts,
        "times": times,
        "n_lat": template.n_lat(),
        "n_lon": template.n_lon(),
        "with_zeta": !a.psi_only,
        "step": ck.step,
    });
    let (psi, zeta) = predict_fields(&ck, &template, &times, &consts, !a.psi_only)?;
    save(&psi, a.out_dir.join(PSI_FILE), m)?;
    if let Some(z) = zeta {
        save(&z, a.out_dir.join(ZETA_FILE), m)?;
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs, m: &mut Manifest) -> Res<()> {
    m.config = json!({ "gates": a.gate.iter().map(|g| g.to_string()).collect::<Vec<_>>() });
    let mut reports = Vec::new();
    for name in [PSI_FILE, ZETA_FILE] {
        let (p, r) = (a.pred_dir.join(name), a.ref_dir.join(name));
        if name == ZETA_FILE && !(p.exists() && r.exists()) {
            continue;
        }
        let pred = load(p, m)?;
        let reference = load(r, m)?;
        reports.push(FomReport::compute(&pred, &reference)?);
    }
    let mut text = String::new();
    let mut metrics = serde_json::Map::new();
    for r in &reports {
        text.push_str(&r.to_text());
        for (k, v) in r.metrics() {
            metrics.insert(k, json!(v));
        }
    }
    let report_path = a.out_dir.join("report.txt");
    write_atomic(&report_path, text.as_bytes())?;
    let metrics_path = a.out_dir.join("metrics.json");
    let mj = serde_json::to_string_pretty(&metrics).map_err(qbve::Error::from)?;
    write_atomic(&metrics_path, mj.as_bytes())?;
    m.outputs.push(report_path);
    m.outputs.push(metrics_path);
    print!("{text}");

    let all: Vec<(String, f64)> = reports.iter().flat_map(|r| r.metrics()).collect();
    let mut failed = Vec::new();
    for g in &a.gate {
        let Some(&(_, v)) = all.iter().find(|(k, _)| *k == g.metric) else {
            let names: Vec<&str> = all.iter().map(|(k, _)| k.as_str()).collect();
            return Err(Failure::Usage(format!("unknown metric {:?}; available: {}", g.metric, names.join(", "))));
        };
        let ok = g.passes(v);
        println!("{} {g} (value {v})", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(format!("{g} (value {v})"));
        }
    }
    m.notes.insert("gates_failed".into(), json!(failed));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Gate(failed))
    }
}
