use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use itkm::dataio;
use itkm::dictionary::{compute_metrics, make_dirac_dct, perturb_init, random_dictionary, InitRatio};
use itkm::harness::{self, CoefficientChoice, DictionaryChoice, ExperimentConfig, ExperimentKind, InitChoice, SamplingChoice};
use itkm::learner::Algorithm;
use itkm::{rng, Error, Result};

/// Dictionary learning with ITKsM and ITKrM.
///
/// Exit codes: 0 success, 2 configuration error, 3 I/O or format error.
/// ITKM_THREADS caps the number of worker threads.
#[derive(Parser)]
#[command(name = "itkm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a dictionary file (.itkm binary or .csv).
    GenDict(GenDict),
    /// Synthetic convergence experiment.
    SynthRun(SynthRun),
    /// Learn a dictionary on the patches of a PGM image.
    ImageRun(ImageRun),
    /// Print convergence radii and limiting errors.
    Bounds(BoundsCmd),
    /// Compare a learned dictionary with a reference.
    Eval(EvalCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum DictKind {
    DiracDct,
    Random,
    Perturbed,
}

#[derive(Args)]
struct GenDict {
    #[arg(long, value_enum, default_value = "dirac-dct")]
    kind: DictKind,
    /// Signal dimension.
    #[arg(long, default_value_t = 64)]
    d: usize,
    /// Atoms of a random dictionary (default 1.5 d).
    #[arg(long)]
    k: Option<usize>,
    /// Dictionary to perturb (default Dirac+DCT of dimension d).
    #[arg(long)]
    from: Option<PathBuf>,
    /// Perturbation ratio alpha:omega.
    #[arg(long, default_value = "1:1")]
    ratio: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

/// Keys shared by the experiment subcommands; each overrides the file.
#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Signals per iteration.
    #[arg(long)]
    signals: Option<usize>,
    /// Comma separated, e.g. itksm,itkrm.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    /// Disable data parallelism inside an iteration.
    #[arg(long)]
    sequential: bool,
    /// Write 0 in the seconds column so reruns give identical files.
    #[arg(long)]
    no_time: bool,
    #[arg(long)]
    early_stop: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    /// Even dimension of the Dirac+DCT generator.
    #[arg(long)]
    d: Option<usize>,
    /// Generating dictionary file instead of Dirac+DCT.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long, value_enum)]
    coefficients: Option<Coefficients>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Noise level 1/sqrt(d).
    #[arg(long)]
    unit_snr: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Coefficients {
    Flat,
    Geometric,
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Ratio,
    Random,
    File,
}

#[derive(Args)]
struct SynthRun {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum)]
    init: Option<Init>,
    #[arg(long)]
    init_ratio: Option<String>,
    #[arg(long)]
    init_path: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Run trials concurrently.
    #[arg(long)]
    parallel_trials: bool,
}

#[derive(Args)]
struct ImageRun {
    #[command(flatten)]
    common: Common,
    /// PGM image (P2 or P5).
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    patch_edge: Option<usize>,
    /// Learned atoms, excluding the constant atom.
    #[arg(long)]
    atoms: Option<usize>,
    #[arg(long, value_enum)]
    init: Option<Init>,
    #[arg(long)]
    init_path: Option<PathBuf>,
    /// Keep the literal normalize-then-project order without rescaling.
    #[arg(long)]
    no_renormalize: bool,
    /// Walk one shuffled pass over the patches instead of sampling.
    #[arg(long)]
    without_replacement: bool,
}

#[derive(Args)]
struct BoundsCmd {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sparsity: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    target_error: Option<f64>,
    /// Monte-Carlo samples for non-closed-form statistics.
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Also write the JSON report to this file.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalCmd {
    learned: PathBuf,
    reference: PathBuf,
    /// Inner product at which an atom counts as recovered.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    json: bool,
}

/// Loads the config file if given; `kind` forces the experiment type.
fn base_config(path: &Option<PathBuf>, kind: Option<ExperimentKind>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(kind) = kind {
        cfg.experiment = kind;
    }
    Ok(cfg)
}

fn apply_common(cfg: &mut ExperimentConfig, c: &Common) {
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = &c.output_dir {
        cfg.output_dir = v.clone();
    }
    if c.sparsity.is_some() {
        cfg.sparsity = c.sparsity;
    }
    if c.iterations.is_some() {
        cfg.iterations = c.iterations;
    }
    if c.signals.is_some() {
        cfg.signals_per_iteration = c.signals;
    }
    if let Some(a) = &c.algorithms {
        cfg.algorithms = a.clone();
    }
    if c.sequential {
        cfg.parallel = false;
    }
    if c.no_time {
        cfg.record_time = false;
    }
    if c.early_stop.is_some() {
        cfg.early_stop = c.early_stop;
    }
}

fn apply_model(cfg: &mut ExperimentConfig, m: &ModelArgs) {
    if let Some(d) = m.d {
        cfg.d = d;
    }
    if let Some(p) = &m.dictionary {
        cfg.dictionary = DictionaryChoice::File;
        cfg.dictionary_path = Some(p.clone());
    }
    if let Some(c) = m.coefficients {
        cfg.coefficients = match c {
            Coefficients::Flat => CoefficientChoice::Flat,
            Coefficients::Geometric => CoefficientChoice::Geometric,
        };
    }
    if let Some(s) = m.noise_sigma {
        cfg.noise_sigma = s;
        cfg.unit_snr = false;
    }
    if m.unit_snr {
        cfg.unit_snr = true;
    }
}

fn init_choice(i: Init) -> InitChoice {
    match i {
        Init::Ratio => InitChoice::Ratio,
        Init::Random => InitChoice::Random,
        Init::File => InitChoice::File,
    }
}

fn gen_dict(a: GenDict) -> Result<()> {
    let mut r = rng::seeded(a.seed);
    let dict = match a.kind {
        DictKind::DiracDct => make_dirac_dct(a.d),
        DictKind::Random => random_dictionary(a.d, a.k.unwrap_or(a.d * 3 / 2), &mut r),
        DictKind::Perturbed => {
            let base = match &a.from {
                Some(p) => dataio::load_dictionary(p)?,
                None => make_dirac_dct(a.d)?,
            };
            Ok(perturb_init(&base, a.ratio.parse::<InitRatio>()?, &mut r))
        }
    }?;
    dataio::save_dictionary(&a.output, &dict)?;
    let m = compute_metrics(&dict);
    println!(
        "wrote {} ({}x{}), coherence {:.6e}, frame bounds [{:.6e}, {:.6e}]",
        a.output.display(),
        dict.dim(),
        dict.n_atoms(),
        m.coherence,
        m.frame_lower,
        m.frame_upper
    );
    Ok(())
}

fn synth_run(a: SynthRun) -> Result<()> {
    let mut cfg = base_config(&a.common.config, Some(ExperimentKind::Synthetic))?;
    apply_common(&mut cfg, &a.common);
    apply_model(&mut cfg, &a.model);
    if let Some(i) = a.init {
        cfg.init = Some(init_choice(i));
    }
    if let Some(r) = a.init_ratio {
        cfg.init_ratio = r;
    }
    if let Some(p) = a.init_path {
        cfg.init_path = Some(p);
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if a.parallel_trials {
        cfg.parallel_trials = true;
    }
    let report = harness::run_synthetic(&cfg)?;
    println!("{:>5} {:>10} {:>14} {:>14} {:>14}", "iter", "algorithm", "d_asym min", "mean", "max");
    let last: Vec<_> = cfg
        .algorithms
        .iter()
        .filter_map(|alg| report.aggregate.iter().filter(|r| r.algorithm == *alg).last())
        .collect();
    for r in last {
        if let Some(s) = r.d_asym {
            println!("{:>5} {:>10} {:>14.6e} {:>14.6e} {:>14.6e}", r.iteration, r.algorithm.name(), s.min, s.mean, s.max);
        }
    }
    println!("metrics: {}", report.metrics_path.display());
    println!("aggregate: {}", report.aggregate_path.display());
    Ok(())
}

fn image_run(a: ImageRun) -> Result<()> {
    let mut cfg = base_config(&a.common.config, Some(ExperimentKind::Image))?;
    apply_common(&mut cfg, &a.common);
    if let Some(p) = a.image {
        cfg.image_path = Some(p);
    }
    if let Some(p) = a.patch_edge {
        cfg.patch_edge = p;
    }
    if a.atoms.is_some() {
        cfg.n_atoms = a.atoms;
    }
    if let Some(i) = a.init {
        cfg.init = Some(init_choice(i));
    }
    if let Some(p) = a.init_path {
        cfg.init_path = Some(p);
    }
    if a.no_renormalize {
        cfg.renormalize = false;
    }
    if a.without_replacement {
        cfg.sampling = SamplingChoice::WithoutReplacement;
    }
    let report = harness::run_image(&cfg)?;
    println!(
        "{}x{} image: {} patches kept, {} flat patches dropped",
        report.image.width, report.image.height, report.patches, report.dropped
    );
    for r in &report.results {
        println!(
            "{}: {} atoms written to {}",
            r.algorithm.name(),
            r.exported.n_atoms(),
            cfg.output_dir.join(format!("image_{}.itkm", r.algorithm.name())).display()
        );
    }
    Ok(())
}

fn bounds(a: BoundsCmd) -> Result<()> {
    let mut cfg = base_config(&a.config, None)?;
    if a.sparsity.is_some() {
        cfg.sparsity = a.sparsity;
    }
    apply_model(&mut cfg, &a.model);
    if let Some(t) = a.target_error {
        cfg.target_error = t;
    }
    if let Some(m) = a.mc_samples {
        cfg.mc_samples = m;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let report = harness::run_bounds(&cfg)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    if a.json {
        println!("{json}");
    } else {
        print!("{report}");
        if !report.strong_sparsity_ok {
            eprintln!("warning: not strongly sparse; the bounds are loose and learning often succeeds anyway");
        }
    }
    if let Some(p) = a.json_out {
        std::fs::write(&p, json).map_err(|e| Error::Io { path: p, source: e })?;
    }
    Ok(())
}

fn eval(a: EvalCmd) -> Result<()> {
    let report = harness::eval_files(&a.learned, &a.reference, a.threshold)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?);
    } else {
        print!("{report}");
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("ITKM_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("ITKM_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::GenDict(a) => gen_dict(a),
        Command::SynthRun(a) => synth_run(a),
        Command::ImageRun(a) => image_run(a),
        Command::Bounds(a) => bounds(a),
        Command::Eval(a) => eval(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
