//! Experiment runner behind the command line: configuration, seeded
//! synthetic and image experiments, metrics CSV files and theory reports.
//!
//! A configuration is a flat JSON object; every key is optional and
//! unknown keys are rejected. Keys left unset fall back to per-experiment
//! defaults (see [`ExperimentConfig`]).

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, TheoryInputs, TheoryReport};
use crate::dataio::{self, GrayImage, Preprocess};
use crate::dictionary::{
    compute_metrics, distance_asym, distance_sym, make_dirac_dct, perturb_init, random_dictionary,
    recovery_stats, Dictionary, InitRatio, RECOVERY_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::learner::{
    learn, Algorithm, DatasetSource, IterationMetrics, LearnerConfig, ReplacementPolicy, Sampling,
    SyntheticSource,
};
use crate::model::{statistics, unit_snr_sigma, CoefficientKind, CoefficientSpec};
use crate::rng;

pub const METRICS_HEADER: &str =
    "trial,iter,algorithm,d_asym,recovery_rate,support_mismatch,sign_mismatch,replacements,seconds";
pub const AGGREGATE_HEADER: &str = "iter,algorithm,trials,d_asym_min,d_asym_mean,d_asym_max,\
recovery_rate_min,recovery_rate_mean,recovery_rate_max";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Synthetic,
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryChoice {
    #[default]
    DiracDct,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitChoice {
    /// Perturb the generating dictionary by `init_ratio`.
    Ratio,
    Random,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientChoice {
    #[default]
    Flat,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingChoice {
    #[default]
    WithReplacement,
    WithoutReplacement,
}

/// Flat experiment configuration.
///
/// | key | synthetic default | image default |
/// |---|---|---|
/// | `sparsity` | 4 | 5 |
/// | `iterations` | 40 | 100 |
/// | `signals_per_iteration` | 8192 | 10000 |
/// | `init` | `ratio` (`"1:1"`) | `random` |
/// | `n_atoms` | from the dictionary | 63 |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub output_dir: PathBuf,

    pub dictionary: DictionaryChoice,
    pub d: usize,
    pub dictionary_path: Option<PathBuf>,

    pub coefficients: CoefficientChoice,
    pub decay_low: f64,
    pub decay_high: f64,
    pub sparsity: Option<usize>,
    pub noise_sigma: f64,
    /// Overrides `noise_sigma` with `1/√d`.
    pub unit_snr: bool,

    pub init: Option<InitChoice>,
    pub init_ratio: String,
    pub init_path: Option<PathBuf>,

    pub algorithms: Vec<Algorithm>,
    pub iterations: Option<usize>,
    pub signals_per_iteration: Option<usize>,
    pub fresh_batch: bool,
    pub replacement: ReplacementPolicy,
    pub early_stop: Option<f64>,
    pub trials: usize,
    pub parallel: bool,
    pub parallel_trials: bool,
    pub record_time: bool,

    pub image_path: Option<PathBuf>,
    pub patch_edge: usize,
    pub n_atoms: Option<usize>,
    pub renormalize: bool,
    pub sampling: SamplingChoice,

    pub target_error: f64,
    pub mc_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Synthetic,
            seed: 0,
            output_dir: PathBuf::from("itkm-out"),
            dictionary: DictionaryChoice::DiracDct,
            d: 64,
            dictionary_path: None,
            coefficients: CoefficientChoice::Flat,
            decay_low: crate::model::GEOMETRIC_DECAY_LOW,
            decay_high: crate::model::GEOMETRIC_DECAY_HIGH,
            sparsity: None,
            noise_sigma: 0.0,
            unit_snr: false,
            init: None,
            init_ratio: "1:1".into(),
            init_path: None,
            algorithms: vec![Algorithm::Itksm, Algorithm::Itkrm],
            iterations: None,
            signals_per_iteration: None,
            fresh_batch: true,
            replacement: ReplacementPolicy::RandomRedraw,
            early_stop: None,
            trials: 3,
            parallel: true,
            parallel_trials: false,
            record_time: true,
            image_path: None,
            patch_edge: 8,
            n_atoms: None,
            renormalize: true,
            sampling: SamplingChoice::WithReplacement,
            target_error: 0.01,
            mc_samples: 100_000,
        }
    }
}

impl ExperimentConfig {
    pub fn image() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Image,
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn is_image(&self) -> bool {
        self.experiment == ExperimentKind::Image
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity.unwrap_or(if self.is_image() { 5 } else { 4 })
    }

    pub fn iterations(&self) -> usize {
        self.iterations.unwrap_or(if self.is_image() { 100 } else { 40 })
    }

    pub fn signals_per_iteration(&self) -> usize {
        self.signals_per_iteration
            .unwrap_or(if self.is_image() { 10_000 } else { 8192 })
    }

    pub fn init(&self) -> InitChoice {
        self.init.unwrap_or(if self.is_image() {
            InitChoice::Random
        } else {
            InitChoice::Ratio
        })
    }

    /// Learned atoms in an image run (the constant atom is extra).
    pub fn image_atoms(&self) -> usize {
        self.n_atoms.unwrap_or(63)
    }

    /// Noise level for signals of dimension `d`.
    pub fn noise(&self, d: usize) -> f64 {
        if self.unit_snr {
            unit_snr_sigma(d)
        } else {
            self.noise_sigma
        }
    }

    pub fn coefficient_kind(&self) -> CoefficientKind {
        match self.coefficients {
            CoefficientChoice::Flat => CoefficientKind::Flat,
            CoefficientChoice::Geometric => CoefficientKind::Geometric {
                decay_low: self.decay_low,
                decay_high: self.decay_high,
            },
        }
    }

    pub fn learner(&self, algorithm: Algorithm, seed: u64) -> LearnerConfig {
        let mut c = LearnerConfig::new(
            algorithm,
            self.sparsity(),
            self.iterations(),
            self.signals_per_iteration(),
        );
        c.fresh_batch = self.fresh_batch;
        c.replacement = self.replacement;
        c.seed = seed;
        c.parallel = self.parallel;
        c.early_stop = self.early_stop;
        c.record_time = self.record_time;
        c
    }

    /// Cross-field checks that do not need any file.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.algorithms.is_empty() {
            return cfg("algorithms must not be empty".into());
        }
        if self.trials == 0 {
            return cfg("trials must be >= 1".into());
        }
        if self.sparsity() == 0 {
            return cfg("sparsity must be >= 1".into());
        }
        if self.signals_per_iteration() == 0 {
            return cfg("signals_per_iteration must be >= 1".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return cfg(format!("noise_sigma {} must be >= 0", self.noise_sigma));
        }
        if !(0.0 < self.decay_low && self.decay_low <= self.decay_high && self.decay_high <= 1.0) {
            return cfg(format!(
                "decay range [{}, {}] must satisfy 0 < low <= high <= 1",
                self.decay_low, self.decay_high
            ));
        }
        if !(self.target_error > 0.0 && self.target_error < 1.0) {
            return cfg(format!("target_error {} outside (0, 1)", self.target_error));
        }
        if self.dictionary == DictionaryChoice::DiracDct && (self.d < 4 || self.d % 2 != 0) {
            return cfg(format!("dirac_dct needs an even d >= 4, got {}", self.d));
        }
        if self.dictionary == DictionaryChoice::File && self.dictionary_path.is_none() {
            return cfg("dictionary = file needs dictionary_path".into());
        }
        match self.init() {
            InitChoice::Ratio => {
                self.init_ratio
                    .parse::<InitRatio>()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            InitChoice::File if self.init_path.is_none() => {
                return cfg("init = file needs init_path".into());
            }
            _ => {}
        }
        if self.is_image() {
            if self.image_path.is_none() {
                return cfg("image experiments need image_path".into());
            }
            if self.patch_edge == 0 {
                return cfg("patch_edge must be >= 1".into());
            }
            if self.init() == InitChoice::Ratio {
                return cfg("image experiments have no generating dictionary to perturb".into());
            }
            let k = self.image_atoms();
            if k == 0 || self.sparsity() > k {
                return cfg(format!("need 1 <= sparsity <= n_atoms, got S = {}, K = {k}", self.sparsity()));
            }
        }
        Ok(())
    }

    /// The generating dictionary of a synthetic experiment.
    pub fn generating_dictionary(&self) -> Result<Dictionary> {
        match self.dictionary {
            DictionaryChoice::DiracDct => make_dirac_dct(self.d),
            DictionaryChoice::File => {
                dataio::load_dictionary(self.dictionary_path.as_ref().expect("validated"))
            }
        }
    }
}

// ---------------------------------------------------------------- metrics CSV

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub trial: usize,
    pub algorithm: Algorithm,
    pub metrics: IterationMetrics,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

pub fn write_metrics_csv<W: Write>(w: W, rows: &[MetricsRow]) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        let m = &r.metrics;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{:?}",
            r.trial,
            m.iteration,
            r.algorithm.name(),
            opt(m.d_asym),
            opt(m.recovery_rate),
            m.support_mismatches,
            m.sign_mismatches,
            m.zero_norm_replacements,
            m.wall_time_seconds
        )?;
    }
    w.flush()
}

/// Parses a metrics CSV. Projection fallbacks are not stored and read as 0.
pub fn read_metrics_csv<R: Read>(r: R) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    let mut offset = 0usize;
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        let here = offset;
        offset += line.len() + 1;
        let perr = |m: String| Error::Parse { offset: here, message: m };
        if i == 0 {
            if line.trim_end() != METRICS_HEADER {
                return Err(perr(format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(perr(format!("expected 9 fields, got {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| perr(format!("bad integer {s:?}")));
        let float = |s: &str| s.parse::<f64>().map_err(|_| perr(format!("bad number {s:?}")));
        let maybe = |s: &str| if s.is_empty() { Ok(None) } else { float(s).map(Some) };
        rows.push(MetricsRow {
            trial: int(f[0])?,
            algorithm: f[2].parse().map_err(|_| perr(format!("bad algorithm {:?}", f[2])))?,
            metrics: IterationMetrics {
                iteration: int(f[1])?,
                d_asym: maybe(f[3])?,
                recovery_rate: maybe(f[4])?,
                support_mismatches: int(f[5])?,
                sign_mismatches: int(f[6])?,
                zero_norm_replacements: int(f[7])?,
                projection_fallbacks: 0,
                wall_time_seconds: float(f[8])?,
            },
        });
    }
    Ok(rows)
}

/// Min/mean/max of a metric across trials at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Spread { min, mean: values.iter().sum::<f64>() / values.len() as f64, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub iteration: usize,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub d_asym: Option<Spread>,
    pub recovery_rate: Option<Spread>,
}

/// Groups rows by (algorithm, iteration) in order of first appearance of
/// the algorithm. Trials that stopped early simply contribute fewer rows.
pub fn aggregate(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    let mut algorithms: Vec<Algorithm> = Vec::new();
    for r in rows {
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm);
        }
    }
    let mut out = Vec::new();
    for alg in algorithms {
        let mine: Vec<&MetricsRow> = rows.iter().filter(|r| r.algorithm == alg).collect();
        let last = mine.iter().map(|r| r.metrics.iteration).max().unwrap_or(0);
        for it in 0..=last {
            let at: Vec<&IterationMetrics> =
                mine.iter().map(|r| &r.metrics).filter(|m| m.iteration == it).collect();
            if at.is_empty() {
                continue;
            }
            let d: Vec<f64> = at.iter().filter_map(|m| m.d_asym).collect();
            let r: Vec<f64> = at.iter().filter_map(|m| m.recovery_rate).collect();
            out.push(AggregateRow {
                iteration: it,
                algorithm: alg,
                trials: at.len(),
                d_asym: Spread::of(&d),
                recovery_rate: Spread::of(&r),
            });
        }
    }
    out
}

pub fn write_aggregate_csv<W: Write>(w: W, rows: &[AggregateRow]) -> std::io::Result<()> {
    let spread = |s: Option<Spread>| match s {
        Some(s) => format!("{:?},{:?},{:?}", s.min, s.mean, s.max),
        None => ",,".into(),
    };
    let mut w = BufWriter::new(w);
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.iteration,
            r.algorithm.name(),
            r.trials,
            spread(r.d_asym),
            spread(r.recovery_rate)
        )?;
    }
    w.flush()
}

fn write_file(path: &Path, f: impl FnOnce(fs::File) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f(file).map_err(|e| Error::io(path, e))
}

fn prepare_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

// ---------------------------------------------------------------- synthetic

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub algorithm: Algorithm,
    pub dictionary: Dictionary,
    pub metrics: Vec<IterationMetrics>,
}

#[derive(Debug, Clone)]
pub struct SyntheticReport {
    pub generating: Dictionary,
    pub trials: Vec<TrialResult>,
    pub rows: Vec<MetricsRow>,
    pub aggregate: Vec<AggregateRow>,
    pub metrics_path: PathBuf,
    pub aggregate_path: PathBuf,
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    rng::derive(seed, trial as u64)
}

fn initial_dictionary(cfg: &ExperimentConfig, generating: Option<&Dictionary>, seed: u64, d: usize, k: usize) -> Result<Dictionary> {
    let mut r = rng::seeded(seed);
    let init = match cfg.init() {
        InitChoice::Ratio => {
            let g = generating.expect("validated: ratio init needs a generator");
            perturb_init(g, cfg.init_ratio.parse().map_err(|e: Error| Error::Config(e.to_string()))?, &mut r)
        }
        InitChoice::Random => random_dictionary(d, k, &mut r)?,
        InitChoice::File => dataio::load_dictionary(cfg.init_path.as_ref().expect("validated"))?,
    };
    if init.dim() != d || init.n_atoms() != k {
        return Err(Error::Config(format!(
            "initial dictionary is {}x{}, expected {d}x{k}",
            init.dim(),
            init.n_atoms()
        )));
    }
    Ok(init)
}

fn run_trial(cfg: &ExperimentConfig, generating: &Dictionary, trial: usize) -> Result<Vec<TrialResult>> {
    let seed = trial_seed(cfg.seed, trial);
    let (d, k) = (generating.dim(), generating.n_atoms());
    let init = initial_dictionary(cfg, Some(generating), rng::derive(seed, 0), d, k)?;
    let spec = CoefficientSpec::new(cfg.coefficient_kind(), cfg.sparsity(), k)
        .map_err(|e| Error::Config(e.to_string()))?;
    cfg.algorithms
        .iter()
        .map(|&alg| {
            let mut source = SyntheticSource {
                dictionary: generating.clone(),
                spec,
                noise_sigma: cfg.noise(d),
            };
            let out = learn(&init, &cfg.learner(alg, rng::derive(seed, 1)), &mut source)?;
            Ok(TrialResult { trial, algorithm: alg, dictionary: out.dictionary, metrics: out.metrics })
        })
        .collect()
}

/// Runs every trial, writes `metrics.csv`, `aggregate.csv`, the generating
/// dictionary and one final dictionary per trial and algorithm.
pub fn run_synthetic(cfg: &ExperimentConfig) -> Result<SyntheticReport> {
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::Synthetic {
        return Err(Error::Config("not a synthetic experiment".into()));
    }
    let generating = cfg.generating_dictionary()?;
    let spec_check = CoefficientSpec::new(cfg.coefficient_kind(), cfg.sparsity(), generating.n_atoms());
    spec_check.map_err(|e| Error::Config(e.to_string()))?;
    cfg.learner(cfg.algorithms[0], 0)
        .validate(generating.n_atoms())
        .map_err(|e| Error::Config(e.to_string()))?;
    prepare_output(&cfg.output_dir)?;

    let per_trial: Vec<Result<Vec<TrialResult>>> = if cfg.parallel_trials {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, &generating, t))
            .collect()
    } else {
        (0..cfg.trials).map(|t| run_trial(cfg, &generating, t)).collect()
    };
    let mut trials = Vec::new();
    for t in per_trial {
        trials.extend(t?);
    }

    let rows: Vec<MetricsRow> = trials
        .iter()
        .flat_map(|t| {
            t.metrics.iter().map(move |m| MetricsRow {
                trial: t.trial,
                algorithm: t.algorithm,
                metrics: m.clone(),
            })
        })
        .collect();
    let agg = aggregate(&rows);

    let dir = &cfg.output_dir;
    let metrics_path = dir.join("metrics.csv");
    let aggregate_path = dir.join("aggregate.csv");
    write_file(&metrics_path, |f| write_metrics_csv(f, &rows))?;
    write_file(&aggregate_path, |f| write_aggregate_csv(f, &agg))?;
    dataio::save_dictionary(dir.join("generating.itkm"), &generating)?;
    for t in &trials {
        dataio::save_dictionary(
            dir.join(format!("trial{}_{}.itkm", t.trial, t.algorithm.name())),
            &t.dictionary,
        )?;
    }
    write_file(&dir.join("config.json"), |mut f| f.write_all(cfg.to_json().as_bytes()))?;

    Ok(SyntheticReport { generating, trials, rows, aggregate: agg, metrics_path, aggregate_path })
}

// ---------------------------------------------------------------- image

#[derive(Debug, Clone)]
pub struct ImageResult {
    pub algorithm: Algorithm,
    /// Learned atoms only.
    pub learned: Dictionary,
    /// Constant atom followed by the learned atoms.
    pub exported: Dictionary,
    pub mosaic: nalgebra::DMatrix<f64>,
    pub metrics: Vec<IterationMetrics>,
}

#[derive(Debug, Clone)]
pub struct ImageReport {
    pub image: GrayImage,
    pub patches: usize,
    pub dropped: usize,
    pub results: Vec<ImageResult>,
}

/// Prepends the unit constant atom.
pub fn with_constant_atom(learned: &Dictionary) -> Result<Dictionary> {
    let d = learned.dim();
    let mut m = nalgebra::DMatrix::zeros(d, learned.n_atoms() + 1);
    m.column_mut(0).copy_from(&dataio::constant_atom(d));
    m.columns_mut(1, learned.n_atoms()).copy_from(learned.matrix());
    Dictionary::from_matrix(m)
}

/// Learns `n_atoms` atoms on the preprocessed patches of one image and
/// writes `image_<alg>.itkm` (constant atom first), `mosaic_<alg>.itkm`,
/// `mosaic_<alg>.pgm` and `metrics.csv`.
pub fn run_image(cfg: &ExperimentConfig) -> Result<ImageReport> {
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::Image {
        return Err(Error::Config("not an image experiment".into()));
    }
    let image = dataio::read_pgm(cfg.image_path.as_ref().expect("validated"))?;
    let p = cfg.patch_edge;
    if p > image.width.min(image.height) {
        return Err(Error::Config(format!(
            "patch_edge {p} exceeds the {}x{} image",
            image.width, image.height
        )));
    }
    let raw = dataio::extract_patches(&image, p)?;
    let ps = dataio::preprocess_patches(
        &raw,
        Preprocess { normalize: true, remove_mean: true, renormalize: cfg.renormalize },
    );
    if ps.is_empty() {
        return Err(Error::Config("every patch is flat; nothing to learn".into()));
    }
    let d = p * p;
    let k = cfg.image_atoms();
    let sampling = match cfg.sampling {
        SamplingChoice::WithReplacement => Sampling::WithReplacement,
        SamplingChoice::WithoutReplacement => Sampling::WithoutReplacement,
    };
    prepare_output(&cfg.output_dir)?;
    let init = initial_dictionary(cfg, None, rng::derive(cfg.seed, 0), d, k)?;

    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &alg in &cfg.algorithms {
        let mut source = DatasetSource::new(ps.patches.clone(), sampling)?;
        let out = learn(&init, &cfg.learner(alg, rng::derive(cfg.seed, 1)), &mut source)?;
        let exported = with_constant_atom(&out.dictionary)?;
        let mosaic = dataio::mosaic(exported.matrix(), p)?;
        let dir = &cfg.output_dir;
        dataio::save_dictionary(dir.join(format!("image_{}.itkm", alg.name())), &exported)?;
        dataio::save_matrix(dir.join(format!("mosaic_{}.itkm", alg.name())), &mosaic)?;
        let tiles = GrayImage::new(mosaic.ncols(), mosaic.nrows(), mosaic.transpose().as_slice().to_vec())?;
        dataio::write_pgm(dir.join(format!("mosaic_{}.pgm", alg.name())), &tiles, true)?;
        rows.extend(out.metrics.iter().map(|m| MetricsRow { trial: 0, algorithm: alg, metrics: m.clone() }));
        results.push(ImageResult { algorithm: alg, learned: out.dictionary, exported, mosaic, metrics: out.metrics });
    }
    write_file(&cfg.output_dir.join("metrics.csv"), |f| write_metrics_csv(f, &rows))?;
    write_file(&cfg.output_dir.join("config.json"), |mut f| f.write_all(cfg.to_json().as_bytes()))?;
    Ok(ImageReport { image, patches: ps.len(), dropped: ps.dropped, results })
}

// ---------------------------------------------------------------- bounds

/// Theory inputs for the configured dictionary and coefficient model.
pub fn theory_inputs(cfg: &ExperimentConfig) -> Result<TheoryInputs> {
    cfg.validate()?;
    let dict = cfg.generating_dictionary()?;
    let spec = CoefficientSpec::new(cfg.coefficient_kind(), cfg.sparsity(), dict.n_atoms())
        .map_err(|e| Error::Config(e.to_string()))?;
    let sigma = cfg.noise(dict.dim());
    let stats = statistics(&spec, sigma, dict.dim(), cfg.mc_samples, &mut rng::seeded(cfg.seed))?;
    Ok(TheoryInputs::from_parts(
        dict.dim(),
        dict.n_atoms(),
        cfg.sparsity(),
        &compute_metrics(&dict),
        &stats,
        sigma,
        cfg.target_error,
    ))
}

pub fn run_bounds(cfg: &ExperimentConfig) -> Result<TheoryReport> {
    bounds::report(&theory_inputs(cfg)?)
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub d: usize,
    pub k: usize,
    /// `d(learned, reference)`: the worst learned atom's distance to its
    /// closest reference atom.
    pub d_asym: f64,
    /// `d(reference, learned)`.
    pub d_asym_reverse: f64,
    pub d_sym: f64,
    pub recovery_threshold: f64,
    pub recovery_rate: f64,
    pub recovered: usize,
}

pub fn eval(learned: &Dictionary, reference: &Dictionary, threshold: f64) -> Result<EvalReport> {
    let rec = recovery_stats(learned, reference, threshold)?;
    Ok(EvalReport {
        d: reference.dim(),
        k: reference.n_atoms(),
        d_asym: distance_asym(learned, reference)?,
        d_asym_reverse: distance_asym(reference, learned)?,
        d_sym: distance_sym(reference, learned)?.distance,
        recovery_threshold: threshold,
        recovery_rate: rec.rate,
        recovered: rec.recovered.iter().filter(|&&r| r).count(),
    })
}

pub fn eval_files(learned: impl AsRef<Path>, reference: impl AsRef<Path>, threshold: Option<f64>) -> Result<EvalReport> {
    eval(
        &dataio::load_dictionary(learned)?,
        &dataio::load_dictionary(reference)?,
        threshold.unwrap_or(RECOVERY_THRESHOLD),
    )
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dimension / atoms      {} / {}", self.d, self.k)?;
        writeln!(f, "d(learned, reference)  {:.6e}", self.d_asym)?;
        writeln!(f, "d(reference, learned)  {:.6e}", self.d_asym_reverse)?;
        writeln!(f, "symmetric distance     {:.6e}", self.d_sym)?;
        writeln!(
            f,
            "recovered (>= {})    {} / {} ({:.2}%)",
            self.recovery_threshold,
            self.recovered,
            self.k,
            100.0 * self.recovery_rate
        )
    }
}
