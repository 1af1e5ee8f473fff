//! ITKsM and ITKrM: one-iteration updates, online accumulation and the
//! multi-iteration learner.
//!
//! Both algorithms threshold every signal with the current dictionary and
//! average, per atom, over the signals that selected it:
//!
//! * ITKsM averages the signed signals, `y_n · sign(<ψ_k, y_n>)`;
//! * ITKrM averages signed residuals, `[y_n − P(Ψ_I)y_n + P(ψ_k)y_n] ·
//!   sign(<ψ_k, y_n>)`.
//!
//! The averages are then normalised to give the next dictionary.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{distance_asym, recovery_stats, sign, Dictionary, RECOVERY_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{draw_batch, CoefficientSpec, SignalBatch};
use crate::rng::{self, ItkmRng};
use crate::sparse::{
    count_failures, project_with_rhs, select_top, ProjectionStrategy, ProjectionWorkspace, CHUNK,
};

/// Norm below which an averaged atom counts as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Chunks whose partial sums are computed in parallel before being folded
/// into the running total in index order.
const CHUNKS_PER_ROUND: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Itksm,
    Itkrm,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Itksm => "itksm",
            Algorithm::Itkrm => "itkrm",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "itksm" => Ok(Algorithm::Itksm),
            "itkrm" => Ok(Algorithm::Itkrm),
            other => Err(Error::invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplacementPolicy {
    /// Replace a degenerate atom by a uniform draw from the sphere.
    #[default]
    RandomRedraw,
    /// Keep the atom from the previous iterate.
    KeepPrevious,
}

/// Settings shared by a single iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IterationOptions {
    pub replacement: ReplacementPolicy,
    pub projection: ProjectionStrategy,
    /// Spread chunks over the rayon pool. Results are identical either way.
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub dictionary: Dictionary,
    /// Atoms whose average vanished and were replaced.
    pub replaced: Vec<usize>,
    /// Projections that used the pseudo-inverse path.
    pub projection_fallbacks: usize,
}

/// Kahan-compensated per-atom running sums for one pass over signals.
///
/// Signals can be pushed one at a time (the online form), which only keeps
/// the current dictionary, the `K` partial sums and the signal at hand.
#[derive(Debug, Clone)]
pub struct Accumulator<'a> {
    dict: &'a Dictionary,
    algorithm: Algorithm,
    sparsity: usize,
    ws: ProjectionWorkspace,
    sums: DMatrix<f64>,
    comp: DMatrix<f64>,
    count: usize,
    extra_fallbacks: usize,
}

impl<'a> Accumulator<'a> {
    pub fn new(
        dict: &'a Dictionary,
        algorithm: Algorithm,
        sparsity: usize,
        projection: ProjectionStrategy,
    ) -> Result<Self> {
        check_sparsity(dict, sparsity)?;
        let ws = ProjectionWorkspace::new(dict, projection);
        Ok(Self::with_workspace(dict, algorithm, sparsity, ws))
    }

    fn with_workspace(
        dict: &'a Dictionary,
        algorithm: Algorithm,
        sparsity: usize,
        ws: ProjectionWorkspace,
    ) -> Self {
        let (d, k) = (dict.dim(), dict.n_atoms());
        Accumulator {
            dict,
            algorithm,
            sparsity,
            ws,
            sums: DMatrix::zeros(d, k),
            comp: DMatrix::zeros(d, k),
            count: 0,
            extra_fallbacks: 0,
        }
    }

    /// Number of signals seen so far.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.dict.dim() {
            return Err(Error::shape(self.dict.dim(), y.len()));
        }
        let corr = self.dict.correlations(y);
        self.push_correlated(y.as_view(), corr.as_slice());
        Ok(())
    }

    /// `corr` must hold `Ψ*y`.
    fn push_correlated(&mut self, y: DVectorView<'_, f64>, corr: &[f64]) {
        let support = select_top(corr, self.sparsity);
        match self.algorithm {
            Algorithm::Itksm => {
                for &k in support.indices() {
                    let s = sign(corr[k]);
                    kahan_add_column(&mut self.sums, &mut self.comp, k, y.iter().map(|v| s * v));
                }
            }
            Algorithm::Itkrm => {
                let idx = support.indices();
                let rhs: Vec<f64> = idx.iter().map(|&k| corr[k]).collect();
                let projected = project_with_rhs(self.dict, idx, y, &rhs, &mut self.ws);
                let residual = y - projected;
                for &k in idx {
                    let s = sign(corr[k]);
                    let weight = corr[k].abs();
                    let atom = self.dict.atom(k);
                    kahan_add_column(
                        &mut self.sums,
                        &mut self.comp,
                        k,
                        residual.iter().zip(atom.iter()).map(|(r, a)| s * r + weight * a),
                    );
                }
            }
        }
        self.count += 1;
    }

    fn absorb(&mut self, other: Accumulator<'_>) {
        let k = self.sums.ncols();
        for j in 0..k {
            kahan_add_column(&mut self.sums, &mut self.comp, j, other.sums.column(j).iter().copied());
            kahan_add_column(
                &mut self.sums,
                &mut self.comp,
                j,
                other.comp.column(j).iter().map(|c| -c),
            );
        }
        self.count += other.count;
        self.extra_fallbacks += other.ws.fallbacks() + other.extra_fallbacks;
    }

    /// Averaged (not yet normalised) atom `k`.
    pub fn mean_atom(&self, k: usize) -> DVector<f64> {
        let n = self.count.max(1) as f64;
        (self.sums.column(k) - self.comp.column(k)) / n
    }

    /// Normalises the averages into the next dictionary.
    pub fn finish<R: Rng + ?Sized>(
        self,
        replacement: ReplacementPolicy,
        rng: &mut R,
    ) -> IterationOutcome {
        let (d, k) = (self.dict.dim(), self.dict.n_atoms());
        let mut atoms = DMatrix::zeros(d, k);
        let mut replaced = Vec::new();
        for j in 0..k {
            let mean = self.mean_atom(j);
            let (atom, was_replaced) =
                normalize_or_replace(mean, self.dict.atom(j), replacement, rng);
            if was_replaced {
                replaced.push(j);
            }
            atoms.set_column(j, &atom);
        }
        IterationOutcome {
            dictionary: Dictionary::from_matrix_unchecked(atoms),
            replaced,
            projection_fallbacks: self.ws.fallbacks() + self.extra_fallbacks,
        }
    }
}

fn kahan_add_column(
    sums: &mut DMatrix<f64>,
    comp: &mut DMatrix<f64>,
    k: usize,
    values: impl Iterator<Item = f64>,
) {
    let mut s = sums.column_mut(k);
    let mut c = comp.column_mut(k);
    for (i, v) in values.enumerate() {
        let y = v - c[i];
        let t = s[i] + y;
        c[i] = (t - s[i]) - y;
        s[i] = t;
    }
}

/// Handles an averaged atom whose norm fell below [`DEGENERATE_NORM`].
pub fn replace_degenerate<R: Rng + ?Sized>(
    previous: DVectorView<'_, f64>,
    policy: ReplacementPolicy,
    rng: &mut R,
) -> DVector<f64> {
    match policy {
        ReplacementPolicy::RandomRedraw => rng::unit_vector(previous.len(), rng),
        ReplacementPolicy::KeepPrevious => previous.clone_owned(),
    }
}

/// Normalises `mean`, or replaces it when degenerate. Returns whether a
/// replacement happened.
pub fn normalize_or_replace<R: Rng + ?Sized>(
    mean: DVector<f64>,
    previous: DVectorView<'_, f64>,
    policy: ReplacementPolicy,
    rng: &mut R,
) -> (DVector<f64>, bool) {
    let norm = mean.norm();
    if norm < DEGENERATE_NORM || !norm.is_finite() {
        (replace_degenerate(previous, policy, rng), true)
    } else {
        (mean / norm, false)
    }
}

fn check_sparsity(dict: &Dictionary, s: usize) -> Result<()> {
    if s == 0 || s > dict.n_atoms() {
        return Err(Error::invalid(format!(
            "sparsity {s} outside 1..={}",
            dict.n_atoms()
        )));
    }
    Ok(())
}

/// One iteration of `algorithm` on the columns of `signals`.
///
/// Signals are processed in fixed chunks whose compensated partial sums are
/// folded in chunk order, so the output does not depend on
/// `opts.parallel` or the number of worker threads.
pub fn iteration<R: Rng + ?Sized>(
    algorithm: Algorithm,
    dict: &Dictionary,
    signals: &DMatrix<f64>,
    sparsity: usize,
    opts: &IterationOptions,
    rng: &mut R,
) -> Result<IterationOutcome> {
    check_sparsity(dict, sparsity)?;
    if signals.nrows() != dict.dim() {
        return Err(Error::shape(dict.dim(), signals.nrows()));
    }
    let n = signals.ncols();
    if n == 0 {
        return Err(Error::invalid("an iteration needs at least one signal"));
    }
    let ws = ProjectionWorkspace::new(dict, opts.projection);
    let mut total = Accumulator::with_workspace(dict, algorithm, sparsity, ws.fork());

    let chunk_sum = |c: usize| {
        let start = c * CHUNK;
        let len = CHUNK.min(n - start);
        let block = signals.columns(start, len);
        let corr = dict.matrix().tr_mul(&block);
        let mut acc = Accumulator::with_workspace(dict, algorithm, sparsity, ws.fork());
        for j in 0..len {
            acc.push_correlated(block.column(j), corr.column(j).as_slice());
        }
        acc
    };

    let n_chunks = n.div_ceil(CHUNK);
    let mut next = 0;
    while next < n_chunks {
        let end = (next + CHUNKS_PER_ROUND).min(n_chunks);
        let partials: Vec<Accumulator<'_>> = if opts.parallel {
            (next..end).into_par_iter().map(chunk_sum).collect()
        } else {
            (next..end).map(chunk_sum).collect()
        };
        for p in partials {
            total.absorb(p);
        }
        next = end;
    }
    Ok(total.finish(opts.replacement, rng))
}

pub fn itksm_iteration<R: Rng + ?Sized>(
    dict: &Dictionary,
    signals: &DMatrix<f64>,
    sparsity: usize,
    opts: &IterationOptions,
    rng: &mut R,
) -> Result<IterationOutcome> {
    iteration(Algorithm::Itksm, dict, signals, sparsity, opts, rng)
}

pub fn itkrm_iteration<R: Rng + ?Sized>(
    dict: &Dictionary,
    signals: &DMatrix<f64>,
    sparsity: usize,
    opts: &IterationOptions,
    rng: &mut R,
) -> Result<IterationOutcome> {
    iteration(Algorithm::Itkrm, dict, signals, sparsity, opts, rng)
}

/// A batch of training signals, with the generating oracle when synthetic.
#[derive(Debug, Clone)]
pub enum TrainingBatch {
    Synthetic(SignalBatch),
    Plain(DMatrix<f64>),
}

impl TrainingBatch {
    pub fn signals(&self) -> &DMatrix<f64> {
        match self {
            TrainingBatch::Synthetic(b) => &b.signals,
            TrainingBatch::Plain(m) => m,
        }
    }

    pub fn oracle(&self) -> Option<&SignalBatch> {
        match self {
            TrainingBatch::Synthetic(b) => Some(b),
            TrainingBatch::Plain(_) => None,
        }
    }
}

/// Where the learner gets its signals from.
pub trait TrainingSource {
    fn dim(&self) -> usize;

    fn next_batch(&mut self, n: usize, rng: &mut ItkmRng) -> Result<TrainingBatch>;

    /// The dictionary the signals were generated from, if known.
    fn generating(&self) -> Option<&Dictionary> {
        None
    }
}

/// Draws signals from the sparse model on a known dictionary.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    pub dictionary: Dictionary,
    pub spec: CoefficientSpec,
    pub noise_sigma: f64,
}

impl TrainingSource for SyntheticSource {
    fn dim(&self) -> usize {
        self.dictionary.dim()
    }

    fn next_batch(&mut self, n: usize, rng: &mut ItkmRng) -> Result<TrainingBatch> {
        draw_batch(&self.dictionary, &self.spec, self.noise_sigma, n, rng).map(TrainingBatch::Synthetic)
    }

    fn generating(&self) -> Option<&Dictionary> {
        Some(&self.dictionary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Independent uniform column picks.
    WithReplacement,
    /// Disjoint batches walking a single shuffled pass over the data.
    WithoutReplacement,
}

/// Samples columns of a fixed data matrix.
#[derive(Debug, Clone)]
pub struct DatasetSource {
    data: DMatrix<f64>,
    sampling: Sampling,
    order: Option<Vec<usize>>,
    cursor: usize,
}

impl DatasetSource {
    pub fn new(data: DMatrix<f64>, sampling: Sampling) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::invalid("dataset is empty"));
        }
        Ok(DatasetSource {
            data,
            sampling,
            order: None,
            cursor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }
}

impl TrainingSource for DatasetSource {
    fn dim(&self) -> usize {
        self.data.nrows()
    }

    fn next_batch(&mut self, n: usize, rng: &mut ItkmRng) -> Result<TrainingBatch> {
        let total = self.data.ncols();
        let picks: Vec<usize> = match self.sampling {
            Sampling::WithReplacement => (0..n).map(|_| rng.random_range(0..total)).collect(),
            Sampling::WithoutReplacement => {
                let order = self.order.get_or_insert_with(|| {
                    let mut o: Vec<usize> = (0..total).collect();
                    rand::seq::SliceRandom::shuffle(o.as_mut_slice(), rng);
                    o
                });
                let remaining = total - self.cursor;
                if n > remaining {
                    return Err(Error::DatasetExhausted {
                        requested: n,
                        remaining,
                    });
                }
                let p = order[self.cursor..self.cursor + n].to_vec();
                self.cursor += n;
                p
            }
        };
        Ok(TrainingBatch::Plain(self.data.select_columns(picks.iter())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub sparsity: usize,
    pub iterations: usize,
    pub signals_per_iteration: usize,
    /// Draw a new batch every iteration; otherwise reuse the first one.
    pub fresh_batch: bool,
    pub replacement: ReplacementPolicy,
    pub seed: u64,
    #[serde(default)]
    pub parallel: bool,
    /// Stop once `d(Ψ_new, Ψ_old)` falls to this value.
    #[serde(default)]
    pub early_stop: Option<f64>,
    /// Record wall-clock seconds per iteration; off gives reproducible
    /// metric traces.
    #[serde(default = "default_true")]
    pub record_time: bool,
    #[serde(skip)]
    pub projection: ProjectionStrategy,
}

fn default_true() -> bool {
    true
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm, sparsity: usize, iterations: usize, signals: usize) -> Self {
        LearnerConfig {
            algorithm,
            sparsity,
            iterations,
            signals_per_iteration: signals,
            fresh_batch: true,
            replacement: ReplacementPolicy::RandomRedraw,
            seed: 0,
            parallel: false,
            early_stop: None,
            record_time: true,
            projection: ProjectionStrategy::GramPrecompute,
        }
    }

    pub fn validate(&self, n_atoms: usize) -> Result<()> {
        if self.signals_per_iteration == 0 {
            return Err(Error::Config("signals_per_iteration must be >= 1".into()));
        }
        if self.sparsity == 0 || self.sparsity > n_atoms {
            return Err(Error::Config(format!(
                "sparsity {} outside 1..={n_atoms}",
                self.sparsity
            )));
        }
        if let Some(theta) = self.early_stop {
            if !(theta >= 0.0) {
                return Err(Error::Config(format!("early_stop {theta} must be >= 0")));
            }
        }
        Ok(())
    }

    fn options(&self) -> IterationOptions {
        IterationOptions {
            replacement: self.replacement,
            projection: self.projection,
            parallel: self.parallel,
        }
    }
}

/// One row of the learner's trace. Row 0 describes the initial dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// `d(Ψ, Φ)` against the generating dictionary, when known.
    pub d_asym: Option<f64>,
    pub recovery_rate: Option<f64>,
    /// Thresholding failures of the iteration's input dictionary on its
    /// batch (synthetic sources only).
    pub support_mismatches: usize,
    pub sign_mismatches: usize,
    pub zero_norm_replacements: usize,
    pub projection_fallbacks: usize,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub dictionary: Dictionary,
    pub metrics: Vec<IterationMetrics>,
}

fn compare(dict: &Dictionary, generating: Option<&Dictionary>) -> Result<(Option<f64>, Option<f64>)> {
    match generating {
        Some(g) => Ok((
            Some(distance_asym(dict, g)?),
            Some(recovery_stats(dict, g, RECOVERY_THRESHOLD)?.rate),
        )),
        None => Ok((None, None)),
    }
}

/// Runs `config.iterations` iterations from `init`.
pub fn learn(
    init: &Dictionary,
    config: &LearnerConfig,
    source: &mut dyn TrainingSource,
) -> Result<LearnOutcome> {
    config.validate(init.n_atoms())?;
    if source.dim() != init.dim() {
        return Err(Error::shape(init.dim(), source.dim()));
    }
    let mut rng = rng::seeded(config.seed);
    let opts = config.options();
    let generating = source.generating().cloned();
    if let Some(g) = &generating {
        if g.n_atoms() != init.n_atoms() {
            return Err(Error::shape(g.n_atoms(), init.n_atoms()));
        }
    }

    let (d0, r0) = compare(init, generating.as_ref())?;
    let mut metrics = vec![IterationMetrics {
        iteration: 0,
        d_asym: d0,
        recovery_rate: r0,
        support_mismatches: 0,
        sign_mismatches: 0,
        zero_norm_replacements: 0,
        projection_fallbacks: 0,
        wall_time_seconds: 0.0,
    }];

    let mut current = init.clone();
    let mut reused: Option<TrainingBatch> = None;
    for it in 1..=config.iterations {
        let started = Instant::now();
        let fresh;
        let batch = if config.fresh_batch {
            fresh = source.next_batch(config.signals_per_iteration, &mut rng)?;
            &fresh
        } else {
            if reused.is_none() {
                reused = Some(source.next_batch(config.signals_per_iteration, &mut rng)?);
            }
            reused.as_ref().expect("batch drawn above")
        };

        let outcome = iteration(
            config.algorithm,
            &current,
            batch.signals(),
            config.sparsity,
            &opts,
            &mut rng,
        )?;
        let elapsed = started.elapsed().as_secs_f64();

        let failures = match (batch.oracle(), &generating) {
            (Some(oracle), Some(g)) => {
                let (aligned, _) = current.aligned_to(g)?;
                count_failures(&aligned, oracle, config.sparsity)?
            }
            _ => Default::default(),
        };
        let (d, r) = compare(&outcome.dictionary, generating.as_ref())?;
        metrics.push(IterationMetrics {
            iteration: it,
            d_asym: d,
            recovery_rate: r,
            support_mismatches: failures.support_mismatches,
            sign_mismatches: failures.sign_mismatches,
            zero_norm_replacements: outcome.replaced.len(),
            projection_fallbacks: outcome.projection_fallbacks,
            wall_time_seconds: if config.record_time { elapsed } else { 0.0 },
        });

        let step = match config.early_stop {
            Some(_) => Some(distance_asym(&outcome.dictionary, &current)?),
            None => None,
        };
        current = outcome.dictionary;
        if let (Some(theta), Some(step)) = (config.early_stop, step) {
            if step <= theta {
                break;
            }
        }
    }
    Ok(LearnOutcome {
        dictionary: current,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{make_dirac_dct, perturb_init, random_dictionary, InitRatio};
    use crate::rng::seeded;

    fn batch(d: &Dictionary, s: usize, n: usize, seed: u64) -> SignalBatch {
        let spec = CoefficientSpec::flat(s, d.n_atoms()).unwrap();
        draw_batch(d, &spec, 0.0, n, &mut seeded(seed)).unwrap()
    }

    #[test]
    fn copies_of_one_signal_give_that_signal() {
        let y = DVector::from_vec(vec![3.0, -1.0, 2.0]);
        let signals = DMatrix::from_fn(3, 20, |i, _| y[i]);
        let init = Dictionary::from_unnormalized(DMatrix::from_vec(3, 1, vec![1.0, 1.0, 1.0])).unwrap();
        for alg in [Algorithm::Itksm, Algorithm::Itkrm] {
            let out = iteration(alg, &init, &signals, 1, &Default::default(), &mut seeded(0)).unwrap();
            let atom = out.dictionary.atom(0);
            let target = &y / y.norm();
            assert!((atom - &target).norm() < 1e-14 || (atom + &target).norm() < 1e-14);
        }
    }

    #[test]
    fn online_matches_batch() {
        let dict = make_dirac_dct(16).unwrap();
        let b = batch(&dict, 3, 1500, 1);
        let init = perturb_init(&dict, InitRatio::new(1.0, 1.0).unwrap(), &mut seeded(2));
        for alg in [Algorithm::Itksm, Algorithm::Itkrm] {
            let batch_out =
                iteration(alg, &init, &b.signals, 3, &Default::default(), &mut seeded(0)).unwrap();
            let mut acc = Accumulator::new(&init, alg, 3, ProjectionStrategy::GramPrecompute).unwrap();
            for c in b.signals.column_iter() {
                acc.push(&c.clone_owned()).unwrap();
            }
            assert_eq!(acc.count(), 1500);
            let online = acc.finish(ReplacementPolicy::RandomRedraw, &mut seeded(0));
            let diff = (batch_out.dictionary.matrix() - online.dictionary.matrix()).abs().max();
            assert!(diff <= 1e-12, "{diff}");
        }
    }

    #[test]
    fn parallel_and_sequential_agree_exactly() {
        let dict = make_dirac_dct(16).unwrap();
        let b = batch(&dict, 2, 5000, 3);
        let init = perturb_init(&dict, InitRatio::new(1.0, 1.0).unwrap(), &mut seeded(4));
        let seq = IterationOptions::default();
        let par = IterationOptions {
            parallel: true,
            ..seq
        };
        for alg in [Algorithm::Itksm, Algorithm::Itkrm] {
            let a = iteration(alg, &init, &b.signals, 2, &seq, &mut seeded(0)).unwrap();
            let c = iteration(alg, &init, &b.signals, 2, &par, &mut seeded(0)).unwrap();
            assert_eq!(a.dictionary, c.dictionary);
        }
    }

    #[test]
    fn keep_previous_returns_input_atom() {
        let prev = DVector::from_vec(vec![0.6, 0.8]);
        let out = replace_degenerate(prev.as_view(), ReplacementPolicy::KeepPrevious, &mut seeded(0));
        assert_eq!(out, prev);
        let (n, replaced) = normalize_or_replace(
            DVector::from_vec(vec![3.0, 4.0]),
            prev.as_view(),
            ReplacementPolicy::KeepPrevious,
            &mut seeded(0),
        );
        assert!(!replaced);
        assert_eq!(n, prev);
    }

    #[test]
    fn starved_atoms_are_replaced() {
        // K = 100 atoms, S = 1, N = 10 signals: at most 10 atoms are used
        let mut rng = seeded(5);
        let dict = random_dictionary(20, 100, &mut rng).unwrap();
        let b = batch(&dict, 1, 10, 6);
        for policy in [ReplacementPolicy::RandomRedraw, ReplacementPolicy::KeepPrevious] {
            let opts = IterationOptions {
                replacement: policy,
                ..Default::default()
            };
            let out = itksm_iteration(&dict, &b.signals, 1, &opts, &mut seeded(7)).unwrap();
            assert!(out.replaced.len() >= 90);
            for &k in &out.replaced {
                let atom = out.dictionary.atom(k);
                assert!((atom.norm() - 1.0).abs() < 1e-12);
                if policy == ReplacementPolicy::KeepPrevious {
                    assert_eq!(atom, dict.atom(k));
                }
            }
        }
    }

    #[test]
    fn zero_iterations_return_init() {
        let dict = make_dirac_dct(8).unwrap();
        let spec = CoefficientSpec::flat(2, 12).unwrap();
        let mut source = SyntheticSource {
            dictionary: dict.clone(),
            spec,
            noise_sigma: 0.0,
        };
        let cfg = LearnerConfig::new(Algorithm::Itkrm, 2, 0, 100);
        let out = learn(&dict, &cfg, &mut source).unwrap();
        assert_eq!(out.dictionary, dict);
        assert_eq!(out.metrics.len(), 1);
        assert_eq!(out.metrics[0].d_asym, Some(0.0));
    }

    #[test]
    fn dataset_without_replacement_runs_dry() {
        let data = DMatrix::from_fn(4, 30, |i, j| ((i + 1) * (j + 2)) as f64);
        let mut src = DatasetSource::new(data, Sampling::WithoutReplacement).unwrap();
        let mut rng = seeded(1);
        assert!(src.next_batch(20, &mut rng).is_ok());
        assert!(matches!(
            src.next_batch(20, &mut rng),
            Err(Error::DatasetExhausted {
                requested: 20,
                remaining: 10
            })
        ));
        let init = random_dictionary(4, 3, &mut seeded(2)).unwrap();
        let mut cfg = LearnerConfig::new(Algorithm::Itksm, 1, 5, 10);
        let data = DMatrix::from_fn(4, 30, |i, j| ((i + 1) * (j + 2)) as f64);
        let mut src = DatasetSource::new(data, Sampling::WithoutReplacement).unwrap();
        assert!(matches!(learn(&init, &cfg, &mut src), Err(Error::DatasetExhausted { .. })));
        cfg.fresh_batch = false;
        let data = DMatrix::from_fn(4, 30, |i, j| ((i + 1) * (j + 2)) as f64);
        let mut src = DatasetSource::new(data, Sampling::WithoutReplacement).unwrap();
        assert_eq!(learn(&init, &cfg, &mut src).unwrap().metrics.len(), 6);
    }

    #[test]
    fn early_stop_cuts_iterations() {
        let dict = make_dirac_dct(16).unwrap();
        let spec = CoefficientSpec::flat(2, 24).unwrap();
        let mut source = SyntheticSource {
            dictionary: dict.clone(),
            spec,
            noise_sigma: 0.0,
        };
        let mut cfg = LearnerConfig::new(Algorithm::Itkrm, 2, 30, 2000);
        cfg.early_stop = Some(1e-6);
        let out = learn(&dict, &cfg, &mut source).unwrap();
        assert!(out.metrics.len() < 31);
    }

    #[test]
    fn config_validation() {
        let dict = make_dirac_dct(8).unwrap();
        assert!(LearnerConfig::new(Algorithm::Itksm, 0, 1, 1).validate(12).is_err());
        assert!(LearnerConfig::new(Algorithm::Itksm, 13, 1, 1).validate(12).is_err());
        assert!(LearnerConfig::new(Algorithm::Itksm, 1, 1, 0).validate(12).is_err());
        assert!(iteration(
            Algorithm::Itksm,
            &dict,
            &DMatrix::zeros(8, 0),
            1,
            &Default::default(),
            &mut seeded(0)
        )
        .is_err());
        assert_eq!("ITKrM".parse::<Algorithm>().unwrap(), Algorithm::Itkrm);
    }
}
