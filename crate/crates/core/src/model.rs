//! The sparse signal model: sign- and permutation-invariant coefficients on
//! a dictionary plus Gaussian noise,
//!
//! ```text
//! y = (Φ x + r) / √(1 + ‖r‖²),   x(k) = σ(k) c(p(k)).
//! ```
//!
//! Besides the signals, every batch keeps the ground truth (supports, signs,
//! coefficient magnitudes, noise norms) so that the learner's thresholding
//! can be checked against the oracle.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::rng;

pub const GEOMETRIC_DECAY_LOW: f64 = 0.9;
pub const GEOMETRIC_DECAY_HIGH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CoefficientKind {
    /// `c(1) = … = c(S) = 1/√S`.
    Flat,
    /// `c(k) = b₀ c_b^k` with `c_b` uniform in `[decay_low, decay_high]`,
    /// redrawn for every signal.
    Geometric { decay_low: f64, decay_high: f64 },
}

impl CoefficientKind {
    pub fn geometric() -> Self {
        CoefficientKind::Geometric {
            decay_low: GEOMETRIC_DECAY_LOW,
            decay_high: GEOMETRIC_DECAY_HIGH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    pub kind: CoefficientKind,
    pub sparsity: usize,
    pub n_atoms: usize,
}

impl CoefficientSpec {
    pub fn flat(sparsity: usize, n_atoms: usize) -> Result<Self> {
        Self::new(CoefficientKind::Flat, sparsity, n_atoms)
    }

    pub fn geometric(sparsity: usize, n_atoms: usize) -> Result<Self> {
        Self::new(CoefficientKind::geometric(), sparsity, n_atoms)
    }

    pub fn new(kind: CoefficientKind, sparsity: usize, n_atoms: usize) -> Result<Self> {
        let spec = CoefficientSpec {
            kind,
            sparsity,
            n_atoms,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sparsity == 0 || self.sparsity > self.n_atoms {
            return Err(Error::invalid(format!(
                "sparsity {} outside 1..={}",
                self.sparsity, self.n_atoms
            )));
        }
        if let CoefficientKind::Geometric {
            decay_low,
            decay_high,
        } = self.kind
        {
            if !(decay_low > 0.0 && decay_low <= decay_high && decay_high <= 1.0) {
                return Err(Error::invalid(format!(
                    "decay range [{decay_low}, {decay_high}] must lie in (0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// The non-zero head `c(1..=S)` for a given decay (ignored when flat).
    pub fn sequence(&self, decay: f64) -> Vec<f64> {
        let s = self.sparsity;
        match self.kind {
            CoefficientKind::Flat => vec![1.0 / (s as f64).sqrt(); s],
            CoefficientKind::Geometric { .. } => geometric_sequence(s, decay),
        }
    }

    /// Draws the decay parameter (if any) and the coefficient head.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Option<f64>) {
        match self.kind {
            CoefficientKind::Flat => (self.sequence(1.0), None),
            CoefficientKind::Geometric {
                decay_low,
                decay_high,
            } => {
                let cb = if decay_high > decay_low {
                    rng.random_range(decay_low..=decay_high)
                } else {
                    decay_low
                };
                (geometric_sequence(self.sparsity, cb), Some(cb))
            }
        }
    }
}

/// `b₀ c_b^k` for `k = 1..=s`, with `b₀ = (Σ c_b^{2k})^{-1/2}`.
pub fn geometric_sequence(s: usize, cb: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=s).map(|k| cb.powi(k as i32)).collect();
    let b0 = raw.iter().map(|v| v * v).sum::<f64>().sqrt().recip();
    raw.into_iter().map(|v| b0 * v).collect()
}

/// One drawn signal with its oracle data.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawnSignal {
    pub signal: DVector<f64>,
    /// Atoms in coefficient-rank order: `support[j]` carries `c(j+1)`.
    pub support: Vec<usize>,
    pub signs: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub decay: Option<f64>,
    pub noise_norm: f64,
}

/// Draws `y = (Φ x + r)/√(1 + ‖r‖²)`; `noise_sigma = 0` skips the noise
/// term and the division.
pub fn draw_signal<R: Rng + ?Sized>(
    dict: &Dictionary,
    spec: &CoefficientSpec,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<DrawnSignal> {
    check_model(dict, spec, noise_sigma)?;
    Ok(draw_unchecked(dict, spec, noise_sigma, rng))
}

fn check_model(dict: &Dictionary, spec: &CoefficientSpec, noise_sigma: f64) -> Result<()> {
    spec.validate()?;
    if spec.n_atoms != dict.n_atoms() {
        return Err(Error::shape(dict.n_atoms(), spec.n_atoms));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid(format!("noise level {noise_sigma} must be >= 0")));
    }
    Ok(())
}

fn draw_unchecked<R: Rng + ?Sized>(
    dict: &Dictionary,
    spec: &CoefficientSpec,
    noise_sigma: f64,
    rng: &mut R,
) -> DrawnSignal {
    let (coefficients, decay) = spec.draw(rng);
    // partial Fisher–Yates: the first S images of a uniform permutation
    let support: Vec<usize> = index::sample(rng, spec.n_atoms, spec.sparsity).into_vec();
    let signs: Vec<f64> = (0..spec.sparsity)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();

    let mut y = DVector::zeros(dict.dim());
    for ((&k, &s), &c) in support.iter().zip(&signs).zip(&coefficients) {
        y.axpy(s * c, &dict.atom(k), 1.0);
    }
    let mut noise_norm = 0.0;
    if noise_sigma > 0.0 {
        let noise = DVector::from_iterator(
            dict.dim(),
            (0..dict.dim()).map(|_| noise_sigma * rng.sample::<f64, _>(StandardNormal)),
        );
        noise_norm = noise.norm();
        y += noise;
        y /= (1.0 + noise_norm * noise_norm).sqrt();
    }
    DrawnSignal {
        signal: y,
        support,
        signs,
        coefficients,
        decay,
        noise_norm,
    }
}

/// `N` signals with their generating supports, signs and coefficients.
///
/// Oracle vectors are stored sorted by atom index; `coefficients[n][j]` is
/// the magnitude on atom `supports[n][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBatch {
    pub signals: DMatrix<f64>,
    pub supports: Vec<Vec<usize>>,
    pub signs: Vec<Vec<f64>>,
    pub coefficients: Vec<Vec<f64>>,
    pub decays: Vec<Option<f64>>,
    pub noise_norms: Vec<f64>,
    pub noise_sigma: f64,
    pub spec: CoefficientSpec,
}

impl SignalBatch {
    pub fn len(&self) -> usize {
        self.signals.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.signals.nrows()
    }

    /// `σ_n(k)` if `k ∈ I_n`.
    pub fn oracle_sign(&self, n: usize, k: usize) -> Option<f64> {
        self.supports[n]
            .binary_search(&k)
            .ok()
            .map(|j| self.signs[n][j])
    }

    /// Same batch with every generating sign (and so every signal) negated.
    pub fn negated(&self) -> SignalBatch {
        let mut out = self.clone();
        out.signals.neg_mut();
        for s in out.signs.iter_mut() {
            for v in s.iter_mut() {
                *v = -*v;
            }
        }
        out
    }
}

/// `N` independent draws. Signal `n` uses its own stream derived from one
/// seed taken from `rng`, so the batch does not depend on the worker count.
pub fn draw_batch<R: Rng + ?Sized>(
    dict: &Dictionary,
    spec: &CoefficientSpec,
    noise_sigma: f64,
    n: usize,
    rng: &mut R,
) -> Result<SignalBatch> {
    check_model(dict, spec, noise_sigma)?;
    let seed = rng::next_seed(rng);
    let drawn: Vec<DrawnSignal> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            draw_unchecked(dict, spec, noise_sigma, &mut r)
        })
        .collect();

    let mut signals = DMatrix::zeros(dict.dim(), n);
    let mut supports = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    let mut coefficients = Vec::with_capacity(n);
    let mut decays = Vec::with_capacity(n);
    let mut noise_norms = Vec::with_capacity(n);
    for (i, s) in drawn.into_iter().enumerate() {
        signals.set_column(i, &s.signal);
        let mut order: Vec<usize> = (0..s.support.len()).collect();
        order.sort_by_key(|&j| s.support[j]);
        supports.push(order.iter().map(|&j| s.support[j]).collect());
        signs.push(order.iter().map(|&j| s.signs[j]).collect());
        coefficients.push(order.iter().map(|&j| s.coefficients[j]).collect());
        decays.push(s.decay);
        noise_norms.push(s.noise_norm);
    }
    Ok(SignalBatch {
        signals,
        supports,
        signs,
        coefficients,
        decays,
        noise_norms,
        noise_sigma,
        spec: *spec,
    })
}

/// Gap and moment statistics of a coefficient model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStatistics {
    /// Absolute gap `β_S`.
    pub beta_s: f64,
    /// Relative gap `Δ_S`.
    pub delta_s: f64,
    /// `E(c(1) + … + c(S))`
    pub gamma1_s: f64,
    /// `E(c(1)² + … + c(S)²)`
    pub gamma2_s: f64,
    /// `E(1/√(1 + ‖r‖²))`
    pub c_r: f64,
    /// Monte-Carlo samples behind the estimated fields; 0 when every field
    /// is in closed form.
    pub mc_samples: usize,
}

/// Gap statistics for `spec` with Gaussian noise of level `noise_sigma` in
/// dimension `d`.
///
/// The gaps are worst-case values. For the geometric family both
/// `c(S) − c(S+1) = c(S)` and `c(S)/c(1) = c_b^{S−1}` grow with `c_b`, so the
/// extremes sit at `decay_low`.
pub fn statistics<R: Rng + ?Sized>(
    spec: &CoefficientSpec,
    noise_sigma: f64,
    d: usize,
    mc_samples: usize,
    rng: &mut R,
) -> Result<GapStatistics> {
    spec.validate()?;
    if d == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    let s = spec.sparsity;
    let needs_mc = noise_sigma > 0.0 || matches!(spec.kind, CoefficientKind::Geometric { .. });
    if needs_mc && mc_samples == 0 {
        return Err(Error::invalid("Monte-Carlo statistics need mc_samples >= 1"));
    }

    let (beta_s, delta_s, gamma1_s, gamma2_s) = match spec.kind {
        CoefficientKind::Flat => {
            // c(S+1) = 0, so the gap is c(S) itself
            let c = 1.0 / (s as f64).sqrt();
            (c, 1.0, (s as f64).sqrt(), 1.0)
        }
        CoefficientKind::Geometric {
            decay_low,
            decay_high,
        } => {
            let worst = geometric_sequence(s, decay_low);
            let beta = worst[s - 1];
            let delta = worst[s - 1] / worst[0];
            let mut g1 = 0.0;
            let mut g2 = 0.0;
            for _ in 0..mc_samples {
                let cb = if decay_high > decay_low {
                    rng.random_range(decay_low..=decay_high)
                } else {
                    decay_low
                };
                let c = geometric_sequence(s, cb);
                g1 += c.iter().sum::<f64>();
                g2 += c.iter().map(|v| v * v).sum::<f64>();
            }
            (beta, delta, g1 / mc_samples as f64, g2 / mc_samples as f64)
        }
    };

    let c_r = if noise_sigma == 0.0 {
        1.0
    } else {
        let mut acc = 0.0;
        for _ in 0..mc_samples {
            let energy: f64 = (0..d)
                .map(|_| {
                    let g: f64 = rng.sample(StandardNormal);
                    noise_sigma * noise_sigma * g * g
                })
                .sum();
            acc += 1.0 / (1.0 + energy).sqrt();
        }
        acc / mc_samples as f64
    };

    Ok(GapStatistics {
        beta_s,
        delta_s,
        gamma1_s,
        gamma2_s,
        c_r,
        mc_samples: if needs_mc { mc_samples } else { 0 },
    })
}

/// Noise level giving an expected signal-to-noise ratio of one.
pub fn unit_snr_sigma(d: usize) -> f64 {
    1.0 / (d as f64).sqrt()
}
