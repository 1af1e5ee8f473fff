//! Closed-form limiting errors, convergence radii and iteration counts of
//! ITKsM and ITKrM.
//!
//! All logarithms are natural. The values are meant for reporting: the
//! constants are loose and the algorithms routinely converge from much
//! further away than these radii.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dictionary::DictionaryMetrics;
use crate::error::{Error, Result};
use crate::model::GapStatistics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub d: usize,
    pub k: usize,
    pub s: usize,
    pub mu: f64,
    pub frame_lower: f64,
    pub frame_upper: f64,
    pub beta_s: f64,
    pub delta_s: f64,
    pub gamma1_s: f64,
    pub gamma2_s: f64,
    pub c_r: f64,
    pub noise_sigma: f64,
    pub target_error: f64,
}

impl TheoryInputs {
    pub fn from_parts(
        d: usize,
        k: usize,
        s: usize,
        metrics: &DictionaryMetrics,
        stats: &GapStatistics,
        noise_sigma: f64,
        target_error: f64,
    ) -> Self {
        TheoryInputs {
            d,
            k,
            s,
            mu: metrics.coherence,
            frame_lower: metrics.frame_lower,
            frame_upper: metrics.frame_upper,
            beta_s: stats.beta_s,
            delta_s: stats.delta_s,
            gamma1_s: stats.gamma1_s,
            gamma2_s: stats.gamma2_s,
            c_r: stats.c_r,
            noise_sigma,
            target_error,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInputs(m));
        if self.d == 0 || self.k == 0 || self.s == 0 {
            return bad("d, K and S must be positive".into());
        }
        let finite = [
            self.mu,
            self.frame_lower,
            self.frame_upper,
            self.beta_s,
            self.delta_s,
            self.gamma1_s,
            self.gamma2_s,
            self.c_r,
            self.noise_sigma,
            self.target_error,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("inputs must be finite".into());
        }
        if self.mu < 0.0 || self.noise_sigma < 0.0 {
            return bad("coherence and noise level must be >= 0".into());
        }
        if !(self.frame_upper > 0.0 && self.frame_lower <= self.frame_upper) {
            return bad(format!(
                "frame bounds {} <= {} must be positive and ordered",
                self.frame_lower, self.frame_upper
            ));
        }
        if !(self.gamma1_s > 0.0 && self.c_r > 0.0 && self.c_r <= 1.0) {
            return bad("need gamma1_s > 0 and C_r in (0, 1]".into());
        }
        let tol = 1e-12;
        if !(self.beta_s > 0.0 && self.beta_s <= 1.0 / (self.s as f64).sqrt() + tol) {
            return bad(format!("beta_s = {} outside (0, 1/sqrt(S)]", self.beta_s));
        }
        if !(self.delta_s > 0.0 && self.delta_s <= 1.0 + tol) {
            return bad(format!("delta_s = {} outside (0, 1]", self.delta_s));
        }
        if !(self.target_error > 0.0 && self.target_error < 1.0) {
            return bad(format!("target error {} outside (0, 1)", self.target_error));
        }
        Ok(())
    }

    /// `Δ_S − 2μS`, the strong-sparsity margin.
    pub fn sparsity_margin(&self) -> f64 {
        self.delta_s - 2.0 * self.mu * self.s as f64
    }

    pub fn strongly_sparse(&self) -> bool {
        self.sparsity_margin() > 0.0
    }

    fn k2(&self) -> f64 {
        (self.k as f64).powi(2)
    }
}

fn radius(numer: f64, prefactor: f64, log_arg: f64) -> Result<f64> {
    if !(log_arg > 1.0) {
        return Err(Error::InvalidInputs(format!(
            "logarithm argument {log_arg} must exceed 1"
        )));
    }
    Ok(numer / (prefactor * (0.25 + log_arg.ln().sqrt())))
}

/// Limiting error `ε_{μ,ρ} = 8K²√(B+1)/(C_r γ₁) · exp(−β_S²/(98 max{μ², ρ²}))`;
/// zero when `μ = ρ = 0`.
pub fn eps_min(p: &TheoryInputs) -> Result<f64> {
    p.validate()?;
    let m = p.mu.powi(2).max(p.noise_sigma.powi(2));
    if m == 0.0 {
        return Ok(0.0);
    }
    let pre = 8.0 * p.k2() * (p.frame_upper + 1.0).sqrt() / (p.c_r * p.gamma1_s);
    Ok(pre * (-p.beta_s.powi(2) / (98.0 * m)).exp())
}

/// ITKsM convergence radius.
pub fn radius_itksm(p: &TheoryInputs) -> Result<f64> {
    p.validate()?;
    let b = p.frame_upper;
    let arg = 1060.0 * p.k2() * (b + 1.0) / (p.delta_s * p.c_r * p.gamma1_s);
    radius(p.delta_s, (98.0 * b).sqrt(), arg)
}

/// ITKsM radius for exactly sparse, noiseless, strongly sparse signals.
pub fn radius_itksm_exact(p: &TheoryInputs) -> Result<f64> {
    p.validate()?;
    let gap = strong_gap(p)?;
    let b = p.frame_upper;
    let arg = 1060.0 * p.k2() * b / (gap * p.gamma1_s);
    radius(gap, (98.0 * b).sqrt(), arg)
}

fn strong_gap(p: &TheoryInputs) -> Result<f64> {
    let gap = p.sparsity_margin();
    if gap <= 0.0 {
        return Err(Error::InvalidInputs(format!(
            "not strongly sparse: delta_s = {} <= 2 mu S = {}",
            p.delta_s,
            2.0 * p.mu * p.s as f64
        )));
    }
    Ok(gap)
}

/// The two ITKrM radius constraints; the admissible radius is their minimum.
pub fn radii_itkrm(p: &TheoryInputs) -> Result<(f64, f64)> {
    p.validate()?;
    let b = p.frame_upper;
    let arg = 2544.0 * p.k2() * (b + 1.0) / (p.delta_s * p.c_r * p.gamma1_s);
    Ok((
        radius(p.delta_s, (98.0 * b).sqrt(), arg)?,
        sqrt_s_radius(p.s),
    ))
}

/// ITKrM radius pair for exactly sparse, noiseless, strongly sparse signals.
pub fn radii_itkrm_exact(p: &TheoryInputs) -> Result<(f64, f64)> {
    p.validate()?;
    let gap = strong_gap(p)?;
    let arg = 23.0 * p.k2() * p.frame_upper.sqrt() / (gap * p.gamma1_s);
    Ok((radius(gap, 12f64.sqrt(), arg)?, sqrt_s_radius(p.s)))
}

fn sqrt_s_radius(s: usize) -> f64 {
    1.0 / (32.0 * (s as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsDelta {
    pub value: f64,
    /// `ε_δ ≤ 1/(48(B+1))`
    pub admissible: bool,
}

/// `ε_δ = K exp(−1/(4741 μ² S))`, with the admissibility check against `B`.
pub fn eps_delta(k: usize, mu: f64, s: usize, frame_upper: f64) -> Result<EpsDelta> {
    if !(mu > 0.0) || s == 0 || k == 0 {
        return Err(Error::InvalidInputs(format!(
            "eps_delta needs mu > 0, S >= 1, K >= 1 (got mu = {mu}, S = {s}, K = {k})"
        )));
    }
    let value = k as f64 * (-1.0 / (4741.0 * mu * mu * s as f64)).exp();
    Ok(EpsDelta {
        value,
        admissible: value <= 1.0 / (48.0 * (frame_upper + 1.0)),
    })
}

/// `C_r ≥ (1 − e^{−d}) / √(1 + 5dρ²)`.
pub fn c_r_lower(d: usize, noise_sigma: f64) -> Result<f64> {
    if d == 0 || !(noise_sigma >= 0.0) {
        return Err(Error::InvalidInputs("c_r_lower needs d >= 1 and rho >= 0".into()));
    }
    let df = d as f64;
    Ok((1.0 - (-df).exp()) / (1.0 + 5.0 * df * noise_sigma * noise_sigma).sqrt())
}

/// Iteration counts after which the convergence statements apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationSuggestions {
    /// `6 ⌈log(1/ε̃)⌉`
    pub itksm: usize,
    /// `12 ⌈log(1/ε̃)⌉`
    pub itkrm: usize,
    /// `9 ⌈log(1/ε̃)⌉`, exactly sparse noiseless case
    pub itkrm_exact: usize,
}

pub fn iteration_suggestions(target_error: f64) -> Result<IterationSuggestions> {
    if !(target_error > 0.0 && target_error < 1.0) {
        return Err(Error::InvalidInputs(format!(
            "target error {target_error} outside (0, 1)"
        )));
    }
    let l = target_error.recip().ln().ceil() as usize;
    Ok(IterationSuggestions {
        itksm: 6 * l,
        itkrm: 12 * l,
        itkrm_exact: 9 * l,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub inputs: TheoryInputs,
    pub eps_mu_rho: f64,
    pub radius_itksm: Option<f64>,
    pub radius_itksm_exact: Option<f64>,
    pub radius_itkrm_pair: Option<(f64, f64)>,
    pub radius_itkrm_exact_pair: Option<(f64, f64)>,
    pub eps_delta: Option<EpsDelta>,
    pub c_r_lower: f64,
    pub strong_sparsity_ok: bool,
    pub iteration_suggestions: IterationSuggestions,
}

/// Every bound for one configuration. Radii whose preconditions fail are
/// reported as absent rather than as errors.
pub fn report(p: &TheoryInputs) -> Result<TheoryReport> {
    p.validate()?;
    Ok(TheoryReport {
        inputs: *p,
        eps_mu_rho: eps_min(p)?,
        radius_itksm: radius_itksm(p).ok(),
        radius_itksm_exact: radius_itksm_exact(p).ok(),
        radius_itkrm_pair: radii_itkrm(p).ok(),
        radius_itkrm_exact_pair: radii_itkrm_exact(p).ok(),
        eps_delta: eps_delta(p.k, p.mu, p.s, p.frame_upper).ok(),
        c_r_lower: c_r_lower(p.d, p.noise_sigma)?,
        strong_sparsity_ok: p.strongly_sparse(),
        iteration_suggestions: iteration_suggestions(p.target_error)?,
    })
}

impl fmt::Display for TheoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"))
        }
        fn pair(v: Option<(f64, f64)>) -> String {
            v.map_or_else(
                || "n/a".to_string(),
                |(a, b)| format!("{a:.6e}, {b:.6e} (min {:.6e})", a.min(b)),
            )
        }
        let i = &self.inputs;
        let rows: Vec<(&str, String)> = vec![
            ("d / K / S", format!("{} / {} / {}", i.d, i.k, i.s)),
            ("coherence mu", format!("{:.6e}", i.mu)),
            ("frame bounds A, B", format!("{:.6e}, {:.6e}", i.frame_lower, i.frame_upper)),
            ("beta_S / Delta_S", format!("{:.6e} / {:.6e}", i.beta_s, i.delta_s)),
            ("gamma1_S / gamma2_S", format!("{:.6e} / {:.6e}", i.gamma1_s, i.gamma2_s)),
            ("C_r (lower bound)", format!("{:.6e} ({:.6e})", i.c_r, self.c_r_lower)),
            ("noise rho", format!("{:.6e}", i.noise_sigma)),
            ("strong_sparsity_ok", self.strong_sparsity_ok.to_string()),
            ("eps_mu_rho", format!("{:.6e}", self.eps_mu_rho)),
            ("radius_itksm", opt(self.radius_itksm)),
            ("radius_itksm_exact", opt(self.radius_itksm_exact)),
            ("radius_itkrm", pair(self.radius_itkrm_pair)),
            ("radius_itkrm_exact", pair(self.radius_itkrm_exact_pair)),
            (
                "eps_delta",
                self.eps_delta.map_or_else(
                    || "n/a".to_string(),
                    |e| format!("{:.6e} (admissible: {})", e.value, e.admissible),
                ),
            ),
            (
                "iterations itksm/itkrm/exact",
                format!(
                    "{} / {} / {} (target {:.3e})",
                    self.iteration_suggestions.itksm,
                    self.iteration_suggestions.itkrm,
                    self.iteration_suggestions.itkrm_exact,
                    i.target_error
                ),
            ),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            writeln!(f, "{k:<width$}  {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn flat_inputs(d: usize, k: usize, s: usize, mu: f64, b: f64, rho: f64) -> TheoryInputs {
        let sf = s as f64;
        TheoryInputs {
            d,
            k,
            s,
            mu,
            frame_lower: 1.0,
            frame_upper: b,
            beta_s: 1.0 / sf.sqrt(),
            delta_s: 1.0,
            gamma1_s: sf.sqrt(),
            gamma2_s: 1.0,
            c_r: 1.0,
            noise_sigma: rho,
            target_error: 0.01,
        }
    }

    #[test]
    fn eps_min_zero_without_coherence_or_noise() {
        let p = flat_inputs(16, 16, 2, 0.0, 1.0, 0.0);
        assert_eq!(eps_min(&p).unwrap(), 0.0);
    }

    #[test]
    fn exact_radius_needs_strong_sparsity() {
        // 2 mu S = 1 = delta_s exactly
        let p = flat_inputs(64, 96, 4, 0.125, 2.0, 0.0);
        assert!(radius_itksm_exact(&p).is_err());
        assert!(radii_itkrm_exact(&p).is_err());
        let r = report(&p).unwrap();
        assert!(!r.strong_sparsity_ok);
        assert!(r.radius_itksm_exact.is_none());
    }

    #[test]
    fn itkrm_second_radius() {
        let p = flat_inputs(16, 24, 1, 0.1, 2.0, 0.0);
        assert_eq!(radii_itkrm(&p).unwrap().1, 1.0 / 32.0);
    }

    #[test]
    fn validation_rejects_inconsistent_gaps() {
        let mut p = flat_inputs(16, 24, 4, 0.1, 2.0, 0.0);
        p.beta_s = 0.6;
        assert!(matches!(eps_min(&p), Err(Error::InvalidInputs(_))));
        let mut p = flat_inputs(16, 24, 4, 0.1, 2.0, 0.0);
        p.target_error = 1.0;
        assert!(report(&p).is_err());
    }

    #[test]
    fn small_log_argument_is_rejected() {
        assert!(radius(1.0, 1.0, 0.5).is_err());
        assert!(radius(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn iteration_counts() {
        let it = iteration_suggestions(0.01).unwrap();
        // ceil(ln 100) = 5
        assert_eq!((it.itksm, it.itkrm, it.itkrm_exact), (30, 60, 45));
    }

    #[test]
    fn c_r_lower_noiseless() {
        let v = c_r_lower(10, 0.0).unwrap();
        assert_eq!(v, 1.0 - (-10f64).exp());
    }

    #[test]
    fn report_renders_every_field() {
        let p = flat_inputs(256, 384, 4, (2.0f64 / 256.0).sqrt(), 2.0, 1.0 / 16.0);
        let text = report(&p).unwrap().to_string();
        for key in ["eps_mu_rho", "radius_itksm", "radius_itkrm", "eps_delta", "strong_sparsity_ok"] {
            assert!(text.contains(key), "{key}");
        }
    }
}
