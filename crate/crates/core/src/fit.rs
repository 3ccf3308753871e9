//! Least-squares extraction of decay constants from sampled curves.
//!
//! Two models are supported:
//! `A·e^{−t/T} + B` and `A·e^{−t/T}·cos(2πft + φ) + B`.
//! Both are solved by Levenberg–Marquardt on a rescaled problem (time mapped
//! onto [0, 1], values divided by their largest magnitude) with the decay
//! parametrised as a rate, so a slow decay does not push T toward infinity
//! in the middle of an iteration.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::constants::TAU;
use crate::error::{FitFailure, Result};
use crate::series::TimeSeries;

pub const MIN_EXPONENTIAL_SAMPLES: usize = 8;
pub const MIN_COSINE_SAMPLES: usize = 16;
/// Iteration cap of the damped Gauss–Newton loop.
pub const MAX_ITERATIONS: usize = 500;
/// Decay over the whole span (span/T) below which the decay time is
/// reported as non-identifiable.
pub const MIN_DECAY_OVER_SPAN: f64 = 1e-3;
/// Required ratio of the periodogram peak to its median.
pub const SPECTRAL_PEAK_RATIO: f64 = 10.0;
/// Fraction of the Nyquist frequency above which a fitted frequency is
/// flagged as possibly aliased.
pub const NYQUIST_WARNING_FRACTION: f64 = 0.8;

const PERIODOGRAM_OVERSAMPLING: usize = 8;
const STEP_TOLERANCE: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitModel {
    Exponential,
    DecayingCosine,
}

/// Fit parameters by name. For the exponential model `frequency` and
/// `phase` are zero.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FitParams {
    pub amplitude: f64,
    /// T [s].
    pub decay_time: f64,
    /// f [Hz].
    pub frequency: f64,
    /// φ [rad], referenced to t = 0.
    pub phase: f64,
    pub offset: f64,
}

impl FitParams {
    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("amplitude", self.amplitude),
            ("decay_time", self.decay_time),
            ("frequency", self.frequency),
            ("phase", self.phase),
            ("offset", self.offset),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub params: FitParams,
    /// Root-mean-square residual, in the units of the data.
    pub residual_rms: f64,
    pub converged: bool,
    /// Variance estimates σ²·diag((JᵀJ)⁻¹) per parameter; infinite when the
    /// normal matrix is singular.
    pub covariance_diag: FitParams,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    /// 1/T [s⁻¹].
    pub fn decay_rate(&self) -> f64 {
        1.0 / self.params.decay_time
    }

    /// The fitted curve at `t`.
    pub fn evaluate(&self, t: f64) -> f64 {
        let p = &self.params;
        let envelope = p.amplitude * (-t / p.decay_time).exp();
        match self.model {
            FitModel::Exponential => envelope + p.offset,
            FitModel::DecayingCosine => {
                envelope * (TAU * p.frequency * t + p.phase).cos() + p.offset
            }
        }
    }

    pub fn reconstruct(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.evaluate(t)).collect()
    }
}

/// Fits `A·e^{−t/T} + B` to the primary column of `series`.
pub fn fit_exponential(series: &TimeSeries) -> Result<FitResult> {
    let data = Scaled::new(series, MIN_EXPONENTIAL_SAMPLES)?;
    let k0 = data.exponential_rate_seed();
    let (lin, _) = data.linear_given(k0, None);
    let p0 = vec![lin[0], k0, lin[1]];
    let outcome = levenberg_marquardt(&data.u, &data.y, p0, exponential_model);
    data.finish(FitModel::Exponential, outcome, Vec::new())
}

/// Fits `A·e^{−t/T}·cos(2πft + φ) + B` to the primary column of `series`.
pub fn fit_decaying_cosine(series: &TimeSeries) -> Result<FitResult> {
    let data = Scaled::new(series, MIN_COSINE_SAMPLES)?;
    let w0 = data.frequency_seed()?;
    let mut warnings = Vec::new();
    let k0 = data.cosine_rate_seed();
    let (lin, _) = data.linear_given(k0, Some(w0));
    // a·cos + b·sin = A·cos(wu + φ) with A = |(a, −b)|, φ = atan2(−b, a)
    let amp = (lin[0] * lin[0] + lin[1] * lin[1]).sqrt();
    let phase = (-lin[1]).atan2(lin[0]);
    let p0 = vec![amp, k0, w0, phase, lin[2]];
    let outcome = levenberg_marquardt(&data.u, &data.y, p0, cosine_model);
    let nyquist_u = 0.5 * (data.u.len() - 1) as f64 * TAU;
    if outcome.p[2].abs() > NYQUIST_WARNING_FRACTION * nyquist_u {
        warnings.push(String::from(
            "fitted frequency is close to the Nyquist limit of the sample grid; it may be aliased",
        ));
    }
    data.finish(FitModel::DecayingCosine, outcome, warnings)
}

/// Samples mapped to u = (t − t0)/span and y/scale.
struct Scaled<'a> {
    series: &'a TimeSeries,
    u: Vec<f64>,
    y: Vec<f64>,
    t0: f64,
    span: f64,
    scale: f64,
}

impl<'a> Scaled<'a> {
    fn new(series: &'a TimeSeries, required: usize) -> Result<Self> {
        let n = series.len();
        if n < required || series.primary().len() < required {
            return Err(FitFailure::TooFewSamples { required, found: n }.into());
        }
        let t = series.times();
        let values = series.primary();
        let t0 = t[0];
        let span = t[n - 1] - t0;
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mean = values.iter().sum::<f64>() / n as f64;
        let spread = values.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
        if spread <= 1e-12 * scale.max(f64::MIN_POSITIVE) || scale == 0.0 {
            return Err(FitFailure::NonIdentifiable(String::from("series is constant")).into());
        }
        Ok(Self {
            series,
            u: t.iter().map(|&ti| (ti - t0) / span).collect(),
            y: values.iter().map(|v| v / scale).collect(),
            t0,
            span,
            scale,
        })
    }

    /// Rate from a log-linear regression of (y − tail mean).
    fn exponential_rate_seed(&self) -> f64 {
        let n = self.y.len();
        let tail = (n / 10).max(2);
        let tail_mean = self.y[n - tail..].iter().sum::<f64>() / tail as f64;
        let d: Vec<f64> = self.y.iter().map(|v| v - tail_mean).collect();
        let head = d[0];
        let peak = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let (mut su, mut sl, mut suu, mut sul, mut count) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&u, &v) in self.u.iter().zip(&d) {
            if v * head > 0.0 && v.abs() > 0.1 * peak {
                let l = v.abs().ln();
                su += u;
                sl += l;
                suu += u * u;
                sul += u * l;
                count += 1.0;
            }
        }
        let denom = count * suu - su * su;
        let k = if count >= 2.0 && denom > 0.0 {
            -(count * sul - su * sl) / denom
        } else {
            f64::NAN
        };
        if k.is_finite() && k > 0.0 {
            k
        } else {
            3.0
        }
    }

    /// Envelope rate from the RMS of the detrended halves.
    fn cosine_rate_seed(&self) -> f64 {
        let n = self.y.len();
        let mean = self.y.iter().sum::<f64>() / n as f64;
        let rms = |s: &[f64]| {
            (s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / s.len() as f64).sqrt()
        };
        let (first, second) = self.y.split_at(n / 2);
        let ratio = rms(first) / rms(second);
        let k = 2.0 * ratio.ln();
        if k.is_finite() {
            k.clamp(0.1, 50.0)
        } else {
            3.0
        }
    }

    /// Peak of the oversampled periodogram of the detrended series, as an
    /// angular frequency in u units, refined by a parabola through the peak.
    fn frequency_seed(&self) -> Result<f64> {
        let n = self.y.len();
        let mean = self.y.iter().sum::<f64>() / n as f64;
        let nyquist = 0.5 * (n - 1) as f64;
        let bins = ((nyquist * PERIODOGRAM_OVERSAMPLING as f64) as usize).max(4);
        let df = nyquist / bins as f64;
        let power: Vec<f64> = (1..=bins)
            .map(|b| {
                let w = TAU * df * b as f64;
                let (mut re, mut im) = (0.0, 0.0);
                for (&u, &v) in self.u.iter().zip(&self.y) {
                    let (s, c) = (w * u).sin_cos();
                    re += (v - mean) * c;
                    im += (v - mean) * s;
                }
                re * re + im * im
            })
            .collect();
        // skip the lowest bins, which only resolve less than one period
        let first = PERIODOGRAM_OVERSAMPLING / 2;
        let (idx, &peak) = power
            .iter()
            .enumerate()
            .skip(first)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .ok_or(FitFailure::NoSpectralPeak)?;
        let mut sorted = power.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        if !(peak > SPECTRAL_PEAK_RATIO * median) {
            return Err(FitFailure::NoSpectralPeak.into());
        }
        let mut shift = 0.0;
        if idx > 0 && idx + 1 < power.len() {
            let (a, b, c) = (power[idx - 1], peak, power[idx + 1]);
            let denom = a - 2.0 * b + c;
            if denom < 0.0 {
                shift = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            }
        }
        Ok(TAU * df * ((idx + 1) as f64 + shift))
    }

    /// Linear least squares for the amplitudes at fixed rate (and angular
    /// frequency, if any). Returns the coefficients and the residual sum.
    fn linear_given(&self, k: f64, w: Option<f64>) -> (Vec<f64>, f64) {
        let n = self.y.len();
        let cols = if w.is_some() { 3 } else { 2 };
        let mut a = DMatrix::<f64>::zeros(n, cols);
        for (i, &u) in self.u.iter().enumerate() {
            let e = (-k * u).exp();
            match w {
                Some(w) => {
                    let (s, c) = (w * u).sin_cos();
                    a[(i, 0)] = e * c;
                    a[(i, 1)] = e * s;
                    a[(i, 2)] = 1.0;
                }
                None => {
                    a[(i, 0)] = e;
                    a[(i, 1)] = 1.0;
                }
            }
        }
        let b = DVector::from_column_slice(&self.y);
        let ata = a.transpose() * &a;
        let atb = a.transpose() * &b;
        let x = ata.lu().solve(&atb).unwrap_or_else(|| DVector::zeros(cols));
        let r = &a * &x - &b;
        (x.iter().copied().collect(), r.norm_squared())
    }

    fn finish(
        &self,
        model: FitModel,
        outcome: LmOutcome,
        warnings: Vec<String>,
    ) -> Result<FitResult> {
        let p = &outcome.p;
        let k_u = p[1];
        if !outcome.converged {
            return Err(FitFailure::NotConverged {
                iterations: outcome.iterations,
                residual_rms: (2.0 * outcome.cost / self.y.len() as f64).sqrt() * self.scale,
            }
            .into());
        }
        if !(k_u >= MIN_DECAY_OVER_SPAN) {
            return Err(FitFailure::NonIdentifiable(alloc::format!(
                "decay over the sampled span is {k_u:.3e}; the decay time is beyond the span"
            ))
            .into());
        }
        let rate = k_u / self.span;
        let mut params = match model {
            FitModel::Exponential => FitParams {
                amplitude: p[0] * self.scale * (rate * self.t0).exp(),
                decay_time: 1.0 / rate,
                frequency: 0.0,
                phase: 0.0,
                offset: p[2] * self.scale,
            },
            FitModel::DecayingCosine => {
                let (mut amp, mut w, mut phase) = (p[0], p[2], p[3]);
                if w < 0.0 {
                    w = -w;
                    phase = -phase;
                }
                if amp < 0.0 {
                    amp = -amp;
                    phase += PI;
                }
                let w_t = w / self.span;
                FitParams {
                    amplitude: amp * self.scale * (rate * self.t0).exp(),
                    decay_time: 1.0 / rate,
                    frequency: w_t / TAU,
                    phase: wrap_phase(phase - w_t * self.t0),
                    offset: p[4] * self.scale,
                }
            }
        };
        if !params.phase.is_finite() {
            params.phase = 0.0;
        }
        let mut result = FitResult {
            model,
            params,
            residual_rms: 0.0,
            converged: true,
            covariance_diag: FitParams::default(),
            iterations: outcome.iterations,
            warnings,
        };
        let times = self.series.times();
        let values = self.series.primary();
        let ss: f64 = times
            .iter()
            .zip(values)
            .map(|(&t, &v)| {
                let r = result.evaluate(t) - v;
                r * r
            })
            .sum();
        result.residual_rms = (ss / times.len() as f64).sqrt();
        result.covariance_diag = physical_covariance(&result, times, ss);
        Ok(result)
    }
}

fn wrap_phase(phase: f64) -> f64 {
    let mut p = phase % TAU;
    if p > PI {
        p -= TAU;
    } else if p <= -PI {
        p += TAU;
    }
    p
}

/// σ²·diag((JᵀJ)⁻¹) with J taken with respect to the reported parameters.
fn physical_covariance(fit: &FitResult, times: &[f64], ss: f64) -> FitParams {
    let p = &fit.params;
    let cosine = fit.model == FitModel::DecayingCosine;
    let m = if cosine { 5 } else { 3 };
    let n = times.len();
    let mut j = DMatrix::<f64>::zeros(n, m);
    for (i, &t) in times.iter().enumerate() {
        let e = (-t / p.decay_time).exp();
        let (s, c) = if cosine {
            (TAU * p.frequency * t + p.phase).sin_cos()
        } else {
            (0.0, 1.0)
        };
        let d_t = p.amplitude * e * c * t / (p.decay_time * p.decay_time);
        if cosine {
            j[(i, 0)] = e * c;
            j[(i, 1)] = d_t;
            j[(i, 2)] = -p.amplitude * e * s * TAU * t;
            j[(i, 3)] = -p.amplitude * e * s;
            j[(i, 4)] = 1.0;
        } else {
            j[(i, 0)] = e;
            j[(i, 1)] = d_t;
            j[(i, 2)] = 1.0;
        }
    }
    let norms: Vec<f64> = (0..m).map(|c| j.column(c).norm()).collect();
    for (c, &nc) in norms.iter().enumerate() {
        if nc > 0.0 {
            j.column_mut(c).scale_mut(1.0 / nc);
        }
    }
    let sigma2 = if n > m {
        ss / (n - m) as f64
    } else {
        f64::INFINITY
    };
    let inv = (j.transpose() * &j).try_inverse();
    let var = |c: usize| match &inv {
        Some(inv) if norms[c] > 0.0 => sigma2 * inv[(c, c)] / (norms[c] * norms[c]),
        _ => f64::INFINITY,
    };
    if cosine {
        FitParams {
            amplitude: var(0),
            decay_time: var(1),
            frequency: var(2),
            phase: var(3),
            offset: var(4),
        }
    } else {
        FitParams {
            amplitude: var(0),
            decay_time: var(1),
            frequency: 0.0,
            phase: 0.0,
            offset: var(2),
        }
    }
}

/// Writes ∂f/∂p into `grad` and returns f(u).
type Model = fn(&[f64], f64, &mut [f64]) -> f64;

fn exponential_model(p: &[f64], u: f64, grad: &mut [f64]) -> f64 {
    let e = (-p[1] * u).exp();
    grad[0] = e;
    grad[1] = -p[0] * u * e;
    grad[2] = 1.0;
    p[0] * e + p[2]
}

fn cosine_model(p: &[f64], u: f64, grad: &mut [f64]) -> f64 {
    let e = (-p[1] * u).exp();
    let (s, c) = (p[2] * u + p[3]).sin_cos();
    grad[0] = e * c;
    grad[1] = -p[0] * u * e * c;
    grad[2] = -p[0] * e * s * u;
    grad[3] = -p[0] * e * s;
    grad[4] = 1.0;
    p[0] * e * c + p[4]
}

struct LmOutcome {
    p: Vec<f64>,
    /// ½Σr².
    cost: f64,
    iterations: usize,
    converged: bool,
}

fn residuals(
    u: &[f64],
    y: &[f64],
    p: &[f64],
    model: Model,
    jac: Option<&mut DMatrix<f64>>,
) -> (DVector<f64>, f64) {
    let m = p.len();
    let mut grad = vec![0.0; m];
    let mut r = DVector::zeros(u.len());
    let mut jac = jac;
    for (i, (&ui, &yi)) in u.iter().zip(y).enumerate() {
        r[i] = model(p, ui, &mut grad) - yi;
        if let Some(j) = jac.as_deref_mut() {
            for (c, g) in grad.iter().enumerate() {
                j[(i, c)] = *g;
            }
        }
    }
    let cost = 0.5 * r.norm_squared();
    (r, cost)
}

fn levenberg_marquardt(u: &[f64], y: &[f64], p0: Vec<f64>, model: Model) -> LmOutcome {
    let m = p0.len();
    let mut p = p0;
    let mut jac = DMatrix::zeros(u.len(), m);
    let (mut r, mut cost) = residuals(u, y, &p, model, Some(&mut jac));
    let mut lambda = 1e-3;
    for iteration in 1..=MAX_ITERATIONS {
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for d in 0..m {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (_, trial_cost) = residuals(u, y, &trial, model, None);
            if trial_cost.is_finite() && trial_cost <= cost {
                let small = p
                    .iter()
                    .zip(step.iter())
                    .all(|(pi, si)| si.abs() <= STEP_TOLERANCE * (pi.abs() + STEP_TOLERANCE));
                let stalled = cost - trial_cost <= 1e-30 + 1e-15 * cost;
                p = trial;
                let (r2, c2) = residuals(u, y, &p, model, Some(&mut jac));
                r = r2;
                cost = c2;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small || (stalled && lambda <= 1e-6) {
                    return LmOutcome {
                        p,
                        cost,
                        iterations: iteration,
                        converged: true,
                    };
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left at working precision
            return LmOutcome {
                p,
                cost,
                iterations: iteration,
                converged: true,
            };
        }
    }
    LmOutcome {
        p,
        cost,
        iterations: MAX_ITERATIONS,
        converged: false,
    }
}
