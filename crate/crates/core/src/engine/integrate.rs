//! Adaptive Dormand–Prince 5(4) integration of the master equation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::liouvillian::Liouvillian;
use super::model::LindbladTerm;
use super::operator::{check_dims, DensityMatrix, Operator, C64, ONE, ZERO};
use crate::error::{invalid, Error, Result};
use crate::series::TimeSeries;

/// Integration horizon, output grid and step control.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub sample_count: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step size [s]; unbounded when `None`.
    pub max_step: Option<f64>,
    /// Accepted plus rejected steps before giving up.
    pub max_steps: usize,
}

impl EvolveOptions {
    pub const DEFAULT_REL_TOL: f64 = 1e-8;
    pub const DEFAULT_ABS_TOL: f64 = 1e-10;

    pub fn new(t_final: f64, sample_count: usize) -> Self {
        Self {
            t_final,
            sample_count,
            rel_tol: Self::DEFAULT_REL_TOL,
            abs_tol: Self::DEFAULT_ABS_TOL,
            max_step: None,
            max_steps: 20_000_000,
        }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(invalid("t_final must be finite and > 0"));
        }
        if self.sample_count < 2 {
            return Err(invalid("sample_count must be >= 2"));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(invalid("integrator tolerances must be > 0"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(invalid("max_step must be > 0"));
            }
        }
        Ok(())
    }

    /// Uniform output grid `t_k = t_final * k / (sample_count - 1)`.
    pub fn sample_times(&self) -> Vec<f64> {
        let last = (self.sample_count - 1) as f64;
        (0..self.sample_count)
            .map(|k| self.t_final * k as f64 / last)
            .collect()
    }
}

/// A named operator whose expectation value is recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub label: String,
    pub op: Operator,
}

impl Observable {
    pub fn new(label: impl Into<String>, op: Operator) -> Self {
        Self {
            label: label.into(),
            op,
        }
    }
}

/// Step statistics and the worst invariant violations seen at the samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvolveDiagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// Largest |Im⟨O⟩| over all samples and observables.
    pub max_imaginary_expectation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evolution {
    /// Real parts of the observable expectations.
    pub series: TimeSeries,
    pub final_state: DensityMatrix,
    pub diagnostics: EvolveDiagnostics,
}

/// Integrates dρ/dt = Lρ from `rho0` and records `observables` on the
/// uniform grid of `opts`.
pub fn evolve(
    rho0: &DensityMatrix,
    hamiltonian: &Operator,
    terms: &[LindbladTerm],
    opts: &EvolveOptions,
    observables: &[Observable],
) -> Result<Evolution> {
    opts.validate()?;
    let d = rho0.dim();
    check_dims(d, hamiltonian.dim())?;
    for obs in observables {
        check_dims(d, obs.op.dim())?;
    }
    let generator = Liouvillian::new(hamiltonian, terms)?;
    evolve_with(rho0, &generator, opts, observables)
}

/// As [`evolve`], with a prebuilt generator.
pub fn evolve_with(
    rho0: &DensityMatrix,
    generator: &Liouvillian,
    opts: &EvolveOptions,
    observables: &[Observable],
) -> Result<Evolution> {
    opts.validate()?;
    let d = rho0.dim();
    check_dims(d, generator.dim())?;
    let times = opts.sample_times();
    let mut columns: Vec<Vec<f64>> = observables
        .iter()
        .map(|_| Vec::with_capacity(times.len()))
        .collect();
    let mut diag = EvolveDiagnostics::default();

    let mut stepper = DormandPrince::new(generator, rho0.as_operator().as_slice(), opts);
    record(&stepper.y, d, observables, &mut columns, &mut diag);
    for &t_next in &times[1..] {
        stepper.advance_to(t_next, &mut diag)?;
        record(&stepper.y, d, observables, &mut columns, &mut diag);
    }

    let labels = observables.iter().map(|o| o.label.clone()).collect();
    let series = TimeSeries::new(times, labels, columns)?;
    let final_state = DensityMatrix::new_unchecked(Operator::from_row_major(d, stepper.y)?);
    Ok(Evolution {
        series,
        final_state,
        diagnostics: diag,
    })
}

fn record(
    y: &[C64],
    d: usize,
    observables: &[Observable],
    columns: &mut [Vec<f64>],
    diag: &mut EvolveDiagnostics,
) {
    let trace: C64 = (0..d).map(|i| y[i * d + i]).sum();
    diag.max_trace_error = diag.max_trace_error.max((trace - ONE).norm());
    let mut herm = 0.0f64;
    for i in 0..d {
        for j in i..d {
            herm = herm.max((y[i * d + j] - y[j * d + i].conj()).norm());
        }
    }
    diag.max_hermiticity_error = diag.max_hermiticity_error.max(herm);
    for (obs, col) in observables.iter().zip(columns.iter_mut()) {
        // Tr(Oρ) = Σ_ik O_ik ρ_ki
        let mut acc = ZERO;
        for (i, k, v) in obs.op.nonzeros() {
            acc += v * y[k * d + i];
        }
        diag.max_imaginary_expectation = diag.max_imaginary_expectation.max(acc.im.abs());
        col.push(acc.re);
    }
}

// Dormand–Prince 5(4) tableau; the generator is autonomous so the nodes c_i are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

struct DormandPrince<'a> {
    generator: &'a Liouvillian,
    opts: &'a EvolveOptions,
    t: f64,
    y: Vec<C64>,
    /// Derivative at (t, y), reused across steps (first-same-as-last).
    f: Vec<C64>,
    h: f64,
    k: [Vec<C64>; 6],
    stage: Vec<C64>,
    y_new: Vec<C64>,
}

impl<'a> DormandPrince<'a> {
    fn new(generator: &'a Liouvillian, y0: &[C64], opts: &'a EvolveOptions) -> Self {
        let n = y0.len();
        let mut f = vec![ZERO; n];
        generator.apply(y0, &mut f);
        let mut s = Self {
            generator,
            opts,
            t: 0.0,
            y: y0.to_vec(),
            f,
            h: 0.0,
            k: core::array::from_fn(|_| vec![ZERO; n]),
            stage: vec![ZERO; n],
            y_new: vec![ZERO; n],
        };
        s.h = s.initial_step();
        s
    }

    fn scale(&self, y: C64, y_new: C64) -> f64 {
        self.opts.abs_tol + self.opts.rel_tol * y.norm().max(y_new.norm())
    }

    fn rms(&self, v: &[C64], reference: &[C64]) -> f64 {
        let sum: f64 = v
            .iter()
            .zip(reference)
            .map(|(x, &r)| {
                let s = self.scale(r, r);
                (x.norm() / s).powi(2)
            })
            .sum();
        (sum / v.len() as f64).sqrt()
    }

    /// Hairer–Nørsett–Wanner starting-step heuristic.
    fn initial_step(&mut self) -> f64 {
        let d0 = self.rms(&self.y, &self.y);
        let d1 = self.rms(&self.f, &self.y);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6 * self.opts.t_final
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(self.opts.t_final);
        for (s, (&y, &f)) in self.stage.iter_mut().zip(self.y.iter().zip(&self.f)) {
            *s = y + f * h0;
        }
        let mut f1 = vec![ZERO; self.y.len()];
        self.generator.apply(&self.stage, &mut f1);
        let diff: Vec<C64> = f1.iter().zip(&self.f).map(|(a, b)| a - b).collect();
        let d2 = self.rms(&diff, &self.y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (1e-6f64).max(h0 * 1e-3)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        let mut h = (100.0 * h0).min(h1).min(self.opts.t_final);
        if let Some(max) = self.opts.max_step {
            h = h.min(max);
        }
        h
    }

    fn combine(&mut self, h: f64, coeffs: &[f64]) {
        let n = self.y.len();
        for i in 0..n {
            let mut acc = self.f[i] * coeffs[0];
            for (j, &c) in coeffs.iter().enumerate().skip(1) {
                if c != 0.0 {
                    acc += self.k[j - 1][i] * c;
                }
            }
            self.stage[i] = self.y[i] + acc * h;
        }
    }

    /// One trial step of size `h`; leaves the candidate in `y_new` and the
    /// derivative there in `k[5]`. Returns the max-norm of the scaled local
    /// error estimate.
    fn try_step(&mut self, h: f64) -> f64 {
        self.combine(h, &[A21]);
        self.generator.apply(&self.stage, &mut self.k[0]);
        self.combine(h, &[A31, A32]);
        self.generator.apply(&self.stage, &mut self.k[1]);
        self.combine(h, &[A41, A42, A43]);
        self.generator.apply(&self.stage, &mut self.k[2]);
        self.combine(h, &[A51, A52, A53, A54]);
        self.generator.apply(&self.stage, &mut self.k[3]);
        self.combine(h, &[A61, A62, A63, A64, A65]);
        self.generator.apply(&self.stage, &mut self.k[4]);
        // k1 = f, k2..k6 = k[0..5]
        self.combine(h, &[B1, 0.0, B3, B4, B5, B6]);
        core::mem::swap(&mut self.y_new, &mut self.stage);
        self.generator.apply(&self.y_new, &mut self.k[5]);

        let n = self.y.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let err = (self.f[i] * E1
                + self.k[1][i] * E3
                + self.k[2][i] * E4
                + self.k[3][i] * E5
                + self.k[4][i] * E6
                + self.k[5][i] * E7)
                * h;
            let s = self.scale(self.y[i], self.y_new[i]);
            worst = worst.max(err.norm() / s);
        }
        worst
    }

    fn advance_to(&mut self, t_target: f64, diag: &mut EvolveDiagnostics) -> Result<()> {
        while self.t < t_target {
            if diag.accepted_steps + diag.rejected_steps >= self.opts.max_steps {
                return Err(Error::NumericalFailure {
                    time: self.t,
                    reason: alloc::format!("step limit {} reached", self.opts.max_steps),
                });
            }
            let min_step = 1e-14 * t_target.abs().max(self.opts.t_final);
            if self.h < min_step {
                return Err(Error::NumericalFailure {
                    time: self.t,
                    reason: alloc::format!("step size underflow (h = {:e} s)", self.h),
                });
            }
            let remaining = t_target - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let err = self.try_step(h);
            diag.rhs_evaluations += 6;
            if err.is_finite() && err <= 1.0 {
                self.t = if last { t_target } else { self.t + h };
                core::mem::swap(&mut self.y, &mut self.y_new);
                core::mem::swap(&mut self.f, &mut self.k[5]);
                diag.accepted_steps += 1;
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // a truncated final step says nothing about the natural size
                if !last || h * factor > self.h {
                    self.h = h * factor;
                }
            } else {
                diag.rejected_steps += 1;
                let factor = if err.is_finite() {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                } else {
                    MIN_FACTOR
                };
                self.h = h * factor;
            }
            if let Some(max) = self.opts.max_step {
                self.h = self.h.min(max);
            }
        }
        Ok(())
    }
}
