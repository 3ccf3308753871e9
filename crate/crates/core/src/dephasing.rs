//! Closed-form dephasing of the qubit by thermal photons in the cavity.
//!
//! All rates here are in s⁻¹ and χ, κ are angular [rad/s].

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::device::DissipationSource;
use crate::error::{invalid, Error, Result};

/// |χ|/κ_tot below which [`Regime::SmallChi`] is reported.
pub const SMALL_CHI_THRESHOLD: f64 = 0.1;
/// |χ|/κ_tot above which [`Regime::LargeChi`] is reported.
pub const LARGE_CHI_THRESHOLD: f64 = 10.0;

/// One cavity channel reduced to its rate and occupation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Channel {
    pub kappa_rad_s: f64,
    pub n_th: f64,
}

/// χ together with the cavity channels that dephase the qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct DephasingInput {
    chi_rad_s: f64,
    channels: Vec<Channel>,
    kappa_tot: f64,
}

impl DephasingInput {
    pub fn new(chi_rad_s: f64, channels: Vec<Channel>) -> Result<Self> {
        if !chi_rad_s.is_finite() {
            return Err(invalid("chi must be finite"));
        }
        for c in &channels {
            if !(c.kappa_rad_s.is_finite() && c.kappa_rad_s >= 0.0) {
                return Err(invalid("channel kappa must be finite and >= 0"));
            }
            if !(c.n_th.is_finite() && c.n_th >= 0.0) {
                return Err(invalid("channel occupation must be finite and >= 0"));
            }
        }
        let kappa_tot: f64 = channels.iter().map(|c| c.kappa_rad_s).sum();
        if !(kappa_tot > 0.0) {
            return Err(invalid("total cavity decay rate must be > 0"));
        }
        Ok(Self {
            chi_rad_s,
            channels,
            kappa_tot,
        })
    }

    /// A single channel of rate `kappa_rad_s` at occupation `n_th`.
    pub fn single(chi_rad_s: f64, kappa_rad_s: f64, n_th: f64) -> Result<Self> {
        Self::new(chi_rad_s, alloc::vec![Channel { kappa_rad_s, n_th }])
    }

    /// Occupations are evaluated at `f_occupation_hz` for every source.
    pub fn from_sources(
        chi_rad_s: f64,
        sources: &[DissipationSource],
        f_occupation_hz: f64,
    ) -> Result<Self> {
        let channels = sources
            .iter()
            .map(|s| {
                s.validate()?;
                Ok(Channel {
                    kappa_rad_s: s.kappa_rad_s,
                    n_th: s.occupation(f_occupation_hz)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(chi_rad_s, channels)
    }

    pub fn chi_rad_s(&self) -> f64 {
        self.chi_rad_s
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Σκ_j [rad/s].
    pub fn kappa_tot(&self) -> f64 {
        self.kappa_tot
    }

    /// Σκ_j n_j [s⁻¹].
    pub fn weighted_occupation(&self) -> f64 {
        self.channels.iter().map(|c| c.kappa_rad_s * c.n_th).sum()
    }

    /// Bath-averaged occupation Σκ_j n_j / κ_tot.
    pub fn mean_occupation(&self) -> f64 {
        self.weighted_occupation() / self.kappa_tot
    }
}

/// (κ/2)·Re[√((1 + 2iχ/κ)² + 8iχΣκn/κ²) − 1], principal branch.
pub fn gamma_thermal_exact(input: &DephasingInput) -> Result<f64> {
    let kappa = input.kappa_tot;
    let x = input.chi_rad_s / kappa;
    let s = input.weighted_occupation() / kappa;
    // z − 1 written out, then √z − 1 = (z − 1)/(√z + 1) avoids cancellation
    // when χ/κ or n is small.
    let zm1 = Complex64::new(-4.0 * x * x, 4.0 * x + 8.0 * x * s);
    let z = zm1 + 1.0;
    let gamma = 0.5 * kappa * (zm1 / (z.sqrt() + 1.0)).re;
    if gamma < 0.0 {
        if gamma > -1e-12 * kappa {
            return Ok(0.0);
        }
        return Err(Error::NumericalFailure {
            time: 0.0,
            reason: alloc::format!("negative dephasing rate {gamma}"),
        });
    }
    Ok(gamma)
}

/// Second-order expansion in χ/κ: (4χ²Σκn/κ²)(Σκn/κ + 1).
pub fn gamma_thermal_small_chi(input: &DephasingInput) -> f64 {
    let kappa = input.kappa_tot;
    let w = input.weighted_occupation();
    4.0 * input.chi_rad_s * input.chi_rad_s * w / (kappa * kappa) * (w / kappa + 1.0)
}

/// The small-χ form with the second factor read literally as (Σκn + 1),
/// which adds a rate to a number. Kept only for side-by-side reporting.
pub fn gamma_thermal_small_chi_as_printed(input: &DephasingInput) -> f64 {
    let kappa = input.kappa_tot;
    let w = input.weighted_occupation();
    4.0 * input.chi_rad_s * input.chi_rad_s * w / (kappa * kappa) * (w + 1.0)
}

/// Large-χ limit Σκ_j n_j: every thermal photon that enters dephases fully.
pub fn gamma_thermal_saturation(input: &DephasingInput) -> f64 {
    input.weighted_occupation()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    SmallChi,
    Crossover,
    LargeChi,
}

impl Regime {
    pub fn classify(chi_over_kappa: f64) -> Self {
        let r = chi_over_kappa.abs();
        if r < SMALL_CHI_THRESHOLD {
            Regime::SmallChi
        } else if r > LARGE_CHI_THRESHOLD {
            Regime::LargeChi
        } else {
            Regime::Crossover
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::SmallChi => "small_chi",
            Regime::Crossover => "crossover",
            Regime::LargeChi => "large_chi",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DephasingPrediction {
    pub gamma_exact: f64,
    pub gamma_small_chi: f64,
    pub gamma_saturation: f64,
    /// Present only when requested.
    pub gamma_small_chi_as_printed: Option<f64>,
    pub regime: Regime,
}

pub fn predict(input: &DephasingInput, include_as_printed: bool) -> Result<DephasingPrediction> {
    Ok(DephasingPrediction {
        gamma_exact: gamma_thermal_exact(input)?,
        gamma_small_chi: gamma_thermal_small_chi(input),
        gamma_saturation: gamma_thermal_saturation(input),
        gamma_small_chi_as_printed: include_as_printed
            .then(|| gamma_thermal_small_chi_as_printed(input)),
        regime: Regime::classify(input.chi_rad_s / input.kappa_tot),
    })
}

/// 1/(1/(2T1) + Γφ).
pub fn predict_t2(t1_s: f64, gamma_phi_total: f64) -> Result<f64> {
    if !(t1_s > 0.0) {
        return Err(invalid("T1 must be > 0"));
    }
    if !(gamma_phi_total >= 0.0) {
        return Err(invalid("pure dephasing rate must be >= 0"));
    }
    Ok(1.0 / (0.5 / t1_s + gamma_phi_total))
}

/// The single-channel occupation at which the exact rate equals `target`,
/// found by bisection (the rate is increasing in n).
pub fn occupation_for_rate(chi_rad_s: f64, kappa_rad_s: f64, target: f64) -> Result<f64> {
    if !(target >= 0.0) {
        return Err(invalid("target rate must be >= 0"));
    }
    let rate = |n: f64| gamma_thermal_exact(&DephasingInput::single(chi_rad_s, kappa_rad_s, n)?);
    let (mut lo, mut hi) = (0.0, 1.0);
    while rate(hi)? < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(invalid("target rate unreachable at this chi"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
