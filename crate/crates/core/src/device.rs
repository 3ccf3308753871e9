//! Static device parameters and the closed-form quantities derived from them.
//!
//! Configuration values are ordinary frequencies (`*_hz`, i.e. ω/2π) and the
//! functions here that take or return angular rates say so in their names
//! (`*_rad_s`). Conversion happens at this boundary only.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::constants::{BOLTZMANN, ELEMENTARY_CHARGE, PLANCK, SPEED_OF_LIGHT, TAU};
use crate::error::{invalid, Error, Result};

/// Relative disagreement between an explicit χ and the formula value above
/// which [`ChiResolution::warning`] is raised.
pub const CHI_DISCREPANCY_THRESHOLD: f64 = 0.20;

/// Physical parameters of one qubit–cavity device.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceParams {
    /// Qubit transition frequency ω01/2π [Hz].
    pub f_qubit_hz: f64,
    /// Cavity frequency ω_c/2π [Hz].
    pub f_cavity_hz: f64,
    /// Bare coupling g/2π [Hz].
    pub g_over_2pi_hz: f64,
    /// Total qubit capacitance C_Σ [F].
    pub c_sigma_f: Option<f64>,
    /// Junction energy E_J/h [Hz].
    pub e_j_over_h_hz: Option<f64>,
    /// Explicit dispersive shift χ/2π [Hz]; derived from the transmon formula when absent.
    pub chi_over_2pi_hz: Option<f64>,
    /// Loaded quality factor of the cavity.
    pub q_total: f64,
    /// κ_ext/κ_tot.
    pub coupling_ratio: f64,
    /// Intrinsic qubit relaxation time [s].
    pub t1_intrinsic_s: Option<f64>,
    /// Intrinsic pure-dephasing time [s].
    pub tphi_intrinsic_s: Option<f64>,
}

/// The dispersive shift used for simulation, plus the formula value when it
/// could be computed.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiResolution {
    /// χ [rad/s] that downstream code should use.
    pub chi_rad_s: f64,
    /// χ [rad/s] from `-g²E_C/(Δ²-ΔE_C)`, if C_Σ was given.
    pub derived_rad_s: Option<f64>,
    /// χ [rad/s] from the explicit override, if any.
    pub override_rad_s: Option<f64>,
    /// Set when override and formula differ by more than [`CHI_DISCREPANCY_THRESHOLD`].
    pub warning: Option<String>,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        positive("f_qubit_hz", self.f_qubit_hz)?;
        positive("f_cavity_hz", self.f_cavity_hz)?;
        positive("q_total", self.q_total)?;
        if !(self.g_over_2pi_hz.is_finite() && self.g_over_2pi_hz >= 0.0) {
            return Err(invalid("g_over_2pi_hz must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.coupling_ratio) {
            return Err(invalid("coupling_ratio must lie in [0, 1]"));
        }
        if let Some(c) = self.c_sigma_f {
            positive("c_sigma_f", c)?;
        }
        if let Some(ej) = self.e_j_over_h_hz {
            positive("e_j_over_h_hz", ej)?;
        }
        if let Some(chi) = self.chi_over_2pi_hz {
            if !chi.is_finite() {
                return Err(invalid("chi_over_2pi_hz must be finite"));
            }
        }
        if let Some(t1) = self.t1_intrinsic_s {
            positive("t1_intrinsic_s", t1)?;
        }
        if let Some(tphi) = self.tphi_intrinsic_s {
            positive("tphi_intrinsic_s", tphi)?;
        }
        Ok(())
    }

    /// Δ = ω01 − ω_c [rad/s].
    pub fn detuning_rad_s(&self) -> f64 {
        TAU * (self.f_qubit_hz - self.f_cavity_hz)
    }

    pub fn g_rad_s(&self) -> f64 {
        TAU * self.g_over_2pi_hz
    }

    /// E_C/h [Hz] from C_Σ, if the capacitance is known.
    pub fn charging_energy_hz(&self) -> Option<Result<f64>> {
        self.c_sigma_f.map(charging_energy)
    }

    /// Resolves the dispersive shift, preferring the explicit override.
    pub fn resolve_chi(&self) -> Result<ChiResolution> {
        let derived_rad_s = match self.charging_energy_hz() {
            Some(ec_hz) => Some(dispersive_chi(
                self.g_rad_s(),
                self.detuning_rad_s(),
                TAU * ec_hz?,
            )?),
            None => None,
        };
        let override_rad_s = self.chi_over_2pi_hz.map(|chi| TAU * chi);
        let chi_rad_s = match (override_rad_s, derived_rad_s) {
            (Some(o), _) => o,
            (None, Some(d)) => d,
            (None, None) => {
                return Err(invalid(
                    "chi cannot be resolved: give chi_over_2pi_hz or c_sigma_f",
                ))
            }
        };
        let warning = match (override_rad_s, derived_rad_s) {
            (Some(o), Some(d)) if relative_gap(o, d) > CHI_DISCREPANCY_THRESHOLD => {
                Some(alloc::format!(
                    "explicit chi/2pi = {:.4e} Hz differs from transmon formula value {:.4e} Hz by {:.0}%",
                    o / TAU,
                    d / TAU,
                    100.0 * relative_gap(o, d)
                ))
            }
            _ => None,
        };
        Ok(ChiResolution {
            chi_rad_s,
            derived_rad_s,
            override_rad_s,
            warning,
        })
    }

    /// κ_tot [rad/s] implied by the loaded quality factor.
    pub fn kappa_total_rad_s(&self) -> Result<f64> {
        kappa_from_q(self.f_cavity_hz, self.q_total)
    }

    /// Purcell-limited T1 [s] through the total cavity loss.
    pub fn purcell_t1_s(&self) -> Result<f64> {
        purcell_t1(
            self.g_rad_s(),
            self.detuning_rad_s(),
            self.kappa_total_rad_s()?,
        )
    }

    /// (κ_ext, κ_int) [rad/s] split by `coupling_ratio`.
    pub fn kappa_split_rad_s(&self) -> Result<(f64, f64)> {
        let kappa = self.kappa_total_rad_s()?;
        Ok((
            self.coupling_ratio * kappa,
            (1.0 - self.coupling_ratio) * kappa,
        ))
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((a - b) / b).abs()
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(alloc::format!(
            "{name} must be finite and > 0, got {value}"
        )))
    }
}

/// Whether a dissipation channel leaks into the measurement line or is lost
/// in the cavity walls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Port {
    #[default]
    Internal,
    External,
}

/// One cavity loss channel with its bath temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct DissipationSource {
    pub label: String,
    /// κ_j [rad/s].
    pub kappa_rad_s: f64,
    /// T_j [K].
    pub temperature_k: f64,
    pub port: Port,
}

impl DissipationSource {
    pub fn new(label: impl Into<String>, kappa_rad_s: f64, temperature_k: f64) -> Result<Self> {
        let source = Self {
            label: label.into(),
            kappa_rad_s,
            temperature_k,
            port: Port::Internal,
        };
        source.validate()?;
        Ok(source)
    }

    pub fn with_port(mut self, port: Port) -> Self {
        self.port = port;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_rad_s.is_finite() && self.kappa_rad_s >= 0.0) {
            return Err(invalid(alloc::format!(
                "source {}: kappa must be finite and >= 0",
                self.label
            )));
        }
        if !(self.temperature_k.is_finite() && self.temperature_k >= 0.0) {
            return Err(invalid(alloc::format!(
                "source {}: temperature must be finite and >= 0",
                self.label
            )));
        }
        Ok(())
    }

    /// Bose occupation of this bath at `f_hz`.
    pub fn occupation(&self, f_hz: f64) -> Result<f64> {
        thermal_occupation(f_hz, self.temperature_k)
    }
}

/// Interior dimensions of a rectangular cavity [m]: width `a`, height `b`, length `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityGeometry {
    pub a_m: f64,
    pub b_m: f64,
    pub d_m: f64,
}

impl CavityGeometry {
    pub fn new(a_m: f64, b_m: f64, d_m: f64) -> Result<Self> {
        positive("a_m", a_m)?;
        positive("b_m", b_m)?;
        positive("d_m", d_m)?;
        Ok(Self { a_m, b_m, d_m })
    }
}

/// Measured (or simulated) relaxation and Ramsey coherence times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherenceRecord {
    pub t1_s: f64,
    pub t2_star_s: f64,
}

impl CoherenceRecord {
    /// Accepts T2* > 2·T1; check [`CoherenceRecord::exceeds_relaxation_limit`].
    pub fn new(t1_s: f64, t2_star_s: f64) -> Result<Self> {
        positive("t1_s", t1_s)?;
        positive("t2_star_s", t2_star_s)?;
        Ok(Self { t1_s, t2_star_s })
    }

    /// T2* above the 2·T1 bound, which the Markovian model cannot produce.
    pub fn exceeds_relaxation_limit(&self) -> bool {
        self.t2_star_s > 2.0 * self.t1_s * (1.0 + 1e-9)
    }
}

/// E_C/h = e²/(2 C_Σ h) [Hz].
pub fn charging_energy(c_sigma_f: f64) -> Result<f64> {
    positive("c_sigma_f", c_sigma_f)?;
    Ok(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * c_sigma_f * PLANCK))
}

/// Transmon cavity pull χ = −g²E_C/(Δ² − ΔE_C), all in rad/s.
pub fn dispersive_chi(g_rad_s: f64, delta_rad_s: f64, e_c_rad_s: f64) -> Result<f64> {
    if delta_rad_s == 0.0 {
        return Err(Error::Singularity(
            "qubit and cavity are resonant (delta = 0)".into(),
        ));
    }
    if delta_rad_s == e_c_rad_s {
        return Err(Error::Singularity("straddling point (delta = E_C)".into()));
    }
    let denom = delta_rad_s * delta_rad_s - delta_rad_s * e_c_rad_s;
    Ok(-g_rad_s * g_rad_s * e_c_rad_s / denom)
}

/// Bose–Einstein occupation 1/(exp(hf/k_B T) − 1); exactly 0 at T = 0.
pub fn thermal_occupation(f_hz: f64, temperature_k: f64) -> Result<f64> {
    positive("frequency", f_hz)?;
    if !(temperature_k.is_finite() && temperature_k >= 0.0) {
        return Err(invalid("temperature must be finite and >= 0"));
    }
    if temperature_k == 0.0 {
        return Ok(0.0);
    }
    let x = PLANCK * f_hz / (BOLTZMANN * temperature_k);
    Ok(1.0 / x.exp_m1())
}

/// Bath temperature [K] at which the occupation at `f_hz` equals `n_th`.
pub fn temperature_for_occupation(f_hz: f64, n_th: f64) -> Result<f64> {
    positive("frequency", f_hz)?;
    if !(n_th.is_finite() && n_th >= 0.0) {
        return Err(invalid("occupation must be finite and >= 0"));
    }
    if n_th == 0.0 {
        return Ok(0.0);
    }
    Ok(PLANCK * f_hz / (BOLTZMANN * (1.0 / n_th).ln_1p()))
}

/// κ = 2π f_c / Q [rad/s].
pub fn kappa_from_q(f_cavity_hz: f64, q: f64) -> Result<f64> {
    positive("f_cavity_hz", f_cavity_hz)?;
    positive("q", q)?;
    Ok(TAU * f_cavity_hz / q)
}

/// Dispersive Purcell limit Δ²/(g²κ) [s].
pub fn purcell_t1(g_rad_s: f64, delta_rad_s: f64, kappa_rad_s: f64) -> Result<f64> {
    if g_rad_s == 0.0 || kappa_rad_s == 0.0 {
        return Err(Error::Singularity(
            "no Purcell decay without coupling and cavity loss".into(),
        ));
    }
    if !(g_rad_s > 0.0 && kappa_rad_s > 0.0) {
        return Err(invalid("g and kappa must be positive"));
    }
    if delta_rad_s == 0.0 {
        return Err(Error::Singularity("resonant qubit (delta = 0)".into()));
    }
    Ok(delta_rad_s * delta_rad_s / (g_rad_s * g_rad_s * kappa_rad_s))
}

/// (Q1, Q2) = (ω01·T1, ω01·T2*).
pub fn quality_factors(f_qubit_hz: f64, record: &CoherenceRecord) -> Result<(f64, f64)> {
    positive("f_qubit_hz", f_qubit_hz)?;
    let omega = TAU * f_qubit_hz;
    Ok((omega * record.t1_s, omega * record.t2_star_s))
}

/// Γφ = 1/T2* − 1/(2 T1) [1/s], unclamped.
pub fn pure_dephasing_rate(record: &CoherenceRecord) -> f64 {
    1.0 / record.t2_star_s - 1.0 / (2.0 * record.t1_s)
}

/// Transmon estimate ω01/2π ≈ sqrt(8 E_J E_C) − E_C [Hz]; a consistency check only.
pub fn transmon_frequency_estimate(e_j_hz: f64, e_c_hz: f64) -> Result<f64> {
    positive("e_j_hz", e_j_hz)?;
    positive("e_c_hz", e_c_hz)?;
    Ok((8.0 * e_j_hz * e_c_hz).sqrt() - e_c_hz)
}

/// Mode indices `(m, n, l)` along (width, height, length).
pub type ModeIndex = (u32, u32, u32);

/// Empty-box resonance f = (c/2)·sqrt((m/a)² + (n/b)² + (l/d)²) [Hz].
pub fn rectangular_mode_freq(geom: &CavityGeometry, m: u32, n: u32, l: u32) -> Result<f64> {
    let zeros = [m, n, l].iter().filter(|&&i| i == 0).count();
    if zeros > 1 {
        return Err(invalid(alloc::format!(
            "mode ({m},{n},{l}) has more than one zero index and does not exist"
        )));
    }
    let term = |i: u32, len: f64| {
        let x = f64::from(i) / len;
        x * x
    };
    let sum = term(m, geom.a_m) + term(n, geom.b_m) + term(l, geom.d_m);
    Ok(0.5 * SPEED_OF_LIGHT * sum.sqrt())
}

/// A cavity mode together with its empty-box frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityMode {
    pub index: ModeIndex,
    pub freq_hz: f64,
}

/// Modes whose electric field along the height axis has an antinode at the
/// box center (m odd, n even, l odd), sorted by frequency.
///
/// Only indices up to `max_index` are enumerated. A dipole at the center
/// oriented along `b` couples to exactly these modes.
pub fn modes_coupled_at_center(geom: &CavityGeometry, max_index: u32) -> Result<Vec<CavityMode>> {
    if max_index < 1 {
        return Err(invalid("max_index must be >= 1"));
    }
    let mut modes = Vec::new();
    for m in (1..=max_index).step_by(2) {
        for n in (0..=max_index).step_by(2) {
            for l in (1..=max_index).step_by(2) {
                modes.push(CavityMode {
                    index: (m, n, l),
                    freq_hz: rectangular_mode_freq(geom, m, n, l)?,
                });
            }
        }
    }
    modes.sort_by(|x, y| x.freq_hz.total_cmp(&y.freq_hz));
    Ok(modes)
}

/// κ_ext/(κ_ext + κ_int): the fraction of cavity photons that leave through
/// the measurement port.
pub fn coupling_efficiency(kappa_ext: f64, kappa_int: f64) -> Result<f64> {
    if !(kappa_ext >= 0.0 && kappa_int >= 0.0) {
        return Err(invalid("kappa values must be >= 0"));
    }
    let total = kappa_ext + kappa_int;
    if total <= 0.0 {
        return Err(invalid("at least one of kappa_ext, kappa_int must be > 0"));
    }
    Ok(kappa_ext / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const MHZ: f64 = 1e6;
    const GHZ: f64 = 1e9;

    fn reference_box() -> CavityGeometry {
        CavityGeometry::new(18.6e-3, 4.2e-3, 15.5e-3).unwrap()
    }

    #[test]
    fn charging_energy_of_91_ff() {
        // e²/(2Ch) evaluated independently with CODATA values: 212.8597 MHz
        let ec = charging_energy(91e-15).unwrap();
        assert_relative_eq!(ec, 212.859_662_9e6, max_relative = 1e-8);
        let from_ratio = 10.3946 * GHZ / 49.0;
        assert!((ec - from_ratio).abs() / ec < 0.01);
        assert_relative_eq!(
            charging_energy(182e-15).unwrap(),
            ec / 2.0,
            max_relative = 1e-15
        );
        assert!(matches!(
            charging_energy(0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(charging_energy(-1e-15).is_err());
    }

    #[test]
    fn chi_from_printed_formula() {
        let g = TAU * 153.0 * MHZ;
        let delta = TAU * -7.9 * GHZ;
        let ec = TAU * 212.0 * MHZ;
        let chi = dispersive_chi(g, delta, ec).unwrap() / TAU;
        // scalar evaluation: -77.4397 kHz
        assert_relative_eq!(chi, -77_439.704_891, max_relative = 1e-8);
        assert_eq!(dispersive_chi(0.0, delta, ec).unwrap(), 0.0);
        let flipped = dispersive_chi(g, -delta, -ec).unwrap() / TAU;
        assert_eq!(flipped, -chi);
    }

    #[test]
    fn chi_singularities() {
        assert!(matches!(
            dispersive_chi(1.0, 0.0, 1.0),
            Err(Error::Singularity(_))
        ));
        assert!(matches!(
            dispersive_chi(1.0, 2.0, 2.0),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn temperature_inverts_occupation() {
        for n in [1e-6, 0.005, 0.05, 2.0] {
            let t = temperature_for_occupation(12.1e9, n).unwrap();
            assert!((thermal_occupation(12.1e9, t).unwrap() / n - 1.0).abs() < 1e-12);
        }
        assert_eq!(temperature_for_occupation(12.1e9, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn thermal_occupation_values() {
        assert_eq!(thermal_occupation(12.1 * GHZ, 0.0).unwrap(), 0.0);
        let n70 = thermal_occupation(12.1 * GHZ, 0.070).unwrap();
        assert_relative_eq!(n70, 2.496_164_87e-4, max_relative = 1e-6);
        let n8 = thermal_occupation(12.1 * GHZ, 0.008).unwrap();
        assert!(n8 < 1e-30 && n8 > 0.0);
        assert!(thermal_occupation(0.0, 0.1).is_err());
        assert!(thermal_occupation(1e9, -0.1).is_err());
    }

    #[test]
    fn kappa_conversion() {
        let kappa = kappa_from_q(12.1 * GHZ, 10_400.0).unwrap();
        assert_relative_eq!(kappa / TAU, 1.163_461_538e6, max_relative = 1e-9);
        assert_relative_eq!(
            kappa_from_q(12.1 * GHZ, 20_800.0).unwrap(),
            kappa / 2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(kappa_from_q(1.0, TAU).unwrap(), 1.0, max_relative = 1e-15);
        assert!(kappa_from_q(0.0, 1.0).is_err());
        assert!(kappa_from_q(1.0, 0.0).is_err());
    }

    #[test]
    fn purcell_limit() {
        let g = TAU * 153.0 * MHZ;
        let delta = TAU * 7.9 * GHZ;
        let kappa = kappa_from_q(12.1 * GHZ, 10_400.0).unwrap();
        let t1 = purcell_t1(g, delta, kappa).unwrap();
        assert_relative_eq!(t1, 364.703e-6, max_relative = 1e-5);
        assert!((t1 - 400e-6).abs() / 400e-6 < 0.15);
        assert_relative_eq!(
            purcell_t1(g, 2.0 * delta, kappa).unwrap(),
            4.0 * t1,
            max_relative = 1e-14
        );
        assert!(matches!(
            purcell_t1(0.0, delta, kappa),
            Err(Error::Singularity(_))
        ));
        assert!(matches!(
            purcell_t1(g, delta, 0.0),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn quality_factors_of_measured_device() {
        let rec = CoherenceRecord::new(70e-6, 95e-6).unwrap();
        let (q1, q2) = quality_factors(4.2 * GHZ, &rec).unwrap();
        assert_relative_eq!(q1, 1.847_256_48e6, max_relative = 1e-8);
        assert_relative_eq!(q2, 2.506_990_94e6, max_relative = 1e-8);
        let same = CoherenceRecord::new(50e-6, 50e-6).unwrap();
        let (a, b) = quality_factors(4.2 * GHZ, &same).unwrap();
        assert_eq!(a / b, 1.0);
    }

    #[test]
    fn coherence_record_limits() {
        assert!(CoherenceRecord::new(0.0, 1e-6).is_err());
        assert!(CoherenceRecord::new(1e-6, 0.0).is_err());
        let odd = CoherenceRecord::new(10e-6, 25e-6).unwrap();
        assert!(odd.exceeds_relaxation_limit());
        assert!(!CoherenceRecord::new(70e-6, 95e-6)
            .unwrap()
            .exceeds_relaxation_limit());
    }

    #[test]
    fn pure_dephasing_sister_device() {
        let main = pure_dephasing_rate(&CoherenceRecord::new(70e-6, 95e-6).unwrap());
        let sister = pure_dephasing_rate(&CoherenceRecord::new(45e-6, 18e-6).unwrap());
        assert_relative_eq!(main, 3_383.458_646_6, max_relative = 1e-9);
        assert_relative_eq!(sister, 44_444.444_444, max_relative = 1e-9);
        assert_relative_eq!(sister / main, 13.135_802_47, max_relative = 1e-8);
        let limit = CoherenceRecord::new(40e-6, 80e-6).unwrap();
        assert_eq!(pure_dephasing_rate(&limit), 0.0);
    }

    #[test]
    fn negative_pure_dephasing_is_reported() {
        let rec = CoherenceRecord::new(10e-6, 25e-6).unwrap();
        assert!(pure_dephasing_rate(&rec) < 0.0);
    }

    #[test]
    fn box_modes() {
        let g = reference_box();
        let te101 = rectangular_mode_freq(&g, 1, 0, 1).unwrap();
        let te301 = rectangular_mode_freq(&g, 3, 0, 1).unwrap();
        assert_relative_eq!(te101, 12.588_462_086e9, max_relative = 1e-9);
        assert_relative_eq!(te301, 26.039_222_488e9, max_relative = 1e-9);
        assert!((te101 - 12.1e9).abs() / 12.1e9 < 0.05);
        assert!(te301 - 4.2e9 > 20e9);
        let cube = CavityGeometry::new(0.01, 0.01, 0.01).unwrap();
        assert_eq!(
            rectangular_mode_freq(&cube, 1, 0, 1).unwrap(),
            rectangular_mode_freq(&cube, 0, 1, 1).unwrap()
        );
        assert!(rectangular_mode_freq(&g, 1, 0, 0).is_err());
        assert!(rectangular_mode_freq(&g, 0, 0, 0).is_err());
    }

    #[test]
    fn center_coupled_modes() {
        let g = reference_box();
        let modes = modes_coupled_at_center(&g, 3).unwrap();
        let idx: Vec<ModeIndex> = modes.iter().map(|m| m.index).collect();
        for wanted in [(1, 0, 1), (3, 0, 1), (1, 0, 3), (3, 0, 3)] {
            assert!(idx.contains(&wanted), "{wanted:?} missing");
        }
        assert!(!idx.contains(&(2, 0, 1)));
        assert_eq!(idx[0], (1, 0, 1));
        assert_eq!(idx[1], (3, 0, 1));
        assert!(modes.windows(2).all(|w| w[0].freq_hz <= w[1].freq_hz));
        assert!(modes_coupled_at_center(&g, 0).is_err());
    }

    #[test]
    fn photon_budget() {
        assert_eq!(coupling_efficiency(1.0, 3.0).unwrap(), 0.25);
        assert_eq!(coupling_efficiency(2.0, 0.0).unwrap(), 1.0);
        assert_eq!(coupling_efficiency(0.0, 2.0).unwrap(), 0.0);
        assert!(coupling_efficiency(0.0, 0.0).is_err());
    }

    #[test]
    fn transmon_estimate_residual() {
        let ec = charging_energy(91e-15).unwrap();
        let f = transmon_frequency_estimate(10.3946e9, ec).unwrap();
        assert_relative_eq!(f, 3.994_363_7e9, max_relative = 1e-7);
    }

    fn reference_device() -> DeviceParams {
        DeviceParams {
            f_qubit_hz: 4.2e9,
            f_cavity_hz: 12.1e9,
            g_over_2pi_hz: 153e6,
            c_sigma_f: Some(91e-15),
            e_j_over_h_hz: Some(10.3946e9),
            chi_over_2pi_hz: Some(390e3),
            q_total: 10_400.0,
            coupling_ratio: 0.25,
            t1_intrinsic_s: Some(70e-6),
            tphi_intrinsic_s: None,
        }
    }

    #[test]
    fn chi_override_discrepancy_is_flagged() {
        let dev = reference_device();
        dev.validate().unwrap();
        let chi = dev.resolve_chi().unwrap();
        assert_relative_eq!(chi.chi_rad_s, TAU * 390e3, max_relative = 1e-15);
        let derived = chi.derived_rad_s.unwrap() / TAU;
        // derived with E_C from C_Σ rather than the rounded 212 MHz
        assert_relative_eq!(derived, -77_745.48, max_relative = 1e-6);
        assert!(chi.warning.is_some());

        let mut consistent = dev.clone();
        consistent.chi_over_2pi_hz = Some(derived * 1.1);
        assert!(consistent.resolve_chi().unwrap().warning.is_none());

        let mut derived_only = dev.clone();
        derived_only.chi_over_2pi_hz = None;
        assert_eq!(
            derived_only.resolve_chi().unwrap().chi_rad_s,
            chi.derived_rad_s.unwrap()
        );

        let mut nothing = derived_only;
        nothing.c_sigma_f = None;
        assert!(nothing.resolve_chi().is_err());
    }

    #[test]
    fn device_validation() {
        let mut dev = reference_device();
        dev.coupling_ratio = 1.5;
        assert!(dev.validate().is_err());
        let mut dev = reference_device();
        dev.q_total = 0.0;
        assert!(dev.validate().is_err());
        let mut dev = reference_device();
        dev.f_cavity_hz = dev.f_qubit_hz;
        dev.chi_over_2pi_hz = None;
        assert!(matches!(dev.resolve_chi(), Err(Error::Singularity(_))));
    }

    proptest! {
        #[test]
        fn chi_is_odd_and_quadratic(g in 1e6f64..1e9, delta in -5e10f64..5e10, ec in 1e8f64..2e9) {
            prop_assume!(delta.abs() > 1e7 && (delta - ec).abs() > 1e7);
            let chi = dispersive_chi(g, delta, ec).unwrap();
            let odd = dispersive_chi(g, -delta, -ec).unwrap();
            prop_assert_eq!(odd, -chi);
            let doubled = dispersive_chi(2.0 * g, delta, ec).unwrap();
            prop_assert!((doubled - 4.0 * chi).abs() <= 1e-14 * chi.abs());
        }

        #[test]
        fn occupation_monotone(f in 1e8f64..5e10, t in 1e-2f64..1.0, dt in 1e-4f64..0.1) {
            let n = thermal_occupation(f, t).unwrap();
            prop_assert!(thermal_occupation(f, t + dt).unwrap() > n);
            prop_assert!(thermal_occupation(f * 1.01, t).unwrap() < n);
        }

        #[test]
        fn occupation_rayleigh_jeans(f in 1e6f64..1e9, x in 1e-5f64..0.01) {
            // choose T so that hf/kT = x
            let t = PLANCK * f / (BOLTZMANN * x);
            let n = thermal_occupation(f, t).unwrap();
            let rj = BOLTZMANN * t / (PLANCK * f);
            prop_assert!((n - rj).abs() / rj < 0.01);
        }

        #[test]
        fn quality_factor_round_trip(f in 1e9f64..1e10, t1 in 1e-6f64..1e-3, frac in 0.05f64..2.0) {
            let rec = CoherenceRecord::new(t1, t1 * frac).unwrap();
            let (q1, q2) = quality_factors(f, &rec).unwrap();
            let back = CoherenceRecord::new(q1 / (TAU * f), q2 / (TAU * f)).unwrap();
            let (q1b, q2b) = quality_factors(f, &back).unwrap();
            prop_assert!(((q1b - q1) / q1).abs() < 1e-12);
            prop_assert!(((q2b - q2) / q2).abs() < 1e-12);
            let g = pure_dephasing_rate(&rec);
            let gb = pure_dephasing_rate(&back);
            prop_assert!((g - gb).abs() <= 1e-12 * (1.0 / rec.t2_star_s));
        }

        #[test]
        fn mode_permutation_invariance(a in 1e-3f64..0.05, b in 1e-3f64..0.05, d in 1e-3f64..0.05,
                                       m in 1u32..5, n in 0u32..5, l in 1u32..5) {
            let g1 = CavityGeometry::new(a, b, d).unwrap();
            let g2 = CavityGeometry::new(d, a, b).unwrap();
            let f1 = rectangular_mode_freq(&g1, m, n, l).unwrap();
            let f2 = rectangular_mode_freq(&g2, l, m, n).unwrap();
            prop_assert!(((f1 - f2) / f1).abs() < 1e-15);
        }
    }
}
