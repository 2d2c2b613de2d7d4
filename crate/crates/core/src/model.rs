//! Linearized model parameters, susceptibilities and closed-form quantities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j_all;
use crate::error::{Error, Result, Warning};
use crate::units::{HBAR, TWO_PI};

/// Constants of the linearized, slowly modulated optomechanical model.
///
/// All rates are angular frequencies in rad/s. `kappa` is the full amplitude
/// decay rate; red detuning is `detuning < 0`. The modulations are
/// `g(t) = 2 g_bar sin(ω_d t)` and `ω_M(t) = omega_m + 2 omega_2 cos(2 ω_d t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    #[serde(rename = "detuning_rad_s")]
    pub detuning: f64,
    #[serde(rename = "kappa_rad_s")]
    pub kappa: f64,
    #[serde(rename = "gamma_m_rad_s")]
    pub gamma_m: f64,
    #[serde(rename = "omega_m_rad_s")]
    pub omega_m: f64,
    #[serde(rename = "omega_d_rad_s")]
    pub omega_d: f64,
    #[serde(rename = "omega_2_rad_s")]
    pub omega_2: f64,
    #[serde(rename = "g_bar_rad_s")]
    pub g_bar: f64,
    pub n_th: f64,
    #[serde(default)]
    pub n_opt: f64,
}

impl SystemParams {
    /// Checks the invariants; returns warnings for tolerated but suspicious values.
    pub fn validate(&self) -> Result<Vec<Warning>> {
        let fields = [
            ("detuning", self.detuning),
            ("kappa", self.kappa),
            ("gamma_m", self.gamma_m),
            ("omega_m", self.omega_m),
            ("omega_d", self.omega_d),
            ("omega_2", self.omega_2),
            ("g_bar", self.g_bar),
            ("n_th", self.n_th),
            ("n_opt", self.n_opt),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        for (name, v) in [("kappa", self.kappa), ("omega_m", self.omega_m), ("omega_d", self.omega_d)] {
            if v <= 0.0 {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in
            [("gamma_m", self.gamma_m), ("omega_2", self.omega_2), ("n_th", self.n_th), ("n_opt", self.n_opt)]
        {
            if v < 0.0 {
                return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        let mut warnings = Vec::new();
        if self.omega_d > self.omega_m / 5.0 {
            warnings.push(Warning::FastModulation { omega_d: self.omega_d, omega_m: self.omega_m });
        }
        Ok(warnings)
    }

    /// Stable hexadecimal digest of every field (SHA-256 over the little-endian bits).
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for v in [
            self.detuning,
            self.kappa,
            self.gamma_m,
            self.omega_m,
            self.omega_d,
            self.omega_2,
            self.g_bar,
            self.n_th,
            self.n_opt,
        ] {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Optical susceptibility `χ_o(ω) = [−i(ω+Δ) + κ/2]⁻¹`.
pub fn chi_o(omega: f64, p: &SystemParams) -> Complex64 {
    1.0 / Complex64::new(p.kappa / 2.0, -(omega + p.detuning))
}

/// Mechanical susceptibility `χ_M(ω) = [−i(ω−ω_M) + Γ_M/2]⁻¹` about the supplied `omega_m`.
pub fn chi_m(omega: f64, omega_m: f64, p: &SystemParams) -> Result<Complex64> {
    let den = Complex64::new(p.gamma_m / 2.0, -(omega - omega_m));
    if den.norm() == 0.0 {
        return Err(Error::SingularEvaluation(format!("chi_m at omega = omega_m = {omega_m} with gamma_m = 0")));
    }
    Ok(1.0 / den)
}

/// `η(ω) = χ_o(ω) − χ_o*(−ω)`.
pub fn eta(omega: f64, p: &SystemParams) -> Complex64 {
    chi_o(omega, p) - chi_o(-omega, p).conj()
}

/// All three susceptibilities at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptibilities {
    pub chi_o: Complex64,
    pub chi_m: Complex64,
    pub eta: Complex64,
}

impl Susceptibilities {
    pub fn at(omega: f64, p: &SystemParams) -> Result<Self> {
        Ok(Self { chi_o: chi_o(omega, p), chi_m: chi_m(omega, p.omega_m, p)?, eta: eta(omega, p) })
    }
}

/// Small-coupling prediction of the split-peak ratio,
/// `r = (2ω_d − ω_2)² / (2ω_d + ω_2)²` (height at ω̄_M+ω_d over height at ω̄_M−ω_d).
pub fn ratio_prediction(omega_d: f64, omega_2: f64) -> f64 {
    let a = 2.0 * omega_d - omega_2;
    let b = 2.0 * omega_d + omega_2;
    (a * a) / (b * b)
}

/// Ratio for a pure phase-modulated oscillator with index `β = ω_2/ω_d`:
/// `((J_0(β) − J_1(β)) / (J_0(β) + J_1(β)))²`. Agrees with
/// [`ratio_prediction`] to first order in `ω_2/ω_d`.
pub fn ratio_phase_modulated(omega_d: f64, omega_2: f64) -> f64 {
    let j = bessel_j_all(1, omega_2 / omega_d);
    let r = (j[0] - j[1]) / (j[0] + j[1]);
    r * r
}

/// Occupancy floor from quantum backaction, `(κ / 4ω̄_M)²`.
pub fn n_backaction(p: &SystemParams) -> f64 {
    (p.kappa / (4.0 * p.omega_m)).powi(2)
}

/// Gas damping rate (rad/s) from pressure in mbar: `Γ_M = 2000 · P`.
pub fn pressure_to_gamma(pressure_mbar: f64) -> Result<f64> {
    if !(pressure_mbar >= 0.0) || !pressure_mbar.is_finite() {
        return Err(Error::invalid("pressure_mbar", format!("must be >= 0, got {pressure_mbar}")));
    }
    Ok(0.2e4 * pressure_mbar)
}

/// Physical constants of the hybrid electro-optical trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapParams {
    /// Optical well depth per photon `A` (rad/s).
    #[serde(rename = "well_depth_rad_s")]
    pub well_depth: f64,
    /// Wavelength λ (m).
    #[serde(rename = "wavelength_m")]
    pub wavelength: f64,
    /// Particle mass (kg).
    #[serde(rename = "mass_kg")]
    pub mass: f64,
    /// Ion-trap frequency ω_T (rad/s).
    #[serde(rename = "omega_t_rad_s")]
    pub omega_t: f64,
    /// Index of the optical well holding the particle.
    pub well_index: u32,
    /// Mean intracavity amplitude |ᾱ| (photon number is its square).
    #[serde(rename = "alpha_sqrt_photons")]
    pub alpha: f64,
    /// Gas pressure in mbar, if known.
    #[serde(default)]
    pub pressure_mbar: Option<f64>,
}

impl TrapParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("well_depth", self.well_depth),
            ("wavelength", self.wavelength),
            ("mass", self.mass),
            ("alpha", self.alpha),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.omega_t >= 0.0) || !self.omega_t.is_finite() {
            return Err(Error::invalid("omega_t", "must be >= 0"));
        }
        if let Some(p) = self.pressure_mbar {
            pressure_to_gamma(p)?;
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        TWO_PI / self.wavelength
    }

    /// Position of the well antinode, `k x_N = 2πN`.
    pub fn well_position(&self) -> f64 {
        self.well_index as f64 * self.wavelength
    }

    /// Unmodulated trap frequency `ω_0 = sqrt(2ħk²A|ᾱ|²/m)`.
    pub fn omega_0(&self) -> f64 {
        let k = self.wavenumber();
        (2.0 * HBAR * k * k * self.well_depth * self.alpha * self.alpha / self.mass).sqrt()
    }

    /// Slow-oscillation phase amplitude `X_d = (ω_T²/ω_0²)·2k x_N`.
    pub fn drive_phase_amplitude(&self) -> f64 {
        let w0 = self.omega_0();
        (self.omega_t * self.omega_t / (w0 * w0)) * 2.0 * self.wavenumber() * self.well_position()
    }

    /// Zero-point amplitude `sqrt(ħ / 2mω)` at frequency `omega`.
    pub fn x_zpf(&self, omega: f64) -> f64 {
        (HBAR / (2.0 * self.mass * omega)).sqrt()
    }
}

/// Modulation content implied by a trap and slow phase amplitude `X_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapDerived {
    pub x_d: f64,
    pub omega_0: f64,
    pub omega_m: f64,
    pub omega_2: f64,
    pub g_bar: f64,
    /// Peak coupling `g_0 = kA|ᾱ| x_zpf`, so that `g(t) = g_0 sin(2k x_0(t))`.
    pub g_0: f64,
    /// `(k, c_k)` with `g(t) = Σ_k c_k sin(k ω_d t)`, odd `k ≥ 1`.
    pub g_sine_harmonics: Vec<(u32, f64)>,
    /// `(k, c_k)` with `ω_M²(t) = Σ_k c_k cos(k ω_d t)`, even `k ≥ 0`.
    pub omega_sq_cosine_harmonics: Vec<(u32, f64)>,
}

impl TrapDerived {
    /// Replaces ω̄_M, ω_2 and ḡ of `base` with the trap-derived values.
    pub fn apply_to(&self, base: &SystemParams) -> SystemParams {
        SystemParams { omega_m: self.omega_m, omega_2: self.omega_2, g_bar: self.g_bar, ..*base }
    }
}

const HARMONIC_TOL: f64 = 1e-12;

/// Extracts ω̄_M, ω_2 and ḡ from the trap using the Jacobi–Anger expansions
/// of `cos(X_d sin ω_d t)` and `sin(X_d sin ω_d t)`.
pub fn derive_from_trap(trap: &TrapParams, x_d: f64) -> Result<TrapDerived> {
    trap.validate()?;
    if !x_d.is_finite() || x_d.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::invalid("x_d", format!("|X_d| must be < pi/2 to stay in the harmonic region, got {x_d}")));
    }
    let x = x_d.abs();
    let nmax = 40;
    let j = bessel_j_all(nmax, x);
    let w0 = trap.omega_0();
    let omega_m = w0 * j[0].sqrt();
    let omega_2 = w0 * j[2] / (2.0 * j[0].sqrt());
    let g_0 = trap.wavenumber() * trap.well_depth * trap.alpha * trap.x_zpf(omega_m);
    let g_bar = g_0 * j[1];

    let mut g_sine_harmonics = Vec::new();
    let mut omega_sq_cosine_harmonics = vec![(0, w0 * w0 * j[0])];
    for (n, &jn) in j.iter().enumerate().skip(1) {
        if jn.abs() < HARMONIC_TOL {
            break;
        }
        if n % 2 == 1 {
            g_sine_harmonics.push((n as u32, 2.0 * g_0 * jn));
        } else {
            omega_sq_cosine_harmonics.push((n as u32, 2.0 * w0 * w0 * jn));
        }
    }
    Ok(TrapDerived { x_d: x, omega_0: w0, omega_m, omega_2, g_bar, g_0, g_sine_harmonics, omega_sq_cosine_harmonics })
}
