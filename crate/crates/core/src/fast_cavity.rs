//! Fast-cavity ansatz: the cavity follows the particle without delay, so the
//! detected signal is `cos 2kx(t)` with
//!
//! ```text
//! 2kx(t) = X_d sin(ω_d t) + X_M cos Φ_M(t),   Φ_M(t) = ω̄_M t + β sin(2ω_d t)
//! ```
//!
//! Its spectrum is a set of discrete lines obtained from the nested
//! Jacobi–Anger expansion
//!
//! ```text
//! e^{i(u+v)} = Σ_{p,q,s} J_p(X_d) iᵠ J_q(X_M) J_s(qβ) e^{i(qω̄_M + (p+2s)ω_d)t}.
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::bessel::bessel_j_all;
use crate::error::{Error, Result, Warning};
use crate::model::{eta, SystemParams};
use crate::spectrum::{Quantity, SpectrumGrid, SpectrumMeta, CONVENTION_CLASSICAL};
use crate::units::TWO_PI;

/// Choice of phase-modulation index `β` of `Φ_M(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseIndex {
    /// `β = ω_2/ω_d`, the integral of `ω̄_M + 2ω_2 cos 2ω_d t`.
    #[default]
    Integrated,
    /// `β = ω_2/(2ω_d)`.
    HalfIntegrated,
}

/// Optical-spring treatment when deriving ansatz parameters from a linear model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpringDressing {
    /// Bare `ω̄_M` and `ω_2`.
    None,
    /// Adds the instantaneous spring shift `g(t)² Im η(ω̄_M)` of a cavity that
    /// follows the motion adiabatically.
    #[default]
    Adiabatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    /// Slow phase amplitude of `2kx_0(t)`.
    pub x_d: f64,
    /// Amplitude of the fast motion in `2kx`, taken as the RMS thermal value.
    pub x_m: f64,
    pub omega_m: f64,
    pub omega_d: f64,
    /// May be negative; flipping its sign mirrors the split-peak asymmetry.
    pub omega_2: f64,
    /// Lorentzian full width used for display spectra (rad/s).
    pub gamma_line: f64,
    #[serde(default)]
    pub phase_index: PhaseIndex,
}

impl AnsatzParams {
    /// Ansatz matching a linear model; `gamma_line` is taken from `Γ_M`.
    pub fn from_system(p: &SystemParams, x_d: f64, x_m: f64, dressing: SpringDressing) -> Self {
        let (mut omega_m, mut omega_2) = (p.omega_m, p.omega_2);
        if dressing == SpringDressing::Adiabatic {
            // g(t)² = 2ḡ² − 2ḡ² cos 2ω_d t
            let im = eta(p.omega_m, p).im;
            omega_m += 2.0 * p.g_bar * p.g_bar * im;
            omega_2 -= p.g_bar * p.g_bar * im;
        }
        Self {
            x_d,
            x_m,
            omega_m,
            omega_d: p.omega_d,
            omega_2,
            gamma_line: p.gamma_m.max(1e-12),
            phase_index: PhaseIndex::Integrated,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("x_d", self.x_d), ("x_m", self.x_m)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("omega_m", self.omega_m), ("omega_d", self.omega_d), ("gamma_line", self.gamma_line)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !self.omega_2.is_finite() {
            return Err(Error::invalid("omega_2", "must be finite"));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        match self.phase_index {
            PhaseIndex::Integrated => self.omega_2 / self.omega_d,
            PhaseIndex::HalfIntegrated => self.omega_2 / (2.0 * self.omega_d),
        }
    }

    /// `cos 2kx(t)` at time `t`.
    pub fn signal(&self, t: f64) -> f64 {
        let phi = self.omega_m * t + self.beta() * (2.0 * self.omega_d * t).sin();
        (self.x_d * (self.omega_d * t).sin() + self.x_m * phi.cos()).cos()
    }
}

/// One spectral line of the real signal, `c e^{-iνt}` convention aside: the
/// two-sided line amplitude at angular frequency `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub omega: f64,
    /// Multiple `q` of `ω̄_M`.
    pub carrier: i32,
    /// Multiple `m` of `ω_d`.
    pub sideband: i32,
    pub amplitude: Complex64,
}

impl Line {
    pub fn power(&self) -> f64 {
        self.amplitude.norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpectrum {
    /// Lines sorted by frequency, both signs.
    pub lines: Vec<Line>,
    pub max_harmonic: usize,
    pub omega_m: f64,
    pub omega_d: f64,
    /// Upper bound on the expansion weight dropped by the truncation.
    pub neglected_weight: f64,
    pub warnings: Vec<Warning>,
}

impl LineSpectrum {
    pub fn total_power(&self) -> f64 {
        self.lines.iter().map(Line::power).sum()
    }

    /// Power of the line at `q ω̄_M + m ω_d`, zero if absent.
    pub fn power_at(&self, q: i32, m: i32) -> f64 {
        let w = q as f64 * self.omega_m + m as f64 * self.omega_d;
        let tol = 1e-12 * self.omega_m;
        self.lines.iter().filter(|l| (l.omega - w).abs() <= tol).map(Line::power).sum()
    }

    /// Power ratio of the `ω̄_M + ω_d` and `ω̄_M − ω_d` lines.
    pub fn split_ratio(&self) -> f64 {
        self.power_at(1, 1) / self.power_at(1, -1)
    }

    /// Lines convolved with Lorentzians of full width `gamma_line`, each of area equal to its power.
    pub fn convolve(&self, grid: &[f64], gamma_line: f64) -> Result<SpectrumGrid> {
        if !(gamma_line > 0.0) {
            return Err(Error::invalid("gamma_line", "must be > 0"));
        }
        let h2 = 0.25 * gamma_line * gamma_line;
        let values = grid
            .iter()
            .map(|&w| self.lines.iter().map(|l| l.power() * gamma_line / ((w - l.omega).powi(2) + h2)).sum())
            .collect();
        SpectrumGrid::new(
            grid.to_vec(),
            values,
            Quantity::Psd,
            CONVENTION_CLASSICAL,
            SpectrumMeta { name: "fast_cavity".into(), units: "1/Hz".into(), ..SpectrumMeta::default() },
        )
    }
}

/// Tolerance on the dropped expansion weight.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// Smallest harmonic order keeping the dropped weight below [`TRUNCATION_TOL`].
pub fn auto_order(params: &AnsatzParams) -> usize {
    let mut m = 2;
    while m < 400 && neglected(params, m) > TRUNCATION_TOL * 1e-2 {
        m += 2;
    }
    m
}

fn tail(x: f64, m: usize) -> f64 {
    let j = bessel_j_all(m, x);
    let kept: f64 = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
    (1.0 - kept).max(0.0)
}

fn neglected(params: &AnsatzParams, m: usize) -> f64 {
    let b = params.beta();
    let jm = bessel_j_all(m, params.x_m);
    // each carrier q drops its s-tail in proportion to its own weight J_q(X_M)²
    let s_tail: f64 = (0..=m).map(|q| if q == 0 { 1.0 } else { 2.0 } * jm[q] * jm[q] * tail(q as f64 * b, m)).sum();
    tail(params.x_d, m) + tail(params.x_m, m) + s_tail
}

/// Line spectrum of `cos 2kx(t)` with `|p|, |q|, |s| ≤ max_harmonic`.
pub fn line_spectrum(params: &AnsatzParams, max_harmonic: usize) -> Result<LineSpectrum> {
    params.validate()?;
    let mh = max_harmonic as i32;
    let jd = bessel_j_all(max_harmonic, params.x_d);
    let jm = bessel_j_all(max_harmonic, params.x_m);
    let jn = |table: &[f64], n: i32| -> f64 {
        let v = table[n.unsigned_abs() as usize];
        if n < 0 && n % 2 != 0 {
            -v
        } else {
            v
        }
    };
    let beta = params.beta();
    // E_{q,m}: coefficient of e^{i(qω̄ + mω_d)t} in e^{i(u+v)}
    let mut e: BTreeMap<(i32, i32), Complex64> = BTreeMap::new();
    let ipow =
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)];
    for q in -mh..=mh {
        let aq = jn(&jm, q);
        if aq == 0.0 {
            continue;
        }
        let iq = ipow[q.rem_euclid(4) as usize];
        let js = bessel_j_all(max_harmonic, q as f64 * beta);
        for p in -mh..=mh {
            let ap = jn(&jd, p);
            if ap == 0.0 {
                continue;
            }
            for s in -mh..=mh {
                let w = ap * aq * jn(&js, s);
                if w == 0.0 {
                    continue;
                }
                *e.entry((q, p + 2 * s)).or_default() += iq * w;
            }
        }
    }
    let mut lines: Vec<Line> = e
        .iter()
        .map(|(&(q, m), &v)| {
            let partner = e.get(&(-q, -m)).copied().unwrap_or_default();
            Line {
                omega: q as f64 * params.omega_m + m as f64 * params.omega_d,
                carrier: q,
                sideband: m,
                amplitude: 0.5 * (v + partner.conj()),
            }
        })
        .filter(|l| l.power() > 1e-300)
        .collect();
    lines.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    // merge lines that coincide for commensurate frequencies
    let mut merged: Vec<Line> = Vec::with_capacity(lines.len());
    for l in lines {
        match merged.last_mut() {
            Some(last) if (last.omega - l.omega).abs() <= 1e-12 * params.omega_m => {
                if l.power() > last.power() {
                    last.carrier = l.carrier;
                    last.sideband = l.sideband;
                }
                last.amplitude += l.amplitude;
            }
            _ => merged.push(l),
        }
    }
    let neglected_weight = neglected(params, max_harmonic);
    let mut warnings = Vec::new();
    if neglected_weight > TRUNCATION_TOL {
        warnings.push(Warning::TruncationInsufficient { neglected: neglected_weight });
    }
    Ok(LineSpectrum {
        lines: merged,
        max_harmonic,
        omega_m: params.omega_m,
        omega_d: params.omega_d,
        neglected_weight,
        warnings,
    })
}

/// `cos 2kx(t)` sampled at `sample_rate_hz` for `duration` seconds starting at `t = 0`.
pub fn sampled_ansatz(params: &AnsatzParams, sample_rate_hz: f64, duration: f64) -> Result<Vec<f64>> {
    params.validate()?;
    let min_hz = 8.0 * params.omega_m / TWO_PI;
    if !(sample_rate_hz > min_hz) {
        return Err(Error::Aliasing { rate_hz: sample_rate_hz, min_hz });
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::invalid("duration", "must be > 0"));
    }
    let n = (duration * sample_rate_hz).round() as usize;
    Ok((0..n).map(|i| params.signal(i as f64 / sample_rate_hz)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::FftPlanner;

    fn base() -> AnsatzParams {
        AnsatzParams {
            x_d: 0.3,
            x_m: 0.2,
            omega_m: TWO_PI * 40.0,
            omega_d: TWO_PI * 3.0,
            omega_2: TWO_PI * 1.2,
            gamma_line: 0.5,
            phase_index: PhaseIndex::Integrated,
        }
    }

    #[test]
    fn pure_slow_motion_has_even_harmonics() {
        let p = AnsatzParams { x_m: 0.0, ..base() };
        let ls = line_spectrum(&p, 20).unwrap();
        for l in &ls.lines {
            assert_eq!(l.carrier, 0);
            assert_eq!(l.sideband % 2, 0, "odd line {l:?}");
        }
    }

    #[test]
    fn zero_amplitudes_give_dc_only() {
        let p = AnsatzParams { x_d: 0.0, x_m: 0.0, ..base() };
        let ls = line_spectrum(&p, 8).unwrap();
        assert_eq!(ls.lines.len(), 1);
        assert_eq!(ls.lines[0].omega, 0.0);
        assert!((ls.lines[0].amplitude.re - 1.0).abs() < 1e-15);
        let s = sampled_ansatz(&p, 2000.0, 0.1).unwrap();
        assert!(s.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn unmodulated_sidebands_equal_first_order() {
        let p = AnsatzParams { omega_2: 0.0, x_d: 0.01, x_m: 0.01, ..base() };
        let ls = line_spectrum(&p, 10).unwrap();
        let (lo, hi) = (ls.power_at(1, -1), ls.power_at(1, 1));
        assert!((lo / hi - 1.0).abs() < 1e-12);
        // first order: |c| = J_1(X_d) J_1(X_M) ≈ (X_d/2)(X_M/2)
        let first = (0.5 * p.x_m * 0.5 * p.x_d).powi(2);
        assert!((hi - first).abs() < 1e-3 * first, "{hi} vs {first}");
    }

    #[test]
    fn parseval() {
        let p = base();
        let ls = line_spectrum(&p, auto_order(&p)).unwrap();
        assert!(ls.warnings.is_empty());
        // commensurate frequencies: the mean over one common period is exact
        let fs = 4096.0;
        let s = sampled_ansatz(&p, fs, 1.0).unwrap();
        let ms = s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        assert!((ls.total_power() - ms).abs() < 1e-6, "{} vs {ms}", ls.total_power());
    }

    #[test]
    fn fft_reproduces_line_weights() {
        let p = base();
        let ls = line_spectrum(&p, auto_order(&p)).unwrap();
        let fs = 1024.0;
        let s = sampled_ansatz(&p, fs, 1.0).unwrap();
        let n = s.len();
        let mut buf: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        for l in ls.lines.iter().filter(|l| l.power() > 1e-4) {
            let f = l.omega / TWO_PI;
            let k = (-f).rem_euclid(fs).round() as usize % n;
            let fft_power = (buf[k] / n as f64).norm_sqr();
            assert!((fft_power - l.power()).abs() < 0.01 * l.power(), "line {l:?}: {fft_power}");
        }
    }

    #[test]
    fn sign_of_omega_2_mirrors_asymmetry() {
        let p = base();
        let q = AnsatzParams { omega_2: -p.omega_2, ..p };
        let a = line_spectrum(&p, 30).unwrap();
        let b = line_spectrum(&q, 30).unwrap();
        assert!((a.power_at(1, 1) - b.power_at(1, -1)).abs() < 1e-14);
        assert!((a.power_at(1, -1) - b.power_at(1, 1)).abs() < 1e-14);
        assert!(a.split_ratio() < 1.0);
    }

    #[test]
    fn cancellation_point_suppresses_upper_line() {
        let p = AnsatzParams { x_d: 0.02, x_m: 0.02, omega_2: 2.0 * base().omega_d, ..base() };
        let ls = line_spectrum(&p, 30).unwrap();
        let r = ls.split_ratio();
        let exact = crate::model::ratio_phase_modulated(p.omega_d, p.omega_2);
        assert!((r - exact).abs() < 1e-3 * exact);
        assert!(r < 0.2);
        let half = AnsatzParams { phase_index: PhaseIndex::HalfIntegrated, ..p };
        let rh = line_spectrum(&half, 30).unwrap().split_ratio();
        assert!(rh < 0.1);
    }

    #[test]
    fn aliasing_rejected() {
        assert!(matches!(sampled_ansatz(&base(), 100.0, 1.0), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn truncation_warning() {
        let p = AnsatzParams { x_d: 1.4, ..base() };
        let ls = line_spectrum(&p, 2).unwrap();
        assert!(!ls.warnings.is_empty());
    }

    #[test]
    fn convolution_preserves_power() {
        let p = AnsatzParams { gamma_line: 2.0, ..base() };
        let ls = line_spectrum(&p, auto_order(&p)).unwrap();
        let grid = crate::spectrum::uniform_grid(-3000.0, 3000.0, 600_001).unwrap();
        let s = ls.convolve(&grid, p.gamma_line).unwrap();
        // Lorentzian tails beyond the grid hold ~Γ/(π·distance) of each line
        assert!((s.integral() - ls.total_power()).abs() < 2e-3 * ls.total_power());
    }
}
