//! Nonlinear stochastic simulation of a particle in a hybrid electro-optical
//! trap coupled to a driven cavity mode.
//!
//! Equations of motion (x measured from the antinode of the occupied well,
//! Paul-trap centre at `−x_N`):
//!
//! ```text
//! ẋ = p/m
//! ṗ = −ħA|a|²k sin(2kx) − mω_T²(x + x_N) cos(ω_d t) − Γ_M p + F_th
//! ȧ = [i(Δ₀ + A cos²kx) − κ/2] a + E + √κ a_in
//! ```
//!
//! `F_th` is white with `⟨F_th F_th⟩ = 2mΓ_M k_B T δ` and `a_in` is complex
//! white noise with `⟨a_in a_in*⟩ = ½δ`. Both are c-numbers, so the model is
//! meaningful in the thermal regime. Integration uses the stochastic Heun
//! scheme with a fixed step.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::floquet::Modulation;
use crate::model::{SystemParams, TrapParams};
use crate::trajectory_io::Trajectory;
use crate::units::{bose_occupancy, HBAR, K_B, TWO_PI};

/// Time dependence of the Paul-trap force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AcDrive {
    /// `cos(ω_d t)`.
    #[default]
    Oscillating,
    /// Constant harmonic confinement at ω_T.
    Static,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSwitches {
    pub thermal: bool,
    pub shot: bool,
}

impl Default for NoiseSwitches {
    fn default() -> Self {
        Self { thermal: true, shot: true }
    }
}

fn default_discard() -> f64 {
    20.0
}

fn default_true() -> bool {
    true
}

/// Default step: 0.0056 rad of mechanical phase per step at ω_M = 2π·46 kHz.
/// The modulated trap shows a step-size frequency bias scaling as dt², about
/// 6 rad/s at this step and 24 rad/s at twice it.
pub const DEFAULT_DT: f64 = 1.953125e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub trap: TrapParams,
    #[serde(rename = "omega_d_rad_s")]
    pub omega_d: f64,
    #[serde(rename = "kappa_rad_s")]
    pub kappa: f64,
    /// Bare detuning Δ₀; the particle at an antinode pulls it to `Δ₀ + A`.
    #[serde(rename = "detuning0_rad_s")]
    pub detuning0: f64,
    /// Real drive rate E; when absent it is solved so that the cavity holds
    /// `|ᾱ|²` photons with the particle at the antinode.
    #[serde(rename = "drive_rate_sqrt_hz", default)]
    pub drive: Option<f64>,
    #[serde(rename = "gamma_m_rad_s")]
    pub gamma_m: f64,
    #[serde(rename = "t_gas_k")]
    pub t_gas: f64,
    #[serde(rename = "dt_s")]
    pub dt: f64,
    /// Length of the recorded series, after the discarded transient.
    #[serde(rename = "duration_s")]
    pub duration: f64,
    /// Integrator steps per stored sample.
    pub sample_every: u32,
    #[serde(rename = "discard_periods", default = "default_discard")]
    pub discard_periods: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseSwitches,
    #[serde(default)]
    pub ac: AcDrive,
    /// Also store the interval-averaged output field.
    #[serde(default = "default_true")]
    pub record_output: bool,
}

impl SimConfig {
    /// Configuration reproducing the linear model `p` in the trap `trap`:
    /// κ, Γ_M and the pulled detuning are copied, T_gas follows from `n_th`.
    pub fn for_system(trap: TrapParams, p: &SystemParams, duration: f64, seed: u64) -> Self {
        let omega = trap.omega_0();
        Self {
            trap,
            omega_d: p.omega_d,
            kappa: p.kappa,
            detuning0: p.detuning - trap.well_depth,
            drive: None,
            gamma_m: p.gamma_m,
            t_gas: p.n_th * HBAR * omega / K_B,
            dt: DEFAULT_DT,
            duration,
            sample_every: 128,
            discard_periods: default_discard(),
            seed,
            noise: NoiseSwitches::default(),
            ac: AcDrive::Oscillating,
            record_output: true,
        }
    }

    /// Fastest mechanical frequency scale of the configuration.
    pub fn mechanical_scale(&self) -> f64 {
        let optical = if self.trap.well_depth > 0.0 { self.trap.omega_0() } else { 0.0 };
        let paul = if self.ac == AcDrive::Off { 0.0 } else { self.trap.omega_t };
        optical.max(paul)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.trap;
        for (name, v) in [("wavelength", t.wavelength), ("mass", t.mass), ("alpha", t.alpha)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("well_depth", t.well_depth),
            ("omega_t", t.omega_t),
            ("gamma_m", self.gamma_m),
            ("t_gas", self.t_gas),
            ("discard_periods", self.discard_periods),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("kappa", self.kappa), ("omega_d", self.omega_d), ("duration", self.duration)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !self.detuning0.is_finite() {
            return Err(Error::invalid("detuning0", "must be finite"));
        }
        if let Some(e) = self.drive {
            if !(e >= 0.0) || !e.is_finite() {
                return Err(Error::invalid("drive", "must be >= 0"));
            }
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        let fastest = self.mechanical_scale().max(self.kappa);
        let limit = 0.05 * TWO_PI / fastest;
        if self.dt >= limit {
            return Err(Error::invalid(
                "dt",
                format!("{:.3e} s exceeds 0.05 of the fastest period ({limit:.3e} s)", self.dt),
            ));
        }
        if self.sample_every == 0 {
            return Err(Error::invalid("sample_every", "must be >= 1"));
        }
        if self.samples() < 2 {
            return Err(Error::invalid("duration", "shorter than two samples"));
        }
        Ok(())
    }

    pub fn sample_interval(&self) -> f64 {
        self.dt * self.sample_every as f64
    }

    pub fn samples(&self) -> usize {
        (self.duration / self.sample_interval()).floor() as usize
    }

    /// Cavity detuning with the particle at position `x`.
    pub fn detuning_at(&self, x: f64) -> f64 {
        let c = (self.trap.wavenumber() * x).cos();
        self.detuning0 + self.trap.well_depth * c * c
    }

    /// Drive rate E, solved from `|ᾱ|²` when not given.
    pub fn drive_rate(&self) -> f64 {
        self.drive.unwrap_or_else(|| self.trap.alpha * Complex64::new(0.5 * self.kappa, -self.detuning_at(0.0)).norm())
    }

    /// SHA-256 over every physics and numerics field except the seed.
    pub fn hash(&self) -> String {
        let mut c = *self;
        c.seed = 0;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Clone, Copy)]
struct State {
    x: f64,
    p: f64,
    a: Complex64,
}

struct Coefficients {
    k: f64,
    m: f64,
    force_scale: f64,
    well_depth: f64,
    omega_t_sq: f64,
    x_n: f64,
    omega_d: f64,
    gamma: f64,
    detuning0: f64,
    half_kappa: f64,
    drive: f64,
    ac: AcDrive,
}

impl Coefficients {
    fn new(c: &SimConfig) -> Self {
        let k = c.trap.wavenumber();
        Self {
            k,
            m: c.trap.mass,
            force_scale: HBAR * c.trap.well_depth * k,
            well_depth: c.trap.well_depth,
            omega_t_sq: c.trap.omega_t * c.trap.omega_t,
            x_n: c.trap.well_position(),
            omega_d: c.omega_d,
            gamma: c.gamma_m,
            detuning0: c.detuning0,
            half_kappa: 0.5 * c.kappa,
            drive: c.drive_rate(),
            ac: c.ac,
        }
    }

    #[inline]
    fn ac(&self, t: f64) -> f64 {
        match self.ac {
            AcDrive::Oscillating => (self.omega_d * t).cos(),
            AcDrive::Static => 1.0,
            AcDrive::Off => 0.0,
        }
    }

    #[inline]
    fn drift(&self, t: f64, s: &State) -> State {
        let (s2, c2) = (2.0 * self.k * s.x).sin_cos();
        let n = s.a.norm_sqr();
        let dp =
            -self.force_scale * n * s2 - self.m * self.omega_t_sq * (s.x + self.x_n) * self.ac(t) - self.gamma * s.p;
        let rot = Complex64::new(-self.half_kappa, self.detuning0 + self.well_depth * 0.5 * (1.0 + c2));
        State { x: s.p / self.m, p: dp, a: rot * s.a + self.drive }
    }

    /// Quasi-static equilibrium at time `t` for `n` photons.
    fn equilibrium(&self, t: f64, n: f64) -> f64 {
        let ac = self.ac(t);
        if self.well_depth == 0.0 {
            return if ac != 0.0 { -self.x_n } else { 0.0 };
        }
        let mut x = 0.0;
        for _ in 0..60 {
            let (s2, c2) = (2.0 * self.k * x).sin_cos();
            let f = self.force_scale * n * s2 + self.m * self.omega_t_sq * (x + self.x_n) * ac;
            let df = 2.0 * self.k * self.force_scale * n * c2 + self.m * self.omega_t_sq * ac;
            let step = f / df;
            x -= step;
            if step.abs() < 1e-18 {
                break;
            }
        }
        x
    }
}

/// Standard normal draws for one step: thermal force, Re and Im of the shot noise.
fn normals(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)]
}

/// Integrates one trajectory with the seed stored in `config`.
pub fn integrate(config: &SimConfig) -> Result<Trajectory> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial: f64 = StandardNormal.sample(&mut rng);
    integrate_with(config, config.dt, initial, |_| normals(&mut rng))
}

/// Runs one trajectory per seed in parallel. Failures are reported per seed.
pub fn integrate_ensemble(config: &SimConfig, seeds: &[u64]) -> Vec<(u64, Result<Trajectory>)> {
    seeds
        .par_iter()
        .map(|&seed| {
            let c = SimConfig { seed, ..*config };
            (seed, integrate(&c))
        })
        .collect()
}

/// Core Heun loop; `noise(step)` supplies standard normals for each step.
fn integrate_with(
    config: &SimConfig,
    dt: f64,
    initial_normal: f64,
    mut noise: impl FnMut(u64) -> [f64; 3],
) -> Result<Trajectory> {
    let co = Coefficients::new(config);
    let every = (config.sample_interval() / dt).round() as u64;
    let samples = config.samples();
    let period = TWO_PI / config.omega_d;
    let discard_steps = ((config.discard_periods * period / dt / every as f64).ceil() as u64) * every;
    let total_steps = discard_steps + samples as u64 * every;

    let thermal = if config.noise.thermal { (2.0 * co.m * co.gamma * K_B * config.t_gas * dt).sqrt() } else { 0.0 };
    let shot = if config.noise.shot { 0.5 * dt.sqrt() } else { 0.0 };
    let sqrt_kappa = config.kappa.sqrt();

    let n0 = config.trap.alpha * config.trap.alpha;
    let x0 = co.equilibrium(0.0, n0);
    let p0 = if config.noise.thermal { (co.m * K_B * config.t_gas).sqrt() * initial_normal } else { 0.0 };
    let a0 = co.drive / Complex64::new(co.half_kappa, -config.detuning_at(x0));
    let mut s = State { x: x0, p: p0, a: a0 };

    let record_out = config.record_output;
    let mut xs = Vec::with_capacity(samples);
    let mut ps = Vec::with_capacity(samples);
    let mut as_ = Vec::with_capacity(samples);
    let mut outs = Vec::with_capacity(if record_out { samples } else { 0 });
    let mut out_acc = Complex64::new(0.0, 0.0);

    for step in 0..total_steps {
        let t = step as f64 * dt;
        let z = noise(step);
        let dw_p = thermal * z[0];
        let dw_a = Complex64::new(shot * z[1], shot * z[2]);
        let f0 = co.drift(t, &s);
        let pred = State { x: s.x + f0.x * dt, p: s.p + f0.p * dt + dw_p, a: s.a + f0.a * dt + sqrt_kappa * dw_a };
        let f1 = co.drift(t + dt, &pred);
        let a_old = s.a;
        s = State {
            x: s.x + 0.5 * (f0.x + f1.x) * dt,
            p: s.p + 0.5 * (f0.p + f1.p) * dt + dw_p,
            a: s.a + 0.5 * (f0.a + f1.a) * dt + sqrt_kappa * dw_a,
        };
        // ∫(a_in − √κ a) dt with the trapezoidal rule for the smooth part
        out_acc += dw_a - sqrt_kappa * 0.5 * (a_old + s.a) * dt;
        if (step + 1) % every == 0 {
            if !(s.x.is_finite() && s.p.is_finite() && s.a.re.is_finite() && s.a.im.is_finite()) {
                return Err(Error::Divergence {
                    step: step + 1,
                    time: (step + 1) as f64 * dt,
                    detail: format!("non-finite state x={}, p={}, a={}", s.x, s.p, s.a),
                });
            }
            if step + 1 > discard_steps {
                xs.push(s.x);
                ps.push(s.p);
                as_.push(s.a);
                if record_out {
                    outs.push(out_acc / config.sample_interval());
                }
            }
            out_acc = Complex64::new(0.0, 0.0);
        }
    }
    Ok(Trajectory {
        seed: config.seed,
        dt,
        sample_interval: config.sample_interval(),
        t0: (discard_steps + every) as f64 * dt,
        x: xs,
        p: ps,
        a: as_,
        a_out: record_out.then_some(outs),
        config_hash: config.hash(),
    })
}

/// Phase of the mean intracavity field.
pub fn mean_field_phase(traj: &Trajectory) -> f64 {
    let mean: Complex64 = traj.a.iter().sum::<Complex64>() / traj.len() as f64;
    mean.arg()
}

fn mean_field(traj: &Trajectory) -> Complex64 {
    traj.a.iter().sum::<Complex64>() / traj.len().max(1) as f64
}

/// Intracavity quadrature `e^{−iθ}δã + c.c.` of the fluctuation `δã`
/// measured in the frame of the mean field.
pub fn intracavity_quadrature(traj: &Trajectory, theta: f64) -> Vec<f64> {
    let mean = mean_field(traj);
    let rot = Complex64::from_polar(1.0, -(mean.arg() + theta));
    traj.a.iter().map(|&a| 2.0 * (rot * (a - mean)).re).collect()
}

/// θ-quadrature of the fluctuating part of `a_out = a_in − √κ a`, each
/// sample averaged over its sample interval. `config` must be the one that
/// produced `traj`.
pub fn cavity_output_quadrature(traj: &Trajectory, config: &SimConfig, theta: f64) -> Result<Vec<f64>> {
    let Some(out) = &traj.a_out else {
        return Err(Error::InsufficientData("the output field was not recorded".into()));
    };
    if traj.config_hash != config.hash() {
        return Err(Error::invalid("config", "does not match the trajectory's configuration hash"));
    }
    let mean: Complex64 = out.iter().sum::<Complex64>() / out.len().max(1) as f64;
    // same frame as the intracavity quadrature: the output mean is −√κ ā
    let rot = Complex64::from_polar(1.0, -(mean_field(traj).arg() + theta));
    Ok(out.iter().map(|&a| 2.0 * (rot * (a - mean)).re).collect())
}

/// Position in units of the zero-point amplitude at `omega_m`, `x/x_zpf`.
pub fn position_in_zpf(traj: &Trajectory, trap: &TrapParams, omega_m: f64) -> Vec<f64> {
    let z = trap.x_zpf(omega_m);
    let mean = traj.x.iter().sum::<f64>() / traj.len().max(1) as f64;
    traj.x.iter().map(|&x| (x - mean) / z).collect()
}

/// Value with a standard error from block-to-block scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// Effective linear-model parameters measured on a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergentParams {
    /// Amplitude of `2k x_0(t)` at ω_d.
    pub x_d: Estimate,
    pub omega_m: Estimate,
    /// Signed so that `ω_M(t) = ω̄_M + 2ω_2 cos 2(ω_d t + φ)` when `g(t) = 2ḡ sin(ω_d t + φ)`.
    pub omega_2: Estimate,
    pub g_bar: Estimate,
    pub photon_number: Estimate,
    /// Mean pulled detuning `Δ₀ + A⟨cos²kx_0⟩`.
    pub detuning: f64,
    /// `(k, cos, sin)` harmonics of `g(t)` in the simulation's time origin.
    pub coupling_harmonics: Vec<(u32, f64, f64)>,
    /// `(k, cos, sin)` harmonics of `ω_M(t) − ω̄_M`.
    pub frequency_harmonics: Vec<(u32, f64, f64)>,
    pub system: SystemParams,
}

impl EmergentParams {
    /// Full harmonic content for the comb solver.
    pub fn modulation(&self) -> Modulation {
        Modulation::from_real_harmonics(&self.coupling_harmonics, &self.frequency_harmonics)
    }
}

const LOCKIN_HARMONICS: usize = 6;
const RECON_POINTS: usize = 512;
const BLOCKS: usize = 5;
/// Minimum number of modulation periods accepted by [`extract_emergent_params`].
pub const MIN_PERIODS: usize = 50;

struct BlockEstimate {
    x_d: f64,
    omega_m: f64,
    omega_2: f64,
    g_bar: f64,
    photons: f64,
    detuning: f64,
    coupling: Vec<(u32, f64, f64)>,
    frequency: Vec<(u32, f64, f64)>,
}

fn lockin(series: impl Iterator<Item = (f64, f64)>, omega_d: f64) -> Vec<Complex64> {
    let mut acc = vec![Complex64::new(0.0, 0.0); LOCKIN_HARMONICS + 1];
    let mut n = 0usize;
    for (t, v) in series {
        let base = Complex64::from_polar(1.0, -omega_d * t);
        let mut ph = Complex64::new(1.0, 0.0);
        for c in acc.iter_mut() {
            *c += v * ph;
            ph *= base;
        }
        n += 1;
    }
    acc.iter().map(|c| c / n as f64).collect()
}

fn reconstruct(h: &[Complex64], tau: f64) -> f64 {
    let mut v = h[0].re;
    for (k, c) in h.iter().enumerate().skip(1) {
        v += 2.0 * (c * Complex64::from_polar(1.0, k as f64 * tau)).re;
    }
    v
}

fn real_harmonics(values: &[f64]) -> Vec<(u32, f64, f64)> {
    let n = values.len() as f64;
    (0..=LOCKIN_HARMONICS)
        .map(|k| {
            let (mut c, mut s) = (0.0, 0.0);
            for (j, v) in values.iter().enumerate() {
                let (sn, cs) = (k as f64 * TWO_PI * j as f64 / n).sin_cos();
                c += v * cs;
                s += v * sn;
            }
            let scale = if k == 0 { 1.0 / n } else { 2.0 / n };
            (k as u32, c * scale, s * scale)
        })
        .collect()
}

fn block_estimate(traj: &Trajectory, config: &SimConfig, range: std::ops::Range<usize>) -> BlockEstimate {
    let wd = config.omega_d;
    let trap = &config.trap;
    let k = trap.wavenumber();
    let xh = lockin(range.clone().map(|i| (traj.time(i), traj.x[i])), wd);
    let nh = lockin(range.map(|i| (traj.time(i), traj.a[i].norm_sqr())), wd);
    let co = Coefficients::new(config);
    let stiffness = 2.0 * HBAR * k * k * trap.well_depth / trap.mass;
    let taus: Vec<f64> = (0..RECON_POINTS).map(|j| TWO_PI * j as f64 / RECON_POINTS as f64).collect();
    let xs: Vec<f64> = taus.iter().map(|&t| reconstruct(&xh, t)).collect();
    let ns: Vec<f64> = taus.iter().map(|&t| reconstruct(&nh, t).max(0.0)).collect();
    let omega_sq: Vec<f64> = taus
        .iter()
        .zip(xs.iter().zip(&ns))
        .map(|(&tau, (&x, &n))| stiffness * n * (2.0 * k * x).cos() + co.omega_t_sq * co.ac(tau / wd))
        .collect();
    let omega: Vec<f64> = omega_sq.iter().map(|w| w.max(0.0).sqrt()).collect();
    let omega_bar = omega.iter().sum::<f64>() / omega.len() as f64;
    let zpf = if omega_bar > 0.0 { trap.x_zpf(omega_bar) } else { 0.0 };
    let g: Vec<f64> =
        xs.iter().zip(&ns).map(|(&x, &n)| k * trap.well_depth * zpf * n.sqrt() * (2.0 * k * x).sin()).collect();
    let gh = real_harmonics(&g);
    let mut wh = real_harmonics(&omega);
    wh[0].1 = 0.0;
    let (_, c1, s1) = gh[1];
    let phi = c1.atan2(s1);
    let (_, c2, s2) = wh[2];
    let omega_2 = 0.5 * (c2 * (2.0 * phi).cos() - s2 * (2.0 * phi).sin());
    let detuning = xs.iter().map(|&x| config.detuning_at(x)).sum::<f64>() / xs.len() as f64;
    BlockEstimate {
        x_d: 2.0 * k * 2.0 * xh[1].norm(),
        omega_m: omega_bar,
        omega_2,
        g_bar: 0.5 * c1.hypot(s1),
        photons: nh[0].re,
        detuning,
        coupling: gh,
        frequency: wh.into_iter().skip(1).collect(),
    }
}

/// Measures X_d, ω̄_M, ω_2 and ḡ from the slow motion and photon number:
/// both are demodulated at the harmonics of ω_d, and the quasi-static
/// curvature and coupling of the well are evaluated along one period.
pub fn extract_emergent_params(traj: &Trajectory, config: &SimConfig) -> Result<EmergentParams> {
    let per_period = TWO_PI / config.omega_d / traj.sample_interval;
    let periods = (traj.len() as f64 / per_period).floor() as usize;
    if periods < MIN_PERIODS {
        return Err(Error::InsufficientData(format!("{periods} modulation periods recorded, need {MIN_PERIODS}")));
    }
    let span =
        |p0: usize, p1: usize| (p0 as f64 * per_period).round() as usize..(p1 as f64 * per_period).round() as usize;
    let full = block_estimate(traj, config, span(0, periods));
    let per_block = periods / BLOCKS;
    let blocks: Vec<BlockEstimate> =
        (0..BLOCKS).map(|b| block_estimate(traj, config, span(b * per_block, (b + 1) * per_block))).collect();
    let est = |value: f64, f: fn(&BlockEstimate) -> f64| {
        let vals: Vec<f64> = blocks.iter().map(f).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        Estimate { value, std_err: (var / vals.len() as f64).sqrt() }
    };
    let system = SystemParams {
        detuning: full.detuning,
        kappa: config.kappa,
        gamma_m: config.gamma_m,
        omega_m: full.omega_m,
        omega_d: config.omega_d,
        omega_2: full.omega_2.max(0.0),
        g_bar: full.g_bar,
        n_th: if config.noise.thermal { bose_occupancy(full.omega_m, config.t_gas) } else { 0.0 },
        n_opt: 0.0,
    };
    Ok(EmergentParams {
        x_d: est(full.x_d, |b| b.x_d),
        omega_m: est(full.omega_m, |b| b.omega_m),
        omega_2: est(full.omega_2, |b| b.omega_2),
        g_bar: est(full.g_bar, |b| b.g_bar),
        photon_number: est(full.photons, |b| b.photons),
        detuning: full.detuning,
        coupling_harmonics: full.coupling,
        frequency_harmonics: full.frequency,
        system,
    })
}

/// Seed-averaged emergent model: parameters and harmonics averaged over seeds.
pub fn average_emergent(list: &[EmergentParams]) -> Result<(SystemParams, Modulation)> {
    let Some(first) = list.first() else {
        return Err(Error::InsufficientData("no emergent parameters to average".into()));
    };
    let n = list.len() as f64;
    let mean = |f: fn(&EmergentParams) -> f64| list.iter().map(f).sum::<f64>() / n;
    let p = SystemParams {
        omega_m: mean(|e| e.system.omega_m),
        omega_2: mean(|e| e.system.omega_2),
        g_bar: mean(|e| e.system.g_bar),
        detuning: mean(|e| e.system.detuning),
        ..first.system
    };
    let avg = |pick: fn(&EmergentParams) -> &Vec<(u32, f64, f64)>| -> Vec<(u32, f64, f64)> {
        pick(first)
            .iter()
            .enumerate()
            .map(|(i, &(k, _, _))| {
                let c = list.iter().map(|e| pick(e)[i].1).sum::<f64>() / n;
                let s = list.iter().map(|e| pick(e)[i].2).sum::<f64>() / n;
                (k, c, s)
            })
            .collect()
    };
    let coupling = avg(|e| &e.coupling_harmonics);
    let frequency = avg(|e| &e.frequency_harmonics);
    Ok((p, Modulation::from_real_harmonics(&coupling, &frequency)))
}
