//! Truncated frequency-comb solution of the periodically modulated,
//! linearized quantum Langevin equations.
//!
//! Fourier convention `f(ω) = ∫ f(t) e^{iωt} dt`. The unknowns at comb site
//! `n ∈ [−N_h, N_h]` are `a(ω_n), a†(ω_n), b(ω_n), b†(ω_n)` with
//! `ω_n = ω + n ω_d`. A product `e^{ikω_d t} f(t)` couples site `n` to site
//! `n + k`. Each row of the system reads
//!
//! ```text
//! (κ/2 − i(ω_n+Δ)) a_n   + i Σ G_k x_{n+k}                 = √κ a_in
//! (κ/2 − i(ω_n−Δ)) a†_n  − i Σ G_k x_{n+k}                 = √κ a_in†
//! (Γ/2 − i(ω_n−ω̄)) b_n   + i Σ W_k b_{n+k}  + i Σ G_k q_{n+k} = √Γ b_in
//! (Γ/2 − i(ω_n+ω̄)) b†_n  − i Σ W_k b†_{n+k} − i Σ G_k q_{n+k} = √Γ b_in†
//! ```
//!
//! with `x = b + b†`, `q = a + a†`, `g(t) = Σ G_k e^{ikω_d t}` and
//! `ω_M(t) − ω̄ = Σ W_k e^{ikω_d t}`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{BandLu, BandMatrix};
use crate::model::{chi_o, SystemParams};
use crate::spectrum::{Quantity, SpectrumGrid, SpectrumMeta, CONVENTION_UNSYMMETRIZED};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Input-noise channels, in their order within a comb site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseChannel {
    OpticalIn,
    OpticalInDagger,
    MechIn,
    MechInDagger,
}

impl NoiseChannel {
    pub const ALL: [NoiseChannel; 4] =
        [NoiseChannel::OpticalIn, NoiseChannel::OpticalInDagger, NoiseChannel::MechIn, NoiseChannel::MechInDagger];

    pub fn slot(self) -> usize {
        self as usize
    }

    /// Occupancy factor entering `⟨A†A⟩`: `n` for annihilation channels, `n+1` for creation channels.
    pub fn occupancy(self, p: &SystemParams) -> f64 {
        match self {
            NoiseChannel::OpticalIn => p.n_opt,
            NoiseChannel::OpticalInDagger => p.n_opt + 1.0,
            NoiseChannel::MechIn => p.n_th,
            NoiseChannel::MechInDagger => p.n_th + 1.0,
        }
    }

    pub fn is_optical(self) -> bool {
        matches!(self, NoiseChannel::OpticalIn | NoiseChannel::OpticalInDagger)
    }
}

/// Output operators available from a comb solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputId {
    /// `x(ω) = b + b†`.
    X,
    /// `X±(ω) = x(ω+ω_d) − x(ω−ω_d)`.
    XPm,
    /// Intracavity quadrature `y = e^{−iθ}a + e^{iθ}a†`.
    Y,
    /// Detected output quadrature of `a_out = a_in − √κ a`.
    YOut,
}

impl OutputId {
    pub const ALL: [OutputId; 4] = [OutputId::X, OutputId::XPm, OutputId::Y, OutputId::YOut];

    pub fn name(self) -> &'static str {
        match self {
            OutputId::X => "xx",
            OutputId::XPm => "xpm",
            OutputId::Y => "yy",
            OutputId::YOut => "yout",
        }
    }
}

/// Harmonic content of the coupling and mechanical-frequency modulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    /// `(k, G_k)` with `g(t) = Σ G_k e^{ikω_d t}`.
    pub coupling: Vec<(i32, Complex64)>,
    /// `(k, W_k)` with `ω_M(t) − ω̄_M = Σ W_k e^{ikω_d t}`.
    pub frequency: Vec<(i32, Complex64)>,
}

impl Modulation {
    /// `g(t) = 2ḡ sin ω_d t`, `ω_M(t) = ω̄_M + 2ω_2 cos 2ω_d t`.
    pub fn from_params(p: &SystemParams) -> Self {
        let mut coupling = Vec::new();
        if p.g_bar != 0.0 {
            coupling.push((1, Complex64::new(0.0, -p.g_bar)));
            coupling.push((-1, Complex64::new(0.0, p.g_bar)));
        }
        let mut frequency = Vec::new();
        if p.omega_2 != 0.0 {
            frequency.push((2, Complex64::new(p.omega_2, 0.0)));
            frequency.push((-2, Complex64::new(p.omega_2, 0.0)));
        }
        Self { coupling, frequency }
    }

    /// Constant coupling `g` and no frequency modulation.
    pub fn static_coupling(g: f64) -> Self {
        Self { coupling: vec![(0, Complex64::new(g, 0.0))], frequency: Vec::new() }
    }

    /// Builds harmonics of real signals given as `(k, cos amplitude, sin amplitude)` with `k ≥ 0`.
    pub fn from_real_harmonics(coupling: &[(u32, f64, f64)], frequency: &[(u32, f64, f64)]) -> Self {
        fn expand(h: &[(u32, f64, f64)]) -> Vec<(i32, Complex64)> {
            let mut out = Vec::new();
            for &(k, c, s) in h {
                if k == 0 {
                    if c != 0.0 {
                        out.push((0, Complex64::new(c, 0.0)));
                    }
                    continue;
                }
                // c cos + s sin = ½(c − i s) e^{+ikθ} + ½(c + i s) e^{−ikθ}
                let plus = Complex64::new(0.5 * c, -0.5 * s);
                if plus.norm() != 0.0 {
                    out.push((k as i32, plus));
                    out.push((-(k as i32), plus.conj()));
                }
            }
            out
        }
        Self { coupling: expand(coupling), frequency: expand(frequency) }
    }

    pub fn max_harmonic(&self) -> usize {
        self.coupling.iter().chain(&self.frequency).map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// Both modulations must be real functions of time.
    pub fn validate(&self) -> Result<()> {
        for (name, list) in [("coupling", &self.coupling), ("frequency", &self.frequency)] {
            for &(k, c) in list.iter() {
                if !c.re.is_finite() || !c.im.is_finite() {
                    return Err(Error::invalid(name, "non-finite harmonic"));
                }
                let partner: Complex64 = list.iter().filter(|(j, _)| *j == -k).map(|(_, v)| *v).sum();
                let own: Complex64 = list.iter().filter(|(j, _)| *j == k).map(|(_, v)| *v).sum();
                if (partner - own.conj()).norm() > 1e-9 * own.norm().max(1e-300) {
                    return Err(Error::invalid(name, format!("harmonic {k} lacks its conjugate partner")));
                }
            }
        }
        Ok(())
    }
}

/// Options shared by the comb solver entry points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Comb truncation order `N_h`.
    pub truncation: usize,
    /// Local-oscillator phase θ of the detected quadrature (rad).
    pub lo_phase: f64,
    /// Estimate the condition number of every system.
    pub check_condition: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { truncation: 24, lo_phase: 0.0, check_condition: true }
    }
}

impl SolverOptions {
    pub fn with_truncation(truncation: usize) -> Self {
        Self { truncation, ..Self::default() }
    }
}

/// Assembled comb system at one base frequency.
#[derive(Debug, Clone)]
pub struct CombSystem {
    pub omega: f64,
    pub truncation: usize,
    pub matrix: BandMatrix,
    /// Input scaling per unknown: `√κ` on optical rows, `√Γ_M` on mechanical rows.
    pub source: Vec<f64>,
}

/// Position of `(site, slot)` in the unknown vector.
pub fn comb_index(truncation: usize, site: i64, slot: usize) -> usize {
    4 * (site + truncation as i64) as usize + slot
}

const A: usize = 0;
const AD: usize = 1;
const B: usize = 2;
const BD: usize = 3;

/// Comb system for the standard modulation of `p`.
pub fn build_comb_system(p: &SystemParams, omega: f64, truncation: usize) -> Result<CombSystem> {
    build_comb_system_with(p, &Modulation::from_params(p), omega, truncation)
}

pub fn build_comb_system_with(
    p: &SystemParams,
    modulation: &Modulation,
    omega: f64,
    truncation: usize,
) -> Result<CombSystem> {
    p.validate()?;
    modulation.validate()?;
    let kmax = modulation.max_harmonic();
    if truncation < 2 || truncation < kmax {
        return Err(Error::invalid("truncation", format!("need N_h >= max(2, {kmax}), got {truncation}")));
    }
    if !omega.is_finite() {
        return Err(Error::invalid("omega", "must be finite"));
    }
    let nh = truncation as i64;
    let sites = 2 * truncation + 1;
    let band = 4 * kmax + 3;
    let mut m = BandMatrix::zeros(4 * sites, band, band);
    let idx = |s: i64, f: usize| comb_index(truncation, s, f);
    for s in -nh..=nh {
        let ws = omega + s as f64 * p.omega_d;
        m.add(idx(s, A), idx(s, A), Complex64::new(p.kappa / 2.0, -(ws + p.detuning)));
        m.add(idx(s, AD), idx(s, AD), Complex64::new(p.kappa / 2.0, -(ws - p.detuning)));
        m.add(idx(s, B), idx(s, B), Complex64::new(p.gamma_m / 2.0, -(ws - p.omega_m)));
        m.add(idx(s, BD), idx(s, BD), Complex64::new(p.gamma_m / 2.0, -(ws + p.omega_m)));
        for &(k, g) in &modulation.coupling {
            let t = s + k as i64;
            if t.abs() > nh {
                continue;
            }
            for f in [B, BD] {
                m.add(idx(s, A), idx(t, f), I * g);
                m.add(idx(s, AD), idx(t, f), -I * g);
            }
            for f in [A, AD] {
                m.add(idx(s, B), idx(t, f), I * g);
                m.add(idx(s, BD), idx(t, f), -I * g);
            }
        }
        for &(k, w) in &modulation.frequency {
            let t = s + k as i64;
            if t.abs() > nh {
                continue;
            }
            m.add(idx(s, B), idx(t, B), I * w);
            m.add(idx(s, BD), idx(t, BD), -I * w);
        }
    }
    let mut source = vec![0.0; 4 * sites];
    for s in -nh..=nh {
        source[idx(s, A)] = p.kappa.sqrt();
        source[idx(s, AD)] = p.kappa.sqrt();
        source[idx(s, B)] = p.gamma_m.sqrt();
        source[idx(s, BD)] = p.gamma_m.sqrt();
    }
    Ok(CombSystem { omega, truncation, matrix: m, source })
}

/// Coefficients of one output operator with respect to every input channel
/// at every comb frequency `ω + n ω_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTransfer {
    pub output: OutputId,
    pub omega: f64,
    pub truncation: usize,
    coeffs: Vec<Complex64>,
}

impl NoiseTransfer {
    pub fn new(output: OutputId, omega: f64, truncation: usize, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), 4 * (2 * truncation + 1));
        Self { output, omega, truncation, coeffs }
    }

    /// Coefficient of `channel` evaluated at `ω + site·ω_d`; zero beyond the truncation.
    pub fn coefficient(&self, channel: NoiseChannel, site: i64) -> Complex64 {
        if site.unsigned_abs() as usize > self.truncation {
            return ZERO;
        }
        self.coeffs[comb_index(self.truncation, site, channel.slot())]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Iterator over `(channel, site, coefficient)`.
    pub fn entries(&self) -> impl Iterator<Item = (NoiseChannel, i64, Complex64)> + '_ {
        let nh = self.truncation as i64;
        (-nh..=nh).flat_map(move |s| {
            NoiseChannel::ALL.into_iter().map(move |c| (c, s, self.coeffs[comb_index(self.truncation, s, c.slot())]))
        })
    }

    /// Stationary spectral density `Σ |c|² N_c`.
    pub fn psd(&self, p: &SystemParams) -> f64 {
        self.entries().map(|(c, _, v)| v.norm_sqr() * c.occupancy(p)).sum()
    }

    /// Same as [`NoiseTransfer::psd`] restricted to the selected channels.
    pub fn psd_channels(&self, p: &SystemParams, keep: impl Fn(NoiseChannel) -> bool) -> f64 {
        self.entries().filter(|(c, _, _)| keep(*c)).map(|(c, _, v)| v.norm_sqr() * c.occupancy(p)).sum()
    }

    /// `2 Re Σ N_c conj(a_c) b_c`, the interference between two transfers.
    pub fn cross_psd(&self, other: &NoiseTransfer, p: &SystemParams) -> f64 {
        self.entries().zip(other.coeffs.iter()).map(|((c, _, a), b)| 2.0 * (a.conj() * b).re * c.occupancy(p)).sum()
    }

    fn combine(&self, other: &NoiseTransfer, sign: f64, output: OutputId) -> NoiseTransfer {
        NoiseTransfer::new(
            output,
            self.omega,
            self.truncation,
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + sign * b).collect(),
        )
    }
}

/// All output transfers at one base frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferSet {
    pub x: NoiseTransfer,
    pub x_pm: NoiseTransfer,
    pub y: NoiseTransfer,
    pub y_out: NoiseTransfer,
    /// Imprecision part of `y_out`: free input plus the bare cavity filter.
    pub imprecision: NoiseTransfer,
    /// `y_out` minus its imprecision part.
    pub backaction: NoiseTransfer,
    /// Condition estimate of the comb system, when computed.
    pub condition: Option<f64>,
}

impl TransferSet {
    pub fn get(&self, id: OutputId) -> &NoiseTransfer {
        match id {
            OutputId::X => &self.x,
            OutputId::XPm => &self.x_pm,
            OutputId::Y => &self.y,
            OutputId::YOut => &self.y_out,
        }
    }
}

/// Output coefficient maps at `ω` with default options.
pub fn solve_transfer(omega: f64, p: &SystemParams, truncation: usize) -> Result<TransferSet> {
    solve_transfer_with(omega, p, &Modulation::from_params(p), &SolverOptions::with_truncation(truncation))
}

pub fn solve_transfer_with(
    omega: f64,
    p: &SystemParams,
    modulation: &Modulation,
    opts: &SolverOptions,
) -> Result<TransferSet> {
    let sys = build_comb_system_with(p, modulation, omega, opts.truncation)?;
    let nh = opts.truncation;
    let n = sys.source.len();
    let lu: BandLu = sys.matrix.factor()?;
    let condition = if opts.check_condition { Some(lu.check_condition()?) } else { None };
    let idx = |s: i64, f: usize| comb_index(nh, s, f);
    let scaled = |row: Vec<Complex64>| -> Vec<Complex64> {
        let z = lu.left_solve(&row);
        z.iter().zip(&sys.source).map(|(v, s)| v * *s).collect()
    };

    let mut r = vec![ZERO; n];
    r[idx(0, B)] = Complex64::new(1.0, 0.0);
    r[idx(0, BD)] = Complex64::new(1.0, 0.0);
    let x = scaled(r);

    let mut r = vec![ZERO; n];
    for (s, sign) in [(1, 1.0), (-1, -1.0)] {
        r[idx(s, B)] = Complex64::new(sign, 0.0);
        r[idx(s, BD)] = Complex64::new(sign, 0.0);
    }
    let x_pm = scaled(r);

    let lo = Complex64::from_polar(1.0, -opts.lo_phase);
    let mut r = vec![ZERO; n];
    r[idx(0, A)] = lo;
    r[idx(0, AD)] = lo.conj();
    let y = scaled(r);

    let sk = p.kappa.sqrt();
    let mut y_out: Vec<Complex64> = y.iter().map(|v| -sk * v).collect();
    y_out[idx(0, A)] += lo;
    y_out[idx(0, AD)] += lo.conj();

    let mut imp = vec![ZERO; n];
    imp[idx(0, A)] = lo * (1.0 - p.kappa * chi_o(omega, p));
    imp[idx(0, AD)] = lo.conj() * (1.0 - p.kappa * chi_o(-omega, p).conj());

    let mk = |id, c| NoiseTransfer::new(id, omega, nh, c);
    let y_out = mk(OutputId::YOut, y_out);
    let imprecision = mk(OutputId::YOut, imp);
    let backaction = y_out.combine(&imprecision, -1.0, OutputId::YOut);
    Ok(TransferSet {
        x: mk(OutputId::X, x),
        x_pm: mk(OutputId::XPm, x_pm),
        y: mk(OutputId::Y, y),
        y_out,
        imprecision,
        backaction,
        condition,
    })
}

/// Point values of every spectrum at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectraPoint {
    pub xx: f64,
    pub xpm: f64,
    pub yy: f64,
    pub yout: f64,
    pub backaction: f64,
    pub imprecision: f64,
    pub cross: f64,
}

impl SpectraPoint {
    pub fn from_transfers(t: &TransferSet, p: &SystemParams) -> Self {
        Self {
            xx: t.x.psd(p),
            xpm: t.x_pm.psd(p),
            yy: t.y.psd(p),
            yout: t.y_out.psd(p),
            backaction: t.backaction.psd(p),
            imprecision: t.imprecision.psd(p),
            cross: t.imprecision.cross_psd(&t.backaction, p),
        }
    }

    pub fn get(&self, id: OutputId) -> f64 {
        match id {
            OutputId::X => self.xx,
            OutputId::XPm => self.xpm,
            OutputId::Y => self.yy,
            OutputId::YOut => self.yout,
        }
    }
}

/// Evaluates all spectra on `grid` (data-parallel over frequencies).
pub fn spectra_points(
    grid: &[f64],
    p: &SystemParams,
    modulation: &Modulation,
    opts: &SolverOptions,
) -> Result<Vec<SpectraPoint>> {
    grid.par_iter()
        .map(|&w| solve_transfer_with(w, p, modulation, opts).map(|t| SpectraPoint::from_transfers(&t, p)))
        .collect()
}

fn meta(name: &str, p: &SystemParams, opts: &SolverOptions, detected: bool) -> SpectrumMeta {
    SpectrumMeta {
        name: name.to_string(),
        units: "1/Hz".into(),
        params_hash: p.digest(),
        truncation: Some(opts.truncation),
        lo_phase: detected.then_some(opts.lo_phase),
        detection: detected.then(|| "homodyne".to_string()),
    }
}

/// Stationary spectrum of one output operator on `grid`.
pub fn psd(output: OutputId, grid: &[f64], p: &SystemParams, truncation: usize) -> Result<SpectrumGrid> {
    let opts = SolverOptions::with_truncation(truncation);
    psd_with(output, grid, p, &Modulation::from_params(p), &opts)
}

pub fn psd_with(
    output: OutputId,
    grid: &[f64],
    p: &SystemParams,
    modulation: &Modulation,
    opts: &SolverOptions,
) -> Result<SpectrumGrid> {
    let pts = spectra_points(grid, p, modulation, opts)?;
    grid_from_points(output, grid, &pts, p, opts)
}

/// Packs one output of precomputed [`SpectraPoint`]s into a spectrum.
pub fn grid_from_points(
    output: OutputId,
    grid: &[f64],
    pts: &[SpectraPoint],
    p: &SystemParams,
    opts: &SolverOptions,
) -> Result<SpectrumGrid> {
    let detected = matches!(output, OutputId::Y | OutputId::YOut);
    SpectrumGrid::new(
        grid.to_vec(),
        pts.iter().map(|s| s.get(output)).collect(),
        Quantity::Psd,
        CONVENTION_UNSYMMETRIZED,
        meta(output.name(), p, opts, detected),
    )
}

/// Split of the detected output spectrum into backaction, imprecision and interference.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub backaction: SpectrumGrid,
    pub imprecision: SpectrumGrid,
    pub cross: SpectrumGrid,
    pub total: SpectrumGrid,
}

pub fn decompose_output(grid: &[f64], p: &SystemParams, opts: &SolverOptions) -> Result<Decomposition> {
    let pts = spectra_points(grid, p, &Modulation::from_params(p), opts)?;
    decomposition_from_points(grid, &pts, p, opts)
}

pub fn decomposition_from_points(
    grid: &[f64],
    pts: &[SpectraPoint],
    p: &SystemParams,
    opts: &SolverOptions,
) -> Result<Decomposition> {
    let mk = |name: &str, q, f: &dyn Fn(&SpectraPoint) -> f64| {
        SpectrumGrid::new(
            grid.to_vec(),
            pts.iter().map(f).collect(),
            q,
            CONVENTION_UNSYMMETRIZED,
            meta(name, p, opts, true),
        )
    };
    Ok(Decomposition {
        backaction: mk("yout_backaction", Quantity::Psd, &|s| s.backaction)?,
        imprecision: mk("yout_imprecision", Quantity::Psd, &|s| s.imprecision)?,
        cross: mk("yout_cross", Quantity::CrossTerm, &|s| s.cross)?,
        total: mk("yout", Quantity::Psd, &|s| s.yout)?,
    })
}

/// Default analysis grid: `points` frequencies on `[ω̄_M − 8ω_d, ω̄_M + 8ω_d]`.
pub fn default_grid(p: &SystemParams, points: usize) -> Result<Vec<f64>> {
    crate::spectrum::uniform_grid(p.omega_m - 8.0 * p.omega_d, p.omega_m + 8.0 * p.omega_d, points)
}

/// Default grid plus its mirror image at negative frequencies.
pub fn mirrored_grid(p: &SystemParams, points: usize) -> Result<Vec<f64>> {
    let pos = default_grid(p, points)?;
    let mut all: Vec<f64> = pos.iter().rev().map(|w| -w).collect();
    all.extend(pos);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::khz;

    fn params() -> SystemParams {
        SystemParams {
            detuning: -khz(75.0),
            kappa: 2.0 * khz(130.0),
            gamma_m: 0.8,
            omega_m: khz(46.0),
            omega_d: khz(0.75),
            omega_2: 0.2 * 2.0 * khz(0.75),
            g_bar: 8500.0,
            n_th: 1e6,
            n_opt: 0.0,
        }
    }

    #[test]
    fn decoupled_limit() {
        let p = SystemParams { g_bar: 0.0, omega_2: 0.0, ..params() };
        let w = p.omega_m + 37.0;
        let t = solve_transfer(w, &p, 4).unwrap();
        let chi = crate::model::chi_m(w, p.omega_m, &p).unwrap();
        let c = t.x.coefficient(NoiseChannel::MechIn, 0);
        assert!((c - p.gamma_m.sqrt() * chi).norm() < 1e-12 * c.norm());
        assert_eq!(t.x.coefficient(NoiseChannel::OpticalIn, 0), ZERO);
        // y carries only the cavity filter of the optical input
        let cy = t.y.coefficient(NoiseChannel::OpticalIn, 0);
        assert!((cy - p.kappa.sqrt() * chi_o(w, &p)).norm() < 1e-12 * cy.norm());
        assert_eq!(t.y.coefficient(NoiseChannel::MechIn, 0), ZERO);
    }

    #[test]
    fn empty_coupling_gives_flat_shot_noise_floor() {
        let p = SystemParams { g_bar: 0.0, ..params() };
        for w in [p.omega_m - 3000.0, p.omega_m, p.omega_m + 5000.0] {
            let t = solve_transfer(w, &p, 4).unwrap();
            assert!((t.y_out.psd(&p) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_frequency_modulation_decouples_parities() {
        let p = SystemParams { omega_2: 0.0, ..params() };
        let sys = build_comb_system(&p, p.omega_m, 4).unwrap();
        for s in -4i64..=4 {
            for t in -4i64..=4 {
                if (s - t).rem_euclid(2) == 0 {
                    continue;
                }
                // mechanics at site s never couples to mechanics at a site of other parity
                for f in [B, BD] {
                    for h in [B, BD] {
                        let v = sys.matrix.get(comb_index(4, s, f), comb_index(4, t, h));
                        assert_eq!(v, ZERO);
                    }
                }
            }
        }
    }

    #[test]
    fn undamped_exact_resonance_is_singular() {
        let p = SystemParams { g_bar: 0.0, omega_2: 0.0, gamma_m: 0.0, ..params() };
        let r = solve_transfer(p.omega_m, &p, 2);
        assert!(matches!(r, Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn rejects_short_truncation() {
        assert!(build_comb_system(&params(), 0.0, 1).is_err());
    }

    #[test]
    fn decomposition_sums_exactly() {
        let p = SystemParams { gamma_m: 1e-3, n_th: 1.0, ..params() };
        let g = default_grid(&p, 64).unwrap();
        let d = decompose_output(&g, &p, &SolverOptions::default()).unwrap();
        for i in 0..g.len() {
            let s = d.backaction.values[i] + d.imprecision.values[i] + d.cross.values[i];
            assert!((s - d.total.values[i]).abs() <= 1e-12 * d.total.values[i]);
        }
    }

    #[test]
    fn real_harmonics_match_standard_modulation() {
        let p = params();
        let a = Modulation::from_params(&p);
        let b = Modulation::from_real_harmonics(&[(1, 0.0, 2.0 * p.g_bar)], &[(2, 2.0 * p.omega_2, 0.0)]);
        for (k, v) in &a.coupling {
            let w: Complex64 = b.coupling.iter().filter(|(j, _)| j == k).map(|(_, c)| *c).sum();
            assert!((w - v).norm() < 1e-9);
        }
        for (k, v) in &a.frequency {
            let w: Complex64 = b.frequency.iter().filter(|(j, _)| j == k).map(|(_, c)| *c).sum();
            assert!((w - v).norm() < 1e-9);
        }
    }

    #[test]
    fn unpaired_harmonic_rejected() {
        let m = Modulation { coupling: vec![(1, Complex64::new(0.0, 1.0))], frequency: vec![] };
        assert!(m.validate().is_err());
    }
}
