//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Set `ACCEPTANCE_ONLY=3,7` to
//! run a subset. The process exits non-zero if any selected criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use splitband::config::preset;
use splitband::fast_cavity::{auto_order, line_spectrum};
use splitband::floquet::{
    decompose_output, default_grid, mirrored_grid, psd, psd_with, Modulation, OutputId, SolverOptions,
};
use splitband::langevin::{
    average_emergent, extract_emergent_params, integrate, intracavity_quadrature, AcDrive, NoiseSwitches, SimConfig,
};
use splitband::model::{chi_o, eta, n_backaction, ratio_prediction, SystemParams, TrapParams};
use splitband::presets::{levitated_trap, quantum_system, thermal_base, thermal_system, twin_peaks, ThermalSet};
use splitband::spectral::{
    find_split_peaks, fit_split_peaks, sideband_occupancy, stokes_antistokes, welch_expectation, welch_psd,
    Calibration, Floor, PeakFitOptions, SplitPeaks, WelchOptions,
};
use splitband::spectrum::{uniform_grid, SpectrumGrid};
use splitband::units::{bose_occupancy, khz, K_B, TWO_PI};

type Check = Result<(bool, String), String>;

const TRUNCATION: usize = 24;

fn fits(spec: &SpectrumGrid, p: &SystemParams) -> Result<SplitPeaks, String> {
    fit_split_peaks(spec, p.omega_m, p.omega_d, &PeakFitOptions::default()).map_err(|e| e.to_string())
}

/// Grid over `ω̄_M ± 2.5ω_d` with spacing `step`.
fn local_grid(p: &SystemParams, step: f64) -> Vec<f64> {
    let half = 2.5 * p.omega_d;
    let n = (2.0 * half / step).ceil() as usize + 1;
    uniform_grid(p.omega_m - half, p.omega_m + half, n).expect("valid grid")
}

fn spectrum(id: OutputId, grid: &[f64], p: &SystemParams) -> Result<SpectrumGrid, String> {
    psd(id, grid, p, TRUNCATION).map_err(|e| e.to_string())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ratio_law() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, expected) in [(0.05, 0.8185), (0.2, 0.4444), (0.5, 0.1111), (0.9, f64::NAN)] {
        let base = thermal_base();
        let p = SystemParams { omega_2: m * 2.0 * base.omega_d, g_bar: 5000.0, ..base };
        let r = fits(&spectrum(OutputId::Y, &local_grid(&p, 5.0), &p)?, &p)?.r_raw;
        let pass = if expected.is_nan() { r < 0.05 } else { rel(r, expected) < 0.10 };
        ok &= pass;
        let target = if expected.is_nan() { "< 0.05".to_string() } else { format!("{expected} ± 10%") };
        parts.push(format!("{m}: r={r:.4} (want {target}, closed form {:.4})", ratio_prediction(p.omega_d, p.omega_2)));
    }
    Ok((ok, parts.join("; ")))
}

fn twin_peaks_limit() -> Check {
    let p = twin_peaks();
    let s = spectrum(OutputId::Y, &local_grid(&p, 1.0), &p)?;
    let f = fits(&s, &p)?;
    let dl = f.lower.position - (p.omega_m - p.omega_d);
    let du = f.upper.position - (p.omega_m + p.omega_d);
    let placed = dl.abs() < 0.01 * p.omega_d && du.abs() < 0.01 * p.omega_d;
    let ok = (f.r_raw - 1.0).abs() < 0.01 && placed;
    Ok((ok, format!("r={:.5} (want 1 ± 1%), peak offsets {dl:.2}, {du:.2} rad/s from ω̄_M∓ω_d", f.r_raw)))
}

fn gamma_invariance() -> Check {
    let base = thermal_system(ThermalSet::Ii);
    let mut rs = Vec::new();
    for gamma in [2e-5, 2e-3, 2e-1, 2e1, 2e3] {
        let p = SystemParams { gamma_m: gamma, ..base };
        let s = spectrum(OutputId::XPm, &default_grid(&p, 4096).map_err(|e| e.to_string())?, &p)?;
        rs.push((gamma, fits(&s, &p)?.r_raw));
    }
    let lo = rs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = rs.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let spread = hi / lo - 1.0;
    let listing: Vec<String> = rs.iter().map(|(g, r)| format!("{g:e}:{r:.4}")).collect();
    Ok((spread < 0.02, format!("max/min−1 = {:.3}% (want < 2%), r_X± by Γ_M {}", 100.0 * spread, listing.join(" "))))
}

/// Ensemble-averaged Welch PSD of the intracavity quadrature against the
/// comb-solver spectrum of the seed-averaged emergent model, both seen
/// through the same Welch kernel.
fn stochastic_set(name: &str) -> Result<(bool, String), String> {
    let cfg = preset(name).ok_or("missing preset")?;
    let section = cfg.simulation.ok_or("preset has no simulation section")?;
    let sim = section.sim_config(&cfg.system, 0);
    let welch = WelchOptions::new(section.welch_segment);
    let seeds: Vec<u64> = (1..=8).collect();
    let mut acc: Option<SpectrumGrid> = None;
    let mut emergent = Vec::new();
    let mut fs = 0.0;
    for &seed in &seeds {
        let c = SimConfig { seed, ..sim };
        let tr = integrate(&c).map_err(|e| format!("seed {seed}: {e}"))?;
        fs = tr.sample_rate();
        let s = welch_psd(&intracavity_quadrature(&tr, 0.0), fs, &welch).map_err(|e| e.to_string())?;
        match acc.as_mut() {
            None => acc = Some(s),
            Some(a) => a.values.iter_mut().zip(&s.values).for_each(|(v, w)| *v += w),
        }
        emergent.push(extract_emergent_params(&tr, &c).map_err(|e| format!("seed {seed}: {e}"))?);
    }
    let mut sim_psd = acc.expect("eight seeds");
    sim_psd.values.iter_mut().for_each(|v| *v /= seeds.len() as f64);
    let bin = sim_psd.omega[1] - sim_psd.omega[0];

    let (ep, modulation) = average_emergent(&emergent).map_err(|e| e.to_string())?;
    let width = ep.gamma_m + 4.0 * ep.g_bar * ep.g_bar * eta(ep.omega_m, &ep).re.max(0.0);
    let step = (bin / 4.0).min(width / 8.0);
    let (lo, hi) = (ep.omega_m - 4.0 * ep.omega_d, ep.omega_m + 4.0 * ep.omega_d);
    let fine = uniform_grid(lo, hi, ((hi - lo) / step).ceil() as usize + 1).map_err(|e| e.to_string())?;
    let an = psd_with(OutputId::Y, &fine, &ep, &modulation, &SolverOptions::with_truncation(TRUNCATION))
        .map_err(|e| e.to_string())?;
    let targets = sim_psd.window(ep.omega_m - 3.0 * ep.omega_d, ep.omega_m + 3.0 * ep.omega_d);
    let expected = welch_expectation(&an, &targets.omega, fs, &welch).map_err(|e| e.to_string())?;

    let fo = PeakFitOptions::default();
    let guide = fit_split_peaks(&expected, ep.omega_m, ep.omega_d, &fo).map_err(|e| e.to_string())?;
    let center = 0.5 * (guide.lower.position + guide.upper.position);
    let e = fit_split_peaks(&expected, center, ep.omega_d, &fo).map_err(|e| e.to_string())?;
    let s = fit_split_peaks(&sim_psd, center, ep.omega_d, &fo).map_err(|e| e.to_string())?;

    let dl = s.lower.position - e.lower.position;
    let du = s.upper.position - e.upper.position;
    let hl = s.lower.height / e.lower.height - 1.0;
    let hu = s.upper.height / e.upper.height - 1.0;
    let dr = s.r_raw / e.r_raw - 1.0;
    let ok = dl.abs() <= bin && du.abs() <= bin && hl.abs() < 0.2 && hu.abs() < 0.2 && dr.abs() < 0.2;
    Ok((
        ok,
        format!(
            "{name}: offsets {dl:+.1}/{du:+.1} rad/s (bin {bin:.1}), heights {:+.1}%/{:+.1}%, r {:.4} vs {:.4}",
            100.0 * hl,
            100.0 * hu,
            s.r_raw,
            e.r_raw
        ),
    ))
}

fn stochastic_cross_validation() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["fig2_i", "fig2_ii", "fig2_iii"] {
        match stochastic_set(name) {
            Ok((pass, msg)) => {
                ok &= pass;
                parts.push(msg);
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: error {e}"));
            }
        }
    }
    Ok((ok, parts.join("; ")))
}

fn fast_cavity_agreement() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["fig2_i", "fig2_ii", "fig2_iii", "fig2_iv"] {
        let cfg = preset(name).ok_or("missing preset")?;
        let p = cfg.system;
        let ansatz = cfg.fast_cavity.ok_or("preset has no fast-cavity section")?.ansatz(&p);
        let lines = line_spectrum(&ansatz, auto_order(&ansatz)).map_err(|e| e.to_string())?;
        let r_fc = lines.split_ratio();
        let r_comb = fits(&spectrum(OutputId::Y, &local_grid(&p, 10.0), &p)?, &p)?.r_raw;
        let d = r_fc / r_comb - 1.0;
        ok &= d.abs() < 0.25;
        parts.push(format!("{name}: {r_fc:.4} vs {r_comb:.4} ({:+.1}%)", 100.0 * d));
    }
    Ok((ok, format!("{} (want within 25%)", parts.join("; "))))
}

fn quantum_reshaping() -> Check {
    let n_th = bose_occupancy(khz(46.0), 300.0);
    // thermal reference: Γ_M n_th dominates the optical heating by orders of magnitude
    let thermal = quantum_system(1.0, n_th);
    let cold = quantum_system(0.0, n_th);
    let opts = SolverOptions::with_truncation(TRUNCATION);
    let grid = default_grid(&cold, 4096).map_err(|e| e.to_string())?;
    // shot-noise imprecision floor of the detected quadrature
    let floor = 2.0 * cold.n_opt + 1.0;
    let above_floor = PeakFitOptions { floor: Floor::Fixed(floor), ..PeakFitOptions::default() };
    let yout_fit = |p: &SystemParams| -> Result<SplitPeaks, String> {
        fit_split_peaks(&spectrum(OutputId::YOut, &grid, p)?, p.omega_m, p.omega_d, &above_floor)
            .map_err(|e| e.to_string())
    };
    let xpm = |p: &SystemParams| -> Result<f64, String> { Ok(fits(&spectrum(OutputId::XPm, &grid, p)?, p)?.r_raw) };

    let xpm_t = xpm(&thermal)?;
    let xpm_c = xpm(&cold)?;
    let a = xpm_c / xpm_t - 1.0;

    // the Lorentzian pair stops describing S_yout once the upper line turns
    // into a squeezing dip, so (b) uses the smallest Γ_M on the ladder that still fits
    let thermal_yout = yout_fit(&thermal)?;
    let mut ladder = Vec::new();
    for g in [1e-4, 1e-5, 1e-6, 0.0] {
        ladder.push((g, yout_fit(&SystemParams { gamma_m: g, ..cold })));
    }
    let (g_b, last) = ladder
        .iter()
        .rev()
        .find_map(|(g, f)| f.as_ref().ok().map(|f| (*g, f.r_floor)))
        .ok_or("no floor-referenced fit converged")?;
    let b = last / thermal_yout.r_floor - 1.0;
    let ladder_text: Vec<String> = ladder
        .iter()
        .map(|(g, f)| match f {
            Ok(f) => format!("{g:e}:{:.4}", f.r_floor),
            Err(e) => format!("{g:e}:{e}"),
        })
        .collect();

    let dec = decompose_output(&grid, &cold, &opts).map_err(|e| e.to_string())?;
    let at = |s: &SpectrumGrid, w: f64| s.interpolate(w).unwrap_or(f64::NAN);
    let (wl, wu) = (thermal_yout.lower.position, thermal_yout.upper.position);
    let cross_u = at(&dec.cross, wu) / at(&dec.backaction, wu);
    let cross_l = at(&dec.cross, wl) / at(&dec.backaction, wl);
    let c = cross_u < 0.0 && cross_u < cross_l;

    // calibrate the floor-subtracted S_yout sideband against the thermal
    // reference, whose occupancy is the positive-frequency weight of S_xx
    let band = (cold.omega_m - 3.0 * cold.omega_d, cold.omega_m + 3.0 * cold.omega_d);
    let mgrid = mirrored_grid(&thermal, 4096).map_err(|e| e.to_string())?;
    let n_ref = stokes_antistokes(&spectrum(OutputId::X, &mgrid, &thermal)?, 0.0).map_err(|e| e.to_string())?.positive;
    let cal = Calibration::from_reference(&spectrum(OutputId::YOut, &grid, &thermal)?, floor, n_ref, band)
        .map_err(|e| e.to_string())?;
    let n_ph = sideband_occupancy(&dec.total, floor, &cal).map_err(|e| e.to_string())?;
    let n_ba = n_backaction(&cold);
    let d = n_ph / n_ba - 1.0;

    let verdicts = [a.abs() < 0.02, b.abs() > 0.10, c, d.abs() < 0.30];
    let tag = |v: bool| if v { "ok" } else { "FAIL" };
    Ok((
        verdicts.iter().all(|&v| v),
        format!(
            "(a) r_X± {xpm_t:.4}→{xpm_c:.4} at Γ_M=0 ({:+.2}%, want <2%) {}; (b) floor-referenced r_yout {:.4}→{last:.4} at Γ_M={g_b:e} ({:+.1}%, want >10%) {} [ladder {}]; (c) cross/backaction at Γ_M=0: upper {cross_u:+.3}, lower {cross_l:+.3} {}; (d) n_ph={n_ph:.4} vs n_BA={n_ba:.4} at Γ_M=0 ({:+.1}%, want within 30%) {}",
            100.0 * a,
            tag(verdicts[0]),
            thermal_yout.r_floor,
            100.0 * b,
            tag(verdicts[1]),
            ladder_text.join(" "),
            tag(verdicts[2]),
            100.0 * d,
            tag(verdicts[3])
        ),
    ))
}

/// Static-coupling S_yy written out from the linear Langevin equations.
fn static_syy(w: f64, p: &SystemParams, g: f64) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    let chi_mech = |w: f64| 1.0 / (-i * (w - p.omega_m) + p.gamma_m / 2.0);
    let eta_m = chi_mech(w) - chi_mech(-w).conj();
    let e = eta(w, p);
    let d = 1.0 + g * g * e * eta_m;
    let optical = p.kappa * (chi_o(w, p).norm_sqr() * p.n_opt + chi_o(-w, p).norm_sqr() * (p.n_opt + 1.0));
    let mech =
        g * g * e.norm_sqr() * p.gamma_m * (chi_mech(w).norm_sqr() * p.n_th + chi_mech(-w).norm_sqr() * (p.n_th + 1.0));
    (optical + mech) / d.norm_sqr()
}

fn harmonic_trap_run() -> Result<(SimConfig, splitband::trajectory_io::Trajectory), String> {
    let trap = TrapParams { well_depth: 0.0, omega_t: TWO_PI * 1000.0, well_index: 0, ..levitated_trap(0) };
    let c = SimConfig {
        trap,
        omega_d: TWO_PI * 100.0,
        kappa: 1e5,
        detuning0: 0.0,
        drive: Some(0.0),
        gamma_m: 600.0,
        t_gas: 300.0,
        dt: 2e-6,
        duration: 40.0,
        sample_every: 4,
        discard_periods: 0.0,
        seed: 21,
        noise: NoiseSwitches { thermal: true, shot: false },
        ac: AcDrive::Static,
        record_output: false,
    };
    let tr = integrate(&c).map_err(|e| e.to_string())?;
    Ok((c, tr))
}

fn self_consistency() -> Check {
    let mut worst_static = 0.0f64;
    for p in [
        SystemParams { omega_2: 0.0, ..thermal_base() },
        SystemParams { omega_2: 0.0, gamma_m: 50.0, ..quantum_system(1.0, 3.0) },
    ] {
        let g = 8500.0;
        let grid =
            uniform_grid(p.omega_m - 6.0 * p.omega_d, p.omega_m + 6.0 * p.omega_d, 2001).map_err(|e| e.to_string())?;
        let mut mirrored: Vec<f64> = grid.iter().rev().map(|w| -w).collect();
        mirrored.extend(&grid);
        let s = psd_with(
            OutputId::Y,
            &mirrored,
            &p,
            &Modulation::static_coupling(g),
            &SolverOptions::with_truncation(TRUNCATION),
        )
        .map_err(|e| e.to_string())?;
        for (w, v) in s.omega.iter().zip(&s.values) {
            worst_static = worst_static.max(rel(*v, static_syy(*w, &p, g)));
        }
    }

    let mut worst_trunc = 0.0f64;
    let sets = [
        thermal_system(ThermalSet::I),
        thermal_system(ThermalSet::Ii),
        thermal_system(ThermalSet::Iii),
        thermal_system(ThermalSet::Iv),
        quantum_system(0.0, bose_occupancy(khz(46.0), 300.0)),
        twin_peaks(),
    ];
    for p in &sets {
        let grid = mirrored_grid(p, 256).map_err(|e| e.to_string())?;
        for id in OutputId::ALL {
            let a = psd(id, &grid, p, TRUNCATION).map_err(|e| e.to_string())?;
            let b = psd(id, &grid, p, TRUNCATION + 2).map_err(|e| e.to_string())?;
            for (x, y) in a.values.iter().zip(&b.values) {
                worst_trunc = worst_trunc.max(rel(*x, *y));
            }
        }
    }

    let (c, tr) = harmonic_trap_run()?;
    let n = tr.len() as f64;
    let mean = tr.x.iter().sum::<f64>() / n;
    let var = tr.x.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let msq = tr.x.iter().map(|x| x * x).sum::<f64>() / n;
    let kt = K_B * c.t_gas / (c.trap.mass * c.trap.omega_t * c.trap.omega_t);
    let equip = msq / kt - 1.0;
    let centered: Vec<f64> = tr.x.iter().map(|x| x - mean).collect();
    let welch = welch_psd(&centered, tr.sample_rate(), &WelchOptions::new(4096)).map_err(|e| e.to_string())?;
    let parseval = welch.integral() / var - 1.0;

    let verdicts = [worst_static < 1e-8, worst_trunc < 1e-4, parseval.abs() < 0.01, equip.abs() < 0.03];
    Ok((
        verdicts.iter().all(|&v| v),
        format!(
            "static limit max rel {worst_static:.2e} (want <1e-8); N_h 24→26 max rel {worst_trunc:.2e} (want <1e-4); Welch Parseval {:+.3}% (want <1%); equipartition {:+.2}% (want <3%)",
            100.0 * parseval,
            100.0 * equip
        ),
    ))
}

fn stokes_asymmetry() -> Check {
    let classical = thermal_system(ThermalSet::I);
    let s = spectrum(OutputId::XPm, &mirrored_grid(&classical, 4096).map_err(|e| e.to_string())?, &classical)?;
    let cl = stokes_antistokes(&s, 0.0).map_err(|e| e.to_string())?.ratio;

    let cold = quantum_system(0.0, 0.0);
    let s = spectrum(OutputId::XPm, &mirrored_grid(&cold, 4096).map_err(|e| e.to_string())?, &cold)?;
    let rep =
        find_split_peaks(&s, cold.omega_m, cold.omega_d, &PeakFitOptions::default()).map_err(|e| e.to_string())?;
    let q = rep.stokes.ok_or("no Stokes report on a mirrored grid")?.ratio;
    let r = rep.r_raw();
    let ok = (cl - 1.0).abs() < 0.02 && q < 1.0 && r < 1.0;
    Ok((
        ok,
        format!("classical ratio {cl:.5} (want 1 ± 2%); n_th=0: Stokes ratio {q:.4} (want < 1) with split ratio r={r:.4} (want < 1) on the same S_X±X±"),
    ))
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(u32, &str, fn() -> Check); 8] = [
        (1, "ratio law", ratio_law),
        (2, "twin peaks", twin_peaks_limit),
        (3, "Γ_M invariance", gamma_invariance),
        (4, "analytic vs stochastic", stochastic_cross_validation),
        (5, "fast cavity", fast_cavity_agreement),
        (6, "quantum reshaping", quantum_reshaping),
        (7, "self-consistency", self_consistency),
        (8, "Stokes/anti-Stokes", stokes_asymmetry),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = match check() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id} ({name}): {} [{:.1} s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
