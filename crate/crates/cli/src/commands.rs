use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use splitband::config::{RunConfig, SimulationSection, SweepAxis};
use splitband::fast_cavity::{auto_order, line_spectrum};
use splitband::floquet::{
    decomposition_from_points, grid_from_points, mirrored_grid, psd_with, spectra_points, Modulation, OutputId,
    SolverOptions, SpectraPoint,
};
use splitband::langevin::{
    average_emergent, cavity_output_quadrature, extract_emergent_params, integrate_ensemble, EmergentParams,
};
use splitband::model::{eta, ratio_phase_modulated, ratio_prediction, SystemParams};
use splitband::spectral::{
    find_split_peaks, fit_split_peaks, stokes_antistokes, welch_expectation, welch_psd, Floor, PeakFitOptions,
    PeakReport, SplitPeaks, WelchOptions,
};
use splitband::spectrum::{uniform_grid, SpectrumGrid};

use crate::output::{RunManifest, Staged};
use crate::Failure;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; must not exist or be empty.
    #[arg(long)]
    pub out: PathBuf,
    /// Points per frequency window (overrides `analysis.grid_points`).
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Comb truncation N_h, or the Bessel order for `fastcavity`.
    #[arg(long)]
    pub truncation: Option<usize>,
}

fn load(common: &Common, fast_cavity: bool) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(n) = common.grid_points {
        cfg.analysis.grid_points = n;
    }
    if let Some(n) = common.truncation {
        if fast_cavity {
            if let Some(f) = cfg.fast_cavity.as_mut() {
                f.max_harmonic = Some(n);
            }
        } else {
            cfg.analysis.truncation = n;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions { truncation: cfg.analysis.truncation, lo_phase: cfg.analysis.lo_phase_rad, check_condition: true }
}

fn csv_bytes(spec: &SpectrumGrid) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    spec.write_csv(&mut buf)?;
    Ok(buf)
}

fn start(command: &str, cfg: &RunConfig, out: &Path) -> Result<(Staged, RunManifest), Failure> {
    let mut staged = Staged::new(out)?;
    let mut manifest = RunManifest::new(command, &cfg.name, cfg.hash());
    manifest.warnings = cfg.validate()?.iter().map(ToString::to_string).collect();
    staged.write("config.json", format!("{}\n", cfg.to_json()?).as_bytes())?;
    Ok((staged, manifest))
}

#[derive(Debug, Clone, Serialize)]
struct SpectrumInfo {
    file: String,
    name: String,
    quantity: splitband::spectrum::Quantity,
    convention: String,
    meta: splitband::spectrum::SpectrumMeta,
    points: usize,
}

#[derive(Debug, Clone, Serialize)]
struct FitOutcome<T> {
    spectrum: String,
    result: Option<T>,
    error: Option<String>,
}

impl<T> FitOutcome<T> {
    fn new(spectrum: &str, r: splitband::Result<T>) -> Self {
        match r {
            Ok(v) => Self { spectrum: spectrum.into(), result: Some(v), error: None },
            Err(e) => Self { spectrum: spectrum.into(), result: None, error: Some(e.to_string()) },
        }
    }
}

/// Summary numbers of one analytic solve.
#[derive(Debug, Clone, Serialize)]
struct Summary {
    /// Height ratio of the `ω̄_M+ω_d` and `ω̄_M−ω_d` peaks of S_yy.
    r: Option<f64>,
    r_floor: Option<f64>,
    /// Same ratio from S_X±X±.
    r_xpm: Option<f64>,
    /// Same ratio from the detected S_yout, raw and above the shot-noise imprecision floor.
    r_yout: Option<f64>,
    r_yout_floor: Option<f64>,
    /// Small-coupling law `((2ω_d − ω_2)/(2ω_d + ω_2))²`.
    r_small_modulation: f64,
    /// Phase-modulation law `((J0(β) − J1(β))/(J0(β) + J1(β)))²`, `β = ω_2/ω_d`.
    r_phase_modulated: f64,
    /// `∫ S_xx dω/2π` over positive frequencies.
    occupancy: Option<f64>,
    /// Positive over negative weight of S_xx.
    stokes_ratio: Option<f64>,
}

struct Solved {
    grid: Vec<f64>,
    points: Vec<SpectraPoint>,
    opts: SolverOptions,
}

fn solve(cfg: &RunConfig) -> splitband::Result<Solved> {
    let opts = solver_options(cfg);
    let grid = mirrored_grid(&cfg.system, cfg.analysis.grid_points)?;
    let points = spectra_points(&grid, &cfg.system, &Modulation::from_params(&cfg.system), &opts)?;
    Ok(Solved { grid, points, opts })
}

fn summarize(p: &SystemParams, spectra: &[(OutputId, SpectrumGrid)]) -> (Summary, Vec<FitOutcome<PeakReport>>) {
    let fo = PeakFitOptions::default();
    let get = |id| &spectra.iter().find(|(o, _)| *o == id).expect("spectrum solved").1;
    // the detected quadrature has a known shot-noise imprecision floor
    let detected = PeakFitOptions { floor: Floor::Fixed(2.0 * p.n_opt + 1.0), ..fo };
    let fits: Vec<FitOutcome<PeakReport>> = [(OutputId::Y, fo), (OutputId::XPm, fo), (OutputId::YOut, detected)]
        .iter()
        .map(|&(id, o)| FitOutcome::new(id.name(), find_split_peaks(get(id), p.omega_m, p.omega_d, &o)))
        .collect();
    let stokes = stokes_antistokes(get(OutputId::X), 0.0).ok();
    let summary = Summary {
        r: fits[0].result.as_ref().map(PeakReport::r_raw),
        r_floor: fits[0].result.as_ref().map(PeakReport::r_floor),
        r_xpm: fits[1].result.as_ref().map(PeakReport::r_raw),
        r_yout: fits[2].result.as_ref().map(PeakReport::r_raw),
        r_yout_floor: fits[2].result.as_ref().map(PeakReport::r_floor),
        r_small_modulation: ratio_prediction(p.omega_d, p.omega_2),
        r_phase_modulated: ratio_phase_modulated(p.omega_d, p.omega_2),
        occupancy: stokes.map(|s| s.positive),
        stokes_ratio: stokes.map(|s| s.ratio),
    };
    (summary, fits)
}

pub fn analytic(common: &Common) -> Result<PathBuf, Failure> {
    let cfg = load(common, false)?;
    let solved = solve(&cfg)?;
    let (mut staged, manifest) = start("analytic", &cfg, &common.out)?;
    let p = &cfg.system;

    let mut spectra = Vec::new();
    for id in OutputId::ALL {
        spectra.push((id, grid_from_points(id, &solved.grid, &solved.points, p, &solved.opts)?));
    }
    let dec = decomposition_from_points(&solved.grid, &solved.points, p, &solved.opts)?;
    let mut infos = Vec::new();
    let named = spectra.iter().map(|(_, s)| s).chain([&dec.backaction, &dec.imprecision, &dec.cross]);
    for s in named {
        let file = format!("spectra/{}.csv", s.meta.name);
        staged.write(&file, &csv_bytes(s)?)?;
        infos.push(SpectrumInfo {
            file,
            name: s.meta.name.clone(),
            quantity: s.quantity,
            convention: s.convention.clone(),
            meta: s.meta.clone(),
            points: s.len(),
        });
    }
    staged.write_json("spectra/metadata.json", &infos)?;

    let (summary, fits) = summarize(p, &spectra);
    #[derive(Serialize)]
    struct Report<'a> {
        config_name: &'a str,
        #[serde(flatten)]
        summary: Summary,
        ratio_definition: &'static str,
        fits: Vec<FitOutcome<PeakReport>>,
    }
    staged.write_json("peaks.json", &Report { config_name: &cfg.name, summary, ratio_definition: "height", fits })?;
    staged.commit(manifest)
}

fn simulation_section(cfg: &RunConfig) -> Result<SimulationSection, Failure> {
    cfg.simulation.ok_or_else(|| Failure::Config("config has no `simulation` section".into()))
}

fn accumulate(acc: &mut Option<(SpectrumGrid, usize)>, s: SpectrumGrid) {
    match acc {
        None => *acc = Some((s, 1)),
        Some((a, n)) => {
            for (v, w) in a.values.iter_mut().zip(&s.values) {
                *v += w;
            }
            *n += 1;
        }
    }
}

fn finish_mean(acc: Option<(SpectrumGrid, usize)>, name: &str, lo: f64, hi: f64) -> Option<SpectrumGrid> {
    acc.map(|(mut s, n)| {
        for v in s.values.iter_mut() {
            *v /= n as f64;
        }
        s.meta.name = name.into();
        s.window(lo, hi)
    })
}

const MAX_FINE_POINTS: usize = 200_000;

#[derive(Debug, Clone, Serialize)]
struct SeedResult {
    seed: u64,
    emergent: Option<EmergentParams>,
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct Comparison {
    lower_offset_rad_s: f64,
    upper_offset_rad_s: f64,
    lower_height_ratio: f64,
    upper_height_ratio: f64,
    r_simulated: f64,
    r_expected: f64,
    bin_rad_s: f64,
}

pub fn simulate(common: &Common, seeds: &[u64]) -> Result<PathBuf, Failure> {
    let cfg = load(common, false)?;
    let section = simulation_section(&cfg)?;
    if seeds.is_empty() {
        return Err(Failure::Config("at least one --seed is required".into()));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let sim = section.sim_config(&cfg.system, 0);
    let (mut staged, mut manifest) = start("simulate", &cfg, &common.out)?;
    manifest.seeds = sorted.clone();
    staged.path("trajectories/.keep")?;

    let welch = WelchOptions::new(section.welch_segment);
    let mut yy = None;
    let mut yout = None;
    let mut seed_results = Vec::new();
    let mut fs = 0.0;
    for (seed, run) in integrate_ensemble(&sim, &sorted) {
        let traj = match run {
            Ok(t) => t,
            Err(e) => {
                manifest.failures.push(format!("seed {seed}: {e}"));
                seed_results.push(SeedResult { seed, emergent: None, error: Some(e.to_string()) });
                continue;
            }
        };
        let cfg_seed = splitband::langevin::SimConfig { seed, ..sim };
        for p in traj.write(&staged.dir().join("trajectories"), &format!("seed_{seed}"), &cfg_seed)? {
            let rel = p.strip_prefix(staged.dir()).expect("inside staging").to_path_buf();
            staged.register(rel);
        }
        fs = traj.sample_rate();
        let y = splitband::langevin::intracavity_quadrature(&traj, cfg.analysis.lo_phase_rad);
        accumulate(&mut yy, welch_psd(&y, fs, &welch)?);
        let yo = cavity_output_quadrature(&traj, &sim, cfg.analysis.lo_phase_rad)?;
        accumulate(&mut yout, welch_psd(&yo, fs, &welch)?);
        let em = extract_emergent_params(&traj, &sim);
        if let Err(e) = &em {
            manifest.failures.push(format!("seed {seed}: emergent parameters: {e}"));
        }
        seed_results.push(SeedResult { seed, error: em.as_ref().err().map(ToString::to_string), emergent: em.ok() });
    }
    if yy.is_none() {
        return Err(Failure::Numerical(format!("every seed failed: {}", manifest.failures.join("; "))));
    }
    let p = &cfg.system;
    let span = p.omega_m + 8.0 * p.omega_d;
    let yy = finish_mean(yy, "yy_sim", -span, span).expect("at least one seed");
    let yout = finish_mean(yout, "yout_sim", -span, span).expect("at least one seed");
    staged.write("spectra/yy_sim.csv", &csv_bytes(&yy)?)?;
    staged.write("spectra/yout_sim.csv", &csv_bytes(&yout)?)?;

    let emergent: Vec<EmergentParams> = seed_results.iter().filter_map(|s| s.emergent.clone()).collect();
    let fo = PeakFitOptions::default();
    let mut expected_fit = None;
    let sim_fit;
    let mut comparison = None;
    if !emergent.is_empty() {
        let (ep, modulation) = average_emergent(&emergent)?;
        let lo = ep.omega_m - 4.0 * ep.omega_d;
        let hi = ep.omega_m + 4.0 * ep.omega_d;
        // resolve both the Welch kernel and the optically damped line
        let width = ep.gamma_m + 4.0 * ep.g_bar * ep.g_bar * eta(ep.omega_m, &ep).re.max(0.0);
        let bin = yy.omega[1] - yy.omega[0];
        if bin > 0.5 * width {
            manifest.warnings.push(format!(
                "Welch bin {bin:.1} rad/s does not resolve the expected linewidth {width:.1} rad/s; peak fits are unreliable"
            ));
        }
        let spacing = (bin / 4.0).min(width / 8.0);
        let fine_points = (((hi - lo) / spacing).ceil() as usize + 1).clamp(cfg.analysis.grid_points, MAX_FINE_POINTS);
        let fine = uniform_grid(lo, hi, fine_points)?;
        let an = psd_with(OutputId::Y, &fine, &ep, &modulation, &solver_options(&cfg))?;
        let bins = yy.window(ep.omega_m - 3.0 * ep.omega_d, ep.omega_m + 3.0 * ep.omega_d);
        let mut expected = welch_expectation(&an, &bins.omega, fs, &welch)?;
        expected.meta.name = "yy_expected".into();
        staged.write("spectra/yy_expected.csv", &csv_bytes(&expected)?)?;
        // both fits are centered between the expected peaks, which the optical spring pulls below ω̄_M
        let guide = fit_split_peaks(&expected, ep.omega_m, ep.omega_d, &fo);
        let center = guide
            .as_ref()
            .map(|g| 0.5 * (g.lower.position + g.upper.position))
            .unwrap_or(ep.omega_m + 2.0 * ep.g_bar * ep.g_bar * eta(ep.omega_m, &ep).im);
        let ef = fit_split_peaks(&expected, center, ep.omega_d, &fo);
        let sf = fit_split_peaks(&yy, center, ep.omega_d, &fo);
        if let (Ok(e), Ok(s)) = (&ef, &sf) {
            comparison = Some(compare(s, e, yy.omega[1] - yy.omega[0]));
        }
        expected_fit = Some(FitOutcome::new("yy_expected", ef));
        sim_fit = Some(FitOutcome::new("yy_sim", sf));
    } else {
        sim_fit = Some(FitOutcome::new("yy_sim", fit_split_peaks(&yy, p.omega_m, p.omega_d, &fo)));
    }

    #[derive(Serialize)]
    struct Report {
        seeds: Vec<SeedResult>,
        sample_rate_hz: f64,
        welch_segment: usize,
        simulated: Option<FitOutcome<SplitPeaks>>,
        expected: Option<FitOutcome<SplitPeaks>>,
        comparison: Option<Comparison>,
    }
    staged.write_json(
        "peaks.json",
        &Report {
            seeds: seed_results,
            sample_rate_hz: fs,
            welch_segment: section.welch_segment,
            simulated: sim_fit,
            expected: expected_fit,
            comparison,
        },
    )?;
    staged.commit(manifest)
}

fn compare(sim: &SplitPeaks, expected: &SplitPeaks, bin: f64) -> Comparison {
    Comparison {
        lower_offset_rad_s: sim.lower.position - expected.lower.position,
        upper_offset_rad_s: sim.upper.position - expected.upper.position,
        lower_height_ratio: sim.lower.height / expected.lower.height,
        upper_height_ratio: sim.upper.height / expected.upper.height,
        r_simulated: sim.r_raw,
        r_expected: expected.r_raw,
        bin_rad_s: bin,
    }
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    sweep_field: String,
    sweep_value: f64,
    detuning_rad_s: f64,
    kappa_rad_s: f64,
    gamma_m_rad_s: f64,
    omega_m_rad_s: f64,
    omega_d_rad_s: f64,
    omega_2_rad_s: f64,
    g_bar_rad_s: f64,
    n_th: f64,
    n_opt: f64,
    r_raw: Option<f64>,
    r_floor: Option<f64>,
    r_xpm: Option<f64>,
    r_yout: Option<f64>,
    r_yout_floor: Option<f64>,
    r_small_modulation: f64,
    occupancy: Option<f64>,
    stokes_ratio: Option<f64>,
    status: String,
}

pub fn sweep(common: &Common, axis: &SweepAxis) -> Result<PathBuf, Failure> {
    let base = load(common, false)?;
    if axis.values.is_empty() {
        return Err(Failure::Config("sweep has no values".into()));
    }
    let configs =
        axis.values.iter().map(|&v| base.with_field(&axis.field, v)).collect::<splitband::Result<Vec<_>>>()?;
    let (mut staged, mut manifest) = start("sweep", &base, &common.out)?;

    let rows: Vec<(SweepRow, Option<String>)> = configs
        .par_iter()
        .zip(&axis.values)
        .map(|(cfg, &value)| {
            let p = cfg.system;
            let outcome = solve(cfg).and_then(|s| {
                let spectra = OutputId::ALL
                    .iter()
                    .map(|&id| Ok((id, grid_from_points(id, &s.grid, &s.points, &p, &s.opts)?)))
                    .collect::<splitband::Result<Vec<_>>>()?;
                Ok(summarize(&p, &spectra))
            });
            let (summary, status, err) = match outcome {
                Ok((summary, fits)) => {
                    let failed: Vec<&FitOutcome<PeakReport>> = fits.iter().filter(|f| f.error.is_some()).collect();
                    if failed.is_empty() {
                        (Some(summary), "ok".to_string(), None)
                    } else {
                        let names: Vec<&str> = failed.iter().map(|f| f.spectrum.as_str()).collect();
                        let detail: Vec<String> = failed
                            .iter()
                            .map(|f| format!("{}: {}", f.spectrum, f.error.as_deref().unwrap_or_default()))
                            .collect();
                        (Some(summary), format!("fit_failed:{}", names.join("+")), Some(detail.join("; ")))
                    }
                }
                Err(e) => (None, "solve_failed".to_string(), Some(e.to_string())),
            };
            let row = SweepRow {
                sweep_field: axis.field.clone(),
                sweep_value: value,
                detuning_rad_s: p.detuning,
                kappa_rad_s: p.kappa,
                gamma_m_rad_s: p.gamma_m,
                omega_m_rad_s: p.omega_m,
                omega_d_rad_s: p.omega_d,
                omega_2_rad_s: p.omega_2,
                g_bar_rad_s: p.g_bar,
                n_th: p.n_th,
                n_opt: p.n_opt,
                r_raw: summary.as_ref().and_then(|s| s.r),
                r_floor: summary.as_ref().and_then(|s| s.r_floor),
                r_xpm: summary.as_ref().and_then(|s| s.r_xpm),
                r_yout: summary.as_ref().and_then(|s| s.r_yout),
                r_yout_floor: summary.as_ref().and_then(|s| s.r_yout_floor),
                r_small_modulation: ratio_prediction(p.omega_d, p.omega_2),
                occupancy: summary.as_ref().and_then(|s| s.occupancy),
                stokes_ratio: summary.as_ref().and_then(|s| s.stokes_ratio),
                status,
            };
            (row, err)
        })
        .collect();

    let mut wr = csv::Writer::from_writer(Vec::new());
    for (i, (row, err)) in rows.iter().enumerate() {
        if let Some(e) = err {
            manifest.failures.push(format!("{}={}: {e}", axis.field, axis.values[i]));
        }
        wr.serialize(row).map_err(|e| Failure::Numerical(e.to_string()))?;
    }
    let bytes = wr.into_inner().map_err(|e| Failure::Numerical(e.to_string()))?;
    staged.write("sweep.csv", &bytes)?;
    staged.write_json("sweep_axis.json", axis)?;
    if rows.iter().all(|(r, _)| r.status == "solve_failed") {
        return Err(Failure::Numerical(format!("every sweep point failed: {}", manifest.failures.join("; "))));
    }
    staged.commit(manifest)
}

pub fn fastcavity(common: &Common) -> Result<PathBuf, Failure> {
    let cfg = load(common, true)?;
    let section = cfg.fast_cavity.ok_or_else(|| Failure::Config("config has no `fast_cavity` section".into()))?;
    let ansatz = section.ansatz(&cfg.system);
    let order = section.max_harmonic.unwrap_or_else(|| auto_order(&ansatz));
    let lines = line_spectrum(&ansatz, order)?;
    let (mut staged, mut manifest) = start("fastcavity", &cfg, &common.out)?;
    manifest.warnings.extend(lines.warnings.iter().map(ToString::to_string));

    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["omega_rad_s", "carrier", "sideband", "re_amplitude", "im_amplitude", "power"])
        .map_err(|e| Failure::Numerical(e.to_string()))?;
    for l in &lines.lines {
        wr.write_record([
            format!("{:.17e}", l.omega),
            l.carrier.to_string(),
            l.sideband.to_string(),
            format!("{:.17e}", l.amplitude.re),
            format!("{:.17e}", l.amplitude.im),
            format!("{:.17e}", l.power()),
        ])
        .map_err(|e| Failure::Numerical(e.to_string()))?;
    }
    staged.write("lines.csv", &wr.into_inner().map_err(|e| Failure::Numerical(e.to_string()))?)?;

    let grid = uniform_grid(
        ansatz.omega_m - 8.0 * ansatz.omega_d,
        ansatz.omega_m + 8.0 * ansatz.omega_d,
        cfg.analysis.grid_points,
    )?;
    let spec = lines.convolve(&grid, ansatz.gamma_line)?;
    staged.write("spectra/fast_cavity.csv", &csv_bytes(&spec)?)?;
    let fit = FitOutcome::new(
        "fast_cavity",
        fit_split_peaks(&spec, ansatz.omega_m, ansatz.omega_d, &PeakFitOptions::default()),
    );

    #[derive(Serialize)]
    struct Report {
        ansatz: splitband::fast_cavity::AnsatzParams,
        max_harmonic: usize,
        line_count: usize,
        neglected_weight: f64,
        /// Power ratio of the `ω̄_M+ω_d` and `ω̄_M−ω_d` lines.
        line_ratio: f64,
        r_phase_modulated: f64,
        fit: FitOutcome<SplitPeaks>,
    }
    staged.write_json(
        "report.json",
        &Report {
            ansatz,
            max_harmonic: order,
            line_count: lines.lines.len(),
            neglected_weight: lines.neglected_weight,
            line_ratio: lines.split_ratio(),
            r_phase_modulated: ratio_phase_modulated(ansatz.omega_d, ansatz.omega_2),
            fit,
        },
    )?;
    staged.commit(manifest)
}
