use splitband::config::{preset, SimulationSection};
use splitband::floquet::{psd_with, OutputId, SolverOptions};
use splitband::langevin::{
    average_emergent, cavity_output_quadrature, extract_emergent_params, integrate_ensemble, intracavity_quadrature,
    position_in_zpf, SimConfig,
};
use splitband::model::{eta, ratio_prediction, SystemParams};
use splitband::spectral::{fit_split_peaks, welch_expectation, welch_psd, PeakFitOptions, SplitPeaks, WelchOptions};
use splitband::spectrum::{uniform_grid, SpectrumGrid};
use splitband::trajectory_io::Trajectory;

struct Ensemble {
    section: SimulationSection,
    runs: Vec<(SimConfig, Trajectory)>,
}

fn ensemble(name: &str, periods: f64, seeds: &[u64]) -> Ensemble {
    let cfg = preset(name).unwrap();
    let section = SimulationSection { modulation_periods: periods, ..cfg.simulation.unwrap() };
    let base = section.sim_config(&cfg.system, 0);
    let runs = integrate_ensemble(&base, seeds)
        .into_iter()
        .map(|(seed, tr)| (SimConfig { seed, ..base }, tr.unwrap()))
        .collect();
    Ensemble { section, runs }
}

impl Ensemble {
    fn welch(&self) -> WelchOptions {
        WelchOptions::new(self.section.welch_segment)
    }

    fn averaged(&self, series: impl Fn(&SimConfig, &Trajectory) -> Vec<f64>) -> SpectrumGrid {
        let mut acc: Option<SpectrumGrid> = None;
        for (c, tr) in &self.runs {
            let s = welch_psd(&series(c, tr), tr.sample_rate(), &self.welch()).unwrap();
            match acc.as_mut() {
                None => acc = Some(s),
                Some(a) => a.values.iter_mut().zip(&s.values).for_each(|(v, w)| *v += w),
            }
        }
        let mut s = acc.unwrap();
        s.values.iter_mut().for_each(|v| *v /= self.runs.len() as f64);
        s
    }

    fn emergent(&self) -> (SystemParams, splitband::floquet::Modulation) {
        let list: Vec<_> = self.runs.iter().map(|(c, tr)| extract_emergent_params(tr, c).unwrap()).collect();
        average_emergent(&list).unwrap()
    }

    fn bin(&self) -> f64 {
        splitband::units::TWO_PI * self.runs[0].1.sample_rate() / self.section.welch_segment as f64
    }
}

fn fit_at(s: &SpectrumGrid, center: f64, p: &SystemParams) -> SplitPeaks {
    fit_split_peaks(s, center, p.omega_d, &PeakFitOptions::default()).unwrap()
}

#[test]
fn detected_quadrature_shows_split_sidebands_at_fixed_frequencies() {
    let e = ensemble("fig2_i", 300.0, &[11, 12]);
    let (ep, _) = e.emergent();
    let bin = e.bin();
    let mut fits = Vec::new();
    for theta in [0.0, 0.8, 1.6, 2.4] {
        let s = e.averaged(|c, tr| cavity_output_quadrature(tr, c, theta).unwrap());
        fits.push(fit_at(&s, ep.omega_m, &ep));
    }
    // the optical spring pulls both lines by a few bins
    for f in &fits {
        assert!((f.lower.position - (ep.omega_m - ep.omega_d)).abs() < 0.05 * ep.omega_d, "{f:?}");
        assert!((f.upper.position - (ep.omega_m + ep.omega_d)).abs() < 0.05 * ep.omega_d, "{f:?}");
        assert!((f.lower.position - fits[0].lower.position).abs() <= bin);
        assert!((f.upper.position - fits[0].upper.position).abs() <= bin);
    }
    let heights: Vec<f64> = fits.iter().map(|f| f.lower.height).collect();
    let (lo, hi) = heights.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    assert!(hi / lo > 1.5, "{heights:?}");
}

/// Position and main-lobe mean (±2 bins) of the largest value in `[lo, hi]`.
fn main_line(s: &SpectrumGrid, lo: f64, hi: f64) -> (f64, f64) {
    let w = s.window(lo, hi);
    let i = (0..w.len()).max_by(|&a, &b| w.values[a].total_cmp(&w.values[b])).unwrap();
    let lobe = &w.values[i.saturating_sub(2)..(i + 3).min(w.len())];
    (w.omega[i], lobe.iter().sum::<f64>() / lobe.len() as f64)
}

fn expected_spectrum(e: &Ensemble, id: OutputId, sim: &SpectrumGrid) -> (SystemParams, SpectrumGrid) {
    let (ep, modulation) = e.emergent();
    let bin = e.bin();
    let width = ep.gamma_m + 4.0 * ep.g_bar * ep.g_bar * eta(ep.omega_m, &ep).re.max(0.0);
    let step = (bin / 4.0).min(width / 8.0);
    let (lo, hi) = (ep.omega_m - 4.0 * ep.omega_d, ep.omega_m + 4.0 * ep.omega_d);
    let fine = uniform_grid(lo, hi, ((hi - lo) / step).ceil() as usize + 1).unwrap();
    let an = psd_with(id, &fine, &ep, &modulation, &SolverOptions::with_truncation(24)).unwrap();
    let targets = sim.window(ep.omega_m - 3.0 * ep.omega_d, ep.omega_m + 3.0 * ep.omega_d);
    let fs = e.runs[0].1.sample_rate();
    (ep, welch_expectation(&an, &targets.omega, fs, &e.welch()).unwrap())
}

#[test]
fn position_spectrum_matches_emergent_model() {
    let e = ensemble("fig2_i", 1000.0, &[1, 2, 3, 4, 5, 6]);
    let trap = e.section.trap;
    let omega_m = e.emergent().0.omega_m;
    let sim = e.averaged(|_, tr| position_in_zpf(tr, &trap, omega_m));
    let (ep, expected) = expected_spectrum(&e, OutputId::X, &sim);
    let (lo, hi) = (ep.omega_m - 0.5 * ep.omega_d, ep.omega_m + 0.5 * ep.omega_d);
    let (w_sim, h_sim) = main_line(&sim, lo, hi);
    let (w_an, h_an) = main_line(&expected, lo, hi);
    assert!((w_sim - w_an).abs() <= e.bin(), "{w_sim} vs {w_an}");
    assert!((h_sim / h_an - 1.0).abs() < 0.2, "{h_sim} vs {h_an}");
}

#[test]
fn simulated_ratio_follows_closed_form() {
    let mut bad = Vec::new();
    for name in ["fig2_i", "fig2_ii", "fig2_iii"] {
        let e = ensemble(name, 500.0, &[1, 2, 3, 4, 5, 6]);
        let sim = e.averaged(|_, tr| intracavity_quadrature(tr, 0.0));
        let (ep, expected) = expected_spectrum(&e, OutputId::Y, &sim);
        let guide = fit_at(&expected, ep.omega_m, &ep);
        let center = 0.5 * (guide.lower.position + guide.upper.position);
        let want = ratio_prediction(ep.omega_d, ep.omega_2);
        match fit_split_peaks(&sim, center, ep.omega_d, &PeakFitOptions::default()) {
            Ok(f) if (f.r_raw / want - 1.0).abs() < 0.2 => {}
            Ok(f) => bad.push(format!(
                "{name}: r={:.4} (model spectrum {:.4}), closed form {want:.4} at emergent ω_2={:.1}",
                f.r_raw, guide.r_raw, ep.omega_2
            )),
            Err(err) => bad.push(format!("{name}: {err}")),
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("; "));
}
