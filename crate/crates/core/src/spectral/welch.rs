use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{Quantity, SpectrumGrid, SpectrumMeta, CONVENTION_CLASSICAL};
use crate::units::TWO_PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * (TWO_PI * i as f64 / n as f64).cos()).collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchOptions {
    /// Samples per segment; must be a power of two.
    pub segment_len: usize,
    /// Fractional overlap between consecutive segments, in `[0, 0.9]`.
    pub overlap: f64,
    pub window: Window,
}

impl WelchOptions {
    pub fn new(segment_len: usize) -> Self {
        Self { segment_len, overlap: 0.5, window: Window::Hann }
    }
}

/// Welch estimate of the two-sided density of a real series sampled at `sample_rate_hz`.
///
/// The axis is in rad/s from `−π f_s` upward; values are per Hz, so that
/// `∫ S dω/2π` equals the series variance.
pub fn welch_psd(series: &[f64], sample_rate_hz: f64, opts: &WelchOptions) -> Result<SpectrumGrid> {
    let z: Vec<Complex64> = series.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    welch_psd_complex(&z, sample_rate_hz, opts)
}

/// Welch estimate for a complex series; the density is not symmetric in ω.
pub fn welch_psd_complex(series: &[Complex64], sample_rate_hz: f64, opts: &WelchOptions) -> Result<SpectrumGrid> {
    let n = opts.segment_len;
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::invalid("segment_len", format!("must be a power of two >= 2, got {n}")));
    }
    if !(0.0..=0.9).contains(&opts.overlap) {
        return Err(Error::invalid("overlap", format!("must lie in [0, 0.9], got {}", opts.overlap)));
    }
    if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
        return Err(Error::invalid("sample_rate_hz", "must be > 0"));
    }
    if series.len() < n {
        return Err(Error::SeriesTooShort { needed: n, got: series.len() });
    }
    let step = ((n as f64) * (1.0 - opts.overlap)).round().max(1.0) as usize;
    let win = opts.window.coefficients(n);
    let wss: f64 = win.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut acc = vec![0.0; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut segments = 0usize;
    let mut start = 0;
    let mean: Complex64 = series.iter().sum::<Complex64>() / series.len() as f64;
    while start + n <= series.len() {
        let seg = &series[start..start + n];
        for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&win) {
            *b = (s - mean) * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let scale = 1.0 / (sample_rate_hz * wss * segments as f64);
    let df = sample_rate_hz / n as f64;
    let half = n / 2;
    let mut omega = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    // FFT bin k carries e^{-iω t}; with the analytic convention f(ω) = ∫f e^{iωt} dt
    // bin k corresponds to ω = −2π k df.
    for j in 0..n {
        let k = (j as i64) - (half as i64);
        omega.push(TWO_PI * df * k as f64);
        let bin = ((-k).rem_euclid(n as i64)) as usize;
        values.push(acc[bin] * scale);
    }
    SpectrumGrid::new(
        omega,
        values,
        Quantity::Psd,
        CONVENTION_CLASSICAL,
        SpectrumMeta { name: "welch".into(), units: "1/Hz".into(), ..SpectrumMeta::default() },
    )
}

/// Transform `W(ν) = Σ_n w_n e^{iνnΔt}` of the window at `θ = νΔt`.
fn window_transform(window: Window, n: usize, theta: f64) -> Complex64 {
    let dirichlet = |th: f64| -> Complex64 {
        let den = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, th);
        if den.norm() < 1e-12 {
            Complex64::new(n as f64, 0.0)
        } else {
            (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, th * n as f64)) / den
        }
    };
    match window {
        Window::Rectangular => dirichlet(theta),
        Window::Hann => {
            let shift = TWO_PI / n as f64;
            0.5 * dirichlet(theta) - 0.25 * dirichlet(theta + shift) - 0.25 * dirichlet(theta - shift)
        }
    }
}

/// Expected Welch estimate of a process whose true density is `fine`, at
/// the angular frequencies `targets`: `fine` convolved with the spectral
/// kernel `|W(ν)|²/(f_s Σw²)` of the segment window.
///
/// `fine` should extend a few bins beyond `targets` and resolve a fraction
/// of a bin; aliasing from beyond the Nyquist band is neglected.
pub fn welch_expectation(
    fine: &SpectrumGrid,
    targets: &[f64],
    sample_rate_hz: f64,
    opts: &WelchOptions,
) -> Result<SpectrumGrid> {
    let n = opts.segment_len;
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::invalid("segment_len", format!("must be a power of two >= 2, got {n}")));
    }
    if fine.len() < 2 {
        return Err(Error::InsufficientData("fine spectrum needs at least two points".into()));
    }
    let dt = 1.0 / sample_rate_hz;
    let wss: f64 = opts.window.coefficients(n).iter().map(|w| w * w).sum();
    let norm = 1.0 / (sample_rate_hz * wss * TWO_PI);
    // trapezoid weights of the fine grid
    let m = fine.len();
    let weights: Vec<f64> = (0..m)
        .map(|i| {
            let lo = if i > 0 { fine.omega[i] - fine.omega[i - 1] } else { 0.0 };
            let hi = if i + 1 < m { fine.omega[i + 1] - fine.omega[i] } else { 0.0 };
            0.5 * (lo + hi)
        })
        .collect();
    let values = targets
        .iter()
        .map(|&w| {
            fine.omega
                .iter()
                .zip(&fine.values)
                .zip(&weights)
                .map(|((&wf, &s), &dw)| s * dw * window_transform(opts.window, n, (w - wf) * dt).norm_sqr())
                .sum::<f64>()
                * norm
        })
        .collect();
    SpectrumGrid::new(targets.to_vec(), values, fine.quantity, &fine.convention, fine.meta.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn sinusoid_power() {
        let fs = 1024.0;
        let f0 = 100.0;
        let x: Vec<f64> = (0..1 << 15).map(|i| (TWO_PI * f0 * i as f64 / fs).sin()).collect();
        let s = welch_psd(&x, fs, &WelchOptions::new(1024)).unwrap();
        let w0 = TWO_PI * f0;
        let band = TWO_PI * 5.0;
        let pos = s.window(w0 - band, w0 + band).integral();
        let neg = s.window(-w0 - band, -w0 + band).integral();
        assert!((pos + neg - 0.5).abs() < 0.005, "{}", pos + neg);
        assert!((pos - neg).abs() < 1e-9);
    }

    #[test]
    fn white_noise_level_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sigma = 1.7;
        let fs = 500.0;
        let x: Vec<f64> = (0..1 << 17)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect();
        let s = welch_psd(&x, fs, &WelchOptions::new(256)).unwrap();
        let mean: f64 = s.values.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - sigma * sigma / fs).abs() < 0.05 * sigma * sigma / fs);
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let total: f64 = s.values.iter().sum::<f64>() * fs / s.len() as f64;
        assert!((total - var).abs() < 0.01 * var);
    }

    #[test]
    fn preconditions() {
        let x = vec![0.0; 100];
        assert!(matches!(welch_psd(&x, 1.0, &WelchOptions::new(128)), Err(Error::SeriesTooShort { .. })));
        assert!(welch_psd(&x, 1.0, &WelchOptions::new(48)).is_err());
        let bad = WelchOptions { overlap: 0.95, ..WelchOptions::new(64) };
        assert!(welch_psd(&x, 1.0, &bad).is_err());
    }

    #[test]
    fn complex_rotation_sign() {
        // z(t) = e^{-iω0 t} has its transform at +ω0 under f(ω) = ∫ f e^{iωt} dt
        let fs = 256.0;
        let f0 = 20.0;
        let z: Vec<Complex64> = (0..4096).map(|i| Complex64::from_polar(1.0, -TWO_PI * f0 * i as f64 / fs)).collect();
        let s = welch_psd_complex(&z, fs, &WelchOptions::new(256)).unwrap();
        let (imax, _) = s.values.iter().enumerate().fold((0, 0.0), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        assert!((s.omega[imax] - TWO_PI * f0).abs() < 1e-9);
    }

    #[test]
    fn expectation_matches_averaged_periodograms_of_a_resonant_process() {
        // AR(1) noise shifted to f_s/4 by a carrier: density known in closed form
        let fs = 1000.0;
        let phi: f64 = 0.95;
        let w0 = TWO_PI * 250.0;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut v = 0.0;
        let x: Vec<f64> = (0..1 << 20)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v = phi * v + z;
                v * (w0 * i as f64 / fs).cos()
            })
            .collect();
        let opts = WelchOptions::new(256);
        let est = welch_psd(&x, fs, &opts).unwrap();
        let ar = |w: f64| 1.0 / (fs * (1.0 + phi * phi - 2.0 * phi * (w / fs).cos()));
        let density = |w: f64| 0.25 * (ar(w - w0) + ar(w + w0));
        let fine_w = crate::spectrum::uniform_grid(w0 - TWO_PI * 100.0, w0 + TWO_PI * 100.0, 20001).unwrap();
        let fine = SpectrumGrid::new(
            fine_w.clone(),
            fine_w.iter().map(|&w| density(w)).collect(),
            Quantity::Psd,
            CONVENTION_CLASSICAL,
            SpectrumMeta::default(),
        )
        .unwrap();
        let targets: Vec<f64> = est.omega.iter().cloned().filter(|w| (w - w0).abs() < TWO_PI * 20.0).collect();
        let expect = welch_expectation(&fine, &targets, fs, &opts).unwrap();
        for (i, &w) in targets.iter().enumerate() {
            let got = est.interpolate(w).unwrap();
            assert!((got / expect.values[i] - 1.0).abs() < 0.05, "{w}: {got} vs {}", expect.values[i]);
        }
        // at the peak the window lowers the estimate below the true density
        let k = targets.iter().position(|&w| (w - w0).abs() < 1e-9).unwrap();
        assert!(expect.values[k] < 0.95 * density(w0));
    }
}
