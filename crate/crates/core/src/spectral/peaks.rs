use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::SpectrumGrid;

/// How the constant floor under the two peaks is treated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum Floor {
    /// Fitted together with the peaks.
    #[default]
    Free,
    /// Held at a known level, e.g. the imprecision floor of a detected spectrum.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFitOptions {
    /// Fit window is `[ω̄_M − w·ω_d, ω̄_M + w·ω_d]`.
    pub window_half_width: f64,
    /// Initial centers are the local maxima nearest `ω̄_M ∓ ω_d` within `± s·ω_d`.
    pub search_half_width: f64,
    pub floor: Floor,
    pub max_iterations: usize,
}

impl Default for PeakFitOptions {
    fn default() -> Self {
        Self { window_half_width: 2.0, search_half_width: 0.5, floor: Floor::Free, max_iterations: 400 }
    }
}

/// One fitted Lorentzian `A h² / ((ω − c)² + h²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Center (rad/s).
    pub position: f64,
    /// Height above the floor.
    pub height: f64,
    /// Half width at half maximum (rad/s).
    pub half_width: f64,
    /// Area above the floor, `∫ dω/2π`.
    pub area: f64,
    pub height_err: f64,
    pub position_err: f64,
}

/// Fitted split-peak pair and the derived asymmetry ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPeaks {
    /// Peak near `ω̄_M − ω_d`.
    pub lower: Peak,
    /// Peak near `ω̄_M + ω_d`.
    pub upper: Peak,
    pub floor: f64,
    pub floor_err: f64,
    pub floor_fixed: bool,
    /// `(floor + A_upper) / (floor + A_lower)`.
    pub r_raw: f64,
    pub r_raw_err: f64,
    /// `A_upper / A_lower`.
    pub r_floor: f64,
    pub r_floor_err: f64,
    /// Ratio of fitted areas above the floor.
    pub r_area: f64,
    pub residual_rms: f64,
    /// Ljung–Box statistic of the residuals relative to the model (10 lags).
    pub ljung_box_q: f64,
    pub iterations: usize,
}

fn lorentz(w: f64, a: f64, c: f64, h: f64) -> f64 {
    a * h * h / ((w - c) * (w - c) + h * h)
}

struct Problem<'a> {
    w: &'a [f64],
    y: &'a [f64],
    fixed_floor: Option<f64>,
}

impl Problem<'_> {
    /// Parameters: [floor?, A1, c1, h1, A2, c2, h2].
    fn unpack(&self, p: &[f64]) -> (f64, [f64; 6]) {
        match self.fixed_floor {
            Some(f) => (f, [p[0], p[1], p[2], p[3], p[4], p[5]]),
            None => (p[0], [p[1], p[2], p[3], p[4], p[5], p[6]]),
        }
    }

    fn model(&self, p: &[f64], w: f64) -> f64 {
        let (f, q) = self.unpack(p);
        f + lorentz(w, q[0], q[1], q[2]) + lorentz(w, q[3], q[4], q[5])
    }

    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.w.len(), self.w.iter().zip(self.y).map(|(&w, &y)| y - self.model(p, w)))
    }

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let off = usize::from(self.fixed_floor.is_none());
        let (_, q) = self.unpack(p);
        let mut j = DMatrix::zeros(self.w.len(), p.len());
        for (i, &w) in self.w.iter().enumerate() {
            if off == 1 {
                j[(i, 0)] = 1.0;
            }
            for (b, k) in [(0usize, 0usize), (3, 3)] {
                let (a, c, h) = (q[b], q[b + 1], q[b + 2]);
                let d = w - c;
                let den = d * d + h * h;
                j[(i, off + k)] = h * h / den;
                j[(i, off + k + 1)] = 2.0 * a * h * h * d / (den * den);
                j[(i, off + k + 2)] = 2.0 * a * h * d * d / (den * den);
            }
        }
        j
    }
}

fn nearest_local_max(w: &[f64], y: &[f64], target: f64, half: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 1..y.len().saturating_sub(1) {
        if (w[i] - target).abs() > half {
            continue;
        }
        if y[i] >= y[i - 1] && y[i] >= y[i + 1] && (y[i] > y[i - 1] || y[i] > y[i + 1]) {
            let d = (w[i] - target).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
    }
    best.map(|(i, _)| i)
}

fn half_width_guess(w: &[f64], y: &[f64], i: usize, floor: f64, cap: f64) -> f64 {
    let half = floor + 0.5 * (y[i] - floor);
    let mut lo = i;
    while lo > 0 && y[lo] > half {
        lo -= 1;
    }
    let mut hi = i;
    while hi + 1 < y.len() && y[hi] > half {
        hi += 1;
    }
    let dw = (w[1] - w[0]).abs();
    (0.5 * (w[hi] - w[lo])).clamp(0.5 * dw, cap)
}

/// Ljung–Box `Q` statistic of a residual series for the first `lags` autocorrelations.
pub fn ljung_box(residuals: &[f64], lags: usize) -> f64 {
    let n = residuals.len();
    if n <= lags + 1 {
        return f64::NAN;
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let c0: f64 = residuals.iter().map(|r| (r - mean).powi(2)).sum();
    if c0 == 0.0 {
        return 0.0;
    }
    (1..=lags)
        .map(|k| {
            let ck: f64 = (k..n).map(|t| (residuals[t] - mean) * (residuals[t - k] - mean)).sum();
            let rho = ck / c0;
            rho * rho / (n - k) as f64
        })
        .sum::<f64>()
        * (n * (n + 2)) as f64
}

/// Fits a constant floor plus two Lorentzians near `ω̄_M ∓ ω_d` by Levenberg–Marquardt.
pub fn fit_split_peaks(spec: &SpectrumGrid, omega_m: f64, omega_d: f64, opts: &PeakFitOptions) -> Result<SplitPeaks> {
    let win = spec.window(omega_m - opts.window_half_width * omega_d, omega_m + opts.window_half_width * omega_d);
    let (w, y) = (&win.omega[..], &win.values[..]);
    let per_wd = w.len() as f64 / (2.0 * opts.window_half_width);
    if w.len() < 16 || per_wd < 8.0 {
        return Err(Error::InsufficientData(format!(
            "fit window holds {} points ({per_wd:.1} per omega_d); need >= 8 per omega_d",
            w.len()
        )));
    }
    let floor0 = match opts.floor {
        Floor::Fixed(f) => f,
        Floor::Free => y.iter().cloned().fold(f64::INFINITY, f64::min),
    };
    let half = opts.search_half_width * omega_d;
    let i1 = nearest_local_max(w, y, omega_m - omega_d, half)
        .ok_or_else(|| Error::FitFailure("no local maximum near omega_m - omega_d".into()))?;
    let i2 = nearest_local_max(w, y, omega_m + omega_d, half)
        .ok_or_else(|| Error::FitFailure("no local maximum near omega_m + omega_d".into()))?;
    let cap = omega_d;
    let h1 = half_width_guess(w, y, i1, floor0, cap);
    let h2 = half_width_guess(w, y, i2, floor0, cap);
    let peaks0 = [y[i1] - floor0, w[i1], h1, y[i2] - floor0, w[i2], h2];
    let fixed_floor = match opts.floor {
        Floor::Fixed(f) => Some(f),
        Floor::Free => None,
    };
    let mut p: Vec<f64> = Vec::new();
    if fixed_floor.is_none() {
        p.push(floor0);
    }
    p.extend_from_slice(&peaks0);
    let prob = Problem { w, y, fixed_floor };

    let mut r = prob.residuals(&p);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let j = prob.jacobian(&p);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..p.len() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(delta) = a.lu().solve(&g) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let rt = prob.residuals(&trial);
            let ct = rt.norm_squared();
            if ct.is_finite() && ct < cost {
                let rel = (cost - ct) / cost.max(1e-300);
                let step = delta.iter().zip(&trial).map(|(d, v)| (d / v.abs().max(1e-300)).abs()).fold(0.0, f64::max);
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-14 || step < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // no descent direction left: at a minimum within numerical precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailure(format!("no convergence after {iterations} iterations")));
    }
    let (floor, q) = prob.unpack(&p);
    let (a1, c1, hw1, a2, c2, hw2) = (q[0], q[1], q[2].abs(), q[3], q[4], q[5].abs());
    if !(a1 > 0.0) || !(a2 > 0.0) {
        return Err(Error::FitFailure(format!("negative peak height (lower {a1:.4e}, upper {a2:.4e})")));
    }
    if !(floor + a1 > 0.0) {
        return Err(Error::FitFailure("non-positive peak maximum".into()));
    }
    for (c, name) in [(c1, "lower"), (c2, "upper")] {
        if (c - omega_m).abs() > opts.window_half_width * omega_d {
            return Err(Error::FitFailure(format!("{name} peak left the fit window")));
        }
    }

    // covariance from the final Jacobian
    let j = prob.jacobian(&p);
    let dof = (w.len() as f64 - p.len() as f64).max(1.0);
    let s2 = cost / dof;
    let cov = (j.transpose() * &j).try_inverse().map(|m| m * s2);
    let var = |k: usize| cov.as_ref().map_or(0.0, |c| c[(k, k)].max(0.0));
    let cv = |a: usize, b: usize| cov.as_ref().map_or(0.0, |c| c[(a, b)]);
    let off = usize::from(fixed_floor.is_none());
    let (ia1, ia2) = (off, off + 3);
    let floor_err = if off == 1 { var(0).sqrt() } else { 0.0 };

    let r_floor = a2 / a1;
    let r_floor_err =
        (r_floor * r_floor * (var(ia2) / (a2 * a2) + var(ia1) / (a1 * a1) - 2.0 * cv(ia1, ia2) / (a1 * a2)))
            .max(0.0)
            .sqrt();
    let r_raw = (floor + a2) / (floor + a1);
    let r_raw_err = {
        // gradient of (f + A2)/(f + A1) with respect to (f, A1, A2)
        let d1 = floor + a1;
        let gf = (a1 - a2) / (d1 * d1);
        let ga1 = -(floor + a2) / (d1 * d1);
        let ga2 = 1.0 / d1;
        let mut v = ga1 * ga1 * var(ia1) + ga2 * ga2 * var(ia2) + 2.0 * ga1 * ga2 * cv(ia1, ia2);
        if off == 1 {
            v += gf * gf * var(0) + 2.0 * gf * (ga1 * cv(0, ia1) + ga2 * cv(0, ia2));
        }
        v.max(0.0).sqrt()
    };
    let area = |a: f64, h: f64| a * h / 2.0;
    // PSD estimates scatter in proportion to their mean, so standardize by the model
    let normalized: Vec<f64> = r.iter().zip(w).map(|(v, &wi)| v / prob.model(&p, wi).abs().max(1e-300)).collect();
    Ok(SplitPeaks {
        lower: Peak {
            position: c1,
            height: a1,
            half_width: hw1,
            area: area(a1, hw1),
            height_err: var(ia1).sqrt(),
            position_err: var(ia1 + 1).sqrt(),
        },
        upper: Peak {
            position: c2,
            height: a2,
            half_width: hw2,
            area: area(a2, hw2),
            height_err: var(ia2).sqrt(),
            position_err: var(ia2 + 1).sqrt(),
        },
        floor,
        floor_err,
        floor_fixed: fixed_floor.is_some(),
        r_raw,
        r_raw_err,
        r_floor,
        r_floor_err,
        r_area: area(a2, hw2) / area(a1, hw1),
        residual_rms: (cost / w.len() as f64).sqrt(),
        ljung_box_q: ljung_box(&normalized, 10),
        iterations,
    })
}
