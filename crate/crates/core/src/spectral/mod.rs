//! Spectral estimation and split-sideband diagnostics.

mod occupancy;
mod peaks;
mod welch;

pub use occupancy::{sideband_area, sideband_occupancy, stokes_antistokes, Calibration, StokesReport};
pub use peaks::{fit_split_peaks, ljung_box, Floor, Peak, PeakFitOptions, SplitPeaks};
pub use welch::{welch_expectation, welch_psd, welch_psd_complex, WelchOptions, Window};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectrum::SpectrumGrid;

/// Split-peak diagnostics of one spectrum.
///
/// `r` is defined as the `ω̄_M+ω_d` height over the `ω̄_M−ω_d` height, both
/// raw and above the floor. When the spectrum also covers negative
/// frequencies the mirrored pair and the Stokes/anti-Stokes ratio are filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub omega_m: f64,
    pub omega_d: f64,
    pub positive: SplitPeaks,
    /// Pair at `−ω̄_M ± ω_d`; `upper` is the one at `−ω̄_M − ω_d`.
    pub negative: Option<SplitPeaks>,
    pub stokes: Option<StokesReport>,
    /// How `r` is measured: always `"height"`; areas are reported alongside.
    pub ratio_definition: String,
}

impl PeakReport {
    pub fn r_raw(&self) -> f64 {
        self.positive.r_raw
    }

    pub fn r_floor(&self) -> f64 {
        self.positive.r_floor
    }
}

fn mirror(spec: &SpectrumGrid) -> SpectrumGrid {
    let mut out = spec.clone();
    out.omega = spec.omega.iter().rev().map(|w| -w).collect();
    out.values = spec.values.iter().rev().cloned().collect();
    out
}

/// Fits both split-peak pairs and, if possible, the Stokes/anti-Stokes ratio.
pub fn find_split_peaks(spec: &SpectrumGrid, omega_m: f64, omega_d: f64, opts: &PeakFitOptions) -> Result<PeakReport> {
    let positive = fit_split_peaks(spec, omega_m, omega_d, opts)?;
    let lo_neg = -omega_m - opts.window_half_width * omega_d;
    let has_neg_window = spec.omega.first().is_some_and(|&w| w <= lo_neg);
    let (negative, stokes) = if has_neg_window {
        // on the mirrored axis, −ω̄−ω_d maps to ω̄+ω_d, keeping `upper` as the ω_d-shifted partner
        let m = mirror(spec);
        let neg = fit_split_peaks(&m, omega_m, omega_d, opts)?;
        let neg = SplitPeaks {
            lower: Peak { position: -neg.lower.position, ..neg.lower },
            upper: Peak { position: -neg.upper.position, ..neg.upper },
            ..neg
        };
        let floor = match opts.floor {
            Floor::Fixed(f) => f,
            Floor::Free => 0.0,
        };
        (Some(neg), Some(stokes_antistokes(spec, floor)?))
    } else {
        (None, None)
    };
    Ok(PeakReport { omega_m, omega_d, positive, negative, stokes, ratio_definition: "height".into() })
}
