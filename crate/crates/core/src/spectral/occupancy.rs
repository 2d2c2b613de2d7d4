use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::SpectrumGrid;

/// Floor-subtracted area `∫ (S − floor) dω/2π` over `[lo, hi]`.
pub fn sideband_area(spec: &SpectrumGrid, lo: f64, hi: f64, floor: f64) -> Result<f64> {
    let w = spec.window(lo, hi);
    if w.len() < 2 {
        return Err(Error::InsufficientData(format!("fewer than two points in [{lo}, {hi}]")));
    }
    let area = w
        .omega
        .windows(2)
        .zip(w.values.windows(2))
        .map(|(o, v)| 0.5 * (v[0] + v[1] - 2.0 * floor) * (o[1] - o[0]))
        .sum::<f64>()
        / crate::units::TWO_PI;
    if area < 0.0 {
        return Err(Error::NegativeArea { area });
    }
    Ok(area)
}

/// Conversion from sideband area to phonon number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Integration band `[lo, hi]` (rad/s) shared by reference and measurement.
    pub band: (f64, f64),
    pub area_per_phonon: f64,
}

impl Calibration {
    /// Calibrates against a reference spectrum whose occupancy `n_ref` is known.
    pub fn from_reference(reference: &SpectrumGrid, floor: f64, n_ref: f64, band: (f64, f64)) -> Result<Self> {
        if !(n_ref > 0.0) {
            return Err(Error::invalid("n_ref", "reference occupancy must be > 0"));
        }
        let area = sideband_area(reference, band.0, band.1, floor)?;
        if !(area > 0.0) {
            return Err(Error::NegativeArea { area });
        }
        Ok(Self { band, area_per_phonon: area / n_ref })
    }
}

/// Mean phonon occupancy from a floor-subtracted sideband area.
pub fn sideband_occupancy(spec: &SpectrumGrid, floor: f64, cal: &Calibration) -> Result<f64> {
    Ok(sideband_area(spec, cal.band.0, cal.band.1, floor)? / cal.area_per_phonon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesReport {
    /// Integrated weight of the `ω > 0` group.
    pub positive: f64,
    /// Integrated weight of the `ω < 0` group.
    pub negative: f64,
    /// `positive / negative`.
    pub ratio: f64,
}

/// Ratio of the integrated `+ω` and `−ω` sideband groups (each holds both split peaks).
///
/// With `x = b + b†` and `f(ω) = ∫ f e^{iωt} dt`, the `+ω` group weighs `n` and
/// the `−ω` group `n + 1`, so the ratio is `n/(n+1)` for a thermal state.
pub fn stokes_antistokes(spec: &SpectrumGrid, floor: f64) -> Result<StokesReport> {
    let has_neg = spec.omega.iter().any(|&w| w < 0.0);
    let has_pos = spec.omega.iter().any(|&w| w > 0.0);
    if !has_neg {
        return Err(Error::MissingNegativeFrequency);
    }
    if !has_pos {
        return Err(Error::InsufficientData("no positive-frequency data".into()));
    }
    let positive = sideband_area(spec, f64::MIN_POSITIVE, f64::INFINITY, floor)?;
    let negative = sideband_area(spec, f64::NEG_INFINITY, -f64::MIN_POSITIVE, floor)?;
    if !(negative > 0.0) {
        return Err(Error::NegativeArea { area: negative });
    }
    Ok(StokesReport { positive, negative, ratio: positive / negative })
}
