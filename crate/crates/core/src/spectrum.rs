//! Frequency-domain spectra with units and convention metadata.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Convention tag for analytic quantum spectra.
pub const CONVENTION_UNSYMMETRIZED: &str = "unsymmetrized <A^dag(w) A(w)>, int dw/2pi = variance";
/// Convention tag for spectra estimated from classical time series.
pub const CONVENTION_CLASSICAL: &str = "two-sided classical density, int dw/2pi = variance";

/// What a spectrum's values represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// A power spectral density (non-negative).
    Psd,
    /// A signed interference contribution to a PSD.
    CrossTerm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SpectrumMeta {
    /// Name of the spectrum (`xx`, `xpm`, `yy`, `yout`, ...).
    pub name: String,
    /// Unit of the values, e.g. `1/Hz`.
    pub units: String,
    /// Digest of the parameters that produced the spectrum.
    pub params_hash: String,
    /// Comb truncation order, if analytic.
    pub truncation: Option<usize>,
    /// Local-oscillator phase in rad, for detected quadratures.
    pub lo_phase: Option<f64>,
    /// Detection scheme for output spectra.
    pub detection: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    /// Angular frequencies in rad/s, strictly increasing.
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    pub quantity: Quantity,
    pub convention: String,
    pub meta: SpectrumMeta,
}

impl SpectrumGrid {
    pub fn new(
        omega: Vec<f64>,
        values: Vec<f64>,
        quantity: Quantity,
        convention: &str,
        meta: SpectrumMeta,
    ) -> Result<Self> {
        let s = Self { omega, values, quantity, convention: convention.to_string(), meta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.len() != self.values.len() {
            return Err(Error::Parse(format!("{} frequencies but {} values", self.omega.len(), self.values.len())));
        }
        if self.omega.is_empty() {
            return Err(Error::Parse("empty spectrum".into()));
        }
        if self.omega.iter().chain(&self.values).any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite entry".into()));
        }
        if self.omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parse("frequency axis not strictly increasing".into()));
        }
        if self.quantity == Quantity::Psd && self.values.iter().any(|&v| v < 0.0) {
            return Err(Error::Parse("negative PSD value".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// True when the spacing is constant to within `1e-9` relative.
    pub fn is_uniform(&self) -> bool {
        if self.omega.len() < 3 {
            return true;
        }
        let d0 = self.omega[1] - self.omega[0];
        self.omega.windows(2).all(|w| ((w[1] - w[0]) - d0).abs() <= 1e-9 * d0.abs().max(self.omega[0].abs() * 1e-6))
    }

    /// Keeps the points with `lo <= ω <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> SpectrumGrid {
        let (omega, values): (Vec<f64>, Vec<f64>) =
            self.omega.iter().zip(&self.values).filter(|(w, _)| **w >= lo && **w <= hi).map(|(w, v)| (*w, *v)).unzip();
        SpectrumGrid {
            omega,
            values,
            quantity: self.quantity,
            convention: self.convention.clone(),
            meta: self.meta.clone(),
        }
    }

    /// Trapezoidal `∫ S dω / 2π` over the whole axis.
    pub fn integral(&self) -> f64 {
        self.omega.windows(2).zip(self.values.windows(2)).map(|(w, v)| 0.5 * (v[0] + v[1]) * (w[1] - w[0])).sum::<f64>()
            / crate::units::TWO_PI
    }

    /// Linear interpolation; `None` outside the axis.
    pub fn interpolate(&self, w: f64) -> Option<f64> {
        let i = self.omega.partition_point(|&x| x < w);
        if i == 0 {
            return (self.omega[0] == w).then(|| self.values[0]);
        }
        if i == self.omega.len() {
            return None;
        }
        let (w0, w1) = (self.omega[i - 1], self.omega[i]);
        let t = (w - w0) / (w1 - w0);
        Some(self.values[i - 1] * (1.0 - t) + self.values[i] * t)
    }

    /// Writes `omega_rad_s,psd_value,convention` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["omega_rad_s", "psd_value", "convention"]).map_err(csv_err)?;
        for (o, v) in self.omega.iter().zip(&self.values) {
            wr.write_record([format!("{o:.17e}"), format!("{v:.17e}"), self.convention.clone()]).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Parses the CSV layout written by [`SpectrumGrid::write_csv`].
    ///
    /// Metadata is not part of the CSV; the result carries default metadata.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let headers = rd.headers().map_err(csv_err)?.clone();
        let expected = ["omega_rad_s", "psd_value", "convention"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(Error::Parse(format!("unexpected header {headers:?}")));
        }
        let mut omega = Vec::new();
        let mut values = Vec::new();
        let mut convention: Option<String> = None;
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != 3 {
                return Err(Error::Parse(format!("row has {} fields", rec.len())));
            }
            let o: f64 = rec[0].trim().parse().map_err(|_| Error::Parse(format!("bad frequency `{}`", &rec[0])))?;
            let v: f64 = rec[1].trim().parse().map_err(|_| Error::Parse(format!("bad value `{}`", &rec[1])))?;
            match &convention {
                None => convention = Some(rec[2].to_string()),
                Some(c) if c != &rec[2] => return Err(Error::Parse("mixed conventions in one file".into())),
                _ => {}
            }
            omega.push(o);
            values.push(v);
        }
        let convention = convention.ok_or_else(|| Error::Parse("no data rows".into()))?;
        let quantity = if values.iter().any(|&v| v < 0.0) { Quantity::CrossTerm } else { Quantity::Psd };
        SpectrumGrid::new(omega, values, quantity, &convention, SpectrumMeta::default())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Uniform grid of `points` frequencies on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("grid", format!("need points >= 2 and hi > lo, got {points} on [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + step * i as f64).collect())
}
