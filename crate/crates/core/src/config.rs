//! JSON run configurations, named presets and single-field sweeps.
//!
//! Every physical quantity carries its unit in the key (`_rad_s`, `_s`, `_m`,
//! `_kg`); unknown keys are rejected at every level.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, Warning};
use crate::fast_cavity::{AnsatzParams, PhaseIndex, SpringDressing};
use crate::langevin::{NoiseSwitches, SimConfig, DEFAULT_DT};
use crate::model::{eta, SystemParams, TrapParams};
use crate::presets::{self, ThermalSet, ROOM_TEMPERATURE};
use crate::units::{bose_occupancy, HBAR, TWO_PI};

fn default_truncation() -> usize {
    24
}

fn default_grid_points() -> usize {
    4096
}

fn default_segment() -> usize {
    1 << 17
}

fn default_periods() -> f64 {
    1000.0
}

/// Settings of the analytic solve and the spectral diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Comb truncation order `N_h`.
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    /// Points of the positive-frequency grid `[ω̄_M − 8ω_d, ω̄_M + 8ω_d]`.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Local-oscillator phase of the detected quadrature.
    #[serde(default)]
    pub lo_phase_rad: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { truncation: default_truncation(), grid_points: default_grid_points(), lo_phase_rad: 0.0 }
    }
}

/// Stochastic simulation of the particle in its trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub trap: TrapParams,
    /// Recorded length in modulation periods `2π/ω_d`.
    #[serde(default = "default_periods")]
    pub modulation_periods: f64,
    /// Overrides the system's `Γ_M` for the simulation only.
    #[serde(default)]
    pub gamma_m_rad_s: Option<f64>,
    #[serde(default)]
    pub dt_s: Option<f64>,
    #[serde(default)]
    pub sample_every: Option<u32>,
    #[serde(default)]
    pub discard_periods: Option<f64>,
    #[serde(default)]
    pub noise: NoiseSwitches,
    /// Welch segment length in samples.
    #[serde(default = "default_segment")]
    pub welch_segment: usize,
}

impl SimulationSection {
    /// Simulator configuration for `system` and `seed`.
    pub fn sim_config(&self, system: &SystemParams, seed: u64) -> SimConfig {
        let duration = self.modulation_periods * TWO_PI / system.omega_d;
        let mut c = SimConfig::for_system(self.trap, system, duration, seed);
        if let Some(g) = self.gamma_m_rad_s {
            c.gamma_m = g;
        }
        if let Some(dt) = self.dt_s {
            c.dt = dt;
            if self.sample_every.is_none() {
                c.sample_every = ((c.sample_every as f64 * DEFAULT_DT / dt).round() as u32).max(1);
            }
        }
        if let Some(n) = self.sample_every {
            c.sample_every = n;
        }
        if let Some(d) = self.discard_periods {
            c.discard_periods = d;
        }
        c.noise = self.noise;
        c
    }

    pub fn validate(&self, system: &SystemParams) -> Result<()> {
        self.trap.validate()?;
        if !(self.modulation_periods > 0.0) || !self.modulation_periods.is_finite() {
            return Err(Error::invalid("modulation_periods", "must be > 0"));
        }
        if !self.welch_segment.is_power_of_two() || self.welch_segment < 64 {
            return Err(Error::invalid(
                "welch_segment",
                format!("must be a power of two >= 64, got {}", self.welch_segment),
            ));
        }
        let c = self.sim_config(system, 0);
        c.validate()?;
        if c.samples() < self.welch_segment {
            return Err(Error::invalid("welch_segment", format!("longer than the record ({} samples)", c.samples())));
        }
        Ok(())
    }
}

/// Fast-cavity line-spectrum ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastCavitySection {
    /// Slow phase amplitude `X_d` of `2kx_0(t)`.
    pub x_d: f64,
    /// Fast phase amplitude `X_M`.
    pub x_m: f64,
    #[serde(default)]
    pub dressing: SpringDressing,
    #[serde(default)]
    pub phase_index: PhaseIndex,
    /// Display linewidth; defaults to `Γ_M`.
    #[serde(default)]
    pub gamma_line_rad_s: Option<f64>,
    /// Bessel order; chosen from the truncation tolerance when absent.
    #[serde(default)]
    pub max_harmonic: Option<usize>,
}

impl FastCavitySection {
    pub fn ansatz(&self, system: &SystemParams) -> AnsatzParams {
        let mut a = AnsatzParams::from_system(system, self.x_d, self.x_m, self.dressing);
        a.phase_index = self.phase_index;
        if let Some(g) = self.gamma_line_rad_s {
            a.gamma_line = g;
        }
        a
    }
}

/// One run: a linear model plus optional simulation and fast-cavity sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub system: SystemParams,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub simulation: Option<SimulationSection>,
    #[serde(default)]
    pub fast_cavity: Option<FastCavitySection>,
}

impl RunConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<Vec<Warning>> {
        let warnings = self.system.validate()?;
        let a = &self.analysis;
        if a.truncation == 0 {
            return Err(Error::invalid("analysis.truncation", "must be >= 1"));
        }
        if a.grid_points < 16 {
            return Err(Error::invalid("analysis.grid_points", "must be >= 16"));
        }
        if !a.lo_phase_rad.is_finite() {
            return Err(Error::invalid("analysis.lo_phase_rad", "must be finite"));
        }
        if let Some(s) = &self.simulation {
            s.validate(&self.system)?;
        }
        if let Some(f) = &self.fast_cavity {
            f.ansatz(&self.system).validate()?;
        }
        Ok(warnings)
    }

    /// SHA-256 over the canonical JSON of every field except `name`.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { name: String::new(), ..self.clone() };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Returns a copy with one numeric field replaced.
    ///
    /// `field` is a JSON key path such as `system.omega_2_rad_s`; a bare key is
    /// looked up in `system`, then `simulation`, `simulation.trap`,
    /// `analysis` and `fast_cavity`.
    pub fn with_field(&self, field: &str, value: f64) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        let path = resolve_path(&doc, field).ok_or_else(|| Error::UnknownParameter(field.to_string()))?;
        let slot = path
            .iter()
            .try_fold(&mut doc, |v, k| v.get_mut(k.as_str()))
            .ok_or_else(|| Error::UnknownParameter(field.to_string()))?;
        *slot = match slot {
            Value::Number(n) if n.is_u64() || n.is_i64() => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::invalid(field, format!("expects a non-negative integer, got {value}")));
                }
                Value::from(value as u64)
            }
            Value::Number(_) | Value::Null => serde_json::Number::from_f64(value)
                .map(Value::Number)
                .ok_or_else(|| Error::invalid(field, "must be finite"))?,
            _ => return Err(Error::invalid(field, "is not numeric")),
        };
        let out: RunConfig = serde_json::from_value(doc).map_err(|e| Error::Parse(format!("{field}: {e}")))?;
        out.validate()?;
        Ok(out)
    }
}

const SEARCH_ORDER: [&[&str]; 5] =
    [&["system"], &["simulation"], &["simulation", "trap"], &["analysis"], &["fast_cavity"]];

fn resolve_path(doc: &Value, field: &str) -> Option<Vec<String>> {
    let parts: Vec<&str> = field.split('.').collect();
    let numeric = |v: &Value| v.is_number() || v.is_null();
    if parts.len() > 1 {
        let v = parts.iter().try_fold(doc, |v, k| v.get(k))?;
        return numeric(v).then(|| parts.iter().map(|s| s.to_string()).collect());
    }
    for prefix in SEARCH_ORDER {
        let Some(section) = prefix.iter().try_fold(doc, |v, k| v.get(k)) else {
            continue;
        };
        if let Some(v) = section.get(field) {
            if numeric(v) {
                let mut p: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
                p.push(field.to_string());
                return Some(p);
            }
        }
    }
    None
}

/// One sweep axis, `FIELD=v1,v2,…`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub field: String,
    pub values: Vec<f64>,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (field, list) =
            s.split_once('=').ok_or_else(|| Error::Parse(format!("sweep `{s}`: expected FIELD=v1,v2,...")))?;
        let field = field.trim();
        if field.is_empty() {
            return Err(Error::Parse(format!("sweep `{s}`: empty field name")));
        }
        let values = list
            .split(',')
            .map(|v| {
                let t = v.trim();
                t.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Parse(format!("sweep `{s}`: `{t}` is not a finite number")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { field: field.to_string(), values })
    }
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 6] = ["fig2_i", "fig2_ii", "fig2_iii", "fig2_iv", "fig3_quantum", "twin_peaks"];

/// Linewidth used by the shipped simulation sections; small enough that the
/// thermal amplitude stays in the harmonic part of the well.
pub const SIM_GAMMA_M: f64 = 0.05;

/// Optical damping of the period-averaged coupling, `⟨g²⟩ = 2ḡ²`.
fn mean_optical_damping(p: &SystemParams) -> f64 {
    (4.0 * p.g_bar * p.g_bar * eta(p.omega_m, p).re).max(0.0)
}

/// RMS of `2kx` for a thermal state cooled by the mean optical damping.
fn thermal_phase_rms(p: &SystemParams, trap: &TrapParams) -> f64 {
    let n = p.n_th * p.gamma_m / (p.gamma_m + mean_optical_damping(p));
    let x_zpf = (HBAR / (2.0 * trap.mass * p.omega_m)).sqrt();
    2.0 * trap.wavenumber() * x_zpf * (2.0 * n + 1.0).sqrt()
}

fn thermal_run(set: ThermalSet) -> RunConfig {
    let system = presets::thermal_system(set);
    let trap = presets::levitated_trap(set.well_index());
    RunConfig {
        name: format!("fig2_{}", set.name()),
        system,
        analysis: AnalysisSection::default(),
        simulation: Some(SimulationSection {
            trap,
            modulation_periods: default_periods(),
            gamma_m_rad_s: Some(SIM_GAMMA_M),
            dt_s: None,
            sample_every: None,
            discard_periods: None,
            noise: NoiseSwitches::default(),
            welch_segment: default_segment(),
        }),
        fast_cavity: Some(FastCavitySection {
            x_d: trap.drive_phase_amplitude(),
            x_m: thermal_phase_rms(&system, &trap),
            dressing: SpringDressing::Adiabatic,
            phase_index: PhaseIndex::Integrated,
            gamma_line_rad_s: Some(system.gamma_m + mean_optical_damping(&system)),
            max_harmonic: None,
        }),
    }
}

/// Shipped configuration by name.
pub fn preset(name: &str) -> Option<RunConfig> {
    let set = match name {
        "fig2_i" => Some(ThermalSet::I),
        "fig2_ii" => Some(ThermalSet::Ii),
        "fig2_iii" => Some(ThermalSet::Iii),
        "fig2_iv" => Some(ThermalSet::Iv),
        _ => None,
    };
    if let Some(set) = set {
        return Some(thermal_run(set));
    }
    match name {
        "fig3_quantum" => {
            let system = presets::quantum_system(1e-4, bose_occupancy(TWO_PI * 46e3, ROOM_TEMPERATURE));
            Some(RunConfig {
                name: name.into(),
                system,
                analysis: AnalysisSection::default(),
                simulation: None,
                fast_cavity: None,
            })
        }
        "twin_peaks" => Some(RunConfig {
            simulation: None,
            fast_cavity: None,
            analysis: AnalysisSection { grid_points: 16384, ..AnalysisSection::default() },
            name: name.into(),
            system: presets::twin_peaks(),
            ..thermal_run(ThermalSet::I)
        }),
        _ => None,
    }
}
