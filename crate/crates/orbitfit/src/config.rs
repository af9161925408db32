//! `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, keys are case-sensitive.
//! Unknown keys are rejected. Keys left out take scenario-specific (and for
//! a few thresholds, mode-specific) defaults, so a resolved config always
//! echoes every knob it ran with.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use orbitfit_core::dynamics::ObservationMode;
use orbitfit_core::potential::MAX_BAND;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("{key}: {msg}")]
    Value { key: &'static str, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    TorusReconstruct,
    SphereClosed,
    LowEnergy,
    T3Underdetermined,
    GronwallCheck,
    ConformalReconstruct,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::TorusReconstruct,
        Scenario::SphereClosed,
        Scenario::LowEnergy,
        Scenario::T3Underdetermined,
        Scenario::GronwallCheck,
        Scenario::ConformalReconstruct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::TorusReconstruct => "torus-reconstruct",
            Scenario::SphereClosed => "sphere-closed",
            Scenario::LowEnergy => "low-energy",
            Scenario::T3Underdetermined => "t3-underdetermined",
            Scenario::GronwallCheck => "gronwall-check",
            Scenario::ConformalReconstruct => "conformal-reconstruct",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

pub fn parse_mode(s: &str) -> Result<ObservationMode, String> {
    match s {
        "exact" => Ok(ObservationMode::Exact),
        "positions-only" => Ok(ObservationMode::PositionsOnly),
        _ => Err(format!(
            "unknown mode `{s}` (expected exact or positions-only)"
        )),
    }
}

/// Every knob of a run. See [`KEYS`] for the textual names.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: u64,
    /// Sampling interval of trajectories and observations.
    pub dt: f64,
    /// Integrator steps per sampling interval.
    pub substeps: usize,
    pub t_final: f64,
    pub kmax: u32,
    pub amplitude: f64,
    /// `E = energy_factor · max(C₀, 1)`.
    pub energy_factor: f64,
    pub mode: ObservationMode,
    pub output_dir: PathBuf,
    /// Observation thinning before fitting.
    pub stride: usize,
    /// Row thinning of the emitted trajectory CSV.
    pub csv_stride: usize,
    pub drift_tol: f64,
    pub rank_tol: f64,
    pub eps_close: f64,
    pub t_max: f64,
    pub section_radius: f64,
    pub period_floor: f64,
    pub grid_n: usize,
    pub circle_radius: f64,
    /// Seeds (sphere), family members (gronwall) or orbit starts (detect).
    pub ensemble: usize,
    pub compare_energy_factor: f64,
    pub sup_tol: f64,
    pub coef_tol: f64,
    pub period_tol: f64,
    pub occupancy_max: f64,
    pub condition_min: f64,
    pub condition_max: f64,
    pub null_tol: f64,
    pub agreement_tol: f64,
    pub speed_tol: f64,
}

/// Recognised keys, in emission order.
pub const KEYS: [&str; 31] = [
    "scenario",
    "seed",
    "dt",
    "substeps",
    "t_final",
    "kmax",
    "amplitude",
    "energy_factor",
    "mode",
    "output_dir",
    "stride",
    "csv_stride",
    "drift_tol",
    "rank_tol",
    "eps_close",
    "t_max",
    "section_radius",
    "period_floor",
    "grid_n",
    "circle_radius",
    "ensemble",
    "compare_energy_factor",
    "sup_tol",
    "coef_tol",
    "period_tol",
    "occupancy_max",
    "condition_min",
    "condition_max",
    "null_tol",
    "agreement_tol",
    "speed_tol",
];

impl ScenarioConfig {
    /// Defaults for `scenario` observed in `mode`.
    pub fn defaults(scenario: Scenario, mode: ObservationMode) -> Self {
        let exact = mode == ObservationMode::Exact;
        let mut c = ScenarioConfig {
            scenario,
            seed: 1,
            dt: 1e-3,
            substeps: 1,
            t_final: 100.0,
            kmax: 3,
            amplitude: 1.0,
            energy_factor: 2.0,
            mode,
            output_dir: PathBuf::from("out").join(scenario.as_str()),
            stride: 10,
            csv_stride: 10,
            drift_tol: 1e-6,
            rank_tol: 1e-10,
            eps_close: 1e-6,
            t_max: 1e3,
            section_radius: 0.1,
            period_floor: 0.5,
            grid_n: 64,
            circle_radius: 0.1,
            ensemble: 1,
            compare_energy_factor: 2.0,
            sup_tol: if exact { 1e-6 } else { 1e-2 },
            coef_tol: 1e-8,
            period_tol: 1e-6,
            occupancy_max: 0.6,
            condition_min: 1e8,
            condition_max: 1e4,
            null_tol: 1e-8,
            agreement_tol: 1e-8,
            speed_tol: 1e-8,
        };
        match scenario {
            Scenario::TorusReconstruct => {
                c.substeps = 8;
            }
            Scenario::SphereClosed => {
                c.energy_factor = 1.0;
                c.ensemble = 100;
                c.kmax = 1;
            }
            Scenario::LowEnergy => {
                c.energy_factor = 0.5;
            }
            Scenario::T3Underdetermined => {
                c.kmax = 2;
                c.energy_factor = 1.0;
            }
            Scenario::GronwallCheck => {
                c.kmax = 1;
                c.ensemble = 20;
                c.energy_factor = 1.0;
                c.period_tol = 1e-2;
            }
            Scenario::ConformalReconstruct => {
                c.dt = 1e-4;
                c.kmax = 2;
                c.amplitude = 0.3;
                c.energy_factor = 1.0;
                c.coef_tol = 1e-6;
            }
        }
        c
    }

    /// Integrator step.
    pub fn step(&self) -> f64 {
        self.dt / self.substeps as f64
    }

    /// The fully resolved config in the input grammar.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// `(key, value)` pairs in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let f = |x: f64| format!("{x:?}");
        vec![
            ("scenario", self.scenario.to_string()),
            ("seed", self.seed.to_string()),
            ("dt", f(self.dt)),
            ("substeps", self.substeps.to_string()),
            ("t_final", f(self.t_final)),
            ("kmax", self.kmax.to_string()),
            ("amplitude", f(self.amplitude)),
            ("energy_factor", f(self.energy_factor)),
            ("mode", self.mode.as_str().to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("stride", self.stride.to_string()),
            ("csv_stride", self.csv_stride.to_string()),
            ("drift_tol", f(self.drift_tol)),
            ("rank_tol", f(self.rank_tol)),
            ("eps_close", f(self.eps_close)),
            ("t_max", f(self.t_max)),
            ("section_radius", f(self.section_radius)),
            ("period_floor", f(self.period_floor)),
            ("grid_n", self.grid_n.to_string()),
            ("circle_radius", f(self.circle_radius)),
            ("ensemble", self.ensemble.to_string()),
            ("compare_energy_factor", f(self.compare_energy_factor)),
            ("sup_tol", f(self.sup_tol)),
            ("coef_tol", f(self.coef_tol)),
            ("period_tol", f(self.period_tol)),
            ("occupancy_max", f(self.occupancy_max)),
            ("condition_min", f(self.condition_min)),
            ("condition_max", f(self.condition_max)),
            ("null_tol", f(self.null_tol)),
            ("agreement_tol", f(self.agreement_tol)),
            ("speed_tol", f(self.speed_tol)),
        ]
    }
}

/// Explicit assignments, before defaults are filled in. Remembers the line
/// each key came from so errors can point at it; line 0 means "set
/// programmatically" (e.g. by a command-line flag).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<&'static str, (String, usize)>,
}

fn known_key(key: &str) -> Option<&'static str> {
    KEYS.iter().copied().find(|k| *k == key)
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Line {
                    line: line_no,
                    msg: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(key) = known_key(key) else {
                return Err(ConfigError::Line {
                    line: line_no,
                    msg: format!("unknown key `{key}`"),
                });
            };
            if value.is_empty() {
                return Err(ConfigError::Line {
                    line: line_no,
                    msg: format!("missing value for `{key}`"),
                });
            }
            if raw.entries.contains_key(key) {
                return Err(ConfigError::Line {
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            raw.entries.insert(key, (value.to_string(), line_no));
        }
        Ok(raw)
    }

    /// Sets (or overrides) a key as if given on line 0.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        let k = known_key(key).ok_or_else(|| ConfigError::Line {
            line: 0,
            msg: format!("unknown key `{key}`"),
        })?;
        self.entries.insert(k, (value.into(), 0));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn fail(&self, key: &'static str, msg: String) -> ConfigError {
        match self.entries.get(key) {
            Some((_, line)) if *line > 0 => ConfigError::Line { line: *line, msg },
            _ => ConfigError::Value { key, msg },
        }
    }

    fn value<T: FromStr>(&self, key: &'static str, slot: &mut T) -> Result<(), ConfigError> {
        if let Some((v, _)) = self.entries.get(key) {
            *slot = v
                .parse()
                .map_err(|_| self.fail(key, format!("`{v}` is not a valid value for `{key}`")))?;
        }
        Ok(())
    }

    /// Fills defaults and validates.
    pub fn resolve(&self) -> Result<ScenarioConfig, ConfigError> {
        let scenario = match self.entries.get("scenario") {
            Some((v, _)) => v.parse().map_err(|e: String| self.fail("scenario", e))?,
            None => Scenario::TorusReconstruct,
        };
        let mode = match self.entries.get("mode") {
            Some((v, _)) => parse_mode(v).map_err(|e| self.fail("mode", e))?,
            None => ObservationMode::Exact,
        };
        let mut c = ScenarioConfig::defaults(scenario, mode);
        self.value("seed", &mut c.seed)?;
        self.value("dt", &mut c.dt)?;
        self.value("substeps", &mut c.substeps)?;
        self.value("t_final", &mut c.t_final)?;
        self.value("kmax", &mut c.kmax)?;
        self.value("amplitude", &mut c.amplitude)?;
        self.value("energy_factor", &mut c.energy_factor)?;
        if let Some((v, _)) = self.entries.get("output_dir") {
            c.output_dir = PathBuf::from(v);
        }
        self.value("stride", &mut c.stride)?;
        self.value("csv_stride", &mut c.csv_stride)?;
        self.value("drift_tol", &mut c.drift_tol)?;
        self.value("rank_tol", &mut c.rank_tol)?;
        self.value("eps_close", &mut c.eps_close)?;
        self.value("t_max", &mut c.t_max)?;
        self.value("section_radius", &mut c.section_radius)?;
        self.value("period_floor", &mut c.period_floor)?;
        self.value("grid_n", &mut c.grid_n)?;
        self.value("circle_radius", &mut c.circle_radius)?;
        self.value("ensemble", &mut c.ensemble)?;
        self.value("compare_energy_factor", &mut c.compare_energy_factor)?;
        self.value("sup_tol", &mut c.sup_tol)?;
        self.value("coef_tol", &mut c.coef_tol)?;
        self.value("period_tol", &mut c.period_tol)?;
        self.value("occupancy_max", &mut c.occupancy_max)?;
        self.value("condition_min", &mut c.condition_min)?;
        self.value("condition_max", &mut c.condition_max)?;
        self.value("null_tol", &mut c.null_tol)?;
        self.value("agreement_tol", &mut c.agreement_tol)?;
        self.value("speed_tol", &mut c.speed_tol)?;
        self.validate(&c)?;
        Ok(c)
    }

    fn validate(&self, c: &ScenarioConfig) -> Result<(), ConfigError> {
        let positive = [
            ("dt", c.dt),
            ("t_final", c.t_final),
            ("energy_factor", c.energy_factor),
            ("drift_tol", c.drift_tol),
            ("eps_close", c.eps_close),
            ("t_max", c.t_max),
            ("section_radius", c.section_radius),
            ("period_floor", c.period_floor),
            ("circle_radius", c.circle_radius),
            ("compare_energy_factor", c.compare_energy_factor),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                let key = KEYS.iter().copied().find(|k| *k == key).unwrap_or("dt");
                return Err(self.fail(key, format!("`{key}` must be positive and finite")));
            }
        }
        if !(c.amplitude.is_finite() && c.amplitude >= 0.0) {
            return Err(self.fail("amplitude", "`amplitude` must be nonnegative".into()));
        }
        if !(c.rank_tol.is_finite() && c.rank_tol >= 0.0) {
            return Err(self.fail("rank_tol", "`rank_tol` must be nonnegative".into()));
        }
        if c.t_final < c.dt {
            return Err(self.fail("t_final", "`t_final` must be at least one step".into()));
        }
        if c.kmax == 0 || c.kmax > MAX_BAND {
            return Err(self.fail("kmax", format!("`kmax` must lie in 1..={MAX_BAND}")));
        }
        for (key, v) in [
            ("substeps", c.substeps),
            ("stride", c.stride),
            ("csv_stride", c.csv_stride),
            ("grid_n", c.grid_n),
            ("ensemble", c.ensemble),
        ] {
            if v == 0 {
                let key = KEYS.iter().copied().find(|k| *k == key).unwrap_or("stride");
                return Err(self.fail(key, format!("`{key}` must be at least 1")));
            }
        }
        match c.scenario {
            Scenario::LowEnergy if c.energy_factor >= 1.0 => Err(self.fail(
                "energy_factor",
                "low-energy needs energy_factor < 1 (it deliberately runs below the gate)".into(),
            )),
            Scenario::TorusReconstruct if c.energy_factor < 1.0 => Err(self.fail(
                "energy_factor",
                "torus-reconstruct needs energy_factor >= 1 (E >= C0)".into(),
            )),
            Scenario::GronwallCheck if c.ensemble < 2 => Err(self.fail(
                "ensemble",
                "gronwall-check needs at least two family members".into(),
            )),
            _ => Ok(()),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    RawConfig::parse(text)?.resolve()
}
