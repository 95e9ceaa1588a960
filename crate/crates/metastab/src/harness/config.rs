//! Line-oriented scenario files: `[section]` headers, `key = value` pairs,
//! `#` comments. A repeated `[flux]` header adds another flux model.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{invalid, Error, Result};
use crate::flux::FluxModel;
use crate::hyperbolic::Preset;

/// Largest viscosity a scenario may request.
pub const MAX_EPSILON: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Module {
    None,
    Manifold,
    Spectrum,
    Reduce,
    Simulate,
    Figure1,
    Hyperbolic,
    Compare,
    Invariants,
}

impl Module {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "none" => Self::None,
            "manifold" => Self::Manifold,
            "spectrum" => Self::Spectrum,
            "reduce" => Self::Reduce,
            "simulate" => Self::Simulate,
            "figure1" => Self::Figure1,
            "hyperbolic" => Self::Hyperbolic,
            "compare" => Self::Compare,
            "invariants" => Self::Invariants,
            other => return invalid(format!("unknown module '{other}'")),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Manifold => "manifold",
            Self::Spectrum => "spectrum",
            Self::Reduce => "reduce",
            Self::Simulate => "simulate",
            Self::Figure1 => "figure1",
            Self::Hyperbolic => "hyperbolic",
            Self::Compare => "compare",
            Self::Invariants => "invariants",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxSpec {
    pub label: String,
    pub kind: String,
    pub u_minus: f64,
    pub u_plus: Option<f64>,
    pub coeffs: Vec<f64>,
}

impl FluxSpec {
    pub fn build(&self) -> Result<FluxModel> {
        FluxModel::from_name(&self.kind, self.u_minus, self.u_plus, &self.coeffs)
    }
}

/// Discretization and run-length settings; unset entries take module defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub intervals: Option<usize>,
    pub modes: Option<usize>,
    pub knots: usize,
    pub cells: usize,
    pub t_final: Option<f64>,
    pub track_interval: f64,
    pub stop_distance: f64,
    pub snapshots: Vec<f64>,
    /// Zero-based mode carrying the initial perturbation.
    pub mode: usize,
    pub amplitude: f64,
    /// Extra layer positions drawn from the seed.
    pub random_points: usize,
    pub steady_intervals: usize,
    pub steady_steps: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            intervals: None,
            modes: None,
            knots: 64,
            cells: 400,
            t_final: None,
            track_interval: 0.5,
            stop_distance: 0.0,
            snapshots: Vec::new(),
            mode: 1,
            amplitude: 0.01,
            random_points: 0,
            steady_intervals: 4096,
            steady_steps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub module: Module,
    pub seed: u64,
    pub fluxes: Vec<FluxSpec>,
    pub ell: f64,
    pub epsilons: Vec<f64>,
    pub xi0: Vec<f64>,
    pub presets: Vec<String>,
    pub poly: Vec<f64>,
    pub numerics: Numerics,
    pub tolerances: BTreeMap<String, f64>,
    pub out: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            module: Module::None,
            seed: 0,
            fluxes: Vec::new(),
            ell: 1.0,
            epsilons: Vec::new(),
            xi0: vec![0.0],
            presets: Vec::new(),
            poly: Vec::new(),
            numerics: Numerics::default(),
            tolerances: BTreeMap::new(),
            out: None,
        }
    }
}

fn num(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Validation(format!("{key}: '{v}' is not a finite number")))
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::Validation(format!("{key}: '{v}' is not a non-negative integer")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn words(v: &str) -> Vec<String> {
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Validation(format!("line {}: {msg}", lineno + 1));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at(format!("malformed header '{line}'")))?
                    .trim();
                if !["scenario", "flux", "domain", "initial", "numerics", "tolerances"].contains(&name) {
                    return Err(at(format!("unknown section [{name}]")));
                }
                if name == "flux" {
                    cfg.fluxes.push(FluxSpec {
                        label: String::new(),
                        kind: "burgers".into(),
                        u_minus: 1.0,
                        u_plus: None,
                        coeffs: Vec::new(),
                    });
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(&section, key, value).map_err(|e| at(e.to_string()))?;
        }
        cfg.finish()?;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<()> {
        let n = &mut self.numerics;
        match (section, key) {
            ("scenario", "name") => self.name = v.to_string(),
            ("scenario", "module") => self.module = Module::from_name(v)?,
            ("scenario", "seed") => {
                self.seed = v
                    .parse()
                    .map_err(|_| Error::Validation(format!("seed: '{v}' is not an integer")))?
            }
            ("scenario", "out") => self.out = Some(PathBuf::from(v)),
            ("flux", _) => {
                let f = self.fluxes.last_mut().expect("flux section opened");
                match key {
                    "label" => f.label = v.to_string(),
                    "kind" => f.kind = v.to_string(),
                    "u_minus" => f.u_minus = num(key, v)?,
                    "u_plus" => f.u_plus = Some(num(key, v)?),
                    "coeffs" => f.coeffs = list(key, v)?,
                    _ => return invalid(format!("unknown key '{key}' in [flux]")),
                }
            }
            ("domain", "ell") => self.ell = num(key, v)?,
            ("domain", "epsilon") => self.epsilons = list(key, v)?,
            ("initial", "xi0") => self.xi0 = list(key, v)?,
            ("initial", "preset") => self.presets = words(v),
            ("initial", "poly") => self.poly = list(key, v)?,
            ("numerics", "intervals") => n.intervals = Some(count(key, v)?),
            ("numerics", "modes") => n.modes = Some(count(key, v)?),
            ("numerics", "knots") => n.knots = count(key, v)?,
            ("numerics", "cells") => n.cells = count(key, v)?,
            ("numerics", "t_final") => n.t_final = Some(num(key, v)?),
            ("numerics", "track_interval") => n.track_interval = num(key, v)?,
            ("numerics", "stop_distance") => n.stop_distance = num(key, v)?,
            ("numerics", "snapshots") => n.snapshots = list(key, v)?,
            ("numerics", "mode") => n.mode = count(key, v)?,
            ("numerics", "amplitude") => n.amplitude = num(key, v)?,
            ("numerics", "random_points") => n.random_points = count(key, v)?,
            ("numerics", "steady_intervals") => n.steady_intervals = count(key, v)?,
            ("numerics", "steady_steps") => n.steady_steps = count(key, v)?,
            ("tolerances", _) => {
                self.tolerances.insert(key.to_string(), num(key, v)?);
            }
            ("", _) => return invalid(format!("key '{key}' outside any section")),
            _ => return invalid(format!("unknown key '{key}' in [{section}]")),
        }
        Ok(())
    }

    /// Fills flux labels and checks cross-field constraints.
    pub fn finish(&mut self) -> Result<()> {
        if self.fluxes.is_empty() {
            self.fluxes.push(FluxSpec {
                label: String::new(),
                kind: "burgers".into(),
                u_minus: 1.0,
                u_plus: None,
                coeffs: Vec::new(),
            });
        }
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for f in &mut self.fluxes {
            if f.label.is_empty() {
                f.label = f.kind.clone();
            }
            let c = seen.entry(f.label.clone()).or_insert(0);
            *c += 1;
            if *c > 1 {
                f.label = format!("{}-{c}", f.label);
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0) {
            return invalid(format!("ell must be positive, got {}", self.ell));
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e <= MAX_EPSILON) {
                return invalid(format!("epsilon {e} outside (0, {MAX_EPSILON}]"));
            }
        }
        for &x in &self.xi0 {
            if !(x.abs() < self.ell) {
                return invalid(format!("xi0 = {x} outside (-ell, ell)"));
            }
        }
        for f in &self.fluxes {
            f.build()?;
        }
        for p in &self.presets {
            if !["all", "manifold", "steady", "poly"].contains(&p.as_str()) {
                Preset::from_name(p)?;
            }
        }
        let needs_eps = !matches!(self.module, Module::None | Module::Hyperbolic);
        if needs_eps && self.epsilons.is_empty() {
            return invalid(format!("module {} needs at least one epsilon", self.module.name()));
        }
        if self.numerics.track_interval <= 0.0 || self.numerics.stop_distance < 0.0 {
            return invalid("track_interval must be positive and stop_distance non-negative");
        }
        Ok(())
    }

    /// Tolerance by name, or `default` when the file leaves it unset.
    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_lists() {
        let cfg = ScenarioConfig::parse(
            "# sweep\n[scenario]\nname = s\nmodule = spectrum\nseed = 3\n\n[flux]\nkind = burgers\n\
             [flux]\nkind = poly\ncoeffs = 0, 0, 1, -1, 0.4\nu_minus = 1\nu_plus = -0.5\n\
             [domain]\nell = 1\nepsilon = 0.2, 0.1  # two\n[tolerances]\nslope = 0.15\n",
        )
        .unwrap();
        assert_eq!(cfg.module, Module::Spectrum);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.epsilons, vec![0.2, 0.1]);
        assert_eq!(cfg.fluxes.len(), 2);
        assert_eq!(cfg.fluxes[1].coeffs.len(), 5);
        assert_eq!(cfg.tol("slope", 0.0), 0.15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ScenarioConfig::parse("[domain]\nepsilon = 0.6\n").is_err());
        assert!(ScenarioConfig::parse("[bogus]\n").is_err());
        assert!(ScenarioConfig::parse("name = x\n").is_err());
        assert!(ScenarioConfig::parse("[scenario]\nmodule = spectrum\n").is_err());
        assert!(ScenarioConfig::parse("[initial]\npreset = zigzag\n").is_err());
        assert!(ScenarioConfig::parse("[domain]\nepsilon = abc\n").is_err());
    }

    #[test]
    fn duplicate_labels_are_numbered() {
        let cfg = ScenarioConfig::parse("[flux]\nkind = burgers\n[flux]\nkind = burgers\n").unwrap();
        assert_eq!(cfg.fluxes[0].label, "burgers");
        assert_eq!(cfg.fluxes[1].label, "burgers-2");
    }
}
