//! Flat key-value configuration files with sections.
//!
//! Grammar (one entry per line):
//!
//! ```text
//! # comment                      blank lines and #-comments are skipped
//! [section]                      section header
//! key = value                    entry; value is an integer, float,
//!                                boolean (true/false) or bare string
//! ```
//!
//! Keys are addressed as `section.key`. Unknown keys are preserved (and
//! echoed into the run manifest) so configs stay forward compatible.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Parsed config: ordered `section.key -> raw value`.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<ConfigMap> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(Error::Config {
                    line: idx + 1,
                    message: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: idx + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config { line: idx + 1, message: "empty key".into() });
            }
            let full =
                if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            entries.insert(full, value.trim().to_string());
        }
        Ok(ConfigMap { entries })
    }

    pub fn load(path: &Path) -> Result<ConfigMap> {
        ConfigMap::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config {
                line: 0,
                message: format!("{key}: expected a number, got `{v}`"),
            }),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config {
                line: 0,
                message: format!("{key}: expected an integer, got `{v}`"),
            }),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config {
                line: 0,
                message: format!("{key}: expected an integer, got `{v}`"),
            }),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Error::Config {
                line: 0,
                message: format!("{key}: expected true/false, got `{v}`"),
            }),
        }
    }

    /// Entries in deterministic order, for the manifest echo.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Fully resolved experiment parameters.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub surface_kind: String,
    pub sphere_radius: f64,
    pub torus_major: f64,
    pub torus_minor: f64,
    /// Initial mesh size for `build_initial_mesh`.
    pub target_h: f64,
    /// Refinement levels for convergence studies.
    pub levels: usize,
    pub graded: bool,
    pub c_p: f64,
    pub grading_h: f64,
    pub include_m4: bool,
    pub max_sweeps: usize,
    pub min_h: f64,
    pub far_cap: f64,
    pub solver_tol: f64,
    pub max_iter_factor: usize,
    /// Initial disk rings for the ridge studies.
    pub ridge_rings: usize,
    /// Reference disk rings; 0 picks 64x the matched uniform resolution.
    pub reference_rings: usize,
    pub out_dir: String,
    /// Write wall-clock timings into CSV rows (off keeps outputs
    /// byte-stable across reruns).
    pub timings: bool,
    pub seed: u64,
    pub assert_budgets: bool,
    /// Verbatim config for the manifest.
    pub echo: ConfigMap,
}

impl ExperimentConfig {
    pub fn from_map(map: ConfigMap) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            surface_kind: map.str_or("surface.kind", "sphere"),
            sphere_radius: map.f64_or("surface.radius", 1.0)?,
            torus_major: map.f64_or("surface.major_radius", 1.0)?,
            torus_minor: map.f64_or("surface.minor_radius", 0.4)?,
            target_h: map.f64_or("mesh.target_h", 0.5)?,
            levels: map.usize_or("mesh.levels", 4)?,
            graded: map.bool_or("grading.enabled", false)?,
            c_p: map.f64_or("grading.cp", 1.0)?,
            grading_h: map.f64_or("grading.h", 0.7)?,
            include_m4: map.bool_or("grading.include_m4", true)?,
            max_sweeps: map.usize_or("grading.max_sweeps", 60)?,
            min_h: map.f64_or("grading.min_h", 1e-6)?,
            far_cap: map.f64_or("grading.far_cap", 1.0)?,
            solver_tol: map.f64_or("solver.tolerance", 1e-10)?,
            max_iter_factor: map.usize_or("solver.max_iter_factor", 10)?,
            ridge_rings: map.usize_or("ridge.rings", 6)?,
            reference_rings: map.usize_or("ridge.reference_rings", 0)?,
            out_dir: map.str_or("output.directory", "out"),
            timings: map.bool_or("output.timings", false)?,
            seed: map.u64_or("run.seed", 42)?,
            assert_budgets: map.bool_or("run.assert_budgets", true)?,
            echo: map,
        };
        if cfg.levels == 0 {
            return Err(Error::Config { line: 0, message: "mesh.levels must be >= 1".into() });
        }
        if !(cfg.target_h > 0.0 && cfg.grading_h > 0.0 && cfg.min_h > 0.0) {
            return Err(Error::Config { line: 0, message: "lengths must be positive".into() });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        Self::from_map(ConfigMap::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_types() {
        let text = "\n# a comment\n[surface]\nkind = ridge\n\n[mesh]\ntarget_h = 0.25\nlevels = 3\n\n[grading]\nenabled = true\ncp = 0.5\n";
        let map = ConfigMap::parse(text).unwrap();
        let cfg = ExperimentConfig::from_map(map).unwrap();
        assert_eq!(cfg.surface_kind, "ridge");
        assert_eq!(cfg.levels, 3);
        assert!(cfg.graded);
        assert_eq!(cfg.c_p, 0.5);
        // defaults survive
        assert_eq!(cfg.solver_tol, 1e-10);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(ConfigMap::parse("[mesh\n").is_err());
        assert!(ConfigMap::parse("just words\n").is_err());
        let map = ConfigMap::parse("[mesh]\nlevels = three\n").unwrap();
        assert!(ExperimentConfig::from_map(map).is_err());
    }

    #[test]
    fn overrides_win() {
        let mut map = ConfigMap::parse("[grading]\ncp = 1.0\n").unwrap();
        map.set("grading.cp", 2.5);
        let cfg = ExperimentConfig::from_map(map).unwrap();
        assert_eq!(cfg.c_p, 2.5);
    }
}
