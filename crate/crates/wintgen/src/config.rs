//! Run configuration: sectioned key-value files mapping onto an
//! `ImmersionSpec` plus grid and check settings. Unknown keys are hard
//! errors; omitted options fall back to the documented defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ImmersionSpec, SpecOptions};

pub const KNOWN_SUITES: &[&str] = &[
    "parser",
    "jets",
    "geometry",
    "ddvv",
    "moebius",
    "constructions",
    "invariance",
    "all",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionSection {
    pub variables: Vec<String>,
    pub components: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub grid: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSection {
    pub jet_order: Option<usize>,
    pub fd_step: Option<f64>,
    pub tol_exact: Option<f64>,
    pub tol_fd_constant: Option<f64>,
    pub ambient_c: Option<f64>,
}

impl Default for OptionsSection {
    fn default() -> Self {
        OptionsSection {
            jet_order: None,
            fd_step: None,
            tol_exact: None,
            tol_fd_constant: None,
            ambient_c: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default)]
    pub suites: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub immersion: ImmersionSection,
    pub domain: DomainSection,
    #[serde(default)]
    pub options: OptionsSection,
    #[serde(default)]
    pub checks: ChecksSection,
}

impl RunConfig {
    /// Resolved numeric options with defaults applied.
    pub fn spec_options(&self) -> SpecOptions {
        let d = SpecOptions::default();
        SpecOptions {
            jet_order: self.options.jet_order.or(d.jet_order),
            fd_step: self.options.fd_step.unwrap_or(d.fd_step),
            tol_exact: self.options.tol_exact.unwrap_or(d.tol_exact),
            tol_fd_constant: self.options.tol_fd_constant.unwrap_or(d.tol_fd_constant),
            ambient_c: self.options.ambient_c.unwrap_or(d.ambient_c),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.immersion.variables.len();
        if self.domain.min.len() != m || self.domain.max.len() != m {
            return Err(Error::Config(format!(
                "domain min/max must have {m} entries to match the variables"
            )));
        }
        if self.domain.grid.len() != m {
            return Err(Error::Config(format!("grid must have {m} counts")));
        }
        for (i, &c) in self.domain.grid.iter().enumerate() {
            if c < 2 {
                return Err(Error::Config(format!(
                    "grid count on axis {i} must be >= 2, got {c}"
                )));
            }
        }
        for i in 0..m {
            if !(self.domain.min[i] < self.domain.max[i]) {
                return Err(Error::Config(format!("domain axis {i}: min must be < max")));
            }
        }
        let opts = self.spec_options();
        if !(opts.fd_step > 0.0) || !(opts.tol_exact > 0.0) || !(opts.tol_fd_constant > 0.0) {
            return Err(Error::Config("tolerances and fd_step must be > 0".into()));
        }
        for s in &self.checks.suites {
            if !KNOWN_SUITES.contains(&s.as_str()) {
                return Err(Error::UnknownName(s.clone()));
            }
        }
        Ok(())
    }

    /// Build the immersion described by this config.
    pub fn to_spec(&self) -> Result<ImmersionSpec> {
        self.validate()?;
        let vars: Vec<&str> = self.immersion.variables.iter().map(|s| s.as_str()).collect();
        let comps: Vec<&str> = self.immersion.components.iter().map(|s| s.as_str()).collect();
        let mut spec =
            ImmersionSpec::from_strings(&vars, &comps, &self.domain.min, &self.domain.max)?;
        spec.options = self.spec_options();
        Ok(spec)
    }

    pub fn to_string_pretty(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize: {e}")))
    }
}

/// A config echoing `spec` with the given grid counts, suitable for `check`.
pub fn config_for_spec(spec: &ImmersionSpec, grid: Vec<usize>) -> RunConfig {
    let d = SpecOptions::default();
    let o = &spec.options;
    RunConfig {
        immersion: ImmersionSection {
            variables: spec.variables.clone(),
            components: spec.components.iter().map(|c| c.to_string()).collect(),
        },
        domain: DomainSection {
            min: spec.domain_min.clone(),
            max: spec.domain_max.clone(),
            grid,
        },
        options: OptionsSection {
            jet_order: o.jet_order,
            fd_step: (o.fd_step != d.fd_step).then_some(o.fd_step),
            tol_exact: (o.tol_exact != d.tol_exact).then_some(o.tol_exact),
            tol_fd_constant: (o.tol_fd_constant != d.tol_fd_constant)
                .then_some(o.tol_fd_constant),
            ambient_c: (o.ambient_c != d.ambient_c).then_some(o.ambient_c),
        },
        checks: ChecksSection::default(),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("read {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [immersion]
        variables = ["u", "v"]
        components = ["u", "v", "u^2 - v^2", "2*u*v"]

        [domain]
        min = [-1.0, -1.0]
        max = [1.0, 1.0]
        grid = [5, 5]
    "#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        let opts = cfg.spec_options();
        assert_eq!(opts.jet_order, None);
        assert_eq!(opts.fd_step, 1e-3);
        assert_eq!(opts.tol_exact, 1e-8);
        assert_eq!(opts.ambient_c, 0.0);
        let spec = cfg.to_spec().unwrap();
        assert_eq!(spec.dim(), 2);
        assert_eq!(spec.ambient_dim(), 4);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MINIMAL.to_string() + "\n[options]\ntol_exat = 1e-8\n";
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tol_exat"), "message was: {msg}");
    }

    #[test]
    fn small_grid_count_is_rejected() {
        let text = MINIMAL.replace("grid = [5, 5]", "grid = [1, 5]");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains(">= 2"));
    }

    #[test]
    fn unknown_suite_is_rejected() {
        let text = MINIMAL.to_string() + "\n[checks]\nsuites = [\"ddvvv\"]\n";
        match parse_config(&text) {
            Err(Error::UnknownName(n)) => assert_eq!(n, "ddvvv"),
            other => panic!("expected UnknownName, got {other:?}"),
        }
    }

    #[test]
    fn serialization_round_trips_idempotently() {
        let cfg = parse_config(MINIMAL).unwrap();
        let once = cfg.to_string_pretty().unwrap();
        let reparsed = parse_config(&once).unwrap();
        let twice = reparsed.to_string_pretty().unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn config_for_spec_is_ingestible() {
        let cfg = parse_config(MINIMAL).unwrap();
        let spec = cfg.to_spec().unwrap();
        let echo = config_for_spec(&spec, vec![3, 3]);
        let text = echo.to_string_pretty().unwrap();
        let back = parse_config(&text).unwrap().to_spec().unwrap();
        assert_eq!(back.variables, spec.variables);
        let x = [0.37, -0.62];
        assert!((back.eval(&x).unwrap() - spec.eval(&x).unwrap()).norm() < 1e-15);
    }
}
