//! Run configuration: a key=value config file, environment overrides, and
//! the resolved-config dump written next to every run's outputs.
//!
//! Precedence, lowest to highest: built-in defaults, config file,
//! `HOMEVAL_ENDPOINT` / `HOMEVAL_SEED` environment variables, command-line
//! flags. Unknown config keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use homeval::domain::Axis;
use homeval::judge::EndpointConfig;
use homeval::scoring::WeightTable;

use crate::CliError;

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub endpoint: EndpointConfig,
    pub weights: WeightTable,
    pub n_runs: u32,
    pub total: usize,
    pub concurrent_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            endpoint: EndpointConfig::default(),
            weights: WeightTable::default(),
            n_runs: 1,
            total: 1000,
            concurrent_fraction: 0.70,
        }
    }
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "config line {} is not `key = value`: {line:?}",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse::<T>()
        .map_err(|_| CliError::Config(format!("config key {key}: bad value {value:?}")))
}

impl RunConfig {
    /// Loads a config file over the defaults. Unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::default();
        config.apply_kv(&parse_kv(&text)?)?;
        Ok(config)
    }

    fn apply_kv(&mut self, map: &BTreeMap<String, String>) -> Result<(), CliError> {
        for (key, value) in map {
            match key.as_str() {
                "seed" => self.seed = parse_num(key, value)?,
                "eval.n_runs" => self.n_runs = parse_num(key, value)?,
                "gen.total" => self.total = parse_num(key, value)?,
                "gen.concurrent_fraction" => self.concurrent_fraction = parse_num(key, value)?,
                "endpoint.base_url" => self.endpoint.base_url = value.clone(),
                "endpoint.path" => self.endpoint.path = value.clone(),
                "endpoint.model" => self.endpoint.model_name = value.clone(),
                "endpoint.timeout_ms" => self.endpoint.timeout_ms = parse_num(key, value)?,
                "endpoint.max_in_flight" => self.endpoint.max_in_flight = parse_num(key, value)?,
                "endpoint.retries" => self.endpoint.retries = parse_num(key, value)?,
                "endpoint.deterministic" => self.endpoint.deterministic = parse_num(key, value)?,
                _ => {
                    if let Some(axis_key) = key.strip_prefix("weights.") {
                        let axis: Axis = axis_key.parse().map_err(|_| {
                            CliError::Config(format!("config key {key}: unknown axis"))
                        })?;
                        let weight: f64 = parse_num(key, value)?;
                        if weight <= 0.0 {
                            return Err(CliError::Config(format!(
                                "config key {key}: weight must be positive"
                            )));
                        }
                        self.weights.weights.insert(axis, weight);
                    } else {
                        return Err(CliError::Config(format!("unknown config key {key:?}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies `HOMEVAL_ENDPOINT` and `HOMEVAL_SEED` when present.
    pub fn apply_env(&mut self) -> Result<(), CliError> {
        if let Ok(url) = std::env::var("HOMEVAL_ENDPOINT") {
            if !url.is_empty() {
                self.endpoint.base_url = url;
            }
        }
        if let Ok(seed) = std::env::var("HOMEVAL_SEED") {
            if !seed.is_empty() {
                self.seed = seed
                    .parse()
                    .map_err(|_| CliError::Config(format!("HOMEVAL_SEED: bad value {seed:?}")))?;
            }
        }
        Ok(())
    }

    /// The resolved key=value dump written alongside run outputs; a run is
    /// reproducible from this file plus its fixtures.
    pub fn resolved_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("eval.n_runs = {}\n", self.n_runs));
        out.push_str(&format!("gen.total = {}\n", self.total));
        out.push_str(&format!(
            "gen.concurrent_fraction = {}\n",
            self.concurrent_fraction
        ));
        out.push_str(&format!("endpoint.base_url = {}\n", self.endpoint.base_url));
        out.push_str(&format!("endpoint.path = {}\n", self.endpoint.path));
        out.push_str(&format!("endpoint.model = {}\n", self.endpoint.model_name));
        out.push_str(&format!(
            "endpoint.timeout_ms = {}\n",
            self.endpoint.timeout_ms
        ));
        out.push_str(&format!(
            "endpoint.max_in_flight = {}\n",
            self.endpoint.max_in_flight
        ));
        out.push_str(&format!("endpoint.retries = {}\n", self.endpoint.retries));
        out.push_str(&format!(
            "endpoint.deterministic = {}\n",
            self.endpoint.deterministic
        ));
        for (axis, weight) in &self.weights.weights {
            out.push_str(&format!("weights.{} = {}\n", axis.key(), weight));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn config_file_round_trip_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        let mut file = std::fs::File::create(&path).unwrap();
        writeln!(file, "# a comment").unwrap();
        writeln!(file, "seed = 99").unwrap();
        writeln!(file, "endpoint.model = judge-x").unwrap();
        writeln!(file, "weights.response_accuracy = 0.5").unwrap();
        let config = RunConfig::from_file(&path).unwrap();
        assert_eq!(config.seed, 99);
        assert_eq!(config.endpoint.model_name, "judge-x");
        assert_eq!(config.weights.weights[&Axis::ResponseAccuracy], 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "no_such_key = 1\n").unwrap();
        assert!(matches!(
            RunConfig::from_file(&path),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn resolved_text_parses_back() {
        let config = RunConfig::default();
        let text = config.resolved_text();
        let map = parse_kv(&text).unwrap();
        let mut rebuilt = RunConfig::default();
        rebuilt.apply_kv(&map).unwrap();
        assert_eq!(rebuilt.seed, config.seed);
        assert_eq!(rebuilt.weights, config.weights);
    }
}
