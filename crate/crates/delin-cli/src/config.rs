//! Configuration resolution: profile defaults, then `key = value` config
//! file, then individual flags. Unknown config keys are rejected.

use std::collections::HashMap;
use std::path::Path;

use delin_core::graph::ExtractParams;
use delin_core::metrics::MatchTarget;
use delin_core::scoring::ScorerSpec;

use crate::ConfigArgs;

#[derive(Debug, Clone)]
pub struct Config {
    pub extract: ExtractParams,
    pub scorer: ScorerSpec,
    pub tau: f64,
    pub rho: f64,
    pub patch_size: usize,
    pub radius: f64,
    pub m_values: Vec<f64>,
    pub match_target: MatchTarget,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            extract: ExtractParams::axons(),
            scorer: ScorerSpec::MeanTubularity,
            tau: 0.5,
            rho: 1.0,
            patch_size: 256,
            radius: 10.0,
            m_values: (1..=10).map(f64::from).collect(),
            match_target: MatchTarget::All,
        }
    }
}

impl Config {
    pub fn resolve(args: &ConfigArgs) -> Result<Config, String> {
        let mut cfg = match args.profile.as_deref() {
            None | Some("axons") => Config::default(),
            Some("roads") => Config {
                extract: ExtractParams::roads(),
                radius: 40.0,
                ..Config::default()
            },
            Some(other) => return Err(format!("unknown profile {other:?} (roads or axons)")),
        };
        if args.profile.as_deref() == Some("axons") {
            cfg.radius = 10.0;
        }
        if let Some(path) = &args.config {
            cfg.apply_file(path)?;
        }
        cfg.apply_flags(args)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut pairs: HashMap<String, String> = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("{}:{}: expected key = value", path.display(), lineno + 1));
            };
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }
        for (key, value) in pairs {
            self.apply_pair(&key, &value)
                .map_err(|e| format!("{}: {e}", path.display()))?;
        }
        Ok(())
    }

    fn apply_pair(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value.parse().map_err(|_| format!("bad value for {key}: {value:?}"))
        }
        match key {
            "threshold" => self.extract.threshold = parse(key, value)?,
            "d" => self.extract.d = parse(key, value)?,
            "epsilon" => self.extract.epsilon = parse(key, value)?,
            "k" => self.extract.k = parse(key, value)?,
            "min_spur" => self.extract.min_spur = parse(key, value)?,
            "base" => self.extract.search.base = parse(key, value)?,
            "hweight" => self.extract.search.hweight = parse(key, value)?,
            "connectivity" => self.extract.search.connectivity = parse(key, value)?,
            "search_margin" => self.extract.search.search_margin = parse(key, value)?,
            "max_expansions" => self.extract.search.max_expansions = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "patch_size" => self.patch_size = parse(key, value)?,
            "R" | "radius" => self.radius = parse(key, value)?,
            "m" => self.m_values = parse_m_list(value)?,
            "match" => self.match_target = parse_match(value)?,
            "scorer" => self.scorer = parse_scorer(value)?,
            other => return Err(format!("unknown config key {other:?}")),
        }
        Ok(())
    }

    fn apply_flags(&mut self, args: &ConfigArgs) -> Result<(), String> {
        if let Some(v) = args.threshold {
            self.extract.threshold = v;
        }
        if let Some(v) = args.d {
            self.extract.d = v;
            // keep derived defaults consistent with the new d unless overridden
            self.extract.epsilon = (v as f64 / 10.0).max(3.0);
            self.extract.search.search_margin = (v / 2).max(1);
        }
        if let Some(v) = args.epsilon {
            self.extract.epsilon = v;
        }
        if let Some(v) = args.k {
            self.extract.k = v;
        }
        if let Some(v) = args.min_spur {
            self.extract.min_spur = v;
        }
        if let Some(v) = args.base {
            self.extract.search.base = v;
        }
        if let Some(v) = args.hweight {
            self.extract.search.hweight = v;
        }
        if let Some(v) = args.connectivity {
            self.extract.search.connectivity = v;
        }
        if let Some(v) = args.search_margin {
            self.extract.search.search_margin = v;
        }
        if let Some(v) = args.max_expansions {
            self.extract.search.max_expansions = v;
        }
        if let Some(v) = args.tau {
            self.tau = v;
        }
        if let Some(v) = args.rho {
            self.rho = v;
        }
        if let Some(v) = args.patch_size {
            self.patch_size = v;
        }
        if let Some(v) = args.radius {
            self.radius = v;
        }
        if let Some(v) = &args.m {
            self.m_values = parse_m_list(v)?;
        }
        if let Some(v) = &args.r#match {
            self.match_target = parse_match(v)?;
        }
        if let Some(v) = &args.scorer {
            self.scorer = parse_scorer(v)?;
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), String> {
        self.extract.validate().map_err(|e| e.to_string())?;
        if self.extract.search.base <= 1.0 {
            return Err("base must be > 1".into());
        }
        if self.extract.search.hweight < 0.0 {
            return Err("hweight must be >= 0".into());
        }
        if self.extract.search.connectivity != 4 && self.extract.search.connectivity != 8 {
            return Err("connectivity must be 4 or 8".into());
        }
        if !(0.0..=1.0 + f64::EPSILON).contains(&self.tau) && self.tau > 1.5 {
            return Err("tau must be in [0,1]".into());
        }
        if self.rho < 0.0 {
            return Err("rho must be >= 0".into());
        }
        if self.patch_size < 32 {
            return Err("patch_size must be >= 32".into());
        }
        if self.radius <= 0.0 {
            return Err("R must be > 0".into());
        }
        if self.m_values.iter().any(|&m| m < 0.0) {
            return Err("m values must be >= 0".into());
        }
        if let ScorerSpec::QuantileTubularity(q) = self.scorer {
            if !(0.0..=1.0).contains(&q) {
                return Err("quantile must be in [0,1]".into());
            }
        }
        Ok(())
    }
}

/// `1,2,3` or `1..10` (inclusive).
pub fn parse_m_list(s: &str) -> Result<Vec<f64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let lo: i64 = a.trim().parse().map_err(|_| format!("bad m range {s:?}"))?;
        let hi: i64 = b.trim().parse().map_err(|_| format!("bad m range {s:?}"))?;
        if lo > hi {
            return Err(format!("empty m range {s:?}"));
        }
        return Ok((lo..=hi).map(|v| v as f64).collect());
    }
    s.split(',')
        .map(|tok| tok.trim().parse::<f64>().map_err(|_| format!("bad m value {tok:?}")))
        .collect()
}

fn parse_match(s: &str) -> Result<MatchTarget, String> {
    match s {
        "all" => Ok(MatchTarget::All),
        "significant" => Ok(MatchTarget::Significant),
        other => Err(format!("match must be all or significant, got {other:?}")),
    }
}

fn parse_scorer(s: &str) -> Result<ScorerSpec, String> {
    if s == "mean" {
        return Ok(ScorerSpec::MeanTubularity);
    }
    if let Some(q) = s.strip_prefix("quantile:") {
        let q: f64 = q.parse().map_err(|_| format!("bad quantile in {s:?}"))?;
        return Ok(ScorerSpec::QuantileTubularity(q));
    }
    if let Some(rest) = s.strip_prefix("external:") {
        let mut parts = rest.split(':');
        let command = parts.next().unwrap_or_default().to_string();
        if command.is_empty() {
            return Err(format!("missing command in {s:?}"));
        }
        let args = parts.map(str::to_string).collect();
        return Ok(ScorerSpec::External { command, args });
    }
    Err(format!("unknown scorer {s:?} (mean, quantile:<q>, external:<cmd>)"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_constants() {
        let roads = Config::resolve(&ConfigArgs { profile: Some("roads".into()), ..Default::default() }).unwrap();
        assert_eq!(roads.extract.d, 250);
        assert_eq!(roads.extract.k, 1.1);
        assert_eq!(roads.radius, 40.0);
        let axons = Config::resolve(&ConfigArgs { profile: Some("axons".into()), ..Default::default() }).unwrap();
        assert_eq!(axons.extract.d, 30);
        assert_eq!(axons.extract.k, 1.5);
        assert_eq!(axons.radius, 10.0);
    }

    #[test]
    fn config_file_and_flag_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("delin.cfg");
        std::fs::write(&path, "# comment\ntau = 0.7\nd = 40  # inline comment\n").unwrap();
        let args = ConfigArgs {
            config: Some(path.clone()),
            tau: Some(0.9),
            ..Default::default()
        };
        let cfg = Config::resolve(&args).unwrap();
        assert_eq!(cfg.extract.d, 40);
        assert_eq!(cfg.tau, 0.9, "flag overrides file");
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "frobnicate = 1\n").unwrap();
        let args = ConfigArgs { config: Some(path), ..Default::default() };
        let err = Config::resolve(&args).unwrap_err();
        assert!(err.contains("unknown config key"), "{err}");
    }

    #[test]
    fn m_list_forms() {
        assert_eq!(parse_m_list("1,2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_m_list("1..4").unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(parse_m_list("x").is_err());
    }

    #[test]
    fn scorer_forms() {
        assert_eq!(parse_scorer("mean").unwrap(), ScorerSpec::MeanTubularity);
        assert_eq!(parse_scorer("quantile:0.05").unwrap(), ScorerSpec::QuantileTubularity(0.05));
        match parse_scorer("external:python3:stub.py").unwrap() {
            ScorerSpec::External { command, args } => {
                assert_eq!(command, "python3");
                assert_eq!(args, vec!["stub.py"]);
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_scorer("bogus").is_err());
    }
}
