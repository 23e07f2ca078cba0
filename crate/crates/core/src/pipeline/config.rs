//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{build_grid, LldaParams, SvmParams};
use crate::error::{Error, Result};
use crate::eval::UserGroups;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub replicates: usize,
    pub train_fraction: f64,
    pub workers: usize,
    pub out: PathBuf,
    pub run_id: Option<String>,

    pub alpha: f64,
    pub svd_rank: usize,
    pub kernels: Vec<String>,
    pub c_values: Vec<f64>,
    pub gammas: Vec<f64>,
    pub poly_degree: u32,
    pub cv_folds: usize,
    pub svm_tolerance: f64,
    pub frequent_tokens: usize,
    pub lasso: bool,
    pub lasso_lambda: Option<f64>,
    pub undersample: bool,

    pub llda_alpha: Option<f64>,
    pub llda_eta: f64,
    pub llda_iters: usize,
    pub llda_infer_iters: usize,

    pub corpus: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub slang: Option<PathBuf>,
    pub sentiment: Option<PathBuf>,
    pub frequent_list: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub centroids: Option<PathBuf>,
    pub fallback_url: Option<String>,
    pub fallback_timeout_ms: u64,
    pub fallback_max_in_flight: usize,
    pub density_cell_feet: f64,
    pub user_groups: Vec<(String, String)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let llda = LldaParams::default();
        RunConfig {
            seed: 0,
            replicates: 30,
            train_fraction: 0.8,
            workers: 1,
            out: PathBuf::from("out"),
            run_id: None,
            alpha: crate::geocode::DEFAULT_ALPHA,
            svd_rank: crate::reduce::tsvd::DEFAULT_RANK,
            kernels: vec!["linear".into(), "rbf".into()],
            c_values: vec![0.1, 1.0, 10.0, 100.0],
            gammas: vec![0.01, 0.1, 1.0],
            poly_degree: 3,
            cv_folds: 5,
            svm_tolerance: crate::classify::svm::DEFAULT_TOLERANCE,
            frequent_tokens: 50,
            lasso: true,
            lasso_lambda: None,
            undersample: false,
            llda_alpha: llda.alpha,
            llda_eta: llda.eta,
            llda_iters: llda.iters,
            llda_infer_iters: llda.infer_iters,
            corpus: None,
            stopwords: None,
            slang: None,
            sentiment: None,
            frequent_list: None,
            gazetteer: None,
            centroids: None,
            fallback_url: None,
            fallback_timeout_ms: 2000,
            fallback_max_in_flight: 4,
            density_cell_feet: 100.0,
            user_groups: vec![
                ("511*".into(), "511".into()),
                ("totaltraffic*".into(), "totaltraffic".into()),
            ],
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("config key {key} = {value:?}: {why}"))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, value, e))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, value, "expected a boolean")),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn optional(value: &str) -> Option<&str> {
    let v = value.trim();
    (!v.is_empty() && !v.eq_ignore_ascii_case("none")).then_some(v)
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_str(&text, base)
    }

    pub fn parse_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("config line {}: expected key = value", n + 1)))?;
            cfg.set_relative(k.trim(), v.trim(), base)?;
        }
        Ok(cfg)
    }

    /// Applies one override; paths are taken as given.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_relative(key, value, Path::new(""))
    }

    fn set_relative(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = |v: &str| optional(v).map(|p| base.join(p));
        match key {
            "seed" => self.seed = parse(key, value)?,
            "replicates" => self.replicates = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "out" => self.out = base.join(value),
            "run_id" => self.run_id = optional(value).map(String::from),
            "alpha" => self.alpha = parse(key, value)?,
            "svd_rank" => self.svd_rank = parse(key, value)?,
            "kernels" => self.kernels = parse_list(key, value)?,
            "c_values" => self.c_values = parse_list(key, value)?,
            "gammas" => self.gammas = parse_list(key, value)?,
            "poly_degree" => self.poly_degree = parse(key, value)?,
            "cv_folds" => self.cv_folds = parse(key, value)?,
            "svm_tolerance" => self.svm_tolerance = parse(key, value)?,
            "frequent_tokens" => self.frequent_tokens = parse(key, value)?,
            "lasso" => self.lasso = parse_bool(key, value)?,
            "lasso_lambda" => self.lasso_lambda = optional(value).map(|v| parse(key, v)).transpose()?,
            "undersample" => self.undersample = parse_bool(key, value)?,
            "llda_alpha" => self.llda_alpha = optional(value).map(|v| parse(key, v)).transpose()?,
            "llda_eta" => self.llda_eta = parse(key, value)?,
            "llda_iters" => self.llda_iters = parse(key, value)?,
            "llda_infer_iters" => self.llda_infer_iters = parse(key, value)?,
            "corpus" => self.corpus = path(value),
            "stopwords" => self.stopwords = path(value),
            "slang" => self.slang = path(value),
            "sentiment" => self.sentiment = path(value),
            "frequent_list" => self.frequent_list = path(value),
            "gazetteer" => self.gazetteer = path(value),
            "centroids" => self.centroids = path(value),
            "fallback_url" => self.fallback_url = optional(value).map(String::from),
            "fallback_timeout_ms" => self.fallback_timeout_ms = parse(key, value)?,
            "fallback_max_in_flight" => self.fallback_max_in_flight = parse(key, value)?,
            "density_cell_feet" => self.density_cell_feet = parse(key, value)?,
            "user_groups" => {
                self.user_groups = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|pair| {
                        pair.split_once(':')
                            .map(|(p, g)| (p.trim().to_string(), g.trim().to_string()))
                            .ok_or_else(|| bad(key, value, "expected pattern:group pairs"))
                    })
                    .collect::<Result<_>>()?
            }
            _ => return Err(Error::InvalidInput(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| format!("run-{}", self.seed))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out.join(self.run_id())
    }

    pub fn llda_params(&self) -> LldaParams {
        LldaParams {
            alpha: self.llda_alpha,
            eta: self.llda_eta,
            iters: self.llda_iters,
            infer_iters: self.llda_infer_iters,
        }
    }

    pub fn svm_grid(&self) -> Result<Vec<SvmParams>> {
        let kernels: Vec<&str> = self.kernels.iter().map(String::as_str).collect();
        let grid = build_grid(&kernels, &self.c_values, &self.gammas, self.poly_degree)?;
        Ok(grid.into_iter().map(|p| p.with_tolerance(self.svm_tolerance)).collect())
    }

    pub fn groups(&self) -> UserGroups {
        UserGroups::new(self.user_groups.clone())
    }

    /// Range checks plus existence of every configured input path.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidInput(m));
        if self.replicates < 1 {
            return fail("replicates must be >= 1".into());
        }
        if self.workers < 1 {
            return fail("workers must be >= 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!("train_fraction {} not in (0, 1)", self.train_fraction));
        }
        if !(0.0..=100.0).contains(&self.alpha) {
            return fail(format!("alpha {} not in [0, 100]", self.alpha));
        }
        if self.svd_rank < 1 {
            return fail("svd_rank must be >= 1".into());
        }
        if self.cv_folds < 2 {
            return fail("cv_folds must be >= 2".into());
        }
        if !(self.density_cell_feet > 0.0) {
            return fail("density_cell_feet must be > 0".into());
        }
        if self.fallback_max_in_flight < 1 {
            return fail("fallback_max_in_flight must be >= 1".into());
        }
        self.svm_grid()?;
        let paths = [
            ("corpus", &self.corpus),
            ("stopwords", &self.stopwords),
            ("slang", &self.slang),
            ("sentiment", &self.sentiment),
            ("frequent_list", &self.frequent_list),
            ("gazetteer", &self.gazetteer),
            ("centroids", &self.centroids),
        ];
        for (key, p) in paths {
            if let Some(p) = p {
                if !p.exists() {
                    return fail(format!("{key} path {} does not exist", p.display()));
                }
            }
        }
        Ok(())
    }

    /// Key/value snapshot for the manifest, in key order.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("seed", self.seed.to_string());
        put("replicates", self.replicates.to_string());
        put("train_fraction", self.train_fraction.to_string());
        put("run_id", self.run_id());
        put("alpha", self.alpha.to_string());
        put("svd_rank", self.svd_rank.to_string());
        put("kernels", self.kernels.join(","));
        put("c_values", list(&self.c_values));
        put("gammas", list(&self.gammas));
        put("poly_degree", self.poly_degree.to_string());
        put("cv_folds", self.cv_folds.to_string());
        put("svm_tolerance", self.svm_tolerance.to_string());
        put("frequent_tokens", self.frequent_tokens.to_string());
        put("lasso", self.lasso.to_string());
        put("lasso_lambda", opt(self.lasso_lambda));
        put("undersample", self.undersample.to_string());
        put("llda_alpha", opt(self.llda_alpha));
        put("llda_eta", self.llda_eta.to_string());
        put("llda_iters", self.llda_iters.to_string());
        put("llda_infer_iters", self.llda_infer_iters.to_string());
        put("corpus", path(&self.corpus));
        put("stopwords", path(&self.stopwords));
        put("slang", path(&self.slang));
        put("sentiment", path(&self.sentiment));
        put("frequent_list", path(&self.frequent_list));
        put("gazetteer", path(&self.gazetteer));
        put("centroids", path(&self.centroids));
        put("fallback_url", self.fallback_url.clone().unwrap_or_default());
        put("density_cell_feet", self.density_cell_feet.to_string());
        put(
            "user_groups",
            self.user_groups.iter().map(|(p, g)| format!("{p}:{g}")).collect::<Vec<_>>().join(","),
        );
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let text = "seed = 5\n# comment\nkernels = linear, poly\nc_values=1,10\ncorpus = data/c.jsonl # trailing\nllda_alpha =\n";
        let mut cfg = RunConfig::parse_str(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.kernels, ["linear", "poly"]);
        assert_eq!(cfg.c_values, [1.0, 10.0]);
        assert_eq!(cfg.corpus.as_deref(), Some(Path::new("/base/data/c.jsonl")));
        assert_eq!(cfg.llda_alpha, None);
        cfg.set("workers", "8").unwrap();
        assert_eq!(cfg.workers, 8);
        assert_eq!(cfg.run_id(), "run-5");
        assert_eq!(cfg.svm_grid().unwrap().len(), 2 + 2 * 3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse_str("nope = 1", Path::new("")).is_err());
        assert!(RunConfig::parse_str("seed", Path::new("")).is_err());
        assert!(RunConfig::parse_str("seed = x", Path::new("")).is_err());
        let cfg = RunConfig {
            replicates: 0,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            corpus: Some("/definitely/not/here.jsonl".into()),
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
