use std::path::PathBuf;

use crate::envs::PortalObservation;
use crate::events::Preference;
use crate::error::{Error, Result};
use crate::learning::{LearnerConfig, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    FourRooms,
    EightRooms,
    KeyChest,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::FourRooms => "four_rooms",
            EnvKind::EightRooms => "eight_rooms",
            EnvKind::KeyChest => "key_chest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoringScheme {
    Simple { alpha: f64 },
    Karlin { epsilon: f64, off_diagonal: f64 },
}

/// Declarative experiment description. Loaded from `key = value` lines
/// (TOML syntax) with command-line overrides applied on top.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub slip: f64,
    pub observation: PortalObservation,
    pub demo_counts: Vec<usize>,
    pub seeds: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub scoring: ScoringScheme,
    pub gap_open: f64,
    pub gap_extend: f64,
    pub max_clusters: usize,
    pub ap_preference: Preference,
    pub sr_learning_rate: f64,
    pub sr_discount: f64,
    pub sr_sweeps: usize,
    pub random_rollouts: usize,
    pub pseudocount: Option<f64>,
    pub demo_exploration: f64,
    pub budget: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub threshold_fraction: f64,
    pub epsilon: f64,
    pub bc_noise_mean: f64,
    pub bc_noise_std: f64,
    pub lr_align_rudder: f64,
    pub lr_bc_q: f64,
    pub lr_sqil: f64,
    pub sqil_discount: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::FourRooms,
            slip: 0.01,
            observation: PortalObservation::UntilTeleport,
            demo_counts: vec![2, 5, 10, 50, 100],
            seeds: 20,
            master_seed: 0,
            methods: Method::ALL.to_vec(),
            scoring: ScoringScheme::Karlin {
                epsilon: 0.0,
                off_diagonal: -1.0,
            },
            gap_open: 0.0,
            gap_extend: 0.0,
            max_clusters: 15,
            ap_preference: Preference::Median,
            sr_learning_rate: 0.1,
            sr_discount: 0.99,
            sr_sweeps: 10,
            random_rollouts: 50,
            pseudocount: None,
            demo_exploration: 0.2,
            budget: 5000,
            eval_every: 10,
            eval_episodes: 10,
            threshold_fraction: 0.8,
            epsilon: 0.2,
            bc_noise_mean: 0.0,
            bc_noise_std: 0.1,
            lr_align_rudder: 0.1,
            lr_bc_q: 0.01,
            lr_sqil: 0.01,
            sqil_discount: 0.99,
            output_dir: PathBuf::from("results"),
        }
    }
}

fn cfg_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(cfg_err(key, format!("expected a number, got {other}"))),
    }
}

fn as_usize(key: &str, v: &toml::Value) -> Result<usize> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        other => Err(cfg_err(key, format!("expected a non-negative integer, got {other}"))),
    }
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| cfg_err(key, format!("expected a string, got {v}")))
}

fn as_list<'a>(key: &str, v: &'a toml::Value) -> Result<Vec<&'a toml::Value>> {
    match v {
        toml::Value::Array(a) => Ok(a.iter().collect()),
        // a single scalar counts as a one-element list
        other => Ok(vec![other]),
    }
    .and_then(|l: Vec<&toml::Value>| {
        if l.is_empty() {
            Err(cfg_err(key, "empty list"))
        } else {
            Ok(l)
        }
    })
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = Self::default();
        // the scheme must be known before its parameters
        if let Some(v) = table.get("scoring") {
            cfg.set("scoring", v)?;
        }
        for (k, v) in table.iter().filter(|(k, _)| k.as_str() != "scoring") {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies a `key=value` override; the value uses TOML syntax, and a
    /// bare word is taken as a string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").expect("parsed table has the key"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        self.set(key, &value)?;
        self.validate()
    }

    pub fn set(&mut self, key: &str, v: &toml::Value) -> Result<()> {
        match key {
            "env" => {
                self.env = match as_str(key, v)? {
                    "four_rooms" => EnvKind::FourRooms,
                    "eight_rooms" => EnvKind::EightRooms,
                    "key_chest" => EnvKind::KeyChest,
                    other => return Err(cfg_err(key, format!("unknown environment {other:?}"))),
                }
            }
            "slip" => self.slip = as_f64(key, v)?,
            "observation" => {
                self.observation = match as_str(key, v)? {
                    "until_teleport" => PortalObservation::UntilTeleport,
                    "always" => PortalObservation::Always,
                    other => return Err(cfg_err(key, format!("unknown observation mode {other:?}"))),
                }
            }
            "demo_counts" => {
                self.demo_counts = as_list(key, v)?.into_iter().map(|x| as_usize(key, x)).collect::<Result<_>>()?
            }
            "seeds" => self.seeds = as_usize(key, v)?,
            "master_seed" => self.master_seed = as_usize(key, v)? as u64,
            "methods" => {
                self.methods = as_list(key, v)?
                    .into_iter()
                    .map(|x| as_str(key, x).and_then(|s| Method::parse(s).map_err(|e| cfg_err(key, e))))
                    .collect::<Result<_>>()?
            }
            "scoring" => {
                self.scoring = match as_str(key, v)? {
                    "simple" => ScoringScheme::Simple { alpha: -1.0 },
                    "karlin" => ScoringScheme::Karlin {
                        epsilon: 0.0,
                        off_diagonal: -1.0,
                    },
                    other => return Err(cfg_err(key, format!("unknown scheme {other:?}"))),
                }
            }
            "alpha" => match &mut self.scoring {
                ScoringScheme::Simple { alpha } => *alpha = as_f64(key, v)?,
                _ => return Err(cfg_err(key, "only used by the simple scheme; set scoring first")),
            },
            "karlin_epsilon" | "off_diagonal" => match &mut self.scoring {
                ScoringScheme::Karlin { epsilon, off_diagonal } => {
                    let x = as_f64(key, v)?;
                    if key == "karlin_epsilon" {
                        *epsilon = x;
                    } else {
                        *off_diagonal = x;
                    }
                }
                _ => return Err(cfg_err(key, "only used by the karlin scheme; set scoring first")),
            },
            "gap_open" => self.gap_open = as_f64(key, v)?,
            "gap_extend" => self.gap_extend = as_f64(key, v)?,
            "max_clusters" => self.max_clusters = as_usize(key, v)?,
            "ap_preference" => {
                self.ap_preference = match v {
                    toml::Value::String(s) if s == "median" => Preference::Median,
                    other => Preference::Value(as_f64(key, other)?),
                }
            }
            "sr_learning_rate" => self.sr_learning_rate = as_f64(key, v)?,
            "sr_discount" => self.sr_discount = as_f64(key, v)?,
            "sr_sweeps" => self.sr_sweeps = as_usize(key, v)?,
            "random_rollouts" => self.random_rollouts = as_usize(key, v)?,
            "pseudocount" => self.pseudocount = Some(as_f64(key, v)?),
            "demo_exploration" => self.demo_exploration = as_f64(key, v)?,
            "budget" => self.budget = as_usize(key, v)?,
            "eval_every" => self.eval_every = as_usize(key, v)?,
            "eval_episodes" => self.eval_episodes = as_usize(key, v)?,
            "threshold_fraction" => self.threshold_fraction = as_f64(key, v)?,
            "epsilon" => self.epsilon = as_f64(key, v)?,
            "bc_noise_mean" => self.bc_noise_mean = as_f64(key, v)?,
            "bc_noise_std" => self.bc_noise_std = as_f64(key, v)?,
            "lr_align_rudder" => self.lr_align_rudder = as_f64(key, v)?,
            "lr_bc_q" => self.lr_bc_q = as_f64(key, v)?,
            "lr_sqil" => self.lr_sqil = as_f64(key, v)?,
            "sqil_discount" => self.sqil_discount = as_f64(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(as_str(key, v)?),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds == 0 {
            return bad("seeds must be >= 1".into());
        }
        if self.demo_counts.iter().any(|&n| n < 2) {
            return bad("every demo count must be >= 2".into());
        }
        if self.methods.is_empty() {
            return bad("no methods".into());
        }
        if !(0.0..=1.0).contains(&self.slip) {
            return bad(format!("slip {} not in [0, 1]", self.slip));
        }
        if !(1..=26).contains(&self.max_clusters) {
            return bad(format!("max_clusters {} not in 1..=26", self.max_clusters));
        }
        if self.budget == 0 || self.eval_every == 0 || self.eval_episodes == 0 {
            return bad("budget, eval_every and eval_episodes must be positive".into());
        }
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction <= 1.0) {
            return bad(format!("threshold_fraction {} not in (0, 1]", self.threshold_fraction));
        }
        for m in &self.methods {
            self.learner(*m).validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn learner(&self, method: Method) -> LearnerConfig {
        let mut c = LearnerConfig::for_method(method);
        c.epsilon = self.epsilon;
        c.bc_noise_mean = self.bc_noise_mean;
        c.bc_noise_std = self.bc_noise_std;
        c.eval_episodes = self.eval_episodes;
        match method {
            Method::AlignRudder => c.learning_rate = self.lr_align_rudder,
            Method::BcQ => c.learning_rate = self.lr_bc_q,
            Method::Sqil => {
                c.learning_rate = self.lr_sqil;
                c.discount = self.sqil_discount;
            }
        }
        c
    }
}
