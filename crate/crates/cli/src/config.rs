//! Experiment configuration files: flat `key = value` lines under the
//! sections `[data]`, `[param]`, `[optim]`, and `[path]`. Unknown sections or
//! keys are errors (fail fast), `#` starts a comment.
//!
//! ```text
//! [data]
//! n = 200
//! d = 50
//! s = 5
//! rho = 0.0
//! sigma = 1.0
//! seed = 1
//!
//! [param]
//! kind = hpp
//! # k = 3            (depth kinds only)
//! # k1 = 1           (mixed kinds only)
//! # group_sizes = 5,5,10   (grouped kinds only)
//!
//! [optim]
//! learning_rate = 0.18
//! momentum = 0.9
//! schedule = cosine        # constant | cosine | inverse_time
//! # decay_rate = 1e-6      (inverse_time only)
//! epochs = 3000
//! batch_size = full        # or an integer
//! # patience = 200         (enables early stopping)
//! seed = 0
//! init = ones_tail         # svf_balanced | ones_tail | random_scaled
//! # init_sigma = 0.1       (random_scaled only)
//! # jitter = 1e-4          (svf_balanced; "off" disables)
//! # warmup_epochs = 0
//! # warmup_scale = 1.0
//! # factor_lr_scale = v:0.5   (per-factor learning-rate scales)
//!
//! [path]
//! num_lambdas = 50
//! lambda_min_ratio = 1e-3
//! # lambda_max = 2.5       (defaults to the data-driven null threshold)
//! warm_start = true
//! threshold = 1e-6
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use hadamard_sparse::optimizer::{EarlyStopping, InitScheme, OptimConfig, Schedule};
use hadamard_sparse::param_maps::{ParamKind, ParamSpec};
use hadamard_sparse::spaces::GroupPartition;

use crate::synth::SimDesign;

/// Parsed `[path]` section.
#[derive(Debug, Clone)]
pub struct PathConfig {
    pub num_lambdas: usize,
    pub lambda_min_ratio: f64,
    /// Grid top; `None` uses the data-driven null-solution threshold.
    pub lambda_max: Option<f64>,
    pub warm_start: bool,
    /// Post-hoc threshold applied to the reported sparse solution.
    pub threshold: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            num_lambdas: 50,
            lambda_min_ratio: 1e-3,
            lambda_max: None,
            warm_start: true,
            threshold: 1e-6,
        }
    }
}

/// Parsed `[param]` section, resolved into a `ParamSpec` once `d` is known.
#[derive(Debug, Clone)]
pub struct ParamConfig {
    pub kind: ParamKind,
    pub k: Option<f64>,
    pub k1: Option<f64>,
    pub group_sizes: Option<Vec<usize>>,
}

impl ParamConfig {
    /// Resolve into a concrete `ParamSpec` for dimension `d`.
    pub fn to_spec(&self, d: usize) -> Result<ParamSpec> {
        let partition = match &self.group_sizes {
            Some(sizes) => {
                let p = GroupPartition::new(sizes.clone())?;
                if p.dim() != d {
                    bail!("group_sizes sum to {}, data dimension is {d}", p.dim());
                }
                p
            }
            None if self.kind.is_grouped() => {
                bail!("kind '{}' requires group_sizes", self.kind)
            }
            None => GroupPartition::trivial(d),
        };
        let k = match self.k {
            Some(k) => k,
            None if self.kind.is_fixed_depth() => 2.0,
            None => bail!("kind '{}' requires k", self.kind),
        };
        Ok(ParamSpec::new(self.kind, k, self.k1, partition)?)
    }
}

/// Initialization settings from `[optim]`.
#[derive(Debug, Clone, Copy)]
pub struct InitConfig {
    pub scheme: InitScheme,
}

/// A fully parsed experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data: SimDesign,
    pub param: ParamConfig,
    pub optim: OptimConfig,
    pub init: InitConfig,
    pub path: PathConfig,
}

struct Section {
    name: String,
    entries: BTreeMap<String, (String, usize)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| anyhow!("section [{}] is missing key '{key}'", self.name))
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (_, line))) = self.entries.into_iter().next() {
            bail!(
                "unknown key '{key}' in section [{}] (line {line})",
                self.name
            );
        }
        Ok(())
    }
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !matches!(name.as_str(), "data" | "param" | "optim" | "path") {
                bail!("unknown section [{name}] (line {})", idx + 1);
            }
            sections.entry(name.clone()).or_insert_with(|| Section {
                name: name.clone(),
                entries: BTreeMap::new(),
            });
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("expected 'key = value' on line {}", idx + 1))?;
        let section = current
            .as_ref()
            .ok_or_else(|| anyhow!("key outside any section on line {}", idx + 1))?;
        let entries = &mut sections.get_mut(section).unwrap().entries;
        let key = key.trim().to_string();
        if entries
            .insert(key.clone(), (value.trim().to_string(), idx + 1))
            .is_some()
        {
            bail!("duplicate key '{key}' in section [{section}] (line {})", idx + 1);
        }
    }
    Ok(sections)
}

fn parse<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow!("[{section}] {key} = '{value}': {e}"))
}

/// Parse an experiment configuration from a file.
pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    parse_config(&text)
}

/// Parse an experiment configuration from text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut sections = parse_sections(text)?;
    let mut need = |name: &str| -> Result<Section> {
        sections
            .remove(name)
            .ok_or_else(|| anyhow!("missing required section [{name}]"))
    };

    // [data]
    let mut s = need("data")?;
    let data = SimDesign {
        n: parse("data", "n", &s.require("n")?)?,
        d: parse("data", "d", &s.require("d")?)?,
        s: parse("data", "s", &s.require("s")?)?,
        rho: parse("data", "rho", &s.require("rho")?)?,
        sigma: parse("data", "sigma", &s.require("sigma")?)?,
        seed: parse("data", "seed", &s.require("seed")?)?,
    };
    s.finish()?;
    data.validate()?;

    // [param]
    let mut s = need("param")?;
    let kind = ParamKind::parse(&s.require("kind")?)?;
    let k = s.take("k").map(|v| parse("param", "k", &v)).transpose()?;
    let k1 = s.take("k1").map(|v| parse("param", "k1", &v)).transpose()?;
    let group_sizes = s
        .take("group_sizes")
        .map(|v| {
            v.split(',')
                .map(|t| parse::<usize>("param", "group_sizes", t.trim()))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    s.finish()?;
    let param = ParamConfig {
        kind,
        k,
        k1,
        group_sizes,
    };
    param.to_spec(data.d)?; // fail fast on inconsistent settings

    // [optim]
    let mut s = need("optim")?;
    let schedule = match s.take("schedule").as_deref() {
        None | Some("cosine") => Schedule::Cosine,
        Some("constant") => Schedule::Constant,
        Some("inverse_time") => {
            let rate = parse("optim", "decay_rate", &s.require("decay_rate")?)?;
            Schedule::InverseTime { rate }
        }
        Some(other) => bail!("[optim] schedule = '{other}' (want constant|cosine|inverse_time)"),
    };
    let batch_size = match s.take("batch_size").as_deref() {
        None | Some("full") => None,
        Some(v) => Some(parse("optim", "batch_size", v)?),
    };
    let early_stopping = s
        .take("patience")
        .map(|v| -> Result<EarlyStopping> {
            Ok(EarlyStopping {
                patience: parse("optim", "patience", &v)?,
            })
        })
        .transpose()?;
    // per-factor learning-rate scales as `name:scale,name:scale`
    let factor_lr_scale = s
        .take("factor_lr_scale")
        .map(|v| -> Result<Vec<(String, f64)>> {
            v.split(',')
                .map(|entry| {
                    let (name, scale) = entry.trim().split_once(':').ok_or_else(|| {
                        anyhow!("[optim] factor_lr_scale entry '{entry}' is not name:scale")
                    })?;
                    Ok((name.trim().to_string(), parse("optim", "factor_lr_scale", scale)?))
                })
                .collect()
        })
        .transpose()?
        .unwrap_or_default();
    let optim = OptimConfig {
        learning_rate: parse("optim", "learning_rate", &s.require("learning_rate")?)?,
        momentum: parse("optim", "momentum", &s.require("momentum")?)?,
        schedule,
        epochs: parse("optim", "epochs", &s.require("epochs")?)?,
        batch_size,
        early_stopping,
        seed: s
            .take("seed")
            .map(|v| parse("optim", "seed", &v))
            .transpose()?
            .unwrap_or(0),
        factor_lr_scale,
        warmup_scale: s
            .take("warmup_scale")
            .map(|v| parse("optim", "warmup_scale", &v))
            .transpose()?
            .unwrap_or(1.0),
        warmup_epochs: s
            .take("warmup_epochs")
            .map(|v| parse("optim", "warmup_epochs", &v))
            .transpose()?
            .unwrap_or(0),
    };
    optim.validate()?;
    let jitter = match s.take("jitter").as_deref() {
        None => Some(hadamard_sparse::optimizer::DEFAULT_INIT_JITTER),
        Some("off") => None,
        Some(v) => Some(parse("optim", "jitter", v)?),
    };
    let scheme = match s.take("init").as_deref() {
        None | Some("ones_tail") => InitScheme::OnesTail,
        Some("svf_balanced") => InitScheme::SvfBalanced { jitter },
        Some("random_scaled") => InitScheme::RandomScaled {
            sigma: parse("optim", "init_sigma", &s.require("init_sigma")?)?,
        },
        Some(other) => {
            bail!("[optim] init = '{other}' (want svf_balanced|ones_tail|random_scaled)")
        }
    };
    s.finish()?;

    // [path] (optional; defaults apply)
    let path = match sections.remove("path") {
        None => PathConfig::default(),
        Some(mut s) => {
            let defaults = PathConfig::default();
            let cfg = PathConfig {
                num_lambdas: s
                    .take("num_lambdas")
                    .map(|v| parse("path", "num_lambdas", &v))
                    .transpose()?
                    .unwrap_or(defaults.num_lambdas),
                lambda_min_ratio: s
                    .take("lambda_min_ratio")
                    .map(|v| parse("path", "lambda_min_ratio", &v))
                    .transpose()?
                    .unwrap_or(defaults.lambda_min_ratio),
                lambda_max: s
                    .take("lambda_max")
                    .map(|v| parse("path", "lambda_max", &v))
                    .transpose()?,
                warm_start: s
                    .take("warm_start")
                    .map(|v| parse("path", "warm_start", &v))
                    .transpose()?
                    .unwrap_or(defaults.warm_start),
                threshold: s
                    .take("threshold")
                    .map(|v| parse("path", "threshold", &v))
                    .transpose()?
                    .unwrap_or(defaults.threshold),
            };
            s.finish()?;
            cfg
        }
    };
    if path.num_lambdas == 0 {
        bail!("[path] num_lambdas must be positive");
    }

    if let Some((name, _)) = sections.into_iter().next() {
        bail!("unexpected section [{name}]");
    }
    Ok(ExperimentConfig {
        data,
        param,
        optim,
        init: InitConfig { scheme },
        path,
    })
}
