//! `key = value` experiment files. `#` starts a comment; later keys override
//! earlier ones, and command-line overrides are applied the same way.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dropout::DropoutPlacement;
use crate::error::{Error, Result};
use crate::network::{ArchSpec, TrainConfig};
use crate::pooling::TestPooling;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    Cifar10,
    Cifar100,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::Cifar100 => "cifar100",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar10" => Ok(DatasetKind::Cifar10),
            "cifar100" => Ok(DatasetKind::Cifar100),
            other => Err(Error::invalid(format!(
                "unknown dataset '{other}'; expected mnist, cifar10 or cifar100"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub arch: String,
    pub dataset: DatasetKind,
    pub data_dir: PathBuf,
    pub train: TrainConfig,
    pub test_modes: Vec<TestPooling>,
    /// Train on the first `subset` training examples only.
    pub subset: Option<usize>,
    pub test_subset: Option<usize>,
    /// Evaluate every n-th epoch; the last epoch is always evaluated.
    pub eval_every: usize,
    /// Record wall-clock seconds. Off makes the CSV a pure function of the
    /// configuration.
    pub timing: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            arch: "1x28x28-6C5-2P2-12C5-2P2-100N-10N".into(),
            dataset: DatasetKind::Mnist,
            data_dir: PathBuf::from("data/mnist"),
            train: TrainConfig::default(),
            test_modes: vec![TestPooling::Max],
            subset: None,
            test_subset: None,
            eval_every: 1,
            timing: true,
            out: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse '{v}' as a number")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("{key}: expected true or false, got '{v}'"))),
    }
}

/// `none` disables a dropout site.
fn parse_site(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "none" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

fn parse_opt_usize(key: &str, v: &str) -> Result<Option<usize>> {
    if v == "none" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

fn fmt_site(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |p| p.to_string())
}

pub fn parse_test_modes(v: &str) -> Result<Vec<TestPooling>> {
    let modes = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<TestPooling>>>()?;
    if modes.is_empty() {
        return Err(Error::invalid("test_modes: at least one mode is required"));
    }
    Ok(modes)
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.train;
        match key.trim() {
            "arch" => self.arch = v.to_string(),
            "dataset" => self.dataset = DatasetKind::parse(v)?,
            "data_dir" => self.data_dir = PathBuf::from(v),
            "subset" => self.subset = parse_opt_usize(key, v)?,
            "test_subset" => self.test_subset = parse_opt_usize(key, v)?,
            "eval_every" => self.eval_every = parse_num(key, v)?,
            "timing" => self.timing = parse_bool(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "test_modes" => self.test_modes = parse_test_modes(v)?,
            "epochs" => t.epochs = parse_num(key, v)?,
            "batch_size" => t.batch_size = parse_num(key, v)?,
            "momentum" => t.momentum = parse_num(key, v)?,
            "learning_rate" => t.learning_rate = parse_num(key, v)?,
            "lr_drop_epochs" => {
                t.lr_drop_epochs = match v {
                    "default" => None,
                    "none" => Some(Vec::new()),
                    list => Some(
                        list.split(',')
                            .map(|s| parse_num(key, s.trim()))
                            .collect::<Result<Vec<usize>>>()?,
                    ),
                }
            }
            "seed" => t.seed = parse_num(key, v)?,
            "init_std" => t.init_std = parse_num(key, v)?,
            "train_pooling" => t.train_pooling = v.parse()?,
            "test_pooling" => t.test_pooling = v.parse()?,
            "conv_retain" => t.dropout.conv_input = parse_site(key, v)?,
            "conv_on_image" => t.dropout.conv_on_image = parse_bool(key, v)?,
            "pool_retain" => t.dropout.pool_input = parse_site(key, v)?,
            "fc_first_retain" => t.dropout.fc_first_input = parse_site(key, v)?,
            "fc_retain" => t.dropout.fc_input = parse_site(key, v)?,
            other => return Err(Error::invalid(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` or `key = value`.
    pub fn apply_assignment(&mut self, text: &str) -> Result<()> {
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected key=value, got '{text}'")))?;
        self.set(k, v)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_assignment(line)
                .map_err(|e| Error::invalid(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn arch_spec(&self) -> Result<ArchSpec> {
        Ok(ArchSpec::parse(&self.arch)?)
    }

    /// Everything that can be checked without touching the data.
    pub fn validate(&self) -> Result<()> {
        let arch = self.arch_spec()?;
        self.train.validate()?;
        if self.test_modes.is_empty() {
            return Err(Error::invalid("test_modes: at least one mode is required"));
        }
        if self.eval_every == 0 {
            return Err(Error::invalid("eval_every must be positive"));
        }
        let (dims, classes) = match self.dataset {
            DatasetKind::Mnist => ([1, 28, 28], 10),
            DatasetKind::Cifar10 => ([3, 32, 32], 10),
            DatasetKind::Cifar100 => ([3, 32, 32], 100),
        };
        if arch.input != dims {
            return Err(Error::invalid(format!(
                "arch input {}x{}x{} does not match {} images {}x{}x{}",
                arch.input[0],
                arch.input[1],
                arch.input[2],
                self.dataset.name(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        if arch.classes() != classes {
            return Err(Error::invalid(format!(
                "arch ends in {} units but {} has {classes} classes",
                arch.classes(),
                self.dataset.name()
            )));
        }
        for (name, v) in [("subset", self.subset), ("test_subset", self.test_subset)] {
            if v == Some(0) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Canonical `key = value` form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let d: &DropoutPlacement = &t.dropout;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to String");
        kv("arch", self.arch.clone());
        kv("dataset", self.dataset.name().into());
        kv("data_dir", self.data_dir.display().to_string());
        kv("subset", self.subset.map_or("none".into(), |v| v.to_string()));
        kv("test_subset", self.test_subset.map_or("none".into(), |v| v.to_string()));
        kv("epochs", t.epochs.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("momentum", t.momentum.to_string());
        kv("learning_rate", t.learning_rate.to_string());
        kv(
            "lr_drop_epochs",
            match &t.lr_drop_epochs {
                None => "default".into(),
                Some(v) if v.is_empty() => "none".into(),
                Some(v) => v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","),
            },
        );
        kv("seed", t.seed.to_string());
        kv("init_std", t.init_std.to_string());
        kv("train_pooling", t.train_pooling.name().into());
        kv("test_pooling", t.test_pooling.name().into());
        kv("conv_retain", fmt_site(d.conv_input));
        kv("conv_on_image", d.conv_on_image.to_string());
        kv("pool_retain", fmt_site(d.pool_input));
        kv("fc_first_retain", fmt_site(d.fc_first_input));
        kv("fc_retain", fmt_site(d.fc_input));
        kv(
            "test_modes",
            self.test_modes.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        );
        kv("eval_every", self.eval_every.to_string());
        kv("timing", self.timing.to_string());
        if let Some(out) = &self.out {
            kv("out", out.display().to_string());
        }
        s
    }
}
