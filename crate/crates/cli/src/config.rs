use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use gesturenet::binarize::GradientRule;
use gesturenet::segmentation::SegmentationParams;
use gesturenet::train::{Mode, TrainConfig};

/// Settings shared by the subcommands. Read from a flat `key = value` file;
/// command-line flags override file values.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub seed: Option<u64>,
    pub epochs: usize,
    pub lr: f32,
    pub lr_decay: f32,
    pub momentum: f32,
    pub batch_size: usize,
    pub depth_alpha: u16,
    pub mode: Mode,
    pub gradient_rule: GradientRule,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            dataset: None,
            seed: None,
            epochs: t.epochs,
            lr: t.lr,
            lr_decay: t.lr_decay,
            momentum: t.momentum,
            batch_size: t.batch_size,
            depth_alpha: SegmentationParams::default().depth_alpha,
            mode: t.mode,
            gradient_rule: t.gradient_rule,
            threads: None,
            out: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = Some(value.into()),
            "seed" => self.seed = Some(parse(key, value)?),
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "lr_decay" => self.lr_decay = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "depth_alpha" => self.depth_alpha = parse(key, value)?,
            "mode" => self.mode = parse(key, value)?,
            "gradient_rule" => self.gradient_rule = parse(key, value)?,
            "threads" => self.threads = Some(parse(key, value)?),
            "out" => self.out = Some(value.into()),
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment. Relative paths
    /// are resolved against the file's directory.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let value = if matches!(key, "dataset" | "out") && Path::new(value).is_relative() {
                base.join(value).to_string_lossy().into_owned()
            } else {
                value.to_string()
            };
            self.set(key, &value)
                .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| anyhow!("no seed given; pass --seed or set `seed` in the config file"))
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let config = TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            lr_decay: self.lr_decay,
            momentum: self.momentum,
            batch_size: self.batch_size,
            seed: self.seed()?,
            mode: self.mode,
            gradient_rule: self.gradient_rule,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn segmentation(&self) -> SegmentationParams {
        SegmentationParams {
            depth_alpha: self.depth_alpha,
            ..SegmentationParams::default()
        }
    }

    /// The effective settings in config-file syntax.
    pub fn render(&self) -> String {
        let opt_path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut s = String::new();
        let mut line = |key: &str, value: Option<String>| match value {
            Some(v) => writeln!(s, "{key} = {v}").unwrap(),
            None => writeln!(s, "# {key} =").unwrap(),
        };
        line("dataset", opt_path(&self.dataset));
        line("seed", self.seed.map(|v| v.to_string()));
        line("epochs", Some(self.epochs.to_string()));
        line("lr", Some(self.lr.to_string()));
        line("lr_decay", Some(self.lr_decay.to_string()));
        line("momentum", Some(self.momentum.to_string()));
        line("batch_size", Some(self.batch_size.to_string()));
        line("depth_alpha", Some(self.depth_alpha.to_string()));
        line("mode", Some(self.mode.to_string()));
        line("gradient_rule", Some(self.gradient_rule.to_string()));
        line("threads", self.threads.map(|v| v.to_string()));
        line("out", opt_path(&self.out));
        s
    }
}
