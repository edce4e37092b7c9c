//! `key = value` configuration text for [`RunConfig`] and [`AblationConfig`].

use std::path::Path;

use molcap_core::harness::{AblationConfig, RunConfig, Task};
use molcap_core::text::Strategy;

use crate::error::{CliError, Result};

/// Run and ablation settings as one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub run: RunConfig,
    pub ablation: AblationConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self { run: RunConfig::desk(), ablation: AblationConfig::FULL }
    }
}

pub const KEYS: [&str; 25] = [
    "epochs",
    "learning_rate",
    "weight_decay",
    "batch_size",
    "dropout",
    "encoder_layers",
    "decoder_layers",
    "heads",
    "seed",
    "smiles_len",
    "target_len",
    "prompt_len",
    "max_nodes",
    "d_model",
    "graph_hidden",
    "ff_hidden",
    "vocab_size",
    "cta_heads",
    "cta_post_self_attention",
    "strategy",
    "max_generate",
    "task",
    "use_graph",
    "use_smiles",
    "use_cross_token_attention",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("{key}: cannot parse {value:?}: {e}"))
}

pub fn parse_strategy(value: &str) -> Result<Strategy, String> {
    match value {
        "greedy" => Ok(Strategy::Greedy),
        v => match v.strip_prefix("beam:").or_else(|| v.strip_prefix("beam")) {
            Some(w) => parse::<usize>("strategy", w.trim()).map(Strategy::Beam),
            None => Err(format!("strategy: expected `greedy` or `beam:<width>`, got {v:?}")),
        },
    }
}

pub fn strategy_name(s: Strategy) -> String {
    match s {
        Strategy::Greedy => "greedy".into(),
        Strategy::Beam(w) => format!("beam:{w}"),
    }
}

impl Settings {
    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let r = &mut self.run;
        let a = &mut self.ablation;
        match key {
            "epochs" => r.epochs = parse(key, value)?,
            "learning_rate" => r.learning_rate = parse(key, value)?,
            "weight_decay" => r.weight_decay = parse(key, value)?,
            "batch_size" => r.batch_size = parse(key, value)?,
            "dropout" => r.dropout = parse(key, value)?,
            "encoder_layers" => r.encoder_layers = parse(key, value)?,
            "decoder_layers" => r.decoder_layers = parse(key, value)?,
            "heads" => r.heads = parse(key, value)?,
            "seed" => r.seed = parse(key, value)?,
            "smiles_len" => r.smiles_len = parse(key, value)?,
            "target_len" => r.target_len = parse(key, value)?,
            "prompt_len" => r.prompt_len = parse(key, value)?,
            "max_nodes" => r.max_nodes = parse(key, value)?,
            "d_model" => r.d_model = parse(key, value)?,
            "graph_hidden" => r.graph_hidden = parse(key, value)?,
            "ff_hidden" => r.ff_hidden = parse(key, value)?,
            "vocab_size" => r.vocab_size = parse(key, value)?,
            "cta_heads" => r.cta_heads = parse(key, value)?,
            "cta_post_self_attention" => r.cta_post_self_attention = parse(key, value)?,
            "strategy" => r.strategy = parse_strategy(value)?,
            "max_generate" => r.max_generate = parse(key, value)?,
            "task" => r.task = Task::parse(value).map_err(|e| e.to_string())?,
            "use_graph" => a.use_graph = parse(key, value)?,
            "use_smiles" => a.use_smiles = parse(key, value)?,
            "use_cross_token_attention" => a.use_cross_token_attention = parse(key, value)?,
            other => return Err(format!("unknown setting {other:?}")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let r = &self.run;
        let a = &self.ablation;
        Some(match key {
            "epochs" => r.epochs.to_string(),
            "learning_rate" => r.learning_rate.to_string(),
            "weight_decay" => r.weight_decay.to_string(),
            "batch_size" => r.batch_size.to_string(),
            "dropout" => r.dropout.to_string(),
            "encoder_layers" => r.encoder_layers.to_string(),
            "decoder_layers" => r.decoder_layers.to_string(),
            "heads" => r.heads.to_string(),
            "seed" => r.seed.to_string(),
            "smiles_len" => r.smiles_len.to_string(),
            "target_len" => r.target_len.to_string(),
            "prompt_len" => r.prompt_len.to_string(),
            "max_nodes" => r.max_nodes.to_string(),
            "d_model" => r.d_model.to_string(),
            "graph_hidden" => r.graph_hidden.to_string(),
            "ff_hidden" => r.ff_hidden.to_string(),
            "vocab_size" => r.vocab_size.to_string(),
            "cta_heads" => r.cta_heads.to_string(),
            "cta_post_self_attention" => r.cta_post_self_attention.to_string(),
            "strategy" => strategy_name(r.strategy),
            "max_generate" => r.max_generate.to_string(),
            "task" => r.task.name().to_string(),
            "use_graph" => a.use_graph.to_string(),
            "use_smiles" => a.use_smiles.to_string(),
            "use_cross_token_attention" => a.use_cross_token_attention.to_string(),
            _ => return None,
        })
    }

    /// Every field as `key = value` lines, in [`KEYS`] order.
    pub fn to_kv(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).expect("known key"))).collect()
    }

    /// Applies `key = value` text on top of `self`. `path` only labels errors.
    pub fn apply_kv(&mut self, text: &str, path: &Path) -> Result<()> {
        for (line, key, value) in parse_kv(text, path)? {
            self.set(&key, &value).map_err(|m| CliError::format(path, line, m))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.ablation.validate()?;
        Ok(())
    }
}

/// Splits `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::format(path, i + 1, format!("expected `key = value`, found {line:?}")));
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::format(path, i + 1, "empty key"));
        }
        out.push((i + 1, k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn load_settings(path: &Path, base: Settings) -> Result<Settings> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut s = base;
    s.apply_kv(&text, path)?;
    Ok(s)
}
