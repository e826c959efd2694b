//! Run configuration: a preset, optionally overlaid with a JSON file, then
//! with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gama_core::dataio::DEFAULT_MIN_READS;
use gama_core::evalbench::DEFAULT_BOOTSTRAP_SAMPLES;
use gama_core::pipeline::{PipelineConfig, Preset};
use gama_core::synthgen::{enumerate_conditions, DatasetCondition, PAPER_SIGNAL_COUNT};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DESK_SIGNAL_COUNT: usize = 5_000;
pub const DEFAULT_BASELINE_TRIALS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub signal_count: usize,
    /// Condition names; empty selects the whole grid.
    pub conditions: Vec<String>,
    /// Signal counts for the sample-size sweep; empty disables it.
    pub sample_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub baseline_trials: usize,
    pub bootstrap_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    /// `sequence<TAB>total_energy<TAB>e1,...,eL` export.
    pub affinity_path: Option<PathBuf>,
    pub strict_energies: bool,
    /// Existing profile CSV to correlate; when absent the pipeline is run on
    /// the affinity sequences.
    pub profile_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// `sequence<TAB>reads` export whose frequency matrix is reported.
    pub readcount_path: Option<PathBuf>,
    pub min_reads: u64,
    /// Conditions for which one full 4D tensor is computed for the
    /// output-dimension similarity diagnostic.
    pub diagnostic_conditions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    pub seed: u64,
    pub workers: usize,
    pub generation: GenerationConfig,
    pub pipeline: PipelineConfig,
    pub evaluation: EvaluationConfig,
    pub correlation: CorrelationConfig,
    pub report: ReportConfig,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        Self {
            preset,
            seed: 0,
            workers: 1,
            generation: GenerationConfig {
                signal_count: match preset {
                    Preset::Desk => DESK_SIGNAL_COUNT,
                    Preset::Paper => PAPER_SIGNAL_COUNT,
                },
                conditions: Vec::new(),
                sample_sizes: Vec::new(),
            },
            pipeline: PipelineConfig::preset(preset),
            evaluation: EvaluationConfig {
                baseline_trials: DEFAULT_BASELINE_TRIALS,
                bootstrap_samples: DEFAULT_BOOTSTRAP_SAMPLES,
            },
            correlation: CorrelationConfig {
                affinity_path: None,
                strict_energies: false,
                profile_path: None,
            },
            report: ReportConfig {
                readcount_path: None,
                min_reads: DEFAULT_MIN_READS,
                diagnostic_conditions: 1,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        if self.workers == 0 {
            bail!("workers must be ≥ 1");
        }
        if self.generation.signal_count == 0 || self.generation.sample_sizes.contains(&0) {
            bail!("signal counts must be ≥ 1");
        }
        if self.evaluation.baseline_trials == 0 || self.evaluation.bootstrap_samples == 0 {
            bail!("baseline_trials and bootstrap_samples must be ≥ 1");
        }
        self.conditions()?;
        Ok(())
    }

    /// Selected datasets in grid order, each paired with its identifier.
    pub fn conditions(&self) -> Result<Vec<(String, DatasetCondition)>> {
        let grid = enumerate_conditions(self.seed);
        let selected: Vec<DatasetCondition> = if self.generation.conditions.is_empty() {
            grid
        } else {
            for name in &self.generation.conditions {
                if !grid.iter().any(|c| &c.name() == name) {
                    bail!("unknown condition {name:?}");
                }
            }
            grid.into_iter()
                .filter(|c| self.generation.conditions.contains(&c.name()))
                .collect()
        };
        let mut out = Vec::new();
        for cond in selected {
            if self.generation.sample_sizes.is_empty() {
                out.push((cond.name(), cond.with_signal_count(self.generation.signal_count)));
            } else {
                for &n in &self.generation.sample_sizes {
                    out.push((format!("{}_n{n}", cond.name()), cond.clone().with_signal_count(n)));
                }
            }
        }
        Ok(out)
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Flag values that take precedence over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub conditions: Option<Vec<String>>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

pub fn resolve(config_path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let file: Option<Value> = match config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?)
        }
        None => None,
    };
    let preset = match overrides.preset {
        Some(p) => p,
        None => match file.as_ref().and_then(|v| v.get("preset")) {
            Some(v) => serde_json::from_value(v.clone()).context("config field preset")?,
            None => Preset::Desk,
        },
    };
    let mut value = serde_json::to_value(RunConfig::preset(preset))?;
    if let Some(f) = file {
        merge(&mut value, f);
    }
    let mut cfg: RunConfig = serde_json::from_value(value).context("invalid config")?;
    cfg.preset = preset;
    if let Some(c) = &overrides.conditions {
        cfg.generation.conditions = c.clone();
    }
    if let Some(w) = overrides.workers {
        cfg.workers = w;
    }
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    cfg.pipeline.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overlays_preset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"preset": "paper", "pipeline": {"attribution_samples": 9}}"#).unwrap();
        let cfg = resolve(Some(&p), &Overrides::default()).unwrap();
        assert_eq!(cfg.pipeline.attribution_samples, 9);
        assert_eq!(cfg.pipeline.train.hidden_size, 1024);
        assert_eq!(cfg.generation.signal_count, PAPER_SIGNAL_COUNT);
        let flags = Overrides {
            preset: Some(Preset::Desk),
            seed: Some(4),
            ..Overrides::default()
        };
        let cfg = resolve(Some(&p), &flags).unwrap();
        assert_eq!(cfg.pipeline.train.hidden_size, 128);
        assert_eq!(cfg.pipeline.attribution_samples, 9);
        assert_eq!(cfg.seed, 4);
    }

    #[test]
    fn rejects_unknown_fields_and_conditions() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"generaton": {}}"#).unwrap();
        assert!(resolve(Some(&p), &Overrides::default()).is_err());
        let flags = Overrides {
            conditions: Some(vec!["AND_2-5_r1.0".into()]),
            ..Overrides::default()
        };
        assert!(resolve(None, &flags).is_err());
    }

    #[test]
    fn grid_and_sweep_selection() {
        let cfg = RunConfig::preset(Preset::Desk);
        assert_eq!(cfg.conditions().unwrap().len(), 270);
        let mut cfg = cfg;
        cfg.generation.conditions = vec!["OR_13-15_r0.5".into(), "AND_2-4_r1.0".into()];
        cfg.generation.sample_sizes = vec![1000, 9000];
        let ids: Vec<String> = cfg.conditions().unwrap().into_iter().map(|(id, _)| id).collect();
        assert_eq!(
            ids,
            ["AND_2-4_r1.0_n1000", "AND_2-4_r1.0_n9000", "OR_13-15_r0.5_n1000", "OR_13-15_r0.5_n9000"]
        );
    }
}
