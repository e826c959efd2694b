//! One function per pipeline stage. Stages read and write only files under
//! the run directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gama_core::attribution::{ig_tensor, output_dim_similarity};
use gama_core::dataio::{
    self, load_checkpoint, load_dataset, load_ig_store, load_profile_csv, read_json, save_checkpoint,
    save_ig_store, save_profile_csv, tensors_to_ig2d, write_json, MotifTruth, ProfileDocument, ResultRow,
    RunManifest,
};
use gama_core::evalbench::{
    aggregate, bootstrap_correlation, dataset_entropy, evaluate, positional_energy_profile,
    random_baseline_detail, BaselineEstimate, CorrelationResult, GroupBy, GroupSummary, RetrievalResult,
    PUBLISHED_BASELINE_FNR,
};
use gama_core::gama::GamaProfile;
use gama_core::pipeline::{attribution_sample, run_gama, AttributionPair, PipelineConfig};
use gama_core::provenance::{config_digest, derive_seed, file_sha256, Provenance};
use gama_core::seqmodel::{init_model, train, TokenSequence, TrainConfig};
use gama_core::synthgen::{generate_dataset, verify_dataset, DatasetCondition};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// An error with a stable machine-readable code.
#[derive(Debug)]
pub struct Coded {
    pub code: &'static str,
    pub message: String,
}

impl fmt::Display for Coded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Coded {}

fn coded(code: &'static str, message: impl Into<String>) -> anyhow::Error {
    Coded {
        code,
        message: message.into(),
    }
    .into()
}

pub struct Run {
    pub root: PathBuf,
    pub cfg: RunConfig,
    manifest: Option<RunManifest>,
    pool: rayon::ThreadPool,
}

impl Run {
    pub fn open(root: &Path, cfg: RunConfig) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating run directory {}", root.display()))?;
        let manifest = if root.join(dataio::RUN_MANIFEST).exists() {
            Some(RunManifest::load(root)?)
        } else {
            None
        };
        write_json(&root.join("config.json"), &cfg)?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
        Ok(Self {
            root: root.to_path_buf(),
            cfg,
            manifest,
            pool,
        })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Path of an upstream artifact, verified against the run manifest.
    fn input(&self, rel: &str) -> Result<PathBuf> {
        let path = self.path(rel);
        if !path.exists() {
            return Err(coded("missing_input", format!("missing upstream artifact {rel}")));
        }
        if let Some(sha) = self.manifest.as_ref().and_then(|m| m.files.get(rel)) {
            dataio::verify_checksum(&path, sha)?;
        }
        Ok(path)
    }

    fn checksum(&self, rel: &str) -> Result<String> {
        Ok(file_sha256(&self.input(rel)?)?)
    }

    pub fn finish(&self) -> Result<RunManifest> {
        let m = RunManifest::scan(&self.root)?;
        m.save(&self.root)?;
        Ok(m)
    }

    fn for_each<T: Send>(&self, f: impl Fn(&str, &DatasetCondition) -> Result<T> + Sync) -> Result<Vec<T>> {
        let conds = self.cfg.conditions()?;
        self.pool.install(|| {
            conds
                .par_iter()
                .map(|(id, cond)| f(id, cond).with_context(|| format!("condition {id}")))
                .collect()
        })
    }

    fn pipeline(&self, id: &str) -> PipelineConfig {
        PipelineConfig {
            seed: derive_seed(self.cfg.seed, &format!("pipeline:{id}")),
            ..self.cfg.pipeline.clone()
        }
    }

    fn model_digest(&self, id: &str, cond: &DatasetCondition) -> Result<String> {
        let p = self.pipeline(id);
        Ok(config_digest(&(cond, &p.train, p.seed))?)
    }

    fn attribution_digest(&self, id: &str, cond: &DatasetCondition) -> Result<String> {
        Ok(config_digest(&(cond, self.pipeline(id)))?)
    }
}

fn expect_digest(what: &str, found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(coded(
            "upstream_digest_mismatch",
            format!("{what} was produced under a different configuration; rerun the upstream stage"),
        ));
    }
    Ok(())
}

fn dataset_rel(id: &str) -> String {
    format!("datasets/{id}.tsv")
}

fn truth_rel(id: &str) -> String {
    format!("datasets/{id}.truth.json")
}

fn model_rel(id: &str, which: &str) -> String {
    format!("models/{id}/{which}.ckpt")
}

fn ig_rel(id: &str, which: &str) -> String {
    format!("ig/{id}/{which}")
}

fn profile_rel(id: &str) -> String {
    format!("profiles/{id}.csv")
}

fn load_checked_dataset(run: &Run, id: &str, cond: &DatasetCondition) -> Result<Vec<TokenSequence>> {
    let rel = dataset_rel(id);
    let (header, ds) = load_dataset(&run.input(&rel)?)?;
    expect_digest(&rel, &header.provenance.config_digest, &config_digest(cond)?)?;
    Ok(ds.sequences)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub condition: String,
    pub loss_trace: Vec<f64>,
    pub provenance: Provenance,
}

fn load_model(run: &Run, id: &str, cond: &DatasetCondition, which: &str) -> Result<(gama_core::seqmodel::LstmParameters, String)> {
    let rel = model_rel(id, which);
    let path = run.input(&rel)?;
    let side: ModelSidecar = read_json(&run.input(&format!("{rel}.json"))?)?;
    expect_digest(&rel, &side.provenance.config_digest, &run.model_digest(id, cond)?)?;
    Ok((load_checkpoint(&path)?, run.checksum(&rel)?))
}

pub fn cmd_gen(run: &Run) -> Result<usize> {
    let written = run.for_each(|id, cond| {
        let ds = generate_dataset(cond);
        let report = verify_dataset(&ds);
        if !report.is_clean() {
            return Err(coded("generation_failed", format!("{} violations", report.violations.len())));
        }
        let prov = Provenance::new(config_digest(cond)?).seed("dataset", cond.seed);
        dataio::save_dataset(&run.path(&dataset_rel(id)), &ds, prov)?;
        eprintln!("gen {id}: {} sequences", ds.sequences.len());
        Ok(())
    })?;
    Ok(written.len())
}

pub fn cmd_train(run: &Run) -> Result<usize> {
    let done = run.for_each(|id, cond| {
        let seqs = load_checked_dataset(run, id, cond)?;
        let pc = run.pipeline(id);
        let reference = init_model(pc.train.hidden_size, pc.init_seed())?;
        let tc = TrainConfig {
            rng_seed: pc.shuffle_seed(),
            ..pc.train.clone()
        };
        let outcome = train(&reference, &seqs, &tc)?;
        let prov = Provenance::new(run.model_digest(id, cond)?)
            .seed("init", pc.init_seed())
            .seed("shuffle", pc.shuffle_seed())
            .input(dataset_rel(id), run.checksum(&dataset_rel(id))?);
        for (which, params, trace) in [
            ("reference", &reference, Vec::new()),
            ("trained", &outcome.trained, outcome.loss_trace.clone()),
        ] {
            let rel = model_rel(id, which);
            save_checkpoint(&run.path(&rel), params)?;
            let side = ModelSidecar {
                condition: id.into(),
                loss_trace: trace,
                provenance: prov.clone(),
            };
            write_json(&run.path(&format!("{rel}.json")), &side)?;
        }
        eprintln!(
            "train {id}: {} epochs, final loss {:.4}",
            outcome.loss_trace.len(),
            outcome.loss_trace.last().copied().unwrap_or(f64::NAN)
        );
        Ok(())
    })?;
    Ok(done.len())
}

pub fn cmd_attribute(run: &Run) -> Result<usize> {
    let done = run.for_each(|id, cond| {
        let seqs = load_checked_dataset(run, id, cond)?;
        let pc = run.pipeline(id);
        let (reference, ref_sha) = load_model(run, id, cond, "reference")?;
        let (trained, tr_sha) = load_model(run, id, cond, "trained")?;
        let sample = attribution_sample(&trained, &seqs, &pc)?;
        let pair = AttributionPair::compute(&reference, &trained, sample, &pc.ig)?;
        let digest = run.attribution_digest(id, cond)?;
        for (which, mats, sha) in [("reference", &pair.reference, ref_sha), ("trained", &pair.trained, tr_sha)] {
            let items: Vec<_> = pair
                .sequences
                .iter()
                .cloned()
                .zip(mats.iter().map(|m| m.0.clone().into_dyn()))
                .collect();
            let prov = Provenance::new(digest.clone())
                .seed("attribution_sample", pc.sample_seed())
                .input(model_rel(id, which), sha.clone());
            save_ig_store(&run.path(&ig_rel(id, which)), &items, &sha, prov)?;
        }
        eprintln!("attribute {id}: {} sequences", pair.sequences.len());
        Ok(())
    })?;
    Ok(done.len())
}

fn load_pair(run: &Run, id: &str, cond: &DatasetCondition) -> Result<AttributionPair> {
    let digest = run.attribution_digest(id, cond)?;
    let mut halves = Vec::new();
    for which in ["reference", "trained"] {
        let rel = ig_rel(id, which);
        let dir = run.path(&rel);
        run.input(&format!("{rel}/{}", dataio::IG_STORE_MANIFEST))?;
        let (manifest, tensors) = load_ig_store(&dir)?;
        expect_digest(&rel, &manifest.config_digest, &digest)?;
        let seqs: Vec<TokenSequence> = manifest.entries.iter().map(|e| e.sequence.clone()).collect();
        halves.push((seqs, tensors_to_ig2d(&dir, tensors)?));
    }
    let (seqs_t, trained) = halves.pop().expect("two halves");
    let (seqs_r, reference) = halves.pop().expect("two halves");
    if seqs_r != seqs_t {
        return Err(coded("upstream_digest_mismatch", "reference and trained stores cover different sequences"));
    }
    Ok(AttributionPair {
        sequences: seqs_r,
        reference,
        trained,
    })
}

pub fn cmd_gama(run: &Run) -> Result<usize> {
    let done = run.for_each(|id, cond| {
        let pc = run.pipeline(id);
        let pair = load_pair(run, id, cond)?;
        let profile = pair.profile(&pc.ig, pc.epsilon)?;
        save_profile_csv(&run.path(&profile_rel(id)), &profile)?;
        let mut prov = Provenance::new(run.attribution_digest(id, cond)?);
        for which in ["reference", "trained"] {
            let rel = format!("{}/{}", ig_rel(id, which), dataio::IG_STORE_MANIFEST);
            prov = prov.input(rel.clone(), run.checksum(&rel)?);
        }
        let doc = ProfileDocument {
            condition: id.into(),
            epsilon: pc.epsilon,
            profile,
            provenance: prov,
        };
        write_json(&run.path(&format!("profiles/{id}.json")), &doc)?;
        Ok(())
    })?;
    Ok(done.len())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineReport {
    pub sequence_length: usize,
    pub trials: usize,
    pub seed: u64,
    pub estimates: Vec<BaselineEstimate>,
    /// Mean over motif sizes, weighted by how many benchmarked conditions use each.
    pub mean_over_conditions: f64,
    /// Published Monte-Carlo value for the same grid, kept for comparison.
    pub published_reference: f64,
}

pub fn cmd_bench(run: &Run) -> Result<usize> {
    let results: Vec<RetrievalResult> = run.for_each(|id, cond| {
        let truth: MotifTruth = read_json(&run.input(&truth_rel(id))?)?;
        if truth.positions != cond.motif.positions() || truth.logic != cond.motif.logic() {
            return Err(coded("upstream_digest_mismatch", format!("{} disagrees with the configuration", truth_rel(id))));
        }
        let profile = load_profile_csv(&run.input(&profile_rel(id))?)?;
        let mut r = evaluate(cond, &profile)?;
        r.condition = id.into();
        Ok(r)
    })?;
    let conds = run.cfg.conditions()?;
    let seq_len = conds.first().map(|(_, c)| c.sequence_length).unwrap_or(16);
    let sizes: Vec<usize> = results
        .iter()
        .map(|r| r.positions.len())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let seed = derive_seed(run.cfg.seed, "baseline");
    let estimates = random_baseline_detail(seq_len, &sizes, run.cfg.evaluation.baseline_trials, seed)?;
    let by_size: BTreeMap<usize, f64> = estimates.iter().map(|e| (e.motif_size, e.mean)).collect();
    let rows: Vec<ResultRow> = results
        .iter()
        .map(|r| ResultRow::new(r, by_size[&r.positions.len()]))
        .collect();
    dataio::save_results_csv(&run.path("results/results.csv"), &rows)?;
    let baseline = BaselineReport {
        sequence_length: seq_len,
        trials: run.cfg.evaluation.baseline_trials,
        seed,
        mean_over_conditions: rows.iter().map(|r| r.baseline_fnr).sum::<f64>() / rows.len() as f64,
        estimates,
        published_reference: PUBLISHED_BASELINE_FNR,
    };
    write_json(&run.path("results/baseline.json"), &baseline)?;
    let mut aggregates: BTreeMap<String, Vec<GroupSummary>> = BTreeMap::new();
    for key in [
        GroupBy::Logic,
        GroupBy::PositionGroup,
        GroupBy::MotifLength,
        GroupBy::NoiseRatio,
        GroupBy::SampleSize,
    ] {
        aggregates.insert(key.to_string(), aggregate(&results, key)?);
    }
    write_json(&run.path("results/aggregates.json"), &aggregates)?;
    write_json(&run.path("results/retrieval.json"), &results)?;
    Ok(results.len())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    #[serde(flatten)]
    pub result: CorrelationResult,
    /// Magnitude of the mean per-position energy.
    pub energy_profile: Vec<f64>,
    pub gama_profile: Vec<f64>,
    pub provenance: Provenance,
}

pub fn cmd_correlate(run: &Run) -> Result<usize> {
    let c = &run.cfg.correlation;
    let affinity = c
        .affinity_path
        .as_ref()
        .ok_or_else(|| coded("missing_input", "correlation.affinity_path is not set"))?;
    let records = dataio::load_affinity_dataset(affinity, c.strict_energies)?;
    let energy: Vec<f64> = positional_energy_profile(&records)?.into_iter().map(f64::abs).collect();
    let mut prov = Provenance::new(config_digest(&run.cfg.correlation)?)
        .input(affinity.display().to_string(), file_sha256(affinity)?);
    let profile: GamaProfile = match &c.profile_path {
        Some(p) => {
            prov = prov.input(p.display().to_string(), file_sha256(p)?);
            load_profile_csv(p)?
        }
        None => {
            let seqs: Vec<TokenSequence> = records.iter().map(|r| r.sequence.clone()).collect();
            let pc = run.pipeline("correlate");
            let g = run.pool.install(|| run_gama(&seqs, &pc))?;
            save_checkpoint(&run.path("correlation/reference.ckpt"), &g.reference)?;
            save_checkpoint(&run.path("correlation/trained.ckpt"), &g.trained)?;
            save_profile_csv(&run.path("correlation/profile.csv"), &g.profile)?;
            prov = prov.seed("pipeline", pc.seed);
            g.profile
        }
    };
    let seed = derive_seed(run.cfg.seed, "bootstrap");
    let result = bootstrap_correlation(profile.values(), &energy, run.cfg.evaluation.bootstrap_samples, seed)?;
    let report = CorrelationReport {
        result,
        energy_profile: energy,
        gama_profile: profile.values().to_vec(),
        provenance: prov.seed("bootstrap", seed),
    };
    write_json(&run.path("correlation/report.json"), &report)?;
    Ok(1)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimDiagnostic {
    pub condition: String,
    pub sequence: TokenSequence,
    pub median_nonzero_dispersion: Option<f64>,
    pub max_dispersion: f64,
}

pub fn cmd_report(run: &Run) -> Result<usize> {
    let manifest = run
        .manifest
        .as_ref()
        .ok_or_else(|| coded("missing_input", "run directory has no manifest"))?;
    manifest
        .verify(&run.root)
        .map_err(|e| coded("manifest_verification_failed", e.to_string()))?;
    let conds = run.cfg.conditions()?;
    let present: Vec<&(String, DatasetCondition)> =
        conds.iter().filter(|(id, _)| run.path(&dataset_rel(id)).exists()).collect();
    let mut entropy = BTreeMap::new();
    let mut written = 0;
    for (id, _) in &present {
        let (_, ds) = load_dataset(&run.input(&dataset_rel(id))?)?;
        let freq = dataio::frequency_profile(&ds.sequences)?;
        entropy.insert(id.clone(), dataset_entropy(&freq)?);
        std::fs::create_dir_all(run.path("report/frequency"))?;
        std::fs::write(run.path(&format!("report/frequency/{id}.csv")), dataio::frequency_csv(&freq))?;
        written += 1;
    }
    if let Some(p) = &run.cfg.report.readcount_path {
        let seqs = dataio::load_readcount_dataset(p, run.cfg.report.min_reads)?;
        let freq = dataio::frequency_profile(&seqs)?;
        entropy.insert("readcount".into(), dataset_entropy(&freq)?);
        std::fs::create_dir_all(run.path("report/frequency"))?;
        std::fs::write(run.path("report/frequency/readcount.csv"), dataio::frequency_csv(&freq))?;
        written += 1;
    }
    write_json(&run.path("report/entropy.json"), &entropy)?;

    let mut losses = BTreeMap::new();
    let mut profiles = BTreeMap::new();
    for (id, _) in &present {
        let side_rel = format!("{}.json", model_rel(id, "trained"));
        if run.path(&side_rel).exists() {
            let side: ModelSidecar = read_json(&run.input(&side_rel)?)?;
            losses.insert(id.clone(), side.loss_trace);
        }
        if run.path(&profile_rel(id)).exists() {
            let doc: ProfileDocument = read_json(&run.input(&format!("profiles/{id}.json"))?)?;
            profiles.insert(id.clone(), doc);
        }
    }
    write_json(&run.path("report/loss_traces.json"), &losses)?;
    write_json(&run.path("report/profiles.json"), &profiles)?;

    let mut diagnostics = Vec::new();
    for (id, cond) in present.iter().take(run.cfg.report.diagnostic_conditions) {
        if !run.path(&model_rel(id, "trained")).exists() {
            continue;
        }
        let (trained, _) = load_model(run, id, cond, "trained")?;
        let seqs = load_checked_dataset(run, id, cond)?;
        let pc = run.pipeline(id);
        let seq = attribution_sample(&trained, &seqs, &pc)?.remove(0);
        let t4 = run.pool.install(|| ig_tensor(&trained, &seq, &pc.ig))?;
        let sim = output_dim_similarity(&t4);
        diagnostics.push(DimDiagnostic {
            condition: id.clone(),
            sequence: seq,
            median_nonzero_dispersion: sim.median_nonzero(),
            max_dispersion: sim.max(),
        });
    }
    write_json(&run.path("report/output_dim_similarity.json"), &diagnostics)?;

    if run.path("results/results.csv").exists() {
        let rows = dataio::load_results_csv(&run.input("results/results.csv")?)?;
        let baseline: BaselineReport = read_json(&run.input("results/baseline.json")?)?;
        let summary = serde_json::json!({
            "conditions": rows.len(),
            "mean_fnr": rows.iter().map(|r| r.fnr).sum::<f64>() / rows.len().max(1) as f64,
            "baseline": baseline,
        });
        write_json(&run.path("report/summary.json"), &summary)?;
    }
    Ok(written)
}
