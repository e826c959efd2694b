//! File formats: checkpoints, IG tensor stores, datasets, profiles, result
//! tables, run manifests, and ingestion of external affinity and read-count
//! exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayD, IxDyn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::attribution::Ig2D;
use crate::error::{Error, Result};
use crate::evalbench::RetrievalResult;
use crate::gama::GamaProfile;
use crate::provenance::{file_sha256, sha256_hex, Provenance};
use crate::seqmodel::{LstmParameters, TokenSequence, Vocabulary, BLOCK_NAMES, INPUT_DIM};
use crate::synthgen::{DatasetCondition, Label, Logic, SyntheticDataset};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GAMA";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const TENSOR_MAGIC: &[u8; 4] = b"GIG1";
pub const DEFAULT_MIN_READS: u64 = 2;
pub const STRICT_ENERGY_TOLERANCE: f64 = 1e-6;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

struct ByteReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Self { path, bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Truncated {
                path: self.path.into(),
                detail: format!(
                    "{what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            }),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let n = count.checked_mul(8).ok_or_else(|| Error::Malformed {
            path: self.path.into(),
            detail: format!("{what}: element count {count} overflows"),
        })?;
        Ok(self
            .take(n, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        if self.take(4, "magic")? != expected {
            return Err(Error::BadMagic {
                path: self.path.into(),
                expected: String::from_utf8_lossy(expected).into(),
            });
        }
        Ok(())
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn encode_checkpoint(params: &LstmParameters) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.num_parameters() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.hidden_size() as u32).to_le_bytes());
    for (name, block) in BLOCK_NAMES.iter().zip(params.blocks()) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(block.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(block.ncols() as u64).to_le_bytes());
        for v in block.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(path: &Path, bytes: &[u8]) -> Result<LstmParameters> {
    let mut r = ByteReader::new(path, bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            found: version,
        });
    }
    let hidden = r.u32("hidden size")? as usize;
    let malformed = |detail: String| Error::Malformed {
        path: path.into(),
        detail,
    };
    let mut blocks = Vec::with_capacity(BLOCK_NAMES.len());
    for expected in BLOCK_NAMES {
        let name_len = r.u32("block name length")? as usize;
        let name = r.take(name_len, "block name")?;
        if name != expected.as_bytes() {
            return Err(malformed(format!(
                "expected block {expected}, found {}",
                String::from_utf8_lossy(name)
            )));
        }
        let rows = r.u64("row count")? as usize;
        let cols = r.u64("column count")? as usize;
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| malformed(format!("{expected}: shape overflows")))?;
        let data = r.f64s(count, expected)?;
        blocks.push(Array2::from_shape_vec((rows, cols), data).expect("length checked"));
    }
    if !r.at_end() {
        return Err(malformed("trailing bytes after last block".into()));
    }
    LstmParameters::from_blocks(hidden, blocks).map_err(|e| malformed(e.to_string()))
}

pub fn save_checkpoint(path: &Path, params: &LstmParameters) -> Result<()> {
    write_file(path, &encode_checkpoint(params))
}

pub fn load_checkpoint(path: &Path) -> Result<LstmParameters> {
    decode_checkpoint(path, &read_file(path)?)
}

pub fn encode_tensor(tensor: &ArrayD<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + tensor.ndim() * 8 + tensor.len() * 8);
    out.extend_from_slice(TENSOR_MAGIC);
    out.push(tensor.ndim() as u8);
    for &d in tensor.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in tensor.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(path: &Path, bytes: &[u8]) -> Result<ArrayD<f64>> {
    let mut r = ByteReader::new(path, bytes);
    r.magic(TENSOR_MAGIC)?;
    let ndim = r.u8("dimension count")? as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(r.u64("dimension")? as usize);
    }
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Malformed {
            path: path.into(),
            detail: format!("shape {shape:?} overflows"),
        })?;
    let data = r.f64s(count, "tensor data")?;
    if !r.at_end() {
        return Err(Error::Malformed {
            path: path.into(),
            detail: "trailing bytes after tensor data".into(),
        });
    }
    Ok(ArrayD::from_shape_vec(IxDyn(&shape), data).expect("length checked"))
}

pub fn save_tensor(path: &Path, tensor: &ArrayD<f64>) -> Result<()> {
    write_file(path, &encode_tensor(tensor))
}

pub fn load_tensor(path: &Path) -> Result<ArrayD<f64>> {
    decode_tensor(path, &read_file(path)?)
}

/// Fails with [`Error::ChecksumMismatch`] unless the file hashes to `expected`.
pub fn verify_checksum(path: &Path, expected: &str) -> Result<()> {
    let found = file_sha256(path)?;
    if found != expected {
        return Err(Error::ChecksumMismatch {
            path: path.into(),
            expected: expected.into(),
            found,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgStoreEntry {
    pub file: String,
    pub sequence: TokenSequence,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgStoreManifest {
    pub config_digest: String,
    pub model_checksum: String,
    pub entries: Vec<IgStoreEntry>,
    pub provenance: Provenance,
}

pub const IG_STORE_MANIFEST: &str = "manifest.json";

/// One tensor file per sequence plus `manifest.json`.
pub fn save_ig_store(
    dir: &Path,
    items: &[(TokenSequence, ArrayD<f64>)],
    model_checksum: &str,
    provenance: Provenance,
) -> Result<IgStoreManifest> {
    let mut entries = Vec::with_capacity(items.len());
    for (i, (seq, tensor)) in items.iter().enumerate() {
        let file = format!("seq_{i:05}.gig");
        let bytes = encode_tensor(tensor);
        write_file(&dir.join(&file), &bytes)?;
        entries.push(IgStoreEntry {
            file,
            sequence: seq.clone(),
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = IgStoreManifest {
        config_digest: provenance.config_digest.clone(),
        model_checksum: model_checksum.into(),
        entries,
        provenance,
    };
    write_json(&dir.join(IG_STORE_MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn load_ig_store(dir: &Path) -> Result<(IgStoreManifest, Vec<ArrayD<f64>>)> {
    let manifest: IgStoreManifest = read_json(&dir.join(IG_STORE_MANIFEST))?;
    let mut tensors = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let path = dir.join(&entry.file);
        let bytes = read_file(&path)?;
        let found = sha256_hex(&bytes);
        if found != entry.sha256 {
            return Err(Error::ChecksumMismatch {
                path,
                expected: entry.sha256.clone(),
                found,
            });
        }
        tensors.push(decode_tensor(&path, &bytes)?);
    }
    Ok((manifest, tensors))
}

pub fn tensors_to_ig2d(path: &Path, tensors: Vec<ArrayD<f64>>) -> Result<Vec<Ig2D>> {
    tensors
        .into_iter()
        .map(|t| {
            t.into_dimensionality()
                .map(Ig2D)
                .map_err(|e| Error::Malformed {
                    path: path.into(),
                    detail: format!("expected 2D attribution tensor: {e}"),
                })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.into(),
        detail: e.to_string(),
    })
}

/// Path of the provenance sidecar written next to a binary artifact.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub signal: usize,
    pub noise: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifTruth {
    pub condition: String,
    pub positions: Vec<usize>,
    pub signal_tokens: String,
    pub logic: Logic,
    pub sequence_length: usize,
    pub noise_ratio: f64,
}

impl MotifTruth {
    pub fn of(cond: &DatasetCondition) -> Self {
        Self {
            condition: cond.name(),
            positions: cond.motif.positions().to_vec(),
            signal_tokens: cond.motif.signal_letters(),
            logic: cond.motif.logic(),
            sequence_length: cond.sequence_length,
            noise_ratio: cond.noise_ratio(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub condition: DatasetCondition,
    pub seed: u64,
    pub counts: DatasetCounts,
    pub truth: MotifTruth,
    pub provenance: Provenance,
}

/// `AND_2-4_r1.0.tsv` → `AND_2-4_r1.0.truth.json`.
pub fn truth_path(dataset_path: &Path) -> PathBuf {
    dataset_path.with_extension("truth.json")
}

pub fn dataset_text(ds: &SyntheticDataset, provenance: Provenance) -> Result<String> {
    let signal = ds.labels.iter().filter(|l| **l == Label::Signal).count();
    let header = DatasetHeader {
        condition: ds.condition.clone(),
        seed: ds.condition.seed,
        counts: DatasetCounts {
            signal,
            noise: ds.labels.len() - signal,
            total: ds.labels.len(),
        },
        truth: MotifTruth::of(&ds.condition),
        provenance,
    };
    let mut out = String::with_capacity(ds.sequences.len() * (ds.condition.sequence_length + 3));
    out.push('#');
    out.push_str(&serde_json::to_string(&header)?);
    out.push('\n');
    for (seq, label) in ds.sequences.iter().zip(&ds.labels) {
        let _ = writeln!(out, "{seq}\t{}", label.code());
    }
    Ok(out)
}

/// Writes the dataset file and its `.truth.json` sidecar.
pub fn save_dataset(path: &Path, ds: &SyntheticDataset, provenance: Provenance) -> Result<()> {
    write_file(path, dataset_text(ds, provenance)?.as_bytes())?;
    write_json(&truth_path(path), &MotifTruth::of(&ds.condition))
}

pub fn load_dataset(path: &Path) -> Result<(DatasetHeader, SyntheticDataset)> {
    let text = read_text(path)?;
    let mut header: Option<DatasetHeader> = None;
    let mut sequences = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if let Some(json) = line.strip_prefix('#') {
            if header.is_some() {
                return Err(parse_error(path, lineno, "second metadata line"));
            }
            header = Some(
                serde_json::from_str(json).map_err(|e| parse_error(path, lineno, e.to_string()))?,
            );
            continue;
        }
        let (seq, label) = line
            .split_once('\t')
            .ok_or_else(|| parse_error(path, lineno, "expected sequence<TAB>label"))?;
        let seq: TokenSequence = seq
            .parse()
            .map_err(|e: Error| parse_error(path, lineno, e.to_string()))?;
        let label: Label = label
            .parse()
            .map_err(|e: Error| parse_error(path, lineno, e.to_string()))?;
        sequences.push(seq);
        labels.push(label);
    }
    let header = header.ok_or_else(|| parse_error(path, 1, "missing metadata line"))?;
    header.condition.validate()?;
    if header.counts.total != sequences.len() {
        return Err(Error::Malformed {
            path: path.into(),
            detail: format!(
                "metadata declares {} sequences, file has {}",
                header.counts.total,
                sequences.len()
            ),
        });
    }
    let ds = SyntheticDataset {
        sequences,
        labels,
        condition: header.condition.clone(),
    };
    Ok((header, ds))
}

pub fn profile_csv(profile: &GamaProfile) -> String {
    let mut out = String::from("position,M,epsilon_flag\n");
    for (i, (v, f)) in profile.values().iter().zip(profile.epsilon_used()).enumerate() {
        let _ = writeln!(out, "{},{v:e},{}", i + 1, u8::from(*f));
    }
    out
}

pub fn save_profile_csv(path: &Path, profile: &GamaProfile) -> Result<()> {
    write_file(path, profile_csv(profile).as_bytes())
}

pub fn load_profile_csv(path: &Path) -> Result<GamaProfile> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "position,M,epsilon_flag")) => {}
        _ => return Err(parse_error(path, 1, "expected header position,M,epsilon_flag")),
    }
    let mut values = Vec::new();
    let mut flags = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_error(path, lineno, format!("expected 3 fields, got {}", fields.len())));
        }
        let position: usize = fields[0]
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad position {:?}", fields[0])))?;
        if position != values.len() + 1 {
            return Err(parse_error(path, lineno, format!("position {position} out of order")));
        }
        values.push(
            fields[1]
                .parse::<f64>()
                .map_err(|_| parse_error(path, lineno, format!("bad M {:?}", fields[1])))?,
        );
        flags.push(match fields[2] {
            "0" => false,
            "1" => true,
            other => return Err(parse_error(path, lineno, format!("bad epsilon_flag {other:?}"))),
        });
    }
    GamaProfile::new(values, flags)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub condition: String,
    pub epsilon: f64,
    pub profile: GamaProfile,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub condition: String,
    pub logic: Logic,
    pub positions: String,
    pub noise_ratio: f64,
    pub fnr: f64,
    pub top_k_full: usize,
    pub baseline_fnr: f64,
}

impl ResultRow {
    pub fn new(r: &RetrievalResult, baseline_fnr: f64) -> Self {
        Self {
            condition: r.condition.clone(),
            logic: r.logic,
            positions: r
                .positions
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join("-"),
            noise_ratio: r.noise_ratio(),
            fnr: r.fnr,
            top_k_full: r.top_k_full,
            baseline_fnr,
        }
    }
}

pub fn save_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["condition", "logic", "positions", "noise_ratio", "fnr", "top_k_full", "baseline_fnr"])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_file(path, &bytes)
}

pub fn load_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let text = read_text(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| parse_error(path, i + 2, e.to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityRecord {
    pub sequence: TokenSequence,
    pub total_energy: f64,
    pub per_position_energies: Vec<f64>,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// `sequence<TAB>total_energy<TAB>e1,e2,...,eL`. With `strict`, totals must
/// equal the per-position sums to within 1e-6.
pub fn load_affinity_dataset(path: &Path, strict: bool) -> Result<Vec<AffinityRecord>> {
    let text = read_text(path)?;
    let mut records: Vec<AffinityRecord> = Vec::new();
    for (lineno, line) in data_lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_error(path, lineno, format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        let sequence: TokenSequence = fields[0]
            .parse()
            .map_err(|e: Error| parse_error(path, lineno, e.to_string()))?;
        let total_energy: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("non-numeric total energy {:?}", fields[1])))?;
        let per_position_energies = fields[2]
            .split(',')
            .map(|e| {
                e.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_error(path, lineno, format!("non-numeric energy {e:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if per_position_energies.len() != sequence.len() {
            return Err(parse_error(
                path,
                lineno,
                format!(
                    "{} energies for a sequence of length {}",
                    per_position_energies.len(),
                    sequence.len()
                ),
            ));
        }
        if let Some(first) = records.first() {
            if sequence.len() != first.sequence.len() {
                return Err(parse_error(
                    path,
                    lineno,
                    format!("length {} differs from {}", sequence.len(), first.sequence.len()),
                ));
            }
        }
        if strict {
            let sum: f64 = per_position_energies.iter().sum();
            if (sum - total_energy).abs() > STRICT_ENERGY_TOLERANCE {
                return Err(parse_error(
                    path,
                    lineno,
                    format!("per-position sum {sum} differs from total {total_energy}"),
                ));
            }
        }
        records.push(AffinityRecord {
            sequence,
            total_energy,
            per_position_energies,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadCountRecord {
    pub sequence: TokenSequence,
    pub reads: u64,
}

/// All rows of a `sequence<TAB>reads` file.
pub fn load_readcount_records(path: &Path) -> Result<Vec<ReadCountRecord>> {
    let text = read_text(path)?;
    data_lines(&text)
        .map(|(lineno, line)| {
            let (seq, reads) = line
                .split_once('\t')
                .ok_or_else(|| parse_error(path, lineno, "expected sequence<TAB>reads"))?;
            let sequence: TokenSequence = seq
                .parse()
                .map_err(|e: Error| parse_error(path, lineno, e.to_string()))?;
            let reads: u64 = reads
                .trim()
                .parse()
                .map_err(|_| parse_error(path, lineno, format!("bad read count {reads:?}")))?;
            if reads == 0 {
                return Err(parse_error(path, lineno, "read count must be ≥ 1"));
            }
            Ok(ReadCountRecord { sequence, reads })
        })
        .collect()
}

/// Sequences with at least `min_reads` reads, in file order.
pub fn load_readcount_dataset(path: &Path, min_reads: u64) -> Result<Vec<TokenSequence>> {
    Ok(load_readcount_records(path)?
        .into_iter()
        .filter(|r| r.reads >= min_reads)
        .map(|r| r.sequence)
        .collect())
}

/// Column-normalized token frequencies, `22 × L`; START/STOP rows stay zero.
pub fn frequency_profile(sequences: &[TokenSequence]) -> Result<Array2<f64>> {
    let first = sequences.first().ok_or(Error::EmptyDataset)?;
    let len = first.len();
    let mut counts = Array2::<f64>::zeros((INPUT_DIM, len));
    for (index, seq) in sequences.iter().enumerate() {
        if seq.len() != len {
            return Err(Error::MixedLengths {
                expected: len,
                found: seq.len(),
                index,
            });
        }
        for (pos, &tok) in seq.indices().iter().enumerate() {
            counts[[tok as usize, pos]] += 1.0;
        }
    }
    counts /= sequences.len() as f64;
    Ok(counts)
}

pub fn frequency_csv(freq: &Array2<f64>) -> String {
    let vocab = Vocabulary::new();
    let mut out = String::from("token");
    for p in 1..=freq.ncols() {
        let _ = write!(out, ",{p}");
    }
    out.push('\n');
    for (row, symbol) in freq.rows().into_iter().zip(vocab.input_tokens()) {
        out.push_str(symbol);
        for v in row {
            let _ = write!(out, ",{v:e}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    /// Relative path → SHA-256.
    pub files: BTreeMap<String, String>,
}

pub const RUN_MANIFEST: &str = "manifest.json";

impl RunManifest {
    /// Hash every regular file under `root` except the manifest itself.
    pub fn scan(root: &Path) -> Result<Self> {
        let mut files = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
                let path = entry.map_err(|e| Error::io(&dir, e))?.path();
                if path.is_dir() {
                    stack.push(path);
                    continue;
                }
                let rel = path
                    .strip_prefix(root)
                    .expect("under root")
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                if rel != RUN_MANIFEST {
                    files.insert(rel, file_sha256(&path)?);
                }
            }
        }
        Ok(Self { files })
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        write_json(&root.join(RUN_MANIFEST), self)
    }

    pub fn load(root: &Path) -> Result<Self> {
        read_json(&root.join(RUN_MANIFEST))
    }

    pub fn verify(&self, root: &Path) -> Result<()> {
        for (rel, sha) in &self.files {
            verify_checksum(&root.join(rel), sha)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::init_model;
    use tempfile::tempdir;

    #[test]
    fn checkpoint_header_layout() {
        let p = init_model(2, 0).unwrap();
        let bytes = encode_checkpoint(&p);
        assert_eq!(&bytes[..4], b"GAMA");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 14);
        assert_eq!(&bytes[16..30], b"lstm.weight_ih");
    }

    #[test]
    fn checkpoint_version_and_magic_errors() {
        let p = init_model(3, 1).unwrap();
        let path = Path::new("x.ckpt");
        let mut bytes = encode_checkpoint(&p);
        bytes[4] = 9;
        assert!(matches!(
            decode_checkpoint(path, &bytes),
            Err(Error::UnsupportedVersion { found: 9, .. })
        ));
        bytes[0] = b'X';
        assert!(matches!(decode_checkpoint(path, &bytes), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn tensor_layout_row_major() {
        let t = ArrayD::from_shape_vec(IxDyn(&[2, 3]), (0..6).map(f64::from).collect()).unwrap();
        let bytes = encode_tensor(&t);
        assert_eq!(&bytes[..4], b"GIG1");
        assert_eq!(bytes[4], 2);
        assert_eq!(bytes.len(), 5 + 16 + 48);
        let third = f64::from_le_bytes(bytes[21 + 16..21 + 24].try_into().unwrap());
        assert_eq!(third, 2.0);
        let path = Path::new("t.gig");
        assert_eq!(decode_tensor(path, &bytes).unwrap(), t);
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_tensor(path, &extra), Err(Error::Malformed { .. })));
    }

    #[test]
    fn readcount_threshold() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("reads.tsv");
        fs::write(&path, "ACD\t1\nEFG\t2\nHIK\t3\nEFG\t2\n").unwrap();
        let kept = load_readcount_dataset(&path, DEFAULT_MIN_READS).unwrap();
        let kept: Vec<String> = kept.iter().map(|s| s.to_string()).collect();
        assert_eq!(kept, ["EFG", "HIK", "EFG"]);
        assert_eq!(load_readcount_dataset(&path, 1).unwrap().len(), 4);
        fs::write(&path, "").unwrap();
        assert!(load_readcount_dataset(&path, 2).unwrap().is_empty());
        fs::write(&path, "ACD\t1\nEFG\tmany\n").unwrap();
        assert!(matches!(
            load_readcount_dataset(&path, 2),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn frequency_identical_sequences() {
        let s: TokenSequence = "ACDA".parse().unwrap();
        let f = frequency_profile(&[s.clone(), s.clone(), s]).unwrap();
        assert_eq!(f.dim(), (22, 4));
        assert_eq!(f[[0, 0]], 1.0);
        assert_eq!(f[[1, 1]], 1.0);
        assert_eq!(f[[2, 2]], 1.0);
        assert_eq!(f[[0, 3]], 1.0);
        assert_eq!(f.sum(), 4.0);
        let csv = frequency_csv(&f);
        assert!(csv.starts_with("token,1,2,3,4\nA,1e0,0e0,0e0,1e0\n"));
        assert!(frequency_profile(&[]).is_err());
        let mixed = ["AC".parse().unwrap(), "ACD".parse().unwrap()];
        assert!(matches!(frequency_profile(&mixed), Err(Error::MixedLengths { .. })));
    }
}
