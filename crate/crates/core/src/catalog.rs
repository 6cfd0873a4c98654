//! Asset catalogs: speech corpora, noise databases and BRIR databases,
//! their summary statistics, and the deterministic train/test pool rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;
use crate::wav;

pub mod reference;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechItem {
    pub path: String,
    pub corpus_id: String,
    pub speaker_id: String,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseItem {
    pub path: String,
    pub database_id: String,
    pub noise_type: String,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrirItem {
    pub path: String,
    pub database_id: String,
    pub room_id: String,
    pub azimuth_deg: f64,
    pub index_in_room: usize,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetKind {
    Speech,
    Noise,
    Brir,
}

/// Immutable set of scanned assets. Each list is sorted by path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    pub speech: Vec<SpeechItem>,
    pub noise: Vec<NoiseItem>,
    pub brirs: Vec<BrirItem>,
}

/// Rooms are keyed by database and room id together.
pub type RoomKey = (String, String);

impl Catalog {
    /// Builds a catalog from items in any order: sorts by path, assigns
    /// `index_in_room` by ascending azimuth, and checks invariants.
    pub fn from_items(
        mut speech: Vec<SpeechItem>,
        mut noise: Vec<NoiseItem>,
        mut brirs: Vec<BrirItem>,
    ) -> Result<Self> {
        speech.sort_by(|a, b| a.path.cmp(&b.path).then(a.corpus_id.cmp(&b.corpus_id)));
        noise.sort_by(|a, b| a.path.cmp(&b.path).then(a.database_id.cmp(&b.database_id)));
        brirs.sort_by(|a, b| a.path.cmp(&b.path).then(a.database_id.cmp(&b.database_id)));

        let mut seen = BTreeSet::new();
        for s in &speech {
            if !(s.duration_s > 0.0) {
                return Err(Error::Config(format!("{}: non-positive duration", s.path)));
            }
            if !seen.insert((s.corpus_id.as_str(), s.path.as_str())) {
                return Err(Error::Config(format!("{}: duplicate path in corpus", s.path)));
            }
        }
        for n in &noise {
            if !(n.duration_s > 0.0) {
                return Err(Error::Config(format!("{}: non-positive duration", n.path)));
            }
        }
        for b in &brirs {
            if !(-180.0..=180.0).contains(&b.azimuth_deg) {
                return Err(Error::Config(format!(
                    "{}: azimuth {} outside [-180, 180]",
                    b.path, b.azimuth_deg
                )));
            }
        }
        let mut by_room: BTreeMap<RoomKey, Vec<usize>> = BTreeMap::new();
        for (i, b) in brirs.iter().enumerate() {
            by_room
                .entry((b.database_id.clone(), b.room_id.clone()))
                .or_default()
                .push(i);
        }
        for idx in by_room.values_mut() {
            idx.sort_by(|&a, &b| {
                brirs[a]
                    .azimuth_deg
                    .total_cmp(&brirs[b].azimuth_deg)
                    .then_with(|| brirs[a].path.cmp(&brirs[b].path))
            });
            for (k, &i) in idx.iter().enumerate() {
                brirs[i].index_in_room = k;
            }
        }
        Ok(Self { speech, noise, brirs })
    }

    pub fn corpora(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut out: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.speech.iter().enumerate() {
            out.entry(s.corpus_id.as_str()).or_default().push(i);
        }
        out
    }

    pub fn noise_databases(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut out: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, n) in self.noise.iter().enumerate() {
            out.entry(n.database_id.as_str()).or_default().push(i);
        }
        out
    }

    /// BRIR indices per room, ordered by `index_in_room`.
    pub fn rooms(&self) -> BTreeMap<RoomKey, Vec<usize>> {
        let mut out: BTreeMap<RoomKey, Vec<usize>> = BTreeMap::new();
        for (i, b) in self.brirs.iter().enumerate() {
            out.entry((b.database_id.clone(), b.room_id.clone()))
                .or_default()
                .push(i);
        }
        for idx in out.values_mut() {
            idx.sort_by_key(|&i| self.brirs[i].index_in_room);
        }
        out
    }

    pub fn find_speech(&self, corpus_id: &str, path: &str) -> Option<&SpeechItem> {
        self.speech
            .binary_search_by(|s| s.path.as_str().cmp(path).then(s.corpus_id.as_str().cmp(corpus_id)))
            .ok()
            .map(|i| &self.speech[i])
    }

    pub fn find_noise(&self, database_id: &str, path: &str) -> Option<&NoiseItem> {
        self.noise
            .binary_search_by(|n| n.path.as_str().cmp(path).then(n.database_id.as_str().cmp(database_id)))
            .ok()
            .map(|i| &self.noise[i])
    }

    pub fn find_brir(&self, database_id: &str, path: &str) -> Option<&BrirItem> {
        self.brirs
            .binary_search_by(|b| b.path.as_str().cmp(path).then(b.database_id.as_str().cmp(database_id)))
            .ok()
            .map(|i| &self.brirs[i])
    }

    /// Serializes to the JSON Lines cache format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let records = self
            .speech
            .iter()
            .map(CacheRecord::from_speech)
            .chain(self.noise.iter().map(CacheRecord::from_noise))
            .chain(self.brirs.iter().map(CacheRecord::from_brir));
        for r in records {
            out.push_str(&serde_json::to_string(&r).expect("cache record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let (mut speech, mut noise, mut brirs) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: CacheRecord = serde_json::from_str(line)
                .map_err(|e| Error::Config(format!("catalog cache line {}: {e}", lineno + 1)))?;
            let missing = |f: &str| Error::Config(format!("catalog cache line {}: missing {f}", lineno + 1));
            match r.kind {
                AssetKind::Speech => speech.push(SpeechItem {
                    speaker_id: r.speaker_id.ok_or_else(|| missing("speaker_id"))?,
                    path: r.path,
                    corpus_id: r.id,
                    duration_s: r.duration_s,
                }),
                AssetKind::Noise => noise.push(NoiseItem {
                    noise_type: r.noise_type.ok_or_else(|| missing("noise_type"))?,
                    path: r.path,
                    database_id: r.id,
                    duration_s: r.duration_s,
                }),
                AssetKind::Brir => brirs.push(BrirItem {
                    room_id: r.room_id.ok_or_else(|| missing("room_id"))?,
                    azimuth_deg: r.azimuth_deg.ok_or_else(|| missing("azimuth_deg"))?,
                    index_in_room: r.index_in_room.ok_or_else(|| missing("index_in_room"))?,
                    path: r.path,
                    database_id: r.id,
                    duration_s: r.duration_s,
                }),
            }
        }
        Self::from_items(speech, noise, brirs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }
}

/// One line of the catalog cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheRecord {
    pub kind: AssetKind,
    pub id: String,
    pub path: String,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuth_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_in_room: Option<usize>,
}

impl CacheRecord {
    fn base(kind: AssetKind, id: &str, path: &str, duration_s: f64) -> Self {
        Self {
            kind,
            id: id.to_owned(),
            path: path.to_owned(),
            duration_s,
            speaker_id: None,
            noise_type: None,
            room_id: None,
            azimuth_deg: None,
            index_in_room: None,
        }
    }

    fn from_speech(s: &SpeechItem) -> Self {
        Self {
            speaker_id: Some(s.speaker_id.clone()),
            ..Self::base(AssetKind::Speech, &s.corpus_id, &s.path, s.duration_s)
        }
    }

    fn from_noise(n: &NoiseItem) -> Self {
        Self {
            noise_type: Some(n.noise_type.clone()),
            ..Self::base(AssetKind::Noise, &n.database_id, &n.path, n.duration_s)
        }
    }

    fn from_brir(b: &BrirItem) -> Self {
        Self {
            room_id: Some(b.room_id.clone()),
            azimuth_deg: Some(b.azimuth_deg),
            index_in_room: Some(b.index_in_room),
            ..Self::base(AssetKind::Brir, &b.database_id, &b.path, b.duration_s)
        }
    }
}

// ---------------------------------------------------------------------------
// Config and scanning

/// Fractions and seed for the train/test pool rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub speech_fraction: f64,
    pub noise_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            speech_fraction: 0.8,
            noise_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("speech_fraction", self.speech_fraction),
            ("noise_fraction", self.noise_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        Ok(())
    }
}

/// One corpus or database in the catalog config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub id: String,
    pub kind: AssetKind,
    pub root: PathBuf,
    #[serde(default = "default_include")]
    pub include: Vec<String>,
    /// Regex applied to the root-relative path ('/'-separated). Named groups
    /// `speaker`, `type`, `room` and `azimuth` supply metadata; unnamed
    /// fields fall back to the parent directory (speaker, room) or file stem
    /// (type). BRIR entries must capture `azimuth`.
    #[serde(default)]
    pub pattern: Option<String>,
}

fn default_include() -> Vec<String> {
    vec!["**/*.wav".to_owned()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogConfig {
    pub entries: Vec<CatalogEntry>,
    #[serde(default)]
    pub split: SplitConfig,
}

impl CatalogConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        let mut ids = BTreeSet::new();
        for e in &self.entries {
            if !ids.insert((e.kind, e.id.as_str())) {
                return Err(Error::Config(format!("duplicate entry id {:?}", e.id)));
            }
            e.compile()?;
        }
        Ok(())
    }
}

struct CompiledEntry {
    globs: GlobSet,
    pattern: Option<Regex>,
}

impl CatalogEntry {
    fn compile(&self) -> Result<CompiledEntry> {
        if self.include.is_empty() {
            return Err(Error::Config(format!("{}: empty include list", self.id)));
        }
        let mut b = GlobSetBuilder::new();
        for g in &self.include {
            b.add(Glob::new(g).map_err(|e| Error::Config(format!("{}: glob {g:?}: {e}", self.id)))?);
        }
        let globs = b.build().map_err(|e| Error::Config(format!("{}: {e}", self.id)))?;
        let pattern = self
            .pattern
            .as_deref()
            .map(Regex::new)
            .transpose()
            .map_err(|e| Error::Config(format!("{}: pattern: {e}", self.id)))?;
        if self.kind == AssetKind::Brir
            && !pattern
                .as_ref()
                .is_some_and(|p| p.capture_names().any(|n| n == Some("azimuth")))
        {
            return Err(Error::Config(format!(
                "{}: BRIR entries need a pattern with an `azimuth` group",
                self.id
            )));
        }
        Ok(CompiledEntry { globs, pattern })
    }

    fn resolved_root(&self, base_dir: &Path, data_root: Option<&Path>) -> PathBuf {
        if self.root.is_absolute() {
            self.root.clone()
        } else {
            data_root.unwrap_or(base_dir).join(&self.root)
        }
    }
}

fn walk_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if e.file_type()?.is_dir() {
            walk_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn rel_string(path: &Path, root: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Files that were matched but skipped, with the reason.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanReport {
    pub catalog: Catalog,
    pub warnings: Vec<String>,
}

enum Scanned {
    Speech(SpeechItem),
    Noise(NoiseItem),
    Brir(BrirItem),
}

fn scan_file(entry: &CatalogEntry, compiled: &CompiledEntry, path: &Path, rel: &str) -> Result<Scanned> {
    let info = wav::probe(path)?;
    if info.frames == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let caps = match &compiled.pattern {
        Some(re) => Some(
            re.captures(rel)
                .ok_or_else(|| Error::InvalidArgument("path does not match pattern".into()))?,
        ),
        None => None,
    };
    let group = |name: &str| caps.as_ref().and_then(|c| c.name(name)).map(|m| m.as_str().to_owned());
    let parent = || {
        Path::new(rel)
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| entry.id.clone())
    };
    let stem = || {
        Path::new(rel)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let path_str = path.to_string_lossy().into_owned();
    let duration_s = info.duration_s();
    Ok(match entry.kind {
        AssetKind::Speech => Scanned::Speech(SpeechItem {
            path: path_str,
            corpus_id: entry.id.clone(),
            speaker_id: group("speaker").unwrap_or_else(parent),
            duration_s,
        }),
        AssetKind::Noise => Scanned::Noise(NoiseItem {
            path: path_str,
            database_id: entry.id.clone(),
            noise_type: group("type").unwrap_or_else(stem),
            duration_s,
        }),
        AssetKind::Brir => {
            if info.channels != 2 {
                return Err(Error::InvalidArgument(format!(
                    "BRIR needs 2 channels, has {}",
                    info.channels
                )));
            }
            let az = group("azimuth").unwrap_or_default();
            let azimuth_deg: f64 = az
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("azimuth {az:?} is not a number")))?;
            if !(-180.0..=180.0).contains(&azimuth_deg) {
                return Err(Error::InvalidArgument(format!("azimuth {azimuth_deg} out of range")));
            }
            Scanned::Brir(BrirItem {
                path: path_str,
                database_id: entry.id.clone(),
                room_id: group("room").unwrap_or_else(parent),
                azimuth_deg,
                index_in_room: 0,
                duration_s,
            })
        }
    })
}

/// Walks every configured root and reads durations from WAV headers.
///
/// Relative roots resolve against `data_root` when given, else `base_dir`.
/// Unreadable or unmatched files become warnings; a corpus that ends up
/// empty is an error.
pub fn scan(config: &CatalogConfig, base_dir: &Path, data_root: Option<&Path>) -> Result<ScanReport> {
    config.validate()?;
    let (mut speech, mut noise, mut brirs) = (Vec::new(), Vec::new(), Vec::new());
    let mut warnings = Vec::new();
    for entry in &config.entries {
        let compiled = entry.compile()?;
        let root = entry.resolved_root(base_dir, data_root);
        let mut files = Vec::new();
        walk_files(&root, &mut files).map_err(|e| Error::io(&root, e))?;
        let matched: Vec<(PathBuf, String)> = files
            .into_iter()
            .map(|p| {
                let rel = rel_string(&p, &root);
                (p, rel)
            })
            .filter(|(_, rel)| compiled.globs.is_match(rel))
            .collect();
        let results: Vec<_> = matched
            .par_iter()
            .map(|(p, rel)| (p, scan_file(entry, &compiled, p, rel)))
            .collect();
        let mut count = 0;
        for (p, r) in results {
            match r {
                Ok(Scanned::Speech(s)) => speech.push(s),
                Ok(Scanned::Noise(n)) => noise.push(n),
                Ok(Scanned::Brir(b)) => brirs.push(b),
                Err(e) => {
                    let msg = format!("{}: {}", p.display(), e.root());
                    log::warn!("skipping {msg}");
                    warnings.push(msg);
                    continue;
                }
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::EmptyCorpus(format!(
                "{} ({}) has no usable files under {}",
                entry.id,
                serde_json::to_string(&entry.kind)?.trim_matches('"'),
                root.display()
            )));
        }
    }
    Ok(ScanReport {
        catalog: Catalog::from_items(speech, noise, brirs)?,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Statistics

/// Per-corpus summary in the layout of a corpus table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub speakers: usize,
    pub utterances: usize,
    pub hours: f64,
    pub avg_len_s: f64,
    pub min_len_s: f64,
    pub max_len_s: f64,
}

pub fn corpus_stats(catalog: &Catalog) -> BTreeMap<String, CorpusStats> {
    catalog
        .corpora()
        .into_iter()
        .map(|(id, idx)| {
            let durs: Vec<f64> = idx.iter().map(|&i| catalog.speech[i].duration_s).collect();
            let speakers: BTreeSet<&str> = idx.iter().map(|&i| catalog.speech[i].speaker_id.as_str()).collect();
            let total: f64 = durs.iter().sum();
            let stats = CorpusStats {
                speakers: speakers.len(),
                utterances: durs.len(),
                hours: total / 3600.0,
                avg_len_s: total / durs.len() as f64,
                min_len_s: durs.iter().copied().fold(f64::INFINITY, f64::min),
                max_len_s: durs.iter().copied().fold(0.0, f64::max),
            };
            (id.to_owned(), stats)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseStats {
    pub types: usize,
    pub files: usize,
    pub hours: f64,
}

pub fn noise_stats(catalog: &Catalog) -> BTreeMap<String, NoiseStats> {
    catalog
        .noise_databases()
        .into_iter()
        .map(|(id, idx)| {
            let types: BTreeSet<&str> = idx.iter().map(|&i| catalog.noise[i].noise_type.as_str()).collect();
            let hours = idx.iter().map(|&i| catalog.noise[i].duration_s).sum::<f64>() / 3600.0;
            (
                id.to_owned(),
                NoiseStats {
                    types: types.len(),
                    files: idx.len(),
                    hours,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrirStats {
    pub rooms: usize,
    pub brirs: usize,
}

pub fn brir_stats(catalog: &Catalog) -> BTreeMap<String, BrirStats> {
    let mut out: BTreeMap<String, BrirStats> = BTreeMap::new();
    for ((db, _), idx) in catalog.rooms() {
        let s = out.entry(db).or_insert(BrirStats { rooms: 0, brirs: 0 });
        s.rooms += 1;
        s.brirs += idx.len();
    }
    out
}

/// Rounds to one decimal, as the statistics are reported.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

// ---------------------------------------------------------------------------
// Train/test pools

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Half-open time interval `[start_s, end_s)` inside a noise file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub start_s: f64,
    pub end_s: f64,
}

impl Region {
    pub fn len_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Shuffles `count` utterances with `seed` and returns (train, test) index
/// lists into the shuffled order's source. The train share is
/// `round_half_up(fraction * count)`, kept within `[1, count - 1]`.
pub fn split_speech(count: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "speech fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if count < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split a corpus of {count} utterance(s)"
        )));
    }
    let n_train = ((fraction * count as f64 + 0.5).floor() as usize).clamp(1, count - 1);
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut seed::rng(seed));
    let test = order.split_off(n_train);
    Ok((order, test))
}

/// Train region is the leading `fraction` of the file, test the remainder.
pub fn split_noise(duration_s: f64, fraction: f64) -> Result<(Region, Region)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "noise fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if !(duration_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise duration {duration_s} must be positive"
        )));
    }
    let cut = fraction * duration_s;
    Ok((
        Region {
            start_s: 0.0,
            end_s: cut,
        },
        Region {
            start_s: cut,
            end_s: duration_s,
        },
    ))
}

/// Alternates BRIRs of one azimuth-sorted room: even positions train, odd
/// positions test.
pub fn split_brirs<T: Clone>(room: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    if room.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "room needs at least 2 BRIRs to split, has {}",
            room.len()
        )));
    }
    let train = room.iter().step_by(2).cloned().collect();
    let test = room.iter().skip(1).step_by(2).cloned().collect();
    Ok((train, test))
}

/// Assets available to one split. Indices point into the catalog lists.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolAssignment {
    pub split: Split,
    pub speech: BTreeMap<String, Vec<usize>>,
    pub noise_regions: BTreeMap<usize, Region>,
    pub brirs: BTreeMap<RoomKey, Vec<usize>>,
}

impl PoolAssignment {
    /// Applies the three pool rules to every corpus, noise file and room and
    /// returns the (train, test) pools.
    pub fn derive(catalog: &Catalog, cfg: &SplitConfig) -> Result<(Self, Self)> {
        cfg.validate()?;
        let mut train = Self::empty(Split::Train);
        let mut test = Self::empty(Split::Test);
        for (corpus, idx) in catalog.corpora() {
            let corpus_seed = seed::derive(cfg.seed, seed::str_salt(corpus));
            let (tr, te) = split_speech(idx.len(), cfg.speech_fraction, corpus_seed)
                .map_err(|e| Error::Config(format!("corpus {corpus}: {e}")))?;
            let mut tr: Vec<usize> = tr.into_iter().map(|k| idx[k]).collect();
            let mut te: Vec<usize> = te.into_iter().map(|k| idx[k]).collect();
            tr.sort_unstable();
            te.sort_unstable();
            train.speech.insert(corpus.to_owned(), tr);
            test.speech.insert(corpus.to_owned(), te);
        }
        for (i, n) in catalog.noise.iter().enumerate() {
            let (tr, te) = split_noise(n.duration_s, cfg.noise_fraction)?;
            train.noise_regions.insert(i, tr);
            test.noise_regions.insert(i, te);
        }
        for (room, idx) in catalog.rooms() {
            let (tr, te) = split_brirs(&idx).map_err(|e| Error::Config(format!("room {}/{}: {e}", room.0, room.1)))?;
            train.brirs.insert(room.clone(), tr);
            test.brirs.insert(room, te);
        }
        Ok((train, test))
    }

    fn empty(split: Split) -> Self {
        Self {
            split,
            speech: BTreeMap::new(),
            noise_regions: BTreeMap::new(),
            brirs: BTreeMap::new(),
        }
    }

    /// SHA-256 over a canonical listing of the pool contents.
    pub fn fingerprint(&self, catalog: &Catalog) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}\n", self.split));
        for (corpus, idx) in &self.speech {
            for &i in idx {
                h.update(format!("s\t{corpus}\t{}\n", catalog.speech[i].path));
            }
        }
        for (&i, r) in &self.noise_regions {
            let n = &catalog.noise[i];
            h.update(format!(
                "n\t{}\t{}\t{:?}\t{:?}\n",
                n.database_id, n.path, r.start_s, r.end_s
            ));
        }
        for ((db, room), idx) in &self.brirs {
            for &i in idx {
                h.update(format!("b\t{db}\t{room}\t{}\n", catalog.brirs[i].path));
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
