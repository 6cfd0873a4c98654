//! Random scene recipes drawn with replacement from the assigned pools.
//!
//! Each scene is drawn from its own RNG, seeded by mixing the dataset seed
//! with the scene id, so a scene's content never depends on how many scenes
//! came before it or on the order they are rendered in.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{corpus_stats, Catalog, PoolAssignment, Region, RoomKey};
use crate::dsp::SplitMode;
use crate::error::{Error, Result};
use crate::seed;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// Seed salt separating validation realisations from training ones.
pub const VALIDATION_SEED_SALT: u64 = 0x5641_4C49_4441_5445;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusWeighting {
    /// Probability proportional to 1 / average utterance length.
    #[default]
    InverseAvgLength,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub snr_range: [f64; 2],
    pub n_sources: Vec<usize>,
    pub azimuth_range: [f64; 2],
    pub boundary_ms: f64,
    pub split_mode: SplitMode,
    pub corpus_weighting: CorpusWeighting,
    pub redraw_limit: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            snr_range: [-5.0, 10.0],
            n_sources: vec![1, 2, 3],
            azimuth_range: [-90.0, 90.0],
            boundary_ms: 50.0,
            split_mode: SplitMode::FromZero,
            corpus_weighting: CorpusWeighting::InverseAvgLength,
            redraw_limit: 100,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.snr_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("bad SNR range [{lo}, {hi}]")));
        }
        if self.n_sources.is_empty() || self.n_sources.contains(&0) {
            return Err(Error::Config(
                "n_sources must be a non-empty set of positive counts".into(),
            ));
        }
        let [a, b] = self.azimuth_range;
        if !(a <= b && a >= -180.0 && b <= 180.0) {
            return Err(Error::Config(format!("bad azimuth range [{a}, {b}]")));
        }
        if !(self.boundary_ms >= 0.0 && self.boundary_ms.is_finite()) {
            return Err(Error::Config(format!("bad boundary {} ms", self.boundary_ms)));
        }
        if self.redraw_limit == 0 {
            return Err(Error::Config("redraw_limit must be at least 1".into()));
        }
        Ok(())
    }
}

/// Corpus selection probabilities from average utterance lengths.
pub fn corpus_weights(avg_len_s: &BTreeMap<String, f64>, mode: CorpusWeighting) -> Result<BTreeMap<String, f64>> {
    if avg_len_s.is_empty() {
        return Err(Error::InvalidArgument("no corpora to weight".into()));
    }
    let raw: BTreeMap<String, f64> = match mode {
        CorpusWeighting::Uniform => avg_len_s.keys().map(|k| (k.clone(), 1.0)).collect(),
        CorpusWeighting::InverseAvgLength => avg_len_s
            .iter()
            .map(|(k, &a)| {
                if a > 0.0 {
                    Ok((k.clone(), 1.0 / a))
                } else {
                    Err(Error::InvalidArgument(format!("corpus {k} has average length {a}")))
                }
            })
            .collect::<Result<_>>()?,
    };
    let total: f64 = raw.values().sum();
    Ok(raw.into_iter().map(|(k, v)| (k, v / total)).collect())
}

// ---------------------------------------------------------------------------
// Scene specs

/// A catalog item reference: the owning corpus/database id and the path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AssetRef {
    pub id: String,
    pub path: String,
}

/// A noise file reference and where its segment starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSegment {
    pub id: String,
    pub path: String,
    pub start_s: f64,
}

/// Complete recipe for one mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub scene_id: u64,
    pub speech_ref: AssetRef,
    pub noise_refs: Vec<NoiseSegment>,
    pub room_id: String,
    pub speech_brir: AssetRef,
    pub noise_brirs: Vec<AssetRef>,
    pub snr_db: f64,
    pub boundary_ms: f64,
    pub scene_seed: u64,
}

pub fn scene_seed(dataset_seed: u64, scene_id: u64) -> u64 {
    seed::derive(dataset_seed, scene_id)
}

struct WeightedCorpus {
    cumulative: f64,
    pool: Vec<usize>,
}

struct NoiseDb {
    files: Vec<(usize, Region)>,
}

struct BrirDb {
    /// Per room: pooled BRIRs whose azimuth lies in range.
    rooms: Vec<(RoomKey, Vec<usize>)>,
}

/// Pool-bound scene sampler with precomputed lookup tables.
pub struct Sampler<'a> {
    catalog: &'a Catalog,
    config: SamplerConfig,
    corpora: Vec<WeightedCorpus>,
    noise_dbs: Vec<NoiseDb>,
    brir_dbs: Vec<BrirDb>,
}

impl<'a> Sampler<'a> {
    pub fn new(catalog: &'a Catalog, pools: &PoolAssignment, config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        let stats = corpus_stats(catalog);
        let avg: BTreeMap<String, f64> = pools
            .speech
            .iter()
            .filter(|(_, p)| !p.is_empty())
            .map(|(c, _)| (c.clone(), stats[c].avg_len_s))
            .collect();
        if avg.is_empty() {
            return Err(Error::UnsatisfiableScene("speech pool is empty".into()));
        }
        let weights = corpus_weights(&avg, config.corpus_weighting)?;
        let mut cumulative = 0.0;
        let corpora = weights
            .into_iter()
            .map(|(id, p)| {
                cumulative += p;
                WeightedCorpus {
                    pool: pools.speech[&id].clone(),
                    cumulative,
                }
            })
            .collect();

        let mut by_db: BTreeMap<&str, Vec<(usize, Region)>> = BTreeMap::new();
        for (&i, &r) in &pools.noise_regions {
            by_db
                .entry(catalog.noise[i].database_id.as_str())
                .or_default()
                .push((i, r));
        }
        let noise_dbs: Vec<NoiseDb> = by_db.into_values().map(|files| NoiseDb { files }).collect();
        if noise_dbs.is_empty() {
            return Err(Error::UnsatisfiableScene("noise pool is empty".into()));
        }

        let [az_lo, az_hi] = config.azimuth_range;
        let mut rooms_by_db: BTreeMap<&str, Vec<(RoomKey, Vec<usize>)>> = BTreeMap::new();
        for (room, idx) in &pools.brirs {
            let in_range = idx
                .iter()
                .copied()
                .filter(|&i| (az_lo..=az_hi).contains(&catalog.brirs[i].azimuth_deg))
                .collect();
            rooms_by_db
                .entry(room.0.as_str())
                .or_default()
                .push((room.clone(), in_range));
        }
        let brir_dbs: Vec<BrirDb> = rooms_by_db.into_values().map(|rooms| BrirDb { rooms }).collect();
        if brir_dbs.is_empty() {
            return Err(Error::UnsatisfiableScene("BRIR pool is empty".into()));
        }
        Ok(Self {
            catalog,
            config: config.clone(),
            corpora,
            noise_dbs,
            brir_dbs,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    fn pick_corpus<R: Rng>(&self, rng: &mut R) -> &WeightedCorpus {
        let u: f64 = rng.gen::<f64>() * self.corpora.last().map_or(1.0, |c| c.cumulative);
        self.corpora
            .iter()
            .find(|c| u < c.cumulative)
            .unwrap_or_else(|| self.corpora.last().expect("at least one corpus"))
    }

    /// Draws one scene. The speech corpus, utterance, source count, noise
    /// segments, room, BRIRs and SNR are drawn in that order.
    pub fn sample<R: Rng>(&self, rng: &mut R, scene_id: u64, scene_seed: u64) -> Result<SceneSpec> {
        let cfg = &self.config;
        let corpus = self.pick_corpus(rng);
        let utt = &self.catalog.speech[corpus.pool[rng.gen_range(0..corpus.pool.len())]];
        let n_sources = cfg.n_sources[rng.gen_range(0..cfg.n_sources.len())];

        let mut noise_refs = Vec::with_capacity(n_sources);
        for _ in 0..n_sources {
            noise_refs.push(self.sample_noise(rng, utt.duration_s)?);
        }

        let (room, chosen) = self.sample_brirs(rng, 1 + n_sources)?;
        let brir_ref = |i: usize| {
            let b = &self.catalog.brirs[i];
            AssetRef {
                id: b.database_id.clone(),
                path: b.path.clone(),
            }
        };
        let [lo, hi] = cfg.snr_range;
        let snr_db = if lo < hi { rng.gen_range(lo..=hi) } else { lo };
        Ok(SceneSpec {
            scene_id,
            speech_ref: AssetRef {
                id: utt.corpus_id.clone(),
                path: utt.path.clone(),
            },
            noise_refs,
            room_id: room.1.clone(),
            speech_brir: brir_ref(chosen[0]),
            noise_brirs: chosen[1..].iter().map(|&i| brir_ref(i)).collect(),
            snr_db,
            boundary_ms: cfg.boundary_ms,
            scene_seed,
        })
    }

    fn sample_noise<R: Rng>(&self, rng: &mut R, len_s: f64) -> Result<NoiseSegment> {
        for _ in 0..self.config.redraw_limit {
            let db = &self.noise_dbs[rng.gen_range(0..self.noise_dbs.len())];
            let (i, region) = db.files[rng.gen_range(0..db.files.len())];
            let slack = region.len_s() - len_s;
            if slack < 0.0 {
                continue;
            }
            let start_s = region.start_s + rng.gen::<f64>() * slack;
            let item = &self.catalog.noise[i];
            return Ok(NoiseSegment {
                id: item.database_id.clone(),
                path: item.path.clone(),
                start_s,
            });
        }
        Err(Error::UnsatisfiableScene(format!(
            "no noise region of {len_s:.2} s found in {} draws",
            self.config.redraw_limit
        )))
    }

    fn sample_brirs<R: Rng>(&self, rng: &mut R, needed: usize) -> Result<(&RoomKey, Vec<usize>)> {
        for _ in 0..self.config.redraw_limit {
            let db = &self.brir_dbs[rng.gen_range(0..self.brir_dbs.len())];
            let (room, cands) = &db.rooms[rng.gen_range(0..db.rooms.len())];
            if cands.len() < needed {
                continue;
            }
            let picked = index::sample(rng, cands.len(), needed)
                .into_iter()
                .map(|k| cands[k])
                .collect();
            return Ok((room, picked));
        }
        Err(Error::UnsatisfiableScene(format!(
            "no room with {needed} pooled BRIRs in range found in {} draws",
            self.config.redraw_limit
        )))
    }

    /// Draws scene `scene_id` of the dataset seeded with `dataset_seed`.
    pub fn scene(&self, dataset_seed: u64, scene_id: u64) -> Result<SceneSpec> {
        let s = scene_seed(dataset_seed, scene_id);
        self.sample(&mut seed::rng(s), scene_id, s)
            .map_err(|e| e.in_scene(scene_id))
    }
}

/// One-shot form of [`Sampler::sample`].
pub fn sample_scene<R: Rng>(
    catalog: &Catalog,
    pools: &PoolAssignment,
    config: &SamplerConfig,
    rng: &mut R,
    scene_id: u64,
    scene_seed: u64,
) -> Result<SceneSpec> {
    Sampler::new(catalog, pools, config)?.sample(rng, scene_id, scene_seed)
}

// ---------------------------------------------------------------------------
// Dataset manifests

/// Which dataset role a manifest plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSplit {
    Train,
    Val,
    Test,
}

impl DatasetSplit {
    /// Training uses the configured weighting; validation and test draw
    /// corpora with equal probability.
    pub fn adjust_config(self, base: &SamplerConfig) -> SamplerConfig {
        let mut cfg = base.clone();
        if self != DatasetSplit::Train {
            cfg.corpus_weighting = CorpusWeighting::Uniform;
        }
        cfg
    }

    /// Validation reuses the training pools with an independent seed.
    pub fn effective_seed(self, seed: u64) -> u64 {
        match self {
            DatasetSplit::Val => seed::derive(seed, VALIDATION_SEED_SALT),
            _ => seed,
        }
    }

    pub fn pools<'p>(self, train: &'p PoolAssignment, test: &'p PoolAssignment) -> &'p PoolAssignment {
        match self {
            DatasetSplit::Test => test,
            _ => train,
        }
    }
}

impl std::str::FromStr for DatasetSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format_version: u32,
    pub dataset_seed: u64,
    pub config: SamplerConfig,
    pub pool_fingerprint: String,
    pub target_hours: f64,
    pub split: DatasetSplit,
    pub total_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub scenes: Vec<SceneSpec>,
}

impl DatasetManifest {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for s in &self.scenes {
            out.push_str(&serde_json::to_string(s).expect("scene serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: ManifestHeader =
            serde_json::from_str(lines.next().ok_or_else(|| Error::Manifest("empty manifest".into()))?)
                .map_err(|e| Error::Manifest(format!("header: {e}")))?;
        if header.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        let scenes = lines
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Manifest(format!("scene line {}: {e}", i + 1))))
            .collect::<Result<Vec<SceneSpec>>>()?;
        Ok(Self { header, scenes })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// The leading scenes a plan with a smaller target would have produced.
    pub fn prefix_for_hours(&self, catalog: &Catalog, target_hours: f64) -> Result<Self> {
        let target_s = target_hours * 3600.0;
        let mut total = 0.0;
        let mut scenes = Vec::new();
        for s in &self.scenes {
            if total >= target_s {
                break;
            }
            total += speech_duration(catalog, s)?;
            scenes.push(s.clone());
        }
        Ok(Self {
            header: ManifestHeader {
                target_hours,
                total_duration_s: total,
                ..self.header.clone()
            },
            scenes,
        })
    }
}

pub fn speech_duration(catalog: &Catalog, scene: &SceneSpec) -> Result<f64> {
    catalog
        .find_speech(&scene.speech_ref.id, &scene.speech_ref.path)
        .map(|s| s.duration_s)
        .ok_or_else(|| {
            Error::Resolution(format!(
                "scene {}: utterance {}:{} not in catalog",
                scene.scene_id, scene.speech_ref.id, scene.speech_ref.path
            ))
        })
}

/// Draws scenes 0, 1, 2, ... until the summed utterance duration reaches
/// `target_hours`.
pub fn plan_dataset(
    target_hours: f64,
    catalog: &Catalog,
    pools: &PoolAssignment,
    config: &SamplerConfig,
    dataset_seed: u64,
    split: DatasetSplit,
) -> Result<DatasetManifest> {
    if !(target_hours > 0.0 && target_hours.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target hours must be positive, got {target_hours}"
        )));
    }
    let sampler = Sampler::new(catalog, pools, config)?;
    let target_s = target_hours * 3600.0;
    let mut total = 0.0;
    let mut scenes = Vec::new();
    while total < target_s {
        let scene = sampler.scene(dataset_seed, scenes.len() as u64)?;
        total += speech_duration(catalog, &scene)?;
        scenes.push(scene);
    }
    Ok(DatasetManifest {
        header: ManifestHeader {
            format_version: MANIFEST_FORMAT_VERSION,
            dataset_seed,
            config: config.clone(),
            pool_fingerprint: pools.fingerprint(catalog),
            target_hours,
            split,
            total_duration_s: total,
        },
        scenes,
    })
}

// ---------------------------------------------------------------------------
// Repetition statistics

/// Which mixtures count as using a repeated utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepeatCounting {
    /// Every mixture whose utterance occurs two or more times.
    #[default]
    AllOccurrences,
    /// Only the second and later occurrences.
    LaterOccurrences,
}

/// Duration share of mixtures using repeated utterances, in percent of the
/// total manifest duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub per_corpus: BTreeMap<String, f64>,
    pub total: f64,
}

pub fn repetition_stats(
    manifest: &DatasetManifest,
    catalog: &Catalog,
    counting: RepeatCounting,
) -> Result<RepetitionReport> {
    if manifest.scenes.is_empty() {
        return Err(Error::InvalidArgument("manifest has no scenes".into()));
    }
    let mut uses: Vec<(&AssetRef, f64)> = Vec::with_capacity(manifest.scenes.len());
    for s in &manifest.scenes {
        uses.push((&s.speech_ref, speech_duration(catalog, s)?));
    }
    Ok(repetition_from_uses(&uses, counting))
}

fn repetition_from_uses(uses: &[(&AssetRef, f64)], counting: RepeatCounting) -> RepetitionReport {
    let mut counts: HashMap<&AssetRef, usize> = HashMap::new();
    for (r, _) in uses {
        *counts.entry(*r).or_default() += 1;
    }
    let total_s: f64 = uses.iter().map(|(_, d)| d).sum();
    let mut repeated: BTreeMap<String, f64> = BTreeMap::new();
    let mut seen: HashMap<&AssetRef, usize> = HashMap::new();
    for (r, d) in uses {
        let occurrence = seen.entry(*r).or_default();
        *occurrence += 1;
        let counts_as_repeat = match counting {
            RepeatCounting::AllOccurrences => counts[r] >= 2,
            RepeatCounting::LaterOccurrences => *occurrence >= 2,
        };
        let share = repeated.entry(r.id.clone()).or_default();
        if counts_as_repeat {
            *share += d;
        }
    }
    let per_corpus: BTreeMap<String, f64> = repeated.into_iter().map(|(c, d)| (c, 100.0 * d / total_s)).collect();
    let total = per_corpus.values().sum();
    RepetitionReport { per_corpus, total }
}
