mod common;

use std::fs;

use sceneforge_core::audio::AudioBuffer;
use sceneforge_core::catalog::reference::shaped_durations;
use sceneforge_core::catalog::{
    brir_stats, corpus_stats, scan, AssetKind, Catalog, CatalogConfig, CatalogEntry, PoolAssignment,
};
use sceneforge_core::dsp::{boundary_index, downmix};
use sceneforge_core::renderer::{
    audio_path, build_dataset, render_scene, verify_dataset, AssetCache, FileLoader, RenderOptions, Role, Tolerances,
};
use sceneforge_core::resample::resample;
use sceneforge_core::sampler::{plan_dataset, DatasetManifest, DatasetSplit, SamplerConfig};
use sceneforge_core::synth::{write_fixture_tree, FixtureSpec, BRIR_PATTERN};
use sceneforge_core::wav::{self, SampleFormat};
use sceneforge_core::Error;

use common::{energy, memory_world, naive_convolve};

struct Fixture {
    tmp: tempfile::TempDir,
    cfg: CatalogConfig,
    catalog: Catalog,
    train: PoolAssignment,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let assets = tmp.path().join("assets");
    let cfg = write_fixture_tree(&assets, &FixtureSpec::default()).unwrap();
    let report = scan(&cfg, &assets, None).unwrap();
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    let (train, _) = PoolAssignment::derive(&report.catalog, &cfg.split).unwrap();
    Fixture {
        tmp,
        cfg,
        catalog: report.catalog,
        train,
    }
}

#[test]
fn scan_reports_fixture_layout() {
    let fx = fixture();
    let stats = corpus_stats(&fx.catalog);
    assert_eq!(stats["alpha"].utterances, 12);
    assert_eq!(stats["alpha"].speakers, 3);
    assert_eq!(stats["beta"].utterances, 8);
    assert_eq!(fx.catalog.noise.len(), 4);
    assert_eq!(fx.catalog.brirs.len(), 2 * 9 + 11);
    let text = fx.catalog.to_jsonl();
    assert_eq!(Catalog::from_jsonl(&text).unwrap(), fx.catalog);
}

#[test]
fn scan_skips_bad_files_and_rejects_empty_corpora() {
    let fx = fixture();
    let assets = fx.tmp.path().join("assets");
    let bad = assets.join("speech/alpha/spk00/broken.wav");
    fs::write(&bad, b"not a wav").unwrap();
    let report = scan(&fx.cfg, &assets, None).unwrap();
    assert_eq!(report.warnings.len(), 1);
    assert!(report.warnings[0].contains("broken.wav"));

    let mut cfg = fx.cfg.clone();
    cfg.entries[0].include = vec!["**/*.flac".into()];
    assert!(matches!(scan(&cfg, &assets, None), Err(Error::EmptyCorpus(_))));
}

#[test]
fn data_root_overrides_base_dir() {
    let fx = fixture();
    let assets = fx.tmp.path().join("assets");
    let elsewhere = tempfile::tempdir().unwrap();
    let report = scan(&fx.cfg, elsewhere.path(), Some(&assets)).unwrap();
    assert_eq!(report.catalog.speech.len(), fx.catalog.speech.len());
}

#[test]
fn build_verify_and_detect_tampering() {
    let fx = fixture();
    let manifest = plan_dataset(
        0.004,
        &fx.catalog,
        &fx.train,
        &SamplerConfig::default(),
        5,
        DatasetSplit::Train,
    )
    .unwrap();
    let out = fx.tmp.path().join("ds");
    let report = build_dataset(
        &manifest,
        &fx.catalog,
        &AssetCache::new(FileLoader, 16),
        &out,
        3,
        &RenderOptions::default(),
    )
    .unwrap();
    assert!(report.failures.is_empty());
    assert_eq!(report.scene_count, manifest.scenes.len());
    assert_eq!(DatasetManifest::load(&out.join("manifest.jsonl")).unwrap(), manifest);
    let v = verify_dataset(&out, None).unwrap();
    assert!(v.passed(), "{:?}", v.flagged);
    assert_eq!(v.scenes_checked, manifest.scenes.len());

    let id = manifest.scenes[0].scene_id;
    let p = audio_path(&out, id, Role::Interferer);
    let n = wav::read(&p).unwrap();
    wav::write(&p, &n.scaled(1.1), SampleFormat::Float32).unwrap();
    let v = verify_dataset(&out, None).unwrap();
    assert_eq!(v.flagged.len(), 1);
    assert_eq!(v.flagged[0].scene_id, id);
}

#[test]
fn pcm16_datasets_verify_with_format_tolerances() {
    let fx = fixture();
    let manifest = plan_dataset(
        0.002,
        &fx.catalog,
        &fx.train,
        &SamplerConfig::default(),
        8,
        DatasetSplit::Train,
    )
    .unwrap();
    let out = fx.tmp.path().join("ds16");
    let opts = RenderOptions {
        format: SampleFormat::Pcm16,
        ..RenderOptions::default()
    };
    build_dataset(&manifest, &fx.catalog, &AssetCache::new(FileLoader, 16), &out, 1, &opts).unwrap();
    let v = verify_dataset(&out, None).unwrap();
    assert_eq!(v.tolerances, Tolerances::for_format(SampleFormat::Pcm16));
    assert!(v.passed(), "{:?}", v.flagged);
    let strict = verify_dataset(&out, Some(Tolerances::for_format(SampleFormat::Float32))).unwrap();
    assert!(!strict.passed());
}

#[test]
fn scene_failures_are_reported_not_fatal() {
    let fx = fixture();
    let mut manifest = plan_dataset(
        0.002,
        &fx.catalog,
        &fx.train,
        &SamplerConfig::default(),
        9,
        DatasetSplit::Train,
    )
    .unwrap();
    manifest.scenes[0].speech_ref.path.push_str(".gone");
    let out = fx.tmp.path().join("dsx");
    let report = build_dataset(
        &manifest,
        &fx.catalog,
        &AssetCache::new(FileLoader, 16),
        &out,
        2,
        &RenderOptions::default(),
    )
    .unwrap();
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].scene_id, manifest.scenes[0].scene_id);
    assert_eq!(report.scene_count, manifest.scenes.len() - 1);
    assert!(verify_dataset(&out, None).unwrap().passed());
}

/// Rebuilds target and interferer from the recipe with naive convolution
/// and compares them with the renderer's output.
#[test]
fn rendering_matches_signal_model_oracle() {
    let world = memory_world(0.08, 21);
    let sampler =
        sceneforge_core::sampler::Sampler::new(&world.catalog, &world.train, &SamplerConfig::default()).unwrap();
    let cache = AssetCache::new(world.loader.clone(), 64);
    for id in 0..4 {
        let spec = sampler.scene(77, id).unwrap();
        let r = render_scene(&spec, &world.catalog, &cache, &RenderOptions::default()).unwrap();
        let s = world.loader.assets[&spec.speech_ref.path].samples().to_vec();
        let len = s.len();
        let k = boundary_index(spec.boundary_ms, 16000);
        let h = &world.loader.assets[&spec.speech_brir.path];
        let mut y = [vec![0.0; len], vec![0.0; len]];
        let mut n = [vec![0.0; len], vec![0.0; len]];
        for ear in 0..2 {
            let hc = h.channel(ear);
            let early: Vec<f64> = hc
                .iter()
                .enumerate()
                .map(|(i, v)| if i < k { *v } else { 0.0 })
                .collect();
            let late: Vec<f64> = hc
                .iter()
                .enumerate()
                .map(|(i, v)| if i < k { 0.0 } else { *v })
                .collect();
            y[ear] = naive_convolve(&s, &early);
            n[ear] = naive_convolve(&s, &late);
            for (seg, b) in spec.noise_refs.iter().zip(&spec.noise_brirs) {
                let full = world.loader.assets[&seg.path].samples();
                let start = (seg.start_s * 16000.0).round() as usize;
                let piece = &full[start..start + len];
                let conv = naive_convolve(piece, world.loader.assets[&b.path].channel(ear));
                n[ear].iter_mut().zip(conv).for_each(|(a, c)| *a += c);
            }
        }
        let [yl, yr] = y;
        let [nl, nr] = n;
        let y = downmix(&AudioBuffer::stereo(yl, yr, 16000).unwrap()).unwrap();
        let n = downmix(&AudioBuffer::stereo(nl, nr, 16000).unwrap()).unwrap();
        let g = (energy(y.samples()) / (energy(n.samples()) * 10f64.powf(spec.snr_db / 10.0))).sqrt();
        let peak = y
            .samples()
            .iter()
            .zip(n.samples())
            .flat_map(|(a, b)| [(a + g * b).abs(), a.abs(), (g * b).abs()])
            .fold(0.0, f64::max);
        let norm = 10f64.powf(-1.0 / 20.0) / peak;
        for i in 0..len {
            assert!((r.target.samples()[i] - norm * y.samples()[i]).abs() < 1e-9);
            assert!((r.interferer.samples()[i] - norm * g * n.samples()[i]).abs() < 1e-9);
        }
        assert!((r.applied_gain - g).abs() < 1e-9 * g);
    }
}

#[test]
fn assets_at_other_rates_are_resampled_on_load() {
    let fx = fixture();
    let beta = fx.catalog.speech.iter().find(|s| s.corpus_id == "beta").unwrap();
    let raw = wav::read(std::path::Path::new(&beta.path)).unwrap();
    assert_eq!(raw.rate(), 32000);
    let cache = AssetCache::new(FileLoader, 4);
    let got = cache.get(&beta.path, 16000).unwrap();
    assert_eq!(got.rate(), 16000);
    assert_eq!(*got, resample(&raw, 16000).unwrap());
}

fn write_wav(path: &std::path::Path, buf: &AudioBuffer) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    wav::write(path, buf, SampleFormat::Pcm16).unwrap();
}

/// A speech tree laid out like the TIMIT training and test sets, written
/// at 100 Hz so 6300 files stay small. Lengths follow the published
/// average, minimum and maximum.
#[test]
fn scan_counts_a_timit_sized_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let durations = shaped_durations(6300, 3.1, 0.9, 7.8);
    for (u, d) in durations.iter().enumerate() {
        let speaker = u / 10;
        let path = tmp
            .path()
            .join(format!("timit/dr{}/spk{speaker:03}/utt{u:04}.wav", speaker % 8));
        let n = (d * 100.0).round() as usize;
        write_wav(&path, &AudioBuffer::mono(vec![0.01; n], 100).unwrap());
    }
    let cfg = CatalogConfig {
        entries: vec![CatalogEntry {
            id: "timit".into(),
            kind: AssetKind::Speech,
            root: "timit".into(),
            include: vec!["**/*.wav".into()],
            pattern: Some(r"^[^/]+/(?P<speaker>[^/]+)/[^/]+\.wav$".into()),
        }],
        split: Default::default(),
    };
    let report = scan(&cfg, tmp.path(), None).unwrap();
    let stats = &corpus_stats(&report.catalog)["timit"];
    assert_eq!(stats.speakers, 630);
    assert_eq!(stats.utterances, 6300);
    assert_eq!((stats.hours * 10.0).round() / 10.0, 5.4);
}

/// Four rooms with 37 azimuths in 5 degree steps across the frontal plane.
#[test]
fn scan_counts_a_surrey_sized_brir_tree() {
    let tmp = tempfile::tempdir().unwrap();
    for room in ["A", "B", "C", "D"] {
        for k in 0..37 {
            let az = -90 + 5 * k;
            let path = tmp.path().join(format!("surrey/{room}/az{az:+}.wav"));
            let ir = AudioBuffer::stereo(vec![1.0, 0.5], vec![0.5, 0.25], 16000).unwrap();
            write_wav(&path, &ir);
        }
    }
    let cfg = CatalogConfig {
        entries: vec![CatalogEntry {
            id: "surrey".into(),
            kind: AssetKind::Brir,
            root: "surrey".into(),
            include: vec!["**/*.wav".into()],
            pattern: Some(BRIR_PATTERN.into()),
        }],
        split: Default::default(),
    };
    let catalog = scan(&cfg, tmp.path(), None).unwrap().catalog;
    assert_eq!(catalog.rooms().len(), 4);
    assert_eq!(catalog.brirs.len(), 148);
    let stats = &brir_stats(&catalog)["surrey"];
    assert_eq!((stats.rooms, stats.brirs), (4, 148));
}

#[test]
fn three_scene_build_writes_nine_files_and_flags_a_silent_target() {
    let fx = fixture();
    let mut manifest = plan_dataset(
        0.01,
        &fx.catalog,
        &fx.train,
        &SamplerConfig::default(),
        12,
        DatasetSplit::Train,
    )
    .unwrap();
    assert!(manifest.scenes.len() > 3);
    manifest.scenes.truncate(3);
    let out = fx.tmp.path().join("ds3");
    let report = build_dataset(
        &manifest,
        &fx.catalog,
        &AssetCache::new(FileLoader, 16),
        &out,
        2,
        &RenderOptions::default(),
    )
    .unwrap();
    assert_eq!(report.scenes.len(), 3);
    let wavs = fs::read_dir(out.join("audio")).unwrap().count();
    assert_eq!(wavs, 9);
    assert!(verify_dataset(&out, None).unwrap().passed());

    let id = manifest.scenes[1].scene_id;
    let p = audio_path(&out, id, Role::Target);
    let y = wav::read(&p).unwrap();
    wav::write(&p, &y.scaled(0.0), SampleFormat::Float32).unwrap();
    let v = verify_dataset(&out, None).unwrap();
    assert_eq!(v.flagged.len(), 1);
    assert_eq!(v.flagged[0].scene_id, id);
}

#[test]
fn hundred_scene_build_stays_within_snr_tolerance() {
    let fx = fixture();
    let mut manifest = plan_dataset(
        0.5,
        &fx.catalog,
        &fx.train,
        &SamplerConfig::default(),
        31,
        DatasetSplit::Train,
    )
    .unwrap();
    assert!(manifest.scenes.len() >= 100);
    manifest.scenes.truncate(100);
    let out = fx.tmp.path().join("ds100");
    let opts = RenderOptions::default();
    build_dataset(&manifest, &fx.catalog, &AssetCache::new(FileLoader, 64), &out, 2, &opts).unwrap();
    let v = verify_dataset(&out, None).unwrap();
    assert_eq!(v.scenes_checked, 100);
    assert!(v.max_snr_deviation_db <= 0.01, "{}", v.max_snr_deviation_db);
    assert!(v.max_linearity_error <= 1e-6, "{}", v.max_linearity_error);
}
