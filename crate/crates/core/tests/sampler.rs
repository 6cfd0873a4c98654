use std::collections::BTreeSet;

use sceneforge_core::catalog::reference::reference_catalog;
use sceneforge_core::catalog::{BrirItem, Catalog, NoiseItem, PoolAssignment, SpeechItem, SplitConfig};
use sceneforge_core::sampler::{plan_dataset, DatasetSplit, Sampler, SamplerConfig};

/// Two equal utterances, one noise file and one room whose four BRIRs
/// alternate between the splits, so each pool holds exactly two.
fn tiny_catalog(utterance_s: f64) -> Catalog {
    let speech = (0..2)
        .map(|i| SpeechItem {
            path: format!("s/u{i}.wav"),
            corpus_id: "only".into(),
            speaker_id: "spk".into(),
            duration_s: utterance_s,
        })
        .collect();
    let noise = vec![NoiseItem {
        path: "n/n0.wav".into(),
        database_id: "hum".into(),
        noise_type: "n0".into(),
        duration_s: 10.0 * utterance_s,
    }];
    let brirs = [-90.0, -30.0, 30.0, 90.0]
        .iter()
        .enumerate()
        .map(|(k, &az)| BrirItem {
            path: format!("b/room/a{k}.wav"),
            database_id: "db".into(),
            room_id: "room".into(),
            azimuth_deg: az,
            index_in_room: 0,
            duration_s: 0.5,
        })
        .collect();
    Catalog::from_items(speech, noise, brirs).unwrap()
}

#[test]
fn single_interferer_in_a_two_brir_room_uses_both() {
    let catalog = tiny_catalog(2.0);
    let (train, _) = PoolAssignment::derive(&catalog, &SplitConfig::default()).unwrap();
    let config = SamplerConfig {
        n_sources: vec![1],
        ..Default::default()
    };
    let sampler = Sampler::new(&catalog, &train, &config).unwrap();
    let expected: BTreeSet<_> = ["b/room/a0.wav", "b/room/a2.wav"].into_iter().collect();
    for id in 0..200 {
        let scene = sampler.scene(3, id).unwrap();
        assert_eq!(scene.noise_brirs.len(), 1);
        let used: BTreeSet<_> = [scene.speech_brir.path.as_str(), scene.noise_brirs[0].path.as_str()]
            .into_iter()
            .collect();
        assert_eq!(used, expected);
    }
}

#[test]
fn snr_sample_mean_matches_uniform_range() {
    let catalog = reference_catalog();
    let (train, _) = PoolAssignment::derive(&catalog, &SplitConfig::default()).unwrap();
    let config = SamplerConfig::default();
    let sampler = Sampler::new(&catalog, &train, &config).unwrap();
    let draws = 100_000;
    let mut sum = 0.0;
    for id in 0..draws {
        let scene = sampler.scene(21, id).unwrap();
        assert!((-5.0..=10.0).contains(&scene.snr_db));
        sum += scene.snr_db;
    }
    let mean = sum / draws as f64;
    assert!((mean - 2.5).abs() <= 0.1, "mean SNR {mean}");
}

#[test]
fn scene_brirs_share_a_room_and_stay_in_the_frontal_plane() {
    let catalog = reference_catalog();
    let (train, _) = PoolAssignment::derive(&catalog, &SplitConfig::default()).unwrap();
    let sampler = Sampler::new(&catalog, &train, &SamplerConfig::default()).unwrap();
    for id in 0..2000 {
        let scene = sampler.scene(5, id).unwrap();
        let refs: Vec<_> = std::iter::once(&scene.speech_brir).chain(&scene.noise_brirs).collect();
        let items: Vec<_> = refs
            .iter()
            .map(|r| catalog.find_brir(&r.id, &r.path).unwrap())
            .collect();
        let distinct: BTreeSet<_> = items.iter().map(|b| b.path.as_str()).collect();
        assert_eq!(distinct.len(), items.len());
        assert!(items.iter().all(|b| b.room_id == scene.room_id));
        assert!(items.iter().all(|b| (-90.0..=90.0).contains(&b.azimuth_deg)));
    }
}

#[test]
fn first_scene_can_cross_a_small_target() {
    let catalog = tiny_catalog(36.0);
    let (train, _) = PoolAssignment::derive(&catalog, &SplitConfig::default()).unwrap();
    let config = SamplerConfig {
        n_sources: vec![1],
        ..Default::default()
    };
    let m = plan_dataset(0.01, &catalog, &train, &config, 0, DatasetSplit::Train).unwrap();
    assert_eq!(m.scenes.len(), 1);
    assert_eq!(m.header.total_duration_s, 36.0);
}
