use std::collections::BTreeMap;
use std::path::Path;

use rgr_core::gesture_sim::GestureClass;
use rgr_core::pipeline::{
    load_processed, read_labels, read_manifest, split, synth_processed, write_dataset, DatasetSpec, PipelineConfig,
};

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn synth_is_byte_identical_and_complete() {
    let cfg = PipelineConfig::default();
    let spec = DatasetSpec::all_classes(2, 31, 20.0);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = write_dataset(&spec, &cfg, a.path()).unwrap();
    write_dataset(&spec, &cfg, b.path()).unwrap();
    let (ca, cb) = (dir_contents(a.path()), dir_contents(b.path()));
    assert_eq!(ca, cb);
    // recordings, label sidecars and the manifest
    assert_eq!(ca.len(), 2 * 26 + 1);

    let manifest = read_manifest(a.path()).unwrap();
    assert_eq!(manifest, ma);
    assert_eq!(manifest.len(), 26);
    for e in &manifest {
        let labels = read_labels(&a.path().join(&e.file)).unwrap();
        assert_eq!(labels.len(), 1);
        assert_eq!((labels[0].class, labels[0].start_cycle, labels[0].end_cycle), (e.class, e.start_cycle, e.end_cycle));
        assert!(e.start_cycle < e.end_cycle && e.end_cycle < 64);
    }
    for class in GestureClass::ALL {
        assert_eq!(manifest.iter().filter(|e| e.class == class).count(), 2);
    }

    let other = write_dataset(&DatasetSpec { seed: 32, ..spec }, &cfg, &a.path().join("other")).unwrap();
    assert_ne!(other[0].seed, manifest[0].seed);
}

#[test]
fn files_and_memory_agree() {
    let cfg = PipelineConfig::default();
    let spec = DatasetSpec {
        classes: vec![GestureClass::Push, GestureClass::RandomMotion],
        per_class: 2,
        seed: 5,
        snr_db: 20.0,
    };
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&spec, &cfg, dir.path()).unwrap();
    let disk = load_processed(dir.path(), &cfg).unwrap();
    let mem = synth_processed(&spec, &cfg).unwrap();
    assert_eq!(disk.len(), mem.len());
    for (d, m) in disk.iter().zip(&mem) {
        assert_eq!((d.label, d.span, d.seed), (m.label, m.span, m.seed));
        // files hold f32 samples
        for (x, y) in d.rwm.iter().zip(&m.rwm) {
            assert!((x - y).abs() <= 1e-4 * y.abs().max(1e-9), "{x} vs {y}");
        }
    }
}

#[test]
fn split_is_stratified_and_seeded() {
    let labels: Vec<GestureClass> = GestureClass::ALL.iter().flat_map(|&c| std::iter::repeat_n(c, 10)).collect();
    let (train, val) = split(&labels, 0.2, 1);
    assert_eq!((train.len(), val.len()), (104, 26));
    for class in GestureClass::ALL {
        assert_eq!(val.iter().filter(|&&i| labels[i] == class).count(), 2);
    }
    let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..130).collect::<Vec<_>>());
    assert_eq!(split(&labels, 0.2, 1), (train.clone(), val.clone()));
    assert_ne!(split(&labels, 0.2, 2).1, val);
}
