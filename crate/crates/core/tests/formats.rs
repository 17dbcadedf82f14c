use rgr_core::classifier::{Checkpoint, Network, NetworkSpec};
use rgr_core::feature_encoder::{FeatureCube, FeatureEncoder, Normalization};
use rgr_core::gesture_sim::{synth_recording, GestureClass};
use rgr_core::pipeline::{FeatureExtractor, PipelineConfig, RecordingFile};
use rgr_core::{seed, Error, RadarParams};

fn cube() -> FeatureCube {
    let cfg = PipelineConfig::default();
    let rec = synth_recording(GestureClass::Check, 3, &cfg.radar, 20.0).unwrap();
    let ex = FeatureExtractor::new(&cfg).unwrap();
    let norm = Normalization::physical(&cfg.radar, 0.5).unwrap();
    let mut enc = FeatureEncoder::new(cfg.il, cfg.k, norm);
    for f in &rec.frames[..45] {
        enc.push(ex.extract(f).unwrap().0).unwrap();
    }
    enc.snapshot(true).unwrap()
}

fn assert_truncations_rejected<T: std::fmt::Debug>(bytes: &[u8], parse: impl Fn(&[u8]) -> rgr_core::Result<T>) {
    let n = bytes.len();
    for cut in [0, 1, 3, 4, 7, 16, n / 3, n / 2, n - 8, n - 1] {
        match parse(&bytes[..cut]) {
            Err(Error::Format(_)) => {}
            other => panic!("truncated at {cut}/{n}: {other:?}"),
        }
    }
}

#[test]
fn recording_file_round_trip_on_disk() {
    let p = RadarParams::default();
    let rec = synth_recording(GestureClass::SwipeRT, 8, &p, 20.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.rgr");
    let file = RecordingFile { params: p, frames: rec.frames };
    file.write(&path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let back = RecordingFile::read(&path).unwrap();
    let path2 = dir.path().join("b.rgr");
    back.write(&path2).unwrap();
    assert_eq!(std::fs::read(&path2).unwrap(), first);
    assert_eq!(back.frames.len(), 64);
    assert_truncations_rejected(&first, RecordingFile::from_bytes);
}

#[test]
fn cube_file_round_trip() {
    let c = cube();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.rgfc");
    c.write(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let back = FeatureCube::read(&path).unwrap();
    assert_eq!(back.to_bytes(), bytes);
    assert_eq!(back.data, c.data);
    assert_truncations_rejected(&bytes, FeatureCube::from_bytes);
}

#[test]
fn checkpoint_round_trip_and_predictions() {
    let net = Network::<f32>::init(NetworkSpec::default(), &mut seed::rng(4, 0)).unwrap();
    let mut ck = Checkpoint::new(net, Normalization::physical(&RadarParams::default(), 0.7).unwrap());
    ck.metadata.insert("note".into(), "round trip".into());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.rgnn");
    ck.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.to_bytes(), bytes);
    let c = cube();
    assert_eq!(back.network.predict(&c).unwrap(), ck.network.predict(&c).unwrap());
    assert_truncations_rejected(&bytes, Checkpoint::from_bytes);
}
