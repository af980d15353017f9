mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use triplet_core::datapipe::{load_dataset, synth_generate, write_dataset, SplitSpec};
use triplet_core::labels::{format_label_file, parse_label_file, LabelRecord};
use triplet_core::{Error, LabelVector, TripletTaxonomy};

#[test]
fn synthetic_set_survives_a_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_generate(&common::bench_spec(2, 12), 4).unwrap();
    let split = write_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(dir.path(), &split, &[], ds.resolution).unwrap();
    assert_eq!(back.num_frames(), ds.num_frames());
    for (a, b) in back.videos.iter().zip(&ds.videos) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.labels, b.labels);
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            let gap = fa
                .image
                .data()
                .iter()
                .zip(fb.image.data())
                .map(|(x, y)| (x - y).abs())
                .fold(0f32, f32::max);
            assert!(gap <= 0.5 / 255.0 + 1e-6);
        }
    }
    assert_eq!(back.taxonomy.digest(), ds.taxonomy.digest());
}

#[test]
fn missing_label_file_is_an_io_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_generate(&common::bench_spec(1, 3), 0).unwrap();
    let split = write_dataset(&ds, dir.path()).unwrap();
    let id = ds.videos[0].id.to_string();
    std::fs::remove_file(dir.path().join("labels").join(format!("{id}.txt"))).unwrap();
    let err = load_dataset(dir.path(), &split, &[], ds.resolution).unwrap_err();
    assert_eq!(err.category(), "io");
    assert!(err.to_string().contains(&format!("{id}.txt")), "{err}");
}

#[test]
fn malformed_label_line_reports_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_generate(&common::bench_spec(1, 4), 0).unwrap();
    let split = write_dataset(&ds, dir.path()).unwrap();
    let path = dir
        .path()
        .join("labels")
        .join(format!("{}.txt", ds.videos[0].id));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[2] = lines[2].replacen(",0", ",2", 1);
    std::fs::write(&path, lines.join("\n")).unwrap();
    match load_dataset(dir.path(), &split, &[], ds.resolution) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unknown_fold_is_a_config_error() {
    let split = SplitSpec::cholect45_crossval();
    let err = split.videos(&["nope".to_string()]).unwrap_err();
    assert_eq!(err.category(), "config");
}

#[test]
fn bundled_crossval_folds_partition_the_videos() {
    let split = SplitSpec::cholect45_crossval();
    assert_eq!(split.folds.len(), 5);
    let all: Vec<String> = split.all_videos();
    let unique: HashSet<&String> = all.iter().collect();
    assert_eq!(all.len(), 45);
    assert_eq!(unique.len(), 45);
    for (i, a) in split.folds.iter().enumerate() {
        for b in &split.folds[i + 1..] {
            assert!(a.videos.iter().all(|v| !b.videos.contains(v)));
        }
    }
    let back = SplitSpec::parse(&split.to_text(), "split").unwrap();
    assert_eq!(back, split);
}

#[test]
fn overlapping_folds_are_rejected() {
    let text = "[[fold]]\nname = \"a\"\nvideos = [\"VID01\"]\n[[fold]]\nname = \"b\"\nvideos = [\"VID01\"]\n";
    assert_eq!(
        SplitSpec::parse(text, "s").unwrap_err().category(),
        "config"
    );
}

proptest! {
    #[test]
    fn label_files_round_trip(rows in prop::collection::vec(prop::collection::vec(0usize..100, 0..4), 0..12)) {
        let tax = TripletTaxonomy::default();
        let records: Vec<LabelRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, a)| LabelRecord { frame: 3 * i + 1, label: LabelVector::from_active(a, &tax).unwrap() })
            .collect();
        let text = format_label_file(&records);
        prop_assert_eq!(parse_label_file(&text, "x", &tax).unwrap(), records);
    }

    #[test]
    fn label_parser_never_panics(text in "[0-9,\n]{0,300}") {
        let _ = parse_label_file(&text, "x", &TripletTaxonomy::default());
    }
}
