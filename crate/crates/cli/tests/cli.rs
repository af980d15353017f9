use std::path::Path;
use std::process::{Command, Output};

fn triplet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triplet"))
        .args(args)
        .output()
        .unwrap()
}

fn error_line(o: &Output) -> String {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().last().unwrap_or("").to_string();
    assert!(line.starts_with("error: category="), "{line}");
    line
}

const RUN: &str = r#"
seed = 1
epochs = 2
batch = 8
base_lr = 0.003
decay_gamma = 0.99
augment = false

[model]
clip_size = 2
resolution = [16, 24]
backbone_channels = [4, 4, 8, 8]
wsl_channels = 4
scene_channels = 4
attention_dim = 4
decoder_dim = 8
decoder_heads = 2
decoder_layers = 1

[data]
synthetic_eval_seed = 7

[data.synthetic]
height = 16
width = 24
blob = 4
videos = 1
frames = 12

[[ablation]]
clip_size = 1

[[ablation]]
position = "early"
"#;

fn config(dir: &Path) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, RUN).unwrap();
    p.display().to_string()
}

#[test]
fn train_then_eval_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let out = dir.path().join("out").display().to_string();
    let t = triplet(&[
        "train",
        "--config",
        &cfg,
        "--out",
        &out,
        "--deterministic",
        "--seed",
        "4",
    ]);
    assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
    for f in [
        "checkpoint.bin",
        "train_log.csv",
        "train_log.txt",
        "config.toml",
    ] {
        assert!(Path::new(&out).join(f).exists(), "{f}");
    }
    let e = triplet(&["eval", "--config", &cfg, "--out", &out]);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    let csv = std::fs::read_to_string(Path::new(&out).join("report.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "AP_I,AP_V,AP_T,AP_IV,AP_IT,AP_IVT"
    );
    let preds = std::fs::read_to_string(Path::new(&out).join("predictions.txt")).unwrap();
    assert_eq!(preds.lines().count(), 12);
    assert!(String::from_utf8_lossy(&e.stdout).contains("AP_IVT"));
}

#[test]
fn ablate_emits_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let out = dir.path().join("abl").display().to_string();
    let a = triplet(&["ablate", "--config", &cfg, "--out", &out]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let csv = std::fs::read_to_string(Path::new(&out).join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(Path::new(&out).join("ablation.txt").exists());
}

#[test]
fn synth_writes_a_loadable_layout() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        "height = 8\nwidth = 8\nblob = 3\nvideos = 2\nframes = 5\n",
    )
    .unwrap();
    let out = dir.path().join("data");
    let s = triplet(&[
        "synth",
        "--config",
        &spec.display().to_string(),
        "--out",
        &out.display().to_string(),
    ]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    assert!(out.join("split.toml").exists() && out.join("taxonomy.csv").exists());
    assert_eq!(std::fs::read_dir(out.join("labels")).unwrap().count(), 2);
}

#[test]
fn failures_print_one_categorized_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = triplet(&["train", "--config", "/nonexistent/run.toml"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(error_line(&missing).starts_with("error: category=io "));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "epochs = 3\nbatch = \"many\"\n").unwrap();
    let parse = triplet(&["train", "--config", &bad.display().to_string()]);
    assert!(error_line(&parse).starts_with("error: category=parse "));

    std::fs::write(&bad, "batch = 0\n").unwrap();
    let invalid = triplet(&["train", "--config", &bad.display().to_string()]);
    assert!(error_line(&invalid).starts_with("error: category=config "));

    let usage = triplet(&["train", "--bogus"]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(error_line(&usage).starts_with("error: category=usage "));

    let cfg = config(dir.path());
    let no_ckpt = triplet(&[
        "eval",
        "--config",
        &cfg,
        "--checkpoint",
        "/nonexistent/c.bin",
    ]);
    assert!(error_line(&no_ckpt).starts_with("error: category=io "));

    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let corrupt = triplet(&[
        "eval",
        "--config",
        &cfg,
        "--checkpoint",
        &junk.display().to_string(),
    ]);
    assert!(error_line(&corrupt).starts_with("error: category=checkpoint "));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let run = triplet_core::harness::RunConfig::load(&root.join("synthetic.toml")).unwrap();
    assert_eq!(run.ablation.len(), 3);
    let text = std::fs::read_to_string(root.join("synth_spec.toml")).unwrap();
    triplet_core::datapipe::SynthSpec::parse(&text, "synth_spec.toml").unwrap();
}
