use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "
min_count = 2
max_len = 24
image_size = 16
embed_dim = 8
hidden_size = 8
conv_channels = [4]
image_features = 16
batch_size = 16
lr = 0.01
";

fn genre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genre"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = genre(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn setup(dir: &Path) -> (String, String) {
    let config = dir.join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let corpus = dir.join("corpus");
    ok(&[
        "synth",
        "--n",
        "90",
        "--min-side",
        "12",
        "--max-side",
        "20",
        "--seed",
        "4",
        "--out",
        s(&corpus),
    ]);
    (
        s(&config).to_string(),
        s(&corpus.join("manifest.jsonl")).to_string(),
    )
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (config, manifest) = setup(dir.path());
    let prepared = dir.path().join("prepared");
    let out = ok(&[
        "prepare",
        "--config",
        &config,
        "--manifest",
        &manifest,
        "--out",
        s(&prepared),
    ]);
    assert!(out.contains("train 63, validation 9, test 18"), "{out}");

    let run = dir.path().join("run");
    let out = ok(&[
        "train",
        "--config",
        &config,
        "--epochs",
        "2",
        "--prepared",
        s(&prepared),
        "--out",
        s(&run),
    ]);
    assert_eq!(out.lines().filter(|l| l.starts_with("epoch")).count(), 2);

    let ckpt = run.join("model.ckpt");
    let eval = dir.path().join("eval");
    let out = ok(&[
        "evaluate",
        "--checkpoint",
        s(&ckpt),
        "--prepared",
        s(&prepared),
        "--out",
        s(&eval),
    ]);
    assert!(out.contains("Top 1 (%)"));
    assert!(eval.join("confusion.csv").exists());

    let cover = dir.path().join("corpus/covers/syn00001.ppm");
    let out = ok(&[
        "predict",
        "--checkpoint",
        s(&ckpt),
        "--text",
        "lap drift race",
        "--image",
        s(&cover),
    ]);
    let probs: Vec<f64> = out
        .lines()
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(probs.len(), 3);
    assert!(probs.windows(2).all(|w| w[0] >= w[1]));
    assert!(probs.iter().sum::<f64>() <= 1.0 + 1e-5);

    let missing = genre(&[
        "predict",
        "--checkpoint",
        s(&ckpt),
        "--text",
        "lap drift race",
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--image"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (config, manifest) = setup(dir.path());
    let prepared = dir.path().join("p");
    ok(&[
        "prepare",
        "--config",
        &config,
        "--manifest",
        &manifest,
        "--out",
        s(&prepared),
    ]);
    let run = dir.path().join("run");
    ok(&[
        "train",
        "--config",
        &config,
        "--prepared",
        s(&prepared),
        "--out",
        s(&run),
        "--epochs",
        "1",
        "--modality",
        "text",
        "--lr",
        "0.005",
        "--max-len",
        "12",
        "--freeze-encoders",
    ]);
    let echoed = fs::read_to_string(run.join("run_config.toml")).unwrap();
    for line in [
        "epochs = 1",
        "modality = \"text\"",
        "lr = 0.005",
        "max_len = 12",
        "freeze_encoders = true",
        "image_size = 16",
        "batch_size = 16",
    ] {
        assert!(
            echoed.lines().any(|l| l == line),
            "missing {line:?} in\n{echoed}"
        );
    }
    let history = fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().filter(|l| !l.starts_with('#')).count(), 2);
}

#[test]
fn commands_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (config, manifest) = setup(dir.path());
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let root = dir.path().join(name);
        let prepared = root.join("prepared");
        let run = root.join("run");
        let eval = root.join("eval");
        ok(&[
            "synth",
            "--n",
            "30",
            "--min-side",
            "8",
            "--max-side",
            "10",
            "--seed",
            "9",
            "--out",
            s(&root.join("synth")),
        ]);
        ok(&[
            "prepare",
            "--config",
            &config,
            "--manifest",
            &manifest,
            "--out",
            s(&prepared),
        ]);
        ok(&[
            "train",
            "--config",
            &config,
            "--epochs",
            "2",
            "--prepared",
            s(&prepared),
            "--out",
            s(&run),
        ]);
        ok(&[
            "evaluate",
            "--checkpoint",
            s(&run.join("model.ckpt")),
            "--prepared",
            s(&prepared),
            "--out",
            s(&eval),
        ]);
        outputs.push(root);
    }
    let mut compared = 0;
    for sub in ["synth", "synth/covers", "prepared", "run", "eval"] {
        for entry in fs::read_dir(outputs[0].join(sub)).unwrap() {
            let path = entry.unwrap().path();
            if path.is_file() {
                let rel = path.strip_prefix(&outputs[0]).unwrap();
                assert_eq!(
                    fs::read(&path).unwrap(),
                    fs::read(outputs[1].join(rel)).unwrap(),
                    "{rel:?}"
                );
                compared += 1;
            }
        }
    }
    assert!(compared > 40);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad_config = dir.path().join("bad.toml");
    fs::write(&bad_config, "learning_rate = 0.1\n").unwrap();
    let out = genre(&[
        "synth",
        "--config",
        s(&bad_config),
        "--out",
        s(&dir.path().join("x")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));

    let manifest = dir.path().join("m.jsonl");
    let rows: String = (0..10)
        .map(|i| {
            let g = if i == 3 { "Card & Board Game" } else { "Puzzle" };
            format!("{{\"id\":\"r{i}\",\"title\":\"\",\"description\":\"x\",\"genres\":[\"{g}\"],\"cover_path\":\"c.png\"}}\n")
        })
        .collect();
    fs::write(&manifest, rows).unwrap();
    let out = genre(&[
        "prepare",
        "--manifest",
        s(&manifest),
        "--out",
        s(&dir.path().join("p")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Card & Board Game"));

    let out = genre(&[
        "train",
        "--prepared",
        s(&dir.path().join("none")),
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = genre(&["train", "--prepared", s(&dir.path().join("none"))]);
    assert_eq!(out.status.code(), Some(2));

    let out = genre(&[
        "train",
        "--modality",
        "audio",
        "--prepared",
        "p",
        "--out",
        "o",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
