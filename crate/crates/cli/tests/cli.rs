use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use revtts::audio::read_wav;
use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn revtts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revtts"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn revtts_stdin(args: &[&str], input: &str) -> Output {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_revtts"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json_ok(out: Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn text_ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn prepare_reverses_filters_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixtures().join("corpus/filelist.txt");
    let out = dir.path().join("rtrs");
    let report = json_ok(revtts(&[
        "prepare", "--manifest", s(&manifest), "-o", s(&out), "--variant", "rtrs", "--no-resample",
    ]));
    assert_eq!(report["input_count"], 20);
    assert_eq!(report["output_count"], 18);
    // a four-word line and a 45-word line fall outside [5, 40]
    assert_eq!(report["discarded"], serde_json::json!(["3", "18"]));
    assert_eq!(report["per_entry_errors"], serde_json::json!([]));
    assert_eq!(report["variant"], "rtrs");

    let written = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    let first = written.lines().next().unwrap();
    assert_eq!(first, "0|wavs/0.wav|.robrah teiuq eht revo thgirb enihs dna elkniwt srats eht");
    // numerals are expanded before reversal
    let line2 = written.lines().nth(2).unwrap();
    assert!(line2.contains("evlewt"), "{line2}");

    let src = read_wav(fixtures().join("corpus/wavs/utt00.wav")).unwrap();
    let dst = read_wav(out.join("wavs/0.wav")).unwrap();
    let mut reversed = src.samples().to_vec();
    reversed.reverse();
    assert_eq!(dst.samples(), &reversed[..]);

    let on_disk: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(on_disk, report);
}

#[test]
fn prepare_three_line_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixtures().join("corpus");
    let all = std::fs::read_to_string(corpus.join("filelist.txt")).unwrap();
    let lines: Vec<&str> = all.lines().collect();
    let run = |name: &str, picked: [usize; 3]| {
        let manifest = dir.path().join(format!("{name}.txt"));
        std::fs::write(&manifest, picked.map(|i| lines[i]).join("\n")).unwrap();
        let out = dir.path().join(name);
        let report = json_ok(revtts(&[
            "prepare", "--manifest", s(&manifest), "--audio-root", s(&corpus), "-o", s(&out), "--variant", "rtrs",
            "--no-resample",
        ]));
        (report, out)
    };

    let (report, out) = run("three", [0, 1, 2]);
    assert_eq!((report["input_count"].as_u64(), report["output_count"].as_u64()), (Some(3), Some(3)));
    let written = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert_eq!(written.lines().count(), 3);
    for id in 0..3 {
        assert!(out.join(format!("wavs/{id}.wav")).exists());
    }

    let (report, _) = run("short", [0, 3, 2]);
    assert_eq!(report["output_count"], 2);
    assert_eq!(report["discarded"], serde_json::json!(["1"]));

    let (_, again) = run("three-again", [0, 1, 2]);
    assert_eq!(std::fs::read(again.join("manifest.txt")).unwrap(), written.as_bytes());
    assert_eq!(std::fs::read(again.join("wavs/2.wav")).unwrap(), std::fs::read(out.join("wavs/2.wav")).unwrap());
}

#[test]
fn prepare_resamples_and_writes_mels() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixtures().join("corpus/filelist.txt");
    let out = dir.path().join("ftfs");
    let report = json_ok(revtts(&[
        "prepare", "--manifest", s(&manifest), "-o", s(&out), "--mels", "--max-words", "50",
    ]));
    assert_eq!(report["output_count"], 19);
    assert_eq!(report["sample_rate"], 22050);
    assert_eq!(report["resampled"], 19);
    assert_eq!(report["mel_files"], 19);
    assert_eq!(read_wav(out.join("wavs/5.wav")).unwrap().sample_rate(), 22050);
    let mel = revtts::audio::read_mels(out.join("mels/5.mels")).unwrap();
    assert_eq!(mel.n_mels, 80);
}

#[test]
fn prepare_honours_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let manifest = fixtures().join("corpus/filelist.txt");
    std::fs::write(
        &cfg,
        format!(
            "[paths]\nmanifest = {:?}\noutput = {:?}\n[prepare]\nvariant = \"rtfs\"\nresample = false\n[filter]\nmin_words = 11\n",
            s(&manifest),
            s(&dir.path().join("o"))
        ),
    )
    .unwrap();
    let report = json_ok(revtts(&["--config", s(&cfg), "--json", "prepare"]));
    assert_eq!(report["variant"], "rtfs");
    assert!(report["output_count"].as_u64().unwrap() < 18);
    assert_eq!(report["resampled"], 0);
}

#[test]
fn eval_asr_scores_and_compares_with_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs.txt");
    let hyps = dir.path().join("hyps.txt");
    std::fs::write(&refs, "a|the cat sat on the mat\nb|Room 7, please.\nc|never transcribed\n").unwrap();
    std::fs::write(&hyps, "a|the cat sat on the mat\nb|room seven please\n").unwrap();
    let report = json_ok(revtts(&["eval-asr", "--refs", s(&refs), "--hyps", s(&hyps)]));
    assert_eq!(report["wer"], 0.0);
    assert_eq!(report["cer"], 0.0);
    assert_eq!(report["missing"], serde_json::json!(["c"]));

    let base = dir.path().join("base.json");
    std::fs::write(&base, r#"{"wer": 20.0, "cer": 10.0}"#).unwrap();
    std::fs::write(&hyps, "a|the cat sat on a mat\nb|room seven please\n").unwrap();
    let report = json_ok(revtts(&["eval-asr", "--refs", s(&refs), "--hyps", s(&hyps), "--baseline", s(&base)]));
    // one substitution in nine reference words
    let wer = report["wer"].as_f64().unwrap();
    assert!((wer - 100.0 / 9.0).abs() < 1e-9, "{wer}");
    let rel = report["improvement"]["wer"]["relative"].as_f64().unwrap();
    assert!((rel - 100.0 * (20.0 - wer) / 20.0).abs() < 1e-9);
}

#[test]
fn eval_asr_runs_an_external_recognizer() {
    let dir = tempfile::tempdir().unwrap();
    let audio = dir.path().join("audio.txt");
    let refs = dir.path().join("refs.txt");
    let hyps_out = dir.path().join("hyps.txt");
    // the "recognizer" reads the transcript stored next to each file
    for (id, text) in [("0", "hello there"), ("1", "good night")] {
        std::fs::write(dir.path().join(format!("it's {id}.txt")), text).unwrap();
    }
    std::fs::write(&audio, "0|it's 0.wav|x\n1|it's 1.wav|x\n").unwrap();
    std::fs::write(&refs, "0|hello there\n1|good morning\n").unwrap();
    let report = json_ok(revtts(&[
        "eval-asr", "--refs", s(&refs), "--audio", s(&audio), "--ids", "--hyps-out", s(&hyps_out),
        "--asr-command", "cat \"$(dirname {audio})/$(basename {audio} .wav).txt\"",
    ]));
    assert_eq!(report["asr_errors"], serde_json::json!([]));
    assert_eq!(report["wer"], 25.0);
    assert_eq!(std::fs::read_to_string(&hyps_out).unwrap(), "0|hello there\n1|good night\n");
}

#[test]
fn eval_duration_compares_two_systems() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixtures().join("corpus");
    let a = corpus.join("filelist.txt");
    let b = dir.path().join("b.txt");
    // system b: the same clips minus the last one, which it never produced
    let text = std::fs::read_to_string(&a).unwrap();
    let lines: Vec<&str> = text.lines().take(19).collect();
    std::fs::write(&b, lines.join("\n")).unwrap();
    let tsv = dir.path().join("scatter.tsv");
    let out = json_ok(revtts(&[
        "eval-duration", "--a", s(&a), "--b", s(&b), "--audio-root-b", s(&corpus), "--tsv", s(&tsv),
        "--max-duration", "1.0",
    ]));
    assert_eq!(out["stats"]["n"], 19);
    assert_eq!(out["stats"]["shorter_by_percent"], 0.0);
    assert_eq!(out["stats"]["on_diagonal"], 19);
    let failures = out["eos"]["a"]["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1, "only the 45-word clip exceeds a second");
    assert_eq!(failures[0], "18");
    let tsv = std::fs::read_to_string(&tsv).unwrap();
    assert_eq!(tsv.lines().next().unwrap(), "id\tseconds_a\tseconds_b");
    assert_eq!(tsv.lines().count(), 20);
}

#[test]
fn eval_align_reads_csv_and_binary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("id.csv");
    let rows: Vec<String> = (0..6)
        .map(|r| (0..6).map(|c| if r == c { "1" } else { "0" }).collect::<Vec<_>>().join(","))
        .collect();
    std::fs::write(&csv, rows.join("\n")).unwrap();
    let d = json_ok(revtts(&["eval-align", s(&csv)]));
    assert_eq!(d["slope_sign"], "forward");
    assert_eq!(d["monotonicity"], 1.0);

    let bin = dir.path().join("anti.algn");
    let anti = revtts::eval::AlignmentMatrix::identity(6).reverse_steps();
    revtts::eval::write_alignment(&anti, &bin).unwrap();
    let both = json_ok(revtts(&["eval-align", s(&csv), s(&bin)]));
    assert_eq!(both[1]["slope_sign"], "reverse");
    assert_eq!(both[1]["path"], s(&bin));
}

#[test]
fn mos_aggregate_reproduces_the_pair_test() {
    let t = fixtures().join("pair_test");
    let out = json_ok(revtts(&[
        "mos", "aggregate", "--plan", s(&t.join("plan.json")), "--journal", s(&t.join("journal.ndjson")),
    ]));
    assert_eq!(out["wins"], 23);
    assert_eq!(out["total"], 25);
    assert_eq!(out["percent"], 92.0);
    assert_eq!(out["focus_system"], "reverse");
    assert_eq!(out["wins_by_system"]["forward"], 2);
}

#[test]
fn mos_build_is_seeded() {
    let index = fixtures().join("pair_test/index.txt");
    let build = |seed: &str| {
        text_ok(revtts(&[
            "--seed", seed, "mos", "build", "--index", s(&index), "--systems", "forward,reverse", "--pairs", "3",
            "--items-per-system", "2",
        ]))
    };
    assert_eq!(build("11"), build("11"));
    assert_ne!(build("11"), build("12"));
    let plan: Value = serde_json::from_str(&build("11")).unwrap();
    assert_eq!(plan["mos"].as_array().unwrap().len(), 4);
    assert_eq!(plan["pairs"].as_array().unwrap().len(), 3);
}

#[test]
fn textnorm_and_tokenize_round_trip() {
    let text = text_ok(revtts_stdin(&["textnorm"], "Room 237 holds 2,500 Books.\n"));
    assert_eq!(text, "room two hundred thirty seven holds two thousand five hundred books.\n");
    let rev = text_ok(revtts_stdin(&["textnorm", "--reverse", "--no-expand"], "Ab 12\n"));
    assert_eq!(rev, "21 ba\n");

    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("train.txt");
    let model = dir.path().join("model.json");
    std::fs::write(&input, "the stars twinkle and shine bright\nbright stars shine\n").unwrap();
    let summary = json_ok(revtts(&[
        "tokenize", "train", "--input", s(&input), "--model", s(&model), "--vocab-size", "30",
    ]));
    assert_eq!(summary["max_token_len"], 2);
    let encoded = text_ok(revtts_stdin(&["tokenize", "encode", "--model", s(&model)], "bright stars\n"));
    let tokens: Vec<&str> = encoded.trim_end().split(' ').collect();
    assert!(tokens.iter().all(|t| t.chars().count() <= 2));
    assert_eq!(tokens.concat().replace('_', " "), "bright stars");

    let chars = dir.path().join("chars.json");
    json_ok(revtts(&["tokenize", "train", "--input", s(&input), "--model", s(&chars), "--kind", "char"]));
    let encoded = text_ok(revtts_stdin(&["tokenize", "encode", "--model", s(&chars)], "the stars\n"));
    assert_eq!(encoded, "t h e _ s t a r s\n");
}

#[test]
fn out_flag_writes_the_document() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("nested/result.json");
    let t = fixtures().join("pair_test");
    let out = revtts(&[
        "--out", s(&dest), "--json", "mos", "aggregate", "--plan", s(&t.join("plan.json")), "--journal",
        s(&t.join("journal.ndjson")),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let doc = std::fs::read_to_string(&dest).unwrap();
    assert_eq!(doc.lines().count(), 1);
    assert_eq!(serde_json::from_str::<Value>(&doc).unwrap()["wins"], 23);
}

#[test]
fn exit_codes_separate_usage_from_failures() {
    assert_eq!(revtts(&["prepare", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(revtts(&["prepare", "-o", "/tmp/x"]).status.code(), Some(2));
    assert_eq!(revtts(&["eval-align"]).status.code(), Some(2));
    assert_eq!(revtts(&["eval-asr", "--refs", "/dev/null"]).status.code(), Some(2));
    assert_eq!(revtts(&["prepare", "--manifest", "/no/such/file", "-o", "/tmp/x"]).status.code(), Some(1));
    let err = revtts(&["eval-align", "/no/such.algn"]);
    assert_eq!(err.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&err.stderr);
    assert_eq!(msg.matches("No such file").count(), 1, "{msg}");
}
