mod common;

use std::fs;

use common::{ok, run};
use tempfile::TempDir;

const DEMO: &str = "语音翻译\n因为语音\n";
const DICT: &str = "语\tyǔ\n音\tyin1\n因\tyīn\n翻\tfan1\n译\tyi4\n为\twei4\n";

fn demo() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("demo.zh"), DEMO).unwrap();
    fs::write(
        dir.path().join("demo.en"),
        "speech translation\nbecause speech\n",
    )
    .unwrap();
    fs::write(dir.path().join("dict.tsv"), DICT).unwrap();
    dir
}

fn read(dir: &TempDir, name: &str) -> String {
    fs::read_to_string(dir.path().join(name)).unwrap()
}

#[test]
fn stats_writes_the_demo_table() {
    let dir = demo();
    let out = ok(
        dir.path(),
        &[
            "stats", "--src", "demo.zh", "--tgt", "demo.en", "--out", "freq.tsv",
        ],
    );
    assert!(out.stdout.contains("vocabulary size: 6"), "{}", out.stdout);
    assert!(out.stdout.contains("CJK tokens: 8"));
    assert_eq!(
        read(&dir, "freq.tsv"),
        "语\t2\n音\t2\n为\t1\n因\t1\n翻\t1\n译\t1\n"
    );
}

#[test]
fn stats_on_an_empty_file() {
    let dir = demo();
    fs::write(dir.path().join("empty.zh"), "").unwrap();
    let out = ok(
        dir.path(),
        &["stats", "--src", "empty.zh", "--out", "freq.tsv"],
    );
    assert!(out.stdout.contains("vocabulary size: 0"));
    assert!(out.stdout.contains("CJK tokens: 0"));
    assert_eq!(read(&dir, "freq.tsv"), "");
}

#[test]
fn stats_rejects_unequal_sides() {
    let dir = demo();
    fs::write(dir.path().join("one.en"), "x\n").unwrap();
    let out = run(
        dir.path(),
        &[
            "stats", "--src", "demo.zh", "--tgt", "one.en", "--out", "f.tsv",
        ],
    );
    assert_eq!(out.code, 4);
    assert!(out.stderr.contains("line count mismatch"), "{}", out.stderr);
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = demo();
    let out = run(
        dir.path(),
        &["stats", "--src", "missing.zh", "--out", "f.tsv"],
    );
    assert_eq!(out.code, 3);
    assert!(out.stderr.contains("missing.zh"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = demo();
    assert_eq!(
        run(
            dir.path(),
            &[
                "noise",
                "--src",
                "demo.zh",
                "--strategy",
                "loud",
                "--p",
                "0.1"
            ]
        )
        .code,
        2
    );
    assert_eq!(run(dir.path(), &["frobnicate"]).code, 2);
}

#[test]
fn noise_is_reproducible_and_reports_its_seed() {
    let dir = demo();
    let args = [
        "noise",
        "--src",
        "demo.zh",
        "--strategy",
        "homophone",
        "--p",
        "0.1",
        "--seed",
        "42",
        "--pinyin-dict",
        "dict.tsv",
        "--force",
        "--log",
    ];
    let first = ok(dir.path(), &args);
    assert!(first.stderr.contains("seed: 42"));
    let a = read(&dir, "demo.zh.epoch0.noised") + &read(&dir, "demo.zh.epoch0.log.tsv");
    ok(dir.path(), &args);
    let b = read(&dir, "demo.zh.epoch0.noised") + &read(&dir, "demo.zh.epoch0.log.tsv");
    assert_eq!(a, b);
}

#[test]
fn default_seed_is_fixed() {
    let dir = demo();
    let out = ok(
        dir.path(),
        &[
            "noise",
            "--src",
            "demo.zh",
            "--strategy",
            "uniform",
            "--p",
            "0.5",
        ],
    );
    assert!(out.stderr.contains("seed: 2019"), "{}", out.stderr);
}

#[test]
fn zero_rate_copies_input() {
    let dir = demo();
    let out = ok(
        dir.path(),
        &[
            "noise",
            "--src",
            "demo.zh",
            "--strategy",
            "frequency",
            "--p",
            "0",
        ],
    );
    assert_eq!(read(&dir, "demo.zh.epoch0.noised"), DEMO);
    assert!(
        out.stdout.contains("substitution rate 0.0000"),
        "{}",
        out.stdout
    );
}

#[test]
fn placeholder_noise_only_inserts_the_placeholder() {
    let dir = demo();
    ok(
        dir.path(),
        &[
            "noise",
            "--src",
            "demo.zh",
            "--strategy",
            "placeholder",
            "--p",
            "0.2",
            "--log",
            "--epochs",
            "5",
        ],
    );
    for epoch in 0..5 {
        for row in read(&dir, &format!("demo.zh.epoch{epoch}.log.tsv")).lines() {
            assert_eq!(row.rsplit('\t').next(), Some("<SUB>"));
        }
        for line in read(&dir, &format!("demo.zh.epoch{epoch}.noised")).lines() {
            let stripped = line.replace("<SUB>", "").replace(' ', "");
            assert!(
                stripped.chars().all(|c| "语音翻译因为".contains(c)),
                "{line}"
            );
        }
    }
}

#[test]
fn homophone_noise_requires_a_dictionary() {
    let dir = demo();
    let out = run(
        dir.path(),
        &[
            "noise",
            "--src",
            "demo.zh",
            "--strategy",
            "homophone",
            "--p",
            "0.1",
        ],
    );
    assert_eq!(out.code, 4);
    assert!(out.stderr.contains("--pinyin-dict"));
}

#[test]
fn noise_reads_a_config_file_and_flags_override_it() {
    let dir = demo();
    fs::write(
        dir.path().join("noise.toml"),
        "strategy = \"placeholder\"\np = 1.0\nseed = 7\nplaceholder_token = \"<X>\"\n",
    )
    .unwrap();
    let out = ok(
        dir.path(),
        &["noise", "--src", "demo.zh", "--config", "noise.toml"],
    );
    assert!(out.stderr.contains("seed: 7"));
    assert_eq!(
        read(&dir, "demo.zh.epoch0.noised"),
        "<X> <X> <X> <X>\n<X> <X> <X> <X>\n"
    );
    ok(
        dir.path(),
        &[
            "noise",
            "--src",
            "demo.zh",
            "--config",
            "noise.toml",
            "--p",
            "0",
            "--force",
        ],
    );
    assert_eq!(read(&dir, "demo.zh.epoch0.noised"), DEMO);

    fs::write(
        dir.path().join("bad.toml"),
        "strategy = \"placeholder\"\nrate = 1\n",
    )
    .unwrap();
    assert_eq!(
        run(
            dir.path(),
            &["noise", "--src", "demo.zh", "--config", "bad.toml", "--force"]
        )
        .code,
        4
    );
}

#[test]
fn out_of_range_rate_is_a_validation_error() {
    let dir = demo();
    let out = run(
        dir.path(),
        &[
            "noise",
            "--src",
            "demo.zh",
            "--strategy",
            "uniform",
            "--p",
            "1.5",
        ],
    );
    assert_eq!(out.code, 4);
    assert!(!dir.path().join("demo.zh.epoch0.noised").exists());
}

#[test]
fn epochs_get_their_own_files() {
    let dir = demo();
    ok(
        dir.path(),
        &[
            "noise",
            "--src",
            "demo.zh",
            "--strategy",
            "uniform",
            "--p",
            "0.5",
            "--epochs",
            "3",
            "--out-dir",
            "out",
        ],
    );
    for k in 0..3 {
        assert!(dir
            .path()
            .join(format!("out/demo.zh.epoch{k}.noised"))
            .exists());
    }
    assert_eq!(
        run(
            dir.path(),
            &[
                "noise",
                "--src",
                "demo.zh",
                "--strategy",
                "uniform",
                "--p",
                "0.5",
                "--epochs",
                "0"
            ]
        )
        .code,
        4
    );
}

#[test]
fn testset_writes_three_variants_per_line_and_refuses_to_overwrite() {
    let dir = TempDir::new().unwrap();
    let chars = common::alphabet(200);
    common::write_lines(&dir.path().join("t.zh"), &common::corpus(100, &chars, 1));
    let refs: Vec<String> = (0..100).map(|i| format!("ref {i}")).collect();
    common::write_lines(&dir.path().join("t.en"), &refs);
    fs::write(
        dir.path().join("dict.tsv"),
        common::dictionary_text(&chars, 3),
    )
    .unwrap();
    let args = [
        "testset",
        "--src",
        "t.zh",
        "--refs",
        "t.en",
        "--k",
        "1,2,3",
        "--pinyin-dict",
        "dict.tsv",
        "--seed",
        "5",
    ];
    let out = ok(dir.path(), &args);
    assert!(out.stderr.contains("seed: 5"));
    let mut first = Vec::new();
    for k in 1..=3 {
        let noisy = read(&dir, &format!("t.zh.k{k}.noisy"));
        let refs_out = read(&dir, &format!("t.zh.k{k}.refs"));
        assert_eq!(noisy.lines().count(), 300);
        assert_eq!(refs_out.lines().count(), 300);
        assert_eq!(refs_out.lines().nth(4), Some("ref 1"));
        first.push(noisy);
    }
    let again = run(dir.path(), &args);
    assert_eq!(again.code, 4);
    assert!(again.stderr.contains("--force"));

    let mut forced = args.to_vec();
    forced.push("--force");
    ok(dir.path(), &forced);
    for k in 1..=3 {
        assert_eq!(read(&dir, &format!("t.zh.k{k}.noisy")), first[k - 1]);
    }
}

#[test]
fn testset_rejects_zero_substitutions() {
    let dir = demo();
    let out = run(
        dir.path(),
        &[
            "testset",
            "--src",
            "demo.zh",
            "--refs",
            "demo.en",
            "--k",
            "0",
            "--pinyin-dict",
            "dict.tsv",
        ],
    );
    assert_eq!(out.code, 4);
    assert!(
        out.stderr.contains("k must be at least 1"),
        "{}",
        out.stderr
    );
}

#[test]
fn factorize_demo_sentence() {
    let dir = demo();
    let out = ok(
        dir.path(),
        &["factorize", "--src", "demo.zh", "--pinyin-dict", "dict.tsv"],
    );
    assert_eq!(
        read(&dir, "demo.zh.factored"),
        "语|yu 音|yin 翻|fan 译|yi\n因|yin 为|wei 语|yu 音|yin\n"
    );
    assert!(out.stdout.contains("coverage: 100.00%"));
    assert!(read(&dir, "demo.zh.embedding.json").contains("\"pinyin_dim\": 448"));
}

#[test]
fn factorize_split_and_unknown_characters() {
    let dir = demo();
    fs::write(dir.path().join("u.zh"), "语字 ok\n").unwrap();
    let out = ok(
        dir.path(),
        &[
            "factorize",
            "--src",
            "u.zh",
            "--pinyin-dict",
            "dict.tsv",
            "--format",
            "split",
            "--char-dim",
            "8",
            "--pinyin-dim",
            "8",
        ],
    );
    assert_eq!(read(&dir, "u.zh.surface"), "语 字 ok\n");
    assert_eq!(read(&dir, "u.zh.pinyin"), "yu <unk> <na>\n");
    assert!(out.stdout.contains("coverage: 50.00%"), "{}", out.stdout);
    ok(
        dir.path(),
        &[
            "factorize",
            "--src",
            "u.zh",
            "--pinyin-dict",
            "dict.tsv",
            "--force",
        ],
    );
    assert_eq!(read(&dir, "u.zh.factored"), "语|yu 字|<unk> ok|<na>\n");
}

#[test]
fn analyze_reports_rates() {
    let dir = demo();
    let same = ok(
        dir.path(),
        &["analyze", "--refs", "demo.zh", "--hyps", "demo.zh"],
    );
    assert!(same.stdout.contains("WER: 0.0000"), "{}", same.stdout);

    fs::write(dir.path().join("ref.txt"), "语音翻译\n").unwrap();
    fs::write(dir.path().join("hyp.txt"), "语音翻一\n").unwrap();
    ok(
        dir.path(),
        &[
            "analyze", "--refs", "ref.txt", "--hyps", "hyp.txt", "--out", "r.tsv",
        ],
    );
    let tsv = read(&dir, "r.tsv");
    assert!(tsv.contains("substitution\t1\t0.2500\n"), "{tsv}");
    assert!(tsv.contains("deletion\t0\t0.0000\n"));

    fs::write(dir.path().join("short.txt"), "语音翻译\n多\n").unwrap();
    assert_eq!(
        run(
            dir.path(),
            &["analyze", "--refs", "ref.txt", "--hyps", "short.txt"]
        )
        .code,
        4
    );
}

#[test]
fn analyze_noised_output_balances_deletions_and_insertions() {
    let dir = TempDir::new().unwrap();
    let chars = common::alphabet(100);
    common::write_lines(&dir.path().join("c.zh"), &common::corpus(300, &chars, 2));
    ok(
        dir.path(),
        &[
            "noise",
            "--src",
            "c.zh",
            "--strategy",
            "frequency",
            "--p",
            "0.3",
        ],
    );
    ok(
        dir.path(),
        &[
            "analyze",
            "--refs",
            "c.zh",
            "--hyps",
            "c.zh.epoch0.noised",
            "--out",
            "r.tsv",
        ],
    );
    let tsv = read(&dir, "r.tsv");
    let count = |name: &str| -> u64 {
        let row = tsv.lines().find(|l| l.starts_with(name)).unwrap();
        row.split('\t').nth(1).unwrap().parse().unwrap()
    };
    // Noise never changes the length, so any deletion in a minimum alignment
    // is paired with an insertion (a run of substitutions that looks like a
    // shift, e.g. 三一丢 -> 乁三一, is cheaper as one deletion + one insertion).
    assert_eq!(count("deletion"), count("insertion"));
    assert!(count("substitution") > 0);
}
