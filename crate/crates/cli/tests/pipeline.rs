//! Library-level pipeline tests: ingest fixtures, sweep determinism and
//! resumability, report shapes.

use std::path::Path;

use selfgain::corpus::{generate_synthetic_domains, save_corpus};
use selfgain::selftrain::read_records;
use selfgain_cli::commands::{cmd_generate, cmd_ingest, cmd_report, cmd_similarity, cmd_sweep};
use selfgain_cli::config::{Mode, Protocol, RunConfig};

fn write_raw_domains(dir: &Path, sizes: &[usize], seed: u64) -> Vec<String> {
    std::fs::create_dir_all(dir).unwrap();
    let max = *sizes.iter().max().unwrap();
    let corpora = generate_synthetic_domains(sizes.len(), 600, max, 0.5, seed).unwrap();
    let mut ids = Vec::new();
    for (corpus, &size) in corpora.iter().zip(sizes) {
        let truncated = selfgain::Corpus::new(
            corpus.domain_id(),
            corpus.documents()[..size].to_vec(),
        );
        save_corpus(&truncated, &dir.join(format!("{}.txt", corpus.domain_id()))).unwrap();
        ids.push(corpus.domain_id().to_string());
    }
    ids
}

fn base_config(corpus_dir: &Path, out_dir: &Path) -> RunConfig {
    RunConfig {
        corpus_dir: corpus_dir.to_path_buf(),
        out_dir: out_dir.to_path_buf(),
        sample_size: 120,
        seed: 9,
        significance_iterations: 50,
        ..RunConfig::default()
    }
}

#[test]
fn ingest_skips_undersized_domains_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    // 16 raw domains, 3 of them below the 120-document sample size.
    let mut sizes = vec![150; 13];
    sizes.extend([80, 100, 119]);
    write_raw_domains(&raw, &sizes, 1);

    let cfg = base_config(&raw, &dir.path().join("run"));
    let report = cmd_ingest(&cfg).unwrap();
    assert_eq!(report.ingested.len(), 13);
    assert_eq!(report.skipped.len(), 3);
    for summary in &report.ingested {
        assert_eq!(summary.documents, 120);
    }
    let skipped: Vec<&str> = report.skipped.iter().map(|(d, _)| d.as_str()).collect();
    assert_eq!(skipped, ["d13", "d14", "d15"]);

    // Re-running with the same seed reproduces every content hash.
    let again = cmd_ingest(&cfg).unwrap();
    assert_eq!(report.ingested, again.ingested);

    let manifest = std::fs::read_to_string(&report.manifest).unwrap();
    assert!(manifest.starts_with(
        "domain,documents,positive,negative,unlabeled,vocabulary,sha256\n"
    ));
    assert_eq!(manifest.lines().count(), 14);
}

#[test]
fn ingest_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let cfg = base_config(&empty, &dir.path().join("run"));
    let err = cmd_ingest(&cfg).unwrap_err();
    assert!(err.to_string().contains("no corpus files"), "{err}");
}

#[test]
fn ingest_fails_when_every_domain_is_undersized() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    write_raw_domains(&raw, &[50, 60], 2);
    let cfg = base_config(&raw, &dir.path().join("run"));
    let err = cmd_ingest(&cfg).unwrap_err();
    assert!(err.to_string().contains("sample size"), "{err}");
}

fn sweep_fixture(dir: &Path) -> (RunConfig, RunConfig) {
    let raw = dir.join("raw");
    cmd_generate(&raw, 4, 500, 140, 0.5, 11).unwrap();
    let mut ingest_cfg = base_config(&raw, &dir.join("run"));
    ingest_cfg.sample_size = 120;
    let ingested = cmd_ingest(&ingest_cfg).unwrap();
    let mut sweep_cfg = ingest_cfg.clone();
    sweep_cfg.corpus_dir = ingested.corpora_dir;
    sweep_cfg.mode = Mode::Both;
    (ingest_cfg, sweep_cfg)
}

#[test]
fn sweep_is_deterministic_resumable_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let (_, sweep_cfg) = sweep_fixture(dir.path());

    let report = cmd_sweep(&sweep_cfg).unwrap();
    // 4 domains: 24 DOMAIN triples + 12 BULK pairs.
    assert_eq!(report.total_setups, 36);
    assert_eq!(report.resumed, 0);
    let first = std::fs::read(&report.results_path).unwrap();

    // A second full run over the same inputs is byte-identical.
    let mut rerun_cfg = sweep_cfg.clone();
    rerun_cfg.out_dir = dir.path().join("run-b");
    let rerun = cmd_sweep(&rerun_cfg).unwrap();
    let second = std::fs::read(&rerun.results_path).unwrap();
    assert_eq!(first, second);

    // Truncating the results and re-running resumes and converges to the
    // same bytes.
    let text = String::from_utf8(second).unwrap();
    let kept: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
    std::fs::write(&rerun.results_path, kept).unwrap();
    let resumed = cmd_sweep(&rerun_cfg).unwrap();
    assert_eq!(resumed.resumed, 10);
    assert_eq!(std::fs::read(&resumed.results_path).unwrap(), first);

    // Base scores depend only on the (train, test) pair.
    let records = read_records(&report.results_path).unwrap();
    let mut by_pair: std::collections::BTreeMap<(String, String), Vec<f64>> = Default::default();
    for r in records.iter().filter(|r| !r.is_bulk()) {
        by_pair
            .entry((r.train.clone(), r.test.clone()))
            .or_default()
            .push(r.base_f1);
    }
    assert_eq!(by_pair.len(), 12);
    for (pair, values) in by_pair {
        assert!(
            values.iter().all(|v| v == &values[0]),
            "base_f1 differs within pair {pair:?}: {values:?}"
        );
    }

    // Every record carries a defined p-value and the gain flag matches the
    // strict inequality.
    for r in &records {
        let p = r.p_value.expect("sweep computes p-values");
        assert!(p > 0.0 && p <= 1.0);
        let expected_gain = r.st_f1 > r.base_f1;
        assert_eq!(r.gain == selfgain::GainLabel::Gain, expected_gain);
    }
}

#[test]
fn sweep_requires_three_domains() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    cmd_generate(&raw, 2, 300, 60, 0.5, 3).unwrap();
    let mut cfg = base_config(&raw, &dir.path().join("run"));
    cfg.sample_size = 50;
    let err = cmd_sweep(&cfg).unwrap_err();
    assert!(err.to_string().contains("at least 3 domains"), "{err}");
}

#[test]
fn report_emits_all_protocols_with_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    // d = 4 leaves tailored LOO with empty training partitions, so sweep
    // five domains. The generator seed is chosen so that no two suwr values
    // sharing a test corpus tie exactly, which would make the delta
    // indicator undefined at tau = -1.
    let raw = dir.path().join("raw5");
    cmd_generate(&raw, 5, 500, 140, 0.5, 12).unwrap();
    let mut ingest_cfg = base_config(&raw, &dir.path().join("run5"));
    ingest_cfg.sample_size = 120;
    let ingested = cmd_ingest(&ingest_cfg).unwrap();
    let mut sweep_cfg = ingest_cfg.clone();
    sweep_cfg.corpus_dir = ingested.corpora_dir;
    sweep_cfg.mode = Mode::Both;
    sweep_cfg.significance_iterations = 0;
    let sweep = cmd_sweep(&sweep_cfg).unwrap();
    assert_eq!(sweep.total_setups, 60 + 20);

    let written = cmd_report(&sweep_cfg, &sweep.results_path, &[Protocol::All]).unwrap();
    assert_eq!(written.len(), 6);
    for path in &written {
        assert!(path.is_file());
    }

    let check_rows = |stem: &str, expected_names: &[&str]| {
        let text =
            std::fs::read_to_string(sweep_cfg.out_dir.join(format!("{stem}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "type,precision_on_gain,macro_f1,accuracy");
        let names: Vec<String> = lines
            .map(|l| {
                let mut parts = l.split(',');
                let name = parts.next().unwrap().to_string();
                for value in parts {
                    let v: f64 = value.parse().expect("numeric cell");
                    assert!((0.0..=100.0).contains(&v), "{stem}: {value}");
                }
                name
            })
            .collect();
        assert_eq!(names, expected_names);
    };
    let measures = ["cosine", "euclidean", "kl", "js", "suwr"];
    check_rows("unsup", &measures);
    check_rows("loo", &measures);
    check_rows("tailored", &measures);
    check_rows("tailored_tt_only", &measures);
    check_rows("baselines", &["POS", "NEG", "ONCE", "MAJ"]);

    let grid = std::fs::read_to_string(sweep_cfg.out_dir.join("grid.csv")).unwrap();
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("train,"));
    for line in &lines[1..] {
        for cell in line.split(',').skip(1) {
            assert!(
                ["BOTH", "DOMAIN_ONLY", "BULK_ONLY", "NONE", ""].contains(&cell),
                "unexpected grid cell `{cell}`"
            );
        }
    }
}

#[test]
fn report_fails_on_missing_domain_records() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut sweep_cfg) = sweep_fixture(dir.path());
    sweep_cfg.mode = Mode::Bulk;
    sweep_cfg.significance_iterations = 0;
    let sweep = cmd_sweep(&sweep_cfg).unwrap();
    let err = cmd_report(&sweep_cfg, &sweep.results_path, &[Protocol::Unsup]).unwrap_err();
    assert!(err.to_string().contains("DOMAIN"), "{err}");
}

#[test]
fn similarity_single_value_and_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    cmd_generate(&raw, 3, 300, 60, 0.5, 21).unwrap();
    let mut cfg = base_config(&raw, &dir.path().join("run"));
    cfg.measures = vec![selfgain::Measure::Js];

    let single = cmd_similarity(&cfg, Some("d00"), Some("d01")).unwrap();
    let value: f64 = single.trim().parse().unwrap();
    assert!(value > 0.0 && value <= 1.0);

    let matrix = cmd_similarity(&cfg, None, None).unwrap();
    let lines: Vec<&str> = matrix.lines().collect();
    assert_eq!(lines[0], "domain,d00,d01,d02");
    assert_eq!(lines.len(), 4);
    // Diagonal is exactly zero, and the (d00, d01) cell matches the single
    // value call.
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row[1], "0");
    assert_eq!(row[2].parse::<f64>().unwrap(), value);

    // Several measures selected: the command refuses.
    cfg.measures = selfgain::Measure::ALL.to_vec();
    assert!(cmd_similarity(&cfg, Some("d00"), Some("d01")).is_err());
}
