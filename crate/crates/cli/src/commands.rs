//! The ingest / sweep / similarity / report commands behind the `selfgain`
//! binary. All commands are deterministic given identical configuration and
//! inputs; the sweep is resumable and its results file is stably sorted.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use selfgain::corpus::{
    generate_synthetic_domains, load_corpus, sample_corpus, save_corpus, CorpusError,
};
use selfgain::predictor::{
    baselines_report, bulk_grid, loo_report, rows_to_csv, tailored_report, unsup_report,
    FeatureSet, IndicatorConfig, PredictorError,
};
use selfgain::selftrain::{
    append_record, bulk_corpus, derive_seed, enumerate_setups, read_records,
    self_train_with_base, train_base_model, write_records_sorted, ExtraSource, PairSims,
    SelfTrainError, SetupTriple, SimilarityBlock, SweepMode, SweepRecord,
};
use selfgain::similarity::{compute, Measure, SimilarityError};
use selfgain::{Corpus, GainLabel};

use crate::config::{ConfigError, Mode, Protocol, RunConfig};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    SelfTrain(#[from] SelfTrainError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

fn io_error(path: &Path, source: std::io::Error) -> CommandError {
    CommandError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Generates synthetic domains and writes them as CANONICAL files under
/// `out_dir`, one `<domain>.txt` per domain. Returns the domain ids.
pub fn cmd_generate(
    out_dir: &Path,
    n_domains: usize,
    vocab_size: usize,
    docs_per_domain: usize,
    divergence_knob: f64,
    seed: u64,
) -> Result<Vec<String>, CommandError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let corpora =
        generate_synthetic_domains(n_domains, vocab_size, docs_per_domain, divergence_knob, seed)?;
    let mut ids = Vec::with_capacity(corpora.len());
    for corpus in &corpora {
        let path = out_dir.join(format!("{}.txt", corpus.domain_id()));
        save_corpus(corpus, &path)?;
        ids.push(corpus.domain_id().to_string());
    }
    Ok(ids)
}

/// Per-domain summary written to the ingest manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSummary {
    pub domain: String,
    pub documents: usize,
    pub positive: usize,
    pub negative: usize,
    pub unlabeled: usize,
    pub vocabulary: usize,
    pub sha256: String,
}

/// Outcome of `cmd_ingest`: normalized domains plus the ones skipped for
/// being smaller than the sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub ingested: Vec<DomainSummary>,
    pub skipped: Vec<(String, usize)>,
    pub corpora_dir: PathBuf,
    pub manifest: PathBuf,
}

/// Maps configured (or discovered) domains to their corpus files.
fn resolve_domain_files(cfg: &RunConfig) -> Result<Vec<(String, PathBuf)>, CommandError> {
    if cfg.domains.is_empty() {
        let entries = std::fs::read_dir(&cfg.corpus_dir)
            .map_err(|e| io_error(&cfg.corpus_dir, e))?
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| io_error(&cfg.corpus_dir, e))?;
        let mut files: Vec<(String, PathBuf)> = entries
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .filter_map(|p| {
                p.file_stem()
                    .map(|stem| (stem.to_string_lossy().into_owned(), p.clone()))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(CommandError::Input(format!(
                "no corpus files found in {}",
                cfg.corpus_dir.display()
            )));
        }
        Ok(files)
    } else {
        let mut files = Vec::with_capacity(cfg.domains.len());
        for domain in &cfg.domains {
            let candidates = [
                cfg.corpus_dir.join(domain),
                cfg.corpus_dir.join(format!("{domain}.txt")),
                cfg.corpus_dir.join(format!("{domain}.review")),
            ];
            let found = candidates.iter().find(|p| p.is_file()).cloned();
            match found {
                Some(path) => files.push((domain.clone(), path)),
                None => {
                    return Err(CommandError::Input(format!(
                        "no corpus file for domain `{domain}` under {}",
                        cfg.corpus_dir.display()
                    )))
                }
            }
        }
        Ok(files)
    }
}

/// Normalizes every domain to exactly `sample_size` documents via seeded
/// sampling, writes CANONICAL files plus a manifest. Domains below the sample
/// size are skipped and reported.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestReport, CommandError> {
    let files = resolve_domain_files(cfg)?;
    let corpora_dir = cfg.out_dir.join("corpora");
    std::fs::create_dir_all(&corpora_dir).map_err(|e| io_error(&corpora_dir, e))?;

    let mut ingested = Vec::new();
    let mut skipped = Vec::new();
    for (domain, path) in files {
        let corpus = load_corpus(&path, cfg.format)?;
        if corpus.len() < cfg.sample_size {
            skipped.push((domain, corpus.len()));
            continue;
        }
        let sampled = sample_corpus(
            &corpus,
            cfg.sample_size,
            derive_seed(cfg.seed, &domain),
            cfg.stratify,
        )?;
        let out_path = corpora_dir.join(format!("{domain}.txt"));
        save_corpus(&sampled, &out_path)?;
        let bytes = std::fs::read(&out_path).map_err(|e| io_error(&out_path, e))?;
        let digest = Sha256::digest(&bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        let (positive, negative, unlabeled) = sampled.label_counts();
        ingested.push(DomainSummary {
            domain,
            documents: sampled.len(),
            positive,
            negative,
            unlabeled,
            vocabulary: sampled.vocabulary().len(),
            sha256,
        });
    }
    if ingested.is_empty() {
        return Err(CommandError::Input(format!(
            "no domain meets the sample size of {} documents",
            cfg.sample_size
        )));
    }

    let manifest = cfg.out_dir.join("manifest.csv");
    let mut out = String::from("domain,documents,positive,negative,unlabeled,vocabulary,sha256\n");
    for s in &ingested {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.domain, s.documents, s.positive, s.negative, s.unlabeled, s.vocabulary, s.sha256
        ));
    }
    std::fs::write(&manifest, out).map_err(|e| io_error(&manifest, e))?;

    Ok(IngestReport {
        ingested,
        skipped,
        corpora_dir,
        manifest,
    })
}

/// Outcome of `cmd_sweep`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub results_path: PathBuf,
    pub total_setups: usize,
    pub resumed: usize,
    pub gain_count: usize,
}

fn load_corpora(cfg: &RunConfig) -> Result<BTreeMap<String, Corpus>, CommandError> {
    let files = resolve_domain_files(cfg)?;
    let mut corpora = BTreeMap::new();
    for (domain, path) in files {
        // The file stem names the domain, so the loaded id matches the key.
        corpora.insert(domain, load_corpus(&path, cfg.format)?);
    }
    Ok(corpora)
}

/// All five measures for one ordered corpus pair.
fn measure_vector(p: &Corpus, q: &Corpus) -> Result<[f64; 5], CommandError> {
    let mut values = [0.0; 5];
    for (slot, measure) in Measure::ALL.into_iter().enumerate() {
        values[slot] = compute(measure, p, q)?.value;
    }
    Ok(values)
}

fn block_from(
    test_train: [f64; 5],
    extra_train: [f64; 5],
    test_extra: [f64; 5],
) -> SimilarityBlock {
    let mut block = SimilarityBlock::default();
    for (slot, measure) in Measure::ALL.into_iter().enumerate() {
        *block.for_measure_mut(measure) = PairSims {
            test_train: test_train[slot],
            extra_train: extra_train[slot],
            test_extra: test_extra[slot],
        };
    }
    block
}

/// Runs every enumerated setup, appending one JSONL record per setup and
/// finally rewriting the file in stable order. Records already present are
/// skipped, which makes interrupted sweeps resumable.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepReport, CommandError> {
    let corpora = load_corpora(cfg)?;
    if corpora.len() < 3 {
        return Err(CommandError::Input(format!(
            "a sweep needs at least 3 domains, found {}",
            corpora.len()
        )));
    }
    let domains: Vec<String> = corpora.keys().cloned().collect();

    let mut setups = Vec::new();
    if matches!(cfg.mode, Mode::Domain | Mode::Both) {
        setups.extend(enumerate_setups(&domains, SweepMode::Domain)?);
    }
    if matches!(cfg.mode, Mode::Bulk | Mode::Both) {
        setups.extend(enumerate_setups(&domains, SweepMode::Bulk)?);
    }
    for setup in setups.iter_mut() {
        setup.seed = cfg.seed;
    }

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_error(&cfg.out_dir, e))?;
    let results_path = cfg.out_dir.join("results.jsonl");
    let existing: Vec<SweepRecord> = if results_path.is_file() {
        read_records(&results_path)?
    } else {
        Vec::new()
    };
    let done: BTreeSet<String> = existing.iter().map(|r| r.setup_id.clone()).collect();
    let pending: Vec<SetupTriple> = setups
        .iter()
        .filter(|s| !done.contains(&s.setup_id()))
        .cloned()
        .collect();
    let resumed = setups.len() - pending.len();

    // Similarities between plain domain pairs are shared by many triples;
    // compute them once up front.
    let mut ordered_pairs = Vec::new();
    for p in &domains {
        for q in &domains {
            if p != q {
                ordered_pairs.push((p.clone(), q.clone()));
            }
        }
    }
    let pair_values: Vec<((String, String), [f64; 5])> = ordered_pairs
        .into_par_iter()
        .map(|(p, q)| {
            let values = measure_vector(&corpora[&p], &corpora[&q])?;
            Ok(((p, q), values))
        })
        .collect::<Result<_, CommandError>>()?;
    let pair_sims: BTreeMap<(String, String), [f64; 5]> = pair_values.into_iter().collect();

    let params = cfg.experiment_params();

    // Each training domain's step-1 model is shared by every triple that
    // trains on it, so baselines train once per domain instead of once per
    // setup.
    let training_domains: BTreeSet<&String> =
        pending.iter().map(|s| &s.train_domain).collect();
    let base_values: Vec<(String, selfgain::LinearModel)> = training_domains
        .into_par_iter()
        .map(|domain| {
            let model = train_base_model(&corpora[domain], cfg.seed, &params.train)?;
            Ok((domain.clone(), model))
        })
        .collect::<Result<_, CommandError>>()?;
    let base_models: BTreeMap<String, selfgain::LinearModel> =
        base_values.into_iter().collect();

    let append_lock = Mutex::new(());
    let run_one = |setup: &SetupTriple| -> Result<SweepRecord, CommandError> {
        let test = &setup.test_domain;
        let train = &setup.train_domain;
        let test_train = pair_sims[&(test.clone(), train.clone())];
        let (extra_train, test_extra) = match &setup.extra {
            ExtraSource::Domain(extra) => (
                pair_sims[&(extra.clone(), train.clone())],
                pair_sims[&(test.clone(), extra.clone())],
            ),
            ExtraSource::Bulk => {
                let bulk = bulk_corpus(&corpora, train, test)?;
                (
                    measure_vector(&bulk, &corpora[train])?,
                    measure_vector(&corpora[test], &bulk)?,
                )
            }
        };
        let block = block_from(test_train, extra_train, test_extra);
        let result = self_train_with_base(setup, &corpora, &params, &base_models[train])?;
        let record = SweepRecord::from_result(&result, block);
        {
            let _guard = append_lock.lock().expect("append lock");
            append_record(&results_path, &record)?;
        }
        Ok(record)
    };

    let new_records: Result<Vec<SweepRecord>, CommandError> = if cfg.jobs == 1 {
        pending.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| CommandError::Input(format!("failed to build thread pool: {e}")))?;
        pool.install(|| pending.par_iter().map(run_one).collect())
    };
    let new_records = new_records?;

    let mut all_records = existing;
    all_records.extend(new_records);
    write_records_sorted(&results_path, &mut all_records)?;

    let gain_count = all_records
        .iter()
        .filter(|r| r.gain == GainLabel::Gain)
        .count();
    Ok(SweepReport {
        results_path,
        total_setups: all_records.len(),
        resumed,
        gain_count,
    })
}

/// Similarity subcommand output: a single value, or a full pairwise matrix
/// (rows are the P/test role, columns the Q/train role).
pub fn cmd_similarity(
    cfg: &RunConfig,
    from: Option<&str>,
    to: Option<&str>,
) -> Result<String, CommandError> {
    let [measure] = cfg.measures.as_slice() else {
        return Err(CommandError::Input(
            "select exactly one measure with --measure".into(),
        ));
    };
    let corpora = load_corpora(cfg)?;
    match (from, to) {
        (Some(a), Some(b)) => {
            let get = |id: &str| {
                corpora
                    .get(id)
                    .ok_or_else(|| CommandError::Input(format!("unknown domain `{id}`")))
            };
            let value = compute(*measure, get(a)?, get(b)?)?;
            Ok(format!("{}\n", value.value))
        }
        (None, None) => {
            let domains: Vec<&String> = corpora.keys().collect();
            let mut out = String::from("domain");
            for q in &domains {
                out.push(',');
                out.push_str(q);
            }
            out.push('\n');
            for p in &domains {
                out.push_str(p);
                for q in &domains {
                    let value = compute(*measure, &corpora[*p], &corpora[*q])?;
                    out.push_str(&format!(",{}", value.value));
                }
                out.push('\n');
            }
            Ok(out)
        }
        _ => Err(CommandError::Input(
            "similarity needs either two domains or none (full matrix)".into(),
        )),
    }
}

/// Renders the requested report protocols from a results file into CSVs under
/// the output directory. Returns the written paths.
pub fn cmd_report(
    cfg: &RunConfig,
    results_path: &Path,
    protocols: &[Protocol],
) -> Result<Vec<PathBuf>, CommandError> {
    let records = read_records(results_path)?;
    let (bulk_records, domain_records): (Vec<SweepRecord>, Vec<SweepRecord>) =
        records.into_iter().partition(SweepRecord::is_bulk);

    let expanded: Vec<Protocol> = if protocols.contains(&Protocol::All) {
        Protocol::CONCRETE.to_vec()
    } else {
        protocols.to_vec()
    };

    let need_domain = |protocol: Protocol| -> Result<&[SweepRecord], CommandError> {
        if domain_records.is_empty() {
            return Err(CommandError::Input(format!(
                "{} needs DOMAIN-mode results, none found in {}",
                protocol.file_stem(),
                results_path.display()
            )));
        }
        Ok(&domain_records)
    };

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_error(&cfg.out_dir, e))?;
    let mut written = Vec::new();
    for &protocol in &expanded {
        let csv = match protocol {
            Protocol::Unsup => rows_to_csv(&unsup_report(
                need_domain(protocol)?,
                &cfg.measures,
                &IndicatorConfig { tau: cfg.tau },
            )?),
            Protocol::Loo => rows_to_csv(&loo_report(
                need_domain(protocol)?,
                &cfg.measures,
                FeatureSet::Three,
                cfg.k,
            )?),
            Protocol::Tailored => rows_to_csv(&tailored_report(
                need_domain(protocol)?,
                &cfg.measures,
                FeatureSet::Three,
                cfg.k,
            )?),
            Protocol::TailoredTtOnly => rows_to_csv(&tailored_report(
                need_domain(protocol)?,
                &cfg.measures,
                FeatureSet::TestTrainOnly,
                cfg.k,
            )?),
            Protocol::Baselines => rows_to_csv(&baselines_report(need_domain(protocol)?)?),
            Protocol::Grid => bulk_grid(need_domain(protocol)?, &bulk_records)?.to_csv(),
            Protocol::All => unreachable!("expanded above"),
        };
        let path = cfg.out_dir.join(format!("{}.csv", protocol.file_stem()));
        std::fs::write(&path, csv).map_err(|e| io_error(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
