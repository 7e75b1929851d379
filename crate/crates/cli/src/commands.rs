use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use forcealign::corpus::{read_manifest_tsv, split_by_speaker, write_cut_list, write_manifest_tsv, Manifest, SplitConfig};
use forcealign::ingest::{parse_alignment_params, parse_asr_transcript, parse_speaker_spans, ManualTranscript};
use forcealign::metrics::evaluate_alignment;
use forcealign::pipeline::{
    align_document, feature_records, read_jsonl, run_build, write_jsonl, AlignConfig, AlignedRecord, BuildConfig,
    BuildDocument, FeatureRecord, LabelRecord,
};
use forcealign::quality::{
    apply_filters, crossval_mae, train_gbdt, CommandDetector, FilterConfig, GbdtHyperparams, GbdtModel,
    LanguageDetector, ProfileDetector, SplitRole,
};
use forcealign::sentence_map::{fit_time_calibration, fit_time_calibration_grid, AlignedSentence, TimeCalibration};
use forcealign::split::Abbreviations;
use forcealign::synth::{generate_corpus, write_corpus, SynthConfig};
use forcealign::tune::{
    document_ids, load_document, sweep_threshold, tune_alignment_params, LabeledCorpus, SweepEntry, TuneConfig,
};
use forcealign::AlignmentParams;

use crate::error::CliError;
use crate::{
    AlignArgs, AlignFlags, BuildArgs, Cli, Command, EvaluateArgs, FilterCmdArgs, FilterFlags, Role, SplitArgs,
    SplitFlags, SynthArgs, TrainArgs, TuneArgs,
};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.jobs == 0 {
        return Err(CliError::input("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build().map_err(CliError::internal)?;
    match &cli.command {
        Command::Align(a) => align(a, &pool),
        Command::TrainIou(a) => train_iou(a),
        Command::Filter(a) => filter(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Split(a) => split(a),
        Command::Tune(a) => tune(a),
        Command::Build(a) => build(a),
        Command::Synth(a) => synth(a),
    }
}

// Files --------------------------------------------------------------------

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::input(e).context(path.display()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(e).context(path.display()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(e).context(dir.display()))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::input(e).context(path.display()))
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    read_jsonl(&read_bytes(path)?[..]).map_err(|e| CliError::from(e).context(path.display()))
}

fn write_records<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_jsonl(items, &mut buf)?;
    write_bytes(path, &buf)
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string(value).expect("serializable"));
}

/// Ids of files named `<id><suffix>` in `dir`, sorted.
fn ids_with_suffix(dir: &Path, suffix: &str) -> Result<Vec<String>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::input(e).context(dir.display()))?;
    let mut ids: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str()?.strip_suffix(suffix).map(str::to_owned))
        .collect();
    ids.sort();
    if ids.is_empty() {
        return Err(CliError::input(format!("no *{suffix} files in {}", dir.display())));
    }
    Ok(ids)
}

// Shared settings ------------------------------------------------------------

fn align_config(f: &AlignFlags) -> Result<AlignConfig, CliError> {
    let params = match (&f.params, &f.preset) {
        (Some(path), _) => parse_alignment_params(&read_text(path)?).map_err(|e| CliError::from(e).context(path.display()))?,
        (None, name) => {
            let name = name.as_deref().unwrap_or("optimized");
            AlignmentParams::preset(name).ok_or_else(|| CliError::input(format!("unknown preset {name:?}")))?
        }
    };
    params.validate()?;
    if !f.no_length_ratio && !(f.max_length_ratio >= 1.0) {
        return Err(CliError::input("--max-length-ratio must be at least 1"));
    }
    Ok(AlignConfig {
        params,
        granularity: f.granularity.parse().map_err(CliError::input)?,
        mode: f.mode.as_deref().map(str::parse).transpose().map_err(CliError::input)?,
        band: f.band,
        max_length_ratio: (!f.no_length_ratio).then_some(f.max_length_ratio),
        calibration: None,
        abbreviations: match &f.abbrev {
            Some(path) => Abbreviations::from_lines(&read_text(path)?),
            None => Abbreviations::german(),
        },
    })
}

fn filter_config(f: &FilterFlags, iou_threshold: f64) -> Result<FilterConfig, CliError> {
    let cfg = FilterConfig {
        iou_threshold,
        cps_min: f.cps_min,
        cps_max: f.cps_max,
        min_audio_s: f.min_audio,
        max_audio_s: f.max_audio,
        language: f.language.clone(),
        unique_sentences: !f.allow_duplicates,
        ..FilterConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn detector(f: &FilterFlags) -> Result<Box<dyn LanguageDetector>, CliError> {
    Ok(match &f.lang_detector {
        Some(cmd) => Box::new(CommandDetector::spawn(cmd)?),
        None => Box::new(ProfileDetector),
    })
}

fn split_config(f: &SplitFlags) -> SplitConfig {
    SplitConfig { test_hours: f.test_hours, speaker_cap: f.speaker_cap, seed: f.seed }
}

fn load_model(path: &Path) -> Result<GbdtModel, CliError> {
    let text = read_text(path)?;
    GbdtModel::from_json(&text).map_err(|e| CliError::from(e).context(path.display()))
}

// align ------------------------------------------------------------------------

fn load_single(a: &AlignArgs) -> Result<(forcealign::AsrTranscript, ManualTranscript), CliError> {
    let (asr_path, txt_path) = (a.asr.as_ref().expect("clap"), a.transcript.as_ref().expect("clap"));
    let asr = parse_asr_transcript(&read_bytes(asr_path)?).map_err(|e| CliError::from(e).context(asr_path.display()))?;
    let name = txt_path.file_name().and_then(|n| n.to_str()).unwrap_or("document");
    let id = name.strip_suffix(".txt").unwrap_or(name);
    let mut transcript = ManualTranscript::new(id, read_text(txt_path)?);
    if let Some(path) = &a.speakers {
        let spans = parse_speaker_spans(&read_text(path)?).map_err(|e| CliError::from(e).context(path.display()))?;
        transcript = transcript.with_speaker_spans(spans).map_err(|e| CliError::from(e).context(path.display()))?;
    }
    Ok((asr, transcript))
}

fn align(a: &AlignArgs, pool: &rayon::ThreadPool) -> Result<(), CliError> {
    let mut cfg = align_config(&a.align)?;
    if let Some(path) = &a.calibration {
        let c: TimeCalibration = serde_json::from_str(&read_text(path)?)
            .map_err(|e| CliError::input(e).context(path.display()))?;
        c.validate()?;
        cfg.calibration = Some(c);
    }
    let model = a.model.as_deref().map(load_model).transpose()?;
    let ids = match &a.input {
        Some(dir) => document_ids(dir)?,
        None => vec![String::new()],
    };
    if ids.is_empty() {
        return Err(CliError::input(format!("no *.asr.json files in {}", a.input.as_ref().expect("dir").display())));
    }

    let results: Vec<Result<_, CliError>> = pool.install(|| {
        ids.par_iter()
            .map(|id| {
                let (asr, transcript) = match &a.input {
                    Some(dir) => load_document(dir, id)?,
                    None => load_single(a)?,
                };
                let doc_id = transcript.recording_id.clone();
                align_document(&asr, &transcript, &cfg, model.as_ref())
                    .map_err(|e| CliError::from(e).context(&doc_id))
            })
            .collect()
    });

    // Written in document order, whatever the scheduling.
    let (mut sentences, mut rejections) = (0, Vec::new());
    for result in results {
        let r = result?;
        let id = &r.recording_id;
        let records: Vec<AlignedRecord> = r.sentences.iter().map(AlignedRecord::from).collect();
        sentences += records.len();
        write_records(&a.out.join(format!("{id}.aligned.jsonl")), &records)?;
        write_records(&a.out.join(format!("{id}.features.jsonl")), &feature_records(&r))?;
        if a.dump_alignment {
            if let Some(path) = &r.path {
                let json = serde_json::to_vec(&path.to_rle_json()).expect("json value");
                write_bytes(&a.out.join(format!("{id}.alignment.json")), &json)?;
            }
        }
        if let Some(rej) = r.rejection {
            rejections.push(rej);
        }
    }
    write_records(&a.out.join("rejections.jsonl"), &rejections)?;
    log::info!("aligned {} documents, {sentences} sentences, {} rejected", ids.len(), rejections.len());
    Ok(())
}

// train-iou ----------------------------------------------------------------------

fn train_iou(a: &TrainArgs) -> Result<(), CliError> {
    if a.features.len() != a.labels.len() {
        return Err(CliError::input(format!(
            "{} feature files but {} label files",
            a.features.len(),
            a.labels.len()
        )));
    }
    let mut pairs = Vec::new();
    for (f, l) in a.features.iter().zip(&a.labels) {
        if f.is_dir() {
            for id in ids_with_suffix(f, ".features.jsonl")? {
                pairs.push((f.join(format!("{id}.features.jsonl")), l.join(format!("{id}.labels.jsonl"))));
            }
        } else {
            pairs.push((f.clone(), l.clone()));
        }
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (fpath, lpath) in &pairs {
        let features: Vec<FeatureRecord> = read_records(fpath)?;
        let labels: BTreeMap<usize, f64> =
            read_records::<LabelRecord>(lpath)?.into_iter().map(|l| (l.sentence, l.iou)).collect();
        for f in features {
            let iou = labels.get(&f.sentence).ok_or_else(|| {
                CliError::input(format!("no label for sentence {}", f.sentence)).context(lpath.display())
            })?;
            x.push(f.features.to_row().to_vec());
            y.push(*iou);
        }
    }
    let hp = GbdtHyperparams {
        num_leaves: a.num_leaves,
        min_child_samples: a.min_child_samples,
        max_bin: a.max_bin,
        learning_rate: a.learning_rate,
        num_trees: a.num_trees,
    };
    let model = train_gbdt(&x, &y, &hp, a.seed)?;
    write_bytes(&a.out, model.to_json().as_bytes())?;
    let cv_mae = a.cv.map(|k| crossval_mae(&x, &y, &hp, k, a.seed)).transpose()?;
    log::info!("trained {} trees on {} rows", model.trees.len(), x.len());
    print_json(&serde_json::json!({ "rows": x.len(), "trees": model.trees.len(), "cv_mae": cv_mae }));
    Ok(())
}

// filter ---------------------------------------------------------------------------

fn filter(a: &FilterCmdArgs) -> Result<(), CliError> {
    let cfg = filter_config(&a.filters, a.iou_threshold)?;
    let records: Vec<AlignedRecord> = read_records(&a.input)?;
    let present: Vec<&AlignedRecord> = records.iter().filter(|r| r.span().is_some()).collect();
    let sentences: Vec<AlignedSentence> = present.iter().map(|r| r.to_aligned()).collect();
    let role = match a.role {
        Role::Train => SplitRole::Train,
        Role::Test => SplitRole::Test,
    };
    let outcome = apply_filters(&sentences, &cfg, role, detector(&a.filters)?.as_ref())
        .map_err(|e| CliError::from(e).context(a.input.display()))?;
    let kept: Vec<&AlignedRecord> = outcome.kept.iter().map(|&k| present[k]).collect();
    write_records(&a.out, &kept)?;
    print_json(&serde_json::json!({
        "input": records.len(),
        "empty": records.len() - present.len(),
        "kept": kept.len(),
        "rejected": outcome.rejected,
    }));
    Ok(())
}

// evaluate -------------------------------------------------------------------------

struct EvalDoc {
    id: String,
    pred: Vec<AlignedSentence>,
    gold: Vec<AlignedSentence>,
}

fn eval_docs(a: &EvaluateArgs) -> Result<Vec<EvalDoc>, CliError> {
    let load = |id: String, pred: &Path, gold: &Path| -> Result<EvalDoc, CliError> {
        let p: Vec<AlignedRecord> = read_records(pred)?;
        let g: Vec<AlignedRecord> = read_records(gold)?;
        if p.len() != g.len() {
            return Err(CliError::input(format!("{} predicted sentences but {} gold", p.len(), g.len())).context(&id));
        }
        Ok(EvalDoc {
            id,
            pred: p.iter().map(AlignedRecord::to_aligned).collect(),
            gold: g.iter().map(AlignedRecord::to_aligned).collect(),
        })
    };
    if a.pred.is_dir() {
        ids_with_suffix(&a.pred, ".aligned.jsonl")?
            .into_iter()
            .map(|id| {
                let pred = a.pred.join(format!("{id}.aligned.jsonl"));
                let gold = a.gold.join(format!("{id}.gold.jsonl"));
                load(id, &pred, &gold)
            })
            .collect()
    } else {
        Ok(vec![load(a.pred.display().to_string(), &a.pred, &a.gold)?])
    }
}

fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let docs = eval_docs(a)?;
    let pred: Vec<AlignedSentence> = docs.iter().flat_map(|d| d.pred.iter().cloned()).collect();
    let gold: Vec<AlignedSentence> = docs.iter().flat_map(|d| d.gold.iter().cloned()).collect();
    let report = evaluate_alignment(&pred, &gold)?;

    if let Some(out) = &a.labels_out {
        for d in &docs {
            let labels: Vec<LabelRecord> = d
                .pred
                .iter()
                .zip(&d.gold)
                .enumerate()
                .filter(|(_, (p, _))| p.span.is_some())
                .map(|(sentence, (p, g))| LabelRecord { sentence, iou: SweepEntry::new(p, g).iou })
                .collect();
            let path: PathBuf =
                if a.pred.is_dir() { out.join(format!("{}.labels.jsonl", d.id)) } else { out.clone() };
            write_records(&path, &labels)?;
        }
    }
    if let Some(out) = &a.fit_calibration {
        let c = if a.grid { fit_time_calibration_grid(&pred, &gold, 1.0, 0.01)? } else { fit_time_calibration(&pred, &gold)? };
        write_bytes(out, serde_json::to_string_pretty(&c).expect("json").as_bytes())?;
        log::info!("calibration start {:+.4} s, end {:+.4} s", c.start_offset, c.end_offset);
    }
    if let Some(out) = &a.sweep_out {
        let entries: Vec<SweepEntry> = pred.iter().zip(&gold).map(|(p, g)| SweepEntry::new(p, g)).collect();
        write_records(out, &sweep_threshold(&entries, &a.thresholds))?;
    }
    print_json(&report);
    Ok(())
}

// split ------------------------------------------------------------------------------

fn verify(m: &Manifest, cap: f64) -> Result<(), CliError> {
    m.verify(cap).map_err(|e| CliError::internal(format!("split verification failed: {e}")))
}

fn split(a: &SplitArgs) -> Result<(), CliError> {
    let file = fs::File::open(&a.input).map_err(|e| CliError::input(e).context(a.input.display()))?;
    let manifest = read_manifest_tsv(BufReader::new(file)).map_err(|e| CliError::from(e).context(a.input.display()))?;
    let out = split_by_speaker(manifest.entries, &split_config(&a.split))?;
    verify(&out, a.split.speaker_cap)?;
    let mut buf = Vec::new();
    write_manifest_tsv(&out, &mut buf)?;
    write_bytes(&a.out, &buf)?;
    if let Some(path) = &a.cuts_out {
        let mut buf = Vec::new();
        write_cut_list(&out, &mut buf)?;
        write_bytes(path, &buf)?;
    }
    print_json(&out.summary());
    Ok(())
}

// tune -------------------------------------------------------------------------------

fn tune(a: &TuneArgs) -> Result<(), CliError> {
    let corpus = LabeledCorpus::load_dir(&a.corpus)?;
    let cfg = TuneConfig {
        budget: a.budget,
        folds: a.folds,
        seed: a.seed,
        align: align_config(&a.align)?,
        grid_calibration: a.grid_calibration,
    };
    let result = tune_alignment_params(&corpus, &cfg)?;
    write_bytes(&a.out, result.best.to_string().as_bytes())?;
    if let Some(path) = &a.trials_out {
        write_records(path, &result.trials)?;
    }
    print_json(&serde_json::json!({ "cv_mean_iou": result.cv_mean_iou, "trials": result.trials.len() }));
    Ok(())
}

// build ------------------------------------------------------------------------------

fn build(a: &BuildArgs) -> Result<(), CliError> {
    let ids = ids_with_suffix(&a.aligned, ".aligned.jsonl")?;
    let docs = ids
        .into_iter()
        .map(|id| {
            let sentences = read_records(&a.aligned.join(format!("{id}.aligned.jsonl")))?;
            let features = read_records(&a.aligned.join(format!("{id}.features.jsonl")))?;
            Ok(BuildDocument { recording_id: id, sentences, features })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let model = a.model.as_deref().map(load_model).transpose()?;
    let cfg = BuildConfig {
        filters: filter_config(&a.filters, a.test_threshold)?,
        train_thresholds: a.thresholds.clone(),
        test_iou_threshold: a.test_threshold,
        split: split_config(&a.split),
    };
    let built = run_build(&docs, model.as_ref(), &cfg, detector(&a.filters)?.as_ref())?;

    let all = Manifest { entries: built.manifests.iter().flat_map(|(_, m)| m.entries.iter().cloned()).collect() };
    verify(&all, a.split.speaker_cap)?;
    let mut summary = BTreeMap::new();
    for (name, m) in &built.manifests {
        let mut buf = Vec::new();
        write_manifest_tsv(m, &mut buf)?;
        write_bytes(&a.out.join(format!("{name}.tsv")), &buf)?;
        let mut cuts = Vec::new();
        write_cut_list(m, &mut cuts)?;
        write_bytes(&a.out.join(format!("{name}.cuts.json")), &cuts)?;
        let hours: f64 = m.entries.iter().map(|e| e.duration()).sum::<f64>() / 3600.0;
        summary.insert(name.clone(), serde_json::json!({ "entries": m.entries.len(), "hours": hours }));
    }
    print_json(&summary);
    Ok(())
}

// synth ------------------------------------------------------------------------------

fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let cfg = SynthConfig { n_docs: a.docs, seed: a.seed, speaker_pool: a.speaker_pool, ..SynthConfig::default() };
    let docs = generate_corpus(&cfg);
    write_corpus(&docs, &a.out).map_err(|e| CliError::input(e).context(a.out.display()))?;
    log::info!("wrote {} synthetic documents to {}", docs.len(), a.out.display());
    Ok(())
}
