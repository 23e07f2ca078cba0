//! Command implementations. Each opens a run directory, executes named
//! stages and leaves a manifest behind, also when a stage fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::audit::{SealedLabels, EVALUATION_STAGE};
use super::config::RunConfig;
use super::features::{rank_bound, FeatureOptions, FeaturePipeline};
use super::manifest::{RunDir, RunManifest};
use crate::classify::{append_mixtures, grid_search, llda_train, topic_mixtures, GridResult, SvmModel, SvmParams, TopicModel};
use crate::corpus::{load_corpus, stratified_split_indices, undersample_indices, Corpus, InputFormat, Message, SkippedRecord, Tier1, Tier2};
use crate::error::{Error, Result};
use crate::eval::{confusion, group_report_csv, metrics, user_group_report, ConfusionMatrix, MetricReport, ReplicateSet, WilcoxonResult};
use crate::features::{FrequentTokenList, SentimentLexicon, DENSE_COLUMNS};
use crate::geocode::{
    density_grid, extract_locations, match_streets, resolve, validate_geocoder, CentroidTable, FallbackClient, Gazetteer,
    GeoResolution, HttpFallback, DEFAULT_REGION,
};
use crate::hash::derive_seed;
use crate::linalg::Matrix;
use crate::pool::WorkerPool;
use crate::preprocess::{process, LexiconTables, ProcessedMessage};

pub const TIER1_MODEL_DIR: &str = "models/tier1";
pub const TIER2_NAMES: [&str; 3] = ["hybrid", "llda", "svm"];
pub const MIN_REPLICATES: usize = 5;
/// Stages whose failure means unreadable or unusable input data.
pub const DATA_STAGES: [&str; 3] = ["ingest", "load_gazetteer", "load_model"];

// Offsets mixed into the run seed for the independent random streams.
const SPLIT_STREAM: u64 = 1 << 32;
const UNDERSAMPLE_STREAM: u64 = 2 << 32;
const GRID_STREAM: u64 = 3 << 32;

fn stage_err(stage: &str, message: impl ToString) -> Error {
    Error::Stage {
        stage: stage.to_string(),
        message: message.to_string(),
    }
}

fn pool_of(cfg: &RunConfig) -> Result<WorkerPool> {
    WorkerPool::new(cfg.workers)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable output") + "\n"
}

pub struct Inputs {
    pub corpus: Corpus,
    pub skipped: Vec<SkippedRecord>,
    pub lexicon: LexiconTables,
    pub sentiment: SentimentLexicon,
    pub frequent: Option<FrequentTokenList>,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let path = cfg.corpus.as_ref().ok_or_else(|| Error::InvalidInput("no corpus configured".into()))?;
        let loaded = load_corpus(path, InputFormat::from_path(path))?;
        if loaded.corpus.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        let sentiment = match &cfg.sentiment {
            Some(p) => SentimentLexicon::load(p)?,
            None => SentimentLexicon::default(),
        };
        Ok(Inputs {
            corpus: loaded.corpus,
            skipped: loaded.skipped,
            lexicon: LexiconTables::load(cfg.slang.as_deref(), cfg.stopwords.as_deref())?,
            sentiment,
            frequent: cfg.frequent_list.as_deref().map(FrequentTokenList::load).transpose()?,
        })
    }

    fn messages(&self) -> &[Message] {
        self.corpus.messages()
    }

    fn texts(&self, idx: &[usize]) -> Vec<&str> {
        idx.iter().map(|&i| self.messages()[i].text.as_str()).collect()
    }

    fn record_inputs(&self, run: &mut RunDir, cfg: &RunConfig) -> Result<()> {
        for p in [&cfg.corpus, &cfg.stopwords, &cfg.slang, &cfg.sentiment, &cfg.frequent_list].into_iter().flatten() {
            run.record_input(p)?;
        }
        Ok(())
    }
}

fn process_all(inputs: &Inputs, pool: &WorkerPool) -> Result<Vec<ProcessedMessage>> {
    let msgs = inputs.messages();
    pool.try_run(msgs.len(), |i| process(&msgs[i].text, &inputs.lexicon))
        .map_err(|e| stage_err("preprocess", e))
}

fn feature_options(cfg: &RunConfig, inputs: &Inputs) -> FeatureOptions {
    FeatureOptions {
        svd_rank: cfg.svd_rank,
        clamp_rank: true,
        frequent_tokens: cfg.frequent_tokens,
        frequent_list: inputs.frequent.clone(),
        lasso: cfg.lasso,
        lasso_lambda: cfg.lasso_lambda,
        cv_folds: cfg.cv_folds,
    }
}

fn select<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

fn class_names_tier1() -> Vec<String> {
    Tier1::ALL.iter().map(|t| t.as_str().to_string()).collect()
}

fn class_names_tier2() -> Vec<String> {
    Tier2::ALL.iter().map(|t| t.as_str().to_string()).collect()
}

fn tier1_index(t: Tier1) -> usize {
    Tier1::ALL.iter().position(|&x| x == t).expect("tier-1 class")
}

fn tier2_index(t: Tier2) -> usize {
    Tier2::ALL.iter().position(|&x| x == t).expect("tier-2 class")
}

fn accuracy(actual: &[usize], predicted: &[usize]) -> f64 {
    let hits = actual.iter().zip(predicted).filter(|(a, p)| a == p).count();
    100.0 * hits as f64 / actual.len().max(1) as f64
}

/// Fixed tier-1 split over the labeled messages.
pub struct Tier1Split {
    /// Corpus indices.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub train_labels: Vec<usize>,
    pub test_labels: SealedLabels,
}

fn tier1_split(inputs: &Inputs, cfg: &RunConfig) -> Result<Tier1Split> {
    let labeled: Vec<(usize, usize)> = inputs
        .messages()
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.gold_label.map(|l| (i, tier1_index(l.tier1))))
        .collect();
    if labeled.is_empty() {
        return Err(Error::Empty("labeled messages"));
    }
    let strata: Vec<usize> = labeled.iter().map(|p| p.1).collect();
    let (tr, te) = stratified_split_indices(&strata, cfg.train_fraction, derive_seed(cfg.seed, SPLIT_STREAM))?;
    let mut train: Vec<usize> = tr.iter().map(|&k| labeled[k].0).collect();
    let mut train_labels: Vec<usize> = tr.iter().map(|&k| labeled[k].1).collect();
    if cfg.undersample {
        let keep = undersample_indices(&train_labels, derive_seed(cfg.seed, UNDERSAMPLE_STREAM))?;
        train = select(&train, &keep);
        train_labels = select(&train_labels, &keep);
    }
    Ok(Tier1Split {
        train,
        test: te.iter().map(|&k| labeled[k].0).collect(),
        train_labels,
        test_labels: SealedLabels::new(te.iter().map(|&k| labeled[k].1).collect()),
    })
}

fn choose_params(
    x: &Matrix,
    labels: &[usize],
    cfg: &RunConfig,
    seed: u64,
    pool: &WorkerPool,
) -> Result<(SvmParams, Option<GridResult>)> {
    let grid = cfg.svm_grid()?;
    if grid.len() == 1 {
        return Ok((grid[0], None));
    }
    let res = grid_search(x, labels, &grid, cfg.cv_folds, seed, pool)?;
    Ok((res.best, Some(res)))
}

pub struct Tier1Model {
    pub features: FeaturePipeline,
    pub svm: SvmModel,
}

impl Tier1Model {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let dir = run_dir.join(TIER1_MODEL_DIR);
        let features = FeaturePipeline::load(&dir.join("features"))?;
        let (svm, _, hash) = SvmModel::load(&dir.join("svm"))?;
        if hash.as_deref() != Some(features.tfidf.vocabulary_hash().as_str()) {
            return Err(Error::VocabularyMismatch("svm and featurizer come from different runs".into()));
        }
        Ok(Tier1Model { features, svm })
    }

    fn predict(&self, inputs: &Inputs, docs: &[ProcessedMessage], idx: &[usize]) -> Result<Vec<usize>> {
        if idx.is_empty() {
            return Ok(Vec::new());
        }
        let x = self
            .features
            .transform(&inputs.texts(idx), &select(docs, idx), &inputs.sentiment)?;
        self.svm.predict(&x)
    }
}

fn matrix_csv(ids: &[&str], names: &[String], x: &Matrix) -> String {
    let mut out = String::from("id");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(x.iter_rows()) {
        out.push_str(id);
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

fn column_names(fp: &FeaturePipeline) -> Vec<String> {
    fp.dense_names()
        .into_iter()
        .map(String::from)
        .chain((0..fp.rank()).map(|k| format!("svd{k}")))
        .collect()
}

fn featurize_stage(
    run: &mut RunDir,
    inputs: &Inputs,
    docs: &[ProcessedMessage],
    split: &Tier1Split,
    cfg: &RunConfig,
) -> Result<(FeaturePipeline, Matrix)> {
    run.stage("featurize", |run| {
        let (fp, x) = FeaturePipeline::fit(
            &inputs.texts(&split.train),
            &select(docs, &split.train),
            &split.train_labels,
            Tier1::ALL.len(),
            &inputs.sentiment,
            &feature_options(cfg, inputs),
            cfg.seed,
        )?;
        fp.save(&run.path(&format!("{TIER1_MODEL_DIR}/features")))?;
        run.register_dir(&format!("{TIER1_MODEL_DIR}/features"))?;
        let ids: Vec<&str> = split.train.iter().map(|&i| inputs.messages()[i].id.as_str()).collect();
        run.write("reports/train_matrix.csv", matrix_csv(&ids, &column_names(&fp), &x))?;
        run.write(
            "metrics/features.json",
            to_json(&json!({
                "dense_columns": DENSE_COLUMNS,
                "dense_selected": fp.dense_names(),
                "lasso_lambdas": fp.lasso_lambdas,
                "svd_rank": fp.rank(),
                "explained": fp.basis.as_ref().map(|b| b.explained),
                "vocabulary": fp.tfidf.len(),
                "train_rows": x.rows(),
            })),
        )?;
        Ok((fp, x))
    })
}

fn train_stage(
    run: &mut RunDir,
    features: FeaturePipeline,
    x: &Matrix,
    split: &Tier1Split,
    cfg: &RunConfig,
    pool: &WorkerPool,
) -> Result<Tier1Model> {
    run.stage("train", |run| {
        let (params, grid) = choose_params(x, &split.train_labels, cfg, derive_seed(cfg.seed, GRID_STREAM), pool)?;
        if let Some(g) = &grid {
            run.write("metrics/tier1_grid.json", to_json(g))?;
        }
        let svm = SvmModel::train(x, &split.train_labels, &params)?;
        let rel = format!("{TIER1_MODEL_DIR}/svm");
        svm.save(&run.path(&rel), &class_names_tier1(), Some(&features.tfidf.vocabulary_hash()))?;
        run.register_dir(&rel)?;
        Ok(Tier1Model { features, svm })
    })
}

fn evaluate_stage(
    run: &mut RunDir,
    model: &Tier1Model,
    inputs: &Inputs,
    docs: &[ProcessedMessage],
    split: &Tier1Split,
    cfg: &RunConfig,
) -> Result<MetricReport> {
    run.stage(EVALUATION_STAGE, |run| {
        if split.test.is_empty() {
            return Err(Error::Empty("test split"));
        }
        let pred = model.predict(inputs, docs, &split.test)?;
        let actual = split.test_labels.reveal(EVALUATION_STAGE)?;
        let cm = confusion(actual, &pred, &class_names_tier1())?;
        let report = metrics(&cm)?;
        run.write("metrics/tier1.json", report.to_json() + "\n")?;
        run.write("metrics/tier1_confusion.csv", cm.to_csv())?;
        let outcomes = split
            .test
            .iter()
            .zip(actual.iter().zip(&pred))
            .map(|(&i, (a, p))| (inputs.messages()[i].user.as_str(), a == p));
        run.write("metrics/tier1_groups.csv", group_report_csv(&user_group_report(outcomes, &cfg.groups())))?;
        Ok(report)
    })
}

fn classify_stage(run: &mut RunDir, model: &Tier1Model, inputs: &Inputs, docs: &[ProcessedMessage]) -> Result<Vec<usize>> {
    run.stage("classify", |run| {
        let all: Vec<usize> = (0..inputs.messages().len()).collect();
        let pred = model.predict(inputs, docs, &all)?;
        let names = class_names_tier1();
        let mut csv = String::from("id,predicted\n");
        for (m, p) in inputs.messages().iter().zip(&pred) {
            csv.push_str(&format!("{},{}\n", m.id, names[*p]));
        }
        run.write("reports/predictions.csv", csv)?;
        Ok(pred)
    })
}

// ---------------------------------------------------------------- tier 2

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonRow {
    pub a: String,
    pub b: String,
    pub result: Option<WilcoxonResult>,
    pub error: Option<String>,
}

/// SVM settings for the two SVM-based sub-class classifiers, each picked
/// by its own grid search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tier2Params {
    pub svm: SvmParams,
    pub hybrid: SvmParams,
}

#[derive(Debug, Clone)]
pub struct Tier2Summary {
    pub params: Tier2Params,
    pub set: ReplicateSet,
    /// Confusion matrices summed over replicates, by classifier name.
    pub confusions: BTreeMap<String, ConfusionMatrix>,
    pub reports: BTreeMap<String, MetricReport>,
    pub wilcoxon: Vec<WilcoxonRow>,
}

struct ReplicateOutcome {
    accuracy: [f64; 3],
    confusion: [ConfusionMatrix; 3],
}

fn tier2_subset(inputs: &Inputs) -> (Vec<usize>, Vec<usize>) {
    inputs
        .messages()
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.gold_label.and_then(|l| l.tier2).map(|t| (i, tier2_index(t))))
        .unzip()
}

/// Trains the three sub-class classifiers on one split and scores them on
/// its held-out part, in [`TIER2_NAMES`] order.
fn replicate(
    inputs: &Inputs,
    docs: &[ProcessedMessage],
    idx: &[usize],
    labels: &[usize],
    seed: u64,
    params: &Tier2Params,
    cfg: &RunConfig,
) -> Result<ReplicateOutcome> {
    let (tr, te) = stratified_split_indices(labels, cfg.train_fraction, seed)?;
    let (train, test) = (select(idx, &tr), select(idx, &te));
    let ytr = select(labels, &tr);
    let sealed = SealedLabels::new(select(labels, &te));
    let (dtr, dte) = (select(docs, &train), select(docs, &test));
    let (fp, xtr) = FeaturePipeline::fit(
        &inputs.texts(&train),
        &dtr,
        &ytr,
        Tier2::ALL.len(),
        &inputs.sentiment,
        &feature_options(cfg, inputs),
        seed,
    )?;
    let xte = fp.transform(&inputs.texts(&test), &dte, &inputs.sentiment)?;

    let svm = SvmModel::train(&xtr, &ytr, &params.svm)?;
    let pred_svm = svm.predict(&xte)?;

    let tokens = |d: &[ProcessedMessage]| d.iter().map(|m| m.relevant_tokens.clone()).collect::<Vec<_>>();
    let (ttr, tte) = (tokens(&dtr), tokens(&dte));
    let label_sets: Vec<Vec<usize>> = ytr.iter().map(|&l| vec![l]).collect();
    let llda = llda_train(&ttr, &label_sets, &class_names_tier2(), cfg.llda_params())?;
    let theta_te = topic_mixtures(&llda, &tte);
    let pred_llda: Vec<usize> = theta_te.iter().map(|t| t.argmax()).collect();

    let htr = append_mixtures(&xtr, &topic_mixtures(&llda, &ttr))?;
    let hte = append_mixtures(&xte, &theta_te)?;
    let hybrid = SvmModel::train(&htr, &ytr, &params.hybrid)?;
    let pred_hybrid = hybrid.predict(&hte)?;

    let actual = sealed.reveal(EVALUATION_STAGE)?;
    let names = class_names_tier2();
    let preds = [&pred_hybrid, &pred_llda, &pred_svm];
    Ok(ReplicateOutcome {
        accuracy: preds.map(|p| accuracy(actual, p)),
        confusion: [
            confusion(actual, preds[0], &names)?,
            confusion(actual, preds[1], &names)?,
            confusion(actual, preds[2], &names)?,
        ],
    })
}

/// R seeded replicates of the sub-class comparison on the gold
/// transportation messages. SVM hyper-parameters come from grid searches on
/// the first replicate's training part and are shared by every replicate.
pub fn tier2_replicates(inputs: &Inputs, docs: &[ProcessedMessage], cfg: &RunConfig, pool: &WorkerPool) -> Result<Tier2Summary> {
    if cfg.replicates < MIN_REPLICATES {
        return Err(Error::InvalidInput(format!(
            "replicate comparison needs at least {MIN_REPLICATES} replicates, got {}",
            cfg.replicates
        )));
    }
    let (idx, labels) = tier2_subset(inputs);
    if idx.is_empty() {
        return Err(Error::Empty("messages with a transportation sub-class"));
    }
    let seeds: Vec<u64> = (0..cfg.replicates as u64).map(|r| derive_seed(cfg.seed, r)).collect();

    let (tr0, _) = stratified_split_indices(&labels, cfg.train_fraction, seeds[0])?;
    let train0 = select(&idx, &tr0);
    let y0 = select(&labels, &tr0);
    let d0 = select(docs, &train0);
    let (_, x0) = FeaturePipeline::fit(
        &inputs.texts(&train0),
        &d0,
        &y0,
        Tier2::ALL.len(),
        &inputs.sentiment,
        &feature_options(cfg, inputs),
        seeds[0],
    )?;
    let grid_seed = derive_seed(seeds[0], GRID_STREAM);
    let (svm, _) = choose_params(&x0, &y0, cfg, grid_seed, pool)?;
    let t0: Vec<Vec<String>> = d0.iter().map(|m| m.relevant_tokens.clone()).collect();
    let sets: Vec<Vec<usize>> = y0.iter().map(|&l| vec![l]).collect();
    let llda0 = llda_train(&t0, &sets, &class_names_tier2(), cfg.llda_params())?;
    let h0 = append_mixtures(&x0, &topic_mixtures(&llda0, &t0))?;
    let (hybrid, _) = choose_params(&h0, &y0, cfg, grid_seed, pool)?;
    let params = Tier2Params { svm, hybrid };

    let outcomes = pool.run(seeds.len(), |r| replicate(inputs, docs, &idx, &labels, seeds[r], &params, cfg));
    let mut per_run = Vec::with_capacity(seeds.len());
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(Ok(v)) => per_run.push(v),
            Ok(Err(e)) => return Err(stage_err("replicates", format!("replicate {r} failed: {e}"))),
            Err(f) => return Err(stage_err("replicates", format!("replicate {r} crashed: {}", f.message))),
        }
    }

    let mut set = ReplicateSet::new(seeds);
    let mut confusions = BTreeMap::new();
    for (k, name) in TIER2_NAMES.iter().enumerate() {
        set.insert(name, per_run.iter().map(|o| o.accuracy[k]).collect())?;
        let mut total = ConfusionMatrix::new(class_names_tier2());
        for o in &per_run {
            total.add(&o.confusion[k])?;
        }
        confusions.insert(name.to_string(), total);
    }
    let reports = confusions
        .iter()
        .map(|(n, cm)| Ok((n.clone(), metrics(cm)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let wilcoxon = set
        .compare_all()
        .into_iter()
        .map(|c| {
            let (result, error) = match c.result {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e)),
            };
            WilcoxonRow { a: c.a, b: c.b, result, error }
        })
        .collect();
    Ok(Tier2Summary {
        params,
        set,
        confusions,
        reports,
        wilcoxon,
    })
}

fn replicates_stage(
    run: &mut RunDir,
    inputs: &Inputs,
    docs: &[ProcessedMessage],
    cfg: &RunConfig,
    pool: &WorkerPool,
) -> Result<Tier2Summary> {
    run.stage("replicates", |run| {
        let s = tier2_replicates(inputs, docs, cfg, pool)?;
        run.write("metrics/tier2_params.json", to_json(&s.params))?;
        for (name, report) in &s.reports {
            run.write(&format!("metrics/tier2_{name}.json"), report.to_json() + "\n")?;
            run.write(&format!("metrics/tier2_{name}_confusion.csv"), s.confusions[name].to_csv())?;
        }
        run.write("reports/replicates.csv", s.set.to_csv())?;
        let summary: BTreeMap<&str, serde_json::Value> = TIER2_NAMES
            .iter()
            .map(|n| (*n, json!({ "mean": s.set.mean(n), "median": s.set.median(n) })))
            .collect();
        run.write("reports/replicate_summary.json", to_json(&summary))?;
        run.write("reports/wilcoxon.json", to_json(&s.wilcoxon))?;
        Ok(s)
    })
}

// ---------------------------------------------------------------- geocoding

pub struct GeoContext {
    pub gazetteer: Gazetteer,
    pub fallback: Option<Box<dyn FallbackClient>>,
}

impl GeoContext {
    /// Fails when the gazetteer is not configured or cannot be read.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.gazetteer.as_ref().ok_or_else(|| Error::InvalidInput("no gazetteer configured".into()))?;
        let gazetteer = Gazetteer::load(dir)?;
        if gazetteer.is_empty() {
            return Err(Error::Empty("gazetteer"));
        }
        let fallback: Option<Box<dyn FallbackClient>> = match (&cfg.fallback_url, &cfg.centroids) {
            (Some(url), _) => Some(Box::new(HttpFallback::new(
                url,
                Duration::from_millis(cfg.fallback_timeout_ms),
                cfg.fallback_max_in_flight,
            ))),
            (None, Some(p)) => Some(Box::new(CentroidTable::load(p)?)),
            (None, None) => None,
        };
        Ok(GeoContext { gazetteer, fallback })
    }

    fn record_inputs(&self, run: &mut RunDir, cfg: &RunConfig) -> Result<()> {
        if let Some(dir) = &cfg.gazetteer {
            for f in ["streets.csv", "intersections.csv"] {
                if dir.join(f).exists() {
                    run.record_input(&dir.join(f))?;
                }
            }
        }
        if let Some(p) = &cfg.centroids {
            run.record_input(p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeocodedMessage {
    pub id: String,
    pub class: String,
    pub spans: Vec<String>,
    pub resolution: GeoResolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoSummary {
    pub messages: usize,
    pub resolved: usize,
    pub validated: bool,
}

fn geocode_one(msg: &Message, class: &str, ctx: &GeoContext, alpha: f64) -> Result<GeocodedMessage> {
    let spans = extract_locations(msg, &ctx.gazetteer, alpha);
    let cands = match_streets(&spans, &ctx.gazetteer, alpha)?;
    let resolution = resolve(msg.geo, cands, &ctx.gazetteer, ctx.fallback.as_deref());
    Ok(GeocodedMessage {
        id: msg.id.clone(),
        class: class.to_string(),
        spans,
        resolution,
    })
}

fn geocode_stage(
    run: &mut RunDir,
    msgs: &[&Message],
    classes: &[String],
    ctx: &GeoContext,
    cfg: &RunConfig,
    pool: &WorkerPool,
) -> Result<GeoSummary> {
    run.stage("geocode", |run| {
        let results = pool
            .try_run(msgs.len(), |i| geocode_one(msgs[i], &classes[i], ctx, cfg.alpha))
            .map_err(|e| stage_err("geocode", e))?
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let mut jsonl = String::new();
        for r in &results {
            jsonl.push_str(&serde_json::to_string(r).expect("geocoded message serializes"));
            jsonl.push('\n');
        }
        run.write("geo/candidates.jsonl", jsonl)?;
        let points: Vec<_> = results
            .iter()
            .filter_map(|r| r.resolution.point.map(|p| (p, r.class.clone())))
            .collect();
        let grid = density_grid(&points, cfg.density_cell_feet, DEFAULT_REGION)?;
        run.write("geo/density.geojson", to_json(&grid.to_geojson()))?;

        let tagged: Vec<Message> = msgs.iter().filter(|m| m.geo.is_some()).map(|m| (*m).clone()).collect();
        let validated = if tagged.is_empty() {
            run.write("reports/geo_validation.txt", "validation skipped: no geo-tagged messages\n")?;
            false
        } else {
            match validate_geocoder(&tagged, &ctx.gazetteer, cfg.alpha, ctx.fallback.as_deref()) {
                Ok(report) => {
                    run.write("reports/geo_validation.json", to_json(&report))?;
                    true
                }
                Err(Error::Empty(_)) => {
                    run.write(
                        "reports/geo_validation.txt",
                        format!("validation skipped: none of {} geo-tagged messages resolved from text\n", tagged.len()),
                    )?;
                    false
                }
                Err(e) => return Err(e),
            }
        };
        Ok(GeoSummary {
            messages: results.len(),
            resolved: points.len(),
            validated,
        })
    })
}

fn gold_class(m: &Message) -> String {
    match m.gold_label {
        Some(l) => match l.tier2 {
            Some(t) => t.as_str().to_string(),
            None => l.tier1.as_str().to_string(),
        },
        None => "unlabeled".to_string(),
    }
}

/// Sub-class model over every labeled transportation message, used to tag
/// geocoded points.
fn density_classifier(inputs: &Inputs, docs: &[ProcessedMessage], cfg: &RunConfig) -> Result<Option<TopicModel>> {
    let (idx, labels) = tier2_subset(inputs);
    if idx.is_empty() {
        return Ok(None);
    }
    let toks: Vec<Vec<String>> = idx.iter().map(|&i| docs[i].relevant_tokens.clone()).collect();
    let sets: Vec<Vec<usize>> = labels.iter().map(|&l| vec![l]).collect();
    Ok(Some(llda_train(&toks, &sets, &class_names_tier2(), cfg.llda_params())?))
}

// ---------------------------------------------------------------- commands

fn open(cfg: &RunConfig, command: &str) -> Result<(RunDir, WorkerPool)> {
    cfg.validate()?;
    Ok((RunDir::create(cfg, command)?, pool_of(cfg)?))
}

fn ingest_stage(run: &mut RunDir, cfg: &RunConfig) -> Result<Inputs> {
    run.stage("ingest", |run| {
        let inputs = Inputs::load(cfg)?;
        inputs.record_inputs(run, cfg)?;
        let counts: BTreeMap<String, usize> = inputs
            .corpus
            .label_counts()
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let skipped: Vec<_> = inputs
            .skipped
            .iter()
            .map(|s| json!({ "line": s.line, "reason": s.reason }))
            .collect();
        run.write(
            "reports/ingest.json",
            to_json(&json!({
                "messages": inputs.corpus.len(),
                "labeled": inputs.corpus.labeled_count(),
                "label_counts": counts,
                "skipped": skipped,
            })),
        )?;
        Ok(inputs)
    })
}

fn preprocess_stage(run: &mut RunDir, inputs: &Inputs, pool: &WorkerPool, write: bool) -> Result<Vec<ProcessedMessage>> {
    run.stage("preprocess", |run| {
        let docs = process_all(inputs, pool)?;
        if write {
            let mut out = String::new();
            for (m, d) in inputs.messages().iter().zip(&docs) {
                let row = json!({ "id": m.id, "raw_tokens": d.raw_tokens, "relevant_tokens": d.relevant_tokens });
                out.push_str(&row.to_string());
                out.push('\n');
            }
            run.write("reports/processed.jsonl", out)?;
        }
        Ok(docs)
    })
}

fn split_stage(run: &mut RunDir, inputs: &Inputs, cfg: &RunConfig) -> Result<Tier1Split> {
    run.stage("split", |run| {
        let s = tier1_split(inputs, cfg)?;
        let ids = |idx: &[usize]| idx.iter().map(|&i| inputs.messages()[i].id.clone()).collect::<Vec<_>>();
        run.write("reports/split.json", to_json(&json!({ "train": ids(&s.train), "test": ids(&s.test) })))?;
        Ok(s)
    })
}

fn close(mut run: RunDir, sealed: &[&SealedLabels]) -> Result<RunManifest> {
    for s in sealed {
        run.manifest.label_access.extend(s.access_log());
    }
    run.finish()
}

/// Wraps a command body so a failure still leaves the manifest on disk.
fn guarded<T>(run: &mut RunDir, body: impl FnOnce(&mut RunDir) -> Result<T>) -> Result<T> {
    let out = body(run);
    if out.is_err() {
        run.save_manifest()?;
    }
    out
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<RunManifest> {
    let (mut run, _) = open(cfg, "ingest")?;
    guarded(&mut run, |run| ingest_stage(run, cfg).map(drop))?;
    close(run, &[])
}

pub fn cmd_preprocess(cfg: &RunConfig) -> Result<RunManifest> {
    let (mut run, pool) = open(cfg, "preprocess")?;
    guarded(&mut run, |run| {
        let inputs = ingest_stage(run, cfg)?;
        preprocess_stage(run, &inputs, &pool, true).map(drop)
    })?;
    close(run, &[])
}

pub fn cmd_featurize(cfg: &RunConfig) -> Result<RunManifest> {
    let (mut run, pool) = open(cfg, "featurize")?;
    let split = guarded(&mut run, |run| {
        let inputs = ingest_stage(run, cfg)?;
        let docs = preprocess_stage(run, &inputs, &pool, false)?;
        let split = split_stage(run, &inputs, cfg)?;
        featurize_stage(run, &inputs, &docs, &split, cfg)?;
        Ok(split)
    })?;
    close(run, &[&split.test_labels])
}

pub fn cmd_train(cfg: &RunConfig) -> Result<RunManifest> {
    let (mut run, pool) = open(cfg, "train")?;
    let split = guarded(&mut run, |run| {
        let inputs = ingest_stage(run, cfg)?;
        let docs = preprocess_stage(run, &inputs, &pool, false)?;
        let split = split_stage(run, &inputs, cfg)?;
        let (fp, x) = featurize_stage(run, &inputs, &docs, &split, cfg)?;
        train_stage(run, fp, &x, &split, cfg, &pool)?;
        Ok(split)
    })?;
    close(run, &[&split.test_labels])
}

/// Applies the tier-1 model saved by a previous `train` in the same run
/// directory to every message.
pub fn cmd_classify(cfg: &RunConfig) -> Result<RunManifest> {
    let (mut run, pool) = open(cfg, "classify")?;
    guarded(&mut run, |run| {
        let model = run.stage("load_model", |r| Tier1Model::load(r.root()))?;
        let inputs = ingest_stage(run, cfg)?;
        let docs = preprocess_stage(run, &inputs, &pool, false)?;
        classify_stage(run, &model, &inputs, &docs).map(drop)
    })?;
    close(run, &[])
}

/// Scores the saved tier-1 model on the held-out part of the configured split.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<RunManifest> {
    let (mut run, pool) = open(cfg, "evaluate")?;
    let split = guarded(&mut run, |run| {
        let model = run.stage("load_model", |r| Tier1Model::load(r.root()))?;
        let inputs = ingest_stage(run, cfg)?;
        let docs = preprocess_stage(run, &inputs, &pool, false)?;
        let split = split_stage(run, &inputs, cfg)?;
        evaluate_stage(run, &model, &inputs, &docs, &split, cfg)?;
        Ok(split)
    })?;
    close(run, &[&split.test_labels])
}

pub fn cmd_replicates(cfg: &RunConfig) -> Result<(RunManifest, Tier2Summary)> {
    let (mut run, pool) = open(cfg, "replicates")?;
    let summary = guarded(&mut run, |run| {
        let inputs = ingest_stage(run, cfg)?;
        let docs = preprocess_stage(run, &inputs, &pool, false)?;
        replicates_stage(run, &inputs, &docs, cfg, &pool)
    })?;
    Ok((close(run, &[])?, summary))
}

/// Tier-1 accuracy per T-SVD rank on the configured split. Every rank is
/// checked against the training matrix before anything is trained.
pub fn cmd_rank_sweep(cfg: &RunConfig, ranks: &[usize]) -> Result<(RunManifest, Vec<(usize, f64)>)> {
    let (mut run, pool) = open(cfg, "rank-sweep")?;
    let mut ranks = ranks.to_vec();
    ranks.sort_unstable();
    ranks.dedup();
    let (split, rows) = guarded(&mut run, |run| {
        let inputs = ingest_stage(run, cfg)?;
        let docs = preprocess_stage(run, &inputs, &pool, false)?;
        let split = split_stage(run, &inputs, cfg)?;
        let rows = run.stage("rank_sweep", |run| {
            if ranks.is_empty() {
                return Err(Error::Empty("rank list"));
            }
            let dtr = select(&docs, &split.train);
            let max = rank_bound(&dtr)?;
            if let Some(&bad) = ranks.iter().find(|&&r| r == 0 || r > max) {
                return Err(Error::RankOutOfRange { rank: bad, max });
            }
            let texts = inputs.texts(&split.train);
            let mut fits = Vec::with_capacity(ranks.len());
            for &rank in &ranks {
                let opts = FeatureOptions {
                    svd_rank: rank,
                    clamp_rank: false,
                    ..feature_options(cfg, &inputs)
                };
                let (fp, x) = FeaturePipeline::fit(&texts, &dtr, &split.train_labels, 2, &inputs.sentiment, &opts, cfg.seed)?;
                let (params, _) = choose_params(&x, &split.train_labels, cfg, derive_seed(cfg.seed, GRID_STREAM), &pool)?;
                let svm = SvmModel::train(&x, &split.train_labels, &params)?;
                fits.push(Tier1Model { features: fp, svm });
            }
            let actual = split.test_labels.reveal(EVALUATION_STAGE)?.to_vec();
            let mut rows = Vec::with_capacity(ranks.len());
            let mut csv = String::from("rank,accuracy\n");
            for (&rank, model) in ranks.iter().zip(&fits) {
                let acc = accuracy(&actual, &model.predict(&inputs, &docs, &split.test)?);
                csv.push_str(&format!("{rank},{acc}\n"));
                rows.push((rank, acc));
            }
            run.write("reports/rank_sweep.csv", csv)?;
            Ok(rows)
        })?;
        Ok((split, rows))
    })?;
    Ok((close(run, &[&split.test_labels])?, rows))
}

/// Annotates every message with its resolution outcome; points carry the
/// gold class when one exists.
pub fn cmd_geocode(cfg: &RunConfig) -> Result<(RunManifest, GeoSummary)> {
    let (mut run, pool) = open(cfg, "geocode")?;
    let summary = guarded(&mut run, |run| {
        let ctx = run.stage("load_gazetteer", |run| {
            let ctx = GeoContext::load(cfg)?;
            ctx.record_inputs(run, cfg)?;
            Ok(ctx)
        })?;
        let inputs = ingest_stage(run, cfg)?;
        let msgs: Vec<&Message> = inputs.messages().iter().collect();
        let classes: Vec<String> = msgs.iter().map(|m| gold_class(m)).collect();
        geocode_stage(run, &msgs, &classes, &ctx, cfg, &pool)
    })?;
    Ok((close(run, &[])?, summary))
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub tier1: MetricReport,
    pub tier2: Tier2Summary,
    pub geo: GeoSummary,
}

/// Tier-1 transportation detection, the tier-2 classifier comparison, then
/// geocoding of the messages predicted as transportation.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<(RunManifest, PipelineSummary)> {
    let (mut run, pool) = open(cfg, "pipeline")?;
    let mut sealed = None;
    let out = guarded(&mut run, |run| {
        let ctx = run.stage("load_gazetteer", |run| {
            let ctx = GeoContext::load(cfg)?;
            ctx.record_inputs(run, cfg)?;
            Ok(ctx)
        })?;
        let inputs = ingest_stage(run, cfg)?;
        let docs = preprocess_stage(run, &inputs, &pool, false)?;
        let split = sealed.insert(split_stage(run, &inputs, cfg)?);
        let (fp, x) = featurize_stage(run, &inputs, &docs, split, cfg)?;
        let model = train_stage(run, fp, &x, split, cfg, &pool)?;
        let tier1 = evaluate_stage(run, &model, &inputs, &docs, split, cfg)?;
        let pred = classify_stage(run, &model, &inputs, &docs)?;
        let tier2 = replicates_stage(run, &inputs, &docs, cfg, &pool)?;

        let transport = tier1_index(Tier1::Transportation);
        let picked: Vec<usize> = (0..pred.len()).filter(|&i| pred[i] == transport).collect();
        let tagger = run.stage("density_classes", |_| density_classifier(&inputs, &docs, cfg))?;
        let classes: Vec<String> = picked
            .iter()
            .map(|&i| match &tagger {
                Some(t) => t.topics[t.classify(&docs[i].relevant_tokens)].clone(),
                None => Tier1::Transportation.as_str().to_string(),
            })
            .collect();
        let msgs: Vec<&Message> = picked.iter().map(|&i| &inputs.messages()[i]).collect();
        let geo = geocode_stage(run, &msgs, &classes, &ctx, cfg, &pool)?;
        Ok(PipelineSummary { tier1, tier2, geo })
    });
    let logs: Vec<&SealedLabels> = sealed.iter().map(|s| &s.test_labels).collect();
    match out {
        Ok(summary) => Ok((close(run, &logs)?, summary)),
        Err(e) => {
            for s in logs {
                run.manifest.label_access.extend(s.access_log());
            }
            run.save_manifest()?;
            Err(e)
        }
    }
}
