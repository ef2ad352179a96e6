use std::collections::HashSet;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use graphfolk::graph::{prune_by_in_degree_with_keep, Delimiter};
use graphfolk::predict::{
    concat_features, default_grid, nested_cv_views, FoldPlan, LearnerKind, Labels, Targets, NUM_CLASSES,
};
use graphfolk::sgns::train;
use graphfolk::synth::{generate_sbm, proportional_sizes, spaced_incomes, OCCUPATION_COUNTS};
use graphfolk::walks::generate_corpus;
use graphfolk::{EdgeList, EvalReport, FeatureMatrix, Graph, LabeledDataset, SbmSpec, Task, WalkCorpus};
use log::{info, warn};
use ndarray::Array2;
use serde::Deserialize;

use crate::args::{EvalArgs, GraphArgs, TaskArg, TaskSel, TrainArgs, WalkArgs};
use crate::config::Settings;
use crate::output::{write_one, Staged};
use crate::report::{write_jsonl, write_table};
use crate::InputError;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_edges(path: &Path, delim: Delimiter) -> Result<EdgeList> {
    EdgeList::parse(&read_text(path)?, delim).with_context(|| format!("parsing {}", path.display()))
}

fn read_labels(path: &Path) -> Result<Labels> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Labels::read_from(file).with_context(|| format!("parsing {}", path.display()))
}

fn read_features(path: &Path) -> Result<FeatureMatrix> {
    FeatureMatrix::parse(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// One id per line; blank lines and `#` comments are skipped.
fn read_keep(path: Option<&Path>) -> Result<HashSet<String>> {
    let Some(path) = path else { return Ok(HashSet::new()) };
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

pub fn prune(settings: &Settings, input: &Path, out: &Path, graph: &GraphArgs) -> Result<()> {
    let delim = settings.delimiter(graph)?;
    let edges = read_edges(input, delim)?;
    let keep = read_keep(graph.keep.as_deref())?;
    let min_in = settings.min_in_degree(graph);
    let pruned = prune_by_in_degree_with_keep(&edges, min_in, &keep);
    info!("kept {} of {} edges (min in-degree {min_in})", pruned.len(), edges.len());
    write_one(out, |w| Ok(pruned.write_to(w, delim)?))
}

pub fn walk(settings: &Settings, edges: &Path, out: &Path, graph: &GraphArgs, walk: &WalkArgs) -> Result<()> {
    let delim = settings.delimiter(graph)?;
    let cfg = settings.walk(walk)?;
    let g = Graph::build_undirected(&read_edges(edges, delim)?)?;
    let corpus = generate_corpus(&g, &cfg);
    info!("{} walks over {} vertices", corpus.walks.len(), g.num_vertices());
    write_one(out, |w| Ok(corpus.write_to(w)?))
}

pub fn train_cmd(settings: &Settings, corpus: &Path, out: &Path, args: &TrainArgs) -> Result<()> {
    let cfg = settings.sgns(args)?;
    let corpus =
        WalkCorpus::parse(&read_text(corpus)?).with_context(|| format!("parsing {}", corpus.display()))?;
    let features = embed(&corpus, &cfg)?;
    write_one(out, |w| Ok(features.write_to(w)?))
}

fn embed(corpus: &WalkCorpus, cfg: &graphfolk::SgnsConfig) -> Result<FeatureMatrix> {
    let outcome = train(corpus, cfg)?;
    for (e, loss) in outcome.epoch_losses.iter().enumerate() {
        info!("dim {} epoch {}: mean pair loss {loss:.5}", cfg.dim, e + 1);
    }
    Ok(outcome.model.to_features())
}

fn task_of(t: TaskArg) -> (Task, &'static str) {
    match t {
        TaskArg::Occ => (Task::Classification, "occ"),
        TaskArg::Income => (Task::Regression, "income"),
    }
}

type NamedView = (String, Array2<f64>);

/// Candidate feature views for one task: every embedding, each optionally
/// concatenated with the extra features, restricted to users that carry the
/// task's label and have an embedding.
fn task_views(
    embeddings: &[(String, FeatureMatrix)],
    extra: Option<&FeatureMatrix>,
    labels: &Labels,
    task: Task,
) -> Result<(Vec<NamedView>, Targets)> {
    let mut views = Vec::new();
    let mut targets: Option<(Vec<String>, Targets)> = None;
    for (name, emb) in embeddings {
        let (ds, dropped) = LabeledDataset::join(emb, labels);
        if !dropped.is_empty() && targets.is_none() {
            warn!("{} labelled users have no embedding and are left out", dropped.len());
        }
        let td = ds.task_data(task);
        let x = match extra {
            Some(extra) => {
                let base = FeatureMatrix::new(td.ids.clone(), td.x)?;
                let joined = concat_features(&base, &extra.select(&td.ids)?)?;
                joined.values().clone()
            }
            None => td.x,
        };
        let name = if extra.is_some() { format!("{name}+extra") } else { name.clone() };
        match &targets {
            Some((ids, _)) if *ids != td.ids => bail!("embeddings {name} cover different users"),
            Some(_) => {}
            None => targets = Some((td.ids, td.y)),
        }
        views.push((name, x));
    }
    let (_, y) = targets.expect("at least one embedding");
    Ok((views, y))
}

fn learner_kind(settings: &Settings, args: &EvalArgs, task: Task) -> Result<LearnerKind> {
    let kind = settings.learner(args)?;
    match (task, kind) {
        (Task::Classification, None | Some(LearnerKind::Logistic)) => Ok(LearnerKind::Logistic),
        (Task::Regression, None) => Ok(LearnerKind::Ridge),
        (Task::Regression, Some(k @ (LearnerKind::Ridge | LearnerKind::KernelRidge))) => Ok(k),
        (t, Some(k)) => bail!(InputError(format!("learner {k:?} does not fit the {t:?} task"))),
    }
}

fn evaluate(
    settings: &Settings,
    embeddings: &[(String, FeatureMatrix)],
    extra: Option<&FeatureMatrix>,
    labels: &Labels,
    task: Task,
    args: &EvalArgs,
) -> Result<EvalReport> {
    let kind = learner_kind(settings, args, task)?;
    let (views, y) = task_views(embeddings, extra, labels, task)?;
    let (outer, inner) = settings.folds(args);
    let plan = FoldPlan::for_targets(&y, outer, inner, settings.stage_seed("cv"))?;
    let dim = views[0].1.ncols();
    let grid = default_grid(kind, dim);
    info!("{task:?}: {} users, {} views x {} grid points, {outer}x{inner} folds", y.len(), views.len(), grid.len());
    let view_refs: Vec<(&str, _)> = views.iter().map(|(n, x)| (n.as_str(), x.view())).collect();
    let report = nested_cv_views(&view_refs, &y, &grid, &plan)?;
    match task {
        Task::Classification => info!(
            "accuracy {:.2} (majority baseline {:.2})",
            report.aggregate.pooled_accuracy.unwrap_or(f64::NAN),
            report.aggregate.majority_baseline.unwrap_or(f64::NAN)
        ),
        Task::Regression => info!(
            "mae {:.1} rho {:.3} (mean-predictor mae {:.1})",
            report.aggregate.mae.unwrap_or(f64::NAN),
            report.aggregate.rho.unwrap_or(f64::NAN),
            report.aggregate.mean_baseline_mae.unwrap_or(f64::NAN)
        ),
    }
    Ok(report)
}

fn stage_report(staged: &mut Staged, dir: &Path, name: &str, report: &EvalReport) -> Result<()> {
    staged.add(dir.join(format!("{name}_report.txt")), |w| write_table(report, w))?;
    staged.add(dir.join(format!("{name}_report.jsonl")), |w| write_jsonl(report, w))
}

pub fn eval(
    settings: &Settings,
    embeddings: &Path,
    labels: &Path,
    task: TaskArg,
    out: &Path,
    args: &EvalArgs,
) -> Result<()> {
    let emb = read_features(embeddings)?;
    let labels = read_labels(labels)?;
    let extra = args.extra_features.as_deref().map(read_features).transpose()?;
    let (task, name) = task_of(task);
    let report = evaluate(settings, &[("embedding".into(), emb)], extra.as_ref(), &labels, task, args)?;
    let mut staged = Staged::new();
    stage_report(&mut staged, out, name, &report)?;
    staged.commit()
}

/// Block-model description for `synth`. Without `block-sizes`, `total` users
/// are split over the nine occupational classes in their observed proportions.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SynthFile {
    pub total: Option<usize>,
    pub block_sizes: Option<Vec<usize>>,
    pub classes: Option<Vec<u8>>,
    pub p_in: f64,
    pub p_out: f64,
    pub income_means: Option<Vec<f64>>,
    pub income_low: Option<f64>,
    pub income_high: Option<f64>,
    pub income_stddev: Option<f64>,
    pub seed: Option<u64>,
}

impl SynthFile {
    pub fn load(path: &Path) -> Result<Self> {
        toml::from_str(&read_text(path)?).map_err(|e| InputError(format!("synth spec {}: {e}", path.display())).into())
    }

    pub fn to_spec(&self, default_seed: u64) -> Result<SbmSpec> {
        let sizes = match (&self.block_sizes, self.total) {
            (Some(_), Some(_)) => bail!(InputError("give either total or block-sizes, not both".into())),
            (Some(s), None) => s.clone(),
            (None, total) => proportional_sizes(total.unwrap_or(900), &OCCUPATION_COUNTS),
        };
        let k = sizes.len();
        let classes = match &self.classes {
            Some(c) => c.clone(),
            None if k <= NUM_CLASSES => (1..=k as u8).collect(),
            None => bail!(InputError(format!("{k} blocks need an explicit classes list"))),
        };
        let sd = self.income_stddev.unwrap_or(3000.0);
        let incomes = match &self.income_means {
            Some(m) => m.iter().map(|&mean| (mean, sd)).collect(),
            None => spaced_incomes(k, self.income_low.unwrap_or(15_000.0), self.income_high.unwrap_or(80_000.0), sd),
        };
        let spec = SbmSpec {
            block_sizes: sizes,
            p_in: self.p_in,
            p_out: self.p_out,
            class_of_block: classes,
            income_of_block: incomes,
            seed: self.seed.unwrap_or(default_seed),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn stage_synth(settings: &Settings, spec: &Path, dir: &Path, staged: &mut Staged) -> Result<(EdgeList, Labels)> {
    let spec = SynthFile::load(spec)?.to_spec(settings.stage_seed("synth"))?;
    let sbm = generate_sbm(&spec)?;
    info!("block model: {} users, {} edges", spec.num_vertices(), sbm.edges.len());
    staged.add(dir.join("edges.txt"), |w| Ok(sbm.edges.write_to(w, Delimiter::Whitespace)?))?;
    staged.add(dir.join("labels.csv"), |w| Ok(sbm.labels.write_to(w)?))?;
    Ok((sbm.edges, sbm.labels))
}

pub fn synth(settings: &Settings, spec: &Path, out_dir: &Path) -> Result<()> {
    let mut staged = Staged::new();
    stage_synth(settings, spec, out_dir, &mut staged)?;
    staged.commit()
}

pub struct PipelineInputs<'a> {
    pub synth: Option<&'a Path>,
    pub edges: Option<&'a Path>,
    pub labels: Option<&'a Path>,
    pub task: TaskSel,
    pub dims: &'a Option<Vec<usize>>,
}

/// prune, walk, train (once per dimension) and eval. Every labelled user is
/// exempt from pruning. Nothing is written unless all stages succeed.
pub fn pipeline(
    settings: &Settings,
    out_dir: &Path,
    inputs: PipelineInputs<'_>,
    graph: &GraphArgs,
    walk: &WalkArgs,
    train_args: &TrainArgs,
    eval_args: &EvalArgs,
) -> Result<()> {
    let delim = settings.delimiter(graph)?;
    let walk_cfg = settings.walk(walk)?;
    let sgns_cfg = settings.sgns(train_args)?;
    let dims = settings.dims(inputs.dims, train_args)?;
    let extra = eval_args.extra_features.as_deref().map(read_features).transpose()?;
    let mut staged = Staged::new();

    let (edges, labels) = match (inputs.synth, inputs.edges, inputs.labels) {
        (Some(spec), _, _) => stage_synth(settings, spec, out_dir, &mut staged)?,
        (None, Some(e), Some(l)) => (read_edges(e, delim)?, read_labels(l)?),
        _ => bail!(InputError("pipeline needs --synth or both --edges and --labels".into())),
    };

    let mut keep = read_keep(graph.keep.as_deref())?;
    keep.extend(labels.ids());
    let min_in = settings.min_in_degree(graph);
    let pruned = prune_by_in_degree_with_keep(&edges, min_in, &keep);
    info!("pruning kept {} of {} edges", pruned.len(), edges.len());
    staged.add(out_dir.join("edges.pruned.txt"), |w| Ok(pruned.write_to(w, delim)?))?;

    let g = Graph::build_undirected(&pruned)?;
    let corpus = generate_corpus(&g, &walk_cfg);
    info!("{} walks over {} vertices", corpus.walks.len(), g.num_vertices());
    staged.add(out_dir.join("corpus.txt"), |w| Ok(corpus.write_to(w)?))?;

    let mut embeddings = Vec::new();
    for &dim in &dims {
        let cfg = graphfolk::SgnsConfig { dim, ..sgns_cfg.clone() };
        let features = embed(&corpus, &cfg)?;
        let file = if dims.len() == 1 { "embeddings.txt".to_string() } else { format!("embeddings.d{dim}.txt") };
        staged.add(out_dir.join(file), |w| Ok(features.write_to(w)?))?;
        embeddings.push((format!("d{dim}"), features));
    }

    for t in inputs.task.tasks() {
        let (task, name) = task_of(t);
        let has_label = labels.rows.iter().any(|r| match task {
            Task::Classification => r.occ_class.is_some(),
            Task::Regression => r.income.is_some(),
        });
        if !has_label && inputs.task == TaskSel::Both {
            warn!("no {name} labels; skipping that task");
            continue;
        }
        let report = evaluate(settings, &embeddings, extra.as_ref(), &labels, task, eval_args)?;
        stage_report(&mut staged, out_dir, name, &report)?;
    }
    staged.commit()
}
