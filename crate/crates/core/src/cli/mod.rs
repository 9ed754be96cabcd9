//! The `randmv` command line: simulate, fit, predict, cv and evaluate.
//!
//! Every flag can also come from a JSON file given with `--config`, whose
//! keys are the flag names (`"view"`, `"outcome-kind"`, `"M"`, ...). Flags
//! given on the command line win over the file.

pub mod ingest;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnScaling, MultiviewDataset};
use crate::error::{Error, Result};
use crate::model::{
    choose_m, cross_validate, held_out_error, load_model, save_model, select_components, CvPlan,
    FittedModel, Prediction, Search,
};
use crate::optimizer::FitConfig;
use crate::outcome::{Outcome, OutcomeMeta};
use crate::prox::{GroupStructure, Penalty, SparseGroup};
use crate::simdata::{gen_binary, gen_continuous, selection_metrics, SelectionReport, SelectionRule, SimSpec};
use ingest::{check_rows, csv_text, matrix_csv, read_groups, read_outcome, read_view, write_file, View};

/// Eigen-gap threshold for `--r auto`.
pub const RANK_THRESHOLD: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "randmv", version, about = "Randomized-kernel multiview learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic two-view data set.
    Simulate(Options),
    /// Fit a model and save it.
    Fit(Options),
    /// Predict outcomes for new views with a saved model.
    Predict(Options),
    /// Cross-validate sparse-group penalties over a rho grid.
    Cv(Options),
    /// Score a saved model on labelled data and write a metrics report.
    Evaluate(Options),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Continuous,
    Multi,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Simplex,
    Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Binary,
    Continuous,
}

/// Number of shared components: fixed, or chosen from the Gram spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(try_from = "RankRepr")]
pub enum Rank {
    Auto,
    Fixed(usize),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RankRepr {
    Number(usize),
    Text(String),
}

impl TryFrom<RankRepr> for Rank {
    type Error = String;
    fn try_from(r: RankRepr) -> std::result::Result<Self, String> {
        match r {
            RankRepr::Number(k) => Rank::from_str(&k.to_string()),
            RankRepr::Text(s) => Rank::from_str(&s),
        }
    }
}

impl FromStr for Rank {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Rank::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(Rank::Fixed(k)),
            _ => Err(format!("expected 'auto' or a positive integer, got '{s}'")),
        }
    }
}

/// Comma-separated `ρ` values for one view.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct RhoList(pub Vec<f64>);

impl FromStr for RhoList {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad rho value '{t}'")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(RhoList)
    }
}

/// Flags shared by all subcommands; each subcommand reads the ones it needs.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// JSON file with default values for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// View CSV (repeat once per view, in order).
    #[arg(long)]
    pub view: Vec<PathBuf>,
    /// Outcome CSV.
    #[arg(long)]
    pub outcome: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub outcome_kind: Option<OutcomeKind>,
    /// Group file for one view as `<view_index>:<path>`, view indices from 1.
    #[arg(long)]
    pub groups: Vec<String>,
    /// Random features per view (default chosen from n).
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// Shared components: `auto` or a positive integer.
    #[arg(long)]
    pub r: Option<Rank>,
    /// Ridge penalty on the loadings.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Penalty level per view, repeated once per view or given once for
    /// all; `cv` takes comma-separated grids.
    #[arg(long)]
    pub rho: Vec<RhoList>,
    /// Lasso share of the sparse-group penalty.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyKind>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// `grid` or `random:<k>`.
    #[arg(long)]
    pub search: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write (fit, cv) or read (predict, evaluate).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output file, or output directory for `simulate`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub max_outer_iter: Option<usize>,
    /// Proximal-gradient iterations per variable-scaling update.
    #[arg(long)]
    pub fista_iter: Option<usize>,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioKind>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Variables per simulated view.
    #[arg(long)]
    pub p: Option<usize>,
    /// JSON file listing the signal variable names of each view.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Add wall-clock time to the metrics report.
    #[arg(long)]
    pub report_timing: bool,
}

impl Options {
    /// Fills unset flags from `--config`.
    pub fn resolve(self) -> Result<Self> {
        let Some(path) = &self.config else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Options = serde_json::from_str(&text)?;
        Ok(self.over(file))
    }

    fn over(self, file: Options) -> Self {
        fn vec<T>(a: Vec<T>, b: Vec<T>) -> Vec<T> {
            if a.is_empty() {
                b
            } else {
                a
            }
        }
        Options {
            config: self.config,
            view: vec(self.view, file.view),
            outcome: self.outcome.or(file.outcome),
            outcome_kind: self.outcome_kind.or(file.outcome_kind),
            groups: vec(self.groups, file.groups),
            m: self.m.or(file.m),
            r: self.r.or(file.r),
            lambda: self.lambda.or(file.lambda),
            rho: vec(self.rho, file.rho),
            eta: self.eta.or(file.eta),
            penalty: self.penalty.or(file.penalty),
            folds: self.folds.or(file.folds),
            search: self.search.or(file.search),
            seed: self.seed.or(file.seed),
            model: self.model.or(file.model),
            out: self.out.or(file.out),
            no_standardize: self.no_standardize || file.no_standardize,
            max_outer_iter: self.max_outer_iter.or(file.max_outer_iter),
            fista_iter: self.fista_iter.or(file.fista_iter),
            scenario: self.scenario.or(file.scenario),
            n1: self.n1.or(file.n1),
            n2: self.n2.or(file.n2),
            n: self.n.or(file.n),
            p: self.p.or(file.p),
            truth: self.truth.or(file.truth),
            report_timing: self.report_timing || file.report_timing,
        }
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn standardize(&self) -> bool {
        !self.no_standardize
    }
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig(format!("--{flag} is required")))
}

/// Training inputs read from disk.
pub struct Inputs {
    pub data: MultiviewDataset,
    pub views: Vec<View>,
    pub class_names: Vec<String>,
}

fn read_views(paths: &[PathBuf], min: usize) -> Result<Vec<View>> {
    if paths.len() < min {
        return Err(Error::InvalidConfig(format!("at least {min} --view files are required")));
    }
    for (i, a) in paths.iter().enumerate() {
        if paths[..i].contains(a) {
            return Err(Error::InvalidConfig(format!("view {} is given twice", a.display())));
        }
    }
    let views = paths.iter().map(|p| read_view(p)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<(&Path, usize)> = views.iter().map(|v| (v.path.as_path(), v.x.nrows())).collect();
    check_rows(&rows)?;
    Ok(views)
}

/// Parses `--groups <view_index>:<path>` entries into per-view groups.
fn read_all_groups(specs: &[String], views: &[View]) -> Result<Vec<Option<GroupStructure>>> {
    let mut groups = vec![None; views.len()];
    for spec in specs {
        let bad = || Error::InvalidConfig(format!("--groups expects <view_index>:<path>, got '{spec}'"));
        let (index, path) = spec.split_once(':').ok_or_else(bad)?;
        let d: usize = index.parse().map_err(|_| bad())?;
        if d == 0 || d > views.len() {
            return Err(Error::InvalidConfig(format!(
                "--groups view index {d} outside 1..={}",
                views.len()
            )));
        }
        if groups[d - 1].is_some() {
            return Err(Error::InvalidConfig(format!("view {d} has two group files")));
        }
        groups[d - 1] = Some(read_groups(Path::new(path), &views[d - 1].names)?);
    }
    Ok(groups)
}

pub fn read_inputs(o: &Options) -> Result<Inputs> {
    let views = read_views(&o.view, 2)?;
    let outcome_path = required(&o.outcome, "outcome")?;
    let kind = *required(&o.outcome_kind, "outcome-kind")?;
    let (outcome, class_names) = read_outcome(outcome_path, kind, None)?;
    check_rows(&[(views[0].path.as_path(), views[0].x.nrows()), (outcome_path, outcome.len())])?;
    let groups = read_all_groups(&o.groups, &views)?;
    let data = MultiviewDataset::with_groups(views.iter().map(|v| v.x.clone()).collect(), outcome, groups)?;
    Ok(Inputs {
        data,
        views,
        class_names,
    })
}

/// One value per view from flags given once per view or once for all.
fn per_view<T: Clone>(values: &[T], n_views: usize, flag: &str) -> Result<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0].clone(); n_views]),
        k if k == n_views => Ok(values.to_vec()),
        k => Err(Error::InvalidConfig(format!(
            "--{flag} given {k} times for {n_views} views"
        ))),
    }
}

fn groups_or_singletons(data: &MultiviewDataset, d: usize) -> Result<GroupStructure> {
    match &data.groups[d] {
        Some(g) => Ok(g.clone()),
        None => GroupStructure::from_labels(&(0..data.views[d].ncols()).collect::<Vec<_>>()),
    }
}

fn penalties(o: &Options, data: &MultiviewDataset) -> Result<Vec<Penalty>> {
    let kind = o.penalty.unwrap_or(if o.rho.is_empty() {
        PenaltyKind::Simplex
    } else {
        PenaltyKind::Group
    });
    match kind {
        PenaltyKind::Simplex => Ok(Vec::new()),
        PenaltyKind::Group => {
            if o.rho.is_empty() {
                return Err(Error::InvalidConfig("--penalty group needs --rho".into()));
            }
            let rho = per_view(&o.rho, data.n_views(), "rho")?;
            rho.iter()
                .enumerate()
                .map(|(d, list)| match list.0.as_slice() {
                    [r] => Ok(Penalty::SparseGroup(SparseGroup::new(
                        *r,
                        o.eta.unwrap_or(0.5),
                        groups_or_singletons(data, d)?,
                    )?)),
                    _ => Err(Error::InvalidConfig(format!("--rho for view {} must be one value", d + 1))),
                })
                .collect()
        }
    }
}

/// Fit configuration from flags, with `M` and `r` chosen from the data
/// when not given.
pub fn fit_config(o: &Options, data: &MultiviewDataset, penalties: Vec<Penalty>) -> Result<FitConfig> {
    let mut config = FitConfig {
        n_features: o.m.unwrap_or_else(|| choose_m(data.n_samples())),
        lambda: vec![o.lambda.unwrap_or(1.0)],
        seed: o.seed(),
        penalties,
        ..FitConfig::default()
    };
    if let Some(k) = o.max_outer_iter {
        config.max_outer_iter = k;
    }
    if let Some(k) = o.fista_iter {
        config.fista.max_iter = k;
    }
    config.n_components = match o.r.unwrap_or(Rank::Auto) {
        Rank::Fixed(k) => k,
        Rank::Auto => {
            let views: Vec<DMatrix<f64>> = if o.standardize() {
                data.views
                    .iter()
                    .map(|x| ColumnScaling::fit(x).apply(x))
                    .collect::<Result<_>>()?
            } else {
                data.views.clone()
            };
            select_components(&views, RANK_THRESHOLD, o.seed())?
        }
    };
    Ok(config)
}

fn fit_model(o: &Options, data: &MultiviewDataset, config: &FitConfig, class_names: Vec<String>) -> Result<FittedModel> {
    let model = if o.standardize() {
        FittedModel::fit_standardized(data, config)?
    } else {
        FittedModel::fit(data, config)?
    };
    Ok(model.with_class_names(class_names))
}

pub fn run_fit(o: &Options) -> Result<()> {
    let model_path = required(&o.model, "model")?;
    let inputs = read_inputs(o)?;
    let config = fit_config(o, &inputs.data, penalties(o, &inputs.data)?)?;
    let model = fit_model(o, &inputs.data, &config, inputs.class_names)?;
    save_model(&model, model_path)
}

fn read_target_views(o: &Options, model: &FittedModel) -> Result<Vec<View>> {
    let views = read_views(&o.view, 1)?;
    if views.len() != model.n_views() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} views, {} --view files given",
            model.n_views(),
            views.len()
        )));
    }
    Ok(views)
}

fn class_name(model: &FittedModel, label: usize) -> String {
    model
        .class_names
        .get(label)
        .cloned()
        .unwrap_or_else(|| (label + 1).to_string())
}

pub fn run_predict(o: &Options) -> Result<()> {
    let out = required(&o.out, "out")?;
    let model = load_model(required(&o.model, "model")?)?;
    let views = read_target_views(o, &model)?;
    let x: Vec<DMatrix<f64>> = views.into_iter().map(|v| v.x).collect();
    let text = match model.predict(&x)? {
        Prediction::Continuous(y) => matrix_csv(&["prediction".to_string()], &DMatrix::from_column_slice(y.len(), 1, y.as_slice()))?,
        Prediction::MultiContinuous(y) => {
            let header: Vec<String> = (1..=y.ncols()).map(|j| format!("prediction_{j}")).collect();
            matrix_csv(&header, &y)?
        }
        Prediction::Classes(c) => csv_text(
            &["class".to_string()],
            c.iter().map(|&l| vec![class_name(&model, l)]),
        )?,
    };
    write_file(out, &text)
}

fn parse_search(s: Option<&str>) -> Result<Search> {
    match s {
        None | Some("grid") => Ok(Search::Grid),
        Some(s) => s
            .strip_prefix("random:")
            .and_then(|k| k.parse().ok())
            .map(Search::Random)
            .ok_or_else(|| Error::InvalidConfig(format!("--search expects grid or random:<k>, got '{s}'"))),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn run_cv(o: &Options) -> Result<()> {
    let out = required(&o.out, "out")?;
    let inputs = read_inputs(o)?;
    let data = &inputs.data;
    if o.rho.is_empty() {
        return Err(Error::InvalidConfig("--rho grid is required for cv".into()));
    }
    let plan = CvPlan {
        rho_grid: per_view(&o.rho, data.n_views(), "rho")?.into_iter().map(|l| l.0).collect(),
        eta: o.eta.unwrap_or(0.5),
        folds: o.folds.unwrap_or(3),
        search: parse_search(o.search.as_deref())?,
        seed: o.seed(),
        standardize: o.standardize(),
    };
    let config = fit_config(o, data, Vec::new())?;
    let result = cross_validate(data, &plan, &config)?;

    let mut header: Vec<String> = (1..=data.n_views()).map(|d| format!("rho_{d}")).collect();
    header.extend((1..=plan.folds).map(|f| format!("fold_{f}")));
    header.extend(["score".to_string(), "error".to_string()]);
    let rows = result.table.iter().map(|row| {
        let mut r: Vec<String> = row.rho.iter().map(|v| format!("{v}")).collect();
        r.extend(row.fold_scores.iter().map(|s| cell(*s)));
        r.push(cell(row.score));
        r.push(row.error.clone().unwrap_or_default());
        r
    });
    write_file(out, &csv_text(&header, rows)?)?;

    if let Some(path) = &o.model {
        let best = result
            .best
            .iter()
            .enumerate()
            .map(|(d, &rho)| Ok(Penalty::SparseGroup(SparseGroup::new(rho, plan.eta, groups_or_singletons(data, d)?)?)))
            .collect::<Result<Vec<_>>>()?;
        let config = FitConfig {
            penalties: best,
            ..config
        };
        save_model(&fit_model(o, data, &config, inputs.class_names)?, path)?;
    }
    println!(
        "{}",
        serde_json::json!({ "best_rho": result.best, "best_score": result.best_score })
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Truth {
    /// Signal variable names, one list per view.
    pub signal: Vec<Vec<String>>,
}

pub fn run_simulate(o: &Options) -> Result<()> {
    let dir = required(&o.out, "out")?;
    let p = o.p.unwrap_or(50);
    let spec = match o.scenario.unwrap_or(ScenarioKind::Binary) {
        ScenarioKind::Binary => SimSpec::binary(o.n1.unwrap_or(500), o.n2.unwrap_or(200), p, o.seed()),
        ScenarioKind::Continuous => SimSpec::continuous(o.n.unwrap_or(500), p, o.seed()),
    };
    let data = match spec.scenario {
        crate::simdata::Scenario::Binary { .. } => gen_binary(&spec)?,
        crate::simdata::Scenario::Continuous { .. } => gen_continuous(&spec)?,
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    let signal = spec.signal_set();
    for (d, x) in data.views.iter().enumerate() {
        write_file(&dir.join(format!("view{}.csv", d + 1)), &matrix_csv(&names, x)?)?;
        let rows = names.iter().enumerate().map(|(j, name)| {
            let g = if signal.contains(&j) { "signal" } else { "noise" };
            vec![name.clone(), g.to_string()]
        });
        let header = ["variable".to_string(), "group".to_string()];
        write_file(&dir.join(format!("groups{}.csv", d + 1)), &csv_text(&header, rows)?)?;
    }
    let outcome = match &data.outcome {
        Outcome::Continuous(y) => matrix_csv(&["y".to_string()], &DMatrix::from_column_slice(y.len(), 1, y.as_slice()))?,
        Outcome::Categorical(c) => csv_text(
            &["class".to_string()],
            c.labels().iter().map(|l| vec![(l + 1).to_string()]),
        )?,
        Outcome::MultiContinuous(y) => matrix_csv(&["y".to_string()], y)?,
    };
    write_file(&dir.join("outcome.csv"), &outcome)?;
    let truth = Truth {
        signal: vec![signal.iter().map(|&j| names[j].clone()).collect(); data.n_views()],
    };
    let mut text = serde_json::to_string_pretty(&truth)?;
    text.push('\n');
    write_file(&dir.join("truth.json"), text.as_bytes())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewReport {
    pub n_variables: usize,
    pub n_selected: usize,
    pub selected: Vec<String>,
    /// Present when the signal variables are known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_test: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification_error: Option<f64>,
    pub views: Vec<ViewReport>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

fn model_outcome_kind(model: &FittedModel) -> OutcomeKind {
    match &model.state.outcome {
        OutcomeMeta::Continuous { multi: false, .. } => OutcomeKind::Continuous,
        OutcomeMeta::Continuous { multi: true, .. } => OutcomeKind::Multi,
        OutcomeMeta::Categorical { .. } => OutcomeKind::Categorical,
    }
}

pub fn evaluate(o: &Options) -> Result<MetricsReport> {
    let started = Instant::now();
    let model = load_model(required(&o.model, "model")?)?;
    let views = read_target_views(o, &model)?;
    let outcome_path = required(&o.outcome, "outcome")?;
    let kind = o.outcome_kind.unwrap_or_else(|| model_outcome_kind(&model));
    let known = (kind == OutcomeKind::Categorical && !model.class_names.is_empty()).then_some(model.class_names.as_slice());
    let (outcome, _) = read_outcome(outcome_path, kind, known)?;
    check_rows(&[(views[0].path.as_path(), views[0].x.nrows()), (outcome_path, outcome.len())])?;
    let truth: Option<Truth> = match &o.truth {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Some(serde_json::from_str(&text)?)
        }
        None => None,
    };
    if let Some(t) = &truth {
        if t.signal.len() != views.len() {
            return Err(Error::DimensionMismatch(format!(
                "truth lists {} views, model has {}",
                t.signal.len(),
                views.len()
            )));
        }
    }

    let x: Vec<DMatrix<f64>> = views.iter().map(|v| v.x.clone()).collect();
    let score = held_out_error(&outcome, &model.predict(&x)?)?;
    let mut view_reports = Vec::with_capacity(views.len());
    for (d, (view, gamma)) in views.iter().zip(model.gammas()).enumerate() {
        let rule = model
            .config
            .penalties
            .get(d)
            .map_or(SelectionRule::AboveUniform, SelectionRule::for_penalty);
        let signal: Vec<usize> = match &truth {
            Some(t) => t.signal[d]
                .iter()
                .map(|name| {
                    view.names.iter().position(|n| n == name).ok_or_else(|| {
                        Error::InvalidConfig(format!("truth names unknown variable '{name}' in view {}", d + 1))
                    })
                })
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let report = selection_metrics(gamma, &signal, rule)?;
        view_reports.push(ViewReport {
            n_variables: gamma.len(),
            n_selected: report.selected.len(),
            selected: report.selected.iter().map(|&j| view.names[j].clone()).collect(),
            selection: truth.is_some().then_some(report),
        });
    }
    let classification = kind == OutcomeKind::Categorical;
    Ok(MetricsReport {
        n_test: outcome.len(),
        mse: (!classification).then_some(score),
        classification_error: classification.then_some(score),
        views: view_reports,
        objective_trace: model.state.objective_trace.clone(),
        converged: model.state.converged,
        wall_time_seconds: o.report_timing.then(|| started.elapsed().as_secs_f64()),
    })
}

pub fn run_evaluate(o: &Options) -> Result<()> {
    let report = evaluate(o)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match &o.out {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(o) => run_simulate(&o.resolve()?),
        Command::Fit(o) => run_fit(&o.resolve()?),
        Command::Predict(o) => run_predict(&o.resolve()?),
        Command::Cv(o) => run_cv(&o.resolve()?),
        Command::Evaluate(o) => run_evaluate(&o.resolve()?),
    }
}

/// One-line JSON error record.
pub fn error_line(kind: &str, message: &str) -> String {
    let message = message.split_whitespace().collect::<Vec<_>>().join(" ");
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("{}", error_line("UsageError", &e.to_string()));
            return 2;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"view": ["a.csv", "b.csv"], "M": 50, "r": "auto", "seed": 3, "rho": [[0.1, 0.2]]}"#).unwrap();
        let cli = Cli::try_parse_from(["randmv", "fit", "--config", path.to_str().unwrap(), "--seed", "9", "--r", "4"]).unwrap();
        let Command::Fit(o) = cli.command else { panic!() };
        let o = o.resolve().unwrap();
        assert_eq!(o.view, [PathBuf::from("a.csv"), PathBuf::from("b.csv")]);
        assert_eq!((o.m, o.seed, o.r), (Some(50), Some(9), Some(Rank::Fixed(4))));
        assert_eq!(o.rho, [RhoList(vec![0.1, 0.2])]);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(serde_json::from_str::<Options>(r#"{"views": []}"#).is_err());
        assert!(serde_json::from_str::<Options>(r#"{"r": 0}"#).is_err());
        assert_eq!(serde_json::from_str::<Options>(r#"{"r": 3}"#).unwrap().r, Some(Rank::Fixed(3)));
    }

    #[test]
    fn search_and_rho_parsing() {
        assert_eq!(parse_search(None).unwrap(), Search::Grid);
        assert_eq!(parse_search(Some("random:4")).unwrap(), Search::Random(4));
        assert!(parse_search(Some("random")).is_err());
        assert_eq!("0.1, 1e-3".parse::<RhoList>().unwrap(), RhoList(vec![0.1, 1e-3]));
        assert!("x".parse::<RhoList>().is_err());
    }

    #[test]
    fn error_lines_are_single_line_json() {
        let line = error_line("ParseError", "bad\ncell\n  here");
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["error"]["kind"], "ParseError");
        assert_eq!(v["error"]["message"], "bad cell here");
    }
}
