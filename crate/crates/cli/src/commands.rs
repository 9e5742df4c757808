use std::path::{Path, PathBuf};

use chipower::diagnostics::{self, CoherenceReport};
use chipower::io::{format_float, load_matrix, BinaryResponse, LoadOptions};
use chipower::spectral::{self, SpectralResult};
use chipower::supervised::{self, LogisticModel};
use chipower::synth::{self, ResponseConfig, SynthConfig};
use chipower::transforms::{self, TransformedMatrix};
use chipower::{
    CodaError, CompositionMatrix, DistanceMatrix, Result, SizeBasis, SubcompositionPlan,
    ZeroStrategy,
};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::args::*;
use crate::{json_error, Artifact};

pub(crate) struct Outcome {
    pub result: Value,
    pub out_dir: Option<PathBuf>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    fn new(result: Value, output: Option<&OutputArgs>) -> Self {
        Outcome {
            result,
            out_dir: output.and_then(|o| o.out_dir.clone()),
            artifacts: Vec::new(),
        }
    }

    fn with(mut self, artifact: Artifact) -> Self {
        self.artifacts.push(artifact);
        self
    }
}

pub(crate) fn dispatch(command: &Command) -> Result<Outcome> {
    match command {
        Command::Transform(a) => transform(a),
        Command::Pca(a) => pca(a),
        Command::Ca(a) => ca(a),
        Command::Lra(a) => lra(a),
        Command::Distances(a) => distances(a),
        Command::Compare(a) => compare(a),
        Command::Isometry(a) => isometry(a),
        Command::Coherence(a) => coherence(a),
        Command::Zeros(ZerosCommand::Inject(a)) => zeros_inject(a),
        Command::Zeros(ZerosCommand::Apply(a)) => zeros_apply(a),
        Command::Zeros(ZerosCommand::Report(a)) => zeros_report(a),
        Command::Fit(a) => fit(a),
        Command::Cv(a) => cv(a),
        Command::Tune(a) => tune(a),
        Command::Stability(a) => stability(a),
        Command::Effect(a) => effect(a),
        Command::Synth(a) => synth_data(a),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Value> {
    serde_json::to_value(value).map_err(json_error)
}

fn usage(message: impl Into<String>) -> CodaError {
    CodaError::InvalidArgument(message.into())
}

fn load(
    input: &InputArgs,
    response: Option<&str>,
) -> Result<(CompositionMatrix, Option<BinaryResponse>)> {
    load_labelled(input, response, None)
}

fn load_labelled(
    input: &InputArgs,
    response: Option<&str>,
    positive: Option<&str>,
) -> Result<(CompositionMatrix, Option<BinaryResponse>)> {
    let strategy: ZeroStrategy = input.zeros.parse()?;
    let (m, y) = load_matrix(
        &input.input,
        &LoadOptions {
            has_row_labels: input.row_labels,
            response_column: response.or(input.ignore.as_deref()).map(str::to_string),
            positive_class: positive.map(str::to_string),
        },
    )?;
    Ok((m.apply_zero_strategy(strategy), y))
}

fn load_with_response(
    input: &InputArgs,
    response: &ResponseArgs,
) -> Result<(CompositionMatrix, BinaryResponse)> {
    if input.ignore.is_some() {
        return Err(usage("--ignore cannot be combined with --response"));
    }
    let name = response.response.as_str();
    let (m, y) = load_labelled(input, Some(name), response.positive.as_deref())?;
    Ok((
        m,
        y.ok_or_else(|| CodaError::MissingResponseColumn(name.to_string()))?,
    ))
}

fn rows_of(values: &DMatrix<f64>) -> Vec<Vec<f64>> {
    values
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

fn labelled_table(
    name: &str,
    corner: &str,
    rows: &[String],
    cols: &[String],
    values: &DMatrix<f64>,
) -> Artifact {
    let mut header = vec![corner.to_string()];
    header.extend(cols.iter().cloned());
    let body = rows
        .iter()
        .enumerate()
        .map(|(i, label)| {
            std::iter::once(label.clone())
                .chain(values.row(i).iter().map(|v| format_float(*v)))
                .collect()
        })
        .collect();
    Artifact::Table(name.into(), header, body)
}

fn dim_labels(k: usize) -> Vec<String> {
    (1..=k).map(|d| format!("dim{d}")).collect()
}

fn require_lambda(lambda: Option<f64>, what: &str) -> Result<f64> {
    lambda.ok_or_else(|| usage(format!("{what} needs --lambda")))
}

fn check_transform(spec: &TransformSpec) -> Result<()> {
    let powered = matches!(
        spec.kind,
        TransformChoice::Chipower | TransformChoice::Power
    );
    if spec.lambda.is_some() && !powered {
        return Err(usage("--lambda applies only to chipower and power"));
    }
    if spec.reference.is_some() && spec.kind != TransformChoice::Alr {
        return Err(usage("--ref applies only to alr"));
    }
    if powered {
        transforms::check_lambda(require_lambda(spec.lambda, "this transform")?)?;
    }
    Ok(())
}

fn build_transform(m: &CompositionMatrix, spec: &TransformSpec) -> Result<TransformedMatrix> {
    match spec.kind {
        TransformChoice::Lr => transforms::pairwise_lr(m),
        TransformChoice::Alr => {
            let reference = match &spec.reference {
                Some(label) => m
                    .part_index(label)
                    .ok_or_else(|| usage(format!("unknown reference part {label:?}")))?,
                None => transforms::choose_alr_ref(m)?,
            };
            transforms::alr(m, reference)
        }
        TransformChoice::Clr => transforms::clr(m),
        TransformChoice::Chipower => {
            transforms::chipower(m, require_lambda(spec.lambda, "chipower")?)
        }
        TransformChoice::Power => transforms::power_only(m, require_lambda(spec.lambda, "power")?),
    }
}

fn transform(a: &TransformArgs) -> Result<Outcome> {
    check_transform(&a.transform)?;
    let (m, _) = load(&a.input, None)?;
    let z = build_transform(&m, &a.transform)?;
    let result = json!({
        "summary": to_json(&z.summary())?,
        "row_labels": z.row_labels,
        "values": rows_of(&z.values),
    });
    let table = labelled_table(
        "transformed.csv",
        "sample",
        &z.row_labels,
        &z.descriptor.column_names,
        &z.values,
    );
    Ok(Outcome::new(result, Some(&a.output)).with(table))
}

fn spectral_outcome(s: &SpectralResult, dims: usize, output: &OutputArgs) -> Result<Outcome> {
    if dims == 0 {
        return Err(usage("--dims must be at least 1"));
    }
    let shown = dims.min(s.rank().max(1)).min(s.row_principal.ncols());
    let rows = s.row_coordinates(Some(shown));
    let cols = s.col_coordinates(Some(shown));
    let result = json!({
        "summary": to_json(&s.summary())?,
        "dims": shown,
        "row_labels": s.row_labels,
        "row_coordinates": rows_of(&rows),
        "column_labels": s.column_labels,
        "column_coordinates": rows_of(&cols),
    });
    let all_rows = s.row_coordinates(None);
    let all_cols = s.col_coordinates(None);
    Ok(Outcome::new(result, Some(output))
        .with(labelled_table(
            "rows.csv",
            "sample",
            &s.row_labels,
            &dim_labels(all_rows.ncols()),
            &all_rows,
        ))
        .with(labelled_table(
            "columns.csv",
            "part",
            &s.column_labels,
            &dim_labels(all_cols.ncols()),
            &all_cols,
        )))
}

fn pca(a: &PcaArgs) -> Result<Outcome> {
    check_transform(&a.transform)?;
    let (m, _) = load(&a.input, None)?;
    let z = build_transform(&m, &a.transform)?;
    spectral_outcome(&spectral::pca(&z)?, a.dims, &a.output)
}

fn ca(a: &CaArgs) -> Result<Outcome> {
    transforms::check_lambda(a.lambda)?;
    let (m, _) = load(&a.input, None)?;
    spectral_outcome(&spectral::ca(&m, a.lambda)?, a.dims, &a.output)
}

fn lra(a: &LraArgs) -> Result<Outcome> {
    let (m, _) = load(&a.input, None)?;
    spectral_outcome(&spectral::lra(&m)?, a.dims, &a.output)
}

fn distance_outcome(d: &DistanceMatrix, output: &OutputArgs) -> Outcome {
    let result = json!({
        "labels": d.labels(),
        "distances": rows_of(d.values()),
    });
    let table = labelled_table(
        "distances.csv",
        "sample",
        d.labels(),
        d.labels(),
        d.values(),
    );
    Outcome::new(result, Some(output)).with(table)
}

fn distances(a: &DistanceArgs) -> Result<Outcome> {
    if let Some(l) = a.lambda {
        transforms::check_lambda(l)?;
    }
    if a.kind == DistanceChoice::Logratio && a.lambda.is_some() {
        return Err(usage("--lambda applies only to chipower distances"));
    }
    let (m, _) = load(&a.input, None)?;
    let d = match a.kind {
        DistanceChoice::Logratio => spectral::logratio_distances(&m)?,
        DistanceChoice::Chipower => {
            spectral::chipower_distances(&m, require_lambda(a.lambda, "chipower distances")?)?
        }
    };
    Ok(distance_outcome(&d, &a.output))
}

/// The strictly positive matrix used for logratios: a separate file, the
/// input with a zero strategy, or the input itself.
fn logratio_side(
    input: &InputArgs,
    m: &CompositionMatrix,
    source: Option<&Path>,
    zeros: Option<&str>,
) -> Result<CompositionMatrix> {
    match (source, zeros) {
        (Some(path), _) => {
            let (lr, _) = load_matrix(
                path,
                &LoadOptions {
                    has_row_labels: input.row_labels,
                    response_column: input.ignore.clone(),
                    positive_class: None,
                },
            )?;
            Ok(lr)
        }
        (None, Some(strategy)) => {
            let (raw, _) = load(
                &InputArgs {
                    zeros: "none".into(),
                    ..input.clone()
                },
                None,
            )?;
            Ok(raw.apply_zero_strategy(strategy.parse()?))
        }
        (None, None) => Ok(m.clone()),
    }
}

fn compare(a: &CompareArgs) -> Result<Outcome> {
    transforms::check_lambda(a.lambda)?;
    let (m, _) = load(&a.input, None)?;
    let lr = logratio_side(
        &a.input,
        &m,
        a.logratio_source.as_deref(),
        a.logratio_zeros.as_deref(),
    )?;
    let cmp = diagnostics::distance_comparison(
        &spectral::logratio_distances(&lr)?,
        &spectral::chipower_distances(&m, a.lambda)?,
    )?;
    let result = json!({
        "lambda": a.lambda,
        "pairs": cmp.pairs.len(),
        "correlation": cmp.correlation,
        "slope": cmp.slope,
    });
    let labels = m.row_labels();
    let rows = cmp
        .pairs
        .iter()
        .map(|p| {
            vec![
                labels[p.i].clone(),
                labels[p.k].clone(),
                format_float(p.d1),
                format_float(p.d2),
            ]
        })
        .collect();
    let table = Artifact::Table(
        "pairs.csv".into(),
        ["sample1", "sample2", "logratio", "chipower"]
            .map(String::from)
            .to_vec(),
        rows,
    );
    Ok(Outcome::new(result, Some(&a.output)).with(table))
}

fn isometry(a: &IsometryArgs) -> Result<Outcome> {
    let grid = diagnostics::parse_grid(&a.grid)?;
    if a.refine && !(a.tolerance > 0.0) {
        return Err(usage("--tolerance must be positive"));
    }
    let (m, _) = load(&a.input, None)?;
    let lr = logratio_side(
        &a.input,
        &m,
        a.logratio_source.as_deref(),
        a.logratio_zeros.as_deref(),
    )?;
    let scan = diagnostics::isometry_scan(&m, &lr, &grid, a.dims)?;
    let refined = if a.refine {
        Some(diagnostics::refine_optimal_lambda(
            &scan,
            &m,
            &lr,
            a.tolerance,
        )?)
    } else {
        None
    };
    let rows = scan
        .lambdas
        .iter()
        .zip(&scan.correlations)
        .map(|(l, r)| vec![format_float(*l), format_float(*r)])
        .collect();
    let result = json!({ "scan": to_json(&scan)?, "refined": to_json(&refined)? });
    let table = Artifact::Table(
        "scan.csv".into(),
        vec!["lambda".into(), "correlation".into()],
        rows,
    );
    Ok(Outcome::new(result, Some(&a.output)).with(table))
}

fn part_indices(m: &CompositionMatrix, labels: &[String]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            m.part_index(l)
                .ok_or_else(|| usage(format!("unknown part {l:?}")))
        })
        .collect()
}

fn basis(choice: BasisChoice) -> SizeBasis {
    match choice {
        BasisChoice::All => SizeBasis::AllParts,
        BasisChoice::Remaining => SizeBasis::RemainingParts,
    }
}

fn plan_from(args: &PlanArgs, must_include: Vec<usize>, choice: BasisChoice) -> SubcompositionPlan {
    SubcompositionPlan::new(args.fractions.clone(), args.replicates, args.seed)
        .with_must_include(must_include)
        .with_basis(basis(choice))
}

fn join_parts(m: &CompositionMatrix, parts: &[usize]) -> String {
    parts
        .iter()
        .map(|&p| m.part_labels()[p].as_str())
        .collect::<Vec<_>>()
        .join(";")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// Report JSON without the per-replicate list, which goes to a table.
fn coherence_json(report: &CoherenceReport) -> Result<Value> {
    let mut value = to_json(report)?;
    if let Value::Object(map) = &mut value {
        map.remove("replicates");
        map.insert("medians".into(), to_json(&report.medians())?);
    }
    Ok(value)
}

fn coherence_table(name: &str, m: &CompositionMatrix, report: &CoherenceReport) -> Artifact {
    let header = ["fraction", "replicate", "parts", "correlation", "failure"]
        .map(String::from)
        .to_vec();
    let rows = report
        .replicates
        .iter()
        .map(|r| {
            vec![
                format_float(r.fraction),
                r.replicate.to_string(),
                join_parts(m, &r.parts),
                opt_float(r.correlation),
                r.failure.clone().unwrap_or_default(),
            ]
        })
        .collect();
    Artifact::Table(name.into(), header, rows)
}

fn coherence(a: &CoherenceArgs) -> Result<Outcome> {
    transforms::check_lambda(a.lambda)?;
    let (m, _) = load(&a.input, None)?;
    let forced = part_indices(&m, &a.must_include)?;
    let plan = plan_from(&a.plan, forced, a.basis);
    let report = diagnostics::coherence_assessment(&m, a.lambda, &plan)?;
    let baseline = match a.baseline {
        Some(BaselineChoice::Raw) => Some(diagnostics::raw_coherence_baseline(&m, &plan)?),
        None => None,
    };
    let result = json!({
        "chipower": coherence_json(&report)?,
        "raw": baseline.as_ref().map(coherence_json).transpose()?,
    });
    let mut outcome =
        Outcome::new(result, Some(&a.output)).with(coherence_table("replicates.csv", &m, &report));
    if let Some(b) = &baseline {
        outcome = outcome.with(coherence_table("raw_replicates.csv", &m, b));
    }
    Ok(outcome)
}

/// Writes a composition with sample labels and an optional response column.
fn write_composition(path: &Path, m: &CompositionMatrix, y: Option<&BinaryResponse>) -> Result<()> {
    let io_error = |e: csv::Error| CodaError::Io(std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(path).map_err(io_error)?;
    let mut header = vec!["sample".to_string()];
    header.extend(m.part_labels().iter().cloned());
    if let Some(y) = y {
        header.push(y.name.clone());
    }
    w.write_record(&header).map_err(io_error)?;
    for (i, label) in m.row_labels().iter().enumerate() {
        let mut record = vec![label.clone()];
        record.extend(m.values().row(i).iter().map(|v| format_float(*v)));
        if let Some(y) = y {
            record.push(y.class_labels[usize::from(y.values[i])].clone());
        }
        w.write_record(&record).map_err(io_error)?;
    }
    w.flush()?;
    Ok(())
}

fn zeros_inject(a: &InjectArgs) -> Result<Outcome> {
    let (m, y) = load(&a.input, a.response.as_deref())?;
    let limit = match (a.limit, a.fraction) {
        (Some(limit), None) => limit,
        (None, Some(fraction)) => synth::limit_for_zero_fraction(&m, fraction)?,
        _ => return Err(usage("give exactly one of --limit and --fraction")),
    };
    let (zeroed, count) = m.inject_zeros(limit)?;
    write_composition(&a.output, &zeroed, y.as_ref())?;
    let cells = m.nrows() * m.nparts();
    Ok(Outcome::new(
        json!({
            "limit": limit,
            "zeros": count,
            "cells": cells,
            "zero_fraction": count as f64 / cells as f64,
        }),
        None,
    ))
}

fn zeros_apply(a: &ApplyArgs) -> Result<Outcome> {
    let (m, y) = load(&a.input, a.response.as_deref())?;
    let strategy: ZeroStrategy = a.strategy.parse()?;
    let before = m.zero_count();
    let applied = m.apply_zero_strategy(strategy);
    write_composition(&a.output, &applied, y.as_ref())?;
    Ok(Outcome::new(
        json!({
            "strategy": strategy.to_string(),
            "zeros_before": before,
            "zeros_after": applied.zero_count(),
        }),
        None,
    ))
}

fn zeros_report(a: &ReportArgs) -> Result<Outcome> {
    let (m, _) = load(&a.input, None)?;
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    for text in &a.strategies {
        let strategy: ZeroStrategy = text.parse()?;
        let applied = m.apply_zero_strategy(strategy);
        let zeros = applied.zero_count();
        let inertia = spectral::total_inertia(&spectral::ca(&applied, 1.0)?)?;
        let variance = if zeros == 0 {
            Some(spectral::total_logratio_variance(&applied)?)
        } else {
            None
        };
        rows.push(vec![
            strategy.to_string(),
            zeros.to_string(),
            format_float(inertia),
            opt_float(variance),
        ]);
        entries.push(json!({
            "strategy": strategy.to_string(),
            "zeros": zeros,
            "ca_inertia": inertia,
            "logratio_variance": variance,
        }));
    }
    let header = ["strategy", "zeros", "ca_inertia", "logratio_variance"]
        .map(String::from)
        .to_vec();
    Ok(
        Outcome::new(json!({ "strategies": entries }), Some(&a.output)).with(Artifact::Table(
            "zeros.csv".into(),
            header,
            rows,
        )),
    )
}

fn response_json(y: &BinaryResponse) -> Value {
    json!({
        "name": y.name,
        "class_labels": y.class_labels,
        "n": y.values.len(),
        "positives": y.positives(),
    })
}

fn fit(a: &FitArgs) -> Result<Outcome> {
    transforms::check_lambda(a.lambda)?;
    let (m, y) = load_with_response(&a.input, &a.response)?;
    let x = transforms::power_only(&m, a.lambda)?.values;
    let mut model = supervised::stepwise_bic(&x, m.part_labels(), &y.values)?;
    model.lambda = Some(a.lambda);
    let design = model.design(&x);
    if model.n_predictors() > 0 {
        model = supervised::standardized_model(&model, &design)?;
    }
    let scores = model.predict(&design);
    let metrics = supervised::metrics(&scores, &y.values, supervised::DEFAULT_THRESHOLD)?;
    let model_json = to_json(&model)?;
    let result = json!({
        "response": response_json(&y),
        "model": model_json,
        "metrics": to_json(&metrics)?,
    });
    Ok(Outcome::new(result, Some(&a.output)).with(Artifact::Json("model.json".into(), model_json)))
}

fn cv(a: &CvArgs) -> Result<Outcome> {
    transforms::check_lambda(a.lambda)?;
    let (m, y) = load_with_response(&a.input, &a.response)?;
    let r = supervised::cross_validate(&m, &y.values, a.lambda, a.k, a.seed)?;
    let rows = r
        .per_fold
        .iter()
        .map(|f| {
            vec![
                f.fold.to_string(),
                f.selected_labels.join(";"),
                opt_float(f.metrics.auc),
                format_float(f.metrics.accuracy),
            ]
        })
        .collect();
    let header = ["fold", "selected", "auc", "accuracy"]
        .map(String::from)
        .to_vec();
    let result = json!({ "response": response_json(&y), "cv": to_json(&r)? });
    Ok(Outcome::new(result, Some(&a.output)).with(Artifact::Table(
        "folds.csv".into(),
        header,
        rows,
    )))
}

fn tune(a: &TuneArgs) -> Result<Outcome> {
    let grid = diagnostics::parse_grid(&a.grid)?;
    let (m, y) = load_with_response(&a.input, &a.response)?;
    let t = supervised::tune_power(&m, &y.values, &grid, a.k, a.seed)?;
    let rows = t
        .results
        .iter()
        .map(|r| {
            vec![
                format_float(r.lambda),
                format_float(r.mean_auc),
                format_float(r.mean_accuracy),
            ]
        })
        .collect();
    let header = ["lambda", "mean_auc", "mean_accuracy"]
        .map(String::from)
        .to_vec();
    let mean_accuracies: Vec<f64> = t.results.iter().map(|r| r.mean_accuracy).collect();
    let result = json!({
        "response": response_json(&y),
        "optimal_lambda": t.optimal_lambda,
        "optimal_mean_auc": t.optimal_mean_auc,
        "lambdas": t.lambdas,
        "mean_aucs": t.mean_aucs,
        "mean_accuracies": mean_accuracies,
        "fold_assignment": t.results.first().map(|r| r.fold_assignment.clone()),
    });
    Ok(
        Outcome::new(result, Some(&a.output)).with(Artifact::Table(
            "tune.csv".into(),
            header,
            rows,
        )),
    )
}

/// Reads a model written by `fit`, either the bare model or the full report,
/// and points its predictors at the parts of `m` with the same labels.
fn load_model(path: &Path, m: &CompositionMatrix) -> Result<LogisticModel> {
    let text = std::fs::read_to_string(path)?;
    let parse_error = |e: serde_json::Error| CodaError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let mut value: Value = serde_json::from_str(&text).map_err(parse_error)?;
    if let Some(inner) = value.pointer("/result/model") {
        value = inner.clone();
    }
    let mut model: LogisticModel = serde_json::from_value(value).map_err(parse_error)?;
    model.predictor_indices = model
        .labels
        .iter()
        .map(|l| {
            m.part_index(l).ok_or_else(|| {
                CodaError::InvalidArgument(format!("model part {l:?} is not in the data"))
            })
        })
        .collect::<Result<_>>()?;
    Ok(model)
}

fn model_lambda(model: &LogisticModel, lambda: Option<f64>) -> Result<f64> {
    lambda
        .or(model.lambda)
        .ok_or_else(|| usage("the model records no power; give --lambda"))
}

fn stability(a: &StabilityArgs) -> Result<Outcome> {
    if let Some(l) = a.lambda {
        transforms::check_lambda(l)?;
    }
    let (m, y) = load_with_response(&a.input, &a.response)?;
    let model = load_model(&a.model, &m)?;
    if model.n_predictors() == 0 {
        return Err(usage("the model has no predictors"));
    }
    let lambda = model_lambda(&model, a.lambda)?;
    let plan = plan_from(&a.plan, model.predictor_indices.clone(), a.basis);
    let report = supervised::model_subcomposition_stability(&m, &y.values, &model, lambda, &plan)?;
    let mut header = ["fraction", "replicate", "parts", "auc", "accuracy"]
        .map(String::from)
        .to_vec();
    header.extend(model.labels.iter().map(|l| format!("std_{l}")));
    header.push("failure".into());
    let rows = report
        .replicates
        .iter()
        .map(|r| {
            let mut row = vec![
                format_float(r.fraction),
                r.replicate.to_string(),
                join_parts(&m, &r.parts),
            ];
            match &r.fit {
                Some(f) => {
                    row.push(format_float(f.auc));
                    row.push(format_float(f.accuracy));
                    row.extend(f.standardized_coefficients.iter().map(|c| format_float(*c)));
                }
                None => row.extend(std::iter::repeat_n(String::new(), 2 + model.n_predictors())),
            }
            row.push(r.failure.clone().unwrap_or_default());
            row
        })
        .collect();
    let mut value = to_json(&report)?;
    if let Value::Object(map) = &mut value {
        map.remove("replicates");
    }
    Ok(Outcome::new(value, Some(&a.output)).with(Artifact::Table(
        "replicates.csv".into(),
        header,
        rows,
    )))
}

fn effect(a: &EffectArgs) -> Result<Outcome> {
    if let Some(l) = a.lambda {
        transforms::check_lambda(l)?;
    }
    if !(a.multiplier.is_finite() && a.multiplier > 0.0) {
        return Err(usage("--multiplier must be positive"));
    }
    let (m, _) = load(&a.input, None)?;
    let model = load_model(&a.model, &m)?;
    let lambda = model_lambda(&model, a.lambda)?;
    let part = m
        .part_index(&a.part)
        .ok_or_else(|| usage(format!("unknown part {:?}", a.part)))?;
    let baseline = m.mean_composition()?;
    let modes = match a.mode {
        EffectChoice::Naive => vec![supervised::EffectMode::Naive],
        EffectChoice::Reclosed => vec![supervised::EffectMode::Reclosed],
        EffectChoice::Both => vec![
            supervised::EffectMode::Naive,
            supervised::EffectMode::Reclosed,
        ],
    };
    let effects = modes
        .into_iter()
        .map(|mode| {
            supervised::compositional_effect(&model, &baseline, part, a.multiplier, lambda, mode)
                .and_then(|e| to_json(&e))
        })
        .collect::<Result<Vec<_>>>()?;
    let result = json!({
        "part_label": a.part,
        "part_labels": m.part_labels(),
        "baseline": baseline,
        "effects": effects,
    });
    Ok(Outcome::new(result, Some(&a.output)))
}

fn synth_data(a: &SynthArgs) -> Result<Outcome> {
    let config = SynthConfig {
        rows: a.rows,
        parts: a.parts,
        factors: a.factors,
        abundance_spread: a.spread,
        factor_scale: a.factor_scale,
        noise: a.noise,
        depth: a.depth,
        seed: a.seed,
        response: a.response_effect.map(|effect| ResponseConfig {
            intercept: 0.0,
            effect,
        }),
    };
    let data = synth::generate(&config)?;
    let (matrix, limit) = match a.zero_fraction {
        Some(f) => {
            let limit = synth::limit_for_zero_fraction(&data.matrix, f)?;
            (data.matrix.inject_zeros(limit)?.0, Some(limit))
        }
        None => (data.matrix, None),
    };
    write_composition(&a.output, &matrix, data.response.as_ref())?;
    Ok(Outcome::new(
        json!({
            "rows": matrix.nrows(),
            "parts": matrix.nparts(),
            "zeros": matrix.zero_count(),
            "limit": limit,
            "positives": data.response.as_ref().map(BinaryResponse::positives),
        }),
        None,
    ))
}
