use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use fairfront::certify::DisplacementChoice;
use fairfront::pareto::write_frontier_csv;
use fairfront::{
    certify_composition_ed, certify_composition_lip, certify_frontier, certify_lipschitz_barycenter,
    certify_optimal, displacement_sup, fit_affine_barycenter, fit_quantile_barycenter, frontier, load_csv,
    synth_gaussian, transform, wasserstein_disparity, BarycenterModel, Certificate, CompositionMode,
    DisparityMethod, DisplacementStats, GaussianGroup, GroupedDataset, ParetoPoint, SyntheticSpec, Variant,
};

use crate::args::{
    Budget, CertifyArgs, Cli, Command, Common, DGrid, DisparityArgs, ExperimentArgs, FrontierArgs, SynthArgs,
    TheoremArg, TransformArgs,
};
use crate::error::{at_path, io_at, CliError, CliResult};
use crate::ols::{fit_ols, OlsModel};
use crate::svg::{frontier_svg, Band};
use crate::table::Table;

pub fn execute(cli: Cli) -> CliResult<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Fit => cmd_fit(c),
        Command::Frontier(a) => cmd_frontier(c, a),
        Command::Certify(a) => cmd_certify(c, a),
        Command::Transform(a) => cmd_transform(c, a),
        Command::Disparity(a) => cmd_disparity(c, a),
        Command::Synth(a) => cmd_synth(c, a),
        Command::Experiment(a) => cmd_experiment(c, a),
    }
}

fn require_input(c: &Common) -> CliResult<&Path> {
    c.input
        .as_deref()
        .ok_or_else(|| CliError::usage("--input is required for this subcommand"))
}

fn load_data(c: &Common) -> CliResult<GroupedDataset> {
    let path = require_input(c)?;
    at_path(path, load_csv(path, &c.outcome_cols, &c.group_col))
}

fn resolve_variant(v: Option<Variant>, dims: usize) -> Variant {
    v.unwrap_or(if dims == 1 { Variant::Quantile } else { Variant::Affine })
}

fn fit_model(ds: &GroupedDataset, variant: Variant) -> CliResult<BarycenterModel> {
    Ok(match variant {
        Variant::Quantile => fit_quantile_barycenter(ds)?,
        Variant::Affine => fit_affine_barycenter(ds)?,
    })
}

fn load_model(path: &Path) -> CliResult<BarycenterModel> {
    at_path(path, BarycenterModel::load(path))
}

fn model_for(c: &Common, model: Option<&Path>, ds: &GroupedDataset) -> CliResult<BarycenterModel> {
    match model {
        Some(p) => {
            let m = load_model(p)?;
            m.check_compatible(ds)?;
            Ok(m)
        }
        None => fit_model(ds, resolve_variant(c.variant, ds.dims())),
    }
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(io_at(p)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(io_at(Path::new("<stdout>")))
        }
    }
}

fn budget_pair(c: &Common) -> CliResult<Option<Budget>> {
    match (c.epsilon, c.delta) {
        (Some(epsilon), Some(delta)) => Ok(Some(Budget { epsilon, delta })),
        (None, None) => Ok(None),
        _ => Err(CliError::usage("--epsilon and --delta must be given together")),
    }
}

fn stats_and_l(c: &Common, model: &BarycenterModel, ds: &GroupedDataset) -> CliResult<(DisplacementStats, f64)> {
    let stats = displacement_sup(model, ds, c.y_sup)?;
    let l = stats.select(DisplacementChoice::from(c.displacement))?;
    Ok((stats, l))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_else(|| "n/a".into())
}

fn cmd_fit(c: &Common) -> CliResult<()> {
    let ds = load_data(c)?;
    let model = fit_model(&ds, resolve_variant(c.variant, ds.dims()))?;
    let stats = displacement_sup(&model, &ds, c.y_sup)?;
    if let Some(p) = &c.output {
        at_path(p, model.save(p))?;
    }
    println!("variant = {}", model.variant());
    println!("V = {}", model.projection_loss());
    println!("L_emp = {}", stats.l_emp);
    if stats.l_bound.is_some() {
        println!("L_bound = {} (y_sup = {})", fmt_opt(stats.l_bound), fmt_opt(stats.y_sup));
    }
    Ok(())
}

fn cmd_frontier(c: &Common, a: &FrontierArgs) -> CliResult<()> {
    let ds = load_data(c)?;
    let model = model_for(c, a.model.as_deref(), &ds)?;
    let scale = SQRT_2 * model.projection_loss();
    let grid = c.d_grid.unwrap_or(DGrid::DEFAULT).points(scale)?;
    let points = frontier(&ds, &model, &grid)?;

    let mut csv = Vec::new();
    write_frontier_csv(&points, &mut csv)?;
    write_text(c.output.as_deref(), &String::from_utf8_lossy(&csv))?;

    let band = match budget_pair(c)? {
        Some(b) => {
            let (_, l) = stats_and_l(c, &model, &ds)?;
            let cert = certify_frontier(b.epsilon, b.delta, l, model.projection_loss())?;
            eprintln!("{}", cert.summary());
            Some(band_for(&cert, b))
        }
        None => None,
    };
    if let Some(p) = &a.svg {
        std::fs::write(p, frontier_svg(&points, band.as_ref())).map_err(io_at(p))?;
    }
    Ok(())
}

fn band_for(cert: &Certificate, b: Budget) -> Band {
    Band {
        d_min: cert.d_min,
        label: format!("certified (eps={}, delta={})", b.epsilon, b.delta),
    }
}

fn need(v: Option<f64>, flag: &str, theorem: &str) -> CliResult<f64> {
    v.ok_or_else(|| CliError::usage(format!("{theorem} needs {flag}")))
}

fn cmd_certify(c: &Common, a: &CertifyArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let ds = match &c.input {
        Some(_) => Some(load_data(c)?),
        None => None,
    };
    let v = model.projection_loss();
    let l = || -> CliResult<f64> {
        if let Some(l) = a.displacement_l {
            return Ok(l);
        }
        let ds = ds
            .as_ref()
            .ok_or_else(|| CliError::usage("measuring L needs --input (or pass --displacement-l)"))?;
        Ok(stats_and_l(c, &model, ds)?.1)
    };

    let theorems: Vec<TheoremArg> = match a.theorem {
        TheoremArg::Auto => vec![if a.delta_g.is_some() || a.epsilon_g.is_some() {
            TheoremArg::CompositionEpsilonDelta
        } else if c.lipschitz_k.is_some() && c.epsilon.is_some() && c.delta.is_some() {
            TheoremArg::CompositionLipschitz
        } else if c.epsilon.is_some() || c.delta.is_some() {
            TheoremArg::FrontierEpsilonDelta
        } else {
            TheoremArg::LipschitzIncompatibility
        }],
        TheoremArg::All => {
            let mut t = vec![TheoremArg::LipschitzIncompatibility];
            if c.epsilon.is_some() && c.delta.is_some() {
                t.push(TheoremArg::BarycenterEpsilonDelta);
                t.push(TheoremArg::FrontierEpsilonDelta);
                if a.delta_g.is_some() || a.epsilon_g.is_some() {
                    t.push(TheoremArg::CompositionEpsilonDelta);
                }
                if c.lipschitz_k.is_some() {
                    t.push(TheoremArg::CompositionLipschitz);
                }
            }
            t
        }
        t => vec![t],
    };

    let mut certs = Vec::new();
    for t in &theorems {
        let cert = match t {
            TheoremArg::LipschitzIncompatibility => {
                let ds = ds
                    .as_ref()
                    .ok_or_else(|| CliError::usage("lipschitz-incompatibility needs --input"))?;
                certify_lipschitz_barycenter(ds, &model)?
            }
            TheoremArg::BarycenterEpsilonDelta => {
                let name = "barycenter-epsilon-delta";
                certify_optimal(need(c.epsilon, "--epsilon", name)?, need(c.delta, "--delta", name)?, l()?)?
            }
            TheoremArg::FrontierEpsilonDelta => {
                let name = "frontier-epsilon-delta";
                certify_frontier(need(c.epsilon, "--epsilon", name)?, need(c.delta, "--delta", name)?, l()?, v)?
            }
            TheoremArg::CompositionEpsilonDelta => {
                let name = "composition-epsilon-delta";
                let mode = CompositionMode::from(a.mode);
                let g = match mode {
                    CompositionMode::Post => need(a.delta_g, "--delta-g (post mode)", name)?,
                    CompositionMode::Pre => need(a.epsilon_g, "--epsilon-g (pre mode)", name)?,
                };
                certify_composition_ed(
                    need(c.epsilon, "--epsilon", name)?,
                    need(c.delta, "--delta", name)?,
                    g,
                    l()?,
                    v,
                    mode,
                )?
            }
            TheoremArg::CompositionLipschitz => {
                let name = "composition-lipschitz";
                certify_composition_lip(
                    need(c.epsilon, "--epsilon", name)?,
                    need(c.delta, "--delta", name)?,
                    need(c.lipschitz_k, "--lipschitz-k", name)?,
                    l()?,
                    v,
                    CompositionMode::from(a.mode),
                )?
            }
            TheoremArg::Auto | TheoremArg::All => unreachable!(),
        };
        certs.push(cert);
    }

    for cert in &certs {
        println!("{}", cert.summary());
        for n in &cert.notes {
            println!("  {n}");
        }
    }
    if let Some(p) = &c.output {
        let json = if certs.len() == 1 {
            certs[0].to_json()?
        } else {
            serde_json::to_string_pretty(&certs).map_err(fairfront::Error::from)?
        };
        std::fs::write(p, json + "\n").map_err(io_at(p))?;
    }
    Ok(())
}

fn cmd_transform(c: &Common, a: &TransformArgs) -> CliResult<()> {
    let ds = load_data(c)?;
    let model = model_for(c, a.model.as_deref(), &ds)?;
    let moved = transform(&ds, &model, a.tolerance)?;
    let mut buf = Vec::new();
    moved.write_csv(&mut buf, &c.outcome_cols, &c.group_col)?;
    write_text(c.output.as_deref(), &String::from_utf8_lossy(&buf))
}

fn cmd_disparity(c: &Common, a: &DisparityArgs) -> CliResult<()> {
    let ds = load_data(c)?;
    let method = match (a.method, c.variant) {
        (Some(m), _) => m.into(),
        (None, Some(v)) => DisparityMethod::for_variant(v),
        (None, None) => DisparityMethod::default_for_dims(ds.dims()),
    };
    let report = wasserstein_disparity(&ds, method)?;
    write_text(c.output.as_deref(), &(report.to_json()? + "\n"))
}

fn parse_list(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad {what} entry `{t}`")))
        })
        .collect()
}

fn parse_gaussian_group(spec: &str) -> CliResult<GaussianGroup> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [label, mean, cov, n] = parts[..] else {
        return Err(CliError::usage(format!("expected label:mean:cov:n, got `{spec}`")));
    };
    let mean = parse_list(mean, "mean")?;
    let k = mean.len();
    let rows: Vec<Vec<f64>> = cov.split(';').map(|r| parse_list(r, "covariance")).collect::<CliResult<_>>()?;
    let cov = if rows.len() == 1 && rows[0].len() == 1 {
        let s = rows[0][0];
        (0..k).map(|i| (0..k).map(|j| if i == j { s } else { 0.0 }).collect()).collect()
    } else {
        rows
    };
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("bad group size `{n}`")))?;
    Ok(GaussianGroup {
        label: label.trim().to_string(),
        mean,
        cov,
        n,
    })
}

fn cmd_synth(c: &Common, a: &SynthArgs) -> CliResult<()> {
    if a.linear {
        return synth_linear(c, a);
    }
    let groups = a
        .groups
        .iter()
        .map(|g| parse_gaussian_group(g))
        .collect::<CliResult<Vec<_>>>()?;
    let ds = synth_gaussian(&SyntheticSpec { groups, seed: c.seed })?;
    let k = ds.dims();
    let names = if c.outcome_cols.len() == k {
        c.outcome_cols.clone()
    } else if c.outcome_cols == ["y"] {
        (1..=k).map(|i| format!("y{i}")).collect()
    } else {
        return Err(CliError::usage(format!(
            "{} outcome column names for {k}-dimensional groups",
            c.outcome_cols.len()
        )));
    };
    let mut buf = Vec::new();
    ds.write_csv(&mut buf, &names, &c.group_col)?;
    write_text(c.output.as_deref(), &String::from_utf8_lossy(&buf))
}

fn synth_linear(c: &Common, a: &SynthArgs) -> CliResult<()> {
    let p = a.n_features;
    if p == 0 {
        return Err(CliError::usage("--n-features must be at least 1"));
    }
    let mut shifts = BTreeMap::new();
    let mut groups = Vec::new();
    for spec in &a.groups {
        let parts: Vec<&str> = spec.split(':').collect();
        let [label, shift, n] = parts[..] else {
            return Err(CliError::usage(format!("expected label:shift:n with --linear, got `{spec}`")));
        };
        let shift: f64 = shift
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("bad shift `{shift}`")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("bad group size `{n}`")))?;
        shifts.insert(label.trim().to_string(), shift);
        groups.push(GaussianGroup {
            label: label.trim().to_string(),
            mean: vec![shift; p],
            cov: (0..p).map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            n,
        });
    }
    let xs = synth_gaussian(&SyntheticSpec { groups, seed: c.seed })?;
    let outcome = c.outcome_cols.first().cloned().unwrap_or_else(|| "y".into());

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
    header.push(outcome);
    header.push(c.group_col.clone());
    w.write_record(&header).map_err(fairfront::Error::from)?;
    for (label, m) in xs.iter() {
        for row in m.row_iter() {
            let y = row.mean() + shifts[label];
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            rec.push(format!("{y}"));
            rec.push(label.to_string());
            w.write_record(&rec).map_err(fairfront::Error::from)?;
        }
    }
    let buf = w
        .into_inner()
        .map_err(|e| CliError::usage(format!("csv buffer: {e}")))?;
    write_text(c.output.as_deref(), &String::from_utf8_lossy(&buf))
}

#[derive(Debug, Serialize)]
struct OlsSummary {
    uses_group: bool,
    weights: Vec<Vec<f64>>,
    intercept: Vec<f64>,
    rank: usize,
    columns: usize,
    normal_residual: f64,
    rmse: f64,
    /// Operator norm of the feature weights.
    lipschitz_k: f64,
    /// Disparity of the in-sample predictions.
    disparity: f64,
    notes: Vec<String>,
}

#[derive(Debug, Serialize)]
struct BudgetReport {
    epsilon: f64,
    delta: f64,
    certificates: Vec<Certificate>,
    /// Certificates whose hypotheses fail for this budget.
    skipped: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ExperimentReport {
    pipeline: Vec<String>,
    n: usize,
    features: Vec<String>,
    outcomes: Vec<String>,
    group_sizes: BTreeMap<String, usize>,
    ols_with_group: OlsSummary,
    ols_without_group: OlsSummary,
    variant: Variant,
    disparity_method: DisparityMethod,
    input_disparity: f64,
    projection_loss: f64,
    tolerance_scale: f64,
    displacement: DisplacementStats,
    certificate_displacement: f64,
    frontier: Vec<ParetoPoint>,
    lipschitz_certificate: Certificate,
    budgets: Vec<BudgetReport>,
    files: BTreeMap<String, PathBuf>,
}

fn predictions(model: &OlsModel, x: &DMatrix<f64>) -> DMatrix<f64> {
    let k = model.intercept.len();
    let mut out = DMatrix::zeros(x.nrows(), k);
    for i in 0..x.nrows() {
        out.row_mut(i).copy_from(&model.predict(&x.row(i).transpose()).transpose());
    }
    out
}

fn summarize_ols(
    model: &OlsModel,
    x: &DMatrix<f64>,
    table: &Table,
    uses_group: bool,
    method: DisparityMethod,
) -> CliResult<(OlsSummary, DMatrix<f64>)> {
    let pred = predictions(model, x);
    let rmse = ((&pred - &table.outcomes).norm_squared() / table.n() as f64).sqrt();
    let disparity = wasserstein_disparity(&table.grouped(&pred)?, method)?.disparity;
    let weights = model
        .weights
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let summary = OlsSummary {
        uses_group,
        weights,
        intercept: model.intercept.iter().copied().collect(),
        rank: model.rank,
        columns: model.columns,
        normal_residual: model.normal_residual,
        rmse,
        lipschitz_k: model.lipschitz(),
        disparity,
        notes: model.notes.clone(),
    };
    Ok((summary, pred))
}

fn cmd_experiment(c: &Common, a: &ExperimentArgs) -> CliResult<()> {
    let input = require_input(c)?;
    let out_dir = c
        .output
        .as_deref()
        .ok_or_else(|| CliError::usage("experiment needs --output <directory>"))?;
    let table = at_path(input, Table::load(input, &a.feature_cols, &c.outcome_cols, &c.group_col))?;
    let variant = c.variant.unwrap_or(Variant::Affine);
    let method = DisparityMethod::for_variant(variant);

    let with_x = table.features_with_group();
    let ols_with = fit_ols(&with_x, &table.outcomes)?;
    let (with_summary, _) = summarize_ols(&ols_with, &with_x, &table, true, method)?;
    let ols_without = fit_ols(&table.features, &table.outcomes)?;
    let (without_summary, pred) = summarize_ols(&ols_without, &table.features, &table, false, method)?;

    let ds = table.grouped(&pred)?;
    let model = fit_model(&ds, variant)?;
    let input_disparity = wasserstein_disparity(&ds, method)?.disparity;
    let v = model.projection_loss();
    let scale = SQRT_2 * v;
    let (stats, l) = stats_and_l(c, &model, &ds)?;
    let grid = c.d_grid.unwrap_or(DGrid::DEFAULT).points(scale)?;
    let points = frontier(&ds, &model, &grid)?;
    let k = ols_without.lipschitz();

    let mut budgets: Vec<Budget> = a.budgets.clone();
    if let Some(b) = budget_pair(c)? {
        budgets.push(b);
    }
    let mut budget_reports = Vec::new();
    for b in &budgets {
        let mut certs = Vec::new();
        let mut skipped = Vec::new();
        let mut push = |r: fairfront::Result<Certificate>| match r {
            Ok(cert) => certs.push(cert),
            Err(e) => skipped.push(e.to_string()),
        };
        push(certify_frontier(b.epsilon, b.delta, l, v));
        push(certify_optimal(b.epsilon, b.delta, l));
        push(certify_composition_lip(b.epsilon, b.delta, k, l, v, CompositionMode::Post));
        budget_reports.push(BudgetReport {
            epsilon: b.epsilon,
            delta: b.delta,
            certificates: certs,
            skipped,
        });
    }
    let lipschitz_certificate = certify_lipschitz_barycenter(&ds, &model)?;

    std::fs::create_dir_all(out_dir).map_err(io_at(out_dir))?;
    let csv_path = out_dir.join("frontier.csv");
    let svg_path = out_dir.join("frontier.svg");
    let model_path = out_dir.join("model.json");
    let report_path = out_dir.join("report.json");
    let mut csv = Vec::new();
    write_frontier_csv(&points, &mut csv)?;
    std::fs::write(&csv_path, csv).map_err(io_at(&csv_path))?;
    let band = budgets.first().zip(budget_reports.first()).and_then(|(b, r)| {
        r.certificates
            .iter()
            .find(|c| c.theorem == fairfront::TheoremTag::FrontierEpsilonDelta)
            .map(|cert| band_for(cert, *b))
    });
    std::fs::write(&svg_path, frontier_svg(&points, band.as_ref())).map_err(io_at(&svg_path))?;
    at_path(&model_path, model.save(&model_path))?;

    let files = BTreeMap::from([
        ("frontier_csv".to_string(), csv_path.clone()),
        ("frontier_svg".to_string(), svg_path.clone()),
        ("model".to_string(), model_path.clone()),
    ]);
    let report = ExperimentReport {
        pipeline: vec![
            "fit OLS on features plus group indicators (baseline) and on features alone".into(),
            "take in-sample predictions of the features-only model".into(),
            format!("fit {variant} barycenter maps to those predictions, grouped by `{}`", c.group_col),
            "sweep the Pareto frontier and certify each (epsilon, delta) budget".into(),
            "composition certificates use K = operator norm of the features-only weights".into(),
        ],
        n: table.n(),
        features: a.feature_cols.clone(),
        outcomes: c.outcome_cols.clone(),
        group_sizes: ds.iter().map(|(z, m)| (z.to_string(), m.nrows())).collect(),
        ols_with_group: with_summary,
        ols_without_group: without_summary,
        variant,
        disparity_method: method,
        input_disparity,
        projection_loss: v,
        tolerance_scale: scale,
        displacement: stats,
        certificate_displacement: l,
        frontier: points,
        lipschitz_certificate,
        budgets: budget_reports,
        files,
    };
    let json = serde_json::to_string_pretty(&report).map_err(fairfront::Error::from)?;
    std::fs::write(&report_path, json + "\n").map_err(io_at(&report_path))?;

    println!("D(predictions) = {input_disparity}");
    println!("V = {v}");
    println!("L_emp = {}  L_bound = {}", stats.l_emp, fmt_opt(stats.l_bound));
    println!("K (features-only OLS) = {k}");
    for r in &report.budgets {
        for cert in &r.certificates {
            println!("[eps={}, delta={}] {}", r.epsilon, r.delta, cert.summary());
        }
        for s in &r.skipped {
            println!("[eps={}, delta={}] skipped: {s}", r.epsilon, r.delta);
        }
    }
    println!("report written to {}", report_path.display());
    Ok(())
}
