use std::path::Path;

use geowarp::basis::extend_basis_with;
use geowarp::inference::{
    distribution_moments, estimated_density, marginal_effects, significance_summary, QUANTILE_PROBS,
};
use geowarp::predict::{predict_oos_with, NewData, PredictOptions};
use geowarp::proximity::build_kernel_proximity_with;
use geowarp::transform::fit_chain_path;
use geowarp::*;

use crate::archive::{ModelArchive, FORMAT, VERSION};
use crate::config::{RunConfig, Spatial};
use crate::error::{CliError, Result};
use crate::ingest::{self, Table};
use crate::report::{self, num};

const MIN_TRANSFORM_CHECK: usize = 30;

fn write_csv(path: &Path, headers: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(headers).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    Ok(&cfg.out)
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// Basis from the configured coordinates or adjacency, plus the basis row
/// of every observation for zone-based bases.
fn basis_for(cfg: &RunConfig, table: &Table) -> Result<(EigenBasis, Option<Vec<usize>>)> {
    let par = cfg.parallelism();
    match cfg.spatial()? {
        Spatial::Coords(x, y) => {
            let cs = CoordinateSet::new(table.coords(x, y)?, None)?;
            let prox = build_kernel_proximity_with(&cs, par)?;
            Ok((extract_basis(&prox, cfg.threshold)?, None))
        }
        Spatial::Zones { zone_id, adjacency } => {
            let (levels, index) = ingest::zones(&table.strings(zone_id)?);
            let a = ingest::adjacency(adjacency, &cfg.adjacency_format, &levels)?;
            let prox = build_contiguity_proximity(a, Some(levels))?;
            Ok((extract_basis(&prox, cfg.threshold)?, Some(index)))
        }
    }
}

pub fn fit(cfg: &RunConfig) -> Result<()> {
    cfg.check_probs()?;
    let response = cfg.response()?;
    if cfg.x_nvc && cfg.x.is_empty() {
        return Err(CliError::Config(
            "x_nvc needs at least one covariate in 'x'".into(),
        ));
    }
    if let Some(c) = cfg.x.iter().find(|c| cfg.xconst.contains(c)) {
        return Err(CliError::Config(format!(
            "column '{c}' is listed in both 'x' and 'xconst'"
        )));
    }
    let tspec = cfg.transform(cfg.tr_num.unwrap_or(0))?;
    cfg.spatial()?;
    let table = Table::read(cfg.data_path()?)?;
    table.require_rows()?;

    let y = if tspec.is_count() {
        table.counts(response)?
    } else {
        table.numeric(response)?
    };
    let mut data = ModelData::new(y);
    for c in cfg.x.iter().chain(&cfg.xconst) {
        data = data.with_column(c.clone(), table.numeric(c)?);
    }
    if let Some(gc) = &cfg.xgroup {
        data = data.with_group(table.strings(gc)?);
    }
    if let Some(oc) = &cfg.offset {
        data = data.with_offset(table.positive(oc)?);
    }
    let (basis, site_index) = basis_for(cfg, &table)?;
    if let Some(ix) = site_index {
        data = data.with_site_index(ix);
    }
    let spec = ModelSpec::new(tspec)
        .with_svc(&strs(&cfg.x))
        .with_const(&strs(&cfg.xconst))
        .with_nvc(cfg.x_nvc);
    let opts = cfg.fit_options();
    let model = if cfg.x.is_empty() {
        fit_resf(&data, &spec, &basis, &opts)?
    } else {
        fit_resf_vc(&data, &spec, &basis, &opts)?
    };

    let out = out_dir(cfg)?;
    let moments = distribution_moments(&model, cfg.seed, cfg.draws, cfg.parallelism());
    let significance = significance_summary(&model);
    let marginal = marginal_effects(&model);
    let text = report::render(&report::ReportInput {
        model: &model,
        response,
        data_sha256: &table.sha256,
        moments,
        significance: &significance,
        marginal: &marginal,
    });
    print!("{text}");
    std::fs::write(out.join("report.txt"), &text).map_err(|e| CliError::io(out, e))?;
    write_tables(out, &model, &table, cfg, &marginal)?;

    let archive = ModelArchive {
        format: FORMAT.into(),
        version: VERSION,
        data_sha256: table.sha256.clone(),
        response: response.to_string(),
        coords: cfg.coords.clone(),
        zone_id: cfg.zone_id.clone(),
        xgroup: cfg.xgroup.clone(),
        offset: cfg.offset.clone(),
        model,
    };
    archive.save(&out.join("model.json"))
}

fn write_tables(
    out: &Path,
    m: &FittedModel,
    table: &Table,
    cfg: &RunConfig,
    me: &geowarp::inference::MarginalEffects,
) -> Result<()> {
    let h = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let rows: Vec<Vec<String>> = m
        .coefficients
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                num(c.estimate),
                num(c.se),
                num(c.z),
                num(c.p),
            ]
        })
        .collect();
    write_csv(
        &out.join("coefficients.csv"),
        &h(&["name", "estimate", "se", "t_value", "p_value"]),
        &rows,
    )?;

    let site_ids: Vec<String> = match &cfg.zone_id {
        Some(z) => table.strings(z)?,
        None => (1..=m.n()).map(|i| i.to_string()).collect(),
    };
    if let Some(svc) = &m.svc {
        let mut headers = vec!["site_id".to_string()];
        for s in svc {
            headers.extend(["estimate", "se", "p"].map(|k| format!("{}_{k}", s.name)));
        }
        let rows: Vec<Vec<String>> = (0..m.n())
            .map(|i| {
                let mut r = vec![site_ids[i].clone()];
                for s in svc {
                    r.extend([num(s.estimate[i]), num(s.se[i]), num(s.p[i])]);
                }
                r
            })
            .collect();
        write_csv(&out.join("svc.csv"), &headers, &rows)?;
    }

    let v = &m.variance;
    let mut rows = vec![vec![
        "residual".into(),
        "(all)".into(),
        num(v.sigma2.sqrt()),
        "NA".into(),
        "NA".into(),
    ]];
    for s in &v.spatial {
        rows.push(vec![
            "spatial".into(),
            s.name.clone(),
            num(s.random_se),
            s.alpha.map_or("NA".into(), num),
            s.moran_ratio.map_or("NA".into(), num),
        ]);
    }
    for (name, se) in &v.nvc {
        rows.push(vec![
            "non_spatial".into(),
            name.clone(),
            num(*se),
            "NA".into(),
            "NA".into(),
        ]);
    }
    if let Some(sg) = v.group_sigma {
        rows.push(vec![
            "group".into(),
            cfg.xgroup.clone().unwrap_or_default(),
            num(sg),
            "NA".into(),
            "NA".into(),
        ]);
    }
    write_csv(
        &out.join("variance.csv"),
        &h(&["process", "name", "random_se", "alpha", "moran_ratio"]),
        &rows,
    )?;

    let c = &m.criteria;
    let f = &m.fit_stats;
    let opt = |v: Option<f64>| v.map_or("NA".into(), num);
    let mut rows = vec![
        vec!["n".into(), m.n().to_string()],
        vec!["eigenvectors".into(), m.basis.n_vectors().to_string()],
        vec!["rlogLik".into(), num(c.rloglik)],
        vec!["AIC".into(), num(c.aic)],
        vec!["BIC".into(), num(c.bic)],
        vec!["p".into(), c.p.to_string()],
        vec!["resid_SE".into(), num(f.resid_se)],
        vec!["adjR2_cond".into(), num(f.adj_r2_cond)],
        vec!["dispersion".into(), opt(f.dispersion)],
        vec!["deviance_explained".into(), opt(f.deviance_explained)],
        vec!["null_loglik".into(), num(m.null_model.loglik)],
        vec!["null_AIC".into(), num(m.null_model.aic)],
        vec!["null_BIC".into(), num(m.null_model.bic)],
    ];
    if let Some(l) = m.chain.boxcox_lambda() {
        rows.push(vec!["boxcox_lambda".into(), num(l)]);
    }
    for (d, p) in m.chain.sal_layers().iter().enumerate() {
        for (k, t) in [p.theta1, p.theta2, p.theta3, p.theta4].iter().enumerate() {
            rows.push(vec![format!("sal{}_theta{}", d + 1, k + 1), num(*t)]);
        }
    }
    write_csv(&out.join("fit_stats.csv"), &h(&["stat", "value"]), &rows)?;

    if let Some(ge) = &m.group_effects {
        let rows: Vec<Vec<String>> = ge
            .iter()
            .map(|e| {
                vec![
                    e.level.clone(),
                    num(e.estimate),
                    e.se.map_or("NA".into(), num),
                ]
            })
            .collect();
        write_csv(
            &out.join("group_effects.csv"),
            &h(&["level", "estimate", "se"]),
            &rows,
        )?;
    }

    if !me.names.is_empty() {
        let mut headers = vec!["site_id".to_string()];
        headers.extend(me.names.iter().cloned());
        let rows: Vec<Vec<String>> = (0..m.n())
            .map(|i| {
                let mut r = vec![site_ids[i].clone()];
                r.extend(me.values[i].iter().map(|v| num(*v)));
                r
            })
            .collect();
        write_csv(&out.join("marginal_effects.csv"), &headers, &rows)?;
        let rows: Vec<Vec<String>> = me
            .names
            .iter()
            .zip(&me.summaries)
            .map(|(n, s)| {
                vec![
                    n.clone(),
                    num(s.min),
                    num(s.q1),
                    num(s.median),
                    num(s.mean),
                    num(s.q3),
                    num(s.max),
                ]
            })
            .collect();
        write_csv(
            &out.join("marginal_summary.csv"),
            &h(&["covariate", "min", "q1", "median", "mean", "q3", "max"]),
            &rows,
        )?;
    }

    let q = &m.fitted.quantiles;
    let mut headers = vec!["site_id".to_string(), "pred".to_string()];
    headers.extend(q.headers());
    let rows: Vec<Vec<String>> = (0..m.n())
        .map(|i| {
            let mut r = vec![site_ids[i].clone(), num(m.fitted.pred[i])];
            r.extend(q.rows[i].iter().map(|v| num(*v)));
            r
        })
        .collect();
    write_csv(&out.join("quantiles.csv"), &headers, &rows)?;

    let d = estimated_density(m, cfg.density_points);
    let rows: Vec<Vec<String>> =
        d.y.iter()
            .zip(&d.density)
            .map(|(y, p)| vec![num(*y), num(*p)])
            .collect();
    write_csv(&out.join("density.csv"), &h(&["y", "density"]), &rows)
}

pub fn predict(cfg: &RunConfig) -> Result<()> {
    cfg.check_probs()?;
    let model_path = cfg
        .model
        .as_deref()
        .ok_or_else(|| CliError::Config("config key 'model' is required".into()))?;
    let data_path = cfg
        .predict_data
        .as_deref()
        .ok_or_else(|| CliError::Config("config key 'predict_data' is required".into()))?;
    let arch = ModelArchive::load(model_path)?;
    let model = &arch.model;
    let table = Table::read(data_path)?;
    let m = table.len();

    let probs = cfg
        .quantile_probs
        .clone()
        .unwrap_or_else(|| QUANTILE_PROBS.to_vec());
    let mut headers: Vec<String> = ["pred", "pred_transG", "pred_transG_se", "xb", "sf_residual"]
        .map(String::from)
        .to_vec();
    headers.extend(geowarp::inference::QuantileTable::empty(&probs).headers());
    if cfg.len95 {
        headers.push("len95".into());
    }
    let out = out_dir(cfg)?.join("predictions.csv");

    let [cx, cy] = match arch.coords.as_deref() {
        Some([x, y]) => [x.as_str(), y.as_str()],
        _ => return Err(geowarp::Error::ExtensionRequiresKernel.into()),
    };
    let names = &model.design.fixed_names[1..];
    for n in names.iter().map(String::as_str).chain([cx, cy]) {
        if !table.has(n) {
            return Err(CliError::Data(format!(
                "{}: missing column '{n}' required by the model",
                data_path.display()
            )));
        }
    }
    if m == 0 {
        return write_csv(&out, &headers, &[]);
    }

    let cs = CoordinateSet::new_prediction(table.coords(cx, cy)?, None)?;
    let e0 = extend_basis_with(&model.basis, &cs, cfg.parallelism())?;
    let mut nd = NewData::new(m);
    for n in names {
        nd = nd.with_column(n.clone(), table.numeric(n)?);
    }
    if let Some(gc) = arch.xgroup.as_deref().filter(|g| table.has(g)) {
        nd = nd.with_group(table.strings(gc)?);
    }
    if let Some(oc) = &arch.offset {
        if table.has(oc) {
            nd = nd.with_offset(table.positive(oc)?);
        } else {
            eprintln!("warning: no '{oc}' column; predicting with unit offset");
        }
    }
    let opts = PredictOptions {
        compute_quantiles: true,
        include_noise_in_se: cfg.include_noise_in_se,
        probs,
        parallelism: cfg.parallelism(),
    };
    let p = predict_oos_with(model, &nd, &e0, &opts)?;
    for w in &p.warnings {
        eprintln!("warning: {w}");
    }
    let q = p.quantiles.as_ref().expect("quantiles requested");
    let rows: Vec<Vec<String>> = (0..m)
        .map(|i| {
            let mut r = vec![
                num(p.pred[i]),
                num(p.pred_trans_g[i]),
                num(p.pred_trans_g_se[i]),
                num(p.xb[i]),
                num(p.sf_residual[i]),
            ];
            r.extend(q.rows[i].iter().map(|v| num(*v)));
            if cfg.len95 {
                r.push(p.len95.as_ref().map_or("NA".into(), |l| num(l[i])));
            }
            r
        })
        .collect();
    write_csv(&out, &headers, &rows)?;
    println!("wrote {m} predictions to {}", out.display());
    Ok(())
}

pub fn basis(cfg: &RunConfig) -> Result<()> {
    let table = Table::read(cfg.data_path()?)?;
    table.require_rows()?;
    let (b, _) = basis_for(cfg, &table)?;
    let out = out_dir(cfg)?;
    let l = b.n_vectors();
    let headers: Vec<String> = (1..=l).map(|k| format!("ev_{k}")).collect();
    let rows: Vec<Vec<String>> = b
        .vectors
        .row_iter()
        .map(|r| r.iter().map(|v| num(*v)).collect())
        .collect();
    write_csv(&out.join("basis.csv"), &headers, &rows)?;
    let rows: Vec<Vec<String>> = b.eigenvalues.iter().map(|v| vec![num(*v)]).collect();
    write_csv(
        &out.join("eigenvalues.csv"),
        &["eigenvalue".to_string()],
        &rows,
    )?;
    println!(
        "extracted {l} eigenpairs from {} sites (threshold {})",
        b.n_sites(),
        cfg.threshold
    );
    Ok(())
}

pub fn transform_check(cfg: &RunConfig) -> Result<()> {
    let col = match (&cfg.column, &cfg.response) {
        (Some(c), _) | (None, Some(c)) => c.as_str(),
        _ => {
            return Err(CliError::Config(
                "transform-check needs 'column' or 'response'".into(),
            ))
        }
    };
    let depth = cfg.tr_num.unwrap_or(3);
    let spec = cfg.transform(depth)?;
    let table = Table::read(cfg.data_path()?)?;
    let y = if spec.is_count() {
        table.counts(col)?
    } else {
        table.numeric(col)?
    };
    if y.len() < MIN_TRANSFORM_CHECK {
        return Err(CliError::Data(format!(
            "insufficient data: {} observations, at least {MIN_TRANSFORM_CHECK} needed",
            y.len()
        )));
    }
    let path = fit_chain_path(&y, &spec, None, cfg.parallelism())?;
    let mut rows = Vec::new();
    println!(
        "{:>3}  {:>12}  {:>15}  {:>14}  parameters",
        "D", "skewness", "excess kurtosis", "loglik"
    );
    for (d, fit) in path.iter().enumerate() {
        let (s, k) = geowarp::stats::skew_kurtosis(&fit.z);
        let names = geowarp::TransformSpec { tr_num: d, ..spec }.param_names();
        let params: Vec<String> = names
            .iter()
            .zip(&fit.params)
            .map(|(n, v)| format!("{n}={v:.6}"))
            .collect();
        println!(
            "{d:>3}  {s:>12.6}  {k:>15.6}  {:>14.4}  {}",
            fit.loglik,
            params.join(" ")
        );
        rows.push(vec![
            d.to_string(),
            num(s),
            num(k),
            num(fit.loglik),
            params.join(";"),
        ]);
    }
    let out = out_dir(cfg)?;
    let headers = ["D", "skewness", "excess_kurtosis", "loglik", "parameters"].map(String::from);
    write_csv(&out.join("transform_check.csv"), &headers, &rows)
}
