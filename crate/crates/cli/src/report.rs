//! Plain-text fit report laid out in the customary block format.

use std::fmt::Write;

use geowarp::inference::{MarginalEffects, Moments, SignificanceCounts};
use geowarp::stats::Summary;
use geowarp::transform::Regime;
use geowarp::FittedModel;

pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v}")
    }
}

fn g(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e7) {
        format!("{v:.6e}")
    } else {
        format!("{v:.7}")
    }
}

fn table(out: &mut String, corner: &str, cols: &[String], rows: &[(String, Vec<String>)]) {
    let lw = rows
        .iter()
        .map(|r| r.0.len())
        .chain([corner.len()])
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = (0..cols.len())
        .map(|j| {
            rows.iter()
                .map(|r| r.1[j].len())
                .chain([cols[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let _ = write!(out, "{corner:<lw$}");
    for (c, w) in cols.iter().zip(&widths) {
        let _ = write!(out, "  {c:>w$}");
    }
    out.push('\n');
    for (label, cells) in rows {
        let _ = write!(out, "{label:<lw$}");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
    }
}

fn heading(out: &mut String, title: &str) {
    let _ = writeln!(out, "\n----{title}-----\n");
}

fn regime_name(m: &FittedModel) -> String {
    let t = &m.spec.transform;
    let name = match t.regime() {
        Regime::Gaussian => "Gaussian (no transformation)",
        Regime::BoxCox => "Box-Cox",
        Regime::Sal => "SAL",
        Regime::BoxCoxSal => "Box-Cox + SAL",
        Regime::Count => "log-Gaussian count",
        Regime::CountSal => "log-Gaussian count + SAL",
    };
    format!("{name}, tr_num = {}", t.tr_num)
}

fn summary_rows(names: &[String], s: &[Summary]) -> (Vec<String>, Vec<(String, Vec<String>)>) {
    let stat = |f: fn(&Summary) -> f64| s.iter().map(|v| g(f(v))).collect::<Vec<_>>();
    (
        names.to_vec(),
        vec![
            ("Min.".into(), stat(|v| v.min)),
            ("1st Qu.".into(), stat(|v| v.q1)),
            ("Median".into(), stat(|v| v.median)),
            ("Mean".into(), stat(|v| v.mean)),
            ("3rd Qu.".into(), stat(|v| v.q3)),
            ("Max.".into(), stat(|v| v.max)),
        ],
    )
}

pub struct ReportInput<'a> {
    pub model: &'a FittedModel,
    pub response: &'a str,
    pub data_sha256: &'a str,
    pub moments: Moments,
    pub significance: &'a [SignificanceCounts],
    pub marginal: &'a MarginalEffects,
}

pub fn render(r: &ReportInput) -> String {
    let m = r.model;
    let mut out = String::new();
    let covs = m.design.fixed_names[1..].join(" + ");
    let _ = writeln!(
        out,
        "Call:\n{} ~ {}  [{}]",
        r.response,
        if covs.is_empty() { "1".into() } else { covs },
        regime_name(m)
    );
    let _ = writeln!(
        out,
        "n = {}, Moran eigenvectors = {}, data sha256 = {}",
        m.n(),
        m.basis.n_vectors(),
        r.data_sha256
    );

    let coef_row = |c: &geowarp::model::Coefficient| {
        (c.name.clone(), vec![g(c.estimate), g(c.se), g(c.z), g(c.p)])
    };
    let coef_cols: Vec<String> = ["Estimate", "SE", "t_value", "p_value"]
        .map(String::from)
        .to_vec();
    match &m.svc {
        Some(svc) => {
            let title = if m.spec.nvc_enabled {
                "Spatially and non-spatially varying coefficients on x (summary)"
            } else {
                "Spatially varying coefficients on x (summary)"
            };
            heading(&mut out, title);
            let names: Vec<String> = svc.iter().map(|s| s.name.clone()).collect();
            let sums: Vec<Summary> = svc.iter().map(|s| Summary::of(&s.estimate)).collect();
            let (cols, rows) = summary_rows(&names, &sums);
            out.push_str("Coefficient estimates:\n\n");
            table(&mut out, "", &cols, &rows);
            out.push_str("\nStatistical significance:\n\n");
            let sig: Vec<&SignificanceCounts> = r
                .significance
                .iter()
                .filter(|s| names.contains(&s.name))
                .collect();
            let cols: Vec<String> = sig.iter().map(|s| s.name.clone()).collect();
            let row = |label: &str, f: fn(&SignificanceCounts) -> usize| {
                (
                    label.to_string(),
                    sig.iter().map(|s| f(s).to_string()).collect(),
                )
            };
            table(
                &mut out,
                "",
                &cols,
                &[
                    row("Not significant", |s| s.not_significant),
                    row("Significant (10% level)", |s| s.level10),
                    row("Significant (5% level)", |s| s.level5),
                    row("Significant (1% level)", |s| s.level1),
                ],
            );
            let rows: Vec<_> = m
                .coefficients
                .iter()
                .filter(|c| m.spec.const_columns.contains(&c.name))
                .map(coef_row)
                .collect();
            if !rows.is_empty() {
                heading(&mut out, "Constant coefficients on xconst");
                table(&mut out, "", &coef_cols, &rows);
            }
        }
        None => {
            heading(&mut out, "Coefficients");
            let rows: Vec<_> = m.coefficients.iter().map(coef_row).collect();
            table(&mut out, "", &coef_cols, &rows);
        }
    }

    let v = &m.variance;
    heading(&mut out, "Variance parameters");
    if !v.spatial.is_empty() {
        out.push_str(if m.svc.is_some() {
            "Spatial effects (coefficients on x):\n\n"
        } else {
            "Spatial effects (residuals):\n\n"
        });
        let cols: Vec<String> = v.spatial.iter().map(|s| s.name.clone()).collect();
        table(
            &mut out,
            "",
            &cols,
            &[
                (
                    "random_SE".into(),
                    v.spatial.iter().map(|s| g(s.random_se)).collect(),
                ),
                (
                    "Moran.I/max(Moran.I)".into(),
                    v.spatial
                        .iter()
                        .map(|s| s.moran_ratio.map_or("NA".into(), g))
                        .collect(),
                ),
            ],
        );
    }
    if !v.nvc.is_empty() {
        out.push_str("\nNon-spatial effects (coefficients on x):\n\n");
        let cols: Vec<String> = v.nvc.iter().map(|s| s.0.clone()).collect();
        table(
            &mut out,
            "",
            &cols,
            &[("random_SE".into(), v.nvc.iter().map(|s| g(s.1)).collect())],
        );
    }
    if let Some(sg) = v.group_sigma {
        out.push_str("\nGroup effects:\n\n");
        table(
            &mut out,
            "",
            &["xgroup".to_string()],
            &[("random_SE".into(), vec![g(sg)])],
        );
        if let Some(ge) = &m.group_effects {
            out.push('\n');
            let rows: Vec<_> = ge
                .iter()
                .map(|e| {
                    (
                        e.level.clone(),
                        vec![g(e.estimate), e.se.map_or("NA".into(), g)],
                    )
                })
                .collect();
            table(&mut out, "", &["Estimate".into(), "SE".into()], &rows);
        }
    }

    heading(&mut out, "Estimated probability distribution of y");
    table(
        &mut out,
        "",
        &["Estimates".to_string()],
        &[
            ("skewness".into(), vec![g(r.moments.skewness)]),
            ("excess kurtosis".into(), vec![g(r.moments.excess_kurtosis)]),
        ],
    );
    if let Some(l) = m.chain.boxcox_lambda() {
        let _ = writeln!(out, "(Box-Cox parameter: {})", g(l));
    }
    let sal = m.chain.sal_layers();
    if !sal.is_empty() {
        out.push_str("\nSAL parameters:\n\n");
        let rows: Vec<_> = sal
            .iter()
            .enumerate()
            .map(|(d, p)| {
                (
                    format!("layer {}", d + 1),
                    vec![g(p.theta1), g(p.theta2), g(p.theta3), g(p.theta4)],
                )
            })
            .collect();
        let cols = ["theta1", "theta2", "theta3", "theta4"].map(String::from);
        table(&mut out, "", &cols, &rows);
    }

    heading(&mut out, "Error statistics");
    let c = &m.criteria;
    let f = &m.fit_stats;
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    if m.is_count() {
        if let Some(d) = f.dispersion {
            rows.push(("dispersion parameter".into(), vec![g(d)]));
        }
        if let Some(d) = f.deviance_explained {
            rows.push(("deviance explained (%)".into(), vec![g(d)]));
        }
        rows.push((
            "rlogLik (Gaussian approximation)".into(),
            vec![g(c.rloglik)],
        ));
    } else {
        rows.push(("resid_SE".into(), vec![g(f.resid_se)]));
        rows.push(("adjR2(cond)".into(), vec![g(f.adj_r2_cond)]));
        rows.push(("rlogLik".into(), vec![g(c.rloglik)]));
    }
    rows.push(("AIC".into(), vec![g(c.aic)]));
    rows.push(("BIC".into(), vec![g(c.bic)]));
    table(&mut out, "", &["stat".to_string()], &rows);
    let parts: Vec<String> = c
        .breakdown
        .iter()
        .map(|(k, v)| format!("{k} {v}"))
        .collect();
    let _ = writeln!(out, "\nparameters: {} ({})", c.p, parts.join(", "));
    let nm = &m.null_model;
    let _ = writeln!(
        out,
        "\nNULL model: {}\n(r)loglik: {:.3} ( AIC: {:.3}, BIC: {:.3} )",
        nm.description, nm.loglik, nm.aic, nm.bic
    );

    if !r.marginal.names.is_empty() {
        heading(&mut out, "Marginal effects from x (dy_i/dx_i) (summary)");
        let (cols, rows) = summary_rows(&r.marginal.names, &r.marginal.summaries);
        table(&mut out, "", &cols, &rows);
        let _ = writeln!(out, "\n(recommended summary: {})", r.marginal.recommended);
    }
    for w in &m.warnings {
        let _ = writeln!(out, "\nwarning: {w}");
    }
    out
}
