//! Report files. Money is written to 0.1 M€, ratios to 0.01, fractions and
//! parameter settings to four places; keys and rows follow a fixed order so
//! identical bundles give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use rust_decimal::prelude::FromPrimitive;
use rust_decimal::{Decimal, RoundingStrategy};
use serde_json::{json, Map, Number, Value};
use thiserror::Error;

use super::config::RunMode;
use super::fixtures::Anomaly;
use super::pipeline::ReportBundle;
use crate::benefits::Stream;
use crate::model::MoneyM;
use crate::monte_carlo::McSummary;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {reason}")]
    IoFailure { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Json,
    Plotdata,
}

fn fixed(v: Decimal, dp: u32) -> String {
    format!(
        "{:.*}",
        dp as usize,
        v.round_dp_with_strategy(dp, RoundingStrategy::MidpointAwayFromZero)
    )
}

fn fixed_f64(v: f64, dp: u32) -> String {
    match Decimal::from_f64(v) {
        Some(d) => fixed(d, dp),
        None => "NaN".to_string(),
    }
}

pub fn money(v: MoneyM) -> String {
    fixed(v.value(), 1)
}

pub fn ratio(v: Option<f64>) -> String {
    v.map(|x| fixed_f64(x, 2)).unwrap_or_default()
}

pub fn frac(v: f64) -> String {
    fixed_f64(v, 4)
}

fn num(s: &str) -> Value {
    s.parse::<f64>()
        .ok()
        .and_then(Number::from_f64)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn jm(v: MoneyM) -> Value {
    num(&money(v))
}

fn jr(v: Option<f64>) -> Value {
    v.map(|x| num(&fixed_f64(x, 2))).unwrap_or(Value::Null)
}

fn jf(v: f64) -> Value {
    num(&frac(v))
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), ReportError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| ReportError::IoFailure {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), ReportError> {
        let err = |e: csv::Error| ReportError::IoFailure {
            path: name.to_string(),
            reason: e.to_string(),
        };
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(&r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::IoFailure {
            path: name.to_string(),
            reason: e.to_string(),
        })?;
        self.put(name, &bytes)
    }
}

fn mode_name(m: RunMode) -> &'static str {
    match m {
        RunMode::Fixture => "fixture",
        RunMode::Formula => "formula",
    }
}

fn opt_year(y: Option<i32>) -> String {
    y.map(|y| y.to_string()).unwrap_or_default()
}

fn opt_interp(y: Option<f64>) -> String {
    y.map(|y| fixed_f64(y, 2)).unwrap_or_default()
}

fn stream_annual_rows(b: &ReportBundle) -> Vec<Vec<String>> {
    let axis = *b.stream_table.axis();
    let totals = b.stream_table.annual_totals();
    axis.years()
        .map(|y| {
            let mut row = vec![y.to_string()];
            for s in Stream::ALL {
                row.push(money(
                    b.stream_table.stream_series(s).get(y).copied().unwrap_or(MoneyM::ZERO),
                ));
            }
            row.push(money(totals.get(y).copied().unwrap_or(MoneyM::ZERO)));
            row
        })
        .collect()
}

fn stream_header() -> Vec<&'static str> {
    let mut h = vec!["year"];
    h.extend(Stream::ALL.iter().map(|s| s.code()));
    h.push("total");
    h
}

fn mc_json(s: &McSummary) -> Value {
    json!({
        "n_trials": s.n_trials,
        "npv": {
            "mean": jm(s.npv.mean),
            "sd": num(&fixed_f64(s.npv.sd, 1)),
            "p5": jm(s.npv.p5),
            "p50": jm(s.npv.p50),
            "p95": jm(s.npv.p95),
        },
        "bcr": s.bcr.as_ref().map(|r| json!({
            "mean": jr(Some(r.mean)),
            "sd": jr(Some(r.sd)),
            "p5": jr(Some(r.p5)),
            "p50": jr(Some(r.p50)),
            "p95": jr(Some(r.p95)),
        })),
        "prob_npv_pos": jf(s.prob_npv_pos),
        "prob_bcr_gt1": jf(s.prob_bcr_gt1),
        "histogram": {
            "edges": s.histogram.edges.iter().map(|e| num(&fixed_f64(*e, 1))).collect::<Vec<_>>(),
            "counts": s.histogram.counts,
        },
    })
}

fn anomaly_json(a: &Anomaly) -> Value {
    match a {
        Anomaly::ColumnDip {
            stream,
            year,
            value,
            neighbour_mean,
        } => {
            json!({"kind": "column_dip", "stream": stream.code(), "year": year, "value": jm(*value), "neighbour_mean": jm(*neighbour_mean)})
        }
        Anomaly::RowTotal {
            year,
            printed,
            component_sum,
        } => json!({"kind": "row_total", "year": year, "printed": jm(*printed), "component_sum": jm(*component_sum)}),
    }
}

/// JSON document with every report section.
pub fn report_json(b: &ReportBundle) -> Value {
    let h = &b.headline;
    let mut root = Map::new();
    root.insert("mode".into(), json!(mode_name(b.mode)));
    root.insert("discount_rate".into(), num(&fixed(b.discount.rate, 4)));
    root.insert("base_year".into(), json!(b.discount.base_year));
    root.insert(
        "headline".into(),
        json!({
            "pv_benefits": jm(h.pv_benefits),
            "pv_costs": jm(h.pv_costs),
            "npv": jm(h.npv),
            "bcr": jr(h.bcr),
            "payback_eoy": h.payback_eoy,
            "payback_interp": h.payback_interp.map(|y| num(&fixed_f64(y, 2))),
        }),
    );
    root.insert(
        "annual".into(),
        Value::Array(
            h.annual
                .iter()
                .map(|r| {
                    json!({"year": r.year, "benefits": jm(r.benefits), "costs": jm(r.costs), "net": jm(r.net),
                           "discounted_net": jm(r.discounted_net), "cumulative": jm(r.cumulative)})
                })
                .collect(),
        ),
    );
    root.insert(
        "streams".into(),
        Value::Array(
            b.streams
                .iter()
                .map(|s| json!({"stream": s.stream.code(), "pv": jm(s.pv), "reference": s.reference.map(jm)}))
                .collect(),
        ),
    );
    root.insert(
        "countries".into(),
        Value::Array(
            b.countries
                .iter()
                .map(|c| {
                    json!({
                        "country": c.country.as_str(),
                        "pv_benefits": jm(c.result.pv_benefits),
                        "pv_costs": jm(c.result.pv_costs),
                        "npv": jm(c.result.npv),
                        "bcr": jr(c.result.bcr),
                        "payback_eoy": c.result.payback_eoy,
                        "monte_carlo": c.monte_carlo.as_ref().map(mc_json),
                    })
                })
                .collect(),
        ),
    );
    let costs = &b.costs;
    root.insert(
        "costs".into(),
        json!({
            "capex": costs.schedule.capex.values().iter().map(|v| jm(*v)).collect::<Vec<_>>(),
            "opex": costs.schedule.opex.values().iter().map(|v| jm(*v)).collect::<Vec<_>>(),
            "one_time": jm(costs.schedule.one_time),
            "total": jm(costs.schedule.total()),
            "core_scale_factor": num(&fixed(costs.core_scale_factor, 4)),
            "core_ai_share": jf(costs.core_ai_share),
            "opex_ai_share": jf(costs.opex_ai_share),
            "opex_decay": jf(costs.opex_decay),
            "unit_costs": costs.unit_costs.map(|u| json!({
                "ev_eur": num(&fixed_f64(u.ev_eur, 1)),
                "et_eur": num(&fixed_f64(u.et_eur, 1)),
                "res_eur_per_mw": num(&fixed_f64(u.res_eur_per_mw, 1)),
            })),
        }),
    );
    root.insert(
        "scenarios".into(),
        Value::Array(
            b.scenarios
                .iter()
                .map(|s| {
                    json!({"name": s.name, "npv": jm(s.npv), "bcr": jr(s.bcr),
                           "reference_npv": s.reference_npv.map(jm), "reference_bcr": s.reference_bcr.map(|r| jr(Some(r)))})
                })
                .collect(),
        ),
    );
    root.insert(
        "tornado".into(),
        Value::Array(
            b.tornado
                .iter()
                .map(|t| {
                    json!({"parameter": t.parameter.name(), "low": jf(t.low), "high": jf(t.high),
                           "npv_low": jm(t.npv_low), "npv_high": jm(t.npv_high), "range": jm(t.range)})
                })
                .collect(),
        ),
    );
    root.insert(
        "discount_sweep".into(),
        Value::Array(
            b.discount_sweep
                .iter()
                .map(|p| json!({"rate": num(&fixed(p.rate, 4)), "npv": jm(p.npv), "bcr": jr(p.bcr)}))
                .collect(),
        ),
    );
    root.insert(
        "monte_carlo".into(),
        b.monte_carlo
            .as_ref()
            .map(|m| mc_json(&m.summary))
            .unwrap_or(Value::Null),
    );
    root.insert(
        "fixture_check".into(),
        b.fixture_check
            .as_ref()
            .map(|c| {
                json!({
                    "anomalies": c.anomalies.iter().map(anomaly_json).collect::<Vec<_>>(),
                    "stream_fidelity": c.stream_fidelity.iter().map(|s| json!({
                        "stream": s.stream.code(),
                        "reference": jm(s.reference),
                        "raw_sum": jm(s.raw_sum),
                        "repaired_sum": jm(s.repaired_sum),
                        "raw_deviation": jf(s.raw_deviation),
                        "repaired_deviation": jf(s.repaired_deviation),
                        "within_tolerance": s.within_tolerance,
                    })).collect::<Vec<_>>(),
                    "projection_cells_outside_tolerance": c.projection_drift.iter().filter(|p| !p.within_tolerance).count(),
                })
            })
            .unwrap_or(Value::Null),
    );
    root.insert(
        "annotations".into(),
        Value::Array(
            b.annotations
                .iter()
                .map(|a| json!({"id": a.id, "message": a.message}))
                .collect(),
        ),
    );
    Value::Object(root)
}

fn write_csv(w: &mut Writer, b: &ReportBundle) -> Result<(), ReportError> {
    let h = &b.headline;
    w.csv(
        "headline.csv",
        &["metric", "value"],
        vec![
            vec!["mode".into(), mode_name(b.mode).into()],
            vec!["discount_rate".into(), fixed(b.discount.rate, 4)],
            vec!["pv_benefits".into(), money(h.pv_benefits)],
            vec!["pv_costs".into(), money(h.pv_costs)],
            vec!["npv".into(), money(h.npv)],
            vec!["bcr".into(), ratio(h.bcr)],
            vec!["payback_eoy".into(), opt_year(h.payback_eoy)],
            vec!["payback_interp".into(), opt_interp(h.payback_interp)],
        ],
    )?;
    w.csv(
        "annual.csv",
        &["year", "benefits", "costs", "net", "discounted_net", "cumulative"],
        h.annual
            .iter()
            .map(|r| {
                vec![
                    r.year.to_string(),
                    money(r.benefits),
                    money(r.costs),
                    money(r.net),
                    money(r.discounted_net),
                    money(r.cumulative),
                ]
            })
            .collect(),
    )?;
    w.csv(
        "streams.csv",
        &["stream", "pv", "reference"],
        b.streams
            .iter()
            .map(|s| {
                vec![
                    s.stream.code().into(),
                    money(s.pv),
                    s.reference.map(money).unwrap_or_default(),
                ]
            })
            .collect(),
    )?;
    w.csv("stream_annual.csv", &stream_header(), stream_annual_rows(b))?;
    w.csv(
        "countries.csv",
        &[
            "country",
            "pv_benefits",
            "pv_costs",
            "npv",
            "bcr",
            "payback_eoy",
            "mc_mean_npv",
            "mc_p5_npv",
            "mc_p95_npv",
            "mc_prob_npv_pos",
        ],
        b.countries
            .iter()
            .map(|c| {
                let mc = c.monte_carlo.as_ref();
                vec![
                    c.country.to_string(),
                    money(c.result.pv_benefits),
                    money(c.result.pv_costs),
                    money(c.result.npv),
                    ratio(c.result.bcr),
                    opt_year(c.result.payback_eoy),
                    mc.map(|m| money(m.npv.mean)).unwrap_or_default(),
                    mc.map(|m| money(m.npv.p5)).unwrap_or_default(),
                    mc.map(|m| money(m.npv.p95)).unwrap_or_default(),
                    mc.map(|m| frac(m.prob_npv_pos)).unwrap_or_default(),
                ]
            })
            .collect(),
    )?;
    let sched = &b.costs.schedule;
    let one = sched.one_time_series();
    let totals = sched.annual_totals();
    w.csv(
        "costs.csv",
        &["year", "capex", "opex", "one_time", "total"],
        sched
            .axis()
            .years()
            .map(|y| {
                let g = |s: &crate::model::YearSeries<MoneyM>| money(s.get(y).copied().unwrap_or(MoneyM::ZERO));
                vec![y.to_string(), g(&sched.capex), g(&sched.opex), g(&one), g(&totals)]
            })
            .collect(),
    )?;
    w.csv(
        "capex_core_items.csv",
        &["item", "pv", "ai_related"],
        b.costs
            .core_items
            .iter()
            .map(|l| vec![l.name.clone(), fixed(l.pv_meur, 2), l.ai_related.to_string()])
            .collect(),
    )?;
    w.csv(
        "opex_categories.csv",
        &["category", "share", "first_year", "ai_related"],
        b.costs
            .opex_categories
            .iter()
            .zip(&b.costs.opex_breakdown_first_year)
            .map(|(c, (_, v))| vec![c.name.clone(), frac(c.share), money(*v), c.ai_related.to_string()])
            .collect(),
    )?;
    if !b.scenarios.is_empty() {
        w.csv(
            "scenarios.csv",
            &["scenario", "npv", "bcr", "reference_npv", "reference_bcr"],
            b.scenarios
                .iter()
                .map(|s| {
                    vec![
                        s.name.clone(),
                        money(s.npv),
                        ratio(s.bcr),
                        s.reference_npv.map(money).unwrap_or_default(),
                        ratio(s.reference_bcr),
                    ]
                })
                .collect(),
        )?;
    }
    if !b.tornado.is_empty() {
        w.csv(
            "tornado.csv",
            &["parameter", "low", "high", "npv_low", "npv_high", "range"],
            b.tornado
                .iter()
                .map(|t| {
                    vec![
                        t.parameter.name().into(),
                        frac(t.low),
                        frac(t.high),
                        money(t.npv_low),
                        money(t.npv_high),
                        money(t.range),
                    ]
                })
                .collect(),
        )?;
        w.csv(
            "discount_sweep.csv",
            &["rate", "npv", "bcr"],
            b.discount_sweep
                .iter()
                .map(|p| vec![fixed(p.rate, 4), money(p.npv), ratio(p.bcr)])
                .collect(),
        )?;
    }
    if let Some(mc) = &b.monte_carlo {
        let s = &mc.summary;
        let bcr = s.bcr.as_ref();
        let rows = vec![
            vec!["n_trials".into(), s.n_trials.to_string(), String::new()],
            vec!["mean".into(), money(s.npv.mean), ratio(bcr.map(|r| r.mean))],
            vec!["sd".into(), fixed_f64(s.npv.sd, 1), ratio(bcr.map(|r| r.sd))],
            vec!["p5".into(), money(s.npv.p5), ratio(bcr.map(|r| r.p5))],
            vec!["p50".into(), money(s.npv.p50), ratio(bcr.map(|r| r.p50))],
            vec!["p95".into(), money(s.npv.p95), ratio(bcr.map(|r| r.p95))],
            vec!["prob_npv_pos".into(), frac(s.prob_npv_pos), String::new()],
            vec!["prob_bcr_gt1".into(), String::new(), frac(s.prob_bcr_gt1)],
        ];
        w.csv("monte_carlo.csv", &["statistic", "npv", "bcr"], rows)?;
        if let Some(trials) = &mc.trials {
            let mut header = vec!["trial".to_string()];
            header.extend(mc.params.iter().map(|p| p.name().to_string()));
            header.push("npv".into());
            header.push("bcr".into());
            let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
            w.csv(
                "mc_trials.csv",
                &header_ref,
                trials
                    .iter()
                    .map(|t| {
                        let mut r = vec![t.trial.to_string()];
                        r.extend(t.params.iter().map(|p| fixed_f64(*p, 6)));
                        r.push(money(t.npv));
                        r.push(ratio(t.bcr));
                        r
                    })
                    .collect(),
            )?;
        }
    }
    if let Some(c) = &b.fixture_check {
        w.csv(
            "fixture_check.csv",
            &[
                "stream",
                "reference",
                "raw_sum",
                "repaired_sum",
                "raw_deviation",
                "repaired_deviation",
                "within_tolerance",
            ],
            c.stream_fidelity
                .iter()
                .map(|s| {
                    vec![
                        s.stream.code().into(),
                        money(s.reference),
                        money(s.raw_sum),
                        money(s.repaired_sum),
                        frac(s.raw_deviation),
                        frac(s.repaired_deviation),
                        s.within_tolerance.to_string(),
                    ]
                })
                .collect(),
        )?;
    }
    w.csv(
        "annotations.csv",
        &["id", "message"],
        b.annotations
            .iter()
            .map(|a| vec![a.id.clone(), a.message.clone()])
            .collect(),
    )
}

fn write_plotdata(w: &mut Writer, b: &ReportBundle) -> Result<(), ReportError> {
    w.csv(
        "plot_cumulative.csv",
        &["year", "discounted_net", "cumulative"],
        b.headline
            .annual
            .iter()
            .map(|r| vec![r.year.to_string(), money(r.discounted_net), money(r.cumulative)])
            .collect(),
    )?;
    w.csv("plot_streams.csv", &stream_header(), stream_annual_rows(b))?;
    let mut rows = Vec::new();
    for (c, p) in b.projections.iter() {
        for y in b.projections.axis().years() {
            rows.push(vec![
                y.to_string(),
                c.to_string(),
                fixed_f64(p.ev_stock.get(y).copied().unwrap_or(0.0), 1),
                fixed_f64(p.et_stock.get(y).copied().unwrap_or(0.0), 1),
                fixed_f64(p.res_capacity.get(y).copied().unwrap_or(0.0), 2),
            ]);
        }
    }
    w.csv(
        "plot_projections.csv",
        &["year", "country", "ev_stock", "et_stock", "res_capacity"],
        rows,
    )?;
    if !b.tornado.is_empty() {
        let base = money(b.headline.npv);
        w.csv(
            "plot_tornado.csv",
            &["parameter", "npv_low", "npv_base", "npv_high"],
            b.tornado
                .iter()
                .map(|t| {
                    vec![
                        t.parameter.name().into(),
                        money(t.npv_low),
                        base.clone(),
                        money(t.npv_high),
                    ]
                })
                .collect(),
        )?;
    }
    if let Some(mc) = &b.monte_carlo {
        let h = &mc.summary.histogram;
        w.csv(
            "plot_histogram.csv",
            &["bin_low", "bin_high", "count"],
            h.counts
                .iter()
                .enumerate()
                .map(|(i, c)| vec![fixed_f64(h.edges[i], 1), fixed_f64(h.edges[i + 1], 1), c.to_string()])
                .collect(),
        )?;
    }
    Ok(())
}

/// Writes the requested formats into `dir` and returns the written paths.
pub fn emit_report(bundle: &ReportBundle, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(|e| ReportError::IoFailure {
        path: dir.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut w = Writer {
        dir: dir.to_path_buf(),
        written: Vec::new(),
    };
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    for f in formats {
        match f {
            Format::Csv => write_csv(&mut w, bundle)?,
            Format::Json => {
                let mut text =
                    serde_json::to_string_pretty(&report_json(bundle)).map_err(|e| ReportError::IoFailure {
                        path: "report.json".into(),
                        reason: e.to_string(),
                    })?;
                text.push('\n');
                w.put("report.json", text.as_bytes())?;
            }
            Format::Plotdata => write_plotdata(&mut w, bundle)?,
        }
    }
    Ok(w.written)
}

/// Headline value of `key` from a written `report.json`, for quick checks.
pub fn headline_value(report: &Value, key: &str) -> Option<f64> {
    report.get("headline")?.get(key)?.as_f64()
}
