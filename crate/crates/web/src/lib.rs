//! Browser bindings. Every export takes scenario text and returns a JSON
//! string; failures come back as `{"error": "..."}`.

use std::collections::BTreeMap;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use mphtlc_core::harness::{parse_scenario, run_scenario, Report, Scenario};
use mphtlc_core::model::fmt_set;

const PRESETS: &[(&str, &str)] = &[
    (
        "joint_owner_swap",
        include_str!("../../core/scenarios/joint_owner_swap.scn"),
    ),
    (
        "separate_owner_swap",
        include_str!("../../core/scenarios/separate_owner_swap.scn"),
    ),
    (
        "shared_secret_collusion",
        include_str!("../../core/scenarios/shared_secret_collusion.scn"),
    ),
    (
        "shared_secret_collusion_joint",
        include_str!("../../core/scenarios/shared_secret_collusion_joint.scn"),
    ),
    (
        "per_owner_secret_relock",
        include_str!("../../core/scenarios/per_owner_secret_relock.scn"),
    ),
    (
        "per_owner_secret_relock_joint",
        include_str!("../../core/scenarios/per_owner_secret_relock_joint.scn"),
    ),
    (
        "counterparty_walks_away",
        include_str!("../../core/scenarios/counterparty_walks_away.scn"),
    ),
    ("classic_swap", include_str!("../../core/scenarios/classic_swap.scn")),
    (
        "single_transaction_batch",
        include_str!("../../core/scenarios/single_transaction_batch.scn"),
    ),
    (
        "complex_exchange",
        include_str!("../../core/scenarios/complex_exchange.scn"),
    ),
];

#[derive(Serialize)]
struct Preset {
    name: &'static str,
    text: &'static str,
}

#[derive(Serialize)]
struct GktRow {
    ledger: String,
    asset: String,
    givers: String,
    keepers: String,
    takers: String,
}

#[derive(Serialize)]
struct Classification {
    kind: String,
    s12: String,
    s21: String,
    rows: Vec<GktRow>,
}

#[derive(Serialize)]
struct EventView {
    tick: u64,
    source: String,
    kind: String,
    assets: Vec<String>,
    details: Vec<(String, String)>,
    line: String,
}

#[derive(Serialize)]
struct RunView {
    label: String,
    events: Vec<EventView>,
    verdicts: BTreeMap<String, String>,
    payoffs: BTreeMap<String, String>,
    violated: bool,
}

#[derive(Serialize)]
struct ReportView {
    title: Option<String>,
    warnings: Vec<String>,
    classification: Classification,
    protocol: Option<String>,
    schedule: BTreeMap<String, u64>,
    runs: Vec<RunView>,
}

fn view(report: &Report) -> ReportView {
    let c = &report.classification;
    let rows = report
        .gkt
        .iter()
        .flat_map(|part| {
            part.rows.iter().map(|(a, g)| GktRow {
                ledger: part.ledger.to_string(),
                asset: a.name.clone(),
                givers: fmt_set(&g.givers),
                keepers: fmt_set(&g.keepers),
                takers: fmt_set(&g.takers),
            })
        })
        .collect();
    let runs = report
        .runs
        .iter()
        .map(|r| RunView {
            label: r.label.clone(),
            events: r
                .outcome
                .events
                .iter()
                .map(|e| EventView {
                    tick: e.tick,
                    source: e.source.to_string(),
                    kind: e.kind.as_str().to_string(),
                    assets: e.assets.clone(),
                    details: e.details.clone(),
                    line: e.to_line(),
                })
                .collect(),
            verdicts: r
                .outcome
                .verdicts
                .iter()
                .map(|v| (v.party.to_string(), v.verdict.to_string()))
                .collect(),
            payoffs: r
                .payoffs
                .per_party
                .iter()
                .map(|(p, s)| (p.to_string(), s.to_string()))
                .collect(),
            violated: r.outcome.any_violated(),
        })
        .collect();
    ReportView {
        title: report.title.clone(),
        warnings: report.warnings.clone(),
        classification: Classification {
            kind: c.kind.to_string(),
            s12: fmt_set(&c.s12),
            s21: fmt_set(&c.s21),
            rows,
        },
        protocol: report.plan.as_ref().map(|p| p.protocol.to_string()),
        schedule: report
            .plan
            .iter()
            .flat_map(|p| p.schedule.per_asset.iter().map(|(a, t)| (a.name.clone(), *t)))
            .collect(),
        runs,
    }
}

fn respond(result: Result<Report, String>) -> String {
    match result {
        Ok(r) => serde_json::to_string(&view(&r)).expect("plain data"),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

fn with_scenario(text: &str, adjust: impl FnOnce(&mut Scenario) -> Result<(), String>) -> String {
    respond((|| {
        let mut sc = parse_scenario(text).map_err(|e| e.to_string())?;
        adjust(&mut sc)?;
        run_scenario(&sc).map_err(|e| e.to_string())
    })())
}

/// Built-in scenarios as `[{name, text}]`.
#[wasm_bindgen]
pub fn presets() -> String {
    let list: Vec<Preset> = PRESETS.iter().map(|&(name, text)| Preset { name, text }).collect();
    serde_json::to_string(&list).expect("plain data")
}

#[wasm_bindgen]
pub fn classify(text: &str) -> String {
    with_scenario(text, |sc| {
        sc.classify_only = true;
        Ok(())
    })
}

/// Runs the scenario as written.
#[wasm_bindgen]
pub fn run(text: &str) -> String {
    with_scenario(text, |_| Ok(()))
}

/// Runs every profile with at most `bound` deviators.
#[wasm_bindgen]
pub fn enumerate(text: &str, bound: usize) -> String {
    with_scenario(text, |sc| {
        if !sc.strategies.is_empty() || sc.attack.is_some() {
            return Err("the scenario fixes a strategy profile; remove it to enumerate".into());
        }
        sc.classify_only = false;
        sc.enumerate = Some(bound);
        Ok(())
    })
}
