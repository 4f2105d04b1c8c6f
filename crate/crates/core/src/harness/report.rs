use std::fmt::Write as _;

use thiserror::Error;

use crate::adversary::{enumerate_profiles, PayoffVector, StrategyProfile};
use crate::ledger::Tick;
use crate::model::{classify, derive_gkt, fmt_set, ExchangeClassification, GaeInstance, GktPartition, Ledger, Verdict};
use crate::protocol::{build_plan, run, ProtocolError, ProtocolPlan, RunConfig, RunOutcome};

use super::scenario::{Scenario, ScenarioError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    /// Pipe-delimited lines; event lines use the ledger log format.
    Lines,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "lines" => Ok(Format::Lines),
            _ => Err(format!("unknown format {s:?} (text or lines)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Clone, Debug)]
pub struct RunBlock {
    pub label: String,
    pub outcome: RunOutcome,
    pub payoffs: PayoffVector,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub title: Option<String>,
    pub warnings: Vec<String>,
    pub instance: GaeInstance,
    pub classification: ExchangeClassification,
    pub gkt: Vec<GktPartition>,
    pub plan: Option<ProtocolPlan>,
    pub runs: Vec<RunBlock>,
}

impl Report {
    pub fn any_violated(&self) -> bool {
        self.runs.iter().any(|r| r.outcome.any_violated())
    }
}

/// Classifies the scenario's instance and, unless it asks for
/// classification only, runs it once or over every enumerated profile.
pub fn run_scenario(scenario: &Scenario) -> Result<Report, HarnessError> {
    let instance = scenario.instance()?;
    let mut warnings = Vec::new();
    let classification = classify(&instance);
    let gkt = Ledger::BOTH.iter().map(|l| derive_gkt(&instance, *l)).collect();
    let mut report = Report {
        title: scenario.title.clone(),
        warnings: Vec::new(),
        instance: instance.clone(),
        classification,
        gkt,
        plan: None,
        runs: Vec::new(),
    };
    if scenario.classify_only {
        return Ok(report);
    }
    if scenario.protocol.is_none() {
        warnings.push("no protocol given, using MPHTLC".to_string());
    }
    let protocol = scenario.protocol_or_default();
    let cfg = RunConfig {
        t: scenario.t,
        lock_mode: scenario.lock_mode,
        atomic_gults: scenario.atomic_gults,
        seed: scenario.seed,
        ..RunConfig::default()
    };
    report.plan = Some(build_plan(&instance, protocol, cfg.t, cfg.lock_mode)?);
    let profiles: Vec<(String, StrategyProfile)> = match scenario.enumerate {
        Some(bound) => enumerate_profiles(&instance, protocol, cfg.t, bound)
            .map(|p| (p.label(), p))
            .collect(),
        None => {
            let mut p = StrategyProfile::all_honest(&instance.parties);
            for (who, s) in &scenario.strategies {
                p = p.with(who, s.clone());
            }
            let label = match &scenario.attack {
                Some(a) => {
                    p = p.with(&a.colluder, a.strategy());
                    a.name()
                }
                None => p.label(),
            };
            vec![(label, p)]
        }
    };
    for (label, profile) in profiles {
        let outcome = run(&instance, protocol, &cfg, &profile)?;
        let payoffs = PayoffVector::of(instance.parties.iter().cloned(), &[&outcome.final1, &outcome.final2]);
        report.runs.push(RunBlock {
            label,
            outcome,
            payoffs,
        });
    }
    report.warnings = warnings;
    Ok(report)
}

fn set(s: &crate::model::OwnerSet) -> String {
    fmt_set(s)
}

fn offsets(plan: &ProtocolPlan) -> Vec<(String, Tick)> {
    plan.schedule
        .per_asset
        .iter()
        .map(|(a, t)| (a.to_string(), *t))
        .collect()
}

pub fn emit_report(report: &Report, format: Format) -> String {
    match format {
        Format::Lines => emit_lines(report),
        Format::Text => emit_text(report),
    }
}

fn emit_lines(r: &Report) -> String {
    let mut out = String::new();
    if let Some(t) = &r.title {
        let _ = writeln!(out, "title|{t}");
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning|{w}");
    }
    let c = &r.classification;
    let _ = writeln!(out, "class|{}|{}|{}", c.kind, set(&c.s12), set(&c.s21));
    for part in &r.gkt {
        for (a, g) in &part.rows {
            let _ = writeln!(
                out,
                "gkt|{}|{}|{}|{}|{}",
                part.ledger,
                a,
                set(&g.givers),
                set(&g.keepers),
                set(&g.takers)
            );
        }
    }
    if let Some(plan) = &r.plan {
        let _ = writeln!(
            out,
            "plan|{}|{}|T={}",
            plan.protocol,
            plan.lock_mode.as_str(),
            plan.schedule.base
        );
        for (a, t) in offsets(plan) {
            let _ = writeln!(out, "schedule|{a}|{t}");
        }
        for s in &plan.steps {
            let _ = writeln!(out, "step|{}|{}|{}", s.number, s.action, set(&s.parties));
        }
    }
    for run in &r.runs {
        let _ = writeln!(out, "run|{}", run.label);
        for e in &run.outcome.events {
            let _ = writeln!(out, "{}", e.to_line());
        }
        for v in &run.outcome.verdicts {
            let _ = writeln!(out, "verdict|{}|{}", v.party, v.verdict);
        }
        for (p, v) in &run.payoffs.per_party {
            let _ = writeln!(out, "payoff|{p}|{v}");
        }
    }
    out
}

fn emit_text(r: &Report) -> String {
    let mut out = String::new();
    if let Some(t) = &r.title {
        let _ = writeln!(out, "{t}\n");
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let c = &r.classification;
    let _ = writeln!(
        out,
        "classification: {}  S12={}  S21={}",
        c.kind,
        set(&c.s12),
        set(&c.s21)
    );
    let _ = writeln!(out, "    {:<12}{:<14}{:<14}takers", "asset", "givers", "keepers");
    for part in &r.gkt {
        for (a, g) in &part.rows {
            let _ = writeln!(
                out,
                "{:<4}{:<12}{:<14}{:<14}{}",
                part.ledger.to_string(),
                a.to_string(),
                set(&g.givers),
                set(&g.keepers),
                set(&g.takers)
            );
        }
    }
    if let Some(plan) = &r.plan {
        let _ = writeln!(
            out,
            "\n{} ({}), T={}",
            plan.protocol,
            plan.lock_mode.as_str(),
            plan.schedule.base
        );
        let sched: Vec<String> = offsets(plan).into_iter().map(|(a, t)| format!("{a}+{t}")).collect();
        let _ = writeln!(out, "timeouts: {}", sched.join(" "));
        for s in &plan.steps {
            let _ = writeln!(out, "  {}. {:<9} {}", s.number, s.action.to_string(), set(&s.parties));
        }
    }
    for run in &r.runs {
        let _ = writeln!(out, "\nrun {}", run.label);
        for e in &run.outcome.events {
            let assets = if e.assets.is_empty() {
                "-".to_string()
            } else {
                e.assets.join(",")
            };
            let details: Vec<String> = e
                .details
                .iter()
                .filter(|(k, _)| k != "hash" && k != "preimage" && k != "consents")
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            let _ = writeln!(
                out,
                "  t={:<3} {:<8} {:<8} {:<10} {}",
                e.tick,
                e.source.to_string(),
                e.kind.as_str(),
                assets,
                details.join(" ")
            );
        }
        let verdicts: Vec<String> = run
            .outcome
            .verdicts
            .iter()
            .map(|v| format!("{}={}", v.party, v.verdict))
            .collect();
        let _ = writeln!(out, "  verdicts: {}", verdicts.join(" "));
        let _ = writeln!(out, "  payoffs:  {}", run.payoffs);
        let bad = run
            .outcome
            .verdicts
            .iter()
            .filter(|v| v.verdict == Verdict::Violated)
            .count();
        if bad > 0 {
            let _ = writeln!(
                out,
                "  atomicity violated for {bad} part{}",
                if bad == 1 { "y" } else { "ies" }
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::parse_scenario;

    const SWAP: &str = "L1: M: {X,W} -> {Y}\nL2: N: {Y} -> {X,W}\n";

    #[test]
    fn missing_protocol_warns() {
        let r = run_scenario(&parse_scenario(SWAP).unwrap()).unwrap();
        let lines = emit_report(&r, Format::Lines);
        assert!(lines.starts_with("warning|no protocol given, using MPHTLC\nclass|FULL_GCLS_MIX|"));
        assert!(!r.any_violated());
    }

    #[test]
    fn classification_only() {
        let r = run_scenario(&parse_scenario(&format!("{SWAP}classify_only: true\n")).unwrap()).unwrap();
        let lines = emit_report(&r, Format::Lines);
        assert_eq!(
            lines,
            "class|FULL_GCLS_MIX|{W,X}|{Y}\ngkt|L1|M|{W,X}|{}|{Y}\ngkt|L2|N|{Y}|{}|{W,X}\n"
        );
    }

    #[test]
    fn attack_is_reported() {
        let text = format!("{SWAP}protocol: HTLC_MS\nattack: ms_collusion(W,Y)\n");
        let r = run_scenario(&parse_scenario(&text).unwrap()).unwrap();
        assert!(r.any_violated());
        let lines = emit_report(&r, Format::Lines);
        assert!(lines.contains("run|ms_collusion(W,Y)\n"));
        assert!(lines.contains("verdict|X|VIOLATED\n"));
        assert!(emit_report(&r, Format::Text).contains("atomicity violated for 3 parties"));
    }
}
