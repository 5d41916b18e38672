//! Subcommand implementations. Each returns the rendered artifacts; writing
//! them out is left to the caller.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;
use welfare_core::{
    analyze_treatment, hotelling_population, optimize_choice_set, policy_welfare_with_share,
    sweep_logit, HotellingScenario, Population, Recommendation, SweepGrid, Treatment,
};

use crate::document::{parse_scenario, McOverrides, ScenarioDocument, ScenarioKind};
use crate::report::{csv_string, fmt_g, json_string};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Scenario document (JSON).
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub q_min: Option<f64>,
    #[arg(long)]
    pub q_max: Option<f64>,
    #[arg(long)]
    pub q_step: Option<f64>,
    /// Monte Carlo draws per utility type.
    #[arg(long, value_name = "N")]
    pub samples: Option<usize>,
    /// Seed for every randomized computation.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Share of a nudge's as-if cost that counts against welfare.
    #[arg(long, value_name = "REAL", default_value_t = 0.0)]
    pub eta: f64,
    /// Behavior model to use, by name (defaults to the first in the scenario).
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Welfare and regret of the scenario's choice set under one model.
    Evaluate(CommonArgs),
    /// Welfare-maximizing choice set under one model.
    Optimize(CommonArgs),
    /// Logit welfare of every choice set over a grid of q.
    Sweep(CommonArgs),
    /// Mandate versus decentralized treatment choice.
    Treatment(CommonArgs),
    /// Logit sweep of the store-location scenario (built-in defaults
    /// unless --scenario is given).
    Hotelling(CommonArgs),
}

impl Command {
    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Evaluate(a)
            | Command::Optimize(a)
            | Command::Sweep(a)
            | Command::Treatment(a)
            | Command::Hotelling(a) => a,
        }
    }
}

/// Rendered command output. `summary` holds the crossings table of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub main: String,
    pub summary: Option<String>,
    pub warnings: Vec<String>,
}

pub fn run(command: &Command) -> Result<Output, CliError> {
    let args = command.args();
    let doc = match &args.scenario {
        Some(path) => Some(parse_scenario(path)?),
        None => None,
    };
    let require = |name: &str| {
        doc.as_ref()
            .ok_or_else(|| CliError::Usage(format!("{name} requires --scenario")))
    };
    match command {
        Command::Evaluate(_) => evaluate(require("evaluate")?, args),
        Command::Optimize(_) => optimize(require("optimize")?, args),
        Command::Sweep(_) => {
            let doc = require("sweep")?;
            let pop = match doc.kind()? {
                ScenarioKind::Population(p) => p.population()?,
                ScenarioKind::Hotelling(h) => hotelling(h)?,
                ScenarioKind::Treatment(_) => return Err(mismatch("sweep", "a population or hotelling")),
            };
            sweep(&pop, grid(Some(doc), args)?, args)
        }
        Command::Treatment(_) => treatment(require("treatment")?, args),
        Command::Hotelling(_) => {
            let scenario = match &doc {
                None => HotellingScenario::reference(),
                Some(d) => match d.kind()? {
                    ScenarioKind::Hotelling(h) => h.clone(),
                    _ => return Err(mismatch("hotelling", "a hotelling")),
                },
            };
            sweep(&hotelling(&scenario)?, grid(doc.as_ref(), args)?, args)
        }
    }
}

fn mismatch(command: &str, expected: &str) -> CliError {
    CliError::Validation(format!("{command} needs {expected} scenario"))
}

fn runtime(e: welfare_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn hotelling(h: &HotellingScenario) -> Result<Population, CliError> {
    hotelling_population(h).map_err(|e| CliError::Validation(format!("hotelling: {e}")))
}

fn mc(doc: &ScenarioDocument, args: &CommonArgs) -> McOverrides {
    McOverrides {
        samples: args.samples.or(doc.mc.and_then(|m| m.samples)),
        seed: args.seed.or(doc.mc.and_then(|m| m.seed)),
    }
}

fn grid(doc: Option<&ScenarioDocument>, args: &CommonArgs) -> Result<SweepGrid, CliError> {
    let section = doc.and_then(|d| d.sweep);
    let q_min = args.q_min.or(section.map(|s| s.q_min)).unwrap_or(0.0);
    let q_max = args.q_max.or(section.map(|s| s.q_max)).unwrap_or(10.0);
    let q_step = args.q_step.or(section.map(|s| s.q_step)).unwrap_or(0.05);
    SweepGrid::range(q_min, q_max, q_step).map_err(|e| CliError::Usage(format!("q grid: {e}")))
}

fn population_section<'a>(
    doc: &'a ScenarioDocument,
    command: &str,
) -> Result<&'a crate::document::PopulationSection, CliError> {
    match doc.kind()? {
        ScenarioKind::Population(p) => Ok(p),
        _ => Err(mismatch(command, "a population")),
    }
}

#[derive(Serialize)]
struct TypeRow {
    type_label: String,
    expected_utility: f64,
    probs: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct EvaluationReport {
    model: String,
    choice_set: String,
    welfare: f64,
    regret: f64,
    idealized_optimum: f64,
    std_error: f64,
    per_type: Vec<TypeRow>,
}

fn evaluate(doc: &ScenarioDocument, args: &CommonArgs) -> Result<Output, CliError> {
    let section = population_section(doc, "evaluate")?;
    let pop = section.population()?;
    let model = section.model(args.model.as_deref(), mc(doc, args))?;
    let available = section.choice_set()?;
    let e = policy_welfare_with_share(&pop, &available, &model, args.eta).map_err(runtime)?;
    let report = EvaluationReport {
        model: model_name(section, args),
        choice_set: available.label(pop.actions()),
        welfare: e.welfare,
        regret: e.regret,
        idealized_optimum: e.idealized_optimum,
        std_error: e.std_error,
        per_type: e
            .per_type
            .iter()
            .map(|t| TypeRow {
                type_label: section.types[t.type_index]
                    .label
                    .clone()
                    .unwrap_or_else(|| (t.type_index + 1).to_string()),
                expected_utility: t.expected_utility,
                probs: available
                    .indices()
                    .iter()
                    .map(|&i| (section.actions[i].clone(), t.probs.prob(i)))
                    .collect(),
            })
            .collect(),
    };
    let main = match args.format.unwrap_or(Format::Json) {
        Format::Json => json_string(&report)?,
        Format::Csv => csv_string(
            &["model", "choice_set", "welfare", "regret", "idealized_optimum", "std_error"],
            [vec![
                report.model.clone(),
                report.choice_set.clone(),
                fmt_g(report.welfare),
                fmt_g(report.regret),
                fmt_g(report.idealized_optimum),
                fmt_g(report.std_error),
            ]],
        )?,
    };
    Ok(Output { main, summary: None, warnings: vec![] })
}

fn model_name(section: &crate::document::PopulationSection, args: &CommonArgs) -> String {
    args.model
        .clone()
        .or_else(|| section.models.first().map(|m| m.name.clone()))
        .unwrap_or_default()
}

#[derive(Serialize)]
struct OptimizeReport {
    model: String,
    subset: String,
    welfare: f64,
    regret: f64,
}

fn optimize(doc: &ScenarioDocument, args: &CommonArgs) -> Result<Output, CliError> {
    let section = population_section(doc, "optimize")?;
    let pop = section.population()?;
    let model = section.model(args.model.as_deref(), mc(doc, args))?;
    let best = optimize_choice_set(&pop, &model).map_err(runtime)?;
    let report = OptimizeReport {
        model: model_name(section, args),
        subset: best.subset.label(pop.actions()),
        welfare: best.welfare,
        regret: welfare_core::idealized_optimum(&pop) - best.welfare,
    };
    let main = match args.format.unwrap_or(Format::Json) {
        Format::Json => json_string(&report)?,
        Format::Csv => csv_string(
            &["model", "subset_label", "welfare", "regret"],
            [vec![report.model, report.subset, fmt_g(report.welfare), fmt_g(report.regret)]],
        )?,
    };
    Ok(Output { main, summary: None, warnings: vec![] })
}

#[derive(Serialize)]
struct CrossingRow {
    subset_a: String,
    subset_b: String,
    q_star: f64,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    subsets: Vec<String>,
    q: &'a [f64],
    welfare: &'a [Vec<f64>],
    envelope: Vec<String>,
    crossings: Vec<CrossingRow>,
}

fn sweep(pop: &Population, grid: SweepGrid, args: &CommonArgs) -> Result<Output, CliError> {
    let result = sweep_logit(pop, &grid).map_err(runtime)?;
    let labels: Vec<String> = result.subsets.iter().map(|s| s.label(pop.actions())).collect();
    let crossings: Vec<CrossingRow> = result
        .crossings
        .iter()
        .map(|c| CrossingRow {
            subset_a: labels[c.subset_a].clone(),
            subset_b: labels[c.subset_b].clone(),
            q_star: c.q_star,
        })
        .collect();
    let q = result.grid.values();
    match args.format.unwrap_or(Format::Csv) {
        Format::Json => {
            let report = SweepReport {
                envelope: result.envelope.iter().map(|&s| labels[s].clone()).collect(),
                subsets: labels,
                q,
                welfare: &result.welfare,
                crossings,
            };
            Ok(Output { main: json_string(&report)?, summary: None, warnings: vec![] })
        }
        Format::Csv => {
            let rows = result.welfare.iter().enumerate().flat_map(|(s, row)| {
                let label = &labels[s];
                let envelope = &result.envelope;
                row.iter().enumerate().map(move |(k, w)| {
                    vec![label.clone(), fmt_g(q[k]), fmt_g(*w), (envelope[k] == s).to_string()]
                })
            });
            let main = csv_string(&["subset_label", "q", "welfare", "is_envelope"], rows)?;
            let summary = csv_string(
                &["subset_a", "subset_b", "q_star"],
                crossings
                    .into_iter()
                    .map(|c| vec![c.subset_a, c.subset_b, fmt_g(c.q_star)]),
            )?;
            Ok(Output { main, summary: Some(summary), warnings: vec![] })
        }
    }
}

fn treatment(doc: &ScenarioDocument, args: &CommonArgs) -> Result<Output, CliError> {
    let scenario = match doc.kind()? {
        ScenarioKind::Treatment(t) => t,
        _ => return Err(mismatch("treatment", "a treatment")),
    };
    let report = analyze_treatment(scenario).map_err(runtime)?;
    let main = match args.format.unwrap_or(Format::Json) {
        Format::Json => json_string(&report)?,
        Format::Csv => {
            let name = |t: Treatment| match t {
                Treatment::A => "A",
                Treatment::B => "B",
            };
            let rec = |r: Recommendation| match r {
                Recommendation::Mandate => "mandate",
                Recommendation::Decentralize => "decentralize",
            };
            csv_string(
                &[
                    "x_label",
                    "weight",
                    "p_x",
                    "mandate_treatment",
                    "mandate_welfare",
                    "decentralized_welfare",
                    "voi",
                    "bounded_rational_welfare",
                    "recommendation",
                ],
                report.cells.iter().map(|c| {
                    vec![
                        c.x_label.clone(),
                        fmt_g(c.weight),
                        fmt_g(c.mandate.p_x),
                        name(c.mandate.treatment).to_string(),
                        fmt_g(c.mandate.welfare),
                        fmt_g(c.decentralized.welfare),
                        fmt_g(c.value_of_information.voi),
                        fmt_g(c.bounded_rational_welfare),
                        rec(c.recommendation).to_string(),
                    ]
                }),
            )?
        }
    };
    Ok(Output { main, summary: None, warnings: report.warnings })
}
