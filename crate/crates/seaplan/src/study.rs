//! Scenario runs and the C1/C2/C3 comparison study.
//!
//! Four scenarios combine two models (UCM, ESOM) with two demand
//! representations (PF, PFML). Every percentage difference in the
//! comparison tables is taken against the UCM-PF value of the same
//! metric and month, and a positive sign always means the first operand
//! is larger.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::esom::{solve_esom, EsomConfig, EsomError};
use crate::forecast::{
    daily_fractions, hourly_fractions, perfect_forecast, pfml_forecast, ClimatologyProfile,
    DemandError, DemandSeries, MonthIndex, HOURS_PER_MONTH,
};
use crate::rolling::{solve_month, MonthlySolution, RollingError, WindowPolicy};
use crate::system::{Fuel, NetworkCase};
use crate::ucm::{InitialConditions, UcmConfig};

/// Which optimization model a scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    Ucm,
    Esom,
}

/// Which demand representation a scenario uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ForecastKind {
    Pf,
    Pfml,
}

/// One of the four scenario combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScenarioId {
    pub model: ModelKind,
    pub forecast: ForecastKind,
}

impl ScenarioId {
    pub const UCM_PF: ScenarioId = ScenarioId { model: ModelKind::Ucm, forecast: ForecastKind::Pf };
    pub const UCM_PFML: ScenarioId = ScenarioId { model: ModelKind::Ucm, forecast: ForecastKind::Pfml };
    pub const ESOM_PF: ScenarioId = ScenarioId { model: ModelKind::Esom, forecast: ForecastKind::Pf };
    pub const ESOM_PFML: ScenarioId = ScenarioId { model: ModelKind::Esom, forecast: ForecastKind::Pfml };

    /// Canonical run and report order.
    pub const ALL: [ScenarioId; 4] = [
        ScenarioId::UCM_PF,
        ScenarioId::UCM_PFML,
        ScenarioId::ESOM_PF,
        ScenarioId::ESOM_PFML,
    ];
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let model = match self.model {
            ModelKind::Ucm => "UCM",
            ModelKind::Esom => "ESOM",
        };
        let forecast = match self.forecast {
            ForecastKind::Pf => "PF",
            ForecastKind::Pfml => "PFML",
        };
        write!(f, "{model}-{forecast}")
    }
}

impl FromStr for ScenarioId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "UCM-PF" => Ok(ScenarioId::UCM_PF),
            "UCM-PFML" => Ok(ScenarioId::UCM_PFML),
            "ESOM-PF" => Ok(ScenarioId::ESOM_PF),
            "ESOM-PFML" => Ok(ScenarioId::ESOM_PFML),
            other => Err(format!("unknown scenario `{other}`")),
        }
    }
}

/// Per-month aggregates of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyMetrics {
    pub month: u32,
    pub scenario: ScenarioId,
    pub total_cost: f64,
    pub cost_fixed: f64,
    pub cost_startup: f64,
    pub cost_variable: f64,
    /// MWh by fuel over the month.
    pub generation_by_fuel: BTreeMap<Fuel, f64>,
    pub wall_seconds: f64,
}

impl MonthlyMetrics {
    pub fn fuel(&self, fuel: Fuel) -> f64 {
        self.generation_by_fuel.get(&fuel).copied().unwrap_or(0.0)
    }
}

/// The five comparison tables of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ComparisonId {
    C1a,
    C1b,
    C2a,
    C2b,
    C3,
}

impl ComparisonId {
    pub const ALL: [ComparisonId; 5] = [
        ComparisonId::C1a,
        ComparisonId::C1b,
        ComparisonId::C2a,
        ComparisonId::C2b,
        ComparisonId::C3,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ComparisonId::C1a => "c1a",
            ComparisonId::C1b => "c1b",
            ComparisonId::C2a => "c2a",
            ComparisonId::C2b => "c2b",
            ComparisonId::C3 => "c3",
        }
    }

    /// The scenario pair (a, b) this comparison sets against each other.
    pub fn operands(&self) -> (ScenarioId, ScenarioId) {
        match self {
            ComparisonId::C1a => (ScenarioId::UCM_PF, ScenarioId::ESOM_PF),
            ComparisonId::C1b => (ScenarioId::UCM_PFML, ScenarioId::ESOM_PFML),
            ComparisonId::C2a => (ScenarioId::UCM_PF, ScenarioId::UCM_PFML),
            ComparisonId::C2b => (ScenarioId::ESOM_PF, ScenarioId::ESOM_PFML),
            ComparisonId::C3 => (ScenarioId::UCM_PF, ScenarioId::ESOM_PFML),
        }
    }
}

/// The metric a comparison row is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TotalCost,
    Generation(Fuel),
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::TotalCost,
        Metric::Generation(Fuel::Nuclear),
        Metric::Generation(Fuel::Hydro),
        Metric::Generation(Fuel::Coal),
        Metric::Generation(Fuel::Gas),
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::TotalCost => "total_cost",
            Metric::Generation(Fuel::Nuclear) => "gen_nuclear_mwh",
            Metric::Generation(Fuel::Hydro) => "gen_hydro_mwh",
            Metric::Generation(Fuel::Coal) => "gen_coal_mwh",
            Metric::Generation(Fuel::Gas) => "gen_gas_mwh",
        }
    }

    fn of(&self, m: &MonthlyMetrics) -> f64 {
        match self {
            Metric::TotalCost => m.total_cost,
            Metric::Generation(fuel) => m.fuel(*fuel),
        }
    }
}

/// One row of a comparison table. `pct_diff` is `(a - b) / base * 100`
/// against the UCM-PF base; positive means the first operand is larger.
/// A zero base flags the row as undefined instead of producing a number.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub comparison: ComparisonId,
    pub month: u32,
    pub metric: Metric,
    pub value_a: f64,
    pub value_b: f64,
    pub base: f64,
    pub pct_diff: Option<f64>,
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("comparison operands cover different months ({0} vs {1})")]
    MonthMismatch(u32, u32),
    #[error("base metrics are not UCM-PF (got {0})")]
    BadBase(ScenarioId),
    #[error("{scenario} month {month}: {message}")]
    Scenario {
        scenario: ScenarioId,
        month: u32,
        message: String,
    },
    #[error("{failed} of {total} scenario runs failed; see failures.csv")]
    PartialFailure { failed: usize, total: usize },
    #[error("demand: {0}")]
    Demand(#[from] DemandError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Knobs shared by every run of a study.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub ucm: UcmConfig,
    pub esom: EsomConfig,
    pub policy: WindowPolicy,
    /// Seed each month's UCM from the previous month's final state
    /// instead of a cold start.
    pub chain_months: bool,
    /// Months of the history used for the climatology; `None` means the
    /// whole history.
    pub climatology_months: Option<Vec<MonthIndex>>,
    /// Worker pool bound for scenario x month jobs.
    pub jobs: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            ucm: UcmConfig::default(),
            esom: EsomConfig::default(),
            policy: WindowPolicy::default(),
            chain_months: false,
            climatology_months: None,
            jobs: 2,
        }
    }
}

/// Build the demand series a scenario sees for one month.
pub fn scenario_demand(
    observed: &DemandSeries,
    history: &DemandSeries,
    forecast: ForecastKind,
    month: MonthIndex,
    config: &StudyConfig,
) -> Result<DemandSeries, DemandError> {
    match forecast {
        ForecastKind::Pf => perfect_forecast(observed, month),
        ForecastKind::Pfml => {
            let months: Vec<MonthIndex> = match &config.climatology_months {
                Some(list) => list.clone(),
                None => (1..=history.months() as u32).map(MonthIndex).collect(),
            };
            let profile = ClimatologyProfile {
                hourly_fractions: hourly_fractions(history)?,
                daily_fractions: daily_fractions(history, &months)?,
            };
            pfml_forecast(observed, &profile, month)
        }
    }
}

fn fuel_totals(case: &NetworkCase, g: &[Vec<f64>], hours: usize) -> BTreeMap<Fuel, f64> {
    let mut totals: BTreeMap<Fuel, f64> = Fuel::ALL.iter().map(|&f| (f, 0.0)).collect();
    for (i, unit) in case.units.iter().enumerate() {
        *totals.get_mut(&unit.fuel).unwrap() += g[i][..hours].iter().sum::<f64>();
    }
    totals
}

/// Outcome of one scenario month: the metrics row plus the solved
/// primal trajectories for archiving.
pub struct ScenarioRun {
    pub metrics: MonthlyMetrics,
    pub ucm_solution: Option<MonthlySolution>,
    pub esom_solution: Option<crate::esom::DispatchSolution>,
}

/// Run one scenario for one month. `init` overrides the cold start when
/// months are chained (UCM only).
pub fn run_scenario(
    case: &NetworkCase,
    observed: &DemandSeries,
    history: &DemandSeries,
    scenario: ScenarioId,
    month: MonthIndex,
    init: Option<&InitialConditions>,
    config: &StudyConfig,
) -> Result<ScenarioRun, StudyError> {
    let fail = |message: String| StudyError::Scenario {
        scenario,
        month: month.0,
        message,
    };
    let demand = scenario_demand(observed, history, scenario.forecast, month, config)
        .map_err(|e| fail(e.to_string()))?;

    let clock = Instant::now();
    match scenario.model {
        ModelKind::Ucm => {
            let cold = InitialConditions::cold_start(case);
            let start = init.unwrap_or(&cold);
            let monthly = solve_month(case, &demand, start, &config.ucm, config.policy)
                .map_err(|e: RollingError| fail(e.to_string()))?;
            let wall_seconds = clock.elapsed().as_secs_f64();
            let generation_by_fuel = fuel_totals(case, &monthly.solution.g, monthly.solution.hours);
            Ok(ScenarioRun {
                metrics: MonthlyMetrics {
                    month: month.0,
                    scenario,
                    total_cost: monthly.solution.cost_total,
                    cost_fixed: monthly.solution.cost_fixed,
                    cost_startup: monthly.solution.cost_startup,
                    cost_variable: monthly.solution.cost_variable,
                    generation_by_fuel,
                    wall_seconds,
                },
                ucm_solution: Some(monthly),
                esom_solution: None,
            })
        }
        ModelKind::Esom => {
            let dispatch = solve_esom(case, &demand, &config.esom)
                .map_err(|e: EsomError| fail(e.to_string()))?;
            let wall_seconds = clock.elapsed().as_secs_f64();
            let generation_by_fuel = fuel_totals(case, &dispatch.g, dispatch.hours);
            Ok(ScenarioRun {
                metrics: MonthlyMetrics {
                    month: month.0,
                    scenario,
                    total_cost: dispatch.cost_total_reported,
                    cost_fixed: dispatch.cost_fixed_expost,
                    cost_startup: 0.0,
                    cost_variable: dispatch.cost_variable_true,
                    generation_by_fuel,
                    wall_seconds,
                },
                ucm_solution: None,
                esom_solution: Some(dispatch),
            })
        }
    }
}

/// Compare two metric rows against the UCM-PF base of the same month:
/// one row for the total cost and one per fuel.
pub fn compare(
    id: ComparisonId,
    a: &MonthlyMetrics,
    b: &MonthlyMetrics,
    base: &MonthlyMetrics,
) -> Result<Vec<ComparisonRow>, StudyError> {
    if a.month != b.month {
        return Err(StudyError::MonthMismatch(a.month, b.month));
    }
    if a.month != base.month {
        return Err(StudyError::MonthMismatch(a.month, base.month));
    }
    if base.scenario != ScenarioId::UCM_PF {
        return Err(StudyError::BadBase(base.scenario));
    }
    Ok(Metric::ALL
        .iter()
        .map(|metric| {
            let value_a = metric.of(a);
            let value_b = metric.of(b);
            let base_value = metric.of(base);
            let pct_diff =
                (base_value != 0.0).then(|| (value_a - value_b) / base_value * 100.0);
            ComparisonRow {
                comparison: id,
                month: a.month,
                metric: *metric,
                value_a,
                value_b,
                base: base_value,
                pct_diff,
            }
        })
        .collect())
}

/// Everything a study produces, before serialization.
pub struct StudyReport {
    pub metrics: Vec<MonthlyMetrics>,
    pub comparisons: BTreeMap<ComparisonId, Vec<ComparisonRow>>,
    /// Failed (scenario, month, message) runs.
    pub failures: Vec<(ScenarioId, u32, String)>,
}

impl StudyReport {
    pub fn metric(&self, scenario: ScenarioId, month: u32) -> Option<&MonthlyMetrics> {
        self.metrics
            .iter()
            .find(|m| m.scenario == scenario && m.month == month)
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(
            "month,scenario,total_cost,cost_fixed,cost_startup,cost_variable,\
             gen_nuclear_mwh,gen_hydro_mwh,gen_coal_mwh,gen_gas_mwh,wall_seconds\n",
        );
        for m in &self.metrics {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                m.month,
                m.scenario,
                m.total_cost,
                m.cost_fixed,
                m.cost_startup,
                m.cost_variable,
                m.fuel(Fuel::Nuclear),
                m.fuel(Fuel::Hydro),
                m.fuel(Fuel::Coal),
                m.fuel(Fuel::Gas),
                m.wall_seconds
            ));
        }
        out
    }

    pub fn comparison_csv(&self, id: ComparisonId) -> String {
        let mut out = String::from("month,metric,value_a,value_b,base,pct_diff\n");
        for row in self.comparisons.get(&id).into_iter().flatten() {
            let pct = row
                .pct_diff
                .map(|p| p.to_string())
                .unwrap_or_else(|| "undefined".to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{pct}\n",
                row.month,
                row.metric.as_str(),
                row.value_a,
                row.value_b,
                row.base
            ));
        }
        out
    }

    pub fn runtime_csv(&self) -> String {
        let mut out = String::from("model,mean_wall_seconds,total_wall_seconds\n");
        for (label, model) in [("ucm", ModelKind::Ucm), ("esom", ModelKind::Esom)] {
            let walls: Vec<f64> = self
                .metrics
                .iter()
                .filter(|m| m.scenario.model == model)
                .map(|m| m.wall_seconds)
                .collect();
            let total: f64 = walls.iter().sum();
            let mean = if walls.is_empty() { 0.0 } else { total / walls.len() as f64 };
            out.push_str(&format!("{label},{mean},{total}\n"));
        }
        out
    }

    pub fn failures_csv(&self) -> String {
        let mut out = String::from("scenario,month,error\n");
        for (scenario, month, message) in &self.failures {
            out.push_str(&format!("{scenario},{month},{}\n", message.replace(',', ";")));
        }
        out
    }

    /// Write `metrics.csv`, the five comparison tables, `runtime.csv`,
    /// and (when runs failed) `failures.csv` into `out_dir`.
    pub fn write_files(&self, out_dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(out_dir.join("metrics.csv"), self.metrics_csv())?;
        for id in ComparisonId::ALL {
            std::fs::write(out_dir.join(format!("{}.csv", id.as_str())), self.comparison_csv(id))?;
        }
        std::fs::write(out_dir.join("runtime.csv"), self.runtime_csv())?;
        if !self.failures.is_empty() {
            std::fs::write(out_dir.join("failures.csv"), self.failures_csv())?;
        }
        Ok(())
    }
}

/// Run all four scenarios over `months` and assemble the report.
///
/// Jobs are independent and run on a bounded pool, except that chained
/// months force each model-forecast lane to run sequentially.
pub fn run_study(
    case: &NetworkCase,
    observed: &DemandSeries,
    history: &DemandSeries,
    months: &[MonthIndex],
    config: &StudyConfig,
) -> Result<StudyReport, StudyError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .expect("worker pool");

    let mut results: BTreeMap<(u32, ScenarioId), Result<MonthlyMetrics, String>> = BTreeMap::new();

    if config.chain_months {
        // State carries across months within each scenario lane.
        for scenario in ScenarioId::ALL {
            let mut init: Option<InitialConditions> = None;
            for &month in months {
                let run = run_scenario(case, observed, history, scenario, month, init.as_ref(), config);
                match run {
                    Ok(run) => {
                        init = run.ucm_solution.as_ref().map(|m| m.final_state.clone());
                        results.insert((month.0, scenario), Ok(run.metrics));
                    }
                    Err(e) => {
                        init = None;
                        results.insert((month.0, scenario), Err(e.to_string()));
                    }
                }
            }
        }
    } else {
        let jobs: Vec<(MonthIndex, ScenarioId)> = months
            .iter()
            .flat_map(|&m| ScenarioId::ALL.into_iter().map(move |s| (m, s)))
            .collect();
        let outcomes: Vec<((u32, ScenarioId), Result<MonthlyMetrics, String>)> = pool.install(|| {
            jobs.par_iter()
                .map(|&(month, scenario)| {
                    let outcome = run_scenario(case, observed, history, scenario, month, None, config)
                        .map(|r| r.metrics)
                        .map_err(|e| e.to_string());
                    ((month.0, scenario), outcome)
                })
                .collect()
        });
        results.extend(outcomes);
    }

    let mut metrics = Vec::new();
    let mut failures = Vec::new();
    for &month in months {
        for scenario in ScenarioId::ALL {
            match results.remove(&(month.0, scenario)) {
                Some(Ok(m)) => metrics.push(m),
                Some(Err(message)) => failures.push((scenario, month.0, message)),
                None => failures.push((scenario, month.0, "missing result".to_string())),
            }
        }
    }

    let mut comparisons: BTreeMap<ComparisonId, Vec<ComparisonRow>> = BTreeMap::new();
    let report_metric = |scenario: ScenarioId, month: u32| {
        metrics
            .iter()
            .find(|m| m.scenario == scenario && m.month == month)
    };
    for id in ComparisonId::ALL {
        let (sa, sb) = id.operands();
        let mut rows = Vec::new();
        for &month in months {
            let (Some(a), Some(b), Some(base)) = (
                report_metric(sa, month.0),
                report_metric(sb, month.0),
                report_metric(ScenarioId::UCM_PF, month.0),
            ) else {
                continue;
            };
            rows.extend(compare(id, a, b, base)?);
        }
        comparisons.insert(id, rows);
    }

    Ok(StudyReport {
        metrics,
        comparisons,
        failures,
    })
}

/// Hours covered by the months of a study (used for sanity reporting).
pub fn study_hours(months: &[MonthIndex]) -> usize {
    months.len() * HOURS_PER_MONTH
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::parse_case;
    use crate::system::BusId;

    fn metrics(scenario: ScenarioId, cost: f64, hydro: f64) -> MonthlyMetrics {
        let mut generation_by_fuel: BTreeMap<Fuel, f64> =
            Fuel::ALL.iter().map(|&f| (f, 0.0)).collect();
        generation_by_fuel.insert(Fuel::Hydro, hydro);
        MonthlyMetrics {
            month: 1,
            scenario,
            total_cost: cost,
            cost_fixed: 0.0,
            cost_startup: 0.0,
            cost_variable: cost,
            generation_by_fuel,
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn percentage_differences_follow_the_sign_convention() {
        let base = metrics(ScenarioId::UCM_PF, 102.0, 100.0);
        let b = metrics(ScenarioId::ESOM_PF, 100.0, 100.0);
        let rows = compare(ComparisonId::C1a, &base.clone(), &b, &base).unwrap();
        let cost = rows.iter().find(|r| r.metric == Metric::TotalCost).unwrap();
        assert!((cost.pct_diff.unwrap() - 2.0 / 102.0 * 100.0).abs() < 1e-12);
        assert!(cost.pct_diff.unwrap() > 0.0, "a larger means positive");

        // Hydro: a 99 vs b 100 against base 100 gives -1%.
        let mut a2 = metrics(ScenarioId::UCM_PF, 102.0, 99.0);
        a2.month = 1;
        let b2 = metrics(ScenarioId::ESOM_PF, 100.0, 100.0);
        let base2 = metrics(ScenarioId::UCM_PF, 102.0, 100.0);
        let rows = compare(ComparisonId::C1a, &a2, &b2, &base2).unwrap();
        let hydro = rows
            .iter()
            .find(|r| r.metric == Metric::Generation(Fuel::Hydro))
            .unwrap();
        assert!((hydro.pct_diff.unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_operands_give_all_zero_rows() {
        let base = metrics(ScenarioId::UCM_PF, 50.0, 10.0);
        let a = metrics(ScenarioId::ESOM_PF, 50.0, 10.0);
        let rows = compare(ComparisonId::C1a, &a, &a.clone(), &base).unwrap();
        for row in rows {
            if let Some(p) = row.pct_diff {
                assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn comparison_is_antisymmetric() {
        let base = metrics(ScenarioId::UCM_PF, 110.0, 90.0);
        let a = metrics(ScenarioId::UCM_PF, 110.0, 80.0);
        let b = metrics(ScenarioId::ESOM_PF, 100.0, 95.0);
        let ab = compare(ComparisonId::C1a, &a, &b, &base).unwrap();
        let ba = compare(ComparisonId::C1a, &b, &a, &base).unwrap();
        for (x, y) in ab.iter().zip(ba.iter()) {
            match (x.pct_diff, y.pct_diff) {
                (Some(p), Some(q)) => assert!((p + q).abs() < 1e-12),
                (None, None) => {}
                other => panic!("mismatched definedness {other:?}"),
            }
        }
    }

    #[test]
    fn zero_base_rows_are_flagged_undefined() {
        let mut base = metrics(ScenarioId::UCM_PF, 100.0, 0.0);
        base.generation_by_fuel.insert(Fuel::Hydro, 0.0);
        let a = metrics(ScenarioId::UCM_PF, 100.0, 5.0);
        let b = metrics(ScenarioId::ESOM_PF, 100.0, 7.0);
        let rows = compare(ComparisonId::C1a, &a, &b, &base).unwrap();
        let hydro = rows
            .iter()
            .find(|r| r.metric == Metric::Generation(Fuel::Hydro))
            .unwrap();
        assert_eq!(hydro.pct_diff, None);
    }

    #[test]
    fn month_mismatch_is_rejected() {
        let a = metrics(ScenarioId::UCM_PF, 100.0, 5.0);
        let mut b = metrics(ScenarioId::ESOM_PF, 100.0, 5.0);
        b.month = 2;
        assert!(matches!(
            compare(ComparisonId::C1a, &a, &b, &a.clone()),
            Err(StudyError::MonthMismatch(1, 2))
        ));
    }

    fn toy_case() -> NetworkCase {
        parse_case(
            "[meta]\nreference_bus,1\n[buses]\n1\n[generators]\nG1,1,gas,10,100,100,100,1,1,50,5,100:20,\n[shares]\n1,1.0\n",
        )
        .unwrap()
    }

    #[test]
    fn ucm_pf_metrics_match_the_hand_computed_month() {
        // Flat 50 MW for 720 h: 720*FC + one startup + 720*50*20.
        let case = toy_case();
        let observed = DemandSeries::new([(BusId(1), vec![50.0; 720])].into()).unwrap();
        let run = run_scenario(
            &case,
            &observed,
            &observed,
            ScenarioId::UCM_PF,
            MonthIndex(1),
            None,
            &StudyConfig::default(),
        )
        .unwrap();
        let expected = 720.0 * 5.0 + 50.0 + 720.0 * 50.0 * 20.0;
        assert!((run.metrics.total_cost - expected).abs() < 1e-6);
        assert!((run.metrics.fuel(Fuel::Gas) - 720.0 * 50.0).abs() < 1e-6);
    }

    #[test]
    fn esom_pf_and_pfml_coincide_on_flat_demand() {
        let case = toy_case();
        let observed = DemandSeries::new([(BusId(1), vec![50.0; 720])].into()).unwrap();
        let config = StudyConfig::default();
        let pf = run_scenario(&case, &observed, &observed, ScenarioId::ESOM_PF, MonthIndex(1), None, &config)
            .unwrap()
            .metrics;
        let pfml = run_scenario(&case, &observed, &observed, ScenarioId::ESOM_PFML, MonthIndex(1), None, &config)
            .unwrap()
            .metrics;
        assert!((pf.total_cost - pfml.total_cost).abs() < 1e-6);
        assert!((pf.fuel(Fuel::Gas) - pfml.fuel(Fuel::Gas)).abs() < 1e-6);
    }

    #[test]
    fn study_produces_metrics_comparisons_and_runtime() {
        let case = toy_case();
        let observed = DemandSeries::new([(BusId(1), vec![50.0; 1440])].into()).unwrap();
        let months = [MonthIndex(1), MonthIndex(2)];
        let report = run_study(&case, &observed, &observed, &months, &StudyConfig::default()).unwrap();
        assert!(report.failures.is_empty());
        assert_eq!(report.metrics.len(), 8);
        for id in ComparisonId::ALL {
            assert_eq!(report.comparisons[&id].len(), 2 * Metric::ALL.len());
        }
        let metrics_csv = report.metrics_csv();
        assert!(metrics_csv.starts_with("month,scenario,total_cost"));
        assert_eq!(metrics_csv.lines().count(), 9);
        let runtime = report.runtime_csv();
        assert!(runtime.contains("ucm,"));
        assert!(runtime.contains("esom,"));
    }

    #[test]
    fn partial_failures_are_collected_not_fatal() {
        let case = toy_case();
        // Month 2 demand exceeds capacity, so all four scenarios fail
        // there while month 1 still reports.
        let mut demand = vec![50.0; 1440];
        for slot in demand.iter_mut().skip(720) {
            *slot = 500.0;
        }
        let observed = DemandSeries::new([(BusId(1), demand)].into()).unwrap();
        let months = [MonthIndex(1), MonthIndex(2)];
        let report = run_study(&case, &observed, &observed, &months, &StudyConfig::default()).unwrap();
        assert_eq!(report.failures.len(), 4);
        assert!(report.failures.iter().all(|&(_, month, _)| month == 2));
        assert_eq!(report.metrics.len(), 4);
        assert!(report.failures_csv().lines().count() == 5);
    }
}
