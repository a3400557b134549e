//! The unit-commitment MILP: hourly on/off, startup and shutdown
//! binaries, block dispatch, DC power flow, and the operational
//! constraints that couple hours together (ramps, minimum up/down
//! times, initial-condition carryover).
//!
//! [`audit_solution`] re-checks a claimed solution against every
//! constraint family from the primal values alone, so stitched monthly
//! solutions can be verified across window boundaries.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::forecast::DemandSeries;
use crate::solver::{ModelBuilder, SolveOptions, SolveStatus, SolverError, VariableHandle};
use crate::system::{BusId, GeneratorUnit, InitialRecord, NetworkCase, Violation};

/// Absolute MW tolerance used by the audit.
pub const AUDIT_TOLERANCE: f64 = 1e-6;

/// Commitment state of one unit at a window boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitState {
    /// Last dispatch, MW. Zero when offline.
    pub g0: f64,
    pub on: bool,
    /// Consecutive hours online up to and including the boundary.
    pub hours_on: u32,
    /// Consecutive hours offline up to and including the boundary.
    pub hours_off: u32,
}

/// Per-unit state handed from one window to the next, aligned with
/// `case.units`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub units: Vec<UnitState>,
}

impl InitialConditions {
    /// Default month-start state: every unit off and free to start.
    pub fn cold_start(case: &NetworkCase) -> Self {
        let units = case
            .units
            .iter()
            .map(|u| UnitState {
                g0: 0.0,
                on: false,
                hours_on: 0,
                hours_off: u.min_down,
            })
            .collect();
        Self { units }
    }

    /// Cold start overridden by `[initial]` records from a case file.
    pub fn from_records(case: &NetworkCase, records: &[InitialRecord]) -> Result<Self, UcmError> {
        let mut init = Self::cold_start(case);
        for rec in records {
            let idx = case
                .unit_index(&rec.unit_id)
                .ok_or_else(|| UcmError::UnknownUnit(rec.unit_id.clone()))?;
            init.units[idx] = UnitState {
                g0: rec.g0,
                on: rec.on,
                hours_on: rec.hours_on,
                hours_off: rec.hours_off,
            };
        }
        let violations = init.validate(case);
        if !violations.is_empty() {
            return Err(UcmError::BadInitialConditions(violations[0].to_string()));
        }
        Ok(init)
    }

    /// Check the state invariants against the fleet.
    pub fn validate(&self, case: &NetworkCase) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.units.len() != case.units.len() {
            out.push(Violation::new(
                "initial conditions",
                format!("{} unit states for {} units", self.units.len(), case.units.len()),
            ));
            return out;
        }
        for (unit, state) in case.units.iter().zip(&self.units) {
            let entity = format!("unit {}", unit.id);
            if state.on {
                if !(unit.p_min - AUDIT_TOLERANCE <= state.g0 && state.g0 <= unit.p_max + AUDIT_TOLERANCE) {
                    out.push(Violation::new(
                        &entity,
                        format!("online with g0 {} outside [{}, {}]", state.g0, unit.p_min, unit.p_max),
                    ));
                }
                if state.hours_off != 0 {
                    out.push(Violation::new(&entity, "online but hours_off is nonzero"));
                }
            } else {
                if state.g0 != 0.0 {
                    out.push(Violation::new(&entity, format!("offline with g0 {}", state.g0)));
                }
                if state.hours_on != 0 {
                    out.push(Violation::new(&entity, "offline but hours_on is nonzero"));
                }
            }
        }
        out
    }
}

/// Options for one commitment solve.
#[derive(Debug, Clone)]
pub struct UcmConfig {
    /// Backend options; `solve.mip_gap` is the commitment gap.
    pub solve: SolveOptions,
    /// Spinning reserve as a fraction of hourly system demand.
    pub reserve_fraction: Option<f64>,
    /// Load-shedding penalty, currency per MWh. Off by default so
    /// infeasibility is loud; enable only as a diagnostic.
    pub shed_penalty: Option<f64>,
    /// Energy caps for this window, MWh by unit id (set by the rolling
    /// scheme from monthly budgets).
    pub window_energy_caps: BTreeMap<String, f64>,
}

impl Default for UcmConfig {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            reserve_fraction: None,
            shed_penalty: None,
            window_energy_caps: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum UcmError {
    #[error("window of {window} h exceeds the {available} h of demand")]
    WindowTooLong { window: usize, available: usize },
    #[error("initial conditions are inconsistent with the case: {0}")]
    BadInitialConditions(String),
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("infeasible{}", binding_hour.map(|h| format!(" (capacity short at hour {h})")).unwrap_or_default())]
    Infeasible { binding_hour: Option<usize> },
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("config: {0}")]
    BadConfig(String),
    #[error("solution archive line {line}: {message}")]
    Archive { line: usize, message: String },
}

/// Startup ramp allowance: a starting unit may reach at least `p_min`.
pub(crate) fn startup_ramp(unit: &GeneratorUnit) -> f64 {
    unit.p_min.max(unit.ramp_up)
}

/// Shutdown ramp allowance, symmetric to [`startup_ramp`].
pub(crate) fn shutdown_ramp(unit: &GeneratorUnit) -> f64 {
    unit.p_min.max(unit.ramp_down)
}

/// Index map of the commitment model's variables.
pub struct UcmVariables {
    /// Online binaries, `[unit][hour]`.
    pub u: Vec<Vec<VariableHandle>>,
    /// Startup binaries.
    pub v: Vec<Vec<VariableHandle>>,
    /// Shutdown binaries.
    pub w: Vec<Vec<VariableHandle>>,
    /// Total dispatch, MW.
    pub g: Vec<Vec<VariableHandle>>,
    /// Block dispatch, `[unit][hour][block]`.
    pub blocks: Vec<Vec<Vec<VariableHandle>>>,
    /// Line flow, `[line][hour]`; empty without lines.
    pub flow: Vec<Vec<VariableHandle>>,
    /// Bus voltage angles, `[bus][hour]`; empty without lines.
    pub angle: Vec<Vec<VariableHandle>>,
    /// Shedding slack, `[bus][hour]`; empty unless enabled.
    pub shed: Vec<Vec<VariableHandle>>,
}

/// A built (not yet solved) commitment model.
pub struct UcmModel {
    pub builder: ModelBuilder,
    pub vars: UcmVariables,
    pub hours: usize,
}

/// Assemble the commitment MILP for `hours` hours of `demand`.
pub fn build_ucm(
    case: &NetworkCase,
    demand: &DemandSeries,
    hours: usize,
    init: &InitialConditions,
    config: &UcmConfig,
) -> Result<UcmModel, UcmError> {
    if hours > demand.horizon_hours() {
        return Err(UcmError::WindowTooLong {
            window: hours,
            available: demand.horizon_hours(),
        });
    }
    let violations = init.validate(case);
    if !violations.is_empty() {
        return Err(UcmError::BadInitialConditions(violations[0].to_string()));
    }
    if let Some(rf) = config.reserve_fraction {
        if !(0.0..=0.5).contains(&rf) {
            return Err(UcmError::BadConfig(format!("reserve fraction {rf} outside [0, 0.5]")));
        }
    }
    if let Some(penalty) = config.shed_penalty {
        let max_cost = case
            .units
            .iter()
            .flat_map(|u| u.blocks.iter().map(|b| b.marginal_cost))
            .fold(0.0, f64::max);
        if penalty <= max_cost {
            return Err(UcmError::BadConfig(format!(
                "shed penalty {penalty} must exceed the highest block cost {max_cost}"
            )));
        }
    }

    let mut m = ModelBuilder::new();
    let n_units = case.units.len();
    let use_network = !case.lines.is_empty();

    let mut u = vec![Vec::with_capacity(hours); n_units];
    let mut v = vec![Vec::with_capacity(hours); n_units];
    let mut w = vec![Vec::with_capacity(hours); n_units];
    let mut g = vec![Vec::with_capacity(hours); n_units];
    let mut blocks = vec![Vec::with_capacity(hours); n_units];
    for (i, unit) in case.units.iter().enumerate() {
        for _t in 0..hours {
            u[i].push(m.add_binary(unit.fixed_cost));
            v[i].push(m.add_binary(unit.startup_cost));
            w[i].push(m.add_binary(0.0));
            let hour_blocks: Vec<VariableHandle> = unit
                .blocks
                .iter()
                .map(|b| m.add_continuous(0.0, b.size_mw, b.marginal_cost))
                .collect();
            g[i].push(m.add_continuous(0.0, unit.p_max, 0.0));
            blocks[i].push(hour_blocks);
        }
    }

    let mut flow: Vec<Vec<VariableHandle>> = Vec::new();
    let mut angle: Vec<Vec<VariableHandle>> = Vec::new();
    if use_network {
        for line in &case.lines {
            flow.push((0..hours).map(|_| m.add_continuous(-line.capacity, line.capacity, 0.0)).collect());
        }
        // The angle span is bounded loosely; flows carry the real limits.
        for bus in &case.buses {
            let bound = if *bus == case.reference_bus { 0.0 } else { 100.0 };
            angle.push((0..hours).map(|_| m.add_continuous(-bound, bound, 0.0)).collect());
        }
    }

    let mut shed: Vec<Vec<VariableHandle>> = Vec::new();
    if let Some(penalty) = config.shed_penalty {
        for &bus in &case.buses {
            shed.push(
                (0..hours)
                    .map(|t| m.add_continuous(0.0, demand.get(bus, t).max(0.0), penalty))
                    .collect(),
            );
        }
    }

    for (i, unit) in case.units.iter().enumerate() {
        let state = &init.units[i];
        let u0 = if state.on { 1.0 } else { 0.0 };
        let su = startup_ramp(unit);
        let sd = shutdown_ramp(unit);

        for t in 0..hours {
            // g equals the block sum and is gated by commitment.
            let mut sum_terms = vec![(g[i][t], 1.0)];
            sum_terms.extend(blocks[i][t].iter().map(|&b| (b, -1.0)));
            m.eq(sum_terms, 0.0);
            m.le(vec![(g[i][t], 1.0), (u[i][t], -unit.p_max)], 0.0);
            m.ge(vec![(g[i][t], 1.0), (u[i][t], -unit.p_min)], 0.0);

            // State transition logic.
            if t == 0 {
                m.eq(vec![(u[i][0], 1.0), (v[i][0], -1.0), (w[i][0], 1.0)], u0);
            } else {
                m.eq(
                    vec![(u[i][t], 1.0), (u[i][t - 1], -1.0), (v[i][t], -1.0), (w[i][t], 1.0)],
                    0.0,
                );
            }
            m.le(vec![(v[i][t], 1.0), (w[i][t], 1.0)], 1.0);

            // Ramps, with startup/shutdown allowances.
            if t == 0 {
                m.le(
                    vec![(g[i][0], 1.0), (v[i][0], -su)],
                    state.g0 + unit.ramp_up * u0,
                );
                m.le(
                    vec![(g[i][0], -1.0), (u[i][0], -unit.ramp_down), (w[i][0], -sd)],
                    -state.g0,
                );
            } else {
                m.le(
                    vec![(g[i][t], 1.0), (g[i][t - 1], -1.0), (u[i][t - 1], -unit.ramp_up), (v[i][t], -su)],
                    0.0,
                );
                m.le(
                    vec![(g[i][t - 1], 1.0), (g[i][t], -1.0), (u[i][t], -unit.ramp_down), (w[i][t], -sd)],
                    0.0,
                );
            }

            // Minimum up/down windows.
            let up_from = (t + 1).saturating_sub(unit.min_up as usize);
            let mut up_terms: Vec<(VariableHandle, f64)> =
                (up_from..=t).map(|tau| (v[i][tau], 1.0)).collect();
            up_terms.push((u[i][t], -1.0));
            m.le(up_terms, 0.0);

            let down_from = (t + 1).saturating_sub(unit.min_down as usize);
            let mut down_terms: Vec<(VariableHandle, f64)> =
                (down_from..=t).map(|tau| (w[i][tau], 1.0)).collect();
            down_terms.push((u[i][t], 1.0));
            m.le(down_terms, 1.0);
        }

        // Remaining up/down time carried in from before the window.
        if state.on {
            let remaining = (unit.min_up.saturating_sub(state.hours_on)) as usize;
            for t in 0..remaining.min(hours) {
                m.eq(vec![(u[i][t], 1.0)], 1.0);
            }
        } else {
            let remaining = (unit.min_down.saturating_sub(state.hours_off)) as usize;
            for t in 0..remaining.min(hours) {
                m.eq(vec![(u[i][t], 1.0)], 0.0);
            }
        }

        // Window energy cap.
        if let Some(&cap) = config.window_energy_caps.get(&unit.id) {
            let terms: Vec<(VariableHandle, f64)> = (0..hours).map(|t| (g[i][t], 1.0)).collect();
            m.le(terms, cap);
        }
    }

    // DC power flow: flow defined by angle differences, reference fixed
    // at zero through its bounds.
    if use_network {
        for (l, line) in case.lines.iter().enumerate() {
            let from = case.buses.iter().position(|&b| b == line.from_bus).unwrap();
            let to = case.buses.iter().position(|&b| b == line.to_bus).unwrap();
            let b_mw = case.base_mva * line.susceptance;
            for t in 0..hours {
                m.eq(
                    vec![(flow[l][t], 1.0), (angle[from][t], -b_mw), (angle[to][t], b_mw)],
                    0.0,
                );
            }
        }
    }

    // Nodal balance: generation plus net inflow (plus shedding slack)
    // meets demand at every bus and hour.
    for (s, &bus) in case.buses.iter().enumerate() {
        for t in 0..hours {
            let mut terms: Vec<(VariableHandle, f64)> = Vec::new();
            for (i, unit) in case.units.iter().enumerate() {
                if unit.bus == bus {
                    terms.push((g[i][t], 1.0));
                }
            }
            if use_network {
                for (l, line) in case.lines.iter().enumerate() {
                    if line.to_bus == bus {
                        terms.push((flow[l][t], 1.0));
                    }
                    if line.from_bus == bus {
                        terms.push((flow[l][t], -1.0));
                    }
                }
            }
            if !shed.is_empty() {
                terms.push((shed[s][t], 1.0));
            }
            let rhs = demand.get(bus, t);
            if terms.is_empty() {
                if rhs.abs() > AUDIT_TOLERANCE {
                    return Err(UcmError::Infeasible { binding_hour: Some(t) });
                }
                continue;
            }
            m.eq(terms, rhs);
        }
    }

    // Spinning reserve: committed headroom above hourly system demand.
    if let Some(rf) = config.reserve_fraction {
        for t in 0..hours {
            let mut terms: Vec<(VariableHandle, f64)> = Vec::new();
            for (i, unit) in case.units.iter().enumerate() {
                terms.push((u[i][t], unit.p_max));
                terms.push((g[i][t], -1.0));
            }
            let system: f64 = case.buses.iter().map(|&b| demand.get(b, t)).sum();
            m.ge(terms, rf * system);
        }
    }

    Ok(UcmModel {
        builder: m,
        vars: UcmVariables {
            u,
            v,
            w,
            g,
            blocks,
            flow,
            angle,
            shed,
        },
        hours,
    })
}

/// Hourly commitment, dispatch, flows, and the recomputed cost split.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentSolution {
    pub hours: usize,
    /// Dispatch in MW, `[unit][hour]`.
    pub g: Vec<Vec<f64>>,
    pub on: Vec<Vec<bool>>,
    pub started: Vec<Vec<bool>>,
    pub stopped: Vec<Vec<bool>>,
    /// Line flows in MW, `[line][hour]`; empty without lines.
    pub flow: Vec<Vec<f64>>,
    /// Bus angles in radians, `[bus][hour]`; empty without lines.
    pub angle: Vec<Vec<f64>>,
    /// Shed energy in MW, `[bus][hour]`; empty unless enabled.
    pub shed: Vec<Vec<f64>>,
    pub cost_fixed: f64,
    pub cost_startup: f64,
    pub cost_variable: f64,
    pub cost_total: f64,
    /// Relative MIP gap reported by the backend.
    pub gap: Option<f64>,
}

impl CommitmentSolution {
    /// Total generation of one unit over the hours `[start, end)`, MWh.
    pub fn unit_energy(&self, unit: usize, start: usize, end: usize) -> f64 {
        self.g[unit][start..end].iter().sum()
    }
}

/// Recompute the (fixed, startup, variable) cost split from primal
/// values, pricing dispatch by merit-order block filling rather than
/// trusting the solver objective.
pub(crate) fn reprice(case: &NetworkCase, g: &[Vec<f64>], on: &[Vec<bool>], started: &[Vec<bool>], hours: usize) -> (f64, f64, f64) {
    let mut fixed = 0.0;
    let mut startup = 0.0;
    let mut variable = 0.0;
    for (i, unit) in case.units.iter().enumerate() {
        for t in 0..hours {
            if on[i][t] {
                fixed += unit.fixed_cost;
            }
            if started[i][t] {
                startup += unit.startup_cost;
            }
            variable += unit.merit_order_cost(g[i][t]);
        }
    }
    (fixed, startup, variable)
}

/// Build and solve one window, returning the extracted solution.
pub fn solve_ucm(
    case: &NetworkCase,
    demand: &DemandSeries,
    hours: usize,
    init: &InitialConditions,
    config: &UcmConfig,
) -> Result<CommitmentSolution, UcmError> {
    // Capacity shortfall is reported with the first binding hour; the
    // solver is only asked about instances that pass this screen.
    if config.shed_penalty.is_none() {
        let total_p_max = case.total_p_max();
        for t in 0..hours.min(demand.horizon_hours()) {
            let system: f64 = case.buses.iter().map(|&b| demand.get(b, t)).sum();
            if system > total_p_max + AUDIT_TOLERANCE {
                return Err(UcmError::Infeasible { binding_hour: Some(t) });
            }
        }
    }

    let model = build_ucm(case, demand, hours, init, config)?;
    let result = model.builder.solve(&config.solve)?;
    match result.status {
        SolveStatus::Optimal | SolveStatus::GapLimit => {}
        SolveStatus::Infeasible | SolveStatus::Unbounded => {
            return Err(UcmError::Infeasible { binding_hour: None })
        }
    }

    let vars = &model.vars;
    let n_units = case.units.len();
    let mut g = vec![vec![0.0; hours]; n_units];
    let mut on = vec![vec![false; hours]; n_units];
    let mut started = vec![vec![false; hours]; n_units];
    let mut stopped = vec![vec![false; hours]; n_units];
    for i in 0..n_units {
        for t in 0..hours {
            g[i][t] = result.value(vars.g[i][t]).max(0.0);
            on[i][t] = result.value(vars.u[i][t]) > 0.5;
            started[i][t] = result.value(vars.v[i][t]) > 0.5;
            stopped[i][t] = result.value(vars.w[i][t]) > 0.5;
        }
    }
    let flow = vars
        .flow
        .iter()
        .map(|row| row.iter().map(|&h| result.value(h)).collect())
        .collect();
    let angle = vars
        .angle
        .iter()
        .map(|row| row.iter().map(|&h| result.value(h)).collect())
        .collect();
    let shed = vars
        .shed
        .iter()
        .map(|row| row.iter().map(|&h| result.value(h)).collect())
        .collect();

    let (cost_fixed, cost_startup, cost_variable) = reprice(case, &g, &on, &started, hours);
    Ok(CommitmentSolution {
        hours,
        g,
        on,
        started,
        stopped,
        flow,
        angle,
        shed,
        cost_fixed,
        cost_startup,
        cost_variable,
        cost_total: cost_fixed + cost_startup + cost_variable,
        gap: result.mip_gap,
    })
}

fn violation(out: &mut Vec<Violation>, entity: String, message: String) {
    out.push(Violation::new(entity, message));
}

/// Re-check a claimed solution against every constraint family, within
/// [`AUDIT_TOLERANCE`] MW, including transitions from `init`.
pub fn audit_solution(
    case: &NetworkCase,
    demand: &DemandSeries,
    solution: &CommitmentSolution,
    init: &InitialConditions,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let hours = solution.hours;
    let tol = AUDIT_TOLERANCE;

    if solution.g.len() != case.units.len() {
        violation(
            &mut out,
            "solution".into(),
            format!("{} unit series for {} units", solution.g.len(), case.units.len()),
        );
        return out;
    }

    for (i, unit) in case.units.iter().enumerate() {
        let entity = |t: usize| format!("unit {} hour {t}", unit.id);
        let su = startup_ramp(unit);
        let sd = shutdown_ramp(unit);
        let state = &init.units[i];

        for t in 0..hours {
            let g = solution.g[i][t];
            let on = solution.on[i][t];
            let started = solution.started[i][t];
            let stopped = solution.stopped[i][t];

            if on {
                if g < unit.p_min - tol || g > unit.p_max + tol {
                    violation(&mut out, entity(t), format!("dispatch {g} outside [{}, {}]", unit.p_min, unit.p_max));
                }
            } else if g.abs() > tol {
                violation(&mut out, entity(t), format!("offline but dispatching {g}"));
            }

            let prev_on = if t == 0 { state.on } else { solution.on[i][t - 1] };
            let delta = (on as i32) - (prev_on as i32);
            if delta != (started as i32) - (stopped as i32) {
                violation(&mut out, entity(t), "transition logic broken (u - u_prev != v - w)".into());
            }
            if started && stopped {
                violation(&mut out, entity(t), "startup and shutdown in the same hour".into());
            }

            let g_prev = if t == 0 { state.g0 } else { solution.g[i][t - 1] };
            let up_room = unit.ramp_up * (prev_on as i32 as f64) + su * (started as i32 as f64);
            if g - g_prev > up_room + tol {
                violation(&mut out, entity(t), format!("ramp up {} exceeds {up_room}", g - g_prev));
            }
            let down_room = unit.ramp_down * (on as i32 as f64) + sd * (stopped as i32 as f64);
            if g_prev - g > down_room + tol {
                violation(&mut out, entity(t), format!("ramp down {} exceeds {down_room}", g_prev - g));
            }

            // Rajan-Takriti style windows over the in-window events.
            let up_from = (t + 1).saturating_sub(unit.min_up as usize);
            let recent_starts = (up_from..=t).filter(|&tau| solution.started[i][tau]).count();
            if recent_starts > on as usize {
                violation(&mut out, entity(t), format!("offline within {} h of a start", unit.min_up));
            }
            let down_from = (t + 1).saturating_sub(unit.min_down as usize);
            let recent_stops = (down_from..=t).filter(|&tau| solution.stopped[i][tau]).count();
            if recent_stops > 1 - on as usize {
                violation(&mut out, entity(t), format!("online within {} h of a shutdown", unit.min_down));
            }
        }

        // Carryover from the initial state.
        if state.on {
            let remaining = (unit.min_up.saturating_sub(state.hours_on)) as usize;
            for t in 0..remaining.min(hours) {
                if !solution.on[i][t] {
                    violation(&mut out, entity(t), format!("must stay online {remaining} h from the window start"));
                }
            }
        } else {
            let remaining = (unit.min_down.saturating_sub(state.hours_off)) as usize;
            for t in 0..remaining.min(hours) {
                if solution.on[i][t] {
                    violation(&mut out, entity(t), format!("must stay offline {remaining} h from the window start"));
                }
            }
        }

        if let Some(budget) = unit.energy_budget {
            let used = solution.unit_energy(i, 0, hours);
            if used > budget + tol {
                violation(&mut out, format!("unit {}", unit.id), format!("energy {used} MWh exceeds budget {budget}"));
            }
        }
    }

    // Flows against angles and capacities.
    if !case.lines.is_empty() && !solution.angle.is_empty() {
        let bus_pos: BTreeMap<BusId, usize> =
            case.buses.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let ref_pos = bus_pos[&case.reference_bus];
        for t in 0..hours {
            if solution.angle[ref_pos][t].abs() > tol {
                violation(&mut out, format!("bus {} hour {t}", case.reference_bus), "reference angle not zero".into());
            }
        }
        for (l, line) in case.lines.iter().enumerate() {
            for t in 0..hours {
                let from = solution.angle[bus_pos[&line.from_bus]][t];
                let to = solution.angle[bus_pos[&line.to_bus]][t];
                let implied = case.base_mva * line.susceptance * (from - to);
                let stored = solution.flow[l][t];
                if (implied - stored).abs() > tol {
                    violation(
                        &mut out,
                        format!("line {} hour {t}", line.id),
                        format!("flow {stored} disagrees with angle-implied {implied}"),
                    );
                }
                if stored.abs() > line.capacity + tol {
                    violation(&mut out, format!("line {} hour {t}", line.id), format!("flow {stored} exceeds capacity {}", line.capacity));
                }
            }
        }
    }

    // Nodal balance.
    for (s, &bus) in case.buses.iter().enumerate() {
        for t in 0..hours {
            let mut lhs = 0.0;
            for (i, unit) in case.units.iter().enumerate() {
                if unit.bus == bus {
                    lhs += solution.g[i][t];
                }
            }
            if !case.lines.is_empty() && !solution.flow.is_empty() {
                for (l, line) in case.lines.iter().enumerate() {
                    if line.to_bus == bus {
                        lhs += solution.flow[l][t];
                    }
                    if line.from_bus == bus {
                        lhs -= solution.flow[l][t];
                    }
                }
            }
            if !solution.shed.is_empty() {
                lhs += solution.shed[s][t];
            }
            let rhs = demand.get(bus, t);
            if (lhs - rhs).abs() > tol {
                violation(&mut out, format!("bus {bus} hour {t}"), format!("balance off by {}", lhs - rhs));
            }
        }
    }

    // Cost split consistency.
    let expected_total = solution.cost_fixed + solution.cost_startup + solution.cost_variable;
    if (solution.cost_total - expected_total).abs() > tol {
        violation(&mut out, "solution".into(), format!("cost split sums to {expected_total}, total says {}", solution.cost_total));
    }

    out
}

/// Serialize a solution to the archive format: a `[commitment]` table,
/// `[flows]` and `[angles]` tables, and a `[costs]` summary.
pub fn emit_solution_archive(case: &NetworkCase, solution: &CommitmentSolution) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    out.push_str("[commitment]\nunit,hour,u,v,w,g_mw\n");
    for (i, unit) in case.units.iter().enumerate() {
        for t in 0..solution.hours {
            let _ = writeln!(
                out,
                "{},{t},{},{},{},{}",
                unit.id,
                solution.on[i][t] as u8,
                solution.started[i][t] as u8,
                solution.stopped[i][t] as u8,
                solution.g[i][t]
            );
        }
    }
    out.push_str("\n[flows]\nline,hour,flow_mw\n");
    for (l, line) in case.lines.iter().enumerate() {
        for t in 0..solution.hours {
            let _ = writeln!(out, "{},{t},{}", line.id, solution.flow[l][t]);
        }
    }
    out.push_str("\n[angles]\nbus,hour,angle_rad\n");
    for (s, bus) in case.buses.iter().enumerate() {
        if solution.angle.is_empty() {
            break;
        }
        for t in 0..solution.hours {
            let _ = writeln!(out, "{bus},{t},{}", solution.angle[s][t]);
        }
    }
    out.push_str("\n[costs]\n");
    let _ = writeln!(out, "cost_fixed,{}", solution.cost_fixed);
    let _ = writeln!(out, "cost_startup,{}", solution.cost_startup);
    let _ = writeln!(out, "cost_variable,{}", solution.cost_variable);
    let _ = writeln!(out, "cost_total,{}", solution.cost_total);
    out
}

/// Parse an archive produced by [`emit_solution_archive`].
pub fn parse_solution_archive(case: &NetworkCase, text: &str) -> Result<CommitmentSolution, UcmError> {
    let err = |line: usize, message: String| UcmError::Archive { line, message };
    let mut section = "";
    let mut commitment: Vec<(usize, usize, bool, bool, bool, f64)> = Vec::new();
    let mut flows: Vec<(usize, usize, f64)> = Vec::new();
    let mut angles: Vec<(usize, usize, f64)> = Vec::new();
    let mut costs: BTreeMap<String, f64> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name {
                "commitment" | "flows" | "angles" | "costs" => name,
                other => return Err(err(line_no, format!("unknown section [{other}]"))),
            };
            continue;
        }
        if line == "unit,hour,u,v,w,g_mw" || line == "line,hour,flow_mw" || line == "bus,hour,angle_rad" {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| err(line_no, format!("bad number `{s}`")));
        let parse_t = |s: &str| s.parse::<usize>().map_err(|_| err(line_no, format!("bad hour `{s}`")));
        match section {
            "commitment" => {
                if f.len() != 6 {
                    return Err(err(line_no, "expected unit,hour,u,v,w,g_mw".into()));
                }
                let unit = case
                    .unit_index(f[0])
                    .ok_or_else(|| err(line_no, format!("unknown unit `{}`", f[0])))?;
                commitment.push((
                    unit,
                    parse_t(f[1])?,
                    f[2] == "1",
                    f[3] == "1",
                    f[4] == "1",
                    parse_f(f[5])?,
                ));
            }
            "flows" => {
                if f.len() != 3 {
                    return Err(err(line_no, "expected line,hour,flow_mw".into()));
                }
                let l = case
                    .lines
                    .iter()
                    .position(|x| x.id == f[0])
                    .ok_or_else(|| err(line_no, format!("unknown line `{}`", f[0])))?;
                flows.push((l, parse_t(f[1])?, parse_f(f[2])?));
            }
            "angles" => {
                if f.len() != 3 {
                    return Err(err(line_no, "expected bus,hour,angle_rad".into()));
                }
                let bus: u32 = f[0].parse().map_err(|_| err(line_no, format!("bad bus `{}`", f[0])))?;
                let s = case
                    .buses
                    .iter()
                    .position(|&b| b == BusId(bus))
                    .ok_or_else(|| err(line_no, format!("unknown bus `{bus}`")))?;
                angles.push((s, parse_t(f[1])?, parse_f(f[2])?));
            }
            "costs" => {
                if f.len() != 2 {
                    return Err(err(line_no, "expected key,value".into()));
                }
                costs.insert(f[0].to_string(), parse_f(f[1])?);
            }
            _ => return Err(err(line_no, "record before any [section] header".into())),
        }
    }

    let hours = commitment
        .iter()
        .map(|&(_, t, ..)| t + 1)
        .max()
        .ok_or_else(|| err(0, "empty [commitment] table".into()))?;
    let n_units = case.units.len();
    let mut solution = CommitmentSolution {
        hours,
        g: vec![vec![0.0; hours]; n_units],
        on: vec![vec![false; hours]; n_units],
        started: vec![vec![false; hours]; n_units],
        stopped: vec![vec![false; hours]; n_units],
        flow: if flows.is_empty() { Vec::new() } else { vec![vec![0.0; hours]; case.lines.len()] },
        angle: if angles.is_empty() { Vec::new() } else { vec![vec![0.0; hours]; case.buses.len()] },
        shed: Vec::new(),
        cost_fixed: costs.get("cost_fixed").copied().unwrap_or(0.0),
        cost_startup: costs.get("cost_startup").copied().unwrap_or(0.0),
        cost_variable: costs.get("cost_variable").copied().unwrap_or(0.0),
        cost_total: costs.get("cost_total").copied().unwrap_or(0.0),
        gap: None,
    };
    for (i, t, u, v, w, g) in commitment {
        solution.on[i][t] = u;
        solution.started[i][t] = v;
        solution.stopped[i][t] = w;
        solution.g[i][t] = g;
    }
    for (l, t, f) in flows {
        solution.flow[l][t] = f;
    }
    for (s, t, a) in angles {
        solution.angle[s][t] = a;
    }
    Ok(solution)
}
