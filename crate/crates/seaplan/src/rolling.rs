//! Rolling-horizon decomposition of a month into overlapping windows.
//!
//! A 720-hour month is solved as four 216-hour commitment problems. The
//! first seven days of each window are kept; the two lookahead days
//! only stabilize decisions near the boundary. Each window starts from
//! the terminal state of its predecessor's retained segment, and the
//! retained segments are stitched into one monthly solution.

use std::collections::BTreeMap;
use std::time::Instant;

use thiserror::Error;

use crate::forecast::{DemandSeries, HOURS_PER_MONTH};
use crate::system::NetworkCase;
use crate::ucm::{
    self, audit_solution, solve_ucm, CommitmentSolution, InitialConditions, UcmConfig, UcmError,
    UnitState,
};
use crate::system::Violation;

/// One window of the rolling scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    /// 0-based offset within the month.
    pub start_hour: usize,
    /// Solve horizon of this window.
    pub length_hours: usize,
    /// Prefix of the solve kept in the monthly solution.
    pub retained_hours: usize,
}

/// Window shape: how long each solve is and how much of it is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPolicy {
    pub retained_hours: usize,
    pub window_hours: usize,
}

impl Default for WindowPolicy {
    /// Nine-day windows retaining seven days.
    fn default() -> Self {
        Self {
            retained_hours: 168,
            window_hours: 216,
        }
    }
}

#[derive(Debug, Error)]
pub enum RollingError {
    #[error("unsupported month length {0} h (expected {HOURS_PER_MONTH})")]
    UnsupportedMonthLength(usize),
    #[error("window policy retained {retained} / window {window} is invalid")]
    BadPolicy { retained: usize, window: usize },
    #[error("boundary hour {at_hour} outside the {hours} h window")]
    BoundaryOutsideWindow { at_hour: usize, hours: usize },
    #[error("window {window} (hours {start}..): {source}")]
    Window {
        window: usize,
        start: usize,
        source: UcmError,
    },
}

/// The paper's fixed monthly scheme: four windows starting at hours
/// 0, 168, 336 and 504, each 216 h long; the last one keeps all nine
/// days so the retained segments cover the month exactly.
pub fn plan_windows(month_hours: usize) -> Result<Vec<WindowPlan>, RollingError> {
    if month_hours != HOURS_PER_MONTH {
        return Err(RollingError::UnsupportedMonthLength(month_hours));
    }
    plan_windows_with(WindowPolicy::default(), month_hours)
}

/// Generalized window plan, used for reduced test months.
pub fn plan_windows_with(policy: WindowPolicy, month_hours: usize) -> Result<Vec<WindowPlan>, RollingError> {
    if policy.retained_hours == 0 || policy.retained_hours > policy.window_hours {
        return Err(RollingError::BadPolicy {
            retained: policy.retained_hours,
            window: policy.window_hours,
        });
    }
    let mut plans = Vec::new();
    let mut start = 0;
    while start < month_hours {
        let length = policy.window_hours.min(month_hours - start);
        let reaches_end = start + length >= month_hours;
        let retained = if reaches_end { length } else { policy.retained_hours.min(length) };
        plans.push(WindowPlan {
            start_hour: start,
            length_hours: length,
            retained_hours: retained,
        });
        start += retained;
    }
    Ok(plans)
}

/// Read the commitment state at the end of hour `at_hour - 1`, counting
/// consecutive on/off hours through the window's own initial state when
/// the run spans the whole prefix.
pub fn extract_initial_conditions(
    case: &NetworkCase,
    solution: &CommitmentSolution,
    window_init: &InitialConditions,
    at_hour: usize,
) -> Result<InitialConditions, RollingError> {
    if at_hour == 0 || at_hour > solution.hours {
        return Err(RollingError::BoundaryOutsideWindow {
            at_hour,
            hours: solution.hours,
        });
    }
    let boundary = at_hour - 1;
    let mut units = Vec::with_capacity(case.units.len());
    for (i, unit) in case.units.iter().enumerate() {
        let on = solution.on[i][boundary];
        let mut run = 0usize;
        for t in (0..=boundary).rev() {
            if solution.on[i][t] == on {
                run += 1;
            } else {
                break;
            }
        }
        let prior = &window_init.units[i];
        let mut run = run as u32;
        if run as usize == at_hour && prior.on == on {
            run += if on { prior.hours_on } else { prior.hours_off };
        }
        // Solver values can sit a hair outside the box; the handed-over
        // state must satisfy the initial-condition invariants exactly.
        let g0 = if on {
            solution.g[i][boundary].clamp(unit.p_min, unit.p_max)
        } else {
            0.0
        };
        units.push(UnitState {
            g0,
            on,
            hours_on: if on { run } else { 0 },
            hours_off: if on { 0 } else { run },
        });
    }
    Ok(InitialConditions { units })
}

/// Pro-rata share of the remaining energy budget for one window.
pub fn allocate_window_budget(remaining_budget: f64, window: &WindowPlan, hours_left_in_month: usize) -> f64 {
    if hours_left_in_month == 0 {
        return 0.0;
    }
    let pro_rata = remaining_budget * window.length_hours as f64 / hours_left_in_month as f64;
    remaining_budget.min(pro_rata)
}

/// Per-window solve statistics.
#[derive(Debug, Clone)]
pub struct WindowStats {
    pub window: usize,
    pub start_hour: usize,
    /// Recomputed cost of the whole window, lookahead included.
    pub objective: f64,
    pub gap: Option<f64>,
    pub wall_seconds: f64,
}

/// A stitched month: retained segments of every window, with the cost
/// split recomputed from the stitched primal values.
#[derive(Debug, Clone)]
pub struct MonthlySolution {
    pub solution: CommitmentSolution,
    pub windows: Vec<WindowStats>,
    /// State at the end of the month, for `--chain-months`.
    pub final_state: InitialConditions,
}

impl MonthlySolution {
    /// Emit the `window,start_hour,objective,gap,wall_seconds` table.
    pub fn stats_table(&self) -> String {
        let mut out = String::from("window,start_hour,objective,gap,wall_seconds\n");
        for w in &self.windows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                w.window,
                w.start_hour,
                w.objective,
                w.gap.unwrap_or(0.0),
                w.wall_seconds
            ));
        }
        out
    }
}

/// Solve a month window by window, handing state across boundaries and
/// stitching the retained segments.
pub fn solve_month(
    case: &NetworkCase,
    demand: &DemandSeries,
    init0: &InitialConditions,
    config: &UcmConfig,
    policy: WindowPolicy,
) -> Result<MonthlySolution, RollingError> {
    let month_hours = demand.horizon_hours();
    let plans = plan_windows_with(policy, month_hours)?;
    let n_units = case.units.len();
    let use_network = !case.lines.is_empty();
    let use_shed = config.shed_penalty.is_some();

    let mut stitched = CommitmentSolution {
        hours: month_hours,
        g: vec![vec![0.0; month_hours]; n_units],
        on: vec![vec![false; month_hours]; n_units],
        started: vec![vec![false; month_hours]; n_units],
        stopped: vec![vec![false; month_hours]; n_units],
        flow: if use_network { vec![vec![0.0; month_hours]; case.lines.len()] } else { Vec::new() },
        angle: if use_network { vec![vec![0.0; month_hours]; case.buses.len()] } else { Vec::new() },
        shed: if use_shed { vec![vec![0.0; month_hours]; case.buses.len()] } else { Vec::new() },
        cost_fixed: 0.0,
        cost_startup: 0.0,
        cost_variable: 0.0,
        cost_total: 0.0,
        gap: None,
    };

    let mut remaining: BTreeMap<String, f64> = case
        .units
        .iter()
        .filter_map(|u| u.energy_budget.map(|b| (u.id.clone(), b)))
        .collect();
    let mut init = init0.clone();
    let mut stats = Vec::with_capacity(plans.len());

    for (w, plan) in plans.iter().enumerate() {
        let mut window_config = config.clone();
        window_config.window_energy_caps = remaining
            .iter()
            .map(|(id, &budget)| {
                (id.clone(), allocate_window_budget(budget, plan, month_hours - plan.start_hour))
            })
            .collect();

        let window_demand = demand.slice(plan.start_hour, plan.start_hour + plan.length_hours);
        let clock = Instant::now();
        let solution = solve_ucm(case, &window_demand, plan.length_hours, &init, &window_config)
            .map_err(|source| RollingError::Window {
                window: w,
                start: plan.start_hour,
                source,
            })?;
        let wall_seconds = clock.elapsed().as_secs_f64();
        stats.push(WindowStats {
            window: w,
            start_hour: plan.start_hour,
            objective: solution.cost_total,
            gap: solution.gap,
            wall_seconds,
        });

        for t in 0..plan.retained_hours {
            let global = plan.start_hour + t;
            for i in 0..n_units {
                stitched.g[i][global] = solution.g[i][t];
                stitched.on[i][global] = solution.on[i][t];
                stitched.started[i][global] = solution.started[i][t];
                stitched.stopped[i][global] = solution.stopped[i][t];
            }
            for l in 0..stitched.flow.len() {
                stitched.flow[l][global] = solution.flow[l][t];
            }
            for s in 0..stitched.angle.len() {
                stitched.angle[s][global] = solution.angle[s][t];
            }
            for s in 0..stitched.shed.len() {
                stitched.shed[s][global] = solution.shed[s][t];
            }
        }

        for (i, unit) in case.units.iter().enumerate() {
            if let Some(budget) = remaining.get_mut(&unit.id) {
                *budget = (*budget - solution.unit_energy(i, 0, plan.retained_hours)).max(0.0);
            }
        }

        if w + 1 < plans.len() {
            init = extract_initial_conditions(case, &solution, &init, plan.retained_hours)?;
        } else {
            init = extract_initial_conditions(case, &solution, &init, plan.length_hours)?;
        }
    }

    let (fixed, startup, variable) = ucm::reprice(
        case,
        &stitched.g,
        &stitched.on,
        &stitched.started,
        month_hours,
    );
    stitched.cost_fixed = fixed;
    stitched.cost_startup = startup;
    stitched.cost_variable = variable;
    stitched.cost_total = fixed + startup + variable;
    stitched.gap = stats.iter().filter_map(|s| s.gap).fold(None, |acc, g| {
        Some(acc.map_or(g, |a: f64| a.max(g)))
    });

    Ok(MonthlySolution {
        solution: stitched,
        windows: stats,
        final_state: init,
    })
}

/// Month-level audit: the stitched solution against the full demand.
pub fn audit_month(
    case: &NetworkCase,
    demand: &DemandSeries,
    monthly: &MonthlySolution,
    init0: &InitialConditions,
) -> Vec<Violation> {
    audit_solution(case, demand, &monthly.solution, init0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::DemandSeries;
    use crate::solver::SolveOptions;
    use crate::system::{parse_case, BusId};

    fn exact() -> UcmConfig {
        UcmConfig {
            solve: SolveOptions { mip_gap: 0.0, ..SolveOptions::default() },
            ..UcmConfig::default()
        }
    }

    #[test]
    fn monthly_plan_matches_the_fixed_scheme() {
        let plans = plan_windows(720).unwrap();
        assert_eq!(plans.len(), 4);
        assert_eq!(plans.iter().map(|p| p.start_hour).collect::<Vec<_>>(), vec![0, 168, 336, 504]);
        assert!(plans.iter().all(|p| p.length_hours == 216));
        assert_eq!(plans.iter().map(|p| p.retained_hours).collect::<Vec<_>>(), vec![168, 168, 168, 216]);
        assert_eq!(plans.iter().map(|p| p.retained_hours).sum::<usize>(), 720);
    }

    #[test]
    fn non_monthly_lengths_are_rejected() {
        assert!(matches!(plan_windows(48), Err(RollingError::UnsupportedMonthLength(48))));
    }

    #[test]
    fn general_plans_cover_each_hour_exactly_once() {
        for (retained, window, month) in [(24, 36, 48), (24, 36, 96), (10, 25, 73), (168, 216, 720)] {
            let policy = WindowPolicy { retained_hours: retained, window_hours: window };
            let plans = plan_windows_with(policy, month).unwrap();
            let mut covered = vec![0u8; month];
            for p in &plans {
                assert!(p.retained_hours <= p.length_hours);
                assert!(p.start_hour + p.length_hours <= month);
                for t in p.start_hour..p.start_hour + p.retained_hours {
                    covered[t] += 1;
                }
            }
            assert!(covered.iter().all(|&c| c == 1), "{retained}/{window}/{month}");
            for pair in plans.windows(2) {
                assert_eq!(pair[1].start_hour, pair[0].start_hour + pair[0].retained_hours);
            }
        }
    }

    fn synthetic_solution(on: Vec<bool>, g: Vec<f64>) -> CommitmentSolution {
        let hours = on.len();
        let mut started = vec![false; hours];
        let mut stopped = vec![false; hours];
        for t in 1..hours {
            started[t] = on[t] && !on[t - 1];
            stopped[t] = !on[t] && on[t - 1];
        }
        CommitmentSolution {
            hours,
            g: vec![g],
            on: vec![on],
            started: vec![started],
            stopped: vec![stopped],
            flow: Vec::new(),
            angle: Vec::new(),
            shed: Vec::new(),
            cost_fixed: 0.0,
            cost_startup: 0.0,
            cost_variable: 0.0,
            cost_total: 0.0,
            gap: None,
        }
    }

    fn toy_case() -> crate::system::NetworkCase {
        parse_case(
            "[meta]\nreference_bus,1\n[buses]\n1\n[generators]\nG1,1,gas,10,100,100,100,1,1,50,5,100:20,\n[shares]\n1,1.0\n",
        )
        .unwrap()
    }

    #[test]
    fn boundary_state_counts_a_full_on_span() {
        let case = toy_case();
        let init = InitialConditions::cold_start(&case);
        let sol = synthetic_solution(vec![true; 168], vec![60.0; 168]);
        let state = extract_initial_conditions(&case, &sol, &init, 168).unwrap();
        assert!(state.units[0].on);
        assert_eq!(state.units[0].hours_on, 168);
        assert_eq!(state.units[0].hours_off, 0);
        assert_eq!(state.units[0].g0, 60.0);
    }

    #[test]
    fn boundary_state_counts_hours_since_shutdown() {
        let case = toy_case();
        let init = InitialConditions::cold_start(&case);
        let mut on = vec![true; 168];
        on[166] = false;
        on[167] = false;
        let mut g = vec![60.0; 168];
        g[166] = 0.0;
        g[167] = 0.0;
        let sol = synthetic_solution(on, g);
        let state = extract_initial_conditions(&case, &sol, &init, 168).unwrap();
        assert!(!state.units[0].on);
        assert_eq!(state.units[0].hours_off, 2);
        assert_eq!(state.units[0].g0, 0.0);
    }

    #[test]
    fn boundary_state_continues_counts_across_the_window_start() {
        let case = toy_case();
        let mut init = InitialConditions::cold_start(&case);
        init.units[0] = UnitState { g0: 50.0, on: true, hours_on: 5, hours_off: 0 };
        let sol = synthetic_solution(vec![true; 168], vec![60.0; 168]);
        let state = extract_initial_conditions(&case, &sol, &init, 168).unwrap();
        assert_eq!(state.units[0].hours_on, 173);
    }

    #[test]
    fn boundary_outside_window_is_rejected() {
        let case = toy_case();
        let init = InitialConditions::cold_start(&case);
        let sol = synthetic_solution(vec![true; 24], vec![60.0; 24]);
        assert!(matches!(
            extract_initial_conditions(&case, &sol, &init, 25),
            Err(RollingError::BoundaryOutsideWindow { .. })
        ));
    }

    #[test]
    fn budget_allocation_is_pro_rata_with_carryover_cap() {
        let window = WindowPlan { start_hour: 0, length_hours: 216, retained_hours: 168 };
        assert!((allocate_window_budget(3000.0, &window, 720) - 900.0).abs() < 1e-12);
        assert_eq!(allocate_window_budget(0.0, &window, 720), 0.0);
        // Last window takes whatever is left.
        let last = WindowPlan { start_hour: 504, length_hours: 216, retained_hours: 216 };
        assert!((allocate_window_budget(500.0, &last, 216) - 500.0).abs() < 1e-12);
    }

    #[test]
    fn always_on_toy_month_stitches_to_the_monolithic_cost() {
        let case = toy_case();
        let init = InitialConditions::cold_start(&case);
        let demand = DemandSeries::new([(BusId(1), vec![50.0; 720])].into()).unwrap();
        let monthly = solve_month(&case, &demand, &init, &exact(), WindowPolicy::default()).unwrap();
        let monolithic = solve_ucm(&case, &demand, 720, &init, &exact()).unwrap();
        assert!((monthly.solution.cost_total - monolithic.cost_total).abs() < 1e-6);
        assert_eq!(monthly.windows.len(), 4);
        assert!(audit_month(&case, &demand, &monthly, &init).is_empty());
    }

    #[test]
    fn reduced_month_stitches_cleanly_and_respects_budgets() {
        let case = parse_case(
            "[meta]\nreference_bus,1\n[buses]\n1\n[generators]\n\
             A,1,coal,20,80,30,30,3,3,200,15,50:18;30:24,\n\
             H,1,hydro,0,60,60,60,1,1,0,0,60:0.5,600\n\
             B,1,gas,5,60,60,60,1,1,40,6,60:35,\n\
             [shares]\n1,1.0\n",
        )
        .unwrap();
        let init = InitialConditions::cold_start(&case);
        let demand: Vec<f64> = (0..48)
            .map(|t| 60.0 + 50.0 * (std::f64::consts::TAU * (t as f64) / 24.0).sin().max(-0.8))
            .collect();
        let demand = DemandSeries::new([(BusId(1), demand)].into()).unwrap();
        let policy = WindowPolicy { retained_hours: 24, window_hours: 36 };
        let monthly = solve_month(&case, &demand, &init, &exact(), policy).unwrap();

        assert!(audit_month(&case, &demand, &monthly, &init).is_empty());
        let hydro_energy: f64 = monthly.solution.g[1].iter().sum();
        assert!(hydro_energy <= 600.0 + 1e-6);

        // Stitching is a restriction of the monolithic problem.
        let monolithic = solve_ucm(&case, &demand, 48, &init, &exact()).unwrap();
        assert!(monthly.solution.cost_total >= monolithic.cost_total - 1e-6);
    }
}
