//! The repurposed energy-system model: a pure LP monthly dispatch.
//!
//! No commitment binaries exist, so minimum output levels, startup
//! costs, and up/down times disappear; ramp limits stay, and hourly
//! fixed costs are folded into the block prices as `FC / p_max` so that
//! running a unit still carries roughly its fixed burden. After the
//! solve, an ex-post pass books the true fixed costs by counting the
//! hours each unit actually operated.

use std::time::Instant;

use thiserror::Error;

use crate::forecast::DemandSeries;
use crate::solver::{ModelBuilder, SolveOptions, SolveStatus, SolverError, VariableHandle};
use crate::system::NetworkCase;

#[derive(Debug, Clone)]
pub struct EsomConfig {
    /// Fold `FC / p_max` into every block price (on by default).
    pub fold_fixed_costs: bool,
    /// Model the DC network; off by default (copper plate).
    pub include_network: bool,
    /// Apply hourly ramp limits between consecutive hours.
    pub include_ramps: bool,
    /// Output above this threshold counts as "operating" in the ex-post
    /// fixed-cost pass, MW.
    pub on_epsilon: f64,
    pub solve: SolveOptions,
}

impl Default for EsomConfig {
    fn default() -> Self {
        Self {
            fold_fixed_costs: true,
            include_network: false,
            include_ramps: true,
            on_epsilon: 1e-6,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EsomError {
    #[error("on_epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("infeasible{}", binding_hour.map(|h| format!(" (capacity short at hour {h})")).unwrap_or_default())]
    Infeasible { binding_hour: Option<usize> },
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
}

/// Block prices with each unit's hourly fixed cost amortized over full
/// output: `c_ik + FC_i / p_max_i`. The original case is untouched; the
/// ex-post pass keeps pricing at the raw costs.
pub fn fold_fixed_costs(case: &NetworkCase) -> Vec<Vec<f64>> {
    case.units
        .iter()
        .map(|u| {
            let adder = u.fixed_cost / u.p_max;
            u.blocks.iter().map(|b| b.marginal_cost + adder).collect()
        })
        .collect()
}

/// Index map of the dispatch LP's variables.
pub struct EsomVariables {
    /// Block dispatch, `[unit][hour][block]`.
    pub blocks: Vec<Vec<Vec<VariableHandle>>>,
    /// Line flow, `[line][hour]`; only in network mode.
    pub flow: Vec<Vec<VariableHandle>>,
    /// Bus angles; only in network mode.
    pub angle: Vec<Vec<VariableHandle>>,
}

/// A built (not yet solved) dispatch LP.
pub struct EsomModel {
    pub builder: ModelBuilder,
    pub vars: EsomVariables,
    pub hours: usize,
}

/// Assemble the monthly dispatch LP over the whole demand horizon.
pub fn build_esom(case: &NetworkCase, demand: &DemandSeries, config: &EsomConfig) -> Result<EsomModel, EsomError> {
    if config.on_epsilon <= 0.0 {
        return Err(EsomError::BadEpsilon(config.on_epsilon));
    }
    let hours = demand.horizon_hours();
    let folded = fold_fixed_costs(case);
    let mut m = ModelBuilder::new();

    let blocks: Vec<Vec<Vec<VariableHandle>>> = case
        .units
        .iter()
        .enumerate()
        .map(|(i, unit)| {
            (0..hours)
                .map(|_| {
                    unit.blocks
                        .iter()
                        .enumerate()
                        .map(|(k, b)| {
                            let price = if config.fold_fixed_costs {
                                folded[i][k]
                            } else {
                                b.marginal_cost
                            };
                            m.add_continuous(0.0, b.size_mw, price)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut flow: Vec<Vec<VariableHandle>> = Vec::new();
    let mut angle: Vec<Vec<VariableHandle>> = Vec::new();
    if config.include_network && !case.lines.is_empty() {
        for line in &case.lines {
            flow.push((0..hours).map(|_| m.add_continuous(-line.capacity, line.capacity, 0.0)).collect());
        }
        for bus in &case.buses {
            let bound = if *bus == case.reference_bus { 0.0 } else { 100.0 };
            angle.push((0..hours).map(|_| m.add_continuous(-bound, bound, 0.0)).collect());
        }
        for (l, line) in case.lines.iter().enumerate() {
            let from = case.buses.iter().position(|&b| b == line.from_bus).unwrap();
            let to = case.buses.iter().position(|&b| b == line.to_bus).unwrap();
            let b_mw = case.base_mva * line.susceptance;
            for t in 0..hours {
                m.eq(vec![(flow[l][t], 1.0), (angle[from][t], -b_mw), (angle[to][t], b_mw)], 0.0);
            }
        }
        for &bus in &case.buses {
            for t in 0..hours {
                let mut terms: Vec<(VariableHandle, f64)> = Vec::new();
                for (i, unit) in case.units.iter().enumerate() {
                    if unit.bus == bus {
                        terms.extend(blocks[i][t].iter().map(|&b| (b, 1.0)));
                    }
                }
                for (l, line) in case.lines.iter().enumerate() {
                    if line.to_bus == bus {
                        terms.push((flow[l][t], 1.0));
                    }
                    if line.from_bus == bus {
                        terms.push((flow[l][t], -1.0));
                    }
                }
                let rhs = demand.get(bus, t);
                if terms.is_empty() {
                    if rhs.abs() > 1e-9 {
                        return Err(EsomError::Infeasible { binding_hour: Some(t) });
                    }
                    continue;
                }
                m.eq(terms, rhs);
            }
        }
    } else {
        // Copper plate: one system-wide balance per hour.
        for t in 0..hours {
            let mut terms: Vec<(VariableHandle, f64)> = Vec::new();
            for unit_blocks in &blocks {
                terms.extend(unit_blocks[t].iter().map(|&b| (b, 1.0)));
            }
            let rhs: f64 = case.buses.iter().map(|&b| demand.get(b, t)).sum();
            if terms.is_empty() {
                if rhs.abs() > 1e-9 {
                    return Err(EsomError::Infeasible { binding_hour: Some(t) });
                }
                continue;
            }
            m.eq(terms, rhs);
        }
    }

    if config.include_ramps {
        for (i, unit) in case.units.iter().enumerate() {
            for t in 1..hours {
                let mut up: Vec<(VariableHandle, f64)> = blocks[i][t].iter().map(|&b| (b, 1.0)).collect();
                up.extend(blocks[i][t - 1].iter().map(|&b| (b, -1.0)));
                m.le(up, unit.ramp_up);
                let mut down: Vec<(VariableHandle, f64)> = blocks[i][t - 1].iter().map(|&b| (b, 1.0)).collect();
                down.extend(blocks[i][t].iter().map(|&b| (b, -1.0)));
                m.le(down, unit.ramp_down);
            }
        }
    }

    for (i, unit) in case.units.iter().enumerate() {
        if let Some(budget) = unit.energy_budget {
            let terms: Vec<(VariableHandle, f64)> = (0..hours)
                .flat_map(|t| blocks[i][t].iter().map(|&b| (b, 1.0)))
                .collect();
            m.le(terms, budget);
        }
    }

    Ok(EsomModel {
        builder: m,
        vars: EsomVariables { blocks, flow, angle },
        hours,
    })
}

/// Hourly dispatch and the reported cost decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    pub hours: usize,
    /// Dispatch in MW, `[unit][hour]`.
    pub g: Vec<Vec<f64>>,
    /// Generation priced at the original (unfolded) block costs.
    pub cost_variable_true: f64,
    /// True fixed costs booked per operating hour after the solve.
    pub cost_fixed_expost: f64,
    /// `cost_variable_true + cost_fixed_expost`.
    pub cost_total_reported: f64,
    /// The folded LP objective, recomputed from primals; diagnostics.
    pub lp_objective: f64,
    pub wall_seconds: f64,
}

impl DispatchSolution {
    pub fn unit_energy(&self, unit: usize, start: usize, end: usize) -> f64 {
        self.g[unit][start..end].iter().sum()
    }
}

/// Solve the dispatch LP and run the ex-post cost accounting.
pub fn solve_esom(case: &NetworkCase, demand: &DemandSeries, config: &EsomConfig) -> Result<DispatchSolution, EsomError> {
    let hours = demand.horizon_hours();
    let total_p_max = case.total_p_max();
    for t in 0..hours {
        if demand.system_at(t) > total_p_max + 1e-6 {
            return Err(EsomError::Infeasible { binding_hour: Some(t) });
        }
    }

    let clock = Instant::now();
    let model = build_esom(case, demand, config)?;
    debug_assert_eq!(model.builder.num_binaries(), 0);
    let result = model.builder.solve(&config.solve)?;
    match result.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible | SolveStatus::Unbounded => {
            return Err(EsomError::Infeasible { binding_hour: None })
        }
        SolveStatus::GapLimit => unreachable!("LP has no gap limit"),
    }

    let folded = fold_fixed_costs(case);
    let mut g = vec![vec![0.0; hours]; case.units.len()];
    let mut cost_variable_true = 0.0;
    let mut lp_objective = 0.0;
    for (i, unit) in case.units.iter().enumerate() {
        for t in 0..hours {
            for (k, block) in unit.blocks.iter().enumerate() {
                let value = result.value(model.vars.blocks[i][t][k]).max(0.0);
                g[i][t] += value;
                cost_variable_true += value * block.marginal_cost;
                lp_objective += value
                    * if config.fold_fixed_costs {
                        folded[i][k]
                    } else {
                        block.marginal_cost
                    };
            }
        }
    }

    let mut cost_fixed_expost = 0.0;
    for (i, unit) in case.units.iter().enumerate() {
        let operating_hours = g[i].iter().filter(|&&v| v > config.on_epsilon).count();
        cost_fixed_expost += unit.fixed_cost * operating_hours as f64;
    }

    Ok(DispatchSolution {
        hours,
        g,
        cost_variable_true,
        cost_fixed_expost,
        cost_total_reported: cost_variable_true + cost_fixed_expost,
        lp_objective,
        wall_seconds: clock.elapsed().as_secs_f64(),
    })
}

/// Serialize a dispatch solution: a `unit,hour,g_mw` table plus a cost
/// summary separating the folded objective from the reported costs.
pub fn emit_dispatch_archive(case: &NetworkCase, solution: &DispatchSolution) -> String {
    use std::fmt::Write;
    let mut out = String::from("[dispatch]\nunit,hour,g_mw\n");
    for (i, unit) in case.units.iter().enumerate() {
        for t in 0..solution.hours {
            let _ = writeln!(out, "{},{t},{}", unit.id, solution.g[i][t]);
        }
    }
    out.push_str("\n[costs]\n");
    let _ = writeln!(out, "lp_objective,{}", solution.lp_objective);
    let _ = writeln!(out, "cost_variable_true,{}", solution.cost_variable_true);
    let _ = writeln!(out, "cost_fixed_expost,{}", solution.cost_fixed_expost);
    let _ = writeln!(out, "cost_total_reported,{}", solution.cost_total_reported);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::DemandSeries;
    use crate::system::{parse_case, BusId};

    fn one_unit_case() -> NetworkCase {
        parse_case(
            "[meta]\nreference_bus,1\n[buses]\n1\n[generators]\nG1,1,gas,10,100,100,100,1,1,50,5,100:20,\n[shares]\n1,1.0\n",
        )
        .unwrap()
    }

    fn flat(mw: f64, hours: usize) -> DemandSeries {
        DemandSeries::new([(BusId(1), vec![mw; hours])].into()).unwrap()
    }

    #[test]
    fn folding_amortizes_fixed_cost_over_p_max() {
        let mut case = one_unit_case();
        case.units[0].fixed_cost = 120.0;
        case.units[0].p_max = 60.0;
        case.units[0].blocks[0].size_mw = 60.0;
        let folded = fold_fixed_costs(&case);
        assert!((folded[0][0] - 22.0).abs() < 1e-12);
    }

    #[test]
    fn folding_is_identity_for_zero_fixed_cost() {
        let mut case = one_unit_case();
        case.units[0].fixed_cost = 0.0;
        let folded = fold_fixed_costs(&case);
        assert_eq!(folded[0][0], 20.0);
    }

    #[test]
    fn folding_preserves_block_ordering() {
        let case = parse_case(
            "[meta]\nreference_bus,1\n[buses]\n1\n[generators]\nG1,1,coal,0,100,50,50,1,1,0,200,50:10;50:30,\n[shares]\n1,1.0\n",
        )
        .unwrap();
        let folded = fold_fixed_costs(&case);
        assert!((folded[0][0] - 12.0).abs() < 1e-12);
        assert!((folded[0][1] - 32.0).abs() < 1e-12);
        assert!(folded[0][0] <= folded[0][1]);
    }

    #[test]
    fn flat_demand_dispatches_exactly() {
        let case = one_unit_case();
        let sol = solve_esom(&case, &flat(50.0, 24), &EsomConfig::default()).unwrap();
        for t in 0..24 {
            assert!((sol.g[0][t] - 50.0).abs() < 1e-6);
        }
    }

    #[test]
    fn model_is_a_pure_lp_with_block_variables_only() {
        let case = one_unit_case();
        let model = build_esom(&case, &flat(50.0, 48), &EsomConfig::default()).unwrap();
        assert_eq!(model.builder.num_binaries(), 0);
        // |I| x |K| x T with the copper-plate default.
        assert_eq!(model.builder.num_variables(), 1 * 1 * 48);
    }

    #[test]
    fn expost_books_fixed_cost_per_operating_hour() {
        let mut case = one_unit_case();
        case.units[0].fixed_cost = 5.0;
        case.units[0].p_min = 0.0;
        let mut demand = vec![0.0; 720];
        for t in 100..110 {
            demand[t] = 40.0;
        }
        let demand = DemandSeries::new([(BusId(1), demand)].into()).unwrap();
        let mut config = EsomConfig::default();
        config.include_ramps = false;
        let sol = solve_esom(&case, &demand, &config).unwrap();
        assert!((sol.cost_fixed_expost - 50.0).abs() < 1e-9);
    }

    #[test]
    fn zero_demand_reports_zero_cost() {
        let case = one_unit_case();
        let sol = solve_esom(&case, &flat(0.0, 24), &EsomConfig::default()).unwrap();
        assert_eq!(sol.cost_total_reported, 0.0);
    }

    #[test]
    fn merit_order_matches_the_hand_lp() {
        // Cheap 30 MW unit plus expensive 100 MW unit, peaked demand.
        // By hand: cheap runs min(d, 30), expensive takes the rest.
        let case = parse_case(
            "[meta]\nreference_bus,1\n[buses]\n1\n[generators]\n\
             CHEAP,1,coal,0,30,30,30,1,1,0,0,30:10,\n\
             DEAR,1,gas,0,100,100,100,1,1,0,0,100:30,\n\
             [shares]\n1,1.0\n",
        )
        .unwrap();
        let demand = DemandSeries::new([(BusId(1), vec![20.0, 80.0, 50.0])].into()).unwrap();
        let sol = solve_esom(&case, &demand, &EsomConfig::default()).unwrap();
        let expected = 10.0 * (20.0 + 30.0 + 30.0) + 30.0 * (0.0 + 50.0 + 20.0);
        assert!((sol.cost_total_reported - expected).abs() < 1e-6);
        assert!((sol.g[0][1] - 30.0).abs() < 1e-6);
        assert!((sol.g[1][1] - 50.0).abs() < 1e-6);
    }

    #[test]
    fn ramp_limits_hold_ex_post() {
        let case = parse_case(
            "[meta]\nreference_bus,1\n[buses]\n1\n[generators]\n\
             SLOW,1,coal,0,100,15,15,1,1,0,0,100:10,\n\
             FAST,1,gas,0,100,100,100,1,1,0,0,100:40,\n\
             [shares]\n1,1.0\n",
        )
        .unwrap();
        let demand: Vec<f64> = (0..24).map(|t| 40.0 + 20.0 * ((t % 6) as f64)).collect();
        let demand = DemandSeries::new([(BusId(1), demand)].into()).unwrap();
        let sol = solve_esom(&case, &demand, &EsomConfig::default()).unwrap();
        for i in 0..2 {
            let unit = &case.units[i];
            for t in 1..24 {
                let delta = sol.g[i][t] - sol.g[i][t - 1];
                assert!(delta <= unit.ramp_up + 1e-6);
                assert!(-delta <= unit.ramp_down + 1e-6);
            }
        }
        // The slow unit forces the fast one to cover the swings.
        for t in 0..24 {
            assert!((sol.g[0][t] + sol.g[1][t] - demand.get(BusId(1), t)).abs() < 1e-6);
        }
    }

    #[test]
    fn monthly_budget_binds() {
        let case = parse_case(
            "[meta]\nreference_bus,1\n[buses]\n1\n[generators]\n\
             H,1,hydro,0,100,100,100,1,1,0,0,100:0.5,300\n\
             G,1,gas,0,200,200,200,1,1,0,0,200:40,\n\
             [shares]\n1,1.0\n",
        )
        .unwrap();
        let sol = solve_esom(&case, &flat(80.0, 12), &EsomConfig::default()).unwrap();
        let hydro: f64 = sol.g[0].iter().sum();
        assert!(hydro <= 300.0 + 1e-6);
        assert!(hydro >= 300.0 - 1e-6, "cheap hydro should exhaust its budget");
    }

    #[test]
    fn reported_cost_equals_objective_when_nothing_is_folded() {
        let mut case = one_unit_case();
        case.units[0].fixed_cost = 0.0;
        let sol = solve_esom(&case, &flat(50.0, 24), &EsomConfig::default()).unwrap();
        assert_eq!(sol.lp_objective, sol.cost_total_reported);
    }

    #[test]
    fn demand_above_capacity_is_infeasible_with_hour() {
        let case = one_unit_case();
        let mut demand = vec![50.0; 6];
        demand[3] = 120.0;
        let demand = DemandSeries::new([(BusId(1), demand)].into()).unwrap();
        match solve_esom(&case, &demand, &EsomConfig::default()) {
            Err(EsomError::Infeasible { binding_hour: Some(3) }) => {}
            other => panic!("expected infeasible at hour 3, got {other:?}"),
        }
    }

    #[test]
    fn network_mode_respects_line_limits() {
        // Two buses, generation at bus 1, all demand at bus 2, one
        // 60 MW line: feasible at 60, infeasible above.
        let case = parse_case(
            "[meta]\nreference_bus,1\n[buses]\n1\n2\n[lines]\nL1,1,2,10,60\n[generators]\n\
             G,1,gas,0,200,200,200,1,1,0,0,200:25,\n\
             [shares]\n2,1.0\n",
        )
        .unwrap();
        let mut config = EsomConfig::default();
        config.include_network = true;
        let ok = DemandSeries::new([(BusId(1), vec![0.0; 4]), (BusId(2), vec![60.0; 4])].into()).unwrap();
        let sol = solve_esom(&case, &ok, &config).unwrap();
        assert!((sol.g[0][0] - 60.0).abs() < 1e-6);
        let too_much =
            DemandSeries::new([(BusId(1), vec![0.0; 4]), (BusId(2), vec![80.0; 4])].into()).unwrap();
        assert!(matches!(
            solve_esom(&case, &too_much, &config),
            Err(EsomError::Infeasible { .. })
        ));
    }
}
