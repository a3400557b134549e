use std::time::Instant;

use seaplan::forecast::{parse_demand_file, MonthIndex};
use seaplan::rolling::{solve_month, WindowPolicy};
use seaplan::study::{run_scenario, ScenarioId, StudyConfig};
use seaplan::system::{parse_case_file, validate_case};
use seaplan::ucm::{solve_ucm, InitialConditions, UcmConfig};

fn load() -> (seaplan::NetworkCase, Vec<seaplan::system::InitialRecord>, seaplan::DemandSeries) {
    let case_text = include_str!("../data/rts24.case");
    let (case, initial) = parse_case_file(case_text).unwrap();
    assert!(validate_case(&case).is_empty());
    let demand_text = include_str!("../data/demand.csv");
    let demand = parse_demand_file(demand_text).unwrap().resolve(Some(&case)).unwrap();
    (case, initial, demand)
}

#[test]
#[ignore]
fn bench_one_window() {
    let (case, initial, demand) = load();
    let init = InitialConditions::from_records(&case, &initial).unwrap();
    let window = demand.slice(0, 216);
    let clock = Instant::now();
    let sol = solve_ucm(&case, &window, 216, &init, &UcmConfig::default()).unwrap();
    println!(
        "window: {:.2}s cost {:.0} gap {:?}",
        clock.elapsed().as_secs_f64(),
        sol.cost_total,
        sol.gap
    );
}

#[test]
#[ignore]
fn bench_one_month() {
    let (case, initial, demand) = load();
    let init = InitialConditions::from_records(&case, &initial).unwrap();
    let month = demand.slice(0, 720);
    let clock = Instant::now();
    let monthly = solve_month(&case, &month, &init, &UcmConfig::default(), WindowPolicy::default()).unwrap();
    println!(
        "month: {:.2}s cost {:.0} windows {:?}",
        clock.elapsed().as_secs_f64(),
        monthly.solution.cost_total,
        monthly.windows.iter().map(|w| w.wall_seconds).collect::<Vec<_>>()
    );
    let violations = seaplan::rolling::audit_month(&case, &month, &monthly, &init);
    println!("audit violations: {}", violations.len());
    for v in violations.iter().take(10) {
        println!("  {v}");
    }
}

#[test]
#[ignore]
fn bench_esom_month() {
    let (case, initial, demand) = load();
    let _ = initial;
    let observed = demand.slice(0, 720);
    let clock = Instant::now();
    let sol = seaplan::esom::solve_esom(&case, &observed, &seaplan::esom::EsomConfig::default()).unwrap();
    println!(
        "esom: {:.2}s reported {:.0} lp {:.0}",
        clock.elapsed().as_secs_f64(),
        sol.cost_total_reported,
        sol.lp_objective
    );
}

#[test]
#[ignore]
fn bench_compare_month1() {
    let (case, initial, demand) = load();
    let init = InitialConditions::from_records(&case, &initial).unwrap();
    let config = StudyConfig::default();
    for scenario in [ScenarioId::UCM_PF, ScenarioId::ESOM_PF, ScenarioId::ESOM_PFML] {
        let clock = Instant::now();
        let run = run_scenario(&case, &demand, &demand, scenario, MonthIndex(1), Some(&init), &config).unwrap();
        println!(
            "{scenario}: {:.1}s cost {:.0} nuclear {:.0} hydro {:.0} coal {:.0} gas {:.0}",
            clock.elapsed().as_secs_f64(),
            run.metrics.total_cost,
            run.metrics.fuel(seaplan::Fuel::Nuclear),
            run.metrics.fuel(seaplan::Fuel::Hydro),
            run.metrics.fuel(seaplan::Fuel::Coal),
            run.metrics.fuel(seaplan::Fuel::Gas),
        );
    }
}
