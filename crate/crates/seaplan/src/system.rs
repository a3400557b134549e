//! Power-system domain types and the case-file format.
//!
//! A case file describes the static system: buses, transmission lines,
//! the generator fleet with block costs, per-bus demand shares, and a
//! `[meta]` section with the reference bus and MVA base. The parser
//! resolves every cross-reference; [`validate_case`] re-checks all type
//! invariants on an already-built [`NetworkCase`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// 1-based bus identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fuel category of a generating unit.
///
/// The report schemas aggregate generation over exactly these four
/// labels; anything else is rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fuel {
    Nuclear,
    Hydro,
    Coal,
    Gas,
}

impl Fuel {
    pub const ALL: [Fuel; 4] = [Fuel::Nuclear, Fuel::Hydro, Fuel::Coal, Fuel::Gas];

    pub fn as_str(&self) -> &'static str {
        match self {
            Fuel::Nuclear => "nuclear",
            Fuel::Hydro => "hydro",
            Fuel::Coal => "coal",
            Fuel::Gas => "gas",
        }
    }
}

impl fmt::Display for Fuel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fuel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nuclear" => Ok(Fuel::Nuclear),
            "hydro" => Ok(Fuel::Hydro),
            "coal" => Ok(Fuel::Coal),
            "gas" => Ok(Fuel::Gas),
            other => Err(format!("unknown fuel label `{other}`")),
        }
    }
}

/// One step of a piecewise-linear convex generation cost curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBlock {
    /// Block width in MW.
    pub size_mw: f64,
    /// Marginal cost of energy in this block, currency per MWh.
    pub marginal_cost: f64,
}

/// A dispatchable generating unit.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorUnit {
    pub id: String,
    pub bus: BusId,
    pub fuel: Fuel,
    /// Minimum stable output while committed, MW.
    pub p_min: f64,
    /// Maximum output, MW. Block sizes sum to this.
    pub p_max: f64,
    /// Maximum hourly output increase, MW per hour.
    pub ramp_up: f64,
    /// Maximum hourly output decrease, MW per hour.
    pub ramp_down: f64,
    /// Minimum consecutive hours online after a start.
    pub min_up: u32,
    /// Minimum consecutive hours offline after a shutdown.
    pub min_down: u32,
    /// Cost per start, currency.
    pub startup_cost: f64,
    /// No-load cost per online hour, currency.
    pub fixed_cost: f64,
    pub blocks: Vec<CostBlock>,
    /// Optional monthly energy cap, MWh (hydro reservoir proxy).
    pub energy_budget: Option<f64>,
}

impl GeneratorUnit {
    /// Variable cost of producing `g` MW for one hour, priced by filling
    /// blocks in order. For convex (nondecreasing) block prices this
    /// equals the optimal block split of any cost-minimizing solution.
    pub fn merit_order_cost(&self, g: f64) -> f64 {
        let mut remaining = g;
        let mut cost = 0.0;
        for block in &self.blocks {
            let take = remaining.min(block.size_mw).max(0.0);
            cost += take * block.marginal_cost;
            remaining -= take;
        }
        cost
    }
}

/// A transmission line of the DC network.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionLine {
    pub id: String,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Per-unit susceptance (1/x). MW flow is `base_mva * susceptance *
    /// (theta_from - theta_to)`.
    pub susceptance: f64,
    /// Flow limit in MW, applied in both directions.
    pub capacity: f64,
}

/// The static system description: topology, fleet, and demand shares.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub buses: Vec<BusId>,
    pub lines: Vec<TransmissionLine>,
    pub units: Vec<GeneratorUnit>,
    pub reference_bus: BusId,
    /// Fraction of system demand served at each bus; sums to 1.
    pub demand_share: BTreeMap<BusId, f64>,
    /// MVA base used to scale per-unit susceptance to MW flows.
    pub base_mva: f64,
}

impl NetworkCase {
    pub fn total_p_max(&self) -> f64 {
        self.units.iter().map(|u| u.p_max).sum()
    }

    pub fn unit_index(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }

    pub fn share(&self, bus: BusId) -> f64 {
        self.demand_share.get(&bus).copied().unwrap_or(0.0)
    }
}

/// Per-unit state recorded in a case file's optional `[initial]` section.
///
/// Commitment semantics (remaining up/down time and consistency with the
/// fleet) live with the commitment model; this is just the parsed record.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialRecord {
    pub unit_id: String,
    pub g0: f64,
    pub on: bool,
    pub hours_on: u32,
    pub hours_off: u32,
}

/// Parse or cross-reference failure, with the 1-based source line.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: reference to unknown bus {bus}")]
    DanglingBus { line: usize, bus: u32 },
    #[error("missing required section [{0}]")]
    MissingSection(&'static str),
    #[error("[meta] is missing `reference_bus`")]
    MissingReferenceBus,
}

fn parse_err(line: usize, message: impl Into<String>) -> CaseError {
    CaseError::Parse {
        line,
        message: message.into(),
    }
}

/// A broken invariant found by [`validate_case`]. Violations are data,
/// not failures: callers decide whether to abort.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// The entity the violation names (bus, line, unit, or the case).
    pub entity: String,
    pub message: String,
}

impl Violation {
    pub fn new(entity: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            entity: entity.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Meta,
    Buses,
    Lines,
    Generators,
    Shares,
    Initial,
}

/// Split case text into (line number, section, payload) records.
fn records(text: &str) -> Result<Vec<(usize, Section, &str)>, CaseError> {
    let mut out = Vec::new();
    let mut section = Section::None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name {
                "meta" => Section::Meta,
                "buses" => Section::Buses,
                "lines" => Section::Lines,
                "generators" => Section::Generators,
                "shares" => Section::Shares,
                "initial" => Section::Initial,
                other => return Err(parse_err(line_no, format!("unknown section [{other}]"))),
            };
            continue;
        }
        if section == Section::None {
            return Err(parse_err(line_no, "record before any [section] header"));
        }
        out.push((line_no, section, line));
    }
    Ok(out)
}

fn fields(payload: &str) -> Vec<&str> {
    payload.split(',').map(str::trim).collect()
}

fn parse_f64(line: usize, field: &str, value: &str) -> Result<f64, CaseError> {
    value
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("field `{field}`: invalid number `{value}`")))
}

fn parse_u32(line: usize, field: &str, value: &str) -> Result<u32, CaseError> {
    value
        .parse::<u32>()
        .map_err(|_| parse_err(line, format!("field `{field}`: invalid integer `{value}`")))
}

fn parse_blocks(line: usize, value: &str) -> Result<Vec<CostBlock>, CaseError> {
    let mut blocks = Vec::new();
    for part in value.split(';') {
        let (size, cost) = part
            .split_once(':')
            .ok_or_else(|| parse_err(line, format!("block `{part}` is not size:cost")))?;
        blocks.push(CostBlock {
            size_mw: parse_f64(line, "block size", size.trim())?,
            marginal_cost: parse_f64(line, "block cost", cost.trim())?,
        });
    }
    Ok(blocks)
}

/// Parse a case file into a [`NetworkCase`].
///
/// Field order per record is fixed:
/// - `[buses]` — `index`
/// - `[lines]` — `id,from_bus,to_bus,susceptance,capacity_mw`
/// - `[generators]` — `id,bus,fuel,p_min,p_max,ramp_up,ramp_down,min_up,
///   min_down,startup_cost,fixed_cost,blocks,energy_budget` where
///   `blocks` is `size:cost[;size:cost...]` and the trailing budget may
///   be empty
/// - `[shares]` — `bus,fraction`
/// - `[meta]` — `key,value` with keys `reference_bus` and `base_mva`
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    let (case, _) = parse_case_file(text)?;
    Ok(case)
}

/// Parse a case file, also returning any `[initial]` records.
pub fn parse_case_file(text: &str) -> Result<(NetworkCase, Vec<InitialRecord>), CaseError> {
    let records = records(text)?;

    let mut buses: Vec<BusId> = Vec::new();
    let mut bus_set: BTreeSet<u32> = BTreeSet::new();
    let mut bus_lines: Vec<usize> = Vec::new();
    for &(line, section, payload) in &records {
        if section != Section::Buses {
            continue;
        }
        let id = parse_u32(line, "bus index", payload)?;
        if !bus_set.insert(id) {
            return Err(CaseError::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
        buses.push(BusId(id));
        bus_lines.push(line);
    }
    if buses.is_empty() {
        return Err(CaseError::MissingSection("buses"));
    }

    let check_bus = |line: usize, id: u32| -> Result<BusId, CaseError> {
        if bus_set.contains(&id) {
            Ok(BusId(id))
        } else {
            Err(CaseError::DanglingBus { line, bus: id })
        }
    };

    let mut lines_out: Vec<TransmissionLine> = Vec::new();
    let mut units: Vec<GeneratorUnit> = Vec::new();
    let mut demand_share: BTreeMap<BusId, f64> = BTreeMap::new();
    let mut initial: Vec<(usize, InitialRecord)> = Vec::new();
    let mut reference_bus: Option<BusId> = None;
    let mut base_mva = 100.0;
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();

    for &(line, section, payload) in &records {
        let f = fields(payload);
        match section {
            Section::Buses | Section::None => {}
            Section::Meta => {
                if f.len() != 2 {
                    return Err(parse_err(line, "[meta] records are key,value"));
                }
                match f[0] {
                    "reference_bus" => {
                        reference_bus = Some(check_bus(line, parse_u32(line, "reference_bus", f[1])?)?)
                    }
                    "base_mva" => base_mva = parse_f64(line, "base_mva", f[1])?,
                    other => return Err(parse_err(line, format!("unknown meta key `{other}`"))),
                }
            }
            Section::Lines => {
                if f.len() != 5 {
                    return Err(parse_err(line, "[lines] records have 5 fields"));
                }
                if !seen_ids.insert(f[0].to_string()) {
                    return Err(CaseError::DuplicateId {
                        line,
                        id: f[0].to_string(),
                    });
                }
                lines_out.push(TransmissionLine {
                    id: f[0].to_string(),
                    from_bus: check_bus(line, parse_u32(line, "from_bus", f[1])?)?,
                    to_bus: check_bus(line, parse_u32(line, "to_bus", f[2])?)?,
                    susceptance: parse_f64(line, "susceptance", f[3])?,
                    capacity: parse_f64(line, "capacity_mw", f[4])?,
                });
            }
            Section::Generators => {
                if f.len() != 12 && f.len() != 13 {
                    return Err(parse_err(line, "[generators] records have 12 or 13 fields"));
                }
                if !seen_ids.insert(f[0].to_string()) {
                    return Err(CaseError::DuplicateId {
                        line,
                        id: f[0].to_string(),
                    });
                }
                let fuel = Fuel::from_str(f[2]).map_err(|e| parse_err(line, e))?;
                let energy_budget = match f.get(12) {
                    None => None,
                    Some(&"") => None,
                    Some(&raw) => Some(parse_f64(line, "energy_budget", raw)?),
                };
                units.push(GeneratorUnit {
                    id: f[0].to_string(),
                    bus: check_bus(line, parse_u32(line, "bus", f[1])?)?,
                    fuel,
                    p_min: parse_f64(line, "p_min", f[3])?,
                    p_max: parse_f64(line, "p_max", f[4])?,
                    ramp_up: parse_f64(line, "ramp_up", f[5])?,
                    ramp_down: parse_f64(line, "ramp_down", f[6])?,
                    min_up: parse_u32(line, "min_up", f[7])?,
                    min_down: parse_u32(line, "min_down", f[8])?,
                    startup_cost: parse_f64(line, "startup_cost", f[9])?,
                    fixed_cost: parse_f64(line, "fixed_cost", f[10])?,
                    blocks: parse_blocks(line, f[11])?,
                    energy_budget,
                });
            }
            Section::Shares => {
                if f.len() != 2 {
                    return Err(parse_err(line, "[shares] records are bus,fraction"));
                }
                let bus = check_bus(line, parse_u32(line, "bus", f[0])?)?;
                if demand_share.contains_key(&bus) {
                    return Err(CaseError::DuplicateId {
                        line,
                        id: format!("share for bus {bus}"),
                    });
                }
                demand_share.insert(bus, parse_f64(line, "fraction", f[1])?);
            }
            Section::Initial => {
                if f.len() != 5 {
                    return Err(parse_err(
                        line,
                        "[initial] records are unit,g0_mw,u0,ut0_h,dt0_h",
                    ));
                }
                let on = match f[2] {
                    "0" => false,
                    "1" => true,
                    other => return Err(parse_err(line, format!("u0 must be 0 or 1, got `{other}`"))),
                };
                initial.push((
                    line,
                    InitialRecord {
                        unit_id: f[0].to_string(),
                        g0: parse_f64(line, "g0_mw", f[1])?,
                        on,
                        hours_on: parse_u32(line, "ut0_h", f[3])?,
                        hours_off: parse_u32(line, "dt0_h", f[4])?,
                    },
                ));
            }
        }
    }

    let reference_bus = reference_bus.ok_or(CaseError::MissingReferenceBus)?;
    for (line, rec) in &initial {
        if !units.iter().any(|u| u.id == rec.unit_id) {
            return Err(parse_err(*line, format!("[initial] names unknown unit `{}`", rec.unit_id)));
        }
    }

    Ok((
        NetworkCase {
            buses,
            lines: lines_out,
            units,
            reference_bus,
            demand_share,
            base_mva,
        },
        initial.into_iter().map(|(_, rec)| rec).collect(),
    ))
}

/// Serialize a case back to the file format. `parse_case(emit_case(c))`
/// reproduces `c` up to field ordering; used for solution archiving.
pub fn emit_case(case: &NetworkCase) -> String {
    use fmt::Write;
    let mut out = String::new();
    out.push_str("[meta]\n");
    let _ = writeln!(out, "reference_bus,{}", case.reference_bus);
    let _ = writeln!(out, "base_mva,{}", case.base_mva);
    out.push_str("\n[buses]\n");
    for bus in &case.buses {
        let _ = writeln!(out, "{bus}");
    }
    out.push_str("\n[lines]\n");
    for l in &case.lines {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            l.id, l.from_bus, l.to_bus, l.susceptance, l.capacity
        );
    }
    out.push_str("\n[generators]\n");
    for u in &case.units {
        let blocks = u
            .blocks
            .iter()
            .map(|b| format!("{}:{}", b.size_mw, b.marginal_cost))
            .collect::<Vec<_>>()
            .join(";");
        let budget = u.energy_budget.map(|b| b.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            u.id,
            u.bus,
            u.fuel,
            u.p_min,
            u.p_max,
            u.ramp_up,
            u.ramp_down,
            u.min_up,
            u.min_down,
            u.startup_cost,
            u.fixed_cost,
            blocks,
            budget
        );
    }
    out.push_str("\n[shares]\n");
    for (bus, share) in &case.demand_share {
        let _ = writeln!(out, "{bus},{share}");
    }
    out
}

/// Check every type invariant on a constructed case. Returns one entry
/// per broken invariant; empty means the case is well-formed.
pub fn validate_case(case: &NetworkCase) -> Vec<Violation> {
    let mut out = Vec::new();
    let bus_set: BTreeSet<BusId> = case.buses.iter().copied().collect();

    if bus_set.len() != case.buses.len() {
        out.push(Violation::new("case", "duplicate bus indices"));
    }
    if !bus_set.contains(&case.reference_bus) {
        out.push(Violation::new(
            "case",
            format!("reference bus {} is not in the bus list", case.reference_bus),
        ));
    }
    if case.base_mva <= 0.0 {
        out.push(Violation::new("case", "base_mva must be positive"));
    }

    for l in &case.lines {
        let entity = format!("line {}", l.id);
        if l.from_bus == l.to_bus {
            out.push(Violation::new(&entity, "from_bus equals to_bus"));
        }
        for bus in [l.from_bus, l.to_bus] {
            if !bus_set.contains(&bus) {
                out.push(Violation::new(&entity, format!("endpoint bus {bus} does not exist")));
            }
        }
        if l.susceptance <= 0.0 {
            out.push(Violation::new(&entity, "susceptance must be positive"));
        }
        if l.capacity <= 0.0 {
            out.push(Violation::new(&entity, "capacity must be positive"));
        }
    }

    for u in &case.units {
        let entity = format!("unit {}", u.id);
        if !bus_set.contains(&u.bus) {
            out.push(Violation::new(&entity, format!("bus {} does not exist", u.bus)));
        }
        if !(0.0 <= u.p_min && u.p_min <= u.p_max) {
            out.push(Violation::new(
                &entity,
                format!("requires 0 <= p_min <= p_max, got p_min {} p_max {}", u.p_min, u.p_max),
            ));
        }
        let block_sum: f64 = u.blocks.iter().map(|b| b.size_mw).sum();
        if (block_sum - u.p_max).abs() > 1e-6 {
            out.push(Violation::new(
                &entity,
                format!("block sizes sum to {block_sum}, expected p_max {}", u.p_max),
            ));
        }
        if u.blocks.iter().any(|b| b.size_mw <= 0.0) {
            out.push(Violation::new(&entity, "block sizes must be positive"));
        }
        if u.blocks.windows(2).any(|w| w[1].marginal_cost < w[0].marginal_cost) {
            out.push(Violation::new(&entity, "block costs must be nondecreasing"));
        }
        if u.ramp_up <= 0.0 || u.ramp_down <= 0.0 {
            out.push(Violation::new(&entity, "ramp rates must be positive"));
        }
        if u.min_up < 1 || u.min_down < 1 {
            out.push(Violation::new(&entity, "min up/down times must be at least 1 hour"));
        }
        if u.startup_cost < 0.0 || u.fixed_cost < 0.0 || u.blocks.iter().any(|b| b.marginal_cost < 0.0) {
            out.push(Violation::new(&entity, "costs must be nonnegative"));
        }
        if let Some(budget) = u.energy_budget {
            if budget > u.p_max * 720.0 {
                out.push(Violation::new(
                    &entity,
                    format!("energy budget {budget} exceeds p_max x 720 = {}", u.p_max * 720.0),
                ));
            }
        }
    }

    let share_sum: f64 = case.demand_share.values().sum();
    if case.demand_share.values().any(|&s| s < 0.0) {
        out.push(Violation::new("case", "demand shares must be nonnegative"));
    }
    if (share_sum - 1.0).abs() > 1e-9 {
        out.push(Violation::new(
            "case",
            format!("demand shares sum to {share_sum}, expected 1"),
        ));
    }
    for bus in case.demand_share.keys() {
        if !bus_set.contains(bus) {
            out.push(Violation::new("case", format!("share names unknown bus {bus}")));
        }
    }

    if !connected(case) {
        out.push(Violation::new("case", "network graph is not connected"));
    }

    out
}

/// Breadth-first connectivity over the line graph.
fn connected(case: &NetworkCase) -> bool {
    if case.buses.len() <= 1 {
        return true;
    }
    let mut adjacency: BTreeMap<BusId, Vec<BusId>> = BTreeMap::new();
    for l in &case.lines {
        adjacency.entry(l.from_bus).or_default().push(l.to_bus);
        adjacency.entry(l.to_bus).or_default().push(l.from_bus);
    }
    let mut seen: BTreeSet<BusId> = BTreeSet::new();
    let mut queue = vec![case.buses[0]];
    seen.insert(case.buses[0]);
    while let Some(bus) = queue.pop() {
        for &next in adjacency.get(&bus).into_iter().flatten() {
            if seen.insert(next) {
                queue.push(next);
            }
        }
    }
    seen.len() == case.buses.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[meta]
reference_bus,1
[buses]
1
[generators]
G1,1,gas,10,100,50,50,1,1,0,0,100:20,
[shares]
1,1.0
";

    #[test]
    fn parses_minimal_case() {
        let case = parse_case(MINIMAL).unwrap();
        assert_eq!(case.buses.len(), 1);
        assert_eq!(case.units.len(), 1);
        assert_eq!(case.lines.len(), 0);
        assert_eq!(case.units[0].energy_budget, None);
        assert!(validate_case(&case).is_empty());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let text = format!("# leading comment\n\n{MINIMAL}\n# trailing");
        assert!(parse_case(&text).is_ok());
    }

    #[test]
    fn dangling_bus_reference_is_an_error() {
        let text = MINIMAL.replace("G1,1,", "G1,7,");
        match parse_case(&text) {
            Err(CaseError::DanglingBus { bus: 7, .. }) => {}
            other => panic!("expected dangling bus error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_unit_id_is_an_error() {
        let text = MINIMAL.replace(
            "G1,1,gas,10,100,50,50,1,1,0,0,100:20,",
            "G1,1,gas,10,100,50,50,1,1,0,0,100:20,\nG1,1,gas,10,100,50,50,1,1,0,0,100:20,",
        );
        assert!(matches!(parse_case(&text), Err(CaseError::DuplicateId { .. })));
    }

    #[test]
    fn parse_error_carries_line_number() {
        let text = MINIMAL.replace("1,1.0", "1,not_a_number");
        match parse_case(&text) {
            Err(CaseError::Parse { line, .. }) => assert!(line > 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn validate_flags_p_min_above_p_max() {
        let mut case = parse_case(MINIMAL).unwrap();
        case.units[0].p_min = 200.0;
        let violations = validate_case(&case);
        assert!(violations.iter().any(|v| v.entity == "unit G1" && v.message.contains("p_min")));
    }

    #[test]
    fn validate_flags_disconnected_network() {
        let text = "\
[meta]
reference_bus,1
[buses]
1
2
[generators]
G1,1,gas,10,100,50,50,1,1,0,0,100:20,
[shares]
1,0.5
2,0.5
";
        let case = parse_case(text).unwrap();
        let violations = validate_case(&case);
        assert!(violations.iter().any(|v| v.message.contains("not connected")));
    }

    #[test]
    fn validate_flags_block_sum_mismatch() {
        let mut case = parse_case(MINIMAL).unwrap();
        case.units[0].blocks[0].size_mw = 55.0;
        assert!(validate_case(&case).iter().any(|v| v.message.contains("block sizes sum")));
    }

    #[test]
    fn initial_section_round_trips_records() {
        let text = format!("{MINIMAL}[initial]\nG1,50,1,5,0\n");
        let (_, initial) = parse_case_file(&text).unwrap();
        assert_eq!(
            initial,
            vec![InitialRecord {
                unit_id: "G1".into(),
                g0: 50.0,
                on: true,
                hours_on: 5,
                hours_off: 0,
            }]
        );
    }

    #[test]
    fn emit_parse_round_trip_is_identity() {
        let text = "\
[meta]
reference_bus,2
base_mva,100
[buses]
1
2
[lines]
L1,1,2,12.5,175
[generators]
G1,1,coal,20,80,25,30,4,3,500,120,50:18;30:22,
H1,2,hydro,0,60,60,60,1,1,0,0,60:0.5,20000
[shares]
1,0.25
2,0.75
";
        let case = parse_case(text).unwrap();
        let emitted = emit_case(&case);
        let reparsed = parse_case(&emitted).unwrap();
        assert_eq!(case, reparsed);
    }

    #[test]
    fn unknown_fuel_is_rejected() {
        let text = MINIMAL.replace(",gas,", ",oil,");
        assert!(matches!(parse_case(&text), Err(CaseError::Parse { .. })));
    }
}
