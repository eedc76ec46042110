//! Reader for the subset of the MATPOWER `.m` case format used by the DC
//! measurement model: bus ids and types, branch endpoints, reactances and
//! status.
//!
//! Grammar handled here: `%` starts a comment, matrix blocks look like
//! `mpc.bus = [ ... ];`, rows are separated by `;` or newlines and columns by
//! whitespace or commas. Only bus columns 1, 2, 8 and branch columns 1, 2, 4,
//! 11 are consumed.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BusType {
    Pq,
    Pv,
    Slack,
}

impl BusType {
    pub fn from_code(bus: u32, code: i64) -> Result<Self> {
        match code {
            1 => Ok(BusType::Pq),
            2 => Ok(BusType::Pv),
            3 => Ok(BusType::Slack),
            _ => Err(Error::UnknownBusType { bus, code }),
        }
    }

    pub fn code(self) -> i64 {
        match self {
            BusType::Pq => 1,
            BusType::Pv => 2,
            BusType::Slack => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    /// External bus number as written in the case file.
    pub id: u32,
    pub bus_type: BusType,
    /// Per-unit magnitude from the file; the DC model fixes it at 1.0.
    pub voltage_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from_bus: u32,
    pub to_bus: u32,
    /// Series reactance in per unit.
    pub reactance: f64,
    pub in_service: bool,
}

/// A validated network: unique bus ids, a single slack bus, and a connected
/// in-service graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    name: String,
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    index: HashMap<u32, usize>,
    slack: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseSummary {
    pub n_bus: usize,
    pub n_branch_in_service: usize,
    pub slack_id: u32,
}

impl GridCase {
    pub fn new(name: impl Into<String>, base_mva: f64, buses: Vec<Bus>, branches: Vec<Branch>) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::EmptyCase);
        }
        let mut index = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, i).is_some() {
                return Err(Error::DuplicateBus(bus.id));
            }
        }
        let slacks: Vec<usize> = buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.bus_type == BusType::Slack)
            .map(|(i, _)| i)
            .collect();
        if slacks.len() != 1 {
            return Err(Error::SlackCount(slacks.len()));
        }
        let slack = slacks[0];

        let mut adjacency = vec![Vec::new(); buses.len()];
        for (k, br) in branches.iter().enumerate() {
            let from = *index.get(&br.from_bus).ok_or(Error::UnknownBus {
                branch: k,
                bus: br.from_bus,
            })?;
            let to = *index.get(&br.to_bus).ok_or(Error::UnknownBus {
                branch: k,
                bus: br.to_bus,
            })?;
            if from == to {
                return Err(Error::SelfLoop {
                    branch: k,
                    bus: br.from_bus,
                });
            }
            if br.in_service {
                adjacency[from].push(to);
                adjacency[to].push(from);
            }
        }
        if buses.len() < 2 || !branches.iter().any(|b| b.in_service) {
            return Err(Error::EmptyCase);
        }

        let mut seen = vec![false; buses.len()];
        let mut queue = VecDeque::from([slack]);
        seen[slack] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Disconnected { bus: buses[i].id });
        }

        Ok(Self {
            name: name.into(),
            base_mva,
            buses,
            branches,
            index,
            slack,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    /// All branches in file order, including out-of-service rows.
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// `(file index, branch)` for in-service branches, in file order.
    pub fn in_service_branches(&self) -> impl Iterator<Item = (usize, &Branch)> {
        self.branches.iter().enumerate().filter(|(_, b)| b.in_service)
    }

    /// Dense index (position in the bus list) of an external bus id.
    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn slack_index(&self) -> usize {
        self.slack
    }

    pub fn slack_id(&self) -> u32 {
        self.buses[self.slack].id
    }

    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    /// Number of state variables: one angle per non-slack bus.
    pub fn n_states(&self) -> usize {
        self.buses.len() - 1
    }

    /// Column of the state vector for a dense bus index; `None` for the slack.
    pub fn state_column(&self, dense: usize) -> Option<usize> {
        match dense.cmp(&self.slack) {
            std::cmp::Ordering::Less => Some(dense),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(dense - 1),
        }
    }

    /// External ids of the non-slack buses in state-column order.
    pub fn state_bus_ids(&self) -> Vec<u32> {
        self.buses
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.slack)
            .map(|(_, b)| b.id)
            .collect()
    }

    pub fn summary(&self) -> CaseSummary {
        CaseSummary {
            n_bus: self.n_bus(),
            n_branch_in_service: self.in_service_branches().count(),
            slack_id: self.slack_id(),
        }
    }

    /// Writes the consumed columns back out as a MATPOWER case; columns the
    /// reader ignores are written as zeros.
    pub fn to_matpower_subset(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "function mpc = {}", self.name);
        let _ = writeln!(out, "mpc.version = '2';");
        let _ = writeln!(out, "mpc.baseMVA = {};", fmt_num(self.base_mva));
        out.push_str("mpc.bus = [\n");
        for b in &self.buses {
            let _ = writeln!(
                out,
                "\t{}\t{}\t0\t0\t0\t0\t1\t{}\t0\t0\t1\t0\t0;",
                b.id,
                b.bus_type.code(),
                fmt_num(b.voltage_magnitude)
            );
        }
        out.push_str("];\n");
        out.push_str("mpc.branch = [\n");
        for br in &self.branches {
            let _ = writeln!(
                out,
                "\t{}\t{}\t0\t{}\t0\t0\t0\t0\t0\t0\t{}\t-360\t360;",
                br.from_bus,
                br.to_bus,
                fmt_num(br.reactance),
                u8::from(br.in_service)
            );
        }
        out.push_str("];\n");
        out
    }
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

/// Convenience wrapper returning `(n_bus, n_branch_in_service, slack_id)`.
pub fn case_summary(case: &GridCase) -> (usize, usize, u32) {
    let s = case.summary();
    (s.n_bus, s.n_branch_in_service, s.slack_id)
}

pub fn parse_case(text: &str) -> Result<GridCase> {
    let stripped: String = text
        .lines()
        .map(|l| l.split('%').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n");

    let name = stripped
        .lines()
        .find_map(|l| {
            let l = l.trim();
            let rest = l.strip_prefix("function")?;
            let (_, rhs) = rest.split_once('=')?;
            Some(rhs.trim().to_string())
        })
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "case".to_string());

    let base_mva = scalar_field(&stripped, "baseMVA").unwrap_or(100.0);

    let bus_rows = matrix_block(&stripped, "bus")?;
    let branch_rows = matrix_block(&stripped, "branch")?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    for (r, row) in bus_rows.iter().enumerate() {
        need_columns("bus", r, row, 2)?;
        let id = integer("bus", r, row[0])?;
        let id = u32::try_from(id).map_err(|_| parse_err("bus", r, "bus id out of range"))?;
        let code = integer("bus", r, row[1])?;
        buses.push(Bus {
            id,
            bus_type: BusType::from_code(id, code)?,
            voltage_magnitude: row.get(7).copied().unwrap_or(1.0),
        });
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for (r, row) in branch_rows.iter().enumerate() {
        need_columns("branch", r, row, 4)?;
        let from = integer("branch", r, row[0])?;
        let to = integer("branch", r, row[1])?;
        let status = row.get(10).copied().unwrap_or(1.0);
        branches.push(Branch {
            from_bus: u32::try_from(from).map_err(|_| parse_err("branch", r, "bus id out of range"))?,
            to_bus: u32::try_from(to).map_err(|_| parse_err("branch", r, "bus id out of range"))?,
            reactance: row[3],
            in_service: status != 0.0,
        });
    }

    GridCase::new(name, base_mva, buses, branches)
}

fn parse_err(block: &'static str, row: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        block,
        row,
        msg: msg.into(),
    }
}

fn need_columns(block: &'static str, row: usize, values: &[f64], n: usize) -> Result<()> {
    if values.len() < n {
        return Err(parse_err(
            block,
            row,
            format!("expected at least {n} columns, found {}", values.len()),
        ));
    }
    Ok(())
}

fn integer(block: &'static str, row: usize, v: f64) -> Result<i64> {
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(parse_err(block, row, format!("expected an integer, found {v}")));
    }
    Ok(v as i64)
}

/// Position just after `mpc.<name>` when it is followed by `=` (so that
/// `mpc.bus` does not match `mpc.bus_name`).
fn find_assignment(text: &str, name: &str) -> Option<usize> {
    let key = format!("mpc.{name}");
    let mut from = 0;
    while let Some(pos) = text[from..].find(&key) {
        let start = from + pos;
        let after = start + key.len();
        let rest = &text[after..];
        if rest.trim_start().starts_with('=') {
            let eq = after + rest.find('=').unwrap_or(0);
            return Some(eq + 1);
        }
        from = after;
    }
    None
}

fn scalar_field(text: &str, name: &str) -> Option<f64> {
    let start = find_assignment(text, name)?;
    let rest = &text[start..];
    let end = rest.find(';').unwrap_or(rest.len());
    rest[..end].trim().parse().ok()
}

fn matrix_block(text: &str, name: &'static str) -> Result<Vec<Vec<f64>>> {
    let start = find_assignment(text, name).ok_or(Error::MissingBlock(name))?;
    let rest = &text[start..];
    let open = rest.find('[').ok_or_else(|| parse_err(name, 0, "missing `[`"))?;
    let close = rest[open..]
        .find(']')
        .ok_or_else(|| parse_err(name, 0, "unterminated matrix block"))?;
    let body = &rest[open + 1..open + close];

    let mut rows = Vec::new();
    for chunk in body.split([';', '\n']) {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        let r = rows.len();
        let values = chunk
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(name, r, format!("not a number: `{t}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok(rows)
}
