//! Node attributes as JSON lines, one record per node per year.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use layerwalk_core::graph::NodeId;
use layerwalk_core::synth::{NodeAttributes, NONE};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{atomic_write, read_string};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeRecord {
    pub node: NodeId,
    pub year: i32,
    pub birth_year: i32,
    pub clan: u32,
    pub household: u32,
    pub workplace: Option<u32>,
    pub school: Option<u32>,
    pub x: f64,
    pub y: f64,
    pub income: f64,
    pub union: bool,
    pub fertility: bool,
    pub divorce: bool,
    #[serde(default)]
    pub partner: Option<NodeId>,
    #[serde(default)]
    pub twin: Option<NodeId>,
    #[serde(default)]
    pub siblings: Vec<NodeId>,
}

fn opt(v: u32) -> Option<u32> {
    (v != NONE).then_some(v)
}

pub fn records(attrs: &NodeAttributes) -> Vec<AttributeRecord> {
    let n = attrs.num_nodes();
    let mut partner = vec![None; n];
    for &(u, v) in &attrs.couples {
        partner[u as usize] = Some(v);
        partner[v as usize] = Some(u);
    }
    let mut twin = vec![None; n];
    for &(u, v) in &attrs.twins {
        twin[u as usize] = Some(v);
        twin[v as usize] = Some(u);
    }
    let mut siblings = vec![Vec::new(); n];
    for &(u, v) in &attrs.siblings {
        siblings[u as usize].push(v);
        siblings[v as usize].push(u);
    }
    siblings.iter_mut().for_each(|s| s.sort_unstable());
    let mut out = Vec::with_capacity(n * attrs.num_years());
    for t in 0..attrs.num_years() {
        for v in 0..n {
            let (x, y) = attrs.coordinates[t][v];
            out.push(AttributeRecord {
                node: v as NodeId,
                year: attrs.start_year + t as i32,
                birth_year: attrs.birth_year[v],
                clan: attrs.clan[v],
                household: attrs.household[t][v],
                workplace: opt(attrs.workplace[t][v]),
                school: opt(attrs.school[t][v]),
                x,
                y,
                income: attrs.income[t][v],
                union: attrs.union[t][v],
                fertility: attrs.fertility[t][v],
                divorce: attrs.divorce[t][v],
                partner: partner[v],
                twin: twin[v],
                siblings: siblings[v].clone(),
            });
        }
    }
    out
}

pub fn to_string(attrs: &NodeAttributes) -> String {
    let mut out = String::new();
    for r in records(attrs) {
        let _ = writeln!(out, "{}", serde_json::to_string(&r).expect("serializable record"));
    }
    out
}

pub fn write(path: &Path, attrs: &NodeAttributes) -> Result<()> {
    atomic_write(path, to_string(attrs).as_bytes())
}

fn pairs(path: &Path, links: &BTreeMap<NodeId, Vec<NodeId>>, what: &str) -> Result<Vec<(NodeId, NodeId)>> {
    let mut out = Vec::new();
    for (&u, vs) in links {
        for &v in vs {
            if !links.get(&v).is_some_and(|back| back.contains(&u)) {
                return Err(Error::format(path, format!("{what} link {u} -> {v} is not reciprocated")));
            }
            if u < v {
                out.push((u, v));
            }
        }
    }
    Ok(out)
}

pub fn parse(path: &Path, text: &str) -> Result<NodeAttributes> {
    let mut rows: Vec<AttributeRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: AttributeRecord = serde_json::from_str(line)
            .map_err(|e| Error::Parse { path: path.to_path_buf(), line: i + 1, message: e.to_string() })?;
        rows.push(r);
    }
    if rows.is_empty() {
        return Err(Error::format(path, "no attribute records"));
    }
    let n = rows.iter().map(|r| r.node as usize + 1).max().unwrap_or(0);
    let start = rows.iter().map(|r| r.year).min().unwrap_or(0);
    let years = (rows.iter().map(|r| r.year).max().unwrap_or(0) - start + 1) as usize;
    if rows.len() != n * years {
        return Err(Error::format(path, format!("expected {} records for {n} nodes x {years} years, found {}", n * years, rows.len())));
    }
    let mut seen = vec![false; n * years];
    let mut attrs = NodeAttributes {
        start_year: start,
        birth_year: vec![0; n],
        clan: vec![0; n],
        twins: Vec::new(),
        siblings: Vec::new(),
        couples: Vec::new(),
        household: vec![vec![0; n]; years],
        workplace: vec![vec![NONE; n]; years],
        school: vec![vec![NONE; n]; years],
        coordinates: vec![vec![(0.0, 0.0); n]; years],
        income: vec![vec![0.0; n]; years],
        union: vec![vec![false; n]; years],
        fertility: vec![vec![false; n]; years],
        divorce: vec![vec![false; n]; years],
    };
    let mut partner = BTreeMap::new();
    let mut twin = BTreeMap::new();
    let mut sibling = BTreeMap::new();
    for r in rows {
        let (v, t) = (r.node as usize, (r.year - start) as usize);
        if std::mem::replace(&mut seen[t * n + v], true) {
            return Err(Error::format(path, format!("duplicate record for node {v} in {}", r.year)));
        }
        attrs.birth_year[v] = r.birth_year;
        attrs.clan[v] = r.clan;
        attrs.household[t][v] = r.household;
        attrs.workplace[t][v] = r.workplace.unwrap_or(NONE);
        attrs.school[t][v] = r.school.unwrap_or(NONE);
        attrs.coordinates[t][v] = (r.x, r.y);
        attrs.income[t][v] = r.income;
        attrs.union[t][v] = r.union;
        attrs.fertility[t][v] = r.fertility;
        attrs.divorce[t][v] = r.divorce;
        if t == 0 {
            partner.insert(r.node, r.partner.into_iter().collect::<Vec<_>>());
            twin.insert(r.node, r.twin.into_iter().collect::<Vec<_>>());
            sibling.insert(r.node, r.siblings);
        }
    }
    attrs.couples = pairs(path, &partner, "partner")?;
    attrs.twins = pairs(path, &twin, "twin")?;
    attrs.siblings = pairs(path, &sibling, "sibling")?;
    Ok(attrs)
}

pub fn read(path: &Path) -> Result<NodeAttributes> {
    parse(path, &read_string(path)?)
}
