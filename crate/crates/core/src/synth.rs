//! Synthetic temporal population with the five canonical relation layers.
//!
//! The node set is fixed across years. People are generated in three
//! generation clans (grandparents, their adult children with co-parents,
//! grandchildren). Over the years people age, children leave home at 18,
//! households move, workers change jobs, and school-age children enroll
//! in cohorts of the school nearest to home.
//!
//! Binary events and income carry planted signal: current-colleague
//! group effects, life-stage roles readable from layer membership, and a
//! clan effect. Classmates share nothing that any target depends on.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{canonical_layer_names, LayerId, MultiplexGraph, NodeId};
use crate::rng::{self, domain, StreamRng};

/// Marker for "no workplace" / "no school" in per-year attribute vectors.
pub const NONE: u32 = u32::MAX;

const SCHOOL_AGES: core::ops::RangeInclusive<i32> = 4..=17;
const WORKING_AGES: core::ops::RangeInclusive<i32> = 18..=66;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SyntheticPopulationConfig {
    pub num_nodes: u32,
    pub num_years: u32,
    pub start_year: i32,
    /// Adult children per grandparent couple, weights for 1, 2, ...
    pub adult_children_weights: Vec<f64>,
    /// Births per couple, weights for 0, 1, 2, ...
    pub children_weights: Vec<f64>,
    /// Sizes of the shared households young adults form on leaving home,
    /// weights for 1, 2, ...
    pub young_household_weights: Vec<f64>,
    /// Standard deviation of household positions around their clan centre.
    pub clan_spread: f64,
    pub employment_rate: f64,
    pub workplace_mean_size: f64,
    /// Log-normal shape of workplace attractiveness; larger means more skew.
    pub workplace_size_sigma: f64,
    pub num_schools: u32,
    /// Residents of this many closest addresses are neighbors.
    pub neighbor_addresses: u32,
    /// Each worker links to at most this many colleagues, closest by residence.
    pub colleague_cap: u32,
    pub job_change_rate: f64,
    pub move_rate: f64,
    /// Probability that a birth is a twin birth.
    pub twin_rate: f64,
    pub union_rate: f64,
    pub fertility_rate: f64,
    pub divorce_rate: f64,
    /// Effect size multiplier for all planted dependence.
    pub signal_strength: f64,
}

impl Default for SyntheticPopulationConfig {
    fn default() -> Self {
        SyntheticPopulationConfig {
            num_nodes: 10_000,
            num_years: 3,
            start_year: 2009,
            adult_children_weights: alloc::vec![0.25, 0.35, 0.25, 0.15],
            children_weights: alloc::vec![0.12, 0.2, 0.38, 0.2, 0.1],
            young_household_weights: alloc::vec![0.45, 0.3, 0.15, 0.1],
            clan_spread: 0.03,
            employment_rate: 0.75,
            workplace_mean_size: 30.0,
            workplace_size_sigma: 1.0,
            num_schools: 12,
            neighbor_addresses: 10,
            colleague_cap: 100,
            job_change_rate: 0.1,
            move_rate: 0.08,
            twin_rate: 0.06,
            union_rate: 0.06,
            fertility_rate: 0.05,
            divorce_rate: 0.04,
            signal_strength: 1.5,
        }
    }
}

fn check_weights(name: &str, w: &[f64]) -> Result<()> {
    if w.is_empty() || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || !(w.iter().sum::<f64>() > 0.0) {
        return Err(Error::Config(alloc::format!("{name} must be non-negative with positive sum")));
    }
    Ok(())
}

impl SyntheticPopulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_nodes < 20 {
            return Err(Error::Config("num_nodes must be at least 20".into()));
        }
        if self.num_years < 1 {
            return Err(Error::Config("num_years must be at least 1".into()));
        }
        check_weights("adult_children_weights", &self.adult_children_weights)?;
        check_weights("children_weights", &self.children_weights)?;
        check_weights("young_household_weights", &self.young_household_weights)?;
        if self.young_household_weights.len() > self.num_nodes as usize {
            return Err(Error::Config(alloc::format!(
                "household sizes up to {} exceed num_nodes = {}",
                self.young_household_weights.len(),
                self.num_nodes
            )));
        }
        for (name, r) in [
            ("employment_rate", self.employment_rate),
            ("job_change_rate", self.job_change_rate),
            ("move_rate", self.move_rate),
            ("twin_rate", self.twin_rate),
            ("union_rate", self.union_rate),
            ("fertility_rate", self.fertility_rate),
            ("divorce_rate", self.divorce_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(alloc::format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        if !(self.workplace_mean_size >= 1.0) || !(self.workplace_size_sigma >= 0.0) {
            return Err(Error::Config("workplace_mean_size must be >= 1 and workplace_size_sigma >= 0".into()));
        }
        if !(self.clan_spread >= 0.0) || !self.signal_strength.is_finite() {
            return Err(Error::Config("clan_spread must be >= 0 and signal_strength finite".into()));
        }
        if self.num_schools == 0 || self.neighbor_addresses == 0 || self.colleague_cap == 0 {
            return Err(Error::Config("num_schools, neighbor_addresses and colleague_cap must be positive".into()));
        }
        Ok(())
    }
}

/// Per-node attributes; per-year vectors are indexed `[year_index][node]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeAttributes {
    pub start_year: i32,
    pub birth_year: Vec<i32>,
    pub clan: Vec<u32>,
    /// Twin pairs `(u, v)` with `u < v`.
    pub twins: Vec<(NodeId, NodeId)>,
    /// All full-sibling pairs `(u, v)` with `u < v`, twins included.
    pub siblings: Vec<(NodeId, NodeId)>,
    /// Partnered couples `(u, v)` with `u < v`.
    pub couples: Vec<(NodeId, NodeId)>,
    pub household: Vec<Vec<u32>>,
    pub workplace: Vec<Vec<u32>>,
    pub school: Vec<Vec<u32>>,
    /// Residence coordinates `(x, y)` in the unit square.
    pub coordinates: Vec<Vec<(f64, f64)>>,
    /// Yearly income, zero for people without any.
    pub income: Vec<Vec<f64>>,
    pub union: Vec<Vec<bool>>,
    pub fertility: Vec<Vec<bool>>,
    pub divorce: Vec<Vec<bool>>,
}

impl NodeAttributes {
    pub fn num_nodes(&self) -> usize {
        self.birth_year.len()
    }

    pub fn num_years(&self) -> usize {
        self.household.len()
    }

    /// Flags of a named binary event.
    pub fn event(&self, name: &str) -> Option<&[Vec<bool>]> {
        match name {
            "union" => Some(&self.union),
            "fertility" => Some(&self.fertility),
            "divorce" => Some(&self.divorce),
            _ => None,
        }
    }

    pub const EVENTS: [&'static str; 3] = ["union", "fertility", "divorce"];
}

struct Household {
    members: Vec<NodeId>,
    pos: (f64, f64),
}

struct People {
    birth: Vec<i32>,
    clan: Vec<u32>,
    parents: Vec<Option<(NodeId, NodeId)>>,
    partner: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    origin_school: Vec<u32>,
    twins: Vec<(NodeId, NodeId)>,
}

impl People {
    fn add(&mut self, birth: i32, clan: u32) -> NodeId {
        self.birth.push(birth);
        self.clan.push(clan);
        self.parents.push(None);
        self.partner.push(None);
        self.children.push(Vec::new());
        self.origin_school.push(NONE);
        (self.birth.len() - 1) as NodeId
    }

    fn couple(&mut self, a: NodeId, b: NodeId) {
        self.partner[a as usize] = Some(b);
        self.partner[b as usize] = Some(a);
    }

    fn child_of(&mut self, child: NodeId, a: NodeId, b: NodeId) {
        self.parents[child as usize] = Some((a, b));
        self.children[a as usize].push(child);
        self.children[b as usize].push(child);
    }
}

fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1)
}

fn nearest_school(schools: &[(f64, f64)], p: (f64, f64)) -> u32 {
    let mut best = 0;
    for (i, &s) in schools.iter().enumerate() {
        if dist2(s, p) < dist2(schools[best], p) {
            best = i;
        }
    }
    best as u32
}

fn clamp_unit(p: (f64, f64)) -> (f64, f64) {
    (p.0.clamp(0.0, 1.0), p.1.clamp(0.0, 1.0))
}

/// Birth sizes: each entry is 1 (single) or 2 (twins).
fn births(cfg: &SyntheticPopulationConfig, kids: &WeightedIndex<f64>, rng: &mut StreamRng) -> Vec<u8> {
    let n = kids.sample(rng);
    let mut out = Vec::new();
    let mut placed = 0;
    while placed < n {
        let twin = placed + 2 <= n && rng.random::<f64>() < cfg.twin_rate;
        out.push(if twin { 2 } else { 1 });
        placed += if twin { 2 } else { 1 };
    }
    out
}

struct ClanPlan {
    /// Per adult child: births of their couple (empty means single, childless).
    adults: Vec<Vec<u8>>,
}

impl ClanPlan {
    fn size(&self) -> usize {
        2 + self
            .adults
            .iter()
            .map(|b| 1 + usize::from(!b.is_empty()) + b.iter().map(|&x| x as usize).sum::<usize>())
            .sum::<usize>()
    }
}

/// Creates the people and their kinship structure.
fn build_people(cfg: &SyntheticPopulationConfig, rng: &mut StreamRng) -> Result<(People, Vec<(f64, f64)>)> {
    let adults_w = WeightedIndex::new(&cfg.adult_children_weights).map_err(|e| Error::Config(alloc::format!("{e}")))?;
    let kids_w = WeightedIndex::new(&cfg.children_weights).map_err(|e| Error::Config(alloc::format!("{e}")))?;
    let n = cfg.num_nodes as usize;
    let start = cfg.start_year;
    let mut people = People {
        birth: Vec::with_capacity(n),
        clan: Vec::with_capacity(n),
        parents: Vec::with_capacity(n),
        partner: Vec::with_capacity(n),
        children: Vec::with_capacity(n),
        origin_school: Vec::with_capacity(n),
        twins: Vec::new(),
    };
    let mut centers = Vec::new();
    let mut last_couple: Option<(NodeId, NodeId)> = None;
    while people.birth.len() < n {
        let remaining = n - people.birth.len();
        let clan = centers.len() as u32;
        let plan = ClanPlan {
            adults: (0..=adults_w.sample(rng)).map(|_| births(cfg, &kids_w, rng)).collect(),
        };
        if plan.size() > remaining {
            if remaining == 1 {
                // a late-born sibling in the last family
                let (a, b) = last_couple.expect("at least one couple exists before the final slot");
                let birth = people.birth[a as usize].max(people.birth[b as usize]) + 22;
                let c = people.add(birth.min(start), people.clan[a as usize]);
                people.child_of(c, a, b);
                break;
            }
            // a bare couple with the remaining slots as children
            let kids = remaining - 2;
            let g_birth = start - rng.random_range(28..=50);
            let g1 = people.add(g_birth, clan);
            let g2 = people.add(g_birth + rng.random_range(-3..=3), clan);
            people.couple(g1, g2);
            let mut k = 0;
            while k < kids {
                let b = (g_birth + rng.random_range(22..=40)).min(start);
                let twin = k + 2 <= kids && rng.random::<f64>() < cfg.twin_rate;
                let first = people.birth.len() as NodeId;
                for _ in 0..if twin { 2 } else { 1 } {
                    let c = people.add(b, clan);
                    people.child_of(c, g1, g2);
                    k += 1;
                }
                if twin {
                    people.twins.push((first, first + 1));
                }
            }
            if kids > 0 {
                last_couple = Some((g1, g2));
            }
            centers.push((rng.random::<f64>(), rng.random::<f64>()));
            continue;
        }
        centers.push((rng.random::<f64>(), rng.random::<f64>()));
        let g_birth = start - rng.random_range(58..=82);
        let g1 = people.add(g_birth, clan);
        let g2 = people.add(g_birth + rng.random_range(-3..=3), clan);
        people.couple(g1, g2);
        last_couple = Some((g1, g2));
        for births in &plan.adults {
            let a_birth = (g_birth + rng.random_range(22..=40)).min(start - 25);
            let a = people.add(a_birth, clan);
            people.child_of(a, g1, g2);
            if births.is_empty() {
                continue;
            }
            // co-parent from outside the clan
            let p = people.add(a_birth + rng.random_range(-4..=4), clan);
            people.couple(a, p);
            let younger = people.birth[a as usize].max(people.birth[p as usize]);
            for &size in births {
                let b = (younger + rng.random_range(22..=40)).min(start);
                let first = people.birth.len() as NodeId;
                for _ in 0..size {
                    let c = people.add(b, clan);
                    people.child_of(c, a, p);
                }
                if size == 2 {
                    people.twins.push((first, first + 1));
                }
            }
            last_couple = Some((a, p));
        }
    }
    debug_assert_eq!(people.birth.len(), n);
    Ok((people, centers))
}

/// Kinship ties: parents, children, grandparents, siblings, co-parents,
/// aunts and uncles, nieces and nephews, first cousins.
fn family_edges(people: &People) -> BTreeSet<(NodeId, NodeId)> {
    let mut edges = BTreeSet::new();
    let mut add = |a: NodeId, b: NodeId| {
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    };
    let n = people.birth.len();
    for v in 0..n as NodeId {
        if let Some(p) = people.partner[v as usize] {
            if !people.children[v as usize].is_empty() {
                add(v, p);
            }
        }
        let Some((a, b)) = people.parents[v as usize] else { continue };
        for parent in [a, b] {
            add(v, parent);
            for &sib in &people.children[parent as usize] {
                add(v, sib);
            }
            if let Some((ga, gb)) = people.parents[parent as usize] {
                add(v, ga);
                add(v, gb);
                for &aunt in &people.children[ga as usize] {
                    if aunt == parent {
                        continue;
                    }
                    add(v, aunt);
                    for &cousin in &people.children[aunt as usize] {
                        add(v, cousin);
                    }
                }
            }
        }
    }
    edges
}

fn sibling_pairs(people: &People) -> (Vec<(NodeId, NodeId)>, Vec<(NodeId, NodeId)>) {
    let mut siblings = BTreeSet::new();
    for v in 0..people.birth.len() {
        let Some((a, _)) = people.parents[v] else { continue };
        for &s in &people.children[a as usize] {
            let (u, w) = (v as NodeId, s);
            if u < w && people.parents[w as usize] == people.parents[v] {
                siblings.insert((u, w));
            }
        }
    }
    let mut twins = people.twins.clone();
    twins.sort_unstable();
    (twins, siblings.into_iter().collect())
}

struct Town {
    households: Vec<Household>,
    household_of: Vec<u32>,
    left_home: Vec<bool>,
}

impl Town {
    fn new_household(&mut self, members: Vec<NodeId>, pos: (f64, f64)) {
        let id = self.households.len() as u32;
        for &m in &members {
            self.household_of[m as usize] = id;
        }
        self.households.push(Household { members, pos });
    }

    fn leave_home(&mut self, v: NodeId) {
        let h = self.household_of[v as usize] as usize;
        self.households[h].members.retain(|&m| m != v);
        self.left_home[v as usize] = true;
    }

    /// Groups new leavers into shared households at random positions.
    fn settle(&mut self, mut leavers: Vec<NodeId>, sizes: &WeightedIndex<f64>, rng: &mut StreamRng) {
        leavers.shuffle(rng);
        let mut rest = &leavers[..];
        while !rest.is_empty() {
            let size = (sizes.sample(rng) + 1).min(rest.len());
            let (group, tail) = rest.split_at(size);
            let pos = (rng.random::<f64>(), rng.random::<f64>());
            self.new_household(group.to_vec(), pos);
            rest = tail;
        }
    }
}

fn initial_town(cfg: &SyntheticPopulationConfig, people: &People, centers: &[(f64, f64)], rng: &mut StreamRng) -> Town {
    let n = people.birth.len();
    let mut town = Town { households: Vec::new(), household_of: alloc::vec![NONE; n], left_home: alloc::vec![false; n] };
    let near = |c: (f64, f64), rng: &mut StreamRng| {
        clamp_unit((c.0 + cfg.clan_spread * normal(rng), c.1 + cfg.clan_spread * normal(rng)))
    };
    let age = |v: usize| cfg.start_year - people.birth[v];
    let mut leavers = Vec::new();
    let mut placed = alloc::vec![false; n];
    for v in 0..n {
        if placed[v] || people.parents[v].is_some_and(|_| age(v) < 18) {
            continue;
        }
        // v heads a household: itself, its partner, and their minor children
        let mut members = alloc::vec![v as NodeId];
        if let Some(p) = people.partner[v] {
            members.push(p);
        }
        let kids: Vec<NodeId> = members
            .iter()
            .flat_map(|&m| people.children[m as usize].iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for c in kids {
            if age(c as usize) < 18 {
                members.push(c);
            }
        }
        if people.parents[v].is_some() && people.partner[v].is_none() && age(v) < 30 {
            leavers.push(v as NodeId);
            placed[v] = true;
            town.left_home[v] = true;
            continue;
        }
        for &m in &members {
            placed[m as usize] = true;
        }
        let pos = near(centers[people.clan[v] as usize], rng);
        town.new_household(members, pos);
    }
    let sizes = WeightedIndex::new(&cfg.young_household_weights).expect("validated weights");
    town.settle(leavers, &sizes, rng);
    debug_assert!(town.household_of.iter().all(|&h| h != NONE));
    town
}

/// Mutual nearest-colleague ties inside each workplace, closest by residence.
fn colleague_edges(workplace: &[u32], pos: &[(f64, f64)], cap: usize, edges: &mut Vec<(NodeId, NodeId, LayerId)>) {
    let mut by_place: alloc::collections::BTreeMap<u32, Vec<NodeId>> = alloc::collections::BTreeMap::new();
    for (v, &w) in workplace.iter().enumerate() {
        if w != NONE {
            by_place.entry(w).or_default().push(v as NodeId);
        }
    }
    for members in by_place.values() {
        if members.len() <= cap + 1 {
            for (i, &u) in members.iter().enumerate() {
                for &v in &members[i + 1..] {
                    edges.push((u, v, LayerId::COLLEAGUE));
                }
            }
            continue;
        }
        let closest: Vec<BTreeSet<NodeId>> = members
            .iter()
            .map(|&u| {
                let mut others: Vec<(f64, NodeId)> =
                    members.iter().filter(|&&v| v != u).map(|&v| (dist2(pos[u as usize], pos[v as usize]), v)).collect();
                others.select_nth_unstable_by(cap - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others[..cap].iter().map(|&(_, v)| v).collect()
            })
            .collect();
        for (i, &u) in members.iter().enumerate() {
            for (j, &v) in members.iter().enumerate().skip(i + 1) {
                if closest[i].contains(&v) && closest[j].contains(&u) {
                    edges.push((u, v, LayerId::COLLEAGUE));
                }
            }
        }
    }
}

/// Residents of the `k` closest other addresses.
fn neighbor_edges(town: &Town, k: usize, edges: &mut Vec<(NodeId, NodeId, LayerId)>) {
    let occupied: Vec<&Household> = town.households.iter().filter(|h| !h.members.is_empty()).collect();
    let k = k.min(occupied.len().saturating_sub(1));
    if k == 0 {
        return;
    }
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(occupied.len());
    for (i, h) in occupied.iter().enumerate() {
        dists.clear();
        dists.extend(occupied.iter().enumerate().filter(|&(j, _)| j != i).map(|(j, o)| (dist2(h.pos, o.pos), j)));
        dists.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &dists[..k] {
            for &u in &h.members {
                for &v in &occupied[j].members {
                    edges.push((u, v, LayerId::NEIGHBOR));
                }
            }
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Draws flags with `P(v) = logistic(a + score_v)`, the intercept `a`
/// chosen so the mean probability matches `rate`. `None` scores are
/// ineligible.
fn calibrated_flags(scores: &[Option<f64>], rate: f64, rng: &mut StreamRng) -> Vec<bool> {
    let n = scores.len() as f64;
    let mean_p = |a: f64| scores.iter().flatten().map(|s| logistic(a + s)).sum::<f64>() / n;
    let eligible = scores.iter().flatten().count() as f64 / n;
    let target = rate.min(eligible * (1.0 - 1e-9));
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    scores.iter().map(|s| s.is_some_and(|s| rng.random::<f64>() < logistic(a + s))).collect()
}

/// Generates `num_years` yearly snapshots over one node set plus attributes.
pub fn generate_synthetic(config: &SyntheticPopulationConfig, seed: u64) -> Result<(Vec<MultiplexGraph>, NodeAttributes)> {
    config.validate()?;
    let cfg = config;
    let stream = |phase: u64| rng::keyed(seed, domain::SYNTH, phase);
    let mut rng = stream(0);
    let (mut people, centers) = build_people(cfg, &mut rng)?;
    let n = people.birth.len();

    let mut rng = stream(1);
    let schools: Vec<(f64, f64)> = (0..cfg.num_schools).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    for v in 0..n {
        let in_law = people.parents[v].is_none() && !is_founder(&people, v);
        people.origin_school[v] = if in_law {
            rng.random_range(0..cfg.num_schools)
        } else {
            nearest_school(&schools, centers[people.clan[v] as usize])
        };
    }
    let family = family_edges(&people);
    let (twins, siblings) = sibling_pairs(&people);

    let mut rng = stream(2);
    let mut town = initial_town(cfg, &people, &centers, &mut rng);
    let employable: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < cfg.employment_rate).collect();
    let expected_workers = (0..n)
        .filter(|&v| employable[v] && WORKING_AGES.contains(&(cfg.start_year - people.birth[v])))
        .count();
    let num_workplaces = (libm::round(expected_workers as f64 / cfg.workplace_mean_size) as usize).max(1);
    let attraction: Vec<f64> =
        (0..num_workplaces).map(|_| libm::exp(cfg.workplace_size_sigma * normal(&mut rng))).collect();
    let pick_workplace = WeightedIndex::new(&attraction).expect("positive weights");
    let young_sizes = WeightedIndex::new(&cfg.young_household_weights).expect("validated weights");

    let mut rng = stream(3);
    let z_work: Vec<f64> = (0..num_workplaces).map(|_| normal(&mut rng)).collect();
    let z_clan: Vec<f64> = (0..centers.len()).map(|_| normal(&mut rng)).collect();

    let mut workplace = alloc::vec![NONE; n];
    // classmate cohorts are keyed by (school, birth year) and never dissolve
    let mut cohorts: BTreeSet<(u32, i32, NodeId)> = BTreeSet::new();
    for v in 0..n {
        if cfg.start_year - people.birth[v] > *SCHOOL_AGES.end() {
            cohorts.insert((people.origin_school[v], people.birth[v], v as NodeId));
        }
    }

    let names = canonical_layer_names();
    let mut graphs = Vec::with_capacity(cfg.num_years as usize);
    let years = cfg.num_years as usize;
    let mut attrs = NodeAttributes {
        start_year: cfg.start_year,
        birth_year: people.birth.clone(),
        clan: people.clan.clone(),
        twins,
        siblings,
        couples: (0..n)
            .filter_map(|v| people.partner[v].filter(|&p| p as usize > v).map(|p| (v as NodeId, p)))
            .collect(),
        household: Vec::with_capacity(years),
        workplace: Vec::with_capacity(years),
        school: Vec::with_capacity(years),
        coordinates: Vec::with_capacity(years),
        income: Vec::with_capacity(years),
        union: Vec::with_capacity(years),
        fertility: Vec::with_capacity(years),
        divorce: Vec::with_capacity(years),
    };

    for t in 0..years {
        let year = cfg.start_year + t as i32;
        let age = |v: usize| year - people.birth[v];
        let mut rng = stream(10 + t as u64);
        if t > 0 {
            let leavers: Vec<NodeId> = (0..n)
                .filter(|&v| !town.left_home[v] && people.parents[v].is_some() && age(v) == 18)
                .map(|v| v as NodeId)
                .collect();
            for &v in &leavers {
                town.leave_home(v);
            }
            town.settle(leavers, &young_sizes, &mut rng);
            for h in town.households.iter_mut() {
                if !h.members.is_empty() && rng.random::<f64>() < cfg.move_rate {
                    h.pos = (rng.random::<f64>(), rng.random::<f64>());
                }
            }
        }
        let pos: Vec<(f64, f64)> = (0..n).map(|v| town.households[town.household_of[v] as usize].pos).collect();

        // jobs
        for v in 0..n {
            let working_age = WORKING_AGES.contains(&age(v)) && employable[v];
            if !working_age {
                workplace[v] = NONE;
            } else if workplace[v] == NONE {
                workplace[v] = pick_workplace.sample(&mut rng) as u32;
            } else if t > 0 && num_workplaces > 1 && rng.random::<f64>() < cfg.job_change_rate {
                let old = workplace[v];
                while workplace[v] == old {
                    workplace[v] = pick_workplace.sample(&mut rng) as u32;
                }
            }
        }

        // schools
        let school: Vec<u32> =
            (0..n).map(|v| if SCHOOL_AGES.contains(&age(v)) { nearest_school(&schools, pos[v]) } else { NONE }).collect();
        for v in 0..n {
            if school[v] != NONE {
                cohorts.insert((school[v], people.birth[v], v as NodeId));
            }
        }

        let mut edges: Vec<(NodeId, NodeId, LayerId)> = family.iter().map(|&(u, v)| (u, v, LayerId::FAMILY)).collect();
        for h in &town.households {
            for (i, &u) in h.members.iter().enumerate() {
                for &v in &h.members[i + 1..] {
                    edges.push((u, v, LayerId::HOUSEHOLD));
                }
            }
        }
        neighbor_edges(&town, cfg.neighbor_addresses as usize, &mut edges);
        colleague_edges(&workplace, &pos, cfg.colleague_cap as usize, &mut edges);
        let cohort_list: Vec<&(u32, i32, NodeId)> = cohorts.iter().collect();
        let mut start = 0;
        while start < cohort_list.len() {
            let key = (cohort_list[start].0, cohort_list[start].1);
            let mut end = start;
            while end < cohort_list.len() && (cohort_list[end].0, cohort_list[end].1) == key {
                end += 1;
            }
            for i in start..end {
                for j in (i + 1)..end {
                    edges.push((cohort_list[i].2, cohort_list[j].2, LayerId::CLASSMATE));
                }
            }
            start = end;
        }
        graphs.push(MultiplexGraph::from_edges(n as u32, year, names.clone(), edges)?);

        // targets
        let s = cfg.signal_strength;
        let zw = |v: usize| if workplace[v] == NONE { 0.0 } else { z_work[workplace[v] as usize] };
        let partnered = |v: usize| people.partner[v].is_some();
        let union_scores: Vec<Option<f64>> = (0..n)
            .map(|v| {
                let a = age(v);
                (a >= 18).then(|| {
                    let single_young = f64::from(u8::from(!partnered(v) && (20..=40).contains(&a)));
                    s * (0.5 * zw(v) + 1.5 * single_young - 1.5 * f64::from(u8::from(workplace[v] == NONE)))
                })
            })
            .collect();
        let fertility_scores: Vec<Option<f64>> = (0..n)
            .map(|v| {
                let a = age(v);
                (18..=45).contains(&a).then(|| {
                    s * (-0.5 * zw(v) + 1.5 * f64::from(u8::from(partnered(v))) - 1.0 * f64::from(u8::from(workplace[v] == NONE)) + 0.5 * z_clan[people.clan[v] as usize])
                })
            })
            .collect();
        // couples divorce jointly; the score sits on the lower id and is copied over
        let jobless = |v: usize| f64::from(u8::from(workplace[v] == NONE));
        let divorce_scores: Vec<Option<f64>> = (0..n)
            .map(|v| match people.partner[v] {
                Some(p) if (p as usize) > v && !people.children[v].is_empty() => {
                    let p = p as usize;
                    Some(s * (0.5 * (zw(v) + zw(p)) - 1.0 * (jobless(v) + jobless(p))))
                }
                _ => None,
            })
            .collect();
        let mut rng = stream(100 + t as u64);
        attrs.union.push(calibrated_flags(&union_scores, cfg.union_rate, &mut rng));
        attrs.fertility.push(calibrated_flags(&fertility_scores, cfg.fertility_rate, &mut rng));
        let mut divorce = calibrated_flags(&divorce_scores, 0.5 * cfg.divorce_rate, &mut rng);
        for &(u, v) in &attrs.couples {
            divorce[v as usize] = divorce[u as usize];
        }
        attrs.divorce.push(divorce);
        let income: Vec<f64> = (0..n)
            .map(|v| {
                let a = age(v);
                let noise = normal(&mut rng);
                if workplace[v] != NONE {
                    libm::exp(
                        10.3 + s * 0.4 * zw(v) + 0.15 * z_clan[people.clan[v] as usize] + 0.01 * f64::from(a - 40)
                            + 0.3 * noise,
                    )
                } else if a >= 18 && rng.random::<f64>() < 0.5 {
                    libm::exp(9.3 + 0.2 * noise)
                } else {
                    0.0
                }
            })
            .collect();
        attrs.income.push(income);
        attrs.household.push(town.household_of.clone());
        attrs.workplace.push(workplace.clone());
        attrs.school.push(school);
        attrs.coordinates.push(pos);
    }
    Ok((graphs, attrs))
}

/// Grandparent-generation founders have no parents but an in-clan partner
/// of the same generation; in-laws have no parents and a partner with parents.
fn is_founder(people: &People, v: usize) -> bool {
    match people.partner[v] {
        Some(p) => people.parents[p as usize].is_none(),
        None => true,
    }
}

/// Short summary used in reports.
pub fn describe(attrs: &NodeAttributes) -> String {
    alloc::format!(
        "{} nodes, {} years, {} twin pairs, {} sibling pairs",
        attrs.num_nodes(),
        attrs.num_years(),
        attrs.twins.len(),
        attrs.siblings.len()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticPopulationConfig {
        SyntheticPopulationConfig { num_nodes: 1_500, num_years: 3, ..Default::default() }
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic(&small(), 7).unwrap();
        let b = generate_synthetic(&small(), 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.1, generate_synthetic(&small(), 8).unwrap().1);
    }

    #[test]
    fn structure_invariants() {
        let (graphs, attrs) = generate_synthetic(&small(), 3).unwrap();
        assert_eq!(graphs.len(), 3);
        assert_eq!(attrs.num_nodes(), 1_500);
        assert!(!attrs.twins.is_empty());
        for g in &graphs {
            assert!(g.validate().valid);
            assert_eq!(g.num_nodes(), 1_500);
            for &(u, v) in &attrs.twins {
                assert!(g.has_edge(u, v, LayerId::FAMILY));
            }
            for v in 0..g.num_nodes() {
                assert!(g.active_layers(v).count() >= 2, "node {v}");
            }
            let max_colleague = (0..g.num_nodes()).map(|v| g.layer(LayerId::COLLEAGUE).degree(v)).max().unwrap();
            assert!(max_colleague <= 100);
        }
        // kinship does not churn, classmate ties only accumulate
        assert_eq!(graphs[0].layer(LayerId::FAMILY), graphs[2].layer(LayerId::FAMILY));
        for (u, v, l) in graphs[0].edges() {
            if l == LayerId::CLASSMATE {
                assert!(graphs[2].has_edge(u, v, l));
            }
        }
        for t in 0..3 {
            assert!(attrs.household[t].iter().all(|&h| h != NONE));
        }
    }

    #[test]
    fn colleague_cap_binds() {
        let cfg = SyntheticPopulationConfig {
            num_nodes: 3_000,
            num_years: 1,
            workplace_mean_size: 400.0,
            colleague_cap: 30,
            ..Default::default()
        };
        let (graphs, attrs) = generate_synthetic(&cfg, 1).unwrap();
        let g = &graphs[0];
        let max = (0..g.num_nodes()).map(|v| g.layer(LayerId::COLLEAGUE).degree(v)).max().unwrap();
        assert!(max <= 30);
        let mut sizes = alloc::collections::BTreeMap::new();
        for &w in &attrs.workplace[0] {
            *sizes.entry(w).or_insert(0) += 1;
        }
        assert!(sizes.iter().any(|(&w, &c)| w != NONE && c > 31));
    }

    #[test]
    fn event_rates_are_calibrated() {
        let (_, attrs) = generate_synthetic(&SyntheticPopulationConfig { num_years: 1, ..Default::default() }, 5).unwrap();
        let rate = |f: &[bool]| f.iter().filter(|&&x| x).count() as f64 / f.len() as f64;
        assert!((rate(&attrs.union[0]) - 0.06).abs() < 0.01);
        assert!((rate(&attrs.fertility[0]) - 0.05).abs() < 0.01);
        assert!((rate(&attrs.divorce[0]) - 0.04).abs() < 0.01);
        assert!(attrs.income[0].contains(&0.0));
    }

    #[test]
    fn infeasible_configs() {
        let bad = |f: fn(&mut SyntheticPopulationConfig)| {
            let mut c = small();
            f(&mut c);
            generate_synthetic(&c, 0).is_err()
        };
        assert!(bad(|c| c.young_household_weights = alloc::vec![1.0; 2_000]));
        assert!(bad(|c| c.num_nodes = 5));
        assert!(bad(|c| c.twin_rate = 1.5));
        assert!(bad(|c| c.children_weights = alloc::vec![0.0, 0.0]));
        assert!(bad(|c| c.colleague_cap = 0));
        assert!(bad(|c| c.num_years = 0));
    }
}
