//! QUBO compilation: the UCP objective plus weighted penalties, one per
//! constraint instance, expanded into linear and upper-triangular quadratic
//! coefficients.
//!
//! Every penalty is kept in symbolic form next to the coefficients, so the
//! per-group breakdown is evaluated in exact integer arithmetic.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoding::{BitString, Formulation, VariableLayout};
use crate::error::{Error, Result};
use crate::instance::UcpInstance;
use crate::sampler::ScenarioSet;

/// Constraint groups carrying their own penalty factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Logic1,
    Logic2,
    Demand,
    Coupling,
    Capacity,
    Ramp,
    Reliability,
}

impl Group {
    pub const ALL: [Group; 7] = [
        Group::Logic1,
        Group::Logic2,
        Group::Demand,
        Group::Coupling,
        Group::Capacity,
        Group::Ramp,
        Group::Reliability,
    ];

    /// Groups of the deterministic model.
    pub const DETERMINISTIC: [Group; 6] = [
        Group::Logic1,
        Group::Logic2,
        Group::Demand,
        Group::Coupling,
        Group::Capacity,
        Group::Ramp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::Logic1 => "logic1",
            Group::Logic2 => "logic2",
            Group::Demand => "demand",
            Group::Coupling => "coupling",
            Group::Capacity => "capacity",
            Group::Ramp => "ramp",
            Group::Reliability => "reliability",
        }
    }

    /// Groups present in a model of the given kind.
    pub fn for_model(stochastic: bool) -> &'static [Group] {
        if stochastic {
            &Group::ALL
        } else {
            &Group::DETERMINISTIC
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Group> {
        Group::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown constraint group `{s}`")))
    }
}

/// Penalty factor per constraint group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyWeights {
    pub lambda_logic1: f64,
    pub lambda_logic2: f64,
    pub lambda_demand: f64,
    pub lambda_coupling: f64,
    pub lambda_capacity: f64,
    pub lambda_ramp: f64,
    #[serde(default = "one")]
    pub lambda_reliability: f64,
}

fn one() -> f64 {
    1.0
}

impl PenaltyWeights {
    pub fn uniform(value: f64) -> PenaltyWeights {
        PenaltyWeights {
            lambda_logic1: value,
            lambda_logic2: value,
            lambda_demand: value,
            lambda_coupling: value,
            lambda_capacity: value,
            lambda_ramp: value,
            lambda_reliability: value,
        }
    }

    /// Published factors obtained by tuning the deterministic model.
    pub fn reference_preset() -> PenaltyWeights {
        PenaltyWeights {
            lambda_logic1: 24.62,
            lambda_logic2: 3.63,
            lambda_demand: 7.21,
            lambda_coupling: 1081.48,
            lambda_capacity: 31.61,
            lambda_ramp: 37.32,
            lambda_reliability: 1.0,
        }
    }

    pub fn get(&self, group: Group) -> f64 {
        match group {
            Group::Logic1 => self.lambda_logic1,
            Group::Logic2 => self.lambda_logic2,
            Group::Demand => self.lambda_demand,
            Group::Coupling => self.lambda_coupling,
            Group::Capacity => self.lambda_capacity,
            Group::Ramp => self.lambda_ramp,
            Group::Reliability => self.lambda_reliability,
        }
    }

    pub fn set(&mut self, group: Group, value: f64) {
        let slot = match group {
            Group::Logic1 => &mut self.lambda_logic1,
            Group::Logic2 => &mut self.lambda_logic2,
            Group::Demand => &mut self.lambda_demand,
            Group::Coupling => &mut self.lambda_coupling,
            Group::Capacity => &mut self.lambda_capacity,
            Group::Ramp => &mut self.lambda_ramp,
            Group::Reliability => &mut self.lambda_reliability,
        };
        *slot = value;
    }

    pub fn validate(&self) -> Result<()> {
        for g in Group::ALL {
            let v = self.get(g);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!("lambda_{g} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<PenaltyWeights> {
        let w: PenaltyWeights = serde_json::from_str(text)?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PenaltyWeights> {
        PenaltyWeights::from_json_str(&std::fs::read_to_string(path)?)
    }
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        PenaltyWeights::uniform(1.0)
    }
}

/// `constant + sum coeff·x_i` over binary variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinearExpr {
    pub terms: Vec<(usize, i64)>,
    pub constant: i64,
}

impl LinearExpr {
    fn new() -> LinearExpr {
        LinearExpr::default()
    }

    fn add(&mut self, terms: impl IntoIterator<Item = (usize, i64)>, sign: i64) {
        self.terms.extend(terms.into_iter().map(|(i, c)| (i, c * sign)));
    }

    /// Merges repeated indices and drops zero terms.
    fn normalized(mut self) -> LinearExpr {
        self.terms.sort_unstable_by_key(|(i, _)| *i);
        let mut merged: Vec<(usize, i64)> = Vec::with_capacity(self.terms.len());
        for (i, c) in self.terms {
            match merged.last_mut() {
                Some((j, d)) if *j == i => *d += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|(_, c)| *c != 0);
        LinearExpr {
            terms: merged,
            constant: self.constant,
        }
    }

    pub fn value(&self, bits: &[u8]) -> i64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(i, c)| i64::from(bits[*i]) * c)
                .sum::<i64>()
    }
}

/// A binary literal: `x_i` or `1 - x_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lit {
    pub index: usize,
    pub negated: bool,
}

impl Lit {
    fn value(self, bits: &[u8]) -> i64 {
        let v = i64::from(bits[self.index]);
        if self.negated {
            1 - v
        } else {
            v
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PenaltyKind {
    /// `(expr)^2`
    Squared(LinearExpr),
    /// `sum a·b`
    Products(Vec<(Lit, Lit)>),
}

/// One constraint instance and the group whose factor scales it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Penalty {
    pub group: Group,
    pub kind: PenaltyKind,
}

impl Penalty {
    /// Unweighted violation measure; zero iff the constraint holds.
    pub fn violation(&self, bits: &[u8]) -> i64 {
        match &self.kind {
            PenaltyKind::Squared(e) => {
                let r = e.value(bits);
                r * r
            }
            PenaltyKind::Products(pairs) => pairs.iter().map(|(a, b)| a.value(bits) * b.value(bits)).sum(),
        }
    }
}

/// Compiled model: `offset + sum linear_i x_i + sum_{i<j} quadratic_ij x_i x_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuboModel {
    pub num_vars: usize,
    pub linear: BTreeMap<usize, f64>,
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
    /// Constraint instances, empty for imported models.
    pub penalties: Vec<Penalty>,
    pub weights: Option<PenaltyWeights>,
    pub layout: Option<VariableLayout>,
}

#[derive(Default)]
struct Accumulator {
    linear: HashMap<usize, f64>,
    quadratic: HashMap<(usize, usize), f64>,
    offset: f64,
}

impl Accumulator {
    fn lin(&mut self, i: usize, c: f64) {
        *self.linear.entry(i).or_insert(0.0) += c;
    }

    fn quad(&mut self, i: usize, j: usize, c: f64) {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => self.lin(i, c),
            std::cmp::Ordering::Less => *self.quadratic.entry((i, j)).or_insert(0.0) += c,
            std::cmp::Ordering::Greater => *self.quadratic.entry((j, i)).or_insert(0.0) += c,
        }
    }

    fn penalty(&mut self, weight: f64, penalty: &Penalty) {
        match &penalty.kind {
            PenaltyKind::Squared(e) => {
                let c = e.constant as f64;
                self.offset += weight * c * c;
                for (a, (i, ci)) in e.terms.iter().enumerate() {
                    let ci = *ci as f64;
                    self.lin(*i, weight * (ci * ci + 2.0 * c * ci));
                    for (j, cj) in &e.terms[a + 1..] {
                        self.quad(*i, *j, weight * 2.0 * ci * *cj as f64);
                    }
                }
            }
            PenaltyKind::Products(pairs) => {
                for (a, b) in pairs {
                    match (a.negated, b.negated) {
                        (false, false) => self.quad(a.index, b.index, weight),
                        (true, false) => {
                            self.lin(b.index, weight);
                            self.quad(a.index, b.index, -weight);
                        }
                        (false, true) => {
                            self.lin(a.index, weight);
                            self.quad(a.index, b.index, -weight);
                        }
                        (true, true) => {
                            self.offset += weight;
                            self.lin(a.index, -weight);
                            self.lin(b.index, -weight);
                            self.quad(a.index, b.index, weight);
                        }
                    }
                }
            }
        }
    }
}

/// Builds the constraint instances of a formulation.
pub fn penalties(f: &Formulation) -> Vec<Penalty> {
    let inst = &f.instance;
    let l = &f.layout;
    let w = &f.widths;
    let mut out = Vec::new();
    let squared = |group, e: LinearExpr| Penalty {
        group,
        kind: PenaltyKind::Squared(e.normalized()),
    };

    for g in 0..l.generators {
        for t in 0..l.horizon {
            let mut e = LinearExpr::new();
            e.add([(l.u(g, t), 1), (l.z_on(g, t), -1), (l.z_off(g, t), 1)], 1);
            if t == 0 {
                e.constant = -i64::from(inst.initial.u0[g]);
            } else {
                e.add([(l.u(g, t - 1), -1)], 1);
            }
            out.push(squared(Group::Logic1, e));
        }
    }
    for g in 0..l.generators {
        for t in 0..l.horizon {
            let on = Lit { index: l.z_on(g, t), negated: false };
            let off = Lit { index: l.z_off(g, t), negated: false };
            out.push(Penalty {
                group: Group::Logic2,
                kind: PenaltyKind::Products(vec![(on, off)]),
            });
        }
    }
    for t in 0..l.horizon {
        let supply: Vec<(usize, i64)> = (0..l.generators).flat_map(|g| f.dispatch_terms(g, t)).collect();
        if f.is_stochastic() {
            for (i, row) in f.demand_rows.iter().enumerate() {
                let mut e = LinearExpr::new();
                e.add(supply.iter().copied(), w.scale);
                e.add([(l.y(i), row[t])], -1);
                e.add(Formulation::slack_terms(l.demand_slack(i, t), w.demand_slack_max), -1);
                out.push(squared(Group::Demand, e));
            }
        } else {
            let mut e = LinearExpr::new();
            e.add(supply.iter().copied(), 1);
            e.add(Formulation::slack_terms(l.demand_slack(0, t), w.demand_slack_max), -1);
            e.constant = -f.demand_rows[0][t];
            out.push(squared(Group::Demand, e));
        }
    }
    for g in 0..l.generators {
        for t in 0..l.horizon {
            let off = Lit { index: l.u(g, t), negated: true };
            let pairs = (0..l.n_gen)
                .map(|k| (off, Lit { index: l.p_bit(g, t, k), negated: false }))
                .collect::<Vec<_>>();
            if !pairs.is_empty() {
                out.push(Penalty {
                    group: Group::Coupling,
                    kind: PenaltyKind::Products(pairs),
                });
            }
        }
    }
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 0..l.horizon {
            let mut e = LinearExpr::new();
            e.add(f.dispatch_terms(g, t), 1);
            e.add(Formulation::slack_terms(l.capacity_slack(g, t), w.capacity_slack_max[g]), 1);
            e.constant = -gen.p_max;
            out.push(squared(Group::Capacity, e));
        }
    }
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 0..l.horizon {
            let mut e = LinearExpr::new();
            e.add(f.dispatch_terms(g, t), 1);
            e.constant = gen.r_down;
            if t == 0 {
                e.constant -= inst.initial.p0[g];
            } else {
                e.add(f.dispatch_terms(g, t - 1), -1);
            }
            e.add(Formulation::slack_terms(l.ramp_slack(g, t), w.ramp_slack_max[g]), -1);
            out.push(squared(Group::Ramp, e));
        }
    }
    if let (Some(quota), Some(s_max)) = (f.quota, w.reliability_slack_max) {
        let mut e = LinearExpr::new();
        e.add((0..l.scenarios).map(|i| (l.y(i), 1)), 1);
        e.add(Formulation::slack_terms(l.reliability_slack(), s_max), -1);
        e.constant = -(quota as i64);
        out.push(squared(Group::Reliability, e));
    }
    out
}

/// Compiles the model described by `formulation` with the given weights.
pub fn compile_formulation(f: &Formulation, weights: &PenaltyWeights) -> Result<QuboModel> {
    weights.validate()?;
    let inst = &f.instance;
    let l = &f.layout;
    let mut acc = Accumulator::default();
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 0..l.horizon {
            acc.lin(l.u(g, t), gen.c_fixed);
            acc.lin(l.z_on(g, t), gen.c_startup);
            acc.lin(l.z_off(g, t), gen.c_shutdown);
            for (i, c) in f.dispatch_terms(g, t) {
                acc.lin(i, gen.b * c as f64);
            }
        }
    }
    let penalties = penalties(f);
    for p in &penalties {
        let weight = weights.get(p.group);
        if weight != 0.0 {
            acc.penalty(weight, p);
        }
    }
    let linear = acc.linear.into_iter().filter(|(_, c)| *c != 0.0).collect();
    let quadratic = acc.quadratic.into_iter().filter(|(_, c)| *c != 0.0).collect();
    Ok(QuboModel {
        num_vars: l.total,
        linear,
        quadratic,
        offset: acc.offset,
        penalties,
        weights: Some(weights.clone()),
        layout: Some(l.clone()),
    })
}

/// Compiles the deterministic model, or the scenario model when both
/// `scenarios` and `p_level` are given.
pub fn compile(
    instance: &UcpInstance,
    weights: &PenaltyWeights,
    scenarios: Option<&ScenarioSet>,
    p_level: Option<f64>,
) -> Result<QuboModel> {
    let f = formulation(instance, scenarios, p_level)?;
    compile_formulation(&f, weights)
}

/// The formulation matching the instance's demand variant.
pub fn formulation(instance: &UcpInstance, scenarios: Option<&ScenarioSet>, p_level: Option<f64>) -> Result<Formulation> {
    if instance.is_stochastic() {
        let scenarios = scenarios.ok_or(Error::Missing("scenario set"))?;
        let p = p_level.ok_or(Error::Missing("reliability level"))?;
        Formulation::stochastic(instance, scenarios, p)
    } else {
        Formulation::deterministic(instance)
    }
}

impl QuboModel {
    fn check_len(&self, bits: &[u8]) -> Result<()> {
        if bits.len() != self.num_vars {
            return Err(Error::Length {
                expected: self.num_vars,
                found: bits.len(),
            });
        }
        Ok(())
    }

    pub fn energy(&self, bits: &BitString) -> Result<f64> {
        let x = bits.as_slice();
        self.check_len(x)?;
        let mut e = self.offset;
        for (i, c) in &self.linear {
            if x[*i] == 1 {
                e += c;
            }
        }
        for ((i, j), c) in &self.quadratic {
            if x[*i] == 1 && x[*j] == 1 {
                e += c;
            }
        }
        Ok(e)
    }

    /// Unweighted violation per group, summed over its constraint instances.
    pub fn violations(&self, bits: &BitString) -> Result<BTreeMap<Group, i64>> {
        let x = bits.as_slice();
        self.check_len(x)?;
        let mut out = BTreeMap::new();
        for p in &self.penalties {
            *out.entry(p.group).or_insert(0) += p.violation(x);
        }
        Ok(out)
    }

    /// Weighted penalty energy per group.
    pub fn penalty_breakdown(&self, bits: &BitString) -> Result<BTreeMap<Group, f64>> {
        let weights = self.weights.clone().unwrap_or_default();
        Ok(self
            .violations(bits)?
            .into_iter()
            .map(|(g, v)| (g, weights.get(g) * v as f64))
            .collect())
    }

    /// Groups with at least one constraint instance.
    pub fn groups(&self) -> Vec<Group> {
        let mut g: Vec<Group> = self.penalties.iter().map(|p| p.group).collect();
        g.sort();
        g.dedup();
        g
    }

    /// Renders the text exchange format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "qubo {} {} {} {}",
            self.num_vars,
            self.linear.len(),
            self.quadratic.len(),
            self.offset
        )
        .unwrap();
        for (i, c) in &self.linear {
            writeln!(s, "{i} {c}").unwrap();
        }
        for ((i, j), c) in &self.quadratic {
            writeln!(s, "{i} {j} {c}").unwrap();
        }
        s
    }

    /// Parses the text exchange format. Reversed pairs are folded onto
    /// `(i, j)` with `i < j` and summed; a pair given twice in the same
    /// orientation is rejected.
    pub fn from_text(text: &str) -> Result<QuboModel> {
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let mut header: Option<(usize, usize, usize, f64)> = None;
        let mut linear: BTreeMap<usize, f64> = BTreeMap::new();
        let mut quadratic: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut seen_pairs = std::collections::HashSet::new();
        let (mut n_lin, mut n_quad) = (0usize, 0usize);
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let Some((num_vars, _, _, _)) = header else {
                if fields.len() != 5 || fields[0] != "qubo" {
                    return Err(parse_err(line_no, "expected `qubo <vars> <linear> <quadratic> <offset>`".into()));
                }
                let count = |s: &str| s.parse::<usize>().map_err(|e| parse_err(line_no, format!("bad count `{s}`: {e}")));
                let offset = parse_coeff(fields[4]).map_err(|m| parse_err(line_no, m))?;
                header = Some((count(fields[1])?, count(fields[2])?, count(fields[3])?, offset));
                continue;
            };
            let index = |s: &str| -> Result<usize> {
                let i = s
                    .parse::<usize>()
                    .map_err(|e| parse_err(line_no, format!("bad index `{s}`: {e}")))?;
                if i >= num_vars {
                    return Err(parse_err(line_no, format!("index {i} out of range for {num_vars} variables")));
                }
                Ok(i)
            };
            match fields.as_slice() {
                [i, c] => {
                    let i = index(i)?;
                    let c = parse_coeff(c).map_err(|m| parse_err(line_no, m))?;
                    if linear.insert(i, c).is_some() {
                        return Err(Error::DuplicateKey(format!("linear term {i} (line {line_no})")));
                    }
                    n_lin += 1;
                }
                [i, j, c] => {
                    let (i, j) = (index(i)?, index(j)?);
                    let c = parse_coeff(c).map_err(|m| parse_err(line_no, m))?;
                    if i == j {
                        return Err(parse_err(line_no, format!("diagonal pair ({i}, {i}) belongs in the linear section")));
                    }
                    if !seen_pairs.insert((i, j)) {
                        return Err(Error::DuplicateKey(format!("pair ({i}, {j}) (line {line_no})")));
                    }
                    *quadratic.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
                    n_quad += 1;
                }
                _ => return Err(parse_err(line_no, format!("expected 2 or 3 fields, found {}", fields.len()))),
            }
        }
        let (num_vars, h_lin, h_quad, offset) = header.ok_or_else(|| parse_err(1, "missing `qubo` header".into()))?;
        if h_lin != n_lin || h_quad != n_quad {
            return Err(parse_err(
                1,
                format!("header announces {h_lin} linear and {h_quad} quadratic terms, found {n_lin} and {n_quad}"),
            ));
        }
        linear.retain(|_, c| *c != 0.0);
        quadratic.retain(|_, c| *c != 0.0);
        Ok(QuboModel {
            num_vars,
            linear,
            quadratic,
            offset,
            penalties: Vec::new(),
            weights: None,
            layout: None,
        })
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn import(path: impl AsRef<Path>) -> Result<QuboModel> {
        QuboModel::from_text(&std::fs::read_to_string(path)?)
    }

    /// Equality of the polynomial only (variables, coefficients, offset).
    pub fn same_polynomial(&self, other: &QuboModel) -> bool {
        self.num_vars == other.num_vars
            && self.linear == other.linear
            && self.quadratic == other.quadratic
            && self.offset == other.offset
    }

    pub fn stats(&self) -> QuboStats {
        let mut degree = vec![0usize; self.num_vars];
        for (i, j) in self.quadratic.keys() {
            degree[*i] += 1;
            degree[*j] += 1;
        }
        let mut histogram = BTreeMap::new();
        for d in degree {
            *histogram.entry(d).or_insert(0) += 1;
        }
        QuboStats {
            num_vars: self.num_vars,
            num_linear: self.linear.len(),
            num_couplings: self.quadratic.len(),
            degree_histogram: histogram,
            reference_couplings: None,
            coupling_deviation: None,
        }
    }
}

/// Violated constraint instances per group, judged on the decoded schedule
/// rather than on the penalty terms, so slack bits play no part.
///
/// Coupling counts uncommitted units with nonzero output; capacity counts
/// outputs above `P_max`. Both are exact integer tests.
pub fn decoded_violations(f: &Formulation, bits: &BitString) -> Result<BTreeMap<Group, usize>> {
    let x = bits.as_slice();
    if x.len() != f.num_vars() {
        return Err(Error::Length {
            expected: f.num_vars(),
            found: x.len(),
        });
    }
    let inst = &f.instance;
    let l = &f.layout;
    let mut out: BTreeMap<Group, usize> = Group::for_model(f.is_stochastic()).iter().map(|g| (*g, 0)).collect();
    let mut bump = |g: Group| *out.get_mut(&g).expect("group present") += 1;
    let value = |terms: Vec<(usize, i64)>| terms.iter().map(|(i, c)| i64::from(x[*i]) * c).sum::<i64>();
    let mut supply = vec![0i64; l.horizon];
    for (g, gen) in inst.generators.iter().enumerate() {
        let mut prev_u = i64::from(inst.initial.u0[g]);
        let mut prev_p = inst.initial.p0[g];
        for t in 0..l.horizon {
            let u = i64::from(x[l.u(g, t)]);
            let on = i64::from(x[l.z_on(g, t)]);
            let off = i64::from(x[l.z_off(g, t)]);
            if u - prev_u != on - off {
                bump(Group::Logic1);
            }
            if on + off > 1 {
                bump(Group::Logic2);
            }
            let p = value(f.dispatch_terms(g, t));
            if u == 0 && p > 0 {
                bump(Group::Coupling);
            }
            if p > gen.p_max {
                bump(Group::Capacity);
            }
            if p - prev_p > gen.r_up || prev_p - p > gen.r_down {
                bump(Group::Ramp);
            }
            supply[t] += p;
            prev_u = u;
            prev_p = p;
        }
    }
    let scale = f.widths.scale;
    for (i, row) in f.demand_rows.iter().enumerate() {
        if f.is_stochastic() && x[l.y(i)] == 0 {
            continue;
        }
        for t in 0..l.horizon {
            if scale * supply[t] < row[t] {
                bump(Group::Demand);
            }
        }
    }
    if let Some(quota) = f.quota {
        let kept = (0..l.scenarios).filter(|i| x[l.y(*i)] == 1).count();
        if kept < quota {
            bump(Group::Reliability);
        }
    }
    Ok(out)
}

fn parse_coeff(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(format!("non-finite coefficient `{v}`")),
        Err(e) => Err(format!("bad coefficient `{s}`: {e}")),
    }
}

/// Interaction-graph statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuboStats {
    pub num_vars: usize,
    pub num_linear: usize,
    /// Stored upper-triangular nonzero quadratic coefficients.
    pub num_couplings: usize,
    /// Degree in the interaction graph -> number of variables.
    pub degree_histogram: BTreeMap<usize, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_couplings: Option<usize>,
    /// `(num_couplings - reference) / reference`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_deviation: Option<f64>,
}

impl QuboStats {
    pub fn with_reference(mut self, reference: usize) -> QuboStats {
        self.reference_couplings = Some(reference);
        self.coupling_deviation = Some((self.num_couplings as f64 - reference as f64) / reference as f64);
        self
    }
}

/// Published coupling counts of the built-in models.
pub const REFERENCE_COUPLINGS_DETERMINISTIC: usize = 5_651;
pub const REFERENCE_COUPLINGS_STOCHASTIC_N10: usize = 26_781;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::builtin_deterministic_instance;

    #[test]
    fn sizes_of_the_deterministic_model() {
        let m = compile(&builtin_deterministic_instance(), &PenaltyWeights::uniform(1.0), None, None).unwrap();
        assert_eq!(m.num_vars, 291);
        assert_eq!(m.stats().num_couplings, REFERENCE_COUPLINGS_DETERMINISTIC);
        assert!(m.quadratic.keys().all(|(i, j)| i < j));
        assert!(m.quadratic.values().all(|c| *c != 0.0));
    }

    #[test]
    fn zero_weights_leave_the_objective() {
        let m = compile(&builtin_deterministic_instance(), &PenaltyWeights::uniform(0.0), None, None).unwrap();
        assert!(m.quadratic.is_empty());
        assert_eq!(m.offset, 0.0);
    }

    #[test]
    fn text_round_trip() {
        let m = compile(&builtin_deterministic_instance(), &PenaltyWeights::reference_preset(), None, None).unwrap();
        let back = QuboModel::from_text(&m.to_text()).unwrap();
        assert!(back.same_polynomial(&m));
    }

    #[test]
    fn text_canonicalizes_reversed_pairs() {
        let m = QuboModel::from_text("qubo 3 1 2 0.5\n0 1.5\n2 1 2\n1 2 0.25\n").unwrap();
        assert_eq!(m.quadratic.get(&(1, 2)), Some(&2.25));
        assert!(matches!(
            QuboModel::from_text("qubo 3 0 2 0\n0 1 1\n0 1 1\n"),
            Err(Error::DuplicateKey(_))
        ));
        let empty = QuboModel::from_text("qubo 0 0 0 0\n").unwrap();
        assert_eq!(empty.to_text(), "qubo 0 0 0 0\n");
    }

    #[test]
    fn weights_json() {
        let w = PenaltyWeights::reference_preset();
        assert_eq!(PenaltyWeights::from_json_str(&w.to_json_string()).unwrap(), w);
        let mut bad = PenaltyWeights::uniform(1.0);
        bad.lambda_ramp = -1.0;
        assert!(bad.validate().is_err());
    }
}
