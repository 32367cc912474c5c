//! Rule base deciding totally real immersions `M^N -> C^N` and embeddings,
//! with a citation trace behind every yes/no.
//!
//! Rules read a flat set of named [`Facts`] and conclude verdict slots. The
//! engine applies every rule until nothing changes; two rules disagreeing on
//! a slot is an engine fault, never a silent override. Each application
//! records exactly the facts it read, so a trace can be replayed in
//! isolation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohomology6::{CohomologyError, SixManifoldInput};
use crate::manifolds::{BlockAtom, InvariantRecord, ManifoldDescriptor, ManifoldError, Node, TriState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecisionError {
    #[error("rule base inconsistency on {slot}: {} says {}, {} says {}", first.rule_id, first.verdict, second.rule_id, second.verdict)]
    Inconsistent { slot: Slot, first: Box<RuleApplication>, second: Box<RuleApplication> },
    #[error("generic immersions are only decided for odd dimensions, got {0}")]
    EvenDimension(u32),
    #[error("normal form needs a 5-manifold, got dimension {0}")]
    NotFiveDimensional(u32),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Cohomology(#[from] CohomologyError),
}

// ---------------------------------------------------------------------------
// Facts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fact {
    Dim,
    Orientable,
    SimplyConnected,
    Euler,
    SemiChar,
    W2Zero,
    P1Zero,
    StablyParallelizable,
    CtmTrivial,
    SphereAtom,
    TwoConnected,
    H3TwoTorsion,
    ProductCapability,
    Immersion,
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactValue {
    Flag(TriState),
    Int(i64),
}

impl fmt::Display for FactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactValue::Flag(t) => write!(f, "{t}"),
            FactValue::Int(n) => write!(f, "{n}"),
        }
    }
}

/// Everything the rules may read. Unknown numbers are `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facts {
    pub dim: Option<u32>,
    pub orientable: TriState,
    pub simply_connected: TriState,
    pub euler: Option<i64>,
    pub semi_char: Option<u8>,
    pub w2_zero: TriState,
    pub p1_zero: TriState,
    pub stably_parallelizable: TriState,
    pub ctm_trivial: TriState,
    /// The descriptor is literally a catalog sphere.
    pub sphere_atom: TriState,
    pub two_connected: TriState,
    pub h3_two_torsion: TriState,
    /// One product factor immerses and the other embeds.
    pub product_capability: TriState,
    pub immersion: TriState,
    pub embedding: TriState,
}

impl Facts {
    pub fn get(&self, fact: Fact) -> Option<FactValue> {
        let flag = |t: TriState| t.is_known().then_some(FactValue::Flag(t));
        match fact {
            Fact::Dim => self.dim.map(|d| FactValue::Int(d as i64)),
            Fact::Euler => self.euler.map(FactValue::Int),
            Fact::SemiChar => self.semi_char.map(|c| FactValue::Int(c as i64)),
            Fact::Orientable => flag(self.orientable),
            Fact::SimplyConnected => flag(self.simply_connected),
            Fact::W2Zero => flag(self.w2_zero),
            Fact::P1Zero => flag(self.p1_zero),
            Fact::StablyParallelizable => flag(self.stably_parallelizable),
            Fact::CtmTrivial => flag(self.ctm_trivial),
            Fact::SphereAtom => flag(self.sphere_atom),
            Fact::TwoConnected => flag(self.two_connected),
            Fact::H3TwoTorsion => flag(self.h3_two_torsion),
            Fact::ProductCapability => flag(self.product_capability),
            Fact::Immersion => flag(self.immersion),
            Fact::Embedding => flag(self.embedding),
        }
    }

    pub fn set(&mut self, fact: Fact, value: FactValue) {
        let tri = |v: FactValue| match v {
            FactValue::Flag(t) => t,
            FactValue::Int(_) => TriState::Unknown,
        };
        let int = |v: FactValue| match v {
            FactValue::Int(n) => Some(n),
            FactValue::Flag(_) => None,
        };
        match fact {
            Fact::Dim => self.dim = int(value).map(|d| d as u32),
            Fact::Euler => self.euler = int(value),
            Fact::SemiChar => self.semi_char = int(value).map(|c| c as u8),
            Fact::Orientable => self.orientable = tri(value),
            Fact::SimplyConnected => self.simply_connected = tri(value),
            Fact::W2Zero => self.w2_zero = tri(value),
            Fact::P1Zero => self.p1_zero = tri(value),
            Fact::StablyParallelizable => self.stably_parallelizable = tri(value),
            Fact::CtmTrivial => self.ctm_trivial = tri(value),
            Fact::SphereAtom => self.sphere_atom = tri(value),
            Fact::TwoConnected => self.two_connected = tri(value),
            Fact::H3TwoTorsion => self.h3_two_torsion = tri(value),
            Fact::ProductCapability => self.product_capability = tri(value),
            Fact::Immersion => self.immersion = tri(value),
            Fact::Embedding => self.embedding = tri(value),
        }
    }

    pub fn clear(&mut self, fact: Fact) {
        match fact {
            Fact::Dim => self.dim = None,
            Fact::Euler => self.euler = None,
            Fact::SemiChar => self.semi_char = None,
            _ => self.set(fact, FactValue::Flag(TriState::Unknown)),
        }
    }

    pub fn from_record(r: &InvariantRecord) -> Self {
        let h2 = r.homology.degree(2);
        let two_connected = match (r.simply_connected, h2) {
            (TriState::No, _) => TriState::No,
            (TriState::Yes, Some(g)) => TriState::from_bool(g.is_trivial()),
            _ => TriState::Unknown,
        };
        // torsion of H^3 is the torsion of H_2
        let h3_two_torsion = match h2 {
            Some(g) if r.dim == 6 => TriState::from_bool(g.has_two_torsion()),
            _ => TriState::Unknown,
        };
        Facts {
            dim: Some(r.dim),
            orientable: r.orientable,
            simply_connected: r.simply_connected,
            euler: r.euler,
            semi_char: r.semi_char_known(),
            w2_zero: r.w2_zero,
            p1_zero: r.p1_zero,
            stably_parallelizable: r.stably_parallelizable,
            ctm_trivial: r.ctm_trivial,
            sphere_atom: TriState::No,
            two_connected,
            h3_two_torsion,
            product_capability: TriState::Unknown,
            immersion: TriState::Unknown,
            embedding: TriState::Unknown,
        }
    }

    fn dim_is(&self, d: u32) -> bool {
        self.dim == Some(d)
    }
}

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Immersion,
    Embedding,
}

impl Slot {
    fn fact(self) -> Fact {
        match self {
            Slot::Immersion => Fact::Immersion,
            Slot::Embedding => Fact::Embedding,
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slot::Immersion => "immersion",
            Slot::Embedding => "embedding",
        })
    }
}

type Conclusions = Vec<(Slot, TriState)>;

pub struct Rule {
    pub id: &'static str,
    pub source: &'static str,
    pub statement: &'static str,
    /// Facts the rule reads; nothing else may influence it.
    pub reads: &'static [Fact],
    pub concludes: &'static [Slot],
    eval: fn(&Facts) -> Conclusions,
}

fn verdict(slot: Slot, b: bool) -> (Slot, TriState) {
    (slot, TriState::from_bool(b))
}

fn r12_sphere(f: &Facts) -> Conclusions {
    match f.dim {
        Some(n) if f.sphere_atom.is_yes() && n > 3 => vec![verdict(Slot::Embedding, false)],
        _ => vec![],
    }
}

fn r11_two_connected_six(f: &Facts) -> Conclusions {
    if !(f.dim_is(6) && f.two_connected.is_yes()) {
        return vec![];
    }
    let mut out = vec![verdict(Slot::Immersion, true)];
    if let Some(chi) = f.euler {
        out.push(verdict(Slot::Embedding, chi == 0));
    }
    out
}

fn r10_six(f: &Facts) -> Conclusions {
    if !(f.dim_is(6) && f.orientable.is_yes() && f.h3_two_torsion.is_no()) {
        return vec![];
    }
    match f.p1_zero {
        TriState::No => vec![verdict(Slot::Immersion, false), verdict(Slot::Embedding, false)],
        TriState::Yes => {
            let mut out = vec![verdict(Slot::Immersion, true)];
            if let Some(chi) = f.euler {
                out.push(verdict(Slot::Embedding, chi == 0));
            }
            out
        }
        TriState::Unknown => vec![],
    }
}

fn r9_five(f: &Facts) -> Conclusions {
    if f.dim_is(5) && f.simply_connected.is_yes() {
        vec![verdict(Slot::Immersion, true)]
    } else {
        vec![]
    }
}

fn r8_four(f: &Facts) -> Conclusions {
    if f.dim_is(4) && f.orientable.is_yes() && f.p1_zero.is_known() {
        vec![verdict(Slot::Immersion, f.p1_zero.is_yes())]
    } else {
        vec![]
    }
}

fn r7_three(f: &Facts) -> Conclusions {
    if f.dim_is(3) && f.orientable.is_yes() {
        vec![verdict(Slot::Immersion, true), verdict(Slot::Embedding, true)]
    } else {
        vec![]
    }
}

fn r6_surface(f: &Facts) -> Conclusions {
    if !(f.dim_is(2) && f.orientable.is_yes()) {
        return vec![];
    }
    let mut out = vec![verdict(Slot::Immersion, true)];
    if let Some(chi) = f.euler {
        out.push(verdict(Slot::Embedding, chi == 0));
    }
    out
}

fn r5_circle(f: &Facts) -> Conclusions {
    if f.dim_is(1) {
        vec![verdict(Slot::Immersion, true), verdict(Slot::Embedding, true)]
    } else {
        vec![]
    }
}

fn r13_product(f: &Facts) -> Conclusions {
    if f.product_capability.is_yes() {
        vec![verdict(Slot::Embedding, true)]
    } else {
        vec![]
    }
}

fn r2_stably_parallelizable(f: &Facts) -> Conclusions {
    if f.stably_parallelizable.is_yes() {
        vec![verdict(Slot::Immersion, true)]
    } else {
        vec![]
    }
}

fn r1_complexified_tangent(f: &Facts) -> Conclusions {
    if f.ctm_trivial.is_known() {
        vec![verdict(Slot::Immersion, f.ctm_trivial.is_yes())]
    } else {
        vec![]
    }
}

fn r3_even(f: &Facts) -> Conclusions {
    match (f.dim, f.euler) {
        (Some(n), Some(chi)) if n % 2 == 0 && f.orientable.is_yes() && f.immersion.is_yes() => {
            vec![verdict(Slot::Embedding, chi == 0)]
        }
        _ => vec![],
    }
}

fn r4_one_mod_four(f: &Facts) -> Conclusions {
    match (f.dim, f.semi_char) {
        (Some(n), Some(c)) if n >= 5 && n % 4 == 1 && f.orientable.is_yes() && f.immersion.is_yes() => {
            vec![verdict(Slot::Embedding, c == 0)]
        }
        _ => vec![],
    }
}

fn def_embedding_is_immersion(f: &Facts) -> Conclusions {
    if f.embedding.is_yes() {
        vec![verdict(Slot::Immersion, true)]
    } else {
        vec![]
    }
}

fn def_no_immersion_no_embedding(f: &Facts) -> Conclusions {
    if f.immersion.is_no() {
        vec![verdict(Slot::Embedding, false)]
    } else {
        vec![]
    }
}

/// The rule base, in firing priority: structure-specific rules first.
pub static RULES: &[Rule] = &[
    Rule {
        id: "R12",
        source: "Gromov; Stout-Zame",
        statement: "no sphere S^N with N > 3 has a totally real embedding into C^N",
        reads: &[Fact::Dim, Fact::SphereAtom],
        concludes: &[Slot::Embedding],
        eval: r12_sphere,
    },
    Rule {
        id: "R11",
        source: "Smale, classification of 2-connected 6-manifolds",
        statement: "a closed 2-connected 6-manifold is S^6 or n(S^3 x S^3), hence stably parallelizable; \
                    it embeds totally really only when it is S^3 x S^3, i.e. chi = 0",
        reads: &[Fact::Dim, Fact::TwoConnected, Fact::Euler],
        concludes: &[Slot::Immersion, Slot::Embedding],
        eval: r11_two_connected_six,
    },
    Rule {
        id: "R10",
        source: "Wall; Okonek-Van de Ven; Peterson",
        statement: "a closed orientable 6-manifold without 2-torsion in H^3 is almost complex, so c_1 and c_3 \
                    of its complexified tangent bundle cancel; a rank >= 3 bundle over it is trivial iff its \
                    Chern classes vanish. It immerses iff p_1 = 0 and embeds iff p_1 = 0 = chi",
        reads: &[Fact::Dim, Fact::Orientable, Fact::H3TwoTorsion, Fact::P1Zero, Fact::Euler],
        concludes: &[Slot::Immersion, Slot::Embedding],
        eval: r10_six,
    },
    Rule {
        id: "R9",
        source: "Barden-Smale classification; closure under connected sums",
        statement: "every closed simply connected 5-manifold is a connected sum of blocks with trivial \
                    complexified tangent bundle and so has a totally real immersion into C^5",
        reads: &[Fact::Dim, Fact::SimplyConnected],
        concludes: &[Slot::Immersion],
        eval: r9_five,
    },
    Rule {
        id: "R8",
        source: "Jacobowitz-Landweber",
        statement: "a closed orientable 4-manifold has a totally real immersion into C^4 iff p_1 = 0",
        reads: &[Fact::Dim, Fact::Orientable, Fact::P1Zero],
        concludes: &[Slot::Immersion],
        eval: r8_four,
    },
    Rule {
        id: "R7",
        source: "Forstneric; Ahern-Rudin",
        statement: "every closed orientable 3-manifold has a totally real embedding into C^3",
        reads: &[Fact::Dim, Fact::Orientable],
        concludes: &[Slot::Immersion, Slot::Embedding],
        eval: r7_three,
    },
    Rule {
        id: "R6",
        source: "classical, surfaces",
        statement: "closed orientable surfaces immerse totally really into C^2; the torus (chi = 0) is the only \
                    one that embeds",
        reads: &[Fact::Dim, Fact::Orientable, Fact::Euler],
        concludes: &[Slot::Immersion, Slot::Embedding],
        eval: r6_surface,
    },
    Rule {
        id: "R5",
        source: "classical, circle",
        statement: "the circle has a totally real embedding into C",
        reads: &[Fact::Dim],
        concludes: &[Slot::Immersion, Slot::Embedding],
        eval: r5_circle,
    },
    Rule {
        id: "R13",
        source: "Audin, products",
        statement: "if X has a totally real immersion and Y a totally real embedding, X x Y has a totally real \
                    embedding",
        reads: &[Fact::ProductCapability],
        concludes: &[Slot::Embedding],
        eval: r13_product,
    },
    Rule {
        id: "R2",
        source: "Jacobowitz-Landweber lemma with Wells-Gromov",
        statement: "a stably parallelizable manifold has trivial complexified tangent bundle and therefore a \
                    totally real immersion",
        reads: &[Fact::StablyParallelizable],
        concludes: &[Slot::Immersion],
        eval: r2_stably_parallelizable,
    },
    Rule {
        id: "R1",
        source: "Wells; Gromov",
        statement: "M^N has a totally real immersion into C^N iff its complexified tangent bundle is trivial",
        reads: &[Fact::CtmTrivial],
        concludes: &[Slot::Immersion],
        eval: r1_complexified_tangent,
    },
    Rule {
        id: "R3",
        source: "Audin, even dimensions",
        statement: "a closed connected orientable manifold of even dimension with a totally real immersion has a \
                    totally real embedding iff chi = 0",
        reads: &[Fact::Dim, Fact::Orientable, Fact::Immersion, Fact::Euler],
        concludes: &[Slot::Embedding],
        eval: r3_even,
    },
    Rule {
        id: "R4",
        source: "Audin, dimensions 4k+1",
        statement: "a closed connected orientable manifold of dimension 4k+1 (k >= 1) with a totally real \
                    immersion has a totally real embedding iff its Kervaire semi-characteristic vanishes",
        reads: &[Fact::Dim, Fact::Orientable, Fact::Immersion, Fact::SemiChar],
        concludes: &[Slot::Embedding],
        eval: r4_one_mod_four,
    },
    Rule {
        id: "D1",
        source: "definition",
        statement: "a totally real embedding is in particular a totally real immersion",
        reads: &[Fact::Embedding],
        concludes: &[Slot::Immersion],
        eval: def_embedding_is_immersion,
    },
    Rule {
        id: "D2",
        source: "definition",
        statement: "without a totally real immersion there is no totally real embedding",
        reads: &[Fact::Immersion],
        concludes: &[Slot::Embedding],
        eval: def_no_immersion_no_embedding,
    },
];

pub fn rule(id: &str) -> Option<&'static Rule> {
    RULES.iter().find(|r| r.id == id)
}

/// Serializable view of the rule catalog.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RuleInfo {
    pub rule_id: String,
    pub source: String,
    pub statement: String,
    pub reads: Vec<Fact>,
    pub concludes: Vec<Slot>,
}

pub fn rule_catalog() -> Vec<RuleInfo> {
    RULES
        .iter()
        .map(|r| RuleInfo {
            rule_id: r.id.to_string(),
            source: r.source.to_string(),
            statement: r.statement.to_string(),
            reads: r.reads.to_vec(),
            concludes: r.concludes.to_vec(),
        })
        .collect()
}

/// One firing of a rule: the facts it read and what it concluded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleApplication {
    pub rule_id: String,
    pub source: String,
    pub statement: String,
    pub inputs: BTreeMap<Fact, FactValue>,
    pub slot: Slot,
    pub verdict: TriState,
}

impl RuleApplication {
    fn new(rule: &Rule, facts: &Facts, slot: Slot, verdict: TriState) -> Self {
        let inputs = rule.reads.iter().filter_map(|&f| facts.get(f).map(|v| (f, v))).collect();
        Self {
            rule_id: rule.id.to_string(),
            source: rule.source.to_string(),
            statement: rule.statement.to_string(),
            inputs,
            slot,
            verdict,
        }
    }

    /// Re-runs the cited rule on the recorded inputs alone.
    pub fn replay(&self) -> Option<TriState> {
        let rule = rule(&self.rule_id)?;
        let mut facts = Facts::default();
        for (&f, &v) in &self.inputs {
            facts.set(f, v);
        }
        (rule.eval)(&facts).into_iter().find(|(s, _)| *s == self.slot).map(|(_, v)| v)
    }
}

/// Immersion and embedding verdicts with the rule chains behind them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub immersion: TriState,
    pub embedding: TriState,
    pub immersion_trace: Vec<RuleApplication>,
    pub embedding_trace: Vec<RuleApplication>,
}

impl Decision {
    pub fn trace(&self, slot: Slot) -> &[RuleApplication] {
        match slot {
            Slot::Immersion => &self.immersion_trace,
            Slot::Embedding => &self.embedding_trace,
        }
    }

    pub fn verdict(&self, slot: Slot) -> TriState {
        match slot {
            Slot::Immersion => self.immersion,
            Slot::Embedding => self.embedding,
        }
    }
}

/// Runs the rule base to a fixed point.
pub fn decide_facts(initial: &Facts) -> Result<Decision, DecisionError> {
    let mut facts = initial.clone();
    facts.immersion = TriState::Unknown;
    facts.embedding = TriState::Unknown;
    let mut deciding: BTreeMap<u8, RuleApplication> = BTreeMap::new();
    let key = |s: Slot| s as u8;

    loop {
        let mut changed = false;
        for rule in RULES {
            for (slot, v) in (rule.eval)(&facts) {
                let app = RuleApplication::new(rule, &facts, slot, v);
                match deciding.get(&key(slot)) {
                    None => {
                        facts.set(slot.fact(), FactValue::Flag(v));
                        deciding.insert(key(slot), app);
                        changed = true;
                    }
                    Some(first) if first.verdict != v => {
                        return Err(DecisionError::Inconsistent {
                            slot,
                            first: Box::new(first.clone()),
                            second: Box::new(app),
                        });
                    }
                    Some(_) => {}
                }
            }
        }
        if !changed {
            break;
        }
    }

    let trace_of = |slot: Slot| -> Vec<RuleApplication> {
        let mut out: Vec<RuleApplication> = Vec::new();
        let mut pending = vec![slot];
        while let Some(s) = pending.pop() {
            if let Some(app) = deciding.get(&key(s)) {
                if out.iter().any(|a| a.slot == s) {
                    continue;
                }
                out.insert(0, app.clone());
                for f in app.inputs.keys() {
                    match f {
                        Fact::Immersion => pending.push(Slot::Immersion),
                        Fact::Embedding => pending.push(Slot::Embedding),
                        _ => {}
                    }
                }
            }
        }
        out
    };

    Ok(Decision {
        immersion: facts.immersion,
        embedding: facts.embedding,
        immersion_trace: trace_of(Slot::Immersion),
        embedding_trace: trace_of(Slot::Embedding),
    })
}

/// Facts about a descriptor, including structure the record does not hold.
pub fn facts_for(d: &ManifoldDescriptor) -> Result<Facts, DecisionError> {
    let mut facts = Facts::from_record(d.record());
    match d.node() {
        Node::Atom(BlockAtom::Sphere { .. }) => facts.sphere_atom = TriState::Yes,
        // a torus is a circle times a lower torus
        Node::Atom(BlockAtom::Torus { n }) if *n >= 2 => facts.product_capability = TriState::Yes,
        Node::Product { left, right } => {
            let l = decide(left)?;
            let r = decide(right)?;
            let capable = (l.immersion.is_yes() && r.embedding.is_yes()) || (l.embedding.is_yes() && r.immersion.is_yes());
            if capable {
                facts.product_capability = TriState::Yes;
            }
        }
        _ => {}
    }
    Ok(facts)
}

pub fn decide(d: &ManifoldDescriptor) -> Result<Decision, DecisionError> {
    decide_facts(&facts_for(d)?)
}

/// Facts for a 6-manifold given by its cohomology ring and Chern data.
pub fn facts_for_six(input: &SixManifoldInput) -> Result<Facts, DecisionError> {
    Ok(Facts {
        dim: Some(6),
        orientable: TriState::Yes,
        euler: input.euler,
        p1_zero: input.p1_zero()?,
        h3_two_torsion: TriState::from_bool(input.ring.h3_has_2torsion),
        sphere_atom: TriState::No,
        ..Facts::default()
    })
}

pub fn decide_six(input: &SixManifoldInput) -> Result<Decision, DecisionError> {
    decide_facts(&facts_for_six(input)?)
}

/// Generic immersion of an odd-dimensional manifold as a real hypersurface
/// of `C^{(dim+1)/2}`.
pub fn decide_generic(d: &ManifoldDescriptor) -> Result<TriState, DecisionError> {
    let r = d.record();
    if r.dim % 2 == 0 {
        return Err(DecisionError::EvenDimension(r.dim));
    }
    // hypersurfaces are automatically generic; Hirsch gives the immersion
    if r.stably_parallelizable.is_yes() {
        return Ok(TriState::Yes);
    }
    if r.dim == 5 && r.simply_connected.is_yes() {
        return Ok(r.w2_zero);
    }
    Ok(TriState::Unknown)
}

// ---------------------------------------------------------------------------
// Normal form of simply connected 5-manifolds
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "block", rename_all = "snake_case")]
pub enum Block5 {
    #[serde(rename = "s2xs3")]
    S2xS3,
    #[serde(rename = "s3tws2")]
    TwistedS3S2,
    Wu,
    Mpk { p: u32, k: u32 },
    Xk { k: u32 },
}

impl Block5 {
    fn expression(&self) -> String {
        match *self {
            Block5::S2xS3 => "(S2 x S3)".to_string(),
            Block5::TwistedS3S2 => "s3tws2".to_string(),
            Block5::Wu => "wu".to_string(),
            Block5::Mpk { p, k } => format!("m({p},{k})"),
            Block5::Xk { k } => format!("xk({k})"),
        }
    }

    fn descriptor(&self) -> Result<ManifoldDescriptor, ManifoldError> {
        let atom = |a| ManifoldDescriptor::atom(a);
        match *self {
            Block5::S2xS3 => ManifoldDescriptor::product(&ManifoldDescriptor::sphere(2)?, &ManifoldDescriptor::sphere(3)?),
            Block5::TwistedS3S2 => atom(BlockAtom::TwistedS3S2),
            Block5::Wu => atom(BlockAtom::Wu),
            Block5::Mpk { p, k } => atom(BlockAtom::Mpk { p, k }),
            Block5::Xk { k } => atom(BlockAtom::Xk { k }),
        }
    }
}

/// Canonical connected-sum decomposition into the 5-dimensional blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BardenNormalForm {
    /// Blocks with multiplicities, sorted, twisted summand excluded.
    pub blocks: Vec<(Block5, usize)>,
    /// 1 when the twisted bundle occurs as a summand.
    pub delta: u8,
    /// Set when some summand is not a recognized block.
    pub residual: bool,
    pub semi_char: Option<u8>,
    pub embedding: TriState,
    /// Spin case: `S5 # ... ` expression over `S2 x S3` and `m(p,k)` blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prototype: Option<String>,
}

fn classify(d: &ManifoldDescriptor) -> Option<Option<Block5>> {
    match d.node() {
        Node::Atom(BlockAtom::Sphere { n: 5 }) => Some(None),
        Node::Atom(BlockAtom::Wu) => Some(Some(Block5::Wu)),
        Node::Atom(BlockAtom::TwistedS3S2) => Some(Some(Block5::TwistedS3S2)),
        Node::Atom(BlockAtom::Mpk { p, k }) => Some(Some(Block5::Mpk { p: *p, k: *k })),
        Node::Atom(BlockAtom::Xk { k }) => Some(Some(Block5::Xk { k: *k })),
        Node::Product { left, right } => match (left.as_atom(), right.as_atom()) {
            (Some(BlockAtom::Sphere { n: 2 }), Some(BlockAtom::Sphere { n: 3 }))
            | (Some(BlockAtom::Sphere { n: 3 }), Some(BlockAtom::Sphere { n: 2 })) => Some(Some(Block5::S2xS3)),
            _ => None,
        },
        _ => None,
    }
}

fn collect_summands(d: &ManifoldDescriptor, out: &mut Vec<Option<Block5>>, residual: &mut bool) {
    match d.node() {
        Node::ConnectedSum { left, right, .. } => {
            collect_summands(left, out, residual);
            collect_summands(right, out, residual);
        }
        Node::Reversed(inner) => collect_summands(inner, out, residual),
        _ => match classify(d) {
            Some(b) => out.push(b),
            None => *residual = true,
        },
    }
}

impl BardenNormalForm {
    /// Connected sum rebuilt from the normal form (`S5` when empty).
    pub fn reconstruct(&self) -> Result<ManifoldDescriptor, ManifoldError> {
        let mut acc = ManifoldDescriptor::sphere(5)?;
        let mut first = true;
        let mut push = |acc: &mut ManifoldDescriptor, d: ManifoldDescriptor| -> Result<(), ManifoldError> {
            *acc = if first { d } else { ManifoldDescriptor::connected_sum(acc, &d, false)? };
            first = false;
            Ok(())
        };
        if self.delta == 1 {
            push(&mut acc, Block5::TwistedS3S2.descriptor()?)?;
        }
        for (block, n) in &self.blocks {
            let d = block.descriptor()?;
            for _ in 0..*n {
                push(&mut acc, d.clone())?;
            }
        }
        Ok(acc)
    }
}

pub fn barden_normal_form(d: &ManifoldDescriptor) -> Result<BardenNormalForm, DecisionError> {
    if d.dim() != 5 {
        return Err(DecisionError::NotFiveDimensional(d.dim()));
    }
    let mut summands = Vec::new();
    let mut residual = false;
    collect_summands(d, &mut summands, &mut residual);

    let mut counts: BTreeMap<Block5, usize> = BTreeMap::new();
    for b in summands.into_iter().flatten() {
        *counts.entry(b).or_default() += 1;
    }
    // two twisted summands are a twisted summand plus S^2 x S^3
    let twisted = counts.remove(&Block5::TwistedS3S2).unwrap_or(0);
    let delta = u8::from(twisted > 0);
    if twisted > 1 {
        *counts.entry(Block5::S2xS3).or_default() += twisted - 1;
    }
    let blocks: Vec<(Block5, usize)> = counts.into_iter().collect();

    let mut form = BardenNormalForm { blocks, delta, residual, semi_char: None, embedding: TriState::Unknown, prototype: None };
    if residual {
        form.semi_char = d.record().semi_char;
        form.embedding = decide(d)?.embedding;
        return Ok(form);
    }
    let rebuilt = form.reconstruct()?;
    form.semi_char = rebuilt.record().semi_char;
    // every such manifold immerses; it embeds iff the semi-characteristic vanishes
    form.embedding = form.semi_char.map_or(TriState::Unknown, |c| TriState::from_bool(c == 0));
    let spin = delta == 0 && form.blocks.iter().all(|(b, _)| matches!(b, Block5::S2xS3 | Block5::Mpk { .. }));
    if spin {
        let mut terms = vec!["S5".to_string()];
        terms.extend(form.blocks.iter().map(|(b, n)| format!("{n}*{}", b.expression())));
        form.prototype = Some(terms.join(" # "));
    }
    Ok(form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::Framing;

    fn s(n: u32) -> ManifoldDescriptor {
        ManifoldDescriptor::sphere(n).unwrap()
    }

    fn atom(a: BlockAtom) -> ManifoldDescriptor {
        ManifoldDescriptor::atom(a).unwrap()
    }

    fn s2s3() -> ManifoldDescriptor {
        ManifoldDescriptor::product(&s(2), &s(3)).unwrap()
    }

    #[test]
    fn wu_embeds() {
        let d = decide(&atom(BlockAtom::Wu)).unwrap();
        assert_eq!((d.immersion, d.embedding), (TriState::Yes, TriState::Yes));
        assert_eq!(d.embedding_trace.last().unwrap().rule_id, "R4");
    }

    #[test]
    fn seven_sphere() {
        let d = decide(&s(7)).unwrap();
        assert_eq!(d.immersion, TriState::Yes);
        assert_eq!(d.embedding, TriState::No);
        assert_eq!(d.embedding_trace.last().unwrap().rule_id, "R12");
        assert!(d.immersion_trace.iter().any(|a| a.rule_id == "R2"));
    }

    #[test]
    fn twisted_plus_two() {
        let tw = atom(BlockAtom::TwistedS3S2);
        let d = ManifoldDescriptor::connected_sum(&tw, &ManifoldDescriptor::connected_sum_copies(&s2s3(), 2).unwrap(), false).unwrap();
        assert_eq!(decide(&d).unwrap().embedding, TriState::Yes);
    }

    #[test]
    fn circle_does_not_use_semi_characteristic() {
        let d = decide(&s(1)).unwrap();
        assert_eq!(d.embedding, TriState::Yes);
    }

    #[test]
    fn traces_replay() {
        for d in [s(5), s(6), atom(BlockAtom::Wu), s2s3(), atom(BlockAtom::Cp2Cp2Bar), atom(BlockAtom::Torus { n: 7 })] {
            let dec = decide(&d).unwrap();
            for app in dec.immersion_trace.iter().chain(&dec.embedding_trace) {
                assert_eq!(app.replay(), Some(app.verdict), "{}", app.rule_id);
            }
        }
    }

    #[test]
    fn inconsistency_is_reported() {
        // fabricated contradictory facts: a 3-dimensional sphere flagged non-immersible
        let facts = Facts { dim: Some(3), orientable: TriState::Yes, ctm_trivial: TriState::No, ..Facts::default() };
        let err = decide_facts(&facts).unwrap_err();
        assert!(matches!(err, DecisionError::Inconsistent { slot: Slot::Immersion, .. }));
    }

    #[test]
    fn generic_immersions() {
        assert_eq!(decide_generic(&atom(BlockAtom::Mpk { p: 5, k: 1 })).unwrap(), TriState::Yes);
        assert_eq!(decide_generic(&atom(BlockAtom::Wu)).unwrap(), TriState::No);
        assert_eq!(decide_generic(&s(4)).unwrap_err(), DecisionError::EvenDimension(4));
        let torus_bundle = ManifoldDescriptor::torus_bundle_total(&atom(BlockAtom::Cp2Cp2Bar), 1).unwrap();
        assert_eq!(decide_generic(&torus_bundle).unwrap(), TriState::Unknown);
    }

    #[test]
    fn normal_form_examples() {
        let three = ManifoldDescriptor::connected_sum_copies(&s2s3(), 3).unwrap();
        let nf = barden_normal_form(&three).unwrap();
        assert_eq!(nf.blocks, vec![(Block5::S2xS3, 3)]);
        assert_eq!(nf.embedding, TriState::Yes);
        assert_eq!(nf.prototype.as_deref(), Some("S5 # 3*(S2 x S3)"));

        let nf = barden_normal_form(&s(5)).unwrap();
        assert!(nf.blocks.is_empty());
        assert_eq!(nf.embedding, TriState::No);

        let tw = atom(BlockAtom::TwistedS3S2);
        let two_tw = ManifoldDescriptor::connected_sum(&tw, &tw, true).unwrap();
        let nf = barden_normal_form(&two_tw).unwrap();
        assert_eq!((nf.delta, nf.blocks.clone()), (1, vec![(Block5::S2xS3, 1)]));
        assert_eq!(nf.prototype, None);

        assert_eq!(barden_normal_form(&s(4)).unwrap_err(), DecisionError::NotFiveDimensional(4));
        let odd = ManifoldDescriptor::surgery(&s(5), 1, Framing::Canonical, None).unwrap();
        assert!(barden_normal_form(&odd).unwrap().residual);
    }
}
