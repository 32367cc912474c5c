//! Closure constructions and the pipeline realizing a finitely presented
//! group as the fundamental group of a manifold with a totally real
//! embedding.
//!
//! Every realization comes with a certificate: an ordered list of
//! construction steps, each referring to earlier steps by index, that
//! rebuilds the returned descriptor from catalog atoms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abelian::{GroupPresentation, MAX_GENERATORS};
use crate::decisions::{decide, DecisionError};
use crate::manifolds::{BlockAtom, Framing, ManifoldDescriptor, ManifoldError, TriState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstructionError {
    #[error("{operation} needs dimension at least {min}, got {got}")]
    DimensionTooSmall { operation: &'static str, min: u32, got: u32 },
    #[error("presentation has {0} generators; at most {MAX_GENERATORS} are tracked")]
    TooManyGenerators(usize),
    #[error("certificate step {step} refers to step {target}, which is not earlier")]
    BadReference { step: usize, target: usize },
    #[error("certificate has no steps")]
    EmptyCertificate,
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

pub fn connected_sum(
    a: &ManifoldDescriptor,
    b: &ManifoldDescriptor,
    reverse_second: bool,
) -> Result<ManifoldDescriptor, ConstructionError> {
    Ok(ManifoldDescriptor::connected_sum(a, b, reverse_second)?)
}

pub fn surgery(
    d: &ManifoldDescriptor,
    index: u32,
    framing: Framing,
    sphere: Option<String>,
) -> Result<ManifoldDescriptor, ConstructionError> {
    Ok(ManifoldDescriptor::surgery(d, index, framing, sphere)?)
}

pub fn product(a: &ManifoldDescriptor, b: &ManifoldDescriptor) -> Result<ManifoldDescriptor, ConstructionError> {
    Ok(ManifoldDescriptor::product(a, b)?)
}

pub fn torus_bundle_total(base: &ManifoldDescriptor, k: u32) -> Result<ManifoldDescriptor, ConstructionError> {
    Ok(ManifoldDescriptor::torus_bundle_total(base, k)?)
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "operation", content = "arguments", rename_all = "snake_case")]
pub enum Operation {
    Atom(BlockAtom),
    ConnectedSum { left: usize, right: usize, reverse_second: bool },
    Product { left: usize, right: usize },
    Surgery { base: usize, index: u32, framing: Framing, sphere: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    #[serde(flatten)]
    pub operation: Operation,
    pub citation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Plain realization, no embedding normalization.
    Realization,
    /// Connected sums with sphere products until the Euler characteristic vanishes.
    EulerNormalization,
    /// Product with spheres, embedding by the product rule.
    Product,
    /// Two candidates, exactly one with vanishing semi-characteristic.
    TwoBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Immersion,
    Embedding,
}

/// `left x right` embeds because `left` immerses and `right` embeds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductLink {
    pub step: usize,
    pub left: usize,
    pub left_capability: Capability,
    pub right: usize,
    pub right_capability: Capability,
    pub conclusion: Capability,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchNote {
    /// Step indices of the two candidates: the base and the base summed with `S2 x S^{N-2}`.
    pub branches: [usize; 2],
    pub semi_chars: [Option<u8>; 2],
    /// Index into `branches` of the candidate with vanishing semi-characteristic, when computable.
    pub chosen: Option<usize>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizationCertificate {
    pub presentation: GroupPresentation,
    pub dim: u32,
    pub strategy: Strategy,
    pub steps: Vec<Step>,
    /// Step producing the returned descriptor.
    pub output: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub product_chain: Vec<ProductLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_note: Option<BranchNote>,
}

const CITE_ATOM: &str = "catalog building block";
const CITE_HANDLES: &str = "connected sums of S^1 x S^{N-1} realize the free group (Dehn)";
const CITE_RELATOR: &str = "canonically framed surgery along a circle representing a relator kills it (Kervaire-Milnor); \
                            framed low-index surgery keeps the complexified tangent bundle trivial";
const CITE_PRODUCT: &str = "products of manifolds with trivial complexified tangent bundle keep it trivial";
const CITE_PRODUCT_EMBEDDING: &str = "immersion times embedding gives an embedding (Audin, products)";
const CITE_EULER: &str = "each summand S^2 x S^{N-2} adds 2 to chi, each S^3 x S^{N-3} subtracts 2";
const CITE_BRANCH: &str = "summing with S^2 x S^3 flips the semi-characteristic, so exactly one candidate has it zero";

/// Records steps while building the descriptor.
struct Builder {
    steps: Vec<Step>,
    built: Vec<ManifoldDescriptor>,
}

impl Builder {
    fn new() -> Self {
        Self { steps: Vec::new(), built: Vec::new() }
    }

    fn push(&mut self, operation: Operation, citation: &str) -> Result<usize, ConstructionError> {
        let d = apply(&operation, &self.built, self.steps.len())?;
        self.steps.push(Step { operation, citation: citation.to_string() });
        self.built.push(d);
        Ok(self.built.len() - 1)
    }

    fn atom(&mut self, atom: BlockAtom) -> Result<usize, ConstructionError> {
        self.push(Operation::Atom(atom), CITE_ATOM)
    }

    fn sphere_product(&mut self, p: u32, q: u32) -> Result<usize, ConstructionError> {
        let left = self.atom(BlockAtom::Sphere { n: p })?;
        let right = self.atom(BlockAtom::Sphere { n: q })?;
        self.push(Operation::Product { left, right }, CITE_PRODUCT)
    }
}

fn apply(op: &Operation, built: &[ManifoldDescriptor], step: usize) -> Result<ManifoldDescriptor, ConstructionError> {
    let get = |target: usize| built.get(target).filter(|_| target < step).ok_or(ConstructionError::BadReference { step, target });
    Ok(match op {
        Operation::Atom(a) => ManifoldDescriptor::atom(*a)?,
        Operation::ConnectedSum { left, right, reverse_second } => {
            ManifoldDescriptor::connected_sum(get(*left)?, get(*right)?, *reverse_second)?
        }
        Operation::Product { left, right } => ManifoldDescriptor::product(get(*left)?, get(*right)?)?,
        Operation::Surgery { base, index, framing, sphere } => {
            ManifoldDescriptor::surgery(get(*base)?, *index, *framing, sphere.clone())?
        }
    })
}

impl RealizationCertificate {
    /// Rebuilds every step from atoms; returns the output descriptor.
    pub fn replay(&self) -> Result<ManifoldDescriptor, ConstructionError> {
        self.replay_all()?.into_iter().nth(self.output).ok_or(ConstructionError::EmptyCertificate)
    }

    pub fn replay_all(&self) -> Result<Vec<ManifoldDescriptor>, ConstructionError> {
        let mut built = Vec::with_capacity(self.steps.len());
        for (i, step) in self.steps.iter().enumerate() {
            built.push(apply(&step.operation, &built, i)?);
        }
        Ok(built)
    }

    /// Re-derives every link of the product chain with the decision engine.
    pub fn check_product_chain(&self) -> Result<bool, ConstructionError> {
        if self.product_chain.is_empty() {
            return Ok(false);
        }
        let built = self.replay_all()?;
        let has = |i: usize, cap: Capability| -> Result<bool, ConstructionError> {
            let d = decide(&built[i])?;
            Ok(match cap {
                Capability::Immersion => d.immersion.is_yes(),
                Capability::Embedding => d.embedding.is_yes(),
            })
        };
        for link in &self.product_chain {
            let shape_ok = matches!(
                self.steps.get(link.step).map(|s| &s.operation),
                Some(Operation::Product { left, right }) if *left == link.left && *right == link.right
            );
            let ok = shape_ok
                && link.conclusion == Capability::Embedding
                && link.left_capability == Capability::Immersion
                && link.right_capability == Capability::Embedding
                && has(link.left, Capability::Immersion)?
                && has(link.right, Capability::Embedding)?
                && has(link.step, Capability::Embedding)?;
            if !ok {
                return Ok(false);
            }
        }
        Ok(self.product_chain.last().is_some_and(|l| l.step == self.output))
    }
}

// ---------------------------------------------------------------------------
// Realization
// ---------------------------------------------------------------------------

fn realize_into(b: &mut Builder, p: &GroupPresentation, n: u32) -> Result<usize, ConstructionError> {
    if n < 4 {
        return Err(ConstructionError::DimensionTooSmall { operation: "realization", min: 4, got: n });
    }
    let g = p.generator_count();
    if g > MAX_GENERATORS {
        return Err(ConstructionError::TooManyGenerators(g));
    }
    let mut current = if g == 0 {
        b.atom(BlockAtom::Sphere { n })?
    } else {
        let handle = b.sphere_product(1, n - 1)?;
        let mut acc = handle;
        for _ in 1..g {
            acc = b.push(Operation::ConnectedSum { left: acc, right: handle, reverse_second: false }, CITE_HANDLES)?;
        }
        acc
    };
    let names = p.canonical_names();
    for word in p.relators() {
        let label = names.word_text(word);
        current = b.push(
            Operation::Surgery { base: current, index: 1, framing: Framing::Canonical, sphere: Some(label) },
            CITE_RELATOR,
        )?;
    }
    Ok(current)
}

fn finish(
    b: Builder,
    p: &GroupPresentation,
    n: u32,
    strategy: Strategy,
    output: usize,
) -> (ManifoldDescriptor, RealizationCertificate) {
    let d = b.built[output].clone();
    let cert = RealizationCertificate {
        presentation: p.canonical_names(),
        dim: n,
        strategy,
        steps: b.steps,
        output,
        product_chain: Vec::new(),
        branch_note: None,
    };
    (d, cert)
}

/// `g` handles `S^1 x S^{N-1}` summed together, then one canonically framed
/// circle surgery per relator. The fundamental group is `p` with generators
/// renamed `a`, `b`, ... by position.
pub fn realize_group(
    p: &GroupPresentation,
    n: u32,
) -> Result<(ManifoldDescriptor, RealizationCertificate), ConstructionError> {
    let mut b = Builder::new();
    let out = realize_into(&mut b, p, n)?;
    Ok(finish(b, p, n, Strategy::Realization, out))
}

/// Splits `n - 4 = 2a + 3b` with `b >= 1`, smallest `b`.
fn product_split(n: u32) -> Option<(u32, u32)> {
    let rest = n.checked_sub(4)?;
    (1..=2).find(|&b| rest >= 3 * b && (rest - 3 * b) % 2 == 0).map(|b| ((rest - 3 * b) / 2, b))
}

/// A manifold with fundamental group `p` and a totally real embedding into
/// `C^N` (or, for `N = 5`, two candidates of which exactly one has one).
pub fn normalize_for_embedding(
    p: &GroupPresentation,
    n: u32,
) -> Result<(ManifoldDescriptor, RealizationCertificate), ConstructionError> {
    if n < 5 {
        return Err(ConstructionError::DimensionTooSmall { operation: "embedding normalization", min: 5, got: n });
    }
    if n == 5 {
        return two_branch(p);
    }
    if let Some((a, c)) = product_split(n) {
        return product_certificate(p, n, a, c);
    }
    euler_normalization(p, n)
}

fn euler_normalization(
    p: &GroupPresentation,
    n: u32,
) -> Result<(ManifoldDescriptor, RealizationCertificate), ConstructionError> {
    let mut b = Builder::new();
    let mut current = realize_into(&mut b, p, n)?;
    let chi = b.built[current].record().euler.expect("realizations have a known Euler characteristic");
    debug_assert!(chi % 2 == 0);
    if chi != 0 {
        let summand = if chi > 0 { b.sphere_product(3, n - 3)? } else { b.sphere_product(2, n - 2)? };
        for _ in 0..chi.unsigned_abs() / 2 {
            current = b.push(Operation::ConnectedSum { left: current, right: summand, reverse_second: false }, CITE_EULER)?;
        }
    }
    Ok(finish(b, p, n, Strategy::EulerNormalization, current))
}

fn product_certificate(
    p: &GroupPresentation,
    n: u32,
    twos: u32,
    threes: u32,
) -> Result<(ManifoldDescriptor, RealizationCertificate), ConstructionError> {
    let mut b = Builder::new();
    let mut current = realize_into(&mut b, p, 4)?;
    if twos > 0 {
        let s2 = b.atom(BlockAtom::Sphere { n: 2 })?;
        for _ in 0..twos {
            current = b.push(Operation::Product { left: current, right: s2 }, CITE_PRODUCT)?;
        }
    }
    let s3 = b.atom(BlockAtom::Sphere { n: 3 })?;
    let mut chain = Vec::new();
    for _ in 0..threes {
        let step = b.push(Operation::Product { left: current, right: s3 }, CITE_PRODUCT_EMBEDDING)?;
        chain.push(ProductLink {
            step,
            left: current,
            left_capability: Capability::Immersion,
            right: s3,
            right_capability: Capability::Embedding,
            conclusion: Capability::Embedding,
        });
        current = step;
    }
    let (d, mut cert) = finish(b, p, n, Strategy::Product, current);
    cert.product_chain = chain;
    Ok((d, cert))
}

fn two_branch(p: &GroupPresentation) -> Result<(ManifoldDescriptor, RealizationCertificate), ConstructionError> {
    let mut b = Builder::new();
    let base = realize_into(&mut b, p, 5)?;
    let s2s3 = b.sphere_product(2, 3)?;
    let other = b.push(Operation::ConnectedSum { left: base, right: s2s3, reverse_second: false }, CITE_BRANCH)?;
    let semi_chars = [b.built[base].record().semi_char, b.built[other].record().semi_char];
    let chosen = semi_chars.iter().position(|c| *c == Some(0));
    let output = chosen.map_or(base, |i| [base, other][i]);
    let note = match chosen {
        Some(_) => "second homology is tracked; the candidate with vanishing semi-characteristic is returned",
        None => "second homology is not tracked; both candidates are returned, exactly one of them embeds",
    };
    let (d, mut cert) = finish(b, p, 5, Strategy::TwoBranch, output);
    cert.branch_note = Some(BranchNote { branches: [base, other], semi_chars, chosen, note: note.to_string() });
    Ok((d, cert))
}

/// Immersion and embedding capability established by a certificate alone.
pub fn certified_embedding(cert: &RealizationCertificate) -> Result<TriState, ConstructionError> {
    match cert.strategy {
        Strategy::Product => Ok(TriState::from_bool(cert.check_product_chain()?)),
        _ => Ok(decide(&cert.replay()?)?.embedding),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abelian::abelianization;

    fn pres(s: &str) -> GroupPresentation {
        GroupPresentation::parse(s).unwrap()
    }

    #[test]
    fn realize_examples() {
        let (d, _) = realize_group(&pres("|"), 4).unwrap();
        assert_eq!(d.record().euler, Some(2));
        let (d, _) = realize_group(&pres("a|"), 4).unwrap();
        assert_eq!(d.record().euler, Some(0));
        assert_eq!(d.record().homology.degree(1).unwrap().to_string(), "Z");
        let (d, cert) = realize_group(&pres("a,b|abAB"), 6).unwrap();
        assert_eq!(d.record().euler, Some(0));
        assert_eq!(d.record().homology.degree(1).unwrap().to_string(), "Z^2");
        assert_eq!(d.record().ctm_trivial, TriState::Yes);
        assert_eq!(cert.replay().unwrap(), d);
    }

    #[test]
    fn renamed_generators() {
        let p = pres("x,y|xxY");
        let (d, cert) = realize_group(&p, 5).unwrap();
        assert_eq!(d.record().fundamental_group.as_ref(), Some(&p.canonical_names()));
        assert_eq!(cert.presentation.to_string(), "a,b|aaB");
        assert_eq!(abelianization(&p).unwrap(), *d.record().homology.degree(1).unwrap());
    }

    #[test]
    fn dimension_bounds() {
        assert!(matches!(realize_group(&pres("|"), 3), Err(ConstructionError::DimensionTooSmall { .. })));
        assert!(matches!(normalize_for_embedding(&pres("|"), 4), Err(ConstructionError::DimensionTooSmall { .. })));
    }

    #[test]
    fn six_dimensional_normalization() {
        let (d, cert) = normalize_for_embedding(&pres("|"), 6).unwrap();
        assert_eq!(cert.strategy, Strategy::EulerNormalization);
        assert_eq!(d.record().euler, Some(0));
        assert_eq!(decide(&d).unwrap().embedding, TriState::Yes);
        let (_, cert) = normalize_for_embedding(&pres("a|"), 8).unwrap();
        assert_eq!(cert.steps.len(), 3);
    }

    #[test]
    fn product_split_values() {
        assert_eq!(product_split(7), Some((0, 1)));
        assert_eq!(product_split(8), None);
        assert_eq!(product_split(6), None);
        assert_eq!(product_split(10), Some((0, 2)));
        assert_eq!(product_split(9), Some((1, 1)));
        assert!((9..60).all(|n| product_split(n).is_some()));
    }

    #[test]
    fn seven_uses_products() {
        let (d, cert) = normalize_for_embedding(&pres("a,b|aaBBB"), 7).unwrap();
        assert_eq!(cert.strategy, Strategy::Product);
        assert!(cert.check_product_chain().unwrap());
        assert_eq!(decide(&d).unwrap().embedding, TriState::Yes);
        assert_eq!(cert.replay().unwrap(), d);
    }

    #[test]
    fn five_dimensional_branches() {
        let (d, cert) = normalize_for_embedding(&pres("|"), 5).unwrap();
        let note = cert.branch_note.as_ref().unwrap();
        assert_eq!(note.semi_chars, [Some(1), Some(0)]);
        assert_eq!(note.chosen, Some(1));
        assert_eq!(decide(&d).unwrap().embedding, TriState::Yes);

        let (_, cert) = normalize_for_embedding(&pres("a|aaaaa"), 5).unwrap();
        let note = cert.branch_note.unwrap();
        assert_eq!(note.chosen, None);
        assert_eq!(cert.output, note.branches[0]);
    }

    #[test]
    fn certificate_json_round_trip() {
        let (_, cert) = normalize_for_embedding(&pres("a,b|abAB"), 6).unwrap();
        let text = serde_json::to_string(&cert).unwrap();
        assert!(text.contains("\"operation\":\"surgery\""));
        let back: RealizationCertificate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cert);
    }
}
