//! Manifold descriptors: expression trees over a catalog of closed manifolds,
//! with exact homology, Euler characteristic, Kervaire semi-characteristic
//! and tri-state bundle flags computed at construction.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abelian::{abelianization, mod2_hom_ext_dims, FGAbelianGroup, GroupPresentation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifoldError {
    #[error("invalid parameters for {atom}: {reason}")]
    InvalidAtom { atom: String, reason: String },
    #[error("connected sum of a {left}-manifold with a {right}-manifold")]
    DimensionMismatch { left: u32, right: u32 },
    #[error("orientation reversal needs an oriented manifold")]
    ReverseNonOrientable,
    #[error("surgery of index {0} is not covered: the closure theorem needs 0 <= p <= 2")]
    UnsupportedSurgeryIndex(u32),
    #[error("cannot embed S^{index} x D^(n-{index}) in a {dim}-manifold")]
    SurgeryTooLarge { index: u32, dim: u32 },
    #[error("torus fiber rank must be at least 1")]
    InvalidFiberRank,
    #[error("semi-characteristic is only defined in odd dimensions, got {0}")]
    EvenDimension(u32),
}

// ---------------------------------------------------------------------------
// Tri-state logic
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TriState {
    Yes,
    No,
    #[default]
    Unknown,
}

impl TriState {
    pub fn from_bool(b: bool) -> Self {
        if b {
            TriState::Yes
        } else {
            TriState::No
        }
    }

    pub fn and(self, other: TriState) -> TriState {
        match (self, other) {
            (TriState::No, _) | (_, TriState::No) => TriState::No,
            (TriState::Yes, TriState::Yes) => TriState::Yes,
            _ => TriState::Unknown,
        }
    }

    pub fn or(self, other: TriState) -> TriState {
        self.not().and(other.not()).not()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> TriState {
        match self {
            TriState::Yes => TriState::No,
            TriState::No => TriState::Yes,
            TriState::Unknown => TriState::Unknown,
        }
    }

    pub fn is_yes(self) -> bool {
        self == TriState::Yes
    }

    pub fn is_no(self) -> bool {
        self == TriState::No
    }

    pub fn is_known(self) -> bool {
        self != TriState::Unknown
    }

    /// `yes` only when `self` is yes; otherwise unknown.
    pub fn only_yes(self) -> TriState {
        if self.is_yes() {
            TriState::Yes
        } else {
            TriState::Unknown
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TriState::Yes => "yes",
            TriState::No => "no",
            TriState::Unknown => "unknown",
        }
    }
}

impl fmt::Display for TriState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// ---------------------------------------------------------------------------
// Catalog atoms
// ---------------------------------------------------------------------------

/// Closed manifolds the engine knows from the catalog.
///
/// `Wu` is SU(3)/SO(3), `Mpk` the spin block with `H_2 = (Z/p^k)^2`, `Xk` the
/// non-spin block with `H_2 = (Z/2^k)^2`, `TwistedS3S2` the non-trivial
/// 3-sphere bundle over the 2-sphere and `Cp2Cp2Bar` is CP^2 # -CP^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "block", rename_all = "snake_case")]
pub enum BlockAtom {
    Sphere { n: u32 },
    Wu,
    Mpk { p: u32, k: u32 },
    Xk { k: u32 },
    #[serde(rename = "s3tws2")]
    TwistedS3S2,
    Torus { n: u32 },
    #[serde(rename = "cp2cp2bar")]
    Cp2Cp2Bar,
}

impl BlockAtom {
    pub fn validate(&self) -> Result<(), ManifoldError> {
        let bad = |reason: &str| {
            Err(ManifoldError::InvalidAtom { atom: self.to_string(), reason: reason.to_string() })
        };
        match *self {
            BlockAtom::Sphere { n } if n < 1 => bad("sphere dimension must be at least 1"),
            BlockAtom::Torus { n } if n < 1 => bad("torus dimension must be at least 1"),
            BlockAtom::Mpk { p, .. } if p < 2 => bad("p must be at least 2"),
            BlockAtom::Mpk { k, .. } if k < 1 => bad("k must be at least 1"),
            BlockAtom::Mpk { p, k } if (p as u64).checked_pow(k).is_none_or(|q| q > u32::MAX as u64) => {
                bad("p^k is too large")
            }
            BlockAtom::Xk { k } if k < 1 => bad("k must be at least 1"),
            BlockAtom::Xk { k } if k > 31 => bad("2^k is too large"),
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> u32 {
        match *self {
            BlockAtom::Sphere { n } | BlockAtom::Torus { n } => n,
            BlockAtom::Wu | BlockAtom::Mpk { .. } | BlockAtom::Xk { .. } | BlockAtom::TwistedS3S2 => 5,
            BlockAtom::Cp2Cp2Bar => 4,
        }
    }
}

impl fmt::Display for BlockAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BlockAtom::Sphere { n } => write!(f, "S{n}"),
            BlockAtom::Torus { n } => write!(f, "T{n}"),
            BlockAtom::Wu => write!(f, "wu"),
            BlockAtom::Mpk { p, k } => write!(f, "m({p},{k})"),
            BlockAtom::Xk { k } => write!(f, "xk({k})"),
            BlockAtom::TwistedS3S2 => write!(f, "s3tws2"),
            BlockAtom::Cp2Cp2Bar => write!(f, "cp2cp2bar"),
        }
    }
}

fn is_prime(n: u32) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

// ---------------------------------------------------------------------------
// Homology and invariant records
// ---------------------------------------------------------------------------

/// Integral homology by degree, `None` where the engine cannot compute it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HomologyProfile(pub Vec<Option<FGAbelianGroup>>);

impl HomologyProfile {
    pub fn unknown(dim: u32) -> Self {
        Self(vec![None; dim as usize + 1])
    }

    pub fn known(groups: Vec<FGAbelianGroup>) -> Self {
        Self(groups.into_iter().map(Some).collect())
    }

    pub fn degree(&self, i: usize) -> Option<&FGAbelianGroup> {
        self.0.get(i).and_then(Option::as_ref)
    }

    pub fn is_fully_known(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }

    pub fn is_free(&self) -> bool {
        self.0.iter().all(|g| g.as_ref().is_some_and(FGAbelianGroup::is_free))
    }

    pub fn betti(&self) -> Option<Vec<usize>> {
        self.0.iter().map(|g| g.as_ref().map(FGAbelianGroup::rank)).collect()
    }

    pub fn euler(&self) -> Option<i64> {
        let betti = self.betti()?;
        Some(betti.iter().enumerate().map(|(i, &b)| if i % 2 == 0 { b as i64 } else { -(b as i64) }).sum())
    }

    /// Dimensions of `H^i(M; Z/2)` from universal coefficients, per degree.
    pub fn mod2_cohomology_dim(&self, i: usize) -> Option<usize> {
        let (hom, _) = mod2_hom_ext_dims(self.degree(i)?);
        let ext = if i == 0 { 0 } else { mod2_hom_ext_dims(self.degree(i - 1)?).1 };
        Some(hom + ext)
    }

    /// Parity of the sum of mod-2 cohomology dimensions in degrees `0..=k`
    /// for a manifold of dimension `2k + 1`.
    pub fn semi_characteristic(&self, dim: u32) -> Option<u8> {
        let k = (dim / 2) as usize;
        let mut total = 0usize;
        for i in 0..=k {
            total += self.mod2_cohomology_dim(i)?;
        }
        Some((total % 2) as u8)
    }
}

impl fmt::Display for HomologyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.0.iter().map(|g| g.as_ref().map_or("?".to_string(), |g| g.to_string())).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Everything the engine knows about a descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantRecord {
    pub dim: u32,
    pub orientable: TriState,
    pub simply_connected: TriState,
    /// Presentation of the fundamental group when it is tracked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fundamental_group: Option<GroupPresentation>,
    pub homology: HomologyProfile,
    pub euler: Option<i64>,
    /// Kervaire semi-characteristic; absent in even dimensions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_char: Option<u8>,
    pub w2_zero: TriState,
    pub p1_zero: TriState,
    pub stably_parallelizable: TriState,
    pub ctm_trivial: TriState,
    /// Kervaire's parallelizability, display only (odd dimensions).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelizable: Option<TriState>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub const NOTE_ORIENTATION: &str =
    "orientation reversal applied; no computed invariant depends on orientation";
pub const NOTE_XK_DERIVED: &str =
    "X_k homology beyond H_2 filled in by Poincare duality, not from the block table";

impl InvariantRecord {
    fn blank(dim: u32) -> Self {
        Self {
            dim,
            orientable: TriState::Unknown,
            simply_connected: TriState::Unknown,
            fundamental_group: None,
            homology: HomologyProfile::unknown(dim),
            euler: None,
            semi_char: None,
            w2_zero: TriState::Unknown,
            p1_zero: TriState::Unknown,
            stably_parallelizable: TriState::Unknown,
            ctm_trivial: TriState::Unknown,
            parallelizable: None,
            notes: Vec::new(),
        }
    }

    fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }

    /// The semi-characteristic slot reads as unknown (rather than absent)
    /// only in odd dimensions.
    pub fn semi_char_known(&self) -> Option<u8> {
        if self.dim % 2 == 1 {
            self.semi_char
        } else {
            None
        }
    }

    /// Applies the implications between flags and fills derived numbers.
    fn close(mut self) -> Self {
        if self.dim < 4 {
            // H^4 vanishes
            self.p1_zero = merge(self.p1_zero, TriState::Yes);
        }
        if let Some(pi1) = &self.fundamental_group {
            if pi1.is_obviously_trivial() {
                self.simply_connected = merge(self.simply_connected, TriState::Yes);
            } else if abelianization(pi1).is_ok_and(|g| !g.is_trivial()) {
                self.simply_connected = merge(self.simply_connected, TriState::No);
            }
        }
        if self.stably_parallelizable.is_yes() {
            self.w2_zero = merge(self.w2_zero, TriState::Yes);
            self.p1_zero = merge(self.p1_zero, TriState::Yes);
            self.ctm_trivial = merge(self.ctm_trivial, TriState::Yes);
        }
        if self.ctm_trivial.is_yes() {
            // p_1 is c_2 of the complexification up to sign
            self.p1_zero = merge(self.p1_zero, TriState::Yes);
        }
        if self.p1_zero.is_no() {
            self.ctm_trivial = merge(self.ctm_trivial, TriState::No);
        }
        if self.w2_zero.is_no() || self.p1_zero.is_no() || self.ctm_trivial.is_no() {
            self.stably_parallelizable = merge(self.stably_parallelizable, TriState::No);
        }
        if self.dim % 2 == 1 {
            self.euler = Some(0);
        } else if self.euler.is_none() {
            self.euler = self.homology.euler();
        }
        if self.dim % 2 == 1 {
            if self.semi_char.is_none() {
                self.semi_char = self.homology.semi_characteristic(self.dim);
            }
            self.parallelizable = Some(match self.dim {
                1 | 3 | 7 => self.stably_parallelizable,
                _ => {
                    let chi_hat_zero = self.semi_char.map_or(TriState::Unknown, |c| TriState::from_bool(c == 0));
                    self.stably_parallelizable.and(chi_hat_zero)
                }
            });
        } else {
            self.semi_char = None;
            self.parallelizable = None;
        }
        self
    }
}

/// Combines an existing flag with a newly derived one. A known value is
/// never overwritten; conflicting knowledge is a bug in the propagation rules.
fn merge(current: TriState, derived: TriState) -> TriState {
    match (current, derived) {
        (TriState::Unknown, d) => d,
        (c, TriState::Unknown) => c,
        (c, d) => {
            debug_assert_eq!(c, d, "contradictory flag propagation");
            c
        }
    }
}

// ---------------------------------------------------------------------------
// Descriptors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framing {
    /// The framing for which the trivialization extends over the handle core.
    Canonical,
    Other,
}

impl fmt::Display for Framing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Framing::Canonical => "canonical",
            Framing::Other => "other",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Atom(BlockAtom),
    ConnectedSum { left: ManifoldDescriptor, right: ManifoldDescriptor, reverse_second: bool },
    Product { left: ManifoldDescriptor, right: ManifoldDescriptor },
    Surgery { base: ManifoldDescriptor, index: u32, framing: Framing, sphere: Option<String> },
    TorusBundleTotal { base: ManifoldDescriptor, fiber_rank: u32 },
    Reversed(ManifoldDescriptor),
}

/// Immutable expression tree with its invariant record computed once.
#[derive(Debug, Clone)]
pub struct ManifoldDescriptor {
    node: Arc<Node>,
    record: Arc<InvariantRecord>,
}

impl PartialEq for ManifoldDescriptor {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.node, &other.node) || self.node == other.node
    }
}

impl Eq for ManifoldDescriptor {}

impl std::hash::Hash for ManifoldDescriptor {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.node.hash(state);
    }
}

impl ManifoldDescriptor {
    fn from_node(node: Node) -> Result<Self, ManifoldError> {
        let record = compute_record(&node)?;
        Ok(Self { node: Arc::new(node), record: Arc::new(record) })
    }

    pub fn atom(atom: BlockAtom) -> Result<Self, ManifoldError> {
        atom.validate()?;
        Self::from_node(Node::Atom(atom))
    }

    pub fn sphere(n: u32) -> Result<Self, ManifoldError> {
        Self::atom(BlockAtom::Sphere { n })
    }

    pub fn connected_sum(a: &Self, b: &Self, reverse_second: bool) -> Result<Self, ManifoldError> {
        Self::from_node(Node::ConnectedSum { left: a.clone(), right: b.clone(), reverse_second })
    }

    pub fn product(a: &Self, b: &Self) -> Result<Self, ManifoldError> {
        Self::from_node(Node::Product { left: a.clone(), right: b.clone() })
    }

    pub fn surgery(
        base: &Self,
        index: u32,
        framing: Framing,
        sphere: Option<String>,
    ) -> Result<Self, ManifoldError> {
        Self::from_node(Node::Surgery { base: base.clone(), index, framing, sphere })
    }

    pub fn torus_bundle_total(base: &Self, fiber_rank: u32) -> Result<Self, ManifoldError> {
        Self::from_node(Node::TorusBundleTotal { base: base.clone(), fiber_rank })
    }

    pub fn reversed(inner: &Self) -> Result<Self, ManifoldError> {
        Self::from_node(Node::Reversed(inner.clone()))
    }

    /// `n` copies connected-summed, nested to the left.
    pub fn connected_sum_copies(d: &Self, n: usize) -> Result<Self, ManifoldError> {
        assert!(n >= 1, "at least one copy");
        let mut acc = d.clone();
        for _ in 1..n {
            acc = Self::connected_sum(&acc, d, false)?;
        }
        Ok(acc)
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn record(&self) -> &InvariantRecord {
        &self.record
    }

    pub fn dim(&self) -> u32 {
        self.record.dim
    }

    pub fn as_atom(&self) -> Option<BlockAtom> {
        match *self.node {
            Node::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// Recomputes the record from the children; equal to the cache by construction.
    pub fn recompute(&self) -> Result<InvariantRecord, ManifoldError> {
        compute_record(&self.node)
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + match &*self.node {
            Node::Atom(_) => 0,
            Node::ConnectedSum { left, right, .. } | Node::Product { left, right } => left.size() + right.size(),
            Node::Surgery { base, .. } | Node::TorusBundleTotal { base, .. } => base.size(),
            Node::Reversed(inner) => inner.size(),
        }
    }
}

pub fn homology(d: &ManifoldDescriptor) -> &HomologyProfile {
    &d.record().homology
}

pub fn euler_characteristic(d: &ManifoldDescriptor) -> Option<i64> {
    d.record().euler
}

pub fn semi_characteristic(d: &ManifoldDescriptor) -> Result<Option<u8>, ManifoldError> {
    if d.dim() % 2 == 0 {
        return Err(ManifoldError::EvenDimension(d.dim()));
    }
    Ok(d.record().semi_char)
}

pub fn invariants(d: &ManifoldDescriptor) -> &InvariantRecord {
    d.record()
}

fn sphere_euler(n: u32) -> i64 {
    if n % 2 == 0 {
        2
    } else {
        0
    }
}

fn binomial(n: u32, k: u32) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) as usize / (i + 1) as usize)
}

// ---------------------------------------------------------------------------
// Catalog records
// ---------------------------------------------------------------------------

fn simply_connected_five(h2: FGAbelianGroup, h3: FGAbelianGroup) -> HomologyProfile {
    let z = FGAbelianGroup::free(1);
    let zero = FGAbelianGroup::trivial();
    HomologyProfile::known(vec![z.clone(), zero.clone(), h2, h3, zero, z])
}

fn atom_record(atom: BlockAtom) -> InvariantRecord {
    let dim = atom.dim();
    let mut r = InvariantRecord::blank(dim);
    r.orientable = TriState::Yes;
    r.fundamental_group = GroupPresentation::free(0).ok();
    let z = FGAbelianGroup::free(1);
    match atom {
        BlockAtom::Sphere { n } => {
            let mut h = vec![FGAbelianGroup::trivial(); n as usize + 1];
            h[0] = z.clone();
            h[n as usize] = z.clone();
            r.homology = HomologyProfile::known(h);
            if n == 1 {
                r.fundamental_group = GroupPresentation::free(1).ok();
            }
            r.stably_parallelizable = TriState::Yes;
        }
        BlockAtom::Torus { n } => {
            r.homology = HomologyProfile::known((0..=n).map(|i| FGAbelianGroup::free(binomial(n, i))).collect());
            let circle = GroupPresentation::free(1).expect("one generator");
            r.fundamental_group = (1..n).try_fold(circle.clone(), |acc, _| acc.direct_product(&circle));
            r.stably_parallelizable = TriState::Yes;
        }
        BlockAtom::Wu => {
            r.homology = simply_connected_five(FGAbelianGroup::cyclic(2), FGAbelianGroup::trivial());
            r.w2_zero = TriState::No;
            r.ctm_trivial = TriState::Yes;
        }
        BlockAtom::Mpk { p, k } => {
            let q = (p as u64).pow(k);
            r.homology = simply_connected_five(
                FGAbelianGroup::new(0, [q, q]).expect("q >= 2"),
                FGAbelianGroup::trivial(),
            );
            r.w2_zero = TriState::Yes;
            // simply connected spin 5-manifolds are stably parallelizable
            r.stably_parallelizable = TriState::Yes;
            if !is_prime(p) {
                r.note(format!("m({p},{k}): p is not prime, outside the block table"));
            }
        }
        BlockAtom::Xk { k } => {
            let q = 1u64 << k;
            r.homology = simply_connected_five(
                FGAbelianGroup::new(0, [q, q]).expect("q >= 2"),
                FGAbelianGroup::trivial(),
            );
            r.w2_zero = TriState::No;
            r.ctm_trivial = TriState::Yes;
            r.note(NOTE_XK_DERIVED);
        }
        BlockAtom::TwistedS3S2 => {
            r.homology = simply_connected_five(z.clone(), z.clone());
            r.w2_zero = TriState::No;
            r.ctm_trivial = TriState::Yes;
        }
        BlockAtom::Cp2Cp2Bar => {
            let zero = FGAbelianGroup::trivial();
            r.homology = HomologyProfile::known(vec![z.clone(), zero.clone(), FGAbelianGroup::free(2), zero, z]);
            r.w2_zero = TriState::No;
            // signature zero, so p_1 = 0
            r.p1_zero = TriState::Yes;
            r.ctm_trivial = TriState::Yes;
        }
    }
    r.close()
}

// ---------------------------------------------------------------------------
// Propagation
// ---------------------------------------------------------------------------

fn compute_record(node: &Node) -> Result<InvariantRecord, ManifoldError> {
    Ok(match node {
        Node::Atom(atom) => {
            atom.validate()?;
            atom_record(*atom)
        }
        Node::ConnectedSum { left, right, reverse_second } => {
            connected_sum_record(left.record(), right.record(), *reverse_second)?
        }
        Node::Product { left, right } => product_record(left.record(), right.record()),
        Node::Surgery { base, index, framing, sphere } => {
            surgery_record(base, *index, *framing, sphere.as_deref())?
        }
        Node::TorusBundleTotal { base, fiber_rank } => torus_bundle_record(base.record(), *fiber_rank)?,
        Node::Reversed(inner) => {
            if !inner.record().orientable.is_yes() {
                return Err(ManifoldError::ReverseNonOrientable);
            }
            let mut r = inner.record().clone();
            r.note(NOTE_ORIENTATION);
            r
        }
    })
}

fn connected_sum_record(
    a: &InvariantRecord,
    b: &InvariantRecord,
    reverse_second: bool,
) -> Result<InvariantRecord, ManifoldError> {
    if a.dim != b.dim {
        return Err(ManifoldError::DimensionMismatch { left: a.dim, right: b.dim });
    }
    if reverse_second && !(a.orientable.is_yes() && b.orientable.is_yes()) {
        return Err(ManifoldError::ReverseNonOrientable);
    }
    let n = a.dim;
    let mut r = InvariantRecord::blank(n);
    r.orientable = a.orientable.and(b.orientable);

    let mut h = HomologyProfile::unknown(n);
    h.0[0] = Some(FGAbelianGroup::free(1));
    if r.orientable.is_yes() {
        h.0[n as usize] = Some(FGAbelianGroup::free(1));
        for i in 1..n as usize {
            h.0[i] = match (a.homology.degree(i), b.homology.degree(i)) {
                (Some(x), Some(y)) => Some(x.direct_sum(y)),
                _ => None,
            };
        }
    }
    r.homology = h;

    r.euler = match (a.euler, b.euler) {
        (Some(x), Some(y)) => Some(x + y - sphere_euler(n)),
        _ => None,
    };

    let trivial = |g: &Option<GroupPresentation>| g.as_ref().is_some_and(|p| p.generator_count() == 0);
    r.fundamental_group = match (&a.fundamental_group, &b.fundamental_group) {
        (Some(x), Some(y)) if n >= 3 => x.free_product(y),
        (Some(x), _) if trivial(&b.fundamental_group) => Some(x.clone()),
        (_, Some(y)) if trivial(&a.fundamental_group) => Some(y.clone()),
        _ => None,
    };
    if n >= 3 {
        r.simply_connected = a.simply_connected.and(b.simply_connected);
    }

    r.w2_zero = a.w2_zero.and(b.w2_zero);
    r.p1_zero = match n {
        0..=3 => TriState::Yes,
        4 => match (a.p1_zero, b.p1_zero) {
            (TriState::Yes, TriState::Yes) => TriState::Yes,
            (TriState::Yes, TriState::No) | (TriState::No, TriState::Yes) => TriState::No,
            _ => TriState::Unknown,
        },
        _ => a.p1_zero.and(b.p1_zero),
    };
    r.stably_parallelizable = a.stably_parallelizable.and(b.stably_parallelizable).only_yes();
    if r.orientable.is_yes() {
        r.ctm_trivial = a.ctm_trivial.and(b.ctm_trivial).only_yes();
    }
    for note in a.notes.iter().chain(&b.notes) {
        r.note(note.clone());
    }
    if reverse_second {
        r.note(NOTE_ORIENTATION);
    }
    Ok(r.close())
}

/// Degreewise Kunneth formula when one factor has free homology.
fn kunneth(a: &HomologyProfile, b: &HomologyProfile) -> Option<HomologyProfile> {
    let (general, free) = if b.is_free() {
        (a, b)
    } else if a.is_free() {
        (b, a)
    } else {
        return None;
    };
    let betti = free.betti()?;
    let dim = general.0.len() + free.0.len() - 2;
    let groups = (0..=dim)
        .map(|n| {
            let mut acc = FGAbelianGroup::trivial();
            for (j, &bj) in betti.iter().enumerate() {
                if bj == 0 || j > n || n - j >= general.0.len() {
                    continue;
                }
                acc = acc.direct_sum(&general.degree(n - j)?.power(bj));
            }
            Some(acc)
        })
        .collect();
    Some(HomologyProfile(groups))
}

fn product_record(a: &InvariantRecord, b: &InvariantRecord) -> InvariantRecord {
    let mut r = InvariantRecord::blank(a.dim + b.dim);
    r.orientable = a.orientable.and(b.orientable);
    if let Some(h) = kunneth(&a.homology, &b.homology) {
        r.homology = h;
    }
    r.euler = a.euler.zip(b.euler).map(|(x, y)| x * y);
    r.fundamental_group = match (&a.fundamental_group, &b.fundamental_group) {
        (Some(x), Some(y)) => x.direct_product(y),
        _ => None,
    };
    r.simply_connected = a.simply_connected.and(b.simply_connected);
    // restriction to a slice recovers each factor's classes
    r.w2_zero = match a.w2_zero.and(b.w2_zero) {
        TriState::Yes if r.orientable.is_yes() => TriState::Yes,
        TriState::No => TriState::No,
        _ => TriState::Unknown,
    };
    r.p1_zero = a.p1_zero.and(b.p1_zero);
    r.stably_parallelizable = a.stably_parallelizable.and(b.stably_parallelizable);
    r.ctm_trivial = a.ctm_trivial.and(b.ctm_trivial);
    for note in a.notes.iter().chain(&b.notes) {
        r.note(note.clone());
    }
    r.close()
}

/// Reads a sphere label of the form `<m>g` with `m = 2^k`, `k >= 1`.
fn power_of_two_multiple(label: &str) -> Option<u32> {
    let m: u64 = label.strip_suffix('g')?.parse().ok()?;
    (m >= 2 && m.is_power_of_two()).then(|| m.trailing_zeros())
}

fn surgery_record(
    base: &ManifoldDescriptor,
    index: u32,
    framing: Framing,
    sphere: Option<&str>,
) -> Result<InvariantRecord, ManifoldError> {
    if index > 2 {
        return Err(ManifoldError::UnsupportedSurgeryIndex(index));
    }
    let b = base.record();
    let n = b.dim;
    if index + 1 > n {
        return Err(ManifoldError::SurgeryTooLarge { index, dim: n });
    }
    let propagates = index == 2 || framing == Framing::Canonical;

    // the one documented homology transition: X_k from the twisted bundle
    if let (Some(BlockAtom::TwistedS3S2), 2, Some(k)) =
        (base.as_atom(), index, sphere.and_then(power_of_two_multiple))
    {
        if k <= 31 {
            return Ok(atom_record(BlockAtom::Xk { k }));
        }
    }

    let mut r = InvariantRecord::blank(n);
    r.orientable = if index == 0 && framing == Framing::Other { TriState::Unknown } else { b.orientable };
    r.euler = b.euler.map(|chi| chi + sphere_euler(n - index - 1) - sphere_euler(index));

    r.fundamental_group = match (index, &b.fundamental_group) {
        (0, Some(g)) if n >= 3 => g.with_free_generator(),
        (1, Some(g)) if n >= 4 => sphere.and_then(|w| g.parse_word(w, g.relators().len()).ok()).map(|w| g.with_relator(w)),
        (2, Some(g)) if n >= 5 => Some(g.clone()),
        _ => None,
    };

    let mut h = HomologyProfile::unknown(n);
    h.0[0] = Some(FGAbelianGroup::free(1));
    if let Some(h1) = r.fundamental_group.as_ref().and_then(|g| abelianization(g).ok()) {
        if n >= 3 && r.orientable.is_yes() {
            h.0[n as usize - 1] = Some(FGAbelianGroup::free(h1.rank()));
        }
        h.0[1] = Some(h1);
    }
    if r.orientable.is_yes() {
        h.0[n as usize] = Some(FGAbelianGroup::free(1));
    }
    r.homology = h;

    if propagates {
        r.ctm_trivial = b.ctm_trivial.only_yes();
        // the trace of a correctly framed low-index surgery keeps a stable framing
        r.stably_parallelizable = b.stably_parallelizable.only_yes();
    }
    if index == 2 && n >= 5 {
        r.simply_connected = b.simply_connected;
    }
    for note in &b.notes {
        r.note(note.clone());
    }
    Ok(r.close())
}

fn torus_bundle_record(b: &InvariantRecord, k: u32) -> Result<InvariantRecord, ManifoldError> {
    if k < 1 {
        return Err(ManifoldError::InvalidFiberRank);
    }
    let mut r = InvariantRecord::blank(b.dim + k);
    r.orientable = b.orientable;
    // fiber Euler characteristic vanishes
    r.euler = Some(0);
    // the tangent bundle is the pullback of the base's plus a trivial summand
    r.w2_zero = b.w2_zero.only_yes();
    r.p1_zero = b.p1_zero.only_yes();
    r.stably_parallelizable = b.stably_parallelizable.only_yes();
    if b.orientable.is_yes() {
        r.ctm_trivial = b.ctm_trivial.only_yes();
    }
    for note in &b.notes {
        r.note(note.clone());
    }
    Ok(r.close())
}

// ---------------------------------------------------------------------------
// Block table
// ---------------------------------------------------------------------------

/// One row of the table of simply connected 5-dimensional building blocks.
#[derive(Debug, Clone, Serialize)]
pub struct BlockRow {
    pub name: &'static str,
    /// Expression (CLI grammar) instantiating the row.
    pub expression: String,
    pub h2: FGAbelianGroup,
    pub w2_zero: bool,
    pub semi_char: u8,
}

/// Rows with their tabulated columns. Parametric rows are instantiated at
/// the given prime `p`, exponent `k`.
pub fn block_table(p: u32, k: u32) -> Vec<BlockRow> {
    let q = (p as u64).pow(k);
    let q2 = 1u64 << k;
    vec![
        BlockRow { name: "S^5", expression: "S5".into(), h2: FGAbelianGroup::trivial(), w2_zero: true, semi_char: 1 },
        BlockRow { name: "S^2 x S^3", expression: "S2 x S3".into(), h2: FGAbelianGroup::free(1), w2_zero: true, semi_char: 0 },
        BlockRow {
            name: "M_{p^k}",
            expression: format!("m({p},{k})"),
            h2: FGAbelianGroup::new(0, [q, q]).expect("q >= 2"),
            w2_zero: true,
            semi_char: 1,
        },
        BlockRow { name: "SU(3)/SO(3)", expression: "wu".into(), h2: FGAbelianGroup::cyclic(2), w2_zero: false, semi_char: 0 },
        BlockRow { name: "S^3 x~ S^2", expression: "s3tws2".into(), h2: FGAbelianGroup::free(1), w2_zero: false, semi_char: 0 },
        BlockRow {
            name: "X_k",
            expression: format!("xk({k})"),
            h2: FGAbelianGroup::new(0, [q2, q2]).expect("q >= 2"),
            w2_zero: false,
            semi_char: 1,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(a: BlockAtom) -> ManifoldDescriptor {
        ManifoldDescriptor::atom(a).unwrap()
    }

    fn s(n: u32) -> ManifoldDescriptor {
        ManifoldDescriptor::sphere(n).unwrap()
    }

    fn groups(h: &HomologyProfile) -> Vec<String> {
        h.0.iter().map(|g| g.as_ref().map_or("?".into(), |g| g.to_string())).collect()
    }

    #[test]
    fn tristate_logic() {
        use TriState::*;
        assert_eq!(Yes.and(Yes), Yes);
        assert_eq!(No.and(Unknown), No);
        assert_eq!(Unknown.and(Yes), Unknown);
        assert_eq!(Yes.not(), No);
        assert_eq!(Unknown.not(), Unknown);
        assert_eq!(No.or(Unknown), Unknown);
        assert_eq!(Yes.or(Unknown), Yes);
    }

    #[test]
    fn wu_record() {
        let r = atom(BlockAtom::Wu).record().clone();
        assert_eq!(groups(&r.homology), ["Z", "0", "Z/2", "0", "0", "Z"]);
        assert_eq!(r.w2_zero, TriState::No);
        assert_eq!(r.ctm_trivial, TriState::Yes);
        assert_eq!(r.stably_parallelizable, TriState::No);
        assert_eq!(r.semi_char, Some(0));
    }

    #[test]
    fn sphere_record() {
        let r = s(5).record().clone();
        assert_eq!(groups(&r.homology), ["Z", "0", "0", "0", "0", "Z"]);
        assert_eq!(r.stably_parallelizable, TriState::Yes);
        assert_eq!(r.semi_char, Some(1));
        assert_eq!(r.parallelizable, Some(TriState::No));
        assert_eq!(s(7).record().parallelizable, Some(TriState::Yes));
        assert_eq!(s(6).record().euler, Some(2));
        assert_eq!(s(1).record().simply_connected, TriState::No);
    }

    #[test]
    fn xk_record() {
        let r = atom(BlockAtom::Xk { k: 2 }).record().clone();
        assert_eq!(groups(&r.homology)[2], "Z/4 + Z/4");
        assert_eq!(r.w2_zero, TriState::No);
        assert!(r.notes.iter().any(|n| n == NOTE_XK_DERIVED));
    }

    #[test]
    fn invalid_atoms() {
        assert!(ManifoldDescriptor::atom(BlockAtom::Sphere { n: 0 }).is_err());
        assert!(ManifoldDescriptor::atom(BlockAtom::Mpk { p: 1, k: 1 }).is_err());
        assert!(ManifoldDescriptor::atom(BlockAtom::Mpk { p: 3, k: 0 }).is_err());
        assert!(ManifoldDescriptor::atom(BlockAtom::Xk { k: 0 }).is_err());
        assert!(ManifoldDescriptor::atom(BlockAtom::Torus { n: 0 }).is_err());
    }

    #[test]
    fn composite_mpk_flagged() {
        let r = atom(BlockAtom::Mpk { p: 6, k: 1 }).record().clone();
        assert!(r.notes.iter().any(|n| n.contains("not prime")));
        assert!(atom(BlockAtom::Mpk { p: 5, k: 1 }).record().notes.is_empty());
    }

    #[test]
    fn product_kunneth() {
        let p = ManifoldDescriptor::product(&s(2), &s(3)).unwrap();
        assert_eq!(groups(homology(&p)), ["Z", "0", "Z", "Z", "0", "Z"]);
        assert_eq!(p.record().simply_connected, TriState::Yes);
        let t = ManifoldDescriptor::product(&atom(BlockAtom::Wu), &s(1)).unwrap();
        assert_eq!(groups(homology(&t)), ["Z", "Z", "Z/2", "Z/2", "0", "Z", "Z"]);
        assert_eq!(euler_characteristic(&ManifoldDescriptor::product(&s(3), &s(3)).unwrap()), Some(0));
    }

    #[test]
    fn product_without_free_factor_is_unknown() {
        let p = ManifoldDescriptor::product(&atom(BlockAtom::Wu), &atom(BlockAtom::Wu)).unwrap();
        assert!(homology(&p).0.iter().all(Option::is_none));
        assert_eq!(p.record().euler, Some(0));
    }

    #[test]
    fn connected_sum_homology() {
        let s2s3 = ManifoldDescriptor::product(&s(2), &s(3)).unwrap();
        let tw = atom(BlockAtom::TwistedS3S2);
        let d = ManifoldDescriptor::connected_sum(&tw, &s2s3, false).unwrap();
        assert_eq!(groups(homology(&d))[2], "Z^2");
        let m = atom(BlockAtom::Mpk { p: 3, k: 1 });
        let d = ManifoldDescriptor::connected_sum(&m, &m, false).unwrap();
        assert_eq!(groups(homology(&d))[2], "Z/3 + Z/3 + Z/3 + Z/3");
    }

    #[test]
    fn connected_sum_errors() {
        assert_eq!(
            ManifoldDescriptor::connected_sum(&s(5), &s(4), false).unwrap_err(),
            ManifoldError::DimensionMismatch { left: 5, right: 4 }
        );
        let other = ManifoldDescriptor::surgery(&s(4), 0, Framing::Other, None).unwrap();
        assert_eq!(other.record().orientable, TriState::Unknown);
        assert_eq!(
            ManifoldDescriptor::connected_sum(&s(4), &other, true).unwrap_err(),
            ManifoldError::ReverseNonOrientable
        );
    }

    #[test]
    fn euler_of_sums_of_s3xs3() {
        let s3s3 = ManifoldDescriptor::product(&s(3), &s(3)).unwrap();
        for n in 1..8 {
            let d = ManifoldDescriptor::connected_sum_copies(&s3s3, n).unwrap();
            assert_eq!(euler_characteristic(&d), Some(2 - 2 * n as i64));
        }
    }

    #[test]
    fn semi_characteristic_twisted_family() {
        let s2s3 = ManifoldDescriptor::product(&s(2), &s(3)).unwrap();
        let mut d = atom(BlockAtom::TwistedS3S2);
        for n in 1..=50u32 {
            assert_eq!(semi_characteristic(&d).unwrap(), Some(((n + 1) % 2) as u8), "n = {n}");
            d = ManifoldDescriptor::connected_sum(&d, &s2s3, false).unwrap();
        }
        assert_eq!(semi_characteristic(&s(4)).unwrap_err(), ManifoldError::EvenDimension(4));
    }

    #[test]
    fn flags_on_examples() {
        let m = atom(BlockAtom::Mpk { p: 5, k: 1 });
        assert_eq!(m.record().w2_zero, TriState::Yes);
        assert_eq!(m.record().stably_parallelizable, TriState::Yes);
        let tb = ManifoldDescriptor::torus_bundle_total(&atom(BlockAtom::Cp2Cp2Bar), 1).unwrap();
        assert_eq!(tb.record().ctm_trivial, TriState::Yes);
        assert_eq!(tb.dim(), 5);
        let cs = ManifoldDescriptor::connected_sum(&s(5), &atom(BlockAtom::Wu), false).unwrap();
        assert_eq!(cs.record().w2_zero, TriState::No);
    }

    #[test]
    fn surgery_transitions() {
        let tw = atom(BlockAtom::TwistedS3S2);
        let x = ManifoldDescriptor::surgery(&tw, 2, Framing::Canonical, Some("4g".into())).unwrap();
        assert_eq!(x.record(), atom(BlockAtom::Xk { k: 2 }).record());
        let opaque = ManifoldDescriptor::surgery(&tw, 2, Framing::Canonical, Some("3g".into())).unwrap();
        assert!(opaque.record().homology.degree(2).is_none());
        assert_eq!(opaque.record().ctm_trivial, TriState::Yes);
        assert_eq!(
            ManifoldDescriptor::surgery(&tw, 3, Framing::Canonical, None).unwrap_err(),
            ManifoldError::UnsupportedSurgeryIndex(3)
        );
    }

    #[test]
    fn surgery_euler_updates() {
        let base = s(6);
        for (p, delta) in [(0u32, -2i64), (1, 2), (2, -2)] {
            let d = ManifoldDescriptor::surgery(&base, p, Framing::Canonical, None).unwrap();
            assert_eq!(d.record().euler, Some(2 + delta), "p = {p}");
        }
        let d = ManifoldDescriptor::surgery(&s(5), 1, Framing::Canonical, None).unwrap();
        assert_eq!(d.record().euler, Some(0));
    }

    #[test]
    fn surgery_tracks_fundamental_group() {
        let circle_bundle = ManifoldDescriptor::product(&s(1), &s(5)).unwrap();
        let d = ManifoldDescriptor::surgery(&circle_bundle, 1, Framing::Canonical, Some("aaa".into())).unwrap();
        assert_eq!(d.record().homology.degree(1).unwrap().to_string(), "Z/3");
        assert_eq!(d.record().homology.degree(5).unwrap().to_string(), "0");
        assert_eq!(d.record().simply_connected, TriState::No);
        let killed = ManifoldDescriptor::surgery(&circle_bundle, 1, Framing::Canonical, Some("a".into())).unwrap();
        assert_eq!(killed.record().simply_connected, TriState::Yes);
        let other = ManifoldDescriptor::surgery(&circle_bundle, 1, Framing::Other, Some("a".into())).unwrap();
        assert_eq!(other.record().ctm_trivial, TriState::Unknown);
    }

    #[test]
    fn reversal_does_not_change_invariants() {
        let wu = atom(BlockAtom::Wu);
        let plain = ManifoldDescriptor::connected_sum(&s(5), &wu, false).unwrap();
        let rev = ManifoldDescriptor::connected_sum(&s(5), &wu, true).unwrap();
        let mut a = plain.record().clone();
        let b = rev.record().clone();
        a.notes.push(NOTE_ORIENTATION.to_string());
        assert_eq!(a, b);
    }
}
