//! Finitely generated abelian groups, integer Smith normal form and
//! abelianization of finite group presentations.
//!
//! All arithmetic here is exact. Matrices carry arbitrary-precision entries;
//! group torsion is kept in primary decomposition so that two equal groups
//! always have the same stored form.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbelianError {
    #[error("matrix shape {rows}x{cols} does not match {len} entries")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("cannot multiply {0}x{1} by {2}x{3}")]
    ProductShape(usize, usize, usize, usize),
    #[error("relator {relator}: letter '{letter}' is not a declared generator")]
    UnknownLetter { relator: usize, letter: String },
    #[error("generator name '{0}' must be a single lowercase ASCII letter")]
    InvalidGenerator(String),
    #[error("generator '{0}' declared twice")]
    DuplicateGenerator(String),
    #[error("presentation syntax: {0}")]
    Syntax(String),
    #[error("cyclic order {0} is too large to factor")]
    OrderTooLarge(String),
    #[error("torsion order must be at least 2, got {0}")]
    InvalidOrder(u64),
    #[error("group text: {0}")]
    GroupText(String),
}

// ---------------------------------------------------------------------------
// Integer matrices
// ---------------------------------------------------------------------------

/// Dense row-major matrix over the integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<BigInt>,
}

impl IntegerMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<BigInt>) -> Result<Self, AbelianError> {
        if entries.len() != rows * cols {
            return Err(AbelianError::Shape { rows, cols, len: entries.len() });
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from machine-integer rows. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self, AbelianError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(AbelianError::Shape {
                    rows: rows.len(),
                    cols,
                    len: entries.len() + row.len(),
                });
            }
            entries.extend(row.iter().map(|&x| BigInt::from(x)));
        }
        Ok(Self { rows: rows.len(), cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &BigInt {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: BigInt) {
        self.entries[r * self.cols + c] = value;
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mul(&self, other: &IntegerMatrix) -> Result<IntegerMatrix, AbelianError> {
        if self.cols != other.rows {
            return Err(AbelianError::ProductShape(self.rows, self.cols, other.rows, other.cols));
        }
        let mut out = IntegerMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        out.entries[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    /// Returns `None` for non-square matrices.
    pub fn determinant(&self) -> Option<BigInt> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        if n == 0 {
            return Some(BigInt::one());
        }
        let mut a = self.entries.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[k * n + k].is_zero() {
                let Some(swap) = (k + 1..n).find(|&i| !a[i * n + k].is_zero()) else {
                    return Some(BigInt::zero());
                };
                for j in 0..n {
                    a.swap(k * n + j, swap * n + j);
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[i * n + j] * &a[k * n + k] - &a[i * n + k] * &a[k * n + j];
                    a[i * n + j] = v / &prev;
                }
            }
            prev = a[k * n + k].clone();
        }
        Some(sign * &a[n * n - 1])
    }

    pub fn is_unimodular(&self) -> bool {
        self.determinant().is_some_and(|d| d.abs().is_one())
    }

    /// True when every off-diagonal entry is zero.
    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|r| (0..self.cols).all(|c| r == c || self.get(r, c).is_zero()))
    }

    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i).clone()).collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.entries.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.entries.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    /// row[target] += factor * row[source]
    fn add_row_multiple(&mut self, target: usize, source: usize, factor: &BigInt) {
        for j in 0..self.cols {
            let v = &self.entries[source * self.cols + j] * factor;
            self.entries[target * self.cols + j] += v;
        }
    }

    /// col[target] += factor * col[source]
    fn add_col_multiple(&mut self, target: usize, source: usize, factor: &BigInt) {
        for i in 0..self.rows {
            let v = &self.entries[i * self.cols + source] * factor;
            self.entries[i * self.cols + target] += v;
        }
    }

    fn negate_row(&mut self, r: usize) {
        for j in 0..self.cols {
            let v = -std::mem::take(&mut self.entries[r * self.cols + j]);
            self.entries[r * self.cols + j] = v;
        }
    }
}

impl fmt::Display for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(r, c))?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// `diagonal = left * input * right`, with `left` and `right` unimodular.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmithForm {
    pub diagonal: IntegerMatrix,
    pub left: IntegerMatrix,
    pub right: IntegerMatrix,
}

impl SmithForm {
    /// Nonzero diagonal entries, in divisibility order.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        self.diagonal.diagonal().into_iter().filter(|d| !d.is_zero()).collect()
    }
}

/// Smith normal form by repeated smallest-pivot elimination.
///
/// The pivot is the nonzero entry of least absolute value in the trailing
/// submatrix, ties broken by row-major position, so the transforms are
/// reproducible.
pub fn smith_normal_form(m: &IntegerMatrix) -> SmithForm {
    let (rows, cols) = (m.rows, m.cols);
    let mut d = m.clone();
    let mut left = IntegerMatrix::identity(rows);
    let mut right = IntegerMatrix::identity(cols);

    'diag: for t in 0..rows.min(cols) {
        loop {
            let mut pivot: Option<(usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    let x = d.get(i, j);
                    if x.is_zero() {
                        continue;
                    }
                    match pivot {
                        Some((pi, pj)) if d.get(pi, pj).abs() <= x.abs() => {}
                        _ => pivot = Some((i, j)),
                    }
                }
            }
            let Some((pi, pj)) = pivot else {
                break 'diag;
            };
            d.swap_rows(t, pi);
            left.swap_rows(t, pi);
            d.swap_cols(t, pj);
            right.swap_cols(t, pj);

            let p = d.get(t, t).clone();
            let mut clean = true;
            for i in t + 1..rows {
                let q = d.get(i, t) / &p;
                if !q.is_zero() {
                    let neg = -q;
                    d.add_row_multiple(i, t, &neg);
                    left.add_row_multiple(i, t, &neg);
                }
                clean &= d.get(i, t).is_zero();
            }
            for j in t + 1..cols {
                let q = d.get(t, j) / &p;
                if !q.is_zero() {
                    let neg = -q;
                    d.add_col_multiple(j, t, &neg);
                    right.add_col_multiple(j, t, &neg);
                }
                clean &= d.get(t, j).is_zero();
            }
            if !clean {
                continue;
            }
            let offender = (t + 1..rows)
                .find(|&i| (t + 1..cols).any(|j| !d.get(i, j).is_multiple_of(&p)));
            match offender {
                Some(i) => {
                    let one = BigInt::one();
                    d.add_row_multiple(t, i, &one);
                    left.add_row_multiple(t, i, &one);
                }
                None => break,
            }
        }
        if d.get(t, t).is_negative() {
            d.negate_row(t);
            left.negate_row(t);
        }
    }
    SmithForm { diagonal: d, left, right }
}

// ---------------------------------------------------------------------------
// Finitely generated abelian groups
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrimePower {
    pub prime: u64,
    pub exponent: u32,
}

impl PrimePower {
    pub fn order(&self) -> u128 {
        (self.prime as u128).pow(self.exponent)
    }
}

fn factor(mut n: u64) -> Vec<PrimePower> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push(PrimePower { prime: p, exponent: e });
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(PrimePower { prime: n, exponent: 1 });
    }
    out
}

/// A finitely generated abelian group `Z^rank + (finite part)`, with the
/// finite part in primary decomposition sorted by (prime, exponent).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FGAbelianGroup {
    rank: usize,
    torsion: Vec<PrimePower>,
}

impl FGAbelianGroup {
    pub fn trivial() -> Self {
        Self::default()
    }

    pub fn free(rank: usize) -> Self {
        Self { rank, torsion: Vec::new() }
    }

    /// `Z/order`; order 0 gives `Z` and order 1 the trivial group.
    pub fn cyclic(order: u64) -> Self {
        match order {
            0 => Self::free(1),
            _ => Self { rank: 0, torsion: factor(order) },
        }
    }

    /// Builds `Z^rank + sum of Z/q` for arbitrary orders `q >= 2`.
    pub fn new(rank: usize, orders: impl IntoIterator<Item = u64>) -> Result<Self, AbelianError> {
        let mut torsion = Vec::new();
        for q in orders {
            if q < 2 {
                return Err(AbelianError::InvalidOrder(q));
            }
            torsion.extend(factor(q));
        }
        torsion.sort();
        Ok(Self { rank, torsion })
    }

    /// Group presented by a diagonal relation matrix: zero entries contribute
    /// a free summand, units vanish, the rest become cyclic summands.
    pub fn from_diagonal(extra_rank: usize, diagonal: &[BigInt]) -> Result<Self, AbelianError> {
        let mut rank = extra_rank;
        let mut orders = Vec::new();
        for d in diagonal {
            let d = d.abs();
            if d.is_zero() {
                rank += 1;
            } else if !d.is_one() {
                orders.push(d.to_u64().ok_or_else(|| AbelianError::OrderTooLarge(d.to_string()))?);
            }
        }
        Self::new(rank, orders)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn torsion(&self) -> &[PrimePower] {
        &self.torsion
    }

    pub fn is_trivial(&self) -> bool {
        self.rank == 0 && self.torsion.is_empty()
    }

    pub fn is_free(&self) -> bool {
        self.torsion.is_empty()
    }

    pub fn two_primary_count(&self) -> usize {
        self.torsion.iter().filter(|t| t.prime == 2).count()
    }

    pub fn has_two_torsion(&self) -> bool {
        self.two_primary_count() > 0
    }

    pub fn direct_sum(&self, other: &FGAbelianGroup) -> FGAbelianGroup {
        let mut torsion = self.torsion.clone();
        torsion.extend_from_slice(&other.torsion);
        torsion.sort();
        FGAbelianGroup { rank: self.rank + other.rank, torsion }
    }

    /// `n` copies of this group.
    pub fn power(&self, n: usize) -> FGAbelianGroup {
        (0..n).fold(FGAbelianGroup::trivial(), |acc, _| acc.direct_sum(self))
    }

    /// Invariant factors `d1 | d2 | ... | dm` of the finite part (display only).
    pub fn invariant_factors(&self) -> Vec<u128> {
        let mut by_prime: Vec<(u64, Vec<u32>)> = Vec::new();
        for t in &self.torsion {
            match by_prime.last_mut() {
                Some((p, exps)) if *p == t.prime => exps.push(t.exponent),
                _ => by_prime.push((t.prime, vec![t.exponent])),
            }
        }
        let len = by_prime.iter().map(|(_, e)| e.len()).max().unwrap_or(0);
        let mut factors = vec![1u128; len];
        for (p, exps) in &by_prime {
            // exps ascending; align to the tail so the largest powers meet
            let offset = len - exps.len();
            for (i, e) in exps.iter().enumerate() {
                factors[offset + i] *= (*p as u128).pow(*e);
            }
        }
        factors
    }
}

/// Dimensions of `Hom(G, Z/2)` and `Ext(G, Z/2)` over the field with two elements.
pub fn mod2_hom_ext_dims(g: &FGAbelianGroup) -> (usize, usize) {
    let two = g.two_primary_count();
    (g.rank + two, two)
}

pub fn direct_sum(g: &FGAbelianGroup, h: &FGAbelianGroup) -> FGAbelianGroup {
    g.direct_sum(h)
}

impl fmt::Display for FGAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return write!(f, "0");
        }
        let mut terms = Vec::new();
        match self.rank {
            0 => {}
            1 => terms.push("Z".to_string()),
            r => terms.push(format!("Z^{r}")),
        }
        let mut orders: Vec<u128> = self.torsion.iter().map(PrimePower::order).collect();
        orders.sort_unstable();
        terms.extend(orders.iter().map(|q| format!("Z/{q}")));
        write!(f, "{}", terms.join(" + "))
    }
}

impl FromStr for FGAbelianGroup {
    type Err = AbelianError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact == "0" {
            return Ok(Self::trivial());
        }
        if compact.is_empty() {
            return Err(AbelianError::GroupText("empty".into()));
        }
        let mut rank = 0usize;
        let mut orders = Vec::new();
        for term in compact.split('+') {
            let bad = || AbelianError::GroupText(format!("bad term '{term}'"));
            if term == "Z" {
                rank += 1;
            } else if let Some(exp) = term.strip_prefix("Z^") {
                rank += exp.parse::<usize>().map_err(|_| bad())?;
            } else if let Some(q) = term.strip_prefix("Z/") {
                let q: u64 = q.parse().map_err(|_| bad())?;
                orders.push(q);
            } else {
                return Err(bad());
            }
        }
        Self::new(rank, orders)
    }
}

impl Serialize for FGAbelianGroup {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FGAbelianGroup {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Group presentations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter {
    pub generator: usize,
    pub inverse: bool,
}

impl Letter {
    pub fn inverted(self) -> Letter {
        Letter { inverse: !self.inverse, ..self }
    }
}

pub type Word = Vec<Letter>;

/// Finite presentation with single-lowercase-letter generator names.
/// In text form an uppercase letter denotes the inverse generator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct GroupPresentation {
    generators: Vec<char>,
    relators: Vec<Word>,
}

pub const MAX_GENERATORS: usize = 26;

fn check_generator(name: &str) -> Result<char, AbelianError> {
    let mut chars = name.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_lowercase() => Ok(c),
        _ => Err(AbelianError::InvalidGenerator(name.to_string())),
    }
}

impl GroupPresentation {
    /// Builds a presentation from generator names and relator words written
    /// as strings (uppercase = inverse).
    pub fn new<S: AsRef<str>, W: AsRef<str>>(
        generators: &[S],
        relators: &[W],
    ) -> Result<Self, AbelianError> {
        let mut gens: Vec<char> = Vec::with_capacity(generators.len());
        for g in generators {
            let c = check_generator(g.as_ref())?;
            if gens.contains(&c) {
                return Err(AbelianError::DuplicateGenerator(c.to_string()));
            }
            gens.push(c);
        }
        let mut out = Self { generators: gens, relators: Vec::new() };
        for (idx, w) in relators.iter().enumerate() {
            let word = out.parse_word(w.as_ref(), idx)?;
            out.relators.push(word);
        }
        Ok(out)
    }

    /// Free group on `n` generators named `a`, `b`, ... in order.
    pub fn free(n: usize) -> Result<Self, AbelianError> {
        if n > MAX_GENERATORS {
            return Err(AbelianError::InvalidGenerator(format!("generator #{n}")));
        }
        Ok(Self { generators: (0..n).map(index_letter).collect(), relators: Vec::new() })
    }

    /// Same group with generators renamed `a`, `b`, ... by position.
    pub fn canonical_names(&self) -> Self {
        Self { generators: (0..self.generators.len()).map(index_letter).collect(), ..self.clone() }
    }

    /// Parses `a,b|abAB,aab`. Empty relator slots are ignored, so `a|` is
    /// the free group on one generator.
    pub fn parse(text: &str) -> Result<Self, AbelianError> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let (gens, rels) = compact
            .split_once('|')
            .ok_or_else(|| AbelianError::Syntax("expected 'generators|relators'".into()))?;
        let gens: Vec<&str> = gens.split(',').filter(|g| !g.is_empty()).collect();
        let rels: Vec<&str> = rels.split(',').filter(|r| !r.is_empty()).collect();
        Self::new(&gens, &rels)
    }

    pub fn parse_word(&self, text: &str, relator: usize) -> Result<Word, AbelianError> {
        let mut word = Vec::with_capacity(text.len());
        for ch in text.chars() {
            if ch == '1' && text.len() == 1 {
                break;
            }
            let lower = ch.to_ascii_lowercase();
            let generator = self
                .generators
                .iter()
                .position(|&g| g == lower)
                .filter(|_| ch.is_ascii_alphabetic())
                .ok_or_else(|| AbelianError::UnknownLetter { relator, letter: ch.to_string() })?;
            word.push(Letter { generator, inverse: ch.is_ascii_uppercase() });
        }
        Ok(word)
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[char] {
        &self.generators
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    pub fn word_text(&self, word: &[Letter]) -> String {
        if word.is_empty() {
            return "1".to_string();
        }
        word.iter()
            .map(|l| {
                let c = self.generators[l.generator];
                if l.inverse {
                    c.to_ascii_uppercase()
                } else {
                    c
                }
            })
            .collect()
    }

    pub fn with_relator(&self, word: Word) -> Self {
        let mut out = self.clone();
        out.relators.push(word);
        out
    }

    /// Free product; the right-hand generators are appended and renamed by position.
    /// Returns `None` when the result would exceed the generator alphabet.
    pub fn free_product(&self, other: &GroupPresentation) -> Option<Self> {
        let n = self.generators.len() + other.generators.len();
        if n > MAX_GENERATORS {
            return None;
        }
        let offset = self.generators.len();
        let mut relators = self.relators.clone();
        relators.extend(other.relators.iter().map(|w| shift(w, offset)));
        Some(Self { generators: (0..n).map(index_letter).collect(), relators })
    }

    /// Direct product: free product plus commutators between the two generator sets.
    pub fn direct_product(&self, other: &GroupPresentation) -> Option<Self> {
        let mut out = self.free_product(other)?;
        let offset = self.generators.len();
        for i in 0..self.generators.len() {
            for j in 0..other.generators.len() {
                let a = Letter { generator: i, inverse: false };
                let b = Letter { generator: offset + j, inverse: false };
                out.relators.push(vec![a, b, a.inverted(), b.inverted()]);
            }
        }
        Some(out)
    }

    /// Adds a fresh free generator.
    pub fn with_free_generator(&self) -> Option<Self> {
        self.free_product(&Self::free(1).ok()?)
    }

    /// Relator exponent-sum matrix: one row per relator, one column per generator.
    pub fn exponent_matrix(&self) -> IntegerMatrix {
        let mut m = IntegerMatrix::zeros(self.relators.len(), self.generators.len());
        for (r, word) in self.relators.iter().enumerate() {
            for l in word {
                let delta = if l.inverse { -1 } else { 1 };
                let v = m.get(r, l.generator) + delta;
                m.set(r, l.generator, v);
            }
        }
        m
    }

    /// Sound but incomplete triviality test: repeatedly deletes any generator
    /// that occurs as a relator of length one (after free reduction).
    pub fn is_obviously_trivial(&self) -> bool {
        let mut alive: Vec<bool> = vec![true; self.generators.len()];
        let mut relators = self.relators.clone();
        loop {
            let killed = relators.iter().find_map(|w| {
                let reduced = free_reduce(w.iter().copied().filter(|l| alive[l.generator]));
                (reduced.len() == 1).then(|| reduced[0].generator)
            });
            match killed {
                Some(g) => alive[g] = false,
                None => break,
            }
            relators.retain(|w| w.iter().any(|l| alive[l.generator]));
        }
        alive.iter().all(|a| !a)
    }
}

fn shift(word: &[Letter], offset: usize) -> Word {
    word.iter().map(|l| Letter { generator: l.generator + offset, inverse: l.inverse }).collect()
}

pub fn index_letter(i: usize) -> char {
    (b'a' + i as u8) as char
}

pub fn free_reduce(letters: impl IntoIterator<Item = Letter>) -> Word {
    let mut out: Word = Vec::new();
    for l in letters {
        if out.last().is_some_and(|&p| p == l.inverted()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

impl fmt::Display for GroupPresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gens: Vec<String> = self.generators.iter().map(char::to_string).collect();
        let rels: Vec<String> = self.relators.iter().map(|w| self.word_text(w)).collect();
        write!(f, "{}|{}", gens.join(","), rels.join(","))
    }
}

impl Serialize for GroupPresentation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroupPresentation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        GroupPresentation::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Abelianization as the cokernel of the relator exponent-sum matrix.
pub fn abelianization(p: &GroupPresentation) -> Result<FGAbelianGroup, AbelianError> {
    let m = p.exponent_matrix();
    let snf = smith_normal_form(&m);
    let diag = snf.diagonal.diagonal();
    // generators beyond the diagonal are unconstrained
    let extra = p.generator_count() - diag.len();
    FGAbelianGroup::from_diagonal(extra, &diag)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<i64>]) -> IntegerMatrix {
        IntegerMatrix::from_rows(rows).unwrap()
    }

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn snf_identity() {
        let m = mat(&[vec![1, 0], vec![0, 1]]);
        let s = smith_normal_form(&m);
        assert_eq!(s.diagonal, m);
        assert_eq!(s.left, IntegerMatrix::identity(2));
        assert_eq!(s.right, IntegerMatrix::identity(2));
    }

    #[test]
    fn snf_zero() {
        let s = smith_normal_form(&mat(&[vec![0]]));
        assert_eq!(s.diagonal.diagonal(), ints(&[0]));
    }

    #[test]
    fn snf_two_by_two() {
        let m = mat(&[vec![2, 4], vec![6, 8]]);
        let s = smith_normal_form(&m);
        assert_eq!(s.diagonal.diagonal(), ints(&[2, 4]));
        assert!(s.diagonal.is_diagonal());
        assert_eq!(s.left.mul(&m).unwrap().mul(&s.right).unwrap(), s.diagonal);
        assert!(s.left.is_unimodular() && s.right.is_unimodular());
    }

    #[test]
    fn snf_empty() {
        let s = smith_normal_form(&IntegerMatrix::zeros(0, 3));
        assert!(s.diagonal.is_empty());
        assert_eq!(s.right, IntegerMatrix::identity(3));
    }

    #[test]
    fn snf_needs_divisibility_fix() {
        // diag(2, 3) is diagonal but not in normal form
        let s = smith_normal_form(&mat(&[vec![2, 0], vec![0, 3]]));
        assert_eq!(s.diagonal.diagonal(), ints(&[1, 6]));
    }

    #[test]
    fn determinant_examples() {
        assert_eq!(mat(&[vec![2, 4], vec![6, 8]]).determinant(), Some(BigInt::from(-8)));
        assert_eq!(mat(&[vec![0, 1], vec![1, 0]]).determinant(), Some(BigInt::from(-1)));
        assert_eq!(
            mat(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 10]]).determinant(),
            Some(BigInt::from(-3))
        );
        assert_eq!(mat(&[vec![1, 2]]).determinant(), None);
    }

    #[test]
    fn abelianization_examples() {
        let p = GroupPresentation::new(&["a", "b"], &["abAB"]).unwrap();
        assert_eq!(abelianization(&p).unwrap(), FGAbelianGroup::free(2));
        let p = GroupPresentation::new(&["a"], &["aaaaa"]).unwrap();
        assert_eq!(abelianization(&p).unwrap(), FGAbelianGroup::cyclic(5));
        let p = GroupPresentation::new(&["a", "b"], &["aaBBB"]).unwrap();
        assert_eq!(abelianization(&p).unwrap(), FGAbelianGroup::free(1));
        let p = GroupPresentation::parse("|").unwrap();
        assert!(abelianization(&p).unwrap().is_trivial());
    }

    #[test]
    fn malformed_word_names_letter() {
        let err = GroupPresentation::new(&["a", "b"], &["ab", "abc"]).unwrap_err();
        assert_eq!(err, AbelianError::UnknownLetter { relator: 1, letter: "c".into() });
        let err = GroupPresentation::parse("a|a2").unwrap_err();
        assert_eq!(err, AbelianError::UnknownLetter { relator: 0, letter: "2".into() });
        assert!(matches!(
            GroupPresentation::new(&["ab"], &[] as &[&str]),
            Err(AbelianError::InvalidGenerator(_))
        ));
        assert!(matches!(GroupPresentation::parse("a,a|"), Err(AbelianError::DuplicateGenerator(_))));
    }

    #[test]
    fn mod2_dims() {
        let g = FGAbelianGroup::new(1, [4, 3]).unwrap();
        assert_eq!(mod2_hom_ext_dims(&g), (2, 1));
        assert_eq!(mod2_hom_ext_dims(&FGAbelianGroup::trivial()), (0, 0));
        for k in 1..6 {
            let g = FGAbelianGroup::new(0, [1 << k, 1 << k]).unwrap();
            assert_eq!(mod2_hom_ext_dims(&g), (2, 2));
        }
        // Z/6 = Z/2 + Z/3 has one 2-primary summand
        assert_eq!(mod2_hom_ext_dims(&FGAbelianGroup::cyclic(6)), (1, 1));
    }

    #[test]
    fn direct_sum_examples() {
        let z = FGAbelianGroup::free(1);
        let z2 = FGAbelianGroup::cyclic(2);
        let s = direct_sum(&z, &z2);
        assert_eq!(s.rank(), 1);
        assert_eq!(s.torsion(), &[PrimePower { prime: 2, exponent: 1 }]);
        let nine = FGAbelianGroup::new(0, [9, 9]).unwrap();
        let s = direct_sum(&nine, &z2);
        assert_eq!(s.to_string(), "Z/2 + Z/9 + Z/9");
        assert_eq!(direct_sum(&nine, &FGAbelianGroup::trivial()), nine);
    }

    #[test]
    fn text_form() {
        let g = FGAbelianGroup::new(3, [12, 9]).unwrap();
        assert_eq!(g.to_string(), "Z^3 + Z/3 + Z/4 + Z/9");
        assert_eq!(g.invariant_factors(), vec![3, 36]);
        assert_eq!("Z^3+Z/36+Z/3".parse::<FGAbelianGroup>().unwrap(), g);
        assert_eq!("0".parse::<FGAbelianGroup>().unwrap(), FGAbelianGroup::trivial());
        assert_eq!("Z".parse::<FGAbelianGroup>().unwrap().to_string(), "Z");
        assert!("Z/1".parse::<FGAbelianGroup>().is_err());
        assert!("Q".parse::<FGAbelianGroup>().is_err());
    }

    #[test]
    fn presentation_text_and_products() {
        let p = GroupPresentation::parse("a,b|abAB,aab").unwrap();
        assert_eq!(p.to_string(), "a,b|abAB,aab");
        let q = GroupPresentation::parse("a|aaa").unwrap();
        let fp = p.free_product(&q).unwrap();
        assert_eq!(fp.to_string(), "a,b,c|abAB,aab,ccc");
        let dp = q.direct_product(&GroupPresentation::free(1).unwrap()).unwrap();
        assert_eq!(abelianization(&dp).unwrap().to_string(), "Z + Z/3");
    }

    #[test]
    fn obvious_triviality() {
        assert!(GroupPresentation::parse("a,b|a,Ab").unwrap().is_obviously_trivial());
        assert!(GroupPresentation::parse("|").unwrap().is_obviously_trivial());
        assert!(!GroupPresentation::parse("a|aa").unwrap().is_obviously_trivial());
    }
}
