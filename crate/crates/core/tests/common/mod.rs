//! Test-side oracles, written without the library's algorithms, and
//! random generators for descriptors.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::RngExt;

use totreal::manifolds::{BlockAtom, Framing, ManifoldDescriptor, Node, TriState};

// ---------------------------------------------------------------------------
// Integer oracles
// ---------------------------------------------------------------------------

pub fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Determinant by cofactor expansion along the first row.
pub fn laplace_det(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    match n {
        0 => 1,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            let mut total = 0;
            for (j, &a) in m[0].iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let minor: Vec<Vec<i128>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, &v)| v).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                total += sign * a * laplace_det(&minor);
            }
            total
        }
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Nonzero invariant factors from determinantal divisors: `d_k` is the gcd
/// of all `k x k` minors and `s_k = d_k / d_{k-1}`.
pub fn invariant_factors_by_minors(m: &[Vec<i64>]) -> Vec<i128> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut prev = 1i128;
    let mut out = Vec::new();
    for k in 1..=rows.min(cols) {
        let mut d = 0i128;
        for rs in subsets(rows, k) {
            for cs in subsets(cols, k) {
                let minor: Vec<Vec<i128>> = rs.iter().map(|&r| cs.iter().map(|&c| m[r][c] as i128).collect()).collect();
                d = gcd(d, laplace_det(&minor));
            }
        }
        if d == 0 {
            break;
        }
        out.push(d / prev);
        prev = d;
    }
    out
}

// ---------------------------------------------------------------------------
// Homology text oracles
// ---------------------------------------------------------------------------

/// `(rank, cyclic torsion orders)` read from the group text form.
pub fn parse_group_text(text: &str) -> (usize, Vec<u128>) {
    let mut rank = 0;
    let mut torsion = Vec::new();
    if text.trim() == "0" {
        return (0, torsion);
    }
    for part in text.split('+').map(str::trim) {
        if let Some(q) = part.strip_prefix("Z/") {
            torsion.push(q.parse().expect("torsion order"));
        } else if let Some(r) = part.strip_prefix("Z^") {
            rank += r.parse::<usize>().expect("rank");
        } else if part == "Z" {
            rank += 1;
        } else {
            panic!("unreadable group text {text:?}");
        }
    }
    (rank, torsion)
}

/// Homology groups as text, `None` where unknown.
pub fn homology_texts(d: &ManifoldDescriptor) -> Vec<Option<String>> {
    d.record().homology.0.iter().map(|g| g.as_ref().map(|g| g.to_string())).collect()
}

/// Euler characteristic as the alternating sum of ranks.
pub fn oracle_euler(h: &[Option<String>]) -> Option<i64> {
    let mut chi = 0i64;
    for (i, g) in h.iter().enumerate() {
        let (rank, _) = parse_group_text(g.as_ref()?);
        chi += if i % 2 == 0 { rank as i64 } else { -(rank as i64) };
    }
    Some(chi)
}

/// `dim H^i(M; Z/2)` by universal coefficients, counting even cyclic orders.
pub fn oracle_mod2_dim(h: &[Option<String>], i: usize) -> Option<usize> {
    let (rank, torsion) = parse_group_text(h.get(i)?.as_ref()?);
    let hom = rank + torsion.iter().filter(|q| *q % 2 == 0).count();
    let ext = if i == 0 {
        0
    } else {
        let (_, t) = parse_group_text(h.get(i - 1)?.as_ref()?);
        t.iter().filter(|q| *q % 2 == 0).count()
    };
    Some(hom + ext)
}

/// Semi-characteristic of an odd-dimensional manifold by direct recount.
pub fn oracle_semi_char(h: &[Option<String>]) -> Option<u8> {
    let n = h.len() - 1;
    assert!(n % 2 == 1);
    let k = (n - 1) / 2;
    let mut total = 0;
    for i in 0..=k {
        total += oracle_mod2_dim(h, i)?;
    }
    Some((total % 2) as u8)
}

// ---------------------------------------------------------------------------
// Descriptor generators
// ---------------------------------------------------------------------------

pub fn atoms_of_dim(n: u32) -> Vec<BlockAtom> {
    let mut out = vec![BlockAtom::Sphere { n }, BlockAtom::Torus { n }];
    match n {
        4 => out.push(BlockAtom::Cp2Cp2Bar),
        5 => {
            out.extend([BlockAtom::Wu, BlockAtom::TwistedS3S2]);
            for p in [2, 3, 5, 7] {
                out.push(BlockAtom::Mpk { p, k: 1 });
            }
            out.extend([BlockAtom::Mpk { p: 3, k: 2 }, BlockAtom::Xk { k: 1 }, BlockAtom::Xk { k: 2 }]);
        }
        _ => {}
    }
    out
}

/// The small catalog the exhaustive sweeps run over.
pub fn small_catalog() -> Vec<BlockAtom> {
    let mut out = Vec::new();
    for n in 1..=6 {
        out.push(BlockAtom::Sphere { n });
    }
    for n in 1..=4 {
        out.push(BlockAtom::Torus { n });
    }
    out.extend([
        BlockAtom::Wu,
        BlockAtom::TwistedS3S2,
        BlockAtom::Mpk { p: 3, k: 1 },
        BlockAtom::Mpk { p: 2, k: 2 },
        BlockAtom::Xk { k: 1 },
        BlockAtom::Cp2Cp2Bar,
    ]);
    out
}

pub fn random_atom(rng: &mut StdRng, n: u32) -> ManifoldDescriptor {
    let atoms = atoms_of_dim(n);
    ManifoldDescriptor::atom(*atoms.choose(rng).expect("nonempty")).expect("catalog atom")
}

fn random_label(rng: &mut StdRng, d: &ManifoldDescriptor, index: u32) -> Option<String> {
    if rng.random_bool(0.3) {
        return None;
    }
    match index {
        1 => {
            let g = d.record().fundamental_group.as_ref()?;
            let n = g.generator_count();
            if n == 0 {
                return Some("1".into());
            }
            let len = rng.random_range(1..=4);
            Some(
                (0..len)
                    .map(|_| {
                        let c = (b'a' + rng.random_range(0..n) as u8) as char;
                        if rng.random_bool(0.5) {
                            c.to_ascii_uppercase()
                        } else {
                            c
                        }
                    })
                    .collect(),
            )
        }
        2 => Some(["2g", "4g", "8g", "3g"].choose(rng).expect("nonempty").to_string()),
        _ => Some("pt".into()),
    }
}

/// Random descriptor of dimension `n`; `depth` bounds the nesting.
pub fn random_descriptor(rng: &mut StdRng, n: u32, depth: u32) -> ManifoldDescriptor {
    if depth == 0 || rng.random_bool(0.3) {
        return random_atom(rng, n);
    }
    for _ in 0..8 {
        let choice = rng.random_range(0..6);
        let built = match choice {
            0 | 1 => {
                let a = random_descriptor(rng, n, depth - 1);
                let b = random_descriptor(rng, n, depth - 1);
                let rev = rng.random_bool(0.2) && a.record().orientable.is_yes() && b.record().orientable.is_yes();
                ManifoldDescriptor::connected_sum(&a, &b, rev).ok()
            }
            2 if n >= 2 => {
                let k = rng.random_range(1..n);
                let a = random_descriptor(rng, k, depth - 1);
                let b = random_descriptor(rng, n - k, depth - 1);
                ManifoldDescriptor::product(&a, &b).ok()
            }
            3 if n >= 2 => {
                let index = rng.random_range(0..=2.min(n - 1));
                let base = random_descriptor(rng, n, depth - 1);
                let framing = if rng.random_bool(0.7) { Framing::Canonical } else { Framing::Other };
                let label = random_label(rng, &base, index);
                ManifoldDescriptor::surgery(&base, index, framing, label).ok()
            }
            4 if n >= 2 => {
                let k = rng.random_range(1..=(n - 1).min(3));
                let base = random_descriptor(rng, n - k, depth - 1);
                ManifoldDescriptor::torus_bundle_total(&base, k).ok()
            }
            5 => {
                let inner = random_descriptor(rng, n, depth - 1);
                if inner.record().orientable.is_yes() {
                    ManifoldDescriptor::reversed(&inner).ok()
                } else {
                    None
                }
            }
            _ => None,
        };
        if let Some(d) = built {
            return d;
        }
    }
    random_atom(rng, n)
}

/// Descriptor built only from atoms, sums and products (homology fully tracked
/// whenever a free factor is present).
pub fn random_tracked(rng: &mut StdRng, n: u32, depth: u32) -> ManifoldDescriptor {
    if depth == 0 || rng.random_bool(0.35) {
        return random_atom(rng, n);
    }
    if n >= 2 && rng.random_bool(0.4) {
        let k = rng.random_range(1..n);
        let a = random_tracked(rng, k, depth - 1);
        let b = random_tracked(rng, n - k, depth - 1);
        return ManifoldDescriptor::product(&a, &b).expect("product");
    }
    let a = random_tracked(rng, n, depth - 1);
    let b = random_tracked(rng, n, depth - 1);
    ManifoldDescriptor::connected_sum(&a, &b, rng.random_bool(0.2)).expect("sum")
}

pub fn is_orientable(d: &ManifoldDescriptor) -> bool {
    d.record().orientable == TriState::Yes
}

pub fn node_kind(d: &ManifoldDescriptor) -> &'static str {
    match d.node() {
        Node::Atom(_) => "atom",
        Node::ConnectedSum { .. } => "sum",
        Node::Product { .. } => "product",
        Node::Surgery { .. } => "surgery",
        Node::TorusBundleTotal { .. } => "tbundle",
        Node::Reversed(_) => "rev",
    }
}
