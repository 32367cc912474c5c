//! Formal cohomology rings of closed oriented 6-manifolds, truncated to the
//! free parts of `H^2` and `H^4`, and the Chern classes of the holomorphic
//! and anti-holomorphic tangent bundles.
//!
//! `p_1` is stored as `c_2` of the complexified tangent bundle without the
//! conventional sign. Only its vanishing is ever consumed, so the sign
//! convention does not matter here.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abelian::IntegerMatrix;
use crate::manifolds::TriState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CohomologyError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("cup product H^2 x H^2 -> H^4 is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("triple product is not symmetric at ({0}, {1}, {2})")]
    NotTotallySymmetric(usize, usize, usize),
    #[error("pairing H^2 x H^4 -> Z is not perfect")]
    PairingNotPerfect,
    #[error("integer overflow in characteristic class arithmetic")]
    Overflow,
    #[error("input document: {0}")]
    Json(String),
}

/// Free parts of `H^2`, `H^4` with bases `e_i`, `f_j`, the cup product
/// `e_i e_j = sum_l cup22[i][j][l] f_l` and the pairing
/// `<e_i f_j, [M]> = pair24[i][j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyRing6 {
    pub b2: usize,
    pub b4: usize,
    pub cup22: Vec<Vec<Vec<i64>>>,
    pub pair24: Vec<Vec<i64>>,
    #[serde(default)]
    pub h3_has_2torsion: bool,
}

/// Chern classes of the holomorphic tangent bundle in ring coordinates;
/// `c3` is its value on the fundamental class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormalChernData {
    pub c1: Vec<i64>,
    pub c2: Vec<i64>,
    pub c3: i64,
}

/// Chern classes of the complexified tangent bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexifiedChern {
    pub c1: Vec<i128>,
    pub c2: Vec<i128>,
    pub c3: i128,
}

impl ComplexifiedChern {
    pub fn is_zero(&self) -> bool {
        self.c1.iter().chain(&self.c2).all(|&x| x == 0) && self.c3 == 0
    }
}

fn add(a: i128, b: i128) -> Result<i128, CohomologyError> {
    a.checked_add(b).ok_or(CohomologyError::Overflow)
}

fn mul(a: i128, b: i128) -> Result<i128, CohomologyError> {
    a.checked_mul(b).ok_or(CohomologyError::Overflow)
}

impl CohomologyRing6 {
    pub fn validate(&self) -> Result<(), CohomologyError> {
        let (b2, b4) = (self.b2, self.b4);
        if self.cup22.len() != b2
            || self.cup22.iter().any(|row| row.len() != b2 || row.iter().any(|v| v.len() != b4))
        {
            return Err(CohomologyError::Shape(format!("cup22 must be {b2} x {b2} x {b4}")));
        }
        if self.pair24.len() != b2 || self.pair24.iter().any(|row| row.len() != b4) {
            return Err(CohomologyError::Shape(format!("pair24 must be {b2} x {b4}")));
        }
        for i in 0..b2 {
            for j in 0..b2 {
                if self.cup22[i][j] != self.cup22[j][i] {
                    return Err(CohomologyError::NotSymmetric(i, j));
                }
            }
        }
        // Poincare duality on free parts
        if b2 != b4 {
            return Err(CohomologyError::PairingNotPerfect);
        }
        let pairing = IntegerMatrix::from_rows(&self.pair24).map_err(|e| CohomologyError::Shape(e.to_string()))?;
        if !pairing.is_unimodular() {
            return Err(CohomologyError::PairingNotPerfect);
        }
        for i in 0..b2 {
            for j in 0..b2 {
                for k in 0..b2 {
                    let t = self.triple(i, j, k)?;
                    if t != self.triple(j, k, i)? || t != self.triple(k, i, j)? {
                        return Err(CohomologyError::NotTotallySymmetric(i, j, k));
                    }
                }
            }
        }
        Ok(())
    }

    /// `<e_i e_j e_k, [M]>`
    fn triple(&self, i: usize, j: usize, k: usize) -> Result<i128, CohomologyError> {
        (0..self.b4).try_fold(0i128, |acc, l| {
            add(acc, mul(self.pair24[i][l] as i128, self.cup22[j][k][l] as i128)?)
        })
    }

    pub fn cup(&self, x: &[i128], y: &[i128]) -> Result<Vec<i128>, CohomologyError> {
        let mut out = vec![0i128; self.b4];
        for i in 0..self.b2 {
            for j in 0..self.b2 {
                let xy = mul(x[i], y[j])?;
                if xy == 0 {
                    continue;
                }
                for (l, slot) in out.iter_mut().enumerate() {
                    *slot = add(*slot, mul(xy, self.cup22[i][j][l] as i128)?)?;
                }
            }
        }
        Ok(out)
    }

    pub fn pair(&self, x: &[i128], w: &[i128]) -> Result<i128, CohomologyError> {
        let mut acc = 0i128;
        for i in 0..self.b2 {
            for j in 0..self.b4 {
                acc = add(acc, mul(mul(x[i], w[j])?, self.pair24[i][j] as i128)?)?;
            }
        }
        Ok(acc)
    }

    fn check(&self, c: &FormalChernData) -> Result<(), CohomologyError> {
        if c.c1.len() != self.b2 || c.c2.len() != self.b4 {
            return Err(CohomologyError::Shape(format!(
                "chern data has lengths ({}, {}), ring ranks are ({}, {})",
                c.c1.len(),
                c.c2.len(),
                self.b2,
                self.b4
            )));
        }
        Ok(())
    }
}

/// Element of `H^0 + H^2 + H^4 + H^6` in coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Total {
    d0: i128,
    d2: Vec<i128>,
    d4: Vec<i128>,
    d6: i128,
}

impl Total {
    fn from_chern(c: &FormalChernData) -> Self {
        Total {
            d0: 1,
            d2: c.c1.iter().map(|&x| x as i128).collect(),
            d4: c.c2.iter().map(|&x| x as i128).collect(),
            d6: c.c3 as i128,
        }
    }

    fn scaled(v: &[i128], s: i128) -> Result<Vec<i128>, CohomologyError> {
        v.iter().map(|&x| mul(x, s)).collect()
    }

    fn sum(a: &[i128], b: &[i128]) -> Result<Vec<i128>, CohomologyError> {
        a.iter().zip(b).map(|(&x, &y)| add(x, y)).collect()
    }

    fn product(&self, other: &Total, ring: &CohomologyRing6) -> Result<Total, CohomologyError> {
        let d2 = Self::sum(&Self::scaled(&other.d2, self.d0)?, &Self::scaled(&self.d2, other.d0)?)?;
        let d4 = Self::sum(
            &Self::sum(&Self::scaled(&other.d4, self.d0)?, &Self::scaled(&self.d4, other.d0)?)?,
            &ring.cup(&self.d2, &other.d2)?,
        )?;
        let d6 = [
            mul(self.d0, other.d6)?,
            mul(other.d0, self.d6)?,
            ring.pair(&self.d2, &other.d4)?,
            ring.pair(&other.d2, &self.d4)?,
        ]
        .into_iter()
        .try_fold(0i128, add)?;
        Ok(Total { d0: mul(self.d0, other.d0)?, d2, d4, d6 })
    }
}

/// Chern classes of the conjugate bundle: odd classes change sign.
pub fn conjugate_chern(c: &FormalChernData) -> FormalChernData {
    FormalChernData { c1: c.c1.iter().map(|x| -x).collect(), c2: c.c2.clone(), c3: -c.c3 }
}

/// Whitney product of the holomorphic and anti-holomorphic total Chern
/// classes, computed in the ring.
pub fn complexified_chern(c: &FormalChernData, ring: &CohomologyRing6) -> Result<ComplexifiedChern, CohomologyError> {
    ring.check(c)?;
    let holo = Total::from_chern(c);
    let anti = Total::from_chern(&conjugate_chern(c));
    let t = holo.product(&anti, ring)?;
    Ok(ComplexifiedChern { c1: t.d2, c2: t.d4, c3: t.d6 })
}

/// Vanishing of the first Pontrjagin class, decided on free parts.
pub fn p1_is_zero(c: &FormalChernData, ring: &CohomologyRing6) -> Result<TriState, CohomologyError> {
    let cc = complexified_chern(c, ring)?;
    Ok(TriState::from_bool(cc.c2.iter().all(|&x| x == 0)))
}

/// JSON document describing a closed oriented 6-manifold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SixManifoldInput {
    #[serde(flatten)]
    pub ring: CohomologyRing6,
    pub c1: Vec<i64>,
    pub c2: Vec<i64>,
    pub c3: i64,
    /// Euler characteristic, when the caller knows it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler: Option<i64>,
    /// Set when the characteristic classes have torsion components that the
    /// free-part model cannot see.
    #[serde(default)]
    pub torsion_classes: bool,
}

impl SixManifoldInput {
    pub fn from_json(text: &str) -> Result<Self, CohomologyError> {
        let input: SixManifoldInput = serde_json::from_str(text).map_err(|e| CohomologyError::Json(e.to_string()))?;
        input.ring.validate()?;
        input.ring.check(&input.chern())?;
        Ok(input)
    }

    pub fn chern(&self) -> FormalChernData {
        FormalChernData { c1: self.c1.clone(), c2: self.c2.clone(), c3: self.c3 }
    }

    pub fn p1_zero(&self) -> Result<TriState, CohomologyError> {
        if self.torsion_classes {
            return Ok(TriState::Unknown);
        }
        p1_is_zero(&self.chern(), &self.ring)
    }
}

/// `CP^3`-like ring: `H^2 = Z h`, `H^4 = Z h^2`, `h^3 = 1`.
pub fn projective_three_ring() -> CohomologyRing6 {
    CohomologyRing6 { b2: 1, b4: 1, cup22: vec![vec![vec![1]]], pair24: vec![vec![1]], h3_has_2torsion: false }
}

/// Ring with `b2 = b4 = 0`, e.g. `S^3 x S^3`.
pub fn empty_ring() -> CohomologyRing6 {
    CohomologyRing6 { b2: 0, b4: 0, cup22: vec![], pair24: vec![], h3_has_2torsion: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp3_chern() -> FormalChernData {
        FormalChernData { c1: vec![4], c2: vec![6], c3: 4 }
    }

    #[test]
    fn conjugation() {
        let zero = FormalChernData { c1: vec![0], c2: vec![0], c3: 0 };
        assert_eq!(conjugate_chern(&zero), zero);
        assert_eq!(conjugate_chern(&cp3_chern()), FormalChernData { c1: vec![-4], c2: vec![6], c3: -4 });
        assert_eq!(conjugate_chern(&conjugate_chern(&cp3_chern())), cp3_chern());
    }

    #[test]
    fn projective_space() {
        let ring = projective_three_ring();
        ring.validate().unwrap();
        let cc = complexified_chern(&cp3_chern(), &ring).unwrap();
        assert_eq!(cc, ComplexifiedChern { c1: vec![0], c2: vec![-4], c3: 0 });
        assert_eq!(p1_is_zero(&cp3_chern(), &ring).unwrap(), TriState::No);
    }

    #[test]
    fn trivial_data() {
        let ring = empty_ring();
        ring.validate().unwrap();
        let c = FormalChernData { c1: vec![], c2: vec![], c3: 0 };
        assert!(complexified_chern(&c, &ring).unwrap().is_zero());
        assert_eq!(p1_is_zero(&c, &ring).unwrap(), TriState::Yes);
        let c = FormalChernData { c1: vec![0], c2: vec![0], c3: 7 };
        assert_eq!(p1_is_zero(&c, &projective_three_ring()).unwrap(), TriState::Yes);
    }

    #[test]
    fn validation_errors() {
        let mut ring = projective_three_ring();
        ring.pair24 = vec![vec![2]];
        assert_eq!(ring.validate(), Err(CohomologyError::PairingNotPerfect));
        let ring = CohomologyRing6 {
            b2: 2,
            b4: 2,
            cup22: vec![vec![vec![1, 0], vec![0, 1]], vec![vec![0, 0], vec![0, 0]]],
            pair24: vec![vec![1, 0], vec![0, 1]],
            h3_has_2torsion: false,
        };
        assert_eq!(ring.validate(), Err(CohomologyError::NotSymmetric(0, 1)));
        let c = FormalChernData { c1: vec![1, 2], c2: vec![0], c3: 0 };
        assert!(matches!(complexified_chern(&c, &projective_three_ring()), Err(CohomologyError::Shape(_))));
    }

    #[test]
    fn json_document() {
        let doc = r#"{"b2":1,"b4":1,"cup22":[[[1]]],"pair24":[[1]],"h3_has_2torsion":false,"c1":[4],"c2":[6],"c3":4}"#;
        let input = SixManifoldInput::from_json(doc).unwrap();
        assert_eq!(input.p1_zero().unwrap(), TriState::No);
        assert!(SixManifoldInput::from_json(r#"{"b2":1}"#).is_err());
    }
}
