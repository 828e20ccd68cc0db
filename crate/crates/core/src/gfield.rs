//! Arithmetic in GF(2^p) through powers of the companion matrix of a
//! primitive polynomial.
//!
//! A field element is stored as a `p`-bit word, bit `s` holding the
//! coefficient of `α^s`. Nonzero elements are also addressed by their
//! exponent `k`, with `α^k` represented by the binary matrix `A^k`, where `A`
//! is the companion matrix acting as multiplication by `α` on the basis
//! `{1, α, …, α^(p-1)}`.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported extension degree.
pub const MAX_DEGREE: u32 = 16;

/// Primitive polynomials over GF(2) for p = 1..=16, bit `i` holding the
/// coefficient of `x^i`.
const PRIMITIVE_POLYS: [u32; 16] = [
    0x3,     // x + 1
    0x7,     // x^2 + x + 1
    0xb,     // x^3 + x + 1
    0x13,    // x^4 + x + 1
    0x25,    // x^5 + x^2 + 1
    0x43,    // x^6 + x + 1
    0x83,    // x^7 + x + 1
    0x11d,   // x^8 + x^4 + x^3 + x^2 + 1
    0x211,   // x^9 + x^4 + 1
    0x409,   // x^10 + x^3 + 1
    0x805,   // x^11 + x^2 + 1
    0x1053,  // x^12 + x^6 + x^4 + x + 1
    0x201b,  // x^13 + x^4 + x^3 + x + 1
    0x4443,  // x^14 + x^10 + x^6 + x + 1
    0x8003,  // x^15 + x + 1
    0x1100b, // x^16 + x^12 + x^3 + x + 1
];

/// Returns the built-in primitive polynomial for extension degree `p`.
pub fn primitive_poly(p: u32) -> Option<u32> {
    if (1..=MAX_DEGREE).contains(&p) {
        Some(PRIMITIVE_POLYS[p as usize - 1])
    } else {
        None
    }
}

/// A vector over GF(2) of length at most [`MAX_DEGREE`], packed in one word.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    len: u32,
    bits: u32,
}

impl BitVector {
    pub fn new(len: u32, bits: u32) -> Self {
        assert!(len <= 32);
        let mask = if len == 32 { u32::MAX } else { (1u32 << len) - 1 };
        BitVector {
            len,
            bits: bits & mask,
        }
    }

    pub fn zero(len: u32) -> Self {
        BitVector { len, bits: 0 }
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn get(&self, i: u32) -> bool {
        (self.bits >> i) & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector(")?;
        for i in 0..self.len {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        write!(f, ")")
    }
}

/// A square matrix over GF(2), stored row-major with one word per row.
///
/// Bit `s` of `rows[t]` is the entry in row `t`, column `s`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMatrix {
    dim: u32,
    rows: Vec<u32>,
}

impl BinaryMatrix {
    pub fn identity(dim: u32) -> Self {
        BinaryMatrix {
            dim,
            rows: (0..dim).map(|t| 1u32 << t).collect(),
        }
    }

    /// Builds a matrix from its columns, each a packed word.
    pub fn from_columns(dim: u32, cols: &[u32]) -> Self {
        assert_eq!(cols.len(), dim as usize);
        let mut rows = vec![0u32; dim as usize];
        for (s, &col) in cols.iter().enumerate() {
            for (t, row) in rows.iter_mut().enumerate() {
                if (col >> t) & 1 == 1 {
                    *row |= 1 << s;
                }
            }
        }
        BinaryMatrix { dim, rows }
    }

    pub fn from_rows(dim: u32, rows: Vec<u32>) -> Self {
        assert_eq!(rows.len(), dim as usize);
        BinaryMatrix { dim, rows }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn get(&self, row: u32, col: u32) -> bool {
        (self.rows[row as usize] >> col) & 1 == 1
    }

    /// Row `t` as a packed mask over columns.
    #[inline]
    pub fn row(&self, t: u32) -> u32 {
        self.rows[t as usize]
    }

    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    /// Column `s` as a packed mask over rows.
    pub fn column(&self, s: u32) -> u32 {
        self.rows
            .iter()
            .enumerate()
            .fold(0, |acc, (t, &r)| acc | (((r >> s) & 1) << t))
    }

    #[inline]
    pub fn apply(&self, v: u32) -> u32 {
        self.rows
            .iter()
            .enumerate()
            .fold(0, |acc, (t, &r)| acc | (((r & v).count_ones() & 1) << t))
    }

    pub fn mul(&self, other: &BinaryMatrix) -> BinaryMatrix {
        assert_eq!(self.dim, other.dim);
        // Row t of the product is the XOR of the rows of `other` selected by row t of `self`.
        let rows = self
            .rows
            .iter()
            .map(|&r| {
                (0..self.dim)
                    .filter(|&s| (r >> s) & 1 == 1)
                    .fold(0, |acc, s| acc ^ other.rows[s as usize])
            })
            .collect();
        BinaryMatrix {
            dim: self.dim,
            rows,
        }
    }

    pub fn rank(&self) -> u32 {
        let mut rows = self.rows.clone();
        let mut rank = 0;
        for col in 0..self.dim {
            let bit = 1u32 << col;
            let Some(pivot) = (rank as usize..rows.len()).find(|&i| rows[i] & bit != 0) else {
                continue;
            };
            rows.swap(rank as usize, pivot);
            let pr = rows[rank as usize];
            for (i, r) in rows.iter_mut().enumerate() {
                if i != rank as usize && *r & bit != 0 {
                    *r ^= pr;
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn is_identity(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(t, &r)| r == 1u32 << t)
    }
}

impl fmt::Debug for BinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMatrix {}x{} [", self.dim, self.dim)?;
        for t in 0..self.dim {
            write!(f, "  ")?;
            for s in 0..self.dim {
                write!(f, "{}", u8::from(self.get(t, s)))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// GF(2^p) with exponent/log tables and the cached companion powers
/// `A^0, …, A^(q-2)`.
#[derive(Clone)]
pub struct Field {
    p: u32,
    q: u32,
    poly: u32,
    generator: BinaryMatrix,
    exp: Vec<u32>,
    log: Vec<u32>,
    powers: Vec<BinaryMatrix>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("p", &self.p)
            .field("q", &self.q)
            .field("poly", &format_args!("{:#x}", self.poly))
            .finish()
    }
}

impl Field {
    /// Builds GF(2^p) from the built-in primitive polynomial table.
    pub fn new(p: u32) -> Result<Self> {
        let poly = primitive_poly(p).ok_or(Error::UnsupportedDegree(p))?;
        Self::with_poly(p, poly)
    }

    /// Builds GF(2^p) from an explicit degree-`p` polynomial, rejecting it
    /// unless it is primitive.
    pub fn with_poly(p: u32, poly: u32) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&p) {
            return Err(Error::UnsupportedDegree(p));
        }
        if poly >> p != 1 {
            return Err(Error::Config(format!(
                "polynomial {poly:#x} does not have degree {p}"
            )));
        }
        let q = 1u32 << p;
        let order = q - 1;
        let mut exp = Vec::with_capacity(order as usize);
        let mut log = vec![u32::MAX; q as usize];
        let mut x = 1u32;
        for k in 0..order {
            if log[x as usize] != u32::MAX {
                return Err(Error::Config(format!(
                    "polynomial {poly:#x} is not primitive for p = {p}"
                )));
            }
            log[x as usize] = k;
            exp.push(x);
            x = mul_alpha(x, p, poly);
        }
        if x != 1 {
            return Err(Error::Config(format!(
                "polynomial {poly:#x} is not primitive for p = {p}"
            )));
        }

        // Column s of A^k is the field element α^(k+s).
        let powers: Vec<BinaryMatrix> = (0..order)
            .map(|k| {
                let cols: Vec<u32> = (0..p).map(|s| exp[((k + s) % order) as usize]).collect();
                BinaryMatrix::from_columns(p, &cols)
            })
            .collect();
        let generator = if order == 1 {
            powers[0].clone()
        } else {
            powers[1].clone()
        };

        Ok(Field {
            p,
            q,
            poly,
            generator,
            exp,
            log,
            powers,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Multiplicative group order `q - 1`.
    pub fn order(&self) -> u32 {
        self.q - 1
    }

    pub fn primitive_poly(&self) -> u32 {
        self.poly
    }

    /// The companion matrix `A`.
    pub fn generator(&self) -> &BinaryMatrix {
        &self.generator
    }

    /// Reduces an arbitrary (possibly negative) exponent into `0..q-1`.
    #[inline]
    pub fn reduce(&self, k: i64) -> u32 {
        k.rem_euclid(i64::from(self.order())) as u32
    }

    /// `(k1 + k2) mod (q - 1)`.
    #[inline]
    pub fn exponent_add(&self, k1: i64, k2: i64) -> u32 {
        self.reduce(self.reduce(k1) as i64 + self.reduce(k2) as i64)
    }

    /// `A^(k mod (q-1))`.
    #[inline]
    pub fn companion_power(&self, k: i64) -> &BinaryMatrix {
        &self.powers[self.reduce(k) as usize]
    }

    /// All cached powers, indexed by exponent.
    pub fn powers(&self) -> &[BinaryMatrix] {
        &self.powers
    }

    /// `A^k · v` over GF(2).
    pub fn mat_vec(&self, k: i64, v: BitVector) -> Result<BitVector> {
        if v.len() != self.p {
            return Err(Error::LengthMismatch {
                expected: self.p as usize,
                found: v.len() as usize,
            });
        }
        Ok(BitVector::new(self.p, self.companion_power(k).apply(v.bits())))
    }

    /// Binary image of `α^k`.
    pub fn element(&self, k: i64) -> BitVector {
        BitVector::new(self.p, self.exp[self.reduce(k) as usize])
    }

    /// Discrete log of a nonzero packed element.
    pub fn log(&self, x: u32) -> Option<u32> {
        match self.log.get(x as usize) {
            Some(&k) if k != u32::MAX => Some(k),
            _ => None,
        }
    }

    /// Field product of two packed elements via log tables.
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        match (self.log(a), self.log(b)) {
            (Some(ka), Some(kb)) => self.exp[((ka + kb) % self.order()) as usize],
            _ => 0,
        }
    }
}

/// Multiplies a packed polynomial by `x` modulo `poly`.
fn mul_alpha(x: u32, p: u32, poly: u32) -> u32 {
    let y = x << 1;
    if (y >> p) & 1 == 1 {
        y ^ poly
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gf2_is_degenerate() {
        let f = Field::new(1).unwrap();
        assert_eq!(f.q(), 2);
        assert_eq!(f.generator(), &BinaryMatrix::identity(1));
        assert!(f.companion_power(5).is_identity());
    }

    #[test]
    fn gf8_companion_columns() {
        let f = Field::new(3).unwrap();
        assert_eq!(f.primitive_poly(), 0b1011);
        // Images of 1, α, α² under multiplication by α modulo x³+x+1.
        let a = f.generator();
        assert_eq!(a.column(0), 0b010);
        assert_eq!(a.column(1), 0b100);
        assert_eq!(a.column(2), 0b011);
        assert!(f.companion_power(7).is_identity());
        assert!(!f.companion_power(3).is_identity());
    }

    #[test]
    fn gf4_generator() {
        let f = Field::new(2).unwrap();
        // α·1 = α, α·α = α + 1 modulo x²+x+1.
        assert_eq!(f.generator(), &BinaryMatrix::from_columns(2, &[0b10, 0b11]));
        assert!(f.companion_power(0).is_identity());
    }

    #[test]
    fn exponent_arithmetic() {
        let f = Field::new(3).unwrap();
        assert_eq!(f.exponent_add(2, 5), 0);
        assert_eq!(f.exponent_add(2, -5), 4);
        assert_eq!(f.exponent_add(4, -5), 6);
        assert_eq!(f.reduce(-1), 6);
    }

    #[test]
    fn mat_vec_matches_field_multiplication() {
        let f = Field::new(3).unwrap();
        let alpha = f.element(1);
        assert_eq!(f.mat_vec(1, alpha).unwrap(), f.element(2));
        assert!(f.mat_vec(4, BitVector::zero(3)).unwrap().is_zero());
        for k in -10..10 {
            for v in 0..8 {
                let v = BitVector::new(3, v);
                let back = f.mat_vec(k, f.mat_vec(-k, v).unwrap()).unwrap();
                assert_eq!(back, v);
                assert_eq!(
                    f.mat_vec(k, v).unwrap().bits(),
                    f.mul(f.element(k).bits(), v.bits())
                );
            }
        }
    }

    #[test]
    fn mat_vec_rejects_wrong_length() {
        let f = Field::new(3).unwrap();
        assert!(matches!(
            f.mat_vec(1, BitVector::zero(2)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn unsupported_degrees() {
        assert!(matches!(Field::new(0), Err(Error::UnsupportedDegree(0))));
        assert!(matches!(Field::new(17), Err(Error::UnsupportedDegree(17))));
        // x^4 + x^3 + x^2 + x + 1 is irreducible but not primitive.
        assert!(Field::with_poly(4, 0b11111).is_err());
    }

    #[test]
    fn every_table_entry_is_primitive() {
        for p in 1..=MAX_DEGREE {
            let f = Field::new(p).unwrap();
            assert_eq!(f.powers().len() as u32, f.order());
        }
    }

    #[test]
    fn isomorphism_and_rank_small_fields() {
        for p in 1..=4 {
            let f = Field::new(p).unwrap();
            let n = f.order() as i64;
            for a in 0..n {
                assert_eq!(f.companion_power(a).rank(), p);
                for b in 0..n {
                    let prod = f.companion_power(a).mul(f.companion_power(b));
                    assert_eq!(&prod, f.companion_power(a + b));
                }
            }
        }
    }

    #[test]
    fn rows_cover_nonzero_vectors_evenly() {
        for p in 1..=4 {
            let f = Field::new(p).unwrap();
            let mut counts = vec![0u32; f.q() as usize];
            for m in f.powers() {
                for &r in m.rows() {
                    counts[r as usize] += 1;
                }
            }
            assert_eq!(counts[0], 0);
            assert!(counts[1..].iter().all(|&c| c == p));
        }
    }
}
