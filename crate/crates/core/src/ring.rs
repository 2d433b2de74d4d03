//! Arithmetic in `Z_{2^k}[x]/(x^n + 1)` and the module structure built on it.
//!
//! All moduli are powers of two, so a modulus is carried as its bit width and
//! reduction is a mask. Coefficients are stored as `u32`; products and
//! intermediate sums are formed in `i64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter set of the module-LWR scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingParams {
    /// Polynomial degree `n`.
    pub n: usize,
    /// `log2 q`.
    pub eps_q: u32,
    /// `log2 p`.
    pub eps_p: u32,
    /// `log2 T`.
    pub eps_t: u32,
    /// Module rank `l`.
    pub l: usize,
    /// Centered binomial parameter.
    pub mu: u32,
}

impl Default for RingParams {
    fn default() -> Self {
        RingParams::SABER
    }
}

impl RingParams {
    /// n = 256, l = 3, q = 2^13, p = 2^10, T = 2^4, mu = 8.
    pub const SABER: RingParams = RingParams {
        n: 256,
        eps_q: 13,
        eps_p: 10,
        eps_t: 4,
        l: 3,
        mu: 8,
    };

    pub fn new(n: usize, eps_q: u32, eps_p: u32, eps_t: u32, l: usize, mu: u32) -> Result<Self> {
        let params = RingParams {
            n,
            eps_q,
            eps_p,
            eps_t,
            l,
            mu,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_power_of_two() {
            return Err(Error::Parameter(format!("n = {} is not a power of two", self.n)));
        }
        if !(self.eps_t < self.eps_p && self.eps_p < self.eps_q) {
            return Err(Error::Parameter(format!(
                "moduli must satisfy T < p < q, got 2^{} , 2^{}, 2^{}",
                self.eps_t, self.eps_p, self.eps_q
            )));
        }
        if self.eps_t == 0 || self.eps_q > 24 {
            return Err(Error::Parameter("modulus widths must lie in 1..=24 bits".into()));
        }
        if self.l == 0 {
            return Err(Error::Parameter("module rank must be positive".into()));
        }
        if self.mu == 0 || !self.mu.is_multiple_of(2) || self.mu > 16 {
            return Err(Error::Parameter(format!("mu = {} must be even and at most 16", self.mu)));
        }
        Ok(())
    }

    pub fn q(&self) -> u32 {
        1 << self.eps_q
    }

    pub fn p(&self) -> u32 {
        1 << self.eps_p
    }

    pub fn t(&self) -> u32 {
        1 << self.eps_t
    }

    /// Largest magnitude of a secret coefficient, `mu / 2`.
    pub fn secret_bound(&self) -> i32 {
        (self.mu / 2) as i32
    }
}

#[inline]
pub(crate) fn mask(bits: u32) -> i64 {
    (1i64 << bits) - 1
}

/// An element of `R_{2^bits}`; coefficient `i` multiplies `x^i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<u32>,
    bits: u32,
}

impl Poly {
    pub fn new(coeffs: Vec<u32>, bits: u32) -> Result<Self> {
        if bits == 0 || bits > 31 {
            return Err(Error::Parameter(format!("modulus width {bits} out of range")));
        }
        if let Some(c) = coeffs.iter().find(|&&c| c >> bits != 0) {
            return Err(Error::Domain(format!("coefficient {c} not below 2^{bits}")));
        }
        Ok(Poly { coeffs, bits })
    }

    pub fn zero(n: usize, bits: u32) -> Self {
        Poly {
            coeffs: vec![0; n],
            bits,
        }
    }

    /// Reduces arbitrary signed integers into `[0, 2^bits)`.
    pub fn from_signed(values: &[i64], bits: u32) -> Self {
        let m = mask(bits);
        Poly {
            coeffs: values.iter().map(|&v| (v & m) as u32).collect(),
            bits,
        }
    }

    pub fn constant(n: usize, bits: u32, value: i64) -> Self {
        let mut p = vec![0i64; n];
        p[0] = value;
        Poly::from_signed(&p, bits)
    }

    pub fn filled(n: usize, bits: u32, value: i64) -> Self {
        Poly::from_signed(&vec![value; n], bits)
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn modulus(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn as_i64(&self) -> Vec<i64> {
        self.coeffs.iter().map(|&c| c as i64).collect()
    }

    /// Re-reduces into a smaller (or equal) power-of-two modulus.
    pub fn reduce_to(&self, bits: u32) -> Self {
        Poly::from_signed(&self.as_i64(), bits)
    }

    fn check_compatible(&self, other: &Poly) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "polynomial lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        if self.bits != other.bits {
            return Err(Error::Dimension(format!(
                "moduli 2^{} and 2^{}",
                self.bits, other.bits
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Poly) -> Result<Poly> {
        self.check_compatible(other)?;
        let m = mask(self.bits) as u32;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a.wrapping_add(b) & m)
            .collect();
        Ok(Poly {
            coeffs,
            bits: self.bits,
        })
    }

    pub fn sub(&self, other: &Poly) -> Result<Poly> {
        self.check_compatible(other)?;
        let m = mask(self.bits) as u32;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a.wrapping_sub(b) & m)
            .collect();
        Ok(Poly {
            coeffs,
            bits: self.bits,
        })
    }

    pub fn scale(&self, factor: i64) -> Poly {
        let values: Vec<i64> = self.coeffs.iter().map(|&c| c as i64 * factor).collect();
        Poly::from_signed(&values, self.bits)
    }
}

/// A small signed polynomial kept in centered form, e.g. a binomial secret.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SecretPoly {
    coeffs: Vec<i32>,
}

impl SecretPoly {
    pub fn new(coeffs: Vec<i32>) -> Self {
        SecretPoly { coeffs }
    }

    pub fn zero(n: usize) -> Self {
        SecretPoly { coeffs: vec![0; n] }
    }

    pub fn coeffs(&self) -> &[i32] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_abs(&self) -> i32 {
        self.coeffs.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Representative in `R_{2^bits}`.
    pub fn to_poly(&self, bits: u32) -> Poly {
        let values: Vec<i64> = self.coeffs.iter().map(|&c| c as i64).collect();
        Poly::from_signed(&values, bits)
    }

    pub fn as_i64(&self) -> Vec<i64> {
        self.coeffs.iter().map(|&c| c as i64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyVec {
    polys: Vec<Poly>,
}

impl PolyVec {
    pub fn new(polys: Vec<Poly>) -> Result<Self> {
        if let Some(first) = polys.first() {
            if polys
                .iter()
                .any(|p| p.bits() != first.bits() || p.len() != first.len())
            {
                return Err(Error::Dimension("mixed moduli or lengths in vector".into()));
            }
        }
        Ok(PolyVec { polys })
    }

    pub fn polys(&self) -> &[Poly] {
        &self.polys
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn bits(&self) -> Option<u32> {
        self.polys.first().map(Poly::bits)
    }

    pub fn into_inner(self) -> Vec<Poly> {
        self.polys
    }
}

impl std::ops::Index<usize> for PolyVec {
    type Output = Poly;
    fn index(&self, i: usize) -> &Poly {
        &self.polys[i]
    }
}

/// Square `l x l` matrix over the ring, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyMatrix {
    rows: Vec<Vec<Poly>>,
}

impl PolyMatrix {
    pub fn new(rows: Vec<Vec<Poly>>) -> Result<Self> {
        let l = rows.len();
        if rows.iter().any(|r| r.len() != l) {
            return Err(Error::Dimension("matrix is not square".into()));
        }
        let flat: Vec<&Poly> = rows.iter().flatten().collect();
        if let Some(first) = flat.first() {
            if flat
                .iter()
                .any(|p| p.bits() != first.bits() || p.len() != first.len())
            {
                return Err(Error::Dimension("mixed moduli or lengths in matrix".into()));
            }
        }
        Ok(PolyMatrix { rows })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, row: usize, col: usize) -> &Poly {
        &self.rows[row][col]
    }

    pub fn rows(&self) -> &[Vec<Poly>] {
        &self.rows
    }
}

/// Folds a product of length at most `2n - 1` into `R_{2^bits}` using `x^n = -1`.
pub fn reduce_negacyclic(coeffs: &[i64], n: usize, bits: u32) -> Result<Poly> {
    if n == 0 {
        return Err(Error::Dimension("ring degree must be positive".into()));
    }
    if coeffs.len() > 2 * n - 1 {
        return Err(Error::Dimension(format!(
            "input of length {} exceeds 2n - 1 = {}",
            coeffs.len(),
            2 * n - 1
        )));
    }
    let mut folded = vec![0i64; n];
    for (i, &c) in coeffs.iter().enumerate() {
        if i < n {
            folded[i] = folded[i].wrapping_add(c);
        } else {
            folded[i - n] = folded[i - n].wrapping_sub(c);
        }
    }
    Ok(Poly::from_signed(&folded, bits))
}

/// Drops the `from_bits - to_bits` least significant bits of every coefficient.
pub fn round_shift(poly: &Poly, from_bits: u32, to_bits: u32) -> Result<Poly> {
    if to_bits > from_bits {
        return Err(Error::Parameter(format!(
            "cannot shift from {from_bits} up to {to_bits} bits"
        )));
    }
    if to_bits == 0 {
        return Err(Error::Parameter("target width must be positive".into()));
    }
    if let Some(c) = poly.coeffs().iter().find(|&&c| c as u64 >> from_bits != 0) {
        return Err(Error::Domain(format!("coefficient {c} is not reduced mod 2^{from_bits}")));
    }
    let shift = from_bits - to_bits;
    Ok(Poly {
        coeffs: poly.coeffs().iter().map(|&c| c >> shift).collect(),
        bits: to_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_reduction_example() {
        // 3 + 2x^2 + x^4 + 10x^5 + 6x^6 over x^4 + 1
        let p = reduce_negacyclic(&[3, 0, 2, 0, 1, 10, 6], 4, 13).unwrap();
        let q = 1u32 << 13;
        assert_eq!(p.coeffs(), &[2, q - 10, q - 4, 0]);
    }

    #[test]
    fn x_to_the_n_is_minus_one() {
        let mut c = [0i64; 8];
        c[4] = 1;
        let p = reduce_negacyclic(&c[..7], 4, 13).unwrap();
        assert_eq!(p.coeffs(), &[(1 << 13) - 1, 0, 0, 0]);
        let z = reduce_negacyclic(&[0; 7], 4, 13).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn overlong_input_is_rejected() {
        assert!(matches!(
            reduce_negacyclic(&[0; 8], 4, 13),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn round_shift_examples() {
        let p = Poly::new(vec![4, (1 << 13) - 1], 13).unwrap();
        let r = round_shift(&p, 13, 10).unwrap();
        assert_eq!(r.coeffs(), &[0, (1 << 10) - 1]);
        assert_eq!(r.bits(), 10);
        assert!(matches!(round_shift(&p, 10, 13), Err(Error::Parameter(_))));
    }

    #[test]
    fn params_validation() {
        assert!(RingParams::SABER.validate().is_ok());
        assert!(RingParams::new(255, 13, 10, 4, 3, 8).is_err());
        assert!(RingParams::new(256, 10, 13, 4, 3, 8).is_err());
        assert!(RingParams::new(256, 13, 10, 4, 3, 7).is_err());
    }

    #[test]
    fn poly_rejects_unreduced() {
        assert!(Poly::new(vec![16], 4).is_err());
        assert!(Poly::new(vec![15], 4).is_ok());
    }
}
