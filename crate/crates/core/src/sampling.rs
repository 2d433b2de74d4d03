//! Seed expansion into the public matrix and binomial secrets.

use serde::{Deserialize, Serialize};

use crate::pack::BitReader;
use crate::ring::{Poly, PolyMatrix, PolyVec, RingParams, SecretPoly};
use crate::xof::XofKind;

pub const SEED_BYTES: usize = 32;

/// Expands a seed into an `l x l` matrix with coefficients uniform in `[0, q)`.
///
/// The stream is cut into consecutive `eps_q`-bit little-endian chunks, filling
/// the matrix row by row and each polynomial from the constant term up.
pub fn gen_matrix(seed: &[u8; SEED_BYTES], params: &RingParams, xof: XofKind) -> PolyMatrix {
    let count = params.l * params.l * params.n;
    let bytes = xof.expand(seed, crate::pack::packed_len(count, params.eps_q));
    let mut reader = BitReader::new(&bytes);
    let rows = (0..params.l)
        .map(|_| {
            (0..params.l)
                .map(|_| {
                    let coeffs = (0..params.n).map(|_| reader.read(params.eps_q)).collect();
                    Poly::new(coeffs, params.eps_q).expect("chunks are eps_q bits wide")
                })
                .collect()
        })
        .collect();
    PolyMatrix::new(rows).expect("square by construction")
}

/// A vector of centered secrets, one per module coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SecretVec {
    polys: Vec<SecretPoly>,
}

impl SecretVec {
    pub fn new(polys: Vec<SecretPoly>) -> Self {
        SecretVec { polys }
    }

    pub fn zero(params: &RingParams) -> Self {
        SecretVec {
            polys: vec![SecretPoly::zero(params.n); params.l],
        }
    }

    pub fn polys(&self) -> &[SecretPoly] {
        &self.polys
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn to_polyvec(&self, bits: u32) -> PolyVec {
        PolyVec::new(self.polys.iter().map(|p| p.to_poly(bits)).collect())
            .expect("uniform modulus")
    }
}

/// Centered binomial sampling: each coefficient is `HW(a) - HW(b)` for the
/// low and high `mu/2`-bit halves of the next `mu` stream bits.
pub fn sample_secret(r: &[u8; SEED_BYTES], params: &RingParams, xof: XofKind) -> SecretVec {
    let count = params.l * params.n;
    let bytes = xof.expand(r, crate::pack::packed_len(count, params.mu));
    let mut reader = BitReader::new(&bytes);
    let half = params.mu / 2;
    let polys = (0..params.l)
        .map(|_| {
            let coeffs = (0..params.n)
                .map(|_| {
                    let a = reader.read(half).count_ones() as i32;
                    let b = reader.read(half).count_ones() as i32;
                    a - b
                })
                .collect();
            SecretPoly::new(coeffs)
        })
        .collect();
    SecretVec { polys }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_is_deterministic_and_seed_sensitive() {
        let p = RingParams::SABER;
        let a = gen_matrix(&[0u8; 32], &p, XofKind::Shake128);
        assert_eq!(a, gen_matrix(&[0u8; 32], &p, XofKind::Shake128));
        let b = gen_matrix(&[1u8; 32], &p, XofKind::Shake128);
        assert_ne!(a, b);
        assert_eq!(a.dim(), 3);
        assert!(a.rows().iter().flatten().all(|poly| poly.bits() == 13 && poly.len() == 256));
    }

    #[test]
    fn matrix_regression_vector() {
        // independently recomputed with hashlib.shake_128
        let a = gen_matrix(&[0u8; 32], &RingParams::SABER, XofKind::Shake128);
        assert_eq!(&a.get(0, 0).coeffs()[..4], &[1828u32, 7765, 7506, 5062]);
    }

    #[test]
    fn matrix_coefficients_are_uniform() {
        let p = RingParams::SABER;
        let mut hist = [0u64; 16];
        let mut total = 0u64;
        let mut seed = [0u8; 32];
        while total < 100_000 {
            let m = gen_matrix(&seed, &p, XofKind::Shake128);
            for poly in m.rows().iter().flatten() {
                for &c in poly.coeffs() {
                    hist[(c >> 9) as usize] += 1;
                    total += 1;
                }
            }
            seed[0] += 1;
        }
        let expect = total as f64 / 16.0;
        let sigma = (total as f64 * (1.0 / 16.0) * (15.0 / 16.0)).sqrt();
        for h in hist {
            assert!((h as f64 - expect).abs() < 3.0 * sigma + 1.0, "bucket {h} vs {expect}");
        }
    }

    #[test]
    fn secret_range_mean_and_determinism() {
        let p = RingParams::SABER;
        let mut sum = 0i64;
        let mut count = 0i64;
        let mut r = [7u8; 32];
        while count < 100_000 {
            let s = sample_secret(&r, &p, XofKind::Shake128);
            for poly in s.polys() {
                assert!(poly.max_abs() <= 4);
                sum += poly.coeffs().iter().map(|&c| c as i64).sum::<i64>();
                count += poly.len() as i64;
            }
            r[0] = r[0].wrapping_add(1);
            r[1] += (r[0] == 0) as u8;
        }
        assert!((sum as f64 / count as f64).abs() < 0.05);
        let r = [3u8; 32];
        assert_eq!(sample_secret(&r, &p, XofKind::Shake128), sample_secret(&r, &p, XofKind::Shake128));
    }
}
