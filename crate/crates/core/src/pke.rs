//! Saber public-key encryption over an arbitrary multiplication backend.
//!
//! Rounding is done with the constant offsets `h1`, `h` and `h2` followed by
//! plain right shifts, so every reduction is modulo a power of two.

use serde::{Deserialize, Serialize};

use crate::backend::MulBackend;
use crate::error::{Error, Result};
use crate::pack::{pack, packed_len, unpack};
use crate::ring::{mask, round_shift, Poly, PolyMatrix, PolyVec, RingParams, SecretPoly};
use crate::sampling::{gen_matrix, sample_secret, SecretVec, SEED_BYTES};
use crate::xof::XofKind;

/// Rounding offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaberConstants {
    pub h1: Poly,
    pub h: PolyVec,
    pub h2: Poly,
}

pub fn constants(params: &RingParams) -> SaberConstants {
    let h1_value = 1i64 << (params.eps_q - params.eps_p - 1);
    let h2_value = (1i64 << (params.eps_p - 2)) - (1i64 << (params.eps_p - params.eps_t - 1)) + h1_value;
    let h1 = Poly::filled(params.n, params.eps_q, h1_value);
    let h = PolyVec::new(vec![h1.clone(); params.l]).expect("uniform modulus");
    SaberConstants {
        h1,
        h,
        h2: Poly::filled(params.n, params.eps_p, h2_value),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub seed_a: [u8; SEED_BYTES],
    pub b: PolyVec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub s: SecretVec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub c_m: Poly,
    pub b_prime: PolyVec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SaberPke {
    pub params: RingParams,
    pub xof: XofKind,
}

impl SaberPke {
    pub fn new(params: RingParams, xof: XofKind) -> Result<Self> {
        params.validate()?;
        Ok(SaberPke { params, xof })
    }

    pub fn keygen<B: MulBackend>(
        &self,
        seed_a: &[u8; SEED_BYTES],
        r: &[u8; SEED_BYTES],
        backend: &mut B,
    ) -> Result<(PublicKey, SecretKey)> {
        let s = sample_secret(r, &self.params, self.xof);
        self.keygen_with_secret(seed_a, s, backend)
    }

    /// Key generation from an explicit secret, bypassing the sampler.
    pub fn keygen_with_secret<B: MulBackend>(
        &self,
        seed_a: &[u8; SEED_BYTES],
        s: SecretVec,
        backend: &mut B,
    ) -> Result<(PublicKey, SecretKey)> {
        self.check_secret(&s)?;
        let a = gen_matrix(seed_a, &self.params, self.xof);
        let b = self.rounded_product(&a, &s, true, backend)?;
        Ok((PublicKey { seed_a: *seed_a, b }, SecretKey { s }))
    }

    pub fn encrypt<B: MulBackend>(
        &self,
        pk: &PublicKey,
        m: &Poly,
        r_prime: &[u8; SEED_BYTES],
        backend: &mut B,
    ) -> Result<Ciphertext> {
        let s_prime = sample_secret(r_prime, &self.params, self.xof);
        self.encrypt_with_secret(pk, m, &s_prime, backend)
    }

    /// Encryption with an explicit ephemeral secret, bypassing the sampler.
    pub fn encrypt_with_secret<B: MulBackend>(
        &self,
        pk: &PublicKey,
        m: &Poly,
        s_prime: &SecretVec,
        backend: &mut B,
    ) -> Result<Ciphertext> {
        let p = &self.params;
        if m.len() != p.n || m.bits() != 1 {
            return Err(Error::Domain(format!(
                "message must have {} coefficients in {{0,1}}",
                p.n
            )));
        }
        self.check_secret(s_prime)?;
        self.check_vec(&pk.b, p.eps_p)?;
        let a = gen_matrix(&pk.seed_a, p, self.xof);
        let b_prime = self.rounded_product(&a, s_prime, false, backend)?;
        let v_prime = inner_product(&pk.b, s_prime, backend)?;
        let h1 = 1i64 << (p.eps_q - p.eps_p - 1);
        let shift = p.eps_p - 1;
        let pre: Vec<i64> = v_prime
            .coeffs()
            .iter()
            .zip(m.coeffs())
            .map(|(&v, &bit)| v as i64 + h1 - ((bit as i64) << shift))
            .collect();
        let c_m = round_shift(&Poly::from_signed(&pre, p.eps_p), p.eps_p, p.eps_t)?;
        Ok(Ciphertext { c_m, b_prime })
    }

    pub fn decrypt<B: MulBackend>(&self, sk: &SecretKey, ct: &Ciphertext, backend: &mut B) -> Result<Poly> {
        let p = &self.params;
        self.check_vec(&ct.b_prime, p.eps_p)?;
        if ct.c_m.len() != p.n || ct.c_m.bits() != p.eps_t {
            return Err(Error::Dimension("c_m has the wrong shape".into()));
        }
        let v = inner_product(&ct.b_prime, &sk.s, backend)?;
        self.finish_decrypt(&v, &ct.c_m)
    }

    /// Final step of decryption from the inner product `v = b'^T s mod p`.
    pub fn finish_decrypt(&self, v: &Poly, c_m: &Poly) -> Result<Poly> {
        let p = &self.params;
        let h2 = (1i64 << (p.eps_p - 2)) - (1i64 << (p.eps_p - p.eps_t - 1)) + (1i64 << (p.eps_q - p.eps_p - 1));
        let shift = p.eps_p - p.eps_t;
        let pre: Vec<i64> = v
            .coeffs()
            .iter()
            .zip(c_m.coeffs())
            .map(|(&v, &c)| v as i64 - ((c as i64) << shift) + h2)
            .collect();
        round_shift(&Poly::from_signed(&pre, p.eps_p), p.eps_p, 1)
    }

    /// `((A^T s + h) mod q) >> (eps_q - eps_p)` when `transpose`, otherwise
    /// with `A s`.
    fn rounded_product<B: MulBackend>(
        &self,
        a: &PolyMatrix,
        s: &SecretVec,
        transpose: bool,
        backend: &mut B,
    ) -> Result<PolyVec> {
        let p = &self.params;
        let h1 = 1i64 << (p.eps_q - p.eps_p - 1);
        let out = (0..p.l)
            .map(|i| {
                let mut acc = Poly::filled(p.n, p.eps_q, h1);
                for (j, sj) in s.polys().iter().enumerate() {
                    let entry = if transpose { a.get(j, i) } else { a.get(i, j) };
                    acc = acc.add(&backend.mul(entry, sj)?)?;
                }
                round_shift(&acc, p.eps_q, p.eps_p)
            })
            .collect::<Result<Vec<_>>>()?;
        PolyVec::new(out)
    }

    fn check_secret(&self, s: &SecretVec) -> Result<()> {
        let p = &self.params;
        if s.len() != p.l || s.polys().iter().any(|x| x.len() != p.n) {
            return Err(Error::Dimension(format!("secret must be {} x {}", p.l, p.n)));
        }
        if s.polys().iter().any(|x| x.max_abs() > p.secret_bound()) {
            return Err(Error::Domain("secret coefficient out of range".into()));
        }
        Ok(())
    }

    fn check_vec(&self, v: &PolyVec, bits: u32) -> Result<()> {
        let p = &self.params;
        if v.len() != p.l || v.polys().iter().any(|x| x.len() != p.n || x.bits() != bits) {
            return Err(Error::Dimension(format!("expected {} polynomials mod 2^{bits}", p.l)));
        }
        Ok(())
    }

    pub fn public_key_bytes(&self) -> usize {
        SEED_BYTES + packed_len(self.params.l * self.params.n, self.params.eps_p)
    }

    pub fn secret_key_bytes(&self) -> usize {
        packed_len(self.params.l * self.params.n, self.secret_width())
    }

    pub fn ciphertext_bytes(&self) -> usize {
        packed_len(self.params.n, self.params.eps_t) + packed_len(self.params.l * self.params.n, self.params.eps_p)
    }

    pub fn ciphertext_bits(&self) -> usize {
        self.params.n * self.params.eps_t as usize + self.params.l * self.params.n * self.params.eps_p as usize
    }

    fn secret_width(&self) -> u32 {
        // two's complement wide enough for [-mu/2, mu/2]
        (self.params.secret_bound() as u32 + 1).next_power_of_two().trailing_zeros() + 1
    }

    pub fn encode_public_key(&self, pk: &PublicKey) -> Vec<u8> {
        let mut out = pk.seed_a.to_vec();
        out.extend(pack(&flatten(&pk.b), self.params.eps_p));
        out
    }

    pub fn decode_public_key(&self, bytes: &[u8]) -> Result<PublicKey> {
        if bytes.len() != self.public_key_bytes() {
            return Err(Error::Encoding(format!(
                "public key must be {} bytes, got {}",
                self.public_key_bytes(),
                bytes.len()
            )));
        }
        let mut seed_a = [0u8; SEED_BYTES];
        seed_a.copy_from_slice(&bytes[..SEED_BYTES]);
        let b = self.unflatten(&bytes[SEED_BYTES..], self.params.eps_p)?;
        Ok(PublicKey { seed_a, b })
    }

    pub fn encode_secret_key(&self, sk: &SecretKey) -> Vec<u8> {
        let w = self.secret_width();
        let values: Vec<u32> = sk
            .s
            .polys()
            .iter()
            .flat_map(|p| p.coeffs().iter().map(move |&c| (c as u32) & mask(w) as u32))
            .collect();
        pack(&values, w)
    }

    pub fn decode_secret_key(&self, bytes: &[u8]) -> Result<SecretKey> {
        let (n, l, w) = (self.params.n, self.params.l, self.secret_width());
        let raw = unpack(bytes, n * l, w)?;
        let polys = raw
            .chunks(n)
            .map(|chunk| {
                SecretPoly::new(
                    chunk
                        .iter()
                        .map(|&v| ((v << (32 - w)) as i32) >> (32 - w))
                        .collect(),
                )
            })
            .collect();
        let s = SecretVec::new(polys);
        self.check_secret(&s)?;
        Ok(SecretKey { s })
    }

    pub fn encode_ciphertext(&self, ct: &Ciphertext) -> Vec<u8> {
        let mut out = pack(ct.c_m.coeffs(), self.params.eps_t);
        out.extend(pack(&flatten(&ct.b_prime), self.params.eps_p));
        out
    }

    pub fn decode_ciphertext(&self, bytes: &[u8]) -> Result<Ciphertext> {
        if bytes.len() != self.ciphertext_bytes() {
            return Err(Error::Encoding(format!(
                "ciphertext must be {} bytes, got {}",
                self.ciphertext_bytes(),
                bytes.len()
            )));
        }
        let split = packed_len(self.params.n, self.params.eps_t);
        let c_m = Poly::new(unpack(&bytes[..split], self.params.n, self.params.eps_t)?, self.params.eps_t)?;
        let b_prime = self.unflatten(&bytes[split..], self.params.eps_p)?;
        Ok(Ciphertext { c_m, b_prime })
    }

    fn unflatten(&self, bytes: &[u8], bits: u32) -> Result<PolyVec> {
        let n = self.params.n;
        let raw = unpack(bytes, n * self.params.l, bits)?;
        PolyVec::new(
            raw.chunks(n)
                .map(|c| Poly::new(c.to_vec(), bits))
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

fn flatten(v: &PolyVec) -> Vec<u32> {
    v.polys().iter().flat_map(|p| p.coeffs().iter().copied()).collect()
}

/// `b^T s` in the ring of `b`'s modulus.
pub fn inner_product<B: MulBackend>(b: &PolyVec, s: &SecretVec, backend: &mut B) -> Result<Poly> {
    if b.len() != s.len() || b.is_empty() {
        return Err(Error::Dimension(format!("vector lengths {} and {}", b.len(), s.len())));
    }
    let mut acc = Poly::zero(b[0].len(), b[0].bits());
    for (bi, si) in b.polys().iter().zip(s.polys()) {
        acc = acc.add(&backend.mul(bi, si)?)?;
    }
    Ok(acc)
}

/// Coefficient `i` is bit `i % 8` of byte `i / 8`.
pub fn message_from_bytes(bytes: &[u8], n: usize) -> Result<Poly> {
    if bytes.len() * 8 != n {
        return Err(Error::Dimension(format!("{} bytes cannot fill {n} bits", bytes.len())));
    }
    let coeffs = (0..n).map(|i| ((bytes[i / 8] >> (i % 8)) & 1) as u32).collect();
    Poly::new(coeffs, 1)
}

pub fn message_to_bytes(m: &Poly) -> Vec<u8> {
    let mut out = vec![0u8; m.len().div_ceil(8)];
    for (i, &bit) in m.coeffs().iter().enumerate() {
        out[i / 8] |= ((bit & 1) as u8) << (i % 8);
    }
    out
}

pub const CRC_BYTES: usize = 4;

/// Payload followed by its little-endian CRC-32, as a message polynomial.
pub fn frame_message(payload: &[u8], n: usize) -> Result<Poly> {
    if payload.len() + CRC_BYTES != n / 8 {
        return Err(Error::Dimension(format!(
            "payload must be {} bytes",
            (n / 8).saturating_sub(CRC_BYTES)
        )));
    }
    let mut bytes = payload.to_vec();
    bytes.extend(crc32fast::hash(payload).to_le_bytes());
    message_from_bytes(&bytes, n)
}

/// The payload if the trailing CRC-32 matches.
pub fn check_frame(m: &Poly) -> Option<Vec<u8>> {
    let bytes = message_to_bytes(m);
    if bytes.len() < CRC_BYTES {
        return None;
    }
    let (payload, crc) = bytes.split_at(bytes.len() - CRC_BYTES);
    (crc32fast::hash(payload).to_le_bytes() == crc).then(|| payload.to_vec())
}
