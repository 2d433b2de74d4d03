//! Engines that compute `a * s` for a public polynomial `a` and a small
//! centered secret `s`.

use crate::error::Result;
use crate::polymult::{multiply_secret, MultAlgorithm};
use crate::ring::{Poly, SecretPoly};

pub trait MulBackend {
    /// `a * s` in the ring of `a`'s modulus.
    fn mul(&mut self, a: &Poly, s: &SecretPoly) -> Result<Poly>;

    fn name(&self) -> String;
}

impl<B: MulBackend + ?Sized> MulBackend for &mut B {
    fn mul(&mut self, a: &Poly, s: &SecretPoly) -> Result<Poly> {
        (**self).mul(a, s)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<B: MulBackend + ?Sized> MulBackend for Box<B> {
    fn mul(&mut self, a: &Poly, s: &SecretPoly) -> Result<Poly> {
        (**self).mul(a, s)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SoftwareBackend {
    pub algorithm: MultAlgorithm,
}

impl SoftwareBackend {
    pub fn new(algorithm: MultAlgorithm) -> Self {
        SoftwareBackend { algorithm }
    }
}

impl Default for SoftwareBackend {
    fn default() -> Self {
        SoftwareBackend::new(MultAlgorithm::SB)
    }
}

impl MulBackend for SoftwareBackend {
    fn mul(&mut self, a: &Poly, s: &SecretPoly) -> Result<Poly> {
        multiply_secret(self.algorithm, a, s)
    }
    fn name(&self) -> String {
        format!("software-{}", self.algorithm)
    }
}

/// Counts PolyMult invocations passed through to an inner backend.
#[derive(Debug, Clone)]
pub struct CountingBackend<B> {
    pub inner: B,
    pub count: u64,
}

impl<B: MulBackend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend { inner, count: 0 }
    }

    pub fn take(&mut self) -> u64 {
        std::mem::take(&mut self.count)
    }
}

impl<B: MulBackend> MulBackend for CountingBackend<B> {
    fn mul(&mut self, a: &Poly, s: &SecretPoly) -> Result<Poly> {
        self.count += 1;
        self.inner.mul(a, s)
    }
    fn name(&self) -> String {
        format!("counting({})", self.inner.name())
    }
}
