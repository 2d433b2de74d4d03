//! Extendable-output functions used for seed expansion.

use rand::RngCore;
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha3::digest::{ExtendableOutput, Update, XofReader};

/// Absorb-then-squeeze byte stream. Absorbing after the first squeeze is a
/// programming error and panics.
pub trait Xof {
    fn absorb(&mut self, data: &[u8]);
    fn squeeze(&mut self, out: &mut [u8]);
}

enum ShakeState {
    Absorbing(sha3::Shake128),
    Squeezing(sha3::Shake128Reader),
}

pub struct Shake128Xof {
    state: Option<ShakeState>,
}

impl Default for Shake128Xof {
    fn default() -> Self {
        Shake128Xof {
            state: Some(ShakeState::Absorbing(sha3::Shake128::default())),
        }
    }
}

impl Xof for Shake128Xof {
    fn absorb(&mut self, data: &[u8]) {
        match self.state.as_mut() {
            Some(ShakeState::Absorbing(h)) => h.update(data),
            _ => panic!("absorb called after squeeze"),
        }
    }

    fn squeeze(&mut self, out: &mut [u8]) {
        let state = match self.state.take() {
            Some(ShakeState::Absorbing(h)) => ShakeState::Squeezing(h.finalize_xof()),
            Some(s) => s,
            None => unreachable!(),
        };
        let mut state = state;
        if let ShakeState::Squeezing(r) = &mut state {
            r.read(out);
        }
        self.state = Some(state);
    }
}

/// Counter-mode stream keyed by the absorbed bytes (ChaCha20 keystream).
/// Not SHAKE-compatible; meant for hermetic, fast tests.
#[derive(Default)]
pub struct CounterXof {
    absorbed: Vec<u8>,
    stream: Option<ChaCha20Rng>,
}

impl Xof for CounterXof {
    fn absorb(&mut self, data: &[u8]) {
        assert!(self.stream.is_none(), "absorb called after squeeze");
        self.absorbed.extend_from_slice(data);
    }

    fn squeeze(&mut self, out: &mut [u8]) {
        let absorbed = &self.absorbed;
        let rng = self.stream.get_or_insert_with(|| {
            let mut key = [0u8; 32];
            for (i, b) in absorbed.iter().enumerate() {
                key[i % 32] ^= b.rotate_left((i / 32) as u32 % 8);
            }
            key[31] ^= absorbed.len() as u8;
            ChaCha20Rng::from_seed(key)
        });
        rng.fill_bytes(out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XofKind {
    #[default]
    Shake128,
    Counter,
}

impl XofKind {
    pub fn instance(&self) -> Box<dyn Xof> {
        match self {
            XofKind::Shake128 => Box::new(Shake128Xof::default()),
            XofKind::Counter => Box::new(CounterXof::default()),
        }
    }

    pub fn expand(&self, seed: &[u8], len: usize) -> Vec<u8> {
        let mut xof = self.instance();
        xof.absorb(seed);
        let mut out = vec![0u8; len];
        xof.squeeze(&mut out);
        out
    }
}
