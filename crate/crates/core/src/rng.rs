//! Counter-based random number generation (Philox4x64-10).
//!
//! Every stochastic draw in the crate is keyed by an explicit (seed, stream)
//! pair, so results never depend on evaluation order or thread count.

use rand::RngCore;
use rand_distr::Distribution;

const M0: u64 = 0xD2E7_470E_E14C_6C93;
const M1: u64 = 0xCA5A_8263_9512_1157;
const W0: u64 = 0x9E37_79B9_7F4A_7C15;
const W1: u64 = 0xBB67_AE85_84CA_A73B;

/// Algorithm identifier recorded in run manifests.
pub const ALGORITHM: &str = "philox4x64-10";

#[inline]
fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let p = (a as u128) * (b as u128);
    ((p >> 64) as u64, p as u64)
}

/// One Philox4x64 block: 10 rounds over a 256-bit counter with a 128-bit key.
pub fn philox4x64(counter: [u64; 4], key: [u64; 2]) -> [u64; 4] {
    let mut x = counter;
    let mut k = key;
    for _ in 0..10 {
        let (hi0, lo0) = mulhilo(M0, x[0]);
        let (hi1, lo1) = mulhilo(M1, x[2]);
        x = [hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0];
        k[0] = k[0].wrapping_add(W0);
        k[1] = k[1].wrapping_add(W1);
    }
    x
}

/// Seedable counter-based generator over Philox4x64-10 blocks.
///
/// The counter is incremented before each block, so the first outputs come
/// from counter value 1.
#[derive(Clone, Debug)]
pub struct Philox {
    key: [u64; 2],
    counter: [u64; 4],
    buf: [u64; 4],
    pos: usize,
}

impl Philox {
    pub fn new(key0: u64, key1: u64) -> Self {
        Self { key: [key0, key1], counter: [0; 4], buf: [0; 4], pos: 4 }
    }

    /// Independent stream for one draw site: key = (seed, stream index).
    pub fn stream(seed: u64, index: u64) -> Self {
        Self::new(seed, index)
    }

    fn refill(&mut self) {
        for i in 0..4 {
            let (v, carry) = self.counter[i].overflowing_add(1);
            self.counter[i] = v;
            if !carry {
                break;
            }
        }
        self.buf = philox4x64(self.counter, self.key);
        self.pos = 0;
    }
}

impl RngCore for Philox {
    fn next_u32(&mut self) -> u32 {
        self.next_u64() as u32
    }

    fn next_u64(&mut self) -> u64 {
        if self.pos == 4 {
            self.refill();
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        v
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// Poisson draw with the given mean, keyed by (seed, index).
///
/// A mean of zero always yields zero counts.
pub fn poisson_count(mean: f64, seed: u64, index: u64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let mut rng = Philox::stream(seed, index);
    let dist = rand_distr::Poisson::new(mean).expect("mean is positive and finite");
    let draw: f64 = dist.sample(&mut rng);
    draw as u64
}

/// Uniform f64 in [0, 1) with 53-bit resolution.
pub fn uniform(rng: &mut Philox) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
