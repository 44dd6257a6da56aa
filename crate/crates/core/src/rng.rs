//! Counter-based random streams.
//!
//! The generator is Philox4x32-10 (Salmon, Moraes, Dror, Shaw, SC'11), the
//! same algorithm shipped by Random123, cuRAND and NumPy, so a stream can be
//! reproduced bit-for-bit from another language given the same key and
//! counter layout.
//!
//! Stream layout: the master seed is the Philox key. A per-stream key is
//! derived by encrypting the counter `[0x5eed, experiment, sweep, replicate]`
//! under the master key; the stream then encrypts the 128-bit block counter
//! `[block_lo, block_hi, 0, 0]` under the derived key. Doubles take the top
//! 53 bits of two consecutive 32-bit words (`(hi << 32 | lo) >> 11`).

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// One Philox4x32 block encryption with 10 rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let p0 = (PHILOX_M0 as u64) * (ctr[0] as u64);
        let p1 = (PHILOX_M1 as u64) * (ctr[2] as u64);
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

/// Master seed plus the coordinates of one independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master: u64,
    pub experiment: u32,
    pub sweep: u32,
    pub replicate: u32,
}

impl SeedSpec {
    pub fn new(master: u64) -> Self {
        SeedSpec {
            master,
            experiment: 0,
            sweep: 0,
            replicate: 0,
        }
    }

    pub fn with_experiment(self, experiment: u32) -> Self {
        SeedSpec { experiment, ..self }
    }

    pub fn with_sweep(self, sweep: u32) -> Self {
        SeedSpec { sweep, ..self }
    }

    pub fn with_replicate(self, replicate: u32) -> Self {
        SeedSpec { replicate, ..self }
    }

    pub fn stream(&self) -> PhiloxStream {
        PhiloxStream::new(*self)
    }
}

/// Sequential reader over one Philox stream.
#[derive(Debug, Clone)]
pub struct PhiloxStream {
    key: [u32; 2],
    block: u64,
    buf: [u32; 4],
    pos: usize,
}

impl PhiloxStream {
    pub fn new(seed: SeedSpec) -> Self {
        let master = [seed.master as u32, (seed.master >> 32) as u32];
        let derived = philox4x32_10(
            [0x5eed, seed.experiment, seed.sweep, seed.replicate],
            master,
        );
        PhiloxStream {
            key: [derived[0], derived[1]],
            block: 0,
            buf: [0; 4],
            pos: 4,
        }
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.pos == 4 {
            self.buf = philox4x32_10(
                [self.block as u32, (self.block >> 32) as u32, 0, 0],
                self.key,
            );
            self.block += 1;
            self.pos = 0;
        }
        let w = self.buf[self.pos];
        self.pos += 1;
        w
    }

    pub fn next_u64(&mut self) -> u64 {
        let lo = self.next_u32() as u64;
        let hi = self.next_u32() as u64;
        (hi << 32) | lo
    }

    /// Uniform double in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform ±1.
    pub fn spin(&mut self) -> i8 {
        if self.next_u32() & 1 == 0 {
            1
        } else {
            -1
        }
    }

    /// Uniform index in `0..n` (rejection sampling, unbiased).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors distributed with Random123 (kat_vectors).
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32_10([0, 0, 0, 0], [0, 0]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32_10(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn identical_seed_identical_stream() {
        let s = SeedSpec::new(7).with_sweep(3).with_replicate(11);
        let a: Vec<u32> = (0..100).scan(s.stream(), |r, _| Some(r.next_u32())).collect();
        let b: Vec<u32> = (0..100).scan(s.stream(), |r, _| Some(r.next_u32())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_coordinates_distinct_streams() {
        let base = SeedSpec::new(7);
        let mut firsts = std::collections::HashSet::new();
        for e in 0..4 {
            for s in 0..4 {
                for r in 0..4 {
                    let mut st = base
                        .with_experiment(e)
                        .with_sweep(s)
                        .with_replicate(r)
                        .stream();
                    assert!(firsts.insert(st.next_u64()));
                }
            }
        }
    }

    #[test]
    fn uniform_moments() {
        let mut st = SeedSpec::new(1).stream();
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| st.next_f64()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        // SE of the mean is sqrt(1/12 / n) ~ 6.5e-4
        assert!((mean - 0.5).abs() < 4.0 * (1.0f64 / 12.0 / n as f64).sqrt());
        assert!((var - 1.0 / 12.0).abs() < 2e-3);
        assert!(xs.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn below_is_in_range() {
        let mut st = SeedSpec::new(5).stream();
        let mut hits = [0usize; 7];
        for _ in 0..7000 {
            hits[st.below(7)] += 1;
        }
        assert!(hits.iter().all(|&h| h > 800 && h < 1200));
    }
}
