//! Counter-based Philox4x32-10 generator.
//!
//! Every draw is a pure function of `(seed, particle, step, stream, block)`, so
//! results do not depend on thread scheduling and the same Brownian increments
//! can be replayed across Picard iterates.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let p0 = u64::from(M0) * u64::from(ctr[0]);
    let p1 = u64::from(M1) * u64::from(ctr[2]);
    [
        ((p1 >> 32) as u32) ^ ctr[1] ^ key[0],
        p1 as u32,
        ((p0 >> 32) as u32) ^ ctr[3] ^ key[1],
        p0 as u32,
    ]
}

/// The raw Philox4x32 block function with 10 rounds.
#[inline]
pub fn philox4x32(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    ctr = round(ctr, key);
    for _ in 1..10 {
        key[0] = key[0].wrapping_add(W0);
        key[1] = key[1].wrapping_add(W1);
        ctr = round(ctr, key);
    }
    ctr
}

/// Independent substreams of one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum Stream {
    Brownian = 0,
    Initial = 1,
    Probe = 2,
    Aux = 3,
}

#[inline]
fn unit53(hi: u32, lo: u32) -> f64 {
    let bits = (u64::from(hi) << 21) ^ (u64::from(lo) >> 11);
    bits as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    key: [u32; 2],
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
        }
    }

    #[inline]
    pub fn block(&self, stream: Stream, index: u64, step: u32, block: u32) -> [u32; 4] {
        let ctr = [
            index as u32,
            (index >> 32) as u32,
            step,
            ((stream as u32) << 24) | (block & 0x00FF_FFFF),
        ];
        philox4x32(ctr, self.key)
    }

    /// Two uniforms in [0, 1).
    #[inline]
    pub fn uniforms(&self, stream: Stream, index: u64, step: u32, block: u32) -> [f64; 2] {
        let r = self.block(stream, index, step, block);
        [unit53(r[0], r[1]), unit53(r[2], r[3])]
    }

    /// Fills `out` with standard normals via Box–Muller, two per block.
    pub fn normals(&self, stream: Stream, index: u64, step: u32, out: &mut [f64]) {
        for (b, pair) in out.chunks_mut(2).enumerate() {
            let [u1, u2] = self.uniforms(stream, index, step, b as u32);
            let r = (-2.0 * (1.0 - u1).ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            pair[0] = r * c;
            if pair.len() > 1 {
                pair[1] = r * s;
            }
        }
    }
}

/// Sequential view over one `(stream, index)` lane, for probe generation.
#[derive(Clone, Debug)]
pub struct SeqRng {
    rng: CounterRng,
    stream: Stream,
    index: u64,
    counter: u64,
    spare: Option<f64>,
}

impl SeqRng {
    pub fn new(seed: u64, stream: Stream, index: u64) -> Self {
        Self {
            rng: CounterRng::new(seed),
            stream,
            index,
            counter: 0,
            spare: None,
        }
    }

    fn next_pair(&mut self) -> [f64; 2] {
        let c = self.counter;
        self.counter += 1;
        self.rng
            .uniforms(self.stream, self.index, (c >> 24) as u32, (c & 0xFF_FFFF) as u32)
    }

    pub fn uniform(&mut self) -> f64 {
        self.next_pair()[0]
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let [u1, u2] = self.next_pair();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors published with the Random123 reference implementation.
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32([0, 0, 0, 0], [0, 0]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn normals_have_unit_variance() {
        let rng = CounterRng::new(42);
        let n = 200_000;
        let mut buf = [0.0; 2];
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..n {
            rng.normals(Stream::Brownian, i, 0, &mut buf);
            for z in buf {
                s1 += z;
                s2 += z * z;
            }
        }
        let m = s1 / (2 * n) as f64;
        let v = s2 / (2 * n) as f64 - m * m;
        assert!(m.abs() < 0.01, "mean {m}");
        assert!((v - 1.0).abs() < 0.01, "var {v}");
    }

    #[test]
    fn draws_are_pure_functions_of_counter() {
        let rng = CounterRng::new(7);
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        rng.normals(Stream::Brownian, 12, 5, &mut a);
        rng.normals(Stream::Brownian, 12, 5, &mut b);
        assert_eq!(a, b);
        rng.normals(Stream::Initial, 12, 5, &mut b);
        assert_ne!(a, b);
    }
}
