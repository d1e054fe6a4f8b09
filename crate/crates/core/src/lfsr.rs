//! 16-bit Fibonacci LFSR (x^16 + x^15 + x^13 + x^4 + 1), maximal length.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("LFSR seed must be non-zero")]
pub struct ZeroSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lfsr16 {
    state: u16,
}

impl Lfsr16 {
    pub fn new(seed: u16) -> Result<Self, ZeroSeed> {
        if seed == 0 {
            Err(ZeroSeed)
        } else {
            Ok(Self { state: seed })
        }
    }

    pub fn state(&self) -> u16 {
        self.state
    }

    /// Emits the low bit and shifts in the feedback from taps 16, 15, 13, 4.
    pub fn next_bit(&mut self) -> bool {
        let s = self.state;
        let out = s & 1 == 1;
        let feedback = (s ^ (s >> 1) ^ (s >> 3) ^ (s >> 12)) & 1;
        self.state = (s >> 1) | (feedback << 15);
        out
    }

    /// First `n` output bits from `seed`.
    pub fn sequence(seed: u16, n: usize) -> Result<Vec<bool>, ZeroSeed> {
        let mut lfsr = Self::new(seed)?;
        Ok((0..n).map(|_| lfsr.next_bit()).collect())
    }
}

impl Iterator for Lfsr16 {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        Some(self.next_bit())
    }
}
