//! MSB-first bitstream writer and reader.
//!
//! Values are appended as their `width` low bits, most significant bit
//! first. The byte buffer is padded with zero bits only after the full
//! payload; the logical bit length is tracked separately.

#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        BitWriter::default()
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    /// Appends the `width` low bits of `value`, MSB first. Width 0 is a
    /// no-op.
    pub fn write_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        debug_assert!(width == 64 || value < (1u64 << width));
        for i in (0..width).rev() {
            let bit = (value >> i) & 1;
            let offset = (self.bit_len % 8) as u8;
            if offset == 0 {
                self.bytes.push(0);
            }
            if bit != 0 {
                *self.bytes.last_mut().unwrap() |= 0x80 >> offset;
            }
            self.bit_len += 1;
        }
    }

    pub fn into_bytes(self) -> (Vec<u8>, u64) {
        (self.bytes, self.bit_len)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("bitstream exhausted: needed {needed} bits at position {pos} of {len}")]
pub struct BitstreamOverrun {
    pub pos: u64,
    pub needed: u32,
    pub len: u64,
}

#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    bit_len: u64,
    pos: u64,
}

impl<'a> BitReader<'a> {
    /// Reads from `bytes`, honoring a logical bit length that may be
    /// shorter than the byte buffer.
    pub fn new(bytes: &'a [u8], bit_len: u64) -> Self {
        debug_assert!(bit_len <= bytes.len() as u64 * 8);
        BitReader {
            bytes,
            bit_len,
            pos: 0,
        }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.bit_len - self.pos
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64, BitstreamOverrun> {
        debug_assert!(width <= 64);
        if self.remaining() < width as u64 {
            return Err(BitstreamOverrun {
                pos: self.pos,
                needed: width,
                len: self.bit_len,
            });
        }
        let mut value = 0u64;
        for _ in 0..width {
            let byte = self.bytes[(self.pos / 8) as usize];
            let bit = (byte >> (7 - (self.pos % 8))) & 1;
            value = (value << 1) | bit as u64;
            self.pos += 1;
        }
        Ok(value)
    }
}
