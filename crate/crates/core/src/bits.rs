//! Fixed-width two-valued bit vectors.
//!
//! Values are stored little-endian in 64-bit words. Bits above `width` are
//! always zero; every constructor and mutator re-establishes that invariant.

use std::fmt;

/// Number of 64-bit words needed to hold `width` bits (at least one).
pub fn words_for(width: u32) -> usize {
    (width.max(1) as usize).div_ceil(64)
}

/// Mask for the top word of a `width`-bit value.
pub fn top_mask(width: u32) -> u64 {
    let rem = width % 64;
    if rem == 0 {
        u64::MAX
    } else {
        (1u64 << rem) - 1
    }
}

/// Mask for a value of at most 64 bits.
pub fn mask64(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Clear every bit at or above `width` in a word slice.
pub fn mask_words(words: &mut [u64], width: u32) {
    let n = words_for(width);
    if let Some(last) = words.get_mut(n - 1) {
        *last &= top_mask(width);
    }
    for w in words.iter_mut().skip(n) {
        *w = 0;
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bits {
    width: u32,
    words: Vec<u64>,
}

impl Bits {
    pub fn zero(width: u32) -> Self {
        assert!(width >= 1, "bit vectors have at least one bit");
        Bits {
            width,
            words: vec![0; words_for(width)],
        }
    }

    pub fn ones(width: u32) -> Self {
        let mut b = Bits {
            width,
            words: vec![u64::MAX; words_for(width)],
        };
        b.normalize();
        b
    }

    pub fn from_u64(value: u64, width: u32) -> Self {
        let mut b = Bits::zero(width);
        b.words[0] = value;
        b.normalize();
        b
    }

    /// Build from little-endian words, truncating or zero-extending to `width`.
    pub fn from_words(words: &[u64], width: u32) -> Self {
        let mut b = Bits::zero(width);
        let n = b.words.len().min(words.len());
        b.words[..n].copy_from_slice(&words[..n]);
        b.normalize();
        b
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub fn normalize(&mut self) {
        let w = self.width;
        mask_words(&mut self.words, w);
    }

    /// Low 64 bits of the value.
    pub fn to_u64(&self) -> u64 {
        self.words[0]
    }

    /// The value as `u64` if it fits.
    pub fn as_u64(&self) -> Option<u64> {
        if self.words[1..].iter().all(|&w| w == 0) {
            Some(self.words[0])
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_ones(&self) -> bool {
        *self == Bits::ones(self.width)
    }

    pub fn bit(&self, i: u32) -> bool {
        if i >= self.width {
            return false;
        }
        (self.words[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    pub fn set_bit(&mut self, i: u32, v: bool) {
        if i >= self.width {
            return;
        }
        let w = &mut self.words[(i / 64) as usize];
        if v {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    /// Zero-extend or truncate to `width`.
    pub fn resize(&self, width: u32) -> Bits {
        Bits::from_words(&self.words, width)
    }

    pub fn to_binary_string(&self) -> String {
        (0..self.width)
            .rev()
            .map(|i| if self.bit(i) { '1' } else { '0' })
            .collect()
    }

    pub fn to_hex_string(&self) -> String {
        let digits = (self.width as usize).div_ceil(4);
        let mut s = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let lsb = (d * 4) as u32;
            let mut nib = 0u8;
            for k in 0..4 {
                if self.bit(lsb + k) {
                    nib |= 1 << k;
                }
            }
            s.push(char::from_digit(nib as u32, 16).unwrap());
        }
        s
    }

    /// Parse `0x..`, `0b..` or decimal text into a value of `width` bits.
    /// Digits that do not fit are truncated. Underscores are ignored.
    pub fn parse(text: &str, width: u32) -> Option<Bits> {
        let t: String = text.trim().chars().filter(|&c| c != '_').collect();
        if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
            Bits::parse_radix(hex, 16, width)
        } else if let Some(bin) = t.strip_prefix("0b").or_else(|| t.strip_prefix("0B")) {
            Bits::parse_radix(bin, 2, width)
        } else {
            Bits::parse_radix(&t, 10, width)
        }
    }

    pub fn parse_radix(digits: &str, radix: u32, width: u32) -> Option<Bits> {
        if digits.is_empty() {
            return None;
        }
        // accumulate at a generous width, then truncate
        let acc_width = width.max(digits.len() as u32 * 4 + 4);
        let mut acc = Bits::zero(acc_width);
        for c in digits.chars() {
            let d = c.to_digit(radix)? as u64;
            acc.mul_small_add(radix as u64, d);
        }
        Some(acc.resize(width))
    }

    fn mul_small_add(&mut self, mul: u64, add: u64) {
        let mut carry = add as u128;
        for w in self.words.iter_mut() {
            let v = (*w as u128) * (mul as u128) + carry;
            *w = v as u64;
            carry = v >> 64;
        }
        self.normalize();
    }

    /// Decimal rendering, used for diagnostics and `$display`.
    pub fn to_decimal_string(&self) -> String {
        if let Some(v) = self.as_u64() {
            return v.to_string();
        }
        let mut digits = Vec::new();
        let mut cur = self.words.clone();
        while cur.iter().any(|&w| w != 0) {
            let mut rem: u128 = 0;
            for w in cur.iter_mut().rev() {
                let v = (rem << 64) | *w as u128;
                *w = (v / 10) as u64;
                rem = v % 10;
            }
            digits.push(char::from_digit(rem as u32, 10).unwrap());
        }
        digits.iter().rev().collect()
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'h{}", self.width, self.to_hex_string())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'h{}", self.width, self.to_hex_string())
    }
}
