//! Bit-parallel longest common subsequence (Hyyrö 2004), multi-word.

use std::collections::HashMap;

/// Match masks of a pattern string, one bit per pattern position.
pub(crate) struct PatternMasks {
    len: usize,
    words: usize,
    ascii: Vec<u64>,
    other: HashMap<char, Vec<u64>>,
    zero: Vec<u64>,
}

impl PatternMasks {
    pub(crate) fn new(pattern: &[char]) -> Self {
        let words = pattern.len().div_ceil(64).max(1);
        let mut ascii = vec![0u64; 128 * words];
        let mut other: HashMap<char, Vec<u64>> = HashMap::new();
        for (i, &c) in pattern.iter().enumerate() {
            let (w, bit) = (i / 64, 1u64 << (i % 64));
            if c.is_ascii() {
                ascii[c as usize * words + w] |= bit;
            } else {
                other.entry(c).or_insert_with(|| vec![0; words])[w] |= bit;
            }
        }
        PatternMasks {
            len: pattern.len(),
            words,
            ascii,
            other,
            zero: vec![0; words],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn contains(&self, c: char) -> bool {
        self.mask(c).iter().any(|&w| w != 0)
    }

    fn mask(&self, c: char) -> &[u64] {
        if c.is_ascii() {
            let at = c as usize * self.words;
            &self.ascii[at..at + self.words]
        } else {
            self.other.get(&c).map_or(&self.zero, |v| v.as_slice())
        }
    }

    pub(crate) fn state(&self) -> LcsState<'_> {
        LcsState {
            masks: self,
            v: vec![u64::MAX; self.words],
        }
    }
}

/// Running LCS between the pattern and a text fed one character at a time.
pub(crate) struct LcsState<'a> {
    masks: &'a PatternMasks,
    v: Vec<u64>,
}

impl LcsState<'_> {
    pub(crate) fn push(&mut self, c: char) {
        let m = self.masks.mask(c);
        let mut carry = false;
        for (v, &mw) in self.v.iter_mut().zip(m) {
            let u = *v & mw;
            let (sum, c1) = v.overflowing_add(u);
            let (sum, c2) = sum.overflowing_add(carry as u64);
            carry = c1 || c2;
            *v = sum | (*v & !mw);
        }
    }

    /// LCS length of the pattern and everything pushed so far.
    pub(crate) fn lcs(&self) -> usize {
        let n = self.masks.len;
        let mut ones = 0usize;
        for (i, &w) in self.v.iter().enumerate() {
            let lo = i * 64;
            if lo >= n {
                break;
            }
            let bits = (n - lo).min(64);
            let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
            ones += (w & mask).count_ones() as usize;
        }
        n - ones
    }
}

/// LCS length of two character sequences.
pub(crate) fn lcs_len(a: &[char], b: &[char]) -> usize {
    let (pat, text) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if pat.is_empty() {
        return 0;
    }
    let masks = PatternMasks::new(pat);
    let mut st = masks.state();
    for &c in text {
        st.push(c);
    }
    st.lcs()
}
