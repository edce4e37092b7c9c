use alloc::vec::Vec;

/// Short/medium/long word-count boundaries.
pub const BUCKET_BOUNDARIES: (usize, usize) = (34, 48);

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Indices of items per bucket: `len <= lo`, `lo < len <= hi`, `len > hi`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LengthBuckets {
    pub short: Vec<usize>,
    pub medium: Vec<usize>,
    pub long: Vec<usize>,
}

impl LengthBuckets {
    pub fn sizes(&self) -> [usize; 3] {
        [self.short.len(), self.medium.len(), self.long.len()]
    }

    pub fn named(&self) -> [(&'static str, &[usize]); 3] {
        [("short", &self.short), ("medium", &self.medium), ("long", &self.long)]
    }
}

pub fn split_by_length(lengths: &[usize], boundaries: (usize, usize)) -> LengthBuckets {
    let mut b = LengthBuckets::default();
    for (i, &len) in lengths.iter().enumerate() {
        if len <= boundaries.0 {
            b.short.push(i);
        } else if len <= boundaries.1 {
            b.medium.push(i);
        } else {
            b.long.push(i);
        }
    }
    b
}

/// Boundaries at the 1/3 and 2/3 order statistics, so that distinct
/// lengths fall into three groups whose sizes differ by at most one.
pub fn tertile_boundaries(lengths: &[usize]) -> Option<(usize, usize)> {
    if lengths.is_empty() {
        return None;
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let at = |k: usize| sorted[k.div_ceil(3).max(1) - 1];
    Some((at(n), at(2 * n)))
}
