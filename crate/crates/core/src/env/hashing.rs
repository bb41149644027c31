//! Signed feature hashing for bag-of-token text features.

use std::hash::Hasher;

use fnv::FnvHasher;

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Maps tokens into a fixed number of buckets. The bucket comes from one
/// FNV-1a hash of the token, the sign from a second, salted hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHasher {
    dim: usize,
}

impl FeatureHasher {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "hash dimension must be positive");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bucket(&self, token: &str) -> (usize, f64) {
        let mut h = FnvHasher::default();
        h.write(token.as_bytes());
        let index = (h.finish() % self.dim as u64) as usize;
        let mut s = FnvHasher::with_key(0x9e37_79b9_7f4a_7c15);
        s.write(b"sign:");
        s.write(token.as_bytes());
        let sign = if s.finish() & 1 == 0 { 1.0 } else { -1.0 };
        (index, sign)
    }

    /// Signed counts, L2-normalized (all-zero input stays zero).
    pub fn transform<'a, I>(&self, tokens: I) -> Vec<f64>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut out = vec![0.0; self.dim];
        for tok in tokens {
            let (i, sign) = self.bucket(tok);
            out[i] += sign;
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_lowercases_and_splits() {
        assert_eq!(
            tokenize("Tech Giants' Report: Record-Earnings, 2019!"),
            vec!["tech", "giants", "report", "record", "earnings", "2019"]
        );
        assert!(tokenize("  --  ").is_empty());
    }

    #[test]
    fn hashing_is_deterministic_and_normalized() {
        let h = FeatureHasher::new(64);
        let toks = tokenize("the quick brown fox jumps over the lazy dog");
        let a = h.transform(toks.iter().map(String::as_str));
        let b = h.transform(toks.iter().map(String::as_str));
        assert_eq!(a, b);
        let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(h.transform(std::iter::empty()), vec![0.0; 64]);
    }

    #[test]
    fn both_signs_occur() {
        let h = FeatureHasher::new(16);
        let signs: Vec<f64> = (0..200).map(|i| h.bucket(&format!("tok{i}")).1).collect();
        assert!(signs.contains(&1.0) && signs.contains(&-1.0));
    }
}
