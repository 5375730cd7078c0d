/// Deterministic feature-hashing embedder over lower-cased character
/// trigrams and word unigrams. Used as an offline stand-in when no fixture
/// vector exists for a text; similar strings score high, unrelated ones low.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedEmbedder {
    pub dim: usize,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        HashedEmbedder { dim: 256 }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl HashedEmbedder {
    pub fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        let chars: Vec<char> = format!("  {lower}  ").chars().collect();
        let mut add = |feature: &str, weight: f64| {
            let h = fnv1a(feature.as_bytes());
            let sign = if h & (1 << 63) == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign * weight;
        };
        for w in chars.windows(3) {
            add(&w.iter().collect::<String>(), 1.0);
        }
        for word in lower.split_whitespace() {
            add(&format!("w:{word}"), 2.0);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        } else {
            v[0] = 1.0;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let e = HashedEmbedder::default();
        let a = e.embed("Spacewar! was developed at MIT");
        assert_eq!(a, e.embed("Spacewar! was developed at MIT"));
        assert!((cos(&a, &a) - 1.0).abs() < 1e-12);
        assert!((cos(&e.embed(""), &e.embed("")) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn related_text_scores_higher() {
        let e = HashedEmbedder::default();
        let a = e.embed("founded the company in 1990");
        let b = e.embed("Founded the company in 1990.");
        let c = e.embed("an arcade game with pixel graphics");
        assert!(cos(&a, &b) > 0.8);
        assert!(cos(&a, &c) < cos(&a, &b));
    }
}
