//! Hierarchical random streams.
//!
//! A stream is a root seed plus a path of child indices. The generator for a
//! stream is a ChaCha8 instance keyed by a SHA-256 digest of that pair, so a
//! stream can be re-created anywhere (including other threads) and child
//! streams never overlap their parent or siblings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Generator = ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    root_seed: u64,
    path: Vec<u64>,
}

impl RngStream {
    pub fn new(root_seed: u64) -> Self {
        RngStream { root_seed, path: Vec::new() }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Child stream `index` of this stream.
    pub fn derive(&self, index: u64) -> RngStream {
        let mut path = self.path.clone();
        path.push(index);
        RngStream { root_seed: self.root_seed, path }
    }

    /// Shorthand for a chain of `derive` calls.
    pub fn derive_path(&self, indices: &[u64]) -> RngStream {
        let mut path = self.path.clone();
        path.extend_from_slice(indices);
        RngStream { root_seed: self.root_seed, path }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> Generator {
        let mut h = Sha256::new();
        h.update(b"frontlab-stream");
        h.update(self.root_seed.to_le_bytes());
        h.update((self.path.len() as u64).to_le_bytes());
        for p in &self.path {
            h.update(p.to_le_bytes());
        }
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }
}

/// Child stream `index` of `parent`.
pub fn derive_stream(parent: &RngStream, index: u64) -> RngStream {
    parent.derive(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(s: &RngStream, n: usize) -> Vec<u64> {
        let mut g = s.generator();
        (0..n).map(|_| g.random::<u64>()).collect()
    }

    #[test]
    fn same_stream_same_draws() {
        let s = RngStream::new(42).derive(3);
        assert_eq!(draws(&s, 100), draws(&s.clone(), 100));
    }

    #[test]
    fn siblings_and_parent_differ() {
        let root = RngStream::new(42);
        let a = draws(&root.derive(0), 1000);
        let b = draws(&root.derive(1), 1000);
        let p = draws(&root, 1000);
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
        assert!(a.iter().zip(&p).all(|(x, y)| x != y));
    }

    #[test]
    fn path_length_matters() {
        let root = RngStream::new(0);
        assert_ne!(draws(&root, 4), draws(&root.derive(0), 4));
        assert_ne!(draws(&root.derive(0).derive(0), 4), draws(&root.derive(0), 4));
        assert_eq!(root.derive(1).derive(2), root.derive_path(&[1, 2]));
    }

    #[test]
    fn different_roots_differ() {
        assert_ne!(draws(&RngStream::new(1), 8), draws(&RngStream::new(2), 8));
    }
}
