use alloc::vec;
use alloc::vec::Vec;

use crate::netbuild::DyadKey;

/// Dense bit set over the dyads of a universe of `n_servers` nodes, indexed
/// by [`DyadKey::index`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadSet {
    n_servers: usize,
    words: Vec<u64>,
}

impl DyadSet {
    pub fn empty(n_servers: usize) -> Self {
        let n = DyadKey::count(n_servers);
        DyadSet {
            n_servers,
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn n_servers(&self) -> usize {
        self.n_servers
    }

    pub fn n_dyads(&self) -> usize {
        DyadKey::count(self.n_servers)
    }

    pub fn insert(&mut self, dyad: DyadKey) {
        let i = self.checked(dyad);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn set_index(&mut self, index: usize, present: bool) {
        debug_assert!(index < self.n_dyads());
        let bit = 1u64 << (index % 64);
        if present {
            self.words[index / 64] |= bit;
        } else {
            self.words[index / 64] &= !bit;
        }
    }

    pub fn contains(&self, dyad: DyadKey) -> bool {
        if (dyad.high() as usize) >= self.n_servers {
            return false;
        }
        self.contains_index(dyad.index())
    }

    pub fn contains_index(&self, index: usize) -> bool {
        index < self.n_dyads() && self.words[index / 64] >> (index % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Linked dyads in index order.
    pub fn iter(&self) -> impl Iterator<Item = DyadKey> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            core::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(DyadKey::from_index(wi * 64 + bit))
            })
        })
    }

    fn checked(&self, dyad: DyadKey) -> usize {
        assert!((dyad.high() as usize) < self.n_servers, "dyad outside the universe");
        dyad.index()
    }
}
