//! Set partitions of `{0, .., k−1}` and the lattice operations the expansion
//! oracle needs.
//!
//! A partition is stored as its restricted growth string: `labels[i]` is the
//! block of element `i`, blocks numbered by first appearance. That makes the
//! canonical form (blocks ordered by least element) the only form, so derived
//! equality is partition equality.

use std::fmt;

use crate::error::{Error, Result};

/// Largest ground set [`all_partitions`] will enumerate (Bell(10) = 115975).
pub const MAX_K: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetPartition {
    labels: Vec<usize>,
    num_blocks: usize,
}

impl SetPartition {
    /// Builds a partition from per-element labels, relabelling to canonical form.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map: Vec<Option<usize>> = Vec::new();
        let mut next = 0;
        let canonical = labels
            .iter()
            .map(|&l| {
                if l >= map.len() {
                    map.resize(l + 1, None);
                }
                *map[l].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        Self {
            labels: canonical,
            num_blocks: next,
        }
    }

    /// Builds a partition of `{0, .., k−1}` from explicit blocks.
    pub fn from_blocks(k: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; k];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &e in block {
                if e >= k {
                    return Err(Error::InvalidPartition(format!("element {e} outside 0..{k}")));
                }
                if labels[e] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("element {e} repeated")));
                }
                labels[e] = b;
            }
        }
        if let Some(e) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidPartition(format!("element {e} not covered")));
        }
        Ok(Self::from_labels(&labels))
    }

    /// The single-block partition `1_k`.
    pub fn one_block(k: usize) -> Self {
        Self {
            labels: vec![0; k],
            num_blocks: usize::from(k > 0),
        }
    }

    /// The all-singletons partition `0_k`.
    pub fn singletons(k: usize) -> Self {
        Self {
            labels: (0..k).collect(),
            num_blocks: k,
        }
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    /// Block index of every element.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Blocks in canonical order, each sorted.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.num_blocks];
        for (e, &l) in self.labels.iter().enumerate() {
            blocks[l].push(e);
        }
        blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_blocks];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn has_singleton(&self) -> bool {
        self.block_sizes().contains(&1)
    }

    /// `self ≤ other`: every block of `self` lies inside a block of `other`.
    pub fn refines(&self, other: &Self) -> bool {
        if self.k() != other.k() {
            return false;
        }
        let mut image = vec![usize::MAX; self.num_blocks];
        for (&a, &b) in self.labels.iter().zip(&other.labels) {
            if image[a] == usize::MAX {
                image[a] = b;
            } else if image[a] != b {
                return false;
            }
        }
        true
    }

    /// Least upper bound: connected components of the union of the blocks.
    pub fn join(&self, other: &Self) -> Result<Self> {
        if self.k() != other.k() {
            return Err(Error::PartitionMismatch(self.k(), other.k()));
        }
        let k = self.k();
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for p in [self, other] {
            let mut first = vec![usize::MAX; p.num_blocks];
            for (e, &l) in p.labels.iter().enumerate() {
                if first[l] == usize::MAX {
                    first[l] = e;
                } else {
                    let (a, b) = (find(&mut parent, first[l]), find(&mut parent, e));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let roots: Vec<usize> = (0..k).map(|e| find(&mut parent, e)).collect();
        Ok(Self::from_labels(&roots))
    }

    /// All `σ ≥ self`, i.e. partitions of the set of blocks lifted back to
    /// the ground set.
    pub fn coarsenings(&self) -> Vec<Self> {
        rgs(self.num_blocks)
            .map(|merge| Self::from_labels(&self.labels.iter().map(|&l| merge[l]).collect::<Vec<_>>()))
            .collect()
    }

    /// Restriction to a subset of the ground set, relabelled to `0..subset.len()`.
    pub fn restrict(&self, subset: &[usize]) -> Self {
        Self::from_labels(&subset.iter().map(|&e| self.labels[e]).collect::<Vec<_>>())
    }
}

impl fmt::Display for SetPartition {
    /// One-based, blocks separated by `|`, e.g. `12|34`. Elements above 9
    /// are comma-separated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = if self.k() > 9 { "," } else { "" };
        let blocks: Vec<String> = self
            .blocks()
            .iter()
            .map(|b| b.iter().map(|e| (e + 1).to_string()).collect::<Vec<_>>().join(sep))
            .collect();
        write!(f, "{}", blocks.join("|"))
    }
}

/// Restricted growth strings of length `k`, in lexicographic order.
fn rgs(k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = Some(vec![0; k]);
    std::iter::from_fn(move || {
        let out = current.take()?;
        // Next string: bump the rightmost position that can grow.
        let mut next = out.clone();
        let mut prefix_max = vec![0; k];
        for i in 1..k {
            prefix_max[i] = prefix_max[i - 1].max(next[i - 1]);
        }
        let mut i = k;
        while i > 1 {
            i -= 1;
            if next[i] <= prefix_max[i] {
                next[i] += 1;
                for v in &mut next[i + 1..] {
                    *v = 0;
                }
                current = Some(next);
                break;
            }
        }
        Some(out)
    })
}

/// Every partition of `{0, .., k−1}`, in restricted-growth order.
pub fn all_partitions(k: usize) -> Result<Vec<SetPartition>> {
    if k == 0 || k > MAX_K {
        return Err(Error::KTooLarge { k, max: MAX_K });
    }
    Ok(rgs(k).map(|l| SetPartition::from_labels(&l)).collect())
}

/// Partitions with no singleton block: the only ones with non-zero `m`.
pub fn partitions_without_singletons(k: usize) -> Result<Vec<SetPartition>> {
    if k == 0 {
        return Ok(vec![SetPartition::one_block(0)]);
    }
    Ok(all_partitions(k)?.into_iter().filter(|p| !p.has_singleton()).collect())
}

/// Perfect matchings of `{0, .., 2k−1}`: partitions with every block a pair.
pub fn perfect_matchings(two_k: usize) -> Result<Vec<SetPartition>> {
    Ok(all_partitions(two_k)?
        .into_iter()
        .filter(|p| p.block_sizes().iter().all(|&s| s == 2))
        .collect())
}

/// Ordered pairs of perfect matchings of `[2k]` whose join is one block.
pub fn connected_matching_pairs(k: usize) -> Result<usize> {
    let matchings = perfect_matchings(2 * k)?;
    let full = SetPartition::one_block(2 * k);
    let mut count = 0;
    for a in &matchings {
        for b in &matchings {
            if a.join(b)? == full {
                count += 1;
            }
        }
    }
    Ok(count)
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// `m(ρ) = ∏_b (−1)^(#b−1) (#b−1)!`, zero with a singleton block.
pub fn m_coeff(rho: &SetPartition) -> i64 {
    rho.block_sizes()
        .iter()
        .map(|&s| match s {
            1 => 0,
            _ => sign(s - 1) * factorial(s - 1),
        })
        .product()
}

/// `m♯(ρ) = ∏_b (−1)^(#b−1) (#b−1)`, zero with a singleton block.
pub fn m_sharp_coeff(rho: &SetPartition) -> i64 {
    rho.block_sizes()
        .iter()
        .map(|&s| sign(s - 1) * (s as i64 - 1))
        .product()
}

/// Möbius function of the partition lattice to the top: `(−1)^(#ρ−1) (#ρ−1)!`.
pub fn mobius_to_top(rho: &SetPartition) -> i64 {
    let b = rho.num_blocks();
    sign(b - 1) * factorial(b - 1)
}

fn sign(e: usize) -> i64 {
    if e.is_multiple_of(2) {
        1
    } else {
        -1
    }
}
