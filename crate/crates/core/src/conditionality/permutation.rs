use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bijection of `1..=N` extended by the identity beyond `N`.
///
/// Images are stored 1-based as `u32`; the witness blocks for large targets
/// run to tens of millions of indices.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    images: Vec<u32>,
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.images.len() <= 16 {
            f.debug_tuple("Permutation").field(&self.images).finish()
        } else {
            write!(f, "Permutation(<{} images>)", self.images.len())
        }
    }
}

/// Above this length `random` switches to the bucketed shuffle.
const SCATTER_MIN: usize = 1 << 16;

fn check_len(n: usize) -> Result<()> {
    if n > u32::MAX as usize {
        return Err(Error::TooLarge {
            dim: n,
            cap: u32::MAX as usize,
            hint: "permutations are stored with 32-bit images",
        });
    }
    Ok(())
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        check_len(n).expect("permutation length fits in u32");
        Self {
            images: (1..=n as u32).collect(),
        }
    }

    /// `k -> n + 1 - k` on `1..=n`.
    pub fn reversal(n: usize) -> Self {
        check_len(n).expect("permutation length fits in u32");
        Self {
            images: (1..=n as u32).rev().collect(),
        }
    }

    /// Uniform shuffle of `1..=n` from a ChaCha8 stream seeded by `seed`.
    ///
    /// Long permutations are drawn by scattering into random buckets and
    /// shuffling each bucket, which is still exactly uniform but keeps the
    /// swaps inside cache.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if n <= SCATTER_MIN {
            let mut p = Self::identity(n);
            p.images.shuffle(&mut rng);
            return p;
        }
        check_len(n).expect("permutation length fits in u32");
        let mut labels = vec![0u8; n];
        rng.fill_bytes(&mut labels);
        let mut offsets = [0usize; 257];
        for &b in &labels {
            offsets[b as usize + 1] += 1;
        }
        for b in 0..256 {
            offsets[b + 1] += offsets[b];
        }
        let mut images = vec![0u32; n];
        let mut next = offsets;
        for (k, &b) in labels.iter().enumerate() {
            images[next[b as usize]] = k as u32 + 1;
            next[b as usize] += 1;
        }
        drop(labels);
        for w in offsets.windows(2) {
            images[w[0]..w[1]].shuffle(&mut rng);
        }
        Self { images }
    }

    /// `images[k - 1] = sigma(k)`, 1-based.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        check_len(n)?;
        let mut seen = vec![false; n];
        for (k, &img) in images.iter().enumerate() {
            if img == 0 || img > n {
                return Err(Error::InvalidPermutation(format!(
                    "sigma({}) = {img} outside 1..={n}",
                    k + 1
                )));
            }
            if std::mem::replace(&mut seen[img - 1], true) {
                return Err(Error::InvalidPermutation(format!("{img} appears twice")));
            }
        }
        Ok(Self {
            images: images.into_iter().map(|i| i as u32).collect(),
        })
    }

    /// One line of comma-separated 1-based images.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        let images = line
            .split(',')
            .filter(|f| !f.trim().is_empty())
            .map(|f| {
                f.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidPermutation(format!("bad image {:?}: {e}", f.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_images(images)
    }

    /// Length of the explicit part.
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `sigma(k)` for `k >= 1`.
    pub fn apply(&self, k: usize) -> usize {
        debug_assert!(k >= 1);
        match self.images.get(k.wrapping_sub(1)) {
            Some(&img) => img as usize,
            None => k,
        }
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.images.len()];
        for (k, &img) in self.images.iter().enumerate() {
            inv[img as usize - 1] = k as u32 + 1;
        }
        Self { images: inv }
    }

    /// `sigma^{-1}({start..=end})` listed increasingly.
    pub fn preimage_of_range(&self, start: usize, end: usize) -> Vec<usize> {
        if start > end {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(end - start + 2);
        if start <= self.len() {
            // images are at most u32::MAX, so both bounds fit
            let lo = start as u32;
            let width = (end.min(self.len()) - start) as u32;
            // branch-free compaction: the hit rate is the block's share of 1..=N
            out.resize(width as usize + 2, 0);
            let mut n = 0;
            for (k, &img) in self.images.iter().enumerate() {
                out[n] = k + 1;
                n += usize::from(img.wrapping_sub(lo) <= width);
            }
            out.truncate(n);
        }
        out.extend(start.max(self.len() + 1)..=end);
        out
    }

    pub fn images(&self) -> Vec<usize> {
        self.images.iter().map(|&i| i as usize).collect()
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(images: Vec<usize>) -> Result<Self> {
        Self::from_images(images)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.images()
    }
}
