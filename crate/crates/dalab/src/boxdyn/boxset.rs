//! Bitset of boxes with the DAQBOX1 binary format.

use super::{BoxError, BoxGrid};

const MAGIC: &[u8; 8] = b"DAQBOX1\0";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxSet {
    grid: BoxGrid,
    words: Vec<u64>,
}

impl BoxSet {
    pub fn empty(grid: BoxGrid) -> Self {
        BoxSet { grid, words: vec![0; grid.len().div_ceil(64)] }
    }

    pub fn full(grid: BoxGrid) -> Self {
        let mut s = Self::empty(grid);
        for b in 0..grid.len() as u32 {
            s.insert(b);
        }
        s
    }

    pub fn from_indices(grid: BoxGrid, idx: impl IntoIterator<Item = u32>) -> Self {
        let mut s = Self::empty(grid);
        for b in idx {
            s.insert(b);
        }
        s
    }

    pub fn grid(&self) -> BoxGrid {
        self.grid
    }

    #[inline]
    pub fn contains(&self, b: u32) -> bool {
        self.words[(b >> 6) as usize] >> (b & 63) & 1 == 1
    }

    /// Returns true if the box was not yet present.
    #[inline]
    pub fn insert(&mut self, b: u32) -> bool {
        let w = &mut self.words[(b >> 6) as usize];
        let bit = 1u64 << (b & 63);
        let fresh = *w & bit == 0;
        *w |= bit;
        fresh
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros();
                w &= w - 1;
                Some((k as u32) * 64 + t)
            })
        })
    }

    pub fn is_subset(&self, other: &BoxSet) -> Result<bool, BoxError> {
        self.same_grid(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    fn same_grid(&self, other: &BoxSet) -> Result<(), BoxError> {
        if self.grid != other.grid {
            return Err(BoxError::GridMismatch(self.grid.n() as u64, other.grid.n() as u64));
        }
        Ok(())
    }

    /// The set of boxes at resolution n/2 containing a member box.
    pub fn coarsen(&self) -> Result<BoxSet, BoxError> {
        let n = self.grid.n();
        if !n.is_multiple_of(2) {
            return Err(BoxError::BadFormat(format!("cannot halve odd n = {n}")));
        }
        let coarse = BoxGrid::new(n as u64 / 2)?;
        let mut s = BoxSet::empty(coarse);
        for b in self.iter() {
            let [i, j, k] = self.grid.coords(b);
            s.insert(coarse.index(i / 2, j / 2, k / 2));
        }
        Ok(s)
    }

    /// Magic, n as little-endian u64, then ⌈n³/8⌉ bytes with box index b at
    /// bit b % 8 of byte b / 8.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.grid.len().div_ceil(8);
        let mut out = Vec::with_capacity(16 + nbytes);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.grid.n() as u64).to_le_bytes());
        for k in 0..nbytes {
            out.push((self.words[k / 8] >> (8 * (k % 8))) as u8);
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<BoxSet, BoxError> {
        if data.len() < 16 || &data[..8] != MAGIC {
            return Err(BoxError::BadFormat("missing DAQBOX1 header".into()));
        }
        let n = u64::from_le_bytes(data[8..16].try_into().expect("8 bytes"));
        let grid = BoxGrid::new(n)?;
        let nbytes = grid.len().div_ceil(8);
        if data.len() != 16 + nbytes {
            return Err(BoxError::BadFormat(format!("expected {} bytes, got {}", 16 + nbytes, data.len())));
        }
        let mut s = BoxSet::empty(grid);
        for (k, &byte) in data[16..].iter().enumerate() {
            s.words[k / 8] |= (byte as u64) << (8 * (k % 8));
        }
        if grid.len() % 8 != 0 && data[data.len() - 1] >> (grid.len() % 8) != 0 {
            return Err(BoxError::BadFormat("padding bits are set".into()));
        }
        Ok(s)
    }
}
