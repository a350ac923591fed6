use crate::error::{Error, Result};

/// Contiguous partition of the columns into groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Groups {
    starts: Vec<usize>,
    sizes: Vec<usize>,
}

impl Groups {
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidInput("at least one group is required".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidInput("group sizes must be positive".into()));
        }
        let mut starts = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in sizes {
            starts.push(acc);
            acc += s;
        }
        Ok(Self { starts, sizes: sizes.to_vec() })
    }

    /// Groups of `size` columns; the last group takes the remainder.
    pub fn uniform(p: usize, size: usize) -> Result<Self> {
        if size == 0 || p == 0 {
            return Err(Error::InvalidInput("need p > 0 and group size > 0".into()));
        }
        let mut sizes = vec![size; p / size];
        if !p.is_multiple_of(size) {
            sizes.push(p % size);
        }
        Self::from_sizes(&sizes)
    }

    pub fn singletons(p: usize) -> Result<Self> {
        Self::uniform(p, 1)
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn start(&self, g: usize) -> usize {
        self.starts[g]
    }

    pub fn size(&self, g: usize) -> usize {
        self.sizes[g]
    }

    pub fn range(&self, g: usize) -> std::ops::Range<usize> {
        self.starts[g]..self.starts[g] + self.sizes[g]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Total number of columns covered.
    pub fn total(&self) -> usize {
        self.starts.last().map_or(0, |s| s + self.sizes[self.sizes.len() - 1])
    }

    /// Index of the group containing column `j`.
    pub fn group_of(&self, j: usize) -> Option<usize> {
        if j >= self.total() {
            return None;
        }
        Some(self.starts.partition_point(|&s| s <= j) - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition() {
        let g = Groups::from_sizes(&[2, 3, 1]).unwrap();
        assert_eq!(g.total(), 6);
        assert_eq!(g.range(1), 2..5);
        assert_eq!(g.group_of(4), Some(1));
        assert_eq!(g.group_of(5), Some(2));
        assert_eq!(g.group_of(6), None);
        assert_eq!(Groups::uniform(7, 3).unwrap().sizes(), &[3, 3, 1]);
        assert!(Groups::from_sizes(&[1, 0]).is_err());
        assert!(Groups::from_sizes(&[]).is_err());
    }
}
