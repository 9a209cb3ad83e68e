//! Flat storage for the strict upper triangle of a symmetric `n x n` matrix.

/// Number of independent off-diagonal entries, `n(n-1)/2`.
#[inline]
pub fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Offset of pair `(i, j)`, `i < j < n`, in row-major upper-triangle order.
#[inline]
pub fn pair_offset(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// All pairs `(i, j)` with `i < j < n`, in storage order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpperTri<V> {
    n: usize,
    data: Vec<V>,
}

impl<V: Clone> UpperTri<V> {
    pub fn filled(n: usize, value: V) -> Self {
        Self {
            n,
            data: vec![value; num_pairs(n)],
        }
    }
}

impl<V> UpperTri<V> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> V) -> Self {
        Self {
            n,
            data: pairs(n).map(|(i, j)| f(i, j)).collect(),
        }
    }

    /// Wraps values already laid out in [`pairs`] order.
    ///
    /// Panics if `values.len() != num_pairs(n)`.
    pub fn from_vec(n: usize, values: Vec<V>) -> Self {
        assert_eq!(values.len(), num_pairs(n), "upper-triangle length");
        Self { n, data: values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Symmetric lookup; `i != j` required.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &V {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        &self.data[pair_offset(self.n, a, b)]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut V {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let n = self.n;
        &mut self.data[pair_offset(n, a, b)]
    }

    pub fn values(&self) -> &[V] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [V] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<V> {
        self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &V)> {
        pairs(self.n).zip(self.data.iter())
    }

    pub fn map<W>(&self, mut f: impl FnMut(&V) -> W) -> UpperTri<W> {
        UpperTri {
            n: self.n,
            data: self.data.iter().map(&mut f).collect(),
        }
    }
}
