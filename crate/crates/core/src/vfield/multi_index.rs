//! Dense graded-lexicographic storage of multi-indices `m` with `|m| <= k`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub type MultiIndex = Vec<u32>;

/// Every multi-index of `n` variables and total degree exactly `degree`,
/// in lexicographic order with the first exponent largest first.
pub fn homogeneous_indices(n: usize, degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = vec![0u32; n];
    fill(n, 0, degree as u32, &mut current, &mut out);
    out
}

fn fill(n: usize, pos: usize, remaining: u32, current: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
    if n == 0 {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        fill(n, pos + 1, remaining - e, current, out);
    }
    current[pos] = 0;
}

/// `C(n + k, k)`: number of monomials of degree at most `k` in `n` variables.
pub fn monomial_count(n: usize, k: usize) -> usize {
    binomial(n + k, k)
}

pub fn binomial(a: usize, b: usize) -> usize {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    (0..b).fold(1usize, |acc, i| acc * (a - i) / (i + 1))
}

pub fn degree(m: &[u32]) -> usize {
    m.iter().map(|&e| e as usize).sum()
}

/// Index tables for jets of `n` variables truncated at order `k`.
#[derive(Debug)]
pub struct JetLayout {
    n: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    degrees: Vec<usize>,
    degree_start: Vec<usize>,
    rank: HashMap<MultiIndex, usize>,
    /// `(a, b, a + b)` for every pair whose product stays within the order.
    products: Vec<(u32, u32, u32)>,
}

impl JetLayout {
    fn build(n: usize, order: usize) -> Self {
        let mut indices = Vec::with_capacity(monomial_count(n, order));
        let mut degree_start = Vec::with_capacity(order + 2);
        for d in 0..=order {
            degree_start.push(indices.len());
            indices.extend(homogeneous_indices(n, d));
        }
        degree_start.push(indices.len());
        let degrees: Vec<usize> = indices.iter().map(|m| degree(m)).collect();
        let rank: HashMap<MultiIndex, usize> = indices.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let mut products = Vec::new();
        let mut sum = vec![0u32; n];
        for (a, ma) in indices.iter().enumerate() {
            for (b, mb) in indices.iter().enumerate() {
                if degrees[a] + degrees[b] > order {
                    continue;
                }
                for i in 0..n {
                    sum[i] = ma[i] + mb[i];
                }
                products.push((a as u32, b as u32, rank[&sum] as u32));
            }
        }
        Self {
            n,
            order,
            indices,
            degrees,
            degree_start,
            rank,
            products,
        }
    }

    /// Shared layout for `(n, order)`; layouts are cached process wide.
    pub fn get(n: usize, order: usize) -> Arc<JetLayout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetLayout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((n, order))
            .or_insert_with(|| Arc::new(JetLayout::build(n, order)))
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index(&self, rank: usize) -> &[u32] {
        &self.indices[rank]
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn degree_of(&self, rank: usize) -> usize {
        self.degrees[rank]
    }

    pub fn rank(&self, m: &[u32]) -> Option<usize> {
        self.rank.get(m).copied()
    }

    /// Ranks holding the monomials of exactly degree `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        if d > self.order {
            return self.len()..self.len();
        }
        self.degree_start[d]..self.degree_start[d + 1]
    }

    pub(crate) fn products(&self) -> &[(u32, u32, u32)] {
        &self.products
    }

    /// Rank of the first-order monomial `x_var`.
    pub fn linear_rank(&self, var: usize) -> usize {
        1 + var
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order_two_variables() {
        let layout = JetLayout::get(2, 2);
        let idx: Vec<_> = layout.indices().to_vec();
        assert_eq!(idx, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(layout.degree_range(2), 3..6);
    }

    #[test]
    fn counts_match_binomials() {
        for n in 1..5 {
            for k in 0..7 {
                assert_eq!(JetLayout::get(n, k).len(), binomial(n + k, k));
                assert_eq!(homogeneous_indices(n, k).len(), binomial(n + k - 1, k));
            }
        }
    }

    #[test]
    fn linear_ranks_are_unit_vectors() {
        let layout = JetLayout::get(3, 2);
        for v in 0..3 {
            let m = layout.index(layout.linear_rank(v));
            assert_eq!(degree(m), 1);
            assert_eq!(m[v], 1);
        }
    }
}
