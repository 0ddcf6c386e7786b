use super::CsrMatrix;
use crate::{Error, Result};

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern.
///
/// Returns `order` with `order[new] = old`. Ties are broken by node index so
/// the ordering is deterministic.
pub fn reverse_cuthill_mckee(pattern: &CsrMatrix) -> Vec<usize> {
    let n = pattern.nrows();
    assert_eq!(n, pattern.ncols());
    let degree = |v: usize| pattern.row(v).0.len();

    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut visited = vec![false; n];

    while order.len() < n {
        // pseudo-peripheral start: min-degree unvisited node, then walk to a
        // farthest node of the BFS tree a couple of times
        let mut start = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree(v), v))
            .unwrap();
        for _ in 0..2 {
            if let Some(far) = bfs_farthest(pattern, start, &visited) {
                start = far;
            }
        }

        let begin = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = begin;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut nbrs: Vec<usize> = pattern
                .row(v)
                .0
                .iter()
                .copied()
                .filter(|&u| u != v && !visited[u])
                .collect();
            nbrs.sort_by_key(|&u| (degree(u), u));
            for u in nbrs {
                if !visited[u] {
                    visited[u] = true;
                    order.push(u);
                }
            }
        }
        order[begin..].reverse();
    }
    order
}

fn bfs_farthest(pattern: &CsrMatrix, start: usize, excluded: &[bool]) -> Option<usize> {
    let n = pattern.nrows();
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    let mut last = start;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &u in pattern.row(v).0 {
            if !seen[u] && !excluded[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    if last == start {
        None
    } else {
        Some(last)
    }
}

/// Banded Cholesky factorization `P A Pᵀ = L Lᵀ` of a symmetric positive
/// definite matrix, with the permutation applied internally on solves.
///
/// Row `i` of the lower band is stored contiguously; entry `(i, j)` with
/// `i - bw <= j <= i` lives at `data[i * (bw + 1) + (j + bw - i)]`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
    /// order[new] = old
    order: Vec<usize>,
}

impl BandCholesky {
    /// Factor an SPD matrix given in CSR form using the supplied ordering.
    pub fn factor(matrix: &CsrMatrix, order: Vec<usize>) -> Result<Self> {
        let n = matrix.nrows();
        assert_eq!(n, matrix.ncols());
        assert_eq!(order.len(), n);
        let mut rank = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            rank[old] = new;
        }
        let mut bw = 0usize;
        for (r, c, _) in matrix.iter() {
            let d = rank[r].abs_diff(rank[c]);
            bw = bw.max(d);
        }
        let stride = bw + 1;
        let mut data = vec![0.0f64; n * stride];
        for (r, c, v) in matrix.iter() {
            let (i, j) = (rank[r], rank[c]);
            if j <= i {
                data[i * stride + (j + bw - i)] = v;
            }
        }

        // in-place band Cholesky
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let len = j - lo;
                let s = if len > 0 {
                    let ri = &data[i * stride + (lo + bw - i)..i * stride + (j + bw - i)];
                    let rj = &data[j * stride + (lo + bw - j)..j * stride + bw];
                    dot(ri, rj)
                } else {
                    0.0
                };
                let a = data[i * stride + (j + bw - i)] - s;
                if i == j {
                    if a <= 0.0 {
                        return Err(Error::SingularSystem(format!(
                            "band Cholesky pivot {a:.3e} at row {i}"
                        )));
                    }
                    data[i * stride + bw] = a.sqrt();
                } else {
                    let djj = data[j * stride + bw];
                    data[i * stride + (j + bw - i)] = a / djj;
                }
            }
        }

        Ok(Self {
            n,
            bw,
            data,
            order,
        })
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Solve `A x = b`, returning `x` in the original (unpermuted) numbering.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let stride = self.bw + 1;
        let mut y: Vec<f64> = self.order.iter().map(|&old| b[old]).collect();
        // forward: L y' = y
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let mut s = y[i];
            let row = &self.data[i * stride..(i + 1) * stride];
            for k in lo..i {
                s -= row[k + self.bw - i] * y[k];
            }
            y[i] = s / row[self.bw];
        }
        // backward: Lᵀ x = y'
        for i in (0..self.n).rev() {
            let hi = (i + self.bw).min(self.n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= self.data[k * stride + (i + self.bw - k)] * y[k];
            }
            y[i] = s / self.data[i * stride + self.bw];
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.order.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for k in 0..b.len() {
        s += a[k] * b[k];
    }
    s
}
