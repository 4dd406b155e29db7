//! Envelope (skyline) storage and Cholesky factorization for symmetric
//! positive definite matrices, with reverse Cuthill-McKee ordering.
//!
//! Row `i` stores the lower-triangular entries from its first nonzero column
//! up to the diagonal. Fill-in of the Cholesky factor stays inside the
//! envelope, so the factor reuses the same layout.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EnvelopeMatrix {
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeMatrix {
    /// Allocates a zero matrix whose row `i` spans columns `first[i]..=i`.
    pub fn with_profile(first: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            debug_assert!(f <= i);
            offsets.push(total);
            total += i - f + 1;
        }
        offsets.push(total);
        Self { first, offsets, values: vec![0.0; total] }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Number of stored entries.
    pub fn stored(&self) -> usize {
        self.values.len()
    }

    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && j >= self.first[i], "({i}, {j}) outside envelope");
        self.offsets[i] + j - self.first[i]
    }

    /// Adds `v` to entry `(i, j)`; only the lower triangle is stored so the
    /// call is ignored for `j > i`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if j <= i {
            let k = self.index(i, j);
            self.values[k] += v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if j < self.first[i] {
            0.0
        } else {
            self.values[self.index(i, j)]
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `y = A x` using symmetry.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let f = self.first[i];
            let row = self.row(i);
            let mut acc = 0.0;
            for (k, &a) in row[..row.len() - 1].iter().enumerate() {
                acc += a * x[f + k];
                y[f + k] += a * x[i];
            }
            y[i] += acc + row[row.len() - 1] * x[i];
        }
        y
    }

    /// In-place Cholesky factorization `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<EnvelopeCholesky> {
        let n = self.dim();
        let mut l = self.clone();
        for i in 0..n {
            let fi = l.first[i];
            let oi = l.offsets[i];
            for j in fi..=i {
                let fj = l.first[j];
                let k0 = fi.max(fj);
                let oj = l.offsets[j];
                let mut s = l.values[oi + j - fi];
                let ri = &l.values[oi + k0 - fi..oi + j - fi];
                let rj = &l.values[oj + k0 - fj..oj + j - fj];
                s -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                if j < i {
                    let d = l.values[oj + j - fj];
                    l.values[oi + j - fi] = s / d;
                } else {
                    if s.is_nan() || s <= 0.0 {
                        return Err(Error::Factorization { row: i, pivot: s });
                    }
                    l.values[oi + j - fi] = s.sqrt();
                }
            }
        }
        Ok(EnvelopeCholesky { l })
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    l: EnvelopeMatrix,
}

impl EnvelopeCholesky {
    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    /// Diagonal of the factor (all strictly positive).
    pub fn pivots(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.l.get(i, i)).collect()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let l = &self.l;
        for i in 0..n {
            let f = l.first[i];
            let row = l.row(i);
            let (off, diag) = row.split_at(row.len() - 1);
            let s: f64 = off.iter().zip(&b[f..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / diag[0];
        }
        for i in (0..n).rev() {
            let f = l.first[i];
            let row = l.row(i);
            b[i] /= row[row.len() - 1];
            let xi = b[i];
            for (k, a) in row[..row.len() - 1].iter().enumerate() {
                b[f + k] -= a * xi;
            }
        }
    }
}

/// Reverse Cuthill-McKee permutation of an undirected graph given as
/// adjacency lists. Returns `order[new] = old`.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree = |v: usize| adjacency[v].len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        let seed = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| (degree(v), v)).unwrap();
        let start = pseudo_peripheral(adjacency, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree(w), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adjacency: &[Vec<usize>], seed: usize) -> usize {
    let mut current = seed;
    let mut eccentricity = 0;
    loop {
        let (far, depth) = farthest(adjacency, current);
        if depth <= eccentricity {
            return current;
        }
        eccentricity = depth;
        current = far;
    }
}

fn farthest(adjacency: &[Vec<usize>], start: usize) -> (usize, usize) {
    let mut level = vec![usize::MAX; adjacency.len()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut last = (start, 0);
    while let Some(v) = queue.pop_front() {
        let lv = level[v];
        if lv > last.1 || (lv == last.1 && adjacency[v].len() < adjacency[last.0].len()) {
            last = (v, lv);
        }
        for &w in &adjacency[v] {
            if level[w] == usize::MAX {
                level[w] = lv + 1;
                queue.push_back(w);
            }
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn laplacian_1d(n: usize) -> EnvelopeMatrix {
        let first: Vec<usize> = (0..n).map(|i| i.saturating_sub(1)).collect();
        let mut a = EnvelopeMatrix::with_profile(first);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn solves_tridiagonal() {
        let a = laplacian_1d(50);
        let chol = a.cholesky().unwrap();
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = a.mul_vec(&x_true);
        chol.solve_in_place(&mut b);
        for (x, y) in b.iter().zip(&x_true) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(chol.pivots().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn matches_dense_on_random_spd() {
        let n = 30;
        let first: Vec<usize> = (0..n).map(|i: usize| i.saturating_sub(1 + i % 7)).collect();
        let mut a = EnvelopeMatrix::with_profile(first.clone());
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in first[i]..i {
                let v = ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5;
                a.add(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
            a.add(i, i, 10.0);
            dense[(i, i)] = 10.0;
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let mut x = b.clone();
        a.cholesky().unwrap().solve_in_place(&mut x);
        let xd = dense.clone().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b.clone()));
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-12);
        }
        let y = a.mul_vec(&x);
        for i in 0..n {
            assert!((y[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = laplacian_1d(4);
        a.add(2, 2, -5.0);
        match a.cholesky() {
            Err(Error::Factorization { row, pivot }) => {
                assert_eq!(row, 2);
                assert!(pivot < 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rcm_is_a_permutation_and_reduces_bandwidth() {
        // A path graph numbered badly.
        let n = 40;
        let label: Vec<usize> = (0..n).map(|i| (i * 17) % n).collect();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n - 1 {
            adj[label[i]].push(label[i + 1]);
            adj[label[i + 1]].push(label[i]);
        }
        let order = reverse_cuthill_mckee(&adj);
        let mut seen = order.clone();
        seen.sort();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let mut pos = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            pos[old] = new;
        }
        let band = (0..n).flat_map(|v| adj[v].iter().map(move |&w| (v, w)));
        let bw = band.map(|(v, w)| pos[v].abs_diff(pos[w])).max().unwrap();
        assert_eq!(bw, 1);
    }
}
