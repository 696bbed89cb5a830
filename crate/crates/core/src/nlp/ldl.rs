//! Sparse symmetric LDLᵀ factorization for KKT systems.
//!
//! The matrix is described by a fixed symmetric pattern (a list of index
//! pairs, duplicates summed) and refactored with new values every
//! interior-point iteration. Elimination order starts from a minimum-degree
//! ordering. There is no numerical pivoting inside the factorization:
//! when a pivot is tiny relative to its column, the offending index is moved
//! to the end of the ordering and the factorization restarts. The repaired
//! ordering is kept for later refactorizations, so the cost is paid once
//! per pattern in practice.
//!
//! The numeric kernel is the classic up-looking LDLᵀ driven by the
//! elimination tree.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

const NONE: usize = usize::MAX;

/// Relative pivot threshold: |d_k| must exceed this times the largest
/// magnitude in the original column k.
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub enum LdlError {
    /// Pivot too small and the ordering cannot be repaired any further.
    Singular { index: usize },
}

/// Inertia of a factored matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
}

/// Minimum-degree ordering of a symmetric pattern (diagonal ignored).
/// Ties are broken by index, so the result is deterministic.
pub fn minimum_degree(n: usize, entries: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(i, j) in entries {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|i| Reverse((adj[i].len(), i))).collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &a in &nbrs {
            adj[a].remove(&v);
        }
        for (ia, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[ia + 1..] {
                if adj[a].insert(b) {
                    adj[b].insert(a);
                }
            }
        }
        for &a in &nbrs {
            heap.push(Reverse((adj[a].len(), a)));
        }
    }
    order
}

/// Symbolic structure for one elimination order.
#[derive(Debug, Clone)]
struct Symbolic {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// Upper-triangular CSC of the permuted matrix.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// For each pattern entry, its slot in `row_idx`.
    slot: Vec<usize>,
    etree: Vec<usize>,
    l_ptr: Vec<usize>,
}

impl Symbolic {
    fn new(n: usize, entries: &[(usize, usize)], perm: Vec<usize>) -> Self {
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        // (col, row) in permuted upper triangle, deduplicated
        let mapped: Vec<(usize, usize)> = entries
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (inv[i], inv[j]);
                (a.max(b), a.min(b))
            })
            .collect();
        let mut uniq = mapped.clone();
        uniq.sort_unstable();
        uniq.dedup();
        let mut col_ptr = vec![0; n + 1];
        for &(c, _) in &uniq {
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx: Vec<usize> = uniq.iter().map(|&(_, r)| r).collect();
        let slot = mapped
            .iter()
            .map(|key| uniq.binary_search(key).expect("entry present"))
            .collect();

        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for &r in &row_idx[col_ptr[j]..col_ptr[j + 1]] {
                let mut i = r;
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut l_ptr = vec![0; n + 1];
        for i in 0..n {
            l_ptr[i + 1] = l_ptr[i] + lnz[i];
        }
        Self {
            perm,
            col_ptr,
            row_idx,
            slot,
            etree,
            l_ptr,
        }
    }
}

/// LDLᵀ factorization with a reusable symbolic analysis.
#[derive(Debug, Clone)]
pub struct LdlSolver {
    n: usize,
    entries: Vec<(usize, usize)>,
    sym: Symbolic,
    /// Permuted upper-triangular values.
    values: Vec<f64>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    d: Vec<f64>,
    pivot_tol: f64,
    /// Number of ordering repairs performed so far.
    pub repairs: usize,
}

impl LdlSolver {
    /// Analyzes the pattern of an `n × n` symmetric matrix. `entries` lists
    /// the structurally nonzero positions (either triangle, duplicates
    /// allowed); it must include every diagonal position.
    pub fn new(n: usize, entries: Vec<(usize, usize)>) -> Self {
        let perm = minimum_degree(n, &entries);
        let sym = Symbolic::new(n, &entries, perm);
        Self {
            n,
            entries,
            values: Vec::new(),
            l_idx: Vec::new(),
            l_val: Vec::new(),
            d: Vec::new(),
            pivot_tol: PIVOT_TOL,
            sym,
            repairs: 0,
        }
    }

    /// Relative threshold below which a pivot triggers an ordering repair.
    /// Callers that regularize the matrix into quasi-definite form can
    /// lower it, since every ordering is then numerically admissible.
    pub fn set_pivot_tolerance(&mut self, tol: f64) {
        self.pivot_tol = tol;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_factor(&self) -> usize {
        self.sym.l_ptr[self.n]
    }

    /// Factors the matrix whose pattern entries carry `vals` (same order
    /// as the pattern given to [`LdlSolver::new`]).
    pub fn factor(&mut self, vals: &[f64]) -> Result<Inertia, LdlError> {
        assert_eq!(vals.len(), self.entries.len());
        let mut col_max = vec![0.0f64; self.n];
        for (&(i, j), &v) in self.entries.iter().zip(vals) {
            col_max[i] = col_max[i].max(v.abs());
            col_max[j] = col_max[j].max(v.abs());
        }
        let max_repairs = 4 * self.n + 10;
        let mut local_repairs = 0;
        loop {
            match self.numeric(vals, &col_max) {
                Ok(inertia) => return Ok(inertia),
                Err(k) => {
                    let old = self.sym.perm[k];
                    if k + 1 == self.n || local_repairs >= max_repairs {
                        return Err(LdlError::Singular { index: old });
                    }
                    let mut perm = self.sym.perm.clone();
                    perm.remove(k);
                    perm.push(old);
                    self.sym = Symbolic::new(self.n, &self.entries, perm);
                    local_repairs += 1;
                    self.repairs += 1;
                }
            }
        }
    }

    /// Numeric phase. On a bad pivot returns its permuted position.
    fn numeric(&mut self, vals: &[f64], col_max: &[f64]) -> Result<Inertia, usize> {
        let n = self.n;
        let sym = &self.sym;
        self.values.clear();
        self.values.resize(sym.row_idx.len(), 0.0);
        for (&s, &v) in sym.slot.iter().zip(vals) {
            self.values[s] += v;
        }
        let nnz = sym.l_ptr[n];
        self.l_idx.clear();
        self.l_idx.resize(nnz, 0);
        self.l_val.clear();
        self.l_val.resize(nnz, 0.0);
        self.d.clear();
        self.d.resize(n, 0.0);

        let mut next = sym.l_ptr[..n].to_vec();
        let mut y = vec![0.0; n];
        let mut marked = vec![false; n];
        let mut y_idx: Vec<usize> = Vec::with_capacity(n);
        let mut buffer: Vec<usize> = Vec::with_capacity(n);
        let mut inertia = Inertia {
            positive: 0,
            negative: 0,
        };

        for k in 0..n {
            y_idx.clear();
            let mut dk = 0.0;
            for p in sym.col_ptr[k]..sym.col_ptr[k + 1] {
                let b = sym.row_idx[p];
                if b == k {
                    dk = self.values[p];
                    continue;
                }
                y[b] = self.values[p];
                if !marked[b] {
                    marked[b] = true;
                    buffer.clear();
                    buffer.push(b);
                    let mut nx = sym.etree[b];
                    while nx != NONE && nx < k {
                        if marked[nx] {
                            break;
                        }
                        marked[nx] = true;
                        buffer.push(nx);
                        nx = sym.etree[nx];
                    }
                    while let Some(v) = buffer.pop() {
                        y_idx.push(v);
                    }
                }
            }
            for &c in y_idx.iter().rev() {
                let end = next[c];
                let yc = y[c];
                for q in sym.l_ptr[c]..end {
                    y[self.l_idx[q]] -= self.l_val[q] * yc;
                }
                let lkc = yc / self.d[c];
                self.l_idx[end] = k;
                self.l_val[end] = lkc;
                dk -= yc * lkc;
                next[c] += 1;
                y[c] = 0.0;
                marked[c] = false;
            }
            let scale = col_max[sym.perm[k]].max(f64::MIN_POSITIVE);
            if !dk.is_finite() || dk.abs() <= self.pivot_tol * scale {
                return Err(k);
            }
            self.d[k] = dk;
            if dk > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
        }
        Ok(inertia)
    }

    /// Solves with the current factorization (original ordering in and out).
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let sym = &self.sym;
        let mut x: Vec<f64> = sym.perm.iter().map(|&old| rhs[old]).collect();
        for c in 0..n {
            let xc = x[c];
            for q in sym.l_ptr[c]..sym.l_ptr[c + 1] {
                x[self.l_idx[q]] -= self.l_val[q] * xc;
            }
        }
        for c in 0..n {
            x[c] /= self.d[c];
        }
        for c in (0..n).rev() {
            let mut s = x[c];
            for q in sym.l_ptr[c]..sym.l_ptr[c + 1] {
                s -= self.l_val[q] * x[self.l_idx[q]];
            }
            x[c] = s;
        }
        let mut out = vec![0.0; n];
        for (new, &old) in sym.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// `y = A x` for the symmetric matrix given by pattern values `vals`.
    pub fn multiply(&self, vals: &[f64], x: &[f64]) -> Vec<f64> {
        symmetric_multiply(self.n, &self.entries, vals, x)
    }
}

/// `A x` for a symmetric matrix stored as pattern entries (each
/// off-diagonal pair listed once).
pub fn symmetric_multiply(
    n: usize,
    entries: &[(usize, usize)],
    vals: &[f64],
    x: &[f64],
) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for (&(i, j), &v) in entries.iter().zip(vals) {
        y[i] += v * x[j];
        if i != j {
            y[j] += v * x[i];
        }
    }
    y
}
