//! The single shared weight matrix `W~` of a minimal (vanilla, tanh) VSML
//! RNN and a numerical check that stepping with it equals message passing.
//!
//! For a grid of `A x B` sub-RNNs with shared `V_M = (W, C)`,
//! `W~[c,d,i,a,b,j] = [d == a] C[i,j] + [d == b][c == a] W[i,j]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_len, Result, VsmlError};

/// Grids with at most this many scalars (`A B N`) store `W~` densely.
pub const DENSE_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct VanillaSharedRnn {
    pub n: usize,
    pub a: usize,
    pub b: usize,
    /// `n x n`, row-major, `W[i, j]`.
    pub w: Vec<f64>,
    pub c: Vec<f64>,
}

impl VanillaSharedRnn {
    pub fn new(n: usize, a: usize, b: usize, w: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        check_len("W", n * n, w.len())?;
        check_len("C", n * n, c.len())?;
        if w.iter().chain(&c).any(|v| !v.is_finite()) {
            return Err(VsmlError::NonFinite("W or C".into()));
        }
        Ok(VanillaSharedRnn { n, a, b, w, c })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, ab: usize, rng: &mut R) -> Self {
        let mut m = || (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        VanillaSharedRnn { n, a: ab, b: ab, w: m(), c: m() }
    }

    pub fn state_len(&self) -> usize {
        self.a * self.b * self.n
    }
}

/// Which terms contribute to block `(c, d) -> (a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockCase {
    /// `d = a`, `d = b`, `c = a`: `C + W`.
    Both,
    /// `d = a` only: `C`.
    Message,
    /// `d = b`, `c = a`, `d != a`: `W`.
    Recurrent,
    Zero,
}

pub fn block_case(c: usize, d: usize, a: usize, b: usize) -> BlockCase {
    match (d == a, d == b && c == a) {
        (true, true) => BlockCase::Both,
        (true, false) => BlockCase::Message,
        (false, true) => BlockCase::Recurrent,
        (false, false) => BlockCase::Zero,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSharedMatrix {
    pub rnn: VanillaSharedRnn,
    /// Row `(c, d, i)`, column `(a, b, j)`; present when `A B N <= DENSE_LIMIT`.
    dense: Option<Vec<f64>>,
}

pub fn build_w_tilde(rnn: &VanillaSharedRnn) -> Result<SparseSharedMatrix> {
    if rnn.a != rnn.b {
        return Err(VsmlError::config(format!(
            "W~ needs a square grid, got A={} B={}",
            rnn.a, rnn.b
        )));
    }
    let mut m = SparseSharedMatrix {
        rnn: rnn.clone(),
        dense: None,
    };
    let dim = rnn.state_len();
    if dim <= DENSE_LIMIT {
        let mut d = vec![0.0; dim * dim];
        for row in 0..dim {
            for col in 0..dim {
                d[row * dim + col] = m.entry_by_index(row, col);
            }
        }
        m.dense = Some(d);
    }
    Ok(m)
}

impl SparseSharedMatrix {
    pub fn dim(&self) -> usize {
        self.rnn.state_len()
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    fn split(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.rnn.n;
        let cell = idx / n;
        (cell / self.rnn.b, cell % self.rnn.b, idx % n)
    }

    fn entry_by_index(&self, row: usize, col: usize) -> f64 {
        let (c, d, i) = self.split(row);
        let (a, b, j) = self.split(col);
        self.entry(c, d, i, a, b, j)
    }

    /// `W~[c,d,i,a,b,j]` from the case rule.
    pub fn entry(&self, c: usize, d: usize, i: usize, a: usize, b: usize, j: usize) -> f64 {
        let k = i * self.rnn.n + j;
        match block_case(c, d, a, b) {
            BlockCase::Both => self.rnn.c[k] + self.rnn.w[k],
            BlockCase::Message => self.rnn.c[k],
            BlockCase::Recurrent => self.rnn.w[k],
            BlockCase::Zero => 0.0,
        }
    }

    /// Entry of the flattened `(A B N)^2` matrix.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        match &self.dense {
            Some(d) => d[row * self.dim() + col],
            None => self.entry_by_index(row, col),
        }
    }

    /// Number of structurally nonzero `N x N` blocks, counted by enumeration.
    pub fn nonzero_blocks(&self) -> usize {
        let (na, nb) = (self.rnn.a, self.rnn.b);
        let mut count = 0;
        for c in 0..na {
            for d in 0..nb {
                for a in 0..na {
                    for b in 0..nb {
                        if block_case(c, d, a, b) != BlockCase::Zero {
                            count += 1;
                        }
                    }
                }
            }
        }
        count
    }
}

/// Closed-form count of nonzero blocks for a square grid of side `m`:
/// `|{d = a}| + |{d = b, c = a}| - |{both}| = m^3 + m^2 - m`.
pub fn analytic_nonzero_blocks(m: usize) -> usize {
    m * m * m + m * m - m
}

/// `s'[a,b,j] = tanh(sum_{c,d,i} s[c,d,i] W~[c,d,i,a,b,j])`.
pub fn step_via_w_tilde(states: &[f64], wt: &SparseSharedMatrix) -> Result<Vec<f64>> {
    let dim = wt.dim();
    check_len("grid states", dim, states.len())?;
    Ok((0..dim)
        .map(|col| {
            let mut acc = 0.0;
            for (row, &s) in states.iter().enumerate() {
                acc += s * wt.get(row, col);
            }
            acc.tanh()
        })
        .collect())
}

/// `s'[a,b,j] = tanh(sum_i s[a,b,i] W[i,j] + sum_{a',i} s[a',a,i] C[i,j])`.
pub fn step_via_messages(states: &[f64], rnn: &VanillaSharedRnn) -> Result<Vec<f64>> {
    let (n, na, nb) = (rnn.n, rnn.a, rnn.b);
    check_len("grid states", rnn.state_len(), states.len())?;
    if na != nb {
        return Err(VsmlError::config("message form needs a square grid"));
    }
    let s = |a: usize, b: usize, i: usize| states[(a * nb + b) * n + i];
    let mut out = vec![0.0; states.len()];
    for a in 0..na {
        for b in 0..nb {
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += s(a, b, i) * rnn.w[i * n + j];
                }
                for a2 in 0..na {
                    for i in 0..n {
                        acc += s(a2, a, i) * rnn.c[i * n + j];
                    }
                }
                out[(a * nb + b) * n + j] = acc.tanh();
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub grid: usize,
    pub n: usize,
    pub max_abs_deviation: f64,
    pub nonzero_blocks: usize,
    pub expected_nonzero_blocks: usize,
}

/// Random `(W, C, states)` over `A = B in 1..=max_dim`, `N in {1, 2, 4}`.
pub fn verify_equivalence(trials: usize, max_dim: usize, seed: u64) -> Result<Vec<TrialResult>> {
    if max_dim == 0 {
        return Err(VsmlError::config("max_dim must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = [1, 2, 4];
    (0..trials)
        .map(|t| {
            let grid = 1 + t % max_dim;
            let n = ns[(t / max_dim) % ns.len()];
            let rnn = VanillaSharedRnn::random(n, grid, &mut rng);
            let states: Vec<f64> = (0..rnn.state_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let wt = build_w_tilde(&rnn)?;
            let x = step_via_w_tilde(&states, &wt)?;
            let y = step_via_messages(&states, &rnn)?;
            let dev = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            Ok(TrialResult {
                trial: t,
                grid,
                n,
                max_abs_deviation: dev,
                nonzero_blocks: wt.nonzero_blocks(),
                expected_nonzero_blocks: analytic_nonzero_blocks(grid),
            })
        })
        .collect()
}
