//! Sparse LU factorization of the simplex basis.
//!
//! Left-looking Gilbert-Peierls factorization with partial pivoting. Columns
//! are factored in ascending-nonzero-count order, which puts slack and other
//! singleton columns first and keeps fill-in low on the network-shaped bases
//! this crate produces. Between refactorizations the basis inverse is
//! maintained in product form (eta columns).

/// Threshold below which a pivot candidate is treated as numerically zero.
const PIVOT_ZERO: f64 = 1e-11;
/// Entries smaller than this are dropped from stored eta columns.
const ETA_DROP: f64 = 1e-13;

pub struct LuFactors {
    m: usize,
    /// Column permutation: factored column k is basis position `q[k]`.
    q: Vec<usize>,
    /// `qinv[pos]` = factored column index of basis position `pos`.
    qinv: Vec<usize>,
    /// Pivot row (original row index) of factored column k.
    p: Vec<usize>,
    /// `pinv[row]` = factored step at which `row` was chosen as pivot.
    pinv: Vec<usize>,
    /// L columns: (original row, multiplier), unit diagonal implied.
    lcols: Vec<Vec<(usize, f64)>>,
    /// U columns: (pivot position < k, value).
    ucols: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    etas: Vec<Eta>,
}

struct Eta {
    pivot_pos: usize,
    diag: f64,
    /// Off-pivot entries (basis position, value).
    col: Vec<(usize, f64)>,
}

/// Scratch space shared across factorizations and solves.
#[derive(Default)]
pub struct LuWorkspace {
    work: Vec<f64>,
    mark: Vec<u32>,
    stamp: u32,
    touched: Vec<usize>,
    stack: Vec<(usize, usize)>,
    topo: Vec<usize>,
}

impl LuWorkspace {
    fn reset(&mut self, m: usize) {
        if self.work.len() < m {
            self.work.resize(m, 0.0);
            self.mark.resize(m, 0);
        }
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 1;
        }
        self.stamp
    }
}

pub enum LuError {
    /// The basis matrix is singular; payload is the offending factored step.
    Singular(usize),
}

impl LuFactors {
    /// Factors the basis given as sparse columns (original row indices).
    pub fn factor(
        cols: &[Vec<(usize, f64)>],
        ws: &mut LuWorkspace,
    ) -> Result<LuFactors, LuError> {
        let m = cols.len();
        ws.reset(m);

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&j| (cols[j].len(), j));

        let mut lu = LuFactors {
            m,
            q: order,
            qinv: vec![0; m],
            p: vec![0; m],
            pinv: vec![usize::MAX; m],
            lcols: Vec::with_capacity(m),
            ucols: Vec::with_capacity(m),
            diag: vec![0.0; m],
            etas: Vec::new(),
        };
        for (k, &pos) in lu.q.iter().enumerate() {
            lu.qinv[pos] = k;
        }

        for k in 0..m {
            let col = &cols[lu.q[k]];

            // Symbolic phase: reach of the column pattern through L, in
            // topological (reverse post-) order.
            let stamp = ws.next_stamp();
            ws.topo.clear();
            for &(r, _) in col {
                if ws.mark[r] == stamp {
                    continue;
                }
                // Iterative DFS with explicit child cursor; topo collects
                // postorder, consumed in reverse below.
                ws.stack.clear();
                ws.stack.push((r, 0));
                ws.mark[r] = stamp;
                while let Some(&(node, cursor)) = ws.stack.last() {
                    let children: &[(usize, f64)] = if lu.pinv[node] != usize::MAX {
                        &lu.lcols[lu.pinv[node]]
                    } else {
                        &[]
                    };
                    let mut cur = cursor;
                    let mut pushed = false;
                    while cur < children.len() {
                        let child = children[cur].0;
                        cur += 1;
                        if ws.mark[child] != stamp {
                            ws.mark[child] = stamp;
                            ws.stack.last_mut().unwrap().1 = cur;
                            ws.stack.push((child, 0));
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        ws.stack.pop();
                        ws.topo.push(node);
                    }
                }
            }

            // Numeric phase: sparse lower-triangular solve.
            for &(r, v) in col {
                ws.work[r] += v;
            }
            for idx in (0..ws.topo.len()).rev() {
                let r = ws.topo[idx];
                let step = lu.pinv[r];
                if step == usize::MAX {
                    continue;
                }
                let t = ws.work[r];
                if t != 0.0 {
                    for &(rr, mult) in &lu.lcols[step] {
                        ws.work[rr] -= mult * t;
                    }
                }
            }

            // Partial pivoting over not-yet-pivoted rows.
            let mut pivot_row = usize::MAX;
            let mut best = 0.0f64;
            for &r in &ws.topo {
                if lu.pinv[r] == usize::MAX && ws.work[r].abs() > best {
                    best = ws.work[r].abs();
                    pivot_row = r;
                }
            }
            if pivot_row == usize::MAX || best <= PIVOT_ZERO {
                for &r in &ws.topo {
                    ws.work[r] = 0.0;
                }
                return Err(LuError::Singular(lu.q[k]));
            }

            let piv = ws.work[pivot_row];
            lu.diag[k] = piv;
            let mut ucol = Vec::new();
            let mut lcol = Vec::new();
            for &r in &ws.topo {
                let v = ws.work[r];
                ws.work[r] = 0.0;
                if v == 0.0 {
                    continue;
                }
                let step = lu.pinv[r];
                if step != usize::MAX {
                    ucol.push((step, v));
                } else if r != pivot_row {
                    lcol.push((r, v / piv));
                }
            }
            lu.ucols.push(ucol);
            lu.lcols.push(lcol);
            lu.p[k] = pivot_row;
            lu.pinv[pivot_row] = k;
        }
        Ok(lu)
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Records a basis exchange: the entering column's FTRAN image `w`
    /// (dense, indexed by basis position) replaces basis position `pivot_pos`.
    ///
    /// Returns false if the pivot element is too small to be trusted.
    pub fn push_eta(&mut self, w: &[f64], pivot_pos: usize) -> bool {
        let diag = w[pivot_pos];
        if diag.abs() < 1e-9 {
            return false;
        }
        let col: Vec<(usize, f64)> = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pivot_pos && v.abs() > ETA_DROP)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            pivot_pos,
            diag,
            col,
        });
        true
    }

    /// Solves `B x = rhs`. `rhs` is dense, indexed by original row; the result
    /// is dense, indexed by basis position.
    pub fn ftran(&self, rhs: &mut Vec<f64>, out: &mut Vec<f64>) {
        let m = self.m;
        // L solve (forward, original row space).
        for k in 0..m {
            let t = rhs[self.p[k]];
            if t != 0.0 {
                for &(r, mult) in &self.lcols[k] {
                    rhs[r] -= mult * t;
                }
            }
        }
        // U solve (backward, factored positions).
        out.clear();
        out.resize(m, 0.0);
        let mut y: Vec<f64> = (0..m).map(|k| rhs[self.p[k]]).collect();
        for k in (0..m).rev() {
            let x = y[k] / self.diag[k];
            if x != 0.0 {
                for &(pos, val) in &self.ucols[k] {
                    y[pos] -= val * x;
                }
            }
            out[self.q[k]] = x;
        }
        rhs.iter_mut().for_each(|v| *v = 0.0);
        // Eta passes in creation order.
        for eta in &self.etas {
            let t = out[eta.pivot_pos] / eta.diag;
            if t != 0.0 {
                for &(i, v) in &eta.col {
                    out[i] -= v * t;
                }
            }
            out[eta.pivot_pos] = t;
        }
    }

    /// Solves `B^T y = c`. `c` is dense, indexed by basis position; the result
    /// is dense, indexed by original row.
    pub fn btran(&self, c: &mut Vec<f64>, out: &mut Vec<f64>) {
        let m = self.m;
        // Eta passes in reverse creation order.
        for eta in self.etas.iter().rev() {
            let mut acc = c[eta.pivot_pos];
            for &(i, v) in &eta.col {
                acc -= v * c[i];
            }
            c[eta.pivot_pos] = acc / eta.diag;
        }
        // U^T solve (forward over factored positions).
        let mut v = vec![0.0; m];
        for k in 0..m {
            let mut acc = c[self.q[k]];
            for &(pos, val) in &self.ucols[k] {
                acc -= val * v[pos];
            }
            v[k] = acc / self.diag[k];
        }
        // L^T solve (backward), result lands in original row space.
        out.clear();
        out.resize(m, 0.0);
        for k in (0..m).rev() {
            let mut acc = v[k];
            for &(r, mult) in &self.lcols[k] {
                acc -= mult * out[r];
            }
            out[self.p[k]] = acc;
        }
        c.iter_mut().for_each(|x| *x = 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(cols: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
        let m = cols.len();
        let mut out = vec![0.0; m];
        for (j, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                out[r] += v * x[j];
            }
        }
        out
    }

    #[test]
    fn ftran_btran_roundtrip() {
        // 4x4 with a mix of singleton and coupled columns.
        let cols: Vec<Vec<(usize, f64)>> = vec![
            vec![(0, 2.0), (2, 1.0)],
            vec![(1, 3.0)],
            vec![(0, 1.0), (2, -1.0), (3, 0.5)],
            vec![(3, 4.0), (1, -2.0)],
        ];
        let mut ws = LuWorkspace::default();
        let lu = LuFactors::factor(&cols, &mut ws).ok().unwrap();

        let mut rhs = vec![1.0, -2.0, 0.5, 3.0];
        let expect_rhs = rhs.clone();
        let mut x = Vec::new();
        lu.ftran(&mut rhs, &mut x);
        let back = dense_mul(&cols, &x);
        for i in 0..4 {
            assert!((back[i] - expect_rhs[i]).abs() < 1e-12, "ftran residual");
        }

        let mut c = vec![0.5, 1.0, -1.0, 2.0];
        let cexp = c.clone();
        let mut y = Vec::new();
        lu.btran(&mut c, &mut y);
        // Check B^T y = c: (B^T y)_j = col_j . y
        for (j, col) in cols.iter().enumerate() {
            let dot: f64 = col.iter().map(|&(r, v)| v * y[r]).sum();
            assert!((dot - cexp[j]).abs() < 1e-12, "btran residual");
        }
    }

    #[test]
    fn eta_update_matches_refactor() {
        let cols: Vec<Vec<(usize, f64)>> = vec![
            vec![(0, 1.0)],
            vec![(1, 1.0), (0, 0.5)],
            vec![(2, 2.0)],
        ];
        let mut ws = LuWorkspace::default();
        let mut lu = LuFactors::factor(&cols, &mut ws).ok().unwrap();

        // Replace basis position 1 with a new column a = [1, 1, 1]^T.
        let newcol = vec![(0usize, 1.0), (1usize, 1.0), (2usize, 1.0)];
        let mut rhs = vec![0.0; 3];
        for &(r, v) in &newcol {
            rhs[r] = v;
        }
        let mut w = Vec::new();
        lu.ftran(&mut rhs, &mut w);
        assert!(lu.push_eta(&w, 1));

        let mut new_cols = cols.clone();
        new_cols[1] = newcol;
        let lu2 = LuFactors::factor(&new_cols, &mut ws).ok().unwrap();

        let mut r1 = vec![1.0, 2.0, 3.0];
        let mut r2 = r1.clone();
        let mut x1 = Vec::new();
        let mut x2 = Vec::new();
        lu.ftran(&mut r1, &mut x1);
        lu2.ftran(&mut r2, &mut x2);
        for i in 0..3 {
            assert!((x1[i] - x2[i]).abs() < 1e-10);
        }

        let mut c1 = vec![1.0, -1.0, 0.5];
        let mut c2 = c1.clone();
        let mut y1 = Vec::new();
        let mut y2 = Vec::new();
        lu.btran(&mut c1, &mut y1);
        lu2.btran(&mut c2, &mut y2);
        for i in 0..3 {
            assert!((y1[i] - y2[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_detected() {
        let cols: Vec<Vec<(usize, f64)>> = vec![
            vec![(0, 1.0), (1, 1.0)],
            vec![(0, 2.0), (1, 2.0)],
        ];
        let mut ws = LuWorkspace::default();
        assert!(LuFactors::factor(&cols, &mut ws).is_err());
    }
}
