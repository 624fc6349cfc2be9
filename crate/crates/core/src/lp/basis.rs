//! Basis factorization for the revised simplex.
//!
//! Columns with a single nonzero (slacks, artificials, and per-row indicator
//! variables) are handled by substitution: each one claims its row. The
//! remaining "dense" basic columns restricted to the unclaimed rows form a
//! small square kernel that is factorized with partial-pivoting LU. Two
//! singletons on the same row are parallel, so in a nonsingular basis every
//! singleton claims a distinct row and the kernel is exactly as large as the
//! number of dense basic columns.

#![allow(clippy::needless_range_loop)]

pub(crate) type Column = [(usize, f64)];

#[derive(Debug)]
pub(crate) struct SingularBasis;

pub(crate) struct BasisFactor {
    /// Per basis position: the claimed row and pivot value, if a singleton.
    singleton: Vec<Option<(usize, f64)>>,
    dense_pos: Vec<usize>,
    kernel_rows: Vec<usize>,
    kernel: DenseLu,
}

impl BasisFactor {
    pub(crate) fn new<'a>(
        m: usize,
        basis_cols: impl Iterator<Item = &'a Column>,
        pivot_tol: f64,
    ) -> Result<Self, SingularBasis> {
        let cols: Vec<&Column> = basis_cols.collect();
        debug_assert_eq!(cols.len(), m);
        let mut claimed = vec![false; m];
        let mut singleton = vec![None; m];
        let mut dense_pos = Vec::new();
        for (pos, col) in cols.iter().enumerate() {
            match col {
                [(row, v)] if !claimed[*row] && v.abs() > pivot_tol => {
                    claimed[*row] = true;
                    singleton[pos] = Some((*row, *v));
                }
                _ => dense_pos.push(pos),
            }
        }
        let kernel_rows: Vec<usize> = (0..m).filter(|&r| !claimed[r]).collect();
        if kernel_rows.len() != dense_pos.len() {
            return Err(SingularBasis);
        }
        let k = dense_pos.len();
        let mut row_slot = vec![usize::MAX; m];
        for (a, &r) in kernel_rows.iter().enumerate() {
            row_slot[r] = a;
        }
        let mut mat = vec![0.0; k * k];
        for (b, &pos) in dense_pos.iter().enumerate() {
            for &(r, v) in cols[pos] {
                let a = row_slot[r];
                if a != usize::MAX {
                    mat[a * k + b] += v;
                }
            }
        }
        let kernel = DenseLu::factor(mat, k).ok_or(SingularBasis)?;
        Ok(Self {
            singleton,
            dense_pos,
            kernel_rows,
            kernel,
        })
    }

    /// Solve `B x = rhs`; `rhs` is indexed by row, the result by basis position.
    pub(crate) fn solve<'a>(&self, basis_col: impl Fn(usize) -> &'a Column, rhs: &[f64]) -> Vec<f64> {
        let m = rhs.len();
        let mut x = vec![0.0; m];
        let mut z: Vec<f64> = self.kernel_rows.iter().map(|&r| rhs[r]).collect();
        self.kernel.solve(&mut z);
        let mut w = rhs.to_vec();
        for (b, &pos) in self.dense_pos.iter().enumerate() {
            x[pos] = z[b];
            if z[b] != 0.0 {
                for &(r, v) in basis_col(pos) {
                    w[r] -= v * z[b];
                }
            }
        }
        for (pos, s) in self.singleton.iter().enumerate() {
            if let Some((r, v)) = *s {
                x[pos] = w[r] / v;
            }
        }
        x
    }

    /// Solve `B^T y = c`; `c` is indexed by basis position, the result by row.
    pub(crate) fn solve_transpose<'a>(&self, basis_col: impl Fn(usize) -> &'a Column, c: &[f64]) -> Vec<f64> {
        let m = c.len();
        let mut y = vec![0.0; m];
        let mut in_kernel = vec![false; m];
        for &r in &self.kernel_rows {
            in_kernel[r] = true;
        }
        for (pos, s) in self.singleton.iter().enumerate() {
            if let Some((r, v)) = *s {
                y[r] = c[pos] / v;
            }
        }
        let mut g: Vec<f64> = self
            .dense_pos
            .iter()
            .map(|&pos| {
                let mut acc = c[pos];
                for &(r, v) in basis_col(pos) {
                    if !in_kernel[r] {
                        acc -= v * y[r];
                    }
                }
                acc
            })
            .collect();
        self.kernel.solve_transpose(&mut g);
        for (a, &r) in self.kernel_rows.iter().enumerate() {
            y[r] = g[a];
        }
        y
    }

    #[cfg(test)]
    pub(crate) fn kernel_size(&self) -> usize {
        self.dense_pos.len()
    }
}

/// Row-major LU with partial pivoting: `P A = L U`.
struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for col in 0..n {
            let (piv, max) = (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if max <= 1e-13 * scale {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(piv * n + j, col * n + j);
                }
                perm.swap(piv, col);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                if f != 0.0 {
                    a[r * n + col] = f;
                    for j in col + 1..n {
                        a[r * n + j] -= f * a[col * n + j];
                    }
                } else {
                    a[r * n + col] = 0.0;
                }
            }
        }
        Some(Self { n, lu: a, perm })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        if n == 0 {
            return;
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
    }

    /// `A^T x = b` via `U^T L^T P x = b`.
    fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        if n == 0 {
            return;
        }
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * z[j];
            }
            z[i] = s / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.lu[j * n + i] * z[j];
            }
            z[i] = s;
        }
        for (i, &p) in self.perm.iter().enumerate() {
            b[p] = z[i];
        }
    }
}
