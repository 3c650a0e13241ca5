//! Upper-triangular factor `R` of the active-set Gram matrix `G = RᵀR`,
//! maintained under column insertion (bordering) and deletion (Givens).

use nalgebra::{DMatrix, DVector};

/// Relative pivot below which an appended column is treated as dependent.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct ActiveCholesky {
    r: DMatrix<f64>,
}

impl ActiveCholesky {
    pub fn new() -> Self {
        Self {
            r: DMatrix::zeros(0, 0),
        }
    }

    pub fn len(&self) -> usize {
        self.r.nrows()
    }

    /// Appends an atom given its cross products with the current active
    /// atoms (`cross`) and its squared norm. Returns false, leaving the
    /// factor untouched, when the new pivot is not positive.
    pub fn push(&mut self, cross: &DVector<f64>, sq_norm: f64) -> bool {
        let k = self.len();
        let col = self.solve_lower(cross);
        let pivot_sq = sq_norm - col.norm_squared();
        if !(pivot_sq > PIVOT_TOL * sq_norm) {
            return false;
        }
        let mut r = self.r.clone().resize(k + 1, k + 1, 0.0);
        r.view_mut((0, k), (k, 1)).copy_from(&col);
        r[(k, k)] = pivot_sq.sqrt();
        self.r = r;
        true
    }

    /// Removes the atom at position `pos`, restoring triangularity with
    /// Givens rotations on adjacent rows.
    pub fn remove(&mut self, pos: usize) {
        let n = self.len();
        let mut h = self.r.clone().remove_column(pos);
        for i in pos..n - 1 {
            let a = h[(i, i)];
            let b = h[(i + 1, i)];
            let rho = a.hypot(b);
            if rho == 0.0 {
                continue;
            }
            let (c, s) = (a / rho, b / rho);
            for j in i..n - 1 {
                let top = h[(i, j)];
                let bottom = h[(i + 1, j)];
                h[(i, j)] = c * top + s * bottom;
                h[(i + 1, j)] = -s * top + c * bottom;
            }
            h[(i + 1, i)] = 0.0;
        }
        self.r = h.remove_row(n - 1);
    }

    /// Rebuilds the factor from an explicit Gram matrix. Returns false if
    /// the matrix is not numerically positive definite.
    pub fn refactor(&mut self, gram: DMatrix<f64>) -> bool {
        let n = gram.nrows();
        match nalgebra::Cholesky::new(gram) {
            Some(ch) => {
                let l = ch.l();
                let ok = (0..n).all(|i| l[(i, i)] > 0.0);
                if ok {
                    self.r = l.transpose();
                }
                ok
            }
            None => false,
        }
    }

    /// Solves `G w = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let z = self.solve_lower(b);
        self.solve_upper(&z)
    }

    /// Solves `Rᵀ z = b`.
    fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.len();
        let mut z = b.clone();
        for i in 0..n {
            let mut acc = z[i];
            for k in 0..i {
                acc -= self.r[(k, i)] * z[k];
            }
            z[i] = acc / self.r[(i, i)];
        }
        z
    }

    /// Solves `R w = z`.
    fn solve_upper(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.len();
        let mut w = z.clone();
        for i in (0..n).rev() {
            let mut acc = w[i];
            for k in i + 1..n {
                acc -= self.r[(i, k)] * w[k];
            }
            w[i] = acc / self.r[(i, i)];
        }
        w
    }

    #[cfg(test)]
    pub fn gram(&self) -> DMatrix<f64> {
        self.r.transpose() * &self.r
    }
}
