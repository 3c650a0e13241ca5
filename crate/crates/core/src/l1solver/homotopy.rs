//! Homotopy (LARS-lasso) path for `min ‖Dx − y‖² + λ‖x‖₁`.
//!
//! The path starts at `t = 2‖Dᵀy‖∞` where the solution is zero and follows
//! the piecewise-linear solution as `t` decreases to the target λ. On the
//! active set `A` with signs `s`, optimality reads `2D_Aᵀ(y − D_A x_A) = t s`,
//! so each unit decrease of `t` moves `x_A` by `w = G_A⁻¹ s / 2`.

use nalgebra::{DMatrix, DVector};

use super::cholesky::ActiveCholesky;
use super::{kkt_residual, SolverConfig};
use crate::error::{Error, Result};

/// Number of active-set repair passes allowed at the end of the path.
const MAX_REPAIRS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    Target,
    Enter(usize, f64),
    Leave(usize),
}

struct Path<'a> {
    dict: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    x: DVector<f64>,
    active: Vec<usize>,
    signs: Vec<f64>,
    chol: ActiveCholesky,
    blocked: Vec<bool>,
}

impl<'a> Path<'a> {
    fn new(dict: &'a DMatrix<f64>, y: &'a DVector<f64>) -> Self {
        let p = dict.ncols();
        Self {
            dict,
            y,
            x: DVector::zeros(p),
            active: Vec::new(),
            signs: Vec::new(),
            chol: ActiveCholesky::new(),
            blocked: vec![false; p],
        }
    }

    /// `c = 2Dᵀ(y − Dx)`.
    fn correlations(&self) -> DVector<f64> {
        let residual = self.y - self.dict * &self.x;
        self.dict.tr_mul(&residual) * 2.0
    }

    fn gram_of(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(cols.len(), cols.len(), |i, j| {
            self.dict.column(cols[i]).dot(&self.dict.column(cols[j]))
        })
    }

    /// Adds atom `j`; refactorizes from scratch if the bordered update loses
    /// definiteness, and blocks the atom if it is linearly dependent.
    fn enter(&mut self, j: usize, sign: f64) -> bool {
        let col = self.dict.column(j);
        let cross = DVector::from_iterator(
            self.active.len(),
            self.active.iter().map(|&i| self.dict.column(i).dot(&col)),
        );
        if !self.chol.push(&cross, col.norm_squared()) {
            let mut cols = self.active.clone();
            cols.push(j);
            let mut fresh = ActiveCholesky::new();
            if !fresh.refactor(self.gram_of(&cols)) {
                self.blocked[j] = true;
                return false;
            }
            self.chol = fresh;
        }
        self.active.push(j);
        self.signs.push(sign);
        true
    }

    fn leave(&mut self, pos: usize) {
        let j = self.active.remove(pos);
        self.signs.remove(pos);
        self.x[j] = 0.0;
        self.chol.remove(pos);
        // A smaller active set may admit previously dependent atoms.
        self.blocked.iter_mut().for_each(|b| *b = false);
    }

    fn direction(&self) -> DVector<f64> {
        let half_signs = DVector::from_iterator(self.signs.len(), self.signs.iter().map(|s| 0.5 * s));
        self.chol.solve(&half_signs)
    }

    /// Sets `x_A` to the exact active-set solution at parameter `t`.
    fn solve_at(&mut self, t: f64) {
        if self.active.is_empty() {
            return;
        }
        let rhs = DVector::from_iterator(
            self.active.len(),
            self.active
                .iter()
                .zip(&self.signs)
                .map(|(&i, s)| self.dict.column(i).dot(self.y) - 0.5 * t * s),
        );
        let xa = self.chol.solve(&rhs);
        for (&i, v) in self.active.iter().zip(xa.iter()) {
            self.x[i] = *v;
        }
    }
}

pub(crate) fn solve(dict: &DMatrix<f64>, y: &DVector<f64>, cfg: &SolverConfig) -> Result<DVector<f64>> {
    let lambda = cfg.lambda;
    let mut path = Path::new(dict, y);
    let p = dict.ncols();

    let c0 = path.correlations();
    let mut t = c0.amax();
    if t <= lambda || t == 0.0 {
        return Ok(path.x);
    }
    let first = first_argmax_abs(&c0);
    path.enter(first, c0[first].signum());

    let slack = 1e-12 * t;
    let mut just_entered = Some(first);
    let mut just_left: Option<(usize, f64)> = None;
    let mut iters = 0;

    loop {
        if iters >= cfg.max_iters {
            return Err(Error::IterationLimit {
                limit: cfg.max_iters,
                kkt_residual: kkt_residual(dict, y, &path.x, lambda),
                best: path.x,
            });
        }
        iters += 1;

        let c = path.correlations();
        let w = path.direction();
        let mut u = DVector::zeros(dict.nrows());
        for (&i, wi) in path.active.iter().zip(w.iter()) {
            u.axpy(*wi, &dict.column(i), 1.0);
        }
        let a = dict.tr_mul(&u) * 2.0;

        let mut step = t - lambda;
        let mut event = Event::Target;

        let mut in_active = vec![false; p];
        for &i in &path.active {
            in_active[i] = true;
        }
        for j in 0..p {
            if in_active[j] || path.blocked[j] {
                continue;
            }
            // Entry when c_j reaches +t (sign +1) or −t (sign −1).
            for (num, den, sign) in [(t - c[j], 1.0 - a[j], 1.0), (t + c[j], 1.0 + a[j], -1.0)] {
                // An atom that just left sits on the boundary of its old sign.
                if den <= 0.0 || just_left == Some((j, sign)) {
                    continue;
                }
                let cand = num / den;
                if cand > -slack && cand.max(0.0) < step {
                    step = cand.max(0.0);
                    event = Event::Enter(j, sign);
                }
            }
        }
        for (pos, &i) in path.active.iter().enumerate() {
            if Some(i) == just_entered || w[pos] == 0.0 {
                continue;
            }
            let cand = -path.x[i] / w[pos];
            if cand > 0.0 && cand < step {
                step = cand;
                event = Event::Leave(pos);
            }
        }

        for (&i, wi) in path.active.iter().zip(w.iter()) {
            path.x[i] += step * wi;
        }
        t -= step;
        just_entered = None;
        just_left = None;

        match event {
            Event::Target => break,
            Event::Enter(j, sign) => {
                if path.enter(j, sign) {
                    just_entered = Some(j);
                }
            }
            Event::Leave(pos) => {
                just_left = Some((path.active[pos], path.signs[pos]));
                path.leave(pos);
            }
        }
    }

    path.solve_at(lambda);
    repair(&mut path, lambda, cfg.kkt_tol);
    Ok(path.x)
}

/// Final active-set repair at the target λ: drops atoms whose sign flipped,
/// otherwise admits the inactive atom that most violates the correlation
/// bound. Keeps the iterate with the smallest optimality residual.
fn repair(path: &mut Path<'_>, lambda: f64, tol: f64) {
    let mut best_res = kkt_residual(path.dict, path.y, &path.x, lambda);
    let mut best = path.x.clone();
    for _ in 0..MAX_REPAIRS {
        if best_res <= tol {
            break;
        }
        let mut changed = false;
        let mut pos = 0;
        while pos < path.active.len() {
            let i = path.active[pos];
            if path.x[i] * path.signs[pos] < 0.0 {
                path.leave(pos);
                changed = true;
            } else {
                pos += 1;
            }
        }
        if !changed {
            let c = path.correlations();
            let worst = (0..c.len())
                .filter(|&j| !path.active.contains(&j) && !path.blocked[j])
                .filter(|&j| c[j].abs() > lambda + tol)
                .max_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()).then(b.cmp(&a)));
            match worst {
                Some(j) if path.enter(j, c[j].signum()) => {}
                _ => break,
            }
        }
        if !path.active.is_empty() {
            let mut fresh = ActiveCholesky::new();
            if !fresh.refactor(path.gram_of(&path.active)) {
                break;
            }
            path.chol = fresh;
        }
        path.solve_at(lambda);
        let res = kkt_residual(path.dict, path.y, &path.x, lambda);
        if res < best_res {
            best_res = res;
            best = path.x.clone();
        }
    }
    path.x = best;
}

fn first_argmax_abs(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}
