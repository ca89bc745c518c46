//! Dense two-phase simplex over polyhedra `{z | G z <= h}` with free variables.
//!
//! Problems here are tiny (a handful of variables, a few dozen rows), so the
//! tableau is kept dense and pivoting uses Bland's rule throughout.

use super::Polyhedron;
use crate::error::{Error, Result};

/// Numerical tolerance for pivots, reduced costs and phase-one residuals.
pub const LP_TOLERANCE: f64 = 1e-9;

/// Pivot budget before the solve is declared degenerate.
pub const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub argmax: Vec<f64>,
}

/// Returns whether the closed polyhedron is nonempty.
pub fn lp_feasible(constraints: &Polyhedron) -> Result<bool> {
    match Tableau::phase_one(constraints)? {
        Some(_) => Ok(true),
        None => Ok(false),
    }
}

/// Maximizes `objective . z` over the polyhedron.
pub fn lp_maximize(objective: &[f64], constraints: &Polyhedron) -> Result<LpSolution> {
    if objective.len() != constraints.dim() {
        return Err(Error::Dimension(format!(
            "objective has {} coefficients, polyhedron has dimension {}",
            objective.len(),
            constraints.dim()
        )));
    }
    let mut tableau = Tableau::phase_one(constraints)?.ok_or(Error::Infeasible)?;
    tableau.phase_two(objective)?;
    let argmax = tableau.primal();
    // Evaluate at the vertex rather than trusting the accumulated objective row.
    let value = objective.iter().zip(&argmax).map(|(c, z)| c * z).sum();
    Ok(LpSolution { value, argmax })
}

/// Minimizes `objective . z` over the polyhedron.
pub fn lp_minimize(objective: &[f64], constraints: &Polyhedron) -> Result<LpSolution> {
    let negated: Vec<f64> = objective.iter().map(|c| -c).collect();
    let sol = lp_maximize(&negated, constraints)?;
    Ok(LpSolution {
        value: -sol.value,
        argmax: sol.argmax,
    })
}

/// Column layout: `[z+ (d) | z- (d) | slack (m) | artificial (k)]`, rhs last.
struct Tableau {
    dim: usize,
    rows: usize,
    cols: usize,
    n_slack: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    objective: Vec<f64>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width() + self.cols]
    }

    fn first_artificial(&self) -> usize {
        2 * self.dim + self.n_slack
    }

    /// Builds the tableau and runs phase one. `None` means infeasible.
    fn phase_one(poly: &Polyhedron) -> Result<Option<Self>> {
        let dim = poly.dim();
        // Rows scaled so the normal has unit max-norm.
        let mut kept: Vec<(&[f64], f64, f64)> = Vec::new();
        for h in poly.constraints() {
            let scale = h.normal.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
            if scale <= LP_TOLERANCE {
                if h.offset < -LP_TOLERANCE {
                    return Ok(None);
                }
                continue;
            }
            kept.push((&h.normal, h.offset, scale));
        }
        let m = kept.len();
        let n_artificial = kept.iter().filter(|(_, b, _)| *b < 0.0).count();
        let cols = 2 * dim + m + n_artificial;
        let width = cols + 1;
        let mut data = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let mut next_art = 2 * dim + m;
        for (r, (normal, offset, scale)) in kept.iter().enumerate() {
            let negative = *offset < 0.0;
            let sign = if negative { -1.0 } else { 1.0 };
            let row = &mut data[r * width..(r + 1) * width];
            for j in 0..dim {
                let a = normal[j] / scale;
                row[j] = sign * a;
                row[dim + j] = -sign * a;
            }
            row[2 * dim + r] = sign;
            row[cols] = sign * offset / scale;
            if negative {
                row[next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            } else {
                basis[r] = 2 * dim + r;
            }
        }

        let mut tableau = Tableau {
            dim,
            rows: m,
            cols,
            n_slack: m,
            data,
            basis,
            objective: vec![0.0; width],
        };
        if n_artificial == 0 {
            return Ok(Some(tableau));
        }

        // maximize -sum(artificial)
        let first_art = tableau.first_artificial();
        for j in first_art..cols {
            tableau.objective[j] = -1.0;
        }
        for r in 0..m {
            if tableau.basis[r] >= first_art {
                for c in 0..width {
                    tableau.objective[c] += tableau.data[r * width + c];
                }
            }
        }
        tableau.iterate(cols)?;
        if tableau.objective[cols] > LP_TOLERANCE {
            return Ok(None);
        }
        tableau.evict_artificials();
        Ok(Some(tableau))
    }

    /// Pivots artificial variables out of the basis, dropping redundant rows.
    fn evict_artificials(&mut self) {
        let first_art = self.first_artificial();
        let mut r = 0;
        while r < self.rows {
            if self.basis[r] < first_art {
                r += 1;
                continue;
            }
            let entering = (0..first_art).find(|&c| self.at(r, c).abs() > LP_TOLERANCE);
            match entering {
                Some(c) => {
                    self.pivot(r, c);
                    r += 1;
                }
                None => {
                    let w = self.width();
                    self.data.drain(r * w..(r + 1) * w);
                    self.basis.remove(r);
                    self.rows -= 1;
                }
            }
        }
    }

    fn phase_two(&mut self, objective: &[f64]) -> Result<()> {
        let width = self.width();
        let first_art = self.first_artificial();
        self.objective = vec![0.0; width];
        for (j, c) in objective.iter().enumerate() {
            self.objective[j] = *c;
            self.objective[self.dim + j] = -*c;
        }
        for r in 0..self.rows {
            let cb = self.objective[self.basis[r]];
            if cb != 0.0 {
                for c in 0..width {
                    self.objective[c] -= cb * self.data[r * width + c];
                }
            }
        }
        self.iterate(first_art)
    }

    /// Primal simplex with Bland's rule; only columns below `limit` may enter.
    fn iterate(&mut self, limit: usize) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let Some(entering) = (0..limit).find(|&c| self.objective[c] > LP_TOLERANCE) else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, entering);
                if a > LP_TOLERANCE {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((best, best_ratio)) => {
                            if ratio < best_ratio - LP_TOLERANCE
                                || (ratio <= best_ratio + LP_TOLERANCE
                                    && self.basis[r] < self.basis[best])
                            {
                                Some((r, ratio))
                            } else {
                                Some((best, best_ratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leaving else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, entering);
        }
        Err(Error::Degenerate(MAX_PIVOTS))
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.width();
        let p = self.data[row * width + col];
        for c in 0..width {
            self.data[row * width + c] /= p;
        }
        let pivot_row: Vec<f64> = self.data[row * width..(row + 1) * width].to_vec();
        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let f = self.data[r * width + col];
            if f != 0.0 {
                for (cell, pv) in self.data[r * width..(r + 1) * width].iter_mut().zip(&pivot_row) {
                    *cell -= f * pv;
                }
            }
        }
        let f = self.objective[col];
        if f != 0.0 {
            for (cell, pv) in self.objective.iter_mut().zip(&pivot_row) {
                *cell -= f * pv;
            }
        }
        self.basis[row] = col;
    }

    fn primal(&self) -> Vec<f64> {
        let mut values = vec![0.0; 2 * self.dim];
        for r in 0..self.rows {
            let b = self.basis[r];
            if b < 2 * self.dim {
                values[b] = self.rhs(r);
            }
        }
        (0..self.dim)
            .map(|j| values[j] - values[self.dim + j])
            .collect()
    }
}
