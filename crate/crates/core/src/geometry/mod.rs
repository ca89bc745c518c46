//! Boxes, halfspace polyhedra, affine maps, convex piecewise-linear costs and
//! the uniform grid partition used by the abstraction.

mod grid;
pub mod lp;

pub use grid::{grid, rational_from_f64, rational_to_f64, GridAxis, GridCell, Lattice, Rational};
pub use lp::{lp_feasible, lp_maximize, lp_minimize, LpSolution, LP_TOLERANCE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box. Axis `i` covers `(lower[i], upper[i]]` when
/// `lower_open[i]` is set and `[lower[i], upper[i]]` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lower_open: Vec<bool>,
}

impl AxisBox {
    pub fn closed(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "box bound dimensions differ");
        Self {
            lower,
            upper,
            lower_open: Vec::new(),
        }
    }

    pub fn half_open(lower: Vec<f64>, upper: Vec<f64>, lower_open: Vec<bool>) -> Self {
        assert_eq!(lower.len(), upper.len(), "box bound dimensions differ");
        assert_eq!(lower.len(), lower_open.len(), "box bound dimensions differ");
        Self {
            lower,
            upper,
            lower_open,
        }
    }

    pub fn point(x: &[f64]) -> Self {
        Self::closed(x.to_vec(), x.to_vec())
    }

    /// The closed `eps`-ball around `center` in the infinity norm.
    pub fn ball(center: &[f64], eps: f64) -> Self {
        Self::closed(
            center.iter().map(|c| c - eps).collect(),
            center.iter().map(|c| c + eps).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_lower_open(&self, axis: usize) -> bool {
        self.lower_open.get(axis).copied().unwrap_or(false)
    }

    pub fn is_valid(&self) -> bool {
        self.lower.len() == self.upper.len()
            && (self.lower_open.is_empty() || self.lower_open.len() == self.lower.len())
            && self.lower.iter().zip(&self.upper).all(|(l, u)| l <= u)
    }

    /// Half-open membership, honoring `lower_open`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| {
                let above = if self.is_lower_open(i) {
                    x[i] > self.lower[i]
                } else {
                    x[i] >= self.lower[i]
                };
                above && x[i] <= self.upper[i]
            })
    }

    /// Membership in the closure, widened by `tol`.
    pub fn closure_contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol)
    }

    /// Whether the closure of `self` lies inside the closure of `other`.
    pub fn closure_within(&self, other: &AxisBox, tol: f64) -> bool {
        (0..self.dim())
            .all(|i| self.lower[i] >= other.lower[i] - tol && self.upper[i] <= other.upper[i] + tol)
    }

    /// Whether the interiors intersect.
    pub fn interiors_overlap(&self, other: &AxisBox, tol: f64) -> bool {
        (0..self.dim()).all(|i| {
            self.lower[i].max(other.lower[i]) < self.upper[i].min(other.upper[i]) - tol
        })
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    /// The closure as `2 * dim` halfspaces.
    pub fn to_polyhedron(&self) -> Polyhedron {
        let n = self.dim();
        let mut rows = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut up = vec![0.0; n];
            up[i] = 1.0;
            rows.push(Halfspace::new(up, self.upper[i]));
            let mut down = vec![0.0; n];
            down[i] = -1.0;
            rows.push(Halfspace::new(down, -self.lower[i]));
        }
        Polyhedron::new(n, rows)
    }
}

/// `normal . x <= offset`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x)
    }

    pub fn satisfied(&self, x: &[f64], tol: f64) -> bool {
        self.value(x) <= self.offset + tol
    }
}

/// Intersection of closed halfspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    dim: usize,
    constraints: Vec<Halfspace>,
}

impl Polyhedron {
    pub fn new(dim: usize, constraints: Vec<Halfspace>) -> Self {
        for h in &constraints {
            assert_eq!(h.normal.len(), dim, "halfspace dimension mismatch");
        }
        Self { dim, constraints }
    }

    /// The whole space.
    pub fn universe(dim: usize) -> Self {
        Self {
            dim,
            constraints: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[Halfspace] {
        &self.constraints
    }

    pub fn push(&mut self, h: Halfspace) {
        assert_eq!(h.normal.len(), self.dim, "halfspace dimension mismatch");
        self.constraints.push(h);
    }

    pub fn intersect(&self, other: &Polyhedron) -> Polyhedron {
        assert_eq!(self.dim, other.dim, "polyhedron dimension mismatch");
        let mut constraints = self.constraints.clone();
        constraints.extend(other.constraints.iter().cloned());
        Polyhedron::new(self.dim, constraints)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.constraints.iter().all(|h| h.satisfied(x, tol))
    }

    /// Embeds constraints on the first `dim` coordinates into `total` coordinates
    /// starting at `offset`.
    pub fn lift(&self, offset: usize, total: usize) -> Polyhedron {
        let constraints = self
            .constraints
            .iter()
            .map(|h| {
                let mut normal = vec![0.0; total];
                normal[offset..offset + self.dim].copy_from_slice(&h.normal);
                Halfspace::new(normal, h.offset)
            })
            .collect();
        Polyhedron::new(total, constraints)
    }

    pub fn is_nonempty(&self) -> Result<bool> {
        lp_feasible(self)
    }
}

/// `x' = A x + B u`, matrices stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl AffineMap {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self> {
        let n = a.len();
        if a.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension("A must be square".into()));
        }
        if b.len() != n {
            return Err(Error::Dimension(format!(
                "B has {} rows, A has {}",
                b.len(),
                n
            )));
        }
        let p = b.first().map_or(0, Vec::len);
        if b.iter().any(|row| row.len() != p) {
            return Err(Error::Dimension("B rows have unequal lengths".into()));
        }
        Ok(Self { a, b })
    }

    pub fn state_dim(&self) -> usize {
        self.a.len()
    }

    pub fn input_dim(&self) -> usize {
        self.b.first().map_or(0, Vec::len)
    }

    pub fn apply(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(ar, br)| dot(ar, x) + dot(br, u))
            .collect()
    }

    /// Coefficients of `row . (A x + B u)` over the stacked variable `(x, u)`.
    pub fn pullback(&self, row: &[f64]) -> Vec<f64> {
        let n = self.state_dim();
        let p = self.input_dim();
        let mut out = vec![0.0; n + p];
        for (k, r) in row.iter().enumerate() {
            if *r == 0.0 {
                continue;
            }
            for (o, a) in out[..n].iter_mut().zip(&self.a[k]) {
                *o += r * a;
            }
            for (o, b) in out[n..].iter_mut().zip(&self.b[k]) {
                *o += r * b;
            }
        }
        out
    }
}

/// Induced infinity norm: maximum absolute row sum.
pub fn inf_norm(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One affine piece `state . x + input . u + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwlPiece {
    pub state: Vec<f64>,
    pub input: Vec<f64>,
    pub constant: f64,
}

/// `J(x, u) = max_k (a_k . x + b_k . u + c_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPwlFunction {
    pieces: Vec<PwlPiece>,
}

impl ConvexPwlFunction {
    pub fn new(pieces: Vec<PwlPiece>) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return Err(Error::Dimension("cost needs at least one piece".into()));
        };
        let (n, p) = (first.state.len(), first.input.len());
        if pieces.iter().any(|pc| pc.state.len() != n || pc.input.len() != p) {
            return Err(Error::Dimension("cost pieces have unequal dimensions".into()));
        }
        if pieces
            .iter()
            .any(|pc| !pc.constant.is_finite() || pc.state.iter().chain(&pc.input).any(|v| !v.is_finite()))
        {
            return Err(Error::Dimension("cost coefficients must be finite".into()));
        }
        Ok(Self { pieces })
    }

    /// `||u||_1` expanded into its `2^p` sign pieces.
    pub fn one_norm_of_input(state_dim: usize, input_dim: usize) -> Self {
        let pieces = (0..1usize << input_dim)
            .map(|mask| PwlPiece {
                state: vec![0.0; state_dim],
                input: (0..input_dim)
                    .map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 })
                    .collect(),
                constant: 0.0,
            })
            .collect();
        Self { pieces }
    }

    pub fn pieces(&self) -> &[PwlPiece] {
        &self.pieces
    }

    pub fn state_dim(&self) -> usize {
        self.pieces[0].state.len()
    }

    pub fn input_dim(&self) -> usize {
        self.pieces[0].input.len()
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|pc| dot(&pc.state, x) + dot(&pc.input, u) + pc.constant)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Fixes the state argument, leaving a function of the input alone.
    pub fn restrict_state(&self, x: &[f64]) -> ConvexPwlFunction {
        let pieces = self
            .pieces
            .iter()
            .map(|pc| PwlPiece {
                state: Vec::new(),
                input: pc.input.clone(),
                constant: pc.constant + dot(&pc.state, x),
            })
            .collect();
        ConvexPwlFunction { pieces }
    }

    /// Composes with the successor map: `(x, u) -> J(A x + B u, u)`, as a
    /// function of the stacked `(x, u)` with zero input part in `state`.
    pub fn after_step(&self, map: &AffineMap) -> ConvexPwlFunction {
        let n = map.state_dim();
        let pieces = self
            .pieces
            .iter()
            .map(|pc| {
                let mut coeffs = map.pullback(&pc.state);
                for (j, b) in pc.input.iter().enumerate() {
                    coeffs[n + j] += b;
                }
                PwlPiece {
                    state: coeffs[..n].to_vec(),
                    input: coeffs[n..].to_vec(),
                    constant: pc.constant,
                }
            })
            .collect();
        ConvexPwlFunction { pieces }
    }
}

/// Maximum of a convex PWL function over a polyhedron in the stacked `(x, u)`
/// space: the largest of the per-piece LP maxima.
pub fn pwl_maximize(cost: &ConvexPwlFunction, constraints: &Polyhedron) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for pc in cost.pieces() {
        let mut objective = pc.state.clone();
        objective.extend_from_slice(&pc.input);
        let sol = lp_maximize(&objective, constraints)?;
        best = best.max(sol.value + pc.constant);
    }
    Ok(best)
}

/// Minimum of a convex PWL function over a polyhedron in `(x, u)` space via
/// its epigraph. Returns the value and the minimizer.
pub fn pwl_minimize(cost: &ConvexPwlFunction, constraints: &Polyhedron) -> Result<(f64, Vec<f64>)> {
    let d = constraints.dim();
    let mut epigraph = constraints.lift(0, d + 1);
    for pc in cost.pieces() {
        // a.z + c <= t
        let mut normal = pc.state.clone();
        normal.extend_from_slice(&pc.input);
        normal.push(-1.0);
        epigraph.push(Halfspace::new(normal, -pc.constant));
    }
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let sol = lp_minimize(&objective, &epigraph)?;
    let z = sol.argmax[..d].to_vec();
    let (x, u) = z.split_at(cost.state_dim());
    Ok((cost.eval(x, u), z))
}

/// Polyhedron over `(x, u)` encoding `x in cell ∩ region`, `u in input_cell`,
/// `A x + B u in target`, all on closures.
pub fn image_constraints(
    cell: &AxisBox,
    input_cell: &AxisBox,
    piece_region: &Polyhedron,
    map: &AffineMap,
    target: &AxisBox,
) -> Polyhedron {
    let n = map.state_dim();
    let p = map.input_dim();
    let mut poly = cell.to_polyhedron().lift(0, n + p);
    for h in piece_region.lift(0, n + p).constraints() {
        poly.push(h.clone());
    }
    for h in input_cell.to_polyhedron().lift(n, n + p).constraints() {
        poly.push(h.clone());
    }
    for h in target.to_polyhedron().constraints() {
        poly.push(Halfspace::new(map.pullback(&h.normal), h.offset));
    }
    poly
}
