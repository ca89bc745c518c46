//! Grid abstraction of a piecewise linear system and the weighted
//! alternating simulation check between finite systems.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    image_constraints, lp_feasible, lp_maximize, pwl_maximize, AffineMap, AxisBox, ConvexPwlFunction, Lattice,
    Polyhedron, Rational,
};
use crate::wts::{FiniteWts, InputId, StateId, Transition};

/// Label of the sink state. Problem files may not use it.
pub const DEAD_PROPOSITION: &str = "dead";

/// Slack for comparing cell, region and image bounds computed in floating point.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// One mode `x' = A x + B u`, active on `region`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    #[serde(default)]
    pub name: String,
    pub map: AffineMap,
    pub region: Polyhedron,
}

/// A named union of boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposition {
    pub name: String,
    pub regions: Vec<AxisBox>,
}

/// `(X, X_init, U, P, {(A_i, B_i, P_i)}, L, J)`. Points outside every
/// proposition region carry `default_proposition`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwlSystem {
    pub state_space: AxisBox,
    pub init_set: AxisBox,
    pub input_space: AxisBox,
    pub pieces: Vec<Piece>,
    pub propositions: Vec<Proposition>,
    #[serde(default)]
    pub default_proposition: Option<String>,
    pub cost: ConvexPwlFunction,
}

impl PwlSystem {
    pub fn state_dim(&self) -> usize {
        self.state_space.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.input_space.dim()
    }

    /// Index of the first piece whose region holds `x`; on shared boundaries
    /// the earlier piece wins.
    pub fn piece_of(&self, x: &[f64]) -> Option<usize> {
        self.pieces
            .iter()
            .position(|p| p.region.contains(x, 1e-12))
            .or_else(|| {
                // rounding can leave a point a hair outside every region
                self.pieces
                    .iter()
                    .position(|p| p.region.contains(x, BOUNDARY_TOLERANCE))
            })
    }

    /// One step of the dynamics, returning the successor and the piece used.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Option<(Vec<f64>, usize)> {
        let i = self.piece_of(x)?;
        Some((self.pieces[i].map.apply(x, u), i))
    }

    /// Every proposition name, the default last if it has no regions.
    pub fn proposition_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.propositions.iter().map(|p| p.name.clone()).collect();
        if let Some(d) = &self.default_proposition {
            if !names.contains(d) {
                names.push(d.clone());
            }
        }
        names
    }

    /// Concrete label of a point, by closed-region membership.
    pub fn label_of(&self, x: &[f64]) -> Option<&str> {
        self.propositions
            .iter()
            .find(|p| p.regions.iter().any(|r| r.closure_contains(x, 0.0)))
            .map(|p| p.name.as_str())
            .or(self.default_proposition.as_deref())
    }

    /// Label of a grid cell. Fails unless each region either contains the
    /// cell or misses its interior, and exactly one proposition applies.
    pub fn cell_label(&self, cell: &AxisBox) -> Result<&str> {
        let mut found: Option<&str> = None;
        for p in &self.propositions {
            let mut inside = false;
            for r in &p.regions {
                if cell.closure_within(r, BOUNDARY_TOLERANCE) {
                    inside = true;
                } else if cell.interiors_overlap(r, BOUNDARY_TOLERANCE) {
                    return Err(Error::MisalignedPropositions(format!(
                        "region {:?}..{:?} of `{}` cuts cell {:?}..{:?}",
                        r.lower, r.upper, p.name, cell.lower, cell.upper
                    )));
                }
            }
            if inside {
                if let Some(other) = found {
                    return Err(Error::MisalignedPropositions(format!(
                        "cell {:?}..{:?} lies in both `{other}` and `{}`",
                        cell.lower, cell.upper, p.name
                    )));
                }
                found = Some(&p.name);
            }
        }
        found.or(self.default_proposition.as_deref()).ok_or_else(|| {
            Error::MisalignedPropositions(format!(
                "cell {:?}..{:?} has no proposition and there is no default",
                cell.lower, cell.upper
            ))
        })
    }
}

/// Output of [`cons_abs`]. Abstract state `k < cells` is the cell with flat
/// index `k` in `state_lattice`; the last state is the sink. Abstract input
/// `v` is the cell with flat index `v` in `input_lattice`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractionResult {
    pub wts: FiniteWts,
    pub state_lattice: Lattice,
    pub input_lattice: Lattice,
    pub initial_state: StateId,
    pub sink: StateId,
}

impl AbstractionResult {
    pub fn epsilon(&self) -> Vec<Rational> {
        self.state_lattice.widths()
    }

    pub fn num_cells(&self) -> usize {
        self.state_lattice.len()
    }

    /// Abstract state holding `x`, by the half-open cell rule.
    pub fn state_of(&self, x: &[f64]) -> Option<StateId> {
        self.state_lattice.locate(x).map(|i| self.state_lattice.flat(&i))
    }

    pub fn input_of(&self, u: &[f64]) -> Option<InputId> {
        self.input_lattice.locate(u).map(|i| self.input_lattice.flat(&i))
    }

    pub fn cell(&self, s: StateId) -> AxisBox {
        self.state_lattice.cell(&self.state_lattice.unflat(s))
    }

    pub fn input_cell(&self, v: InputId) -> AxisBox {
        self.input_lattice.cell(&self.input_lattice.unflat(v))
    }
}

/// Builds `Abs(T_D, ≡_X, ≡_U)` on the given state and input grids. All
/// geometry uses closures of the half-open cells.
pub fn cons_abs(
    system: &PwlSystem,
    state_lattice: &Lattice,
    input_lattice: &Lattice,
    x0: &[f64],
) -> Result<AbstractionResult> {
    let n = system.state_dim();
    if state_lattice.dim() != n || input_lattice.dim() != system.input_dim() || x0.len() != n {
        return Err(Error::Dimension("grid or initial state does not match the system".into()));
    }
    let names = system.proposition_names();
    if names.iter().any(|p| p == DEAD_PROPOSITION) {
        return Err(Error::Validation(vec![format!(
            "proposition name `{DEAD_PROPOSITION}` is reserved for the sink"
        )]));
    }
    let cells = state_lattice.len();
    let inputs = input_lattice.len();
    let sink = cells;

    let mut labels = Vec::with_capacity(cells + 1);
    for k in 0..cells {
        let cell = state_lattice.cell(&state_lattice.unflat(k));
        let name = system.cell_label(&cell)?;
        labels.push(names.iter().position(|p| p == name).expect("label comes from the system"));
    }
    let mut propositions = names;
    labels.push(propositions.len());
    propositions.push(DEAD_PROPOSITION.to_string());

    let initial_state = state_lattice
        .locate(x0)
        .map(|i| state_lattice.flat(&i))
        .ok_or_else(|| Error::EmptyInitialCell(x0.to_vec()))?;

    let input_cells: Vec<AxisBox> = (0..inputs).map(|v| input_lattice.cell(&input_lattice.unflat(v))).collect();
    let step_costs: Vec<ConvexPwlFunction> = system.pieces.iter().map(|p| system.cost.after_step(&p.map)).collect();

    let per_cell: Vec<Vec<Transition>> = (0..cells)
        .into_par_iter()
        .map(|k| cell_transitions(system, state_lattice, &input_cells, &step_costs, k, sink))
        .collect::<Result<_>>()?;
    let mut transitions: Vec<Transition> = per_cell.into_iter().flatten().collect();
    for v in 0..inputs {
        transitions.push(Transition {
            from: sink,
            input: v,
            to: sink,
            weight: f64::INFINITY,
        });
    }
    let wts = FiniteWts::new(
        cells + 1,
        inputs,
        propositions,
        labels,
        vec![initial_state],
        transitions,
        Some(sink),
    )?;
    Ok(AbstractionResult {
        wts,
        state_lattice: state_lattice.clone(),
        input_lattice: input_lattice.clone(),
        initial_state,
        sink,
    })
}

fn cell_transitions(
    system: &PwlSystem,
    lattice: &Lattice,
    input_cells: &[AxisBox],
    step_costs: &[ConvexPwlFunction],
    k: StateId,
    sink: StateId,
) -> Result<Vec<Transition>> {
    let n = system.state_dim();
    let p = system.input_dim();
    let cell = lattice.cell(&lattice.unflat(k));
    let cell_poly = cell.to_polyhedron();
    let active: Vec<usize> = (0..system.pieces.len())
        .filter_map(|i| match lp_feasible(&cell_poly.intersect(&system.pieces[i].region)) {
            Ok(true) => Some(Ok(i)),
            Ok(false) => None,
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<_>>()?;
    let domain = &system.state_space;
    let mut out = Vec::new();
    for (v, input_cell) in input_cells.iter().enumerate() {
        // target cell -> largest weight over the pieces reaching it
        let mut reached: Vec<(StateId, f64)> = Vec::new();
        let mut leaves = false;
        for &i in &active {
            let piece = &system.pieces[i];
            let base = domain_constraints(&cell, input_cell, &piece.region, n, p);
            let (lo, hi) = image_bounds(&base, &piece.map, n, p)?;
            if (0..n).any(|j| lo[j] < domain.lower[j] - BOUNDARY_TOLERANCE || hi[j] > domain.upper[j] + BOUNDARY_TOLERANCE)
            {
                leaves = true;
            }
            let clipped_lo: Vec<f64> = (0..n).map(|j| lo[j].max(domain.lower[j])).collect();
            let clipped_hi: Vec<f64> = (0..n).map(|j| hi[j].min(domain.upper[j])).collect();
            if (0..n).any(|j| clipped_lo[j] > clipped_hi[j] + BOUNDARY_TOLERANCE) {
                continue;
            }
            let window = AxisBox::closed(clipped_lo, clipped_hi);
            for t in lattice.overlapping(&window, BOUNDARY_TOLERANCE) {
                let target = lattice.cell(&lattice.unflat(t));
                let poly = image_constraints(&cell, input_cell, &piece.region, &piece.map, &target);
                if !lp_feasible(&poly)? {
                    continue;
                }
                let w = pwl_maximize(&step_costs[i], &poly)?.max(0.0);
                match reached.iter_mut().find(|(s, _)| *s == t) {
                    Some(entry) => entry.1 = entry.1.max(w),
                    None => reached.push((t, w)),
                }
            }
        }
        reached.sort_by_key(|(t, _)| *t);
        out.extend(reached.into_iter().map(|(t, w)| Transition {
            from: k,
            input: v,
            to: t,
            weight: w,
        }));
        if leaves {
            out.push(Transition {
                from: k,
                input: v,
                to: sink,
                weight: f64::INFINITY,
            });
        }
    }
    Ok(out)
}

/// `x in cell ∩ region, u in input_cell` over the stacked `(x, u)`.
fn domain_constraints(cell: &AxisBox, input_cell: &AxisBox, region: &Polyhedron, n: usize, p: usize) -> Polyhedron {
    cell.to_polyhedron()
        .lift(0, n + p)
        .intersect(&region.lift(0, n + p))
        .intersect(&input_cell.to_polyhedron().lift(n, n + p))
}

/// Tight bounding box of `{A x + B u | (x, u) in base}`.
fn image_bounds(base: &Polyhedron, map: &AffineMap, n: usize, p: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    debug_assert_eq!(base.dim(), n + p);
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        let coeffs = map.pullback(&row);
        hi[j] = lp_maximize(&coeffs, base)?.value;
        let neg: Vec<f64> = coeffs.iter().map(|c| -c).collect();
        lo[j] = -lp_maximize(&neg, base)?.value;
    }
    Ok((lo, hi))
}

/// `(α, β)` of a weighted alternating simulation from `t1` to `t2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationWitness {
    pub alpha: Vec<(StateId, StateId)>,
    pub beta: Vec<(StateId, InputId, StateId, InputId)>,
}

impl SimulationWitness {
    /// Identity relations on `system`.
    pub fn identity(system: &FiniteWts) -> Self {
        let alpha = (0..system.num_states()).map(|s| (s, s)).collect();
        let beta = (0..system.num_states())
            .flat_map(|s| (0..system.num_inputs()).map(move |u| (s, u, s, u)))
            .collect();
        Self { alpha, beta }
    }
}

/// First failed condition found by [`check_simulation`].
#[derive(Debug, Clone, PartialEq)]
pub enum SimulationViolation {
    /// An initial state of `t1` has no related initial state of `t2`.
    UnrelatedInitial { s1: StateId },
    LabelMismatch { s1: StateId, s2: StateId },
    /// No `u1` is paired with an enabled `u2`.
    NoMatchingInput { s1: StateId, s2: StateId, u2: InputId },
    /// Transition `(s1, u1, t1)` with weight `w1` has no related successor of
    /// `(s2, u2)` carrying at least that weight.
    UnmatchedTransition {
        s1: StateId,
        u1: InputId,
        t1: StateId,
        w1: f64,
        s2: StateId,
        u2: InputId,
    },
}

impl fmt::Display for SimulationViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnrelatedInitial { s1 } => write!(f, "initial state {s1} has no related initial state"),
            Self::LabelMismatch { s1, s2 } => write!(f, "related states {s1} and {s2} carry different labels"),
            Self::NoMatchingInput { s1, s2, u2 } => {
                write!(f, "no input of {s1} answers input {u2} of {s2}")
            }
            Self::UnmatchedTransition { s1, u1, t1, w1, s2, u2 } => write!(
                f,
                "transition ({s1}, {u1}, {t1}) of weight {w1} is not dominated by any related transition of ({s2}, {u2})"
            ),
        }
    }
}

/// Relative slack when comparing weights computed by separate LPs.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

fn weight_dominated(w1: f64, w2: f64) -> bool {
    w1 <= w2 || (w2.is_finite() && w1 <= w2 + WEIGHT_TOLERANCE * w2.abs().max(1.0))
}

/// Checks the simulation conditions exhaustively. Weights may exceed their
/// match by [`WEIGHT_TOLERANCE`], since both come from floating-point LPs.
pub fn check_simulation(
    t1: &FiniteWts,
    t2: &FiniteWts,
    witness: &SimulationWitness,
) -> std::result::Result<(), SimulationViolation> {
    let alpha: HashSet<(StateId, StateId)> = witness.alpha.iter().copied().collect();
    for &s1 in t1.init_states() {
        if !t2.init_states().iter().any(|&s2| alpha.contains(&(s1, s2))) {
            return Err(SimulationViolation::UnrelatedInitial { s1 });
        }
    }
    let mut beta: HashMap<(StateId, StateId, InputId), Vec<InputId>> = HashMap::new();
    for &(s1, u1, s2, u2) in &witness.beta {
        beta.entry((s1, s2, u2)).or_default().push(u1);
    }
    for list in beta.values_mut() {
        list.sort_unstable();
        list.dedup();
    }
    for &(s1, s2) in &witness.alpha {
        if t1.label(s1) != t2.label(s2) {
            return Err(SimulationViolation::LabelMismatch { s1, s2 });
        }
        let enabled1 = t1.enabled(s1);
        for u2 in t2.enabled(s2) {
            let candidates: Vec<InputId> = beta
                .get(&(s1, s2, u2))
                .map(|c| c.iter().copied().filter(|u| enabled1.binary_search(u).is_ok()).collect())
                .unwrap_or_default();
            let mut first_failure = None;
            let mut matched = false;
            for u1 in candidates {
                match dominated(t1, t2, &alpha, s1, u1, s2, u2) {
                    None => {
                        matched = true;
                        break;
                    }
                    Some(v) => {
                        first_failure.get_or_insert(v);
                    }
                }
            }
            if !matched {
                return Err(first_failure.unwrap_or(SimulationViolation::NoMatchingInput { s1, s2, u2 }));
            }
        }
    }
    Ok(())
}

fn dominated(
    t1: &FiniteWts,
    t2: &FiniteWts,
    alpha: &HashSet<(StateId, StateId)>,
    s1: StateId,
    u1: InputId,
    s2: StateId,
    u2: InputId,
) -> Option<SimulationViolation> {
    let succ2 = t2.successors(s2, u2);
    for tr in t1.successors(s1, u1) {
        let ok = succ2
            .iter()
            .any(|tr2| alpha.contains(&(tr.to, tr2.to)) && weight_dominated(tr.weight, tr2.weight));
        if !ok {
            return Some(SimulationViolation::UnmatchedTransition {
                s1,
                u1,
                t1: tr.to,
                w1: tr.weight,
                s2,
                u2,
            });
        }
    }
    None
}

/// Pairs each fine cell (and fine input cell) with the coarse cell holding
/// it; sinks are paired with each other.
pub fn canonical_refinement_witness(
    fine: &AbstractionResult,
    coarse: &AbstractionResult,
) -> Result<SimulationWitness> {
    let state_ratio = fine.state_lattice.nesting_ratio(&coarse.state_lattice)?;
    let input_ratio = fine.input_lattice.nesting_ratio(&coarse.input_lattice)?;
    let up = |lattice: &Lattice, coarse_lattice: &Lattice, ratio: &[usize], k: usize| {
        let idx: Vec<usize> = lattice.unflat(k).iter().zip(ratio).map(|(i, r)| i / r).collect();
        coarse_lattice.flat(&idx)
    };
    let input_map: Vec<InputId> = (0..fine.input_lattice.len())
        .map(|v| up(&fine.input_lattice, &coarse.input_lattice, &input_ratio, v))
        .collect();
    let mut alpha: Vec<(StateId, StateId)> = (0..fine.num_cells())
        .map(|k| (k, up(&fine.state_lattice, &coarse.state_lattice, &state_ratio, k)))
        .collect();
    alpha.push((fine.sink, coarse.sink));
    let beta = alpha
        .iter()
        .flat_map(|&(s1, s2)| input_map.iter().enumerate().map(move |(u1, &u2)| (s1, u1, s2, u2)))
        .collect();
    Ok(SimulationWitness { alpha, beta })
}

/// Outcome of [`sample_soundness`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub samples: usize,
    /// Steps staying in X whose abstract triple is missing.
    pub missing_transitions: Vec<(Vec<f64>, Vec<f64>)>,
    /// Steps whose stage cost exceeds the abstract weight.
    pub weight_violations: Vec<(Vec<f64>, Vec<f64>)>,
    /// Steps leaving X from a pair without a sink transition.
    pub missing_sinks: Vec<(Vec<f64>, Vec<f64>)>,
}

impl SoundnessReport {
    pub fn is_sound(&self) -> bool {
        self.missing_transitions.is_empty() && self.weight_violations.is_empty() && self.missing_sinks.is_empty()
    }
}

/// Draws uniform `(x, u)` in `X × U` and checks that each concrete step is
/// covered by an abstract transition of at least its stage cost.
pub fn sample_soundness(
    system: &PwlSystem,
    abstraction: &AbstractionResult,
    samples: usize,
    seed: u64,
) -> SoundnessReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SoundnessReport {
        samples,
        ..Default::default()
    };
    for _ in 0..samples {
        let x = sample_box(&mut rng, &system.state_space);
        let u = sample_box(&mut rng, &system.input_space);
        let (Some(s), Some(v)) = (abstraction.state_of(&x), abstraction.input_of(&u)) else {
            continue;
        };
        let Some((next, _)) = system.step(&x, &u) else {
            continue;
        };
        let wts = &abstraction.wts;
        if system.state_space.closure_contains(&next, 0.0) {
            let t = abstraction.state_of(&next).expect("successor lies in X");
            match wts.weight(s, v, t) {
                None => report.missing_transitions.push((x, u)),
                Some(w) if system.cost.eval(&next, &u) > w + BOUNDARY_TOLERANCE => {
                    report.weight_violations.push((x, u))
                }
                Some(_) => {}
            }
        } else if wts.weight(s, v, abstraction.sink).is_none() {
            report.missing_sinks.push((x, u));
        }
    }
    report
}

pub(crate) fn sample_box<R: Rng>(rng: &mut R, b: &AxisBox) -> Vec<f64> {
    b.lower
        .iter()
        .zip(&b.upper)
        .map(|(&l, &h)| if h > l { rng.gen_range(l..=h) } else { l })
        .collect()
}
