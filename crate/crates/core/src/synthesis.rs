//! The refinement loop: abstract, solve, extract a concrete input sequence,
//! halve the grid. Also closed-loop simulation and the trajectory
//! perturbation bound.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::{cons_abs, AbstractionResult, PwlSystem, BOUNDARY_TOLERANCE};
use crate::error::{Error, Result};
use crate::game::{reduce_reach, solve_finite_game, ProductGame, PropertyAutomaton};
use crate::geometry::{inf_norm, pwl_minimize, vec_inf_norm, AffineMap, AxisBox, Lattice, Polyhedron, Rational};
use crate::wts::{LayeredStrategy, StateId, Strategy};

/// Closed-loop run: `states[t + 1]` follows `states[t]` under `inputs[t]`
/// with piece `pieces[t]`, at stage cost `J(states[t + 1], inputs[t])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub pieces: Vec<usize>,
    pub stage_costs: Vec<f64>,
    pub total_cost: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectories start somewhere")
    }
}

/// Forward simulation from `x0`. Inputs must lie in U and states in X.
pub fn simulate(system: &PwlSystem, x0: &[f64], inputs: &[Vec<f64>]) -> Result<Trajectory> {
    if x0.len() != system.state_dim() {
        return Err(Error::Dimension(format!("initial state has {} components", x0.len())));
    }
    if !system.state_space.closure_contains(x0, 0.0) {
        return Err(Error::LeftDomain {
            step: 0,
            state: x0.to_vec(),
        });
    }
    let mut states = vec![x0.to_vec()];
    let mut pieces = Vec::with_capacity(inputs.len());
    let mut stage_costs = Vec::with_capacity(inputs.len());
    for (t, u) in inputs.iter().enumerate() {
        if u.len() != system.input_dim() || !system.input_space.closure_contains(u, 1e-12) {
            return Err(Error::InputOutOfRange { step: t, input: u.clone() });
        }
        let x = &states[t];
        let (next, piece) = system.step(x, u).ok_or_else(|| Error::LeftDomain {
            step: t,
            state: x.clone(),
        })?;
        if !system.state_space.closure_contains(&next, 0.0) {
            return Err(Error::LeftDomain {
                step: t + 1,
                state: next,
            });
        }
        stage_costs.push(system.cost.eval(&next, u));
        pieces.push(piece);
        states.push(next);
    }
    let total_cost = stage_costs.iter().sum();
    Ok(Trajectory {
        states,
        inputs: inputs.to_vec(),
        pieces,
        stage_costs,
        total_cost,
    })
}

/// Walks the layered strategy from the product state holding `x0`. Each
/// step takes the prescribed input cell and picks the input of least stage
/// cost among those steering into a successor cell; the layer drops by one
/// per step, so the walk ends within the strategy's horizon.
pub fn extract(
    strategy: &LayeredStrategy,
    game: &ProductGame,
    abstraction: &AbstractionResult,
    system: &PwlSystem,
    start: StateId,
    x0: &[f64],
    max_steps: usize,
) -> Result<Trajectory> {
    let n = system.state_dim();
    let mut x = x0.to_vec();
    let mut product = start;
    let mut layer = strategy.horizon();
    let mut inputs: Vec<Vec<f64>> = Vec::new();
    let mut states = vec![x.clone()];
    let mut pieces = Vec::new();
    let mut stage_costs = Vec::new();
    while !game.final_states[product] {
        let step = inputs.len();
        if step >= max_steps || layer == 0 {
            return Err(Error::StepLimit(step));
        }
        let v = strategy.choice(layer, product).ok_or_else(|| Error::ExtractionInfeasible {
            step,
            reason: format!("strategy prescribes no input at product state {product}"),
        })?;
        let (cell, _) = game.back_map[product].expect("live product states map back");
        let piece_id = system.piece_of(&x).ok_or_else(|| Error::LeftDomain {
            step,
            state: x.clone(),
        })?;
        let piece = &system.pieces[piece_id];
        let input_box = abstraction.input_cell(v);
        let mut targets: Vec<StateId> = abstraction.wts.successors(cell, v).iter().map(|t| t.to).collect();
        targets.dedup();
        if targets.contains(&abstraction.sink) {
            return Err(Error::ExtractionInfeasible {
                step,
                reason: format!("input cell {v} may leave the state space from cell {cell}"),
            });
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for &t in &targets {
            let poly = input_constraints(&x, &input_box, &piece.map, &abstraction.cell(t));
            let cost = system.cost.after_step(&piece.map).restrict_state(&x);
            match pwl_minimize(&cost, &poly) {
                Ok((value, u)) => {
                    if best.as_ref().is_none_or(|(b, _)| value < *b) {
                        best = Some((value, u));
                    }
                }
                Err(Error::Infeasible) => {}
                Err(e) => return Err(e),
            }
        }
        let (_, mut u) = best.ok_or_else(|| Error::ExtractionInfeasible {
            step,
            reason: format!("no input of cell {v} steers {x:?} into a successor cell"),
        })?;
        // keep the input inside the prescribed cell's closure despite LP rounding
        for (j, uj) in u.iter_mut().enumerate() {
            *uj = uj.clamp(input_box.lower[j], input_box.upper[j]);
        }
        let next = piece.map.apply(&x, &u);
        let next_cell = abstraction.state_of(&next).ok_or_else(|| Error::LeftDomain {
            step: step + 1,
            state: next.clone(),
        })?;
        let successor = game
            .wts
            .successors(product, v)
            .iter()
            .filter(|tr| game.back_map[tr.to].is_some_and(|(c, _)| c == next_cell))
            .map(|tr| tr.to)
            .min_by(|a, b| {
                strategy
                    .value(layer - 1, *a)
                    .total_cmp(&strategy.value(layer - 1, *b))
                    .then(a.cmp(b))
            })
            .ok_or_else(|| Error::ExtractionInfeasible {
                step,
                reason: format!("cell {next_cell} reached from cell {cell} is not an abstract successor"),
            })?;
        debug_assert_eq!(next.len(), n);
        stage_costs.push(system.cost.eval(&next, &u));
        pieces.push(piece_id);
        inputs.push(u);
        states.push(next.clone());
        x = next;
        product = successor;
        layer -= 1;
    }
    let total_cost = stage_costs.iter().sum();
    Ok(Trajectory {
        states,
        inputs,
        pieces,
        stage_costs,
        total_cost,
    })
}

/// `u in input_box, A x + B u in target` over `u` alone, for fixed `x`.
fn input_constraints(x: &[f64], input_box: &AxisBox, map: &AffineMap, target: &AxisBox) -> Polyhedron {
    let n = map.state_dim();
    let p = map.input_dim();
    let mut poly = input_box.to_polyhedron();
    for h in target.to_polyhedron().constraints() {
        let coeffs = map.pullback(&h.normal);
        let fixed: f64 = (0..n).map(|j| coeffs[j] * x[j]).sum();
        poly.push(crate::geometry::Halfspace::new(coeffs[n..n + p].to_vec(), h.offset - fixed));
    }
    poly
}

/// Parameters of [`optcar`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Per-axis state grid width of the first iteration.
    #[serde(with = "rational_list")]
    pub epsilon0: Vec<Rational>,
    /// Per-axis number of input cells of the first iteration.
    pub input_cells: Vec<usize>,
    /// Whether input cells are halved along with state cells.
    #[serde(default)]
    pub refine_inputs: bool,
    pub max_iterations: usize,
    /// Extraction step budget; defaults to the product state count.
    #[serde(default)]
    pub max_steps: Option<usize>,
}

/// Wall-clock seconds spent in each phase of one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    /// Abstraction, product construction and value iteration.
    pub solve: f64,
    pub extraction: f64,
}

/// One iteration of the refinement loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub iteration: usize,
    #[serde(with = "rational_list")]
    pub epsilon: Vec<Rational>,
    pub state_cells: Vec<usize>,
    pub input_cells: Vec<usize>,
    #[serde(with = "crate::io::ext_real")]
    pub abstract_cost: f64,
    pub winning: bool,
    pub trajectory: Option<Trajectory>,
    pub concrete_cost: Option<f64>,
    pub abstract_states: usize,
    pub transitions: usize,
    pub product_states: usize,
    pub value_iterations: usize,
    /// Kept out of serialized reports so they stay byte-reproducible.
    #[serde(skip)]
    pub timings: PhaseTimings,
}

/// Runs `max_iterations` rounds of abstraction, game solving and
/// extraction, halving the state grid each round.
pub fn optcar(
    system: &PwlSystem,
    property: &PropertyAutomaton,
    x0: &[f64],
    config: &SynthesisConfig,
) -> Result<Vec<RefinementReport>> {
    if config.max_iterations == 0 {
        return Err(Error::Validation(vec!["max_iterations must be at least 1".into()]));
    }
    let mut state_lattice = Lattice::new(&system.state_space, &config.epsilon0)?;
    let mut input_lattice = Lattice::with_counts(&system.input_space, &config.input_cells)?;
    let mut reports = Vec::with_capacity(config.max_iterations);
    for iteration in 0..config.max_iterations {
        reports.push(run_iteration(system, property, x0, &state_lattice, &input_lattice, iteration, config.max_steps)?);
        state_lattice = state_lattice.halved();
        if config.refine_inputs {
            input_lattice = input_lattice.halved();
        }
    }
    Ok(reports)
}

/// Abstraction, product game and strategy for one grid.
pub struct Stage {
    pub abstraction: AbstractionResult,
    pub game: ProductGame,
    pub start: StateId,
    pub strategy: Option<LayeredStrategy>,
    pub cost: f64,
    pub value_iterations: usize,
}

/// Builds and solves the game for one pair of grids.
pub fn solve_stage(
    system: &PwlSystem,
    property: &PropertyAutomaton,
    x0: &[f64],
    state_lattice: &Lattice,
    input_lattice: &Lattice,
) -> Result<Stage> {
    let abstraction = cons_abs(system, state_lattice, input_lattice, x0)?;
    let game = reduce_reach(&abstraction.wts, property)?;
    let start = property
        .init
        .iter()
        .find_map(|&q| game.product_state(abstraction.initial_state, q))
        .ok_or_else(|| {
            Error::LabelMismatch(format!(
                "initial cell is labelled `{}`, which no initial automaton state carries",
                abstraction.wts.label(abstraction.initial_state)
            ))
        })?;
    let solution = solve_finite_game(&game, start)?;
    Ok(Stage {
        abstraction,
        game,
        start,
        cost: solution.cost,
        strategy: solution.strategy,
        value_iterations: solution.iterations,
    })
}

fn run_iteration(
    system: &PwlSystem,
    property: &PropertyAutomaton,
    x0: &[f64],
    state_lattice: &Lattice,
    input_lattice: &Lattice,
    iteration: usize,
    max_steps: Option<usize>,
) -> Result<RefinementReport> {
    let clock = Instant::now();
    let stage = solve_stage(system, property, x0, state_lattice, input_lattice)?;
    let solve_time = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let Stage {
        abstraction,
        game,
        start,
        strategy,
        cost,
        value_iterations,
    } = stage;
    let trajectory = match &strategy {
        Some(strategy) => {
            let budget = max_steps.unwrap_or(game.num_states());
            Some(extract(strategy, &game, &abstraction, system, start, x0, budget)?)
        }
        None => None,
    };
    let extraction_time = clock.elapsed().as_secs_f64();
    Ok(RefinementReport {
        iteration,
        epsilon: state_lattice.widths(),
        state_cells: state_lattice.counts(),
        input_cells: input_lattice.counts(),
        abstract_cost: cost,
        winning: cost.is_finite(),
        concrete_cost: trajectory.as_ref().map(|t| t.total_cost),
        trajectory,
        abstract_states: abstraction.wts.num_states(),
        transitions: abstraction.wts.num_transitions(),
        product_states: game.num_states(),
        value_iterations,
        timings: PhaseTimings {
            solve: solve_time,
            extraction: extraction_time,
        },
    })
}

/// Constants of the perturbation bound
/// `|x_{t+1} - x*_{t+1}| <= c1 eps_x + c2 eps_u` (infinity norms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub t: usize,
    pub c1: f64,
    pub c2: f64,
}

impl BoundConstants {
    pub fn bound(&self, eps_x: f64, eps_u: f64) -> f64 {
        self.c1 * eps_x + self.c2 * eps_u
    }
}

/// `c1 = prod_{j=0..t} |A_j|`, `c2 = |B_t| + sum_{k=1..t} (prod_{j=k..t} |A_j|) |B_{k-1}|`,
/// with `maps[j]` the mode active at step `j`.
pub fn lemma7_constants(maps: &[&AffineMap], t: usize) -> BoundConstants {
    assert!(t < maps.len(), "need the modes of steps 0..=t");
    let a: Vec<f64> = maps[..=t].iter().map(|m| inf_norm(&m.a)).collect();
    let b: Vec<f64> = maps[..=t].iter().map(|m| inf_norm(&m.b)).collect();
    let c1 = a.iter().product();
    let mut c2 = b[t];
    for k in 1..=t {
        let tail: f64 = a[k..=t].iter().product();
        c2 += tail * b[k - 1];
    }
    BoundConstants { t, c1, c2 }
}

/// Outcome of [`lemma7_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma7Report {
    pub trials: usize,
    /// Trials that left the nominal mode sequence, where the bound does not apply.
    pub skipped: usize,
    pub violations: usize,
    /// Largest observed deviation relative to its bound.
    pub max_ratio: f64,
}

impl Lemma7Report {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Perturbs the nominal start by up to `eps_x` and every input by up to
/// `eps_u` (infinity norm), replays the dynamics and checks the bound at
/// every step. Trial `i` draws from its own stream of `seed`.
pub fn lemma7_check(
    system: &PwlSystem,
    nominal: &Trajectory,
    eps_x: f64,
    eps_u: f64,
    trials: usize,
    seed: u64,
) -> Lemma7Report {
    let maps: Vec<&AffineMap> = nominal.pieces.iter().map(|&i| &system.pieces[i].map).collect();
    let bounds: Vec<f64> = (0..maps.len())
        .map(|t| lemma7_constants(&maps, t).bound(eps_x, eps_u))
        .collect();
    let outcomes: Vec<Option<(bool, f64)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let dx: Vec<f64> = (0..system.state_dim()).map(|_| uniform(&mut rng, eps_x)).collect();
            let du: Vec<Vec<f64>> = nominal
                .inputs
                .iter()
                .map(|u| u.iter().map(|_| uniform(&mut rng, eps_u)).collect())
                .collect();
            replay_perturbed(system, nominal, &bounds, &dx, &du)
        })
        .collect();
    let mut report = Lemma7Report {
        trials,
        skipped: 0,
        violations: 0,
        max_ratio: 0.0,
    };
    for outcome in outcomes {
        match outcome {
            None => report.skipped += 1,
            Some((ok, ratio)) => {
                if !ok {
                    report.violations += 1;
                }
                report.max_ratio = report.max_ratio.max(ratio);
            }
        }
    }
    report
}

fn uniform<R: Rng>(rng: &mut R, eps: f64) -> f64 {
    if eps > 0.0 {
        rng.gen_range(-eps..=eps)
    } else {
        0.0
    }
}

/// Replays the nominal run with offsets `dx` on the start and `du[t]` on the
/// inputs. `None` if the mode sequence changes; otherwise whether every step
/// respects its bound and the largest deviation-to-bound ratio.
pub fn replay_perturbed(
    system: &PwlSystem,
    nominal: &Trajectory,
    bounds: &[f64],
    dx: &[f64],
    du: &[Vec<f64>],
) -> Option<(bool, f64)> {
    let mut x: Vec<f64> = nominal.states[0].iter().zip(dx).map(|(a, b)| a + b).collect();
    let mut ok = true;
    let mut ratio: f64 = 0.0;
    for (t, u_star) in nominal.inputs.iter().enumerate() {
        if system.piece_of(&x) != Some(nominal.pieces[t]) {
            return None;
        }
        let u: Vec<f64> = u_star.iter().zip(&du[t]).map(|(a, b)| a + b).collect();
        x = system.pieces[nominal.pieces[t]].map.apply(&x, &u);
        let diff: Vec<f64> = x.iter().zip(&nominal.states[t + 1]).map(|(a, b)| a - b).collect();
        let dev = vec_inf_norm(&diff);
        // floating-point slack on top of the bound
        if dev > bounds[t] * (1.0 + 1e-12) + 1e-15 {
            ok = false;
        }
        if bounds[t] > 0.0 {
            ratio = ratio.max(dev / bounds[t]);
        }
    }
    Some((ok, ratio))
}

/// Whether the concrete cost respects the abstract one, up to float slack.
pub fn cost_is_sound(report: &RefinementReport) -> bool {
    match report.concrete_cost {
        Some(c) => c <= report.abstract_cost + BOUNDARY_TOLERANCE,
        None => true,
    }
}

pub(crate) mod rational_list {
    use serde::{de, Deserialize, Deserializer, Serializer};

    use crate::geometry::Rational;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|r| r.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| crate::io::parse_rational(s).map_err(de::Error::custom))
            .collect()
    }
}
