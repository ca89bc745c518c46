//! Finite weighted transition systems, paths, layered strategies and their
//! costs.
//!
//! Costs are extended nonnegative reals represented as `f64` with
//! `f64::INFINITY` as the top element; IEEE addition already saturates
//! (`inf + w = inf`) and compares `inf` above every finite weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateId = usize;
pub type InputId = usize;

/// Default cap on the number of enumerated paths.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: StateId,
    pub input: InputId,
    pub to: StateId,
    #[serde(with = "crate::io::ext_real")]
    pub weight: f64,
}

/// A finite weighted transition system with an optional absorbing sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WtsData", into = "WtsData")]
pub struct FiniteWts {
    num_states: usize,
    num_inputs: usize,
    init_states: Vec<StateId>,
    propositions: Vec<String>,
    labels: Vec<usize>,
    transitions: Vec<Transition>,
    offsets: Vec<usize>,
    sink: Option<StateId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WtsData {
    num_states: usize,
    num_inputs: usize,
    init_states: Vec<StateId>,
    propositions: Vec<String>,
    labels: Vec<usize>,
    transitions: Vec<Transition>,
    #[serde(default)]
    sink: Option<StateId>,
}

impl TryFrom<WtsData> for FiniteWts {
    type Error = Error;

    fn try_from(d: WtsData) -> Result<Self> {
        FiniteWts::new(
            d.num_states,
            d.num_inputs,
            d.propositions,
            d.labels,
            d.init_states,
            d.transitions,
            d.sink,
        )
    }
}

impl From<FiniteWts> for WtsData {
    fn from(w: FiniteWts) -> Self {
        WtsData {
            num_states: w.num_states,
            num_inputs: w.num_inputs,
            init_states: w.init_states,
            propositions: w.propositions,
            labels: w.labels,
            transitions: w.transitions,
            sink: w.sink,
        }
    }
}

impl FiniteWts {
    pub fn new(
        num_states: usize,
        num_inputs: usize,
        propositions: Vec<String>,
        labels: Vec<usize>,
        init_states: Vec<StateId>,
        mut transitions: Vec<Transition>,
        sink: Option<StateId>,
    ) -> Result<Self> {
        if labels.len() != num_states {
            return Err(Error::Dimension(format!(
                "{} labels for {} states",
                labels.len(),
                num_states
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= propositions.len()) {
            return Err(Error::Dimension(format!("label {bad} names no proposition")));
        }
        if let Some(bad) = init_states.iter().find(|&&s| s >= num_states) {
            return Err(Error::Dimension(format!("initial state {bad} out of range")));
        }
        if sink.is_some_and(|s| s >= num_states) {
            return Err(Error::Dimension("sink state out of range".into()));
        }
        for t in &transitions {
            if t.from >= num_states || t.to >= num_states || t.input >= num_inputs {
                return Err(Error::Dimension(format!("transition {t:?} out of range")));
            }
            if t.weight.is_nan() || t.weight < 0.0 {
                return Err(Error::Dimension(format!("transition {t:?} has a negative weight")));
            }
        }
        transitions.sort_by_key(|t| (t.from, t.input, t.to));
        if let Some(w) = transitions
            .windows(2)
            .find(|w| (w[0].from, w[0].input, w[0].to) == (w[1].from, w[1].input, w[1].to))
        {
            return Err(Error::Dimension(format!("duplicate transition {:?}", w[0])));
        }
        let mut offsets = vec![0; num_states + 1];
        for t in &transitions {
            offsets[t.from + 1] += 1;
        }
        for s in 0..num_states {
            offsets[s + 1] += offsets[s];
        }
        let mut init_states = init_states;
        init_states.sort_unstable();
        init_states.dedup();
        Ok(Self {
            num_states,
            num_inputs,
            init_states,
            propositions,
            labels,
            transitions,
            offsets,
            sink,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn init_states(&self) -> &[StateId] {
        &self.init_states
    }

    pub fn propositions(&self) -> &[String] {
        &self.propositions
    }

    pub fn sink(&self) -> Option<StateId> {
        self.sink
    }

    pub fn label_id(&self, s: StateId) -> usize {
        self.labels[s]
    }

    pub fn label(&self, s: StateId) -> &str {
        &self.propositions[self.labels[s]]
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Outgoing transitions of `s`, sorted by `(input, to)`.
    pub fn outgoing(&self, s: StateId) -> &[Transition] {
        &self.transitions[self.offsets[s]..self.offsets[s + 1]]
    }

    /// Transitions `(s, u, *)`.
    pub fn successors(&self, s: StateId, u: InputId) -> &[Transition] {
        let out = self.outgoing(s);
        let start = out.partition_point(|t| t.input < u);
        let end = out.partition_point(|t| t.input <= u);
        &out[start..end]
    }

    pub fn enabled(&self, s: StateId) -> Vec<InputId> {
        let mut inputs: Vec<InputId> = self.outgoing(s).iter().map(|t| t.input).collect();
        inputs.dedup();
        inputs
    }

    pub fn weight(&self, s: StateId, u: InputId, t: StateId) -> Option<f64> {
        let succ = self.successors(s, u);
        succ.binary_search_by_key(&t, |tr| tr.to)
            .ok()
            .map(|i| succ[i].weight)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path {
    pub states: Vec<StateId>,
    pub inputs: Vec<InputId>,
}

impl Path {
    pub fn single(s: StateId) -> Self {
        Self {
            states: vec![s],
            inputs: Vec::new(),
        }
    }

    pub fn last(&self) -> StateId {
        *self.states.last().expect("paths are nonempty")
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Sum of transition weights along a path.
pub fn path_cost(system: &FiniteWts, path: &Path) -> Result<f64> {
    if path.states.len() != path.inputs.len() + 1 {
        return Err(Error::InvalidPath(format!(
            "{} states for {} inputs",
            path.states.len(),
            path.inputs.len()
        )));
    }
    let mut total = 0.0;
    for (j, u) in path.inputs.iter().enumerate() {
        let (s, t) = (path.states[j], path.states[j + 1]);
        if s >= system.num_states() || t >= system.num_states() {
            return Err(Error::InvalidPath(format!("state out of range at step {j}")));
        }
        let w = system
            .weight(s, *u, t)
            .ok_or_else(|| Error::InvalidPath(format!("({s}, {u}, {t}) is not a transition")))?;
        total += w;
    }
    Ok(total)
}

/// A strategy queried by remaining-step budget (`layer`).
pub trait Strategy {
    /// Largest layer a path may start from.
    fn horizon(&self) -> usize;

    /// Input prescribed at `state` with `layer` steps of budget left.
    fn choice(&self, layer: usize, state: StateId) -> Option<InputId>;

    fn is_final(&self, state: StateId) -> bool;
}

/// Value table and argmin choices of the min-max value iteration, one row
/// per layer. Layers past `horizon` repeat the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredStrategy {
    values: Vec<Vec<f64>>,
    choices: Vec<Vec<Option<InputId>>>,
    final_states: Vec<bool>,
}

impl LayeredStrategy {
    pub(crate) fn new(
        values: Vec<Vec<f64>>,
        choices: Vec<Vec<Option<InputId>>>,
        final_states: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(values.len(), choices.len());
        Self {
            values,
            choices,
            final_states,
        }
    }

    pub fn num_states(&self) -> usize {
        self.final_states.len()
    }

    pub fn value(&self, layer: usize, s: StateId) -> f64 {
        self.values[layer.min(self.horizon())][s]
    }

    /// Value at the last computed layer.
    pub fn converged_value(&self, s: StateId) -> f64 {
        self.value(self.horizon(), s)
    }

    pub fn final_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.final_states
            .iter()
            .enumerate()
            .filter_map(|(s, f)| f.then_some(s))
    }
}

impl Strategy for LayeredStrategy {
    fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    fn choice(&self, layer: usize, state: StateId) -> Option<InputId> {
        self.choices[layer.min(self.horizon())][state]
    }

    fn is_final(&self, state: StateId) -> bool {
        self.final_states[state]
    }
}

/// Memoryless strategy cut off after `horizon` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionalStrategy {
    pub choices: Vec<Option<InputId>>,
    pub final_states: Vec<bool>,
    pub horizon: usize,
}

impl Strategy for PositionalStrategy {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn choice(&self, layer: usize, state: StateId) -> Option<InputId> {
        if layer == 0 {
            None
        } else {
            self.choices[state]
        }
    }

    fn is_final(&self, state: StateId) -> bool {
        self.final_states[state]
    }
}

/// Every maximal path from `start` conforming to `strategy`, starting at its
/// horizon layer. Paths end in a final state or where the strategy stops.
pub fn conforming_maximal_paths<S: Strategy + ?Sized>(
    system: &FiniteWts,
    strategy: &S,
    start: StateId,
    cap: usize,
) -> Result<Vec<Path>> {
    let mut out = Vec::new();
    let mut path = Path::single(start);
    extend(system, strategy, strategy.horizon(), &mut path, &mut out, cap)?;
    Ok(out)
}

fn extend<S: Strategy + ?Sized>(
    system: &FiniteWts,
    strategy: &S,
    layer: usize,
    path: &mut Path,
    out: &mut Vec<Path>,
    cap: usize,
) -> Result<()> {
    let s = path.last();
    let next = if strategy.is_final(s) {
        None
    } else {
        strategy
            .choice(layer, s)
            .map(|u| (u, system.successors(s, u)))
            .filter(|(_, succ)| !succ.is_empty())
    };
    match next {
        None => {
            if out.len() >= cap {
                return Err(Error::TooManyPaths(cap));
            }
            out.push(path.clone());
        }
        Some((u, succ)) => {
            for t in succ {
                path.states.push(t.to);
                path.inputs.push(u);
                extend(system, strategy, layer.saturating_sub(1), path, out, cap)?;
                path.states.pop();
                path.inputs.pop();
            }
        }
    }
    Ok(())
}

/// Supremum of path costs over maximal conforming paths; infinite if any of
/// them stops outside the final states.
pub fn strategy_cost<S: Strategy + ?Sized>(
    system: &FiniteWts,
    strategy: &S,
    start: StateId,
    cap: usize,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for path in conforming_maximal_paths(system, strategy, start, cap)? {
        if !strategy.is_final(path.last()) {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(path_cost(system, &path)?);
    }
    Ok(worst)
}
