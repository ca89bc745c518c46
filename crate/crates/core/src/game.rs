//! Reduction of a regular objective to reachability on the product with the
//! property automaton, and the min-max value iteration that solves it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wts::{strategy_cost, FiniteWts, InputId, LayeredStrategy, PositionalStrategy, StateId, Transition, DEFAULT_PATH_CAP};

/// Default state cap for [`brute_force_game`].
pub const BRUTE_FORCE_MAX_STATES: usize = 8;

/// Finite automaton over propositions. A word is accepted when some run
/// visits automaton states whose labels spell it and ends in a state
/// labelled with the final proposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyAutomaton {
    pub states: Vec<String>,
    pub labels: Vec<String>,
    pub init: Vec<usize>,
    pub transitions: Vec<(usize, usize)>,
    pub final_proposition: String,
}

impl PropertyAutomaton {
    pub fn new(
        states: Vec<String>,
        labels: Vec<String>,
        init: Vec<usize>,
        transitions: Vec<(usize, usize)>,
        final_proposition: impl Into<String>,
    ) -> Result<Self> {
        let aut = Self {
            states,
            labels,
            init,
            transitions,
            final_proposition: final_proposition.into(),
        };
        aut.validate()?;
        Ok(aut)
    }

    /// Two-state automaton for "eventually `goal`", staying in `other` until then.
    pub fn reach(other: &str, goal: &str) -> Self {
        Self {
            states: vec!["wait".into(), "done".into()],
            labels: vec![other.into(), goal.into()],
            init: vec![0, 1],
            transitions: vec![(0, 0), (0, 1)],
            final_proposition: goal.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if self.labels.len() != n {
            return Err(Error::Dimension(format!("{} labels for {n} automaton states", self.labels.len())));
        }
        if self.init.iter().any(|&q| q >= n) || self.transitions.iter().any(|&(a, b)| a >= n || b >= n) {
            return Err(Error::Dimension("automaton state index out of range".into()));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn successors(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        self.transitions.iter().filter(move |(a, _)| *a == q).map(|(_, b)| *b)
    }

    pub fn is_final(&self, q: usize) -> bool {
        self.labels[q] == self.final_proposition
    }

    /// Whether some final-labelled state is reachable from an initial state.
    pub fn has_reachable_final(&self) -> bool {
        let mut seen = vec![false; self.num_states()];
        let mut stack: Vec<usize> = self.init.clone();
        while let Some(q) = stack.pop() {
            if std::mem::replace(&mut seen[q], true) {
                continue;
            }
            if self.is_final(q) {
                return true;
            }
            stack.extend(self.successors(q));
        }
        false
    }

    /// Direct acceptance check of a label word.
    pub fn accepts<S: AsRef<str>>(&self, word: &[S]) -> bool {
        let Some(first) = word.first() else {
            return false;
        };
        let mut current: Vec<bool> = (0..self.num_states())
            .map(|q| self.init.contains(&q) && self.labels[q] == first.as_ref())
            .collect();
        for letter in &word[1..] {
            let mut next = vec![false; self.num_states()];
            for &(a, b) in &self.transitions {
                if current[a] && self.labels[b] == letter.as_ref() {
                    next[b] = true;
                }
            }
            current = next;
        }
        current.iter().enumerate().any(|(q, &on)| on && self.is_final(q))
    }
}

/// Reachability game on the product of a system and a property automaton.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductGame {
    pub wts: FiniteWts,
    pub final_states: Vec<bool>,
    /// `(system state, automaton state)` for each product state; `None` for
    /// the dead state.
    pub back_map: Vec<Option<(StateId, usize)>>,
    pub dead: Option<StateId>,
    automaton_states: usize,
    index: Vec<Option<StateId>>,
}

impl ProductGame {
    /// Treats `wts` itself as the game arena with the given targets.
    pub fn reachability(wts: FiniteWts, final_states: Vec<bool>) -> Result<Self> {
        if final_states.len() != wts.num_states() {
            return Err(Error::Dimension("final state mask has the wrong length".into()));
        }
        let n = wts.num_states();
        Ok(Self {
            back_map: (0..n).map(|s| Some((s, 0))).collect(),
            dead: wts.sink(),
            automaton_states: 1,
            index: (0..n).map(Some).collect(),
            final_states,
            wts,
        })
    }

    pub fn num_states(&self) -> usize {
        self.wts.num_states()
    }

    pub fn product_state(&self, system_state: StateId, automaton_state: usize) -> Option<StateId> {
        self.index
            .get(system_state * self.automaton_states + automaton_state)
            .copied()
            .flatten()
    }

    pub fn init_states(&self) -> &[StateId] {
        self.wts.init_states()
    }
}

/// Product construction with a dead state absorbing every move the
/// automaton cannot follow.
pub fn reduce_reach(system: &FiniteWts, property: &PropertyAutomaton) -> Result<ProductGame> {
    property.validate()?;
    let nq = property.num_states();
    let mut index = vec![None; system.num_states() * nq];
    let mut back_map = Vec::new();
    let mut labels = Vec::new();
    let props: Vec<String> = system.propositions().to_vec();
    for s in 0..system.num_states() {
        if Some(s) == system.sink() {
            continue;
        }
        for q in 0..nq {
            if property.labels[q] == system.label(s) {
                index[s * nq + q] = Some(back_map.len());
                back_map.push(Some((s, q)));
                labels.push(system.label_id(s));
            }
        }
    }
    let dead = back_map.len();
    back_map.push(None);
    let mut propositions = props;
    let dead_label = propositions.len();
    propositions.push(DEAD_PRODUCT_LABEL.to_string());
    labels.push(dead_label);

    let succ_q: Vec<Vec<usize>> = (0..nq).map(|q| property.successors(q).collect()).collect();
    let mut transitions = Vec::new();
    for (p, entry) in back_map.iter().enumerate() {
        let Some((s, q)) = *entry else { continue };
        let mut last_dead_input = None;
        for t in system.outgoing(s) {
            let mut matched = false;
            for &q2 in &succ_q[q] {
                if let Some(p2) = index[t.to * nq + q2] {
                    matched = true;
                    transitions.push(Transition {
                        from: p,
                        input: t.input,
                        to: p2,
                        weight: t.weight,
                    });
                }
            }
            if !matched && last_dead_input != Some(t.input) {
                last_dead_input = Some(t.input);
                transitions.push(Transition {
                    from: p,
                    input: t.input,
                    to: dead,
                    weight: f64::INFINITY,
                });
            }
        }
    }
    for u in 0..system.num_inputs() {
        transitions.push(Transition {
            from: dead,
            input: u,
            to: dead,
            weight: f64::INFINITY,
        });
    }
    // Several automaton moves may land on the same product state.
    transitions.sort_by_key(|a| (a.from, a.input, a.to));
    transitions.dedup_by(|a, b| (a.from, a.input, a.to) == (b.from, b.input, b.to));

    let init: Vec<StateId> = system
        .init_states()
        .iter()
        .flat_map(|&s| property.init.iter().map(move |&q| (s, q)))
        .filter_map(|(s, q)| index[s * nq + q])
        .collect();
    if init.is_empty() {
        return Err(Error::LabelMismatch(
            "no initial system state shares a label with an initial automaton state".into(),
        ));
    }
    let final_states = back_map
        .iter()
        .map(|e| e.is_some_and(|(_, q)| property.is_final(q)))
        .collect();
    let wts = FiniteWts::new(
        back_map.len(),
        system.num_inputs(),
        propositions,
        labels,
        init,
        transitions,
        Some(dead),
    )?;
    Ok(ProductGame {
        wts,
        final_states,
        back_map,
        dead: Some(dead),
        automaton_states: nq,
        index,
    })
}

/// Label carried by the product's dead state.
pub const DEAD_PRODUCT_LABEL: &str = "__dead__";

/// Result of [`solve_finite_game`].
#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    pub cost: f64,
    /// Present only when `cost` is finite.
    pub strategy: Option<LayeredStrategy>,
    pub iterations: usize,
}

/// Min-max value iteration over all states, at most `|S|` sweeps with early
/// exit at a fixpoint. Ties among inputs go to the lowest input index.
pub fn value_iteration(game: &ProductGame) -> LayeredStrategy {
    let n = game.num_states();
    let finals = &game.final_states;
    let initial: Vec<f64> = finals.iter().map(|&f| if f { 0.0 } else { f64::INFINITY }).collect();
    let mut values = vec![initial];
    let mut choices = vec![vec![None; n]];
    for _ in 1..=n {
        let prev = values.last().expect("layer 0 exists");
        let layer: Vec<(f64, Option<InputId>)> = (0..n)
            .into_par_iter()
            .map(|s| {
                if finals[s] {
                    return (0.0, None);
                }
                best_input(&game.wts, s, prev)
            })
            .collect();
        let (v, c): (Vec<f64>, Vec<Option<InputId>>) = layer.into_iter().unzip();
        let changed = v != *prev;
        values.push(v);
        choices.push(c);
        if !changed {
            break;
        }
    }
    LayeredStrategy::new(values, choices, finals.clone())
}

fn best_input(wts: &FiniteWts, s: StateId, prev: &[f64]) -> (f64, Option<InputId>) {
    let mut best = (f64::INFINITY, None);
    let out = wts.outgoing(s);
    let mut i = 0;
    while i < out.len() {
        let u = out[i].input;
        let mut worst: f64 = 0.0;
        while i < out.len() && out[i].input == u {
            worst = worst.max(out[i].weight + prev[out[i].to]);
            i += 1;
        }
        if worst < best.0 {
            best = (worst, Some(u));
        }
    }
    best
}

/// Solves the reachability game from `start`.
pub fn solve_finite_game(game: &ProductGame, start: StateId) -> Result<GameSolution> {
    if start >= game.num_states() {
        return Err(Error::Dimension(format!("start state {start} out of range")));
    }
    let strategy = value_iteration(game);
    let iterations = crate::wts::Strategy::horizon(&strategy);
    let cost = strategy.converged_value(start);
    Ok(GameSolution {
        cost,
        strategy: cost.is_finite().then_some(strategy),
        iterations,
    })
}

/// Exhaustive oracle: minimum over every memoryless strategy (cut off after
/// `|S|` steps) of its worst-case conforming path cost.
pub fn brute_force_game(game: &ProductGame, start: StateId, max_states: usize) -> Result<f64> {
    let n = game.num_states();
    if n > max_states {
        return Err(Error::GameTooLarge { states: n, cap: max_states });
    }
    let options: Vec<Vec<Option<InputId>>> = (0..n)
        .map(|s| {
            let enabled = game.wts.enabled(s);
            if game.final_states[s] || enabled.is_empty() {
                vec![None]
            } else {
                enabled.into_iter().map(Some).collect()
            }
        })
        .collect();
    let mut pick = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let strategy = PositionalStrategy {
            choices: (0..n).map(|s| options[s][pick[s]]).collect(),
            final_states: game.final_states.clone(),
            horizon: n,
        };
        best = best.min(strategy_cost(&game.wts, &strategy, start, DEFAULT_PATH_CAP)?);
        // odometer over the choice vector
        let mut s = 0;
        loop {
            if s == n {
                return Ok(best);
            }
            pick[s] += 1;
            if pick[s] < options[s].len() {
                break;
            }
            pick[s] = 0;
            s += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wts::{conforming_maximal_paths, Strategy};

    fn tr(from: StateId, input: InputId, to: StateId, weight: f64) -> Transition {
        Transition { from, input, to, weight }
    }

    fn game(n: usize, inputs: usize, trs: Vec<Transition>, finals: &[StateId]) -> ProductGame {
        let labels = (0..n).map(|s| usize::from(finals.contains(&s))).collect();
        let wts = FiniteWts::new(n, inputs, vec!["free".into(), "goal".into()], labels, vec![0], trs, None).unwrap();
        let mask = (0..n).map(|s| finals.contains(&s)).collect();
        ProductGame::reachability(wts, mask).unwrap()
    }

    /// s0 -a(1)-> s1 -a(1)-> sf, s0 -b(5)-> sf
    fn detour() -> ProductGame {
        game(3, 2, vec![tr(0, 0, 1, 1.0), tr(1, 0, 2, 1.0), tr(0, 1, 2, 5.0)], &[2])
    }

    /// s0 -a-> {s1 (1), s2 (3)}, each -> sf (1)
    fn branching() -> ProductGame {
        game(
            4,
            1,
            vec![tr(0, 0, 1, 1.0), tr(0, 0, 2, 3.0), tr(1, 0, 3, 1.0), tr(2, 0, 3, 1.0)],
            &[3],
        )
    }

    #[test]
    fn cheaper_two_step_route_wins() {
        let g = detour();
        let sol = solve_finite_game(&g, 0).unwrap();
        assert_eq!(sol.cost, 2.0);
        let st = sol.strategy.unwrap();
        assert_eq!(st.choice(st.horizon(), 0), Some(0));
        assert_eq!(brute_force_game(&g, 0, BRUTE_FORCE_MAX_STATES).unwrap(), 2.0);
    }

    #[test]
    fn adversary_takes_the_costlier_branch() {
        let g = branching();
        assert_eq!(solve_finite_game(&g, 0).unwrap().cost, 4.0);
        assert_eq!(brute_force_game(&g, 0, BRUTE_FORCE_MAX_STATES).unwrap(), 4.0);
    }

    #[test]
    fn unreachable_target_has_no_strategy() {
        let g = game(3, 1, vec![tr(0, 0, 1, 1.0), tr(1, 0, 0, 1.0)], &[2]);
        let sol = solve_finite_game(&g, 0).unwrap();
        assert_eq!(sol.cost, f64::INFINITY);
        assert!(sol.strategy.is_none());
        assert_eq!(brute_force_game(&g, 0, BRUTE_FORCE_MAX_STATES).unwrap(), f64::INFINITY);
    }

    #[test]
    fn final_start_costs_nothing() {
        let g = game(1, 1, vec![tr(0, 0, 0, 3.0)], &[0]);
        assert_eq!(solve_finite_game(&g, 0).unwrap().cost, 0.0);
        assert_eq!(brute_force_game(&g, 0, BRUTE_FORCE_MAX_STATES).unwrap(), 0.0);
    }

    #[test]
    fn brute_force_refuses_large_games() {
        let g = game(9, 1, vec![], &[0]);
        assert!(matches!(brute_force_game(&g, 1, 8), Err(Error::GameTooLarge { .. })));
    }

    #[test]
    fn zero_weight_cycles_do_not_trap_the_layered_strategy() {
        // s0 -a(0)-> s0, s0 -b(0)-> sf: every layer past the first ties.
        let g = game(2, 2, vec![tr(0, 0, 0, 0.0), tr(0, 1, 1, 0.0)], &[1]);
        let sol = solve_finite_game(&g, 0).unwrap();
        assert_eq!(sol.cost, 0.0);
        let st = sol.strategy.unwrap();
        let paths = conforming_maximal_paths(&g.wts, &st, 0, 100).unwrap();
        assert!(paths.iter().all(|p| st.is_final(p.last())));
        assert_eq!(strategy_cost(&g.wts, &st, 0, 100).unwrap(), 0.0);
    }

    #[test]
    fn layers_are_monotone_and_reach_a_fixpoint() {
        let g = detour();
        let st = value_iteration(&g);
        for i in 1..=st.horizon() {
            for s in 0..g.num_states() {
                assert!(st.value(i, s) <= st.value(i - 1, s));
            }
        }
        let h = st.horizon();
        for s in 0..g.num_states() {
            assert_eq!(st.value(h, s), st.value(h - 1, s));
        }
    }

    #[test]
    fn immediate_goal_is_accepted() {
        let sys = FiniteWts::new(2, 1, vec!["free".into(), "goal".into()], vec![1, 0], vec![0], vec![tr(0, 0, 1, 1.0)], None)
            .unwrap();
        let aut = PropertyAutomaton::reach("free", "goal");
        let g = reduce_reach(&sys, &aut).unwrap();
        let start = g.init_states()[0];
        assert!(g.final_states[start]);
        assert_eq!(solve_finite_game(&g, start).unwrap().cost, 0.0);
    }

    #[test]
    fn product_size_is_bounded() {
        let sys = FiniteWts::new(
            2,
            1,
            vec!["a".into(), "b".into()],
            vec![0, 1],
            vec![0],
            vec![tr(0, 0, 1, 1.0), tr(1, 0, 0, 1.0)],
            None,
        )
        .unwrap();
        let aut = PropertyAutomaton::new(
            vec!["q0".into(), "q1".into()],
            vec!["a".into(), "b".into()],
            vec![0],
            vec![(0, 1), (1, 0), (1, 1)],
            "b",
        )
        .unwrap();
        let g = reduce_reach(&sys, &aut).unwrap();
        assert!(g.num_states() <= 2 * 2 + 1);
        assert_eq!(g.dead, Some(g.num_states() - 1));
    }

    #[test]
    fn unmatched_moves_go_to_the_dead_state() {
        // system can move a -> c, automaton has no c-labelled state
        let sys = FiniteWts::new(
            3,
            2,
            vec!["a".into(), "b".into(), "c".into()],
            vec![0, 1, 2],
            vec![0],
            vec![tr(0, 0, 2, 1.0), tr(0, 1, 1, 4.0)],
            None,
        )
        .unwrap();
        let aut = PropertyAutomaton::reach("a", "b");
        let g = reduce_reach(&sys, &aut).unwrap();
        let start = g.init_states()[0];
        let dead = g.dead.unwrap();
        assert_eq!(g.wts.weight(start, 0, dead), Some(f64::INFINITY));
        let sol = solve_finite_game(&g, start).unwrap();
        assert_eq!(sol.cost, 4.0);
        let st = sol.strategy.unwrap();
        assert_eq!(st.choice(st.horizon(), start), Some(1));
        for i in 0..=st.horizon() {
            assert_eq!(st.value(i, dead), f64::INFINITY);
        }
    }

    #[test]
    fn missing_initial_match_is_an_error() {
        let sys = FiniteWts::new(1, 1, vec!["x".into()], vec![0], vec![0], vec![], None).unwrap();
        let aut = PropertyAutomaton::reach("free", "goal");
        assert!(matches!(reduce_reach(&sys, &aut), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn automaton_acceptance() {
        let aut = PropertyAutomaton::reach("free", "goal");
        assert!(aut.accepts(&["free", "free", "goal"]));
        assert!(aut.accepts(&["goal"]));
        assert!(!aut.accepts(&["free", "goal", "free"]));
        assert!(!aut.accepts::<&str>(&[]));
        assert!(aut.has_reachable_final());
    }
}
