//! Problem files, reports and trajectory tables.
//!
//! Problems and reports are JSON; trajectories are CSV with the header
//! `step,x1..xn,u1..up,stage_cost`. Floats are written in shortest
//! round-trip form, so reading a file back gives identical values.

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abstraction::{AbstractionResult, Piece, Proposition, PwlSystem, DEAD_PROPOSITION};
use crate::error::{Error, Result};
use crate::game::{reduce_reach, ProductGame, PropertyAutomaton, DEAD_PRODUCT_LABEL};
use crate::geometry::{
    lp_maximize, rational_from_f64, AffineMap, AxisBox, ConvexPwlFunction, Halfspace, Polyhedron, PwlPiece, Rational,
};
use crate::synthesis::{PhaseTimings, RefinementReport, SynthesisConfig, Trajectory};
use crate::wts::{FiniteWts, StateId};

/// Serde adapter writing `f64::INFINITY` as the string `"inf"`, since JSON
/// has no infinity literal.
pub mod ext_real {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *x == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct ExtReal;
        impl Visitor<'_> for ExtReal {
            type Value = f64;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" | "Infinity" | "+inf" => Ok(f64::INFINITY),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(ExtReal)
    }
}

/// Parses `"3/40"`, `"7"` or a decimal like `"0.025"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || Error::Parse {
        location: format!("`{text}`"),
        message: "expected a positive rational such as 1/10".into(),
    };
    if let Some((num, den)) = text.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| bad())?;
        let den: i64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    if let Ok(k) = text.parse::<i64>() {
        return Ok(Rational::from_integer(k));
    }
    let x: f64 = text.parse().map_err(|_| bad())?;
    rational_from_f64(x).map_err(|_| bad())
}

/// A validated problem: system, objective and run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: String,
    pub system: PwlSystem,
    pub automaton: PropertyAutomaton,
    pub x0: Vec<f64>,
    pub config: SynthesisConfig,
    /// Non-fatal findings, such as an unreachable final proposition.
    pub warnings: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiece {
    #[serde(default)]
    name: Option<String>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    #[serde(default)]
    region: Option<RawBox>,
    /// A union of boxes; each becomes its own internal piece.
    #[serde(default)]
    regions: Vec<RawBox>,
    #[serde(default)]
    guard: Vec<Halfspace>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawCost {
    Named(String),
    Pieces { pieces: Vec<PwlPiece> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProposition {
    name: String,
    boxes: Vec<RawBox>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawWidth {
    Text(String),
    Number(f64),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawEpsilon {
    Uniform(RawWidth),
    PerAxis(Vec<RawWidth>),
}

fn default_iterations() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    #[serde(default)]
    name: String,
    state_space: RawBox,
    #[serde(default)]
    init_set: Option<RawBox>,
    input_space: RawBox,
    pieces: Vec<RawPiece>,
    cost: RawCost,
    #[serde(default)]
    propositions: Vec<RawProposition>,
    #[serde(default)]
    default_proposition: Option<String>,
    automaton: PropertyAutomaton,
    x0: Vec<f64>,
    epsilon0: RawEpsilon,
    input_cells: Vec<usize>,
    #[serde(default)]
    refine_inputs: bool,
    #[serde(default = "default_iterations")]
    max_iterations: usize,
    #[serde(default)]
    max_steps: Option<usize>,
}

/// Reads and validates a problem file.
pub fn parse_problem(path: impl AsRef<Path>) -> Result<Problem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_problem_str(&text, &path.display().to_string())
}

/// Parses problem text; `origin` prefixes error locations.
pub fn parse_problem_str(text: &str, origin: &str) -> Result<Problem> {
    let raw: RawProblem = serde_json::from_str(text).map_err(|e| json_error(origin, &e))?;
    build_problem(raw)
}

fn json_error(origin: &str, e: &serde_json::Error) -> Error {
    Error::Parse {
        location: format!("{origin}:{}:{}", e.line(), e.column()),
        message: e.to_string(),
    }
}

fn check_box(errors: &mut Vec<String>, field: &str, b: &RawBox, dim: usize) -> AxisBox {
    if b.lower.len() != dim || b.upper.len() != dim {
        errors.push(format!("{field}: expected {dim} bounds per side"));
    } else if b.lower.iter().zip(&b.upper).any(|(l, u)| !l.is_finite() || !u.is_finite() || l > u) {
        errors.push(format!("{field}: lower bounds must be finite and not exceed upper bounds"));
    }
    AxisBox::closed(b.lower.clone(), b.upper.clone())
}

fn build_problem(raw: RawProblem) -> Result<Problem> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let n = raw.state_space.lower.len();
    let p = raw.input_space.lower.len();
    if n == 0 {
        errors.push("state_space: needs at least one dimension".into());
    }
    if p == 0 {
        errors.push("input_space: needs at least one dimension".into());
    }
    let state_space = check_box(&mut errors, "state_space", &raw.state_space, n);
    let input_space = check_box(&mut errors, "input_space", &raw.input_space, p);
    let init_set = match &raw.init_set {
        Some(b) => check_box(&mut errors, "init_set", b, n),
        None => state_space.clone(),
    };
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    if !init_set.closure_within(&state_space, 0.0) {
        errors.push("init_set: must lie inside state_space".into());
    }

    let mut pieces = Vec::with_capacity(raw.pieces.len());
    if raw.pieces.is_empty() {
        errors.push("pieces: at least one piece is required".into());
    }
    for (i, rp) in raw.pieces.iter().enumerate() {
        let field = format!("pieces[{i}]");
        let name = rp.name.clone().unwrap_or_else(|| format!("piece {i}"));
        let map = match AffineMap::new(rp.a.clone(), rp.b.clone()) {
            Ok(m) if m.state_dim() == n && (m.input_dim() == p || rp.b.is_empty()) => m,
            Ok(_) => {
                errors.push(format!("{field}: A must be {n}x{n} and B {n}x{p}"));
                continue;
            }
            Err(e) => {
                errors.push(format!("{field}: {e}"));
                continue;
            }
        };
        let mut base = Polyhedron::universe(n);
        if let Some(b) = &rp.region {
            let b = check_box(&mut errors, &format!("{field}.region"), b, n);
            base = base.intersect(&b.to_polyhedron());
        }
        for (k, h) in rp.guard.iter().enumerate() {
            if h.normal.len() != n {
                errors.push(format!("{field}.guard[{k}]: normal needs {n} components"));
            } else {
                base.push(h.clone());
            }
        }
        if rp.regions.is_empty() {
            pieces.push(Piece { name, map, region: base });
            continue;
        }
        for (k, b) in rp.regions.iter().enumerate() {
            let b = check_box(&mut errors, &format!("{field}.regions[{k}]"), b, n);
            pieces.push(Piece {
                name: name.clone(),
                map: map.clone(),
                region: base.intersect(&b.to_polyhedron()),
            });
        }
    }

    let cost = match &raw.cost {
        RawCost::Named(s) if s == "one_norm_of_input" => Some(ConvexPwlFunction::one_norm_of_input(n, p)),
        RawCost::Named(s) => {
            errors.push(format!("cost: unknown shorthand `{s}` (expected one_norm_of_input)"));
            None
        }
        RawCost::Pieces { pieces } => match ConvexPwlFunction::new(pieces.clone()) {
            Ok(c) if c.state_dim() == n && c.input_dim() == p => Some(c),
            Ok(_) => {
                errors.push(format!("cost: pieces need {n} state and {p} input coefficients"));
                None
            }
            Err(e) => {
                errors.push(format!("cost: {e}"));
                None
            }
        },
    };

    let mut propositions = Vec::new();
    let mut seen = HashSet::new();
    for (i, rp) in raw.propositions.iter().enumerate() {
        if !seen.insert(rp.name.clone()) {
            errors.push(format!("propositions[{i}]: duplicate name `{}`", rp.name));
        }
        if rp.name == DEAD_PROPOSITION || rp.name == DEAD_PRODUCT_LABEL {
            errors.push(format!("propositions[{i}]: `{}` is reserved", rp.name));
        }
        let regions = rp
            .boxes
            .iter()
            .enumerate()
            .map(|(k, b)| check_box(&mut errors, &format!("propositions[{i}].boxes[{k}]"), b, n))
            .collect();
        propositions.push(Proposition {
            name: rp.name.clone(),
            regions,
        });
    }
    if let Some(d) = &raw.default_proposition {
        if d == DEAD_PROPOSITION || d == DEAD_PRODUCT_LABEL {
            errors.push(format!("default_proposition: `{d}` is reserved"));
        }
    }
    for (i, a) in propositions.iter().enumerate() {
        for b in &propositions[i + 1..] {
            for ra in &a.regions {
                for rb in &b.regions {
                    if ra.is_valid() && rb.is_valid() && ra.interiors_overlap(rb, 0.0) {
                        errors.push(format!("propositions `{}` and `{}` overlap", a.name, b.name));
                    }
                }
            }
        }
    }

    if raw.x0.len() != n {
        errors.push(format!("x0: expected {n} components"));
    } else if !init_set.closure_contains(&raw.x0, 0.0) {
        errors.push("x0: must lie in init_set".into());
    }

    let epsilon0 = match parse_epsilon(&raw.epsilon0, n) {
        Ok(e) => e,
        Err(msg) => {
            errors.push(format!("epsilon0: {msg}"));
            Vec::new()
        }
    };
    if raw.input_cells.len() != p || raw.input_cells.contains(&0) {
        errors.push(format!("input_cells: expected {p} positive counts"));
    }
    if raw.max_iterations == 0 {
        errors.push("max_iterations: must be at least 1".into());
    }

    if let Err(e) = raw.automaton.validate() {
        errors.push(format!("automaton: {e}"));
    }
    let mut names: Vec<String> = propositions.iter().map(|p| p.name.clone()).collect();
    if let Some(d) = &raw.default_proposition {
        names.push(d.clone());
    }
    for (q, label) in raw.automaton.labels.iter().enumerate() {
        if !names.contains(label) {
            errors.push(format!("automaton.labels[{q}]: unknown proposition `{label}`"));
        }
    }
    if !names.contains(&raw.automaton.final_proposition) {
        errors.push(format!(
            "automaton.final_proposition: unknown proposition `{}`",
            raw.automaton.final_proposition
        ));
    }

    if errors.is_empty() {
        check_pieces(&mut errors, &state_space, &pieces);
        if raw.default_proposition.is_none() {
            check_label_coverage(&mut errors, &state_space, &propositions);
        }
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    if !raw.automaton.has_reachable_final() {
        warnings.push(format!(
            "no automaton state labelled `{}` is reachable; no run can win",
            raw.automaton.final_proposition
        ));
    }
    let system = PwlSystem {
        state_space,
        init_set,
        input_space,
        pieces,
        propositions,
        default_proposition: raw.default_proposition,
        cost: cost.expect("checked above"),
    };
    Ok(Problem {
        name: raw.name,
        system,
        automaton: raw.automaton,
        x0: raw.x0,
        config: SynthesisConfig {
            epsilon0,
            input_cells: raw.input_cells,
            refine_inputs: raw.refine_inputs,
            max_iterations: raw.max_iterations,
            max_steps: raw.max_steps,
        },
        warnings,
    })
}

fn parse_width(w: &RawWidth) -> std::result::Result<Rational, String> {
    let r = match w {
        RawWidth::Text(s) => parse_rational(s).map_err(|e| e.to_string())?,
        RawWidth::Number(x) => rational_from_f64(*x).map_err(|e| e.to_string())?,
    };
    if r <= Rational::from_integer(0) {
        return Err(format!("width {r} must be positive"));
    }
    Ok(r)
}

fn parse_epsilon(raw: &RawEpsilon, n: usize) -> std::result::Result<Vec<Rational>, String> {
    match raw {
        RawEpsilon::Uniform(w) => Ok(vec![parse_width(w)?; n]),
        RawEpsilon::PerAxis(ws) if ws.len() == n => ws.iter().map(parse_width).collect(),
        RawEpsilon::PerAxis(ws) => Err(format!("{} widths for {n} axes", ws.len())),
    }
}

/// Deterministic probe points: a lattice over the box plus seeded uniform draws.
fn probe_points(domain: &AxisBox) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let per_axis = ((4096f64).powf(1.0 / n as f64).floor() as usize).clamp(2, 64);
    let total = per_axis.pow(n as u32);
    let mut points = Vec::with_capacity(total + 1000);
    for k in 0..total {
        let mut rest = k;
        let x = (0..n)
            .map(|i| {
                let j = rest % per_axis;
                rest /= per_axis;
                domain.lower[i] + (domain.upper[i] - domain.lower[i]) * j as f64 / (per_axis - 1) as f64
            })
            .collect();
        points.push(x);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..1000 {
        points.push(crate::abstraction::sample_box(&mut rng, domain));
    }
    points
}

/// Piece interiors must be disjoint inside X and the pieces must cover X.
fn check_pieces(errors: &mut Vec<String>, domain: &AxisBox, pieces: &[Piece]) {
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            match interiors_meet(domain, &pieces[i].region, &pieces[j].region) {
                Ok(true) => errors.push(format!(
                    "pieces `{}` and `{}` have overlapping interiors",
                    pieces[i].name, pieces[j].name
                )),
                Ok(false) => {}
                Err(e) => errors.push(format!("pieces `{}` and `{}`: {e}", pieces[i].name, pieces[j].name)),
            }
        }
    }
    if let Some(x) = probe_points(domain)
        .into_iter()
        .find(|x| !pieces.iter().any(|p| p.region.contains(x, 1e-9)))
    {
        errors.push(format!("pieces do not cover the state space near {x:?}"));
    }
}

/// Whether `a ∩ b ∩ domain` has an interior point, via the largest uniform
/// slack `t` that fits in every constraint.
fn interiors_meet(domain: &AxisBox, a: &Polyhedron, b: &Polyhedron) -> Result<bool> {
    let n = domain.dim();
    let mut lifted = Polyhedron::universe(n + 1);
    for h in domain
        .to_polyhedron()
        .constraints()
        .iter()
        .chain(a.constraints())
        .chain(b.constraints())
    {
        let scale = h.normal.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            continue;
        }
        let mut normal = h.normal.clone();
        normal.push(scale);
        lifted.push(Halfspace::new(normal, h.offset));
    }
    let mut cap = vec![0.0; n + 1];
    cap[n] = 1.0;
    lifted.push(Halfspace::new(cap.clone(), 1.0));
    match lp_maximize(&cap, &lifted) {
        Ok(sol) => Ok(sol.value > 1e-9),
        Err(Error::Infeasible) => Ok(false),
        Err(e) => Err(e),
    }
}

fn check_label_coverage(errors: &mut Vec<String>, domain: &AxisBox, propositions: &[Proposition]) {
    if let Some(x) = probe_points(domain)
        .into_iter()
        .find(|x| !propositions.iter().any(|p| p.regions.iter().any(|r| r.closure_contains(x, 1e-9))))
    {
        errors.push(format!(
            "propositions do not cover the state space near {x:?} and there is no default_proposition"
        ));
    }
}

/// Machine-readable result of a `synthesize` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub problem: String,
    pub seed: u64,
    pub reports: Vec<RefinementReport>,
}

impl RunOutput {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| json_error("report", &e))
    }

    /// Per-iteration phase timings, kept apart from the deterministic report.
    pub fn timings_json(&self) -> String {
        let timings: Vec<PhaseTimings> = self.reports.iter().map(|r| r.timings).collect();
        let mut text = serde_json::to_string_pretty(&timings).expect("timings serialize");
        text.push('\n');
        text
    }
}

/// Writes `step,x1..xn,u1..up,stage_cost`; the last row carries the final
/// state with empty input and cost fields.
pub fn write_trajectory_csv<W: Write>(writer: W, trajectory: &Trajectory) -> Result<()> {
    let n = trajectory.states[0].len();
    let p = trajectory.inputs.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["step".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=p).map(|i| format!("u{i}")));
    header.push("stage_cost".into());
    w.write_record(&header)?;
    for (t, x) in trajectory.states.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(x.iter().map(f64::to_string));
        match trajectory.inputs.get(t) {
            Some(u) => {
                row.extend(u.iter().map(f64::to_string));
                row.push(trajectory.stage_costs[t].to_string());
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), p + 1));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns of a trajectory table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub stage_costs: Vec<f64>,
}

pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<TrajectoryTable> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    let p = header.iter().filter(|h| h.starts_with('u')).count();
    if header.len() != n + p + 2 || header.get(0) != Some("step") || header.get(n + p + 1) != Some("stage_cost") {
        return Err(Error::Parse {
            location: "trajectory header".into(),
            message: "expected step,x1..xn,u1..up,stage_cost".into(),
        });
    }
    let mut table = TrajectoryTable {
        states: Vec::new(),
        inputs: Vec::new(),
        stage_costs: Vec::new(),
    };
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let field = |k: usize| -> Result<Option<f64>> {
            let text = record.get(k).unwrap_or("");
            if text.is_empty() {
                return Ok(None);
            }
            text.parse().map(Some).map_err(|_| Error::Parse {
                location: format!("trajectory row {}", line + 2),
                message: format!("`{text}` is not a number"),
            })
        };
        let x = (1..=n)
            .map(|k| field(k)?.ok_or_else(|| missing(line)))
            .collect::<Result<Vec<f64>>>()?;
        table.states.push(x);
        let u: Vec<Option<f64>> = (n + 1..=n + p).map(field).collect::<Result<_>>()?;
        if u.iter().all(Option::is_some) && p > 0 {
            table.inputs.push(u.into_iter().flatten().collect());
            table.stage_costs.push(field(n + p + 1)?.ok_or_else(|| missing(line))?);
        }
    }
    Ok(table)
}

fn missing(line: usize) -> Error {
    Error::Parse {
        location: format!("trajectory row {}", line + 2),
        message: "missing value".into(),
    }
}

/// A finite game for the `solve` command: either a reachability target set
/// or an automaton to take the product with.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub system: FiniteWts,
    #[serde(default)]
    pub automaton: Option<PropertyAutomaton>,
    #[serde(default)]
    pub final_states: Vec<StateId>,
    #[serde(default)]
    pub start: Option<StateId>,
}

/// Reads a game file and returns the game with its start state.
pub fn load_game(path: impl AsRef<Path>) -> Result<(ProductGame, StateId)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let file: GameFile = serde_json::from_str(&text).map_err(|e| json_error(&path.display().to_string(), &e))?;
    game_from_file(file)
}

pub fn game_from_file(file: GameFile) -> Result<(ProductGame, StateId)> {
    match file.automaton {
        Some(aut) => {
            let game = reduce_reach(&file.system, &aut)?;
            let start = match file.start {
                Some(s) => aut
                    .init
                    .iter()
                    .find_map(|&q| game.product_state(s, q))
                    .ok_or_else(|| Error::LabelMismatch(format!("start state {s} pairs with no initial automaton state")))?,
                None => game.init_states()[0],
            };
            Ok((game, start))
        }
        None => {
            let n = file.system.num_states();
            if let Some(bad) = file.final_states.iter().find(|&&s| s >= n) {
                return Err(Error::Dimension(format!("final state {bad} out of range")));
            }
            let start = file
                .start
                .or_else(|| file.system.init_states().first().copied())
                .ok_or_else(|| Error::Dimension("game has no start state".into()))?;
            let mask = (0..n).map(|s| file.final_states.contains(&s)).collect();
            Ok((ProductGame::reachability(file.system, mask)?, start))
        }
    }
}

/// One grid cell of an abstraction dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub state: StateId,
    pub index: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub label: String,
}

/// JSON form of an abstraction for the `abstract` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbstractionDump {
    pub epsilon: Vec<String>,
    pub state_cells: Vec<usize>,
    pub input_cells: Vec<usize>,
    pub initial_state: StateId,
    pub sink: StateId,
    pub cells: Vec<CellRecord>,
    pub inputs: Vec<AxisBox>,
    pub system: FiniteWts,
}

impl AbstractionDump {
    pub fn new(abs: &AbstractionResult) -> Self {
        let cells = (0..abs.num_cells())
            .map(|s| {
                let cell = abs.cell(s);
                CellRecord {
                    state: s,
                    index: abs.state_lattice.unflat(s),
                    lower: cell.lower,
                    upper: cell.upper,
                    label: abs.wts.label(s).to_string(),
                }
            })
            .collect();
        Self {
            epsilon: abs.epsilon().iter().map(|r| r.to_string()).collect(),
            state_cells: abs.state_lattice.counts(),
            input_cells: abs.input_lattice.counts(),
            initial_state: abs.initial_state,
            sink: abs.sink,
            cells,
            inputs: (0..abs.input_lattice.len()).map(|v| abs.input_cell(v)).collect(),
            system: abs.wts.clone(),
        }
    }
}
