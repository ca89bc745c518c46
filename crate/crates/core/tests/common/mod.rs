//! Generators and oracles shared by the integration tests.
#![allow(dead_code)]

use optcar::{
    AffineMap, AxisBox, ConvexPwlFunction, FiniteWts, Halfspace, Piece, Polyhedron, ProductGame, PropertyAutomaton,
    Proposition, PwlSystem, Rational, Transition,
};
use optcar::geometry::PwlPiece;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn problem_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name)
}

/// A random reachability problem on `[-1,1]^n`.
pub struct RandomProblem {
    pub system: PwlSystem,
    pub automaton: PropertyAutomaton,
    pub x0: Vec<f64>,
    pub epsilon0: Vec<Rational>,
    pub input_cells: Vec<usize>,
}

/// Systems alternate between one and two dimensions; odd indices switch
/// dynamics across `x1 = 0`. The goal `[-1/4,1/4]^n` is aligned with the
/// initial grid of width 1/4 and every halving of it.
pub fn random_problem(index: u64) -> RandomProblem {
    let mut rng = rng(0xC0FFEE ^ index);
    let n = 1 + (index % 2) as usize;
    let lower = vec![-1.0; n];
    let upper = vec![1.0; n];
    let state_space = AxisBox::closed(lower.clone(), upper.clone());
    let random_map = |rng: &mut ChaCha8Rng| {
        let a = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect())
            .collect();
        let b = (0..n).map(|_| vec![rng.gen_range(-0.5..0.5)]).collect();
        AffineMap::new(a, b).unwrap()
    };
    let pieces = if index % 4 < 2 {
        vec![Piece {
            name: "only".into(),
            map: random_map(&mut rng),
            region: Polyhedron::universe(n),
        }]
    } else {
        let mut left_upper = upper.clone();
        left_upper[0] = 0.0;
        let mut right_lower = lower.clone();
        right_lower[0] = 0.0;
        vec![
            Piece {
                name: "left".into(),
                map: random_map(&mut rng),
                region: AxisBox::closed(lower.clone(), left_upper).to_polyhedron(),
            },
            Piece {
                name: "right".into(),
                map: random_map(&mut rng),
                region: AxisBox::closed(right_lower, upper.clone()).to_polyhedron(),
            },
        ]
    };
    let piece = |input: f64, x1: f64| {
        let mut state = vec![0.0; n];
        state[0] = x1;
        PwlPiece {
            state,
            input: vec![input],
            constant: 0.1,
        }
    };
    let cost = ConvexPwlFunction::new(vec![piece(1.0, 0.0), piece(-1.0, 0.0), piece(0.0, 0.5), piece(0.0, -0.5)])
        .unwrap();
    let x0 = (0..n)
        .map(|_| {
            let m: f64 = rng.gen_range(0.3..0.95);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    let system = PwlSystem {
        state_space: state_space.clone(),
        init_set: state_space,
        input_space: AxisBox::closed(vec![-1.0], vec![1.0]),
        pieces,
        propositions: vec![Proposition {
            name: "goal".into(),
            regions: vec![AxisBox::closed(vec![-0.25; n], vec![0.25; n])],
        }],
        default_proposition: Some("free".into()),
        cost,
    };
    RandomProblem {
        system,
        automaton: PropertyAutomaton::reach("free", "goal"),
        x0,
        epsilon0: vec![Rational::new(1, 4); n],
        input_cells: vec![4],
    }
}

/// A random finite game: 2..=6 states, 1..=3 inputs, integer weights 0..=9.
pub fn random_game(rng: &mut ChaCha8Rng) -> (ProductGame, usize) {
    let n = rng.gen_range(2..=6);
    let m = rng.gen_range(1..=3);
    let mut transitions = Vec::new();
    for from in 0..n {
        for input in 0..m {
            if !rng.gen_bool(0.7) {
                continue;
            }
            let mut targets: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..n)).collect();
            targets.sort_unstable();
            targets.dedup();
            for to in targets {
                transitions.push(Transition {
                    from,
                    input,
                    to,
                    weight: rng.gen_range(0..=9) as f64,
                });
            }
        }
    }
    let finals: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
    let wts = FiniteWts::new(n, m, vec!["p".into()], vec![0; n], vec![0], transitions, None).unwrap();
    (ProductGame::reachability(wts, finals).unwrap(), 0)
}

/// A random bounded LP in `d` dimensions: random halfspaces plus the box
/// `[-5,5]^d`. Some instances are infeasible.
pub fn random_lp(rng: &mut ChaCha8Rng) -> (Vec<f64>, Polyhedron) {
    let d = rng.gen_range(1..=4);
    let mut poly = AxisBox::closed(vec![-5.0; d], vec![5.0; d]).to_polyhedron();
    for _ in 0..rng.gen_range(1..=6) {
        let normal: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        poly.push(Halfspace::new(normal, rng.gen_range(-1.0..2.0)));
    }
    let objective = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (objective, poly)
}

/// Maximum of a linear objective over a bounded polyhedron by enumerating
/// all vertices; `None` when there is no vertex, i.e. the set is empty.
pub fn vertex_oracle(objective: &[f64], poly: &Polyhedron) -> Option<f64> {
    let d = poly.dim();
    let cons = poly.constraints();
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..d).collect();
    loop {
        if let Some(x) = solve_square(&pick.iter().map(|&i| &cons[i]).collect::<Vec<_>>()) {
            if cons.iter().all(|h| h.value(&x) <= h.offset + 1e-9) {
                let v: f64 = objective.iter().zip(&x).map(|(a, b)| a * b).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        // next d-subset in lexicographic order
        let mut i = d;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < cons.len() - d + i {
                break;
            }
        }
        pick[i] += 1;
        for j in i + 1..d {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Gaussian elimination with partial pivoting on the active constraints.
fn solve_square(rows: &[&Halfspace]) -> Option<Vec<f64>> {
    let d = rows.len();
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|h| {
            let mut r = h.normal.clone();
            r.push(h.offset);
            r
        })
        .collect();
    for col in 0..d {
        let p = (col..d).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[p][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, p);
        let pivot = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot[col];
                for (c, pv) in row.iter_mut().zip(&pivot).skip(col) {
                    *c -= f * pv;
                }
            }
        }
    }
    Some((0..d).map(|i| m[i][d] / m[i][i]).collect())
}
