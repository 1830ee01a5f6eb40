//! Measurement decision trees and their s-expression encoding.
//!
//! A tree describes one cycle: idle, measure an ancilla, and branch on the
//! outcome. Leaves either end the cycle or measure the remaining ancilla
//! immediately so that every ancilla is reset before the next cycle.

use crate::action::Axis;
use crate::error::{QffError, Result};
use num_bigint::BigUint;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub enum Tree {
    /// Idle for `idle`, measure `qubit` along `axis`, continue with
    /// `children[outcome]`.
    Measure { idle: f64, qubit: usize, axis: Axis, children: Box<[Tree; 2]> },
    /// Measure `qubit` immediately and end the cycle.
    Terminate { qubit: usize, axis: Axis },
    /// Idle for `idle`, discard the ancillas and end the cycle.
    Wait { idle: f64 },
    End,
}

pub const MEASUREMENT_AXES: [Axis; 2] = [Axis::X, Axis::Y];

impl Tree {
    pub fn measure(idle: f64, qubit: usize, axis: Axis, c0: Tree, c1: Tree) -> Tree {
        Tree::Measure { idle, qubit, axis, children: Box::new([c0, c1]) }
    }

    /// Maximum number of idle periods along any path.
    pub fn depth(&self) -> usize {
        match self {
            Tree::Measure { children, .. } => 1 + children[0].depth().max(children[1].depth()),
            Tree::Wait { .. } => 1,
            _ => 0,
        }
    }

    /// Image under complex conjugation: outcomes of every y measurement swap.
    pub fn mirror(&self) -> Tree {
        match self {
            Tree::Measure { idle, qubit, axis, children } => {
                let [a, b] = [children[0].mirror(), children[1].mirror()];
                let (c0, c1) = if *axis == Axis::Y { (b, a) } else { (a, b) };
                Tree::measure(*idle, *qubit, *axis, c0, c1)
            }
            t => t.clone(),
        }
    }

    /// Exchange two qubit labels throughout.
    pub fn swap_qubits(&self, a: usize, b: usize) -> Tree {
        let s = |q: usize| if q == a { b } else if q == b { a } else { q };
        match self {
            Tree::Measure { idle, qubit, axis, children } => {
                Tree::measure(*idle, s(*qubit), *axis, children[0].swap_qubits(a, b), children[1].swap_qubits(a, b))
            }
            Tree::Terminate { qubit, axis } => Tree::Terminate { qubit: s(*qubit), axis: *axis },
            t => t.clone(),
        }
    }

    /// Idle durations in pre-order.
    pub fn idles(&self) -> Vec<f64> {
        match self {
            Tree::Measure { idle, children, .. } => {
                let mut out = vec![*idle];
                out.extend(children[0].idles());
                out.extend(children[1].idles());
                out
            }
            Tree::Wait { idle } => vec![*idle],
            _ => Vec::new(),
        }
    }

    /// Replace idle durations in pre-order.
    pub fn with_idles(&self, idles: &[f64]) -> Tree {
        let mut t = self.clone();
        let mut it = idles.iter();
        t.visit_idles(&mut |slot| *slot = *it.next().expect("idle count mismatch"));
        t
    }

    fn visit_idles(&mut self, f: &mut dyn FnMut(&mut f64)) {
        match self {
            Tree::Measure { idle, children, .. } => {
                f(idle);
                children[0].visit_idles(f);
                children[1].visit_idles(f);
            }
            Tree::Wait { idle } => f(idle),
            _ => {}
        }
    }

    /// Structure with idle durations erased; identifies a strategy family.
    pub fn shape(&self) -> String {
        match self {
            Tree::Measure { qubit, axis, children, .. } => {
                format!("(m {qubit} {} {} {})", axis.name(), children[0].shape(), children[1].shape())
            }
            Tree::Wait { .. } => "(w)".into(),
            t => t.to_string(),
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Measure { idle, qubit, axis, children } => {
                write!(f, "(m {idle} {qubit} {} {} {})", axis.name(), children[0], children[1])
            }
            Tree::Terminate { qubit, axis } => write!(f, "(t {qubit} {})", axis.name()),
            Tree::Wait { idle } => write!(f, "(w {idle})"),
            Tree::End => write!(f, "end"),
        }
    }
}

impl FromStr for Tree {
    type Err = QffError;

    fn from_str(s: &str) -> Result<Tree> {
        let spaced = s.replace('(', " ( ").replace(')', " ) ");
        let tokens: Vec<&str> = spaced.split_whitespace().collect();
        let mut pos = 0;
        let tree = parse(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(bad(format!("trailing input after token {pos}")));
        }
        Ok(tree)
    }
}

fn bad(msg: String) -> QffError {
    QffError::InvalidParameter(format!("strategy tree: {msg}"))
}

fn next<'a>(tokens: &[&'a str], pos: &mut usize) -> Result<&'a str> {
    let t = tokens.get(*pos).ok_or_else(|| bad("unexpected end of input".into()))?;
    *pos += 1;
    Ok(t)
}

fn parse(tokens: &[&str], pos: &mut usize) -> Result<Tree> {
    let head = next(tokens, pos)?;
    if head == "end" {
        return Ok(Tree::End);
    }
    if head != "(" {
        return Err(bad(format!("unexpected token '{head}'")));
    }
    let num = |t: &str| t.parse::<f64>().map_err(|_| bad(format!("bad number '{t}'")));
    let qubit = |t: &str| t.parse::<usize>().map_err(|_| bad(format!("bad qubit '{t}'")));
    let axis = |t: &str| match t {
        "x" => Ok(Axis::X),
        "y" => Ok(Axis::Y),
        "z" => Ok(Axis::Z),
        _ => Err(bad(format!("bad axis '{t}'"))),
    };
    let tree = match next(tokens, pos)? {
        "m" => {
            let idle = num(next(tokens, pos)?)?;
            let q = qubit(next(tokens, pos)?)?;
            let a = axis(next(tokens, pos)?)?;
            let c0 = parse(tokens, pos)?;
            let c1 = parse(tokens, pos)?;
            Tree::measure(idle, q, a, c0, c1)
        }
        "t" => {
            let q = qubit(next(tokens, pos)?)?;
            Tree::Terminate { qubit: q, axis: axis(next(tokens, pos)?)? }
        }
        "w" => Tree::Wait { idle: num(next(tokens, pos)?)? },
        other => return Err(bad(format!("unknown node '{other}'"))),
    };
    match next(tokens, pos)? {
        ")" => Ok(tree),
        t => Err(bad(format!("expected ')', found '{t}'"))),
    }
}

/// Number of trees of depth at most `depth` over `grid_len` idle values and
/// `ancillas` measurable qubits (two axes each).
///
/// With two ancillas: `N_1 = 16 n` and `N_{d+1} = 4 n (N_d + 2)^2`.
pub fn strategy_count(depth: usize, grid_len: usize, ancillas: usize) -> BigUint {
    let n = BigUint::from(grid_len);
    let m = BigUint::from(2 * ancillas);
    let t = BigUint::from(terminator_count(ancillas));
    let mut count = BigUint::from(0u32);
    for _ in 0..depth {
        let c = &count + &t;
        count = &n * &m * &c * &c;
    }
    count
}

/// Count when the first measurement is fixed and its second subtree mirrors
/// the first: `n (N_d + t)`.
pub fn fixed_first_count(depth: usize, grid_len: usize, ancillas: usize) -> BigUint {
    BigUint::from(grid_len) * (strategy_count(depth, grid_len, ancillas) + BigUint::from(terminator_count(ancillas)))
}

pub(crate) fn terminator_count(ancillas: usize) -> usize {
    if ancillas <= 1 { 1 } else { 2 * (ancillas - 1) }
}

/// Leaves that close a cycle after measuring `last`.
pub(crate) fn terminators(ancillas: &[usize], last: usize) -> Vec<Tree> {
    let others: Vec<Tree> = ancillas
        .iter()
        .filter(|&&q| q != last)
        .flat_map(|&q| MEASUREMENT_AXES.map(|axis| Tree::Terminate { qubit: q, axis }))
        .collect();
    if others.is_empty() { vec![Tree::End] } else { others }
}

/// Terminators followed by every tree of depth `1..=r`, in enumeration order.
fn options(ancillas: &[usize], grid: &[f64], last: usize, r: usize) -> Vec<Tree> {
    let mut out = terminators(ancillas, last);
    if r > 0 {
        out.extend(nodes(ancillas, grid, r));
    }
    out
}

fn nodes(ancillas: &[usize], grid: &[f64], r: usize) -> Vec<Tree> {
    let mut out = Vec::new();
    for &idle in grid {
        for &q in ancillas {
            let opts = options(ancillas, grid, q, r - 1);
            for axis in MEASUREMENT_AXES {
                for c0 in &opts {
                    for c1 in &opts {
                        out.push(Tree::measure(idle, q, axis, c0.clone(), c1.clone()));
                    }
                }
            }
        }
    }
    out
}

/// Deepest supported search.
pub const MAX_DEPTH: usize = 3;

/// Stream every tree of depth `1..=depth` whose root is a measurement.
///
/// Order: idle value, ancilla, axis, first child, second child, with
/// children listed as terminators first and then deeper trees. With
/// `fixed_first = Some(q)` the root measures `q` along y and the second
/// subtree is the mirror image of the first, which then ranges over depth
/// `1..=depth`.
pub fn enumerate_strategies(
    depth: usize,
    grid: &[f64],
    ancillas: &[usize],
    fixed_first: Option<usize>,
) -> Result<Box<dyn Iterator<Item = Tree> + Send>> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(QffError::InvalidParameter(format!("search depth must be in 1..={MAX_DEPTH}, got {depth}")));
    }
    if grid.is_empty() || ancillas.is_empty() {
        return Err(QffError::InvalidParameter("idle grid and ancilla list must be nonempty".into()));
    }
    let ancillas = ancillas.to_vec();
    let grid = grid.to_vec();
    if let Some(q) = fixed_first {
        if !ancillas.contains(&q) {
            return Err(QffError::InvalidParameter(format!("qubit {q} is not an ancilla")));
        }
        let opts = Arc::new(options(&ancillas, &grid, q, depth));
        return Ok(Box::new(grid.into_iter().flat_map(move |idle| {
            let opts = opts.clone();
            (0..opts.len()).map(move |i| Tree::measure(idle, q, Axis::Y, opts[i].clone(), opts[i].mirror()))
        })));
    }
    let per_q: Vec<(usize, Arc<Vec<Tree>>)> =
        ancillas.iter().map(|&q| (q, Arc::new(options(&ancillas, &grid, q, depth - 1)))).collect();
    Ok(Box::new(grid.into_iter().flat_map(move |idle| {
        per_q.clone().into_iter().flat_map(move |(q, opts)| {
            MEASUREMENT_AXES.into_iter().flat_map(move |axis| {
                let opts = opts.clone();
                let len = opts.len();
                (0..len * len).map(move |k| Tree::measure(idle, q, axis, opts[k / len].clone(), opts[k % len].clone()))
            })
        })
    })))
}
