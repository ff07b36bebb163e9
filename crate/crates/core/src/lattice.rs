//! Finite trees of prices with exact branch probabilities, and brute-force
//! arbitrage oracles on them.
//!
//! A node is identified by the sequence of values from the root to it, so
//! sibling values must differ. This lets the prefix-keyed stopping rules and
//! weights of the strategy engine address individual nodes.

use std::fmt;
use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::scalar::{parse_scalar, Scalar};
use crate::stopping::{EventPredicate, StoppingRule};
use crate::strategy::{
    report_from_gains, strategy_gain, ArbitrageVerdict, Leg, SimpleStrategy, Tolerances, WeightRule,
};

/// Default cap on enumerated candidates.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

/// Branching description: a value and `(probability, subtree)` children.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpec<T> {
    pub value: T,
    pub branches: Vec<(T, TreeSpec<T>)>,
}

impl<T: Scalar> TreeSpec<T> {
    pub fn leaf(value: T) -> Self {
        Self {
            value,
            branches: Vec::new(),
        }
    }

    pub fn node(value: T, branches: Vec<(T, TreeSpec<T>)>) -> Self {
        Self { value, branches }
    }

    /// Parses `value [p: subtree, p: subtree, ...]`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = TreeParser {
            s: text.as_bytes(),
            pos: 0,
        };
        let tree = p.tree()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.error("trailing input"));
        }
        Ok(tree)
    }
}

impl<T: Scalar> fmt::Display for TreeSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)?;
        if !self.branches.is_empty() {
            f.write_str(" [")?;
            for (i, (p, child)) in self.branches.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{p}: {child}")?;
            }
            f.write_str("]")?;
        }
        Ok(())
    }
}

struct TreeParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl TreeParser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Validation(format!("tree: {what} at column {}", self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn scalar<T: Scalar>(&mut self) -> Result<T> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && !b"[],: \t\r\n".contains(&self.s[self.pos]) {
            self.pos += 1;
        }
        let tok = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        if tok.is_empty() {
            self.pos = start;
            return Err(self.error("expected a number"));
        }
        parse_scalar(tok).ok_or_else(|| Error::Validation(format!("tree: bad number '{tok}' at column {}", start + 1)))
    }

    fn tree<T: Scalar>(&mut self) -> Result<TreeSpec<T>> {
        let value = self.scalar()?;
        let mut branches = Vec::new();
        if self.eat(b'[') {
            loop {
                let p = self.scalar()?;
                if !self.eat(b':') {
                    return Err(self.error("expected ':'"));
                }
                branches.push((p, self.tree()?));
                if self.eat(b']') {
                    break;
                }
                if !self.eat(b',') {
                    return Err(self.error("expected ',' or ']'"));
                }
            }
        }
        Ok(TreeSpec { value, branches })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub value: T,
    /// Probability of reaching this node from its parent.
    pub prob: T,
    pub depth: usize,
    pub children: Vec<usize>,
    /// Values from the root to this node.
    pub prefix: Vec<T>,
    /// Leaves (paths) below this node, as a range of path indices.
    pub leaves: Range<usize>,
}

impl<T> Node<T> {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A validated tree with its enumerated paths. Node 0 is the root and nodes
/// are stored in depth-first order.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice<T> {
    pub nodes: Vec<Node<T>>,
    pub depth: usize,
    pub paths: Vec<Vec<T>>,
    pub weights: Vec<T>,
    pub spec: TreeSpec<T>,
}

pub fn build_lattice<T: Scalar>(spec: &TreeSpec<T>) -> Result<Lattice<T>> {
    let mut nodes = Vec::new();
    let mut paths = Vec::new();
    let mut weights = Vec::new();
    let mut prefix = Vec::new();
    add_node(
        spec,
        T::one(),
        T::one(),
        0,
        &mut prefix,
        &mut nodes,
        &mut paths,
        &mut weights,
    )?;
    let depth = paths[0].len() - 1;
    if depth == 0 {
        return Err(Error::Validation("tree needs at least one step".into()));
    }
    if let Some(p) = paths.iter().find(|p| p.len() != depth + 1) {
        return Err(Error::Validation(format!(
            "leaves at different depths: {} and {}",
            depth,
            p.len() - 1
        )));
    }
    Ok(Lattice {
        nodes,
        depth,
        paths,
        weights,
        spec: spec.clone(),
    })
}

#[allow(clippy::too_many_arguments)]
fn add_node<T: Scalar>(
    spec: &TreeSpec<T>,
    prob: T,
    reach: T,
    depth: usize,
    prefix: &mut Vec<T>,
    nodes: &mut Vec<Node<T>>,
    paths: &mut Vec<Vec<T>>,
    weights: &mut Vec<T>,
) -> Result<usize> {
    prefix.push(spec.value);
    let idx = nodes.len();
    let first_leaf = paths.len();
    nodes.push(Node {
        value: spec.value,
        prob,
        depth,
        children: Vec::new(),
        prefix: prefix.clone(),
        leaves: first_leaf..first_leaf,
    });
    if spec.branches.is_empty() {
        paths.push(prefix.clone());
        weights.push(reach);
    } else {
        let mut total = T::zero();
        for (i, (p, child)) in spec.branches.iter().enumerate() {
            if *p <= T::zero() || *p > T::one() {
                return Err(Error::Validation(format!(
                    "branch probability {p} outside (0, 1] below node {}",
                    Prefix(prefix)
                )));
            }
            if spec.branches[..i].iter().any(|(_, c)| c.value == child.value) {
                return Err(Error::Validation(format!(
                    "sibling values must differ; {} repeats below node {}",
                    child.value,
                    Prefix(prefix)
                )));
            }
            total = total + *p;
        }
        if (total - T::one()).abs() > T::sum_tolerance() {
            return Err(Error::Validation(format!(
                "branch probabilities below node {} sum to {total}, not 1",
                Prefix(prefix)
            )));
        }
        for (p, child) in &spec.branches {
            let c = add_node(child, *p, reach * *p, depth + 1, prefix, nodes, paths, weights)?;
            nodes[idx].children.push(c);
        }
    }
    nodes[idx].leaves = first_leaf..paths.len();
    prefix.pop();
    Ok(idx)
}

struct Prefix<'a, T>(&'a [T]);

impl<T: Scalar> fmt::Display for Prefix<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

impl<T: Scalar> Lattice<T> {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Paths on the integer grid `0, 1, ..., depth` with leaf weights.
    pub fn to_ensemble(&self) -> Result<PathEnsemble<T>> {
        let grid = TimeGrid::integers(self.depth)?;
        PathEnsemble::from_paths(grid, &self.paths, Some(self.weights.clone()))
    }

    /// Same tree with every value passed through `f`.
    pub fn map_values(&self, f: &dyn Fn(T) -> Result<T>) -> Result<Self> {
        fn walk<T: Scalar>(s: &TreeSpec<T>, f: &dyn Fn(T) -> Result<T>) -> Result<TreeSpec<T>> {
            Ok(TreeSpec {
                value: f(s.value)?,
                branches: s
                    .branches
                    .iter()
                    .map(|(p, c)| Ok((*p, walk(c, f)?)))
                    .collect::<Result<_>>()?,
            })
        }
        build_lattice(&walk(&self.spec, f)?)
    }

    fn internal_nodes(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.nodes.len()).filter(|&i| !self.nodes[i].is_leaf()).collect();
        idx.sort_by_key(|&i| self.nodes[i].depth);
        idx
    }

    /// Node indices from the root to the leaf of path `leaf`.
    fn path_nodes(&self, leaf: usize) -> Vec<usize> {
        let mut out = vec![0];
        let mut cur = 0;
        while !self.nodes[cur].is_leaf() {
            cur = *self.nodes[cur]
                .children
                .iter()
                .find(|&&c| self.nodes[c].leaves.contains(&leaf))
                .expect("leaf below node");
            out.push(cur);
        }
        out
    }
}

/// Result of an exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome<T> {
    pub no_arbitrage: bool,
    /// Strategy whose gains are non-negative on every path and positive on one.
    pub certificate: Option<SimpleStrategy<T>>,
    pub certificate_gains: Option<Vec<T>>,
    /// Candidates examined before stopping.
    pub examined: u128,
    pub statement: String,
}

pub fn default_alphabet<T: Scalar>(shortsale_restricted: bool) -> Vec<T> {
    if shortsale_restricted {
        vec![T::zero(), T::one()]
    } else {
        vec![-T::one(), T::zero(), T::one()]
    }
}

fn strictly_positive<T: Scalar>(gains: impl Iterator<Item = T>) -> bool {
    let mut positive = false;
    for g in gains {
        if g < T::zero() {
            return false;
        }
        positive |= g > T::zero();
    }
    positive
}

/// Every predictable position with values in `alphabet` at every non-leaf
/// node, held over one step at a time. Any simple strategy on the tree is
/// such a position process, so with a rich enough alphabet this covers the
/// whole strategy class.
pub fn enumerate_no_arbitrage<T: Scalar>(
    lattice: &Lattice<T>,
    shortsale_restricted: bool,
    alphabet: &[T],
    budget: u128,
) -> Result<OracleOutcome<T>> {
    search_positions(lattice, shortsale_restricted, alphabet, budget, 1)
}

/// Like [`enumerate_no_arbitrage`], but only accepts positions that trade at
/// two or more distinct times, so any certificate has several legs.
pub fn find_multi_step_arbitrage<T: Scalar>(
    lattice: &Lattice<T>,
    shortsale_restricted: bool,
    alphabet: &[T],
    budget: u128,
) -> Result<OracleOutcome<T>> {
    search_positions(lattice, shortsale_restricted, alphabet, budget, 2)
}

fn search_positions<T: Scalar>(
    lattice: &Lattice<T>,
    shortsale_restricted: bool,
    alphabet: &[T],
    budget: u128,
    min_steps: usize,
) -> Result<OracleOutcome<T>> {
    if alphabet.is_empty() {
        return Err(Error::Argument("empty weight alphabet".into()));
    }
    if shortsale_restricted && alphabet.iter().any(|&a| a < T::zero()) {
        return Err(Error::Argument(
            "negative weight in a shortsale-restricted alphabet".into(),
        ));
    }
    let internal = lattice.internal_nodes();
    let radix = alphabet.len() as u128;
    let needed = (0..internal.len())
        .try_fold(1u128, |acc, _| acc.checked_mul(radix))
        .unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::Budget { needed, budget });
    }
    let slot: Vec<usize> = {
        let mut s = vec![usize::MAX; lattice.nodes.len()];
        for (k, &n) in internal.iter().enumerate() {
            s[n] = k;
        }
        s
    };
    // per path: (position slot, increment) for each step
    let steps: Vec<Vec<(usize, T)>> = (0..lattice.n_paths())
        .map(|leaf| {
            let nodes = lattice.path_nodes(leaf);
            nodes
                .windows(2)
                .map(|w| (slot[w[0]], lattice.nodes[w[1]].value - lattice.nodes[w[0]].value))
                .collect()
        })
        .collect();
    let decode = |mut code: u128| -> Vec<T> {
        (0..internal.len())
            .map(|_| {
                let d = (code % radix) as usize;
                code /= radix;
                alphabet[d]
            })
            .collect()
    };
    let found = (0..u64::try_from(needed).unwrap_or(u64::MAX))
        .into_par_iter()
        .find_first(|&code| {
            let pos = decode(code as u128);
            if min_steps > 1 {
                let mut active = vec![false; lattice.depth];
                for (k, &n) in internal.iter().enumerate() {
                    active[lattice.nodes[n].depth] |= pos[k] != T::zero();
                }
                if active.iter().filter(|&&a| a).count() < min_steps {
                    return false;
                }
            }
            strictly_positive(
                steps
                    .iter()
                    .map(|s| s.iter().fold(T::zero(), |g, &(k, dx)| g + pos[k] * dx)),
            )
        });
    let class = match (shortsale_restricted, min_steps > 1) {
        (true, false) => "long-only",
        (false, false) => "signed",
        (true, true) => "multi-step long-only",
        (false, true) => "multi-step signed",
    };
    let alphabet_text = alphabet.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
    match found {
        None => Ok(OracleOutcome {
            no_arbitrage: true,
            certificate: None,
            certificate_gains: None,
            examined: needed,
            statement: format!(
                "all {needed} {class} position processes with weights in {{{alphabet_text}}} on {} nodes have a losing path or no gain",
                internal.len()
            ),
        }),
        Some(code) => {
            let pos = decode(code as u128);
            let strategy = certificate(lattice, &internal, &pos, shortsale_restricted);
            let ensemble = lattice.to_ensemble()?;
            let gains = strategy_gain(&strategy, &ensemble)?;
            let report = report_from_gains(&gains, &ensemble, Tolerances::exact());
            if report.verdict != ArbitrageVerdict::Arbitrage {
                return Err(Error::Internal(format!("certificate does not re-verify ({})", report.verdict)));
            }
            Ok(OracleOutcome {
                no_arbitrage: false,
                certificate: Some(strategy),
                certificate_gains: Some(gains),
                examined: code as u128 + 1,
                statement: format!("{class} position process #{code} is an arbitrage"),
            })
        }
    }
}

/// One leg per time step, keyed by node prefix; steps with no position are
/// dropped.
fn certificate<T: Scalar>(lattice: &Lattice<T>, internal: &[usize], pos: &[T], restricted: bool) -> SimpleStrategy<T> {
    let mut legs = Vec::new();
    for t in 0..lattice.depth {
        let table: Vec<(Vec<T>, T)> = internal
            .iter()
            .zip(pos)
            .filter(|(&n, &w)| lattice.nodes[n].depth == t && w != T::zero())
            .map(|(&n, &w)| (lattice.nodes[n].prefix.clone(), w))
            .collect();
        if table.is_empty() {
            continue;
        }
        let at = |k: usize| StoppingRule::deterministic(T::from_usize_exact(k));
        legs.push(Leg::new(at(t), at(t + 1), WeightRule::PrefixLookup(table)));
    }
    SimpleStrategy::new(legs, restricted)
}

/// A pair of stopping times and an event on which holding one unit earns a
/// non-negative, somewhere positive, amount.
#[derive(Debug, Clone, PartialEq)]
pub struct PairWitness<T> {
    pub tau0: StoppingRule<T>,
    pub tau1: StoppingRule<T>,
    pub event: EventPredicate<T>,
    pub strategy: SimpleStrategy<T>,
    pub gains: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseOutcome<T> {
    pub no_arbitrage: bool,
    pub witness: Option<PairWitness<T>>,
    /// Stopping-time pairs examined.
    pub examined: u128,
    pub statement: String,
}

/// Stopping times on the subtree of each node, as lists of stop nodes.
struct Cuts {
    by_node: Vec<Vec<Vec<usize>>>,
}

impl Cuts {
    fn new<T: Scalar>(lattice: &Lattice<T>) -> Self {
        let mut by_node = vec![Vec::new(); lattice.nodes.len()];
        for i in (0..lattice.nodes.len()).rev() {
            let mut cuts = vec![vec![i]];
            let children = &lattice.nodes[i].children;
            if !children.is_empty() {
                let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
                for &c in children {
                    let sub: &Vec<Vec<usize>> = &by_node[c];
                    acc = acc
                        .iter()
                        .flat_map(|a| {
                            sub.iter().map(move |s| {
                                let mut v = a.clone();
                                v.extend_from_slice(s);
                                v
                            })
                        })
                        .collect();
                }
                cuts.extend(acc);
            }
            by_node[i] = cuts;
        }
        Self { by_node }
    }
}

/// Number of ordered stopping-time pairs `tau0 <= tau1` on the subtree of `node`.
fn count_pairs<T: Scalar>(lattice: &Lattice<T>, cuts: &Cuts, node: usize) -> u128 {
    let own = cuts.by_node[node].len() as u128;
    let children = &lattice.nodes[node].children;
    if children.is_empty() {
        return own;
    }
    let below = children
        .iter()
        .fold(1u128, |acc, &c| acc.saturating_mul(count_pairs(lattice, cuts, c)));
    own.saturating_add(below)
}

/// Enumerates every pair of stopping times `tau0 <= tau1` and every event
/// in the `tau0` sigma-field, looking for one with
/// `1_A (X_tau1 - X_tau0)` non-negative and somewhere positive.
///
/// Events are unions of `tau0`-atoms. Such a union works only if each atom in
/// it has non-negative gains, and then one of its atoms already works, so
/// each pair is decided by checking its atoms one at a time.
pub fn pairwise_characterization<T: Scalar>(lattice: &Lattice<T>, budget: u128) -> Result<PairwiseOutcome<T>> {
    let cuts = Cuts::new(lattice);
    let needed = count_pairs(lattice, &cuts, 0);
    if needed > budget {
        return Err(Error::Budget { needed, budget });
    }
    let nodes = &lattice.nodes;
    let mut examined = 0u128;
    for tau0 in &cuts.by_node[0] {
        let choices: Vec<&Vec<Vec<usize>>> = tau0.iter().map(|&v| &cuts.by_node[v]).collect();
        let mut counter = vec![0usize; tau0.len()];
        loop {
            examined += 1;
            for (a, &v) in tau0.iter().enumerate() {
                let sub = &choices[a][counter[a]];
                let gains = sub.iter().flat_map(|&u| {
                    let g = nodes[u].value - nodes[v].value;
                    nodes[u].leaves.clone().map(move |_| g)
                });
                if strictly_positive(gains) {
                    let tau1: Vec<usize> = tau0
                        .iter()
                        .enumerate()
                        .flat_map(|(b, _)| choices[b][counter[b]].iter().copied())
                        .collect();
                    let witness = pair_witness(lattice, tau0, &tau1, v)?;
                    return Ok(PairwiseOutcome {
                        no_arbitrage: false,
                        witness: Some(witness),
                        examined,
                        statement: format!(
                            "pair #{examined} is an arbitrage on the atom at node {}",
                            Prefix(&nodes[v].prefix)
                        ),
                    });
                }
            }
            // advance the mixed-radix counter over per-atom exit choices
            let mut k = 0;
            while k < counter.len() {
                counter[k] += 1;
                if counter[k] < choices[k].len() {
                    break;
                }
                counter[k] = 0;
                k += 1;
            }
            if k == counter.len() {
                break;
            }
        }
    }
    Ok(PairwiseOutcome {
        no_arbitrage: true,
        witness: None,
        examined,
        statement: format!("all {examined} stopping-time pairs fail on every event of the entry sigma-field"),
    })
}

fn pair_witness<T: Scalar>(
    lattice: &Lattice<T>,
    tau0: &[usize],
    tau1: &[usize],
    atom: usize,
) -> Result<PairWitness<T>> {
    let cap = T::from_usize_exact(lattice.depth);
    let prefixes = |cut: &[usize]| cut.iter().map(|&n| lattice.nodes[n].prefix.clone()).collect::<Vec<_>>();
    let entry = StoppingRule::prefix_set(prefixes(tau0), cap);
    let exit = StoppingRule::prefix_set(prefixes(tau1), cap);
    let event = EventPredicate::prefix_in(entry.clone(), vec![lattice.nodes[atom].prefix.clone()]);
    let strategy = SimpleStrategy::new(
        vec![Leg::new(
            entry.clone(),
            exit.clone(),
            WeightRule::IndicatorTimes(event.clone(), T::one()),
        )],
        true,
    );
    let ensemble = lattice.to_ensemble()?;
    let gains = strategy_gain(&strategy, &ensemble)?;
    if report_from_gains(&gains, &ensemble, Tolerances::exact()).verdict != ArbitrageVerdict::Arbitrage {
        return Err(Error::Internal("pair witness does not re-verify".into()));
    }
    Ok(PairWitness {
        tau0: entry,
        tau1: exit,
        event,
        strategy,
        gains,
    })
}

/// Shape of randomly generated trees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomTreeParams {
    pub max_depth: usize,
    pub max_branches: usize,
}

impl Default for RandomTreeParams {
    fn default() -> Self {
        Self {
            max_depth: 3,
            max_branches: 3,
        }
    }
}

/// Random tree with half-integer moves. Half of the trees keep at least one
/// child strictly below its parent at every node, which rules out long-only
/// gains; the rest move freely.
pub fn random_tree<T: Scalar, R: Rng + ?Sized>(rng: &mut R, params: RandomTreeParams) -> TreeSpec<T> {
    let depth = rng.random_range(1..=params.max_depth.max(1));
    let falling = rng.random_bool(0.5);
    let root = T::from_i64(rng.random_range(2..=6)).unwrap();
    random_subtree(rng, root, depth, params.max_branches.max(1), falling)
}

fn random_subtree<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    value: T,
    depth: usize,
    max_b: usize,
    falling: bool,
) -> TreeSpec<T> {
    if depth == 0 {
        return TreeSpec::leaf(value);
    }
    let n = rng.random_range(1..=max_b);
    let mut moves: Vec<i64> = (-3..=3).collect();
    // partial shuffle to pick n distinct moves
    for i in 0..n {
        let j = rng.random_range(i..moves.len());
        moves.swap(i, j);
    }
    let mut moves = moves[..n].to_vec();
    if falling && moves.iter().all(|&m| m >= 0) {
        moves[0] = -rng.random_range(1..=3i64);
        if moves[1..].contains(&moves[0]) {
            moves[0] = -4;
        }
    }
    let raw: Vec<i64> = (0..n).map(|_| rng.random_range(1..=4)).collect();
    let total: i64 = raw.iter().sum();
    let half = T::one() / (T::one() + T::one());
    let branches = moves
        .iter()
        .zip(&raw)
        .map(|(&m, &r)| {
            let p = T::from_i64(r).unwrap() / T::from_i64(total).unwrap();
            let child = value + T::from_i64(m).unwrap() * half;
            (p, random_subtree(rng, child, depth - 1, max_b, falling))
        })
        .collect();
    TreeSpec::node(value, branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructive::reduce_to_single_leg;
    use crate::strategy::is_strictly_positive_class;
    use num_rational::Rational64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type Q = Rational64;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    fn tree(text: &str) -> Lattice<Q> {
        build_lattice(&TreeSpec::parse(text).unwrap()).unwrap()
    }

    #[test]
    fn binomial_step() {
        let l = tree("1 [1/2: 2, 1/2: 1/2]");
        assert_eq!(l.n_paths(), 2);
        assert_eq!(l.weights, vec![q(1, 2), q(1, 2)]);
        assert_eq!(l.paths[1], vec![q(1, 1), q(1, 2)]);
        let e = l.to_ensemble().unwrap();
        assert_eq!(e.n_times(), 2);
    }

    #[test]
    fn single_branch_tree() {
        let l = tree("3 [1: 3 [1: 4]]");
        assert_eq!(l.n_paths(), 1);
        assert_eq!(l.weights, vec![q(1, 1)]);
    }

    #[test]
    fn parse_round_trips_and_reports_columns() {
        let t: TreeSpec<Q> = TreeSpec::parse("1 [1/3: 2 [1: 2], 2/3: 0 [1: 1]]").unwrap();
        assert_eq!(TreeSpec::<Q>::parse(&t.to_string()).unwrap(), t);
        let err = TreeSpec::<Q>::parse("1 [1/2 2]").unwrap_err();
        assert!(err.to_string().contains("column"), "{err}");
    }

    #[test]
    fn invalid_trees_are_rejected() {
        for bad in [
            "1 [1/2: 2, 1/3: 0]",
            "1 [0: 2, 1: 0]",
            "1 [1/2: 2, 1/2: 2]",
            "1 [1/2: 2 [1: 3], 1/2: 0]",
            "1",
        ] {
            let spec = TreeSpec::<Q>::parse(bad).unwrap();
            assert!(matches!(build_lattice(&spec), Err(Error::Validation(_))), "{bad}");
        }
    }

    #[test]
    fn tree_reproduces_three_path_example_gains() {
        let l = tree("1 [1/3: 2 [1: 2], 1/3: 0 [1: 1], 1/3: 1 [1: 1]]");
        let e = l.to_ensemble().unwrap();
        let at = |t: i64| StoppingRule::deterministic(q(t, 1));
        let second =
            WeightRule::IndicatorTimes(EventPredicate::prefix_in(at(1), vec![vec![q(1, 1), q(0, 1)]]), q(2, 1));
        let s = SimpleStrategy::new(
            vec![
                Leg::new(at(0), at(1), WeightRule::Constant(q(1, 1))),
                Leg::new(at(1), at(2), second),
            ],
            true,
        );
        assert_eq!(strategy_gain(&s, &e).unwrap(), vec![q(1, 1), q(1, 1), q(0, 1)]);
    }

    #[test]
    fn martingale_binomial_has_no_arbitrage() {
        let l = tree("2 [1/2: 3 [1/2: 4, 1/2: 2], 1/2: 1 [1/2: 2, 1/2: 0]]");
        for restricted in [true, false] {
            let out = enumerate_no_arbitrage(&l, restricted, &default_alphabet(restricted), DEFAULT_BUDGET).unwrap();
            assert!(out.no_arbitrage, "{}", out.statement);
        }
        assert!(pairwise_characterization(&l, DEFAULT_BUDGET).unwrap().no_arbitrage);
    }

    #[test]
    fn increasing_tree_has_long_arbitrage() {
        let l = tree("1 [1/2: 2 [1: 3], 1/2: 3/2 [1: 2]]");
        let out = enumerate_no_arbitrage(&l, true, &default_alphabet(true), DEFAULT_BUDGET).unwrap();
        assert!(!out.no_arbitrage);
        assert!(out.certificate_gains.unwrap().iter().all(|g| *g >= q(0, 1)));
        let pw = pairwise_characterization(&l, DEFAULT_BUDGET).unwrap();
        assert!(!pw.no_arbitrage);
    }

    #[test]
    fn arbitrage_at_an_inner_node_despite_negative_root_drift() {
        // root drifts down, but the up node only rises afterwards
        let l = tree("2 [1/4: 3 [1/2: 4, 1/2: 5], 3/4: 0 [1/2: 1, 1/2: -1]]");
        let out = enumerate_no_arbitrage(&l, true, &default_alphabet(true), DEFAULT_BUDGET).unwrap();
        assert!(!out.no_arbitrage);
        let s = out.certificate.unwrap();
        let pw = pairwise_characterization(&l, DEFAULT_BUDGET).unwrap();
        assert!(!pw.no_arbitrage);
        assert_eq!(s.legs.len(), 1);
    }

    #[test]
    fn budget_refusal_reports_the_count() {
        let l = tree("2 [1/2: 3 [1/2: 4, 1/2: 2], 1/2: 1 [1/2: 2, 1/2: 0]]");
        match enumerate_no_arbitrage(&l, false, &default_alphabet(false), 10) {
            Err(Error::Budget { needed, budget }) => assert_eq!((needed, budget), (27, 10)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(pairwise_characterization(&l, 2), Err(Error::Budget { .. })));
        assert!(enumerate_no_arbitrage(&l, true, &[q(-1, 1)], 100).is_err());
    }

    #[test]
    fn pair_counts_match_the_recursion() {
        // full binary depth 2: cuts 1 + 2^2 = 5 at the root, pairs 5 + 3^2 = 14
        let l = tree("0 [1/2: 1 [1/2: 2, 1/2: 0], 1/2: -1 [1/2: 0, 1/2: -2]]");
        let cuts = Cuts::new(&l);
        assert_eq!(cuts.by_node[0].len(), 5);
        assert_eq!(count_pairs(&l, &cuts, 0), 14);
        assert_eq!(pairwise_characterization(&l, DEFAULT_BUDGET).unwrap().examined, 14);
    }

    #[test]
    fn oracles_agree_on_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 3];
        for _ in 0..40 {
            let spec: TreeSpec<Q> = random_tree(&mut rng, RandomTreeParams::default());
            let l = build_lattice(&spec).unwrap();
            let full = enumerate_no_arbitrage(&l, true, &default_alphabet(true), DEFAULT_BUDGET).unwrap();
            let pair = pairwise_characterization(&l, DEFAULT_BUDGET).unwrap();
            assert_eq!(full.no_arbitrage, pair.no_arbitrage, "{spec}");
            counts[usize::from(full.no_arbitrage)] += 1;
            let multi = find_multi_step_arbitrage(&l, true, &default_alphabet(true), DEFAULT_BUDGET).unwrap();
            if let Some(cert) = multi.certificate {
                assert!(cert.legs.len() >= 2);
                let r = reduce_to_single_leg(&l.to_ensemble().unwrap(), &cert).unwrap();
                assert!(is_strictly_positive_class(&r.gains, &l.weights, q(0, 1)));
                counts[2] += 1;
            }
        }
        // both outcomes and some multi-leg certificates occur
        assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
    }
}
