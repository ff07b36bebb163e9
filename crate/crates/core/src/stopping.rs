//! Bounded stopping times and adapted events on discretized paths.
//!
//! Every rule is resolved by scanning the path forward and only ever reads
//! values up to the index it returns, so adaptedness holds by construction.
//! [`StoppingRule::resolve_within`] makes this explicit: given a prefix limit
//! it either reports the stopping index (reading nothing past the limit) or
//! says the rule has not stopped yet.
//!
//! Hitting conditions are checked at grid points only; a path that crosses a
//! level between two grid points is seen at the next grid point.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule<T> {
    pub kind: RuleKind<T>,
    /// Upper bound on the resolved time.
    pub cap: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind<T> {
    /// First grid time `>= t`.
    Deterministic(T),
    /// First grid time with `X >= level`.
    HitAbove(T),
    /// First grid time with `X <= level`.
    HitBelow(T),
    /// First grid time `t >= base` with `X_t - X_base < -epsilon`.
    FirstDrop { base: Box<StoppingRule<T>>, epsilon: T },
    /// First grid time `t >= base` with `X_t > level`.
    FirstAbove { base: Box<StoppingRule<T>>, level: T },
    /// `base` on the event, `max(fallback, base)` off it. The event must be
    /// decided by the time `base` resolves.
    Restricted {
        base: Box<StoppingRule<T>>,
        event: Box<EventPredicate<T>>,
        fallback: T,
    },
    /// Minimum of two rules.
    Earliest(Box<StoppingRule<T>>, Box<StoppingRule<T>>),
    /// First index whose path prefix `X_0..=X_i` is listed.
    PrefixSet(Vec<Vec<T>>),
}

impl<T: Scalar> StoppingRule<T> {
    pub fn deterministic(t: T) -> Self {
        Self {
            kind: RuleKind::Deterministic(t),
            cap: t,
        }
    }

    pub fn hit_above(level: T, cap: T) -> Self {
        Self {
            kind: RuleKind::HitAbove(level),
            cap,
        }
    }

    pub fn hit_below(level: T, cap: T) -> Self {
        Self {
            kind: RuleKind::HitBelow(level),
            cap,
        }
    }

    pub fn first_drop(base: Self, epsilon: T, cap: T) -> Self {
        Self {
            kind: RuleKind::FirstDrop {
                base: Box::new(base),
                epsilon,
            },
            cap,
        }
    }

    pub fn first_above(base: Self, level: T, cap: T) -> Self {
        Self {
            kind: RuleKind::FirstAbove {
                base: Box::new(base),
                level,
            },
            cap,
        }
    }

    pub fn restricted(base: Self, event: EventPredicate<T>, fallback: T) -> Self {
        let cap = base.cap.max_of(fallback);
        Self {
            kind: RuleKind::Restricted {
                base: Box::new(base),
                event: Box::new(event),
                fallback,
            },
            cap,
        }
    }

    pub fn earliest(a: Self, b: Self) -> Self {
        let cap = a.cap.min_of(b.cap);
        Self {
            kind: RuleKind::Earliest(Box::new(a), Box::new(b)),
            cap,
        }
    }

    pub fn prefix_set(prefixes: Vec<Vec<T>>, cap: T) -> Self {
        Self {
            kind: RuleKind::PrefixSet(prefixes),
            cap,
        }
    }

    pub fn with_cap(mut self, cap: T) -> Self {
        self.cap = cap;
        self
    }

    /// Resolved grid index on a full path.
    pub fn resolve(&self, path: &[T], grid: &TimeGrid<T>) -> Result<usize> {
        debug_assert_eq!(path.len(), grid.len());
        self.resolve_within(path, grid, grid.last_index())?
            .ok_or_else(|| Error::Internal("bounded rule failed to resolve".into()))
    }

    /// Resolution reading only `path[..=limit]`: `Some(i)` with `i <= limit`
    /// if the rule has stopped by `limit`, `None` otherwise.
    pub fn resolve_within(&self, path: &[T], grid: &TimeGrid<T>, limit: usize) -> Result<Option<usize>> {
        let cap_idx = grid.index_at_or_before(self.cap)?;
        let lim = limit.min(cap_idx);
        let at_cap = || (cap_idx <= limit).then_some(cap_idx);
        let found = match &self.kind {
            RuleKind::Deterministic(t) => {
                let i = grid.index_at_or_after(*t)?.min(cap_idx);
                (i <= limit).then_some(i)
            }
            RuleKind::HitAbove(level) => scan(path, 0, lim, |x| x >= *level).or_else(at_cap),
            RuleKind::HitBelow(level) => scan(path, 0, lim, |x| x <= *level).or_else(at_cap),
            RuleKind::FirstDrop { base, epsilon } => match base.resolve_within(path, grid, lim)? {
                Some(b) => {
                    let start = path[b];
                    scan(path, b, lim, |x| x - start < -*epsilon).or_else(at_cap)
                }
                None => at_cap(),
            },
            RuleKind::FirstAbove { base, level } => match base.resolve_within(path, grid, lim)? {
                Some(b) => scan(path, b, lim, |x| x > *level).or_else(at_cap),
                None => at_cap(),
            },
            RuleKind::Restricted { base, event, fallback } => match base.resolve_within(path, grid, lim)? {
                Some(b) => match event.evaluate_within(path, grid, b)? {
                    Some(true) => Some(b),
                    Some(false) => {
                        let f = grid.index_at_or_after(*fallback)?.max(b).min(cap_idx);
                        (f <= limit).then_some(f)
                    }
                    None => {
                        return Err(Error::Argument(format!(
                            "event {event} is not decided when its base rule {base} stops"
                        )))
                    }
                },
                None => at_cap(),
            },
            RuleKind::Earliest(a, b) => {
                let ra = a.resolve_within(path, grid, lim)?;
                let rb = b.resolve_within(path, grid, lim)?;
                match (ra, rb) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (Some(x), None) | (None, Some(x)) => Some(x),
                    (None, None) => at_cap(),
                }
            }
            RuleKind::PrefixSet(prefixes) => (0..=lim)
                .find(|&i| prefixes.iter().any(|p| p.as_slice() == &path[..=i]))
                .or_else(at_cap),
        };
        Ok(found.map(|i| i.min(cap_idx)))
    }

    /// Rewrites price levels through `level` and drop sizes through `eps`;
    /// times are untouched.
    pub fn map_levels(&self, level: &dyn Fn(T) -> Result<T>, eps: &dyn Fn(T) -> Result<T>) -> Result<Self> {
        let kind = match &self.kind {
            RuleKind::Deterministic(t) => RuleKind::Deterministic(*t),
            RuleKind::HitAbove(l) => RuleKind::HitAbove(level(*l)?),
            RuleKind::HitBelow(l) => RuleKind::HitBelow(level(*l)?),
            RuleKind::FirstDrop { base, epsilon } => RuleKind::FirstDrop {
                base: Box::new(base.map_levels(level, eps)?),
                epsilon: eps(*epsilon)?,
            },
            RuleKind::FirstAbove { base, level: l } => RuleKind::FirstAbove {
                base: Box::new(base.map_levels(level, eps)?),
                level: level(*l)?,
            },
            RuleKind::Restricted { base, event, fallback } => RuleKind::Restricted {
                base: Box::new(base.map_levels(level, eps)?),
                event: Box::new(event.map_levels(level, eps)?),
                fallback: *fallback,
            },
            RuleKind::Earliest(a, b) => {
                RuleKind::Earliest(Box::new(a.map_levels(level, eps)?), Box::new(b.map_levels(level, eps)?))
            }
            RuleKind::PrefixSet(ps) => RuleKind::PrefixSet(map_prefixes(ps, level)?),
        };
        Ok(Self { kind, cap: self.cap })
    }
}

fn scan<T: Scalar>(path: &[T], from: usize, to: usize, pred: impl Fn(T) -> bool) -> Option<usize> {
    (from..=to).find(|&i| pred(path[i]))
}

fn map_prefixes<T: Scalar>(ps: &[Vec<T>], level: &dyn Fn(T) -> Result<T>) -> Result<Vec<Vec<T>>> {
    ps.iter().map(|p| p.iter().map(|&v| level(v)).collect()).collect()
}

/// Event measurable at the resolution time of its anchor rule.
#[derive(Debug, Clone, PartialEq)]
pub enum EventPredicate<T> {
    WholeSpace,
    /// `{X_rule < K}`.
    ValueBelowAt(Box<StoppingRule<T>>, T),
    /// `{X_rule > K}`.
    ValueAboveAt(Box<StoppingRule<T>>, T),
    /// `{tau_later > tau_earlier}`, decided at `tau_earlier`.
    StrictlyLater {
        later: Box<StoppingRule<T>>,
        earlier: Box<StoppingRule<T>>,
    },
    And(Box<EventPredicate<T>>, Box<EventPredicate<T>>),
    Or(Box<EventPredicate<T>>, Box<EventPredicate<T>>),
    Not(Box<EventPredicate<T>>),
    /// Path prefix up to the anchor is one of the listed prefixes.
    PrefixIn {
        anchor: Box<StoppingRule<T>>,
        prefixes: Vec<Vec<T>>,
    },
}

impl<T: Scalar> EventPredicate<T> {
    pub fn empty() -> Self {
        Self::Not(Box::new(Self::WholeSpace))
    }

    pub fn value_below_at(rule: StoppingRule<T>, level: T) -> Self {
        Self::ValueBelowAt(Box::new(rule), level)
    }

    pub fn value_above_at(rule: StoppingRule<T>, level: T) -> Self {
        Self::ValueAboveAt(Box::new(rule), level)
    }

    pub fn strictly_later(later: StoppingRule<T>, earlier: StoppingRule<T>) -> Self {
        Self::StrictlyLater {
            later: Box::new(later),
            earlier: Box::new(earlier),
        }
    }

    pub fn and(self, other: Self) -> Self {
        Self::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Self) -> Self {
        Self::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Self::Not(Box::new(self))
    }

    pub fn prefix_in(anchor: StoppingRule<T>, prefixes: Vec<Vec<T>>) -> Self {
        Self::PrefixIn {
            anchor: Box::new(anchor),
            prefixes,
        }
    }

    pub fn evaluate(&self, path: &[T], grid: &TimeGrid<T>) -> Result<bool> {
        self.evaluate_within(path, grid, grid.last_index())?
            .ok_or_else(|| Error::Internal("event undecided on a full path".into()))
    }

    /// Value of the event using only `path[..=limit]`, or `None` if it is not
    /// yet decided by then.
    pub fn evaluate_within(&self, path: &[T], grid: &TimeGrid<T>, limit: usize) -> Result<Option<bool>> {
        Ok(match self {
            Self::WholeSpace => Some(true),
            Self::ValueBelowAt(rule, k) => rule.resolve_within(path, grid, limit)?.map(|i| path[i] < *k),
            Self::ValueAboveAt(rule, k) => rule.resolve_within(path, grid, limit)?.map(|i| path[i] > *k),
            Self::StrictlyLater { later, earlier } => match earlier.resolve_within(path, grid, limit)? {
                Some(e) => Some(later.resolve_within(path, grid, e)?.is_none()),
                None => None,
            },
            Self::And(a, b) => match a.evaluate_within(path, grid, limit)? {
                Some(false) => Some(false),
                Some(true) => b.evaluate_within(path, grid, limit)?,
                None => match b.evaluate_within(path, grid, limit)? {
                    Some(false) => Some(false),
                    _ => None,
                },
            },
            Self::Or(a, b) => match a.evaluate_within(path, grid, limit)? {
                Some(true) => Some(true),
                Some(false) => b.evaluate_within(path, grid, limit)?,
                None => match b.evaluate_within(path, grid, limit)? {
                    Some(true) => Some(true),
                    _ => None,
                },
            },
            Self::Not(a) => a.evaluate_within(path, grid, limit)?.map(|v| !v),
            Self::PrefixIn { anchor, prefixes } => anchor
                .resolve_within(path, grid, limit)?
                .map(|i| prefixes.iter().any(|p| p.as_slice() == &path[..=i])),
        })
    }

    pub fn map_levels(&self, level: &dyn Fn(T) -> Result<T>, eps: &dyn Fn(T) -> Result<T>) -> Result<Self> {
        Ok(match self {
            Self::WholeSpace => Self::WholeSpace,
            Self::ValueBelowAt(r, k) => Self::ValueBelowAt(Box::new(r.map_levels(level, eps)?), level(*k)?),
            Self::ValueAboveAt(r, k) => Self::ValueAboveAt(Box::new(r.map_levels(level, eps)?), level(*k)?),
            Self::StrictlyLater { later, earlier } => Self::StrictlyLater {
                later: Box::new(later.map_levels(level, eps)?),
                earlier: Box::new(earlier.map_levels(level, eps)?),
            },
            Self::And(a, b) => Self::And(Box::new(a.map_levels(level, eps)?), Box::new(b.map_levels(level, eps)?)),
            Self::Or(a, b) => Self::Or(Box::new(a.map_levels(level, eps)?), Box::new(b.map_levels(level, eps)?)),
            Self::Not(a) => Self::Not(Box::new(a.map_levels(level, eps)?)),
            Self::PrefixIn { anchor, prefixes } => Self::PrefixIn {
                anchor: Box::new(anchor.map_levels(level, eps)?),
                prefixes: map_prefixes(prefixes, level)?,
            },
        })
    }
}

impl<T: Scalar> fmt::Display for StoppingRule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RuleKind::Deterministic(t) if *t == self.cap => return write!(f, "at({t})"),
            RuleKind::Deterministic(t) => write!(f, "at({t})")?,
            RuleKind::HitAbove(l) => write!(f, "hit_above({l})")?,
            RuleKind::HitBelow(l) => write!(f, "hit_below({l})")?,
            RuleKind::FirstDrop { base, epsilon } => write!(f, "first_drop({base}, {epsilon})")?,
            RuleKind::FirstAbove { base, level } => write!(f, "first_above({base}, {level})")?,
            RuleKind::Restricted { base, event, fallback } => write!(f, "restricted({base}, {event}, {fallback})")?,
            RuleKind::Earliest(a, b) => write!(f, "earliest({a}, {b})")?,
            RuleKind::PrefixSet(ps) => write!(f, "prefix_set({})", Prefixes(ps))?,
        }
        write!(f, " cap {}", self.cap)
    }
}

impl<T: Scalar> fmt::Display for EventPredicate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WholeSpace => write!(f, "all"),
            Self::Not(a) if **a == Self::WholeSpace => write!(f, "none"),
            Self::ValueBelowAt(r, k) => write!(f, "below_at({r}, {k})"),
            Self::ValueAboveAt(r, k) => write!(f, "above_at({r}, {k})"),
            Self::StrictlyLater { later, earlier } => write!(f, "later({later}, {earlier})"),
            Self::And(a, b) => write!(f, "and({a}, {b})"),
            Self::Or(a, b) => write!(f, "or({a}, {b})"),
            Self::Not(a) => write!(f, "not({a})"),
            Self::PrefixIn { anchor, prefixes } => write!(f, "prefix_in({anchor}, {})", Prefixes(prefixes)),
        }
    }
}

struct Prefixes<'a, T>(&'a [Vec<T>]);

impl<T: Scalar> fmt::Display for Prefixes<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            for (j, v) in p.iter().enumerate() {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{v}")?;
            }
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type R = StoppingRule<f64>;
    type E = EventPredicate<f64>;

    fn grid(n: usize) -> TimeGrid<f64> {
        TimeGrid::integers(n - 1).unwrap()
    }

    #[test]
    fn hit_above_first_crossing() {
        let g = grid(3);
        assert_eq!(R::hit_above(2.0, 2.0).resolve(&[1.0, 2.0, 3.0], &g).unwrap(), 1);
    }

    #[test]
    fn hit_below_never_hits_returns_cap() {
        let g = grid(3);
        assert_eq!(R::hit_below(0.5, 2.0).resolve(&[1.0, 2.0, 3.0], &g).unwrap(), 2);
    }

    #[test]
    fn first_drop_uses_strict_inequality() {
        let g = grid(4);
        let rule = R::first_drop(R::deterministic(0.0), 0.25, 3.0);
        assert_eq!(rule.resolve(&[1.0, 0.9, 0.7, 0.8], &g).unwrap(), 2);
        // a drop of exactly epsilon does not trigger
        let rule = R::first_drop(R::deterministic(0.0), 0.5, 3.0);
        assert_eq!(rule.resolve(&[1.0, 0.5, 0.6, 0.8], &g).unwrap(), 3);
    }

    #[test]
    fn cap_beyond_grid_is_a_domain_error() {
        let g = grid(3);
        assert!(matches!(
            R::hit_above(2.0, 5.0).resolve(&[1.0, 2.0, 3.0], &g),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn basic_events() {
        let g = grid(3);
        let path = [1.0, 2.0, 3.0];
        assert!(E::WholeSpace.evaluate(&path, &g).unwrap());
        assert!(!E::empty().evaluate(&path, &g).unwrap());
        assert!(E::value_below_at(R::deterministic(0.0), 2.0)
            .evaluate(&path, &g)
            .unwrap());
        let later = E::strictly_later(R::hit_above(2.0, 2.0), R::deterministic(0.0));
        assert!(later.evaluate(&path, &g).unwrap());
        let not_later = E::strictly_later(R::deterministic(0.0), R::hit_above(2.0, 2.0));
        assert!(!not_later.evaluate(&path, &g).unwrap());
    }

    #[test]
    fn restricted_and_earliest() {
        let g = grid(4);
        let path = [1.0, 3.0, 0.5, 2.0];
        let on = E::value_below_at(R::deterministic(0.0), 2.0);
        let off = E::value_above_at(R::deterministic(0.0), 2.0);
        let base = R::deterministic(1.0);
        assert_eq!(R::restricted(base.clone(), on, 3.0).resolve(&path, &g).unwrap(), 1);
        assert_eq!(R::restricted(base, off, 3.0).resolve(&path, &g).unwrap(), 3);
        let e = R::earliest(R::hit_below(0.6, 3.0), R::deterministic(3.0));
        assert_eq!(e.resolve(&path, &g).unwrap(), 2);
        let fa = R::first_above(R::deterministic(1.0), 2.5, 3.0);
        assert_eq!(fa.resolve(&path, &g).unwrap(), 1);
    }

    #[test]
    fn restricted_rejects_events_decided_after_base() {
        let g = grid(3);
        let ev = E::value_above_at(R::deterministic(2.0), 0.0);
        let rule = R::restricted(R::deterministic(0.0), ev, 2.0);
        assert!(rule.resolve(&[1.0, 1.0, 1.0], &g).is_err());
    }

    #[test]
    fn prefix_rules() {
        let g = grid(3);
        let rule = R::prefix_set(vec![vec![1.0, 2.0], vec![1.0, 0.0, 1.0]], 2.0);
        assert_eq!(rule.resolve(&[1.0, 2.0, 2.0], &g).unwrap(), 1);
        assert_eq!(rule.resolve(&[1.0, 0.0, 1.0], &g).unwrap(), 2);
        assert_eq!(rule.resolve(&[1.0, 1.0, 1.0], &g).unwrap(), 2);
        let ev = E::prefix_in(R::deterministic(1.0), vec![vec![1.0, 0.0]]);
        assert!(ev.evaluate(&[1.0, 0.0, 1.0], &g).unwrap());
        assert!(!ev.evaluate(&[1.0, 2.0, 1.0], &g).unwrap());
    }

    #[test]
    fn display_is_readable() {
        let rule = R::first_drop(R::deterministic(0.0), 0.5, 1.0);
        assert_eq!(rule.to_string(), "first_drop(at(0), 0.5) cap 1");
        let ev = E::value_below_at(R::hit_above(2.0, 1.0), 3.0).and(E::WholeSpace);
        assert_eq!(ev.to_string(), "and(below_at(hit_above(2) cap 1, 3), all)");
    }

    fn rule_strategy() -> impl Strategy<Value = R> {
        let leaf = prop_oneof![
            (0usize..8).prop_map(|t| R::deterministic(t as f64)),
            (-2.0..2.0f64, 0usize..8).prop_map(|(l, c)| R::hit_above(l, c as f64)),
            (-2.0..2.0f64, 0usize..8).prop_map(|(l, c)| R::hit_below(l, c as f64)),
        ];
        leaf.prop_recursive(2, 8, 2, |inner| {
            prop_oneof![
                (inner.clone(), 0.0..1.0f64, 0usize..8).prop_map(|(b, e, c)| R::first_drop(b, e, c as f64)),
                (inner.clone(), -1.0..1.0f64, 0usize..8).prop_map(|(b, l, c)| R::first_above(b, l, c as f64)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| R::earliest(a, b)),
                (inner, -1.0..1.0f64, 0usize..8).prop_map(|(b, k, t)| {
                    let anchor = b.clone();
                    R::restricted(b, E::value_below_at(anchor, k), t as f64)
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn resolution_is_adapted_and_capped(
            rule in rule_strategy(),
            path in proptest::collection::vec(-2.0..2.0f64, 8),
            noise in proptest::collection::vec(-5.0..5.0f64, 8),
        ) {
            let g = grid(8);
            let idx = rule.resolve(&path, &g).unwrap();
            prop_assert!(idx <= g.index_at_or_before(rule.cap).unwrap());
            let mut perturbed = path.clone();
            perturbed[idx + 1..8].copy_from_slice(&noise[idx + 1..8]);
            prop_assert_eq!(rule.resolve(&perturbed, &g).unwrap(), idx);
            let ev = E::value_above_at(rule.clone(), 0.0)
                .or(E::strictly_later(R::hit_above(1.5, 7.0), rule.clone()));
            prop_assert_eq!(ev.evaluate(&path, &g).unwrap(), ev.evaluate(&perturbed, &g).unwrap());
        }

        #[test]
        fn hit_above_commutes_with_increasing_maps(
            path in proptest::collection::vec(-2.0..2.0f64, 8),
            level in -2.0..2.0f64,
        ) {
            let g = grid(8);
            let f = |x: f64| x.exp() * 3.0 + 1.0;
            let mapped: Vec<f64> = path.iter().map(|&x| f(x)).collect();
            let a = R::hit_above(level, 7.0).resolve(&path, &g).unwrap();
            let b = R::hit_above(f(level), 7.0).resolve(&mapped, &g).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
