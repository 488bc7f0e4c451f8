use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::ExpansionError;
use crate::graph::{Direction, NodeKind, RelationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathStep {
    pub relation: RelationKind,
    pub direction: Direction,
    pub kind: NodeKind,
}

/// Origin node kind followed by typed steps, e.g.
/// `Class <-Encloses- Script -Imports-> Function`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathType {
    pub origin: NodeKind,
    pub steps: Vec<PathStep>,
}

impl PathType {
    pub fn origin(origin: NodeKind) -> Self {
        PathType {
            origin,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn extended(&self, step: PathStep) -> Self {
        let mut steps = Vec::with_capacity(self.steps.len() + 1);
        steps.extend_from_slice(&self.steps);
        steps.push(step);
        PathType {
            origin: self.origin,
            steps,
        }
    }

    pub fn prefix(&self, len: usize) -> Self {
        PathType {
            origin: self.origin,
            steps: self.steps[..len].to_vec(),
        }
    }

    pub fn is_prefix_of(&self, other: &PathType) -> bool {
        self.origin == other.origin
            && self.steps.len() <= other.steps.len()
            && other.steps[..self.steps.len()] == self.steps[..]
    }

    /// Non-empty proper and full prefixes, shortest first.
    pub fn prefixes(&self) -> impl Iterator<Item = PathType> + '_ {
        (1..=self.steps.len()).map(|n| self.prefix(n))
    }
}

impl fmt::Display for PathType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.origin)?;
        for s in &self.steps {
            match s.direction {
                Direction::Forward => write!(f, " -{}-> {}", s.relation, s.kind)?,
                Direction::Reverse => write!(f, " <-{}- {}", s.relation, s.kind)?,
            }
        }
        Ok(())
    }
}

impl FromStr for PathType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut tokens = s.split_whitespace();
        let origin: NodeKind = tokens.next().ok_or("empty path type")?.parse()?;
        let mut steps = Vec::new();
        while let Some(arrow) = tokens.next() {
            let (relation, direction) = if let Some(r) = arrow.strip_prefix("<-").and_then(|a| a.strip_suffix('-')) {
                (r, Direction::Reverse)
            } else if let Some(r) = arrow.strip_prefix('-').and_then(|a| a.strip_suffix("->")) {
                (r, Direction::Forward)
            } else {
                return Err(format!("bad step arrow `{arrow}`"));
            };
            let kind: NodeKind = tokens
                .next()
                .ok_or_else(|| format!("arrow `{arrow}` has no destination kind"))?
                .parse()?;
            steps.push(PathStep {
                relation: relation.parse()?,
                direction,
                kind,
            });
        }
        Ok(PathType { origin, steps })
    }
}

/// Steps the graph schema allows from a node of `kind`.
pub(crate) fn schema_steps(kind: NodeKind) -> Vec<PathStep> {
    use Direction::*;
    use NodeKind::*;
    use RelationKind::*;
    let mut out = Vec::new();
    let mut add = |relation, direction, kinds: &[NodeKind]| {
        for &k in kinds {
            out.push(PathStep {
                relation,
                direction,
                kind: k,
            });
        }
    };
    match kind {
        Script => {
            add(Imports, Forward, &[Function, Class, Script]);
            add(Imports, Reverse, &[Script]);
            add(Encloses, Forward, &[Function, Method, Class]);
        }
        Function => {
            add(Imports, Reverse, &[Script]);
            add(Invokes, Forward, &[Function, Method]);
            add(Invokes, Reverse, &[Function, Method]);
            add(Encloses, Reverse, &[Script]);
        }
        Method => {
            add(Invokes, Forward, &[Function, Method]);
            add(Invokes, Reverse, &[Function, Method]);
            add(Owns, Reverse, &[Class]);
            add(Encloses, Reverse, &[Script]);
        }
        Class => {
            add(Imports, Reverse, &[Script]);
            add(Owns, Forward, &[Method]);
            add(Encloses, Reverse, &[Script]);
            add(Inherits, Forward, &[Class]);
            add(Inherits, Reverse, &[Class]);
        }
    }
    out.sort();
    out
}

/// Frequency-weighted, prefix-closed set of path types.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathTypeSet {
    entries: BTreeMap<PathType, u64>,
    admitted: BTreeSet<PathType>,
    /// Mining parameters, recorded for provenance.
    pub quantile: f64,
    pub depth: usize,
    pub budget: usize,
    pub k: usize,
}

const HEADER: &str = "rsg-patterns 1";

impl PathTypeSet {
    /// Builds a set from `(path, frequency)` pairs. Prefixes missing from
    /// the input are added with the summed frequency of their extensions.
    pub fn from_entries(entries: impl IntoIterator<Item = (PathType, u64)>) -> Self {
        let mut map: BTreeMap<PathType, u64> = BTreeMap::new();
        for (p, f) in entries {
            if !p.is_empty() && f > 0 {
                *map.entry(p).or_default() += f;
            }
        }
        let missing: Vec<PathType> = map
            .keys()
            .flat_map(|p| p.prefixes().collect::<Vec<_>>())
            .filter(|p| !map.contains_key(p))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for prefix in missing {
            let support = map
                .iter()
                .filter(|(p, _)| prefix.is_prefix_of(p))
                .map(|(_, f)| f)
                .sum();
            map.insert(prefix, support);
        }
        let admitted = map.keys().cloned().collect();
        PathTypeSet {
            entries: map,
            admitted,
            quantile: 1.0,
            depth: 0,
            budget: 0,
            k: 0,
        }
    }

    /// Every schema-valid path type of length 1..=depth from every origin.
    pub fn universal(depth: usize) -> Self {
        let mut entries = Vec::new();
        let mut frontier: Vec<PathType> = NodeKind::ALL.iter().map(|&k| PathType::origin(k)).collect();
        for _ in 0..depth {
            let mut next = Vec::new();
            for p in &frontier {
                let last = p.steps.last().map_or(p.origin, |s| s.kind);
                for step in schema_steps(last) {
                    next.push(p.extended(step));
                }
            }
            entries.extend(next.iter().cloned().map(|p| (p, 1)));
            frontier = next;
        }
        let mut set = PathTypeSet::from_entries(entries);
        set.depth = depth;
        set
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frequency(&self, path: &PathType) -> Option<u64> {
        self.entries.get(path).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&PathType, u64)> {
        self.entries.iter().map(|(p, f)| (p, *f))
    }

    /// True when `path` is a member or a prefix of a member.
    pub fn admits(&self, path: &PathType) -> bool {
        self.admitted.contains(path)
    }

    pub fn is_prefix_closed(&self) -> bool {
        self.entries
            .keys()
            .all(|p| p.prefixes().all(|q| self.entries.contains_key(&q)))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\n");
        writeln!(out, "quantile {}", self.quantile).unwrap();
        writeln!(out, "depth {}", self.depth).unwrap();
        writeln!(out, "budget {}", self.budget).unwrap();
        writeln!(out, "k {}", self.k).unwrap();
        let mut rows: Vec<(&PathType, &u64)> = self.entries.iter().collect();
        rows.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        for (p, f) in rows {
            writeln!(out, "{f}\t{p}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ExpansionError> {
        let err = |line: usize, message: String| ExpansionError::Format { line, message };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == HEADER => {}
            _ => return Err(err(1, format!("expected header `{HEADER}`"))),
        }
        let mut entries = Vec::new();
        let (mut quantile, mut depth, mut budget, mut k) = (1.0, 0, 0, 0);
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some((f, p)) = line.split_once('\t') {
                let f: u64 = f.trim().parse().map_err(|_| err(line_no, format!("bad frequency `{f}`")))?;
                if f == 0 {
                    return Err(err(line_no, "frequencies must be positive".into()));
                }
                let p: PathType = p.parse().map_err(|m| err(line_no, m))?;
                if p.is_empty() {
                    return Err(err(line_no, "empty path type".into()));
                }
                entries.push((p, f));
                continue;
            }
            let (key, value) = line
                .split_once(' ')
                .ok_or_else(|| err(line_no, format!("unrecognized line `{line}`")))?;
            let bad = |_| err(line_no, format!("bad value for `{key}`"));
            match key {
                "quantile" => quantile = value.trim().parse().map_err(|_| err(line_no, "bad quantile".into()))?,
                "depth" => depth = value.trim().parse().map_err(bad)?,
                "budget" => budget = value.trim().parse().map_err(bad)?,
                "k" => k = value.trim().parse().map_err(bad)?,
                _ => return Err(err(line_no, format!("unknown key `{key}`"))),
            }
        }
        let mut set = PathTypeSet::from_entries(entries);
        set.quantile = quantile;
        set.depth = depth;
        set.budget = budget;
        set.k = k;
        Ok(set)
    }
}
