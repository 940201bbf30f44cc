//! Typed guidance circuits and their structural validation.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::formula::{AtomId, AtomRegistry, Formula, OrKind};
use crate::model::{DistributionModel, Event, FeasibleWorldSet, DEFAULT_WORLD_CAP};

/// Formula tree whose connectives are tagged with the property that licenses
/// their composition rule.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GuidanceCircuit {
    Atom(AtomId),
    Not(Box<GuidanceCircuit>),
    AndCi(Box<GuidanceCircuit>, Box<GuidanceCircuit>),
    OrCi(Box<GuidanceCircuit>, Box<GuidanceCircuit>),
    OrMe(Box<GuidanceCircuit>, Box<GuidanceCircuit>),
}

impl GuidanceCircuit {
    pub fn atom(a: AtomId) -> Self {
        GuidanceCircuit::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(c: GuidanceCircuit) -> Self {
        GuidanceCircuit::Not(Box::new(c))
    }

    pub fn and_ci(l: GuidanceCircuit, r: GuidanceCircuit) -> Self {
        GuidanceCircuit::AndCi(Box::new(l), Box::new(r))
    }

    pub fn or_ci(l: GuidanceCircuit, r: GuidanceCircuit) -> Self {
        GuidanceCircuit::OrCi(Box::new(l), Box::new(r))
    }

    pub fn or_me(l: GuidanceCircuit, r: GuidanceCircuit) -> Self {
        GuidanceCircuit::OrMe(Box::new(l), Box::new(r))
    }

    /// Left-nested AND-CI chain; `None` when `items` is empty.
    pub fn and_ci_all(items: impl IntoIterator<Item = GuidanceCircuit>) -> Option<Self> {
        items.into_iter().reduce(Self::and_ci)
    }

    /// Left-nested OR-ME chain; `None` when `items` is empty.
    pub fn or_me_all(items: impl IntoIterator<Item = GuidanceCircuit>) -> Option<Self> {
        items.into_iter().reduce(Self::or_me)
    }

    /// Maps a formula node-for-node. Every disjunction must carry a kind and
    /// every conjunction is read as AND-CI; constants are rejected.
    pub fn from_formula(f: &Formula) -> Result<Self> {
        Ok(match f {
            Formula::True => return Err(Error::NotRepresentable("`true`")),
            Formula::False => return Err(Error::NotRepresentable("`false`")),
            Formula::Atom(a) => GuidanceCircuit::Atom(*a),
            Formula::Not(c) => Self::not(Self::from_formula(c)?),
            Formula::And(l, r) => Self::and_ci(Self::from_formula(l)?, Self::from_formula(r)?),
            Formula::Or(OrKind::Ci, l, r) => Self::or_ci(Self::from_formula(l)?, Self::from_formula(r)?),
            Formula::Or(OrKind::Me, l, r) => Self::or_me(Self::from_formula(l)?, Self::from_formula(r)?),
            Formula::Or(OrKind::Unspecified, ..) => {
                return Err(Error::NotRepresentable("a disjunction without a CI/ME tag"))
            }
        })
    }

    pub fn to_formula(&self) -> Formula {
        match self {
            GuidanceCircuit::Atom(a) => Formula::Atom(*a),
            GuidanceCircuit::Not(c) => Formula::not(c.to_formula()),
            GuidanceCircuit::AndCi(l, r) => Formula::and(l.to_formula(), r.to_formula()),
            GuidanceCircuit::OrCi(l, r) => Formula::or_kind(OrKind::Ci, l.to_formula(), r.to_formula()),
            GuidanceCircuit::OrMe(l, r) => Formula::or_kind(OrKind::Me, l.to_formula(), r.to_formula()),
        }
    }

    /// Distinct atoms in order of first (left-to-right) occurrence.
    pub fn atoms(&self) -> Vec<AtomId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| {
            if seen.insert(a) {
                out.push(a);
            }
        });
        out
    }

    fn visit_atoms(&self, f: &mut impl FnMut(AtomId)) {
        match self {
            GuidanceCircuit::Atom(a) => f(*a),
            GuidanceCircuit::Not(c) => c.visit_atoms(f),
            GuidanceCircuit::AndCi(l, r) | GuidanceCircuit::OrCi(l, r) | GuidanceCircuit::OrMe(l, r) => {
                l.visit_atoms(f);
                r.visit_atoms(f);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            GuidanceCircuit::Atom(_) => 1,
            GuidanceCircuit::Not(c) => 1 + c.node_count(),
            GuidanceCircuit::AndCi(l, r) | GuidanceCircuit::OrCi(l, r) | GuidanceCircuit::OrMe(l, r) => {
                1 + l.node_count() + r.node_count()
            }
        }
    }

    pub fn contains_not(&self) -> bool {
        match self {
            GuidanceCircuit::Atom(_) => false,
            GuidanceCircuit::Not(_) => true,
            GuidanceCircuit::AndCi(l, r) | GuidanceCircuit::OrCi(l, r) | GuidanceCircuit::OrMe(l, r) => {
                l.contains_not() || r.contains_not()
            }
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            GuidanceCircuit::Atom(_) => NodeKind::Atom,
            GuidanceCircuit::Not(_) => NodeKind::Not,
            GuidanceCircuit::AndCi(..) => NodeKind::AndCi,
            GuidanceCircuit::OrCi(..) => NodeKind::OrCi,
            GuidanceCircuit::OrMe(..) => NodeKind::OrMe,
        }
    }

    /// Event of the circuit over an enumerated world set.
    pub fn event(&self, worlds: &FeasibleWorldSet) -> Result<Event> {
        Ok(match self {
            GuidanceCircuit::Atom(a) => worlds.atom_event(*a)?,
            GuidanceCircuit::Not(c) => c.event(worlds)?.complement(),
            GuidanceCircuit::AndCi(l, r) => l.event(worlds)?.intersection(&r.event(worlds)?),
            GuidanceCircuit::OrCi(l, r) | GuidanceCircuit::OrMe(l, r) => l.event(worlds)?.union(&r.event(worlds)?),
        })
    }

    /// S-expression dump, e.g. `(orME (andCI digit.1 color.blue) ...)`.
    pub fn to_sexp<'a>(&'a self, registry: &'a AtomRegistry) -> SexpDisplay<'a> {
        SexpDisplay {
            circuit: self,
            registry,
        }
    }

    pub fn parse_sexp(text: &str, registry: &AtomRegistry) -> Result<Self> {
        let toks = sexp_tokens(text)?;
        if toks.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut pos = 0;
        let c = parse_node(&toks, &mut pos, text.len(), registry)?;
        if pos != toks.len() {
            return Err(Error::Syntax {
                offset: toks[pos].1,
                message: "trailing input".into(),
            });
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Atom,
    Not,
    AndCi,
    OrCi,
    OrMe,
}

impl NodeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            NodeKind::Atom => "atom",
            NodeKind::Not => "not",
            NodeKind::AndCi => "andCI",
            NodeKind::OrCi => "orCI",
            NodeKind::OrMe => "orME",
        }
    }
}

pub struct SexpDisplay<'a> {
    circuit: &'a GuidanceCircuit,
    registry: &'a AtomRegistry,
}

impl SexpDisplay<'_> {
    fn write(&self, c: &GuidanceCircuit, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match c {
            GuidanceCircuit::Atom(a) => write!(out, "{}", self.registry.name(*a)),
            GuidanceCircuit::Not(x) => {
                write!(out, "(not ")?;
                self.write(x, out)?;
                write!(out, ")")
            }
            GuidanceCircuit::AndCi(l, r) | GuidanceCircuit::OrCi(l, r) | GuidanceCircuit::OrMe(l, r) => {
                write!(out, "({} ", c.kind().keyword())?;
                self.write(l, out)?;
                write!(out, " ")?;
                self.write(r, out)?;
                write!(out, ")")
            }
        }
    }
}

impl fmt::Display for SexpDisplay<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.circuit, out)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum SexpTok {
    Open,
    Close,
    Symbol(String),
}

fn sexp_tokens(text: &str) -> Result<Vec<(SexpTok, usize)>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((SexpTok::Open, i));
                i += 1;
            }
            b')' => {
                out.push((SexpTok::Close, i));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            c if c.is_ascii_alphanumeric() || c == b'_' || c == b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                    i += 1;
                }
                out.push((SexpTok::Symbol(text[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Syntax {
                    offset: i,
                    message: format!("unexpected character `{}`", text[i..].chars().next().unwrap_or('?')),
                })
            }
        }
    }
    Ok(out)
}

fn parse_node(
    toks: &[(SexpTok, usize)],
    pos: &mut usize,
    end: usize,
    registry: &AtomRegistry,
) -> Result<GuidanceCircuit> {
    let syntax = |offset: usize, message: &str| Error::Syntax {
        offset,
        message: message.to_string(),
    };
    let Some((tok, offset)) = toks.get(*pos) else {
        return Err(syntax(end, "unexpected end of input"));
    };
    *pos += 1;
    match tok {
        SexpTok::Symbol(name) => match registry.lookup(name) {
            Ok(a) => Ok(GuidanceCircuit::Atom(a)),
            Err(c) if c.is_empty() => Err(Error::UnknownAtom {
                name: name.clone(),
                offset: *offset,
            }),
            Err(candidates) => Err(Error::AmbiguousAtom {
                name: name.clone(),
                offset: *offset,
                candidates,
            }),
        },
        SexpTok::Close => Err(syntax(*offset, "unexpected `)`")),
        SexpTok::Open => {
            let Some((SexpTok::Symbol(head), head_at)) = toks.get(*pos) else {
                return Err(syntax(toks.get(*pos).map_or(end, |t| t.1), "expected an operator"));
            };
            *pos += 1;
            let arity = match head.as_str() {
                "not" => 1,
                "andCI" | "orCI" | "orME" => 2,
                _ => return Err(syntax(*head_at, "unknown operator")),
            };
            let first = parse_node(toks, pos, end, registry)?;
            let node = if arity == 1 {
                GuidanceCircuit::not(first)
            } else {
                let second = parse_node(toks, pos, end, registry)?;
                match head.as_str() {
                    "andCI" => GuidanceCircuit::and_ci(first, second),
                    "orCI" => GuidanceCircuit::or_ci(first, second),
                    _ => GuidanceCircuit::or_me(first, second),
                }
            };
            match toks.get(*pos) {
                Some((SexpTok::Close, _)) => {
                    *pos += 1;
                    Ok(node)
                }
                other => Err(syntax(other.map_or(end, |t| t.1), "expected `)`")),
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeStatus {
    Ok,
    CiViolation,
    MeViolation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeReport {
    /// Pre-order index of the node.
    pub index: usize,
    pub kind: NodeKind,
    pub status: NodeStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub nodes: Vec<NodeReport>,
    /// True iff every node is [`NodeStatus::Ok`].
    pub ok: bool,
    /// The circuit holds in every feasible world (posterior identically 1,
    /// zero score) or in none.
    pub degenerate: bool,
}

impl ValidationReport {
    pub fn violations(&self) -> impl Iterator<Item = &NodeReport> {
        self.nodes.iter().filter(|n| n.status != NodeStatus::Ok)
    }
}

/// Checks the sufficient conditions for exact composition.
///
/// AND-CI and OR-CI nodes pass when their children touch disjoint sets of
/// categorical groups; under a taxonomy no pair of distinct nodes is CI, so
/// CI nodes never pass. OR-ME nodes pass when the children's events are
/// disjoint over the enumerated feasible worlds.
pub fn validate_structure(c: &GuidanceCircuit, model: &DistributionModel) -> Result<ValidationReport> {
    for a in c.atoms() {
        if !model.registry().contains(a) {
            return Err(Error::UnassignedAtom(a.0));
        }
    }
    let worlds = model.enumerate_worlds(DEFAULT_WORLD_CAP)?;
    let mut nodes = Vec::new();
    let event = check_node(c, model, &worlds, &mut nodes)?;
    nodes.sort_by_key(|n| n.index);
    Ok(ValidationReport {
        ok: nodes.iter().all(|n| n.status == NodeStatus::Ok),
        degenerate: event.is_full() || event.is_empty(),
        nodes,
    })
}

fn group_scope(c: &GuidanceCircuit, model: &DistributionModel) -> Option<HashSet<usize>> {
    let m = model.as_categorical()?;
    Some(c.atoms().into_iter().map(|a| m.group_of(a)).collect())
}

fn check_node(
    c: &GuidanceCircuit,
    model: &DistributionModel,
    worlds: &FeasibleWorldSet,
    out: &mut Vec<NodeReport>,
) -> Result<Event> {
    let index = out.len();
    out.push(NodeReport {
        index,
        kind: c.kind(),
        status: NodeStatus::Ok,
    });
    let (status, event) = match c {
        GuidanceCircuit::Atom(a) => (NodeStatus::Ok, worlds.atom_event(*a)?),
        GuidanceCircuit::Not(x) => (NodeStatus::Ok, check_node(x, model, worlds, out)?.complement()),
        GuidanceCircuit::AndCi(l, r) | GuidanceCircuit::OrCi(l, r) => {
            let el = check_node(l, model, worlds, out)?;
            let er = check_node(r, model, worlds, out)?;
            let ci = match (group_scope(l, model), group_scope(r, model)) {
                (Some(sl), Some(sr)) => sl.is_disjoint(&sr),
                _ => false,
            };
            let status = if ci { NodeStatus::Ok } else { NodeStatus::CiViolation };
            let event = if matches!(c, GuidanceCircuit::AndCi(..)) {
                el.intersection(&er)
            } else {
                el.union(&er)
            };
            (status, event)
        }
        GuidanceCircuit::OrMe(l, r) => {
            let el = check_node(l, model, worlds, out)?;
            let er = check_node(r, model, worlds, out)?;
            let status = if el.is_disjoint(&er) {
                NodeStatus::Ok
            } else {
                NodeStatus::MeViolation
            };
            (status, el.union(&er))
        }
    };
    out[index].status = status;
    Ok(event)
}
