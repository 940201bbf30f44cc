//! Boolean formulas over a registry of atomic predicates.
//!
//! A [`Formula`] is a binary tree over `true`, `false`, atoms, `~`, `&` and
//! `|`. Disjunctions may carry a kind hint (`|ME`, `|CI`) that a caller can
//! use to pin how the node should be treated when the formula is mapped
//! directly onto a guidance circuit; the compiler ignores the hint.

mod fdnf;
mod parse;
mod random;

use std::collections::HashMap;
use std::fmt;

pub use fdnf::{to_fdnf, DEFAULT_FDNF_ATOM_CAP};
pub use parse::parse_formula;
pub use random::{random_formula, random_query, random_query_with, BinaryOp, QuerySpec, DEFAULT_NEG_PROB};

use crate::error::{Error, Result};

/// Index into an [`AtomRegistry`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomId(pub usize);

impl AtomId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Name table for atoms.
///
/// Atoms are looked up by their full name (`color.red`). A short alias (the
/// part after the last `.`) also resolves when it is unique in the registry,
/// so `red & d3` works whenever `red` names a single atom.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AtomRegistry {
    names: Vec<String>,
    by_name: HashMap<String, AtomId>,
    aliases: HashMap<String, Vec<AtomId>>,
}

impl AtomRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut reg = Self::new();
        for name in names {
            reg.register(name)?;
        }
        Ok(reg)
    }

    /// Registers a new atom, rejecting duplicate or malformed names.
    pub fn register(&mut self, name: impl Into<String>) -> Result<AtomId> {
        let name = name.into();
        if !is_valid_atom_name(&name) {
            return Err(Error::InvalidInput(format!("invalid atom name `{name}`")));
        }
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidInput(format!("duplicate atom name `{name}`")));
        }
        let id = AtomId(self.names.len());
        if let Some((_, short)) = name.rsplit_once('.') {
            self.aliases.entry(short.to_string()).or_default().push(id);
        }
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: AtomId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> impl Iterator<Item = AtomId> {
        (0..self.names.len()).map(AtomId)
    }

    pub fn contains(&self, id: AtomId) -> bool {
        id.0 < self.names.len()
    }

    /// Resolves a full name or a unique short alias.
    pub fn lookup(&self, name: &str) -> std::result::Result<AtomId, Vec<String>> {
        if let Some(&id) = self.by_name.get(name) {
            return Ok(id);
        }
        match self.aliases.get(name).map(Vec::as_slice) {
            Some([id]) => Ok(*id),
            Some(ids) => Err(ids.iter().map(|&id| self.name(id).to_string()).collect()),
            None => Err(Vec::new()),
        }
    }
}

pub(crate) fn is_valid_atom_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    if name == "true" || name == "false" {
        return false;
    }
    if name.ends_with('.') || name.contains("..") {
        return false;
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Optional disjunction kind carried by the surface syntax.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum OrKind {
    #[default]
    Unspecified,
    Ci,
    Me,
}

impl OrKind {
    fn token(self) -> &'static str {
        match self {
            OrKind::Unspecified => "|",
            OrKind::Ci => "|CI",
            OrKind::Me => "|ME",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(AtomId),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(OrKind, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(id: AtomId) -> Self {
        Formula::Atom(id)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(OrKind::Unspecified, Box::new(l), Box::new(r))
    }

    pub fn or_kind(kind: OrKind, l: Formula, r: Formula) -> Self {
        Formula::Or(kind, Box::new(l), Box::new(r))
    }

    /// Left-nested conjunction; `None` for an empty iterator.
    pub fn and_all(items: impl IntoIterator<Item = Formula>) -> Option<Formula> {
        items.into_iter().reduce(Formula::and)
    }

    /// Left-nested disjunction with the given kind; `None` when empty.
    pub fn or_all(kind: OrKind, items: impl IntoIterator<Item = Formula>) -> Option<Formula> {
        items.into_iter().reduce(|l, r| Formula::or_kind(kind, l, r))
    }

    /// Number of binary operators.
    pub fn binary_ops(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 0,
            Formula::Not(c) => c.binary_ops(),
            Formula::And(l, r) | Formula::Or(_, l, r) => 1 + l.binary_ops() + r.binary_ops(),
        }
    }

    /// Distinct atoms in first-occurrence (in-order) order.
    pub fn atoms(&self) -> Vec<AtomId> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<AtomId>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                if !out.contains(a) {
                    out.push(*a);
                }
            }
            Formula::Not(c) => c.collect_atoms(out),
            Formula::And(l, r) | Formula::Or(_, l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }

    pub fn max_atom(&self) -> Option<AtomId> {
        self.atoms().into_iter().max()
    }

    /// Propositional evaluation under a total assignment.
    pub fn evaluate(&self, world: &World) -> Result<bool> {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => world.get(*a).ok_or(Error::UnassignedAtom(a.0))?,
            Formula::Not(c) => !c.evaluate(world)?,
            Formula::And(l, r) => {
                let lv = l.evaluate(world)?;
                let rv = r.evaluate(world)?;
                lv && rv
            }
            Formula::Or(_, l, r) => {
                let lv = l.evaluate(world)?;
                let rv = r.evaluate(world)?;
                lv || rv
            }
        })
    }

    pub fn display<'a>(&'a self, registry: &'a AtomRegistry) -> FormulaDisplay<'a> {
        FormulaDisplay {
            formula: self,
            registry,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            _ => 3,
        }
    }
}

/// Evaluates `f` on `w`; free-function form of [`Formula::evaluate`].
pub fn evaluate_world(f: &Formula, w: &World) -> Result<bool> {
    f.evaluate(w)
}

/// Pretty-printer emitting minimal parentheses for left-nested binary trees.
pub struct FormulaDisplay<'a> {
    formula: &'a Formula,
    registry: &'a AtomRegistry,
}

impl FormulaDisplay<'_> {
    fn write(&self, f: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f {
            Formula::True => out.write_str("true"),
            Formula::False => out.write_str("false"),
            Formula::Atom(a) => out.write_str(self.registry.name(*a)),
            Formula::Not(c) => {
                out.write_str("~")?;
                self.child(c, c.precedence() < 3, out)
            }
            Formula::And(l, r) => {
                self.child(l, l.precedence() < 2, out)?;
                out.write_str(" & ")?;
                self.child(r, r.precedence() <= 2, out)
            }
            Formula::Or(kind, l, r) => {
                self.child(l, false, out)?;
                write!(out, " {} ", kind.token())?;
                self.child(r, r.precedence() <= 1, out)
            }
        }
    }

    fn child(&self, f: &Formula, parens: bool, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if parens {
            out.write_str("(")?;
            self.write(f, out)?;
            out.write_str(")")
        } else {
            self.write(f, out)
        }
    }
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.formula, out)
    }
}

/// Total truth assignment to the atoms of a registry.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct World {
    truth: Vec<bool>,
}

impl World {
    pub fn new(truth: Vec<bool>) -> Self {
        Self { truth }
    }

    /// World where exactly the listed atoms hold.
    pub fn from_true_atoms(n_atoms: usize, atoms: impl IntoIterator<Item = AtomId>) -> Self {
        let mut truth = vec![false; n_atoms];
        for a in atoms {
            truth[a.0] = true;
        }
        Self { truth }
    }

    /// The `i`-th of the `2^n` patterns: atom `j` holds iff bit `j` of `i` is set.
    pub fn from_index(n_atoms: usize, index: u64) -> Self {
        Self {
            truth: (0..n_atoms).map(|j| (index >> j) & 1 == 1).collect(),
        }
    }

    pub fn get(&self, a: AtomId) -> Option<bool> {
        self.truth.get(a.0).copied()
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn truth(&self) -> &[bool] {
        &self.truth
    }

    pub fn true_atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.truth
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| AtomId(i))
    }
}
