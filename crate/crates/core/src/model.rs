//! Structural descriptions of the atom system.
//!
//! Two families are supported: [`CategoricalModel`] (groups of mutually
//! exclusive values, independent across groups, exactly one value true per
//! group) and [`TaxonomyModel`] (a rooted tree of nested predicates whose
//! siblings are mutually exclusive). Both ground formulas by enumerating
//! their feasible worlds.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{AtomId, AtomRegistry, Formula, World};
use crate::testbed::TestbedConfig;

/// Default bound on enumerated worlds.
pub const DEFAULT_WORLD_CAP: usize = 1_000_000;

/// A set of feasible worlds, stored as a membership mask over the model's
/// enumeration order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    mask: Vec<bool>,
}

impl Event {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn empty(n: usize) -> Self {
        Self { mask: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        Self { mask: vec![true; n] }
    }

    pub fn contains(&self, world: usize) -> bool {
        self.mask[world]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn intersection(&self, other: &Event) -> Event {
        self.zip(other, |a, b| a && b)
    }

    pub fn union(&self, other: &Event) -> Event {
        self.zip(other, |a, b| a || b)
    }

    pub fn complement(&self) -> Event {
        Event {
            mask: self.mask.iter().map(|&b| !b).collect(),
        }
    }

    pub fn is_disjoint(&self, other: &Event) -> bool {
        !self.mask.iter().zip(&other.mask).any(|(&a, &b)| a && b)
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    fn zip(&self, other: &Event, op: impl Fn(bool, bool) -> bool) -> Event {
        Event {
            mask: self.mask.iter().zip(&other.mask).map(|(&a, &b)| op(a, b)).collect(),
        }
    }
}

/// Identifies a feasible world independently of its truth vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum WorldLabel {
    /// One value index per categorical group.
    Assignment(Vec<usize>),
    /// Most-specific taxonomy node.
    Node(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleWorldSet {
    pub worlds: Vec<World>,
    pub labels: Vec<WorldLabel>,
}

impl FeasibleWorldSet {
    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    pub fn event(&self, f: &Formula) -> Result<Event> {
        let mask = self.worlds.iter().map(|w| f.evaluate(w)).collect::<Result<Vec<_>>>()?;
        Ok(Event::from_mask(mask))
    }

    pub fn atom_event(&self, a: AtomId) -> Result<Event> {
        let mask = self
            .worlds
            .iter()
            .map(|w| w.get(a).ok_or(Error::UnassignedAtom(a.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Event::from_mask(mask))
    }

    pub fn position(&self, label: &WorldLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelViolation {
    NoGroups,
    EmptyGroup(String),
    DuplicateGroup(String),
    /// Atom listed in two groups: the groups do not form a partition.
    SharedAtom {
        atom: String,
        groups: (String, String),
    },
    UncoveredAtom(String),
    NoRoot,
    MultipleRoots(Vec<String>),
    Cycle(String),
    ExhaustiveLeaf(String),
    EmptyWorldSet,
    RootNotTop,
    NotNested {
        child: String,
        parent: String,
    },
    SiblingsOverlap(String, String),
    NeitherExclusiveNorNested(String, String),
}

impl fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelViolation::NoGroups => write!(f, "model has no groups"),
            ModelViolation::EmptyGroup(g) => write!(f, "group `{g}` is empty"),
            ModelViolation::DuplicateGroup(g) => write!(f, "group `{g}` declared twice"),
            ModelViolation::SharedAtom { atom, groups } => write!(
                f,
                "not a partition: atom `{atom}` in groups `{}` and `{}`",
                groups.0, groups.1
            ),
            ModelViolation::UncoveredAtom(a) => write!(f, "atom `{a}` belongs to no group"),
            ModelViolation::NoRoot => write!(f, "taxonomy has no root"),
            ModelViolation::MultipleRoots(r) => write!(f, "taxonomy has several roots: {r:?}"),
            ModelViolation::Cycle(n) => write!(f, "parent chain of `{n}` is cyclic"),
            ModelViolation::ExhaustiveLeaf(n) => {
                write!(f, "leaf `{n}` is marked exhaustive and would be empty")
            }
            ModelViolation::EmptyWorldSet => write!(f, "no feasible worlds"),
            ModelViolation::RootNotTop => write!(f, "root does not hold in every world"),
            ModelViolation::NotNested { child, parent } => {
                write!(f, "`{child}` is not contained in its parent `{parent}`")
            }
            ModelViolation::SiblingsOverlap(a, b) => {
                write!(f, "siblings `{a}` and `{b}` are not mutually exclusive")
            }
            ModelViolation::NeitherExclusiveNorNested(a, b) => {
                write!(f, "`{a}` and `{b}` are neither exclusive nor nested")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModelReport {
    pub violations: Vec<ModelViolation>,
}

impl ModelReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidModel(self))
        }
    }
}

impl fmt::Display for ModelReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn check_cap(count: u128, cap: usize) -> Result<()> {
    if count > cap as u128 {
        Err(Error::CapExceeded {
            what: "world",
            requested: count,
            cap: cap as u128,
        })
    } else {
        Ok(())
    }
}

/// One categorical attribute; `atoms[k]` is the predicate "attribute = values[k]".
#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub name: String,
    pub values: Vec<String>,
    pub atoms: Vec<AtomId>,
}

impl Group {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[AtomId] {
        &self.atoms
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalModel {
    registry: AtomRegistry,
    groups: Vec<Group>,
    /// (group, value) per atom; first listing wins for malformed inputs.
    atom_slot: Vec<Option<(usize, usize)>>,
}

impl CategoricalModel {
    /// Builds a validated model; atom names are `<group>.<value>`.
    pub fn new(groups: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut registry = AtomRegistry::new();
        let mut out = Vec::with_capacity(groups.len());
        for (name, values) in groups {
            let atoms = values
                .iter()
                .map(|v| registry.register(format!("{name}.{v}")))
                .collect::<Result<Vec<_>>>()?;
            out.push(Group { name, values, atoms });
        }
        let model = Self::from_raw(registry, out);
        model.validate().into_result()?;
        Ok(model)
    }

    pub fn with_values(groups: &[(&str, &[&str])]) -> Result<Self> {
        Self::new(
            groups
                .iter()
                .map(|(g, vs)| (g.to_string(), vs.iter().map(|v| v.to_string()).collect()))
                .collect(),
        )
    }

    /// Wraps caller-built groups without validation; see [`Self::validate`].
    pub fn from_raw(registry: AtomRegistry, groups: Vec<Group>) -> Self {
        let mut atom_slot = vec![None; registry.len()];
        for (g, group) in groups.iter().enumerate() {
            for (v, a) in group.atoms.iter().enumerate() {
                if let Some(slot) = atom_slot.get_mut(a.0) {
                    slot.get_or_insert((g, v));
                }
            }
        }
        Self {
            registry,
            groups,
            atom_slot,
        }
    }

    pub fn validate(&self) -> ModelReport {
        let mut violations = Vec::new();
        if self.groups.is_empty() {
            violations.push(ModelViolation::NoGroups);
        }
        let mut names = HashSet::new();
        let mut owner: HashMap<AtomId, usize> = HashMap::new();
        for (g, group) in self.groups.iter().enumerate() {
            if !names.insert(group.name.as_str()) {
                violations.push(ModelViolation::DuplicateGroup(group.name.clone()));
            }
            if group.atoms.is_empty() {
                violations.push(ModelViolation::EmptyGroup(group.name.clone()));
            }
            for &a in &group.atoms {
                if let Some(&prev) = owner.get(&a) {
                    violations.push(ModelViolation::SharedAtom {
                        atom: self.registry.name(a).to_string(),
                        groups: (self.groups[prev].name.clone(), group.name.clone()),
                    });
                } else {
                    owner.insert(a, g);
                }
            }
        }
        for a in self.registry.ids() {
            if !owner.contains_key(&a) {
                violations.push(ModelViolation::UncoveredAtom(self.registry.name(a).to_string()));
            }
        }
        ModelReport { violations }
    }

    pub fn registry(&self) -> &AtomRegistry {
        &self.registry
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group_of(&self, a: AtomId) -> usize {
        self.atom_slot[a.0].expect("atom belongs to a group").0
    }

    pub fn value_of(&self, a: AtomId) -> usize {
        self.atom_slot[a.0].expect("atom belongs to a group").1
    }

    pub fn atom(&self, group: usize, value: usize) -> AtomId {
        self.groups[group].atoms[value]
    }

    pub fn world_count(&self) -> u128 {
        self.groups.iter().map(|g| g.len() as u128).product()
    }

    pub fn world_for_assignment(&self, assignment: &[usize]) -> World {
        World::from_true_atoms(
            self.registry.len(),
            assignment.iter().enumerate().map(|(g, &v)| self.groups[g].atoms[v]),
        )
    }

    /// All value tuples in lexicographic order (first group most significant).
    pub fn assignments(&self) -> Assignments<'_> {
        Assignments {
            sizes: self.groups.iter().map(Group::len).collect(),
            next: if self.groups.iter().any(Group::is_empty) {
                None
            } else {
                Some(vec![0; self.groups.len()])
            },
            _model: self,
        }
    }

    pub fn enumerate_worlds(&self, cap: usize) -> Result<FeasibleWorldSet> {
        check_cap(self.world_count(), cap)?;
        let mut worlds = Vec::new();
        let mut labels = Vec::new();
        for a in self.assignments() {
            worlds.push(self.world_for_assignment(&a));
            labels.push(WorldLabel::Assignment(a));
        }
        Ok(FeasibleWorldSet { worlds, labels })
    }

    pub fn is_satisfiable(&self, f: &Formula) -> Result<bool> {
        check_cap(self.world_count(), DEFAULT_WORLD_CAP)?;
        for a in self.assignments() {
            if f.evaluate(&self.world_for_assignment(&a))? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

pub struct Assignments<'a> {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
    _model: &'a CategoricalModel,
}

impl Iterator for Assignments<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carry = true;
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.sizes[i] {
                carry = false;
                break;
            }
            succ[i] = 0;
        }
        if !carry {
            self.next = Some(succ);
        }
        Some(current)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaxonomyNode {
    pub name: String,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Children cover the node: its exclusive refinement is empty.
    pub exhaustive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default)]
    pub exhaustive: bool,
}

impl NodeSpec {
    pub fn new(name: &str, parent: Option<&str>) -> Self {
        Self {
            name: name.to_string(),
            parent: parent.map(str::to_string),
            exhaustive: false,
        }
    }
}

/// Rooted taxonomy; the atom of node `u` is `AtomId(u)`.
///
/// By default every node owns one world, "exactly this node and none of its
/// children", and a world makes true the atoms of its node and all ancestors.
/// Worlds may instead be listed explicitly as sets of true node names, in
/// which case [`TaxonomyModel::validate`] checks the tree claims against them.
#[derive(Clone, Debug, PartialEq)]
pub struct TaxonomyModel {
    registry: AtomRegistry,
    nodes: Vec<TaxonomyNode>,
    explicit_worlds: Option<Vec<World>>,
}

impl TaxonomyModel {
    /// Builds and validates a taxonomy.
    pub fn new(nodes: &[NodeSpec], worlds: Option<&[Vec<String>]>) -> Result<Self> {
        let model = Self::from_specs(nodes, worlds)?;
        model.validate().into_result()?;
        Ok(model)
    }

    /// Convenience: `(name, parent)` pairs, no exhaustive nodes, derived worlds.
    pub fn from_edges(edges: &[(&str, Option<&str>)]) -> Result<Self> {
        let specs: Vec<NodeSpec> = edges.iter().map(|(n, p)| NodeSpec::new(n, *p)).collect();
        Self::new(&specs, None)
    }

    /// Resolves names only; structural validity is left to [`Self::validate`].
    pub fn from_specs(nodes: &[NodeSpec], worlds: Option<&[Vec<String>]>) -> Result<Self> {
        let registry = AtomRegistry::from_names(nodes.iter().map(|n| n.name.clone()))?;
        let resolve = |name: &str| {
            registry
                .lookup(name)
                .ok()
                .filter(|id| registry.name(*id) == name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown taxonomy node `{name}`")))
        };
        let mut out: Vec<TaxonomyNode> = nodes
            .iter()
            .map(|n| TaxonomyNode {
                name: n.name.clone(),
                parent: None,
                children: Vec::new(),
                exhaustive: n.exhaustive,
            })
            .collect();
        for (i, n) in nodes.iter().enumerate() {
            if let Some(p) = &n.parent {
                let p = resolve(p)?.0;
                out[i].parent = Some(p);
                out[p].children.push(i);
            }
        }
        let explicit_worlds = worlds
            .map(|ws| {
                ws.iter()
                    .map(|names| {
                        let ids = names.iter().map(|n| resolve(n)).collect::<Result<Vec<_>>>()?;
                        Ok(World::from_true_atoms(registry.len(), ids))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Ok(Self {
            registry,
            nodes: out,
            explicit_worlds,
        })
    }

    pub fn registry(&self) -> &AtomRegistry {
        &self.registry
    }

    pub fn nodes(&self) -> &[TaxonomyNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.nodes
            .iter()
            .position(|n| n.parent.is_none())
            .expect("validated taxonomy has a root")
    }

    pub fn children(&self, u: usize) -> &[usize] {
        &self.nodes[u].children
    }

    pub fn has_explicit_worlds(&self) -> bool {
        self.explicit_worlds.is_some()
    }

    /// Node followed by its ancestors up to the root; `None` on a cycle.
    fn ancestors_or_self(&self, u: usize) -> Option<Vec<usize>> {
        let mut out = vec![u];
        let mut cur = u;
        while let Some(p) = self.nodes[cur].parent {
            if out.len() > self.nodes.len() {
                return None;
            }
            out.push(p);
            cur = p;
        }
        Some(out)
    }

    pub fn depth(&self) -> usize {
        (0..self.nodes.len())
            .filter_map(|u| self.ancestors_or_self(u).map(|a| a.len()))
            .max()
            .unwrap_or(0)
    }

    fn structural_violations(&self) -> Vec<ModelViolation> {
        let mut v = Vec::new();
        let roots: Vec<String> = self
            .nodes
            .iter()
            .filter(|n| n.parent.is_none())
            .map(|n| n.name.clone())
            .collect();
        match roots.len() {
            0 => v.push(ModelViolation::NoRoot),
            1 => {}
            _ => v.push(ModelViolation::MultipleRoots(roots)),
        }
        for (u, n) in self.nodes.iter().enumerate() {
            if self.ancestors_or_self(u).is_none() {
                v.push(ModelViolation::Cycle(n.name.clone()));
            }
            if n.exhaustive && n.children.is_empty() {
                v.push(ModelViolation::ExhaustiveLeaf(n.name.clone()));
            }
        }
        v
    }

    pub fn validate(&self) -> ModelReport {
        let mut violations = self.structural_violations();
        if !violations.is_empty() {
            return ModelReport { violations };
        }
        let ws = match self.enumerate_worlds(DEFAULT_WORLD_CAP) {
            Ok(ws) => ws,
            Err(_) => return ModelReport { violations },
        };
        if ws.is_empty() {
            violations.push(ModelViolation::EmptyWorldSet);
            return ModelReport { violations };
        }
        let events: Vec<Event> = self
            .registry
            .ids()
            .map(|a| ws.atom_event(a).expect("worlds cover the registry"))
            .collect();
        let name = |u: usize| self.nodes[u].name.clone();
        if !events[self.root()].is_full() {
            violations.push(ModelViolation::RootNotTop);
        }
        for (u, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                if !events[u].is_subset(&events[p]) {
                    violations.push(ModelViolation::NotNested {
                        child: name(u),
                        parent: name(p),
                    });
                }
            }
            for (k, &a) in n.children.iter().enumerate() {
                for &b in &n.children[k + 1..] {
                    if !events[a].is_disjoint(&events[b]) {
                        violations.push(ModelViolation::SiblingsOverlap(name(a), name(b)));
                    }
                }
            }
        }
        for i in 0..events.len() {
            for j in i + 1..events.len() {
                let both = events[i].intersection(&events[j]);
                if !(both.is_empty() || both == events[i] || both == events[j]) {
                    violations.push(ModelViolation::NeitherExclusiveNorNested(name(i), name(j)));
                }
            }
        }
        ModelReport { violations }
    }

    pub fn world_count(&self) -> usize {
        match &self.explicit_worlds {
            Some(ws) => ws.len(),
            None => self.nodes.iter().filter(|n| !n.exhaustive).count(),
        }
    }

    pub fn enumerate_worlds(&self, cap: usize) -> Result<FeasibleWorldSet> {
        check_cap(self.world_count() as u128, cap)?;
        let n = self.registry.len();
        let mut worlds = Vec::new();
        let mut labels = Vec::new();
        match &self.explicit_worlds {
            Some(explicit) => {
                let mut seen = HashSet::new();
                for w in explicit {
                    if seen.insert(w.clone()) {
                        let deepest = w
                            .true_atoms()
                            .max_by_key(|a| self.ancestors_or_self(a.0).map_or(0, |p| p.len()))
                            .map_or(0, |a| a.0);
                        worlds.push(w.clone());
                        labels.push(WorldLabel::Node(deepest));
                    }
                }
            }
            None => {
                for (u, node) in self.nodes.iter().enumerate() {
                    if node.exhaustive {
                        continue;
                    }
                    let path = self
                        .ancestors_or_self(u)
                        .ok_or_else(|| Error::InvalidInput(format!("cycle at `{}`", node.name)))?;
                    worlds.push(World::from_true_atoms(n, path.into_iter().map(AtomId)));
                    labels.push(WorldLabel::Node(u));
                }
            }
        }
        Ok(FeasibleWorldSet { worlds, labels })
    }

    pub fn is_satisfiable(&self, f: &Formula) -> Result<bool> {
        let ws = self.enumerate_worlds(DEFAULT_WORLD_CAP)?;
        Ok(!ws.event(f)?.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistributionModel {
    Categorical(CategoricalModel),
    Taxonomy(TaxonomyModel),
}

impl From<CategoricalModel> for DistributionModel {
    fn from(m: CategoricalModel) -> Self {
        DistributionModel::Categorical(m)
    }
}

impl From<TaxonomyModel> for DistributionModel {
    fn from(m: TaxonomyModel) -> Self {
        DistributionModel::Taxonomy(m)
    }
}

impl DistributionModel {
    pub fn registry(&self) -> &AtomRegistry {
        match self {
            DistributionModel::Categorical(m) => m.registry(),
            DistributionModel::Taxonomy(m) => m.registry(),
        }
    }

    pub fn validate(&self) -> ModelReport {
        match self {
            DistributionModel::Categorical(m) => m.validate(),
            DistributionModel::Taxonomy(m) => m.validate(),
        }
    }

    pub fn enumerate_worlds(&self, cap: usize) -> Result<FeasibleWorldSet> {
        match self {
            DistributionModel::Categorical(m) => m.enumerate_worlds(cap),
            DistributionModel::Taxonomy(m) => m.enumerate_worlds(cap),
        }
    }

    pub fn is_satisfiable(&self, f: &Formula) -> Result<bool> {
        match self {
            DistributionModel::Categorical(m) => m.is_satisfiable(f),
            DistributionModel::Taxonomy(m) => m.is_satisfiable(f),
        }
    }

    pub fn as_categorical(&self) -> Option<&CategoricalModel> {
        match self {
            DistributionModel::Categorical(m) => Some(m),
            DistributionModel::Taxonomy(_) => None,
        }
    }

    pub fn as_taxonomy(&self) -> Option<&TaxonomyModel> {
        match self {
            DistributionModel::Taxonomy(m) => Some(m),
            DistributionModel::Categorical(_) => None,
        }
    }
}

/// Feasible worlds of `model`, bounded by `cap`.
pub fn enumerate_worlds(model: &DistributionModel, cap: usize) -> Result<FeasibleWorldSet> {
    model.enumerate_worlds(cap)
}

/// Feasible worlds in which `a` holds.
pub fn atom_event(model: &DistributionModel, a: AtomId) -> Result<Event> {
    if !model.registry().contains(a) {
        return Err(Error::UnassignedAtom(a.0));
    }
    model.enumerate_worlds(DEFAULT_WORLD_CAP)?.atom_event(a)
}

pub fn validate_model(model: &DistributionModel) -> ModelReport {
    model.validate()
}

// ---------------------------------------------------------------------------
// JSON documents

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupDoc {
    pub name: String,
    pub values: Vec<String>,
    /// Terminal weights of the values; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaxonomyNodeDoc {
    #[serde(flatten)]
    pub spec: NodeSpec,
    /// Terminal mass of the node's own world; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelDoc {
    Categorical {
        groups: Vec<GroupDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        testbed: Option<TestbedConfig>,
    },
    Taxonomy {
        nodes: Vec<TaxonomyNodeDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        worlds: Option<Vec<Vec<String>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        testbed: Option<TestbedConfig>,
    },
}

/// A model plus the terminal weights and testbed settings stored alongside it.
#[derive(Clone, Debug)]
pub struct ModelFile {
    pub model: DistributionModel,
    /// Per-group value weights (categorical).
    pub group_weights: Option<Vec<Vec<f64>>>,
    /// Per-world weights in enumeration order (taxonomy).
    pub world_weights: Option<Vec<f64>>,
    pub testbed: TestbedConfig,
}

impl ModelFile {
    pub fn from_doc(doc: ModelDoc) -> Result<Self> {
        match doc {
            ModelDoc::Categorical { groups, testbed } => {
                let model = CategoricalModel::new(groups.iter().map(|g| (g.name.clone(), g.values.clone())).collect())?;
                let group_weights = if groups.iter().any(|g| g.weights.is_some()) {
                    Some(
                        groups
                            .iter()
                            .map(|g| {
                                g.weights
                                    .clone()
                                    .unwrap_or_else(|| vec![1.0 / g.values.len() as f64; g.values.len()])
                            })
                            .collect(),
                    )
                } else {
                    None
                };
                Ok(Self {
                    model: model.into(),
                    group_weights,
                    world_weights: None,
                    testbed: testbed.unwrap_or_default(),
                })
            }
            ModelDoc::Taxonomy { nodes, worlds, testbed } => {
                let specs: Vec<NodeSpec> = nodes.iter().map(|n| n.spec.clone()).collect();
                let model = TaxonomyModel::new(&specs, worlds.as_deref())?;
                let world_weights = if worlds.is_none() && nodes.iter().any(|n| n.weight.is_some()) {
                    Some(
                        nodes
                            .iter()
                            .filter(|n| !n.spec.exhaustive)
                            .map(|n| n.weight.unwrap_or(1.0))
                            .collect(),
                    )
                } else {
                    None
                };
                Ok(Self {
                    model: model.into(),
                    group_weights: None,
                    world_weights,
                    testbed: testbed.unwrap_or_default(),
                })
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
