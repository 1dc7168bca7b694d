//! Role hierarchies: a single-root DAG per organization where ancestors
//! inherit the access rights of their descendants.
//!
//! Text format, one statement per line (`#` starts a comment):
//!
//! ```text
//! org: hospital
//! root: board
//! board -> director
//! director -> doctor
//! role: auditor        # declares a role without edges
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a system authority / organization.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrgId(pub String);

impl OrgId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OrgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for OrgId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// A role `name` managed by authority `org`. Ordered by `(org, name)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RoleId {
    pub org: OrgId,
    pub name: String,
}

impl RoleId {
    pub fn new(org: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            org: OrgId(org.into()),
            name: name.into(),
        }
    }
}

impl fmt::Display for RoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.org, self.name)
    }
}

impl FromStr for RoleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('/') {
            Some((org, name)) if !org.is_empty() && !name.is_empty() => Ok(RoleId::new(org, name)),
            _ => Err(Error::UnknownRole(s.to_owned())),
        }
    }
}

impl Serialize for RoleId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RoleId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `R_r`: every role on some path from the root down to `role`, inclusive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AncestorSet {
    pub role: RoleId,
    pub members: BTreeSet<RoleId>,
}

impl AncestorSet {
    pub fn contains(&self, role: &RoleId) -> bool {
        self.members.contains(role)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleHierarchy {
    org: OrgId,
    root: RoleId,
    children: BTreeMap<RoleId, BTreeSet<RoleId>>,
    parents: BTreeMap<RoleId, BTreeSet<RoleId>>,
    ancestors: BTreeMap<RoleId, BTreeSet<RoleId>>,
}

/// Builds and validates a hierarchy from `(parent, child)` role names.
pub fn build_hierarchy(org: &OrgId, root: &str, edges: &[(&str, &str)]) -> Result<RoleHierarchy> {
    RoleHierarchy::build(org, root, &[], edges)
}

impl RoleHierarchy {
    /// `declared` lists roles that may appear without any edge.
    pub fn build(
        org: &OrgId,
        root: &str,
        declared: &[&str],
        edges: &[(&str, &str)],
    ) -> Result<Self> {
        let id = |name: &str| RoleId::new(org.0.clone(), name);
        let root = id(root);

        let mut children: BTreeMap<RoleId, BTreeSet<RoleId>> = BTreeMap::new();
        let mut parents: BTreeMap<RoleId, BTreeSet<RoleId>> = BTreeMap::new();
        for name in declared
            .iter()
            .copied()
            .chain(std::iter::once(root.name.as_str()))
        {
            children.entry(id(name)).or_default();
            parents.entry(id(name)).or_default();
        }
        for (p, c) in edges {
            let (p, c) = (id(p), id(c));
            if p == c {
                return Err(Error::CycleDetected(p.to_string()));
            }
            children.entry(p.clone()).or_default().insert(c.clone());
            children.entry(c.clone()).or_default();
            parents.entry(c).or_default().insert(p.clone());
            parents.entry(p).or_default();
        }

        if let Some(node) = find_cycle(&children) {
            return Err(Error::CycleDetected(node.to_string()));
        }

        let reachable = reachable_from(&root, &children);
        let unreachable: Vec<&RoleId> = children
            .keys()
            .filter(|r| !reachable.contains(*r))
            .collect();
        if let Some(other_root) = unreachable
            .iter()
            .find(|r| parents[**r].is_empty() && !children[**r].is_empty())
        {
            return Err(Error::MultipleRoots(other_root.to_string()));
        }
        if let Some(orphan) = unreachable.first() {
            return Err(Error::UnreachableRole(orphan.to_string()));
        }

        let ancestors = children
            .keys()
            .map(|r| (r.clone(), collect_ancestors(r, &parents)))
            .collect();

        Ok(Self {
            org: org.clone(),
            root,
            children,
            parents,
            ancestors,
        })
    }

    /// Parses the line-oriented text format. `default_org` is used when the
    /// text has no `org:` header.
    pub fn parse(text: &str, default_org: Option<&OrgId>) -> Result<Self> {
        let mut org = default_org.cloned();
        let mut root = None;
        let mut declared = Vec::new();
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |reason: &str| Error::HierarchySyntax {
                line: idx + 1,
                reason: reason.to_owned(),
            };
            if let Some((p, c)) = line.split_once("->") {
                let (p, c) = (p.trim(), c.trim());
                if p.is_empty() || c.is_empty() {
                    return Err(syntax("edge needs a parent and a child"));
                }
                edges.push((p.to_owned(), c.to_owned()));
            } else if let Some((key, value)) = line.split_once(':') {
                let value = value.trim();
                if value.is_empty() {
                    return Err(syntax("empty value"));
                }
                match key.trim() {
                    "org" => org = Some(OrgId::new(value)),
                    "root" => root = Some(value.to_owned()),
                    "role" => declared.push(value.to_owned()),
                    _ => return Err(syntax("unknown header")),
                }
            } else {
                return Err(syntax("expected `parent -> child` or `key: value`"));
            }
        }
        let org = org.ok_or_else(|| Error::HierarchySyntax {
            line: 0,
            reason: "missing `org:` header".into(),
        })?;
        let root = root.ok_or_else(|| Error::HierarchySyntax {
            line: 0,
            reason: "missing `root:` header".into(),
        })?;
        let declared: Vec<&str> = declared.iter().map(String::as_str).collect();
        let edges: Vec<(&str, &str)> = edges
            .iter()
            .map(|(p, c)| (p.as_str(), c.as_str()))
            .collect();
        Self::build(&org, &root, &declared, &edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("org: {}\nroot: {}\n", self.org, self.root.name);
        for (parent, kids) in &self.children {
            for child in kids {
                out.push_str(&format!("{} -> {}\n", parent.name, child.name));
            }
        }
        for (role, kids) in &self.children {
            if kids.is_empty() && self.parents[role].is_empty() && *role != self.root {
                out.push_str(&format!("role: {}\n", role.name));
            }
        }
        out
    }

    pub fn org(&self) -> &OrgId {
        &self.org
    }

    pub fn root(&self) -> &RoleId {
        &self.root
    }

    /// `Ψ_k`, in `(org, name)` order.
    pub fn roles(&self) -> impl Iterator<Item = &RoleId> {
        self.children.keys()
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn contains(&self, role: &RoleId) -> bool {
        self.children.contains_key(role)
    }

    pub fn role(&self, name: &str) -> Result<RoleId> {
        let id = RoleId::new(self.org.0.clone(), name);
        if self.contains(&id) {
            Ok(id)
        } else {
            Err(Error::UnknownRole(id.to_string()))
        }
    }

    pub fn parents_of(&self, role: &RoleId) -> Result<&BTreeSet<RoleId>> {
        self.parents
            .get(role)
            .ok_or_else(|| Error::UnknownRole(role.to_string()))
    }

    pub fn children_of(&self, role: &RoleId) -> Result<&BTreeSet<RoleId>> {
        self.children
            .get(role)
            .ok_or_else(|| Error::UnknownRole(role.to_string()))
    }

    pub fn ancestor_set(&self, role: &RoleId) -> Result<AncestorSet> {
        self.ancestors_of(role).map(|members| AncestorSet {
            role: role.clone(),
            members: members.clone(),
        })
    }

    pub(crate) fn ancestors_of(&self, role: &RoleId) -> Result<&BTreeSet<RoleId>> {
        self.ancestors
            .get(role)
            .ok_or_else(|| Error::UnknownRole(role.to_string()))
    }

    /// Whether holding `held` grants access to data encrypted for `target`.
    pub fn is_qualified(&self, held: &RoleId, target: &RoleId) -> Result<bool> {
        if !self.contains(held) {
            return Err(Error::UnknownRole(held.to_string()));
        }
        Ok(self.ancestors_of(target)?.contains(held))
    }

    /// Every role whose ancestor set contains `role` (including `role`).
    pub fn descendants_inclusive(&self, role: &RoleId) -> Result<BTreeSet<RoleId>> {
        if !self.contains(role) {
            return Err(Error::UnknownRole(role.to_string()));
        }
        Ok(self
            .ancestors
            .iter()
            .filter(|(_, anc)| anc.contains(role))
            .map(|(r, _)| r.clone())
            .collect())
    }
}

fn find_cycle(children: &BTreeMap<RoleId, BTreeSet<RoleId>>) -> Option<RoleId> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: BTreeMap<&RoleId, Mark> = BTreeMap::new();
    for start in children.keys() {
        if marks.contains_key(start) {
            continue;
        }
        // iterative DFS; stack holds (node, next child index)
        let mut stack: Vec<(&RoleId, usize)> = vec![(start, 0)];
        marks.insert(start, Mark::Open);
        while let Some((node, idx)) = stack.pop() {
            let kids: Vec<&RoleId> = children[node].iter().collect();
            if idx < kids.len() {
                stack.push((node, idx + 1));
                let next = kids[idx];
                match marks.get(next) {
                    Some(Mark::Open) => return Some(next.clone()),
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(next, Mark::Open);
                        stack.push((next, 0));
                    }
                }
            } else {
                marks.insert(node, Mark::Done);
            }
        }
    }
    None
}

fn reachable_from(
    root: &RoleId,
    children: &BTreeMap<RoleId, BTreeSet<RoleId>>,
) -> BTreeSet<RoleId> {
    let mut seen = BTreeSet::new();
    let mut todo = vec![root.clone()];
    while let Some(r) = todo.pop() {
        if seen.insert(r.clone()) {
            todo.extend(children[&r].iter().cloned());
        }
    }
    seen
}

fn collect_ancestors(
    role: &RoleId,
    parents: &BTreeMap<RoleId, BTreeSet<RoleId>>,
) -> BTreeSet<RoleId> {
    let mut seen = BTreeSet::new();
    let mut todo = vec![role.clone()];
    while let Some(r) = todo.pop() {
        if seen.insert(r.clone()) {
            todo.extend(parents[&r].iter().cloned());
        }
    }
    seen
}
