use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::{CpgEdge, EdgeKind, PropertyGraph};
use crate::frontend::{ControlKind, NodeId, NodeLabel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CfgError {
    #[error("goto at line {line} references undefined label `{label}`")]
    UndefinedLabel { label: String, line: u32 },
}

/// Statement-level control flow. Expression-internal nodes carry no CFG edges;
/// `for` loops run init, then the loop node (its condition), body, update.
pub fn build_cfg(graph: &PropertyGraph) -> Result<Vec<CpgEdge>, CfgError> {
    let labels = graph
        .nodes
        .iter()
        .filter(|n| n.label == NodeLabel::JumpTarget && n.control == Some(ControlKind::Label))
        .filter_map(|n| n.name.clone().map(|name| (name, n.id)))
        .collect();
    let mut builder =
        Builder { graph, edges: BTreeSet::new(), labels, breaks: Vec::new(), continues: Vec::new() };
    let entry = graph.node(graph.entry);
    let body = entry.children[entry.children.len() - 2];
    let first = builder.stmt(body, graph.exit)?;
    builder.edge(graph.entry, first);
    Ok(builder.edges.into_iter().map(|(s, d)| CpgEdge::new(s, d, EdgeKind::Cfg)).collect())
}

struct Builder<'g> {
    graph: &'g PropertyGraph,
    edges: BTreeSet<(NodeId, NodeId)>,
    labels: HashMap<String, NodeId>,
    breaks: Vec<NodeId>,
    continues: Vec<NodeId>,
}

impl Builder<'_> {
    fn edge(&mut self, src: NodeId, dst: NodeId) {
        if src != dst {
            self.edges.insert((src, dst));
        }
    }

    fn in_loop<T>(&mut self, brk: NodeId, cont: Option<NodeId>, f: impl FnOnce(&mut Self) -> T) -> T {
        self.breaks.push(brk);
        if let Some(c) = cont {
            self.continues.push(c);
        }
        let r = f(self);
        self.breaks.pop();
        if cont.is_some() {
            self.continues.pop();
        }
        r
    }

    /// Wires statement `id` so control continues at `follow`; returns its entry node.
    fn stmt(&mut self, id: NodeId, follow: NodeId) -> Result<NodeId, CfgError> {
        let node = self.graph.node(id);
        let children = &node.children;
        match node.label {
            NodeLabel::Block => {
                let mut next = follow;
                for &c in children.iter().rev() {
                    next = self.stmt(c, next)?;
                }
                Ok(next)
            }
            NodeLabel::Local => Ok(follow),
            NodeLabel::Return => {
                self.edge(id, self.graph.exit);
                Ok(id)
            }
            NodeLabel::ControlStructure => match node.control {
                Some(ControlKind::If { has_else }) => {
                    let then = self.stmt(children[1], follow)?;
                    let otherwise = if has_else { self.stmt(children[2], follow)? } else { follow };
                    self.edge(id, then);
                    self.edge(id, otherwise);
                    Ok(id)
                }
                Some(ControlKind::While) => {
                    let body = self.in_loop(follow, Some(id), |b| b.stmt(children[1], id))?;
                    self.edge(id, body);
                    self.edge(id, follow);
                    Ok(id)
                }
                Some(ControlKind::DoWhile) => {
                    let body = self.in_loop(follow, Some(id), |b| b.stmt(children[0], id))?;
                    self.edge(id, body);
                    self.edge(id, follow);
                    Ok(body)
                }
                Some(ControlKind::For { init, cond, update }) => {
                    let init_node = init.then(|| children[0]);
                    let update_node = update.then(|| children[usize::from(init) + usize::from(cond)]);
                    let body = *children.last().expect("for has a body");
                    let back = update_node.unwrap_or(id);
                    if let Some(u) = update_node {
                        self.edge(u, id);
                    }
                    let body_entry = self.in_loop(follow, Some(back), |b| b.stmt(body, back))?;
                    self.edge(id, body_entry);
                    self.edge(id, follow);
                    match init_node {
                        Some(i) => {
                            self.edge(i, id);
                            Ok(i)
                        }
                        None => Ok(id),
                    }
                }
                Some(ControlKind::Switch) => {
                    let body = children[1];
                    self.in_loop(follow, None, |b| b.stmt(body, follow))?;
                    let mut has_default = false;
                    for target in self.case_targets(body) {
                        has_default |= self.graph.node(target).control == Some(ControlKind::Default);
                        self.edge(id, target);
                    }
                    if !has_default {
                        self.edge(id, follow);
                    }
                    Ok(id)
                }
                Some(ControlKind::Goto) => {
                    let label = node.name.clone().unwrap_or_default();
                    let target = *self
                        .labels
                        .get(&label)
                        .ok_or(CfgError::UndefinedLabel { label, line: node.line })?;
                    self.edge(id, target);
                    Ok(id)
                }
                Some(ControlKind::Break) => {
                    let target = self.breaks.last().copied().unwrap_or(follow);
                    self.edge(id, target);
                    Ok(id)
                }
                Some(ControlKind::Continue) => {
                    let target = self.continues.last().copied().unwrap_or(follow);
                    self.edge(id, target);
                    Ok(id)
                }
                _ => {
                    self.edge(id, follow);
                    Ok(id)
                }
            },
            _ => {
                self.edge(id, follow);
                Ok(id)
            }
        }
    }

    /// `case`/`default` targets belonging to one switch body (not to nested switches).
    fn case_targets(&self, body: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![body];
        while let Some(id) = stack.pop() {
            let n = self.graph.node(id);
            match n.control {
                Some(ControlKind::Case | ControlKind::Default) => out.push(id),
                Some(ControlKind::Switch) => continue,
                _ => {}
            }
            stack.extend(n.children.iter().rev());
        }
        out.sort();
        out
    }
}
