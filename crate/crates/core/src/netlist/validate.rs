//! Topology checks that make the MNA system singular or ill-posed.

use std::collections::HashMap;

use super::circuit::{Circuit, Element, Model, GROUND};
use super::parser::Diagnostic;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            false
        } else {
            self.parent[ra] = rb;
            true
        }
    }
}

/// Reports floating nodes, voltage-source loops, shorted sources and
/// dangling model references. An empty result means the circuit is simulable.
pub fn validate(c: &Circuit) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let nodes = c.nodes();
    let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let Some(&ground) = index.get(GROUND) else {
        diags.push(Diagnostic::global("no ground node `0`"));
        return diags;
    };

    let mut dc = UnionFind::new(nodes.len());
    let mut sources = UnionFind::new(nodes.len());
    for e in &c.elements {
        let ix = |n: &str| index[n];
        match e {
            Element::Resistor { a, b, .. } => {
                dc.union(ix(a), ix(b));
            }
            Element::Diode { anode, cathode, .. } => {
                dc.union(ix(anode), ix(cathode));
            }
            Element::Mosfet {
                drain,
                source,
                body,
                ..
            } => {
                // channel plus body junctions; the gate is insulated
                dc.union(ix(drain), ix(source));
                dc.union(ix(body), ix(source));
            }
            Element::VSource {
                name, plus, minus, ..
            } => {
                if plus == minus {
                    diags.push(Diagnostic::global(format!(
                        "shorted source `{name}`: both terminals on node `{plus}`"
                    )));
                    continue;
                }
                dc.union(ix(plus), ix(minus));
                if !sources.union(ix(plus), ix(minus)) {
                    diags.push(Diagnostic::global(format!(
                        "source loop: `{name}` closes a loop of voltage sources"
                    )));
                }
            }
            Element::Capacitor { .. } => {}
        }
        if let Some(m) = e.model() {
            let ok = matches!(
                (e, c.models.get(m)),
                (Element::Mosfet { .. }, Some(Model::Mosfet(_)))
                    | (Element::Diode { .. }, Some(Model::Diode(_)))
            );
            if !ok {
                diags.push(Diagnostic::global(format!(
                    "dangling model reference `{m}` in `{}`",
                    e.name()
                )));
            }
        }
    }
    let root = dc.find(ground);
    for (i, n) in nodes.iter().enumerate() {
        if dc.find(i) != root {
            diags.push(Diagnostic::global(format!(
                "node `{n}` has no DC path to ground"
            )));
        }
    }
    diags
}
