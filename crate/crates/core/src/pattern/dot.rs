use std::fmt::Write;

use super::{bond_energy, AssertionStrength, Configuration};
use crate::error::Result;

/// Graphviz rendering of a configuration. Nodes are labeled
/// `concept/kind`; edges run from the donor to the acceptor site and carry
/// the bond kind and its `e_sem`.
pub fn to_dot<S: AssertionStrength + ?Sized>(config: &Configuration, strength: &S) -> Result<String> {
    let mut out = String::from("digraph configuration {\n");
    for (i, g) in config.sites().iter().enumerate() {
        let _ = writeln!(out, "  n{i} [label=\"{}/{}\"];", escape(g.concept.as_str()), g.kind.as_str());
    }
    for c in config.connector() {
        let from = &config.sites()[c.from.site];
        let to = &config.sites()[c.to.site];
        let kind = from.bonds[c.from.slot].kind;
        let e = bond_energy(strength, from, to)?;
        let _ = writeln!(out, "  n{} -> n{} [label=\"{kind} {e:.4}\"];", c.from.site, c.to.site);
    }
    out.push_str("}\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
