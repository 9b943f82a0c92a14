//! SPICE-subset netlist: parsing, topological validation, and
//! connected-component decomposition.
//!
//! Supported syntax (one element per line, `*` starts a comment,
//! `.end` is an optional terminator):
//!
//! ```text
//! V<name> <node+> 0 <volts>
//! R<name> <nodeA> <nodeB> <ohms>
//! C<name> <nodeA> <nodeB> <farads>
//! L<name> <nodeA> <nodeB> <henries>
//! I<name> <nodeA> <nodeB> <amps>
//! I<name> <nodeA> <nodeB> PWL(<t0> <i0> <t1> <i1> ...)
//! .ic V(<node>)=<volts>
//! .ic I(L<name>)=<amps>
//! .tran <h_seconds> <tstop_seconds>
//! ```
//!
//! Values accept engineering suffixes f p n u m k meg g t
//! (case-insensitive) and bare exponent notation. Node `0` is ground;
//! all other node names are case-sensitive.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use crate::waveform::Pwl;

/// A circuit node reference after classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Ground,
    /// Positive terminal of a voltage source, by dense source index.
    Source(usize),
    /// Neither ground nor a source terminal, by dense trivial index.
    Trivial(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchKind<T> {
    Resistor(T),
    Capacitor(T),
    Inductor(T),
    CurrentSource(Pwl<T>),
}

/// A two-terminal element that is not a voltage source. Current-source
/// current flows a -> b through the source, i.e. it is drawn from `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    pub name: String,
    pub a: Node,
    pub b: Node,
    pub kind: BranchKind<T>,
}

impl<T> Branch<T> {
    pub fn is_current_source(&self) -> bool {
        matches!(self.kind, BranchKind::CurrentSource(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSource<T> {
    pub element: String,
    /// Node name of the positive terminal.
    pub node: String,
    pub volts: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tran<T> {
    pub step: T,
    pub stop: T,
}

/// Validated in-memory circuit model.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit<T> {
    /// Trivial-node names; index into this table is the trivial index.
    pub trivial: Vec<String>,
    pub sources: Vec<VoltageSource<T>>,
    pub branches: Vec<Branch<T>>,
    pub tran: Tran<T>,
    /// `.ic V(node)=volts` entries (node name, volts).
    pub ic_voltages: Vec<(String, T)>,
    /// `.ic I(Lname)=amps` entries (element name, amps).
    pub ic_currents: Vec<(String, T)>,
    /// V elements whose negative terminal is not ground: (element, node).
    pub bad_negatives: Vec<(String, String)>,
}

impl<T: Scalar> Circuit<T> {
    pub fn trivial_index(&self, name: &str) -> Option<usize> {
        self.trivial.iter().position(|n| n == name)
    }

    /// Fixed voltage of a node, if it is ground or a source node.
    pub fn fixed_voltage(&self, node: Node) -> Option<T> {
        match node {
            Node::Ground => Some(T::zero()),
            Node::Source(s) => Some(self.sources[s].volts),
            Node::Trivial(_) => None,
        }
    }

    pub fn node_name(&self, node: Node) -> &str {
        match node {
            Node::Ground => "0",
            Node::Source(s) => &self.sources[s].node,
            Node::Trivial(i) => &self.trivial[i],
        }
    }

    pub fn has_inductors(&self) -> bool {
        self.branches
            .iter()
            .any(|b| matches!(b.kind, BranchKind::Inductor(_)))
    }

    /// Per-trivial-node current-source attachments `(waveform, sign)`;
    /// sign +1 at the `a` terminal (drawn), -1 at `b` (injected).
    pub fn current_attachments(&self) -> Vec<Vec<(Pwl<T>, T)>> {
        let mut out = vec![Vec::new(); self.trivial.len()];
        for b in &self.branches {
            if let BranchKind::CurrentSource(w) = &b.kind {
                if let Node::Trivial(i) = b.a {
                    out[i].push((w.clone(), T::one()));
                }
                if let Node::Trivial(i) = b.b {
                    out[i].push((w.clone(), -T::one()));
                }
            }
        }
        out
    }

    /// Resolved initial voltage across a capacitor branch (a minus b),
    /// if the `.ic` table pins one of its terminals.
    pub fn capacitor_ic(&self, branch: &Branch<T>) -> Option<T> {
        let ic_of = |node: Node| -> Option<T> {
            if let Node::Trivial(i) = node {
                let name = &self.trivial[i];
                self.ic_voltages
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| *v)
            } else {
                self.fixed_voltage(node)
            }
        };
        match (ic_of(branch.a), ic_of(branch.b)) {
            (Some(va), Some(vb)) => Some(va - vb),
            _ => None,
        }
    }

    pub fn inductor_ic(&self, name: &str) -> T {
        self.ic_currents
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(T::zero)
    }

    /// Re-emit the netlist text; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for s in &self.sources {
            out.push_str(&format!("{} {} 0 {}\n", s.element, s.node, s.volts));
        }
        for b in &self.branches {
            let a = self.node_name(b.a);
            let nb = self.node_name(b.b);
            match &b.kind {
                BranchKind::Resistor(v) | BranchKind::Capacitor(v) | BranchKind::Inductor(v) => {
                    out.push_str(&format!("{} {} {} {}\n", b.name, a, nb, v));
                }
                BranchKind::CurrentSource(w) => {
                    if w.is_dc() && w.points()[0].0 == T::zero() {
                        out.push_str(&format!("{} {} {} {}\n", b.name, a, nb, w.points()[0].1));
                    } else {
                        out.push_str(&format!("{} {} {} PWL(", b.name, a, nb));
                        for (k, (t, i)) in w.points().iter().enumerate() {
                            if k > 0 {
                                out.push(' ');
                            }
                            out.push_str(&format!("{} {}", t, i));
                        }
                        out.push_str(")\n");
                    }
                }
            }
        }
        for (node, v) in &self.ic_voltages {
            out.push_str(&format!(".ic V({})={}\n", node, v));
        }
        for (name, v) in &self.ic_currents {
            out.push_str(&format!(".ic I({})={}\n", name, v));
        }
        out.push_str(&format!(".tran {} {}\n", self.tran.step, self.tran.stop));
        out.push_str(".end\n");
        out
    }
}

/// One violated topological assumption.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Assumption 1: a V element's negative terminal is not ground.
    NonGroundNegative { element: String, node: String },
    /// Assumption 2: a trivial node whose incident branches are all
    /// current sources (or absent).
    CurrentOnlyNode { node: String },
    NoTrivialNodes,
    NoBranches,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonGroundNegative { element, node } => write!(
                f,
                "assumption 1: voltage source {} has non-ground negative terminal {}",
                element, node
            ),
            Violation::CurrentOnlyNode { node } => write!(
                f,
                "assumption 2: node {} has no incident R, C, or L branch",
                node
            ),
            Violation::NoTrivialNodes => write!(f, "circuit has no trivial nodes"),
            Violation::NoBranches => write!(f, "circuit has no branches"),
        }
    }
}

/// Parse engineering-notation value: number plus optional suffix.
fn parse_value(tok: &str) -> Option<f64> {
    let t = tok.trim();
    let b = t.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i == digits_start {
        return None;
    }
    // exponent only if e/E is followed by digits (else it is a suffix char)
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    let mantissa = &t[..i];
    let exp: i32 = match t[i..].to_ascii_lowercase().as_str() {
        "" => 0,
        "f" => -15,
        "p" => -12,
        "n" => -9,
        "u" => -6,
        "m" => -3,
        "k" => 3,
        "meg" => 6,
        "g" => 9,
        "t" => 12,
        _ => return None,
    };
    if exp == 0 {
        mantissa.parse().ok()
    } else if mantissa.contains(['e', 'E']) {
        // exponent and suffix together: scale after the fact
        Some(mantissa.parse::<f64>().ok()? * 10f64.powi(exp))
    } else {
        // append the exponent textually so "3f" parses exactly like "3e-15"
        format!("{}e{}", mantissa, exp).parse().ok()
    }
}

struct LineErr(usize);

impl LineErr {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.0,
            msg: msg.into(),
        }
    }
}

/// Parse a netlist into a [`Circuit`].
pub fn parse<T: Scalar>(text: &str) -> Result<Circuit<T>> {
    struct RawElem<'a> {
        line: usize,
        tokens: Vec<&'a str>,
        rest_after_nodes: &'a str,
    }

    let mut v_lines: Vec<RawElem> = Vec::new();
    let mut branch_lines: Vec<RawElem> = Vec::new();
    let mut tran: Option<Tran<T>> = None;
    let mut ic_voltages: Vec<(String, T)> = Vec::new();
    let mut ic_currents: Vec<(String, T)> = Vec::new();

    'lines: for (idx, raw) in text.lines().enumerate() {
        let at = LineErr(idx + 1);
        let line = raw.trim();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        if let Some(directive) = line.strip_prefix('.') {
            let lower = directive.to_ascii_lowercase();
            if lower == "end" || lower.starts_with("end ") {
                break 'lines;
            }
            if let Some(rest) = lower.strip_prefix("tran") {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if toks.len() != 2 {
                    return Err(at.err(".tran requires <step> <stop>"));
                }
                let step = parse_value(toks[0]).ok_or_else(|| at.err("bad .tran step"))?;
                let stop = parse_value(toks[1]).ok_or_else(|| at.err("bad .tran stop"))?;
                if step <= 0.0 || stop <= 0.0 {
                    return Err(at.err(".tran step and stop must be positive"));
                }
                tran = Some(Tran {
                    step: lit(step),
                    stop: lit(stop),
                });
                continue;
            }
            if directive.to_ascii_lowercase().starts_with("ic") {
                let rest = directive[2..].trim();
                let (kind, body) = rest.split_at(1);
                let body = body.trim_start();
                let open = body.find('(').ok_or_else(|| at.err("bad .ic syntax"))?;
                let close = body.find(')').ok_or_else(|| at.err("bad .ic syntax"))?;
                if open != 0 || close <= open {
                    return Err(at.err("bad .ic syntax"));
                }
                let target = body[open + 1..close].trim().to_string();
                let eq = body[close + 1..]
                    .trim_start()
                    .strip_prefix('=')
                    .ok_or_else(|| at.err("bad .ic syntax: expected `=`"))?;
                let value =
                    parse_value(eq.trim()).ok_or_else(|| at.err("bad .ic value"))?;
                match kind.to_ascii_uppercase().as_str() {
                    "V" => ic_voltages.push((target, lit(value))),
                    "I" => ic_currents.push((target, lit(value))),
                    _ => return Err(at.err("bad .ic: expected V(...) or I(...)")),
                }
                continue;
            }
            return Err(at.err(format!("unknown directive .{}", directive)));
        }

        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 4 {
            return Err(at.err("element line needs name, two nodes, and a value"));
        }
        // byte offset of the start of the 4th token, for PWL re-joining
        let mut rest = line;
        for _ in 0..3 {
            let cut = rest
                .find(char::is_whitespace)
                .expect("token count checked above");
            rest = rest[cut..].trim_start();
        }
        let elem = RawElem {
            line: idx + 1,
            tokens,
            rest_after_nodes: rest,
        };
        match elem.tokens[0].chars().next().unwrap().to_ascii_uppercase() {
            'V' => v_lines.push(elem),
            'R' | 'C' | 'L' | 'I' => branch_lines.push(elem),
            c => return Err(at.err(format!("unknown element type {}", c))),
        }
    }

    if v_lines.is_empty() && branch_lines.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no elements".into(),
        });
    }
    let tran = tran.ok_or(Error::Parse {
        line: 0,
        msg: "missing .tran directive".into(),
    })?;

    // Classify nodes. Source nodes are exactly the V positive terminals.
    let mut names: HashMap<String, usize> = HashMap::new(); // element name dedupe
    let mut sources: Vec<VoltageSource<T>> = Vec::new();
    let mut source_idx: HashMap<String, usize> = HashMap::new();
    let mut bad_negatives: Vec<(String, String)> = Vec::new();

    for e in &v_lines {
        let at = LineErr(e.line);
        if e.tokens.len() != 4 {
            return Err(at.err("V element: V<name> <node+> <node-> <volts>"));
        }
        let name = e.tokens[0].to_string();
        if names.insert(name.clone(), e.line).is_some() {
            return Err(at.err(format!("duplicate element name {}", name)));
        }
        let pos = e.tokens[1];
        let neg = e.tokens[2];
        if pos == "0" {
            return Err(at.err("V element positive terminal must not be ground"));
        }
        let volts = parse_value(e.tokens[3]).ok_or_else(|| at.err("bad voltage value"))?;
        if neg != "0" {
            bad_negatives.push((name.clone(), neg.to_string()));
        }
        if let Some(&s) = source_idx.get(pos) {
            if sources[s].volts != lit::<T>(volts) {
                return Err(at.err(format!(
                    "node {} pinned by two voltage sources with different values",
                    pos
                )));
            }
        } else {
            source_idx.insert(pos.to_string(), sources.len());
            sources.push(VoltageSource {
                element: name,
                node: pos.to_string(),
                volts: lit(volts),
            });
        }
    }
    // A source node must not appear as a V negative terminal.
    for e in &v_lines {
        let neg = e.tokens[2];
        if neg != "0" && source_idx.contains_key(neg) {
            return Err(LineErr(e.line).err(format!(
                "node {} is both a source node and a V negative terminal",
                neg
            )));
        }
    }

    let mut trivial: Vec<String> = Vec::new();
    let mut trivial_idx: HashMap<String, usize> = HashMap::new();
    let mut lookup = |name: &str| -> Node {
        if name == "0" {
            Node::Ground
        } else if let Some(&s) = source_idx.get(name) {
            Node::Source(s)
        } else if let Some(&t) = trivial_idx.get(name) {
            Node::Trivial(t)
        } else {
            let t = trivial.len();
            trivial_idx.insert(name.to_string(), t);
            trivial.push(name.to_string());
            Node::Trivial(t)
        }
    };
    // V negative terminals that are not ground become trivial nodes so the
    // violation can be reported against a concrete node.
    for (_, neg) in &bad_negatives {
        lookup(neg);
    }

    let mut branches: Vec<Branch<T>> = Vec::new();
    for e in &branch_lines {
        let at = LineErr(e.line);
        let name = e.tokens[0].to_string();
        if names.insert(name.clone(), e.line).is_some() {
            return Err(at.err(format!("duplicate element name {}", name)));
        }
        let na = e.tokens[1];
        let nb = e.tokens[2];
        if na == nb {
            return Err(at.err(format!("self-loop on node {}", na)));
        }
        let a = lookup(na);
        let b = lookup(nb);
        let kind_ch = e.tokens[0].chars().next().unwrap().to_ascii_uppercase();
        let kind = match kind_ch {
            'R' | 'C' | 'L' => {
                if e.tokens.len() != 4 {
                    return Err(at.err("element needs exactly one value"));
                }
                let v = parse_value(e.tokens[3]).ok_or_else(|| at.err("bad value"))?;
                if v <= 0.0 {
                    return Err(at.err(format!(
                        "nonpositive value {} for element {}",
                        v, name
                    )));
                }
                match kind_ch {
                    'R' => BranchKind::Resistor(lit(v)),
                    'C' => BranchKind::Capacitor(lit(v)),
                    _ => BranchKind::Inductor(lit(v)),
                }
            }
            'I' => {
                let rest = e.rest_after_nodes.trim();
                if rest.len() >= 3 && rest[..3].eq_ignore_ascii_case("pwl") {
                    let open = rest.find('(').ok_or_else(|| at.err("PWL: missing `(`"))?;
                    let close = rest.rfind(')').ok_or_else(|| at.err("PWL: missing `)`"))?;
                    let nums: Vec<f64> = rest[open + 1..close]
                        .split(|c: char| c.is_whitespace() || c == ',')
                        .filter(|s| !s.is_empty())
                        .map(|s| parse_value(s).ok_or_else(|| at.err("PWL: bad number")))
                        .collect::<Result<_>>()?;
                    if nums.is_empty() || nums.len() % 2 != 0 {
                        return Err(at.err("PWL: needs an even, nonzero number of values"));
                    }
                    let pts: Vec<(T, T)> = nums
                        .chunks(2)
                        .map(|p| (lit(p[0]), lit(p[1])))
                        .collect();
                    BranchKind::CurrentSource(Pwl::new(pts).map_err(|e| match e {
                        Error::Invalid(m) => at.err(m),
                        other => other,
                    })?)
                } else {
                    if e.tokens.len() != 4 {
                        return Err(at.err("current source needs one value or PWL(...)"));
                    }
                    let v = parse_value(e.tokens[3]).ok_or_else(|| at.err("bad value"))?;
                    BranchKind::CurrentSource(Pwl::dc(lit(v)))
                }
            }
            _ => unreachable!(),
        };
        branches.push(Branch { name, a, b, kind });
    }

    let circuit = Circuit {
        trivial,
        sources,
        branches,
        tran,
        ic_voltages,
        ic_currents,
        bad_negatives,
    };

    // .ic targets must exist and be resolvable.
    for (node, _) in &circuit.ic_voltages {
        let Some(ti) = circuit.trivial_index(node) else {
            return Err(Error::Invalid(format!(
                ".ic V({}): unknown trivial node",
                node
            )));
        };
        let pinnable = circuit.branches.iter().any(|b| {
            matches!(b.kind, BranchKind::Capacitor(_))
                && ((b.a == Node::Trivial(ti) && circuit.fixed_voltage(b.b).is_some())
                    || (b.b == Node::Trivial(ti) && circuit.fixed_voltage(b.a).is_some()))
        });
        if !pinnable {
            return Err(Error::Invalid(format!(
                ".ic V({}): node has no capacitor to ground or to a source node",
                node
            )));
        }
    }
    for (name, _) in &circuit.ic_currents {
        let ok = circuit
            .branches
            .iter()
            .any(|b| &b.name == name && matches!(b.kind, BranchKind::Inductor(_)));
        if !ok {
            return Err(Error::Invalid(format!(
                ".ic I({}): no inductor with that name",
                name
            )));
        }
    }

    Ok(circuit)
}

/// Check the solver's topological assumptions 1 and 2 (assumption 3 is
/// established per component by [`decompose`]). Violations are collected
/// exhaustively, never fail-fast.
pub fn validate<T: Scalar>(c: &Circuit<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    for (element, node) in &c.bad_negatives {
        out.push(Violation::NonGroundNegative {
            element: element.clone(),
            node: node.clone(),
        });
    }
    if c.trivial.is_empty() {
        out.push(Violation::NoTrivialNodes);
    }
    if c.branches.is_empty() {
        out.push(Violation::NoBranches);
    }
    let mut has_rcl = vec![false; c.trivial.len()];
    for b in &c.branches {
        if b.is_current_source() {
            continue;
        }
        if let Node::Trivial(i) = b.a {
            has_rcl[i] = true;
        }
        if let Node::Trivial(i) = b.b {
            has_rcl[i] = true;
        }
    }
    for (i, ok) in has_rcl.iter().enumerate() {
        if !ok {
            out.push(Violation::CurrentOnlyNode {
                node: c.trivial[i].clone(),
            });
        }
    }
    out
}

/// Result of [`decompose`].
pub struct Decomposition<T> {
    pub components: Vec<Circuit<T>>,
    /// Names of inert source-to-source branches dropped with a warning.
    pub dropped: Vec<String>,
}

/// Partition trivial nodes into connected components of the graph whose
/// edges are R/C/L branches between trivial nodes. Source nodes do not
/// connect components. Each sub-circuit carries its incident sources and
/// branches; a current source reaching out of a component has its far
/// endpoint rewritten to ground (the return path is irrelevant to this
/// component's node equations).
pub fn decompose<T: Scalar>(c: &Circuit<T>) -> Decomposition<T> {
    let n = c.trivial.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for b in &c.branches {
        if b.is_current_source() {
            continue;
        }
        if let (Node::Trivial(i), Node::Trivial(j)) = (b.a, b.b) {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
            parent[ri] = rj;
            }
        }
    }
    // components ordered by their lowest trivial index
    let mut comp_of = vec![usize::MAX; n];
    let mut comp_nodes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if comp_of[r] == usize::MAX {
            comp_of[r] = comp_nodes.len();
            comp_nodes.push(Vec::new());
        }
        comp_of[i] = comp_of[r];
        comp_nodes[comp_of[r]].push(i);
    }

    let mut dropped = Vec::new();
    let mut components = Vec::new();
    for nodes in &comp_nodes {
        let mut new_idx = HashMap::new();
        let mut trivial = Vec::new();
        for (k, &i) in nodes.iter().enumerate() {
            new_idx.insert(i, k);
            trivial.push(c.trivial[i].clone());
        }
        let in_comp = |node: Node| matches!(node, Node::Trivial(i) if new_idx.contains_key(&i));

        let mut src_map: HashMap<usize, usize> = HashMap::new();
        let mut sources = Vec::new();
        let mut branches = Vec::new();
        for b in &c.branches {
            if !in_comp(b.a) && !in_comp(b.b) {
                continue;
            }
            let mut remap = |node: Node| -> Node {
                match node {
                    Node::Ground => Node::Ground,
                    Node::Trivial(i) => match new_idx.get(&i) {
                        Some(&k) => Node::Trivial(k),
                        // only reachable for current sources spanning components
                        None => Node::Ground,
                    },
                    Node::Source(s) => {
                        let k = *src_map.entry(s).or_insert_with(|| {
                            sources.push(c.sources[s].clone());
                            sources.len() - 1
                        });
                        Node::Source(k)
                    }
                }
            };
            branches.push(Branch {
                name: b.name.clone(),
                a: remap(b.a),
                b: remap(b.b),
                kind: b.kind.clone(),
            });
        }
        let ic_voltages = c
            .ic_voltages
            .iter()
            .filter(|(n, _)| trivial.iter().any(|t| t == n))
            .cloned()
            .collect();
        let ic_currents = c
            .ic_currents
            .iter()
            .filter(|(n, _)| branches.iter().any(|b| &b.name == n))
            .cloned()
            .collect();
        components.push(Circuit {
            trivial,
            sources,
            branches,
            tran: c.tran,
            ic_voltages,
            ic_currents,
            bad_negatives: Vec::new(),
        });
    }
    // inert source-to-source / source-to-ground branches appear in no component
    for b in &c.branches {
        let touches_trivial =
            matches!(b.a, Node::Trivial(_)) || matches!(b.b, Node::Trivial(_));
        if !touches_trivial {
            dropped.push(b.name.clone());
        }
    }
    Decomposition {
        components,
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rc_netlist() -> &'static str {
        "VDD vdd 0 1.0\nR1 vdd n1 1.0\nC1 n1 0 1e-12\n.tran 1e-12 1e-11\n.end\n"
    }

    #[test]
    fn empty_text_is_error() {
        assert!(parse::<f64>("").is_err());
    }

    #[test]
    fn smallest_rc_circuit() {
        let c: Circuit<f64> = parse(rc_netlist()).unwrap();
        assert_eq!(c.sources.len(), 1);
        assert_eq!(c.trivial, vec!["n1".to_string()]);
        assert_eq!(c.branches.len(), 2);
        assert!(validate(&c).is_empty());
    }

    #[test]
    fn suffix_expansion() {
        assert_eq!(parse_value("1k"), Some(1000.0));
        assert_eq!(parse_value("2.5meg"), Some(2.5e6));
        assert_eq!(parse_value("10m"), Some(0.01));
        assert_eq!(parse_value("3f"), Some(3e-15));
        assert_eq!(parse_value("1e-12"), Some(1e-12));
        assert_eq!(parse_value("-4.2P"), Some(-4.2e-12));
        assert_eq!(parse_value("1x"), None);
        assert_eq!(parse_value("k"), None);
    }

    #[test]
    fn missing_tran_is_error() {
        assert!(parse::<f64>("R1 a 0 1\n").is_err());
    }

    #[test]
    fn nonpositive_element_value_is_error() {
        assert!(parse::<f64>("R1 a 0 0\n.tran 1 1\n").is_err());
        assert!(parse::<f64>("C1 a 0 -1e-12\n.tran 1 1\n").is_err());
    }

    #[test]
    fn duplicate_element_name_is_error() {
        let t = "R1 a 0 1\nR1 b 0 1\n.tran 1 1\n";
        assert!(parse::<f64>(t).is_err());
    }

    #[test]
    fn source_and_negative_conflict_is_error() {
        let t = "V1 a 0 1\nV2 b a 1\nR1 b 0 1\n.tran 1 1\n";
        assert!(parse::<f64>(t).is_err());
    }

    #[test]
    fn non_ground_negative_is_violation() {
        let t = "V1 a x 1\nR1 a 0 1\nR2 x 0 1\n.tran 1 1\n";
        let c: Circuit<f64> = parse(t).unwrap();
        let v = validate(&c);
        assert!(v.iter().any(|v| matches!(
            v,
            Violation::NonGroundNegative { element, .. } if element == "V1"
        )));
    }

    #[test]
    fn current_only_node_is_violation() {
        let t = "VDD vdd 0 1\nR1 vdd n1 1\nC1 n1 0 1p\nI1 n2 0 1m\n.tran 1n 10n\n";
        let c: Circuit<f64> = parse(t).unwrap();
        let v = validate(&c);
        assert_eq!(
            v,
            vec![Violation::CurrentOnlyNode {
                node: "n2".to_string()
            }]
        );
    }

    #[test]
    fn pwl_current_source() {
        let t = "I1 n1 0 PWL(0 0 1n 1m, 2n 0)\nR1 n1 0 1\n.tran 1n 10n\n";
        let c: Circuit<f64> = parse(t).unwrap();
        match &c.branches[0].kind {
            BranchKind::CurrentSource(w) => {
                assert_eq!(w.points(), &[(0.0, 0.0), (1e-9, 1e-3), (2e-9, 0.0)])
            }
            _ => panic!("expected current source"),
        }
    }

    #[test]
    fn two_clusters_through_source_node_decompose() {
        let t = "VDD vdd 0 1\n\
                 R1 vdd a 1\nC1 a 0 1p\n\
                 R2 vdd b 1\nC2 b 0 1p\n\
                 .tran 1p 10p\n";
        let c: Circuit<f64> = parse(t).unwrap();
        assert!(validate(&c).is_empty());
        let d = decompose(&c);
        assert_eq!(d.components.len(), 2);
        // disjoint trivial nodes covering everything
        assert_eq!(d.components[0].trivial, vec!["a".to_string()]);
        assert_eq!(d.components[1].trivial, vec!["b".to_string()]);
        for comp in &d.components {
            assert!(validate(comp).is_empty());
        }
    }

    #[test]
    fn meshed_grid_is_one_component() {
        let t = "VDD vdd 0 1\n\
                 R1 vdd a 1\nR2 a b 1\nR3 b c 1\nR4 c d 1\nR5 d a 1\n\
                 C1 a 0 1p\n\
                 .tran 1p 10p\n";
        let c: Circuit<f64> = parse(t).unwrap();
        assert_eq!(decompose(&c).components.len(), 1);
    }

    #[test]
    fn singleton_component() {
        let c: Circuit<f64> = parse(rc_netlist()).unwrap();
        let d = decompose(&c);
        assert_eq!(d.components.len(), 1);
        assert_eq!(d.components[0].trivial.len(), 1);
    }

    #[test]
    fn inert_source_source_branch_dropped() {
        let t = "V1 a 0 1\nV2 b 0 2\nR1 a b 1\nR2 a n1 1\nC1 n1 0 1p\n.tran 1p 10p\n";
        let c: Circuit<f64> = parse(t).unwrap();
        let d = decompose(&c);
        assert_eq!(d.dropped, vec!["R1".to_string()]);
        assert_eq!(d.components.len(), 1);
        assert!(d.components[0].branches.iter().all(|b| b.name != "R1"));
    }

    #[test]
    fn serialize_round_trip() {
        let t = "VDD vdd 0 1.0\nR1 vdd n1 1.5k\nC1 n1 0 1e-12\nL1 n1 n2 1n\n\
                 R2 n2 0 2\nI1 n2 0 PWL(0 0 1e-9 1e-3)\n\
                 .ic V(n1)=0.5\n.ic I(L1)=1e-3\n.tran 1e-12 1e-11\n.end\n";
        let c: Circuit<f64> = parse(t).unwrap();
        let again: Circuit<f64> = parse(&c.serialize()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn ic_on_unpinnable_node_is_error() {
        let t = "R1 a 0 1\nC1 a b 1p\nR2 b 0 1\n.ic V(a)=1\n.tran 1 1\n";
        assert!(parse::<f64>(t).is_err());
    }
}
