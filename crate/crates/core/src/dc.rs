//! Iterative DC analysis on the resistive network and the three-step
//! initialization that produces V(0) and V(1) from the element initial
//! conditions: capacitors pinned as voltage sources, inductors injected
//! as current sources, then one forward-difference element update and a
//! second pinned solve at t = h.

use crate::error::{Error, Result};
use crate::netlist::{BranchKind, Circuit, Node};
use crate::scalar::Scalar;
use crate::transient::SolveConfig;

/// A resistive neighbor: another free/pinned trivial node, or a node at
/// a fixed voltage (source or ground).
#[derive(Debug, Clone, Copy)]
pub enum Nbr<T> {
    Node(usize),
    Fixed(T),
}

/// Resistive network with pins and injections, ready for SOR sweeps.
#[derive(Debug, Clone)]
pub struct DcProblem<T> {
    pub neighbors: Vec<Vec<(Nbr<T>, T)>>,
    /// Total resistive conductance at each node.
    pub diag: Vec<T>,
    /// Net current drawn from each node (sources + inductor injections).
    pub inject: Vec<T>,
    /// Pinned nodes (capacitor pins during initialization) and voltages.
    pub pinned: Vec<Option<T>>,
    /// Node names for error reporting.
    names: Vec<String>,
}

impl<T: Scalar> DcProblem<T> {
    /// Resistive adjacency of a circuit, with no pins or injections.
    pub fn resistive(c: &Circuit<T>) -> Self {
        let n = c.trivial.len();
        let mut p = DcProblem {
            neighbors: vec![Vec::new(); n],
            diag: vec![T::zero(); n],
            inject: vec![T::zero(); n],
            pinned: vec![None; n],
            names: c.trivial.clone(),
        };
        for b in &c.branches {
            if let BranchKind::Resistor(r) = b.kind {
                let g = T::one() / r;
                match (b.a, b.b) {
                    (Node::Trivial(i), Node::Trivial(j)) => {
                        p.neighbors[i].push((Nbr::Node(j), g));
                        p.neighbors[j].push((Nbr::Node(i), g));
                        p.diag[i] += g;
                        p.diag[j] += g;
                    }
                    (Node::Trivial(i), other) | (other, Node::Trivial(i)) => {
                        let v = c.fixed_voltage(other).expect("non-trivial endpoint");
                        p.neighbors[i].push((Nbr::Fixed(v), g));
                        p.diag[i] += g;
                    }
                    _ => {}
                }
            }
        }
        p
    }

    /// KCL residual `sum g_ij (V_i - V_j) + I_i` at node `i`.
    pub fn residual(&self, v: &[T], i: usize) -> T {
        let mut r = self.inject[i];
        for &(nbr, g) in &self.neighbors[i] {
            let vj = match nbr {
                Nbr::Node(j) => v[j],
                Nbr::Fixed(f) => f,
            };
            r += g * (v[i] - vj);
        }
        r
    }
}

/// Gauss-Seidel/SOR sweeps over free nodes in ascending index until the
/// max per-node update drops below `tol`.
pub fn dc_solve<T: Scalar>(
    p: &DcProblem<T>,
    tol: T,
    omega: T,
    max_iter: usize,
) -> Result<Vec<T>> {
    if !(omega > T::zero() && omega < T::from_f64(2.0).unwrap()) {
        return Err(Error::Invalid(format!(
            "relaxation omega must be in (0, 2), got {}",
            omega
        )));
    }
    if !(tol > T::zero()) {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    let n = p.diag.len();
    let mut v: Vec<T> = (0..n)
        .map(|i| p.pinned[i].unwrap_or_else(T::zero))
        .collect();
    for i in 0..n {
        if p.pinned[i].is_none() && !(p.diag[i] > T::zero()) {
            return Err(Error::ZeroDiagonal {
                node: p.names.get(i).cloned().unwrap_or_else(|| format!("#{}", i)),
            });
        }
    }
    let one = T::one();
    let mut last_delta = T::zero();
    for _ in 0..max_iter {
        let mut max_delta = T::zero();
        for i in 0..n {
            if p.pinned[i].is_some() {
                continue;
            }
            let mut acc = -p.inject[i];
            for &(nbr, g) in &p.neighbors[i] {
                let vj = match nbr {
                    Nbr::Node(j) => v[j],
                    Nbr::Fixed(f) => f,
                };
                acc += g * vj;
            }
            let gs = acc / p.diag[i];
            let new_v = if omega == one {
                gs
            } else {
                omega * gs + (one - omega) * v[i]
            };
            max_delta = max_delta.max((new_v - v[i]).abs());
            v[i] = new_v;
        }
        if max_delta < tol {
            return Ok(v);
        }
        last_delta = max_delta;
    }
    Err(Error::NonConvergence {
        step: 0,
        iters: max_iter,
        residual: last_delta.to_f64().unwrap_or(f64::NAN),
    })
}

/// Capacitor pinning record resolved during initialization.
#[derive(Debug, Clone)]
struct CapPin<T> {
    branch: usize,
    node: usize,
    /// True when the pinned trivial node is the branch's `a` terminal.
    node_is_a: bool,
    other_v: T,
    farads: T,
    v_c0: T,
}

#[derive(Debug, Clone)]
struct IndState<T> {
    branch: usize,
    a: Node,
    b: Node,
    henries: T,
    i0: T,
}

/// V(0), V(1), and the recovered element states of the initialization.
#[derive(Debug, Clone)]
pub struct InitState<T> {
    pub v0: Vec<T>,
    pub v1: Vec<T>,
    /// Per capacitor branch: (element name, i_c(0)).
    pub i_c0: Vec<(String, T)>,
    /// Per inductor branch: (element name, v_l(0)).
    pub v_l0: Vec<(String, T)>,
    pub v_c_h: Vec<(String, T)>,
    pub i_l_h: Vec<(String, T)>,
}

/// Three-step transient initialization: DC solve at t=0 with storage
/// elements held at their initial conditions, a forward-difference
/// update of those conditions, and a re-solve at t=h.
pub fn initialize<T: Scalar>(c: &Circuit<T>, h: T, cfg: &SolveConfig<T>) -> Result<InitState<T>> {
    let base = DcProblem::resistive(c);
    let rail = c.sources.first().map(|s| s.volts).unwrap_or_else(T::zero);

    // Resolve capacitor pins. Default: grid precharged, node at the rail.
    let mut caps: Vec<CapPin<T>> = Vec::new();
    let mut inductors: Vec<IndState<T>> = Vec::new();
    for (bi, b) in c.branches.iter().enumerate() {
        match b.kind {
            BranchKind::Capacitor(farads) => {
                let (node, node_is_a, other) = match (b.a, b.b) {
                    (Node::Trivial(i), other) if c.fixed_voltage(other).is_some() => {
                        (i, true, other)
                    }
                    (other, Node::Trivial(i)) if c.fixed_voltage(other).is_some() => {
                        (i, false, other)
                    }
                    (Node::Trivial(_), Node::Trivial(_)) => {
                        if c.capacitor_ic(b).is_some() {
                            return Err(Error::Unsupported(format!(
                                "capacitor {} floats between two trivial nodes; an explicit \
                                 initial condition on it cannot be pinned",
                                b.name
                            )));
                        }
                        // open at DC, no pin
                        continue;
                    }
                    _ => continue, // both terminals fixed: inert
                };
                let other_v = c.fixed_voltage(other).unwrap();
                let v_c0 = match c.capacitor_ic(b) {
                    Some(v) => v,
                    // default: node precharged to the rail
                    None => {
                        if node_is_a {
                            rail - other_v
                        } else {
                            other_v - rail
                        }
                    }
                };
                caps.push(CapPin {
                    branch: bi,
                    node,
                    node_is_a,
                    other_v,
                    farads,
                    v_c0,
                });
            }
            BranchKind::Inductor(henries) => {
                inductors.push(IndState {
                    branch: bi,
                    a: b.a,
                    b: b.b,
                    henries,
                    i0: c.inductor_ic(&b.name),
                });
            }
            _ => {}
        }
    }

    let pin_voltage = |cap: &CapPin<T>, v_c: T| -> T {
        if cap.node_is_a {
            cap.other_v + v_c
        } else {
            cap.other_v - v_c
        }
    };

    let solve_at = |t: T, cap_v: &[T], il: &[T]| -> Result<Vec<T>> {
        let mut p = base.clone();
        for (cap, &vc) in caps.iter().zip(cap_v) {
            let v = pin_voltage(cap, vc);
            if let Some(prev) = p.pinned[cap.node] {
                if (prev - v).abs() > cfg.tol {
                    return Err(Error::Invalid(format!(
                        "conflicting capacitor pins at node {}",
                        c.trivial[cap.node]
                    )));
                }
            }
            p.pinned[cap.node] = Some(v);
        }
        for (i, atts) in c.current_attachments().iter().enumerate() {
            for (w, sign) in atts {
                p.inject[i] += *sign * w.eval(t);
            }
        }
        for (ind, &i_l) in inductors.iter().zip(il) {
            if let Node::Trivial(i) = ind.a {
                p.inject[i] += i_l;
            }
            if let Node::Trivial(i) = ind.b {
                p.inject[i] -= i_l;
            }
        }
        dc_solve(&p, cfg.tol, cfg.omega, cfg.max_inner)
    };

    // Step 1: pinned solve at t = 0.
    let cap_v0: Vec<T> = caps.iter().map(|cp| cp.v_c0).collect();
    let il_0: Vec<T> = inductors.iter().map(|ind| ind.i0).collect();
    let v0 = solve_at(T::zero(), &cap_v0, &il_0)?;

    // Recover i_c(0) as KCL residuals at pinned nodes, shared between
    // parallel capacitors in proportion to their capacitance.
    let mut residual_p = base.clone();
    for (i, atts) in c.current_attachments().iter().enumerate() {
        for (w, sign) in atts {
            residual_p.inject[i] += *sign * w.eval(T::zero());
        }
    }
    for ind in &inductors {
        if let Node::Trivial(i) = ind.a {
            residual_p.inject[i] += ind.i0;
        }
        if let Node::Trivial(i) = ind.b {
            residual_p.inject[i] -= ind.i0;
        }
    }
    let mut cap_sum_at = vec![T::zero(); c.trivial.len()];
    for cap in &caps {
        cap_sum_at[cap.node] += cap.farads;
    }
    let mut i_c0 = Vec::with_capacity(caps.len());
    for cap in &caps {
        let into_caps = -residual_p.residual(&v0, cap.node);
        let share = into_caps * cap.farads / cap_sum_at[cap.node];
        let i_c = if cap.node_is_a { share } else { -share };
        i_c0.push((c.branches[cap.branch].name.clone(), i_c));
    }
    let node_voltage = |v: &[T], node: Node| -> T {
        match node {
            Node::Trivial(i) => v[i],
            other => c.fixed_voltage(other).unwrap(),
        }
    };
    let v_l0: Vec<(String, T)> = inductors
        .iter()
        .map(|ind| {
            let vl = node_voltage(&v0, ind.a) - node_voltage(&v0, ind.b);
            (c.branches[ind.branch].name.clone(), vl)
        })
        .collect();

    // Step 2: forward-difference element update to t = h.
    let cap_vh: Vec<T> = caps
        .iter()
        .zip(&i_c0)
        .map(|(cap, (_, ic))| cap.v_c0 + h / cap.farads * *ic)
        .collect();
    let il_h: Vec<T> = inductors
        .iter()
        .zip(&v_l0)
        .map(|(ind, (_, vl))| ind.i0 + h / ind.henries * *vl)
        .collect();

    // Step 3: pinned solve at t = h.
    let v1 = solve_at(h, &cap_vh, &il_h)?;

    Ok(InitState {
        v0,
        v1,
        i_c0,
        v_l0,
        v_c_h: caps
            .iter()
            .zip(&cap_vh)
            .map(|(cap, &v)| (c.branches[cap.branch].name.clone(), v))
            .collect(),
        i_l_h: inductors
            .iter()
            .zip(&il_h)
            .map(|(ind, &i)| (c.branches[ind.branch].name.clone(), i))
            .collect(),
    })
}
