//! Per-node update stencils for the matrix-free solver.
//!
//! For each trivial node the stencil holds the diagonal coefficient,
//! neighbor weights split into lower/upper index sets for the
//! Gauss-Seidel sweep order, and the constant injections from fixed
//! (source or ground) neighbors. The implied matrix has diagonal `d_i`
//! and off-diagonal `-(g_ij + h/L_ij)`, identical to the densely
//! assembled system matrix `C/h + G + hL`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::netlist::{BranchKind, Circuit, Node};
use crate::scalar::{lit, Scalar};
use crate::waveform::Pwl;

/// A trivial neighbor in the sweep, with both the combined weight and
/// the raw branch sums so `h` can be re-derived without re-parsing.
#[derive(Debug, Clone)]
pub struct NeighborEntry<T> {
    pub node: usize,
    /// `(g_ij + h/L_ij) / d_i`
    pub weight: T,
    pub g: T,
    pub inv_l: T,
}

/// One term of the `-sum g_ij V_j(t)` history sum. Fixed entries carry
/// the pinned source voltage (0 for ground).
#[derive(Debug, Clone)]
pub enum RTerm<T> {
    Trivial(usize),
    Fixed(T),
}

#[derive(Debug, Clone)]
pub struct NodeStencil<T> {
    /// `d_i = sum g_ij + h * sum 1/L_ij + C_i/h` over all neighbors.
    pub diag: T,
    /// Trivial neighbors with index below this node (ascending).
    pub lower: Vec<NeighborEntry<T>>,
    /// Trivial neighbors with index above this node (ascending).
    pub upper: Vec<NeighborEntry<T>>,
    /// `h * sum (1/L_ij) * Vdd_j` over inductors to source nodes.
    pub src_inject: T,
    /// `sum g_ij * Vdd_j` over resistors to source nodes. Appears with
    /// `+` in the constant and again inside the history sum with `-`;
    /// the two cancel, mirroring the discretized node equation literally.
    pub src_g_inject: T,
    /// Node-to-ground (or node-to-source) capacitance `C_i`.
    pub cap: T,
    /// `sum g_ij` over all resistor neighbors, fixed ones included.
    pub g_row_sum: T,
    /// Resistor neighbors for the history term, with conductance.
    pub r_history: Vec<(RTerm<T>, T)>,
}

#[derive(Debug, Clone)]
pub struct StencilSet<T> {
    pub h: T,
    pub stencils: Vec<NodeStencil<T>>,
    /// Per-node current-source attachments `(waveform, sign)`.
    pub currents: Vec<Vec<(Pwl<T>, T)>>,
    has_inductors: bool,
}

/// Build the stencils for one validated component at step `h`.
/// Parallel branches between the same node pair are merged
/// (conductances add, inverse inductances add, capacitances add).
pub fn build_stencils<T: Scalar>(c: &Circuit<T>, h: T) -> Result<StencilSet<T>> {
    if h <= T::zero() {
        return Err(Error::Invalid("step h must be positive".into()));
    }
    let n = c.trivial.len();
    // merged trivial-trivial couplings: (i, j) with i < j -> (g, 1/L)
    let mut pairs: BTreeMap<(usize, usize), (T, T)> = BTreeMap::new();
    let mut g_fixed: Vec<Vec<(T, T)>> = vec![Vec::new(); n]; // (volts, g)
    let mut invl_fixed_sum = vec![T::zero(); n];
    let mut src_inject_raw = vec![T::zero(); n]; // sum (1/L)*Vdd
    let mut cap = vec![T::zero(); n];
    let mut has_inductors = false;

    for b in &c.branches {
        let ends = (b.a, b.b);
        match &b.kind {
            BranchKind::Resistor(r) => {
                let g = T::one() / *r;
                match ends {
                    (Node::Trivial(i), Node::Trivial(j)) => {
                        let key = (i.min(j), i.max(j));
                        let e = pairs.entry(key).or_insert((T::zero(), T::zero()));
                        e.0 += g;
                    }
                    (Node::Trivial(i), other) | (other, Node::Trivial(i)) => {
                        let v = c.fixed_voltage(other).expect("non-trivial endpoint");
                        g_fixed[i].push((v, g));
                    }
                    _ => {} // inert
                }
            }
            BranchKind::Inductor(l) => {
                has_inductors = true;
                let invl = T::one() / *l;
                match ends {
                    (Node::Trivial(i), Node::Trivial(j)) => {
                        let key = (i.min(j), i.max(j));
                        let e = pairs.entry(key).or_insert((T::zero(), T::zero()));
                        e.1 += invl;
                    }
                    (Node::Trivial(i), other) | (other, Node::Trivial(i)) => {
                        let v = c.fixed_voltage(other).expect("non-trivial endpoint");
                        invl_fixed_sum[i] += invl;
                        src_inject_raw[i] += invl * v;
                    }
                    _ => {}
                }
            }
            BranchKind::Capacitor(farads) => match ends {
                (Node::Trivial(_), Node::Trivial(_)) => {
                    return Err(Error::Unsupported(format!(
                        "capacitor {} couples two trivial nodes; the matrix-free path \
                         supports node-to-ground (or node-to-source) capacitance only — \
                         use the dense reference path",
                        b.name
                    )));
                }
                (Node::Trivial(i), _) | (_, Node::Trivial(i)) => cap[i] += *farads,
                _ => {}
            },
            BranchKind::CurrentSource(_) => {}
        }
    }

    // neighbor lists per node from the merged pair map
    let mut nbrs: Vec<Vec<(usize, T, T)>> = vec![Vec::new(); n];
    for (&(i, j), &(g, invl)) in &pairs {
        nbrs[i].push((j, g, invl));
        nbrs[j].push((i, g, invl));
    }
    for list in &mut nbrs {
        list.sort_by_key(|e| e.0);
    }

    let mut stencils = Vec::with_capacity(n);
    for i in 0..n {
        let mut g_row_sum: T = g_fixed[i].iter().map(|&(_, g)| g).sum();
        let mut invl_sum = invl_fixed_sum[i];
        for &(_, g, invl) in &nbrs[i] {
            g_row_sum += g;
            invl_sum += invl;
        }
        let diag = g_row_sum + h * invl_sum + cap[i] / h;
        if !(diag > T::zero()) {
            return Err(Error::ZeroDiagonal {
                node: c.trivial[i].clone(),
            });
        }
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for &(j, g, invl) in &nbrs[i] {
            let entry = NeighborEntry {
                node: j,
                weight: (g + h * invl) / diag,
                g,
                inv_l: invl,
            };
            if j < i {
                lower.push(entry);
            } else {
                upper.push(entry);
            }
        }
        let mut r_history: Vec<(RTerm<T>, T)> = Vec::new();
        let mut src_g_inject = T::zero();
        for &(v, g) in &g_fixed[i] {
            r_history.push((RTerm::Fixed(v), g));
            src_g_inject += g * v;
        }
        for &(j, g, _) in &nbrs[i] {
            if g > T::zero() {
                r_history.push((RTerm::Trivial(j), g));
            }
        }
        stencils.push(NodeStencil {
            diag,
            lower,
            upper,
            src_inject: h * src_inject_raw[i],
            src_g_inject,
            cap: cap[i],
            g_row_sum,
            r_history,
        });
    }

    Ok(StencilSet {
        h,
        stencils,
        currents: c.current_attachments(),
        has_inductors,
    })
}

impl<T: Scalar> StencilSet<T> {
    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    pub fn has_inductors(&self) -> bool {
        self.has_inductors
    }

    /// Net current drawn from node `i` at time `t`.
    pub fn current_at(&self, i: usize, t: T) -> T {
        self.currents[i]
            .iter()
            .map(|(w, sign)| *sign * w.eval(t))
            .sum()
    }

    /// The sweep-invariant constant `K_i(t+h, t, t-h)` of the
    /// second-order per-node recurrence.
    pub fn rhs_constant(&self, i: usize, v_t: &[T], v_tmh: &[T], i_tph: T, i_t: T) -> T {
        let s = &self.stencils[i];
        let two = lit::<T>(2.0);
        let mut num = s.src_inject + s.src_g_inject
            + (two * s.cap / self.h + s.g_row_sum) * v_t[i]
            - s.cap / self.h * v_tmh[i]
            - (i_tph - i_t);
        for (term, g) in &s.r_history {
            let vj = match term {
                RTerm::Trivial(j) => v_t[*j],
                RTerm::Fixed(v) => *v,
            };
            num = num - *g * vj;
        }
        num / s.diag
    }

    /// All `K_i` for the step from `t_old` to `t_new`, given the two
    /// history vectors.
    pub fn step_constants(&self, v_t: &[T], v_tmh: &[T], t_new: T, t_old: T) -> Vec<T> {
        (0..self.len())
            .map(|i| {
                let i_tph = self.current_at(i, t_new);
                let i_t = self.current_at(i, t_old);
                self.rhs_constant(i, v_t, v_tmh, i_tph, i_t)
            })
            .collect()
    }

    /// One plain Gauss-Seidel sweep in ascending node order; lower
    /// neighbors see already-updated values. Returns the max |change|.
    pub fn sweep_gs(&self, v: &mut [T], k: &[T]) -> T {
        let mut max_delta = T::zero();
        for (i, s) in self.stencils.iter().enumerate() {
            let mut acc = k[i];
            for e in &s.lower {
                acc += e.weight * v[e.node];
            }
            for e in &s.upper {
                acc += e.weight * v[e.node];
            }
            max_delta = max_delta.max((acc - v[i]).abs());
            v[i] = acc;
        }
        max_delta
    }

    /// One SOR sweep: the Gauss-Seidel value blended with the previous
    /// iterate through `omega`. Returns the max |applied change|.
    pub fn sweep_sor(&self, v: &mut [T], k: &[T], omega: T) -> T {
        let mut max_delta = T::zero();
        for (i, s) in self.stencils.iter().enumerate() {
            let mut acc = k[i];
            for e in &s.lower {
                acc += e.weight * v[e.node];
            }
            for e in &s.upper {
                acc += e.weight * v[e.node];
            }
            let new_v = omega * acc + (T::one() - omega) * v[i];
            max_delta = max_delta.max((new_v - v[i]).abs());
            v[i] = new_v;
        }
        max_delta
    }
}

/// First-order (RC) sweep data derived from the same raw adjacency:
/// diagonal `C_i/h + sum g_ij`, weights `g_ij / d_i`.
#[derive(Debug, Clone)]
pub struct FirstOrderSet<T> {
    pub h: T,
    pub diag: Vec<T>,
    /// Trivial resistor neighbors, split by sweep order.
    pub lower: Vec<Vec<(usize, T)>>,
    pub upper: Vec<Vec<(usize, T)>>,
    /// `sum g * Vdd` over fixed resistor neighbors.
    pub src_g: Vec<T>,
    pub cap: Vec<T>,
}

impl<T: Scalar> StencilSet<T> {
    /// Derive the first-order view. Errors when inductors are present.
    pub fn first_order(&self) -> Result<FirstOrderSet<T>> {
        if self.has_inductors {
            return Err(Error::Invalid(
                "first-order RC mode requires an inductor-free circuit".into(),
            ));
        }
        let n = self.len();
        let mut out = FirstOrderSet {
            h: self.h,
            diag: Vec::with_capacity(n),
            lower: vec![Vec::new(); n],
            upper: vec![Vec::new(); n],
            src_g: Vec::with_capacity(n),
            cap: Vec::with_capacity(n),
        };
        for (i, s) in self.stencils.iter().enumerate() {
            let d = s.cap / self.h + s.g_row_sum;
            if !(d > T::zero()) {
                return Err(Error::ZeroDiagonal {
                    node: format!("#{}", i),
                });
            }
            for e in s.lower.iter() {
                out.lower[i].push((e.node, e.g / d));
            }
            for e in s.upper.iter() {
                out.upper[i].push((e.node, e.g / d));
            }
            out.diag.push(d);
            out.src_g.push(s.src_g_inject);
            out.cap.push(s.cap);
        }
        Ok(out)
    }
}

impl<T: Scalar> FirstOrderSet<T> {
    /// Constants for one backward-Euler step of the first-order
    /// recurrence `(C/h + G) x(t+h) = (C/h) x(t) - i(t+h) + G_0 Vdd`.
    pub fn step_constants(&self, stencils: &StencilSet<T>, v_t: &[T], t_new: T) -> Vec<T> {
        (0..self.diag.len())
            .map(|i| {
                (self.src_g[i] + self.cap[i] / self.h * v_t[i] - stencils.current_at(i, t_new))
                    / self.diag[i]
            })
            .collect()
    }

    pub fn sweep_gs(&self, v: &mut [T], k: &[T]) -> T {
        let mut max_delta = T::zero();
        for i in 0..self.diag.len() {
            let mut acc = k[i];
            for &(j, w) in &self.lower[i] {
                acc += w * v[j];
            }
            for &(j, w) in &self.upper[i] {
                acc += w * v[j];
            }
            max_delta = max_delta.max((acc - v[i]).abs());
            v[i] = acc;
        }
        max_delta
    }

    pub fn sweep_sor(&self, v: &mut [T], k: &[T], omega: T) -> T {
        let mut max_delta = T::zero();
        for i in 0..self.diag.len() {
            let mut acc = k[i];
            for &(j, w) in &self.lower[i] {
                acc += w * v[j];
            }
            for &(j, w) in &self.upper[i] {
                acc += w * v[j];
            }
            let new_v = omega * acc + (T::one() - omega) * v[i];
            max_delta = max_delta.max((new_v - v[i]).abs());
            v[i] = new_v;
        }
        max_delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse;

    #[test]
    fn single_node_rc_stencil() {
        // R g=1 S to Vdd, C=1e-12 F to ground, h=1e-12 -> d = 1 + 1 = 2
        let c: Circuit<f64> =
            parse("VDD vdd 0 1\nR1 vdd n1 1\nC1 n1 0 1e-12\n.tran 1e-12 1e-11\n").unwrap();
        let s = build_stencils(&c, 1e-12).unwrap();
        let st = &s.stencils[0];
        assert_eq!(st.diag, 2.0);
        assert!(st.lower.is_empty() && st.upper.is_empty());
        assert_eq!(st.g_row_sum, 1.0);
        assert_eq!(st.cap, 1e-12);
        assert_eq!(st.src_g_inject, 1.0);
    }

    #[test]
    fn inductor_only_node_stencil() {
        // L=1e-9 H to Vdd, h=1e-12 -> d = 1e-12/1e-9 = 1e-3, src_inject = 1e-3 * Vdd
        let c: Circuit<f64> =
            parse("VDD vdd 0 1\nL1 vdd n1 1e-9\nR1 n1 0 1e6\n.tran 1e-12 1e-11\n").unwrap();
        let s = build_stencils(&c, 1e-12).unwrap();
        let st = &s.stencils[0];
        assert!((st.diag - (1e-3 + 1e-6)).abs() < 1e-18);
        assert!((st.src_inject - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn parallel_resistors_merge() {
        let c: Circuit<f64> = parse(
            "VDD vdd 0 1\nR0 vdd n1 1\nR1 n1 n2 2\nR2 n1 n2 2\nC1 n1 0 1p\nC2 n2 0 1p\n\
             .tran 1p 10p\n",
        )
        .unwrap();
        let s = build_stencils(&c, 1e-12).unwrap();
        // two 0.5 S resistors merge into one neighbor entry of g = 1.0
        assert_eq!(s.stencils[0].upper.len(), 1);
        assert_eq!(s.stencils[0].upper[0].g, 1.0);
        assert_eq!(s.stencils[1].lower.len(), 1);
        assert_eq!(s.stencils[1].lower[0].g, 1.0);
    }

    #[test]
    fn trivial_trivial_capacitor_rejected() {
        let c: Circuit<f64> =
            parse("R1 a 0 1\nC1 a b 1p\nR2 b 0 1\n.tran 1p 10p\n").unwrap();
        assert!(matches!(
            build_stencils(&c, 1e-12),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn rhs_constant_homogeneous_is_zero() {
        let c: Circuit<f64> =
            parse("R1 a b 1\nR2 b 0 1\nC1 a 0 1p\n.tran 1p 10p\n").unwrap();
        let s = build_stencils(&c, 1e-12).unwrap();
        for i in 0..s.len() {
            assert_eq!(s.rhs_constant(i, &[0.0, 0.0], &[0.0, 0.0], 0.0, 0.0), 0.0);
        }
    }

    #[test]
    fn rhs_constant_steady_state_fixed_point() {
        // Steady RC node at Vdd: the update must reproduce Vdd exactly,
        // matching the dense recurrence row (rhs = 2, d = 2).
        let c: Circuit<f64> =
            parse("VDD vdd 0 1\nR1 vdd n1 1\nC1 n1 0 1e-12\n.tran 1e-12 1e-11\n").unwrap();
        let s = build_stencils(&c, 1e-12).unwrap();
        let k = s.rhs_constant(0, &[1.0], &[1.0], 0.0, 0.0);
        assert_eq!(k, 1.0);
    }

    #[test]
    fn rhs_constant_current_step_term() {
        let c: Circuit<f64> =
            parse("VDD vdd 0 1\nR1 vdd n1 1\nC1 n1 0 1e-12\n.tran 1e-12 1e-11\n").unwrap();
        let s = build_stencils(&c, 1e-12).unwrap();
        let k = s.rhs_constant(0, &[0.0], &[0.0], 1e-3, 0.0);
        // isolates -(I(t+h) - I(t)) / d_i on top of the source inject terms
        let base = s.rhs_constant(0, &[0.0], &[0.0], 0.0, 0.0);
        assert!((k - (base - 1e-3 / 2.0)).abs() < 1e-18);
    }

    #[test]
    fn weight_symmetry() {
        let c: Circuit<f64> = parse(
            "VDD vdd 0 1\nR1 vdd a 1\nR2 a b 3\nL1 a b 2n\nC1 a 0 1p\nC2 b 0 2p\n\
             .tran 1p 10p\n",
        )
        .unwrap();
        let s = build_stencils(&c, 1e-12).unwrap();
        let (a, b) = (&s.stencils[0], &s.stencils[1]);
        let w_ab = a.upper[0].weight;
        let w_ba = b.lower[0].weight;
        assert!((a.diag * w_ab - b.diag * w_ba).abs() < 1e-15 * a.diag);
    }

    #[test]
    fn single_node_direct_assignment() {
        let c: Circuit<f64> =
            parse("VDD vdd 0 1\nR1 vdd n1 1\nC1 n1 0 1e-12\n.tran 1e-12 1e-11\n").unwrap();
        let s = build_stencils(&c, 1e-12).unwrap();
        let mut v = vec![0.0];
        let d = s.sweep_gs(&mut v, &[0.5]);
        assert_eq!(v, vec![0.5]);
        assert_eq!(d, 0.5);
    }
}
