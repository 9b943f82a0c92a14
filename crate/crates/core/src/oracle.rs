//! Dense reference implementation: incidence-matrix assembly, system
//! matrices, direct transient solve, and the structural checks behind
//! the positive-definiteness argument. Verification only — never the
//! fast path.

use crate::dc;
use crate::dense::{Cholesky, Matrix};
use crate::error::{Error, Result};
use crate::netlist::{BranchKind, Circuit, Node};
use crate::scalar::{lit, Scalar};
use crate::topology::StencilSet;
use crate::transient::{ModeUsed, SolveConfig};
use crate::waveform::{Pwl, WaveformSet};

/// Column of an incidence row: trivial node or source node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Col {
    Trivial(usize),
    Source(usize),
}

/// One branch row of the grouped incidence matrices: at most one +1
/// (branch source end) and one -1 (sink end); ground entries omitted.
#[derive(Debug, Clone)]
pub struct BranchRow<T> {
    pub entries: Vec<(Col, T)>,
    /// Element value: ohms / farads / henries; unused for I rows.
    pub value: T,
}

/// The modified and source incidence matrices, rows grouped by kind.
#[derive(Debug, Clone)]
pub struct IncidenceSet<T> {
    pub n: usize,
    pub p: usize,
    pub g_rows: Vec<BranchRow<T>>,
    pub c_rows: Vec<BranchRow<T>>,
    pub l_rows: Vec<BranchRow<T>>,
    pub i_rows: Vec<(BranchRow<T>, Pwl<T>)>,
    /// Source voltages, length `p`.
    pub v_d: Vec<T>,
}

pub fn build_incidence<T: Scalar>(c: &Circuit<T>) -> IncidenceSet<T> {
    let mut inc = IncidenceSet {
        n: c.trivial.len(),
        p: c.sources.len(),
        g_rows: Vec::new(),
        c_rows: Vec::new(),
        l_rows: Vec::new(),
        i_rows: Vec::new(),
        v_d: c.sources.iter().map(|s| s.volts).collect(),
    };
    let col = |node: Node| -> Option<Col> {
        match node {
            Node::Ground => None,
            Node::Trivial(i) => Some(Col::Trivial(i)),
            Node::Source(s) => Some(Col::Source(s)),
        }
    };
    for b in &c.branches {
        let mut entries = Vec::new();
        if let Some(cc) = col(b.a) {
            entries.push((cc, T::one()));
        }
        if let Some(cc) = col(b.b) {
            entries.push((cc, -T::one()));
        }
        match &b.kind {
            BranchKind::Resistor(v) => inc.g_rows.push(BranchRow {
                entries,
                value: *v,
            }),
            BranchKind::Capacitor(v) => inc.c_rows.push(BranchRow {
                entries,
                value: *v,
            }),
            BranchKind::Inductor(v) => inc.l_rows.push(BranchRow {
                entries,
                value: *v,
            }),
            BranchKind::CurrentSource(w) => inc.i_rows.push((
                BranchRow {
                    entries,
                    value: T::zero(),
                },
                w.clone(),
            )),
        }
    }
    inc
}

/// Densely assembled system matrices for one component at step `h`.
#[derive(Debug, Clone)]
pub struct DenseSystem<T> {
    pub n: usize,
    pub p: usize,
    pub h: T,
    pub g: Matrix<T>,
    pub c: Matrix<T>,
    pub l: Matrix<T>,
    pub g_s: Matrix<T>,
    /// Trivial-by-source inductance cross couplings (n x p).
    pub l_s: Matrix<T>,
    /// System matrix `M = C/h + G + h L`.
    pub m: Matrix<T>,
    pub v_d: Vec<T>,
}

/// Accumulate `A_x^T diag(w) A_x` (trivial block) and the trivial-by-
/// source cross block from sparse branch rows.
fn accumulate<T: Scalar>(
    rows: &[BranchRow<T>],
    weight: impl Fn(T) -> T,
    nn: &mut Matrix<T>,
    ns: &mut Matrix<T>,
) {
    for row in rows {
        let w = weight(row.value);
        for &(ca, sa) in &row.entries {
            for &(cb, sb) in &row.entries {
                match (ca, cb) {
                    (Col::Trivial(i), Col::Trivial(j)) => nn.add(i, j, w * sa * sb),
                    (Col::Trivial(i), Col::Source(s)) => ns.add(i, s, w * sa * sb),
                    _ => {}
                }
            }
        }
    }
}

pub fn assemble<T: Scalar>(c: &Circuit<T>, h: T) -> DenseSystem<T> {
    let inc = build_incidence(c);
    let (n, p) = (inc.n, inc.p);
    let mut g = Matrix::zeros(n, n);
    let mut g_s = Matrix::zeros(n, p);
    accumulate(&inc.g_rows, |r| T::one() / r, &mut g, &mut g_s);
    let mut cmat = Matrix::zeros(n, n);
    let mut c_s = Matrix::zeros(n, p);
    accumulate(&inc.c_rows, |v| v, &mut cmat, &mut c_s);
    let mut l = Matrix::zeros(n, n);
    let mut l_s = Matrix::zeros(n, p);
    accumulate(&inc.l_rows, |v| T::one() / v, &mut l, &mut l_s);
    let m = cmat.scaled(T::one() / h).add_scaled(T::one(), &g).add_scaled(h, &l);
    DenseSystem {
        n,
        p,
        h,
        g,
        c: cmat,
        l,
        g_s,
        l_s,
        m,
        v_d: inc.v_d,
    }
}

impl<T: Scalar> DenseSystem<T> {
    fn pivot_floor(&self) -> T {
        let mut max_diag = T::zero();
        for i in 0..self.n {
            max_diag = max_diag.max(self.m.get(i, i).abs());
        }
        lit::<T>(1e-12) * max_diag
    }

    pub fn factor_m(&self) -> Result<Cholesky<T>> {
        self.m.cholesky(self.pivot_floor())
    }
}

/// Structural report underlying the positive-definiteness argument.
#[derive(Debug, Clone)]
pub struct PdReport {
    pub symmetric: bool,
    /// Weak diagonal dominance holds for every row.
    pub weakly_dominant: bool,
    /// Rows with strict dominance.
    pub strict_rows: usize,
    /// Connected components of the off-diagonal adjacency graph.
    pub components: usize,
    /// Every component contains at least one strictly dominant row.
    pub strict_per_component: bool,
    pub positive_definite: bool,
    pub first_bad_pivot: Option<usize>,
}

impl PdReport {
    pub fn irreducible(&self) -> bool {
        self.components == 1
    }

    pub fn verdict(&self) -> bool {
        self.symmetric
            && self.weakly_dominant
            && self.strict_per_component
            && self.positive_definite
    }
}

pub fn check_pd<T: Scalar>(sys: &DenseSystem<T>) -> PdReport {
    let n = sys.n;
    let m = &sys.m;
    let symmetric = m.is_symmetric();

    let slack = lit::<T>(1e-12) * m.max_abs();
    let mut weakly_dominant = true;
    let mut strict = vec![false; n];
    for i in 0..n {
        let mut off = T::zero();
        for j in 0..n {
            if j != i {
                off += m.get(i, j).abs();
            }
        }
        let d = m.get(i, i).abs();
        if d + slack < off {
            weakly_dominant = false;
        }
        if d > off + slack {
            strict[i] = true;
        }
    }

    // connectivity over the off-diagonal pattern
    let mut comp = vec![usize::MAX; n];
    let mut components = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = components;
        components += 1;
        let mut stack = vec![start];
        comp[start] = id;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if j != i && comp[j] == usize::MAX && m.get(i, j) != T::zero() {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
    }
    let mut strict_in = vec![false; components];
    for i in 0..n {
        if strict[i] {
            strict_in[comp[i]] = true;
        }
    }
    let strict_per_component = strict_in.iter().all(|&b| b) && n > 0;

    let (positive_definite, first_bad_pivot) = match sys.factor_m() {
        Ok(_) => (true, None),
        Err(Error::NotPositiveDefinite { row }) => (false, Some(row)),
        Err(_) => (false, None),
    };

    PdReport {
        symmetric,
        weakly_dominant,
        strict_rows: strict.iter().filter(|&&b| b).count(),
        components,
        strict_per_component,
        positive_definite,
        first_bad_pivot,
    }
}

/// Max |entrywise difference| between the dense system matrix and the
/// matrix implied by the stencils, relative to the largest entry of M.
pub fn gs_matrix_equivalence<T: Scalar>(
    sys: &DenseSystem<T>,
    stencils: &StencilSet<T>,
) -> Result<T> {
    if stencils.len() != sys.n {
        return Err(Error::Invalid(format!(
            "dimension mismatch: stencils {} vs dense {}",
            stencils.len(),
            sys.n
        )));
    }
    let n = sys.n;
    let mut implied = Matrix::zeros(n, n);
    for (i, s) in stencils.stencils.iter().enumerate() {
        implied.set(i, i, s.diag);
        for e in s.lower.iter().chain(s.upper.iter()) {
            implied.set(i, e.node, -s.diag * e.weight);
        }
    }
    let mut max_diff = T::zero();
    for i in 0..n {
        for j in 0..n {
            max_diff = max_diff.max((implied.get(i, j) - sys.m.get(i, j)).abs());
        }
    }
    let scale = sys.m.max_abs();
    Ok(if scale > T::zero() {
        max_diff / scale
    } else {
        max_diff
    })
}

/// Dense direct transient solve: same initialization as the matrix-free
/// path, then a factorized solve of the per-step linear system.
pub fn direct_transient<T: Scalar>(
    c: &Circuit<T>,
    cfg: &SolveConfig<T>,
) -> Result<WaveformSet<T>> {
    let cfg = cfg.validated()?;
    let sys = assemble(c, cfg.h);
    let atts = c.current_attachments();
    let n = sys.n;
    let current_at = |i: usize, t: T| -> T {
        atts[i].iter().map(|(w, s)| *s * w.eval(t)).sum()
    };
    let rlc = match cfg.mode {
        crate::transient::Mode::RcFirstOrder => false,
        crate::transient::Mode::RlcSecondOrder => true,
        crate::transient::Mode::Auto => c.has_inductors(),
    };
    if !rlc && c.has_inductors() {
        return Err(Error::Invalid(
            "rc mode requested but the circuit contains inductors".into(),
        ));
    }

    let init = dc::initialize(c, cfg.h, &cfg)?;
    let mut ws = WaveformSet::new(c.trivial.clone());

    if rlc {
        let factor = sys.factor_m()?;
        // -h * L_s * v_d is step-invariant (L_s carries the trivial-by-
        // source cross couplings, which sit on the left-hand side)
        let drive: Vec<T> = {
            let lv = sys.l_s.matvec(&sys.v_d);
            lv.into_iter().map(|x| -cfg.h * x).collect()
        };
        ws.push(T::zero(), init.v0.clone());
        ws.push(cfg.h, init.v1.clone());
        let mut v_tmh = init.v0;
        let mut v_t = init.v1;
        for s in 2..=cfg.s_total {
            let t_new = T::from_usize(s).unwrap() * cfg.h;
            let t_old = T::from_usize(s - 1).unwrap() * cfg.h;
            let cv_t = sys.c.matvec(&v_t);
            let gv_t = sys.g.matvec(&v_t);
            let cv_tmh = sys.c.matvec(&v_tmh);
            let mut rhs = vec![T::zero(); n];
            let two = lit::<T>(2.0);
            for i in 0..n {
                rhs[i] = two / cfg.h * cv_t[i] + gv_t[i] - cv_tmh[i] / cfg.h + drive[i]
                    - (current_at(i, t_new) - current_at(i, t_old));
            }
            let v = factor.solve(&rhs);
            ws.push(t_new, v.clone());
            v_tmh = std::mem::replace(&mut v_t, v);
        }
    } else {
        // first-order: (C/h + G) x(t+h) = (C/h) x(t) - i(t+h) - G_s v_d
        let a = sys.c.scaled(T::one() / cfg.h).add_scaled(T::one(), &sys.g);
        let factor = a.cholesky(sys.pivot_floor_for(&a))?;
        let gsv = sys.g_s.matvec(&sys.v_d);
        ws.push(T::zero(), init.v0.clone());
        let mut v_t = init.v0;
        for s in 1..=cfg.s_total {
            let t_new = T::from_usize(s).unwrap() * cfg.h;
            let cv_t = sys.c.matvec(&v_t);
            let mut rhs = vec![T::zero(); n];
            for i in 0..n {
                rhs[i] = cv_t[i] / cfg.h - current_at(i, t_new) - gsv[i];
            }
            let v = factor.solve(&rhs);
            ws.push(t_new, v.clone());
            v_t = v;
        }
    }
    Ok(ws)
}

impl<T: Scalar> DenseSystem<T> {
    fn pivot_floor_for(&self, a: &Matrix<T>) -> T {
        let mut max_diag = T::zero();
        for i in 0..a.rows {
            max_diag = max_diag.max(a.get(i, i).abs());
        }
        lit::<T>(1e-12) * max_diag
    }

    /// The right-hand side of the second-order recurrence for one step,
    /// for residual checks.
    pub fn rlc_rhs(
        &self,
        v_t: &[T],
        v_tmh: &[T],
        delta_i: &[T],
    ) -> Vec<T> {
        let n = self.n;
        let cv_t = self.c.matvec(v_t);
        let gv_t = self.g.matvec(v_t);
        let cv_tmh = self.c.matvec(v_tmh);
        let lv = self.l_s.matvec(&self.v_d);
        let two = lit::<T>(2.0);
        (0..n)
            .map(|i| {
                two / self.h * cv_t[i] + gv_t[i] - cv_tmh[i] / self.h - self.h * lv[i]
                    - delta_i[i]
            })
            .collect()
    }
}

/// Run the mode used by [`direct_transient`] under the same rules as the
/// matrix-free path.
pub fn mode_for<T: Scalar>(c: &Circuit<T>, cfg: &SolveConfig<T>) -> ModeUsed {
    match cfg.mode {
        crate::transient::Mode::RcFirstOrder => ModeUsed::RcFirstOrder,
        crate::transient::Mode::RlcSecondOrder => ModeUsed::RlcSecondOrder,
        crate::transient::Mode::Auto => {
            if c.has_inductors() {
                ModeUsed::RlcSecondOrder
            } else {
                ModeUsed::RcFirstOrder
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse;
    use crate::topology::build_stencils;

    #[test]
    fn single_resistor_between_trivial_nodes() {
        let c: Circuit<f64> =
            parse("R1 a b 1\nC1 a 0 1p\nC2 b 0 1p\n.tran 1p 10p\n").unwrap();
        let sys = assemble(&c, 1e-12);
        assert_eq!(sys.g.get(0, 0), 1.0);
        assert_eq!(sys.g.get(0, 1), -1.0);
        assert_eq!(sys.g.get(1, 0), -1.0);
        assert_eq!(sys.g.get(1, 1), 1.0);
    }

    #[test]
    fn resistor_to_source_cross_block() {
        let c: Circuit<f64> =
            parse("VDD vdd 0 1\nR1 n1 vdd 1\nC1 n1 0 1p\n.tran 1p 10p\n").unwrap();
        let sys = assemble(&c, 1e-12);
        assert_eq!(sys.g.get(0, 0), 1.0);
        // trivial is branch source, source node is sink: G_s = -1
        assert_eq!(sys.g_s.get(0, 0), -1.0);
    }

    #[test]
    fn no_inductors_means_zero_l() {
        let c: Circuit<f64> =
            parse("VDD vdd 0 1\nR1 vdd n1 1\nC1 n1 0 1e-12\n.tran 1e-12 1e-11\n").unwrap();
        let sys = assemble(&c, 1e-12);
        assert_eq!(sys.l.max_abs(), 0.0);
        // M = C/h + G = 1 + 1
        assert_eq!(sys.m.get(0, 0), 2.0);
    }

    #[test]
    fn m_linear_in_h() {
        let c: Circuit<f64> = parse(
            "VDD vdd 0 1\nR1 vdd a 1\nR2 a b 2\nL1 a b 1n\nC1 a 0 1p\nC2 b 0 2p\n\
             .tran 1p 10p\n",
        )
        .unwrap();
        let (h1, h2) = (1e-12, 2.5e-12);
        let s1 = assemble(&c, h1);
        let s2 = assemble(&c, h2);
        for i in 0..s1.n {
            for j in 0..s1.n {
                let want = (1.0 / h1 - 1.0 / h2) * s1.c.get(i, j) + (h1 - h2) * s1.l.get(i, j);
                let got = s1.m.get(i, j) - s2.m.get(i, j);
                assert!((got - want).abs() <= 1e-9 * s1.m.max_abs());
            }
        }
    }

    #[test]
    fn check_pd_mesh() {
        let c: Circuit<f64> = parse(
            "VDD vdd 0 1\nR1 vdd a 1\nR2 a b 1\nR3 b c 1\nR4 c d 1\nR5 d a 1\n\
             C1 a 0 1p\nC2 b 0 1p\nC3 c 0 1p\nC4 d 0 1p\n.tran 1p 10p\n",
        )
        .unwrap();
        let sys = assemble(&c, 1e-12);
        let rep = check_pd(&sys);
        assert!(rep.symmetric && rep.weakly_dominant && rep.irreducible());
        assert!(rep.verdict());
    }

    #[test]
    fn current_only_node_fails_pd() {
        // forced through without validation: node with only a current source
        let c: Circuit<f64> =
            parse("I1 n1 0 1m\nR1 n2 0 1\nC1 n2 0 1p\n.tran 1p 10p\n").unwrap();
        let sys = assemble(&c, 1e-12);
        let rep = check_pd(&sys);
        assert!(!rep.positive_definite);
        assert!(!rep.verdict());
    }

    #[test]
    fn undecomposed_two_component_matrix_is_reducible() {
        let c: Circuit<f64> = parse(
            "VDD vdd 0 1\nR1 vdd a 1\nC1 a 0 1p\nR2 vdd b 1\nC2 b 0 1p\n.tran 1p 10p\n",
        )
        .unwrap();
        let sys = assemble(&c, 1e-12);
        let rep = check_pd(&sys);
        assert_eq!(rep.components, 2);
        assert!(!rep.irreducible());
        assert!(rep.weakly_dominant);
    }

    #[test]
    fn stencil_matrix_identity() {
        let c: Circuit<f64> = parse(
            "VDD vdd 0 1\nR1 vdd a 2\nR2 a b 3\nL1 a b 2n\nL2 vdd b 1n\n\
             C1 a 0 1p\nC2 b 0 2p\n.tran 1p 10p\n",
        )
        .unwrap();
        let h = 1e-12;
        let sys = assemble(&c, h);
        let st = build_stencils(&c, h).unwrap();
        let diff = gs_matrix_equivalence(&sys, &st).unwrap();
        assert!(diff < 1e-14, "diff = {:e}", diff);
    }

    #[test]
    fn equivalence_detects_perturbation() {
        let c: Circuit<f64> =
            parse("R1 a b 1\nC1 a 0 1p\nC2 b 0 1p\n.tran 1p 10p\n").unwrap();
        let h = 1e-12;
        let sys = assemble(&c, h);
        let mut st = build_stencils(&c, h).unwrap();
        let d0 = st.stencils[0].diag;
        st.stencils[0].upper[0].weight += 1e-6;
        let diff = gs_matrix_equivalence(&sys, &st).unwrap();
        let expect = d0 * 1e-6 / sys.m.max_abs();
        assert!((diff - expect).abs() < 1e-9);
    }

    #[test]
    fn direct_single_node_rc_step() {
        let c: Circuit<f64> =
            parse("VDD vdd 0 1\nR1 vdd n1 1\nC1 n1 0 1\n.ic V(n1)=0\n.tran 0.1 1\n").unwrap();
        let mut cfg = SolveConfig::new(0.1, 10);
        cfg.tol = 1e-13;
        let ws = direct_transient(&c, &cfg).unwrap();
        assert!((ws.values[1][0] - 1.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn direct_steady_state_constant() {
        let c: Circuit<f64> = parse(
            "VDD vdd 0 1\nR1 vdd n1 1\nC1 n1 0 1e-12\n.ic V(n1)=1\n.tran 1e-12 1e-11\n",
        )
        .unwrap();
        let mut cfg = SolveConfig::new(1e-12, 10);
        cfg.tol = 1e-13;
        cfg.mode = crate::transient::Mode::RlcSecondOrder;
        let ws = direct_transient(&c, &cfg).unwrap();
        for row in &ws.values {
            assert!((row[0] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn kcl_holds_for_dc_branch_currents() {
        // resistive divider with a load: recover branch currents and
        // check A^T i_b = 0 at the trivial nodes
        let c: Circuit<f64> = parse(
            "VDD vdd 0 1\nR1 vdd n1 2\nR2 n1 n2 3\nR3 n2 0 4\nI1 n2 0 0.05\nC1 n1 0 1p\n\
             .tran 1p 10p\n",
        )
        .unwrap();
        let mut p = crate::dc::DcProblem::resistive(&c);
        p.inject[1] = 0.05;
        let v = crate::dc::dc_solve(&p, 1e-15, 1.0, 100_000).unwrap();
        let inc = build_incidence(&c);
        let node_v = |col: &Col| match col {
            Col::Trivial(i) => v[*i],
            Col::Source(s) => inc.v_d[*s],
        };
        let mut kcl = vec![0.0_f64; inc.n];
        let mut max_ib: f64 = 0.0;
        for row in &inc.g_rows {
            let dv: f64 = row.entries.iter().map(|(c, s)| s * node_v(c)).sum();
            let i_b = dv / row.value;
            max_ib = max_ib.max(i_b.abs());
            for (c, s) in &row.entries {
                if let Col::Trivial(i) = c {
                    kcl[*i] += s * i_b;
                }
            }
        }
        for (row, w) in &inc.i_rows {
            let i_b = w.eval(0.0);
            max_ib = max_ib.max(i_b.abs());
            for (c, s) in &row.entries {
                if let Col::Trivial(i) = c {
                    kcl[*i] += s * i_b;
                }
            }
        }
        for r in &kcl {
            assert!(r.abs() < 1e-10 * max_ib);
        }
    }
}
