//! Deterministic synthetic power-grid generator. Same spec + same seed
//! always produces byte-identical netlist text.

use crate::error::Result;
use crate::netlist::{parse, Circuit};
use std::fmt::Write;

/// Parameters of a rectangular grid model.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Mesh segment resistance, ohms.
    pub r_wire: f64,
    /// Per-node decap to ground, farads.
    pub c_node: f64,
    /// Rail-tie inductance, henries; 0 disables inductors and the rail
    /// ties become resistive.
    pub l_via: f64,
    /// Every `via_pitch`-th boundary node gets a rail tie.
    pub via_pitch: usize,
    pub vdd: f64,
    /// Fraction of interior nodes that draw a load current.
    pub load_density: f64,
    /// Peak of the triangular load pulse, amperes.
    pub load_peak: f64,
    pub seed: u64,
    pub step: f64,
    pub tstop: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rows: 8,
            cols: 8,
            r_wire: 1.0,
            c_node: 1e-13,
            l_via: 0.0,
            via_pitch: 4,
            vdd: 1.0,
            load_density: 0.3,
            load_peak: 1e-3,
            seed: 1,
            step: 1e-12,
            tstop: 5e-11,
        }
    }
}

/// splitmix64: tiny, seedable, stable across platforms.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Render the netlist text for `spec`.
pub fn netlist_text(spec: &GridSpec) -> String {
    let mut rng = Rng::new(spec.seed);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "* synthetic grid {}x{} seed {}",
        spec.rows, spec.cols, spec.seed
    );
    let _ = writeln!(out, "VDD vdd 0 {}", spec.vdd);

    let node = |r: usize, c: usize| format!("n{}_{}", r, c);

    // mesh resistors
    let mut ridx = 0usize;
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            if c + 1 < spec.cols {
                ridx += 1;
                let _ = writeln!(
                    out,
                    "R{} {} {} {}",
                    ridx,
                    node(r, c),
                    node(r, c + 1),
                    spec.r_wire
                );
            }
            if r + 1 < spec.rows {
                ridx += 1;
                let _ = writeln!(
                    out,
                    "R{} {} {} {}",
                    ridx,
                    node(r, c),
                    node(r + 1, c),
                    spec.r_wire
                );
            }
        }
    }

    // rail ties on the boundary, every via_pitch-th node, always (0,0)
    let mut tie = 0usize;
    let pitch = spec.via_pitch.max(1);
    let mut boundary: Vec<(usize, usize)> = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            if r == 0 || c == 0 || r + 1 == spec.rows || c + 1 == spec.cols {
                boundary.push((r, c));
            }
        }
    }
    for (k, (r, c)) in boundary.iter().enumerate() {
        if k % pitch != 0 {
            continue;
        }
        tie += 1;
        if spec.l_via > 0.0 {
            let _ = writeln!(out, "LT{} vdd {} {}", tie, node(*r, *c), spec.l_via);
        } else {
            let _ = writeln!(out, "RT{} vdd {} {}", tie, node(*r, *c), spec.r_wire);
        }
    }

    // decaps
    let mut cidx = 0usize;
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            cidx += 1;
            let _ = writeln!(out, "C{} {} 0 {}", cidx, node(r, c), spec.c_node);
        }
    }

    // triangular load pulses on a random subset of interior nodes
    let mut iidx = 0usize;
    let t_peak = spec.tstop / 4.0;
    let t_end = spec.tstop / 2.0;
    for r in 1..spec.rows.saturating_sub(1) {
        for c in 1..spec.cols.saturating_sub(1) {
            let draw = rng.next_f64();
            if draw < spec.load_density {
                iidx += 1;
                let peak = spec.load_peak * (0.5 + rng.next_f64());
                let _ = writeln!(
                    out,
                    "I{} {} 0 PWL(0 0 {} {} {} 0)",
                    iidx,
                    node(r, c),
                    t_peak,
                    peak,
                    t_end
                );
            }
        }
    }
    if iidx == 0 {
        // guarantee at least one load so the transient is non-trivial
        let (r, c) = (spec.rows / 2, spec.cols / 2);
        let _ = writeln!(
            out,
            "I1 {} 0 PWL(0 0 {} {} {} 0)",
            node(r, c),
            t_peak,
            spec.load_peak,
            t_end
        );
    }

    let _ = writeln!(out, ".tran {} {}", spec.step, spec.tstop);
    let _ = writeln!(out, ".end");
    out
}

/// Generate and parse in one go.
pub fn generate(spec: &GridSpec) -> Result<Circuit<f64>> {
    parse(&netlist_text(spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::validate;

    #[test]
    fn deterministic_for_same_seed() {
        let spec = GridSpec::default();
        assert_eq!(netlist_text(&spec), netlist_text(&spec));
        let other = GridSpec {
            seed: 2,
            ..GridSpec::default()
        };
        assert_ne!(netlist_text(&spec), netlist_text(&other));
    }

    #[test]
    fn generated_grid_validates() {
        for seed in 0..5 {
            let spec = GridSpec {
                seed,
                rows: 6,
                cols: 7,
                ..GridSpec::default()
            };
            let c = generate(&spec).unwrap();
            assert!(validate(&c).is_empty(), "seed {}", seed);
            assert_eq!(c.trivial.len(), 42);
        }
    }

    #[test]
    fn inductive_grid_has_inductors() {
        let spec = GridSpec {
            l_via: 1e-10,
            ..GridSpec::default()
        };
        let c = generate(&spec).unwrap();
        assert!(c.has_inductors());
    }

    #[test]
    fn rng_stable() {
        let mut r = Rng::new(42);
        let a = r.next_u64();
        let mut r2 = Rng::new(42);
        assert_eq!(a, r2.next_u64());
    }
}
