use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gridsim::error::Error;
use gridsim::gridgen::{netlist_text, GridSpec};
use gridsim::netlist::{decompose, parse, validate, Circuit};
use gridsim::transient::{self, Mode, SolveConfig, SolveReport};
use gridsim::waveform::{write_csv, WaveformSet};
use gridsim::{dense, oracle};

/// Matrix-free transient / DC analysis of RC and RLC power-grid models.
#[derive(Parser)]
#[command(name = "gridsim", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a netlist and write node-voltage waveforms as CSV.
    Run(RunArgs),
    /// Validate a netlist and report its structural properties.
    Check(CheckArgs),
    /// Emit a deterministic synthetic grid netlist.
    Gen(GenArgs),
    /// Cross-check the matrix-free solver against the dense reference.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rc,
    Rlc,
    Auto,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Rc => Mode::RcFirstOrder,
            ModeArg::Rlc => Mode::RlcSecondOrder,
            ModeArg::Auto => Mode::Auto,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Inner-iteration convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// SOR relaxation factor in (0, 2); 1 is plain Gauss-Seidel.
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Time step override (seconds); default from the .tran card.
    #[arg(long)]
    step: Option<f64>,
    /// Step-count override; default from the .tran card.
    #[arg(long)]
    steps: Option<usize>,
    /// Formulation: first-order rc, second-order rlc, or auto.
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
}

impl SolveArgs {
    fn config(&self, c: &Circuit<f64>, default_tol: f64) -> SolveConfig<f64> {
        let mut cfg = SolveConfig::from_tran(&c.tran);
        if let Some(h) = self.step {
            cfg.h = h;
        }
        if let Some(s) = self.steps {
            cfg.s_total = s;
        }
        cfg.tol = self.tol.unwrap_or(default_tol);
        cfg.omega = self.omega;
        cfg.mode = self.mode.into();
        cfg
    }
}

#[derive(Args)]
struct RunArgs {
    netlist: PathBuf,
    #[command(flatten)]
    solve: SolveArgs,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    netlist: PathBuf,
    /// Also assemble the dense system matrix and verify its structure.
    #[arg(long)]
    dense: bool,
    /// Time step for the dense assembly; default from the .tran card.
    #[arg(long)]
    step: Option<f64>,
    /// Write the assembled system matrix in Matrix Market format.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 8)]
    rows: usize,
    #[arg(long, default_value_t = 8)]
    cols: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Mesh segment resistance, ohms.
    #[arg(long, default_value_t = 1.0)]
    r_wire: f64,
    /// Per-node decap, farads.
    #[arg(long, default_value_t = 1e-13)]
    c_node: f64,
    /// Rail-tie inductance, henries; 0 makes the ties resistive.
    #[arg(long, default_value_t = 0.0)]
    l_via: f64,
    /// Every n-th boundary node is tied to the rail.
    #[arg(long, default_value_t = 4)]
    via_pitch: usize,
    #[arg(long, default_value_t = 1.0)]
    vdd: f64,
    /// Fraction of interior nodes that draw a load.
    #[arg(long, default_value_t = 0.3)]
    load_density: f64,
    /// Peak load current, amperes.
    #[arg(long, default_value_t = 1e-3)]
    load_peak: f64,
    #[arg(long, default_value_t = 1e-12)]
    step: f64,
    #[arg(long, default_value_t = 5e-11)]
    tstop: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    netlist: PathBuf,
    #[command(flatten)]
    solve: SolveArgs,
    /// Largest tolerated waveform difference against the dense solve.
    #[arg(long, default_value_t = 1e-8)]
    max_diff: f64,
    /// Refuse dense assembly above this node count.
    #[arg(long, default_value_t = 2000)]
    max_nodes: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // --help / --version land here too and are not errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            match e {
                Error::NonConvergence { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load(path: &PathBuf) -> Result<Circuit<f64>, Error> {
    let text = fs::read_to_string(path)?;
    parse(&text)
}

/// Parse, validate (reporting every violation), and split into
/// independently solvable components.
fn prepare(path: &PathBuf) -> Result<Option<(Circuit<f64>, Vec<Circuit<f64>>)>, Error> {
    let c = load(path)?;
    let violations = validate(&c);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {}", v);
        }
        return Ok(None);
    }
    let d = decompose(&c);
    for name in &d.dropped {
        eprintln!("warning: dropped branch {} (connects no trivial node)", name);
    }
    Ok(Some((c, d.components)))
}

fn solve_components(
    comps: &[Circuit<f64>],
    cfg: &SolveConfig<f64>,
) -> Result<Vec<(WaveformSet<f64>, SolveReport<f64>)>, Error> {
    if comps.len() == 1 {
        return Ok(vec![transient::run(&comps[0], cfg)?]);
    }
    let mut out = Vec::with_capacity(comps.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = comps
            .iter()
            .map(|c| scope.spawn(move || transient::run(c, cfg)))
            .collect();
        for h in handles {
            out.push(h.join().expect("solver thread panicked"));
        }
    });
    out.into_iter().collect()
}

/// Stitch per-component waveforms back into one set ordered like the
/// original netlist, appending the constant source-node columns.
fn merge_waveforms(
    full: &Circuit<f64>,
    comps: &[Circuit<f64>],
    results: &[(WaveformSet<f64>, SolveReport<f64>)],
) -> WaveformSet<f64> {
    let mut col_of = vec![(0usize, 0usize); full.trivial.len()];
    for (ci, comp) in comps.iter().enumerate() {
        for (k, name) in comp.trivial.iter().enumerate() {
            let i = full.trivial_index(name).expect("component node in netlist");
            col_of[i] = (ci, k);
        }
    }
    let mut names = full.trivial.clone();
    names.extend(full.sources.iter().map(|s| s.node.clone()));
    let mut merged = WaveformSet::new(names);
    let steps = results[0].0.times.len();
    for row in 0..steps {
        let t = results[0].0.times[row];
        let mut vals = Vec::with_capacity(merged.names.len());
        for &(ci, k) in &col_of {
            vals.push(results[ci].0.values[row][k]);
        }
        vals.extend(full.sources.iter().map(|s| s.volts));
        merged.push(t, vals);
    }
    merged
}

fn cmd_run(a: RunArgs) -> Result<ExitCode, Error> {
    let Some((full, comps)) = prepare(&a.netlist)? else {
        return Ok(ExitCode::from(1));
    };
    let cfg = a.solve.config(&full, 1e-8).validated()?;
    let results = solve_components(&comps, &cfg)?;
    let merged = merge_waveforms(&full, &comps, &results);

    match &a.out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            write_csv(&merged, &mut w)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_csv(&merged, &mut w)?;
        }
    }
    for (ci, (_, rep)) in results.iter().enumerate() {
        eprintln!(
            "component {}: {:?}, {} steps, {} inner iterations, {:.3}s",
            ci,
            rep.mode,
            rep.inner_iterations.len(),
            rep.total_inner(),
            rep.wall_seconds
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(a: CheckArgs) -> Result<ExitCode, Error> {
    let c = load(&a.netlist)?;
    let violations = validate(&c);
    for v in &violations {
        println!("violation: {}", v);
    }
    let d = decompose(&c);
    println!(
        "nodes: {} trivial, {} source; branches: {}; {} components",
        c.trivial.len(),
        c.sources.len(),
        c.branches.len(),
        d.components.len()
    );
    for name in &d.dropped {
        println!("warning: dropped branch {} (connects no trivial node)", name);
    }

    let mut structural_ok = true;
    if a.dense {
        let h = a.step.unwrap_or(c.tran.step);
        for (ci, comp) in d.components.iter().enumerate() {
            let sys = oracle::assemble(comp, h);
            let rep = oracle::check_pd(&sys);
            println!(
                "component {}: n={} symmetric={} weakly_dominant={} strict_rows={} \
                 irreducible={} positive_definite={}",
                ci,
                sys.n,
                rep.symmetric,
                rep.weakly_dominant,
                rep.strict_rows,
                rep.irreducible(),
                rep.positive_definite
            );
            if !rep.verdict() {
                structural_ok = false;
            }
            if let Some(path) = &a.dump_matrix {
                // one file per component: suffix the stem
                let p = if d.components.len() == 1 {
                    path.clone()
                } else {
                    let mut name = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "matrix".into());
                    name.push_str(&format!("_{}", ci));
                    if let Some(ext) = path.extension() {
                        name.push('.');
                        name.push_str(&ext.to_string_lossy());
                    }
                    path.with_file_name(name)
                };
                let mut w = BufWriter::new(File::create(&p)?);
                dense::write_matrix_market(&sys.m, &mut w)?;
                w.flush()?;
                println!("wrote {}", p.display());
            }
        }
    }

    if !violations.is_empty() {
        Ok(ExitCode::from(1))
    } else if !structural_ok {
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn cmd_gen(a: GenArgs) -> Result<ExitCode, Error> {
    let spec = GridSpec {
        rows: a.rows,
        cols: a.cols,
        r_wire: a.r_wire,
        c_node: a.c_node,
        l_via: a.l_via,
        via_pitch: a.via_pitch,
        vdd: a.vdd,
        load_density: a.load_density,
        load_peak: a.load_peak,
        seed: a.seed,
        step: a.step,
        tstop: a.tstop,
    };
    if spec.rows < 2 || spec.cols < 2 {
        return Err(Error::Invalid("grid must be at least 2x2".into()));
    }
    let text = netlist_text(&spec);
    // make sure what we emit is solvable before handing it out
    let c = gridsim::gridgen::generate(&spec)?;
    let violations = validate(&c);
    if !violations.is_empty() {
        return Err(Error::Invalid(format!(
            "generated netlist fails validation: {}",
            violations[0]
        )));
    }
    match &a.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{}", text),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(a: CompareArgs) -> Result<ExitCode, Error> {
    let Some((full, comps)) = prepare(&a.netlist)? else {
        return Ok(ExitCode::from(1));
    };
    if full.trivial.len() > a.max_nodes {
        return Err(Error::Invalid(format!(
            "{} nodes exceeds --max-nodes {} for dense comparison",
            full.trivial.len(),
            a.max_nodes
        )));
    }
    let cfg = a.solve.config(&full, 1e-10).validated()?;

    let mut worst_wave: f64 = 0.0;
    let mut worst_matrix: f64 = 0.0;
    let mut worst_mode: Option<f64> = None;
    for (ci, comp) in comps.iter().enumerate() {
        let (ws, rep) = transient::run(comp, &cfg)?;
        let dense_ws = oracle::direct_transient(comp, &cfg)?;
        let wave_diff = ws.max_abs_diff(&dense_ws);

        let sys = oracle::assemble(comp, cfg.h);
        let stencils = transient::build_stencils(comp, cfg.h)?;
        let matrix_diff = oracle::gs_matrix_equivalence(&sys, &stencils)?;

        println!(
            "component {}: {:?}, waveform diff {:.3e}, matrix diff {:.3e}, \
             {} inner iterations",
            ci,
            rep.mode,
            wave_diff,
            matrix_diff,
            rep.total_inner()
        );
        worst_wave = worst_wave.max(wave_diff);
        worst_matrix = worst_matrix.max(matrix_diff);

        if !comp.has_inductors() {
            // with no inductors the two formulations must agree once they
            // share the same starting pair
            let (rc_ws, _) = transient::run_rc_from(comp, &cfg, None)?;
            let mut rlc_cfg = cfg;
            rlc_cfg.mode = Mode::RlcSecondOrder;
            let v0 = rc_ws.values[0].clone();
            let v1 = rc_ws.values[1].clone();
            let (rlc_ws, _) = transient::run_rlc_from(comp, &rlc_cfg, Some((v0, v1)))?;
            let d = rc_ws.max_abs_diff(&rlc_ws);
            println!("component {}: rc/rlc mode diff {:.3e}", ci, d);
            worst_mode = Some(worst_mode.unwrap_or(0.0).max(d));
        }
    }

    let mode_ok = worst_mode.map_or(true, |d| d <= 10.0 * cfg.tol);
    if worst_wave <= a.max_diff && mode_ok {
        println!("compare: ok (max waveform diff {:.3e})", worst_wave);
        Ok(ExitCode::SUCCESS)
    } else {
        println!(
            "compare: FAILED (waveform diff {:.3e} vs limit {:.3e})",
            worst_wave, a.max_diff
        );
        Ok(ExitCode::from(2))
    }
}
