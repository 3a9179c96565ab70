//! Command-line driver: analyze stencil dependences, generate tiled C
//! loops, verify transformations against the execution-order oracle, and
//! run the roofline arithmetic.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid configuration,
//! 3 parse error.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use polytile::cloog;
use polytile::codegen::{emit_c, generate_loop_ast, EmitOptions};
use polytile::legality::{check_tiling_band, compute_skew_factors, skew_dependences};
use polytile::oracle::{self, Grid};
use polytile::perf::{self, MachineModel, StencilPerf};
use polytile::stencil::parse_stencil_spec;
use polytile::transform::{time_tile, time_tile_unchecked, TileConfig, TransformedProgram};
use polytile::{Error, StencilSpec};

#[derive(Parser)]
#[command(
    name = "polytile",
    version,
    about = "Polyhedral time-tiling toolkit for space-time stencil loops"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report dependence vectors, minimal skew factors and band legality.
    Analyze { spec: PathBuf },

    /// Generate the (optionally tiled) loop nest as C source.
    Codegen {
        spec: PathBuf,
        /// Spatial tile sizes, e.g. `x=16,y=16`.
        #[arg(long)]
        tile: Option<String>,
        /// Time tile size; required when the time dimension is buffered.
        #[arg(long)]
        time_tile: Option<u64>,
        /// Skew factors overriding the computed minimal ones, e.g. `x=4,y=4`.
        #[arg(long)]
        skew: Option<String>,
        /// Emit `#pragma omp parallel` / `omp for schedule(static)`.
        #[arg(long)]
        omp: bool,
        /// Emit `#pragma ivdep` / `#pragma omp simd` on the vectorized loop.
        #[arg(long)]
        simd: bool,
        /// Emit the denormal-flushing intrinsics inside the parallel region.
        #[arg(long)]
        denormals: bool,
        /// Wrap the nest into a compilable file with helper macros.
        #[arg(long)]
        compilable: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },

    /// Check a transformation on a bounded instance: execution order,
    /// dependence violations, and bit-exact numeric equivalence.
    Verify {
        spec: PathBuf,
        /// Parameter bindings, e.g. `time_size=10,x_size=24`.
        #[arg(long)]
        params: String,
        #[arg(long)]
        tile: Option<String>,
        #[arg(long)]
        time_tile: Option<u64>,
        #[arg(long)]
        skew: Option<String>,
        /// Seed for the deterministic initial grid.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the transformed-order result grid to this file.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Compare the result against an externally produced grid file.
        #[arg(long)]
        expect: Option<PathBuf>,
        /// Absolute tolerance for `--expect` comparisons.
        #[arg(long, default_value_t = 1e-6)]
        atol: f64,
    },

    /// Roofline arithmetic: peaks, minimum run time, actual-vs-peak.
    Roofline {
        /// Arithmetic intensity in flop/byte.
        #[arg(long)]
        ai: f64,
        /// Memory traffic in GB.
        #[arg(long)]
        traffic: f64,
        /// Peak memory bandwidth in GB/s.
        #[arg(long)]
        bw: f64,
        #[arg(long, default_value_t = 32.0)]
        flops_per_cycle: f64,
        #[arg(long, default_value_t = 4.0)]
        clock: f64,
        #[arg(long)]
        actual_gflops: Option<f64>,
        #[arg(long)]
        actual_runtime: Option<f64>,
    },

    /// Parse a CLooG input file, re-emit it, and diff the token streams.
    CloogRoundtrip { file: PathBuf },

    /// Generate loops scanning a CLooG problem (permutation scatterings).
    CloogCodegen {
        file: PathBuf,
        #[arg(long)]
        compilable: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::SpecParse { .. } | Error::CloogParse { .. } => 3,
        Error::InvalidConfig(_)
        | Error::BufferViolation { .. }
        | Error::IllegalBand { .. }
        | Error::UnknownVariable(_)
        | Error::UnsupportedScattering
        | Error::DimensionMismatch { .. }
        | Error::Unbounded(_)
        | Error::UnboundParameter(_) => 2,
        _ => 1,
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Analyze { spec } => analyze(&spec),
        Command::Codegen {
            spec,
            tile,
            time_tile,
            skew,
            omp,
            simd,
            denormals,
            compilable,
            output,
        } => codegen(
            &spec,
            tile.as_deref(),
            time_tile,
            skew.as_deref(),
            EmitOptions {
                omp,
                simd,
                denormals,
                compilable_wrapper: compilable,
            },
            output.as_deref(),
        ),
        Command::Verify {
            spec,
            params,
            tile,
            time_tile,
            skew,
            seed,
            dump,
            expect,
            atol,
        } => verify(
            &spec,
            &params,
            tile.as_deref(),
            time_tile,
            skew.as_deref(),
            seed,
            dump.as_deref(),
            expect.as_deref(),
            atol,
        ),
        Command::Roofline {
            ai,
            traffic,
            bw,
            flops_per_cycle,
            clock,
            actual_gflops,
            actual_runtime,
        } => {
            if bw <= 0.0 || flops_per_cycle <= 0.0 || clock <= 0.0 {
                return Err(Error::InvalidConfig(
                    "bandwidth, flops-per-cycle and clock must be positive".into(),
                ));
            }
            if ai < 0.0 || traffic < 0.0 {
                return Err(Error::InvalidConfig(
                    "arithmetic intensity and traffic must be non-negative".into(),
                ));
            }
            let m = MachineModel {
                bandwidth_gb_s: bw,
                flops_per_cycle,
                clock_ghz: clock,
            };
            let s = StencilPerf {
                arithmetic_intensity: ai,
                memory_traffic_gb: traffic,
                actual_gflops,
                actual_runtime_s: actual_runtime,
            };
            print!("{}", perf::report(&s, &m));
            Ok(ExitCode::SUCCESS)
        }
        Command::CloogRoundtrip { file } => cloog_roundtrip(&file),
        Command::CloogCodegen {
            file,
            compilable,
            output,
        } => cloog_codegen(&file, compilable, output.as_deref()),
    }
}

fn load_spec(path: &std::path::Path) -> Result<StencilSpec, Error> {
    parse_stencil_spec(&fs::read_to_string(path)?)
}

/// Parse `name=value,name=value` pairs.
fn parse_assignments(text: &str) -> Result<Vec<(String, i64)>, Error> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, value) = part.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("expected `name=value`, got `{part}`"))
        })?;
        let value: i64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad integer in `{part}`")))?;
        out.push((name.trim().to_string(), value));
    }
    Ok(out)
}

fn build_config(
    tile: Option<&str>,
    time_tile: Option<u64>,
    skew: Option<&str>,
) -> Result<Option<TileConfig>, Error> {
    if tile.is_none() && time_tile.is_none() && skew.is_none() {
        return Ok(None);
    }
    let mut cfg = TileConfig {
        time_tile_size: time_tile,
        ..Default::default()
    };
    if let Some(t) = tile {
        for (dim, size) in parse_assignments(t)? {
            if size <= 0 {
                return Err(Error::InvalidConfig(format!(
                    "tile size for `{dim}` must be positive"
                )));
            }
            cfg.spatial_tile_sizes.insert(dim, size as u64);
        }
    }
    if let Some(s) = skew {
        let mut factors = BTreeMap::new();
        for (dim, f) in parse_assignments(s)? {
            factors.insert(dim, f);
        }
        cfg.skew_factors = Some(factors);
    }
    Ok(Some(cfg))
}

fn build_program(
    spec: &StencilSpec,
    tile: Option<&str>,
    time_tile_size: Option<u64>,
    skew: Option<&str>,
    checked: bool,
) -> Result<TransformedProgram, Error> {
    match build_config(tile, time_tile_size, skew)? {
        Some(cfg) if checked => time_tile(spec, &cfg),
        Some(cfg) => time_tile_unchecked(spec, &cfg),
        None => Ok(TransformedProgram::untransformed(spec)),
    }
}

fn analyze(path: &std::path::Path) -> Result<ExitCode, Error> {
    let spec = load_spec(path)?;
    let deps = spec.extract_dependences();
    if deps.is_empty() {
        println!("0 dependences; tiling trivially legal");
        return Ok(ExitCode::SUCCESS);
    }
    println!("dependences: {}", deps.len());
    for d in &deps {
        println!("  {d}");
    }

    // Extreme vectors: those attaining the largest |distance| in some
    // spatial dimension.
    let ndims = spec.dims.len();
    let mut max_abs = vec![0i64; ndims];
    for d in &deps {
        for (k, m) in max_abs.iter_mut().enumerate().skip(1) {
            *m = (*m).max(d.components()[k].abs());
        }
    }
    let extremes: Vec<_> = deps
        .iter()
        .filter(|d| {
            (1..ndims).any(|k| max_abs[k] > 0 && d.components()[k].abs() == max_abs[k])
        })
        .collect();
    println!("extreme vectors: {}", extremes.len());
    for d in &extremes {
        println!("  {d}");
    }

    let spatial: Vec<usize> = (1..ndims).collect();
    let factors = compute_skew_factors(&deps, &spatial)?;
    let rendered: Vec<String> = factors
        .iter()
        .map(|&(k, f)| format!("{}={f}", spec.dims[k]))
        .collect();
    println!("skew: {}", rendered.join(" "));

    let band: Vec<usize> = (0..ndims).collect();
    let band_names: Vec<&str> = spec.dims.iter().map(|s| s.as_str()).collect();
    if check_tiling_band(&deps, &band) {
        println!("band ({}): legal without skewing", band_names.join(", "));
    } else {
        println!("band ({}): illegal without skewing", band_names.join(", "));
    }
    let skewed = skew_dependences(&deps, &factors);
    if check_tiling_band(&skewed, &band) {
        println!("band ({}): legal with minimal skew", band_names.join(", "));
    } else {
        println!("band ({}): ILLEGAL even with minimal skew", band_names.join(", "));
    }
    if let Some(v) = &spec.vectorized_dim {
        // The band actually tiled when the vectorized loop is kept full.
        let band: Vec<usize> = (0..ndims)
            .filter(|&k| &spec.dims[k] != v)
            .collect();
        let names: Vec<&str> = band.iter().map(|&k| spec.dims[k].as_str()).collect();
        let verdict = if check_tiling_band(&skewed, &band) {
            "legal with minimal skew"
        } else {
            "ILLEGAL even with minimal skew"
        };
        println!("band ({}): {verdict}", names.join(", "));
    }
    Ok(ExitCode::SUCCESS)
}

fn codegen(
    path: &std::path::Path,
    tile: Option<&str>,
    time_tile_size: Option<u64>,
    skew: Option<&str>,
    opts: EmitOptions,
    output: Option<&std::path::Path>,
) -> Result<ExitCode, Error> {
    let spec = load_spec(path)?;
    let program = build_program(&spec, tile, time_tile_size, skew, true)?;
    let ast = generate_loop_ast(&program)?;
    let text = emit_c(&ast, opts);
    match output {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn verify(
    path: &std::path::Path,
    params_text: &str,
    tile: Option<&str>,
    time_tile_size: Option<u64>,
    skew: Option<&str>,
    seed: u64,
    dump: Option<&std::path::Path>,
    expect: Option<&std::path::Path>,
    atol: f64,
) -> Result<ExitCode, Error> {
    let spec = load_spec(path)?;
    let mut params = BTreeMap::new();
    for (name, v) in parse_assignments(params_text)? {
        params.insert(name, v);
    }
    let program = build_program(&spec, tile, time_tile_size, skew, false)?;

    let report = oracle::verify(&spec, &program, &params)?;
    if !report.is_permutation {
        if let Some(p) = report.missing.first() {
            eprintln!("point never executed: {p:?}");
        }
        if let Some(p) = report.extra.first() {
            eprintln!("point outside the domain executed: {p:?}");
        }
        eprintln!(
            "iteration set not preserved: {} missing, {} extra",
            report.missing.len(),
            report.extra.len()
        );
        return Ok(ExitCode::from(1));
    }
    if let Some(v) = report.violations.first() {
        eprintln!(
            "{} violations; first: dependence {} from {:?} to {:?} (source runs too late)",
            report.violations.len(),
            v.dep,
            v.source,
            v.sink
        );
        return Ok(ExitCode::from(1));
    }
    println!(
        "0 violations; iteration set preserved ({} points)",
        spec_point_count(&spec, &params)?
    );

    let dims = oracle::grid_dims(&spec, &params)?;
    let initial = Grid::patterned(dims, seed);
    let identity = TransformedProgram::untransformed(&spec);
    let id_order = oracle::execution_order(&identity, &params)?;
    let id_grid = oracle::interpret(&spec, &params, &id_order, &initial)?;
    let tr_order = oracle::execution_order(&program, &params)?;
    let tr_grid = oracle::interpret(&spec, &params, &tr_order, &initial)?;
    if id_grid.data != tr_grid.data {
        let diff = id_grid.max_abs_diff(&tr_grid).unwrap_or(f64::INFINITY);
        eprintln!("numeric mismatch: max |diff| = {diff:e}");
        return Ok(ExitCode::from(1));
    }
    println!("numeric check: bitwise identical to the original order");

    if let Some(p) = dump {
        let mut f = fs::File::create(p)?;
        tr_grid.write_le(&mut f)?;
        println!("wrote grid to {}", p.display());
    }
    if let Some(p) = expect {
        let mut f = fs::File::open(p)?;
        let expected = Grid::read_le(&mut f)?;
        match tr_grid.max_abs_diff(&expected) {
            Some(d) if d <= atol => {
                println!("matches {} within atol {atol:e} (max |diff| = {d:e})", p.display());
            }
            Some(d) => {
                eprintln!("grid differs from {}: max |diff| = {d:e} > atol {atol:e}", p.display());
                return Ok(ExitCode::from(1));
            }
            None => {
                eprintln!("grid dimensions differ from {}", p.display());
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn spec_point_count(
    spec: &StencilSpec,
    params: &BTreeMap<String, i64>,
) -> Result<usize, Error> {
    Ok(spec.domain().enumerate_points(params)?.len())
}

fn cloog_roundtrip(path: &std::path::Path) -> Result<ExitCode, Error> {
    let text = fs::read_to_string(path)?;
    let problem = cloog::parse_cloog_input(&text)?;
    let written = cloog::write_cloog_input(&problem);
    let original = cloog::tokens(&text);
    let emitted = cloog::tokens(&written);
    if original == emitted {
        println!(
            "round-trip OK: {} tokens identical modulo comments/whitespace",
            original.len()
        );
        print!("{written}");
        Ok(ExitCode::SUCCESS)
    } else {
        let idx = original
            .iter()
            .zip(&emitted)
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| original.len().min(emitted.len()));
        eprintln!(
            "round-trip mismatch at token {idx}: `{}` vs `{}`",
            original.get(idx).map(String::as_str).unwrap_or("<eof>"),
            emitted.get(idx).map(String::as_str).unwrap_or("<eof>"),
        );
        Ok(ExitCode::from(1))
    }
}

fn cloog_codegen(
    path: &std::path::Path,
    compilable: bool,
    output: Option<&std::path::Path>,
) -> Result<ExitCode, Error> {
    let text = fs::read_to_string(path)?;
    let problem = cloog::parse_cloog_input(&text)?;
    if problem.statements.is_empty() {
        return Err(Error::InvalidConfig(
            "no statements in the CLooG problem".into(),
        ));
    }
    let domain = cloog::to_domain(&problem, 0)?;
    let schedule = if problem.scatterings.is_empty() {
        polytile::Schedule::identity(domain.iterators())
    } else {
        cloog::scattering_to_schedule(&problem, 0)?
    };
    let body_translation = domain
        .iterators()
        .iter()
        .map(|i| (i.clone(), polytile::AffineExpr::var(i)))
        .collect();
    let program = TransformedProgram {
        domain,
        schedule,
        skew_factors: BTreeMap::new(),
        body_translation,
        tile_iters: Vec::new(),
        stencil: None,
    };
    let ast = generate_loop_ast(&program)?;
    let text = emit_c(
        &ast,
        EmitOptions {
            compilable_wrapper: compilable,
            ..Default::default()
        },
    );
    match output {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
