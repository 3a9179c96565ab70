//! Loop-nest generation and C-syntax emission.
//!
//! [`generate_loop_ast`] scans a transformed program dimension by
//! dimension, outermost first: all inner iterators are projected away with
//! Fourier-Motzkin elimination and the surviving constraints on the current
//! iterator become `max`/`min` loop bounds with `ceild`/`floord` rounding.
//! The single statement's body indices are translated back to the original
//! iteration space (`x - skew`), with the skew amount hoisted once per time
//! step. [`emit_c`] prints the nest, optionally decorated with OpenMP,
//! SIMD and denormal-flushing directives and wrapped into a compilable
//! file.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::polyhedron::{ceild, floord, AffineExpr, Bound, Domain};
use crate::transform::TransformedProgram;

/// Loop-bound expression tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundExpr {
    Affine(AffineExpr),
    Min(Box<BoundExpr>, Box<BoundExpr>),
    Max(Box<BoundExpr>, Box<BoundExpr>),
    FloorDiv(Box<BoundExpr>, i64),
    CeilDiv(Box<BoundExpr>, i64),
}

impl BoundExpr {
    pub fn eval(&self, env: &BTreeMap<String, i64>) -> Result<i64> {
        Ok(match self {
            BoundExpr::Affine(e) => e.eval(env)?,
            BoundExpr::Min(a, b) => a.eval(env)?.min(b.eval(env)?),
            BoundExpr::Max(a, b) => a.eval(env)?.max(b.eval(env)?),
            BoundExpr::FloorDiv(e, d) => floord(e.eval(env)?, *d),
            BoundExpr::CeilDiv(e, d) => ceild(e.eval(env)?, *d),
        })
    }
}

impl fmt::Display for BoundExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundExpr::Affine(e) => write!(f, "{e}"),
            BoundExpr::Min(a, b) => write!(f, "min({a},{b})"),
            BoundExpr::Max(a, b) => write!(f, "max({a},{b})"),
            BoundExpr::FloorDiv(e, d) => write!(f, "floord({e},{d})"),
            BoundExpr::CeilDiv(e, d) => write!(f, "ceild({e},{d})"),
        }
    }
}

/// Directive roles attached to loops at generation time; emission decides
/// whether to print them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pragma {
    /// `#pragma omp parallel` region with `#pragma omp for schedule(static)`.
    OmpParallelFor,
    /// `#pragma ivdep` plus `#pragma omp simd`.
    Simd,
}

/// A value computed once per iteration of the loop it is attached to and
/// reused by the statement body, like `int skew = 4*time;`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hoist {
    pub name: String,
    pub expr: AffineExpr,
    /// Buffered time slots take the expression modulo this.
    pub modulus: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopNode {
    pub iterator: String,
    pub lower: BoundExpr,
    pub upper: BoundExpr,
    pub pragmas: Vec<Pragma>,
    pub hoists: Vec<Hoist>,
}

/// The statement at the bottom of the nest.
#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    /// Weighted-sum stencil update over a named array.
    Stencil {
        array: String,
        /// Original dimension names, time first.
        dims: Vec<String>,
        /// Per original dimension, the expression over loop iterators that
        /// recovers the original coordinate.
        translations: Vec<AffineExpr>,
        /// Sorted read offsets with their fixed weights.
        reads: Vec<(Vec<i64>, f32)>,
        /// Hoisted time-slot temporaries: (name, time offset).
        time_slots: Vec<(String, i64)>,
    },
    /// Abstract statement call, used when scanning plain polyhedra.
    Call { name: String, args: Vec<AffineExpr> },
}

/// A perfect loop nest with a single statement.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopAst {
    pub loops: Vec<LoopNode>,
    pub body: Body,
}

impl LoopAst {
    pub fn iterator_order(&self) -> Vec<&str> {
        self.loops.iter().map(|l| l.iterator.as_str()).collect()
    }

    /// Execute the loop bounds by direct interpretation and return every
    /// visited iterator tuple in visit order.
    pub fn walk(&self, params: &BTreeMap<String, i64>) -> Result<Vec<Vec<i64>>> {
        let mut env = params.clone();
        let mut point = Vec::with_capacity(self.loops.len());
        let mut out = Vec::new();
        self.walk_level(0, &mut env, &mut point, &mut out)?;
        Ok(out)
    }

    fn walk_level(
        &self,
        level: usize,
        env: &mut BTreeMap<String, i64>,
        point: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) -> Result<()> {
        if level == self.loops.len() {
            out.push(point.clone());
            return Ok(());
        }
        let node = &self.loops[level];
        let lo = node.lower.eval(env)?;
        let hi = node.upper.eval(env)?;
        for v in lo..=hi {
            env.insert(node.iterator.clone(), v);
            point.push(v);
            self.walk_level(level + 1, env, point, out)?;
            point.pop();
            env.remove(&node.iterator);
        }
        Ok(())
    }
}

/// Collapse a bound list into one expression: drop duplicates and bounds
/// dominated by a syntactically comparable one, fold constant divisions,
/// then chain the survivors with `max` (lower) or `min` (upper).
fn combine_bounds(bounds: &[Bound], lower: bool) -> BoundExpr {
    let mut kept: Vec<Bound> = Vec::new();
    for b in bounds {
        let mut dominated = false;
        for k in &mut kept {
            if k.divisor == b.divisor && same_coeffs(&k.expr, &b.expr) {
                // Same shape: only the constant decides which is tighter.
                if lower == (b.expr.constant_part() > k.expr.constant_part()) {
                    *k = b.clone();
                }
                dominated = true;
                break;
            }
        }
        if !dominated {
            kept.push(b.clone());
        }
    }
    kept.sort_by(|a, b| (a.divisor, &a.expr).cmp(&(b.divisor, &b.expr)));
    let mut exprs = kept.into_iter().map(|b| {
        if b.divisor == 1 {
            BoundExpr::Affine(b.expr)
        } else if b.expr.is_constant() {
            let c = b.expr.constant_part();
            let v = if lower {
                ceild(c, b.divisor)
            } else {
                floord(c, b.divisor)
            };
            BoundExpr::Affine(AffineExpr::constant(v))
        } else if lower {
            BoundExpr::CeilDiv(Box::new(BoundExpr::Affine(b.expr)), b.divisor)
        } else {
            BoundExpr::FloorDiv(Box::new(BoundExpr::Affine(b.expr)), b.divisor)
        }
    });
    let first = exprs.next().expect("at least one bound");
    exprs.fold(first, |acc, e| {
        if lower {
            BoundExpr::Max(Box::new(acc), Box::new(e))
        } else {
            BoundExpr::Min(Box::new(acc), Box::new(e))
        }
    })
}

fn same_coeffs(a: &AffineExpr, b: &AffineExpr) -> bool {
    a.terms().eq(b.terms())
}

/// Generate the loop-nest AST for a transformed program by recursive
/// projection, outermost dimension first.
pub fn generate_loop_ast(program: &TransformedProgram) -> Result<LoopAst> {
    let perm = program.schedule.as_permutation().ok_or_else(|| {
        Error::InvalidConfig("program schedule is not a pure permutation of the iterators".into())
    })?;
    // Loops take the schedule's output names (the scattering names when the
    // program came from a CLooG file).
    let out_names = program.schedule.output_names().to_vec();
    let ordered: Domain = program
        .domain
        .reorder_iterators(&perm)?
        .rename_iterators(&out_names)?;
    let renaming: BTreeMap<&str, &str> = perm
        .iter()
        .enumerate()
        .map(|(k, &src)| {
            (
                program.domain.iterators()[src].as_str(),
                out_names[k].as_str(),
            )
        })
        .collect();
    let chain = ordered.projection_chain()?;

    let mut loops = Vec::with_capacity(ordered.iterators().len());
    for (level, var) in ordered.iterators().iter().enumerate() {
        let (lowers, uppers) = chain[level].bounds_for(var)?;
        if lowers.is_empty() || uppers.is_empty() {
            return Err(Error::Unbounded(var.clone()));
        }
        loops.push(LoopNode {
            iterator: var.clone(),
            lower: combine_bounds(&lowers, true),
            upper: combine_bounds(&uppers, false),
            pragmas: Vec::new(),
            hoists: Vec::new(),
        });
    }

    let body = match &program.stencil {
        Some(spec) => {
            decorate_stencil_loops(program, &mut loops)?;
            let mut offsets = spec.read_accesses.clone();
            offsets.sort();
            let reads = offsets
                .into_iter()
                .enumerate()
                .map(|(k, r)| (r, 1.0f32 / (k as f32 + 2.0)))
                .collect::<Vec<_>>();
            let mut time_offsets: Vec<i64> = std::iter::once(0)
                .chain(reads.iter().map(|(r, _)| r[0]))
                .collect();
            time_offsets.sort();
            time_offsets.dedup();
            let time_slots = time_offsets
                .iter()
                .enumerate()
                .map(|(k, &o)| (format!("t{k}"), o))
                .collect();
            Body::Stencil {
                array: "u".to_string(),
                dims: spec.dims.clone(),
                translations: program
                    .body_translation
                    .iter()
                    .map(|(_, e)| e.rename(&renaming))
                    .collect(),
                reads,
                time_slots,
            }
        }
        None => Body::Call {
            name: "S1".to_string(),
            args: program
                .body_translation
                .iter()
                .map(|(_, e)| e.rename(&renaming))
                .collect(),
        },
    };

    Ok(LoopAst { loops, body })
}

/// Attach pragmas and hoists for a stencil nest: the parallel loop is the
/// outermost spatial point loop inside the time loop, the SIMD loop is the
/// vectorized (or innermost) point loop, and the skew amount plus buffered
/// time slots are hoisted into the time loop.
fn decorate_stencil_loops(
    program: &TransformedProgram,
    loops: &mut [LoopNode],
) -> Result<()> {
    let spec = program.stencil.as_ref().expect("stencil present");
    let time = spec.time_dim().to_string();
    let time_pos = loops
        .iter()
        .position(|l| l.iterator == time)
        .ok_or_else(|| Error::UnknownVariable(time.clone()))?;

    // Parallel loop: first spatial point loop after time.
    let parallel = loops
        .iter()
        .position(|l| spec.spatial_dims().contains(&l.iterator));
    if let Some(p) = parallel {
        if p > time_pos {
            loops[p].pragmas.push(Pragma::OmpParallelFor);
        }
    }

    // SIMD loop: the vectorized dimension, or the innermost point loop.
    let simd = match &spec.vectorized_dim {
        Some(v) => loops.iter().position(|l| &l.iterator == v),
        None => spec
            .spatial_dims()
            .last()
            .and_then(|d| loops.iter().position(|l| &l.iterator == d)),
    };
    if let Some(s) = simd {
        loops[s].pragmas.push(Pragma::Simd);
    }

    // Hoists live in the time loop, where their value is fixed.
    let mut hoists = Vec::new();
    let nonzero: Vec<(&String, i64)> = program
        .skew_factors
        .iter()
        .filter(|(_, f)| **f > 0)
        .map(|(d, f)| (d, *f))
        .collect();
    if !nonzero.is_empty() {
        let factors: Vec<i64> = nonzero.iter().map(|(_, f)| *f).collect();
        if factors.windows(2).all(|w| w[0] == w[1]) {
            hoists.push(Hoist {
                name: "skew".to_string(),
                expr: AffineExpr::term(&time, factors[0]),
                modulus: None,
            });
        } else {
            for (dim, f) in &nonzero {
                hoists.push(Hoist {
                    name: format!("skew_{dim}"),
                    expr: AffineExpr::term(&time, *f),
                    modulus: None,
                });
            }
        }
    }
    let mut time_offsets: Vec<i64> = std::iter::once(0)
        .chain(spec.read_accesses.iter().map(|r| r[0]))
        .collect();
    time_offsets.sort();
    time_offsets.dedup();
    for (k, o) in time_offsets.iter().enumerate() {
        hoists.push(Hoist {
            name: format!("t{k}"),
            expr: AffineExpr::var(&time)
                .add_constant(*o)
                .map_err(|_| Error::Overflow)?,
            modulus: spec.time_buffer,
        });
    }
    loops[time_pos].hoists = hoists;
    Ok(())
}

/// True when the loop marked parallel carries no dependence: every
/// dependence with zero distance in all point loops enclosing the parallel
/// one also has zero distance in the parallel dimension itself.
pub fn parallel_loop_is_safe(program: &TransformedProgram, ast: &LoopAst) -> bool {
    let Some(spec) = &program.stencil else {
        return true;
    };
    let Some(parallel) = ast
        .loops
        .iter()
        .position(|l| l.pragmas.contains(&Pragma::OmpParallelFor))
    else {
        return true;
    };
    let deps = spec.extract_dependences();
    let factor_list: Vec<(usize, i64)> = spec
        .dims
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, d)| (k, program.skew_factors.get(d).copied().unwrap_or(0)))
        .collect();
    let skewed = crate::legality::skew_dependences(&deps, &factor_list);
    let dim_index = |name: &str| spec.dims.iter().position(|d| d == name);
    let parallel_dim = match dim_index(&ast.loops[parallel].iterator) {
        Some(k) => k,
        None => return true,
    };
    let enclosing: Vec<usize> = ast.loops[..parallel]
        .iter()
        .filter_map(|l| dim_index(&l.iterator))
        .collect();
    skewed.iter().all(|d| {
        let carried_outside = enclosing.iter().any(|&k| d.components()[k] != 0);
        carried_outside || d.components()[parallel_dim] == 0
    })
}

/// Emission switches; all off gives a bare loop nest.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmitOptions {
    pub omp: bool,
    pub simd: bool,
    pub denormals: bool,
    pub compilable_wrapper: bool,
}

// Helper macros exactly as the generated code expects them.
const MACRO_FLOORD: &str = "#define floord(n,d) (((n)<0) ? -((-(n)+(d)-1)/(d)) : (n)/(d))";
const MACRO_CEILD: &str = "#define ceild(n,d) (((n)<0) ? -((-(n))/(d)) : ((n)+(d)-1)/(d))";
const MACRO_MAX: &str = "#define max(a,b) (((a) > (b)) ? (a) : (b))";
const MACRO_MIN: &str = "#define min(a,b) (((a) < (b)) ? (a) : (b))";

struct Emitter<'a> {
    ast: &'a LoopAst,
    opts: EmitOptions,
    out: String,
}

impl<'a> Emitter<'a> {
    fn line(&mut self, indent: usize, text: &str) {
        for _ in 0..indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn emit_nest(&mut self, level: usize, indent: usize) {
        if level == self.ast.loops.len() {
            self.emit_body(indent);
            return;
        }
        let node = &self.ast.loops[level];
        let parallel_here = self.opts.omp && node.pragmas.contains(&Pragma::OmpParallelFor);
        let denormals_here = self.opts.denormals && node.pragmas.contains(&Pragma::OmpParallelFor);
        let mut indent = indent;
        if parallel_here {
            self.line(indent, "#pragma omp parallel");
            self.line(indent, "{");
            indent += 1;
        }
        if denormals_here {
            self.line(indent, "_MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);");
            self.line(indent, "_MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);");
        }
        if parallel_here {
            self.line(indent, "#pragma omp for schedule(static)");
        }
        if self.opts.simd && node.pragmas.contains(&Pragma::Simd) {
            self.line(indent, "#pragma ivdep");
            self.line(indent, "#pragma omp simd");
        }
        let header = format!(
            "for (int {it} = {lo}; {it} <= {hi}; {it}++) {{",
            it = node.iterator,
            lo = node.lower,
            hi = node.upper
        );
        self.line(indent, &header);
        for h in &node.hoists {
            let decl = match h.modulus {
                Some(m) => format!("int {} = ({}) % {};", h.name, h.expr, m),
                None => format!("int {} = {};", h.name, h.expr),
            };
            self.line(indent + 1, &decl);
        }
        self.emit_nest(level + 1, indent + 1);
        self.line(indent, "}");
        if parallel_here {
            self.line(indent - 1, "}");
        }
    }

    fn emit_body(&mut self, indent: usize) {
        match &self.ast.body {
            Body::Call { name, args } => {
                let rendered: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                self.line(indent, &format!("{name}({});", rendered.join(", ")));
            }
            Body::Stencil {
                array,
                dims,
                translations,
                reads,
                time_slots,
            } => {
                let hoists: Vec<&Hoist> =
                    self.ast.loops.iter().flat_map(|l| l.hoists.iter()).collect();
                let slot_name = |offset: i64| {
                    time_slots
                        .iter()
                        .find(|(_, o)| *o == offset)
                        .map(|(n, _)| n.clone())
                        .unwrap_or_else(|| format!("({})", offset))
                };
                let index = |dim_idx: usize, offset: i64| -> String {
                    if dim_idx == 0 {
                        return slot_name(offset);
                    }
                    let dim = &dims[dim_idx];
                    let tr = &translations[dim_idx];
                    let mut base = tr.to_string();
                    // Prefer the hoisted skew variable over the raw
                    // translation: `x - 4*time` prints as `x - skew`.
                    for h in &hoists {
                        if h.modulus.is_none() {
                            let rebuilt = AffineExpr::var(dim).sub(&h.expr);
                            if let Ok(r) = rebuilt {
                                if &r == tr {
                                    base = format!("{dim} - {}", h.name);
                                    break;
                                }
                            }
                        }
                    }
                    match offset {
                        0 => base,
                        o if o > 0 => format!("{base} + {o}"),
                        o => format!("{base} - {}", -o),
                    }
                };
                let cell = |offsets: &[i64]| -> String {
                    let mut s = array.clone();
                    for (k, o) in offsets.iter().enumerate() {
                        s.push_str(&format!("[{}]", index(k, *o)));
                    }
                    s
                };
                let zero_off = vec![0i64; dims.len()];
                let lhs = cell(&zero_off);
                if reads.is_empty() {
                    self.line(indent, &format!("{lhs} = 0.0F;"));
                    return;
                }
                let mut stmt = format!("{lhs} =");
                for (k, (r, w)) in reads.iter().enumerate() {
                    let term = format!("{w}F*{}", cell(r));
                    if k == 0 {
                        stmt.push(' ');
                        stmt.push_str(&term);
                    } else {
                        self.line(indent, &stmt);
                        stmt = format!("    + {term}");
                    }
                }
                stmt.push(';');
                self.line(indent, &stmt);
            }
        }
    }
}

/// Render the nest as C source. Identical input always yields byte-identical
/// output.
pub fn emit_c(ast: &LoopAst, opts: EmitOptions) -> String {
    let mut e = Emitter {
        ast,
        opts,
        out: String::new(),
    };
    let uses_ceild = {
        fn uses(b: &BoundExpr) -> bool {
            match b {
                BoundExpr::CeilDiv(..) => true,
                BoundExpr::Min(a, b) | BoundExpr::Max(a, b) => uses(a) || uses(b),
                BoundExpr::FloorDiv(a, _) => uses(a),
                BoundExpr::Affine(_) => false,
            }
        }
        ast.loops.iter().any(|l| uses(&l.lower) || uses(&l.upper))
    };
    if opts.compilable_wrapper {
        if opts.denormals {
            e.out.push_str("#include <xmmintrin.h>\n#include <pmmintrin.h>\n");
        }
        e.out.push_str(MACRO_FLOORD);
        e.out.push('\n');
        if uses_ceild {
            e.out.push_str(MACRO_CEILD);
            e.out.push('\n');
        }
        e.out.push_str(MACRO_MAX);
        e.out.push('\n');
        e.out.push_str(MACRO_MIN);
        e.out.push('\n');
        e.out.push('\n');
        emit_wrapper_open(&mut e);
        e.emit_nest(0, 1);
        e.out.push_str("}\n");
    } else {
        e.emit_nest(0, 0);
    }
    e.out
}

/// Parameters referenced anywhere in the nest's bounds, in first-use order.
fn bound_parameters(ast: &LoopAst) -> Vec<String> {
    let mut params = Vec::new();
    let iterators: Vec<&str> = ast.loops.iter().map(|l| l.iterator.as_str()).collect();
    let visit_expr = |e: &AffineExpr, params: &mut Vec<String>| {
        for v in e.variables() {
            if !iterators.contains(&v) && !params.iter().any(|p| p == v) {
                params.push(v.to_string());
            }
        }
    };
    fn visit(b: &BoundExpr, f: &mut impl FnMut(&AffineExpr)) {
        match b {
            BoundExpr::Affine(e) => f(e),
            BoundExpr::Min(a, b) | BoundExpr::Max(a, b) => {
                visit(a, f);
                visit(b, f);
            }
            BoundExpr::FloorDiv(a, _) | BoundExpr::CeilDiv(a, _) => visit(a, f),
        }
    }
    for l in &ast.loops {
        visit(&l.lower, &mut |e| visit_expr(e, &mut params));
        visit(&l.upper, &mut |e| visit_expr(e, &mut params));
    }
    params
}

fn emit_wrapper_open(e: &mut Emitter<'_>) {
    let params = bound_parameters(e.ast);
    let mut args: Vec<String> = params.iter().map(|p| format!("int {p}")).collect();
    match &e.ast.body {
        Body::Stencil { array, dims, .. } => {
            // The grid is a variably-sized array covering halo cells; only
            // the leading (time) extent is left open.
            let spatial: Vec<String> = dims
                .iter()
                .skip(1)
                .map(|d| format!("[{d}_ext]"))
                .collect();
            for d in dims.iter().skip(1) {
                args.push(format!("int {d}_ext"));
            }
            args.push(format!("float {array}[]{}", spatial.join("")));
            e.out.push_str(
                "/* Grid extents must cover the stencil halo; the time extent is the\n\
                 \x20  buffer size when the time dimension is buffered. Callers must\n\
                 \x20  pass parameters for which every loop range below is non-empty;\n\
                 \x20  no runtime guard is emitted. */\n",
            );
        }
        Body::Call { name, .. } => {
            e.out
                .push_str(&format!("#define {name}(...) /* statement */\n"));
        }
    }
    e.out
        .push_str(&format!("void kernel({})\n{{\n", args.join(", ")));
}
