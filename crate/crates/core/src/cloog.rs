//! Reader and writer for the CLooG command-line input format.
//!
//! The format is a sequence of whitespace-separated integer matrices with
//! `#` comments: a context (constraints on the parameters), one or more
//! statement domains, and optional scattering functions prescribing the
//! output loop order. Only the features these files actually use are
//! supported; anything else is a parse error rather than a silent skip.
//! Round-tripping preserves the token stream exactly, modulo comments and
//! whitespace.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::polyhedron::{AffineExpr, Constraint, ConstraintKind, Domain};
use crate::transform::{Schedule, TransformedProgram};

/// A dense integer matrix as it appears in the file, row-major. The first
/// column of every row is the equality flag: 0 for `= 0`, 1 for `>= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloogMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl CloogMatrix {
    pub fn at(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// One statement: its domain matrix plus the trailing option line, which is
/// preserved verbatim on round-trip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloogStatement {
    pub domain: CloogMatrix,
    pub options: Vec<i64>,
}

/// A parsed CLooG input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloogProblem {
    pub language: char,
    /// Constraints on the parameters; `None` when the file declares no
    /// parameters with a bare `0`.
    pub context: Option<CloogMatrix>,
    pub param_names: Option<Vec<String>>,
    pub statements: Vec<CloogStatement>,
    pub iterator_names: Option<Vec<String>>,
    pub scatterings: Vec<CloogMatrix>,
    /// Names for the scattering dimensions; these become the generated
    /// loop iterators.
    pub scattering_names: Option<Vec<String>>,
}

impl CloogProblem {
    pub fn num_parameters(&self) -> usize {
        self.context.as_ref().map_or(0, |m| m.cols - 2)
    }

    pub fn num_iterators(&self, statement: usize) -> usize {
        self.statements[statement].domain.cols - 2 - self.num_parameters()
    }

    fn parameter_names_or_default(&self) -> Vec<String> {
        match &self.param_names {
            Some(n) => n.clone(),
            None => (0..self.num_parameters()).map(|i| format!("p{i}")).collect(),
        }
    }

    fn iterator_names_or_default(&self, statement: usize) -> Vec<String> {
        match &self.iterator_names {
            Some(n) => n.clone(),
            None => (0..self.num_iterators(statement))
                .map(|i| format!("i{i}"))
                .collect(),
        }
    }
}

/// One logical line of the file: comment stripped, tokenized.
struct Lines<'a> {
    items: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .filter_map(|(i, raw)| {
                let noc = match raw.find('#') {
                    Some(p) => &raw[..p],
                    None => raw,
                };
                let tokens: Vec<&str> = noc.split_whitespace().collect();
                if tokens.is_empty() {
                    None
                } else {
                    Some((i + 1, tokens))
                }
            })
            .collect();
        Lines { items, pos: 0 }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &[&'a str])> {
        let item = self.items.get(self.pos).ok_or_else(|| Error::CloogParse {
            line: self.items.last().map_or(0, |(l, _)| *l),
            message: format!("unexpected end of file, expected {what}"),
        })?;
        self.pos += 1;
        Ok((item.0, &item.1))
    }

    fn next_ints(&mut self, what: &str) -> Result<(usize, Vec<i64>)> {
        let (line, tokens) = self.next(what)?;
        let mut out = Vec::with_capacity(tokens.len());
        for t in tokens {
            out.push(t.parse::<i64>().map_err(|_| Error::CloogParse {
                line,
                message: format!("expected integer, got `{t}` (reading {what})"),
            })?);
        }
        Ok((line, out))
    }

    fn next_matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<CloogMatrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let (line, ints) = self.next_ints(what)?;
            if ints.len() != cols {
                return Err(Error::CloogParse {
                    line,
                    message: format!(
                        "{what} row {r} has {} entries, expected {cols}",
                        ints.len()
                    ),
                });
            }
            data.extend(ints);
        }
        validate_flags(&data, cols, what)?;
        Ok(CloogMatrix { rows, cols, data })
    }
}

fn validate_flags(data: &[i64], cols: usize, what: &str) -> Result<()> {
    for (r, row) in data.chunks(cols).enumerate() {
        if row[0] != 0 && row[0] != 1 {
            return Err(Error::CloogParse {
                line: 0,
                message: format!(
                    "{what} row {r} has equality flag {}, expected 0 or 1",
                    row[0]
                ),
            });
        }
    }
    Ok(())
}

/// Parse a `.cloog` input file.
pub fn parse_cloog_input(text: &str) -> Result<CloogProblem> {
    let mut lines = Lines::new(text);

    let (line, lang) = lines.next("language")?;
    if lang.len() != 1 || lang[0].len() != 1 {
        return Err(Error::CloogParse {
            line,
            message: format!("expected a one-letter language line, got `{}`", lang.join(" ")),
        });
    }
    let language = lang[0].chars().next().unwrap();

    let (ctx_line, ctx) = lines.next_ints("context dimensions")?;
    let (context, param_names) = match ctx.as_slice() {
        [0] => (None, None),
        [rows, cols] if *rows >= 0 && *cols >= 2 => {
            let m = lines.next_matrix(*rows as usize, *cols as usize, "context")?;
            let (flag_line, flag) = lines.next_ints("parameter-names flag")?;
            let names = match flag.as_slice() {
                [0] => None,
                [1] => {
                    let (nline, toks) = lines.next("parameter names")?;
                    if toks.len() != *cols as usize - 2 {
                        return Err(Error::CloogParse {
                            line: nline,
                            message: format!(
                                "expected {} parameter names, got {}",
                                *cols - 2,
                                toks.len()
                            ),
                        });
                    }
                    Some(toks.iter().map(|s| s.to_string()).collect())
                }
                _ => {
                    return Err(Error::CloogParse {
                        line: flag_line,
                        message: "parameter-names flag must be 0 or 1".into(),
                    })
                }
            };
            (Some(m), names)
        }
        _ => {
            return Err(Error::CloogParse {
                line: ctx_line,
                message: "expected `0` or `<rows> <cols>` for the context".into(),
            })
        }
    };

    let (_, n) = lines.next_ints("number of statements")?;
    let nstatements = single(&n, "number of statements")?;
    let mut statements = Vec::with_capacity(nstatements);
    for _ in 0..nstatements {
        let (dline, dims) = lines.next_ints("statement matrix dimensions")?;
        let (rows, cols) = pair(&dims, dline, "statement matrix dimensions")?;
        let domain = lines.next_matrix(rows, cols, "statement domain")?;
        let (_, options) = lines.next_ints("statement option line")?;
        statements.push(CloogStatement { domain, options });
    }

    let (iflag_line, iflag) = lines.next_ints("iterator-names flag")?;
    let iterator_names = match iflag.as_slice() {
        [0] => None,
        [1] => {
            let (_, toks) = lines.next("iterator names")?;
            Some(toks.iter().map(|s| s.to_string()).collect())
        }
        _ => {
            return Err(Error::CloogParse {
                line: iflag_line,
                message: "iterator-names flag must be 0 or 1".into(),
            })
        }
    };

    let (_, ns) = lines.next_ints("number of scattering functions")?;
    let nscatterings = single(&ns, "number of scattering functions")?;
    let mut scatterings = Vec::with_capacity(nscatterings);
    for _ in 0..nscatterings {
        let (dline, dims) = lines.next_ints("scattering matrix dimensions")?;
        let (rows, cols) = pair(&dims, dline, "scattering matrix dimensions")?;
        scatterings.push(lines.next_matrix(rows, cols, "scattering")?);
    }

    let scattering_names = if nscatterings > 0 {
        let (sflag_line, sflag) = lines.next_ints("scattering-names flag")?;
        match sflag.as_slice() {
            [0] => None,
            [1] => {
                let (_, toks) = lines.next("scattering names")?;
                Some(toks.iter().map(|s| s.to_string()).collect())
            }
            _ => {
                return Err(Error::CloogParse {
                    line: sflag_line,
                    message: "scattering-names flag must be 0 or 1".into(),
                })
            }
        }
    } else {
        None
    };

    if lines.pos != lines.items.len() {
        let (line, toks) = lines.next("end of file")?;
        return Err(Error::CloogParse {
            line,
            message: format!("trailing content `{}`", toks.join(" ")),
        });
    }

    Ok(CloogProblem {
        language,
        context,
        param_names,
        statements,
        iterator_names,
        scatterings,
        scattering_names,
    })
}

fn single(v: &[i64], what: &str) -> Result<usize> {
    match v {
        [n] if *n >= 0 => Ok(*n as usize),
        _ => Err(Error::CloogParse {
            line: 0,
            message: format!("expected a single non-negative integer for {what}"),
        }),
    }
}

fn pair(v: &[i64], line: usize, what: &str) -> Result<(usize, usize)> {
    match v {
        [r, c] if *r >= 0 && *c >= 1 => Ok((*r as usize, *c as usize)),
        _ => Err(Error::CloogParse {
            line,
            message: format!("expected `<rows> <cols>` for {what}"),
        }),
    }
}

fn write_matrix(out: &mut String, m: &CloogMatrix) {
    writeln!(out, "{} {}", m.rows, m.cols).unwrap();
    for r in 0..m.rows {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
}

/// Serialize a problem back to the text format. The token stream equals the
/// parsed input's, so `parse(write(p)) == p`.
pub fn write_cloog_input(p: &CloogProblem) -> String {
    let mut out = String::new();
    writeln!(out, "# language").unwrap();
    writeln!(out, "{}", p.language).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "# Parameters & their constraints").unwrap();
    match &p.context {
        None => writeln!(out, "0").unwrap(),
        Some(m) => {
            write_matrix(&mut out, m);
            match &p.param_names {
                Some(names) => {
                    writeln!(out, "1").unwrap();
                    writeln!(out, "{}", names.join(" ")).unwrap();
                }
                None => writeln!(out, "0").unwrap(),
            }
        }
    }
    writeln!(out).unwrap();
    writeln!(out, "# Number of statements").unwrap();
    writeln!(out, "{}", p.statements.len()).unwrap();
    for s in &p.statements {
        write_matrix(&mut out, &s.domain);
        let opts: Vec<String> = s.options.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", opts.join(" ")).unwrap();
    }
    match &p.iterator_names {
        Some(names) => {
            writeln!(out, "# iterator names").unwrap();
            writeln!(out, "1").unwrap();
            writeln!(out, "{}", names.join(" ")).unwrap();
        }
        None => writeln!(out, "0").unwrap(),
    }
    writeln!(out).unwrap();
    writeln!(out, "# Number of scattering functions").unwrap();
    writeln!(out, "{}", p.scatterings.len()).unwrap();
    for m in &p.scatterings {
        write_matrix(&mut out, m);
    }
    if !p.scatterings.is_empty() {
        match &p.scattering_names {
            Some(names) => {
                writeln!(out, "# scattering names").unwrap();
                writeln!(out, "1").unwrap();
                writeln!(out, "{}", names.join(" ")).unwrap();
            }
            None => writeln!(out, "0").unwrap(),
        }
    }
    out
}

/// The comment-stripped token stream, the unit of round-trip fidelity.
pub fn tokens(text: &str) -> Vec<String> {
    text.lines()
        .flat_map(|raw| {
            let noc = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            noc.split_whitespace()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Convert one statement's domain matrix to a [`Domain`]. Column layout is
/// `flag, iterators.., parameters.., constant`.
pub fn to_domain(p: &CloogProblem, statement: usize) -> Result<Domain> {
    let s = p.statements.get(statement).ok_or(Error::DimensionMismatch {
        expected: p.statements.len(),
        got: statement,
    })?;
    let params = p.parameter_names_or_default();
    let iters = p.iterator_names_or_default(statement);
    if iters.len() + params.len() + 2 != s.domain.cols {
        return Err(Error::CloogParse {
            line: 0,
            message: format!(
                "domain has {} columns but {} iterators and {} parameters",
                s.domain.cols,
                iters.len(),
                params.len()
            ),
        });
    }
    let mut constraints = Vec::with_capacity(s.domain.rows);
    for r in 0..s.domain.rows {
        let row = s.domain.row(r);
        let mut expr = AffineExpr::constant(row[s.domain.cols - 1]);
        for (k, name) in iters.iter().enumerate() {
            expr.add_term(name, row[1 + k]).map_err(|_| Error::Overflow)?;
        }
        for (j, name) in params.iter().enumerate() {
            expr.add_term(name, row[1 + iters.len() + j])
                .map_err(|_| Error::Overflow)?;
        }
        constraints.push(if row[0] == 0 {
            Constraint::equality(expr)
        } else {
            Constraint::nonneg(expr)
        });
    }
    Domain::new(iters, params, constraints)
}

/// Interpret a scattering matrix as a pure permutation of the iterators and
/// build the corresponding schedule. Columns are
/// `flag, c1..cn, iterators.., parameters.., constant`; row k must read
/// `c_k - iter_j = 0`.
pub fn scattering_to_schedule(p: &CloogProblem, scattering: usize) -> Result<Schedule> {
    let m = p.scatterings.get(scattering).ok_or(Error::DimensionMismatch {
        expected: p.scatterings.len(),
        got: scattering,
    })?;
    let nparams = p.num_parameters();
    let nout = m.rows;
    let niter = m
        .cols
        .checked_sub(2 + nout + nparams)
        .ok_or(Error::UnsupportedScattering)?;
    let iters = if p.statements.is_empty() {
        (0..niter).map(|i| format!("i{i}")).collect::<Vec<_>>()
    } else {
        p.iterator_names_or_default(0)
    };
    if iters.len() != niter {
        return Err(Error::UnsupportedScattering);
    }

    let mut linear = Vec::with_capacity(nout);
    let mut output_names = Vec::with_capacity(nout);
    for r in 0..nout {
        let row = m.row(r);
        if row[0] != 0 {
            return Err(Error::UnsupportedScattering);
        }
        // Output block must be the identity.
        for (k, &v) in row[1..1 + nout].iter().enumerate() {
            if v != i64::from(k == r) {
                return Err(Error::UnsupportedScattering);
            }
        }
        // Parameter coefficients and constant must vanish.
        if row[1 + nout + niter..].iter().any(|&v| v != 0) {
            return Err(Error::UnsupportedScattering);
        }
        // Exactly one -1 in the iterator block.
        let iter_block = &row[1 + nout..1 + nout + niter];
        let mut src = None;
        for (j, &v) in iter_block.iter().enumerate() {
            match v {
                0 => {}
                -1 if src.is_none() => src = Some(j),
                _ => return Err(Error::UnsupportedScattering),
            }
        }
        let src = src.ok_or(Error::UnsupportedScattering)?;
        let mut lrow = vec![0i64; niter];
        lrow[src] = 1;
        linear.push(lrow);
        let name = match &p.scattering_names {
            Some(names) if names.len() == nout => names[r].clone(),
            _ => iters[src].clone(),
        };
        output_names.push(name);
    }
    Schedule::new(linear, vec![0; nout], output_names)
}

/// Express a transformed program as a CLooG problem: the domain matrix in
/// transformed coordinates and the loop order as a permutation scattering,
/// the same encoding the bundled tiled example input uses.
pub fn from_transformed(program: &TransformedProgram) -> Result<CloogProblem> {
    let domain = &program.domain;
    let iters = domain.iterators();
    let params = domain.parameters();
    let cols = 1 + iters.len() + params.len() + 1;
    let mut data = Vec::new();
    for c in domain.constraints() {
        data.push(i64::from(c.kind == ConstraintKind::NonNeg));
        for it in iters {
            data.push(c.expr().coeff(it));
        }
        for pm in params {
            data.push(c.expr().coeff(pm));
        }
        data.push(c.expr().constant_part());
    }
    let statement = CloogStatement {
        domain: CloogMatrix {
            rows: domain.constraints().len(),
            cols,
            data,
        },
        options: vec![0, 0, 0],
    };

    let perm = program
        .schedule
        .as_permutation()
        .ok_or(Error::UnsupportedScattering)?;
    let nout = perm.len();
    let scols = 1 + nout + iters.len() + params.len() + 1;
    let mut sdata = Vec::with_capacity(nout * scols);
    for (r, &src) in perm.iter().enumerate() {
        let mut row = vec![0i64; scols];
        row[1 + r] = 1;
        row[1 + nout + src] = -1;
        sdata.extend(row);
    }

    let context = if params.is_empty() {
        None
    } else {
        Some(CloogMatrix {
            rows: 0,
            cols: params.len() + 2,
            data: Vec::new(),
        })
    };

    Ok(CloogProblem {
        language: 'c',
        context,
        param_names: if params.is_empty() {
            None
        } else {
            Some(params.to_vec())
        },
        statements: vec![statement],
        iterator_names: Some(iters.to_vec()),
        scatterings: vec![CloogMatrix {
            rows: nout,
            cols: scols,
            data: sdata,
        }],
        scattering_names: Some(program.schedule.output_names().to_vec()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    const BASIC: &str = include_str!("../../../fixtures/basic.cloog");
    const TILED: &str = include_str!("../../../fixtures/tiled_awe.cloog");

    #[test]
    fn parse_basic_input() {
        let p = parse_cloog_input(BASIC).unwrap();
        assert_eq!(p.language, 'c');
        assert!(p.context.is_none());
        assert_eq!(p.statements.len(), 1);
        let d = &p.statements[0].domain;
        assert_eq!((d.rows, d.cols), (4, 4));
        assert_eq!(d.row(0), &[1, 1, 0, 0]);
        assert_eq!(d.row(3), &[1, 0, -1, 12]);
        assert!(p.scatterings.is_empty());
        assert_eq!(p.statements[0].options, vec![0, 0, 0]);
    }

    #[test]
    fn parse_tiled_input() {
        let p = parse_cloog_input(TILED).unwrap();
        assert_eq!(p.num_parameters(), 4);
        assert_eq!(
            p.param_names.as_deref(),
            Some(&["time_size".to_string(), "ub".into(), "lb".into(), "ts".into()][..])
        );
        let d = &p.statements[0].domain;
        assert_eq!((d.rows, d.cols), (14, 13));
        assert_eq!(p.num_iterators(0), 7);
        let s = &p.scatterings[0];
        assert_eq!((s.rows, s.cols), (7, 20));
        assert_eq!(
            p.scattering_names.as_deref(),
            Some(
                &["tt".to_string(), "xx".into(), "yy".into(), "time".into(), "x".into(), "y".into(), "z".into()][..]
            )
        );
    }

    #[test]
    fn minimal_empty_problem() {
        let p = parse_cloog_input("c\n0\n0\n0\n0\n").unwrap();
        assert!(p.statements.is_empty());
        assert!(p.scatterings.is_empty());
        let round = parse_cloog_input(&write_cloog_input(&p)).unwrap();
        assert_eq!(p, round);
    }

    #[test]
    fn round_trip_token_identical() {
        for text in [BASIC, TILED] {
            let p = parse_cloog_input(text).unwrap();
            let written = write_cloog_input(&p);
            assert_eq!(tokens(text), tokens(&written));
            assert_eq!(parse_cloog_input(&written).unwrap(), p);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let bad = "c\n0\n1\n4 4\n1 1 0 0\n1 -1 0 10\n1 -1 1\n1 0 -1 12\n0 0 0\n0\n0\n";
        assert!(matches!(
            parse_cloog_input(bad),
            Err(Error::CloogParse { .. })
        ));
    }

    #[test]
    fn non_integer_token_is_an_error() {
        let bad = "c\n0\n1\n1 4\n1 x 0 0\n0 0 0\n0\n0\n";
        assert!(matches!(
            parse_cloog_input(bad),
            Err(Error::CloogParse { .. })
        ));
    }

    #[test]
    fn basic_domain_semantics() {
        // for i in 0..=10, for j in i..=12
        let p = parse_cloog_input(BASIC).unwrap();
        let d = to_domain(&p, 0).unwrap();
        let pts = d.enumerate_points(&BTreeMap::new()).unwrap();
        let mut expected = Vec::new();
        for i in 0..=10i64 {
            for j in i..=12 {
                expected.push(vec![i, j]);
            }
        }
        assert_eq!(pts, expected);
    }

    #[test]
    fn tiled_row_semantics() {
        // Row 0 is "1 -8 1 0 ...": t - 8*tt >= 0.
        let p = parse_cloog_input(TILED).unwrap();
        let d = to_domain(&p, 0).unwrap();
        let c = &d.constraints()[0];
        assert_eq!(c.kind, ConstraintKind::NonNeg);
        assert_eq!(c.expr().coeff("i0"), -8); // tt
        assert_eq!(c.expr().coeff("i1"), 1); // t
    }

    #[test]
    fn tiled_scattering_is_the_expected_permutation() {
        let p = parse_cloog_input(TILED).unwrap();
        let s = scattering_to_schedule(&p, 0).unwrap();
        // Domain order (tt, t, xx, yy, x, y, z) -> output (tt, xx, yy, t, x, y, z)
        assert_eq!(s.as_permutation().unwrap(), vec![0, 2, 3, 1, 4, 5, 6]);
        assert_eq!(
            s.output_names(),
            &["tt".to_string(), "xx".into(), "yy".into(), "time".into(), "x".into(), "y".into(), "z".into()]
        );
    }

    #[test]
    fn non_permutation_scattering_rejected() {
        let mut p = parse_cloog_input(TILED).unwrap();
        // Corrupt one row: make c1 = tt + x.
        p.scatterings[0].data[12] = -1;
        assert!(matches!(
            scattering_to_schedule(&p, 0),
            Err(Error::UnsupportedScattering)
        ));
    }

    #[test]
    fn identity_scattering_shape() {
        use crate::stencil::parse_stencil_spec;
        use crate::transform::TransformedProgram;
        let spec =
            parse_stencil_spec("dims: t\nparams: \nbounds: t in [0, 3]\n").unwrap();
        let prog = TransformedProgram::untransformed(&spec);
        let p = from_transformed(&prog).unwrap();
        let s = &p.scatterings[0];
        // flag + output + iterator + constant
        assert_eq!((s.rows, s.cols), (1, 4));
        assert_eq!(s.row(0), &[0, 1, -1, 0]);
    }

    #[test]
    fn tiled_problem_scans_exactly_its_domain() {
        use crate::codegen::generate_loop_ast;
        use crate::transform::TransformedProgram;
        let p = parse_cloog_input(TILED).unwrap();
        let domain = to_domain(&p, 0).unwrap();
        let schedule = scattering_to_schedule(&p, 0).unwrap();
        let body_translation = domain
            .iterators()
            .iter()
            .map(|i| (i.clone(), AffineExpr::var(i)))
            .collect();
        let program = TransformedProgram {
            domain: domain.clone(),
            schedule: schedule.clone(),
            skew_factors: Default::default(),
            body_translation,
            tile_iters: Vec::new(),
            stencil: None,
        };
        let ast = generate_loop_ast(&program).unwrap();
        assert_eq!(
            ast.iterator_order(),
            vec!["tt", "xx", "yy", "time", "x", "y", "z"]
        );
        // Bind the parameters small (the file hardcodes spatial tile
        // stride 16, so ts must be 16) and compare the walked nest with
        // the enumerated domain.
        let mut params = BTreeMap::new();
        params.insert("time_size".to_string(), 5i64);
        params.insert("ub".to_string(), 24);
        params.insert("lb".to_string(), 4);
        params.insert("ts".to_string(), 16);
        let walked = ast.walk(&params).unwrap();
        let perm = schedule.as_permutation().unwrap();
        let ordered = domain
            .reorder_iterators(&perm)
            .unwrap()
            .rename_iterators(schedule.output_names())
            .unwrap();
        let enumerated = ordered.enumerate_points(&params).unwrap();
        assert!(!walked.is_empty());
        assert_eq!(walked, enumerated);
    }

    #[test]
    fn from_transformed_round_trips() {
        use crate::stencil::parse_stencil_spec;
        use crate::transform::{time_tile, TileConfig};
        let spec = parse_stencil_spec(
            "dims: time, x\nparams: T, N\nbounds: time in [1, T-1]; x in [0, N-1]\n\
             reads: (-1, -1), (-1, 1)\n",
        )
        .unwrap();
        let mut cfg = TileConfig::default();
        cfg.spatial_tile_sizes.insert("x".into(), 4);
        let prog = time_tile(&spec, &cfg).unwrap();
        let p = from_transformed(&prog).unwrap();
        let round = parse_cloog_input(&write_cloog_input(&p)).unwrap();
        assert_eq!(p, round);

        // The emitted domain means the same thing as the program's.
        let d = to_domain(&round, 0).unwrap();
        let mut params = BTreeMap::new();
        params.insert("T".to_string(), 5i64);
        params.insert("N".to_string(), 9i64);
        assert_eq!(
            d.enumerate_points(&params).unwrap().len(),
            prog.domain.enumerate_points(&params).unwrap().len()
        );
    }
}
