//! Stencil problem descriptions and uniform dependence extraction.
//!
//! A [`StencilSpec`] captures a space-time stencil: the ordered loop
//! dimensions (time outermost), inclusive affine bounds over named
//! parameters, the constant read offsets relative to the written point, and
//! the optional time-buffer size. Dependences are carried only through
//! time, so every read offset must have a strictly negative time component.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::polyhedron::{AffineExpr, Constraint, Domain};

/// An integer iteration distance per loop dimension, outermost (time) first.
///
/// For a write at iteration `w` reading from iteration `p`, the distance is
/// `w - p`: the number of iterations between producer and consumer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DependenceVector(pub Vec<i64>);

impl DependenceVector {
    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for DependenceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A space-time stencil problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilSpec {
    /// Loop dimensions, time first.
    pub dims: Vec<String>,
    /// Declared parameters, in declaration order.
    pub params: Vec<String>,
    /// Inclusive (lower, upper) bound per dimension, affine in the parameters.
    pub bounds: Vec<(AffineExpr, AffineExpr)>,
    /// Offset of the written cell; all zeros by convention.
    pub write_access: Vec<i64>,
    /// Constant read offsets; time component strictly negative.
    pub read_accesses: Vec<Vec<i64>>,
    /// Number of buffered time slices, when the time dimension is buffered.
    pub time_buffer: Option<u64>,
    /// Innermost dimension excluded from tiling (kept as a full loop).
    pub vectorized_dim: Option<String>,
    /// Floating-point operations per grid point, for reporting.
    pub flops_per_point: Option<u64>,
}

impl StencilSpec {
    pub fn time_dim(&self) -> &str {
        &self.dims[0]
    }

    pub fn spatial_dims(&self) -> &[String] {
        &self.dims[1..]
    }

    /// The iteration domain of the stencil as an affine constraint system.
    pub fn domain(&self) -> Domain {
        let mut constraints = Vec::new();
        for (dim, (lo, hi)) in self.dims.iter().zip(&self.bounds) {
            constraints.push(Constraint::lower_bound(dim, lo.clone()));
            constraints.push(Constraint::upper_bound(dim, hi.clone()));
        }
        Domain::new(self.dims.clone(), self.params.clone(), constraints)
            .expect("spec bounds reference undeclared variables")
    }

    /// Flow-dependence distance vectors induced by the read offsets.
    ///
    /// For each read offset `r` the writing iteration depends on the
    /// iteration `w + r` that produced the value, so the distance is `-r`.
    /// Duplicates are removed and the result is sorted lexicographically.
    pub fn extract_dependences(&self) -> Vec<DependenceVector> {
        let mut deps: Vec<DependenceVector> = self
            .read_accesses
            .iter()
            .map(|r| DependenceVector(r.iter().map(|c| -c).collect()))
            .collect();
        deps.sort();
        deps.dedup();
        deps
    }

    fn validate(&self, line_of: impl Fn(&str) -> usize) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::SpecParse {
                line: line_of("dims"),
                message: "at least one dimension (time) is required".into(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in self.dims.iter().chain(&self.params) {
            if !seen.insert(name) {
                return Err(Error::SpecParse {
                    line: line_of("dims"),
                    message: format!("duplicate name `{name}`"),
                });
            }
        }
        if self.bounds.len() != self.dims.len() {
            return Err(Error::SpecParse {
                line: line_of("bounds"),
                message: format!(
                    "expected bounds for {} dims, got {}",
                    self.dims.len(),
                    self.bounds.len()
                ),
            });
        }
        for r in &self.read_accesses {
            if r.len() != self.dims.len() {
                return Err(Error::SpecParse {
                    line: line_of("reads"),
                    message: format!(
                        "read offset {:?} has arity {}, expected {}",
                        r,
                        r.len(),
                        self.dims.len()
                    ),
                });
            }
            if r[0] >= 0 {
                return Err(Error::SpecParse {
                    line: line_of("reads"),
                    message: format!(
                        "read offset {r:?} has non-negative time offset; \
                         dependences must be carried through time"
                    ),
                });
            }
        }
        if let Some(v) = &self.vectorized_dim {
            if !self.spatial_dims().contains(v) {
                return Err(Error::SpecParse {
                    line: line_of("vectorized"),
                    message: format!("vectorized dimension `{v}` is not a spatial dimension"),
                });
            }
        }
        if self.time_buffer == Some(0) {
            return Err(Error::SpecParse {
                line: line_of("time_buffer"),
                message: "time_buffer must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Parse an affine expression over declared names: terms joined by `+`/`-`,
/// each an integer, a name, or `int*name`.
pub fn parse_affine(text: &str, line: usize) -> Result<AffineExpr> {
    let err = |message: String| Error::SpecParse { line, message };
    let text = text.trim();
    if text.is_empty() {
        return Err(err("empty expression".into()));
    }
    let mut expr = AffineExpr::constant(0);
    let mut rest = text;
    let mut sign = 1i64;
    // Leading sign.
    if let Some(r) = rest.strip_prefix('-') {
        sign = -1;
        rest = r.trim_start();
    } else if let Some(r) = rest.strip_prefix('+') {
        rest = r.trim_start();
    }
    loop {
        let end = rest
            .find(['+', '-'])
            .unwrap_or(rest.len());
        let term = rest[..end].trim();
        if term.is_empty() {
            return Err(err(format!("malformed expression `{text}`")));
        }
        let (coeff, name) = match term.split_once('*') {
            Some((a, b)) => {
                let (a, b) = (a.trim(), b.trim());
                // Either `int*name` or `name*int`.
                if let Ok(c) = a.parse::<i64>() {
                    (c, Some(b))
                } else if let Ok(c) = b.parse::<i64>() {
                    (c, Some(a))
                } else {
                    return Err(err(format!("bad term `{term}` in `{text}`")));
                }
            }
            None => match term.parse::<i64>() {
                Ok(c) => (c, None),
                Err(_) => (1, Some(term)),
            },
        };
        match name {
            Some(n) => {
                if n.is_empty() || !n.chars().all(|c| c.is_alphanumeric() || c == '_') {
                    return Err(err(format!("bad variable name `{n}` in `{text}`")));
                }
                expr.add_term(n, sign * coeff).map_err(|_| Error::Overflow)?;
            }
            None => {
                expr = expr
                    .add_constant(sign * coeff)
                    .map_err(|_| Error::Overflow)?;
            }
        }
        if end == rest.len() {
            break;
        }
        sign = if rest.as_bytes()[end] == b'-' { -1 } else { 1 };
        rest = rest[end + 1..].trim_start();
        if rest.is_empty() {
            return Err(err(format!("dangling operator in `{text}`")));
        }
    }
    Ok(expr)
}

fn parse_offset_list(text: &str, line: usize) -> Result<Vec<Vec<i64>>> {
    let err = |message: String| Error::SpecParse { line, message };
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let open = rest
            .find('(')
            .ok_or_else(|| err(format!("expected `(` in offset list near `{rest}`")))?;
        if !rest[..open].trim().trim_matches(',').trim().is_empty() {
            return Err(err(format!("unexpected text before `(`: `{rest}`")));
        }
        let close = rest
            .find(')')
            .ok_or_else(|| err("unclosed `(` in offset list".into()))?;
        let inner = &rest[open + 1..close];
        let mut tuple = Vec::new();
        for part in inner.split(',') {
            let part = part.trim().trim_start_matches('+');
            let v: i64 = part
                .parse()
                .map_err(|_| err(format!("bad integer offset `{part}`")))?;
            tuple.push(v);
        }
        out.push(tuple);
        rest = rest[close + 1..].trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Ok(out)
}

/// Parse the line-oriented stencil-spec format. `#` starts a comment.
pub fn parse_stencil_spec(text: &str) -> Result<StencilSpec> {
    let mut dims: Option<(Vec<String>, usize)> = None;
    let mut params: Vec<String> = Vec::new();
    let mut bounds_raw: Vec<(String, String, String, usize)> = Vec::new();
    let mut reads: Vec<Vec<i64>> = Vec::new();
    let mut key_lines: BTreeMap<String, usize> = BTreeMap::new();
    let mut time_buffer = None;
    let mut vectorized_dim = None;
    let mut flops_per_point = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| Error::SpecParse {
            line: line_no,
            message: format!("expected `key: value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        key_lines.entry(key.to_string()).or_insert(line_no);
        match key {
            "dims" => {
                let names: Vec<String> = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                dims = Some((names, line_no));
            }
            "params" => {
                params = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
            }
            "bounds" => {
                for entry in value.split(';') {
                    let entry = entry.trim();
                    if entry.is_empty() {
                        continue;
                    }
                    let (dim, range) =
                        entry.split_once(" in ").ok_or_else(|| Error::SpecParse {
                            line: line_no,
                            message: format!("expected `<dim> in [lo, hi]`, got `{entry}`"),
                        })?;
                    let range = range.trim();
                    let inner = range
                        .strip_prefix('[')
                        .and_then(|r| r.strip_suffix(']'))
                        .ok_or_else(|| Error::SpecParse {
                            line: line_no,
                            message: format!("expected `[lo, hi]`, got `{range}`"),
                        })?;
                    let (lo, hi) = inner.split_once(',').ok_or_else(|| Error::SpecParse {
                        line: line_no,
                        message: format!("expected two bounds in `{range}`"),
                    })?;
                    bounds_raw.push((
                        dim.trim().to_string(),
                        lo.to_string(),
                        hi.to_string(),
                        line_no,
                    ));
                }
            }
            "reads" => {
                reads.extend(parse_offset_list(value, line_no)?);
            }
            "time_buffer" => {
                time_buffer = Some(value.parse::<u64>().map_err(|_| Error::SpecParse {
                    line: line_no,
                    message: format!("bad time_buffer `{value}`"),
                })?);
            }
            "vectorized" => {
                vectorized_dim = Some(value.to_string());
            }
            "flops_per_point" => {
                flops_per_point = Some(value.parse::<u64>().map_err(|_| Error::SpecParse {
                    line: line_no,
                    message: format!("bad flops_per_point `{value}`"),
                })?);
            }
            other => {
                return Err(Error::SpecParse {
                    line: line_no,
                    message: format!("unknown key `{other}`"),
                });
            }
        }
    }

    let (dims, dims_line) = dims.ok_or_else(|| Error::SpecParse {
        line: 1,
        message: "missing `dims:` line".into(),
    })?;

    // Bounds in dim order, each affine over the declared parameters.
    let mut bounds = Vec::with_capacity(dims.len());
    for dim in &dims {
        let entry = bounds_raw
            .iter()
            .find(|(d, _, _, _)| d == dim)
            .ok_or_else(|| Error::SpecParse {
                line: dims_line,
                message: format!("missing bounds for dimension `{dim}`"),
            })?;
        let lo = parse_affine(&entry.1, entry.3)?;
        let hi = parse_affine(&entry.2, entry.3)?;
        for e in [&lo, &hi] {
            for v in e.variables() {
                if !params.iter().any(|p| p == v) {
                    return Err(Error::SpecParse {
                        line: entry.3,
                        message: format!("bound uses undeclared parameter `{v}`"),
                    });
                }
            }
        }
        bounds.push((lo, hi));
    }
    for (d, _, _, l) in &bounds_raw {
        if !dims.contains(d) {
            return Err(Error::SpecParse {
                line: *l,
                message: format!("bounds given for unknown dimension `{d}`"),
            });
        }
    }

    let spec = StencilSpec {
        write_access: vec![0; dims.len()],
        dims,
        params,
        bounds,
        read_accesses: reads,
        time_buffer,
        vectorized_dim,
        flops_per_point,
    };
    spec.validate(|key| key_lines.get(key).copied().unwrap_or(1))?;
    Ok(spec)
}

/// Serialize a spec back to the text format. `parse_stencil_spec` of the
/// output yields an equal spec.
pub fn write_spec_text(spec: &StencilSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("dims: {}\n", spec.dims.join(", ")));
    if !spec.params.is_empty() {
        out.push_str(&format!("params: {}\n", spec.params.join(", ")));
    }
    let bounds: Vec<String> = spec
        .dims
        .iter()
        .zip(&spec.bounds)
        .map(|(d, (lo, hi))| format!("{d} in [{lo}, {hi}]"))
        .collect();
    out.push_str(&format!("bounds: {}\n", bounds.join("; ")));
    if !spec.read_accesses.is_empty() {
        let reads: Vec<String> = spec
            .read_accesses
            .iter()
            .map(|r| {
                let parts: Vec<String> = r.iter().map(|c| c.to_string()).collect();
                format!("({})", parts.join(", "))
            })
            .collect();
        out.push_str(&format!("reads: {}\n", reads.join(", ")));
    }
    if let Some(b) = spec.time_buffer {
        out.push_str(&format!("time_buffer: {b}\n"));
    }
    if let Some(v) = &spec.vectorized_dim {
        out.push_str(&format!("vectorized: {v}\n"));
    }
    if let Some(f) = spec.flops_per_point {
        out.push_str(&format!("flops_per_point: {f}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY_2D: &str = "\
# two-dimensional wave toy
dims: t, x
params: M, N
bounds: t in [1, M-1]; x in [1, N-2]
reads: (-1, -1), (-1, +1)
";

    #[test]
    fn parse_two_dim_spec() {
        let spec = parse_stencil_spec(TOY_2D).unwrap();
        assert_eq!(spec.dims, vec!["t", "x"]);
        assert_eq!(spec.read_accesses, vec![vec![-1, -1], vec![-1, 1]]);
        assert_eq!(spec.write_access, vec![0, 0]);
        let (lo, hi) = &spec.bounds[0];
        assert_eq!(lo, &AffineExpr::constant(1));
        assert_eq!(hi, &AffineExpr::from_terms(&[("M", 1)], -1));
    }

    #[test]
    fn no_reads_is_valid() {
        let spec = parse_stencil_spec("dims: t, x\nparams: N\nbounds: t in [0, 3]; x in [0, N]\n")
            .unwrap();
        assert!(spec.extract_dependences().is_empty());
    }

    #[test]
    fn positive_time_offset_rejected() {
        let text = "dims: t, x\nbounds: t in [0, 3]; x in [0, 3]\nreads: (+1, 0)\n";
        match parse_stencil_spec(text) {
            Err(Error::SpecParse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("time offset"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn arity_mismatch_rejected() {
        let text = "dims: t, x\nbounds: t in [0, 3]; x in [0, 3]\nreads: (-1, 0, 0)\n";
        assert!(matches!(
            parse_stencil_spec(text),
            Err(Error::SpecParse { line: 3, .. })
        ));
    }

    #[test]
    fn dependences_negate_offsets_sorted_dedup() {
        let spec = parse_stencil_spec(TOY_2D).unwrap();
        let deps = spec.extract_dependences();
        assert_eq!(
            deps,
            vec![
                DependenceVector(vec![1, -1]),
                DependenceVector(vec![1, 1]),
            ]
        );
    }

    #[test]
    fn dependences_invariant_under_read_permutation() {
        let mut spec = parse_stencil_spec(TOY_2D).unwrap();
        let d1 = spec.extract_dependences();
        spec.read_accesses.reverse();
        spec.read_accesses.push(vec![-1, -1]); // duplicate
        assert_eq!(spec.extract_dependences(), d1);
    }

    #[test]
    fn time_component_always_positive() {
        let spec = parse_stencil_spec(TOY_2D).unwrap();
        for d in spec.extract_dependences() {
            assert!(d.components()[0] > 0);
        }
    }

    #[test]
    fn spec_round_trip() {
        let text = "\
dims: time, x, y, z
params: time_size, x_size, y_size, z_size
bounds: time in [2, time_size-1]; x in [4, x_size-5]; y in [4, y_size-5]; z in [4, z_size-5]
reads: (-1, 0, 0, -4), (-1, 0, 0, 4), (-2, 0, 0, 0)
time_buffer: 8
vectorized: z
flops_per_point: 37
";
        let spec = parse_stencil_spec(text).unwrap();
        let round = parse_stencil_spec(&write_spec_text(&spec)).unwrap();
        assert_eq!(spec, round);
    }

    #[test]
    fn affine_parser_accepts_scaled_terms() {
        let e = parse_affine("2*n - 3", 1).unwrap();
        assert_eq!(e, AffineExpr::from_terms(&[("n", 2)], -3));
        let e = parse_affine("n*2 - 3", 1).unwrap();
        assert_eq!(e, AffineExpr::from_terms(&[("n", 2)], -3));
        let e = parse_affine("-n + m - 1", 1).unwrap();
        assert_eq!(e, AffineExpr::from_terms(&[("n", -1), ("m", 1)], -1));
        assert!(parse_affine("n +", 1).is_err());
        assert!(parse_affine("2 ** n", 1).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = "dims: t, x, x\nbounds: t in [0, 3]; x in [0, 3]\n";
        assert!(matches!(
            parse_stencil_spec(text),
            Err(Error::SpecParse { .. })
        ));
        let text = "dims: t, x\nparams: x\nbounds: t in [0, 3]; x in [0, 3]\n";
        assert!(matches!(
            parse_stencil_spec(text),
            Err(Error::SpecParse { .. })
        ));
    }

    #[test]
    fn domain_matches_bounds() {
        let spec = parse_stencil_spec(TOY_2D).unwrap();
        let d = spec.domain();
        let mut params = BTreeMap::new();
        params.insert("M".to_string(), 4i64);
        params.insert("N".to_string(), 6i64);
        // t in [1,3], x in [1,4] -> 12 points
        assert_eq!(d.enumerate_points(&params).unwrap().len(), 12);
    }
}
