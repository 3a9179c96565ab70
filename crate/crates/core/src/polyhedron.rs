//! Exact integer affine-inequality systems.
//!
//! A [`Domain`] is a conjunction of affine constraints over named iterators
//! and parameters. The module provides Fourier-Motzkin elimination with
//! integer-safe rounding, per-variable bound extraction, and lexicographic
//! enumeration of the integer points of a bounded domain.
//!
//! Fourier-Motzkin projection may over-approximate the integer shadow of a
//! domain; enumeration recovers exactness by testing every candidate point
//! against the full original constraint set.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Integer division rounding toward negative infinity. `d` must be positive.
pub fn floord(n: i64, d: i64) -> i64 {
    debug_assert!(d > 0, "floord divisor must be positive");
    n.div_euclid(d)
}

/// Integer division rounding toward positive infinity. `d` must be positive.
pub fn ceild(n: i64, d: i64) -> i64 {
    debug_assert!(d > 0, "ceild divisor must be positive");
    (n + d - 1).div_euclid(d)
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = b;
        b = a % b;
        a = t;
    }
    a
}

fn checked_add(a: i64, b: i64) -> Result<i64> {
    a.checked_add(b).ok_or(Error::Overflow)
}

fn checked_mul(a: i64, b: i64) -> Result<i64> {
    a.checked_mul(b).ok_or(Error::Overflow)
}

/// An integer affine expression: a coefficient per variable plus a constant.
///
/// The representation is canonical: zero coefficients are never stored, so
/// structural equality coincides with mathematical equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct AffineExpr {
    coeffs: BTreeMap<String, i64>,
    constant: i64,
}

impl AffineExpr {
    pub fn constant(c: i64) -> Self {
        AffineExpr {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(name: &str) -> Self {
        Self::term(name, 1)
    }

    pub fn term(name: &str, coeff: i64) -> Self {
        let mut coeffs = BTreeMap::new();
        if coeff != 0 {
            coeffs.insert(name.to_string(), coeff);
        }
        AffineExpr {
            coeffs,
            constant: 0,
        }
    }

    pub fn from_terms(terms: &[(&str, i64)], constant: i64) -> Self {
        let mut e = AffineExpr::constant(constant);
        for (name, c) in terms {
            e.add_term(name, *c).expect("term overflow");
        }
        e
    }

    pub fn coeff(&self, name: &str) -> i64 {
        self.coeffs.get(name).copied().unwrap_or(0)
    }

    pub fn constant_part(&self) -> i64 {
        self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Variables with nonzero coefficient, in name order.
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.coeffs.keys().map(|s| s.as_str())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, i64)> {
        self.coeffs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn add_term(&mut self, name: &str, coeff: i64) -> Result<()> {
        let c = checked_add(self.coeff(name), coeff)?;
        if c == 0 {
            self.coeffs.remove(name);
        } else {
            self.coeffs.insert(name.to_string(), c);
        }
        Ok(())
    }

    pub fn add(&self, other: &AffineExpr) -> Result<AffineExpr> {
        let mut out = self.clone();
        for (name, c) in &other.coeffs {
            out.add_term(name, *c)?;
        }
        out.constant = checked_add(out.constant, other.constant)?;
        Ok(out)
    }

    pub fn sub(&self, other: &AffineExpr) -> Result<AffineExpr> {
        self.add(&other.scale(-1)?)
    }

    pub fn scale(&self, k: i64) -> Result<AffineExpr> {
        if k == 0 {
            return Ok(AffineExpr::constant(0));
        }
        let mut coeffs = BTreeMap::new();
        for (name, c) in &self.coeffs {
            coeffs.insert(name.clone(), checked_mul(*c, k)?);
        }
        Ok(AffineExpr {
            coeffs,
            constant: checked_mul(self.constant, k)?,
        })
    }

    pub fn add_constant(&self, c: i64) -> Result<AffineExpr> {
        let mut out = self.clone();
        out.constant = checked_add(out.constant, c)?;
        Ok(out)
    }

    /// Substitute `var := replacement` (an affine expression).
    pub fn substitute(&self, var: &str, replacement: &AffineExpr) -> Result<AffineExpr> {
        let c = self.coeff(var);
        if c == 0 {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        out.coeffs.remove(var);
        out.add(&replacement.scale(c)?)
    }

    /// Apply a simultaneous variable renaming; unmapped names are kept.
    pub fn rename(&self, mapping: &BTreeMap<&str, &str>) -> AffineExpr {
        let mut coeffs = BTreeMap::new();
        for (name, c) in &self.coeffs {
            let new = mapping.get(name.as_str()).copied().unwrap_or(name);
            *coeffs.entry(new.to_string()).or_insert(0) += c;
        }
        coeffs.retain(|_, c| *c != 0);
        AffineExpr {
            coeffs,
            constant: self.constant,
        }
    }

    /// Evaluate with every variable bound.
    pub fn eval(&self, env: &BTreeMap<String, i64>) -> Result<i64> {
        let mut acc = self.constant;
        for (name, c) in &self.coeffs {
            let v = env
                .get(name)
                .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
            acc = checked_add(acc, checked_mul(*c, *v)?)?;
        }
        Ok(acc)
    }

    /// GCD of the variable coefficients (0 when there are none).
    fn coeff_gcd(&self) -> i64 {
        self.coeffs.values().fold(0, |g, &c| gcd(g, c))
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, c) in &self.coeffs {
            if first {
                match *c {
                    1 => write!(f, "{name}")?,
                    -1 => write!(f, "-{name}")?,
                    c => write!(f, "{c}*{name}")?,
                }
                first = false;
            } else {
                let sign = if *c < 0 { "-" } else { "+" };
                let a = c.abs();
                if a == 1 {
                    write!(f, "{sign}{name}")?;
                } else {
                    write!(f, "{sign}{a}*{name}")?;
                }
            }
        }
        if first {
            write!(f, "{}", self.constant)?;
        } else if self.constant != 0 {
            let sign = if self.constant < 0 { "-" } else { "+" };
            write!(f, "{sign}{}", self.constant.abs())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintKind {
    /// expr = 0
    Equality,
    /// expr >= 0
    NonNeg,
}

/// A single affine constraint, `expr = 0` or `expr >= 0`, kept in canonical
/// form (coefficients divided by their GCD, with the constant floor-divided
/// for inequalities so integer solutions are preserved).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub kind: ConstraintKind,
    expr: AffineExpr,
}

impl Constraint {
    pub fn nonneg(expr: AffineExpr) -> Self {
        Constraint {
            kind: ConstraintKind::NonNeg,
            expr,
        }
        .canonicalize()
    }

    pub fn equality(expr: AffineExpr) -> Self {
        Constraint {
            kind: ConstraintKind::Equality,
            expr,
        }
        .canonicalize()
    }

    /// `lo <= var` as a nonneg constraint.
    pub fn lower_bound(var: &str, lo: AffineExpr) -> Self {
        let e = AffineExpr::var(var).sub(&lo).expect("bound overflow");
        Constraint::nonneg(e)
    }

    /// `var <= hi` as a nonneg constraint.
    pub fn upper_bound(var: &str, hi: AffineExpr) -> Self {
        let e = hi.sub(&AffineExpr::var(var)).expect("bound overflow");
        Constraint::nonneg(e)
    }

    pub fn expr(&self) -> &AffineExpr {
        &self.expr
    }

    fn canonicalize(mut self) -> Self {
        let g = self.expr.coeff_gcd();
        if g > 1 {
            match self.kind {
                ConstraintKind::NonNeg => {
                    // sum(c_i x_i) >= -c0  <=>  sum(c_i/g x_i) >= ceil(-c0/g)
                    // i.e. the new constant is floor(c0/g): integer tightening.
                    let mut coeffs = BTreeMap::new();
                    for (name, c) in &self.expr.coeffs {
                        coeffs.insert(name.clone(), c / g);
                    }
                    self.expr = AffineExpr {
                        coeffs,
                        constant: floord(self.expr.constant, g),
                    };
                }
                ConstraintKind::Equality => {
                    // Dividing is only exact when the constant is divisible.
                    if self.expr.constant % g == 0 {
                        let mut coeffs = BTreeMap::new();
                        for (name, c) in &self.expr.coeffs {
                            coeffs.insert(name.clone(), c / g);
                        }
                        self.expr = AffineExpr {
                            coeffs,
                            constant: self.expr.constant / g,
                        };
                    }
                }
            }
        }
        self
    }

    /// True when the constraint holds trivially for every assignment.
    fn is_tautology(&self) -> bool {
        self.expr.is_constant()
            && match self.kind {
                ConstraintKind::NonNeg => self.expr.constant >= 0,
                ConstraintKind::Equality => self.expr.constant == 0,
            }
    }

    fn holds(&self, env: &BTreeMap<String, i64>) -> Result<bool> {
        let v = self.expr.eval(env)?;
        Ok(match self.kind {
            ConstraintKind::NonNeg => v >= 0,
            ConstraintKind::Equality => v == 0,
        })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ConstraintKind::NonNeg => write!(f, "{} >= 0", self.expr),
            ConstraintKind::Equality => write!(f, "{} = 0", self.expr),
        }
    }
}

/// One side of a loop bound: `var >= ceild(expr, divisor)` for a lower
/// bound, `var <= floord(expr, divisor)` for an upper bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    pub expr: AffineExpr,
    pub divisor: i64,
}

/// An integer polyhedron over named iterators (ordered outermost first)
/// and named parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    iterators: Vec<String>,
    parameters: Vec<String>,
    constraints: Vec<Constraint>,
}

impl Domain {
    pub fn new(
        iterators: Vec<String>,
        parameters: Vec<String>,
        constraints: Vec<Constraint>,
    ) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for name in iterators.iter().chain(&parameters) {
            if !seen.insert(name.as_str()) {
                return Err(Error::UnknownVariable(format!("duplicate name `{name}`")));
            }
        }
        let d = Domain {
            iterators,
            parameters,
            constraints,
        };
        for c in &d.constraints {
            for v in c.expr.variables() {
                if !d.has_variable(v) {
                    return Err(Error::UnknownVariable(v.to_string()));
                }
            }
        }
        Ok(d)
    }

    pub fn iterators(&self) -> &[String] {
        &self.iterators
    }

    pub fn parameters(&self) -> &[String] {
        &self.parameters
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn iterator_index(&self, name: &str) -> Option<usize> {
        self.iterators.iter().position(|i| i == name)
    }

    fn has_variable(&self, name: &str) -> bool {
        self.iterators.iter().any(|i| i == name) || self.parameters.iter().any(|p| p == name)
    }

    pub fn push_constraint(&mut self, c: Constraint) {
        if c.is_tautology() || self.constraints.contains(&c) {
            return;
        }
        // For inequalities with identical coefficients only the tightest
        // constant matters; this keeps Fourier-Motzkin products small.
        if c.kind == ConstraintKind::NonNeg {
            for existing in &mut self.constraints {
                if existing.kind == ConstraintKind::NonNeg
                    && existing.expr.coeffs == c.expr.coeffs
                {
                    if c.expr.constant < existing.expr.constant {
                        *existing = c;
                    }
                    return;
                }
            }
        }
        self.constraints.push(c);
    }

    /// Insert a new iterator at `pos` in the nesting order.
    pub(crate) fn insert_iterator(&mut self, pos: usize, name: String) {
        self.iterators.insert(pos, name);
    }

    /// Rewrite every constraint by substituting `var := replacement`.
    pub(crate) fn substitute(&self, var: &str, replacement: &AffineExpr) -> Result<Domain> {
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let e = c.expr.substitute(var, replacement)?;
            let c = match c.kind {
                ConstraintKind::NonNeg => Constraint::nonneg(e),
                ConstraintKind::Equality => Constraint::equality(e),
            };
            constraints.push(c);
        }
        Ok(Domain {
            iterators: self.iterators.clone(),
            parameters: self.parameters.clone(),
            constraints,
        })
    }

    /// Simultaneously rename the iterators; `new_names[k]` replaces the
    /// k-th iterator everywhere.
    pub fn rename_iterators(&self, new_names: &[String]) -> Result<Domain> {
        if new_names.len() != self.iterators.len() {
            return Err(Error::DimensionMismatch {
                expected: self.iterators.len(),
                got: new_names.len(),
            });
        }
        let mut seen = BTreeMap::new();
        for n in new_names {
            if self.parameters.iter().any(|p| p == n) {
                return Err(Error::UnknownVariable(format!(
                    "iterator name `{n}` collides with a parameter"
                )));
            }
            if seen.insert(n.as_str(), ()).is_some() {
                return Err(Error::UnknownVariable(format!("duplicate name `{n}`")));
            }
        }
        let mapping: BTreeMap<&str, &str> = self
            .iterators
            .iter()
            .map(String::as_str)
            .zip(new_names.iter().map(String::as_str))
            .collect();
        let constraints = self
            .constraints
            .iter()
            .map(|c| Constraint {
                kind: c.kind,
                expr: c.expr.rename(&mapping),
            })
            .collect();
        Ok(Domain {
            iterators: new_names.to_vec(),
            parameters: self.parameters.clone(),
            constraints,
        })
    }

    /// Reorder the iterator list. `order[k]` is the index (into the current
    /// list) of the iterator that becomes the k-th one.
    pub fn reorder_iterators(&self, order: &[usize]) -> Result<Domain> {
        if order.len() != self.iterators.len() {
            return Err(Error::DimensionMismatch {
                expected: self.iterators.len(),
                got: order.len(),
            });
        }
        let iterators = order.iter().map(|&i| self.iterators[i].clone()).collect();
        Ok(Domain {
            iterators,
            parameters: self.parameters.clone(),
            constraints: self.constraints.clone(),
        })
    }

    /// Integer-safe Fourier-Motzkin elimination of one iterator.
    ///
    /// Every pair of a lower constraint `a*var + f >= 0` (a > 0) and an upper
    /// constraint `-b*var + g >= 0` (b > 0) yields `a*g + b*f >= 0`. The
    /// result contains the shadow of every integer point of `self`; it may
    /// contain extra points, which enumeration filters out again.
    pub fn project_eliminate(&self, var: &str) -> Result<Domain> {
        let idx = self
            .iterator_index(var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;

        let mut lowers: Vec<(i64, AffineExpr)> = Vec::new(); // a, f with a*var + f >= 0
        let mut uppers: Vec<(i64, AffineExpr)> = Vec::new(); // b, g with -b*var + g >= 0
        let mut rest: Vec<Constraint> = Vec::new();

        for c in &self.constraints {
            let a = c.expr.coeff(var);
            if a == 0 {
                rest.push(c.clone());
                continue;
            }
            let mut remainder = c.expr.clone();
            remainder.coeffs.remove(var);
            match c.kind {
                ConstraintKind::NonNeg => {
                    if a > 0 {
                        lowers.push((a, remainder));
                    } else {
                        uppers.push((-a, remainder));
                    }
                }
                ConstraintKind::Equality => {
                    // a*var + f = 0 acts as both bounds.
                    if a > 0 {
                        lowers.push((a, remainder.clone()));
                        uppers.push((a, remainder.scale(-1)?));
                    } else {
                        uppers.push((-a, remainder.clone()));
                        lowers.push((-a, remainder.scale(-1)?));
                    }
                }
            }
        }

        let mut out = Domain {
            iterators: self
                .iterators
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != idx)
                .map(|(_, n)| n.clone())
                .collect(),
            parameters: self.parameters.clone(),
            constraints: Vec::new(),
        };
        for c in rest {
            out.push_constraint(c);
        }
        for (a, f) in &lowers {
            for (b, g) in &uppers {
                let combined = g.scale(*a)?.add(&f.scale(*b)?)?;
                out.push_constraint(Constraint::nonneg(combined));
            }
        }
        Ok(out)
    }

    /// Split the constraints involving `var` into lower and upper bounds.
    ///
    /// A lower bound `(expr, d)` means `var >= ceild(expr, d)`; an upper
    /// bound means `var <= floord(expr, d)`. Equality constraints contribute
    /// a matched lower/upper pair. Constraints not involving `var` are
    /// ignored.
    pub fn bounds_for(&self, var: &str) -> Result<(Vec<Bound>, Vec<Bound>)> {
        if self.iterator_index(var).is_none() {
            return Err(Error::UnknownVariable(var.to_string()));
        }
        let mut lowers = Vec::new();
        let mut uppers = Vec::new();
        for c in &self.constraints {
            let a = c.expr.coeff(var);
            if a == 0 {
                continue;
            }
            let mut remainder = c.expr.clone();
            remainder.coeffs.remove(var);
            match (c.kind, a > 0) {
                (ConstraintKind::NonNeg, true) => {
                    // a*var + f >= 0  =>  var >= ceild(-f, a)
                    lowers.push(Bound {
                        expr: remainder.scale(-1)?,
                        divisor: a,
                    });
                }
                (ConstraintKind::NonNeg, false) => {
                    // -b*var + g >= 0  =>  var <= floord(g, b)
                    uppers.push(Bound {
                        expr: remainder,
                        divisor: -a,
                    });
                }
                (ConstraintKind::Equality, _) => {
                    let (a, remainder) = if a > 0 {
                        (a, remainder)
                    } else {
                        (-a, remainder.scale(-1)?)
                    };
                    lowers.push(Bound {
                        expr: remainder.scale(-1)?,
                        divisor: a,
                    });
                    uppers.push(Bound {
                        expr: remainder.scale(-1)?,
                        divisor: a,
                    });
                }
            }
        }
        Ok((lowers, uppers))
    }

    /// Successive projections: element k of the result is the domain with
    /// all iterators inner to position k eliminated (element n-1 is self).
    pub(crate) fn projection_chain(&self) -> Result<Vec<Domain>> {
        let n = self.iterators.len();
        let mut chain = vec![self.clone()];
        let mut cur = self.clone();
        for k in (1..n).rev() {
            let var = cur.iterators[k].clone();
            cur = cur.project_eliminate(&var)?;
            chain.push(cur.clone());
        }
        chain.reverse(); // chain[k] has iterators 0..=k
        Ok(chain)
    }

    /// Enumerate the exact integer point set in lexicographic order of the
    /// iterator list. All parameters must be bound and the domain must be
    /// bounded once they are.
    pub fn enumerate_points(&self, params: &BTreeMap<String, i64>) -> Result<Vec<Vec<i64>>> {
        for p in &self.parameters {
            if !params.contains_key(p) {
                return Err(Error::UnboundParameter(p.clone()));
            }
        }
        let n = self.iterators.len();
        if n == 0 {
            // Zero-dimensional domain: a single (empty) point when the
            // parameter constraints hold.
            for c in &self.constraints {
                if !c.holds(params)? {
                    return Ok(Vec::new());
                }
            }
            return Ok(vec![Vec::new()]);
        }

        let chain = self.projection_chain()?;
        let mut out = Vec::new();
        let mut env = params.clone();
        let mut point = Vec::with_capacity(n);
        self.scan(&chain, 0, &mut env, &mut point, &mut out)?;
        Ok(out)
    }

    fn scan(
        &self,
        chain: &[Domain],
        level: usize,
        env: &mut BTreeMap<String, i64>,
        point: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) -> Result<()> {
        let var = &self.iterators[level];
        let (lowers, uppers) = chain[level].bounds_for(var)?;
        if lowers.is_empty() || uppers.is_empty() {
            return Err(Error::Unbounded(var.clone()));
        }
        let mut lo = i64::MIN;
        for b in &lowers {
            lo = lo.max(ceild(b.expr.eval(env)?, b.divisor));
        }
        let mut hi = i64::MAX;
        for b in &uppers {
            hi = hi.min(floord(b.expr.eval(env)?, b.divisor));
        }
        for v in lo..=hi {
            env.insert(var.clone(), v);
            point.push(v);
            if level + 1 == self.iterators.len() {
                // Membership against the original constraints restores
                // exactness lost to FM over-approximation.
                let mut ok = true;
                for c in &self.constraints {
                    if !c.holds(env)? {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    out.push(point.clone());
                }
            } else {
                self.scan(chain, level + 1, env, point, out)?;
            }
            point.pop();
            env.remove(var);
        }
        Ok(())
    }

    /// Membership test against the full constraint set.
    pub fn contains(&self, point: &[i64], params: &BTreeMap<String, i64>) -> Result<bool> {
        if point.len() != self.iterators.len() {
            return Err(Error::DimensionMismatch {
                expected: self.iterators.len(),
                got: point.len(),
            });
        }
        let mut env = params.clone();
        for (name, v) in self.iterators.iter().zip(point) {
            env.insert(name.clone(), *v);
        }
        for c in &self.constraints {
            if !c.holds(&env)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{ [{}]", self.iterators.join(", "))?;
        if !self.parameters.is_empty() {
            write!(f, " | params {}", self.parameters.join(", "))?;
        }
        write!(f, " : ")?;
        for (i, c) in self.constraints.iter().enumerate() {
            if i > 0 {
                write!(f, " and ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, " }}")
    }
}
