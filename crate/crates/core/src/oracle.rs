//! Ground-truth verification of transformed programs.
//!
//! Everything here is deliberately brute force: orders are materialized
//! point by point, dependence violations are found by checking every
//! (source, sink) pair, and the numeric interpreter executes the stencil
//! update cell by cell in exactly the order given. The rest of the crate is
//! validated against these oracles on small instances.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::stencil::{DependenceVector, StencilSpec};
use crate::transform::{Schedule, TransformedProgram};
use crate::polyhedron::Domain;

/// A sequence of original-space iteration points in execution order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionOrder(pub Vec<Vec<i64>>);

impl ExecutionOrder {
    pub fn points(&self) -> &[Vec<i64>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One dependence violation: the sink ran before the source it reads from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub dep: DependenceVector,
    pub source: Vec<i64>,
    pub sink: Vec<i64>,
}

/// Outcome of checking a transformed program against the oracle.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub is_permutation: bool,
    pub missing: Vec<Vec<i64>>,
    pub extra: Vec<Vec<i64>>,
    pub violations: Vec<Violation>,
    pub numeric_equal: Option<bool>,
}

impl VerificationReport {
    pub fn is_legal(&self) -> bool {
        self.is_permutation && self.violations.is_empty()
    }
}

/// Execution order of a transformed program: enumerate the transformed
/// domain in the schedule's output order and translate every point back to
/// original coordinates.
pub fn execution_order(
    program: &TransformedProgram,
    params: &BTreeMap<String, i64>,
) -> Result<ExecutionOrder> {
    let perm = program.schedule.as_permutation().ok_or_else(|| {
        Error::InvalidConfig(
            "program schedule is not a pure permutation of the iterators".into(),
        )
    })?;
    let reordered = program.domain.reorder_iterators(&perm)?;
    let pts = reordered.enumerate_points(params)?;
    let names = reordered.iterators().to_vec();
    let mut out = Vec::with_capacity(pts.len());
    let mut env = params.clone();
    for p in pts {
        for (n, v) in names.iter().zip(&p) {
            env.insert(n.clone(), *v);
        }
        let mut orig = Vec::with_capacity(program.body_translation.len());
        for (_, expr) in &program.body_translation {
            orig.push(expr.eval(&env)?);
        }
        out.push(orig);
    }
    Ok(ExecutionOrder(out))
}

/// Execution order induced by an affine schedule on a domain: points are
/// visited in lexicographic order of their timestamps.
pub fn execution_order_for_schedule(
    domain: &Domain,
    schedule: &Schedule,
    params: &BTreeMap<String, i64>,
) -> Result<ExecutionOrder> {
    let pts = domain.enumerate_points(params)?;
    let mut keyed: Vec<(Vec<i64>, Vec<i64>)> = Vec::with_capacity(pts.len());
    for p in pts {
        keyed.push((schedule.apply_point(&p)?, p));
    }
    keyed.sort();
    Ok(ExecutionOrder(keyed.into_iter().map(|(_, p)| p).collect()))
}

/// Check that `order` is a permutation of `domain`'s points and respects
/// every dependence: for each sink `q` with `q - d` in the domain, the
/// source must run first.
pub fn verify_order(
    domain: &Domain,
    deps: &[DependenceVector],
    order: &ExecutionOrder,
    params: &BTreeMap<String, i64>,
) -> Result<VerificationReport> {
    let expected = domain.enumerate_points(params)?;

    let mut counts: BTreeMap<&[i64], i64> = BTreeMap::new();
    for p in &expected {
        *counts.entry(p.as_slice()).or_insert(0) += 1;
    }
    for p in order.points() {
        *counts.entry(p.as_slice()).or_insert(0) -= 1;
    }
    let mut missing = Vec::new();
    let mut extra = Vec::new();
    for (p, c) in counts {
        for _ in 0..c {
            missing.push(p.to_vec());
        }
        for _ in c..0 {
            extra.push(p.to_vec());
        }
    }
    let is_permutation = missing.is_empty() && extra.is_empty();

    let mut position: HashMap<&[i64], usize> = HashMap::with_capacity(order.len());
    for (i, p) in order.points().iter().enumerate() {
        position.entry(p.as_slice()).or_insert(i);
    }

    let mut violations = Vec::new();
    for dep in deps {
        if dep.len() != domain.iterators().len() {
            return Err(Error::DimensionMismatch {
                expected: domain.iterators().len(),
                got: dep.len(),
            });
        }
        for sink in &expected {
            let source: Vec<i64> = sink
                .iter()
                .zip(dep.components())
                .map(|(q, d)| q - d)
                .collect();
            if !domain.contains(&source, params)? {
                continue;
            }
            let (Some(&ps), Some(&pq)) = (
                position.get(source.as_slice()),
                position.get(sink.as_slice()),
            ) else {
                continue; // already accounted for as missing
            };
            if ps >= pq {
                violations.push(Violation {
                    dep: dep.clone(),
                    source,
                    sink: sink.clone(),
                });
            }
        }
    }

    Ok(VerificationReport {
        is_permutation,
        missing,
        extra,
        violations,
        numeric_equal: None,
    })
}

/// Verify a transformed program against its stencil's domain and
/// dependences.
pub fn verify(
    spec: &StencilSpec,
    program: &TransformedProgram,
    params: &BTreeMap<String, i64>,
) -> Result<VerificationReport> {
    let order = execution_order(program, params)?;
    verify_order(&spec.domain(), &spec.extract_dependences(), &order, params)
}

const GRID_MAGIC: &[u8; 4] = b"PTG1";
const DTYPE_F32: u8 = 1;

/// A dense space-time grid of 32-bit floats. The first dimension is time
/// (the buffer size when the time dimension is buffered), the remaining
/// dimensions are space including halo cells. Row-major, last dimension
/// fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

fn mix64(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^= x >> 33;
    x
}

impl Grid {
    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Grid {
            dims,
            data: vec![0.0; len],
        }
    }

    /// Deterministic pseudo-random fill in [0, 1); the same dims and seed
    /// always produce the same bits on every platform.
    pub fn patterned(dims: Vec<usize>, seed: u64) -> Self {
        let len: usize = dims.iter().product();
        let data = (0..len)
            .map(|i| {
                let h = mix64(seed ^ (i as u64).wrapping_add(0x9e37_79b9_7f4a_7c15));
                // 24 mantissa bits: exactly representable in f32.
                (h >> 40) as f32 / (1u64 << 24) as f32
            })
            .collect();
        Grid { dims, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn index(&self, coords: &[i64]) -> Option<usize> {
        if coords.len() != self.dims.len() {
            return None;
        }
        let mut idx = 0usize;
        for (c, d) in coords.iter().zip(&self.dims) {
            if *c < 0 || *c >= *d as i64 {
                return None;
            }
            idx = idx * d + *c as usize;
        }
        Some(idx)
    }

    /// Serialize as a small header plus raw little-endian f32 data.
    pub fn write_le(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&[DTYPE_F32])?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for d in &self.dims {
            w.write_all(&(*d as u32).to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_le(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(Error::GridFormat("bad magic".into()));
        }
        let mut dtype = [0u8; 1];
        r.read_exact(&mut dtype)?;
        if dtype[0] != DTYPE_F32 {
            return Err(Error::GridFormat(format!("unsupported dtype {}", dtype[0])));
        }
        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4)?;
        let ndims = u32::from_le_bytes(buf4) as usize;
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            r.read_exact(&mut buf4)?;
            dims.push(u32::from_le_bytes(buf4) as usize);
        }
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut buf4)?;
            data.push(f32::from_le_bytes(buf4));
        }
        Ok(Grid { dims, data })
    }

    /// Largest absolute elementwise difference, for tolerance comparisons
    /// against externally produced grids.
    pub fn max_abs_diff(&self, other: &Grid) -> Option<f64> {
        if self.dims != other.dims {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (f64::from(*a) - f64::from(*b)).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Grid dimensions that fit the stencil instance: the buffer size (or the
/// full time extent) first, then each spatial extent including the halo
/// cells the read offsets reach.
pub fn grid_dims(spec: &StencilSpec, params: &BTreeMap<String, i64>) -> Result<Vec<usize>> {
    let bounds = eval_bounds(spec, params)?;
    let reach = spec
        .read_accesses
        .iter()
        .map(|r| -r[0])
        .max()
        .unwrap_or(0);
    let mut dims = Vec::with_capacity(spec.dims.len());
    let time_extent = match spec.time_buffer {
        Some(b) => b as i64,
        None => bounds[0].1 + 1,
    };
    if bounds[0].0 - reach < 0 {
        return Err(Error::InvalidConfig(format!(
            "time starts at {} but the stencil reads {} steps back",
            bounds[0].0, reach
        )));
    }
    dims.push(time_extent as usize);
    for (k, (lo, hi)) in bounds.iter().enumerate().skip(1) {
        let min_off = spec.read_accesses.iter().map(|r| r[k]).min().unwrap_or(0).min(0);
        let max_off = spec.read_accesses.iter().map(|r| r[k]).max().unwrap_or(0).max(0);
        if lo + min_off < 0 {
            return Err(Error::InvalidConfig(format!(
                "`{}` starts at {lo} but the stencil reads {} cells below",
                spec.dims[k], -min_off
            )));
        }
        dims.push((hi + max_off + 1) as usize);
    }
    Ok(dims)
}

const HOLDER_NONE: i64 = i64::MIN;

struct Interpreter<'a> {
    spec: &'a StencilSpec,
    grid: Grid,
    /// Which time step each cell currently holds; `HOLDER_NONE` when
    /// uninitialized, halo cells are always valid.
    holder: Vec<i64>,
    halo: Vec<bool>,
    buffer: Option<i64>,
    /// (lo, hi) per dimension, time first.
    bounds: Vec<(i64, i64)>,
    /// Sorted read offsets with their fixed weights.
    reads: Vec<(Vec<i64>, f32)>,
}

fn sorted_reads(spec: &StencilSpec) -> Vec<(Vec<i64>, f32)> {
    let mut offsets = spec.read_accesses.clone();
    offsets.sort();
    offsets
        .into_iter()
        .enumerate()
        .map(|(k, r)| (r, 1.0f32 / (k as f32 + 2.0)))
        .collect()
}

fn eval_bounds(spec: &StencilSpec, params: &BTreeMap<String, i64>) -> Result<Vec<(i64, i64)>> {
    spec.bounds
        .iter()
        .map(|(lo, hi)| Ok((lo.eval(params)?, hi.eval(params)?)))
        .collect()
}

impl<'a> Interpreter<'a> {
    fn new(spec: &'a StencilSpec, params: &BTreeMap<String, i64>, initial: &Grid) -> Result<Self> {
        if initial.dims.len() != spec.dims.len() {
            return Err(Error::GridFormat(format!(
                "grid has {} dims, stencil has {}",
                initial.dims.len(),
                spec.dims.len()
            )));
        }
        let bounds = eval_bounds(spec, params)?;
        let reads = sorted_reads(spec);
        let reach = reads
            .iter()
            .map(|(r, _)| -r[0])
            .max()
            .unwrap_or(0);

        let buffer = match spec.time_buffer {
            Some(b) => {
                let b = b as i64;
                if b < reach + 1 {
                    return Err(Error::InvalidConfig(format!(
                        "time buffer {b} is smaller than the stencil's time reach {}",
                        reach + 1
                    )));
                }
                if (initial.dims[0] as i64) != b {
                    return Err(Error::GridFormat(format!(
                        "buffered grid must have time extent {b}, got {}",
                        initial.dims[0]
                    )));
                }
                Some(b)
            }
            None => {
                if (initial.dims[0] as i64) < bounds[0].1 + 1 {
                    return Err(Error::GridFormat(format!(
                        "grid time extent {} does not cover time {}",
                        initial.dims[0], bounds[0].1
                    )));
                }
                None
            }
        };

        // The spatial extents must cover the farthest halo cells reachable
        // from the interior.
        for (k, (lo, hi)) in bounds.iter().enumerate().skip(1) {
            let min_off = reads.iter().map(|(r, _)| r[k]).min().unwrap_or(0).min(0);
            let max_off = reads.iter().map(|(r, _)| r[k]).max().unwrap_or(0).max(0);
            if lo + min_off < 0 || hi + max_off >= initial.dims[k] as i64 {
                return Err(Error::GridFormat(format!(
                    "grid extent {} for `{}` does not cover [{}, {}]",
                    initial.dims[k],
                    spec.dims[k],
                    lo + min_off,
                    hi + max_off
                )));
            }
        }

        let mut interp = Interpreter {
            spec,
            grid: initial.clone(),
            holder: vec![HOLDER_NONE; initial.len()],
            halo: vec![false; initial.len()],
            buffer,
            bounds,
            reads,
        };

        // Mark halo cells (outside the interior box in some spatial dim);
        // they keep their initial values and are always readable.
        let dims = interp.grid.dims.clone();
        let mut coords = vec![0i64; dims.len()];
        interp.mark_cells(&dims, 0, &mut coords, reach);
        Ok(interp)
    }

    fn mark_cells(&mut self, dims: &[usize], level: usize, coords: &mut Vec<i64>, reach: i64) {
        if level == dims.len() {
            let idx = self.grid.index(coords).expect("in-range cell");
            let interior = coords[1..]
                .iter()
                .zip(&self.bounds[1..])
                .all(|(c, (lo, hi))| c >= lo && c <= hi);
            if !interior {
                self.halo[idx] = true;
            } else {
                // Pre-initialized prior time steps: times lo_t-reach .. lo_t-1
                // live at their slots and hold those times.
                let slot = coords[0];
                let lo_t = self.bounds[0].0;
                for t in (lo_t - reach)..lo_t {
                    if self.slot(t) == slot {
                        self.holder[idx] = t;
                    }
                }
            }
            return;
        }
        for v in 0..dims[level] as i64 {
            coords[level] = v;
            self.mark_cells(dims, level + 1, coords, reach);
        }
    }

    fn slot(&self, t: i64) -> i64 {
        match self.buffer {
            Some(b) => t.rem_euclid(b),
            None => t,
        }
    }

    fn read(&self, t: i64, coords: &[i64]) -> Result<f32> {
        let mut cell = Vec::with_capacity(coords.len() + 1);
        cell.push(self.slot(t));
        cell.extend_from_slice(coords);
        let idx = self
            .grid
            .index(&cell)
            .ok_or_else(|| Error::GridFormat(format!("read outside grid at {cell:?}")))?;
        if self.halo[idx] {
            return Ok(self.grid.data[idx]);
        }
        if self.holder[idx] != t {
            let found = if self.holder[idx] == HOLDER_NONE {
                "no value (uninitialized)".to_string()
            } else {
                format!("time {}", self.holder[idx])
            };
            return Err(Error::StaleRead {
                time: t,
                coords: coords.to_vec(),
                found,
            });
        }
        Ok(self.grid.data[idx])
    }

    fn execute(&mut self, order: &ExecutionOrder) -> Result<()> {
        for point in order.points() {
            if point.len() != self.spec.dims.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.spec.dims.len(),
                    got: point.len(),
                });
            }
            if point
                .iter()
                .zip(&self.bounds)
                .any(|(v, (lo, hi))| v < lo || v > hi)
            {
                return Err(Error::InvalidConfig(format!(
                    "execution order visits {point:?}, outside the stencil domain"
                )));
            }
            let t = point[0];
            let xs = &point[1..];
            let mut acc = 0.0f32;
            for (offset, weight) in &self.reads {
                let rt = t + offset[0];
                let rc: Vec<i64> = xs
                    .iter()
                    .zip(&offset[1..])
                    .map(|(x, o)| x + o)
                    .collect();
                acc += weight * self.read(rt, &rc)?;
            }
            let mut cell = Vec::with_capacity(point.len());
            cell.push(self.slot(t));
            cell.extend_from_slice(xs);
            let idx = self
                .grid
                .index(&cell)
                .ok_or_else(|| Error::GridFormat(format!("write outside grid at {cell:?}")))?;
            self.grid.data[idx] = acc;
            self.holder[idx] = t;
        }
        Ok(())
    }
}

/// Execute the stencil as a weighted sum of its reads, point by point in
/// the given order, and return the final grid.
///
/// The k-th read offset (in sorted order) carries the fixed weight
/// `1/(k+2)`, so any legal reordering reproduces the identity-order result
/// bit for bit. With a buffered time dimension, time indexes the grid
/// modulo the buffer size; a read that finds a slot overwritten by a later
/// time step (or never written) is a hard error.
pub fn interpret(
    spec: &StencilSpec,
    params: &BTreeMap<String, i64>,
    order: &ExecutionOrder,
    initial: &Grid,
) -> Result<Grid> {
    let mut interp = Interpreter::new(spec, params, initial)?;
    interp.execute(order)?;
    Ok(interp.grid)
}

/// LRU stack-distance statistics over an address trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReuseStats {
    /// Finite reuse distances and their frequencies.
    pub histogram: BTreeMap<u64, u64>,
    /// First-touch accesses (infinite distance).
    pub cold: u64,
    /// Mean of the finite distances; `None` when nothing was reused.
    pub mean: Option<f64>,
}

/// Reuse-distance diagnostics for an execution order: the trace contains,
/// per executed point, the addresses of its reads (sorted-offset order)
/// followed by its write. Distances are fully associative LRU stack
/// distances at one-element granularity. Buffered time dimensions alias
/// through their slots, exactly as the interpreter stores them.
pub fn reuse_distance(spec: &StencilSpec, order: &ExecutionOrder) -> ReuseStats {
    let buffer = spec.time_buffer.map(|b| b as i64);
    let slot = |t: i64| match buffer {
        Some(b) => t.rem_euclid(b),
        None => t,
    };
    let mut offsets = spec.read_accesses.clone();
    offsets.sort();

    let mut stack: Vec<Vec<i64>> = Vec::new();
    let mut histogram: BTreeMap<u64, u64> = BTreeMap::new();
    let mut cold = 0u64;
    let mut total: u128 = 0;
    let mut finite = 0u64;

    let mut touch = |addr: Vec<i64>| {
        match stack.iter().position(|a| *a == addr) {
            Some(pos) => {
                *histogram.entry(pos as u64).or_insert(0) += 1;
                total += pos as u128;
                finite += 1;
                let a = stack.remove(pos);
                stack.insert(0, a);
            }
            None => {
                cold += 1;
                stack.insert(0, addr);
            }
        }
    };

    for point in order.points() {
        let t = point[0];
        let xs = &point[1..];
        for r in &offsets {
            let mut addr = Vec::with_capacity(point.len());
            addr.push(slot(t + r[0]));
            addr.extend(xs.iter().zip(&r[1..]).map(|(x, o)| x + o));
            touch(addr);
        }
        let mut waddr = Vec::with_capacity(point.len());
        waddr.push(slot(t));
        waddr.extend_from_slice(xs);
        touch(waddr);
    }

    let mean = if finite > 0 {
        Some(total as f64 / finite as f64)
    } else {
        None
    };
    ReuseStats {
        histogram,
        cold,
        mean,
    }
}
