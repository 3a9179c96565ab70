//! Composable domain and schedule rewrites: skew, strip-mine, interchange,
//! tile, and the time-tiling pipeline.
//!
//! Skewing rewrites the domain into skewed coordinates (bounds on the inner
//! dimension gain a `factor * outer` term) and records the body translation
//! that maps back to the original index space. Strip-mining introduces a
//! tile iterator constrained by `size*tt <= dim <= size*tt + size - 1` and
//! lives entirely in the domain. Loop order is expressed by the schedule;
//! after tiling it is a pure permutation of the (extended) iterators, the
//! same shape a scattering matrix takes.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::legality::{check_tiling_band, compute_skew_factors, skew_dependences};
use crate::polyhedron::{AffineExpr, Constraint, Domain};
use crate::stencil::StencilSpec;

/// An affine map from iteration vectors to timestamp vectors. Rows are
/// output dimensions, columns input dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    linear: Vec<Vec<i64>>,
    shifts: Vec<i64>,
    output_names: Vec<String>,
}

impl Schedule {
    pub fn new(
        linear: Vec<Vec<i64>>,
        shifts: Vec<i64>,
        output_names: Vec<String>,
    ) -> Result<Self> {
        let rows = linear.len();
        if shifts.len() != rows || output_names.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                got: shifts.len().min(output_names.len()),
            });
        }
        let width = linear.first().map_or(0, Vec::len);
        if linear.iter().any(|r| r.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: 0,
            });
        }
        Ok(Schedule {
            linear,
            shifts,
            output_names,
        })
    }

    pub fn identity(names: &[String]) -> Self {
        let n = names.len();
        let linear = (0..n)
            .map(|r| (0..n).map(|c| i64::from(r == c)).collect())
            .collect();
        Schedule {
            linear,
            shifts: vec![0; n],
            output_names: names.to_vec(),
        }
    }

    pub fn num_outputs(&self) -> usize {
        self.linear.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.linear.first().map_or(0, Vec::len)
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.linear
    }

    pub fn shifts(&self) -> &[i64] {
        &self.shifts
    }

    /// Linear part applied to a vector (shifts cancel on differences, so
    /// this is also the dependence-vector transform).
    pub fn apply_linear(&self, v: &[i64]) -> Result<Vec<i64>> {
        if v.len() != self.num_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.num_inputs(),
                got: v.len(),
            });
        }
        Ok(self
            .linear
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Full affine image of a point.
    pub fn apply_point(&self, v: &[i64]) -> Result<Vec<i64>> {
        let mut out = self.apply_linear(v)?;
        for (o, s) in out.iter_mut().zip(&self.shifts) {
            *o += s;
        }
        Ok(out)
    }

    /// Swap two output dimensions.
    pub fn interchange(&mut self, a: usize, b: usize) -> Result<()> {
        if a >= self.num_outputs() || b >= self.num_outputs() {
            return Err(Error::DimensionMismatch {
                expected: self.num_outputs(),
                got: a.max(b) + 1,
            });
        }
        self.linear.swap(a, b);
        self.shifts.swap(a, b);
        self.output_names.swap(a, b);
        Ok(())
    }

    /// Add `factor` times the `outer` row to the `inner` row: the output
    /// that used to be `x` becomes `x + factor*t`.
    pub fn skew_row(&mut self, inner: usize, outer: usize, factor: i64) {
        let outer_row = self.linear[outer].clone();
        for (c, o) in self.linear[inner].iter_mut().zip(&outer_row) {
            *c += factor * o;
        }
        self.shifts[inner] += factor * self.shifts[outer];
    }

    /// Insert an identity row/column for a new iterator at `pos`.
    fn extend_identity(&mut self, pos: usize, name: String) {
        for row in &mut self.linear {
            row.insert(pos, 0);
        }
        let width = self.linear.first().map_or(pos + 1, Vec::len);
        let mut row = vec![0; width];
        row[pos] = 1;
        self.linear.insert(pos, row);
        self.shifts.insert(pos, 0);
        self.output_names.insert(pos, name);
    }

    /// When the schedule is a pure permutation with zero shifts, return
    /// `perm` with `perm[out] = input index`.
    pub fn as_permutation(&self) -> Option<Vec<usize>> {
        if self.num_outputs() != self.num_inputs() {
            return None;
        }
        if self.shifts.iter().any(|&s| s != 0) {
            return None;
        }
        let mut perm = Vec::with_capacity(self.num_outputs());
        let mut seen = vec![false; self.num_inputs()];
        for row in &self.linear {
            let mut idx = None;
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 if idx.is_none() => idx = Some(c),
                    _ => return None,
                }
            }
            let idx = idx?;
            if seen[idx] {
                return None;
            }
            seen[idx] = true;
            perm.push(idx);
        }
        Some(perm)
    }
}

/// Tiling request for the time-tiling pipeline.
#[derive(Debug, Clone, Default)]
pub struct TileConfig {
    /// Tile size per spatial dimension; the vectorized dimension must not
    /// appear here.
    pub spatial_tile_sizes: BTreeMap<String, u64>,
    /// Optional time tile size; required (and capped by the buffer) when
    /// the stencil buffers its time dimension.
    pub time_tile_size: Option<u64>,
    /// Optional skew factors overriding the computed minimal ones. Larger
    /// factors are accepted as long as the band check still passes.
    pub skew_factors: Option<BTreeMap<String, i64>>,
}

/// Result of a transformation pipeline: a domain in transformed
/// coordinates, the output loop order, and the metadata needed to emit and
/// verify code against the original index space.
#[derive(Debug, Clone)]
pub struct TransformedProgram {
    /// Constraints over the transformed (skewed, strip-mined) iterators,
    /// listed in nesting order prior to interchange.
    pub domain: Domain,
    /// Output loop order; a pure permutation of the domain iterators.
    pub schedule: Schedule,
    /// Skew factor per original spatial dimension.
    pub skew_factors: BTreeMap<String, i64>,
    /// Per original dimension, the expression over transformed iterators
    /// that recovers the original coordinate (e.g. `x - 4*time`).
    pub body_translation: Vec<(String, AffineExpr)>,
    /// Names of the tile iterators introduced by strip-mining.
    pub tile_iters: Vec<String>,
    /// The stencil this program was derived from, when any.
    pub stencil: Option<StencilSpec>,
}

impl TransformedProgram {
    /// The stencil's own loop nest, untransformed.
    pub fn untransformed(spec: &StencilSpec) -> Self {
        let domain = spec.domain();
        let schedule = Schedule::identity(domain.iterators());
        let body_translation = spec
            .dims
            .iter()
            .map(|d| (d.clone(), AffineExpr::var(d)))
            .collect();
        TransformedProgram {
            domain,
            schedule,
            skew_factors: BTreeMap::new(),
            body_translation,
            tile_iters: Vec::new(),
            stencil: Some(spec.clone()),
        }
    }

    /// Original dimension names, outermost first.
    pub fn original_dims(&self) -> Vec<String> {
        self.body_translation.iter().map(|(d, _)| d.clone()).collect()
    }
}

/// Pick an unused tile-iterator name: `x` becomes `xx`, `time` becomes `tt`.
fn tile_iter_name(domain: &Domain, dim: &str) -> String {
    let taken = |n: &str| {
        domain.iterators().iter().any(|i| i == n) || domain.parameters().iter().any(|p| p == n)
    };
    let c = dim.chars().next().expect("empty iterator name");
    let mut candidate = format!("{c}{c}");
    if taken(&candidate) {
        candidate = format!("{dim}_t");
    }
    while taken(&candidate) {
        candidate.push('_');
    }
    candidate
}

/// Skew `inner` with respect to `outer` by a non-negative factor.
///
/// The returned domain is in skewed coordinates: every constraint has
/// `inner` substituted by `inner - factor*outer`, so bounds `lb <= x <= ub`
/// become `lb + f*t <= x <= ub + f*t`. The returned schedule is the input
/// schedule with the skew composed on (`x -> x + f*t`).
pub fn skew(
    domain: &Domain,
    schedule: &Schedule,
    inner: &str,
    outer: &str,
    factor: i64,
) -> Result<(Domain, Schedule)> {
    if factor < 0 {
        return Err(Error::InvalidConfig(format!(
            "skew factor must be non-negative, got {factor}"
        )));
    }
    let inner_idx = domain
        .iterator_index(inner)
        .ok_or_else(|| Error::UnknownVariable(inner.to_string()))?;
    let outer_idx = domain
        .iterator_index(outer)
        .ok_or_else(|| Error::UnknownVariable(outer.to_string()))?;
    if inner_idx <= outer_idx {
        return Err(Error::InvalidConfig(format!(
            "`{inner}` must be nested strictly inside `{outer}`"
        )));
    }
    if factor == 0 {
        return Ok((domain.clone(), schedule.clone()));
    }
    // x_old = x_new - f*t
    let replacement = AffineExpr::var(inner)
        .sub(&AffineExpr::term(outer, factor))
        .map_err(|_| Error::Overflow)?;
    let new_domain = domain.substitute(inner, &replacement)?;
    let mut new_schedule = schedule.clone();
    new_schedule.skew_row(inner_idx, outer_idx, factor);
    Ok((new_domain, new_schedule))
}

/// Strip-mine one dimension: introduce a tile iterator immediately outside
/// it with `size*tt <= dim <= size*tt + size - 1`. The iteration set is
/// unchanged; every point gets a unique tile coordinate.
pub fn strip_mine(domain: &Domain, dim: &str, size: u64) -> Result<(Domain, String)> {
    if size == 0 {
        return Err(Error::InvalidConfig(format!(
            "tile size for `{dim}` must be at least 1"
        )));
    }
    let idx = domain
        .iterator_index(dim)
        .ok_or_else(|| Error::UnknownVariable(dim.to_string()))?;
    let size = i64::try_from(size).map_err(|_| Error::Overflow)?;
    let name = tile_iter_name(domain, dim);
    let mut out = domain.clone();
    out.insert_iterator(idx, name.clone());
    out.push_constraint(Constraint::lower_bound(dim, AffineExpr::term(&name, size)));
    out.push_constraint(Constraint::upper_bound(
        dim,
        AffineExpr::term(&name, size)
            .add_constant(size - 1)
            .map_err(|_| Error::Overflow)?,
    ));
    Ok((out, name))
}

/// Swap two output dimensions of a schedule.
pub fn interchange(schedule: &Schedule, a: usize, b: usize) -> Result<Schedule> {
    let mut s = schedule.clone();
    s.interchange(a, b)?;
    Ok(s)
}

/// Tile the listed dimensions: strip-mine each, then interchange all tile
/// iterators outward as a band. The final loop order is the tile iterators
/// (in original relative order) followed by the point iterators (in
/// original relative order).
pub fn tile(
    domain: &Domain,
    schedule: &Schedule,
    sizes: &[(String, u64)],
) -> Result<(Domain, Schedule, Vec<String>)> {
    let mut d = domain.clone();
    let mut s = schedule.clone();
    let mut tile_names = Vec::new();
    for (dim, size) in sizes {
        let (nd, tname) = strip_mine(&d, dim, *size)?;
        let pos = nd.iterator_index(&tname).expect("tile iterator exists");
        s.extend_identity(pos, tname.clone());
        tile_names.push(tname);
        d = nd;
    }
    // Band interchange: rows for tile iterators move to the front.
    let names = s.output_names().to_vec();
    let mut order: Vec<usize> = Vec::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        if tile_names.contains(n) {
            order.push(i);
        }
    }
    for (i, n) in names.iter().enumerate() {
        if !tile_names.contains(n) {
            order.push(i);
        }
    }
    let permuted = Schedule {
        linear: order.iter().map(|&i| s.linear[i].clone()).collect(),
        shifts: order.iter().map(|&i| s.shifts[i]).collect(),
        output_names: order.iter().map(|&i| s.output_names[i].clone()).collect(),
    };
    Ok((d, permuted, tile_names))
}

/// The time-tiling pipeline: skew every spatial dimension by its (computed
/// or supplied) factor, tile the requested spatial dimensions, and either
/// tile time as well or leave the full time loop inside the spatial tile
/// band.
///
/// Fails when the requested configuration is illegal: a time tile larger
/// than the time buffer, a band that is not fully permutable after skewing,
/// or a request to tile the vectorized dimension.
pub fn time_tile(spec: &StencilSpec, cfg: &TileConfig) -> Result<TransformedProgram> {
    time_tile_impl(spec, cfg, true)
}

/// The same pipeline with the legality gates disabled: under-skewed bands
/// and buffer-violating time tiles are constructed as requested so the
/// oracle can demonstrate what goes wrong with them.
pub fn time_tile_unchecked(spec: &StencilSpec, cfg: &TileConfig) -> Result<TransformedProgram> {
    time_tile_impl(spec, cfg, false)
}

fn time_tile_impl(
    spec: &StencilSpec,
    cfg: &TileConfig,
    checked: bool,
) -> Result<TransformedProgram> {
    let deps = spec.extract_dependences();
    let time = spec.time_dim().to_string();

    // Buffered time caps the time tile and rules out full-time interchange:
    // once the buffer wraps, values from more than `buffer` steps back are
    // gone, so every spatial tile must finish within one buffer window.
    if checked {
        if let (Some(buffer), Some(ts)) = (spec.time_buffer, cfg.time_tile_size) {
            if ts > buffer {
                return Err(Error::BufferViolation { tile: ts, buffer });
            }
        }
        if let (Some(buffer), None) = (spec.time_buffer, cfg.time_tile_size) {
            return Err(Error::InvalidConfig(format!(
                "the time dimension is buffered ({buffer} slices); time-tiling it \
                 requires an explicit time tile size no larger than the buffer"
            )));
        }
    }
    if cfg.time_tile_size == Some(0) {
        return Err(Error::InvalidConfig("time tile size must be at least 1".into()));
    }

    for dim in cfg.spatial_tile_sizes.keys() {
        if Some(dim) == spec.vectorized_dim.as_ref() {
            return Err(Error::InvalidConfig(format!(
                "`{dim}` is the vectorized dimension and cannot be tiled"
            )));
        }
        if dim == &time {
            return Err(Error::InvalidConfig(
                "use the time tile size for the time dimension".into(),
            ));
        }
        if !spec.spatial_dims().contains(dim) {
            return Err(Error::UnknownVariable(dim.clone()));
        }
    }

    // Skew factors for every spatial dimension (tiled or not; the untiled
    // vectorized dimension is skewed too, which only shifts its
    // bounds and never reorders it).
    let spatial_indices: Vec<usize> = (1..spec.dims.len()).collect();
    let minimal = compute_skew_factors(&deps, &spatial_indices)?;
    let mut factors: BTreeMap<String, i64> = minimal
        .iter()
        .map(|&(k, f)| (spec.dims[k].clone(), f))
        .collect();
    if let Some(user) = &cfg.skew_factors {
        for (dim, f) in user {
            if !spec.spatial_dims().contains(dim) {
                return Err(Error::UnknownVariable(dim.clone()));
            }
            if *f < 0 {
                return Err(Error::InvalidConfig(format!(
                    "skew factor for `{dim}` must be non-negative"
                )));
            }
            factors.insert(dim.clone(), *f);
        }
    }

    // Band legality on the skewed dependences: time plus every tiled dim.
    let factor_list: Vec<(usize, i64)> = spec
        .dims
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, d)| (k, factors[d]))
        .collect();
    let skewed_deps = skew_dependences(&deps, &factor_list);
    let mut band = vec![0usize];
    for (k, d) in spec.dims.iter().enumerate().skip(1) {
        if cfg.spatial_tile_sizes.contains_key(d) {
            band.push(k);
        }
    }
    if checked {
        for d in &skewed_deps {
            for &k in &band {
                if d.components()[k] < 0 {
                    return Err(Error::IllegalBand {
                        dep: d.components().to_vec(),
                        dim: spec.dims[k].clone(),
                    });
                }
            }
        }
        debug_assert!(check_tiling_band(&skewed_deps, &band));
    }

    // Skew the domain.
    let mut domain = spec.domain();
    for (dim, f) in &factors {
        if *f > 0 {
            let schedule = Schedule::identity(domain.iterators());
            let (nd, _) = skew(&domain, &schedule, dim, &time, *f)?;
            domain = nd;
        }
    }

    // Tile: spatial sizes in dimension order, time first when requested.
    let mut sizes: Vec<(String, u64)> = Vec::new();
    if let Some(ts) = cfg.time_tile_size {
        sizes.push((time.clone(), ts));
    }
    for d in spec.spatial_dims() {
        if let Some(sz) = cfg.spatial_tile_sizes.get(d) {
            sizes.push((d.clone(), *sz));
        }
    }
    let identity = Schedule::identity(domain.iterators());
    let (domain, schedule, tile_iters) = tile(&domain, &identity, &sizes)?;

    let body_translation = spec
        .dims
        .iter()
        .map(|d| {
            let f = factors.get(d).copied().unwrap_or(0);
            let expr = if f > 0 {
                AffineExpr::var(d)
                    .sub(&AffineExpr::term(&time, f))
                    .expect("translation overflow")
            } else {
                AffineExpr::var(d)
            };
            (d.clone(), expr)
        })
        .collect();

    Ok(TransformedProgram {
        domain,
        schedule,
        skew_factors: factors,
        body_translation,
        tile_iters,
        stencil: Some(spec.clone()),
    })
}
