//! Turan partitions, sparse perfect matchings and the measurement ensembles
//! built from them.
//!
//! The `2n` Majorana indices are vertices. A partition into `l + 1` nearly equal
//! blocks with one flat orthogonal block per part gives a block-diagonal `D`.
//! A perfect matching meeting every pair of blocks picks the row pairs
//! `{2j-1, 2j}` through the permutation `pi`, so `P_pi D` has a nonzero monomial
//! minor for every observable whose two indices lie in different blocks. A
//! second matrix `P_pi D P_sigma` handles pairs inside one block.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{lower_flat, LowerFlat, OrthogonalMatrix};
use crate::subsets::{binomial_f64, indices, k_subsets, pair_subsets};

/// Minors at or below this magnitude count as zero.
pub const COVERAGE_TOL: f64 = 1e-12;

/// Largest number of full resamples for randomised ensembles.
pub const MAX_RETRIES: usize = 200;

/// Permutation of `0..len` stored by images.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(len: usize) -> Self {
        Permutation {
            images: (0..len).collect(),
        }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || seen[i] {
                return Err(Error::InvalidInput(format!(
                    "not a permutation: {images:?}"
                )));
            }
            seen[i] = true;
        }
        Ok(Permutation { images })
    }

    /// Uniform permutation by Fisher-Yates.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut images: Vec<usize> = (0..len).collect();
        images.shuffle(rng);
        Permutation { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { images: inv }
    }

    /// 1-based cycle notation including fixed points, e.g. `(1)(2,3)(4,5)(6)`.
    pub fn cycle_notation(&self) -> String {
        let mut seen = vec![false; self.images.len()];
        let mut out = String::new();
        for start in 0..self.images.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                cycle.push((cur + 1).to_string());
                cur = self.images[cur];
            }
            out.push('(');
            out.push_str(&cycle.join(","));
            out.push(')');
        }
        out
    }

    pub fn parse_cycles(text: &str, len: usize) -> Result<Self> {
        let mut images: Vec<usize> = (0..len).collect();
        let mut seen = vec![false; len];
        for chunk in text.split('(').map(str::trim).filter(|c| !c.is_empty()) {
            let body = chunk
                .strip_suffix(')')
                .ok_or_else(|| Error::Parse(format!("unterminated cycle in {text:?}")))?;
            let items: Vec<usize> = body
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad cycle entry {t:?}")))
                })
                .collect::<Result<_>>()?;
            for (pos, &v) in items.iter().enumerate() {
                if v == 0 || v > len || seen[v - 1] {
                    return Err(Error::Parse(format!("bad cycle {body:?}")));
                }
                seen[v - 1] = true;
                images[v - 1] = items[(pos + 1) % items.len()] - 1;
            }
        }
        Permutation::from_images(images)
    }
}

/// Blocks of consecutive vertices with sizes `l + extra_i`, `extra_i <= 2`.
#[derive(Clone, Debug, Serialize)]
pub struct TuranPartition {
    pub vertices: usize,
    /// Largest `l` with `l (l + 1) <= vertices`.
    pub base: usize,
    /// `vertices - l (l + 1)`.
    pub leftover: usize,
    pub sizes: Vec<usize>,
    #[serde(skip)]
    starts: Vec<usize>,
}

impl TuranPartition {
    pub fn new(vertices: usize) -> Result<Self> {
        if vertices < 2 || vertices % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "vertex count {vertices} must be even and at least 2"
            )));
        }
        let mut base = 1;
        while (base + 1) * (base + 2) <= vertices {
            base += 1;
        }
        let parts = base + 1;
        let leftover = vertices - base * parts;
        let sizes: Vec<usize> = (0..parts)
            .map(|i| vertices / parts + usize::from(i < vertices % parts))
            .collect();
        let mut starts = Vec::with_capacity(parts);
        let mut acc = 0;
        for &s in &sizes {
            starts.push(acc);
            acc += s;
        }
        Ok(TuranPartition {
            vertices,
            base,
            leftover,
            sizes,
            starts,
        })
    }

    pub fn parts(&self) -> usize {
        self.sizes.len()
    }

    /// Block of a 0-based vertex.
    pub fn block_of(&self, v: usize) -> usize {
        match self.starts.binary_search(&v) {
            Ok(b) => b,
            Err(b) => b - 1,
        }
    }

    /// 0-based vertex at a position inside a block.
    pub fn vertex(&self, block: usize, pos: usize) -> usize {
        self.starts[block] + pos
    }

    pub fn block_vertices(&self, block: usize) -> std::ops::Range<usize> {
        self.starts[block]..self.starts[block] + self.sizes[block]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Staircase edge between two different blocks.
    Staircase,
    /// Edge between leftover vertices of two different blocks.
    Leftover,
    /// Edge joining the two leftover vertices of one oversized block.
    Internal,
}

/// Everything the two-matrix degree-2 construction is made of.
#[derive(Clone, Debug)]
pub struct SparseMatching {
    pub partition: TuranPartition,
    /// 0-based vertex pairs; edge `e` becomes rows `{2e, 2e+1}` of `P_pi D`.
    pub edges: Vec<(usize, usize)>,
    pub kinds: Vec<EdgeKind>,
    pub pi: Permutation,
    pub sigma: Permutation,
    pub flats: Vec<LowerFlat>,
    /// Per block, the column pair covered by the internal edge's rows.
    pub internal_pairs: Vec<Option<(usize, usize)>>,
}

impl SparseMatching {
    /// Staircase matching: position `p` of block `i` (`p >= i`) meets position `i`
    /// of block `p + 1`. Leftover vertices are matched afterwards.
    pub fn new(n_modes: usize) -> Result<Self> {
        let partition = TuranPartition::new(2 * n_modes)?;
        let l = partition.base;
        let parts = partition.parts();
        let mut edges = Vec::with_capacity(n_modes);
        let mut kinds = Vec::with_capacity(n_modes);
        let mut rho: Vec<usize> = (0..2 * n_modes).collect();
        for i in 0..l {
            for p in i..l {
                let a = partition.vertex(i, p);
                let b = partition.vertex(p + 1, i);
                edges.push((a, b));
                kinds.push(EdgeKind::Staircase);
                rho[a] = b;
                rho[b] = a;
            }
        }
        let mut singles = Vec::new();
        for block in 0..parts {
            match partition.sizes[block] - l {
                0 => {}
                1 => singles.push(partition.vertex(block, l)),
                _ => {
                    edges.push((partition.vertex(block, l), partition.vertex(block, l + 1)));
                    kinds.push(EdgeKind::Internal);
                }
            }
        }
        for pair in singles.chunks(2) {
            edges.push((pair[0], pair[1]));
            kinds.push(EdgeKind::Leftover);
        }
        debug_assert_eq!(edges.len(), n_modes);

        let mut pi_images = vec![0; 2 * n_modes];
        for (e, &(a, b)) in edges.iter().enumerate() {
            pi_images[a] = 2 * e;
            pi_images[b] = 2 * e + 1;
        }
        let pi = Permutation::from_images(pi_images)?;

        let flats = partition
            .sizes
            .iter()
            .map(|&s| lower_flat(s))
            .collect::<Result<Vec<_>>>()?;

        // sigma = rho after tau, where tau moves the best column pair of an
        // oversized block onto its two leftover positions (fixed by rho).
        let mut tau: Vec<usize> = (0..2 * n_modes).collect();
        let mut internal_pairs = vec![None; parts];
        for block in 0..parts {
            if partition.sizes[block] != l + 2 {
                continue;
            }
            let f = &flats[block].matrix;
            let size = partition.sizes[block];
            let mut best = (0usize, 1usize, -1.0f64);
            for j1 in 0..size {
                for j2 in j1 + 1..size {
                    let det = f[(l, j1)] * f[(l + 1, j2)] - f[(l, j2)] * f[(l + 1, j1)];
                    if det.abs() > best.2 + COVERAGE_TOL {
                        best = (j1, j2, det.abs());
                    }
                }
            }
            let (j1, j2, _) = best;
            let mut order: Vec<usize> = (0..size).filter(|&p| p != j1 && p != j2).collect();
            order.push(j1);
            order.push(j2);
            for (target, &src) in order.iter().enumerate() {
                tau[partition.vertex(block, src)] = partition.vertex(block, target);
            }
            internal_pairs[block] =
                Some((partition.vertex(block, j1), partition.vertex(block, j2)));
        }
        let sigma = Permutation::from_images((0..2 * n_modes).map(|c| rho[tau[c]]).collect())?;

        Ok(SparseMatching {
            partition,
            edges,
            kinds,
            pi,
            sigma,
            flats,
            internal_pairs,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.partition.vertices / 2
    }

    /// `D`, the direct sum of the flat blocks.
    pub fn block_diagonal(&self) -> DMatrix<f64> {
        let size = self.partition.vertices;
        let mut d = DMatrix::zeros(size, size);
        for (block, flat) in self.flats.iter().enumerate() {
            let start = self.partition.vertex(block, 0);
            let s = flat.size();
            for r in 0..s {
                for c in 0..s {
                    d[(start + r, start + c)] = flat.matrix[(r, c)];
                }
            }
        }
        d
    }

    /// `P_pi D`: row `r` is row `pi^{-1}(r)` of `D`.
    pub fn first_matrix(&self) -> Result<OrthogonalMatrix> {
        let d = OrthogonalMatrix::new(self.block_diagonal())?;
        Ok(d.permute_rows(self.pi.inverse().images()))
    }

    /// `P_pi D P_sigma`: column `c` is column `sigma(c)` of `P_pi D`.
    pub fn second_matrix(&self) -> Result<OrthogonalMatrix> {
        Ok(self.first_matrix()?.permute_columns(self.sigma.images()))
    }

    /// True when some block holds two vertices.
    pub fn has_inner_pairs(&self) -> bool {
        self.partition.sizes.iter().any(|&s| s > 1)
    }

    /// Which matrix the construction relies on for a pair, and the sharpness
    /// it is guaranteed to reach there.
    pub fn guarantee(&self, support: u64) -> Guarantee {
        let v = indices(support);
        let (a, b) = (v[0] - 1, v[1] - 1);
        let part = &self.partition;
        let min = |block: usize| self.flats[block].min_abs_entry;
        let (ba, bb) = (part.block_of(a), part.block_of(b));
        if ba != bb {
            return Guarantee {
                route: Route::Monomial,
                matrix: 0,
                bound: min(ba) * min(bb),
            };
        }
        if let Some((j1, j2)) = self.internal_pairs[ba] {
            if (a, b) == (j1, j2) {
                return Guarantee {
                    route: Route::Internal,
                    matrix: 0,
                    bound: 2.0 * min(ba) * min(ba),
                };
            }
        }
        let (sa, sb) = (self.sigma.apply(a), self.sigma.apply(b));
        let (pa, pb) = (part.block_of(sa), part.block_of(sb));
        if pa == pb {
            return Guarantee {
                route: Route::None,
                matrix: 1,
                bound: 0.0,
            };
        }
        Guarantee {
            route: Route::Permuted,
            matrix: 1,
            bound: min(pa) * min(pb),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// One row per block: the minor is a product of two flat entries.
    Monomial,
    /// Both columns in one block, read through the internal edge.
    Internal,
    /// Same block in the first matrix, split apart by `sigma` in the second.
    Permuted,
    None,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Guarantee {
    pub route: Route,
    pub matrix: usize,
    pub bound: f64,
}

/// Best row choice for one observable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoverageEntry {
    pub support: u64,
    /// 0-based matrix index.
    pub matrix: usize,
    pub rows: u64,
    /// Signed minor `det O_{R,S}` for the chosen matrix and rows.
    pub minor: f64,
}

impl CoverageEntry {
    pub fn eta(&self) -> f64 {
        self.minor.abs()
    }

    pub fn is_covered(&self) -> bool {
        self.eta() > COVERAGE_TOL
    }
}

/// Largest `|det O_{R,S}|` over `R` in `D_2k`; ties go to the lexicographically first `R`.
pub fn best_rows(o: &OrthogonalMatrix, support: u64, row_sets: &[u64]) -> (u64, f64) {
    let mut best = (row_sets[0], 0.0f64);
    for &r in row_sets {
        let d = o.minor(r, support);
        if d.abs() > best.1.abs() + COVERAGE_TOL {
            best = (r, d);
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct CoverageReport {
    pub n_modes: usize,
    pub half_degree: usize,
    /// One entry per `S` in `S_2k`, lexicographic.
    pub entries: Vec<CoverageEntry>,
    /// `per_matrix[s][r]`: best rows and minor of matrix `r` for entry `s`.
    pub per_matrix: Vec<Vec<(u64, f64)>>,
}

impl CoverageReport {
    pub fn uncovered(&self) -> Vec<u64> {
        self.entries
            .iter()
            .filter(|e| !e.is_covered())
            .map(|e| e.support)
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(CoverageEntry::is_covered)
    }

    pub fn min_eta(&self) -> f64 {
        self.entries
            .iter()
            .fold(f64::INFINITY, |m, e| m.min(e.eta()))
    }

    pub fn entry(&self, support: u64) -> Option<&CoverageEntry> {
        self.entries.iter().find(|e| e.support == support)
    }
}

/// Scans every `S` in `S_2k` against every matrix and `R` in `D_2k`.
pub fn ensemble_coverage(
    matrices: &[OrthogonalMatrix],
    n_modes: usize,
    half_degree: usize,
) -> Result<CoverageReport> {
    coverage_for_supports(matrices, n_modes, half_degree, &k_subsets(2 * n_modes, 2 * half_degree))
}

pub fn coverage_for_supports(
    matrices: &[OrthogonalMatrix],
    n_modes: usize,
    half_degree: usize,
    supports: &[u64],
) -> Result<CoverageReport> {
    if matrices.is_empty() {
        return Err(Error::InvalidInput("ensemble has no matrices".into()));
    }
    if half_degree == 0 || half_degree > n_modes {
        return Err(Error::InvalidInput(format!(
            "degree 2k = {} outside 2..={}",
            2 * half_degree,
            2 * n_modes
        )));
    }
    for m in matrices {
        if m.n_modes() != n_modes {
            return Err(Error::ModeMismatch {
                expected: n_modes,
                got: m.n_modes(),
            });
        }
    }
    let row_sets = pair_subsets(n_modes, half_degree);
    let scanned: Vec<(CoverageEntry, Vec<(u64, f64)>)> = supports
        .par_iter()
        .map(|&s| {
            let per: Vec<(u64, f64)> = matrices.iter().map(|o| best_rows(o, s, &row_sets)).collect();
            let mut best = CoverageEntry {
                support: s,
                matrix: 0,
                rows: per[0].0,
                minor: per[0].1,
            };
            for (r, &(rows, d)) in per.iter().enumerate().skip(1) {
                if d.abs() > best.minor.abs() + COVERAGE_TOL {
                    best = CoverageEntry {
                        support: s,
                        matrix: r,
                        rows,
                        minor: d,
                    };
                }
            }
            (best, per)
        })
        .collect();
    let (entries, per_matrix) = scanned.into_iter().unzip();
    Ok(CoverageReport {
        n_modes,
        half_degree,
        entries,
        per_matrix,
    })
}

#[derive(Clone, Debug)]
pub struct MeasurementEnsemble {
    pub n_modes: usize,
    pub half_degree: usize,
    pub matrices: Vec<OrthogonalMatrix>,
    /// Column permutation used for each matrix, when built from a matching.
    pub sigmas: Vec<Permutation>,
    pub pi: Option<Permutation>,
    pub seed: Option<u64>,
    pub retries: usize,
    pub coverage: CoverageReport,
}

impl MeasurementEnsemble {
    pub fn from_matrices(
        n_modes: usize,
        half_degree: usize,
        matrices: Vec<OrthogonalMatrix>,
    ) -> Result<Self> {
        let coverage = ensemble_coverage(&matrices, n_modes, half_degree)?;
        Ok(MeasurementEnsemble {
            n_modes,
            half_degree,
            sigmas: Vec::new(),
            pi: None,
            seed: None,
            retries: 0,
            matrices,
            coverage,
        })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}

/// Two matrices covering all degree-2 observables (one when `n = 1`).
pub fn degree2_ensemble(n_modes: usize) -> Result<MeasurementEnsemble> {
    let matching = SparseMatching::new(n_modes)?;
    let mut matrices = vec![matching.first_matrix()?];
    let mut sigmas = vec![Permutation::identity(2 * n_modes)];
    if matching.has_inner_pairs() {
        matrices.push(matching.second_matrix()?);
        sigmas.push(matching.sigma.clone());
    }
    let coverage = ensemble_coverage(&matrices, n_modes, 1)?;
    if !coverage.is_complete() {
        return Err(Error::CoverageFailed {
            uncovered: coverage.uncovered().len(),
            retries: 0,
        });
    }
    Ok(MeasurementEnsemble {
        n_modes,
        half_degree: 1,
        matrices,
        sigmas,
        pi: Some(matching.pi.clone()),
        seed: None,
        retries: 0,
        coverage,
    })
}

/// `4k + 1`, the default ensemble size for degree `2k`.
pub fn default_ensemble_size(half_degree: usize) -> usize {
    4 * half_degree + 1
}

/// `N` matrices `P_pi D P_sigma_r` with uniformly random `sigma_r`, resampled
/// until every degree-`2k` observable has a nonzero minor.
pub fn degree2k_ensemble(
    n_modes: usize,
    half_degree: usize,
    count: Option<usize>,
    seed: u64,
) -> Result<MeasurementEnsemble> {
    if half_degree == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let matching = SparseMatching::new(n_modes)?;
    let bound = matching.partition.base + 1;
    if 2 * half_degree > bound {
        return Err(Error::DegreeTooLarge {
            two_k: 2 * half_degree,
            bound,
        });
    }
    let count = count.unwrap_or_else(|| default_ensemble_size(half_degree));
    if count == 0 {
        return Err(Error::InvalidInput("ensemble size must be positive".into()));
    }
    let base = matching.first_matrix()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut retries = 0;
    loop {
        let sigmas: Vec<Permutation> = (0..count)
            .map(|_| Permutation::random(2 * n_modes, &mut rng))
            .collect();
        let matrices: Vec<OrthogonalMatrix> = sigmas
            .iter()
            .map(|s| base.permute_columns(s.images()))
            .collect();
        let coverage = ensemble_coverage(&matrices, n_modes, half_degree)?;
        if coverage.is_complete() {
            return Ok(MeasurementEnsemble {
                n_modes,
                half_degree,
                matrices,
                sigmas,
                pi: Some(matching.pi.clone()),
                seed: Some(seed),
                retries,
                coverage,
            });
        }
        retries += 1;
        if retries > MAX_RETRIES {
            return Err(Error::CoverageFailed {
                uncovered: coverage.uncovered().len(),
                retries,
            });
        }
    }
}

/// Whether the blocks of `sigma(S)` are pairwise distinct, so that some `R`
/// gives a monomial minor, and the product of flat minima in that case.
pub fn monomial_guarantee(matching: &SparseMatching, sigma: &Permutation, support: u64) -> Option<f64> {
    let mut used = vec![false; matching.partition.parts()];
    let mut bound = 1.0;
    for v in indices(support) {
        let block = matching.partition.block_of(sigma.apply(v - 1));
        if used[block] {
            return None;
        }
        used[block] = true;
        bound *= matching.flats[block].min_abs_entry;
    }
    Some(bound)
}

/// Probability that a uniformly random partition into `l + 1` blocks of size
/// `l` splits a fixed `2k`-set across distinct blocks fails to do so.
pub fn partition_failure_prob(base: usize, half_degree: usize) -> f64 {
    let vertices = base * (base + 1);
    let good = (base as f64).powi(2 * half_degree as i32) * binomial_f64(base + 1, 2 * half_degree);
    1.0 - good / binomial_f64(vertices, 2 * half_degree)
}

/// `C(2n, 2k) P^N`, the union bound on the chance that `N` partitions miss some observable.
pub fn ensemble_failure_bound(base: usize, half_degree: usize, count: usize) -> f64 {
    let vertices = base * (base + 1);
    binomial_f64(vertices, 2 * half_degree) * partition_failure_prob(base, half_degree).powi(count as i32)
}

/// Monte Carlo estimate of [`partition_failure_prob`].
pub fn sample_partition_failure<R: Rng + ?Sized>(
    base: usize,
    half_degree: usize,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let vertices = base * (base + 1);
    let mut failures = 0usize;
    for _ in 0..samples {
        let positions = rand::seq::index::sample(rng, vertices, 2 * half_degree);
        let mut used = vec![false; base + 1];
        let mut ok = true;
        for p in positions.iter() {
            let block = p / base;
            if used[block] {
                ok = false;
                break;
            }
            used[block] = true;
        }
        if !ok {
            failures += 1;
        }
    }
    failures as f64 / samples as f64
}

/// Monte Carlo estimate of the chance that `count` random partitions leave
/// some `2k`-set unsplit.
pub fn sample_ensemble_failure<R: Rng + ?Sized>(
    base: usize,
    half_degree: usize,
    count: usize,
    trials: usize,
    rng: &mut R,
) -> f64 {
    let vertices = base * (base + 1);
    let supports = k_subsets(vertices, 2 * half_degree);
    let mut failures = 0usize;
    let mut labels = vec![vec![0usize; vertices]; count];
    for _ in 0..trials {
        for lab in labels.iter_mut() {
            let perm = Permutation::random(vertices, rng);
            for (v, slot) in lab.iter_mut().enumerate() {
                *slot = perm.apply(v) / base;
            }
        }
        let missed = supports.iter().any(|&s| {
            let members = indices(s);
            !labels.iter().any(|lab| {
                let mut used = 0u64;
                members.iter().all(|&v| {
                    let bit = 1u64 << lab[v - 1];
                    let fresh = used & bit == 0;
                    used |= bit;
                    fresh
                })
            })
        });
        if missed {
            failures += 1;
        }
    }
    failures as f64 / trials as f64
}
