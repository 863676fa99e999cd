//! Shot simulation and unbiased estimators.
//!
//! A shot draws a matrix index `r` and a sign vector `x` uniformly, applies
//! `gamma_X` and then the compiled Gaussian unitary, and measures every pair
//! observable `gamma_{2j-1,2j}` in the computational basis. Shots are generated
//! in fixed-size blocks, each with its own ChaCha stream, so results do not
//! depend on how many worker threads run.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianUnitary, OrthogonalMatrix};
use crate::majorana::{Monomial, PauliString, DEFAULT_DENSE_LIMIT};
use crate::matching::MeasurementEnsemble;
use crate::povm::{
    degree1_rotation, full_mask, monomial_from_signs, pair_sign, sign_product,
    two_observable_coefficient, SharpnessRow, SharpnessTable,
};
use crate::subsets::{binomial_f64, format_subset};
use crate::C64;

/// Shots per independently seeded block.
pub const BLOCK_SIZE: usize = 4096;

/// Derives a child seed from a parent seed and a label (FNV-1a, then SplitMix64).
pub fn substream(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(label.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn block_rng(seed: u64, block: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

#[derive(Clone, Debug)]
pub enum FermionicState {
    Pure { n_modes: usize, amplitudes: Vec<C64> },
    Mixed { n_modes: usize, density: DMatrix<C64> },
}

/// JSON form: `{"n_modes": n, "amplitudes": [[re, im], ...]}` or
/// `{"n_modes": n, "density": [[re, im], ...]}` with the density row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub n_modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<[f64; 2]>>,
}

impl FermionicState {
    pub fn pure(n_modes: usize, amplitudes: Vec<C64>) -> Result<Self> {
        Self::check_modes(n_modes)?;
        let dim = 1usize << n_modes;
        if amplitudes.len() != dim {
            return Err(Error::InvalidInput(format!(
                "expected {dim} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!("state norm {norm} is not 1")));
        }
        Ok(FermionicState::Pure { n_modes, amplitudes })
    }

    pub fn mixed(n_modes: usize, density: DMatrix<C64>) -> Result<Self> {
        Self::check_modes(n_modes)?;
        let dim = 1usize << n_modes;
        if density.nrows() != dim || density.ncols() != dim {
            return Err(Error::InvalidInput(format!("density must be {dim}x{dim}")));
        }
        let herm = (&density - density.adjoint()).iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if herm > 1e-8 {
            return Err(Error::InvalidInput("density is not Hermitian".into()));
        }
        let tr = density.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::InvalidInput(format!("density trace {tr} is not 1")));
        }
        let eig = nalgebra::SymmetricEigen::new(density.clone());
        if eig.eigenvalues.iter().any(|&v| v < -1e-8) {
            return Err(Error::InvalidInput("density is not positive".into()));
        }
        Ok(FermionicState::Mixed { n_modes, density })
    }

    fn check_modes(n_modes: usize) -> Result<()> {
        if n_modes == 0 || n_modes > DEFAULT_DENSE_LIMIT {
            return Err(Error::DenseLimit {
                n_modes,
                limit: DEFAULT_DENSE_LIMIT,
            });
        }
        Ok(())
    }

    /// Haar-random pure state.
    pub fn random_pure<R: Rng + ?Sized>(n_modes: usize, rng: &mut R) -> Result<Self> {
        let dim = 1usize << n_modes;
        let mut amps: Vec<C64> = (0..dim)
            .map(|_| {
                C64::new(
                    rng.sample(rand_distr::StandardNormal),
                    rng.sample(rand_distr::StandardNormal),
                )
            })
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Self::pure(n_modes, amps)
    }

    pub fn from_file(file: &StateFile) -> Result<Self> {
        let to_c = |v: &[[f64; 2]]| v.iter().map(|p| C64::new(p[0], p[1])).collect::<Vec<_>>();
        match (&file.amplitudes, &file.density) {
            (Some(a), None) => Self::pure(file.n_modes, to_c(a)),
            (None, Some(d)) => {
                let dim = 1usize << file.n_modes.min(DEFAULT_DENSE_LIMIT);
                if d.len() != dim * dim {
                    return Err(Error::InvalidInput(format!(
                        "density needs {} entries, got {}",
                        dim * dim,
                        d.len()
                    )));
                }
                Self::mixed(file.n_modes, DMatrix::from_row_slice(dim, dim, &to_c(d)))
            }
            _ => Err(Error::InvalidInput(
                "state needs exactly one of amplitudes or density".into(),
            )),
        }
    }

    pub fn to_file(&self) -> StateFile {
        let pack = |c: &C64| [c.re, c.im];
        match self {
            FermionicState::Pure { n_modes, amplitudes } => StateFile {
                n_modes: *n_modes,
                amplitudes: Some(amplitudes.iter().map(pack).collect()),
                density: None,
            },
            FermionicState::Mixed { n_modes, density } => StateFile {
                n_modes: *n_modes,
                amplitudes: None,
                density: Some(density.transpose().iter().map(pack).collect()),
            },
        }
    }

    pub fn n_modes(&self) -> usize {
        match self {
            FermionicState::Pure { n_modes, .. } | FermionicState::Mixed { n_modes, .. } => *n_modes,
        }
    }

    pub fn density(&self) -> DMatrix<C64> {
        match self {
            FermionicState::Pure { amplitudes, .. } => {
                let v = nalgebra::DVector::from_column_slice(amplitudes);
                &v * v.adjoint()
            }
            FermionicState::Mixed { density, .. } => density.clone(),
        }
    }

    /// `tr(P rho)` for a Pauli string.
    pub fn pauli_expectation(&self, p: &PauliString) -> C64 {
        match self {
            FermionicState::Pure { amplitudes, .. } => {
                let mut acc = C64::new(0.0, 0.0);
                for (b, amp) in amplitudes.iter().enumerate() {
                    let (row, coeff) = p.apply_basis(b as u64);
                    acc += amplitudes[row as usize].conj() * coeff * amp;
                }
                acc
            }
            FermionicState::Mixed { density, .. } => {
                let mut acc = C64::new(0.0, 0.0);
                for col in 0..density.ncols() {
                    let (row, coeff) = p.apply_basis(col as u64);
                    acc += coeff * density[(col, row as usize)];
                }
                acc
            }
        }
    }

    /// `tr(gamma_S rho)`, real for Hermitian monomials.
    pub fn expectation(&self, support: u64) -> Result<f64> {
        let p = Monomial::hermitian(self.n_modes(), support)?.to_pauli();
        Ok(self.pauli_expectation(&p).re)
    }

    /// Basis-state probabilities after `U gamma_X`.
    fn evolved_probabilities(&self, u: &DMatrix<C64>, gx: &PauliString) -> Vec<f64> {
        match self {
            FermionicState::Pure { amplitudes, .. } => {
                let moved = nalgebra::DVector::from_vec(gx.apply_vector(amplitudes));
                (u * moved).iter().map(|a| a.norm_sqr()).collect()
            }
            FermionicState::Mixed { density, .. } => {
                let g = gx.dense().expect("within dense limit");
                let a = u * g;
                let evolved = &a * density * a.adjoint();
                (0..evolved.nrows()).map(|i| evolved[(i, i)].re.max(0.0)).collect()
            }
        }
    }
}

/// One measurement record; `x` and `q` are sign masks (set bit = `-1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotRecord {
    pub shot_id: u64,
    /// 0-based matrix index.
    pub matrix: usize,
    pub x: u64,
    pub q: u64,
}

/// Precomputed unitaries and outcome tables for repeated sampling.
pub struct ShotSampler<'a> {
    state: &'a FermionicState,
    n_modes: usize,
    unitaries: Vec<DMatrix<C64>>,
    /// `q` mask for each computational basis state.
    q_of_basis: Vec<u64>,
    /// Cumulative distributions indexed by `r * 4^n + x` when small enough.
    cached: Option<Vec<Vec<f64>>>,
}

/// Largest number of stored probabilities for the per-`(r, x)` cache.
pub const CACHE_LIMIT: usize = 1 << 22;

fn cumulative(p: Vec<f64>) -> Vec<f64> {
    let mut acc = 0.0;
    p.into_iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

impl<'a> ShotSampler<'a> {
    pub fn new(state: &'a FermionicState, matrices: &[OrthogonalMatrix]) -> Result<Self> {
        let n = state.n_modes();
        for o in matrices {
            if o.n_modes() != n {
                return Err(Error::ModeMismatch {
                    expected: n,
                    got: o.n_modes(),
                });
            }
        }
        let unitaries = matrices
            .iter()
            .map(|o| GaussianUnitary::compile(o).dense())
            .collect::<Result<Vec<_>>>()?;
        let pair_images: Vec<PauliString> = (0..n)
            .map(|j| Monomial::hermitian(n, 0b11u64 << (2 * j)).map(|m| m.to_pauli()))
            .collect::<Result<_>>()?;
        let q_of_basis = (0..1u64 << n)
            .map(|b| {
                let mut q = 0u64;
                for (j, p) in pair_images.iter().enumerate() {
                    let (row, amp) = p.apply_basis(b);
                    debug_assert_eq!(row, b);
                    if amp.re < 0.0 {
                        q |= 1 << j;
                    }
                }
                q
            })
            .collect();
        let mut sampler = ShotSampler {
            state,
            n_modes: n,
            unitaries,
            q_of_basis,
            cached: None,
        };
        let entries = matrices.len() << (3 * n);
        if entries <= CACHE_LIMIT {
            let xs = 1u64 << (2 * n);
            let table: Vec<Vec<f64>> = (0..matrices.len() as u64 * xs)
                .into_par_iter()
                .map(|idx| cumulative(sampler.probabilities((idx / xs) as usize, idx % xs)))
                .collect();
            sampler.cached = Some(table);
        }
        Ok(sampler)
    }

    /// Probabilities of each basis outcome given the matrix and sign vector.
    pub fn probabilities(&self, matrix: usize, x: u64) -> Vec<f64> {
        let gx = Monomial::ordered(self.n_modes, monomial_from_signs(x, 2 * self.n_modes), 0)
            .expect("valid mask")
            .to_pauli();
        self.state.evolved_probabilities(&self.unitaries[matrix], &gx)
    }

    /// Exact probability of `(r, q, x)` including the uniform draws of `r` and `x`.
    pub fn outcome_probability(&self, matrix: usize, q: u64, x: u64) -> f64 {
        let p = self.probabilities(matrix, x);
        let weight = 1.0 / (self.unitaries.len() as f64 * (1u64 << (2 * self.n_modes)) as f64);
        p.iter()
            .enumerate()
            .filter(|(b, _)| self.q_of_basis[*b] == q)
            .map(|(_, v)| v)
            .sum::<f64>()
            * weight
    }

    fn draw<R: Rng>(&self, rng: &mut R, shot_id: u64) -> ShotRecord {
        let matrix = rng.random_range(0..self.unitaries.len());
        let x = rng.random::<u64>() & full_mask(2 * self.n_modes);
        let u: f64 = rng.random();
        let owned;
        let cdf: &[f64] = match &self.cached {
            Some(table) => &table[(matrix << (2 * self.n_modes)) + x as usize],
            None => {
                owned = cumulative(self.probabilities(matrix, x));
                &owned
            }
        };
        let total = *cdf.last().expect("nonempty");
        let target = u * total;
        let b = cdf.partition_point(|&c| c <= target).min(cdf.len() - 1);
        ShotRecord {
            shot_id,
            matrix,
            x,
            q: self.q_of_basis[b],
        }
    }

    pub fn sample(&self, shots: usize, seed: u64) -> Vec<ShotRecord> {
        let blocks = shots.div_ceil(BLOCK_SIZE);
        (0..blocks)
            .into_par_iter()
            .flat_map_iter(|block| {
                let mut rng = block_rng(seed, block);
                let start = block * BLOCK_SIZE;
                let end = (start + BLOCK_SIZE).min(shots);
                (start..end)
                    .map(|id| self.draw(&mut rng, id as u64))
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

pub fn simulate_shots(
    state: &FermionicState,
    ensemble: &MeasurementEnsemble,
    shots: usize,
    seed: u64,
) -> Result<Vec<ShotRecord>> {
    Ok(ShotSampler::new(state, &ensemble.matrices)?.sample(shots, seed))
}

/// Shot log CSV: `shot_id, r, x_bits, q_bits` with 1-based `r` and hex masks.
pub fn write_shot_log<W: std::io::Write>(shots: &[ShotRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["shot_id", "r", "x_bits", "q_bits"])?;
    for s in shots {
        w.write_record([
            s.shot_id.to_string(),
            (s.matrix + 1).to_string(),
            format!("{:x}", s.x),
            format!("{:x}", s.q),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_shot_log<R: std::io::Read>(input: R) -> Result<Vec<ShotRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Parse("short shot record".into()));
        let bad = |what: &str| Error::Parse(format!("bad {what} in shot log"));
        let r: usize = field(1)?.parse().map_err(|_| bad("r"))?;
        if r == 0 {
            return Err(bad("r"));
        }
        out.push(ShotRecord {
            shot_id: field(0)?.parse().map_err(|_| bad("shot_id"))?,
            matrix: r - 1,
            x: u64::from_str_radix(field(2)?, 16).map_err(|_| bad("x_bits"))?,
            q: u64::from_str_radix(field(3)?, 16).map_err(|_| bad("q_bits"))?,
        });
    }
    Ok(out)
}

/// Per-shot values `e_S N / eta_S` for one target. Shots from other matrices
/// receive a fair coin from a stream keyed by the target.
fn single_shot_estimates(shots: &[ShotRecord], row: &SharpnessRow, coin_seed: u64) -> (Vec<f64>, usize) {
    let scale = 1.0 / row.eta_effective;
    let mut coin = ChaCha20Rng::seed_from_u64(substream(coin_seed, &format_subset(row.support)));
    let mut flips = 0;
    let values = shots
        .iter()
        .map(|s| {
            let e = if s.matrix == row.matrix {
                row.sign() * sign_product(s.x, row.support) * pair_sign(s.q, row.rows)
            } else {
                flips += 1;
                if coin.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            };
            e * scale
        })
        .collect();
    (values, flips)
}

fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimationRecord {
    pub target: String,
    pub estimate: f64,
    pub std_error: f64,
    pub shots: usize,
    /// 1-based matrix used for the target.
    pub r: usize,
    pub rows: String,
    pub eta: f64,
    pub eta_effective: f64,
    /// Shots whose matrix carried no information for this target.
    pub coin_flips: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
}

fn require_row<'t>(table: &'t SharpnessTable, support: u64) -> Result<&'t SharpnessRow> {
    match table.row(support) {
        Some(r) if r.is_covered() => Ok(r),
        _ => Err(Error::UncoveredTarget(format_subset(support))),
    }
}

pub fn estimate_expectations(
    shots: &[ShotRecord],
    table: &SharpnessTable,
    targets: &[u64],
    coin_seed: u64,
) -> Result<Vec<EstimationRecord>> {
    if shots.is_empty() {
        return Err(Error::InvalidInput("no shots".into()));
    }
    targets
        .iter()
        .map(|&s| {
            let row = require_row(table, s)?;
            let (values, flips) = single_shot_estimates(shots, row, coin_seed);
            let (mean, var) = mean_and_variance(&values);
            Ok(EstimationRecord {
                target: format_subset(s),
                estimate: mean,
                std_error: (var / values.len() as f64).sqrt(),
                shots: values.len(),
                r: row.matrix + 1,
                rows: format_subset(row.rows),
                eta: row.eta,
                eta_effective: row.eta_effective,
                coin_flips: flips,
                exact: None,
            })
        })
        .collect()
}

/// Noise-free record: the estimator mean is `tr(gamma_S rho)` exactly.
pub fn exact_expectations(
    state: &FermionicState,
    table: &SharpnessTable,
    targets: &[u64],
) -> Result<Vec<EstimationRecord>> {
    targets
        .iter()
        .map(|&s| {
            let row = require_row(table, s)?;
            let value = state.expectation(s)?;
            Ok(EstimationRecord {
                target: format_subset(s),
                estimate: value,
                std_error: 0.0,
                shots: 0,
                r: row.matrix + 1,
                rows: format_subset(row.rows),
                eta: row.eta,
                eta_effective: row.eta_effective,
                coin_flips: 0,
                exact: Some(value),
            })
        })
        .collect()
}

/// `sum_S alpha_S gamma_S` over even supports.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    pub n_modes: usize,
    pub terms: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HamiltonianFile {
    pub n_modes: usize,
    pub terms: Vec<HamiltonianTerm>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HamiltonianTerm {
    #[serde(rename = "S")]
    pub support: Vec<usize>,
    pub alpha: f64,
}

impl Hamiltonian {
    pub fn new(n_modes: usize, terms: Vec<(u64, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &(s, _) in &terms {
            if s.count_ones() == 0 || s.count_ones() % 2 == 1 {
                return Err(Error::InvalidInput(format!(
                    "term {} must have positive even degree",
                    format_subset(s)
                )));
            }
            if 2 * n_modes < 64 && s >> (2 * n_modes) != 0 {
                return Err(Error::InvalidInput(format!("term {} out of range", format_subset(s))));
            }
            if !seen.insert(s) {
                return Err(Error::InvalidInput(format!("term {} repeated", format_subset(s))));
            }
        }
        Ok(Hamiltonian { n_modes, terms })
    }

    pub fn from_file(file: &HamiltonianFile) -> Result<Self> {
        let terms = file
            .terms
            .iter()
            .map(|t| Ok((crate::subsets::mask_from_indices(&t.support, 2 * file.n_modes)?, t.alpha)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.n_modes, terms)
    }

    pub fn supports(&self) -> Vec<u64> {
        self.terms.iter().map(|t| t.0).collect()
    }

    pub fn expectation(&self, state: &FermionicState) -> Result<f64> {
        self.terms
            .iter()
            .map(|&(s, a)| Ok(a * state.expectation(s)?))
            .sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HamiltonianEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Sample variance of the single-shot estimator.
    pub variance: f64,
    /// Standard error of `variance`, from the fourth central moment.
    pub variance_std_error: f64,
    pub shots: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
}

/// Summary statistics of a sample, including the error of its variance.
pub fn sample_summary(values: &[f64]) -> (f64, f64, f64, f64) {
    let (mean, var) = mean_and_variance(values);
    let n = values.len() as f64;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let var_se = ((m4 - var * var) / n).max(0.0).sqrt();
    (mean, (var / n).sqrt(), var, var_se)
}

pub fn estimate_hamiltonian(
    shots: &[ShotRecord],
    table: &SharpnessTable,
    h: &Hamiltonian,
    coin_seed: u64,
) -> Result<HamiltonianEstimate> {
    if shots.is_empty() {
        return Err(Error::InvalidInput("no shots".into()));
    }
    let mut totals = vec![0.0f64; shots.len()];
    for &(s, alpha) in &h.terms {
        let row = require_row(table, s)?;
        let (values, _) = single_shot_estimates(shots, row, coin_seed);
        for (t, v) in totals.iter_mut().zip(values) {
            *t += alpha * v;
        }
    }
    let (mean, se, var, var_se) = sample_summary(&totals);
    Ok(HamiltonianEstimate {
        estimate: mean,
        std_error: se,
        variance: var,
        variance_std_error: var_se,
        shots: shots.len(),
        predicted_variance: None,
        exact: None,
    })
}

/// Variance of the single-shot Hamiltonian estimator. Diagonal terms give
/// `alpha^2 / eta_eff^2`. Two terms read from the same matrix correlate
/// through the minor on the symmetric differences, weighted by `1 / N`; terms
/// on different matrices pair a real outcome with an independent coin and
/// drop out. With one matrix this is the familiar single-setting formula.
pub fn predicted_variance(
    h: &Hamiltonian,
    matrices: &[OrthogonalMatrix],
    table: &SharpnessTable,
    state: &FermionicState,
) -> Result<f64> {
    if table.ensemble_size != matrices.len() {
        return Err(Error::InvalidInput(format!(
            "table built for {} matrices, got {}",
            table.ensemble_size,
            matrices.len()
        )));
    }
    let count = matrices.len() as f64;
    let rows: Vec<&SharpnessRow> = h
        .supports()
        .iter()
        .map(|&s| require_row(table, s))
        .collect::<Result<_>>()?;
    let mut second_moment = 0.0;
    for (i, &(s1, a1)) in h.terms.iter().enumerate() {
        let r1 = rows[i];
        second_moment += a1 * a1 / (r1.eta_effective * r1.eta_effective);
        for (j, &(s2, a2)) in h.terms.iter().enumerate() {
            let r2 = rows[j];
            if i == j || r1.matrix != r2.matrix {
                continue;
            }
            let c = two_observable_coefficient(&matrices[r1.matrix], (r1.rows, s1), (r2.rows, s2));
            if c != 0.0 {
                second_moment += a1 * a2 * c / (count * r1.eta_effective * r2.eta_effective)
                    * state.expectation(s1 ^ s2)?;
            }
        }
    }
    let mean = h.expectation(state)?;
    Ok(second_moment - mean * mean)
}

/// `2n sum alpha_j^2 - tr(H rho)^2` for `H = sum_j alpha_j gamma_j` under the
/// uniform degree-1 parent.
pub fn degree1_predicted_variance(alpha: &[f64], state: &FermionicState) -> Result<f64> {
    let n = state.n_modes();
    if alpha.len() != 2 * n {
        return Err(Error::InvalidInput(format!("need {} coefficients", 2 * n)));
    }
    let mut mean = 0.0;
    for (j, a) in alpha.iter().enumerate() {
        mean += a * state.expectation(1u64 << j)?;
    }
    Ok(2.0 * n as f64 * alpha.iter().map(|a| a * a).sum::<f64>() - mean * mean)
}

/// Degree-1 shots: `gamma_1` is rotated onto `sum_j gamma_j / sqrt(2n)`, a
/// uniformly random `gamma_X` is applied, and the outcome is `e_j = q x_j`
/// (returned as a sign mask).
pub fn simulate_degree1(state: &FermionicState, shots: usize, seed: u64) -> Result<Vec<u64>> {
    let n = state.n_modes();
    let w = 1.0 / ((2 * n) as f64).sqrt();
    let o = degree1_rotation(&vec![w; 2 * n])?;
    let u = GaussianUnitary::compile(&o).dense()?;
    let g1 = PauliString::majorana(n, 1);
    let dim = 1usize << n;
    // Probability of q = +1 for each X, from tr(rho' (I + gamma_1)/2).
    let plus: Vec<f64> = (0..1u64 << (2 * n))
        .map(|x| {
            let gx = Monomial::ordered(n, monomial_from_signs(x, 2 * n), 0)
                .expect("valid mask")
                .dense()
                .expect("dense");
            let a = &u * gx;
            let rho = state.density();
            let evolved = &a * rho * a.adjoint();
            let mut p = DMatrix::<C64>::identity(dim, dim);
            for col in 0..dim {
                let (row, amp) = g1.apply_basis(col as u64);
                p[(row as usize, col)] += amp;
            }
            ((p * evolved).trace().re / 2.0).clamp(0.0, 1.0)
        })
        .collect();
    let blocks = shots.div_ceil(BLOCK_SIZE);
    Ok((0..blocks)
        .into_par_iter()
        .flat_map_iter(|block| {
            let mut rng = block_rng(seed, block);
            let count = (shots - block * BLOCK_SIZE).min(BLOCK_SIZE);
            (0..count)
                .map(|_| {
                    let x = rng.random::<u64>() & full_mask(2 * n);
                    let q_plus = rng.random::<f64>() < plus[x as usize];
                    if q_plus {
                        x
                    } else {
                        !x & full_mask(2 * n)
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect())
}

/// `ceil(2 ln(2 m / delta) / (eps eta)^2)` shots estimate `m` observables of
/// sharpness at least `eta` to accuracy `eps` with probability `1 - delta`.
pub fn hoeffding_samples(observables: f64, epsilon: f64, delta: f64, eta: f64) -> Result<u64> {
    if !(epsilon > 0.0 && delta > 0.0 && delta <= 1.0 && eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "need eps > 0, 0 < delta <= 1 and 0 < eta <= 1 (got {epsilon}, {delta}, {eta})"
        )));
    }
    Ok((2.0 * (2.0 * observables / delta).ln() / (epsilon * eta).powi(2)).ceil() as u64)
}

/// Shots for all `C(2n, 2k)` degree-`2k` observables.
pub fn sample_complexity(n_modes: usize, half_degree: usize, epsilon: f64, delta: f64, eta: f64) -> Result<u64> {
    hoeffding_samples(binomial_f64(2 * n_modes, 2 * half_degree), epsilon, delta, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::degree2_ensemble;

    #[test]
    fn substreams_differ() {
        assert_ne!(substream(1, "a"), substream(1, "b"));
        assert_ne!(substream(1, "a"), substream(2, "a"));
        assert_eq!(substream(7, "shots"), substream(7, "shots"));
    }

    #[test]
    fn expectation_of_basis_state() {
        // |0...0> has gamma_{2j-1,2j} = -Z_j expectation -1.
        let mut amps = vec![C64::new(0.0, 0.0); 8];
        amps[0] = C64::new(1.0, 0.0);
        let st = FermionicState::pure(3, amps).unwrap();
        assert!((st.expectation(0b11).unwrap() + 1.0).abs() < 1e-15);
        assert!(st.expectation(0b101).unwrap().abs() < 1e-15);
        let mixed = FermionicState::mixed(3, st.density()).unwrap();
        assert!((mixed.expectation(0b11).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_and_pure_expectations_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let st = FermionicState::random_pure(3, &mut rng).unwrap();
        let mixed = FermionicState::mixed(3, st.density()).unwrap();
        for s in 0..64u64 {
            let a = st.expectation(s).unwrap();
            let b = mixed.expectation(s).unwrap();
            let d = Monomial::hermitian(3, s).unwrap().dense().unwrap();
            let c = (d * st.density()).trace().re;
            assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn state_validation() {
        assert!(FermionicState::pure(1, vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).is_err());
        assert!(FermionicState::pure(1, vec![C64::new(1.0, 0.0)]).is_err());
        let file = StateFile {
            n_modes: 1,
            amplitudes: None,
            density: Some(vec![[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [0.5, 0.0]]),
        };
        let st = FermionicState::from_file(&file).unwrap();
        assert!(st.expectation(0b11).unwrap().abs() < 1e-15);
    }

    #[test]
    fn sampling_is_block_deterministic() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let st = FermionicState::random_pure(2, &mut rng).unwrap();
        let ens = degree2_ensemble(2).unwrap();
        let a = simulate_shots(&st, &ens, 10_000, 42).unwrap();
        let b = simulate_shots(&st, &ens, 10_000, 42).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| simulate_shots(&st, &ens, 10_000, 42).unwrap());
        assert_eq!(a, c);
        assert_ne!(a, simulate_shots(&st, &ens, 10_000, 43).unwrap());
        assert!(a.iter().enumerate().all(|(i, s)| s.shot_id == i as u64));
    }

    #[test]
    fn shot_log_round_trip() {
        let shots = vec![
            ShotRecord { shot_id: 0, matrix: 1, x: 0x3f, q: 0x5 },
            ShotRecord { shot_id: 1, matrix: 0, x: 0, q: 0 },
        ];
        let mut buf = Vec::new();
        write_shot_log(&shots, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("shot_id,r,x_bits,q_bits\n0,2,3f,5\n"));
        assert_eq!(read_shot_log(&buf[..]).unwrap(), shots);
    }

    #[test]
    fn hoeffding_values() {
        let l = hoeffding_samples(1.0, 0.1, 1.0, 0.5).unwrap();
        assert_eq!(l, (2.0 * 2f64.ln() / 0.0025).ceil() as u64);
        assert!(hoeffding_samples(1.0, 0.0, 0.1, 0.5).is_err());
        assert!(hoeffding_samples(1.0, 0.1, 0.1, 1.5).is_err());
        let a = sample_complexity(3, 1, 0.1, 0.05, 0.25).unwrap();
        assert_eq!(a, (2.0 * (600f64).ln() / 0.025f64.powi(2)).ceil() as u64);
    }

    #[test]
    fn uncovered_target_is_reported() {
        let ens = MeasurementEnsemble::from_matrices(3, 1, vec![OrthogonalMatrix::identity(3)]).unwrap();
        let table = SharpnessTable::for_ensemble(&ens);
        let shots = vec![ShotRecord { shot_id: 0, matrix: 0, x: 0, q: 0 }];
        assert!(matches!(
            estimate_expectations(&shots, &table, &[0b101], 0),
            Err(Error::UncoveredTarget(_))
        ));
        assert!(estimate_expectations(&shots, &table, &[0b11], 0).is_ok());
    }
    #[test]
    fn outcome_probabilities_follow_parent_effects() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let st = FermionicState::random_pure(2, &mut rng).unwrap();
        let o = OrthogonalMatrix::random_with_det(2, true, &mut rng);
        let sampler = ShotSampler::new(&st, std::slice::from_ref(&o)).unwrap();
        let rho = st.density();
        let mut total = 0.0;
        for q in 0..4u64 {
            for x in 0..16u64 {
                let g = crate::povm::parent_effect(&o, q, x).unwrap();
                let want = (g * &rho).trace().re;
                let got = sampler.outcome_probability(0, q, x);
                assert!((want - got).abs() < 1e-12, "q={q} x={x}");
                total += got;
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimates_are_unbiased_and_variance_matches() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let st = FermionicState::random_pure(2, &mut rng).unwrap();
        let ens = degree2_ensemble(2).unwrap();
        let table = SharpnessTable::for_ensemble(&ens);
        let shots = simulate_shots(&st, &ens, 200_000, 5).unwrap();
        let targets: Vec<u64> = table.rows.iter().map(|r| r.support).collect();
        for rec in estimate_expectations(&shots, &table, &targets, 6).unwrap() {
            let s = crate::subsets::parse_subset(&rec.target, 4).unwrap();
            let exact = st.expectation(s).unwrap();
            assert!((rec.estimate - exact).abs() < 5.0 * rec.std_error, "{rec:?} vs {exact}");
        }
        let h = Hamiltonian::new(2, vec![(0b0011, 0.7), (0b1100, -0.4), (0b0101, 0.3), (0b1111, 0.5)]).unwrap();
        let table = SharpnessTable::for_supports(&ens, &h.supports()).unwrap();
        let est = estimate_hamiltonian(&shots, &table, &h, 6).unwrap();
        let predicted = predicted_variance(&h, &ens.matrices, &table, &st).unwrap();
        assert!((est.estimate - h.expectation(&st).unwrap()).abs() < 5.0 * est.std_error);
        assert!((est.variance - predicted).abs() < 5.0 * est.variance_std_error, "{est:?} vs {predicted}");
    }

    #[test]
    fn degree1_variance() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let st = FermionicState::random_pure(2, &mut rng).unwrap();
        let alpha = [0.3, -0.8, 0.5, 0.1];
        let es = simulate_degree1(&st, 200_000, 1).unwrap();
        let scale = 4.0f64.sqrt();
        let values: Vec<f64> = es
            .iter()
            .map(|&e| alpha.iter().enumerate().map(|(j, a)| a * scale * sign_product(e, 1 << j)).sum())
            .collect();
        let (mean, se, var, var_se) = sample_summary(&values);
        let exact: f64 = alpha.iter().enumerate().map(|(j, a)| a * st.expectation(1 << j).unwrap()).sum();
        assert!((mean - exact).abs() < 5.0 * se);
        let predicted = degree1_predicted_variance(&alpha, &st).unwrap();
        assert!((var - predicted).abs() < 5.0 * var_se, "{var} vs {predicted}");
    }
}
