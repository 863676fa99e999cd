//! Incompatibility robustness of all degree-`k` observables.
//!
//! The robustness equals the largest value of `lambda_max(sum_S e_S gamma_S)`
//! over sign sections `e`, divided by the number of observables. Sections
//! related by conjugation with a Majorana monomial have the same spectrum,
//! which lets the enumeration fix a set of signs up front.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::shadow_jm_bound;
use crate::error::{Error, Result};
use crate::majorana::{Monomial, PauliString};
use crate::matching::{degree2_ensemble, degree2k_ensemble};
use crate::subsets::{binomial, binomial_f64, k_subsets};
use crate::C64;

/// Default number of sections the brute force may evaluate.
pub const DEFAULT_BUDGET: u64 = 1 << 22;

/// Hilbert-space dimension above which the extreme eigenvalue comes from Lanczos.
pub const DENSE_EIGEN_LIMIT: usize = 256;

/// Relative residual a Lanczos eigenpair must reach.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Largest half-degree for which the binomial upper bound is proven.
pub const PROVEN_HALF_DEGREE: usize = 5;

/// Signs for every degree-`k` support, in lexicographic order of the supports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignSection {
    pub degree: usize,
    pub n_modes: usize,
    pub signs: Vec<i8>,
}

impl SignSection {
    pub fn new(n_modes: usize, degree: usize, signs: Vec<i8>) -> Result<Self> {
        let expected = binomial(2 * n_modes, degree);
        if signs.len() as u128 != expected {
            return Err(Error::InvalidInput(format!(
                "section needs {expected} signs, got {}",
                signs.len()
            )));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidInput("section signs must be +1 or -1".into()));
        }
        Ok(SignSection {
            degree,
            n_modes,
            signs,
        })
    }

    pub fn supports(&self) -> Vec<u64> {
        k_subsets(2 * self.n_modes, self.degree)
    }

    pub fn terms(&self) -> Vec<(u64, f64)> {
        self.supports()
            .into_iter()
            .zip(&self.signs)
            .map(|(s, &e)| (s, e as f64))
            .collect()
    }

    /// `+`/`-` per support.
    pub fn sign_string(&self) -> String {
        self.signs.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect()
    }

    pub fn parse(n_modes: usize, degree: usize, text: &str) -> Result<Self> {
        let signs = text
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Parse(format!("bad sign character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::new(n_modes, degree, signs)
    }

    /// Applies the sign action of conjugating by `gamma_X`: `e_S -> x_S e_S`.
    pub fn gauge(&self, x: u64) -> SignSection {
        let signs = self
            .supports()
            .iter()
            .zip(&self.signs)
            .map(|(s, &e)| if (s & x).count_ones() % 2 == 1 { -e } else { e })
            .collect();
        SignSection {
            signs,
            ..self.clone()
        }
    }

    /// `lambda_max(sum_S e_S gamma_S)`.
    pub fn top_eigenvalue(&self) -> Result<f64> {
        top_eigenvalue(self.n_modes, &self.terms())
    }
}

/// Antisymmetric `±1` matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct TournamentMatrix {
    matrix: DMatrix<f64>,
}

impl TournamentMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let size = matrix.nrows();
        if matrix.ncols() != size {
            return Err(Error::InvalidInput("tournament matrix must be square".into()));
        }
        for i in 0..size {
            if matrix[(i, i)] != 0.0 {
                return Err(Error::InvalidInput("tournament diagonal must be zero".into()));
            }
            for j in i + 1..size {
                let a = matrix[(i, j)];
                if (a != 1.0 && a != -1.0) || matrix[(j, i)] != -a {
                    return Err(Error::InvalidInput(format!(
                        "entries ({i},{j}) must be an antisymmetric ±1 pair"
                    )));
                }
            }
        }
        Ok(TournamentMatrix { matrix })
    }

    /// Builds the matrix from the upper-triangle signs in row-major order.
    pub fn from_upper(size: usize, upper: &[i8]) -> Result<Self> {
        if upper.len() != size * size.saturating_sub(1) / 2 {
            return Err(Error::InvalidInput("wrong number of upper entries".into()));
        }
        let mut m = DMatrix::zeros(size, size);
        let mut it = upper.iter();
        for i in 0..size {
            for j in i + 1..size {
                let v = *it.next().expect("length checked") as f64;
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        Self::new(m)
    }

    /// Player `i` beats every `j > i`.
    pub fn transitive(size: usize) -> Self {
        Self::from_upper(size, &vec![1; size * size.saturating_sub(1) / 2]).expect("valid")
    }

    pub fn random<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Self {
        let upper: Vec<i8> = (0..size * size.saturating_sub(1) / 2)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self::from_upper(size, &upper).expect("valid")
    }

    /// The order-4 matrix for which `E + I` is Hadamard.
    pub fn order4_skew_hadamard() -> Self {
        Self::from_upper(4, &[1, 1, 1, 1, -1, 1]).expect("valid")
    }

    /// Degree-2 section: `E_ij = e_{ij}` for `i < j`.
    pub fn from_section(section: &SignSection) -> Result<Self> {
        if section.degree != 2 {
            return Err(Error::InvalidInput("tournament needs a degree-2 section".into()));
        }
        Self::from_upper(2 * section.n_modes, &section.signs)
    }

    pub fn to_section(&self) -> Result<SignSection> {
        if self.size() % 2 != 0 {
            return Err(Error::InvalidInput("section needs an even number of Majoranas".into()));
        }
        SignSection::new(self.size() / 2, 2, self.upper())
    }

    pub fn upper(&self) -> Vec<i8> {
        let size = self.size();
        let mut out = Vec::with_capacity(size * size.saturating_sub(1) / 2);
        for i in 0..size {
            for j in i + 1..size {
                out.push(self.matrix[(i, j)] as i8);
            }
        }
        out
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `max |E E^T - (size - 1) I|`.
    pub fn skew_hadamard_residual(&self) -> f64 {
        let g = &self.matrix * self.matrix.transpose();
        let target = (self.size() as f64 - 1.0) * DMatrix::identity(self.size(), self.size());
        (g - target).abs().max()
    }

    pub fn is_skew_hadamard(&self) -> bool {
        self.skew_hadamard_residual() < 1e-9
    }

    /// `[[E, E + I], [E - I, -E]]`, which doubles the order of a skew-Hadamard tournament.
    pub fn doubled(&self) -> Self {
        let s = self.size();
        let id = DMatrix::<f64>::identity(s, s);
        let mut m = DMatrix::zeros(2 * s, 2 * s);
        m.view_mut((0, 0), (s, s)).copy_from(&self.matrix);
        m.view_mut((0, s), (s, s)).copy_from(&(&self.matrix + &id));
        m.view_mut((s, 0), (s, s)).copy_from(&(&self.matrix - &id));
        m.view_mut((s, s), (s, s)).copy_from(&(-&self.matrix));
        TournamentMatrix { matrix: m }
    }
}

/// `(sum_j lambda_j, [lambda_j])` where `±i lambda_j` are the eigenvalues of
/// `E`. The sum is the operator norm of the matching degree-2 section.
pub fn degree2_norm(e: &TournamentMatrix) -> (f64, Vec<f64>) {
    antisymmetric_spectrum(e.matrix())
}

fn antisymmetric_spectrum(m: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    // Singular values come in equal pairs; keep one of each.
    let lambdas: Vec<f64> = sv.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let total = sv.iter().sum::<f64>() / 2.0;
    (total, lambdas)
}

/// `n sqrt(2n - 1) - sum_j lambda_j`, never below zero.
pub fn tournament_bound_check(e: &TournamentMatrix) -> f64 {
    let size = e.size() as f64;
    size / 2.0 * (size - 1.0).sqrt() - degree2_norm(e).0
}

/// Largest `sum_j lambda_j` over all tournaments of the given size.
pub fn exhaustive_tournament_max(size: usize) -> Result<(f64, TournamentMatrix)> {
    let entries = size * size.saturating_sub(1) / 2;
    if entries > 24 {
        return Err(Error::InvalidInput(format!(
            "exhaustive search over 2^{entries} tournaments is too large"
        )));
    }
    // Negating row and column 0 preserves the spectrum, so fix E_01 = +1.
    let free = entries.saturating_sub(1);
    let best = (0..1u64 << free)
        .into_par_iter()
        .map(|t| {
            let mut upper = vec![1i8; entries];
            for (i, u) in upper.iter_mut().enumerate().skip(1) {
                if t >> (i - 1) & 1 == 1 {
                    *u = -1;
                }
            }
            let e = TournamentMatrix::from_upper(size, &upper).expect("valid");
            (degree2_norm(&e).0, t)
        })
        .reduce(|| (f64::NEG_INFINITY, u64::MAX), pick_max);
    let t = best.1;
    let upper: Vec<i8> = (0..entries)
        .map(|i| if i > 0 && t >> (i - 1) & 1 == 1 { -1 } else { 1 })
        .collect();
    Ok((best.0, TournamentMatrix::from_upper(size, &upper)?))
}

fn pick_max(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
        a
    } else {
        b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SkewHadamardStatus {
    /// Explicit matrix with `E E^T = (size - 1) I`.
    Constructed(TournamentMatrix),
    /// None exists: the order is odd, or is `≡ 2 (mod 4)` and above 2, or the
    /// exhaustive search came back empty.
    Nonexistent,
    /// Known to exist but not built here.
    Known,
    /// Existence is an open problem.
    Open,
    /// Outside the search range and the table.
    Inconclusive,
}

/// Orders below this multiple of four all admit a skew-Hadamard matrix.
pub const FIRST_OPEN_ORDER: usize = 276;

/// Largest order handled by backtracking.
pub const SEARCH_ORDER_LIMIT: usize = 8;

/// Largest order built from Paley or doubling constructions.
pub const CONSTRUCTION_ORDER_LIMIT: usize = 512;

pub fn skew_hadamard_search(order: usize) -> SkewHadamardStatus {
    if order == 0 {
        return SkewHadamardStatus::Nonexistent;
    }
    if order == 1 {
        return SkewHadamardStatus::Constructed(TournamentMatrix::transitive(1));
    }
    if order == 2 {
        return SkewHadamardStatus::Constructed(TournamentMatrix::transitive(2));
    }
    if order % 4 != 0 {
        return SkewHadamardStatus::Nonexistent;
    }
    if order <= SEARCH_ORDER_LIMIT {
        return match backtrack_skew_hadamard(order) {
            Some(e) => SkewHadamardStatus::Constructed(e),
            None => SkewHadamardStatus::Nonexistent,
        };
    }
    if order <= CONSTRUCTION_ORDER_LIMIT {
        if let Some(e) = construct_skew_hadamard(order) {
            return SkewHadamardStatus::Constructed(e);
        }
    }
    match order.cmp(&FIRST_OPEN_ORDER) {
        std::cmp::Ordering::Less => SkewHadamardStatus::Known,
        std::cmp::Ordering::Equal => SkewHadamardStatus::Open,
        std::cmp::Ordering::Greater => SkewHadamardStatus::Inconclusive,
    }
}

/// Cell-by-cell search over the upper triangle with the first row fixed to
/// `+1`, pruning whenever a finished row is not orthogonal to earlier rows.
fn backtrack_skew_hadamard(order: usize) -> Option<TournamentMatrix> {
    fn extend(m: &mut DMatrix<f64>, cells: &[(usize, usize)], cell: usize) -> bool {
        let order = m.nrows();
        if cell == cells.len() {
            return (0..order).all(|a| (0..a).all(|b| m.row(a).dot(&m.row(b)) == 0.0));
        }
        let (i, j) = cells[cell];
        let choices: &[f64] = if i == 0 { &[1.0] } else { &[1.0, -1.0] };
        for &v in choices {
            m[(i, j)] = v;
            m[(j, i)] = -v;
            let ok = j + 1 < order || (0..i).all(|p| m.row(p).dot(&m.row(i)) == 0.0);
            if ok && extend(m, cells, cell + 1) {
                return true;
            }
        }
        m[(i, j)] = 0.0;
        m[(j, i)] = 0.0;
        false
    }
    let cells: Vec<(usize, usize)> = (0..order)
        .flat_map(|i| (i + 1..order).map(move |j| (i, j)))
        .collect();
    let mut m = DMatrix::zeros(order, order);
    if extend(&mut m, &cells, 0) {
        TournamentMatrix::new(m).ok()
    } else {
        None
    }
}

fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

/// Paley tournament of order `q + 1` for a prime `q ≡ 3 (mod 4)`.
fn paley(q: usize) -> TournamentMatrix {
    let residues: std::collections::HashSet<usize> = (1..q).map(|a| a * a % q).collect();
    let chi = |a: usize| if a == 0 { 0.0 } else if residues.contains(&a) { 1.0 } else { -1.0 };
    let mut m = DMatrix::zeros(q + 1, q + 1);
    for i in 1..=q {
        m[(0, i)] = 1.0;
        m[(i, 0)] = -1.0;
        for j in 1..=q {
            m[(i, j)] = chi((j + q - i) % q);
        }
    }
    TournamentMatrix { matrix: m }
}

fn construct_skew_hadamard(order: usize) -> Option<TournamentMatrix> {
    let q = order - 1;
    if is_prime(q) && q % 4 == 3 {
        let e = paley(q);
        return e.is_skew_hadamard().then_some(e);
    }
    if order % 2 == 0 {
        let half = match skew_hadamard_search(order / 2) {
            SkewHadamardStatus::Constructed(e) => e,
            _ => return None,
        };
        let e = half.doubled();
        return e.is_skew_hadamard().then_some(e);
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HoBound {
    pub value: f64,
    /// True when the half-degree exceeds the proven range.
    pub conjectural: bool,
}

/// `sqrt(C(n, k) / C(2n, 2k))` for half-degree `k`.
pub fn ho_bound(n_modes: usize, half_degree: usize) -> Result<HoBound> {
    if half_degree == 0 || half_degree > n_modes {
        return Err(Error::InvalidInput(format!(
            "half-degree must lie in 1..={n_modes}, got {half_degree}"
        )));
    }
    Ok(HoBound {
        value: (binomial_f64(n_modes, half_degree) / binomial_f64(2 * n_modes, 2 * half_degree)).sqrt(),
        conjectural: half_degree > PROVEN_HALF_DEGREE,
    })
}

/// `1 / sqrt(2n - 1)`, the degree-2 upper bound, attained exactly when a
/// skew-Hadamard matrix of order `2n` exists.
pub fn degree2_upper_bound(n_modes: usize) -> f64 {
    1.0 / ((2 * n_modes) as f64 - 1.0).sqrt()
}

fn pauli_terms(n_modes: usize, terms: &[(u64, f64)]) -> Result<Vec<(PauliString, f64)>> {
    terms
        .iter()
        .map(|&(s, c)| Ok((Monomial::hermitian(n_modes, s)?.to_pauli(), c)))
        .collect()
}

fn apply_terms(terms: &[(PauliString, f64)], input: &[C64], out: &mut [C64]) {
    out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    for (p, c) in terms {
        for (b, amp) in input.iter().enumerate() {
            let (row, coeff) = p.apply_basis(b as u64);
            out[row as usize] += coeff * amp * *c;
        }
    }
}

/// Largest eigenvalue of `sum_S c_S gamma_S` (dense solve up to dimension
/// 256, Lanczos above).
pub fn top_eigenvalue(n_modes: usize, terms: &[(u64, f64)]) -> Result<f64> {
    let paulis = pauli_terms(n_modes, terms)?;
    let dim = 1usize << n_modes;
    if dim <= DENSE_EIGEN_LIMIT {
        let mut h = DMatrix::<C64>::zeros(dim, dim);
        for (p, c) in &paulis {
            for col in 0..dim {
                let (row, coeff) = p.apply_basis(col as u64);
                h[(row as usize, col)] += coeff * *c;
            }
        }
        Ok(h.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max))
    } else {
        largest_eigenvalue(dim, |v, out| apply_terms(&paulis, v, out))
    }
}

/// Lanczos with full reorthogonalization and restarts from the Ritz vector.
pub fn largest_eigenvalue<F>(dim: usize, matvec: F) -> Result<f64>
where
    F: Fn(&[C64], &mut [C64]),
{
    let steps = dim.min(150);
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let mut start: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mut residual = f64::INFINITY;
    let mut scratch = vec![C64::new(0.0, 0.0); dim];
    for _ in 0..30 {
        normalize(&mut start);
        let mut basis: Vec<Vec<C64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for step in 0..steps {
            matvec(&basis[step], &mut scratch);
            let a = dot(&basis[step], &scratch).re;
            alpha.push(a);
            let mut w = scratch.clone();
            for _ in 0..2 {
                for b in &basis {
                    let proj = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-12 || step + 1 == steps {
                break;
            }
            beta.push(norm);
            w.iter_mut().for_each(|x| *x /= norm);
            basis.push(w);
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let (best, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let mut ritz = vec![C64::new(0.0, 0.0); dim];
        for (i, b) in basis.iter().take(m).enumerate() {
            let y = eig.eigenvectors[(i, best)];
            ritz.iter_mut().zip(b).for_each(|(r, v)| *r += v * y);
        }
        normalize(&mut ritz);
        matvec(&ritz, &mut scratch);
        residual = scratch
            .iter()
            .zip(&ritz)
            .map(|(h, r)| (h - r * theta).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual <= EIGEN_RESIDUAL_TOL * theta.abs().max(1.0) {
            return Ok(theta);
        }
        start = ritz;
    }
    Err(Error::EigenResidual(residual))
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(v: &mut [C64]) {
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Positions (in lexicographic order of the supports) whose signs can all be
/// set to `+1` by some `gamma_X` conjugation: a greedy basis of the rows of the
/// support-incidence matrix over GF(2).
pub fn gauge_pivots(n_modes: usize, degree: usize) -> Vec<usize> {
    let mut basis: Vec<(u64, u32)> = Vec::new();
    let mut pivots = Vec::new();
    for (pos, s) in k_subsets(2 * n_modes, degree).into_iter().enumerate() {
        let mut v = s;
        for &(b, lead) in &basis {
            if v >> lead & 1 == 1 {
                v ^= b;
            }
        }
        if v != 0 {
            let lead = 63 - v.leading_zeros();
            basis.push((v, lead));
            pivots.push(pos);
        }
    }
    pivots
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BruteForceResult {
    pub value: f64,
    pub section: String,
    pub sections_evaluated: u64,
}

/// Number of sections the enumeration visits.
pub fn section_count(n_modes: usize, degree: usize, reduce: bool) -> Option<u64> {
    let total = binomial(2 * n_modes, degree);
    let fixed = if reduce { gauge_pivots(n_modes, degree).len() as u128 } else { 0 };
    let free = total - fixed;
    (free < 64).then(|| 1u64 << free)
}

/// Exact `max_e lambda_max(H_e) / C(2n, degree)`. Errors when the number of
/// sections exceeds `budget`.
pub fn brute_force(n_modes: usize, degree: usize, reduce: bool, budget: u64) -> Result<BruteForceResult> {
    if degree == 0 || degree > 2 * n_modes {
        return Err(Error::InvalidInput(format!(
            "degree must lie in 1..={}, got {degree}",
            2 * n_modes
        )));
    }
    let count = section_count(n_modes, degree, reduce)
        .filter(|&c| c <= budget)
        .ok_or_else(|| Error::InvalidInput(format!("section count exceeds budget {budget}")))?;
    let supports = k_subsets(2 * n_modes, degree);
    let pivots = if reduce { gauge_pivots(n_modes, degree) } else { Vec::new() };
    let free: Vec<usize> = (0..supports.len()).filter(|p| !pivots.contains(p)).collect();
    let section_of = |t: u64| -> Vec<i8> {
        let mut signs = vec![1i8; supports.len()];
        for (bit, &pos) in free.iter().enumerate() {
            if t >> bit & 1 == 1 {
                signs[pos] = -1;
            }
        }
        signs
    };
    let evaluate = |t: u64| -> Result<f64> {
        let signs = section_of(t);
        if degree == 2 {
            let e = TournamentMatrix::from_upper(2 * n_modes, &signs)?;
            Ok(degree2_norm(&e).0)
        } else {
            let terms: Vec<(u64, f64)> = supports.iter().zip(&signs).map(|(&s, &e)| (s, e as f64)).collect();
            top_eigenvalue(n_modes, &terms)
        }
    };
    let best = (0..count)
        .into_par_iter()
        .map(|t| evaluate(t).map(|v| (v, t)))
        .try_reduce(|| (f64::NEG_INFINITY, u64::MAX), |a, b| Ok(pick_max(a, b)))?;
    let section = SignSection::new(n_modes, degree, section_of(best.1))?;
    Ok(BruteForceResult {
        value: best.0 / supports.len() as f64,
        section: section.sign_string(),
        sections_evaluated: count,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BruteForce,
    Degree2Spectral,
    BoundOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobustnessBounds {
    pub thm2_upper: Option<f64>,
    pub construction_lower: Option<f64>,
    pub shadow_lower: Option<f64>,
    pub ho_conjectured: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub n: usize,
    /// Degree of the observables.
    pub k: usize,
    pub method: Method,
    /// `exact` after a full enumeration, `budget-exceeded` otherwise.
    pub status: String,
    pub value: Option<f64>,
    pub section: Option<String>,
    pub bounds: RobustnessBounds,
}

impl RobustnessReport {
    /// Whether every available lower bound sits below the value and the value
    /// below the upper bound.
    pub fn is_ordered(&self, tol: f64) -> bool {
        let Some(v) = self.value else { return true };
        let lower_ok = [self.bounds.construction_lower, self.bounds.shadow_lower]
            .iter()
            .flatten()
            .all(|&l| l <= v + tol);
        let upper_ok = self.bounds.thm2_upper.is_none_or(|u| v <= u + tol);
        lower_ok && upper_ok
    }
}

/// Smallest effective sharpness of the constructed joint measurement.
pub fn construction_sharpness(n_modes: usize, degree: usize, seed: u64) -> Option<f64> {
    if degree % 2 != 0 || degree == 0 {
        return None;
    }
    let ens = if degree == 2 {
        degree2_ensemble(n_modes).ok()?
    } else {
        degree2k_ensemble(n_modes, degree / 2, None, seed).ok()?
    };
    Some(ens.coverage.min_eta() / ens.len() as f64)
}

/// Bounds plus the exact value when the enumeration fits in `budget`.
pub fn robustness_report(n_modes: usize, degree: usize, budget: u64, seed: u64) -> Result<RobustnessReport> {
    if n_modes == 0 || degree == 0 || degree > 2 * n_modes {
        return Err(Error::InvalidInput(format!(
            "need 1 <= degree <= 2n, got n={n_modes}, degree={degree}"
        )));
    }
    let even = degree % 2 == 0;
    let half = degree / 2;
    let (thm2_upper, ho_conjectured) = if degree == 2 {
        (Some(degree2_upper_bound(n_modes)), false)
    } else if even {
        let ho = ho_bound(n_modes, half)?;
        (Some(ho.value), ho.conjectural)
    } else {
        (None, false)
    };
    let bounds = RobustnessBounds {
        thm2_upper,
        construction_lower: construction_sharpness(n_modes, degree, seed),
        shadow_lower: if even { Some(shadow_jm_bound(n_modes, half)?) } else { None },
        ho_conjectured,
    };
    let within = section_count(n_modes, degree, true).is_some_and(|c| c <= budget);
    let (method, value, section) = if within {
        let res = brute_force(n_modes, degree, true, budget)?;
        let method = if degree == 2 { Method::Degree2Spectral } else { Method::BruteForce };
        (method, Some(res.value), Some(res.section))
    } else {
        (Method::BoundOnly, None, None)
    };
    Ok(RobustnessReport {
        n: n_modes,
        k: degree,
        method,
        status: if within { "exact" } else { "budget-exceeded" }.into(),
        value,
        section,
        bounds,
    })
}
