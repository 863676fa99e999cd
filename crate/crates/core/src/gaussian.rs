//! Orthogonal matrices, lower-flat blocks and Gaussian unitaries.
//!
//! A unitary `U` realises `O` when `U^† gamma_j U = sum_k O[j][k] gamma_k`.
//! [`GaussianUnitary::compile`] factors `O` into Givens rotations, each of
//! which is `exp(theta/2 gamma_a gamma_b)`. Reflections (`det O = -1`) pick up a
//! trailing `gamma_{2n}`, whose action is `diag(-1, ..., -1, +1)`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::majorana::{Monomial, PauliString, DEFAULT_DENSE_LIMIT};
use crate::subsets::{indices, k_subsets};
use crate::C64;

pub const ORTHOGONALITY_TOL: f64 = 1e-12;

pub fn orthogonality_residual(m: &DMatrix<f64>) -> f64 {
    let prod = m * m.transpose();
    let mut worst = 0.0f64;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - target).abs());
        }
    }
    worst
}

/// A `2n x 2n` real orthogonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalMatrix {
    matrix: DMatrix<f64>,
}

impl OrthogonalMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 || matrix.nrows() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "expected an even square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let residual = orthogonality_residual(&matrix);
        if residual > ORTHOGONALITY_TOL {
            return Err(Error::NotOrthogonal { residual });
        }
        Ok(OrthogonalMatrix { matrix })
    }

    pub fn identity(n_modes: usize) -> Self {
        OrthogonalMatrix {
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    /// Haar-random element of `O(2n)` (QR of a Gaussian matrix with the sign fix).
    pub fn random<R: Rng + ?Sized>(n_modes: usize, rng: &mut R) -> Self {
        let size = 2 * n_modes;
        let g = DMatrix::<f64>::from_fn(size, size, |_, _| rng.sample(StandardNormal));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for c in 0..size {
            if r[(c, c)] < 0.0 {
                for row in 0..size {
                    q[(row, c)] = -q[(row, c)];
                }
            }
        }
        OrthogonalMatrix { matrix: q }
    }

    /// Haar-random element with the requested determinant.
    pub fn random_with_det<R: Rng + ?Sized>(n_modes: usize, negative: bool, rng: &mut R) -> Self {
        let mut o = Self::random(n_modes, rng);
        if (o.determinant() < 0.0) != negative {
            for c in 0..2 * n_modes {
                o.matrix[(0, c)] = -o.matrix[(0, c)];
            }
        }
        o
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.clone().determinant()
    }

    pub fn minor(&self, rows: u64, cols: u64) -> f64 {
        minor(&self.matrix, rows, cols)
    }

    pub fn compose(&self, other: &OrthogonalMatrix) -> OrthogonalMatrix {
        OrthogonalMatrix {
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// Columns permuted: result column `c` is column `perm[c]` (0-based images).
    pub fn permute_columns(&self, perm: &[usize]) -> OrthogonalMatrix {
        let size = self.size();
        OrthogonalMatrix {
            matrix: DMatrix::from_fn(size, size, |r, c| self.matrix[(r, perm[c])]),
        }
    }

    /// Rows permuted: result row `r` is row `perm[r]` (0-based images).
    pub fn permute_rows(&self, perm: &[usize]) -> OrthogonalMatrix {
        let size = self.size();
        OrthogonalMatrix {
            matrix: DMatrix::from_fn(size, size, |r, c| self.matrix[(perm[r], c)]),
        }
    }

    /// Text form: the size on the first line, then one row per line with 17
    /// significant digits, which round-trips every `f64`.
    pub fn to_text(&self) -> String {
        let size = self.size();
        let mut out = format!("{size}\n");
        for r in 0..size {
            let row: Vec<String> = (0..size)
                .map(|c| format!("{:.16e}", self.matrix[(r, c)]))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let size: usize = tokens
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?
            .parse()
            .map_err(|_| Error::Parse("matrix size is not an integer".into()))?;
        let mut entries = Vec::with_capacity(size * size);
        for tok in tokens {
            entries.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad matrix entry {tok:?}")))?,
            );
        }
        if entries.len() != size * size {
            return Err(Error::Parse(format!(
                "expected {} entries, found {}",
                size * size,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(size, size, &entries))
    }
}

/// Determinant of the submatrix on the given row and column masks (bit `i` is
/// index `i + 1`). An empty minor is 1; mismatched sizes give 0.
pub fn minor(m: &DMatrix<f64>, rows: u64, cols: u64) -> f64 {
    let k = rows.count_ones() as usize;
    if k != cols.count_ones() as usize {
        return 0.0;
    }
    if k == 0 {
        return 1.0;
    }
    let ri = indices(rows);
    let ci = indices(cols);
    let mut a = [0.0f64; 64];
    if k <= 8 {
        for (x, &r) in ri.iter().enumerate() {
            for (y, &c) in ci.iter().enumerate() {
                a[x * k + y] = m[(r - 1, c - 1)];
            }
        }
        det_in_place(&mut a[..k * k], k)
    } else {
        let mut big = vec![0.0f64; k * k];
        for (x, &r) in ri.iter().enumerate() {
            for (y, &c) in ci.iter().enumerate() {
                big[x * k + y] = m[(r - 1, c - 1)];
            }
        }
        det_in_place(&mut big, k)
    }
}

/// Row-major LU with partial pivoting.
fn det_in_place(a: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..k {
        let mut pivot = col;
        let mut best = a[col * k + col].abs();
        for r in col + 1..k {
            let v = a[r * k + col].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for c in 0..k {
                a.swap(col * k + c, pivot * k + c);
            }
            det = -det;
        }
        let p = a[col * k + col];
        det *= p;
        for r in col + 1..k {
            let f = a[r * k + col] / p;
            if f != 0.0 {
                for c in col + 1..k {
                    a[r * k + c] -= f * a[col * k + c];
                }
            }
        }
    }
    det
}

/// `U^† gamma_S U = sum_{S'} det(O_{S,S'}) gamma_{S'}`; returns the nonzero terms.
pub fn rotated_monomial(o: &DMatrix<f64>, support: u64) -> Vec<(u64, f64)> {
    let size = o.nrows();
    let degree = support.count_ones() as usize;
    k_subsets(size, degree)
        .into_iter()
        .filter_map(|s| {
            let d = minor(o, support, s);
            (d != 0.0).then_some((s, d))
        })
        .collect()
}

/// Sylvester Hadamard matrix of order `2^m` with `±1` entries.
pub fn sylvester_hadamard(m: u32) -> DMatrix<f64> {
    let mut h = DMatrix::from_element(1, 1, 1.0);
    for _ in 0..m {
        let n = h.nrows();
        let mut next = DMatrix::zeros(2 * n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                let v = h[(r, c)];
                next[(r, c)] = v;
                next[(r, c + n)] = v;
                next[(r + n, c)] = v;
                next[(r + n, c + n)] = -v;
            }
        }
        h = next;
    }
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatConstruction {
    /// The `1 x 1` matrix `[1]`.
    Trivial,
    /// Normalised Sylvester Hadamard, size `2^m`.
    Hadamard,
    /// Core of a normalised Hadamard of order `size + 1`, shifted to be orthogonal.
    Bordered,
    /// `2^m + q` split: Hadamard on the first `2^m` coordinates, the last `q`
    /// mixed with a second copy by a `45°` rotation.
    Split { m: u32, q: usize },
}

/// Orthogonal matrix whose entries are all bounded away from zero.
#[derive(Clone, Debug)]
pub struct LowerFlat {
    pub matrix: DMatrix<f64>,
    pub min_abs_entry: f64,
    pub construction: FlatConstruction,
}

impl LowerFlat {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    fn from_matrix(matrix: DMatrix<f64>, construction: FlatConstruction) -> Self {
        let min_abs_entry = matrix.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        LowerFlat {
            matrix,
            min_abs_entry,
            construction,
        }
    }
}

/// Largest `2^m` the flat builder will expand.
pub const HADAMARD_ORDER_LIMIT: u32 = 12;

fn split_flat(m: u32, q: usize) -> DMatrix<f64> {
    let order = 1usize << m;
    let s = order - q;
    let size = order + q;
    let h = sylvester_hadamard(m) / (order as f64).sqrt();
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut f = DMatrix::zeros(size, size);
    for i in 0..s {
        for j in 0..s {
            f[(i, j)] = h[(i, j)];
        }
        for j in 0..q {
            f[(i, s + j)] = h[(i, s + j)] * r2;
            f[(i, s + q + j)] = -h[(i, s + j)] * r2;
        }
    }
    for i in 0..q {
        for j in 0..s {
            f[(s + i, j)] = h[(s + i, j)] * r2;
            f[(s + q + i, j)] = -h[(s + i, j)] * r2;
        }
        for j in 0..q {
            let hq = h[(s + i, s + j)];
            let id = if i == j { 1.0 } else { 0.0 };
            f[(s + i, s + j)] = (hq + id) / 2.0;
            f[(s + i, s + q + j)] = (-hq + id) / 2.0;
            f[(s + q + i, s + j)] = (-hq + id) / 2.0;
            f[(s + q + i, s + q + j)] = (hq + id) / 2.0;
        }
    }
    f
}

fn bordered_flat(size: usize) -> DMatrix<f64> {
    let order = size + 1;
    let m = order.trailing_zeros();
    let h = sylvester_hadamard(m);
    let alpha = 1.0 / (order as f64).sqrt();
    let beta = alpha * (1.0 - (order as f64).sqrt()) / size as f64;
    DMatrix::from_fn(size, size, |r, c| alpha * h[(r + 1, c + 1)] + beta)
}

/// Builds the flattest available orthogonal matrix of the given size.
pub fn lower_flat(size: usize) -> Result<LowerFlat> {
    if size == 0 {
        return Err(Error::InvalidInput("lower-flat size must be positive".into()));
    }
    if size == 1 {
        return Ok(LowerFlat::from_matrix(
            DMatrix::from_element(1, 1, 1.0),
            FlatConstruction::Trivial,
        ));
    }
    let m = usize::BITS - 1 - size.leading_zeros();
    if m >= HADAMARD_ORDER_LIMIT {
        return Err(Error::InvalidInput(format!(
            "lower-flat size {size} above the Hadamard limit 2^{HADAMARD_ORDER_LIMIT}"
        )));
    }
    let q = size - (1usize << m);
    let mut candidates = Vec::new();
    if q == 0 {
        let h = sylvester_hadamard(m) / (size as f64).sqrt();
        candidates.push(LowerFlat::from_matrix(h, FlatConstruction::Hadamard));
    } else {
        candidates.push(LowerFlat::from_matrix(
            split_flat(m, q),
            FlatConstruction::Split { m, q },
        ));
    }
    if (size + 1).is_power_of_two() && size >= 3 {
        candidates.push(LowerFlat::from_matrix(
            bordered_flat(size),
            FlatConstruction::Bordered,
        ));
    }
    let best = candidates
        .into_iter()
        .max_by(|a, b| a.min_abs_entry.total_cmp(&b.min_abs_entry))
        .expect("at least one candidate");
    debug_assert!(orthogonality_residual(&best.matrix) < ORTHOGONALITY_TOL);
    Ok(best)
}

/// One factor `exp(angle/2 gamma_a gamma_b)`, indices 1-based.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Rotation {
    pub first: usize,
    pub second: usize,
    pub angle: f64,
}

/// Product of rotations (left to right), optionally followed by `gamma_{2n}`.
#[derive(Clone, Debug)]
pub struct GaussianUnitary {
    n_modes: usize,
    rotations: Vec<Rotation>,
    reflection: bool,
    generators: Vec<PauliString>,
}

impl GaussianUnitary {
    /// Givens factorisation of `O`. Column by column, entries below the
    /// diagonal are rotated into the pivot so the pivot stays nonnegative.
    pub fn compile(o: &OrthogonalMatrix) -> Self {
        let size = o.size();
        let n_modes = size / 2;
        let reflection = o.determinant() < 0.0;
        let mut a = o.matrix().clone();
        if reflection {
            // O = O' diag(-1, .., -1, 1)
            for r in 0..size {
                for c in 0..size - 1 {
                    a[(r, c)] = -a[(r, c)];
                }
            }
        }
        let mut left = Vec::new();
        for c in 0..size - 1 {
            for r in c + 1..size {
                let below = a[(r, c)];
                if below == 0.0 {
                    continue;
                }
                let theta = below.atan2(a[(c, c)]);
                let (s, co) = theta.sin_cos();
                for k in 0..size {
                    let top = a[(c, k)];
                    let bot = a[(r, k)];
                    a[(c, k)] = co * top + s * bot;
                    a[(r, k)] = -s * top + co * bot;
                }
                left.push(Rotation {
                    first: c + 1,
                    second: r + 1,
                    angle: theta,
                });
            }
        }
        // G_m ... G_1 O' = 1, so O' = G_1^T ... G_m^T.
        let rotations: Vec<Rotation> = left
            .into_iter()
            .map(|g| Rotation {
                angle: -g.angle,
                ..g
            })
            .collect();
        let generators = rotations
            .iter()
            .map(|r| {
                let pa = PauliString::majorana(n_modes, r.first);
                let pb = PauliString::majorana(n_modes, r.second);
                &pa * &pb
            })
            .collect();
        GaussianUnitary {
            n_modes,
            rotations,
            reflection,
            generators,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn rotations(&self) -> &[Rotation] {
        &self.rotations
    }

    pub fn has_reflection(&self) -> bool {
        self.reflection
    }

    /// `U psi` for a state vector of length `2^n`.
    pub fn apply(&self, state: &mut [C64]) {
        if self.reflection {
            let g = PauliString::majorana(self.n_modes, 2 * self.n_modes);
            let out = g.apply_vector(state);
            state.copy_from_slice(&out);
        }
        let mut scratch = vec![C64::new(0.0, 0.0); state.len()];
        for (rot, gen) in self.rotations.iter().zip(&self.generators).rev() {
            let (s, c) = (rot.angle / 2.0).sin_cos();
            for (b, amp) in state.iter().enumerate() {
                let (row, coeff) = gen.apply_basis(b as u64);
                scratch[row as usize] = coeff * amp;
            }
            for (x, y) in state.iter_mut().zip(&scratch) {
                *x = *x * c + *y * s;
            }
        }
    }

    pub fn dense(&self) -> Result<DMatrix<C64>> {
        if self.n_modes > DEFAULT_DENSE_LIMIT {
            return Err(Error::DenseLimit {
                n_modes: self.n_modes,
                limit: DEFAULT_DENSE_LIMIT,
            });
        }
        let dim = 1usize << self.n_modes;
        let mut out = DMatrix::zeros(dim, dim);
        let mut col = vec![C64::new(0.0, 0.0); dim];
        for c in 0..dim {
            col.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            col[c] = C64::new(1.0, 0.0);
            self.apply(&mut col);
            for r in 0..dim {
                out[(r, c)] = col[r];
            }
        }
        Ok(out)
    }
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, c| acc.max(c.norm()))
}

/// `max_j || U^† gamma_j U - sum_k O[j][k] gamma_k ||_max`.
pub fn rotation_law_residual(o: &OrthogonalMatrix, u: &DMatrix<C64>) -> Result<f64> {
    let n = o.n_modes();
    let gammas: Vec<DMatrix<C64>> = (1..=2 * n)
        .map(|j| Monomial::generator(n, j)?.dense())
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for j in 0..2 * n {
        let lhs = u.adjoint() * &gammas[j] * u;
        let mut rhs = DMatrix::zeros(lhs.nrows(), lhs.ncols());
        for k in 0..2 * n {
            rhs += &gammas[k] * C64::new(o.matrix()[(j, k)], 0.0);
        }
        worst = worst.max(max_abs(&(lhs - rhs)));
    }
    Ok(worst)
}

/// Residual of the minor expansion for one support.
pub fn minor_expansion_residual(o: &OrthogonalMatrix, u: &DMatrix<C64>, support: u64) -> Result<f64> {
    let n = o.n_modes();
    let g = Monomial::hermitian(n, support)?.dense()?;
    let lhs = u.adjoint() * g * u;
    let mut rhs = DMatrix::zeros(lhs.nrows(), lhs.ncols());
    for (s, d) in rotated_monomial(o.matrix(), support) {
        rhs += Monomial::hermitian(n, s)?.dense()? * C64::new(d, 0.0);
    }
    Ok(max_abs(&(lhs - rhs)))
}
