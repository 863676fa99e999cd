//! Majorana monomials, their Jordan-Wigner images and dense matrices.
//!
//! A [`Monomial`] is `i^phase` times the ascending product of the Majoranas in
//! its support. The Hermitian representative of a support `S` carries the extra
//! phase `i^{C(|S|,2)}`; [`Monomial::hermitian`] builds it. Odd supports get the
//! same phase rule.
//!
//! Qubit `j` of the Jordan-Wigner image is bit `j - 1` of a basis index.

use std::fmt;
use std::ops::Mul;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::subsets::{format_subset, indices, mask_from_indices};
use crate::C64;

pub const DEFAULT_DENSE_LIMIT: usize = 12;

pub fn phase_value(phase: u8) -> C64 {
    match phase & 3 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

fn phase_label(phase: u8) -> &'static str {
    match phase & 3 {
        0 => "+1",
        1 => "+i",
        2 => "-1",
        _ => "-i",
    }
}

fn parse_phase(text: &str) -> Result<u8> {
    match text {
        "+1" | "1" | "+" => Ok(0),
        "+i" | "i" => Ok(1),
        "-1" | "-" => Ok(2),
        "-i" => Ok(3),
        other => Err(Error::Parse(format!("unknown phase {other:?}"))),
    }
}

/// `C(m, 2) mod 4`, the phase that makes the ordered product Hermitian.
pub fn hermitian_phase(degree: usize) -> u8 {
    ((degree * degree.saturating_sub(1) / 2) % 4) as u8
}

/// Sign (as a power of -1) from reordering `raw(a) * raw(b)` into ascending order.
fn reorder_parity(a: u64, b: u64) -> u32 {
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let bit = rest.trailing_zeros();
        rest &= rest - 1;
        let above = if bit >= 63 { 0 } else { a >> (bit + 1) };
        swaps += above.count_ones();
    }
    swaps & 1
}

/// `(-1)^{|a||b| - |a ∩ b|}`: +1 when the monomials commute.
pub fn commutation_sign(a: u64, b: u64) -> i32 {
    let exp = a.count_ones() * b.count_ones() - (a & b).count_ones();
    if exp % 2 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    n_modes: usize,
    support: u64,
    phase: u8,
}

impl Monomial {
    fn check_support(n_modes: usize, support: u64) -> Result<()> {
        if n_modes == 0 || 2 * n_modes > 64 {
            return Err(Error::InvalidInput(format!(
                "mode count {n_modes} outside 1..=32"
            )));
        }
        if 2 * n_modes < 64 && support >> (2 * n_modes) != 0 {
            return Err(Error::InvalidInput(format!(
                "support {} exceeds 2n = {}",
                format_subset(support),
                2 * n_modes
            )));
        }
        Ok(())
    }

    /// Ordered product of the given Majoranas with phase `i^phase`.
    pub fn ordered(n_modes: usize, support: u64, phase: u8) -> Result<Self> {
        Self::check_support(n_modes, support)?;
        Ok(Monomial {
            n_modes,
            support,
            phase: phase & 3,
        })
    }

    /// The Hermitian monomial `gamma_S` for a support mask.
    pub fn hermitian(n_modes: usize, support: u64) -> Result<Self> {
        let phase = hermitian_phase(support.count_ones() as usize);
        Self::ordered(n_modes, support, phase)
    }

    /// Hermitian monomial from 1-based indices.
    pub fn from_indices(n_modes: usize, list: &[usize]) -> Result<Self> {
        let mask = mask_from_indices(list, 2 * n_modes)?;
        Self::hermitian(n_modes, mask)
    }

    pub fn identity(n_modes: usize) -> Result<Self> {
        Self::ordered(n_modes, 0, 0)
    }

    /// The single Majorana `gamma_j`, 1-based.
    pub fn generator(n_modes: usize, j: usize) -> Result<Self> {
        Self::from_indices(n_modes, &[j])
    }

    /// `gamma_{[2n]}`, the fermionic parity.
    pub fn parity(n_modes: usize) -> Result<Self> {
        let full = if 2 * n_modes == 64 {
            u64::MAX
        } else {
            (1u64 << (2 * n_modes)) - 1
        };
        Self::hermitian(n_modes, full)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn support(&self) -> u64 {
        self.support
    }

    pub fn indices(&self) -> Vec<usize> {
        indices(self.support)
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn degree(&self) -> usize {
        self.support.count_ones() as usize
    }

    pub fn is_even(&self) -> bool {
        self.degree() % 2 == 0
    }

    /// Phase relative to the Hermitian representative of the same support.
    pub fn relative_phase(&self) -> u8 {
        (self.phase + 4 - hermitian_phase(self.degree())) & 3
    }

    pub fn with_extra_phase(&self, extra: u8) -> Self {
        Monomial {
            phase: (self.phase + extra) & 3,
            ..*self
        }
    }

    pub fn negate(&self) -> Self {
        self.with_extra_phase(2)
    }

    pub fn adjoint(&self) -> Self {
        let reversal = 2 * hermitian_phase(self.degree());
        Monomial {
            phase: (4 - self.phase + reversal) & 3,
            ..*self
        }
    }

    pub fn commutation_sign(&self, other: &Monomial) -> i32 {
        commutation_sign(self.support, other.support)
    }

    pub fn commutes_with(&self, other: &Monomial) -> bool {
        self.commutation_sign(other) == 1
    }

    pub fn product(&self, other: &Monomial) -> Result<Monomial> {
        if self.n_modes != other.n_modes {
            return Err(Error::ModeMismatch {
                expected: self.n_modes,
                got: other.n_modes,
            });
        }
        Ok(*self * *other)
    }

    /// Jordan-Wigner image as a Pauli string.
    pub fn to_pauli(&self) -> PauliString {
        let mut acc = PauliString::identity(self.n_modes).with_phase(self.phase);
        for j in self.indices() {
            acc = &acc * &PauliString::majorana(self.n_modes, j);
        }
        acc
    }

    pub fn dense(&self) -> Result<DMatrix<C64>> {
        self.dense_with_limit(DEFAULT_DENSE_LIMIT)
    }

    pub fn dense_with_limit(&self, limit: usize) -> Result<DMatrix<C64>> {
        self.to_pauli().dense_with_limit(limit)
    }

    /// Parses `<phase> gamma[j1,j2,...]`, the `Display` format.
    pub fn parse(n_modes: usize, text: &str) -> Result<Self> {
        let text = text.trim();
        let (phase_txt, rest) = match text.find("gamma") {
            Some(pos) => (text[..pos].trim(), &text[pos + 5..]),
            None => return Err(Error::Parse(format!("missing gamma in {text:?}"))),
        };
        let phase = if phase_txt.is_empty() {
            0
        } else {
            parse_phase(phase_txt)?
        };
        let inner = rest.trim();
        if !inner.starts_with('[') || !inner.ends_with(']') {
            return Err(Error::Parse(format!("expected bracketed indices in {text:?}")));
        }
        let mut list = Vec::new();
        for tok in inner[1..inner.len() - 1].split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            list.push(
                tok.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad index {tok:?}")))?,
            );
        }
        let mask = mask_from_indices(&list, 2 * n_modes)?;
        // An unsorted list is an ordered product; fold the reordering sign in.
        let mut m = Monomial::ordered(n_modes, 0, phase)?;
        for j in list {
            m = m * Monomial::ordered(n_modes, 1u64 << (j - 1), 0)?;
        }
        debug_assert_eq!(m.support, mask);
        Ok(m)
    }
}

impl Mul for Monomial {
    type Output = Monomial;

    fn mul(self, rhs: Monomial) -> Monomial {
        debug_assert_eq!(self.n_modes, rhs.n_modes);
        let sign = reorder_parity(self.support, rhs.support) as u8;
        Monomial {
            n_modes: self.n_modes,
            support: self.support ^ rhs.support,
            phase: (self.phase + rhs.phase + 2 * sign) & 3,
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} gamma{}", phase_label(self.phase), format_subset(self.support))
    }
}

/// `i^phase * prod_q X_q^{x_q} Z_q^{z_q}`, with X written left of Z on each qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
    phase: u8,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        PauliString {
            n_qubits,
            x: 0,
            z: 0,
            phase: 0,
        }
    }

    pub fn from_xz(n_qubits: usize, x: u64, z: u64, phase: u8) -> Self {
        PauliString {
            n_qubits,
            x,
            z,
            phase: phase & 3,
        }
    }

    /// Image of `gamma_j` (1-based): Z on lower qubits, then X or Y.
    pub fn majorana(n_qubits: usize, j: usize) -> Self {
        let qubit = (j - 1) / 2;
        let lower = (1u64 << qubit) - 1;
        let bit = 1u64 << qubit;
        if j % 2 == 1 {
            PauliString::from_xz(n_qubits, bit, lower, 0)
        } else {
            // Y = i X Z
            PauliString::from_xz(n_qubits, bit, lower | bit, 1)
        }
    }

    fn with_phase(mut self, extra: u8) -> Self {
        self.phase = (self.phase + extra) & 3;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Phase in the xz form.
    pub fn xz_phase(&self) -> u8 {
        self.phase
    }

    /// Letters for qubits 1..=n, using Y for X Z pairs.
    pub fn letters(&self) -> String {
        (0..self.n_qubits)
            .map(|q| match ((self.x >> q) & 1, (self.z >> q) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, 1) => 'Z',
                _ => 'Y',
            })
            .collect()
    }

    /// Phase in front of the letter string (each Y absorbs a factor of i).
    pub fn letter_phase(&self) -> u8 {
        let ys = (self.x & self.z).count_ones() as u8;
        (self.phase + 4 - ys % 4) & 3
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    /// `P |b> = amplitude |row>`.
    #[inline]
    pub fn apply_basis(&self, b: u64) -> (u64, C64) {
        let sign = if (self.z & b).count_ones() % 2 == 0 { 0 } else { 2 };
        (b ^ self.x, phase_value(self.phase + sign))
    }

    pub fn apply_vector(&self, state: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); state.len()];
        for (b, amp) in state.iter().enumerate() {
            let (row, coeff) = self.apply_basis(b as u64);
            out[row as usize] = coeff * amp;
        }
        out
    }

    pub fn dense(&self) -> Result<DMatrix<C64>> {
        self.dense_with_limit(DEFAULT_DENSE_LIMIT)
    }

    pub fn dense_with_limit(&self, limit: usize) -> Result<DMatrix<C64>> {
        if self.n_qubits > limit {
            return Err(Error::DenseLimit {
                n_modes: self.n_qubits,
                limit,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let (row, amp) = self.apply_basis(col as u64);
            m[(row as usize, col)] = amp;
        }
        Ok(m)
    }
}

impl<'a> Mul<&'a PauliString> for &'a PauliString {
    type Output = PauliString;

    fn mul(self, rhs: &PauliString) -> PauliString {
        // Z^z1 X^x2 = (-1)^{z1.x2} X^x2 Z^z1
        let swap = ((self.z & rhs.x).count_ones() % 2) as u8;
        PauliString {
            n_qubits: self.n_qubits,
            x: self.x ^ rhs.x,
            z: self.z ^ rhs.z,
            phase: (self.phase + rhs.phase + 2 * swap) & 3,
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", phase_label(self.letter_phase()), self.letters())
    }
}

/// `B = exp(-pi/4 gamma_from gamma_to)`; conjugation sends `gamma_from -> gamma_to`
/// and `gamma_to -> -gamma_from`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Braid {
    pub from: usize,
    pub to: usize,
    pub inverse: bool,
}

impl Braid {
    pub fn new(from: usize, to: usize) -> Result<Self> {
        if from == to || from == 0 || to == 0 {
            return Err(Error::InvalidInput(format!("braid needs two distinct indices, got {from},{to}")));
        }
        Ok(Braid {
            from,
            to,
            inverse: false,
        })
    }

    pub fn inverted(self) -> Self {
        Braid {
            inverse: !self.inverse,
            ..self
        }
    }

    fn image(&self, n_modes: usize, j: usize) -> Monomial {
        let single = |idx: usize, neg: bool| {
            let m = Monomial {
                n_modes,
                support: 1u64 << (idx - 1),
                phase: 0,
            };
            if neg {
                m.negate()
            } else {
                m
            }
        };
        if j == self.from {
            single(self.to, self.inverse)
        } else if j == self.to {
            single(self.from, !self.inverse)
        } else {
            single(j, false)
        }
    }

    /// `B m B^dagger` (or `B^dagger m B` for an inverted braid).
    pub fn conjugate(&self, m: &Monomial) -> Monomial {
        let mut acc = Monomial {
            n_modes: m.n_modes,
            support: 0,
            phase: m.phase,
        };
        for j in m.indices() {
            acc = acc * self.image(m.n_modes, j);
        }
        acc
    }

    pub fn dense(&self, n_modes: usize) -> Result<DMatrix<C64>> {
        let pair = Monomial::ordered(n_modes, 1u64 << (self.from - 1), 0)?
            * Monomial::ordered(n_modes, 1u64 << (self.to - 1), 0)?;
        let g = pair.dense()?;
        let dim = g.nrows();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sign = if self.inverse { 1.0 } else { -1.0 };
        Ok((DMatrix::identity(dim, dim) + g * C64::new(sign, 0.0)) * C64::new(s, 0.0))
    }
}

/// Braids taking `gamma_S` to `±gamma_{S'}`: the sorted elements of `S \ S'`
/// are paired with the sorted elements of `S' \ S`.
pub fn braiding_recipe(source: u64, target: u64) -> Result<Vec<Braid>> {
    if source.count_ones() != target.count_ones() {
        return Err(Error::InvalidInput(format!(
            "supports {} and {} differ in size",
            format_subset(source),
            format_subset(target)
        )));
    }
    let leaving = indices(source & !target);
    let arriving = indices(target & !source);
    leaving
        .into_iter()
        .zip(arriving)
        .map(|(a, b)| Braid::new(a, b))
        .collect()
}

pub fn apply_braids(braids: &[Braid], m: &Monomial) -> Monomial {
    braids.iter().rev().fold(*m, |acc, b| b.conjugate(&acc))
}

/// Dense `B_{i,j}` for all pairs inside `S` and all pairs inside its complement.
pub fn braid_stabilizers(n_modes: usize, support: u64) -> Result<Vec<DMatrix<C64>>> {
    let mut out = Vec::new();
    for i in 1..=2 * n_modes {
        for j in i + 1..=2 * n_modes {
            let inside_i = support >> (i - 1) & 1;
            let inside_j = support >> (j - 1) & 1;
            if inside_i == inside_j {
                out.push(Braid::new(i, j)?.dense(n_modes)?);
            }
        }
    }
    Ok(out)
}

/// Single Majoranas outside `S`.
pub fn complement_generators(n_modes: usize, support: u64) -> Result<Vec<DMatrix<C64>>> {
    (1..=2 * n_modes)
        .filter(|j| support >> (j - 1) & 1 == 0)
        .map(|j| Monomial::generator(n_modes, j)?.dense())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParitySector {
    Even,
    Odd,
}

/// Largest mode count for the commutant solver (the linear system has `4^n` unknowns).
pub const COMMUTANT_MODE_LIMIT: usize = 5;

/// Dimension of the set of operators commuting with every generator, optionally
/// restricted to an eigenspace of the parity `gamma_{[2n]}` (`+1` is even).
pub fn commutant_dimension(
    n_modes: usize,
    generators: &[DMatrix<C64>],
    sector: Option<ParitySector>,
) -> Result<usize> {
    if n_modes > COMMUTANT_MODE_LIMIT {
        return Err(Error::DenseLimit {
            n_modes,
            limit: COMMUTANT_MODE_LIMIT,
        });
    }
    let dim = 1usize << n_modes;
    for g in generators {
        if g.nrows() != dim || g.ncols() != dim {
            return Err(Error::InvalidInput(format!(
                "generator is {}x{}, expected {dim}x{dim}",
                g.nrows(),
                g.ncols()
            )));
        }
    }
    let restricted: Vec<DMatrix<C64>> = match sector {
        None => generators.to_vec(),
        Some(which) => {
            let basis = parity_basis(n_modes, which)?;
            let parity = Monomial::parity(n_modes)?.dense()?;
            let mut out = Vec::with_capacity(generators.len());
            for g in generators {
                let comm = g * &parity - &parity * g;
                if comm.iter().any(|c| c.norm() > 1e-10) {
                    return Err(Error::InvalidInput(
                        "generator does not preserve parity".into(),
                    ));
                }
                out.push(basis.adjoint() * g * &basis);
            }
            out
        }
    };
    let d = match sector {
        None => dim,
        Some(_) => dim / 2,
    };
    let unknowns = d * d;
    let mut gram = DMatrix::<C64>::zeros(unknowns, unknowns);
    for g in &restricted {
        // vec(G X - X G) = (I ⊗ G - G^T ⊗ I) vec(X), column-major vec.
        let mut k = DMatrix::<C64>::zeros(unknowns, unknowns);
        for a in 0..d {
            for b in 0..d {
                let col = a + b * d;
                for r in 0..d {
                    k[(r + b * d, col)] += g[(r, a)];
                    k[(a + r * d, col)] -= g[(b, r)];
                }
            }
        }
        gram += k.adjoint() * &k;
    }
    let eig = nalgebra::SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|v| v.abs() < 1e-9 * scale)
        .count())
}

/// Orthonormal basis (columns) of a parity eigenspace. The parity is diagonal
/// in the computational basis, so the basis is a set of basis states.
pub fn parity_basis(n_modes: usize, sector: ParitySector) -> Result<DMatrix<C64>> {
    let parity = Monomial::parity(n_modes)?.to_pauli();
    let dim = 1usize << n_modes;
    let want = match sector {
        ParitySector::Even => C64::new(1.0, 0.0),
        ParitySector::Odd => C64::new(-1.0, 0.0),
    };
    let cols: Vec<usize> = (0..dim)
        .filter(|&b| {
            let (row, amp) = parity.apply_basis(b as u64);
            row as usize == b && (amp - want).norm() < 1e-12
        })
        .collect();
    let mut basis = DMatrix::zeros(dim, cols.len());
    for (c, &b) in cols.iter().enumerate() {
        basis[(b, c)] = C64::new(1.0, 0.0);
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subsets::k_subsets;

    fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        a.kronecker(b)
    }

    fn pauli(letter: char) -> DMatrix<C64> {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match letter {
            'I' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
            'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            'Y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            _ => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }

    /// Independent construction: Kronecker products with qubit 1 as the least
    /// significant factor (rightmost in the Kronecker product).
    fn oracle_majorana(n: usize, j: usize) -> DMatrix<C64> {
        let mode = (j - 1) / 2;
        let mut acc = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for q in 0..n {
            let letter = if q < mode {
                'Z'
            } else if q == mode {
                if j % 2 == 1 {
                    'X'
                } else {
                    'Y'
                }
            } else {
                'I'
            };
            acc = kron(&pauli(letter), &acc);
        }
        acc
    }

    fn oracle_monomial(n: usize, support: u64) -> DMatrix<C64> {
        let dim = 1usize << n;
        let mut acc = DMatrix::identity(dim, dim);
        for j in indices(support) {
            acc *= oracle_majorana(n, j);
        }
        acc * phase_value(hermitian_phase(support.count_ones() as usize))
    }

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    #[test]
    fn single_mode_images() {
        let g1 = Monomial::generator(1, 1).unwrap();
        assert_eq!(g1.to_pauli().letters(), "X");
        assert_eq!(g1.to_pauli().letter_phase(), 0);
        let g12 = Monomial::from_indices(1, &[1, 2]).unwrap();
        let p = g12.to_pauli();
        assert_eq!(p.letters(), "Z");
        assert_eq!(p.letter_phase(), 2);
        assert_eq!(p.to_string(), "-1 Z");
    }

    #[test]
    fn jordan_wigner_matches_kronecker_oracle() {
        for n in 1..=3 {
            for j in 1..=2 * n {
                let d = Monomial::generator(n, j).unwrap().dense().unwrap();
                assert!(max_diff(&d, &oracle_majorana(n, j)) < 1e-14);
            }
            for k in 0..=2 * n {
                for s in k_subsets(2 * n, k) {
                    let d = Monomial::hermitian(n, s).unwrap().dense().unwrap();
                    assert!(max_diff(&d, &oracle_monomial(n, s)) < 1e-12);
                    assert!(max_diff(&d, &d.adjoint()) < 1e-14, "not Hermitian");
                }
            }
        }
    }

    #[test]
    fn clifford_relations() {
        let n = 3;
        let dim = 1usize << n;
        for a in 1..=2 * n {
            for b in 1..=2 * n {
                let ga = oracle_majorana(n, a);
                let gb = oracle_majorana(n, b);
                let anti = &ga * &gb + &gb * &ga;
                let expected = if a == b {
                    DMatrix::identity(dim, dim) * C64::new(2.0, 0.0)
                } else {
                    DMatrix::zeros(dim, dim)
                };
                assert!(max_diff(&anti, &expected) < 1e-14);
            }
        }
    }

    #[test]
    fn product_matches_dense() {
        let n = 3;
        let all: Vec<u64> = (0..64u64).collect();
        for &a in &all {
            for &b in all.iter().step_by(5) {
                let ma = Monomial::hermitian(n, a).unwrap();
                let mb = Monomial::hermitian(n, b).unwrap();
                let prod = (ma * mb).dense().unwrap();
                let oracle = oracle_monomial(n, a) * oracle_monomial(n, b);
                assert!(max_diff(&prod, &oracle) < 1e-12);
            }
        }
    }

    #[test]
    fn commutation_sign_matches_dense() {
        let n = 2;
        for a in 0..16u64 {
            for b in 0..16u64 {
                let da = oracle_monomial(n, a);
                let db = oracle_monomial(n, b);
                let sign = commutation_sign(a, b) as f64;
                let lhs = &da * &db;
                let rhs = &db * &da * C64::new(sign, 0.0);
                assert!(max_diff(&lhs, &rhs) < 1e-12);
            }
        }
    }

    #[test]
    fn parity_is_product_of_minus_z() {
        let q = Monomial::parity(2).unwrap().to_pauli();
        assert_eq!(q.letters(), "ZZ");
        assert_eq!(q.letter_phase(), 0);
        let q3 = Monomial::parity(3).unwrap().to_pauli();
        assert_eq!(q3.letters(), "ZZZ");
        assert_eq!(q3.letter_phase(), 2);
    }

    #[test]
    fn display_and_parse_round_trip() {
        let m = Monomial::from_indices(4, &[2, 4, 6, 8]).unwrap();
        assert_eq!(m.to_string(), "-1 gamma[2,4,6,8]");
        assert_eq!(Monomial::parse(4, &m.to_string()).unwrap(), m);
        let swapped = Monomial::parse(2, "+1 gamma[2,1]").unwrap();
        assert_eq!(swapped, Monomial::ordered(2, 0b11, 2).unwrap());
        assert!(Monomial::parse(2, "gamma[5]").is_err());
        assert!(Monomial::parse(2, "+2 gamma[1]").is_err());
    }

    #[test]
    fn adjoint_is_dense_adjoint() {
        for s in 0..64u64 {
            for ph in 0..4 {
                let m = Monomial::ordered(3, s, ph).unwrap();
                let d = m.dense().unwrap();
                assert!(max_diff(&m.adjoint().dense().unwrap(), &d.adjoint()) < 1e-12);
            }
        }
    }

    #[test]
    fn braid_worked_example() {
        let n = 4;
        let m = Monomial::ordered(n, 0b1111, 0).unwrap();
        let braids = [Braid::new(1, 6).unwrap(), Braid::new(3, 8).unwrap()];
        let out = apply_braids(&braids, &m);
        assert_eq!(out, Monomial::ordered(n, 0b1010_1010, 2).unwrap());
    }

    #[test]
    fn braid_symbolic_matches_dense() {
        let n = 2;
        for (from, to) in [(1, 2), (2, 4), (4, 1), (3, 2)] {
            for inverse in [false, true] {
                let mut b = Braid::new(from, to).unwrap();
                if inverse {
                    b = b.inverted();
                }
                let bd = b.dense(n).unwrap();
                let ident = &bd * bd.adjoint();
                assert!(max_diff(&ident, &DMatrix::identity(4, 4)) < 1e-14);
                for s in 0..16u64 {
                    let m = Monomial::hermitian(n, s).unwrap();
                    let lhs = &bd * m.dense().unwrap() * bd.adjoint();
                    let rhs = b.conjugate(&m).dense().unwrap();
                    assert!(max_diff(&lhs, &rhs) < 1e-12, "{b:?} on {m}");
                }
            }
        }
    }

    #[test]
    fn recipe_maps_support() {
        let braids = braiding_recipe(0b0011, 0b1100).unwrap();
        assert_eq!(braids.len(), 2);
        let m = Monomial::hermitian(2, 0b0011).unwrap();
        assert_eq!(apply_braids(&braids, &m).support(), 0b1100);
        assert!(braiding_recipe(0b1, 0b11).is_err());
        assert!(braiding_recipe(0b101, 0b101).unwrap().is_empty());
    }

    #[test]
    fn commutant_of_identity_is_full_algebra() {
        let id = vec![DMatrix::<C64>::identity(4, 4)];
        assert_eq!(commutant_dimension(2, &id, None).unwrap(), 16);
        assert_eq!(
            commutant_dimension(2, &id, Some(ParitySector::Even)).unwrap(),
            4
        );
    }

    #[test]
    fn commutant_of_braid_stabilizers() {
        for n in 2..=3 {
            let gens = braid_stabilizers(n, 0b11).unwrap();
            assert_eq!(commutant_dimension(n, &gens, None).unwrap(), 4);
            assert_eq!(
                commutant_dimension(n, &gens, Some(ParitySector::Even)).unwrap(),
                2
            );
            assert_eq!(
                commutant_dimension(n, &gens, Some(ParitySector::Odd)).unwrap(),
                2
            );
            let mut with_singles = gens.clone();
            with_singles.extend(complement_generators(n, 0b11).unwrap());
            assert_eq!(commutant_dimension(n, &with_singles, None).unwrap(), 2);
        }
    }

    #[test]
    fn odd_generator_rejected_in_sector() {
        let g = vec![Monomial::generator(2, 1).unwrap().dense().unwrap()];
        assert!(commutant_dimension(2, &g, Some(ParitySector::Even)).is_err());
    }

    #[test]
    fn dense_limit_enforced() {
        let m = Monomial::generator(13, 1).unwrap();
        assert!(matches!(m.dense(), Err(Error::DenseLimit { .. })));
    }
}
