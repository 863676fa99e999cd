//! Parent POVMs, their marginals and the sharpness table.
//!
//! Outcomes are `(q, x)` with `q` in `{±1}^n` (one sign per pair `{2j-1, 2j}`)
//! and `x` in `{±1}^{2n}`. Both are stored as bitmasks where a set bit is a
//! `-1`. The sign vector `x` labels the monomial `gamma_X` applied before the
//! Gaussian unitary through `x_j = (-1)^{|X| - |X ∩ {j}|}`.
//!
//! Post-processing for a target `S` read through rows `R` is
//! `e_S = sgn(det O_{R,S}) x_S q_R`, whose marginal is
//! `(I + e |det O_{R,S}| gamma_S) / 2`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{minor, GaussianUnitary, OrthogonalMatrix};
use crate::majorana::{Monomial, PauliString};
use crate::matching::{CoverageReport, MeasurementEnsemble, COVERAGE_TOL};
use crate::subsets::{format_subset, indices, k_subsets, pair_mask, pair_subsets};
use crate::C64;

/// Largest mode count for which the dense parent is enumerated.
pub const PARENT_MODE_LIMIT: usize = 4;

pub fn full_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Sign vector (set bit = `-1`) of the monomial `gamma_X`.
pub fn signs_from_monomial(monomial: u64, two_n: usize) -> u64 {
    if monomial.count_ones() % 2 == 0 {
        monomial
    } else {
        !monomial & full_mask(two_n)
    }
}

/// Inverse of [`signs_from_monomial`]; `2n` is even so the map is a bijection.
pub fn monomial_from_signs(signs: u64, two_n: usize) -> u64 {
    signs_from_monomial(signs, two_n)
}

/// `prod_{j in S} s_j` for a sign mask.
#[inline]
pub fn sign_product(signs: u64, support: u64) -> f64 {
    if (signs & support).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `q_R` for a pair-union `R` and a per-mode sign mask.
#[inline]
pub fn pair_sign(q: u64, rows: u64) -> f64 {
    let mut modes = 0u64;
    for j in indices(rows) {
        if j % 2 == 0 {
            modes |= 1u64 << (j / 2 - 1);
        }
    }
    sign_product(q, modes)
}

fn add_pauli(target: &mut DMatrix<C64>, p: &PauliString, coeff: f64) {
    let dim = target.nrows();
    for col in 0..dim {
        let (row, amp) = p.apply_basis(col as u64);
        target[(row as usize, col)] += amp * coeff;
    }
}

fn check_parent_size(n_modes: usize) -> Result<()> {
    if n_modes > PARENT_MODE_LIMIT {
        return Err(Error::DenseLimit {
            n_modes,
            limit: PARENT_MODE_LIMIT,
        });
    }
    Ok(())
}

/// Precomputed minors for the expansion of the parent effect.
pub struct ParentExpansion {
    n_modes: usize,
    /// `(R, S, det O_{R,S}, image of gamma_S)` for every nonzero minor.
    terms: Vec<(u64, u64, f64, PauliString)>,
}

impl ParentExpansion {
    pub fn new(o: &OrthogonalMatrix) -> Result<Self> {
        let n = o.n_modes();
        check_parent_size(n)?;
        let mut terms = Vec::new();
        for k in 1..=n {
            let supports = k_subsets(2 * n, 2 * k);
            for r in pair_subsets(n, k) {
                for &s in &supports {
                    let d = minor(o.matrix(), r, s);
                    if d.abs() > 1e-15 {
                        terms.push((r, s, d, Monomial::hermitian(n, s)?.to_pauli()));
                    }
                }
            }
        }
        Ok(ParentExpansion { n_modes: n, terms })
    }

    /// `2^{-3n} (I + sum_R q_R sum_S x_S det(O_{R,S}) gamma_S)`.
    pub fn effect(&self, q: u64, x: u64) -> DMatrix<C64> {
        let dim = 1usize << self.n_modes;
        let mut out = DMatrix::<C64>::identity(dim, dim);
        for (r, s, d, p) in &self.terms {
            add_pauli(&mut out, p, pair_sign(q, *r) * sign_product(x, *s) * d);
        }
        out * C64::new(0.5f64.powi(3 * self.n_modes as i32), 0.0)
    }
}

/// Parent effect from the sum over minors.
pub fn parent_effect(o: &OrthogonalMatrix, q: u64, x: u64) -> Result<DMatrix<C64>> {
    Ok(ParentExpansion::new(o)?.effect(q, x))
}

/// Parent effect as `2^{-3n} prod_j (I + q_j gamma^{O,x}_{R_j})` over the pairs.
pub fn parent_effect_product(o: &OrthogonalMatrix, q: u64, x: u64) -> Result<DMatrix<C64>> {
    let n = o.n_modes();
    check_parent_size(n)?;
    let dim = 1usize << n;
    let mut out = DMatrix::<C64>::identity(dim, dim);
    for j in 0..n {
        let r = 0b11u64 << (2 * j);
        let qj = if q >> j & 1 == 1 { -1.0 } else { 1.0 };
        let mut factor = DMatrix::<C64>::identity(dim, dim);
        for s in k_subsets(2 * n, 2) {
            let d = minor(o.matrix(), r, s);
            if d != 0.0 {
                add_pauli(
                    &mut factor,
                    &Monomial::hermitian(n, s)?.to_pauli(),
                    qj * sign_product(x, s) * d,
                );
            }
        }
        out *= factor;
    }
    Ok(out * C64::new(0.5f64.powi(3 * n as i32), 0.0))
}

/// Parent effect as `2^{-2n} gamma_X^† U^† prod_j P_j(q_j) U gamma_X`, the
/// circuit that the sampler runs.
pub fn parent_effect_circuit(u: &DMatrix<C64>, n_modes: usize, q: u64, x: u64) -> Result<DMatrix<C64>> {
    let dim = 1usize << n_modes;
    let mut projector = DMatrix::<C64>::identity(dim, dim);
    for j in 0..n_modes {
        let qj = if q >> j & 1 == 1 { -1.0 } else { 1.0 };
        let mut p = DMatrix::<C64>::identity(dim, dim);
        add_pauli(
            &mut p,
            &Monomial::hermitian(n_modes, 0b11u64 << (2 * j))?.to_pauli(),
            qj,
        );
        projector *= p * C64::new(0.5, 0.0);
    }
    let gx = Monomial::ordered(n_modes, monomial_from_signs(x, 2 * n_modes), 0)?.dense()?;
    let scale = C64::new(0.5f64.powi(2 * n_modes as i32), 0.0);
    Ok(gx.adjoint() * u.adjoint() * projector * u * gx * scale)
}

/// Sum of parent effects whose post-processed outcome for `(R, S)` equals `e`.
pub fn marginal_effect(o: &OrthogonalMatrix, rows: u64, support: u64, e: i8) -> Result<DMatrix<C64>> {
    let n = o.n_modes();
    let expansion = ParentExpansion::new(o)?;
    let tau = if minor(o.matrix(), rows, support) < 0.0 {
        -1.0
    } else {
        1.0
    };
    let dim = 1usize << n;
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for q in 0..(1u64 << n) {
        for x in 0..(1u64 << (2 * n)) {
            if tau * sign_product(x, support) * pair_sign(q, rows) == e as f64 {
                out += expansion.effect(q, x);
            }
        }
    }
    Ok(out)
}

/// `(I + e eta gamma_S) / 2`.
pub fn noisy_effect(n_modes: usize, support: u64, eta: f64, e: i8) -> Result<DMatrix<C64>> {
    let dim = 1usize << n_modes;
    let mut out = DMatrix::<C64>::identity(dim, dim);
    add_pauli(
        &mut out,
        &Monomial::hermitian(n_modes, support)?.to_pauli(),
        e as f64 * eta,
    );
    Ok(out * C64::new(0.5, 0.0))
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PovmReport {
    pub effects: usize,
    /// `max |sum_E E - I|`.
    pub completeness_residual: f64,
    pub min_eigenvalue: f64,
    pub hermiticity_residual: f64,
}

impl PovmReport {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.completeness_residual <= tol && self.min_eigenvalue >= -tol && self.hermiticity_residual <= tol
    }
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, c| acc.max(c.norm()))
}

pub fn povm_validate(effects: &[DMatrix<C64>]) -> Result<PovmReport> {
    let first = effects
        .first()
        .ok_or_else(|| Error::InvalidInput("no effects".into()))?;
    let dim = first.nrows();
    let mut total = DMatrix::<C64>::zeros(dim, dim);
    let mut report = PovmReport {
        effects: effects.len(),
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    for e in effects {
        total += e;
        report.hermiticity_residual = report.hermiticity_residual.max(max_abs(&(e - e.adjoint())));
        let herm = (e + e.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(herm);
        let low = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        report.min_eigenvalue = report.min_eigenvalue.min(low);
    }
    report.completeness_residual = max_abs(&(total - DMatrix::<C64>::identity(dim, dim)));
    Ok(report)
}

/// All effects of the parent built from an ensemble, `G(r, q, x) / N`.
pub fn ensemble_parent_effects(ensemble: &MeasurementEnsemble) -> Result<Vec<DMatrix<C64>>> {
    let n = ensemble.n_modes;
    let weight = C64::new(1.0 / ensemble.len() as f64, 0.0);
    let mut out = Vec::new();
    for o in &ensemble.matrices {
        let expansion = ParentExpansion::new(o)?;
        for q in 0..(1u64 << n) {
            for x in 0..(1u64 << (2 * n)) {
                out.push(expansion.effect(q, x) * weight);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ParentValidation {
    pub povm: PovmReport,
    /// Largest deviation of a computed marginal from `(I ± |det| gamma_S) / 2`.
    pub marginal_residual: f64,
}

/// Positivity, completeness and all degree-`2k` marginals of a single-matrix parent.
pub fn validate_parent(o: &OrthogonalMatrix, half_degrees: &[usize]) -> Result<ParentValidation> {
    let n = o.n_modes();
    let expansion = ParentExpansion::new(o)?;
    let mut effects = Vec::with_capacity(1 << (3 * n));
    for q in 0..(1u64 << n) {
        for x in 0..(1u64 << (2 * n)) {
            effects.push(expansion.effect(q, x));
        }
    }
    let povm = povm_validate(&effects)?;
    let mut marginal_residual = 0.0f64;
    for &k in half_degrees {
        for r in pair_subsets(n, k) {
            for s in k_subsets(2 * n, 2 * k) {
                let d = minor(o.matrix(), r, s);
                let tau = if d < 0.0 { -1.0 } else { 1.0 };
                let dim = 1usize << n;
                let mut plus = DMatrix::<C64>::zeros(dim, dim);
                let mut idx = 0;
                for q in 0..(1u64 << n) {
                    for x in 0..(1u64 << (2 * n)) {
                        if tau * sign_product(x, s) * pair_sign(q, r) > 0.0 {
                            plus += &effects[idx];
                        }
                        idx += 1;
                    }
                }
                let want = noisy_effect(n, s, d.abs(), 1)?;
                marginal_residual = marginal_residual.max(max_abs(&(plus - want)));
            }
        }
    }
    Ok(ParentValidation {
        povm,
        marginal_residual,
    })
}

/// One line of the sharpness table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SharpnessRow {
    pub support: u64,
    /// 0-based matrix index.
    pub matrix: usize,
    pub rows: u64,
    /// Signed `det O_{R,S}` for the chosen matrix.
    pub minor: f64,
    /// Best `|det|` over matrices and rows.
    pub eta: f64,
    /// `eta / N`, the sharpness after drawing the matrix uniformly.
    pub eta_effective: f64,
}

impl SharpnessRow {
    pub fn sign(&self) -> f64 {
        if self.minor < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn is_covered(&self) -> bool {
        self.eta > COVERAGE_TOL
    }
}

#[derive(Clone, Debug)]
pub struct SharpnessTable {
    pub n_modes: usize,
    pub ensemble_size: usize,
    pub rows: Vec<SharpnessRow>,
}

impl SharpnessTable {
    pub fn from_coverage(coverage: &CoverageReport, ensemble_size: usize) -> Self {
        let rows = coverage
            .entries
            .iter()
            .map(|e| SharpnessRow {
                support: e.support,
                matrix: e.matrix,
                rows: e.rows,
                minor: e.minor,
                eta: e.eta(),
                eta_effective: e.eta() / ensemble_size as f64,
            })
            .collect();
        SharpnessTable {
            n_modes: coverage.n_modes,
            ensemble_size,
            rows,
        }
    }

    pub fn for_ensemble(ensemble: &MeasurementEnsemble) -> Self {
        Self::from_coverage(&ensemble.coverage, ensemble.len())
    }

    /// Table restricted to given supports, which may have mixed degrees.
    pub fn for_supports(ensemble: &MeasurementEnsemble, supports: &[u64]) -> Result<Self> {
        let mut rows = Vec::with_capacity(supports.len());
        for &s in supports {
            let degree = s.count_ones() as usize;
            if degree == 0 || degree % 2 == 1 {
                return Err(Error::InvalidInput(format!(
                    "target {} must have positive even degree",
                    format_subset(s)
                )));
            }
            let cov = crate::matching::coverage_for_supports(
                &ensemble.matrices,
                ensemble.n_modes,
                degree / 2,
                &[s],
            )?;
            rows.extend(Self::from_coverage(&cov, ensemble.len()).rows);
        }
        Ok(SharpnessTable {
            n_modes: ensemble.n_modes,
            ensemble_size: ensemble.len(),
            rows,
        })
    }

    pub fn row(&self, support: u64) -> Option<&SharpnessRow> {
        self.rows.iter().find(|r| r.support == support)
    }

    pub fn min_eta(&self) -> f64 {
        self.rows.iter().fold(f64::INFINITY, |m, r| m.min(r.eta))
    }

    pub fn min_eta_effective(&self) -> f64 {
        self.rows.iter().fold(f64::INFINITY, |m, r| m.min(r.eta_effective))
    }

    /// CSV with columns `S, r, R, eta_RS, eta_S, eta_effective`; `r` is 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["S", "r", "R", "eta_RS", "eta_S", "eta_effective"])?;
        for row in &self.rows {
            w.write_record([
                format_subset(row.support),
                (row.matrix + 1).to_string(),
                format_subset(row.rows),
                format!("{:.17e}", row.minor.abs()),
                format!("{:.17e}", row.eta),
                format!("{:.17e}", row.eta_effective),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `E[e_S e_S'] / tr(gamma_{S Δ S'} rho)` for two post-processed outcomes
/// read from the same matrix: `det(O_{R Δ R', S Δ S'}) / (tau tau')`, or zero
/// when the symmetric differences differ in size.
pub fn two_observable_coefficient(o: &OrthogonalMatrix, first: (u64, u64), second: (u64, u64)) -> f64 {
    let (r1, s1) = first;
    let (r2, s2) = second;
    let dr = r1 ^ r2;
    let ds = s1 ^ s2;
    if dr.count_ones() != ds.count_ones() {
        return 0.0;
    }
    let sign = |d: f64| if d < 0.0 { -1.0 } else { 1.0 };
    let t1 = sign(o.minor(r1, s1));
    let t2 = sign(o.minor(r2, s2));
    o.minor(dr, ds) * t1 * t2
}

/// Weights `eta_j` with `sum eta_j^2 = 1` define the degree-1 parent
/// `2^{-2n} (I + sum_j e_j eta_j gamma_j)`.
pub fn degree1_parent_effect(eta: &[f64], e: u64) -> Result<DMatrix<C64>> {
    let two_n = eta.len();
    if two_n == 0 || two_n % 2 != 0 {
        return Err(Error::InvalidInput("weight vector must have even length".into()));
    }
    let n = two_n / 2;
    let dim = 1usize << n;
    let mut out = DMatrix::<C64>::identity(dim, dim);
    for (j, &w) in eta.iter().enumerate() {
        let ej = if e >> j & 1 == 1 { -1.0 } else { 1.0 };
        add_pauli(&mut out, &PauliString::majorana(n, j + 1), ej * w);
    }
    Ok(out * C64::new(0.5f64.powi(two_n as i32), 0.0))
}

/// Householder reflection whose first row is `eta`, so `U^† gamma_1 U = sum_j eta_j gamma_j`.
pub fn degree1_rotation(eta: &[f64]) -> Result<OrthogonalMatrix> {
    let size = eta.len();
    let norm: f64 = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("weights have norm {norm}, expected 1")));
    }
    let mut v: Vec<f64> = eta.iter().map(|w| -w).collect();
    v[0] += 1.0;
    let vv: f64 = v.iter().map(|a| a * a).sum();
    if vv < 1e-24 {
        return Ok(OrthogonalMatrix::new(DMatrix::identity(size, size))?);
    }
    let h = DMatrix::from_fn(size, size, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - 2.0 * v[r] * v[c] / vv
    });
    OrthogonalMatrix::new(h)
}

/// `2^{-2n} gamma_X^† U^† (I + q gamma_1) U gamma_X / 2`, with `q = ±1`.
pub fn degree1_projective_effect(u: &GaussianUnitary, q: f64, x: u64) -> Result<DMatrix<C64>> {
    let n = u.n_modes();
    let ud = u.dense()?;
    let dim = 1usize << n;
    let mut p = DMatrix::<C64>::identity(dim, dim);
    add_pauli(&mut p, &PauliString::majorana(n, 1), q);
    let gx = Monomial::ordered(n, monomial_from_signs(x, 2 * n), 0)?.dense()?;
    let scale = C64::new(0.5f64.powi(2 * n as i32 + 1), 0.0);
    Ok(gx.adjoint() * ud.adjoint() * p * ud * gx * scale)
}

/// Row index set `{2j-1, 2j}` for a 1-based mode.
pub fn mode_rows(mode: usize) -> u64 {
    pair_mask(1u64 << (mode - 1))
}
