//! Reference sharpness values: qubit-local parents under fermion-to-qubit
//! mappings and the bounds that follow from fermionic classical shadows.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::robustness::{construction_sharpness, degree2_upper_bound, ho_bound};
use crate::subsets::binomial_f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingKind {
    JordanWigner,
    TernaryTree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MappingModel {
    pub kind: MappingKind,
    pub n_modes: usize,
}

/// `ceil(log_3(m))` in exact integer arithmetic.
fn ceil_log3(m: usize) -> usize {
    let mut power = 1usize;
    let mut exp = 0;
    while power < m {
        power *= 3;
        exp += 1;
    }
    exp
}

impl MappingModel {
    pub fn new(kind: MappingKind, n_modes: usize) -> Self {
        MappingModel { kind, n_modes }
    }

    /// Pauli weight of the image of the 1-based Majorana `j`.
    pub fn weight(&self, j: usize) -> usize {
        match self.kind {
            MappingKind::JordanWigner => j.div_ceil(2),
            MappingKind::TernaryTree => ceil_log3(2 * self.n_modes + 1),
        }
    }

    /// Largest Pauli weight of a degree-`degree` monomial. Exact for
    /// Jordan-Wigner; the per-Majorana weight times the degree for ternary trees.
    pub fn max_weight(&self, degree: usize) -> usize {
        match self.kind {
            MappingKind::JordanWigner => jordan_wigner_max_weight(self.n_modes, degree),
            MappingKind::TernaryTree => degree * ceil_log3(2 * self.n_modes + 1),
        }
    }
}

/// Qubit `q` of a Jordan-Wigner product carries `X`/`Y` from Majoranas on mode
/// `q` and `Z` from every Majorana on a higher mode. With `a` Majoranas on the
/// mode and `b` the parity of those above, it is nontrivial when `a = 1`,
/// `a = 0, b = 1`, or `a = 2, b = 0`. A sweep from the top mode down keeps the
/// best weight per (chosen so far, parity).
pub fn jordan_wigner_max_weight(n_modes: usize, degree: usize) -> usize {
    if degree > 2 * n_modes {
        return 0;
    }
    const NONE: i64 = i64::MIN;
    // best[c][p]: max weight over the modes processed, c chosen, parity p.
    let mut best = vec![[NONE; 2]; degree + 1];
    best[0][0] = 0;
    for _ in 0..n_modes {
        let mut next = vec![[NONE; 2]; degree + 1];
        for c in 0..=degree {
            for p in 0..2 {
                let w = best[c][p];
                if w == NONE {
                    continue;
                }
                for a in 0..=2usize {
                    if c + a > degree {
                        continue;
                    }
                    let gain = match (a, p) {
                        (1, _) | (0, 1) | (2, 0) => 1,
                        _ => 0,
                    };
                    // Two choices of the single Majorana give the same weight.
                    let np = (p + a) % 2;
                    let slot = &mut next[c + a][np];
                    *slot = (*slot).max(w + gain);
                }
            }
        }
        best = next;
    }
    best[degree].iter().copied().max().unwrap_or(0).max(0) as usize
}

/// `3^(-w/2)`, the best sharpness of a weight-`w` Pauli under a local parent.
pub fn qubit_parent_sharpness(weight: usize) -> f64 {
    3f64.powf(-(weight as f64) / 2.0)
}

pub fn mapped_sharpness(model: &MappingModel, degree: usize) -> f64 {
    qubit_parent_sharpness(model.max_weight(degree))
}

fn check_half_degree(n_modes: usize, half_degree: usize) -> Result<()> {
    if half_degree == 0 || half_degree > n_modes {
        return Err(Error::InvalidInput(format!(
            "half-degree must lie in 1..={n_modes}, got {half_degree}"
        )));
    }
    Ok(())
}

/// `C(n, k) / C(2n, 2k)`: degree-`2k` observables are jointly measurable at
/// this sharpness.
pub fn shadow_jm_bound(n_modes: usize, half_degree: usize) -> Result<f64> {
    check_half_degree(n_modes, half_degree)?;
    Ok(binomial_f64(n_modes, half_degree) / binomial_f64(2 * n_modes, 2 * half_degree))
}

/// `sqrt(C(2n, 2k) / C(n, k))`.
pub fn shadow_norm(n_modes: usize, half_degree: usize) -> Result<f64> {
    check_half_degree(n_modes, half_degree)?;
    Ok((binomial_f64(2 * n_modes, 2 * half_degree) / binomial_f64(n_modes, half_degree)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub k: usize,
    pub eta_construction: Option<f64>,
    pub eta_ternary: f64,
    pub shadow_jm_bound: f64,
    pub ho_bound: f64,
    pub thm2_upper: f64,
}

/// One row per `n` for degree `2k` observables.
pub fn comparison_rows(n_values: &[usize], half_degree: usize, seed: u64) -> Result<Vec<ComparisonRow>> {
    n_values
        .iter()
        .map(|&n| {
            let ho = ho_bound(n, half_degree)?.value;
            Ok(ComparisonRow {
                n,
                k: half_degree,
                eta_construction: construction_sharpness(n, 2 * half_degree, seed),
                eta_ternary: mapped_sharpness(&MappingModel::new(MappingKind::TernaryTree, n), 2 * half_degree),
                shadow_jm_bound: shadow_jm_bound(n, half_degree)?,
                ho_bound: ho,
                thm2_upper: if half_degree == 1 { degree2_upper_bound(n) } else { ho },
            })
        })
        .collect()
}

/// CSV with columns `n, k, eta_construction, eta_ternary, shadow_jm_bound,
/// ho_bound, thm2_upper`; a missing construction value is left empty.
pub fn write_comparison_csv<W: std::io::Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "k",
        "eta_construction",
        "eta_ternary",
        "shadow_jm_bound",
        "ho_bound",
        "thm2_upper",
    ])?;
    let f = |v: f64| format!("{v:.17e}");
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.k.to_string(),
            r.eta_construction.map(f).unwrap_or_default(),
            f(r.eta_ternary),
            f(r.shadow_jm_bound),
            f(r.ho_bound),
            f(r.thm2_upper),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorana::Monomial;
    use crate::subsets::k_subsets;

    #[test]
    fn jordan_wigner_dp_matches_enumeration() {
        for n in 1..=5 {
            for degree in 0..=2 * n {
                let brute = k_subsets(2 * n, degree)
                    .into_iter()
                    .map(|s| Monomial::hermitian(n, s).unwrap().to_pauli().weight())
                    .max()
                    .unwrap_or(0);
                assert_eq!(jordan_wigner_max_weight(n, degree), brute, "n={n} degree={degree}");
            }
        }
    }

    #[test]
    fn weights() {
        let jw = MappingModel::new(MappingKind::JordanWigner, 4);
        assert_eq!((1..=8).map(|j| jw.weight(j)).collect::<Vec<_>>(), [1, 1, 2, 2, 3, 3, 4, 4]);
        assert_eq!(jw.max_weight(1), 4);
        let tt = MappingModel::new(MappingKind::TernaryTree, 13);
        assert_eq!(tt.weight(1), 3);
        assert!((mapped_sharpness(&tt, 2) - 1.0 / 27.0).abs() < 1e-15);
        assert_eq!(mapped_sharpness(&tt, 0), 1.0);
        assert!((mapped_sharpness(&jw, 1) - 3f64.powf(-2.0)).abs() < 1e-15);
    }

    #[test]
    fn qubit_parent_values() {
        assert_eq!(qubit_parent_sharpness(0), 1.0);
        assert!((qubit_parent_sharpness(1) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((qubit_parent_sharpness(2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn shadow_values() {
        assert!((shadow_jm_bound(2, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((shadow_jm_bound(4, 2).unwrap() - 6.0 / 70.0).abs() < 1e-15);
        for n in 1..=30 {
            assert!((shadow_jm_bound(n, 1).unwrap() - 1.0 / (2.0 * n as f64 - 1.0)).abs() < 1e-15);
        }
        assert!((shadow_norm(2, 1).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!((shadow_norm(3, 1).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!(shadow_norm(3, 4).is_err());
    }

    #[test]
    fn shadow_bound_below_binomial_bound() {
        for n in 1..=20 {
            for k in 1..=n {
                assert!(shadow_jm_bound(n, k).unwrap() <= ho_bound(n, k).unwrap().value + 1e-15);
            }
        }
    }

    #[test]
    fn ternary_versus_jordan_wigner() {
        // Single Majoranas: ternary trees are never worse and win from n = 3.
        for n in 2..=60 {
            let jw = mapped_sharpness(&MappingModel::new(MappingKind::JordanWigner, n), 1);
            let tt = mapped_sharpness(&MappingModel::new(MappingKind::TernaryTree, n), 1);
            assert!(tt >= jw);
            assert_eq!(tt > jw, n >= 3);
        }
        // Higher degrees: the weight bound overtakes Jordan-Wigner once n is
        // large enough, though not at every small n.
        for degree in 1..=4 {
            let wins = |n| {
                mapped_sharpness(&MappingModel::new(MappingKind::TernaryTree, n), degree)
                    > mapped_sharpness(&MappingModel::new(MappingKind::JordanWigner, n), degree)
            };
            assert!((40..=60).all(wins), "degree {degree}");
        }
        assert!(
            mapped_sharpness(&MappingModel::new(MappingKind::JordanWigner, 5), 2)
                > mapped_sharpness(&MappingModel::new(MappingKind::TernaryTree, 5), 2)
        );
    }

    #[test]
    fn ternary_repetitions_grow_twice_as_fast() {
        // 1/eta^2 grows like n^(2k) under the ternary parent and n^k for the
        // construction's guarantee of order n^(-k/2).
        for k in 1..=3usize {
            let reps = |n: usize| {
                1.0 / mapped_sharpness(&MappingModel::new(MappingKind::TernaryTree, n), 2 * k).powi(2)
            };
            // Between n = 13 and n = 121 the weight is 3 and 5 exactly.
            let slope = (reps(121) / reps(13)).ln() / (121f64 / 13.0).ln();
            let ideal = (243f64 / 27.0).powi(2 * k as i32).ln() / (121f64 / 13.0).ln();
            assert!((slope - ideal).abs() < 1e-12);
            assert!(slope > 1.9 * k as f64);
        }
    }

    #[test]
    fn comparison_csv() {
        let rows = comparison_rows(&[2, 3, 4], 1, 0).unwrap();
        let mut buf = Vec::new();
        write_comparison_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,k,eta_construction,eta_ternary,shadow_jm_bound,ho_bound,thm2_upper\n"));
        assert_eq!(text.lines().count(), 4);
        for r in &rows {
            assert!(r.eta_construction.unwrap() <= r.thm2_upper + 1e-12);
            assert!(r.shadow_jm_bound <= r.thm2_upper + 1e-12);
        }
    }
}
