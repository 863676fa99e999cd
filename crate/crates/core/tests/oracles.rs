//! Values checked against independent computations.
//!
//! Dense Majoranas here are built from explicit Kronecker products, not the
//! library's Pauli machinery. The frozen constants were computed separately
//! in double precision.

use majorana_jm::baselines::{jordan_wigner_max_weight, shadow_jm_bound};
use majorana_jm::gaussian::{GaussianUnitary, OrthogonalMatrix};
use majorana_jm::majorana::Monomial;
use majorana_jm::matching::{degree2_ensemble, partition_failure_prob};
use majorana_jm::robustness::{brute_force, ho_bound, DEFAULT_BUDGET};
use majorana_jm::sampler::{hoeffding_samples, sample_complexity};
use majorana_jm::subsets::k_subsets;
use majorana_jm::C64;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const ETA_DEGREE2_N3: f64 = 0.4309401076758506;
const HO_10_2: f64 = 0.09637388493048533;
const HOEFFDING_15_EPS01_DELTA005_ETA05: u64 = 5118;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn pauli(letter: char) -> DMatrix<C64> {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    match letter {
        'I' => DMatrix::from_row_slice(2, 2, &[one, z, z, one]),
        'X' => DMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        'Y' => DMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        'Z' => DMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
        _ => unreachable!(),
    }
}

/// `letters[q]` acts on qubit `q`, which is bit `q` of the basis index.
fn kron_string(letters: &[char]) -> DMatrix<C64> {
    letters
        .iter()
        .fold(DMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, &l| pauli(l).kronecker(&acc))
}

/// `gamma_{2m+1} = Z...Z X` and `gamma_{2m+2} = Z...Z Y` on mode `m` (0-based).
fn generators(n: usize) -> Vec<DMatrix<C64>> {
    let mut out = Vec::new();
    for m in 0..n {
        for last in ['X', 'Y'] {
            let letters: Vec<char> = (0..n)
                .map(|q| match q.cmp(&m) {
                    std::cmp::Ordering::Less => 'Z',
                    std::cmp::Ordering::Equal => last,
                    std::cmp::Ordering::Greater => 'I',
                })
                .collect();
            out.push(kron_string(&letters));
        }
    }
    out
}

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn generators_match_kronecker_products() {
    for n in 1..=4 {
        let gens = generators(n);
        for (j, g) in gens.iter().enumerate() {
            let ours = Monomial::generator(n, j + 1).unwrap().dense().unwrap();
            assert!(max_diff(&ours, g) < 1e-15, "n={n} j={}", j + 1);
        }
    }
}

#[test]
fn hermitian_monomials_match_phased_products() {
    let n = 3;
    let gens = generators(n);
    for degree in 1..=6 {
        // i^{C(d,2)} times the ascending product.
        let phase = match (degree * (degree - 1) / 2) % 4 {
            0 => c(1.0, 0.0),
            1 => c(0.0, 1.0),
            2 => c(-1.0, 0.0),
            _ => c(0.0, -1.0),
        };
        for s in k_subsets(2 * n, degree) {
            let mut product = DMatrix::<C64>::identity(8, 8);
            for j in 0..2 * n {
                if s >> j & 1 == 1 {
                    product *= &gens[j];
                }
            }
            product *= phase;
            let ours = Monomial::hermitian(n, s).unwrap().dense().unwrap();
            assert!(max_diff(&ours, &product) < 1e-14);
            assert!(max_diff(&product, &product.adjoint()) < 1e-14);
        }
    }
}

#[test]
fn pair_monomial_is_minus_z() {
    let gens = generators(2);
    let pair = (&gens[0] * &gens[1]) * c(0.0, 1.0);
    assert!(max_diff(&pair, &-kron_string(&['Z', 'I'])) < 1e-15);
}

#[test]
fn compiled_unitary_rotates_kronecker_generators() {
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let n = 3;
    let gens = generators(n);
    for negative in [false, true] {
        let o = OrthogonalMatrix::random_with_det(n, negative, &mut rng);
        let u = GaussianUnitary::compile(&o).dense().unwrap();
        for j in 0..2 * n {
            let lhs = u.adjoint() * &gens[j] * &u;
            let mut rhs = DMatrix::<C64>::zeros(8, 8);
            for k in 0..2 * n {
                rhs += &gens[k] * c(o.matrix()[(j, k)], 0.0);
            }
            assert!(max_diff(&lhs, &rhs) < 1e-12);
        }
    }
}

/// Largest eigenvalue over all sign patterns of the degree-2 sum, with the
/// first sign fixed by the global symmetry.
fn dense_degree2_robustness(n: usize) -> f64 {
    let gens = generators(n);
    let monomials: Vec<DMatrix<C64>> = (0..2 * n)
        .flat_map(|a| ((a + 1)..2 * n).map(move |b| (a, b)))
        .map(|(a, b)| (&gens[a] * &gens[b]) * c(0.0, 1.0))
        .collect();
    let m = monomials.len();
    let mut best = f64::NEG_INFINITY;
    for signs in 0..1u64 << (m - 1) {
        let mut h = monomials[0].clone();
        for (i, mono) in monomials.iter().enumerate().skip(1) {
            let s = if signs >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
            h += mono * c(s, 0.0);
        }
        let top = h.symmetric_eigen().eigenvalues.max();
        best = best.max(top);
    }
    best / m as f64
}

#[test]
fn degree2_robustness_matches_dense_enumeration() {
    let oracle = dense_degree2_robustness(2);
    assert!((oracle - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    let ours = brute_force(2, 2, true, DEFAULT_BUDGET).unwrap().value;
    assert!((ours - oracle).abs() < 1e-12);
}

#[test]
fn degree2_robustness_n3_frozen() {
    let ours = brute_force(3, 2, true, DEFAULT_BUDGET).unwrap();
    assert!((ours.value - ETA_DEGREE2_N3).abs() < 1e-12, "{}", ours.value);
    assert!(ours.value < ho_bound(3, 1).unwrap().value);
}

#[test]
fn single_top_monomial_is_sharp() {
    let r = brute_force(2, 4, true, DEFAULT_BUDGET).unwrap();
    assert!((r.value - 1.0).abs() < 1e-12);
}

#[test]
fn frozen_bounds() {
    assert!((ho_bound(10, 2).unwrap().value - HO_10_2).abs() < 1e-15);
    assert_eq!(hoeffding_samples(15.0, 0.1, 0.05, 0.5).unwrap(), HOEFFDING_15_EPS01_DELTA005_ETA05);
    assert_eq!(sample_complexity(3, 1, 0.1, 0.05, 0.5).unwrap(), HOEFFDING_15_EPS01_DELTA005_ETA05);
    assert!((shadow_jm_bound(3, 1).unwrap() - 0.2).abs() < 1e-15);
}

#[test]
fn partition_failure_matches_enumeration() {
    for (base, half) in [(2usize, 1usize), (3, 1), (3, 2), (4, 2)] {
        let vertices = base * (base + 1);
        let supports = k_subsets(vertices, 2 * half);
        let failing = supports
            .iter()
            .filter(|&&s| {
                let blocks: Vec<usize> = (0..vertices).filter(|v| s >> v & 1 == 1).map(|v| v / base).collect();
                (1..blocks.len()).any(|i| blocks[..i].contains(&blocks[i]))
            })
            .count();
        let exact = failing as f64 / supports.len() as f64;
        assert!((partition_failure_prob(base, half) - exact).abs() < 1e-14, "({base},{half})");
    }
}

#[test]
fn jordan_wigner_weights_frozen() {
    // Degree 2 at n = 5: a Majorana on mode 1 and one on mode 5 strings across.
    assert_eq!(jordan_wigner_max_weight(5, 2), 5);
    assert_eq!(jordan_wigner_max_weight(4, 1), 4);
    assert_eq!(jordan_wigner_max_weight(3, 6), 3);
}

#[test]
fn degree2_ensemble_min_sharpness_frozen() {
    let ens = degree2_ensemble(3).unwrap();
    assert!((ens.coverage.min_eta() - 0.5).abs() < 1e-15);
    let ens = degree2_ensemble(4).unwrap();
    assert!(ens.coverage.min_eta() > 0.0);
}
