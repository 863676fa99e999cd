//! Browser bindings. Each export returns a JSON string for `www/index.html`.

use majorana_jm::baselines::comparison_rows;
use majorana_jm::matching::degree2_ensemble;
use majorana_jm::robustness::{degree2_norm, skew_hadamard_search, SkewHadamardStatus, TournamentMatrix};
use majorana_jm::subsets::indices;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest mode count the heatmap accepts.
pub const HEATMAP_MODE_LIMIT: usize = 24;
/// Largest tournament size the spectrum view accepts.
pub const TOURNAMENT_SIZE_LIMIT: usize = 200;

#[derive(Serialize)]
pub struct Heatmap {
    pub n: usize,
    /// `eta[i][j]` for the observable on Majoranas `i + 1, j + 1`; zero on the diagonal.
    pub eta: Vec<Vec<f64>>,
    /// 1-based matrix achieving each entry, 0 on the diagonal.
    pub matrix: Vec<Vec<usize>>,
    pub min_eta: f64,
    pub ensemble_size: usize,
}

#[derive(Serialize)]
pub struct Spectrum {
    pub size: usize,
    pub kind: &'static str,
    pub lambdas: Vec<f64>,
    pub total: f64,
    pub bound: f64,
}

#[derive(Serialize)]
pub struct Curve {
    pub n: usize,
    pub construction: Option<f64>,
    pub ternary: f64,
    pub shadow: f64,
    pub upper: f64,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn heatmap(n: usize) -> Result<Heatmap, String> {
    if n == 0 || n > HEATMAP_MODE_LIMIT {
        return Err(format!("n must lie in 1..={HEATMAP_MODE_LIMIT}"));
    }
    let ens = degree2_ensemble(n).map_err(|e| e.to_string())?;
    let size = 2 * n;
    let mut eta = vec![vec![0.0; size]; size];
    let mut matrix = vec![vec![0; size]; size];
    for e in &ens.coverage.entries {
        let idx = indices(e.support);
        let (a, b) = (idx[0] - 1, idx[1] - 1);
        eta[a][b] = e.eta();
        eta[b][a] = e.eta();
        matrix[a][b] = e.matrix + 1;
        matrix[b][a] = e.matrix + 1;
    }
    Ok(Heatmap {
        n,
        eta,
        matrix,
        min_eta: ens.coverage.min_eta(),
        ensemble_size: ens.len(),
    })
}

/// A skew-Hadamard tournament when one is at hand, otherwise a random one.
pub fn spectrum(size: usize, seed: u64) -> Result<Spectrum, String> {
    if size < 2 || size % 2 == 1 || size > TOURNAMENT_SIZE_LIMIT {
        return Err(format!("size must be even and in 2..={TOURNAMENT_SIZE_LIMIT}"));
    }
    let (kind, t) = match skew_hadamard_search(size) {
        SkewHadamardStatus::Constructed(t) => ("skew-hadamard", t),
        _ => ("random", TournamentMatrix::random(size, &mut ChaCha20Rng::seed_from_u64(seed))),
    };
    let (total, lambdas) = degree2_norm(&t);
    let half = (size / 2) as f64;
    Ok(Spectrum {
        size,
        kind,
        lambdas,
        total,
        bound: half * ((size - 1) as f64).sqrt(),
    })
}

pub fn curves(n_max: usize, half_degree: usize) -> Result<Vec<Curve>, String> {
    if half_degree == 0 || n_max < half_degree || n_max > 40 {
        return Err("need 1 <= k <= n_max <= 40".into());
    }
    let n_values: Vec<usize> = (half_degree..=n_max).collect();
    let rows = comparison_rows(&n_values, half_degree, 0).map_err(|e| e.to_string())?;
    Ok(rows
        .into_iter()
        .map(|r| Curve {
            n: r.n,
            construction: r.eta_construction,
            ternary: r.eta_ternary,
            shadow: r.shadow_jm_bound,
            upper: r.thm2_upper,
        })
        .collect())
}

#[wasm_bindgen]
pub fn coverage_heatmap(n: usize) -> Result<String, JsError> {
    heatmap(n).and_then(|h| to_json(&h)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn tournament_spectrum(size: usize, seed: u32) -> Result<String, JsError> {
    spectrum(size, seed as u64).and_then(|s| to_json(&s)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn baseline_curves(n_max: usize, half_degree: usize) -> Result<String, JsError> {
    curves(n_max, half_degree).and_then(|c| to_json(&c)).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_at_three_modes_is_flat() {
        let h = heatmap(3).unwrap();
        assert_eq!(h.ensemble_size, 2);
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert!((h.eta[i][j] - 0.5).abs() < 1e-12);
                    assert_eq!(h.eta[i][j], h.eta[j][i]);
                }
            }
        }
        assert!(heatmap(0).is_err());
    }

    #[test]
    fn order_four_spectrum_meets_the_bound() {
        let s = spectrum(4, 0).unwrap();
        assert_eq!(s.kind, "skew-hadamard");
        assert!((s.total - s.bound).abs() < 1e-12);
        let s = spectrum(6, 3).unwrap();
        assert_eq!(s.kind, "random");
        assert!(s.total < s.bound);
        assert!(spectrum(5, 0).is_err());
    }

    #[test]
    fn curves_are_ordered() {
        let c = curves(10, 1).unwrap();
        assert_eq!(c.len(), 10);
        for row in &c {
            assert!(row.shadow <= row.upper);
            assert!(row.construction.unwrap() <= row.upper);
        }
        assert!(to_json(&c).unwrap().starts_with("[{\"n\":1"));
    }
}
