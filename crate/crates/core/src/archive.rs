//! Ensemble archives and JSON inputs on disk.
//!
//! An archive is a directory holding `metadata.json`, one `matrix_<r>.txt`
//! per matrix (1-based `r`) and `coverage.csv` with columns `S, r, R, eta`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::OrthogonalMatrix;
use crate::matching::{MeasurementEnsemble, Permutation};
use crate::sampler::{FermionicState, Hamiltonian, HamiltonianFile, StateFile};
use crate::subsets::{format_subset, parse_subset};

pub const METADATA_FILE: &str = "metadata.json";
pub const COVERAGE_FILE: &str = "coverage.csv";

pub fn matrix_file(r: usize) -> String {
    format!("matrix_{r}.txt")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMetadata {
    pub n: usize,
    /// Half-degree: the ensemble covers degree-`2k` observables.
    pub k: usize,
    #[serde(rename = "N")]
    pub count: usize,
    pub seed: Option<u64>,
    /// Cycle notation, 1-based.
    pub pi: Option<String>,
    pub sigma: Vec<String>,
    pub retries: usize,
    pub matrices: Vec<String>,
    pub coverage: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageLine {
    pub support: u64,
    /// 0-based matrix index.
    pub matrix: usize,
    pub rows: u64,
    pub eta: f64,
}

pub fn write_coverage_csv<W: std::io::Write>(ensemble: &MeasurementEnsemble, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["S", "r", "R", "eta"])?;
    for e in &ensemble.coverage.entries {
        w.write_record([
            format_subset(e.support),
            (e.matrix + 1).to_string(),
            format_subset(e.rows),
            format!("{:.17e}", e.eta()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_coverage_csv<R: std::io::Read>(input: R, universe: usize) -> Result<Vec<CoverageLine>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Parse(format!("coverage row has {} fields", rec.len())));
        }
        let r: usize = rec[1].parse().map_err(|_| Error::Parse(format!("bad r {:?}", &rec[1])))?;
        if r == 0 {
            return Err(Error::Parse("r is 1-based".into()));
        }
        out.push(CoverageLine {
            support: parse_subset(&rec[0], universe)?,
            matrix: r - 1,
            rows: parse_subset(&rec[2], universe)?,
            eta: rec[3].parse().map_err(|_| Error::Parse(format!("bad eta {:?}", &rec[3])))?,
        });
    }
    Ok(out)
}

pub fn save_ensemble(ensemble: &MeasurementEnsemble, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let names: Vec<String> = (1..=ensemble.len()).map(matrix_file).collect();
    for (o, name) in ensemble.matrices.iter().zip(&names) {
        fs::write(dir.join(name), o.to_text())?;
    }
    let mut buf = Vec::new();
    write_coverage_csv(ensemble, &mut buf)?;
    fs::write(dir.join(COVERAGE_FILE), buf)?;
    let meta = ArchiveMetadata {
        n: ensemble.n_modes,
        k: ensemble.half_degree,
        count: ensemble.len(),
        seed: ensemble.seed,
        pi: ensemble.pi.as_ref().map(Permutation::cycle_notation),
        sigma: ensemble.sigmas.iter().map(Permutation::cycle_notation).collect(),
        retries: ensemble.retries,
        matrices: names,
        coverage: COVERAGE_FILE.into(),
    };
    fs::write(dir.join(METADATA_FILE), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn read_metadata(dir: &Path) -> Result<ArchiveMetadata> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join(METADATA_FILE))?)?)
}

/// Loads the matrices and metadata; coverage is recomputed from the matrices.
pub fn load_ensemble(dir: &Path) -> Result<MeasurementEnsemble> {
    let meta = read_metadata(dir)?;
    if meta.matrices.len() != meta.count {
        return Err(Error::Parse(format!(
            "metadata lists {} matrices but N = {}",
            meta.matrices.len(),
            meta.count
        )));
    }
    let matrices = meta
        .matrices
        .iter()
        .map(|name| OrthogonalMatrix::from_text(&fs::read_to_string(dir.join(name))?))
        .collect::<Result<Vec<_>>>()?;
    let mut ensemble = MeasurementEnsemble::from_matrices(meta.n, meta.k, matrices)?;
    let universe = 2 * meta.n;
    ensemble.pi = meta.pi.as_deref().map(|c| Permutation::parse_cycles(c, universe)).transpose()?;
    ensemble.sigmas = meta
        .sigma
        .iter()
        .map(|c| Permutation::parse_cycles(c, universe))
        .collect::<Result<_>>()?;
    ensemble.seed = meta.seed;
    ensemble.retries = meta.retries;
    Ok(ensemble)
}

pub fn load_state(path: &Path) -> Result<FermionicState> {
    let file: StateFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    FermionicState::from_file(&file)
}

pub fn load_hamiltonian(path: &Path) -> Result<Hamiltonian> {
    let file: HamiltonianFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    Hamiltonian::from_file(&file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::degree2_ensemble;

    fn scratch_dir(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("majorana-jm-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn archive_round_trip() {
        let ens = degree2_ensemble(3).unwrap();
        let dir = scratch_dir("archive");
        save_ensemble(&ens, &dir).unwrap();
        let back = load_ensemble(&dir).unwrap();
        assert_eq!(back.matrices, ens.matrices);
        assert_eq!(back.pi, ens.pi);
        assert_eq!(back.sigmas, ens.sigmas);
        let meta = read_metadata(&dir).unwrap();
        assert_eq!((meta.n, meta.k, meta.count), (3, 1, 2));
        let lines = read_coverage_csv(fs::File::open(dir.join(COVERAGE_FILE)).unwrap(), 6).unwrap();
        assert_eq!(lines.len(), 15);
        for (l, e) in lines.iter().zip(&ens.coverage.entries) {
            assert_eq!((l.support, l.matrix, l.rows), (e.support, e.matrix, e.rows));
            assert_eq!(l.eta, e.eta());
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_archive_is_io_error() {
        assert!(matches!(load_ensemble(Path::new("/nonexistent/archive")), Err(Error::Io(_))));
    }
}
