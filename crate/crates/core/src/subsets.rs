//! Subsets of Majorana indices stored as bitmasks.
//!
//! Bit `j - 1` of a mask stands for the 1-based index `j`. Enumerations are
//! lexicographic in the sorted index lists, which is the order used by every
//! table the crate writes.

use crate::error::{Error, Result};

/// Largest supported number of Majorana operators (one bit each in a `u64`).
pub const MAX_MAJORANAS: usize = 64;

pub fn indices(mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut rest = mask;
    while rest != 0 {
        let bit = rest.trailing_zeros() as usize;
        out.push(bit + 1);
        rest &= rest - 1;
    }
    out
}

/// Builds a mask from 1-based indices, rejecting duplicates and out-of-range entries.
pub fn mask_from_indices(list: &[usize], universe: usize) -> Result<u64> {
    let mut mask = 0u64;
    for &j in list {
        if j == 0 || j > universe {
            return Err(Error::InvalidInput(format!(
                "index {j} outside 1..={universe}"
            )));
        }
        let bit = 1u64 << (j - 1);
        if mask & bit != 0 {
            return Err(Error::InvalidInput(format!("index {j} repeated")));
        }
        mask |= bit;
    }
    Ok(mask)
}

pub fn format_subset(mask: u64) -> String {
    let parts: Vec<String> = indices(mask).iter().map(|j| j.to_string()).collect();
    format!("[{}]", parts.join(","))
}

/// Parses `[1,3]`, `1,3` or `1 3`.
pub fn parse_subset(text: &str, universe: usize) -> Result<u64> {
    let trimmed = text.trim().trim_start_matches('[').trim_end_matches(']');
    let mut list = Vec::new();
    for tok in trimmed.split(|c: char| c == ',' || c.is_whitespace()) {
        if tok.is_empty() {
            continue;
        }
        let j: usize = tok
            .parse()
            .map_err(|_| Error::Parse(format!("bad index {tok:?} in {text:?}")))?;
        list.push(j);
    }
    mask_from_indices(&list, universe)
}

/// All `k`-subsets of `1..=m` in lexicographic order.
pub fn k_subsets(m: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    if k > m || m > MAX_MAJORANAS {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().fold(0u64, |acc, &i| acc | (1u64 << i)));
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == m - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return out;
        }
        idx[pos - 1] += 1;
        for t in pos..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// Spreads a mode mask onto Majorana pairs: mode `j` becomes `{2j-1, 2j}`.
pub fn pair_mask(mode_mask: u64) -> u64 {
    let mut out = 0u64;
    for j in indices(mode_mask) {
        out |= 0b11u64 << (2 * (j - 1));
    }
    out
}

/// Unions of `k` disjoint pairs `{2j-1, 2j}`, lexicographic.
pub fn pair_subsets(n_modes: usize, k: usize) -> Vec<u64> {
    k_subsets(n_modes, k).into_iter().map(pair_mask).collect()
}

pub fn is_pair_union(mask: u64) -> bool {
    let odd = mask & 0x5555_5555_5555_5555;
    let even = (mask >> 1) & 0x5555_5555_5555_5555;
    odd == even
}

/// Lexicographic comparison of the sorted index lists.
pub fn lex_cmp(a: u64, b: u64) -> std::cmp::Ordering {
    indices(a).cmp(&indices(b))
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_are_lexicographic_and_complete() {
        let subs = k_subsets(5, 3);
        assert_eq!(subs.len(), 10);
        assert_eq!(indices(subs[0]), vec![1, 2, 3]);
        assert_eq!(indices(subs[1]), vec![1, 2, 4]);
        assert_eq!(indices(subs[9]), vec![3, 4, 5]);
        for w in subs.windows(2) {
            assert_eq!(lex_cmp(w[0], w[1]), std::cmp::Ordering::Less);
        }
        assert_eq!(k_subsets(4, 0), vec![0]);
        assert_eq!(k_subsets(4, 4).len(), 1);
        assert!(k_subsets(3, 4).is_empty());
    }

    #[test]
    fn pair_unions() {
        let d4 = pair_subsets(3, 2);
        let lists: Vec<Vec<usize>> = d4.iter().map(|&m| indices(m)).collect();
        assert_eq!(
            lists,
            vec![vec![1, 2, 3, 4], vec![1, 2, 5, 6], vec![3, 4, 5, 6]]
        );
        assert!(d4.iter().all(|&m| is_pair_union(m)));
        assert!(!is_pair_union(0b0110));
    }

    #[test]
    fn parse_and_format_round_trip() {
        let m = parse_subset("[1, 4,6]", 6).unwrap();
        assert_eq!(format_subset(m), "[1,4,6]");
        assert!(parse_subset("[1,1]", 6).is_err());
        assert!(parse_subset("[7]", 6).is_err());
        assert_eq!(parse_subset("[]", 6).unwrap(), 0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 2), 15);
        assert_eq!(binomial(12, 4), 495);
        assert_eq!(binomial(3, 5), 0);
        assert!((binomial_f64(40, 20) - 137846528820.0).abs() < 1.0);
    }
}
