//! Isserlis–Wick pairings.
//!
//! The permutation sum `1/(k! 2^k) Σ_{σ∈S_{2k}} Π_l E[G_{σ(2l)} G_{σ(2l−1)}]`
//! visits every perfect matching exactly `k! 2^k` times, so it is evaluated
//! as a sum over the `(2k−1)!!` matchings.

use crate::error::{domain, Error, Result};

/// Perfect matching of `{0, …, 2k−1}` as sorted pairs `(a, b)`, `a < b`.
pub type Matching = Vec<(usize, usize)>;

/// Largest number of points matched (`2k ≤ 8`).
pub const MAX_MATCHED_POINTS: usize = 8;

/// All perfect matchings of `{0, …, n−1}`; each pair's first element is the
/// smallest unmatched index, so matchings come out in a canonical order.
pub fn perfect_matchings(n: usize) -> Result<Vec<Matching>> {
    if n % 2 == 1 {
        return Err(domain(format!("cannot perfectly match {n} points")));
    }
    if n > MAX_MATCHED_POINTS {
        return Err(Error::Resource(format!(
            "{n} points exceed the matching limit {MAX_MATCHED_POINTS}"
        )));
    }
    fn rec(free: &[usize], current: &mut Matching, out: &mut Vec<Matching>) {
        if free.is_empty() {
            out.push(current.clone());
            return;
        }
        let first = free[0];
        for idx in 1..free.len() {
            current.push((first, free[idx]));
            let rest: Vec<usize> = free[1..]
                .iter()
                .enumerate()
                .filter(|&(j, _)| j + 1 != idx)
                .map(|(_, &v)| v)
                .collect();
            rec(&rest, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    let free: Vec<usize> = (0..n).collect();
    rec(&free, &mut Vec::with_capacity(n / 2), &mut out);
    Ok(out)
}

/// The `(2k−1)!!` perfect matchings of `2k` points, `k ≤ 4`.
pub fn wick_pairings(k: usize) -> Result<Vec<Matching>> {
    perfect_matchings(2 * k)
}

/// `E[G_1 ⋯ G_n]` for a centered Gaussian vector with covariance `cov`.
/// Odd orders vanish.
pub fn gaussian_product_moment(cov: &[Vec<f64>]) -> Result<f64> {
    let n = cov.len();
    if cov.iter().any(|r| r.len() != n) {
        return Err(domain("covariance must be square"));
    }
    for i in 0..n {
        for j in 0..i {
            let scale = cov[i][j].abs().max(cov[j][i].abs()).max(1.0);
            if (cov[i][j] - cov[j][i]).abs() > 1e-12 * scale {
                return Err(domain(format!("covariance not symmetric at ({i}, {j})")));
            }
        }
    }
    if n % 2 == 1 {
        return Ok(0.0);
    }
    Ok(perfect_matchings(n)?
        .iter()
        .map(|m| m.iter().map(|&(a, b)| cov[a][b]).product::<f64>())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_counts() {
        assert_eq!(wick_pairings(1).unwrap(), vec![vec![(0, 1)]]);
        assert_eq!(wick_pairings(2).unwrap().len(), 3);
        assert_eq!(wick_pairings(3).unwrap().len(), 15);
        assert_eq!(wick_pairings(4).unwrap().len(), 105);
        assert!(matches!(wick_pairings(5), Err(Error::Resource(_))));
        // every matching covers every point once
        for m in wick_pairings(3).unwrap() {
            let mut seen: Vec<usize> = m.iter().flat_map(|&(a, b)| [a, b]).collect();
            seen.sort();
            assert_eq!(seen, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn moments_of_simple_vectors() {
        assert_eq!(gaussian_product_moment(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(), 1.0);
        let ones = vec![vec![1.0; 4]; 4];
        assert_eq!(gaussian_product_moment(&ones).unwrap(), 3.0);
        let ones6 = vec![vec![1.0; 6]; 6];
        assert_eq!(gaussian_product_moment(&ones6).unwrap(), 15.0);
        assert_eq!(gaussian_product_moment(&vec![vec![1.0; 3]; 3]).unwrap(), 0.0);
        let asym = vec![vec![1.0, 0.5], vec![0.2, 1.0]];
        assert!(gaussian_product_moment(&asym).is_err());
    }
}
