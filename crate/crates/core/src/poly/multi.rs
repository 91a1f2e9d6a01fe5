//! Multi-index enumeration for homogeneous monomials in `n` variables.
//!
//! Indices of degree `k` are ordered with the first exponent descending from
//! `k` to `0`, recursively on the remaining variables.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub type MultiIndex = Vec<u32>;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

/// Number of monomials of degree `k` in `n` variables.
pub fn count(n: usize, k: usize) -> usize {
    if n == 0 {
        return usize::from(k == 0);
    }
    binomial(n + k - 1, n - 1)
}

/// Position of `alpha` in the enumeration of degree `|alpha|`.
pub fn rank(alpha: &[u32]) -> usize {
    let mut k: usize = alpha.iter().map(|&a| a as usize).sum();
    let n = alpha.len();
    let mut r = 0;
    for (p, &a) in alpha.iter().enumerate().take(n.saturating_sub(1)) {
        let a = a as usize;
        if k > a {
            r += count(n - p, k - a - 1);
        }
        k -= a;
    }
    r
}

fn generate(n: usize, k: usize, prefix: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
    if n == 1 {
        prefix.push(k as u32);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for a in (0..=k).rev() {
        prefix.push(a as u32);
        generate(n - 1, k - a, prefix, out);
        prefix.pop();
    }
}

type Table = Arc<Vec<MultiIndex>>;

/// All multi-indices of degree `k` in `n` variables, in rank order (cached).
pub fn monomials(n: usize, k: usize) -> Table {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Table>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("monomial cache");
    guard
        .entry((n, k))
        .or_insert_with(|| {
            let mut out = Vec::with_capacity(count(n, k));
            if n > 0 {
                generate(n, k, &mut Vec::with_capacity(n), &mut out);
            }
            Arc::new(out)
        })
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_enumeration() {
        let m = monomials(3, 2);
        assert_eq!(m.len(), 6);
        assert_eq!(m[0], vec![2, 0, 0]);
        assert_eq!(m[1], vec![1, 1, 0]);
        assert_eq!(m[5], vec![0, 0, 2]);
    }

    proptest! {
        #[test]
        fn rank_inverts_enumeration(n in 1usize..6, k in 0usize..7) {
            let m = monomials(n, k);
            prop_assert_eq!(m.len(), count(n, k));
            for (i, a) in m.iter().enumerate() {
                prop_assert_eq!(rank(a), i);
            }
        }
    }
}
