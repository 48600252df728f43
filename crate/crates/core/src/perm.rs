//! Enumeration of the closed index paths used by the cyclic sums.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// All orderings `(i₁, …, i_{n-1})` of `{1..n} \ {a}` in lexicographic order.
/// Indices are 1-based. There are exactly `(n-1)!` of them.
pub fn cyclic_orderings(n: usize, a: usize) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::InvalidParameters("n must be positive".into()));
    }
    if a == 0 || a > n {
        return Err(Error::IndexOutOfRange { index: a, max: n });
    }
    let rest: Vec<usize> = (1..=n).filter(|&i| i != a).collect();
    let k = rest.len();
    Ok(rest.into_iter().permutations(k).collect())
}

/// The same orderings in a seeded pseudo-random order.
pub fn shuffled_orderings(n: usize, a: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut orderings = cyclic_orderings(n, a)?;
    orderings.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(orderings)
}

/// The closed path `a → i₁ → … → i_{n-1} → a` as consecutive site pairs.
pub fn path_edges(a: usize, ordering: &[usize]) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(ordering.len() + 1);
    let mut prev = a;
    for &i in ordering.iter().chain(std::iter::once(&a)) {
        edges.push((prev, i));
        prev = i;
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn three_sites_outer_one() {
        let o = cyclic_orderings(3, 1).unwrap();
        assert_eq!(o, vec![vec![2, 3], vec![3, 2]]);
        assert_eq!(path_edges(1, &o[0]), vec![(1, 2), (2, 3), (3, 1)]);
    }

    #[test]
    fn single_site_has_one_empty_ordering() {
        assert_eq!(cyclic_orderings(1, 1).unwrap(), vec![Vec::<usize>::new()]);
        assert_eq!(path_edges(1, &[]), vec![(1, 1)]);
    }

    #[test]
    fn rejects_bad_outer_index() {
        assert!(matches!(
            cyclic_orderings(3, 0),
            Err(Error::IndexOutOfRange { index: 0, max: 3 })
        ));
        assert!(cyclic_orderings(3, 4).is_err());
    }

    proptest! {
        #[test]
        fn term_count_and_distinctness(n in 2usize..=6, a_seed in 0usize..100) {
            let a = a_seed % n + 1;
            let o = cyclic_orderings(n, a).unwrap();
            let expected: usize = (1..n).product();
            prop_assert_eq!(o.len(), expected);
            let distinct: BTreeSet<_> = o.iter().cloned().collect();
            prop_assert_eq!(distinct.len(), expected);
            for seq in &o {
                prop_assert_eq!(seq.len(), n - 1);
                let set: BTreeSet<_> = seq.iter().copied().collect();
                prop_assert_eq!(set.len(), n - 1);
                prop_assert!(!set.contains(&a));
                prop_assert!(seq.iter().all(|&i| (1..=n).contains(&i)));
            }
            prop_assert!(o.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn shuffle_is_a_permutation(n in 2usize..=5, seed in any::<u64>()) {
            let mut a = cyclic_orderings(n, 1).unwrap();
            let mut b = shuffled_orderings(n, 1, seed).unwrap();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}
