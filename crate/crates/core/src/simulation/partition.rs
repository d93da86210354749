//! Label-skewed data partitioning.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Splits example indices across `workers` shards. For every class a
/// `Dir(alpha)` draw sets the share each worker receives; shares become
/// counts by largest-remainder rounding (ties to the lower worker id).
///
/// Afterwards every empty shard takes one random example from a random
/// shard holding more than one, so no worker ends up without data when
/// there are at least as many examples as workers. Shards are returned
/// sorted.
pub fn dirichlet_partition(labels: &[usize], workers: usize, alpha: f64, rng: &mut RngStream) -> Result<Vec<Vec<usize>>> {
    if workers < 1 {
        return Err(Error::InvalidArgument("at least one worker is required".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("Dirichlet concentration must be positive, got {alpha}")));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let mut shards = vec![Vec::new(); workers];
    for class in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);

        let mut weights: Vec<f64> = (0..workers).map(|_| gamma.sample(rng)).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        } else {
            // every draw underflowed: the limit of a tiny alpha is a point mass
            weights = vec![0.0; workers];
            weights[rng.random_range(0..workers)] = 1.0;
        }

        let n = members.len();
        let exact: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..workers).collect();
        order.sort_by(|&i, &j| {
            let (fi, fj) = (exact[i] - exact[i].floor(), exact[j] - exact[j].floor());
            fj.total_cmp(&fi).then(i.cmp(&j))
        });
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            counts[i] += 1;
        }

        let mut rest = members.as_slice();
        for (shard, &k) in shards.iter_mut().zip(&counts) {
            let (take, tail) = rest.split_at(k);
            shard.extend_from_slice(take);
            rest = tail;
        }
    }

    for j in 0..workers {
        if !shards[j].is_empty() {
            continue;
        }
        let donors: Vec<usize> = (0..workers).filter(|&i| shards[i].len() > 1).collect();
        if donors.is_empty() {
            break;
        }
        let donor = donors[rng.random_range(0..donors.len())];
        let pos = rng.random_range(0..shards[donor].len());
        let example = shards[donor].swap_remove(pos);
        shards[j].push(example);
    }

    shards.iter_mut().for_each(|s| s.sort_unstable());
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn labels(n: usize, classes: usize) -> Vec<usize> {
        (0..n).map(|i| i % classes).collect()
    }

    fn assert_set_partition(shards: &[Vec<usize>], n: usize) {
        let mut all: Vec<usize> = shards.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn single_worker_gets_everything() {
        let y = labels(37, 3);
        let shards = dirichlet_partition(&y, 1, 0.5, &mut stream(1, 0, 0, "p")).unwrap();
        assert_eq!(shards, vec![(0..37).collect::<Vec<_>>()]);
    }

    #[test]
    fn is_a_set_partition_for_any_alpha() {
        let y = labels(500, 4);
        for (k, alpha) in [0.01, 0.3, 1.0, 100.0].into_iter().enumerate() {
            let shards = dirichlet_partition(&y, 13, alpha, &mut stream(7, k as u64, 0, "p")).unwrap();
            assert_eq!(shards.len(), 13);
            assert_set_partition(&shards, 500);
            assert!(shards.iter().all(|s| !s.is_empty()));
        }
    }

    #[test]
    fn large_alpha_is_near_iid() {
        let y = labels(10_000, 2);
        let shards = dirichlet_partition(&y, 5, 1e6, &mut stream(3, 0, 0, "p")).unwrap();
        for shard in &shards {
            let ones = shard.iter().filter(|&&i| y[i] == 1).count() as f64;
            assert!((ones / shard.len() as f64 - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn deterministic_per_stream() {
        let y = labels(200, 3);
        let a = dirichlet_partition(&y, 6, 0.5, &mut stream(9, 0, 0, "p")).unwrap();
        let b = dirichlet_partition(&y, 6, 0.5, &mut stream(9, 0, 0, "p")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(dirichlet_partition(&[0, 1], 2, 0.0, &mut stream(0, 0, 0, "p")).is_err());
    }
}
