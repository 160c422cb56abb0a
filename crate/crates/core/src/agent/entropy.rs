use crate::error::{Error, Result};

/// Floor on the k-NN distance inside the log.
pub const ENTROPY_EPS: f64 = 1e-6;

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Particle state-entropy reward: `ln` of each state's distance to its k-th
/// nearest neighbour among the other states of the batch.
pub fn intrinsic_entropy_reward(states: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    if k == 0 || states.len() <= k {
        return Err(Error::contract(format!(
            "k-NN entropy needs more than k = {k} states, got {}",
            states.len()
        )));
    }
    let n = states.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(&states[i], &states[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut row = Vec::with_capacity(n - 1);
    Ok((0..n)
        .map(|i| {
            row.clear();
            row.extend((0..n).filter(|&j| j != i).map(|j| dist[i * n + j]));
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.max(ENTROPY_EPS).ln()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicate_states_hit_the_floor() {
        let r = intrinsic_entropy_reward(&[vec![1.0, 2.0], vec![1.0, 2.0]], 1).unwrap();
        assert_eq!(r, vec![ENTROPY_EPS.ln(); 2]);
        assert!(intrinsic_entropy_reward(&vec![vec![0.0]; 3], 3).is_err());
    }

    #[test]
    fn grid_interior_gets_log_spacing() {
        let d = 0.25;
        let states: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * d]).collect();
        let r = intrinsic_entropy_reward(&states, 1).unwrap();
        for v in &r[1..9] {
            assert!((v - d.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_sorted_all_pairs_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let states: Vec<Vec<f64>> = (0..100).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        for k in [1, 5] {
            let got = intrinsic_entropy_reward(&states, k).unwrap();
            for (i, s) in states.iter().enumerate() {
                let mut ds: Vec<f64> = states
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, t)| s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                    .collect();
                ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                assert_eq!(got[i], ds[k - 1].max(1e-6).ln());
            }
        }
    }
}
