//! Diversity subsampling of a fingerprint pool dominated by one dense
//! cluster, compared with a uniform random subset of the same size.

use ontoloss::datagen::{clustered_fingerprints, diversity_subsample, tanimoto, Fingerprint};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_similarity(pool: &[Fingerprint], picks: &[usize]) -> ontoloss::Result<f64> {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (n, &i) in picks.iter().enumerate() {
        for &j in &picks[n + 1..] {
            total += tanimoto(&pool[i], &pool[j])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

fn main() -> ontoloss::Result<()> {
    let mut pool = clustered_fingerprints(1, 1500, 256, 0.05, 1);
    pool.extend(clustered_fingerprints(10, 50, 256, 0.05, 2));

    let picked = diversity_subsample(&pool, 1000, 200, 7)?;
    let random = sample(&mut ChaCha8Rng::seed_from_u64(7), pool.len(), picked.len()).into_vec();
    let from_dense = picked.iter().filter(|&&i| i < 1500).count();

    println!("pool {} fingerprints, kept {}", pool.len(), picked.len());
    println!(
        "kept from the dense cluster: {from_dense} ({:.0}% of the pool is dense)",
        1500.0 / pool.len() as f64 * 100.0
    );
    println!(
        "mean pairwise Tanimoto, diverse: {:.4}",
        mean_similarity(&pool, &picked)?
    );
    println!(
        "mean pairwise Tanimoto, random:  {:.4}",
        mean_similarity(&pool, &random)?
    );
    Ok(())
}
