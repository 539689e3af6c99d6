use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// All indices `0..n` followed by minority-class indices drawn with
/// replacement until both classes are equally represented.
pub fn balanced_indices<R: Rng>(labels: &[bool], rng: &mut R) -> Result<Vec<usize>> {
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let (minority, deficit) = if pos.len() < neg.len() {
        (&pos, neg.len() - pos.len())
    } else {
        (&neg, pos.len() - neg.len())
    };
    let mut out: Vec<usize> = (0..labels.len()).collect();
    out.extend((0..deficit).map(|_| minority[rng.random_range(0..minority.len())]));
    Ok(out)
}

/// Oversamples the minority class of feature rows; deterministic per seed.
pub fn balance_by_sampling(rows: &[FeatureVector], seed: u64) -> Result<Vec<FeatureVector>> {
    let labels: Vec<bool> = rows.iter().map(|r| r.label.is_pro()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(balanced_indices(&labels, &mut rng)?
        .into_iter()
        .map(|i| rows[i].clone())
        .collect())
}
