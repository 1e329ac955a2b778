use num::{BigInt, BigRational, Signed};

use super::QuasimodeError;

/// Exact test of `lambda_i / (2 pi h) - alpha_i / 4 in Z` on every cycle.
///
/// The Liouville class is passed as `q = lambda / (2 pi)` per cycle, so the
/// condition reads `q_i / h - alpha_i / 4 in Z` and involves rationals only.
pub fn maslov_admissible(
    liouville: &[BigRational],
    maslov: &[i64],
    h: &BigRational,
) -> Result<bool, QuasimodeError> {
    if !h.is_positive() {
        return Err(QuasimodeError::NonPositiveH);
    }
    if liouville.len() != maslov.len() {
        return Err(QuasimodeError::Dimension(format!(
            "{} Liouville coordinates but {} Maslov coordinates",
            liouville.len(),
            maslov.len()
        )));
    }
    let quarter = BigRational::new(BigInt::from(1), BigInt::from(4));
    Ok(liouville.iter().zip(maslov).all(|(q, &a)| {
        let t = q / h - &quarter * BigInt::from(a);
        t.is_integer()
    }))
}
