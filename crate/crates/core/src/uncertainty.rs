//! Pool selection for annotation: the records a model is least sure about.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// The `n` ids whose scores lie closest to 0.5, nearest first; ties go to
/// the smaller id.
pub fn select_uncertain(ids: &[String], scores: &[f64], n: usize) -> Result<Vec<String>> {
    if ids.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: ids.len(),
            found: scores.len(),
        });
    }
    if n > ids.len() {
        return Err(Error::param("n", alloc::format!("asks for {n} of {} records", ids.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        (scores[a] - 0.5)
            .abs()
            .total_cmp(&(scores[b] - 0.5).abs())
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    Ok(order.into_iter().take(n).map(|i| ids[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| String::from(*s)).collect()
    }

    #[test]
    fn picks_the_half_score() {
        assert_eq!(select_uncertain(&ids(&["a", "b", "c"]), &[0.9, 0.5, 0.1], 1).unwrap(), ids(&["b"]));
    }

    #[test]
    fn whole_pool_is_sorted_by_distance() {
        let got = select_uncertain(&ids(&["a", "b", "c", "d"]), &[0.95, 0.45, 0.7, 0.5], 4).unwrap();
        assert_eq!(got, ids(&["d", "b", "c", "a"]));
    }

    #[test]
    fn equal_scores_fall_back_to_id_order() {
        let got = select_uncertain(&ids(&["z", "m", "a", "q"]), &[0.3; 4], 2).unwrap();
        assert_eq!(got, ids(&["a", "m"]));
        // 0.25 and 0.75 are exactly equally far from 0.5.
        let got = select_uncertain(&ids(&["y", "x"]), &[0.75, 0.25], 2).unwrap();
        assert_eq!(got, ids(&["x", "y"]));
    }

    #[test]
    fn errors() {
        assert!(select_uncertain(&ids(&["a"]), &[0.5], 2).is_err());
        assert!(select_uncertain(&ids(&["a"]), &[f64::NAN], 1).is_err());
        assert!(select_uncertain(&ids(&["a"]), &[], 0).is_err());
        assert_eq!(select_uncertain(&[], &[], 0).unwrap(), vec![] as Vec<String>);
    }
}
