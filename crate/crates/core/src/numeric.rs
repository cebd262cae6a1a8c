//! Order-independent accumulation.
//!
//! Error signals reaching a vertex from several parents are summed after
//! sorting each component, so the result depends only on the multiset of
//! contributions. Inserting identity vertices permutes the order in which
//! contributions arrive but never their values, which keeps BP bit-identical
//! across levelling.

/// Sums contributions component-wise in a canonical order.
pub fn canonical_sum(contribs: &[Vec<f64>], dim: usize) -> Vec<f64> {
    match contribs.len() {
        0 => vec![0.0; dim],
        1 => contribs[0].clone(),
        _ => {
            let mut column = Vec::with_capacity(contribs.len());
            (0..dim)
                .map(|k| {
                    column.clear();
                    column.extend(contribs.iter().map(|c| c[k]));
                    column.sort_by(f64::total_cmp);
                    column.iter().sum()
                })
                .collect()
        }
    }
}

pub fn l2_norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0)
}
