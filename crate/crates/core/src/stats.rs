//! Order statistics shared by outlier handling and the synthetic generator.

/// Quantile by linear interpolation between closest ranks (R type 7):
/// `h = (n - 1) q`, result `x[⌊h⌋] + (h - ⌊h⌋)(x[⌊h⌋ + 1] - x[⌊h⌋])` on
/// sorted data. `sorted` must be non-empty and ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Q1, median, Q3 of the given values.
pub fn quartiles(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64, f64)> {
    let s = sorted(values);
    if s.is_empty() {
        return None;
    }
    Some((
        quantile_sorted(&s, 0.25),
        quantile_sorted(&s, 0.5),
        quantile_sorted(&s, 0.75),
    ))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quartiles() {
        assert_eq!(quartiles([1.0, 2.0, 3.0, 4.0, 100.0]), Some((2.0, 3.0, 4.0)));
        assert_eq!(quartiles([1.0, 2.0, 3.0, 4.0]), Some((1.75, 2.5, 3.25)));
        assert_eq!(quartiles([5.0]), Some((5.0, 5.0, 5.0)));
        assert_eq!(quartiles(std::iter::empty()), None);
    }

    #[test]
    fn spread() {
        assert_eq!(std_dev(&[2.0]), 0.0);
        assert_eq!(std_dev(&[1.0, 3.0]), 2f64.sqrt());
    }
}
