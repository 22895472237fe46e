//! Small numeric helpers shared by the pipeline stages.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance (divides by n).
pub fn variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

pub fn std_dev(v: &[f64]) -> f64 {
    variance(v).sqrt()
}

/// Sample Pearson correlation, two-pass. Returns 0 when either side has
/// zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

pub fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

pub fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

pub fn mse(y: &[f64], pred: &[f64]) -> f64 {
    assert_eq!(y.len(), pred.len());
    if y.is_empty() {
        return 0.0;
    }
    y.iter()
        .zip(pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64
}

pub fn mae(y: &[f64], pred: &[f64]) -> f64 {
    assert_eq!(y.len(), pred.len());
    if y.is_empty() {
        return 0.0;
    }
    y.iter().zip(pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64
}

/// Coefficient of determination about the mean of `y`; `None` when `y` is
/// constant.
pub fn r2(y: &[f64], pred: &[f64]) -> Option<f64> {
    let m = mean(y);
    let sst: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if sst <= 0.0 {
        return None;
    }
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Some(1.0 - sse / sst)
}

/// Nearest-rank quantiles taken from the sorted data, so every returned
/// value is an observed point.
pub fn rank_quantiles(sorted: &[f64], count: usize) -> Vec<f64> {
    let n = sorted.len();
    (0..=count)
        .map(|k| {
            let idx = ((k as f64) * ((n - 1) as f64) / count as f64).round() as usize;
            sorted[idx.min(n - 1)]
        })
        .collect()
}

pub fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn dedup_sorted(v: &mut Vec<f64>) {
    v.dedup_by(|a, b| a == b);
}

/// Deterministic generator for a derived task seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for sub-task `index` of a computation seeded with `seed`.
pub fn task_seed(seed: u64, index: u64) -> u64 {
    seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// 64-bit FNV-1a hash.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_of_affine_pair_is_minus_one() {
        let x: Vec<f64> = (1..=30).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|c| 30.0 - c).collect();
        assert_eq!(pearson(&x, &y), -1.0);
        assert_eq!(pearson(&x, &[2.0; 30]), 0.0);
    }

    #[test]
    fn r2_of_mean_predictor_is_zero() {
        let y = [1.0, 2.0, 4.0];
        let m = mean(&y);
        assert!(r2(&y, &[m; 3]).unwrap().abs() < 1e-15);
        assert_eq!(r2(&[1.0, 1.0], &[1.0, 1.0]), None);
    }

    #[test]
    fn rank_quantiles_hit_data_points() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(rank_quantiles(&s, 4), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(rank_quantiles(&s, 1), vec![1.0, 5.0]);
    }
}
