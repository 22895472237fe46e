use proptest::prelude::*;

use rulxai::diagnose::conformal_quantile;
use rulxai::explain::shapley_values;
use rulxai::feature_select::distance_correlation_pair;
use rulxai::ingest::{parse_records, split_mask, RecordFormat, SplitSpec};
use rulxai::models::{fit, ModelSpec, Predictor, TreeSpec};
use rulxai::ingest::TabularDataset;
use rulxai::{stats, Matrix};

struct Quadratic;

impl Predictor for Quadratic {
    fn n_features(&self) -> usize {
        3
    }

    fn predict_row(&self, r: &[f64]) -> f64 {
        r[0] * r[1] - r[2] * r[2] + 0.5 * r[0]
    }
}

fn rows(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, d), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_mask_has_exact_train_count(n in 2usize..400, ratio in 0.05f64..0.95, seed in any::<u64>()) {
        let mask = split_mask(n, SplitSpec { test_ratio: ratio, seed }).unwrap();
        prop_assert_eq!(mask.len(), n);
        prop_assert_eq!(mask.iter().filter(|t| **t).count(), rulxai::ingest::train_count(n, ratio));
        prop_assert_eq!(mask.clone(), split_mask(n, SplitSpec { test_ratio: ratio, seed }).unwrap());
    }

    #[test]
    fn shapley_values_are_efficient(x in prop::collection::vec(-3.0f64..3.0, 3), bg in rows(12, 3)) {
        let bg = Matrix::from_rows(&bg).unwrap();
        let s = shapley_values(&Quadratic, &x, &bg, 15).unwrap();
        let total = s.base + s.phi.iter().sum::<f64>();
        prop_assert!((total - Quadratic.predict_row(&x)).abs() < 1e-9);
    }

    #[test]
    fn dcor_is_bounded_and_symmetric(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = distance_correlation_pair(&x, &y);
        let b = distance_correlation_pair(&y, &x);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn conformal_quantile_is_a_score(scores in prop::collection::vec(0.0f64..10.0, 1..200), alpha in 0.01f64..0.5) {
        match conformal_quantile(&scores, alpha) {
            Some(q) => {
                let below = scores.iter().filter(|s| **s <= q).count() as f64;
                prop_assert!(scores.contains(&q));
                prop_assert!(below >= (1.0 - alpha) * (scores.len() as f64 + 1.0) - 1.0 - 1e-9);
            }
            None => prop_assert!(((scores.len() as f64 + 1.0) * (1.0 - alpha)).ceil() as usize > scores.len()),
        }
    }

    #[test]
    fn tree_predictions_stay_in_target_range(data in rows(40, 3), seed in any::<u64>()) {
        let y: Vec<f64> = data.iter().map(|r| r[0].sin() + r[1]).collect();
        let mask = split_mask(data.len(), SplitSpec { test_ratio: 0.25, seed }).unwrap();
        let names = vec!["a".to_string(), "b".into(), "c".into()];
        let ds = TabularDataset::new(names, Matrix::from_rows(&data).unwrap(), y, mask).unwrap();
        let model = fit(&ModelSpec::Tree(TreeSpec::default()), &ds).unwrap();
        let (lo, hi) = stats::min_max(&ds.train_y());
        for p in model.predict(ds.x()).unwrap() {
            prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn whitespace_round_trip(cycles in 1u32..30, offset in -100.0f64..100.0) {
        let text: String = (1..=cycles)
            .map(|c| {
                let vals: Vec<String> = (0..24).map(|k| format!("{:.4}", offset + k as f64 + c as f64 * 0.01)).collect();
                format!("1 {c} {}\n", vals.join(" "))
            })
            .collect();
        let table = parse_records(&text, RecordFormat::Whitespace).unwrap();
        prop_assert_eq!(table.len(), cycles as usize);
        let again = parse_records(&table.to_whitespace(), RecordFormat::Whitespace).unwrap();
        prop_assert_eq!(table.records(), again.records());
    }
}
