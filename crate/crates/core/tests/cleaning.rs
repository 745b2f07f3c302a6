use proptest::prelude::*;

use tabdx::preprocess::{
    clip_outliers_iqr, drop_sparse_records, impute_random_forest, modal_fraction, profile_missingness,
    prune_uniform_features, run_pipeline, ImputeConfig, PipelineConfig,
};
use tabdx::synth::{generate, inject_missing, SynthConfig};
use tabdx::table::{Column, ColumnKind, DataTable, Values};

/// Leaf mean over observed rows whose predictor equals the query value: the
/// prediction of a single fully grown tree on a duplicated predictor.
fn one_tree_oracle(x: &[f64], y: &[Option<f64>], query: f64) -> f64 {
    let group: Vec<f64> = x
        .iter()
        .zip(y)
        .filter(|(v, t)| **v == query && t.is_some())
        .map(|(_, t)| t.unwrap())
        .collect();
    group.iter().sum::<f64>() / group.len() as f64
}

#[test]
fn single_cell_imputation_matches_one_tree_oracle() {
    let x = [1.0, 1.0, 2.0, 2.0, 2.0, 3.0];
    let y = [Some(10.0), Some(12.0), Some(20.0), Some(22.0), None, Some(30.0)];
    let t = DataTable::new(vec![
        Column::numeric("x", x.map(Some).to_vec()),
        Column::numeric("x_copy", x.map(Some).to_vec()),
        Column::numeric("y", y.to_vec()),
    ])
    .unwrap();
    let cfg = ImputeConfig {
        n_trees: 1,
        min_samples_leaf: 1,
        bootstrap: false,
        ..Default::default()
    };
    let out = impute_random_forest(&t, &cfg, 9).unwrap();
    let got = out.require("y").unwrap().as_numeric().unwrap()[4].unwrap();
    assert_eq!(got, one_tree_oracle(&x, &y, 2.0));
    assert_eq!(got, 21.0);
}

#[test]
fn imputation_preserves_observed_cells_and_fills_the_rest() {
    let t = generate(&SynthConfig {
        n_rows: 400,
        ..Default::default()
    })
    .unwrap();
    let (masked, mask) = inject_missing(&t, 0.15, 5).unwrap();
    let out = impute_random_forest(&masked, &ImputeConfig::default(), 5).unwrap();
    assert_eq!(out.total_missing(), 0);
    for (before, after) in masked.columns().iter().zip(out.columns()) {
        for r in 0..masked.row_count() {
            if before.values.is_missing(r) {
                assert!(mask.iter().any(|c| c.row == r && c.column == before.name));
                continue;
            }
            match (&before.values, &after.values) {
                (Values::Numeric(a), Values::Numeric(b)) => assert_eq!(a[r], b[r]),
                (Values::Text(a), Values::Text(b)) => assert_eq!(a[r], b[r]),
                _ => panic!("column {} changed type", before.name),
            }
        }
    }
    assert_eq!(impute_random_forest(&masked, &ImputeConfig::default(), 5).unwrap(), out);
}

#[test]
fn pipeline_output_is_complete_and_fenced() {
    let t = generate(&SynthConfig {
        n_rows: 800,
        missing_rate: 0.08,
        outlier_rate: 0.02,
        ..Default::default()
    })
    .unwrap();
    let out = run_pipeline(&t, &PipelineConfig::default()).unwrap();
    assert_eq!(out.table.total_missing(), 0);
    assert!(out.imputed_cells > 0);
    assert!(out
        .table
        .columns()
        .iter()
        .filter(|c| c.kind != ColumnKind::Identifier)
        .all(|c| c.as_numeric().is_some()));
    for s in &out.outliers.columns {
        for v in out.table.require(&s.column).unwrap().as_numeric().unwrap().iter().flatten() {
            assert!(*v >= s.lower_fence && *v <= s.upper_fence);
        }
    }
    let pruned: Vec<&str> = out.prune.pruned.iter().map(|p| p.column.as_str()).collect();
    assert_eq!(pruned, ["PTRACCAT", "PTETHCAT"]);
}

#[test]
fn pipeline_on_clean_input_changes_only_encoding() {
    let t = generate(&SynthConfig {
        n_rows: 200,
        ..Default::default()
    })
    .unwrap();
    let out = run_pipeline(&t, &PipelineConfig::default()).unwrap();
    assert_eq!(out.imputed_cells, 0);
    assert_eq!(out.dropped_records, 0);
    for name in ["CDRSB", "AGE", "ICV"] {
        let before = t.require(name).unwrap().as_numeric().unwrap();
        let after = out.table.require(name).unwrap().as_numeric().unwrap();
        let report = out.outliers.get(name).unwrap();
        let changed = before.iter().zip(after).filter(|(a, b)| a != b).count();
        assert_eq!(changed, report.replaced_count);
    }
}

#[test]
fn pipeline_errors_name_the_stage() {
    let t = DataTable::new(vec![
        Column::numeric("a", vec![Some(1.0), None]),
        Column::numeric("b", vec![None, Some(1.0)]),
        Column::categorical("DX", vec![Some("CN".into()), Some("AD".into())]).with_kind(ColumnKind::Label),
    ])
    .unwrap();
    let cfg = PipelineConfig {
        max_missing: 5,
        ..Default::default()
    };
    let bad_label = t.replace_column(
        Column::categorical("DX", vec![Some("CN".into()), Some("??".into())]).with_kind(ColumnKind::Label),
    );
    let err = run_pipeline(&bad_label.unwrap(), &cfg).unwrap_err();
    assert!(err.to_string().starts_with("encode:"), "{err}");
    let bad_cfg = PipelineConfig {
        dominance_threshold: 1.5,
        ..Default::default()
    };
    assert!(run_pipeline(&t, &bad_cfg).unwrap_err().is_config());
}

fn table_strategy() -> impl Strategy<Value = DataTable> {
    (1usize..30, 1usize..6).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(prop::collection::vec(prop::option::weighted(0.7, -5.0f64..5.0), n), p),
            prop::collection::vec(prop::option::weighted(0.8, 0usize..3), n),
        )
            .prop_map(|(cols, cats)| {
                let mut columns: Vec<Column> = cols
                    .into_iter()
                    .enumerate()
                    .map(|(j, v)| Column::numeric(format!("n{j}"), v))
                    .collect();
                columns.push(Column::categorical(
                    "cat",
                    cats.into_iter().map(|c| c.map(|k| ["a", "b", "c"][k].to_string())).collect(),
                ));
                DataTable::new(columns).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn row_and_column_views_agree(t in table_strategy()) {
        let p = profile_missingness(&t);
        let by_col: usize = p.columns.iter().map(|c| c.missing).sum();
        prop_assert_eq!(p.row_missing.iter().sum::<usize>(), by_col);
        for c in &p.columns {
            prop_assert!((0.0..=1.0).contains(&c.fraction));
        }
    }

    #[test]
    fn sparse_records_bound_holds(t in table_strategy(), k in 0usize..4) {
        let out = drop_sparse_records(&t, k);
        prop_assert!(profile_missingness(&out).row_missing.iter().all(|&m| m <= k));
        prop_assert_eq!(drop_sparse_records(&out, k), out);
    }

    #[test]
    fn pruned_output_respects_threshold(t in table_strategy(), th in 0.3f64..0.95) {
        let (out, report) = prune_uniform_features(&t, th).unwrap();
        for c in out.columns().iter().filter(|c| c.kind == ColumnKind::Categorical) {
            if let Some((_, f)) = modal_fraction(c) {
                prop_assert!(f <= th);
            }
        }
        prop_assert!(report.pruned.iter().all(|p| p.fraction > th));
    }

    #[test]
    fn clipping_respects_reported_fences(t in table_strategy()) {
        let (out, report) = clip_outliers_iqr(&t).unwrap();
        for s in &report.columns {
            prop_assert_eq!(s.iqr, s.q3 - s.q1);
            prop_assert!(s.iqr >= 0.0);
            for v in out.require(&s.column).unwrap().as_numeric().unwrap().iter().flatten() {
                prop_assert!(*v >= s.lower_fence && *v <= s.upper_fence);
            }
        }
    }
}
