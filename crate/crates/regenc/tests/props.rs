//! Property tests for the serialization boundary and data-handling
//! invariants.

use proptest::prelude::*;
use regenc::container::{read_container, write_container, Container};
use regenc::data::{self, DatasetSpec, RawTable};
use regenc::{Rng, Tensor};

fn arb_tensor() -> impl Strategy<Value = (String, Tensor)> {
    (
        "[a-z][a-z0-9_.]{0,12}",
        prop::collection::vec(1usize..5, 1..3),
    )
        .prop_flat_map(|(name, shape)| {
            let numel: usize = shape.iter().product();
            (
                Just(name),
                Just(shape),
                prop::collection::vec(
                    prop_oneof![
                        any::<f64>().prop_filter("finite", |v| v.is_finite()),
                        Just(0.0),
                        Just(-0.0),
                        Just(f64::MIN_POSITIVE),
                    ],
                    numel..=numel,
                ),
            )
        })
        .prop_map(|(name, shape, data)| (name, Tensor::new(shape, data).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn container_roundtrip_preserves_bits(
        tensors in prop::collection::vec(arb_tensor(), 0..4),
        kind in "[a-z]{1,8}",
    ) {
        let c = Container { kind, meta: serde_json::json!({"note": 1}), tensors };
        let mut buf = Vec::new();
        write_container(&mut buf, &c).unwrap();
        let back = read_container(buf.as_slice()).unwrap();
        prop_assert_eq!(back.kind, c.kind);
        prop_assert_eq!(back.tensors.len(), c.tensors.len());
        for ((na, ta), (nb, tb)) in back.tensors.iter().zip(&c.tensors) {
            prop_assert_eq!(na, nb);
            prop_assert_eq!(ta.shape(), tb.shape());
            for (x, y) in ta.data().iter().zip(tb.data()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn container_reader_never_panics_on_mutations(
        flips in prop::collection::vec((0usize..256, any::<u8>()), 0..8),
    ) {
        // corrupt a valid container and require a clean parse or a clean error
        let spec = regenc::nn::MlpSpec::new(2, vec![3], 1);
        let model = regenc::nn::MlpModel::init(&spec, &mut Rng::from_seed(1)).unwrap();
        let mut buf = Vec::new();
        write_container(&mut buf, &regenc::container::mlp_to_container(&model).unwrap()).unwrap();
        for (pos, byte) in flips {
            let i = pos % buf.len();
            buf[i] = byte;
        }
        let _ = read_container(buf.as_slice());
    }

    #[test]
    fn scaler_roundtrip_within_1e12(vals in prop::collection::vec(-1e6f64..1e6, 2..40)) {
        let rows: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v]).collect();
        let scaler = data::MinMaxScaler::fit(&rows, &[0]);
        let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        for &v in &vals {
            let rt = scaler.unscale_value(0, scaler.scale_value(0, v));
            prop_assert!((rt - v).abs() <= 1e-12 * spread.max(1.0));
        }
    }

    #[test]
    fn batches_partition_rows(n in 2usize..40, batch in 1usize..10, shuffle in any::<bool>()) {
        let table = RawTable {
            headers: vec!["x".into(), "y".into()],
            rows: (0..n + 20).map(|i| vec![i as f64, i as f64 * 0.5]).collect(),
        };
        let spec = DatasetSpec {
            name: "p".into(),
            source_path: std::path::PathBuf::new(),
            target_columns: vec!["y".into()],
            split_counts: (n, 10, 10),
            batch_size: batch,
            shuffle_seed: 7,
        };
        let ds = data::prepare(&spec, &table).unwrap();
        let mut rng = Rng::from_seed(0);
        let got = data::batches(&ds, data::Split::Train, &mut rng, shuffle);
        let total: usize = got.iter().map(|(x, _)| x.rows()).sum();
        prop_assert_eq!(total, n);
        // identify rows by their unscaled x value; each appears exactly once
        let mut ids: Vec<i64> = got
            .iter()
            .flat_map(|(x, _)| {
                (0..x.rows())
                    .map(|r| ds.feature_scaler.unscale_value(0, x.at(r, 0)).round() as i64)
                    .collect::<Vec<_>>()
            })
            .collect();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
    }

    #[test]
    fn dataset_spec_parser_never_panics(text in ".{0,400}") {
        let _ = DatasetSpec::parse_str(&text, None);
    }

    #[test]
    fn grid_parser_never_panics(text in ".{0,200}") {
        let _ = regenc::pipeline::parse_grid(&text);
    }

    #[test]
    fn csv_reader_never_panics(text in ".{0,400}") {
        let _ = data::read_table_csv(text.as_bytes());
    }
}
