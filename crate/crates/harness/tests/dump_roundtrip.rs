use proptest::prelude::*;
use topnsigma::Logits;
use topnsigma_harness::dump::{read_binary, read_ndjson, write_binary, write_ndjson};

fn entry() -> impl Strategy<Value = f32> {
    prop_oneof![9 => -1.0e4..1.0e4_f32, 1 => Just(f32::NEG_INFINITY)]
}

fn rows() -> impl Strategy<Value = Vec<Vec<f32>>> {
    (1..40usize).prop_flat_map(|width| {
        prop::collection::vec(
            prop::collection::vec(entry(), width).prop_filter("one finite entry", |r| r.iter().any(|x| x.is_finite())),
            1..20,
        )
    })
}

fn to_logits(rows: &[Vec<f32>]) -> Vec<Logits> {
    rows.iter()
        .map(|r| Logits::new(r.iter().map(|x| *x as f64).collect()).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn binary_round_trip_is_exact(rows in rows()) {
        let logits = to_logits(&rows);
        let mut bytes = Vec::new();
        write_binary(&mut bytes, &logits).unwrap();
        let dump = read_binary(&bytes[..], "mem").unwrap();
        prop_assert_eq!(dump.vocab_size, rows[0].len());
        prop_assert_eq!(dump.rows, logits);
    }

    #[test]
    fn ndjson_round_trip_is_exact(rows in rows(), token in prop::option::of(0..40usize)) {
        let logits = to_logits(&rows);
        let tokens = vec![token; logits.len()];
        let mut bytes = Vec::new();
        write_ndjson(&mut bytes, &logits, &tokens).unwrap();
        let dump = read_ndjson(&bytes[..], "mem").unwrap();
        prop_assert_eq!(dump.rows, logits);
        prop_assert_eq!(dump.tokens, tokens);
    }
}
