mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tm_composite::booleanize::{thermometer_encode, thermometer_thresholds};
use tm_composite::composite::{compose_predict, ClassSumMatrix, Normalization};
use tm_composite::datasets::ImageView;
use tm_composite::eval::confidence_curve;
use tm_composite::persist::{decode_model, encode_model, Tier};
use tm_composite::tm::noisy_xor;
use tm_composite::{BooleanTensor, BooleanizerSpec, Hyperparams, TmModel, Window};

fn therm(p: u8, levels: usize) -> Vec<bool> {
    let px = [p];
    let t = thermometer_encode(ImageView { height: 1, width: 1, channels: 1, pixels: &px }, levels);
    (0..levels).map(|k| t.get(0, 0, k)).collect()
}

fn matrix(classes: usize) -> impl Strategy<Value = Vec<Vec<i32>>> {
    prop::collection::vec(prop::collection::vec(-300i32..300, classes), 1..40)
}

fn labels_of(mats: &[ClassSumMatrix]) -> Vec<usize> {
    compose_predict(mats, &Normalization::Batch).unwrap().labels
}

proptest! {
    #[test]
    fn thermometer_is_monotone(levels in 1usize..=16, p in any::<u8>(), q in any::<u8>()) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let (a, b) = (therm(lo, levels), therm(hi, levels));
        for k in 0..levels {
            prop_assert!(!a[k] || b[k]);
            if k > 0 {
                prop_assert!(!a[k] || a[k - 1]);
            }
        }
        let t = thermometer_thresholds(levels);
        let expected = t.iter().filter(|&&th| lo as u32 >= th).count();
        prop_assert_eq!(a.iter().filter(|&&v| v).count(), expected);
    }

    #[test]
    fn single_member_composite_is_the_member(rows in matrix(5)) {
        let m = ClassSumMatrix::from_rows("a", 5, &rows).unwrap();
        prop_assert_eq!(labels_of(std::slice::from_ref(&m)), m.labels());
    }

    #[test]
    fn scaling_one_member_keeps_labels(a in matrix(4), seed in any::<u64>(), factor in 1i32..50) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<Vec<i32>> = a.iter().map(|r| r.iter().map(|_| rng.gen_range(-300..300)).collect()).collect();
        let ma = ClassSumMatrix::from_rows("a", 4, &a).unwrap();
        let mb = ClassSumMatrix::from_rows("b", 4, &b).unwrap();
        prop_assert_eq!(labels_of(&[ma.clone(), mb.clone()]), labels_of(&[ma.scaled(factor), mb]));
    }

    #[test]
    fn duplicate_member_keeps_labels(a in matrix(3)) {
        let m = ClassSumMatrix::from_rows("a", 3, &a).unwrap();
        prop_assert_eq!(labels_of(&[m.clone(), m.clone()]), labels_of(&[m]));
    }

    #[test]
    fn constant_member_is_neutral(a in matrix(6), c in -500i32..500) {
        let m = ClassSumMatrix::from_rows("a", 6, &a).unwrap();
        let flat = ClassSumMatrix::from_rows("flat", 6, &vec![vec![c; 6]; a.len()]).unwrap();
        prop_assert_eq!(labels_of(&[m.clone(), flat]), m.labels());
    }

    #[test]
    fn member_order_does_not_change_scores(a in matrix(3), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<Vec<i32>> = a.iter().map(|r| r.iter().map(|_| rng.gen_range(-50..50)).collect()).collect();
        let ma = ClassSumMatrix::from_rows("a", 3, &a).unwrap();
        let mb = ClassSumMatrix::from_rows("b", 3, &b).unwrap();
        let p = compose_predict(&[ma.clone(), mb.clone()], &Normalization::Batch).unwrap();
        let q = compose_predict(&[mb, ma], &Normalization::Batch).unwrap();
        for (x, y) in p.scores.iter().zip(&q.scores) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn class_sum_csv_roundtrip(a in matrix(7)) {
        let m = ClassSumMatrix::from_rows("a", 7, &a).unwrap();
        prop_assert_eq!(ClassSumMatrix::from_csv("a", &m.to_csv()).unwrap(), m);
    }

    #[test]
    fn curve_starts_at_overall_accuracy(conf in prop::collection::vec(-20i32..20, 1..200), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let correct: Vec<bool> = conf.iter().map(|_| rng.gen()).collect();
        let conf: Vec<f64> = conf.iter().map(|&c| c as f64).collect();
        let rows = confidence_curve(&conf, &correct);
        prop_assert_eq!(rows.len(), conf.len());
        let overall = correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64;
        prop_assert!((rows[0].accuracy_above - overall).abs() < 1e-12);
        for w in rows.windows(2) {
            prop_assert!(w[0].confidence <= w[1].confidence);
        }
        let last = rows.last().unwrap().accuracy_above;
        prop_assert!(last == 0.0 || last == 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn training_keeps_states_in_range_and_budget(seed in any::<u64>(), budget in 1usize..6, bits in 2usize..9) {
        let hyper = Hyperparams {
            clauses: 10,
            threshold: 8,
            specificity: 2.0,
            weighted: true,
            literal_budget: budget,
            state_bits: bits,
            ..Default::default()
        };
        let mut m = TmModel::new(hyper, BooleanizerSpec::thermometer(1), (1, 1, 2), 2).unwrap();
        let (xs, ys) = noisy_xor(200, 0.2, seed);
        for e in 0..3 {
            m.train_epoch(&xs, &ys, seed ^ e).unwrap();
        }
        let bank = m.bank();
        for c in 0..bank.clause_count() {
            prop_assert!(bank.included_count(c) <= budget);
            prop_assert!(bank.weight(c) >= 1);
            for l in 0..bank.literals() {
                let s = bank.state(c, l);
                prop_assert!(s >= 1 && s <= 1 << bits);
            }
        }
    }

    #[test]
    fn persisted_models_score_identically(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, (6, 6, 1), 3, Some(3), 3, 8);
        let back = decode_model(&encode_model(&m, Tier::Inference).unwrap()).unwrap();
        for _ in 0..10 {
            let x = random_tensor(&mut rng, (6, 6, 3), 0.5);
            prop_assert_eq!(m.class_sums(&x).unwrap(), back.class_sums(&x).unwrap());
        }
    }

    /// A clause made only of content literals fires wherever its pattern
    /// appears, independent of the offset.
    #[test]
    fn content_clauses_are_shift_equivariant(
        pattern in prop::collection::vec(any::<bool>(), 9),
        a in (0usize..6, 0usize..6),
        b in (0usize..6, 0usize..6),
    ) {
        let hyper = Hyperparams { clauses: 2, window: Some(Window::square(3)), ..Default::default() };
        let mut m = TmModel::new(hyper, BooleanizerSpec::thermometer(1), (8, 8, 1), 1).unwrap();
        let f = m.geometry().features();
        let bank = m.bank_mut();
        let bank_lits = bank.literals();
        let mut mask = vec![0u64; bank_lits.div_ceil(64)];
        for (i, &v) in pattern.iter().enumerate() {
            let l = if v { i } else { i + f };
            mask[l / 64] |= 1 << (l % 64);
        }
        bank.set_include_mask(0, &mask);
        let place = |(py, px): (usize, usize)| {
            let mut t = BooleanTensor::zeros(8, 8, 1);
            for y in 0..8 {
                for x in 0..8 {
                    t.set(y, x, 0, (y + x) % 2 == 0 && !(y >= py && y < py + 3 && x >= px && x < px + 3));
                }
            }
            for dy in 0..3 {
                for dx in 0..3 {
                    t.set(py + dy, px + dx, 0, pattern[dy * 3 + dx]);
                }
            }
            t
        };
        let sa = m.class_sums(&place(a)).unwrap();
        let sb = m.class_sums(&place(b)).unwrap();
        prop_assert_eq!(sa[0], 1);
        prop_assert_eq!(sb[0], 1);
    }
}
