use labelcal_core::{ConfusionMatrix, LabelGrid, LabelSpace, PredictionMap};
use proptest::prelude::*;

const IGNORE: u8 = 255;

/// (C, pixel pairs of (gt, pred)) with some ignored ground truth.
fn arb_pairs() -> impl Strategy<Value = (usize, Vec<(u8, u8)>)> {
    (1usize..=6).prop_flat_map(|c| {
        let gt = prop_oneof![6 => 0..c as u8, 1 => Just(IGNORE)];
        (Just(c), prop::collection::vec((gt, 0..c as u8), 0..60))
    })
}

fn tally(c: usize, pairs: &[(u8, u8)]) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::with_classes(c, IGNORE);
    let n = pairs.len();
    let gt = LabelGrid::new(n, 1, pairs.iter().map(|p| p.0).collect()).unwrap();
    let pred = PredictionMap::new(
        c,
        LabelGrid::new(n, 1, pairs.iter().map(|p| p.1).collect()).unwrap(),
    )
    .unwrap();
    cm.update(&pred, &gt).unwrap();
    cm
}

/// IoU from pixel sets: |{gt=c} ∩ {pred=c}| / |{gt=c} ∪ {pred=c}| over non-ignored pixels.
fn brute_iou(pairs: &[(u8, u8)], c: u8) -> Option<f64> {
    let kept = pairs.iter().filter(|p| p.0 != IGNORE);
    let (mut inter, mut union) = (0u32, 0u32);
    for &(g, p) in kept {
        if g == c && p == c {
            inter += 1;
        }
        if g == c || p == c {
            union += 1;
        }
    }
    (union > 0).then(|| inter as f64 / union as f64)
}

proptest! {
    #[test]
    fn conservation((c, pairs) in arb_pairs()) {
        let cm = tally(c, &pairs);
        prop_assert_eq!(cm.pixels_consumed(), pairs.len() as u64);
        prop_assert_eq!(cm.ignored(), pairs.iter().filter(|p| p.0 == IGNORE).count() as u64);
    }

    #[test]
    fn order_and_merge_invariance((c, pairs) in arb_pairs(), cut in 0.0f64..=1.0) {
        let whole = tally(c, &pairs);
        let mut reversed: Vec<_> = pairs.clone();
        reversed.reverse();
        prop_assert_eq!(&tally(c, &reversed), &whole);

        let k = (cut * pairs.len() as f64) as usize;
        let mut merged = tally(c, &pairs[k..]);
        merged.merge(&tally(c, &pairs[..k])).unwrap();
        prop_assert_eq!(&merged, &whole);
    }

    #[test]
    fn iou_and_miou_match_brute_force((c, pairs) in arb_pairs()) {
        let cm = tally(c, &pairs);
        let mut defined = Vec::new();
        for k in 0..c {
            let got = cm.iou(k).unwrap();
            let want = brute_iou(&pairs, k as u8);
            prop_assert_eq!(got, want);
            if let Some(v) = got {
                prop_assert!((0.0..=1.0).contains(&v));
                defined.push(v);
            }
        }
        let all: Vec<usize> = (0..c).collect();
        let mean = cm.miou_over(&all).unwrap();
        if defined.is_empty() {
            prop_assert!(mean.is_none());
        } else {
            let want = defined.iter().sum::<f64>() / defined.len() as f64;
            prop_assert!((mean.unwrap() - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn worked_subset_means() {
    let space = LabelSpace::new(
        vec!["a".into(), "b".into(), "c".into()],
        IGNORE,
        [("ab".to_owned(), vec![0, 1]), ("bc".to_owned(), vec![1, 2])].into(),
    )
    .unwrap();
    let mut cm = ConfusionMatrix::new(&space);
    let gt = LabelGrid::new(2, 1, vec![0, 1]).unwrap();
    cm.update(
        &PredictionMap::new(3, LabelGrid::new(2, 1, vec![1, 1]).unwrap()).unwrap(),
        &gt,
    )
    .unwrap();
    assert_eq!(cm.count(0, 1), 1);
    assert_eq!(cm.count(1, 1), 1);
    assert_eq!(cm.iou(0).unwrap(), Some(0.0));
    assert_eq!(cm.iou(1).unwrap(), Some(0.5));
    assert_eq!(cm.iou(2).unwrap(), None);
    assert_eq!(cm.miou(&space, "ab").unwrap(), 0.25);
    // class 2 is undefined and left out of the mean
    assert_eq!(cm.miou(&space, "bc").unwrap(), 0.5);
    assert!(cm.miou(&space, "nope").is_err());
}
