use super::*;
use crate::autodiff::{finite_diff_check, Tape, Var};
use proptest::prelude::*;

#[test]
fn rgb_examples() {
    let c = vec![[0.3, 0.5, 0.7]; 4];
    assert_eq!(loss_rgb(&c, &c, &[1.0; 4]).unwrap(), 0.0);
    let i = vec![[0.0; 3]; 4];
    assert_eq!(loss_rgb(&c, &i, &[0.0; 4]).unwrap(), 0.0);
    let one = [[0.1, 0.2, 0.2]];
    let v = loss_rgb(&one, &[[0.0; 3]], &[1.0]).unwrap();
    assert!((v - 0.09).abs() < 1e-15, "{v}");
    assert!(matches!(
        loss_rgb(&one, &[], &[1.0]),
        Err(ObjectiveError::Dimension { .. })
    ));
}

#[test]
fn iou_examples() {
    let m = [0.0, 1.0, 1.0, 0.0];
    assert_eq!(loss_mask_iou(&m, &m).unwrap(), 0.0);
    assert_eq!(loss_mask_iou(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
    assert_eq!(loss_mask_iou(&[0.5; 9], &[1.0; 9]).unwrap(), 0.5);
    assert_eq!(loss_mask_iou(&[0.0; 3], &[0.0; 3]).unwrap(), 0.0);
    assert!(loss_mask_iou(&[0.0; 3], &[0.0; 2]).is_err());
}

#[test]
fn pose_and_scale_examples() {
    let zero = vec![vec![[0.0; 3]; 3]; 2];
    assert_eq!(loss_pose(&zero), 0.0);
    let mut one = zero.clone();
    one[1][2][1] = 0.3;
    assert!((loss_pose(&one) - 0.09).abs() < 1e-15);
    // The global row is not penalized.
    one[0][0] = [1.0, 2.0, 3.0];
    assert!((loss_pose(&one) - 0.09).abs() < 1e-15);

    assert_eq!(loss_scale(&[[0.0; 4]; 3]), 0.0);
    assert!((loss_scale(&[[0.0, 0.0, 0.3, 0.0]]) - 0.09).abs() < 1e-15);
}

#[test]
fn scale_matches_naive_sum() {
    let beta: Vec<[f64; 4]> = (0..7)
        .map(|g| [0, 1, 2, 3].map(|c| ((g * 4 + c) as f64 * 0.731).sin()))
        .collect();
    let mut naive = 0.0;
    for row in &beta {
        for x in row {
            naive += x * x;
        }
    }
    assert!((loss_scale(&beta) - naive).abs() < 1e-12);
}

#[test]
fn scale_axes_examples() {
    assert_eq!(loss_scale_axes(&[[0.4, 0.2, 0.2, 0.2]]), 0.0);
    assert_eq!(loss_scale_axes(&[[0.7, 1.0, 0.0, 0.0]]), 1.0);
    assert_eq!(loss_scale_axes(&[[0.7, 1.0, 1.0, 0.0]]), 1.0);
}

#[test]
fn scale_smooth_examples() {
    assert_eq!(
        loss_scale_smooth(&[[0.2; 4]; 3], &[None, Some(0), Some(1)]).unwrap(),
        0.0
    );
    let chain = [[0.0; 4], [1.0, 0.0, 0.0, 0.0]];
    assert_eq!(loss_scale_smooth(&chain, &[None, Some(0)]).unwrap(), 1.0);
    let star = [
        [0.0; 4],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
    ];
    assert_eq!(
        loss_scale_smooth(&star, &[None, Some(0), Some(0), Some(0)]).unwrap(),
        3.0
    );
    assert!(loss_scale_smooth(&star, &[None]).is_err());
}

#[test]
fn temporal_examples() {
    let constant = vec![vec![0.3, -1.0]; 5];
    assert_eq!(loss_smooth_temporal(&constant).unwrap(), 0.0);
    let p = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
    assert_eq!(loss_smooth_temporal(&p).unwrap(), 1.0);
    let s = 0.07;
    let ramp: Vec<Vec<f64>> = (0..9).map(|t| vec![t as f64 * s]).collect();
    assert!((loss_smooth_temporal(&ramp).unwrap() - s * s).abs() < 1e-15);
    assert_eq!(loss_smooth_temporal(&p[..1]).unwrap(), 0.0);
}

#[test]
fn direction_examples() {
    let level = vec![[0.0; 3]; 3];
    let along: Vec<[f64; 3]> = (0..3).map(|t| [0.0, 0.0, t as f64]).collect();
    assert_eq!(loss_direction(&level, &along).unwrap(), 0.0);
    let back: Vec<[f64; 3]> = (0..3).map(|t| [0.0, 0.0, -(t as f64)]).collect();
    assert_eq!(loss_direction(&level, &back).unwrap(), 4.0);
    let side: Vec<[f64; 3]> = (0..3).map(|t| [t as f64 * 0.5, 0.0, 0.0]).collect();
    assert_eq!(loss_direction(&level, &side).unwrap(), 2.0);
    // Heading rotated a quarter turn about +y now points along +x.
    let turned = vec![[0.0, std::f64::consts::FRAC_PI_2, 0.0]; 3];
    assert!(loss_direction(&turned, &side).unwrap().abs() < 1e-15);
    // Stationary frames are skipped.
    assert_eq!(loss_direction(&level, &[[0.0; 3]; 3]).unwrap(), 0.0);
}

#[test]
fn drift_examples() {
    let rates = DriftRates::default();
    assert_eq!(vertical_drift([0.0; 3], &rates), 0.0);
    // Negative rotation about x tips the nose up.
    assert!((vertical_drift([-0.3, 0.0, 0.0], &rates) - 0.132).abs() < 1e-15);
    assert!((vertical_drift([0.3, 0.0, 0.0], &rates) + 0.044).abs() < 1e-15);
    // Inside the level band.
    assert_eq!(vertical_drift([-5e-4, 0.0, 0.0], &rates), 0.0);
    let off = drift_offsets(
        &[[-0.3, 0.0, 0.0], [-0.3, 0.0, 0.0], [0.3, 0.0, 0.0]],
        &rates,
    );
    assert_eq!(off[0], 0.0);
    assert!((off[1] - 0.132).abs() < 1e-15 && (off[2] - 0.088).abs() < 1e-15);
}

#[test]
fn direction_gate() {
    assert!(!direction_informative(
        &[Some([10.0, 10.0]), Some([11.0, 11.0]), None],
        2.0
    ));
    assert!(direction_informative(
        &[None, Some([10.0, 10.0]), Some([10.0, 12.5])],
        2.0
    ));
    assert!(!direction_informative(&[None, None], 2.0));
}

#[test]
fn total_examples() {
    let w = LossWeights::default();
    assert_eq!(total_loss(&LossTerms::<f64>::zero(), &w).unwrap(), 0.0);
    let mut t = LossTerms::<f64>::zero();
    t[Term::Rgb] = 2.0;
    assert_eq!(total_loss(&t, &w).unwrap(), 2.0);
    let mut t = LossTerms::<f64>::zero();
    t[Term::SmoothPos] = 0.01;
    assert!((total_loss(&t, &w).unwrap() - 5.0).abs() < 1e-12);
    t[Term::ScaleAxes] = f64::NAN;
    assert_eq!(
        total_loss(&t, &w),
        Err(ObjectiveError::NonFinite("scale_axes"))
    );
}

#[test]
fn default_weights_match_table() {
    let w = LossWeights::default();
    let expect = [1.0, 1.0, 2.0, 0.001, 0.1, 5.0, 500.0, 500.0, 500.0, 0.1];
    assert_eq!(Term::ALL.map(|t| w.weight(t)), expect);
    assert_eq!(w.invalid(), None);
    let bad: LossWeights = serde_json::from_str(r#"{"direction": -1.0}"#).unwrap();
    assert_eq!(bad.invalid(), Some(Term::Direction));
    assert!(serde_json::from_str::<LossWeights>(r#"{"dir": 0.0}"#).is_err());
}

fn seq(n: usize, seed: f64) -> Vec<f64> {
    (0..n).map(|i| ((i as f64 + 1.0) * seed).sin()).collect()
}

// Each term evaluated on the tape agrees with central differences.
#[test]
fn term_gradients_match_finite_differences() {
    type F = for<'t> fn(&[Var<'t>]) -> Var<'t>;
    let cases: Vec<(&str, usize, F)> = vec![
        ("rgb", 12, |x| {
            let c: Vec<[Var; 3]> = x.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            loss_rgb(&c, &[[0.2, 0.4, 0.9]; 4], &[1.0, 0.0, 1.0, 1.0]).unwrap()
        }),
        ("iou", 6, |x| {
            let soft: Vec<Var> = x.iter().map(|&v| v * v).collect();
            loss_mask_iou(&soft, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap()
        }),
        ("pose", 9, |x| {
            loss_pose(&[x.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()])
        }),
        ("axes", 8, |x| {
            loss_scale_axes(&[[x[0], x[1], x[2], x[3]], [x[4], x[5], x[6], x[7]]])
        }),
        ("smooth", 8, |x| {
            loss_scale_smooth(
                &[[x[0], x[1], x[2], x[3]], [x[4], x[5], x[6], x[7]]],
                &[None, Some(0)],
            )
            .unwrap()
        }),
        ("temporal", 9, |x| {
            loss_smooth_temporal(&x.chunks(3).map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap()
        }),
        ("direction", 18, |x| {
            let g: Vec<[Var; 3]> = x[..9].chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            let p: Vec<[Var; 3]> = x[9..].chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            loss_direction(&g, &p).unwrap()
        }),
    ];
    for (name, n, f) in cases {
        let x0 = seq(n, 0.917);
        let tape = Tape::new();
        let v = tape.vars(&x0);
        let out = f(&v);
        let g = tape.gradient(&[out]).unwrap().wrt_all(&v);
        let report = finite_diff_check(
            |x| {
                let c: Vec<Var> = x.iter().map(|&y| Var::constant(y)).collect();
                f(&c).value()
            },
            &x0,
            &g,
            1e-4,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-3, "{name}: {report:?}");
        assert!(report.compared > 0, "{name}");
    }
}

fn mask_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..64).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(prop::bool::ANY.prop_map(f64::from), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn iou_is_bounded((soft, obs) in mask_pair()) {
        let l = loss_mask_iou(&soft, &obs).unwrap();
        prop_assert!((0.0..=1.0).contains(&l), "{l}");
    }
}

proptest! {
    #[test]
    fn iou_zero_for_matching_binary(mask in prop::collection::vec(prop::bool::ANY.prop_map(f64::from), 1..40)) {
        prop_assert_eq!(loss_mask_iou(&mask, &mask).unwrap(), 0.0);
    }

    #[test]
    fn losses_are_nonnegative(x in prop::collection::vec(-2.0f64..2.0, 24)) {
        let beta: Vec<[f64; 4]> = x.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
        prop_assert!(loss_scale(&beta) >= 0.0);
        prop_assert!(loss_scale_axes(&beta) >= 0.0);
        prop_assert!(loss_scale_smooth(&beta, &[None, Some(0), Some(1), Some(1), Some(0), Some(4)]).unwrap() >= 0.0);
        let series: Vec<Vec<f64>> = x.chunks(3).map(|c| c.to_vec()).collect();
        prop_assert!(loss_smooth_temporal(&series).unwrap() >= 0.0);
        let g: Vec<[f64; 3]> = x[..12].chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        let p: Vec<[f64; 3]> = x[12..].chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        prop_assert!(loss_direction(&g, &p).unwrap() >= -1e-15);
    }

    #[test]
    fn axes_ignore_common_offset(row in prop::array::uniform4(-1.0f64..1.0), c in -1.0f64..1.0) {
        // Dyadic offsets keep the comparison exact.
        let c = (c * 64.0).round() / 64.0;
        let row = row.map(|x| (x * 1024.0).round() / 1024.0);
        let shifted = [row[0], row[1] + c, row[2] + c, row[3] + c];
        prop_assert_eq!(loss_scale_axes(&[row]), loss_scale_axes(&[shifted]));
    }

    #[test]
    fn direction_ignores_motion_scale(x in prop::collection::vec(-2.0f64..2.0, 24)) {
        let g: Vec<[f64; 3]> = x[..12].chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        let p: Vec<[f64; 3]> = x[12..].chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        let p2: Vec<[f64; 3]> = p.iter().map(|v| v.map(|c| 2.0 * c)).collect();
        prop_assert_eq!(loss_direction(&g, &p).unwrap(), loss_direction(&g, &p2).unwrap());
    }

    #[test]
    fn total_is_zero_only_for_zero_weighted_terms(x in prop::collection::vec(0.0f64..1.0, TERM_COUNT), k in 0usize..TERM_COUNT) {
        let w = LossWeights::default();
        let mut t = LossTerms::<f64>::zero();
        t.values[k] = x[k];
        let total = total_loss(&t, &w).unwrap();
        prop_assert_eq!(total == 0.0, x[k] * w.weight(Term::ALL[k]) == 0.0);
    }
}
