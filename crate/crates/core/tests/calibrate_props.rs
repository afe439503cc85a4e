use fluidlevel::calibrate::{
    error_report, estimate_volume, evaluate, fit_linear_2pt, fit_poly_ls, invert,
    residual_sum_of_squares, residuals, CalibrationError,
};
use fluidlevel::{CalibrationModel, CalibrationPoint, Direction};
use proptest::prelude::*;

fn distinct_points(n: usize) -> impl Strategy<Value = Vec<CalibrationPoint>> {
    prop::collection::vec((0.0f64..3.0, 400.0f64..700.0), n..n + 12).prop_filter_map(
        "need distinct volumes",
        move |raw| {
            let mut pts: Vec<CalibrationPoint> = raw
                .into_iter()
                .map(|(v, p)| CalibrationPoint::new(v, p))
                .collect();
            pts.sort_by(|a, b| a.volume.total_cmp(&b.volume));
            pts.dedup_by(|a, b| (a.volume - b.volume).abs() < 1e-3);
            (pts.len() >= n).then_some(pts)
        },
    )
}

proptest! {
    #[test]
    fn interpolates_at_order_plus_one(pts in distinct_points(6), order in 1usize..=5) {
        let sub = &pts[..order + 1];
        let m = fit_poly_ls(sub, order, Direction::VolumeToPerimeter).unwrap();
        for p in sub {
            prop_assert!((evaluate(&m, p.volume).value - p.perimeter).abs() <= 1e-9 * p.perimeter);
        }
    }

    #[test]
    fn residuals_orthogonal_to_columns(pts in distinct_points(8), order in 1usize..=4) {
        let m = fit_poly_ls(&pts, order, Direction::VolumeToPerimeter).unwrap();
        let r = residuals(&m, &pts);
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        for k in 0..=order {
            let col: Vec<f64> = pts.iter().map(|p| p.volume.powi(k as i32)).collect();
            let cn = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dot: f64 = r.iter().zip(&col).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() <= 1e-8 * rn * cn + 1e-9 * cn, "k={k} dot={dot:e}");
        }
    }

    #[test]
    fn rss_nonincreasing(pts in distinct_points(7)) {
        let rss: Vec<f64> = (1..=5)
            .map(|o| residual_sum_of_squares(&fit_poly_ls(&pts, o, Direction::VolumeToPerimeter).unwrap(), &pts))
            .collect();
        for w in rss.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn invert_round_trip(slope in 1.0f64..50.0, curve in 0.0f64..2.0, x in 0.0f64..1.0) {
        let pts: Vec<CalibrationPoint> = (0..8)
            .map(|k| {
                let v = 0.3 * k as f64;
                CalibrationPoint::new(v, 500.0 + slope * v + curve * v * v)
            })
            .collect();
        let m = fit_poly_ls(&pts, 2, Direction::VolumeToPerimeter).unwrap();
        let (lo, hi) = m.valid_range;
        let x = lo + x * (hi - lo);
        let back = invert(&m, evaluate(&m, x).value).unwrap();
        prop_assert!((back - x).abs() < 1e-6);
        prop_assert!((estimate_volume(&m, evaluate(&m, x).value).unwrap().value - x).abs() < 1e-6);
    }

    #[test]
    fn json_round_trip(coeffs in prop::collection::vec(-1e3f64..1e3, 2..7), lo in -10.0f64..10.0, span in 0.1f64..10.0) {
        let m = CalibrationModel {
            order: coeffs.len() - 1,
            coefficients: coeffs,
            valid_range: (lo, lo + span),
            ..fit_poly_ls(
                &[CalibrationPoint::new(0.0, 1.0), CalibrationPoint::new(1.0, 2.0)],
                1,
                Direction::PerimeterToVolume,
            ).unwrap()
        };
        let back = CalibrationModel::from_json(&m.to_json()).unwrap();
        prop_assert_eq!(back, m);
    }
}

#[test]
fn spec_examples() {
    let line = fit_linear_2pt(
        &CalibrationPoint::new(0.5, 80.0),
        &CalibrationPoint::new(2.0, 140.0),
        Direction::VolumeToPerimeter,
    )
    .unwrap();
    assert_eq!(line.coefficients, vec![60.0, 40.0]);
    assert_eq!(evaluate(&line, 1.25).value, 110.0);
    assert_eq!(invert(&line, 110.0).unwrap(), 1.25);

    let q = fit_poly_ls(
        &[(0.0, 1.0), (1.0, 3.0), (2.0, 7.0)].map(|(v, p)| CalibrationPoint::new(v, p)),
        2,
        Direction::VolumeToPerimeter,
    )
    .unwrap();
    for (c, e) in q.coefficients.iter().zip([1.0, 1.0, 1.0]) {
        assert!((c - e).abs() < 1e-12);
    }
    assert!((evaluate(&q, 2.0).value - 7.0).abs() < 1e-12);

    let three = [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)].map(|(v, p)| CalibrationPoint::new(v, p));
    assert!(matches!(
        fit_poly_ls(&three, 3, Direction::VolumeToPerimeter),
        Err(CalibrationError::InsufficientPoints { needed: 4, got: 3 })
    ));
}

#[test]
fn report_examples() {
    // Perimeter -> volume model: v = (p - 60) / 40.
    let m = fit_linear_2pt(
        &CalibrationPoint::new(0.5, 80.0),
        &CalibrationPoint::new(2.0, 140.0),
        Direction::PerimeterToVolume,
    )
    .unwrap();
    let truth: Vec<(f64, f64)> = (0..10)
        .map(|k| 0.5 + 0.15 * k as f64)
        .map(|v| (v, 60.0 + 40.0 * v))
        .collect();
    let r = error_report(&m, &truth, None).unwrap();
    assert!(r.mean_abs_error < 1e-9 && r.max_abs_error < 1e-9);

    let shifted = CalibrationModel {
        coefficients: vec![m.coefficients[0] + 0.05, m.coefficients[1]],
        ..m.clone()
    };
    let r = error_report(&shifted, &truth, None).unwrap();
    assert!((r.mean_abs_error - 50.0).abs() < 1e-9);
    assert!((r.max_abs_error - 50.0).abs() < 1e-9);
    let max = r
        .points
        .iter()
        .map(|p| p.error_ul.abs())
        .fold(0.0, f64::max);
    assert_eq!(r.max_abs_error, max);
}
