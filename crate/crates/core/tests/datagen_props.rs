mod common;

use std::io::Write;

use common::*;
use proptest::prelude::*;
use pue::datagen::{
    calibrate_c, mean_exposure, parse_sparse_dataset, parse_sparse_str, split_for_problem,
    subsample, synthesize_observations, write_csv, ExposureSpec, Problem, SplitSpec,
};
use pue::{LabeledSampleSet, PueError};

fn mushrooms() -> LabeledSampleSet {
    parse_sparse_dataset(&data_path("mushrooms.libsvm"), Some(112)).unwrap()
}

fn australian() -> LabeledSampleSet {
    parse_sparse_dataset(&data_path("australian.libsvm"), Some(14)).unwrap()
}

#[test]
fn calibration_hits_the_target_on_bundled_datasets() {
    for data in [mushrooms(), australian()] {
        for target in [0.3, 0.5, 0.7] {
            let spec = ExposureSpec {
                target_marginal: target,
                ..ExposureSpec::default()
            };
            let c = calibrate_c(&data, &spec).unwrap();
            let m = mean_exposure(&data, &spec, c).unwrap();
            assert!(
                (m - target).abs() <= 1e-6,
                "target {target}: mean {m} at C = {c}"
            );
        }
    }
}

#[test]
fn unreachable_target_is_reported() {
    let data = LabeledSampleSet::from_rows(1, &[[0.0], [0.0]]).unwrap();
    let spec = ExposureSpec {
        target_marginal: 0.99,
        pivot_index: 1,
        g1_indices: [1; 6],
        g2_indices: [1; 6],
    };
    let c = calibrate_c(&data, &spec);
    match c {
        Ok(c) => assert!((mean_exposure(&data, &spec, c).unwrap() - 0.99).abs() <= 1e-6),
        Err(e) => assert!(matches!(e, PueError::Calibration(_))),
    }
}

#[test]
fn exposure_depends_on_features_only() {
    let data = australian();
    let spec = ExposureSpec::default();
    let c = calibrate_c(&data, &spec).unwrap();
    let model = spec.resolve(data.dim()).unwrap();
    let y = data.y_oracle().unwrap();
    let theta: Vec<f64> = data.rows().map(|x| model.probability(x, c)).collect();
    let mut residual = [0.0f64; 2];
    let mut variance = [0.0f64; 2];
    for seed in 0..400 {
        let obs = synthesize_observations(&data, &spec, c, seed).unwrap();
        for (i, &e) in obs.e().unwrap().iter().enumerate() {
            residual[y[i] as usize] += e as u8 as f64 - theta[i];
            variance[y[i] as usize] += theta[i] * (1.0 - theta[i]);
        }
    }
    for label in 0..2 {
        let z = residual[label] / variance[label].sqrt();
        assert!(z.abs() <= 4.0, "label {label}: z = {z}");
    }
}

#[test]
fn observed_positives_are_exposed_positives() {
    let data = mushrooms();
    let spec = ExposureSpec::default();
    let c = calibrate_c(&data, &spec).unwrap();
    let obs = synthesize_observations(&data, &spec, c, 3).unwrap();
    let (w, e, y) = (obs.w().unwrap(), obs.e().unwrap(), obs.y_oracle().unwrap());
    assert!((0..obs.len()).all(|i| w[i] == (e[i] && y[i])));
    let rate = e.iter().filter(|&&v| v).count() as f64 / e.len() as f64;
    let se = (0.25 / e.len() as f64).sqrt();
    assert!((rate - 0.5).abs() <= 4.0 * se, "{rate}");
    assert_eq!(obs, synthesize_observations(&data, &spec, c, 3).unwrap());
}

fn observed_pool() -> LabeledSampleSet {
    let data = australian();
    let spec = ExposureSpec::default();
    let c = calibrate_c(&data, &spec).unwrap();
    synthesize_observations(&data, &spec, c, 1).unwrap()
}

#[test]
fn splits_have_the_documented_shapes() {
    let data = observed_pool();
    let split = SplitSpec {
        split_ratio: 0.3,
        test_count: 190,
    };
    let m = data.len() - 190;
    let first = (0.3 * m as f64).ceil() as usize;
    for problem in [
        Problem::Pue,
        Problem::ThreeSe,
        Problem::Pe,
        Problem::Fpue,
        Problem::Sse,
    ] {
        let s = split_for_problem(&data, problem, &split, 5).unwrap();
        assert_eq!(s.test.len(), 190);
        assert!(s.test.w().is_none() && s.test.e().is_none() && s.test.y_oracle().is_some());
        assert!(s.transductive.w().is_none() && s.transductive.e().is_none());
        assert!(s.class_prior > 0.0 && s.class_prior < 1.0);
        match problem {
            Problem::Pue => {
                let (pu, e) = (s.pu.as_ref().unwrap(), s.exposure.as_ref().unwrap());
                assert_eq!((pu.len(), e.len()), (first, m - first));
                assert!(pu.w().is_some() && pu.e().is_none());
                assert!(e.e().is_some() && e.w().is_none());
            }
            Problem::ThreeSe => {
                let (pu, sse) = (s.pu.as_ref().unwrap(), s.sse.as_ref().unwrap());
                assert_eq!((pu.len(), sse.len()), (first, m - first));
                assert!(pu.e().is_none() && sse.w().is_some() && sse.e().is_some());
            }
            Problem::Pe => {
                let p = s.positive.as_ref().unwrap();
                assert!(p.w().is_none() && p.e().is_none());
                assert!(p.y_oracle().unwrap().iter().all(|&y| y));
                assert_eq!(s.exposure.as_ref().unwrap().len(), m - first);
            }
            Problem::Fpue => {
                let half = first.div_ceil(2);
                let u = s.unlabeled.as_ref().unwrap();
                assert_eq!(u.len(), first - half);
                assert!(u.w().is_none() && u.e().is_none());
                assert!(s.positive.as_ref().unwrap().len() <= half);
                assert_eq!(s.exposure.as_ref().unwrap().len(), m - first);
            }
            Problem::Sse => {
                assert_eq!(s.sse.as_ref().unwrap().len(), m);
                assert!(s.pu.is_none() && s.exposure.is_none());
            }
        }
    }
}

#[test]
fn splits_are_deterministic_per_seed() {
    let data = observed_pool();
    let split = SplitSpec::default();
    let a = split_for_problem(&data, Problem::Pue, &split, 9).unwrap();
    let b = split_for_problem(&data, Problem::Pue, &split, 9).unwrap();
    let c = split_for_problem(&data, Problem::Pue, &split, 10).unwrap();
    assert_eq!(a.pu, b.pu);
    assert_eq!(a.test, b.test);
    assert_ne!(a.test, c.test);
}

#[test]
fn invalid_splits_are_rejected() {
    let data = observed_pool();
    let bad_ratio = SplitSpec {
        split_ratio: 1.0,
        test_count: 100,
    };
    assert!(matches!(
        split_for_problem(&data, Problem::Pue, &bad_ratio, 0),
        Err(PueError::Parameter(_))
    ));
    let too_many = SplitSpec {
        split_ratio: 0.5,
        test_count: data.len(),
    };
    assert!(matches!(
        split_for_problem(&data, Problem::Pue, &too_many, 0),
        Err(PueError::Size(_))
    ));
    let unobserved = data.clone().without_e();
    assert!(split_for_problem(&unobserved, Problem::Pue, &SplitSpec::default(), 0).is_err());
}

#[test]
fn subsample_draws_without_replacement() {
    let data = mushrooms();
    let s = subsample(&data, 1800, 4);
    assert_eq!(s.len(), 1800);
    assert_eq!(s, subsample(&data, 1800, 4));
    assert_eq!(subsample(&data, 100_000, 4).len(), data.len());
}

#[test]
fn files_are_parsed_and_scaled() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "# comment\n+1 1:2 3:10\n\n-1 2:4 3:0\n0 1:6").unwrap();
    let s = parse_sparse_dataset(f.path(), None).unwrap();
    assert_eq!((s.len(), s.dim()), (3, 3));
    assert_eq!(s.y_oracle().unwrap(), &[true, false, false]);
    assert_eq!(s.row(0), &[1.0 / 3.0, 0.0, 1.0]);
    assert_eq!(s.row(1), &[0.0, 1.0, 0.0]);
    assert_eq!(s.row(2), &[1.0, 0.0, 0.0]);
    assert!(s.features().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn parse_errors_name_the_line() {
    let err = parse_sparse_str("1 1:1\n1 2:x\n", None).unwrap_err();
    assert!(matches!(err, PueError::Parse { line: 2, .. }), "{err:?}");
    let err = parse_sparse_str("1 1:1\n\n1 5:1\n", Some(3)).unwrap_err();
    assert!(
        matches!(
            err,
            PueError::Dimension {
                line: 3,
                index: 5,
                dim: 3
            }
        ),
        "{err:?}"
    );
    assert!(matches!(
        parse_sparse_str("7 1:1\n", None),
        Err(PueError::Parse { line: 1, .. })
    ));
    let missing = std::path::Path::new("/nonexistent/file.libsvm");
    assert!(matches!(
        parse_sparse_dataset(missing, None),
        Err(PueError::File { .. })
    ));
}

#[test]
fn csv_has_observation_columns_first() {
    let data = observed_pool();
    let mut buf = Vec::new();
    write_csv(&data.select(&[0, 1]), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("w,e,y_oracle,x1,"));
    assert!(header.ends_with(",x14"));
    assert_eq!(text.lines().count(), 3);
}

proptest! {
    #[test]
    fn sparse_text_round_trips(rows in prop::collection::vec((any::<bool>(), prop::collection::vec(-100.0f64..100.0, 4)), 1..20)) {
        let mut text = String::new();
        for (label, x) in &rows {
            text.push_str(if *label { "+1" } else { "-1" });
            for (j, v) in x.iter().enumerate() {
                if *v != 0.0 {
                    text.push_str(&format!(" {}:{}", j + 1, v));
                }
            }
            text.push('\n');
        }
        let s = parse_sparse_str(&text, Some(4)).unwrap();
        prop_assert_eq!(s.len(), rows.len());
        for (i, (label, x)) in rows.iter().enumerate() {
            prop_assert_eq!(s.y_oracle().unwrap()[i], *label);
            prop_assert_eq!(s.row(i), x.as_slice());
        }
    }

    #[test]
    fn exposure_indices_wrap_for_small_dimensions(dim in 1usize..20, x in prop::collection::vec(0.0f64..=1.0, 20)) {
        let spec = ExposureSpec::default();
        let model = spec.resolve(dim).unwrap();
        let p = model.probability(&x[..dim], 0.7);
        prop_assert!((0.0..=1.0).contains(&p));
    }
}
