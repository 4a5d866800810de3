use isocal::calibrate::{cross_calibrate_pooled, dr_learn, CrossCalibrationConfig, MedianRule};
use isocal::data::{load_csv, save_csv, split_folds, CsvOptions, OptionalColumn};
use isocal::isotonic::block_residual_sums;
use isocal::metrics::{cal_hat, estimate_gamma0, GammaHatConfig};
use isocal::nuisance::{cross_fit_nuisances, Clip, LearnerSpec};
use isocal::pseudo::compute_pseudo;
use isocal::rng;
use isocal::simulate::Scenario;

#[test]
fn csv_round_trip_is_bit_exact() {
    let ds = Scenario::two(25).unwrap().generate(64, &mut rng::stream(1, 9)).unwrap();
    let mut buf = Vec::new();
    save_csv(&mut buf, &ds, &[]).unwrap();
    let back = load_csv(buf.as_slice(), CsvOptions::default()).unwrap();
    assert_eq!(ds, back);
}

#[test]
fn pooled_fit_satisfies_score_equations_on_pooled_pairs() {
    let ds = Scenario::One.generate(800, &mut rng::stream(2, 9)).unwrap();
    let cfg = CrossCalibrationConfig {
        k: 4,
        seed: 11,
        base_spec: LearnerSpec::boosted_stumps(50, 0.5),
        pi_spec: LearnerSpec::logistic(),
        mu_spec: LearnerSpec::boosted_stumps(50, 0.1),
        clip: Clip::default(),
        median_rule: MedianRule::Paper,
    };
    let fit = cross_calibrate_pooled(&ds, &cfg).unwrap();
    assert_eq!(fit.isotonic_inputs.len(), 1);
    assert_eq!(fit.isotonic_inputs[0].len(), ds.len());
    let theta = &fit.calibrator.members[0].theta;
    for s in block_residual_sums(theta, &fit.isotonic_inputs[0]) {
        assert!(s.abs() <= 1e-8 * ds.len() as f64);
    }
}

#[test]
fn calibration_reduces_error_of_overfit_dr_learner() {
    let s = Scenario::One;
    let mut r = rng::stream(3, 9);
    let train = s.generate(2000, &mut r).unwrap();
    let eval = s.generate(5000, &mut r).unwrap();
    let folds = split_folds(&train, 5, 4).unwrap();
    let base_spec = LearnerSpec::boosted_stumps(400, 1.0);
    let pi = LearnerSpec::logistic();
    let mu = LearnerSpec::boosted_stumps(100, 0.1);
    let raw = dr_learn(&train, &folds, &pi, &mu, &base_spec, Clip::default()).unwrap();
    let cfg = CrossCalibrationConfig {
        k: 5,
        seed: 4,
        base_spec,
        pi_spec: pi,
        mu_spec: mu,
        clip: Clip::default(),
        median_rule: MedianRule::Paper,
    };
    let calibrated = cross_calibrate_pooled(&train, &cfg).unwrap().calibrator;
    let truth = eval.column(OptionalColumn::Tau0).unwrap();
    let cal_of = |pred: &[f64]| {
        let g = estimate_gamma0(pred, &truth, &GammaHatConfig::default(), 1).unwrap();
        cal_hat(pred, &truth, &g).unwrap()
    };
    let before = cal_of(&raw.predict_all(&eval).unwrap());
    let after = cal_of(&calibrated.predict_all(&eval).unwrap());
    assert!(after < before, "{after} vs {before}");
}

#[test]
fn oracle_nuisances_give_unbiased_pseudo_outcomes() {
    let s = Scenario::two(20).unwrap();
    let ds = s.generate(20_000, &mut rng::stream(4, 9)).unwrap();
    let folds = split_folds(&ds, 2, 1).unwrap();
    let oracle = LearnerSpec::oracle(isocal::nuisance::OracleSource::Scenario { scenario: s });
    let nf = cross_fit_nuisances(&ds, &folds, &oracle, &oracle, Clip::default()).unwrap();
    let chi = compute_pseudo(&ds, &nf).unwrap();
    let tau0 = ds.column(OptionalColumn::Tau0).unwrap();
    let resid: Vec<f64> = chi.chi.iter().zip(&tau0).map(|(c, t)| c - t).collect();
    let n = resid.len() as f64;
    let mean = resid.iter().sum::<f64>() / n;
    let sd = (resid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    // the clip at 0.01/0.99 rarely binds here, so the bias is negligible
    assert!(mean.abs() < 4.0 * sd / n.sqrt(), "{mean} (sd {sd})");
}
