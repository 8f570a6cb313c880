use ngn_core::config::{parse_config, render_config};
use ngn_core::objectives::ProblemSpec;
use ngn_core::runner::{run_sgd, RunSettings};
use ngn_core::verify::{self, exit_code, Suite, VerifyContext};

fn flipped(sigma: f64, loss: f64, g2: f64) -> f64 {
    sigma / (1.0 - sigma * g2 / (2.0 * loss.max(1e-12)))
}

#[test]
fn wrong_stepsize_rule_fails_lemmas() {
    let ctx = VerifyContext { ngn: flipped, ..VerifyContext::default() };
    let reports = verify::run_suite(Suite::Lemmas, &ctx);
    assert_eq!(exit_code(&reports), 1);
    assert!(reports.iter().any(|r| r.name == "lemma_equality" && !r.pass));
}

#[test]
fn correct_rule_passes_lemmas() {
    let reports = verify::run_suite(Suite::Lemmas, &VerifyContext::default());
    assert_eq!(exit_code(&reports), 0, "{:#?}", reports.iter().map(|r| r.to_string()).collect::<Vec<_>>());
}

#[test]
fn interpolating_regression_with_large_sigma_stays_finite() {
    let obj = "linear_regression(d=4, n=30, seed=1, noise=0)".parse::<ProblemSpec>().unwrap().build().unwrap();
    let settings = RunSettings::new("ngn(sigma=10)".parse().unwrap(), 5_000).with_cadence(500);
    for seed in 0..3 {
        let trace = run_sgd(obj.as_ref(), &settings, seed).unwrap();
        assert!(!trace.diverged());
        let m = trace.final_metrics().unwrap();
        assert!(m.loss.is_finite() && m.loss < 1e-6, "{}", m.loss);
    }
}

#[test]
fn config_round_trips_through_render() {
    let text = "problem = logistic(n=50, d=3, classes=3, seed=2, l2=0.01)\npolicy = ngn(sigma=3)\nsteps = 300\nseeds = 0..4\nsampler = shuffle\nbatch_size = 4\ncadence = 7\nsweep_param = sigma\nsweep_values = 0.3, 1, 3\n";
    let cfg = parse_config(text).unwrap();
    assert_eq!(parse_config(&render_config(&cfg)).unwrap(), cfg);
    assert_eq!(cfg.experiment.seeds, vec![0, 1, 2, 3]);
}
