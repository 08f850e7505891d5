use ebtrain::adapt::Algorithm;
use ebtrain::lab::experiments::{efficiency_key, lower_bound_key, seq_efficiency_trials};
use ebtrain::lab::{export_results, run_experiment, ExperimentSpec, Figure, ResultTable};
use ebtrain::phasor::LinkChannel;
use ebtrain::protocols::{self, SequentialPlan};
use ebtrain::SystemConfig;

fn spec(figure: Figure, trials: usize, seed: u64) -> ExperimentSpec {
    ExperimentSpec::new(figure).with_trials(trials).with_seed(seed)
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn monte_carlo_estimates_agree_across_scales() {
    let mut s = spec(Figure::SeqEfficiency, 5000, 3);
    s.overrides.ets = Some(vec![5]);
    s.overrides.slots = Some(vec![4, 8]);
    let big = seq_efficiency_trials(&s).unwrap();
    let small = seq_efficiency_trials(&s.clone().with_trials(500).with_seed(4)).unwrap();
    for alg in Algorithm::ALL {
        for n_t in [4, 8] {
            let key = efficiency_key(5, alg, n_t);
            let a: Vec<f64> = big.iter().map(|r| r.metric(&key).unwrap()).collect();
            let b: Vec<f64> = small.iter().map(|r| r.metric(&key).unwrap()).collect();
            let ((ma, sa), (mb, sb)) = (mean_and_se(&a), mean_and_se(&b));
            assert!((ma - mb).abs() <= 3.0 * (sa * sa + sb * sb).sqrt(), "{key}: {ma} vs {mb}");
        }
    }
}

#[test]
fn trial_records_replay_from_their_draw() {
    let mut s = spec(Figure::SeqEfficiency, 20, 9);
    s.overrides.ets = Some(vec![4]);
    s.overrides.slots = Some(vec![6]);
    for rec in seq_efficiency_trials(&s).unwrap() {
        let channels: Vec<LinkChannel> = rec
            .distances
            .iter()
            .zip(&rec.phase_shifts)
            .map(|(&r, &theta)| LinkChannel::new(s.scenario.path_gain(r), theta).unwrap())
            .collect();
        for alg in Algorithm::ALL {
            let plan = SequentialPlan::new(4, 6, 1, alg).unwrap();
            let eta = protocols::run_sequential(&channels, &plan, &SystemConfig::new(4).unwrap())
                .unwrap()
                .efficiency()
                .unwrap();
            assert_eq!(rec.metric(&efficiency_key(4, alg, 6)), Some(eta));
            let eta = rec.metric(&efficiency_key(4, alg, 6)).unwrap();
            assert!(eta >= rec.metric(&lower_bound_key(4, alg, 6)).unwrap() * (1.0 - 1e-12));
        }
    }
}

#[test]
fn export_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for f in Figure::ALL {
        let s = spec(f, 3, 5);
        export_results(&run_experiment(&s).unwrap(), &a).unwrap();
        export_results(&run_experiment(&s).unwrap(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{f}");
    }
}

#[test]
fn seq_efficiency_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f9.csv");
    export_results(&run_experiment(&spec(Figure::SeqEfficiency, 5, 1)).unwrap(), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n_t,m,algorithm,mean_eta,lower_bound"));
    assert!(text.lines().any(|l| l == "# seed = 1"));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(data.len(), 20);
    assert!(data.iter().all(|l| l.split(',').count() == 5));
}

#[test]
fn empty_table_exports_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    export_results(&ResultTable::new(&["n_t", "m", "algorithm", "mean_eta", "lower_bound"]), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "n_t,m,algorithm,mean_eta,lower_bound\n");
}

#[test]
fn phase_error_stays_under_bound() {
    let t = run_experiment(&spec(Figure::PhaseError, 200, 2)).unwrap();
    // below ~1e-8 rad the power differences fall under f64 resolution
    for row in t.rows.iter().filter(|r| t.num(r, "bound_norm_error") > 1e-8) {
        assert!(t.num(row, "max_norm_error") <= t.num(row, "bound_norm_error") * (1.0 + 1e-9));
    }
    // one-bit and two-bit memoryless searches share the same bound
    let bound = |n: usize, b: usize| {
        t.rows
            .iter()
            .find(|r| t.text(r, "algorithm") == "a1" && t.num(r, "n_t") as usize == n && t.num(r, "bits") as usize == b)
            .map(|r| t.num(r, "bound_norm_error"))
            .unwrap()
    };
    assert_eq!(bound(16, 1), bound(16, 2));
}

#[test]
fn tradeoff_curves_approach_optimum() {
    let t = run_experiment(&spec(Figure::TradeOff, 200, 6)).unwrap();
    let power = |slots: usize, scheme: &str| {
        t.rows
            .iter()
            .find(|r| t.num(r, "total_slots") as usize == slots && t.text(r, "scheme") == scheme)
            .map(|r| t.num(r, "mean_power"))
            .unwrap()
    };
    assert!(power(400, "sequential-on5") > power(400, "sequential-on4"));
    assert!(power(400, "sequential-on4") > power(400, "sequential-on3"));
    assert!(power(40, "sequential-on5") > power(40, "no-adaptation"));
    assert!(power(400, "sequential-on5") <= power(400, "optimal"));
    assert!(power(400, "sequential-on5") > 0.9 * power(400, "optimal"));
}

#[test]
fn eb_gain_grows_with_ets() {
    let t = run_experiment(&spec(Figure::EbGainVsM, 50, 4)).unwrap();
    let series = |scheme: &str| -> Vec<f64> {
        t.rows.iter().filter(|r| t.text(r, "scheme") == scheme).map(|r| t.num(r, "mean_power")).collect()
    };
    let trained = series("sequential-nt16");
    assert!(trained.windows(2).all(|w| w[1] > w[0]));
    let none = series("no-adaptation");
    assert!(trained.iter().zip(&none).all(|(a, b)| a > b));
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "# coin sweep\nfigure = coin\ntrials = 7\nseed = 11\np = 0.2, 0.8\npathloss_exp = 2.5\n").unwrap();
    let mut s = ExperimentSpec::new(Figure::PhaseError);
    s.apply(&ebtrain::config::KeyValues::load(&path).unwrap()).unwrap();
    assert_eq!(s.figure, Figure::Coin);
    assert_eq!((s.trials, s.seed()), (7, 11));
    assert_eq!(s.overrides.p_values, Some(vec![0.2, 0.8]));
    assert_eq!(s.scenario.pathloss_exp, 2.5);
    let t = run_experiment(&s).unwrap();
    let ps: std::collections::BTreeSet<String> = t.rows.iter().map(|r| r[0].to_string()).collect();
    assert_eq!(ps.len(), 2);

    std::fs::write(&path, "trials = 5\nbogus = 1\n").unwrap();
    let kv = ebtrain::config::KeyValues::load(&path).unwrap();
    assert!(ExperimentSpec::new(Figure::Coin).apply(&kv).is_err());
    assert!(ebtrain::config::KeyValues::load(dir.path().join("missing.cfg")).is_err());
}
