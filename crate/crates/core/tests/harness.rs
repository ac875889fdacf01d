use hawkeslab::cluster::poisson_field;
use hawkeslab::harness::{estimate_intensity, run_with_threads, ExperimentConfig, ExperimentKind};
use hawkeslab::rng::split_stream;
use hawkeslab::Error;

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let params = match kind {
        ExperimentKind::ClusterIterate => {
            "f = \"family=exponential rate=1\"\neta = 0.5\nm = 0.5\nhi = 100.0\nbuffer = 100.0\ng_max = 10"
        }
        ExperimentKind::RenewalHawkes => "f = \"family=pareto alpha=0.5 x_m=1\"\nm = 0.5\nhorizon = 1e3\nburn_in = 1e4",
        ExperimentKind::TwoIndex => {
            "f1 = \"family=pareto alpha=0.3 ell=1\"\nf2 = \"family=pareto alpha=0.7 ell=1\"\nhorizon = 100.0\nprobes = [10.0, 100.0]"
        }
        ExperimentKind::Embedding => {
            "f = \"family=exponential rate=1\"\nhi = 50.0\nboundary = \"periodic\"\ng_max = 3\ninner_hi = 10.0"
        }
        ExperimentKind::PalmBackward => {
            "f = \"family=pareto alpha=0.3 x_m=1\"\nspine_reach = 100.0\nwindow_lo = -5.0\nwindow_hi = 5.0\ncell = 1.0"
        }
        ExperimentKind::Kesten => "node_budget = 200",
        ExperimentKind::Walk => "f = \"family=exponential rate=1\"\nn_steps = 256\nh = 1.0",
        ExperimentKind::Inar => "alpha = [0.5, 0.5]\nn = 200\nlags = 2",
        ExperimentKind::GridOracle => "what = \"two_index\"\nf1 = \"family=pareto alpha=0.3 ell=1\"\nf2 = \"family=pareto alpha=0.7 ell=1\"\nh = 0.1\nx_max = 100.0\nprobes = [10.0]",
    };
    let text = format!("[experiment]\nkind = \"{}\"\nseed = 5\nreplications = 4\n\n[params]\n{params}\n", kind.name());
    ExperimentConfig::parse(&text, None).unwrap()
}

#[test]
fn results_do_not_depend_on_thread_count() {
    for kind in ExperimentKind::ALL {
        let c = small(kind);
        let a = run_with_threads(&c, Some(1)).unwrap();
        let b = run_with_threads(&c, Some(8)).unwrap();
        assert_eq!(a.summary_json, b.summary_json, "{kind}");
        let names = |r: &hawkeslab::harness::RunResult| r.artifacts.iter().map(|x| (x.name.clone(), x.contents.clone())).collect::<Vec<_>>();
        assert_eq!(names(&a), names(&b), "{kind}");
    }
}

#[test]
fn zero_replications_still_report_metadata() {
    for kind in ExperimentKind::ALL {
        let mut c = small(kind);
        c.replications = 0;
        let r = run_with_threads(&c, Some(2)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.summary_json).unwrap();
        assert_eq!(v["metadata"]["kind"], kind.name(), "{kind}");
        assert_eq!(v["metadata"]["replications"], 0, "{kind}");
        assert_eq!(v["metadata"]["config_hash"].as_str().unwrap().len(), 64, "{kind}");
        assert!(v["metadata"]["params"].is_object(), "{kind}");
    }
}

#[test]
fn seed_changes_results_and_hash() {
    let a = small(ExperimentKind::Walk);
    let mut b = a.clone();
    b.seed = 6;
    let ra = run_with_threads(&a, Some(1)).unwrap();
    let rb = run_with_threads(&b, Some(1)).unwrap();
    assert_ne!(ra.metadata.config_hash, rb.metadata.config_hash);
    assert_ne!(ra.artifacts[0].contents, rb.artifacts[0].contents);
    let mut c = a.clone();
    c.params.insert("n_steps".into(), toml::Value::Integer(512));
    assert_ne!(run_with_threads(&c, Some(1)).unwrap().metadata.config_hash, ra.metadata.config_hash);
    // The output directory is not part of the hash.
    let mut d = a.clone();
    d.replications = 0;
    let dir = tempfile::tempdir().unwrap();
    let mut e = d.clone();
    e.out = Some(dir.path().join("w"));
    assert_eq!(
        run_with_threads(&d, Some(1)).unwrap().metadata.config_hash,
        run_with_threads(&e, Some(1)).unwrap().metadata.config_hash
    );
}

#[test]
fn outputs_carry_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(ExperimentKind::Walk);
    c.out = Some(dir.path().join("walk"));
    let r = run_with_threads(&c, Some(2)).unwrap();
    let hash = &r.metadata.config_hash;
    let summary = std::fs::read_to_string(dir.path().join("walk/summary.json")).unwrap();
    assert_eq!(summary, r.summary_json);
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["metadata"]["config_hash"], hash.as_str());
    let lines = std::fs::read_to_string(dir.path().join("walk/replicates.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 4);
    for (i, l) in lines.lines().enumerate() {
        let rec: serde_json::Value = serde_json::from_str(l).unwrap();
        assert_eq!(rec["config_hash"], hash.as_str());
        assert_eq!(rec["replicate"], i);
    }
    let csv = std::fs::read_to_string(dir.path().join("walk/occupation.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# config_hash={hash}"));
    assert_eq!(r.files.len(), 3);
}

#[test]
fn config_errors_name_the_field() {
    let bad = [
        ("[experiment]\nkind = \"nope\"", "experiment.kind"),
        ("[experiment]\nseed = -1\nkind = \"walk\"", "experiment.seed"),
        ("[experiment]\nkind = \"walk\"\ncolour = 1", "experiment.colour"),
        ("[other]\n", "other"),
        ("[params]\nwhat = \"renewal\"", "experiment.kind"),
    ];
    for (text, field) in bad {
        match ExperimentConfig::parse(text, None) {
            Err(Error::ConfigInvalid { field: f, .. }) => assert_eq!(f, field, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
    let mut c = small(ExperimentKind::Walk);
    c.params.insert("f".into(), toml::Value::String("family=pareto alpha=-1 x_m=1".into()));
    assert!(matches!(run_with_threads(&c, Some(1)), Err(Error::ConfigInvalid { .. })));
    let mut c = small(ExperimentKind::Inar);
    c.params.insert("unknown_key".into(), toml::Value::Integer(1));
    assert!(matches!(run_with_threads(&c, Some(1)), Err(Error::ConfigInvalid { .. })));
    let c = ExperimentConfig::parse("[params]\nwhat = \"scan\"\nalphas = [0.3]\nh = 0.1\nranges = [10.0]", Some(ExperimentKind::GridOracle))
        .unwrap();
    assert_eq!(c.kind, ExperimentKind::GridOracle);
}

#[test]
fn poisson_intensity_estimate() {
    let mut hits = 0;
    for r in 0..20 {
        let p = poisson_field(2.0, 0.0, 1e4, 0.0, &mut split_stream(91, r));
        let (l, se) = estimate_intensity(&p, (0.0, 1e4), 50);
        // Independent increments: se should be close to √(λ / L).
        assert!((se / (2.0f64 / 1e4).sqrt() - 1.0).abs() < 0.35, "{se}");
        if (l - 2.0).abs() <= 3.0 * se {
            hits += 1;
        }
    }
    assert!(hits >= 19, "{hits} of 20 within 3 se");
}

#[test]
fn split_streams_are_uncorrelated() {
    let n = 10_000;
    for s in [0u64, 1, 12345] {
        let mut a = split_stream(s, 1);
        let mut b = split_stream(s, 2);
        let (x, y): (Vec<f64>, Vec<f64>) = (0..n).map(|_| (a.unit(), b.unit())).unzip();
        let m = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
        let (mx, my) = (m(&x), m(&y));
        let cov: f64 = x.iter().zip(&y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / n as f64;
        let corr = cov / (1.0 / 12.0);
        assert!(corr.abs() <= 3.0 / (n as f64).sqrt(), "seed {s}: {corr}");
    }
    let mut a = split_stream(7, 3);
    let mut b = split_stream(7, 3);
    assert!((0..100).all(|_| a.unit() == b.unit()));
}
