use vinegc::gctest::GCConfig;
use vinegc::simstudy::{run_study, Dgp, Method, StudyConfig};

fn small_study(workers: Option<usize>) -> StudyConfig {
    StudyConfig {
        models: vec![Dgp::S2, Dgp::P2],
        t_values: vec![60],
        methods: vec![Method::MVine, Method::SplitSample, Method::Linear],
        replicates: 4,
        gc: GCConfig { n: 20, b: 10, ..GCConfig::default() },
        seed: 11,
        workers,
        ..StudyConfig::default()
    }
}

#[test]
fn report_is_independent_of_worker_count() {
    let a = run_study(&small_study(Some(1))).unwrap();
    let b = run_study(&small_study(Some(3))).unwrap();
    assert_eq!(a.to_delimited(), b.to_delimited());
    for (ca, cb) in a.cells.iter().zip(&b.cells) {
        assert_eq!(ca.p_values, cb.p_values);
    }
}

#[test]
fn report_layout() {
    let report = run_study(&small_study(None)).unwrap();
    assert_eq!(report.cells.len(), 6);
    let csv = report.to_delimited();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("model,T,method,rejection_rate,mean_p,sd_p,S,seed"));
    assert!(lines.all(|l| l.split(',').count() == 8 && l.ends_with(",4,11")));
    let table = report.to_table();
    for name in ["S2", "P2", "mvine", "split", "linear"] {
        assert!(table.contains(name), "{table}");
    }
    for cell in &report.cells {
        assert_eq!(cell.n_requested, 4);
        let p: Vec<f64> = cell.p_values.iter().flatten().copied().collect();
        let rejected = p.iter().filter(|&&v| v < report.alpha).count() as f64;
        assert_eq!(cell.rejection_rate, rejected / cell.n_completed as f64);
        assert_eq!(report.p_value_dump(cell).lines().count(), cell.n_completed);
    }
}
