use std::path::PathBuf;

use hqts::bench::{
    render_study_text, run_bench, run_study, BenchReport, BksTable, Keep, Problem, StartMethod,
    StudyConfig, StudyKind,
};
use hqts::construct::clarke_wright;
use hqts::sampler::{ExactSampler, SamplerSpec};
use hqts::tabu::SearchParams;

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[test]
fn shipped_instances_match_known_totals() {
    for (name, n, cap, demand) in [("CMT1", 50, 160, 777), ("CMT2", 75, 140, 1364), ("CMT3", 100, 200, 1458)] {
        let p = Problem::load(data().join(format!("cmt/{name}.vrp"))).unwrap();
        assert_eq!(p.name(), name);
        assert_eq!(p.instance.num_customers(), n);
        assert_eq!(p.instance.capacity(), cap);
        assert_eq!(p.instance.total_demand(), demand);
    }
}

#[test]
fn clarke_wright_on_cmt1_near_reported_start() {
    let p = Problem::load(data().join("cmt/CMT1.vrp")).unwrap();
    let s = clarke_wright(&p.instance, &p.matrix);
    assert!(s.is_feasible());
    assert!((s.cost() - 584.41).abs() <= 1.0, "{}", s.cost());
    let singletons: f64 = (1..=50).map(|c| 2.0 * p.matrix.get(0, c)).sum();
    assert!(s.cost() < singletons);
}

#[test]
fn bks_table_covers_suite() {
    let t = BksTable::load(data().join("cmt/bks.json")).unwrap();
    assert_eq!(t.get("CMT1"), Some(524.61));
    assert_eq!(t.get("CMT3"), Some(826.14));
}

#[test]
fn shipped_study_configs_load() {
    let d = StudyConfig::load(data().join("studies/delay_cmt1.json")).unwrap();
    assert_eq!(d.kind, StudyKind::Delay);
    assert_eq!(d.delays, vec![250, 1000, 2000, 3000]);
    assert!(d.instance.exists());
    let s = StudyConfig::load(data().join("studies/start_cmt1.json")).unwrap();
    assert_eq!(s.starts, vec![StartMethod::ClarkeWright, StartMethod::Cluster]);
}

#[test]
fn bench_report_survives_json() {
    let p = Problem::load(data().join("cmt/CMT1.vrp")).unwrap();
    let bks = BksTable::load(data().join("cmt/bks.json")).unwrap();
    let params = SearchParams { max_iterations: Some(60), routing_delay: 20, seed: 4, ..SearchParams::default() };
    let report = run_bench(
        std::slice::from_ref(&p),
        &bks,
        2,
        Keep::All,
        &StartMethod::ClarkeWright,
        &SamplerSpec::Exact,
        &ExactSampler::default(),
        &params,
        |_| {},
    )
    .unwrap();
    let row = &report.rows[0];
    assert_eq!(row.runs.len(), 2);
    assert_eq!(row.runs[0].seed, 4);
    assert_eq!(row.runs[1].seed, 5);
    for r in &row.runs {
        r.verify(&p).unwrap();
    }
    let back: BenchReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn study_counts_attempts_and_qualifiers() {
    let dir = tempfile::tempdir().unwrap();
    let inst = hqts::instance::Instance::<f64>::from_file(data().join("cmt/CMT1.vrp")).unwrap();
    std::fs::write(dir.path().join("c1.json"), inst.to_json()).unwrap();
    let cfg_path = dir.path().join("s.json");
    std::fs::write(
        &cfg_path,
        r#"{"kind": "start", "instance": "c1.json", "bks": 524.61, "starts": ["cw", "cluster"],
            "qualifying_runs": 2, "max_attempts": 3, "good_run_pct": 0.001,
            "sampler": "exact", "stop_factor": 1}"#,
    )
    .unwrap();
    let cfg = StudyConfig::load(&cfg_path).unwrap();
    let report = run_study(&cfg, &ExactSampler::default(), |_, _, _| {}).unwrap();
    for cell in &report.cells {
        assert_eq!(cell.attempts, 3);
        assert_eq!(cell.qualifying, 0);
        assert!(cell.dnf);
        assert_eq!(cell.mean_iterations_to_best, None);
    }
    assert!(render_study_text(&report).contains("DNF"));
}
