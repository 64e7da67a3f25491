use clusterlab::config::{CalibrationChoice, CalibrationConfig, Df, ExperimentSpec, ModelKind, DEFAULT_DF};
use clusterlab::figures::write_figure;
use clusterlab::grid::{run_grid, ResultRow};
use clusterlab::report::CSV_HEADER;

fn spec(model: ModelKind, nu: Vec<usize>, r: Vec<usize>, df: Vec<Df>, repetitions: u64, budget: u64) -> ExperimentSpec {
    ExperimentSpec {
        model,
        nu,
        r,
        df,
        alpha: 0.05,
        repetitions,
        calibration: CalibrationConfig {
            method: CalibrationChoice::Auto,
            budget,
        },
        master_seed: 424_242,
        threads: None,
        weights: None,
    }
}

fn prop(row: &ResultRow) -> f64 {
    row.clustering_proportion.expect("some replicate has an exceedance")
}

fn prop_se(row: &ResultRow) -> f64 {
    let p = prop(row);
    (p * (1.0 - p) / row.n_positive as f64).sqrt()
}

fn find<'a>(rows: &'a [ResultRow], nu: usize, r: usize, df: Df) -> &'a ResultRow {
    rows.iter().find(|x| x.nu == nu && x.r == r && x.df == df).unwrap()
}

#[test]
fn fwer_at_radius_one_is_alpha() {
    let s = spec(ModelKind::Model1, vec![500, 2000, 10_000], vec![1], vec![Df::Finite(4.0), Df::Infinite], 4000, 20_000_000);
    let out = run_grid(&s).unwrap();
    assert_eq!(out.rows.len(), 6);
    for row in &out.rows {
        let se = (0.05f64 * 0.95 / row.repetitions as f64).sqrt();
        assert!((row.fwer - 0.05).abs() < 3.0 * se, "nu={} df={}: {}", row.nu, row.df, row.fwer);
        assert!(row.n_multiple <= row.n_positive && row.n_positive <= row.repetitions);
    }
}

#[test]
fn model1_clustering_falls_with_lighter_tails_and_longer_series() {
    let dfs = vec![Df::Finite(3.0), Df::Finite(6.0), Df::Finite(20.0), Df::Infinite];
    let nus = vec![500, 2000];
    let s = spec(ModelKind::Model1, nus.clone(), vec![3, 10], dfs.clone(), 1500, 10_000_000);
    let rows = run_grid(&s).unwrap().rows;
    assert_eq!(rows.len(), 16);
    // nonincreasing up to 3 combined binomial standard errors
    let ok = |a: &ResultRow, b: &ResultRow| prop(b) <= prop(a) + 3.0 * prop_se(a).hypot(prop_se(b));
    for r in [3, 10] {
        for &nu in &nus {
            for w in dfs.windows(2) {
                let (a, b) = (find(&rows, nu, r, w[0]), find(&rows, nu, r, w[1]));
                assert!(ok(a, b), "r={r} nu={nu}: df {} {} -> df {} {}", w[0], prop(a), w[1], prop(b));
            }
            assert!(prop(find(&rows, nu, r, Df::Infinite)) < prop(find(&rows, nu, r, Df::Finite(3.0))));
        }
        for &df in &dfs {
            let (a, b) = (find(&rows, 500, r, df), find(&rows, 2000, r, df));
            assert!(ok(a, b), "r={r} df={df}: nu 500 {} -> nu 2000 {}", prop(a), prop(b));
        }
    }
}

#[test]
fn t_statistics_cluster_less_than_means() {
    let dfs = vec![Df::Finite(3.0), Df::Infinite];
    let m1 = run_grid(&spec(ModelKind::Model1, vec![2000], vec![3], dfs.clone(), 1500, 10_000_000)).unwrap().rows;
    let m2 = run_grid(&spec(ModelKind::Model2 { n: 10 }, vec![2000], vec![3], dfs.clone(), 1500, 10_000_000)).unwrap().rows;
    let heavy = (find(&m1, 2000, 3, dfs[0]), find(&m2, 2000, 3, dfs[0]));
    assert!(prop(heavy.1) < prop(heavy.0), "df=3: model2 {} vs model1 {}", prop(heavy.1), prop(heavy.0));
    let light = (find(&m1, 2000, 3, dfs[1]), find(&m2, 2000, 3, dfs[1]));
    assert!(prop(light.1) <= prop(light.0) + 3.0 * prop_se(light.0).hypot(prop_se(light.1)));
}

#[test]
fn independence_panel_is_flat_across_df() {
    let s = spec(ModelKind::Model1, vec![2000], vec![1], DEFAULT_DF.to_vec(), 3000, 10_000_000);
    let rows = run_grid(&s).unwrap().rows;
    let props: Vec<f64> = rows.iter().map(prop).collect();
    let se = rows.iter().map(prop_se).fold(0.0, f64::max);
    let (lo, hi) = props.iter().fold((1.0f64, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));
    assert!(hi - lo < 4.0 * se * std::f64::consts::SQRT_2, "{props:?}");
}

#[test]
fn figure_files_follow_the_panel_contract() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(ModelKind::Model1, vec![200], vec![1, 3, 10, 50], vec![Df::Finite(4.0), Df::Infinite], 20, 1_000_000);
    let out = write_figure("fig1", &s, dir.path()).unwrap();
    let names: Vec<String> = out
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for letter in ["a", "b", "c", "d"] {
        assert!(names.contains(&format!("fig1_{letter}.csv")), "{names:?}");
        assert!(names.contains(&format!("fig1_{letter}.svg")), "{names:?}");
        let csv = std::fs::read_to_string(dir.path().join(format!("fig1_{letter}.csv"))).unwrap();
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(csv.lines().count(), 3);
        let svg = std::fs::read_to_string(dir.path().join(format!("fig1_{letter}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("log scale"));
    }
    assert_eq!(names.len(), 9);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig1_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["spec"]["r"], serde_json::json!([1, 3, 10, 50]));
}

#[test]
fn rows_are_canonically_ordered() {
    let s = spec(ModelKind::Model1, vec![1000, 300], vec![3, 1], vec![Df::Infinite, Df::Finite(5.0)], 10, 2_000_000);
    let rows = run_grid(&s).unwrap().rows;
    let keys: Vec<(usize, usize)> = rows.iter().map(|r| (r.nu, r.r)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(rows.len(), 8);
}
