use game_rates::experiments::{improvement_ratio, run_experiment, ExperimentSpec};
use game_rates::games::random_monotone_game_stream;

#[test]
fn balanced_population_mean_is_strictly_inside_unit_interval() {
    let ratios: Vec<f64> =
        (0..12).map(|t| improvement_ratio(&random_monotone_game_stream(250, 250, 42, t).unwrap()).unwrap()).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(ratios.iter().all(|r| (0.0..=1.0).contains(r)));
    assert!(mean > 0.0 && mean < 1.0, "mean {mean}");
}

#[test]
fn histogram_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec { name: "pop".into(), pairs: vec![(250, 250)], trials: 3, seed: 42, output: dir.path().into() };
    let r = run_experiment(&spec).unwrap();
    let csv = std::fs::read_to_string(&r.csv_path).unwrap();
    assert_eq!(csv.lines().next(), Some("250vs250"));
    assert_eq!(csv.lines().count(), 4);
    let mean = r.summaries[0].mean;
    assert!(mean > 0.0 && mean < 1.0);
}
