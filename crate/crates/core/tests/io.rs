use std::time::Instant;

use competing_risks::io::{load_dataset, load_truth, save_dataset};
use competing_risks::sim::{generate_replication, SimConfig};

#[test]
fn default_replication_writes_and_reloads_quickly() {
    let (data, truth) = generate_replication(&SimConfig::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let start = Instant::now();
    save_dataset(&data, Some(&truth.rows), &path).unwrap();
    let back = load_dataset(&path, Some(data.n_covariates())).unwrap();
    let rows = load_truth(&path).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(back.times(), data.times());
    assert_eq!(back.events(), data.events());
    assert_eq!(rows.len(), truth.rows.len());
    assert!(rows.iter().zip(&truth.rows).all(|(a, b)| a.w1 == b.w1 && a.ws == b.ws));
    assert!(elapsed.as_secs_f64() < 5.0, "write and reload took {elapsed:?}");
}
