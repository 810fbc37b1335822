use rand::Rng;
use telecert::io::{export_csv, ingest_csv, read_table, write_table};
use telecert_core::certify::{simulate_table, ChshSettings, SimulationPlan};
use telecert_core::geometry::{sample_uniform_sphere, BitPair};
use telecert_core::montecarlo::{chunk_rng, Sequential};
use telecert_core::protocols::{Outcome, Protocol, Sign};
use telecert_core::stats::{ExperimentRecord, ExperimentTable};

#[test]
fn simulated_table_survives_file_round_trip() {
    let plan = SimulationPlan::for_certification(&ChshSettings::canonical(), 50);
    let table = simulate_table(&Protocol::GisinHashed, &plan, 2, &Sequential);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    export_csv(&table, &path).unwrap();
    let back = ingest_csv(&path).unwrap();
    assert_eq!(back.records(), table.records());
}

#[test]
fn random_records_round_trip_bit_for_bit() {
    let mut rng = chunk_rng(17, 0);
    let records: Vec<ExperimentRecord> = (0..2000)
        .map(|_| {
            let a = sample_uniform_sphere(&mut rng);
            let b = sample_uniform_sphere(&mut rng);
            let bits = BitPair::from_index(rng.gen_range(0..4));
            let beta = if rng.gen() { Sign::Plus } else { Sign::Minus };
            ExperimentRecord::new(a, b, Outcome::new(bits, beta))
        })
        .collect();
    let table = ExperimentTable::new(records);
    let mut buf = Vec::new();
    write_table(&table, &mut buf).unwrap();
    let back = read_table(buf.as_slice()).unwrap();
    assert_eq!(back.records(), table.records());

    // and writing again gives the same bytes
    let mut again = Vec::new();
    write_table(&back, &mut again).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn missing_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ingest_csv(&dir.path().join("absent.csv")).is_err());
}
