//! The fuzz targets' properties, run on stable over the checked-in corpus
//! and over random input.

use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;

use wakeotp::trace::{read_events_csv, write_events_csv};
use wakeotp::{Block64, Key128, ScenarioConfig};

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.into_iter().map(|p| fs::read(p).unwrap()).collect()
}

fn config_property(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = ScenarioConfig::parse(text);
    if let Ok(cfg) = ScenarioConfig::load(text) {
        let again = ScenarioConfig::load(&cfg.to_text()).expect("printed config reloads");
        assert_eq!(again, cfg);
    }
}

fn hex_property(data: &[u8]) {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(k) = Key128::from_hex(s) {
        assert_eq!(k.to_hex(), s.to_ascii_lowercase());
    }
    if let Ok(b) = Block64::from_hex(s) {
        assert_eq!(b.to_hex(), s.to_ascii_lowercase());
    }
}

fn trace_property(data: &[u8]) {
    let Ok(events) = read_events_csv(data) else {
        return;
    };
    let mut out = Vec::new();
    write_events_csv(&events, &mut out).unwrap();
    assert_eq!(read_events_csv(out.as_slice()).unwrap(), events);
}

#[test]
fn config_corpus() {
    let seeds = corpus("config_parse");
    assert!(seeds.len() >= 6);
    let loaded = seeds
        .iter()
        .filter(|s| ScenarioConfig::load(std::str::from_utf8(s).unwrap()).is_ok())
        .count();
    assert!(loaded >= 6, "shipped scenarios load");
    seeds.iter().for_each(|s| config_property(s));
}

#[test]
fn hex_corpus() {
    corpus("hex_parse").iter().for_each(|s| hex_property(s));
}

#[test]
fn trace_corpus() {
    let seeds = corpus("trace_csv");
    for s in &seeds {
        trace_property(s);
    }
    assert!(seeds.iter().all(|s| read_events_csv(s.as_slice()).is_ok()));
}

#[test]
fn trace_reader_rejects_disorder_and_bad_headers() {
    let good = "time_ms,seq,actor,event,token_hex,decision,dest,energy_total_nj\n\
                5,0,node1,ModeChange,,Sleeping,,0.000\n";
    assert!(read_events_csv(good.as_bytes()).is_ok());
    let disorder = format!("{good}4,1,node1,ModeChange,,Active,,5.000\n");
    assert!(read_events_csv(disorder.as_bytes()).is_err());
    assert!(read_events_csv("time,seq\n".as_bytes()).is_err());
    assert!(read_events_csv("".as_bytes()).is_err());
    let bad_energy = good.replace("0.000", "0.5");
    assert!(read_events_csv(bad_energy.as_bytes()).is_err());
    let bad_kind = good.replace("ModeChange", "Teleport");
    assert!(read_events_csv(bad_kind.as_bytes()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn config_never_panics(text in "(?s)[a-z_ =#\\[\\]0-9,.\\n-]{0,300}") {
        config_property(text.as_bytes());
    }

    #[test]
    fn config_lines_from_real_keys(lines in prop::collection::vec(prop_oneof![
        Just("scenario = p".to_string()),
        Just("[node 0]".to_string()),
        Just("[node 1]".to_string()),
        Just("neighbors = 1".to_string()),
        Just("neighbors = 0".to_string()),
        Just("[traffic]".to_string()),
        Just("[adversary]".to_string()),
        Just("enabled = true".to_string()),
        "send = [0-9]{1,5} [01] [01]",
        "flow = [01] [01] [0-9]{1,4}(\\.[0-9])?",
        "slot_duration_ms = [0-9]{1,4}",
        "propagation_delay_ms = [0-9]{1,3}",
        "duration_ms = [0-9]{1,6}",
    ], 0..20)) {
        config_property(lines.join("\n").as_bytes());
    }

    #[test]
    fn hex_never_panics(s in "[0-9a-fA-Fx ]{0,40}") {
        hex_property(s.as_bytes());
    }

    #[test]
    fn trace_never_panics(rows in prop::collection::vec("[0-9]{1,3},[0-9]{1,3},(node[0-9]|adversary),(ModeChange|WakeSignalRx|DataTx),[0-9a-f]{0,16},(Accept|Sleeping|),[0-9]?,[0-9]{1,3}\\.[0-9]{3}", 0..10)) {
        let text = format!("time_ms,seq,actor,event,token_hex,decision,dest,energy_total_nj\n{}", rows.join("\n"));
        trace_property(text.as_bytes());
    }
}
