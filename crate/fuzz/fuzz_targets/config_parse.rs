#![no_main]

use libfuzzer_sys::fuzz_target;
use wakeotp::ScenarioConfig;

// Any text either fails with diagnostics or yields a config that survives
// a print/parse round trip.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = ScenarioConfig::parse(text);
    if let Ok(cfg) = ScenarioConfig::load(text) {
        let again = ScenarioConfig::load(&cfg.to_text()).expect("printed config reloads");
        assert_eq!(again, cfg);
    }
});
