#![no_main]

use libfuzzer_sys::fuzz_target;
use wakeotp::trace::{read_events_csv, write_events_csv};

// Whatever the reader accepts, the writer reproduces and the reader accepts
// again unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(events) = read_events_csv(data) else {
        return;
    };
    let mut out = Vec::new();
    write_events_csv(&events, &mut out).expect("in-memory write");
    let again = read_events_csv(out.as_slice()).expect("written trace reads back");
    assert_eq!(again, events);
});
