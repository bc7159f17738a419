#![no_main]

use libfuzzer_sys::fuzz_target;
use wakeotp::{Block64, Key128};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(k) = Key128::from_hex(s) {
        assert_eq!(k.to_hex(), s.to_ascii_lowercase());
        assert_eq!(s.parse::<Key128>().ok(), Some(k));
    }
    if let Ok(b) = Block64::from_hex(s) {
        assert_eq!(b.to_hex(), s.to_ascii_lowercase());
    }
});
