#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use pamkit::learn::parse_manifest_text;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_manifest_text(text, Path::new("fuzz.csv"));
    }
});
