#![no_main]

use learncurve::runner::{parse_records, summarize};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse_records(data, "fuzz") {
        let _ = summarize(&records);
    }
});
