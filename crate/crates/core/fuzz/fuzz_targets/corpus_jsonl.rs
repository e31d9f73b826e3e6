#![no_main]

use learncurve::corpus::parse_jsonl;
use learncurve::schema::task6;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_jsonl(data, &task6(), "fuzz");
});
