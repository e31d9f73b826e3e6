#![no_main]

use learncurve::cmd::parse_unlabeled;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_unlabeled(data, "fuzz");
});
