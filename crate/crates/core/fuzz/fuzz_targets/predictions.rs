#![no_main]

use learncurve::predictions::parse;
use learncurve::schema::task5;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse(data, None, "fuzz");
    let _ = parse(data, Some(&task5()), "fuzz");
});
