#![no_main]

use learncurve::corpus::parse_tsv;
use learncurve::schema::{task5, task6};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for schema in [task5(), task6()] {
        if let Ok(c) = parse_tsv(data, &schema, "fuzz") {
            c.validate().expect("parsed corpus validates");
        }
    }
});
