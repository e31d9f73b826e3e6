#![no_main]

use learncurve::schema::TaskSchema;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(raw) = std::str::from_utf8(data) {
        if let Ok(s) = TaskSchema::from_json(raw) {
            s.validate().expect("parsed schema validates");
        }
    }
});
