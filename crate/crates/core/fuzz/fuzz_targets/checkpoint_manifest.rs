#![no_main]

use learncurve::backend::CheckpointManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(raw) = std::str::from_utf8(data) {
        let _ = CheckpointManifest::from_json(raw);
    }
});
