#![no_main]

use learncurve::folds::SubsampleSchedule;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(raw) = std::str::from_utf8(data) {
        if let Ok(s) = SubsampleSchedule::parse(raw) {
            assert!(s.sizes().windows(2).all(|w| w[0] < w[1]));
        }
    }
});
