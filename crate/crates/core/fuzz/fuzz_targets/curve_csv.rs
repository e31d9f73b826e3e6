#![no_main]

use learncurve::report::CurveArtifact;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(raw) = std::str::from_utf8(data) {
        if let Ok(a) = CurveArtifact::from_csv("fuzz", raw) {
            let _ = a.to_svg();
        }
    }
});
