#![no_main]

use learncurve::folds::FoldPlan;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(raw) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(plan) = FoldPlan::from_json(raw) {
        let again = FoldPlan::from_json(&plan.to_json()).expect("re-serialised plan parses");
        assert_eq!(plan, again);
    }
});
