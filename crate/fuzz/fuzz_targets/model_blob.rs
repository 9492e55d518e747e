#![no_main]

use leap_core::FittedModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = FittedModel::from_json(text) {
        let _ = model.to_json();
    }
});
