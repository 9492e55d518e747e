#![no_main]

use leap_cli::config::{parse_synth_config, synth_config_text};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_synth_config(text) {
        assert_eq!(parse_synth_config(&synth_config_text(&cfg)).unwrap(), cfg);
    }
});
