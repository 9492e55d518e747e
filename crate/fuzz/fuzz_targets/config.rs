#![no_main]

use std::path::Path;

use leap_cli::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text, Path::new("/base")) {
        let again = parse_config(&cfg.to_text(), Path::new("/base")).expect("canonical text parses");
        assert_eq!(again, cfg);
    }
});
