#![no_main]

use leap_core::eval::{aggregate, read_results, write_results};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(results) = read_results(data) else {
        return;
    };
    let mut buf = Vec::new();
    write_results(&mut buf, &results).unwrap();
    assert_eq!(read_results(buf.as_slice()).unwrap(), results);
    let _ = aggregate(&results, &[0, 1, 2, 3, 4]);
});
