#![no_main]

use libfuzzer_sys::fuzz_target;
use pu_jerm::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        assert!(cfg.repeats > 0);
        assert!(cfg.datasets.iter().all(|d| d.c.iter().all(|&c| c > 0.0 && c < 1.0)));
    }
});
