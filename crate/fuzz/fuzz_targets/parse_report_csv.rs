#![no_main]

use libfuzzer_sys::fuzz_target;
use pu_jerm::bench::{parse_report_csv, reports_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_report_csv(text) {
        // Compared as text so NaN cells count as equal.
        let text = reports_to_csv(&rows);
        assert_eq!(reports_to_csv(&parse_report_csv(&text).expect("reparse")), text);
    }
});
