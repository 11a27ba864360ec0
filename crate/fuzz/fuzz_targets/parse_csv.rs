#![no_main]

use libfuzzer_sys::fuzz_target;
use pu_jerm::data::{parse_csv, to_csv_string, ColumnRoles};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for roles in [
        ColumnRoles::default(),
        ColumnRoles::pu_file(),
        ColumnRoles { label: Some("class"), observed: None },
    ] {
        if let Ok(ds) = parse_csv(text, roles) {
            // Anything accepted must survive a write/read cycle.
            let again = parse_csv(&to_csv_string(&ds), ColumnRoles::pu_file()).expect("reparse");
            assert_eq!(again.n(), ds.n());
            assert_eq!(again.s(), ds.s());
        }
    }
});
