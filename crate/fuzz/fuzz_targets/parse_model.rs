#![no_main]

use libfuzzer_sys::fuzz_target;
use pu_jerm::model_io::parse_model;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = parse_model(text) {
        let again = parse_model(&model.to_text().expect("valid model serializes")).expect("reparse");
        assert_eq!(again, model);
    }
});
