#![no_main]

use emodyn::corpus::{parse_headlines, write_headlines};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse_headlines(data, "fuzz") {
        let again = parse_headlines(write_headlines(&records).as_bytes(), "again")
            .expect("written headlines reparse");
        assert_eq!(again, records);
    }
});
