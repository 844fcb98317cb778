#![no_main]

use emodyn::lexicons::WordFeatureMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = WordFeatureMatrix::parse_tsv(text) {
        for i in 0..m.rows() {
            assert_eq!(m.row(i).len(), m.cols());
        }
    }
});
