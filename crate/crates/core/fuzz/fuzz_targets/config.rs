#![no_main]

use emodyn::config::{PipelineConfig, Sweep};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = PipelineConfig::parse(text, "fuzz") {
        let _ = config.validate();
    }
    if let Ok(sweep) = text.parse::<Sweep>() {
        let _ = sweep.configs(&PipelineConfig::default());
    }
});
