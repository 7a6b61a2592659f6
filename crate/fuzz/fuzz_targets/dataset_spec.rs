//! Fuzz the dataset config (key = value) parser.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = regenc::data::DatasetSpec::parse_str(text, None);
});
