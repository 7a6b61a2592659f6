//! Fuzz the numeric CSV reader over arbitrary bytes.
//!
//! CSV files are the main untrusted input surface (datasets come from
//! wherever the user fetched them). The reader must reject malformed input
//! with an error, never panic or over-allocate.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = regenc::data::read_table_csv(data);
});
