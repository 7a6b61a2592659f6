//! Fuzz the sweep grid-string parser ("lr=1e-3,1e-2;lambda_kl=@log10").

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = regenc::pipeline::parse_grid(text);
});
