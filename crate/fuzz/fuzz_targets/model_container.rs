//! Fuzz the binary model-container decoder.
//!
//! Containers are read back from disk and may be truncated or corrupted;
//! the decoder guards header and tensor sizes before allocating. When a
//! container parses, the typed loaders must also either succeed or fail
//! cleanly.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = regenc::container::read_container(data) {
        let _ = regenc::container::mlp_from_container(&c);
        let _ = regenc::container::codec_from_container(&c);
        let _ = regenc::container::bundle_from_container(&c);
    }
});
