#![no_main]

use libfuzzer_sys::fuzz_target;
use pamkit::audio::{decode_wav_bytes, ChannelPolicy};

fuzz_target!(|data: &[u8]| {
    let _ = decode_wav_bytes(data, ChannelPolicy::FirstChannel);
    let _ = decode_wav_bytes(data, ChannelPolicy::RejectMultichannel);
});
