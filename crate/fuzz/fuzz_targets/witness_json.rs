#![no_main]

use geospace::lab::Witness;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // decoding only; recheck() integrates geodesics and is too slow to fuzz
    if let Ok(w) = serde_json::from_slice::<Witness>(data) {
        let _ = w.kind();
        let _ = serde_json::to_string(&w);
    }
});
