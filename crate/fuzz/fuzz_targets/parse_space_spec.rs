#![no_main]

use geospace::{Space, SpaceSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(spec) = s.parse::<SpaceSpec>() {
            // the canonical spelling must parse back to the same spec
            let again: SpaceSpec = spec.to_string().parse().expect("display output parses");
            assert_eq!(again, spec);
            let _ = Space::new(spec);
        }
    }
});
