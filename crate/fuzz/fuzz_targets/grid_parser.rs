#![no_main]

use libfuzzer_sys::fuzz_target;
use trace_sharp::rayleigh::GridSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = text.parse::<GridSpec>() {
        assert_eq!(format!("{},{}", g.jx, g.jt).parse::<GridSpec>().unwrap(), g);
    }
});
