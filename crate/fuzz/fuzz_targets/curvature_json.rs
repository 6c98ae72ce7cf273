#![no_main]

use libfuzzer_sys::fuzz_target;
use trace_sharp::geometry::CurvatureData;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = CurvatureData::parse_json(text) {
        let back = CurvatureData::parse_json(&d.to_json()).expect("serialized data parses");
        assert_eq!(back, d);
    }
});
