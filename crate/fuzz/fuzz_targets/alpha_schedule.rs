#![no_main]

use libfuzzer_sys::fuzz_target;
use trace_sharp::rayleigh::AlphaSchedule;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = text.parse::<AlphaSchedule>() {
        let v = s.values();
        assert!(!v.is_empty());
        assert!(v.iter().all(|a| a.is_finite() && *a >= 0.0));
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        let again: AlphaSchedule = v.iter().map(f64::to_string).collect::<Vec<_>>().join(",").parse().unwrap();
        assert_eq!(again, s);
    }
});
