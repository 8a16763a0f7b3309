#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(z) = ec3::parse_assignment(text) {
        let again = ec3::parse_assignment(&z.to_string()).expect("printed assignment must parse");
        assert_eq!(again, z);
    }
});
