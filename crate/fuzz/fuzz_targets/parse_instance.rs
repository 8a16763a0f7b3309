#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(inst) = ec3::parse_instance(text) {
        let again = ec3::parse_instance(&inst.to_string()).expect("printed instance must parse");
        assert_eq!(again, inst);
        assert_eq!(inst.clause_degree().iter().sum::<usize>(), 3 * inst.n_clauses());
    }
});
