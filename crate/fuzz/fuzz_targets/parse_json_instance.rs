#![no_main]

use fair_mtsp::Instance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = Instance::from_json(text) {
        let again = Instance::from_json(&inst.to_json()).expect("written instance parses");
        assert_eq!(again.n_vertices(), inst.n_vertices());
        assert_eq!(again.depot(), inst.depot());
    }
});
