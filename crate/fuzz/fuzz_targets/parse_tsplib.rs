#![no_main]

use fair_mtsp::Instance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = Instance::parse_tsplib(text) {
        let n = inst.n_vertices();
        for i in 0..n {
            assert_eq!(inst.cost(i, i), 0.0);
        }
        let again = Instance::parse_tsplib(&inst.to_tsplib()).expect("written instance parses");
        assert_eq!(again.n_vertices(), n);
    }
});
