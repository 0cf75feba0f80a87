#![no_main]

use fair_mtsp::formulation::{build_base, decode};
use fair_mtsp::Instance;
use libfuzzer_sys::fuzz_target;

// Byte 0 picks the target count, byte 1 the salesmen, the rest the column values.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let targets = 2 + data[0] as usize % 5;
    let m = 2 + data[1] as usize % 2;
    let coords: Vec<[f64; 2]> = (0..=targets).map(|i| [i as f64, (i * i % 7) as f64]).collect();
    let inst = Instance::from_coords("fuzz", coords, fair_mtsp::Metric::Euclidean, Some(0)).unwrap();
    let Ok((lp, vm)) = build_base(&inst, m) else { return };
    let mut bytes = data[2..].iter().cycle();
    let x: Vec<f64> = (0..lp.num_cols())
        .map(|_| match bytes.next().copied().unwrap_or(0) % 8 {
            0..=3 => 0.0,
            4 | 5 => 1.0,
            6 => 2.0,
            _ => 0.5,
        })
        .collect();
    if let Ok(tours) = decode(&vm, &x, 1e-6) {
        assert_eq!(tours.len(), m);
        for t in &tours {
            assert_eq!(t.first(), Some(&vm.depot));
            assert_eq!(t.last(), Some(&vm.depot));
        }
    }
});
