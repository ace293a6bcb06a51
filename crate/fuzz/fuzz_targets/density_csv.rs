#![no_main]

use libfuzzer_sys::fuzz_target;
use randcoef::io::{read_density_csv, write_density_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = read_density_csv(data) {
        let mut buf = Vec::new();
        write_density_csv(&mut buf, &table).unwrap();
        let again = read_density_csv(buf.as_slice()).unwrap();
        assert_eq!(again.rows.len(), table.rows.len());
    }
});
