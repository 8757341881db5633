#![no_main]

use dlmnet::netlist::parse_netlist;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(doc) = parse_netlist(text) {
            let again = parse_netlist(&doc.to_string()).expect("printed netlist parses");
            assert_eq!(again, doc);
        }
    }
});
