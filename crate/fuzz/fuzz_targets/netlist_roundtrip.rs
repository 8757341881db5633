#![no_main]

use dlmnet::netlist::parse_syntax;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(doc) = parse_syntax(text) {
            let printed = doc.to_string();
            let again = parse_syntax(&printed).expect("printed netlist parses");
            assert_eq!(again, doc);
            assert_eq!(again.to_string(), printed);
        }
    }
});
