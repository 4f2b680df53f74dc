#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = qopula_cli::run::parse_any_checkpoint(data);
});
