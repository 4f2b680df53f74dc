#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = qopula::ansatz::Checkpoint::parse(data) {
        // A parsed checkpoint must round-trip and describe a buildable circuit.
        let json = ckpt.to_json();
        let again = qopula::ansatz::Checkpoint::parse(json.as_bytes()).expect("round-trip");
        assert_eq!(ckpt, again);
        let spec = ckpt.spec().expect("validated spec");
        qopula::ansatz::assemble(&spec, &ckpt.theta).expect("assemble validated checkpoint");
    }
});
