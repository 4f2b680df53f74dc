#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = qopula::nnet::Mlp::parse(data) {
        let json = net.to_json();
        let again = qopula::nnet::Mlp::parse(json.as_bytes()).expect("round-trip");
        assert_eq!(net, again);
    }
});
