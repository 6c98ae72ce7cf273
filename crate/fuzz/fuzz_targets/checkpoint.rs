#![no_main]

use libfuzzer_sys::fuzz_target;
use trace_sharp::rayleigh::{decode_checkpoint, encode_checkpoint, CylinderModel, DiscreteField};

fuzz_target!(|data: &[u8]| {
    if let Ok((header, values)) = decode_checkpoint(data) {
        // Anything the decoder accepts must rebuild a model and field.
        let model = CylinderModel::from_spec(header.model).expect("decoded spec is valid");
        let field = DiscreteField::from_values(&model, values).expect("decoded values fit the grid");
        let (h2, v2) = decode_checkpoint(&encode_checkpoint(&header, &field)).expect("re-encoded checkpoint decodes");
        assert_eq!(h2, header);
        assert_eq!(v2, field.values());
    }
});
