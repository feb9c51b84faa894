//! Record and label file formats, feature-matrix CSV, and a synthetic ECG
//! generator used as a test fixture and by the CLI.

pub mod features_csv;
pub mod labels;
pub mod record;
pub mod synth;

pub use record::{read_record, write_record, EcgRecord};
pub use synth::{synth_ecg, SynthConfig, SynthEcg};
