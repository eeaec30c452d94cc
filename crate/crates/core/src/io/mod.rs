//! On-disk formats: RFDC cubes, RFDM sequences, RFNN checkpoints, JSON
//! manifests and plot exports. Every decoder returns an error, never panics,
//! on malformed input.

mod bytes;
mod checkpoint;
mod cube;
mod manifest;
mod plot;
mod rfdm;

pub use checkpoint::{
    decode_checkpoint, descriptor, encode_checkpoint, Descriptor, TensorEntry, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use cube::{decode_cube, encode_cube, RawCube, CUBE_MAGIC, CUBE_VERSION};
pub use manifest::{read_verified, write_file, DatasetManifest, Location, PayloadKind, SampleRecord};
pub use plot::{confusion_csv, curve_csv, frame_csv, frame_pgm};
pub use rfdm::{decode_rfdm, encode_rfdm, quantize, RFDM_MAGIC, RFDM_VERSION};
