//! Tabular ingestion, encoding, splitting and synthetic ground-truth data.

mod datasets;
mod encode;
mod schema;
mod split;
mod synth;
mod table;

pub use datasets::{adult_schema, compas_schema, gmc_schema, named_schema, ADULT_LABEL, COMPAS_LABEL, GMC_LABEL};
pub use encode::{encode_scale, EncodedColumn, EncodedDataset, EncodingWarning, ScalerParams, TabularEncoder};
pub(crate) use encode::argmax;
pub use schema::{Actionability, FeatureKind, FeatureSchema, FeatureSpec};
pub use split::{split, split_indices, SplitSpec};
pub use synth::{adult_like_table, segment_manifold, synth_linear, SyntheticLinear, SEGMENT_HEIGHT};
pub use table::{load_csv, parse_named_row, read_csv, RawTable, RawValue};
