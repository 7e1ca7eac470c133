//! Feature schema, encoded datasets, CSV I/O and the synthetic generator.

pub mod csv_io;
pub mod dataset;
pub mod schema;
pub mod synthetic;

pub use csv_io::{load_csv, load_csv_as, read_csv, save_csv, write_csv};
pub use dataset::{empirical_frequency, FeatureValue, MultiDomainDataset, Sample, Split};
pub use schema::{Arity, FeatureGroup, FeatureKind, FeatureSchema, FeatureSpec};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticFeature};
