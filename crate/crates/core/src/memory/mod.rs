//! Domain-sensitive feature memory: an extractor tower over the sensitive
//! features and cross-attention retrievers that feed it into the base tower.

pub mod attention;
pub mod flops;
pub mod model;
pub mod retriever;

pub use attention::{feature_map, linear_attention, softmax_attention, Kernel};
pub use flops::{count_flops, dense_flops, retriever_flops, FlopsReport, RetrieverFlops};
pub use model::{MemoryCache, MemoryModel, MemoryModelConfig};
pub use retriever::{Retriever, RetrieverCache};
