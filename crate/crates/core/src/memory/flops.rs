//! Closed-form forward FLOP counts. A multiply-add counts as two
//! operations; elementwise adds, divisions and exponentials count as one.

use serde::{Deserialize, Serialize};

use super::attention::Kernel;
use super::model::MemoryModelConfig;

/// `2·in·out` for the product plus `out` bias adds.
pub fn dense_flops(input: usize, output: usize) -> u64 {
    2 * (input * output) as u64 + output as u64
}

fn tower_flops(input: usize, hidden: &[usize]) -> u64 {
    let mut dims = vec![input];
    dims.extend_from_slice(hidden);
    dims.push(1);
    dims.windows(2).map(|w| dense_flops(w[0], w[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RetrieverFlops {
    /// `Q`, `K`, `V` projections.
    pub projections: u64,
    /// Attention weights. Softmax: the `n × n_k` score matrix and its
    /// normalization. Linear: feature maps and the per-query denominators.
    pub scores: u64,
    /// Value mixing. Linear: `S` aggregation and `φ(Q) S`.
    pub mixing: u64,
    /// `W_O` and the first residual.
    pub output: u64,
    /// Both FFN layers, ReLU excluded, plus the second residual.
    pub ffn: u64,
}

impl RetrieverFlops {
    pub fn total(&self) -> u64 {
        self.projections + self.scores + self.mixing + self.output + self.ffn
    }
}

/// One retriever over `n` query tokens and `n_k` key tokens of width `d`.
pub fn retriever_flops(n: usize, n_k: usize, d: usize, d_attn: usize, d_ffn: usize, kernel: Kernel) -> RetrieverFlops {
    let (n, nk, d, da, df) = (n as u64, n_k as u64, d as u64, d_attn as u64, d_ffn as u64);
    let projections = 2 * n * d * da + 2 * 2 * nk * d * da;
    let (scores, mixing) = match kernel {
        Kernel::Linear => (
            // φ(Q), φ(K), z = Σ φ(K_j), φ(Q_i)·z
            n * da + nk * da + nk * da + 2 * n * da,
            // S = φ(K)ᵀV, φ(Q)S, division by the denominator
            2 * nk * da * da + 2 * n * da * da + n * da,
        ),
        Kernel::Softmax => (
            // QKᵀ, scaling, exp, row sums, division
            2 * n * nk * da + 4 * n * nk,
            2 * n * nk * da,
        ),
    };
    RetrieverFlops {
        projections,
        scores,
        mixing,
        output: 2 * n * da * d + n * d,
        ffn: n * (2 * d * df + df) + n * (2 * df * d + d) + n * d,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopsReport {
    pub kernel: Kernel,
    /// Mean pooling of the embedding lookups.
    pub embeddings: u64,
    pub base_tower: u64,
    pub extractor: u64,
    pub emb_retriever: Option<RetrieverFlops>,
    pub hidden_retrievers: Vec<RetrieverFlops>,
    /// Final logit merge.
    pub merge: u64,
    pub total: u64,
}

impl FlopsReport {
    /// The same network with every memory component removed.
    pub fn base_dnn_total(&self) -> u64 {
        self.embeddings + self.base_tower
    }

    pub fn render_table(&self) -> String {
        let mut rows = vec![
            ("embeddings".to_string(), self.embeddings),
            ("base tower".to_string(), self.base_tower),
            ("extractor".to_string(), self.extractor),
        ];
        if let Some(r) = &self.emb_retriever {
            rows.push(("retriever (embedding)".to_string(), r.total()));
        }
        for (i, r) in self.hidden_retrievers.iter().enumerate() {
            rows.push((format!("retriever (hidden {})", i + 1), r.total()));
        }
        rows.push(("logit merge".to_string(), self.merge));
        let mut out = format!("kernel: {}\n", self.kernel.as_str());
        for (name, v) in rows {
            out.push_str(&format!("  {name:<24}{v:>14}\n"));
        }
        out.push_str(&format!("  {:<24}{:>14}\n", "total", self.total));
        out.push_str(&format!("  {:<24}{:>14}\n", "base DNN alone", self.base_dnn_total()));
        out
    }
}

/// Forward FLOPs of one sample through the configured model. Sequence
/// pooling is counted as one add per embedding element.
pub fn count_flops(config: &MemoryModelConfig, num_features: usize) -> FlopsReport {
    let d = config.embedding_dim;
    let ns = config.sensitive.len();
    let ext_sizes = config.extractor_sizes();
    let need_ext = config.use_aux_logit || config.use_hidden_attn;
    let emb_retriever = config
        .use_emb_attn
        .then(|| retriever_flops(num_features, ns, d, config.attn_dim_emb, config.ffn_mult * d, config.kernel));
    let hidden_retrievers: Vec<RetrieverFlops> = if config.use_hidden_attn {
        config
            .hidden
            .iter()
            .zip(&ext_sizes)
            .take(config.hidden.len().saturating_sub(1))
            .map(|(&h, &he)| retriever_flops(h, he, 1, config.attn_dim_hidden, config.ffn_hidden, config.kernel))
            .collect()
    } else {
        Vec::new()
    };
    let mut report = FlopsReport {
        kernel: config.kernel,
        embeddings: (num_features * d) as u64,
        base_tower: tower_flops(num_features * d, &config.hidden),
        extractor: if need_ext { tower_flops(ns * d, &ext_sizes) } else { 0 },
        emb_retriever,
        hidden_retrievers,
        merge: u64::from(config.use_aux_logit),
        total: 0,
    };
    report.total = report.embeddings
        + report.base_tower
        + report.extractor
        + report.emb_retriever.map_or(0, |r| r.total())
        + report.hidden_retrievers.iter().map(|r| r.total()).sum::<u64>()
        + report.merge;
    report
}
