//! Single-head attention kernels with hand-written reverse passes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Linear,
    Softmax,
}

impl std::str::FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Kernel::Linear),
            "softmax" => Ok(Kernel::Softmax),
            other => Err(Error::Config(format!("unknown kernel `{other}`"))),
        }
    }
}

impl Kernel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Softmax => "softmax",
        }
    }
}

/// `ELU(x) + 1`, strictly positive for finite `x`.
#[inline]
pub fn feature_map(x: f64) -> f64 {
    if x > 0.0 {
        x + 1.0
    } else {
        x.exp()
    }
}

#[inline]
fn feature_map_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_vec(t.rows, t.cols, t.data.iter().map(|&x| f(x)).collect())
}

/// Intermediate values of one attention evaluation.
#[derive(Debug, Clone)]
pub enum AttentionCache {
    Linear {
        phi_q: Tensor,
        phi_k: Tensor,
        /// `Σ_j φ(K_j)ᵀ V_j`, `d′ × d_v`
        s: Tensor,
        /// `Σ_j φ(K_j)`
        z: Vec<f64>,
        den: Vec<f64>,
        out: Tensor,
    },
    Softmax {
        probs: Tensor,
    },
}

fn check_shapes(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<()> {
    if q.cols != k.cols || k.rows != v.rows || k.rows == 0 {
        return Err(Error::Shape(format!(
            "attention shapes Q {}x{}, K {}x{}, V {}x{}",
            q.rows, q.cols, k.rows, k.cols, v.rows, v.cols
        )));
    }
    if !(q.is_finite() && k.is_finite() && v.is_finite()) {
        return Err(Error::Value("non-finite attention input".into()));
    }
    Ok(())
}

/// Aggregated linear attention: `S` and `z` are built once, so the cost is
/// linear in both sequence lengths.
pub fn linear_attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    check_shapes(q, k, v)?;
    Ok(linear_forward(q, k, v).0)
}

pub fn softmax_attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    check_shapes(q, k, v)?;
    Ok(softmax_forward(q, k, v).0)
}

pub fn attention(kernel: Kernel, q: &Tensor, k: &Tensor, v: &Tensor) -> (Tensor, AttentionCache) {
    match kernel {
        Kernel::Linear => linear_forward(q, k, v),
        Kernel::Softmax => softmax_forward(q, k, v),
    }
}

fn linear_forward(q: &Tensor, k: &Tensor, v: &Tensor) -> (Tensor, AttentionCache) {
    let phi_q = map(q, feature_map);
    let phi_k = map(k, feature_map);
    let s = phi_k.t_matmul(v);
    let mut z = vec![0.0; phi_k.cols];
    for j in 0..phi_k.rows {
        for (za, &p) in z.iter_mut().zip(phi_k.row(j)) {
            *za += p;
        }
    }
    let mut out = phi_q.matmul(&s);
    let mut den = Vec::with_capacity(q.rows);
    for i in 0..q.rows {
        let d = crate::nn::tensor::dot(phi_q.row(i), &z);
        den.push(d);
        out.row_mut(i).iter_mut().for_each(|x| *x /= d);
    }
    let cache = AttentionCache::Linear {
        phi_q,
        phi_k,
        s,
        z,
        den,
        out: out.clone(),
    };
    (out, cache)
}

fn softmax_forward(q: &Tensor, k: &Tensor, v: &Tensor) -> (Tensor, AttentionCache) {
    let scale = 1.0 / (q.cols as f64).sqrt();
    let mut probs = q.matmul_t(k);
    for i in 0..probs.rows {
        let row = probs.row_mut(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x * scale));
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x * scale - max).exp();
            total += *x;
        }
        row.iter_mut().for_each(|x| *x /= total);
    }
    let out = probs.matmul(v);
    (out, AttentionCache::Softmax { probs })
}

/// Gradients with respect to `Q`, `K` and `V` given `dOut`.
pub fn attention_backward(
    cache: &AttentionCache,
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    dout: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    match cache {
        AttentionCache::Linear {
            phi_q,
            phi_k,
            s,
            z,
            den,
            out,
        } => {
            let n = q.rows;
            let mut dnum = dout.clone();
            let mut dden = vec![0.0; n];
            for i in 0..n {
                dden[i] = -crate::nn::tensor::dot(dout.row(i), out.row(i)) / den[i];
                dnum.row_mut(i).iter_mut().for_each(|x| *x /= den[i]);
            }
            // through out = num / den and num = φ(Q) S, den = φ(Q) z
            let mut dphi_q = dnum.matmul_t(s);
            for i in 0..n {
                for (d, &za) in dphi_q.row_mut(i).iter_mut().zip(z) {
                    *d += dden[i] * za;
                }
            }
            let ds = phi_q.t_matmul(&dnum);
            let mut dz = vec![0.0; z.len()];
            for i in 0..n {
                for (d, &p) in dz.iter_mut().zip(phi_q.row(i)) {
                    *d += dden[i] * p;
                }
            }
            // through S = φ(K)ᵀ V and z = Σ φ(K_j)
            let mut dphi_k = v.matmul_t(&ds);
            for j in 0..dphi_k.rows {
                for (d, &za) in dphi_k.row_mut(j).iter_mut().zip(&dz) {
                    *d += za;
                }
            }
            let dv = phi_k.matmul(&ds);
            let mut dq = dphi_q;
            for (d, &x) in dq.data.iter_mut().zip(&q.data) {
                *d *= feature_map_grad(x);
            }
            let mut dk = dphi_k;
            for (d, &x) in dk.data.iter_mut().zip(&k.data) {
                *d *= feature_map_grad(x);
            }
            (dq, dk, dv)
        }
        AttentionCache::Softmax { probs } => {
            let scale = 1.0 / (q.cols as f64).sqrt();
            let dp = dout.matmul_t(v);
            let dv = probs.t_matmul(dout);
            let mut dscore = Tensor::zeros(probs.rows, probs.cols);
            for i in 0..probs.rows {
                let p = probs.row(i);
                let g = dp.row(i);
                let inner = crate::nn::tensor::dot(p, g);
                for (j, d) in dscore.row_mut(i).iter_mut().enumerate() {
                    *d = p[j] * (g[j] - inner) * scale;
                }
            }
            (dscore.matmul(k), dscore.t_matmul(q), dv)
        }
    }
}
