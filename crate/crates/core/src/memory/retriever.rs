//! Cross-attention block that lets one tower read from the other:
//! `A = Attn(Z W_Q, Z_ext W_K, Z_ext W_V) W_O`, `Z^A = Z + A`,
//! `Z' = FFN(Z^A) + Z^A` with `FFN(x) = ReLU(x W_1 + b_1) W_2 + b_2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::{attention, attention_backward, AttentionCache, Kernel};
use crate::error::{Error, Result};
use crate::nn::layers::{relu, relu_grad};
use crate::nn::{Dense, Parameters, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retriever {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub ffn1: Dense,
    pub ffn2: Dense,
}

#[derive(Debug, Clone)]
pub struct RetrieverCache {
    z: Tensor,
    z_ext: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    attn: AttentionCache,
    attn_out: Tensor,
    za: Tensor,
    ffn_pre: Tensor,
    ffn_act: Tensor,
}

impl Retriever {
    /// `d` token width, `d_attn` attention width, `d_ffn` FFN hidden width.
    pub fn init<R: Rng + ?Sized>(d: usize, d_attn: usize, d_ffn: usize, rng: &mut R) -> Self {
        let b_in = 1.0 / (d as f64).sqrt();
        let b_attn = 1.0 / (d_attn as f64).sqrt();
        Retriever {
            wq: Tensor::uniform(d, d_attn, b_in, rng),
            wk: Tensor::uniform(d, d_attn, b_in, rng),
            wv: Tensor::uniform(d, d_attn, b_in, rng),
            wo: Tensor::uniform(d_attn, d, b_attn, rng),
            ffn1: Dense::init(d, d_ffn, rng),
            ffn2: Dense::init(d_ffn, d, rng),
        }
    }

    pub fn zeros(d: usize, d_attn: usize, d_ffn: usize) -> Self {
        Retriever {
            wq: Tensor::zeros(d, d_attn),
            wk: Tensor::zeros(d, d_attn),
            wv: Tensor::zeros(d, d_attn),
            wo: Tensor::zeros(d_attn, d),
            ffn1: Dense::zeros(d, d_ffn),
            ffn2: Dense::zeros(d_ffn, d),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Retriever::zeros(self.token_dim(), self.attn_dim(), self.ffn_dim())
    }

    pub fn token_dim(&self) -> usize {
        self.wq.rows
    }

    pub fn attn_dim(&self) -> usize {
        self.wq.cols
    }

    pub fn ffn_dim(&self) -> usize {
        self.ffn1.output_dim()
    }

    fn check(&self, z: &Tensor, z_ext: &Tensor) -> Result<()> {
        let d = self.token_dim();
        if z.cols != d || z_ext.cols != d || z_ext.rows == 0 {
            return Err(Error::Shape(format!(
                "retriever of width {d} got Z {}x{} and Z_ext {}x{}",
                z.rows, z.cols, z_ext.rows, z_ext.cols
            )));
        }
        Ok(())
    }

    pub fn forward(&self, z: &Tensor, z_ext: &Tensor, kernel: Kernel) -> Result<Tensor> {
        self.check(z, z_ext)?;
        Ok(self.forward_cached(z, z_ext, kernel).0)
    }

    pub fn forward_cached(&self, z: &Tensor, z_ext: &Tensor, kernel: Kernel) -> (Tensor, RetrieverCache) {
        let q = z.matmul(&self.wq);
        let k = z_ext.matmul(&self.wk);
        let v = z_ext.matmul(&self.wv);
        let (attn_out, attn) = attention(kernel, &q, &k, &v);
        let mut za = attn_out.matmul(&self.wo);
        za.add_assign(z);
        let ffn_pre = self.ffn1.forward_rows(&za);
        let ffn_act = Tensor::from_vec(
            ffn_pre.rows,
            ffn_pre.cols,
            ffn_pre.data.iter().map(|&x| relu(x)).collect(),
        );
        let mut out = self.ffn2.forward_rows(&ffn_act);
        out.add_assign(&za);
        let cache = RetrieverCache {
            z: z.clone(),
            z_ext: z_ext.clone(),
            q,
            k,
            v,
            attn,
            attn_out,
            za,
            ffn_pre,
            ffn_act,
        };
        (out, cache)
    }

    /// Accumulates parameter gradients; returns `(dZ, dZ_ext)`.
    pub fn backward(&self, cache: &RetrieverCache, dout: &Tensor, grads: &mut Retriever) -> (Tensor, Tensor) {
        // Z' = FFN(Z^A) + Z^A
        let mut d_act = self.ffn2.backward_rows(&cache.ffn_act, dout, &mut grads.ffn2);
        for (d, &p) in d_act.data.iter_mut().zip(&cache.ffn_pre.data) {
            *d *= relu_grad(p);
        }
        let mut dza = self.ffn1.backward_rows(&cache.za, &d_act, &mut grads.ffn1);
        dza.add_assign(dout);
        // Z^A = Z + O W_O
        grads.wo.add_assign(&cache.attn_out.t_matmul(&dza));
        let d_attn = dza.matmul_t(&self.wo);
        let (dq, dk, dv) = attention_backward(&cache.attn, &cache.q, &cache.k, &cache.v, &d_attn);
        grads.wq.add_assign(&cache.z.t_matmul(&dq));
        grads.wk.add_assign(&cache.z_ext.t_matmul(&dk));
        grads.wv.add_assign(&cache.z_ext.t_matmul(&dv));
        let mut dz = dza;
        dz.add_assign(&dq.matmul_t(&self.wq));
        let mut dz_ext = dk.matmul_t(&self.wk);
        dz_ext.add_assign(&dv.matmul_t(&self.wv));
        (dz, dz_ext)
    }
}

impl Parameters for Retriever {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.wq, &self.wk, &self.wv, &self.wo];
        v.extend(self.ffn1.tensors());
        v.extend(self.ffn2.tensors());
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.wq, &mut self.wk, &mut self.wv, &mut self.wo];
        v.extend(self.ffn1.tensors_mut());
        v.extend(self.ffn2.tensors_mut());
        v
    }
}
