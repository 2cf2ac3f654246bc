//! Per-token KV-cache size and training FLOPs.
//!
//! FLOPs counting convention:
//!
//! * forward FLOPs are `2 x` multiply-accumulates over the attention
//!   projections, the attention score/value products and the active FFN
//!   path (shared plus top-k routed experts for MoE layers);
//! * attention score/value products use the average causal context,
//!   `seq_len / 2`;
//! * embedding and LM-head matmuls and the router are not counted;
//! * training is `3 x` forward (backward costs twice the forward pass).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemCalcError {
    #[error("invalid model config: {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unsupported attention configuration: {0}")]
    UnsupportedAttention(String),
}

fn invalid(field: &str, reason: impl Into<String>) -> MemCalcError {
    MemCalcError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    Mla,
    Gqa,
    Mqa,
    Mha,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub kind: AttentionKind,
    pub heads: u64,
    /// Per-head query/key width. For MLA this is the non-positional part.
    pub head_dim: u64,
    /// KV heads for GQA/MQA/MHA.
    #[serde(default)]
    pub kv_heads: u64,
    /// MLA compressed KV width.
    #[serde(default)]
    pub latent_dim: u64,
    /// MLA decoupled rotary key width, cached alongside the latent.
    #[serde(default)]
    pub rope_dim: u64,
    /// MLA low-rank query width; 0 means a direct query projection.
    #[serde(default)]
    pub q_latent_dim: u64,
    /// Per-head value width; defaults to `head_dim`.
    #[serde(default)]
    pub v_head_dim: Option<u64>,
}

impl AttentionConfig {
    pub fn value_dim(&self) -> u64 {
        self.v_head_dim.unwrap_or(self.head_dim)
    }

    fn validate(&self) -> Result<(), MemCalcError> {
        if self.heads == 0 {
            return Err(invalid("attention.heads", "must be >= 1"));
        }
        if self.head_dim == 0 {
            return Err(invalid("attention.head_dim", "must be >= 1"));
        }
        if self.v_head_dim == Some(0) {
            return Err(invalid("attention.v_head_dim", "must be >= 1"));
        }
        match self.kind {
            AttentionKind::Mla if self.latent_dim == 0 => Err(invalid("attention.latent_dim", "MLA needs latent_dim > 0")),
            AttentionKind::Mqa if self.kv_heads != 1 => Err(invalid("attention.kv_heads", "MQA needs kv_heads = 1")),
            AttentionKind::Mha if self.kv_heads != self.heads => {
                Err(invalid("attention.kv_heads", "MHA needs kv_heads = heads"))
            }
            AttentionKind::Gqa if self.kv_heads == 0 || !self.heads.is_multiple_of(self.kv_heads) => {
                Err(invalid("attention.kv_heads", "GQA needs kv_heads >= 1 dividing heads"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FfnKind {
    Dense,
    Moe,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FfnConfig {
    pub kind: FfnKind,
    /// Dense FFN width (all layers for dense models, the leading layers for MoE).
    pub inter_dim: u64,
    #[serde(default)]
    pub n_routed_experts: u64,
    #[serde(default)]
    pub n_shared_experts: u64,
    #[serde(default)]
    pub top_k: u64,
    #[serde(default)]
    pub expert_inter_dim: u64,
    /// Leading layers that use a dense FFN in an MoE model.
    #[serde(default)]
    pub n_dense_layers: u64,
    /// Gated (SwiGLU) FFNs have three weight matrices instead of two.
    #[serde(default = "default_true")]
    pub gated: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    pub layers: u64,
    pub hidden_dim: u64,
    pub attention: AttentionConfig,
    pub ffn: FfnConfig,
    #[serde(default)]
    pub vocab: Option<u64>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), MemCalcError> {
        if self.layers == 0 {
            return Err(invalid("layers", "must be >= 1"));
        }
        if self.hidden_dim == 0 {
            return Err(invalid("hidden_dim", "must be >= 1"));
        }
        if self.vocab == Some(0) {
            return Err(invalid("vocab", "must be >= 1"));
        }
        self.attention.validate()?;
        let f = &self.ffn;
        if f.n_dense_layers > self.layers {
            return Err(invalid("ffn.n_dense_layers", "exceeds layers"));
        }
        let needs_dense = f.kind == FfnKind::Dense || f.n_dense_layers > 0;
        if needs_dense && f.inter_dim == 0 {
            return Err(invalid("ffn.inter_dim", "must be >= 1"));
        }
        if f.kind == FfnKind::Moe {
            if f.n_routed_experts == 0 {
                return Err(invalid("ffn.n_routed_experts", "must be >= 1"));
            }
            if f.top_k == 0 || f.top_k > f.n_routed_experts {
                return Err(invalid("ffn.top_k", "must be in 1..=n_routed_experts"));
            }
            if f.expert_inter_dim == 0 {
                return Err(invalid("ffn.expert_inter_dim", "must be >= 1"));
            }
        }
        Ok(())
    }
}

/// Bytes of KV cache one token occupies across all layers.
pub fn kv_bytes_per_token(cfg: &ModelConfig, bytes_per_element: u64) -> Result<u64, MemCalcError> {
    let a = &cfg.attention;
    a.validate().map_err(|e| MemCalcError::UnsupportedAttention(e.to_string()))?;
    let per_layer = match a.kind {
        AttentionKind::Mla => a.latent_dim + a.rope_dim,
        AttentionKind::Gqa | AttentionKind::Mqa | AttentionKind::Mha => 2 * a.kv_heads * a.head_dim,
    };
    Ok(cfg.layers * per_layer * bytes_per_element)
}

/// `kv_bytes(a) / kv_bytes(b)`.
pub fn kv_multiplier(a: &ModelConfig, b: &ModelConfig, bytes_per_element: u64) -> Result<f64, MemCalcError> {
    Ok(kv_bytes_per_token(a, bytes_per_element)? as f64 / kv_bytes_per_token(b, bytes_per_element)? as f64)
}

/// Per-token training FLOPs split by component. Every field except
/// `forward` and `total` is a forward-pass count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopsBreakdown {
    pub attention_proj: f64,
    pub attention_core: f64,
    pub dense_ffn: f64,
    pub moe_ffn: f64,
    pub forward: f64,
    /// Forward plus backward.
    pub total: f64,
}

impl FlopsBreakdown {
    pub fn total_gflops(&self) -> f64 {
        self.total / 1e9
    }
}

/// Training FLOPs per token at sequence length `seq_len`.
pub fn train_flops_per_token(cfg: &ModelConfig, seq_len: u64) -> Result<FlopsBreakdown, MemCalcError> {
    cfg.validate()?;
    if seq_len == 0 {
        return Err(invalid("seq_len", "must be >= 1"));
    }
    let d = cfg.hidden_dim as f64;
    let a = &cfg.attention;
    let heads = a.heads as f64;
    let v_dim = a.value_dim() as f64;

    // multiply-accumulates per token per layer
    let (proj_macs, qk_dim) = match a.kind {
        AttentionKind::Mla => {
            let qk = (a.head_dim + a.rope_dim) as f64;
            let q = if a.q_latent_dim > 0 {
                let ql = a.q_latent_dim as f64;
                d * ql + ql * heads * qk
            } else {
                d * heads * qk
            };
            let kv_down = d * (a.latent_dim + a.rope_dim) as f64;
            let kv_up = a.latent_dim as f64 * heads * (a.head_dim as f64 + v_dim);
            let out = heads * v_dim * d;
            (q + kv_down + kv_up + out, qk)
        }
        AttentionKind::Gqa | AttentionKind::Mqa | AttentionKind::Mha => {
            let hd = a.head_dim as f64;
            let kv = a.kv_heads as f64;
            let q = d * heads * hd;
            let k = d * kv * hd;
            let v = d * kv * v_dim;
            let out = heads * v_dim * d;
            (q + k + v + out, hd)
        }
    };
    let context = seq_len as f64 / 2.0;
    let core_macs = heads * (qk_dim + v_dim) * context;

    let f = &cfg.ffn;
    let mats = if f.gated { 3.0 } else { 2.0 };
    let (dense_layers, moe_layers) = match f.kind {
        FfnKind::Dense => (cfg.layers, 0),
        FfnKind::Moe => (f.n_dense_layers, cfg.layers - f.n_dense_layers),
    };
    let dense_macs = dense_layers as f64 * mats * d * f.inter_dim as f64;
    let active_experts = (f.top_k + f.n_shared_experts) as f64;
    let moe_macs = moe_layers as f64 * active_experts * mats * d * f.expert_inter_dim as f64;

    let layers = cfg.layers as f64;
    let attention_proj = 2.0 * layers * proj_macs;
    let attention_core = 2.0 * layers * core_macs;
    let dense_ffn = 2.0 * dense_macs;
    let moe_ffn = 2.0 * moe_macs;
    let forward = attention_proj + attention_core + dense_ffn + moe_ffn;
    Ok(FlopsBreakdown {
        attention_proj,
        attention_core,
        dense_ffn,
        moe_ffn,
        forward,
        total: 3.0 * forward,
    })
}

/// Built-in model descriptions.
pub mod presets {
    use super::*;

    pub const NAMES: [&str; 4] = ["deepseek-v3", "deepseek-v2", "qwen2.5-72b", "llama3.1-405b"];

    pub fn get(name: &str) -> Option<ModelConfig> {
        match name {
            "deepseek-v3" => Some(deepseek_v3()),
            "deepseek-v2" => Some(deepseek_v2()),
            "qwen2.5-72b" => Some(qwen25_72b()),
            "llama3.1-405b" => Some(llama31_405b()),
            _ => None,
        }
    }

    pub fn all() -> Vec<ModelConfig> {
        NAMES.iter().filter_map(|n| get(n)).collect()
    }

    fn mla(heads: u64, q_latent_dim: u64) -> AttentionConfig {
        AttentionConfig {
            kind: AttentionKind::Mla,
            heads,
            head_dim: 128,
            kv_heads: 0,
            latent_dim: 512,
            rope_dim: 64,
            q_latent_dim,
            v_head_dim: Some(128),
        }
    }

    fn gqa(heads: u64, kv_heads: u64) -> AttentionConfig {
        AttentionConfig {
            kind: AttentionKind::Gqa,
            heads,
            head_dim: 128,
            kv_heads,
            latent_dim: 0,
            rope_dim: 0,
            q_latent_dim: 0,
            v_head_dim: None,
        }
    }

    fn dense(inter_dim: u64) -> FfnConfig {
        FfnConfig {
            kind: FfnKind::Dense,
            inter_dim,
            n_routed_experts: 0,
            n_shared_experts: 0,
            top_k: 0,
            expert_inter_dim: 0,
            n_dense_layers: 0,
            gated: true,
        }
    }

    pub fn deepseek_v3() -> ModelConfig {
        ModelConfig {
            name: "deepseek-v3".into(),
            layers: 61,
            hidden_dim: 7168,
            attention: mla(128, 1536),
            ffn: FfnConfig {
                kind: FfnKind::Moe,
                inter_dim: 18432,
                n_routed_experts: 256,
                n_shared_experts: 1,
                top_k: 8,
                expert_inter_dim: 2048,
                n_dense_layers: 3,
                gated: true,
            },
            vocab: Some(129280),
        }
    }

    pub fn deepseek_v2() -> ModelConfig {
        ModelConfig {
            name: "deepseek-v2".into(),
            layers: 60,
            hidden_dim: 5120,
            attention: mla(128, 1536),
            ffn: FfnConfig {
                kind: FfnKind::Moe,
                inter_dim: 12288,
                n_routed_experts: 160,
                n_shared_experts: 2,
                top_k: 6,
                expert_inter_dim: 1536,
                n_dense_layers: 1,
                gated: true,
            },
            vocab: Some(102400),
        }
    }

    pub fn qwen25_72b() -> ModelConfig {
        ModelConfig {
            name: "qwen2.5-72b".into(),
            layers: 80,
            hidden_dim: 8192,
            attention: gqa(64, 8),
            ffn: dense(29568),
            vocab: Some(152064),
        }
    }

    pub fn llama31_405b() -> ModelConfig {
        ModelConfig {
            name: "llama3.1-405b".into(),
            layers: 126,
            hidden_dim: 16384,
            attention: gqa(128, 8),
            ffn: dense(53248),
            vocab: Some(128256),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            name: "tiny".into(),
            layers: 1,
            hidden_dim: 1,
            attention: AttentionConfig {
                kind: AttentionKind::Mha,
                heads: 1,
                head_dim: 1,
                kv_heads: 1,
                latent_dim: 0,
                rope_dim: 0,
                q_latent_dim: 0,
                v_head_dim: None,
            },
            ffn: FfnConfig {
                kind: FfnKind::Dense,
                inter_dim: 1,
                n_routed_experts: 0,
                n_shared_experts: 0,
                top_k: 0,
                expert_inter_dim: 0,
                n_dense_layers: 0,
                gated: true,
            },
            vocab: None,
        }
    }

    #[test]
    fn table_kv_sizes() {
        assert_eq!(kv_bytes_per_token(&presets::deepseek_v3(), 2).unwrap(), 61 * (512 + 64) * 2);
        assert_eq!(kv_bytes_per_token(&presets::deepseek_v3(), 2).unwrap(), 70_272);
        assert_eq!(kv_bytes_per_token(&presets::qwen25_72b(), 2).unwrap(), 327_680);
        assert_eq!(kv_bytes_per_token(&presets::llama31_405b(), 2).unwrap(), 516_096);
        let v3 = presets::deepseek_v3();
        assert_eq!(kv_multiplier(&v3, &v3, 2).unwrap(), 1.0);
        assert!((kv_multiplier(&presets::qwen25_72b(), &v3, 2).unwrap() - 4.66).abs() < 0.01);
    }

    #[test]
    fn tiny_model_hand_count() {
        // q, k, v, o: 4 MACs; score + value over 0.5 average context: 1 MAC;
        // gated FFN: 3 MACs. 8 MACs -> 16 forward FLOPs -> 48 training FLOPs.
        let b = train_flops_per_token(&tiny(), 1).unwrap();
        assert_eq!(b.attention_proj, 8.0);
        assert_eq!(b.attention_core, 2.0);
        assert_eq!(b.dense_ffn, 6.0);
        assert_eq!(b.moe_ffn, 0.0);
        assert_eq!(b.forward, 16.0);
        assert_eq!(b.total, 48.0);
    }

    #[test]
    fn validation() {
        let mut m = tiny();
        m.attention.kind = AttentionKind::Mla;
        assert!(matches!(kv_bytes_per_token(&m, 2), Err(MemCalcError::UnsupportedAttention(_))));
        let mut m = tiny();
        m.attention.kind = AttentionKind::Mqa;
        m.attention.heads = 4;
        m.attention.kv_heads = 2;
        assert!(m.validate().is_err());
        let mut m = tiny();
        m.ffn.kind = FfnKind::Moe;
        m.ffn.n_routed_experts = 4;
        m.ffn.top_k = 5;
        m.ffn.expert_inter_dim = 1;
        assert_eq!(
            m.validate().unwrap_err(),
            MemCalcError::Invalid { field: "ffn.top_k".into(), reason: "must be in 1..=n_routed_experts".into() }
        );
        assert!(train_flops_per_token(&tiny(), 0).is_err());
        let mut m = tiny();
        m.layers = 0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn presets_are_valid() {
        for m in presets::all() {
            m.validate().unwrap();
        }
        assert!(presets::get("gpt-5").is_none());
    }

    #[test]
    fn moe_flops_ignore_expert_count() {
        let mut a = presets::deepseek_v3();
        let base = train_flops_per_token(&a, 4096).unwrap();
        a.ffn.n_routed_experts = 1024;
        assert_eq!(train_flops_per_token(&a, 4096).unwrap(), base);
    }

    proptest! {
        #[test]
        fn kv_linear_in_layers_and_width(layers in 1u64..200, bpe in 1u64..8) {
            for mut m in presets::all() {
                let one = kv_bytes_per_token(&m, 1).unwrap();
                prop_assert_eq!(kv_bytes_per_token(&m, bpe).unwrap(), one * bpe);
                let per_layer = one / m.layers;
                m.layers = layers;
                prop_assert_eq!(kv_bytes_per_token(&m, 1).unwrap(), per_layer * layers);
            }
        }

        #[test]
        fn mla_smaller_when_latent_narrower(latent in 1u64..2048, rope in 0u64..256, kv in 1u64..16, hd in 1u64..256) {
            let mut g = tiny();
            g.layers = 10;
            g.attention = AttentionConfig { kind: AttentionKind::Gqa, heads: 16 * kv, head_dim: hd, kv_heads: kv, latent_dim: 0, rope_dim: 0, q_latent_dim: 0, v_head_dim: None };
            let mut m = g.clone();
            m.attention = AttentionConfig { kind: AttentionKind::Mla, heads: 16 * kv, head_dim: hd, kv_heads: 0, latent_dim: latent, rope_dim: rope, q_latent_dim: 0, v_head_dim: None };
            let (mb, gb) = (kv_bytes_per_token(&m, 2).unwrap(), kv_bytes_per_token(&g, 2).unwrap());
            if latent + rope < 2 * kv * hd {
                prop_assert!(mb < gb);
            }
        }

        #[test]
        fn flops_monotone(which in 0usize..7, bump in 1u64..64, seq in 1u64..8192) {
            let base = presets::deepseek_v3();
            let mut m = base.clone();
            match which {
                0 => m.layers += bump,
                1 => m.hidden_dim += bump,
                2 => m.attention.heads += bump,
                3 => m.attention.latent_dim += bump,
                4 => m.ffn.expert_inter_dim += bump,
                5 => m.ffn.inter_dim += bump,
                _ => m.ffn.top_k += bump.min(100),
            }
            let before = train_flops_per_token(&base, seq).unwrap().total;
            let after = train_flops_per_token(&m, seq).unwrap().total;
            prop_assert!(after > before);
            prop_assert!(train_flops_per_token(&base, seq + bump).unwrap().total > before);
        }
    }
}
