//! U-shaped local / non-local / spectral attention denoiser.

pub mod attention;
pub mod block;
pub mod gradcheck;
pub mod net;

pub use attention::{
    merge_halves, project_qkv, shuffle_tokens, spectral_attention, split_half_channels, window_partition,
    window_unpartition, windowed_attention, PositionalBias, SpectralWeights, TokenGroups,
};
pub use block::{lnsa_block, BlockShape, LnsaBlockWeights};
pub use gradcheck::{gradient_check, GradCheckReport, GradOp};
pub use net::{ulnsa_forward, UlnsaConfig, UlnsaDenoiser, UlnsaWeights};
