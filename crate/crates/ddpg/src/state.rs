//! State vector `[r_{t−1}, a_{t−1}, Re G₁, Im G₁, …, Re G_M, Im G_M]`.

use simstack_core::CMatrix;

use crate::action::Dims;
use crate::{DdpgError, Result};

/// Reciprocal RMS entry magnitude of `g` (1 for an all-zero channel).
///
/// Channel entries are of order 1e-5 under realistic path loss; scaling the
/// channel block by this factor keeps the network inputs near unit size.
pub fn channel_scale(g: &CMatrix) -> f64 {
    let ms = g.iter().map(|z| z.norm_sqr()).sum::<f64>() / g.len().max(1) as f64;
    if ms > 0.0 && ms.is_finite() {
        1.0 / ms.sqrt()
    } else {
        1.0
    }
}

/// Builds the state; the channel block is multiplied by `scale`.
pub fn build_state(prev_reward: f64, prev_action: &[f64], g: &CMatrix, scale: f64, dims: &Dims) -> Result<Vec<f64>> {
    if prev_action.len() != dims.action_dim() || g.nrows() != dims.users || g.ncols() != dims.atoms {
        return Err(DdpgError::Shape(format!(
            "state needs a {}-entry action and a {}x{} channel, got {} and {}x{}",
            dims.action_dim(),
            dims.users,
            dims.atoms,
            prev_action.len(),
            g.nrows(),
            g.ncols()
        )));
    }
    let mut s = Vec::with_capacity(dims.state_dim());
    s.push(prev_reward);
    s.extend_from_slice(prev_action);
    for m in 0..dims.users {
        s.extend(g.row(m).iter().map(|z| z.re * scale));
        s.extend(g.row(m).iter().map(|z| z.im * scale));
    }
    Ok(s)
}
