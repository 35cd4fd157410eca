//! Covariances, MMSE equalizers, SINRs and the two rate metrics.
//!
//! * `R^B` (user-sum-rate): sum over scheduled (user, RE) pairs of
//!   `log2(1 + |v^H H b|^2 / v^H X v)` with the linear equalizer `v = X^-1 H b`.
//! * `R^A` (sum-rate): sum over REs of `log2(1 + sum_q alpha p gamma_q(C_z))`
//!   with `gamma_q(B) = w^H H^H B^-1 H w`.
//!
//! All inverses go through Hermitian Cholesky solves.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::exec;
use crate::grid::Allocation;
use crate::linalg::{hermitian_asymmetry, hermitian_part, identity, pairwise_sum, quad_form, CMat, CVec, HpdFactor};
use crate::{Error, Result};

/// Largest tolerated asymmetry of an input covariance.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// `C_z = G C_u G^H + sigma^2 I`.
pub fn noise_covariance(g: &CMat, cu: &CMat, noise: f64) -> Result<CMat> {
    if cu.nrows() != g.ncols() || cu.ncols() != g.ncols() {
        return Err(Error::Dimension(format!(
            "jamming covariance {:?} does not match channel {:?}",
            cu.shape(),
            g.shape()
        )));
    }
    let asymmetry = hermitian_asymmetry(cu);
    if asymmetry > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry });
    }
    let cz = g * cu * g.adjoint() + identity(g.nrows()).scale(noise);
    Ok(hermitian_part(&cz))
}

/// `sigma^2 I` on every RE.
pub fn white_noise(res: usize, rx: usize, noise: f64) -> Vec<CMat> {
    vec![identity(rx).scale(noise); res]
}

/// `C_z` on every RE for a per-RE jamming covariance list.
pub fn noise_covariances(channels: &ChannelSet, jamming: &[CMat], noise: f64) -> Result<Vec<CMat>> {
    if jamming.len() != channels.dims.len() {
        return Err(Error::Dimension(format!(
            "{} jamming covariances for {} REs",
            jamming.len(),
            channels.dims.len()
        )));
    }
    exec::try_map_indices(jamming.len(), |i| noise_covariance(channels.g(i), &jamming[i], noise))
}

/// `X_q = sum_{q' != q} H_q' b_q' b_q'^H H_q'^H + C_z` on one RE.
pub fn interference_plus_noise(q: usize, flat: usize, alloc: &Allocation, channels: &ChannelSet, cz: &CMat) -> CMat {
    let mut x = cz.clone();
    for other in (0..alloc.users()).filter(|&o| o != q) {
        let t = alloc.get(other, flat);
        if !t.scheduled || t.power <= 0.0 {
            continue;
        }
        let s = channels.h(other, flat) * t.signal();
        x += &s * s.adjoint();
    }
    hermitian_part(&x)
}

/// Unnormalised MMSE equalizer `v = X^-1 H b`.
pub fn mmse_equalizer(h: &CMat, b: &CVec, x: &CMat) -> Result<CVec> {
    let factor = HpdFactor::new(x)?;
    Ok(factor.solve_vec(&(h * b)))
}

/// `gamma(B) = w^H H^H B^-1 H w`.
pub fn sinr(w: &CVec, h: &CMat, b: &CMat) -> Result<f64> {
    let hw = h * w;
    if hw.norm_squared() == 0.0 {
        return Ok(0.0);
    }
    let factor = HpdFactor::new(b)?;
    Ok(hw.dotc(&factor.solve_vec(&hw)).re.max(0.0))
}

/// Post-equalization SINR `|v^H H b|^2 / (v^H X v)`.
pub fn equalized_sinr(v: &CVec, h: &CMat, b: &CVec, x: &CMat) -> f64 {
    let denom = quad_form(x, v);
    if denom <= 0.0 {
        return 0.0;
    }
    v.dotc(&(h * b)).norm_sqr() / denom
}

/// Per-user, per-RE terms of `R^B`.
#[derive(Clone, Debug, PartialEq)]
pub struct UserRate {
    pub total: f64,
    /// `[q][flat RE]` rate terms (bits); zero where unscheduled.
    pub terms: Vec<Vec<f64>>,
    /// `[q][flat RE]` post-equalization SINR.
    pub sinr: Vec<Vec<f64>>,
}

/// `R^B` with the equalizer matched to the true covariance.
pub fn user_sum_rate(alloc: &Allocation, channels: &ChannelSet, cz: &[CMat]) -> Result<UserRate> {
    user_sum_rate_with_receiver(alloc, channels, cz, cz)
}

/// `R^B` when the receiver builds its equalizers from `receiver_cz` (what it
/// believes the noise covariance to be) while the SINR is evaluated under `true_cz`.
pub fn user_sum_rate_with_receiver(
    alloc: &Allocation,
    channels: &ChannelSet,
    true_cz: &[CMat],
    receiver_cz: &[CMat],
) -> Result<UserRate> {
    let res = channels.dims.len();
    if true_cz.len() != res || receiver_cz.len() != res {
        return Err(Error::Dimension("covariance list does not cover the grid".into()));
    }
    let users = alloc.users();
    let per_re: Vec<Vec<(f64, f64)>> = exec::try_map_indices(res, |flat| {
        (0..users)
            .map(|q| {
                let t = alloc.get(q, flat);
                if !t.scheduled || t.power <= 0.0 {
                    return Ok((0.0, 0.0));
                }
                let b = t.signal();
                let h = channels.h(q, flat);
                let x_rx = interference_plus_noise(q, flat, alloc, channels, &receiver_cz[flat]);
                let v = mmse_equalizer(h, &b, &x_rx)?;
                let x_true = if std::ptr::eq(true_cz, receiver_cz) {
                    x_rx
                } else {
                    interference_plus_noise(q, flat, alloc, channels, &true_cz[flat])
                };
                let s = equalized_sinr(&v, h, &b, &x_true);
                Ok((s, (1.0 + s).log2()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut terms = vec![vec![0.0; res]; users];
    let mut sinr = vec![vec![0.0; res]; users];
    let mut flat_terms = Vec::with_capacity(res * users);
    for (flat, row) in per_re.iter().enumerate() {
        for (q, &(s, r)) in row.iter().enumerate() {
            sinr[q][flat] = s;
            terms[q][flat] = r;
            flat_terms.push(r);
        }
    }
    Ok(UserRate { total: pairwise_sum(&flat_terms), terms, sinr })
}

/// Per-RE terms of `R^A` under `cz`.
pub fn sum_rate_terms(alloc: &Allocation, channels: &ChannelSet, cz: &[CMat]) -> Result<Vec<f64>> {
    if cz.len() != channels.dims.len() {
        return Err(Error::Dimension("covariance list does not cover the grid".into()));
    }
    exec::try_map_indices(cz.len(), |flat| {
        let active: Vec<usize> = (0..alloc.users())
            .filter(|&q| {
                let t = alloc.get(q, flat);
                t.scheduled && t.power > 0.0
            })
            .collect();
        if active.is_empty() {
            return Ok(0.0);
        }
        let factor = HpdFactor::new(&cz[flat])?;
        let load: f64 = active
            .iter()
            .map(|&q| {
                let t = alloc.get(q, flat);
                let hw = channels.h(q, flat) * &t.beam;
                t.power * hw.dotc(&factor.solve_vec(&hw)).re.max(0.0)
            })
            .sum();
        Ok((1.0 + load).log2())
    })
}

/// `R^A = sum_RE log2(1 + sum_q alpha p gamma_q(C_z))`.
pub fn sum_rate(alloc: &Allocation, channels: &ChannelSet, cz: &[CMat]) -> Result<f64> {
    Ok(pairwise_sum(&sum_rate_terms(alloc, channels, cz)?))
}

/// Outcome of one simulated scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub baseline: crate::harness::Baseline,
    pub jammer: crate::jammer::JammerKind,
    pub seed: u64,
    /// Sum-rate (bits/slot).
    pub ra_bits: f64,
    /// User-sum-rate (bits/slot).
    pub rb_bits: f64,
    /// `[q][flat RE]` post-equalization SINR.
    pub sinr: Vec<Vec<f64>>,
    pub allocator_iterations: usize,
    pub allocator_converged: bool,
}
