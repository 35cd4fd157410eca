//! Sensing-assisted transmit design.
//!
//! The legitimate side only knows the jamming DoAs. It replaces the unknown
//! noise covariance with the surrogate `eta A(theta_G) A(theta_G)^H + sigma^2 I`
//! and runs iterative water-filling extended with per-user scheduling: each
//! user in turn computes the dominant eigenpair of `H^H X^-1 H` on every RE of
//! its resource set, schedules the `B_q` strongest REs, beamforms along the
//! eigenvectors and water-fills its power budget over them.
//!
//! Passing `sigma^2 I` (eta = 0) gives the unprotected design; passing the true
//! `C_z` gives the full-knowledge design. The code path is the same.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{steering_vector, ChannelSet};
use crate::exec;
use crate::grid::{Allocation, ResourcePartition, Transmission};
use crate::linalg::{complex_normal, eigh, hermitian_part, identity, max_eigenvalue, pinv, CMat, CVec, HpdFactor};
use crate::rates::{interference_plus_noise, sum_rate};
use crate::{Error, Result};

/// DoA-informed stand-in for the noise covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateCovariance {
    pub matrix: CMat,
    pub eta: f64,
    pub doas: Vec<f64>,
    /// `A(theta_G)`, `N_R x L_G`.
    pub manifold: CMat,
}

/// Receive array manifold: one steering vector per DoA.
pub fn array_manifold(doas: &[f64], rx: usize) -> CMat {
    let mut a = CMat::zeros(rx, doas.len());
    for (l, &theta) in doas.iter().enumerate() {
        a.set_column(l, &steering_vector(rx, theta));
    }
    a
}

/// `eta A A^H + sigma^2 I`.
pub fn surrogate_covariance(doas: &[f64], eta: f64, noise: f64, rx: usize) -> SurrogateCovariance {
    let manifold = array_manifold(doas, rx);
    let mut matrix = identity(rx).scale(noise);
    if eta > 0.0 && !doas.is_empty() {
        matrix += (&manifold * manifold.adjoint()).scale(eta);
    }
    SurrogateCovariance { matrix: hermitian_part(&matrix), eta, doas: doas.to_vec(), manifold }
}

/// Smallest `eta` for which the surrogate dominates `G C_u G^H + sigma^2 I` in
/// Löwner order, assuming `G` lies in the span of the manifold:
/// `lambda_max(A^+ G C_u G^H A^+^H)`.
pub fn dominance_threshold(manifold: &CMat, g: &CMat, cu: &CMat) -> f64 {
    let a_pinv = pinv(manifold);
    let inner = &a_pinv * g * cu * g.adjoint() * a_pinv.adjoint();
    max_eigenvalue(&inner).max(0.0)
}

pub const POWER_ITER_MAX: usize = 500;
/// Relative change of the Rayleigh quotient between sweeps.
pub const POWER_ITER_RQ_TOL: f64 = 1e-10;
/// Relative eigen-residual `||M t - lambda t|| / lambda`.
pub const POWER_ITER_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct EigPair {
    pub value: f64,
    pub vector: CVec,
    pub iterations: usize,
    /// True if power iteration did not converge and a full decomposition was used.
    pub fallback: bool,
}

fn start_vector(n: usize, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = CVec::from_iterator(n, (0..n).map(|_| complex_normal(&mut rng, 1.0)));
    let norm = v.norm();
    v.unscale(norm)
}

/// Dominant eigenpair of a Hermitian PSD matrix by power iteration, falling
/// back to a full decomposition after [`POWER_ITER_MAX`] sweeps.
pub fn max_eigpair(m: &CMat, seed: u64) -> EigPair {
    let n = m.nrows();
    let mut x = start_vector(n, seed);
    if n == 0 || m.iter().all(|z| *z == crate::linalg::ZERO) {
        return EigPair { value: 0.0, vector: x, iterations: 0, fallback: false };
    }
    let mut prev = f64::NAN;
    for it in 1..=POWER_ITER_MAX {
        let y = m * &x;
        let rho = x.dotc(&y).re;
        let ynorm = y.norm();
        if ynorm == 0.0 || !ynorm.is_finite() {
            break;
        }
        let residual = (&y - x.scale(rho)).norm();
        if rho > 0.0
            && (rho - prev).abs() <= POWER_ITER_RQ_TOL * rho
            && residual <= POWER_ITER_RESIDUAL_TOL * rho
        {
            return EigPair { value: rho, vector: x, iterations: it, fallback: false };
        }
        prev = rho;
        x = y.unscale(ynorm);
    }
    let (values, vectors) = eigh(m);
    let value = values[n - 1].max(0.0);
    EigPair { value, vector: vectors.column(n - 1).into_owned(), iterations: POWER_ITER_MAX, fallback: true }
}

/// Water level `mu` and powers `p_i = (mu - 1/lambda_i)^+` with `sum p = budget`.
///
/// Non-positive gains receive zero power.
pub fn water_fill_level(gains: &[f64], budget: f64) -> (Vec<f64>, f64) {
    let mut powers = vec![0.0; gains.len()];
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0 && gains[i].is_finite()).collect();
    if order.is_empty() || budget.is_nan() || budget <= 0.0 {
        return (powers, 0.0);
    }
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let inv: Vec<f64> = order.iter().map(|&i| 1.0 / gains[i]).collect();

    let mut floor_sum = 0.0;
    let mut level = 0.0;
    let mut active = 0;
    for m in 1..=inv.len() {
        floor_sum += inv[m - 1];
        level = (budget + floor_sum) / m as f64;
        active = m;
        if m == inv.len() || level <= inv[m] {
            break;
        }
    }
    for (j, &i) in order.iter().take(active).enumerate() {
        powers[i] = (level - inv[j]).max(0.0);
    }
    (powers, level)
}

pub fn water_fill(gains: &[f64], budget: f64) -> Vec<f64> {
    water_fill_level(gains, budget).0
}

/// Result of one user's scheduling / beamforming / power update.
#[derive(Clone, Debug, PartialEq)]
pub struct UserUpdate {
    pub user: usize,
    /// `(flat RE, decision)` for every RE of the user's resource set.
    pub decisions: Vec<(usize, Transmission)>,
    /// `(flat RE, lambda_max(H^H X^-1 H))` in resource-set order.
    pub gains: Vec<(usize, f64)>,
    /// `sum alpha log2(1 + p lambda)` of the new decision.
    pub objective: f64,
}

/// Whitened channel Gram matrix `H^H X^-1 H`.
pub fn effective_gram(h: &CMat, x: &CMat) -> Result<CMat> {
    let factor = HpdFactor::new(x)?;
    let y = factor.solve_mat(h);
    Ok(hermitian_part(&(h.adjoint() * y)))
}

/// Globally optimal solution of one user's subproblem for fixed
/// interference-plus-noise covariances.
///
/// `x[i]` is the covariance on the `i`-th RE of `partition.set(q)`.
pub fn single_user_update(
    q: usize,
    x: &[CMat],
    channels: &ChannelSet,
    partition: &ResourcePartition,
    user_power: f64,
    eig_seed: u64,
) -> Result<UserUpdate> {
    let set = partition.set(q);
    if x.len() != set.len() {
        return Err(Error::Dimension(format!("{} covariances for {} REs of user {q}", x.len(), set.len())));
    }
    let symbols = channels.dims.symbols;
    let pairs: Vec<EigPair> = exec::try_map_indices(set.len(), |i| {
        let flat = set[i].flat(symbols);
        let gram = effective_gram(channels.h(q, flat), &x[i])?;
        Ok::<_, Error>(max_eigpair(&gram, eig_seed))
    })?;

    // Strongest B_q REs with a usable channel; ties keep lexicographic (n, k) order.
    let mut ranked: Vec<usize> = (0..set.len()).filter(|&i| pairs[i].value > 0.0).collect();
    ranked.sort_by(|&a, &b| pairs[b].value.total_cmp(&pairs[a].value).then(a.cmp(&b)));
    ranked.truncate(partition.budget(q));

    let gains: Vec<f64> = ranked.iter().map(|&i| pairs[i].value).collect();
    let powers = water_fill(&gains, user_power);

    let tx = channels.tx_antennas();
    let mut decisions: Vec<(usize, Transmission)> =
        set.iter().map(|re| (re.flat(symbols), Transmission::idle(tx))).collect();
    let mut objective_terms = Vec::with_capacity(ranked.len());
    for (j, &i) in ranked.iter().enumerate() {
        decisions[i].1 = Transmission { scheduled: true, power: powers[j], beam: pairs[i].vector.clone() };
        objective_terms.push((1.0 + powers[j] * gains[j]).log2());
    }
    let gains = set.iter().zip(&pairs).map(|(re, p)| (re.flat(symbols), p.value)).collect();
    Ok(UserUpdate { user: q, decisions, gains, objective: crate::linalg::pairwise_sum(&objective_terms) })
}

/// Objective of user `q`'s subproblem for its current decisions in `alloc`.
pub fn subproblem_objective(
    q: usize,
    x: &[CMat],
    alloc: &Allocation,
    channels: &ChannelSet,
    partition: &ResourcePartition,
) -> Result<f64> {
    let symbols = channels.dims.symbols;
    let mut terms = Vec::new();
    for (i, re) in partition.set(q).iter().enumerate() {
        let t = alloc.get(q, re.flat(symbols));
        if !t.scheduled || t.power <= 0.0 {
            continue;
        }
        let gamma = crate::rates::sinr(&t.beam, channels.h(q, re.flat(symbols)), &x[i])?;
        terms.push((1.0 + t.power * gamma).log2());
    }
    Ok(crate::linalg::pairwise_sum(&terms))
}

impl UserUpdate {
    pub fn apply(&self, alloc: &mut Allocation) {
        for (flat, t) in &self.decisions {
            alloc.set(self.user, *flat, t.clone());
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AllocatorOptions {
    /// Stop when `|R_t - R_{t-1}| <= rel_tol * R_t`.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Seed of the power-iteration start vector.
    pub eig_seed: u64,
}

impl Default for AllocatorOptions {
    fn default() -> Self {
        AllocatorOptions { rel_tol: 1e-5, max_iters: 50, eig_seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocationOutcome {
    pub allocation: Allocation,
    /// Completed round-robin sweeps after the initial single-user round.
    pub iterations: usize,
    pub converged: bool,
    /// Sum-rate under the design covariance after the initial round and after every sweep.
    pub sum_rate_trace: Vec<f64>,
}

fn covariances_for(
    q: usize,
    alloc: &Allocation,
    channels: &ChannelSet,
    partition: &ResourcePartition,
    design: &[CMat],
    with_interference: bool,
) -> Vec<CMat> {
    let symbols = channels.dims.symbols;
    partition
        .set(q)
        .iter()
        .map(|re| {
            let flat = re.flat(symbols);
            if with_interference {
                interference_plus_noise(q, flat, alloc, channels, &design[flat])
            } else {
                design[flat].clone()
            }
        })
        .collect()
}

/// Joint iterative scheduling, beamforming and power allocation against the
/// design covariance `design[flat RE]` (surrogate, white noise or true `C_z`).
pub fn iterative_allocate(
    channels: &ChannelSet,
    design: &[CMat],
    partition: &ResourcePartition,
    user_power: f64,
    opts: &AllocatorOptions,
) -> Result<AllocationOutcome> {
    if design.len() != channels.dims.len() {
        return Err(Error::Dimension("design covariance does not cover the grid".into()));
    }
    if partition.users() != channels.users() {
        return Err(Error::Dimension("partition and channel user counts differ".into()));
    }
    let users = channels.users();
    let mut alloc = Allocation::idle(users, channels.dims, channels.tx_antennas());

    // Initial round: every user sees only the design covariance.
    for q in 0..users {
        let x = covariances_for(q, &alloc, channels, partition, design, false);
        single_user_update(q, &x, channels, partition, user_power, opts.eig_seed)?.apply(&mut alloc);
    }
    let mut trace = vec![sum_rate(&alloc, channels, design)?];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        for q in 0..users {
            let x = covariances_for(q, &alloc, channels, partition, design, true);
            single_user_update(q, &x, channels, partition, user_power, opts.eig_seed)?.apply(&mut alloc);
        }
        iterations += 1;
        let current = sum_rate(&alloc, channels, design)?;
        let previous = *trace.last().unwrap_or(&0.0);
        trace.push(current);
        if (current - previous).abs() <= opts.rel_tol * current.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("allocator stopped after {iterations} sweeps without converging");
    }
    Ok(AllocationOutcome { allocation: alloc, iterations, converged, sum_rate_trace: trace })
}
