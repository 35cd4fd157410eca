//! Random instances shared by the unit tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelSet;
use crate::grid::{GridDims, ResourceElement, ResourcePartition};
use crate::linalg::{complex_normal, hermitian_part, CMat, CVec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng, 1.0))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| complex_normal(rng, 1.0))
}

/// `A A^H` with `A` of the given inner rank.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> CMat {
    let a = random_mat(rng, n, rank);
    hermitian_part(&(&a * a.adjoint()))
}

/// Random Hermitian PD matrix, well conditioned.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    random_psd(rng, n, n) + crate::linalg::identity(n)
}

/// Channel set on an `n x k` grid with i.i.d. Gaussian entries.
pub fn random_channels(rng: &mut ChaCha8Rng, users: usize, dims: GridDims, rx: usize, tx: usize, nj: usize) -> ChannelSet {
    ChannelSet {
        dims,
        user: (0..users).map(|_| (0..dims.len()).map(|_| random_mat(rng, rx, tx)).collect()).collect(),
        jammer: (0..dims.len()).map(|_| random_mat(rng, rx, nj)).collect(),
        jammer_doas: vec![0.0],
    }
}

/// Every user may use every RE with the given budget.
pub fn shared_partition(dims: GridDims, users: usize, budget: usize) -> ResourcePartition {
    let all: Vec<ResourceElement> = dims.iter().collect();
    ResourcePartition::from_sets(dims, vec![all; users], vec![budget; users]).unwrap()
}
