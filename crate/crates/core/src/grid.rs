//! Resource-grid bookkeeping, unit conversions, system configuration and the
//! transmit allocation with its constraint validator.

use serde::{Deserialize, Serialize};

use crate::linalg::{CVec, C64};
use crate::{Error, Result};

/// Converts dBm to mW.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Converts mW to dBm.
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// One (subcarrier, OFDM symbol) cell. Indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceElement {
    pub n: usize,
    pub k: usize,
}

impl ResourceElement {
    pub fn new(n: usize, k: usize) -> Self {
        ResourceElement { n, k }
    }

    /// Row-major flat index (subcarrier-major) into an `N x K` grid.
    pub fn flat(&self, symbols: usize) -> usize {
        (self.n - 1) * symbols + (self.k - 1)
    }

    pub fn from_flat(idx: usize, symbols: usize) -> Self {
        ResourceElement { n: idx / symbols + 1, k: idx % symbols + 1 }
    }
}

/// Grid dimensions shared by channels, covariances and allocations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub subcarriers: usize,
    pub symbols: usize,
}

impl GridDims {
    pub fn len(&self) -> usize {
        self.subcarriers * self.symbols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, re: ResourceElement) -> bool {
        (1..=self.subcarriers).contains(&re.n) && (1..=self.symbols).contains(&re.k)
    }

    pub fn element(&self, flat: usize) -> ResourceElement {
        ResourceElement::from_flat(flat, self.symbols)
    }

    pub fn iter(&self) -> impl Iterator<Item = ResourceElement> + '_ {
        (0..self.len()).map(|i| self.element(i))
    }
}

/// Link-level parameters of one scenario. Powers are linear (mW).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of users `Q`.
    pub users: usize,
    /// Subcarriers `N`.
    pub subcarriers: usize,
    /// OFDM symbols per slot `K`.
    pub symbols: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub jammer_antennas: usize,
    /// Per-user power budget.
    pub user_power_mw: f64,
    /// Jammer power budget over the whole slot.
    pub jammer_power_mw: f64,
    /// Noise power per RE.
    pub noise_mw: f64,
    /// Resilience hyperparameter of the surrogate covariance.
    pub eta: f64,
    pub user_paths: usize,
    pub jammer_paths: usize,
    pub seed: u64,
}

impl SystemConfig {
    pub fn grid(&self) -> GridDims {
        GridDims { subcarriers: self.subcarriers, symbols: self.symbols }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("users", self.users),
            ("subcarriers", self.subcarriers),
            ("symbols", self.symbols),
            ("tx_antennas", self.tx_antennas),
            ("rx_antennas", self.rx_antennas),
            ("jammer_antennas", self.jammer_antennas),
            ("user_paths", self.user_paths),
            ("jammer_paths", self.jammer_paths),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        let powers = [
            ("user_power", self.user_power_mw),
            ("jammer_power", self.jammer_power_mw),
            ("eta", self.eta),
        ];
        for (name, v) in powers {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        // A zero noise floor makes the equalizer solves singular.
        if !self.noise_mw.is_finite() || self.noise_mw <= 0.0 {
            return Err(Error::Config(format!("noise power must be > 0, got {}", self.noise_mw)));
        }
        if self.users > self.grid().len() {
            return Err(Error::Config(format!(
                "{} users do not fit on a {}x{} grid",
                self.users, self.subcarriers, self.symbols
            )));
        }
        Ok(())
    }
}

/// Per-user resource sets `R_q` and scheduling budgets `B_q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResourcePartition {
    dims: GridDims,
    sets: Vec<Vec<ResourceElement>>,
    budgets: Vec<usize>,
    member: Vec<Vec<bool>>,
}

impl ResourcePartition {
    /// Builds a partition from explicit sets. Sets may overlap; each budget must
    /// not exceed its set size.
    pub fn from_sets(
        dims: GridDims,
        mut sets: Vec<Vec<ResourceElement>>,
        budgets: Vec<usize>,
    ) -> Result<Self> {
        if sets.len() != budgets.len() {
            return Err(Error::Dimension(format!(
                "{} resource sets but {} budgets",
                sets.len(),
                budgets.len()
            )));
        }
        let mut member = vec![vec![false; dims.len()]; sets.len()];
        for (q, set) in sets.iter_mut().enumerate() {
            set.sort();
            set.dedup();
            for re in set.iter() {
                if !dims.contains(*re) {
                    return Err(Error::Config(format!("RE ({}, {}) lies outside the grid", re.n, re.k)));
                }
                member[q][re.flat(dims.symbols)] = true;
            }
            if budgets[q] > set.len() {
                return Err(Error::Config(format!(
                    "user {q} budget {} exceeds its {} resource elements",
                    budgets[q],
                    set.len()
                )));
            }
        }
        Ok(ResourcePartition { dims, sets, budgets, member })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn users(&self) -> usize {
        self.sets.len()
    }

    pub fn set(&self, q: usize) -> &[ResourceElement] {
        &self.sets[q]
    }

    pub fn budget(&self, q: usize) -> usize {
        self.budgets[q]
    }

    pub fn contains(&self, q: usize, re: ResourceElement) -> bool {
        self.member[q][re.flat(self.dims.symbols)]
    }

    pub fn contains_flat(&self, q: usize, flat: usize) -> bool {
        self.member[q][flat]
    }

    pub fn is_disjoint(&self) -> bool {
        (0..self.dims.len()).all(|i| self.member.iter().filter(|m| m[i]).count() <= 1)
    }
}

/// Splits the grid into `Q` disjoint contiguous row-major blocks of
/// `floor(N*K / Q)` REs each; the remainder is left unassigned.
pub fn build_resource_partition(cfg: &SystemConfig) -> Result<ResourcePartition> {
    let dims = cfg.grid();
    if cfg.users == 0 {
        return Err(Error::Config("at least one user is required".into()));
    }
    if cfg.users > dims.len() {
        return Err(Error::Config(format!(
            "{} users exceed the {} resource elements",
            cfg.users,
            dims.len()
        )));
    }
    let per_user = dims.len() / cfg.users;
    let sets = (0..cfg.users)
        .map(|q| (q * per_user..(q + 1) * per_user).map(|i| dims.element(i)).collect())
        .collect();
    ResourcePartition::from_sets(dims, sets, vec![per_user; cfg.users])
}

/// Transmit decision of one user on one RE.
#[derive(Clone, Debug, PartialEq)]
pub struct Transmission {
    pub scheduled: bool,
    pub power: f64,
    pub beam: CVec,
}

impl Transmission {
    pub fn idle(tx_antennas: usize) -> Self {
        Transmission { scheduled: false, power: 0.0, beam: CVec::zeros(tx_antennas) }
    }

    /// Effective precoded signal `sqrt(p) * alpha * w`.
    pub fn signal(&self) -> CVec {
        if !self.scheduled || self.power <= 0.0 {
            return CVec::zeros(self.beam.len());
        }
        self.beam.scale(self.power.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstraintViolation {
    #[error("user {user} scheduled on ({n}, {k}) outside its resource set")]
    OutsideResourceSet { user: usize, n: usize, k: usize },
    #[error("C2: user {user} has power {power} on ({n}, {k})")]
    NegativePower { user: usize, n: usize, k: usize, power: f64 },
    #[error("C3: user {user} schedules {scheduled} REs, budget {budget}")]
    ResourceBudget { user: usize, scheduled: usize, budget: usize },
    #[error("C4: user {user} uses {used} mW, budget {budget} mW")]
    PowerBudget { user: usize, used: f64, budget: f64 },
    #[error("C5: user {user} beam on ({n}, {k}) has squared norm {norm_sq}")]
    BeamNorm { user: usize, n: usize, k: usize, norm_sq: f64 },
    #[error("J1: jamming covariance on ({n}, {k}) {reason}")]
    JammerCovariance { n: usize, k: usize, reason: String },
    #[error("J2: jammer uses {used} mW, budget {budget} mW")]
    JammerBudget { used: f64, budget: f64 },
    #[error("shape: {0}")]
    Shape(String),
}

/// Relative slack on budget constraints.
pub const BUDGET_RTOL: f64 = 1e-9;

/// Transmit parameters of all users on all REs, indexed `[user][flat RE]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    dims: GridDims,
    tx_antennas: usize,
    entries: Vec<Vec<Transmission>>,
}

impl Allocation {
    pub fn idle(users: usize, dims: GridDims, tx_antennas: usize) -> Self {
        Allocation {
            dims,
            tx_antennas,
            entries: vec![vec![Transmission::idle(tx_antennas); dims.len()]; users],
        }
    }

    pub fn users(&self) -> usize {
        self.entries.len()
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx_antennas
    }

    pub fn get(&self, q: usize, flat: usize) -> &Transmission {
        &self.entries[q][flat]
    }

    pub fn set(&mut self, q: usize, flat: usize, t: Transmission) {
        self.entries[q][flat] = t;
    }

    pub fn user(&self, q: usize) -> &[Transmission] {
        &self.entries[q]
    }

    pub fn signal(&self, q: usize, flat: usize) -> CVec {
        self.entries[q][flat].signal()
    }

    pub fn scheduled_count(&self, q: usize) -> usize {
        self.entries[q].iter().filter(|t| t.scheduled).count()
    }

    pub fn power_used(&self, q: usize) -> f64 {
        self.entries[q].iter().filter(|t| t.scheduled).map(|t| t.power).sum()
    }

    /// True if any user transmits on the RE.
    pub fn is_scheduled(&self, flat: usize) -> bool {
        self.entries.iter().any(|u| u[flat].scheduled)
    }

    /// Checks C1–C5 against the partition and per-user power budget.
    /// C1 holds by construction (`scheduled` is a bool).
    pub fn validate(
        &self,
        partition: &ResourcePartition,
        user_power_mw: f64,
    ) -> Result<(), ConstraintViolation> {
        if partition.users() != self.users() || partition.dims() != self.dims {
            return Err(ConstraintViolation::Shape(format!(
                "allocation has {} users on {:?}, partition {} users on {:?}",
                self.users(),
                self.dims,
                partition.users(),
                partition.dims()
            )));
        }
        for (q, user) in self.entries.iter().enumerate() {
            for (flat, t) in user.iter().enumerate() {
                let re = self.dims.element(flat);
                if t.beam.len() != self.tx_antennas {
                    return Err(ConstraintViolation::Shape(format!(
                        "beam of user {q} has {} entries, expected {}",
                        t.beam.len(),
                        self.tx_antennas
                    )));
                }
                if t.scheduled && !partition.contains_flat(q, flat) {
                    return Err(ConstraintViolation::OutsideResourceSet { user: q, n: re.n, k: re.k });
                }
                let ap = if t.scheduled { t.power } else { 0.0 };
                if ap.is_nan() || ap < 0.0 || !t.power.is_finite() {
                    return Err(ConstraintViolation::NegativePower { user: q, n: re.n, k: re.k, power: t.power });
                }
                let norm_sq = t.beam.norm_squared();
                if norm_sq.is_nan() || norm_sq > 1.0 + BUDGET_RTOL {
                    return Err(ConstraintViolation::BeamNorm { user: q, n: re.n, k: re.k, norm_sq });
                }
            }
            let scheduled = self.scheduled_count(q);
            if scheduled > partition.budget(q) {
                return Err(ConstraintViolation::ResourceBudget {
                    user: q,
                    scheduled,
                    budget: partition.budget(q),
                });
            }
            let used = self.power_used(q);
            if used > user_power_mw * (1.0 + BUDGET_RTOL) + f64::MIN_POSITIVE {
                return Err(ConstraintViolation::PowerBudget { user: q, used, budget: user_power_mw });
            }
        }
        Ok(())
    }
}

/// Unit-modulus complex exponential `exp(j * phase)`.
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn small_cfg(users: usize, n: usize, k: usize) -> SystemConfig {
        SystemConfig {
            users,
            subcarriers: n,
            symbols: k,
            tx_antennas: 2,
            rx_antennas: 2,
            jammer_antennas: 2,
            user_power_mw: 1.0,
            jammer_power_mw: 1.0,
            noise_mw: 1.0,
            eta: 10.0,
            user_paths: 1,
            jammer_paths: 1,
            seed: 0,
        }
    }

    #[test]
    fn dbm_conversions() {
        assert_eq!(dbm_to_mw(0.0), 1.0);
        assert!((dbm_to_mw(30.0) - 1000.0).abs() < 1e-9);
        assert!((dbm_to_mw(5.0) - 3.1623).abs() < 1e-4);
    }

    #[test]
    fn partition_full_grid() {
        let p = build_resource_partition(&small_cfg(3, 64, 14)).unwrap();
        for q in 0..3 {
            assert_eq!(p.budget(q), 298);
            assert_eq!(p.set(q).len(), 298);
        }
        assert!(p.is_disjoint());
    }

    #[test]
    fn partition_forced() {
        let p = build_resource_partition(&small_cfg(2, 2, 1)).unwrap();
        assert_eq!(p.set(0), &[ResourceElement::new(1, 1)]);
        assert_eq!(p.set(1), &[ResourceElement::new(2, 1)]);
    }

    #[test]
    fn partition_leaves_remainder_unassigned() {
        let p = build_resource_partition(&small_cfg(3, 4, 2)).unwrap();
        let dims = p.dims();
        let mut owners = vec![0usize; dims.len()];
        for q in 0..3 {
            assert_eq!(p.budget(q), 2);
            for re in p.set(q) {
                owners[re.flat(dims.symbols)] += 1;
            }
        }
        assert!(owners.iter().all(|&c| c <= 1));
        assert_eq!(owners.iter().filter(|&&c| c == 0).count(), 2);
    }

    #[test]
    fn partition_rejects_too_many_users() {
        assert!(build_resource_partition(&small_cfg(5, 2, 2)).is_err());
    }

    #[test]
    fn validator_flags_each_constraint() {
        let cfg = small_cfg(1, 2, 1);
        let p = ResourcePartition::from_sets(cfg.grid(), vec![vec![ResourceElement::new(1, 1)]], vec![1]).unwrap();
        let mut a = Allocation::idle(1, cfg.grid(), 2);
        assert!(a.validate(&p, 1.0).is_ok());

        let good = Transmission { scheduled: true, power: 1.0, beam: CVec::from_element(2, C64::new(0.5f64.sqrt(), 0.0)) };
        a.set(0, 0, good.clone());
        assert!(a.validate(&p, 1.0).is_ok());

        let mut over = a.clone();
        over.set(0, 0, Transmission { power: 2.0, ..good.clone() });
        assert!(matches!(over.validate(&p, 1.0), Err(ConstraintViolation::PowerBudget { .. })));

        let mut neg = a.clone();
        neg.set(0, 0, Transmission { power: -0.1, ..good.clone() });
        assert!(matches!(neg.validate(&p, 1.0), Err(ConstraintViolation::NegativePower { .. })));

        let mut beam = a.clone();
        beam.set(0, 0, Transmission { beam: CVec::from_element(2, C64::new(1.0, 0.0)), ..good.clone() });
        assert!(matches!(beam.validate(&p, 1.0), Err(ConstraintViolation::BeamNorm { .. })));

        let mut outside = a.clone();
        outside.set(0, 1, good.clone());
        assert!(matches!(outside.validate(&p, 2.0), Err(ConstraintViolation::OutsideResourceSet { .. })));

        let p2 = ResourcePartition::from_sets(
            cfg.grid(),
            vec![vec![ResourceElement::new(1, 1), ResourceElement::new(2, 1)]],
            vec![1],
        )
        .unwrap();
        let mut count = a.clone();
        count.set(0, 1, Transmission { power: 0.0, ..good });
        assert!(matches!(count.validate(&p2, 1.0), Err(ConstraintViolation::ResourceBudget { .. })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg(1, 2, 2);
        assert!(cfg.validate().is_ok());
        cfg.eta = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(1, 2, 2);
        cfg.noise_mw = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(1, 2, 2);
        cfg.rx_antennas = 0;
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn dbm_round_trip(x in -150.0f64..150.0) {
            let back = dbm_to_mw(mw_to_dbm(dbm_to_mw(x)));
            prop_assert!((back - dbm_to_mw(x)).abs() <= 1e-12 * dbm_to_mw(x));
            let mw = dbm_to_mw(x);
            prop_assert!((dbm_to_mw(mw_to_dbm(mw)) - mw).abs() <= 1e-12 * mw);
        }

        #[test]
        fn partition_disjoint_and_sized(q in 1usize..8, n in 1usize..12, k in 1usize..6) {
            prop_assume!(q <= n * k);
            let p = build_resource_partition(&small_cfg(q, n, k)).unwrap();
            prop_assert!(p.is_disjoint());
            let total: usize = (0..q).map(|u| p.budget(u)).sum();
            prop_assert!(total <= n * k);
            for u in 0..q {
                prop_assert_eq!(p.budget(u), n * k / q);
                prop_assert_eq!(p.set(u).len(), p.budget(u));
            }
        }
    }
}
