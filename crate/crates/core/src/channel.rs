//! Beamspace channel synthesis.
//!
//! User channels are `H_qnk = sum_l b_lnk a_R(theta_l) a_T(psi_l)^H` and the
//! jamming channel is `G_nk = sum_l b_lnk a_R(theta_l) a_J(psi_l)^H`, with
//! half-wavelength ULA steering vectors and per-path coefficients
//! `b_lnk = g_l exp(-j 2 pi n tau_l) exp(j 2 pi k nu_l)`, `g_l ~ CN(0, 1/L)`.
//!
//! # Channel dump format
//!
//! [`ChannelSet::dump`] writes a plain-text tensor file:
//!
//! ```text
//! antijam-channels 1
//! grid <N> <K>
//! users <Q> rx <N_R> tx <N_T> jammer <N_J>
//! doas <theta_1> ... <theta_L>        (radians)
//! H
//! <re> <im>                            Q*N*K*N_R*N_T lines, row-major [q][n][k][row][col]
//! G
//! <re> <im>                            N*K*N_R*N_J lines, row-major [n][k][row][col]
//! ```
//!
//! Values are printed with Rust's shortest round-trip float formatting, so a
//! dump/load cycle is bit-exact.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::GeometryConfig;
use crate::exec;
use crate::grid::{cis, GridDims, ResourceElement, SystemConfig};
use crate::linalg::{complex_normal, CMat, CVec, C64};
use crate::{Error, Result};

/// ULA steering vector with half-wavelength spacing: entry `m` is `exp(j pi m sin(theta))`.
pub fn steering_vector(antennas: usize, theta: f64) -> CVec {
    let phase = PI * theta.sin();
    CVec::from_iterator(antennas, (0..antennas).map(|m| cis(phase * m as f64)))
}

/// One propagation path. Angles in radians, delay and Doppler normalised.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub doa: f64,
    pub dod: f64,
    pub gain: C64,
    pub delay: f64,
    pub doppler: f64,
}

/// `b_lnk` for one path on one RE.
pub fn path_coefficient(path: &Path, re: ResourceElement) -> C64 {
    path.gain * cis(-2.0 * PI * re.n as f64 * path.delay) * cis(2.0 * PI * re.k as f64 * path.doppler)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioGeometry {
    pub user_centers_deg: Vec<f64>,
    pub jammer_center_deg: f64,
    pub user_paths: Vec<Vec<Path>>,
    pub jammer_paths: Vec<Path>,
}

impl ScenarioGeometry {
    /// DoAs of the jamming paths, i.e. what sensing hands to the legitimate side.
    pub fn jammer_doas(&self) -> Vec<f64> {
        self.jammer_paths.iter().map(|p| p.doa).collect()
    }

    /// Per-path DoA perturbations (degrees) around each central angle.
    pub fn perturbations_deg(&self) -> Vec<f64> {
        let users = self.user_paths.iter().zip(&self.user_centers_deg).flat_map(|(paths, &c)| {
            paths.iter().map(move |p| p.doa.to_degrees() - c)
        });
        let jammer = self.jammer_paths.iter().map(|p| p.doa.to_degrees() - self.jammer_center_deg);
        users.chain(jammer).collect()
    }
}

const JAMMER_STREAM: u64 = 0;

/// RNG stream for one (link, path) pair; independent of evaluation order.
fn path_rng(seed: u64, link: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((link << 20) | path as u64);
    rng
}

fn draw_path(rng: &mut ChaCha8Rng, center_deg: f64, paths: usize, geo: &GeometryConfig) -> Path {
    let spread = geo.doa_perturbation_deg;
    let phi = if spread > 0.0 { rng.random_range(-spread..=spread) } else { 0.0 };
    let dod = if geo.dod_range_deg > 0.0 {
        rng.random_range(-geo.dod_range_deg..=geo.dod_range_deg)
    } else {
        0.0
    };
    let gain = complex_normal(rng, 1.0 / paths as f64);
    let delay = if geo.max_delay > 0.0 { rng.random_range(0.0..=geo.max_delay) } else { 0.0 };
    let doppler = if geo.max_doppler > 0.0 {
        rng.random_range(-geo.max_doppler..=geo.max_doppler)
    } else {
        0.0
    };
    Path { doa: (center_deg + phi).to_radians(), dod: dod.to_radians(), gain, delay, doppler }
}

/// Places user `q` at `first + q * spacing` degrees and the jammer at its
/// configured angle, then perturbs every path DoA uniformly.
pub fn generate_scenario_geometry(cfg: &SystemConfig, geo: &GeometryConfig) -> ScenarioGeometry {
    let user_centers_deg: Vec<f64> =
        (0..cfg.users).map(|q| geo.first_user_doa_deg + geo.user_spacing_deg * q as f64).collect();
    let user_paths = user_centers_deg
        .iter()
        .enumerate()
        .map(|(q, &center)| {
            (0..cfg.user_paths)
                .map(|l| draw_path(&mut path_rng(cfg.seed, q as u64 + 1, l), center, cfg.user_paths, geo))
                .collect()
        })
        .collect();
    let jammer_paths = (0..cfg.jammer_paths)
        .map(|l| {
            draw_path(&mut path_rng(cfg.seed, JAMMER_STREAM, l), geo.jammer_doa_deg, cfg.jammer_paths, geo)
        })
        .collect();
    ScenarioGeometry { user_centers_deg, jammer_center_deg: geo.jammer_doa_deg, user_paths, jammer_paths }
}

struct PathResponse<'a> {
    path: &'a Path,
    outer: CMat,
}

fn path_responses(paths: &[Path], rx: usize, tx: usize) -> Vec<PathResponse<'_>> {
    paths
        .iter()
        .map(|path| {
            let a_rx = steering_vector(rx, path.doa);
            let a_tx = steering_vector(tx, path.dod);
            PathResponse { path, outer: a_rx * a_tx.adjoint() }
        })
        .collect()
}

fn assemble(responses: &[PathResponse<'_>], rx: usize, tx: usize, re: ResourceElement) -> CMat {
    let mut h = CMat::zeros(rx, tx);
    for r in responses {
        h += &r.outer * path_coefficient(r.path, re);
    }
    h
}

/// One beamspace channel matrix on one RE.
pub fn beamspace_channel(paths: &[Path], rx: usize, tx: usize, re: ResourceElement) -> CMat {
    assemble(&path_responses(paths, rx, tx), rx, tx, re)
}

fn build_link(paths: &[Path], rx: usize, tx: usize, dims: GridDims) -> Vec<CMat> {
    let responses = path_responses(paths, rx, tx);
    exec::map_indices(dims.len(), |i| assemble(&responses, rx, tx, dims.element(i)))
}

/// `H[q][flat RE]`, each `N_R x N_T`.
pub fn build_user_channels(geometry: &ScenarioGeometry, cfg: &SystemConfig) -> Vec<Vec<CMat>> {
    geometry
        .user_paths
        .iter()
        .map(|paths| build_link(paths, cfg.rx_antennas, cfg.tx_antennas, cfg.grid()))
        .collect()
}

/// `G[flat RE]`, each `N_R x N_J`, plus the jamming DoAs.
pub fn build_jammer_channel(geometry: &ScenarioGeometry, cfg: &SystemConfig) -> (Vec<CMat>, Vec<f64>) {
    let g = build_link(&geometry.jammer_paths, cfg.rx_antennas, cfg.jammer_antennas, cfg.grid());
    (g, geometry.jammer_doas())
}

/// All channel matrices of one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub dims: GridDims,
    /// `user[q][flat RE]`: `N_R x N_T`.
    pub user: Vec<Vec<CMat>>,
    /// `jammer[flat RE]`: `N_R x N_J`.
    pub jammer: Vec<CMat>,
    /// True jamming-path DoAs (radians).
    pub jammer_doas: Vec<f64>,
}

impl ChannelSet {
    pub fn synthesize(geometry: &ScenarioGeometry, cfg: &SystemConfig) -> Self {
        let user = build_user_channels(geometry, cfg);
        let (jammer, jammer_doas) = build_jammer_channel(geometry, cfg);
        ChannelSet { dims: cfg.grid(), user, jammer, jammer_doas }
    }

    pub fn users(&self) -> usize {
        self.user.len()
    }

    pub fn rx_antennas(&self) -> usize {
        self.jammer.first().map_or(0, |g| g.nrows())
    }

    pub fn tx_antennas(&self) -> usize {
        self.user.first().and_then(|u| u.first()).map_or(0, |h| h.ncols())
    }

    pub fn jammer_antennas(&self) -> usize {
        self.jammer.first().map_or(0, |g| g.ncols())
    }

    pub fn h(&self, q: usize, flat: usize) -> &CMat {
        &self.user[q][flat]
    }

    pub fn g(&self, flat: usize) -> &CMat {
        &self.jammer[flat]
    }

    pub fn dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "antijam-channels 1")?;
        writeln!(w, "grid {} {}", self.dims.subcarriers, self.dims.symbols)?;
        writeln!(
            w,
            "users {} rx {} tx {} jammer {}",
            self.users(),
            self.rx_antennas(),
            self.tx_antennas(),
            self.jammer_antennas()
        )?;
        write!(w, "doas")?;
        for d in &self.jammer_doas {
            write!(w, " {d}")?;
        }
        writeln!(w)?;
        writeln!(w, "H")?;
        for user in &self.user {
            for h in user {
                write_row_major(&mut w, h)?;
            }
        }
        writeln!(w, "G")?;
        for g in &self.jammer {
            write_row_major(&mut w, g)?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let lines = r
            .lines()
            .collect::<std::io::Result<Vec<String>>>()
            .map_err(|e| Error::Input(format!("channel dump: {e}")))?;
        let mut cur = Cursor { lines: &lines, pos: 0 };

        if cur.next()?.trim() != "antijam-channels 1" {
            return Err(malformed("magic line"));
        }
        let grid = cur.next()?;
        let dims = match grid.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["grid", n, k] => GridDims { subcarriers: parse(n, "grid")?, symbols: parse(k, "grid")? },
            _ => return Err(malformed("grid")),
        };
        let sizes = cur.next()?;
        let (q, rx, tx, nj) = match sizes.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["users", q, "rx", rx, "tx", tx, "jammer", nj] => {
                (parse(q, "sizes")?, parse(rx, "sizes")?, parse(tx, "sizes")?, parse(nj, "sizes")?)
            }
            _ => return Err(malformed("sizes")),
        };
        let mut parts = cur.next()?.split_whitespace();
        if parts.next() != Some("doas") {
            return Err(malformed("doas"));
        }
        let jammer_doas = parts.map(|x| parse::<f64>(x, "doas")).collect::<Result<Vec<_>>>()?;

        cur.expect_marker("H")?;
        let mut user = Vec::with_capacity(q);
        for _ in 0..q {
            user.push((0..dims.len()).map(|_| cur.matrix(rx, tx)).collect::<Result<Vec<_>>>()?);
        }
        cur.expect_marker("G")?;
        let jammer = (0..dims.len()).map(|_| cur.matrix(rx, nj)).collect::<Result<Vec<_>>>()?;
        Ok(ChannelSet { dims, user, jammer, jammer_doas })
    }
}

fn malformed(what: &str) -> Error {
    Error::Input(format!("channel dump: malformed {what}"))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| malformed(what))
}

struct Cursor<'a> {
    lines: &'a [String],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Result<&'a str> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| Error::Input("channel dump: unexpected end of file".into()))?;
        self.pos += 1;
        Ok(line)
    }

    fn expect_marker(&mut self, marker: &str) -> Result<()> {
        if self.next()?.trim() == marker {
            Ok(())
        } else {
            Err(malformed(&format!("{marker} marker")))
        }
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<CMat> {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let mut it = self.next()?.split_whitespace();
                let re = parse(it.next().unwrap_or(""), "entry")?;
                let im = parse(it.next().unwrap_or(""), "entry")?;
                m[(i, j)] = C64::new(re, im);
            }
        }
        Ok(m)
    }
}

fn write_row_major<W: Write>(w: &mut W, m: &CMat) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            writeln!(w, "{} {}", z.re, z.im)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{numerical_rank, pinv};

    fn cfg(users: usize, rx: usize, tx: usize, nj: usize, lh: usize, lg: usize) -> SystemConfig {
        SystemConfig {
            users,
            subcarriers: 3,
            symbols: 2,
            tx_antennas: tx,
            rx_antennas: rx,
            jammer_antennas: nj,
            user_power_mw: 1.0,
            jammer_power_mw: 10.0,
            noise_mw: 0.5,
            eta: 10.0,
            user_paths: lh,
            jammer_paths: lg,
            seed: 42,
        }
    }

    fn unit_path(doa: f64, dod: f64) -> Path {
        Path { doa, dod, gain: C64::new(1.0, 0.0), delay: 0.0, doppler: 0.0 }
    }

    #[test]
    fn steering_examples() {
        let a = steering_vector(4, 0.0);
        assert!(a.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        let b = steering_vector(2, PI / 2.0);
        assert!((b[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((b[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
        let th = 20f64.to_radians();
        let c = steering_vector(16, th);
        assert!((c.norm_squared() - 16.0).abs() < 1e-12);
        let expected = C64::from_polar(1.0, PI * 3.0 * th.sin());
        assert!((c[3] - expected).norm() < 1e-12);
        assert!(c.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn path_coefficient_examples() {
        let flat = Path { gain: C64::new(0.3, -0.7), ..unit_path(0.1, 0.2) };
        for n in 1..4 {
            for k in 1..4 {
                assert_eq!(path_coefficient(&flat, ResourceElement::new(n, k)), flat.gain);
            }
        }
        let delayed = Path { delay: 0.25, ..unit_path(0.0, 0.0) };
        assert!((path_coefficient(&delayed, ResourceElement::new(2, 1)) - C64::new(-1.0, 0.0)).norm() < 1e-12);
        let doppler = Path { doppler: 0.5, ..unit_path(0.0, 0.0) };
        assert!((path_coefficient(&doppler, ResourceElement::new(1, 1)) - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn single_boresight_path_gives_all_ones() {
        let h = beamspace_channel(&[unit_path(0.0, 0.0)], 4, 3, ResourceElement::new(1, 1));
        assert!(h.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(numerical_rank(&h, 1e-9), 1);
    }

    #[test]
    fn two_paths_equal_sum_of_outer_products() {
        let p1 = Path { gain: C64::new(0.8, 0.1), ..unit_path(0.3, -0.2) };
        let p2 = Path { gain: C64::new(-0.2, 0.5), delay: 0.1, ..unit_path(-0.4, 0.6) };
        let re = ResourceElement::new(3, 2);
        let h = beamspace_channel(&[p1.clone(), p2.clone()], 4, 2, re);
        // independent reassembly, entry by entry
        let mut oracle = CMat::zeros(4, 2);
        for p in [&p1, &p2] {
            let b = p.gain * C64::from_polar(1.0, -2.0 * PI * 3.0 * p.delay);
            for r in 0..4 {
                for t in 0..2 {
                    let ar = C64::from_polar(1.0, PI * r as f64 * p.doa.sin());
                    let at = C64::from_polar(1.0, PI * t as f64 * p.dod.sin());
                    oracle[(r, t)] += b * ar * at.conj();
                }
            }
        }
        assert!((h - oracle).norm() < 1e-12);
    }

    #[test]
    fn synthesized_channels_respect_rank_and_shape() {
        let c = cfg(2, 8, 4, 6, 2, 3);
        let geo = generate_scenario_geometry(&c, &GeometryConfig::default());
        let set = ChannelSet::synthesize(&geo, &c);
        assert_eq!(set.user.len(), 2);
        for q in 0..2 {
            for h in &set.user[q] {
                assert_eq!(h.shape(), (8, 4));
                assert!(numerical_rank(h, 1e-9) <= 2);
                assert!(h.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
            }
        }
        for g in &set.jammer {
            assert_eq!(g.shape(), (8, 6));
            assert!(numerical_rank(g, 1e-9) <= 3);
        }
    }

    #[test]
    fn jammer_channel_lies_in_manifold_span() {
        let c = cfg(1, 8, 2, 10, 1, 3);
        let geo = generate_scenario_geometry(&c, &GeometryConfig { max_delay: 0.2, max_doppler: 0.1, ..Default::default() });
        let (g, doas) = build_jammer_channel(&geo, &c);
        let mut a = CMat::zeros(8, doas.len());
        for (l, &d) in doas.iter().enumerate() {
            a.set_column(l, &steering_vector(8, d));
        }
        for gi in &g {
            let b = pinv(&a) * gi;
            let resid = (&a * b - gi).norm();
            assert!(resid <= 1e-9 * gi.norm().max(1.0), "residual {resid}");
        }
    }

    #[test]
    fn geometry_centers_and_determinism() {
        let c = cfg(3, 4, 2, 4, 2, 2);
        let g1 = generate_scenario_geometry(&c, &GeometryConfig::default());
        let g2 = generate_scenario_geometry(&c, &GeometryConfig::default());
        assert_eq!(g1.user_centers_deg, vec![0.0, 5.0, 10.0]);
        assert_eq!(g1, g2);
        let s1 = ChannelSet::synthesize(&g1, &c);
        let s2 = ChannelSet::synthesize(&g2, &c);
        assert_eq!(s1, s2);
        let other = generate_scenario_geometry(&SystemConfig { seed: 43, ..c }, &GeometryConfig::default());
        assert_ne!(g1, other);
    }

    #[test]
    fn perturbations_stay_within_five_degrees() {
        let c = cfg(10, 2, 2, 2, 500, 500);
        let mut count = 0;
        for seed in 0..2 {
            let geo = generate_scenario_geometry(&SystemConfig { seed, ..c.clone() }, &GeometryConfig::default());
            for phi in geo.perturbations_deg() {
                assert!(phi.abs() <= 5.0 + 1e-9, "{phi}");
                count += 1;
            }
        }
        assert!(count >= 10_000);
    }

    #[test]
    fn dump_load_is_bit_exact() {
        let c = cfg(2, 3, 2, 4, 2, 2);
        let geo = generate_scenario_geometry(&c, &GeometryConfig { max_delay: 0.3, ..Default::default() });
        let set = ChannelSet::synthesize(&geo, &c);
        let mut buf = Vec::new();
        set.dump(&mut buf).unwrap();
        let back = ChannelSet::load(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, set);
        assert!(ChannelSet::load(std::io::Cursor::new(b"antijam-channels 1\ngrid 1".to_vec())).is_err());
    }
}
