//! Adversary strategies.
//!
//! The approximate worst-case jammer works per scheduled RE: it picks the user
//! whose channel it can align with most strongly (`argmax_q p_q lambda_max(R_q)`
//! with `R_q = G^+ H_q H_q^H G^+^H`), shapes its covariance along the
//! eigenvectors of that user's alignment matrix with eigenvalues proportional
//! to the alignment eigenvalues, and splits its budget across REs in
//! proportion to `sqrt(h)` with `h = p_q* tr(R_q*)`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::exec;
use crate::grid::{ConstraintViolation, GridDims, Allocation, BUDGET_RTOL};
use crate::linalg::{eigh, eigvalsh, hermitian_asymmetry, hermitian_part, identity, pinv, CMat, HpdFactor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JammerKind {
    WorstCase,
    Barrage,
    None,
}

impl JammerKind {
    pub fn name(self) -> &'static str {
        match self {
            JammerKind::WorstCase => "worst-case",
            JammerKind::Barrage => "barrage",
            JammerKind::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "worst-case" => Ok(JammerKind::WorstCase),
            "barrage" => Ok(JammerKind::Barrage),
            "none" => Ok(JammerKind::None),
            other => Err(Error::Input(format!("unknown jammer `{other}` (worst-case | barrage | none)"))),
        }
    }
}

impl std::fmt::Display for JammerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-RE jamming covariances, `N_J x N_J` each.
#[derive(Clone, Debug, PartialEq)]
pub struct JammerStrategy {
    pub kind: JammerKind,
    pub dims: GridDims,
    pub covariances: Vec<CMat>,
    /// Per-RE power `g_nk` (equals the covariance trace).
    pub powers: Vec<f64>,
}

impl JammerStrategy {
    pub fn silent(dims: GridDims, jammer_antennas: usize) -> Self {
        JammerStrategy {
            kind: JammerKind::None,
            dims,
            covariances: vec![CMat::zeros(jammer_antennas, jammer_antennas); dims.len()],
            powers: vec![0.0; dims.len()],
        }
    }

    pub fn total_power(&self) -> f64 {
        crate::linalg::pairwise_sum(&self.covariances.iter().map(crate::linalg::trace_re).collect::<Vec<_>>())
    }

    /// Checks J1 (Hermitian PSD) on every RE and J2 (total trace budget).
    pub fn validate(&self, budget: f64) -> Result<(), ConstraintViolation> {
        if self.covariances.len() != self.dims.len() {
            return Err(ConstraintViolation::Shape(format!(
                "{} covariances for {} REs",
                self.covariances.len(),
                self.dims.len()
            )));
        }
        for (flat, cu) in self.covariances.iter().enumerate() {
            let re = self.dims.element(flat);
            let asym = hermitian_asymmetry(cu);
            if asym > 1e-9 {
                return Err(ConstraintViolation::JammerCovariance {
                    n: re.n,
                    k: re.k,
                    reason: format!("is not Hermitian (asymmetry {asym:.3e})"),
                });
            }
            let tr = crate::linalg::trace_re(cu);
            let min_eig = eigvalsh(cu).first().copied().unwrap_or(0.0);
            if min_eig < -1e-9 * tr.abs().max(1e-300) && min_eig < -1e-12 {
                return Err(ConstraintViolation::JammerCovariance {
                    n: re.n,
                    k: re.k,
                    reason: format!("is not PSD (min eigenvalue {min_eig:.3e})"),
                });
            }
        }
        let used = self.total_power();
        if used > budget * (1.0 + BUDGET_RTOL) + 1e-300 {
            return Err(ConstraintViolation::JammerBudget { used, budget });
        }
        Ok(())
    }

    /// Diagnostic CSV: `n,k,trace_mw,top_eigenvalue`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "k", "trace_mw", "top_eigenvalue"])?;
        for (flat, cu) in self.covariances.iter().enumerate() {
            let re = self.dims.element(flat);
            let top = eigvalsh(cu).last().copied().unwrap_or(0.0);
            out.write_record([
                re.n.to_string(),
                re.k.to_string(),
                crate::linalg::trace_re(cu).to_string(),
                top.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|source| Error::Csv { path: path.into(), source })
    }
}

/// `R = G^+ H H^H G^+^H`, kept together with its thin factor `G^+ H`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentMatrix {
    pub user: usize,
    pub matrix: CMat,
    /// `G^+ H` (`N_J x N_T`), so that `R = F F^H`.
    pub factor: CMat,
    pub lambda_max: f64,
}

impl AlignmentMatrix {
    pub fn from_pinv(user: usize, g_pinv: &CMat, h: &CMat) -> Self {
        let factor = g_pinv * h;
        let matrix = hermitian_part(&(&factor * factor.adjoint()));
        // The nonzero spectrum of F F^H equals that of the smaller F^H F.
        let small = hermitian_part(&(factor.adjoint() * &factor));
        let lambda_max = eigvalsh(&small).last().copied().unwrap_or(0.0).max(0.0);
        AlignmentMatrix { user, matrix, factor, lambda_max }
    }

    pub fn trace(&self) -> f64 {
        self.factor.norm_squared()
    }

    /// Eigenpairs of `R` with nonzero eigenvalues, from the SVD of the thin factor.
    pub fn eigen(&self) -> (Vec<f64>, CMat) {
        let svd = self.factor.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let s = &svd.singular_values;
        let cutoff = self.factor.nrows().max(self.factor.ncols()) as f64 * f64::EPSILON * s.max();
        let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > cutoff && s[i] > 0.0).collect();
        let mut vectors = CMat::zeros(self.factor.nrows(), keep.len());
        for (j, &i) in keep.iter().enumerate() {
            vectors.set_column(j, &u.column(i));
        }
        (keep.iter().map(|&i| s[i] * s[i]).collect(), vectors)
    }
}

/// Alignment matrix of one user's channel with the jamming channel.
pub fn alignment_matrix(g: &CMat, h: &CMat) -> AlignmentMatrix {
    AlignmentMatrix::from_pinv(0, &pinv(g), h)
}

/// `argmax_q p_q lambda_max(R_q)` over users scheduled on the RE; ties go to
/// the lowest user index. `None` if nobody is scheduled.
pub fn select_strongest_user(alignments: &[AlignmentMatrix], alloc: &Allocation, flat: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for a in alignments {
        let t = alloc.get(a.user, flat);
        if !t.scheduled {
            continue;
        }
        let score = t.power * a.lambda_max;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((a.user, score));
        }
    }
    best.map(|(q, _)| q)
}

/// Minimises `sum h/g` subject to `sum g <= budget`: `g = budget sqrt(h) / sum sqrt(h)`.
/// All-zero weights give all-zero powers.
pub fn jammer_power_split(weights: &[f64], budget: f64) -> Vec<f64> {
    let roots: Vec<f64> = weights.iter().map(|&h| if h > 0.0 { h.sqrt() } else { 0.0 }).collect();
    let total = crate::linalg::pairwise_sum(&roots);
    if total <= 0.0 || budget.is_nan() || budget <= 0.0 {
        return vec![0.0; weights.len()];
    }
    roots.iter().map(|r| budget * r / total).collect()
}

/// `U diag(g lambda_d / sum lambda) U^H` from eigenpairs of the alignment matrix.
pub fn shaped_covariance(values: &[f64], vectors: &CMat, power: f64) -> CMat {
    let n = vectors.nrows();
    let total: f64 = values.iter().filter(|&&v| v > 0.0).sum();
    let mut cu = CMat::zeros(n, n);
    if total <= 0.0 || power <= 0.0 {
        return cu;
    }
    for (d, &lam) in values.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let u = vectors.column(d);
        cu += (u * u.adjoint()).scale(power * lam / total);
    }
    hermitian_part(&cu)
}

/// Closed-form per-RE covariance from a full alignment matrix.
pub fn closed_form_covariance(r: &CMat, power: f64) -> CMat {
    let (values, vectors) = eigh(r);
    shaped_covariance(&values, &vectors, power)
}

struct Target {
    weight: f64,
    values: Vec<f64>,
    vectors: CMat,
}

/// Approximate worst-case response to a fixed allocation.
pub fn worst_case_strategy(channels: &ChannelSet, alloc: &Allocation, budget: f64) -> Result<JammerStrategy> {
    let dims = channels.dims;
    let nj = channels.jammer_antennas();

    // Per RE: user selection and alignment eigen-decomposition.
    let targets: Vec<Option<Target>> = exec::map_indices(dims.len(), |flat| {
        if !alloc.is_scheduled(flat) {
            return None;
        }
        let g_pinv = pinv(channels.g(flat));
        let alignments: Vec<AlignmentMatrix> = (0..alloc.users())
            .filter(|&q| alloc.get(q, flat).scheduled)
            .map(|q| AlignmentMatrix::from_pinv(q, &g_pinv, channels.h(q, flat)))
            .collect();
        let q_star = select_strongest_user(&alignments, alloc, flat)?;
        let chosen = alignments.iter().find(|a| a.user == q_star)?;
        let (values, vectors) = chosen.eigen();
        let weight = alloc.get(q_star, flat).power * values.iter().sum::<f64>();
        Some(Target { weight, values, vectors })
    });

    // Global split over the scheduled REs.
    let weights: Vec<f64> = targets.iter().map(|t| t.as_ref().map_or(0.0, |t| t.weight)).collect();
    let powers = jammer_power_split(&weights, budget);

    let covariances = exec::map_indices(dims.len(), |flat| match &targets[flat] {
        Some(t) if powers[flat] > 0.0 => shaped_covariance(&t.values, &t.vectors, powers[flat]),
        _ => CMat::zeros(nj, nj),
    });
    Ok(JammerStrategy { kind: JammerKind::WorstCase, dims, covariances, powers })
}

/// Isotropic jamming at level `P_J / (N_J N K)` on every antenna and RE.
pub fn barrage_strategy(dims: GridDims, jammer_antennas: usize, budget: f64) -> JammerStrategy {
    let level = budget / (jammer_antennas * dims.len()) as f64;
    JammerStrategy {
        kind: JammerKind::Barrage,
        dims,
        covariances: vec![identity(jammer_antennas).scale(level); dims.len()],
        powers: vec![level * jammer_antennas as f64; dims.len()],
    }
}

/// Upper bound on `R^A` by concavity of the log:
/// `|R_J| log2(1 + Q/|R_J| sum_RE gamma_max)`, where
/// `gamma_max = max_q p_q lambda_max(H_q^H C_z^-1 H_q)` over scheduled REs.
pub fn jensen_bound(alloc: &Allocation, channels: &ChannelSet, cz: &[CMat]) -> Result<f64> {
    let users = alloc.users();
    let per_re: Vec<Option<f64>> = exec::try_map_indices(channels.dims.len(), |flat| {
        if !alloc.is_scheduled(flat) {
            return Ok(None);
        }
        let factor = HpdFactor::new(&cz[flat])?;
        let mut best = 0.0_f64;
        for q in 0..users {
            let t = alloc.get(q, flat);
            if !t.scheduled || t.power <= 0.0 {
                continue;
            }
            let h = channels.h(q, flat);
            let gram = hermitian_part(&(h.adjoint() * factor.solve_mat(h)));
            best = best.max(t.power * eigvalsh(&gram).last().copied().unwrap_or(0.0));
        }
        Ok::<_, Error>(Some(best))
    })?;
    let gammas: Vec<f64> = per_re.into_iter().flatten().collect();
    if gammas.is_empty() {
        return Ok(0.0);
    }
    let count = gammas.len() as f64;
    Ok(count * (1.0 + users as f64 / count * crate::linalg::pairwise_sum(&gammas)).log2())
}

/// `lambda_max(R C_u^+)`, with the pseudoinverse restricted to the support of `C_u`.
pub fn alignment_objective(r: &CMat, cu: &CMat) -> f64 {
    let (values, vectors) = eigh(cu);
    let top = values.last().copied().unwrap_or(0.0);
    let mut inv_sqrt = CMat::zeros(cu.nrows(), cu.ncols());
    for (d, &v) in values.iter().enumerate() {
        if v > 1e-12 * top && v > 0.0 {
            let u = vectors.column(d);
            inv_sqrt += (u * u.adjoint()).unscale(v.sqrt());
        }
    }
    let m = &inv_sqrt * r * &inv_sqrt;
    eigvalsh(&m).last().copied().unwrap_or(0.0)
}

/// Both sides of the jammer-dominant approximation on one RE:
/// `(lambda_max(H^H C_z^-1 H), lambda_max(R C_u^+))`.
pub fn dominance_approximation(h: &CMat, g: &CMat, cu: &CMat, noise: f64) -> Result<(f64, f64)> {
    let cz = crate::rates::noise_covariance(g, cu, noise)?;
    let factor = HpdFactor::new(&cz)?;
    let exact = eigvalsh(&hermitian_part(&(h.adjoint() * factor.solve_mat(h)))).last().copied().unwrap_or(0.0);
    let r = alignment_matrix(g, h).matrix;
    Ok((exact, alignment_objective(&r, cu)))
}
