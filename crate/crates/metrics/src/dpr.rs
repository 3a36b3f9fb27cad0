use crate::error::{MetricError, Result};
use crate::mmd::{mmd2_unbiased, permutation_critical_value, MmdConfig};
use lplab_substrate::Rng;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// A latent-variable generator viewed purely through its sampling and
/// decoding interface, which is all the metrics need.
pub trait LatentSpace {
    fn latent_dim(&self) -> usize;
    /// Draws one latent vector from the model's prior.
    fn sample_prior(&self, rng: &mut Rng) -> Array1<f64>;
    /// Decodes a latent vector into a velocity trajectory (T x M).
    fn decode(&self, alpha: &Array1<f64>) -> Array2<f64>;
}

/// Settings for disentangling precision & recall.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DprConfig {
    /// Number of equidistant interventions per latent dimension (D).
    pub interventions: usize,
    /// Half-range of the intervention grid (a): values span [-a, a].
    pub half_range: f64,
    /// Samples per generated/reference set (n).
    pub samples: usize,
    /// Number of reference-set resamplings (p).
    pub replicates: usize,
}

impl DprConfig {
    pub fn validate(&self) -> Result<()> {
        if self.interventions < 2 {
            return Err(MetricError::InvalidConfig(
                "need at least 2 interventions per dimension".into(),
            ));
        }
        if self.samples < 2 {
            return Err(MetricError::InvalidConfig(
                "need at least 2 samples per set".into(),
            ));
        }
        if self.half_range <= 0.0 {
            return Err(MetricError::InvalidConfig(
                "intervention half-range must be positive".into(),
            ));
        }
        if self.replicates < 1 {
            return Err(MetricError::InvalidConfig(
                "need at least 1 replicate".into(),
            ));
        }
        Ok(())
    }
}

/// Per-latent-dimension outcome of the DPR analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DprRow {
    /// Latent dimension index l.
    pub latent: usize,
    /// End-state component this dimension controls, if any test fired.
    pub component: Option<usize>,
    /// Average significant MMD at that component (0 when none fired).
    pub d_g: f64,
    /// Number of (intervention, replicate, component) tests that fired.
    pub significant_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DprReport {
    pub dip: f64,
    pub dir: f64,
    pub rows: Vec<DprRow>,
    /// Latent dimensions contributing to dip/dir, in selection order.
    pub selected: Vec<usize>,
}

/// Disentangling precision & recall.
///
/// Phase 1 generates intervened sample sets per latent dimension, phase 2
/// runs per-component two-sample MMD significance tests against resampled
/// reference end states, and phase 3 aggregates the strongest
/// min(N_s, N_alpha) dimensions into precision (dip) and recall (dir).
pub fn dpr<G: LatentSpace + ?Sized>(
    model: &G,
    exe: &mut dyn FnMut(&Array2<f64>) -> Result<Array1<f64>>,
    training_end_states: ArrayView2<f64>,
    mmd_cfg: &MmdConfig,
    dpr_cfg: &DprConfig,
    rng: &Rng,
) -> Result<DprReport> {
    mmd_cfg.validate()?;
    dpr_cfg.validate()?;
    let n_latent = model.latent_dim();
    let n_state = training_end_states.ncols();
    let n = dpr_cfg.samples;
    let d_count = dpr_cfg.interventions;
    if training_end_states.nrows() < n {
        return Err(MetricError::SetTooSmall {
            need: n,
            got: training_end_states.nrows(),
        });
    }

    // Phase 1: intervened generated sets, one per (latent dim, intervention).
    let mut generated: Vec<Array2<f64>> = Vec::with_capacity(n_latent * d_count);
    for l in 0..n_latent {
        for d in 0..d_count {
            let value = -dpr_cfg.half_range
                + 2.0 * dpr_cfg.half_range * d as f64 / (d_count - 1) as f64;
            let mut stream = rng
                .derive("dpr-interventions")
                .derive_index((l * d_count + d) as u64);
            let mut set = Array2::zeros((n, n_state));
            for i in 0..n {
                let mut alpha = model.sample_prior(&mut stream);
                alpha[l] = value;
                let traj = model.decode(&alpha);
                let state = exe(&traj)?;
                if state.len() != n_state {
                    return Err(MetricError::DimMismatch {
                        left: n_state,
                        right: state.len(),
                    });
                }
                set.row_mut(i).assign(&state);
            }
            generated.push(set);
        }
    }

    // Phase 2: per-component significance tests against resampled
    // reference sets, accumulated in deterministic (l, d, replicate) order.
    let mut sig_sum = vec![vec![0.0; n_state]; n_latent];
    let mut sig_count = vec![vec![0usize; n_state]; n_latent];
    for rep in 0..dpr_cfg.replicates {
        let mut ref_stream = rng.derive("dpr-reference").derive_index(rep as u64);
        let picks = ref_stream.sample_indices(training_end_states.nrows(), n);
        let reference = training_end_states.select(Axis(0), &picks);
        for l in 0..n_latent {
            for d in 0..d_count {
                let set = &generated[l * d_count + d];
                for j in 0..n_state {
                    let proj_g = set.column(j).insert_axis(Axis(1));
                    let proj_r = reference.column(j).insert_axis(Axis(1));
                    let proj_g = proj_g.as_standard_layout();
                    let proj_r = proj_r.as_standard_layout();
                    let observed =
                        mmd2_unbiased(proj_g.view(), proj_r.view(), mmd_cfg.gamma)?;
                    let mut test_stream = rng.derive("dpr-permutation").derive_index(
                        (((rep * n_latent + l) * d_count + d) * n_state + j) as u64,
                    );
                    let critical = permutation_critical_value(
                        proj_g.view(),
                        proj_r.view(),
                        mmd_cfg.gamma,
                        mmd_cfg.permutations,
                        mmd_cfg.eta,
                        &mut test_stream,
                    )?;
                    if observed > critical {
                        sig_sum[l][j] += observed;
                        sig_count[l][j] += 1;
                    }
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(n_latent);
    for l in 0..n_latent {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n_state {
            if sig_count[l][j] == 0 {
                continue;
            }
            let avg = sig_sum[l][j] / sig_count[l][j] as f64;
            match best {
                Some((_, v)) if v >= avg => {}
                _ => best = Some((j, avg)),
            }
        }
        let total: usize = sig_count[l].iter().sum();
        match best {
            Some((j, avg)) => rows.push(DprRow {
                latent: l,
                component: Some(j),
                d_g: avg,
                significant_count: total,
            }),
            None => rows.push(DprRow {
                latent: l,
                component: None,
                d_g: 0.0,
                significant_count: 0,
            }),
        }
    }

    // Phase 3: keep the strongest min(N_s, N_alpha) dimensions with at
    // least one significant test.
    let keep = n_state.min(n_latent);
    let mut candidates: Vec<usize> = rows
        .iter()
        .filter(|r| r.component.is_some())
        .map(|r| r.latent)
        .collect();
    candidates.sort_by(|&a, &b| {
        rows[b]
            .d_g
            .partial_cmp(&rows[a].d_g)
            .unwrap()
            .then(a.cmp(&b))
    });
    candidates.truncate(keep);

    let dip: f64 = candidates.iter().map(|&l| rows[l].d_g).sum();
    let mut components: Vec<usize> = candidates
        .iter()
        .filter_map(|&l| rows[l].component)
        .collect();
    components.sort_unstable();
    components.dedup();
    let dir = components.len() as f64 / n_state as f64;

    Ok(DprReport {
        dip,
        dir,
        rows,
        selected: candidates,
    })
}
