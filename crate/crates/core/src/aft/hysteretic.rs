//! Steady-state evaluation of Jenkins and Iwan elements over one sampled
//! period, with exact derivatives of the force samples with respect to the
//! harmonic coefficients.
//!
//! Both elements are handled as a population of sliders with stiffness
//! weight `w` and slip displacement `φ` (the Jenkins element is a single
//! slider with `w = k_t`, `φ = F_s / k_t`). A stuck slider carries the force
//! `w (x - x_anchor + f_anchor)` where the anchor is the last sample at which
//! it slipped, or the unloaded origin if it never did; its derivative is
//! therefore `w (dx - dx_anchor)`.

use nalgebra::{DMatrix, DVector};

use super::basis::Basis;
use crate::model::HystereticElement;

const ORIGIN: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct SliderSet {
    weights: Vec<f64>,
    limits: Vec<f64>,
    total_weight: f64,
}

impl SliderSet {
    pub(crate) fn new(element: &HystereticElement) -> Self {
        let (weights, limits) = match element {
            HystereticElement::Jenkins { k_t, f_s } => (vec![*k_t], vec![f_s / k_t]),
            HystereticElement::Iwan { sliders } => {
                (sliders.weights.clone(), sliders.strengths.clone())
            }
        };
        let total_weight = weights.iter().sum();
        Self {
            weights,
            limits,
            total_weight,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.weights.len()
    }
}

/// Counters describing how much sequential work an evaluation needed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HystereticStats {
    /// Total element updates and per-sample evaluations.
    pub element_evals: usize,
    /// Length of the chain of updates that must run one after another.
    pub critical_path: usize,
    /// Velocity reversals found in the displacement samples.
    pub reversals: usize,
    /// True when the fast path declined (flat samples) and the standard path ran.
    pub fell_back: bool,
}

/// Force samples and the derivative of their coefficients.
pub(crate) struct SampledForce {
    pub forces: DVector<f64>,
    pub df_dx: DMatrix<f64>,
    pub stats: HystereticStats,
}

/// Cumulative sums over samples of `analysis[:, j] synth[j, :]` and of
/// `analysis[:, j]`. Between slip events a sample's derivative row is a fixed
/// multiple of `synth[j, :]` minus a fixed anchor row, so a whole run of
/// samples contributes through two differences of these sums.
#[derive(Debug, Clone)]
pub(crate) struct RunningSums {
    nc: usize,
    outer: Vec<f64>,
    column: Vec<f64>,
}

impl RunningSums {
    pub(crate) fn new(basis: &Basis) -> Self {
        let nc = basis.n_coeffs();
        let nt = basis.nt;
        let block = nc * nc;
        let mut outer = vec![0.0; (nt + 1) * block];
        let mut column = vec![0.0; (nt + 1) * nc];
        for j in 0..nt {
            let (done, rest) = outer.split_at_mut((j + 1) * block);
            let prev = &done[j * block..];
            let next = &mut rest[..block];
            for c in 0..nc {
                let s = basis.synth[(j, c)];
                for r in 0..nc {
                    next[c * nc + r] = prev[c * nc + r] + basis.analysis[(r, j)] * s;
                }
            }
            for r in 0..nc {
                column[(j + 1) * nc + r] = column[j * nc + r] + basis.analysis[(r, j)];
            }
        }
        Self { nc, outer, column }
    }

    /// Add the samples `from..to` where the stuck weight is `stuck` and the
    /// anchor row is `anchor`.
    fn accumulate(&self, jac: &mut DMatrix<f64>, from: usize, to: usize, stuck: f64, anchor: &[f64]) {
        let nc = self.nc;
        let block = nc * nc;
        let (a, b) = (&self.outer[from * block..], &self.outer[to * block..]);
        let (ca, cb) = (&self.column[from * nc..], &self.column[to * nc..]);
        let out = jac.as_mut_slice();
        for c in 0..nc {
            for r in 0..nc {
                let i = c * nc + r;
                out[i] += stuck * (b[i] - a[i]) - (cb[r] - ca[r]) * anchor[c];
            }
        }
    }
}

#[derive(Clone)]
struct SliderState {
    force: Vec<f64>,
    anchor: Vec<usize>,
    slipping: Vec<bool>,
    x: f64,
}

impl SliderState {
    fn unloaded(n: usize) -> Self {
        Self {
            force: vec![0.0; n],
            anchor: vec![ORIGIN; n],
            slipping: vec![false; n],
            x: 0.0,
        }
    }

    /// Move every slider to displacement `x` reached at sample `j`.
    fn advance(&mut self, set: &SliderSet, x: f64, j: usize, prev: usize) {
        let dx = x - self.x;
        for i in 0..set.len() {
            let u = dx + self.force[i];
            let phi = set.limits[i];
            if u.abs() < phi {
                if self.slipping[i] {
                    self.slipping[i] = false;
                    self.anchor[i] = prev;
                }
                self.force[i] = u;
            } else {
                self.slipping[i] = true;
                self.anchor[i] = j;
                self.force[i] = phi * u.signum();
            }
        }
        self.x = x;
    }
}

/// Indices where the sampled motion strictly changes direction, with
/// circular wraparound.
pub fn find_critical_instants(x: &[f64]) -> Vec<usize> {
    let nt = x.len();
    if nt < 3 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut behind = x[0] - x[nt - 1];
    for j in 0..nt {
        let next = if j + 1 < nt { x[j + 1] } else { x[0] };
        let ahead = next - x[j];
        if ahead * behind < 0.0 {
            out.push(j);
        }
        behind = ahead;
    }
    out
}

/// Literal two-pass evaluation: every sample is stepped in order twice and
/// the second pass is recorded.
pub(crate) fn standard(set: &SliderSet, x: &[f64], basis: &Basis) -> SampledForce {
    let synth = &basis.synth;
    let nt = x.len();
    let nc = synth.ncols();
    let n = set.len();
    let mut force = vec![0.0; n];
    let mut anchor = vec![ORIGIN; n];
    let mut slipping = vec![false; n];
    let mut stuck_weight = set.total_weight;
    let mut anchored = DVector::<f64>::zeros(nc);
    let mut forces = DVector::zeros(nt);
    let mut rows = DMatrix::zeros(nt, nc);
    let mut x_prev = 0.0;

    for pass in 0..2 {
        for j in 0..nt {
            let prev = if j > 0 {
                j - 1
            } else if pass == 0 {
                ORIGIN
            } else {
                nt - 1
            };
            let dx = x[j] - x_prev;
            let mut total = 0.0;
            for i in 0..n {
                let w = set.weights[i];
                let phi = set.limits[i];
                let u = dx + force[i];
                if u.abs() < phi {
                    if slipping[i] {
                        slipping[i] = false;
                        anchor[i] = prev;
                        stuck_weight += w;
                        add_row(&mut anchored, synth, prev, w);
                    }
                    force[i] = u;
                } else {
                    if !slipping[i] {
                        slipping[i] = true;
                        stuck_weight -= w;
                        if anchor[i] != ORIGIN {
                            add_row(&mut anchored, synth, anchor[i], -w);
                        }
                    }
                    anchor[i] = j;
                    force[i] = phi * u.signum();
                }
                total += w * force[i];
            }
            x_prev = x[j];
            if pass == 1 {
                forces[j] = total;
                for c in 0..nc {
                    rows[(j, c)] = stuck_weight * synth[(j, c)] - anchored[c];
                }
            }
        }
    }
    SampledForce {
        forces,
        df_dx: &basis.analysis * rows,
        stats: HystereticStats {
            element_evals: 2 * nt,
            critical_path: 2 * nt,
            reversals: find_critical_instants(x).len(),
            fell_back: false,
        },
    }
}

fn add_row(acc: &mut DVector<f64>, synth: &DMatrix<f64>, j: usize, scale: f64) {
    for c in 0..acc.len() {
        acc[c] += scale * synth[(j, c)];
    }
}

/// Sliders at a reversal, sorted by the travel each can absorb before slipping
/// in the new direction, with prefix sums for O(log n) sample evaluation.
struct Segment {
    x_start: f64,
    direction: f64,
    gaps: Vec<f64>,
    // Prefix sums over sliders sorted by gap; entry k covers the first k.
    weight: Vec<f64>,
    weight_limit: Vec<f64>,
    weight_force: Vec<f64>,
    // Row k holds the anchor rows summed over the first k sorted sliders.
    anchored: Vec<f64>,
    nc: usize,
}

impl Segment {
    fn new(set: &SliderSet, state: &SliderState, direction: f64, synth: &DMatrix<f64>) -> Self {
        let n = set.len();
        let nc = synth.ncols();
        let gap = |i: usize| set.limits[i] - direction * state.force[i];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| gap(a).total_cmp(&gap(b)));
        let mut gaps = Vec::with_capacity(n);
        let mut weight = vec![0.0; n + 1];
        let mut weight_limit = vec![0.0; n + 1];
        let mut weight_force = vec![0.0; n + 1];
        let mut anchored = vec![0.0; (n + 1) * nc];
        for (k, &i) in order.iter().enumerate() {
            let w = set.weights[i];
            gaps.push(gap(i));
            weight[k + 1] = weight[k] + w;
            weight_limit[k + 1] = weight_limit[k] + w * set.limits[i];
            weight_force[k + 1] = weight_force[k] + w * state.force[i];
            for c in 0..nc {
                let own = if state.anchor[i] == ORIGIN {
                    0.0
                } else {
                    w * synth[(state.anchor[i], c)]
                };
                anchored[(k + 1) * nc + c] = anchored[k * nc + c] + own;
            }
        }
        Self {
            x_start: state.x,
            direction,
            gaps,
            weight,
            weight_limit,
            weight_force,
            anchored,
            nc,
        }
    }

    /// Number of sliders already slipping after moving to `x`.
    fn slipped(&self, x: f64) -> usize {
        let travel = self.direction * (x - self.x_start);
        self.gaps.partition_point(|&g| g <= travel)
    }

    fn force(&self, x: f64, slipped: usize) -> f64 {
        let n = self.gaps.len();
        let stuck_weight = self.weight[n] - self.weight[slipped];
        stuck_weight * (x - self.x_start)
            + (self.weight_force[n] - self.weight_force[slipped])
            + self.direction * self.weight_limit[slipped]
    }

    /// Forces for samples `from..=to`, adding their derivative to `jac`.
    fn sweep(
        &self,
        x: &[f64],
        from: usize,
        to: usize,
        sums: &RunningSums,
        forces: &mut DVector<f64>,
        jac: &mut DMatrix<f64>,
        anchor: &mut [f64],
    ) {
        let n = self.gaps.len();
        let nc = self.nc;
        let mut flush = |start: usize, end: usize, slipped: usize| {
            let total = &self.anchored[n * nc..(n + 1) * nc];
            let part = &self.anchored[slipped * nc..(slipped + 1) * nc];
            for c in 0..nc {
                anchor[c] = total[c] - part[c];
            }
            let stuck = self.weight[n] - self.weight[slipped];
            sums.accumulate(jac, start, end, stuck, anchor);
        };
        let mut run_start = from;
        let mut run_slipped = self.slipped(x[from]);
        for j in from..=to {
            let slipped = self.slipped(x[j]);
            if slipped != run_slipped {
                flush(run_start, j, run_slipped);
                run_start = j;
                run_slipped = slipped;
            }
            forces[j] = self.force(x[j], slipped);
        }
        flush(run_start, to + 1, run_slipped);
    }
}

/// Evaluate the element only at velocity reversals (twice round the cycle)
/// and every other sample directly from the preceding reversal state.
///
/// Returns `None` when consecutive samples are equal; the reversal test is
/// ambiguous there and the caller should use [`standard`].
pub(crate) fn fast(set: &SliderSet, x: &[f64], basis: &Basis, sums: &RunningSums) -> Option<SampledForce> {
    let synth = &basis.synth;
    let nt = x.len();
    if x.windows(2).any(|w| w[0] == w[1]) || x[nt - 1] == x[0] {
        return None;
    }
    let crit = find_critical_instants(x);
    let m = crit.len();
    if m < 2 {
        return None;
    }
    let n = set.len();

    let mut state = SliderState::unloaded(n);
    let mut first_pass = 0;
    if crit[0] != 0 {
        state.advance(set, x[0], 0, ORIGIN);
        first_pass += 1;
    }
    let mut prev = 0;
    for &c in &crit {
        if c != 0 {
            state.advance(set, x[c], c, prev);
        } else {
            state.advance(set, x[0], 0, ORIGIN);
        }
        prev = c;
        first_pass += 1;
    }
    let wrap_state = state.clone();

    let mut states = Vec::with_capacity(m);
    for (i, &c) in crit.iter().enumerate() {
        let before = if i == 0 { crit[m - 1] } else { crit[i - 1] };
        state.advance(set, x[c], c, before);
        states.push(state.clone());
    }

    let nc = synth.ncols();
    let mut forces = DVector::zeros(nt);
    let mut df_dx = DMatrix::zeros(nc, nc);
    let mut anchor = vec![0.0; nc];
    let direction_after = |c: usize| (x[(c + 1) % nt] - x[c]).signum();

    let wrap = Segment::new(set, &wrap_state, direction_after(crit[m - 1]), synth);
    wrap.sweep(x, 0, crit[0], sums, &mut forces, &mut df_dx, &mut anchor);
    for i in 0..m {
        let c = crit[i];
        let end = if i + 1 < m { crit[i + 1] } else { nt - 1 };
        if end <= c {
            continue;
        }
        let seg = Segment::new(set, &states[i], direction_after(c), synth);
        seg.sweep(x, c + 1, end, sums, &mut forces, &mut df_dx, &mut anchor);
    }

    Some(SampledForce {
        forces,
        df_dx,
        stats: HystereticStats {
            element_evals: first_pass + m + nt,
            critical_path: first_pass + m,
            reversals: m,
            fell_back: false,
        },
    })
}
