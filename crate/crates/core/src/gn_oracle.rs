//! Numerical GN-model reference.
//!
//! The single-span NLI PSD is integrated in 2-D over rectangular channel
//! spectra, spans are accumulated incoherently, and the NLI power seen by
//! the CUT receiver is integrated against the matched-filter response.
//!
//! With `x = f₁ − f`, `y = f₂ − f` the span kernel is
//! `(1 − 2ρ·cos(bxyL) + ρ²) / (a² + (bxy)²)`, where `a = 2α`,
//! `b = 4π²|β̄₂|` and `ρ = e^{−aL}`. Only the SCI island and the XCI islands
//! are integrated. The `1/D` part does not depend on the span length, so it
//! is computed once for all spans sharing a fiber and a channel layout.

use std::f64::consts::PI;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cfm::NLI_PREFACTOR;
use crate::error::{Error, Result};
use crate::estimator::{NliEstimator, NliTrace};
use crate::model::{ChannelSpec, FiberParams, LinkSpec, SpanConfig};

/// Minimum resolution (points per channel bandwidth) for acceptance runs.
pub const ACCEPTANCE_RESOLUTION: usize = 32;

/// Cosine-term phase beyond which the oscillation is treated as averaged out (rad).
const PHASE_LIMIT: f64 = 50.0;
/// Largest phase advance across one panel inside the phase limit (rad).
const PHASE_STEP: f64 = 4.0;

/// Resolution and acceptance settings of the quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Nodes per channel bandwidth along each axis, away from the ridges.
    pub points_per_bandwidth: usize,
    /// Gauss–Legendre order of one panel.
    pub order: usize,
    /// Panels per ridge width at the finest grading level.
    pub ridge_resolution: f64,
    /// Interferers farther than this from the evaluation frequency are skipped (THz).
    pub window_thz: Option<f64>,
    /// Largest accepted relative change between the two resolutions.
    pub tolerance: f64,
    /// Repeat every evaluation at doubled resolution and compare.
    pub check_convergence: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            points_per_bandwidth: ACCEPTANCE_RESOLUTION,
            order: 8,
            ridge_resolution: 4.0,
            window_thz: None,
            tolerance: 0.02,
            check_convergence: true,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_bandwidth == 0 {
            return Err(Error::InvalidParameter("points_per_bandwidth must be positive".into()));
        }
        if self.order < 2 {
            return Err(Error::InvalidParameter(format!("quadrature order {} below 2", self.order)));
        }
        if !(self.ridge_resolution.is_finite() && self.ridge_resolution > 0.0) {
            return Err(Error::InvalidParameter(format!("ridge_resolution {}", self.ridge_resolution)));
        }
        if let Some(w) = self.window_thz {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!("window_thz {w}")));
            }
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance {}", self.tolerance)));
        }
        Ok(())
    }

    pub fn meets_acceptance_resolution(&self) -> bool {
        self.points_per_bandwidth >= ACCEPTANCE_RESOLUTION
    }

    /// Same settings with halved node spacing.
    pub fn refined(&self) -> Self {
        Self {
            points_per_bandwidth: 2 * self.points_per_bandwidth,
            ridge_resolution: 2.0 * self.ridge_resolution,
            ..*self
        }
    }
}

/// Receiver filter matched to a root-raised-cosine channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedFilter {
    pub f_center_thz: f64,
    pub symbol_rate_tbaud: f64,
    pub roll_off: f64,
}

impl MatchedFilter {
    pub fn for_channel(ch: &ChannelSpec) -> Self {
        Self { f_center_thz: ch.f_center_thz, symbol_rate_tbaud: ch.symbol_rate_tbaud, roll_off: ch.roll_off }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_center_thz.is_finite() && self.symbol_rate_tbaud.is_finite() && self.symbol_rate_tbaud > 0.0) {
            return Err(Error::InvalidParameter(format!("matched filter {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.roll_off) {
            return Err(Error::InvalidParameter(format!("roll-off {}", self.roll_off)));
        }
        Ok(())
    }

    /// Half width of the non-zero part of |H|² (THz).
    pub fn half_support(&self) -> f64 {
        0.5 * (1.0 + self.roll_off) * self.symbol_rate_tbaud
    }

    /// |H(f)|²: raised cosine with unit peak.
    pub fn power_response(&self, f_thz: f64) -> f64 {
        let d = (f_thz - self.f_center_thz).abs();
        let r = self.symbol_rate_tbaud;
        let flat = 0.5 * (1.0 - self.roll_off) * r;
        let edge = 1e-12 * r;
        if d <= flat + edge {
            1.0
        } else if d <= self.half_support() && self.roll_off > 0.0 {
            0.5 * (1.0 + (PI / (self.roll_off * r) * (d - flat)).cos())
        } else {
            0.0
        }
    }

    /// ∫|H|² df, equal to the symbol rate for any roll-off (THz).
    pub fn response_integral(&self) -> f64 {
        self.symbol_rate_tbaud
    }

    /// `n` equally spaced frequencies spanning the support, edges included.
    pub fn sample_frequencies(&self, n: usize) -> Result<Vec<f64>> {
        if n < 2 {
            return Err(Error::InsufficientSupport(format!("{n} samples")));
        }
        let h = self.half_support();
        let lo = self.f_center_thz - h;
        let step = 2.0 * h / (n - 1) as f64;
        Ok((0..n).map(|i| if i == n - 1 { self.f_center_thz + h } else { lo + step * i as f64 }).collect())
    }
}

/// NLI power after the matched filter: trapezoid rule over `(f, G_NLI(f))` samples (W).
pub fn nli_power_matched(samples: &[(f64, f64)], filter: &MatchedFilter) -> Result<f64> {
    filter.validate()?;
    if samples.len() < 2 {
        return Err(Error::InsufficientSupport(format!("{} samples", samples.len())));
    }
    if samples.iter().any(|(f, g)| !f.is_finite() || !g.is_finite()) {
        return Err(Error::InvalidParameter("non-finite PSD sample".into()));
    }
    if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidParameter("sample frequencies must increase strictly".into()));
    }
    let h = filter.half_support();
    let slack = 1e-9 * filter.symbol_rate_tbaud;
    let (first, last) = (samples[0].0, samples[samples.len() - 1].0);
    if first > filter.f_center_thz - h + slack || last < filter.f_center_thz + h - slack {
        return Err(Error::InsufficientSupport(format!(
            "samples cover [{first}, {last}] THz, filter needs [{}, {}] THz",
            filter.f_center_thz - h,
            filter.f_center_thz + h
        )));
    }
    let y: Vec<f64> = samples.iter().map(|&(f, g)| g * filter.power_response(f)).collect();
    Ok(samples
        .windows(2)
        .zip(y.windows(2))
        .map(|(s, v)| 0.5 * (v[0] + v[1]) * (s[1].0 - s[0].0))
        .sum())
}

struct GlRule {
    pairs: Vec<(f64, f64)>,
}

impl GlRule {
    fn new(order: usize) -> Result<Self> {
        let rule = GaussLegendre::new(order)
            .map_err(|e| Error::InvalidParameter(format!("quadrature order {order}: {e:?}")))?;
        Ok(Self { pairs: rule.into_node_weight_pairs() })
    }

    fn push(&self, a: f64, b: f64, n: usize, out: &mut Vec<(f64, f64)>) {
        let h = (b - a) / n as f64;
        for k in 0..n {
            let r = 0.5 * h;
            let c = a + h * k as f64 + r;
            out.extend(self.pairs.iter().map(|&(t, w)| (c + r * t, r * w)));
        }
    }
}

/// Panel layout along one axis.
struct AxisPlan {
    /// Feature width of the ridge at 0 (THz); infinite when there is none.
    width: f64,
    /// |dφ/dt| at L_max (rad/THz); zero disables phase refinement.
    phase_rate: f64,
    max_len: f64,
    ridge_resolution: f64,
}

/// Nodes on `[lo, hi]`, graded geometrically toward the point nearest 0.
fn axis_nodes(rule: &GlRule, lo: f64, hi: f64, plan: &AxisPlan, out: &mut Vec<(f64, f64)>) {
    out.clear();
    if hi <= lo {
        return;
    }
    let s = 0.0_f64.clamp(lo, hi);
    let mut breaks = vec![lo, hi, s];
    if plan.width.is_finite() {
        let min_scale = plan.width.max(s.abs()) / plan.ridge_resolution;
        for (side, extent) in [(-1.0, s - lo), (1.0, hi - s)] {
            let mut d = min_scale;
            while d < extent {
                breaks.push(s + side * d);
                d *= 2.0;
            }
        }
    }
    if plan.phase_rate > 0.0 {
        let t = PHASE_LIMIT / plan.phase_rate;
        breaks.extend([t, -t].into_iter().filter(|p| *p > lo && *p < hi));
    }
    breaks.sort_by(f64::total_cmp);
    let eps = 1e-14 * (hi - lo);
    breaks.dedup_by(|b, a| *b - *a <= eps);
    *breaks.last_mut().expect("two breaks") = hi;
    for seg in breaks.windows(2) {
        let (p, q) = (seg[0], seg[1]);
        let len = q - p;
        let mut n = (len / plan.max_len).ceil().max(1.0);
        // Segments never straddle 0, so the smaller |t| is at an end.
        let near = p.abs().min(q.abs());
        if plan.phase_rate > 0.0 && plan.phase_rate * near < PHASE_LIMIT {
            n = n.max((plan.phase_rate * len / PHASE_STEP).ceil());
        }
        rule.push(p, q, n as usize, out);
    }
}

/// Dispersion of the FWM triple: β̄₂(x + y) = beta0 + slope·(x + y).
#[derive(Debug, Clone, Copy)]
struct Kernel {
    two_alpha: f64,
    beta0: f64,
    slope: f64,
}

impl Kernel {
    fn new(fiber: &FiberParams, f_eval: f64) -> Self {
        Self {
            two_alpha: fiber.power_loss_at(f_eval),
            beta0: fiber.beta2_ps2_per_km + PI * fiber.beta3_ps3_per_km * (2.0 * f_eval - 2.0 * fiber.f_ref_thz),
            slope: PI * fiber.beta3_ps3_per_km,
        }
    }

    #[inline]
    fn b(&self, sum: f64) -> f64 {
        4.0 * PI * PI * (self.beta0 + self.slope * sum).abs()
    }
}

/// Rectangle `x ∈ a`, `y ∈ b`, `x + y ∈ c` in offsets from f_eval (THz).
#[derive(Debug, Clone, Copy)]
struct Island {
    a: (f64, f64),
    b: (f64, f64),
    c: (f64, f64),
    /// Geometry index of the channel at f₁ and f₁+f₂−f.
    outer: usize,
    multiplicity: f64,
}

struct IslandIntegral {
    j0: f64,
    jc: Vec<f64>,
}

fn integrate_island(
    isl: &Island,
    kern: &Kernel,
    lengths: &[f64],
    q: &QuadratureConfig,
    rule: &GlRule,
) -> IslandIntegral {
    let mut out = IslandIntegral { j0: 0.0, jc: vec![0.0; lengths.len()] };
    let (a0, a1) = isl.a;
    let (c0, c1) = isl.c;
    let ylo = isl.b.0.max(c0 - a1);
    let yhi = isl.b.1.min(c1 - a0);
    if yhi <= ylo {
        return out;
    }
    let a = kern.two_alpha;
    let a2 = a * a;
    let l_max = lengths.iter().copied().fold(0.0, f64::max);
    let b_mid = kern.b(0.5 * (c0 + c1)).max(f64::MIN_POSITIVE);
    let b_top = kern.b(c0).max(kern.b(c1));
    let x_max = a0.abs().max(a1.abs());
    let x_min = if a0 <= 0.0 && a1 >= 0.0 { 0.0 } else { a0.abs().min(a1.abs()) };
    let r_ref = (a1 - a0).min(isl.b.1 - isl.b.0);
    let max_len = q.order as f64 * r_ref / q.points_per_bandwidth as f64;

    let outer_plan = AxisPlan {
        width: a / (b_mid * x_max),
        phase_rate: b_top * x_min * l_max,
        max_len,
        ridge_resolution: q.ridge_resolution,
    };
    let mut kinks = vec![ylo, yhi];
    kinks.extend([c0 - a0, c1 - a1, 0.0].into_iter().filter(|k| *k > ylo && *k < yhi));
    kinks.sort_by(f64::total_cmp);

    let mut ys = Vec::new();
    let mut piece = Vec::new();
    for w in kinks.windows(2) {
        axis_nodes(rule, w[0], w[1], &outer_plan, &mut piece);
        ys.extend_from_slice(&piece);
    }

    let mut xs = Vec::new();
    for &(y, wy) in &ys {
        let xlo = a0.max(c0 - y);
        let xhi = a1.min(c1 - y);
        let plan = AxisPlan {
            width: if y == 0.0 { f64::INFINITY } else { a / (b_mid * y.abs()) },
            phase_rate: b_top * y.abs() * l_max,
            max_len,
            ridge_resolution: q.ridge_resolution,
        };
        axis_nodes(rule, xlo, xhi, &plan, &mut xs);
        for &(x, wx) in &xs {
            let p = kern.b(x + y) * x * y;
            let w = wy * wx / (a2 + p * p);
            out.j0 += w;
            if (p * l_max).abs() <= PHASE_LIMIT {
                for (acc, &len) in out.jc.iter_mut().zip(lengths) {
                    *acc += w * (p * len).cos();
                }
            }
        }
    }
    out
}

/// Channels taking part in the islands: (f_center, rate) and the comb index.
fn geometry(comb: &[ChannelSpec], ci: usize, f_eval: f64, q: &QuadratureConfig) -> (Vec<(f64, f64)>, Vec<usize>) {
    let mut geo = Vec::new();
    let mut idx = Vec::new();
    for (i, ch) in comb.iter().enumerate() {
        let in_window = q.window_thz.map_or(true, |w| (ch.f_center_thz - f_eval).abs() <= w);
        if ch.active && (i == ci || in_window) {
            geo.push((ch.f_center_thz, ch.symbol_rate_tbaud));
            idx.push(i);
        }
    }
    (geo, idx)
}

fn islands(geo: &[(f64, f64)], cut: usize, f_eval: f64) -> Vec<Island> {
    let band = |(f, r): (f64, f64)| (f - 0.5 * r - f_eval, f + 0.5 * r - f_eval);
    let c = band(geo[cut]);
    geo.iter()
        .enumerate()
        .map(|(n, &g)| {
            if n == cut {
                Island { a: c, b: c, c, outer: n, multiplicity: 1.0 }
            } else {
                let a = band(g);
                Island { a, b: c, c: a, outer: n, multiplicity: 2.0 }
            }
        })
        .collect()
}

struct Group {
    fiber: FiberParams,
    geo: Vec<(f64, f64)>,
    cut: usize,
    members: Vec<(usize, Vec<usize>)>,
}

/// Per-span NLI PSD at `f_eval`, referred to the end of each span, at one resolution.
fn span_psds_at(items: &[(&SpanConfig, &[ChannelSpec])], ci: usize, f_eval: f64, q: &QuadratureConfig) -> Result<Vec<f64>> {
    let rule = GlRule::new(q.order)?;
    let mut groups: Vec<Group> = Vec::new();
    for (s, &(span, comb)) in items.iter().enumerate() {
        let (geo, idx) = geometry(comb, ci, f_eval, q);
        let cut = idx.iter().position(|&i| i == ci).expect("CUT is active");
        match groups.iter_mut().find(|g| g.fiber == span.fiber && g.geo == geo) {
            Some(g) => g.members.push((s, idx)),
            None => groups.push(Group { fiber: span.fiber, geo, cut, members: vec![(s, idx)] }),
        }
    }

    let mut psd = vec![0.0; items.len()];
    for g in &groups {
        let kern = Kernel::new(&g.fiber, f_eval);
        let mut lengths: Vec<f64> = g.members.iter().map(|(s, _)| items[*s].0.length_km).collect();
        lengths.sort_by(f64::total_cmp);
        lengths.dedup();
        let isl = islands(&g.geo, g.cut, f_eval);
        let ints: Vec<IslandIntegral> =
            isl.par_iter().map(|i| integrate_island(i, &kern, &lengths, q, &rule)).collect();
        let gamma = g.fiber.gamma_per_w_km;
        for (s, idx) in &g.members {
            let (span, comb) = items[*s];
            let l = lengths.partition_point(|x| *x < span.length_km);
            let rho = (-kern.two_alpha * span.length_km).exp();
            let psd_of = |k: usize| {
                let ch = &comb[idx[k]];
                ch.launch_power_w / ch.symbol_rate_tbaud
            };
            let g_cut = psd_of(g.cut);
            let sum: f64 = isl
                .iter()
                .zip(&ints)
                .map(|(i, v)| {
                    let g_n = psd_of(i.outer);
                    i.multiplicity * g_n * g_n * ((1.0 + rho * rho) * v.j0 - 2.0 * rho * v.jc[l])
                })
                .sum();
            psd[*s] = NLI_PREFACTOR * gamma * gamma * span.net_transfer(f_eval) * g_cut * sum;
        }
    }
    Ok(psd)
}

fn check_inputs(items: &[(&SpanConfig, &[ChannelSpec])], ci: usize, f_eval: f64, q: &QuadratureConfig) -> Result<()> {
    q.validate()?;
    if items.is_empty() {
        return Err(Error::InvalidLink("no spans".into()));
    }
    for (s, (span, comb)) in items.iter().enumerate() {
        span.validate()?;
        let cut = comb.get(ci).ok_or_else(|| Error::InvalidLink(format!("no channel {ci} in span {s}")))?;
        if !cut.active {
            return Err(Error::InactiveChannel { index: ci, span: s });
        }
        if !f_eval.is_finite() || (f_eval - cut.f_center_thz).abs() > cut.symbol_rate_tbaud {
            return Err(Error::InvalidParameter(format!(
                "evaluation frequency {f_eval} THz too far from the CUT at {} THz",
                cut.f_center_thz
            )));
        }
        for ch in comb.iter().filter(|c| c.active) {
            if !(ch.symbol_rate_tbaud > 0.0 && ch.launch_power_w >= 0.0 && ch.f_center_thz.is_finite()) {
                return Err(Error::InvalidParameter(format!("channel {ch:?}")));
            }
        }
    }
    Ok(())
}

/// Accumulated Rx PSD for every truncation from per-span PSDs.
fn accumulate(items: &[(&SpanConfig, &[ChannelSpec])], psd: &[f64], f_eval: f64) -> Vec<f64> {
    let mut acc = 0.0;
    items
        .iter()
        .zip(psd)
        .map(|((span, _), g)| {
            acc = acc * span.net_transfer(f_eval) + g;
            acc
        })
        .collect()
}

fn relative_change(coarse: &[f64], fine: &[f64]) -> f64 {
    coarse
        .iter()
        .zip(fine)
        .map(|(c, f)| if *f == 0.0 { if *c == 0.0 { 0.0 } else { f64::INFINITY } } else { ((f - c) / f).abs() })
        .fold(0.0, f64::max)
}

/// Accumulated Rx PSD per truncation, with the convergence check of `q`.
fn rx_psds(items: &[(&SpanConfig, &[ChannelSpec])], ci: usize, f_eval: f64, q: &QuadratureConfig) -> Result<Vec<f64>> {
    check_inputs(items, ci, f_eval, q)?;
    let coarse = accumulate(items, &span_psds_at(items, ci, f_eval, q)?, f_eval);
    if !q.check_convergence {
        return Ok(coarse);
    }
    let fine = accumulate(items, &span_psds_at(items, ci, f_eval, &q.refined())?, f_eval);
    let change = relative_change(&coarse, &fine);
    if change >= q.tolerance {
        return Err(Error::NonConvergence { estimate: *fine.last().expect("non-empty"), relative_change: change });
    }
    Ok(fine)
}

/// NLI PSD generated in one span at `f_eval`, referred to the end of the span (W/THz).
pub fn gn_span_psd(
    span: &SpanConfig,
    comb: &[ChannelSpec],
    cut_index: usize,
    f_eval: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    Ok(rx_psds(&[(span, comb)], cut_index, f_eval, q)?[0])
}

fn link_items(link: &LinkSpec) -> Vec<(&SpanConfig, &[ChannelSpec])> {
    link.spans().iter().enumerate().map(|(s, span)| (span, link.comb(s))).collect()
}

/// Receiver NLI PSD at `f_eval` for every truncation 1…N_span (W/THz).
pub fn gn_rx_psd_all(link: &LinkSpec, f_eval: f64, q: &QuadratureConfig) -> Result<Vec<f64>> {
    rx_psds(&link_items(link), link.cut_index(), f_eval, q)
}

/// Receiver NLI PSD at `f_eval` after the whole link (W/THz).
pub fn gn_rx_psd(link: &LinkSpec, f_eval: f64, q: &QuadratureConfig) -> Result<f64> {
    Ok(*gn_rx_psd_all(link, f_eval, q)?.last().expect("non-empty link"))
}

/// Numerical GN reference as an [`NliEstimator`].
///
/// Without `matched_samples` the NLI power is G_NLI(f_CUT)·R_CUT, as for the
/// closed-form models. With it, the PSD is sampled across the matched filter
/// support and integrated against |H|².
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnOracle {
    pub quadrature: QuadratureConfig,
    pub matched_samples: Option<usize>,
}

impl GnOracle {
    pub fn new(quadrature: QuadratureConfig) -> Self {
        Self { quadrature, matched_samples: None }
    }

    pub fn with_matched_filter(self, samples: usize) -> Self {
        Self { matched_samples: Some(samples), ..self }
    }
}

impl NliEstimator for GnOracle {
    fn label(&self) -> String {
        "GN".to_string()
    }

    fn nli_trace(&self, link: &LinkSpec) -> Result<NliTrace> {
        let cut = *link.cut(0);
        let psd = gn_rx_psd_all(link, cut.f_center_thz, &self.quadrature)?;
        let power = match self.matched_samples {
            None => psd.iter().map(|g| g * cut.symbol_rate_tbaud).collect(),
            Some(n) => {
                let filter = MatchedFilter::for_channel(&cut);
                let freqs = filter.sample_frequencies(n)?;
                let columns = freqs
                    .iter()
                    .map(|&f| {
                        if filter.power_response(f) == 0.0 {
                            Ok(vec![0.0; link.n_spans()])
                        } else {
                            gn_rx_psd_all(link, f, &self.quadrature)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                (0..link.n_spans())
                    .map(|s| {
                        let samples: Vec<(f64, f64)> = freqs.iter().zip(&columns).map(|(f, c)| (*f, c[s])).collect();
                        nli_power_matched(&samples, &filter)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(NliTrace { psd, power })
    }
}
