//! Individual-fairness certificates for barycenter post-processing.
//!
//! Every certificate reports `d_min`, the smallest disparity tolerance from
//! which the Pareto-optimal transform `f_d` (or its composition with a
//! trained model) is guaranteed to meet the requested budget. All ranges are
//! of the form `d ∈ [d_min, ∞)`; `d_min = +∞` means no tolerance is
//! certified.
//!
//! The guarantees rest on the sup displacement `L(f) = sup ‖f(y, z) − y‖`
//! and on `L(f_d) = t · L(f*)`: two outputs of `f_d` are never further apart
//! than their inputs plus `2 L(f_d)`.

use std::f64::consts::SQRT_2;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::disparity::{wasserstein_disparity, DisparityMethod};
use crate::empirical::GroupedDataset;
use crate::error::{Error, Result};
use crate::linalg::sym_operator_norm;
use crate::transport::{BarycenterModel, GroupMap};

/// Disparity below which outcomes are treated as independent of the group.
pub const PARITY_TOL: f64 = 1e-10;

/// Relative slack applied to output distances in [`empirical_if_check`].
pub const IF_CHECK_SLACK: f64 = 1e-12;

/// An individual-fairness requirement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IfBudget {
    /// `‖y1 − y2‖ ≤ ε ⇒ sup_{z1,z2} ‖f(y1,z1) − f(y2,z2)‖ ≤ δ`.
    EpsilonDelta { epsilon: f64, delta: f64 },
    /// `sup_{z1,z2} ‖f(y1,z1) − f(y2,z2)‖ ≤ K ‖y1 − y2‖`.
    Lipschitz { k: f64 },
}

impl IfBudget {
    pub fn epsilon_delta(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && delta > 0.0) || !epsilon.is_finite() || !delta.is_finite() {
            return Err(Error::validation(format!(
                "(ε, δ) budget needs positive finite values, got ({epsilon}, {delta})"
            )));
        }
        Ok(IfBudget::EpsilonDelta { epsilon, delta })
    }

    pub fn lipschitz(k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::validation(format!("Lipschitz constant must be positive, got {k}")));
        }
        Ok(IfBudget::Lipschitz { k })
    }
}

/// Sup displacement of a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementStats {
    /// `max_i ‖f*(y_i, z_i) − y_i‖` over the dataset.
    pub l_emp: f64,
    /// Analytic bound for affine maps on `{‖y‖ ≤ y_sup}`.
    pub l_bound: Option<f64>,
    /// The `‖y‖` bound behind `l_bound`.
    pub y_sup: Option<f64>,
}

/// Which displacement estimate feeds a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisplacementChoice {
    #[default]
    Empirical,
    Bound,
}

impl DisplacementStats {
    pub fn select(&self, choice: DisplacementChoice) -> Result<f64> {
        match choice {
            DisplacementChoice::Empirical => Ok(self.l_emp),
            DisplacementChoice::Bound => self.l_bound.ok_or_else(|| {
                Error::validation("analytic displacement bound is only available for affine models")
            }),
        }
    }
}

/// Empirical sup displacement and, for affine models, the analytic bound
///
/// ```text
/// L ≤ sup_z ‖m_z − m̄‖ + sup_z ‖A_z − I‖_op · (y_sup + sup_z ‖m_z‖)
/// ```
///
/// valid for every `‖y‖ ≤ y_sup`, since `f(y) − y = (m̄ − m_z) + (A_z − I)(y − m_z)`.
/// `y_sup` defaults to the largest sample norm.
pub fn displacement_sup(
    model: &BarycenterModel,
    ds: &GroupedDataset,
    y_sup: Option<f64>,
) -> Result<DisplacementStats> {
    model.check_compatible(ds)?;
    let mut l_emp: f64 = 0.0;
    for (label, m) in ds.iter() {
        for row in m.row_iter() {
            let y = row.transpose();
            l_emp = l_emp.max((model.apply(&y, label)? - &y).norm());
        }
    }
    if let Some(s) = y_sup {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::validation(format!("y_sup must be finite and >= 0, got {s}")));
        }
    }
    let affine: Vec<_> = model
        .maps()
        .filter_map(|(_, g)| match g {
            GroupMap::Affine(a) => Some(a),
            GroupMap::Quantile(_) => None,
        })
        .collect();
    if affine.is_empty() {
        return Ok(DisplacementStats {
            l_emp,
            l_bound: None,
            y_sup: None,
        });
    }
    let y_sup = y_sup.unwrap_or_else(|| ds.max_sample_norm());
    let k = model.dims();
    let mut translation: f64 = 0.0;
    let mut linear: f64 = 0.0;
    let mut center: f64 = 0.0;
    for a in affine {
        translation = translation.max((&a.group_mean - &a.barycenter_mean).norm());
        linear = linear.max(sym_operator_norm(&(&a.linear - DMatrix::identity(k, k))));
        center = center.max(a.group_mean.norm());
    }
    Ok(DisplacementStats {
        l_emp,
        l_bound: Some(translation + linear * (y_sup + center)),
        y_sup: Some(y_sup),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Compatible,
    Incompatible,
    Conditional,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Compatible => "compatible",
            Verdict::Incompatible => "incompatible",
            Verdict::Conditional => "conditional",
        })
    }
}

/// Which guarantee produced a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremTag {
    /// Exact barycenter projection vs. uniform K-Lipschitz IF (negative result).
    LipschitzIncompatibility,
    /// Exact barycenter projection vs. (ε, δ) IF: `L(f*) ≤ (δ − ε)/2`, sharp.
    BarycenterEpsilonDelta,
    /// Compatible portion of the Pareto frontier under (ε, δ) IF.
    FrontierEpsilonDelta,
    /// `f_d` composed with an (ε, δ_g) or (ε_g, δ) IF trained model.
    CompositionEpsilonDelta,
    /// `f_d` composed with a K-Lipschitz IF trained model.
    CompositionLipschitz,
}

impl fmt::Display for TheoremTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TheoremTag::LipschitzIncompatibility => "lipschitz-incompatibility",
            TheoremTag::BarycenterEpsilonDelta => "barycenter-epsilon-delta",
            TheoremTag::FrontierEpsilonDelta => "frontier-epsilon-delta",
            TheoremTag::CompositionEpsilonDelta => "composition-epsilon-delta",
            TheoremTag::CompositionLipschitz => "composition-lipschitz",
        })
    }
}

/// Post-processing `f_d ∘ g` or pre-processing `g ∘ f_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositionMode {
    Post,
    Pre,
}

impl std::str::FromStr for CompositionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "post" => Ok(CompositionMode::Post),
            "pre" => Ok(CompositionMode::Pre),
            other => Err(Error::validation(format!("unknown mode `{other}` (expected post or pre)"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub displacement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disparity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<CompositionMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub theorem: TheoremTag,
    pub verdict: Verdict,
    /// Certified tolerances are `[d_min, ∞)`; `+∞` (serialised as `"inf"`)
    /// certifies none.
    #[serde(with = "d_min_serde")]
    pub d_min: f64,
    pub inputs: CertificateInputs,
    pub notes: Vec<String>,
}

impl Certificate {
    /// Whether tolerance `d` lies in the certified range.
    pub fn certifies(&self, d: f64) -> bool {
        self.d_min.is_finite() && d >= self.d_min
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn summary(&self) -> String {
        let range = if self.d_min.is_finite() {
            format!("d >= {:.6}", self.d_min)
        } else {
            "no tolerance certified".to_string()
        };
        format!("{}: {} ({})", self.theorem, self.verdict, range)
    }
}

mod d_min_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Str(s) => Err(de::Error::custom(format!("invalid d_min `{s}`"))),
        }
    }
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::validation(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn verdict_for(d_min: f64) -> Verdict {
    if d_min == 0.0 {
        Verdict::Compatible
    } else if d_min.is_finite() {
        Verdict::Conditional
    } else {
        Verdict::Incompatible
    }
}

/// `√2 V (1 − min(slack / (2L), 1))`, or `+∞` when `slack < 0`.
///
/// With `L = 0` the transform never moves anything, so any `slack ≥ 0`
/// certifies the whole frontier.
fn frontier_d_min(slack: f64, l: f64, v: f64) -> f64 {
    if slack < 0.0 {
        return f64::INFINITY;
    }
    let ratio = if l == 0.0 { 1.0 } else { (slack / (2.0 * l)).min(1.0) };
    if ratio >= 1.0 {
        return 0.0;
    }
    SQRT_2 * v * (1.0 - ratio)
}

/// Exact barycenter projection against uniform K-Lipschitz IF.
///
/// If the groups are not already at parity, the group maps send some common
/// point to different places, so no `K` works for any `d < √2 V`.
pub fn certify_lipschitz_barycenter(ds: &GroupedDataset, model: &BarycenterModel) -> Result<Certificate> {
    model.check_compatible(ds)?;
    let v = model.projection_loss();
    let method = DisparityMethod::for_variant(model.variant());
    let disparity = wasserstein_disparity(ds, method)?.disparity;
    let inputs = CertificateInputs {
        projection_loss: Some(v),
        disparity: Some(disparity),
        ..Default::default()
    };
    if disparity > PARITY_TOL {
        Ok(Certificate {
            theorem: TheoremTag::LipschitzIncompatibility,
            verdict: Verdict::Incompatible,
            d_min: SQRT_2 * v,
            inputs,
            notes: vec![
                "outcomes depend on the group (D > 0) and every group map is defined on the whole outcome space: \
                 no K-Lipschitz IF transform reaches any tolerance below sqrt(2) V; only the identity end is admissible"
                    .into(),
            ],
        })
    } else {
        Ok(Certificate {
            theorem: TheoremTag::LipschitzIncompatibility,
            verdict: Verdict::Compatible,
            d_min: 0.0,
            inputs,
            notes: vec!["outcomes already satisfy statistical parity; the optimal map is the identity".into()],
        })
    }
}

/// Exact barycenter projection against (ε, δ) IF: compatible iff
/// `L ≤ (δ − ε) / 2`.
pub fn certify_optimal(epsilon: f64, delta: f64, l: f64) -> Result<Certificate> {
    check_non_negative("epsilon", epsilon)?;
    check_non_negative("delta", delta)?;
    check_non_negative("displacement L", l)?;
    let inputs = CertificateInputs {
        epsilon: Some(epsilon),
        delta: Some(delta),
        displacement: Some(l),
        ..Default::default()
    };
    let threshold = (delta - epsilon) / 2.0;
    if l <= threshold {
        Ok(Certificate {
            theorem: TheoremTag::BarycenterEpsilonDelta,
            verdict: Verdict::Compatible,
            d_min: 0.0,
            inputs,
            notes: vec![format!(
                "L = {l} <= (delta - epsilon)/2 = {threshold}: the exact barycenter projection is (epsilon, delta)-IF"
            )],
        })
    } else {
        Ok(Certificate {
            theorem: TheoremTag::BarycenterEpsilonDelta,
            verdict: Verdict::Conditional,
            d_min: f64::INFINITY,
            inputs,
            notes: vec![
                format!("L = {l} > (delta - epsilon)/2 = {threshold}: the exact projection is not certified"),
                "the threshold is sharp without further distributional assumptions \
                 (equal-variance Gaussian groups with means delta apart violate it)"
                    .into(),
                "see the frontier certificate for the compatible tolerance range".into(),
            ],
        })
    }
}

/// Compatible portion of the Pareto frontier under (ε, δ) IF.
pub fn certify_frontier(epsilon: f64, delta: f64, l: f64, v: f64) -> Result<Certificate> {
    check_non_negative("epsilon", epsilon)?;
    check_non_negative("delta", delta)?;
    check_non_negative("displacement L", l)?;
    check_non_negative("projection loss V", v)?;
    let slack = delta - epsilon;
    let d_min = frontier_d_min(slack, l, v);
    let note = if slack < 0.0 {
        "delta < epsilon: no portion of the frontier can be certified".to_string()
    } else if d_min == 0.0 {
        "delta - epsilon >= 2L: every tolerance is certified".to_string()
    } else if slack == 0.0 {
        "delta = epsilon: only the identity end (d >= sqrt(2) V) is certified".to_string()
    } else {
        format!(
            "certified for d >= sqrt(2) V (1 - (delta - epsilon)/(2L)) = {d_min}, where L(f_d) <= (delta - epsilon)/2"
        )
    };
    Ok(Certificate {
        theorem: TheoremTag::FrontierEpsilonDelta,
        verdict: verdict_for(d_min),
        d_min,
        inputs: CertificateInputs {
            epsilon: Some(epsilon),
            delta: Some(delta),
            displacement: Some(l),
            projection_loss: Some(v),
            ..Default::default()
        },
        notes: vec![note],
    })
}

/// `f_d` composed with a trained model that is itself (ε, δ)-IF.
///
/// In `Post` mode `g_param` is `δ_g` (the model is (ε, δ_g)-IF with
/// `δ_g < δ`); in `Pre` mode it is `ε_g` (the model is (ε_g, δ)-IF with
/// `ε_g > ε`).
pub fn certify_composition_ed(
    epsilon: f64,
    delta: f64,
    g_param: f64,
    l: f64,
    v: f64,
    mode: CompositionMode,
) -> Result<Certificate> {
    check_non_negative("epsilon", epsilon)?;
    check_non_negative("delta", delta)?;
    check_non_negative("trained-model parameter", g_param)?;
    check_non_negative("displacement L", l)?;
    check_non_negative("projection loss V", v)?;
    let mut inputs = CertificateInputs {
        epsilon: Some(epsilon),
        delta: Some(delta),
        displacement: Some(l),
        projection_loss: Some(v),
        mode: Some(mode),
        ..Default::default()
    };
    let slack = match mode {
        CompositionMode::Post => {
            if !(g_param < delta) {
                return Err(Error::validation(format!(
                    "composition-epsilon-delta (post-processing) requires delta_g < delta, got delta_g = {g_param}, delta = {delta}"
                )));
            }
            inputs.delta_g = Some(g_param);
            delta - g_param
        }
        CompositionMode::Pre => {
            if !(g_param > epsilon) {
                return Err(Error::validation(format!(
                    "composition-epsilon-delta (pre-processing) requires epsilon_g > epsilon, got epsilon_g = {g_param}, epsilon = {epsilon}"
                )));
            }
            inputs.epsilon_g = Some(g_param);
            g_param - epsilon
        }
    };
    let d_min = frontier_d_min(slack, l, v);
    Ok(Certificate {
        theorem: TheoremTag::CompositionEpsilonDelta,
        verdict: verdict_for(d_min),
        d_min,
        inputs,
        notes: vec![format!("budget slack {slack} against 2L = {}", 2.0 * l)],
    })
}

/// `f_d` composed with a uniformly K-Lipschitz trained model.
pub fn certify_composition_lip(
    epsilon: f64,
    delta: f64,
    k: f64,
    l: f64,
    v: f64,
    mode: CompositionMode,
) -> Result<Certificate> {
    check_non_negative("epsilon", epsilon)?;
    check_non_negative("delta", delta)?;
    check_non_negative("displacement L", l)?;
    check_non_negative("projection loss V", v)?;
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::validation(format!("Lipschitz constant must be positive, got {k}")));
    }
    let slack = match mode {
        CompositionMode::Post => {
            if k * epsilon > delta {
                return Err(Error::validation(format!(
                    "composition-lipschitz (post-processing) requires K <= delta/epsilon, got K = {k}, delta/epsilon = {}",
                    delta / epsilon
                )));
            }
            delta - k * epsilon
        }
        CompositionMode::Pre => delta / k - epsilon,
    };
    let d_min = frontier_d_min(slack, l, v);
    let mut notes = vec![format!("budget slack {slack} against 2L = {}", 2.0 * l)];
    if slack < 0.0 {
        notes.push("delta/K < epsilon: even the unprocessed model misses the budget".into());
    }
    Ok(Certificate {
        theorem: TheoremTag::CompositionLipschitz,
        verdict: verdict_for(d_min),
        d_min,
        inputs: CertificateInputs {
            epsilon: Some(epsilon),
            delta: Some(delta),
            lipschitz_k: Some(k),
            displacement: Some(l),
            projection_loss: Some(v),
            mode: Some(mode),
            ..Default::default()
        },
        notes,
    })
}

/// One probe pair `((x1, z1), (x2, z2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub x1: DVector<f64>,
    pub z1: String,
    pub x2: DVector<f64>,
    pub z2: String,
}

impl Probe {
    pub fn new(x1: DVector<f64>, z1: impl Into<String>, x2: DVector<f64>, z2: impl Into<String>) -> Self {
        Probe {
            x1,
            z1: z1.into(),
            x2,
            z2: z2.into(),
        }
    }

    /// Every `(z1, z2)` label combination for each input pair.
    pub fn all_label_pairs(
        pairs: impl IntoIterator<Item = (DVector<f64>, DVector<f64>)>,
        labels: &[String],
    ) -> Vec<Probe> {
        let mut out = Vec::new();
        for (x1, x2) in pairs {
            for z1 in labels {
                for z2 in labels {
                    out.push(Probe::new(x1.clone(), z1.clone(), x2.clone(), z2.clone()));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfCheckReport {
    pub pairs_checked: usize,
    /// Probes breaking the budget.
    pub violations: usize,
    /// Largest output distance among pairs within `ε` ((ε, δ) mode).
    pub max_close_output_distance: f64,
    /// Largest output/input distance ratio; `+∞` for distinct outputs at equal inputs.
    pub max_ratio: f64,
    /// Index of the worst violating probe.
    pub worst_probe: Option<usize>,
    /// A probe with equal inputs and distinct outputs, if any.
    pub same_input_witness: Option<usize>,
}

/// Evaluates `f` on every probe and counts budget violations.
///
/// (ε, δ) mode flags pairs with `‖x1 − x2‖ ≤ ε` whose outputs are more than
/// `δ` apart; Lipschitz mode flags output/input ratios above `K`. Output
/// distances get a relative slack of [`IF_CHECK_SLACK`] for rounding.
pub fn empirical_if_check<F>(mut f: F, probes: &[Probe], budget: IfBudget) -> Result<IfCheckReport>
where
    F: FnMut(&DVector<f64>, &str) -> Result<DVector<f64>>,
{
    let mut report = IfCheckReport {
        pairs_checked: 0,
        violations: 0,
        max_close_output_distance: 0.0,
        max_ratio: 0.0,
        worst_probe: None,
        same_input_witness: None,
    };
    let mut worst_excess = 0.0;
    for (idx, p) in probes.iter().enumerate() {
        let input = (&p.x1 - &p.x2).norm();
        let out = (f(&p.x1, &p.z1)? - f(&p.x2, &p.z2)?).norm();
        report.pairs_checked += 1;
        let ratio = if input > 0.0 {
            out / input
        } else if out > IF_CHECK_SLACK {
            if report.same_input_witness.is_none() {
                report.same_input_witness = Some(idx);
            }
            f64::INFINITY
        } else {
            0.0
        };
        report.max_ratio = report.max_ratio.max(ratio);
        let excess = match budget {
            IfBudget::EpsilonDelta { epsilon, delta } => {
                if input > epsilon {
                    continue;
                }
                report.max_close_output_distance = report.max_close_output_distance.max(out);
                out - delta - IF_CHECK_SLACK * (1.0 + delta)
            }
            IfBudget::Lipschitz { k } => {
                if input == 0.0 {
                    if ratio.is_infinite() {
                        f64::INFINITY
                    } else {
                        continue;
                    }
                } else {
                    out - k * input - IF_CHECK_SLACK * (1.0 + k * input)
                }
            }
        };
        if excess > 0.0 {
            report.violations += 1;
            if excess > worst_excess {
                worst_excess = excess;
                report.worst_probe = Some(idx);
            }
        }
    }
    Ok(report)
}
