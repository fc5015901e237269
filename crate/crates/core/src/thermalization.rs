//! Microcanonical references and thermalization measures.

use serde::{Deserialize, Serialize};

use crate::dynamics::EquilibriumRecord;
use crate::error::{Error, Result};
use crate::observables::{entropy_site, EigenstateSweep, SiteDistribution};

pub const DEFAULT_HALF_WIDTH: usize = 30;
pub const DEFAULT_TD_THRESHOLD: f64 = 0.07;

/// Microcanonical average centred on one eigenstate.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrocanonicalPoint {
    pub center: usize,
    /// Energy of the centre eigenstate.
    pub energy: f64,
    /// Number of eigenstates in the (possibly truncated) window.
    pub count: usize,
    pub distribution: SiteDistribution,
    pub n1: f64,
    /// Mean of the eigenstate entropies in the window.
    pub s1: f64,
    /// Entropy of the mean distribution (diagnostic alternative to `s1`).
    pub s1_of_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicrocanonicalCurve {
    pub half_width: usize,
    pub points: Vec<MicrocanonicalPoint>,
}

/// Unweighted mean of eigenstate values over `center - half_width ..= center + half_width`,
/// truncated at the spectrum edges, for centres `0, stride, 2 stride, ...`.
pub fn microcanonical_curve(sweep: &EigenstateSweep, half_width: usize, stride: usize) -> Result<MicrocanonicalCurve> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    if sweep.is_empty() {
        return Err(Error::InvalidParameter("empty eigenstate sweep".into()));
    }
    if sweep.records.windows(2).any(|w| w[1].energy < w[0].energy) {
        return Err(Error::InvalidParameter("sweep must be sorted by energy".into()));
    }
    let len = sweep.len();
    let points = (0..len)
        .step_by(stride)
        .map(|c| {
            let lo = c.saturating_sub(half_width);
            let hi = (c + half_width).min(len - 1);
            let window = &sweep.records[lo..=hi];
            let w = 1.0 / window.len() as f64;
            let distribution = SiteDistribution::mix(window.iter().map(|r| (w, &r.distribution)));
            MicrocanonicalPoint {
                center: c,
                energy: sweep.records[c].energy,
                count: window.len(),
                n1: window.iter().map(|r| r.n1).sum::<f64>() * w,
                s1: window.iter().map(|r| r.s1).sum::<f64>() * w,
                s1_of_mean: entropy_site(&distribution),
                distribution,
            }
        })
        .collect();
    Ok(MicrocanonicalCurve { half_width, points })
}

/// Point whose centre energy is nearest `energy`; ties go to the lower index.
pub fn microcanonical_at(curve: &MicrocanonicalCurve, energy: f64) -> Result<&MicrocanonicalPoint> {
    let pts = &curve.points;
    let (first, last) = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) => (a.energy, b.energy),
        _ => return Err(Error::InvalidParameter("empty microcanonical curve".into())),
    };
    let slack = 1e-12 * (last - first).abs().max(1.0);
    if !(energy >= first - slack && energy <= last + slack) {
        return Err(Error::EnergyOutOfRange { energy, lo: first, hi: last });
    }
    // First point with energy >= target.
    let hi = pts.partition_point(|p| p.energy < energy);
    if hi == 0 {
        return Ok(&pts[0]);
    }
    if hi == pts.len() {
        return Ok(&pts[pts.len() - 1]);
    }
    let lo = hi - 1;
    if energy - pts[lo].energy <= pts[hi].energy - energy {
        Ok(&pts[lo])
    } else {
        Ok(&pts[hi])
    }
}

/// `TD = (1/2) sum_{i=0}^{N} |p_i - q_i|`.
pub fn trace_distance(p: &SiteDistribution, q: &SiteDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Mismatch(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    Ok(0.5 * p.probabilities.iter().zip(&q.probabilities).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `|S1 - S1_micro| / S1_micro`.
pub fn entropy_deviation(s1: f64, s1_micro: f64) -> Result<f64> {
    if !(s1_micro > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "relative entropy deviation needs S1_micro > 0, got {s1_micro}"
        )));
    }
    Ok((s1 - s1_micro).abs() / s1_micro)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalizationVerdict {
    pub td: f64,
    pub delta_s_rel: f64,
    pub thermal: bool,
    pub threshold: f64,
}

impl ThermalizationVerdict {
    pub fn from_measures(td: f64, delta_s_rel: f64, threshold: f64) -> Self {
        Self { td, delta_s_rel, thermal: td < threshold, threshold }
    }
}

/// Compares an equilibrium record with the microcanonical point nearest its mean energy.
pub fn classify(record: &EquilibriumRecord, curve: &MicrocanonicalCurve, threshold: f64) -> Result<ThermalizationVerdict> {
    let mc = microcanonical_at(curve, record.mean_energy)?;
    let td = trace_distance(&record.distribution, &mc.distribution)?;
    let ds = entropy_deviation(record.s1, mc.s1)?;
    Ok(ThermalizationVerdict::from_measures(td, ds, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation coefficient.
    pub correlation: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Like [`classify`], but a microcanonical entropy of zero yields an undefined
/// (`NaN`) deviation instead of an error. TD and the verdict are unaffected.
pub fn classify_lenient(record: &EquilibriumRecord, curve: &MicrocanonicalCurve, threshold: f64) -> Result<ThermalizationVerdict> {
    let mc = microcanonical_at(curve, record.mean_energy)?;
    let td = trace_distance(&record.distribution, &mc.distribution)?;
    let ds = entropy_deviation(record.s1, mc.s1).unwrap_or_else(|_| {
        log::warn!("S1_micro = {} at E = {}: entropy deviation undefined", mc.s1, mc.energy);
        f64::NAN
    });
    Ok(ThermalizationVerdict::from_measures(td, ds, threshold))
}

/// Least-squares line `y = a + b x` and Pearson correlation.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Mismatch("x and y differ in length".into()));
    }
    let n = x.len() as f64;
    if x.len() < 2 {
        return Err(Error::Degenerate("need at least two points".into()));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let scale = |v: &[f64]| f64::EPSILON * v.iter().map(|a| a * a).sum::<f64>();
    if sxx <= scale(x) || syy <= scale(y) {
        return Err(Error::Degenerate("zero variance in fit input".into()));
    }
    let slope = sxy / sxx;
    Ok(LinearFit { slope, intercept: my - slope * mx, correlation: sxy / (sxx * syy).sqrt() })
}

/// Fit of TD against the relative entropy deviation over at least ten verdicts.
/// Verdicts with an undefined deviation are left out.
pub fn td_vs_deviation_fit(verdicts: &[ThermalizationVerdict]) -> Result<LinearFit> {
    if verdicts.len() < 10 {
        return Err(Error::InvalidParameter(format!("fit needs >= 10 points, got {}", verdicts.len())));
    }
    let finite: Vec<_> = verdicts.iter().filter(|v| v.delta_s_rel.is_finite() && v.td.is_finite()).collect();
    if finite.len() < 10 {
        return Err(Error::InvalidParameter(format!("fit needs >= 10 finite points, got {}", finite.len())));
    }
    let x: Vec<f64> = finite.iter().map(|v| v.delta_s_rel).collect();
    let y: Vec<f64> = finite.iter().map(|v| v.td).collect();
    linear_fit(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::EquilibriumMethod;
    use crate::observables::EigenRecord;
    use proptest::prelude::*;

    fn sweep_from(values: &[(f64, Vec<f64>)]) -> EigenstateSweep {
        let records = values
            .iter()
            .map(|(e, p)| {
                let d = SiteDistribution::new(p.clone()).unwrap();
                EigenRecord { energy: *e, n1: d.mean_occupation(), s1: d.entropy(), pr: 1.0, distribution: d }
            })
            .collect();
        EigenstateSweep { particles: 1, realizations: 1, records }
    }

    #[test]
    fn constant_and_edge_windows() {
        let s = sweep_from(&(0..100).map(|i| (i as f64, vec![0.3, 0.7])).collect::<Vec<_>>());
        let c = microcanonical_curve(&s, 30, 1).unwrap();
        assert_eq!(c.points.len(), 100);
        for p in &c.points {
            assert!((p.distribution.probabilities[0] - 0.3).abs() < 1e-15);
            assert!((p.s1 - s.records[0].s1).abs() < 1e-15);
        }
        assert_eq!(c.points[0].count, 31);
        assert_eq!(c.points[50].count, 61);
        assert_eq!(c.points[99].count, 31);
    }

    #[test]
    fn linear_observable_interior_mean() {
        // P_1 linear in the index: the window mean equals the centre value.
        let vals: Vec<(f64, Vec<f64>)> = (0..200).map(|i| {
            let x = i as f64 / 400.0;
            (i as f64, vec![1.0 - x, x])
        }).collect();
        let c = microcanonical_curve(&sweep_from(&vals), 30, 1).unwrap();
        for k in 30..170 {
            assert!((c.points[k].n1 - k as f64 / 400.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_center_lookup() {
        let s = sweep_from(&[(0.0, vec![1.0, 0.0]), (1.0, vec![0.0, 1.0]), (3.0, vec![0.5, 0.5])]);
        let c = microcanonical_curve(&s, 0, 1).unwrap();
        assert_eq!(microcanonical_at(&c, 1.0).unwrap().center, 1);
        assert_eq!(microcanonical_at(&c, 0.5).unwrap().center, 0); // tie -> lower
        assert_eq!(microcanonical_at(&c, 2.2).unwrap().center, 2);
        assert_eq!(microcanonical_at(&c, 1.9).unwrap().center, 1);
        assert!(matches!(microcanonical_at(&c, 3.5), Err(Error::EnergyOutOfRange { .. })));
        assert!(microcanonical_at(&c, -0.1).is_err());
    }

    #[test]
    fn trace_distance_examples() {
        let a = SiteDistribution::new(vec![1.0, 0.0]).unwrap();
        let b = SiteDistribution::new(vec![0.5, 0.5]).unwrap();
        let c = SiteDistribution::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(trace_distance(&a, &c).unwrap(), 1.0);
        assert_eq!(trace_distance(&a, &b).unwrap(), 0.5);
        assert!(trace_distance(&a, &SiteDistribution::delta(0, 2)).is_err());
    }

    #[test]
    fn entropy_deviation_examples() {
        assert_eq!(entropy_deviation(1.3, 1.3).unwrap(), 0.0);
        assert!((entropy_deviation(0.9, 1.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(entropy_deviation(1.0, 0.0).is_err());
    }

    #[test]
    fn classify_matching_record_is_thermal() {
        let s = sweep_from(&(0..50).map(|i| (i as f64 * 0.1, vec![0.2, 0.8])).collect::<Vec<_>>());
        let c = microcanonical_curve(&s, 30, 1).unwrap();
        let d = SiteDistribution::new(vec![0.2, 0.8]).unwrap();
        let rec = EquilibriumRecord {
            state: None,
            mean_energy: 2.0,
            pr: 10.0,
            n1: d.mean_occupation(),
            s1: d.entropy(),
            distribution: d,
            method: EquilibriumMethod::DiagonalEnsemble,
        };
        let v = classify(&rec, &c, DEFAULT_TD_THRESHOLD).unwrap();
        assert!(v.td.abs() < 1e-15 && v.delta_s_rel < 1e-12 && v.thermal);
        let far = EquilibriumRecord { distribution: SiteDistribution::delta(0, 1), s1: 0.0, ..rec.clone() };
        let v = classify(&far, &c, DEFAULT_TD_THRESHOLD).unwrap();
        assert!(!v.thermal && (v.delta_s_rel - 1.0).abs() < 1e-12);
        let outside = EquilibriumRecord { mean_energy: 99.0, ..rec };
        assert!(classify(&outside, &c, DEFAULT_TD_THRESHOLD).is_err());
    }

    #[test]
    fn fit_examples() {
        let v: Vec<_> = (0..20)
            .map(|i| ThermalizationVerdict::from_measures(0.7 * i as f64 / 20.0, i as f64 / 20.0, 0.07))
            .collect();
        let f = td_vs_deviation_fit(&v).unwrap();
        assert!((f.correlation - 1.0).abs() < 1e-12);
        assert!((f.eval(0.1) - 0.07).abs() < 1e-12);
        assert!(td_vs_deviation_fit(&v[..5]).is_err());
        let flat: Vec<_> = (0..12).map(|_| ThermalizationVerdict::from_measures(0.1, 0.2, 0.07)).collect();
        assert!(matches!(td_vs_deviation_fit(&flat), Err(Error::Degenerate(_))));
    }

    fn arb_dist(n: usize) -> impl Strategy<Value = SiteDistribution> {
        proptest::collection::vec(0.0f64..1.0, n).prop_filter_map("non-zero", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| SiteDistribution { probabilities: v.iter().map(|x| x / s).collect() })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn trace_distance_is_a_metric(p in arb_dist(8), q in arb_dist(8), r in arb_dist(8)) {
            let pq = trace_distance(&p, &q).unwrap();
            prop_assert_eq!(pq, trace_distance(&q, &p).unwrap());
            prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
            prop_assert!(pq <= trace_distance(&p, &r).unwrap() + trace_distance(&r, &q).unwrap() + 1e-12);
            prop_assert_eq!(trace_distance(&p, &p).unwrap(), 0.0);
        }

        #[test]
        fn classification_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let v_hi = ThermalizationVerdict::from_measures(hi, 0.0, 0.07);
            let v_lo = ThermalizationVerdict::from_measures(lo, 0.0, 0.07);
            prop_assert!(!v_hi.thermal || v_lo.thermal);
        }
    }
}
