//! Two-node entanglement: photonic Bell-state measurement, link budget,
//! Monte Carlo attempts and the entanglement-distribution rate.

use crate::error::{require_positive, require_probability, Error, Result};
use crate::rng;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

/// Atom-photon state `sum a_{s,p} |s>|p>`, indexed `[atom][polarization]`
/// with atom 0 = down, 1 = up and polarization 0 = V, 1 = H.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomPhotonState {
    pub amp: [[C64; 2]; 2],
}

impl AtomPhotonState {
    /// `(|down, V> + e^{i phi} |up, H>) / sqrt 2`.
    pub fn entangled(phi: f64) -> Self {
        let z = C64::new(0.0, 0.0);
        Self {
            amp: [
                [C64::new(FRAC_1_SQRT_2, 0.0), z],
                [z, C64::from_polar(FRAC_1_SQRT_2, phi)],
            ],
        }
    }

    pub fn norm(&self) -> f64 {
        self.amp.iter().flatten().map(|c| c.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    CH,
    CV,
    DH,
    DV,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::CH, Detector::CV, Detector::DH, Detector::DV];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorPattern {
    /// One photon in each of two distinct detectors (ordered).
    Coincidence(Detector, Detector),
    /// Both photons in the same detector.
    Bunched(Detector),
}

impl DetectorPattern {
    pub fn all() -> Vec<DetectorPattern> {
        let mut v = Vec::with_capacity(10);
        for (i, &a) in Detector::ALL.iter().enumerate() {
            v.push(DetectorPattern::Bunched(a));
            for &b in &Detector::ALL[i + 1..] {
                v.push(DetectorPattern::Coincidence(a, b));
            }
        }
        v
    }

    pub fn herald(self) -> Option<BellState> {
        use Detector::*;
        match self {
            DetectorPattern::Coincidence(CH, CV) | DetectorPattern::Coincidence(DH, DV) => {
                Some(BellState::PsiPlus)
            }
            DetectorPattern::Coincidence(CH, DV) | DetectorPattern::Coincidence(CV, DH) => {
                Some(BellState::PsiMinus)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellState {
    PsiPlus,
    PsiMinus,
}

impl BellState {
    /// Amplitudes on |s_A s_B> with index `2 s_A + s_B`.
    pub fn amplitudes(self) -> [C64; 4] {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        match self {
            BellState::PsiPlus => [z, h, h, z],
            BellState::PsiMinus => [z, h, -h, z],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellOutcome {
    pub pattern: DetectorPattern,
    pub probability: f64,
    pub herald: Option<BellState>,
    /// Normalized two-atom state after the click pattern, if it can occur.
    pub projected: Option<[C64; 4]>,
}

/// Output-mode coefficients of one photon entering the beam splitter from
/// node A (`sign = 1`) or node B (`sign = -1`) with polarization `pol`.
fn outputs(pol: usize, sign: f64) -> [(Detector, f64); 2] {
    let (c, d) = if pol == 1 {
        (Detector::CH, Detector::DH)
    } else {
        (Detector::CV, Detector::DV)
    };
    [(c, FRAC_1_SQRT_2), (d, sign * FRAC_1_SQRT_2)]
}

/// Interferes the photons of two atom-photon states on a beam splitter and
/// resolves polarization at both outputs. Returns every click pattern.
pub fn bell_measure(a: &AtomPhotonState, b: &AtomPhotonState) -> Result<Vec<BellOutcome>> {
    for s in [a, b] {
        let n = s.norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::Normalization(n));
        }
    }
    let zero = C64::new(0.0, 0.0);
    // amp[x][y][atoms] on the ordered creation pair x^dag y^dag.
    let mut pair = [[[zero; 4]; 4]; 4];
    for sa in 0..2 {
        for p in 0..2 {
            for sb in 0..2 {
                for q in 0..2 {
                    let c = a.amp[sa][p] * b.amp[sb][q];
                    if c == zero {
                        continue;
                    }
                    for (x, cx) in outputs(p, 1.0) {
                        for (y, cy) in outputs(q, -1.0) {
                            pair[x.index()][y.index()][2 * sa + sb] += c * (cx * cy);
                        }
                    }
                }
            }
        }
    }
    let outcomes = DetectorPattern::all()
        .into_iter()
        .map(|pattern| {
            let psi: [C64; 4] = match pattern {
                DetectorPattern::Bunched(x) => {
                    let i = x.index();
                    std::array::from_fn(|k| pair[i][i][k] * std::f64::consts::SQRT_2)
                }
                DetectorPattern::Coincidence(x, y) => {
                    let (i, j) = (x.index(), y.index());
                    std::array::from_fn(|k| pair[i][j][k] + pair[j][i][k])
                }
            };
            let probability: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
            let projected = (probability > 1e-15).then(|| {
                let s = probability.sqrt();
                psi.map(|c| c / s)
            });
            BellOutcome {
                pattern,
                probability,
                herald: pattern.herald(),
                projected,
            }
        })
        .collect();
    Ok(outcomes)
}

/// Per-arm efficiencies. Both arms are assumed identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub eta_interface: f64,
    pub eta_transmission: f64,
    pub eta_detection: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        require_probability("eta_interface", self.eta_interface)?;
        require_probability("eta_transmission", self.eta_transmission)?;
        require_probability("eta_detection", self.eta_detection)
    }

    /// Probability that one node's photon reaches a detector and clicks.
    pub fn arm_survival(&self) -> f64 {
        self.eta_interface * self.eta_transmission * self.eta_detection
    }
}

/// `P_E = (1/2) (eta eta_t eta_d)^2`: both photons detected and a heralding
/// pattern observed.
pub fn attempt_success_probability(budget: &LinkBudget) -> Result<f64> {
    budget.validate()?;
    Ok(0.5 * budget.arm_survival().powi(2))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptTally {
    pub attempts: u64,
    pub both_detected: u64,
    pub psi_plus: u64,
    pub psi_minus: u64,
    pub bunched: u64,
}

impl AttemptTally {
    pub fn heralds(&self) -> u64 {
        self.psi_plus + self.psi_minus
    }

    pub fn success_fraction(&self) -> f64 {
        self.heralds() as f64 / self.attempts.max(1) as f64
    }

    fn merge(self, o: Self) -> Self {
        Self {
            attempts: self.attempts + o.attempts,
            both_detected: self.both_detected + o.both_detected,
            psi_plus: self.psi_plus + o.psi_plus,
            psi_minus: self.psi_minus + o.psi_minus,
            bunched: self.bunched + o.bunched,
        }
    }
}

const ATTEMPT_CHUNK: u64 = 1 << 16;

/// Samples `n_attempts` independent attempts with ideal atom-photon states;
/// deterministic in `seed` regardless of thread count.
pub fn simulate_attempts(budget: &LinkBudget, n_attempts: u64, seed: u64) -> Result<AttemptTally> {
    budget.validate()?;
    let state = AtomPhotonState::entangled(0.0);
    let outcomes = bell_measure(&state, &state)?;
    let mut cumulative = Vec::with_capacity(outcomes.len());
    let mut acc = 0.0;
    for o in &outcomes {
        acc += o.probability;
        cumulative.push((acc, o.pattern));
    }
    let survive = budget.arm_survival();
    let n_chunks = n_attempts.div_ceil(ATTEMPT_CHUNK);
    let tally = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut r = rng::stream(seed, "link-attempts", chunk);
            let n = ATTEMPT_CHUNK.min(n_attempts - chunk * ATTEMPT_CHUNK);
            let mut t = AttemptTally {
                attempts: n,
                ..Default::default()
            };
            for _ in 0..n {
                if !(r.random::<f64>() < survive && r.random::<f64>() < survive) {
                    continue;
                }
                t.both_detected += 1;
                let u: f64 = r.random::<f64>() * acc;
                let pattern = cumulative
                    .iter()
                    .find(|(c, _)| u < *c)
                    .map_or(cumulative.last().unwrap().1, |(_, p)| *p);
                match pattern.herald() {
                    Some(BellState::PsiPlus) => t.psi_plus += 1,
                    Some(BellState::PsiMinus) => t.psi_minus += 1,
                    None => {
                        if matches!(pattern, DetectorPattern::Bunched(_)) {
                            t.bunched += 1
                        }
                    }
                }
            }
            t
        })
        .reduce(AttemptTally::default, AttemptTally::merge);
    Ok(tally)
}

/// Timing of one attempt and the periodic overheads, in us.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub tau_write: f64,
    pub tau_retrieve: f64,
    pub tau_pump: f64,
    pub prep_every: u32,
    pub prep_duration: f64,
    pub cool_every: u32,
    pub cool_duration: f64,
    /// Count the state-preparation time inside the cooling overhead as well.
    pub paper_compat: bool,
}

impl RateModel {
    pub fn validate(&self) -> Result<()> {
        require_positive("tau_write", self.tau_write)?;
        require_positive("tau_retrieve", self.tau_retrieve)?;
        require_positive("tau_pump", self.tau_pump)?;
        crate::error::require_nonnegative("prep_duration", self.prep_duration)?;
        crate::error::require_nonnegative("cool_duration", self.cool_duration)?;
        if self.prep_every == 0 || self.cool_every == 0 {
            return Err(Error::domain(
                "prep_every",
                "overhead periods must be at least one cycle",
            ));
        }
        Ok(())
    }

    pub fn cycle_time(&self) -> f64 {
        self.tau_write + self.tau_retrieve + self.tau_pump
    }

    pub fn prep_factor(&self) -> f64 {
        let busy = self.prep_every as f64 * self.cycle_time();
        busy / (busy + self.prep_duration)
    }

    pub fn cool_factor(&self) -> f64 {
        let busy = self.cool_every as f64 * self.cycle_time();
        let extra = if self.paper_compat {
            self.cool_every as f64 / self.prep_every as f64 * self.prep_duration
        } else {
            0.0
        };
        busy / (busy + self.cool_duration + extra)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub p_e: f64,
    pub cycle_time_us: f64,
    pub ideal_rate_hz: f64,
    pub prep_factor: f64,
    pub cool_factor: f64,
    pub practical_rate_hz: f64,
}

pub fn entanglement_rate(p_e: f64, model: &RateModel) -> Result<RateReport> {
    require_probability("p_e", p_e)?;
    model.validate()?;
    let tau = model.cycle_time();
    let ideal = crate::units::per_us_to_hz(p_e / tau);
    let (prep, cool) = (model.prep_factor(), model.cool_factor());
    Ok(RateReport {
        p_e,
        cycle_time_us: tau,
        ideal_rate_hz: ideal,
        prep_factor: prep,
        cool_factor: cool,
        practical_rate_hz: ideal * prep * cool,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn permanent_oracle(a: &AtomPhotonState, b: &AtomPhotonState) -> Vec<(DetectorPattern, f64)> {
        // Inputs: A_V, A_H, B_V, B_H. Outputs: CH, CV, DH, DV.
        let s = FRAC_1_SQRT_2;
        let u = [
            [0.0, s, 0.0, s],
            [s, 0.0, s, 0.0],
            [0.0, s, 0.0, -s],
            [s, 0.0, -s, 0.0],
        ];
        DetectorPattern::all()
            .into_iter()
            .map(|pat| {
                let (x, y, bunched) = match pat {
                    DetectorPattern::Bunched(d) => (d as usize, d as usize, true),
                    DetectorPattern::Coincidence(d, e) => (d as usize, e as usize, false),
                };
                let mut p = 0.0;
                for sa in 0..2 {
                    for sb in 0..2 {
                        let mut amp = C64::new(0.0, 0.0);
                        for pa in 0..2 {
                            for pb in 0..2 {
                                let (i1, i2) = (pa, 2 + pb);
                                let perm = u[x][i1] * u[y][i2] + u[y][i1] * u[x][i2];
                                let perm = if bunched {
                                    perm / std::f64::consts::SQRT_2
                                } else {
                                    perm
                                };
                                amp += a.amp[sa][pa] * b.amp[sb][pb] * perm;
                            }
                        }
                        p += amp.norm_sqr();
                    }
                }
                (pat, p)
            })
            .collect()
    }

    #[test]
    fn entangled_states_give_quarter_per_bell_state() {
        let s = AtomPhotonState::entangled(0.0);
        let out = bell_measure(&s, &s).unwrap();
        let total: f64 = out.iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for bell in [BellState::PsiPlus, BellState::PsiMinus] {
            let p: f64 = out
                .iter()
                .filter(|o| o.herald == Some(bell))
                .map(|o| o.probability)
                .sum();
            assert!((p - 0.25).abs() < 1e-12);
            for o in out.iter().filter(|o| o.herald == Some(bell)) {
                let target = bell.amplitudes();
                let proj = o.projected.unwrap();
                let overlap: C64 = target.iter().zip(&proj).map(|(t, p)| t.conj() * p).sum();
                assert!((overlap.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
        for o in &out {
            if let DetectorPattern::Coincidence(Detector::CH, Detector::DH)
            | DetectorPattern::Coincidence(Detector::CV, Detector::DV) = o.pattern
            {
                assert!(o.probability < 1e-15);
            }
        }
    }

    #[test]
    fn matches_permanent_oracle() {
        let a = AtomPhotonState::entangled(0.4);
        let mut b = AtomPhotonState::entangled(-1.1);
        b.amp[0][1] = C64::new(0.3, 0.1);
        let n = b.norm().sqrt();
        b.amp.iter_mut().flatten().for_each(|c| *c /= n);
        let ours = bell_measure(&a, &b).unwrap();
        for (o, (pat, p)) in ours.iter().zip(permanent_oracle(&a, &b)) {
            assert_eq!(o.pattern, pat);
            assert!((o.probability - p).abs() < 1e-12, "{pat:?}");
        }
    }

    #[test]
    fn identical_polarizations_bunch() {
        let z = C64::new(0.0, 0.0);
        let h = AtomPhotonState {
            amp: [[z, C64::new(1.0, 0.0)], [z, z]],
        };
        let out = bell_measure(&h, &h).unwrap();
        let bunched: f64 = out
            .iter()
            .filter(|o| matches!(o.pattern, DetectorPattern::Bunched(_)))
            .map(|o| o.probability)
            .sum();
        assert!((bunched - 1.0).abs() < 1e-12);
    }

    #[test]
    fn success_probability_and_rate() {
        let b = LinkBudget {
            eta_interface: 0.548,
            eta_transmission: 0.7,
            eta_detection: 0.9,
        };
        let p = attempt_success_probability(&b).unwrap();
        assert!((p - 0.059_595).abs() < 1e-5);
        let mut m = RateModel {
            tau_write: 1.0,
            tau_retrieve: 1.0,
            tau_pump: 1.0,
            prep_every: 20,
            prep_duration: 1.0,
            cool_every: 2000,
            cool_duration: 1000.0,
            paper_compat: true,
        };
        let r = entanglement_rate(p, &m).unwrap();
        assert!((r.ideal_rate_hz - 19_865.0).abs() < 5.0);
        assert!((r.prep_factor - 60.0 / 61.0).abs() < 1e-12);
        assert!((r.cool_factor - 6000.0 / 7100.0).abs() < 1e-12);
        m.paper_compat = false;
        assert!((m.cool_factor() - 6000.0 / 7000.0).abs() < 1e-12);
        assert!(attempt_success_probability(&LinkBudget {
            eta_transmission: 1.5,
            ..b
        })
        .is_err());
    }

    #[test]
    fn attempts_are_deterministic() {
        let b = LinkBudget {
            eta_interface: 0.8,
            eta_transmission: 0.9,
            eta_detection: 0.9,
        };
        let a = simulate_attempts(&b, 200_000, 5).unwrap();
        assert_eq!(a, simulate_attempts(&b, 200_000, 5).unwrap());
        let p = attempt_success_probability(&b).unwrap();
        let se = (p * (1.0 - p) / 200_000.0).sqrt();
        assert!((a.success_fraction() - p).abs() < 5.0 * se);
    }
}
