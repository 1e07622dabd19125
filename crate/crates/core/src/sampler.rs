//! Confidence-gated sampling from the memory banks.
//!
//! Every iteration each enabled, non-empty bank is opened with probability
//! `n0 · σ((MEC − β) / γ)`; an opened bank contributes one entry drawn
//! uniformly from its most confident entries.

use std::collections::BTreeMap;

use rand::Rng;

use crate::bank::{top_n_distribution, BankEntry, BankSet};
use crate::error::{EcapError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n0: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n_top: usize,
    /// Per-class replacements for `n_top`.
    pub n_top_overrides: BTreeMap<usize, usize>,
    /// Leave disabled classes out of the MEC average instead of counting them
    /// as zero.
    pub mec_excludes_disabled: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n0: 1.0,
            beta: 0.8,
            gamma: 0.005,
            n_top: 30,
            n_top_overrides: BTreeMap::new(),
            mec_excludes_disabled: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what, detail: String| Err(EcapError::InvalidValue { what, detail });
        if !(0.0..=1.0).contains(&self.n0) {
            return bad("n0", format!("expected [0, 1], got {}", self.n0));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta", format!("expected (0, 1), got {}", self.beta));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma", format!("expected > 0, got {}", self.gamma));
        }
        if self.n_top == 0 || self.n_top_overrides.values().any(|&n| n == 0) {
            return bad("n_top", "expected >= 1".into());
        }
        Ok(())
    }

    pub fn n_top_for(&self, class: usize) -> usize {
        self.n_top_overrides.get(&class).copied().unwrap_or(self.n_top)
    }
}

/// Mean expected confidence of a sample drawn uniformly over the banks.
///
/// Empty banks contribute zero. Disabled banks contribute zero, or are left
/// out of the average entirely when `mec_excludes_disabled` is set.
pub fn mec(banks: &BankSet, cfg: &SamplerConfig) -> f64 {
    let mut total = 0.0;
    let mut slots = 0usize;
    for (c, bank) in banks.banks().iter().enumerate() {
        let enabled = banks.is_enabled(c);
        if !enabled && cfg.mec_excludes_disabled {
            continue;
        }
        slots += 1;
        if !enabled || bank.is_empty() {
            continue;
        }
        let probs = top_n_distribution(bank, cfg.n_top_for(c)).expect("bank is non-empty");
        total += bank
            .entries()
            .iter()
            .zip(&probs)
            .map(|(e, p)| e.confidence * p)
            .sum::<f64>();
    }
    if slots == 0 {
        0.0
    } else {
        total / slots as f64
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `n0 · σ((mec − β) / γ)`, shared by all classes.
pub fn gate_probability(mec_value: f64, cfg: &SamplerConfig) -> f64 {
    cfg.n0 * sigmoid((mec_value - cfg.beta) / cfg.gamma)
}

#[derive(Debug, Clone)]
pub struct SampleDraw<'a> {
    pub mec: f64,
    pub gate_probability: f64,
    /// At most one entry per class, in ascending class order.
    pub selected: Vec<&'a BankEntry>,
}

impl SampleDraw<'_> {
    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

/// Gates each enabled, non-empty bank and draws one entry from the open ones.
///
/// RNG consumption is fixed: classes in ascending order, one `f64` for the
/// gate, then (if open) one index into the bank's top-n ranking.
pub fn draw<'a, R: Rng + ?Sized>(
    banks: &'a BankSet,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> SampleDraw<'a> {
    let mec_value = mec(banks, cfg);
    let p = gate_probability(mec_value, cfg);
    let mut selected = Vec::new();
    for (c, bank) in banks.banks().iter().enumerate() {
        if !banks.is_enabled(c) || bank.is_empty() {
            continue;
        }
        if rng.gen::<f64>() >= p {
            continue;
        }
        let top = bank.top_n(cfg.n_top_for(c));
        let pick = top[rng.gen_range(0..top.len())];
        selected.push(&bank.entries()[pick]);
    }
    SampleDraw {
        mec: mec_value,
        gate_probability: p,
        selected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::ImageId;
    use crate::tensor::{ImageTensor, OneHotLabel};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn entry(class_id: usize, id: u64, confidence: f64) -> BankEntry {
        BankEntry {
            image: ImageTensor::zeros(1, 1),
            label: OneHotLabel::from_classes(1, 1, 8, &[Some(class_id)]).unwrap(),
            confidence,
            image_id: ImageId(id),
            class_id,
        }
    }

    fn banks(c: usize, contents: &[(usize, &[f64])]) -> BankSet {
        let mut set = BankSet::new(c);
        let mut id = 0;
        for (class, qs) in contents {
            for &q in *qs {
                set.insert(vec![entry(*class, id, q)], ImageId(id)).unwrap();
                id += 1;
            }
        }
        set
    }

    fn cfg(n_top: usize) -> SamplerConfig {
        SamplerConfig {
            n_top,
            ..Default::default()
        }
    }

    #[test]
    fn mec_examples() {
        assert_eq!(mec(&BankSet::new(5), &cfg(3)), 0.0);
        assert_eq!(mec(&banks(2, &[(0, &[1.0]), (1, &[1.0])]), &cfg(1)), 1.0);
        let got = mec(&banks(2, &[(0, &[0.9, 0.8])]), &cfg(2));
        assert!((got - 0.425).abs() < 1e-15);
    }

    #[test]
    fn mec_disabled_handling() {
        let mut set = banks(2, &[(0, &[0.9])]);
        set.set_enabled(1, false).unwrap();
        let excl = cfg(1);
        assert!((mec(&set, &excl) - 0.9).abs() < 1e-15);
        let incl = SamplerConfig {
            mec_excludes_disabled: false,
            ..cfg(1)
        };
        assert!((mec(&set, &incl) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn gate_examples() {
        let c = SamplerConfig {
            n0: 0.6,
            beta: 0.95,
            gamma: 0.005,
            ..Default::default()
        };
        assert!((gate_probability(0.95, &c) - 0.3).abs() < 1e-15);
        let c1 = SamplerConfig { n0: 1.0, ..c.clone() };
        let expect = 1.0 / (1.0 + (-10.0f64).exp());
        assert!((gate_probability(1.0, &c1) - expect).abs() < 1e-15);
        assert!((gate_probability(1.0, &c1) - 0.99995).abs() < 1e-5);
        let c0 = SamplerConfig { n0: 0.0, ..c };
        assert_eq!(gate_probability(1.0, &c0), 0.0);
        assert_eq!(gate_probability(0.0, &c0), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        for bad in [
            SamplerConfig { n0: 1.5, ..Default::default() },
            SamplerConfig { beta: 1.0, ..Default::default() },
            SamplerConfig { gamma: 0.0, ..Default::default() },
            SamplerConfig { n_top: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn closed_gate_draws_nothing() {
        let set = banks(3, &[(0, &[0.99]), (2, &[0.99, 0.98])]);
        let c = SamplerConfig { n0: 0.0, ..cfg(2) };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(draw(&set, &c, &mut rng).is_empty());
        }
    }

    #[test]
    fn open_gate_single_entry() {
        let set = banks(3, &[(1, &[1.0])]);
        let c = SamplerConfig { n0: 1.0, beta: 0.2, gamma: 0.001, ..cfg(4) };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let d = draw(&set, &c, &mut rng);
            assert_eq!(d.selected.len(), 1);
            assert_eq!(d.selected[0].image_id, ImageId(0));
        }
    }

    #[test]
    fn draw_is_reproducible() {
        let set = banks(3, &[(0, &[0.9, 0.95, 0.97]), (1, &[0.99]), (2, &[0.96, 0.91])]);
        let c = SamplerConfig { beta: 0.9, ..cfg(2) };
        let ids = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| draw(&set, &c, &mut rng).selected.iter().map(|e| e.image_id).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(5), ids(5));
    }

    proptest! {
        #[test]
        fn gate_strictly_increasing(a in 0.7f64..0.9, b in 0.7f64..0.9, n0 in 0.01f64..1.0) {
            let c = SamplerConfig { n0, beta: 0.8, gamma: 0.05, ..Default::default() };
            let (pa, pb) = (gate_probability(a, &c), gate_probability(b, &c));
            if a < b { prop_assert!(pa < pb); }
            prop_assert!(pa > 0.0 && pa < n0);
        }

        #[test]
        fn mec_permutation_invariant(mut qs in proptest::collection::vec(0.0f64..1.0, 1..20), n in 1usize..10, rot in 0usize..20) {
            let a = mec(&banks(2, &[(0, &qs)]), &cfg(n));
            let k = rot % qs.len();
            qs.rotate_left(k);
            let b = mec(&banks(2, &[(0, &qs)]), &cfg(n));
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn mec_monotone_in_top_confidence(qs in proptest::collection::vec(0.0f64..0.9, 1..20), n in 1usize..10, bump in 0.0f64..0.1) {
            let set = banks(2, &[(0, &qs)]);
            let before = mec(&set, &cfg(n));
            let top = set.bank(0).top_n(n)[0];
            let mut raised = qs.clone();
            raised[top] += bump;
            let after = mec(&banks(2, &[(0, &raised)]), &cfg(n));
            prop_assert!(after >= before - 1e-15);
        }

        #[test]
        fn disabled_banks_never_drawn(seed in 0u64..1000, mask in proptest::collection::vec(any::<bool>(), 4)) {
            let mut set = banks(4, &[(0, &[0.99]), (1, &[0.99, 0.98]), (2, &[0.97]), (3, &[0.995])]);
            for (c, &on) in mask.iter().enumerate() {
                set.set_enabled(c, on).unwrap();
            }
            let c = SamplerConfig { beta: 0.5, ..cfg(2) };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                for e in draw(&set, &c, &mut rng).selected {
                    prop_assert!(mask[e.class_id]);
                }
            }
        }
    }
}
