mod support {
    pub mod dd;
}

use ahfe_core::loss::{ahfe_batch, LossConfig, OneHotLabel, ProbabilityVector};
use support::dd::{ahfe_batch_dd, Dd, LN2};

/// Probability vectors whose entries are exact binary fractions summing to
/// exactly one, so neither renormalization nor clamping touches them.
fn grid(k: usize) -> Vec<Vec<f64>> {
    match k {
        2 => vec![
            vec![0.5, 0.5],
            vec![0.25, 0.75],
            vec![0.875, 0.125],
            vec![0.0625, 0.9375],
            vec![0.999755859375, 0.000244140625],
        ],
        3 => vec![
            vec![0.25, 0.25, 0.5],
            vec![0.125, 0.375, 0.5],
            vec![0.75, 0.0625, 0.1875],
            vec![0.0078125, 0.4921875, 0.5],
            vec![0.3125, 0.3125, 0.375],
        ],
        _ => unreachable!(),
    }
}

fn counts(k: usize) -> Vec<Vec<usize>> {
    match k {
        2 => vec![vec![100, 1], vec![10, 1000], vec![3, 3]],
        3 => vec![vec![100, 1, 7], vec![1, 1, 1], vec![0, 50, 5]],
        _ => unreachable!(),
    }
}

pub struct Instance {
    pub probs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub counts: Vec<usize>,
    pub gamma: f64,
    pub lambda: f64,
}

/// Every batch of up to four grid vectors (cyclic windows) with every label
/// assignment, for each count vector, γ and λ.
fn instances() -> Vec<Instance> {
    let mut out = Vec::new();
    for k in [2usize, 3] {
        let g = grid(k);
        for n in 1..=4usize {
            for start in 0..g.len() {
                let probs: Vec<Vec<f64>> = (0..n).map(|i| g[(start + i) % g.len()].clone()).collect();
                for pattern in 0..k.pow(n as u32) {
                    let labels: Vec<usize> = (0..n).map(|i| pattern / k.pow(i as u32) % k).collect();
                    for c in counts(k) {
                        for gamma in [0.0, 0.5, 1.0, 2.0, 5.0] {
                            for lambda in [-0.5, 0.0, 0.1, 1.0] {
                                out.push(Instance {
                                    probs: probs.clone(),
                                    labels: labels.clone(),
                                    counts: c.clone(),
                                    gamma,
                                    lambda,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[test]
fn batch_ahfe_matches_extended_precision_expansion() {
    let eps = 1e-8;
    let cases = instances();
    let mut worst = 0.0f64;
    for case in &cases {
        let config = LossConfig {
            gamma: case.gamma,
            lambda: case.lambda,
            epsilon: eps,
            ..LossConfig::default()
        };
        let p: Vec<ProbabilityVector> = case
            .probs
            .iter()
            .map(|v| ProbabilityVector::new(v.clone(), config.p_floor).unwrap())
            .collect();
        for (pv, raw) in p.iter().zip(&case.probs) {
            assert_eq!(pv.as_slice(), raw.as_slice(), "grid vector altered by construction");
        }
        let y: Vec<OneHotLabel> = case.labels.iter().map(|&t| OneHotLabel::new(t)).collect();
        let got = ahfe_batch(&p, &y, &case.counts, &config).unwrap().total;
        let want = ahfe_batch_dd(&case.probs, &case.labels, &case.counts, case.gamma, case.lambda, eps).to_f64();
        let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        assert!(
            rel <= 1e-10,
            "rel error {rel:e}: got {got}, want {want}, labels {:?}, counts {:?}, gamma {}, lambda {}",
            case.labels,
            case.counts,
            case.gamma,
            case.lambda
        );
    }
    eprintln!("{} instances, worst relative error {worst:e}", cases.len());
}

#[test]
fn oracle_agrees_with_independent_reference() {
    // p = (0.75, 0.25), label 1, counts (100, 1), γ = 2, λ = 0.1; value from
    // a 40-digit evaluation.
    let v = ahfe_batch_dd(&[vec![0.75, 0.25]], &[1], &[100, 1], 2.0, 0.1, 1e-8);
    assert!((v.to_f64() - 0.816_605_548_628_976_561_5).abs() < 1e-16);
}

#[test]
fn known_constants() {
    let e = Dd::ONE.exp();
    assert_eq!(e.hi, std::f64::consts::E);
    assert!((e.lo - 1.445646891729250158e-16).abs() < 1e-29);
    let l = Dd::from(2.0).ln();
    assert!((l - LN2).to_f64().abs() < 1e-29);
    let r = Dd::from(2.0).sqrt();
    assert!((r * r - Dd::from(2.0)).to_f64().abs() < 1e-31);
    let third = Dd::ONE / Dd::from(3.0);
    assert!((third.mul_f64(3.0) - Dd::ONE).to_f64().abs() < 1e-31);
}
