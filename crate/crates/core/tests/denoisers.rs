use ampkit::denoise::{gb_complex, gb_real, oracle, section_denoise};
use ampkit::{Complex64, Denoiser, GaussBernoulliPrior, SectionPrior};

fn priors() -> Vec<GaussBernoulliPrior> {
    vec![
        GaussBernoulliPrior::new(0.1, 0.0, 1.0),
        GaussBernoulliPrior::new(0.3, 0.5, 2.0),
        GaussBernoulliPrior::new(1.0, -0.2, 0.7),
    ]
}

#[test]
fn real_denoiser_matches_posterior_integration() {
    let sigmas = [1e-3, 1e-2, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0];
    let rs = [-3.0, -1.2, -0.5, -0.1, 0.0, 0.05, 0.3, 0.8, 1.5, 4.0];
    for prior in priors() {
        for &s2 in &sigmas {
            for &r in &rs {
                let got = gb_real(s2, r, &prior).unwrap();
                let want = oracle::posterior_real(&prior, s2, r).unwrap();
                assert!((got.a - want.a).abs() < 1e-8, "a at {s2} {r}: {} vs {}", got.a, want.a);
                assert!((got.v - want.v).abs() < 1e-8, "v at {s2} {r}: {} vs {}", got.v, want.v);
            }
        }
    }
}

#[test]
fn complex_denoiser_matches_posterior_integration() {
    let prior = GaussBernoulliPrior::new(0.1, 0.0, 1.0);
    for &s2 in &[0.05, 0.25, 1.0] {
        for &r in &[
            Complex64::new(0.8, 0.3),
            Complex64::new(-0.2, 0.1),
            Complex64::new(0.0, -1.5),
            Complex64::new(2.0, 2.0),
        ] {
            let got = gb_complex(s2, r, &prior).unwrap();
            let want = oracle::posterior_complex(&prior, s2, r).unwrap();
            assert!((got.a - want.a).norm() < 1e-6);
            assert!((got.v - want.v).abs() < 1e-6);
        }
    }
}

#[test]
fn section_denoiser_matches_enumeration() {
    for b in [1, 2, 3, 4, 5, 8] {
        for k in 0..6 {
            let s2: Vec<f64> = (0..b).map(|i| 0.05 + 0.3 * ((i + k) % 4) as f64).collect();
            let r: Vec<f64> = (0..b).map(|i| ((i * 7 + k * 3) % 11) as f64 / 10.0 - 0.3).collect();
            let (a, v) = section_denoise(&s2, &r).unwrap();
            let (oa, ov) = oracle::posterior_section(&s2, &r).unwrap();
            for i in 0..b {
                assert!((a[i] - oa[i]).abs() < 1e-10);
                assert!((v[i] - ov[i]).abs() < 1e-10);
            }
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn section_denoiser_tends_to_one_hot() {
    let (a, _) = section_denoise(&[1e-6; 4], &[0.9, 0.1, 0.2, 0.3]).unwrap();
    assert_eq!(a, vec![1.0, 0.0, 0.0, 0.0]);
    let (a, v) = section_denoise(&[0.3, 0.3], &[0.4, 0.4]).unwrap();
    assert_eq!(a, vec![0.5, 0.5]);
    assert_eq!(v, vec![0.25, 0.25]);
}

#[test]
fn vector_denoisers_apply_componentwise() {
    let prior = GaussBernoulliPrior::new(0.2, 0.0, 1.0);
    let s2 = vec![0.1, 0.5, 2.0];
    let r = vec![0.4, -1.0, 3.0];
    let (mut a, mut v) = (vec![0.0; 3], vec![0.0; 3]);
    <GaussBernoulliPrior as Denoiser<f64>>::apply(&prior, &s2, &r, &mut a, &mut v).unwrap();
    for i in 0..3 {
        let d = gb_real(s2[i], r[i], &prior).unwrap();
        assert_eq!((a[i], v[i]), (d.a, d.v));
    }

    let sections = SectionPrior {
        sections: 2,
        section_size: 3,
    };
    let s2 = vec![0.2; 6];
    let r = vec![0.1, 0.9, 0.0, 0.5, 0.5, 0.5];
    let (mut a, mut v) = (vec![0.0; 6], vec![0.0; 6]);
    sections.apply(&s2, &r, &mut a, &mut v).unwrap();
    let (a0, _) = section_denoise(&s2[..3], &r[..3]).unwrap();
    assert_eq!(&a[..3], a0.as_slice());
    for x in &a[3..] {
        assert!((x - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn nonpositive_variance_is_a_domain_error() {
    let prior = priors()[0];
    assert!(gb_real(0.0, 1.0, &prior).is_err());
    assert!(gb_real(-1.0, 1.0, &prior).is_err());
    assert!(gb_complex(f64::NAN, Complex64::new(1.0, 0.0), &prior).is_err());
    assert!(section_denoise(&[1.0, 0.0], &[0.0, 0.0]).is_err());
}
