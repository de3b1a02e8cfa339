use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::feature_map::{image_to_product, Image};
use crate::known_states::four_qubit_example;
use crate::oracle::to_statevector;

fn basis(bits: &[u8]) -> Vec<QubitState> {
    bits.iter().map(|&b| QubitState::basis(b)).collect()
}

fn random_mps(seed: u64, n: usize, chi: usize) -> Mps {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mps::random(n, chi, -1.0, 1.0, &mut rng).unwrap()
}

fn assert_left_isometry(t: &SiteTensor) {
    let g = t[0].tr_mul(&t[0]) + t[1].tr_mul(&t[1]);
    let id = DMatrix::<f64>::identity(g.nrows(), g.ncols());
    assert!((g - id).amax() < 1e-10);
}

fn assert_right_isometry(t: &SiteTensor) {
    let g = &t[0] * t[0].transpose() + &t[1] * t[1].transpose();
    let id = DMatrix::<f64>::identity(g.nrows(), g.ncols());
    assert!((g - id).amax() < 1e-10);
}

#[test]
fn structural_errors() {
    let bad = vec![
        [DMatrix::zeros(1, 2), DMatrix::zeros(1, 2)],
        [DMatrix::zeros(3, 1), DMatrix::zeros(3, 1)],
    ];
    assert!(matches!(
        Mps::from_tensors(bad, 4),
        Err(TncsError::Structural(_))
    ));
    let open_end = vec![[DMatrix::zeros(1, 2), DMatrix::zeros(1, 2)]];
    assert!(Mps::from_tensors(open_end, 4).is_err());
}

#[test]
fn canonical_form_isometries() {
    let mut mps = random_mps(1, 7, 4);
    mps.canonicalize(3).unwrap();
    assert_eq!(mps.center(), Some(3));
    for n in 0..3 {
        assert_left_isometry(mps.site(n));
    }
    for n in 4..7 {
        assert_right_isometry(mps.site(n));
    }
    assert_abs_diff_eq!(mps.norm_squared(), 1.0, epsilon = 1e-10);
    assert!(mps.max_bond() <= 4);
}

#[test]
fn canonicalize_product_state_keeps_tensors() {
    let img = Image::from_row(vec![0.1, 0.7, 0.0, 1.0, 0.3]).unwrap();
    let mps = Mps::product_state(&image_to_product(&img).unwrap());
    for k in 0..5 {
        let c = mps.canonicalized(k).unwrap();
        for n in 0..5 {
            for s in 0..2 {
                assert_abs_diff_eq!(
                    c.site(n)[s][(0, 0)],
                    mps.site(n)[s][(0, 0)],
                    epsilon = 1e-15
                );
            }
        }
    }
}

#[test]
fn canonicalize_preserves_state() {
    let mps = random_mps(2, 6, 3);
    let before = to_statevector(&mps).unwrap();
    let after = to_statevector(&mps.canonicalized(2).unwrap()).unwrap();
    let overlap: f64 = before
        .amplitudes()
        .iter()
        .zip(after.amplitudes())
        .map(|(a, b)| a * b)
        .sum();
    assert_abs_diff_eq!(overlap.abs(), 1.0, epsilon = 1e-10);
}

#[test]
fn canonicalize_is_idempotent() {
    let once = random_mps(3, 6, 3).canonicalized(2).unwrap();
    let mut fresh = once.clone();
    fresh.center = None;
    let twice = fresh.canonicalized(2).unwrap();
    for n in 0..6 {
        for s in 0..2 {
            assert!((&once.site(n)[s] - &twice.site(n)[s]).amax() < 1e-12);
        }
    }
}

#[test]
fn moving_the_center_matches_a_fresh_canonicalization() {
    let mut moved = random_mps(4, 8, 4);
    moved.canonicalize(1).unwrap();
    moved.canonicalize(6).unwrap();
    moved.canonicalize(3).unwrap();
    let fresh = random_mps(4, 8, 4).canonicalized(3).unwrap();
    let a = to_statevector(&moved).unwrap();
    let b = to_statevector(&fresh).unwrap();
    for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-10);
    }
}

#[test]
fn amplitude_examples() {
    let img = Image::from_row(vec![0.2, 0.9, 0.4]).unwrap();
    let phi = image_to_product(&img).unwrap();
    let mps = Mps::product_state(&phi);
    assert_abs_diff_eq!(mps.amplitude(&phi).unwrap(), 1.0, epsilon = 1e-14);

    let c = four_qubit_example();
    assert_abs_diff_eq!(
        c.amplitude(&basis(&[0, 1, 1, 0])).unwrap(),
        6f64.sqrt() / 4.0,
        epsilon = 1e-15
    );
    assert_eq!(c.amplitude(&basis(&[0, 0, 0, 0])).unwrap(), 0.0);
    assert!(matches!(
        c.amplitude(&basis(&[0, 1])),
        Err(TncsError::Argument(_))
    ));
}

#[test]
fn log_amplitude_survives_long_chains() {
    let h = QubitState::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
    let mps = Mps::product_state(&vec![h; 3000]);
    let (sign, log) = mps.log_amplitude(&vec![QubitState::ZERO; 3000]).unwrap();
    assert_eq!(sign, 1.0);
    assert_abs_diff_eq!(log, -1500.0 * LN_2, epsilon = 1e-8);
}

#[test]
fn rdm_examples() {
    let c = four_qubit_example();
    for n in [0, 1] {
        let rho = c.rdm1(n).unwrap();
        assert_abs_diff_eq!(rho.get(0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.get(1, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.get(0, 1), 0.0, epsilon = 1e-15);
    }
    let rho = c.rdm1(2).unwrap();
    assert_abs_diff_eq!(rho.get(0, 0), 0.25, epsilon = 1e-15);
    assert_abs_diff_eq!(rho.get(1, 1), 0.75, epsilon = 1e-15);
    assert_abs_diff_eq!(rho.get(0, 1), 0.0, epsilon = 1e-15);

    let s = QubitState::normalized(0.3, 0.8).unwrap();
    let prod = Mps::product_state(&[QubitState::ONE, s, QubitState::ZERO]);
    let rho = prod.rdm1(1).unwrap();
    assert_abs_diff_eq!(rho.get(0, 0), s.a() * s.a(), epsilon = 1e-14);
    assert_abs_diff_eq!(rho.get(0, 1), s.a() * s.b(), epsilon = 1e-14);
    assert_abs_diff_eq!(rho.get(1, 1), s.b() * s.b(), epsilon = 1e-14);
}

#[test]
fn rdm_all_matches_single_site() {
    let mps = random_mps(5, 9, 4);
    let all = mps.rdm1_all().unwrap();
    let canonical = mps.canonicalized(4).unwrap();
    let all_canonical = canonical.rdm1_all().unwrap();
    for ((n, a), (_, b)) in all.iter().zip(&all_canonical) {
        let single = mps.rdm1(*n).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(a.get(i, j), single.get(i, j), epsilon = 1e-10);
                assert_abs_diff_eq!(b.get(i, j), single.get(i, j), epsilon = 1e-10);
            }
        }
        assert_abs_diff_eq!(a.probability(0) + a.probability(1), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn inactive_site_is_rejected() {
    let c = four_qubit_example();
    let (p, _) = c.project_site(0, QubitState::ZERO).unwrap();
    assert!(matches!(p.rdm1(0), Err(TncsError::Argument(_))));
    assert!(p.rdm1(9).is_err());
}

#[test]
fn see_examples() {
    let c = four_qubit_example();
    let see: Vec<f64> = (0..4).map(|n| c.see(n).unwrap()).collect();
    assert_abs_diff_eq!(see[0], LN_2, epsilon = 1e-12);
    assert_abs_diff_eq!(see[1], LN_2, epsilon = 1e-12);
    assert_abs_diff_eq!(see[2], 0.5623351446188083, epsilon = 1e-12);
    assert_abs_diff_eq!(see[3], 0.5623351446188083, epsilon = 1e-12);

    let prod = Mps::product_state(&[QubitState::normalized(0.4, 0.2).unwrap(); 5]);
    for (_, s) in prod.see_all().unwrap() {
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
    }
}

#[test]
fn project_first_qubit_of_example() {
    let c = four_qubit_example();
    let (phi, norm) = c.project_site(0, QubitState::ZERO).unwrap();
    assert_abs_diff_eq!(norm, FRAC_1_SQRT_2, epsilon = 1e-14);
    assert_eq!(phi.active_sites(), vec![1, 2, 3]);
    let sv = to_statevector(&phi).unwrap();
    // |1> (x) (|01>/2 + sqrt(3)|10>/2)
    let mut expected = vec![0.0; 8];
    expected[0b101] = 0.5;
    expected[0b110] = 3f64.sqrt() / 2.0;
    for (x, y) in sv.amplitudes().iter().zip(&expected) {
        assert_abs_diff_eq!(x.abs(), y, epsilon = 1e-12);
    }

    let (phi2, _) = phi.project_site(2, QubitState::ZERO).unwrap();
    let sv = to_statevector(&phi2).unwrap();
    assert_eq!(sv.sites(), &[1, 3]);
    let amps: Vec<f64> = sv.amplitudes().iter().map(|a| a.abs()).collect();
    assert_abs_diff_eq!(amps[0b11], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(amps[0b00] + amps[0b01] + amps[0b10], 0.0, epsilon = 1e-12);
}

#[test]
fn project_ghz() {
    let ghz = Mps::ghz(4).unwrap();
    let (phi, c) = ghz.project_site(0, QubitState::ZERO).unwrap();
    assert_abs_diff_eq!(c * c, 0.5, epsilon = 1e-12);
    let sv = to_statevector(&phi).unwrap();
    assert_abs_diff_eq!(sv.amplitudes()[0].abs(), 1.0, epsilon = 1e-12);
}

#[test]
fn zero_probability_projection() {
    let c = four_qubit_example();
    let (phi, _) = c.project_site(0, QubitState::ZERO).unwrap();
    // site 1 is now |1> with certainty
    assert!(matches!(
        phi.project_site(1, QubitState::ZERO),
        Err(TncsError::ZeroProbability { site: 1 })
    ));
}

#[test]
fn eigenbasis_projections_sum_to_one() {
    let mps = random_mps(6, 6, 3);
    for n in 0..6 {
        let rho = mps.rdm1(n).unwrap();
        let v = rho.dominant_eigenstate();
        let w = QubitState::new(-v.b(), v.a()).unwrap();
        let c0 = mps.project_site(n, v).unwrap().1;
        let c1 = mps.project_site(n, w).map(|r| r.1).unwrap_or(0.0);
        assert_abs_diff_eq!(c0 * c0 + c1 * c1, 1.0, epsilon = 1e-10);
    }
}

#[test]
fn projecting_every_site_empties_the_chain() {
    let mut mps = random_mps(7, 4, 2);
    for n in [2, 0, 3, 1] {
        let c = mps.project_site_in_place(n, QubitState::normalized(0.6, 0.8).unwrap());
        assert!(c.unwrap() > 0.0);
    }
    assert_eq!(mps.num_active(), 0);
    assert_eq!(mps.amplitude(&[]).unwrap().abs(), 1.0);
}

#[test]
fn binary_round_trip_is_bit_exact() {
    let mps = random_mps(8, 10, 4);
    let back = Mps::from_bytes(&mps.to_bytes()).unwrap();
    for n in 0..10 {
        for s in 0..2 {
            let (a, b) = (&mps.site(n)[s], &back.site(n)[s]);
            assert_eq!(a.shape(), b.shape());
            assert!(a
                .iter()
                .zip(b.iter())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    let (measured, _) = four_qubit_example()
        .project_site(1, QubitState::ONE)
        .unwrap();
    let back = Mps::from_bytes(&measured.to_bytes()).unwrap();
    assert_eq!(back.active_mask(), measured.active_mask());
}

#[test]
fn loading_recovers_the_center() {
    let raw = random_mps(8, 10, 4);
    assert_eq!(Mps::from_bytes(&raw.to_bytes()).unwrap().center(), None);
    for k in [0, 4, 9] {
        let canon = raw.canonicalized(k).unwrap();
        let back = Mps::from_bytes(&canon.to_bytes()).unwrap();
        assert_eq!(back.center(), Some(k));
        // identical state, so identical downstream arithmetic
        assert_eq!(back, canon);
    }
}

#[test]
fn binary_header_layout() {
    let bytes = Mps::ghz(3).unwrap().to_bytes();
    assert_eq!(&bytes[0..4], b"TNCS");
    assert_eq!(
        u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
        FORMAT_VERSION
    );
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
    let dims: Vec<u32> = bytes[16..40]
        .chunks(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    assert_eq!(dims, vec![1, 2, 2, 2, 2, 1]);
    // first payload value: site 0, s = 0, (0, 0)
    let first = f64::from_le_bytes(bytes[40..48].try_into().unwrap());
    assert_abs_diff_eq!(first, FRAC_1_SQRT_2, epsilon = 0.0);
    assert_eq!(bytes.len(), 40 + 8 * (4 + 8 + 4));
}

#[test]
fn binary_rejects_bad_input() {
    let mut bytes = Mps::ghz(3).unwrap().to_bytes();
    let truncated = &bytes[..bytes.len() - 3];
    assert!(matches!(Mps::from_bytes(truncated), Err(TncsError::Io(_))));
    bytes[4] = 9;
    assert!(matches!(Mps::from_bytes(&bytes), Err(TncsError::Format(_))));
    bytes[0] = b'X';
    assert!(matches!(Mps::from_bytes(&bytes), Err(TncsError::Format(_))));
}
