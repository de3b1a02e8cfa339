//! Small analytically known states used for demonstrations and tests.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;

use crate::feature_map::Image;
use crate::mps::{Mps, QubitState};

/// `(|01> + |10>)/sqrt(2)  (x)  (|01>/2 + sqrt(3)|10>/2)`.
///
/// As a Born machine it generates `0101`, `0110`, `1001`, `1010` with
/// probabilities 1/8, 3/8, 1/8, 3/8.
pub fn four_qubit_example() -> Mps {
    let pair = |a: f64, b: f64| {
        [
            [
                DMatrix::from_row_slice(1, 2, &[a, 0.0]),
                DMatrix::from_row_slice(1, 2, &[0.0, b]),
            ],
            [
                DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
                DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            ],
        ]
    };
    let [s0, s1] = pair(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
    let [s2, s3] = pair(0.5, 3f64.sqrt() / 2.0);
    Mps::from_tensors(vec![s0, s1, s2, s3], 2).expect("shapes are consistent")
}

/// The 8-image multiset whose empirical distribution matches
/// [`four_qubit_example`].
pub fn four_qubit_dataset() -> Vec<Image> {
    let pattern: [([f64; 4], usize); 4] = [
        ([0.0, 1.0, 0.0, 1.0], 1),
        ([0.0, 1.0, 1.0, 0.0], 3),
        ([1.0, 0.0, 0.0, 1.0], 1),
        ([1.0, 0.0, 1.0, 0.0], 3),
    ];
    pattern
        .iter()
        .flat_map(|(px, count)| std::iter::repeat_n(*px, *count))
        .map(|px| Image::from_row(px.to_vec()).expect("binary pixels"))
        .collect()
}

/// Equal superposition of all `2^n` basis states.
pub fn uniform_superposition(n: usize) -> Mps {
    let plus = QubitState::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2).expect("normalized");
    Mps::product_state(&vec![plus; n])
}
