//! Tsitouras 5(4) coefficients, including the free 4th-order continuous
//! extension used for dense output.

pub(crate) const C: [f64; 7] = [0.0, 0.161, 0.327, 0.9, 0.980_025_540_904_509_7, 1.0, 1.0];

pub(crate) const A21: f64 = 0.161;

pub(crate) const A31: f64 = -0.008_480_655_492_356_989;
pub(crate) const A32: f64 = 0.335_480_655_492_357;

pub(crate) const A41: f64 = 2.897_153_057_105_493;
pub(crate) const A42: f64 = -6.359_448_489_975_075;
pub(crate) const A43: f64 = 4.362_295_432_869_581_5;

pub(crate) const A51: f64 = 5.325_864_828_439_257;
pub(crate) const A52: f64 = -11.748_883_564_062_828;
pub(crate) const A53: f64 = 7.495_539_342_889_836_5;
pub(crate) const A54: f64 = -0.092_495_066_361_755_25;

pub(crate) const A61: f64 = 5.861_455_442_946_42;
pub(crate) const A62: f64 = -12.920_969_317_847_11;
pub(crate) const A63: f64 = 8.159_367_898_576_159;
pub(crate) const A64: f64 = -0.071_584_973_281_401;
pub(crate) const A65: f64 = -0.028_269_050_394_068_383;

// Propagating weights; also the last stage row (FSAL).
pub(crate) const B: [f64; 6] = [
    0.096_460_766_818_065_23,
    0.01,
    0.479_889_650_414_499_6,
    1.379_008_574_103_742,
    -3.290_069_515_436_081,
    2.324_710_524_099_774,
];

// Difference between the 5th- and embedded 4th-order weights.
pub(crate) const BTILDE: [f64; 7] = [
    -0.001_780_011_052_225_777_14,
    -0.000_816_434_459_656_746_9,
    0.007_880_878_010_261_995,
    -0.144_711_007_173_262_9,
    0.582_357_165_452_555_2,
    -0.458_082_105_929_186_97,
    1.0 / 66.0,
];

// b_i(θ) = θ·(R[i][0] + θ·(R[i][1] + θ·(R[i][2] + θ·R[i][3])))
const R: [[f64; 4]; 7] = [
    [
        1.0,
        -2.763_706_197_274_826,
        2.913_255_461_821_912_6,
        -1.053_088_497_729_021_6,
    ],
    [0.0, 0.131_699_999_999_999_98, -0.2234, 0.1017],
    [
        0.0,
        3.930_296_236_894_751_6,
        -5.941_033_872_131_505,
        2.490_627_285_651_253,
    ],
    [
        0.0,
        -12.411_077_166_933_676,
        30.338_188_630_282_32,
        -16.548_102_889_244_902,
    ],
    [
        0.0,
        37.509_313_416_511_04,
        -88.178_904_894_766_4,
        47.379_521_962_819_28,
    ],
    [
        0.0,
        -27.896_526_289_197_286,
        65.091_894_674_793_66,
        -34.870_657_861_496_6,
    ],
    [0.0, 1.5, -4.0, 2.5],
];

pub(crate) fn dense_weights(theta: f64) -> [f64; 7] {
    let mut w = [0.0; 7];
    for (wi, r) in w.iter_mut().zip(R.iter()) {
        *wi = theta * (r[0] + theta * (r[1] + theta * (r[2] + theta * r[3])));
    }
    w
}
