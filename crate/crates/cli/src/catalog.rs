//! Built-in catalog of integrands, forcings, initial profiles, test
//! functions and deterministic driver rates. Configurations reference
//! these by name so every scenario input is auditable.

use smcalc_core::TestFunction;

pub type Scalar2 = fn(&[f64], f64) -> f64;
pub type Scalar1 = fn(&[f64]) -> f64;
pub type Rate = fn(f64) -> f64;

pub const FORCINGS: &[(&str, Scalar2)] = &[
    ("zero", |_, _| 0.0),
    ("unit", |_, _| 1.0),
    ("gauss_x", |x, _| (-x[0] * x[0]).exp()),
    ("gauss_x_linear_s", |x, s| (-x[0] * x[0]).exp() * (1.0 + s)),
    ("gauss_x_decay_s", |x, s| (-x[0] * x[0] * (1.0 + s)).exp()),
];

pub const INITIALS: &[(&str, Scalar1)] = &[
    ("zero", |_| 0.0),
    ("gauss", |x| (-x[0] * x[0]).exp()),
    ("gauss_half", |x| (-x[0] * x[0] / 2.0).exp()),
];

pub const RATES: &[(&str, Rate)] = &[("unit", |_| 1.0), ("linear", |t| t)];

pub fn forcing(name: &str) -> Option<Scalar2> {
    FORCINGS.iter().find(|(n, _)| *n == name).map(|(_, f)| *f)
}

pub fn initial(name: &str) -> Option<Scalar1> {
    INITIALS.iter().find(|(n, _)| *n == name).map(|(_, f)| *f)
}

pub fn rate(name: &str) -> Option<Rate> {
    RATES.iter().find(|(n, _)| *n == name).map(|(_, f)| *f)
}

pub const TEST_FUNCTIONS: &[&str] = &["gauss", "gauss_wide", "poly_gauss"];

pub fn test_function(name: &str, dim: usize) -> Option<TestFunction> {
    let center = vec![0.0; dim];
    match name {
        "gauss" => TestFunction::gaussian(center, 1.0).ok(),
        "gauss_wide" => TestFunction::gaussian(center, 0.5).ok(),
        "poly_gauss" => {
            let mut quad = vec![0.0; dim * dim];
            for i in 0..dim {
                quad[i * dim + i] = 0.25;
            }
            TestFunction::new(center, 1.0, 1.0, vec![0.0; dim], quad).ok()
        }
        _ => None,
    }
}

pub fn names<T>(table: &[(&'static str, T)]) -> Vec<&'static str> {
    table.iter().map(|(n, _)| *n).collect()
}
