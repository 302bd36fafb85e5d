//! Reference models with the grids they are usually run on.

use crate::grid::GridSpec;
use crate::model::{Model, NonlinearitySpec, PeriodicProfile, PotentialSpec};

/// V ≡ 1, f = u³ on [0, 40) with 1024 points. The period is arbitrary for a
/// constant potential; 1.25 gives 32 grid cells per period.
pub fn kerr_soliton() -> (Model, GridSpec) {
    let period = 1.25;
    let model = Model::new(
        PotentialSpec::periodic(period, PeriodicProfile::constant(1.0)),
        NonlinearitySpec::power(4.0, 2.0, PeriodicProfile::constant(1.0)).expect("valid power law"),
    )
    .expect("valid model");
    (model, GridSpec::new(1, 40.0, 1024, period))
}

/// V = 1 + 0.5 cos(2πx), f = u³ on [0, 64) with 2048 points.
pub fn mathieu_kerr() -> (Model, GridSpec) {
    let model = Model::new(
        PotentialSpec::periodic(1.0, PeriodicProfile::Cosine { a: 1.0, b: 0.5 }),
        NonlinearitySpec::power(4.0, 2.0, PeriodicProfile::constant(1.0)).expect("valid power law"),
    )
    .expect("valid model");
    (model, GridSpec::new(1, 64.0, 2048, 1.0))
}

/// V ≡ 1, f = |u|⁶u with defocusing Γ|u|²u, Γ ≡ `gamma`.
pub fn dual_power(gamma: f64) -> (Model, GridSpec) {
    let period = 1.25;
    let model = Model::new(
        PotentialSpec::periodic(period, PeriodicProfile::constant(1.0)),
        NonlinearitySpec::dual_power(
            8.0,
            4.0,
            PeriodicProfile::constant(1.0),
            PeriodicProfile::constant(1.0),
            gamma,
        )
        .expect("valid dual power"),
    )
    .expect("valid model");
    (model, GridSpec::new(1, 40.0, 1024, period))
}

/// The three built-in models with their default grids.
pub fn builtin() -> Vec<(&'static str, Model, GridSpec)> {
    let (a, ga) = kerr_soliton();
    let (b, gb) = mathieu_kerr();
    let (c, gc) = dual_power(1.0);
    vec![("kerr_soliton", a, ga), ("mathieu_kerr", b, gb), ("dual_power", c, gc)]
}
