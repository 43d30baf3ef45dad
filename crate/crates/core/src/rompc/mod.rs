//! The online scheme: reduced estimator, simulated ROM, control law,
//! reduced OCP with tightened constraints, and terminal ingredients.
//!
//! `x̂⁺ = A x̂ + B u + L(y − C x̂)`, `x̄⁺ = A x̄ + B ū`, `u = ū + K(x̂ − x̄)`.

mod ocp;
mod terminal;

pub use ocp::{ocp_solve, OcpFormulation, OcpSolution, OcpSpec, CONDENSED_LIMIT};
pub use terminal::{terminal_set_synthesis, TerminalSet, TERMINAL_ITERATION_CAP};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::model::{GainSet, ReducedOrderModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    #[serde(with = "crate::serde_util::vector")]
    pub x_hat: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub x_bar: DVector<f64>,
    pub k: usize,
    pub k0: usize,
}

impl ControllerState {
    pub fn new(x_hat: DVector<f64>, x_bar: DVector<f64>, k0: usize) -> Self {
        Self { x_hat, x_bar, k: 0, k0 }
    }

    pub fn started(&self) -> bool {
        self.k >= self.k0
    }
}

pub fn estimator_step(
    x_hat: &DVector<f64>,
    rom: &ReducedOrderModel,
    l: &nalgebra::DMatrix<f64>,
    u: &DVector<f64>,
    y: &DVector<f64>,
) -> DVector<f64> {
    &rom.a * x_hat + &rom.b * u + l * (y - &rom.c * x_hat)
}

pub fn control_law(
    x_hat: &DVector<f64>,
    x_bar: &DVector<f64>,
    u_bar: &DVector<f64>,
    k: &nalgebra::DMatrix<f64>,
) -> DVector<f64> {
    u_bar + k * (x_hat - x_bar)
}

/// Advances both states for an arbitrary applied input `u`, with
/// `ū = u − K(x̂ − x̄)` so that the control-law identity holds.
pub fn startup_step(
    state: &ControllerState,
    rom: &ReducedOrderModel,
    gains: &GainSet,
    u: &DVector<f64>,
    y: &DVector<f64>,
) -> ControllerState {
    let u_bar = u - &gains.k * (&state.x_hat - &state.x_bar);
    ControllerState {
        x_hat: estimator_step(&state.x_hat, rom, &gains.l, u, y),
        x_bar: &rom.a * &state.x_bar + &rom.b * u_bar,
        k: state.k + 1,
        k0: state.k0,
    }
}

/// Advances both states after `u = ū + K(x̂ − x̄)` was applied.
pub fn scheme_step(
    state: &ControllerState,
    rom: &ReducedOrderModel,
    gains: &GainSet,
    u_bar: &DVector<f64>,
    y: &DVector<f64>,
) -> ControllerState {
    let u = control_law(&state.x_hat, &state.x_bar, u_bar, &gains.k);
    ControllerState {
        x_hat: estimator_step(&state.x_hat, rom, &gains.l, &u, y),
        x_bar: &rom.a * &state.x_bar + &rom.b * u_bar,
        k: state.k + 1,
        k0: state.k0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_rom(rng: &mut ChaCha8Rng) -> (ReducedOrderModel, GainSet) {
        let mut g = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
        let rom = ReducedOrderModel {
            a: g(3, 3),
            b: g(3, 2),
            c: g(2, 3),
            h: g(1, 3),
            v: g(5, 3),
            w: g(5, 3),
        };
        let gains = GainSet { k: g(2, 3), l: g(3, 2) };
        (rom, gains)
    }

    fn rv(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn estimator_matches_entrywise_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (rom, gains) = rand_rom(&mut rng);
        let (xh, u, y) = (rv(&mut rng, 3), rv(&mut rng, 2), rv(&mut rng, 2));
        let got = estimator_step(&xh, &rom, &gains.l, &u, &y);
        for i in 0..3 {
            let mut e = 0.0;
            for j in 0..3 {
                e += rom.a[(i, j)] * xh[j];
            }
            for j in 0..2 {
                e += rom.b[(i, j)] * u[j];
                let innov = y[j] - (0..3).map(|t| rom.c[(j, t)] * xh[t]).sum::<f64>();
                e += gains.l[(i, j)] * innov;
            }
            assert!((got[i] - e).abs() < 1e-12);
        }
        let zero_l = DMatrix::zeros(3, 2);
        let pred = &rom.a * &xh + &rom.b * &u;
        assert!((estimator_step(&xh, &rom, &zero_l, &u, &y) - &pred).amax() < 1e-15);
        let y0 = &rom.c * &xh;
        assert!((estimator_step(&xh, &rom, &gains.l, &u, &y0) - &pred).amax() < 1e-12);
    }

    #[test]
    fn control_law_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, gains) = rand_rom(&mut rng);
        let (xh, xb, ub) = (rv(&mut rng, 3), rv(&mut rng, 3), rv(&mut rng, 2));
        assert_eq!(control_law(&xb, &xb, &ub, &gains.k), ub);
        assert_eq!(control_law(&xh, &xb, &ub, &DMatrix::zeros(2, 3)), ub);
        let got = control_law(&xh, &xb, &ub, &gains.k);
        for i in 0..2 {
            let e = ub[i] + (0..3).map(|j| gains.k[(i, j)] * (xh[j] - xb[j])).sum::<f64>();
            assert!((got[i] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn startup_keeps_the_control_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (rom, gains) = rand_rom(&mut rng);
        let mut st = ControllerState::new(rv(&mut rng, 3), rv(&mut rng, 3), 10);
        for _ in 0..5 {
            let (u, y) = (rv(&mut rng, 2), rv(&mut rng, 2));
            let next = startup_step(&st, &rom, &gains, &u, &y);
            // The same step seen as the scheme with ū = u − K(x̂ − x̄).
            let ub = &u - &gains.k * (&st.x_hat - &st.x_bar);
            let alt = scheme_step(&st, &rom, &gains, &ub, &y);
            assert!((&next.x_hat - &alt.x_hat).amax() < 1e-12);
            assert!((&next.x_bar - &alt.x_bar).amax() < 1e-12);
            st = next;
        }
        assert_eq!(st.k, 5);
        assert!(!st.started());
    }

    #[test]
    fn zero_inputs_keep_zero_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (rom, gains) = rand_rom(&mut rng);
        let mut st = ControllerState::new(DVector::zeros(3), DVector::zeros(3), 0);
        for _ in 0..10 {
            st = startup_step(&st, &rom, &gains, &DVector::zeros(2), &DVector::zeros(2));
        }
        assert!(st.x_hat.iter().chain(st.x_bar.iter()).all(|&v| v == 0.0));
    }
}
