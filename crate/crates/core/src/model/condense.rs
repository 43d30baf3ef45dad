//! Affine trajectory maps for `x⁺ = A x + B u` over a finite window.

use nalgebra::DMatrix;

/// Linear maps from the decision vector `z = [x₀; v₀; …; v_{T−1}]` to the
/// states `x₀ … x_T` and inputs `u₀ … u_{T−1}`.
///
/// With a prestabilizing gain `Kp` the inputs are `u_i = Kp x_i + v_i`, so
/// the states follow `x⁺ = (A + B Kp) x + B v`. This is a bijective change
/// of variables; it only keeps the maps well scaled when `A` is unstable.
#[derive(Debug, Clone)]
pub struct TrajectoryMaps {
    pub states: Vec<DMatrix<f64>>,
    pub inputs: Vec<DMatrix<f64>>,
    pub n: usize,
    pub m: usize,
}

impl TrajectoryMaps {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, kp: Option<&DMatrix<f64>>, steps: usize) -> Self {
        let n = a.nrows();
        let m = b.ncols();
        let nz = n + steps * m;
        let acl = match kp {
            Some(k) => a + b * k,
            None => a.clone(),
        };
        let mut states = Vec::with_capacity(steps + 1);
        let mut inputs = Vec::with_capacity(steps);
        let mut x = DMatrix::zeros(n, nz);
        x.view_mut((0, 0), (n, n)).fill_with_identity();
        for i in 0..steps {
            let mut u = match kp {
                Some(k) => k * &x,
                None => DMatrix::zeros(m, nz),
            };
            for j in 0..m {
                u[(j, n + i * m + j)] += 1.0;
            }
            let mut next = &acl * &x;
            {
                let mut blk = next.view_mut((0, n + i * m), (n, m));
                blk += b;
            }
            states.push(x);
            inputs.push(u);
            x = next;
        }
        states.push(x);
        Self { states, inputs, n, m }
    }

    pub fn dim(&self) -> usize {
        self.n + self.inputs.len() * self.m
    }

    pub fn steps(&self) -> usize {
        self.inputs.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn maps_reproduce_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));
        let k = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-0.5..0.5));
        for kp in [None, Some(&k)] {
            let maps = TrajectoryMaps::new(&a, &b, kp, 5);
            let z = DVector::from_fn(maps.dim(), |_, _| rng.gen_range(-1.0..1.0));
            let mut x = z.rows(0, 3).into_owned();
            for i in 0..5 {
                assert!((&maps.states[i] * &z - &x).amax() < 1e-12);
                let u = &maps.inputs[i] * &z;
                if kp.is_none() {
                    assert!((&u - z.rows(3 + 2 * i, 2)).amax() < 1e-15);
                }
                x = &a * &x + &b * u;
            }
            assert!((&maps.states[5] * &z - &x).amax() < 1e-12);
        }
    }
}
