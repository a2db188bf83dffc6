//! Central-difference verification of tape gradients.

use rand::seq::index;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_chacha::ChaCha8Rng;

use super::{Tape, Tensor, Var};
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-5;

/// `|a - b| / max(1e-8, |a| + |b|)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Which coordinates of each input are perturbed.
#[derive(Debug, Clone, Copy)]
pub enum Coordinates {
    All,
    /// Up to this many coordinates per input, drawn without replacement.
    Sample { per_input: usize, seed: u64 },
}

/// Step shrink attempts when a difference straddles a ReLU kink.
const KINK_RETRIES: usize = 4;

fn evaluate<F>(f: &F, inputs: &[Tensor]) -> Result<(f64, Tape, Vec<Var>, Var)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let v = tape.value(out).item();
    Ok((v, tape, vars, out))
}

/// Central difference of `f` along `perturb(work, ±h)`. The step is cut by 10
/// while either side lands on a different ReLU piece than the base point.
fn central<F, P>(f: &F, base: &[bool], work: &mut [Tensor], h: f64, perturb: P) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    P: Fn(&mut [Tensor], f64),
{
    let mut step = h;
    let mut attempt = 0;
    loop {
        perturb(work, step);
        let (plus, tp, ..) = evaluate(f, work)?;
        perturb(work, -step);
        let (minus, tm, ..) = evaluate(f, work)?;
        perturb(work, 0.0);
        let smooth = tp.relu_pattern() == base && tm.relu_pattern() == base;
        if smooth || attempt == KINK_RETRIES {
            return Ok((plus - minus) / (2.0 * step));
        }
        step /= 10.0;
        attempt += 1;
    }
}

/// Maximum relative error between backward and central-difference gradients
/// of the scalar built by `f` from `inputs`.
pub fn grad_check<F>(f: F, inputs: &[Tensor], h: f64, coords: Coordinates) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let (_, tape, vars, loss) = evaluate(&f, inputs)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| grads.wrt(v)).collect();
    let base = tape.relu_pattern();
    drop(tape);

    let mut rng = match coords {
        Coordinates::Sample { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Coordinates::All => None,
    };
    let mut worst = 0.0f64;
    let mut work = inputs.to_vec();
    for i in 0..inputs.len() {
        let n = inputs[i].len();
        let picked: Vec<usize> = match (coords, rng.as_mut()) {
            (Coordinates::Sample { per_input, .. }, Some(rng)) if per_input < n => {
                let mut v = index::sample(rng, n, per_input).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        for j in picked {
            let orig = inputs[i].data()[j];
            let numeric = central(&f, &base, &mut work, h, |w, s| w[i].data_mut()[j] = orig + s)?;
            worst = worst.max(relative_error(analytic[i].data()[j], numeric));
        }
    }
    Ok(worst)
}

/// Like [`grad_check`], but perturbs each input along `per_input` random
/// Gaussian directions and compares directional derivatives.
pub fn grad_check_directional<F>(f: F, inputs: &[Tensor], h: f64, per_input: usize, seed: u64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let (_, tape, vars, loss) = evaluate(&f, inputs)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| grads.wrt(v)).collect();
    let base = tape.relu_pattern();
    drop(tape);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut work = inputs.to_vec();
    for i in 0..inputs.len() {
        for _ in 0..per_input {
            let dir: Vec<f64> = (0..inputs[i].len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let along: f64 = analytic[i].data().iter().zip(&dir).map(|(g, d)| g * d).sum();
            let numeric = central(&f, &base, &mut work, h, |w, s| {
                for ((w, o), d) in w[i].data_mut().iter_mut().zip(inputs[i].data()).zip(&dir) {
                    *w = o + s * d;
                }
            })?;
            worst = worst.max(relative_error(along, numeric));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn linear_function_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = random(&[3, 4], &mut rng);
        let x = random(&[4, 1], &mut rng);
        let err = grad_check(
            |t, v| {
                let y = t.matmul(v[0], v[1])?;
                let s = t.sum(y)?;
                t.scale(s, 0.5)
            },
            &[w, x],
            DEFAULT_STEP,
            Coordinates::All,
        )
        .unwrap();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn three_layer_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let inputs = vec![
            random(&[5, 4], &mut rng),
            random(&[4, 6], &mut rng),
            random(&[6], &mut rng),
            random(&[6, 6], &mut rng),
            random(&[6, 3], &mut rng),
        ];
        let err = grad_check(
            |t, v| {
                let h = t.matmul(v[0], v[1])?;
                let h = t.add_row(h, v[2])?;
                let h = t.sigmoid(h)?;
                let h = t.matmul(h, v[3])?;
                let h = t.relu(h)?;
                let y = t.matmul(h, v[4])?;
                t.cross_entropy(y, &[0, 2, 1, 1, 0])
            },
            &inputs,
            DEFAULT_STEP,
            Coordinates::All,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn directional_check_sees_a_wrong_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&[4, 3], &mut rng);
        let ok = grad_check_directional(|t, v| {
            let y = t.sigmoid(v[0])?;
            t.sum(y)
        }, std::slice::from_ref(&x), DEFAULT_STEP, 4, 1).unwrap();
        assert!(ok < 1e-8, "{ok}");
        // x times a detached copy of x: the tape sees x, the function is x²
        let bad = grad_check_directional(|t, v| {
            let c = t.constant(t.value(v[0]).clone());
            let y = t.mul(v[0], c)?;
            t.sum(y)
        }, &[x], DEFAULT_STEP, 4, 1).unwrap();
        assert!(bad > 0.1, "{bad}");
    }
}
