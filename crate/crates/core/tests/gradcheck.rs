use kspace_core::model::{init_params, loss_and_grads, Architecture, ModelParams};
use kspace_core::numerics::{seeded_rng, Tensor};
use kspace_core::InputMode;

const H: f64 = 1e-5;

fn toy() -> Architecture {
    Architecture {
        widths: [4, 8, 8],
        hidden: 16,
    }
}

fn coordinate(params: &mut ModelParams, t: usize, i: usize) -> &mut f64 {
    &mut params.tensors_mut().into_iter().nth(t).unwrap().data_mut()[i]
}

fn check(mode: InputMode, seed: u64) {
    let params = init_params(mode, toy(), 16, seed).unwrap();
    let mut rng = seeded_rng(seed + 100);
    let c = mode.channels();
    let batch = Tensor::from_fn(&[4, c, 16, 16], |_| rng.normal());
    let labels = [0, 1, 2, 3];
    let (_, grads) = loss_and_grads(&params, &batch, &labels).unwrap();

    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let mut flat = rng.below(total);
        let mut t = 0;
        while flat >= sizes[t] {
            flat -= sizes[t];
            t += 1;
        }
        let mut plus = params.clone();
        *coordinate(&mut plus, t, flat) += H;
        let mut minus = params.clone();
        *coordinate(&mut minus, t, flat) -= H;
        let (lp, _) = loss_and_grads(&plus, &batch, &labels).unwrap();
        let (lm, _) = loss_and_grads(&minus, &batch, &labels).unwrap();
        let numeric = (lp - lm) / (2.0 * H);
        let analytic = grads.tensors()[t].data()[flat];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        assert!(
            rel < 1e-4,
            "{} [{flat}]: analytic {analytic:e} numeric {numeric:e}",
            ModelParams::tensor_names()[t]
        );
        worst = worst.max(rel);
    }
    println!("{mode} seed {seed}: worst relative error {worst:e}");
}

#[test]
fn control_gradients_match_central_differences() {
    for seed in 1..=3 {
        check(InputMode::Control, seed);
    }
}

#[test]
fn experimental_gradients_match_central_differences() {
    for seed in 1..=3 {
        check(InputMode::Experimental, seed);
    }
}
