use super::GanLoss;
use crate::nn::{Graph, Var};

/// Graph nodes of one generator objective evaluation. Weighted terms are
/// paired with their unweighted values.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorObjective {
    pub total: Var,
    pub adversarial: Option<Var>,
    pub censored: Option<(Var, Var)>,
    pub distortion: Option<(Var, Var)>,
}

/// `(discriminator loss, generator loss)` from discriminator logits on real
/// and generated pairs.
///
/// The log form is the cross-entropy `-mean log D(real) - mean log(1 - D(fake))`
/// for the discriminator and `-mean log D(fake)` for the generator, evaluated
/// from logits. The linear form drops the logarithms.
pub fn adversarial_losses(
    g: &mut Graph,
    real_logits: Var,
    fake_logits: Var,
    form: GanLoss,
) -> (Var, Var) {
    match form {
        GanLoss::Log => {
            let lr = g.log_sigmoid(real_logits);
            let neg_fake = g.neg(fake_logits);
            let lf = g.log_sigmoid(neg_fake);
            let mr = g.mean(lr);
            let mf = g.mean(lf);
            let sum = g.add(mr, mf);
            let disc = g.neg(sum);
            let lg = g.log_sigmoid(fake_logits);
            let mg = g.mean(lg);
            let gen = g.neg(mg);
            (disc, gen)
        }
        GanLoss::Linear => {
            let dr = g.sigmoid(real_logits);
            let df = g.sigmoid(fake_logits);
            let mr = g.mean(dr);
            let mf = g.mean(df);
            // -(E[D(real)] + E[1 - D(fake)])
            let diff = g.sub(mf, mr);
            let disc = g.add_scalar(diff, -1.0);
            let gen = g.neg(mf);
            (disc, gen)
        }
    }
}

/// Mean of `max(0, bound - generated)`.
pub fn censored_hinge(g: &mut Graph, bound: Var, generated: Var) -> Var {
    let gap = g.sub(bound, generated);
    let h = g.relu(gap);
    g.mean(h)
}

/// Mean absolute deviation.
pub fn distortion(g: &mut Graph, observed: Var, generated: Var) -> Var {
    let d = g.sub(observed, generated);
    let a = g.abs(d);
    g.mean(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn col(g: &mut Graph, v: &[f64]) -> Var {
        g.input(Tensor::column(v.to_vec()))
    }

    #[test]
    fn indifferent_discriminator_costs_log_four() {
        let mut g = Graph::new();
        let r = col(&mut g, &[0.0, 0.0, 0.0]);
        let f = col(&mut g, &[0.0, 0.0]);
        let (d, gen) = adversarial_losses(&mut g, r, f, GanLoss::Log);
        assert!((g.value(d).item() - 4f64.ln()).abs() < 1e-15);
        assert!((g.value(gen).item() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_discriminator_maximizes_generator_loss_and_gradient_raises_fake_score() {
        let mut store = crate::nn::ParamStore::new();
        let id = store.add("fake_logit", Tensor::column(vec![-30.0]), true);
        let mut g = Graph::new();
        let r = col(&mut g, &[30.0]);
        let f = g.param(&store, id);
        let (_, gen) = adversarial_losses(&mut g, r, f, GanLoss::Log);
        assert!(g.value(gen).item() > 29.0);
        let grads = g.backward(gen).unwrap();
        // descending the generator loss increases D(fake)
        assert!(grads.get(id).unwrap().item() < 0.0);
    }

    #[test]
    fn linear_form_values() {
        let mut g = Graph::new();
        let r = col(&mut g, &[0.0]);
        let f = col(&mut g, &[0.0]);
        let (d, gen) = adversarial_losses(&mut g, r, f, GanLoss::Linear);
        assert!((g.value(d).item() + 1.0).abs() < 1e-15);
        assert!((g.value(gen).item() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn hinge_examples() {
        let mut g = Graph::new();
        let b = col(&mut g, &[5.0]);
        let t = col(&mut g, &[7.0]);
        let h = censored_hinge(&mut g, b, t);
        assert_eq!(g.value(h).item(), 0.0);
        let t = col(&mut g, &[3.0]);
        let h = censored_hinge(&mut g, b, t);
        assert_eq!(g.value(h).item(), 2.0);
        let b = col(&mut g, &[5.0, 5.0, 2.0]);
        let t = col(&mut g, &[3.0, 7.0, 2.0]);
        let h = censored_hinge(&mut g, b, t);
        assert!((g.value(h).item() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn distortion_examples() {
        let mut g = Graph::new();
        let o = col(&mut g, &[1.0, 3.0, 10.0]);
        let d = distortion(&mut g, o, o);
        assert_eq!(g.value(d).item(), 0.0);
        let a = col(&mut g, &[4.0]);
        let b = col(&mut g, &[6.0]);
        let d = distortion(&mut g, a, b);
        assert_eq!(g.value(d).item(), 2.0);
        let gen = col(&mut g, &[2.0, 3.0, 6.0]);
        let d = distortion(&mut g, o, gen);
        assert!((g.value(d).item() - 5.0 / 3.0).abs() < 1e-15);
    }
}
