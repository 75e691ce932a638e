//! Supervised, listwise and combined training objectives with analytic
//! gradients.

use super::model::{Aggregation, SequenceTrace};
use super::LmParameters;
use crate::error::{Error, Result};
use crate::ranking::listwise_nll;

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: LmParameters,
    /// Batch items left out because their answer was empty.
    pub skipped: usize,
}

/// Mean over the batch of the per-answer token-averaged negative
/// log-likelihood (EOS included as the last target).
pub fn sft_loss_and_grad(p: &LmParameters, batch: &[(Vec<u32>, Vec<u32>)]) -> Result<LossGrad> {
    let usable: Vec<&(Vec<u32>, Vec<u32>)> = batch.iter().filter(|(_, a)| !a.is_empty()).collect();
    let skipped = batch.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::domain("supervised batch has no usable items"));
    }
    let weight = 1.0 / usable.len() as f64;
    let mut grad = LmParameters::zeros(p.dims);
    let mut loss = 0.0;
    for (prompt, answer) in usable {
        let trace = SequenceTrace::run(p, prompt, answer, Aggregation::MeanLogProb)?;
        loss -= weight * trace.score.aggregate;
        trace.backward(p, -weight, &mut grad);
    }
    Ok(LossGrad { loss, grad, skipped })
}

/// Listwise ranking loss over answers given best-first, each scored by the
/// model's aggregated log-probability after `prompt`.
pub fn mpra_loss_and_grad(
    p: &LmParameters,
    prompt: &[u32],
    ranked: &[Vec<u32>],
    mode: Aggregation,
) -> Result<LossGrad> {
    if ranked.len() < 2 {
        return Err(Error::domain(format!(
            "listwise loss needs at least two answers, got {}",
            ranked.len()
        )));
    }
    let traces: Vec<SequenceTrace> = ranked
        .iter()
        .map(|a| SequenceTrace::run(p, prompt, a, mode))
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = traces.iter().map(|t| t.score.aggregate).collect();
    let (loss, dscores) = listwise_nll(&scores)?;
    let mut grad = LmParameters::zeros(p.dims);
    for (trace, ds) in traces.iter().zip(dscores) {
        trace.backward(p, ds, &mut grad);
    }
    Ok(LossGrad { loss, grad, skipped: 0 })
}

/// Listwise loss plus `alpha` times the supervised loss on the top answer.
pub fn combined_loss_and_grad(
    p: &LmParameters,
    prompt: &[u32],
    ranked: &[Vec<u32>],
    alpha: f64,
    mode: Aggregation,
) -> Result<LossGrad> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("alpha must be nonnegative, got {alpha}")));
    }
    let mut out = mpra_loss_and_grad(p, prompt, ranked, mode)?;
    if alpha > 0.0 {
        let sft = sft_loss_and_grad(p, &[(prompt.to_vec(), ranked[0].clone())])?;
        out.loss += alpha * sft.loss;
        out.grad.axpy(alpha, &sft.grad);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{sequence_score, LmDims, EOS};
    use crate::rng::substream;
    use crate::scoring::log_logistic;

    fn dims(v: usize) -> LmDims {
        LmDims {
            vocab_size: v,
            context: 3,
            embed_dim: 4,
            hidden: 6,
        }
    }

    fn sure_of_eos(v: usize) -> LmParameters {
        let mut p = LmParameters::zeros(dims(v));
        p.b2[EOS as usize] = 1000.0;
        p
    }

    #[test]
    fn perfect_model_has_zero_loss_and_gradient() {
        let p = sure_of_eos(6);
        let out = sft_loss_and_grad(&p, &[(vec![4, 5], vec![EOS])]).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.grad.max_abs_diff(&LmParameters::zeros(p.dims)), 0.0);
        let s = sequence_score(&p, &[4], &[EOS], Aggregation::SumLogProb).unwrap();
        assert_eq!(s.aggregate, 0.0);
    }

    #[test]
    fn uniform_model_loss_is_log_v() {
        let p = LmParameters::zeros(dims(9));
        let out = sft_loss_and_grad(&p, &[(vec![4], vec![5, 6]), (vec![], vec![7])]).unwrap();
        assert!((out.loss - 9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_answers_are_skipped_and_counted() {
        let p = LmParameters::zeros(dims(9));
        let out = sft_loss_and_grad(&p, &[(vec![4], vec![]), (vec![4], vec![5])]).unwrap();
        assert_eq!(out.skipped, 1);
        assert!(sft_loss_and_grad(&p, &[(vec![4], vec![])]).is_err());
    }

    #[test]
    fn sft_is_batch_order_invariant() {
        let p = LmParameters::random(dims(9), 1.0, &mut substream(2, "t"));
        let batch = vec![(vec![4], vec![5, 6]), (vec![7, 8], vec![4]), (vec![], vec![8, 8, 8])];
        let mut rev = batch.clone();
        rev.reverse();
        let a = sft_loss_and_grad(&p, &batch).unwrap();
        let b = sft_loss_and_grad(&p, &rev).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-12);
        assert!(a.grad.max_abs_diff(&b.grad) < 1e-12);
    }

    #[test]
    fn equal_scores_give_log_factorial() {
        let p = LmParameters::random(dims(9), 1.0, &mut substream(4, "t"));
        let same = vec![vec![4, 5], vec![4, 5], vec![4, 5]];
        let out = mpra_loss_and_grad(&p, &[6], &same, Aggregation::MeanLogProb).unwrap();
        assert!((out.loss - 6f64.ln()).abs() < 1e-12);
        // identical answers: the listwise gradient vanishes
        assert!(out.grad.max_abs_diff(&LmParameters::zeros(p.dims)) < 1e-12);
    }

    #[test]
    fn two_answers_reduce_to_bradley_terry() {
        let p = LmParameters::random(dims(9), 1.5, &mut substream(5, "t"));
        let (a, b) = (vec![4, 5, 6], vec![7]);
        let out = mpra_loss_and_grad(&p, &[8], &[a.clone(), b.clone()], Aggregation::MeanLogProb).unwrap();
        let m1 = sequence_score(&p, &[8], &a, Aggregation::MeanLogProb)
            .unwrap()
            .aggregate;
        let m2 = sequence_score(&p, &[8], &b, Aggregation::MeanLogProb)
            .unwrap()
            .aggregate;
        assert!((out.loss + log_logistic(m1 - m2)).abs() < 1e-12);
    }

    #[test]
    fn list_order_matters_unless_scores_tie() {
        let p = LmParameters::random(dims(9), 1.5, &mut substream(6, "t"));
        let list = vec![vec![4, 5], vec![6], vec![7, 8, 4]];
        let mut swapped = list.clone();
        swapped.swap(0, 2);
        let a = mpra_loss_and_grad(&p, &[5], &list, Aggregation::MeanLogProb)
            .unwrap()
            .loss;
        let b = mpra_loss_and_grad(&p, &[5], &swapped, Aggregation::MeanLogProb)
            .unwrap()
            .loss;
        assert!((a - b).abs() > 1e-6);
    }

    #[test]
    fn fewer_than_two_answers_is_domain_error() {
        let p = LmParameters::zeros(dims(9));
        assert!(mpra_loss_and_grad(&p, &[], &[vec![4]], Aggregation::MeanLogProb).is_err());
    }

    #[test]
    fn combined_is_additive() {
        let p = LmParameters::random(dims(9), 1.0, &mut substream(7, "t"));
        let list = vec![vec![4, 5], vec![6, 7], vec![8]];
        let mode = Aggregation::MeanLogProb;
        let zero = combined_loss_and_grad(&p, &[4], &list, 0.0, mode).unwrap();
        let mpra = mpra_loss_and_grad(&p, &[4], &list, mode).unwrap();
        assert_eq!(zero.loss, mpra.loss);
        assert_eq!(zero.grad, mpra.grad);
        let alpha = 0.7;
        let comb = combined_loss_and_grad(&p, &[4], &list, alpha, mode).unwrap();
        let sft = sft_loss_and_grad(&p, &[(vec![4], list[0].clone())]).unwrap();
        let mut expect = mpra.grad.clone();
        expect.axpy(alpha, &sft.grad);
        assert!(comb.grad.max_abs_diff(&expect) < 1e-12);
        assert!((comb.loss - (mpra.loss + alpha * sft.loss)).abs() < 1e-12);
    }

    #[test]
    fn combined_perfect_top_and_tied_scores() {
        // every answer is [EOS]: all scores equal and the top answer is fit exactly
        let p = sure_of_eos(6);
        let list = vec![vec![EOS], vec![EOS], vec![EOS]];
        let out = combined_loss_and_grad(&p, &[4], &list, 1.0, Aggregation::MeanLogProb).unwrap();
        assert!((out.loss - 6f64.ln()).abs() < 1e-12);
    }
}
