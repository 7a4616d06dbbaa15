//! Reverse-mode backpropagation through time for one block.
//!
//! The objective is `Σ_t CE(ŷ_t, y) + λ Σ_i (1 - Σ_t l_{t,i})² + γ Σ θ²`.
//! Gradients flow through the classifier, every LSTM layer, the location
//! softmax (which reads the previous top hidden state and feeds `x_t`), and
//! the two state-initialization MLPs.

use crate::error::{Error, Result};
use crate::objective::{self, LossBreakdown, LossConfig};
use crate::tensor::softmax_backward;

use super::forward::{BlockCache, InputPolicy};
use super::params::{GradientSet, ModelParams, ParamSet};

pub fn backward_block(
    cache: &BlockCache,
    params: &ModelParams,
    targets: &[usize],
    loss: &LossConfig,
) -> Result<(GradientSet, LossBreakdown)> {
    let config = &params.config;
    if cache.config != *config {
        return Err(Error::Contract(
            "block cache was produced with a different model configuration".into(),
        ));
    }
    if targets.len() != cache.steps.len() {
        return Err(Error::Contract(format!(
            "{} targets for {} steps",
            targets.len(),
            cache.steps.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&y| y >= config.classes) {
        return Err(Error::Data(format!("target class {bad} out of range")));
    }
    loss.validate()?;

    let d = config.hidden;
    let layers = config.layers;
    let steps = cache.steps.len();

    let y_hats: Vec<&[f64]> = cache.steps.iter().map(|s| s.y_hat.as_slice()).collect();
    let cross_entropy = objective::cross_entropy_indices(&y_hats, targets)?;
    let penalized = cache.policy == InputPolicy::Learned;
    let ls: Vec<Vec<f64>> = if penalized {
        cache.steps.iter().filter_map(|s| s.l.clone()).collect()
    } else {
        Vec::new()
    };
    let attention_penalty = if penalized {
        objective::attention_penalty_term(&ls, loss.lambda)?
    } else {
        0.0
    };
    let weight_decay = objective::weight_decay_term(params, loss.gamma);
    let breakdown = LossBreakdown::new(cross_entropy, attention_penalty, weight_decay);

    let mut grad = params.zeros_like();
    // d penalty / d l_{t,i} = -2λ (1 - S_i), identical for every t.
    let penalty_grad: Option<Vec<f64>> =
        penalized.then(|| objective::attention_penalty_grad(&ls, loss.lambda));

    let mut dh_next = vec![vec![0.0; d]; layers];
    let mut dc_next = vec![vec![0.0; d]; layers];

    for t in (0..steps).rev() {
        let step = &cache.steps[t];
        let prev = if t == 0 {
            &cache.initial
        } else {
            &cache.steps[t - 1].state
        };

        // classifier: dlogits = ŷ - onehot
        let mut dlogits = step.y_hat.clone();
        dlogits[targets[t]] -= 1.0;
        let mut dact = vec![0.0; d];
        params.cls_out.backward(
            &mut grad.cls_out,
            &step.classifier.act,
            &dlogits,
            Some(&mut dact),
        );
        let dz: Vec<f64> = dact
            .iter()
            .zip(&step.classifier.act)
            .map(|(g, a)| g * (1.0 - a * a))
            .collect();
        let mut dcls_in = vec![0.0; d];
        params.cls_hidden.backward(
            &mut grad.cls_hidden,
            &step.classifier.input,
            &dz,
            Some(&mut dcls_in),
        );
        if let Some(m) = &cache.masks {
            dcls_in
                .iter_mut()
                .zip(&m.classifier)
                .for_each(|(g, k)| *g *= k);
        }

        let mut dh: Vec<Vec<f64>> = std::mem::replace(&mut dh_next, vec![vec![0.0; d]; layers]);
        dh[layers - 1]
            .iter_mut()
            .zip(&dcls_in)
            .for_each(|(a, b)| *a += b);

        let mut dx = vec![0.0; config.feat_dim];
        for layer in (0..layers).rev() {
            let lc = &step.layers[layer];
            let c_prev = &prev.c[layer];
            let mut dz = vec![0.0; 4 * d];
            let mut dc_prev = vec![0.0; d];
            for k in 0..d {
                let dhk = dh[layer][k];
                let dc = dc_next[layer][k] + dhk * lc.o[k] * (1.0 - lc.tanh_c[k] * lc.tanh_c[k]);
                let d_o = dhk * lc.tanh_c[k];
                let d_i = dc * lc.g[k];
                let d_g = dc * lc.i[k];
                let d_f = dc * c_prev[k];
                dc_prev[k] = dc * lc.f[k];
                dz[k] = d_i * lc.i[k] * (1.0 - lc.i[k]);
                dz[d + k] = d_f * lc.f[k] * (1.0 - lc.f[k]);
                dz[2 * d + k] = d_o * lc.o[k] * (1.0 - lc.o[k]);
                dz[3 * d + k] = d_g * (1.0 - lc.g[k] * lc.g[k]);
            }
            let mut joined = Vec::with_capacity(d + lc.input.len());
            joined.extend_from_slice(&prev.h[layer]);
            joined.extend_from_slice(&lc.input);
            let mut djoined = vec![0.0; joined.len()];
            params.lstm[layer].backward(&mut grad.lstm[layer], &joined, &dz, Some(&mut djoined));

            dh_next[layer].copy_from_slice(&djoined[..d]);
            dc_next[layer] = dc_prev;
            let dinput = &djoined[d..];
            if layer > 0 {
                let mask = cache
                    .masks
                    .as_ref()
                    .map(|m| m.between[layer - 1].as_slice());
                for k in 0..d {
                    dh[layer - 1][k] += dinput[k] * mask.map_or(1.0, |m| m[k]);
                }
            } else {
                let mask = cache.masks.as_ref().map(|m| m.input.as_slice());
                for (k, g) in dx.iter_mut().enumerate() {
                    *g = dinput[k] * mask.map_or(1.0, |m| m[k]);
                }
            }
        }

        if cache.policy == InputPolicy::Learned {
            let attn = params.attn.as_ref().expect("learned policy has attention");
            let l = step.l.as_ref().expect("learned policy records l");
            let dim = config.feat_dim;
            let penalty = penalty_grad.as_ref().expect("penalized");
            let dl: Vec<f64> = cache.frames[t]
                .chunks_exact(dim)
                .zip(penalty)
                .map(|(slice, p)| crate::tensor::dot(slice, &dx) + p)
                .collect();
            let dlogits = softmax_backward(l, &dl);
            let gattn = grad.attn.as_mut().expect("same structure");
            // l_t reads the previous top state, which feeds the recurrence at t-1.
            attn.backward(gattn, prev.top(), &dlogits, Some(&mut dh_next[layers - 1]));
        }
    }

    // h_0 and c_0 come from the init MLPs.
    let dh0: Vec<f64> = dh_next.concat();
    let dc0: Vec<f64> = dc_next.concat();
    params
        .init_h
        .backward(&mut grad.init_h, &cache.init.mean, &cache.init.act_h, &dh0);
    params
        .init_c
        .backward(&mut grad.init_c, &cache.init.mean, &cache.init.act_c, &dc0);

    if loss.gamma != 0.0 {
        grad.add_scaled(params, 2.0 * loss.gamma);
    }
    Ok((grad, breakdown))
}
