//! Single-step building blocks: state initialization, the location softmax,
//! expectation pooling, the stacked LSTM step and the classifier.

use crate::data::FrameView;
use crate::error::{Error, Result};
use crate::tensor::{sigmoid, softmax_unchecked};

use super::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-layer hidden and cell states.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn zeros(layers: usize, hidden: usize) -> Self {
        Self {
            h: vec![vec![0.0; hidden]; layers],
            c: vec![vec![0.0; hidden]; layers],
        }
    }

    pub fn top(&self) -> &[f64] {
        self.h.last().expect("at least one layer")
    }
}

/// What one step produces.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Attention distribution over the `K²` regions used at this step; `None`
    /// for the pooled baselines, which have no location softmax.
    pub l: Option<Vec<f64>>,
    pub y_hat: Vec<f64>,
    /// The pooled input fed to the first LSTM layer.
    pub x: Vec<f64>,
}

/// Dropout multipliers for one block.
///
/// In training these hold 0/1 keep masks drawn once per block; at evaluation
/// every entry is `1 - p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    /// Applied to the pooled input entering layer 1.
    pub input: Vec<f64>,
    /// `between[l]` is applied to the output of layer `l` entering layer `l + 1`.
    pub between: Vec<Vec<f64>>,
    /// Applied to the top hidden state entering the classifier.
    pub classifier: Vec<f64>,
}

impl DropoutMasks {
    pub fn sample(params: &ModelParams, rng: &mut crate::rng::Rng) -> Self {
        let c = &params.config;
        let keep = 1.0 - c.dropout;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if rng.bernoulli(keep) { 1.0 } else { 0.0 })
                .collect()
        };
        Self {
            input: draw(c.feat_dim),
            between: (1..c.layers).map(|_| draw(c.hidden)).collect(),
            classifier: draw(c.hidden),
        }
    }

    pub fn constant(params: &ModelParams, value: f64) -> Self {
        let c = &params.config;
        Self {
            input: vec![value; c.feat_dim],
            between: vec![vec![value; c.hidden]; c.layers - 1],
            classifier: vec![value; c.hidden],
        }
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        let c = &params.config;
        let ok = self.input.len() == c.feat_dim
            && self.between.len() + 1 == c.layers
            && self.between.iter().all(|m| m.len() == c.hidden)
            && self.classifier.len() == c.hidden;
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(
                "dropout masks do not match the model shape".into(),
            ))
        }
    }
}

/// Resolves the multipliers to use for a given mode.
///
/// Masks are only accepted in training mode. Without masks, training applies
/// no dropout and evaluation scales by `1 - p`.
pub(crate) fn resolve_dropout(
    params: &ModelParams,
    mode: Mode,
    masks: Option<&DropoutMasks>,
) -> Result<Option<DropoutMasks>> {
    match (mode, masks) {
        (Mode::Eval, Some(_)) => Err(Error::Contract(
            "dropout masks supplied in evaluation mode".into(),
        )),
        (Mode::Train, Some(m)) => {
            m.check(params)?;
            Ok(Some(m.clone()))
        }
        (Mode::Train, None) => Ok(None),
        (Mode::Eval, None) if params.config.dropout > 0.0 => Ok(Some(DropoutMasks::constant(
            params,
            1.0 - params.config.dropout,
        ))),
        (Mode::Eval, None) => Ok(None),
    }
}

fn apply_mask(v: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
    match mask {
        Some(m) => v.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => v.to_vec(),
    }
}

fn check_len(op: &'static str, v: &[f64], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::dim(op, &[v.len()], &[n]))
    }
}

/// Frame-and-slice mean of the block, `(1/T) Σ_t (1/K²) Σ_i X_{t,i}`.
pub fn feature_mean(frames: &FrameView<'_>) -> Vec<f64> {
    let mut m = vec![0.0; frames.dim];
    for t in 0..frames.steps {
        let mut frame_sum = vec![0.0; frames.dim];
        for i in 0..frames.regions {
            frame_sum
                .iter_mut()
                .zip(frames.slice(t, i))
                .for_each(|(a, b)| *a += b);
        }
        m.iter_mut()
            .zip(&frame_sum)
            .for_each(|(a, s)| *a += s / frames.regions as f64);
    }
    m.iter_mut().for_each(|v| *v /= frames.steps as f64);
    m
}

pub(crate) struct InitCache {
    pub mean: Vec<f64>,
    pub act_c: Vec<f64>,
    pub act_h: Vec<f64>,
}

pub(crate) fn init_state_cached(
    frames: &FrameView<'_>,
    params: &ModelParams,
) -> Result<(LstmState, InitCache)> {
    let c = &params.config;
    if frames.steps == 0 {
        return Err(Error::Data(
            "cannot initialize state from an empty clip".into(),
        ));
    }
    if frames.dim != c.feat_dim || frames.regions != c.regions() {
        return Err(Error::dim(
            "init_state",
            &[frames.regions, frames.dim],
            &[c.regions(), c.feat_dim],
        ));
    }
    let mean = feature_mean(frames);
    let (act_c, out_c) = params.init_c.forward(&mean);
    let (act_h, out_h) = params.init_h.forward(&mean);
    let d = c.hidden;
    let state = LstmState {
        h: out_h.chunks_exact(d).map(<[f64]>::to_vec).collect(),
        c: out_c.chunks_exact(d).map(<[f64]>::to_vec).collect(),
    };
    Ok((state, InitCache { mean, act_c, act_h }))
}

/// `c_0 = f_init,c(m)` and `h_0 = f_init,h(m)`, split into per-layer vectors.
pub fn init_state(frames: &FrameView<'_>, params: &ModelParams) -> Result<LstmState> {
    init_state_cached(frames, params).map(|(s, _)| s)
}

/// Distribution over the `K²` regions from the top layer's previous hidden state.
pub fn location_softmax(h_prev_top: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    let attn = params.attn()?;
    check_len("location_softmax", h_prev_top, attn.in_dim())?;
    Ok(softmax_unchecked(&attn.apply(h_prev_top)))
}

/// Expectation of the frame's slices under `l`: `Σ_i l_i X_{t,i}`.
///
/// `frame` is the `K²·D` row-major slice block of one time step.
pub fn attend(frame: &[f64], l: &[f64]) -> Result<Vec<f64>> {
    if l.is_empty() || !frame.len().is_multiple_of(l.len()) {
        return Err(Error::dim("attend", &[frame.len()], &[l.len()]));
    }
    let total: f64 = l.iter().sum();
    if (total - 1.0).abs() > 1e-6 || l.iter().any(|&p| p < 0.0) {
        return Err(Error::Contract(format!(
            "attention weights must form a probability vector (sum = {total})"
        )));
    }
    Ok(attend_unchecked(frame, l))
}

pub(crate) fn attend_unchecked(frame: &[f64], l: &[f64]) -> Vec<f64> {
    let dim = frame.len() / l.len();
    let mut x = vec![0.0; dim];
    for (&w, slice) in l.iter().zip(frame.chunks_exact(dim)) {
        x.iter_mut().zip(slice).for_each(|(a, b)| *a += w * b);
    }
    x
}

/// Everything one layer computed at one step.
#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    /// Input after dropout, i.e. the part of `[h_prev; input]` below `h_prev`.
    pub input: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub(crate) fn lstm_step_cached(
    x: &[f64],
    prev: &LstmState,
    params: &ModelParams,
    masks: Option<&DropoutMasks>,
) -> (LstmState, Vec<LayerCache>) {
    let d = params.config.hidden;
    let layers = params.config.layers;
    let mut next = LstmState {
        h: Vec::with_capacity(layers),
        c: Vec::with_capacity(layers),
    };
    let mut caches = Vec::with_capacity(layers);
    for (layer, m) in params.lstm.iter().enumerate() {
        let mask = masks.map(|mk| {
            if layer == 0 {
                mk.input.as_slice()
            } else {
                mk.between[layer - 1].as_slice()
            }
        });
        let below: &[f64] = if layer == 0 { x } else { &next.h[layer - 1] };
        let input = apply_mask(below, mask);
        let mut joined = Vec::with_capacity(d + input.len());
        joined.extend_from_slice(&prev.h[layer]);
        joined.extend_from_slice(&input);
        let z = m.apply(&joined);
        let i: Vec<f64> = z[..d].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[d..2 * d].iter().map(|&v| sigmoid(v)).collect();
        let o: Vec<f64> = z[2 * d..3 * d].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[3 * d..].iter().map(|&v| v.tanh()).collect();
        let c: Vec<f64> = (0..d)
            .map(|k| f[k] * prev.c[layer][k] + i[k] * g[k])
            .collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
        next.h.push(h);
        next.c.push(c);
        caches.push(LayerCache {
            input,
            i,
            f,
            o,
            g,
            tanh_c,
        });
    }
    (next, caches)
}

/// One step of the stacked LSTM.
///
/// Masks may only be given in training mode; in evaluation mode the
/// non-recurrent inputs are scaled by `1 - p` instead.
pub fn lstm_step(
    x: &[f64],
    prev: &LstmState,
    params: &ModelParams,
    mode: Mode,
    masks: Option<&DropoutMasks>,
) -> Result<LstmState> {
    let c = &params.config;
    check_len("lstm_step", x, c.feat_dim)?;
    if prev.h.len() != c.layers || prev.c.len() != c.layers {
        return Err(Error::dim("lstm_step", &[prev.h.len()], &[c.layers]));
    }
    let masks = resolve_dropout(params, mode, masks)?;
    Ok(lstm_step_cached(x, prev, params, masks.as_ref()).0)
}

pub(crate) struct ClassifierCache {
    pub input: Vec<f64>,
    pub act: Vec<f64>,
}

pub(crate) fn classify_cached(
    h_top: &[f64],
    params: &ModelParams,
    mask: Option<&[f64]>,
) -> (Vec<f64>, ClassifierCache) {
    let input = apply_mask(h_top, mask);
    let mut act = params.cls_hidden.apply(&input);
    act.iter_mut().for_each(|v| *v = v.tanh());
    let y = softmax_unchecked(&params.cls_out.apply(&act));
    (y, ClassifierCache { input, act })
}

/// `softmax(cls_out(tanh(cls_hidden(h_top))))`.
pub fn classify(
    h_top: &[f64],
    params: &ModelParams,
    mode: Mode,
    mask: Option<&[f64]>,
) -> Result<Vec<f64>> {
    check_len("classify", h_top, params.config.hidden)?;
    let resolved = match (mode, mask) {
        (Mode::Eval, Some(_)) => {
            return Err(Error::Contract(
                "dropout mask supplied in evaluation mode".into(),
            ))
        }
        (Mode::Train, Some(m)) => {
            check_len("classify", m, params.config.hidden)?;
            Some(m.to_vec())
        }
        (Mode::Train, None) => None,
        (Mode::Eval, None) => resolve_dropout(params, mode, None)?.map(|m| m.classifier),
    };
    Ok(classify_cached(h_top, params, resolved.as_deref()).0)
}
